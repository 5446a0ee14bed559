//! The one-sided (Riemann–Liouville) driver started at a fixed value: its normalized covariance
//! approaches the stationary one within a few ε, and its paths can replace the stationary ones.

use roughvol::experiments::{mc_price_with, rl_covariance_check, Dynamics, Estimator, McOptions};
use roughvol::pricing::Payoff;
use roughvol::simulate::SimGrid;
use roughvol::{ModelParams, VolFunction};

fn main() -> roughvol::Result<()> {
    let r = rl_covariance_check(0.3, &[1.0, 3.0, 10.0, 30.0], &[0.1, 1.0, 5.0])?;
    for p in &r.points {
        println!(
            "t = {:>4} eps, s = {:>3} eps: one-sided {:.5}, stationary {:.5}",
            p.t, p.s, p.one_sided, p.stationary
        );
    }

    let f = VolFunction::bounded_sigmoid(0.1, 0.3, 1.0)?;
    let mp = ModelParams::new(0.3, 0.05, -0.5, f)?;
    let grid = SimGrid::resolving(&mp, 16.0, 20.0);
    let payoff = Payoff::smooth_call(100.0, 0.05)?;
    for dynamics in [
        Dynamics::Stationary,
        Dynamics::RiemannLiouville { z0: 0.0 },
        Dynamics::RiemannLiouville { z0: 2.0 },
    ] {
        let opts = McOptions {
            estimator: Estimator::ConditionalOnW,
            dynamics,
            antithetic: true,
        };
        let m = mc_price_with(&mp, &grid, &payoff, 10_000, 5, &opts)?;
        println!("{dynamics:?}: {:.5} ± {:.5}", m.mean, m.std_error);
    }
    Ok(())
}
