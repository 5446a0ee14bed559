//! First-order corrected price of a call and of a smoothed call, the implied volatilities, and a
//! Monte Carlo price for comparison.

use roughvol::experiments::{mc_price_with, Estimator, McOptions};
use roughvol::pricing::{corrected_price, Payoff};
use roughvol::simulate::SimGrid;
use roughvol::{group_params, ModelParams, VolFunction};

fn main() -> roughvol::Result<()> {
    let f = VolFunction::bounded_sigmoid(0.1, 0.3, 1.0)?;
    let mp = ModelParams::new(0.3, 0.02, -0.5, f)?;
    let gp = group_params(&mp)?;
    println!("sigma_bar = {:.6}, d_bar = {:.4e}", gp.sigma_bar, gp.d_bar);

    println!(
        "{:>8} {:>12} {:>12} {:>10} {:>10}",
        "strike", "q0", "q_eps", "iv", "iv asympt"
    );
    for k in [80.0, 90.0, 100.0, 110.0, 120.0] {
        let r = corrected_price(&mp, &gp, &Payoff::call(k)?, 0.0)?;
        println!(
            "{k:>8} {:>12.6} {:>12.6} {:>10.6} {:>10.6}",
            r.q0,
            r.q_eps,
            r.implied_vol_inverted.unwrap_or(f64::NAN),
            r.implied_vol_asymptotic.unwrap_or(f64::NAN)
        );
    }

    let payoff = Payoff::smooth_call(110.0, 0.05)?;
    let r = corrected_price(&mp, &gp, &payoff, 0.0)?;
    let grid = SimGrid::resolving(&mp, 16.0, 20.0);
    let opts = McOptions {
        estimator: Estimator::ConditionalOnW,
        ..Default::default()
    };
    let mc = mc_price_with(&mp, &grid, &payoff, 20_000, 1, &opts)?;
    println!(
        "smoothed call at 110: Black-Scholes {:.5}, corrected {:.5}",
        r.q0, r.q_eps
    );
    println!(
        "Monte Carlo {:.5} ± {:.5} ({} paths)",
        mc.mean, mc.std_error, mc.n_paths
    );
    Ok(())
}
