//! Error of the corrected price against Monte Carlo over a dyadic ε grid.
//!
//! `cargo run --release --example convergence_study -- [paths] [rl]`

use roughvol::experiments::{convergence_study_with, ConvergenceOptions, Dynamics};
use roughvol::pricing::Payoff;
use roughvol::{ModelParams, VolFunction};

fn main() -> roughvol::Result<()> {
    let mut args = std::env::args().skip(1);
    let paths: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(20_000);
    let rl = args.next().as_deref() == Some("rl");

    let knots: Vec<f64> = (-3..=3).map(f64::from).collect();
    let values: Vec<f64> = knots.iter().map(|k| 0.2 * (0.6 * k).exp()).collect();
    let f = VolFunction::user_table(knots, values, 0.6)?;
    let mp = ModelParams::new(0.3, 0.1, -0.5, f)?;
    let payoff = Payoff::smooth_call(125.0, 0.05)?;
    let mut opts = ConvergenceOptions::default();
    if rl {
        opts.dynamics = Dynamics::RiemannLiouville { z0: 0.0 };
    }
    let r = convergence_study_with(&mp, &[0.1, 0.05, 0.025, 0.0125], &payoff, paths, 3, &opts)?;
    println!(
        "{:>8} {:>10} {:>10} {:>10} {:>10} {:>16}",
        "eps", "mc", "q_eps", "error", "error_bs", "error/sqrt(eps)"
    );
    for p in &r.points {
        println!(
            "{:>8} {:>10.5} {:>10.5} {:>10.2e} {:>10.2e} {:>9.4} ± {:.4}",
            p.eps, p.mc.mean, p.q_eps, p.error, p.error_bs, p.scaled_error, p.scaled_std_error
        );
        if let Some(i) = p.interior {
            println!(
                "{:>8} at t = {}: mean error {:+.2e} ± {:.1e} (Black-Scholes {:+.2e})",
                "", i.t, i.corrected.mean, i.corrected.std_error, i.black_scholes.mean
            );
        }
    }
    println!(
        "trend {:?}, better than Black-Scholes: {}, unresolved: {:?}",
        r.trend, r.beats_black_scholes, r.inconclusive
    );
    println!(
        "log-log slope of the error: {:.3} ± {:.3}",
        r.rate_fit.slope, r.rate_fit.slope_se
    );
    Ok(())
}
