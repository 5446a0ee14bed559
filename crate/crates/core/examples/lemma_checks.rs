//! The three rates behind the price expansion: the leverage term ϑ, whose mean gives D̄; the
//! fluctuation term φ, with variance of order ε^{2-2H}; and the residual κ.

use roughvol::experiments::{
    kappa_check, phi_variance_check_with, vartheta_check, vartheta_decorrelation, LemmaOptions,
};
use roughvol::{ModelParams, VolFunction};

fn main() -> roughvol::Result<()> {
    let knots: Vec<f64> = (-4..=4).map(f64::from).collect();
    let values: Vec<f64> = knots.iter().map(|k| 0.05 * k.exp()).collect();
    let steep = VolFunction::user_table(knots, values, 1.0)?;
    let mp = ModelParams::new(0.1, 0.01, -0.5, steep)?.with_maturity(100.0)?;
    let v = vartheta_check(&mp, 20_000, 1)?;
    println!(
        "vartheta: mean/sqrt(eps) = {:.4e} ± {:.1e}",
        v.scaled_mean,
        v.mean.std_error / mp.eps.sqrt()
    );
    println!(
        "          d_bar = {:.4e}, finite-horizon value = {:.4e}",
        v.d_bar, v.d_bar_horizon
    );
    println!(
        "          max |sigma vartheta| = {:.3e} <= bound {:.3e}",
        v.max_abs, v.bound
    );

    let f = VolFunction::bounded_sigmoid(0.1, 0.3, 1.0)?;
    let mp = ModelParams::new(0.3, 0.05, -0.5, f)?;
    for d in vartheta_decorrelation(&mp, &[0.5, 2.0, 8.0], 2000, 1, &LemmaOptions::default())? {
        println!(
            "          lag {:>4} eps: cov/eps = {:+.2e} ± {:.1e}, corr = {:+.3}",
            d.lag, d.scaled_cov.mean, d.scaled_cov.std_error, d.correlation
        );
    }

    let grid = [0.1, 0.05, 0.025, 0.0125];
    let long = mp.clone().with_maturity(100.0)?;
    let p = phi_variance_check_with(&long, &grid, 2000, 1, &LemmaOptions::default())?;
    println!(
        "phi: slope of log E[phi^2] = {:.3} ± {:.3} (rate {:.2})",
        p.fit.slope, p.fit.slope_se, p.expected_slope
    );
    for q in &p.points {
        println!(
            "     eps {:<7} E[phi] = {:+.2e} ± {:.1e}  E[phi^2] = {:.3e}",
            q.eps, q.mean.mean, q.mean.std_error, q.mean_sq.mean
        );
    }

    let k = kappa_check(&mp, &grid, 2000, 1)?;
    println!(
        "kappa: slope of log sup E[kappa^2] = {:.3} (bound rate {:.2})",
        k.fit.slope, k.bound_slope
    );
    for q in &k.points {
        println!(
            "       eps {:<7} eps^-1/2 rms = {:.3e}  E[kappa_T] = {:+.2e} ± {:.1e}",
            q.eps, q.scaled_rms, q.mean_at_maturity.mean, q.mean_at_maturity.std_error
        );
    }
    Ok(())
}
