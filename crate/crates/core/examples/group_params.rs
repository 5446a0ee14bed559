//! Effective volatility σ̄, leverage constant D̄ and diffusion time τ̄ for a few volatility
//! functions, including a tabulated one.

use roughvol::gaussfunc::{d_bar_bound, d_bar_horizon, DEFAULT_GH_ORDER, DEFAULT_QUAD_TOL};
use roughvol::{group_params, ModelParams, VolFunction};

fn main() -> roughvol::Result<()> {
    let knots: Vec<f64> = (-3..=3).map(f64::from).collect();
    let values: Vec<f64> = knots.iter().map(|k| 0.2 * (0.6 * k).exp()).collect();
    let cases = [
        ("constant 0.2", VolFunction::constant(0.2)?),
        ("sigmoid 0.1..0.3", VolFunction::bounded_sigmoid(0.1, 0.3, 1.0)?),
        ("sigmoid 0.05..0.6 steep", VolFunction::bounded_sigmoid(0.05, 0.6, 3.0)?),
        ("table 0.2 e^{0.6 z}", VolFunction::user_table(knots, values, 0.6)?),
    ];
    for h in [0.1, 0.3] {
        println!("H = {h}");
        println!(
            "  {:<24} {:>10} {:>12} {:>10} {:>12} {:>14}",
            "F", "sigma_bar", "d_bar", "tau_bar", "|d_bar| bound", "d_bar at T/eps=100"
        );
        for (name, f) in &cases {
            let mp = ModelParams::new(h, 0.01, -0.5, f.clone())?;
            let gp = group_params(&mp)?;
            let finite = d_bar_horizon(f, mp.hurst, 100.0, DEFAULT_GH_ORDER, DEFAULT_QUAD_TOL)?;
            println!(
                "  {name:<24} {:>10.6} {:>12.4e} {:>10.3} {:>12.4e} {:>14.4e}",
                gp.sigma_bar,
                gp.d_bar,
                gp.tau_bar,
                d_bar_bound(f, mp.hurst),
                finite
            );
        }
    }
    Ok(())
}
