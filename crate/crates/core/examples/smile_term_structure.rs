//! The affine implied-volatility smile of the corrected price and the maturity dependence of the
//! small-amplitude correction.

use roughvol::experiments::{smile_study, term_structure_study};
use roughvol::pricing::{Regime, TermStructureParams};
use roughvol::{group_params, ModelParams, VolFunction};

fn main() -> roughvol::Result<()> {
    let f = VolFunction::bounded_sigmoid(0.05, 0.6, 3.0)?;
    let mp = ModelParams::new(0.3, 0.0125, -0.5, f)?;
    let gp = group_params(&mp)?;
    let strikes: Vec<f64> = (0..=8).map(|i| 90.0 + 2.5 * f64::from(i)).collect();
    let s = smile_study(&mp, &gp, &strikes, 0.0)?;
    for p in &s.points {
        println!(
            "log-moneyness {:+.4}: iv {:.6} (expansion {:.6})",
            p.log_moneyness, p.implied_vol_inverted, p.implied_vol_asymptotic
        );
    }
    println!(
        "smile slope {:.4e} gives d_bar {:.4e} (d_bar {:.4e})\n",
        s.fit.slope, s.implied_d_bar, s.d_bar
    );

    let ts = TermStructureParams {
        regime: Regime::SmallAmplitude,
        tau_mr: 0.1,
        delta_sigma: 0.01,
        tau_bar: 50.0,
    };
    let taus: Vec<f64> = (0..=48).map(|i| 1e-5 * 10f64.powf(f64::from(i) / 6.0)).collect();
    let r = term_structure_study(0.3, &ts, &taus)?;
    for p in r.points.iter().step_by(6) {
        println!("tau {:>9.2e}: factor {:.4e}", p.tau, p.factor);
    }
    println!(
        "slopes: short {:.3} (H+1/2), long {:.3} (H-1/2)",
        r.short_slope.unwrap_or(f64::NAN),
        r.long_slope.unwrap_or(f64::NAN)
    );
    println!("zeta: slow {:.2}, fast {:.2}", r.zeta_slow, r.zeta_fast);
    Ok(())
}
