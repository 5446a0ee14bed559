//! The fOU kernel K and the stationary autocorrelation C_Z, evaluated both in the time domain
//! and through the spectral density, together with their small- and large-lag power laws.

use roughvol::kernel::{sigma_ou, CovRepr, CovarianceEval, KernelEval};
use roughvol::Hurst;
use statrs::function::gamma::gamma;

fn main() -> roughvol::Result<()> {
    for h in [0.1, 0.3] {
        let hurst = Hurst::new(h)?;
        let ke = KernelEval::new(hurst);
        println!(
            "H = {h}: sigma_ou = {:.10}, int K^2 = {:.10}, int |K| = {:.6}",
            sigma_ou(hurst),
            ke.l2_norm_sq()?,
            ke.l1_norm()
        );
        println!("  K changes sign at t = {:.6}", ke.sign_change());
        for t in [1e-3, 0.1, 1.0, 10.0, 100.0] {
            println!(
                "  K({t:>6}) = {:+.6e}   int_0^t K = {:+.6e}",
                ke.k(t)?,
                ke.antiderivative(t)
            );
        }

        let td = CovarianceEval::new(hurst, CovRepr::TimeDomain);
        let sp = CovarianceEval::new(hurst, CovRepr::Spectral);
        println!("  {:>8} {:>14} {:>14} {:>10}", "s", "C_Z time", "C_Z spectral", "diff");
        for s in [0.01, 0.1, 0.5, 1.0, 2.0, 5.0, 20.0] {
            let (a, b) = (td.cz(s)?, sp.cz(s)?);
            println!("  {s:>8} {a:>14.10} {b:>14.10} {:>10.2e}", (a - b).abs());
        }
        let s = 1e-3;
        let small = (1.0 - td.cz(s)?) * gamma(2.0 * h + 1.0) / s.powf(2.0 * h);
        let s = 1e3;
        let large = td.cz(s)? * gamma(2.0 * h - 1.0) / s.powf(2.0 * h - 2.0);
        println!("  small-lag ratio {small:.4}, large-lag ratio {large:.4}\n");
    }
    Ok(())
}
