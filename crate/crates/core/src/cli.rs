//! Command-line front end. `run` parses arguments, loads and overrides the configuration,
//! runs one command and writes its tables; it returns the process exit code.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{Format, RunConfig};
use crate::error::{Error, Result};
use crate::experiments::{
    convergence_study_with, kappa_check, mc_price_with, phi_variance_check_with, smile_study, term_structure_study,
    vartheta_check_with, vartheta_decorrelation, Dynamics,
};
use crate::gaussfunc::{group_params, group_params_with};
use crate::pricing::corrected_price;
use crate::report::{ReportWriter, Table};
use crate::simulate::{simulate_paths, simulate_paths_rl};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "roughvol",
    version,
    about = "Rough fast-mean-reverting stochastic volatility: parameters, prices, paths and studies",
    after_help = "Without --config the built-in defaults are used: bounded sigmoid F (0.1, 0.3, slope 1), \
                  H = 0.3, eps = 0.05, rho = -0.5, x0 = 100, T = 1, smoothed call at 100, 16 steps per eps, \
                  20 eps of warmup, 200000 paths. ROUGHVOL_THREADS caps the worker threads."
)]
pub struct Cli {
    #[command(flatten)]
    pub overrides: Overrides,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Overrides {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Monte Carlo paths (also the sample count of the lemma checks).
    #[arg(long, global = true)]
    pub paths: Option<u64>,
    #[arg(long, global = true)]
    pub eps: Option<f64>,
    #[arg(long, global = true)]
    pub hurst: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub rho: Option<f64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Comma-separated subset of csv, json, txt.
    #[arg(long, global = true, value_delimiter = ',')]
    pub format: Option<Vec<Format>>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// σ̄, D̄, τ̄ and the Gaussian moments of F.
    Params,
    /// Corrected price, implied volatilities and the Monte Carlo price side by side.
    Price,
    /// Simulated paths of (W, B, Z, σ, X).
    Simulate,
    /// One of the numerical studies.
    Study { which: StudyKind },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StudyKind {
    Convergence,
    Vartheta,
    Phi,
    Kappa,
    Smile,
    Termstructure,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) -> Result<()> {
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(n) = self.paths {
            cfg.mc.n_paths = n;
            cfg.study.lemma_paths = n;
        }
        if let Some(e) = self.eps {
            cfg.model.eps = e;
        }
        if let Some(h) = self.hurst {
            cfg.model.hurst = crate::kernel::Hurst::new(h)?;
        }
        if let Some(r) = self.rho {
            cfg.model.rho = r;
        }
        if let Some(o) = &self.out {
            cfg.output.dir = o.clone();
        }
        if let Some(f) = &self.format {
            cfg.output.formats = f.clone();
        }
        cfg.validate()
    }
}

/// Resolves the configuration for a parsed command line.
pub fn load_config(o: &Overrides) -> Result<RunConfig> {
    let mut cfg = match &o.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    o.apply(&mut cfg)?;
    Ok(cfg)
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let cfg = match load_config(&cli.overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    match execute(&cli.command, &cfg) {
        Ok(summary) => {
            print!("{summary}");
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config_error() {
                EXIT_CONFIG
            } else {
                EXIT_NUMERICAL
            }
        }
    }
}

/// Runs one command and returns the text printed to stdout.
pub fn execute(cmd: &Command, cfg: &RunConfig) -> Result<String> {
    let w = ReportWriter::new(cfg);
    let (table, notes, files) = match cmd {
        Command::Params => params(cfg, &w)?,
        Command::Price => price(cfg, &w)?,
        Command::Simulate => simulate(cfg, &w)?,
        Command::Study { which } => study(*which, cfg, &w)?,
    };
    let mut out = table.to_txt(&w.header(&notes));
    for f in files {
        out.push_str(&format!("wrote {}\n", f.display()));
    }
    Ok(out)
}

type Outcome = (Table, Vec<String>, Vec<PathBuf>);

fn params(cfg: &RunConfig, w: &ReportWriter) -> Result<Outcome> {
    let mp = &cfg.model;
    let gp = group_params(mp)?;
    // same quantities at a finer quadrature, as an accuracy diagnostic
    let fine = group_params_with(&mp.vol_fn, mp.hurst, 64, 1e-11)?;
    let mut t = Table::new(&["name", "value", "fine_quadrature_diff"]);
    let mut row = |k: &str, v: f64, d: f64| t.push(vec![k.into(), v.into(), d.into()]);
    row("hurst", mp.hurst.value(), 0.0);
    row("eps", mp.eps, 0.0);
    row("rho", mp.rho, 0.0);
    row("x0", mp.x0, 0.0);
    row("maturity", mp.maturity, 0.0);
    row("sigma_bar", gp.sigma_bar, fine.sigma_bar - gp.sigma_bar);
    row("d_bar", gp.d_bar, fine.d_bar - gp.d_bar);
    row("tau_bar", gp.tau_bar, fine.tau_bar - gp.tau_bar);
    row("mean_f", gp.mean_f, fine.mean_f - gp.mean_f);
    row("var_f", gp.var_f, fine.var_f - gp.var_f);
    row("mean_fprime", gp.mean_fp, fine.mean_fp - gp.mean_fp);
    row("mean_fprime_sq", gp.mean_fp2, fine.mean_fp2 - gp.mean_fp2);
    let files = w.write("params", &t, &gp, &[])?;
    Ok((t, vec![], files))
}

fn price(cfg: &RunConfig, w: &ReportWriter) -> Result<Outcome> {
    let mp = &cfg.model;
    let gp = group_params(mp)?;
    let st = cfg.study.t;
    let r = corrected_price(mp, &gp, &cfg.payoff, st)?;
    let mut notes = vec![];
    let mc = if st == 0.0 {
        let grid = cfg.grid.grid(mp);
        Some(mc_price_with(
            mp,
            &grid,
            &cfg.payoff,
            cfg.mc.n_paths,
            cfg.seed,
            &cfg.mc.options(),
        )?)
    } else {
        notes.push("Monte Carlo price is computed at t = 0 only".to_string());
        None
    };
    let mut t = Table::new(&[
        "t",
        "q0",
        "q1",
        "q_eps",
        "implied_vol_inverted",
        "implied_vol_asymptotic",
        "mc_mean",
        "mc_std_error",
        "mc_paths",
        "mc_minus_q_eps_over_se",
    ]);
    let nan = f64::NAN;
    t.push(vec![
        st.into(),
        r.q0.into(),
        r.q1.into(),
        r.q_eps.into(),
        r.implied_vol_inverted.unwrap_or(nan).into(),
        r.implied_vol_asymptotic.unwrap_or(nan).into(),
        mc.map_or(nan, |m| m.mean).into(),
        mc.map_or(nan, |m| m.std_error).into(),
        mc.map_or(0, |m| m.n_paths).into(),
        mc.map_or(nan, |m| (m.mean - r.q_eps) / m.std_error).into(),
    ]);
    #[derive(serde::Serialize)]
    struct Out {
        price: crate::pricing::PriceResult,
        mc: Option<crate::experiments::MCEstimate>,
    }
    let files = w.write("price", &t, &Out { price: r, mc }, &notes)?;
    Ok((t, notes, files))
}

fn simulate(cfg: &RunConfig, w: &ReportWriter) -> Result<Outcome> {
    let mp = &cfg.model;
    let grid = cfg.grid.grid(mp);
    let n = usize::try_from(cfg.mc.n_paths).map_err(|_| Error::validation("mc.n_paths", "too large"))?;
    let paths: Vec<_> = match cfg.mc.dynamics {
        Dynamics::Stationary => simulate_paths(mp, &grid, n, cfg.seed)?.collect(),
        Dynamics::RiemannLiouville { z0 } => simulate_paths_rl(mp, &grid, z0, n, cfg.seed)?.collect(),
    };
    let mut t = Table::new(&[
        "path",
        "antithetic",
        "t",
        "w_increment",
        "b_increment",
        "z",
        "sigma",
        "x",
    ]);
    for p in &paths {
        for i in 0..p.times.len() {
            let (dw, db) = if i == 0 { (0.0, 0.0) } else { (p.dw[i - 1], p.db[i - 1]) };
            t.push(vec![
                p.index.into(),
                p.antithetic.into(),
                p.times[i].into(),
                dw.into(),
                db.into(),
                p.z[i].into(),
                p.sigma[i].into(),
                p.x[i].into(),
            ]);
        }
    }
    let notes = vec![format!("{} paths of {} steps", paths.len(), grid.n_steps)];
    let files = w.write("paths", &t, &grid, &notes)?;
    // the full table is in the files; stdout gets the first rows only
    let head = Table {
        columns: t.columns.clone(),
        rows: t.rows.iter().take(grid.n_steps.min(10) + 1).cloned().collect(),
    };
    Ok((head, notes, files))
}

fn study(which: StudyKind, cfg: &RunConfig, w: &ReportWriter) -> Result<Outcome> {
    let mp = &cfg.model;
    let st = &cfg.study;
    match which {
        StudyKind::Convergence => {
            let opts = st.convergence_options(&cfg.grid, &cfg.mc);
            let r = convergence_study_with(mp, &st.eps_grid, &cfg.payoff, cfg.mc.n_paths, cfg.seed, &opts)?;
            let mut t = Table::new(&[
                "eps",
                "n_steps",
                "mc_mean",
                "mc_std_error",
                "q0",
                "q_eps",
                "error",
                "error_bs",
                "scaled_error",
                "scaled_std_error",
                "resolved",
                "interior_t",
                "interior_error",
                "interior_std_error",
                "interior_error_bs",
            ]);
            for p in &r.points {
                let nan = f64::NAN;
                let i = p.interior;
                t.push(vec![
                    p.eps.into(),
                    p.n_steps.into(),
                    p.mc.mean.into(),
                    p.mc.std_error.into(),
                    p.q0.into(),
                    p.q_eps.into(),
                    p.error.into(),
                    p.error_bs.into(),
                    p.scaled_error.into(),
                    p.scaled_std_error.into(),
                    (if p.resolved { "yes" } else { "inconclusive" }).into(),
                    i.map_or(nan, |x| x.t).into(),
                    i.map_or(nan, |x| x.corrected.mean).into(),
                    i.map_or(nan, |x| x.corrected.std_error).into(),
                    i.map_or(nan, |x| x.black_scholes.mean).into(),
                ]);
            }
            let notes = vec![
                format!(
                    "trend={:?} beats_black_scholes={} inconclusive={:?} log-log slope={:.4}±{:.4}",
                    r.trend, r.beats_black_scholes, r.inconclusive, r.rate_fit.slope, r.rate_fit.slope_se
                ),
                "limitation: the supremum over t is probed at t = 0 and t = T/2 only; at T/2 the mean error E[h(X_T) - Q(T/2, X_T/2)] is reported".into(),
            ];
            let files = w.write("convergence", &t, &r, &notes)?;
            Ok((t, notes, files))
        }
        StudyKind::Vartheta => {
            let lm = cfg.lemma_model()?;
            let r = vartheta_check_with(&lm, st.lemma_paths, cfg.seed, &st.lemma)?;
            let horizon = lm.maturity / lm.eps;
            let lags: Vec<f64> = [1.0, 10.0].into_iter().filter(|l| *l < 0.5 * horizon).collect();
            let dec = vartheta_decorrelation(&lm, &lags, (st.lemma_paths / 4).max(2), cfg.seed, &st.lemma)?;
            let mut t = Table::new(&["quantity", "value", "std_error"]);
            let mut row = |k: String, v: f64, s: f64| t.push(vec![k.into(), v.into(), s.into()]);
            row("mean_sigma_vartheta".into(), r.mean.mean, r.mean.std_error);
            row("scaled_mean".into(), r.scaled_mean, r.mean.std_error / lm.eps.sqrt());
            row("d_bar".into(), r.d_bar, 0.0);
            row("d_bar_horizon".into(), r.d_bar_horizon, 0.0);
            row("rel_error".into(), r.rel_error, 0.0);
            row("rel_error_horizon".into(), r.rel_error_horizon, 0.0);
            row("max_abs".into(), r.max_abs, 0.0);
            row("bound".into(), r.bound, 0.0);
            for d in &dec {
                row(
                    format!("cov_over_eps_lag_{}", d.lag),
                    d.scaled_cov.mean,
                    d.scaled_cov.std_error,
                );
                row(format!("corr_lag_{}", d.lag), d.correlation, 0.0);
            }
            let notes = vec![format!("eps={} maturity={} bound never violated", lm.eps, lm.maturity)];
            #[derive(serde::Serialize)]
            struct Out {
                check: crate::experiments::VarthetaReport,
                decorrelation: Vec<crate::experiments::DecorrelationPoint>,
            }
            let files = w.write(
                "vartheta",
                &t,
                &Out {
                    check: r,
                    decorrelation: dec,
                },
                &notes,
            )?;
            Ok((t, notes, files))
        }
        StudyKind::Phi => {
            let lm = cfg.lemma_model()?;
            let r = phi_variance_check_with(&lm, &st.eps_grid, st.lemma_paths, cfg.seed, &st.lemma)?;
            let mut t = Table::new(&["eps", "mean_phi", "mean_phi_se", "mean_phi_sq", "mean_phi_sq_se"]);
            for p in &r.points {
                t.push(vec![
                    p.eps.into(),
                    p.mean.mean.into(),
                    p.mean.std_error.into(),
                    p.mean_sq.mean.into(),
                    p.mean_sq.std_error.into(),
                ]);
            }
            let notes = vec![format!(
                "log-log slope={:.4}±{:.4} expected={:.4} maturity={}",
                r.fit.slope, r.fit.slope_se, r.expected_slope, lm.maturity
            )];
            let files = w.write("phi", &t, &r, &notes)?;
            Ok((t, notes, files))
        }
        StudyKind::Kappa => {
            let lm = cfg.lemma_model()?;
            let r = kappa_check(&lm, &st.eps_grid, st.lemma_paths, cfg.seed)?;
            let mut t = Table::new(&[
                "eps",
                "sup_mean_kappa_sq",
                "sup_se",
                "argsup",
                "mean_kappa_t",
                "mean_kappa_t_se",
                "scaled_rms",
            ]);
            for p in &r.points {
                t.push(vec![
                    p.eps.into(),
                    p.sup_mean_sq.mean.into(),
                    p.sup_mean_sq.std_error.into(),
                    p.argsup.into(),
                    p.mean_at_maturity.mean.into(),
                    p.mean_at_maturity.std_error.into(),
                    p.scaled_rms.into(),
                ]);
            }
            let notes = vec![format!(
                "log-log slope={:.4}±{:.4} bound rate={:.4}",
                r.fit.slope, r.fit.slope_se, r.bound_slope
            )];
            let files = w.write("kappa", &t, &r, &notes)?;
            Ok((t, notes, files))
        }
        StudyKind::Smile => {
            let gp = group_params(mp)?;
            let r = smile_study(mp, &gp, &st.strikes, st.t)?;
            let mut t = Table::new(&[
                "strike",
                "log_moneyness",
                "q_eps",
                "implied_vol_inverted",
                "implied_vol_asymptotic",
            ]);
            for p in &r.points {
                t.push(vec![
                    p.strike.into(),
                    p.log_moneyness.into(),
                    p.q_eps.into(),
                    p.implied_vol_inverted.into(),
                    p.implied_vol_asymptotic.into(),
                ]);
            }
            let notes = vec![format!(
                "slope={:.6e} implied d_bar={:.6e} d_bar={:.6e} rel_error={:.3e}",
                r.fit.slope, r.implied_d_bar, r.d_bar, r.rel_error
            )];
            let files = w.write("smile", &t, &r, &notes)?;
            Ok((t, notes, files))
        }
        StudyKind::Termstructure => {
            let h = mp.hurst.value();
            let r = term_structure_study(h, &st.term_structure, &st.taus)?;
            let mut t = Table::new(&["tau", "factor"]);
            for p in &r.points {
                t.push(vec![p.tau.into(), p.factor.into()]);
            }
            let slope = |s: Option<f64>| s.map_or("n/a".to_string(), |v| format!("{v:.4}"));
            let notes = vec![format!(
                "short slope={} (H+1/2={:.4}) long slope={} (H-1/2={:.4}) zeta_slow={:.4} zeta_fast={:.4}",
                slope(r.short_slope),
                h + 0.5,
                slope(r.long_slope),
                h - 0.5,
                r.zeta_slow,
                r.zeta_fast
            )];
            let files = w.write("termstructure", &t, &r, &notes)?;
            Ok((t, notes, files))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn help_and_bad_flags() {
        assert_eq!(run(["roughvol", "--help"]), EXIT_OK);
        assert_eq!(run(["roughvol", "nonsense"]), EXIT_CONFIG);
        assert_eq!(run(["roughvol", "params", "--rho", "2"]), EXIT_CONFIG);
    }

    #[test]
    fn overrides_take_precedence() {
        let cli = Cli::try_parse_from([
            "roughvol", "params", "--eps", "0.02", "--rho", "-0.3", "--format", "csv,txt",
        ])
        .unwrap();
        let cfg = load_config(&cli.overrides).unwrap();
        assert_eq!(cfg.model.eps, 0.02);
        assert_eq!(cfg.model.rho, -0.3);
        assert_eq!(cfg.output.formats, vec![Format::Csv, Format::Txt]);
    }
}
