//! Monte Carlo pricing, the ε-convergence study of the corrected price, and numerical checks of
//! the rates behind it: the leverage term ϑ, the fluctuation term φ and the residual κ.
//!
//! Every study is a pure function of its parameters and seed. Paths are processed in chunks on
//! the shared pool and the chunk accumulators are merged in chunk order, so results do not
//! depend on the number of threads.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussfunc::{
    d_bar_horizon, group_params, CenteredSquare, GroupParams, VolFunction, DEFAULT_GH_ORDER, DEFAULT_QUAD_TOL,
};
use crate::kernel::{cov_rl, sigma_ou, CovRepr, CovarianceEval, Hurst, KernelEval};
use crate::model::ModelParams;
use crate::pricing::{
    corrected_price, corrected_price_at, implied_vol_asymptotic, implied_vol_invert, term_structure_factor,
    zeta_exponent, Payoff, Regime, TermStructureParams,
};
use crate::quad::{GaussHermite, Integrator};
use crate::rng::{path_rng, pool};
use crate::simulate::{PathSample, SimGrid, Simulator};
use crate::stats::{linear_fit, CoMoments, LinearFit, Moments};

const CHUNK: u64 = 1024;

/// Monte Carlo estimate with its one-standard-error half width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MCEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_paths: u64,
    pub seed: u64,
}

impl MCEstimate {
    fn from_pairs(m: &Moments, seed: u64) -> Self {
        // antithetic pairs are averaged first, so the error is computed over pair means
        MCEstimate {
            mean: m.mean(),
            std_error: m.std_error(),
            n_paths: 2 * m.n,
            seed,
        }
    }
}

/// How E[h(X_T)] is estimated from a path of the volatility driver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// h evaluated at the simulated X_T.
    #[default]
    Plain,
    /// Given W the log-price is Gaussian; the B-integral is done in closed form (or by
    /// quadrature for payoffs without one), leaving only the W-noise.
    ConditionalOnW,
}

/// Volatility driver used by the Monte Carlo studies.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Dynamics {
    #[default]
    Stationary,
    /// One-sided process started at Z_0 = z0.
    RiemannLiouville { z0: f64 },
}

fn build_simulator(mp: &ModelParams, grid: &SimGrid, dynamics: Dynamics) -> Result<Simulator> {
    match dynamics {
        Dynamics::Stationary => Simulator::new(mp, grid),
        Dynamics::RiemannLiouville { z0 } => Simulator::new_rl(mp, grid, z0),
    }
}

// Runs `step` over draws 0..n_draws of `seed`, one accumulator per chunk, returned in chunk order.
fn run_chunks<A, I, S>(sim: &Simulator, seed: u64, n_draws: u64, init: I, step: S) -> Vec<A>
where
    A: Send,
    I: Fn() -> A + Sync,
    S: Fn(&mut A, &PathSample) + Sync,
{
    let n_chunks = n_draws.div_ceil(CHUNK);
    pool().install(|| {
        (0..n_chunks)
            .into_par_iter()
            .map(|c| {
                let mut ws = sim.workspace();
                let mut acc = init();
                for p in c * CHUNK..((c + 1) * CHUNK).min(n_draws) {
                    sim.draw(seed, p, &mut ws);
                    step(&mut acc, &ws);
                }
                acc
            })
            .collect()
    })
}

fn merged(parts: &[Moments]) -> Moments {
    let mut m = Moments::default();
    for p in parts {
        m.merge(p);
    }
    m
}

// Σσ dW, Σσ² dt and Σσ dB over a range of steps, for the noise multiplied by `sign`.
#[derive(Debug, Clone, Copy, Default)]
struct Terms {
    a: f64,
    v: f64,
    b: f64,
}

fn terms(f: &VolFunction, dt: f64, ws: &PathSample, sign: f64, range: std::ops::Range<usize>) -> Terms {
    let mut t = Terms::default();
    for i in range {
        let s = f.value(sign * ws.z[i]);
        t.a += s * sign * ws.dw[i];
        t.v += s * s * dt;
        t.b += s * sign * ws.db[i];
    }
    t
}

// Estimate of E[h(X_T) | information used by the estimator] started from x at the split time.
fn payoff_estimate(payoff: &Payoff, x: f64, t: Terms, rho: f64, estimator: Estimator) -> Result<f64> {
    let rho_c = (1.0 - rho * rho).max(0.0).sqrt();
    match estimator {
        Estimator::Plain => Ok(payoff.value(x * (rho * t.a + rho_c * t.b - 0.5 * t.v).exp())),
        Estimator::ConditionalOnW => {
            let spot = x * (rho * t.a - 0.5 * rho * rho * t.v).exp();
            payoff.lognormal_price(spot, (rho_c * rho_c * t.v).sqrt())
        }
    }
}

fn check_pairs(n_paths: u64) -> Result<u64> {
    if n_paths < 4 || !n_paths.is_multiple_of(2) {
        return Err(Error::validation(
            "n_paths",
            "must be an even number of at least 4 (antithetic pairs)",
        ));
    }
    Ok(n_paths / 2)
}

fn finite_or(what: &'static str, m: &Moments) -> Result<()> {
    if m.mean().is_finite() && m.variance().is_finite() {
        Ok(())
    } else {
        Err(Error::domain(what, "non-finite Monte Carlo sample"))
    }
}

/// Settings of a single Monte Carlo price.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McOptions {
    pub estimator: Estimator,
    pub dynamics: Dynamics,
    /// Pair every draw with its sign-flipped copy; otherwise each draw is one independent path.
    pub antithetic: bool,
}

impl Default for McOptions {
    fn default() -> Self {
        McOptions {
            estimator: Estimator::Plain,
            dynamics: Dynamics::Stationary,
            antithetic: true,
        }
    }
}

/// E[h(X_T)] by antithetic Monte Carlo on (dW, dB) with the plain estimator.
pub fn mc_price(mp: &ModelParams, grid: &SimGrid, payoff: &Payoff, n_paths: u64, seed: u64) -> Result<MCEstimate> {
    mc_price_with(mp, grid, payoff, n_paths, seed, &McOptions::default())
}

pub fn mc_price_with(
    mp: &ModelParams,
    grid: &SimGrid,
    payoff: &Payoff,
    n_paths: u64,
    seed: u64,
    opts: &McOptions,
) -> Result<MCEstimate> {
    payoff.validate()?;
    let draws = if opts.antithetic {
        check_pairs(n_paths)?
    } else if n_paths >= 2 {
        n_paths
    } else {
        return Err(Error::validation("n_paths", "must be at least 2"));
    };
    let sim = build_simulator(mp, grid, opts.dynamics)?;
    let n = sim.n_steps();
    let dt = sim.dt();
    let signs: &[f64] = if opts.antithetic { &[1.0, -1.0] } else { &[1.0] };
    let parts = run_chunks(&sim, seed, draws, Moments::default, |m, ws| {
        let mut acc = 0.0;
        for &sign in signs {
            let t = terms(&mp.vol_fn, dt, ws, sign, 0..n);
            acc += payoff_estimate(payoff, mp.x0, t, mp.rho, opts.estimator).unwrap_or(f64::NAN);
        }
        m.push(acc / signs.len() as f64);
    });
    let m = merged(&parts);
    finite_or("mc_price", &m)?;
    Ok(MCEstimate {
        mean: m.mean(),
        std_error: m.std_error(),
        n_paths,
        seed,
    })
}

/// Settings of the convergence study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceOptions {
    /// Time steps per ε (dt = ε / steps_per_eps, rounded so that dt divides T).
    pub steps_per_eps: f64,
    /// Simulated history before t = 0, in units of ε.
    pub warmup_eps: f64,
    pub estimator: Estimator,
    pub dynamics: Dynamics,
    /// Also measure the mean error at the interior time T/2.
    pub interior: bool,
}

impl Default for ConvergenceOptions {
    fn default() -> Self {
        ConvergenceOptions {
            steps_per_eps: 16.0,
            warmup_eps: 20.0,
            estimator: Estimator::ConditionalOnW,
            dynamics: Dynamics::Stationary,
            interior: true,
        }
    }
}

/// Monotonicity of the scaled errors e(ε)/√ε as ε decreases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trend {
    /// Every step down the grid decreases the scaled error.
    Decreasing,
    /// Decreasing, except for steps whose one-standard-error intervals overlap.
    DecreasingWithinNoise,
    /// Some step increases beyond the combined error bars.
    NotDecreasing,
}

/// Mean of h(X_T) - Q(t, X_t) at an interior time, for Q the corrected and the plain
/// Black–Scholes price.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InteriorError {
    pub t: f64,
    pub corrected: MCEstimate,
    pub black_scholes: MCEstimate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergencePoint {
    pub eps: f64,
    pub n_steps: usize,
    pub mc: MCEstimate,
    pub q0: f64,
    pub q_eps: f64,
    /// |MC - Q^ε|
    pub error: f64,
    /// |MC - Q0|
    pub error_bs: f64,
    pub scaled_error: f64,
    pub scaled_std_error: f64,
    /// The error exceeds two standard errors.
    pub resolved: bool,
    pub interior: Option<InteriorError>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub eps_grid: Vec<f64>,
    pub points: Vec<ConvergencePoint>,
    /// Fit of log e(ε) against log ε.
    pub rate_fit: LinearFit,
    pub trend: Trend,
    /// e(ε) < e_BS(ε) at every ε.
    pub beats_black_scholes: bool,
    /// ε values whose error is not resolved above the Monte Carlo noise.
    pub inconclusive: Vec<f64>,
    pub group: GroupParams,
    pub options: ConvergenceOptions,
    pub seed: u64,
}

impl ConvergenceReport {
    pub fn errors(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.error).collect()
    }
    pub fn scaled_errors(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.scaled_error).collect()
    }
    /// Decreasing trend, better than Black–Scholes everywhere, and every point resolved.
    pub fn passed(&self) -> bool {
        self.trend != Trend::NotDecreasing && self.beats_black_scholes && self.inconclusive.is_empty()
    }
}

fn validate_eps_grid(eps_grid: &[f64]) -> Result<()> {
    if eps_grid.len() < 4 {
        return Err(Error::validation("eps_grid", "needs at least 4 points"));
    }
    for w in eps_grid.windows(2) {
        if !(w[0] > 0.0 && w[1] > 0.0 && ((w[0] / w[1]) - 2.0).abs() < 1e-9) {
            return Err(Error::validation(
                "eps_grid",
                "must be dyadic and strictly decreasing (ratio 2)",
            ));
        }
    }
    Ok(())
}

/// Scaled-error trend with one-standard-error overlap allowed.
pub fn scaled_error_trend(scaled: &[f64], scaled_se: &[f64]) -> Trend {
    let mut trend = Trend::Decreasing;
    for k in 1..scaled.len() {
        if scaled[k] < scaled[k - 1] {
            continue;
        }
        if scaled[k] - scaled_se[k] <= scaled[k - 1] + scaled_se[k - 1] {
            trend = Trend::DecreasingWithinNoise;
        } else {
            return Trend::NotDecreasing;
        }
    }
    trend
}

/// Convergence study with the default options.
pub fn convergence_study(
    mp_base: &ModelParams,
    eps_grid: &[f64],
    payoff: &Payoff,
    n_paths: u64,
    seed: u64,
) -> Result<ConvergenceReport> {
    convergence_study_with(mp_base, eps_grid, payoff, n_paths, seed, &ConvergenceOptions::default())
}

/// For each ε: e(ε) = |MC - Q^ε| and e_BS(ε) = |MC - Q0| at t = 0, with the same seed at every ε.
pub fn convergence_study_with(
    mp_base: &ModelParams,
    eps_grid: &[f64],
    payoff: &Payoff,
    n_paths: u64,
    seed: u64,
    opts: &ConvergenceOptions,
) -> Result<ConvergenceReport> {
    validate_eps_grid(eps_grid)?;
    payoff.validate()?;
    let pairs = check_pairs(n_paths)?;
    let gp = group_params(mp_base)?;
    let mut points = Vec::with_capacity(eps_grid.len());
    for &eps in eps_grid {
        let mut mp = mp_base.clone();
        mp.eps = eps;
        mp.validate()?;
        let grid = SimGrid::resolving(&mp, opts.steps_per_eps, opts.warmup_eps);
        let sim = build_simulator(&mp, &grid, opts.dynamics)?;
        let n = sim.n_steps();
        let dt = sim.dt();
        let mid = n / 2;
        let t_mid = mid as f64 * dt;
        let price = corrected_price(&mp, &gp, payoff, 0.0)?;
        let parts = run_chunks(
            &sim,
            seed,
            pairs,
            || [Moments::default(); 3],
            |m, ws| {
                let mut at0 = 0.0;
                let mut dq = 0.0;
                let mut d0 = 0.0;
                for sign in [1.0, -1.0] {
                    let head = terms(&mp.vol_fn, dt, ws, sign, 0..mid);
                    let tail = terms(&mp.vol_fn, dt, ws, sign, mid..n);
                    let whole = Terms {
                        a: head.a + tail.a,
                        v: head.v + tail.v,
                        b: head.b + tail.b,
                    };
                    at0 += payoff_estimate(payoff, mp.x0, whole, mp.rho, opts.estimator).unwrap_or(f64::NAN);
                    if opts.interior {
                        let rho_c = (1.0 - mp.rho * mp.rho).max(0.0).sqrt();
                        let x_mid = mp.x0 * (mp.rho * head.a + rho_c * head.b - 0.5 * head.v).exp();
                        let h = payoff_estimate(payoff, x_mid, tail, mp.rho, opts.estimator).unwrap_or(f64::NAN);
                        match corrected_price_at(&mp, &gp, payoff, t_mid, x_mid) {
                            Ok(r) => {
                                dq += h - r.q_eps;
                                d0 += h - r.q0;
                            }
                            Err(_) => {
                                dq = f64::NAN;
                                d0 = f64::NAN;
                            }
                        }
                    }
                }
                m[0].push(0.5 * at0);
                if opts.interior {
                    m[1].push(0.5 * dq);
                    m[2].push(0.5 * d0);
                }
            },
        );
        let mut acc = [Moments::default(); 3];
        for p in &parts {
            for j in 0..3 {
                acc[j].merge(&p[j]);
            }
        }
        finite_or("convergence_study", &acc[0])?;
        let mc = MCEstimate::from_pairs(&acc[0], seed);
        let interior = if opts.interior {
            finite_or("convergence_study interior", &acc[1])?;
            Some(InteriorError {
                t: t_mid,
                corrected: MCEstimate::from_pairs(&acc[1], seed),
                black_scholes: MCEstimate::from_pairs(&acc[2], seed),
            })
        } else {
            None
        };
        let error = (mc.mean - price.q_eps).abs();
        let error_bs = (mc.mean - price.q0).abs();
        points.push(ConvergencePoint {
            eps,
            n_steps: n,
            mc,
            q0: price.q0,
            q_eps: price.q_eps,
            error,
            error_bs,
            scaled_error: error / eps.sqrt(),
            scaled_std_error: mc.std_error / eps.sqrt(),
            resolved: error > 2.0 * mc.std_error,
            interior,
        });
    }
    let scaled: Vec<f64> = points.iter().map(|p| p.scaled_error).collect();
    let scaled_se: Vec<f64> = points.iter().map(|p| p.scaled_std_error).collect();
    let log_eps: Vec<f64> = eps_grid.iter().map(|e| e.ln()).collect();
    let log_err: Vec<f64> = points.iter().map(|p| p.error.max(f64::MIN_POSITIVE).ln()).collect();
    Ok(ConvergenceReport {
        eps_grid: eps_grid.to_vec(),
        trend: scaled_error_trend(&scaled, &scaled_se),
        beats_black_scholes: points.iter().all(|p| p.error < p.error_bs),
        inconclusive: points.iter().filter(|p| !p.resolved).map(|p| p.eps).collect(),
        rate_fit: linear_fit(&log_eps, &log_err),
        points,
        group: gp,
        options: *opts,
        seed,
    })
}

/// Quadrature settings for the conditional-Gaussian lemma checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LemmaOptions {
    /// Geometric nodes per decade of s/ε.
    pub nodes_per_decade: usize,
    /// Smallest positive node, in units of ε.
    pub first_node: f64,
    pub gh_order: usize,
}

impl Default for LemmaOptions {
    fn default() -> Self {
        LemmaOptions {
            nodes_per_decade: 12,
            first_node: 1e-4,
            gh_order: 24,
        }
    }
}

// Nodes 0 = u_0 < .. < u_N = horizon (in units of ε) of one conditioning time, with
// product-integration weights for piecewise-linear functions of u.
#[derive(Debug, Clone)]
struct PastBlock {
    /// Conditioning time, in units of ε.
    offset: f64,
    nodes: Vec<f64>,
    /// Standard deviation of Z at node u given the past.
    cond_sd: Vec<f64>,
    /// ∫ hat_i(u) K(u) du.
    k_weights: Vec<f64>,
    /// ∫ hat_i(u) du.
    l_weights: Vec<f64>,
}

impl PastBlock {
    fn build(ke: &KernelEval, offset: f64, horizon: f64, opts: &LemmaOptions) -> Result<Self> {
        if !(horizon > opts.first_node) {
            return Err(Error::domain(
                "lemma checks",
                "horizon T/ε is below the first quadrature node",
            ));
        }
        let decades = (horizon / opts.first_node).log10();
        let count = (decades * opts.nodes_per_decade as f64).ceil() as usize;
        let mut nodes = vec![0.0];
        nodes.extend((0..=count).map(|i| opts.first_node * (horizon / opts.first_node).powf(i as f64 / count as f64)));
        *nodes.last_mut().expect("nodes") = horizon;
        let n = nodes.len();
        let so = ke.sigma_ou();
        let mut cond_sd = Vec::with_capacity(n);
        for &u in &nodes {
            cond_sd.push(so * ke.l2_head(u)?.max(0.0).sqrt());
        }
        let q = Integrator::with_tol(1e-12);
        let a = ke.hurst().value() - 0.5;
        let mut k_weights = vec![0.0; n];
        let mut l_weights = vec![0.0; n];
        for i in 0..n - 1 {
            let (lo, hi) = (nodes[i], nodes[i + 1]);
            let h = hi - lo;
            let i0 = ke.cell_integral(lo, hi);
            let i1 = if i == 0 {
                q.integrate_graded("hat weights", |u| u * ke.value_at(u), 0.0, hi, a)?
                    .value
            } else {
                q.integrate("hat weights", |u| (u - lo) * ke.value_at(u), lo, hi)?.value
            };
            k_weights[i] += i0 - i1 / h;
            k_weights[i + 1] += i1 / h;
            l_weights[i] += 0.5 * h;
            l_weights[i + 1] += 0.5 * h;
        }
        Ok(PastBlock {
            offset,
            nodes,
            cond_sd,
            k_weights,
            l_weights,
        })
    }

    fn len(&self) -> usize {
        self.nodes.len()
    }

    // σ_t ϑ_t / (σ_ou √ε) given the conditional means m on the nodes.
    fn leverage(&self, f: &VolFunction, gh: &GaussHermite, m: &[f64]) -> f64 {
        let mut sum = 0.0;
        for (i, &mi) in m.iter().enumerate() {
            let v = self.cond_sd[i];
            let g = if v > 0.0 {
                gh.expect(|z| f.f_fprime(mi + v * z))
            } else {
                f.f_fprime(mi)
            };
            sum += self.k_weights[i] * g;
        }
        f.value(m[0]) * sum
    }

    // φ_t / ε given the conditional means m on the nodes.
    fn fluctuation(&self, g: &CenteredSquare, gh: &GaussHermite, m: &[f64]) -> f64 {
        let mut sum = 0.0;
        for (i, &mi) in m.iter().enumerate() {
            let v = self.cond_sd[i];
            let e = if v > 0.0 {
                gh.expect(|z| g.g(mi + v * z))
            } else {
                g.g(mi)
            };
            sum += self.l_weights[i] * e;
        }
        sum
    }
}

/// Exact sampler of the conditional means m_t(u) = E[Z_{t+εu} | F_t] jointly over the nodes of
/// one or more conditioning times t.
#[derive(Debug, Clone)]
struct ConditionalPast {
    /// Columns map independent standard normals to the stacked node values of all blocks.
    factor: DMatrix<f64>,
    blocks: Vec<PastBlock>,
}

impl ConditionalPast {
    fn build(ke: &KernelEval, horizon: f64, opts: &LemmaOptions) -> Result<Self> {
        Self::joint(ke, &[(0.0, horizon)], opts)
    }

    /// `times` holds (t/ε, (T - t)/ε) pairs in increasing t.
    fn joint(ke: &KernelEval, times: &[(f64, f64)], opts: &LemmaOptions) -> Result<Self> {
        let blocks = times
            .iter()
            .map(|&(t, h)| PastBlock::build(ke, t, h, opts))
            .collect::<Result<Vec<_>>>()?;
        // (block offset, node) for every row
        let rows: Vec<(f64, f64)> = blocks
            .iter()
            .flat_map(|b| b.nodes.iter().map(move |&u| (b.offset, u)))
            .collect();
        let n = rows.len();
        let so2 = ke.sigma_ou().powi(2);
        let mut cov = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                // the later conditioning time sees the earlier past shifted by the gap
                let (ti, ui) = rows[i];
                let (tj, uj) = rows[j];
                let c = so2 * ke.past_covariance(ui, uj + (tj - ti))?;
                cov[(i, j)] = c;
                cov[(j, i)] = c;
            }
        }
        let eig = SymmetricEigen::new(cov);
        let top = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
        if eig.eigenvalues.iter().any(|&l| l < -1e-8 * top) {
            return Err(Error::NotPsd {
                detail: "conditional-mean covariance".into(),
            });
        }
        let keep: Vec<usize> = (0..n).filter(|&k| eig.eigenvalues[k] > 1e-14 * top).collect();
        let mut factor = DMatrix::<f64>::zeros(n, keep.len());
        for (c, &k) in keep.iter().enumerate() {
            let s = eig.eigenvalues[k].sqrt();
            for r in 0..n {
                factor[(r, c)] = eig.eigenvectors[(r, k)] * s;
            }
        }
        Ok(ConditionalPast { factor, blocks })
    }

    fn dim(&self) -> usize {
        self.factor.nrows()
    }

    // Node values of block b inside a stacked sample.
    fn block<'a>(&self, b: usize, m: &'a [f64]) -> &'a [f64] {
        let start: usize = self.blocks[..b].iter().map(PastBlock::len).sum();
        &m[start..start + self.blocks[b].len()]
    }

    fn sample(&self, seed: u64, index: u64, normals: &mut Vec<f64>, out: &mut [f64]) {
        let mut rng = path_rng(seed, index);
        normals.clear();
        normals.extend((0..self.factor.ncols()).map(|_| rng.sample::<f64, _>(StandardNormal)));
        for (r, o) in out.iter_mut().enumerate() {
            *o = (0..self.factor.ncols()).map(|c| self.factor[(r, c)] * normals[c]).sum();
        }
    }
}

// Runs f over samples 0..n of the conditional means, in deterministic chunk order.
fn run_past<A, I, S>(past: &ConditionalPast, seed: u64, n: u64, init: I, step: S) -> Vec<A>
where
    A: Send,
    I: Fn() -> A + Sync,
    S: Fn(&mut A, &[f64]) + Sync,
{
    let n_chunks = n.div_ceil(CHUNK);
    let dim = past.dim();
    pool().install(|| {
        (0..n_chunks)
            .into_par_iter()
            .map(|c| {
                let mut acc = init();
                let mut normals = Vec::new();
                let mut m = vec![0.0; dim];
                for p in c * CHUNK..((c + 1) * CHUNK).min(n) {
                    past.sample(seed, p, &mut normals, &mut m);
                    step(&mut acc, &m);
                }
                acc
            })
            .collect()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarthetaReport {
    pub eps: f64,
    pub maturity: f64,
    /// Sample mean of σ_0 ϑ_0.
    pub mean: MCEstimate,
    /// mean / √ε
    pub scaled_mean: f64,
    pub d_bar: f64,
    /// E[σ_0 ϑ_0]/√ε at the finite horizon T/ε, by quadrature.
    pub d_bar_horizon: f64,
    /// |scaled_mean / D̄ - 1|
    pub rel_error: f64,
    /// |scaled_mean / d_bar_horizon - 1|
    pub rel_error_horizon: f64,
    pub max_abs: f64,
    /// K_T √ε with K_T = σ_ou sup|F| sup|F F'| ∫|K|.
    pub bound: f64,
}

/// Checks E[σ_0 ϑ_0] ≈ √ε D̄ and the almost-sure bound |σ_0 ϑ_0| ≤ K_T √ε.
///
/// ϑ_0 = σ_ou ∫_0^T E[G'(Z_s) | F_0] K^ε(s) ds is evaluated per sample from the exact joint law of
/// the conditional means on a graded grid; the inner expectation is a Gauss–Hermite average over
/// the conditional variance σ_ou² ∫_0^{s/ε} K². A violated bound is an error.
pub fn vartheta_check(mp: &ModelParams, n_paths: u64, seed: u64) -> Result<VarthetaReport> {
    vartheta_check_with(mp, n_paths, seed, &LemmaOptions::default())
}

pub fn vartheta_check_with(mp: &ModelParams, n_paths: u64, seed: u64, opts: &LemmaOptions) -> Result<VarthetaReport> {
    mp.validate()?;
    if n_paths < 2 {
        return Err(Error::validation("n_paths", "must be at least 2"));
    }
    let ke = KernelEval::new(mp.hurst);
    let horizon = mp.maturity / mp.eps;
    let past = ConditionalPast::build(&ke, horizon, opts)?;
    let gh = GaussHermite::new(opts.gh_order)?;
    let f = &mp.vol_fn;
    let so = sigma_ou(mp.hurst);
    let scale = so * mp.eps.sqrt();
    let parts = run_past(
        &past,
        seed,
        n_paths,
        || (Moments::default(), 0.0f64),
        |acc, m| {
            let x = scale * past.blocks[0].leverage(f, &gh, m);
            acc.0.push(x);
            acc.1 = acc.1.max(x.abs());
        },
    );
    let mut mom = Moments::default();
    let mut max_abs = 0.0f64;
    for (m, mx) in &parts {
        mom.merge(m);
        max_abs = max_abs.max(*mx);
    }
    finite_or("vartheta_check", &mom)?;
    let gp = group_params(mp)?;
    let bound = so * f.sup_abs(|g, z| g.value(z)) * f.sup_abs(|g, z| g.f_fprime(z)) * ke.l1_norm() * mp.eps.sqrt();
    if max_abs > bound {
        return Err(Error::CheckFailed {
            what: "vartheta_check",
            detail: format!("pathwise bound violated: max |σ0 ϑ0| = {max_abs:.6e} > {bound:.6e}"),
        });
    }
    let dh = d_bar_horizon(f, mp.hurst, horizon, DEFAULT_GH_ORDER, DEFAULT_QUAD_TOL)?;
    let scaled = mom.mean() / mp.eps.sqrt();
    Ok(VarthetaReport {
        eps: mp.eps,
        maturity: mp.maturity,
        mean: MCEstimate {
            mean: mom.mean(),
            std_error: mom.std_error(),
            n_paths: mom.n,
            seed,
        },
        scaled_mean: scaled,
        d_bar: gp.d_bar,
        d_bar_horizon: dh,
        rel_error: (scaled / gp.d_bar - 1.0).abs(),
        rel_error_horizon: (scaled / dh - 1.0).abs(),
        max_abs,
        bound,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecorrelationPoint {
    /// t'/ε
    pub lag: f64,
    /// Sample Cov(σ_0 ϑ_0, σ_t' ϑ_t') / ε.
    pub scaled_cov: MCEstimate,
    pub correlation: f64,
}

/// Covariance of σϑ at time 0 and at later times t', scaled by ε, from the joint conditional law
/// at both times. The limit theory only asks for it to be small once t' ≫ ε.
pub fn vartheta_decorrelation(
    mp: &ModelParams,
    lags_over_eps: &[f64],
    n_paths: u64,
    seed: u64,
    opts: &LemmaOptions,
) -> Result<Vec<DecorrelationPoint>> {
    mp.validate()?;
    if n_paths < 2 {
        return Err(Error::validation("n_paths", "must be at least 2"));
    }
    let ke = KernelEval::new(mp.hurst);
    let gh = GaussHermite::new(opts.gh_order)?;
    let horizon = mp.maturity / mp.eps;
    let mut out = Vec::with_capacity(lags_over_eps.len());
    for &lag in lags_over_eps {
        if !(lag > 0.0 && lag < horizon) {
            return Err(Error::validation("lags_over_eps", "each lag must lie in (0, T/ε)"));
        }
        let past = ConditionalPast::joint(&ke, &[(0.0, horizon), (lag, horizon - lag)], opts)?;
        let scale = sigma_ou(mp.hurst);
        let parts = run_past(
            &past,
            seed,
            n_paths,
            || (CoMoments::default(), Moments::default()),
            |acc, m| {
                let x = scale * past.blocks[0].leverage(&mp.vol_fn, &gh, past.block(0, m));
                let y = scale * past.blocks[1].leverage(&mp.vol_fn, &gh, past.block(1, m));
                acc.0.push(x, y);
                acc.1.push(x * y);
            },
        );
        let mut co = CoMoments::default();
        let mut prod = Moments::default();
        for (c, p) in &parts {
            co.merge(c);
            prod.merge(p);
        }
        finite_or("vartheta_decorrelation", &prod)?;
        out.push(DecorrelationPoint {
            lag,
            scaled_cov: MCEstimate {
                mean: co.covariance(),
                // the product's spread dominates the error of the centred estimate
                std_error: prod.std_error(),
                n_paths,
                seed,
            },
            correlation: co.correlation(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiPoint {
    pub eps: f64,
    /// Sample mean of φ_0 (zero in expectation).
    pub mean: MCEstimate,
    /// Sample mean of φ_0².
    pub mean_sq: MCEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiReport {
    pub points: Vec<PhiPoint>,
    /// Fit of log E[φ_0²] against log ε.
    pub fit: LinearFit,
    /// 2 - 2H
    pub expected_slope: f64,
}

/// Fluctuation term φ_0 = ∫_0^T E[G(Z_s) | F_0] ds: its second moment should scale like ε^{2-2H}.
pub fn phi_variance_check(mp: &ModelParams, eps_grid: &[f64], n_mc: u64, seed: u64) -> Result<PhiReport> {
    phi_variance_check_with(mp, eps_grid, n_mc, seed, &LemmaOptions::default())
}

pub fn phi_variance_check_with(
    mp: &ModelParams,
    eps_grid: &[f64],
    n_mc: u64,
    seed: u64,
    opts: &LemmaOptions,
) -> Result<PhiReport> {
    validate_eps_grid(eps_grid)?;
    if n_mc < 2 {
        return Err(Error::validation("n_mc", "must be at least 2"));
    }
    mp.validate()?;
    let ke = KernelEval::new(mp.hurst);
    let gh = GaussHermite::new(opts.gh_order)?;
    let g = CenteredSquare::new(&mp.vol_fn, mp.hurst, DEFAULT_GH_ORDER)?;
    let mut points = Vec::new();
    for &eps in eps_grid {
        let past = ConditionalPast::build(&ke, mp.maturity / eps, opts)?;
        let parts = run_past(
            &past,
            seed,
            n_mc,
            || [Moments::default(); 2],
            |acc, m| {
                let phi = eps * past.blocks[0].fluctuation(&g, &gh, m);
                acc[0].push(phi);
                acc[1].push(phi * phi);
            },
        );
        let mut acc = [Moments::default(); 2];
        for p in &parts {
            acc[0].merge(&p[0]);
            acc[1].merge(&p[1]);
        }
        finite_or("phi_variance_check", &acc[1])?;
        let est = |m: &Moments| MCEstimate {
            mean: m.mean(),
            std_error: m.std_error(),
            n_paths: m.n,
            seed,
        };
        points.push(PhiPoint {
            eps,
            mean: est(&acc[0]),
            mean_sq: est(&acc[1]),
        });
    }
    let x: Vec<f64> = points.iter().map(|p| p.eps.ln()).collect();
    let y: Vec<f64> = points.iter().map(|p| p.mean_sq.mean.ln()).collect();
    Ok(PhiReport {
        fit: linear_fit(&x, &y),
        expected_slope: 2.0 - 2.0 * mp.hurst.value(),
        points,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaPoint {
    pub eps: f64,
    /// max over grid times of the sample mean of κ_t².
    pub sup_mean_sq: MCEstimate,
    pub argsup: f64,
    /// Sample mean of κ_T.
    pub mean_at_maturity: MCEstimate,
    /// ε^{-1/2} (sup_t E[κ_t²])^{1/2}
    pub scaled_rms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaReport {
    pub points: Vec<KappaPoint>,
    /// Fit of log sup_t E[κ_t²] against log ε.
    pub fit: LinearFit,
    /// 2 - H, the rate of the upper bound.
    pub bound_slope: f64,
}

/// Residual κ_t = (√ε / 2) ∫_0^t (σ_s² - σ̄²) ds from simulated paths (dt = ε/8, 20 ε of history).
pub fn kappa_check(mp: &ModelParams, eps_grid: &[f64], n_mc: u64, seed: u64) -> Result<KappaReport> {
    validate_eps_grid(eps_grid)?;
    if n_mc < 2 {
        return Err(Error::validation("n_mc", "must be at least 2"));
    }
    let gp = group_params(mp)?;
    let sb2 = gp.sigma_bar * gp.sigma_bar;
    let mut points = Vec::new();
    for &eps in eps_grid {
        let mut m = mp.clone();
        m.eps = eps;
        m.validate()?;
        let grid = SimGrid::resolving(&m, 8.0, 20.0);
        let sim = Simulator::new(&m, &grid)?;
        let n = sim.n_steps();
        let dt = sim.dt();
        let half = 0.5 * eps.sqrt() * dt;
        let parts = run_chunks(
            &sim,
            seed,
            n_mc,
            || (vec![Moments::default(); n], Moments::default()),
            |acc, ws| {
                let mut k = 0.0;
                for i in 0..n {
                    let s = m.vol_fn.value(ws.z[i]);
                    k += half * (s * s - sb2);
                    acc.0[i].push(k * k);
                }
                acc.1.push(k);
            },
        );
        let mut sq = vec![Moments::default(); n];
        let mut at_t = Moments::default();
        for (p, t) in &parts {
            for (a, b) in sq.iter_mut().zip(p) {
                a.merge(b);
            }
            at_t.merge(t);
        }
        let (imax, best) = sq
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.mean().total_cmp(&b.1.mean()))
            .expect("non-empty grid");
        finite_or("kappa_check", best)?;
        let est = |m: &Moments| MCEstimate {
            mean: m.mean(),
            std_error: m.std_error(),
            n_paths: m.n,
            seed,
        };
        points.push(KappaPoint {
            eps,
            sup_mean_sq: est(best),
            argsup: (imax + 1) as f64 * dt,
            mean_at_maturity: est(&at_t),
            scaled_rms: best.mean().sqrt() / eps.sqrt(),
        });
    }
    let x: Vec<f64> = points.iter().map(|p| p.eps.ln()).collect();
    let y: Vec<f64> = points.iter().map(|p| p.sup_mean_sq.mean.ln()).collect();
    Ok(KappaReport {
        fit: linear_fit(&x, &y),
        bound_slope: 2.0 - mp.hurst.value(),
        points,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmilePoint {
    pub strike: f64,
    /// log(K / X)
    pub log_moneyness: f64,
    pub q_eps: f64,
    pub implied_vol_inverted: f64,
    pub implied_vol_asymptotic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmileReport {
    pub t: f64,
    pub points: Vec<SmilePoint>,
    /// Fit of the inverted implied volatility against log-moneyness.
    pub fit: LinearFit,
    /// slope σ̄³ (T - t) / (√ε ρ)
    pub implied_d_bar: f64,
    pub d_bar: f64,
    pub rel_error: f64,
}

/// Implied volatilities of the corrected call prices across strikes, and the D̄ recovered from
/// the slope of the (affine) smile.
pub fn smile_study(mp: &ModelParams, gp: &GroupParams, strikes: &[f64], t: f64) -> Result<SmileReport> {
    if strikes.len() < 2 {
        return Err(Error::validation("strikes", "need at least two strikes"));
    }
    if mp.rho == 0.0 {
        return Err(Error::validation("rho", "the smile slope is flat for rho = 0"));
    }
    let tau = mp.maturity - t;
    let mut points = Vec::with_capacity(strikes.len());
    for &k in strikes {
        let call = Payoff::call(k)?;
        let r = corrected_price(mp, gp, &call, t)?;
        points.push(SmilePoint {
            strike: k,
            log_moneyness: (k / mp.x0).ln(),
            q_eps: r.q_eps,
            implied_vol_inverted: implied_vol_invert(r.q_eps, mp.x0, k, tau)?,
            implied_vol_asymptotic: implied_vol_asymptotic(mp, gp, k, t)?,
        });
    }
    let x: Vec<f64> = points.iter().map(|p| p.log_moneyness).collect();
    let y: Vec<f64> = points.iter().map(|p| p.implied_vol_inverted).collect();
    let fit = linear_fit(&x, &y);
    let implied = fit.slope * gp.sigma_bar.powi(3) * tau / (mp.eps.sqrt() * mp.rho);
    Ok(SmileReport {
        t,
        points,
        fit,
        implied_d_bar: implied,
        d_bar: gp.d_bar,
        rel_error: (implied / gp.d_bar - 1.0).abs(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TermStructurePoint {
    pub tau: f64,
    pub factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermStructureReport {
    pub hurst: f64,
    pub params: TermStructureParams,
    pub points: Vec<TermStructurePoint>,
    pub zeta_slow: f64,
    pub zeta_fast: f64,
    /// Log-log slope of the factor for τ ≤ τ_mr/100.
    pub short_slope: Option<f64>,
    /// Log-log slope of the factor for τ ≥ 100 τ_mr.
    pub long_slope: Option<f64>,
}

/// Sweeps the small-amplitude factor 𝒜 over maturities and reports its short- and long-maturity
/// log-log slopes next to the exponents ζ.
pub fn term_structure_study(hurst: f64, ts: &TermStructureParams, taus: &[f64]) -> Result<TermStructureReport> {
    Hurst::new(hurst)?;
    let mut points = Vec::with_capacity(taus.len());
    for &tau in taus {
        points.push(TermStructurePoint {
            tau,
            factor: term_structure_factor(tau, ts, hurst)?,
        });
    }
    let slope_over = |keep: &dyn Fn(f64) -> bool| {
        let sel: Vec<&TermStructurePoint> = points.iter().filter(|p| keep(p.tau)).collect();
        if sel.len() < 2 {
            return None;
        }
        let x: Vec<f64> = sel.iter().map(|p| p.tau.ln()).collect();
        let y: Vec<f64> = sel.iter().map(|p| p.factor.ln()).collect();
        Some(linear_fit(&x, &y).slope)
    };
    Ok(TermStructureReport {
        hurst,
        params: *ts,
        short_slope: slope_over(&|tau| tau <= 1e-2 * ts.tau_mr),
        long_slope: slope_over(&|tau| tau >= 1e2 * ts.tau_mr),
        zeta_slow: zeta_exponent(hurst, Regime::SlowMeanReverting)?,
        zeta_fast: zeta_exponent(hurst, Regime::FastMeanReverting)?,
        points,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RlCovariancePoint {
    /// t/ε
    pub t: f64,
    /// s/ε
    pub s: f64,
    pub one_sided: f64,
    pub stationary: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RlCovarianceReport {
    pub points: Vec<RlCovariancePoint>,
    pub max_abs_diff: f64,
}

/// Normalized covariance of the one-sided process started at 0 against the stationary one,
/// at elapsed times t/ε and lags s/ε.
pub fn rl_covariance_check(hurst: f64, t_over_eps: &[f64], s_over_eps: &[f64]) -> Result<RlCovarianceReport> {
    let h = Hurst::new(hurst)?;
    let ke = KernelEval::new(h);
    let ce = CovarianceEval::new(h, CovRepr::TimeDomain);
    let mut points = Vec::new();
    let mut max_abs_diff = 0.0f64;
    for &t in t_over_eps {
        for &s in s_over_eps {
            let one_sided = cov_rl(t, s, &ke)?;
            let stationary = ce.cz(s)?;
            max_abs_diff = max_abs_diff.max((one_sided - stationary).abs());
            points.push(RlCovariancePoint {
                t,
                s,
                one_sided,
                stationary,
            });
        }
    }
    Ok(RlCovarianceReport { points, max_abs_diff })
}
