//! Joint simulation of (W, B, Z^ε, σ^ε, X) on a uniform grid over [0, T].
//!
//! The default scheme discretizes the moving average `Z_t = σ_ou ∫ K^ε(t-u) dW_u` over cells of
//! width dt. The four cells next to the evaluation time are simulated exactly: for every cell
//! [t, t+dt] the vector (ΔW, ∫K^ε(t+j dt-u)dW_u for j = 1..4) is drawn from its exact Gaussian
//! law, so the t^{H-1/2} singularity contributes its exact variance. Older cells enter through ΔW weighted by
//! the exact kernel mass of the cell. History older than the warmup horizon is replaced by one
//! Gaussian per path carrying the variance of the truncated kernel tail.

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{sigma_ou, CovRepr, CovarianceEval, KernelEval, MovingAverageKernel};
use crate::model::ModelParams;
use crate::rng::path_rng;

/// Number of near-origin cells simulated with their exact joint law.
const EXACT_CELLS: usize = 4;
/// Largest grid accepted by the dense Cholesky sampler.
pub const MAX_EXACT_STEPS: usize = 512;
/// Diagonal jitter allowed when factorizing covariance matrices.
pub const MAX_JITTER: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    TruncatedMovingAverage,
    CholeskyExact,
}

/// Uniform time grid with dt = T / n_steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimGrid {
    pub n_steps: usize,
    /// Length of simulated history before t = 0, in years.
    pub warmup_horizon: f64,
    #[serde(default)]
    pub scheme: Scheme,
}

impl SimGrid {
    /// Grid with at least `steps_per_eps` steps per ε and `warmup_eps` ε of history.
    pub fn resolving(mp: &ModelParams, steps_per_eps: f64, warmup_eps: f64) -> Self {
        let n = (mp.maturity * steps_per_eps / mp.eps - 1e-9).ceil().max(1.0) as usize;
        SimGrid {
            n_steps: n,
            warmup_horizon: warmup_eps * mp.eps,
            scheme: Scheme::TruncatedMovingAverage,
        }
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn dt(&self, mp: &ModelParams) -> f64 {
        mp.maturity / self.n_steps as f64
    }

    pub fn validate(&self, mp: &ModelParams) -> Result<()> {
        if self.n_steps == 0 {
            return Err(Error::validation("grid.n_steps", "must be positive"));
        }
        let dt = self.dt(mp);
        match self.scheme {
            Scheme::TruncatedMovingAverage => {
                if dt > mp.eps / 4.0 * (1.0 + 1e-12) {
                    return Err(Error::validation(
                        "grid.n_steps",
                        format!("dt = {dt:.4e} exceeds eps/4 = {:.4e}; increase n_steps", mp.eps / 4.0),
                    ));
                }
                if self.warmup_horizon < 20.0 * mp.eps * (1.0 - 1e-12) {
                    return Err(Error::validation(
                        "grid.warmup_horizon",
                        format!("must be at least 20 eps = {}", 20.0 * mp.eps),
                    ));
                }
            }
            Scheme::CholeskyExact => {
                if self.n_steps > MAX_EXACT_STEPS {
                    return Err(Error::validation(
                        "grid.n_steps",
                        format!("at most {MAX_EXACT_STEPS} steps with the exact Cholesky scheme"),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// One simulated path. `dw[i]`, `db[i]` are the increments over [t_i, t_{i+1}].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathBundle {
    pub times: Vec<f64>,
    pub dw: Vec<f64>,
    pub db: Vec<f64>,
    pub z: Vec<f64>,
    pub sigma: Vec<f64>,
    pub x: Vec<f64>,
    pub seed: u64,
    pub index: u64,
    /// True for the sign-flipped partner of an antithetic pair.
    pub antithetic: bool,
}

/// Reusable buffers for one path; after [`Simulator::draw`], `z` holds Z at t_0..t_n and
/// `dw`, `db` the increments of the n steps.
#[derive(Debug, Clone)]
pub struct PathSample {
    pub z: Vec<f64>,
    pub dw: Vec<f64>,
    pub db: Vec<f64>,
    hist: Vec<f64>,
    near: Vec<[f64; EXACT_CELLS]>,
    normals: Vec<f64>,
}

#[derive(Debug, Clone)]
struct MovingAverage {
    /// Cells of history before t = 0 (0 for the one-sided variant).
    history: usize,
    /// Largest kernel lag in cells.
    max_lag: usize,
    exact: usize,
    /// Lower Cholesky factor of the covariance of (ΔW, Y_1, .., Y_exact).
    cell_factor: Vec<Vec<f64>>,
    /// Weights of ΔW at lags exact+1..=max_lag, stored in reverse lag order.
    far_rev: Vec<f64>,
    tail_sd: f64,
    start: Option<f64>,
}

#[derive(Debug, Clone)]
struct DenseCholesky {
    factor: DMatrix<f64>,
}

#[derive(Debug, Clone)]
enum Engine {
    MovingAverage(MovingAverage),
    Dense(DenseCholesky),
}

/// Path generator for a fixed model and grid.
#[derive(Debug, Clone)]
pub struct Simulator {
    mp: ModelParams,
    grid: SimGrid,
    dt: f64,
    sigma_ou: f64,
    engine: Engine,
}

impl Simulator {
    /// Stationary model with infinite history (truncated at the warmup horizon).
    pub fn new(mp: &ModelParams, grid: &SimGrid) -> Result<Self> {
        mp.validate()?;
        grid.validate(mp)?;
        let ke = KernelEval::new(mp.hurst);
        let dt = grid.dt(mp);
        let engine = match grid.scheme {
            Scheme::TruncatedMovingAverage => {
                let history = (grid.warmup_horizon / dt).round() as usize;
                Engine::MovingAverage(MovingAverage::build(&ke, mp.eps, dt, history, history, None)?)
            }
            Scheme::CholeskyExact => Engine::Dense(DenseCholesky::build(mp, &ke, grid.n_steps, dt)?),
        };
        Ok(Self {
            mp: mp.clone(),
            grid: *grid,
            dt,
            sigma_ou: sigma_ou(mp.hurst),
            engine,
        })
    }

    /// One-sided variant started at Z_0 = z0 with no history before t = 0.
    pub fn new_rl(mp: &ModelParams, grid: &SimGrid, z0: f64) -> Result<Self> {
        mp.validate()?;
        if grid.scheme != Scheme::TruncatedMovingAverage {
            return Err(Error::validation(
                "grid.scheme",
                "the one-sided variant uses the moving-average scheme",
            ));
        }
        if grid.n_steps == 0 {
            return Err(Error::validation("grid.n_steps", "must be positive"));
        }
        let dt = grid.dt(mp);
        if dt > mp.eps / 4.0 * (1.0 + 1e-12) {
            return Err(Error::validation("grid.n_steps", "dt must not exceed eps/4"));
        }
        if !z0.is_finite() {
            return Err(Error::validation("z0", "must be finite"));
        }
        let ke = KernelEval::new(mp.hurst);
        let ma = MovingAverage::build(&ke, mp.eps, dt, 0, grid.n_steps, Some(z0))?;
        Ok(Self {
            mp: mp.clone(),
            grid: *grid,
            dt,
            sigma_ou: sigma_ou(mp.hurst),
            engine: Engine::MovingAverage(ma),
        })
    }

    pub fn model(&self) -> &ModelParams {
        &self.mp
    }
    pub fn grid(&self) -> &SimGrid {
        &self.grid
    }
    pub fn dt(&self) -> f64 {
        self.dt
    }
    pub fn n_steps(&self) -> usize {
        self.grid.n_steps
    }
    pub fn times(&self) -> Vec<f64> {
        (0..=self.grid.n_steps).map(|i| i as f64 * self.dt).collect()
    }

    pub fn workspace(&self) -> PathSample {
        let n = self.grid.n_steps;
        let (hist, near) = match &self.engine {
            Engine::MovingAverage(ma) => (vec![0.0; ma.max_lag + n], vec![[0.0; EXACT_CELLS]; ma.exact.max(1) + n]),
            Engine::Dense(_) => (Vec::new(), Vec::new()),
        };
        PathSample {
            z: vec![0.0; n + 1],
            dw: vec![0.0; n],
            db: vec![0.0; n],
            hist,
            near,
            normals: Vec::new(),
        }
    }

    /// Draws path `index` of the stream `seed` into `ws`.
    pub fn draw(&self, seed: u64, index: u64, ws: &mut PathSample) {
        let mut rng = path_rng(seed, index);
        match &self.engine {
            Engine::MovingAverage(ma) => ma.draw(&mut rng, self.dt, self.sigma_ou, self.mp.eps, ws),
            Engine::Dense(d) => d.draw(&mut rng, ws),
        }
        let sdt = self.dt.sqrt();
        for v in ws.db.iter_mut() {
            let g: f64 = rng.sample(StandardNormal);
            *v = sdt * g;
        }
    }

    /// Terminal price X_T for the drawn noise multiplied by `sign` (±1).
    pub fn terminal_price(&self, ws: &PathSample, sign: f64) -> f64 {
        let rho = self.mp.rho;
        let rho_c = (1.0 - rho * rho).max(0.0).sqrt();
        let f = &self.mp.vol_fn;
        let mut log_x = 0.0;
        for i in 0..self.grid.n_steps {
            let s = f.value(sign * ws.z[i]);
            log_x += s * sign * (rho * ws.dw[i] + rho_c * ws.db[i]) - 0.5 * s * s * self.dt;
        }
        self.mp.x0 * log_x.exp()
    }

    /// Full path record for the drawn noise multiplied by `sign`.
    pub fn bundle(&self, ws: &PathSample, sign: f64, seed: u64, index: u64) -> PathBundle {
        let n = self.grid.n_steps;
        let rho = self.mp.rho;
        let rho_c = (1.0 - rho * rho).max(0.0).sqrt();
        let z: Vec<f64> = ws.z.iter().map(|v| sign * v).collect();
        let sigma: Vec<f64> = z.iter().map(|&v| self.mp.vol_fn.value(v)).collect();
        let dw: Vec<f64> = ws.dw.iter().map(|v| sign * v).collect();
        let db: Vec<f64> = ws.db.iter().map(|v| sign * v).collect();
        let mut x = Vec::with_capacity(n + 1);
        let mut xi = self.mp.x0;
        x.push(xi);
        for i in 0..n {
            let s = sigma[i];
            xi *= (s * (rho * dw[i] + rho_c * db[i]) - 0.5 * s * s * self.dt).exp();
            x.push(xi);
        }
        PathBundle {
            times: self.times(),
            dw,
            db,
            z,
            sigma,
            x,
            seed,
            index,
            antithetic: sign < 0.0,
        }
    }

    /// Path `index` of stream `seed`; odd indices are the antithetic partners of even ones.
    pub fn path(&self, seed: u64, index: u64) -> PathBundle {
        let mut ws = self.workspace();
        self.draw(seed, index / 2, &mut ws);
        let sign = if index.is_multiple_of(2) { 1.0 } else { -1.0 };
        self.bundle(&ws, sign, seed, index)
    }

    /// Covariances implied by the scheme, in correlation units (see [`SchemeCovariance`]).
    pub fn scheme_covariance(&self) -> Result<SchemeCovariance> {
        match &self.engine {
            Engine::MovingAverage(ma) => Ok(ma.covariance(self.grid.n_steps, self.dt, self.mp.eps)),
            Engine::Dense(d) => {
                let n = self.grid.n_steps;
                let full = &d.factor * d.factor.transpose();
                let s2 = self.sigma_ou.powi(2);
                let zz = (0..=n).map(|l| full[(0, l)] / s2).collect();
                let zw = (0..n)
                    .map(|j| full[(n, n + 1 + j)] / (self.sigma_ou * self.dt.sqrt()))
                    .collect();
                Ok(SchemeCovariance { zz, zw })
            }
        }
    }
}

/// Stationary covariances of a scheme: `zz[d]` = Cov(Z_i, Z_{i+d}) / σ_ou² and
/// `zw[k-1]` = Cov(Z_i, ΔW_{i-k}) / (σ_ou √dt) for k = 1..=n.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeCovariance {
    pub zz: Vec<f64>,
    pub zw: Vec<f64>,
}

impl MovingAverage {
    fn build(
        kernel: &dyn MovingAverageKernel,
        eps: f64,
        dt: f64,
        history: usize,
        max_lag: usize,
        start: Option<f64>,
    ) -> Result<Self> {
        let delta = dt / eps;
        let se = eps.sqrt();
        let exact = EXACT_CELLS.min(max_lag);
        // covariance of (ΔW, Y_1, .., Y_exact) for one cell
        let dim = exact + 1;
        let mut cov = DMatrix::<f64>::zeros(dim, dim);
        cov[(0, 0)] = dt;
        for k in 1..=exact {
            let mass = se * kernel.integral((k - 1) as f64 * delta, k as f64 * delta);
            cov[(0, k)] = mass;
            cov[(k, 0)] = mass;
            for l in k..=exact {
                let c = kernel.product_integral((k - 1) as f64 * delta, (l - 1) as f64 * delta, delta)?;
                cov[(k, l)] = c;
                cov[(l, k)] = c;
            }
        }
        let factor = cholesky_with_jitter(cov, "cell covariance")?;
        let cell_factor = (0..dim).map(|r| (0..dim).map(|c| factor[(r, c)]).collect()).collect();
        let far: Vec<f64> = (exact + 1..=max_lag)
            .map(|k| se * kernel.integral((k - 1) as f64 * delta, k as f64 * delta) / dt)
            .collect();
        let far_rev = far.into_iter().rev().collect();
        let tail_sd = if start.is_some() {
            0.0
        } else {
            kernel.square_tail(max_lag as f64 * delta)?.max(0.0).sqrt()
        };
        Ok(Self {
            history,
            max_lag,
            exact,
            cell_factor,
            far_rev,
            tail_sd,
            start,
        })
    }

    fn draw(&self, rng: &mut ChaCha8Rng, dt: f64, sigma_ou: f64, eps: f64, ws: &mut PathSample) {
        let n = ws.z.len() - 1;
        let sdt = dt.sqrt();
        let lag = self.max_lag;
        // hist[lag + j] = ΔW_j for cells j = -lag .. n-1; near[exact + j] = (Y_1, .., Y_exact)_j
        ws.hist.iter_mut().for_each(|v| *v = 0.0);
        let dim = self.exact + 1;
        ws.normals.resize(dim, 0.0);
        let first = -(self.history as isize);
        for j in first..n as isize {
            let hidx = (lag as isize + j) as usize;
            if j >= -(self.exact as isize) {
                for v in ws.normals.iter_mut() {
                    *v = rng.sample(StandardNormal);
                }
                let mut out = [0.0; EXACT_CELLS + 1];
                for (r, row) in self.cell_factor.iter().enumerate() {
                    out[r] = row.iter().zip(&ws.normals).map(|(a, b)| a * b).sum();
                }
                ws.hist[hidx] = out[0];
                let nidx = (self.exact as isize + j) as usize;
                let mut y = [0.0; EXACT_CELLS];
                y[..self.exact].copy_from_slice(&out[1..dim]);
                ws.near[nidx] = y;
            } else {
                let g: f64 = rng.sample(StandardNormal);
                ws.hist[hidx] = sdt * g;
            }
        }
        let xi: f64 = if self.tail_sd > 0.0 {
            rng.sample(StandardNormal)
        } else {
            0.0
        };
        let far_len = self.far_rev.len();
        for i in 0..=n {
            // far part: Σ_{k=exact+1}^{lag} w_k ΔW_{i-k} = Σ_p far_rev[p] hist[i + p]
            let far: f64 = if far_len > 0 {
                dot(&self.far_rev, &ws.hist[i..i + far_len])
            } else {
                0.0
            };
            let mut near = 0.0;
            for k in 1..=self.exact {
                let j = i as isize - k as isize;
                if j >= -(self.history as isize) {
                    near += ws.near[(self.exact as isize + j) as usize][k - 1];
                }
            }
            let mut z = sigma_ou * (near + far + self.tail_sd * xi);
            if let Some(z0) = self.start {
                z += z0 * (-(i as f64) * dt / eps).exp();
            }
            ws.z[i] = z;
        }
        ws.dw.copy_from_slice(&ws.hist[lag..lag + n]);
    }

    fn covariance(&self, n: usize, dt: f64, _eps: f64) -> SchemeCovariance {
        let dim = self.exact + 1;
        let f = &self.cell_factor;
        let cov: Vec<Vec<f64>> = f
            .iter()
            .map(|fr| f.iter().map(|fc| fr.iter().zip(fc).map(|(a, b)| a * b).sum()).collect())
            .collect();
        // coefficient vector of a cell at lag k in (ΔW, Y_1, ..) coordinates
        let coeff = |k: usize| -> Vec<f64> {
            let mut v = vec![0.0; dim];
            if k >= 1 && k <= self.exact {
                v[k] = 1.0;
            } else if k > self.exact && k <= self.max_lag {
                v[0] = self.far_rev[self.max_lag - k];
            }
            v
        };
        let quad = |a: &[f64], b: &[f64]| -> f64 {
            let mut s = 0.0;
            for r in 0..dim {
                for c in 0..dim {
                    s += a[r] * cov[r][c] * b[c];
                }
            }
            s
        };
        let tail = self.tail_sd * self.tail_sd;
        let zz = (0..=n)
            .map(|d| {
                let mut s = tail;
                for k in 1..=self.max_lag {
                    if k + d > self.max_lag {
                        break;
                    }
                    s += quad(&coeff(k), &coeff(k + d));
                }
                s
            })
            .collect();
        let e0 = {
            let mut v = vec![0.0; dim];
            v[0] = 1.0;
            v
        };
        let zw = (1..=n).map(|k| quad(&coeff(k), &e0) / dt.sqrt()).collect();
        SchemeCovariance { zz, zw }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    // four independent accumulators let the compiler vectorize
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        for l in 0..4 {
            acc[l] += a[4 * c + l] * b[4 * c + l];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        s += a[i] * b[i];
    }
    s
}

/// Lower Cholesky factor, retrying with diagonal jitter up to [`MAX_JITTER`].
pub fn cholesky_with_jitter(m: DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let scale = (0..m.nrows())
        .map(|i| m[(i, i)].abs())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let mut jitter = 0.0;
    loop {
        let mut a = m.clone();
        for i in 0..a.nrows() {
            a[(i, i)] += jitter * scale;
        }
        if let Some(ch) = a.cholesky() {
            return Ok(ch.l());
        }
        jitter = if jitter == 0.0 { 1e-16 } else { jitter * 10.0 };
        if jitter > MAX_JITTER {
            return Err(Error::NotPsd {
                detail: format!("{what}: factorization failed with relative jitter up to {MAX_JITTER:e}"),
            });
        }
    }
}

impl DenseCholesky {
    fn build(mp: &ModelParams, ke: &KernelEval, n: usize, dt: f64) -> Result<Self> {
        let m = exact_joint_covariance(mp, ke, n, dt)?;
        Ok(Self {
            factor: cholesky_with_jitter(m, "exact joint covariance")?,
        })
    }

    fn draw(&self, rng: &mut ChaCha8Rng, ws: &mut PathSample) {
        let n = ws.dw.len();
        let dim = 2 * n + 1;
        ws.normals.resize(dim, 0.0);
        for v in ws.normals.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        for r in 0..dim {
            let row = self.factor.row(r);
            let mut s = 0.0;
            for c in 0..=r {
                s += row[c] * ws.normals[c];
            }
            if r <= n {
                ws.z[r] = s;
            } else {
                ws.dw[r - n - 1] = s;
            }
        }
    }
}

/// Exact covariance of (Z_0..Z_n, ΔW_0..ΔW_{n-1}) for the stationary model.
pub fn exact_joint_covariance(mp: &ModelParams, ke: &KernelEval, n: usize, dt: f64) -> Result<DMatrix<f64>> {
    let so = sigma_ou(mp.hurst);
    let delta = dt / mp.eps;
    let ce = CovarianceEval::new(mp.hurst, CovRepr::TimeDomain);
    let cz: Vec<f64> = (0..=n).map(|d| ce.cz(d as f64 * delta)).collect::<Result<_>>()?;
    let mass: Vec<f64> = (1..=n)
        .map(|k| mp.eps.sqrt() * ke.cell_integral((k - 1) as f64 * delta, k as f64 * delta))
        .collect();
    let dim = 2 * n + 1;
    let mut m = DMatrix::<f64>::zeros(dim, dim);
    for i in 0..=n {
        for l in 0..=n {
            m[(i, l)] = so * so * cz[i.abs_diff(l)];
        }
        for j in 0..n {
            if j < i {
                let v = so * mass[i - j - 1];
                m[(i, n + 1 + j)] = v;
                m[(n + 1 + j, i)] = v;
            }
        }
    }
    for j in 0..n {
        m[(n + 1 + j, n + 1 + j)] = dt;
    }
    Ok(m)
}

/// Result of comparing the scheme covariance with the exact Gaussian law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactCheckReport {
    /// Max |scheme - exact| over Z-Z entries, in units of σ_ou².
    pub max_zz: f64,
    /// Max |scheme - exact| over Z-ΔW entries, in units of σ_ou √dt.
    pub max_zw: f64,
    /// Max of the two.
    pub discrepancy: f64,
    /// |Var(Z) - σ_ou²| of the exact sampler's covariance, from its Cholesky factor.
    pub exact_zero_lag_error: f64,
    pub n_steps: usize,
}

/// Compares the moving-average scheme covariance with the exact joint law (n_steps ≤ 512).
pub fn exact_gaussian_check(mp: &ModelParams, grid: &SimGrid) -> Result<ExactCheckReport> {
    if grid.n_steps > MAX_EXACT_STEPS {
        return Err(Error::validation(
            "grid.n_steps",
            format!("at most {MAX_EXACT_STEPS} for the exact check"),
        ));
    }
    let n = grid.n_steps;
    let dt = grid.dt(mp);
    let so = sigma_ou(mp.hurst);
    let ke = KernelEval::new(mp.hurst);
    let exact = exact_joint_covariance(mp, &ke, n, dt)?;
    let l = cholesky_with_jitter(exact.clone(), "exact joint covariance")?;
    let rebuilt = &l * l.transpose();
    let exact_zero_lag_error = (0..=n).map(|i| (rebuilt[(i, i)] - so * so).abs()).fold(0.0, f64::max);

    let scheme = Simulator::new(mp, &grid.with_scheme(Scheme::TruncatedMovingAverage))?.scheme_covariance()?;
    let mut max_zz: f64 = 0.0;
    for d in 0..=n {
        max_zz = max_zz.max((scheme.zz[d] - exact[(0, d)] / (so * so)).abs());
    }
    let mut max_zw: f64 = 0.0;
    for k in 1..=n {
        let e = exact[(n, n + 1 + n - k)] / (so * dt.sqrt());
        max_zw = max_zw.max((scheme.zw[k - 1] - e).abs());
    }
    Ok(ExactCheckReport {
        max_zz,
        max_zw,
        discrepancy: max_zz.max(max_zw),
        exact_zero_lag_error,
        n_steps: n,
    })
}

/// Streams `n_paths` stationary paths (antithetic pairs share a noise draw).
pub fn simulate_paths(
    mp: &ModelParams,
    grid: &SimGrid,
    n_paths: usize,
    seed: u64,
) -> Result<impl Iterator<Item = PathBundle>> {
    if n_paths == 0 {
        return Err(Error::validation("n_paths", "must be positive"));
    }
    let sim = Simulator::new(mp, grid)?;
    Ok((0..n_paths as u64).map(move |i| sim.path(seed, i)))
}

/// Streams `n_paths` one-sided paths started at `z0`.
pub fn simulate_paths_rl(
    mp: &ModelParams,
    grid: &SimGrid,
    z0: f64,
    n_paths: usize,
    seed: u64,
) -> Result<impl Iterator<Item = PathBundle>> {
    if n_paths == 0 {
        return Err(Error::validation("n_paths", "must be positive"));
    }
    let sim = Simulator::new_rl(mp, grid, z0)?;
    Ok((0..n_paths as u64).map(move |i| sim.path(seed, i)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussfunc::VolFunction;

    fn model(eps: f64) -> ModelParams {
        ModelParams::new(0.3, eps, -0.5, VolFunction::bounded_sigmoid(0.1, 0.3, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn grid_validation() {
        let mp = model(0.05);
        let g = SimGrid::resolving(&mp, 8.0, 30.0);
        assert!(g.dt(&mp) <= mp.eps / 8.0 + 1e-15);
        assert!(g.validate(&mp).is_ok());
        let coarse = SimGrid { n_steps: 10, ..g };
        assert!(coarse.validate(&mp).is_err());
        let short = SimGrid {
            warmup_horizon: 0.5,
            ..g
        };
        assert!(short.validate(&mp).is_err());
        let big = SimGrid {
            n_steps: 1000,
            scheme: Scheme::CholeskyExact,
            ..g
        };
        assert!(big.validate(&mp).is_err());
    }

    #[test]
    fn reproducible_and_positive() {
        let mp = model(0.1).with_maturity(0.5).unwrap();
        let g = SimGrid::resolving(&mp, 4.0, 20.0);
        let sim = Simulator::new(&mp, &g).unwrap();
        let a = sim.path(11, 4);
        let b = sim.path(11, 4);
        assert_eq!(a, b);
        assert!(a.x.iter().all(|&x| x > 0.0));
        assert_eq!(a.x[0], mp.x0);
        for (s, z) in a.sigma.iter().zip(&a.z) {
            assert_eq!(*s, mp.vol_fn.value(*z));
        }
        // antithetic partner mirrors Z
        let c = sim.path(11, 5);
        for (p, q) in a.z.iter().zip(&c.z) {
            assert_eq!(*p, -*q);
        }
    }

    #[test]
    fn rl_starts_at_z0() {
        let mp = model(0.1).with_maturity(0.5).unwrap();
        let g = SimGrid::resolving(&mp, 4.0, 20.0);
        let p = simulate_paths_rl(&mp, &g, 0.7, 2, 3).unwrap().next().unwrap();
        assert_eq!(p.z[0], 0.7);
    }

    #[test]
    fn near_cells_have_exact_cross_covariance() {
        let mp = model(0.05);
        let g = SimGrid::resolving(&mp, 8.0, 30.0);
        let sim = Simulator::new(&mp, &g).unwrap();
        let cov = sim.scheme_covariance().unwrap();
        let ke = KernelEval::new(mp.hurst);
        let delta = sim.dt() / mp.eps;
        for k in 1..=10 {
            let exact = mp.eps.sqrt() * ke.cell_integral((k - 1) as f64 * delta, k as f64 * delta) / sim.dt().sqrt();
            assert!((cov.zw[k - 1] - exact).abs() < 1e-12);
        }
    }
}
