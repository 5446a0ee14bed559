//! Volatility functions F and the Gaussian functionals built from them: the moments
//! ⟨F^j⟩, the effective volatility σ̄, the centred function G and the leverage constant D̄.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{sigma_ou, CovRepr, CovarianceEval, Hurst, KernelEval};
use crate::model::ModelParams;
use crate::quad::{GaussHermite, Integrator};

/// Strictly increasing map from the fOU value to the volatility level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum VolFunction {
    /// σ_min + (σ_max - σ_min) / (1 + e^{-slope z}).
    BoundedSigmoid { sigma_min: f64, sigma_max: f64, slope: f64 },
    /// Constant volatility (degenerate; no dependence on Z).
    Constant { sigma: f64 },
    /// level * e^{scale z}; unbounded, only accepted when explicitly allowed.
    Exponential { level: f64, scale: f64 },
    /// C² cubic spline through user knots with exponential tails.
    UserTable(TableSpline),
}

impl VolFunction {
    pub fn bounded_sigmoid(sigma_min: f64, sigma_max: f64, slope: f64) -> Result<Self> {
        let f = VolFunction::BoundedSigmoid {
            sigma_min,
            sigma_max,
            slope,
        };
        f.validate(false)?;
        Ok(f)
    }

    pub fn constant(sigma: f64) -> Result<Self> {
        let f = VolFunction::Constant { sigma };
        f.validate(false)?;
        Ok(f)
    }

    pub fn user_table(knots: Vec<f64>, values: Vec<f64>, tail_rate: f64) -> Result<Self> {
        Ok(VolFunction::UserTable(TableSpline::new(knots, values, tail_rate)?))
    }

    pub fn is_bounded(&self) -> bool {
        !matches!(self, VolFunction::Exponential { .. })
    }

    /// Checks positivity, monotonicity and boundedness.
    pub fn validate(&self, allow_unbounded: bool) -> Result<()> {
        let finite = |k: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::validation(format!("vol_fn.{k}"), "must be finite"))
            }
        };
        match *self {
            VolFunction::BoundedSigmoid {
                sigma_min,
                sigma_max,
                slope,
            } => {
                finite("sigma_min", sigma_min)?;
                finite("sigma_max", sigma_max)?;
                finite("slope", slope)?;
                if sigma_min <= 0.0 {
                    return Err(Error::validation("vol_fn.sigma_min", "must be positive"));
                }
                if sigma_max <= sigma_min {
                    return Err(Error::validation("vol_fn.sigma_max", "must exceed sigma_min"));
                }
                if slope <= 0.0 {
                    return Err(Error::validation("vol_fn.slope", "must be positive"));
                }
            }
            VolFunction::Constant { sigma } => {
                finite("sigma", sigma)?;
                if sigma <= 0.0 {
                    return Err(Error::validation("vol_fn.sigma", "must be positive"));
                }
            }
            VolFunction::Exponential { level, scale } => {
                finite("level", level)?;
                finite("scale", scale)?;
                if !allow_unbounded {
                    return Err(Error::validation(
                        "vol_fn.kind",
                        "exponential volatility is unbounded; set allow_unbounded = true to use it",
                    ));
                }
                if level <= 0.0 || scale <= 0.0 {
                    return Err(Error::validation("vol_fn", "level and scale must be positive"));
                }
            }
            VolFunction::UserTable(ref t) => t.validate()?,
        }
        Ok(())
    }

    /// F(z).
    pub fn value(&self, z: f64) -> f64 {
        match *self {
            VolFunction::BoundedSigmoid {
                sigma_min,
                sigma_max,
                slope,
            } => sigma_min + (sigma_max - sigma_min) * logistic(slope * z),
            VolFunction::Constant { sigma } => sigma,
            VolFunction::Exponential { level, scale } => level * (scale * z).exp(),
            VolFunction::UserTable(ref t) => t.value(z),
        }
    }

    /// F'(z).
    pub fn deriv(&self, z: f64) -> f64 {
        match *self {
            VolFunction::BoundedSigmoid {
                sigma_min,
                sigma_max,
                slope,
            } => {
                let p = logistic(slope * z);
                (sigma_max - sigma_min) * slope * p * (1.0 - p)
            }
            VolFunction::Constant { .. } => 0.0,
            VolFunction::Exponential { level, scale } => level * scale * (scale * z).exp(),
            VolFunction::UserTable(ref t) => t.deriv(z),
        }
    }

    /// F(z) F'(z), the derivative of G.
    pub fn f_fprime(&self, z: f64) -> f64 {
        self.value(z) * self.deriv(z)
    }

    /// Numerical sup over the real line of |g(z)| for g built from F, by dense sampling.
    pub fn sup_abs(&self, g: impl Fn(&Self, f64) -> f64) -> f64 {
        let span = match *self {
            VolFunction::BoundedSigmoid { slope, .. } => 40.0 / slope,
            VolFunction::UserTable(ref t) => {
                let (lo, hi) = (t.knots[0], *t.knots.last().unwrap());
                (hi - lo) + 40.0 / t.tail_rate + lo.abs().max(hi.abs())
            }
            _ => 40.0,
        };
        let n = 40_000;
        (0..=n)
            .map(|i| g(self, -span + 2.0 * span * i as f64 / n as f64).abs())
            .fold(0.0, f64::max)
    }
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// User-supplied monotone volatility table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TableSpec", into = "TableSpec")]
pub struct TableSpline {
    knots: Vec<f64>,
    values: Vec<f64>,
    tail_rate: f64,
    second: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TableSpec {
    knots: Vec<f64>,
    values: Vec<f64>,
    tail_rate: f64,
}

impl TryFrom<TableSpec> for TableSpline {
    type Error = Error;
    fn try_from(s: TableSpec) -> Result<Self> {
        TableSpline::new(s.knots, s.values, s.tail_rate)
    }
}

impl From<TableSpline> for TableSpec {
    fn from(t: TableSpline) -> Self {
        TableSpec {
            knots: t.knots,
            values: t.values,
            tail_rate: t.tail_rate,
        }
    }
}

impl TableSpline {
    /// Cubic spline through `(knots, values)` continued by `A ∓ B e^{∓c(z - z_end)}` outside,
    /// matched in value, slope and curvature at both ends (c = `tail_rate`).
    pub fn new(knots: Vec<f64>, values: Vec<f64>, tail_rate: f64) -> Result<Self> {
        if knots.len() < 3 || knots.len() != values.len() {
            return Err(Error::validation(
                "vol_fn.knots",
                "need at least 3 knots and as many values as knots",
            ));
        }
        if knots.windows(2).any(|w| !(w[1] > w[0])) || knots.iter().any(|k| !k.is_finite()) {
            return Err(Error::validation(
                "vol_fn.knots",
                "must be finite and strictly increasing",
            ));
        }
        if values.windows(2).any(|w| !(w[1] > w[0])) || values[0] <= 0.0 {
            return Err(Error::validation(
                "vol_fn.values",
                "must be positive and strictly increasing",
            ));
        }
        if !(tail_rate > 0.0 && tail_rate.is_finite()) {
            return Err(Error::validation("vol_fn.tail_rate", "must be positive"));
        }
        let second = spline_second_derivatives(&knots, &values, tail_rate);
        let t = TableSpline {
            knots,
            values,
            tail_rate,
            second,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn tail_rate(&self) -> f64 {
        self.tail_rate
    }

    fn validate(&self) -> Result<()> {
        let n = self.knots.len();
        let (lo, hi) = (self.knots[0], self.knots[n - 1]);
        let samples = 200 * n;
        for i in 0..=samples {
            let z = lo + (hi - lo) * i as f64 / samples as f64;
            if !(self.deriv(z) > 0.0) {
                return Err(Error::validation(
                    "vol_fn.values",
                    format!("interpolant is not strictly increasing near z = {z:.4}"),
                ));
            }
        }
        let floor = self.values[0] - self.deriv(lo) / self.tail_rate;
        if floor <= 0.0 {
            return Err(Error::validation(
                "vol_fn.tail_rate",
                format!("left tail would reach non-positive volatility (limit {floor:.4})"),
            ));
        }
        Ok(())
    }

    fn segment(&self, z: f64) -> usize {
        match self.knots.binary_search_by(|k| k.total_cmp(&z)) {
            Ok(i) => i.min(self.knots.len() - 2),
            Err(i) => (i - 1).min(self.knots.len() - 2),
        }
    }

    fn end_slope(&self, left: bool) -> f64 {
        let n = self.knots.len();
        if left {
            let h = self.knots[1] - self.knots[0];
            (self.values[1] - self.values[0]) / h - h * (2.0 * self.second[0] + self.second[1]) / 6.0
        } else {
            let h = self.knots[n - 1] - self.knots[n - 2];
            (self.values[n - 1] - self.values[n - 2]) / h + h * (2.0 * self.second[n - 1] + self.second[n - 2]) / 6.0
        }
    }

    pub fn value(&self, z: f64) -> f64 {
        let n = self.knots.len();
        let c = self.tail_rate;
        if z < self.knots[0] {
            let b = self.end_slope(true) / c;
            return self.values[0] - b + b * (c * (z - self.knots[0])).exp();
        }
        if z > self.knots[n - 1] {
            let b = self.end_slope(false) / c;
            return self.values[n - 1] + b - b * (-c * (z - self.knots[n - 1])).exp();
        }
        let i = self.segment(z);
        let h = self.knots[i + 1] - self.knots[i];
        let a = (self.knots[i + 1] - z) / h;
        let b = 1.0 - a;
        a * self.values[i]
            + b * self.values[i + 1]
            + ((a * a * a - a) * self.second[i] + (b * b * b - b) * self.second[i + 1]) * h * h / 6.0
    }

    pub fn deriv(&self, z: f64) -> f64 {
        let n = self.knots.len();
        let c = self.tail_rate;
        if z < self.knots[0] {
            return self.end_slope(true) * (c * (z - self.knots[0])).exp();
        }
        if z > self.knots[n - 1] {
            return self.end_slope(false) * (-c * (z - self.knots[n - 1])).exp();
        }
        let i = self.segment(z);
        let h = self.knots[i + 1] - self.knots[i];
        let a = (self.knots[i + 1] - z) / h;
        let b = 1.0 - a;
        (self.values[i + 1] - self.values[i]) / h
            + (-(3.0 * a * a - 1.0) * self.second[i] + (3.0 * b * b - 1.0) * self.second[i + 1]) * h / 6.0
    }
}

// Second derivatives M_i with end conditions M_0 = c F'(z_0) and M_n = -c F'(z_n), which make
// the exponential tails join with matching curvature.
fn spline_second_derivatives(x: &[f64], y: &[f64], c: f64) -> Vec<f64> {
    let n = x.len();
    let mut sub = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut sup = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    let h0 = x[1] - x[0];
    diag[0] = 1.0 + c * h0 / 3.0;
    sup[0] = c * h0 / 6.0;
    rhs[0] = c * (y[1] - y[0]) / h0;
    for i in 1..n - 1 {
        let hl = x[i] - x[i - 1];
        let hr = x[i + 1] - x[i];
        sub[i] = hl / 6.0;
        diag[i] = (hl + hr) / 3.0;
        sup[i] = hr / 6.0;
        rhs[i] = (y[i + 1] - y[i]) / hr - (y[i] - y[i - 1]) / hl;
    }
    let hn = x[n - 1] - x[n - 2];
    sub[n - 1] = c * hn / 6.0;
    diag[n - 1] = 1.0 + c * hn / 3.0;
    rhs[n - 1] = -c * (y[n - 1] - y[n - 2]) / hn;
    // Thomas algorithm
    for i in 1..n {
        let m = sub[i] / diag[i - 1];
        diag[i] -= m * sup[i - 1];
        rhs[i] -= m * rhs[i - 1];
    }
    let mut out = vec![0.0; n];
    out[n - 1] = rhs[n - 1] / diag[n - 1];
    for i in (0..n - 1).rev() {
        out[i] = (rhs[i] - sup[i] * out[i + 1]) / diag[i];
    }
    out
}

/// Gaussian moments of F under the stationary law N(0, σ_ou²).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussMoments {
    /// ⟨F⟩
    pub mean_f: f64,
    /// ⟨F²⟩ = σ̄²
    pub mean_f2: f64,
    /// ⟨F'⟩
    pub mean_fprime: f64,
    /// ⟨F'²⟩
    pub mean_fprime2: f64,
    /// ⟨F F'⟩
    pub mean_ffprime: f64,
}

/// ⟨g⟩ = E[g(σ_ou Z)], Z ~ N(0,1).
pub fn gauss_average(g: impl Fn(f64) -> f64, hurst: Hurst, gh_order: usize) -> Result<f64> {
    let gh = GaussHermite::new(gh_order)?;
    let so = sigma_ou(hurst);
    Ok(gh.expect(|z| g(so * z)))
}

/// ⟨F^j⟩.
pub fn gauss_moment(f: &VolFunction, j: i32, hurst: Hurst, gh_order: usize) -> Result<f64> {
    gauss_average(|x| f.value(x).powi(j), hurst, gh_order)
}

/// ⟨F'^j⟩.
pub fn gauss_moment_deriv(f: &VolFunction, j: i32, hurst: Hurst, gh_order: usize) -> Result<f64> {
    gauss_average(|x| f.deriv(x).powi(j), hurst, gh_order)
}

pub fn moments(f: &VolFunction, hurst: Hurst, gh_order: usize) -> Result<GaussMoments> {
    let gh = GaussHermite::new(gh_order)?;
    let so = sigma_ou(hurst);
    let avg = |g: &dyn Fn(f64) -> f64| gh.expect(|z| g(so * z));
    Ok(GaussMoments {
        mean_f: avg(&|x| f.value(x)),
        mean_f2: avg(&|x| f.value(x).powi(2)),
        mean_fprime: avg(&|x| f.deriv(x)),
        mean_fprime2: avg(&|x| f.deriv(x).powi(2)),
        mean_ffprime: avg(&|x| f.f_fprime(x)),
    })
}

/// σ̄ = ⟨F²⟩^{1/2}.
pub fn sigma_bar(f: &VolFunction, hurst: Hurst, gh_order: usize) -> Result<f64> {
    Ok(gauss_moment(f, 2, hurst, gh_order)?.sqrt())
}

/// τ̄ = 2/σ̄², the leading-order variance time scale.
pub fn tau_bar(f: &VolFunction, hurst: Hurst, gh_order: usize) -> Result<f64> {
    Ok(2.0 / gauss_moment(f, 2, hurst, gh_order)?)
}

/// The centred function G(z) = (F(z)² - σ̄²)/2 and its derivative G' = F F'.
#[derive(Debug, Clone, PartialEq)]
pub struct CenteredSquare {
    pub f: VolFunction,
    pub sigma_bar2: f64,
}

impl CenteredSquare {
    pub fn new(f: &VolFunction, hurst: Hurst, gh_order: usize) -> Result<Self> {
        Ok(Self {
            f: f.clone(),
            sigma_bar2: gauss_moment(f, 2, hurst, gh_order)?,
        })
    }
    pub fn g(&self, z: f64) -> f64 {
        0.5 * (self.f.value(z).powi(2) - self.sigma_bar2)
    }
    pub fn g_prime(&self, z: f64) -> f64 {
        self.f.f_fprime(z)
    }
}

/// Φ(c) = E[F(σ_ou Z) (F F')(σ_ou Z')] for standard normals with correlation c.
#[derive(Debug, Clone)]
pub struct LeverageIntegrand {
    gh: GaussHermite,
    sigma_ou: f64,
    f: VolFunction,
    at_zero: f64,
}

impl LeverageIntegrand {
    pub fn new(f: &VolFunction, hurst: Hurst, gh_order: usize) -> Result<Self> {
        let gh = GaussHermite::new(gh_order)?;
        let so = sigma_ou(hurst);
        let mean_f = gh.expect(|z| f.value(so * z));
        let mean_ffp = gh.expect(|z| f.f_fprime(so * z));
        Ok(Self {
            gh,
            sigma_ou: so,
            f: f.clone(),
            at_zero: mean_f * mean_ffp,
        })
    }

    /// Φ(c) - Φ(0).
    pub fn excess(&self, c: f64) -> f64 {
        let c = c.clamp(-1.0, 1.0);
        let r = (1.0 - c * c).max(0.0).sqrt();
        let so = self.sigma_ou;
        let mut acc = 0.0;
        for (&x, &wx) in self.gh.nodes.iter().zip(&self.gh.weights) {
            let fx = self.f.value(so * x);
            let inner: f64 = self
                .gh
                .nodes
                .iter()
                .zip(&self.gh.weights)
                .map(|(&y, &wy)| wy * self.f.f_fprime(so * (c * x + r * y)))
                .sum();
            acc += wx * fx * inner;
        }
        acc - self.at_zero
    }

    pub fn phi(&self, c: f64) -> f64 {
        self.excess(c) + self.at_zero
    }

    /// Φ(0) = ⟨F⟩⟨F F'⟩.
    pub fn at_zero(&self) -> f64 {
        self.at_zero
    }
}

/// D̄ = σ_ou ∫_0^∞ E[F(σ_ou Z_0) (F F')(σ_ou Z_s)] K(s) ds, with Z the unit-scale normalized fOU.
///
/// Because ∫K = 0 the constant Φ(0) = ⟨F⟩⟨F F'⟩ can be subtracted from the integrand, which
/// turns the slowly decaying tail s^{H-3/2} into s^{3H-7/2}.
pub fn d_bar(f: &VolFunction, hurst: Hurst, gh_order: usize, quad_tol: f64) -> Result<f64> {
    let lev = LeverageIntegrand::new(f, hurst, gh_order)?;
    let ke = KernelEval::new(hurst);
    let cz = CovarianceEval::new(hurst, CovRepr::TimeDomain).with_tol(0.1 * quad_tol);
    let a = hurst.value() - 0.5;
    let q = Integrator::with_tol(quad_tol);
    let integrand = |s: f64| {
        let c = cz.cz(s).unwrap_or(f64::NAN);
        lev.excess(c) * ke.value_at(s)
    };
    let head = q
        .integrate_graded("leverage constant head", integrand, 0.0, 1.0, a)?
        .value;
    let mid = q.integrate("leverage constant middle", integrand, 1.0, 8.0)?.value;
    let tail = q
        .integrate_tail("leverage constant tail", integrand, 8.0, 3.5 - 3.0 * hurst.value())?
        .value;
    Ok(sigma_ou(hurst) * (head + mid + tail))
}

/// The leverage constant truncated at `horizon` = (T - t)/ε:
/// σ_ou ∫_0^horizon E[F(σ_ou Z_0) (F F')(σ_ou Z_s)] K(s) ds.
///
/// This is E[σ_t ϑ_t]/√ε exactly. It tends to D̄ as the horizon grows, but only at the rate
/// horizon^{H-1/2}, through the term Φ(0) ∫_0^horizon K.
pub fn d_bar_horizon(f: &VolFunction, hurst: Hurst, horizon: f64, gh_order: usize, quad_tol: f64) -> Result<f64> {
    if !(horizon > 0.0) {
        return Err(Error::domain("d_bar_horizon", "horizon must be positive"));
    }
    let lev = LeverageIntegrand::new(f, hurst, gh_order)?;
    let ke = KernelEval::new(hurst);
    let cz = CovarianceEval::new(hurst, CovRepr::TimeDomain).with_tol(0.1 * quad_tol);
    let q = Integrator::with_tol(quad_tol);
    let integrand = |s: f64| lev.excess(cz.cz(s).unwrap_or(f64::NAN)) * ke.value_at(s);
    let first = horizon.min(1.0);
    let mut acc = q
        .integrate_graded("truncated leverage head", integrand, 0.0, first, hurst.value() - 0.5)?
        .value;
    let mut lo = first;
    while lo < horizon {
        let hi = (2.0 * lo).min(horizon);
        acc += q.integrate("truncated leverage panel", integrand, lo, hi)?.value;
        lo = hi;
    }
    Ok(sigma_ou(hurst) * (acc + lev.at_zero() * ke.antiderivative(horizon)))
}

/// Default Gauss–Hermite order for the one- and two-dimensional Gaussian averages.
pub const DEFAULT_GH_ORDER: usize = 40;
/// Default absolute tolerance of the outer integral in D̄.
pub const DEFAULT_QUAD_TOL: f64 = 1e-9;

/// Effective parameters of the fast-mean-reverting limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupParams {
    pub sigma_bar: f64,
    pub d_bar: f64,
    /// τ̄ = 2/σ̄² in years.
    pub tau_bar: f64,
    /// ⟨F⟩
    pub mean_f: f64,
    /// ⟨F²⟩ - ⟨F⟩²
    pub var_f: f64,
    /// ⟨F'⟩
    pub mean_fp: f64,
    /// ⟨F'²⟩
    pub mean_fp2: f64,
}

/// Group parameters with explicit quadrature settings.
pub fn group_params_with(f: &VolFunction, hurst: Hurst, gh_order: usize, quad_tol: f64) -> Result<GroupParams> {
    f.validate(true)?;
    let m = moments(f, hurst, gh_order)?;
    Ok(GroupParams {
        sigma_bar: m.mean_f2.sqrt(),
        d_bar: d_bar(f, hurst, gh_order, quad_tol)?,
        tau_bar: 2.0 / m.mean_f2,
        mean_f: m.mean_f,
        var_f: (m.mean_f2 - m.mean_f * m.mean_f).max(0.0),
        mean_fp: m.mean_fprime,
        mean_fp2: m.mean_fprime2,
    })
}

pub fn group_params(mp: &ModelParams) -> Result<GroupParams> {
    mp.validate()?;
    group_params_with(&mp.vol_fn, mp.hurst, DEFAULT_GH_ORDER, DEFAULT_QUAD_TOL)
}

/// Upper bound σ_ou sup|F| sup|F F'| ∫|K| on |D̄|.
pub fn d_bar_bound(f: &VolFunction, hurst: Hurst) -> f64 {
    let ke = KernelEval::new(hurst);
    sigma_ou(hurst) * f.sup_abs(|g, z| g.value(z)) * f.sup_abs(|g, z| g.f_fprime(z)) * ke.l1_norm()
}
