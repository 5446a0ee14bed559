//! The fractional Ornstein–Uhlenbeck moving-average kernel and the covariance functions
//! built from it.
//!
//! With a = H - 1/2, the unit-scale kernel is
//!
//! ```text
//! K(t) = [ t^a - ∫_0^t (t-s)^a e^{-s} ds ] / (σ_ou Γ(a+1))
//! ```
//!
//! and the ε-scaled kernel is K^ε(t) = K(t/ε)/√ε. Both K and its antiderivative are values of
//! the single function `R_b(t) = t^b - ∫_0^t (t-s)^b e^{-s} ds` (with b = a and b = a + 1),
//! which is evaluated by a power series for small t, a cancellation-free quadrature form for
//! moderate t and an asymptotic series for large t.

use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussfunc::VolFunction;
use crate::model::ModelParams;
use crate::quad::{gamma, wynn_epsilon, GaussHermite, Integrator};

/// Above this argument `R_b` switches to its asymptotic expansion.
const ASYMPTOTIC_FROM: f64 = 40.0;
/// |c| beyond this threshold is treated as perfect (anti)correlation in [`psi_of_c`].
const DEGENERATE_CORRELATION: f64 = 1.0 - 1e-10;

/// Hurst exponent restricted to the rough regime 0 < H < 1/2.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Hurst(f64);

impl Hurst {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && value > 0.0 && value < 0.5 {
            Ok(Hurst(value))
        } else {
            Err(Error::domain("hurst", format!("H = {value} must lie in (0, 1/2)")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Hurst {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        Hurst::new(v)
    }
}

impl From<Hurst> for f64 {
    fn from(h: Hurst) -> f64 {
        h.0
    }
}

/// Stationary standard deviation of the fOU: σ_ou² = 1/(2 sin πH).
pub fn sigma_ou(h: Hurst) -> f64 {
    (0.5 / (PI * h.value()).sin()).sqrt()
}

/// fBM scale σ_H, related by σ_ou² = Γ(2H+1) σ_H² / 2.
pub fn sigma_h(h: Hurst) -> f64 {
    let s2 = sigma_ou(h).powi(2);
    (2.0 * s2 / gamma(2.0 * h.value() + 1.0)).sqrt()
}

/// A causal moving-average kernel usable by the path simulators.
///
/// The fOU kernel [`KernelEval`] is the only shipped implementation. A user-supplied kernel
/// must carry its own normalization: the simulated process is `amplitude() * ∫ k(t-s) dW_s`
/// and is expected to have unit-scale variance `amplitude()^2 * ∫ k^2`.
pub trait MovingAverageKernel: Send + Sync {
    /// Multiplier in front of the stochastic integral (σ_ou for the fOU kernel).
    fn amplitude(&self) -> f64;
    /// Pointwise value for t > 0.
    fn value(&self, t: f64) -> f64;
    /// ∫_a^b k(u) du for 0 ≤ a ≤ b.
    fn integral(&self, a: f64, b: f64) -> f64;
    /// ∫_0^w k(u + s1) k(u + s2) du.
    fn product_integral(&self, s1: f64, s2: f64, w: f64) -> Result<f64>;
    /// ∫_t^∞ k(u)^2 du.
    fn square_tail(&self, t: f64) -> Result<f64>;
}

/// Evaluator for the unit-scale fOU kernel K.
#[derive(Debug)]
pub struct KernelEval {
    hurst: Hurst,
    sigma_ou: f64,
    quad_tol: f64,
    split_point: f64,
    a: f64,
    norm: f64,
    anti_norm: f64,
    l2_total: OnceLock<f64>,
    sign_change: OnceLock<f64>,
}

impl Clone for KernelEval {
    fn clone(&self) -> Self {
        let k = KernelEval::build(self.hurst, self.quad_tol, self.split_point);
        if let Some(v) = self.l2_total.get() {
            let _ = k.l2_total.set(*v);
        }
        k
    }
}

impl KernelEval {
    pub fn new(hurst: Hurst) -> Self {
        Self::build(hurst, 1e-9, 1.0)
    }

    pub fn with_params(hurst: Hurst, quad_tol: f64, split_point: f64) -> Result<Self> {
        if !(quad_tol > 0.0 && quad_tol.is_finite()) {
            return Err(Error::validation("quad_tol", "must be positive and finite"));
        }
        if !(split_point > 0.0 && split_point < ASYMPTOTIC_FROM) {
            return Err(Error::validation(
                "split_point",
                format!("must lie in (0, {ASYMPTOTIC_FROM})"),
            ));
        }
        Ok(Self::build(hurst, quad_tol, split_point))
    }

    fn build(hurst: Hurst, quad_tol: f64, split_point: f64) -> Self {
        let a = hurst.value() - 0.5;
        let so = sigma_ou(hurst);
        Self {
            hurst,
            sigma_ou: so,
            quad_tol,
            split_point,
            a,
            norm: 1.0 / (so * gamma(a + 1.0)),
            anti_norm: 1.0 / (so * gamma(a + 2.0)),
            l2_total: OnceLock::new(),
            sign_change: OnceLock::new(),
        }
    }

    pub fn hurst(&self) -> Hurst {
        self.hurst
    }
    pub fn sigma_ou(&self) -> f64 {
        self.sigma_ou
    }
    pub fn quad_tol(&self) -> f64 {
        self.quad_tol
    }
    pub fn split_point(&self) -> f64 {
        self.split_point
    }

    fn integrator(&self) -> Integrator {
        Integrator::with_tol(self.quad_tol)
    }

    /// K(t); t = 0 is rejected because the kernel diverges there.
    pub fn k(&self, t: f64) -> Result<f64> {
        if t == 0.0 {
            return Err(Error::SingularAtOrigin);
        }
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::domain(
                "kernel_K",
                format!("t = {t} must be positive and finite"),
            ));
        }
        Ok(self.value_at(t))
    }

    /// K(t) for t > 0 without argument checks (returns +∞ at 0).
    pub fn value_at(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return f64::INFINITY;
        }
        self.norm * complement(self.a, t, self.split_point, self.quad_tol)
    }

    /// Small-t form (power series), valid for any t but meant for t ≤ split_point.
    pub fn value_series(&self, t: f64) -> f64 {
        self.norm * complement_series(self.a, t)
    }

    /// Large-t form (quadrature or asymptotic rewriting), meant for t > split_point.
    pub fn value_large(&self, t: f64) -> f64 {
        self.norm * complement_large(self.a, t, self.quad_tol)
    }

    /// ∫_0^t K(u) du.
    pub fn antiderivative(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        self.anti_norm * complement(self.a + 1.0, t, self.split_point, self.quad_tol)
    }

    /// ∫_a^b K(u) du for 0 ≤ a ≤ b.
    pub fn cell_integral(&self, a: f64, b: f64) -> f64 {
        self.antiderivative(b) - self.antiderivative(a)
    }

    /// ∫_0^t K(u)^2 du.
    pub fn l2_head(&self, t: f64) -> Result<f64> {
        self.lagged_product(t, 0.0)
    }

    /// ∫_0^∞ K(u)^2 du (equal to 1 up to quadrature error).
    pub fn l2_norm_sq(&self) -> Result<f64> {
        if let Some(v) = self.l2_total.get() {
            return Ok(*v);
        }
        let q = self.integrator();
        let head = q
            .integrate_graded("kernel L2 head", |u| self.value_at(u).powi(2), 0.0, 1.0, 2.0 * self.a)?
            .value;
        let tail = self.l2_tail_from_one(1.0)?;
        let total = head + tail;
        let _ = self.l2_total.set(total);
        Ok(total)
    }

    fn l2_tail_from_one(&self, t0: f64) -> Result<f64> {
        debug_assert!(t0 >= 1.0);
        let q = self.integrator();
        let mut acc = 0.0;
        let mut lo = t0;
        // moderate range by panels; asymptotic range by power-law tail mapping
        while lo < ASYMPTOTIC_FROM {
            let hi = (lo * 2.0).min(ASYMPTOTIC_FROM);
            acc += q
                .integrate("kernel L2 panel", |u| self.value_at(u).powi(2), lo, hi)?
                .value;
            lo = hi;
        }
        acc += q
            .integrate_tail("kernel L2 tail", |u| self.value_at(u).powi(2), lo, 2.0 - 2.0 * self.a)?
            .value;
        Ok(acc)
    }

    /// ∫_t^∞ K(u)^2 du.
    pub fn l2_tail(&self, t: f64) -> Result<f64> {
        if t <= 0.0 {
            return self.l2_norm_sq();
        }
        if t >= 1.0 {
            self.l2_tail_from_one(t)
        } else {
            Ok((self.l2_norm_sq()? - self.l2_head(t)?).max(0.0))
        }
    }

    /// Point where K changes sign (K > 0 before, K < 0 after).
    pub fn sign_change(&self) -> f64 {
        *self.sign_change.get_or_init(|| {
            let (mut lo, mut hi) = (1e-6f64, 1e3f64);
            for _ in 0..200 {
                let mid = (lo * hi).sqrt();
                if self.value_at(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi / lo < 1.0 + 1e-14 {
                    break;
                }
            }
            0.5 * (lo + hi)
        })
    }

    /// ∫_0^∞ |K(u)| du, using ∫_0^∞ K = 0 so that ∫|K| = 2 ∫_0^{t*} K.
    pub fn l1_norm(&self) -> f64 {
        2.0 * self.antiderivative(self.sign_change())
    }

    /// ∫_0^t K(u) K(u + s) du.
    pub fn lagged_product(&self, t: f64, s: f64) -> Result<f64> {
        if t <= 0.0 {
            return Ok(0.0);
        }
        let q = self.integrator();
        let f = |u: f64| self.value_at(u) * self.value_at(u + s);
        let alpha = if s == 0.0 { 2.0 * self.a } else { self.a };
        let first = t.min(1.0);
        let mut acc = q.integrate_graded("lagged product head", f, 0.0, first, alpha)?.value;
        let mut lo = first;
        while lo < t {
            let hi = (2.0 * lo).min(t);
            if lo >= ASYMPTOTIC_FROM && t.is_infinite() {
                break;
            }
            acc += q.integrate("lagged product panel", f, lo, hi)?.value;
            lo = hi;
        }
        Ok(acc)
    }

    /// ∫_0^∞ K(t + w) K(s + w) dw for t, s ≥ 0: in unit scale, the covariance of the
    /// conditional means E[Z_t | past] and E[Z_s | past] given the noise before time 0.
    pub fn past_covariance(&self, t: f64, s: f64) -> Result<f64> {
        if t < 0.0 || s < 0.0 {
            return Err(Error::domain("past_covariance", "times must be non-negative"));
        }
        let (lo, hi) = if t <= s { (t, s) } else { (s, t) };
        let d = hi - lo;
        if lo < 1.0 {
            return Ok(self.autocorrelation(d)? - self.lagged_product(lo, d)?);
        }
        let q = self.integrator();
        let f = |v: f64| self.value_at(v) * self.value_at(v + d);
        let mut acc = 0.0;
        let mut a = lo;
        while a < ASYMPTOTIC_FROM {
            let b = (2.0 * a).min(ASYMPTOTIC_FROM);
            acc += q.integrate("past covariance panel", f, a, b)?.value;
            a = b;
        }
        acc += q
            .integrate_tail("past covariance tail", f, a, 2.0 - 2.0 * self.a)?
            .value;
        Ok(acc)
    }

    /// ∫_0^∞ K(u) K(u + s) du, the stationary covariance expressed through the kernel.
    pub fn autocorrelation(&self, s: f64) -> Result<f64> {
        let q = self.integrator();
        let f = |u: f64| self.value_at(u) * self.value_at(u + s);
        let alpha = if s == 0.0 { 2.0 * self.a } else { self.a };
        let mut acc = q.integrate_graded("autocorrelation head", f, 0.0, 1.0, alpha)?.value;
        let mut lo = 1.0;
        while lo < ASYMPTOTIC_FROM {
            let hi = (2.0 * lo).min(ASYMPTOTIC_FROM);
            acc += q.integrate("autocorrelation panel", f, lo, hi)?.value;
            lo = hi;
        }
        acc += q
            .integrate_tail("autocorrelation tail", f, lo, 2.0 - 2.0 * self.a)?
            .value;
        Ok(acc)
    }
}

impl MovingAverageKernel for KernelEval {
    fn amplitude(&self) -> f64 {
        self.sigma_ou
    }
    fn value(&self, t: f64) -> f64 {
        self.value_at(t)
    }
    fn integral(&self, a: f64, b: f64) -> f64 {
        self.cell_integral(a, b)
    }
    fn product_integral(&self, s1: f64, s2: f64, w: f64) -> Result<f64> {
        let q = self.integrator();
        let f = |u: f64| self.value_at(u + s1) * self.value_at(u + s2);
        let alpha = match (s1 == 0.0, s2 == 0.0) {
            (true, true) => 2.0 * self.a,
            (true, false) | (false, true) => self.a,
            (false, false) => 0.0,
        };
        Ok(q.integrate_graded("kernel product integral", f, 0.0, w, alpha)?.value)
    }
    fn square_tail(&self, t: f64) -> Result<f64> {
        self.l2_tail(t)
    }
}

/// `R_b(t) = t^b - ∫_0^t (t-s)^b e^{-s} ds` for b > -1, t > 0.
fn complement(b: f64, t: f64, split: f64, tol: f64) -> f64 {
    if t <= split {
        complement_series(b, t)
    } else {
        complement_large(b, t, tol)
    }
}

/// Σ_n x^{b+1+n} / (n! (b+1+n)) = ∫_0^x u^b e^u du.
fn lower_series(b: f64, x: f64) -> f64 {
    let mut term = 1.0; // x^n / n!
    let mut sum = 0.0;
    let mut n = 0usize;
    loop {
        let contrib = term / (b + 1.0 + n as f64);
        sum += contrib;
        n += 1;
        term *= x / n as f64;
        if n as f64 > x && contrib.abs() < 1e-17 * sum.abs() {
            break;
        }
        if n > 2000 {
            break;
        }
    }
    sum * x.powf(b + 1.0)
}

fn complement_series(b: f64, t: f64) -> f64 {
    t.powf(b) - (-t).exp() * lower_series(b, t)
}

fn complement_large(b: f64, t: f64, tol: f64) -> f64 {
    if t >= ASYMPTOTIC_FROM {
        return complement_asymptotic(b, t);
    }
    // R_b(t) = t^b e^{-(t-c)} - e^{-t} ∫_0^c u^b e^u du + ∫_0^{t-c} [t^b - (t-s)^b] e^{-s} ds
    let c = (0.5 * t).min(1.0);
    let tb = t.powf(b);
    let smooth = |s: f64| -tb * (b * (-s / t).ln_1p()).exp_m1() * (-s).exp();
    let q = Integrator {
        abs_tol: 1e-3 * tol,
        rel_tol: 1e-13,
        max_panels: 2000,
    };
    let body = match q.integrate("kernel complement", smooth, 0.0, t - c) {
        Ok(r) => r.value,
        Err(_) => complement_series(b, t),
    };
    tb * (-(t - c)).exp() - (-t).exp() * lower_series(b, c) + body
}

fn complement_asymptotic(b: f64, t: f64) -> f64 {
    // -t^b Σ_{k≥1} (-1)^k b(b-1)...(b-k+1) / t^k
    let mut coeff = 1.0;
    let mut sum = 0.0;
    let mut prev_abs = f64::INFINITY;
    for k in 1..200 {
        coeff *= -(b - (k - 1) as f64) / t;
        let term = coeff;
        if term.abs() > prev_abs {
            break;
        }
        sum += term;
        prev_abs = term.abs();
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    -t.powf(b) * sum
}

/// K(t) with argument checks, as a free function.
pub fn kernel_k(t: f64, ke: &KernelEval) -> Result<f64> {
    ke.k(t)
}

/// Which representation of the normalized fOU covariance to integrate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CovRepr {
    #[default]
    TimeDomain,
    Spectral,
}

/// Evaluator for the normalized stationary covariance C_Z.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceEval {
    pub hurst: Hurst,
    pub repr: CovRepr,
    pub quad_tol: f64,
}

impl CovarianceEval {
    pub fn new(hurst: Hurst, repr: CovRepr) -> Self {
        Self {
            hurst,
            repr,
            quad_tol: 1e-10,
        }
    }

    pub fn with_tol(mut self, quad_tol: f64) -> Self {
        self.quad_tol = quad_tol;
        self
    }

    /// C_Z(|s|).
    pub fn cz(&self, s: f64) -> Result<f64> {
        if !s.is_finite() {
            return Err(Error::domain("cov_CZ", format!("lag {s} is not finite")));
        }
        let s = s.abs();
        if s == 0.0 {
            return Ok(1.0);
        }
        match self.repr {
            CovRepr::TimeDomain => self.time_domain(s),
            CovRepr::Spectral => self.spectral(s),
        }
    }

    fn time_domain(&self, s: f64) -> Result<f64> {
        let h2 = 2.0 * self.hurst.value();
        let q = Integrator::with_tol(0.1 * self.quad_tol);
        let s2h = s.powf(h2);
        // second difference (s+v)^{2H} + |s-v|^{2H} - 2 s^{2H}, written without cancellation for v < s
        let inner = |v: f64| {
            let x = v / s;
            s2h * ((h2 * x.ln_1p()).exp_m1() + (h2 * (-x).ln_1p()).exp_m1()) * (-v).exp()
        };
        let upper = s.min(60.0);
        let part1 = if s <= 60.0 {
            // cusp at v = s: integrate in w = s - v
            q.integrate_graded("C_Z time domain (inner)", |w| inner(s - w), 0.0, upper, h2)?
                .value
        } else {
            q.integrate("C_Z time domain (inner)", inner, 0.0, upper)?.value
        };
        let part2 = if s < 700.0 {
            let outer = |w: f64| ((2.0 * s + w).powf(h2) + w.powf(h2) - 2.0 * s2h) * (-w).exp();
            let near = q
                .integrate_graded("C_Z time domain (outer)", outer, 0.0, 1.0, h2)?
                .value;
            let far = q.integrate("C_Z time domain (outer tail)", outer, 1.0, 60.0)?.value;
            (-s).exp() * (near + far)
        } else {
            0.0
        };
        Ok((part1 + part2) / (2.0 * gamma(h2 + 1.0)))
    }

    fn spectral(&self, s: f64) -> Result<f64> {
        let h = self.hurst.value();
        let pref = 2.0 * (PI * h).sin() / PI;
        let tol = 0.05 * self.quad_tol / pref;
        let q = Integrator::with_tol(0.1 * tol);
        let g = |x: f64| x.powf(1.0 - 2.0 * h) / (1.0 + x * x);
        let f = |x: f64| (s * x).cos() * g(x);
        let zero = |k: usize| (k as f64 + 0.5) * PI / s;

        // first half period carries the x^{1-2H} endpoint behaviour
        let z0 = zero(0);
        let mut head = 0.0;
        if z0 > 1.0 {
            head += q
                .integrate_graded("C_Z spectral head", f, 0.0, 1.0, 1.0 - 2.0 * h)?
                .value;
            head += q.integrate("C_Z spectral head", f, 1.0, z0)?.value;
        } else {
            head += q
                .integrate_graded("C_Z spectral head", f, 0.0, z0, 1.0 - 2.0 * h)?
                .value;
        }
        // half periods until g is monotone decreasing (x ≥ 1)
        let mut k = 0usize;
        while zero(k) < 1.0 {
            head += q.integrate("C_Z spectral cycle", f, zero(k), zero(k + 1))?.value;
            k += 1;
        }
        // alternating tail, accelerated
        let mut sums = Vec::with_capacity(256);
        let mut acc = head;
        let mut last = f64::NAN;
        for j in 0..400 {
            acc += q.integrate("C_Z spectral tail", f, zero(k + j), zero(k + j + 1))?.value;
            sums.push(acc);
            if j >= 8 && j % 2 == 0 {
                let (est, err) = wynn_epsilon(&sums[sums.len().saturating_sub(40)..]);
                if err < tol && (est - last).abs() < tol {
                    return Ok(pref * est);
                }
                last = est;
            }
        }
        let (est, err) = wynn_epsilon(&sums[sums.len().saturating_sub(40)..]);
        if err < 100.0 * tol {
            Ok(pref * est)
        } else {
            Err(Error::Quadrature {
                what: "C_Z spectral tail acceleration",
                error: pref * err,
                tol: self.quad_tol,
                evals: sums.len(),
            })
        }
    }
}

/// C_Z(s) as a free function.
pub fn cov_cz(s: f64, ce: &CovarianceEval) -> Result<f64> {
    ce.cz(s)
}

/// Precomputed evaluator for Ψ(c) = E[F_c(Z_1) F_c(Z_2)] with F_c(z) = F(σ_ou z) - ⟨F⟩
/// and (Z_1, Z_2) standard bivariate normal with correlation c.
#[derive(Debug, Clone)]
pub struct PsiEval {
    gh: GaussHermite,
    sigma_ou: f64,
    mean_f: f64,
    f: VolFunction,
}

impl PsiEval {
    pub fn new(f: &VolFunction, hurst: Hurst, gh_order: usize) -> Result<Self> {
        let gh = GaussHermite::new(gh_order)?;
        let so = sigma_ou(hurst);
        let mean_f = gh.expect(|z| f.value(so * z));
        Ok(Self {
            gh,
            sigma_ou: so,
            mean_f,
            f: f.clone(),
        })
    }

    fn centered(&self, z: f64) -> f64 {
        self.f.value(self.sigma_ou * z) - self.mean_f
    }

    pub fn eval(&self, c: f64) -> Result<f64> {
        if !(c.abs() <= 1.0) {
            return Err(Error::domain("psi_of_C", format!("correlation {c} outside [-1, 1]")));
        }
        if c > DEGENERATE_CORRELATION {
            return Ok(self.gh.expect(|z| self.centered(z).powi(2)));
        }
        if c < -DEGENERATE_CORRELATION {
            return Ok(self.gh.expect(|z| self.centered(z) * self.centered(-z)));
        }
        let r = (1.0 - c * c).sqrt();
        let mut acc = 0.0;
        for (&x, &wx) in self.gh.nodes.iter().zip(&self.gh.weights) {
            let fx = self.centered(x);
            let inner: f64 = self
                .gh
                .nodes
                .iter()
                .zip(&self.gh.weights)
                .map(|(&y, &wy)| wy * self.centered(c * x + r * y))
                .sum();
            acc += wx * fx * inner;
        }
        Ok(acc)
    }
}

/// Ψ(c) for the volatility function `f` at Hurst `hurst`.
pub fn psi_of_c(c: f64, f: &VolFunction, hurst: Hurst, gh_order: usize) -> Result<f64> {
    PsiEval::new(f, hurst, gh_order)?.eval(c)
}

/// Cov(σ_t, σ_{t+s}) = Ψ(C_Z(s/ε)) for the model `mp`.
pub fn cov_sigma(s: f64, mp: &ModelParams) -> Result<f64> {
    if s < 0.0 {
        return Err(Error::domain("cov_sigma", "lag must be non-negative"));
    }
    let ce = CovarianceEval::new(mp.hurst, CovRepr::TimeDomain);
    let c = ce.cz(s / mp.eps)?;
    psi_of_c(c.clamp(-1.0, 1.0), &mp.vol_fn, mp.hurst, 40)
}

/// Normalized covariance of the Riemann–Liouville fOU, ∫_0^t K(u)K(u+s)du / ∫_0^∞ K².
pub fn cov_rl(t: f64, s: f64, ke: &KernelEval) -> Result<f64> {
    if t < 0.0 || s < 0.0 {
        return Err(Error::domain("cov_RL", "t and s must be non-negative"));
    }
    Ok(ke.lagged_product(t, s)? / ke.l2_norm_sq()?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(v: f64) -> Hurst {
        Hurst::new(v).unwrap()
    }

    #[test]
    fn hurst_domain() {
        assert!(Hurst::new(0.0).is_err());
        assert!(Hurst::new(0.5).is_err());
        assert!(Hurst::new(0.7).is_err());
        assert!(Hurst::new(f64::NAN).is_err());
        assert!(Hurst::new(0.3).is_ok());
    }

    #[test]
    fn sigma_ou_values() {
        // 1/(2 sin(π/4)) = 1/√2
        assert!((sigma_ou(h(0.25)).powi(2) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        // 1/(2 sin(π/10)) is the golden ratio
        let phi = 0.5 * (1.0 + 5f64.sqrt());
        assert!((sigma_ou(h(0.1)).powi(2) - phi).abs() < 1e-12);
        assert!((sigma_ou(h(0.5 - 1e-9)).powi(2) - 0.5).abs() < 1e-9);
        // σ_ou² = Γ(2H+1) σ_H² / 2
        for hv in [0.1, 0.3, 0.45] {
            let lhs = sigma_ou(h(hv)).powi(2);
            let rhs = gamma(2.0 * hv + 1.0) * sigma_h(h(hv)).powi(2) / 2.0;
            assert!((lhs - rhs).abs() < 1e-13);
            // σ_H² = 1/(Γ(2H+1) sin πH)
            let sh2 = 1.0 / (gamma(2.0 * hv + 1.0) * (PI * hv).sin());
            assert!((sigma_h(h(hv)).powi(2) - sh2).abs() < 1e-12);
        }
    }

    #[test]
    fn kernel_rejects_origin() {
        let ke = KernelEval::new(h(0.3));
        assert!(matches!(ke.k(0.0), Err(Error::SingularAtOrigin)));
        assert!(ke.k(-1.0).is_err());
    }

    #[test]
    fn kernel_branches_agree() {
        for hv in [0.05, 0.1, 0.25, 0.4, 0.49] {
            let ke = KernelEval::new(h(hv));
            for t in [0.5, 1.0, 1.5, 3.0, 10.0, 25.0, 39.0] {
                let a = ke.value_series(t);
                let b = ke.value_large(t);
                assert!((a - b).abs() < 10.0 * ke.quad_tol(), "H={hv} t={t}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn asymptotic_branch_matches_series() {
        // the series stays accurate (all positive terms) well past the asymptotic switch
        for hv in [0.1, 0.3, 0.45] {
            for b_shift in [0.0, 1.0] {
                let b = hv - 0.5 + b_shift;
                for t in [40.0, 45.0, 60.0] {
                    let s = complement_series(b, t);
                    let a = complement_asymptotic(b, t);
                    assert!(
                        (s - a).abs() < 1e-12 * t.powf(b).max(1.0),
                        "H={hv} b={b} t={t}: {s} vs {a}"
                    );
                }
            }
        }
    }

    #[test]
    fn kernel_antiderivative_matches_quadrature() {
        let ke = KernelEval::new(h(0.3));
        let q = Integrator::with_tol(1e-12);
        for (lo, hi) in [(0.0, 0.125), (0.125, 0.25), (0.5, 3.0), (2.0, 50.0)] {
            let direct = q
                .integrate_graded("test", |u| ke.value_at(u), lo, hi, if lo == 0.0 { ke.a } else { 0.0 })
                .unwrap()
                .value;
            let anti = ke.cell_integral(lo, hi);
            assert!((direct - anti).abs() < 1e-9, "[{lo},{hi}]: {direct} vs {anti}");
        }
        // the kernel integrates to zero over (0, ∞): ∫_0^t K ~ t^{H-1/2} / (σ_ou Γ(H+1/2))
        for t in [1e3f64, 1e6] {
            let lead = t.powf(-0.2) / (ke.sigma_ou() * gamma(0.8));
            assert!((ke.antiderivative(t) / lead - 1.0).abs() < 2.0 / t, "t={t}");
        }
    }

    #[test]
    fn kernel_small_and_large_time_asymptotics() {
        for hv in [0.1, 0.25, 0.4] {
            let ke = KernelEval::new(h(hv));
            let so = ke.sigma_ou();
            let t = 1e-6;
            let small = ke.k(t).unwrap() * so * gamma(hv + 0.5) * t.powf(0.5 - hv);
            assert!((small - 1.0).abs() < 1e-4, "H={hv}: {small}");
            let t = 1e4;
            let large = ke.k(t).unwrap() * so * gamma(hv - 0.5) * t.powf(1.5 - hv);
            assert!((large - 1.0).abs() < 1e-3, "H={hv}: {large}");
        }
    }

    #[test]
    fn kernel_l1_norm_dominates_signed_integral() {
        let ke = KernelEval::new(h(0.3));
        let t_star = ke.sign_change();
        assert!(ke.value_at(0.9 * t_star) > 0.0 && ke.value_at(1.1 * t_star) < 0.0);
        assert!(ke.l1_norm() > 0.0);
    }

    #[test]
    fn cz_zero_lag_and_symmetry() {
        for repr in [CovRepr::TimeDomain, CovRepr::Spectral] {
            let ce = CovarianceEval::new(h(0.3), repr);
            assert_eq!(ce.cz(0.0).unwrap(), 1.0);
            assert_eq!(ce.cz(0.7).unwrap(), ce.cz(-0.7).unwrap());
            assert!(ce.cz(f64::INFINITY).is_err());
        }
    }

    #[test]
    fn psi_special_values() {
        let f = VolFunction::bounded_sigmoid(0.1, 0.3, 1.0).unwrap();
        let p = PsiEval::new(&f, h(0.3), 40).unwrap();
        assert!(p.eval(0.0).unwrap().abs() < 1e-15);
        assert!(p.eval(1.2).is_err());
        let m = crate::gaussfunc::moments(&f, h(0.3), 40).unwrap();
        assert!((p.eval(1.0).unwrap() - (m.mean_f2 - m.mean_f * m.mean_f)).abs() < 1e-15);
        // continuity into the degenerate branch
        assert!((p.eval(1.0 - 1e-9).unwrap() - p.eval(1.0).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn past_covariance_consistency() {
        for hv in [0.1, 0.3] {
            let ke = KernelEval::new(h(hv));
            assert!((ke.past_covariance(0.0, 0.0).unwrap() - 1.0).abs() < 1e-8);
            for t in [0.5, 3.0, 50.0] {
                let pc = ke.past_covariance(t, t).unwrap();
                let tail = ke.l2_tail(t).unwrap();
                assert!((pc - tail).abs() < 1e-8 * tail.max(1e-3), "H={hv} t={t}: {pc} {tail}");
            }
            assert_eq!(
                ke.past_covariance(0.3, 2.0).unwrap(),
                ke.past_covariance(2.0, 0.3).unwrap()
            );
            // the two evaluation routes meet at 1
            let below = ke.past_covariance(1.0 - 1e-9, 2.5).unwrap();
            let above = ke.past_covariance(1.0, 2.5).unwrap();
            assert!((below - above).abs() < 1e-7, "{below} {above}");
        }
    }
}
