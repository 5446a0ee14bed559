//! Quadrature primitives shared by the kernel, Gaussian-functional and pricing code.
//!
//! * [`Integrator`]: globally adaptive 21-point Gauss–Kronrod on finite intervals.
//! * Power-law substitutions for integrable endpoint singularities
//!   ([`Integrator::integrate_graded`]) and algebraically decaying tails
//!   ([`Integrator::integrate_tail`]).
//! * [`GaussHermite`]: rules for expectations against the standard normal law.
//! * [`wynn_epsilon`]: sequence acceleration for alternating oscillatory tails.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// Γ(x) for any real x that is not a non-positive integer (reflection is applied below 1/2).
pub fn gamma(x: f64) -> f64 {
    statrs::function::gamma::gamma(x)
}

// Kronrod abscissae and weights on [-1, 1], symmetric half (last entry is the centre).
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689,
    0.973_906_528_517_171_720_077_964_012_084,
    0.930_157_491_355_708_226_001_207_180_060,
    0.865_063_366_688_984_510_732_096_688_423,
    0.780_817_726_586_416_897_063_717_578_345,
    0.679_409_568_299_024_406_234_327_365_115,
    0.562_757_134_668_604_683_339_000_099_273,
    0.433_395_394_129_247_190_799_265_943_166,
    0.294_392_862_701_460_198_131_126_603_104,
    0.148_874_338_981_631_210_884_826_001_130,
    0.0,
];
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062,
    0.032_558_162_307_964_727_478_818_972_459,
    0.054_755_896_574_351_996_031_381_300_245,
    0.075_039_674_810_919_952_767_043_140_916,
    0.093_125_454_583_697_605_535_065_465_083,
    0.109_387_158_802_297_641_899_210_590_326,
    0.123_491_976_262_065_851_077_208_980_133,
    0.134_709_217_311_473_325_928_054_001_772,
    0.142_775_938_577_060_080_797_094_273_139,
    0.147_739_104_901_338_491_374_841_515_972,
    0.149_445_554_002_916_905_664_936_468_390,
];
// 10-point Gauss weights for the odd-indexed Kronrod nodes.
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893,
    0.149_451_349_150_580_593_145_776_339_658,
    0.219_086_362_515_982_043_995_534_934_228,
    0.269_266_719_309_996_355_091_226_921_569,
    0.295_524_224_714_752_870_173_892_994_651,
];

/// One Gauss–Kronrod panel: (kronrod estimate, |kronrod - gauss|, ∫|f| estimate).
fn gk21<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64, f64) {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(centre);
    let mut resk = fc * WGK[10];
    let mut resabs = fc.abs() * WGK[10];
    let mut resg = 0.0;
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(centre - dx);
        let f2 = f(centre + dx);
        resk += WGK[j] * (f1 + f2);
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            resg += WG[j / 2] * (f1 + f2);
        }
    }
    let resk = resk * half;
    let resg = resg * half;
    (resk, (resk - resg).abs(), resabs * half.abs())
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub evals: usize,
}

/// Globally adaptive Gauss–Kronrod integrator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integrator {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_panels: usize,
}

impl Default for Integrator {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-12,
            max_panels: 4000,
        }
    }
}

impl Integrator {
    pub fn with_tol(abs_tol: f64) -> Self {
        Self {
            abs_tol,
            ..Self::default()
        }
    }

    /// ∫_a^b f over a finite interval.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, what: &'static str, mut f: F, a: f64, b: f64) -> Result<QuadResult> {
        if a == b {
            return Ok(QuadResult {
                value: 0.0,
                error: 0.0,
                evals: 0,
            });
        }
        let (v, e, resabs) = gk21(&mut f, a, b);
        let mut evals = 21;
        let mut total = v;
        let mut total_err = e;
        let mut total_abs = resabs;
        let mut heap = BinaryHeap::new();
        heap.push(Panel {
            a,
            b,
            value: v,
            error: e,
        });
        let mut frozen_err = 0.0;

        while total_err > self.tolerance(total) && heap.len() < self.max_panels {
            let Some(p) = heap.pop() else { break };
            let mid = 0.5 * (p.a + p.b);
            if (p.b - p.a).abs() <= 64.0 * f64::EPSILON * mid.abs().max(f64::MIN_POSITIVE) || mid == p.a || mid == p.b {
                // cannot be refined further in floating point
                frozen_err += p.error;
                total_err -= p.error;
                if heap.is_empty() {
                    break;
                }
                continue;
            }
            let (v1, e1, r1) = gk21(&mut f, p.a, mid);
            let (v2, e2, r2) = gk21(&mut f, mid, p.b);
            evals += 42;
            total += v1 + v2 - p.value;
            total_err += e1 + e2 - p.error;
            total_abs += r1 + r2;
            heap.push(Panel {
                a: p.a,
                b: mid,
                value: v1,
                error: e1,
            });
            heap.push(Panel {
                a: mid,
                b: p.b,
                value: v2,
                error: e2,
            });
        }
        // re-sum to shed accumulated update round-off
        let mut value = 0.0;
        let mut error = frozen_err;
        for p in heap.iter() {
            value += p.value;
            error += p.error;
        }
        if !value.is_finite() {
            return Err(Error::Quadrature {
                what,
                error: f64::INFINITY,
                tol: self.abs_tol,
                evals,
            });
        }
        let roundoff = 1e3 * f64::EPSILON * total_abs;
        if error > self.tolerance(value) && error > roundoff {
            return Err(Error::Quadrature {
                what,
                error,
                tol: self.tolerance(value),
                evals,
            });
        }
        Ok(QuadResult { value, error, evals })
    }

    fn tolerance(&self, value: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * value.abs())
    }

    /// ∫_a^b f where f behaves like (t - a)^alpha near `a`, with alpha > -1.
    ///
    /// Substitutes t = a + (b - a) u^m with m = 1/(1 + alpha) when alpha < 0, which turns the
    /// leading singular term into a constant; m = `grading` otherwise.
    pub fn integrate_graded<F: FnMut(f64) -> f64>(
        &self,
        what: &'static str,
        mut f: F,
        a: f64,
        b: f64,
        alpha: f64,
    ) -> Result<QuadResult> {
        debug_assert!(alpha > -1.0);
        let m = if alpha < 0.0 { 1.0 / (1.0 + alpha) } else { 2.0 };
        let len = b - a;
        self.integrate(
            what,
            |u: f64| {
                if u <= 0.0 {
                    return 0.0;
                }
                let um1 = u.powf(m - 1.0);
                let t = a + len * um1 * u;
                f(t) * len * m * um1
            },
            0.0,
            1.0,
        )
    }

    /// ∫_a^∞ f where f decays like t^{-decay} with decay > 1 and a > 0.
    pub fn integrate_tail<F: FnMut(f64) -> f64>(
        &self,
        what: &'static str,
        mut f: F,
        a: f64,
        decay: f64,
    ) -> Result<QuadResult> {
        debug_assert!(decay > 1.0 && a > 0.0);
        let p = 1.0 / (decay - 1.0);
        self.integrate(
            what,
            |v: f64| {
                if v <= 0.0 {
                    return 0.0;
                }
                let vp = v.powf(-p);
                let t = a * vp;
                if !t.is_finite() {
                    return 0.0;
                }
                let w = a * p * vp / v;
                let y = f(t) * w;
                if y.is_finite() {
                    y
                } else {
                    0.0
                }
            },
            0.0,
            1.0,
        )
    }
}

/// Gauss–Hermite rule for expectations under the standard normal law:
/// E[f(Z)] ≈ Σ w_i f(x_i), with Σ w_i = 1.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    pub fn new(order: usize) -> Result<Self> {
        if order < 2 {
            return Err(Error::validation("gh_order", "must be at least 2"));
        }
        let (x, w) = physicists_hermite(order);
        let sqrt2 = std::f64::consts::SQRT_2;
        let inv_sqrt_pi = 1.0 / std::f64::consts::PI.sqrt();
        Ok(Self {
            nodes: x.iter().map(|&z| z * sqrt2).collect(),
            weights: w.iter().map(|&v| v * inv_sqrt_pi).collect(),
        })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// E[f(Z)], Z ~ N(0,1).
    pub fn expect<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

// Newton iteration on orthonormal Hermite polynomials (weight e^{-x^2}).
fn physicists_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    const PIM4: f64 = 0.751_125_544_464_942_5; // π^{-1/4}
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    let mut z = 0.0f64;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.855_75 * (2.0 * nf + 1.0).powf(-0.166_67),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = PIM4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Wynn's epsilon algorithm applied to a sequence of partial sums.
///
/// Returns the extrapolated limit and a crude error estimate (difference between the last
/// two extrapolants).
pub fn wynn_epsilon(partial_sums: &[f64]) -> (f64, f64) {
    let n = partial_sums.len();
    if n < 3 {
        let last = partial_sums.last().copied().unwrap_or(0.0);
        return (last, f64::INFINITY);
    }
    // e[k] holds column k of the epsilon table for the current diagonal.
    let mut prev: Vec<f64> = partial_sums.to_vec();
    let mut prev2: Vec<f64> = vec![0.0; n + 1];
    let mut best = *partial_sums.last().unwrap();
    let mut best_err = f64::INFINITY;
    let mut last_even: Option<f64> = None;
    let mut col = 1;
    while prev.len() > 1 {
        let mut next = Vec::with_capacity(prev.len() - 1);
        for i in 0..prev.len() - 1 {
            let diff = prev[i + 1] - prev[i];
            let base = if col == 1 { 0.0 } else { prev2[i + 1] };
            if diff == 0.0 {
                // converged column; propagate
                next.push(f64::INFINITY);
            } else {
                next.push(base + 1.0 / diff);
            }
        }
        if col % 2 == 0 {
            if let Some(&v) = next.last() {
                if v.is_finite() {
                    if let Some(le) = last_even {
                        let err = (v - le).abs();
                        if err < best_err {
                            best_err = err;
                            best = v;
                        }
                    }
                    last_even = Some(v);
                }
            }
        }
        prev2 = prev;
        prev = next;
        col += 1;
        if prev.iter().any(|v| !v.is_finite()) {
            break;
        }
    }
    (best, best_err)
}
