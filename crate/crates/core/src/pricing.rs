//! Black–Scholes building blocks, the first-order corrected price, implied volatilities and
//! the term-structure formulas.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussfunc::GroupParams;
use crate::model::ModelParams;
use crate::quad::Integrator;

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Standard normal distribution function.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / SQRT_2)
}

/// A payoff with two continuous derivatives, supplied by the caller.
pub trait SmoothPayoff: Send + Sync {
    fn value(&self, x: f64) -> f64;
    fn d1(&self, x: f64) -> f64;
    fn d2(&self, x: f64) -> f64;
    /// Region outside which h'' vanishes (or is negligible), used to focus quadrature.
    fn support(&self) -> (f64, f64) {
        (0.0, f64::INFINITY)
    }
}

/// Bounded C^∞ ramp `w [softplus((x - a)/w) - softplus((x - b)/w)]`, a smoothed version of
/// `min(max(x - a, 0), b - a)` (a call spread).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmoothRamp {
    pub lower: f64,
    pub upper: f64,
    pub width: f64,
}

fn softplus(u: f64) -> f64 {
    if u > 0.0 {
        u + (-u).exp().ln_1p()
    } else {
        u.exp().ln_1p()
    }
}

fn logistic(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

impl SmoothPayoff for SmoothRamp {
    fn value(&self, x: f64) -> f64 {
        self.width * (softplus((x - self.lower) / self.width) - softplus((x - self.upper) / self.width))
    }
    fn d1(&self, x: f64) -> f64 {
        logistic((x - self.lower) / self.width) - logistic((x - self.upper) / self.width)
    }
    fn d2(&self, x: f64) -> f64 {
        let g = |u: f64| {
            let p = logistic(u);
            p * (1.0 - p)
        };
        (g((x - self.lower) / self.width) - g((x - self.upper) / self.width)) / self.width
    }
    fn support(&self) -> (f64, f64) {
        (
            (self.lower - 40.0 * self.width).max(0.0),
            self.upper + 40.0 * self.width,
        )
    }
}

/// European payoff h(X_T).
#[derive(Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Payoff {
    Call {
        strike: f64,
    },
    SmoothRamp(SmoothRamp),
    /// Call payoff pre-smoothed by a lognormal kernel of total standard deviation `smoothing`:
    /// h(x) is the Black–Scholes call price with σ√τ = `smoothing`.
    SmoothCall {
        strike: f64,
        smoothing: f64,
    },
    /// Caller-supplied smooth payoff (not serializable).
    #[serde(skip)]
    SmoothCustom(Arc<dyn SmoothPayoff>),
}

impl fmt::Debug for Payoff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Payoff::Call { strike } => write!(f, "Call {{ strike: {strike} }}"),
            Payoff::SmoothRamp(r) => write!(f, "{r:?}"),
            Payoff::SmoothCall { strike, smoothing } => {
                write!(f, "SmoothCall {{ strike: {strike}, smoothing: {smoothing} }}")
            }
            Payoff::SmoothCustom(_) => write!(f, "SmoothCustom"),
        }
    }
}

impl PartialEq for Payoff {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Payoff::Call { strike: a }, Payoff::Call { strike: b }) => a == b,
            (Payoff::SmoothRamp(a), Payoff::SmoothRamp(b)) => a == b,
            (
                Payoff::SmoothCall {
                    strike: a,
                    smoothing: c,
                },
                Payoff::SmoothCall {
                    strike: b,
                    smoothing: d,
                },
            ) => a == b && c == d,
            (Payoff::SmoothCustom(a), Payoff::SmoothCustom(b)) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }
}

impl Payoff {
    pub fn call(strike: f64) -> Result<Self> {
        let p = Payoff::Call { strike };
        p.validate()?;
        Ok(p)
    }

    pub fn smooth_ramp(lower: f64, upper: f64, width: f64) -> Result<Self> {
        let p = Payoff::SmoothRamp(SmoothRamp { lower, upper, width });
        p.validate()?;
        Ok(p)
    }

    pub fn smooth_call(strike: f64, smoothing: f64) -> Result<Self> {
        let p = Payoff::SmoothCall { strike, smoothing };
        p.validate()?;
        Ok(p)
    }

    /// Wraps a user payoff after cross-checking h' and h'' against central differences.
    pub fn smooth_custom(h: Arc<dyn SmoothPayoff>, probe: &[f64]) -> Result<Self> {
        for &x in probe {
            let step = 1e-4 * x.abs().max(1.0);
            let fd1 = (h.value(x + step) - h.value(x - step)) / (2.0 * step);
            let fd2 = (h.d1(x + step) - h.d1(x - step)) / (2.0 * step);
            let scale1 = 1.0 + h.d1(x).abs();
            let scale2 = 1.0 + h.d2(x).abs();
            if (fd1 - h.d1(x)).abs() > 1e-4 * scale1 || (fd2 - h.d2(x)).abs() > 1e-4 * scale2 {
                return Err(Error::validation(
                    "payoff",
                    format!("supplied derivatives disagree with finite differences at x = {x}"),
                ));
            }
        }
        Ok(Payoff::SmoothCustom(h))
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Payoff::Call { strike } => {
                if !(*strike > 0.0 && strike.is_finite()) {
                    return Err(Error::validation("payoff.strike", "must be positive"));
                }
            }
            Payoff::SmoothRamp(r) => {
                if !(r.lower > 0.0 && r.upper > r.lower && r.width > 0.0 && r.upper.is_finite()) {
                    return Err(Error::validation(
                        "payoff",
                        "smooth ramp needs 0 < lower < upper and width > 0",
                    ));
                }
            }
            Payoff::SmoothCall { strike, smoothing } => {
                if !(*strike > 0.0 && strike.is_finite() && *smoothing > 0.0 && smoothing.is_finite()) {
                    return Err(Error::validation(
                        "payoff",
                        "smooth call needs a positive strike and positive smoothing",
                    ));
                }
            }
            Payoff::SmoothCustom(_) => {}
        }
        Ok(())
    }

    /// h(x).
    pub fn value(&self, x: f64) -> f64 {
        match self {
            Payoff::Call { strike } => (x - strike).max(0.0),
            Payoff::SmoothRamp(r) => r.value(x),
            Payoff::SmoothCall { strike, smoothing } => call_total_sd(x, *strike, *smoothing),
            Payoff::SmoothCustom(h) => h.value(x),
        }
    }

    pub fn strike(&self) -> Option<f64> {
        match self {
            Payoff::Call { strike } => Some(*strike),
            _ => None,
        }
    }

    fn smooth(&self) -> Option<&dyn SmoothPayoff> {
        match self {
            Payoff::SmoothRamp(r) => Some(r),
            Payoff::SmoothCustom(h) => Some(h.as_ref()),
            Payoff::Call { .. } | Payoff::SmoothCall { .. } => None,
        }
    }

    /// Price under a lognormal terminal law with total standard deviation `total_sd` of log X.
    pub fn lognormal_price(&self, x: f64, total_sd: f64) -> Result<f64> {
        if total_sd == 0.0 {
            return Ok(self.value(x));
        }
        bs_price(x, self, total_sd, 1.0)
    }
}

fn call_total_sd(x: f64, strike: f64, s: f64) -> f64 {
    if s <= 0.0 {
        return (x - strike).max(0.0);
    }
    let d1 = ((x / strike).ln() + 0.5 * s * s) / s;
    x * norm_cdf(d1) - strike * norm_cdf(d1 - s)
}

// (D2, D12) of a call at total standard deviation s.
fn call_operators(x: f64, strike: f64, s: f64) -> OperatorGreeks {
    let d1 = ((x / strike).ln() + 0.5 * s * s) / s;
    let d2 = x * norm_pdf(d1) / s;
    OperatorGreeks {
        d2,
        d12: d2 * (1.0 - d1 / s),
    }
}

fn check_inputs(x: f64, sigma: f64, tau: f64) -> Result<()> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::domain("bs_price", format!("spot {x} must be positive")));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::domain(
            "bs_price",
            format!("volatility {sigma} must be positive"),
        ));
    }
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::domain(
            "bs_price",
            format!("time to maturity {tau} must be non-negative"),
        ));
    }
    Ok(())
}

// E[g(S)] with S = x exp(-s²/2 + s Z), s = σ√τ, integrated in z against the normal density.
fn lognormal_expect(x: f64, s: f64, support: (f64, f64), g: impl Fn(f64, f64) -> f64) -> Result<f64> {
    let zmin = -12.0f64;
    let zmax = 12.0f64;
    let to_z = |v: f64| ((v / x).ln() + 0.5 * s * s) / s;
    let lo = if support.0 > 0.0 {
        to_z(support.0).max(zmin)
    } else {
        zmin
    };
    let hi = if support.1.is_finite() {
        to_z(support.1).min(zmax)
    } else {
        zmax
    };
    if hi <= lo {
        return Ok(0.0);
    }
    let q = Integrator {
        abs_tol: 1e-13 * x,
        rel_tol: 1e-12,
        max_panels: 4000,
    };
    let f = |z: f64| {
        let st = x * (s * z - 0.5 * s * s).exp();
        g(st, z) * norm_pdf(z)
    };
    // panels of unit width in z keep the kinks of narrow payoffs resolvable
    let mut acc = 0.0;
    let mut a = lo;
    while a < hi {
        let b = (a + 1.0).min(hi);
        acc += q.integrate("lognormal expectation", f, a, b)?.value;
        a = b;
    }
    Ok(acc)
}

/// Zero-rate Black–Scholes price of `payoff`.
pub fn bs_price(x: f64, payoff: &Payoff, sigma: f64, tau: f64) -> Result<f64> {
    check_inputs(x, sigma, tau)?;
    if tau == 0.0 {
        return Ok(payoff.value(x));
    }
    let s = sigma * tau.sqrt();
    match payoff {
        Payoff::Call { strike } => Ok(call_total_sd(x, *strike, s)),
        Payoff::SmoothCall { strike, smoothing } => Ok(call_total_sd(x, *strike, s.hypot(*smoothing))),
        _ => {
            let h = payoff.smooth().expect("smooth payoff");
            lognormal_expect(x, s, (0.0, f64::INFINITY), |st, _| h.value(st))
        }
    }
}

/// The operators entering the correction: D2 = x²∂²Q and D12 = x∂(x²∂²Q) at (x, σ, τ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatorGreeks {
    pub d2: f64,
    pub d12: f64,
}

pub fn bs_operator_greeks(x: f64, payoff: &Payoff, sigma: f64, tau: f64) -> Result<OperatorGreeks> {
    check_inputs(x, sigma, tau)?;
    if tau == 0.0 {
        return Err(Error::domain(
            "bs_operator_greeks",
            "operators are undefined at expiry (tau = 0)",
        ));
    }
    let s = sigma * tau.sqrt();
    match payoff {
        Payoff::Call { strike } => Ok(call_operators(x, *strike, s)),
        Payoff::SmoothCall { strike, smoothing } => Ok(call_operators(x, *strike, s.hypot(*smoothing))),
        _ => {
            let h = payoff.smooth().expect("smooth payoff");
            let support = h.support();
            let d2 = lognormal_expect(x, s, support, |st, _| st * st * h.d2(st))?;
            // x ∂_x E[g(S)] = E[g(S) Z] / s since log S is Gaussian with mean log x - s²/2
            let d12 = lognormal_expect(x, s, support, |st, z| st * st * h.d2(st) * z)? / s;
            Ok(OperatorGreeks { d2, d12 })
        }
    }
}

/// Leading-order price, correction and corrected price at time t.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceResult {
    pub q0: f64,
    /// Correction before the √ε ρ factor.
    pub q1: f64,
    pub q_eps: f64,
    /// Implied volatility of q_eps (calls only).
    pub implied_vol_inverted: Option<f64>,
    /// Two-term implied-volatility expansion (calls only).
    pub implied_vol_asymptotic: Option<f64>,
}

/// Q^ε_t(x) = Q0 + √ε ρ Q1 with Q1 = (T - t) D̄ x∂(x²∂²) Q0, at spot `x`.
pub fn corrected_price_at(mp: &ModelParams, gp: &GroupParams, payoff: &Payoff, t: f64, x: f64) -> Result<PriceResult> {
    payoff.validate()?;
    let tau = mp.maturity - t;
    if !(t >= 0.0 && tau >= -1e-15) {
        return Err(Error::domain("corrected_price", format!("t = {t} must lie in [0, T]")));
    }
    let tau = tau.max(0.0);
    if tau == 0.0 {
        let h = payoff.value(x);
        return Ok(PriceResult {
            q0: h,
            q1: 0.0,
            q_eps: h,
            implied_vol_inverted: None,
            implied_vol_asymptotic: None,
        });
    }
    let q0 = bs_price(x, payoff, gp.sigma_bar, tau)?;
    let greeks = bs_operator_greeks(x, payoff, gp.sigma_bar, tau)?;
    let q1 = tau * gp.d_bar * greeks.d12;
    let q_eps = q0 + mp.eps.sqrt() * mp.rho * q1;
    let (inv, asy) = match payoff.strike() {
        Some(k) => (
            implied_vol_invert(q_eps, x, k, tau).ok(),
            Some(implied_vol_asymptotic_at(mp, gp, x, k, t)?),
        ),
        None => (None, None),
    };
    Ok(PriceResult {
        q0,
        q1,
        q_eps,
        implied_vol_inverted: inv,
        implied_vol_asymptotic: asy,
    })
}

/// Corrected price at the model's initial spot.
pub fn corrected_price(mp: &ModelParams, gp: &GroupParams, payoff: &Payoff, t: f64) -> Result<PriceResult> {
    corrected_price_at(mp, gp, payoff, t, mp.x0)
}

/// Black–Scholes implied volatility of a call price.
pub fn implied_vol_invert(price: f64, x: f64, strike: f64, tau: f64) -> Result<f64> {
    if !(x > 0.0 && strike > 0.0 && tau > 0.0) {
        return Err(Error::domain(
            "implied_vol_invert",
            "spot, strike and tau must be positive",
        ));
    }
    let lower = (x - strike).max(0.0);
    if !(price > lower) {
        return Err(Error::Arbitrage {
            price,
            bound: "lower (intrinsic value)",
            value: lower,
        });
    }
    if !(price < x) {
        return Err(Error::Arbitrage {
            price,
            bound: "upper (spot)",
            value: x,
        });
    }
    let call = Payoff::Call { strike };
    let f = |v: f64| bs_price(x, &call, v, tau).map(|p| p - price);
    let (mut lo, mut hi) = (1e-8f64, 1.0f64);
    while f(hi)? < 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e4 {
            return Err(Error::domain(
                "implied_vol_invert",
                "no volatility below 1e4 reproduces the price",
            ));
        }
    }
    if f(lo)? > 0.0 {
        return Ok(lo);
    }
    let mut v = 0.5 * (lo + hi);
    for _ in 0..200 {
        let r = f(v)?;
        if r.abs() < 1e-12 * x {
            return Ok(v);
        }
        if r > 0.0 {
            hi = v;
        } else {
            lo = v;
        }
        let s = v * tau.sqrt();
        let d1 = ((x / strike).ln() + 0.5 * s * s) / s;
        let vega = x * norm_pdf(d1) * tau.sqrt();
        let newton = v - r / vega;
        v = if vega > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo < 1e-15 * hi {
            return Ok(v);
        }
    }
    Ok(v)
}

/// σ̄ + √ε ρ D̄ [1/(2σ̄) + log(K/X)/(σ̄³ (T - t))].
pub fn implied_vol_asymptotic_at(mp: &ModelParams, gp: &GroupParams, x: f64, strike: f64, t: f64) -> Result<f64> {
    let tau = mp.maturity - t;
    if !(tau > 0.0) {
        return Err(Error::domain("implied_vol_asymptotic", "requires t < T"));
    }
    let sb = gp.sigma_bar;
    Ok(sb + mp.eps.sqrt() * mp.rho * gp.d_bar * (0.5 / sb + (strike / x).ln() / (sb.powi(3) * tau)))
}

pub fn implied_vol_asymptotic(mp: &ModelParams, gp: &GroupParams, strike: f64, t: f64) -> Result<f64> {
    implied_vol_asymptotic_at(mp, gp, mp.x0, strike, t)
}

/// Mean-reversion regime for the term-structure exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    FastMeanReverting,
    SlowMeanReverting,
    SmallAmplitude,
}

/// ζ(H): H + 1/2 for slow mean reversion, max(H - 1/2, 0) for fast mean reversion.
///
/// Accepts any h in (0, 1). The small-amplitude regime has no single exponent; it maps to the
/// slow value, which is the short-maturity behaviour of [`term_structure_factor`].
pub fn zeta_exponent(h: f64, regime: Regime) -> Result<f64> {
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::domain("zeta_exponent", format!("h = {h} must lie in (0, 1)")));
    }
    Ok(match regime {
        Regime::SlowMeanReverting | Regime::SmallAmplitude => h + 0.5,
        Regime::FastMeanReverting => (h - 0.5).max(0.0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermStructureParams {
    pub regime: Regime,
    pub tau_mr: f64,
    /// Skew amplitude Δσ (a free reporting parameter).
    pub delta_sigma: f64,
    pub tau_bar: f64,
}

impl TermStructureParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_mr > 0.0 && self.tau_bar > 0.0) {
            return Err(Error::validation(
                "term_structure",
                "tau_mr and tau_bar must be positive",
            ));
        }
        Ok(())
    }
}

/// The bracket 1 - ∫_0^r e^{-v} (1 - v/r)^{H+3/2} dv, written as
/// e^{-r} + ∫_0^r e^{-v} [1 - (1 - v/r)^{H+3/2}] dv to avoid cancellation for small r.
pub fn term_structure_bracket(r: f64, h: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::domain("term_structure_factor", "tau/tau_mr must be positive"));
    }
    let p = h + 1.5;
    let q = Integrator::with_tol(1e-14);
    let upper = r.min(60.0 + r.ln().max(0.0));
    let body = q
        .integrate(
            "term structure bracket",
            |v| -(-v).exp() * (p * (-v / r).ln_1p()).exp_m1(),
            0.0,
            upper,
        )?
        .value;
    // the integrand is ≤ e^{-v} beyond the cut
    let rest = if upper < r { (-upper).exp() - (-r).exp() } else { 0.0 };
    Ok((-r).exp() + body + rest)
}

/// 𝒜(τ/τ̄, τ/τ_mr) = (τ/τ̄)^{H+1/2} · bracket(τ/τ_mr).
pub fn term_structure_factor(tau: f64, ts: &TermStructureParams, h: f64) -> Result<f64> {
    ts.validate()?;
    if !(tau > 0.0) {
        return Err(Error::domain("term_structure_factor", "tau must be positive"));
    }
    Ok((tau / ts.tau_bar).powf(h + 0.5) * term_structure_bracket(tau / ts.tau_mr, h)?)
}

/// Reporting form σ_{t,T} + Δσ [(τ/τ̄)^ζ + (τ/τ̄)^{ζ-1} log(K/X)], with the power replaced by
/// 𝒜 in the small-amplitude regime.
pub fn implied_vol_term_structure(
    sigma_t_t: f64,
    ts: &TermStructureParams,
    h: f64,
    tau: f64,
    log_moneyness: f64,
) -> Result<f64> {
    ts.validate()?;
    let r = tau / ts.tau_bar;
    let (level, slope) = match ts.regime {
        Regime::SmallAmplitude => {
            let a = term_structure_factor(tau, ts, h)?;
            (a, a / r)
        }
        regime => {
            let z = zeta_exponent(h, regime)?;
            (r.powf(z), r.powf(z - 1.0))
        }
    };
    Ok(sigma_t_t + ts.delta_sigma * (level + slope * log_moneyness))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn call_reference_value() {
        let p = bs_price(100.0, &Payoff::call(100.0).unwrap(), 0.2, 1.0).unwrap();
        assert!((p - 7.965_567_455_405_804).abs() < 1e-9, "{p}");
    }

    #[test]
    fn expiry_returns_payoff() {
        let c = Payoff::call(90.0).unwrap();
        assert_eq!(bs_price(100.0, &c, 0.2, 0.0).unwrap(), 10.0);
        assert!(bs_operator_greeks(100.0, &c, 0.2, 0.0).is_err());
    }

    #[test]
    fn smooth_quadrature_matches_call_for_call_like_ramp() {
        // a narrow ramp with a distant cap is a call up to O(width) terms
        let ramp = Payoff::smooth_ramp(100.0, 1e4, 1e-3).unwrap();
        let call = Payoff::call(100.0).unwrap();
        let a = bs_price(100.0, &ramp, 0.2, 1.0).unwrap();
        let b = bs_price(100.0, &call, 0.2, 1.0).unwrap();
        assert!((a - b).abs() < 1e-4, "{a} {b}");
    }

    #[test]
    fn greeks_against_finite_differences() {
        for payoff in [
            Payoff::call(100.0).unwrap(),
            Payoff::smooth_ramp(95.0, 115.0, 2.0).unwrap(),
            Payoff::smooth_call(120.0, 0.05).unwrap(),
        ] {
            let x = 100.0;
            let h = 0.5;
            let price = |x: f64| bs_price(x, &payoff, 0.2, 1.0).unwrap();
            // fourth-order central differences
            let d2 = |x: f64| {
                (-price(x + 2.0 * h) + 16.0 * price(x + h) - 30.0 * price(x) + 16.0 * price(x - h) - price(x - 2.0 * h))
                    / (12.0 * h * h)
            };
            let g = bs_operator_greeks(x, &payoff, 0.2, 1.0).unwrap();
            let fd_d2 = x * x * d2(x);
            assert!((g.d2 / fd_d2 - 1.0).abs() < 1e-6, "{payoff:?}: {} vs {}", g.d2, fd_d2);
            // D12 = x ∂x D2
            let e = 1e-3;
            let up = bs_operator_greeks(x + e, &payoff, 0.2, 1.0).unwrap().d2;
            let dn = bs_operator_greeks(x - e, &payoff, 0.2, 1.0).unwrap().d2;
            let fd_d12 = x * (up - dn) / (2.0 * e);
            assert!(
                (g.d12 - fd_d12).abs() < 1e-6 * g.d2.abs(),
                "{payoff:?}: {} vs {}",
                g.d12,
                fd_d12
            );
        }
    }

    #[test]
    fn smooth_call_composes_variances() {
        // pricing a pre-smoothed call over τ equals a plain call over the combined variance
        let p = bs_price(100.0, &Payoff::smooth_call(110.0, 0.1).unwrap(), 0.2, 0.75).unwrap();
        let q = bs_price(
            100.0,
            &Payoff::call(110.0).unwrap(),
            (0.04f64 * 0.75 + 0.01).sqrt(),
            1.0,
        )
        .unwrap();
        assert!((p - q).abs() < 1e-12);
        // and agrees with quadrature of the payoff against the lognormal law
        let h = Payoff::smooth_call(110.0, 0.1).unwrap();
        let s = 0.2 * 0.75f64.sqrt();
        let quad = lognormal_expect(100.0, s, (0.0, f64::INFINITY), |st, _| h.value(st)).unwrap();
        assert!((quad - p).abs() < 1e-9, "{quad} {p}");
    }

    #[test]
    fn implied_vol_roundtrip_and_bounds() {
        for (k, v, tau) in [(100.0, 0.2, 1.0), (80.0, 0.5, 0.25), (130.0, 0.15, 2.0)] {
            let p = bs_price(100.0, &Payoff::call(k).unwrap(), v, tau).unwrap();
            let iv = implied_vol_invert(p, 100.0, k, tau).unwrap();
            assert!((iv - v).abs() < 1e-10, "{iv} vs {v}");
        }
        assert!(matches!(
            implied_vol_invert(5.0, 100.0, 90.0, 1.0),
            Err(Error::Arbitrage { bound, .. }) if bound.starts_with("lower")
        ));
        assert!(matches!(
            implied_vol_invert(100.0, 100.0, 90.0, 1.0),
            Err(Error::Arbitrage { bound, .. }) if bound.starts_with("upper")
        ));
        let tiny = implied_vol_invert(10.0 + 1e-9, 100.0, 90.0, 1.0).unwrap();
        assert!(tiny < 0.05);
    }

    #[test]
    fn zeta_values() {
        assert!((zeta_exponent(0.3, Regime::SlowMeanReverting).unwrap() - 0.8).abs() < 1e-15);
        assert_eq!(zeta_exponent(0.3, Regime::FastMeanReverting).unwrap(), 0.0);
        assert!((zeta_exponent(0.7, Regime::FastMeanReverting).unwrap() - 0.2).abs() < 1e-15);
        assert!(zeta_exponent(1.0, Regime::FastMeanReverting).is_err());
    }

    #[test]
    fn bracket_limits() {
        // small r: bracket → 1; the integral is a smooth function of r
        assert!((term_structure_bracket(1e-8, 0.3).unwrap() - 1.0).abs() < 1e-7);
        // large r: bracket ≈ (H + 3/2)/r
        let r = 1e6;
        assert!((term_structure_bracket(r, 0.3).unwrap() * r / 1.8 - 1.0).abs() < 1e-4);
    }
}
