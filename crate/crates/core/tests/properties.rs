use approx::assert_relative_eq;
use proptest::prelude::*;

use roughvol::config::RunConfig;
use roughvol::gaussfunc::{d_bar, d_bar_bound, DEFAULT_GH_ORDER, DEFAULT_QUAD_TOL};
use roughvol::kernel::{CovRepr, CovarianceEval, KernelEval};
use roughvol::pricing::{bs_operator_greeks, bs_price, implied_vol_invert, Payoff};
use roughvol::report::fmt_f64;
use roughvol::stats::Moments;
use roughvol::{Hurst, VolFunction};

fn cases(n: u32) -> ProptestConfig {
    ProptestConfig {
        cases: n,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(cases(24))]

    #[test]
    fn covariance_is_even_and_bounded(h in 0.05f64..0.49, s in 1e-3f64..50.0) {
        let ce = CovarianceEval::new(Hurst::new(h).unwrap(), CovRepr::TimeDomain);
        let c = ce.cz(s).unwrap();
        prop_assert_eq!(c, ce.cz(-s).unwrap());
        prop_assert!(c.abs() <= 1.0);
    }

    #[test]
    fn covariance_decreases_near_zero(h in 0.05f64..0.49, s in 1e-3f64..0.5) {
        let ce = CovarianceEval::new(Hurst::new(h).unwrap(), CovRepr::TimeDomain);
        prop_assert!(ce.cz(2.0 * s).unwrap() < ce.cz(s).unwrap());
    }

    #[test]
    fn kernel_cells_are_additive(h in 0.05f64..0.49, a in 0.0f64..5.0, w1 in 1e-3f64..3.0, w2 in 1e-3f64..3.0) {
        let ke = KernelEval::new(Hurst::new(h).unwrap());
        let (b, c) = (a + w1, a + w1 + w2);
        let split = ke.cell_integral(a, b) + ke.cell_integral(b, c);
        assert_relative_eq!(split, ke.cell_integral(a, c), epsilon = 1e-10, max_relative = 1e-8);
    }

    #[test]
    fn d_bar_respects_its_bound(h in 0.05f64..0.49, lo in 0.05f64..0.2, width in 0.01f64..0.5, slope in 0.1f64..3.0) {
        let f = VolFunction::bounded_sigmoid(lo, lo + width, slope).unwrap();
        let hv = Hurst::new(h).unwrap();
        let d = d_bar(&f, hv, DEFAULT_GH_ORDER, DEFAULT_QUAD_TOL).unwrap();
        prop_assert!(d.abs() <= d_bar_bound(&f, hv) * (1.0 + 1e-9));
    }
}

proptest! {
    #![proptest_config(cases(256))]

    #[test]
    fn csv_floats_round_trip(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        prop_assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn call_price_within_no_arbitrage_bounds(x in 50.0f64..150.0, k in 50.0f64..150.0, sigma in 0.01f64..1.0, tau in 0.01f64..5.0) {
        let p = bs_price(x, &Payoff::call(k).unwrap(), sigma, tau).unwrap();
        prop_assert!(p >= (x - k).max(0.0) - 1e-10);
        prop_assert!(p <= x + 1e-10);
    }

    #[test]
    fn implied_vol_inverts_black_scholes(x in 80.0f64..120.0, k in 80.0f64..120.0, sigma in 0.05f64..0.8, tau in 0.1f64..2.0) {
        let p = bs_price(x, &Payoff::call(k).unwrap(), sigma, tau).unwrap();
        let iv = implied_vol_invert(p, x, k, tau).unwrap();
        assert_relative_eq!(iv, sigma, max_relative = 1e-6);
    }

    #[test]
    fn smooth_call_gamma_is_positive(x in 50.0f64..150.0, k in 50.0f64..150.0, sigma in 0.01f64..1.0, smoothing in 0.01f64..0.2) {
        let g = bs_operator_greeks(x, &Payoff::smooth_call(k, smoothing).unwrap(), sigma, 1.0).unwrap();
        prop_assert!(g.d2 > 0.0);
    }

    #[test]
    fn sigmoid_stays_in_its_band(lo in 0.01f64..0.5, width in 0.001f64..1.0, slope in 0.01f64..5.0, z in -50.0f64..50.0) {
        let f = VolFunction::bounded_sigmoid(lo, lo + width, slope).unwrap();
        let v = f.value(z);
        prop_assert!(v >= lo && v <= lo + width);
        prop_assert!(f.deriv(z) >= 0.0);
    }

    #[test]
    fn moments_merge_matches_sequential(xs in prop::collection::vec(-1e3f64..1e3, 2..60), cut in 0usize..60) {
        let cut = cut.min(xs.len());
        let mut all = Moments::default();
        xs.iter().for_each(|x| all.push(*x));
        let (mut a, mut b) = (Moments::default(), Moments::default());
        xs[..cut].iter().for_each(|x| a.push(*x));
        xs[cut..].iter().for_each(|x| b.push(*x));
        a.merge(&b);
        assert_relative_eq!(a.mean(), all.mean(), epsilon = 1e-9);
        assert_relative_eq!(a.variance(), all.variance(), epsilon = 1e-7, max_relative = 1e-9);
    }
}

proptest! {
    #![proptest_config(cases(64))]

    #[test]
    fn config_round_trips(seed in any::<u64>(), h in 0.01f64..0.49, eps in 1e-4f64..0.5, rho in -0.99f64..0.99, half in 2u64..500_000) {
        let mut cfg = RunConfig { seed, ..RunConfig::default() };
        cfg.model.hurst = Hurst::new(h).unwrap();
        cfg.model.eps = eps;
        cfg.model.rho = rho;
        cfg.mc.n_paths = 2 * half;
        let back = RunConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.hash(), cfg.hash());
    }
}
