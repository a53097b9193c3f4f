use std::sync::Arc;

use proptest::prelude::*;

use gamma_smoothness::calculus::{FnFunction, GammaPolynomial};
use gamma_smoothness::harness::default_catalog;
use gamma_smoothness::kfunctional::restricted_k_upper;
use gamma_smoothness::modulus::{main_modulus, AnalysisConfig};
use gamma_smoothness::steklov::steklov_value;
use gamma_smoothness::weight::Exponent;
use gamma_smoothness::{GammaFunction, GammaSpec};

fn gamma() -> Arc<GammaFunction> {
    Arc::new(GammaFunction::build(GammaSpec::default()).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn gamma_round_trips(x in 1e-3f64..50.0) {
        let g = gamma();
        let back = g.eval_inverse(g.eval(x).unwrap()).unwrap();
        prop_assert!((back - x).abs() <= 1e-9 * x.max(1.0));
    }

    #[test]
    fn steklov_keeps_constants(c in -5.0f64..5.0, x in 0.1f64..10.0, r in 1usize..=3) {
        let g = gamma();
        let f = FnFunction::new(move |_| c);
        let tau = g.eval(0.1).unwrap();
        let v = steklov_value(&f, &g, r, tau, 1.0, x).unwrap();
        prop_assert!((v - c).abs() <= 1e-12 * c.abs().max(1.0));
    }

    #[test]
    fn modulus_scales_linearly(scale in 0.1f64..10.0) {
        let g = gamma();
        let cfg = AnalysisConfig::for_gamma(&g);
        let base = FnFunction::new(|x: f64| (-x).exp());
        let scaled = FnFunction::new(move |x: f64| scale * (-x).exp());
        let t = 0.02;
        let a = main_modulus(&base, &g, 1, t, Exponent::Finite(2.0), 0.0, &cfg).unwrap().omega;
        let b = main_modulus(&scaled, &g, 1, t, Exponent::Finite(2.0), 0.0, &cfg).unwrap().omega;
        prop_assert!((b - scale * a).abs() <= 1e-6 * b);
    }
}

#[test]
fn modulus_grows_with_t() {
    let g = gamma();
    let cfg = AnalysisConfig::for_gamma(&g);
    let f = FnFunction::new(|x: f64| x * (-0.5 * x).exp());
    let ts = [0.005, 0.01, 0.02, 0.04];
    let w: Vec<f64> = ts
        .iter()
        .map(|&t| main_modulus(&f, &g, 1, t, Exponent::Infinity, 0.0, &cfg).unwrap().omega)
        .collect();
    assert!(w.windows(2).all(|p| p[0] <= p[1]), "{w:?}");
}

#[test]
fn k_estimate_splits_into_its_terms() {
    let g = gamma();
    let cfg = AnalysisConfig::for_gamma(&g);
    for f in default_catalog(&g, 1).unwrap() {
        let k = restricted_k_upper(&f, &g, 1, 0.02, Exponent::Finite(2.0), 0.0, &cfg).unwrap();
        assert!(k.value >= 0.0, "{}", f.id());
        assert!((k.value - k.approx_error_term - k.seminorm_term).abs() <= 1e-12 * k.value.max(1e-300), "{}", f.id());
    }
}

#[test]
fn gamma_polynomials_below_the_order_have_zero_k() {
    let g = gamma();
    let cfg = AnalysisConfig::for_gamma(&g);
    let q = GammaPolynomial::new(vec![0.4, -2.0], g.clone());
    let k = restricted_k_upper(&q, &g, 2, 0.01, Exponent::Infinity, 1.0, &cfg).unwrap();
    assert!(k.value.abs() <= 1e-10, "{}", k.value);
}
