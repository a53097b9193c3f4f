//! γ-forward differences, the main part Ω of the γ-modulus of smoothness and
//! the complete modulus ω.

use std::sync::Arc;

use rayon::prelude::*;

use crate::approx::{best_gamma_poly_error, BestApproximation};
use crate::bell::binomial;
use crate::calculus::{GammaPolynomial, RealFunction};
use crate::error::{Error, Result};
use crate::gamma::GammaFunction;
use crate::weight::{
    admissibility_bound, default_constants, primed_constants, weighted_lp_norm_fn, window_interval, Exponent,
    LaguerreWeight, NormSpec, QuadratureConfig, WindowInterval,
};

/// Constants and discretization shared by moduli and K-functional estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisConfig {
    pub a1: f64,
    pub a2: f64,
    /// Number of points `h_i = t ρ^i` standing in for `0 < h ≤ t`.
    pub h_points: usize,
    pub h_ratio: f64,
    pub quad: QuadratureConfig,
    /// Use `A₁′, A₂′` instead of `A₁, A₂` for the tail intervals of ω.
    pub primed_tails: bool,
}

impl AnalysisConfig {
    pub fn for_gamma(g: &GammaFunction) -> Self {
        let (a1, a2) = default_constants(g);
        AnalysisConfig {
            a1,
            a2,
            h_points: 24,
            h_ratio: 0.75,
            quad: QuadratureConfig::default(),
            primed_tails: false,
        }
    }

    pub fn h_grid(&self, t: f64) -> Vec<f64> {
        (0..self.h_points).map(|i| t * self.h_ratio.powi(i as i32)).collect()
    }

    /// One set of `h` samples serving several `t` at once: every `t` gets
    /// itself and the points `t_max ρ^i` of `[t ρ^{n−1}, t)`. Returns the
    /// union (decreasing) and, per `t`, indices into it.
    pub fn shared_h_grid(&self, ts: &[f64]) -> (Vec<f64>, Vec<Vec<usize>>) {
        let top = ts.iter().copied().fold(0.0, f64::max);
        let bottom = ts.iter().copied().fold(f64::INFINITY, f64::min) * self.h_ratio.powi(self.h_points as i32 - 1);
        let mut union: Vec<f64> = ts.to_vec();
        let mut h = top;
        while h >= bottom * (1.0 - 1e-12) {
            union.push(h);
            h *= self.h_ratio;
        }
        union.sort_by(|a, b| b.total_cmp(a));
        union.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());
        let floor = self.h_ratio.powi(self.h_points as i32 - 1);
        let members = ts
            .iter()
            .map(|&t| {
                union
                    .iter()
                    .enumerate()
                    .filter(|&(_, &h)| h <= t * (1.0 + 1e-12) && h >= t * floor * (1.0 - 1e-12))
                    .map(|(i, _)| i)
                    .collect()
            })
            .collect();
        (union, members)
    }
}

/// `Σ_k (−1)^{r−k} C(r,k) f(x + k s √x)` with `s = γ⁻¹(h)`.
pub fn forward_difference(f: &dyn RealFunction, g: &GammaFunction, r: usize, h: f64, x: f64) -> Result<f64> {
    let s = g.eval_inverse(h)?;
    forward_difference_step(f, r, s * x.sqrt(), x)
}

/// `Δ^r` with an explicit uniform step.
pub fn forward_difference_step(f: &dyn RealFunction, r: usize, step: f64, x: f64) -> Result<f64> {
    let (lo, hi) = f.domain();
    let mut acc = 0.0;
    for k in 0..=r {
        let node = x + k as f64 * step;
        if !(node > lo && node < hi) {
            return Err(Error::NodeOutsideDomain { k, x: node });
        }
        let sign = if (r - k) % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * binomial(r, k) * f.eval(node);
    }
    Ok(acc)
}

/// Points `x` where a stencil node `x + k s √x` hits one of `kinks`.
pub fn stencil_kinks(kinks: &[f64], r: usize, s: f64) -> Vec<f64> {
    let mut out = Vec::new();
    for &b in kinks {
        for k in 0..=r {
            let ks = k as f64 * s;
            let root = 0.5 * (-ks + (ks * ks + 4.0 * b).sqrt());
            out.push(root * root);
        }
    }
    out
}

fn function_kinks(f: &dyn RealFunction, g: &GammaFunction) -> Vec<f64> {
    let mut k = f.breakpoints();
    k.extend(g.kinks());
    k
}

/// `‖w_α Δ^r f‖_{L^p(I_{rh,γ})}` for one `h`.
pub fn window_difference_norm(
    f: &dyn RealFunction,
    g: &GammaFunction,
    r: usize,
    h: f64,
    p: Exponent,
    alpha: f64,
    cfg: &AnalysisConfig,
) -> Result<f64> {
    let win = window_interval(g, r, h, cfg.a1, cfg.a2)?;
    difference_norm_on(f, g, r, &win, p, alpha, cfg)
}

fn difference_norm_on(
    f: &dyn RealFunction,
    g: &GammaFunction,
    r: usize,
    win: &WindowInterval,
    p: Exponent,
    alpha: f64,
    cfg: &AnalysisConfig,
) -> Result<f64> {
    let kinks = stencil_kinks(&function_kinks(f, g), r, win.s);
    let qcfg = cfg.quad.with_singular_points(&kinks);
    let spec = NormSpec::new(p, win.lo, win.hi)?;
    let s = win.s;
    let v = weighted_lp_norm_fn(
        |x| forward_difference_step(f, r, s * x.sqrt(), x).unwrap_or(f64::NAN),
        &LaguerreWeight::new(alpha),
        &spec,
        &qcfg,
    )?;
    Ok(v.value)
}

/// Ω together with the sampled `h` values and the per-`h` norms.
#[derive(Debug, Clone, PartialEq)]
pub struct MainModulus {
    pub omega: f64,
    pub h_grid: Vec<f64>,
    pub per_h_norms: Vec<f64>,
}

/// `Ω^r_{γ,φ}(f, t)_{w_α,p}`: the largest per-`h` norm over the `h` grid.
pub fn main_modulus(
    f: &dyn RealFunction,
    g: &GammaFunction,
    r: usize,
    t: f64,
    p: Exponent,
    alpha: f64,
    cfg: &AnalysisConfig,
) -> Result<MainModulus> {
    check_t(g, r, t, cfg)?;
    let h_grid = cfg.h_grid(t);
    let per_h_norms = h_grid
        .iter()
        .map(|&h| window_difference_norm(f, g, r, h, p, alpha, cfg))
        .collect::<Result<Vec<_>>>()?;
    let omega = per_h_norms.iter().copied().fold(0.0, f64::max);
    Ok(MainModulus {
        omega,
        h_grid,
        per_h_norms,
    })
}

/// [`main_modulus`] at several `t` sharing the samples of
/// [`AnalysisConfig::shared_h_grid`].
pub fn main_modulus_curve(
    f: &dyn RealFunction,
    g: &GammaFunction,
    r: usize,
    ts: &[f64],
    p: Exponent,
    alpha: f64,
    cfg: &AnalysisConfig,
) -> Vec<Result<MainModulus>> {
    let (union, members) = cfg.shared_h_grid(ts);
    let norms: Vec<Result<f64>> = union
        .par_iter()
        .map(|&h| window_difference_norm(f, g, r, h, p, alpha, cfg))
        .collect();
    ts.iter()
        .zip(members)
        .map(|(&t, idx)| {
            check_t(g, r, t, cfg)?;
            let per_h_norms = idx.iter().map(|&i| norms[i].clone()).collect::<Result<Vec<_>>>()?;
            Ok(MainModulus {
                omega: per_h_norms.iter().copied().fold(0.0, f64::max),
                h_grid: idx.iter().map(|&i| union[i]).collect(),
                per_h_norms,
            })
        })
        .collect()
}

fn check_t(g: &GammaFunction, r: usize, t: f64, cfg: &AnalysisConfig) -> Result<()> {
    let bound = admissibility_bound(g, r, cfg.a1, cfg.a2);
    if !(t > 0.0) || t > bound * (1.0 + 1e-12) {
        return Err(Error::InadmissibleStep { h: t, bound });
    }
    Ok(())
}

/// Ω, the two tail approximation errors and ω.
#[derive(Debug, Clone, PartialEq)]
pub struct ModulusResult {
    pub t: f64,
    pub omega_main: f64,
    pub tail_zero: f64,
    pub tail_infinity: f64,
    pub omega_complete: f64,
    pub h_grid: Vec<f64>,
    pub per_h_norms: Vec<f64>,
    /// Best approximations on `(0, t_zero)` and `(t_inf, ∞)`.
    pub achieving_polys: [GammaPolynomial; 2],
    /// `(A₁, A₂)` used for the tail intervals.
    pub tail_constants: (f64, f64),
}

/// The tail intervals `(0, 4A₁r²s²)` and `(A₂/s², ∞)`, `s = γ⁻¹(t)`.
pub fn tail_intervals(g: &GammaFunction, r: usize, t: f64, cfg: &AnalysisConfig) -> Result<((f64, f64), (f64, f64), (f64, f64))> {
    let (a1, a2) = if cfg.primed_tails {
        primed_constants(cfg.a1, cfg.a2)
    } else {
        (cfg.a1, cfg.a2)
    };
    let s = g.eval_inverse(t)?;
    let rf = r as f64;
    Ok(((0.0, 4.0 * a1 * rf * rf * s * s), (a2 / (s * s), f64::INFINITY), (a1, a2)))
}

/// Best weighted γ-polynomial approximation of `f` of degree `deg`.
pub fn best_approximation(
    f: &dyn RealFunction,
    g: &Arc<GammaFunction>,
    deg: usize,
    p: Exponent,
    alpha: f64,
    interval: (f64, f64),
    cfg: &QuadratureConfig,
) -> Result<BestApproximation> {
    let kinks = f.breakpoints();
    best_gamma_poly_error(&|x| f.eval(x), g, deg, p, alpha, interval, &kinks, cfg)
}

/// `ω^r_{γ,φ}(f, t)_{w_α,p}`.
pub fn complete_modulus(
    f: &dyn RealFunction,
    g: &Arc<GammaFunction>,
    r: usize,
    t: f64,
    p: Exponent,
    alpha: f64,
    cfg: &AnalysisConfig,
) -> Result<ModulusResult> {
    let main = main_modulus(f, g, r, t, p, alpha, cfg)?;
    complete_from_main(f, g, r, t, p, alpha, cfg, main)
}

/// ω from an already computed Ω at the same `t`.
#[allow(clippy::too_many_arguments)]
pub fn complete_from_main(
    f: &dyn RealFunction,
    g: &Arc<GammaFunction>,
    r: usize,
    t: f64,
    p: Exponent,
    alpha: f64,
    cfg: &AnalysisConfig,
    main: MainModulus,
) -> Result<ModulusResult> {
    let (zero_iv, inf_iv, tail_constants) = tail_intervals(g, r, t, cfg)?;
    let near = best_approximation(f, g, r - 1, p, alpha, zero_iv, &cfg.quad)?;
    let far = best_approximation(f, g, r - 1, p, alpha, inf_iv, &cfg.quad)?;
    Ok(ModulusResult {
        t,
        omega_main: main.omega,
        tail_zero: near.error,
        tail_infinity: far.error,
        omega_complete: main.omega + near.error + far.error,
        h_grid: main.h_grid,
        per_h_norms: main.per_h_norms,
        achieving_polys: [near.poly, far.poly],
        tail_constants,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::FnFunction;
    use crate::gamma::GammaSpec;
    use proptest::prelude::*;

    fn gamma() -> Arc<GammaFunction> {
        Arc::new(GammaFunction::build(GammaSpec::default()).unwrap())
    }

    #[test]
    fn difference_examples() {
        let g = gamma();
        let c = FnFunction::new(|_| 4.2);
        let id = FnFunction::new(|x| x);
        let h = g.value(0.5);
        assert!(forward_difference(&c, &g, 3, h, 1.3).unwrap().abs() < 1e-14);
        assert!(forward_difference(&id, &g, 2, h, 1.3).unwrap().abs() < 1e-14);
        assert!((forward_difference(&id, &g, 1, h, 4.0).unwrap() - 1.0).abs() < 1e-12);
        let short = FnFunction::new(|x| x).with_domain(0.0, 2.0);
        assert!(matches!(
            forward_difference(&short, &g, 2, h, 1.5),
            Err(Error::NodeOutsideDomain { k: 1, .. })
        ));
    }

    #[test]
    fn constant_has_zero_modulus() {
        let g = gamma();
        let cfg = AnalysisConfig::for_gamma(&g);
        let c = FnFunction::new(|_| 2.0);
        let m = main_modulus(&c, &g, 1, 0.03, Exponent::Finite(2.0), 0.0, &cfg).unwrap();
        assert_eq!(m.omega, 0.0);
        assert_eq!(m.h_grid.len(), 24);
    }

    #[test]
    fn gamma_polynomial_on_linear_branch() {
        // window inside [2, ∞): γ-polynomials of degree < r are polynomials in x there
        let g = gamma();
        let mut cfg = AnalysisConfig::for_gamma(&g);
        cfg.a1 = 200.0;
        cfg.a2 = 2.0;
        let p = GammaPolynomial::new(vec![1.0, -2.0], g.clone());
        let h = g.value(0.05);
        let win = window_interval(&g, 2, h, cfg.a1, cfg.a2).unwrap();
        assert!(win.lo >= 2.0);
        let v = window_difference_norm(&p, &g, 2, h, Exponent::Finite(2.0), 0.0, &cfg).unwrap();
        assert!(v < 1e-12, "{v}");
    }

    #[test]
    fn inadmissible_t() {
        let g = gamma();
        let cfg = AnalysisConfig::for_gamma(&g);
        let c = FnFunction::new(|_| 2.0);
        assert!(matches!(
            main_modulus(&c, &g, 1, 0.9, Exponent::Finite(2.0), 0.0, &cfg),
            Err(Error::InadmissibleStep { .. })
        ));
    }

    #[test]
    fn complete_modulus_assembles_its_parts() {
        let g = gamma();
        let cfg = AnalysisConfig::for_gamma(&g);
        let f = FnFunction::new(|x| (-x).exp());
        let t = 0.03;
        let m = complete_modulus(&f, &g, 1, t, Exponent::Finite(2.0), 0.0, &cfg).unwrap();
        assert_eq!(m.omega_complete, m.omega_main + m.tail_zero + m.tail_infinity);
        assert!(m.omega_complete >= m.omega_main && m.tail_zero > 0.0 && m.tail_infinity >= 0.0);
        let again = main_modulus(&f, &g, 1, t, Exponent::Finite(2.0), 0.0, &cfg).unwrap();
        assert_eq!(again.omega, m.omega_main);
        let (z, i, _) = tail_intervals(&g, 1, t, &cfg).unwrap();
        let near = best_approximation(&f, &g, 0, Exponent::Finite(2.0), 0.0, z, &cfg.quad).unwrap();
        let far = best_approximation(&f, &g, 0, Exponent::Finite(2.0), 0.0, i, &cfg.quad).unwrap();
        assert_eq!(near.error, m.tail_zero);
        assert_eq!(far.error, m.tail_infinity);
        let zero = FnFunction::new(|_| 0.0);
        let z = complete_modulus(&zero, &g, 2, t, Exponent::Infinity, 1.0, &cfg).unwrap();
        assert_eq!(z.omega_complete, 0.0);
    }

    #[test]
    fn monotone_in_t_on_nested_grids() {
        let g = gamma();
        let cfg = AnalysisConfig::for_gamma(&g);
        let f = FnFunction::new(|x| (x - 1.0).abs().powf(0.5)).with_breakpoints(vec![1.0]);
        let t = 0.04;
        let big = main_modulus(&f, &g, 1, t, Exponent::Infinity, 0.0, &cfg).unwrap();
        let small = main_modulus(&f, &g, 1, t * cfg.h_ratio, Exponent::Infinity, 0.0, &cfg).unwrap();
        assert!(small.omega <= big.omega.max(small.per_h_norms[23]) * (1.0 + 1e-12));
    }

    proptest! {
        #[test]
        fn differences_annihilate_low_degree(c in prop::collection::vec(-3.0f64..3.0, 3), x in 0.1f64..20.0, s in 0.001f64..0.3, r in 3usize..5) {
            let f = FnFunction::new(move |x| c[0] + c[1] * x + c[2] * x * x);
            let d = forward_difference_step(&f, r, s * x.sqrt(), x).unwrap();
            prop_assert!(d.abs() < 1e-9 * (1.0 + x * x));
        }

        #[test]
        fn difference_recursion(x in 0.1f64..10.0, s in 0.001f64..0.5) {
            let f = FnFunction::new(|x| (x - 1.0).abs().powf(0.3) + x.sin());
            let step = s * x.sqrt();
            let d2 = forward_difference_step(&f, 2, step, x).unwrap();
            let d1 = |y: f64| forward_difference_step(&f, 1, step, y).unwrap();
            prop_assert!((d2 - (d1(x + step) - d1(x))).abs() < 1e-12);
        }
    }
}
