//! Invariant suites with measured margins.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::bell::{bell_polynomial, factorial, BellTable};
use crate::calculus::{gamma_derivative, DerivativeMethod, FnFunction, GammaPolynomial, RealFunction};
use crate::error::{Error, Result};
use crate::gamma::{GammaFunction, GammaSpec};
use crate::kfunctional::{difference_integral_identity_check, full_k_upper, restricted_k_upper};
use crate::modulus::{complete_modulus, main_modulus, AnalysisConfig};
use crate::partition::{psi_eval, Partition};
use crate::steklov::steklov_classical_derivative;
use crate::weight::{
    admissibility_bound, default_constants, weight_equivalence_bounds, weighted_lp_norm, window_interval, Exponent,
    LaguerreWeight, NormSpec, QuadratureConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Calculus,
    Weights,
    Modulus,
    KFunctional,
    All,
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "calculus" => Ok(Suite::Calculus),
            "weights" => Ok(Suite::Weights),
            "modulus" => Ok(Suite::Modulus),
            "kfunctional" => Ok(Suite::KFunctional),
            "all" => Ok(Suite::All),
            other => Err(Error::InvalidArgument(format!("unknown suite `{other}`"))),
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Suite::Calculus => "calculus",
            Suite::Weights => "weights",
            Suite::Modulus => "modulus",
            Suite::KFunctional => "kfunctional",
            Suite::All => "all",
        })
    }
}

/// A deliberate defect, to show that the suites notice it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Fault {
    #[default]
    None,
    /// γ built with the slope of its linear branch negated.
    FlipC1,
}

impl FromStr for Fault {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Fault::None),
            "flip-c1" => Ok(Fault::FlipC1),
            other => Err(Error::InvalidArgument(format!("unknown fault `{other}`"))),
        }
    }
}

/// One invariant: `measured ≤ tolerance` passes.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub suite: Suite,
    pub name: &'static str,
    pub measured: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.measured <= self.tolerance
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {}/{}: measured {:.3e} tolerance {:.3e}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.suite,
            self.name,
            self.measured,
            self.tolerance
        )?;
        if !self.detail.is_empty() {
            write!(f, " ({})", self.detail)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed())
    }
}

struct Ctx {
    gamma: Arc<GammaFunction>,
    checks: Vec<Check>,
    suite: Suite,
}

impl Ctx {
    fn record(&mut self, name: &'static str, outcome: Result<(f64, String)>, tolerance: f64) {
        let (measured, detail) = match outcome {
            Ok(v) => v,
            Err(e) => (f64::INFINITY, format!("error: {e}")),
        };
        let measured = if measured.is_nan() { f64::INFINITY } else { measured };
        self.checks.push(Check {
            suite: self.suite,
            name,
            measured,
            tolerance,
            detail,
        });
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn gamma_for(fault: Fault) -> Arc<GammaFunction> {
    let good = GammaFunction::build(GammaSpec::default()).expect("default spec is valid");
    match fault {
        Fault::None => Arc::new(good),
        Fault::FlipC1 => {
            let (c1, c2) = good.linear_coefficients();
            Arc::new(GammaFunction::from_parts_unchecked(GammaSpec::default(), -c1, c2))
        }
    }
}

pub fn verify(suite: Suite, fault: Fault) -> VerifyReport {
    let mut ctx = Ctx {
        gamma: gamma_for(fault),
        checks: Vec::new(),
        suite,
    };
    let suites: &[Suite] = match suite {
        Suite::All => &[Suite::Calculus, Suite::Weights, Suite::Modulus, Suite::KFunctional],
        Suite::Calculus => &[Suite::Calculus],
        Suite::Weights => &[Suite::Weights],
        Suite::Modulus => &[Suite::Modulus],
        Suite::KFunctional => &[Suite::KFunctional],
    };
    for &s in suites {
        ctx.suite = s;
        match s {
            Suite::Calculus => calculus(&mut ctx),
            Suite::Weights => weights(&mut ctx),
            Suite::Modulus => modulus(&mut ctx),
            Suite::KFunctional => kfunctional(&mut ctx),
            Suite::All => unreachable!(),
        }
    }
    VerifyReport { checks: ctx.checks }
}

fn grid(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| lo + (hi - lo) * (i as f64 + 0.5) / n as f64)
}

fn calculus(ctx: &mut Ctx) {
    let g = ctx.gamma.clone();
    ctx.record("gamma_at_zero", g.eval(0.0).map(|v| (v.abs(), String::new())), 1e-15);

    let violations = grid(0.0, 6.0, 600)
        .collect::<Vec<_>>()
        .windows(2)
        .filter(|w| g.value(w[1]) <= g.value(w[0]))
        .count();
    ctx.record("strictly_increasing", Ok((violations as f64, "violations on 600 points".into())), 0.0);

    let round = grid(0.01, 4.0, 200).try_fold(0.0f64, |m, x| {
        let back = g.eval_inverse(g.value(x))?;
        Ok::<_, Error>(m.max((back - x).abs() / x))
    });
    ctx.record("inverse_round_trip", round.map(|m| (m, String::new())), 1e-11);

    let affine = GammaFunction::affine(2.0, 1.0).expect("valid affine");
    let cube = FnFunction::new(|x| x * x * x).with_derivatives(4, |x, k| match k {
        0 => x * x * x,
        1 => 3.0 * x * x,
        2 => 6.0 * x,
        3 => 6.0,
        _ => 0.0,
    });
    let mut worst = 0.0f64;
    let affine_err = (|| {
        for x in grid(0.2, 3.0, 10) {
            for r in 1..=3 {
                let exact = cube.classical_derivative(x, r).unwrap_or(f64::NAN) / 2f64.powi(r as i32);
                for m in [
                    DerivativeMethod::DifferenceQuotient,
                    DerivativeMethod::ViaInverseComposition,
                    DerivativeMethod::ViaFaaDiBruno,
                ] {
                    worst = worst.max(rel(gamma_derivative(&cube, &affine, x, r, m)?, exact));
                }
            }
        }
        Ok((worst, "three methods, r = 1..3".into()))
    })();
    ctx.record("affine_exactness", affine_err, 1e-6);

    let annihilated = (|| {
        let mut worst = 0.0f64;
        for m in 0..=2usize {
            let mut c = vec![0.0; m + 1];
            c[m] = 1.0;
            let q = GammaPolynomial::new(c, g.clone());
            let sym = FnFunction::new(move |x| q.eval(x));
            for x in grid(0.1, 3.5, 12).filter(|x| (x - 1.0).abs() > 1e-3 && (x - 2.0).abs() > 1e-3) {
                let v = gamma_derivative(&sym, &g, x, m + 1, DerivativeMethod::DifferenceQuotient)?;
                worst = worst.max(v.abs());
            }
        }
        Ok((worst, "numeric derivative above the degree".into()))
    })();
    ctx.record("gamma_poly_annihilation", annihilated, 1e-6);

    let bell = (|| {
        let xs: Vec<f64> = (1..=8).map(|i| 0.3 * i as f64 - 0.7).collect();
        let table = BellTable::new(&xs, 8)?;
        let mut worst = 0.0f64;
        for n in 1..=8 {
            for l in 1..=n {
                let e = bell_polynomial(n, l, &xs[..n - l + 1])?;
                worst = worst.max((e - table.get(n, l)).abs() / e.abs().max(1.0));
            }
        }
        Ok((worst, "enumeration vs recurrence, n <= 8".into()))
    })();
    ctx.record("bell_recurrence", bell, 1e-12);

    let inverse = (|| {
        let mut worst = 0.0f64;
        for y in [0.3, 0.7, 1.4, 1.8] {
            let k = 1e-3;
            let fd = (g.eval_inverse(y + k)? - 2.0 * g.eval_inverse(y)? + g.eval_inverse(y - k)?) / (k * k);
            worst = worst.max(rel(g.inverse_derivative(y, 2)?, fd));
        }
        Ok((worst, "second derivative of the inverse".into()))
    })();
    ctx.record("inverse_second_derivative", inverse, 1e-4);
}

fn weights(ctx: &mut Ctx) {
    let g = ctx.gamma.clone();
    let join = (|| {
        let spec = g.spec().ok_or_else(|| Error::InvalidArgument("power construction expected".into()))?;
        let xl = spec.a[spec.a.len() - 1] + 1.0;
        let (c1, c2) = g.linear_coefficients();
        let eps = 1e-7;
        let left = g.value(xl - eps);
        let left_slope = g.derivative_unchecked(xl - eps, 1);
        let jump = (left - (c1 * xl + c2)).abs() + (left_slope - c1).abs();
        Ok((jump, format!("value and slope mismatch at x = {xl}")))
    })();
    ctx.record("c1_join", join, 1e-5);

    let q = QuadratureConfig::default();
    let one = FnFunction::new(|_| 1.0);
    let norms = (|| {
        let a = weighted_lp_norm(&one, &LaguerreWeight::new(0.0), &NormSpec::new(Exponent::Finite(2.0), 0.0, f64::INFINITY)?, &q)?;
        let b = weighted_lp_norm(&one, &LaguerreWeight::new(1.0), &NormSpec::new(Exponent::Finite(1.0), 0.0, f64::INFINITY)?, &q)?;
        Ok((rel(a, 0.5f64.sqrt()).max(rel(b, 1.0)), "constant function, alpha = 0 and 1".into()))
    })();
    ctx.record("closed_form_norms", norms, 1e-8);

    let (a1, a2) = default_constants(&g);
    let equivalence = (|| {
        let mut violations = 0usize;
        let mut n = 0usize;
        for alpha in [0.0, 1.0] {
            for r in 1..=2usize {
                let (lo_c, hi_c) = weight_equivalence_bounds(r, a1, a2, alpha)?;
                let w = LaguerreWeight::new(alpha);
                let bound = admissibility_bound(&g, r, a1, a2);
                for (i, h) in grid(0.05 * bound, bound, 5).enumerate() {
                    let win = window_interval(&g, r, h, a1, a2)?;
                    for x in grid(win.lo, win.hi, 10) {
                        for u in grid(-1.0, 1.0, 5 + i) {
                            let y = x + u * r as f64 * win.s * x.sqrt();
                            let q = w.ratio(y, x);
                            n += 1;
                            if !(q >= lo_c * (1.0 - 1e-12) && q <= hi_c * (1.0 + 1e-12)) {
                                violations += 1;
                            }
                        }
                    }
                }
            }
        }
        Ok((violations as f64, format!("{n} sampled pairs")))
    })();
    ctx.record("weight_equivalence", equivalence, 0.0);

    let window = (|| {
        let mut worst = f64::NEG_INFINITY;
        for r in 1..=3 {
            let b = admissibility_bound(&g, r, a1, a2);
            let w = window_interval(&g, r, b * 0.999, a1, a2)?;
            worst = worst.max(w.lo / w.hi);
        }
        Ok((worst, "lo/hi just below the admissibility bound".into()))
    })();
    ctx.record("window_nonempty", window, 1.0);
}

fn exp_neg() -> FnFunction {
    FnFunction::new(|x| (-x).exp()).with_derivatives(6, |x, k| if k % 2 == 0 { (-x).exp() } else { -(-x).exp() })
}

fn modulus(ctx: &mut Ctx) {
    let g = ctx.gamma.clone();
    let cfg = AnalysisConfig::for_gamma(&g);
    let p2 = Exponent::Finite(2.0);
    let bound = admissibility_bound(&g, 2, cfg.a1, cfg.a2);
    let tails = (|| {
        let q = GammaPolynomial::new(vec![0.5, -1.0], g.clone());
        let m = complete_modulus(&q, &g, 2, 0.5 * bound, p2, 0.0, &cfg)?;
        Ok((m.tail_zero.max(m.tail_infinity), "degree 1 gamma polynomial, r = 2".into()))
    })();
    ctx.record("degenerate_tails", tails, 1e-10);

    let f = exp_neg();
    let t1 = admissibility_bound(&g, 1, cfg.a1, cfg.a2) * 0.5;
    let refine = (|| {
        let coarse = main_modulus(&f, &g, 1, t1, p2, 0.0, &cfg)?;
        let mut fine_cfg = cfg.clone();
        fine_cfg.h_points = 2 * cfg.h_points - 1;
        fine_cfg.h_ratio = cfg.h_ratio.sqrt();
        let fine = main_modulus(&f, &g, 1, t1, p2, 0.0, &fine_cfg)?;
        let change = (fine.omega - coarse.omega) / coarse.omega;
        let measured = if change < -1e-12 { f64::INFINITY } else { change };
        Ok((measured, "relative growth of Omega when the h grid doubles".into()))
    })();
    ctx.record("h_grid_refinement", refine, 0.02);

    let monotone = (|| {
        let ts: Vec<f64> = (0..5).map(|i| t1 * 0.6f64.powi(i)).collect();
        let vals = ts
            .iter()
            .map(|&t| main_modulus(&f, &g, 1, t, p2, 0.0, &cfg).map(|m| m.omega))
            .collect::<Result<Vec<_>>>()?;
        let worst = vals.windows(2).map(|w| (w[1] - w[0]).max(0.0) / w[0]).fold(0.0, f64::max);
        Ok((worst, "Omega as t decreases".into()))
    })();
    ctx.record("omega_monotone_in_t", monotone, 1e-12);

    let identity = (|| {
        let sq = FnFunction::new(|x| x * x).with_derivatives(3, |x, k| match k {
            0 => x * x,
            1 => 2.0 * x,
            2 => 2.0,
            _ => 0.0,
        });
        let h = 0.3 * t1;
        let mut worst = 0.0f64;
        for x in [0.9, 1.3, 2.5] {
            let (l, r) = difference_integral_identity_check(&f, &g, 1, h, x)?;
            worst = worst.max(rel(r, l));
            let (l, r) = difference_integral_identity_check(&sq, &g, 2, h, x)?;
            worst = worst.max(rel(r, l));
        }
        Ok((worst, "r = 1 and nested r = 2 forms".into()))
    })();
    ctx.record("difference_integral_identity", identity, 1e-6);
}

fn kfunctional(ctx: &mut Ctx) {
    let g = ctx.gamma.clone();
    let cfg = AnalysisConfig::for_gamma(&g);
    let partitions = (|| {
        let mut n = 0;
        for r in 1..=3 {
            let b = admissibility_bound(&g, r, cfg.a1, cfg.a2);
            for h in grid(0.05 * b, 0.5 * b, 5) {
                Partition::build(&g, r, h, cfg.a1, cfg.a2)?.check_invariants()?;
                n += 1;
            }
        }
        Ok((0.0, format!("{n} partitions")))
    })();
    ctx.record("partition_laws", partitions, 0.0);

    let psi = (|| {
        let ends = psi_eval(0.0, 0)?.abs() + (psi_eval(1.0, 0)? - 1.0).abs();
        let sym = grid(0.0, 1.0, 20).try_fold(0.0f64, |m, s| Ok::<_, Error>(m.max((psi_eval(s, 0)? + psi_eval(1.0 - s, 0)? - 1.0).abs())))?;
        Ok((ends.max(sym), "endpoint values and symmetry".into()))
    })();
    ctx.record("bump_shape", psi, 1e-12);

    let steklov = (|| {
        let mut worst = 0.0f64;
        for r in 1..=2usize {
            let f = FnFunction::new(move |x| x.powi(r as i32));
            let v = steklov_classical_derivative(&f, &g, r, 0.02, 0.8, 1.7, r)?;
            worst = worst.max(rel(v, factorial(r)));
        }
        Ok((worst, "top derivative of x^r".into()))
    })();
    ctx.record("steklov_top_derivative", steklov, 1e-6);

    let degenerate = (|| {
        let q = GammaPolynomial::new(vec![1.0, 2.0], g.clone());
        let t = 0.5 * crate::harness::config::horizon(&g, 2, cfg.a1, cfg.a2)?;
        let kr = restricted_k_upper(&q, &g, 2, t, Exponent::Finite(2.0), 0.0, &cfg)?;
        let kf = full_k_upper(&q, &g, 2, t, Exponent::Finite(2.0), 0.0, &cfg)?;
        Ok((kr.value.max(kf.value), "degree 1 gamma polynomial, r = 2".into()))
    })();
    ctx.record("degenerate_k", degenerate, 1e-10);

    let bounded = (|| {
        let f = exp_neg();
        let t = 0.5 * crate::harness::config::horizon(&g, 1, cfg.a1, cfg.a2)?;
        let k = restricted_k_upper(&f, &g, 1, t, Exponent::Finite(2.0), 0.0, &cfg)?;
        let whole = weighted_lp_norm(
            &f,
            &LaguerreWeight::new(0.0),
            &NormSpec::new(Exponent::Finite(2.0), 0.0, f64::INFINITY)?,
            &QuadratureConfig::default(),
        )?;
        let parts = (k.approx_error_term + k.seminorm_term - k.value).abs();
        Ok(((k.value / whole - 1.0).max(0.0) + parts, "K below the zero candidate".into()))
    })();
    ctx.record("k_upper_consistent", bounded, 1e-9);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn calculus_and_weights_pass() {
        for s in [Suite::Calculus, Suite::Weights] {
            let rep = verify(s, Fault::None);
            for c in &rep.checks {
                assert!(c.passed(), "{c}");
            }
        }
    }

    #[test]
    fn flipped_slope_fails_the_join() {
        let rep = verify(Suite::Weights, Fault::FlipC1);
        let join = rep.checks.iter().find(|c| c.name == "c1_join").unwrap();
        assert!(!join.passed(), "{join}");
        assert!(!rep.passed());
    }

    #[test]
    fn parse_names() {
        assert_eq!("all".parse::<Suite>().unwrap(), Suite::All);
        assert_eq!("flip-c1".parse::<Fault>().unwrap(), Fault::FlipC1);
        assert!("nope".parse::<Suite>().is_err());
    }
}
