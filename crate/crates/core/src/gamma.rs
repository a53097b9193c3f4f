//! The change of variable γ: a strictly increasing sum of signed fractional
//! powers centred at the singular points `a_k`, continued linearly beyond
//! `a_N + 1`, or an affine map used as an exactness reference.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::bell::BellTable;
use crate::error::{Error, Result};

/// Singular points, exponents and the highest derivative order to support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaSpec {
    pub a: Vec<f64>,
    pub beta: Vec<f64>,
    pub r_max: usize,
}

impl GammaSpec {
    pub fn new(a: Vec<f64>, beta: Vec<f64>, r_max: usize) -> Result<Self> {
        let spec = GammaSpec { a, beta, r_max };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.a.is_empty() {
            return Err(Error::InvalidSpec("at least one singular point is needed".into()));
        }
        if self.a.len() != self.beta.len() {
            return Err(Error::InvalidSpec(format!(
                "{} singular points but {} exponents",
                self.a.len(),
                self.beta.len()
            )));
        }
        if self.r_max == 0 {
            return Err(Error::InvalidSpec("r_max must be positive".into()));
        }
        if !(self.a[0] > 0.0 && self.a[0].is_finite()) {
            return Err(Error::InvalidSpec(format!("a_1 = {} must be positive", self.a[0])));
        }
        for w in self.a.windows(2) {
            if !(w[1] > w[0] && w[1].is_finite()) {
                return Err(Error::InvalidSpec(format!(
                    "singular points must increase strictly, got {} then {}",
                    w[0], w[1]
                )));
            }
        }
        let bound = 1.0 / self.r_max as f64;
        for (k, &b) in self.beta.iter().enumerate() {
            if !(b > 0.0 && b < bound) {
                return Err(Error::InvalidSpec(format!(
                    "beta_{} = {b} must lie in (0, 1/r_max) = (0, {bound})",
                    k + 1
                )));
            }
        }
        Ok(())
    }
}

impl Default for GammaSpec {
    /// `a = [1]`, `β = [1/4]`, `r_max = 3`.
    fn default() -> Self {
        GammaSpec {
            a: vec![1.0],
            beta: vec![0.25],
            r_max: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Repr {
    PiecewiseRoot {
        spec: GammaSpec,
        c1: f64,
        c2: f64,
        x_lin: f64,
        shift: f64,
    },
    Affine {
        slope: f64,
        intercept: f64,
    },
}

/// Which construction a [`GammaFunction`] uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GammaKind {
    PiecewiseRoot,
    Affine,
}

/// A value of `(γ⁻¹)^{(r)}(y)` together with whether `y` is the junction of
/// the power branch and the linear branch, where only the right-hand value
/// is reported.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverseDerivative {
    pub value: f64,
    pub at_breakpoint: bool,
}

/// The change of variable γ.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaFunction {
    repr: Repr,
}

impl GammaFunction {
    pub fn build(spec: GammaSpec) -> Result<Self> {
        spec.validate()?;
        let x_lin = spec.a[spec.a.len() - 1] + 1.0;
        let c1: f64 = spec
            .a
            .iter()
            .zip(&spec.beta)
            .map(|(&a, &b)| b * (x_lin - a).powf(b - 1.0))
            .sum();
        let shift: f64 = spec.a.iter().zip(&spec.beta).map(|(&a, &b)| a.powf(b)).sum();
        let at_lin: f64 = spec
            .a
            .iter()
            .zip(&spec.beta)
            .map(|(&a, &b)| (x_lin - a).powf(b))
            .sum();
        let c2 = at_lin - c1 * x_lin + shift;
        Ok(GammaFunction {
            repr: Repr::PiecewiseRoot {
                spec,
                c1,
                c2,
                x_lin,
                shift,
            },
        })
    }

    /// `γ(x) = slope·x + intercept`. Any real `x` is accepted.
    pub fn affine(slope: f64, intercept: f64) -> Result<Self> {
        if slope == 0.0 || !slope.is_finite() || !intercept.is_finite() {
            return Err(Error::InvalidSpec(format!(
                "affine gamma needs a finite nonzero slope, got {slope}"
            )));
        }
        Ok(GammaFunction {
            repr: Repr::Affine { slope, intercept },
        })
    }

    /// Builds a power-branch γ with caller-chosen linear constants, skipping
    /// the continuity conditions. Only meant for fault injection.
    #[doc(hidden)]
    pub fn from_parts_unchecked(spec: GammaSpec, c1: f64, c2: f64) -> Self {
        let x_lin = spec.a[spec.a.len() - 1] + 1.0;
        let shift = spec.a.iter().zip(&spec.beta).map(|(&a, &b)| a.powf(b)).sum();
        GammaFunction {
            repr: Repr::PiecewiseRoot {
                spec,
                c1,
                c2,
                x_lin,
                shift,
            },
        }
    }

    pub fn kind(&self) -> GammaKind {
        match self.repr {
            Repr::PiecewiseRoot { .. } => GammaKind::PiecewiseRoot,
            Repr::Affine { .. } => GammaKind::Affine,
        }
    }

    pub fn spec(&self) -> Option<&GammaSpec> {
        match &self.repr {
            Repr::PiecewiseRoot { spec, .. } => Some(spec),
            Repr::Affine { .. } => None,
        }
    }

    /// Slope and intercept of the linear part (`c1`, `c2` for the power
    /// construction).
    pub fn linear_coefficients(&self) -> (f64, f64) {
        match self.repr {
            Repr::PiecewiseRoot { c1, c2, .. } => (c1, c2),
            Repr::Affine { slope, intercept } => (slope, intercept),
        }
    }

    /// Start of the linear branch, `a_N + 1`.
    pub fn x_lin(&self) -> Option<f64> {
        match self.repr {
            Repr::PiecewiseRoot { x_lin, .. } => Some(x_lin),
            Repr::Affine { .. } => None,
        }
    }

    pub fn r_max(&self) -> usize {
        match &self.repr {
            Repr::PiecewiseRoot { spec, .. } => spec.r_max,
            Repr::Affine { .. } => usize::MAX,
        }
    }

    pub fn singular_points(&self) -> &[f64] {
        match &self.repr {
            Repr::PiecewiseRoot { spec, .. } => &spec.a,
            Repr::Affine { .. } => &[],
        }
    }

    /// Singular points followed by `x_lin`: every place where γ is not smooth.
    pub fn kinks(&self) -> Vec<f64> {
        let mut v = self.singular_points().to_vec();
        v.extend(self.x_lin());
        v
    }

    /// `Σ β_k a_k^{β_k - 1}`, the slope of γ at the origin.
    pub fn slope_at_zero(&self) -> f64 {
        match &self.repr {
            Repr::PiecewiseRoot { spec, .. } => spec
                .a
                .iter()
                .zip(&spec.beta)
                .map(|(&a, &b)| b * a.powf(b - 1.0))
                .sum(),
            Repr::Affine { slope, .. } => *slope,
        }
    }

    /// `γ(x)` without domain checks; the power branch is extended oddly to
    /// negative `x`.
    pub fn value(&self, x: f64) -> f64 {
        match &self.repr {
            Repr::PiecewiseRoot {
                spec,
                c1,
                c2,
                x_lin,
                shift,
            } => {
                if x >= *x_lin {
                    c1 * x + c2
                } else {
                    let mut s = *shift;
                    for (&a, &b) in spec.a.iter().zip(&spec.beta) {
                        let u = x - a;
                        s += u.signum() * u.abs().powf(b);
                    }
                    s
                }
            }
            Repr::Affine { slope, intercept } => slope * x + intercept,
        }
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        if !x.is_finite() {
            return Err(Error::Domain {
                value: x,
                reason: "argument must be finite",
            });
        }
        if self.kind() == GammaKind::PiecewiseRoot && x < 0.0 {
            return Err(Error::Domain {
                value: x,
                reason: "gamma is defined on [0, inf)",
            });
        }
        Ok(self.value(x))
    }

    /// `γ^{(j)}(x)`, closed form.
    pub fn derivative(&self, x: f64, j: usize) -> Result<f64> {
        if j == 0 {
            return self.eval(x);
        }
        if let Repr::PiecewiseRoot { spec, .. } = &self.repr {
            if j > spec.r_max + 1 {
                return Err(Error::OrderTooHigh {
                    order: j,
                    max: spec.r_max + 1,
                });
            }
        }
        self.eval(x)?;
        if let Some(index) = self.singular_index(x) {
            return Err(Error::SingularPoint { x, index });
        }
        Ok(self.derivative_unchecked(x, j))
    }

    fn singular_index(&self, x: f64) -> Option<usize> {
        self.singular_points().iter().position(|&a| a == x).map(|i| i + 1)
    }

    /// `γ^{(j)}(x)` for `j >= 1` with no checks; infinite at `a_k`.
    pub fn derivative_unchecked(&self, x: f64, j: usize) -> f64 {
        match &self.repr {
            Repr::PiecewiseRoot { spec, c1, x_lin, .. } => {
                if x >= *x_lin {
                    return if j == 1 { *c1 } else { 0.0 };
                }
                spec.a
                    .iter()
                    .zip(&spec.beta)
                    .map(|(&a, &b)| power_term_derivative(x - a, b, j))
                    .sum()
            }
            Repr::Affine { slope, .. } => {
                if j == 1 {
                    *slope
                } else {
                    0.0
                }
            }
        }
    }

    /// `γ⁻¹(y)`.
    pub fn eval_inverse(&self, y: f64) -> Result<f64> {
        if !y.is_finite() {
            return Err(Error::Domain {
                value: y,
                reason: "argument must be finite",
            });
        }
        match &self.repr {
            Repr::Affine { slope, intercept } => Ok((y - intercept) / slope),
            Repr::PiecewiseRoot { c1, c2, x_lin, .. } => {
                if y < 0.0 {
                    return Err(Error::Domain {
                        value: y,
                        reason: "the inverse is defined on [0, inf)",
                    });
                }
                if y >= c1 * x_lin + c2 {
                    return Ok(((y - c2) / c1).max(*x_lin));
                }
                Ok(self.invert_power_branch(y, *x_lin))
            }
        }
    }

    /// `γ⁻¹(y)` without checks, for `y` in the range of γ.
    pub fn inverse_unchecked(&self, y: f64) -> f64 {
        match &self.repr {
            Repr::Affine { slope, intercept } => (y - intercept) / slope,
            Repr::PiecewiseRoot { c1, c2, x_lin, .. } => {
                if y >= c1 * x_lin + c2 {
                    ((y - c2) / c1).max(*x_lin)
                } else if y <= 0.0 {
                    0.0
                } else {
                    self.invert_power_branch(y, *x_lin)
                }
            }
        }
    }

    fn invert_power_branch(&self, y: f64, x_lin: f64) -> f64 {
        if let Some(&a) = self.singular_points().iter().find(|&&a| self.value(a) == y) {
            return a;
        }
        let (mut lo, mut hi) = (0.0_f64, x_lin);
        // the tangent and secant bounds on [0, a_1] shrink the first bracket
        let a1 = self.singular_points()[0];
        let ya1 = self.value(a1);
        if y <= ya1 {
            lo = a1 / ya1 * y * (1.0 - 1e-12);
            hi = (y / self.slope_at_zero() * (1.0 + 1e-12)).min(a1);
        } else {
            lo = lo.max(a1);
        }
        while hi - lo > 1e-8 {
            let mid = 0.5 * (lo + hi);
            if self.value(mid) < y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut x = 0.5 * (lo + hi);
        for _ in 0..50 {
            let fx = self.value(x) - y;
            if fx == 0.0 {
                return x;
            }
            if fx < 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            let d = self.derivative_unchecked(x, 1);
            let mut next = x - fx / d;
            if !(next > lo && next < hi) || !d.is_finite() {
                next = 0.5 * (lo + hi);
            }
            if (next - x).abs() <= 2.0 * f64::EPSILON * x.abs().max(1e-300) || next == x {
                return next;
            }
            x = next;
        }
        x
    }

    /// Derivatives `γ'(x), …, γ^{(n)}(x)` of `γ` itself.
    pub fn jet(&self, x: f64, n: usize) -> Vec<f64> {
        (1..=n).map(|j| self.derivative_unchecked(x, j)).collect()
    }

    /// `[(γ⁻¹)'(γ(x)), …, (γ⁻¹)^{(n)}(γ(x))]` by forward substitution in the
    /// triangular Faà di Bruno system of `γ⁻¹∘γ = id`. At a singular point
    /// every entry is the limit value 0.
    pub fn inverse_jet_at(&self, x: f64, n: usize) -> Vec<f64> {
        if self.singular_index(x).is_some() {
            return vec![0.0; n];
        }
        let g = self.jet(x, n);
        if !g[0].is_finite() {
            return vec![0.0; n];
        }
        let table = match BellTable::new(&g, n) {
            Ok(t) => t,
            Err(_) => return vec![0.0; n],
        };
        let mut h = vec![0.0; n];
        for m in 1..=n {
            let rhs = if m == 1 { 1.0 } else { 0.0 };
            let acc: f64 = (1..m).map(|l| h[l - 1] * table.get(m, l)).sum();
            h[m - 1] = (rhs - acc) / table.get(m, m);
        }
        if h.iter().any(|v| !v.is_finite()) {
            return vec![0.0; n];
        }
        h
    }

    /// `(γ⁻¹)^{(r)}(y)` by Cramer's rule on the Bell-polynomial system.
    pub fn inverse_derivative(&self, y: f64, r: usize) -> Result<f64> {
        self.inverse_derivative_detail(y, r).map(|d| d.value)
    }

    pub fn inverse_derivative_detail(&self, y: f64, r: usize) -> Result<InverseDerivative> {
        if r == 0 {
            return Err(Error::InvalidArgument("derivative order must be positive".into()));
        }
        if r > self.r_max() {
            return Err(Error::OrderTooHigh {
                order: r,
                max: self.r_max(),
            });
        }
        let x = self.eval_inverse(y)?;
        let at_breakpoint = match &self.repr {
            Repr::PiecewiseRoot { c1, c2, x_lin, .. } => y == c1 * x_lin + c2,
            Repr::Affine { .. } => false,
        };
        let value = match self.near_singular(y, x) {
            Some((k, u)) => {
                let jet = self.jet_near(k, u, x, r);
                cramer(&jet)
            }
            None => {
                if self.singular_index(x).is_some() {
                    0.0
                } else {
                    cramer(&self.jet(x, r))
                }
            }
        };
        Ok(InverseDerivative {
            value,
            at_breakpoint,
        })
    }

    /// For `y` close to some `γ(a_k)` on the power branch, the offset
    /// `u = γ⁻¹(y) - a_k` resolved to full relative precision.
    fn near_singular(&self, y: f64, x: f64) -> Option<(usize, f64)> {
        let Repr::PiecewiseRoot { spec, x_lin, .. } = &self.repr else {
            return None;
        };
        if x >= *x_lin {
            return None;
        }
        let k = spec
            .a
            .iter()
            .position(|&a| (x - a).abs() <= 1e-3 * a.max(1.0))?;
        let (a, b) = (spec.a[k], spec.beta[k]);
        let mut u = x - a;
        for _ in 0..8 {
            let rest = self.value_without(k, a + u);
            let d = y - rest;
            let next = d.signum() * d.abs().powf(1.0 / b);
            if next == u {
                break;
            }
            u = next;
        }
        Some((k, u))
    }

    fn value_without(&self, k: usize, x: f64) -> f64 {
        let Repr::PiecewiseRoot { spec, shift, .. } = &self.repr else {
            return self.value(x);
        };
        let mut s = *shift;
        for (i, (&a, &b)) in spec.a.iter().zip(&spec.beta).enumerate() {
            if i != k {
                let u = x - a;
                s += u.signum() * u.abs().powf(b);
            }
        }
        s
    }

    fn jet_near(&self, k: usize, u: f64, x: f64, n: usize) -> Vec<f64> {
        let spec = self.spec().expect("power construction");
        (1..=n)
            .map(|j| {
                spec.a
                    .iter()
                    .zip(&spec.beta)
                    .enumerate()
                    .map(|(i, (&a, &b))| {
                        let off = if i == k { u } else { x - a };
                        power_term_derivative(off, b, j)
                    })
                    .sum()
            })
            .collect()
    }
}

/// `(γ⁻¹)^{(r)}` from the jet `[γ', …, γ^{(r)}]` by Cramer's rule:
/// `(-1)^{r+1} det(B) / (γ')^{r(r+1)/2}` with `B = (B_{n,l})`,
/// `n = 2..r`, `l = 1..r-1`.
fn cramer(g: &[f64]) -> f64 {
    let r = g.len();
    let d1 = g[0];
    if !d1.is_finite() || d1 == 0.0 {
        return 0.0;
    }
    if r == 1 {
        return 1.0 / d1;
    }
    let table = BellTable::new(g, r).expect("jet has r entries");
    let m = r - 1;
    let b = DMatrix::from_fn(m, m, |i, j| table.get(i + 2, j + 1));
    let sign = if (r + 1) % 2 == 0 { 1.0 } else { -1.0 };
    let v = sign * b.determinant() / d1.powi((r * (r + 1) / 2) as i32);
    if v.is_finite() {
        v
    } else {
        0.0
    }
}

/// `d^j/du^j [sgn(u)|u|^b]`.
fn power_term_derivative(u: f64, b: f64, j: usize) -> f64 {
    let mut coef = 1.0;
    for i in 0..j {
        coef *= b - i as f64;
    }
    let sign = if j % 2 == 1 { 1.0 } else { u.signum() };
    coef * sign * u.abs().powf(b - j as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn default_gamma() -> GammaFunction {
        GammaFunction::build(GammaSpec::default()).unwrap()
    }

    #[test]
    fn constants_of_the_default_spec() {
        let g = default_gamma();
        assert_eq!(g.linear_coefficients(), (0.25, 1.5));
        assert_eq!(g.eval(0.0).unwrap(), 0.0);
        assert_eq!(g.eval(2.0).unwrap(), 2.0);
        let below = g.value(2.0 - 1e-12);
        assert!((below - 2.0).abs() < 1e-11);
        assert_eq!(g.eval_inverse(2.0).unwrap(), 2.0);
    }

    #[test]
    fn spec_validation() {
        assert!(GammaSpec::new(vec![1.0, 1.0], vec![0.1, 0.1], 1).is_err());
        assert!(GammaSpec::new(vec![1.0], vec![0.5], 2).is_err());
        assert!(GammaSpec::new(vec![0.0], vec![0.2], 1).is_err());
        assert!(GammaSpec::new(vec![1.0], vec![0.2, 0.1], 1).is_err());
        assert!(GammaSpec::new(vec![0.5, 2.0], vec![0.2, 0.3], 3).is_ok());
    }

    #[test]
    fn affine_variant() {
        let g = GammaFunction::affine(2.0, 1.0).unwrap();
        assert_eq!(g.eval(3.0).unwrap(), 7.0);
        assert_eq!(g.derivative(5.0, 1).unwrap(), 2.0);
        assert_eq!(g.inverse_derivative(4.0, 1).unwrap(), 0.5);
        assert_eq!(g.inverse_derivative(4.0, 2).unwrap(), 0.0);
        assert!(GammaFunction::affine(0.0, 1.0).is_err());
    }

    #[test]
    fn derivative_formula_and_singularity() {
        let g = default_gamma();
        let d = g.derivative(0.5, 1).unwrap();
        assert!((d - 0.25 * 0.5f64.powf(-0.75)).abs() < 1e-15);
        assert!(matches!(g.derivative(1.0, 1), Err(Error::SingularPoint { index: 1, .. })));
        assert_eq!(g.derivative(3.0, 1).unwrap(), 0.25);
        assert_eq!(g.derivative(3.0, 2).unwrap(), 0.0);
        assert!(g.derivative(0.5, 5).is_err());
        assert!(g.eval(-0.1).is_err());
        assert!(g.eval_inverse(-0.1).is_err());
    }

    #[test]
    fn derivative_against_central_differences() {
        let g = default_gamma();
        for i in 0..200 {
            let x = 0.013 + i as f64 * 0.0149;
            if (x - 1.0).abs() < 0.02 || (x - 2.0).abs() < 0.02 {
                continue;
            }
            let h = 1e-6 * x.max(1e-2);
            let fd = (g.value(x + h) - g.value(x - h)) / (2.0 * h);
            let d = g.derivative(x, 1).unwrap();
            assert!(((fd - d) / d).abs() < 1e-6, "x = {x}: {fd} vs {d}");
        }
    }

    #[test]
    fn c1_join() {
        let g = default_gamma();
        let (c1, _) = g.linear_coefficients();
        let left = g.derivative(2.0 - 1e-9, 1).unwrap();
        assert!((left - c1).abs() < 1e-9);
    }

    #[test]
    fn inverse_derivative_vanishes_at_singular_point() {
        let g = default_gamma();
        let y = g.value(1.0);
        for r in 1..=3 {
            assert_eq!(g.inverse_derivative(y, r).unwrap(), 0.0);
            assert!(g.inverse_derivative(y + 1e-6, r).unwrap().abs() < 1e-3);
            assert!(g.inverse_derivative(y - 1e-6, r).unwrap().abs() < 1e-3);
        }
        assert!(g.inverse_derivative(y, 4).is_err());
    }

    #[test]
    fn breakpoint_is_flagged() {
        let g = default_gamma();
        let d = g.inverse_derivative_detail(2.0, 2).unwrap();
        assert!(d.at_breakpoint);
        assert_eq!(d.value, 0.0);
        assert!(!g.inverse_derivative_detail(1.7, 2).unwrap().at_breakpoint);
    }

    #[test]
    fn cramer_matches_forward_substitution() {
        let g = GammaFunction::build(GammaSpec::new(vec![0.5, 2.0], vec![0.2, 0.3], 3).unwrap())
            .unwrap();
        for &x in &[0.1, 0.7, 1.3, 2.4, 2.9, 4.0] {
            let jet = g.inverse_jet_at(x, 3);
            let y = g.value(x);
            for r in 1..=3 {
                let c = g.inverse_derivative(y, r).unwrap();
                assert!((c - jet[r - 1]).abs() <= 1e-9 * (1.0 + c.abs()), "x={x} r={r}");
            }
        }
    }

    proptest! {
        #[test]
        fn roundtrip_and_monotone(x in 0.0f64..6.0, dx in 1e-6f64..1.0) {
            let g = default_gamma();
            let y = g.eval(x).unwrap();
            let back = g.eval_inverse(y).unwrap();
            prop_assert!((back - x).abs() <= 1e-10 * x.max(1e-3));
            prop_assert!(g.eval(x + dx).unwrap() > y);
        }

        #[test]
        fn sandwich_on_first_interval(x in 0.0f64..1.0) {
            let g = default_gamma();
            let tangent = g.slope_at_zero();
            let secant = g.value(1.0);
            let y = g.value(x);
            prop_assert!(tangent * x <= y * (1.0 + 1e-14));
            prop_assert!(y <= secant * x * (1.0 + 1e-14));
            let yy = x * secant;
            let inv = g.eval_inverse(yy).unwrap();
            prop_assert!(yy / secant <= inv * (1.0 + 1e-12));
            prop_assert!(inv <= yy / tangent * (1.0 + 1e-12));
        }
    }
}
