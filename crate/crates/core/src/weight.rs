//! Laguerre weights, weighted `L^p` norms on subintervals of `(0, ∞)`,
//! window intervals and the admissible time horizons.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::calculus::RealFunction;
use crate::error::{Error, Result};
use crate::gamma::GammaFunction;
use crate::quadrature::{integrate_long, AdaptiveOptions};

/// `w_α(x) = x^α e^{-x}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaguerreWeight {
    pub alpha: f64,
}

impl LaguerreWeight {
    pub fn new(alpha: f64) -> Self {
        LaguerreWeight { alpha }
    }

    /// Negative exponents are outside the standard setting and only work
    /// with `α > -1/p`.
    pub fn is_nonstandard(&self) -> bool {
        self.alpha < 0.0
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        if x < 0.0 || (x == 0.0 && self.alpha <= 0.0) || !x.is_finite() {
            return Err(Error::Domain {
                value: x,
                reason: "the Laguerre weight lives on (0, inf)",
            });
        }
        Ok(self.value(x))
    }

    /// `w_α(y) / w_α(x)`, computed without underflow.
    pub fn ratio(&self, y: f64, x: f64) -> f64 {
        (self.alpha * (y / x).ln() - (y - x)).exp()
    }

    pub fn value(&self, x: f64) -> f64 {
        if self.alpha == 0.0 {
            (-x).exp()
        } else if x == 0.0 {
            0.0
        } else {
            (self.alpha * x.ln() - x).exp()
        }
    }
}

/// The exponent `p` of an `L^p` norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Infinity,
}

impl Exponent {
    pub fn new(p: f64) -> Result<Self> {
        if p.is_infinite() && p > 0.0 {
            Ok(Exponent::Infinity)
        } else if p >= 1.0 && p.is_finite() {
            Ok(Exponent::Finite(p))
        } else {
            Err(Error::InvalidArgument(format!("norm exponent must be >= 1, got {p}")))
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Exponent::Infinity)
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Finite(p) => write!(f, "{p}"),
            Exponent::Infinity => write!(f, "inf"),
        }
    }
}

impl FromStr for Exponent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "infinity" | "Inf" | "∞" => Ok(Exponent::Infinity),
            other => {
                let p: f64 = other
                    .parse()
                    .map_err(|_| Error::InvalidArgument(format!("cannot read norm exponent `{other}`")))?;
                Exponent::new(p)
            }
        }
    }
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Exponent::Finite(p) => s.serialize_f64(*p),
            Exponent::Infinity => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Int(i64),
            Text(String),
        }
        let p = match Raw::deserialize(d)? {
            Raw::Num(p) => Exponent::new(p),
            Raw::Int(p) => Exponent::new(p as f64),
            Raw::Text(t) => t.parse(),
        };
        p.map_err(serde::de::Error::custom)
    }
}

/// `p` and the interval `(lo, hi)`, `hi` possibly infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormSpec {
    pub p: Exponent,
    pub lo: f64,
    pub hi: f64,
}

impl NormSpec {
    pub fn new(p: Exponent, lo: f64, hi: f64) -> Result<Self> {
        if !(lo >= 0.0 && hi > lo) {
            return Err(Error::InvalidArgument(format!("empty norm interval ({lo}, {hi})")));
        }
        Ok(NormSpec { p, lo, hi })
    }
}

/// Numerical settings shared by every norm evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
    pub singular_points: Vec<f64>,
    /// Grid points per unit length for `p = ∞`.
    pub sup_grid_density: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            rel_tol: 1e-9,
            abs_tol: 1e-14,
            max_subdivisions: 4000,
            singular_points: Vec::new(),
            sup_grid_density: 64,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::InvalidArgument("quadrature tolerances must be positive".into()));
        }
        if self.max_subdivisions == 0 || self.sup_grid_density == 0 {
            return Err(Error::InvalidArgument(
                "subdivision limit and sup grid density must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn adaptive(&self) -> AdaptiveOptions {
        AdaptiveOptions {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            max_subdivisions: self.max_subdivisions,
        }
    }

    pub fn with_singular_points(&self, extra: &[f64]) -> QuadratureConfig {
        let mut c = self.clone();
        c.singular_points.extend_from_slice(extra);
        c
    }
}

/// A norm value with an estimate of its quadrature error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormValue {
    pub value: f64,
    pub error_estimate: f64,
}

/// `‖f w_α‖_{L^p(lo, hi)}`.
pub fn weighted_lp_norm(
    f: &dyn RealFunction,
    w: &LaguerreWeight,
    spec: &NormSpec,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    let mut cfg = cfg.clone();
    cfg.singular_points.extend(f.breakpoints());
    weighted_lp_norm_fn(|x| f.eval(x), w, spec, &cfg).map(|v| v.value)
}

/// [`weighted_lp_norm`] for a plain closure, with the error estimate.
pub fn weighted_lp_norm_fn(
    f: impl Fn(f64) -> f64,
    w: &LaguerreWeight,
    spec: &NormSpec,
    cfg: &QuadratureConfig,
) -> Result<NormValue> {
    cfg.validate()?;
    match spec.p {
        Exponent::Finite(p) => finite_norm(&f, w, p, spec.lo, spec.hi, cfg),
        Exponent::Infinity => {
            let v = sup_norm(&f, w, spec.lo, spec.hi, cfg)?;
            Ok(NormValue {
                value: v,
                error_estimate: 0.0,
            })
        }
    }
}

fn finite_norm(
    f: &impl Fn(f64) -> f64,
    w: &LaguerreWeight,
    p: f64,
    lo: f64,
    hi: f64,
    cfg: &QuadratureConfig,
) -> Result<NormValue> {
    let integrand = |x: f64| {
        let v = f(x);
        if !v.is_finite() {
            return f64::NAN;
        }
        let a = (v * w.value(x)).abs();
        if p == 1.0 {
            a
        } else if p == 2.0 {
            a * a
        } else {
            a.powf(p)
        }
    };
    let alpha = w.alpha;
    // beyond this point the weight alone is below 1e-300
    let negligible = move |x: f64| p * (alpha * x.max(1.0).ln() - x) < -690.0;
    let res = integrate_long(integrand, lo, hi, &cfg.singular_points, &cfg.adaptive(), negligible)?;
    let res = res.require_converged()?;
    let value = res.value.max(0.0).powf(1.0 / p);
    let error_estimate = if res.value > 0.0 {
        value / (p * res.value) * res.abs_error
    } else {
        res.abs_error.powf(1.0 / p)
    };
    Ok(NormValue { value, error_estimate })
}

fn sup_norm(
    f: &impl Fn(f64) -> f64,
    w: &LaguerreWeight,
    lo: f64,
    hi: f64,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    let h = |x: f64| -> Result<f64> {
        let v = f(x);
        if !v.is_finite() {
            return Err(Error::NonFinite { x });
        }
        Ok((v * w.value(x)).abs())
    };
    let grid = sup_grid(lo, hi, cfg);
    let mut vals = Vec::with_capacity(grid.len());
    let mut best = 0.0f64;
    let mut quiet = 0;
    let mut used = 0;
    for &x in &grid {
        let v = h(x)?;
        vals.push(v);
        used += 1;
        best = best.max(v);
        // the tail is sampled geometrically; stop once the weight has won
        if x > lo + 64.0 && x > 4.0 * w.alpha.max(1.0) {
            if v <= 1e-18 * best {
                quiet += 1;
                if quiet >= 8 {
                    break;
                }
            } else {
                quiet = 0;
            }
        }
    }
    let grid = &grid[..used];
    if best == 0.0 {
        return Ok(0.0);
    }
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&i, &j| vals[j].total_cmp(&vals[i]));
    for &i in order.iter().take(4) {
        let a = grid[i.saturating_sub(1)];
        let b = grid[(i + 1).min(grid.len() - 1)];
        if b > a {
            best = best.max(golden_max(&h, a, b)?);
        }
    }
    Ok(best)
}

fn golden_max(h: &impl Fn(f64) -> Result<f64>, mut a: f64, mut b: f64) -> Result<f64> {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = h(c)?;
    let mut fd = h(d)?;
    let mut best = fc.max(fd);
    for _ in 0..40 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = h(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = h(d)?;
        }
        best = best.max(fc).max(fd);
        if b - a <= 1e-13 * b.abs().max(1e-300) {
            break;
        }
    }
    Ok(best)
}

/// Sample points for a supremum over `[lo, hi]`: uniform with the configured
/// density, geometric near `lo` and around singular points, geometric beyond
/// 64 units from `lo`.
pub fn sup_grid(lo: f64, hi: f64, cfg: &QuadratureConfig) -> Vec<f64> {
    let d = cfg.sup_grid_density as f64;
    let uniform_end = hi.min(lo + 64.0);
    let n = ((uniform_end - lo) * d).ceil().max(2.0) as usize;
    let mut pts: Vec<f64> = (0..=n).map(|i| lo + (uniform_end - lo) * i as f64 / n as f64).collect();
    let q = 1.0 + 1.0 / d.sqrt();
    let span = (uniform_end - lo).max(1e-300);
    let start = if lo > 0.0 { lo } else { span * 1e-12 };
    let mut x = start;
    let near_top = lo + span.min(1.0);
    // geometric offsets from lo resolve behavior at the left end
    let mut off = span * 1e-9;
    while off < span.min(1.0) {
        pts.push(lo + off);
        off *= q;
    }
    if lo == 0.0 {
        while x < near_top {
            pts.push(x);
            x *= q;
        }
    }
    for &a in &cfg.singular_points {
        if a > lo && a < hi {
            pts.push(a);
            let mut e = 1e-9 * a.max(1.0);
            while e < 0.05 * a.max(1.0) {
                if a - e > lo {
                    pts.push(a - e);
                }
                if a + e < hi {
                    pts.push(a + e);
                }
                e *= q;
            }
        }
    }
    if hi > uniform_end {
        let mut x = uniform_end;
        let growth = 1.0 + 4.0 / d;
        let cap = if hi.is_finite() { hi } else { f64::MAX };
        while x < cap && x < 1e6 {
            x = (x * growth).min(cap);
            pts.push(x);
        }
    }
    pts.retain(|&p| p >= lo && p <= hi && p.is_finite());
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

/// `I_{rh,γ} = [4 A₁ r² s², A₂ / s²]` with `s = γ⁻¹(h)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowInterval {
    pub r: usize,
    pub h: f64,
    pub a1: f64,
    pub a2: f64,
    /// `γ⁻¹(h)`.
    pub s: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Largest `h` for which the window is nonempty:
/// `γ((A₂/A₁)^{1/4} / √(2r))`.
pub fn admissibility_bound(g: &GammaFunction, r: usize, a1: f64, a2: f64) -> f64 {
    g.value((a2 / a1).powf(0.25) / (2.0 * r as f64).sqrt())
}

pub fn window_interval(g: &GammaFunction, r: usize, h: f64, a1: f64, a2: f64) -> Result<WindowInterval> {
    if r == 0 || !(a1 > 0.0 && a2 > 0.0) {
        return Err(Error::InvalidArgument("window needs r >= 1 and positive constants".into()));
    }
    let bound = admissibility_bound(g, r, a1, a2);
    if !(h > 0.0) || h > bound * (1.0 + 1e-12) {
        return Err(Error::InadmissibleStep { h, bound });
    }
    let s = g.eval_inverse(h)?;
    let rf = r as f64;
    let lo = 4.0 * a1 * rf * rf * s * s;
    let hi = a2 / (s * s);
    Ok(WindowInterval {
        r,
        h,
        a1,
        a2,
        s,
        lo,
        hi,
    })
}

/// `(c_low, c_high)` with `c_low ≤ w_α(y)/w_α(x) ≤ c_high` whenever `x` lies
/// in the window and `|x − y| ≤ r γ⁻¹(h) √x`.
pub fn weight_equivalence_bounds(r: usize, a1: f64, a2: f64, alpha: f64) -> Result<(f64, f64)> {
    if a1 < 0.25 {
        return Err(Error::InvalidArgument(format!("A1 = {a1} must be at least 1/4")));
    }
    if alpha < 0.0 || a2 < 0.0 {
        return Err(Error::InvalidArgument("alpha and A2 must be nonnegative".into()));
    }
    let e = r as f64 * a2.sqrt();
    let q = 2.0 * a1.sqrt();
    let low = (-e).exp() * ((q - 1.0) / q).powf(alpha);
    let high = e.exp() * ((q + 1.0) / q).powf(alpha);
    Ok((low, high))
}

/// Which admissibility condition on `t` to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HorizonVariant {
    /// The conditions needed by the partition and Steklov construction.
    UpperConstruction,
    /// The conditions needed for the modulus-by-K-functional direction.
    LowerBound,
}

/// The eight quantities bounding `t` for the constructive direction.
pub fn upper_horizon_entries(g: &GammaFunction, r: usize, a1: f64, a2: f64) -> Result<[f64; 8]> {
    let spec = g
        .spec()
        .ok_or_else(|| Error::InvalidArgument("horizons need the power construction of gamma".into()))?;
    let first = spec.a[0];
    let xl = spec.a[spec.a.len() - 1] + 1.0;
    let rf = r as f64;
    let sa = a1.sqrt();
    let q = 2.0 * sa / (1.0 + 2.0 * sa);
    Ok([
        0.5,
        first,
        g.value(1.0),
        admissibility_bound(g, r, a1, a2),
        g.value(first * sa / (rf * (1.0 + 2.0 * sa)) * q.sqrt()),
        g.value((q / xl).sqrt()),
        g.value(xl.sqrt() / (4.0 * a1 * rf)),
        g.value(q * (a2 / xl).sqrt()),
    ])
}

pub fn max_time_horizon(g: &GammaFunction, r: usize, a1: f64, a2: f64, variant: HorizonVariant) -> Result<f64> {
    match variant {
        HorizonVariant::UpperConstruction => Ok(upper_horizon_entries(g, r, a1, a2)?
            .into_iter()
            .fold(f64::INFINITY, f64::min)),
        HorizonVariant::LowerBound => {
            let spec = g.spec().ok_or_else(|| {
                Error::InvalidArgument("horizons need the power construction of gamma".into())
            })?;
            Ok(admissibility_bound(g, r, a1, a2).min(g.value(spec.a[0])))
        }
    }
}

/// Extra conditions used when bounding the complete modulus by the full
/// K-functional; the last one only applies for `α > 0`.
pub fn complete_modulus_horizon(g: &GammaFunction, r: usize, a1: f64, a2: f64, alpha: f64) -> Result<f64> {
    let spec = g
        .spec()
        .ok_or_else(|| Error::InvalidArgument("horizons need the power construction of gamma".into()))?;
    let rf = r as f64;
    let xl = spec.a[spec.a.len() - 1] + 1.0;
    let mut t = max_time_horizon(g, r, a1, a2, HorizonVariant::LowerBound)?
        .min(g.value((spec.a[0] / (8.0 * a1 * rf * rf)).sqrt()))
        .min(g.value((a2 / xl).sqrt()));
    if alpha > 0.0 {
        t = t.min(g.value((a2 / (2.0 * alpha)).sqrt()));
    }
    Ok(t)
}

/// `A₁ = 1`, `A₂ = a₁² / 8`.
pub fn default_constants(g: &GammaFunction) -> (f64, f64) {
    let a1 = g.singular_points().first().copied().unwrap_or(1.0);
    (1.0, a1 * a1 / 8.0)
}

/// The primed pair `(√A₁(1+2√A₁)/2, 2√A₁A₂/(1+2√A₁))`.
pub fn primed_constants(a1: f64, a2: f64) -> (f64, f64) {
    let sa = a1.sqrt();
    (0.5 * sa * (1.0 + 2.0 * sa), 2.0 * sa * a2 / (1.0 + 2.0 * sa))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::FnFunction;
    use crate::gamma::GammaSpec;
    use proptest::prelude::*;

    fn gamma() -> GammaFunction {
        GammaFunction::build(GammaSpec::default()).unwrap()
    }

    fn norm(f: impl Fn(f64) -> f64, alpha: f64, p: Exponent, lo: f64, hi: f64) -> f64 {
        weighted_lp_norm_fn(
            f,
            &LaguerreWeight::new(alpha),
            &NormSpec::new(p, lo, hi).unwrap(),
            &QuadratureConfig::default(),
        )
        .unwrap()
        .value
    }

    #[test]
    fn weight_values() {
        assert_eq!(LaguerreWeight::new(0.0).eval(0.7).unwrap(), (-0.7f64).exp());
        assert!((LaguerreWeight::new(1.0).eval(1.0).unwrap() - (-1f64).exp()).abs() < 1e-16);
        assert_eq!(LaguerreWeight::new(2.0).eval(0.0).unwrap(), 0.0);
        assert!(LaguerreWeight::new(0.0).eval(0.0).is_err());
        assert!(LaguerreWeight::new(0.0).eval(-1.0).is_err());
    }

    #[test]
    fn closed_form_norms() {
        let v = norm(|_| 1.0, 0.0, Exponent::Finite(2.0), 0.0, f64::INFINITY);
        assert!((v - 0.5f64.sqrt()).abs() < 1e-8 * v);
        let v = norm(|_| 1.0, 1.0, Exponent::Finite(1.0), 0.0, f64::INFINITY);
        assert!((v - 1.0).abs() < 1e-8);
        assert_eq!(norm(|_| 0.0, 1.0, Exponent::Finite(2.0), 0.0, f64::INFINITY), 0.0);
        let v = norm(|_| 1.0, 1.0, Exponent::Infinity, 0.0, f64::INFINITY);
        assert!((v - (-1f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn real_function_entry_point() {
        let f = FnFunction::new(|x| (x - 1.0).abs().sqrt()).with_breakpoints(vec![1.0]);
        let v = weighted_lp_norm(
            &f,
            &LaguerreWeight::new(0.0),
            &NormSpec::new(Exponent::Finite(2.0), 0.0, 3.0).unwrap(),
            &QuadratureConfig::default(),
        )
        .unwrap();
        // ∫ |x-1| e^{-2x} over (0, 3)
        let exact: f64 = {
            let a = |x: f64| (-2.0 * x).exp() * (-(x - 1.0) / 2.0 - 0.25);
            let b = |x: f64| (-2.0 * x).exp() * (-(1.0 - x) / 2.0 + 0.25);
            (b(1.0) - b(0.0)) + (a(3.0) - a(1.0))
        };
        assert!((v - exact.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn exponent_parsing() {
        assert_eq!("inf".parse::<Exponent>().unwrap(), Exponent::Infinity);
        assert_eq!("2".parse::<Exponent>().unwrap(), Exponent::Finite(2.0));
        assert!("0.5".parse::<Exponent>().is_err());
        assert!(Exponent::new(f64::INFINITY).unwrap().is_infinite());
    }

    #[test]
    fn window_examples() {
        let g = gamma();
        let h = g.value(0.1);
        let w = window_interval(&g, 1, h, 1.0, 0.125).unwrap();
        assert!((w.lo - 0.04).abs() < 1e-12 && (w.hi - 12.5).abs() < 1e-9);
        let b = admissibility_bound(&g, 2, 1.0, 0.125);
        let w = window_interval(&g, 2, b, 1.0, 0.125).unwrap();
        assert!(w.lo <= w.hi * (1.0 + 1e-9));
        assert!(matches!(
            window_interval(&g, 2, b * 1.01, 1.0, 0.125),
            Err(Error::InadmissibleStep { .. })
        ));
    }

    #[test]
    fn equivalence_constants() {
        let (l, h) = weight_equivalence_bounds(1, 1.0, 0.25, 0.0).unwrap();
        assert!((l - (-0.5f64).exp()).abs() < 1e-15 && (h - 0.5f64.exp()).abs() < 1e-15);
        let (l, h) = weight_equivalence_bounds(1, 1.0, 0.25, 1.0).unwrap();
        assert!((l - 0.5 * (-0.5f64).exp()).abs() < 1e-15);
        assert!((h - 1.5 * 0.5f64.exp()).abs() < 1e-15);
        assert_eq!(weight_equivalence_bounds(3, 1.0, 0.0, 0.0).unwrap(), (1.0, 1.0));
        assert!(weight_equivalence_bounds(1, 0.2, 0.1, 0.0).is_err());
    }

    #[test]
    fn horizons() {
        let g = gamma();
        let t1 = max_time_horizon(&g, 1, 1.0, 0.125, HorizonVariant::UpperConstruction).unwrap();
        let t2 = max_time_horizon(&g, 2, 1.0, 0.125, HorizonVariant::UpperConstruction).unwrap();
        assert!((t1 - 0.0446).abs() < 5e-4, "{t1}");
        assert!((t2 - 0.0359).abs() < 5e-4, "{t2}");
        assert!((g.eval_inverse(t1).unwrap() - 0.1667).abs() < 1e-3);
        let lb = max_time_horizon(&g, 1, 1.0, 0.125, HorizonVariant::LowerBound).unwrap();
        assert_eq!(lb, g.value(0.125f64.powf(0.25) / 2f64.sqrt()));
        assert!(t1 <= lb);
    }

    proptest! {
        #[test]
        fn equivalence_bounds_hold(u in 0.0f64..1.0, v in -1.0f64..1.0, hf in 0.01f64..1.0, alpha in 0.0f64..2.0, r in 1usize..3) {
            let g = gamma();
            let (a1, a2) = (1.0, 0.125);
            let h = hf * admissibility_bound(&g, r, a1, a2);
            let w = window_interval(&g, r, h, a1, a2).unwrap();
            let x = w.lo + u * (w.hi - w.lo);
            let y = x + v * r as f64 * w.s * x.sqrt();
            let wt = LaguerreWeight::new(alpha);
            let ratio = wt.ratio(y, x);
            let (lo, hi) = weight_equivalence_bounds(r, a1, a2, alpha).unwrap();
            prop_assert!(ratio >= lo * (1.0 - 1e-12) && ratio <= hi * (1.0 + 1e-12));
        }

        #[test]
        fn homogeneous_and_monotone(c in -5.0f64..5.0, hi in 0.5f64..8.0) {
            let base = norm(|x| (-x).exp() * x, 1.0, Exponent::Finite(2.0), 0.0, hi);
            let scaled = norm(|x| c * (-x).exp() * x, 1.0, Exponent::Finite(2.0), 0.0, hi);
            prop_assert!((scaled - c.abs() * base).abs() <= 1e-9 * (1.0 + base));
            let wider = norm(|x| (-x).exp() * x, 1.0, Exponent::Finite(2.0), 0.0, hi + 1.0);
            prop_assert!(wider >= base);
        }
    }
}
