//! One-dimensional quadrature: Gauss–Legendre rules and a globally adaptive
//! Gauss–Kronrod (7/15) integrator with forced breakpoints and a doubling
//! scheme for long or infinite upper limits.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Tolerances for the adaptive integrator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        AdaptiveOptions {
            rel_tol: 1e-10,
            abs_tol: 1e-14,
            max_subdivisions: 2000,
        }
    }
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub abs_error: f64,
    pub subdivisions: usize,
    pub converged: bool,
}

impl Integral {
    fn zero() -> Self {
        Integral {
            value: 0.0,
            abs_error: 0.0,
            subdivisions: 0,
            converged: true,
        }
    }

    fn absorb(&mut self, other: Integral) {
        self.value += other.value;
        self.abs_error += other.abs_error;
        self.subdivisions += other.subdivisions;
        self.converged &= other.converged;
    }

    /// Turns a non-converged result into an error.
    pub fn require_converged(self) -> Result<Integral> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::QuadratureNotConverged {
                estimate: self.abs_error,
                subdivisions: self.subdivisions,
            })
        }
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "a Gauss rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for k in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * k + 1) as f64 * z * p1 - k as f64 * p2) / (k + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// A fixed Gauss–Legendre rule mapped onto arbitrary intervals.
#[derive(Debug, Clone)]
pub struct GaussRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussRule {
    pub fn new(n: usize) -> Self {
        let (nodes, weights) = gauss_legendre(n);
        GaussRule { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights on `[a, b]`.
    pub fn on(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        self.on(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Result<(f64, f64)> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut eval = |x: f64| -> Result<f64> {
        let v = f(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite { x })
        }
    };
    let fc = eval(center)?;
    let mut resk = fc * WGK[7];
    let mut resg = fc * WG[3];
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = eval(center - dx)?;
        let f2 = eval(center + dx)?;
        fv1[j] = f1;
        fv2[j] = f2;
        resk += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            resg += WG[j / 2] * (f1 + f2);
        }
    }
    let reskh = 0.5 * resk;
    let mut resasc = WGK[7] * (fc - reskh).abs();
    for j in 0..7 {
        resasc += WGK[j] * ((fv1[j] - reskh).abs() + (fv2[j] - reskh).abs());
    }
    let result = resk * half;
    resasc *= half.abs();
    let mut err = ((resk - resg) * half).abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    let round = 50.0 * f64::EPSILON * result.abs();
    Ok((result, err.max(round)))
}

/// Globally adaptive integration of `f` over the finite interval `[a, b]`.
///
/// Points of `breakpoints` strictly inside the interval are used as initial
/// subdivision points. Non-finite integrand values are reported as errors;
/// failure to converge is reported through [`Integral::converged`].
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    opts: &AdaptiveOptions,
) -> Result<Integral> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "finite limits required, got [{a}, {b}]"
        )));
    }
    if a == b {
        return Ok(Integral::zero());
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut cuts = vec![lo];
    let mut inner: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&p| p > lo && p < hi)
        .collect();
    inner.sort_by(f64::total_cmp);
    inner.dedup();
    cuts.extend(inner);
    cuts.push(hi);

    let mut heap = BinaryHeap::new();
    let (mut total, mut total_err) = (0.0, 0.0);
    for w in cuts.windows(2) {
        let (v, e) = kronrod15(&mut f, w[0], w[1])?;
        total += v;
        total_err += e;
        heap.push(Segment {
            a: w[0],
            b: w[1],
            value: v,
            error: e,
        });
    }
    let mut subdivisions = heap.len();
    let target = |total: f64| opts.abs_tol.max(opts.rel_tol * total.abs());
    while total_err > target(total) {
        if subdivisions >= opts.max_subdivisions {
            return Ok(Integral {
                value: sign * total,
                abs_error: total_err,
                subdivisions,
                converged: false,
            });
        }
        let Some(seg) = heap.pop() else { break };
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a || mid >= seg.b || (seg.b - seg.a) < 1e3 * f64::EPSILON * mid.abs() {
            // cannot be refined further; accept it as is
            total_err -= seg.error;
            subdivisions += 1;
            continue;
        }
        let (v1, e1) = kronrod15(&mut f, seg.a, mid)?;
        let (v2, e2) = kronrod15(&mut f, mid, seg.b)?;
        total += v1 + v2 - seg.value;
        total_err += e1 + e2 - seg.error;
        heap.push(Segment {
            a: seg.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Segment {
            a: mid,
            b: seg.b,
            value: v2,
            error: e2,
        });
        subdivisions += 1;
    }
    Ok(Integral {
        value: sign * total,
        abs_error: total_err.max(0.0),
        subdivisions,
        converged: true,
    })
}

/// Integrates over `[lo, hi]` where `hi` may be infinite or very large.
///
/// The range is walked in blocks of doubling length. Walking stops when a
/// block contributes less than the tolerance relative to the running total,
/// or when `negligible_beyond(x)` reports that the integrand envelope has
/// vanished for all larger `x`.
pub fn integrate_long<F, N>(
    mut f: F,
    lo: f64,
    hi: f64,
    breakpoints: &[f64],
    opts: &AdaptiveOptions,
    negligible_beyond: N,
) -> Result<Integral>
where
    F: FnMut(f64) -> f64,
    N: Fn(f64) -> bool,
{
    if hi.is_finite() && hi - lo <= 64.0 {
        return integrate(f, lo, hi, breakpoints, opts);
    }
    let mut acc = Integral::zero();
    let mut start = lo;
    let mut len = 1.0_f64.max(lo.abs() * 0.25);
    let mut quiet_blocks = 0;
    loop {
        let end = (start + len).min(hi);
        let part = integrate(&mut f, start, end, breakpoints, opts)?;
        let small = part.value.abs() <= opts.abs_tol.max(opts.rel_tol * acc.value.abs());
        acc.absorb(part);
        if end >= hi {
            break;
        }
        if small {
            quiet_blocks += 1;
        } else {
            quiet_blocks = 0;
        }
        if negligible_beyond(end) || (quiet_blocks >= 2 && acc.value != 0.0) {
            break;
        }
        if quiet_blocks >= 6 {
            break;
        }
        start = end;
        len *= 2.0;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_rule_is_exact_for_polynomials() {
        let rule = GaussRule::new(5);
        // degree 9 is the limit for five nodes
        let v = rule.integrate(0.0, 2.0, |x| x.powi(9));
        assert!((v - 2f64.powi(10) / 10.0).abs() < 1e-11);
        let w: f64 = rule.on(-3.0, 1.0).map(|(_, w)| w).sum();
        assert!((w - 4.0).abs() < 1e-14);
    }

    #[test]
    fn adaptive_handles_endpoint_cusp() {
        let opts = AdaptiveOptions::default();
        let r = integrate(|x: f64| x.abs().powf(0.25), -1.0, 1.0, &[0.0], &opts).unwrap();
        assert!(r.converged);
        assert!((r.value - 1.6).abs() < 1e-9, "{}", r.value);
    }

    #[test]
    fn reversed_limits_flip_sign() {
        let opts = AdaptiveOptions::default();
        let r = integrate(|x: f64| x, 1.0, 0.0, &[], &opts).unwrap();
        assert!((r.value + 0.5).abs() < 1e-15);
    }

    #[test]
    fn non_finite_integrand_is_reported() {
        let opts = AdaptiveOptions::default();
        let e = integrate(|x: f64| 1.0 / (x - 0.5), 0.0, 1.0, &[], &opts).unwrap_err();
        assert!(matches!(e, Error::NonFinite { .. }));
    }

    #[test]
    fn long_range_exponential() {
        let opts = AdaptiveOptions::default();
        let r = integrate_long(|x: f64| (-x).exp(), 0.0, f64::INFINITY, &[], &opts, |x| x > 800.0)
            .unwrap();
        assert!((r.value - 1.0).abs() < 1e-10);
    }
}
