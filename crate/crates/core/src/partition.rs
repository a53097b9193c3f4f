//! The point system `t₀ < … < t_{j+1}` covering a window and the smooth
//! bumps that glue per-cell approximants.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::gamma::GammaFunction;
use crate::weight::window_interval;

/// Points `t₀ < t₁ < … < t_{j+1}` with steps comparable to `s √t_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    points: Arc<[f64]>,
    r: usize,
    h: f64,
    s: f64,
    a1: f64,
    a2: f64,
    m: Option<usize>,
    complete: bool,
}

const MAX_POINTS: usize = 20_000_000;

impl Partition {
    /// Greedy partition of `I_{rh,γ}` with `s = γ⁻¹(h)`. The index `M` is
    /// located relative to `a_N + 1`.
    pub fn build(g: &GammaFunction, r: usize, h: f64, a1: f64, a2: f64) -> Result<Self> {
        let win = window_interval(g, r, h, a1, a2)?;
        let mut p = Self::generate(win.s, r, a1, a2, f64::INFINITY)?;
        p.h = h;
        p.locate_pivot(g.x_lin())?;
        Ok(p)
    }

    /// Like [`Partition::build`] but stops two points after the first point
    /// at or beyond `cutoff`. Every generated point agrees with the complete
    /// partition.
    pub fn build_truncated(g: &GammaFunction, r: usize, h: f64, a1: f64, a2: f64, cutoff: f64) -> Result<Self> {
        let win = window_interval(g, r, h, a1, a2)?;
        let mut p = Self::generate(win.s, r, a1, a2, cutoff)?;
        p.h = h;
        if p.complete {
            p.locate_pivot(g.x_lin())?;
        }
        Ok(p)
    }

    /// The partition for an explicit step scale `s`, without pivot index.
    pub fn from_step(s: f64, r: usize, a1: f64, a2: f64) -> Result<Self> {
        Self::generate(s, r, a1, a2, f64::INFINITY)
    }

    fn generate(s: f64, r: usize, a1: f64, a2: f64, cutoff: f64) -> Result<Self> {
        if !(s > 0.0 && s.is_finite()) || r == 0 || !(a1 >= 0.25 && a2 > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "partition needs s > 0, r >= 1, A1 >= 1/4, A2 > 0 (s = {s}, r = {r}, A1 = {a1}, A2 = {a2})"
            )));
        }
        let rf = r as f64;
        let t0 = 4.0 * a1 * rf * rf * s * s;
        let hi = a2 / (s * s);
        if !(t0 < hi) {
            return Err(Error::InvalidArgument(format!("empty window [{t0}, {hi}]")));
        }
        let estimate = 2.0 * (hi.min(cutoff).sqrt() - t0.sqrt()) / s;
        if estimate > MAX_POINTS as f64 {
            return Err(Error::InvalidArgument(format!(
                "partition would need about {estimate:.3e} points"
            )));
        }
        let ratio_cap = (1.0 + 2.0 * a1.sqrt()) / (2.0 * a1.sqrt());
        let (q_lo, q_hi) = (1.0 / (2.0 * rf), rf);
        let mut points = vec![t0];
        let mut extra = 0;
        let mut complete = true;
        loop {
            let t = *points.last().expect("nonempty");
            if t >= hi {
                break;
            }
            if t >= cutoff {
                extra += 1;
                if extra > 2 {
                    complete = false;
                    break;
                }
            }
            let step = s * t.sqrt();
            let mut next = t + step;
            // rounding can push the exact bounds by an ulp; pull back
            let mut guard = 0;
            while ((next - t) / step > q_hi || next / t > ratio_cap) && guard < 64 {
                next = next.next_down();
                guard += 1;
            }
            if !(next > t) || (next - t) / step < q_lo {
                return Err(Error::PartitionInvariant {
                    index: points.len() - 1,
                    reason: "step collapsed".into(),
                });
            }
            points.push(next);
        }
        let p = Partition {
            points: points.into(),
            r,
            h: f64::NAN,
            s,
            a1,
            a2,
            m: None,
            complete,
        };
        p.check_invariants()?;
        Ok(p)
    }

    fn locate_pivot(&mut self, pivot: Option<f64>) -> Result<()> {
        let j = self.j();
        if j < 3 {
            return Err(Error::PartitionInvariant {
                index: j,
                reason: format!("only j = {j} interior points, at least 3 needed"),
            });
        }
        if let Some(b) = pivot {
            let m = self.points.partition_point(|&t| t < b);
            // t_{m-1} < b <= t_m
            if m < 2 || m > j - 1 {
                return Err(Error::PartitionInvariant {
                    index: m,
                    reason: format!("a_N + 1 = {b} is not bracketed by t_1 .. t_(j-1)"),
                });
            }
            self.m = Some(m - 1);
        }
        Ok(())
    }

    /// Verifies the step and ratio laws, reporting the first offending index.
    pub fn check_invariants(&self) -> Result<()> {
        let rf = self.r as f64;
        let sa = self.a1.sqrt();
        let cap = (1.0 + 2.0 * sa) / (2.0 * sa);
        for (i, w) in self.points.windows(2).enumerate() {
            let q = (w[1] - w[0]) / (self.s * w[0].sqrt());
            if !(q >= 1.0 / (2.0 * rf) && q <= rf) {
                return Err(Error::PartitionInvariant {
                    index: i,
                    reason: format!("step ratio {q} outside [1/(2r), r]"),
                });
            }
            let ratio = w[1] / w[0];
            if !(ratio >= 1.0 && ratio <= cap) {
                return Err(Error::PartitionInvariant {
                    index: i,
                    reason: format!("neighbour ratio {ratio} outside [1, {cap}]"),
                });
            }
        }
        if self.complete {
            let hi = self.window_hi();
            let j = self.j();
            if !(self.points[j] < hi && self.points[j + 1] >= hi) {
                return Err(Error::PartitionInvariant {
                    index: j,
                    reason: "last point does not straddle the window end".into(),
                });
            }
            let a = self.scale();
            if !(a >= 1.0 && a < cap) {
                return Err(Error::PartitionInvariant {
                    index: j + 1,
                    reason: format!("scale A = {a} outside [1, {cap})"),
                });
            }
        }
        Ok(())
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Index of the last point, minus one.
    pub fn j(&self) -> usize {
        self.points.len() - 2
    }

    /// `M` with `t_M < a_N + 1 ≤ t_{M+1}`.
    pub fn m(&self) -> Option<usize> {
        self.m
    }

    /// `A = t_{j+1} s² / A₂`.
    pub fn scale(&self) -> f64 {
        self.points[self.points.len() - 1] / self.window_hi()
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// `γ⁻¹(h)`.
    pub fn step_scale(&self) -> f64 {
        self.s
    }

    pub fn window_hi(&self) -> f64 {
        self.a2 / (self.s * self.s)
    }

    /// False when generation stopped at a cutoff before the window end.
    pub fn is_complete(&self) -> bool {
        self.complete
    }

    /// The cell `i` with `t_i ≤ x ≤ t_{i+1}`.
    pub fn cell_of(&self, x: f64) -> Option<usize> {
        let n = self.points.len();
        if !(x >= self.points[0] && x <= self.points[n - 1]) {
            return None;
        }
        let k = self.points.partition_point(|&t| t <= x);
        Some(k.saturating_sub(1).min(n - 2))
    }
}

/// The smooth step `ψ(s) = e(s) / (e(s) + e(1−s))`, `e(u) = exp(−1/u)`, and
/// its derivatives up to order 4.
pub fn psi_eval(s: f64, order: usize) -> Result<f64> {
    if order > 4 {
        return Err(Error::OrderTooHigh { order, max: 4 });
    }
    if s <= 0.0 {
        return Ok(0.0);
    }
    if s >= 1.0 {
        return Ok(if order == 0 { 1.0 } else { 0.0 });
    }
    // ψ = L(v), L logistic, v = 1/(1−s) − 1/s
    let v = 1.0 / (1.0 - s) - 1.0 / s;
    if order == 0 {
        return Ok(logistic(v));
    }
    if v.abs() > 700.0 {
        return Ok(0.0);
    }
    let l = logistic(v);
    let m = logistic(-v);
    let lm = l * m;
    let outer = [
        lm,
        lm * (m - l),
        lm * (1.0 - 6.0 * lm),
        lm * (m - l) * (1.0 - 12.0 * lm),
    ];
    let mut inner = [0.0; 4];
    let mut fact = 1.0;
    for n in 1..=4 {
        fact *= n as f64;
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        inner[n - 1] = fact * ((1.0 - s).powi(-(n as i32) - 1) - sign * s.powi(-(n as i32) - 1));
    }
    crate::bell::faa_di_bruno(&outer[..order], &inner[..order])
}

fn logistic(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// `sup_ν≤order ‖ψ^{(ν)}‖_∞`, from a dense grid refined by golden section.
pub fn psi_sup(order: usize) -> Result<f64> {
    let mut best: f64 = 1.0;
    for nu in 1..=order {
        let f = |s: f64| psi_eval(s, nu).map(f64::abs).unwrap_or(0.0);
        let n = 4000;
        let grid: Vec<f64> = (1..n).map(|i| i as f64 / n as f64).collect();
        for (i, &s) in grid.iter().enumerate() {
            let v = f(s);
            let left = if i > 0 { f(grid[i - 1]) } else { 0.0 };
            let right = if i + 1 < grid.len() { f(grid[i + 1]) } else { 0.0 };
            if v >= left && v >= right {
                best = best.max(golden_max(&f, s - 1.0 / n as f64, s + 1.0 / n as f64));
            }
        }
    }
    Ok(best)
}

fn golden_max(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    for _ in 0..60 {
        if f(c) > f(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - phi * (b - a);
        d = a + phi * (b - a);
    }
    f(0.5 * (a + b)).max(f(a)).max(f(b))
}

/// `ψ_k(x) = ψ((γ(x) − γ(y_k)) / (γ(t_{k+1}) − γ(y_k)))` for the cells of a
/// partition, with `ψ₀ ≡ 1` and `ψ_j ≡ 0`. Cell data are computed on demand.
#[derive(Debug, Clone)]
pub struct BumpFamily {
    points: Arc<[f64]>,
    j: usize,
    complete: bool,
}

impl BumpFamily {
    pub fn new(partition: &Partition) -> Self {
        BumpFamily {
            points: partition.points.clone(),
            j: partition.j(),
            complete: partition.is_complete(),
        }
    }

    /// `(γ(y_k), γ(t_{k+1}) − γ(y_k))`.
    fn cell(&self, g: &GammaFunction, k: usize) -> Result<(f64, f64)> {
        if k + 1 >= self.points.len() {
            return Err(Error::InvalidArgument(format!("bump index {k} out of range")));
        }
        let a = g.eval(self.points[k])?;
        let b = g.eval(self.points[k + 1])?;
        let mid = 0.5 * (a + b);
        Ok((mid, b - mid))
    }

    /// `y_k = γ⁻¹((γ(t_k) + γ(t_{k+1})) / 2)`.
    pub fn midpoint(&self, g: &GammaFunction, k: usize) -> Result<f64> {
        g.eval_inverse(self.cell(g, k)?.0)
    }

    /// `γ(t_{k+1}) − γ(y_k)`.
    pub fn half_width(&self, g: &GammaFunction, k: usize) -> Result<f64> {
        Ok(self.cell(g, k)?.1)
    }

    fn is_constant(&self, k: usize) -> Option<f64> {
        if k == 0 {
            Some(1.0)
        } else if self.complete && k == self.j {
            Some(0.0)
        } else {
            None
        }
    }

    /// `(ψ_k)_γ^{(order)}(x)`.
    pub fn gamma_derivative(&self, g: &GammaFunction, k: usize, x: f64, order: usize) -> Result<f64> {
        Ok(self.gamma_jet(g, k, x, order)?[order])
    }

    /// `[(ψ_k)_γ^{(0)}(x), …, (ψ_k)_γ^{(n)}(x)]`.
    pub fn gamma_jet(&self, g: &GammaFunction, k: usize, x: f64, n: usize) -> Result<Vec<f64>> {
        if n > 4 {
            return Err(Error::OrderTooHigh { order: n, max: 4 });
        }
        let (mid, d) = self.cell(g, k)?;
        if let Some(c) = self.is_constant(k) {
            let mut out = vec![0.0; n + 1];
            out[0] = c;
            return Ok(out);
        }
        let z = (g.value(x) - mid) / d;
        let mut scale = 1.0;
        (0..=n)
            .map(|o| {
                let v = psi_eval(z, o)? / scale;
                scale *= d;
                Ok(v)
            })
            .collect()
    }
}

/// `psi_k_gamma_derivative` as a free function.
pub fn psi_k_gamma_derivative(bumps: &BumpFamily, g: &GammaFunction, k: usize, x: f64, order: usize) -> Result<f64> {
    bumps.gamma_derivative(g, k, x, order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gamma::GammaSpec;
    use proptest::prelude::*;

    fn gamma() -> GammaFunction {
        GammaFunction::build(GammaSpec::default()).unwrap()
    }

    #[test]
    fn greedy_first_step() {
        let p = Partition::from_step(0.1, 1, 1.0, 0.125).unwrap();
        assert!((p.points()[0] - 0.04).abs() < 1e-16);
        assert!((p.points()[1] - 0.06).abs() < 1e-15);
        let q = (p.points()[1] - p.points()[0]) / (0.1 * 0.2);
        assert!(q <= 1.0 && q > 1.0 - 1e-12);
    }

    #[test]
    fn built_partitions_satisfy_the_laws() {
        let g = gamma();
        for r in 1..=3 {
            for &s in &[0.15, 0.1, 0.05, 0.02] {
                let p = Partition::build(&g, r, g.value(s), 1.0, 0.125).unwrap();
                p.check_invariants().unwrap();
                let m = p.m().unwrap();
                assert!(p.points()[m] < 2.0 && p.points()[m + 1] >= 2.0);
                assert!(m >= 1 && m <= p.j() - 2);
                assert!(p.scale() >= 1.0 && p.scale() < 1.5);
            }
        }
    }

    #[test]
    fn coarse_window_is_rejected() {
        let g = gamma();
        // near the admissibility bound the window holds too few points
        let bound = crate::weight::admissibility_bound(&g, 3, 1.0, 0.125);
        assert!(matches!(
            Partition::build(&g, 3, bound * 0.999, 1.0, 0.125),
            Err(Error::PartitionInvariant { .. })
        ));
    }

    #[test]
    fn truncated_prefix_agrees() {
        let g = gamma();
        let h = g.value(0.01);
        let full = Partition::build(&g, 1, h, 1.0, 0.125).unwrap();
        let cut = Partition::build_truncated(&g, 1, h, 1.0, 0.125, 50.0).unwrap();
        assert!(!cut.is_complete());
        let n = cut.points().len();
        assert_eq!(cut.points(), &full.points()[..n]);
        assert!(cut.points()[n - 3] >= 50.0);
    }

    #[test]
    fn cell_lookup() {
        let p = Partition::from_step(0.1, 1, 1.0, 0.125).unwrap();
        let pts = p.points();
        assert_eq!(p.cell_of(pts[0]), Some(0));
        assert_eq!(p.cell_of(0.5 * (pts[3] + pts[4])), Some(3));
        assert_eq!(p.cell_of(*pts.last().unwrap()), Some(p.j()));
        assert_eq!(p.cell_of(0.01), None);
    }

    #[test]
    fn psi_plateaus_and_symmetry() {
        assert_eq!(psi_eval(-1.0, 0).unwrap(), 0.0);
        assert_eq!(psi_eval(2.0, 0).unwrap(), 1.0);
        assert_eq!(psi_eval(2.0, 3).unwrap(), 0.0);
        assert!((psi_eval(0.5, 0).unwrap() - 0.5).abs() < 1e-15);
        assert!(matches!(psi_eval(0.5, 5), Err(Error::OrderTooHigh { .. })));
        for &s in &[0.1, 0.3, 0.45] {
            assert!((psi_eval(s, 0).unwrap() + psi_eval(1.0 - s, 0).unwrap() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn psi_derivatives_match_central_differences() {
        for order in 1..=4 {
            for i in 1..40 {
                let s = i as f64 / 40.0;
                let e = 1e-5;
                let fd = (psi_eval(s + e, order - 1).unwrap() - psi_eval(s - e, order - 1).unwrap()) / (2.0 * e);
                let d = psi_eval(s, order).unwrap();
                assert!((d - fd).abs() <= 1e-6 * d.abs().max(1.0), "order {order} s {s}: {d} vs {fd}");
            }
        }
    }

    #[test]
    fn bump_family_midpoints_and_plateaus() {
        let g = gamma();
        let p = Partition::build(&g, 1, g.value(0.1), 1.0, 0.125).unwrap();
        let b = BumpFamily::new(&p);
        let pts = p.points();
        for k in 0..=p.j() {
            let yk = b.midpoint(&g, k).unwrap();
            assert!(pts[k] < yk && yk < pts[k + 1]);
            let lhs = g.value(pts[k + 1]) - g.value(yk);
            assert!((lhs - 0.5 * (g.value(pts[k + 1]) - g.value(pts[k]))).abs() < 1e-12);
        }
        let k = 3;
        let yk = b.midpoint(&g, k).unwrap();
        for o in 0..=4 {
            assert_eq!(b.gamma_derivative(&g, k, yk * 0.999, o).unwrap(), 0.0);
        }
        assert_eq!(b.gamma_derivative(&g, k, pts[k + 1], 0).unwrap(), 1.0);
        for o in 1..=4 {
            assert_eq!(b.gamma_derivative(&g, k, pts[k + 1] * 1.001, o).unwrap(), 0.0);
        }
        assert_eq!(b.gamma_derivative(&g, 0, 1.0, 0).unwrap(), 1.0);
        assert_eq!(b.gamma_derivative(&g, p.j(), 1.0, 0).unwrap(), 0.0);
    }

    #[test]
    fn bump_derivative_bound() {
        let g = gamma();
        let p = Partition::build(&g, 2, g.value(0.08), 1.0, 0.125).unwrap();
        let b = BumpFamily::new(&p);
        let sup = psi_sup(2).unwrap();
        let pts = p.points();
        for k in 1..p.j() {
            let span = g.value(pts[k + 1]) - g.value(pts[k]);
            for i in 0..=20 {
                let x = pts[k] + (pts[k + 1] - pts[k]) * i as f64 / 20.0;
                for o in 0..=2 {
                    let v = b.gamma_derivative(&g, k, x, o).unwrap();
                    assert!(v.abs() <= sup * 2f64.powi(o as i32) / span.powi(o as i32) * (1.0 + 1e-9));
                }
            }
        }
    }

    proptest! {
        #[test]
        fn partition_laws_hold(s in 0.002f64..0.3, r in 1usize..4, a1 in 0.25f64..4.0) {
            prop_assume!(4.0 * a1 * (r * r) as f64 * s * s < 0.125 / (s * s));
            let p = Partition::from_step(s, r, a1, 0.125).unwrap();
            prop_assert!(p.check_invariants().is_ok());
        }

        #[test]
        fn psi_is_monotone(a in -0.2f64..1.2, d in 0.0f64..0.3) {
            prop_assert!(psi_eval(a, 0).unwrap() <= psi_eval(a + d, 0).unwrap());
        }
    }
}
