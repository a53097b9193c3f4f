//! Best weighted approximation by γ-polynomials of bounded degree.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::calculus::GammaPolynomial;
use crate::error::{Error, Result};
use crate::gamma::GammaFunction;
use crate::quadrature::GaussRule;
use crate::weight::{sup_grid, weighted_lp_norm_fn, Exponent, LaguerreWeight, NormSpec, QuadratureConfig};

/// Result of [`best_gamma_poly_error`].
#[derive(Debug, Clone, PartialEq)]
pub struct BestApproximation {
    /// `‖(f − p∘γ) w_α‖_{L^p}` recomputed by full quadrature.
    pub error: f64,
    pub poly: GammaPolynomial,
    /// Singular value ratio of the scaled design matrix.
    pub condition: f64,
}

const MAX_CONDITION: f64 = 1e12;

/// Chebyshev basis in `z = (γ(x) − mid) / half`.
#[derive(Debug, Clone, Copy)]
struct Basis {
    mid: f64,
    half: f64,
    n: usize,
}

impl Basis {
    fn row(&self, y: f64, out: &mut [f64]) {
        let z = (y - self.mid) / self.half;
        out[0] = 1.0;
        if self.n > 1 {
            out[1] = z;
        }
        for k in 2..self.n {
            out[k] = 2.0 * z * out[k - 1] - out[k - 2];
        }
    }

    fn eval(&self, c: &[f64], y: f64) -> f64 {
        let mut row = vec![0.0; self.n];
        self.row(y, &mut row);
        row.iter().zip(c).map(|(a, b)| a * b).sum()
    }

    /// Coefficients in powers of `y` of `Σ c_k T_k((y − mid)/half)`.
    fn to_power_basis(&self, c: &[f64]) -> Vec<f64> {
        let n = self.n;
        // T_k as polynomials in z
        let mut t: Vec<Vec<f64>> = Vec::with_capacity(n);
        for k in 0..n {
            let mut p = vec![0.0; n];
            match k {
                0 => p[0] = 1.0,
                1 => p[1] = 1.0,
                _ => {
                    for i in 0..n - 1 {
                        p[i + 1] += 2.0 * t[k - 1][i];
                    }
                    for i in 0..n {
                        p[i] -= t[k - 2][i];
                    }
                }
            }
            t.push(p);
        }
        let mut in_z = vec![0.0; n];
        for (k, tk) in t.iter().enumerate() {
            for i in 0..n {
                in_z[i] += c[k] * tk[i];
            }
        }
        // substitute z = (y − mid) / half
        let mut out = vec![0.0; n];
        let a = 1.0 / self.half;
        let b = -self.mid / self.half;
        for (i, &ci) in in_z.iter().enumerate() {
            for j in 0..=i {
                out[j] += ci * crate::bell::binomial(i, j) * a.powi(j as i32) * b.powi((i - j) as i32);
            }
        }
        out
    }
}

/// Where the weight has become negligible relative to its largest value on
/// `[lo, hi]`, capped at `hi`.
pub fn effective_upper_limit(lo: f64, hi: f64, alpha: f64) -> f64 {
    let peak = lo.max(alpha);
    let logw = |x: f64| if alpha == 0.0 { -x } else { alpha * x.max(1e-300).ln() - x };
    let top = logw(peak);
    let mut x = peak + 1.0;
    while logw(x) > top - 42.0 {
        x += 1.0;
    }
    x.min(hi)
}

/// Weight scaled by its value at `x_ref` so that nothing underflows.
fn scaled_weight(alpha: f64, x_ref: f64) -> impl Fn(f64) -> f64 {
    move |x: f64| {
        let e = if alpha == 0.0 {
            -(x - x_ref)
        } else {
            alpha * (x / x_ref).ln() - (x - x_ref)
        };
        e.exp()
    }
}

fn fit_nodes(kinks: &[f64], lo: f64, hi: f64) -> Vec<(f64, f64)> {
    let rule = GaussRule::new(10);
    let mut cuts = vec![lo];
    cuts.extend(kinks.iter().copied().filter(|&k| k > lo && k < hi));
    cuts.push(hi);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut nodes = Vec::new();
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let len = b - a;
        let mut edges = vec![a, b];
        for j in 1..=14 {
            let d = len * 0.5f64.powi(j);
            edges.push(a + d);
            edges.push(b - d);
        }
        let pieces = (len / 0.5).ceil() as usize;
        for i in 1..pieces {
            edges.push(a + len * i as f64 / pieces as f64);
        }
        edges.sort_by(f64::total_cmp);
        edges.dedup();
        for e in edges.windows(2) {
            if e[1] > e[0] {
                nodes.extend(rule.on(e[0], e[1]));
            }
        }
    }
    nodes
}

/// `inf_{deg q ≤ deg} ‖(f − q∘γ) w_α‖_{L^p(lo, hi)}` together with the
/// polynomial achieving the computed value.
#[allow(clippy::too_many_arguments)]
pub fn best_gamma_poly_error(
    f: &(dyn Fn(f64) -> f64 + Sync),
    g: &Arc<GammaFunction>,
    deg: usize,
    p: Exponent,
    alpha: f64,
    interval: (f64, f64),
    extra_kinks: &[f64],
    cfg: &QuadratureConfig,
) -> Result<BestApproximation> {
    let (lo, hi) = interval;
    if !(hi > lo && lo >= 0.0) {
        return Err(Error::InvalidArgument(format!("empty approximation interval ({lo}, {hi})")));
    }
    let hi_eff = effective_upper_limit(lo, hi, alpha);
    let mut kinks = g.kinks();
    kinks.extend_from_slice(extra_kinks);
    kinks.extend_from_slice(&cfg.singular_points);
    let (ylo, yhi) = (g.value(lo), g.value(hi_eff));
    let basis = Basis {
        mid: 0.5 * (ylo + yhi),
        half: (0.5 * (yhi - ylo)).max(1e-300),
        n: deg + 1,
    };
    let x_ref = lo.max(alpha.min(hi_eff));
    let sw = scaled_weight(alpha, x_ref.max(1e-300));

    let nodes = fit_nodes(&kinks, lo, hi_eff);
    let (coef, condition) = least_squares(f, g, &basis, &nodes, &sw)?;
    let coef = match p {
        Exponent::Finite(q) if q == 2.0 => coef,
        Exponent::Finite(q) => compass_search(f, g, &basis, &nodes, &sw, q, coef),
        Exponent::Infinity => {
            let grid_cfg = cfg.with_singular_points(&kinks);
            let grid = sup_grid(lo, hi_eff, &grid_cfg);
            remez(f, g, &basis, &grid, &sw, coef)
        }
    };
    let poly = GammaPolynomial::new(basis.to_power_basis(&coef), g.clone());
    let spec = NormSpec::new(p, lo, hi)?;
    let qcfg = cfg.with_singular_points(&kinks);
    let w = LaguerreWeight::new(alpha);
    let residual = |x: f64| f(x) - basis.eval(&coef, g.value(x));
    let error = weighted_lp_norm_fn(residual, &w, &spec, &qcfg)?.value;
    Ok(BestApproximation {
        error,
        poly,
        condition,
    })
}

fn least_squares(
    f: &(dyn Fn(f64) -> f64 + Sync),
    g: &GammaFunction,
    basis: &Basis,
    nodes: &[(f64, f64)],
    sw: &impl Fn(f64) -> f64,
) -> Result<(Vec<f64>, f64)> {
    let n = basis.n;
    let m = nodes.len();
    let mut a = DMatrix::<f64>::zeros(m, n);
    let mut b = DVector::<f64>::zeros(m);
    let mut row = vec![0.0; n];
    for (i, &(x, wq)) in nodes.iter().enumerate() {
        let s = wq.sqrt() * sw(x);
        basis.row(g.value(x), &mut row);
        for k in 0..n {
            a[(i, k)] = s * row[k];
        }
        let v = f(x);
        if !v.is_finite() {
            return Err(Error::NonFinite { x });
        }
        b[i] = s * v;
    }
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if condition > MAX_CONDITION {
        return Err(Error::IllConditioned { condition });
    }
    let sol = svd
        .solve(&b, smax * 1e-15)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok((sol.iter().copied().collect(), condition))
}

fn compass_search(
    f: &(dyn Fn(f64) -> f64 + Sync),
    g: &GammaFunction,
    basis: &Basis,
    nodes: &[(f64, f64)],
    sw: &impl Fn(f64) -> f64,
    q: f64,
    start: Vec<f64>,
) -> Vec<f64> {
    let data: Vec<(f64, f64, f64)> = nodes.iter().map(|&(x, wq)| (g.value(x), f(x), wq * sw(x).powf(q))).collect();
    let objective = |c: &[f64]| -> f64 {
        data.iter()
            .map(|&(y, v, wq)| wq * (v - basis.eval(c, y)).abs().powf(q))
            .sum()
    };
    let scale = start.iter().fold(0.0f64, |m, c| m.max(c.abs())).max(
        data.iter().fold(0.0f64, |m, d| m.max(d.1.abs())),
    );
    if scale == 0.0 {
        return start;
    }
    let mut best = start;
    let mut best_val = objective(&best);
    let mut step = 0.1 * scale;
    let mut iters = 0;
    while step > 1e-11 * scale && iters < 4000 {
        iters += 1;
        let mut improved = false;
        for k in 0..best.len() {
            for dir in [1.0, -1.0] {
                let mut c = best.clone();
                c[k] += dir * step;
                let v = objective(&c);
                if v < best_val {
                    best_val = v;
                    best = c;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    best
}

fn remez(
    f: &(dyn Fn(f64) -> f64 + Sync),
    g: &GammaFunction,
    basis: &Basis,
    grid: &[f64],
    sw: &impl Fn(f64) -> f64,
    start: Vec<f64>,
) -> Vec<f64> {
    let n = basis.n;
    let m = n + 1;
    let pts: Vec<(f64, f64, f64)> = grid.iter().map(|&x| (g.value(x), f(x), sw(x))).collect();
    if pts.len() < m {
        return start;
    }
    let residuals = |c: &[f64]| -> Vec<f64> {
        pts.iter()
            .map(|&(y, v, w)| (v - basis.eval(c, y)) * w)
            .collect()
    };
    let max_abs = |e: &[f64]| e.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut best = start.clone();
    let mut best_err = max_abs(&residuals(&best));
    if best_err == 0.0 {
        return best;
    }
    let mut coef = start;
    for _ in 0..60 {
        let e = residuals(&coef);
        let reference = match alternation_set(&e, m) {
            Some(r) => r,
            None => break,
        };
        let mut a = DMatrix::<f64>::zeros(m, m);
        let mut b = DVector::<f64>::zeros(m);
        let mut row = vec![0.0; n];
        for (i, &idx) in reference.iter().enumerate() {
            let (y, v, w) = pts[idx];
            basis.row(y, &mut row);
            for k in 0..n {
                a[(i, k)] = w * row[k];
            }
            a[(i, n)] = if i % 2 == 0 { 1.0 } else { -1.0 };
            b[i] = w * v;
        }
        let Some(sol) = a.lu().solve(&b) else { break };
        let level = sol[n].abs();
        coef = sol.iter().take(n).copied().collect();
        let err = max_abs(&residuals(&coef));
        if err < best_err {
            best_err = err;
            best = coef.clone();
        }
        if err - level <= 1e-9 * err {
            break;
        }
    }
    best
}

/// Indices of `m` alternating extrema of `e`, always including the largest.
fn alternation_set(e: &[f64], m: usize) -> Option<Vec<usize>> {
    let mut ext: Vec<usize> = Vec::new();
    let mut i = 0;
    while i < e.len() {
        if e[i] == 0.0 {
            i += 1;
            continue;
        }
        let sign = e[i] > 0.0;
        let mut best = i;
        while i < e.len() && (e[i] == 0.0 || (e[i] > 0.0) == sign) {
            if e[i].abs() > e[best].abs() {
                best = i;
            }
            i += 1;
        }
        ext.push(best);
    }
    if ext.len() < m {
        return None;
    }
    while ext.len() > m {
        let (pos, _) = ext
            .iter()
            .enumerate()
            .min_by(|a, b| e[*a.1].abs().total_cmp(&e[*b.1].abs()))
            .expect("nonempty");
        if ext.len() == m + 1 || pos == 0 || pos == ext.len() - 1 {
            if pos == 0 || pos == ext.len() - 1 {
                ext.remove(pos);
            } else if e[ext[0]].abs() <= e[ext[ext.len() - 1]].abs() {
                ext.remove(0);
            } else {
                ext.pop();
            }
        } else {
            // dropping two neighbours keeps the signs alternating
            let other = if e[ext[pos - 1]].abs() < e[ext[pos + 1]].abs() { pos - 1 } else { pos + 1 };
            let (a, b) = (pos.min(other), pos.max(other));
            ext.remove(b);
            ext.remove(a);
        }
    }
    Some(ext)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gamma::GammaSpec;

    fn gamma() -> Arc<GammaFunction> {
        Arc::new(GammaFunction::build(GammaSpec::default()).unwrap())
    }

    #[test]
    fn exact_representation() {
        let g = gamma();
        let gc = g.clone();
        let f = move |x: f64| 3.0 + 2.0 * gc.value(x);
        for p in [Exponent::Finite(1.0), Exponent::Finite(2.0), Exponent::Infinity] {
            let r = best_gamma_poly_error(&f, &g, 1, p, 0.0, (0.0, 3.0), &[], &QuadratureConfig::default())
                .unwrap();
            assert!(r.error < 1e-10, "{p}: {}", r.error);
            let c = r.poly.coefficients();
            assert!((c[0] - 3.0).abs() < 1e-8 && (c[1] - 2.0).abs() < 1e-8, "{c:?}");
        }
    }

    #[test]
    fn least_squares_against_dense_normal_equations() {
        let g = gamma();
        let gc = g.clone();
        let f = move |x: f64| gc.value(x).powi(2);
        let (lo, hi) = (0.3, 2.6);
        let r = best_gamma_poly_error(&f, &g, 1, Exponent::Finite(2.0), 0.0, (lo, hi), &[], &QuadratureConfig::default())
            .unwrap();
        // dense midpoint-rule normal equations in the monomial basis
        let n = 400_000;
        let dx = (hi - lo) / n as f64;
        let (mut s00, mut s01, mut s11, mut b0, mut b1) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for i in 0..n {
            let x = lo + (i as f64 + 0.5) * dx;
            let w2 = (-2.0 * x).exp() * dx;
            let y = g.value(x);
            let v = y * y;
            s00 += w2;
            s01 += w2 * y;
            s11 += w2 * y * y;
            b0 += w2 * v;
            b1 += w2 * v * y;
        }
        let det = s00 * s11 - s01 * s01;
        let c0 = (b0 * s11 - b1 * s01) / det;
        let c1 = (s00 * b1 - s01 * b0) / det;
        let mut e2 = 0.0;
        for i in 0..n {
            let x = lo + (i as f64 + 0.5) * dx;
            let y = g.value(x);
            let d = (y * y - c0 - c1 * y) * (-x).exp();
            e2 += d * d * dx;
        }
        let oracle = e2.sqrt();
        assert!(r.error > 0.0);
        assert!(((r.error - oracle) / oracle).abs() < 1e-6, "{} vs {oracle}", r.error);
    }

    #[test]
    fn minimax_equioscillates() {
        // best constant for f(x) = x under w_0 in the sup norm on (0, 1)
        let g = gamma();
        let f = |x: f64| x;
        let r = best_gamma_poly_error(&f, &g, 0, Exponent::Infinity, 0.0, (0.0, 1.0), &[], &QuadratureConfig::default())
            .unwrap();
        // max over x of |x − c| e^{−x}: the optimum balances x = 0 against the interior peak
        let c = r.poly.coefficients()[0];
        let left = c;
        let peak = (0..10001)
            .map(|i| i as f64 / 10000.0)
            .map(|x| ((x - c) * (-x).exp()).abs())
            .fold(0.0, f64::max);
        assert!((left - peak).abs() < 1e-6, "{left} {peak}");
        assert!((r.error - peak).abs() < 1e-6);
    }

    #[test]
    fn degree_monotonicity() {
        let g = gamma();
        let f = |x: f64| (-x).exp() * (x - 1.0).abs().powf(0.5);
        let mut last = f64::INFINITY;
        for deg in 0..3 {
            for p in [Exponent::Finite(1.0), Exponent::Finite(2.0), Exponent::Infinity] {
                let e = best_gamma_poly_error(&f, &g, deg, p, 1.0, (0.1, f64::INFINITY), &[1.0], &QuadratureConfig::default())
                    .unwrap()
                    .error;
                if p == Exponent::Finite(2.0) {
                    assert!(e <= last * (1.0 + 1e-9));
                    last = e;
                }
            }
        }
    }

    #[test]
    fn power_basis_conversion() {
        let b = Basis { mid: 2.0, half: 3.0, n: 3 };
        let c = [0.5, -1.0, 2.0];
        let pw = b.to_power_basis(&c);
        for &y in &[-1.0, 0.0, 2.5, 5.0] {
            let direct = b.eval(&c, y);
            let via: f64 = pw.iter().enumerate().map(|(k, a)| a * y.powi(k as i32)).sum();
            assert!((direct - via).abs() < 1e-12);
        }
    }
}
