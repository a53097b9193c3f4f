//! γ-Steklov averages and the glued approximant `G_{γ,h}`.
//!
//! The r-fold average over `(0, 1/r)^r` is reduced to one dimension: the
//! sum of `n` independent uniforms on `(0, 1/r)` has the density
//! `r · IH_n(r u)` with `IH_n` the Irwin–Hall density.

use crate::bell::{binomial, factorial};
use crate::calculus::{closed_form_gamma_jet, gamma_jet_from_classical, RealFunction};
use crate::error::{Error, Result};
use crate::gamma::GammaFunction;
use crate::partition::{BumpFamily, Partition};
use crate::quadrature::{integrate, AdaptiveOptions, GaussRule};

/// Density of the sum of `n` uniforms on `(0, 1/r)`.
pub fn irwin_hall_density(n: usize, r: usize, u: f64) -> f64 {
    let rf = r as f64;
    let z = rf * u;
    if n == 0 || !(z > 0.0 && z < n as f64) {
        return 0.0;
    }
    let mut s = 0.0;
    for k in 0..=(z.floor() as usize).min(n) {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        s += sign * binomial(n, k) * (z - k as f64).powi(n as i32 - 1);
    }
    rf * s / factorial(n - 1)
}

/// How the one-dimensional averages are integrated.
#[derive(Debug, Clone, Copy)]
enum Rule<'a> {
    Adaptive(AdaptiveOptions),
    Fixed(&'a GaussRule),
}

/// `Σ_k (−1)^{m−k} C(m,k) f(x + k step)`.
fn difference(f: &dyn RealFunction, m: usize, step: f64, x: f64) -> f64 {
    (0..=m)
        .map(|k| {
            let sign = if (m - k) % 2 == 0 { 1.0 } else { -1.0 };
            sign * binomial(m, k) * f.eval(x + k as f64 * step)
        })
        .sum()
}

/// `d^m/dx^m` of `Σ_l c_l E[f(x + l σ U)]`, `U` the sum of `r` uniforms on
/// `(0, 1/r)`, `c_l = (−1)^{l+1} C(r,l)`:
/// `Σ_l c_l (r/(lσ))^m E[Δ^m_{lσ/r} f(x + lσ V)]` with `V` a sum of `r − m`
/// uniforms.
fn average_derivative(f: &dyn RealFunction, r: usize, sigma: f64, x: f64, m: usize, rule: Rule) -> Result<f64> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!("Steklov step {sigma} must be positive")));
    }
    if m > r {
        return Err(Error::OrderTooHigh { order: m, max: r });
    }
    let (lo, hi) = f.domain();
    let far = x + r as f64 * sigma;
    if !(x > lo) {
        return Err(Error::NodeOutsideDomain { k: 0, x });
    }
    if !(far < hi) {
        return Err(Error::NodeOutsideDomain { k: r, x: far });
    }
    let rf = r as f64;
    let n = r - m;
    let kinks = f.breakpoints();
    let mut total = 0.0;
    for l in 1..=r {
        let ls = l as f64 * sigma;
        let c = if l % 2 == 1 { 1.0 } else { -1.0 } * binomial(r, l) * (rf / ls).powi(m as i32);
        let step = ls / rf;
        let e = if n == 0 {
            difference(f, m, step, x)
        } else {
            let top = n as f64 / rf;
            let knots: Vec<f64> = (1..n).map(|k| k as f64 / rf).collect();
            let mut singular = Vec::new();
            for &b in &kinks {
                for k in 0..=m {
                    let v = (b - x - k as f64 * step) / ls;
                    let slack = 1e-12 * top;
                    if v > -slack && v < top + slack {
                        singular.push(v.clamp(0.0, top));
                    }
                }
            }
            let integrand = |v: f64| difference(f, m, step, x + ls * v) * irwin_hall_density(n, r, v);
            match rule {
                Rule::Adaptive(opts) => {
                    let all: Vec<f64> = knots.iter().chain(&singular).copied().collect();
                    integrate(integrand, 0.0, top, &all, &opts)?.require_converged()?.value
                }
                Rule::Fixed(gauss) => fixed_pieces(integrand, top, knots, &singular, gauss),
            }
        };
        total += c * e;
    }
    Ok(total)
}

/// Gauss on each piece between knots, graded toward knots where `f` kinks.
fn fixed_pieces(f: impl Fn(f64) -> f64, top: f64, knots: Vec<f64>, singular: &[f64], gauss: &GaussRule) -> f64 {
    let mut marked: Vec<(f64, bool)> = knots.iter().map(|&k| (k, false)).collect();
    marked.extend(singular.iter().map(|&k| (k, true)));
    marked.push((0.0, false));
    marked.push((top, false));
    marked.sort_by(|a, b| a.0.total_cmp(&b.0));
    // knots within rounding of each other collapse onto one, keeping the flag
    let mut merged: Vec<(f64, bool)> = Vec::with_capacity(marked.len());
    for (k, flag) in marked {
        match merged.last_mut() {
            Some(last) if k - last.0 <= 1e-12 * top => {
                if flag && !last.1 {
                    *last = (if last.0 == 0.0 { 0.0 } else { k }, true);
                }
            }
            _ => merged.push((k, flag)),
        }
    }
    if let Some(last) = merged.last_mut() {
        last.0 = top;
    }
    const GRADING: [f64; 5] = [0.0, 0.002, 0.02, 0.1, 0.35];
    let mut s = 0.0;
    for w in merged.windows(2) {
        let ((a, sa), (b, sb)) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        if !sa && !sb {
            s += gauss.integrate(a, b, &f);
            continue;
        }
        let mid = if sa && sb { 0.5 * (a + b) } else if sa { b } else { a };
        if sa {
            s += graded(&f, a, mid, &GRADING, gauss);
        }
        if sb {
            s += graded(&f, b, mid, &GRADING, gauss);
        }
    }
    s
}

/// `∫` between `from` (singular) and `to`, split geometrically near `from`.
fn graded(f: &impl Fn(f64) -> f64, from: f64, to: f64, fractions: &[f64], gauss: &GaussRule) -> f64 {
    let d = to - from;
    let mut s = 0.0;
    let mut prev = from;
    for &fr in fractions[1..].iter().chain(std::iter::once(&1.0)) {
        let next = from + fr * d;
        s += gauss.integrate(prev, next, f);
        prev = next;
    }
    // orientation: integrate returns a signed value when from > to
    if d < 0.0 {
        -s
    } else {
        s
    }
}

fn checked_sigma(g: &GammaFunction, tau: f64, s: f64) -> Result<f64> {
    if !(tau > 0.0 && s > 0.0) {
        return Err(Error::InvalidArgument(format!("tau = {tau} and s = {s} must be positive")));
    }
    Ok(g.eval_inverse(tau)? * s)
}

const STEKLOV_TOL: AdaptiveOptions = AdaptiveOptions {
    rel_tol: 1e-12,
    abs_tol: 1e-15,
    max_subdivisions: 2000,
};

/// `f_{γ,τ,s}(x)`.
pub fn steklov_value(f: &dyn RealFunction, g: &GammaFunction, r: usize, tau: f64, s: f64, x: f64) -> Result<f64> {
    steklov_classical_derivative(f, g, r, tau, s, x, 0)
}

/// `(f_{γ,τ,s})^{(m)}(x)` for `0 ≤ m ≤ r`.
#[allow(clippy::too_many_arguments)]
pub fn steklov_classical_derivative(
    f: &dyn RealFunction,
    g: &GammaFunction,
    r: usize,
    tau: f64,
    s: f64,
    x: f64,
    m: usize,
) -> Result<f64> {
    if r == 0 {
        return Err(Error::InvalidArgument("Steklov order must be positive".into()));
    }
    let sigma = checked_sigma(g, tau, s)?;
    average_derivative(f, r, sigma, x, m, Rule::Adaptive(STEKLOV_TOL))
}

/// `max{1, 2r²γ(a₁) / (a₁ Σ β_k a_k^{β_k−1})}`; the averaging parameter must
/// exceed it.
pub fn steklov_parameter_bound(g: &GammaFunction, r: usize) -> Result<f64> {
    let spec = g
        .spec()
        .ok_or_else(|| Error::InvalidArgument("the averaging parameter needs the power construction".into()))?;
    let a1 = spec.a[0];
    let slope: f64 = spec.a.iter().zip(&spec.beta).map(|(a, b)| b * a.powf(b - 1.0)).sum();
    let rf = r as f64;
    Ok((2.0 * rf * rf * g.value(a1) / (a1 * slope)).max(1.0))
}

/// Twice the bound of [`steklov_parameter_bound`].
pub fn default_steklov_parameter(g: &GammaFunction, r: usize) -> Result<f64> {
    Ok(2.0 * steklov_parameter_bound(g, r)?)
}

/// `G_{γ,h} = Σ_k F_{γ,h,k} ψ_{k−1} (1 − ψ_k)` on `[t₀, t_{j+1}]`.
///
/// The τ-average in `F_{γ,h,k}` uses a fixed Gauss rule, so `F_{γ,h,k}` is
/// exactly a positive combination of Steklov functions and its derivatives
/// are the matching combinations of difference formulas. Cells may be
/// marked inactive, in which case `F_{γ,h,k} = f` there.
pub struct SteklovApproximant<'a> {
    f: &'a dyn RealFunction,
    g: &'a GammaFunction,
    r: usize,
    partition: Partition,
    bumps: BumpFamily,
    a: f64,
    /// `(γ⁻¹(τ_i), w_i)` with `Σ w_i = 1`.
    taus: Vec<(f64, f64)>,
    active: Option<Vec<bool>>,
    u_rule: GaussRule,
}

impl std::fmt::Debug for SteklovApproximant<'_> {
    fn fmt(&self, fmt: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        fmt.debug_struct("SteklovApproximant")
            .field("r", &self.r)
            .field("h", &self.partition.h())
            .field("cells", &(self.partition.points().len() - 1))
            .field("a", &self.a)
            .finish()
    }
}

const TAU_NODES: usize = 8;
const U_NODES: usize = 5;

impl<'a> SteklovApproximant<'a> {
    pub fn assemble(
        f: &'a dyn RealFunction,
        g: &'a GammaFunction,
        r: usize,
        partition: Partition,
        steklov_parameter: f64,
    ) -> Result<Self> {
        let bound = steklov_parameter_bound(g, r)?;
        if !(steklov_parameter > bound) {
            return Err(Error::InvalidArgument(format!(
                "averaging parameter {steklov_parameter} must exceed {bound}"
            )));
        }
        if partition.r() != r {
            return Err(Error::InvalidArgument("partition built for a different r".into()));
        }
        let h = partition.h();
        if !(h > 0.0) {
            return Err(Error::InvalidArgument("partition carries no step h".into()));
        }
        let bumps = BumpFamily::new(&partition);
        let a = steklov_parameter;
        let rule = GaussRule::new(TAU_NODES);
        let taus = rule
            .on(h / (2.0 * a), h / a)
            .map(|(tau, w)| Ok((g.eval_inverse(tau)?, w * 2.0 * a / h)))
            .collect::<Result<Vec<_>>>()?;
        Ok(SteklovApproximant {
            f,
            g,
            r,
            partition,
            bumps,
            a,
            taus,
            active: None,
            u_rule: GaussRule::new(U_NODES),
        })
    }

    /// Keeps the averaged functions only for indices whose cells lie within
    /// two cells of one of `rough`; elsewhere `F_{γ,h,k} = f`, which needs
    /// closed-form γ-derivatives of `f`.
    pub fn localize(mut self, rough: &[f64]) -> Result<Self> {
        let pts = self.partition.points();
        let last = pts.len() - 1;
        let mut flags = vec![false; last];
        for (k, flag) in flags.iter_mut().enumerate().skip(1) {
            let lo = pts[k.saturating_sub(2)];
            let hi = pts[(k + 2).min(last)];
            *flag = rough.iter().any(|&b| b >= lo && b <= hi);
        }
        if flags.iter().any(|&a| !a) {
            let probe = 0.5 * (pts[0] + pts[1]);
            if closed_form_gamma_jet(self.f, self.g, probe, self.r).is_none() {
                return Err(Error::InvalidArgument(
                    "localizing needs closed-form derivatives of f".into(),
                ));
            }
        }
        self.active = Some(flags);
        Ok(self)
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn bumps(&self) -> &BumpFamily {
        &self.bumps
    }

    pub fn steklov_parameter(&self) -> f64 {
        self.a
    }

    /// Number of indices `k` carrying an averaged function.
    pub fn active_count(&self) -> usize {
        match &self.active {
            None => self.partition.points().len() - 2,
            Some(flags) => flags.iter().filter(|&&a| a).count(),
        }
    }

    /// Whether `F_{γ,h,k}` is an average rather than `f` itself.
    pub fn is_averaged(&self, k: usize) -> bool {
        self.active.as_ref().is_none_or(|f| f[k])
    }

    /// Last valid index of `F_{γ,h,k}`.
    fn k_max(&self) -> usize {
        let n = self.partition.points().len();
        if self.partition.is_complete() {
            n - 2
        } else {
            n - 1
        }
    }

    fn check_k(&self, k: usize) -> Result<()> {
        if k == 0 || k > self.k_max() {
            return Err(Error::InvalidArgument(format!("cell function index {k} out of range")));
        }
        Ok(())
    }

    /// `[F^{(0)}, …, F^{(n)}]` of `F_{γ,h,k}` at `x` (classical derivatives,
    /// averaged case only).
    fn averaged_jet(&self, k: usize, x: f64, n: usize) -> Result<Vec<f64>> {
        let scale = self.partition.points()[k - 1].sqrt();
        let mut out = vec![0.0; n + 1];
        for &(s_tau, w) in &self.taus {
            let sigma = s_tau * scale;
            for (m, o) in out.iter_mut().enumerate() {
                *o += w * average_derivative(self.f, self.r, sigma, x, m, Rule::Fixed(&self.u_rule))?;
            }
        }
        Ok(out)
    }

    /// `F_{γ,h,k}(x)`.
    pub fn cell_function(&self, k: usize, x: f64) -> Result<f64> {
        self.check_k(k)?;
        if self.is_averaged(k) {
            Ok(self.averaged_jet(k, x, 0)?[0])
        } else {
            Ok(self.f.eval(x))
        }
    }

    /// `[(F_{γ,h,k})_γ^{(0)}(x), …, (F_{γ,h,k})_γ^{(n)}(x)]`.
    pub fn cell_gamma_jet(&self, k: usize, x: f64, n: usize) -> Result<Vec<f64>> {
        self.check_k(k)?;
        if self.is_averaged(k) {
            let classical = self.averaged_jet(k, x, n)?;
            Ok(gamma_jet_from_classical(self.g, x, &classical))
        } else {
            closed_form_gamma_jet(self.f, self.g, x, n)
                .ok_or_else(|| Error::InvalidArgument("no closed-form derivatives of f".into()))
        }
    }

    fn locate(&self, x: f64) -> Result<usize> {
        let i = self.partition.cell_of(x).ok_or(Error::Domain {
            value: x,
            reason: "outside the partition",
        })?;
        if !self.partition.is_complete() && i + 1 >= self.partition.points().len() - 1 {
            return Err(Error::Domain {
                value: x,
                reason: "beyond the truncated partition",
            });
        }
        Ok(i)
    }

    /// Edge cells carry a single cell function.
    fn edge_index(&self, i: usize) -> Option<usize> {
        if i == 0 {
            Some(1)
        } else if self.partition.is_complete() && i == self.partition.j() {
            Some(i)
        } else {
            None
        }
    }

    /// `G(x)` in the form `F_i + ψ_i (F_{i+1} − F_i)`.
    pub fn value(&self, x: f64) -> Result<f64> {
        Ok(self.gamma_jet(x, 0)?[0])
    }

    /// `G(x)` in the form `F_i (1 − ψ_i) + F_{i+1} ψ_i`.
    pub fn value_blend(&self, x: f64) -> Result<f64> {
        let i = self.locate(x)?;
        if let Some(k) = self.edge_index(i) {
            return self.cell_function(k, x);
        }
        let psi = self.bumps.gamma_derivative(self.g, i, x, 0)?;
        let fi = self.cell_function(i, x)?;
        let fj = if psi > 0.0 { self.cell_function(i + 1, x)? } else { 0.0 };
        Ok(fi * (1.0 - psi) + fj * psi)
    }

    /// `[G_γ^{(0)}(x), …, G_γ^{(n)}(x)]` by the product rule.
    pub fn gamma_jet(&self, x: f64, n: usize) -> Result<Vec<f64>> {
        let i = self.locate(x)?;
        if let Some(k) = self.edge_index(i) {
            return self.cell_gamma_jet(k, x, n);
        }
        let jf = self.cell_gamma_jet(i, x, n)?;
        let jpsi = self.bumps.gamma_jet(self.g, i, x, n)?;
        if jpsi.iter().all(|&v| v == 0.0) {
            return Ok(jf);
        }
        let jn = self.cell_gamma_jet(i + 1, x, n)?;
        let diff: Vec<f64> = jn.iter().zip(&jf).map(|(a, b)| a - b).collect();
        Ok((0..=n)
            .map(|q| jf[q] + (0..=q).map(|k| binomial(q, k) * diff[k] * jpsi[q - k]).sum::<f64>())
            .collect())
    }

    /// Whether `G` on cell `[t_i, t_{i+1}]` involves an averaged function.
    fn cell_differs(&self, i: usize) -> bool {
        if let Some(k) = self.edge_index(i) {
            return self.is_averaged(k);
        }
        self.is_averaged(i) || (i < self.k_max() && self.is_averaged(i + 1))
    }

    /// Maximal intervals of whole cells on which `G` may differ from `f`.
    pub fn averaged_region(&self) -> Vec<(f64, f64)> {
        let pts = self.partition.points();
        let (_, top) = self.support();
        let mut out: Vec<(f64, f64)> = Vec::new();
        for i in 0..pts.len() - 1 {
            if pts[i] >= top {
                break;
            }
            if !self.cell_differs(i) {
                continue;
            }
            match out.last_mut() {
                Some(last) if last.1 == pts[i] => last.1 = pts[i + 1],
                _ => out.push((pts[i], pts[i + 1])),
            }
        }
        out
    }

    /// Points where the top derivatives of `G` fail to be smooth: partition
    /// points of the averaged region and the images `b − jlσ/r` of the
    /// breakpoints `b` of `f`.
    pub fn irregular_points(&self) -> Vec<f64> {
        let pts = self.partition.points();
        let kinks = self.f.breakpoints();
        let rf = self.r as f64;
        let (_, top) = self.support();
        let mut out = Vec::new();
        for i in 0..pts.len() - 1 {
            if pts[i] >= top {
                break;
            }
            if !self.cell_differs(i) {
                continue;
            }
            out.push(pts[i]);
            out.push(pts[i + 1]);
            for k in [i, i + 1] {
                if k == 0 || k > self.k_max() || !self.is_averaged(k) {
                    continue;
                }
                let scale = pts[k - 1].sqrt();
                for &(s_tau, _) in &self.taus {
                    let sigma = s_tau * scale;
                    for &b in &kinks {
                        for l in 1..=self.r {
                            for j in 0..=self.r {
                                let x = b - (j * l) as f64 * sigma / rf;
                                if x > pts[i] && x < pts[i + 1] {
                                    out.push(x);
                                }
                            }
                        }
                    }
                }
            }
        }
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    /// Lower and upper end of the region where `G` is defined.
    pub fn support(&self) -> (f64, f64) {
        let pts = self.partition.points();
        if self.partition.is_complete() {
            (pts[0], pts[pts.len() - 1])
        } else {
            (pts[0], pts[pts.len() - 2])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::FnFunction;
    use crate::gamma::GammaSpec;
    use crate::quadrature::GaussRule;
    use proptest::prelude::*;

    fn gamma() -> GammaFunction {
        GammaFunction::build(GammaSpec::default()).unwrap()
    }

    fn kinked() -> FnFunction {
        FnFunction::new(|x| (x - 1.0).abs().powf(0.25) + 0.3 * x.sin())
            .with_derivatives(3, |x, k| {
                let d = x - 1.0;
                let mut c = 0.25;
                for i in 1..k {
                    c *= 0.25 - i as f64;
                }
                let p = c * d.abs().powf(0.25 - k as f64) * if k % 2 == 1 { d.signum() } else { 1.0 };
                let trig = match k % 4 {
                    1 => x.cos(),
                    2 => -x.sin(),
                    3 => -x.cos(),
                    _ => x.sin(),
                };
                p + 0.3 * trig
            })
            .with_breakpoints(vec![1.0])
    }

    #[test]
    fn irwin_hall_is_a_density() {
        let gl = GaussRule::new(20);
        for r in 1..=4 {
            for n in 1..=r {
                let mut mass = 0.0;
                let mut mean = 0.0;
                for k in 0..n {
                    let (a, b) = (k as f64 / r as f64, (k + 1) as f64 / r as f64);
                    mass += gl.integrate(a, b, |u| irwin_hall_density(n, r, u));
                    mean += gl.integrate(a, b, |u| u * irwin_hall_density(n, r, u));
                }
                assert!((mass - 1.0).abs() < 1e-13);
                assert!((mean - n as f64 / (2.0 * r as f64)).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn constant_is_reproduced() {
        let g = gamma();
        let c = FnFunction::new(|_| 3.5);
        for r in 1..=3 {
            let v = steklov_value(&c, &g, r, 0.01, 0.7, 1.2).unwrap();
            assert!((v - 3.5).abs() < 1e-12);
        }
    }

    #[test]
    fn first_order_is_a_plain_mean() {
        let g = gamma();
        let f = kinked();
        let (tau, s, x) = (0.02, 1.1, 0.97);
        let sigma = g.eval_inverse(tau).unwrap() * s;
        let direct = integrate(|u| f.eval(x + sigma * u), 0.0, 1.0, &[(1.0 - x) / sigma], &STEKLOV_TOL)
            .unwrap()
            .value;
        let v = steklov_value(&f, &g, 1, tau, s, x).unwrap();
        assert!((v - direct).abs() < 1e-12 * direct.abs());
    }

    #[test]
    fn second_order_against_tensor_quadrature() {
        let g = gamma();
        let f = kinked();
        let (tau, s) = (0.03, 1.0);
        let sigma = g.eval_inverse(tau).unwrap() * s;
        for &x in &[0.9, 0.95, 1.0, 2.5] {
            let opts = AdaptiveOptions {
                rel_tol: 1e-11,
                abs_tol: 1e-14,
                max_subdivisions: 2000,
            };
            let inner = |u1: f64| {
                let integrand = |u2: f64| {
                    let v = u1 + u2;
                    2.0 * f.eval(x + sigma * v) - f.eval(x + 2.0 * sigma * v)
                };
                let kinks = [(1.0 - x) / sigma - u1, (1.0 - x) / (2.0 * sigma) - u1];
                4.0 * integrate(integrand, 0.0, 0.5, &kinks, &opts).unwrap().value
            };
            let kinks = [(1.0 - x) / sigma, (1.0 - x) / (2.0 * sigma), (1.0 - x) / sigma - 0.5, (1.0 - x) / (2.0 * sigma) - 0.5];
            let tensor = integrate(inner, 0.0, 0.5, &kinks, &opts).unwrap().value;
            let v = steklov_value(&f, &g, 2, tau, s, x).unwrap();
            assert!((v - tensor).abs() < 1e-8 * tensor.abs(), "x = {x}: {v} vs {tensor}");
        }
    }

    #[test]
    fn top_derivative_of_monomial_is_factorial() {
        let g = gamma();
        for r in 1..=3usize {
            let f = FnFunction::new(move |x| x.powi(r as i32));
            let v = steklov_classical_derivative(&f, &g, r, 0.02, 0.8, 1.7, r).unwrap();
            assert!((v - factorial(r)).abs() < 1e-6 * factorial(r), "r = {r}: {v}");
        }
        let q = FnFunction::new(|x| 1.0 + 2.0 * x - x * x);
        assert!(steklov_classical_derivative(&q, &g, 3, 0.02, 0.8, 1.7, 3).unwrap().abs() < 1e-9);
    }

    #[test]
    fn derivatives_match_differences_of_values() {
        let g = gamma();
        let f = kinked();
        let (tau, s) = (0.02, 1.0);
        for r in 1..=3usize {
            for m in 1..=r {
                for &x in &[0.8, 0.99, 1.5] {
                    let e = 1e-4;
                    let at = |y: f64| steklov_classical_derivative(&f, &g, r, tau, s, y, m - 1).unwrap();
                    let fd = (8.0 * (at(x + e) - at(x - e)) - (at(x + 2.0 * e) - at(x - 2.0 * e))) / (12.0 * e);
                    let d = steklov_classical_derivative(&f, &g, r, tau, s, x, m).unwrap();
                    assert!((d - fd).abs() < 1e-5 * d.abs().max(1.0), "r {r} m {m} x {x}: {d} vs {fd}");
                }
            }
        }
    }

    #[test]
    fn zero_steps_are_rejected() {
        let g = gamma();
        let f = kinked();
        assert!(steklov_classical_derivative(&f, &g, 1, 0.0, 1.0, 1.0, 1).is_err());
        assert!(steklov_value(&f, &g, 1, 0.01, 0.0, 1.0).is_err());
    }

    #[test]
    fn fixed_rule_tracks_adaptive() {
        let f = kinked();
        let rule = GaussRule::new(U_NODES);
        for r in 1..=3usize {
            for m in 0..=r {
                for &x in &[0.9, 0.999, 1.2] {
                    let sigma = 0.2;
                    let a = average_derivative(&f, r, sigma, x, m, Rule::Adaptive(STEKLOV_TOL)).unwrap();
                    let b = average_derivative(&f, r, sigma, x, m, Rule::Fixed(&rule)).unwrap();
                    assert!((a - b).abs() < 1e-4 * a.abs().max(1.0), "r {r} m {m} x {x}: {a} vs {b}");
                }
            }
        }
    }

    fn approximant<'a>(f: &'a dyn RealFunction, g: &'a GammaFunction, r: usize, s: f64) -> SteklovApproximant<'a> {
        let p = Partition::build(g, r, g.value(s), 1.0, 0.125).unwrap();
        let a = default_steklov_parameter(g, r).unwrap();
        SteklovApproximant::assemble(f, g, r, p, a).unwrap()
    }

    #[test]
    fn parameter_bound() {
        let g = gamma();
        assert!((steklov_parameter_bound(&g, 1).unwrap() - 8.0).abs() < 1e-12);
        assert!((default_steklov_parameter(&g, 2).unwrap() - 64.0).abs() < 1e-12);
        let f = kinked();
        let p = Partition::build(&g, 1, g.value(0.1), 1.0, 0.125).unwrap();
        assert!(SteklovApproximant::assemble(&f, &g, 1, p, 8.0).is_err());
    }

    #[test]
    fn constant_gives_constant() {
        let g = gamma();
        let c = FnFunction::new(|_| -1.25).with_derivatives(4, |_, _| 0.0);
        let ap = approximant(&c, &g, 2, 0.12);
        let (lo, hi) = ap.support();
        for i in 0..=50 {
            let x = lo + (hi - lo) * i as f64 / 50.0;
            assert!((ap.value(x).unwrap() + 1.25).abs() < 1e-12);
        }
    }

    #[test]
    fn edge_cells_and_blend_forms() {
        let g = gamma();
        let f = kinked();
        let ap = approximant(&f, &g, 1, 0.12);
        let pts = ap.partition().points().to_vec();
        for i in 0..=10 {
            let x = pts[0] + (pts[1] - pts[0]) * i as f64 / 10.0;
            assert_eq!(ap.value(x).unwrap(), ap.cell_function(1, x).unwrap());
        }
        let j = ap.partition().j();
        let x = 0.5 * (pts[j] + pts[j + 1]);
        assert_eq!(ap.value(x).unwrap(), ap.cell_function(j, x).unwrap());
        for i in 1..j {
            for q in 1..8 {
                let x = pts[i] + (pts[i + 1] - pts[i]) * q as f64 / 8.0;
                let a = ap.value(x).unwrap();
                let b = ap.value_blend(x).unwrap();
                assert!((a - b).abs() <= 1e-14 * a.abs().max(1.0));
                let (fi, fj) = (ap.cell_function(i, x).unwrap(), ap.cell_function(i + 1, x).unwrap());
                assert!(a >= fi.min(fj) - 1e-14 && a <= fi.max(fj) + 1e-14);
            }
        }
    }

    #[test]
    fn gamma_jet_matches_differences() {
        let g = gamma();
        let f = kinked();
        let ap = approximant(&f, &g, 2, 0.12);
        let pts = ap.partition().points().to_vec();
        for &x in &[0.5 * (pts[2] + pts[3]), 0.93, 1.01, 1.7] {
            let jet = ap.gamma_jet(x, 2).unwrap();
            // differences in y = γ(x)
            let y = g.value(x);
            let e = 1e-4;
            let at = |y: f64| ap.value(g.inverse_unchecked(y)).unwrap();
            let d1 = (at(y + e) - at(y - e)) / (2.0 * e);
            let d2 = (at(y + e) - 2.0 * at(y) + at(y - e)) / (e * e);
            assert!((jet[1] - d1).abs() < 1e-5 * jet[1].abs().max(1.0), "x {x}: {} vs {d1}", jet[1]);
            assert!((jet[2] - d2).abs() < 1e-3 * jet[2].abs().max(1.0), "x {x}: {} vs {d2}", jet[2]);
        }
    }

    #[test]
    fn localized_equals_f_far_from_rough_points() {
        let g = gamma();
        let f = kinked();
        let ap = approximant(&f, &g, 2, 0.05).localize(&[1.0]).unwrap();
        assert!(ap.active_count() > 0 && ap.active_count() < 10);
        assert_eq!(ap.value(3.0).unwrap(), f.eval(3.0));
        let near = ap.value(1.0).unwrap();
        assert!((near - f.eval(1.0)).abs() > 0.0);

        let region = ap.averaged_region();
        assert_eq!(region.len(), 1);
        let (lo, hi) = region[0];
        assert!(lo < 1.0 && 1.0 < hi);
        for x in [0.5 * lo, lo - 1e-9, hi + 1e-9, 2.0 * hi] {
            if x > ap.support().0 && x < ap.support().1 {
                assert_eq!(ap.value(x).unwrap(), f.eval(x));
            }
        }
        let irregular = ap.irregular_points();
        assert!(irregular.iter().all(|&x| x >= lo && x <= hi));
        assert!(irregular.contains(&lo) && irregular.contains(&hi));
        assert!(irregular.len() > 4);
    }

    proptest! {
        #[test]
        fn steklov_is_bounded_by_coefficient_sum(x in 0.2f64..5.0, tau in 0.001f64..0.04, r in 1usize..4) {
            let g = gamma();
            let f = kinked();
            let v = steklov_value(&f, &g, r, tau, x.sqrt(), x).unwrap();
            // |f| ≤ 1.6 on the sampled range
            let sigma = g.eval_inverse(tau).unwrap() * x.sqrt();
            let b = (0..=100).map(|i| f.eval(x + r as f64 * sigma * i as f64 / 100.0).abs()).fold(0.0, f64::max) + 0.05;
            prop_assert!(v.abs() <= ((1u32 << r) - 1) as f64 * b);
        }
    }
}
