//! γ-relative differentiation, γ-polynomials, jets and generalized Taylor
//! expansion.

use std::sync::Arc;

use crate::bell::{binomial, factorial, BellTable};
use crate::error::{Error, Result};
use crate::gamma::GammaFunction;
use crate::quadrature::{integrate, AdaptiveOptions};

/// A real function on an open subinterval of `(0, ∞)`.
pub trait RealFunction: Send + Sync {
    fn eval(&self, x: f64) -> f64;

    /// `f^{(order)}(x)` when a closed form is known.
    fn classical_derivative(&self, _x: f64, _order: usize) -> Option<f64> {
        None
    }

    /// Highest order for which [`RealFunction::classical_derivative`] answers.
    fn classical_order(&self) -> usize {
        0
    }

    fn domain(&self) -> (f64, f64) {
        (0.0, f64::INFINITY)
    }

    /// Points where `f` is not smooth.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }

    /// Exact `f_γ^{(r)}(x)` when `f` knows it for this particular γ.
    fn exact_gamma_derivative(&self, _gamma: &GammaFunction, _x: f64, _r: usize) -> Option<f64> {
        None
    }
}

type EvalFn = dyn Fn(f64) -> f64 + Send + Sync;
type DerivFn = dyn Fn(f64, usize) -> f64 + Send + Sync;

/// A [`RealFunction`] assembled from closures.
#[derive(Clone)]
pub struct FnFunction {
    eval: Arc<EvalFn>,
    derivative: Option<(Arc<DerivFn>, usize)>,
    domain: (f64, f64),
    breakpoints: Vec<f64>,
}

impl std::fmt::Debug for FnFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FnFunction")
            .field("classical_order", &self.classical_order())
            .field("domain", &self.domain)
            .field("breakpoints", &self.breakpoints)
            .finish()
    }
}

impl FnFunction {
    pub fn new(eval: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        FnFunction {
            eval: Arc::new(eval),
            derivative: None,
            domain: (0.0, f64::INFINITY),
            breakpoints: Vec::new(),
        }
    }

    /// Attaches closed-form derivatives `(x, k) -> f^{(k)}(x)` for `1 <= k <= max_order`.
    pub fn with_derivatives(
        mut self,
        max_order: usize,
        d: impl Fn(f64, usize) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.derivative = Some((Arc::new(d), max_order));
        self
    }

    pub fn with_domain(mut self, lo: f64, hi: f64) -> Self {
        self.domain = (lo, hi);
        self
    }

    pub fn with_breakpoints(mut self, points: Vec<f64>) -> Self {
        self.breakpoints = points;
        self
    }
}

impl RealFunction for FnFunction {
    fn eval(&self, x: f64) -> f64 {
        (self.eval)(x)
    }

    fn classical_derivative(&self, x: f64, order: usize) -> Option<f64> {
        match &self.derivative {
            Some((d, max)) if order <= *max => Some(if order == 0 { (self.eval)(x) } else { d(x, order) }),
            _ => None,
        }
    }

    fn classical_order(&self) -> usize {
        self.derivative.as_ref().map_or(0, |(_, m)| *m)
    }

    fn domain(&self) -> (f64, f64) {
        self.domain
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.breakpoints.clone()
    }
}

/// How [`gamma_derivative`] computes `f_γ^{(r)}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeMethod {
    /// Nested quotients `(f(x_{i+1}) - f(x_i)) / (γ(x_{i+1}) - γ(x_i))` on
    /// nodes equally spaced in `y = γ(x)`, extrapolated over four steps.
    DifferenceQuotient,
    /// Finite differences of `f∘γ⁻¹` at `y = γ(x)`, extrapolated over four steps.
    ViaInverseComposition,
    /// Closed-form derivatives of `f` combined with the derivatives of `γ⁻¹`.
    ViaFaaDiBruno,
}

/// `f_γ^{(r)}(x)`.
pub fn gamma_derivative(
    f: &dyn RealFunction,
    g: &GammaFunction,
    x: f64,
    r: usize,
    method: DerivativeMethod,
) -> Result<f64> {
    let (lo, hi) = f.domain();
    if !(x > lo && x < hi) {
        return Err(Error::Domain {
            value: x,
            reason: "x must be interior to the domain of f",
        });
    }
    if let Some(index) = g.singular_points().iter().position(|&a| a == x) {
        return Err(Error::SingularPoint { x, index: index + 1 });
    }
    if r == 0 {
        return Ok(f.eval(x));
    }
    match method {
        DerivativeMethod::ViaFaaDiBruno => faa_di_bruno_gamma_derivative(f, g, x, r),
        DerivativeMethod::ViaInverseComposition | DerivativeMethod::DifferenceQuotient => {
            numeric_gamma_derivative(f, g, x, r, method)
        }
    }
}

/// The most accurate available route to `f_γ^{(r)}(x)`: an exact value the
/// function knows itself, then closed-form derivatives, then differences of
/// `f∘γ⁻¹`.
pub fn best_gamma_derivative(f: &dyn RealFunction, g: &GammaFunction, x: f64, r: usize) -> Result<f64> {
    if let Some(v) = f.exact_gamma_derivative(g, x, r) {
        return Ok(v);
    }
    let method = if f.classical_order() >= r && r <= g.r_max() {
        DerivativeMethod::ViaFaaDiBruno
    } else {
        DerivativeMethod::ViaInverseComposition
    };
    gamma_derivative(f, g, x, r, method)
}

fn faa_di_bruno_gamma_derivative(f: &dyn RealFunction, g: &GammaFunction, x: f64, r: usize) -> Result<f64> {
    if f.classical_order() < r {
        return Err(Error::InvalidArgument(format!(
            "closed-form derivatives up to order {r} are required, only {} available",
            f.classical_order()
        )));
    }
    if r > g.r_max() {
        return Err(Error::OrderTooHigh {
            order: r,
            max: g.r_max(),
        });
    }
    let inv = g.inverse_jet_at(x, r);
    let table = BellTable::new(&inv, r)?;
    let mut s = 0.0;
    for l in 1..=r {
        let b = table.get(r, l);
        if b != 0.0 {
            let d = f.classical_derivative(x, l).expect("order checked above");
            s += d * b;
        }
    }
    Ok(s)
}

/// Nodes `y0 + o_i k` for one step `k`, together with whether the offsets
/// are symmetric about `y0` (error expands in even powers of `k`).
struct Stencil {
    offsets: Vec<Vec<f64>>,
    symmetric: bool,
    k: f64,
}

fn plan_stencil(
    f: &dyn RealFunction,
    g: &GammaFunction,
    y0: f64,
    r: usize,
    method: DerivativeMethod,
) -> Result<Stencil> {
    let (dlo, dhi) = f.domain();
    let mut bad: Vec<f64> = g.kinks().iter().map(|&p| g.value(p)).collect();
    bad.extend(f.breakpoints().iter().map(|&p| g.value(p)));
    let ylo = if dlo.is_finite() { g.value(dlo) } else { f64::NEG_INFINITY };
    let yhi = if dhi.is_finite() { g.value(dhi) } else { f64::INFINITY };
    let mut below = ylo;
    let mut above = yhi;
    for &b in &bad {
        if b < y0 && b > below {
            below = b;
        }
        if b > y0 && b < above {
            above = b;
        }
    }
    let room_lo = y0 - below;
    let room_hi = above - y0;
    let target = 0.05 * (y0.abs() / 20.0).max(1.0);
    let rf = r as f64;
    let sym_half = match method {
        DerivativeMethod::ViaInverseComposition if r % 2 == 1 => (rf + 1.0) / 2.0,
        _ => rf / 2.0,
    };
    let k_sym = 0.9 * room_lo.min(room_hi) / sym_half;
    let k_fwd = 0.9 * room_hi / rf;
    let k_bwd = 0.9 * room_lo / rf;
    // one-sided stencils only cancel odd error terms through extrapolation,
    // so they get a shorter step
    let one_target = 0.25 * target;
    let one_sided = k_fwd.max(k_bwd).min(one_target);
    let (k, kind) = if k_sym >= 0.25 * one_sided {
        (k_sym.min(target), 0)
    } else if k_fwd >= k_bwd {
        (k_fwd.min(one_target), 1)
    } else {
        (k_bwd.min(one_target), -1)
    };
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::Domain {
            value: y0,
            reason: "no room for a difference stencil",
        });
    }
    let offsets = match kind {
        0 => {
            if method == DerivativeMethod::ViaInverseComposition && r % 2 == 1 {
                let h = (rf + 1.0) / 2.0;
                vec![
                    (0..=r).map(|i| i as f64 - h).collect(),
                    (0..=r).map(|i| i as f64 - h + 1.0).collect(),
                ]
            } else {
                vec![(0..=r).map(|i| i as f64 - rf / 2.0).collect()]
            }
        }
        1 => vec![(0..=r).map(|i| i as f64).collect()],
        _ => vec![(0..=r).map(|i| i as f64 - rf).collect()],
    };
    Ok(Stencil {
        offsets,
        symmetric: kind == 0,
        k,
    })
}

fn numeric_gamma_derivative(
    f: &dyn RealFunction,
    g: &GammaFunction,
    x: f64,
    r: usize,
    method: DerivativeMethod,
) -> Result<f64> {
    let y0 = g.value(x);
    let st = plan_stencil(f, g, y0, r, method)?;
    const LEVELS: usize = 4;
    let mut tab = [[0.0f64; LEVELS]; LEVELS];
    for (lvl, row) in tab.iter_mut().enumerate() {
        let k = st.k / f64::powi(2.0, lvl as i32);
        let mut est = 0.0;
        for offs in &st.offsets {
            est += match method {
                DerivativeMethod::DifferenceQuotient => divided_difference(f, g, y0, k, offs)?,
                _ => uniform_difference(f, g, y0, k, offs)?,
            };
        }
        row[0] = est / st.offsets.len() as f64;
    }
    let base: f64 = if st.symmetric { 4.0 } else { 2.0 };
    // keep the entry whose distance to its two parents is smallest; deep
    // entries win while truncation dominates, shallow ones once roundoff does
    let mut best = tab[LEVELS - 1][0];
    let mut best_err = f64::INFINITY;
    for m in 1..LEVELS {
        let div = base.powi(m as i32) - 1.0;
        for lvl in m..LEVELS {
            tab[lvl][m] = tab[lvl][m - 1] + (tab[lvl][m - 1] - tab[lvl - 1][m - 1]) / div;
            let err = (tab[lvl][m] - tab[lvl][m - 1])
                .abs()
                .max((tab[lvl][m] - tab[lvl - 1][m - 1]).abs());
            if err <= best_err {
                best_err = err;
                best = tab[lvl][m];
            }
        }
    }
    Ok(best)
}

fn node_value(f: &dyn RealFunction, g: &GammaFunction, y: f64) -> Result<(f64, f64)> {
    let x = g.inverse_unchecked(y);
    let v = f.eval(x);
    if !v.is_finite() {
        return Err(Error::NonFinite { x });
    }
    Ok((x, v))
}

fn uniform_difference(f: &dyn RealFunction, g: &GammaFunction, y0: f64, k: f64, offs: &[f64]) -> Result<f64> {
    let r = offs.len() - 1;
    let mut s = 0.0;
    for (i, &o) in offs.iter().enumerate() {
        let (_, v) = node_value(f, g, y0 + o * k)?;
        let sign = if (r - i) % 2 == 0 { 1.0 } else { -1.0 };
        s += sign * binomial(r, i) * v;
    }
    Ok(s / k.powi(r as i32))
}

fn divided_difference(f: &dyn RealFunction, g: &GammaFunction, y0: f64, k: f64, offs: &[f64]) -> Result<f64> {
    let r = offs.len() - 1;
    let mut ys = Vec::with_capacity(r + 1);
    let mut vs = Vec::with_capacity(r + 1);
    for &o in offs {
        let (x, v) = node_value(f, g, y0 + o * k)?;
        ys.push(g.value(x));
        vs.push(v);
    }
    for m in 1..=r {
        for i in 0..=(r - m) {
            let dy = ys[i + m] - ys[i];
            if dy == 0.0 {
                return Err(Error::Domain {
                    value: y0,
                    reason: "coincident quotient nodes",
                });
            }
            vs[i] = (vs[i + 1] - vs[i]) / dy;
        }
    }
    Ok(vs[0] * factorial(r))
}

/// `x ↦ Σ c_k γ(x)^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaPolynomial {
    coeffs: Vec<f64>,
    gamma: Arc<GammaFunction>,
}

impl GammaPolynomial {
    /// Trailing zero coefficients are dropped; an empty list is the zero
    /// polynomial.
    pub fn new(mut coeffs: Vec<f64>, gamma: Arc<GammaFunction>) -> Self {
        while coeffs.len() > 1 && coeffs[coeffs.len() - 1] == 0.0 {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        GammaPolynomial { coeffs, gamma }
    }

    pub fn zero(gamma: Arc<GammaFunction>) -> Self {
        GammaPolynomial::new(vec![0.0], gamma)
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn gamma(&self) -> &Arc<GammaFunction> {
        &self.gamma
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    /// `q(y)` for the underlying algebraic polynomial.
    pub fn eval_in_gamma(&self, y: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * y + c)
    }

    /// `q^{(n)}(y)`.
    pub fn algebraic_derivative(&self, y: f64, n: usize) -> f64 {
        self.derivative(n).eval_in_gamma(y)
    }

    /// The γ-polynomial whose coefficients are those of `q^{(r)}`.
    pub fn derivative(&self, r: usize) -> GammaPolynomial {
        if r > self.degree() {
            return GammaPolynomial::zero(self.gamma.clone());
        }
        let coeffs = (r..self.coeffs.len())
            .map(|k| {
                let falling: f64 = (0..r).map(|i| (k - i) as f64).product();
                self.coeffs[k] * falling
            })
            .collect();
        GammaPolynomial::new(coeffs, self.gamma.clone())
    }
}

impl RealFunction for GammaPolynomial {
    fn eval(&self, x: f64) -> f64 {
        self.eval_in_gamma(self.gamma.value(x))
    }

    fn classical_derivative(&self, x: f64, order: usize) -> Option<f64> {
        if order == 0 {
            return Some(self.eval(x));
        }
        if order > self.classical_order() {
            return None;
        }
        let y = self.gamma.value(x);
        let jet = self.gamma.jet(x, order);
        let table = BellTable::new(&jet, order).ok()?;
        Some(
            (1..=order)
                .map(|l| self.algebraic_derivative(y, l) * table.get(order, l))
                .sum(),
        )
    }

    fn classical_order(&self) -> usize {
        self.gamma.r_max().saturating_add(1).min(8)
    }

    fn breakpoints(&self) -> Vec<f64> {
        if self.degree() == 0 {
            Vec::new()
        } else {
            self.gamma.kinks()
        }
    }

    fn exact_gamma_derivative(&self, gamma: &GammaFunction, x: f64, r: usize) -> Option<f64> {
        if gamma == self.gamma.as_ref() {
            Some(self.algebraic_derivative(self.gamma.value(x), r))
        } else {
            None
        }
    }
}

/// `f_γ^{(0)}(x₀), …, f_γ^{(n)}(x₀)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaJet {
    pub x0: f64,
    pub values: Vec<f64>,
}

impl GammaJet {
    pub fn new(x0: f64, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("a jet needs at least the value".into()));
        }
        Ok(GammaJet { x0, values })
    }

    /// The jet of `f` at `x0` up to order `n`.
    pub fn of(f: &dyn RealFunction, g: &GammaFunction, x0: f64, n: usize) -> Result<Self> {
        let values = (0..=n)
            .map(|k| best_gamma_derivative(f, g, x0, k))
            .collect::<Result<Vec<_>>>()?;
        GammaJet::new(x0, values)
    }

    pub fn order(&self) -> usize {
        self.values.len() - 1
    }
}

/// `[f_γ^{(0)}(x), …, f_γ^{(n)}(x)]` from exact γ-derivatives or closed-form
/// classical derivatives; `None` when neither is available.
pub fn closed_form_gamma_jet(f: &dyn RealFunction, g: &GammaFunction, x: f64, n: usize) -> Option<Vec<f64>> {
    if let Some(v0) = f.exact_gamma_derivative(g, x, 0) {
        let mut out = vec![v0];
        for k in 1..=n {
            out.push(f.exact_gamma_derivative(g, x, k)?);
        }
        return Some(out);
    }
    if f.classical_order() < n || n > g.r_max() {
        return None;
    }
    let mut classical = vec![f.eval(x)];
    for k in 1..=n {
        classical.push(f.classical_derivative(x, k)?);
    }
    Some(gamma_jet_from_classical(g, x, &classical))
}

/// Converts `[u, u', …, u^{(n)}]` at `x` into γ-derivatives of `u`.
pub fn gamma_jet_from_classical(g: &GammaFunction, x: f64, classical: &[f64]) -> Vec<f64> {
    let n = classical.len() - 1;
    let mut out = vec![classical[0]];
    if n == 0 {
        return out;
    }
    let inv = g.inverse_jet_at(x, n);
    let table = BellTable::new(&inv, n).expect("nonempty jet");
    for m in 1..=n {
        out.push((1..=m).map(|l| classical[l] * table.get(m, l)).sum());
    }
    out
}

/// Product rule: the jet of `f·g` from the jets of `f` and `g`.
pub fn leibniz_gamma(jf: &GammaJet, jg: &GammaJet) -> Result<GammaJet> {
    if jf.x0 != jg.x0 {
        return Err(Error::InvalidArgument(format!(
            "jets at different base points {} and {}",
            jf.x0, jg.x0
        )));
    }
    if jf.values.len() != jg.values.len() {
        return Err(Error::LengthMismatch {
            expected: jf.values.len(),
            got: jg.values.len(),
        });
    }
    let values = (0..jf.values.len())
        .map(|n| {
            (0..=n)
                .map(|k| binomial(n, k) * jf.values[k] * jg.values[n - k])
                .sum()
        })
        .collect();
    GammaJet::new(jf.x0, values)
}

/// `T(x) = Σ_k c_k (γ(x) - γ(x₀))^k` with `c_k = d_k / k!`.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaTaylor {
    pub x0: f64,
    pub y0: f64,
    pub coeffs: Vec<f64>,
    gamma: Arc<GammaFunction>,
}

impl GammaTaylor {
    pub fn eval(&self, x: f64) -> f64 {
        let d = self.gamma.value(x) - self.y0;
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * d + c)
    }

    /// The same function written in powers of `γ(x)`.
    pub fn to_gamma_polynomial(&self) -> GammaPolynomial {
        let n = self.coeffs.len();
        let mut out = vec![0.0; n];
        for (k, &c) in self.coeffs.iter().enumerate() {
            for (i, o) in out.iter_mut().enumerate().take(k + 1) {
                *o += c * binomial(k, i) * (-self.y0).powi((k - i) as i32);
            }
        }
        GammaPolynomial::new(out, self.gamma.clone())
    }
}

pub fn taylor_gamma(jet: &GammaJet, gamma: Arc<GammaFunction>) -> GammaTaylor {
    let y0 = gamma.value(jet.x0);
    let coeffs = jet
        .values
        .iter()
        .enumerate()
        .map(|(k, &d)| d / factorial(k))
        .collect();
    GammaTaylor {
        x0: jet.x0,
        y0,
        coeffs,
        gamma,
    }
}

/// `∫_{x₀}^{x} D(t) (γ(x) - γ(t))^{r-1} / (r-1)! dγ(t)` where `D` is the
/// r-th γ-derivative of some function, integrated in `y = γ(t)`.
pub fn taylor_remainder_with(
    d_r: impl Fn(f64) -> f64,
    g: &GammaFunction,
    x0: f64,
    x: f64,
    r: usize,
    opts: &AdaptiveOptions,
) -> Result<f64> {
    if r == 0 {
        return Err(Error::InvalidArgument("remainder order must be positive".into()));
    }
    let y0 = g.value(x0);
    let y = g.value(x);
    let breaks: Vec<f64> = g.kinks().iter().map(|&p| g.value(p)).collect();
    let fact = factorial(r - 1);
    let res = integrate(
        |eta| d_r(g.inverse_unchecked(eta)) * (y - eta).powi(r as i32 - 1) / fact,
        y0,
        y,
        &breaks,
        opts,
    )?;
    Ok(res.require_converged()?.value)
}

/// The integral remainder `f(x) - T_{γ,r-1}(x)` of `f` about `x₀`.
pub fn taylor_remainder(
    f: &dyn RealFunction,
    g: &GammaFunction,
    x0: f64,
    x: f64,
    r: usize,
    opts: &AdaptiveOptions,
) -> Result<f64> {
    if x == x0 {
        return Ok(0.0);
    }
    best_gamma_derivative(f, g, 0.5 * (x0 + x), r)?;
    taylor_remainder_with(
        |t| {
            if g.singular_points().contains(&t) {
                0.0
            } else {
                best_gamma_derivative(f, g, t, r).unwrap_or(f64::NAN)
            }
        },
        g,
        x0,
        x,
        r,
        opts,
    )
}

/// `∫_a^b h(x) dγ(x)`, integrated in `y = γ(x)`.
pub fn gamma_stieltjes_integral(
    h: impl Fn(f64) -> f64,
    g: &GammaFunction,
    a: f64,
    b: f64,
    opts: &AdaptiveOptions,
) -> Result<f64> {
    let breaks: Vec<f64> = g.kinks().iter().map(|&p| g.value(p)).collect();
    let res = integrate(|eta| h(g.inverse_unchecked(eta)), g.value(a), g.value(b), &breaks, opts)?;
    Ok(res.require_converged()?.value)
}
