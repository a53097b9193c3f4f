//! Named test functions on `(0, ∞)` with closed-form derivatives.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::calculus::{GammaPolynomial, RealFunction};
use crate::error::{Error, Result};
use crate::gamma::GammaFunction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CatalogKind {
    GammaPoly,
    PiecewisePower,
    ExpDecay,
    SmoothClassical,
    CustomSum,
}

impl fmt::Display for CatalogKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CatalogKind::GammaPoly => "gamma_poly",
            CatalogKind::PiecewisePower => "piecewise_power",
            CatalogKind::ExpDecay => "exp_decay",
            CatalogKind::SmoothClassical => "smooth_classical",
            CatalogKind::CustomSum => "custom_sum",
        })
    }
}

/// Parameters of a catalog entry.
#[derive(Debug, Clone, PartialEq)]
pub enum CatalogParams {
    /// `Σ c_k γ(x)^k`.
    GammaPoly { coefficients: Vec<f64> },
    /// `|x − center|^exponent`.
    PiecewisePower { center: f64, exponent: f64 },
    /// `e^{−rate x}`.
    ExpDecay { rate: f64 },
    /// `x e^{−rate x}`.
    SmoothClassical { rate: f64 },
    CustomSum { terms: Vec<(f64, CatalogFunction)> },
}

/// Highest classical derivative order offered by the closed forms.
const CLOSED_FORM_ORDER: usize = 8;

#[derive(Clone)]
pub struct CatalogFunction {
    id: String,
    params: CatalogParams,
    inner: Arc<dyn RealFunction>,
}

impl fmt::Debug for CatalogFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CatalogFunction")
            .field("id", &self.id)
            .field("params", &self.params)
            .finish()
    }
}

impl PartialEq for CatalogFunction {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id && self.params == other.params
    }
}

impl CatalogFunction {
    pub fn gamma_poly(id: impl Into<String>, coefficients: Vec<f64>, gamma: Arc<GammaFunction>) -> Self {
        let inner = Arc::new(GammaPolynomial::new(coefficients.clone(), gamma));
        CatalogFunction {
            id: id.into(),
            params: CatalogParams::GammaPoly { coefficients },
            inner,
        }
    }

    pub fn piecewise_power(id: impl Into<String>, center: f64, exponent: f64) -> Result<Self> {
        if !(exponent > 0.0 && center.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "|x − {center}|^{exponent} needs a positive exponent"
            )));
        }
        Ok(CatalogFunction {
            id: id.into(),
            params: CatalogParams::PiecewisePower { center, exponent },
            inner: Arc::new(PiecewisePower { center, exponent }),
        })
    }

    pub fn exp_decay(id: impl Into<String>, rate: f64) -> Result<Self> {
        positive_rate(rate)?;
        Ok(CatalogFunction {
            id: id.into(),
            params: CatalogParams::ExpDecay { rate },
            inner: Arc::new(ExpDecay { rate }),
        })
    }

    pub fn smooth_classical(id: impl Into<String>, rate: f64) -> Result<Self> {
        positive_rate(rate)?;
        Ok(CatalogFunction {
            id: id.into(),
            params: CatalogParams::SmoothClassical { rate },
            inner: Arc::new(XExpDecay { rate }),
        })
    }

    pub fn custom_sum(id: impl Into<String>, terms: Vec<(f64, CatalogFunction)>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::InvalidArgument("a custom sum needs at least one term".into()));
        }
        let parts = terms.iter().map(|(c, f)| (*c, f.inner.clone())).collect();
        Ok(CatalogFunction {
            id: id.into(),
            params: CatalogParams::CustomSum { terms },
            inner: Arc::new(Sum { parts }),
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn params(&self) -> &CatalogParams {
        &self.params
    }

    pub fn kind(&self) -> CatalogKind {
        match self.params {
            CatalogParams::GammaPoly { .. } => CatalogKind::GammaPoly,
            CatalogParams::PiecewisePower { .. } => CatalogKind::PiecewisePower,
            CatalogParams::ExpDecay { .. } => CatalogKind::ExpDecay,
            CatalogParams::SmoothClassical { .. } => CatalogKind::SmoothClassical,
            CatalogParams::CustomSum { .. } => CatalogKind::CustomSum,
        }
    }

    /// Highest order of closed-form classical derivatives.
    pub fn derivative_order(&self) -> usize {
        self.inner.classical_order()
    }

    /// Whether `f = q∘γ` with `deg q < r`, so that every K-functional
    /// estimate and every tail term vanishes.
    pub fn is_gamma_poly_below(&self, r: usize) -> bool {
        match &self.params {
            CatalogParams::GammaPoly { coefficients } => {
                coefficients.iter().rposition(|&c| c != 0.0).is_none_or(|d| d < r)
            }
            _ => false,
        }
    }
}

fn positive_rate(rate: f64) -> Result<()> {
    if rate > 0.0 && rate.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("decay rate {rate} must be positive")))
    }
}

impl RealFunction for CatalogFunction {
    fn eval(&self, x: f64) -> f64 {
        self.inner.eval(x)
    }

    fn classical_derivative(&self, x: f64, order: usize) -> Option<f64> {
        self.inner.classical_derivative(x, order)
    }

    fn classical_order(&self) -> usize {
        self.inner.classical_order()
    }

    fn domain(&self) -> (f64, f64) {
        self.inner.domain()
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.inner.breakpoints()
    }

    fn exact_gamma_derivative(&self, gamma: &GammaFunction, x: f64, r: usize) -> Option<f64> {
        self.inner.exact_gamma_derivative(gamma, x, r)
    }
}

struct PiecewisePower {
    center: f64,
    exponent: f64,
}

impl RealFunction for PiecewisePower {
    fn eval(&self, x: f64) -> f64 {
        (x - self.center).abs().powf(self.exponent)
    }

    fn classical_derivative(&self, x: f64, order: usize) -> Option<f64> {
        if order > CLOSED_FORM_ORDER {
            return None;
        }
        let d = x - self.center;
        let falling: f64 = (0..order).map(|i| self.exponent - i as f64).product();
        if falling == 0.0 {
            return Some(0.0);
        }
        let sign = if order % 2 == 1 { d.signum() } else { 1.0 };
        Some(falling * d.abs().powf(self.exponent - order as f64) * sign)
    }

    fn classical_order(&self) -> usize {
        CLOSED_FORM_ORDER
    }

    fn breakpoints(&self) -> Vec<f64> {
        vec![self.center]
    }
}

struct ExpDecay {
    rate: f64,
}

impl RealFunction for ExpDecay {
    fn eval(&self, x: f64) -> f64 {
        (-self.rate * x).exp()
    }

    fn classical_derivative(&self, x: f64, order: usize) -> Option<f64> {
        (order <= CLOSED_FORM_ORDER).then(|| (-self.rate).powi(order as i32) * (-self.rate * x).exp())
    }

    fn classical_order(&self) -> usize {
        CLOSED_FORM_ORDER
    }
}

struct XExpDecay {
    rate: f64,
}

impl RealFunction for XExpDecay {
    fn eval(&self, x: f64) -> f64 {
        x * (-self.rate * x).exp()
    }

    // (x e^{−λx})^{(k)} = (−λ)^{k−1} e^{−λx} (k − λx)
    fn classical_derivative(&self, x: f64, order: usize) -> Option<f64> {
        if order > CLOSED_FORM_ORDER {
            return None;
        }
        if order == 0 {
            return Some(self.eval(x));
        }
        let l = self.rate;
        Some((-l).powi(order as i32 - 1) * (-l * x).exp() * (order as f64 - l * x))
    }

    fn classical_order(&self) -> usize {
        CLOSED_FORM_ORDER
    }
}

struct Sum {
    parts: Vec<(f64, Arc<dyn RealFunction>)>,
}

impl RealFunction for Sum {
    fn eval(&self, x: f64) -> f64 {
        self.parts.iter().map(|(c, f)| c * f.eval(x)).sum()
    }

    fn classical_derivative(&self, x: f64, order: usize) -> Option<f64> {
        self.parts
            .iter()
            .map(|(c, f)| f.classical_derivative(x, order).map(|v| c * v))
            .sum()
    }

    fn classical_order(&self) -> usize {
        self.parts.iter().map(|(_, f)| f.classical_order()).min().unwrap_or(0)
    }

    fn domain(&self) -> (f64, f64) {
        self.parts.iter().fold((f64::NEG_INFINITY, f64::INFINITY), |(lo, hi), (_, f)| {
            let (a, b) = f.domain();
            (lo.max(a), hi.min(b))
        })
    }

    fn breakpoints(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.parts.iter().flat_map(|(_, f)| f.breakpoints()).collect();
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    fn exact_gamma_derivative(&self, gamma: &GammaFunction, x: f64, r: usize) -> Option<f64> {
        self.parts
            .iter()
            .map(|(c, f)| f.exact_gamma_derivative(gamma, x, r).map(|v| c * v))
            .sum()
    }
}

/// The default catalog for γ and the largest `r` of an experiment: the zero
/// function, `γ^d` for `d = 0..=r`, `|x − a₁|^δ` for `δ ∈ {β₁, 2β₁, 1}`,
/// `e^{−x}` and `x e^{−x/2}`.
pub fn default_catalog(gamma: &Arc<GammaFunction>, r: usize) -> Result<Vec<CatalogFunction>> {
    let spec = gamma
        .spec()
        .ok_or_else(|| Error::InvalidArgument("the default catalog needs the power construction of gamma".into()))?;
    let (a1, b1) = (spec.a[0], spec.beta[0]);
    let mut out = vec![CatalogFunction::gamma_poly("zero", Vec::new(), gamma.clone())];
    for d in 0..=r {
        let mut c = vec![0.0; d + 1];
        c[d] = 1.0;
        out.push(CatalogFunction::gamma_poly(format!("gamma_poly_{d}"), c, gamma.clone()));
    }
    out.push(CatalogFunction::piecewise_power("power_beta", a1, b1)?);
    out.push(CatalogFunction::piecewise_power("power_2beta", a1, 2.0 * b1)?);
    out.push(CatalogFunction::piecewise_power("power_one", a1, 1.0)?);
    out.push(CatalogFunction::exp_decay("exp_decay", 1.0)?);
    out.push(CatalogFunction::smooth_classical("x_exp_half", 0.5)?);
    Ok(out)
}
