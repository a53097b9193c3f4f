//! Constructive upper bounds for the restricted and the full weighted
//! γ-K-functional.
//!
//! Every estimate is the objective `‖(f − g) w_α‖ + h^r ‖g_γ^{(r)} φ^r w_α‖`
//! of an explicit candidate `g`, so each value is a genuine upper bound of
//! the infimum.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::bell::binomial;
use crate::calculus::{closed_form_gamma_jet, GammaPolynomial, RealFunction};
use crate::error::{Error, Result};
use crate::gamma::GammaFunction;
use crate::modulus::{best_approximation, forward_difference, AnalysisConfig};
use crate::partition::{psi_eval, Partition};
use crate::quadrature::{integrate, AdaptiveOptions, GaussRule};
use crate::steklov::{default_steklov_parameter, SteklovApproximant};
use crate::weight::{
    max_time_horizon, weighted_lp_norm_fn, window_interval, Exponent, HorizonVariant, LaguerreWeight, NormSpec,
    QuadratureConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum KVariant {
    Restricted,
    Full,
}

impl fmt::Display for KVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KVariant::Restricted => "restricted",
            KVariant::Full => "full",
        })
    }
}

/// Which explicit function realized an estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CandidateId {
    Zero,
    /// `f` itself.
    Function,
    /// Best γ-polynomial of degree `r − 1`.
    Polynomial,
    /// The glued Steklov approximant `G_{γ,h}`.
    Steklov,
    /// Near-zero polynomial, `G_{γ,t}` and tail polynomial joined by bumps.
    Glued,
}

impl fmt::Display for CandidateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CandidateId::Zero => "zero",
            CandidateId::Function => "function",
            CandidateId::Polynomial => "polynomial",
            CandidateId::Steklov => "steklov",
            CandidateId::Glued => "glued",
        })
    }
}

/// Switches for the candidate families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CandidateSet {
    pub zero: bool,
    pub function: bool,
    pub polynomial: bool,
    pub steklov: bool,
}

impl Default for CandidateSet {
    fn default() -> Self {
        CandidateSet {
            zero: true,
            function: true,
            polynomial: true,
            steklov: true,
        }
    }
}

/// An upper bound of a K-functional at `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct KEstimate {
    pub t: f64,
    /// The step at which the restricted supremum is attained; `t` for the
    /// full functional.
    pub h: f64,
    pub value: f64,
    pub approx_error_term: f64,
    pub seminorm_term: f64,
    pub candidate_id: CandidateId,
    pub variant: KVariant,
}

#[derive(Debug, Clone, Copy)]
struct Objective {
    error: f64,
    seminorm: f64,
    id: CandidateId,
}

impl Objective {
    fn value(&self) -> f64 {
        self.error + self.seminorm
    }
}

fn best(objectives: Vec<Objective>) -> Result<Objective> {
    objectives
        .into_iter()
        .filter(|o| o.value().is_finite())
        .min_by(|a, b| a.value().total_cmp(&b.value()))
        .ok_or_else(|| Error::InvalidArgument("no candidate produced a finite objective".into()))
}

/// Beyond this point `w_α` is below `e^{−700}` times its maximum on
/// `[lo, ∞)`.
pub fn weight_cutoff(lo: f64, alpha: f64) -> f64 {
    let peak = lo.max(alpha);
    let log_w = |x: f64| if alpha > 0.0 { alpha * x.ln() - x } else { -x };
    let target = log_w(peak) - 700.0;
    let mut x = peak + 700.0;
    for _ in 0..60 {
        let next = if alpha > 0.0 { alpha * x.ln() - target } else { -target };
        if (next - x).abs() <= 1e-12 * x {
            return next;
        }
        x = next;
    }
    x
}

/// Evaluates `v`, retrying on both sides of `x` when the value at `x`
/// itself is not finite (a singular point of `γ`).
fn robust(x: f64, v: impl Fn(f64) -> Option<f64>) -> f64 {
    if let Some(a) = v(x).filter(|a| a.is_finite()) {
        return a;
    }
    let d = 1e-9 * x.abs().max(1e-300);
    let l = v(x - d).filter(|a| a.is_finite());
    let r = v(x + d).filter(|a| a.is_finite());
    match (l, r) {
        (Some(a), Some(b)) => {
            if a.abs() >= b.abs() {
                a
            } else {
                b
            }
        }
        (Some(a), None) | (None, Some(a)) => a,
        (None, None) => f64::NAN,
    }
}

/// Points of `(lo, hi)` at which a γ-derivative of `f` of order `< r` jumps,
/// i.e. where `f` fails to be in the γ-Sobolev class locally. `None` when
/// `f` has no closed-form γ-derivatives.
pub fn rough_points(f: &dyn RealFunction, g: &GammaFunction, r: usize, lo: f64, hi: f64) -> Option<Vec<f64>> {
    let probe = if hi.is_finite() { 0.5 * (lo + hi) } else { lo + 1.0 };
    closed_form_gamma_jet(f, g, probe.max(1e-3), r)?;
    jump_points(f, g, r.saturating_sub(1), lo, hi)
}

/// Breakpoints of `f` or `γ` in `(lo, hi)` at which some γ-derivative of
/// order `≤ order` jumps or blows up.
///
/// A jump is a one-sided gap that does not shrink when the probe distance
/// shrinks by four decades.
fn jump_points(f: &dyn RealFunction, g: &GammaFunction, order: usize, lo: f64, hi: f64) -> Option<Vec<f64>> {
    let probe = if hi.is_finite() { 0.5 * (lo + hi) } else { lo + 1.0 };
    closed_form_gamma_jet(f, g, probe.max(1e-3), order)?;
    let mut candidates = f.breakpoints();
    candidates.extend(g.kinks());
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    let mut rough = Vec::new();
    for b in candidates.into_iter().filter(|&b| b > lo && b < hi) {
        let gap = |d: f64| -> Option<Vec<f64>> {
            let l = closed_form_gamma_jet(f, g, b - d, order)?;
            let u = closed_form_gamma_jet(f, g, b + d, order)?;
            Some(
                l.iter()
                    .zip(&u)
                    .map(|(a, c)| (a - c).abs() / (1.0 + a.abs().max(c.abs())))
                    .collect(),
            )
        };
        let wide = gap(1e-4 * b);
        let narrow = gap(1e-8 * b);
        let jumps = match (wide, narrow) {
            (Some(w), Some(n)) => w
                .iter()
                .zip(&n)
                .any(|(&a, &c)| !c.is_finite() || (c > 1e-9 && c > 0.5 * a)),
            _ => true,
        };
        if jumps {
            rough.push(b);
        }
    }
    Some(rough)
}

fn norm(
    v: impl Fn(f64) -> f64,
    p: Exponent,
    alpha: f64,
    lo: f64,
    hi: f64,
    kinks: &[f64],
    quad: &QuadratureConfig,
) -> Result<f64> {
    if !(hi > lo) {
        return Ok(0.0);
    }
    let spec = NormSpec::new(p, lo, hi)?;
    let cfg = quad.with_singular_points(kinks);
    Ok(weighted_lp_norm_fn(v, &LaguerreWeight::new(alpha), &spec, &cfg)?.value)
}

fn all_kinks(f: &dyn RealFunction, g: &GammaFunction) -> Vec<f64> {
    let mut k = f.breakpoints();
    k.extend(g.kinks());
    k
}

#[allow(clippy::too_many_arguments)]
fn function_objective(
    f: &dyn RealFunction,
    g: &GammaFunction,
    r: usize,
    scale: f64,
    p: Exponent,
    alpha: f64,
    (lo, hi): (f64, f64),
    quad: &QuadratureConfig,
) -> Option<Objective> {
    let rough = rough_points(f, g, r, lo, hi)?;
    if !rough.is_empty() {
        return None;
    }
    let half = r as f64 / 2.0;
    let d = |x: f64| robust(x, |y| closed_form_gamma_jet(f, g, y, r).map(|j| j[r] * y.powf(half)));
    let semi = norm(d, p, alpha, lo, hi, &all_kinks(f, g), quad).ok()?;
    Some(Objective {
        error: 0.0,
        seminorm: scale.powi(r as i32) * semi,
        id: CandidateId::Function,
    })
}

/// Tolerances for objectives of the Steklov candidates.
fn coarse(quad: &QuadratureConfig) -> QuadratureConfig {
    let mut q = quad.clone();
    q.rel_tol = q.rel_tol.max(1e-5);
    q
}

/// Largest partition on which `G` is averaged on every cell.
const MAX_STEKLOV_CELLS: usize = 64;

/// `G_{γ,h}` on a (possibly truncated) partition. With closed-form
/// derivatives of `f` it is averaged only around the points where a
/// γ-derivative of order `≤ r` misbehaves, elsewhere it is `f` itself;
/// without them it is averaged everywhere on small partitions. `None` when
/// no such candidate is worth building.
fn steklov_candidate<'a>(
    f: &'a dyn RealFunction,
    g: &'a GammaFunction,
    r: usize,
    h: f64,
    alpha: f64,
    cfg: &AnalysisConfig,
) -> Result<Option<SteklovApproximant<'a>>> {
    let win = window_interval(g, r, h, cfg.a1, cfg.a2)?;
    let cutoff = weight_cutoff(win.lo, alpha);
    let partition = if cutoff < win.hi {
        Partition::build_truncated(g, r, h, cfg.a1, cfg.a2, cutoff)?
    } else {
        Partition::build(g, r, h, cfg.a1, cfg.a2)?
    };
    let cells = partition.points().len() - 1;
    let top = partition.points()[cells];
    let a = default_steklov_parameter(g, r)?;
    match jump_points(f, g, r, partition.points()[0], top) {
        Some(points) if points.is_empty() => Ok(None),
        Some(points) => Ok(Some(SteklovApproximant::assemble(f, g, r, partition, a)?.localize(&points)?)),
        None if cells <= MAX_STEKLOV_CELLS => Ok(Some(SteklovApproximant::assemble(f, g, r, partition, a)?)),
        None => Ok(None),
    }
}

/// Gauss nodes per piece of the fixed rule on averaged regions.
const REGION_NODES: usize = 5;
/// Gaps are split geometrically toward both ends.
const GRADING: [f64; 7] = [0.0, 0.01, 0.1, 0.5, 0.9, 0.99, 1.0];

/// `Σ w |v|^p` (or `max |v|` for `p = ∞`) of both components of `v` on the
/// pieces of `region`, by a fixed Gauss rule between consecutive `breaks`,
/// each gap split near its ends.
fn fixed_pair(
    v: impl Fn(f64) -> Option<(f64, f64)>,
    p: Exponent,
    alpha: f64,
    region: &[(f64, f64)],
    breaks: &[f64],
) -> (f64, f64) {
    let rule = GaussRule::new(REGION_NODES);
    let w = LaguerreWeight::new(alpha);
    let mut acc = (0.0f64, 0.0f64);
    let mut add = |x: f64, wq: f64| {
        let (a, b) = match v(x) {
            Some((a, b)) if a.is_finite() && b.is_finite() => (a, b),
            _ => (f64::NAN, f64::NAN),
        };
        let wx = w.value(x);
        match p {
            Exponent::Infinity => {
                acc.0 = acc.0.max((a * wx).abs());
                acc.1 = acc.1.max((b * wx).abs());
            }
            Exponent::Finite(q) => {
                acc.0 += wq * (a * wx).abs().powf(q);
                acc.1 += wq * (b * wx).abs().powf(q);
            }
        }
    };
    for &(lo, hi) in region {
        let mut cuts: Vec<f64> = breaks.iter().copied().filter(|&b| b > lo && b < hi).collect();
        cuts.push(lo);
        cuts.push(hi);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        for c in cuts.windows(2) {
            let (a, b) = (c[0], c[1]);
            let d = b - a;
            for e in GRADING.windows(2) {
                for (x, wq) in rule.on(a + e[0] * d, a + e[1] * d) {
                    add(x, wq);
                }
            }
        }
    }
    acc
}

/// Parts of `(lo, hi)` outside `region`.
fn complement(lo: f64, hi: f64, region: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut from = lo;
    for &(a, b) in region {
        if a > from {
            out.push((from, a.min(hi)));
        }
        from = from.max(b);
    }
    if hi > from {
        out.push((from, hi));
    }
    out.retain(|(a, b)| b > a);
    out
}

fn clip(region: &[(f64, f64)], lo: f64, hi: f64) -> Vec<(f64, f64)> {
    region
        .iter()
        .map(|&(a, b)| (a.max(lo), b.min(hi)))
        .filter(|(a, b)| b > a)
        .collect()
}

/// `(‖e w_α‖, ‖s w_α‖)` on `(lo, hi)` for `(e, s) = jet(x)`: the fixed rule
/// on `region`, the adaptive one elsewhere.
#[allow(clippy::too_many_arguments)]
fn split_norms(
    jet: &(dyn Fn(f64) -> Option<(f64, f64)> + Sync),
    p: Exponent,
    alpha: f64,
    (lo, hi): (f64, f64),
    region: &[(f64, f64)],
    breaks: &[f64],
    kinks: &[f64],
    quad: &QuadratureConfig,
) -> Result<(f64, f64)> {
    let region = clip(region, lo, hi);
    let (mut e, mut s) = fixed_pair(jet, p, alpha, &region, breaks);
    for (a, b) in complement(lo, hi, &region) {
        let ne = norm(|x| robust(x, |y| jet(y).map(|v| v.0)), p, alpha, a, b, kinks, quad)?;
        let ns = norm(|x| robust(x, |y| jet(y).map(|v| v.1)), p, alpha, a, b, kinks, quad)?;
        match p {
            Exponent::Infinity => {
                e = e.max(ne);
                s = s.max(ns);
            }
            Exponent::Finite(q) => {
                e += ne.powf(q);
                s += ns.powf(q);
            }
        }
    }
    Ok(match p {
        Exponent::Infinity => (e, s),
        Exponent::Finite(q) => (e.powf(1.0 / q), s.powf(1.0 / q)),
    })
}

#[allow(clippy::too_many_arguments)]
fn steklov_objective(
    f: &dyn RealFunction,
    g: &GammaFunction,
    ap: &SteklovApproximant,
    r: usize,
    scale: f64,
    p: Exponent,
    alpha: f64,
    (lo, hi): (f64, f64),
    quad: &QuadratureConfig,
) -> Result<Objective> {
    let (slo, shi) = ap.support();
    let half = r as f64 / 2.0;
    let jet = |x: f64| ap.gamma_jet(x, r).ok().map(|j| (f.eval(x) - j[0], j[r] * x.powf(half)));
    let kinks = all_kinks(f, g);
    let mut breaks = ap.irregular_points();
    breaks.extend_from_slice(&kinks);
    let (error, semi) = split_norms(
        &jet,
        p,
        alpha,
        (lo.max(slo), hi.min(shi)),
        &ap.averaged_region(),
        &breaks,
        &kinks,
        &coarse(quad),
    )?;
    Ok(Objective {
        error,
        seminorm: scale.powi(r as i32) * semi,
        id: CandidateId::Steklov,
    })
}

#[allow(clippy::too_many_arguments)]
fn restricted_at(
    f: &dyn RealFunction,
    g: &Arc<GammaFunction>,
    r: usize,
    h: f64,
    p: Exponent,
    alpha: f64,
    cfg: &AnalysisConfig,
    set: CandidateSet,
) -> Result<Objective> {
    let win = window_interval(g, r, h, cfg.a1, cfg.a2)?;
    let iv = (win.lo, win.hi);
    let kinks = all_kinks(f, g);
    let mut objectives = Vec::new();
    if set.zero {
        objectives.push(Objective {
            error: norm(|x| f.eval(x), p, alpha, win.lo, win.hi, &kinks, &cfg.quad)?,
            seminorm: 0.0,
            id: CandidateId::Zero,
        });
    }
    if set.polynomial {
        let b = best_approximation(f, g, r - 1, p, alpha, iv, &cfg.quad)?;
        objectives.push(Objective {
            error: b.error,
            seminorm: 0.0,
            id: CandidateId::Polynomial,
        });
    }
    if set.function {
        if let Some(o) = function_objective(f, g, r, h, p, alpha, iv, &cfg.quad) {
            objectives.push(o);
        }
    }
    if set.steklov {
        if let Some(ap) = steklov_candidate(f, g, r, h, alpha, cfg)? {
            objectives.push(steklov_objective(f, g, &ap, r, h, p, alpha, iv, &cfg.quad)?);
        }
    }
    best(objectives)
}

/// Rejects `t` above the horizon of the constructive direction (power
/// construction of γ only).
fn check_horizon(g: &GammaFunction, r: usize, t: f64, cfg: &AnalysisConfig) -> Result<()> {
    if g.spec().is_none() {
        return Ok(());
    }
    let bound = max_time_horizon(g, r, cfg.a1, cfg.a2, HorizonVariant::UpperConstruction)?;
    if !(t > 0.0) || t > bound * (1.0 + 1e-12) {
        return Err(Error::InadmissibleStep { h: t, bound });
    }
    Ok(())
}

/// The restricted objective minimized over candidates, for each `h` of the
/// grid of `t`.
#[allow(clippy::too_many_arguments)]
pub fn restricted_k_profile(
    f: &dyn RealFunction,
    g: &Arc<GammaFunction>,
    r: usize,
    t: f64,
    p: Exponent,
    alpha: f64,
    cfg: &AnalysisConfig,
    set: CandidateSet,
) -> Result<Vec<KEstimate>> {
    if r == 0 {
        return Err(Error::InvalidArgument("r must be positive".into()));
    }
    check_horizon(g, r, t, cfg)?;
    cfg.h_grid(t)
        .into_par_iter()
        .map(|h| {
            let o = restricted_at(f, g, r, h, p, alpha, cfg, set)?;
            Ok(KEstimate {
                t,
                h,
                value: o.value(),
                approx_error_term: o.error,
                seminorm_term: o.seminorm,
                candidate_id: o.id,
                variant: KVariant::Restricted,
            })
        })
        .collect()
}

/// [`restricted_k_upper_with`] at several `t` sharing the samples of
/// [`AnalysisConfig::shared_h_grid`].
#[allow(clippy::too_many_arguments)]
pub fn restricted_k_curve(
    f: &dyn RealFunction,
    g: &Arc<GammaFunction>,
    r: usize,
    ts: &[f64],
    p: Exponent,
    alpha: f64,
    cfg: &AnalysisConfig,
    set: CandidateSet,
) -> Vec<Result<KEstimate>> {
    if r == 0 {
        return ts.iter().map(|_| Err(Error::InvalidArgument("r must be positive".into()))).collect();
    }
    let (union, members) = cfg.shared_h_grid(ts);
    let objectives: Vec<Result<Objective>> = union
        .par_iter()
        .map(|&h| restricted_at(f, g, r, h, p, alpha, cfg, set))
        .collect();
    ts.iter()
        .zip(members)
        .map(|(&t, idx)| {
            check_horizon(g, r, t, cfg)?;
            let mut top: Option<(f64, &Objective)> = None;
            for i in idx {
                let o = objectives[i].as_ref().map_err(Clone::clone)?;
                if top.is_none_or(|(_, b)| o.value() > b.value()) {
                    top = Some((union[i], o));
                }
            }
            let (h, o) = top.ok_or_else(|| Error::InvalidArgument("empty h grid".into()))?;
            Ok(KEstimate {
                t,
                h,
                value: o.value(),
                approx_error_term: o.error,
                seminorm_term: o.seminorm,
                candidate_id: o.id,
                variant: KVariant::Restricted,
            })
        })
        .collect()
}

/// Upper bound of `K̃_{γ,r,φ}(f, t^r)`: the supremum over the `h` grid of
/// the best candidate objective on `I_{rh,γ}`.
pub fn restricted_k_upper(
    f: &dyn RealFunction,
    g: &Arc<GammaFunction>,
    r: usize,
    t: f64,
    p: Exponent,
    alpha: f64,
    cfg: &AnalysisConfig,
) -> Result<KEstimate> {
    restricted_k_upper_with(f, g, r, t, p, alpha, cfg, CandidateSet::default())
}

#[allow(clippy::too_many_arguments)]
pub fn restricted_k_upper_with(
    f: &dyn RealFunction,
    g: &Arc<GammaFunction>,
    r: usize,
    t: f64,
    p: Exponent,
    alpha: f64,
    cfg: &AnalysisConfig,
    set: CandidateSet,
) -> Result<KEstimate> {
    let profile = restricted_k_profile(f, g, r, t, p, alpha, cfg, set)?;
    Ok(profile
        .into_iter()
        .max_by(|a, b| a.value.total_cmp(&b.value))
        .expect("h grid is nonempty"))
}

fn leibniz(a: &[f64], b: &[f64]) -> Vec<f64> {
    (0..a.len())
        .map(|n| (0..=n).map(|k| binomial(n, k) * a[k] * b[n - k]).sum())
        .collect()
}

/// `ψ((γ(x) − γ(lo)) / (γ(hi) − γ(lo)))` and its γ-derivatives.
fn ramp_jet(g: &GammaFunction, lo: f64, hi: f64, x: f64, n: usize) -> Result<Vec<f64>> {
    let (a, b) = (g.value(lo), g.value(hi));
    let d = b - a;
    let z = (g.value(x) - a) / d;
    (0..=n).map(|o| Ok(psi_eval(z, o)? / d.powi(o as i32))).collect()
}

/// The glued candidate `(1−ψ_a) g₁ + ψ_a (1−ψ_b) G + ψ_b g₃`.
struct Glued<'a> {
    g: &'a GammaFunction,
    near: GammaPolynomial,
    far: GammaPolynomial,
    steklov: SteklovApproximant<'a>,
    /// `(t₀, t₁)` and the last two usable points.
    first: (f64, f64),
    last: (f64, f64),
}

impl Glued<'_> {
    fn jet(&self, x: f64, n: usize) -> Result<Vec<f64>> {
        let poly_jet = |q: &GammaPolynomial| -> Vec<f64> {
            let y = self.g.value(x);
            (0..=n).map(|k| q.algebraic_derivative(y, k)).collect()
        };
        if x <= self.first.0 {
            return Ok(poly_jet(&self.near));
        }
        if x >= self.last.1 {
            return Ok(poly_jet(&self.far));
        }
        let mut out = vec![0.0; n + 1];
        let sj = self.steklov.gamma_jet(x, n)?;
        let mut middle = sj;
        if x < self.first.1 {
            let ra = ramp_jet(self.g, self.first.0, self.first.1, x, n)?;
            let mut one_minus = ra.iter().map(|v| -v).collect::<Vec<_>>();
            one_minus[0] += 1.0;
            let p1 = leibniz(&one_minus, &poly_jet(&self.near));
            middle = leibniz(&ra, &middle);
            for (o, v) in out.iter_mut().zip(&p1) {
                *o += v;
            }
        }
        if x > self.last.0 {
            let rb = ramp_jet(self.g, self.last.0, self.last.1, x, n)?;
            let mut one_minus = rb.iter().map(|v| -v).collect::<Vec<_>>();
            one_minus[0] += 1.0;
            let p3 = leibniz(&rb, &poly_jet(&self.far));
            middle = leibniz(&one_minus, &middle);
            for (o, v) in out.iter_mut().zip(&p3) {
                *o += v;
            }
        }
        for (o, v) in out.iter_mut().zip(&middle) {
            *o += v;
        }
        Ok(out)
    }
}

#[allow(clippy::too_many_arguments)]
fn glued_objective(
    f: &dyn RealFunction,
    g: &Arc<GammaFunction>,
    r: usize,
    t: f64,
    p: Exponent,
    alpha: f64,
    cfg: &AnalysisConfig,
) -> Result<Option<Objective>> {
    let Some(steklov) = steklov_candidate(f, g, r, t, alpha, cfg)? else {
        return Ok(None);
    };
    let pts = steklov.partition().points().to_vec();
    let first = (pts[0], pts[1]);
    let n = pts.len();
    let last = if steklov.partition().is_complete() {
        (pts[n - 2], pts[n - 1])
    } else {
        (pts[n - 4], pts[n - 3])
    };
    let near = best_approximation(f, g, r - 1, p, alpha, (0.0, first.1), &cfg.quad)?.poly;
    let far = best_approximation(f, g, r - 1, p, alpha, (last.0, f64::INFINITY), &cfg.quad)?.poly;
    let glued = Glued {
        g,
        near,
        far,
        steklov,
        first,
        last,
    };
    let mut kinks = all_kinks(f, g);
    kinks.extend_from_slice(&[first.0, first.1, last.0, last.1]);
    let mut breaks = glued.steklov.irregular_points();
    breaks.extend_from_slice(&kinks);
    let half = r as f64 / 2.0;
    let jet = |x: f64| glued.jet(x, r).ok().map(|j| (f.eval(x) - j[0], j[r] * x.powf(half)));
    let (error, semi) = split_norms(
        &jet,
        p,
        alpha,
        (0.0, f64::INFINITY),
        &glued.steklov.averaged_region(),
        &breaks,
        &kinks,
        &coarse(&cfg.quad),
    )?;
    Ok(Some(Objective {
        error,
        seminorm: t.powi(r as i32) * semi,
        id: CandidateId::Glued,
    }))
}

/// Upper bound of `K_{γ,r,φ}(f, t^r)` over `(0, ∞)`.
pub fn full_k_upper(
    f: &dyn RealFunction,
    g: &Arc<GammaFunction>,
    r: usize,
    t: f64,
    p: Exponent,
    alpha: f64,
    cfg: &AnalysisConfig,
) -> Result<KEstimate> {
    full_k_upper_with(f, g, r, t, p, alpha, cfg, CandidateSet::default())
}

/// [`full_k_upper`] with selected candidate families; `steklov` switches the
/// glued candidate.
#[allow(clippy::too_many_arguments)]
pub fn full_k_upper_with(
    f: &dyn RealFunction,
    g: &Arc<GammaFunction>,
    r: usize,
    t: f64,
    p: Exponent,
    alpha: f64,
    cfg: &AnalysisConfig,
    set: CandidateSet,
) -> Result<KEstimate> {
    if r == 0 {
        return Err(Error::InvalidArgument("r must be positive".into()));
    }
    check_horizon(g, r, t, cfg)?;
    let whole = (0.0, f64::INFINITY);
    let kinks = all_kinks(f, g);
    let mut objectives = Vec::new();
    if set.zero {
        objectives.push(Objective {
            error: norm(|x| f.eval(x), p, alpha, 0.0, f64::INFINITY, &kinks, &cfg.quad)?,
            seminorm: 0.0,
            id: CandidateId::Zero,
        });
    }
    if set.polynomial {
        let b = best_approximation(f, g, r - 1, p, alpha, whole, &cfg.quad)?;
        objectives.push(Objective {
            error: b.error,
            seminorm: 0.0,
            id: CandidateId::Polynomial,
        });
    }
    if set.function {
        if let Some(o) = function_objective(f, g, r, t, p, alpha, whole, &cfg.quad) {
            objectives.push(o);
        }
    }
    if set.steklov {
        if let Some(o) = glued_objective(f, g, r, t, p, alpha, cfg)? {
            objectives.push(o);
        }
    }
    let o = best(objectives)?;
    Ok(KEstimate {
        t,
        h: t,
        value: o.value(),
        approx_error_term: o.error,
        seminorm_term: o.seminorm,
        candidate_id: o.id,
        variant: KVariant::Full,
    })
}

/// Both sides of the identity expressing `Δ^r f(x)` (step `γ⁻¹(h) √x`) as an
/// integral of derivatives: for `r = 1` the γ-derivative form
/// `∫₀^S f_γ′(x+u) γ′(x+u) du`, for `r = 2` the classical
/// `∫₀^S∫₀^S f″(x+u₁+u₂) du₁ du₂`.
pub fn difference_integral_identity_check(
    f: &dyn RealFunction,
    g: &GammaFunction,
    r: usize,
    h: f64,
    x: f64,
) -> Result<(f64, f64)> {
    let lhs = forward_difference(f, g, r, h, x)?;
    let step = g.eval_inverse(h)? * x.sqrt();
    let opts = AdaptiveOptions {
        rel_tol: 1e-12,
        abs_tol: 1e-15,
        max_subdivisions: 2000,
    };
    let shifted: Vec<f64> = all_kinks(f, g).iter().map(|k| k - x).collect();
    let rhs = match r {
        1 => {
            let integrand = |u: f64| {
                let y = x + u;
                let d = closed_form_gamma_jet(f, g, y, 1).map(|j| j[1]).unwrap_or(f64::NAN);
                d * g.derivative_unchecked(y, 1)
            };
            closed_form_gamma_jet(f, g, x, 1)
                .ok_or_else(|| Error::InvalidArgument("closed-form derivatives of f are required".into()))?;
            integrate(integrand, 0.0, step, &shifted, &opts)?.require_converged()?.value
        }
        2 => {
            if f.classical_order() < 2 {
                return Err(Error::InvalidArgument("closed-form second derivative of f is required".into()));
            }
            // ∫∫ over the square equals ∫ against the triangle kernel
            let integrand = |v: f64| {
                let w = v.min(2.0 * step - v);
                f.classical_derivative(x + v, 2).unwrap_or(f64::NAN) * w
            };
            let mut bp = shifted.clone();
            bp.push(step);
            integrate(integrand, 0.0, 2.0 * step, &bp, &opts)?.require_converged()?.value
        }
        _ => {
            return Err(Error::InvalidArgument(format!(
                "the identity is implemented for r = 1 and r = 2, not {r}"
            )))
        }
    };
    Ok((lhs, rhs))
}
