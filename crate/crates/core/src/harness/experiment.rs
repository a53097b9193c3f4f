//! The batch runner over `(function, r, p, α, t)`.

use rayon::prelude::*;

use super::catalog::CatalogFunction;
use super::config::ExperimentConfig;
use crate::kfunctional::{full_k_upper, restricted_k_curve, CandidateSet, KEstimate};
use crate::modulus::{complete_from_main, main_modulus_curve, MainModulus, ModulusResult};
use crate::weight::Exponent;

/// What to compute besides Ω and K̃.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Quantities {
    pub complete_modulus: bool,
    pub full_k: bool,
}

impl Default for Quantities {
    fn default() -> Self {
        Quantities {
            complete_modulus: true,
            full_k: true,
        }
    }
}

/// One grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRow {
    pub function_id: String,
    pub r: usize,
    pub p: Exponent,
    pub alpha: f64,
    pub t: f64,
    /// `Ω^n(f, t)` for `n = 1..=r`.
    pub omega_orders: Vec<Option<f64>>,
    pub modulus: Option<ModulusResult>,
    pub k_restricted: Option<KEstimate>,
    pub k_full: Option<KEstimate>,
    /// `K̃ / Σ_n t^{r−n} Ω^n`.
    pub ratio14: Option<f64>,
    /// `K̃ / Ω¹`, only for `r = 1`.
    pub ratio_equiv: Option<f64>,
    /// `K / ω`.
    pub ratio_full: Option<f64>,
    pub status: String,
}

impl ExperimentRow {
    /// `Ω^r`.
    pub fn omega_main(&self) -> Option<f64> {
        self.omega_orders.last().copied().flatten()
    }

    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RatioKind {
    Ratio14,
    Equiv,
    Full,
}

impl RatioKind {
    pub fn name(self) -> &'static str {
        match self {
            RatioKind::Ratio14 => "ratio14",
            RatioKind::Equiv => "ratio_equiv",
            RatioKind::Full => "ratio_full",
        }
    }

    fn of(self, row: &ExperimentRow) -> Option<f64> {
        match self {
            RatioKind::Ratio14 => row.ratio14,
            RatioKind::Equiv => row.ratio_equiv,
            RatioKind::Full => row.ratio_full,
        }
    }
}

/// Range of one ratio over the `t` grid of a cell group.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioSummary {
    pub function_id: String,
    pub r: usize,
    pub p: Exponent,
    pub alpha: f64,
    pub ratio: RatioKind,
    /// Number of `t` with a defined, positive ratio.
    pub count: usize,
    pub min: f64,
    pub max: f64,
    /// `max / min`.
    pub spread: f64,
    /// Ratio at the smallest `t` over the ratio at the largest `t`.
    pub trend: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentReport {
    pub rows: Vec<ExperimentRow>,
    pub summaries: Vec<RatioSummary>,
}

impl ExperimentReport {
    pub fn summary(&self, function_id: &str, r: usize, p: Exponent, alpha: f64, ratio: RatioKind) -> Option<&RatioSummary> {
        self.summaries
            .iter()
            .find(|s| s.function_id == function_id && s.r == r && s.p == p && s.alpha == alpha && s.ratio == ratio)
    }
}

fn ratio(num: Option<f64>, den: Option<f64>) -> Option<f64> {
    match (num, den) {
        (Some(n), Some(d)) if d > 0.0 && n.is_finite() && d.is_finite() => Some(n / d),
        _ => None,
    }
}

fn note(errors: &mut Vec<String>, what: &str, e: impl std::fmt::Display) {
    errors.push(format!("{what}: {e}"));
}

pub fn run_experiment(cfg: &ExperimentConfig) -> ExperimentReport {
    run_experiment_with(cfg, Quantities::default())
}

pub fn run_experiment_with(cfg: &ExperimentConfig, what: Quantities) -> ExperimentReport {
    let mut groups = Vec::new();
    for f in &cfg.functions {
        for &r in &cfg.r {
            for &p in &cfg.p {
                for &alpha in &cfg.alpha {
                    groups.push((f, r, p, alpha));
                }
            }
        }
    }
    let rows: Vec<ExperimentRow> = groups
        .par_iter()
        .flat_map_iter(|&(f, r, p, alpha)| run_group(cfg, f, r, p, alpha, what))
        .collect();
    let mut summaries = Vec::new();
    for &(f, r, p, alpha) in &groups {
        let group: Vec<&ExperimentRow> = rows
            .iter()
            .filter(|x| x.function_id == f.id() && x.r == r && x.p == p && x.alpha == alpha)
            .collect();
        for kind in [RatioKind::Ratio14, RatioKind::Equiv, RatioKind::Full] {
            if kind == RatioKind::Equiv && r != 1 {
                continue;
            }
            summaries.push(summarize(&group, f.id(), r, p, alpha, kind));
        }
    }
    ExperimentReport { rows, summaries }
}

fn summarize(group: &[&ExperimentRow], id: &str, r: usize, p: Exponent, alpha: f64, kind: RatioKind) -> RatioSummary {
    let vals: Vec<(f64, f64)> = group
        .iter()
        .filter_map(|row| kind.of(row).filter(|v| *v > 0.0).map(|v| (row.t, v)))
        .collect();
    let min = vals.iter().map(|v| v.1).fold(f64::INFINITY, f64::min);
    let max = vals.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max);
    let smallest_t = vals.iter().min_by(|a, b| a.0.total_cmp(&b.0));
    let largest_t = vals.iter().max_by(|a, b| a.0.total_cmp(&b.0));
    let (spread, trend) = match (smallest_t, largest_t) {
        (Some(s), Some(l)) => (max / min, s.1 / l.1),
        _ => (f64::NAN, f64::NAN),
    };
    RatioSummary {
        function_id: id.to_string(),
        r,
        p,
        alpha,
        ratio: kind,
        count: vals.len(),
        min: if vals.is_empty() { f64::NAN } else { min },
        max: if vals.is_empty() { f64::NAN } else { max },
        spread,
        trend,
    }
}

fn run_group(cfg: &ExperimentConfig, f: &CatalogFunction, r: usize, p: Exponent, alpha: f64, what: Quantities) -> Vec<ExperimentRow> {
    let g = &cfg.gamma;
    let analysis = cfg.analysis();
    let ts = cfg.ts_for(r);
    let mut omegas: Vec<Vec<crate::Result<MainModulus>>> =
        (1..=r).map(|n| main_modulus_curve(f, g, n, &ts, p, alpha, &analysis)).collect();
    let k_tilde = restricted_k_curve(f, g, r, &ts, p, alpha, &analysis, CandidateSet::default());
    let main_r = omegas.pop().expect("r >= 1");
    ts.par_iter()
        .zip(main_r)
        .zip(k_tilde)
        .enumerate()
        .map(|(i, ((&t, main), kt))| {
            let mut errors = Vec::new();
            let mut omega_orders: Vec<Option<f64>> = omegas
                .iter()
                .enumerate()
                .map(|(n, curve)| match &curve[i] {
                    Ok(m) => Some(m.omega),
                    Err(e) => {
                        note(&mut errors, &format!("omega{}", n + 1), e);
                        None
                    }
                })
                .collect();
            let modulus = match main {
                Ok(m) => {
                    omega_orders.push(Some(m.omega));
                    if what.complete_modulus {
                        complete_from_main(f, g, r, t, p, alpha, &analysis, m)
                            .map_err(|e| note(&mut errors, "omega_complete", e))
                            .ok()
                    } else {
                        None
                    }
                }
                Err(e) => {
                    note(&mut errors, "omega_main", e);
                    omega_orders.push(None);
                    None
                }
            };
            let k_restricted = kt.map_err(|e| note(&mut errors, "k_restricted", e)).ok();
            let k_full = if what.full_k {
                full_k_upper(f, g, r, t, p, alpha, &analysis)
                    .map_err(|e| note(&mut errors, "k_full", e))
                    .ok()
            } else {
                None
            };
            let den14 = omega_orders
                .iter()
                .enumerate()
                .map(|(n, o)| o.map(|o| t.powi((r - n - 1) as i32) * o))
                .sum::<Option<f64>>();
            let kt_val = k_restricted.as_ref().map(|k| k.value);
            let ratio14 = ratio(kt_val, den14);
            let ratio_equiv = if r == 1 { ratio(kt_val, omega_orders[0]) } else { None };
            let ratio_full = ratio(
                k_full.as_ref().map(|k| k.value),
                modulus.as_ref().map(|m| m.omega_complete),
            );
            let status = if !errors.is_empty() {
                format!("error: {}", errors.join("; "))
            } else if ratio14.is_none() && kt_val.is_some() && den14.is_some() {
                "ratio_undefined".to_string()
            } else {
                "ok".to_string()
            };
            ExperimentRow {
                function_id: f.id().to_string(),
                r,
                p,
                alpha,
                t,
                omega_orders,
                modulus,
                k_restricted,
                k_full,
                ratio14,
                ratio_equiv,
                ratio_full,
                status,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gamma::{GammaFunction, GammaSpec};
    use std::sync::Arc;

    fn config(ids: &[&str], r: usize, p: Exponent) -> ExperimentConfig {
        let g = Arc::new(GammaFunction::build(GammaSpec::default()).unwrap());
        let mut c = ExperimentConfig::with_defaults(g, vec![r], vec![p], vec![0.0]).unwrap();
        c.functions.retain(|f| ids.contains(&f.id()));
        c.t_per_decade = 3;
        c.h_points = 8;
        c
    }

    #[test]
    fn zero_function_rows_are_zero_with_undefined_ratios() {
        let c = config(&["zero"], 1, Exponent::Finite(2.0));
        let rep = run_experiment(&c);
        assert_eq!(rep.rows.len(), 3);
        for row in &rep.rows {
            assert_eq!(row.omega_main(), Some(0.0));
            let m = row.modulus.as_ref().unwrap();
            assert_eq!((m.tail_zero, m.tail_infinity, m.omega_complete), (0.0, 0.0, 0.0));
            assert_eq!(row.k_restricted.as_ref().unwrap().value, 0.0);
            assert_eq!(row.k_full.as_ref().unwrap().value, 0.0);
            assert_eq!((row.ratio14, row.ratio_equiv, row.ratio_full), (None, None, None));
            assert_eq!(row.status, "ratio_undefined");
        }
        let s = rep.summary("zero", 1, Exponent::Finite(2.0), 0.0, RatioKind::Ratio14).unwrap();
        assert_eq!(s.count, 0);
        assert!(s.spread.is_nan());
    }

    #[test]
    fn gamma_poly_below_r_has_zero_tails_and_k() {
        let c = config(&["gamma_poly_1"], 2, Exponent::Finite(2.0));
        let rep = run_experiment(&c);
        for row in &rep.rows {
            let m = row.modulus.as_ref().unwrap();
            assert!(m.tail_zero <= 1e-10 && m.tail_infinity <= 1e-10, "{m:?}");
            assert!(row.k_restricted.as_ref().unwrap().value <= 1e-10);
            assert!(row.k_full.as_ref().unwrap().value <= 1e-10);
            assert_eq!(row.omega_orders.len(), 2);
        }
    }

    #[test]
    fn smooth_function_ratios_are_bounded() {
        let c = config(&["exp_decay"], 1, Exponent::Finite(2.0));
        let rep = run_experiment(&c);
        assert!(rep.rows.iter().all(ExperimentRow::is_ok));
        for row in &rep.rows {
            assert_eq!(row.ratio14, row.ratio_equiv);
        }
        let s = rep.summary("exp_decay", 1, Exponent::Finite(2.0), 0.0, RatioKind::Equiv).unwrap();
        assert_eq!(s.count, 3);
        assert!(s.spread >= 1.0 && s.spread <= 10.0, "{s:?}");
    }

    #[test]
    fn failures_are_recorded_in_row() {
        let mut c = config(&["exp_decay"], 1, Exponent::Finite(2.0));
        c.time_grid = super::super::config::TimeGrid::Decades { lo: 0.5, hi: 5.0 };
        let rep = run_experiment_with(
            &c,
            Quantities {
                complete_modulus: false,
                full_k: false,
            },
        );
        assert_eq!(rep.rows.len(), 3);
        assert!(rep.rows.iter().all(|r| r.status.starts_with("error:")), "{:?}", rep.rows[0].status);
    }
}
