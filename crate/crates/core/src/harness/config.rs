//! Experiment configuration read from TOML.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;

use super::catalog::{default_catalog, CatalogFunction};
use crate::error::{Error, Result};
use crate::gamma::{GammaFunction, GammaSpec};
use crate::modulus::AnalysisConfig;
use crate::weight::{admissibility_bound, default_constants, max_time_horizon, Exponent, HorizonVariant, QuadratureConfig};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    gamma: RawGamma,
    grid: RawGrid,
    #[serde(default)]
    constants: RawConstants,
    #[serde(default)]
    quad: RawQuad,
    #[serde(default)]
    out: RawOut,
    #[serde(default)]
    catalog: RawCatalog,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGamma {
    a: Vec<f64>,
    beta: Vec<f64>,
    r_max: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    r: Vec<usize>,
    p: Vec<Exponent>,
    alpha: Vec<f64>,
    t_decades: Option<[f64; 2]>,
    #[serde(default = "default_per_decade")]
    t_per_decade: usize,
    h_points: Option<usize>,
}

fn default_per_decade() -> usize {
    8
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConstants {
    #[serde(rename = "A1")]
    a1: Option<f64>,
    #[serde(rename = "A2")]
    a2: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawQuad {
    rel_tol: Option<f64>,
    abs_tol: Option<f64>,
    max_subdivisions: Option<usize>,
    sup_grid_density: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOut {
    csv: Option<PathBuf>,
    svg: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCatalog {
    functions: Option<Vec<String>>,
    #[serde(default)]
    custom: Vec<RawCustom>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCustom {
    id: String,
    /// `(coefficient, id of a default catalog entry)`.
    terms: Vec<(f64, String)>,
}

/// How the `t` values are chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeGrid {
    /// `[lo, hi]` for every `r`.
    Decades { lo: f64, hi: f64 },
    /// `[T/10, T]` with `T` the horizon of each `r`.
    Auto,
}

/// A validated experiment.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub gamma: Arc<GammaFunction>,
    pub r: Vec<usize>,
    pub p: Vec<Exponent>,
    pub alpha: Vec<f64>,
    pub time_grid: TimeGrid,
    pub t_per_decade: usize,
    pub a1: f64,
    pub a2: f64,
    pub h_points: usize,
    pub quad: QuadratureConfig,
    pub csv: Option<PathBuf>,
    pub svg: Option<PathBuf>,
    /// Horizon per entry of `r`.
    pub horizons: Vec<f64>,
    pub functions: Vec<CatalogFunction>,
}

fn config_error(key: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        key: key.into(),
        reason: reason.into(),
    }
}

/// Largest admissible `t` for order `r`: the construction horizon, never
/// above the window admissibility bound.
pub fn horizon(g: &GammaFunction, r: usize, a1: f64, a2: f64) -> Result<f64> {
    Ok(max_time_horizon(g, r, a1, a2, HorizonVariant::UpperConstruction)?.min(admissibility_bound(g, r, a1, a2)))
}

/// `n = max(2, round(per_decade · log10(hi/lo)))` log-spaced points from
/// `hi` down to `lo`, both included.
pub fn log_grid(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    if hi <= lo {
        return vec![hi];
    }
    let n = ((per_decade as f64 * (hi / lo).log10()).round() as usize).max(2);
    let ratio = (lo / hi).ln() / (n - 1) as f64;
    (0..n)
        .map(|i| match i {
            0 => hi,
            i if i == n - 1 => lo,
            i => hi * (ratio * i as f64).exp(),
        })
        .collect()
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| config_error("<document>", e.message()))?;
        let raw: RawConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let key = e.path().to_string();
            config_error(&key, e.into_inner().message())
        })?;
        Self::validate(raw)
    }

    fn validate(raw: RawConfig) -> Result<Self> {
        let RawConfig {
            gamma,
            grid,
            constants,
            quad,
            out,
            catalog,
        } = raw;
        for (key, empty) in [
            ("grid.r", grid.r.is_empty()),
            ("grid.p", grid.p.is_empty()),
            ("grid.alpha", grid.alpha.is_empty()),
        ] {
            if empty {
                return Err(config_error(key, "list must not be empty"));
            }
        }
        if let Some(&r) = grid.r.iter().find(|&&r| r == 0 || r > gamma.r_max) {
            return Err(config_error("grid.r", format!("r = {r} must lie in 1..={}", gamma.r_max)));
        }
        let r_top = *grid.r.iter().max().expect("nonempty");
        let bound = 1.0 / r_top as f64;
        if let Some((k, b)) = gamma.beta.iter().enumerate().find(|(_, &b)| !(b > 0.0 && b < bound)) {
            return Err(config_error(
                "gamma.beta",
                format!("beta_{} = {b} violates 0 < beta_k < 1/r = {bound} for r = {r_top}", k + 1),
            ));
        }
        let spec = GammaSpec {
            a: gamma.a,
            beta: gamma.beta,
            r_max: gamma.r_max,
        };
        spec.validate().map_err(|e| config_error("gamma", e.to_string()))?;
        let g = Arc::new(GammaFunction::build(spec).map_err(|e| config_error("gamma", e.to_string()))?);

        if let Some(&a) = grid.alpha.iter().find(|a| !(**a >= 0.0 && a.is_finite())) {
            return Err(config_error("grid.alpha", format!("alpha = {a} must be finite and nonnegative")));
        }
        if grid.t_per_decade == 0 {
            return Err(config_error("grid.t_per_decade", "must be positive"));
        }
        let (d1, d2) = default_constants(&g);
        let a1 = constants.a1.unwrap_or(d1);
        let a2 = constants.a2.unwrap_or(d2);
        if !(a1 >= 0.25 && a1.is_finite()) {
            return Err(config_error("constants.A1", format!("A1 = {a1} must be at least 1/4")));
        }
        if !(a2 > 0.0 && a2.is_finite()) {
            return Err(config_error("constants.A2", format!("A2 = {a2} must be positive")));
        }

        let mut q = QuadratureConfig::default();
        q.rel_tol = quad.rel_tol.unwrap_or(q.rel_tol);
        q.abs_tol = quad.abs_tol.unwrap_or(q.abs_tol);
        q.max_subdivisions = quad.max_subdivisions.unwrap_or(q.max_subdivisions);
        q.sup_grid_density = quad.sup_grid_density.unwrap_or(q.sup_grid_density);
        q.validate().map_err(|e| config_error("quad", e.to_string()))?;

        let h_points = grid.h_points.unwrap_or(24);
        if h_points == 0 {
            return Err(config_error("grid.h_points", "must be positive"));
        }

        let horizons = grid
            .r
            .iter()
            .map(|&r| horizon(&g, r, a1, a2))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| config_error("gamma", e.to_string()))?;
        let time_grid = match grid.t_decades {
            None => TimeGrid::Auto,
            Some([lo, hi]) => {
                if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
                    return Err(config_error("grid.t_decades", format!("need 0 < t_lo <= t_hi, got [{lo}, {hi}]")));
                }
                let ts = log_grid(lo, hi, grid.t_per_decade);
                for (&r, &h) in grid.r.iter().zip(&horizons) {
                    let bad: Vec<String> = ts.iter().filter(|&&t| t > h).map(|t| format!("{t:.6e}")).collect();
                    if !bad.is_empty() {
                        return Err(config_error(
                            "grid.t_decades",
                            format!("t values [{}] exceed the horizon {h:.6e} for r = {r}", bad.join(", ")),
                        ));
                    }
                }
                TimeGrid::Decades { lo, hi }
            }
        };

        let functions = select_functions(&g, r_top, catalog)?;
        Ok(ExperimentConfig {
            gamma: g,
            r: grid.r,
            p: grid.p,
            alpha: grid.alpha,
            time_grid,
            t_per_decade: grid.t_per_decade,
            a1,
            a2,
            h_points,
            quad: q,
            csv: out.csv,
            svg: out.svg,
            horizons,
            functions,
        })
    }

    /// The defaults with the given lists and the automatic decade.
    pub fn with_defaults(gamma: Arc<GammaFunction>, r: Vec<usize>, p: Vec<Exponent>, alpha: Vec<f64>) -> Result<Self> {
        let (a1, a2) = default_constants(&gamma);
        let r_top = r.iter().copied().max().unwrap_or(1);
        let horizons = r.iter().map(|&r| horizon(&gamma, r, a1, a2)).collect::<Result<Vec<_>>>()?;
        let functions = default_catalog(&gamma, r_top)?;
        Ok(ExperimentConfig {
            gamma,
            r,
            p,
            alpha,
            time_grid: TimeGrid::Auto,
            t_per_decade: default_per_decade(),
            a1,
            a2,
            h_points: 24,
            quad: QuadratureConfig::default(),
            csv: None,
            svg: None,
            horizons,
            functions,
        })
    }

    /// The `t` values used for `r`, decreasing.
    pub fn ts_for(&self, r: usize) -> Vec<f64> {
        match self.time_grid {
            TimeGrid::Decades { lo, hi } => log_grid(lo, hi, self.t_per_decade),
            TimeGrid::Auto => {
                let i = self.r.iter().position(|&x| x == r);
                let top = match i {
                    Some(i) => self.horizons[i],
                    None => horizon(&self.gamma, r, self.a1, self.a2).unwrap_or(f64::NAN),
                };
                log_grid(top / 10.0, top, self.t_per_decade)
            }
        }
    }

    pub fn analysis(&self) -> AnalysisConfig {
        AnalysisConfig {
            a1: self.a1,
            a2: self.a2,
            h_points: self.h_points,
            h_ratio: 0.75,
            quad: self.quad.clone(),
            primed_tails: false,
        }
    }
}

fn select_functions(g: &Arc<GammaFunction>, r_top: usize, catalog: RawCatalog) -> Result<Vec<CatalogFunction>> {
    let all = default_catalog(g, r_top)?;
    let find = |id: &str, key: &str| {
        all.iter()
            .find(|f| f.id() == id)
            .cloned()
            .ok_or_else(|| config_error(key, format!("unknown catalog function `{id}`")))
    };
    let mut out = match catalog.functions {
        None => all.clone(),
        Some(ids) => ids
            .iter()
            .enumerate()
            .map(|(i, id)| find(id, &format!("catalog.functions[{i}]")))
            .collect::<Result<Vec<_>>>()?,
    };
    for (i, c) in catalog.custom.into_iter().enumerate() {
        let key = format!("catalog.custom[{i}]");
        let terms = c
            .terms
            .iter()
            .map(|(coef, id)| find(id, &format!("{key}.terms")).map(|f| (*coef, f)))
            .collect::<Result<Vec<_>>>()?;
        out.push(CatalogFunction::custom_sum(c.id, terms).map_err(|e| config_error(&key, e.to_string()))?);
    }
    let mut ids: Vec<&str> = out.iter().map(|f| f.id()).collect();
    ids.sort_unstable();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(config_error("catalog", format!("duplicate function id `{}`", w[0])));
    }
    if out.is_empty() {
        return Err(config_error("catalog.functions", "list must not be empty"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[gamma]
a = [1.0]
beta = [0.25]
r_max = 3

[grid]
r = [1]
p = [2]
alpha = [0]

[catalog]
functions = ["exp_decay"]
"#;

    fn key_of(e: Error) -> String {
        match e {
            Error::Config { key, .. } => key,
            other => panic!("expected a config error, got {other}"),
        }
    }

    #[test]
    fn minimal_config_is_valid() {
        let c = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(c.functions.len(), 1);
        assert_eq!(c.p, vec![Exponent::Finite(2.0)]);
        assert_eq!((c.a1, c.a2), (1.0, 0.125));
        let ts = c.ts_for(1);
        assert_eq!(ts.len(), 8);
        assert!((ts[0] - c.horizons[0]).abs() < 1e-15 && (ts[7] - c.horizons[0] / 10.0).abs() < 1e-15);
        assert!(ts.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn infinity_and_all_keys() {
        let text = r#"
[gamma]
a = [1.0]
beta = [0.2]
r_max = 3
[grid]
r = [1, 2]
p = [2, "inf"]
alpha = [0, 1.0]
t_decades = [0.002, 0.02]
t_per_decade = 4
h_points = 12
[constants]
A1 = 1.0
A2 = 0.1
[quad]
rel_tol = 1e-8
abs_tol = 1e-13
[out]
csv = "run.csv"
svg = "run.svg"
[[catalog.custom]]
id = "mix"
terms = [[2.0, "exp_decay"], [-1.0, "power_one"]]
"#;
        let c = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(c.p, vec![Exponent::Finite(2.0), Exponent::Infinity]);
        assert_eq!(c.ts_for(2).len(), 4);
        assert_eq!(c.h_points, 12);
        assert_eq!(c.quad.rel_tol, 1e-8);
        assert_eq!(c.csv.as_deref(), Some(Path::new("run.csv")));
        assert_eq!(c.functions.last().unwrap().id(), "mix");
        assert_eq!(c.functions.len(), 10);
    }

    #[test]
    fn schema_errors_carry_key_paths() {
        let bad = MINIMAL.replace("p = [2]", "p = [0.5]");
        assert_eq!(key_of(ExperimentConfig::from_toml(&bad).unwrap_err()), "grid.p[0]");
        let bad = MINIMAL.replace("r_max = 3", "r_max = \"three\"");
        assert_eq!(key_of(ExperimentConfig::from_toml(&bad).unwrap_err()), "gamma.r_max");
        let bad = MINIMAL.replace("alpha = [0]", "alpha = [0]\nbogus = 1");
        assert!(key_of(ExperimentConfig::from_toml(&bad).unwrap_err()).starts_with("grid"));
        let bad = MINIMAL.replace("r = [1]", "r = []");
        assert_eq!(key_of(ExperimentConfig::from_toml(&bad).unwrap_err()), "grid.r");
        let bad = MINIMAL.replace("\"exp_decay\"", "\"nope\"");
        assert_eq!(key_of(ExperimentConfig::from_toml(&bad).unwrap_err()), "catalog.functions[0]");
    }

    #[test]
    fn rejects_t_above_horizon_with_its_value() {
        let bad = MINIMAL.replace("alpha = [0]", "alpha = [0]\nt_decades = [0.01, 0.5]");
        let e = ExperimentConfig::from_toml(&bad).unwrap_err();
        let msg = e.to_string();
        let g = GammaFunction::build(GammaSpec::default()).unwrap();
        let h = horizon(&g, 1, 1.0, 0.125).unwrap();
        assert!(msg.contains(&format!("{h:.6e}")), "{msg}");
        assert!(msg.contains("5.000000e-1"), "{msg}");
    }

    #[test]
    fn rejects_beta_against_largest_r() {
        let bad = MINIMAL.replace("r = [1]", "r = [1, 3]").replace("beta = [0.25]", "beta = [0.34]");
        let e = ExperimentConfig::from_toml(&bad).unwrap_err();
        assert_eq!(key_of(e.clone()), "gamma.beta");
        assert!(e.to_string().contains("1/r"));
        let bad = MINIMAL.replace("r = [1]", "r = [4]");
        assert_eq!(key_of(ExperimentConfig::from_toml(&bad).unwrap_err()), "grid.r");
    }

    #[test]
    fn log_grid_endpoints() {
        let g = log_grid(1e-3, 1e-1, 3);
        assert_eq!(g.len(), 6);
        assert_eq!((g[0], g[5]), (1e-1, 1e-3));
        assert_eq!(log_grid(0.5, 0.5, 8), vec![0.5]);
    }
}
