use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use gamma_smoothness::harness::report::{
    emit_reports, write_main_csv, write_records, KRecord, ModulusRecord, K_HEADER, MODULUS_HEADER,
};
use gamma_smoothness::harness::{default_catalog, run_experiment, verify, CatalogFunction, ExperimentConfig, Fault, Suite};
use gamma_smoothness::kfunctional::{full_k_upper, restricted_k_curve, CandidateSet};
use gamma_smoothness::modulus::{complete_from_main, main_modulus_curve, AnalysisConfig};
use gamma_smoothness::weight::{Exponent, QuadratureConfig};
use gamma_smoothness::{GammaFunction, GammaSpec};

#[derive(Parser)]
#[command(name = "gsmooth", version, about = "Gamma-relative moduli of smoothness and K-functional bounds")]
struct Cli {
    #[command(flatten)]
    quad: QuadArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct QuadArgs {
    /// Relative tolerance of adaptive quadrature.
    #[arg(long, global = true)]
    rel_tol: Option<f64>,
    #[arg(long, global = true)]
    abs_tol: Option<f64>,
    /// Subdivision budget of adaptive quadrature.
    #[arg(long, global = true)]
    max_subdiv: Option<usize>,
    /// Grid points per unit length for sup norms.
    #[arg(long, global = true)]
    sup_grid: Option<usize>,
}

impl QuadArgs {
    fn apply(&self, q: &mut QuadratureConfig) -> Result<()> {
        q.rel_tol = self.rel_tol.unwrap_or(q.rel_tol);
        q.abs_tol = self.abs_tol.unwrap_or(q.abs_tol);
        q.max_subdivisions = self.max_subdiv.unwrap_or(q.max_subdivisions);
        q.sup_grid_density = self.sup_grid.unwrap_or(q.sup_grid_density);
        q.validate()?;
        Ok(())
    }
}

#[derive(Args, Clone)]
struct GammaArgs {
    /// Singular points of gamma.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    a: Vec<f64>,
    /// Exponents at the singular points.
    #[arg(long, value_delimiter = ',', default_value = "0.25")]
    beta: Vec<f64>,
    #[arg(long, default_value_t = 3)]
    r_max: usize,
}

impl GammaArgs {
    fn build(&self) -> Result<Arc<GammaFunction>> {
        let spec = GammaSpec::new(self.a.clone(), self.beta.clone(), self.r_max)?;
        Ok(Arc::new(GammaFunction::build(spec)?))
    }
}

#[derive(Args)]
struct CellArgs {
    #[command(flatten)]
    gamma: GammaArgs,
    /// Catalog function id, e.g. exp_decay or power_2beta.
    #[arg(long, short)]
    function: String,
    #[arg(long, short, default_value_t = 1)]
    r: usize,
    /// Norm exponent, a number >= 1 or `inf`.
    #[arg(long, short, default_value = "2")]
    p: Exponent,
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    /// Values of t, comma separated.
    #[arg(long, short, value_delimiter = ',', required = true)]
    t: Vec<f64>,
}

impl CellArgs {
    fn resolve(&self, quad: &QuadArgs) -> Result<(Arc<GammaFunction>, CatalogFunction, AnalysisConfig)> {
        let g = self.gamma.build()?;
        if self.r == 0 || self.r > g.r_max() {
            bail!("r = {} must lie in 1..={}", self.r, g.r_max());
        }
        let f = default_catalog(&g, self.r)?
            .into_iter()
            .find(|f| f.id() == self.function)
            .with_context(|| format!("unknown catalog function `{}`", self.function))?;
        let mut cfg = AnalysisConfig::for_gamma(&g);
        quad.apply(&mut cfg.quad)?;
        Ok((g, f, cfg))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate gamma or its inverse.
    Gamma {
        #[command(subcommand)]
        op: GammaOp,
    },
    /// Main part and complete modulus of a catalog function.
    Modulus(CellArgs),
    /// Restricted and full K-functional upper bounds of a catalog function.
    Kfunc(CellArgs),
    /// Run an experiment described by a TOML file.
    Run {
        config: PathBuf,
        /// Overrides `out.csv`.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Overrides `out.svg`.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Run invariant suites; exits nonzero on any failure.
    Verify {
        #[arg(default_value = "all")]
        suite: Suite,
        /// Inject a known defect, e.g. `flip-c1`.
        #[arg(long, default_value = "none")]
        inject: Fault,
    },
}

#[derive(Subcommand)]
enum GammaOp {
    Eval {
        #[command(flatten)]
        gamma: GammaArgs,
        #[arg(value_delimiter = ',', required = true, allow_negative_numbers = true)]
        x: Vec<f64>,
    },
    Inverse {
        #[command(flatten)]
        gamma: GammaArgs,
        #[arg(value_delimiter = ',', required = true, allow_negative_numbers = true)]
        y: Vec<f64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn execute(cli: Cli) -> Result<ExitCode> {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Gamma { op } => {
            let (gamma, points, inverse) = match op {
                GammaOp::Eval { gamma, x } => (gamma, x, false),
                GammaOp::Inverse { gamma, y } => (gamma, y, true),
            };
            let g = gamma.build()?;
            writeln!(out, "{},{}", if inverse { "y" } else { "x" }, if inverse { "inverse" } else { "gamma" })?;
            for v in points {
                let r = if inverse { g.eval_inverse(v)? } else { g.eval(v)? };
                writeln!(out, "{v},{r}")?;
            }
        }
        Command::Modulus(cell) => {
            let (g, f, cfg) = cell.resolve(&cli.quad)?;
            let curve = main_modulus_curve(&f, &g, cell.r, &cell.t, cell.p, cell.alpha, &cfg);
            let recs = cell.t.iter().zip(curve).map(|(&t, main)| {
                let res = main.and_then(|m| complete_from_main(&f, &g, cell.r, t, cell.p, cell.alpha, &cfg, m));
                let ok = res.as_ref().ok();
                ModulusRecord {
                    function_id: f.id().to_string(),
                    r: cell.r,
                    p: cell.p,
                    alpha: cell.alpha,
                    t,
                    omega_main: ok.map(|m| m.omega_main),
                    tail_zero: ok.map(|m| m.tail_zero),
                    tail_infinity: ok.map(|m| m.tail_infinity),
                    omega_complete: ok.map(|m| m.omega_complete),
                    status: res.as_ref().map_or_else(|e| format!("error: {e}"), |_| "ok".into()),
                }
            });
            write_records(&mut out, &MODULUS_HEADER, recs)?;
        }
        Command::Kfunc(cell) => {
            let (g, f, cfg) = cell.resolve(&cli.quad)?;
            let restricted = restricted_k_curve(&f, &g, cell.r, &cell.t, cell.p, cell.alpha, &cfg, CandidateSet::default());
            let mut recs = Vec::new();
            for (&t, k) in cell.t.iter().zip(&restricted) {
                recs.push(KRecord::new(f.id(), cell.r, cell.p, cell.alpha, t, k));
                let full = full_k_upper(&f, &g, cell.r, t, cell.p, cell.alpha, &cfg);
                recs.push(KRecord::new(f.id(), cell.r, cell.p, cell.alpha, t, &full));
            }
            write_records(&mut out, &K_HEADER, recs)?;
        }
        Command::Run { config, csv, svg } => {
            let mut cfg = ExperimentConfig::load(&config).with_context(|| format!("loading {}", config.display()))?;
            cli.quad.apply(&mut cfg.quad)?;
            let csv = csv.or(cfg.csv.clone());
            let svg = svg.or(cfg.svg.clone());
            let report = run_experiment(&cfg);
            let written = emit_reports(&report, csv.as_deref(), svg.as_deref())?;
            if csv.is_none() {
                write_main_csv(&report, &mut out)?;
            }
            let failed = report.rows.iter().filter(|r| r.status.starts_with("error")).count();
            eprintln!("{} rows, {} with errors", report.rows.len(), failed);
            for s in &report.summaries {
                eprintln!(
                    "{} r={} p={} alpha={} {}: min {:.4e} max {:.4e} spread {:.3}",
                    s.function_id,
                    s.r,
                    s.p,
                    s.alpha,
                    s.ratio.name(),
                    s.min,
                    s.max,
                    s.spread
                );
            }
            for p in written {
                eprintln!("wrote {}", p.display());
            }
        }
        Command::Verify { suite, inject } => {
            let report = verify(suite, inject);
            for c in &report.checks {
                writeln!(out, "{c}")?;
            }
            let failed = report.failures().count();
            writeln!(out, "{} checks, {} failed", report.checks.len(), failed)?;
            if failed > 0 {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
