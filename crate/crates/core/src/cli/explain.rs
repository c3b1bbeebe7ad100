use std::path::PathBuf;
use std::time::Duration;

use clap::{ArgGroup, Args};

use super::data::{parse_vector, read_csv};
use super::{CliResult, Failure, ModelSource};
use crate::closeness::DEFAULT_LINE_SEARCH_ITERS;
use crate::engine::{Closeness, RbxConfig, StdConvention};
use crate::gradient::GradientParams;
use crate::predictor::{model_file, Predictor, RemoteConfig};
use crate::report::{explain, ExplainOptions, TrustSettings};
use crate::trust::TrustOptions;

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("target_spec").required(true).args(["target_row", "target"])))]
#[command(group(ArgGroup::new("closeness").required(true).args(["eps_lo", "boundary"])))]
pub struct ExplainArgs {
    #[command(flatten)]
    source: ModelSource,
    /// Seconds to wait for each remote reply.
    #[arg(long, default_value_t = 60)]
    timeout: u64,

    /// Context CSV with a header row; column order is feature order.
    #[arg(long, value_name = "FILE")]
    context: PathBuf,
    /// Use this 0-based data row of the context as the target.
    #[arg(long)]
    target_row: Option<usize>,
    /// Comma-separated target vector.
    #[arg(long, allow_hyphen_values = true)]
    target: Option<String>,

    /// Prediction may drop this far below the target's.
    #[arg(long, requires = "eps_hi", allow_hyphen_values = true)]
    eps_lo: Option<f64>,
    /// Prediction may rise this far above the target's.
    #[arg(long, requires = "eps_lo", allow_hyphen_values = true)]
    eps_hi: Option<f64>,
    /// Close means the same side of `f = BOUNDARY` as the target.
    #[arg(long, allow_hyphen_values = true)]
    boundary: Option<f64>,

    /// Trust threshold on the estimated density ratio; off when absent.
    #[arg(long)]
    beta: Option<f64>,
    /// Uniform baseline draws for the trust classifier (default: context size).
    #[arg(long)]
    trust_samples: Option<usize>,
    /// Polynomial degree of the trust classifier.
    #[arg(long, default_value_t = 2)]
    trust_degree: usize,

    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long, default_value_t = 0.01)]
    jitter_radius: f64,
    #[arg(long, default_value_t = 10)]
    jitter_samples: usize,
    /// Stop after this many halfspaces.
    #[arg(long)]
    max_splits: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_LINE_SEARCH_ITERS)]
    line_search_iters: usize,
    /// Standardize with the n-1 denominator.
    #[arg(long)]
    sample_std: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Output directory for report.json, polytope.txt and trust.txt.
    #[arg(long, default_value = "rbx-out")]
    out: PathBuf,
}

pub(super) fn open_model(source: &ModelSource, timeout: Duration) -> CliResult<Predictor> {
    if let Some(path) = &source.model {
        let m = model_file::load(path)
            .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
        return Ok(Predictor::new(m));
    }
    let cfg = match (&source.model_cmd, &source.model_url) {
        (Some(cmd), _) => RemoteConfig::shell(cmd),
        (_, Some(url)) => RemoteConfig::http(url.clone()),
        _ => return Err(Failure::input("no model source given")),
    };
    Predictor::connect(&cfg.with_timeout(timeout))
        .map_err(|e| Failure::new(3, format!("cannot reach model: {e}")))
}

pub fn run(a: ExplainArgs) -> CliResult {
    let table = read_csv(&a.context)?;
    let d = table.names.len();
    let x0 = match (a.target_row, &a.target) {
        (Some(i), _) => table.rows.get(i).cloned().ok_or_else(|| {
            Failure::input(format!(
                "target row {i} out of range ({} rows)",
                table.rows.len()
            ))
        })?,
        (_, Some(t)) => parse_vector(t)?,
        _ => unreachable!("clap requires a target"),
    };
    if x0.len() != d {
        return Err(Failure::input(format!(
            "target has {} values, context has {d} columns",
            x0.len()
        )));
    }
    let closeness = match (a.eps_lo, a.eps_hi, a.boundary) {
        (Some(eps_lo), Some(eps_hi), None) => Closeness::Interval { eps_lo, eps_hi },
        (None, None, Some(boundary)) => Closeness::DecisionBoundary { boundary },
        _ => {
            return Err(Failure::input(
                "give either --eps-lo/--eps-hi or --boundary",
            ))
        }
    };
    let rbx = RbxConfig {
        closeness,
        max_splits: a.max_splits,
        gradient: GradientParams {
            delta: a.delta,
            jitter_radius: a.jitter_radius,
            jitter_samples: a.jitter_samples,
            seed: 0,
        },
        line_search_iters: a.line_search_iters,
        std_convention: if a.sample_std {
            StdConvention::Sample
        } else {
            StdConvention::Population
        },
        seed: a.seed,
    };
    let trust = a.beta.map(|beta| TrustSettings {
        beta,
        options: TrustOptions {
            baseline_size: a.trust_samples,
            degree: a.trust_degree,
            seed: a.seed,
            ..TrustOptions::default()
        },
    });

    let predictor = open_model(&a.source, Duration::from_secs(a.timeout))?;
    if predictor.dimension() != d {
        return Err(Failure::input(format!(
            "model expects {} features, context has {d}",
            predictor.dimension()
        )));
    }
    predictor
        .predict(&x0)
        .map_err(|e| Failure::new(3, format!("model failed at the target: {e}")))?;

    let options = ExplainOptions { rbx, trust };
    let e = explain(&x0, &predictor, &table.rows, &options).map_err(|err| match err {
        crate::RbxError::NoBoundaryInformation => Failure::new(
            4,
            "no context point is ε-far from the target; widen the context or tighten the closeness interval",
        ),
        other => other.into(),
    })?;

    std::fs::create_dir_all(&a.out)?;
    std::fs::write(a.out.join("report.json"), e.to_json(&table.names)?)?;
    std::fs::write(a.out.join("polytope.txt"), e.polytope_text())?;
    if let Some(t) = e.trust_text() {
        std::fs::write(a.out.join("trust.txt"), t)?;
    }
    let top: Vec<&str> = e
        .escape
        .important()
        .iter()
        .map(|&j| table.names[j].as_str())
        .collect();
    println!(
        "{} halfspaces; important features: {}",
        e.fit.polytope.len(),
        if top.is_empty() {
            "none".to_string()
        } else {
            top.join(", ")
        }
    );
    Ok(())
}
