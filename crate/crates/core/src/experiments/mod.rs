//! Synthetic recovery experiments: how often does each method's top-M
//! selection hit the locally relevant features?

mod scenario;

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Distribution};
use serde::Serialize;

pub use scenario::{switch_weight, Scenario, ScenarioKind, SwitchRelevance, XorForm, DIMENSION};

use crate::baselines::{
    default_horizon, gradient_importance, select_top_m, simple_escape, ImportanceScores, Method,
    SimpleEscapeConfig,
};
use crate::engine::{self, Closeness, RbxConfig, StdConvention};
use crate::error::{RbxError, Result};
use crate::gradient::GradientParams;
use crate::par::Execution;
use crate::predictor::{BuiltinModel, Predictor};

pub const KNN_K: usize = 5;
pub const DEFAULT_TRAIN_SIZE: usize = 1000;
pub const DEFAULT_CONTEXT_SIZE: usize = 1000;
pub const DEFAULT_TARGETS: usize = 200;
pub const FULL_SCALE_TARGETS: usize = 1000;
pub const DECISION_BOUNDARY: f64 = 0.5;

/// Stream 0 trains the KNN model; target `t` uses stream `t + 1`.
fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// KNN regressor (K = 5) on Bernoulli responses with mean `E(Y | X)`,
/// restricted to the scenario's possibly-relevant features.
pub fn knn_model(scenario: &Scenario, n_train: usize, seed: u64) -> Result<BuiltinModel> {
    if n_train < KNN_K {
        return Err(RbxError::InvalidInput(format!(
            "need at least {KNN_K} training points"
        )));
    }
    let mut rng = stream_rng(seed, 0);
    let points = scenario.sample_n(n_train, &mut rng);
    let responses = points
        .iter()
        .map(|x| {
            let p = scenario.bayes_predict(x).clamp(0.0, 1.0);
            let y = Bernoulli::new(p)
                .expect("probability in [0, 1]")
                .sample(&mut rng);
            if y {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    BuiltinModel::knn(points, responses, KNN_K, scenario.knn_active())
        .map_err(|e| RbxError::InvalidInput(e.to_string()))
}

pub fn fit_knn_model(scenario: &Scenario, n_train: usize, seed: u64) -> Result<Predictor> {
    knn_model(scenario, n_train, seed).map(Predictor::new)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Bayes,
    Knn,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Bayes => "bayes",
            ModelKind::Knn => "knn",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "bayes" => Some(ModelKind::Bayes),
            "knn" => Some(ModelKind::Knn),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryConfig {
    pub scenario: Scenario,
    pub model: ModelKind,
    pub methods: Vec<Method>,
    pub n_targets: usize,
    pub seed: u64,
    pub context_size: usize,
    pub n_train: usize,
    pub execution: Execution,
}

impl RecoveryConfig {
    pub fn new(scenario: Scenario, model: ModelKind, seed: u64) -> Self {
        Self {
            scenario,
            model,
            methods: Method::ALL.to_vec(),
            n_targets: DEFAULT_TARGETS,
            seed,
            context_size: DEFAULT_CONTEXT_SIZE,
            n_train: DEFAULT_TRAIN_SIZE,
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TargetRecord {
    pub target_id: usize,
    pub method: Method,
    pub recall: f64,
    pub selected: Vec<usize>,
    pub relevant: Vec<usize>,
    /// Why the method produced no selection, if it failed.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub scenario: &'static str,
    pub model: ModelKind,
    pub method: Method,
    pub n_targets: usize,
    pub mean_recall: f64,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryResult {
    pub scenario: Scenario,
    pub model: ModelKind,
    pub records: Vec<TargetRecord>,
    /// Targets redrawn because they sat exactly on the decision boundary.
    pub resampled_targets: usize,
}

impl RecoveryResult {
    pub fn mean_recall(&self, method: Method) -> Option<f64> {
        let rs: Vec<f64> = self
            .records
            .iter()
            .filter(|r| r.method == method)
            .map(|r| r.recall)
            .collect();
        (!rs.is_empty()).then(|| rs.iter().sum::<f64>() / rs.len() as f64)
    }

    pub fn summary(&self) -> Vec<CellSummary> {
        let mut methods: Vec<Method> = Vec::new();
        for r in &self.records {
            if !methods.contains(&r.method) {
                methods.push(r.method);
            }
        }
        methods
            .into_iter()
            .map(|m| {
                let rows: Vec<&TargetRecord> =
                    self.records.iter().filter(|r| r.method == m).collect();
                CellSummary {
                    scenario: self.scenario.name(),
                    model: self.model,
                    method: m,
                    n_targets: rows.len(),
                    mean_recall: rows.iter().map(|r| r.recall).sum::<f64>() / rows.len() as f64,
                    failures: rows.iter().filter(|r| r.failure.is_some()).count(),
                }
            })
            .collect()
    }
}

/// `|selected ∩ relevant| / M`.
pub fn recall(selected: &[usize], relevant: &[usize], m: usize) -> f64 {
    selected.iter().filter(|j| relevant.contains(j)).count() as f64 / m as f64
}

struct TargetCase {
    x0: Vec<f64>,
    context: Vec<Vec<f64>>,
    resampled: usize,
}

fn draw_target(
    scenario: &Scenario,
    model: &Predictor,
    config: &RecoveryConfig,
    t: usize,
) -> Result<TargetCase> {
    let mut rng = stream_rng(config.seed, t as u64 + 1);
    let mut resampled = 0;
    let x0 = loop {
        let x = scenario.sample(&mut rng);
        let v = model.predict(&x)?;
        if v != DECISION_BOUNDARY && v.is_finite() {
            break x;
        }
        resampled += 1;
    };
    let context = scenario.sample_n(config.context_size, &mut rng);
    Ok(TargetCase {
        x0,
        context,
        resampled,
    })
}

fn method_scores(
    method: Method,
    case: &TargetCase,
    model: &Predictor,
    seed: u64,
) -> Result<ImportanceScores> {
    match method {
        Method::Rbx => {
            let cfg = RbxConfig::new(Closeness::DecisionBoundary {
                boundary: DECISION_BOUNDARY,
            })
            .with_seed(seed);
            let fit = engine::fit(&case.x0, model, &case.context, &cfg)?;
            Ok(ImportanceScores::from_escape(Method::Rbx, &fit.escape))
        }
        Method::SimpleEscape => {
            let (scaled, z0, scales) =
                engine::standardize(&case.context, &case.x0, StdConvention::Population)?;
            let f0 = model.predict(&case.x0)?;
            let spec = Closeness::DecisionBoundary {
                boundary: DECISION_BOUNDARY,
            }
            .resolve(f0)?;
            let cfg = SimpleEscapeConfig {
                horizon: default_horizon(&scaled, &z0),
                line_search_iters: crate::closeness::DEFAULT_LINE_SEARCH_ITERS,
                tie_seed: seed,
            };
            let r = simple_escape(&case.x0, model, &spec, &scales, &cfg)?;
            Ok(ImportanceScores::from_escape(
                Method::SimpleEscape,
                &r.report,
            ))
        }
        Method::Gradient => {
            let params = GradientParams {
                seed,
                ..GradientParams::default()
            };
            gradient_importance(&case.x0, model, &params)
        }
    }
}

/// Evaluate every configured method on the same targets, contexts and model.
pub fn run_recovery(config: &RecoveryConfig) -> Result<RecoveryResult> {
    if config.n_targets == 0 {
        return Err(RbxError::InvalidInput(
            "n_targets must be at least 1".into(),
        ));
    }
    let scenario = config.scenario;
    let inner = match config.model {
        ModelKind::Bayes => Predictor::new(BuiltinModel::Bayes(scenario)),
        ModelKind::Knn => fit_knn_model(&scenario, config.n_train, config.seed)?,
    };
    // per-target work is already parallel; keep each batch sequential
    let model = inner.with_execution(Execution::Sequential);
    let m = scenario.m();

    let per_target = config
        .execution
        .try_map_range(config.n_targets, |t| -> Result<_> {
            let case = draw_target(&scenario, &model, config, t)?;
            let relevant = scenario.relevant_features(&case.x0);
            let tie_seed = config.seed ^ (t as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
            let mut rows = Vec::with_capacity(config.methods.len());
            for &method in &config.methods {
                let (selected, failure) = match method_scores(method, &case, &model, tie_seed) {
                    Ok(scores) => (select_top_m(&scores, m, tie_seed), None),
                    Err(e @ (RbxError::NoBoundaryInformation | RbxError::DegenerateModel)) => {
                        (Vec::new(), Some(e.to_string()))
                    }
                    Err(e) => return Err(e),
                };
                rows.push(TargetRecord {
                    target_id: t,
                    method,
                    recall: recall(&selected, &relevant, m),
                    selected,
                    relevant: relevant.clone(),
                    failure,
                });
            }
            Ok((rows, case.resampled))
        })?;

    let mut records = Vec::new();
    let mut resampled_targets = 0;
    for (rows, r) in per_target {
        records.extend(rows);
        resampled_targets += r;
    }
    Ok(RecoveryResult {
        scenario,
        model: config.model,
        records,
        resampled_targets,
    })
}

fn feature_names(ix: &[usize]) -> String {
    ix.iter()
        .map(|j| format!("x{}", j + 1))
        .collect::<Vec<_>>()
        .join(" ")
}

/// One row per target and method.
pub fn write_csv<W: Write>(results: &[RecoveryResult], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| RbxError::InvalidInput(format!("writing CSV: {e}"));
    w.write_record([
        "scenario",
        "model",
        "method",
        "target_id",
        "recall",
        "selected",
        "relevant",
    ])
    .map_err(io)?;
    for res in results {
        for r in &res.records {
            w.write_record([
                res.scenario.name(),
                res.model.name(),
                r.method.name(),
                &r.target_id.to_string(),
                &r.recall.to_string(),
                &feature_names(&r.selected),
                &feature_names(&r.relevant),
            ])
            .map_err(io)?;
        }
    }
    w.flush()
        .map_err(|e| RbxError::InvalidInput(format!("writing CSV: {e}")))?;
    Ok(())
}

#[derive(Serialize)]
struct SummaryFile<'a> {
    seed: u64,
    cells: Vec<CellSummary>,
    resampled_targets: Vec<(&'a str, &'a str, usize)>,
}

/// Mean recall per scenario/model/method cell.
pub fn summary_json(results: &[RecoveryResult], seed: u64) -> String {
    let file = SummaryFile {
        seed,
        cells: results.iter().flat_map(|r| r.summary()).collect(),
        resampled_targets: results
            .iter()
            .map(|r| (r.scenario.name(), r.model.name(), r.resampled_targets))
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("summary serializes");
    s.push('\n');
    s
}
