//! One full explanation run and its JSON report.
//!
//! The report never mentions where the model lives, so the same run against
//! an in-process model and against the same model served remotely produces
//! byte-identical output.

use serde::Serialize;

use crate::baselines::{default_horizon, simple_escape, SimpleEscape, SimpleEscapeConfig};
use crate::engine::{self, Diagnostics, RbxConfig, RbxResult};
use crate::error::{RbxError, Result};
use crate::polytope::{
    polytope_to_text, Direction, Escape, EscapeReport, FeatureEscape, InfiniteReason,
};
use crate::predictor::Predictor;
use crate::trust::{apply_trust, fit_trust, PolynomialLogisticRatio, TrustOptions, TrustRegion};

pub const REPORT_FORMAT: &str = "rbx-report 1";

#[derive(Debug, Clone, PartialEq)]
pub struct TrustSettings {
    pub beta: f64,
    pub options: TrustOptions,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExplainOptions {
    pub rbx: RbxConfig,
    pub trust: Option<TrustSettings>,
}

impl ExplainOptions {
    pub fn new(rbx: RbxConfig) -> Self {
        Self { rbx, trust: None }
    }
}

#[derive(Debug, Clone)]
pub struct Explanation {
    pub x0: Vec<f64>,
    pub fit: RbxResult,
    /// Polytope escapes after any trust overrides.
    pub escape: EscapeReport,
    pub simple: SimpleEscape,
    pub trust: Option<TrustRegion>,
    pub options: ExplainOptions,
}

/// Fit the polytope, compute simple escape distances and apply the trust
/// region, if one is configured.
pub fn explain(
    x0: &[f64],
    predictor: &Predictor,
    context: &[Vec<f64>],
    options: &ExplainOptions,
) -> Result<Explanation> {
    let fit = engine::fit(x0, predictor, context, &options.rbx)?;
    let (scaled, z0, _) = engine::standardize(context, x0, options.rbx.std_convention)?;
    let simple_cfg = SimpleEscapeConfig {
        horizon: default_horizon(&scaled, &z0),
        line_search_iters: options.rbx.line_search_iters,
        tie_seed: options.rbx.seed,
    };
    let mut simple = simple_escape(
        x0,
        predictor,
        &fit.closeness,
        &fit.feature_scales,
        &simple_cfg,
    )?;
    let mut escape = fit.escape.clone();
    let trust = match &options.trust {
        None => None,
        Some(t) => {
            let ratio = fit_trust(context, &t.options)?;
            let region = TrustRegion::new(ratio, t.beta)?;
            escape = apply_trust(&escape, &region, x0)?;
            simple.report = apply_trust(&simple.report, &region, x0)?;
            Some(region)
        }
    };
    Ok(Explanation {
        x0: x0.to_vec(),
        fit,
        escape,
        simple,
        trust,
        options: options.clone(),
    })
}

#[derive(Serialize)]
#[serde(untagged)]
enum Distance {
    Finite(f64),
    Infinite { infinite: InfiniteReason },
}

impl From<Escape> for Distance {
    fn from(e: Escape) -> Self {
        match e {
            Escape::Finite(v) => Distance::Finite(v),
            Escape::Infinite(r) => Distance::Infinite { infinite: r },
        }
    }
}

#[derive(Serialize)]
struct Side {
    plus: Distance,
    minus: Distance,
    /// `null` when the feature has no importance.
    magnitude: Option<f64>,
}

impl From<FeatureEscape> for Side {
    fn from(f: FeatureEscape) -> Self {
        Side {
            plus: f.plus.into(),
            minus: f.minus.into(),
            magnitude: f.has_importance().then(|| f.magnitude()),
        }
    }
}

#[derive(Serialize)]
struct FeatureRow<'a> {
    feature: &'a str,
    index: usize,
    scale: f64,
    direction: Direction,
    standardized: Side,
    original: Side,
}

#[derive(Serialize)]
struct EscapeSection<'a> {
    features: Vec<FeatureRow<'a>>,
    ranking: Vec<&'a str>,
    important: Vec<&'a str>,
}

#[derive(Serialize)]
struct SimpleSection<'a> {
    /// Standardized units.
    horizon: f64,
    #[serde(flatten)]
    escape: EscapeSection<'a>,
}

#[derive(Serialize)]
struct ClosenessSection {
    lower: f64,
    upper: f64,
}

#[derive(Serialize)]
struct TrustSection {
    beta: f64,
    degree: usize,
    context_points: usize,
    baseline_points: usize,
    ratio_at_target: f64,
}

#[derive(Serialize)]
struct ConfigSection<'a> {
    rbx: &'a RbxConfig,
}

#[derive(Serialize)]
struct ReportFile<'a> {
    format: &'static str,
    dimension: usize,
    target: &'a [f64],
    prediction: f64,
    closeness: ClosenessSection,
    halfspaces: usize,
    escape: EscapeSection<'a>,
    simple_escape: SimpleSection<'a>,
    trust: Option<TrustSection>,
    diagnostics: &'a Diagnostics,
    config: ConfigSection<'a>,
}

fn section<'a>(report: &EscapeReport, names: &'a [String]) -> EscapeSection<'a> {
    let name = |j: usize| names[j].as_str();
    EscapeSection {
        features: (0..report.dimension())
            .map(|j| FeatureRow {
                feature: name(j),
                index: j,
                scale: report.scales()[j],
                direction: report.standardized(j).direction(),
                standardized: report.standardized(j).into(),
                original: report.original(j).into(),
            })
            .collect(),
        ranking: report.ranking().iter().map(|&j| name(j)).collect(),
        important: report.important().iter().map(|&j| name(j)).collect(),
    }
}

/// `x1, x2, ...`.
pub fn default_feature_names(d: usize) -> Vec<String> {
    (1..=d).map(|j| format!("x{j}")).collect()
}

impl Explanation {
    pub fn dimension(&self) -> usize {
        self.x0.len()
    }

    /// Pretty-printed JSON report with a trailing newline.
    pub fn to_json(&self, feature_names: &[String]) -> Result<String> {
        if feature_names.len() != self.dimension() {
            return Err(RbxError::InvalidInput(
                "one feature name per feature".into(),
            ));
        }
        let trust = self.trust.as_ref().map(|t| TrustSection {
            beta: t.beta,
            degree: t.ratio.degree(),
            context_points: t.ratio.n,
            baseline_points: t.ratio.n0,
            ratio_at_target: crate::trust::DensityRatio::ratio(&t.ratio, &self.x0),
        });
        let file = ReportFile {
            format: REPORT_FORMAT,
            dimension: self.dimension(),
            target: &self.x0,
            prediction: self.fit.f0,
            closeness: ClosenessSection {
                lower: self.fit.closeness.lower(),
                upper: self.fit.closeness.upper(),
            },
            halfspaces: self.fit.polytope.len(),
            escape: section(&self.escape, feature_names),
            simple_escape: SimpleSection {
                horizon: self.simple.horizon,
                escape: section(&self.simple.report, feature_names),
            },
            trust,
            diagnostics: &self.fit.diagnostics,
            config: ConfigSection {
                rbx: &self.options.rbx,
            },
        };
        let mut s = serde_json::to_string_pretty(&file)
            .map_err(|e| RbxError::InvalidInput(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    pub fn polytope_text(&self) -> String {
        polytope_to_text(&self.fit.polytope, &self.fit.feature_scales)
    }

    pub fn trust_text(&self) -> Option<String> {
        self.trust
            .as_ref()
            .map(TrustRegion::<PolynomialLogisticRatio>::to_text)
    }
}
