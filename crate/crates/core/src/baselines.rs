//! Comparison methods and top-M feature selection.
//!
//! * simple escape distances measure the same axis-aligned escapes as the
//!   polytope report, but directly against the ε-close region;
//! * gradient importance ranks features by `|∂f/∂x_j|` at the target.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::closeness::ClosenessSpec;
use crate::error::{RbxError, Result};
use crate::gradient::{estimate_grad, GradientParams};
use crate::polytope::{Escape, EscapeReport, FeatureEscape, InfiniteReason};
use crate::predictor::{Query, Rescaled};
use crate::search::{first_exits, ExitSearch};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Rbx,
    SimpleEscape,
    Gradient,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Rbx, Method::SimpleEscape, Method::Gradient];

    pub fn name(self) -> &'static str {
        match self {
            Method::Rbx => "rbx",
            Method::SimpleEscape => "simple-escape",
            Method::Gradient => "gradient",
        }
    }

    /// Escape methods rank small distances first; gradient ranks large
    /// magnitudes first.
    fn smaller_is_more_important(self) -> bool {
        !matches!(self, Method::Gradient)
    }
}

/// Per-feature importance. `None` means no importance.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceScores {
    pub method: Method,
    pub scores: Vec<Option<f64>>,
}

impl ImportanceScores {
    /// Standardized-scale escape magnitudes.
    pub fn from_escape(method: Method, report: &EscapeReport) -> Self {
        let scores = report
            .features()
            .iter()
            .map(|f| f.has_importance().then(|| f.magnitude()))
            .collect();
        Self { method, scores }
    }

    pub fn dimension(&self) -> usize {
        self.scores.len()
    }
}

/// Result of [`simple_escape`]: distances packaged like a polytope report,
/// plus the search horizon that "infinite" refers to.
#[derive(Debug, Clone, PartialEq)]
pub struct SimpleEscape {
    pub report: EscapeReport,
    pub horizon: f64,
}

/// Search horizon: ten times the largest standardized distance from the
/// target to a context point.
pub fn default_horizon(scaled_context: &[Vec<f64>], z0: &[f64]) -> f64 {
    let max = scaled_context
        .iter()
        .map(|x| crate::closeness::euclidean(x, z0))
        .fold(0.0, f64::max);
    if max > 0.0 {
        10.0 * max
    } else {
        10.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimpleEscapeConfig {
    /// On the standardized scale.
    pub horizon: f64,
    pub line_search_iters: usize,
    pub tie_seed: u64,
}

/// First exit from the ε-close region along `±e_j` for every feature, on the
/// standardized scale given by `scales`.
pub fn simple_escape(
    x0: &[f64],
    predictor: &dyn Query,
    spec: &ClosenessSpec,
    scales: &[f64],
    config: &SimpleEscapeConfig,
) -> Result<SimpleEscape> {
    let d = predictor.dimension();
    if x0.len() != d || scales.len() != d {
        return Err(RbxError::InvalidInput(
            "simple escape dimension mismatch".into(),
        ));
    }
    let view = Rescaled::new(predictor, scales);
    let z0: Vec<f64> = x0.iter().zip(scales).map(|(v, s)| v / s).collect();
    let rays: Vec<(Vec<f64>, Vec<f64>)> = (0..d)
        .flat_map(|j| {
            [1.0, -1.0].map(|sign| {
                let mut e = vec![0.0; d];
                e[j] = sign;
                (z0.clone(), e)
            })
        })
        .collect();
    let search = ExitSearch {
        iters: config.line_search_iters,
        ..ExitSearch::new(config.horizon)
    };
    let brackets = first_exits(&rays, &search, |pts| {
        Ok(view
            .predict_batch(pts)?
            .into_iter()
            .map(|v| spec.is_eps_close(v))
            .collect())
    })?;
    let escape = |b: Option<(f64, f64)>| match b {
        Some((lo, hi)) => Escape::Finite(0.5 * (lo + hi)),
        None => Escape::Infinite(InfiniteReason::HorizonExhausted),
    };
    let features = brackets
        .chunks_exact(2)
        .map(|pair| FeatureEscape {
            plus: escape(pair[0]),
            minus: escape(pair[1]),
        })
        .collect();
    Ok(SimpleEscape {
        report: EscapeReport::new(features, scales.to_vec(), config.tie_seed),
        horizon: config.horizon,
    })
}

/// `|estimate_grad(x0)_j|`, with exact zeros meaning no importance.
pub fn gradient_importance(
    x0: &[f64],
    predictor: &dyn Query,
    params: &GradientParams,
) -> Result<ImportanceScores> {
    let g = estimate_grad(x0, predictor, params, u64::MAX)?;
    Ok(ImportanceScores {
        method: Method::Gradient,
        scores: g.into_iter().map(|v| (v != 0.0).then(|| v.abs())).collect(),
    })
}

/// The `m` most important features, most important first. Ties are broken
/// uniformly at random from `seed`; features without importance are never
/// selected, so fewer than `m` may come back.
pub fn select_top_m(scores: &ImportanceScores, m: usize, seed: u64) -> Vec<usize> {
    let mut candidates: Vec<(usize, f64)> = scores
        .scores
        .iter()
        .enumerate()
        .filter_map(|(j, s)| s.map(|v| (j, v)))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    candidates.shuffle(&mut rng);
    if scores.method.smaller_is_more_important() {
        candidates.sort_by(|a, b| a.1.total_cmp(&b.1));
    } else {
        candidates.sort_by(|a, b| b.1.total_cmp(&a.1));
    }
    candidates.into_iter().take(m).map(|(j, _)| j).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictor::{BuiltinModel, Predictor};

    fn cfg(horizon: f64) -> SimpleEscapeConfig {
        SimpleEscapeConfig {
            horizon,
            line_search_iters: 50,
            tie_seed: 0,
        }
    }

    #[test]
    fn bilinear_axes_never_exit() {
        let p = Predictor::new(BuiltinModel::bilinear(2, 0, 1));
        let spec = ClosenessSpec::interval(0.0, 0.5, 0.5).unwrap();
        let r = simple_escape(&[0.0, 0.0], &p, &spec, &[1.0, 1.0], &cfg(40.0)).unwrap();
        for j in 0..2 {
            let f = r.report.standardized(j);
            assert_eq!(f.plus, Escape::Infinite(InfiniteReason::HorizonExhausted));
            assert_eq!(f.minus, Escape::Infinite(InfiniteReason::HorizonExhausted));
        }
        assert!(r.report.important().is_empty());
    }

    #[test]
    fn linear_level_set() {
        let p = Predictor::from_fn(2, |x| x[0]);
        let spec = ClosenessSpec::interval(0.0, 0.5, 0.5).unwrap();
        let r = simple_escape(&[0.0, 0.0], &p, &spec, &[1.0, 1.0], &cfg(20.0)).unwrap();
        let f = r.report.standardized(0);
        assert!((f.plus.value() - 0.5).abs() < 1e-12);
        assert!((f.minus.value() - 0.5).abs() < 1e-12);
        assert!(!r.report.standardized(1).has_importance());
    }

    #[test]
    fn reported_on_both_scales() {
        let p = Predictor::from_fn(1, |x| x[0]);
        let spec = ClosenessSpec::interval(0.0, 1.0, 3.0).unwrap();
        let r = simple_escape(&[0.0], &p, &spec, &[2.0], &cfg(20.0)).unwrap();
        let std = r.report.standardized(0);
        let orig = r.report.original(0);
        assert!((orig.plus.value() - 3.0).abs() < 1e-10);
        assert!((orig.minus.value() - 1.0).abs() < 1e-10);
        assert!((std.plus.value() - 1.5).abs() < 1e-10);
    }

    #[test]
    fn gradient_scores() {
        let p = Predictor::new(BuiltinModel::linear(vec![2.0, 3.0, 0.0], 0.0));
        let s = gradient_importance(&[0.0; 3], &p, &GradientParams::default()).unwrap();
        assert!((s.scores[0].unwrap() - 2.0).abs() < 1e-12);
        assert!((s.scores[1].unwrap() - 3.0).abs() < 1e-12);
        assert_eq!(s.scores[2], None);
        assert_eq!(select_top_m(&s, 1, 0), vec![1]);
    }

    #[test]
    fn gradient_fails_at_saddle() {
        let p = Predictor::new(BuiltinModel::bilinear(2, 0, 1));
        let params = GradientParams {
            jitter_radius: 0.0,
            ..GradientParams::default()
        };
        let s = gradient_importance(&[0.0, 0.0], &p, &params).unwrap();
        assert_eq!(s.scores, vec![None, None]);
    }

    #[test]
    fn top_m_unique_order() {
        let s = ImportanceScores {
            method: Method::Rbx,
            scores: vec![None, None, Some(0.3), Some(0.7)],
        };
        let mut sel = select_top_m(&s, 2, 5);
        sel.sort();
        assert_eq!(sel, vec![2, 3]);
    }

    #[test]
    fn top_m_never_pads() {
        let s = ImportanceScores {
            method: Method::Rbx,
            scores: vec![None, None, None],
        };
        assert!(select_top_m(&s, 2, 0).is_empty());
        let one = ImportanceScores {
            method: Method::Gradient,
            scores: vec![None, Some(1.0), None],
        };
        assert_eq!(select_top_m(&one, 2, 0), vec![1]);
    }

    #[test]
    fn top_m_deterministic_under_seed() {
        let s = ImportanceScores {
            method: Method::SimpleEscape,
            scores: vec![Some(1.0); 3],
        };
        assert_eq!(select_top_m(&s, 2, 42), select_top_m(&s, 2, 42));
    }
}
