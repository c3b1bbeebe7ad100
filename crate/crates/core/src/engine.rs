//! Greedy polytope construction around a target point.
//!
//! The steps, in standardized coordinates:
//!
//! 1. scale every feature by its standard deviation over the context set;
//! 2. keep the ε-far context points and shrink each onto the ε-boundary
//!    along its segment to the target;
//! 3. repeatedly take the surviving shrunken point closest to the target,
//!    estimate the gradient there, add the halfspace through that point
//!    with the gradient as normal, and drop every survivor not strictly
//!    inside the new halfspace;
//! 4. stop when no survivors remain or `max_splits` halfspaces exist, and
//!    measure axis-aligned escape distances from the target.

use serde::{Deserialize, Serialize};

use crate::closeness::{
    line_search_batch, ClosenessSpec, FarPoint, ShrunkenPoint, DEFAULT_LINE_SEARCH_ITERS,
};
use crate::error::{RbxError, Result};
use crate::gradient::{estimate_grad, GradientParams};
use crate::polytope::{dot, escape_report, EscapeReport, Halfspace, Polytope};
use crate::predictor::{Predictor, Rescaled};

/// Gradients with norm at or below this are treated as zero.
pub const DEGENERATE_GRADIENT_NORM: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Closeness {
    /// `[f0 - eps_lo, f0 + eps_hi]`.
    Interval { eps_lo: f64, eps_hi: f64 },
    /// Same side of `{f = boundary}` as the target.
    DecisionBoundary { boundary: f64 },
}

impl Closeness {
    pub fn resolve(&self, f0: f64) -> Result<ClosenessSpec> {
        match *self {
            Closeness::Interval { eps_lo, eps_hi } => ClosenessSpec::interval(f0, eps_lo, eps_hi),
            Closeness::DecisionBoundary { boundary } => {
                ClosenessSpec::from_decision_boundary(f0, boundary)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StdConvention {
    /// Divide by `n`.
    Population,
    /// Divide by `n - 1`.
    Sample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbxConfig {
    pub closeness: Closeness,
    /// `None` means no limit beyond the number of ε-far context points.
    pub max_splits: Option<usize>,
    pub gradient: GradientParams,
    pub line_search_iters: usize,
    pub std_convention: StdConvention,
    /// Seeds jitter draws and ranking tie-breaks.
    pub seed: u64,
}

impl RbxConfig {
    pub fn new(closeness: Closeness) -> Self {
        Self {
            closeness,
            max_splits: None,
            gradient: GradientParams::default(),
            line_search_iters: DEFAULT_LINE_SEARCH_ITERS,
            std_convention: StdConvention::Population,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_max_splits(mut self, k: usize) -> Self {
        self.max_splits = Some(k);
        self
    }

    fn validate(&self) -> Result<()> {
        if self.max_splits == Some(0) {
            return Err(RbxError::InvalidInput(
                "max_splits must be at least 1".into(),
            ));
        }
        if self.line_search_iters == 0 {
            return Err(RbxError::InvalidInput(
                "line search needs at least one iteration".into(),
            ));
        }
        self.gradient.validate()
    }

    /// Gradient params with the run seed folded in.
    fn gradient_params(&self) -> GradientParams {
        GradientParams {
            seed: self.gradient.seed ^ self.seed.rotate_left(17),
            ..self.gradient
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationDiagnostics {
    /// Shrunken points alive at the start of the iteration.
    pub survivors_before: usize,
    /// Points dropped for having a degenerate gradient before a halfspace
    /// was found in this iteration.
    pub degenerate_discarded: usize,
    /// Points removed by the new halfspace, the support vector included.
    pub removed: usize,
    pub support_index: usize,
    pub support_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub iterations: usize,
    pub context_total: usize,
    pub context_far: usize,
    pub per_iteration: Vec<IterationDiagnostics>,
    /// Degenerate points discarded after the last halfspace.
    pub trailing_degenerate: usize,
    pub queries: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RbxResult {
    /// Standardized coordinates.
    pub polytope: Polytope,
    pub support_vectors: Vec<ShrunkenPoint>,
    pub feature_scales: Vec<f64>,
    pub f0: f64,
    pub closeness: ClosenessSpec,
    pub escape: EscapeReport,
    pub diagnostics: Diagnostics,
}

/// Scaled context, scaled target and the per-feature scales.
pub type Standardized = (Vec<Vec<f64>>, Vec<f64>, Vec<f64>);

/// Divide every column by its standard deviation. Constant columns are left
/// unscaled (scale 1).
pub fn standardize(
    context: &[Vec<f64>],
    x0: &[f64],
    convention: StdConvention,
) -> Result<Standardized> {
    let scales = feature_scales(context, x0.len(), convention)?;
    let scale = |x: &[f64]| -> Vec<f64> { x.iter().zip(&scales).map(|(v, s)| v / s).collect() };
    let scaled = context.iter().map(|x| scale(x)).collect();
    let z0 = scale(x0);
    Ok((scaled, z0, scales))
}

pub fn feature_scales(
    context: &[Vec<f64>],
    d: usize,
    convention: StdConvention,
) -> Result<Vec<f64>> {
    let n = context.len();
    if n == 0 {
        return Err(RbxError::InvalidInput("context set is empty".into()));
    }
    if let Some(i) = context.iter().position(|x| x.len() != d) {
        return Err(RbxError::InvalidInput(format!(
            "context row {i} has width {}, expected {d}",
            context[i].len()
        )));
    }
    if context.iter().flatten().any(|v| !v.is_finite()) {
        return Err(RbxError::InvalidInput(
            "context contains non-finite values".into(),
        ));
    }
    let denom = match convention {
        StdConvention::Population => n as f64,
        StdConvention::Sample if n > 1 => (n - 1) as f64,
        StdConvention::Sample => n as f64,
    };
    Ok((0..d)
        .map(|j| {
            let mean = context.iter().map(|x| x[j]).sum::<f64>() / n as f64;
            let var = context.iter().map(|x| (x[j] - mean).powi(2)).sum::<f64>() / denom;
            let s = var.sqrt();
            if s > 0.0 && s.is_finite() {
                s
            } else {
                1.0
            }
        })
        .collect())
}

/// Build the polytope around `x0` and its escape report.
pub fn fit(
    x0: &[f64],
    predictor: &Predictor,
    context: &[Vec<f64>],
    config: &RbxConfig,
) -> Result<RbxResult> {
    config.validate()?;
    let d = predictor.dimension();
    if x0.len() != d {
        return Err(RbxError::InvalidInput(format!(
            "target has width {}, model expects {d}",
            x0.len()
        )));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(RbxError::InvalidInput("target must be finite".into()));
    }
    let queries_at_start = predictor.query_count();
    let (scaled, z0, scales) = standardize(context, x0, config.std_convention)?;
    let view = Rescaled::new(predictor, &scales);

    let f0 = predictor.predict(x0)?;
    let spec = config.closeness.resolve(f0)?;

    let values = predictor.predict_batch(context)?;
    let far: Vec<FarPoint<'_>> = scaled
        .iter()
        .zip(&values)
        .enumerate()
        .filter(|(_, (_, v))| !spec.is_eps_close(**v))
        .map(|(index, (x, &value))| FarPoint { index, x, value })
        .collect();
    if far.is_empty() {
        return Err(RbxError::NoBoundaryInformation);
    }
    let shrunken = line_search_batch(&far, &spec, &view, &z0, config.line_search_iters)?;

    let grad_params = config.gradient_params();
    let max_splits = config.max_splits.unwrap_or(usize::MAX);
    let mut alive: Vec<usize> = (0..shrunken.len()).collect();
    let mut polytope = Polytope::new(z0.clone());
    let mut support_vectors = Vec::new();
    let mut per_iteration = Vec::new();
    let mut degenerate = 0usize;

    while !alive.is_empty() && polytope.len() < max_splits {
        let survivors_before = alive.len() + degenerate;
        // nearest survivor; `alive` is in original-index order so ties keep the lowest index
        let pos = alive
            .iter()
            .enumerate()
            .min_by(|(_, &a), (_, &b)| {
                shrunken[a]
                    .distance_to_target
                    .total_cmp(&shrunken[b].distance_to_target)
                    .then(shrunken[a].original_index.cmp(&shrunken[b].original_index))
            })
            .map(|(p, _)| p)
            .expect("alive is non-empty");
        let chosen = &shrunken[alive[pos]];
        let grad = estimate_grad(
            &chosen.location,
            &view,
            &grad_params,
            chosen.original_index as u64,
        )?;
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if norm <= DEGENERATE_GRADIENT_NORM {
            log::debug!(
                "discarding shrunken point {} with degenerate gradient (norm {norm:e})",
                chosen.original_index
            );
            alive.remove(pos);
            degenerate += 1;
            continue;
        }
        let halfspace = oriented_halfspace(&chosen.location, grad, &z0)?;
        let before = alive.len();
        let chosen_index = alive[pos];
        alive.retain(|&i| i != chosen_index && halfspace.contains_strictly(&shrunken[i].location));
        per_iteration.push(IterationDiagnostics {
            survivors_before,
            degenerate_discarded: degenerate,
            removed: before - alive.len(),
            support_index: chosen.original_index,
            support_distance: chosen.distance_to_target,
        });
        log::debug!(
            "halfspace {} through context point {} at distance {:.6}: removed {}, {} left",
            polytope.len() + 1,
            chosen.original_index,
            chosen.distance_to_target,
            before - alive.len(),
            alive.len()
        );
        degenerate = 0;
        polytope.push(halfspace);
        support_vectors.push(chosen.clone());
    }

    if polytope.is_empty() {
        return Err(RbxError::DegenerateModel);
    }
    let escape = escape_report(&polytope, &z0, &scales, config.seed)?;
    let diagnostics = Diagnostics {
        iterations: polytope.len(),
        context_total: context.len(),
        context_far: far.len(),
        per_iteration,
        trailing_degenerate: degenerate,
        queries: predictor.query_count() - queries_at_start,
    };
    Ok(RbxResult {
        polytope,
        support_vectors,
        feature_scales: scales,
        f0,
        closeness: spec,
        escape,
        diagnostics,
    })
}

/// Halfspace through `point` with normal `±grad`, signed so that `center`
/// is a member.
fn oriented_halfspace(point: &[f64], grad: Vec<f64>, center: &[f64]) -> Result<Halfspace> {
    let h = Halfspace::through(point, grad)?;
    if dot(center, &h.normal) <= h.intercept {
        Ok(h)
    } else {
        Ok(Halfspace {
            normal: h.normal.iter().map(|g| -g).collect(),
            intercept: -h.intercept,
        })
    }
}
