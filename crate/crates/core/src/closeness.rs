//! The ε-close prediction interval and the bisection line search that moves
//! ε-far points onto its boundary.

use serde::{Deserialize, Serialize};

use crate::error::{RbxError, Result};
use crate::predictor::Query;

/// Prediction interval `[f0 - eps_lo, f0 + eps_hi]`.
///
/// Bounds are stored directly so that a decision-boundary interval keeps the
/// boundary value bit-exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosenessSpec {
    pub f0: f64,
    lower: f64,
    upper: f64,
}

impl ClosenessSpec {
    /// Interval mode. Both widths must be finite and nonnegative.
    pub fn interval(f0: f64, eps_lo: f64, eps_hi: f64) -> Result<Self> {
        if !f0.is_finite() {
            return Err(RbxError::InvalidInput(format!(
                "prediction {f0} is not finite"
            )));
        }
        for (name, e) in [("eps_lo", eps_lo), ("eps_hi", eps_hi)] {
            if !(e.is_finite() && e >= 0.0) {
                return Err(RbxError::InvalidInput(format!(
                    "{name} must be finite and nonnegative, got {e}"
                )));
            }
        }
        Ok(Self {
            f0,
            lower: f0 - eps_lo,
            upper: f0 + eps_hi,
        })
    }

    /// Everything on the same side of `{f = boundary}` as `f0`.
    pub fn from_decision_boundary(f0: f64, boundary: f64) -> Result<Self> {
        if !(f0.is_finite() && boundary.is_finite()) {
            return Err(RbxError::InvalidInput(
                "prediction and boundary must be finite".into(),
            ));
        }
        if f0 < boundary {
            Ok(Self {
                f0,
                lower: f64::NEG_INFINITY,
                upper: boundary,
            })
        } else if f0 > boundary {
            Ok(Self {
                f0,
                lower: boundary,
                upper: f64::INFINITY,
            })
        } else {
            Err(RbxError::AmbiguousSide { f0 })
        }
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn eps_lo(&self) -> f64 {
        self.f0 - self.lower
    }

    pub fn eps_hi(&self) -> f64 {
        self.upper - self.f0
    }

    pub fn is_eps_close(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }
}

/// An ε-far context point moved along its segment to the target until it
/// sits on the ε-boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShrunkenPoint {
    pub original_index: usize,
    /// `x0 + t (x - x0)`.
    pub location: Vec<f64>,
    pub t: f64,
    /// Final bracket: `x0 + t_lo (x - x0)` is ε-close, `x0 + t_hi (x - x0)` is ε-far.
    pub t_lo: f64,
    pub t_hi: f64,
    pub distance_to_target: f64,
}

/// Default number of bisection iterations.
pub const DEFAULT_LINE_SEARCH_ITERS: usize = 50;

/// A point to shrink, with its already known prediction.
#[derive(Debug, Clone, Copy)]
pub struct FarPoint<'a> {
    pub index: usize,
    pub x: &'a [f64],
    pub value: f64,
}

/// Shrink one ε-far point onto the ε-boundary with `iters` bisection steps.
///
/// `value` is the known prediction at `x`; the endpoints are never queried.
pub fn line_search(
    x: &[f64],
    value: f64,
    spec: &ClosenessSpec,
    predictor: &dyn Query,
    x0: &[f64],
    iters: usize,
) -> Result<ShrunkenPoint> {
    let far = [FarPoint { index: 0, x, value }];
    Ok(line_search_batch(&far, spec, predictor, x0, iters)?.remove(0))
}

/// Run many line searches in lockstep so each bisection step is one batch.
///
/// Exactly `iters` predictions per point.
pub fn line_search_batch(
    points: &[FarPoint<'_>],
    spec: &ClosenessSpec,
    predictor: &dyn Query,
    x0: &[f64],
    iters: usize,
) -> Result<Vec<ShrunkenPoint>> {
    if iters == 0 {
        return Err(RbxError::InvalidInput(
            "line search needs at least one iteration".into(),
        ));
    }
    for p in points {
        if p.x.len() != x0.len() {
            return Err(RbxError::InvalidInput(format!(
                "point {} has width {}, target has {}",
                p.index,
                p.x.len(),
                x0.len()
            )));
        }
        if spec.is_eps_close(p.value) {
            return Err(RbxError::Precondition(format!(
                "point {} is already ε-close (prediction {})",
                p.index, p.value
            )));
        }
    }
    let mut lo = vec![0.0f64; points.len()];
    let mut hi = vec![1.0f64; points.len()];
    for _ in 0..iters {
        let mids: Vec<f64> = lo.iter().zip(&hi).map(|(l, h)| 0.5 * (h + l)).collect();
        let queries: Vec<Vec<f64>> = points
            .iter()
            .zip(&mids)
            .map(|(p, &t)| interpolate(x0, p.x, t))
            .collect();
        let values = predictor.predict_batch(&queries)?;
        for i in 0..points.len() {
            if spec.is_eps_close(values[i]) {
                lo[i] = mids[i];
            } else {
                hi[i] = mids[i];
            }
        }
    }
    Ok(points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let t = 0.5 * (hi[i] + lo[i]);
            let location = interpolate(x0, p.x, t);
            let distance_to_target = euclidean(&location, x0);
            ShrunkenPoint {
                original_index: p.index,
                location,
                t,
                t_lo: lo[i],
                t_hi: hi[i],
                distance_to_target,
            }
        })
        .collect())
}

pub(crate) fn interpolate(x0: &[f64], x: &[f64], t: f64) -> Vec<f64> {
    x0.iter().zip(x).map(|(a, b)| a + t * (b - a)).collect()
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictor::{BuiltinModel, Predictor};

    #[test]
    fn interval_membership_includes_bounds() {
        let s = ClosenessSpec::interval(13.0, 3.0, 7.0).unwrap();
        assert!(s.is_eps_close(10.0));
        assert!(s.is_eps_close(20.0));
        assert!(s.is_eps_close(13.0));
        assert!(!s.is_eps_close(20.0001));
        assert!(!s.is_eps_close(9.999));
    }

    #[test]
    fn interval_rejects_negative_or_infinite_widths() {
        assert!(ClosenessSpec::interval(0.0, -1.0, 1.0).is_err());
        assert!(ClosenessSpec::interval(0.0, 1.0, f64::INFINITY).is_err());
    }

    #[test]
    fn decision_boundary_below() {
        let s = ClosenessSpec::from_decision_boundary(0.191, 0.5).unwrap();
        assert_eq!(s.eps_lo(), f64::INFINITY);
        assert!((s.eps_hi() - 0.309).abs() < 1e-12);
        assert_eq!(s.upper(), 0.5);
        assert!(s.is_eps_close(-5.0));
        assert!(!s.is_eps_close(0.5000001));
    }

    #[test]
    fn decision_boundary_one_sided_region() {
        let s = ClosenessSpec::from_decision_boundary(0.3, 0.5).unwrap();
        assert!((s.eps_hi() - 0.2).abs() < 1e-15);
        assert!(s.is_eps_close(-5.0));
    }

    #[test]
    fn decision_boundary_above() {
        let s = ClosenessSpec::from_decision_boundary(0.9, 0.5).unwrap();
        assert!((s.eps_lo() - 0.4).abs() < 1e-15);
        assert_eq!(s.eps_hi(), f64::INFINITY);
        assert_eq!(s.lower(), 0.5);
    }

    #[test]
    fn decision_boundary_on_boundary_is_ambiguous() {
        assert!(matches!(
            ClosenessSpec::from_decision_boundary(0.5, 0.5),
            Err(RbxError::AmbiguousSide { .. })
        ));
    }

    #[test]
    fn linear_boundary_one_dimension() {
        let p = Predictor::from_fn(1, |x| x[0]);
        let spec = ClosenessSpec::interval(0.0, 1.0, 1.0).unwrap();
        let s = line_search(&[4.0], 4.0, &spec, &p, &[0.0], 30).unwrap();
        assert!((s.t - 0.25).abs() <= 2f64.powi(-30));
        assert!((s.location[0] - 1.0).abs() <= 4.0 * 2f64.powi(-30));
        assert_eq!(p.query_count(), 30);
    }

    #[test]
    fn bilinear_boundary_on_diagonal() {
        let p = Predictor::new(BuiltinModel::bilinear(2, 0, 1));
        let spec = ClosenessSpec::interval(0.0, 0.5, 0.5).unwrap();
        let s = line_search(&[2.0, 2.0], 4.0, &spec, &p, &[0.0, 0.0], 50).unwrap();
        // 4 t^2 = 0.5
        let t_star = (0.125f64).sqrt();
        assert!((s.t - t_star).abs() < 1e-12);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((s.location[0] - r).abs() < 1e-12 && (s.location[1] - r).abs() < 1e-12);
    }

    #[test]
    fn step_model_jump() {
        let p = Predictor::new(BuiltinModel::step(2, 0, 3.0));
        let spec = ClosenessSpec::from_decision_boundary(0.0, 0.5).unwrap();
        let s = line_search(&[6.0, 0.0], 1.0, &spec, &p, &[0.0, 0.0], 40).unwrap();
        assert!((s.location[0] - 3.0).abs() <= 6.0 * 2f64.powi(-40));
        assert_eq!(s.location[1], 0.0);
    }

    #[test]
    fn bracket_brackets_the_boundary() {
        let p = Predictor::from_fn(2, |x| x[0] + x[1] * x[1]);
        let spec = ClosenessSpec::interval(0.0, 1.0, 2.0).unwrap();
        let x = [3.0, 1.0];
        let s = line_search(&x, 4.0, &spec, &p, &[0.0, 0.0], 25).unwrap();
        assert!((s.t_hi - s.t_lo - 2f64.powi(-25)).abs() < 1e-18);
        let close = p.predict(&interpolate(&[0.0, 0.0], &x, s.t_lo)).unwrap();
        let far = p.predict(&interpolate(&[0.0, 0.0], &x, s.t_hi)).unwrap();
        assert!(spec.is_eps_close(close));
        assert!(!spec.is_eps_close(far));
    }

    #[test]
    fn close_point_is_a_precondition_violation() {
        let p = Predictor::from_fn(1, |x| x[0]);
        let spec = ClosenessSpec::interval(0.0, 1.0, 1.0).unwrap();
        assert!(matches!(
            line_search(&[0.5], 0.5, &spec, &p, &[0.0], 10),
            Err(RbxError::Precondition(_))
        ));
    }
}
