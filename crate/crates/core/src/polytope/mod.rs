//! Halfspace intersections and feature escape distances.

mod escape;
mod io;

pub use escape::{escape_report, Direction, Escape, EscapeReport, FeatureEscape, InfiniteReason};
pub use io::{parse_polytope, polytope_to_text};

use serde::{Deserialize, Serialize};

use crate::error::{RbxError, Result};

/// `{x : x·normal <= intercept}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Halfspace {
    pub normal: Vec<f64>,
    pub intercept: f64,
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Relative slack for strict-interior tests.
pub const STRICT_TOLERANCE: f64 = 1e-12;

impl Halfspace {
    /// Halfspace through `point` with the given normal. The normal must not
    /// be the zero vector.
    pub fn through(point: &[f64], normal: Vec<f64>) -> Result<Self> {
        if normal.iter().all(|g| *g == 0.0) {
            return Err(RbxError::InvalidInput(
                "halfspace normal is the zero vector".into(),
            ));
        }
        let intercept = dot(point, &normal);
        Ok(Self { normal, intercept })
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        dot(x, &self.normal) <= self.intercept
    }

    /// Membership in the interior, with slack `1e-12 (1 + |c|)`.
    pub fn contains_strictly(&self, x: &[f64]) -> bool {
        dot(x, &self.normal) < self.intercept - STRICT_TOLERANCE * (1.0 + self.intercept.abs())
    }

    /// Distance along `direction` from `origin` to the bounding hyperplane,
    /// `+∞` when the direction does not move against the normal.
    pub fn exit_along(&self, origin: &[f64], direction: &[f64]) -> f64 {
        let rate = dot(direction, &self.normal);
        if rate > 0.0 {
            ((self.intercept - dot(origin, &self.normal)) / rate).max(0.0)
        } else {
            f64::INFINITY
        }
    }
}

/// Finite intersection of halfspaces around a center point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polytope {
    pub halfspaces: Vec<Halfspace>,
    pub center: Vec<f64>,
}

impl Polytope {
    pub fn new(center: Vec<f64>) -> Self {
        Self {
            halfspaces: Vec::new(),
            center,
        }
    }

    pub fn dimension(&self) -> usize {
        self.center.len()
    }

    pub fn len(&self) -> usize {
        self.halfspaces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.halfspaces.is_empty()
    }

    pub fn push(&mut self, h: Halfspace) {
        debug_assert_eq!(h.normal.len(), self.dimension());
        self.halfspaces.push(h);
    }

    pub fn contains(&self, x: &[f64], strict: bool) -> bool {
        if strict {
            self.halfspaces.iter().all(|h| h.contains_strictly(x))
        } else {
            self.halfspaces.iter().all(|h| h.contains(x))
        }
    }

    /// Smallest `α > 0` with `origin + α·direction` outside the polytope,
    /// `+∞` if the ray never leaves. `origin` must be inside.
    pub fn ray_exit(&self, origin: &[f64], direction: &[f64]) -> Result<f64> {
        if origin.len() != self.dimension() || direction.len() != self.dimension() {
            return Err(RbxError::InvalidInput("ray has the wrong dimension".into()));
        }
        if !self.contains(origin, false) {
            return Err(RbxError::Precondition(
                "ray origin lies outside the polytope".into(),
            ));
        }
        Ok(self
            .halfspaces
            .iter()
            .map(|h| h.exit_along(origin, direction))
            .fold(f64::INFINITY, f64::min))
    }
}
