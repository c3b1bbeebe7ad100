//! Per-feature escape distances and the importance ranking built from them.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Polytope;
use crate::error::{RbxError, Result};

/// Why an escape distance is infinite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InfiniteReason {
    /// No halfspace constrains movement in this direction.
    NoConstrainingHalfspace,
    /// The escape path leaves the trusted region first.
    TrustOverride,
    /// A line search found no exit within its horizon.
    HorizonExhausted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Escape {
    Finite(f64),
    Infinite(InfiniteReason),
}

impl Escape {
    pub fn from_distance(distance: f64, reason: InfiniteReason) -> Self {
        if distance.is_finite() {
            Escape::Finite(distance)
        } else {
            Escape::Infinite(reason)
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Escape::Finite(d) => d,
            Escape::Infinite(_) => f64::INFINITY,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Escape::Finite(_))
    }

    pub fn reason(self) -> Option<InfiniteReason> {
        match self {
            Escape::Finite(_) => None,
            Escape::Infinite(r) => Some(r),
        }
    }

    fn scaled(self, s: f64) -> Self {
        match self {
            Escape::Finite(d) => Escape::Finite(d * s),
            inf => inf,
        }
    }
}

/// Sign of `S+ - S-`, kept apart from the magnitude so that a symmetric
/// finite escape is not collapsed to zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    Positive,
    Negative,
    Tie,
    /// Both distances infinite: the feature has no importance.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureEscape {
    pub plus: Escape,
    pub minus: Escape,
}

impl FeatureEscape {
    pub fn magnitude(&self) -> f64 {
        self.plus.value().min(self.minus.value())
    }

    pub fn has_importance(&self) -> bool {
        self.plus.is_finite() || self.minus.is_finite()
    }

    pub fn direction(&self) -> Direction {
        let (p, m) = (self.plus.value(), self.minus.value());
        if !self.has_importance() {
            Direction::None
        } else if p > m {
            Direction::Positive
        } else if p < m {
            Direction::Negative
        } else {
            Direction::Tie
        }
    }

    /// `magnitude · sign(S+ - S-)`, with ties reported as the bare magnitude.
    pub fn signed(&self) -> f64 {
        match self.direction() {
            Direction::Negative => -self.magnitude(),
            _ => self.magnitude(),
        }
    }

    fn scaled(&self, s: f64) -> Self {
        Self {
            plus: self.plus.scaled(s),
            minus: self.minus.scaled(s),
        }
    }
}

/// Escape distances on the standardized scale, the feature scales needed to
/// express them on the original scale, and the importance ranking.
#[derive(Debug, Clone, PartialEq)]
pub struct EscapeReport {
    standardized: Vec<FeatureEscape>,
    scales: Vec<f64>,
    ranking: Vec<usize>,
    tie_seed: u64,
}

impl EscapeReport {
    pub fn new(standardized: Vec<FeatureEscape>, scales: Vec<f64>, tie_seed: u64) -> Self {
        assert_eq!(standardized.len(), scales.len(), "one scale per feature");
        let ranking = rank(&standardized, tie_seed);
        Self {
            standardized,
            scales,
            ranking,
            tie_seed,
        }
    }

    pub fn dimension(&self) -> usize {
        self.standardized.len()
    }

    pub fn standardized(&self, j: usize) -> FeatureEscape {
        self.standardized[j]
    }

    pub fn original(&self, j: usize) -> FeatureEscape {
        self.standardized[j].scaled(self.scales[j])
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn features(&self) -> &[FeatureEscape] {
        &self.standardized
    }

    pub fn tie_seed(&self) -> u64 {
        self.tie_seed
    }

    /// All features, most important first; features without importance last,
    /// in index order.
    pub fn ranking(&self) -> &[usize] {
        &self.ranking
    }

    /// Ranking prefix of features with finite importance.
    pub fn important(&self) -> &[usize] {
        let n = self
            .standardized
            .iter()
            .filter(|f| f.has_importance())
            .count();
        &self.ranking[..n]
    }

    /// Replace per-feature distances (same scales and seed) and re-rank.
    pub fn with_features(&self, standardized: Vec<FeatureEscape>) -> Self {
        Self::new(standardized, self.scales.clone(), self.tie_seed)
    }
}

fn rank(features: &[FeatureEscape], seed: u64) -> Vec<usize> {
    let mut finite: Vec<usize> = (0..features.len())
        .filter(|&j| features[j].has_importance())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    finite.shuffle(&mut rng);
    // stable sort: equal magnitudes keep their shuffled order
    finite.sort_by(|&a, &b| features[a].magnitude().total_cmp(&features[b].magnitude()));
    finite.extend((0..features.len()).filter(|&j| !features[j].has_importance()));
    finite
}

/// Escape distances of `p` from `x0` along each coordinate axis.
pub fn escape_report(
    p: &Polytope,
    x0: &[f64],
    scales: &[f64],
    tie_seed: u64,
) -> Result<EscapeReport> {
    let d = p.dimension();
    if x0.len() != d || scales.len() != d {
        return Err(RbxError::InvalidInput(
            "escape report dimension mismatch".into(),
        ));
    }
    let mut features = Vec::with_capacity(d);
    let mut e = vec![0.0; d];
    for j in 0..d {
        e[j] = 1.0;
        let plus = p.ray_exit(x0, &e)?;
        e[j] = -1.0;
        let minus = p.ray_exit(x0, &e)?;
        e[j] = 0.0;
        features.push(FeatureEscape {
            plus: Escape::from_distance(plus, InfiniteReason::NoConstrainingHalfspace),
            minus: Escape::from_distance(minus, InfiniteReason::NoConstrainingHalfspace),
        });
    }
    Ok(EscapeReport::new(features, scales.to_vec(), tie_seed))
}
