//! Built-in prediction models.

use serde::{Deserialize, Serialize};

use super::Model;
use crate::error::ModelFileError;
use crate::experiments::Scenario;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    /// Go to `left` when `x[feature] <= threshold`, else `right`.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// One quadratic term `weight * x[i] * x[j]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadTerm {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BuiltinModel {
    Linear {
        coefficients: Vec<f64>,
        intercept: f64,
    },
    /// `x[j] * x[k]`.
    Bilinear {
        dimension: usize,
        j: usize,
        k: usize,
    },
    /// Root is node 0.
    Tree {
        dimension: usize,
        nodes: Vec<TreeNode>,
    },
    Knn(Knn),
    Bayes(Scenario),
    /// `1 / (1 + exp(-(intercept + linear·x + Σ w x_i x_j)))`.
    QuadraticLogistic {
        dimension: usize,
        intercept: f64,
        linear: Vec<f64>,
        quadratic: Vec<QuadTerm>,
    },
}

/// K-nearest-neighbours regressor restricted to an active feature subset.
#[derive(Debug, Clone, PartialEq)]
pub struct Knn {
    pub dimension: usize,
    pub k: usize,
    pub active: Vec<usize>,
    /// Full-width training rows.
    pub points: Vec<Vec<f64>>,
    pub responses: Vec<f64>,
    /// Active columns of `points`, row-major.
    packed: Vec<f64>,
}

impl Knn {
    pub fn new(
        points: Vec<Vec<f64>>,
        responses: Vec<f64>,
        k: usize,
        active: Vec<usize>,
    ) -> Result<Self, ModelFileError> {
        let n = points.len();
        if n == 0 {
            return Err(ModelFileError::Invalid(
                "knn needs at least one training point".into(),
            ));
        }
        if responses.len() != n {
            return Err(ModelFileError::Invalid(format!(
                "knn has {n} points but {} responses",
                responses.len()
            )));
        }
        if k == 0 || k > n {
            return Err(ModelFileError::Invalid(format!(
                "knn requires 1 <= k <= {n}, got {k}"
            )));
        }
        let dimension = points[0].len();
        if points.iter().any(|p| p.len() != dimension) {
            return Err(ModelFileError::Invalid(
                "knn training points have ragged widths".into(),
            ));
        }
        if active.iter().any(|&a| a >= dimension) {
            return Err(ModelFileError::Invalid(
                "knn active feature out of range".into(),
            ));
        }
        if responses
            .iter()
            .chain(points.iter().flatten())
            .any(|v| !v.is_finite())
        {
            return Err(ModelFileError::Invalid(
                "knn training data must be finite".into(),
            ));
        }
        let mut active = active;
        active.sort_unstable();
        active.dedup();
        let packed = points
            .iter()
            .flat_map(|p| active.iter().map(move |&a| p[a]))
            .collect();
        Ok(Self {
            dimension,
            k,
            active,
            points,
            responses,
            packed,
        })
    }

    fn predict(&self, x: &[f64]) -> f64 {
        let a = self.active.len();
        let q: Vec<f64> = self.active.iter().map(|&j| x[j]).collect();
        let mut dist: Vec<(f64, usize)> = (0..self.responses.len())
            .map(|i| {
                let row = &self.packed[i * a..(i + 1) * a];
                let d: f64 = row.iter().zip(&q).map(|(r, v)| (r - v) * (r - v)).sum();
                (d, i)
            })
            .collect();
        let by_dist = |l: &(f64, usize), r: &(f64, usize)| l.0.total_cmp(&r.0).then(l.1.cmp(&r.1));
        if self.k < dist.len() {
            dist.select_nth_unstable_by(self.k - 1, by_dist);
            dist.truncate(self.k);
        }
        dist.sort_unstable_by_key(|&(_, i)| i);
        dist.iter().map(|&(_, i)| self.responses[i]).sum::<f64>() / self.k as f64
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl BuiltinModel {
    pub fn linear(coefficients: Vec<f64>, intercept: f64) -> Self {
        BuiltinModel::Linear {
            coefficients,
            intercept,
        }
    }

    pub fn bilinear(dimension: usize, j: usize, k: usize) -> Self {
        assert!(
            j < dimension && k < dimension,
            "bilinear feature out of range"
        );
        BuiltinModel::Bilinear { dimension, j, k }
    }

    pub fn knn(
        points: Vec<Vec<f64>>,
        responses: Vec<f64>,
        k: usize,
        active: Vec<usize>,
    ) -> Result<Self, ModelFileError> {
        Knn::new(points, responses, k, active).map(BuiltinModel::Knn)
    }

    pub fn tree(dimension: usize, nodes: Vec<TreeNode>) -> Result<Self, ModelFileError> {
        validate_tree(dimension, &nodes)?;
        Ok(BuiltinModel::Tree { dimension, nodes })
    }

    /// Single-split step: `1{x[feature] > threshold}`.
    pub fn step(dimension: usize, feature: usize, threshold: f64) -> Self {
        BuiltinModel::tree(
            dimension,
            vec![
                TreeNode::Split {
                    feature,
                    threshold,
                    left: 1,
                    right: 2,
                },
                TreeNode::Leaf { value: 0.0 },
                TreeNode::Leaf { value: 1.0 },
            ],
        )
        .expect("step tree is well formed")
    }

    pub fn kind(&self) -> &'static str {
        match self {
            BuiltinModel::Linear { .. } => "linear",
            BuiltinModel::Bilinear { .. } => "bilinear",
            BuiltinModel::Tree { .. } => "tree",
            BuiltinModel::Knn(_) => "knn",
            BuiltinModel::Bayes(_) => "bayes",
            BuiltinModel::QuadraticLogistic { .. } => "quadratic-logistic",
        }
    }
}

pub(crate) fn validate_tree(dimension: usize, nodes: &[TreeNode]) -> Result<(), ModelFileError> {
    if nodes.is_empty() {
        return Err(ModelFileError::Invalid("tree has no nodes".into()));
    }
    let mut parents = vec![0usize; nodes.len()];
    for (i, node) in nodes.iter().enumerate() {
        match *node {
            TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                if feature >= dimension {
                    return Err(ModelFileError::Invalid(format!(
                        "node {i} splits on feature {feature}, dimension is {dimension}"
                    )));
                }
                if threshold.is_nan() {
                    return Err(ModelFileError::Invalid(format!(
                        "node {i} has a NaN threshold"
                    )));
                }
                for child in [left, right] {
                    if child >= nodes.len() || child == 0 {
                        return Err(ModelFileError::Invalid(format!(
                            "node {i} has invalid child {child}"
                        )));
                    }
                    parents[child] += 1;
                }
                if left == right {
                    return Err(ModelFileError::Invalid(format!(
                        "node {i} needs two distinct children"
                    )));
                }
            }
            TreeNode::Leaf { value } => {
                if !value.is_finite() {
                    return Err(ModelFileError::Invalid(format!("leaf {i} is not finite")));
                }
            }
        }
    }
    // every non-root node has exactly one parent and is reachable from the root
    if let Some(i) = (1..nodes.len()).find(|&i| parents[i] != 1) {
        return Err(ModelFileError::Invalid(format!(
            "node {i} has {} parents, expected 1",
            parents[i]
        )));
    }
    let mut seen = vec![false; nodes.len()];
    let mut stack = vec![0usize];
    while let Some(i) = stack.pop() {
        if std::mem::replace(&mut seen[i], true) {
            return Err(ModelFileError::Invalid("tree contains a cycle".into()));
        }
        if let TreeNode::Split { left, right, .. } = nodes[i] {
            stack.push(left);
            stack.push(right);
        }
    }
    if let Some(i) = seen.iter().position(|s| !s) {
        return Err(ModelFileError::Invalid(format!("node {i} is unreachable")));
    }
    Ok(())
}

impl Model for BuiltinModel {
    fn dimension(&self) -> usize {
        match self {
            BuiltinModel::Linear { coefficients, .. } => coefficients.len(),
            BuiltinModel::Bilinear { dimension, .. }
            | BuiltinModel::Tree { dimension, .. }
            | BuiltinModel::QuadraticLogistic { dimension, .. } => *dimension,
            BuiltinModel::Knn(knn) => knn.dimension,
            BuiltinModel::Bayes(_) => Scenario::DIMENSION,
        }
    }

    fn predict_one(&self, x: &[f64]) -> f64 {
        match self {
            BuiltinModel::Linear {
                coefficients,
                intercept,
            } => coefficients.iter().zip(x).map(|(c, v)| c * v).sum::<f64>() + intercept,
            BuiltinModel::Bilinear { j, k, .. } => x[*j] * x[*k],
            BuiltinModel::Tree { nodes, .. } => {
                let mut i = 0;
                loop {
                    match nodes[i] {
                        TreeNode::Leaf { value } => return value,
                        TreeNode::Split {
                            feature,
                            threshold,
                            left,
                            right,
                        } => i = if x[feature] <= threshold { left } else { right },
                    }
                }
            }
            BuiltinModel::Knn(knn) => knn.predict(x),
            BuiltinModel::Bayes(s) => s.bayes_predict(x),
            BuiltinModel::QuadraticLogistic {
                intercept,
                linear,
                quadratic,
                ..
            } => {
                let mut z = *intercept;
                for (w, v) in linear.iter().zip(x) {
                    z += w * v;
                }
                for t in quadratic {
                    z += t.weight * x[t.i] * x[t.j];
                }
                sigmoid(z)
            }
        }
    }

    fn active_features(&self) -> Option<Vec<usize>> {
        let mut out: Vec<usize> = match self {
            BuiltinModel::Linear { coefficients, .. } => coefficients
                .iter()
                .enumerate()
                .filter(|(_, c)| **c != 0.0)
                .map(|(i, _)| i)
                .collect(),
            BuiltinModel::Bilinear { j, k, .. } => vec![*j, *k],
            BuiltinModel::Tree { nodes, .. } => nodes
                .iter()
                .filter_map(|n| match n {
                    TreeNode::Split { feature, .. } => Some(*feature),
                    TreeNode::Leaf { .. } => None,
                })
                .collect(),
            BuiltinModel::Knn(knn) => knn.active.clone(),
            BuiltinModel::Bayes(s) => s.model_features(),
            BuiltinModel::QuadraticLogistic {
                linear, quadratic, ..
            } => linear
                .iter()
                .enumerate()
                .filter(|(_, w)| **w != 0.0)
                .map(|(i, _)| i)
                .chain(
                    quadratic
                        .iter()
                        .filter(|t| t.weight != 0.0)
                        .flat_map(|t| [t.i, t.j]),
                )
                .collect(),
        };
        out.sort_unstable();
        out.dedup();
        Some(out)
    }
}
