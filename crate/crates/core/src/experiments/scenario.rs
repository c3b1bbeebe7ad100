//! Synthetic ten-feature scenarios with known locally relevant features.
//!
//! Features `x1..x9` are independent standard normals and `x10` is an equal
//! mixture of `N(3, 1)` and `N(-3, 1)`. Indices in this module are 0-based,
//! so `x10` is index 9.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub const DIMENSION: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScenarioKind {
    Xor,
    OrangeSkin,
    NonlinearAdditive,
    Switch,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 4] = [
        ScenarioKind::Xor,
        ScenarioKind::OrangeSkin,
        ScenarioKind::NonlinearAdditive,
        ScenarioKind::Switch,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Xor => "xor",
            ScenarioKind::OrangeSkin => "orange-skin",
            ScenarioKind::NonlinearAdditive => "nonlinear-additive",
            ScenarioKind::Switch => "switch",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }
}

/// Which XOR response to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum XorForm {
    /// `(1 + exp(x1·x2))^-1`, a probability with its 0.5 level at `x1·x2 = 0`.
    #[default]
    Logistic,
    /// `(1 + x1·x2)^-1`, singular on `x1·x2 = -1`.
    Literal,
}

/// Ground-truth relevant sets for the switch scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SwitchRelevance {
    /// `{x1..x4, x10}` when `x10 >= 0`, else `{x5..x8, x10}`: the blocks the
    /// formula actually weights, plus the switch variable.
    #[default]
    Formula,
    /// `{x5..x9}` when `x10 >= 0`, else `{x1..x4, x9}`, read verbatim from
    /// the scenario's original prose.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub xor_form: XorForm,
    pub switch_relevance: SwitchRelevance,
}

fn logistic_neg(z: f64) -> f64 {
    1.0 / (1.0 + z.exp())
}

fn orange(x: &[f64]) -> f64 {
    logistic_neg(x[..4].iter().map(|v| v * v).sum::<f64>() - 4.0)
}

fn nonlinear(x: &[f64]) -> f64 {
    logistic_neg(-100.0 * (2.0 * x[0]).sin() + 2.0 * x[1].abs() + x[2] + (-x[3]).exp())
}

/// Posterior weight of the `N(3, 1)` component given `x10`. The normal
/// densities' ratio reduces to `exp(6·x10)`.
pub fn switch_weight(x10: f64) -> f64 {
    1.0 / (1.0 + (-6.0 * x10).exp())
}

impl Scenario {
    pub const DIMENSION: usize = DIMENSION;

    pub fn new(kind: ScenarioKind) -> Self {
        Self {
            kind,
            xor_form: XorForm::default(),
            switch_relevance: SwitchRelevance::default(),
        }
    }

    pub fn with_xor_form(mut self, form: XorForm) -> Self {
        self.xor_form = form;
        self
    }

    pub fn with_switch_relevance(mut self, relevance: SwitchRelevance) -> Self {
        self.switch_relevance = relevance;
        self
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    /// `E(Y | X = x)`.
    pub fn bayes_predict(&self, x: &[f64]) -> f64 {
        assert_eq!(
            x.len(),
            DIMENSION,
            "scenario inputs have {DIMENSION} features"
        );
        match self.kind {
            ScenarioKind::Xor => match self.xor_form {
                XorForm::Logistic => logistic_neg(x[0] * x[1]),
                XorForm::Literal => 1.0 / (1.0 + x[0] * x[1]),
            },
            ScenarioKind::OrangeSkin => orange(x),
            ScenarioKind::NonlinearAdditive => nonlinear(x),
            ScenarioKind::Switch => {
                let r = switch_weight(x[9]);
                orange(&x[..4]) * r + nonlinear(&x[4..8]) * (1.0 - r)
            }
        }
    }

    /// Number of relevant features.
    pub fn m(&self) -> usize {
        match self.kind {
            ScenarioKind::Xor => 2,
            ScenarioKind::OrangeSkin | ScenarioKind::NonlinearAdditive => 4,
            ScenarioKind::Switch => 5,
        }
    }

    /// Locally relevant features at `x`.
    pub fn relevant_features(&self, x: &[f64]) -> Vec<usize> {
        match self.kind {
            ScenarioKind::Xor => vec![0, 1],
            ScenarioKind::OrangeSkin | ScenarioKind::NonlinearAdditive => vec![0, 1, 2, 3],
            ScenarioKind::Switch => match (self.switch_relevance, x[9] >= 0.0) {
                (SwitchRelevance::Formula, true) => vec![0, 1, 2, 3, 9],
                (SwitchRelevance::Formula, false) => vec![4, 5, 6, 7, 9],
                (SwitchRelevance::Literal, true) => vec![4, 5, 6, 7, 8],
                (SwitchRelevance::Literal, false) => vec![0, 1, 2, 3, 8],
            },
        }
    }

    /// Every feature the Bayes response can depend on.
    pub fn model_features(&self) -> Vec<usize> {
        match self.kind {
            ScenarioKind::Xor => vec![0, 1],
            ScenarioKind::OrangeSkin | ScenarioKind::NonlinearAdditive => vec![0, 1, 2, 3],
            ScenarioKind::Switch => vec![0, 1, 2, 3, 4, 5, 6, 7, 9],
        }
    }

    /// Features the fitted KNN model looks at.
    pub fn knn_active(&self) -> Vec<usize> {
        self.model_features()
    }

    /// One draw from the feature distribution.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut x: Vec<f64> = (0..DIMENSION).map(|_| StandardNormal.sample(rng)).collect();
        let centre = if rng.random::<bool>() { 3.0 } else { -3.0 };
        x[9] += centre;
        x
    }

    pub fn sample_n<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<Vec<f64>> {
        (0..n).map(|_| self.sample(rng)).collect()
    }
}
