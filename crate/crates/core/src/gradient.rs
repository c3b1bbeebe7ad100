//! Finite-difference gradient estimation with Gaussian jitter averaging.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{RbxError, Result};
use crate::predictor::Query;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientParams {
    /// Central-difference step.
    pub delta: f64,
    pub jitter_radius: f64,
    pub jitter_samples: usize,
    pub seed: u64,
}

impl Default for GradientParams {
    fn default() -> Self {
        Self {
            delta: 0.1,
            jitter_radius: 0.01,
            jitter_samples: 10,
            seed: 0,
        }
    }
}

impl GradientParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return Err(RbxError::InvalidInput(format!(
                "delta must be positive, got {}",
                self.delta
            )));
        }
        if !(self.jitter_radius.is_finite() && self.jitter_radius >= 0.0) {
            return Err(RbxError::InvalidInput(format!(
                "jitter radius must be nonnegative, got {}",
                self.jitter_radius
            )));
        }
        if self.jitter_samples == 0 {
            return Err(RbxError::InvalidInput(
                "jitter samples must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Jitter offsets for one gradient estimate. `stream` selects an independent
/// substream of the seeded generator, so results do not depend on the order
/// in which points are processed.
fn jitter(params: &GradientParams, d: usize, stream: u64) -> Vec<Vec<f64>> {
    if params.jitter_radius == 0.0 {
        return vec![vec![0.0; d]; params.jitter_samples];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    rng.set_stream(stream);
    (0..params.jitter_samples)
        .map(|_| {
            (0..d)
                .map(|_| {
                    params.jitter_radius * Distribution::<f64>::sample(&StandardNormal, &mut rng)
                })
                .collect::<Vec<f64>>()
        })
        .collect()
}

/// Average of central-difference gradients at `m` jittered copies of `x`.
///
/// Issues exactly `m * 2d` queries in one batch. Each difference is divided
/// by the realized step `(v_i + δ) - (v_i - δ)`, which equals `2δ` in exact
/// arithmetic. A feature the model ignores yields an exact zero component.
pub fn estimate_grad(
    x: &[f64],
    predictor: &dyn Query,
    params: &GradientParams,
    stream: u64,
) -> Result<Vec<f64>> {
    params.validate()?;
    let d = x.len();
    if d != predictor.dimension() {
        return Err(RbxError::InvalidInput(format!(
            "point has width {d}, model expects {}",
            predictor.dimension()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(RbxError::InvalidInput(
            "gradient point must be finite".into(),
        ));
    }
    let centers: Vec<Vec<f64>> = jitter(params, d, stream)
        .into_iter()
        .map(|z| x.iter().zip(z).map(|(a, b)| a + b).collect())
        .collect();

    let mut queries = Vec::with_capacity(centers.len() * 2 * d);
    let mut steps = Vec::with_capacity(centers.len() * d);
    for v in &centers {
        for i in 0..d {
            let mut up = v.clone();
            let mut down = v.clone();
            up[i] += params.delta;
            down[i] -= params.delta;
            steps.push(up[i] - down[i]);
            queries.push(up);
            queries.push(down);
        }
    }
    let values = predictor.predict_batch(&queries)?;

    let mut grad = vec![0.0; d];
    for (k, pair) in values.chunks_exact(2).enumerate() {
        let diff = pair[0] - pair[1];
        let step = steps[k];
        if diff != 0.0 && step != 0.0 {
            grad[k % d] += diff / step;
        }
    }
    let m = params.jitter_samples as f64;
    for g in &mut grad {
        *g /= m;
    }
    Ok(grad)
}
