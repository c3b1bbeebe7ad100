//! Query access to scalar prediction models.
//!
//! A [`Predictor`] wraps either an in-process [`Model`] or a remote model
//! reached over the line-delimited JSON protocol in [`protocol`]. Every
//! caller in the crate submits points in batches through
//! [`Predictor::predict_batch`], which also keeps the query count.

pub mod builtin;
pub mod model_file;
pub mod protocol;
pub mod remote;

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use crate::error::PredictError;
use crate::par::Execution;

pub use builtin::{BuiltinModel, TreeNode};
pub use remote::{RemoteConfig, RemoteTarget};

/// A deterministic scalar prediction function evaluated in-process.
pub trait Model: Send + Sync {
    fn dimension(&self) -> usize;

    fn predict_one(&self, x: &[f64]) -> f64;

    /// Features the model can depend on, if known. `None` means unknown.
    fn active_features(&self) -> Option<Vec<usize>> {
        None
    }
}

/// A model backed by a closure. Used for analytic test functions.
pub struct FnModel<F> {
    dimension: usize,
    f: F,
}

impl<F> FnModel<F>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    pub fn new(dimension: usize, f: F) -> Self {
        Self { dimension, f }
    }
}

impl<F> Model for FnModel<F>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn predict_one(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}

enum Backend {
    InProcess(Arc<dyn Model>),
    Remote(Mutex<remote::Connection>),
}

/// Batches smaller than this are evaluated on the calling thread.
const PARALLEL_BATCH_MIN: usize = 64;

/// Query-access handle to a prediction model.
pub struct Predictor {
    dimension: usize,
    backend: Backend,
    queries: AtomicU64,
    cache: Option<Mutex<HashMap<Vec<u64>, f64>>>,
    execution: Execution,
}

impl std::fmt::Debug for Predictor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let backend = match &self.backend {
            Backend::InProcess(_) => "in-process",
            Backend::Remote(_) => "remote",
        };
        f.debug_struct("Predictor")
            .field("dimension", &self.dimension)
            .field("backend", &backend)
            .field("queries", &self.query_count())
            .finish()
    }
}

impl Predictor {
    pub fn new(model: impl Model + 'static) -> Self {
        Self::from_arc(Arc::new(model))
    }

    pub fn from_arc(model: Arc<dyn Model>) -> Self {
        Self {
            dimension: model.dimension(),
            backend: Backend::InProcess(model),
            queries: AtomicU64::new(0),
            cache: None,
            execution: Execution::default(),
        }
    }

    pub fn from_fn<F>(dimension: usize, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self::new(FnModel::new(dimension, f))
    }

    /// Launch or reach a remote model and negotiate its dimension.
    pub fn connect(config: &RemoteConfig) -> Result<Self, PredictError> {
        let conn = remote::Connection::open(config)?;
        Ok(Self {
            dimension: conn.dimension(),
            backend: Backend::Remote(Mutex::new(conn)),
            queries: AtomicU64::new(0),
            cache: None,
            execution: Execution::default(),
        })
    }

    /// Enable the exact-coordinate query cache.
    pub fn with_cache(mut self) -> Self {
        self.cache = Some(Mutex::new(HashMap::new()));
        self
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn is_remote(&self) -> bool {
        matches!(self.backend, Backend::Remote(_))
    }

    /// Total number of points submitted so far.
    pub fn query_count(&self) -> u64 {
        self.queries.load(Ordering::Relaxed)
    }

    /// Active feature set of an in-process model, when the model exposes it.
    pub fn active_features(&self) -> Option<Vec<usize>> {
        match &self.backend {
            Backend::InProcess(m) => m.active_features(),
            Backend::Remote(_) => None,
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64, PredictError> {
        Ok(self.predict_batch(&[x.to_vec()])?[0])
    }

    /// Evaluate a batch of points, one prediction per point, in order.
    pub fn predict_batch(&self, points: &[Vec<f64>]) -> Result<Vec<f64>, PredictError> {
        for (index, p) in points.iter().enumerate() {
            if p.len() != self.dimension {
                return Err(PredictError::DimensionMismatch {
                    index,
                    expected: self.dimension,
                    got: p.len(),
                });
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(PredictError::NonFiniteInput { index });
            }
        }
        self.queries
            .fetch_add(points.len() as u64, Ordering::Relaxed);

        let values = match &self.cache {
            None => self.evaluate(points)?,
            Some(cache) => {
                let keys: Vec<Vec<u64>> = points
                    .iter()
                    .map(|p| p.iter().map(|v| v.to_bits()).collect())
                    .collect();
                let mut out = vec![f64::NAN; points.len()];
                let mut missing = Vec::new();
                {
                    let map = cache.lock().expect("cache poisoned");
                    for (i, k) in keys.iter().enumerate() {
                        match map.get(k) {
                            Some(v) => out[i] = *v,
                            None => missing.push(i),
                        }
                    }
                }
                if !missing.is_empty() {
                    let batch: Vec<Vec<f64>> = missing.iter().map(|&i| points[i].clone()).collect();
                    let fresh = self.evaluate(&batch)?;
                    let mut map = cache.lock().expect("cache poisoned");
                    for (&i, v) in missing.iter().zip(fresh) {
                        out[i] = v;
                        map.insert(keys[i].clone(), v);
                    }
                }
                out
            }
        };

        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(PredictError::NonFiniteOutput { index });
        }
        Ok(values)
    }

    fn evaluate(&self, points: &[Vec<f64>]) -> Result<Vec<f64>, PredictError> {
        match &self.backend {
            Backend::InProcess(model) => {
                let exec = if points.len() >= PARALLEL_BATCH_MIN {
                    self.execution
                } else {
                    Execution::Sequential
                };
                Ok(exec.map(points, |p| model.predict_one(p)))
            }
            Backend::Remote(conn) => {
                if points.is_empty() {
                    return Ok(Vec::new());
                }
                conn.lock()
                    .map_err(|_| PredictError::Transport {
                        message: "remote connection poisoned by an earlier failure".into(),
                        line: None,
                    })?
                    .predict(points)
            }
        }
    }
}

/// Anything that answers batched prediction queries.
pub trait Query: Sync {
    fn dimension(&self) -> usize;

    fn predict_batch(&self, points: &[Vec<f64>]) -> Result<Vec<f64>, PredictError>;
}

impl Query for Predictor {
    fn dimension(&self) -> usize {
        Predictor::dimension(self)
    }

    fn predict_batch(&self, points: &[Vec<f64>]) -> Result<Vec<f64>, PredictError> {
        Predictor::predict_batch(self, points)
    }
}

/// View of a model in standardized coordinates: a query at `z` evaluates
/// the wrapped model at `diag(scales) z`.
pub struct Rescaled<'a, Q: ?Sized> {
    inner: &'a Q,
    scales: &'a [f64],
}

impl<'a, Q: Query + ?Sized> Rescaled<'a, Q> {
    pub fn new(inner: &'a Q, scales: &'a [f64]) -> Self {
        assert_eq!(inner.dimension(), scales.len(), "one scale per feature");
        Self { inner, scales }
    }

    pub fn to_original(&self, z: &[f64]) -> Vec<f64> {
        z.iter().zip(self.scales).map(|(v, s)| v * s).collect()
    }
}

impl<Q: Query + ?Sized> Query for Rescaled<'_, Q> {
    fn dimension(&self) -> usize {
        self.scales.len()
    }

    fn predict_batch(&self, points: &[Vec<f64>]) -> Result<Vec<f64>, PredictError> {
        let mapped: Vec<Vec<f64>> = points.iter().map(|z| self.to_original(z)).collect();
        self.inner.predict_batch(&mapped)
    }
}
