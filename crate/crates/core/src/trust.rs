//! Trusted regions from an estimated density ratio.
//!
//! A probabilistic classifier separates context points (label 1) from
//! uniform draws over the context's bounding box (label 0). Its odds,
//! rescaled by the class sizes, estimate `r(x) = g(x) / g0(x)` where `g` is
//! the context density and `g0` the uniform one. The trusted region is
//! `T = {x : r̂(x) >= β}`; an escape path that leaves `T` before it leaves
//! the polytope does not count, and its distance becomes infinite.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{RbxError, Result};
use crate::polytope::{Escape, EscapeReport, FeatureEscape, InfiniteReason};
use crate::search::{first_exits, ExitSearch};

/// An estimate of `g(x) / g0(x)`, in original feature units.
pub trait DensityRatio: Send + Sync {
    fn dimension(&self) -> usize;

    fn ratio(&self, x: &[f64]) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrustOptions {
    /// Baseline draws; `None` means as many as there are context points.
    pub baseline_size: Option<usize>,
    /// Highest total degree of the polynomial features.
    pub degree: usize,
    pub max_iterations: usize,
    /// Stop once every gradient component is below this.
    pub tolerance: f64,
    pub ridge: f64,
    pub seed: u64,
}

impl Default for TrustOptions {
    fn default() -> Self {
        Self {
            baseline_size: None,
            degree: 2,
            max_iterations: 5000,
            tolerance: 1e-7,
            ridge: 1e-4,
            seed: 0,
        }
    }
}

/// Logistic regression on all monomials up to a fixed total degree
/// (quadratic by default).
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialLogisticRatio {
    dimension: usize,
    degree: usize,
    terms: Vec<Vec<usize>>,
    /// Standardization of the expanded features.
    mean: Vec<f64>,
    scale: Vec<f64>,
    weights: Vec<f64>,
    bias: f64,
    /// Context and baseline class sizes.
    pub n: usize,
    pub n0: usize,
}

/// Monomials of degree 1..=degree, each as a non-decreasing index list.
fn monomials(d: usize, degree: usize) -> Vec<Vec<usize>> {
    let mut all = Vec::new();
    let mut level: Vec<Vec<usize>> = vec![Vec::new()];
    for _ in 0..degree {
        level = level
            .iter()
            .flat_map(|m| {
                let from = m.last().copied().unwrap_or(0);
                (from..d).map(move |i| {
                    let mut n = m.clone();
                    n.push(i);
                    n
                })
            })
            .collect();
        all.extend(level.iter().cloned());
    }
    all
}

fn expand(x: &[f64], terms: &[Vec<usize>]) -> Vec<f64> {
    terms
        .iter()
        .map(|t| t.iter().map(|&i| x[i]).product())
        .collect()
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl PolynomialLogisticRatio {
    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Classifier log-odds at `x`.
    pub fn logit(&self, x: &[f64]) -> f64 {
        let phi = expand(x, &self.terms);
        self.bias
            + phi
                .iter()
                .zip(&self.mean)
                .zip(&self.scale)
                .zip(&self.weights)
                .map(|(((v, m), s), w)| w * (v - m) / s)
                .sum::<f64>()
    }

    /// Class-1 probability at `x`.
    pub fn probability(&self, x: &[f64]) -> f64 {
        sigmoid(self.logit(x))
    }

    /// Fit on explicit context (label 1) and baseline (label 0) sets.
    pub fn fit(
        context: &[Vec<f64>],
        baseline: &[Vec<f64>],
        options: &TrustOptions,
    ) -> Result<Self> {
        let (n, n0) = (context.len(), baseline.len());
        if n < 2 || n0 < 1 {
            return Err(RbxError::InvalidInput(
                "trust fit needs n >= 2 and N0 >= 1".into(),
            ));
        }
        let d = context[0].len();
        if context.iter().chain(baseline).any(|x| x.len() != d) {
            return Err(RbxError::InvalidInput(
                "trust fit rows have mixed widths".into(),
            ));
        }
        if options.degree == 0 {
            return Err(RbxError::InvalidInput(
                "polynomial degree must be at least 1".into(),
            ));
        }
        let terms = monomials(d, options.degree);
        let rows: Vec<Vec<f64>> = context
            .iter()
            .chain(baseline)
            .map(|x| expand(x, &terms))
            .collect();
        let labels: Vec<f64> = (0..n + n0).map(|i| if i < n { 1.0 } else { 0.0 }).collect();
        let p = rows[0].len();
        let total = rows.len() as f64;

        let mean: Vec<f64> = (0..p)
            .map(|k| rows.iter().map(|r| r[k]).sum::<f64>() / total)
            .collect();
        let scale: Vec<f64> = (0..p)
            .map(|k| {
                let v = rows.iter().map(|r| (r[k] - mean[k]).powi(2)).sum::<f64>() / total;
                if v > 0.0 {
                    v.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        // design matrix with a leading intercept column
        let design: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| {
                std::iter::once(1.0)
                    .chain(
                        r.iter()
                            .zip(&mean)
                            .zip(&scale)
                            .map(|((v, m), s)| (v - m) / s),
                    )
                    .collect()
            })
            .collect();

        let lipschitz = largest_gram_eigenvalue(&design) / 4.0 + options.ridge;
        let step = 1.0 / lipschitz;
        let mut theta = vec![0.0; p + 1];
        let mut grad = vec![0.0; p + 1];
        for _ in 0..options.max_iterations {
            grad.iter_mut().for_each(|g| *g = 0.0);
            for (row, y) in design.iter().zip(&labels) {
                let z: f64 = row.iter().zip(&theta).map(|(a, b)| a * b).sum();
                let r = sigmoid(z) - y;
                for (g, a) in grad.iter_mut().zip(row) {
                    *g += r * a;
                }
            }
            for (k, g) in grad.iter_mut().enumerate() {
                *g /= total;
                if k > 0 {
                    *g += options.ridge * theta[k];
                }
            }
            if grad.iter().all(|g| g.abs() < options.tolerance) {
                break;
            }
            for (t, g) in theta.iter_mut().zip(&grad) {
                *t -= step * g;
            }
        }
        Ok(Self {
            dimension: d,
            degree: options.degree,
            terms,
            mean,
            scale,
            bias: theta[0],
            weights: theta[1..].to_vec(),
            n,
            n0,
        })
    }

    pub fn to_text(&self) -> String {
        let join = |xs: &[f64]| {
            xs.iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(" ")
        };
        let mut s = String::new();
        let _ = writeln!(s, "dimension {}", self.dimension);
        let _ = writeln!(s, "degree {}", self.degree);
        let _ = writeln!(s, "classes {} {}", self.n, self.n0);
        let _ = writeln!(s, "bias {}", self.bias);
        let _ = writeln!(s, "mean {}", join(&self.mean));
        let _ = writeln!(s, "scale {}", join(&self.scale));
        let _ = writeln!(s, "weights {}", join(&self.weights));
        s
    }

    fn from_fields(fields: &[(&str, Vec<&str>)]) -> Result<Self> {
        let bad = |m: &str| RbxError::Parse(format!("trust file: {m}"));
        let get = |name: &str| -> Result<&Vec<&str>> {
            fields
                .iter()
                .find(|(k, _)| *k == name)
                .map(|(_, v)| v)
                .ok_or_else(|| bad(&format!("missing `{name}`")))
        };
        let floats = |name: &str| -> Result<Vec<f64>> {
            get(name)?
                .iter()
                .map(|t| {
                    t.parse::<f64>()
                        .map_err(|_| bad(&format!("bad number in `{name}`")))
                })
                .collect()
        };
        let dimension: usize = get("dimension")?
            .first()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| bad("bad dimension"))?;
        let degree: usize = get("degree")?
            .first()
            .and_then(|t| t.parse().ok())
            .filter(|&k| k >= 1)
            .ok_or_else(|| bad("bad degree"))?;
        let classes = get("classes")?;
        let parse_count = |t: Option<&&str>| {
            t.and_then(|t| t.parse::<usize>().ok())
                .ok_or_else(|| bad("bad classes"))
        };
        let (n, n0) = (parse_count(classes.first())?, parse_count(classes.get(1))?);
        let bias = *floats("bias")?.first().ok_or_else(|| bad("bad bias"))?;
        let (mean, scale, weights) = (floats("mean")?, floats("scale")?, floats("weights")?);
        let terms = monomials(dimension, degree);
        let p = terms.len();
        if mean.len() != p || scale.len() != p || weights.len() != p {
            return Err(bad(&format!("expected {p} expanded coefficients")));
        }
        Ok(Self {
            dimension,
            degree,
            terms,
            mean,
            scale,
            weights,
            bias,
            n,
            n0,
        })
    }
}

impl DensityRatio for PolynomialLogisticRatio {
    fn dimension(&self) -> usize {
        self.dimension
    }

    /// `p/(1-p) · N0/n`, computed from the log-odds so saturated
    /// probabilities stay finite.
    fn ratio(&self, x: &[f64]) -> f64 {
        self.logit(x).min(700.0).exp() * self.n0 as f64 / self.n as f64
    }
}

/// Power iteration for the top eigenvalue of `XᵀX / rows`.
fn largest_gram_eigenvalue(design: &[Vec<f64>]) -> f64 {
    let p = design[0].len();
    let rows = design.len() as f64;
    let mut v = vec![1.0 / (p as f64).sqrt(); p];
    let mut lambda = 0.0;
    for _ in 0..100 {
        let mut w = vec![0.0; p];
        for row in design {
            let s: f64 = row.iter().zip(&v).map(|(a, b)| a * b).sum();
            for (wk, a) in w.iter_mut().zip(row) {
                *wk += s * a / rows;
            }
        }
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 1.0;
        }
        let converged = (norm - lambda).abs() <= 1e-9 * norm;
        lambda = norm;
        v = w.into_iter().map(|x| x / norm).collect();
        if converged {
            break;
        }
    }
    // the iterate approaches from below; pad so the step stays stable
    lambda * 1.01
}

/// Uniform draws over the bounding box of `context`.
pub fn uniform_baseline(context: &[Vec<f64>], count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let d = context.first().map_or(0, |x| x.len());
    let lo: Vec<f64> = (0..d)
        .map(|j| context.iter().map(|x| x[j]).fold(f64::INFINITY, f64::min))
        .collect();
    let hi: Vec<f64> = (0..d)
        .map(|j| {
            context
                .iter()
                .map(|x| x[j])
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    if lo.iter().zip(&hi).all(|(a, b)| a == b) {
        return Err(RbxError::DegenerateHull);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count)
        .map(|_| {
            lo.iter()
                .zip(&hi)
                .map(|(&a, &b)| if a == b { a } else { rng.random_range(a..=b) })
                .collect()
        })
        .collect())
}

/// Fit the default density-ratio model against a uniform baseline.
pub fn fit_trust(context: &[Vec<f64>], options: &TrustOptions) -> Result<PolynomialLogisticRatio> {
    if context.len() < 2 {
        return Err(RbxError::InvalidInput(
            "trust fit needs at least two context points".into(),
        ));
    }
    let n0 = options.baseline_size.unwrap_or(context.len());
    if n0 == 0 {
        return Err(RbxError::InvalidInput(
            "baseline size must be at least 1".into(),
        ));
    }
    let baseline = uniform_baseline(context, n0, options.seed)?;
    PolynomialLogisticRatio::fit(context, &baseline, options)
}

/// `T = {x : r̂(x) >= beta}`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrustRegion<R = PolynomialLogisticRatio> {
    pub ratio: R,
    pub beta: f64,
}

impl<R: DensityRatio> TrustRegion<R> {
    pub fn new(ratio: R, beta: f64) -> Result<Self> {
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(RbxError::InvalidInput(
                "beta must be finite and non-negative".into(),
            ));
        }
        Ok(Self { ratio, beta })
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.ratio.ratio(x) >= self.beta
    }
}

const TRUST_HEADER: &str = "rbx-trust 1";

impl TrustRegion<PolynomialLogisticRatio> {
    pub fn to_text(&self) -> String {
        format!(
            "{TRUST_HEADER}\nbeta {}\n{}",
            self.beta,
            self.ratio.to_text()
        )
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        if lines.next() != Some(TRUST_HEADER) {
            return Err(RbxError::Parse(format!(
                "trust file must start with `{TRUST_HEADER}`"
            )));
        }
        let fields: Vec<(&str, Vec<&str>)> = lines
            .map(|l| {
                let mut t = l.split_whitespace();
                (t.next().unwrap_or(""), t.collect())
            })
            .collect();
        let beta = fields
            .iter()
            .find(|(k, _)| *k == "beta")
            .and_then(|(_, v)| v.first())
            .and_then(|t| t.parse::<f64>().ok())
            .ok_or_else(|| RbxError::Parse("trust file: bad beta".into()))?;
        Self::new(PolynomialLogisticRatio::from_fields(&fields)?, beta)
    }
}

/// Veto escapes whose path leaves `T` strictly before the reported exit.
///
/// `x0` is in original units; the report's standardized distances are
/// converted with its scales. Each ray is searched only up to its own
/// escape distance.
pub fn apply_trust<R: DensityRatio>(
    report: &EscapeReport,
    region: &TrustRegion<R>,
    x0: &[f64],
) -> Result<EscapeReport> {
    let d = report.dimension();
    if x0.len() != d || region.ratio.dimension() != d {
        return Err(RbxError::InvalidInput(
            "trust region dimension mismatch".into(),
        ));
    }
    let r0 = region.ratio.ratio(x0);
    if r0.is_nan() || r0 < region.beta {
        return Err(RbxError::UntrustedTarget {
            ratio: r0,
            beta: region.beta,
        });
    }
    // (feature, sign) pairs with finite escape; ray parameter 1 is the exit
    let mut slots = Vec::new();
    let mut rays = Vec::new();
    for j in 0..d {
        let f = report.standardized(j);
        for (plus, e) in [(true, f.plus), (false, f.minus)] {
            if let Escape::Finite(dist) = e {
                let mut dir = vec![0.0; d];
                dir[j] = if plus { 1.0 } else { -1.0 } * dist * report.scales()[j];
                slots.push((j, plus));
                rays.push((x0.to_vec(), dir));
            }
        }
    }
    let brackets = first_exits(&rays, &ExitSearch::new(1.0), |pts| {
        Ok(pts.iter().map(|p| region.contains(p)).collect())
    })?;
    let mut features: Vec<FeatureEscape> = report.features().to_vec();
    for (&(j, plus), b) in slots.iter().zip(brackets) {
        // the bracket's upper end is a verified untrusted point
        if matches!(b, Some((_, hi)) if hi < 1.0) {
            let veto = Escape::Infinite(InfiniteReason::TrustOverride);
            if plus {
                features[j].plus = veto;
            } else {
                features[j].minus = veto;
            }
        }
    }
    Ok(report.with_features(features))
}
