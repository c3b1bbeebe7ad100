//! First-exit search along rays for a black-box membership predicate.
//!
//! A coarse scan (doubling steps from `start`, merged with a uniform grid up
//! to the horizon) finds the first sampled point outside the region; the
//! bracket is then refined by bisection. When the region is not star-shaped
//! along a ray, the result is the first *detected* exit, which can lie past
//! the true infimum if the region is left and re-entered between two scan
//! points.

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExitSearch {
    pub horizon: f64,
    pub start: f64,
    pub grid: usize,
    pub iters: usize,
}

impl ExitSearch {
    pub fn new(horizon: f64) -> Self {
        Self {
            horizon,
            start: 1e-3,
            grid: 64,
            iters: 50,
        }
    }

    pub fn scan_steps(&self) -> Vec<f64> {
        let mut steps = Vec::new();
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return steps;
        }
        let mut a = self.start.min(self.horizon);
        while a < self.horizon {
            steps.push(a);
            a *= 2.0;
        }
        for i in 1..=self.grid.max(1) {
            steps.push(self.horizon * i as f64 / self.grid.max(1) as f64);
        }
        steps.push(self.horizon);
        steps.sort_by(f64::total_cmp);
        steps.dedup();
        steps
    }
}

/// Bracket `(lo, hi)` around the first exit: `origin + lo·dir` was seen
/// inside (or is the origin), `origin + hi·dir` is outside.
pub type Bracket = (f64, f64);

/// Search every ray; `inside` answers membership for a batch of points.
/// Returns `None` for rays with no detected exit up to the horizon.
pub fn first_exits<F>(
    rays: &[(Vec<f64>, Vec<f64>)],
    search: &ExitSearch,
    mut inside: F,
) -> Result<Vec<Option<Bracket>>>
where
    F: FnMut(&[Vec<f64>]) -> Result<Vec<bool>>,
{
    let steps = search.scan_steps();
    if rays.is_empty() || steps.is_empty() {
        return Ok(vec![None; rays.len()]);
    }
    let along = |r: &(Vec<f64>, Vec<f64>), a: f64| -> Vec<f64> {
        r.0.iter().zip(&r.1).map(|(o, v)| o + a * v).collect()
    };
    let scan: Vec<Vec<f64>> = rays
        .iter()
        .flat_map(|r| steps.iter().map(move |&a| along(r, a)))
        .collect();
    let member = inside(&scan)?;
    let mut brackets: Vec<Option<Bracket>> = member
        .chunks_exact(steps.len())
        .map(|row| {
            row.iter().position(|m| !m).map(|k| {
                let lo = if k == 0 { 0.0 } else { steps[k - 1] };
                (lo, steps[k])
            })
        })
        .collect();

    let open: Vec<usize> = (0..rays.len()).filter(|&i| brackets[i].is_some()).collect();
    for _ in 0..search.iters {
        if open.is_empty() {
            break;
        }
        let probes: Vec<Vec<f64>> = open
            .iter()
            .map(|&i| {
                let (lo, hi) = brackets[i].unwrap();
                along(&rays[i], 0.5 * (lo + hi))
            })
            .collect();
        let member = inside(&probes)?;
        for (&i, m) in open.iter().zip(member) {
            let (lo, hi) = brackets[i].unwrap();
            let mid = 0.5 * (lo + hi);
            brackets[i] = Some(if m { (mid, hi) } else { (lo, mid) });
        }
    }
    Ok(brackets)
}
