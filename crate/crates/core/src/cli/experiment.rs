use std::path::PathBuf;

use clap::Args;

use super::{CliResult, Failure};
use crate::baselines::Method;
use crate::experiments::{
    run_recovery, summary_json, write_csv, ModelKind, RecoveryConfig, Scenario, ScenarioKind,
    SwitchRelevance, XorForm, DEFAULT_TARGETS, FULL_SCALE_TARGETS,
};

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// xor, orange-skin, nonlinear-additive, switch, or all.
    #[arg(long, default_value = "all")]
    scenario: String,
    /// bayes, knn, or all.
    #[arg(long, default_value = "all")]
    model: String,
    /// rbx, simple-escape, gradient, or all.
    #[arg(long, default_value = "all")]
    method: String,
    #[arg(long)]
    n_targets: Option<usize>,
    /// Use 1000 targets unless --n-targets is given.
    #[arg(long)]
    full_scale: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Evaluate XOR as (1 + x1·x2)^-1.
    #[arg(long)]
    xor_literal: bool,
    /// Score the switch scenario against the verbatim {x5..x9} / {x1..x4, x9} sets.
    #[arg(long)]
    switch_literal: bool,
    /// Output directory for recovery.csv and summary.json.
    #[arg(long, default_value = "rbx-experiment")]
    out: PathBuf,
}

fn pick<T: Copy>(
    flag: &str,
    what: &str,
    all: &[T],
    parse: impl Fn(&str) -> Option<T>,
) -> CliResult<Vec<T>> {
    if flag == "all" {
        return Ok(all.to_vec());
    }
    flag.split(',')
        .map(|s| parse(s.trim()).ok_or_else(|| Failure::input(format!("unknown {what} `{s}`"))))
        .collect()
}

pub fn run(a: ExperimentArgs) -> CliResult {
    let kinds = pick(
        &a.scenario,
        "scenario",
        &ScenarioKind::ALL,
        ScenarioKind::parse,
    )?;
    let models = pick(
        &a.model,
        "model",
        &[ModelKind::Bayes, ModelKind::Knn],
        ModelKind::parse,
    )?;
    let methods = pick(&a.method, "method", &Method::ALL, |s| {
        Method::ALL.into_iter().find(|m| m.name() == s)
    })?;
    let n_targets = a.n_targets.unwrap_or(if a.full_scale {
        FULL_SCALE_TARGETS
    } else {
        DEFAULT_TARGETS
    });
    if n_targets == 0 {
        return Err(Failure::input("--n-targets must be at least 1"));
    }

    let mut results = Vec::new();
    for &model in &models {
        for &kind in &kinds {
            let scenario = Scenario::new(kind)
                .with_xor_form(if a.xor_literal {
                    XorForm::Literal
                } else {
                    XorForm::Logistic
                })
                .with_switch_relevance(if a.switch_literal {
                    SwitchRelevance::Literal
                } else {
                    SwitchRelevance::Formula
                });
            let mut cfg = RecoveryConfig::new(scenario, model, a.seed);
            cfg.methods = methods.clone();
            cfg.n_targets = n_targets;
            let res = run_recovery(&cfg)?;
            for c in res.summary() {
                println!(
                    "{:<19} {:<6} {:<14} mean recall {:.4}",
                    c.scenario,
                    c.model.name(),
                    c.method.name(),
                    c.mean_recall
                );
            }
            results.push(res);
        }
    }

    std::fs::create_dir_all(&a.out)?;
    let file = std::fs::File::create(a.out.join("recovery.csv"))?;
    write_csv(&results, std::io::BufWriter::new(file))?;
    std::fs::write(a.out.join("summary.json"), summary_json(&results, a.seed))?;
    Ok(())
}
