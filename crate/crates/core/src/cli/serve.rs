use std::path::PathBuf;
use std::time::Duration;

use clap::Args;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::explain::open_model;
use super::{CliResult, Failure, ModelSource};
use crate::predictor::{model_file, protocol, Predictor, RemoteConfig};

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Builtin model file to serve.
    #[arg(long, value_name = "FILE")]
    model: PathBuf,
    /// Listen for HTTP POSTs on this address instead of serving stdin/stdout.
    #[arg(long, value_name = "ADDR")]
    http: Option<String>,
}

pub fn run(a: ServeArgs) -> CliResult {
    let model = model_file::load(&a.model)
        .map_err(|e| Failure::input(format!("{}: {e}", a.model.display())))?;
    match a.http {
        None => {
            let stdin = std::io::stdin();
            protocol::serve_lines(&model, stdin.lock(), std::io::stdout().lock())?;
        }
        Some(addr) => {
            protocol::serve_http(&model, &addr, |bound| {
                eprintln!("listening on http://{bound}")
            })?;
        }
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct ServeCheckArgs {
    /// Shell command speaking the protocol on stdin/stdout.
    #[arg(
        long,
        value_name = "CMD",
        conflicts_with = "model_url",
        required_unless_present = "model_url"
    )]
    model_cmd: Option<String>,
    /// HTTP endpoint speaking the protocol.
    #[arg(long, value_name = "URL")]
    model_url: Option<String>,
    /// Compare answers against this builtin model file.
    #[arg(long, value_name = "FILE")]
    reference: Option<PathBuf>,
    /// Random standard-normal points to send.
    #[arg(long, default_value_t = 100)]
    points: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 60)]
    timeout: u64,
}

pub fn check(a: ServeCheckArgs) -> CliResult {
    let cfg = match (&a.model_cmd, &a.model_url) {
        (Some(cmd), _) => RemoteConfig::shell(cmd),
        (_, Some(url)) => RemoteConfig::http(url.clone()),
        _ => return Err(Failure::input("give --model-cmd or --model-url")),
    };
    let remote = Predictor::connect(&cfg.with_timeout(Duration::from_secs(a.timeout)))
        .map_err(|e| Failure::new(3, format!("cannot reach model: {e}")))?;
    let d = remote.dimension();
    println!(
        "remote model: dimension {d}, protocol version {}",
        protocol::PROTOCOL_VERSION
    );

    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let points: Vec<Vec<f64>> = (0..a.points)
        .map(|_| (0..d).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();
    let got = remote
        .predict_batch(&points)
        .map_err(|e| Failure::new(3, format!("remote prediction failed: {e}")))?;
    let again = remote
        .predict_batch(&points)
        .map_err(|e| Failure::new(3, format!("remote prediction failed: {e}")))?;
    if got
        .iter()
        .zip(&again)
        .any(|(x, y)| x.to_bits() != y.to_bits())
    {
        return Err(Failure::new(1, "remote model is not deterministic"));
    }
    if let Some(path) = &a.reference {
        let local = open_model(
            &ModelSource {
                model: Some(path.clone()),
                model_cmd: None,
                model_url: None,
            },
            Duration::from_secs(a.timeout),
        )?;
        if local.dimension() != d {
            return Err(Failure::new(
                1,
                format!("reference has dimension {}", local.dimension()),
            ));
        }
        let want = local
            .predict_batch(&points)
            .map_err(|e| Failure::new(1, e.to_string()))?;
        if let Some(i) = (0..want.len()).find(|&i| want[i].to_bits() != got[i].to_bits()) {
            return Err(Failure::new(
                1,
                format!(
                    "point {i}: remote {} differs from reference {}",
                    got[i], want[i]
                ),
            ));
        }
        println!(
            "{} predictions match the reference bit for bit",
            points.len()
        );
    } else {
        println!("{} predictions answered deterministically", points.len());
    }
    Ok(())
}
