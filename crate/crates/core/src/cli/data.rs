//! Context CSV files.

use std::path::{Path, PathBuf};

use clap::Args;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{CliResult, Failure};

/// A numeric table with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub fn read_csv(path: &Path) -> CliResult<Table> {
    let fail = |m: String| Failure::input(format!("{}: {m}", path.display()));
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| fail(e.to_string()))?;
    let names: Vec<String> = reader
        .headers()
        .map_err(|e| fail(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if names.is_empty() || names.iter().all(String::is_empty) {
        return Err(fail("missing header row".into()));
    }
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| fail(e.to_string()))?;
        let row = rec
            .iter()
            .enumerate()
            .map(|(j, v)| {
                let x: f64 = v.parse().map_err(|_| {
                    fail(format!(
                        "row {}, column `{}`: `{v}` is not a number",
                        i + 1,
                        names[j]
                    ))
                })?;
                if x.is_finite() {
                    Ok(x)
                } else {
                    Err(fail(format!(
                        "row {}, column `{}`: value must be finite",
                        i + 1,
                        names[j]
                    )))
                }
            })
            .collect::<CliResult<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(fail("no data rows".into()));
    }
    Ok(Table { names, rows })
}

pub fn write_csv(path: &Path, names: &[String], rows: &[Vec<f64>]) -> CliResult {
    let fail = |e: csv::Error| Failure::new(1, format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(fail)?;
    w.write_record(names).map_err(fail)?;
    for r in rows {
        w.write_record(r.iter().map(|v| v.to_string()))
            .map_err(fail)?;
    }
    w.flush()?;
    Ok(())
}

pub fn parse_vector(text: &str) -> CliResult<Vec<f64>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Failure::input(format!("bad target component `{}`", t.trim())))
        })
        .collect()
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, default_value_t = 500)]
    rows: usize,
    #[arg(long, default_value_t = 2)]
    dimension: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

pub fn generate(a: GenerateArgs) -> CliResult {
    if a.rows == 0 || a.dimension == 0 {
        return Err(Failure::input("rows and dimension must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let rows: Vec<Vec<f64>> = (0..a.rows)
        .map(|_| {
            (0..a.dimension)
                .map(|_| StandardNormal.sample(&mut rng))
                .collect()
        })
        .collect();
    let names = crate::report::default_feature_names(a.dimension);
    write_csv(&a.out, &names, &rows)
}
