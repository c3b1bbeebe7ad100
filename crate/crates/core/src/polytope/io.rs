//! Plain-text polytope files.
//!
//! ```text
//! rbx-polytope 1
//! dimension 2
//! center 0 0
//! scales 1 1
//! halfspaces 2
//! 0.5 0.5 1
//! -1 0 3
//! ```
//!
//! Each halfspace row lists the normal's `d` components followed by the
//! intercept. Coordinates are on the standardized scale; multiply by
//! `scales` to recover original feature units.

use std::fmt::Write as _;

use super::{Halfspace, Polytope};
use crate::error::{RbxError, Result};

const HEADER: &str = "rbx-polytope 1";

fn join(xs: &[f64]) -> String {
    xs.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn polytope_to_text(p: &Polytope, scales: &[f64]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{HEADER}");
    let _ = writeln!(s, "dimension {}", p.dimension());
    let _ = writeln!(s, "center {}", join(&p.center));
    let _ = writeln!(s, "scales {}", join(scales));
    let _ = writeln!(s, "halfspaces {}", p.len());
    for h in &p.halfspaces {
        let _ = writeln!(s, "{} {}", join(&h.normal), h.intercept);
    }
    s
}

fn perr(line: usize, msg: impl std::fmt::Display) -> RbxError {
    RbxError::Parse(format!("polytope line {line}: {msg}"))
}

fn floats(line: usize, tokens: &[&str]) -> Result<Vec<f64>> {
    tokens
        .iter()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| perr(line, format!("bad number `{t}`")))
        })
        .collect()
}

/// Parse a polytope file, returning the polytope and the feature scales.
pub fn parse_polytope(text: &str) -> Result<(Polytope, Vec<f64>)> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let mut next = |what: &str| {
        lines
            .next()
            .ok_or_else(|| RbxError::Parse(format!("polytope file ends before {what}")))
    };

    let (n, l) = next("header")?;
    if l != HEADER {
        return Err(perr(n, format!("expected `{HEADER}`")));
    }
    let mut field = |name: &str| -> Result<(usize, Vec<&str>)> {
        let (n, l) = next(name)?;
        let mut toks = l.split_whitespace();
        if toks.next() != Some(name) {
            return Err(perr(n, format!("expected `{name}`")));
        }
        Ok((n, toks.collect()))
    };
    let (n, d) = field("dimension")?;
    let d: usize = d
        .first()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| perr(n, "bad dimension"))?;
    let (n, c) = field("center")?;
    let center = floats(n, &c)?;
    let (n2, s) = field("scales")?;
    let scales = floats(n2, &s)?;
    if center.len() != d || scales.len() != d {
        return Err(perr(n, "center and scales must have `dimension` entries"));
    }
    let (n, k) = field("halfspaces")?;
    let k: usize = k
        .first()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| perr(n, "bad halfspace count"))?;
    let mut p = Polytope::new(center);
    for _ in 0..k {
        let (n, l) = next("halfspace row")?;
        let toks: Vec<&str> = l.split_whitespace().collect();
        let row = floats(n, &toks)?;
        if row.len() != d + 1 {
            return Err(perr(
                n,
                format!("expected {} numbers, got {}", d + 1, row.len()),
            ));
        }
        p.push(Halfspace {
            normal: row[..d].to_vec(),
            intercept: row[d],
        });
    }
    if let Some((n, _)) = lines.next() {
        return Err(perr(n, "trailing content"));
    }
    Ok((p, scales))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn documented_example_parses() {
        let text = "rbx-polytope 1\ndimension 2\ncenter 0 0\nscales 1 1\nhalfspaces 2\n0.5 0.5 1\n-1 0 3\n";
        let (p, s) = parse_polytope(text).unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(p.halfspaces[1].intercept, 3.0);
        assert_eq!(s, vec![1.0, 1.0]);
    }

    #[test]
    fn rejects_short_rows() {
        let text = "rbx-polytope 1\ndimension 2\ncenter 0 0\nscales 1 1\nhalfspaces 1\n0.5 1\n";
        assert!(parse_polytope(text).is_err());
    }

    proptest! {
        #[test]
        fn text_round_trip(
            rows in prop::collection::vec(prop::collection::vec(-1e6f64..1e6, 4), 0..6),
            scales in prop::collection::vec(1e-3f64..1e3, 3),
        ) {
            let mut p = Polytope::new(vec![0.25, -1.0 / 3.0, 7.0]);
            for r in &rows {
                p.push(Halfspace { normal: r[..3].to_vec(), intercept: r[3] });
            }
            let (back, s) = parse_polytope(&polytope_to_text(&p, &scales)).unwrap();
            prop_assert_eq!(back, p);
            prop_assert_eq!(s, scales);
        }
    }
}
