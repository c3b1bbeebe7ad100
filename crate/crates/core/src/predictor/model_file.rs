//! Text description format for built-in models.
//!
//! One directive per line, `#` starts a comment. Scalar settings are
//! `key = value`; list values are whitespace separated. Models with
//! structured content use record lines that begin with a keyword:
//!
//! ```text
//! rbx-model 1
//! kind = tree
//! dimension = 3
//! node 0 split feature=0 threshold=3 left=1 right=2
//! node 1 leaf value=0
//! node 2 leaf value=1
//! ```
//!
//! | kind                 | keys                                   | records |
//! |----------------------|----------------------------------------|---------|
//! | `linear`             | `coefficients`, `intercept`            |         |
//! | `bilinear`           | `dimension`, `features` (two indices)  |         |
//! | `tree`               | `dimension`                            | `node <id> split feature=<j> threshold=<t> left=<id> right=<id>`, `node <id> leaf value=<v>` |
//! | `knn`                | `dimension`, `k`, `active`             | `sample response=<y> x=<v1>,<v2>,...` |
//! | `bayes`              | `scenario`, optional `xor-form`        |         |
//! | `quadratic-logistic` | `dimension`, `intercept`, `linear`     | `term i=<i> j=<j> weight=<w>` |
//!
//! Feature indices are zero-based. Numbers are written with the shortest
//! decimal representation that parses back to the same `f64`.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use super::builtin::{BuiltinModel, QuadTerm, TreeNode};
use crate::error::ModelFileError;
use crate::experiments::{Scenario, ScenarioKind, XorForm};

const HEADER: &str = "rbx-model 1";

pub fn load(path: impl AsRef<Path>) -> Result<BuiltinModel, ModelFileError> {
    parse(&std::fs::read_to_string(path)?)
}

pub fn save(model: &BuiltinModel, path: impl AsRef<Path>) -> Result<(), ModelFileError> {
    std::fs::write(path, to_text(model))?;
    Ok(())
}

struct Record {
    line: usize,
    keyword: String,
    positional: Vec<String>,
    named: HashMap<String, String>,
}

struct Parsed {
    keys: HashMap<String, (usize, String)>,
    records: Vec<Record>,
}

fn syntax(line: usize, message: impl Into<String>) -> ModelFileError {
    ModelFileError::Syntax {
        line,
        message: message.into(),
    }
}

fn tokenize(text: &str) -> Result<Parsed, ModelFileError> {
    let mut keys = HashMap::new();
    let mut records = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() || line == HEADER {
            continue;
        }
        if let Some(rest) = line.strip_prefix("rbx-model") {
            return Err(syntax(
                line_no,
                format!("unsupported format version `{}`", rest.trim()),
            ));
        }
        let first = line.split_whitespace().next().unwrap_or("");
        if matches!(first, "node" | "sample" | "term") {
            let mut positional = Vec::new();
            let mut named = HashMap::new();
            for tok in line.split_whitespace().skip(1) {
                match tok.split_once('=') {
                    Some((k, v)) => {
                        named.insert(k.to_string(), v.to_string());
                    }
                    None => positional.push(tok.to_string()),
                }
            }
            records.push(Record {
                line: line_no,
                keyword: first.to_string(),
                positional,
                named,
            });
        } else {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| syntax(line_no, format!("expected `key = value`, got `{line}`")))?;
            let k = k.trim().to_string();
            if keys
                .insert(k.clone(), (line_no, v.trim().to_string()))
                .is_some()
            {
                return Err(syntax(line_no, format!("duplicate key `{k}`")));
            }
        }
    }
    Ok(Parsed { keys, records })
}

fn num<T: std::str::FromStr>(line: usize, what: &str, s: &str) -> Result<T, ModelFileError> {
    s.parse()
        .map_err(|_| syntax(line, format!("cannot parse {what} from `{s}`")))
}

impl Parsed {
    fn get(&self, key: &str) -> Result<(usize, &str), ModelFileError> {
        self.keys
            .get(key)
            .map(|(l, v)| (*l, v.as_str()))
            .ok_or_else(|| ModelFileError::Invalid(format!("missing key `{key}`")))
    }

    fn scalar<T: std::str::FromStr>(&self, key: &str) -> Result<T, ModelFileError> {
        let (line, v) = self.get(key)?;
        num(line, key, v)
    }

    fn list<T: std::str::FromStr>(&self, key: &str) -> Result<Vec<T>, ModelFileError> {
        let (line, v) = self.get(key)?;
        v.split_whitespace().map(|t| num(line, key, t)).collect()
    }

    fn records<'a>(&'a self, keyword: &'a str) -> impl Iterator<Item = &'a Record> + 'a {
        self.records.iter().filter(move |r| r.keyword == keyword)
    }
}

impl Record {
    fn field<T: std::str::FromStr>(&self, key: &str) -> Result<T, ModelFileError> {
        let v = self.named.get(key).ok_or_else(|| {
            syntax(
                self.line,
                format!("{} record missing `{key}=`", self.keyword),
            )
        })?;
        num(self.line, key, v)
    }
}

pub fn parse(text: &str) -> Result<BuiltinModel, ModelFileError> {
    let p = tokenize(text)?;
    let (_, kind) = p.get("kind")?;
    match kind {
        "linear" => {
            let coefficients: Vec<f64> = p.list("coefficients")?;
            let intercept = if p.keys.contains_key("intercept") {
                p.scalar("intercept")?
            } else {
                0.0
            };
            if coefficients.is_empty() {
                return Err(ModelFileError::Invalid(
                    "linear model needs coefficients".into(),
                ));
            }
            if let Ok(d) = p.scalar::<usize>("dimension") {
                if d != coefficients.len() {
                    return Err(ModelFileError::Invalid(format!(
                        "dimension {d} does not match {} coefficients",
                        coefficients.len()
                    )));
                }
            }
            Ok(BuiltinModel::linear(coefficients, intercept))
        }
        "bilinear" => {
            let dimension: usize = p.scalar("dimension")?;
            let f: Vec<usize> = p.list("features")?;
            if f.len() != 2 || f.iter().any(|&j| j >= dimension) {
                return Err(ModelFileError::Invalid(
                    "bilinear needs two in-range feature indices".into(),
                ));
            }
            Ok(BuiltinModel::bilinear(dimension, f[0], f[1]))
        }
        "tree" => {
            let dimension: usize = p.scalar("dimension")?;
            let mut slots: Vec<Option<TreeNode>> = Vec::new();
            for r in p.records("node") {
                let id: usize = match r.positional.first() {
                    Some(s) => num(r.line, "node id", s)?,
                    None => return Err(syntax(r.line, "node record missing id")),
                };
                let node = match r.positional.get(1).map(String::as_str) {
                    Some("split") => TreeNode::Split {
                        feature: r.field("feature")?,
                        threshold: r.field("threshold")?,
                        left: r.field("left")?,
                        right: r.field("right")?,
                    },
                    Some("leaf") => TreeNode::Leaf {
                        value: r.field("value")?,
                    },
                    _ => return Err(syntax(r.line, "node must be `split` or `leaf`")),
                };
                if slots.len() <= id {
                    slots.resize(id + 1, None);
                }
                if slots[id].replace(node).is_some() {
                    return Err(syntax(r.line, format!("node {id} defined twice")));
                }
            }
            let nodes = slots
                .into_iter()
                .enumerate()
                .map(|(i, n)| n.ok_or_else(|| ModelFileError::Invalid(format!("node {i} missing"))))
                .collect::<Result<Vec<_>, _>>()?;
            BuiltinModel::tree(dimension, nodes)
        }
        "knn" => {
            let dimension: usize = p.scalar("dimension")?;
            let k: usize = p.scalar("k")?;
            let active: Vec<usize> = p.list("active")?;
            let mut points = Vec::new();
            let mut responses = Vec::new();
            for r in p.records("sample") {
                responses.push(r.field::<f64>("response")?);
                let xs = r
                    .named
                    .get("x")
                    .ok_or_else(|| syntax(r.line, "sample missing `x=`"))?;
                let x: Vec<f64> = xs
                    .split(',')
                    .map(|t| num(r.line, "coordinate", t))
                    .collect::<Result<_, _>>()?;
                if x.len() != dimension {
                    return Err(syntax(
                        r.line,
                        format!(
                            "sample has {} coordinates, dimension is {dimension}",
                            x.len()
                        ),
                    ));
                }
                points.push(x);
            }
            BuiltinModel::knn(points, responses, k, active)
        }
        "bayes" => {
            let (line, name) = p.get("scenario")?;
            let kind = ScenarioKind::parse(name)
                .ok_or_else(|| syntax(line, format!("unknown scenario `{name}`")))?;
            let xor_form = match p.keys.get("xor-form").map(|(l, v)| (*l, v.as_str())) {
                None | Some((_, "logistic")) => XorForm::Logistic,
                Some((_, "literal")) => XorForm::Literal,
                Some((l, other)) => return Err(syntax(l, format!("unknown xor-form `{other}`"))),
            };
            Ok(BuiltinModel::Bayes(
                Scenario::new(kind).with_xor_form(xor_form),
            ))
        }
        "quadratic-logistic" => {
            let dimension: usize = p.scalar("dimension")?;
            let linear: Vec<f64> = p.list("linear")?;
            if linear.len() != dimension {
                return Err(ModelFileError::Invalid(format!(
                    "linear has {} weights, dimension is {dimension}",
                    linear.len()
                )));
            }
            let mut quadratic = Vec::new();
            for r in p.records("term") {
                let t = QuadTerm {
                    i: r.field("i")?,
                    j: r.field("j")?,
                    weight: r.field("weight")?,
                };
                if t.i >= dimension || t.j >= dimension {
                    return Err(syntax(r.line, "term index out of range"));
                }
                quadratic.push(t);
            }
            Ok(BuiltinModel::QuadraticLogistic {
                dimension,
                intercept: p.scalar("intercept")?,
                linear,
                quadratic,
            })
        }
        other => Err(ModelFileError::Invalid(format!(
            "unknown model kind `{other}`"
        ))),
    }
}

fn join<T: std::fmt::Display>(xs: &[T], sep: &str) -> String {
    xs.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(sep)
}

pub fn to_text(model: &BuiltinModel) -> String {
    use super::Model;
    let mut s = format!("{HEADER}\nkind = {}\n", model.kind());
    let _ = writeln!(s, "dimension = {}", model.dimension());
    match model {
        BuiltinModel::Linear {
            coefficients,
            intercept,
        } => {
            let _ = writeln!(s, "coefficients = {}", join(coefficients, " "));
            let _ = writeln!(s, "intercept = {intercept}");
        }
        BuiltinModel::Bilinear { j, k, .. } => {
            let _ = writeln!(s, "features = {j} {k}");
        }
        BuiltinModel::Tree { nodes, .. } => {
            for (i, n) in nodes.iter().enumerate() {
                let _ = match n {
                    TreeNode::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    } => writeln!(
                        s,
                        "node {i} split feature={feature} threshold={threshold} left={left} right={right}"
                    ),
                    TreeNode::Leaf { value } => writeln!(s, "node {i} leaf value={value}"),
                };
            }
        }
        BuiltinModel::Knn(knn) => {
            let _ = writeln!(s, "k = {}", knn.k);
            let _ = writeln!(s, "active = {}", join(&knn.active, " "));
            for (x, y) in knn.points.iter().zip(&knn.responses) {
                let _ = writeln!(s, "sample response={y} x={}", join(x, ","));
            }
        }
        BuiltinModel::Bayes(sc) => {
            let _ = writeln!(s, "scenario = {}", sc.kind.name());
            let form = match sc.xor_form {
                XorForm::Logistic => "logistic",
                XorForm::Literal => "literal",
            };
            let _ = writeln!(s, "xor-form = {form}");
        }
        BuiltinModel::QuadraticLogistic {
            intercept,
            linear,
            quadratic,
            ..
        } => {
            let _ = writeln!(s, "intercept = {intercept}");
            let _ = writeln!(s, "linear = {}", join(linear, " "));
            for t in quadratic {
                let _ = writeln!(s, "term i={} j={} weight={}", t.i, t.j, t.weight);
            }
        }
    }
    s
}
