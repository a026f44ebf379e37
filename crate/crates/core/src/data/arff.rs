//! MEKA-convention ARFF.
//!
//! Supported: `numeric`/`real`/`integer` and nominal attributes, dense rows and
//! sparse `{index value, ...}` rows. The relation name carries the label count
//! as a `-C L` token (`-C -L` puts the labels last).

use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;

use super::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum AttrType {
    Numeric,
    Nominal(Vec<String>),
}

impl AttrType {
    fn is_binary_nominal(&self) -> bool {
        match self {
            AttrType::Nominal(values) => {
                let mut v: Vec<&str> = values.iter().map(String::as_str).collect();
                v.sort_unstable();
                v == ["0", "1"]
            }
            AttrType::Numeric => false,
        }
    }
}

#[derive(Debug)]
struct Attribute {
    name: String,
    kind: AttrType,
}

pub fn load_arff(path: impl AsRef<Path>, label_count: Option<i64>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_arff(&text, label_count)
}

/// Parse ARFF text. `label_count` overrides the `-C` token of the relation.
pub fn parse_arff(text: &str, label_count: Option<i64>) -> Result<Dataset> {
    let mut relation: Option<String> = None;
    let mut attrs: Vec<Attribute> = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut in_data = false;

    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        if in_data {
            let row = if line.starts_with('{') {
                parse_sparse_row(line, attrs.len(), lineno)?
            } else {
                parse_dense_row(line, attrs.len(), lineno)?
            };
            rows.push(row);
            continue;
        }
        let lower = line.to_ascii_lowercase();
        if lower.starts_with("@relation") {
            let rest = line["@relation".len()..].trim();
            relation = Some(unquote(rest).to_string());
        } else if lower.starts_with("@attribute") {
            attrs.push(parse_attribute(line["@attribute".len()..].trim(), lineno)?);
        } else if lower.starts_with("@data") {
            if relation.is_none() {
                return Err(Error::Parse {
                    line: lineno,
                    msg: "@data before @relation".into(),
                });
            }
            if attrs.is_empty() {
                return Err(Error::Parse {
                    line: lineno,
                    msg: "@data before any @attribute".into(),
                });
            }
            in_data = true;
        } else {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("unexpected header line `{line}`"),
            });
        }
    }

    let relation = relation.ok_or(Error::Parse {
        line: 0,
        msg: "missing @relation".into(),
    })?;
    if !in_data {
        return Err(Error::Parse {
            line: 0,
            msg: "missing @data section".into(),
        });
    }
    let c = match label_count {
        Some(c) => c,
        None => relation_label_count(&relation).ok_or_else(|| {
            Error::Validation(format!(
                "relation `{relation}` has no `-C <L>` token and no label count was given"
            ))
        })?,
    };
    let n_attr = attrs.len();
    let l = c.unsigned_abs() as usize;
    if c == 0 || l >= n_attr {
        return Err(Error::Argument(format!(
            "label count {c} impossible with {n_attr} attributes"
        )));
    }
    let label_cols: Vec<usize> = if c > 0 {
        (0..l).collect()
    } else {
        (n_attr - l..n_attr).collect()
    };
    let feature_cols: Vec<usize> = (0..n_attr).filter(|j| !label_cols.contains(j)).collect();

    for &j in &label_cols {
        if let AttrType::Nominal(_) = attrs[j].kind {
            if !attrs[j].kind.is_binary_nominal() {
                return Err(Error::Validation(format!(
                    "label column `{}` is nominal but not {{0,1}}",
                    attrs[j].name
                )));
            }
        }
    }
    for &j in &feature_cols {
        if let AttrType::Nominal(values) = &attrs[j].kind {
            if !attrs[j].kind.is_binary_nominal() {
                return Err(Error::UnsupportedType {
                    attribute: attrs[j].name.clone(),
                    kind: format!("{{{}}}", values.join(",")),
                });
            }
        }
    }

    let n = rows.len();
    if n == 0 {
        return Err(Error::Validation("ARFF file has no data rows".into()));
    }
    let mut labels = Array2::<u8>::zeros((n, l));
    let mut features = Array2::<f64>::zeros((n, feature_cols.len()));
    for (r, row) in rows.iter().enumerate() {
        for (k, &j) in label_cols.iter().enumerate() {
            let v = row[j];
            if v == 0.0 {
                labels[[r, k]] = 0;
            } else if v == 1.0 {
                labels[[r, k]] = 1;
            } else {
                return Err(Error::Validation(format!(
                    "label column `{}` has non-binary value {v} in data row {}",
                    attrs[j].name,
                    r + 1
                )));
            }
        }
        for (k, &j) in feature_cols.iter().enumerate() {
            features[[r, k]] = row[j];
        }
    }

    let name = relation
        .split(':')
        .next()
        .unwrap_or(&relation)
        .trim()
        .to_string();
    Dataset::new(
        name,
        features,
        labels,
        feature_cols
            .iter()
            .map(|&j| attrs[j].name.clone())
            .collect(),
        label_cols.iter().map(|&j| attrs[j].name.clone()).collect(),
    )
}

/// The integer after a `-C` token, e.g. `Music: -C 6` -> 6.
fn relation_label_count(relation: &str) -> Option<i64> {
    let mut tokens = relation
        .split(|c: char| c.is_whitespace() || c == ':')
        .filter(|t| !t.is_empty());
    while let Some(t) = tokens.next() {
        if t == "-C" {
            return tokens.next()?.parse().ok();
        }
        if let Some(rest) = t.strip_prefix("-C") {
            if let Ok(v) = rest.parse() {
                return Some(v);
            }
        }
    }
    None
}

fn unquote(s: &str) -> &str {
    let s = s.trim();
    if s.len() >= 2
        && ((s.starts_with('\'') && s.ends_with('\'')) || (s.starts_with('"') && s.ends_with('"')))
    {
        &s[1..s.len() - 1]
    } else {
        s
    }
}

fn parse_attribute(rest: &str, lineno: usize) -> Result<Attribute> {
    let (name, tail) = match rest.chars().next() {
        Some(q @ ('\'' | '"')) => {
            let end = rest[1..].find(q).ok_or(Error::Parse {
                line: lineno,
                msg: "unterminated quoted attribute name".into(),
            })?;
            (rest[1..=end].to_string(), rest[end + 2..].trim())
        }
        Some(_) => {
            let end = rest.find(char::is_whitespace).ok_or(Error::Parse {
                line: lineno,
                msg: "attribute without a type".into(),
            })?;
            (rest[..end].to_string(), rest[end..].trim())
        }
        None => {
            return Err(Error::Parse {
                line: lineno,
                msg: "empty @attribute".into(),
            })
        }
    };
    if tail.is_empty() {
        return Err(Error::Parse {
            line: lineno,
            msg: format!("attribute `{name}` has no type"),
        });
    }
    if tail.starts_with('{') {
        let inner = tail
            .strip_prefix('{')
            .and_then(|t| t.strip_suffix('}'))
            .ok_or(Error::Parse {
                line: lineno,
                msg: format!("malformed nominal specification for `{name}`"),
            })?;
        let values = inner.split(',').map(|v| unquote(v).to_string()).collect();
        return Ok(Attribute {
            name,
            kind: AttrType::Nominal(values),
        });
    }
    let kind = tail
        .split_whitespace()
        .next()
        .unwrap_or("")
        .to_ascii_lowercase();
    match kind.as_str() {
        "numeric" | "real" | "integer" => Ok(Attribute {
            name,
            kind: AttrType::Numeric,
        }),
        "string" | "date" | "relational" => Err(Error::UnsupportedType {
            attribute: name,
            kind,
        }),
        _ => Err(Error::Parse {
            line: lineno,
            msg: format!("unknown attribute type `{tail}` for `{name}`"),
        }),
    }
}

fn parse_value(tok: &str, lineno: usize) -> Result<f64> {
    let tok = unquote(tok);
    if tok == "?" {
        return Err(Error::Validation(format!(
            "missing value `?` at line {lineno}"
        )));
    }
    tok.parse::<f64>().map_err(|_| Error::Parse {
        line: lineno,
        msg: format!("cannot parse `{tok}` as a number"),
    })
}

fn parse_dense_row(line: &str, n_attr: usize, lineno: usize) -> Result<Vec<f64>> {
    let cells: Vec<&str> = line.split(',').map(str::trim).collect();
    if cells.len() != n_attr {
        return Err(Error::Parse {
            line: lineno,
            msg: format!("expected {n_attr} values, found {}", cells.len()),
        });
    }
    cells.iter().map(|c| parse_value(c, lineno)).collect()
}

fn parse_sparse_row(line: &str, n_attr: usize, lineno: usize) -> Result<Vec<f64>> {
    let inner = line
        .strip_prefix('{')
        .and_then(|t| t.strip_suffix('}'))
        .ok_or(Error::Parse {
            line: lineno,
            msg: "unterminated sparse row".into(),
        })?
        .trim();
    let mut row = vec![0.0; n_attr];
    if inner.is_empty() {
        return Ok(row);
    }
    for entry in inner.split(',') {
        let mut parts = entry.split_whitespace();
        let (Some(idx), Some(val), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("malformed sparse entry `{}`", entry.trim()),
            });
        };
        let idx: usize = idx.parse().map_err(|_| Error::Parse {
            line: lineno,
            msg: format!("bad sparse index `{idx}`"),
        })?;
        if idx >= n_attr {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("sparse index {idx} out of range ({n_attr} attributes)"),
            });
        }
        row[idx] = parse_value(val, lineno)?;
    }
    Ok(row)
}

/// Write a dense MEKA ARFF file with the labels first.
pub fn write_arff(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    let _ = writeln!(out, "@relation '{}: -C {}'", ds.name(), ds.n_labels());
    out.push('\n');
    for name in ds.label_names() {
        let _ = writeln!(out, "@attribute {} {{0,1}}", quote_name(name));
    }
    for name in ds.feature_names() {
        let _ = writeln!(out, "@attribute {} numeric", quote_name(name));
    }
    out.push_str("\n@data\n");
    let labels = ds.labels();
    let features = ds.features();
    for r in 0..ds.n_instances() {
        let mut first = true;
        for &v in labels.row(r) {
            if !first {
                out.push(',');
            }
            first = false;
            let _ = write!(out, "{v}");
        }
        for &v in features.row(r) {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn quote_name(name: &str) -> String {
    if name
        .chars()
        .any(|c| c.is_whitespace() || c == ',' || c == '{' || c == '}' || c == '%')
    {
        format!("'{name}'")
    } else {
        name.to_string()
    }
}
