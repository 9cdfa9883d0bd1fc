//! Model files:
//!
//! ```text
//! s3svm 1
//! meta seed 7
//! clique_type patch 4 const
//! unary_feature data
//! param centroid_scale 0.5 2
//! schema_hash 3f1c...
//! weights clique 0 w0 .. w15
//! weights unary u0
//! ```
//!
//! `meta` lines carry free-form key/value pairs (the value is the rest of
//! the line). The schema hash covers the `clique_type`, `unary_feature` and
//! `param` lines and is checked on load.

use std::fmt::Write as _;

use super::{CliqueType, FeatureSchema};
use crate::energy::text::{content_lines, expect_header, Tokens};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub schema: FeatureSchema,
    pub weights: Vec<f64>,
    pub meta: Vec<(String, String)>,
}

impl Model {
    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }
}

pub(crate) fn schema_text(schema: &FeatureSchema) -> String {
    let mut out = String::new();
    for t in &schema.clique_types {
        write!(out, "clique_type {} {} {}", t.name, t.size, t.phi).unwrap();
        for p in &t.params {
            write!(out, " {p}").unwrap();
        }
        out.push('\n');
    }
    for f in &schema.unary_features {
        writeln!(out, "unary_feature {f}").unwrap();
    }
    for (name, values) in &schema.params {
        write!(out, "param {name}").unwrap();
        for v in values {
            write!(out, " {v}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn write_model(model: &Model) -> Result<String> {
    model.schema.validate()?;
    if model.weights.len() != model.schema.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.schema.dim(),
            actual: model.weights.len(),
        });
    }
    let mut out = String::from("s3svm 1\n");
    for (k, v) in &model.meta {
        if k.is_empty() || k.contains(char::is_whitespace) || v.contains('\n') || v.contains('#') {
            return Err(Error::InvalidInput(format!("bad meta entry {k:?}")));
        }
        writeln!(out, "meta {k} {v}").unwrap();
    }
    out.push_str(&schema_text(&model.schema));
    writeln!(out, "schema_hash {}", model.schema.hash()).unwrap();
    for t in 0..model.schema.clique_types.len() {
        write!(out, "weights clique {t}").unwrap();
        for v in model.schema.clique_block(&model.weights, t) {
            write!(out, " {v}").unwrap();
        }
        out.push('\n');
    }
    out.push_str("weights unary");
    for v in &model.weights[model.schema.unary_offset()..] {
        write!(out, " {v}").unwrap();
    }
    out.push('\n');
    Ok(out)
}

pub fn read_model(text: &str) -> Result<Model> {
    let mut lines = content_lines(text);
    expect_header(&mut lines, "s3svm")?;
    let mut schema = FeatureSchema::default();
    let mut meta = Vec::new();
    let mut hash = None;
    let mut clique_weights: Vec<Option<Vec<f64>>> = Vec::new();
    let mut unary_weights = None;

    for (no, line) in lines {
        let mut t = Tokens::new(no, line);
        match t.word("record")? {
            "meta" => {
                let key = t.word("key")?.to_string();
                let value = line
                    .trim_start()
                    .strip_prefix("meta")
                    .unwrap()
                    .trim_start()
                    .strip_prefix(key.as_str())
                    .unwrap()
                    .trim()
                    .to_string();
                meta.push((key, value));
            }
            "clique_type" => {
                let name = t.word("name")?.to_string();
                let size = t.usize("size")?;
                let phi = t.word("phi")?.to_string();
                let params = t.rest_f64("value")?;
                schema.clique_types.push(CliqueType {
                    name,
                    size,
                    phi,
                    params,
                });
                clique_weights.push(None);
            }
            "unary_feature" => {
                schema.unary_features.push(t.word("name")?.to_string());
                t.finish()?;
            }
            "param" => {
                let name = t.word("name")?.to_string();
                schema.params.push((name, t.rest_f64("value")?));
            }
            "schema_hash" => {
                hash = Some(t.word("hash")?.to_string());
                t.finish()?;
            }
            "weights" => match t.word("block")? {
                "clique" => {
                    let idx = t.usize("clique type")?;
                    let values = t.rest_f64("value")?;
                    let slot = clique_weights
                        .get_mut(idx)
                        .ok_or_else(|| Error::parse(no, format!("unknown clique type {idx}")))?;
                    if values.len() != 1 << schema.clique_types[idx].size {
                        return Err(Error::parse(no, "clique block has the wrong length"));
                    }
                    if slot.replace(values).is_some() {
                        return Err(Error::parse(no, "duplicate clique block"));
                    }
                }
                "unary" => {
                    let values = t.rest_f64("value")?;
                    if unary_weights.replace(values).is_some() {
                        return Err(Error::parse(no, "duplicate unary block"));
                    }
                }
                other => return Err(Error::parse(no, format!("unknown weight block {other:?}"))),
            },
            other => return Err(Error::parse(no, format!("unknown record {other:?}"))),
        }
    }

    schema.validate()?;
    let expected = schema.hash();
    match hash {
        Some(h) if h == expected => {}
        Some(h) => {
            return Err(Error::InvalidInput(format!(
                "schema hash mismatch: file says {h}, schema hashes to {expected}"
            )))
        }
        None => return Err(Error::parse(0, "missing schema_hash")),
    }
    let mut weights = Vec::with_capacity(schema.dim());
    for (t, block) in clique_weights.into_iter().enumerate() {
        weights.extend(block.ok_or_else(|| Error::parse(0, format!("missing weights for clique type {t}")))?);
    }
    let unary = unary_weights.ok_or_else(|| Error::parse(0, "missing unary weights"))?;
    if unary.len() != schema.unary_features.len() {
        return Err(Error::DimensionMismatch {
            expected: schema.unary_features.len(),
            actual: unary.len(),
        });
    }
    weights.extend(unary);
    Ok(Model {
        schema,
        weights,
        meta,
    })
}
