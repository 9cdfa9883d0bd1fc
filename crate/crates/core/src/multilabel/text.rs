//! Text format for [`MultiLabelEnergy`], extending the binary format:
//!
//! ```text
//! sos 1
//! vars 3
//! labels 2
//! unary 0 1.5 0
//! gclique 1 2 0 1 0 0 0 -1
//! ```
//!
//! `gclique ℓ k v0 .. v(k-1) t0 .. t(2^k-1)` gives `g_ℓ` on the listed
//! members. Records with the same member list (same order) form one clique;
//! labels without a record get an all-zero table.

use std::fmt::Write as _;

use super::MultiLabelEnergy;
use crate::energy::text::{content_lines, expect_header, expect_vars, Tokens};
use crate::energy::K_MAX;
use crate::error::{Error, Result};

pub fn parse_multilabel(text: &str) -> Result<MultiLabelEnergy> {
    let mut lines = content_lines(text);
    expect_header(&mut lines, "sos")?;
    let n = expect_vars(&mut lines)?;
    let (no, line) = lines
        .next()
        .ok_or_else(|| Error::parse(0, "missing `labels` line"))?;
    let mut t = Tokens::new(no, line);
    if t.word("keyword")? != "labels" {
        return Err(Error::parse(no, "expected `labels L`"));
    }
    let num_labels = t.usize("label count")?;
    t.finish()?;
    let mut e = MultiLabelEnergy::new(n, num_labels).map_err(|err| Error::parse(no, err.to_string()))?;

    let mut groups: Vec<(Vec<usize>, Vec<Option<Vec<f64>>>, usize)> = Vec::new();
    for (no, line) in lines {
        let mut t = Tokens::new(no, line);
        match t.word("record")? {
            "unary" => {
                let i = t.usize("variable")?;
                let costs = (0..num_labels)
                    .map(|_| t.f64("cost"))
                    .collect::<Result<Vec<_>>>()?;
                t.finish()?;
                e.set_unary(i, &costs)
                    .map_err(|err| Error::parse(no, err.to_string()))?;
            }
            "gclique" => {
                let label = t.usize("label")?;
                if label >= num_labels {
                    return Err(Error::parse(no, format!("label {label} out of range")));
                }
                let k = t.usize("clique size")?;
                if k == 0 || k > K_MAX {
                    return Err(Error::parse(no, format!("clique size {k} out of range")));
                }
                let members = (0..k)
                    .map(|_| t.usize("member"))
                    .collect::<Result<Vec<_>>>()?;
                let table = (0..1usize << k)
                    .map(|_| t.f64("table entry"))
                    .collect::<Result<Vec<_>>>()?;
                t.finish()?;
                let g = match groups.iter().position(|(m, _, _)| *m == members) {
                    Some(g) => g,
                    None => {
                        groups.push((members, vec![None; num_labels], no));
                        groups.len() - 1
                    }
                };
                if groups[g].1[label].replace(table).is_some() {
                    return Err(Error::parse(no, format!("duplicate table for label {label}")));
                }
            }
            other => return Err(Error::parse(no, format!("unknown record {other:?}"))),
        }
    }
    for (members, tables, no) in groups {
        let size = 1 << members.len();
        let tables = tables
            .into_iter()
            .map(|t| t.unwrap_or_else(|| vec![0.0; size]))
            .collect();
        e.add_clique(&members, tables)
            .map_err(|err| Error::parse(no, err.to_string()))?;
    }
    Ok(e)
}

pub fn write_multilabel(e: &MultiLabelEnergy) -> String {
    let mut out = String::new();
    writeln!(out, "sos 1\nvars {}\nlabels {}", e.num_vars(), e.num_labels()).unwrap();
    for i in 0..e.num_vars() {
        write!(out, "unary {i}").unwrap();
        for l in 0..e.num_labels() {
            write!(out, " {}", e.unary(i, l)).unwrap();
        }
        out.push('\n');
    }
    for c in e.cliques() {
        for (l, t) in c.tables().iter().enumerate() {
            write!(out, "gclique {l} {}", c.members().len()).unwrap();
            for m in c.members() {
                write!(out, " {m}").unwrap();
            }
            for v in t {
                write!(out, " {v}").unwrap();
            }
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multilabel::pn_potts;

    #[test]
    fn round_trip() {
        let mut e = MultiLabelEnergy::new(3, 3).unwrap();
        e.set_unary(1, &[0.5, -1.0 / 3.0, 2.0]).unwrap();
        e.add_clique(&[2, 0, 1], pn_potts(3, &[0.1, 0.2, 0.3], 1.0).unwrap())
            .unwrap();
        let text = write_multilabel(&e);
        assert_eq!(parse_multilabel(&text).unwrap(), e);
    }

    #[test]
    fn missing_labels_default_to_zero() {
        let e = parse_multilabel("sos 1\nvars 2\nlabels 3\ngclique 2 2 0 1 0 0 0 -1\n").unwrap();
        assert_eq!(e.cliques().len(), 1);
        assert_eq!(e.cliques()[0].tables()[0], vec![0.0; 4]);
        assert_eq!(e.cliques()[0].tables()[2], vec![0.0, 0.0, 0.0, -1.0]);
    }

    #[test]
    fn rejects_malformed() {
        assert!(parse_multilabel("sos 1\nvars 2\n").is_err());
        assert!(parse_multilabel("sos 1\nvars 2\nlabels 2\ngclique 2 2 0 1 0 0 0 0\n").is_err());
        assert!(parse_multilabel("sos 1\nvars 2\nlabels 2\ngclique 0 2 0 1 0 0 0 1\n").is_err());
        assert!(parse_multilabel("sos 1\nvars 2\nlabels 2\nunary 0 1\n").is_err());
        assert!(
            parse_multilabel("sos 1\nvars 2\nlabels 2\ngclique 0 2 0 1 0 0 0 0\ngclique 0 2 0 1 0 0 0 0\n").is_err()
        );
    }
}
