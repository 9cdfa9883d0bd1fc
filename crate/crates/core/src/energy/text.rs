//! Line-oriented text format for [`SoSEnergy`]:
//!
//! ```text
//! sos 1
//! vars 3
//! unary 0 5 3
//! clique 2 0 1 0 1 1 1
//! ```
//!
//! `clique k v0 .. v(k-1) t0 .. t(2^k-1)` lists the table in mask order.
//! `#` starts a comment. Numbers are written in shortest round-trip form, so
//! a write/parse cycle reproduces every value bit for bit.

use std::fmt::Write as _;

use super::SoSEnergy;
use crate::error::{Error, Result};

pub(crate) struct Tokens<'a> {
    pub line: usize,
    inner: std::str::SplitWhitespace<'a>,
}

impl<'a> Tokens<'a> {
    pub fn new(line: usize, text: &'a str) -> Self {
        Tokens {
            line,
            inner: text.split_whitespace(),
        }
    }

    pub fn word(&mut self, what: &str) -> Result<&'a str> {
        self.inner
            .next()
            .ok_or_else(|| Error::parse(self.line, format!("missing {what}")))
    }

    pub fn next_word(&mut self) -> Option<&'a str> {
        self.inner.next()
    }

    pub fn usize(&mut self, what: &str) -> Result<usize> {
        let w = self.word(what)?;
        w.parse()
            .map_err(|_| Error::parse(self.line, format!("bad {what}: {w:?}")))
    }

    pub fn f64(&mut self, what: &str) -> Result<f64> {
        let w = self.word(what)?;
        match w.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(Error::parse(self.line, format!("bad {what}: {w:?}"))),
        }
    }

    /// Every remaining token as a number.
    pub fn rest_f64(&mut self, what: &str) -> Result<Vec<f64>> {
        let mut out = Vec::new();
        for w in self.inner.by_ref() {
            match w.parse::<f64>() {
                Ok(v) if v.is_finite() => out.push(v),
                _ => return Err(Error::parse(self.line, format!("bad {what}: {w:?}"))),
            }
        }
        Ok(out)
    }

    pub fn finish(mut self) -> Result<()> {
        match self.inner.next() {
            None => Ok(()),
            Some(w) => Err(Error::parse(self.line, format!("unexpected token {w:?}"))),
        }
    }
}

/// Non-empty, comment-stripped lines with 1-based line numbers.
pub(crate) fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.split('#').next().unwrap_or("").trim();
        (!l.is_empty()).then_some((i + 1, l))
    })
}

pub(crate) fn expect_header<'a>(
    lines: &mut impl Iterator<Item = (usize, &'a str)>,
    magic: &str,
) -> Result<()> {
    let (no, line) = lines
        .next()
        .ok_or_else(|| Error::parse(0, format!("empty input, expected `{magic} 1`")))?;
    let mut t = Tokens::new(no, line);
    if t.word("header")? != magic {
        return Err(Error::parse(no, format!("expected `{magic} 1` header")));
    }
    let version = t.usize("version")?;
    if version != 1 {
        return Err(Error::parse(no, format!("unsupported version {version}")));
    }
    t.finish()
}

pub(crate) fn expect_vars<'a>(lines: &mut impl Iterator<Item = (usize, &'a str)>) -> Result<usize> {
    let (no, line) = lines
        .next()
        .ok_or_else(|| Error::parse(0, "missing `vars` line"))?;
    let mut t = Tokens::new(no, line);
    if t.word("keyword")? != "vars" {
        return Err(Error::parse(no, "expected `vars N`"));
    }
    let n = t.usize("variable count")?;
    t.finish()?;
    Ok(n)
}

pub fn parse_energy(text: &str) -> Result<SoSEnergy> {
    let mut lines = content_lines(text);
    expect_header(&mut lines, "sos")?;
    let n = expect_vars(&mut lines)?;
    let mut energy = SoSEnergy::new(n);
    for (no, line) in lines {
        let mut t = Tokens::new(no, line);
        match t.word("record")? {
            "unary" => {
                let i = t.usize("variable")?;
                let c0 = t.f64("cost")?;
                let c1 = t.f64("cost")?;
                t.finish()?;
                energy
                    .set_unary(i, c0, c1)
                    .map_err(|e| Error::parse(no, e.to_string()))?;
            }
            "clique" => {
                let k = t.usize("clique size")?;
                if k == 0 || k > super::K_MAX {
                    return Err(Error::parse(no, format!("clique size {k} out of range")));
                }
                let members = (0..k)
                    .map(|_| t.usize("member"))
                    .collect::<Result<Vec<_>>>()?;
                let table = (0..1usize << k)
                    .map(|_| t.f64("table entry"))
                    .collect::<Result<Vec<_>>>()?;
                t.finish()?;
                energy
                    .add_clique(&members, table)
                    .map_err(|e| Error::parse(no, e.to_string()))?;
            }
            other => return Err(Error::parse(no, format!("unknown record {other:?}"))),
        }
    }
    Ok(energy)
}

pub fn write_energy(energy: &SoSEnergy) -> String {
    let mut out = String::new();
    writeln!(out, "sos 1").unwrap();
    writeln!(out, "vars {}", energy.num_vars()).unwrap();
    for (i, [c0, c1]) in energy.unary().iter().enumerate() {
        writeln!(out, "unary {i} {c0} {c1}").unwrap();
    }
    for c in energy.cliques() {
        write!(out, "clique {}", c.clique().len()).unwrap();
        for m in c.clique().members() {
            write!(out, " {}", m.0).unwrap();
        }
        for v in c.table() {
            write!(out, " {v}").unwrap();
        }
        out.push('\n');
    }
    out
}
