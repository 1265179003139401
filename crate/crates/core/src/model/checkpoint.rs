//! Line-oriented text checkpoints.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a
//! write/read cycle reproduces every bit.

use std::io::{BufRead, Write};

use super::{FactorizedParameter, ParamKind, ParameterTables, RareModel};
use crate::error::{RareError, Result};
use crate::prospect::AblationMode;

const MAGIC: &str = "rare-checkpoint v1";

pub(crate) fn write_row<W: Write>(out: &mut W, key: &str, values: &[f64]) -> Result<()> {
    write!(out, "{key}")?;
    for x in values {
        write!(out, " {x}")?;
    }
    writeln!(out)?;
    Ok(())
}

/// Sequential reader over `key value...` lines with line-numbered errors.
pub(crate) struct LineReader<R> {
    lines: std::io::Lines<R>,
    line_no: usize,
}

impl<R: BufRead> LineReader<R> {
    pub(crate) fn new(reader: R) -> Self {
        LineReader {
            lines: reader.lines(),
            line_no: 0,
        }
    }

    pub(crate) fn error(&self, message: impl Into<String>) -> RareError {
        RareError::Checkpoint {
            line: self.line_no,
            message: message.into(),
        }
    }

    pub(crate) fn next_line(&mut self) -> Result<String> {
        self.line_no += 1;
        match self.lines.next() {
            Some(line) => Ok(line?),
            None => Err(self.error("unexpected end of file")),
        }
    }

    pub(crate) fn expect_exact(&mut self, expected: &str) -> Result<()> {
        let line = self.next_line()?;
        if line.trim_end() != expected {
            return Err(self.error(format!("expected `{expected}`, found `{line}`")));
        }
        Ok(())
    }

    /// Reads a line starting with `key` and returns the remaining tokens.
    pub(crate) fn keyed(&mut self, key: &str) -> Result<Vec<String>> {
        let line = self.next_line()?;
        let mut tokens = line.split_whitespace();
        if tokens.next() != Some(key) {
            return Err(self.error(format!("expected key `{key}`")));
        }
        Ok(tokens.map(str::to_string).collect())
    }

    pub(crate) fn usize_value(&mut self, key: &str) -> Result<usize> {
        let tokens = self.keyed(key)?;
        match tokens.as_slice() {
            [x] => x.parse().map_err(|_| self.error(format!("bad integer for `{key}`"))),
            _ => Err(self.error(format!("`{key}` takes one value"))),
        }
    }

    pub(crate) fn floats(&mut self, key: &str, len: usize) -> Result<Vec<f64>> {
        let tokens = self.keyed(key)?;
        if tokens.len() != len {
            return Err(self.error(format!("`{key}` has {} values, expected {len}", tokens.len())));
        }
        tokens
            .iter()
            .map(|t| match t.parse::<f64>() {
                Ok(x) if x.is_finite() => Ok(x),
                _ => Err(self.error(format!("bad number `{t}` in `{key}`"))),
            })
            .collect()
    }

    pub(crate) fn expect_eof(&mut self) -> Result<()> {
        loop {
            self.line_no += 1;
            match self.lines.next() {
                None => return Ok(()),
                Some(line) => {
                    if !line?.trim().is_empty() {
                        return Err(self.error("trailing content"));
                    }
                }
            }
        }
    }
}

pub fn write_checkpoint<W: Write>(model: &RareModel, mut out: W) -> Result<()> {
    writeln!(out, "{MAGIC}")?;
    writeln!(out, "n {}", model.n_users())?;
    writeln!(out, "m {}", model.n_items())?;
    writeln!(out, "k {}", model.k())?;
    writeln!(out, "mode {}", model.mode.as_str())?;
    write_row(&mut out, "reference", &model.params.reference)?;
    for kind in ParamKind::ALL {
        let t = model.params.param(kind);
        writeln!(out, "param {}", kind.name())?;
        write_row(&mut out, "global", &[t.global_bias])?;
        write_row(&mut out, "user_bias", &t.user_bias)?;
        write_row(&mut out, "item_bias", &t.item_bias)?;
        write_row(&mut out, "user_factors", &t.user_factors)?;
        write_row(&mut out, "item_factors", &t.item_factors)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_checkpoint<R: BufRead>(reader: R) -> Result<RareModel> {
    let mut r = LineReader::new(reader);
    r.expect_exact(MAGIC)?;
    let n = r.usize_value("n")?;
    let m = r.usize_value("m")?;
    let k = r.usize_value("k")?;
    let mode: AblationMode = match r.keyed("mode")?.as_slice() {
        [name] => name.parse().map_err(|_| r.error(format!("unknown mode `{name}`")))?,
        _ => return Err(r.error("`mode` takes one value")),
    };
    let mut params = ParameterTables::zeros(n, m, k);
    params.reference = r.floats("reference", n)?;
    for kind in ParamKind::ALL {
        r.expect_exact(&format!("param {}", kind.name()))?;
        let t: &mut FactorizedParameter = params.param_mut(kind);
        t.global_bias = r.floats("global", 1)?[0];
        t.user_bias = r.floats("user_bias", n)?;
        t.item_bias = r.floats("item_bias", m)?;
        t.user_factors = r.floats("user_factors", n * k)?;
        t.item_factors = r.floats("item_factors", m * k)?;
    }
    r.expect_eof()?;
    Ok(RareModel { params, mode })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut model = RareModel::initialize_with_std(3, 5, 2, AblationMode::NoWeighting, 0.7, &mut rng);
        model.params.reference[1] = 1e-300;
        model.params.reference[2] = -0.1 - 0.2;
        let mut buf = Vec::new();
        write_checkpoint(&model, &mut buf).unwrap();
        let back = read_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(back.mode, model.mode);
        let bits = |m: &RareModel| m.params.scalars().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&model));
    }

    #[test]
    fn rejects_truncated_and_garbled_files() {
        let model = RareModel::zeros(2, 2, 1, AblationMode::Full);
        let mut buf = Vec::new();
        write_checkpoint(&model, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let truncated: String = text.lines().take(8).map(|l| format!("{l}\n")).collect();
        assert!(matches!(read_checkpoint(truncated.as_bytes()), Err(RareError::Checkpoint { .. })));
        let garbled = text.replacen("reference 0 0", "reference 0 zero", 1);
        match read_checkpoint(garbled.as_bytes()) {
            Err(RareError::Checkpoint { line, .. }) => assert_eq!(line, 6),
            other => panic!("unexpected {other:?}"),
        }
        assert!(read_checkpoint("bpr-checkpoint v1\n".as_bytes()).is_err());
    }
}
