//! Plain-text checkpoint format.
//!
//! ```text
//! lowshot-checkpoint v1
//! seed <u64>
//! input_dim <n>
//! layers <count>
//! layer <out> <in> <relu|none>
//! <out lines of `in` space-separated weights>
//! bias <out space-separated values>
//! ...
//! head <K> <d>
//! <K lines of `d` space-separated weights>
//! end
//! ```
//!
//! Numbers use Rust's shortest round-trip formatting, so reading a file back
//! reproduces every parameter bit for bit. `seed` records the seed the
//! parameters were initialized and trained from.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::{ExtractorParams, HeadWeights, Layer, ModelParams};

const MAGIC: &str = "lowshot-checkpoint v1";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub seed: u64,
    pub input_dim: usize,
    pub params: ModelParams,
}

fn write_row(out: &mut String, row: &[f64]) {
    for (i, x) in row.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        write!(out, "{x}").unwrap();
    }
    out.push('\n');
}

impl Checkpoint {
    pub fn new(params: ModelParams, seed: u64) -> Self {
        Self {
            seed,
            input_dim: params.input_dim(),
            params,
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{MAGIC}").unwrap();
        writeln!(out, "seed {}", self.seed).unwrap();
        writeln!(out, "input_dim {}", self.input_dim).unwrap();
        let layers = self.params.extractor.layers();
        writeln!(out, "layers {}", layers.len()).unwrap();
        for l in layers {
            writeln!(out, "layer {} {} {}", l.out_dim(), l.in_dim(), l.activation.as_str()).unwrap();
            for row in l.weight.row_iter() {
                write_row(&mut out, row);
            }
            out.push_str("bias ");
            write_row(&mut out, &l.bias);
        }
        let w = &self.params.head.w;
        writeln!(out, "head {} {}", w.rows(), w.cols()).unwrap();
        for row in w.row_iter() {
            write_row(&mut out, row);
        }
        out.push_str("end\n");
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = Lines {
            inner: text.lines().enumerate(),
            last: 0,
        };
        if lines.next_line()? != MAGIC {
            return Err(lines.err("missing or unsupported header"));
        }
        let seed = lines.keyed("seed")?;
        let input_dim = lines.keyed("input_dim")?;
        let n_layers: usize = lines.keyed("layers")?;
        let mut layers = Vec::with_capacity(n_layers);
        for _ in 0..n_layers {
            let line = lines.next_line()?;
            let parts: Vec<&str> = line.split(' ').collect();
            if parts.len() != 4 || parts[0] != "layer" {
                return Err(lines.err(format!("expected `layer <out> <in> <act>`, got {line:?}")));
            }
            let out: usize = parts[1].parse().map_err(|_| lines.err("bad layer rows"))?;
            let inp: usize = parts[2].parse().map_err(|_| lines.err("bad layer cols"))?;
            let activation = parts[3].parse().map_err(|e: String| lines.err(e))?;
            let weight = lines.matrix(out, inp)?;
            let line = lines.next_line()?;
            let rest = line
                .strip_prefix("bias ")
                .or_else(|| (line == "bias" && out == 0).then_some(""))
                .ok_or_else(|| lines.err("expected bias line"))?;
            let bias = lines.numbers(rest, out)?;
            layers.push(Layer {
                weight,
                bias,
                activation,
            });
        }
        let line = lines.next_line()?;
        let parts: Vec<&str> = line.split(' ').collect();
        if parts.len() != 3 || parts[0] != "head" {
            return Err(lines.err(format!("expected `head <K> <d>`, got {line:?}")));
        }
        let k: usize = parts[1].parse().map_err(|_| lines.err("bad head rows"))?;
        let d: usize = parts[2].parse().map_err(|_| lines.err("bad head cols"))?;
        let w = lines.matrix(k, d)?;
        if lines.next_line()? != "end" {
            return Err(lines.err("expected end"));
        }
        let extractor = ExtractorParams::new(layers).map_err(|e| Error::Checkpoint(e.to_string()))?;
        if extractor.input_dim().is_some_and(|i| i != input_dim) || (extractor.is_identity() && input_dim != d) {
            return Err(Error::Checkpoint(format!(
                "input_dim {input_dim} does not match layers"
            )));
        }
        let params = ModelParams::new(extractor, HeadWeights::new(w)).map_err(|e| Error::Checkpoint(e.to_string()))?;
        Ok(Self {
            seed,
            input_dim,
            params,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::io::write_atomic(path.as_ref(), self.to_text().as_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))
    }
}

struct Lines<'a, I: Iterator<Item = (usize, &'a str)>> {
    inner: I,
    last: usize,
}

impl<'a, I: Iterator<Item = (usize, &'a str)>> Lines<'a, I> {
    fn err(&self, msg: impl std::fmt::Display) -> Error {
        Error::Checkpoint(format!("line {}: {msg}", self.last))
    }

    fn next_line(&mut self) -> Result<&'a str> {
        let (i, l) = self
            .inner
            .next()
            .ok_or_else(|| Error::Checkpoint(format!("line {}: unexpected end of file", self.last + 1)))?;
        self.last = i + 1;
        Ok(l.trim_end_matches('\r'))
    }

    fn keyed<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let line = self.next_line()?;
        line.strip_prefix(key)
            .and_then(|r| r.strip_prefix(' '))
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| self.err(format!("expected `{key} <value>`, got {line:?}")))
    }

    fn numbers(&self, line: &str, n: usize) -> Result<Vec<f64>> {
        let vals: Vec<f64> = if line.is_empty() {
            Vec::new()
        } else {
            line.split(' ')
                .map(|t| t.parse::<f64>().map_err(|_| self.err(format!("bad number {t:?}"))))
                .collect::<Result<_>>()?
        };
        if vals.len() != n {
            return Err(self.err(format!("expected {n} values, found {}", vals.len())));
        }
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(self.err("non-finite value"));
        }
        Ok(vals)
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<Matrix> {
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let line = self.next_line()?;
            data.extend(self.numbers(line, cols)?);
        }
        Matrix::from_vec(rows, cols, data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SeededRng;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut rng = SeededRng::new(5);
        let ext = ExtractorParams::mlp(&[4, 8, 3], &mut rng).unwrap();
        let head = HeadWeights::new(rng.normal_matrix(6, 3, 1e-3));
        let ck = Checkpoint::new(ModelParams::new(ext, head).unwrap(), 42);
        let text = ck.to_text();
        let back = Checkpoint::parse(&text).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.to_text(), text);
        for (a, b) in back.params.head.w.as_slice().iter().zip(ck.params.head.w.as_slice()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn identity_extractor_round_trip() {
        let head = HeadWeights::new(Matrix::from_rows(&[[1e-300, -0.1], [5e300, 0.0]]).unwrap());
        let ck = Checkpoint::new(ModelParams::new(ExtractorParams::identity(), head).unwrap(), 0);
        assert_eq!(Checkpoint::parse(&ck.to_text()).unwrap(), ck);
    }

    #[test]
    fn rejects_corruption() {
        let head = HeadWeights::new(Matrix::identity(2));
        let ck = Checkpoint::new(ModelParams::new(ExtractorParams::identity(), head).unwrap(), 1);
        let text = ck.to_text();
        assert!(Checkpoint::parse(&text.replace("v1", "v9")).is_err());
        assert!(Checkpoint::parse(&text.replace("head 2 2", "head 2 3")).is_err());
        assert!(Checkpoint::parse(text.trim_end_matches("end\n")).is_err());
        assert!(Checkpoint::parse(&text.replace("1 0\n", "1 x\n")).is_err());
    }
}
