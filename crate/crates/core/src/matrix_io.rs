//! Plain-text matrix files.
//!
//! ```text
//! ggm-mac-matrix 1
//! kind model
//! meta d 3
//! meta seed 42
//! matrix precision 3 3
//! 1.0000000000000000e0 -2.5000000000000000e-1 0.0000000000000000e0
//! ...
//! end
//! ```
//!
//! Values are written row-major with 17 significant digits, so a file read
//! back reproduces every entry bit for bit.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::estimators::{CovarianceEstimate, Provenance};
use crate::model::GgmModel;

const MAGIC: &str = "ggm-mac-matrix 1";

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MatrixFile {
    pub kind: String,
    pub meta: BTreeMap<String, String>,
    pub matrices: Vec<(String, DMatrix<f64>)>,
}

/// 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

impl MatrixFile {
    pub fn new(kind: &str) -> Self {
        MatrixFile {
            kind: kind.to_string(),
            ..Default::default()
        }
    }

    pub fn set(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.meta.insert(key.to_string(), value.to_string());
        self
    }

    pub fn push(&mut self, name: &str, m: DMatrix<f64>) -> &mut Self {
        self.matrices.push((name.to_string(), m));
        self
    }

    pub fn matrix(&self, name: &str) -> Option<&DMatrix<f64>> {
        self.matrices
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, m)| m)
    }

    pub fn meta_f64(&self, key: &str) -> Result<Option<f64>> {
        match self.meta.get(key).map(String::as_str) {
            None | Some("none") => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| Error::Parse {
                line: 0,
                msg: format!("meta {key}: bad number '{v}'"),
            }),
        }
    }

    pub fn meta_u64(&self, key: &str) -> Result<Option<u64>> {
        match self.meta.get(key).map(String::as_str) {
            None | Some("none") => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| Error::Parse {
                line: 0,
                msg: format!("meta {key}: bad integer '{v}'"),
            }),
        }
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "{MAGIC}")?;
        writeln!(w, "kind {}", self.kind)?;
        for (k, v) in &self.meta {
            writeln!(w, "meta {k} {v}")?;
        }
        for (name, m) in &self.matrices {
            writeln!(w, "matrix {name} {} {}", m.nrows(), m.ncols())?;
            for row in m.row_iter() {
                let line: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
                writeln!(w, "{}", line.join(" "))?;
            }
        }
        writeln!(w, "end")?;
        Ok(())
    }

    pub fn to_string_lossless(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("ascii output")
    }

    pub fn read_from(r: impl BufRead) -> Result<Self> {
        let mut lines = r.lines().enumerate().map(|(i, l)| (i + 1, l));
        let perr = |line: usize, msg: String| Error::Parse { line, msg };
        let mut next = move || -> Result<Option<(usize, String)>> {
            for (i, l) in lines.by_ref() {
                let l = l?;
                let t = l.trim();
                if !t.is_empty() && !t.starts_with('#') {
                    return Ok(Some((i, t.to_string())));
                }
            }
            Ok(None)
        };
        match next()? {
            Some((_, l)) if l == MAGIC => {}
            Some((i, l)) => return Err(perr(i, format!("expected '{MAGIC}', found '{l}'"))),
            None => return Err(perr(0, "empty file".into())),
        }
        let mut file = MatrixFile::default();
        loop {
            let (i, line) = next()?.ok_or_else(|| perr(0, "missing 'end'".into()))?;
            let mut parts = line.split_whitespace();
            match parts.next() {
                Some("end") => break,
                Some("kind") => {
                    file.kind = parts
                        .next()
                        .ok_or_else(|| perr(i, "kind without value".into()))?
                        .into()
                }
                Some("meta") => {
                    let key = parts
                        .next()
                        .ok_or_else(|| perr(i, "meta without key".into()))?;
                    let value: Vec<&str> = parts.collect();
                    file.meta.insert(key.to_string(), value.join(" "));
                }
                Some("matrix") => {
                    let name = parts
                        .next()
                        .ok_or_else(|| perr(i, "matrix without name".into()))?;
                    let dims: Vec<usize> = parts
                        .map(|p| {
                            p.parse()
                                .map_err(|_| perr(i, format!("bad dimension '{p}'")))
                        })
                        .collect::<Result<_>>()?;
                    let [rows, cols] = dims[..] else {
                        return Err(perr(i, "matrix header needs rows and cols".into()));
                    };
                    let mut data = Vec::with_capacity(rows * cols);
                    for _ in 0..rows {
                        let (j, row) = next()?.ok_or_else(|| perr(i, "truncated matrix".into()))?;
                        let vals: Vec<f64> = row
                            .split_whitespace()
                            .map(|v| v.parse().map_err(|_| perr(j, format!("bad number '{v}'"))))
                            .collect::<Result<_>>()?;
                        if vals.len() != cols {
                            return Err(perr(
                                j,
                                format!("expected {cols} values, found {}", vals.len()),
                            ));
                        }
                        data.extend(vals);
                    }
                    file.matrices
                        .push((name.to_string(), DMatrix::from_row_slice(rows, cols, &data)));
                }
                Some(other) => return Err(perr(i, format!("unknown directive '{other}'"))),
                None => unreachable!("blank lines are skipped"),
            }
        }
        Ok(file)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(f))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }
}

/// Serialize a model with its metadata block. `alpha` is recorded when known.
pub fn model_file(model: &GgmModel, alpha: Option<f64>) -> MatrixFile {
    let mut f = MatrixFile::new("model");
    f.set("d", model.dim())
        .set(
            "seed",
            model.seed().map_or("none".to_string(), |s| s.to_string()),
        )
        .set("max_degree", model.max_degree())
        .set("theta_min", fmt_f64(model.theta_min()))
        .set("alpha", alpha.map_or("none".to_string(), fmt_f64))
        .set("edges", model.edges().len());
    f.push("precision", model.precision().clone());
    f.push("covariance", model.covariance().clone());
    f
}

pub fn model_from_file(f: &MatrixFile) -> Result<GgmModel> {
    if f.kind != "model" {
        return Err(Error::Parse {
            line: 0,
            msg: format!("expected kind 'model', found '{}'", f.kind),
        });
    }
    let missing = |n: &str| Error::Parse {
        line: 0,
        msg: format!("missing matrix '{n}'"),
    };
    let theta = f
        .matrix("precision")
        .ok_or_else(|| missing("precision"))?
        .clone();
    let q = f
        .matrix("covariance")
        .ok_or_else(|| missing("covariance"))?
        .clone();
    GgmModel::from_parts(theta, q, f.meta_u64("seed")?)
}

pub fn estimate_file(est: &CovarianceEstimate) -> MatrixFile {
    let mut f = MatrixFile::new("covariance");
    f.set("provenance", est.provenance())
        .set("d", est.dim())
        .set("n_used", est.n_used())
        .set("diag_clamps", est.diag_clamps());
    f.push("covariance", est.matrix().clone());
    f
}

/// Read a covariance estimate. Files without a provenance (e.g. a bare
/// `matrix covariance` block) are treated as original data.
pub fn estimate_from_file(f: &MatrixFile) -> Result<CovarianceEstimate> {
    let m = f
        .matrix("covariance")
        .or_else(|| f.matrices.first().map(|(_, m)| m))
        .ok_or_else(|| Error::Parse {
            line: 0,
            msg: "no matrix in file".into(),
        })?
        .clone();
    let provenance = match f.meta.get("provenance") {
        Some(p) => p.parse()?,
        None => Provenance::Original,
    };
    let n_used = f.meta_u64("n_used")?.unwrap_or(0) as usize;
    CovarianceEstimate::new(m, provenance, n_used)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{generate_random_model, RandomModelSpec};

    #[test]
    fn model_round_trip_is_bit_exact() {
        let m = generate_random_model(&RandomModelSpec::new(8, 0.3, 3), 11).unwrap();
        let text = model_file(&m, Some(0.25)).to_string_lossless();
        let back = MatrixFile::read_from(text.as_bytes()).unwrap();
        assert_eq!(back.meta_f64("alpha").unwrap(), Some(0.25));
        assert_eq!(model_from_file(&back).unwrap(), m);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = "ggm-mac-matrix 1\nkind model\nmatrix precision 2 2\n1 0\n0 x\nend\n";
        match MatrixFile::read_from(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("unexpected {other:?}"),
        }
        assert!(MatrixFile::read_from("hello\n".as_bytes()).is_err());
    }

    #[test]
    fn estimate_round_trip() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, -0.3, -0.3, 1.0]);
        let est = CovarianceEstimate::new(m, Provenance::Signs, 500).unwrap();
        let text = estimate_file(&est).to_string_lossless();
        assert!(text.contains("meta provenance signs"));
        let back = estimate_from_file(&MatrixFile::read_from(text.as_bytes()).unwrap()).unwrap();
        assert_eq!(back, est);
    }
}
