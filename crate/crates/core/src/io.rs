//! JSON input formats: matrices `{n, rows}`, flags `{dims, basis}` and
//! periodic coefficients `{T, A0, harmonics: [{k, A, B}]}`.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flag::{Flag, FlagType};
use crate::floquet::{Harmonic, PeriodicCoefficient};
use crate::linalg::Mat;
use crate::tolerance::TolerancePolicy;

pub fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
}

pub fn rows_of(m: &Mat) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Row-major matrix from nested rows; `cols` is checked when given.
pub fn mat_from_rows(rows: &[Vec<f64>], cols: Option<usize>) -> Result<Mat> {
    let width = cols.or_else(|| rows.first().map(Vec::len)).unwrap_or(0);
    if let Some(r) = rows.iter().find(|r| r.len() != width) {
        return Err(Error::Parse(format!(
            "row of length {} where {width} was expected",
            r.len()
        )));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    if flat.iter().any(|v| !v.is_finite()) {
        return Err(Error::Parse("non-finite matrix entry".into()));
    }
    Ok(Mat::from_row_slice(rows.len(), width, &flat))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixFile {
    pub n: usize,
    pub rows: Vec<Vec<f64>>,
}

impl MatrixFile {
    pub fn from_mat(m: &Mat) -> Self {
        Self {
            n: m.nrows(),
            rows: rows_of(m),
        }
    }

    pub fn to_mat(&self) -> Result<Mat> {
        if self.rows.len() != self.n {
            return Err(Error::Parse(format!(
                "expected {} rows, got {}",
                self.n,
                self.rows.len()
            )));
        }
        mat_from_rows(&self.rows, Some(self.n))
    }
}

/// `basis` holds `n` rows and `dims.last()` columns; the first `d_i`
/// columns span `V_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlagFile {
    pub dims: Vec<usize>,
    pub basis: Vec<Vec<f64>>,
}

impl FlagFile {
    pub fn from_flag(f: &Flag) -> Self {
        Self {
            dims: f.flag_type().dims().to_vec(),
            basis: rows_of(f.basis()),
        }
    }

    pub fn to_flag(&self) -> Result<Flag> {
        let n = self.basis.len();
        let ft = FlagType::new(n, self.dims.clone())?;
        let top = *ft.dims().last().unwrap();
        Flag::new(&mat_from_rows(&self.basis, Some(top))?, &ft)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarmonicFile {
    pub k: usize,
    #[serde(rename = "A", default)]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B", default)]
    pub b: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeriodicFile {
    #[serde(rename = "T")]
    pub period: f64,
    #[serde(rename = "A0")]
    pub a0: Vec<Vec<f64>>,
    #[serde(default)]
    pub harmonics: Vec<HarmonicFile>,
}

impl PeriodicFile {
    pub fn from_coefficient(c: &PeriodicCoefficient) -> Self {
        Self {
            period: c.period(),
            a0: rows_of(c.a0()),
            harmonics: c
                .harmonics()
                .iter()
                .map(|h| HarmonicFile {
                    k: h.k,
                    a: rows_of(&h.a),
                    b: rows_of(&h.b),
                })
                .collect(),
        }
    }

    /// Missing `A` or `B` blocks are zero.
    pub fn to_coefficient(&self, pol: &TolerancePolicy) -> Result<PeriodicCoefficient> {
        let n = self.a0.len();
        let a0 = mat_from_rows(&self.a0, Some(n))?;
        let block = |rows: &Vec<Vec<f64>>| -> Result<Mat> {
            if rows.is_empty() {
                Ok(Mat::zeros(n, n))
            } else if rows.len() != n {
                Err(Error::Parse(format!(
                    "harmonic block has {} rows, expected {n}",
                    rows.len()
                )))
            } else {
                mat_from_rows(rows, Some(n))
            }
        };
        let harmonics = self
            .harmonics
            .iter()
            .map(|h| {
                Ok(Harmonic {
                    k: h.k,
                    a: block(&h.a)?,
                    b: block(&h.b)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        PeriodicCoefficient::new(self.period, a0, harmonics, pol)
    }
}
