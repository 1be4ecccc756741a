//! File formats: complex matrices as nested `[re, im]` arrays, and a
//! deterministic JSON/CSV writer (sorted keys, 17 significant digits).

use std::io;

use num_complex::Complex64;
use serde::Serialize;
use serde_json::ser::Formatter;

use crate::linalg::CMatrix;

/// Row-major nested rows of `[re, im]` pairs.
pub type MatrixJson = Vec<Vec<[f64; 2]>>;

pub fn matrix_to_json(m: &CMatrix) -> MatrixJson {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

pub fn matrix_from_json(rows: &MatrixJson) -> Result<CMatrix, String> {
    let r = rows.len();
    if r == 0 {
        return Err("empty matrix".into());
    }
    let c = rows[0].len();
    if rows.iter().any(|row| row.len() != c) {
        return Err("ragged rows".into());
    }
    if rows.iter().flatten().any(|[re, im]| !re.is_finite() || !im.is_finite()) {
        return Err("non-finite entry".into());
    }
    Ok(CMatrix::from_fn(r, c, |i, j| {
        Complex64::new(rows[i][j][0], rows[i][j][1])
    }))
}

/// Serde adapter for fields holding a [`CMatrix`].
pub mod matrix_serde {
    use super::*;
    use serde::Serializer;

    pub fn serialize<S: Serializer>(m: &CMatrix, s: S) -> Result<S::Ok, S::Error> {
        matrix_to_json(m).serialize(s)
    }
}

/// Serde adapter for `Vec<CMatrix>` fields.
pub mod matrix_vec_serde {
    use super::*;
    use serde::Serializer;

    pub fn serialize<S: Serializer>(ms: &[CMatrix], s: S) -> Result<S::Ok, S::Error> {
        let v: Vec<MatrixJson> = ms.iter().map(matrix_to_json).collect();
        v.serialize(s)
    }
}

/// Formats a real with 17 significant digits in scientific notation.
pub fn fmt_real(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

struct FixedDigits;

impl Formatter for FixedDigits {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            writer.write_all(fmt_real(value).as_bytes())
        } else {
            writer.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }
}

/// Deterministic JSON: keys sorted (via `serde_json::Value`'s ordered map),
/// reals with 17 significant digits, non-finite reals as `null`.
pub fn to_deterministic_json<T: Serialize>(value: &T) -> serde_json::Result<String> {
    let tree = serde_json::to_value(value)?;
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FixedDigits);
    tree.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

/// Minimal CSV table writer with deterministic real formatting.
#[derive(Debug, Clone, Default)]
pub struct CsvTable {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| (*s).to_owned()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.header.len());
        self.rows.push(cells);
    }

    pub fn push_reals(&mut self, cells: &[f64]) {
        self.push(cells.iter().map(|x| fmt_real(*x)).collect());
    }

    pub fn render(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}
