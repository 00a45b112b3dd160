use serde_json::{json, Value};

use super::process::ProcessMatrix;
use crate::linalg::{DensityMatrix, Matrix};

/// Rows of `[re, im]` pairs.
pub fn matrix_json(m: &Matrix) -> Value {
    Value::Array(
        m.outer_iter()
            .map(|row| Value::Array(row.iter().map(|z| json!([z.re, z.im])).collect()))
            .collect(),
    )
}

pub fn density_json(rho: &DensityMatrix) -> Value {
    json!({ "dims": rho.dims(), "rho": matrix_json(rho.matrix()) })
}

pub fn process_json(p: &ProcessMatrix) -> Value {
    json!({
        "basis": ["I", "X", "Y", "Z"],
        "chi": matrix_json(&p.chi),
        "trace": p.trace(),
        "tp_residual": p.tp_residual(),
    })
}

/// Inverse of [`matrix_json`].
pub fn matrix_from_json(v: &Value) -> Option<Matrix> {
    let rows = v.as_array()?;
    let n = rows.len();
    let mut out = Matrix::zeros((n, n));
    for (i, row) in rows.iter().enumerate() {
        let row = row.as_array()?;
        if row.len() != n {
            return None;
        }
        for (j, z) in row.iter().enumerate() {
            let pair = z.as_array()?;
            out[[i, j]] = num_complex::Complex64::new(pair.first()?.as_f64()?, pair.get(1)?.as_f64()?);
        }
    }
    Some(out)
}
