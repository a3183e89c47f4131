//! Parameter checkpoints: a JSON object mapping names to
//! `{rows, cols, data}` with every value written to 17 significant digits,
//! which round-trips `f64` exactly.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub type ParamMap = BTreeMap<String, Matrix>;

fn write_number(out: &mut String, v: f64) {
    // `{:e}` with 16 fractional digits gives 17 significant digits and is
    // valid JSON number syntax.
    write!(out, "{v:.16e}").expect("writing to a String cannot fail");
}

/// JSON text for one matrix.
pub fn matrix_to_json(m: &Matrix) -> String {
    let mut out = String::with_capacity(32 + 24 * m.as_slice().len());
    write!(out, "{{\"rows\":{},\"cols\":{},\"data\":[", m.rows(), m.cols()).unwrap();
    for (k, v) in m.as_slice().iter().enumerate() {
        if k > 0 {
            out.push(',');
        }
        write_number(&mut out, *v);
    }
    out.push_str("]}");
    out
}

/// JSON text for a whole parameter map.
pub fn params_to_json(params: &ParamMap) -> Result<String> {
    let mut out = String::from("{");
    for (k, (name, m)) in params.iter().enumerate() {
        if !m.is_finite() {
            return Err(Error::Checkpoint(format!("parameter {name:?} has non-finite values")));
        }
        if k > 0 {
            out.push(',');
        }
        out.push_str(&serde_json::to_string(name)?);
        out.push(':');
        out.push_str(&matrix_to_json(m));
    }
    out.push('}');
    Ok(out)
}

#[derive(Deserialize)]
struct RawMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

pub fn params_from_value(value: serde_json::Value) -> Result<ParamMap> {
    let raw: BTreeMap<String, RawMatrix> = serde_json::from_value(value)?;
    raw.into_iter()
        .map(|(name, m)| {
            let mat =
                Matrix::from_vec(m.rows, m.cols, m.data).map_err(|e| Error::Checkpoint(format!("{name}: {e}")))?;
            Ok((name, mat))
        })
        .collect()
}

pub fn params_from_json(text: &str) -> Result<ParamMap> {
    params_from_value(serde_json::from_str(text)?)
}

pub fn save_params(path: impl AsRef<Path>, params: &ParamMap) -> Result<()> {
    fs::write(path, params_to_json(params)?)?;
    Ok(())
}

pub fn load_params(path: impl AsRef<Path>) -> Result<ParamMap> {
    params_from_json(&fs::read_to_string(path)?)
}

/// Removes a required entry from a loaded map.
pub fn take_param(params: &mut ParamMap, name: &str) -> Result<Matrix> {
    params
        .remove(name)
        .ok_or_else(|| Error::Checkpoint(format!("missing parameter {name:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(data in proptest::collection::vec(proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO, 1..40)) {
            let n = data.len();
            let mut params = ParamMap::new();
            params.insert("w".into(), Matrix::from_vec(1, n, data.clone()).unwrap());
            let back = params_from_json(&params_to_json(&params).unwrap()).unwrap();
            let got = back["w"].as_slice();
            for (a, b) in data.iter().zip(got) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn seventeen_significant_digits() {
        let mut s = String::new();
        write_number(&mut s, 0.1);
        assert_eq!(s, "1.0000000000000001e-1");
    }

    #[test]
    fn missing_and_malformed_entries() {
        let mut p = params_from_json(r#"{"a":{"rows":1,"cols":2,"data":[1,2]}}"#).unwrap();
        assert!(take_param(&mut p, "b").is_err());
        assert!(params_from_json(r#"{"a":{"rows":2,"cols":2,"data":[1,2]}}"#).is_err());
    }
}
