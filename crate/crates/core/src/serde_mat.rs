//! Row-list (de)serialization for nalgebra matrices and vectors.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn from_rows<E: serde::de::Error>(rows: Vec<Vec<f64>>, ncols_hint: usize) -> Result<DMatrix<f64>, E> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(ncols_hint, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(E::custom("ragged matrix rows"));
    }
    Ok(DMatrix::from_row_iterator(nrows, ncols, rows.into_iter().flatten()))
}

pub mod matrix_map {
    use super::*;

    pub fn serialize<S: Serializer>(m: &BTreeMap<String, DMatrix<f64>>, s: S) -> Result<S::Ok, S::Error> {
        let rows: BTreeMap<&String, Vec<Vec<f64>>> = m.iter().map(|(k, v)| (k, to_rows(v))).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<String, DMatrix<f64>>, D::Error> {
        let raw = BTreeMap::<String, Vec<Vec<f64>>>::deserialize(d)?;
        raw.into_iter().map(|(k, v)| from_rows(v, 0).map(|m| (k, m))).collect()
    }
}

pub mod vector_map {
    use super::*;

    pub fn serialize<S: Serializer>(m: &BTreeMap<String, DVector<f64>>, s: S) -> Result<S::Ok, S::Error> {
        let raw: BTreeMap<&String, &[f64]> = m.iter().map(|(k, v)| (k, v.as_slice())).collect();
        raw.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<String, DVector<f64>>, D::Error> {
        let raw = BTreeMap::<String, Vec<f64>>::deserialize(d)?;
        if raw.values().any(|v| v.iter().any(|x| !x.is_finite())) {
            return Err(D::Error::custom("non-finite latent entry"));
        }
        Ok(raw.into_iter().map(|(k, v)| (k, DVector::from_vec(v))).collect())
    }
}
