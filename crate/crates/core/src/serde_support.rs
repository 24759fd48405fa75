//! Serde adapters for dynamically sized nalgebra values, used by the message
//! structs' JSON debug encoding. Matrices serialize as
//! `{ "rows": r, "cols": c, "data": [..] }` with row-major data.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::AgentId;

#[derive(Serialize, Deserialize)]
struct MatrixRepr {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl MatrixRepr {
    fn from_matrix(m: &DMatrix<f64>) -> Self {
        let mut data = Vec::with_capacity(m.nrows() * m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                data.push(m[(i, j)]);
            }
        }
        MatrixRepr { rows: m.nrows(), cols: m.ncols(), data }
    }

    fn into_matrix<E: serde::de::Error>(self) -> Result<DMatrix<f64>, E> {
        if self.data.len() != self.rows * self.cols {
            return Err(E::custom("matrix data length does not match shape"));
        }
        Ok(DMatrix::from_row_slice(self.rows, self.cols, &self.data))
    }
}

pub mod dmatrix {
    use super::*;

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        MatrixRepr::from_matrix(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        MatrixRepr::deserialize(d)?.into_matrix()
    }
}

pub mod dvector {
    use super::*;

    pub fn serialize<S: Serializer>(v: &DVector<f64>, s: S) -> Result<S::Ok, S::Error> {
        let data: Vec<f64> = v.iter().cloned().collect();
        data.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DVector<f64>, D::Error> {
        let data = Vec::<f64>::deserialize(d)?;
        Ok(DVector::from_vec(data))
    }
}

/// `Vec<(AgentId, DMatrix)>` entries, e.g. registry rows and gain lists.
pub mod tagged_blocks {
    use super::*;

    pub fn serialize<S: Serializer>(
        list: &Vec<(AgentId, DMatrix<f64>)>,
        s: S,
    ) -> Result<S::Ok, S::Error> {
        let repr: Vec<(AgentId, MatrixRepr)> = list
            .iter()
            .map(|(uid, m)| (*uid, MatrixRepr::from_matrix(m)))
            .collect();
        repr.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> Result<Vec<(AgentId, DMatrix<f64>)>, D::Error> {
        let repr = Vec::<(AgentId, MatrixRepr)>::deserialize(d)?;
        repr.into_iter()
            .map(|(uid, m)| Ok((uid, m.into_matrix::<D::Error>()?)))
            .collect()
    }
}
