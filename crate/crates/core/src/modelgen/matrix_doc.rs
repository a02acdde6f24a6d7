//! Row-major complex matrix serialization.

use crate::linalg::CMat;
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Serialize, Deserialize)]
struct MatrixDoc {
    rows: usize,
    cols: usize,
    /// `[re, im]` pairs, row-major.
    data: Vec<[f64; 2]>,
}

pub fn serialize<S: Serializer>(m: &CMat, s: S) -> Result<S::Ok, S::Error> {
    let mut data = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            data.push([m[(i, j)].re, m[(i, j)].im]);
        }
    }
    MatrixDoc { rows: m.nrows(), cols: m.ncols(), data }.serialize(s)
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CMat, D::Error> {
    let doc = MatrixDoc::deserialize(d)?;
    if doc.data.len() != doc.rows * doc.cols {
        return Err(serde::de::Error::custom(format!(
            "matrix data has {} entries, expected {}x{}",
            doc.data.len(),
            doc.rows,
            doc.cols
        )));
    }
    Ok(CMat::from_fn(doc.rows, doc.cols, |i, j| {
        let [re, im] = doc.data[i * doc.cols + j];
        Complex64::new(re, im)
    }))
}

pub mod named {
    use super::*;

    #[derive(Serialize, Deserialize)]
    struct Entry {
        label: String,
        #[serde(with = "super")]
        matrix: CMat,
    }

    pub fn serialize<S: Serializer>(v: &[(String, CMat)], s: S) -> Result<S::Ok, S::Error> {
        let entries: Vec<Entry> = v.iter().map(|(l, m)| Entry { label: l.clone(), matrix: m.clone() }).collect();
        entries.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<(String, CMat)>, D::Error> {
        let entries = Vec::<Entry>::deserialize(d)?;
        Ok(entries.into_iter().map(|e| (e.label, e.matrix)).collect())
    }
}
