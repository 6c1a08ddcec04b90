//! Dimension-checked vector primitives shared by every other module.
//!
//! Arithmetic is 64-bit throughout. Embeddings only become 32-bit when they
//! are written to a bundle file.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Norms at or below this are treated as zero.
pub const ZERO_NORM: f64 = 1e-12;

/// A finite, nonempty real vector living in the shared embedding space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Embedding(Vec<f64>);

impl Embedding {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput("embedding values"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("embedding"));
        }
        Ok(Self(values))
    }

    /// Caller guarantees a nonempty, finite vector.
    pub(crate) fn from_raw(values: Vec<f64>) -> Self {
        debug_assert!(!values.is_empty() && values.iter().all(|v| v.is_finite()));
        Self(values)
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim.max(1)])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        dot(&self.0, &self.0).sqrt()
    }

    pub fn is_unit(&self, tol: f64) -> bool {
        (self.norm() - 1.0).abs() <= tol
    }

    pub fn dot(&self, other: &Embedding) -> Result<f64> {
        check_dim(self.dim(), other.dim())?;
        Ok(dot(&self.0, &other.0))
    }

    pub fn scaled(&self, a: f64) -> Embedding {
        Embedding(self.0.iter().map(|x| x * a).collect())
    }

    /// `self + a * other`.
    pub fn add_scaled(&self, other: &Embedding, a: f64) -> Result<Embedding> {
        check_dim(self.dim(), other.dim())?;
        Ok(Embedding(self.0.iter().zip(&other.0).map(|(x, y)| x + a * y).collect()))
    }
}

impl TryFrom<Vec<f64>> for Embedding {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Embedding::new(values)
    }
}

impl From<Embedding> for Vec<f64> {
    fn from(e: Embedding) -> Self {
        e.0
    }
}

/// Plain left-to-right dot product. Summation order is fixed.
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn l2_normalize(e: &Embedding) -> Result<Embedding> {
    let norm = e.norm();
    if norm <= ZERO_NORM {
        return Err(Error::ZeroVector);
    }
    Ok(Embedding(e.0.iter().map(|x| x / norm).collect()))
}

/// Normalizes unless the norm is already within 1e-6 of one, so vectors that
/// were normalized before a 32-bit round trip keep their exact values.
pub fn ensure_unit(e: &Embedding) -> Result<Embedding> {
    if e.is_unit(1e-6) {
        Ok(e.clone())
    } else {
        l2_normalize(e)
    }
}

/// Rounds every coordinate to the nearest 32-bit float.
pub fn snap_f32(e: &Embedding) -> Embedding {
    Embedding(e.0.iter().map(|&x| f64::from(x as f32)).collect())
}

/// Arithmetic mean of equally sized embeddings.
pub fn mean(items: &[Embedding]) -> Result<Embedding> {
    let first = items.first().ok_or(Error::EmptyInput("mean of embeddings"))?;
    let mut acc = vec![0.0; first.dim()];
    for e in items {
        check_dim(first.dim(), e.dim())?;
        for (a, x) in acc.iter_mut().zip(e.values()) {
            *a += x;
        }
    }
    let n = items.len() as f64;
    Ok(Embedding(acc.into_iter().map(|a| a / n).collect()))
}

/// Cosine similarity, clamped to `[-1, 1]` against rounding.
pub fn cosine_sim(v: &Embedding, t: &Embedding) -> Result<f64> {
    check_dim(v.dim(), t.dim())?;
    let nv = v.norm();
    let nt = t.norm();
    if nv <= ZERO_NORM || nt <= ZERO_NORM {
        return Err(Error::ZeroVector);
    }
    Ok((dot(&v.0, &t.0) / (nv * nt)).clamp(-1.0, 1.0))
}

/// Dense matrix of cosine similarities, `entries[i][j] = cos(left[i], right[j])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimMatrix {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<Vec<f64>>,
}

impl SimMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i][j]
    }
}

pub fn pairwise_sim(left: &[Embedding], right: &[Embedding]) -> Result<SimMatrix> {
    if left.is_empty() || right.is_empty() {
        return Err(Error::EmptyInput("pairwise similarity operands"));
    }
    let dim = left[0].dim();
    for e in left.iter().chain(right) {
        check_dim(dim, e.dim())?;
    }
    let entries = left
        .par_iter()
        .map(|l| right.iter().map(|r| cosine_sim(l, r)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    Ok(SimMatrix {
        rows: left.len(),
        cols: right.len(),
        entries,
    })
}

/// A discrete distribution: nonnegative entries summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    /// Validates nonnegativity and unit mass (tolerance 1e-6).
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::EmptyInput("probability vector"));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::NonFinite("probability vector"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-6 {
            return Err(Error::ConfigInvalid(format!("probabilities sum to {total}, not 1")));
        }
        Ok(Self(probs))
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Index of the largest probability; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        argmax(&self.0)
    }
}

/// Lowest index among maximal entries.
pub(crate) fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in xs.iter().enumerate() {
        if *x > xs[best] {
            best = i;
        }
    }
    best
}

/// Softmax of `scores / tau` with max-subtraction.
pub fn stable_softmax(scores: &[f64], tau: f64) -> Result<ProbVector> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidTau(tau));
    }
    if scores.is_empty() {
        return Err(Error::EmptyInput("softmax scores"));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("softmax scores"));
    }
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| ((s - max) / tau).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(ProbVector(exps.into_iter().map(|e| e / total).collect()))
}

/// Row-major dense matrix used for encoder and attention parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidShape(format!(
                "{} values cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Row vector times matrix: `x · self`, with `x.len() == rows`.
    pub fn left_mul(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.rows, x.len())?;
        let mut out = vec![0.0; self.cols];
        for (i, xi) in x.iter().enumerate() {
            for (o, w) in out.iter_mut().zip(self.row(i)) {
                *o += xi * w;
            }
        }
        Ok(out)
    }

    /// Matrix times column vector: `self · y`, with `y.len() == cols`.
    pub fn right_mul(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.cols, y.len())?;
        Ok((0..self.rows).map(|i| dot(self.row(i), y)).collect())
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn emb(v: &[f64]) -> Embedding {
        Embedding::new(v.to_vec()).unwrap()
    }

    #[test]
    fn normalize_examples() {
        let n = l2_normalize(&emb(&[3.0, 4.0])).unwrap();
        assert!((n.values()[0] - 0.6).abs() < 1e-12);
        assert!((n.values()[1] - 0.8).abs() < 1e-12);
        assert_eq!(l2_normalize(&emb(&[1.0, 0.0])).unwrap().values(), &[1.0, 0.0]);
        assert!(matches!(l2_normalize(&emb(&[0.0, 0.0])), Err(Error::ZeroVector)));
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine_sim(&emb(&[1.0, 0.0]), &emb(&[1.0, 0.0])).unwrap(), 1.0);
        assert_eq!(cosine_sim(&emb(&[1.0, 0.0]), &emb(&[0.0, 1.0])).unwrap(), 0.0);
        let c = cosine_sim(&emb(&[1.0, 1.0]), &emb(&[1.0, 0.0])).unwrap();
        assert!((c - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!(matches!(
            cosine_sim(&emb(&[1.0, 0.0]), &emb(&[1.0, 0.0, 0.0])),
            Err(Error::DimMismatch { .. })
        ));
        assert!(matches!(
            cosine_sim(&emb(&[0.0, 0.0]), &emb(&[1.0, 0.0])),
            Err(Error::ZeroVector)
        ));
    }

    #[test]
    fn pairwise_small_cases() {
        let m = pairwise_sim(&[emb(&[1.0, 0.0])], &[emb(&[1.0, 0.0]), emb(&[0.0, 1.0])]).unwrap();
        assert_eq!(m.entries, vec![vec![1.0, 0.0]]);
        let xs = vec![emb(&[1.0, 2.0]), emb(&[-3.0, 0.5]), emb(&[0.2, 0.2])];
        let m = pairwise_sim(&xs, &xs).unwrap();
        for i in 0..3 {
            assert!((m.get(i, i) - 1.0).abs() < 1e-12);
            for j in 0..3 {
                assert_eq!(m.get(i, j), m.get(j, i));
            }
        }
        assert!(matches!(pairwise_sim(&[], &xs), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn softmax_examples() {
        assert_eq!(stable_softmax(&[0.0, 0.0], 1.0).unwrap().probs(), &[0.5, 0.5]);
        let p = stable_softmax(&[0.8, 0.6], 0.1).unwrap();
        assert!((p.probs()[0] - 0.88079708).abs() < 1e-8);
        assert!((p.probs()[1] - 0.11920292).abs() < 1e-8);
        assert_eq!(stable_softmax(&[1000.0, 1000.0], 1.0).unwrap().probs(), &[0.5, 0.5]);
        assert!(matches!(stable_softmax(&[1.0], 0.0), Err(Error::InvalidTau(_))));
        assert!(matches!(stable_softmax(&[1.0], -1.0), Err(Error::InvalidTau(_))));
        assert!(matches!(stable_softmax(&[], 1.0), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn softmax_sharpens_at_low_temperature() {
        let p = stable_softmax(&[0.5, 0.4, -0.2], 1e-4).unwrap();
        assert!(p.probs()[0] > 0.999);
    }

    #[test]
    fn matrix_products() {
        let m = Matrix::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(m.left_mul(&[1.0, 1.0]).unwrap(), vec![5.0, 7.0, 9.0]);
        assert_eq!(m.right_mul(&[1.0, 0.0, 1.0]).unwrap(), vec![4.0, 10.0]);
        assert!(Matrix::from_vec(2, 2, vec![1.0]).is_err());
    }

    #[test]
    fn embedding_rejects_non_finite() {
        assert!(Embedding::new(vec![f64::NAN]).is_err());
        assert!(Embedding::new(vec![]).is_err());
        let parsed: std::result::Result<Embedding, _> = serde_json::from_str("[]");
        assert!(parsed.is_err());
    }
}
