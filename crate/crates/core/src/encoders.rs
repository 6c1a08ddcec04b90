//! Small linear stand-ins for the vision and language encoders.
//!
//! The image encoder is a single projection `features · w_vision`. The text
//! encoder looks each token up in `token_table`, projects it through
//! `w_text`, and pools by averaging the projections before normalizing.
//! Both are trainable with [`crate::training`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embedding::{l2_normalize, Embedding, Matrix};
use crate::error::{check_dim, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderParams {
    /// `f × d`: raw object features to embedding space.
    pub w_vision: Matrix,
    /// `vocab × d`: one row per token id.
    pub token_table: Matrix,
    /// `d × d`: projection applied to every token row.
    pub w_text: Matrix,
    pub seed: u64,
}

impl EncoderParams {
    /// Draws parameters from a seeded ChaCha8 stream.
    ///
    /// `w_vision` is uniform on `[-1/√f, 1/√f]`; `token_table` and `w_text`
    /// are uniform on `[-1/√d, 1/√d]`. Matrices are filled in that order,
    /// row-major.
    pub fn init(f: usize, d: usize, vocab: usize, seed: u64) -> Result<Self> {
        if f == 0 || d == 0 || vocab == 0 {
            return Err(Error::InvalidShape(format!(
                "encoder dims must be positive (f={f}, d={d}, vocab={vocab})"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound_f = 1.0 / (f as f64).sqrt();
        let bound_d = 1.0 / (d as f64).sqrt();
        let w_vision = Matrix::from_fn(f, d, |_, _| rng.random_range(-bound_f..=bound_f));
        let token_table = Matrix::from_fn(vocab, d, |_, _| rng.random_range(-bound_d..=bound_d));
        let w_text = Matrix::from_fn(d, d, |_, _| rng.random_range(-bound_d..=bound_d));
        Ok(Self {
            w_vision,
            token_table,
            w_text,
            seed,
        })
    }

    /// Assembles parameters from explicit matrices after checking shapes.
    pub fn from_parts(w_vision: Matrix, token_table: Matrix, w_text: Matrix, seed: u64) -> Result<Self> {
        let d = w_vision.cols();
        if w_vision.rows() == 0 || d == 0 || token_table.rows() == 0 {
            return Err(Error::InvalidShape("encoder matrices must be nonempty".into()));
        }
        check_dim(d, token_table.cols())?;
        if w_text.shape() != (d, d) {
            return Err(Error::InvalidShape(format!(
                "w_text must be {d}x{d}, got {:?}",
                w_text.shape()
            )));
        }
        Ok(Self {
            w_vision,
            token_table,
            w_text,
            seed,
        })
    }

    pub fn feature_dim(&self) -> usize {
        self.w_vision.rows()
    }

    pub fn embed_dim(&self) -> usize {
        self.w_vision.cols()
    }

    pub fn vocab(&self) -> usize {
        self.token_table.rows()
    }

    pub fn param_count(&self) -> usize {
        self.w_vision.as_slice().len() + self.token_table.as_slice().len() + self.w_text.as_slice().len()
    }

    /// Unnormalized projection `features · w_vision`.
    pub(crate) fn project_image(&self, features: &[f64]) -> Result<Vec<f64>> {
        self.w_vision.left_mul(features)
    }

    /// Unnormalized projection of one token: `token_table[id] · w_text`.
    pub(crate) fn project_token(&self, id: usize) -> Result<Vec<f64>> {
        if id >= self.vocab() {
            return Err(Error::TokenOutOfRange {
                id,
                vocab: self.vocab(),
            });
        }
        self.w_text.left_mul(self.token_table.row(id))
    }
}

/// Raw inputs for one scene: per-object features and per-prompt token ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawScene {
    pub object_features: Vec<Vec<f64>>,
    pub token_ids: Vec<Vec<usize>>,
}

pub fn encode_image(params: &EncoderParams, features: &[f64]) -> Result<Embedding> {
    if features.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("image features"));
    }
    let projected = params.project_image(features)?;
    l2_normalize(&Embedding::from_raw(projected))
}

/// Output of the text encoder for one prompt.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedText {
    pub pooled: Embedding,
    pub tokens: Vec<Embedding>,
}

pub fn encode_text(params: &EncoderParams, token_ids: &[usize]) -> Result<EncodedText> {
    if token_ids.is_empty() {
        return Err(Error::EmptyInput("token sequence"));
    }
    let projections = token_ids
        .iter()
        .map(|&id| params.project_token(id))
        .collect::<Result<Vec<_>>>()?;
    let d = params.embed_dim();
    let mut sum = vec![0.0; d];
    for p in &projections {
        for (s, x) in sum.iter_mut().zip(p) {
            *s += x;
        }
    }
    let m = token_ids.len() as f64;
    let pooled = l2_normalize(&Embedding::from_raw(sum.into_iter().map(|s| s / m).collect()))?;
    let tokens = projections
        .into_iter()
        .map(|p| l2_normalize(&Embedding::from_raw(p)))
        .collect::<Result<Vec<_>>>()?;
    Ok(EncodedText { pooled, tokens })
}

/// Encodes every object of a raw scene.
pub fn encode_objects(params: &EncoderParams, scene: &RawScene) -> Result<Vec<Embedding>> {
    if scene.object_features.is_empty() {
        return Err(Error::EmptyInput("scene objects"));
    }
    scene.object_features.iter().map(|f| encode_image(params, f)).collect()
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;

    #[test]
    fn init_is_deterministic_and_shaped() {
        let a = EncoderParams::init(4, 2, 8, 7).unwrap();
        let b = EncoderParams::init(4, 2, 8, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.w_vision.shape(), (4, 2));
        assert_eq!(a.token_table.shape(), (8, 2));
        assert_eq!(a.w_text.shape(), (2, 2));
        let c = EncoderParams::init(4, 2, 8, 8).unwrap();
        assert_ne!(a.w_vision, c.w_vision);
        assert!(matches!(EncoderParams::init(0, 2, 8, 7), Err(Error::InvalidShape(_))));
    }

    #[test]
    fn init_respects_bounds() {
        let p = EncoderParams::init(16, 32, 64, 3).unwrap();
        assert!(p.w_vision.as_slice().iter().all(|x| x.abs() <= 0.25));
        let bd = 1.0 / 32f64.sqrt();
        assert!(p.token_table.as_slice().iter().all(|x| x.abs() <= bd));
        assert!(p.w_text.as_slice().iter().all(|x| x.abs() <= bd));
    }

    #[test]
    fn identity_projection_normalizes() {
        let p = EncoderParams::from_parts(Matrix::identity(2), Matrix::identity(2), Matrix::identity(2), 0).unwrap();
        let e = encode_image(&p, &[3.0, 4.0]).unwrap();
        assert!((e.values()[0] - 0.6).abs() < 1e-12);
        assert!((e.values()[1] - 0.8).abs() < 1e-12);
        assert!(matches!(encode_image(&p, &[0.0, 0.0]), Err(Error::ZeroVector)));
        assert!(matches!(encode_image(&p, &[1.0]), Err(Error::DimMismatch { .. })));
    }

    #[test]
    fn text_pooling_edge_cases() {
        let p = EncoderParams::init(4, 6, 10, 1).unwrap();
        let one = encode_text(&p, &[3]).unwrap();
        assert_eq!(one.tokens.len(), 1);
        for (a, b) in one.pooled.values().iter().zip(one.tokens[0].values()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(matches!(encode_text(&p, &[]), Err(Error::EmptyInput(_))));
        assert!(matches!(
            encode_text(&p, &[10]),
            Err(Error::TokenOutOfRange { id: 10, vocab: 10 })
        ));

        // rows 0 and 1 project to opposite vectors, so their mean vanishes
        let table = Matrix::from_vec(2, 2, vec![1.0, 2.0, -1.0, -2.0]).unwrap();
        let p = EncoderParams::from_parts(Matrix::identity(2), table, Matrix::identity(2), 0).unwrap();
        assert!(matches!(encode_text(&p, &[0, 1]), Err(Error::ZeroVector)));
    }

    #[test]
    fn text_matches_straight_line_products() {
        let p = EncoderParams::init(5, 4, 9, 11).unwrap();
        let out = encode_text(&p, &[1, 2, 3]).unwrap();
        let mut rows = Vec::new();
        for id in [1usize, 2, 3] {
            let mut r = [0.0f64; 4];
            for j in 0..4 {
                for k in 0..4 {
                    r[j] += p.token_table.get(id, k) * p.w_text.get(k, j);
                }
            }
            rows.push(r);
        }
        for (tok, r) in out.tokens.iter().zip(&rows) {
            let n = r.iter().map(|x| x * x).sum::<f64>().sqrt();
            for j in 0..4 {
                assert!((tok.values()[j] - r[j] / n).abs() < 1e-12);
            }
        }
        let mut mean = [0.0f64; 4];
        for r in &rows {
            for j in 0..4 {
                mean[j] += r[j] / 3.0;
            }
        }
        let n = mean.iter().map(|x| x * x).sum::<f64>().sqrt();
        for j in 0..4 {
            assert!((out.pooled.values()[j] - mean[j] / n).abs() < 1e-12);
        }
    }
}
