//! Cross-modal attention, global context aggregation, and the residual
//! conditioning that feeds the context back into the visual embedding.

use serde::{Deserialize, Serialize};

use crate::embedding::{dot, l2_normalize, mean, stable_softmax, Embedding, Matrix};
use crate::error::{check_dim, Error, Result};

/// Query/key/value projections, each `d × d_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionParams {
    pub w_q: Matrix,
    pub w_k: Matrix,
    pub w_v: Matrix,
}

impl AttentionParams {
    /// Identity projections (`d_k = d`); the untrained default.
    pub fn identity(d: usize) -> Self {
        Self {
            w_q: Matrix::identity(d),
            w_k: Matrix::identity(d),
            w_v: Matrix::identity(d),
        }
    }

    pub fn new(w_q: Matrix, w_k: Matrix, w_v: Matrix) -> Result<Self> {
        let shape = w_q.shape();
        if shape.0 == 0 || shape.1 == 0 {
            return Err(Error::InvalidShape("attention projections must be nonempty".into()));
        }
        if w_k.shape() != shape || w_v.shape() != shape {
            return Err(Error::InvalidShape(format!(
                "attention projections disagree: q {:?}, k {:?}, v {:?}",
                shape,
                w_k.shape(),
                w_v.shape()
            )));
        }
        Ok(Self { w_q, w_k, w_v })
    }

    pub fn input_dim(&self) -> usize {
        self.w_q.rows()
    }

    pub fn d_k(&self) -> usize {
        self.w_q.cols()
    }
}

/// Row-stochastic `n × m` attention weights plus the attended values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionMap {
    pub weights: Vec<Vec<f64>>,
    pub attended: Vec<Vec<f64>>,
}

impl AttentionMap {
    pub fn n_objects(&self) -> usize {
        self.weights.len()
    }

    pub fn n_tokens(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }
}

/// Objects query text tokens: `softmax(Q Kᵀ / √d_k) · V`.
pub fn cross_attention(params: &AttentionParams, objects: &[Embedding], tokens: &[Embedding]) -> Result<AttentionMap> {
    if objects.is_empty() {
        return Err(Error::EmptyInput("attention objects"));
    }
    if tokens.is_empty() {
        return Err(Error::EmptyInput("attention tokens"));
    }
    let d = params.input_dim();
    for e in objects.iter().chain(tokens) {
        check_dim(d, e.dim())?;
    }
    let project =
        |m: &Matrix, xs: &[Embedding]| -> Result<Vec<Vec<f64>>> { xs.iter().map(|x| m.left_mul(x.values())).collect() };
    let q = project(&params.w_q, objects)?;
    let k = project(&params.w_k, tokens)?;
    let v = project(&params.w_v, tokens)?;
    let scale = (params.d_k() as f64).sqrt();

    let mut weights = Vec::with_capacity(q.len());
    let mut attended = Vec::with_capacity(q.len());
    for qi in &q {
        let logits: Vec<f64> = k.iter().map(|kj| dot(qi, kj)).collect();
        let row = stable_softmax(&logits, scale)?.probs().to_vec();
        let mut out = vec![0.0; params.d_k()];
        for (w, vj) in row.iter().zip(&v) {
            for (o, x) in out.iter_mut().zip(vj) {
                *o += w * x;
            }
        }
        weights.push(row);
        attended.push(out);
    }
    Ok(AttentionMap { weights, attended })
}

/// Maps attended rows (`d_k`) back to the embedding dimension through `w_vᵀ`.
pub fn reproject_attended(params: &AttentionParams, map: &AttentionMap) -> Result<Vec<Embedding>> {
    map.attended
        .iter()
        .map(|row| {
            let back = params.w_v.right_mul(row)?;
            Embedding::new(back)
        })
        .collect()
}

/// Global context `c` and the linguistic weight that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextVector {
    pub c: Embedding,
    pub alpha: f64,
}

/// `c = mean(objects) + alpha · t_scene`, left unnormalized.
pub fn aggregate_context(objects: &[Embedding], t_scene: &Embedding, alpha: f64) -> Result<ContextVector> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::ConfigInvalid(format!("alpha must be >= 0, got {alpha}")));
    }
    let avg = mean(objects)?;
    let c = avg.add_scaled(t_scene, alpha)?;
    Ok(ContextVector { c, alpha })
}

/// `normalize(global_v + beta · c)`; `beta == 0` returns `global_v` as is.
pub fn contextualize(global_v: &Embedding, ctx: &ContextVector, beta: f64) -> Result<Embedding> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::ConfigInvalid(format!("beta must be >= 0, got {beta}")));
    }
    check_dim(global_v.dim(), ctx.c.dim())?;
    if beta == 0.0 {
        return Ok(global_v.clone());
    }
    l2_normalize(&global_v.add_scaled(&ctx.c, beta)?)
}

/// Share of the conditioned vector contributed by context:
/// `beta‖c‖ / (‖v‖ + beta‖c‖)`.
pub fn context_weight(global_v: &Embedding, ctx: &ContextVector, beta: f64) -> f64 {
    let vc = beta * ctx.c.norm();
    let total = global_v.norm() + vc;
    if total > 0.0 {
        vc / total
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn emb(v: &[f64]) -> Embedding {
        Embedding::new(v.to_vec()).unwrap()
    }

    #[test]
    fn identical_tokens_give_uniform_rows() {
        let p = AttentionParams::identity(3);
        let objs = vec![emb(&[1.0, 0.0, 0.0]), emb(&[0.0, 0.6, 0.8])];
        let t = emb(&[0.2, -0.4, 0.1]);
        let map = cross_attention(&p, &objs, &[t.clone(), t.clone(), t.clone()]).unwrap();
        for (row, att) in map.weights.iter().zip(&map.attended) {
            for w in row {
                assert!((w - 1.0 / 3.0).abs() < 1e-12);
            }
            for (a, x) in att.iter().zip(t.values()) {
                assert!((a - x).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_token_gets_all_weight() {
        let p = AttentionParams::identity(2);
        let objs = vec![emb(&[1.0, 0.0]), emb(&[0.0, 1.0]), emb(&[-1.0, 0.3])];
        let t = emb(&[0.6, 0.8]);
        let map = cross_attention(&p, &objs, std::slice::from_ref(&t)).unwrap();
        for (row, att) in map.weights.iter().zip(&map.attended) {
            assert_eq!(row, &vec![1.0]);
            assert_eq!(att.as_slice(), t.values());
        }
    }

    #[test]
    fn two_by_two_hand_case() {
        let p = AttentionParams::identity(2);
        let objs = vec![emb(&[1.0, 0.0]), emb(&[0.0, 1.0])];
        let toks = vec![emb(&[1.0, 0.0]), emb(&[0.6, 0.8])];
        let map = cross_attention(&p, &objs, &toks).unwrap();
        // row 0 logits [1, 0.6] / √2, row 1 logits [0, 0.8] / √2
        let s = 2f64.sqrt();
        let soft = |a: f64, b: f64| {
            let ea = (a / s).exp();
            let eb = (b / s).exp();
            [ea / (ea + eb), eb / (ea + eb)]
        };
        let r0 = soft(1.0, 0.6);
        let r1 = soft(0.0, 0.8);
        for (got, want) in map.weights[0].iter().zip(r0) {
            assert!((got - want).abs() < 1e-9);
        }
        for (got, want) in map.weights[1].iter().zip(r1) {
            assert!((got - want).abs() < 1e-9);
        }
        let att0 = [r0[0] + 0.6 * r0[1], 0.8 * r0[1]];
        for (got, want) in map.attended[0].iter().zip(att0) {
            assert!((got - want).abs() < 1e-9);
        }
    }

    #[test]
    fn attention_errors() {
        let p = AttentionParams::identity(2);
        let e = emb(&[1.0, 0.0]);
        assert!(matches!(
            cross_attention(&p, &[], std::slice::from_ref(&e)),
            Err(Error::EmptyInput(_))
        ));
        assert!(matches!(
            cross_attention(&p, std::slice::from_ref(&e), &[]),
            Err(Error::EmptyInput(_))
        ));
        assert!(matches!(
            cross_attention(&p, &[e], &[emb(&[1.0, 0.0, 0.0])]),
            Err(Error::DimMismatch { .. })
        ));
    }

    #[test]
    fn context_examples() {
        let v1 = emb(&[0.3, -0.4]);
        let ctx = aggregate_context(std::slice::from_ref(&v1), &emb(&[1.0, 1.0]), 0.0).unwrap();
        assert_eq!(ctx.c, v1);

        let h = 1.0 / 2f64.sqrt();
        let ctx = aggregate_context(&[emb(&[1.0, 0.0]), emb(&[0.0, 1.0])], &emb(&[h, h]), 1.0).unwrap();
        for x in ctx.c.values() {
            assert!((x - (0.5 + h)).abs() < 1e-12);
        }
        assert!(matches!(
            aggregate_context(&[], &emb(&[h, h]), 1.0),
            Err(Error::EmptyInput(_))
        ));
        assert!(aggregate_context(&[v1], &emb(&[1.0, 0.0]), -1.0).is_err());
    }

    #[test]
    fn contextualize_examples() {
        let g = emb(&[1.0, 0.0]);
        let ctx = ContextVector {
            c: emb(&[0.0, 1.0]),
            alpha: 0.5,
        };
        assert_eq!(contextualize(&g, &ctx, 0.0).unwrap(), g);
        let out = contextualize(&g, &ctx, 1.0).unwrap();
        let h = 1.0 / 2f64.sqrt();
        assert!((out.values()[0] - h).abs() < 1e-12);
        assert!((out.values()[1] - h).abs() < 1e-12);

        let same = ContextVector {
            c: g.clone(),
            alpha: 0.0,
        };
        assert_eq!(contextualize(&g, &same, 1.0).unwrap(), g);

        let opposite = ContextVector {
            c: emb(&[-1.0, 0.0]),
            alpha: 0.0,
        };
        assert!(matches!(contextualize(&g, &opposite, 1.0), Err(Error::ZeroVector)));
    }

    #[test]
    fn attended_rows_map_back_to_embedding_dim() {
        let w = Matrix::from_vec(3, 2, vec![1.0, 0.0, 0.0, 1.0, 1.0, 1.0]).unwrap();
        let p = AttentionParams::new(w.clone(), w.clone(), w).unwrap();
        let map = cross_attention(&p, &[emb(&[1.0, 0.0, 0.0])], &[emb(&[0.0, 1.0, 0.0])]).unwrap();
        let back = reproject_attended(&p, &map).unwrap();
        assert_eq!(back[0].dim(), 3);
        // attended = [0, 1]; w_v · [0, 1] = [0, 1, 1]
        assert_eq!(back[0].values(), &[0.0, 1.0, 1.0]);
    }
}
