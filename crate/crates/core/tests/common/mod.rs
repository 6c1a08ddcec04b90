//! Independent oracles shared by the integration tests. Nothing here calls
//! into the code paths it is used to check.
#![allow(dead_code, clippy::needless_range_loop)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vlscene::embedding::Matrix;
use vlscene::encoders::EncoderParams;
use vlscene::training::{contrastive_loss, Batch, Gradients, Pair};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_batch(rng: &mut ChaCha8Rng, f: usize, vocab: usize, b: usize) -> Batch {
    let pairs = (0..b)
        .map(|_| {
            let m = rng.random_range(1..=4);
            Pair {
                features: (0..f).map(|_| rng.random_range(-1.0..1.0)).collect(),
                token_ids: (0..m).map(|_| rng.random_range(0..vocab)).collect(),
            }
        })
        .collect();
    Batch::new(pairs)
}

/// Straight-line InfoNCE: explicit loops for every product and norm.
pub fn reference_loss(p: &EncoderParams, batch: &Batch, tau: f64) -> f64 {
    let d = p.embed_dim();
    let unit = |x: Vec<f64>| {
        let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        x.into_iter().map(|v| v / n).collect::<Vec<f64>>()
    };
    let mut imgs = Vec::new();
    let mut txts = Vec::new();
    for pair in &batch.pairs {
        let mut u = vec![0.0; d];
        for (i, x) in pair.features.iter().enumerate() {
            for j in 0..d {
                u[j] += x * p.w_vision.get(i, j);
            }
        }
        imgs.push(unit(u));
        let mut s = vec![0.0; d];
        for &id in &pair.token_ids {
            for j in 0..d {
                let mut r = 0.0;
                for k in 0..d {
                    r += p.token_table.get(id, k) * p.w_text.get(k, j);
                }
                s[j] += r / pair.token_ids.len() as f64;
            }
        }
        txts.push(unit(s));
    }
    let b = batch.pairs.len();
    let mut total = 0.0;
    for a in 0..b {
        let logits: Vec<f64> = (0..b)
            .map(|j| imgs[a].iter().zip(&txts[j]).map(|(x, y)| x * y).sum::<f64>() / tau)
            .collect();
        let z: f64 = logits.iter().map(|l| l.exp()).sum();
        total += -(logits[a].exp() / z).ln();
    }
    total / b as f64
}

/// Central finite differences of `contrastive_loss` over every parameter.
pub fn finite_difference(p: &EncoderParams, batch: &Batch, tau: f64, h: f64) -> Gradients {
    let probe = |which: usize, idx: usize, delta: f64| {
        let mut q = p.clone();
        let m: &mut Matrix = match which {
            0 => &mut q.w_vision,
            1 => &mut q.token_table,
            _ => &mut q.w_text,
        };
        m.as_mut_slice()[idx] += delta;
        contrastive_loss(&q, batch, tau).unwrap()
    };
    let grad_of = |which: usize, shape: (usize, usize)| {
        let data = (0..shape.0 * shape.1)
            .map(|i| (probe(which, i, h) - probe(which, i, -h)) / (2.0 * h))
            .collect();
        Matrix::from_vec(shape.0, shape.1, data).unwrap()
    };
    Gradients {
        w_vision: grad_of(0, p.w_vision.shape()),
        token_table: grad_of(1, p.token_table.shape()),
        w_text: grad_of(2, p.w_text.shape()),
    }
}

/// Worst relative error over entries not excused by the absolute floor.
/// An entry passes if `|a - n| < abs_floor` or `|a - n| / max(|a|, |n|) < rel_tol`.
pub fn compare_gradients(analytic: &Gradients, numeric: &Gradients, abs_floor: f64) -> f64 {
    let pairs = [
        (&analytic.w_vision, &numeric.w_vision),
        (&analytic.token_table, &numeric.token_table),
        (&analytic.w_text, &numeric.w_text),
    ];
    let mut worst: f64 = 0.0;
    for (a, n) in pairs {
        for (x, y) in a.as_slice().iter().zip(n.as_slice()) {
            let diff = (x - y).abs();
            if diff < abs_floor {
                continue;
            }
            worst = worst.max(diff / x.abs().max(y.abs()));
        }
    }
    worst
}

/// Worst plain relative error over entries whose magnitude exceeds `min_mag`.
pub fn relative_error_significant(analytic: &Gradients, numeric: &Gradients, min_mag: f64) -> f64 {
    let pairs = [
        (&analytic.w_vision, &numeric.w_vision),
        (&analytic.token_table, &numeric.token_table),
        (&analytic.w_text, &numeric.w_text),
    ];
    let mut worst: f64 = 0.0;
    for (a, n) in pairs {
        for (x, y) in a.as_slice().iter().zip(n.as_slice()) {
            let mag = x.abs().max(y.abs());
            if mag > min_mag {
                worst = worst.max((x - y).abs() / mag);
            }
        }
    }
    worst
}

/// Exhaustive AP/mAP: ranks found by counting, then visited in rank order.
pub fn brute_force_map(scores: &[Vec<f64>], truths: &[usize], classes: usize) -> f64 {
    let n = scores.len();
    let mut total = 0.0;
    let mut counted = 0usize;
    for c in 0..classes {
        let n_pos = truths.iter().filter(|&&t| t == c).count();
        if n_pos == 0 {
            continue;
        }
        let rank = |i: usize| {
            1 + (0..n)
                .filter(|&j| scores[j][c] > scores[i][c] || (scores[j][c] == scores[i][c] && j < i))
                .count()
        };
        let ranks: Vec<usize> = (0..n).map(rank).collect();
        let mut hits = 0usize;
        let mut sum = 0.0;
        for pos in 1..=n {
            let i = (0..n).find(|&i| ranks[i] == pos).unwrap();
            if truths[i] == c {
                hits += 1;
                sum += hits as f64 / pos as f64;
            }
        }
        total += sum / n_pos as f64;
        counted += 1;
    }
    total / counted as f64
}

/// Probability rows with frequent ties: small integer weights, normalized.
pub fn tied_probs(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    loop {
        let w: Vec<f64> = (0..k).map(|_| rng.random_range(0..4) as f64).collect();
        let s: f64 = w.iter().sum();
        if s > 0.0 {
            return w.into_iter().map(|x| x / s).collect();
        }
    }
}
