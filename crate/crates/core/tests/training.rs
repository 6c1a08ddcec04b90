mod common;

use vlscene::encoders::{encode_image, encode_text, EncoderParams};
use vlscene::training::{contrastive_loss, loss_gradients, train_toy, Batch, Pair, TrainConfig};

#[test]
fn loss_matches_straight_line_reference() {
    for seed in 0..10 {
        let mut rng = common::rng(seed);
        let params = EncoderParams::init(6, 5, 12, seed).unwrap();
        let batch = common::random_batch(&mut rng, 6, 12, 3);
        let got = contrastive_loss(&params, &batch, 0.07).unwrap();
        let want = common::reference_loss(&params, &batch, 0.07);
        assert!((got - want).abs() <= 1e-9, "seed {seed}: {got} vs {want}");
    }
}

#[test]
fn gradients_match_finite_differences_across_temperatures() {
    for tau in [0.07, 0.1, 1.0] {
        let mut rng = common::rng(77);
        let params = EncoderParams::init(5, 4, 10, 7).unwrap();
        let batch = common::random_batch(&mut rng, 5, 10, 4);
        let analytic = loss_gradients(&params, &batch, tau).unwrap();
        let numeric = common::finite_difference(&params, &batch, tau, 1e-5);
        let err = common::relative_error_significant(&analytic, &numeric, 1e-3);
        assert!(err < 1e-5, "tau {tau}: relative error {err}");
    }
}

#[test]
fn identical_pairs_give_log_batch_size_and_zero_gradient_signal() {
    let params = EncoderParams::init(4, 4, 8, 1).unwrap();
    let pair = Pair {
        features: vec![0.3, -0.2, 0.9, 0.1],
        token_ids: vec![1, 5],
    };
    for b in 2..=5 {
        let batch = Batch::new(vec![pair.clone(); b]);
        let loss = contrastive_loss(&params, &batch, 0.07).unwrap();
        assert!((loss - (b as f64).ln()).abs() <= 1e-9);
        assert!(loss_gradients(&params, &batch, 0.07).unwrap().norm() <= 1e-9);
    }
}

#[test]
fn zero_learning_rate_leaves_parameters_alone() {
    let mut rng = common::rng(5);
    let params = EncoderParams::init(6, 6, 12, 2).unwrap();
    let data = vec![
        common::random_batch(&mut rng, 6, 12, 3),
        common::random_batch(&mut rng, 6, 12, 3),
    ];
    let cfg = TrainConfig {
        steps: 10,
        lr: 0.0,
        tau: 0.07,
        seed: 3,
    };
    let (trained, trace) = train_toy(&params, &data, &cfg).unwrap();
    assert_eq!(trained, params);
    assert_eq!(trace.0.len(), 10);
}

#[test]
fn training_is_seed_deterministic_and_separates_pairs() {
    let params = EncoderParams::init(4, 4, 8, 0).unwrap();
    let pairs: Vec<Pair> = (0..4)
        .map(|i| {
            let mut features = vec![0.0; 4];
            features[i] = 1.0;
            Pair {
                features,
                token_ids: vec![2 * i, 2 * i + 1],
            }
        })
        .collect();
    let data = vec![Batch::new(pairs.clone())];
    let cfg = TrainConfig {
        steps: 300,
        lr: 0.1,
        tau: 0.1,
        seed: 9,
    };
    let (a, trace) = train_toy(&params, &data, &cfg).unwrap();
    let (b, _) = train_toy(&params, &data, &cfg).unwrap();
    assert_eq!(a, b);
    assert!(trace.0.last().unwrap() < &(trace.0[0] * 0.5));
    for (i, p) in pairs.iter().enumerate() {
        let img = encode_image(&a, &p.features).unwrap();
        let sims: Vec<f64> = pairs
            .iter()
            .map(|q| img.dot(&encode_text(&a, &q.token_ids).unwrap().pooled).unwrap())
            .collect();
        let best = (0..sims.len()).max_by(|&x, &y| sims[x].total_cmp(&sims[y])).unwrap();
        assert_eq!(best, i, "pair {i} sims {sims:?}");
    }
}

#[test]
fn invalid_inputs_are_rejected() {
    let params = EncoderParams::init(3, 3, 4, 0).unwrap();
    assert!(contrastive_loss(&params, &Batch::new(vec![]), 0.07).is_err());
    let bad_token = Batch::new(vec![Pair {
        features: vec![1.0, 0.0, 0.0],
        token_ids: vec![9],
    }]);
    assert!(contrastive_loss(&params, &bad_token, 0.07).is_err());
    let ok = Batch::new(vec![Pair {
        features: vec![1.0, 0.0, 0.0],
        token_ids: vec![1],
    }]);
    assert!(contrastive_loss(&params, &ok, 0.0).is_err());
}
