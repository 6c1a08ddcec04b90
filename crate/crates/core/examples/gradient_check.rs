//! Compare the analytic contrastive-loss gradient against central finite
//! differences on a tiny model.
//!
//!     cargo run --example gradient_check

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vlscene::embedding::Matrix;
use vlscene::encoders::EncoderParams;
use vlscene::training::{contrastive_loss, loss_gradients, Batch, Pair};

fn main() -> vlscene::Result<()> {
    let (f, d, vocab, tau, h) = (8, 8, 16, 0.1, 1e-5);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let params = EncoderParams::init(f, d, vocab, 0)?;
    let batch = Batch::new(
        (0..3)
            .map(|_| Pair {
                features: (0..f).map(|_| rng.random_range(-1.0..1.0)).collect(),
                token_ids: (0..2).map(|_| rng.random_range(0..vocab)).collect(),
            })
            .collect(),
    );
    let analytic = loss_gradients(&params, &batch, tau)?;

    let mut worst: f64 = 0.0;
    type Select = fn(&mut EncoderParams) -> &mut Matrix;
    let blocks: [(&str, Select, &Matrix); 3] = [
        ("w_vision", |p| &mut p.w_vision, &analytic.w_vision),
        ("token_table", |p| &mut p.token_table, &analytic.token_table),
        ("w_text", |p| &mut p.w_text, &analytic.w_text),
    ];
    for (name, select, grad) in blocks {
        let mut block_worst: f64 = 0.0;
        for i in 0..grad.as_slice().len() {
            let at = |delta: f64| {
                let mut q = params.clone();
                select(&mut q).as_mut_slice()[i] += delta;
                contrastive_loss(&q, &batch, tau)
            };
            let numeric = (at(h)? - at(-h)?) / (2.0 * h);
            let a = grad.as_slice()[i];
            // entries near zero are dominated by rounding in the difference quotient
            let mag = a.abs().max(numeric.abs());
            if mag > 1e-3 {
                block_worst = block_worst.max((a - numeric).abs() / mag);
            }
        }
        println!("{name:<12} max relative error {block_worst:.2e}");
        worst = worst.max(block_worst);
    }
    println!("overall {worst:.2e} ({})", if worst < 1e-4 { "ok" } else { "MISMATCH" });
    Ok(())
}
