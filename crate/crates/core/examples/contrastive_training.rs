//! Train the toy encoders on a synthetic dataset and print the loss curve.
//!
//!     cargo run --release --example contrastive_training

use vlscene::encoders::EncoderParams;
use vlscene::scenegen::{gen_dataset, training_batches, GenConfig};
use vlscene::training::{mean_loss, train_toy, TrainConfig};

fn main() -> vlscene::Result<()> {
    let ds = gen_dataset(&GenConfig::default())?;
    let vocab = 64;
    let batches = training_batches(&ds, vocab)?;
    let params = EncoderParams::init(ds.config.dim, ds.config.dim, vocab, 0)?;
    let cfg = TrainConfig::default();

    let (trained, trace) = train_toy(&params, &batches, &cfg)?;
    for (step, loss) in trace.0.iter().enumerate().step_by(25) {
        println!("step {step:>4}  loss {loss:.4}");
    }
    println!(
        "mean loss {:.4} -> {:.4} over {} batches of {}",
        mean_loss(&params, &batches, cfg.tau)?,
        mean_loss(&trained, &batches, cfg.tau)?,
        batches.len(),
        batches[0].len(),
    );
    Ok(())
}
