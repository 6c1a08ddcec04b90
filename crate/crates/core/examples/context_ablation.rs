//! Sweep the context strength and compare each ablation against the full
//! configuration on a noisy, cluttered benchmark.
//!
//!     cargo run --release --example context_ablation

use vlscene::evaluation::{evaluate, Ablation};
use vlscene::reasoner::ReasonConfig;
use vlscene::scenegen::{gen_dataset, GenConfig};

fn main() -> vlscene::Result<()> {
    let ds = gen_dataset(&GenConfig {
        scenes: 500,
        clutter: 0.5,
        noise: 0.3,
        seed: 1,
        ..GenConfig::default()
    })?;

    println!("{:<6} {:>8}", "beta", "top1");
    for beta in [0.0, 0.25, 0.5, 1.0, 2.0] {
        let cfg = ReasonConfig {
            beta,
            ..ReasonConfig::default()
        };
        let r = evaluate(&ds.scenes, &ds.prompts, &cfg, Ablation::None, true)?;
        println!("{beta:<6} {:>8.3}", r.top1);
    }
    println!();
    for ablation in [Ablation::Context, Ablation::Alpha, Ablation::Beta] {
        let r = evaluate(&ds.scenes, &ds.prompts, &ReasonConfig::default(), ablation, true)?;
        println!(
            "ablate {:<8} full {:.3}  ablated {:.3}  gain {:+.1} pts",
            ablation.name(),
            r.top1,
            r.baseline_top1.unwrap_or(f64::NAN),
            r.gen_gain_points.unwrap_or(f64::NAN),
        );
    }
    Ok(())
}
