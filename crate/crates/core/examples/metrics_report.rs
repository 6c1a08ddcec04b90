//! Evaluate a dataset and print the report table in both formats.
//!
//!     cargo run --release --example metrics_report

use vlscene::evaluation::{evaluate, Ablation};
use vlscene::reasoner::ReasonConfig;
use vlscene::scenegen::{gen_dataset, GenConfig};

fn main() -> vlscene::Result<()> {
    let ds = gen_dataset(&GenConfig {
        noise: 0.3,
        clutter: 0.5,
        ..GenConfig::default()
    })?;
    let report = evaluate(&ds.scenes, &ds.prompts, &ReasonConfig::default(), Ablation::None, true)?;
    print!("{}", report.to_markdown());
    println!();
    print!("{}", report.to_csv());
    Ok(())
}
