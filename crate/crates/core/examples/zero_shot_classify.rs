//! Classify one synthetic scene against its label prompts, with and without
//! scene context.
//!
//!     cargo run --example zero_shot_classify

use vlscene::reasoner::{reason_scene, ReasonConfig};
use vlscene::scenegen::{gen_dataset, GenConfig};

fn main() -> vlscene::Result<()> {
    let ds = gen_dataset(&GenConfig {
        scenes: 8,
        noise: 0.3,
        clutter: 0.5,
        ..GenConfig::default()
    })?;
    let scene = &ds.scenes[3];
    let cfg = ReasonConfig::default();

    for (name, cfg) in [("context", cfg), ("baseline", cfg.baseline())] {
        let r = reason_scene(scene, &ds.prompts, &cfg)?;
        println!(
            "{name:>8}: predicted {} (truth {}), p={:.3}, ambiguity {:.3}, prompts used {:?}",
            r.predicted_label,
            scene.truth_label.as_deref().unwrap_or("?"),
            r.probs.probs()[r.probs.argmax()],
            r.ambiguity,
            r.selected_prompts,
        );
    }
    Ok(())
}
