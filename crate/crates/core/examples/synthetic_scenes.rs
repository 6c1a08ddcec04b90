//! Generate a small benchmark, inspect one scene and save everything to disk.
//!
//!     cargo run --example synthetic_scenes -- /tmp/scenes

use vlscene::cosine_sim;
use vlscene::io;
use vlscene::scenegen::{gen_dataset, GenConfig};

fn main() -> vlscene::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "synthetic_scenes_out".into());
    let ds = gen_dataset(&GenConfig {
        classes: 5,
        scenes: 20,
        clutter: 0.4,
        ..GenConfig::default()
    })?;

    println!("classes: {:?}", ds.prompts.labels());
    let held_out: Vec<&String> = ds.novel_classes.iter().map(|&c| &ds.prompts.labels()[c]).collect();
    println!("held out: {held_out:?}");
    let scene = &ds.scenes[1];
    let truth = ds.prompts.label_index(scene.truth_label.as_deref().unwrap()).unwrap();
    println!("{} (truth {}):", scene.scene_id, ds.prompts.labels()[truth]);
    for (obj, relevant) in scene.objects.iter().zip(scene.relevance_mask.as_ref().unwrap()) {
        let sim = cosine_sim(obj, &ds.prototypes[truth])?;
        println!("  cos to truth prototype {sim:+.3}  relevant={relevant}");
    }

    io::write_dataset(&out, &ds)?;
    println!("wrote {} scenes under {out}", ds.scenes.len());
    Ok(())
}
