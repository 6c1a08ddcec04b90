//! Objects attending over prompt tokens, and how much of that attention lands
//! on the objects that actually belong to the scene's class.
//!
//!     cargo run --example cross_attention

use vlscene::embedding::Matrix;
use vlscene::fusion::{cross_attention, AttentionParams};
use vlscene::metrics::attention_mass;
use vlscene::Embedding;

fn main() -> vlscene::Result<()> {
    let e = |v: &[f64]| Embedding::new(v.to_vec());
    let objects = vec![e(&[1.0, 0.0, 0.0])?, e(&[0.9, 0.1, 0.0])?, e(&[0.0, 0.0, 1.0])?];
    let tokens = vec![e(&[1.0, 0.0, 0.0])?, e(&[0.0, 1.0, 0.0])?];

    // sharpen the queries so the map is easy to read
    let sharp = Matrix::from_fn(3, 3, |i, j| if i == j { 4.0 } else { 0.0 });
    let params = AttentionParams::new(sharp, Matrix::identity(3), Matrix::identity(3))?;
    let map = cross_attention(&params, &objects, &tokens)?;

    println!("weights (rows = objects, cols = tokens):");
    for (i, row) in map.weights.iter().enumerate() {
        println!("  object {i}: {row:.3?}");
    }
    let mask = [true, true, false];
    println!("attention on relevant objects: {:.3}", attention_mass(&map, &mask)?);

    let uniform = cross_attention(&AttentionParams::identity(3), &objects, &tokens)?;
    println!("identity projections give rows {:.3?}", uniform.weights[0]);
    Ok(())
}
