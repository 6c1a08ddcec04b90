//! Write an embedding bundle, dump its header, and read it back bit for bit.
//!
//!     cargo run --example vleb_roundtrip

use serde_json::json;
use vlscene::io::{Bundle, BundleKind, BundleMeta};

fn main() -> vlscene::Result<()> {
    let meta = BundleMeta::new(BundleKind::Text)
        .with_labels(vec!["a photo of a cat".into(), "a photo of a dog".into()])
        .with_extra("source", json!("example"));
    let bundle = Bundle::from_f32(meta, 3, vec![0.6, 0.8, 0.0, -0.0, 1e-40, 1.0])?;

    let bytes = bundle.encode()?;
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
    println!("magic    {:?}", std::str::from_utf8(&bytes[..4]).unwrap());
    println!(
        "version  {}  dim {}  count {}  meta_len {}",
        word(4),
        word(8),
        word(12),
        word(16)
    );
    println!(
        "meta     {}",
        std::str::from_utf8(&bytes[20..20 + word(16) as usize]).unwrap()
    );
    println!("total    {} bytes", bytes.len());

    let path = std::env::temp_dir().join("vleb_roundtrip_example.vleb");
    vlscene::io::write_bundle(&path, &bundle)?;
    let back = vlscene::io::read_bundle(&path)?;
    let exact = back
        .data()
        .iter()
        .zip(bundle.data())
        .all(|(a, b)| a.to_bits() == b.to_bits());
    println!("round trip bit-exact: {exact}");
    std::fs::remove_file(&path).ok();
    Ok(())
}
