mod common;

use rand::Rng;
use serde_json::json;

use vlscene::io::{self, Bundle, BundleKind, BundleMeta};
use vlscene::scenegen::{gen_dataset, GenConfig};
use vlscene::Error;

fn sample() -> Bundle {
    let meta = BundleMeta::new(BundleKind::Object)
        .with_labels(vec!["a".into(), "b".into(), "c".into()])
        .with_extra("scene_id", json!("scene_00001"));
    Bundle::from_f32(meta, 4, (0..12).map(|i| i as f32 * 0.25 - 1.0).collect()).unwrap()
}

#[test]
fn corrupted_bytes_never_panic() {
    let good = sample().encode().unwrap();
    let mut rng = common::rng(11);
    let mut rejected = 0;
    for _ in 0..5000 {
        let mut bytes = good.clone();
        match rng.random_range(0..3) {
            0 => {
                let i = rng.random_range(0..bytes.len());
                bytes[i] ^= 1 << rng.random_range(0..8);
            }
            1 => bytes.truncate(rng.random_range(0..bytes.len())),
            _ => bytes.extend((0..rng.random_range(1..9)).map(|_| rng.random::<u8>())),
        }
        if Bundle::decode(&bytes).is_err() {
            rejected += 1;
        }
    }
    assert!(rejected > 2500, "only {rejected} corruptions detected");
}

#[test]
fn each_corruption_maps_to_its_error() {
    let good = sample().encode().unwrap();
    assert!(matches!(Bundle::decode(&good[..10]), Err(Error::TruncatedFile { .. })));
    let mut long = good.clone();
    long.extend([0u8; 3]);
    assert!(matches!(Bundle::decode(&long), Err(Error::TrailingBytes(3))));
    let mut nan = good.clone();
    let last = nan.len() - 4;
    nan[last..].copy_from_slice(&f32::NAN.to_le_bytes());
    assert!(matches!(Bundle::decode(&nan), Err(Error::NonFinite(_))));
    let mut huge_meta = good;
    huge_meta[16..20].copy_from_slice(&u32::MAX.to_le_bytes());
    assert!(matches!(Bundle::decode(&huge_meta), Err(Error::TruncatedFile { .. })));
}

#[test]
fn zero_row_bundle_round_trips() {
    let b = Bundle::from_f32(BundleMeta::new(BundleKind::Text), 7, vec![]).unwrap();
    let back = Bundle::decode(&b.encode().unwrap()).unwrap();
    assert_eq!(back.count(), 0);
    assert_eq!(back.dim(), 7);
}

#[test]
fn dataset_directory_round_trips_exactly() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = GenConfig {
        scenes: 30,
        seed: 3,
        ..GenConfig::default()
    };
    let ds = gen_dataset(&cfg).unwrap();
    io::write_dataset(tmp.path(), &ds).unwrap();
    assert_eq!(io::read_dataset(tmp.path()).unwrap(), ds);

    let b = sample();
    let path = tmp.path().join("nested.vleb");
    io::write_bundle(&path, &b).unwrap();
    assert_eq!(io::read_bundle(&path).unwrap(), b);
}
