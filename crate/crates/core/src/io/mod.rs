//! File formats: embedding bundles, run configuration, dataset directories.

mod config;
mod dataset;
mod vleb;

pub use config::{ContextSwitch, RunConfig};
pub use dataset::{
    read_dataset, read_params, read_prompts, read_scene, write_dataset, write_params, write_prompts, write_scene,
    Manifest, FORMAT_VERSION,
};
pub use vleb::{read_bundle, write_bundle, Bundle, BundleKind, BundleMeta, HEADER_LEN, MAGIC, VERSION};

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Writes to a temporary file in the target directory, then renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}
