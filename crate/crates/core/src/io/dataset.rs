//! Bundle layouts for scenes, prompt sets, encoder parameters, and the
//! dataset directory.
//!
//! A dataset directory holds:
//!
//! ```text
//! manifest.json          Manifest (config echo, labels, file list)
//! prototypes.vleb        kind "prototype", one row per class
//! prompts.vleb           kind "text", see write_prompts
//! scenes/scene_NNNNN.vleb kind "object", see write_scene
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::vleb::{read_bundle, write_bundle, Bundle, BundleKind, BundleMeta};
use crate::embedding::{Embedding, Matrix};
use crate::encoders::EncoderParams;
use crate::error::{Error, Result};
use crate::reasoner::{PromptSet, SceneBundle};
use crate::scenegen::{Dataset, GenConfig};

pub const FORMAT_VERSION: u32 = 1;
const MANIFEST: &str = "manifest.json";
const PROTOTYPES: &str = "prototypes.vleb";
const PROMPTS: &str = "prompts.vleb";
const SCENES: &str = "scenes";

fn meta_err(msg: impl Into<String>) -> Error {
    Error::MetaParseError(msg.into())
}

fn extra_str(meta: &BundleMeta, key: &str) -> Result<Option<String>> {
    match meta.extra(key) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s.clone())),
        Some(other) => Err(meta_err(format!("`{key}` must be a string, got {other}"))),
    }
}

fn extra_as<T: serde::de::DeserializeOwned>(meta: &BundleMeta, key: &str) -> Result<Option<T>> {
    match meta.extra(key) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => serde_json::from_value(v.clone())
            .map(Some)
            .map_err(|e| meta_err(format!("`{key}`: {e}"))),
    }
}

/// Scene bundle: kind "object", one row per object, then the global image
/// row when `extra.has_global_image` is true. Ground truth travels in `extra`
/// (`scene_id`, `truth_label`, `relevance_mask`, `novel`).
///
/// Files of kind "image" are also accepted; their rows are treated as objects.
pub fn scene_bundle(scene: &SceneBundle) -> Result<Bundle> {
    scene.validate()?;
    let dim = scene.objects[0].dim();
    let mut rows = scene.objects.clone();
    if let Some(g) = &scene.global_image {
        rows.push(g.clone());
    }
    let mut meta = BundleMeta::new(BundleKind::Object)
        .with_extra("scene_id", json!(scene.scene_id))
        .with_extra("has_global_image", json!(scene.global_image.is_some()))
        .with_extra("novel", json!(scene.novel));
    if let Some(t) = &scene.truth_label {
        meta = meta.with_extra("truth_label", json!(t));
    }
    if let Some(m) = &scene.relevance_mask {
        meta = meta.with_extra("relevance_mask", json!(m));
    }
    Bundle::from_embeddings(meta, dim, &rows)
}

pub fn scene_from_bundle(bundle: &Bundle, fallback_id: &str) -> Result<SceneBundle> {
    let meta = &bundle.meta;
    if !matches!(meta.kind, BundleKind::Object | BundleKind::Image) {
        return Err(meta_err(format!("scene bundle has kind {:?}", meta.kind)));
    }
    let mut rows = bundle.embeddings()?;
    let has_global = extra_as::<bool>(meta, "has_global_image")?.unwrap_or(false);
    let global_image = if has_global { rows.pop() } else { None };
    if rows.is_empty() {
        return Err(Error::EmptyInput("scene objects"));
    }
    let scene = SceneBundle {
        scene_id: extra_str(meta, "scene_id")?.unwrap_or_else(|| fallback_id.to_string()),
        objects: rows,
        global_image,
        truth_label: extra_str(meta, "truth_label")?,
        relevance_mask: extra_as(meta, "relevance_mask")?,
        novel: extra_as(meta, "novel")?.unwrap_or(false),
    };
    scene.validate()?;
    Ok(scene)
}

pub fn write_scene(path: impl AsRef<Path>, scene: &SceneBundle) -> Result<()> {
    write_bundle(path, &scene_bundle(scene)?)
}

pub fn read_scene(path: impl AsRef<Path>) -> Result<SceneBundle> {
    let path = path.as_ref();
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    scene_from_bundle(&read_bundle(path)?, &stem)
}

/// Prompt bundle: kind "text". Rows are the `K` pooled embeddings, then each
/// prompt's token rows in order, then the scene prompt if any. `extra` carries
/// `prompt_count`, `token_counts`, and `has_scene_prompt`; token rows are
/// labelled `<label>#<i>` and the scene prompt `<scene>`.
///
/// A plain text bundle without `prompt_count` (e.g. from an external
/// exporter) reads as `K = count` pooled prompts, each its own single token.
pub fn prompts_bundle(prompts: &PromptSet) -> Result<Bundle> {
    let mut rows: Vec<Embedding> = prompts.pooled().to_vec();
    let mut labels: Vec<String> = prompts.labels().to_vec();
    let mut token_counts = Vec::with_capacity(prompts.len());
    for (label, toks) in prompts.labels().iter().zip(prompts.tokens()) {
        token_counts.push(toks.len());
        for (i, t) in toks.iter().enumerate() {
            rows.push(t.clone());
            labels.push(format!("{label}#{i}"));
        }
    }
    if let Some(s) = prompts.scene_prompt() {
        rows.push(s.clone());
        labels.push("<scene>".into());
    }
    let meta = BundleMeta::new(BundleKind::Text)
        .with_labels(labels)
        .with_extra("prompt_count", json!(prompts.len()))
        .with_extra("token_counts", json!(token_counts))
        .with_extra("has_scene_prompt", json!(prompts.scene_prompt().is_some()));
    Bundle::from_embeddings(meta, prompts.dim(), &rows)
}

pub fn prompts_from_bundle(bundle: &Bundle) -> Result<PromptSet> {
    let meta = &bundle.meta;
    if meta.kind != BundleKind::Text {
        return Err(meta_err(format!("prompt bundle has kind {:?}", meta.kind)));
    }
    let rows = bundle.embeddings()?;
    let label_for = |j: usize| {
        meta.labels
            .as_ref()
            .map_or_else(|| format!("label_{j}"), |ls| ls[j].clone())
    };
    let Some(k) = extra_as::<usize>(meta, "prompt_count")? else {
        let labels = (0..rows.len()).map(label_for).collect();
        return PromptSet::from_pooled(labels, rows);
    };
    let counts: Vec<usize> = extra_as(meta, "token_counts")?.ok_or_else(|| meta_err("missing `token_counts`"))?;
    let has_scene = extra_as::<bool>(meta, "has_scene_prompt")?.unwrap_or(false);
    let expected = k + counts.iter().sum::<usize>() + usize::from(has_scene);
    if counts.len() != k || rows.len() != expected {
        return Err(meta_err(format!(
            "prompt layout expects {expected} rows for {k} prompts, file has {}",
            rows.len()
        )));
    }
    let mut rest = rows.into_iter();
    let pooled: Vec<Embedding> = rest.by_ref().take(k).collect();
    let tokens: Vec<Vec<Embedding>> = counts.iter().map(|&m| rest.by_ref().take(m).collect()).collect();
    let scene_prompt = if has_scene { rest.next() } else { None };
    PromptSet::new((0..k).map(label_for).collect(), pooled, tokens, scene_prompt)
}

pub fn write_prompts(path: impl AsRef<Path>, prompts: &PromptSet) -> Result<()> {
    write_bundle(path, &prompts_bundle(prompts)?)
}

pub fn read_prompts(path: impl AsRef<Path>) -> Result<PromptSet> {
    prompts_from_bundle(&read_bundle(path)?)
}

/// Encoder parameters as a kind "prototype" bundle of width `d`: the rows of
/// `w_vision`, then `token_table`, then `w_text`. `extra.encoder_params`
/// records the three row counts and the seed.
pub fn write_params(path: impl AsRef<Path>, params: &EncoderParams) -> Result<()> {
    let d = params.embed_dim();
    let mut data: Vec<f32> = Vec::with_capacity(params.param_count());
    for m in [&params.w_vision, &params.token_table, &params.w_text] {
        data.extend(m.as_slice().iter().map(|&x| x as f32));
    }
    let meta = BundleMeta::new(BundleKind::Prototype).with_extra(
        "encoder_params",
        json!({
            "feature_dim": params.feature_dim(),
            "embed_dim": d,
            "vocab": params.vocab(),
            "seed": params.seed,
        }),
    );
    write_bundle(path, &Bundle::from_f32(meta, d, data)?)
}

#[derive(Deserialize)]
struct ParamShape {
    feature_dim: usize,
    embed_dim: usize,
    vocab: usize,
    seed: u64,
}

pub fn read_params(path: impl AsRef<Path>) -> Result<EncoderParams> {
    let bundle = read_bundle(path)?;
    let shape: ParamShape =
        extra_as(&bundle.meta, "encoder_params")?.ok_or_else(|| meta_err("missing `encoder_params`"))?;
    let d = shape.embed_dim;
    if bundle.dim() != d || bundle.count() != shape.feature_dim + shape.vocab + d {
        return Err(meta_err("encoder parameter shapes disagree with payload"));
    }
    let values: Vec<f64> = bundle.data().iter().map(|&x| f64::from(x)).collect();
    let (wv, rest) = values.split_at(shape.feature_dim * d);
    let (tt, wt) = rest.split_at(shape.vocab * d);
    EncoderParams::from_parts(
        Matrix::from_vec(shape.feature_dim, d, wv.to_vec())?,
        Matrix::from_vec(shape.vocab, d, tt.to_vec())?,
        Matrix::from_vec(d, d, wt.to_vec())?,
        shape.seed,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format_version: u32,
    pub config: GenConfig,
    pub labels: Vec<String>,
    pub novel_classes: Vec<usize>,
    pub prototypes: String,
    pub prompts: String,
    pub scenes: Vec<String>,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
}

pub fn write_dataset(dir: impl AsRef<Path>, dataset: &Dataset) -> Result<()> {
    let dir = dir.as_ref();
    let scene_dir = dir.join(SCENES);
    std::fs::create_dir_all(&scene_dir).map_err(|e| Error::io(&scene_dir, e))?;

    let proto_meta = BundleMeta::new(BundleKind::Prototype).with_labels(dataset.prompts.labels().to_vec());
    write_bundle(
        dir.join(PROTOTYPES),
        &Bundle::from_embeddings(proto_meta, dataset.config.dim, &dataset.prototypes)?,
    )?;
    write_prompts(dir.join(PROMPTS), &dataset.prompts)?;

    let mut scene_files = Vec::with_capacity(dataset.scenes.len());
    for scene in &dataset.scenes {
        let rel = format!("{SCENES}/{}.vleb", scene.scene_id);
        write_scene(dir.join(&rel), scene)?;
        scene_files.push(rel);
    }
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        config: dataset.config,
        labels: dataset.prompts.labels().to_vec(),
        novel_classes: dataset.novel_classes.clone(),
        prototypes: PROTOTYPES.into(),
        prompts: PROMPTS.into(),
        scenes: scene_files,
    };
    let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::json("manifest", e))?;
    text.push('\n');
    super::write_atomic(&dir.join(MANIFEST), text.as_bytes())
}

pub fn read_dataset(dir: impl AsRef<Path>) -> Result<Dataset> {
    let dir = dir.as_ref();
    let manifest: Manifest = read_json(&dir.join(MANIFEST))?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion(manifest.format_version));
    }
    let resolve = |rel: &str| -> PathBuf { dir.join(rel) };
    let prototypes = read_bundle(resolve(&manifest.prototypes))?.embeddings()?;
    let prompts = read_prompts(resolve(&manifest.prompts))?;
    if prompts.labels() != manifest.labels.as_slice() {
        return Err(meta_err("prompt labels disagree with manifest"));
    }
    let scenes = manifest
        .scenes
        .iter()
        .map(|rel| read_scene(resolve(rel)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        config: manifest.config,
        prototypes,
        prompts,
        scenes,
        novel_classes: manifest.novel_classes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenegen::gen_dataset;

    #[test]
    fn dataset_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let ds = gen_dataset(&GenConfig {
            scenes: 24,
            ..Default::default()
        })
        .unwrap();
        write_dataset(dir.path(), &ds).unwrap();
        let back = read_dataset(dir.path()).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn plain_text_bundle_reads_as_pooled_prompts() {
        let rows = vec![
            Embedding::new(vec![1.0, 0.0]).unwrap(),
            Embedding::new(vec![0.0, 1.0]).unwrap(),
        ];
        let meta = BundleMeta::new(BundleKind::Text).with_labels(vec!["a dog".into(), "a car".into()]);
        let p = prompts_from_bundle(&Bundle::from_embeddings(meta, 2, &rows).unwrap()).unwrap();
        assert_eq!(p.labels(), &["a dog".to_string(), "a car".to_string()]);
        assert_eq!(p.tokens()[1].len(), 1);
    }

    #[test]
    fn image_bundle_reads_as_scene() {
        let meta = BundleMeta::new(BundleKind::Image);
        let b = Bundle::from_f32(meta, 2, vec![0.6, 0.8]).unwrap();
        let s = scene_from_bundle(&b, "photo").unwrap();
        assert_eq!(s.scene_id, "photo");
        assert_eq!(s.objects.len(), 1);
        assert!(s.global_image.is_none());
    }

    #[test]
    fn params_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("params.vleb");
        let p = EncoderParams::init(5, 3, 7, 9).unwrap();
        write_params(&path, &p).unwrap();
        let q = read_params(&path).unwrap();
        assert_eq!(q.w_vision.shape(), (5, 3));
        assert_eq!(q.seed, 9);
        assert!(q.w_text.max_abs_diff(&p.w_text) < 1e-7);
    }
}
