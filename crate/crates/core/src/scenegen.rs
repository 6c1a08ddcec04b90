//! Seeded synthetic scenes built around class prototypes.
//!
//! Each class has a unit prototype. A scene of class `c` holds mostly noisy
//! copies of prototype `c` plus distractor objects from other classes, a
//! noisier holistic view standing in for the whole-image embedding, and a
//! relevance mask marking the target objects. The target class always
//! strictly outnumbers every single distractor class.
//!
//! Randomness comes from ChaCha8 streams. Scene `i` uses the seed
//! `splitmix64(seed ^ i)`, so scenes can be generated independently.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::{cosine_sim, l2_normalize, snap_f32, Embedding};
use crate::error::{Error, Result};
use crate::reasoner::{PromptSet, SceneBundle};
use crate::training::{Batch, Pair};

/// Samples drawn per prototype before giving up on separation.
pub const PROTOTYPE_RETRIES: usize = 10_000;
/// Prototypes must have pairwise cosine below this.
pub const MAX_PROTOTYPE_COSINE: f64 = 0.5;
/// Token embeddings per prompt.
pub const TOKENS_PER_PROMPT: usize = 2;
/// Per-coordinate std of the jitter on prompt tokens, divided by `√d`.
pub const TOKEN_JITTER: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenConfig {
    pub classes: usize,
    pub dim: usize,
    pub scenes: usize,
    pub objects_per_scene: usize,
    /// Fraction of objects drawn from non-target classes.
    pub clutter: f64,
    /// Per-coordinate std of the Gaussian added before renormalizing.
    pub noise: f64,
    /// Fraction of classes held out of toy-encoder training.
    pub novel_fraction: f64,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            classes: 8,
            dim: 32,
            scenes: 200,
            objects_per_scene: 6,
            clutter: 0.3,
            noise: 0.1,
            novel_fraction: 0.25,
            seed: 42,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::ConfigInvalid(msg));
        if self.classes < 2 {
            return bad(format!("need at least 2 classes, got {}", self.classes));
        }
        if self.dim == 0 {
            return bad("dim must be positive".into());
        }
        if self.classes > 2 * self.dim {
            return bad(format!(
                "{} classes cannot be separated in dimension {}",
                self.classes, self.dim
            ));
        }
        if self.scenes == 0 {
            return bad("scenes must be positive".into());
        }
        if self.objects_per_scene == 0 {
            return bad("objects_per_scene must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.clutter) {
            return bad(format!("clutter must lie in [0, 1], got {}", self.clutter));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return bad(format!("noise must be >= 0, got {}", self.noise));
        }
        if !(0.0..=1.0).contains(&self.novel_fraction) {
            return bad(format!(
                "novel_fraction must lie in [0, 1], got {}",
                self.novel_fraction
            ));
        }
        Ok(())
    }

    /// Number of held-out classes; at least one class always stays in training.
    pub fn novel_classes(&self) -> usize {
        ((self.novel_fraction * self.classes as f64).round() as usize).min(self.classes - 1)
    }
}

/// SplitMix64 finalizer, used to derive per-scene seeds.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn scene_seed(seed: u64, index: usize) -> u64 {
    splitmix64(seed ^ index as u64)
}

pub fn class_label(class: usize) -> String {
    format!("class_{class:02}")
}

fn gaussian(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> Vec<f64> {
    (0..d)
        .map(|_| scale * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng))
        .collect()
}

/// Adds Gaussian noise, renormalizes, and snaps to the 32-bit grid so the
/// result survives a bundle round trip unchanged.
fn perturb(base: &Embedding, rng: &mut ChaCha8Rng, scale: f64) -> Result<Embedding> {
    if scale == 0.0 {
        return Ok(snap_f32(base));
    }
    let noisy: Vec<f64> = base
        .values()
        .iter()
        .zip(gaussian(rng, base.dim(), scale))
        .map(|(x, n)| x + n)
        .collect();
    Ok(snap_f32(&l2_normalize(&Embedding::new(noisy)?)?))
}

/// `k` unit vectors with pairwise cosine below [`MAX_PROTOTYPE_COSINE`].
pub fn gen_prototypes(k: usize, d: usize, seed: u64) -> Result<Vec<Embedding>> {
    if k == 0 || d == 0 || k > 2 * d {
        return Err(Error::ConfigInvalid(format!(
            "cannot place {k} prototypes in dimension {d}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut protos: Vec<Embedding> = Vec::with_capacity(k);
    while protos.len() < k {
        let mut placed = false;
        for _ in 0..PROTOTYPE_RETRIES {
            let raw = Embedding::new(gaussian(&mut rng, d, 1.0))?;
            let Ok(cand) = l2_normalize(&raw) else { continue };
            let separated = protos
                .iter()
                .all(|p| cosine_sim(p, &cand).is_ok_and(|c| c < MAX_PROTOTYPE_COSINE));
            if separated {
                protos.push(snap_f32(&cand));
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::SeparationFailure {
                classes: k,
                dim: d,
                retries: PROTOTYPE_RETRIES,
            });
        }
    }
    Ok(protos)
}

/// How many objects come from the target class. At least one, and enough
/// that the rest can be spread so no distractor class ties the target.
pub fn target_count(n: usize, clutter: f64, classes: usize) -> usize {
    let mut t = ((n as f64 * (1.0 - clutter)).round() as usize).clamp(1, n);
    while t < n && (classes - 1) * (t - 1) < n - t {
        t += 1;
    }
    t
}

pub fn gen_scene(protos: &[Embedding], target: usize, cfg: &GenConfig, seed: u64) -> Result<SceneBundle> {
    if target >= protos.len() {
        return Err(Error::ConfigInvalid(format!(
            "target class {target} out of range for {} prototypes",
            protos.len()
        )));
    }
    if protos.len() < 2 || cfg.objects_per_scene == 0 {
        return Err(Error::ConfigInvalid("need >= 2 prototypes and >= 1 object".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = cfg.objects_per_scene;
    let t = target_count(n, cfg.clutter, protos.len());

    let mut others: Vec<usize> = (0..protos.len()).filter(|&c| c != target).collect();
    others.shuffle(&mut rng);
    let mut classes = vec![target; t];
    classes.extend((0..n - t).map(|i| others[i % others.len()]));

    let objects = classes
        .iter()
        .map(|&c| perturb(&protos[c], &mut rng, cfg.noise))
        .collect::<Result<Vec<_>>>()?;
    let holistic = l2_normalize(&crate::embedding::mean(&objects)?)?;
    let global_image = perturb(&holistic, &mut rng, cfg.noise)?;

    Ok(SceneBundle {
        scene_id: String::new(),
        objects,
        global_image: Some(global_image),
        truth_label: Some(class_label(target)),
        relevance_mask: Some(classes.iter().map(|&c| c == target).collect()),
        novel: false,
    })
}

/// A complete synthetic benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub config: GenConfig,
    pub prototypes: Vec<Embedding>,
    pub prompts: PromptSet,
    pub scenes: Vec<SceneBundle>,
    /// Classes never shown to toy-encoder training.
    pub novel_classes: Vec<usize>,
}

pub fn gen_dataset(cfg: &GenConfig) -> Result<Dataset> {
    cfg.validate()?;
    let k = cfg.classes;
    let prototypes = gen_prototypes(k, cfg.dim, cfg.seed)?;

    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(cfg.seed ^ 0x0C1A_55E5));
    let jitter = TOKEN_JITTER / (cfg.dim as f64).sqrt();
    let tokens = prototypes
        .iter()
        .map(|p| (0..TOKENS_PER_PROMPT).map(|_| perturb(p, &mut rng, jitter)).collect())
        .collect::<Result<Vec<Vec<_>>>>()?;
    let labels: Vec<String> = (0..k).map(class_label).collect();
    let prompts = PromptSet::new(labels, prototypes.clone(), tokens, None)?;

    let novel_classes: Vec<usize> = (k - cfg.novel_classes()..k).collect();
    let scenes = (0..cfg.scenes)
        .into_par_iter()
        .map(|i| {
            let target = i % k;
            let mut scene = gen_scene(&prototypes, target, cfg, scene_seed(cfg.seed, i))?;
            scene.scene_id = format!("scene_{i:05}");
            scene.novel = novel_classes.contains(&target);
            Ok(scene)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(Dataset {
        config: *cfg,
        prototypes,
        prompts,
        scenes,
        novel_classes,
    })
}

/// Token ids naming class `c` for the toy text encoder.
pub fn class_tokens(class: usize, vocab: usize) -> Vec<usize> {
    (0..TOKENS_PER_PROMPT)
        .map(|i| (TOKENS_PER_PROMPT * class + i) % vocab)
        .collect()
}

/// Contrastive batches from the non-novel scenes.
///
/// Each pair is (mean object embedding, class token ids). Scenes cycle through
/// classes, so consecutive training scenes are grouped into batches of one
/// scene per training class. A short trailing group is dropped.
pub fn training_batches(dataset: &Dataset, vocab: usize) -> Result<Vec<Batch>> {
    let train_classes = dataset.config.classes - dataset.novel_classes.len();
    let mut batches = Vec::new();
    let mut current = Vec::with_capacity(train_classes);
    for scene in dataset.scenes.iter().filter(|s| !s.novel) {
        let label = scene.truth_label.as_deref().unwrap_or_default();
        let class = dataset
            .prompts
            .label_index(label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))?;
        current.push(Pair {
            features: crate::embedding::mean(&scene.objects)?.into_values(),
            token_ids: class_tokens(class, vocab),
        });
        if current.len() == train_classes {
            batches.push(Batch::new(std::mem::take(&mut current)));
        }
    }
    if current.len() >= 2 {
        batches.push(Batch::new(current));
    }
    if batches.is_empty() {
        return Err(Error::EmptyBatch);
    }
    Ok(batches)
}
