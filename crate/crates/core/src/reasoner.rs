//! The end-to-end scene reasoning loop.
//!
//! 1. score every prompt against the scene's visual embedding;
//! 2. keep the prompts whose score clears `threshold`, best first, at most `k`;
//! 3. let the objects attend over the kept prompts' tokens;
//! 4. aggregate a context vector from objects and the scene prompt;
//! 5. condition the visual embedding on that context;
//! 6. softmax the conditioned similarities over all `K` prompts.
//!
//! With context off (or `beta == 0`) step 6 is the plain temperature softmax
//! over the raw prompt scores.

use std::collections::HashSet;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::embedding::{argmax, cosine_sim, ensure_unit, l2_normalize, mean, stable_softmax, Embedding, ProbVector};
use crate::error::{check_dim, Error, Result};
use crate::fusion::{
    aggregate_context, context_weight, contextualize, cross_attention, reproject_attended, AttentionMap,
    AttentionParams, ContextVector,
};
use crate::metrics::{ambiguity_index, attention_mass};

/// Candidate labels with their pooled and per-token text embeddings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptSet {
    labels: Vec<String>,
    pooled: Vec<Embedding>,
    tokens: Vec<Vec<Embedding>>,
    scene_prompt: Option<Embedding>,
}

impl PromptSet {
    pub fn new(
        labels: Vec<String>,
        pooled: Vec<Embedding>,
        tokens: Vec<Vec<Embedding>>,
        scene_prompt: Option<Embedding>,
    ) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::EmptyInput("prompt labels"));
        }
        if pooled.len() != labels.len() || tokens.len() != labels.len() {
            return Err(Error::InvalidShape(format!(
                "{} labels, {} pooled embeddings, {} token lists",
                labels.len(),
                pooled.len(),
                tokens.len()
            )));
        }
        let mut seen = HashSet::new();
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(Error::ConfigInvalid(format!("duplicate label `{l}`")));
            }
        }
        let d = pooled[0].dim();
        for (j, toks) in tokens.iter().enumerate() {
            if toks.is_empty() {
                return Err(Error::EmptyInput("prompt tokens"));
            }
            check_dim(d, pooled[j].dim())?;
            for t in toks {
                check_dim(d, t.dim())?;
            }
        }
        if let Some(s) = &scene_prompt {
            check_dim(d, s.dim())?;
        }
        Ok(Self {
            labels,
            pooled: pooled.iter().map(ensure_unit).collect::<Result<_>>()?,
            tokens: tokens
                .iter()
                .map(|ts| ts.iter().map(ensure_unit).collect::<Result<Vec<_>>>())
                .collect::<Result<_>>()?,
            scene_prompt,
        })
    }

    /// Prompts with no token-level embeddings: each prompt is its own single token.
    pub fn from_pooled(labels: Vec<String>, pooled: Vec<Embedding>) -> Result<Self> {
        let tokens = pooled.iter().map(|p| vec![p.clone()]).collect();
        Self::new(labels, pooled, tokens, None)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.pooled[0].dim()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn pooled(&self) -> &[Embedding] {
        &self.pooled
    }

    pub fn tokens(&self) -> &[Vec<Embedding>] {
        &self.tokens
    }

    pub fn scene_prompt(&self) -> Option<&Embedding> {
        self.scene_prompt.as_ref()
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Reorders prompts so that new position `i` holds old prompt `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        Self::new(
            perm.iter().map(|&i| self.labels[i].clone()).collect(),
            perm.iter().map(|&i| self.pooled[i].clone()).collect(),
            perm.iter().map(|&i| self.tokens[i].clone()).collect(),
            self.scene_prompt.clone(),
        )
    }
}

/// One scene: object-level embeddings plus optional global view and ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneBundle {
    pub scene_id: String,
    pub objects: Vec<Embedding>,
    #[serde(default)]
    pub global_image: Option<Embedding>,
    #[serde(default)]
    pub truth_label: Option<String>,
    #[serde(default)]
    pub relevance_mask: Option<Vec<bool>>,
    #[serde(default)]
    pub novel: bool,
}

impl SceneBundle {
    pub fn from_objects(scene_id: impl Into<String>, objects: Vec<Embedding>) -> Self {
        Self {
            scene_id: scene_id.into(),
            objects,
            global_image: None,
            truth_label: None,
            relevance_mask: None,
            novel: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let first = self.objects.first().ok_or(Error::EmptyInput("scene objects"))?;
        for o in &self.objects {
            check_dim(first.dim(), o.dim())?;
        }
        if let Some(g) = &self.global_image {
            check_dim(first.dim(), g.dim())?;
        }
        if let Some(mask) = &self.relevance_mask {
            if mask.len() != self.objects.len() {
                return Err(Error::InvalidShape(format!(
                    "relevance mask has {} entries for {} objects",
                    mask.len(),
                    self.objects.len()
                )));
            }
        }
        Ok(())
    }

    /// The embedding scored against prompts, and where it came from.
    pub fn visual_embedding(&self) -> Result<(Embedding, VisualSource)> {
        self.validate()?;
        match &self.global_image {
            Some(g) => Ok((ensure_unit(g)?, VisualSource::GlobalImage)),
            None => Ok((l2_normalize(&mean(&self.objects)?)?, VisualSource::ObjectMean)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VisualSource {
    GlobalImage,
    ObjectMean,
}

/// Which object representation feeds the context vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionMode {
    /// Raw object embeddings.
    #[default]
    Mean,
    /// Attended rows mapped back through `w_vᵀ`.
    Attended,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReasonConfig {
    pub tau: f64,
    pub alpha: f64,
    pub beta: f64,
    pub k: usize,
    pub threshold: f64,
    pub fusion_mode: FusionMode,
    pub context: bool,
}

impl Default for ReasonConfig {
    fn default() -> Self {
        Self {
            tau: 0.07,
            alpha: 0.5,
            beta: 0.5,
            k: 5,
            threshold: 0.2,
            fusion_mode: FusionMode::Mean,
            context: true,
        }
    }
}

impl ReasonConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::ConfigInvalid(format!("tau must be > 0, got {}", self.tau)));
        }
        if self.k == 0 {
            return Err(Error::ConfigInvalid("k must be >= 1".into()));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::ConfigInvalid(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::ConfigInvalid(format!("beta must be >= 0, got {}", self.beta)));
        }
        if !self.threshold.is_finite() {
            return Err(Error::ConfigInvalid("threshold must be finite".into()));
        }
        Ok(())
    }

    /// The context-free baseline: plain temperature softmax over prompt scores.
    pub fn baseline(&self) -> Self {
        Self {
            context: false,
            alpha: 0.0,
            beta: 0.0,
            ..*self
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReasonResult {
    pub scene_id: String,
    pub probs: ProbVector,
    pub predicted_label: String,
    pub selected_prompts: Vec<usize>,
    pub sims: Vec<f64>,
    pub context: ContextVector,
    pub ambiguity: f64,
    pub visual_source: VisualSource,
    /// `beta‖c‖ / (‖v‖ + beta‖c‖)`; zero when context is off.
    pub context_weight: f64,
    /// Share of token attention landing on relevance-masked objects.
    pub attention_on_truth: Option<f64>,
    pub tau: f64,
    pub alpha: f64,
    pub beta: f64,
    pub k: usize,
    pub threshold: f64,
    pub fusion_mode: FusionMode,
    pub context_on: bool,
    pub timing_us: u64,
}

/// Cosine similarity of the scene's visual embedding to every pooled prompt.
pub fn score_prompts(scene: &SceneBundle, prompts: &PromptSet) -> Result<Vec<f64>> {
    let (v, _) = scene.visual_embedding()?;
    score_against(&v, prompts)
}

fn score_against(v: &Embedding, prompts: &PromptSet) -> Result<Vec<f64>> {
    prompts.pooled().iter().map(|p| cosine_sim(v, p)).collect()
}

/// Indices with `sims >= threshold`, best first (ties to the lower index),
/// capped at `k`. Falls back to the argmax when nothing clears the bar.
pub fn select_top_k(sims: &[f64], k: usize, threshold: f64) -> Result<Vec<usize>> {
    if sims.is_empty() {
        return Err(Error::EmptyInput("prompt scores"));
    }
    if k == 0 {
        return Err(Error::ConfigInvalid("k must be >= 1".into()));
    }
    let mut passing: Vec<usize> = (0..sims.len()).filter(|&j| sims[j] >= threshold).collect();
    if passing.is_empty() {
        return Ok(vec![argmax(sims)]);
    }
    passing.sort_by(|&a, &b| sims[b].total_cmp(&sims[a]).then(a.cmp(&b)));
    passing.truncate(k);
    Ok(passing)
}

pub fn predict_zero_shot(v: &Embedding, prompts: &PromptSet, tau: f64) -> Result<ProbVector> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidTau(tau));
    }
    stable_softmax(&score_against(v, prompts)?, tau)
}

/// Full reasoning pass with identity attention projections.
pub fn reason_scene(scene: &SceneBundle, prompts: &PromptSet, cfg: &ReasonConfig) -> Result<ReasonResult> {
    reason_scene_with(scene, prompts, cfg, &AttentionParams::identity(prompts.dim()))
}

pub fn reason_scene_with(
    scene: &SceneBundle,
    prompts: &PromptSet,
    cfg: &ReasonConfig,
    attention: &AttentionParams,
) -> Result<ReasonResult> {
    let start = Instant::now();
    cfg.validate()?;
    let (v, source) = scene.visual_embedding()?;
    check_dim(prompts.dim(), v.dim())?;

    let sims = score_against(&v, prompts)?;
    let selected = select_top_k(&sims, cfg.k, cfg.threshold)?;

    let tokens: Vec<Embedding> = selected
        .iter()
        .flat_map(|&j| prompts.tokens()[j].iter().cloned())
        .collect();
    let objects = scene.objects.iter().map(ensure_unit).collect::<Result<Vec<_>>>()?;
    let map = cross_attention(attention, &objects, &tokens)?;

    let t_scene = match prompts.scene_prompt() {
        Some(s) => s.clone(),
        None => {
            let chosen: Vec<Embedding> = selected.iter().map(|&j| prompts.pooled()[j].clone()).collect();
            mean(&chosen)?
        }
    };
    let context_objects = match cfg.fusion_mode {
        FusionMode::Mean => objects,
        FusionMode::Attended => reproject_attended(attention, &map)?,
    };
    let context = aggregate_context(&context_objects, &t_scene, cfg.alpha)?;

    let (probs, weight) = if cfg.context && cfg.beta > 0.0 {
        let conditioned = contextualize(&v, &context, cfg.beta)?;
        (
            stable_softmax(&score_against(&conditioned, prompts)?, cfg.tau)?,
            context_weight(&v, &context, cfg.beta),
        )
    } else {
        (stable_softmax(&sims, cfg.tau)?, 0.0)
    };

    let ambiguity = if probs.len() >= 2 {
        ambiguity_index(&probs)?
    } else {
        0.0
    };
    let attention_on_truth = scene
        .relevance_mask
        .as_deref()
        .map(|mask| attention_mass(&map, mask))
        .transpose()?;

    Ok(ReasonResult {
        scene_id: scene.scene_id.clone(),
        predicted_label: prompts.labels()[probs.argmax()].clone(),
        probs,
        selected_prompts: selected,
        sims,
        context,
        ambiguity,
        visual_source: source,
        context_weight: weight,
        attention_on_truth,
        tau: cfg.tau,
        alpha: cfg.alpha,
        beta: cfg.beta,
        k: cfg.k,
        threshold: cfg.threshold,
        fusion_mode: cfg.fusion_mode,
        context_on: cfg.context,
        timing_us: start.elapsed().as_micros() as u64,
    })
}

/// Attention map for a scene against the prompts [`reason_scene`] would select.
pub fn scene_attention(scene: &SceneBundle, prompts: &PromptSet, cfg: &ReasonConfig) -> Result<AttentionMap> {
    let sims = score_prompts(scene, prompts)?;
    let selected = select_top_k(&sims, cfg.k, cfg.threshold)?;
    let tokens: Vec<Embedding> = selected
        .iter()
        .flat_map(|&j| prompts.tokens()[j].iter().cloned())
        .collect();
    let objects = scene.objects.iter().map(ensure_unit).collect::<Result<Vec<_>>>()?;
    cross_attention(&AttentionParams::identity(prompts.dim()), &objects, &tokens)
}
