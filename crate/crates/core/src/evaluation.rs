//! Runs the reasoner over a set of scenes and folds the results into a report.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{build_report, EvalRecord, Report, ReportConfig};
use crate::reasoner::{reason_scene, PromptSet, ReasonConfig, ReasonResult, SceneBundle};

/// Component switched off for the comparison run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    #[default]
    None,
    /// Context off with `alpha = beta = 0`: the plain zero-shot softmax.
    Context,
    /// Scene prompt weight set to zero.
    Alpha,
    /// Context residual weight set to zero.
    Beta,
}

impl Ablation {
    pub fn name(self) -> &'static str {
        match self {
            Ablation::None => "none",
            Ablation::Context => "context",
            Ablation::Alpha => "alpha",
            Ablation::Beta => "beta",
        }
    }

    pub fn baseline(self, cfg: &ReasonConfig) -> Option<ReasonConfig> {
        match self {
            Ablation::None => None,
            Ablation::Context => Some(cfg.baseline()),
            Ablation::Alpha => Some(ReasonConfig { alpha: 0.0, ..*cfg }),
            Ablation::Beta => Some(ReasonConfig { beta: 0.0, ..*cfg }),
        }
    }
}

impl std::str::FromStr for Ablation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Ablation::None),
            "context" => Ok(Ablation::Context),
            "alpha" => Ok(Ablation::Alpha),
            "beta" => Ok(Ablation::Beta),
            other => Err(Error::ConfigInvalid(format!("unknown ablation `{other}`"))),
        }
    }
}

/// Reasons over every scene. Output order matches `scenes` either way.
pub fn reason_all(
    scenes: &[SceneBundle],
    prompts: &PromptSet,
    cfg: &ReasonConfig,
    parallel: bool,
) -> Result<Vec<ReasonResult>> {
    if parallel {
        scenes.par_iter().map(|s| reason_scene(s, prompts, cfg)).collect()
    } else {
        scenes.iter().map(|s| reason_scene(s, prompts, cfg)).collect()
    }
}

pub fn to_record(scene: &SceneBundle, result: ReasonResult) -> Result<EvalRecord> {
    let truth_label = scene
        .truth_label
        .clone()
        .ok_or_else(|| Error::ConfigInvalid(format!("scene `{}` has no truth label", scene.scene_id)))?;
    Ok(EvalRecord {
        scene_id: result.scene_id,
        truth_label,
        probs: result.probs,
        sims: result.sims,
        attention_on_truth: result.attention_on_truth,
        context_weight: result.context_weight,
        novel: scene.novel,
        timing_us: result.timing_us,
    })
}

pub fn evaluate_records(
    scenes: &[SceneBundle],
    prompts: &PromptSet,
    cfg: &ReasonConfig,
    parallel: bool,
) -> Result<Vec<EvalRecord>> {
    reason_all(scenes, prompts, cfg, parallel)?
        .into_iter()
        .zip(scenes)
        .map(|(r, s)| to_record(s, r))
        .collect()
}

/// Report for `cfg`, plus the gain over the ablated baseline when one is requested.
pub fn evaluate(
    scenes: &[SceneBundle],
    prompts: &PromptSet,
    cfg: &ReasonConfig,
    ablation: Ablation,
    parallel: bool,
) -> Result<Report> {
    let report_cfg = ReportConfig::default();
    let records = evaluate_records(scenes, prompts, cfg, parallel)?;
    let report = build_report(&records, prompts.labels(), &report_cfg)?;
    match ablation.baseline(cfg) {
        None => Ok(report),
        Some(base_cfg) => {
            let base_records = evaluate_records(scenes, prompts, &base_cfg, parallel)?;
            let baseline = build_report(&base_records, prompts.labels(), &report_cfg)?;
            report.with_ablation(ablation.name(), &baseline)
        }
    }
}
