//! Evaluation metrics over per-scene records, and the aggregated report.
//!
//! Rankings break ties toward the lower label index (for label rankings) or
//! the lower record index (for per-class record rankings). Sums run in record
//! order so reports are reproducible bit for bit.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::embedding::ProbVector;
use crate::error::{Error, Result};
use crate::fusion::AttentionMap;

/// What the evaluation driver keeps from one reasoning pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub scene_id: String,
    pub truth_label: String,
    pub probs: ProbVector,
    pub sims: Vec<f64>,
    pub attention_on_truth: Option<f64>,
    pub context_weight: f64,
    pub novel: bool,
    pub timing_us: u64,
}

fn truth_index(record: &EvalRecord, labelset: &[String]) -> Result<usize> {
    labelset
        .iter()
        .position(|l| *l == record.truth_label)
        .ok_or_else(|| Error::UnknownLabel(record.truth_label.clone()))
}

/// 1-based rank of `target` among `scores`, descending, ties to the lower index.
pub fn rank_of(scores: &[f64], target: usize) -> usize {
    let s = scores[target];
    1 + scores
        .iter()
        .enumerate()
        .filter(|&(j, &x)| x > s || (x == s && j < target))
        .count()
}

fn truth_ranks(records: &[EvalRecord], labelset: &[String]) -> Result<Vec<usize>> {
    records
        .iter()
        .map(|r| {
            let t = truth_index(r, labelset)?;
            if r.probs.len() != labelset.len() {
                return Err(Error::DimMismatch {
                    expected: labelset.len(),
                    found: r.probs.len(),
                });
            }
            Ok(rank_of(r.probs.probs(), t))
        })
        .collect()
}

pub fn top_k_accuracy(records: &[EvalRecord], labelset: &[String], k: usize) -> Result<f64> {
    let (recall, _) = recall_precision_at_k(records, labelset, k)?;
    Ok(recall)
}

/// Single-truth-label Recall@K and Precision@K (precision uses the `1/k` convention).
pub fn recall_precision_at_k(records: &[EvalRecord], labelset: &[String], k: usize) -> Result<(f64, f64)> {
    if k == 0 {
        return Err(Error::ConfigInvalid("k must be >= 1".into()));
    }
    if records.is_empty() {
        return Err(Error::EmptyInput("evaluation records"));
    }
    let ranks = truth_ranks(records, labelset)?;
    let hits = ranks.iter().filter(|&&r| r <= k).count() as f64;
    let n = records.len() as f64;
    Ok((hits / n, hits / (n * k as f64)))
}

/// Average precision of one class: records ranked by that class's score.
fn average_precision(scores: &[f64], positive: &[bool]) -> Option<f64> {
    let n_pos = positive.iter().filter(|&&p| p).count();
    if n_pos == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (pos, &i) in order.iter().enumerate() {
        if positive[i] {
            hits += 1;
            sum += hits as f64 / (pos + 1) as f64;
        }
    }
    Some(sum / n_pos as f64)
}

/// Mean over classes (with at least one positive) of per-class AP.
pub fn mean_average_precision(records: &[EvalRecord], labelset: &[String]) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::EmptyInput("evaluation records"));
    }
    let truths = records
        .iter()
        .map(|r| truth_index(r, labelset))
        .collect::<Result<Vec<_>>>()?;
    let mut total = 0.0;
    let mut classes = 0usize;
    for c in 0..labelset.len() {
        let scores: Vec<f64> = records.iter().map(|r| r.probs.probs()[c]).collect();
        let positive: Vec<bool> = truths.iter().map(|&t| t == c).collect();
        if let Some(ap) = average_precision(&scores, &positive) {
            total += ap;
            classes += 1;
        }
    }
    Ok(total / classes as f64)
}

/// Shannon entropy of `probs` divided by `ln K`.
pub fn ambiguity_index(probs: &ProbVector) -> Result<f64> {
    let k = probs.len();
    if k < 2 {
        return Err(Error::DegenerateK(k));
    }
    let h: f64 = probs.probs().iter().filter(|&&p| p > 0.0).map(|&p| -p * p.ln()).sum();
    Ok((h / (k as f64).ln()).clamp(0.0, 1.0))
}

/// Truth similarity minus the best incorrect similarity.
pub fn similarity_margin(record: &EvalRecord, labelset: &[String]) -> Result<f64> {
    let t = truth_index(record, labelset)?;
    if record.sims.len() < 2 {
        return Err(Error::DegenerateK(record.sims.len()));
    }
    let best_other = record
        .sims
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != t)
        .map(|(_, &s)| s)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(record.sims[t] - best_other)
}

/// Attention share on ground-truth objects.
///
/// Each token's column is renormalized into a distribution over objects; the
/// result is the mass that distribution puts on masked objects, averaged over
/// tokens.
pub fn attention_mass(map: &AttentionMap, mask: &[bool]) -> Result<f64> {
    if mask.len() != map.n_objects() {
        return Err(Error::InvalidShape(format!(
            "relevance mask has {} entries for {} objects",
            mask.len(),
            map.n_objects()
        )));
    }
    let m = map.n_tokens();
    if m == 0 {
        return Err(Error::EmptyInput("attention tokens"));
    }
    let mut total = 0.0;
    for j in 0..m {
        let col_sum: f64 = map.weights.iter().map(|row| row[j]).sum();
        let on_mask: f64 = map
            .weights
            .iter()
            .zip(mask)
            .filter(|(_, &keep)| keep)
            .map(|(row, _)| row[j])
            .sum();
        if col_sum > 0.0 {
            total += on_mask / col_sum;
        }
    }
    Ok((total / m as f64).clamp(0.0, 1.0))
}

pub fn attention_overlap(record: &EvalRecord) -> Result<f64> {
    record
        .attention_on_truth
        .ok_or_else(|| Error::MissingMask(record.scene_id.clone()))
}

/// Top-1 difference in percentage points.
pub fn generalization_gain(aligned: &Report, baseline: &Report) -> Result<f64> {
    if aligned.scene_set_digest != baseline.scene_set_digest || aligned.scenes != baseline.scenes {
        return Err(Error::DatasetMismatch);
    }
    Ok(aligned.top1 * 100.0 - baseline.top1 * 100.0)
}

/// SHA-256 over the sorted scene ids, newline separated.
pub fn scene_set_digest<'a>(ids: impl IntoIterator<Item = &'a str>) -> String {
    let mut ids: Vec<&str> = ids.into_iter().collect();
    ids.sort_unstable();
    let mut hasher = Sha256::new();
    for id in ids {
        hasher.update(id.as_bytes());
        hasher.update(b"\n");
    }
    hex::encode(hasher.finalize())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    /// Cutoffs for Recall@K / Precision@K.
    pub ks: Vec<usize>,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self { ks: vec![1, 5, 10] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub scenes: usize,
    pub scene_set_digest: String,
    pub top1: f64,
    pub top5: f64,
    pub map: f64,
    pub recall_at: BTreeMap<usize, f64>,
    pub precision_at: BTreeMap<usize, f64>,
    pub mean_ambiguity: f64,
    pub mean_margin: f64,
    pub mean_truth_similarity: f64,
    pub mean_context_weight: f64,
    pub mean_attention_overlap: Option<f64>,
    pub novel_scenes: usize,
    pub failure_rate_novel: f64,
    pub ablation: Option<String>,
    pub baseline_top1: Option<f64>,
    pub gen_gain_points: Option<f64>,
    pub ms_per_sample: f64,
}

pub fn build_report(records: &[EvalRecord], labelset: &[String], cfg: &ReportConfig) -> Result<Report> {
    if records.is_empty() {
        return Err(Error::EmptyInput("evaluation records"));
    }
    let n = records.len() as f64;
    let ranks = truth_ranks(records, labelset)?;
    let frac_within =
        |idx: &mut dyn Iterator<Item = usize>, k: usize, count: f64| idx.filter(|&r| r <= k).count() as f64 / count;

    let mut recall_at = BTreeMap::new();
    let mut precision_at = BTreeMap::new();
    for &k in &cfg.ks {
        let (r, p) = recall_precision_at_k(records, labelset, k)?;
        recall_at.insert(k, r);
        precision_at.insert(k, p);
    }

    let mut ambiguity = 0.0;
    let mut margin = 0.0;
    let mut truth_sim = 0.0;
    let mut ctx_weight = 0.0;
    let mut overlap = 0.0;
    let mut overlap_count = 0usize;
    let mut timing = 0.0;
    for r in records {
        ambiguity += if r.probs.len() >= 2 {
            ambiguity_index(&r.probs)?
        } else {
            0.0
        };
        margin += similarity_margin(r, labelset)?;
        truth_sim += r.sims[truth_index(r, labelset)?];
        ctx_weight += r.context_weight;
        if let Some(o) = r.attention_on_truth {
            overlap += o;
            overlap_count += 1;
        }
        timing += r.timing_us as f64;
    }

    let novel_ranks: Vec<usize> = records
        .iter()
        .zip(&ranks)
        .filter(|(r, _)| r.novel)
        .map(|(_, &rank)| rank)
        .collect();
    let failure_rate_novel = if novel_ranks.is_empty() {
        0.0
    } else {
        1.0 - frac_within(&mut novel_ranks.iter().copied(), 1, novel_ranks.len() as f64)
    };

    Ok(Report {
        scenes: records.len(),
        scene_set_digest: scene_set_digest(records.iter().map(|r| r.scene_id.as_str())),
        top1: frac_within(&mut ranks.iter().copied(), 1, n),
        top5: frac_within(&mut ranks.iter().copied(), 5, n),
        map: mean_average_precision(records, labelset)?,
        recall_at,
        precision_at,
        mean_ambiguity: ambiguity / n,
        mean_margin: margin / n,
        mean_truth_similarity: truth_sim / n,
        mean_context_weight: ctx_weight / n,
        mean_attention_overlap: (overlap_count > 0).then(|| overlap / overlap_count as f64),
        novel_scenes: novel_ranks.len(),
        failure_rate_novel,
        ablation: None,
        baseline_top1: None,
        gen_gain_points: None,
        ms_per_sample: timing / n / 1000.0,
    })
}

impl Report {
    /// Records an ablation run against `baseline`, filling in the gain.
    pub fn with_ablation(mut self, name: &str, baseline: &Report) -> Result<Self> {
        let gain = generalization_gain(&self, baseline)?;
        self.ablation = Some(name.to_string());
        self.baseline_top1 = Some(baseline.top1);
        self.gen_gain_points = Some(gain);
        Ok(self)
    }

    /// `(field, description, value)` rows, one per field.
    pub fn table_rows(&self) -> Vec<(&'static str, &'static str, String)> {
        let opt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.6}"));
        let at = |m: &BTreeMap<usize, f64>| {
            m.iter()
                .map(|(k, v)| format!("@{k}={v:.6}"))
                .collect::<Vec<_>>()
                .join(" ")
        };
        vec![
            ("scenes", "Number of evaluated scenes", self.scenes.to_string()),
            (
                "scene_set_digest",
                "SHA-256 of the sorted scene ids",
                self.scene_set_digest.clone(),
            ),
            ("top1", "Top-1 accuracy (fraction)", format!("{:.6}", self.top1)),
            ("top5", "Top-5 accuracy (fraction)", format!("{:.6}", self.top5)),
            ("map", "Mean average precision over classes", format!("{:.6}", self.map)),
            ("recall_at", "Recall at each cutoff", at(&self.recall_at)),
            ("precision_at", "Precision at each cutoff", at(&self.precision_at)),
            (
                "mean_ambiguity",
                "Scene ambiguity index (normalized entropy)",
                format!("{:.6}", self.mean_ambiguity),
            ),
            (
                "mean_margin",
                "Similarity margin, correct minus best incorrect",
                format!("{:.6}", self.mean_margin),
            ),
            (
                "mean_truth_similarity",
                "Mean cosine between image and correct prompt",
                format!("{:.6}", self.mean_truth_similarity),
            ),
            (
                "mean_context_weight",
                "Mean share of scene-level context",
                format!("{:.6}", self.mean_context_weight),
            ),
            (
                "mean_attention_overlap",
                "Attention overlap with ground-truth objects",
                opt(self.mean_attention_overlap),
            ),
            (
                "novel_scenes",
                "Scenes from held-out classes",
                self.novel_scenes.to_string(),
            ),
            (
                "failure_rate_novel",
                "Top-1 failure rate on held-out classes",
                format!("{:.6}", self.failure_rate_novel),
            ),
            (
                "ablation",
                "Ablated component",
                self.ablation.clone().unwrap_or_else(|| "none".into()),
            ),
            (
                "baseline_top1",
                "Top-1 accuracy of the ablated baseline",
                opt(self.baseline_top1),
            ),
            (
                "gen_gain_points",
                "Top-1 gain over baseline (percentage points)",
                opt(self.gen_gain_points),
            ),
            (
                "ms_per_sample",
                "Mean reasoning time per scene (ms)",
                format!("{:.6}", self.ms_per_sample),
            ),
        ]
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::from("| Parameter | Description | Value |\n|---|---|---|\n");
        for (field, desc, value) in self.table_rows() {
            let _ = writeln!(out, "| {field} | {desc} | {value} |");
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("parameter,description,value\n");
        for (field, desc, value) in self.table_rows() {
            let _ = writeln!(out, "{field},\"{desc}\",{value}");
        }
        out
    }
}
