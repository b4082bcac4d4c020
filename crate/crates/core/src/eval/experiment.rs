//! Tracking runs, variant ablations and regularisation sweeps.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::synthetic_spec_from_str;
use crate::error::{Error, Result};
use crate::eval::{compute_metrics, rank_diagnostic, MetricsReport, RankDiagnostic, SequenceData, SyntheticSpec};
use crate::tensor::RealTensor3;
use crate::tracker::{track_sequence, BoundingBox, FrameDiagnostics, TrackOutput, TrackerConfig, Variant};

/// Thresholds used when scoring a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub dp_threshold: f64,
    pub op_iou: f64,
    pub rank_tolerance: f64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            dp_threshold: 20.0,
            op_iou: 0.5,
            rank_tolerance: crate::eval::DEFAULT_TOLERANCE_RATIO,
        }
    }
}

/// Results document of one tracking run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackResults {
    pub sequence: String,
    pub variant: Variant,
    pub config: TrackerConfig,
    pub boxes: Vec<BoundingBox>,
    /// Present when ground truth covers every frame.
    pub metrics: Option<MetricsReport>,
    /// Present when the run kept its filter history.
    pub rank: Option<RankDiagnostic>,
    pub diagnostics: Vec<FrameDiagnostics>,
}

impl TrackResults {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_json(text: &str, path: &Path) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Decode {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

/// Tracks `seq` from its first ground-truth box.
pub fn run_tracker(seq: &SequenceData, cfg: &TrackerConfig, opts: &EvalOptions) -> Result<(TrackOutput, TrackResults)> {
    let init = *seq
        .groundtruth
        .first()
        .ok_or_else(|| Error::Input(format!("sequence '{}' has no initial box", seq.name)))?;
    let out = track_sequence(seq.frames(), init, cfg)?;
    let metrics = if seq.groundtruth.len() == out.boxes.len() {
        Some(compute_metrics(&out.boxes, &seq.groundtruth, opts.dp_threshold, opts.op_iou)?)
    } else {
        None
    };
    let rank = out
        .filter_history
        .as_deref()
        .map(|h| rank_diagnostic(h, opts.rank_tolerance))
        .transpose()?;
    let results = TrackResults {
        sequence: seq.name.clone(),
        variant: cfg.variant,
        config: cfg.clone(),
        boxes: out.boxes.clone(),
        metrics,
        rank,
        diagnostics: out.diagnostics.clone(),
    };
    Ok((out, results))
}

/// Filter energy summed over channels, one value per spatial cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub side: usize,
    /// Row-major.
    pub energy: Vec<f64>,
}

impl Heatmap {
    pub fn from_filter(w: &RealTensor3) -> Self {
        let mut energy = vec![0.0; w.side() * w.side()];
        for k in 0..w.channels() {
            for (e, v) in energy.iter_mut().zip(w.channel(k)) {
                *e += v * v;
            }
        }
        Heatmap { side: w.side(), energy }
    }

    pub fn nonzero_cells(&self) -> usize {
        self.energy.iter().filter(|&&e| e > 0.0).count()
    }
}

/// Outcome of one variant in an ablation; a failed run keeps its error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantOutcome {
    pub metrics: Option<MetricsReport>,
    pub heatmap: Option<Heatmap>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub sequence: String,
    pub variants: BTreeMap<Variant, VariantOutcome>,
}

/// Runs all five variants with otherwise identical settings.
pub fn run_ablation(seq: &SequenceData, base: &TrackerConfig, opts: &EvalOptions) -> AblationReport {
    let variants = Variant::ALL
        .par_iter()
        .map(|&variant| {
            let cfg = TrackerConfig {
                variant,
                ..base.clone()
            };
            let outcome = match run_tracker(seq, &cfg, opts) {
                Ok((out, res)) => VariantOutcome {
                    metrics: res.metrics,
                    heatmap: Some(Heatmap::from_filter(&out.last_learned)),
                    error: None,
                },
                Err(e) => VariantOutcome {
                    metrics: None,
                    heatmap: None,
                    error: Some(e.to_string()),
                },
            };
            (variant, outcome)
        })
        .collect();
    AblationReport {
        sequence: seq.name.clone(),
        variants,
    }
}

/// Value lists for the three group/temporal weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub lambda_spatial: Vec<f64>,
    pub lambda_channel: Vec<f64>,
    pub lambda_temporal: Vec<f64>,
}

impl SweepGrid {
    /// The grid holding only the weights of `cfg`.
    pub fn single(cfg: &TrackerConfig) -> Self {
        SweepGrid {
            lambda_spatial: vec![cfg.reg.lambda_spatial],
            lambda_channel: vec![cfg.reg.lambda_channel],
            lambda_temporal: vec![cfg.reg.lambda_temporal],
        }
    }

    /// Cartesian product, temporal weight varying fastest.
    pub fn points(&self) -> Vec<(f64, f64, f64)> {
        let mut pts = Vec::new();
        for &s in &self.lambda_spatial {
            for &c in &self.lambda_channel {
                for &t in &self.lambda_temporal {
                    pts.push((s, c, t));
                }
            }
        }
        pts
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda_spatial: f64,
    pub lambda_channel: f64,
    pub lambda_temporal: f64,
    pub auc: Option<f64>,
    pub mean_cle: Option<f64>,
    pub error: Option<String>,
}

/// One tracking run per grid point; rows follow [`SweepGrid::points`].
pub fn sensitivity_sweep(
    seq: &SequenceData,
    base: &TrackerConfig,
    grid: &SweepGrid,
    opts: &EvalOptions,
) -> Result<Vec<SweepRow>> {
    if grid.lambda_spatial.is_empty() || grid.lambda_channel.is_empty() || grid.lambda_temporal.is_empty() {
        return Err(Error::Config("every sweep list needs at least one value".into()));
    }
    if seq.groundtruth.len() != seq.len() {
        return Err(Error::Input(format!(
            "sweep needs ground truth for all {} frames, found {}",
            seq.len(),
            seq.groundtruth.len()
        )));
    }
    let rows = grid
        .points()
        .into_par_iter()
        .map(|(s, c, t)| {
            let mut cfg = base.clone();
            cfg.reg.lambda_spatial = s;
            cfg.reg.lambda_channel = c;
            cfg.reg.lambda_temporal = t;
            let run = cfg.validate().and_then(|_| run_tracker(seq, &cfg, opts));
            let (metrics, error) = match run {
                Ok((_, res)) => (res.metrics, None),
                Err(e) => (None, Some(e.to_string())),
            };
            SweepRow {
                lambda_spatial: s,
                lambda_channel: c,
                lambda_temporal: t,
                auc: metrics.as_ref().map(|m| m.auc),
                mean_cle: metrics.as_ref().map(|m| m.mean_cle),
                error,
            }
        })
        .collect();
    Ok(rows)
}

const SUITE: [(&str, &str); 3] = [
    ("blob_walk.spec", include_str!("../../data/suite/blob_walk.spec")),
    ("square_bounce.spec", include_str!("../../data/suite/square_bounce.spec")),
    ("blob_zigzag.spec", include_str!("../../data/suite/blob_zigzag.spec")),
];

/// Bundled synthetic sequences: each base spec once per seed, named `<base>_s<seed>`.
pub fn bundled_suite(seeds: &[u64]) -> Vec<SyntheticSpec> {
    let mut specs = Vec::new();
    for (file, text) in SUITE {
        let base = synthetic_spec_from_str(text, Path::new(file)).expect("bundled specs are valid");
        for &seed in seeds {
            specs.push(SyntheticSpec {
                name: format!("{}_s{seed}", base.name),
                seed,
                ..base.clone()
            });
        }
    }
    specs
}

/// Mean CLE per variant over several sequences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub reports: Vec<AblationReport>,
    /// `None` when any run of the variant failed.
    pub mean_cle: BTreeMap<Variant, Option<f64>>,
}

pub fn summarise_ablations(reports: Vec<AblationReport>) -> SuiteSummary {
    let mean_cle = Variant::ALL
        .into_iter()
        .map(|v| {
            let cles: Option<Vec<f64>> = reports
                .iter()
                .map(|r| r.variants.get(&v).and_then(|o| o.metrics.as_ref()).map(|m| m.mean_cle))
                .collect();
            let mean = cles.filter(|c| !c.is_empty()).map(|c| c.iter().sum::<f64>() / c.len() as f64);
            (v, mean)
        })
        .collect();
    SuiteSummary { reports, mean_cle }
}
