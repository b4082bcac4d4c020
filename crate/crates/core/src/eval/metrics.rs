//! Centre-error and overlap metrics with precision/success curve data.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tracker::BoundingBox;

pub const DEFAULT_DP_THRESHOLD: f64 = 20.0;
pub const DEFAULT_OP_IOU: f64 = 0.5;
/// Precision curve thresholds 0..=50 px.
pub const PRECISION_MAX_PX: usize = 50;
/// Success curve IoU grid 0, 0.05, ..., 1.
pub const SUCCESS_STEPS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub frames: usize,
    pub mean_cle: f64,
    pub dp_threshold: f64,
    pub dp_at_threshold: f64,
    pub op_iou: f64,
    pub op_at_iou: f64,
    pub auc: f64,
    pub precision_curve: Vec<(f64, f64)>,
    pub success_curve: Vec<(f64, f64)>,
}

pub fn center_error(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let (ax, ay) = a.center();
    let (bx, by) = b.center();
    (ax - bx).hypot(ay - by)
}

/// Intersection over union; 0 for disjoint boxes.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    if a == b && a.w > 0.0 && a.h > 0.0 {
        return 1.0;
    }
    let ix = ((a.x + a.w).min(b.x + b.w) - a.x.max(b.x)).max(0.0);
    let iy = ((a.y + a.h).min(b.y + b.h) - a.y.max(b.y)).max(0.0);
    let inter = ix * iy;
    let union = a.w * a.h + b.w * b.h - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

fn fraction(values: &[f64], pred: impl Fn(f64) -> bool) -> f64 {
    values.iter().filter(|&&v| pred(v)).count() as f64 / values.len() as f64
}

pub fn compute_metrics(
    pred: &[BoundingBox],
    gt: &[BoundingBox],
    dp_threshold: f64,
    op_iou: f64,
) -> Result<MetricsReport> {
    if pred.len() != gt.len() {
        return Err(Error::Input(format!(
            "{} predicted boxes for {} ground-truth boxes",
            pred.len(),
            gt.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::Input("no boxes to evaluate".into()));
    }
    let cle: Vec<f64> = pred.iter().zip(gt).map(|(p, g)| center_error(p, g)).collect();
    let overlaps: Vec<f64> = pred.iter().zip(gt).map(|(p, g)| iou(p, g)).collect();
    let precision_curve: Vec<(f64, f64)> = (0..=PRECISION_MAX_PX)
        .map(|t| (t as f64, fraction(&cle, |c| c <= t as f64)))
        .collect();
    let success_curve: Vec<(f64, f64)> = (0..=SUCCESS_STEPS)
        .map(|s| {
            let t = s as f64 / SUCCESS_STEPS as f64;
            (t, fraction(&overlaps, |o| o >= t))
        })
        .collect();
    let auc = success_curve.iter().map(|(_, f)| f).sum::<f64>() / success_curve.len() as f64;
    Ok(MetricsReport {
        frames: pred.len(),
        mean_cle: cle.iter().sum::<f64>() / cle.len() as f64,
        dp_threshold,
        dp_at_threshold: fraction(&cle, |c| c <= dp_threshold),
        op_iou,
        op_at_iou: fraction(&overlaps, |o| o >= op_iou),
        auc,
        precision_curve,
        success_curve,
    })
}

impl MetricsReport {
    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "frames            {}", self.frames);
        let _ = writeln!(s, "mean CLE (px)     {:.3}", self.mean_cle);
        let _ = writeln!(s, "DP @ {:<5} px     {:.3}", self.dp_threshold, self.dp_at_threshold);
        let _ = writeln!(s, "OP @ IoU {:<5}    {:.3}", self.op_iou, self.op_at_iou);
        let _ = writeln!(s, "AUC               {:.3}", self.auc);
        s
    }
}

/// Writes a curve as CSV with header `threshold,fraction`.
pub fn write_curve_csv(path: &Path, curve: &[(f64, f64)]) -> Result<()> {
    let mut s = String::from("threshold,fraction\n");
    for (t, f) in curve {
        let _ = writeln!(s, "{t},{f}");
    }
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(x: f64, y: f64, w: f64, h: f64) -> BoundingBox {
        BoundingBox::new(x, y, w, h)
    }

    #[test]
    fn perfect_tracking() {
        let boxes = vec![b(1.0, 2.0, 10.0, 12.0), b(5.0, 5.0, 3.0, 3.0)];
        let m = compute_metrics(&boxes, &boxes, 20.0, 0.5).unwrap();
        assert_eq!(m.mean_cle, 0.0);
        assert_eq!(m.dp_at_threshold, 1.0);
        assert_eq!(m.op_at_iou, 1.0);
        assert_eq!(m.auc, 1.0);
    }

    #[test]
    fn half_offset_iou_is_one_third() {
        let a = b(0.0, 0.0, 10.0, 10.0);
        let c = b(5.0, 0.0, 10.0, 10.0);
        assert!((iou(&a, &c) - 1.0 / 3.0).abs() < 1e-15);
        let m = compute_metrics(&[c], &[a], 20.0, 0.5).unwrap();
        assert_eq!(m.op_at_iou, 0.0);
        assert_eq!(m.mean_cle, 5.0);
    }

    #[test]
    fn dp_threshold_is_inclusive() {
        let m = compute_metrics(&[b(20.0, 0.0, 4.0, 4.0)], &[b(0.0, 0.0, 4.0, 4.0)], 20.0, 0.5).unwrap();
        assert_eq!(m.mean_cle, 20.0);
        assert_eq!(m.dp_at_threshold, 1.0);
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(
            compute_metrics(&[b(0.0, 0.0, 1.0, 1.0)], &[], 20.0, 0.5),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn curve_grids() {
        let m = compute_metrics(&[b(0.0, 0.0, 1.0, 1.0)], &[b(0.0, 0.0, 1.0, 1.0)], 20.0, 0.5).unwrap();
        assert_eq!(m.precision_curve.len(), 51);
        assert_eq!(m.success_curve.len(), 21);
        assert_eq!(m.success_curve[20].0, 1.0);
    }

    #[test]
    fn csv_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.csv");
        write_curve_csv(&p, &[(0.0, 0.5), (1.0, 1.0)]).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("threshold,fraction\n0,0.5\n"));
    }
}
