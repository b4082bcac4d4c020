//! Frame-to-frame tracking: detect with the running model, then learn at the
//! new location and blend.

mod config;

use std::ops::Range;

use serde::{Deserialize, Serialize};

pub use config::{tracking_admm, TrackerConfig, Variant};

use crate::error::{Error, Result};
use crate::features::{concat_blocks, extract, hann_window};
use crate::image::Image;
use crate::solver::{admm_solve, gaussian_label, model_update, RegularisationConfig, ResponseLabel, SelectionMask};
use crate::tensor::{circ_correlate, Grid2D, RealMatrix, RealTensor3};

/// Axis-aligned box in 0-indexed pixel coordinates (top-left corner + size).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        BoundingBox { x, y, w, h }
    }

    pub fn from_center(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        BoundingBox {
            x: cx - w / 2.0,
            y: cy - h / 2.0,
            w,
            h,
        }
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn is_valid(&self) -> bool {
        [self.x, self.y, self.w, self.h].iter().all(|v| v.is_finite()) && self.w > 0.0 && self.h > 0.0
    }

    /// Intersection with the `width x height` frame.
    pub fn clip(&self, width: usize, height: usize) -> BoundingBox {
        let (fw, fh) = (width as f64, height as f64);
        if self.x >= 0.0 && self.y >= 0.0 && self.x + self.w <= fw && self.y + self.h <= fh {
            return *self;
        }
        let x0 = self.x.clamp(0.0, fw);
        let y0 = self.y.clamp(0.0, fh);
        let x1 = (self.x + self.w).clamp(0.0, fw);
        let y1 = (self.y + self.h).clamp(0.0, fh);
        BoundingBox::new(x0, y0, x1 - x0, y1 - y0)
    }
}

/// One input frame. `features` carries a full-frame externally computed
/// feature map (cell grid) when the tracker runs on external features.
#[derive(Debug, Clone)]
pub struct Frame {
    pub image: Image,
    pub features: Option<RealTensor3>,
}

impl Frame {
    pub fn from_image(image: Image) -> Self {
        Frame { image, features: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResponseMap {
    pub values: RealMatrix,
    pub peak: (usize, usize),
    pub peak_value: f64,
    pub scale_index: usize,
}

#[derive(Debug, Clone)]
pub struct TrackState {
    pub bbox: BoundingBox,
    /// Running model used for detection (blended).
    pub model_filter: RealTensor3,
    /// Last learned filter before blending; anchors the temporal term.
    pub prev_filter: RealTensor3,
    pub frame_index: usize,
    /// Vectorised learned filters, one per frame, when diagnostics are on.
    pub filter_history: Option<Vec<Vec<f64>>>,
    pub last_mask: SelectionMask,
    cfg: TrackerConfig,
    label: ResponseLabel,
    blocks: Vec<Range<usize>>,
    /// Per-block feature gains fixed on the first frame.
    gains: Vec<f64>,
    /// Feature grid of the search window.
    grid: Grid2D,
}

impl TrackState {
    pub fn config(&self) -> &TrackerConfig {
        &self.cfg
    }

    pub fn grid(&self) -> Grid2D {
        self.grid
    }

    pub fn blocks(&self) -> &[Range<usize>] {
        &self.blocks
    }

    /// Replaces the regularisation weights used by subsequent `learn` calls.
    pub fn set_regularisation(&mut self, reg: RegularisationConfig) -> Result<()> {
        reg.validate()?;
        self.cfg.reg = reg;
        Ok(())
    }
}

/// Source-pixel side of the search window for `bbox` at relative scale `scale`.
fn crop_side(cfg: &TrackerConfig, bbox: &BoundingBox, scale: f64) -> f64 {
    bbox.w.max(bbox.h) * (1.0 + cfg.padding) * scale
}

/// Pixels per feature cell for a window at `scale`.
fn cell_pixels(cfg: &TrackerConfig, bbox: &BoundingBox, scale: f64) -> f64 {
    if cfg.features.is_external() {
        cfg.features.cell_size as f64
    } else {
        cfg.features.cell_size as f64 * crop_side(cfg, bbox, scale) / cfg.model_side as f64
    }
}

/// Feature tensor of the search window centred on `bbox`, plus block ranges.
fn window_features(
    cfg: &TrackerConfig,
    frame: &Frame,
    bbox: &BoundingBox,
    scale: f64,
) -> Result<(RealTensor3, Vec<Range<usize>>)> {
    let (cx, cy) = bbox.center();
    if cfg.features.is_external() {
        let map = frame
            .features
            .as_ref()
            .ok_or_else(|| Error::Input("frame has no external feature map".into()))?;
        let n = map.side() as isize;
        let cs = cfg.features.cell_size as f64;
        let ci = (cy / cs).floor() as isize;
        let cj = (cx / cs).floor() as isize;
        let mut t = map.roll(n / 2 - ci, n / 2 - cj);
        if cfg.features.cosine_window {
            t.apply_window(&hann_window(t.side()));
        }
        let c = t.channels();
        return Ok((t, vec![0..c]));
    }
    let patch = frame
        .image
        .crop_resample(cx, cy, crop_side(cfg, bbox, scale), cfg.model_side);
    let mut blocks = extract(&patch, &cfg.features)?;
    let tensor = concat_blocks(&mut blocks)?;
    Ok((tensor, blocks.into_iter().map(|b| b.channel_range).collect()))
}

/// Per-block gains that bring each block to unit mean square; all-zero
/// blocks get gain 1.
pub fn block_gains(t: &RealTensor3, blocks: &[Range<usize>]) -> Vec<f64> {
    let plane = t.side() * t.side();
    blocks
        .iter()
        .map(|b| {
            let data = &t.data()[b.start * plane..b.end * plane];
            let ms = data.iter().map(|v| v * v).sum::<f64>() / data.len() as f64;
            if ms > 0.0 {
                ms.sqrt().recip()
            } else {
                1.0
            }
        })
        .collect()
}

pub fn apply_block_gains(t: &mut RealTensor3, blocks: &[Range<usize>], gains: &[f64]) {
    let plane = t.side() * t.side();
    for (b, &g) in blocks.iter().zip(gains) {
        t.data_mut()[b.start * plane..b.end * plane]
            .iter_mut()
            .for_each(|v| *v *= g);
    }
}

/// Window features scaled by the gains fixed on the first frame.
fn scaled_features(state: &TrackState, frame: &Frame, scale: f64) -> Result<(RealTensor3, Vec<Range<usize>>)> {
    let (mut x, blocks) = window_features(&state.cfg, frame, &state.bbox, scale)?;
    if x.shape() != state.prev_filter.shape() {
        return Err(Error::shape(state.prev_filter.shape(), x.shape()));
    }
    apply_block_gains(&mut x, &blocks, &state.gains);
    Ok((x, blocks))
}

fn learn_at(state: &mut TrackState, frame: &Frame) -> Result<RealTensor3> {
    let (x, blocks) = scaled_features(state, frame, 1.0)?;
    state.blocks = blocks;
    let (reg, sel) = state.cfg.effective();
    let sol = admm_solve(
        &x,
        &state.label,
        &state.prev_filter,
        &reg,
        &sel,
        &state.cfg.admm,
        &state.blocks,
    )?;
    state.last_mask = sol.mask;
    if let Some(h) = state.filter_history.as_mut() {
        h.push(sol.filter.data().to_vec());
    }
    Ok(sol.filter)
}

/// Learns the first filter at `bbox` (clipped to the frame).
pub fn init(frame: &Frame, bbox: BoundingBox, cfg: &TrackerConfig) -> Result<TrackState> {
    cfg.validate()?;
    if !bbox.is_valid() {
        return Err(Error::Input(format!("invalid initial box {bbox:?}")));
    }
    let clipped = bbox.clip(frame.image.width(), frame.image.height());
    if clipped.w < 2.0 || clipped.h < 2.0 {
        return Err(Error::Input(format!(
            "degenerate initial box {:.1}x{:.1} after clipping",
            clipped.w, clipped.h
        )));
    }

    let (side, target_cells) = if cfg.features.is_external() {
        let map = frame
            .features
            .as_ref()
            .ok_or_else(|| Error::Input("external features configured but frame has none".into()))?;
        let cs = cfg.features.cell_size as f64;
        (map.side(), (clipped.w / cs, clipped.h / cs))
    } else {
        let cell = cell_pixels(cfg, &clipped, 1.0);
        (cfg.model_side / cfg.features.cell_size, (clipped.w / cell, clipped.h / cell))
    };
    let grid = Grid2D::square(side)?;
    let label = gaussian_label(grid, cfg.sigma_factor, target_cells);
    let (x, blocks) = window_features(cfg, frame, &clipped, 1.0)?;
    let gains = if cfg.normalise_features {
        block_gains(&x, &blocks)
    } else {
        vec![1.0; blocks.len()]
    };
    let zero = RealTensor3::zeros(x.side(), x.channels());
    let mut state = TrackState {
        bbox: clipped,
        model_filter: zero.clone(),
        prev_filter: zero,
        frame_index: 1,
        filter_history: cfg.keep_history.then(Vec::new),
        last_mask: SelectionMask::keep_all(x.side(), x.channels()),
        cfg: cfg.clone(),
        label,
        blocks,
        gains,
        grid,
    };
    let learned = learn_at(&mut state, frame)?;
    state.model_filter = learned.clone();
    state.prev_filter = learned;
    Ok(state)
}

/// Signed displacement of a circular peak index.
pub fn signed_shift(index: usize, n: usize) -> isize {
    if index > n / 2 {
        index as isize - n as isize
    } else {
        index as isize
    }
}

/// Searches every configured scale and moves the box to the best response.
pub fn detect(state: &mut TrackState, frame: &Frame) -> Result<(BoundingBox, ResponseMap)> {
    let scales: Vec<f64> = if state.cfg.features.is_external() {
        vec![1.0]
    } else {
        state.cfg.scale_factors.clone()
    };
    let mut best: Option<ResponseMap> = None;
    for (si, &s) in scales.iter().enumerate() {
        let (x, _) = scaled_features(state, frame, s)?;
        let values = circ_correlate(&x, &state.model_filter)?;
        let (pi, pj, pv) = values.argmax();
        if best.as_ref().is_none_or(|b| pv > b.peak_value) {
            best = Some(ResponseMap {
                values,
                peak: (pi, pj),
                peak_value: pv,
                scale_index: si,
            });
        }
    }
    let best = best.expect("at least one scale");
    let s = if state.cfg.features.is_external() {
        1.0
    } else {
        state.cfg.scale_factors[best.scale_index]
    };
    let n = state.grid.side();
    let cell = cell_pixels(&state.cfg, &state.bbox, s);
    let dy = signed_shift(best.peak.0, n) as f64 * cell;
    let dx = signed_shift(best.peak.1, n) as f64 * cell;
    let (cx, cy) = state.bbox.center();
    let width = frame.image.width() as f64;
    let height = frame.image.height() as f64;
    let ncx = (cx + dx).clamp(0.0, width);
    let ncy = (cy + dy).clamp(0.0, height);
    let b = state.bbox;
    state.bbox = if s == 1.0 {
        BoundingBox::new(b.x + (ncx - cx), b.y + (ncy - cy), b.w, b.h)
    } else {
        BoundingBox::from_center(ncx, ncy, b.w * s, b.h * s)
    };
    Ok((state.bbox, best))
}

/// Learns at the current box and blends into the running model.
pub fn learn(state: &mut TrackState, frame: &Frame) -> Result<()> {
    let learned = learn_at(state, frame)?;
    state.model_filter = model_update(&learned, &state.model_filter, state.cfg.alpha)?;
    state.prev_filter = learned;
    state.frame_index += 1;
    Ok(())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FrameDiagnostics {
    pub peak_value: Option<f64>,
    pub scale_index: Option<usize>,
    pub kept_channels: Vec<usize>,
    pub kept_cells: usize,
}

#[derive(Debug, Clone)]
pub struct TrackOutput {
    pub boxes: Vec<BoundingBox>,
    pub diagnostics: Vec<FrameDiagnostics>,
    pub filter_history: Option<Vec<Vec<f64>>>,
    /// Blended model after the last frame.
    pub final_filter: RealTensor3,
    /// Last learned (masked, pre-blend) filter.
    pub last_learned: RealTensor3,
    pub final_mask: SelectionMask,
}

fn mask_diagnostics(state: &TrackState) -> (Vec<usize>, usize) {
    (state.last_mask.kept_channels(), state.last_mask.kept_cells())
}

/// Tracks through `frames`; the first box is `init_box` verbatim.
pub fn track_sequence<I>(frames: I, init_box: BoundingBox, cfg: &TrackerConfig) -> Result<TrackOutput>
where
    I: IntoIterator<Item = Result<Frame>>,
{
    let mut frames = frames.into_iter();
    let first = frames
        .next()
        .ok_or_else(|| Error::Input("sequence has no frames".into()))??;
    let mut state = init(&first, init_box, cfg)?;
    let (kept_channels, kept_cells) = mask_diagnostics(&state);
    let mut boxes = vec![init_box];
    let mut diagnostics = vec![FrameDiagnostics {
        peak_value: None,
        scale_index: None,
        kept_channels,
        kept_cells,
    }];
    for frame in frames {
        let frame = frame?;
        let (bbox, response) = detect(&mut state, &frame)?;
        learn(&mut state, &frame)?;
        boxes.push(bbox);
        let (kept_channels, kept_cells) = mask_diagnostics(&state);
        diagnostics.push(FrameDiagnostics {
            peak_value: Some(response.peak_value),
            scale_index: Some(response.scale_index),
            kept_channels,
            kept_cells,
        });
    }
    Ok(TrackOutput {
        boxes,
        diagnostics,
        filter_history: state.filter_history.take(),
        final_filter: state.model_filter.clone(),
        last_learned: state.prev_filter.clone(),
        final_mask: state.last_mask.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{generate_synthetic, Motion, SyntheticSpec};

    /// Blob of size 25.6 px: 64 px crop, 4 px cells.
    fn blob_frames(frames: usize, motion: Motion) -> (Vec<Frame>, Vec<BoundingBox>) {
        let spec = SyntheticSpec {
            width: 160,
            height: 160,
            frames,
            object_size: 25.6,
            motion,
            ..SyntheticSpec::default()
        };
        let seq = generate_synthetic(&spec).unwrap();
        (seq.frames, seq.groundtruth)
    }

    fn single_scale(variant: Variant) -> TrackerConfig {
        TrackerConfig {
            variant,
            scale_factors: vec![1.0],
            ..TrackerConfig::default()
        }
    }

    #[test]
    fn shift_convention() {
        assert_eq!(signed_shift(0, 16), 0);
        assert_eq!(signed_shift(8, 16), 8);
        assert_eq!(signed_shift(9, 16), -7);
        assert_eq!(signed_shift(15, 16), -1);
        assert_eq!(signed_shift(2, 5), 2);
        assert_eq!(signed_shift(3, 5), -2);
    }

    #[test]
    fn clipping() {
        let b = BoundingBox::new(-5.0, 10.0, 20.0, 20.0).clip(100, 25);
        assert_eq!(b, BoundingBox::new(0.0, 10.0, 15.0, 15.0));
    }

    #[test]
    fn self_detection_does_not_move() {
        let (frames, gt) = blob_frames(1, Motion::Linear { vx: 0.0, vy: 0.0 });
        let mut st = init(&frames[0], gt[0], &TrackerConfig::default()).unwrap();
        let (b, r) = detect(&mut st, &frames[0]).unwrap();
        assert_eq!(r.peak, (0, 0));
        assert_eq!(b.center(), gt[0].center());
    }

    #[test]
    fn partially_outside_box_is_clipped() {
        let (frames, _) = blob_frames(1, Motion::Linear { vx: 0.0, vy: 0.0 });
        let st = init(&frames[0], BoundingBox::new(-10.0, 150.0, 30.0, 30.0), &single_scale(Variant::All)).unwrap();
        assert_eq!(st.bbox, BoundingBox::new(0.0, 150.0, 20.0, 10.0));
        assert!(matches!(
            init(&frames[0], BoundingBox::new(159.0, 0.0, 30.0, 30.0), &single_scale(Variant::All)),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn baseline_and_all_share_shape() {
        let (frames, gt) = blob_frames(1, Motion::Linear { vx: 0.0, vy: 0.0 });
        let base = init(&frames[0], gt[0], &single_scale(Variant::Baseline)).unwrap();
        let all = init(&frames[0], gt[0], &single_scale(Variant::All)).unwrap();
        assert_eq!(base.model_filter.shape(), all.model_filter.shape());
        let n = base.model_filter.side();
        let c = base.model_filter.channels();
        let cell_energy = |w: &RealTensor3, i: usize, j: usize| (0..c).map(|k| w.get(i, j, k).powi(2)).sum::<f64>();
        let zero_cells = |w: &RealTensor3| {
            (0..n)
                .flat_map(|i| (0..n).map(move |j| (i, j)))
                .filter(|&(i, j)| cell_energy(w, i, j) == 0.0)
                .count()
        };
        assert_eq!(zero_cells(&base.model_filter), 0);
        assert!(zero_cells(&all.model_filter) > 0);
    }

    #[test]
    fn two_cell_translation_is_recovered() {
        let (frames, gt) = blob_frames(2, Motion::Linear { vx: 8.0, vy: 0.0 });
        let mut st = init(&frames[0], gt[0], &single_scale(Variant::All)).unwrap();
        let (b, r) = detect(&mut st, &frames[1]).unwrap();
        assert_eq!(r.peak, (0, 2));
        assert_eq!(b.center(), gt[1].center());
    }

    #[test]
    fn static_scene_keeps_the_box() {
        let (frames, gt) = blob_frames(1, Motion::Linear { vx: 0.0, vy: 0.0 });
        let coarse = vec![1.0 / 1.1, 1.0, 1.1];
        let cases = Variant::ALL
            .into_iter()
            .map(|v| single_scale(v))
            .chain([Variant::Baseline, Variant::Cs, Variant::Lr].map(|v| TrackerConfig {
                scale_factors: coarse.clone(),
                ..single_scale(v)
            }));
        for cfg in cases {
            let mut st = init(&frames[0], gt[0], &cfg).unwrap();
            for _ in 0..3 {
                let (b, _) = detect(&mut st, &frames[0]).unwrap();
                learn(&mut st, &frames[0]).unwrap();
                assert_eq!(b, gt[0], "{} {:?}", cfg.variant, cfg.scale_factors);
            }
            assert_eq!(st.frame_index, 4);
        }
    }

    #[test]
    fn zero_rate_freezes_the_model() {
        let (frames, gt) = blob_frames(2, Motion::Linear { vx: 4.0, vy: 0.0 });
        let cfg = TrackerConfig {
            alpha: 0.0,
            ..single_scale(Variant::All)
        };
        let mut st = init(&frames[0], gt[0], &cfg).unwrap();
        let before = st.model_filter.clone();
        detect(&mut st, &frames[1]).unwrap();
        learn(&mut st, &frames[1]).unwrap();
        assert_eq!(st.model_filter, before);
        assert_ne!(st.prev_filter, before);
    }

    #[test]
    fn strong_temporal_term_anchors_the_filter() {
        let (frames, gt) = blob_frames(1, Motion::Linear { vx: 0.0, vy: 0.0 });
        let cfg = single_scale(Variant::Lr);
        let mut st = init(&frames[0], gt[0], &cfg).unwrap();
        st.set_regularisation(RegularisationConfig {
            lambda_temporal: 1e6,
            ..cfg.reg
        })
        .unwrap();
        let prev = st.prev_filter.clone();
        learn(&mut st, &frames[0]).unwrap();
        let rel = st.prev_filter.sub(&prev).unwrap().norm() / prev.norm();
        assert!(rel < 1e-2, "relative change {rel}");
    }

    #[test]
    fn history_has_one_column_per_frame() {
        let (frames, gt) = blob_frames(3, Motion::Linear { vx: 4.0, vy: 4.0 });
        let cfg = TrackerConfig {
            keep_history: true,
            ..single_scale(Variant::All)
        };
        let out = track_sequence(frames.into_iter().map(Ok), gt[0], &cfg).unwrap();
        let history = out.filter_history.unwrap();
        let (n, c) = (out.final_filter.side(), out.final_filter.channels());
        assert_eq!(history.len(), 3);
        assert!(history.iter().all(|h| h.len() == n * n * c));
    }

    #[test]
    fn single_frame_echoes_the_init_box() {
        let (frames, _) = blob_frames(1, Motion::Linear { vx: 0.0, vy: 0.0 });
        let init_box = BoundingBox::new(60.3, 61.7, 25.0, 27.5);
        let out = track_sequence(frames.into_iter().map(Ok), init_box, &TrackerConfig::default()).unwrap();
        assert_eq!(out.boxes, vec![init_box]);
        assert_eq!(out.diagnostics.len(), 1);
    }

    #[test]
    fn empty_sequence_is_an_error() {
        let r = track_sequence(Vec::<Result<Frame>>::new(), BoundingBox::new(0.0, 0.0, 4.0, 4.0), &TrackerConfig::default());
        assert!(matches!(r, Err(Error::Input(_))));
    }

    #[test]
    fn frame_errors_propagate() {
        let (frames, gt) = blob_frames(1, Motion::Linear { vx: 0.0, vy: 0.0 });
        let input = vec![Ok(frames[0].clone()), Err(Error::Input("frame 2 unreadable".into()))];
        let err = track_sequence(input, gt[0], &single_scale(Variant::Baseline)).unwrap_err();
        assert!(err.to_string().contains("frame 2"));
    }

    #[test]
    fn repeated_runs_are_bit_identical() {
        let (frames, gt) = blob_frames(6, Motion::Sinusoidal { ax: 10.0, ay: 6.0, period: 12.0 });
        let run = || {
            track_sequence(frames.iter().cloned().map(Ok), gt[0], &TrackerConfig::default())
                .unwrap()
                .boxes
                .iter()
                .flat_map(|b| [b.x, b.y, b.w, b.h].map(f64::to_bits))
                .collect::<Vec<u64>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn baseline_equals_all_with_everything_off() {
        let (frames, gt) = blob_frames(5, Motion::Linear { vx: 4.0, vy: -4.0 });
        let base = TrackerConfig {
            keep_history: true,
            ..TrackerConfig::default()
        };
        let off = TrackerConfig {
            variant: Variant::All,
            reg: RegularisationConfig {
                lambda_spatial: 0.0,
                lambda_channel: 0.0,
                lambda_temporal: 0.0,
                ..base.reg
            },
            sel: crate::solver::SelectionConfig::keep_all(),
            ..base.clone()
        };
        let base = TrackerConfig {
            variant: Variant::Baseline,
            ..base
        };
        let a = track_sequence(frames.iter().cloned().map(Ok), gt[0], &base).unwrap();
        let b = track_sequence(frames.iter().cloned().map(Ok), gt[0], &off).unwrap();
        assert_eq!(a.boxes, b.boxes);
        assert_eq!(a.filter_history, b.filter_history);
        assert_eq!(a.final_filter, b.final_filter);
    }
}
