//! Feature extraction: image crop -> per-type feature blocks on a cell grid.

pub mod colour_names;
pub mod ften;

use std::f64::consts::PI;
use std::fmt;
use std::ops::Range;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::ImagePatch;
use crate::tensor::{Grid2D, RealMatrix, RealTensor3};

use colour_names::{ColourNameTable, NUM_NAMES};

/// Regulariser for the per-cell gradient histogram normalisation, in the
/// `[0, 1]` intensity scale.
const HIST_NORM_EPS: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureType {
    Intensity,
    GradientHist,
    ColourNames,
    External,
}

impl FeatureType {
    pub fn as_str(&self) -> &'static str {
        match self {
            FeatureType::Intensity => "intensity",
            FeatureType::GradientHist => "gradient_hist",
            FeatureType::ColourNames => "colour_names",
            FeatureType::External => "external",
        }
    }
}

impl fmt::Display for FeatureType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "intensity" => Ok(FeatureType::Intensity),
            "gradient_hist" | "hog" => Ok(FeatureType::GradientHist),
            "colour_names" | "cn" => Ok(FeatureType::ColourNames),
            "external" => Ok(FeatureType::External),
            other => Err(Error::Config(format!("unknown feature type '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub feature_types: Vec<FeatureType>,
    pub cell_size: usize,
    pub orientation_bins: usize,
    pub cosine_window: bool,
}

impl Default for FeatureSpec {
    fn default() -> Self {
        FeatureSpec {
            feature_types: vec![FeatureType::Intensity, FeatureType::GradientHist, FeatureType::ColourNames],
            cell_size: 4,
            orientation_bins: 9,
            cosine_window: true,
        }
    }
}

impl FeatureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.feature_types.is_empty() {
            return Err(Error::Config("at least one feature type is required".into()));
        }
        if self.cell_size == 0 {
            return Err(Error::Config("cell_size must be positive".into()));
        }
        if self.feature_types.contains(&FeatureType::GradientHist) && self.orientation_bins == 0 {
            return Err(Error::Config("orientation_bins must be positive".into()));
        }
        let external = self.feature_types.contains(&FeatureType::External);
        if external && self.feature_types.len() > 1 {
            return Err(Error::Config(
                "external features cannot be mixed with image features".into(),
            ));
        }
        Ok(())
    }

    pub fn is_external(&self) -> bool {
        self.feature_types == [FeatureType::External]
    }
}

/// One feature type's channels and their position in the concatenated tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBlock {
    pub tensor: RealTensor3,
    pub type_tag: FeatureType,
    pub channel_range: Range<usize>,
}

impl FeatureBlock {
    pub fn new(tensor: RealTensor3, type_tag: FeatureType) -> Self {
        let c = tensor.channels();
        FeatureBlock {
            tensor,
            type_tag,
            channel_range: 0..c,
        }
    }
}

/// Separable Hann window, zero on the first and last row/column.
pub fn hann_window(side: usize) -> RealMatrix {
    let w: Vec<f64> = (0..side)
        .map(|i| {
            if side < 2 {
                1.0
            } else {
                0.5 * (1.0 - (2.0 * PI * i as f64 / (side - 1) as f64).cos())
            }
        })
        .collect();
    RealMatrix::from_fn(side, |i, j| w[i] * w[j])
}

/// Extracts every image feature type listed in `spec`, in order.
pub fn extract(patch: &ImagePatch, spec: &FeatureSpec) -> Result<Vec<FeatureBlock>> {
    spec.validate()?;
    if patch.channels != 1 && patch.channels != 3 {
        return Err(Error::Input(format!("unsupported channel count {}", patch.channels)));
    }
    let cs = spec.cell_size;
    if patch.width != patch.height {
        return Err(Error::Geometry(format!(
            "patch must be square, got {}x{}",
            patch.width, patch.height
        )));
    }
    if patch.width < cs || patch.width % cs != 0 {
        return Err(Error::Geometry(format!(
            "cell size {cs} does not divide patch side {}",
            patch.width
        )));
    }
    let side = patch.width / cs;
    let window = spec.cosine_window.then(|| hann_window(side));
    let mut blocks = Vec::with_capacity(spec.feature_types.len());
    for ty in &spec.feature_types {
        let mut tensor = match ty {
            FeatureType::Intensity => intensity(patch, cs),
            FeatureType::GradientHist => gradient_histogram(patch, cs, spec.orientation_bins),
            FeatureType::ColourNames => colour_name_channels(patch, cs, ColourNameTable::shipped()),
            FeatureType::External => {
                return Err(Error::Config(
                    "external features are loaded with import_features, not extracted".into(),
                ))
            }
        };
        if let Some(w) = &window {
            tensor.apply_window(w);
        }
        blocks.push(FeatureBlock::new(tensor, *ty));
    }
    concat_ranges(&mut blocks)?;
    Ok(blocks)
}

fn intensity(patch: &ImagePatch, cs: usize) -> RealTensor3 {
    let side = patch.width / cs;
    let area = (cs * cs) as f64;
    RealTensor3::from_fn(side, 1, |i, j, _| {
        let mut acc = 0.0;
        for y in i * cs..(i + 1) * cs {
            for x in j * cs..(j + 1) * cs {
                acc += patch.gray(x, y);
            }
        }
        acc / area - 0.5
    })
}

/// Per-pixel gradient (central differences, replicated border) as
/// `(magnitude, unsigned orientation in [0, pi))`.
fn pixel_gradient(patch: &ImagePatch, x: usize, y: usize) -> (f64, f64) {
    let w = patch.width;
    let h = patch.height;
    let gx = patch.gray((x + 1).min(w - 1), y) - patch.gray(x.saturating_sub(1), y);
    let gy = patch.gray(x, (y + 1).min(h - 1)) - patch.gray(x, y.saturating_sub(1));
    let mag = (gx * gx + gy * gy).sqrt();
    let mut theta = gy.atan2(gx);
    if theta < 0.0 {
        theta += PI;
    }
    if theta >= PI {
        theta -= PI;
    }
    (mag, theta)
}

/// Orientation histograms pooled over cells. Bin `b` is centred at `b * pi / bins`
/// and each pixel votes its gradient magnitude into the two nearest bins
/// (circularly) with linear weights. Cells are L2-normalised.
fn gradient_histogram(patch: &ImagePatch, cs: usize, bins: usize) -> RealTensor3 {
    let side = patch.width / cs;
    let mut t = RealTensor3::zeros(side, bins);
    let bin_width = PI / bins as f64;
    for y in 0..patch.height {
        for x in 0..patch.width {
            let (mag, theta) = pixel_gradient(patch, x, y);
            if mag == 0.0 {
                continue;
            }
            let pos = theta / bin_width;
            let lower = pos.floor();
            let frac = pos - lower;
            let b0 = (lower as usize) % bins;
            let b1 = (b0 + 1) % bins;
            let (ci, cj) = (y / cs, x / cs);
            t.set(ci, cj, b0, t.get(ci, cj, b0) + mag * (1.0 - frac));
            t.set(ci, cj, b1, t.get(ci, cj, b1) + mag * frac);
        }
    }
    for i in 0..side {
        for j in 0..side {
            let norm = (0..bins).map(|b| t.get(i, j, b).powi(2)).sum::<f64>();
            let scale = 1.0 / (norm + HIST_NORM_EPS * HIST_NORM_EPS).sqrt();
            for b in 0..bins {
                t.set(i, j, b, t.get(i, j, b) * scale);
            }
        }
    }
    t
}

fn colour_name_channels(patch: &ImagePatch, cs: usize, table: &ColourNameTable) -> RealTensor3 {
    let side = patch.width / cs;
    let mut t = RealTensor3::zeros(side, NUM_NAMES);
    let area = (cs * cs) as f64;
    for i in 0..side {
        for j in 0..side {
            let mut acc = [0.0; NUM_NAMES];
            for y in i * cs..(i + 1) * cs {
                for x in j * cs..(j + 1) * cs {
                    if patch.channels == 3 {
                        let q = |c| patch.sample(x, y, c).round().clamp(0.0, 255.0) as u8;
                        for (a, p) in acc.iter_mut().zip(table.lookup(q(0), q(1), q(2))) {
                            *a += *p as f64;
                        }
                    } else {
                        for (a, p) in acc.iter_mut().zip(colour_names::achromatic(patch.sample(x, y, 0))) {
                            *a += p;
                        }
                    }
                }
            }
            for (k, a) in acc.iter().enumerate() {
                t.set(i, j, k, a / area);
            }
        }
    }
    t
}

/// Loads an externally computed feature tensor as an `external` block.
pub fn import_features(path: &Path, expected_grid: Grid2D) -> Result<FeatureBlock> {
    let tensor = ften::read_expecting(path, expected_grid)?;
    Ok(FeatureBlock::new(tensor, FeatureType::External))
}

fn concat_ranges(blocks: &mut [FeatureBlock]) -> Result<()> {
    let side = blocks.first().map(|b| b.tensor.side()).unwrap_or(0);
    let mut start = 0;
    for b in blocks.iter_mut() {
        if b.tensor.side() != side {
            return Err(Error::shape(
                format!("grid side {side}"),
                format!("grid side {}", b.tensor.side()),
            ));
        }
        let end = start + b.tensor.channels();
        b.channel_range = start..end;
        start = end;
    }
    Ok(())
}

/// Concatenates blocks along the channel axis in order, rewriting each block's
/// `channel_range` to its position in the result.
pub fn concat_blocks(blocks: &mut [FeatureBlock]) -> Result<RealTensor3> {
    concat_ranges(blocks)?;
    let parts: Vec<&RealTensor3> = blocks.iter().map(|b| &b.tensor).collect();
    RealTensor3::concat_channels(&parts)
}
