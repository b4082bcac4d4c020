//! Deterministic synthetic sequences with exact ground truth.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::sequence::{write_groundtruth, SequenceData};
use crate::error::{Error, Result};
use crate::features::ften;
use crate::image::Image;
use crate::tensor::{Grid2D, RealTensor3};
use crate::tracker::{BoundingBox, Frame};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectKind {
    /// Gaussian blob with standard deviation `object_size / 4`.
    Blob,
    /// Square with a seeded random texture.
    Square,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Motion {
    Linear { vx: f64, vy: f64 },
    /// Centre moves by `amplitude * sin(2 pi t / period)` on each axis.
    Sinusoidal { ax: f64, ay: f64, period: f64 },
    /// Constant velocity that reverses every `period / 2` frames.
    Bounce { vx: f64, vy: f64, period: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub name: String,
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub object: ObjectKind,
    pub object_size: f64,
    /// Initial object centre.
    pub start: (f64, f64),
    pub motion: Motion,
    /// Per-frame scale multiplier of the object.
    pub scale_rate: f64,
    pub background: f64,
    pub contrast: f64,
    /// Additive Gaussian pixel noise (grey levels).
    pub noise_sigma: f64,
    /// Channels of the generated feature maps that follow the object.
    pub informative_channels: usize,
    /// Channels of pure noise.
    pub noise_channels: usize,
    pub feature_cell_size: usize,
    pub informative_noise: f64,
    pub noise_channel_sigma: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            name: "synthetic".into(),
            width: 160,
            height: 160,
            frames: 30,
            object: ObjectKind::Blob,
            object_size: 24.0,
            start: (80.0, 80.0),
            motion: Motion::Linear { vx: 0.0, vy: 0.0 },
            scale_rate: 1.0,
            background: 40.0,
            contrast: 180.0,
            noise_sigma: 0.0,
            informative_channels: 0,
            noise_channels: 0,
            feature_cell_size: 4,
            informative_noise: 0.1,
            noise_channel_sigma: 1.0,
            seed: 0,
        }
    }
}

/// Generated frames with their ground truth.
#[derive(Debug, Clone)]
pub struct SyntheticSequence {
    pub spec: SyntheticSpec,
    pub frames: Vec<Frame>,
    pub groundtruth: Vec<BoundingBox>,
}

impl SyntheticSequence {
    pub fn into_sequence(self) -> SequenceData {
        SequenceData::in_memory(self.spec.name, self.frames, self.groundtruth)
    }

    /// Writes `img/NNNN.pgm|ppm`, `groundtruth_rect.txt` and, when present,
    /// `features/NNNN.ften`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let img_dir = dir.join("img");
        fs::create_dir_all(&img_dir).map_err(|e| Error::io(&img_dir, e))?;
        let feat_dir = dir.join("features");
        for (t, frame) in self.frames.iter().enumerate() {
            let ext = if frame.image.channels() == 1 { "pgm" } else { "ppm" };
            frame.image.write_pnm(&img_dir.join(format!("{:04}.{ext}", t + 1)))?;
            if let Some(f) = &frame.features {
                fs::create_dir_all(&feat_dir).map_err(|e| Error::io(&feat_dir, e))?;
                ften::write(&feat_dir.join(format!("{:04}.ften", t + 1)), f)?;
            }
        }
        write_groundtruth(&dir.join("groundtruth_rect.txt"), &self.groundtruth)
    }
}

impl SyntheticSpec {
    pub fn center_at(&self, t: usize) -> (f64, f64) {
        let t = t as f64;
        let (sx, sy) = self.start;
        match self.motion {
            Motion::Linear { vx, vy } => (sx + vx * t, sy + vy * t),
            Motion::Sinusoidal { ax, ay, period } => {
                let phase = (2.0 * PI * t / period).sin();
                (sx + ax * phase, sy + ay * phase)
            }
            Motion::Bounce { vx, vy, period } => {
                let half = (period / 2) as f64;
                let steps = half - (t % period as f64 - half).abs();
                (sx + vx * steps, sy + vy * steps)
            }
        }
    }

    pub fn size_at(&self, t: usize) -> f64 {
        self.object_size * self.scale_rate.powi(t as i32)
    }

    pub fn has_features(&self) -> bool {
        self.informative_channels + self.noise_channels > 0
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.frames == 0 {
            return bad("synthetic sequence needs at least one frame".into());
        }
        if self.width < 8 || self.height < 8 {
            return bad(format!("frame {}x{} is too small", self.width, self.height));
        }
        if !(self.object_size >= 2.0 && self.object_size.is_finite()) {
            return bad(format!("object_size must be >= 2, got {}", self.object_size));
        }
        if !(self.scale_rate > 0.0 && self.scale_rate.is_finite()) {
            return bad("scale_rate must be positive".into());
        }
        if !(self.noise_sigma >= 0.0 && self.informative_noise >= 0.0 && self.noise_channel_sigma >= 0.0) {
            return bad("noise levels must be non-negative".into());
        }
        match self.motion {
            Motion::Sinusoidal { period, .. } if !(period > 0.0) => {
                return bad("sinusoidal period must be positive".into());
            }
            Motion::Bounce { period, .. } if period < 2 => {
                return bad("bounce period must be at least 2 frames".into());
            }
            _ => {}
        }
        if self.has_features() {
            let cs = self.feature_cell_size;
            if cs == 0 || self.width != self.height || self.width % cs != 0 || self.width / cs < 2 {
                return bad(format!(
                    "feature maps need a square frame divisible by feature_cell_size {cs}"
                ));
            }
        }
        for t in 0..self.frames {
            let (cx, cy) = self.center_at(t);
            let s = self.size_at(t);
            let margin = 1.5 * s;
            if cx < margin || cy < margin || cx > self.width as f64 - margin || cy > self.height as f64 - margin {
                return bad(format!(
                    "object leaves the safe area at frame {t}: centre ({cx:.1}, {cy:.1}), size {s:.1}"
                ));
            }
        }
        Ok(())
    }
}

/// Bilinear sample of a `side x side` row-major texture at continuous
/// coordinates; zero outside.
fn sample_texture(tex: &[f64], side: usize, u: f64, v: f64) -> f64 {
    let u = u - 0.5;
    let v = v - 0.5;
    let u0 = u.floor();
    let v0 = v.floor();
    let fu = u - u0;
    let fv = v - v0;
    let at = |r: f64, c: f64| -> f64 {
        if r < 0.0 || c < 0.0 || r >= side as f64 || c >= side as f64 {
            0.0
        } else {
            tex[r as usize * side + c as usize]
        }
    };
    (1.0 - fv) * ((1.0 - fu) * at(v0, u0) + fu * at(v0, u0 + 1.0))
        + fv * ((1.0 - fu) * at(v0 + 1.0, u0) + fu * at(v0 + 1.0, u0 + 1.0))
}

const TEXTURE_SIDE: usize = 8;

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticSequence> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let texture: Vec<f64> = (0..TEXTURE_SIDE * TEXTURE_SIDE)
        .map(|_| rng.random_range(0.3..1.0))
        .collect();
    let templates: Vec<Vec<f64>> = (0..spec.informative_channels)
        .map(|_| {
            (0..TEXTURE_SIDE * TEXTURE_SIDE)
                .map(|_| rng.random_range(0.0..1.0))
                .collect()
        })
        .collect();
    let pixel_noise = Normal::new(0.0, spec.noise_sigma.max(f64::MIN_POSITIVE)).expect("valid sigma");
    let unit = Normal::new(0.0, 1.0).expect("valid sigma");

    let mut frames = Vec::with_capacity(spec.frames);
    let mut groundtruth = Vec::with_capacity(spec.frames);
    for t in 0..spec.frames {
        let (cx, cy) = spec.center_at(t);
        let size = spec.size_at(t);
        let bbox = BoundingBox::from_center(cx, cy, size, size);
        let mut image = Image::filled(spec.width, spec.height, 1, 0);
        for y in 0..spec.height {
            for x in 0..spec.width {
                let px = x as f64 + 0.5;
                let py = y as f64 + 0.5;
                let shape = match spec.object {
                    ObjectKind::Blob => {
                        let s = size / 4.0;
                        let r2 = (px - cx).powi(2) + (py - cy).powi(2);
                        (-r2 / (2.0 * s * s)).exp()
                    }
                    ObjectKind::Square => {
                        let u = (px - bbox.x) / size * TEXTURE_SIDE as f64;
                        let v = (py - bbox.y) / size * TEXTURE_SIDE as f64;
                        if (0.0..TEXTURE_SIDE as f64).contains(&u) && (0.0..TEXTURE_SIDE as f64).contains(&v) {
                            texture[v as usize * TEXTURE_SIDE + u as usize]
                        } else {
                            0.0
                        }
                    }
                };
                let mut value = spec.background + spec.contrast * shape;
                if spec.noise_sigma > 0.0 {
                    value += pixel_noise.sample(&mut rng);
                }
                image.set_pixel(x, y, 0, value.round().clamp(0.0, 255.0) as u8);
            }
        }

        let features = if spec.has_features() {
            let cs = spec.feature_cell_size as f64;
            let n = spec.width / spec.feature_cell_size;
            let grid = Grid2D::square(n)?;
            let c = spec.informative_channels + spec.noise_channels;
            let mut map = RealTensor3::zeros(grid.side(), c);
            for (k, tpl) in templates.iter().enumerate() {
                for i in 0..n {
                    for j in 0..n {
                        let u = ((j as f64 + 0.5) * cs - bbox.x) / size * TEXTURE_SIDE as f64;
                        let v = ((i as f64 + 0.5) * cs - bbox.y) / size * TEXTURE_SIDE as f64;
                        let value = sample_texture(tpl, TEXTURE_SIDE, u, v)
                            + spec.informative_noise * unit.sample(&mut rng);
                        map.set(i, j, k, value);
                    }
                }
            }
            for k in spec.informative_channels..c {
                for i in 0..n {
                    for j in 0..n {
                        map.set(i, j, k, spec.noise_channel_sigma * unit.sample(&mut rng));
                    }
                }
            }
            Some(map)
        } else {
            None
        };
        frames.push(Frame { image, features });
        groundtruth.push(bbox);
    }
    Ok(SyntheticSequence {
        spec: spec.clone(),
        frames,
        groundtruth,
    })
}

impl std::fmt::Display for ObjectKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ObjectKind::Blob => "blob",
            ObjectKind::Square => "square",
        })
    }
}

impl FromStr for ObjectKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "blob" => Ok(ObjectKind::Blob),
            "square" => Ok(ObjectKind::Square),
            other => Err(Error::Config(format!("unknown object kind '{other}'"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_for_a_seed() {
        let spec = SyntheticSpec {
            noise_sigma: 5.0,
            informative_channels: 2,
            noise_channels: 2,
            frames: 3,
            ..SyntheticSpec::default()
        };
        let a = generate_synthetic(&spec).unwrap();
        let b = generate_synthetic(&spec).unwrap();
        for (fa, fb) in a.frames.iter().zip(&b.frames) {
            assert_eq!(fa.image, fb.image);
            assert_eq!(fa.features, fb.features);
        }
        let c = generate_synthetic(&SyntheticSpec { seed: 1, ..spec }).unwrap();
        assert_ne!(a.frames[0].image, c.frames[0].image);
    }

    #[test]
    fn blob_peak_sits_at_the_ground_truth_centre() {
        let spec = SyntheticSpec {
            motion: Motion::Linear { vx: 2.0, vy: -1.0 },
            frames: 5,
            ..SyntheticSpec::default()
        };
        let seq = generate_synthetic(&spec).unwrap();
        for (frame, gt) in seq.frames.iter().zip(&seq.groundtruth) {
            let (cx, cy) = gt.center();
            let img = &frame.image;
            let mut best = (0, 0, 0u8);
            for y in 0..img.height() {
                for x in 0..img.width() {
                    let v = img.pixel(x, y, 0);
                    if v > best.2 {
                        best = (x, y, v);
                    }
                }
            }
            assert!((best.0 as f64 + 0.5 - cx).abs() <= 1.0);
            assert!((best.1 as f64 + 0.5 - cy).abs() <= 1.0);
        }
    }

    #[test]
    fn leaving_the_safe_area_is_rejected() {
        let spec = SyntheticSpec {
            motion: Motion::Linear { vx: 5.0, vy: 0.0 },
            frames: 20,
            ..SyntheticSpec::default()
        };
        assert!(matches!(generate_synthetic(&spec), Err(Error::Config(_))));
    }

    #[test]
    fn noise_channels_do_not_follow_the_object() {
        let spec = SyntheticSpec {
            informative_channels: 1,
            noise_channels: 1,
            informative_noise: 0.0,
            frames: 1,
            ..SyntheticSpec::default()
        };
        let seq = generate_synthetic(&spec).unwrap();
        let f = seq.frames[0].features.as_ref().unwrap();
        assert_eq!(f.side(), 40);
        // Informative channel is zero away from the object.
        assert_eq!(f.get(0, 0, 0), 0.0);
        assert_ne!(f.get(0, 0, 1), 0.0);
    }
}
