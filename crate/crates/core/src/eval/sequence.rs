//! Benchmark-style sequence directories: numbered frames, a ground-truth
//! rectangle file and optional per-frame feature maps.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::features::ften;
use crate::image::Image;
use crate::tracker::{BoundingBox, Frame};

pub const GROUNDTRUTH_FILE: &str = "groundtruth_rect.txt";
const IMAGE_EXTENSIONS: [&str; 5] = ["jpg", "jpeg", "png", "pgm", "ppm"];

#[derive(Debug, Clone)]
enum FrameSource {
    Memory(Vec<Frame>),
    Disk {
        images: Vec<PathBuf>,
        features: Option<Vec<PathBuf>>,
    },
}

/// A sequence whose frames are decoded lazily when loaded from disk.
#[derive(Debug, Clone)]
pub struct SequenceData {
    pub name: String,
    pub groundtruth: Vec<BoundingBox>,
    source: FrameSource,
}

impl SequenceData {
    pub fn in_memory(name: impl Into<String>, frames: Vec<Frame>, groundtruth: Vec<BoundingBox>) -> Self {
        SequenceData {
            name: name.into(),
            groundtruth,
            source: FrameSource::Memory(frames),
        }
    }

    pub fn len(&self) -> usize {
        match &self.source {
            FrameSource::Memory(f) => f.len(),
            FrameSource::Disk { images, .. } => images.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn has_features(&self) -> bool {
        match &self.source {
            FrameSource::Memory(f) => f.first().is_some_and(|f| f.features.is_some()),
            FrameSource::Disk { features, .. } => features.is_some(),
        }
    }

    pub fn frame(&self, t: usize) -> Result<Frame> {
        if t >= self.len() {
            return Err(Error::Input(format!("frame {t} out of range ({} frames)", self.len())));
        }
        match &self.source {
            FrameSource::Memory(f) => Ok(f[t].clone()),
            FrameSource::Disk { images, features } => Ok(Frame {
                image: Image::read(&images[t])?,
                features: features.as_ref().map(|f| ften::read(&f[t])).transpose()?,
            }),
        }
    }

    pub fn frames(&self) -> impl Iterator<Item = Result<Frame>> + '_ {
        (0..self.len()).map(|t| self.frame(t))
    }
}

/// Parses one box per non-empty line, separated by commas, tabs or spaces.
/// Coordinates are 1-indexed in the file and 0-indexed in the result.
pub fn parse_groundtruth(text: &str, path: &Path) -> Result<Vec<BoundingBox>> {
    let mut boxes = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: n + 1,
            message,
        };
        let values: Vec<f64> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<f64>().map_err(|_| parse_err(format!("'{s}' is not a number"))))
            .collect::<Result<_>>()?;
        if values.len() != 4 {
            return Err(parse_err(format!("expected 4 values, found {}", values.len())));
        }
        let b = BoundingBox::new(values[0] - 1.0, values[1] - 1.0, values[2], values[3]);
        if !b.is_valid() {
            return Err(parse_err(format!("invalid box '{line}'")));
        }
        boxes.push(b);
    }
    Ok(boxes)
}

pub fn read_groundtruth(path: &Path) -> Result<Vec<BoundingBox>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_groundtruth(&text, path)
}

/// Writes comma-separated 1-indexed boxes.
pub fn write_groundtruth(path: &Path, boxes: &[BoundingBox]) -> Result<()> {
    let mut s = String::new();
    for b in boxes {
        let _ = writeln!(s, "{},{},{},{}", b.x + 1.0, b.y + 1.0, b.w, b.h);
    }
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

fn numbered_files(dir: &Path, extensions: &[&str]) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files: Vec<(u64, PathBuf)> = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase());
        if !ext.is_some_and(|e| extensions.contains(&e.as_str())) {
            continue;
        }
        if let Some(num) = path.file_stem().and_then(|s| s.to_str()).and_then(|s| s.parse::<u64>().ok()) {
            files.push((num, path));
        }
    }
    files.sort();
    Ok(files.into_iter().map(|(_, p)| p).collect())
}

/// Loads a sequence directory. Frames live in `img/` or the directory itself;
/// feature maps, when present, in `features/`.
pub fn load_sequence(dir: &Path) -> Result<SequenceData> {
    let img_dir = if dir.join("img").is_dir() { dir.join("img") } else { dir.to_path_buf() };
    let images = numbered_files(&img_dir, &IMAGE_EXTENSIONS)?;
    if images.is_empty() {
        return Err(Error::Input(format!("no numbered frames in {}", img_dir.display())));
    }
    let groundtruth = read_groundtruth(&dir.join(GROUNDTRUTH_FILE))?;
    if groundtruth.len() != images.len() {
        return Err(Error::Consistency(format!(
            "{} frames but {} ground-truth boxes",
            images.len(),
            groundtruth.len()
        )));
    }
    let feat_dir = dir.join("features");
    let features = if feat_dir.is_dir() {
        let f = numbered_files(&feat_dir, &["ften"])?;
        if f.len() != images.len() {
            return Err(Error::Consistency(format!(
                "{} frames but {} feature maps",
                images.len(),
                f.len()
            )));
        }
        Some(f)
    } else {
        None
    };
    let name = dir
        .canonicalize()
        .ok()
        .and_then(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .unwrap_or_else(|| "sequence".into());
    Ok(SequenceData {
        name,
        groundtruth,
        source: FrameSource::Disk { images, features },
    })
}
