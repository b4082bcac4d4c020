//! Flat `key = value` configuration files.
//!
//! One setting per line, `#` starts a comment, blank lines are ignored. Keys
//! not listed in [`TRACKER_KEYS`] or [`SYNTHETIC_KEYS`] are rejected; missing
//! keys keep their defaults. List values are comma separated.

use std::fmt::{Display, Write as _};
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::eval::{Motion, ObjectKind, SyntheticSpec};
use crate::features::FeatureType;
use crate::tracker::TrackerConfig;

/// A documented configuration key.
#[derive(Debug, Clone, Copy)]
pub struct KeyDoc {
    pub key: &'static str,
    pub doc: &'static str,
}

const fn key(key: &'static str, doc: &'static str) -> KeyDoc {
    KeyDoc { key, doc }
}

pub const TRACKER_KEYS: &[KeyDoc] = &[
    key("preset", "start from a named preset: default | deep (must come first)"),
    key("feature_types", "comma list of intensity, gradient_hist, colour_names, external"),
    key("cell_size", "feature cell side in pixels"),
    key("orientation_bins", "gradient histogram bins over 0..pi"),
    key("cosine_window", "apply a Hann window to the search-window features"),
    key("lambda_spatial", "weight of the spatial group term"),
    key("lambda_channel", "weight of the channel group term"),
    key("lambda_temporal", "weight of the temporal smoothness term"),
    key("ridge_lambda", "ridge weight of the data term"),
    key("channel_ratio", "fraction of channels kept per block, in (0, 1]"),
    key("spatial_ratio", "fraction of spatial cells kept, in (0, 1]"),
    key("per_block", "select channels within each feature block"),
    key("mu_init", "initial ADMM penalty"),
    key("mu_growth", "penalty growth factor per iteration"),
    key("mu_max", "penalty cap"),
    key("max_iters", "ADMM iteration budget"),
    key("tol_primal", "relative primal residual tolerance"),
    key("tol_change", "relative iterate change tolerance"),
    key("alpha", "model update rate in [0, 1]"),
    key("padding", "search window side is max(w, h) * (1 + padding)"),
    key("sigma_factor", "label width relative to the target size"),
    key("scale_factors", "comma list of detection scales, must contain 1.0"),
    key("variant", "baseline | ss | cs | lr | all"),
    key("model_side", "pixel side of the resampled search window"),
    key("normalise_features", "give each feature block unit mean square on the first frame"),
    key("keep_history", "store every learned filter for rank diagnostics"),
];

pub const SYNTHETIC_KEYS: &[KeyDoc] = &[
    key("name", "sequence name"),
    key("width", "frame width in pixels"),
    key("height", "frame height in pixels"),
    key("frames", "number of frames"),
    key("object", "blob | square"),
    key("object_size", "object side in pixels"),
    key("start_x", "initial centre x"),
    key("start_y", "initial centre y"),
    key("motion", "linear | sinusoidal | bounce"),
    key("vx", "x velocity in px/frame (linear, bounce)"),
    key("vy", "y velocity in px/frame (linear, bounce)"),
    key("ax", "x amplitude in px (sinusoidal)"),
    key("ay", "y amplitude in px (sinusoidal)"),
    key("period", "period in frames (sinusoidal, bounce)"),
    key("scale_rate", "per-frame size multiplier"),
    key("background", "background grey level"),
    key("contrast", "object peak above background"),
    key("noise_sigma", "per-pixel Gaussian noise"),
    key("informative_channels", "feature-map channels carrying the object"),
    key("noise_channels", "feature-map channels of pure noise"),
    key("feature_cell_size", "feature-map cell side in pixels"),
    key("informative_noise", "noise added to informative channels"),
    key("noise_channel_sigma", "standard deviation of noise channels"),
    key("seed", "random seed"),
];

/// One `key = value` line.
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

pub fn parse_entries(text: &str, path: &Path) -> Result<Vec<Entry>> {
    let mut entries = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: n + 1,
            message: format!("expected 'key = value', found '{line}'"),
        })?;
        entries.push(Entry {
            key: k.trim().to_string(),
            value: v.trim().to_string(),
            line: n + 1,
        });
    }
    Ok(entries)
}

fn value<T: FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: Display,
{
    v.parse::<T>()
        .map_err(|e| Error::Config(format!("bad value '{v}' for '{key}': {e}")))
}

fn list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>>
where
    T::Err: Display,
{
    v.split(',').map(|s| value(key, s.trim())).collect()
}

fn unknown(key: &str) -> Error {
    Error::Config(format!("unknown key '{key}'"))
}

/// Applies one setting; also used for command-line overrides.
pub fn set_tracker_key(cfg: &mut TrackerConfig, key: &str, v: &str) -> Result<()> {
    match key {
        "preset" => {
            *cfg = match v {
                "default" => TrackerConfig::default(),
                "deep" => TrackerConfig::deep_preset(),
                _ => return Err(Error::Config(format!("unknown preset '{v}'"))),
            }
        }
        "feature_types" => cfg.features.feature_types = list::<FeatureType>(key, v)?,
        "cell_size" => cfg.features.cell_size = value(key, v)?,
        "orientation_bins" => cfg.features.orientation_bins = value(key, v)?,
        "cosine_window" => cfg.features.cosine_window = value(key, v)?,
        "lambda_spatial" => cfg.reg.lambda_spatial = value(key, v)?,
        "lambda_channel" => cfg.reg.lambda_channel = value(key, v)?,
        "lambda_temporal" => cfg.reg.lambda_temporal = value(key, v)?,
        "ridge_lambda" => cfg.reg.ridge_lambda = value(key, v)?,
        "channel_ratio" => cfg.sel.channel_ratio = value(key, v)?,
        "spatial_ratio" => cfg.sel.spatial_ratio = value(key, v)?,
        "per_block" => cfg.sel.per_block = value(key, v)?,
        "mu_init" => cfg.admm.mu_init = value(key, v)?,
        "mu_growth" => cfg.admm.mu_growth = value(key, v)?,
        "mu_max" => cfg.admm.mu_max = value(key, v)?,
        "max_iters" => cfg.admm.max_iters = value(key, v)?,
        "tol_primal" => cfg.admm.tol_primal = value(key, v)?,
        "tol_change" => cfg.admm.tol_change = value(key, v)?,
        "alpha" => cfg.alpha = value(key, v)?,
        "padding" => cfg.padding = value(key, v)?,
        "sigma_factor" => cfg.sigma_factor = value(key, v)?,
        "scale_factors" => cfg.scale_factors = list(key, v)?,
        "variant" => cfg.variant = value(key, v)?,
        "model_side" => cfg.model_side = value(key, v)?,
        "normalise_features" => cfg.normalise_features = value(key, v)?,
        "keep_history" => cfg.keep_history = value(key, v)?,
        _ => return Err(unknown(key)),
    }
    Ok(())
}

pub fn tracker_config_from_str(text: &str, path: &Path) -> Result<TrackerConfig> {
    let mut cfg = TrackerConfig::default();
    for (i, e) in parse_entries(text, path)?.iter().enumerate() {
        if e.key == "preset" && i > 0 {
            return Err(Error::Config(format!("'preset' must be the first key (line {})", e.line)));
        }
        set_tracker_key(&mut cfg, &e.key, &e.value)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn read_tracker_config(path: &Path) -> Result<TrackerConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    tracker_config_from_str(&text, path)
}

fn join<T: Display>(items: &[T]) -> String {
    items.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(", ")
}

/// Serialises every key except `preset`; parsing the output reproduces `cfg`.
pub fn tracker_config_to_string(cfg: &TrackerConfig) -> String {
    let f = &cfg.features;
    let pairs: Vec<(&str, String)> = vec![
        ("feature_types", join(&f.feature_types)),
        ("cell_size", f.cell_size.to_string()),
        ("orientation_bins", f.orientation_bins.to_string()),
        ("cosine_window", f.cosine_window.to_string()),
        ("lambda_spatial", cfg.reg.lambda_spatial.to_string()),
        ("lambda_channel", cfg.reg.lambda_channel.to_string()),
        ("lambda_temporal", cfg.reg.lambda_temporal.to_string()),
        ("ridge_lambda", cfg.reg.ridge_lambda.to_string()),
        ("channel_ratio", cfg.sel.channel_ratio.to_string()),
        ("spatial_ratio", cfg.sel.spatial_ratio.to_string()),
        ("per_block", cfg.sel.per_block.to_string()),
        ("mu_init", cfg.admm.mu_init.to_string()),
        ("mu_growth", cfg.admm.mu_growth.to_string()),
        ("mu_max", cfg.admm.mu_max.to_string()),
        ("max_iters", cfg.admm.max_iters.to_string()),
        ("tol_primal", cfg.admm.tol_primal.to_string()),
        ("tol_change", cfg.admm.tol_change.to_string()),
        ("alpha", cfg.alpha.to_string()),
        ("padding", cfg.padding.to_string()),
        ("sigma_factor", cfg.sigma_factor.to_string()),
        ("scale_factors", join(&cfg.scale_factors)),
        ("variant", cfg.variant.to_string()),
        ("model_side", cfg.model_side.to_string()),
        ("normalise_features", cfg.normalise_features.to_string()),
        ("keep_history", cfg.keep_history.to_string()),
    ];
    let mut s = String::new();
    for (k, v) in pairs {
        let _ = writeln!(s, "{k} = {v}");
    }
    s
}

pub fn set_synthetic_key(spec: &mut SyntheticSpec, key: &str, v: &str) -> Result<()> {
    let (mut vx, mut vy, mut ax, mut ay, mut period) = motion_parts(&spec.motion);
    match key {
        "name" => spec.name = v.to_string(),
        "width" => spec.width = value(key, v)?,
        "height" => spec.height = value(key, v)?,
        "frames" => spec.frames = value(key, v)?,
        "object" => spec.object = value::<ObjectKind>(key, v)?,
        "object_size" => spec.object_size = value(key, v)?,
        "start_x" => spec.start.0 = value(key, v)?,
        "start_y" => spec.start.1 = value(key, v)?,
        "motion" => {
            spec.motion = match v {
                "linear" => Motion::Linear { vx, vy },
                "sinusoidal" => Motion::Sinusoidal { ax, ay, period },
                "bounce" => Motion::Bounce {
                    vx,
                    vy,
                    period: period.round() as usize,
                },
                _ => return Err(Error::Config(format!("unknown motion '{v}'"))),
            };
            return Ok(());
        }
        "vx" => vx = value(key, v)?,
        "vy" => vy = value(key, v)?,
        "ax" => ax = value(key, v)?,
        "ay" => ay = value(key, v)?,
        "period" => period = value(key, v)?,
        "scale_rate" => spec.scale_rate = value(key, v)?,
        "background" => spec.background = value(key, v)?,
        "contrast" => spec.contrast = value(key, v)?,
        "noise_sigma" => spec.noise_sigma = value(key, v)?,
        "informative_channels" => spec.informative_channels = value(key, v)?,
        "noise_channels" => spec.noise_channels = value(key, v)?,
        "feature_cell_size" => spec.feature_cell_size = value(key, v)?,
        "informative_noise" => spec.informative_noise = value(key, v)?,
        "noise_channel_sigma" => spec.noise_channel_sigma = value(key, v)?,
        "seed" => spec.seed = value(key, v)?,
        _ => return Err(unknown(key)),
    }
    spec.motion = match spec.motion {
        Motion::Linear { .. } => Motion::Linear { vx, vy },
        Motion::Sinusoidal { .. } => Motion::Sinusoidal { ax, ay, period },
        Motion::Bounce { .. } => Motion::Bounce {
            vx,
            vy,
            period: period.round() as usize,
        },
    };
    Ok(())
}

/// `(vx, vy, ax, ay, period)` with zeros for parameters the path lacks.
fn motion_parts(m: &Motion) -> (f64, f64, f64, f64, f64) {
    match *m {
        Motion::Linear { vx, vy } => (vx, vy, 0.0, 0.0, 0.0),
        Motion::Sinusoidal { ax, ay, period } => (0.0, 0.0, ax, ay, period),
        Motion::Bounce { vx, vy, period } => (vx, vy, 0.0, 0.0, period as f64),
    }
}

/// Motion parameters may precede or follow the `motion` key.
pub fn synthetic_spec_from_str(text: &str, path: &Path) -> Result<SyntheticSpec> {
    let entries = parse_entries(text, path)?;
    let mut spec = SyntheticSpec::default();
    for e in entries.iter().filter(|e| e.key == "motion") {
        set_synthetic_key(&mut spec, &e.key, &e.value)?;
    }
    for e in entries.iter().filter(|e| e.key != "motion") {
        set_synthetic_key(&mut spec, &e.key, &e.value)?;
    }
    spec.validate()?;
    Ok(spec)
}

pub fn read_synthetic_spec(path: &Path) -> Result<SyntheticSpec> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    synthetic_spec_from_str(&text, path)
}

pub fn synthetic_spec_to_string(spec: &SyntheticSpec) -> String {
    let (motion, (vx, vy, ax, ay, period)) = match spec.motion {
        Motion::Linear { .. } => ("linear", motion_parts(&spec.motion)),
        Motion::Sinusoidal { .. } => ("sinusoidal", motion_parts(&spec.motion)),
        Motion::Bounce { .. } => ("bounce", motion_parts(&spec.motion)),
    };
    let pairs: Vec<(&str, String)> = vec![
        ("name", spec.name.clone()),
        ("width", spec.width.to_string()),
        ("height", spec.height.to_string()),
        ("frames", spec.frames.to_string()),
        ("object", spec.object.to_string()),
        ("object_size", spec.object_size.to_string()),
        ("start_x", spec.start.0.to_string()),
        ("start_y", spec.start.1.to_string()),
        ("motion", motion.to_string()),
        ("vx", vx.to_string()),
        ("vy", vy.to_string()),
        ("ax", ax.to_string()),
        ("ay", ay.to_string()),
        ("period", period.to_string()),
        ("scale_rate", spec.scale_rate.to_string()),
        ("background", spec.background.to_string()),
        ("contrast", spec.contrast.to_string()),
        ("noise_sigma", spec.noise_sigma.to_string()),
        ("informative_channels", spec.informative_channels.to_string()),
        ("noise_channels", spec.noise_channels.to_string()),
        ("feature_cell_size", spec.feature_cell_size.to_string()),
        ("informative_noise", spec.informative_noise.to_string()),
        ("noise_channel_sigma", spec.noise_channel_sigma.to_string()),
        ("seed", spec.seed.to_string()),
    ];
    let mut s = String::new();
    for (k, v) in pairs {
        let _ = writeln!(s, "{k} = {v}");
    }
    s
}

/// Aligned `key  description` lines for help text.
pub fn key_table(keys: &[KeyDoc]) -> String {
    let width = keys.iter().map(|k| k.key.len()).max().unwrap_or(0);
    let mut s = String::new();
    for k in keys {
        let _ = writeln!(s, "  {:width$}  {}", k.key, k.doc);
    }
    s
}
