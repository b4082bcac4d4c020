use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureSpec, FeatureType};
use crate::solver::{AdmmConfig, RegularisationConfig, SelectionConfig};

/// Which regularisation components are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Ridge-only filters, no pruning.
    Baseline,
    /// Spatial group term and spatial pruning.
    Ss,
    /// Channel group term and channel pruning.
    Cs,
    /// Temporal term only.
    Lr,
    All,
}

impl Variant {
    pub const ALL: [Variant; 5] = [Variant::Baseline, Variant::Ss, Variant::Cs, Variant::Lr, Variant::All];

    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::Ss => "ss",
            Variant::Cs => "cs",
            Variant::Lr => "lr",
            Variant::All => "all",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::Config(format!("unknown variant '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackerConfig {
    pub features: FeatureSpec,
    pub reg: RegularisationConfig,
    pub sel: SelectionConfig,
    pub admm: AdmmConfig,
    /// Model update rate.
    pub alpha: f64,
    /// Search window side is `max(w, h) * (1 + padding)`.
    pub padding: f64,
    pub sigma_factor: f64,
    pub scale_factors: Vec<f64>,
    pub variant: Variant,
    /// Side in pixels of the resampled search window (image features only).
    pub model_side: usize,
    /// Scale each feature block by a gain that gives it unit mean square on the
    /// first frame.
    pub normalise_features: bool,
    /// Keep every learned filter for rank diagnostics.
    pub keep_history: bool,
}

/// Penalty schedule matched to unit mean-square features, whose per-bin
/// energy is in the thousands.
pub fn tracking_admm() -> AdmmConfig {
    AdmmConfig {
        mu_init: 1e3,
        mu_growth: 1.1,
        mu_max: 1e4,
        ..AdmmConfig::default()
    }
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            features: FeatureSpec::default(),
            reg: RegularisationConfig::default(),
            sel: SelectionConfig::default(),
            admm: tracking_admm(),
            alpha: 0.6,
            padding: 1.5,
            sigma_factor: 0.1,
            scale_factors: vec![0.98, 1.0, 1.02],
            variant: Variant::All,
            model_side: 64,
            normalise_features: true,
            keep_history: false,
        }
    }
}

impl TrackerConfig {
    /// Settings for high-dimensional external (deep) features.
    pub fn deep_preset() -> Self {
        TrackerConfig {
            features: FeatureSpec {
                feature_types: vec![FeatureType::External],
                cell_size: 16,
                orientation_bins: 9,
                cosine_window: true,
            },
            sel: SelectionConfig {
                channel_ratio: 0.075,
                spatial_ratio: 0.9,
                per_block: true,
            },
            reg: RegularisationConfig {
                lambda_temporal: 12.0,
                ..RegularisationConfig::default()
            },
            alpha: 0.05,
            scale_factors: vec![1.0],
            ..TrackerConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.features.validate()?;
        self.reg.validate()?;
        self.sel.validate()?;
        self.admm.validate()?;
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!("alpha must be in [0, 1], got {}", self.alpha)));
        }
        if !(self.padding >= 0.0 && self.padding.is_finite()) {
            return Err(Error::Config(format!("padding must be >= 0, got {}", self.padding)));
        }
        if !(self.sigma_factor > 0.0 && self.sigma_factor.is_finite()) {
            return Err(Error::Config(format!("sigma_factor must be > 0, got {}", self.sigma_factor)));
        }
        if self.scale_factors.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::Config("scale factors must be positive".into()));
        }
        if !self.scale_factors.contains(&1.0) {
            return Err(Error::Config("scale_factors must contain 1.0".into()));
        }
        if !self.features.is_external() {
            let cs = self.features.cell_size;
            if self.model_side % cs != 0 || self.model_side / cs < 2 {
                return Err(Error::Config(format!(
                    "model_side {} must be a multiple of cell_size {cs} spanning at least 2 cells",
                    self.model_side
                )));
            }
        }
        Ok(())
    }

    /// Regularisation and selection with the variant's inactive parts switched off.
    pub fn effective(&self) -> (RegularisationConfig, SelectionConfig) {
        let mut reg = self.reg;
        let mut sel = self.sel;
        let (spatial, channel, temporal) = match self.variant {
            Variant::Baseline => (false, false, false),
            Variant::Ss => (true, false, false),
            Variant::Cs => (false, true, false),
            Variant::Lr => (false, false, true),
            Variant::All => (true, true, true),
        };
        if !spatial {
            reg.lambda_spatial = 0.0;
            sel.spatial_ratio = 1.0;
        }
        if !channel {
            reg.lambda_channel = 0.0;
            sel.channel_ratio = 1.0;
        }
        if !temporal {
            reg.lambda_temporal = 0.0;
        }
        (reg, sel)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn baseline_switches_everything_off() {
        let cfg = TrackerConfig {
            variant: Variant::Baseline,
            ..TrackerConfig::default()
        };
        let (reg, sel) = cfg.effective();
        assert_eq!((reg.lambda_spatial, reg.lambda_channel, reg.lambda_temporal), (0.0, 0.0, 0.0));
        assert_eq!((sel.channel_ratio, sel.spatial_ratio), (1.0, 1.0));
        assert_eq!(reg.ridge_lambda, cfg.reg.ridge_lambda);
    }

    #[test]
    fn variant_parsing() {
        for v in Variant::ALL {
            assert_eq!(v.as_str().parse::<Variant>().unwrap(), v);
        }
        assert!("full".parse::<Variant>().is_err());
    }

    #[test]
    fn scale_list_needs_unity() {
        let cfg = TrackerConfig {
            scale_factors: vec![0.95, 1.05],
            ..TrackerConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }
}
