use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_TOLERANCE_RATIO: f64 = 1e-3;

/// Numerical rank of the matrix whose columns are the vectorised filters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankDiagnostic {
    pub numerical_rank: usize,
    /// Descending.
    pub singular_values: Vec<f64>,
    pub tolerance_ratio: f64,
}

/// Counts singular values above `tolerance_ratio * sigma_max`.
pub fn rank_diagnostic(history: &[Vec<f64>], tolerance_ratio: f64) -> Result<RankDiagnostic> {
    let first = history
        .first()
        .ok_or_else(|| Error::Input("rank diagnostic needs at least one filter".into()))?;
    let rows = first.len();
    if history.iter().any(|h| h.len() != rows) {
        return Err(Error::Input("filters in the history differ in length".into()));
    }
    let m = DMatrix::from_fn(rows, history.len(), |r, c| history[c][r]);
    let mut singular_values: Vec<f64> = m.singular_values().iter().copied().collect();
    singular_values.sort_by(|a, b| b.total_cmp(a));
    let top = singular_values.first().copied().unwrap_or(0.0);
    let numerical_rank = if top > 0.0 {
        singular_values.iter().filter(|&&s| s > tolerance_ratio * top).count()
    } else {
        0
    };
    Ok(RankDiagnostic {
        numerical_rank,
        singular_values,
        tolerance_ratio,
    })
}
