//! Filter learning.
//!
//! [`dcf_closed_form`] is the classical ridge-regression correlation filter and
//! serves as the reference for [`admm_solve`], which adds channel and spatial
//! group sparsity, a temporal anchor to the previous frame's filter and
//! ratio-based pruning.
//!
//! Correlation convention used everywhere: the response of filter `w` on
//! features `x` is `R = idft2(sum_k conj(W_k) * X_k)`, i.e.
//! `R[t] = sum_k sum_m w_k[m] x_k[m + t]`.

mod admm;
mod closed_form;
mod groups;
mod label;

use serde::{Deserialize, Serialize};

pub use admm::{admm_solve, SelectionMask, GfsSolution};
pub use closed_form::dcf_closed_form;
pub use groups::{channel_group_attributes, group_shrink, prune_by_ratio, spatial_group_attributes};
pub use label::{gaussian_label, ResponseLabel};

use crate::error::{Error, Result};
use crate::tensor::{circ_correlate, RealTensor3};

/// Weights of the objective terms.
///
/// `lambda_spatial` weighs the sum of per-location cross-channel L2 norms,
/// `lambda_channel` the sum of per-channel Frobenius norms, `lambda_temporal`
/// the squared distance to the previous frame's filter and `ridge_lambda` the
/// plain squared norm of the filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularisationConfig {
    pub lambda_spatial: f64,
    pub lambda_channel: f64,
    pub lambda_temporal: f64,
    pub ridge_lambda: f64,
}

impl Default for RegularisationConfig {
    fn default() -> Self {
        RegularisationConfig {
            lambda_spatial: 1.0,
            lambda_channel: 10.0,
            lambda_temporal: 16.0,
            ridge_lambda: 1e-2,
        }
    }
}

impl RegularisationConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda_spatial", self.lambda_spatial),
            ("lambda_channel", self.lambda_channel),
            ("lambda_temporal", self.lambda_temporal),
            ("ridge_lambda", self.ridge_lambda),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be a finite value >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub channel_ratio: f64,
    pub spatial_ratio: f64,
    pub per_block: bool,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            channel_ratio: 0.9,
            spatial_ratio: 0.1,
            per_block: true,
        }
    }
}

impl SelectionConfig {
    pub fn keep_all() -> Self {
        SelectionConfig {
            channel_ratio: 1.0,
            spatial_ratio: 1.0,
            per_block: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_ratio("channel_ratio", self.channel_ratio)?;
        check_ratio("spatial_ratio", self.spatial_ratio)
    }
}

pub(crate) fn check_ratio(name: &str, r: f64) -> Result<()> {
    if !(r > 0.0 && r <= 1.0) {
        return Err(Error::Config(format!("{name} must be in (0, 1], got {r}")));
    }
    Ok(())
}

/// Penalty schedule and stopping rule for the ADMM iterations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmmConfig {
    pub mu_init: f64,
    pub mu_growth: f64,
    pub mu_max: f64,
    pub max_iters: usize,
    pub tol_primal: f64,
    pub tol_change: f64,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        AdmmConfig {
            mu_init: 1.0,
            mu_growth: 1.05,
            mu_max: 100.0,
            max_iters: 50,
            tol_primal: 1e-5,
            tol_change: 1e-5,
        }
    }
}

impl AdmmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu_init > 0.0 && self.mu_max > 0.0 && self.mu_init <= self.mu_max) {
            return Err(Error::Config(format!(
                "need 0 < mu_init <= mu_max, got {} and {}",
                self.mu_init, self.mu_max
            )));
        }
        if !(self.mu_growth >= 1.0) {
            return Err(Error::Config(format!("mu_growth must be >= 1, got {}", self.mu_growth)));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be positive".into()));
        }
        if !(self.tol_primal > 0.0 && self.tol_change > 0.0) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        Ok(())
    }
}

/// Value of the learning objective at `w`:
/// `||corr(x, w) - y||^2 + lambda_spatial * sum_ij ||w_ij:||_2
///  + lambda_channel * sum_k ||W_k||_F + lambda_temporal * ||w - w_prev||^2
///  + ridge_lambda * ||w||^2`.
pub fn objective_value(
    w: &RealTensor3,
    x: &RealTensor3,
    y: &ResponseLabel,
    w_prev: &RealTensor3,
    reg: &RegularisationConfig,
) -> Result<f64> {
    w.check_same(x)?;
    w.check_same(w_prev)?;
    if y.side() != w.side() {
        return Err(Error::shape(
            format!("label side {}", w.side()),
            format!("label side {}", y.side()),
        ));
    }
    let response = circ_correlate(x, w)?;
    let data: f64 = response
        .data()
        .iter()
        .zip(y.spatial().data())
        .map(|(r, t)| (r - t).powi(2))
        .sum();
    Ok(data + penalty_terms(w, w_prev, reg))
}

pub(crate) fn penalty_terms(w: &RealTensor3, w_prev: &RealTensor3, reg: &RegularisationConfig) -> f64 {
    let mut total = 0.0;
    if reg.lambda_spatial != 0.0 {
        total += reg.lambda_spatial * spatial_group_attributes(w).data().iter().sum::<f64>();
    }
    if reg.lambda_channel != 0.0 {
        total += reg.lambda_channel * channel_group_attributes(w).iter().sum::<f64>();
    }
    if reg.lambda_temporal != 0.0 {
        let d: f64 = w.data().iter().zip(w_prev.data()).map(|(a, b)| (a - b).powi(2)).sum();
        total += reg.lambda_temporal * d;
    }
    if reg.ridge_lambda != 0.0 {
        total += reg.ridge_lambda * w.data().iter().map(|v| v * v).sum::<f64>();
    }
    total
}

/// Running-model blend `alpha * w_new + (1 - alpha) * w_model`.
pub fn model_update(w_new: &RealTensor3, w_model: &RealTensor3, alpha: f64) -> Result<RealTensor3> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Config(format!("alpha must be in [0, 1], got {alpha}")));
    }
    w_new.check_same(w_model)?;
    let data = w_new
        .data()
        .iter()
        .zip(w_model.data())
        .map(|(n, m)| alpha * n + (1.0 - alpha) * m)
        .collect();
    RealTensor3::from_vec(w_new.side(), w_new.channels(), data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Grid2D;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn model_update_endpoints_and_hand_crafted_rate() {
        let ones = RealTensor3::filled(3, 2, 1.0);
        let zeros = RealTensor3::zeros(3, 2);
        assert_eq!(model_update(&ones, &zeros, 1.0).unwrap(), ones);
        assert_eq!(model_update(&ones, &zeros, 0.0).unwrap(), zeros);
        let blended = model_update(&ones, &zeros, 0.6).unwrap();
        assert!(blended.data().iter().all(|&v| v == 0.6));
        assert!(matches!(model_update(&ones, &zeros, 1.5), Err(Error::Config(_))));
    }

    #[test]
    fn objective_trivial_values() {
        let grid = Grid2D::square(4).unwrap();
        let reg = RegularisationConfig::default();
        let zero = RealTensor3::zeros(4, 2);
        let x = RealTensor3::filled(4, 2, 0.3);
        let y0 = ResponseLabel::from_spatial(crate::tensor::RealMatrix::zeros(4)).unwrap();
        assert_eq!(objective_value(&zero, &x, &y0, &zero, &reg).unwrap(), 0.0);

        let y = gaussian_label(grid, 0.5, (2.0, 2.0));
        let v = objective_value(&zero, &x, &y, &zero, &reg).unwrap();
        assert!((v - y.spatial().frobenius_sq()).abs() < 1e-15);
    }

    #[test]
    fn objective_matches_term_by_term_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 4;
        let c = 3;
        let mut r = || RealTensor3::from_fn(n, c, |_, _, _| rng.random_range(-1.0..1.0));
        let (w, x, wp) = (r(), r(), r());
        let y = gaussian_label(Grid2D::square(n).unwrap(), 0.4, (2.0, 1.5));
        let reg = RegularisationConfig {
            lambda_spatial: 0.7,
            lambda_channel: 1.3,
            lambda_temporal: 2.1,
            ridge_lambda: 0.05,
        };
        let mut data = 0.0;
        for ti in 0..n {
            for tj in 0..n {
                let mut resp = 0.0;
                for k in 0..c {
                    for m in 0..n {
                        for l in 0..n {
                            resp += w.get(m, l, k) * x.get((m + ti) % n, (l + tj) % n, k);
                        }
                    }
                }
                data += (resp - y.spatial().get(ti, tj)).powi(2);
            }
        }
        let mut spatial = 0.0;
        for i in 0..n {
            for j in 0..n {
                spatial += (0..c).map(|k| w.get(i, j, k).powi(2)).sum::<f64>().sqrt();
            }
        }
        let mut channel = 0.0;
        let mut temporal = 0.0;
        let mut ridge = 0.0;
        for k in 0..c {
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    s += w.get(i, j, k).powi(2);
                    temporal += (w.get(i, j, k) - wp.get(i, j, k)).powi(2);
                    ridge += w.get(i, j, k).powi(2);
                }
            }
            channel += s.sqrt();
        }
        let expect = data + 0.7 * spatial + 1.3 * channel + 2.1 * temporal + 0.05 * ridge;
        let got = objective_value(&w, &x, &y, &wp, &reg).unwrap();
        assert!((got - expect).abs() < 1e-10 * expect.max(1.0));
    }

    #[test]
    fn config_validation() {
        assert!(RegularisationConfig { lambda_spatial: -1.0, ..Default::default() }.validate().is_err());
        assert!(SelectionConfig { channel_ratio: 0.0, ..Default::default() }.validate().is_err());
        assert!(SelectionConfig { spatial_ratio: 1.1, ..Default::default() }.validate().is_err());
        assert!(AdmmConfig { mu_init: 200.0, ..Default::default() }.validate().is_err());
        assert!(AdmmConfig { mu_growth: 0.9, ..Default::default() }.validate().is_err());
        assert!(AdmmConfig::default().validate().is_ok());
    }
}
