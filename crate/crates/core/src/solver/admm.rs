//! ADMM solver for the group-sparse, temporally anchored filter objective.
//!
//! Splitting `w = w'` with scaled penalty `mu / 2 ||w - w' + G / mu||^2`:
//!
//! * `w`-step, per frequency bin: `(x x^H + kappa I) w = x conj(y) + lt * w_prev
//!   + (mu / 2) w' - g / 2` with `kappa = ridge + lt + mu / 2`, solved with the
//!   Sherman-Morrison identity.
//! * `w'`-step: [`group_shrink`] of `p = w + G / mu`.
//! * dual step: `G += mu (w - w')`, then `mu = min(growth * mu, mu_max)`.

use std::ops::Range;

use num_complex::Complex64;

use super::{
    channel_group_attributes, group_shrink, penalty_terms, prune_by_ratio, spatial_group_attributes,
    AdmmConfig, RegularisationConfig, ResponseLabel, SelectionConfig,
};
use crate::error::{Error, Result};
use crate::tensor::{dft2, idft2, ComplexTensor3, RealTensor3};

/// Consecutive objective increases that count as divergence.
const DIVERGENCE_RUN: usize = 10;
const DIVERGENCE_SLACK: f64 = 1e-6;

/// Channels and grid cells kept after pruning.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionMask {
    side: usize,
    pub channel_keep: Vec<bool>,
    /// Row-major `N x N`.
    pub spatial_keep: Vec<bool>,
}

impl SelectionMask {
    pub fn keep_all(side: usize, channels: usize) -> Self {
        SelectionMask {
            side,
            channel_keep: vec![true; channels],
            spatial_keep: vec![true; side * side],
        }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn spatial(&self, i: usize, j: usize) -> bool {
        self.spatial_keep[i * self.side + j]
    }

    pub fn kept_channels(&self) -> Vec<usize> {
        self.channel_keep
            .iter()
            .enumerate()
            .filter_map(|(k, &keep)| keep.then_some(k))
            .collect()
    }

    pub fn kept_cells(&self) -> usize {
        self.spatial_keep.iter().filter(|&&k| k).count()
    }

    /// Zeroes every entry outside the mask.
    pub fn apply(&self, w: &mut RealTensor3) {
        for k in 0..w.channels() {
            let keep_channel = self.channel_keep[k];
            for (v, &keep_cell) in w.channel_mut(k).iter_mut().zip(&self.spatial_keep) {
                if !(keep_channel && keep_cell) {
                    *v = 0.0;
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GfsSolution {
    pub filter: RealTensor3,
    pub mask: SelectionMask,
    pub iterations_used: usize,
    pub primal_residual: f64,
    pub objective_trace: Vec<f64>,
}

/// Learns one frame's filter.
///
/// `w_prev` is the previous frame's learned filter (all zeros on the first
/// frame) and seeds both primal variables. `blocks` lists the channel range of
/// each feature type; channel pruning runs within each block when
/// `sel.per_block` is set, otherwise over all channels. An empty `blocks` slice
/// means a single block.
#[allow(clippy::too_many_arguments)]
pub fn admm_solve(
    x: &RealTensor3,
    y: &ResponseLabel,
    w_prev: &RealTensor3,
    reg: &RegularisationConfig,
    sel: &SelectionConfig,
    admm: &AdmmConfig,
    blocks: &[Range<usize>],
) -> Result<GfsSolution> {
    reg.validate()?;
    sel.validate()?;
    admm.validate()?;
    x.check_same(w_prev)?;
    if y.side() != x.side() {
        return Err(Error::shape(
            format!("label side {}", x.side()),
            format!("label side {}", y.side()),
        ));
    }
    let blocks = normalise_blocks(blocks, x.channels())?;

    let n = x.side();
    let c = x.channels();
    let plane = n * n;
    let xf = dft2(x)?;
    let wpf = dft2(w_prev)?;
    let yf = y.spectrum();
    let xs = xf.data();
    let wps = wpf.data();
    let ys = yf.data();
    let energy: Vec<f64> = (0..plane)
        .map(|b| (0..c).map(|k| xs[k * plane + b].norm_sqr()).sum())
        .collect();

    let mut w = w_prev.clone();
    let mut w_split = w_prev.clone();
    let mut splitf = wpf.clone();
    let mut dual = RealTensor3::zeros(n, c);
    let mut dualf = ComplexTensor3::zeros(n, c);
    let mut mu = admm.mu_init;
    let mut trace = Vec::with_capacity(admm.max_iters);
    let mut rising = 0;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    let lt = reg.lambda_temporal;

    let mut wf = ComplexTensor3::zeros(n, c);
    let mut rhs = vec![Complex64::new(0.0, 0.0); c];
    while iterations < admm.max_iters {
        iterations += 1;

        let kappa = reg.ridge_lambda + lt + 0.5 * mu;
        {
            let ss = splitf.data();
            let ds = dualf.data();
            let out = wf.data_mut();
            for b in 0..plane {
                let target = ys[b].conj();
                let mut proj = Complex64::new(0.0, 0.0);
                for (k, r) in rhs.iter_mut().enumerate() {
                    let at = k * plane + b;
                    *r = xs[at] * target + wps[at] * lt + ss[at] * (0.5 * mu) - ds[at] * 0.5;
                    proj += xs[at].conj() * *r;
                }
                let coef = proj / (kappa + energy[b]);
                for (k, r) in rhs.iter().enumerate() {
                    let at = k * plane + b;
                    out[at] = (r - xs[at] * coef) / kappa;
                }
            }
        }
        let w_next = idft2(&wf)?;

        let p = w_next.add_scaled(1.0 / mu, &dual)?;
        let split_next = group_shrink(&p, mu, reg.lambda_channel, reg.lambda_spatial);
        let gap = w_next.sub(&split_next)?;
        dual = dual.add_scaled(mu, &gap)?;
        splitf = dft2(&split_next)?;
        for ((d, a), b) in dualf.data_mut().iter_mut().zip(wf.data()).zip(splitf.data()) {
            *d += (a - b) * mu;
        }

        residual = gap.norm() / w_next.norm().max(1.0);
        let change = w_next.sub(&w)?.norm() / w_next.norm().max(1.0);
        w = w_next;
        w_split = split_next;
        mu = (mu * admm.mu_growth).min(admm.mu_max);

        let value = spectral_data_term(xs, splitf.data(), ys, plane, c) + penalty_terms(&w_split, w_prev, reg);
        if let Some(&last) = trace.last() {
            if value > last + DIVERGENCE_SLACK * f64::abs(last) {
                rising += 1;
            } else {
                rising = 0;
            }
        }
        trace.push(value);
        if rising >= DIVERGENCE_RUN {
            return Err(Error::Divergence { trace });
        }
        if residual <= admm.tol_primal && change <= admm.tol_change {
            break;
        }
    }

    let mask = build_mask(&w_split, sel, &blocks)?;
    let mut filter = w_split;
    mask.apply(&mut filter);
    Ok(GfsSolution {
        filter,
        mask,
        iterations_used: iterations,
        primal_residual: residual,
        objective_trace: trace,
    })
}

/// `||corr(x, w) - y||^2` from spectra via Parseval.
fn spectral_data_term(xs: &[Complex64], ws: &[Complex64], ys: &[Complex64], plane: usize, c: usize) -> f64 {
    let mut total = 0.0;
    for b in 0..plane {
        let mut r = -ys[b];
        for k in 0..c {
            r += ws[k * plane + b].conj() * xs[k * plane + b];
        }
        total += r.norm_sqr();
    }
    total / plane as f64
}

fn normalise_blocks(blocks: &[Range<usize>], channels: usize) -> Result<Vec<Range<usize>>> {
    if blocks.is_empty() {
        return Ok(vec![0..channels]);
    }
    let mut next = 0;
    for b in blocks {
        if b.start != next || b.end <= b.start {
            return Err(Error::Input(format!(
                "feature blocks must tile the channel axis, got {}..{} after {next}",
                b.start, b.end
            )));
        }
        next = b.end;
    }
    if next != channels {
        return Err(Error::shape(
            format!("blocks covering {channels} channels"),
            format!("{next} channels"),
        ));
    }
    Ok(blocks.to_vec())
}

fn build_mask(w: &RealTensor3, sel: &SelectionConfig, blocks: &[Range<usize>]) -> Result<SelectionMask> {
    let c = w.channels();
    let channel_attrs = channel_group_attributes(w);
    let mut channel_keep = vec![false; c];
    if sel.per_block {
        for b in blocks {
            let keep = prune_by_ratio(&channel_attrs[b.clone()], sel.channel_ratio)?;
            channel_keep[b.clone()].copy_from_slice(&keep);
        }
    } else {
        channel_keep = prune_by_ratio(&channel_attrs, sel.channel_ratio)?;
    }
    let spatial_keep = prune_by_ratio(spatial_group_attributes(w).data(), sel.spatial_ratio)?;
    Ok(SelectionMask {
        side: w.side(),
        channel_keep,
        spatial_keep,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{dcf_closed_form, gaussian_label, objective_value};
    use crate::tensor::Grid2D;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, n: usize, c: usize) -> RealTensor3 {
        RealTensor3::from_fn(n, c, |_, _, _| rng.random_range(-1.0..1.0))
    }

    fn tight() -> AdmmConfig {
        AdmmConfig {
            mu_init: 1e-3,
            mu_growth: 1.05,
            mu_max: 1e-2,
            max_iters: 100,
            tol_primal: 1e-13,
            tol_change: 1e-13,
        }
    }

    fn no_penalties(ridge: f64) -> RegularisationConfig {
        RegularisationConfig {
            lambda_spatial: 0.0,
            lambda_channel: 0.0,
            lambda_temporal: 0.0,
            ridge_lambda: ridge,
        }
    }

    #[test]
    fn unpenalised_solve_matches_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let x = random(&mut rng, 4, 2);
        let y = gaussian_label(Grid2D::square(4).unwrap(), 0.5, (2.0, 2.0));
        let zero = RealTensor3::zeros(4, 2);
        let sol = admm_solve(&x, &y, &zero, &no_penalties(0.0), &SelectionConfig::keep_all(), &tight(), &[])
            .unwrap();
        let reference = dcf_closed_form(&x, &y, 0.0).unwrap();
        let rel = sol.filter.sub(&reference).unwrap().norm() / reference.norm();
        assert!(rel < 1e-6, "relative error {rel}");
    }

    #[test]
    fn large_temporal_weight_pins_previous_filter() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let x = random(&mut rng, 4, 2);
        let prev = random(&mut rng, 4, 2);
        let y = gaussian_label(Grid2D::square(4).unwrap(), 0.5, (2.0, 2.0));
        let reg = RegularisationConfig {
            lambda_temporal: 1e6,
            ..no_penalties(0.0)
        };
        let sol = admm_solve(&x, &y, &prev, &reg, &SelectionConfig::keep_all(), &AdmmConfig::default(), &[])
            .unwrap();
        let rel = sol.filter.sub(&prev).unwrap().norm() / prev.norm();
        assert!(rel < 1e-2);
    }

    #[test]
    fn masked_entries_are_exactly_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let x = random(&mut rng, 8, 6);
        let y = gaussian_label(Grid2D::square(8).unwrap(), 0.3, (3.0, 3.0));
        let sel = SelectionConfig {
            channel_ratio: 0.5,
            spatial_ratio: 0.25,
            per_block: true,
        };
        let blocks = [0..2, 2..6];
        let sol = admm_solve(
            &x,
            &y,
            &RealTensor3::zeros(8, 6),
            &RegularisationConfig::default(),
            &sel,
            &AdmmConfig::default(),
            &blocks,
        )
        .unwrap();
        assert_eq!(sol.mask.channel_keep[0..2].iter().filter(|&&k| k).count(), 1);
        assert_eq!(sol.mask.channel_keep[2..6].iter().filter(|&&k| k).count(), 2);
        assert_eq!(sol.mask.kept_cells(), 16);
        for k in 0..6 {
            for i in 0..8 {
                for j in 0..8 {
                    if !(sol.mask.channel_keep[k] && sol.mask.spatial(i, j)) {
                        assert_eq!(sol.filter.get(i, j, k), 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn objective_improves_on_the_start_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let x = random(&mut rng, 4, 2);
        let prev = random(&mut rng, 4, 2).scaled(0.1);
        let y = gaussian_label(Grid2D::square(4).unwrap(), 0.5, (2.0, 2.0));
        let reg = RegularisationConfig {
            lambda_spatial: 0.05,
            lambda_channel: 0.1,
            lambda_temporal: 0.5,
            ridge_lambda: 0.0,
        };
        let sol = admm_solve(&x, &y, &prev, &reg, &SelectionConfig::keep_all(), &AdmmConfig::default(), &[])
            .unwrap();
        let start = objective_value(&prev, &x, &y, &prev, &reg).unwrap();
        let end = objective_value(&sol.filter, &x, &y, &prev, &reg).unwrap();
        assert!(end <= start);
        assert_eq!(sol.objective_trace.len(), sol.iterations_used);
    }

    #[test]
    fn bad_blocks_are_rejected() {
        let x = RealTensor3::filled(4, 3, 0.1);
        let y = gaussian_label(Grid2D::square(4).unwrap(), 0.5, (2.0, 2.0));
        let zero = RealTensor3::zeros(4, 3);
        let run = |blocks: &[Range<usize>]| {
            admm_solve(
                &x,
                &y,
                &zero,
                &no_penalties(0.1),
                &SelectionConfig::keep_all(),
                &AdmmConfig::default(),
                blocks,
            )
        };
        assert!(run(&[0..1, 2..3]).is_err());
        assert!(run(&[0..2]).is_err());
        assert!(run(&[0..1, 1..3]).is_ok());
    }
}
