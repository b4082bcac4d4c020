//! Group attributes, ratio pruning and the group shrinkage step.

use crate::error::Result;
use crate::tensor::{RealMatrix, RealTensor3};

use super::check_ratio;

/// `A[i, j] = ||w[i, j, :]||_2`, the cross-channel norm at each location.
pub fn spatial_group_attributes(w: &RealTensor3) -> RealMatrix {
    let n = w.side();
    let plane = n * n;
    let mut acc = vec![0.0; plane];
    for k in 0..w.channels() {
        for (a, v) in acc.iter_mut().zip(w.channel(k)) {
            *a += v * v;
        }
    }
    let data = acc.into_iter().map(f64::sqrt).collect();
    RealMatrix::from_vec(n, data).expect("finite attributes")
}

/// `a[k] = ||W_k||_F` for each channel.
pub fn channel_group_attributes(w: &RealTensor3) -> Vec<f64> {
    (0..w.channels())
        .map(|k| w.channel(k).iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect()
}

/// Keeps the `round(ratio * len)` entries with the largest attributes. Ties
/// keep the lower index first.
pub fn prune_by_ratio(attrs: &[f64], ratio: f64) -> Result<Vec<bool>> {
    check_ratio("ratio", ratio)?;
    let keep = ((ratio * attrs.len() as f64).round() as usize).min(attrs.len());
    let mut order: Vec<usize> = (0..attrs.len()).collect();
    order.sort_by(|&a, &b| attrs[b].total_cmp(&attrs[a]).then(a.cmp(&b)));
    let mut mask = vec![false; attrs.len()];
    for &idx in &order[..keep] {
        mask[idx] = true;
    }
    Ok(mask)
}

/// Joint channel/spatial shrinkage of `p`:
/// `w'[i,j,k] = max(0, 1 - lambda_channel / (mu ||P_k||_F) - lambda_spatial / (mu ||p_ij:||_2)) * p[i,j,k]`.
///
/// A term with a zero weight contributes nothing; a group with zero norm and a
/// positive weight gets a zero factor.
pub fn group_shrink(p: &RealTensor3, mu: f64, lambda_channel: f64, lambda_spatial: f64) -> RealTensor3 {
    debug_assert!(mu > 0.0);
    let channel_term: Vec<f64> = channel_group_attributes(p)
        .into_iter()
        .map(|norm| shrink_term(lambda_channel, mu, norm))
        .collect();
    let spatial_term: Vec<f64> = spatial_group_attributes(p)
        .data()
        .iter()
        .map(|&norm| shrink_term(lambda_spatial, mu, norm))
        .collect();
    let mut out = p.clone();
    for (k, ct) in channel_term.iter().enumerate() {
        for (v, st) in out.channel_mut(k).iter_mut().zip(&spatial_term) {
            let factor = (1.0 - ct - st).max(0.0);
            *v *= factor;
        }
    }
    out
}

fn shrink_term(lambda: f64, mu: f64, norm: f64) -> f64 {
    if lambda == 0.0 {
        0.0
    } else if norm == 0.0 {
        f64::INFINITY
    } else {
        lambda / (mu * norm)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn attributes_of_constant_and_single_entry() {
        let ones = RealTensor3::filled(2, 3, 1.0);
        assert!(spatial_group_attributes(&ones).data().iter().all(|&v| (v - 3f64.sqrt()).abs() < 1e-15));
        assert_eq!(channel_group_attributes(&ones), vec![2.0; 3]);

        let mut one = RealTensor3::zeros(2, 3);
        one.set(0, 1, 2, 5.0);
        let a = spatial_group_attributes(&one);
        assert_eq!(a.get(0, 1), 5.0);
        assert_eq!(a.data().iter().filter(|&&v| v != 0.0).count(), 1);

        let mut zeroed = ones.clone();
        zeroed.channel_mut(1).fill(0.0);
        assert_eq!(channel_group_attributes(&zeroed)[1], 0.0);
    }

    #[test]
    fn attributes_match_direct_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let w = RealTensor3::from_fn(5, 4, |_, _, _| rng.random_range(-2.0..2.0));
        let s = spatial_group_attributes(&w);
        let c = channel_group_attributes(&w);
        for i in 0..5 {
            for j in 0..5 {
                let mut acc = 0.0;
                for k in 0..4 {
                    acc += w.get(i, j, k) * w.get(i, j, k);
                }
                assert!((s.get(i, j) - acc.sqrt()).abs() < 1e-12);
            }
        }
        for (k, ck) in c.iter().enumerate() {
            let mut acc = 0.0;
            for i in 0..5 {
                for j in 0..5 {
                    acc += w.get(i, j, k) * w.get(i, j, k);
                }
            }
            assert!((ck - acc.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn prune_examples() {
        assert_eq!(
            prune_by_ratio(&[3.0, 1.0, 2.0, 5.0, 4.0], 0.4).unwrap(),
            vec![false, false, false, true, true]
        );
        assert_eq!(prune_by_ratio(&[1.0; 4], 0.5).unwrap(), vec![true, true, false, false]);
        assert_eq!(prune_by_ratio(&[0.1, 0.0, 9.0], 1.0).unwrap(), vec![true; 3]);
        assert!(prune_by_ratio(&[1.0], 0.0).is_err());
    }

    #[test]
    fn pruning_is_invariant_to_scaling_one_entry_when_order_kept() {
        let attrs = [0.5, 2.0, 1.0, 3.0, 0.2];
        let base = prune_by_ratio(&attrs, 0.6).unwrap();
        let mut scaled = attrs;
        scaled[3] *= 10.0;
        assert_eq!(prune_by_ratio(&scaled, 0.6).unwrap(), base);
    }

    #[test]
    fn shrink_identity_without_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = RealTensor3::from_fn(3, 2, |_, _, _| rng.random_range(-1.0..1.0));
        assert_eq!(group_shrink(&p, 1.3, 0.0, 0.0), p);
    }

    #[test]
    fn shrink_scalar_group_example() {
        let mut p = RealTensor3::zeros(1, 1);
        p.set(0, 0, 0, 2.0);
        let out = group_shrink(&p, 1.0, 1.0, 0.0);
        assert_eq!(out.get(0, 0, 0), 1.0);
        // 1-D grid search of 0.5 * mu * (v - 2)^2 + |v|
        let mut best = (f64::INFINITY, 0.0);
        let mut v = -4.0;
        while v <= 4.0 {
            let f = 0.5 * (v - 2.0f64).powi(2) + v.abs();
            if f < best.0 {
                best = (f, v);
            }
            v += 1e-4;
        }
        assert!((best.1 - 1.0).abs() < 1e-3);
    }

    #[test]
    fn shrink_clamps_to_zero() {
        let p = RealTensor3::filled(3, 2, 0.1);
        let out = group_shrink(&p, 0.5, 10.0, 10.0);
        assert!(out.data().iter().all(|&v| v == 0.0));
        let z = group_shrink(&RealTensor3::zeros(2, 2), 1.0, 1.0, 1.0);
        assert!(z.data().iter().all(|&v| v == 0.0));
    }
}
