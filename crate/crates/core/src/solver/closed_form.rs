use num_complex::Complex64;

use super::ResponseLabel;
use crate::error::{Error, Result};
use crate::tensor::{dft2, idft2, ComplexTensor3, RealTensor3};

/// Ridge-regression correlation filter: minimises
/// `||corr(x, w) - y||^2 + ridge_lambda * ||w||^2`.
///
/// Per frequency bin this is `(x x^H + lambda I) w = x conj(y)`, and the
/// rank-one structure gives `w = x conj(y) / (lambda + x^H x)` without forming
/// the `C x C` matrix. With `lambda = 0` the result is the minimum-norm
/// interpolating filter; a bin with no feature energy is then singular.
pub fn dcf_closed_form(x: &RealTensor3, y: &ResponseLabel, ridge_lambda: f64) -> Result<RealTensor3> {
    if !(ridge_lambda >= 0.0) {
        return Err(Error::Config(format!("ridge_lambda must be >= 0, got {ridge_lambda}")));
    }
    if y.side() != x.side() {
        return Err(Error::shape(
            format!("label side {}", x.side()),
            format!("label side {}", y.side()),
        ));
    }
    let xf = dft2(x)?;
    let yf = y.spectrum();
    let n = x.side();
    let c = x.channels();
    let peak_energy = (0..n * n)
        .map(|b| (0..c).map(|k| xf.get(b / n, b % n, k).norm_sqr()).sum::<f64>())
        .fold(0.0, f64::max);
    let floor = peak_energy * f64::EPSILON * f64::EPSILON;

    let mut wf = ComplexTensor3::zeros(n, c);
    for i in 0..n {
        for j in 0..n {
            let energy: f64 = (0..c).map(|k| xf.get(i, j, k).norm_sqr()).sum();
            let denom = ridge_lambda + energy;
            if ridge_lambda == 0.0 && energy <= floor {
                return Err(Error::Singular { i, j });
            }
            let target = yf.get(i, j, 0).conj() / denom;
            for k in 0..c {
                let v: Complex64 = xf.get(i, j, k) * target;
                wf.set(i, j, k, v);
            }
        }
    }
    idft2(&wf)
}
