use crate::error::Result;
use crate::tensor::{dft2, ComplexTensor3, Grid2D, RealMatrix};

/// Desired response map, cached in both domains.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseLabel {
    spatial: RealMatrix,
    spectrum: ComplexTensor3,
}

impl ResponseLabel {
    pub fn from_spatial(spatial: RealMatrix) -> Result<Self> {
        let spectrum = dft2(&spatial.to_tensor())?;
        Ok(ResponseLabel { spatial, spectrum })
    }

    pub fn spatial(&self) -> &RealMatrix {
        &self.spatial
    }

    /// Single-channel spectrum.
    pub fn spectrum(&self) -> &ComplexTensor3 {
        &self.spectrum
    }

    pub fn side(&self) -> usize {
        self.spatial.side()
    }
}

/// Gaussian peaked at the grid origin with wrap-around distances, value 1 at
/// `(0, 0)` and `sigma = sigma_factor * sqrt(w * h)` for a target of `w x h` cells.
pub fn gaussian_label(grid: Grid2D, sigma_factor: f64, target_cells: (f64, f64)) -> ResponseLabel {
    let n = grid.side();
    let sigma = sigma_factor * (target_cells.0 * target_cells.1).sqrt();
    let wrap = |i: usize| i.min(n - i) as f64;
    let spatial = RealMatrix::from_fn(n, |i, j| {
        let d2 = wrap(i).powi(2) + wrap(j).powi(2);
        (-d2 / (2.0 * sigma * sigma)).exp()
    });
    ResponseLabel::from_spatial(spatial).expect("gaussian label is finite")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn peak_at_origin_and_symmetric() {
        for n in [5, 8, 13] {
            let y = gaussian_label(Grid2D::square(n).unwrap(), 0.3, (3.0, 4.0));
            let (i, j, v) = y.spatial().argmax();
            assert_eq!((i, j, v), (0, 0, 1.0));
            for a in 0..n {
                for b in 0..n {
                    assert_eq!(y.spatial().get(a, b), y.spatial().get((n - a) % n, (n - b) % n));
                }
            }
        }
    }

    #[test]
    fn unit_sigma_value() {
        let y = gaussian_label(Grid2D::square(8).unwrap(), 1.0, (1.0, 1.0));
        assert!((y.spatial().get(1, 0) - (-0.5f64).exp()).abs() < 1e-12);
        assert!((y.spatial().get(7, 0) - (-0.5f64).exp()).abs() < 1e-12);
    }
}
