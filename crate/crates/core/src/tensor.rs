//! Square multi-channel tensors and their per-channel 2D DFT.
//!
//! Storage is channel-major: element `(i, j, k)` lives at `k * N * N + i * N + j`.
//! That is the same order the `FTEN` file format uses, so a channel slice is a
//! contiguous row-major `N x N` plane.

use std::cell::RefCell;
use std::fmt;
use std::ops::Range;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Relative tolerance for the conjugate-symmetry check in [`idft2`].
pub const SYMMETRY_TOLERANCE: f64 = 1e-9;

/// Side length of a square feature grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Grid2D {
    side: usize,
}

impl Grid2D {
    pub fn new(height: usize, width: usize) -> Result<Self> {
        if height != width {
            return Err(Error::Geometry(format!(
                "grid must be square, got {height}x{width}"
            )));
        }
        if height < 2 {
            return Err(Error::Geometry(format!(
                "grid side must be at least 2, got {height}"
            )));
        }
        Ok(Grid2D { side: height })
    }

    pub fn square(side: usize) -> Result<Self> {
        Self::new(side, side)
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn cells(&self) -> usize {
        self.side * self.side
    }
}

impl fmt::Display for Grid2D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.side, self.side)
    }
}

/// Shape of a square `N x N x C` tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Shape3 {
    pub side: usize,
    pub channels: usize,
}

impl Shape3 {
    pub fn len(&self) -> usize {
        self.side * self.side * self.channels
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn plane(&self) -> usize {
        self.side * self.side
    }
}

impl fmt::Display for Shape3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.side, self.side, self.channels)
    }
}

/// Real `N x N x C` tensor with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct RealTensor3 {
    shape: Shape3,
    data: Vec<f64>,
}

impl RealTensor3 {
    pub fn zeros(side: usize, channels: usize) -> Self {
        let shape = Shape3 { side, channels };
        RealTensor3 {
            shape,
            data: vec![0.0; shape.len()],
        }
    }

    pub fn filled(side: usize, channels: usize, value: f64) -> Self {
        let shape = Shape3 { side, channels };
        RealTensor3 {
            shape,
            data: vec![value; shape.len()],
        }
    }

    /// Wraps channel-major data, rejecting wrong lengths and non-finite values.
    pub fn from_vec(side: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        let shape = Shape3 { side, channels };
        if data.len() != shape.len() {
            return Err(Error::shape(
                format!("{} values for {shape}", shape.len()),
                format!("{} values", data.len()),
            ));
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NumericInput { index });
        }
        Ok(RealTensor3 { shape, data })
    }

    pub fn from_fn(side: usize, channels: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut t = Self::zeros(side, channels);
        for k in 0..channels {
            for i in 0..side {
                for j in 0..side {
                    t.set(i, j, k, f(i, j, k));
                }
            }
        }
        t
    }

    pub fn shape(&self) -> Shape3 {
        self.shape
    }

    pub fn side(&self) -> usize {
        self.shape.side
    }

    pub fn channels(&self) -> usize {
        self.shape.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.shape.side + i) * self.shape.side + j
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.index(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, value: f64) {
        let idx = self.index(i, j, k);
        self.data[idx] = value;
    }

    pub fn channel(&self, k: usize) -> &[f64] {
        let plane = self.shape.plane();
        &self.data[k * plane..(k + 1) * plane]
    }

    pub fn channel_mut(&mut self, k: usize) -> &mut [f64] {
        let plane = self.shape.plane();
        &mut self.data[k * plane..(k + 1) * plane]
    }

    /// Copies channels `range` into a new tensor.
    pub fn slice_channels(&self, range: Range<usize>) -> Result<Self> {
        if range.start > range.end || range.end > self.channels() {
            return Err(Error::shape(
                format!("channel range within 0..{}", self.channels()),
                format!("{}..{}", range.start, range.end),
            ));
        }
        let plane = self.shape.plane();
        Ok(RealTensor3 {
            shape: Shape3 {
                side: self.side(),
                channels: range.len(),
            },
            data: self.data[range.start * plane..range.end * plane].to_vec(),
        })
    }

    /// Concatenates tensors along the channel axis.
    pub fn concat_channels(parts: &[&RealTensor3]) -> Result<Self> {
        let side = parts.first().map(|p| p.side()).unwrap_or(0);
        let mut data = Vec::new();
        let mut channels = 0;
        for p in parts {
            if p.side() != side {
                return Err(Error::shape(
                    format!("grid side {side}"),
                    format!("grid side {}", p.side()),
                ));
            }
            data.extend_from_slice(&p.data);
            channels += p.channels();
        }
        Ok(RealTensor3 {
            shape: Shape3 { side, channels },
            data,
        })
    }

    /// Reorders channels so that output channel `k` is input channel `perm[k]`.
    pub fn permute_channels(&self, perm: &[usize]) -> Self {
        let mut out = Self::zeros(self.side(), perm.len());
        for (k, &src) in perm.iter().enumerate() {
            out.channel_mut(k).copy_from_slice(self.channel(src));
        }
        out
    }

    /// Cyclic shift: `out[(i + di) mod N, (j + dj) mod N, k] = self[i, j, k]`.
    pub fn roll(&self, di: isize, dj: isize) -> Self {
        let n = self.side() as isize;
        let mut out = Self::zeros(self.side(), self.channels());
        for k in 0..self.channels() {
            for i in 0..n {
                let ti = (i + di).rem_euclid(n) as usize;
                for j in 0..n {
                    let tj = (j + dj).rem_euclid(n) as usize;
                    out.set(ti, tj, k, self.get(i as usize, j as usize, k));
                }
            }
        }
        out
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &RealTensor3) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn scaled(&self, s: f64) -> Self {
        RealTensor3 {
            shape: self.shape,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, s: f64, other: &RealTensor3) -> Result<Self> {
        self.check_same(other)?;
        Ok(RealTensor3 {
            shape: self.shape,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + s * b)
                .collect(),
        })
    }

    pub fn sub(&self, other: &RealTensor3) -> Result<Self> {
        self.add_scaled(-1.0, other)
    }

    pub fn check_same(&self, other: &RealTensor3) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::shape(self.shape, other.shape));
        }
        Ok(())
    }

    /// Multiplies every channel elementwise by an `N x N` plane.
    pub fn apply_window(&mut self, window: &RealMatrix) {
        debug_assert_eq!(window.side(), self.side());
        for k in 0..self.channels() {
            for (v, w) in self.channel_mut(k).iter_mut().zip(window.data()) {
                *v *= w;
            }
        }
    }
}

/// Complex `N x N x C` tensor, usually the spectrum of a [`RealTensor3`].
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexTensor3 {
    shape: Shape3,
    data: Vec<Complex64>,
    hermitian: bool,
}

impl ComplexTensor3 {
    pub fn zeros(side: usize, channels: usize) -> Self {
        let shape = Shape3 { side, channels };
        ComplexTensor3 {
            shape,
            data: vec![Complex64::new(0.0, 0.0); shape.len()],
            hermitian: false,
        }
    }

    pub fn from_vec(side: usize, channels: usize, data: Vec<Complex64>) -> Result<Self> {
        let shape = Shape3 { side, channels };
        if data.len() != shape.len() {
            return Err(Error::shape(
                format!("{} values for {shape}", shape.len()),
                format!("{} values", data.len()),
            ));
        }
        if let Some(index) = data.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::NumericInput { index });
        }
        Ok(ComplexTensor3 {
            shape,
            data,
            hermitian: false,
        })
    }

    pub fn shape(&self) -> Shape3 {
        self.shape
    }

    pub fn side(&self) -> usize {
        self.shape.side
    }

    pub fn channels(&self) -> usize {
        self.shape.channels
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    /// Mutable access clears the conjugate-symmetry flag.
    pub fn data_mut(&mut self) -> &mut [Complex64] {
        self.hermitian = false;
        &mut self.data
    }

    /// True when this tensor was produced as the DFT of real data.
    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.shape.side + i) * self.shape.side + j
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> Complex64 {
        self.data[self.index(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, value: Complex64) {
        let idx = self.index(i, j, k);
        self.hermitian = false;
        self.data[idx] = value;
    }

    pub fn channel(&self, k: usize) -> &[Complex64] {
        let plane = self.shape.plane();
        &self.data[k * plane..(k + 1) * plane]
    }

    /// The cross-channel vector at frequency bin `(i, j)`.
    pub fn frequency_vector(&self, i: usize, j: usize) -> Vec<Complex64> {
        (0..self.channels()).map(|k| self.get(i, j, k)).collect()
    }

    pub fn set_frequency_vector(&mut self, i: usize, j: usize, values: &[Complex64]) -> Result<()> {
        if values.len() != self.channels() {
            return Err(Error::shape(
                format!("vector of length {}", self.channels()),
                format!("length {}", values.len()),
            ));
        }
        for (k, v) in values.iter().enumerate() {
            self.set(i, j, k, *v);
        }
        Ok(())
    }

    /// Iterates over every frequency bin in lexicographic `(i, j)` order.
    pub fn frequency_vectors(&self) -> FrequencyVectors<'_> {
        FrequencyVectors {
            tensor: self,
            next: 0,
        }
    }

    /// Rebuilds a tensor from `(i, j, vector)` triples, e.g. the output of
    /// [`ComplexTensor3::frequency_vectors`] after modification.
    pub fn from_frequency_vectors(
        side: usize,
        channels: usize,
        vectors: impl IntoIterator<Item = FrequencyVector>,
    ) -> Result<Self> {
        let mut out = Self::zeros(side, channels);
        for fv in vectors {
            if fv.i >= side || fv.j >= side {
                return Err(Error::shape(
                    format!("bin within {side}x{side}"),
                    format!("({}, {})", fv.i, fv.j),
                ));
            }
            out.set_frequency_vector(fv.i, fv.j, &fv.values)?;
        }
        Ok(out)
    }

    /// Largest relative deviation from `X[i,j,k] == conj(X[-i,-j,k])`.
    pub fn symmetry_deviation(&self) -> f64 {
        let n = self.side();
        let scale = self.data.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for k in 0..self.channels() {
            for i in 0..n {
                let mi = (n - i) % n;
                for j in 0..n {
                    let mj = (n - j) % n;
                    let d = (self.get(i, j, k) - self.get(mi, mj, k).conj()).norm();
                    worst = worst.max(d);
                }
            }
        }
        worst / scale
    }
}

/// One frequency bin's cross-channel vector.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyVector {
    pub i: usize,
    pub j: usize,
    pub values: Vec<Complex64>,
}

pub struct FrequencyVectors<'a> {
    tensor: &'a ComplexTensor3,
    next: usize,
}

impl Iterator for FrequencyVectors<'_> {
    type Item = FrequencyVector;

    fn next(&mut self) -> Option<FrequencyVector> {
        let n = self.tensor.side();
        if self.next >= n * n {
            return None;
        }
        let (i, j) = (self.next / n, self.next % n);
        self.next += 1;
        Some(FrequencyVector {
            i,
            j,
            values: self.tensor.frequency_vector(i, j),
        })
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let rest = self.tensor.side() * self.tensor.side() - self.next;
        (rest, Some(rest))
    }
}

impl ExactSizeIterator for FrequencyVectors<'_> {}

/// Real square matrix (labels, response maps, heat-maps, windows).
#[derive(Debug, Clone, PartialEq)]
pub struct RealMatrix {
    side: usize,
    data: Vec<f64>,
}

impl RealMatrix {
    pub fn zeros(side: usize) -> Self {
        RealMatrix {
            side,
            data: vec![0.0; side * side],
        }
    }

    pub fn from_vec(side: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != side * side {
            return Err(Error::shape(
                format!("{} values", side * side),
                format!("{} values", data.len()),
            ));
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NumericInput { index });
        }
        Ok(RealMatrix { side, data })
    }

    pub fn from_fn(side: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(side * side);
        for i in 0..side {
            for j in 0..side {
                data.push(f(i, j));
            }
        }
        RealMatrix { side, data }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.side + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.side + j] = v;
    }

    /// Position of the maximum; ties go to the lexicographically first index.
    pub fn argmax(&self) -> (usize, usize, f64) {
        let mut best = 0;
        for (idx, v) in self.data.iter().enumerate() {
            if *v > self.data[best] {
                best = idx;
            }
        }
        (best / self.side, best % self.side, self.data[best])
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn to_tensor(&self) -> RealTensor3 {
        RealTensor3 {
            shape: Shape3 {
                side: self.side,
                channels: 1,
            },
            data: self.data.clone(),
        }
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Direction {
    Forward,
    Inverse,
}

/// Unnormalised in-place 2D FFT of one row-major `n x n` plane.
fn fft2_plane(plane: &mut [Complex64], n: usize, dir: Direction) {
    let fft = PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        match dir {
            Direction::Forward => p.plan_fft_forward(n),
            Direction::Inverse => p.plan_fft_inverse(n),
        }
    });
    fft.process(plane);
    let mut column = vec![Complex64::new(0.0, 0.0); n];
    for j in 0..n {
        for i in 0..n {
            column[i] = plane[i * n + j];
        }
        fft.process(&mut column);
        for i in 0..n {
            plane[i * n + j] = column[i];
        }
    }
}

/// Per-channel unnormalised forward 2D DFT.
pub fn dft2(t: &RealTensor3) -> Result<ComplexTensor3> {
    if let Some(index) = t.data.iter().position(|v| !v.is_finite()) {
        return Err(Error::NumericInput { index });
    }
    let shape = t.shape();
    let n = shape.side;
    let mut data: Vec<Complex64> = t.data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    if n > 0 {
        for plane in data.chunks_mut(shape.plane()) {
            fft2_plane(plane, n, Direction::Forward);
        }
    }
    Ok(ComplexTensor3 {
        shape,
        data,
        hermitian: true,
    })
}

/// Inverse 2D DFT with `1/N^2` normalisation; the spectrum must be that of real data.
pub fn idft2(t: &ComplexTensor3) -> Result<RealTensor3> {
    let deviation = t.symmetry_deviation();
    if deviation > SYMMETRY_TOLERANCE {
        return Err(Error::Symmetry { deviation });
    }
    let shape = t.shape();
    let n = shape.side;
    let mut data = t.data.clone();
    if n > 0 {
        for plane in data.chunks_mut(shape.plane()) {
            fft2_plane(plane, n, Direction::Inverse);
        }
    }
    let norm = 1.0 / (n * n).max(1) as f64;
    Ok(RealTensor3 {
        shape,
        data: data.into_iter().map(|v| v.re * norm).collect(),
    })
}

/// Channel-summed response `idft2(sum_k conj(W_k) * A_k)` from precomputed spectra.
pub fn correlate_spectra(a: &ComplexTensor3, w: &ComplexTensor3) -> Result<RealMatrix> {
    if a.shape() != w.shape() {
        return Err(Error::shape(w.shape(), a.shape()));
    }
    let n = a.side();
    let plane = n * n;
    let mut acc = vec![Complex64::new(0.0, 0.0); plane];
    for k in 0..a.channels() {
        for ((r, x), f) in acc.iter_mut().zip(a.channel(k)).zip(w.channel(k)) {
            *r += f.conj() * x;
        }
    }
    let spectrum = ComplexTensor3 {
        shape: Shape3 { side: n, channels: 1 },
        data: acc,
        hermitian: true,
    };
    let r = idft2(&spectrum)?;
    Ok(RealMatrix {
        side: n,
        data: r.data,
    })
}

/// Circular cross-correlation summed over channels:
/// `R[t] = sum_k sum_m w_k[m] * a_k[m + t]` with indices taken modulo `N`.
pub fn circ_correlate(a: &RealTensor3, w: &RealTensor3) -> Result<RealMatrix> {
    if a.shape() != w.shape() {
        return Err(Error::shape(w.shape(), a.shape()));
    }
    correlate_spectra(&dft2(a)?, &dft2(w)?)
}
