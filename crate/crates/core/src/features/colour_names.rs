//! Colour-name probabilities from a quantised RGB lookup table.
//!
//! The table has 32768 records (RGB quantised to 32 levels per channel) of 11
//! `f32` probabilities. Record index is `r/8 + 32*(g/8) + 1024*(b/8)` and the
//! columns follow [`NAMES`]. The shipped table is a soft assignment of every
//! quantisation cell centre to the 11 prototype colours in CIELAB space; see
//! [`synthesize`].

use std::sync::OnceLock;

use crate::error::{Error, Result};

pub const NAMES: [&str; 11] = [
    "black", "blue", "brown", "grey", "green", "orange", "pink", "purple", "red", "white", "yellow",
];
pub const RECORDS: usize = 32 * 32 * 32;
pub const NUM_NAMES: usize = 11;

pub const BLACK: usize = 0;
pub const GREY: usize = 3;
pub const RED: usize = 8;
pub const WHITE: usize = 9;

const PROTOTYPES: [[f64; 3]; 11] = [
    [0.0, 0.0, 0.0],
    [0.0, 0.0, 255.0],
    [139.0, 69.0, 19.0],
    [128.0, 128.0, 128.0],
    [0.0, 160.0, 0.0],
    [255.0, 140.0, 0.0],
    [255.0, 170.0, 200.0],
    [128.0, 0.0, 160.0],
    [255.0, 0.0, 0.0],
    [255.0, 255.0, 255.0],
    [255.0, 255.0, 0.0],
];

/// Softness of the assignment, in CIELAB units.
const BANDWIDTH: f64 = 18.0;

static SHIPPED: &[u8] = include_bytes!("../../data/colour_names.bin");

#[derive(Debug, Clone, PartialEq)]
pub struct ColourNameTable {
    probs: Vec<f32>,
}

impl ColourNameTable {
    /// Parses a table file (32768 x 11 little-endian `f32`).
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() != RECORDS * NUM_NAMES * 4 {
            return Err(Error::Format(format!(
                "colour-name table must be {} bytes, got {}",
                RECORDS * NUM_NAMES * 4,
                bytes.len()
            )));
        }
        let probs = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        Ok(ColourNameTable { probs })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.probs.iter().flat_map(|v| v.to_le_bytes()).collect()
    }

    /// The table compiled into the crate.
    pub fn shipped() -> &'static ColourNameTable {
        static TABLE: OnceLock<ColourNameTable> = OnceLock::new();
        TABLE.get_or_init(|| ColourNameTable::from_bytes(SHIPPED).expect("shipped table is well formed"))
    }

    pub fn record_index(r: u8, g: u8, b: u8) -> usize {
        (r as usize >> 3) + 32 * (g as usize >> 3) + 1024 * (b as usize >> 3)
    }

    pub fn lookup(&self, r: u8, g: u8, b: u8) -> &[f32] {
        let idx = Self::record_index(r, g, b);
        &self.probs[idx * NUM_NAMES..(idx + 1) * NUM_NAMES]
    }
}

/// Grayscale inputs carry no hue, so they are mapped onto the achromatic names
/// only: black fades out over `[0, 127.5]`, white fades in over `[127.5, 255]`
/// and grey takes the remainder.
pub fn achromatic(v: f64) -> [f64; NUM_NAMES] {
    let t = (v / 255.0).clamp(0.0, 1.0);
    let black = (1.0 - 2.0 * t).max(0.0);
    let white = (2.0 * t - 1.0).max(0.0);
    let mut out = [0.0; NUM_NAMES];
    out[BLACK] = black;
    out[WHITE] = white;
    out[GREY] = 1.0 - black - white;
    out
}

fn srgb_to_lab(rgb: [f64; 3]) -> [f64; 3] {
    let lin = |c: f64| {
        let c = c / 255.0;
        if c <= 0.04045 {
            c / 12.92
        } else {
            ((c + 0.055) / 1.055).powf(2.4)
        }
    };
    let (r, g, b) = (lin(rgb[0]), lin(rgb[1]), lin(rgb[2]));
    let x = (0.4124 * r + 0.3576 * g + 0.1805 * b) / 0.95047;
    let y = 0.2126 * r + 0.7152 * g + 0.0722 * b;
    let z = (0.0193 * r + 0.1192 * g + 0.9505 * b) / 1.08883;
    let f = |t: f64| {
        if t > 0.008856 {
            t.cbrt()
        } else {
            7.787 * t + 16.0 / 116.0
        }
    };
    let (fx, fy, fz) = (f(x), f(y), f(z));
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

/// Builds the table: for each quantisation cell centre, a Gaussian kernel over
/// CIELAB distance to every prototype, normalised to sum to one.
pub fn synthesize() -> ColourNameTable {
    let protos: Vec<[f64; 3]> = PROTOTYPES.iter().map(|p| srgb_to_lab(*p)).collect();
    let mut probs = Vec::with_capacity(RECORDS * NUM_NAMES);
    for idx in 0..RECORDS {
        let centre = |q: usize| (q * 8 + 4) as f64;
        let lab = srgb_to_lab([centre(idx % 32), centre((idx / 32) % 32), centre(idx / 1024)]);
        let d2: Vec<f64> = protos
            .iter()
            .map(|p| (0..3).map(|c| (lab[c] - p[c]).powi(2)).sum())
            .collect();
        let min = d2.iter().cloned().fold(f64::INFINITY, f64::min);
        let w: Vec<f64> = d2
            .iter()
            .map(|d| (-(d - min) / (2.0 * BANDWIDTH * BANDWIDTH)).exp())
            .collect();
        let total: f64 = w.iter().sum();
        probs.extend(w.iter().map(|v| (v / total) as f32));
    }
    ColourNameTable { probs }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_table_matches_generator() {
        assert_eq!(ColourNameTable::shipped(), &synthesize());
    }

    #[test]
    fn records_sum_to_one() {
        let t = ColourNameTable::shipped();
        for idx in (0..RECORDS).step_by(97) {
            let s: f64 = t.probs[idx * NUM_NAMES..(idx + 1) * NUM_NAMES].iter().map(|&v| v as f64).sum();
            assert!((s - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn primaries_map_to_their_names() {
        let t = ColourNameTable::shipped();
        let argmax = |p: &[f32]| {
            p.iter()
                .enumerate()
                .fold((0, f32::MIN), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc })
                .0
        };
        assert_eq!(NAMES[argmax(t.lookup(255, 0, 0))], "red");
        assert_eq!(NAMES[argmax(t.lookup(0, 0, 255))], "blue");
        assert_eq!(NAMES[argmax(t.lookup(255, 255, 255))], "white");
        assert_eq!(NAMES[argmax(t.lookup(0, 0, 0))], "black");
        assert_eq!(NAMES[argmax(t.lookup(255, 255, 0))], "yellow");
    }

    #[test]
    fn achromatic_fallback_sums_to_one() {
        for v in [0.0, 30.0, 127.5, 200.0, 255.0] {
            let p = achromatic(v);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert_eq!(achromatic(0.0)[BLACK], 1.0);
        assert_eq!(achromatic(255.0)[WHITE], 1.0);
    }

    #[test]
    fn rejects_wrong_length() {
        assert!(ColourNameTable::from_bytes(&[0u8; 12]).is_err());
    }

    #[test]
    #[ignore = "regenerates crates/core/data/colour_names.bin"]
    fn regenerate_table() {
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/colour_names.bin");
        std::fs::write(path, synthesize().to_bytes()).unwrap();
    }
}
