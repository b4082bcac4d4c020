//! 8-bit frames, binary PGM/PPM codecs and sub-pixel window cropping.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Interleaved 8-bit image with 1 (gray) or 3 (RGB) channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<u8>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::Input(format!("unsupported channel count {channels}")));
        }
        if width == 0 || height == 0 {
            return Err(Error::Input("empty image".into()));
        }
        if data.len() != width * height * channels {
            return Err(Error::shape(
                format!("{} bytes", width * height * channels),
                format!("{} bytes", data.len()),
            ));
        }
        Ok(Image {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: u8) -> Self {
        Image {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize, c: usize) -> u8 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set_pixel(&mut self, x: usize, y: usize, c: usize, v: u8) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    /// Extracts a square window of `side` source pixels centred at `(cx, cy)`
    /// (continuous coordinates, pixel `i` covering `[i, i + 1)`) and resamples it
    /// bilinearly to `out_side x out_side`. Out-of-frame samples replicate the edge.
    pub fn crop_resample(&self, cx: f64, cy: f64, side: f64, out_side: usize) -> ImagePatch {
        let step = side / out_side as f64;
        let x0 = cx - side / 2.0;
        let y0 = cy - side / 2.0;
        let mut samples = Vec::with_capacity(out_side * out_side * self.channels);
        for r in 0..out_side {
            let v = y0 + (r as f64 + 0.5) * step - 0.5;
            for c in 0..out_side {
                let u = x0 + (c as f64 + 0.5) * step - 0.5;
                for ch in 0..self.channels {
                    samples.push(self.bilinear(u, v, ch));
                }
            }
        }
        ImagePatch {
            width: out_side,
            height: out_side,
            channels: self.channels,
            samples,
        }
    }

    fn bilinear(&self, u: f64, v: f64, ch: usize) -> f64 {
        let clamp = |p: f64, len: usize| p.clamp(0.0, (len - 1) as f64);
        let u = clamp(u, self.width);
        let v = clamp(v, self.height);
        let xa = u.floor() as usize;
        let ya = v.floor() as usize;
        let xb = (xa + 1).min(self.width - 1);
        let yb = (ya + 1).min(self.height - 1);
        let fx = u - xa as f64;
        let fy = v - ya as f64;
        let p = |x, y| self.pixel(x, y, ch) as f64;
        let top = p(xa, ya) * (1.0 - fx) + p(xb, ya) * fx;
        let bottom = p(xa, yb) * (1.0 - fx) + p(xb, yb) * fx;
        top * (1.0 - fy) + bottom * fy
    }

    /// Whole image as a patch, without resampling.
    pub fn to_patch(&self) -> ImagePatch {
        ImagePatch {
            width: self.width,
            height: self.height,
            channels: self.channels,
            samples: self.data.iter().map(|&v| v as f64).collect(),
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        if bytes.starts_with(b"P5") || bytes.starts_with(b"P6") {
            return decode_pnm(&bytes).map_err(|message| Error::Decode {
                path: path.to_path_buf(),
                message,
            });
        }
        decode_other(&bytes).map_err(|message| Error::Decode {
            path: path.to_path_buf(),
            message,
        })
    }

    /// Writes binary PGM (gray) or PPM (RGB).
    pub fn write_pnm(&self, path: &Path) -> Result<()> {
        let magic = if self.channels == 1 { "P5" } else { "P6" };
        let mut out = Vec::with_capacity(self.data.len() + 32);
        write!(out, "{magic}\n{} {}\n255\n", self.width, self.height).expect("write to vec");
        out.extend_from_slice(&self.data);
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

fn decode_pnm(bytes: &[u8]) -> std::result::Result<Image, String> {
    let channels = if bytes.starts_with(b"P5") { 1 } else { 3 };
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                break;
            }
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| "malformed PNM header".to_string())?;
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(format!("only 8-bit PNM is supported (maxval {maxval})"));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let len = width * height * channels;
    if bytes.len() < pos + len {
        return Err("truncated PNM raster".into());
    }
    Image::new(width, height, channels, bytes[pos..pos + len].to_vec()).map_err(|e| e.to_string())
}

fn decode_other(bytes: &[u8]) -> std::result::Result<Image, String> {
    let img = ::image::load_from_memory(bytes).map_err(|e| e.to_string())?;
    match img.color().channel_count() {
        1 | 2 => {
            let g = img.to_luma8();
            let (w, h) = g.dimensions();
            Image::new(w as usize, h as usize, 1, g.into_raw()).map_err(|e| e.to_string())
        }
        _ => {
            let rgb = img.to_rgb8();
            let (w, h) = rgb.dimensions();
            Image::new(w as usize, h as usize, 3, rgb.into_raw()).map_err(|e| e.to_string())
        }
    }
}

/// Resampled crop, samples in `[0, 255]`, interleaved like [`Image`].
#[derive(Debug, Clone, PartialEq)]
pub struct ImagePatch {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub samples: Vec<f64>,
}

impl ImagePatch {
    #[inline]
    pub fn sample(&self, x: usize, y: usize, c: usize) -> f64 {
        self.samples[(y * self.width + x) * self.channels + c]
    }

    /// Luma in `[0, 1]`.
    pub fn gray(&self, x: usize, y: usize) -> f64 {
        if self.channels == 1 {
            self.sample(x, y, 0) / 255.0
        } else {
            (0.299 * self.sample(x, y, 0) + 0.587 * self.sample(x, y, 1) + 0.114 * self.sample(x, y, 2))
                / 255.0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pnm_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut img = Image::filled(5, 3, 3, 7);
        img.set_pixel(4, 2, 1, 200);
        let p = dir.path().join("a.ppm");
        img.write_pnm(&p).unwrap();
        assert_eq!(Image::read(&p).unwrap(), img);

        let gray = Image::new(2, 2, 1, vec![1, 2, 3, 4]).unwrap();
        let p = dir.path().join("b.pgm");
        gray.write_pnm(&p).unwrap();
        assert_eq!(Image::read(&p).unwrap(), gray);
    }

    #[test]
    fn pnm_header_comments_and_truncation() {
        let ok = b"P5\n# comment\n2 1\n255\n\x05\x06";
        let img = decode_pnm(ok).unwrap();
        assert_eq!(img.data(), &[5, 6]);
        assert!(decode_pnm(b"P5\n2 2\n255\n\x01").is_err());
    }

    #[test]
    fn identity_crop_reproduces_pixels() {
        let data: Vec<u8> = (0..64).map(|v| (v * 3) as u8).collect();
        let img = Image::new(8, 8, 1, data).unwrap();
        let patch = img.crop_resample(4.0, 4.0, 8.0, 8);
        for y in 0..8 {
            for x in 0..8 {
                assert_eq!(patch.sample(x, y, 0), img.pixel(x, y, 0) as f64);
            }
        }
    }

    #[test]
    fn out_of_frame_crop_replicates_edges() {
        let img = Image::new(2, 2, 1, vec![10, 20, 30, 40]).unwrap();
        let patch = img.crop_resample(-10.0, -10.0, 2.0, 2);
        assert!(patch.samples.iter().all(|&v| v == 10.0));
    }
}
