//! Dense planar image grids.
//!
//! [`ChannelImage`] stores `channels` planes of `height × width` samples back to
//! back (channel-planar, each plane row-major). [`ScalarField`] is a single
//! plane used as a working buffer by the solver.

use crate::error::{Error, Result};

/// Single-channel real-valued field, row-major (`data[row * width + col]`).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Dimension(format!(
                "field data has {} samples, expected {}×{}",
                data.len(),
                width,
                height
            )));
        }
        if let Some(bad) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Parameter(format!(
                "non-finite sample at index {bad}"
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for row in 0..height {
            for col in 0..width {
                data.push(f(row, col));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.width + col] = value;
    }

    pub fn same_shape(&self, other: &ScalarField) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn dot(&self, other: &ScalarField) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `self += scale * other`.
    pub fn axpy(&mut self, scale: f64, other: &ScalarField) {
        debug_assert!(self.same_shape(other));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += scale * b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.data.iter_mut().for_each(|v| *v *= factor);
    }

    /// Squared Euclidean distance to `other`.
    pub fn dist_sq(&self, other: &ScalarField) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    /// True when every sample equals the first one.
    pub fn is_constant(&self) -> bool {
        match self.data.first() {
            Some(&first) => self.data.iter().all(|&v| v == first),
            None => true,
        }
    }
}

/// H×W×C image of real intensities, nominally in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelImage {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl ChannelImage {
    /// Validates dimensions, channel count and finiteness.
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(width, height, channels)?;
        if data.len() != width * height * channels {
            return Err(Error::Dimension(format!(
                "image data has {} samples, expected {}×{}×{}",
                data.len(),
                width,
                height,
                channels
            )));
        }
        if let Some(bad) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Parameter(format!(
                "non-finite sample at index {bad}"
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn from_planes(planes: Vec<ScalarField>) -> Result<Self> {
        let first = planes
            .first()
            .ok_or_else(|| Error::Dimension("no channel planes given".into()))?;
        let (width, height) = (first.width(), first.height());
        if planes.iter().any(|p| p.width() != width || p.height() != height) {
            return Err(Error::Dimension("channel planes differ in size".into()));
        }
        let channels = planes.len();
        let mut data = Vec::with_capacity(width * height * channels);
        for p in planes {
            data.extend_from_slice(p.data());
        }
        Self::new(width, height, channels, data)
    }

    /// Decodes 8-bit samples given in interleaved order (`RGBRGB...` for
    /// colour), normalizing each byte to `byte / 255`.
    pub fn from_bytes(raw: &[u8], width: usize, height: usize, channels: usize) -> Result<Self> {
        check_dims(width, height, channels)?;
        let plane = width * height;
        if raw.len() != plane * channels {
            return Err(Error::Dimension(format!(
                "byte buffer has {} samples, expected {}×{}×{}",
                raw.len(),
                width,
                height,
                channels
            )));
        }
        let mut data = vec![0.0; raw.len()];
        for (idx, &b) in raw.iter().enumerate() {
            let (px, c) = (idx / channels, idx % channels);
            data[c * plane + px] = f64::from(b) / 255.0;
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// Interleaved 8-bit encoding, `round(clamp(v, 0, 1) * 255)`.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.to_bytes_mapped(|v| v)
    }

    pub(crate) fn to_bytes_mapped(&self, map: impl Fn(f64) -> f64) -> Vec<u8> {
        let plane = self.width * self.height;
        let mut out = vec![0u8; self.data.len()];
        for c in 0..self.channels {
            for px in 0..plane {
                out[px * self.channels + c] = quantize(map(self.data[c * plane + px]));
            }
        }
        out
    }

    pub fn constant(width: usize, height: usize, channels: usize, value: f64) -> Result<Self> {
        Self::new(
            width,
            height,
            channels,
            vec![value; width * height * channels],
        )
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn channel_slice(&self, c: usize) -> &[f64] {
        let plane = self.pixel_count();
        &self.data[c * plane..(c + 1) * plane]
    }

    pub fn channel(&self, c: usize) -> ScalarField {
        ScalarField {
            width: self.width,
            height: self.height,
            data: self.channel_slice(c).to_vec(),
        }
    }

    pub fn planes(&self) -> Vec<ScalarField> {
        (0..self.channels).map(|c| self.channel(c)).collect()
    }

    pub fn same_shape(&self, other: &ChannelImage) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    /// Pixelwise `self - other`.
    pub fn sub(&self, other: &ChannelImage) -> Result<ChannelImage> {
        if !self.same_shape(other) {
            return Err(Error::Dimension("image shapes differ".into()));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(ChannelImage {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data,
        })
    }

    /// Pixelwise `self + other`.
    pub fn add(&self, other: &ChannelImage) -> Result<ChannelImage> {
        if !self.same_shape(other) {
            return Err(Error::Dimension("image shapes differ".into()));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(ChannelImage {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data,
        })
    }
}

fn check_dims(width: usize, height: usize, channels: usize) -> Result<()> {
    if width < 2 || height < 2 {
        return Err(Error::Dimension(format!(
            "image must be at least 2×2, got {width}×{height}"
        )));
    }
    if channels != 1 && channels != 3 {
        return Err(Error::Dimension(format!(
            "expected 1 or 3 channels, got {channels}"
        )));
    }
    Ok(())
}

#[inline]
fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn byte_normalization() {
        let img = ChannelImage::from_bytes(&[0, 255, 128, 7], 2, 2, 1).unwrap();
        assert_eq!(img.data()[0], 0.0);
        assert_eq!(img.data()[1], 1.0);
        assert!((img.data()[2] - 0.50196).abs() < 1e-5);
    }

    #[test]
    fn quantize_clamps() {
        let img = ChannelImage::new(2, 2, 1, vec![0.50196, -0.2, 1.7, 0.0]).unwrap();
        assert_eq!(img.to_bytes(), vec![128, 0, 255, 0]);
    }

    #[test]
    fn length_mismatch_is_dimension_error() {
        let err = ChannelImage::from_bytes(&[0; 5], 2, 2, 1).unwrap_err();
        assert!(matches!(err, Error::Dimension(_)));
    }

    #[test]
    fn rejects_degenerate_shapes() {
        assert!(ChannelImage::new(1, 4, 1, vec![0.0; 4]).is_err());
        assert!(ChannelImage::new(2, 2, 2, vec![0.0; 8]).is_err());
        assert!(ChannelImage::new(2, 2, 1, vec![0.0, f64::NAN, 0.0, 0.0]).is_err());
    }

    #[test]
    fn interleaved_to_planar() {
        let raw = [10u8, 20, 30, 40, 50, 60, 70, 80, 90, 100, 110, 120];
        let img = ChannelImage::from_bytes(&raw, 2, 2, 3).unwrap();
        assert_eq!(img.channel_slice(1)[0], 20.0 / 255.0);
        assert_eq!(img.channel_slice(2)[3], 120.0 / 255.0);
        assert_eq!(img.to_bytes(), raw.to_vec());
    }

    proptest! {
        #[test]
        fn byte_roundtrip(raw in proptest::collection::vec(any::<u8>(), 3 * 4 * 3)) {
            let img = ChannelImage::from_bytes(&raw, 3, 4, 3).unwrap();
            prop_assert!(img.data().iter().all(|v| (0.0..=1.0).contains(v)));
            prop_assert_eq!(img.to_bytes(), raw);
        }
    }
}
