use crate::error::{Error, Result};
use crate::tensor::{Element, Shape, Tensor};

/// Multi-band integer image at native sensor bit depth, band-sequential.
#[derive(Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    bands: usize,
    bit_depth: u16,
    pixels: Vec<u16>,
}

impl std::fmt::Debug for RasterImage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RasterImage")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("bands", &self.bands)
            .field("bit_depth", &self.bit_depth)
            .finish_non_exhaustive()
    }
}

pub const MIN_BIT_DEPTH: u16 = 8;
pub const MAX_BIT_DEPTH: u16 = 16;

impl RasterImage {
    pub fn new(width: usize, height: usize, bands: usize, bit_depth: u16, pixels: Vec<u16>) -> Result<Self> {
        if bands != 1 && bands != 4 {
            return Err(Error::Validation(format!("band count must be 1 or 4, got {bands}")));
        }
        if !(MIN_BIT_DEPTH..=MAX_BIT_DEPTH).contains(&bit_depth) {
            return Err(Error::Validation(format!(
                "bit depth {bit_depth} outside {MIN_BIT_DEPTH}..={MAX_BIT_DEPTH}"
            )));
        }
        if pixels.len() != width * height * bands {
            return Err(Error::Validation(format!(
                "{} samples for a {width}x{height}x{bands} image",
                pixels.len()
            )));
        }
        let max = max_value(bit_depth);
        if let Some(pos) = pixels.iter().position(|&v| u32::from(v) > max) {
            return Err(Error::Validation(format!(
                "sample {} at index {pos} exceeds the {bit_depth}-bit range",
                pixels[pos]
            )));
        }
        Ok(RasterImage {
            width,
            height,
            bands,
            bit_depth,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, bands: usize, bit_depth: u16, value: u16) -> Result<Self> {
        Self::new(width, height, bands, bit_depth, vec![value; width * height * bands])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn bit_depth(&self) -> u16 {
        self.bit_depth
    }

    pub fn max_value(&self) -> u32 {
        max_value(self.bit_depth)
    }

    pub fn pixels(&self) -> &[u16] {
        &self.pixels
    }

    pub fn band(&self, b: usize) -> &[u16] {
        let plane = self.width * self.height;
        &self.pixels[b * plane..][..plane]
    }

    pub fn get(&self, band: usize, y: usize, x: usize) -> u16 {
        self.pixels[(band * self.height + y) * self.width + x]
    }

    /// Sub-window copy.
    pub fn crop(&self, x0: usize, y0: usize, width: usize, height: usize) -> Result<Self> {
        if x0 + width > self.width || y0 + height > self.height {
            return Err(Error::contract(format!(
                "crop {width}x{height}@({x0},{y0}) exceeds {}x{} image",
                self.width, self.height
            )));
        }
        let mut pixels = Vec::with_capacity(width * height * self.bands);
        for b in 0..self.bands {
            for y in y0..y0 + height {
                let row = (b * self.height + y) * self.width;
                pixels.extend_from_slice(&self.pixels[row + x0..row + x0 + width]);
            }
        }
        Self::new(width, height, self.bands, self.bit_depth, pixels)
    }

    /// (1, bands, height, width) float tensor with raw digital numbers.
    pub fn to_tensor<T: Element>(&self) -> Tensor<T> {
        let data = self.pixels.iter().map(|&v| T::lit(f64::from(v))).collect();
        Tensor::from_vec(Shape::new(1, self.bands, self.height, self.width), data).expect("shape matches")
    }

    /// Quantise a (1, C, H, W) tensor: round half away from zero, then clamp to the bit depth.
    pub fn from_tensor<T: Element>(t: &Tensor<T>, bit_depth: u16) -> Result<Self> {
        let s = t.shape();
        if s.n() != 1 {
            return Err(Error::dim("from_tensor", "batch", 1, s.n()));
        }
        Self::from_values(s.w(), s.h(), s.c(), bit_depth, t.data().iter().map(|v| v.as_f64()))
    }

    pub(crate) fn from_values(
        width: usize,
        height: usize,
        bands: usize,
        bit_depth: u16,
        values: impl Iterator<Item = f64>,
    ) -> Result<Self> {
        let max = f64::from(max_value(bit_depth));
        let pixels = values.map(|v| quantize(v, max)).collect();
        Self::new(width, height, bands, bit_depth, pixels)
    }
}

pub fn max_value(bit_depth: u16) -> u32 {
    (1u32 << bit_depth) - 1
}

/// Round half away from zero, clamp to `[0, max]`. NaN maps to 0.
pub fn quantize(v: f64, max: f64) -> u16 {
    if v.is_nan() {
        return 0;
    }
    v.round().clamp(0.0, max) as u16
}
