//! MSR raster container.
//!
//! Little-endian: `b"MSR1"`, u32 width, u32 height, u16 bands, u16 bit depth,
//! then width·height·bands u16 samples, band-sequential.

use std::fs;
use std::path::Path;

use super::RasterImage;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"MSR1";
const HEADER_LEN: usize = 16;

pub fn encode(img: &RasterImage) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + img.pixels().len() * 2);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(img.width() as u32).to_le_bytes());
    out.extend_from_slice(&(img.height() as u32).to_le_bytes());
    out.extend_from_slice(&(img.bands() as u16).to_le_bytes());
    out.extend_from_slice(&img.bit_depth().to_le_bytes());
    for v in img.pixels() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<RasterImage> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format(format!("MSR header truncated ({} bytes)", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::Format("bad MSR magic".into()));
    }
    let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
    let u16_at = |i: usize| u16::from_le_bytes(bytes[i..i + 2].try_into().unwrap());
    let (width, height) = (u32_at(4), u32_at(8));
    let (bands, bit_depth) = (usize::from(u16_at(12)), u16_at(14));
    let count = width
        .checked_mul(height)
        .and_then(|v| v.checked_mul(bands))
        .ok_or_else(|| Error::Format("MSR dimensions overflow".into()))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != count * 2 {
        return Err(Error::Format(format!(
            "MSR payload holds {} bytes, header declares {}",
            payload.len(),
            count * 2
        )));
    }
    let pixels = payload.chunks_exact(2).map(|c| u16::from_le_bytes([c[0], c[1]])).collect();
    RasterImage::new(width, height, bands, bit_depth, pixels)
}

pub fn save_raster(img: &RasterImage, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode(img))?;
    Ok(())
}

pub fn load_raster(path: impl AsRef<Path>) -> Result<RasterImage> {
    decode(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_bad_magic_and_truncation() {
        let img = RasterImage::filled(2, 2, 1, 10, 7).unwrap();
        let mut bytes = encode(&img);
        assert!(matches!(decode(&bytes[..bytes.len() - 1]), Err(Error::Format(_))));
        assert!(matches!(decode(&bytes[..10]), Err(Error::Format(_))));
        bytes[0] = b'X';
        assert!(matches!(decode(&bytes), Err(Error::Format(_))));
    }

    #[test]
    fn out_of_range_sample_fails_validation() {
        let img = RasterImage::filled(1, 1, 1, 11, 1024).unwrap();
        let mut bytes = encode(&img);
        // Rewrite the declared bit depth to 10.
        bytes[14..16].copy_from_slice(&10u16.to_le_bytes());
        assert!(matches!(decode(&bytes), Err(Error::Validation(_))));
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_identical(w in 1usize..9, h in 1usize..9, four in any::<bool>(), seed in any::<u64>()) {
            let bands = if four { 4 } else { 1 };
            let pixels: Vec<u16> = (0..w * h * bands)
                .map(|i| ((seed.wrapping_mul(6364136223846793005).wrapping_add(i as u64) >> 33) % 2048) as u16)
                .collect();
            let img = RasterImage::new(w, h, bands, 11, pixels).unwrap();
            prop_assert_eq!(decode(&encode(&img)).unwrap(), img);
        }
    }
}
