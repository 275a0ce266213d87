use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use super::RasterImage;
use crate::error::{Error, Result};

/// Percentile pair for the linear display stretch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stretch {
    pub low: f64,
    pub high: f64,
}

impl Default for Stretch {
    fn default() -> Self {
        Stretch { low: 2.0, high: 98.0 }
    }
}

fn percentile(sorted: &[u16], p: f64) -> f64 {
    let idx = ((p / 100.0) * (sorted.len() - 1) as f64).round() as usize;
    f64::from(sorted[idx.min(sorted.len() - 1)])
}

/// Linear map of one band to 8 bits between its low/high percentiles.
/// A flat band maps to mid-gray.
pub fn percentile_stretch(band: &[u16], stretch: Stretch) -> Vec<u8> {
    if band.is_empty() {
        return Vec::new();
    }
    let mut sorted = band.to_vec();
    sorted.sort_unstable();
    let lo = percentile(&sorted, stretch.low);
    let hi = percentile(&sorted, stretch.high);
    if hi <= lo {
        return vec![128; band.len()];
    }
    band.iter()
        .map(|&v| ((f64::from(v) - lo) / (hi - lo) * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect()
}

/// Interleaved 8-bit RGB. MS bands 3, 2, 1 (1-based) become R, G, B; a PAN
/// band is repeated into all three.
pub fn render_rgb(img: &RasterImage, stretch: Stretch) -> Result<Vec<u8>> {
    if stretch.low < 0.0 || stretch.high > 100.0 || stretch.low >= stretch.high {
        return Err(Error::contract(format!(
            "invalid stretch percentiles {}..{}",
            stretch.low, stretch.high
        )));
    }
    let order: [usize; 3] = if img.bands() == 1 { [0, 0, 0] } else { [2, 1, 0] };
    let channels: Vec<Vec<u8>> = order.iter().map(|&b| percentile_stretch(img.band(b), stretch)).collect();
    let plane = img.width() * img.height();
    let mut rgb = Vec::with_capacity(plane * 3);
    for i in 0..plane {
        rgb.extend(channels.iter().map(|c| c[i]));
    }
    Ok(rgb)
}

pub fn export_rgb_png(img: &RasterImage, path: impl AsRef<Path>, stretch: Stretch) -> Result<()> {
    let rgb = render_rgb(img, stretch)?;
    let file = BufWriter::new(File::create(path)?);
    let mut enc = png::Encoder::new(file, img.width() as u32, img.height() as u32);
    enc.set_color(png::ColorType::Rgb);
    enc.set_depth(png::BitDepth::Eight);
    enc.write_header()?.write_image_data(&rgb)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_image_is_uniform_gray() {
        let img = RasterImage::filled(4, 3, 4, 10, 512).unwrap();
        let rgb = render_rgb(&img, Stretch::default()).unwrap();
        assert_eq!(rgb.len(), 36);
        assert!(rgb.iter().all(|&v| v == 128));
    }

    #[test]
    fn stretch_spans_full_range() {
        let band: Vec<u16> = (0..101).collect();
        let out = percentile_stretch(&band, Stretch { low: 0.0, high: 100.0 });
        assert_eq!(out[0], 0);
        assert_eq!(out[100], 255);
    }

    #[test]
    fn png_file_is_written() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.png");
        let img = RasterImage::new(2, 2, 1, 10, vec![0, 10, 20, 30]).unwrap();
        export_rgb_png(&img, &path, Stretch::default()).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[1..4], b"PNG");
    }
}
