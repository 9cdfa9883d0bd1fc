//! Images, binary masks and scribble annotations.

use std::io::Cursor;
use std::path::Path;

use crate::energy::Labeling;
use crate::error::{Error, Result};

/// Row-major image with interleaved channels, values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl ImageGrid {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidInput(format!("{channels} channels; expected 1 or 3")));
        }
        if data.len() != width * height * channels {
            return Err(Error::DimensionMismatch {
                expected: width * height * channels,
                actual: data.len(),
            });
        }
        if data.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidInput("pixel value outside [0, 1]".into()));
        }
        Ok(ImageGrid {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn gray(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(width, height, 1, data)
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

    pub fn num_pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize, channel: usize) -> f64 {
        self.data[(row * self.width + col) * self.channels + channel]
    }

    /// Channel value with coordinates clamped to the image.
    pub fn get_clamped(&self, row: isize, col: isize, channel: usize) -> f64 {
        let r = row.clamp(0, self.height as isize - 1) as usize;
        let c = col.clamp(0, self.width as isize - 1) as usize;
        self.get(r, c, channel)
    }

    /// Mean over channels.
    pub fn intensity(&self, row: usize, col: usize) -> f64 {
        let start = (row * self.width + col) * self.channels;
        self.data[start..start + self.channels].iter().sum::<f64>() / self.channels as f64
    }

    /// Member lists of all overlapping 2×2 patches, ordered top-left,
    /// top-right, bottom-left, bottom-right.
    pub fn patches(&self) -> impl Iterator<Item = [usize; 4]> + '_ {
        let w = self.width;
        (0..self.height.saturating_sub(1)).flat_map(move |r| {
            (0..w.saturating_sub(1)).map(move |c| {
                let p = r * w + c;
                [p, p + 1, p + w, p + w + 1]
            })
        })
    }

    pub fn from_encoded(bytes: &[u8]) -> Result<Self> {
        let img = image::load_from_memory(bytes).map_err(|e| Error::Image(e.to_string()))?;
        Ok(Self::from_dynamic(img))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let img = image::open(path).map_err(|e| Error::Image(format!("{}: {e}", path.display())))?;
        Ok(Self::from_dynamic(img))
    }

    fn from_dynamic(img: image::DynamicImage) -> Self {
        let (width, height) = (img.width() as usize, img.height() as usize);
        if img.color().has_color() {
            let rgb = img.to_rgb8();
            let data = rgb.as_raw().iter().map(|&v| v as f64 / 255.0).collect();
            ImageGrid {
                width,
                height,
                channels: 3,
                data,
            }
        } else {
            let luma = img.to_luma8();
            let data = luma.as_raw().iter().map(|&v| v as f64 / 255.0).collect();
            ImageGrid {
                width,
                height,
                channels: 1,
                data,
            }
        }
    }

    fn to_bytes(&self) -> Vec<u8> {
        self.data.iter().map(|v| (v * 255.0).round() as u8).collect()
    }

    /// 8-bit PNG encoding.
    pub fn encode_png(&self) -> Result<Vec<u8>> {
        let color = if self.channels == 3 {
            image::ExtendedColorType::Rgb8
        } else {
            image::ExtendedColorType::L8
        };
        let mut out = Vec::new();
        image::write_buffer_with_format(
            &mut Cursor::new(&mut out),
            &self.to_bytes(),
            self.width as u32,
            self.height as u32,
            color,
            image::ImageFormat::Png,
        )
        .map_err(|e| Error::Image(e.to_string()))?;
        Ok(out)
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let bytes = self.encode_png()?;
        std::fs::write(path.as_ref(), bytes).map_err(|e| Error::io(path.as_ref(), e))
    }
}

/// Binary mask as an 8-bit grayscale PNG, 255 for label 1.
pub fn encode_mask_png(mask: &Labeling, width: usize, height: usize) -> Result<Vec<u8>> {
    if mask.len() != width * height {
        return Err(Error::DimensionMismatch {
            expected: width * height,
            actual: mask.len(),
        });
    }
    let data = mask.bits().iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    ImageGrid::gray(width, height, data)?.encode_png()
}

pub fn save_mask(path: impl AsRef<Path>, mask: &Labeling, width: usize, height: usize) -> Result<()> {
    let bytes = encode_mask_png(mask, width, height)?;
    std::fs::write(path.as_ref(), bytes).map_err(|e| Error::io(path.as_ref(), e))
}

/// Loads a mask; a pixel is foreground when its intensity exceeds one half.
pub fn load_mask(path: impl AsRef<Path>) -> Result<(Labeling, usize, usize)> {
    let img = ImageGrid::load(path)?;
    let bits = (0..img.height())
        .flat_map(|r| (0..img.width()).map(move |c| (r, c)))
        .map(|(r, c)| img.intensity(r, c) > 0.5)
        .collect();
    Ok((Labeling::from_bits(bits), img.width(), img.height()))
}

/// Per-pixel annotation: `Some(true)` foreground, `Some(false)` background,
/// `None` unlabeled.
#[derive(Debug, Clone, PartialEq)]
pub struct ScribbleMask {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<Option<bool>>,
}

pub const SCRIBBLE_BG: u8 = 0;
pub const SCRIBBLE_FG: u8 = 1;
pub const SCRIBBLE_NONE: u8 = 255;

impl ScribbleMask {
    pub fn empty(width: usize, height: usize) -> Self {
        ScribbleMask {
            width,
            height,
            labels: vec![None; width * height],
        }
    }

    pub fn count(&self, label: bool) -> usize {
        self.labels.iter().filter(|&&l| l == Some(label)).count()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.iter().all(Option::is_none)
    }

    fn from_indices(width: usize, height: usize, indices: &[u8]) -> Result<Self> {
        let labels = indices
            .iter()
            .map(|&v| match v {
                SCRIBBLE_BG => Ok(Some(false)),
                SCRIBBLE_FG => Ok(Some(true)),
                SCRIBBLE_NONE => Ok(None),
                other => Err(Error::Image(format!("scribble index {other}; expected 0, 1 or 255"))),
            })
            .collect::<Result<_>>()?;
        Ok(ScribbleMask {
            width,
            height,
            labels,
        })
    }

    /// Reads raw palette indices (or raw 8-bit gray values) without applying
    /// the palette.
    pub fn decode_png(bytes: &[u8]) -> Result<Self> {
        let mut decoder = png::Decoder::new(Cursor::new(bytes));
        decoder.set_transformations(png::Transformations::IDENTITY);
        let mut reader = decoder.read_info().map_err(|e| Error::Image(e.to_string()))?;
        let mut buf = vec![0; reader.output_buffer_size().ok_or_else(|| Error::Image("image too large".into()))?];
        let info = reader
            .next_frame(&mut buf)
            .map_err(|e| Error::Image(e.to_string()))?;
        let (w, h) = (info.width as usize, info.height as usize);
        let indices: Vec<u8> = match (info.color_type, info.bit_depth) {
            (png::ColorType::Indexed | png::ColorType::Grayscale, png::BitDepth::Eight) => {
                let stride = info.line_size;
                (0..h).flat_map(|r| buf[r * stride..r * stride + w].to_vec()).collect()
            }
            (ct, bd) => {
                return Err(Error::Image(format!(
                    "scribbles must be 8-bit paletted or grayscale PNG, got {ct:?} {bd:?}"
                )))
            }
        };
        Self::from_indices(w, h, &indices)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let bytes = std::fs::read(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
        Self::decode_png(&bytes).map_err(|e| Error::Image(format!("{}: {e}", path.as_ref().display())))
    }

    /// Paletted PNG: index 0 black, 1 white, 255 mid gray.
    pub fn encode_png(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, self.width as u32, self.height as u32);
            enc.set_color(png::ColorType::Indexed);
            enc.set_depth(png::BitDepth::Eight);
            let mut palette = vec![0u8; 256 * 3];
            palette[3..6].copy_from_slice(&[255, 255, 255]);
            palette[255 * 3..].copy_from_slice(&[128, 128, 128]);
            enc.set_palette(palette);
            let mut writer = enc.write_header().map_err(|e| Error::Image(e.to_string()))?;
            let data: Vec<u8> = self
                .labels
                .iter()
                .map(|l| match l {
                    Some(false) => SCRIBBLE_BG,
                    Some(true) => SCRIBBLE_FG,
                    None => SCRIBBLE_NONE,
                })
                .collect();
            writer
                .write_image_data(&data)
                .map_err(|e| Error::Image(e.to_string()))?;
        }
        Ok(out)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let bytes = self.encode_png()?;
        std::fs::write(path.as_ref(), bytes).map_err(|e| Error::io(path.as_ref(), e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_round_trip() {
        let img = ImageGrid::new(2, 1, 3, vec![0.0, 1.0, 0.2, 0.4, 0.6, 0.8]).unwrap();
        let back = ImageGrid::from_encoded(&img.encode_png().unwrap()).unwrap();
        assert_eq!(back.channels(), 3);
        for (a, b) in img.data().iter().zip(back.data()) {
            assert!((a - b).abs() <= 0.5 / 255.0);
        }
    }

    #[test]
    fn scribble_round_trip() {
        let s = ScribbleMask {
            width: 3,
            height: 2,
            labels: vec![Some(true), None, Some(false), None, None, Some(true)],
        };
        let back = ScribbleMask::decode_png(&s.encode_png().unwrap()).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.count(true), 2);
    }

    #[test]
    fn patches_cover_grid() {
        let img = ImageGrid::gray(3, 3, vec![0.0; 9]).unwrap();
        let p: Vec<_> = img.patches().collect();
        assert_eq!(p, vec![[0, 1, 3, 4], [1, 2, 4, 5], [3, 4, 6, 7], [4, 5, 7, 8]]);
    }

    #[test]
    fn rejects_bad_images() {
        assert!(ImageGrid::gray(2, 2, vec![0.0; 3]).is_err());
        assert!(ImageGrid::gray(1, 1, vec![1.5]).is_err());
        assert!(ImageGrid::new(1, 1, 2, vec![0.0; 2]).is_err());
        assert!(ImageGrid::from_encoded(b"not an image").is_err());
    }
}
