//! Box-to-mask rasterization and mask-to-box recovery.
//!
//! Pixel `(i, j)` covers `[i, i+1) x [j, j+1)` and is sampled at its center
//! `(i + 0.5, j + 0.5)`. A pixel belongs to a box when its center lies in the
//! half-open box `[x1, x2) x [y1, y2)`, so an integer-aligned `w x h` box sets
//! exactly `w * h` pixels.

use std::collections::BTreeMap;
use std::io::Cursor;

use image::{GrayImage, ImageFormat, Luma};
use serde::{Deserialize, Serialize};

use crate::bbox::BBox;
use crate::error::MaskError;

/// Default Gaussian spread as a fraction of box extent: `sigma = w/4, h/4`.
pub const DEFAULT_SIGMA_FACTOR: f64 = 0.25;
pub const DEFAULT_THRESHOLD: f64 = 0.5;

const RAW_MAGIC: &[u8; 4] = b"SFMK";
const RAW_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskMode {
    /// 1 inside any box, 0 elsewhere.
    Hard,
    /// Gaussian centered on each box, truncated to the box, composed by max.
    Soft,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Connectivity {
    #[serde(rename = "4")]
    Four,
    #[default]
    #[serde(rename = "8")]
    Eight,
}

/// Dense per-pixel probability grid for one class, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    width: u32,
    height: u32,
    pub class_id: u64,
    data: Vec<f32>,
}

impl Mask {
    pub fn zeros(width: u32, height: u32, class_id: u64) -> Result<Self, MaskError> {
        if width == 0 || height == 0 {
            return Err(MaskError::ZeroSize { width, height });
        }
        Ok(Self {
            width,
            height,
            class_id,
            data: vec![0.0; width as usize * height as usize],
        })
    }

    /// Values are clamped into `[0, 1]`; NaN becomes 0.
    pub fn from_values(width: u32, height: u32, class_id: u64, mut data: Vec<f32>) -> Result<Self, MaskError> {
        if width == 0 || height == 0 {
            return Err(MaskError::ZeroSize { width, height });
        }
        if data.len() != width as usize * height as usize {
            return Err(MaskError::Length {
                width,
                height,
                got: data.len(),
            });
        }
        for v in &mut data {
            *v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
        }
        Ok(Self {
            width,
            height,
            class_id,
            data,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn values(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> f32 {
        self.data[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    fn slot(&mut self, x: u32, y: u32) -> &mut f32 {
        &mut self.data[y as usize * self.width as usize + x as usize]
    }

    /// 8-bit grayscale PNG, values quantized as `round(v * 255)`.
    pub fn to_png(&self) -> Vec<u8> {
        let img = GrayImage::from_fn(self.width, self.height, |x, y| {
            Luma([(self.get(x, y) * 255.0).round() as u8])
        });
        let mut buf = Cursor::new(Vec::new());
        img.write_to(&mut buf, ImageFormat::Png).expect("png encoding to memory");
        buf.into_inner()
    }

    pub fn from_png(bytes: &[u8], class_id: u64) -> Result<Self, MaskError> {
        let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)
            .map_err(|e| MaskError::Format(e.to_string()))?
            .into_luma8();
        let (w, h) = img.dimensions();
        let data = img.pixels().map(|p| p.0[0] as f32 / 255.0).collect();
        Self::from_values(w, h, class_id, data)
    }

    /// Little-endian container: magic `SFMK`, `u32` version, `u32` width,
    /// `u32` height, `u64` class id, then `width * height` `f32` values in
    /// row-major order.
    pub fn to_raw(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(24 + self.data.len() * 4);
        out.extend_from_slice(RAW_MAGIC);
        out.extend_from_slice(&RAW_VERSION.to_le_bytes());
        out.extend_from_slice(&self.width.to_le_bytes());
        out.extend_from_slice(&self.height.to_le_bytes());
        out.extend_from_slice(&self.class_id.to_le_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_raw(bytes: &[u8]) -> Result<Self, MaskError> {
        let bad = |m: &str| MaskError::Format(m.to_string());
        if bytes.len() < 24 || &bytes[..4] != RAW_MAGIC {
            return Err(bad("missing SFMK header"));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let version = u32_at(4);
        if version != RAW_VERSION {
            return Err(MaskError::Format(format!("unsupported version {version}")));
        }
        let (width, height) = (u32_at(8), u32_at(12));
        let class_id = u64::from_le_bytes(bytes[16..24].try_into().unwrap());
        let body = &bytes[24..];
        if body.len() % 4 != 0 {
            return Err(bad("truncated value array"));
        }
        let data = body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::from_values(width, height, class_id, data)
    }
}

/// Half-open range of pixel indices whose centers fall in `[lo, hi)`.
fn pixel_span(lo: f64, hi: f64, limit: u32) -> std::ops::Range<u32> {
    let start = (lo - 0.5).ceil().max(0.0);
    let end = (hi - 0.5).ceil().min(limit as f64);
    if end <= start {
        0..0
    } else {
        start as u32..end as u32
    }
}

/// Rasterizes the boxes of one frame and class.
pub fn rasterize(
    boxes: &[BBox],
    class_id: u64,
    mode: MaskMode,
    width: u32,
    height: u32,
    sigma_factor: f64,
) -> Result<Mask, MaskError> {
    let mut mask = Mask::zeros(width, height, class_id)?;
    for b in boxes {
        let c = b.corners();
        let (sx, sy) = (b.w() * sigma_factor, b.h() * sigma_factor);
        let (kx, ky) = (0.5 / (sx * sx), 0.5 / (sy * sy));
        for y in pixel_span(c.y1, c.y2, height) {
            let dy = y as f64 + 0.5 - b.cy();
            for x in pixel_span(c.x1, c.x2, width) {
                let v = match mode {
                    MaskMode::Hard => 1.0,
                    MaskMode::Soft => {
                        let dx = x as f64 + 0.5 - b.cx();
                        (-(dx * dx * kx + dy * dy * ky)).exp() as f32
                    }
                };
                let slot = mask.slot(x, y);
                *slot = slot.max(v);
            }
        }
    }
    Ok(mask)
}

/// Connected region recovered from a mask.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaskBox {
    pub class_id: u64,
    /// Tight pixel-aligned enclosing box of the region.
    pub bbox: BBox,
    /// Mean of the original mask values over the region.
    pub score: f64,
    pub pixels: usize,
}

/// Binarizes at `threshold` (`value >= threshold`), labels connected regions
/// and returns one enclosing box per region, in raster order of each
/// region's first pixel.
pub fn mask_to_bboxes(mask: &Mask, threshold: f64, connectivity: Connectivity) -> Result<Vec<MaskBox>, MaskError> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(MaskError::Threshold(threshold));
    }
    let (w, h) = (mask.width as usize, mask.height as usize);
    let on: Vec<bool> = mask.data.iter().map(|&v| v as f64 >= threshold).collect();
    let mut seen = vec![false; w * h];
    let mut stack = Vec::new();
    let mut out = Vec::new();
    let neighbours: &[(isize, isize)] = match connectivity {
        Connectivity::Four => &[(-1, 0), (1, 0), (0, -1), (0, 1)],
        Connectivity::Eight => &[(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)],
    };
    for start in 0..w * h {
        if !on[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
        let mut sum = 0.0f64;
        let mut count = 0usize;
        while let Some(i) = stack.pop() {
            let (x, y) = (i % w, i / w);
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
            sum += mask.data[i] as f64;
            count += 1;
            for &(dx, dy) in neighbours {
                let (nx, ny) = (x as isize + dx, y as isize + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if on[j] && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        let bbox = BBox::from_xywh(x0 as f64, y0 as f64, (x1 - x0 + 1) as f64, (y1 - y0 + 1) as f64)
            .expect("region spans at least one pixel");
        out.push(MaskBox {
            class_id: mask.class_id,
            bbox,
            score: sum / count as f64,
            pixels: count,
        });
    }
    Ok(out)
}

/// Rasterizes every `(image, class)` pair of a dataset. Ignored boxes are skipped.
pub fn rasterize_dataset(
    ds: &crate::dataset::Dataset,
    mode: MaskMode,
    sigma_factor: f64,
) -> Result<Vec<(u64, Mask)>, MaskError> {
    let mut groups: BTreeMap<(u64, u64), Vec<BBox>> = BTreeMap::new();
    for a in ds.annotations.iter().filter(|a| !a.ignore) {
        groups.entry((a.image_id, a.class_id)).or_default().push(a.bbox);
    }
    let images = ds.image_index();
    groups
        .into_iter()
        .filter_map(|((image_id, class_id), boxes)| images.get(&image_id).map(|img| (image_id, class_id, boxes, img)))
        .map(|(image_id, class_id, boxes, img)| {
            let (w, h) = (img.width.ceil() as u32, img.height.ceil() as u32);
            rasterize(&boxes, class_id, mode, w, h, sigma_factor).map(|m| (image_id, m))
        })
        .collect()
}
