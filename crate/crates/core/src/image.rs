//! Minimal raster types: RGB screenshots and grayscale float planes.

use alloc::vec;
use alloc::vec::Vec;

use crate::tree::Rect;

/// 8-bit interleaved RGB image.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl RgbImage {
    /// Panics if `pixels.len() != width * height * 3`.
    pub fn from_raw(width: u32, height: u32, pixels: Vec<u8>) -> Self {
        assert_eq!(pixels.len(), width as usize * height as usize * 3, "RGB buffer size");
        RgbImage {
            width,
            height,
            pixels,
        }
    }

    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Self {
        let mut pixels = Vec::with_capacity(width as usize * height as usize * 3);
        for _ in 0..width as usize * height as usize {
            pixels.extend_from_slice(&rgb);
        }
        RgbImage {
            width,
            height,
            pixels,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn raw(&self) -> &[u8] {
        &self.pixels
    }

    pub fn put(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn get(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    /// Full-image grayscale conversion, values in `[0, 1]`.
    pub fn to_gray(&self) -> GrayImage {
        self.crop_gray(&Rect::new(0, 0, self.width as i32, self.height as i32))
            .expect("full image is non-empty")
    }

    /// Grayscale (BT.601 luma) of the region, clipped to the image.
    /// Returns `None` when the clipped region is empty.
    pub fn crop_gray(&self, region: &Rect) -> Option<GrayImage> {
        let r = region.clip_to(self.width, self.height);
        if r.is_degenerate() {
            return None;
        }
        let w = r.width() as usize;
        let h = r.height() as usize;
        let mut data = Vec::with_capacity(w * h);
        for y in r.top as u32..r.bottom as u32 {
            for x in r.left as u32..r.right as u32 {
                data.push(luma(self.get(x, y)));
            }
        }
        Some(GrayImage {
            width: w,
            height: h,
            data,
        })
    }
}

/// ITU-R BT.601 luma scaled to `[0, 1]`.
#[inline]
pub fn luma([r, g, b]: [u8; 3]) -> f64 {
    (0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64) / 255.0
}

/// Single-channel float image, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), width * height);
        GrayImage {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Bilinear resize with half-pixel centres and edge clamping.
    pub fn resize_bilinear(&self, out_w: usize, out_h: usize) -> GrayImage {
        let mut out = vec![0.0; out_w * out_h];
        let sx = self.width as f64 / out_w as f64;
        let sy = self.height as f64 / out_h as f64;
        let xs: Vec<(usize, usize, f64)> = (0..out_w)
            .map(|ox| sample_coord(ox, sx, self.width))
            .collect();
        for oy in 0..out_h {
            let (y0, y1, fy) = sample_coord(oy, sy, self.height);
            for (ox, &(x0, x1, fx)) in xs.iter().enumerate() {
                let top = self.at(x0, y0) * (1.0 - fx) + self.at(x1, y0) * fx;
                let bot = self.at(x0, y1) * (1.0 - fx) + self.at(x1, y1) * fx;
                out[oy * out_w + ox] = top * (1.0 - fy) + bot * fy;
            }
        }
        GrayImage {
            width: out_w,
            height: out_h,
            data: out,
        }
    }

    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }
}

fn sample_coord(o: usize, scale: f64, size: usize) -> (usize, usize, f64) {
    let src = ((o as f64 + 0.5) * scale - 0.5).max(0.0);
    let i0 = (crate::math::floor(src) as usize).min(size - 1);
    let i1 = (i0 + 1).min(size - 1);
    let frac = if i1 == i0 { 0.0 } else { src - i0 as f64 };
    (i0, i1, frac)
}
