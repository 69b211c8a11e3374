//! Small raster helpers shared by the filtering, compositing and pattern
//! modules: grayscale conversion, separable Gaussian blur, Laplacian
//! statistics, Otsu thresholding, bilinear sampling and image hashing.

use image::RgbaImage;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Axis-aligned pixel rectangle, origin top-left.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub x: u32,
    pub y: u32,
    pub width: u32,
    pub height: u32,
}

impl Rect {
    pub fn new(x: u32, y: u32, width: u32, height: u32) -> Self {
        Self { x, y, width, height }
    }

    pub fn area(&self) -> u64 {
        self.width as u64 * self.height as u64
    }

    pub fn right(&self) -> u32 {
        self.x + self.width
    }

    pub fn bottom(&self) -> u32 {
        self.y + self.height
    }

    pub fn contains_point(&self, px: f64, py: f64) -> bool {
        px >= self.x as f64
            && py >= self.y as f64
            && px < self.right() as f64
            && py < self.bottom() as f64
    }

    /// Intersection with another rectangle, `None` if disjoint.
    pub fn intersect(&self, other: &Rect) -> Option<Rect> {
        let x0 = self.x.max(other.x);
        let y0 = self.y.max(other.y);
        let x1 = self.right().min(other.right());
        let y1 = self.bottom().min(other.bottom());
        if x1 > x0 && y1 > y0 {
            Some(Rect::new(x0, y0, x1 - x0, y1 - y0))
        } else {
            None
        }
    }

    /// Grow by `margin` pixels on every side, clamped to `bounds`.
    pub fn dilate_within(&self, margin: u32, bounds: &Rect) -> Rect {
        let x0 = self.x.saturating_sub(margin).max(bounds.x);
        let y0 = self.y.saturating_sub(margin).max(bounds.y);
        let x1 = (self.right() + margin).min(bounds.right());
        let y1 = (self.bottom() + margin).min(bounds.bottom());
        Rect::new(x0, y0, x1.saturating_sub(x0), y1.saturating_sub(y0))
    }
}

/// Single-channel float image. Values are conventionally in [0, 1] for
/// masks and [0, 255] for luma, but nothing enforces a range.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayBuf {
    pub width: u32,
    pub height: u32,
    pub data: Vec<f32>,
}

impl GrayBuf {
    pub fn new(width: u32, height: u32) -> Self {
        Self { width, height, data: vec![0.0; (width * height) as usize] }
    }

    pub fn from_fn(width: u32, height: u32, f: impl Fn(u32, u32) -> f32) -> Self {
        let mut data = Vec::with_capacity((width * height) as usize);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> f32 {
        self.data[(y * self.width + x) as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, v: f32) {
        self.data[(y * self.width + x) as usize] = v;
    }

    /// Edge-clamped read, usable with out-of-range signed coordinates.
    #[inline]
    pub fn get_clamped(&self, x: i64, y: i64) -> f32 {
        let cx = x.clamp(0, self.width as i64 - 1) as u32;
        let cy = y.clamp(0, self.height as i64 - 1) as u32;
        self.get(cx, cy)
    }
}

/// ITU-R BT.601 luma from an RGBA image, range [0, 255].
pub fn luma(image: &RgbaImage) -> GrayBuf {
    GrayBuf::from_fn(image.width(), image.height(), |x, y| {
        let p = image.get_pixel(x, y).0;
        0.299 * p[0] as f32 + 0.587 * p[1] as f32 + 0.114 * p[2] as f32
    })
}

/// Normalized 1-D Gaussian kernel with radius ceil(3 sigma).
pub fn gaussian_kernel(sigma: f32) -> Vec<f32> {
    assert!(sigma >= 0.0, "sigma must be non-negative");
    if sigma == 0.0 {
        return vec![1.0];
    }
    let radius = (3.0 * sigma).ceil() as i64;
    let mut kernel = Vec::with_capacity((2 * radius + 1) as usize);
    let denom = 2.0 * sigma * sigma;
    for i in -radius..=radius {
        kernel.push((-(i * i) as f32 / denom).exp());
    }
    let sum: f32 = kernel.iter().sum();
    for k in &mut kernel {
        *k /= sum;
    }
    kernel
}

/// Separable Gaussian blur with edge clamping.
pub fn gaussian_blur(src: &GrayBuf, sigma: f32) -> GrayBuf {
    if sigma == 0.0 {
        return src.clone();
    }
    let kernel = gaussian_kernel(sigma);
    let radius = (kernel.len() / 2) as i64;
    let mut horizontal = GrayBuf::new(src.width, src.height);
    for y in 0..src.height {
        for x in 0..src.width {
            let mut acc = 0.0;
            for (i, k) in kernel.iter().enumerate() {
                acc += k * src.get_clamped(x as i64 + i as i64 - radius, y as i64);
            }
            horizontal.set(x, y, acc);
        }
    }
    let mut out = GrayBuf::new(src.width, src.height);
    for y in 0..src.height {
        for x in 0..src.width {
            let mut acc = 0.0;
            for (i, k) in kernel.iter().enumerate() {
                acc += k * horizontal.get_clamped(x as i64, y as i64 + i as i64 - radius);
            }
            out.set(x, y, acc);
        }
    }
    out
}

/// Variance of the 3x3 Laplacian response over `region` (clipped to the
/// image). Returns 0 for regions smaller than the kernel support.
pub fn laplacian_variance(gray: &GrayBuf, region: &Rect) -> f64 {
    let full = Rect::new(0, 0, gray.width, gray.height);
    let r = match region.intersect(&full) {
        Some(r) => r,
        None => return 0.0,
    };
    let mut responses = Vec::with_capacity(r.area() as usize);
    for y in r.y..r.bottom() {
        for x in r.x..r.right() {
            let (xi, yi) = (x as i64, y as i64);
            let lap = gray.get_clamped(xi - 1, yi)
                + gray.get_clamped(xi + 1, yi)
                + gray.get_clamped(xi, yi - 1)
                + gray.get_clamped(xi, yi + 1)
                - 4.0 * gray.get(x, y);
            responses.push(lap as f64);
        }
    }
    if responses.is_empty() {
        return 0.0;
    }
    let n = responses.len() as f64;
    let mean = responses.iter().sum::<f64>() / n;
    responses.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

/// Otsu's threshold over luma values in [0, 255]. Returns the threshold
/// `t` such that pixels with value <= t form the dark class.
pub fn otsu_threshold(gray: &GrayBuf) -> u8 {
    let mut hist = [0u64; 256];
    for &v in &gray.data {
        hist[(v.clamp(0.0, 255.0) as usize).min(255)] += 1;
    }
    let total: u64 = hist.iter().sum();
    let sum_all: f64 = hist.iter().enumerate().map(|(i, &c)| i as f64 * c as f64).sum();
    let mut sum_bg = 0.0f64;
    let mut weight_bg = 0u64;
    let mut best_t = 0u8;
    let mut best_var = -1.0f64;
    for t in 0..256usize {
        weight_bg += hist[t];
        if weight_bg == 0 {
            continue;
        }
        let weight_fg = total - weight_bg;
        if weight_fg == 0 {
            break;
        }
        sum_bg += t as f64 * hist[t] as f64;
        let mean_bg = sum_bg / weight_bg as f64;
        let mean_fg = (sum_all - sum_bg) / weight_fg as f64;
        let between =
            weight_bg as f64 * weight_fg as f64 * (mean_bg - mean_fg) * (mean_bg - mean_fg);
        if between > best_var {
            best_var = between;
            best_t = t as u8;
        }
    }
    best_t
}

/// Bilinear RGBA sample with edge replication outside the image.
pub fn sample_bilinear(image: &RgbaImage, x: f64, y: f64) -> [f64; 4] {
    let w = image.width() as i64;
    let h = image.height() as i64;
    let x0 = x.floor() as i64;
    let y0 = y.floor() as i64;
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    let fetch = |xi: i64, yi: i64| -> [f64; 4] {
        let cx = xi.clamp(0, w - 1) as u32;
        let cy = yi.clamp(0, h - 1) as u32;
        let p = image.get_pixel(cx, cy).0;
        [p[0] as f64, p[1] as f64, p[2] as f64, p[3] as f64]
    };
    let p00 = fetch(x0, y0);
    let p10 = fetch(x0 + 1, y0);
    let p01 = fetch(x0, y0 + 1);
    let p11 = fetch(x0 + 1, y0 + 1);
    let mut out = [0.0; 4];
    for c in 0..4 {
        let top = p00[c] * (1.0 - fx) + p10[c] * fx;
        let bottom = p01[c] * (1.0 - fx) + p11[c] * fx;
        out[c] = top * (1.0 - fy) + bottom * fy;
    }
    out
}

/// Bilinear resize of an RGBA image.
pub fn resize_bilinear(image: &RgbaImage, width: u32, height: u32) -> RgbaImage {
    let sx = image.width() as f64 / width as f64;
    let sy = image.height() as f64 / height as f64;
    RgbaImage::from_fn(width, height, |x, y| {
        let src_x = (x as f64 + 0.5) * sx - 0.5;
        let src_y = (y as f64 + 0.5) * sy - 0.5;
        let p = sample_bilinear(image, src_x, src_y);
        image::Rgba([
            p[0].round() as u8,
            p[1].round() as u8,
            p[2].round() as u8,
            p[3].round() as u8,
        ])
    })
}

/// Bilinear resize of a single-channel buffer.
pub fn resize_gray(src: &GrayBuf, width: u32, height: u32) -> GrayBuf {
    let sx = src.width as f64 / width as f64;
    let sy = src.height as f64 / height as f64;
    GrayBuf::from_fn(width, height, |x, y| {
        let fx = (x as f64 + 0.5) * sx - 0.5;
        let fy = (y as f64 + 0.5) * sy - 0.5;
        let x0 = fx.floor();
        let y0 = fy.floor();
        let tx = (fx - x0) as f32;
        let ty = (fy - y0) as f32;
        let (x0, y0) = (x0 as i64, y0 as i64);
        let top = src.get_clamped(x0, y0) * (1.0 - tx) + src.get_clamped(x0 + 1, y0) * tx;
        let bottom =
            src.get_clamped(x0, y0 + 1) * (1.0 - tx) + src.get_clamped(x0 + 1, y0 + 1) * tx;
        top * (1.0 - ty) + bottom * ty
    })
}

/// SHA-256 over dimensions and raw RGBA bytes, hex-encoded.
pub fn image_digest(image: &RgbaImage) -> String {
    let mut hasher = Sha256::new();
    hasher.update(image.width().to_le_bytes());
    hasher.update(image.height().to_le_bytes());
    hasher.update(image.as_raw());
    hex_string(&hasher.finalize())
}

/// SHA-256 of a byte slice, hex-encoded.
pub fn bytes_digest(bytes: &[u8]) -> String {
    hex_string(&Sha256::digest(bytes))
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
