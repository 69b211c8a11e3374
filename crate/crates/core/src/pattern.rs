//! Classical-vision helpers for logo and security-pattern extraction:
//! color thresholding, connected components and palette estimation.

use crate::raster::Rect;
use image::{GrayImage, Rgba, RgbaImage};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MASK_ON: u8 = 255;

#[derive(Debug, Error, PartialEq)]
pub enum PatternError {
    #[error("mask selects no pixels")]
    EmptyMask,
    #[error("k must be at least 1")]
    ZeroClusters,
    #[error("mask dimensions {mask:?} do not match image {image:?}")]
    DimensionMismatch { image: (u32, u32), mask: (u32, u32) },
}

/// Binary mask of pixels within Chebyshev (per-channel) distance
/// `tolerance` of `color_center`. Alpha is ignored.
pub fn threshold_extract(image: &RgbaImage, color_center: [u8; 3], tolerance: u8) -> GrayImage {
    GrayImage::from_fn(image.width(), image.height(), |x, y| {
        let p = image.get_pixel(x, y).0;
        let within = (0..3).all(|c| p[c].abs_diff(color_center[c]) <= tolerance);
        image::Luma([if within { MASK_ON } else { 0 }])
    })
}

/// One 8-connected component of a binary mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    pub mask: GrayImage,
    pub bounds: Rect,
    pub area: u64,
}

/// 8-connected components with area >= `min_area`, largest first (ties
/// keep scan-order discovery order). Any non-zero mask pixel is foreground.
pub fn contour_components(mask: &GrayImage, min_area: u64) -> Vec<Component> {
    let (w, h) = mask.dimensions();
    let idx = |x: u32, y: u32| (y * w + x) as usize;
    let mut labels = vec![0u32; (w * h) as usize];
    let mut next_label = 0u32;
    let mut components = Vec::new();

    for sy in 0..h {
        for sx in 0..w {
            if mask.get_pixel(sx, sy).0[0] == 0 || labels[idx(sx, sy)] != 0 {
                continue;
            }
            next_label += 1;
            let label = next_label;
            let mut stack = vec![(sx, sy)];
            labels[idx(sx, sy)] = label;
            let mut pixels = Vec::new();
            let (mut min_x, mut min_y, mut max_x, mut max_y) = (sx, sy, sx, sy);
            while let Some((x, y)) = stack.pop() {
                pixels.push((x, y));
                min_x = min_x.min(x);
                min_y = min_y.min(y);
                max_x = max_x.max(x);
                max_y = max_y.max(y);
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        if dx == 0 && dy == 0 {
                            continue;
                        }
                        let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                        if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                            continue;
                        }
                        let (nx, ny) = (nx as u32, ny as u32);
                        if mask.get_pixel(nx, ny).0[0] != 0 && labels[idx(nx, ny)] == 0 {
                            labels[idx(nx, ny)] = label;
                            stack.push((nx, ny));
                        }
                    }
                }
            }
            if pixels.len() as u64 >= min_area {
                let bounds = Rect::new(min_x, min_y, max_x - min_x + 1, max_y - min_y + 1);
                let mut comp_mask = GrayImage::new(w, h);
                for &(x, y) in &pixels {
                    comp_mask.put_pixel(x, y, image::Luma([MASK_ON]));
                }
                components.push(Component { mask: comp_mask, bounds, area: pixels.len() as u64 });
            }
        }
    }
    components.sort_by(|a, b| b.area.cmp(&a.area));
    components
}

/// A dominant color with its pixel fraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PaletteColor {
    pub rgb: [u8; 3],
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Palette {
    pub colors: Vec<PaletteColor>,
    /// Set when the region had fewer distinct colors than requested.
    pub truncated: bool,
}

const KMEANS_ITERATIONS: usize = 20;

/// Dominant colors of the masked region: k-means in RGB with
/// deterministic farthest-point initialization and 20 Lloyd iterations.
/// Weights are cluster pixel fractions and sum to 1.
pub fn estimate_palette(
    image: &RgbaImage,
    mask: &GrayImage,
    k: usize,
) -> Result<Palette, PatternError> {
    if k == 0 {
        return Err(PatternError::ZeroClusters);
    }
    if image.dimensions() != mask.dimensions() {
        return Err(PatternError::DimensionMismatch {
            image: image.dimensions(),
            mask: mask.dimensions(),
        });
    }
    let mut pixels: Vec<[f64; 3]> = Vec::new();
    for (x, y, p) in image.enumerate_pixels() {
        if mask.get_pixel(x, y).0[0] != 0 {
            pixels.push([p.0[0] as f64, p.0[1] as f64, p.0[2] as f64]);
        }
    }
    if pixels.is_empty() {
        return Err(PatternError::EmptyMask);
    }

    let mut distinct: Vec<[f64; 3]> = Vec::new();
    for p in &pixels {
        if !distinct.contains(p) {
            distinct.push(*p);
            if distinct.len() > k {
                break;
            }
        }
    }
    let k_eff = k.min(distinct.len());
    let truncated = k_eff < k;

    // farthest-point init: start at the pixel farthest from the mean,
    // then repeatedly take the pixel farthest from the chosen set
    let dist2 = |a: &[f64; 3], b: &[f64; 3]| -> f64 {
        (0..3).map(|c| (a[c] - b[c]) * (a[c] - b[c])).sum()
    };
    let mean = {
        let mut m = [0.0; 3];
        for p in &pixels {
            for c in 0..3 {
                m[c] += p[c];
            }
        }
        for c in &mut m {
            *c /= pixels.len() as f64;
        }
        m
    };
    let mut centers: Vec<[f64; 3]> = Vec::with_capacity(k_eff);
    let first = pixels
        .iter()
        .enumerate()
        .max_by(|(ai, a), (bi, b)| {
            dist2(a, &mean).partial_cmp(&dist2(b, &mean)).unwrap().then(bi.cmp(ai))
        })
        .map(|(_, p)| *p)
        .expect("pixels non-empty");
    centers.push(first);
    while centers.len() < k_eff {
        let next = pixels
            .iter()
            .enumerate()
            .max_by(|(ai, a), (bi, b)| {
                let da = centers.iter().map(|c| dist2(a, c)).fold(f64::INFINITY, f64::min);
                let db = centers.iter().map(|c| dist2(b, c)).fold(f64::INFINITY, f64::min);
                da.partial_cmp(&db).unwrap().then(bi.cmp(ai))
            })
            .map(|(_, p)| *p)
            .expect("pixels non-empty");
        centers.push(next);
    }

    let mut assignment = vec![0usize; pixels.len()];
    for _ in 0..KMEANS_ITERATIONS {
        for (i, p) in pixels.iter().enumerate() {
            assignment[i] = centers
                .iter()
                .enumerate()
                .min_by(|(_, a), (_, b)| dist2(p, a).partial_cmp(&dist2(p, b)).unwrap())
                .map(|(j, _)| j)
                .expect("centers non-empty");
        }
        let mut sums = vec![[0.0f64; 3]; k_eff];
        let mut counts = vec![0usize; k_eff];
        for (i, p) in pixels.iter().enumerate() {
            let j = assignment[i];
            counts[j] += 1;
            for c in 0..3 {
                sums[j][c] += p[c];
            }
        }
        for j in 0..k_eff {
            if counts[j] > 0 {
                for c in 0..3 {
                    centers[j][c] = sums[j][c] / counts[j] as f64;
                }
            }
        }
    }

    let mut counts = vec![0usize; k_eff];
    for &a in &assignment {
        counts[a] += 1;
    }
    let total = pixels.len() as f64;
    let mut colors: Vec<PaletteColor> = centers
        .iter()
        .zip(&counts)
        .filter(|(_, &c)| c > 0)
        .map(|(center, &count)| PaletteColor {
            rgb: [
                center[0].round().clamp(0.0, 255.0) as u8,
                center[1].round().clamp(0.0, 255.0) as u8,
                center[2].round().clamp(0.0, 255.0) as u8,
            ],
            weight: count as f64 / total,
        })
        .collect();
    colors.sort_by(|a, b| b.weight.partial_cmp(&a.weight).unwrap().then(a.rgb.cmp(&b.rgb)));
    Ok(Palette { colors, truncated })
}

/// Cut a component out of the source image as an RGBA asset whose alpha
/// is the component mask, cropped to the component bounds.
pub fn extract_asset(image: &RgbaImage, component: &Component) -> RgbaImage {
    let b = component.bounds;
    RgbaImage::from_fn(b.width, b.height, |x, y| {
        let (sx, sy) = (b.x + x, b.y + y);
        let src = image.get_pixel(sx, sy).0;
        let alpha = component.mask.get_pixel(sx, sy).0[0];
        Rgba([src[0], src[1], src[2], alpha])
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::Rgba;

    fn solid(w: u32, h: u32, rgb: [u8; 3]) -> RgbaImage {
        RgbaImage::from_pixel(w, h, Rgba([rgb[0], rgb[1], rgb[2], 255]))
    }

    #[test]
    fn zero_tolerance_exact_match() {
        let mut img = solid(4, 1, [10, 20, 30]);
        img.put_pixel(2, 0, Rgba([10, 20, 31, 255]));
        let mask = threshold_extract(&img, [10, 20, 30], 0);
        assert_eq!(mask.get_pixel(0, 0).0[0], MASK_ON);
        assert_eq!(mask.get_pixel(2, 0).0[0], 0);
    }

    #[test]
    fn full_tolerance_selects_everything() {
        let img = solid(3, 3, [1, 2, 3]);
        let mask = threshold_extract(&img, [200, 200, 200], 255);
        assert!(mask.pixels().all(|p| p.0[0] == MASK_ON));
    }

    #[test]
    fn tolerance_is_monotone() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(5);
        let img = RgbaImage::from_fn(16, 16, |_, _| {
            Rgba([rng.gen(), rng.gen(), rng.gen(), 255])
        });
        let center = [128, 64, 200];
        let mut prev = threshold_extract(&img, center, 0);
        for tol in [10, 40, 90, 200, 255] {
            let cur = threshold_extract(&img, center, tol);
            for (p, c) in prev.pixels().zip(cur.pixels()) {
                assert!(c.0[0] >= p.0[0], "superset property violated at tol {tol}");
            }
            prev = cur;
        }
    }

    fn mask_with_squares() -> GrayImage {
        let mut mask = GrayImage::new(32, 32);
        for y in 0..10 {
            for x in 0..10 {
                mask.put_pixel(x, y, image::Luma([MASK_ON]));
            }
        }
        for y in 20..25 {
            for x in 20..25 {
                mask.put_pixel(x, y, image::Luma([MASK_ON]));
            }
        }
        mask
    }

    #[test]
    fn min_area_filters_small_component() {
        let comps = contour_components(&mask_with_squares(), 50);
        assert_eq!(comps.len(), 1);
        assert_eq!(comps[0].area, 100);
        assert_eq!(comps[0].bounds, Rect::new(0, 0, 10, 10));
    }

    #[test]
    fn empty_mask_gives_no_components() {
        assert!(contour_components(&GrayImage::new(8, 8), 0).is_empty());
    }

    #[test]
    fn components_partition_mask() {
        let mask = mask_with_squares();
        let comps = contour_components(&mask, 0);
        let mut union = GrayImage::new(32, 32);
        for c in &comps {
            for (x, y, p) in c.mask.enumerate_pixels() {
                if p.0[0] != 0 {
                    assert_eq!(union.get_pixel(x, y).0[0], 0, "components overlap");
                    union.put_pixel(x, y, image::Luma([MASK_ON]));
                }
            }
        }
        assert_eq!(union.as_raw(), mask.as_raw());
    }

    /// Brute-force flood fill oracle counting 8-connected components.
    fn oracle_component_count(mask: &GrayImage) -> usize {
        let (w, h) = mask.dimensions();
        let mut seen = vec![false; (w * h) as usize];
        let mut count = 0;
        for sy in 0..h {
            for sx in 0..w {
                if mask.get_pixel(sx, sy).0[0] == 0 || seen[(sy * w + sx) as usize] {
                    continue;
                }
                count += 1;
                let mut queue = std::collections::VecDeque::from([(sx, sy)]);
                seen[(sy * w + sx) as usize] = true;
                while let Some((x, y)) = queue.pop_front() {
                    for dy in -1i64..=1 {
                        for dx in -1i64..=1 {
                            let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                            if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                                continue;
                            }
                            let (nx, ny) = (nx as u32, ny as u32);
                            if mask.get_pixel(nx, ny).0[0] != 0 && !seen[(ny * w + nx) as usize] {
                                seen[(ny * w + nx) as usize] = true;
                                queue.push_back((nx, ny));
                            }
                        }
                    }
                }
            }
        }
        count
    }

    #[test]
    fn random_blobs_match_flood_fill_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(21);
        for _ in 0..10 {
            let mask = GrayImage::from_fn(24, 24, |_, _| {
                image::Luma([if rng.gen_bool(0.35) { MASK_ON } else { 0 }])
            });
            assert_eq!(contour_components(&mask, 0).len(), oracle_component_count(&mask));
        }
    }

    #[test]
    fn solid_region_single_color() {
        let img = solid(8, 8, [255, 0, 0]);
        let mask = GrayImage::from_pixel(8, 8, image::Luma([MASK_ON]));
        let palette = estimate_palette(&img, &mask, 1).unwrap();
        assert_eq!(palette.colors.len(), 1);
        assert_eq!(palette.colors[0].rgb, [255, 0, 0]);
        assert_eq!(palette.colors[0].weight, 1.0);
        assert!(!palette.truncated);
    }

    #[test]
    fn two_color_split_recovers_means() {
        let mut img = solid(10, 10, [255, 0, 0]);
        for y in 0..10 {
            for x in 5..10 {
                img.put_pixel(x, y, Rgba([0, 0, 255, 255]));
            }
        }
        let mask = GrayImage::from_pixel(10, 10, image::Luma([MASK_ON]));
        let palette = estimate_palette(&img, &mask, 2).unwrap();
        assert_eq!(palette.colors.len(), 2);
        let mut rgbs: Vec<_> = palette.colors.iter().map(|c| c.rgb).collect();
        rgbs.sort();
        assert_eq!(rgbs, vec![[0, 0, 255], [255, 0, 0]]);
        for c in &palette.colors {
            assert!((c.weight - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn fewer_distinct_colors_than_k_is_flagged() {
        let mut img = solid(6, 6, [10, 10, 10]);
        img.put_pixel(0, 0, Rgba([200, 200, 200, 255]));
        let mask = GrayImage::from_pixel(6, 6, image::Luma([MASK_ON]));
        let palette = estimate_palette(&img, &mask, 3).unwrap();
        assert_eq!(palette.colors.len(), 2);
        assert!(palette.truncated);
    }

    #[test]
    fn palette_weights_sum_to_one() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(3);
        let img = RgbaImage::from_fn(12, 12, |_, _| Rgba([rng.gen(), rng.gen(), rng.gen(), 255]));
        let mask = GrayImage::from_pixel(12, 12, image::Luma([MASK_ON]));
        let palette = estimate_palette(&img, &mask, 4).unwrap();
        let total: f64 = palette.colors.iter().map(|c| c.weight).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn palette_is_deterministic() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(9);
        let img = RgbaImage::from_fn(12, 12, |_, _| Rgba([rng.gen(), rng.gen(), rng.gen(), 255]));
        let mask = GrayImage::from_pixel(12, 12, image::Luma([MASK_ON]));
        let a = estimate_palette(&img, &mask, 3).unwrap();
        let b = estimate_palette(&img, &mask, 3).unwrap();
        assert_eq!(a, b);
    }
}
