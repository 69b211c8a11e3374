//! Face image quality filtering, ICAO-geometry portrait cropping and
//! signature extraction.
//!
//! Landmark detection itself is external: implement `LandmarkProvider`
//! to plug a real detector, or use `SidecarProvider` which reads the
//! JSON sidecar files shipped next to each fixture image.

use crate::raster::{self, GrayBuf, Rect};
use image::{GrayImage, Rgba, RgbaImage};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Eye centers and face box for one image, in image pixel coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Landmarks {
    pub left_eye: [f64; 2],
    pub right_eye: [f64; 2],
    pub face_bbox: Rect,
    #[serde(default)]
    pub source: String,
}

impl Landmarks {
    /// Structural sanity: eyes inside the box, left eye left of right eye.
    pub fn is_valid(&self) -> bool {
        self.left_eye[0] < self.right_eye[0]
            && self.face_bbox.contains_point(self.left_eye[0], self.left_eye[1])
            && self.face_bbox.contains_point(self.right_eye[0], self.right_eye[1])
    }

    pub fn eye_distance(&self) -> f64 {
        let dx = self.right_eye[0] - self.left_eye[0];
        let dy = self.right_eye[1] - self.left_eye[1];
        (dx * dx + dy * dy).sqrt()
    }

    pub fn eye_midpoint(&self) -> [f64; 2] {
        [
            (self.left_eye[0] + self.right_eye[0]) / 2.0,
            (self.left_eye[1] + self.right_eye[1]) / 2.0,
        ]
    }
}

/// Source of landmarks for an image file.
pub trait LandmarkProvider {
    fn landmarks(&self, image_path: &Path) -> Result<Landmarks, FaceError>;
}

/// Reads `<image>.landmarks.json` sidecar files.
#[derive(Debug, Default)]
pub struct SidecarProvider;

/// Sidecar path for an image: `portrait.png` -> `portrait.landmarks.json`.
pub fn sidecar_path(image_path: &Path) -> PathBuf {
    let mut os = image_path.as_os_str().to_owned();
    os.push(".landmarks.json");
    PathBuf::from(os)
}

impl LandmarkProvider for SidecarProvider {
    fn landmarks(&self, image_path: &Path) -> Result<Landmarks, FaceError> {
        let path = sidecar_path(image_path);
        let text = std::fs::read_to_string(&path)
            .map_err(|source| FaceError::SidecarIo { path: path.clone(), source })?;
        let lm: Landmarks = serde_json::from_str(&text)
            .map_err(|e| FaceError::SidecarParse { path, message: e.to_string() })?;
        if !lm.is_valid() {
            return Err(FaceError::InvalidLandmarks);
        }
        Ok(lm)
    }
}

/// The four filter criteria. All strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityThresholds {
    /// Minimum of face box width and height, in pixels.
    pub min_bbox_pixels: u32,
    /// Inter-eye distance as a fraction of image width.
    pub min_eye_distance_ratio: f64,
    /// Distance from either eye to the nearest edge, as a fraction of the
    /// corresponding image dimension.
    pub min_eye_margin_ratio: f64,
    /// Variance of the 3x3 Laplacian over the face box.
    pub min_sharpness: f64,
}

impl Default for QualityThresholds {
    fn default() -> Self {
        Self {
            min_bbox_pixels: 180,
            min_eye_distance_ratio: 0.12,
            min_eye_margin_ratio: 0.10,
            min_sharpness: 40.0,
        }
    }
}

/// One measured criterion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Criterion {
    pub measured: f64,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub bbox_resolution: Criterion,
    pub eye_distance: Criterion,
    pub eye_margin: Criterion,
    pub sharpness: Criterion,
    pub overall_pass: bool,
    /// Sharpness when passing, -inf otherwise; higher ranks better.
    pub rank_score: f64,
}

#[derive(Debug, Error)]
pub enum FaceError {
    #[error("face bounding box has zero area")]
    DegenerateBbox,
    #[error("eye distance is zero")]
    ZeroEyeDistance,
    #[error("landmarks fail structural invariants")]
    InvalidLandmarks,
    #[error("image has no foreground ink")]
    BlankSignature,
    #[error("cannot read landmark sidecar {path}: {source}")]
    SidecarIo { path: PathBuf, source: std::io::Error },
    #[error("cannot parse landmark sidecar {path}: {message}")]
    SidecarParse { path: PathBuf, message: String },
    #[error("cannot read image {path}: {message}")]
    ImageIo { path: PathBuf, message: String },
}

/// Sharpness measure: variance of the 3x3 Laplacian response over the
/// face box of the grayscale image.
pub fn sharpness(image: &RgbaImage, face_bbox: &Rect) -> f64 {
    let gray = raster::luma(image);
    raster::laplacian_variance(&gray, face_bbox)
}

/// Score one candidate against all four criteria.
pub fn assess(
    image: &RgbaImage,
    landmarks: &Landmarks,
    thresholds: &QualityThresholds,
) -> Result<QualityReport, FaceError> {
    if landmarks.face_bbox.area() == 0 {
        return Err(FaceError::DegenerateBbox);
    }
    if !landmarks.is_valid() {
        return Err(FaceError::InvalidLandmarks);
    }
    let (w, h) = (image.width() as f64, image.height() as f64);

    let bbox_min = landmarks.face_bbox.width.min(landmarks.face_bbox.height);
    let bbox_resolution = Criterion {
        measured: bbox_min as f64,
        threshold: thresholds.min_bbox_pixels as f64,
        pass: bbox_min >= thresholds.min_bbox_pixels,
    };

    let eye_distance_ratio = landmarks.eye_distance() / w;
    let eye_distance = Criterion {
        measured: eye_distance_ratio,
        threshold: thresholds.min_eye_distance_ratio,
        pass: eye_distance_ratio >= thresholds.min_eye_distance_ratio,
    };

    // margin from each eye to each edge, normalized by that edge's dimension
    let mut margin = f64::INFINITY;
    for eye in [landmarks.left_eye, landmarks.right_eye] {
        margin = margin
            .min(eye[0] / w)
            .min((w - eye[0]) / w)
            .min(eye[1] / h)
            .min((h - eye[1]) / h);
    }
    let eye_margin = Criterion {
        measured: margin,
        threshold: thresholds.min_eye_margin_ratio,
        pass: margin >= thresholds.min_eye_margin_ratio,
    };

    let sharp = sharpness(image, &landmarks.face_bbox);
    let sharpness_criterion = Criterion {
        measured: sharp,
        threshold: thresholds.min_sharpness,
        pass: sharp >= thresholds.min_sharpness,
    };

    let overall_pass =
        bbox_resolution.pass && eye_distance.pass && eye_margin.pass && sharpness_criterion.pass;
    Ok(QualityReport {
        bbox_resolution,
        eye_distance,
        eye_margin,
        sharpness: sharpness_criterion,
        overall_pass,
        rank_score: if overall_pass { sharp } else { f64::NEG_INFINITY },
    })
}

/// Result of top-k selection over one subject's candidates.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    /// Indices into the candidate list, best first; at most k entries.
    pub selected: Vec<usize>,
    pub reports: Vec<QualityReport>,
    /// Set when fewer than k candidates passed (including zero).
    pub shortfall: bool,
}

/// Keep the top-k passing candidates by rank score, ties broken by input
/// order (stable).
pub fn rank_and_select(
    candidates: &[(RgbaImage, Landmarks)],
    thresholds: &QualityThresholds,
    k: usize,
) -> Result<Selection, FaceError> {
    assert!(k >= 1, "k must be at least 1");
    let reports: Vec<QualityReport> = candidates
        .iter()
        .map(|(img, lm)| assess(img, lm, thresholds))
        .collect::<Result<_, _>>()?;
    let mut passing: Vec<usize> =
        (0..reports.len()).filter(|&i| reports[i].overall_pass).collect();
    passing.sort_by(|&a, &b| {
        reports[b]
            .rank_score
            .partial_cmp(&reports[a].rank_score)
            .expect("rank scores comparable")
            .then(a.cmp(&b))
    });
    passing.truncate(k);
    let shortfall = passing.len() < k;
    Ok(Selection { selected: passing, reports, shortfall })
}

/// Portrait geometry targets for `crop_icao`, as fractions of the output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CropGeometry {
    /// Eye line height measured from the bottom of the output.
    pub eye_line_from_bottom: f64,
    /// Inter-eye distance as a fraction of output width.
    pub inter_eye_width: f64,
}

impl Default for CropGeometry {
    fn default() -> Self {
        Self { eye_line_from_bottom: 0.55, inter_eye_width: 0.25 }
    }
}

/// Crop and rescale so the eyes land on the target geometry: eye line at
/// `eye_line_from_bottom` of the height, midpoint centered, inter-eye
/// distance `inter_eye_width` of the width. A similarity transform (the
/// eye line is rotated to horizontal); out-of-source pixels replicate
/// the edge.
pub fn crop_icao(
    image: &RgbaImage,
    landmarks: &Landmarks,
    out_size: (u32, u32),
    geometry: &CropGeometry,
) -> Result<RgbaImage, FaceError> {
    let (out_w, out_h) = out_size;
    let eye_dist = landmarks.eye_distance();
    if eye_dist == 0.0 {
        return Err(FaceError::ZeroEyeDistance);
    }
    let target_dist = geometry.inter_eye_width * out_w as f64;
    let scale = target_dist / eye_dist;
    let angle = (landmarks.right_eye[1] - landmarks.left_eye[1])
        .atan2(landmarks.right_eye[0] - landmarks.left_eye[0]);
    let (sin, cos) = angle.sin_cos();
    let mid = landmarks.eye_midpoint();
    let target_mid = [out_w as f64 / 2.0, out_h as f64 * (1.0 - geometry.eye_line_from_bottom)];

    // output -> source: un-translate, un-scale, un-rotate about the eye midpoint
    let out = RgbaImage::from_fn(out_w, out_h, |x, y| {
        let dx = (x as f64 + 0.5 - target_mid[0]) / scale;
        let dy = (y as f64 + 0.5 - target_mid[1]) / scale;
        let sx = mid[0] + cos * dx - sin * dy;
        let sy = mid[1] + sin * dx + cos * dy;
        let p = raster::sample_bilinear(image, sx - 0.5, sy - 0.5);
        Rgba([
            p[0].round() as u8,
            p[1].round() as u8,
            p[2].round() as u8,
            p[3].round() as u8,
        ])
    });
    Ok(out)
}

/// Forward map of a source point under the `crop_icao` transform; test
/// hook for the geometry contract.
pub fn crop_forward_map(
    landmarks: &Landmarks,
    out_size: (u32, u32),
    geometry: &CropGeometry,
    point: [f64; 2],
) -> [f64; 2] {
    let (out_w, out_h) = out_size;
    let target_dist = geometry.inter_eye_width * out_w as f64;
    let scale = target_dist / landmarks.eye_distance();
    let angle = (landmarks.right_eye[1] - landmarks.left_eye[1])
        .atan2(landmarks.right_eye[0] - landmarks.left_eye[0]);
    let (sin, cos) = angle.sin_cos();
    let mid = landmarks.eye_midpoint();
    let target_mid = [out_w as f64 / 2.0, out_h as f64 * (1.0 - geometry.eye_line_from_bottom)];
    let dx = point[0] - mid[0];
    let dy = point[1] - mid[1];
    // inverse rotation then scale
    let rx = cos * dx + sin * dy;
    let ry = -sin * dx + cos * dy;
    [target_mid[0] + rx * scale, target_mid[1] + ry * scale]
}

/// Binarized signature with its alpha mask (ink opaque, background
/// transparent).
#[derive(Debug, Clone, PartialEq)]
pub struct SignatureCutout {
    /// Ink mask: 255 where ink, 0 elsewhere.
    pub mask: GrayImage,
    /// Black ink over transparent background, ready for compositing.
    pub rgba: RgbaImage,
    pub foreground_pixels: u64,
}

/// Otsu binarization with the darker class as ink.
pub fn signature_extract(image: &RgbaImage) -> Result<SignatureCutout, FaceError> {
    let gray = raster::luma(image);
    let threshold = raster::otsu_threshold(&gray) as f32;
    let mut mask = GrayImage::new(image.width(), image.height());
    let mut foreground = 0u64;
    for y in 0..image.height() {
        for x in 0..image.width() {
            if gray.get(x, y) <= threshold {
                mask.put_pixel(x, y, image::Luma([255]));
                foreground += 1;
            }
        }
    }
    if foreground == 0 || foreground == (image.width() * image.height()) as u64 {
        // all one class: nothing separable from the background
        return Err(FaceError::BlankSignature);
    }
    let rgba = RgbaImage::from_fn(image.width(), image.height(), |x, y| {
        let a = mask.get_pixel(x, y).0[0];
        Rgba([0, 0, 0, a])
    });
    Ok(SignatureCutout { mask, rgba, foreground_pixels: foreground })
}

/// Gaussian blur of an RGBA image's color channels; alpha untouched.
/// Used by tests and the filter CLI to degrade candidates.
pub fn blur_rgba(image: &RgbaImage, sigma: f32) -> RgbaImage {
    let channels: Vec<GrayBuf> = (0..3)
        .map(|c| {
            let buf = GrayBuf::from_fn(image.width(), image.height(), |x, y| {
                image.get_pixel(x, y).0[c] as f32
            });
            raster::gaussian_blur(&buf, sigma)
        })
        .collect();
    RgbaImage::from_fn(image.width(), image.height(), |x, y| {
        Rgba([
            channels[0].get(x, y).round().clamp(0.0, 255.0) as u8,
            channels[1].get(x, y).round().clamp(0.0, 255.0) as u8,
            channels[2].get(x, y).round().clamp(0.0, 255.0) as u8,
            image.get_pixel(x, y).0[3],
        ])
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn landmarks(left: [f64; 2], right: [f64; 2], bbox: Rect) -> Landmarks {
        Landmarks { left_eye: left, right_eye: right, face_bbox: bbox, source: "test".into() }
    }

    fn textured(w: u32, h: u32) -> RgbaImage {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(17);
        RgbaImage::from_fn(w, h, |_, _| {
            let v: u8 = rng.gen();
            Rgba([v, v, v, 255])
        })
    }

    #[test]
    fn eye_distance_ratio_arithmetic() {
        let img = RgbaImage::new(1000, 600);
        let lm = landmarks([100.0, 200.0], [300.0, 200.0], Rect::new(50, 50, 400, 400));
        let report = assess(&img, &lm, &QualityThresholds::default()).unwrap();
        assert_relative_eq!(report.eye_distance.measured, 0.2);
        assert!(report.eye_distance.pass);
    }

    #[test]
    fn uniform_image_has_zero_sharpness() {
        let img = RgbaImage::from_pixel(400, 400, Rgba([128, 128, 128, 255]));
        let lm = landmarks([100.0, 150.0], [300.0, 150.0], Rect::new(50, 50, 300, 300));
        let report = assess(&img, &lm, &QualityThresholds::default()).unwrap();
        assert_eq!(report.sharpness.measured, 0.0);
        assert!(!report.sharpness.pass);
        assert!(!report.overall_pass);
        assert_eq!(report.rank_score, f64::NEG_INFINITY);
    }

    #[test]
    fn blur_never_increases_sharpness() {
        for seed_sigma in [0.8f32, 1.5, 3.0] {
            let img = textured(120, 120);
            let bbox = Rect::new(10, 10, 100, 100);
            let sharp = sharpness(&img, &bbox);
            let blurred = sharpness(&blur_rgba(&img, seed_sigma), &bbox);
            assert!(
                blurred < sharp,
                "sigma {seed_sigma}: blurred {blurred} >= sharp {sharp}"
            );
        }
    }

    #[test]
    fn checkerboard_sharper_than_blurred_copy() {
        let img = RgbaImage::from_fn(64, 64, |x, y| {
            let v = if (x / 4 + y / 4) % 2 == 0 { 0 } else { 255 };
            Rgba([v, v, v, 255])
        });
        let bbox = Rect::new(0, 0, 64, 64);
        assert!(sharpness(&img, &bbox) > sharpness(&blur_rgba(&img, 2.0), &bbox));
    }

    #[test]
    fn degenerate_bbox_is_error() {
        let img = RgbaImage::new(10, 10);
        let lm = landmarks([2.0, 2.0], [8.0, 2.0], Rect::new(0, 0, 0, 0));
        assert!(matches!(
            assess(&img, &lm, &QualityThresholds::default()),
            Err(FaceError::DegenerateBbox)
        ));
    }

    fn passing_candidate(noise_seed: u64) -> (RgbaImage, Landmarks) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(noise_seed);
        let img = RgbaImage::from_fn(400, 400, |_, _| {
            let v: u8 = rng.gen();
            Rgba([v, v, v, 255])
        });
        (img, landmarks([150.0, 180.0], [250.0, 180.0], Rect::new(80, 80, 240, 240)))
    }

    #[test]
    fn selects_top_k_by_sharpness() {
        let mut candidates = Vec::new();
        // 5 progressively blurrier copies plus 2 hard failures
        let (base, lm) = passing_candidate(1);
        for sigma in [0.0f32, 0.5, 1.0, 2.0, 4.0] {
            let img = if sigma == 0.0 { base.clone() } else { blur_rgba(&base, sigma) };
            candidates.push((img, lm.clone()));
        }
        let flat = RgbaImage::from_pixel(400, 400, Rgba([100, 100, 100, 255]));
        candidates.push((flat.clone(), lm.clone()));
        candidates.push((flat, lm.clone()));

        let sel = rank_and_select(&candidates, &QualityThresholds::default(), 3).unwrap();
        assert_eq!(sel.selected, vec![0, 1, 2]);
        assert!(!sel.shortfall);
        for &i in &sel.selected {
            assert!(sel.reports[i].overall_pass);
        }
    }

    #[test]
    fn no_passing_candidates_flags_shortfall() {
        let flat = RgbaImage::from_pixel(400, 400, Rgba([50, 50, 50, 255]));
        let lm = landmarks([150.0, 180.0], [250.0, 180.0], Rect::new(80, 80, 240, 240));
        let sel = rank_and_select(
            &[(flat.clone(), lm.clone()), (flat, lm)],
            &QualityThresholds::default(),
            3,
        )
        .unwrap();
        assert!(sel.selected.is_empty());
        assert!(sel.shortfall);
    }

    #[test]
    fn ties_preserve_input_order() {
        let (img, lm) = passing_candidate(2);
        let candidates = vec![(img.clone(), lm.clone()), (img.clone(), lm.clone()), (img, lm)];
        let sel = rank_and_select(&candidates, &QualityThresholds::default(), 3).unwrap();
        assert_eq!(sel.selected, vec![0, 1, 2]);
    }

    #[test]
    fn crop_geometry_maps_eyes_to_targets() {
        let (img, lm) = passing_candidate(3);
        let geometry = CropGeometry::default();
        let out_size = (360, 480);
        let _cropped = crop_icao(&img, &lm, out_size, &geometry).unwrap();
        let left = crop_forward_map(&lm, out_size, &geometry, lm.left_eye);
        let right = crop_forward_map(&lm, out_size, &geometry, lm.right_eye);
        let expected_y = 480.0 * (1.0 - geometry.eye_line_from_bottom);
        let expected_dist = 0.25 * 360.0;
        assert_relative_eq!(left[1], expected_y, epsilon = 1.0);
        assert_relative_eq!(right[1], expected_y, epsilon = 1.0);
        assert_relative_eq!(right[0] - left[0], expected_dist, epsilon = 1.0);
        assert_relative_eq!((left[0] + right[0]) / 2.0, 180.0, epsilon = 1.0);
    }

    #[test]
    fn crop_with_rotated_eyes_levels_the_eye_line() {
        let (img, _) = passing_candidate(4);
        let lm = landmarks([140.0, 160.0], [260.0, 200.0], Rect::new(80, 80, 240, 240));
        let geometry = CropGeometry::default();
        let left = crop_forward_map(&lm, (360, 480), &geometry, lm.left_eye);
        let right = crop_forward_map(&lm, (360, 480), &geometry, lm.right_eye);
        assert_relative_eq!(left[1], right[1], epsilon = 1e-9);
        let _ = crop_icao(&img, &lm, (360, 480), &geometry).unwrap();
    }

    #[test]
    fn crop_at_target_geometry_is_identity() {
        // eyes already exactly on target: forward map must fix them
        let geometry = CropGeometry::default();
        let (w, h) = (360u32, 480u32);
        let eye_y = h as f64 * (1.0 - geometry.eye_line_from_bottom);
        let lm = landmarks(
            [135.0, eye_y],
            [225.0, eye_y],
            Rect::new(60, 100, 240, 300),
        );
        let left = crop_forward_map(&lm, (w, h), &geometry, lm.left_eye);
        assert_relative_eq!(left[0], 135.0, epsilon = 1e-9);
        assert_relative_eq!(left[1], eye_y, epsilon = 1e-9);
    }

    #[test]
    fn zero_eye_distance_is_error() {
        let img = RgbaImage::new(100, 100);
        let lm = Landmarks {
            left_eye: [50.0, 50.0],
            right_eye: [50.0, 50.0],
            face_bbox: Rect::new(0, 0, 100, 100),
            source: String::new(),
        };
        assert!(matches!(
            crop_icao(&img, &lm, (100, 100), &CropGeometry::default()),
            Err(FaceError::ZeroEyeDistance)
        ));
    }

    #[test]
    fn signature_black_stroke_on_white() {
        let mut img = RgbaImage::from_pixel(60, 30, Rgba([250, 250, 250, 255]));
        for x in 10..50 {
            img.put_pixel(x, 15, Rgba([10, 10, 10, 255]));
            img.put_pixel(x, 16, Rgba([10, 10, 10, 255]));
        }
        let cut = signature_extract(&img).unwrap();
        assert_eq!(cut.foreground_pixels, 80);
        assert_eq!(cut.mask.get_pixel(20, 15).0[0], 255);
        assert_eq!(cut.mask.get_pixel(0, 0).0[0], 0);
        assert_eq!(cut.rgba.get_pixel(0, 0).0[3], 0);
        assert_eq!(cut.rgba.get_pixel(20, 15).0[3], 255);
    }

    #[test]
    fn blank_signature_is_flagged() {
        let img = RgbaImage::from_pixel(20, 20, Rgba([255, 255, 255, 255]));
        assert!(matches!(signature_extract(&img), Err(FaceError::BlankSignature)));
    }

    #[test]
    fn sidecar_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let img_path = dir.path().join("face.png");
        let lm = landmarks([30.0, 40.0], [70.0, 40.0], Rect::new(10, 10, 80, 80));
        std::fs::write(sidecar_path(&img_path), serde_json::to_string(&lm).unwrap()).unwrap();
        let loaded = SidecarProvider.landmarks(&img_path).unwrap();
        assert_eq!(loaded, lm);
    }
}
