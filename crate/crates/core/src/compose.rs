//! Layer compositing: styled text rendering, masked alpha blending with
//! edge blurring and opacity tuning, and full document rendering.

use crate::font::{self, FontStore};
use crate::mrz::MrzTd3;
use crate::raster::{self, GrayBuf, Rect};
use crate::subject::SubjectRecord;
use crate::template::{
    BiometricKind, CountryConfig, FieldAttribute, LayerClass, LayerSpec, Template,
};
use image::{Rgba, RgbaImage};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ComposeError {
    #[error("layer {layer}: text {text:?} overflows bounds (measured {measured:.1}px, available {available}px)")]
    TextOverflow { layer: String, text: String, measured: f32, available: u32 },
    #[error("layer {layer}: {source}")]
    Layout { layer: String, source: font::LayoutError },
    #[error("layer {layer}: missing text style")]
    MissingStyle { layer: String },
    #[error("layer {layer}: {slot:?} asset not provided")]
    MissingAsset { layer: String, slot: BiometricKind },
    #[error("layer {layer}: no subject field binding")]
    UnboundField { layer: String },
    #[error("layer {layer}: asset {asset:?} and mask {mask:?} dimensions differ")]
    DimensionMismatch { layer: String, asset: (u32, u32), mask: (u32, u32) },
    #[error("cannot load asset {path}: {message}")]
    AssetLoad { path: PathBuf, message: String },
    #[error(transparent)]
    Font(#[from] font::FontError),
}

/// Per-layer record of what a render did.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerLog {
    pub layer_id: String,
    pub class: String,
    pub bounds: Rect,
    pub op: String,
    pub micros: u64,
}

fn blend_pixel(dst: &mut Rgba<u8>, src: [f64; 3], alpha: f64) {
    for c in 0..3 {
        let out = src[c] * alpha + dst.0[c] as f64 * (1.0 - alpha);
        dst.0[c] = out.round().clamp(0.0, 255.0) as u8;
    }
    let a_out = alpha * 255.0 + dst.0[3] as f64 * (1.0 - alpha);
    dst.0[3] = a_out.round().clamp(0.0, 255.0) as u8;
}

/// Source-over blend of `asset` into `canvas` at `dest`. The effective
/// alpha is the Gaussian-blurred mask times the layer opacity times the
/// asset's own alpha. Writes stay within `dest`.
pub fn composite_layer(
    canvas: &mut RgbaImage,
    asset: &RgbaImage,
    mask: &GrayBuf,
    opacity: f64,
    edge_blur_sigma: f32,
    dest: Rect,
    layer_id: &str,
) -> Result<(), ComposeError> {
    if asset.dimensions() != (mask.width, mask.height) {
        return Err(ComposeError::DimensionMismatch {
            layer: layer_id.to_string(),
            asset: asset.dimensions(),
            mask: (mask.width, mask.height),
        });
    }
    if opacity == 0.0 {
        return Ok(());
    }
    let blurred = raster::gaussian_blur(mask, edge_blur_sigma);
    let canvas_rect = Rect::new(0, 0, canvas.width(), canvas.height());
    let clipped = match dest.intersect(&canvas_rect) {
        Some(r) => r,
        None => return Ok(()),
    };
    for y in clipped.y..clipped.bottom() {
        for x in clipped.x..clipped.right() {
            let (ax, ay) = (x - dest.x, y - dest.y);
            if ax >= asset.width() || ay >= asset.height() {
                continue;
            }
            let src = asset.get_pixel(ax, ay).0;
            let alpha = blurred.get(ax, ay).clamp(0.0, 1.0) as f64
                * opacity
                * (src[3] as f64 / 255.0);
            if alpha <= 0.0 {
                continue;
            }
            blend_pixel(
                canvas.get_pixel_mut(x, y),
                [src[0] as f64, src[1] as f64, src[2] as f64],
                alpha,
            );
        }
    }
    Ok(())
}

/// Render text into a layer's bounds with its TextStyle. Multi-line
/// content splits on '\n'. On overflow the canvas is left untouched.
pub fn render_text_field(
    canvas: &mut RgbaImage,
    layer: &LayerSpec,
    text: &str,
    fonts: &FontStore,
    opacity: f64,
) -> Result<(), ComposeError> {
    let style = layer
        .text_style
        .as_ref()
        .ok_or_else(|| ComposeError::MissingStyle { layer: layer.id.clone() })?;
    let font = fonts.get(&style.font_family)?;
    let lines: Vec<&str> = text.split('\n').collect();

    let mut layouts = Vec::with_capacity(lines.len());
    for line in &lines {
        let layout = font::layout_line(font, style, line)
            .map_err(|source| ComposeError::Layout { layer: layer.id.clone(), source })?;
        if layout.width > layer.bounds.width as f32 {
            return Err(ComposeError::TextOverflow {
                layer: layer.id.clone(),
                text: line.to_string(),
                measured: layout.width,
                available: layer.bounds.width,
            });
        }
        layouts.push(layout);
    }
    if opacity == 0.0 {
        return Ok(());
    }

    let line_height = layouts
        .iter()
        .map(|l| (l.ascent + l.descent) * style.line_spacing)
        .fold(0.0f32, f32::max);
    let total_height = line_height * lines.len() as f32;
    let mut baseline_y = layer.bounds.y as f32
        + ((layer.bounds.height as f32 - total_height) / 2.0).max(0.0)
        + layouts.first().map(|l| l.ascent).unwrap_or(0.0);

    let color = style.color;
    let color_rgb = [color[0] as f64, color[1] as f64, color[2] as f64];
    let color_alpha = color[3] as f64 / 255.0;
    let angle = style.rotation.to_radians();

    for layout in &layouts {
        let x0 = match style.alignment {
            crate::template::Alignment::Left => layer.bounds.x as f32,
            crate::template::Alignment::Center => {
                layer.bounds.x as f32 + (layer.bounds.width as f32 - layout.width) / 2.0
            }
            crate::template::Alignment::Right => {
                layer.bounds.x as f32 + layer.bounds.width as f32 - layout.width
            }
        };
        let raster_line = font::rasterize_line(font, style, layout);
        let (origin_x, origin_y) = raster_line.origin;
        let buf = &raster_line.alpha;

        if angle == 0.0 {
            // direct blit at integral offset
            let off_x = (x0 - origin_x).round() as i64;
            let off_y = (baseline_y - origin_y).round() as i64;
            for by in 0..buf.height {
                for bx in 0..buf.width {
                    let coverage = buf.get(bx, by);
                    if coverage <= 0.0 {
                        continue;
                    }
                    let cx = off_x + bx as i64;
                    let cy = off_y + by as i64;
                    if !in_rect(cx, cy, &layer.bounds, canvas) {
                        continue;
                    }
                    let alpha = coverage as f64 * color_alpha * opacity;
                    blend_pixel(canvas.get_pixel_mut(cx as u32, cy as u32), color_rgb, alpha);
                }
            }
        } else {
            // inverse-map every bounds pixel into the rotated buffer
            let (sin, cos) = angle.sin_cos();
            for cy in layer.bounds.y..layer.bounds.bottom().min(canvas.height()) {
                for cx in layer.bounds.x..layer.bounds.right().min(canvas.width()) {
                    let dx = cx as f32 + 0.5 - x0;
                    let dy = cy as f32 + 0.5 - baseline_y;
                    // rotation is counter-clockwise on screen; inverse here
                    let bx = origin_x + cos * dx - sin * dy;
                    let by = origin_y + sin * dx + cos * dy;
                    let coverage = sample_gray_bilinear(buf, bx - 0.5, by - 0.5);
                    if coverage <= 0.0 {
                        continue;
                    }
                    let alpha = coverage as f64 * color_alpha * opacity;
                    blend_pixel(canvas.get_pixel_mut(cx, cy), color_rgb, alpha);
                }
            }
        }
        baseline_y += line_height;
    }
    Ok(())
}

fn in_rect(x: i64, y: i64, rect: &Rect, canvas: &RgbaImage) -> bool {
    x >= rect.x as i64
        && y >= rect.y as i64
        && x < rect.right().min(canvas.width()) as i64
        && y < rect.bottom().min(canvas.height()) as i64
}

fn sample_gray_bilinear(buf: &GrayBuf, x: f32, y: f32) -> f32 {
    let x0 = x.floor() as i64;
    let y0 = y.floor() as i64;
    let tx = x - x0 as f32;
    let ty = y - y0 as f32;
    let fetch = |xi: i64, yi: i64| -> f32 {
        if xi < 0 || yi < 0 || xi >= buf.width as i64 || yi >= buf.height as i64 {
            0.0
        } else {
            buf.get(xi as u32, yi as u32)
        }
    };
    let top = fetch(x0, y0) * (1.0 - tx) + fetch(x0 + 1, y0) * tx;
    let bottom = fetch(x0, y0 + 1) * (1.0 - tx) + fetch(x0 + 1, y0 + 1) * tx;
    top * (1.0 - ty) + bottom * ty
}

/// Subject biometric rasters resolved for one render.
#[derive(Debug, Clone, Default)]
pub struct SubjectAssets {
    pub face: Option<RgbaImage>,
    pub signature: Option<RgbaImage>,
    pub fingerprint: Option<RgbaImage>,
}

impl SubjectAssets {
    fn get(&self, kind: BiometricKind) -> Option<&RgbaImage> {
        match kind {
            BiometricKind::Face => self.face.as_ref(),
            BiometricKind::Signature => self.signature.as_ref(),
            BiometricKind::Fingerprint => self.fingerprint.as_ref(),
        }
    }
}

/// Everything needed to render one document deterministically.
pub struct RenderJob<'a> {
    pub config: &'a CountryConfig,
    /// `None` renders the empty template.
    pub subject: Option<&'a SubjectRecord>,
    pub mrz: Option<MrzTd3>,
    pub assets: SubjectAssets,
    /// Pre-loaded logo/pattern rasters by layer id.
    pub logo_assets: BTreeMap<String, RgbaImage>,
    /// Pre-loaded mask rasters (0..1) by layer id, unscaled.
    pub masks: BTreeMap<String, GrayBuf>,
    pub opacity_overrides: BTreeMap<String, f64>,
    /// Overrides the config's default biometric edge blur.
    pub edge_blur_sigma: Option<f32>,
    pub seed: u64,
}

impl<'a> RenderJob<'a> {
    pub fn empty(config: &'a CountryConfig) -> Result<Self, ComposeError> {
        Ok(Self {
            config,
            subject: None,
            mrz: None,
            assets: SubjectAssets::default(),
            logo_assets: load_logo_assets(config)?,
            masks: load_masks(config)?,
            opacity_overrides: BTreeMap::new(),
            edge_blur_sigma: None,
            seed: 0,
        })
    }
}

/// Load every logo/pattern layer's asset image.
pub fn load_logo_assets(
    config: &CountryConfig,
) -> Result<BTreeMap<String, RgbaImage>, ComposeError> {
    let mut assets = BTreeMap::new();
    for layer in &config.layers {
        if layer.class != LayerClass::LogoPattern {
            continue;
        }
        if let Some(path) = layer.image.as_ref().and_then(|i| i.asset.as_ref()) {
            let img = image::open(path)
                .map_err(|e| ComposeError::AssetLoad { path: path.clone(), message: e.to_string() })?
                .to_rgba8();
            assets.insert(layer.id.clone(), img);
        }
    }
    Ok(assets)
}

/// Load every layer's mask image as a 0..1 buffer.
pub fn load_masks(config: &CountryConfig) -> Result<BTreeMap<String, GrayBuf>, ComposeError> {
    let mut masks = BTreeMap::new();
    for layer in &config.layers {
        if let Some(path) = &layer.mask_ref {
            let img = image::open(path)
                .map_err(|e| ComposeError::AssetLoad { path: path.clone(), message: e.to_string() })?
                .to_luma8();
            let buf = GrayBuf::from_fn(img.width(), img.height(), |x, y| {
                img.get_pixel(x, y).0[0] as f32 / 255.0
            });
            masks.insert(layer.id.clone(), buf);
        }
    }
    Ok(masks)
}

fn full_mask(width: u32, height: u32) -> GrayBuf {
    GrayBuf { width, height, data: vec![1.0; (width * height) as usize] }
}

/// Render all layers in z-order. Pure in the job: identical jobs yield
/// byte-identical rasters.
pub fn render_document(
    job: &RenderJob,
    fonts: &FontStore,
) -> Result<(RgbaImage, Vec<LayerLog>), ComposeError> {
    let config = job.config;
    let mut canvas = RgbaImage::from_pixel(
        config.canvas.width,
        config.canvas.height,
        Rgba([255, 255, 255, 255]),
    );
    let mut log = Vec::new();

    for layer in config.layers_by_z() {
        let start = std::time::Instant::now();
        let opacity =
            job.opacity_overrides.get(&layer.id).copied().unwrap_or(layer.opacity);
        let op: String = match layer.class {
            LayerClass::StaticDescriptionText => {
                let text = layer.text.as_deref().unwrap_or("");
                render_text_field(&mut canvas, layer, text, fonts, opacity)?;
                format!("static text {text:?}")
            }
            LayerClass::SubjectTextField => match job.subject {
                None => "skipped (empty template)".to_string(),
                Some(subject) => {
                    let binding = config.binding_for(&layer.id).ok_or_else(|| {
                        ComposeError::UnboundField { layer: layer.id.clone() }
                    })?;
                    let text = if binding == FieldAttribute::Mrz {
                        match &job.mrz {
                            Some(m) => format!("{}\n{}", m.line1, m.line2),
                            None => String::new(),
                        }
                    } else {
                        binding.value(subject, &config.date_format).unwrap_or_default()
                    };
                    render_text_field(&mut canvas, layer, &text, fonts, opacity)?;
                    format!("subject field {binding:?}")
                }
            },
            LayerClass::BiometricArea => match job.subject {
                None => "skipped (empty template)".to_string(),
                Some(_) => {
                    let slot = layer
                        .image
                        .as_ref()
                        .and_then(|i| i.slot)
                        .expect("validated biometric layer has a slot");
                    let asset = job.assets.get(slot).ok_or_else(|| {
                        ComposeError::MissingAsset { layer: layer.id.clone(), slot }
                    })?;
                    let sigma = layer
                        .image
                        .as_ref()
                        .and_then(|i| i.edge_blur_sigma)
                        .or(job.edge_blur_sigma)
                        .unwrap_or(config.edge_blur_sigma);
                    place_image(&mut canvas, layer, asset, job, opacity, sigma)?;
                    format!("biometric {slot:?} (sigma {sigma})")
                }
            },
            LayerClass::LogoPattern => {
                let asset = job
                    .logo_assets
                    .get(&layer.id)
                    .expect("validated logo layer has a loaded asset");
                let sigma = layer
                    .image
                    .as_ref()
                    .and_then(|i| i.edge_blur_sigma)
                    .unwrap_or(0.0);
                place_image(&mut canvas, layer, asset, job, opacity, sigma)?;
                "logo/pattern".to_string()
            }
        };
        log.push(LayerLog {
            layer_id: layer.id.clone(),
            class: layer.class.to_string(),
            bounds: layer.bounds,
            op,
            micros: start.elapsed().as_micros() as u64,
        });
    }
    Ok((canvas, log))
}

fn place_image(
    canvas: &mut RgbaImage,
    layer: &LayerSpec,
    asset: &RgbaImage,
    job: &RenderJob,
    opacity: f64,
    sigma: f32,
) -> Result<(), ComposeError> {
    let b = layer.bounds;
    let scaled = if asset.dimensions() == (b.width, b.height) {
        asset.clone()
    } else {
        raster::resize_bilinear(asset, b.width, b.height)
    };
    let mask = match job.masks.get(&layer.id) {
        Some(m) if (m.width, m.height) == (b.width, b.height) => m.clone(),
        Some(m) => raster::resize_gray(m, b.width, b.height),
        None => full_mask(b.width, b.height),
    };
    composite_layer(canvas, &scaled, &mask, opacity, sigma, b, &layer.id)
}

/// Render the empty template: static text and logo layers only, subject
/// layers left as placement slots.
pub fn derive_empty_template(
    config: &CountryConfig,
    fonts: &FontStore,
) -> Result<Template, ComposeError> {
    let job = RenderJob::empty(config)?;
    let (empty, _) = render_document(&job, fonts)?;
    Ok(Template { config: config.clone(), empty })
}

/// Serialize a render log as line-delimited JSON.
pub fn write_render_log(log: &[LayerLog]) -> String {
    let mut out = String::new();
    for entry in log {
        out.push_str(&serde_json::to_string(entry).expect("log serializes"));
        out.push('\n');
    }
    out
}
