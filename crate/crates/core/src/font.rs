//! Font loading and text layout: left-to-right glyph placement with
//! per-character kerning offsets, optional fixed advance (for the MRZ
//! zone) and parabolic baseline curvature.

use crate::template::{CountryConfig, TextStyle};
use ab_glyph::{Font, FontVec, Glyph, PxScale, ScaleFont};
use std::collections::BTreeMap;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FontError {
    #[error("unknown font family {0:?}")]
    UnknownFamily(String),
    #[error("cannot read font {family:?} from {path}: {message}")]
    Load { family: String, path: PathBuf, message: String },
}

/// Loaded fonts keyed by the family names a config declares.
pub struct FontStore {
    fonts: BTreeMap<String, FontVec>,
}

impl FontStore {
    pub fn load(config: &CountryConfig) -> Result<Self, FontError> {
        let mut fonts = BTreeMap::new();
        for (family, path) in &config.fonts {
            let bytes = std::fs::read(path).map_err(|e| FontError::Load {
                family: family.clone(),
                path: path.clone(),
                message: e.to_string(),
            })?;
            let font = FontVec::try_from_vec(bytes).map_err(|e| FontError::Load {
                family: family.clone(),
                path: path.clone(),
                message: e.to_string(),
            })?;
            fonts.insert(family.clone(), font);
        }
        Ok(Self { fonts })
    }

    pub fn get(&self, family: &str) -> Result<&FontVec, FontError> {
        self.fonts.get(family).ok_or_else(|| FontError::UnknownFamily(family.to_string()))
    }
}

/// One glyph placed on the (pre-rotation) layout plane. `x` is the pen
/// position of the glyph's left edge; `baseline_dy` is the curvature
/// displacement, negative = lifted.
#[derive(Debug, Clone, PartialEq)]
pub struct PlacedGlyph {
    pub ch: char,
    pub x: f32,
    pub baseline_dy: f32,
    pub advance: f32,
}

/// Layout of a single text line before rotation and canvas placement.
#[derive(Debug, Clone, PartialEq)]
pub struct LineLayout {
    pub glyphs: Vec<PlacedGlyph>,
    pub width: f32,
    pub ascent: f32,
    pub descent: f32,
}

#[derive(Debug, Error, PartialEq)]
pub enum LayoutError {
    #[error("kerning_offsets length {offsets} does not match text length {text_len}")]
    KerningLength { offsets: usize, text_len: usize },
}

/// Place one line of glyphs. Kerning offset i shifts glyph i (and all
/// following glyphs) right by that many pixels; curvature lifts each
/// glyph by `c * (x_center - x_mid)^2`.
pub fn layout_line(font: &FontVec, style: &TextStyle, text: &str) -> Result<LineLayout, LayoutError> {
    let chars: Vec<char> = text.chars().collect();
    if !style.kerning_offsets.is_empty() && style.kerning_offsets.len() != chars.len() {
        return Err(LayoutError::KerningLength {
            offsets: style.kerning_offsets.len(),
            text_len: chars.len(),
        });
    }
    let scale = PxScale::from(style.font_size);
    let scaled = font.as_scaled(scale);

    let mut pen_x = 0.0f32;
    let mut glyphs = Vec::with_capacity(chars.len());
    for (i, &ch) in chars.iter().enumerate() {
        if let Some(k) = style.kerning_offsets.get(i) {
            pen_x += k;
        }
        let advance = match style.fixed_advance {
            Some(adv) => adv,
            None => scaled.h_advance(font.glyph_id(ch)),
        };
        glyphs.push(PlacedGlyph { ch, x: pen_x, baseline_dy: 0.0, advance });
        pen_x += advance;
    }
    let width = pen_x;

    // parabolic baseline: displacement grows with distance from the run
    // midpoint; positive curvature lifts the edges
    let x_mid = width / 2.0;
    for g in &mut glyphs {
        let center = g.x + g.advance / 2.0;
        let dx = center - x_mid;
        g.baseline_dy = -style.baseline_curvature * dx * dx;
    }

    Ok(LineLayout { glyphs, width, ascent: scaled.ascent(), descent: -scaled.descent() })
}

/// Alpha raster of a laid-out line, plus the baseline position inside
/// the buffer. Coverage in [0, 1].
pub struct LineRaster {
    pub alpha: crate::raster::GrayBuf,
    /// x of pen origin and y of the straight baseline in buffer coords.
    pub origin: (f32, f32),
}

pub fn rasterize_line(font: &FontVec, style: &TextStyle, layout: &LineLayout) -> LineRaster {
    let scale = PxScale::from(style.font_size);
    // headroom for curvature lift in both directions
    let max_lift = layout.glyphs.iter().map(|g| -g.baseline_dy).fold(0.0f32, f32::max);
    let max_drop = layout.glyphs.iter().map(|g| g.baseline_dy).fold(0.0f32, f32::max);
    let pad = 2.0f32;
    let width = (layout.width + 2.0 * pad).ceil() as u32;
    let height = (layout.ascent + layout.descent + max_lift + max_drop + 2.0 * pad).ceil() as u32;
    let baseline_y = pad + max_lift + layout.ascent;
    let mut alpha = crate::raster::GrayBuf::new(width.max(1), height.max(1));

    for g in &layout.glyphs {
        let glyph: Glyph = font
            .glyph_id(g.ch)
            .with_scale_and_position(scale, ab_glyph::point(pad + g.x, baseline_y + g.baseline_dy));
        if let Some(outlined) = font.outline_glyph(glyph) {
            let bb = outlined.px_bounds();
            outlined.draw(|gx, gy, coverage| {
                let px = bb.min.x as i64 + gx as i64;
                let py = bb.min.y as i64 + gy as i64;
                if px >= 0 && py >= 0 && (px as u32) < alpha.width && (py as u32) < alpha.height {
                    let cur = alpha.get(px as u32, py as u32);
                    alpha.set(px as u32, py as u32, (cur + coverage).min(1.0));
                }
            });
        }
    }
    LineRaster { alpha, origin: (pad, baseline_y) }
}
