//! Document templates as classified layer stacks, loaded from a
//! per-country TOML configuration file.
//!
//! The configuration schema (see `fixtures/pol/config.toml` for a full
//! example):
//!
//! ```toml
//! schema_version = 1
//! country_code = "POL"
//! document_number_pattern = "LLDDDDDDD"   # L = letter, D = digit
//! validity_years = 10
//! reference_date = "2025-06-01"
//!
//! [canvas]
//! width = 1240
//! height = 874
//! dpi = 300                               # defaults to 600
//!
//! [fonts]
//! sans = "fonts/DejaVuSans.ttf"
//!
//! [dictionaries]
//! given_male = "dicts/given_male.txt"
//! # ... given_female, surname, city, authority
//!
//! [field_bindings]
//! surname = "surname_field"
//! mrz = "mrz_field"
//!
//! [[layers]]
//! id = "surname_field"
//! class = "subject_text_field"
//! z_order = 30
//! bounds = { x = 420, y = 180, width = 420, height = 40 }
//! opacity = 1.0
//! [layers.text_style]
//! font_family = "sans"
//! font_size = 24.0
//! color = [20, 20, 60, 255]
//! ```
//!
//! All asset, font and dictionary paths are resolved relative to the
//! directory containing the config file.

use crate::raster::Rect;
use crate::subject::SubjectRecord;
use chrono::NaiveDate;
use image::RgbaImage;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_DPI: u32 = 600;

/// The four canonical layer classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerClass {
    StaticDescriptionText,
    SubjectTextField,
    BiometricArea,
    LogoPattern,
}

impl fmt::Display for LayerClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LayerClass::StaticDescriptionText => "static_description_text",
            LayerClass::SubjectTextField => "subject_text_field",
            LayerClass::BiometricArea => "biometric_area",
            LayerClass::LogoPattern => "logo_pattern",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Alignment {
    #[default]
    Left,
    Center,
    Right,
}

/// Text rendering attributes for one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextStyle {
    pub font_family: String,
    pub font_size: f32,
    /// Extra per-character horizontal offsets in pixels; empty means
    /// uniform spacing from font metrics.
    #[serde(default)]
    pub kerning_offsets: Vec<f32>,
    /// Whole-run rotation in degrees, counter-clockwise.
    #[serde(default)]
    pub rotation: f32,
    /// Baseline curvature coefficient (1/pixels); each glyph is lifted
    /// by `c * (x - x_mid)^2`, 0 keeps the baseline straight.
    #[serde(default)]
    pub baseline_curvature: f32,
    #[serde(default = "default_color")]
    pub color: [u8; 4],
    #[serde(default)]
    pub alignment: Alignment,
    /// Fixed advance in pixels instead of per-glyph metrics (used for
    /// the OCR-style MRZ zone).
    #[serde(default)]
    pub fixed_advance: Option<f32>,
    /// Extra line spacing factor for multi-line content.
    #[serde(default = "default_line_spacing")]
    pub line_spacing: f32,
}

fn default_color() -> [u8; 4] {
    [0, 0, 0, 255]
}

fn default_line_spacing() -> f32 {
    1.2
}

/// Which subject asset fills a biometric slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiometricKind {
    Face,
    Signature,
    Fingerprint,
}

/// Image placement parameters for logo and biometric layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImagePlacement {
    /// Asset path (logo/pattern layers).
    #[serde(default)]
    pub asset: Option<PathBuf>,
    /// Subject asset slot (biometric layers).
    #[serde(default)]
    pub slot: Option<BiometricKind>,
    /// Edge blur sigma in pixels applied to the layer mask; defaults to
    /// the job-level setting when absent.
    #[serde(default)]
    pub edge_blur_sigma: Option<f32>,
}

/// Subject attributes a text layer can bind to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldAttribute {
    Surname,
    GivenName,
    Sex,
    BirthDate,
    BirthPlace,
    Nationality,
    DocumentNumber,
    IssueDate,
    ExpiryDate,
    IssuingAuthority,
    PersonalNumber,
    Mrz,
}

impl FieldAttribute {
    /// Text value of this attribute for a record; MRZ is rendered from
    /// the separately encoded lines and returns None here.
    pub fn value(&self, record: &SubjectRecord, date_format: &str) -> Option<String> {
        let date = |d: NaiveDate| d.format(date_format).to_string();
        Some(match self {
            FieldAttribute::Surname => record.surname.clone(),
            FieldAttribute::GivenName => record.given_name.clone(),
            FieldAttribute::Sex => record.sex.to_string(),
            FieldAttribute::BirthDate => date(record.birth_date),
            FieldAttribute::BirthPlace => record.birth_place.clone(),
            FieldAttribute::Nationality => record.nationality.clone(),
            FieldAttribute::DocumentNumber => record.document_number.clone(),
            FieldAttribute::IssueDate => date(record.issue_date),
            FieldAttribute::ExpiryDate => date(record.expiry_date),
            FieldAttribute::IssuingAuthority => record.issuing_authority.clone(),
            FieldAttribute::PersonalNumber => record.personal_number.clone().unwrap_or_default(),
            FieldAttribute::Mrz => return None,
        })
    }
}

/// One classified template layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub id: String,
    pub class: LayerClass,
    pub z_order: i32,
    pub bounds: Rect,
    #[serde(default)]
    pub mask_ref: Option<PathBuf>,
    #[serde(default = "default_opacity")]
    pub opacity: f64,
    /// Literal content for static text layers.
    #[serde(default)]
    pub text: Option<String>,
    /// Text attributes (text classes).
    #[serde(rename = "text_style", alias = "style", default)]
    pub text_style: Option<TextStyle>,
    /// Image placement (image classes).
    #[serde(default)]
    pub image: Option<ImagePlacement>,
}

fn default_opacity() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Canvas {
    pub width: u32,
    pub height: u32,
    #[serde(default = "default_dpi")]
    pub dpi: u32,
}

fn default_dpi() -> u32 {
    DEFAULT_DPI
}

impl Canvas {
    pub fn rect(&self) -> Rect {
        Rect::new(0, 0, self.width, self.height)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DictionaryPaths {
    pub given_male: PathBuf,
    pub given_female: PathBuf,
    pub surname: PathBuf,
    pub city: PathBuf,
    pub authority: PathBuf,
}

/// Validated country configuration with all paths resolved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountryConfig {
    pub schema_version: u32,
    pub country_code: String,
    pub canvas: Canvas,
    pub document_number_pattern: String,
    #[serde(default = "default_validity")]
    pub validity_years: u32,
    /// "Today" for date sampling; fixed in the config so generation is
    /// reproducible.
    pub reference_date: NaiveDate,
    #[serde(default = "default_date_format")]
    pub date_format: String,
    pub fonts: BTreeMap<String, PathBuf>,
    pub dictionaries: DictionaryPaths,
    pub layers: Vec<LayerSpec>,
    pub field_bindings: BTreeMap<FieldAttribute, String>,
    pub mrz_layer_id: String,
    /// Default edge blur for biometric layer masks, in pixels.
    #[serde(default = "default_edge_blur")]
    pub edge_blur_sigma: f32,
}

fn default_validity() -> u32 {
    10
}

fn default_date_format() -> String {
    "%d.%m.%Y".to_string()
}

fn default_edge_blur() -> f32 {
    1.5
}

impl CountryConfig {
    pub fn layer(&self, id: &str) -> Option<&LayerSpec> {
        self.layers.iter().find(|l| l.id == id)
    }

    /// Layers sorted by z_order ascending.
    pub fn layers_by_z(&self) -> Vec<&LayerSpec> {
        let mut layers: Vec<&LayerSpec> = self.layers.iter().collect();
        layers.sort_by_key(|l| l.z_order);
        layers
    }

    /// Binding attribute for a subject text layer, if any.
    pub fn binding_for(&self, layer_id: &str) -> Option<FieldAttribute> {
        self.field_bindings.iter().find(|(_, id)| id.as_str() == layer_id).map(|(a, _)| *a)
    }
}

/// One template invariant violation, named after the offending layer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateViolation {
    pub layer_id: String,
    pub message: String,
}

impl fmt::Display for TemplateViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "layer {:?}: {}", self.layer_id, self.message)
    }
}

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot parse config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("unsupported schema_version {found} (expected {SCHEMA_VERSION})")]
    SchemaVersion { found: u32 },
    #[error("invalid config: {}", format_violations(.0))]
    Invalid(Vec<TemplateViolation>),
}

fn format_violations(violations: &[TemplateViolation]) -> String {
    violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}

/// Load and validate a country configuration. Every referenced path is
/// resolved relative to the config file's directory and checked for
/// existence.
pub fn load_config(path: &Path) -> Result<CountryConfig, TemplateError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| TemplateError::Io { path: path.to_path_buf(), source })?;
    let mut config: CountryConfig = toml::from_str(&text)
        .map_err(|e| TemplateError::Parse { path: path.to_path_buf(), message: e.to_string() })?;
    if config.schema_version != SCHEMA_VERSION {
        return Err(TemplateError::SchemaVersion { found: config.schema_version });
    }
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    resolve_paths(&mut config, base);
    let violations = validate_config(&config);
    if violations.is_empty() {
        Ok(config)
    } else {
        Err(TemplateError::Invalid(violations))
    }
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&p);
    }
}

fn resolve_paths(config: &mut CountryConfig, base: &Path) {
    for font in config.fonts.values_mut() {
        resolve(base, font);
    }
    let d = &mut config.dictionaries;
    for p in [&mut d.given_male, &mut d.given_female, &mut d.surname, &mut d.city, &mut d.authority]
    {
        resolve(base, p);
    }
    for layer in &mut config.layers {
        if let Some(mask) = &mut layer.mask_ref {
            resolve(base, mask);
        }
        if let Some(image) = &mut layer.image {
            if let Some(asset) = &mut image.asset {
                resolve(base, asset);
            }
        }
    }
}

/// All semantic checks over a parsed config: bounds, z-order uniqueness,
/// opacity range, class/params consistency, bindings and asset
/// existence. Empty report means the template is render-ready.
pub fn validate_config(config: &CountryConfig) -> Vec<TemplateViolation> {
    let mut report = Vec::new();
    let mut violation = |layer_id: &str, message: String| {
        report.push(TemplateViolation { layer_id: layer_id.to_string(), message });
    };
    let canvas = config.canvas.rect();

    let mut by_z: BTreeMap<i32, Vec<&str>> = BTreeMap::new();
    for layer in &config.layers {
        by_z.entry(layer.z_order).or_default().push(&layer.id);

        let b = layer.bounds;
        if b.width == 0 || b.height == 0 {
            violation(&layer.id, "bounds have zero area".into());
        } else if b.right() > canvas.right() || b.bottom() > canvas.bottom() {
            violation(
                &layer.id,
                format!(
                    "bounds {}x{}+{}+{} exceed canvas {}x{}",
                    b.width, b.height, b.x, b.y, canvas.width, canvas.height
                ),
            );
        }
        if !(0.0..=1.0).contains(&layer.opacity) {
            violation(&layer.id, format!("opacity {} outside [0, 1]", layer.opacity));
        }
        match layer.class {
            LayerClass::StaticDescriptionText => {
                if layer.text.as_deref().unwrap_or("").is_empty() {
                    violation(&layer.id, "static text layer has no text".into());
                }
                if layer.text_style.is_none() {
                    violation(&layer.id, "text layer missing [layers.text_style]".into());
                }
            }
            LayerClass::SubjectTextField => {
                if layer.text_style.is_none() {
                    violation(&layer.id, "text layer missing [layers.text_style]".into());
                }
            }
            LayerClass::BiometricArea => match &layer.image {
                Some(p) if p.slot.is_some() => {}
                _ => violation(&layer.id, "biometric layer needs [layers.image] with a slot".into()),
            },
            LayerClass::LogoPattern => match &layer.image {
                Some(p) if p.asset.is_some() => {}
                _ => violation(&layer.id, "logo layer needs [layers.image] with an asset".into()),
            },
        }
        if let Some(style) = &layer.text_style {
            if !style.kerning_offsets.is_empty() {
                // length is checked against the rendered string at render
                // time; here only the static case is checkable
                if let Some(text) = &layer.text {
                    if style.kerning_offsets.len() != text.chars().count() {
                        violation(
                            &layer.id,
                            format!(
                                "kerning_offsets length {} != text length {}",
                                style.kerning_offsets.len(),
                                text.chars().count()
                            ),
                        );
                    }
                }
            }
            if !config.fonts.contains_key(&style.font_family) {
                violation(&layer.id, format!("unknown font family {:?}", style.font_family));
            }
        }
        if let Some(mask) = &layer.mask_ref {
            if !mask.exists() {
                violation(&layer.id, format!("missing mask asset {}", mask.display()));
            }
        }
        if let Some(image) = &layer.image {
            if let Some(asset) = &image.asset {
                if !asset.exists() {
                    violation(&layer.id, format!("missing image asset {}", asset.display()));
                }
            }
        }
    }
    for (z, ids) in &by_z {
        if ids.len() > 1 {
            report.push(TemplateViolation {
                layer_id: ids.join(", "),
                message: format!("duplicate z_order {z} shared by layers {ids:?}"),
            });
        }
    }

    // bindings: every subject text layer bound exactly once, every
    // binding target exists and has the right class
    let mut bound_counts: BTreeMap<&str, usize> = BTreeMap::new();
    for (attr, layer_id) in &config.field_bindings {
        *bound_counts.entry(layer_id.as_str()).or_default() += 1;
        match config.layer(layer_id) {
            None => report.push(TemplateViolation {
                layer_id: layer_id.clone(),
                message: format!("binding {attr:?} points at a missing layer"),
            }),
            Some(l) if l.class != LayerClass::SubjectTextField => report.push(TemplateViolation {
                layer_id: layer_id.clone(),
                message: format!("binding {attr:?} targets a {} layer", l.class),
            }),
            Some(_) => {}
        }
    }
    for layer in &config.layers {
        if layer.class == LayerClass::SubjectTextField {
            match bound_counts.get(layer.id.as_str()) {
                None => report.push(TemplateViolation {
                    layer_id: layer.id.clone(),
                    message: "subject text layer has no field binding".into(),
                }),
                Some(1) => {}
                Some(n) => report.push(TemplateViolation {
                    layer_id: layer.id.clone(),
                    message: format!("subject text layer bound {n} times"),
                }),
            }
        }
    }
    match config.layer(&config.mrz_layer_id) {
        None => report.push(TemplateViolation {
            layer_id: config.mrz_layer_id.clone(),
            message: "mrz_layer_id references a missing layer".into(),
        }),
        Some(l) if l.class != LayerClass::SubjectTextField => report.push(TemplateViolation {
            layer_id: config.mrz_layer_id.clone(),
            message: "mrz layer must be a subject text field".into(),
        }),
        Some(_) => {}
    }
    for (name, font) in &config.fonts {
        if !font.exists() {
            report.push(TemplateViolation {
                layer_id: String::new(),
                message: format!("font {name:?} missing at {}", font.display()),
            });
        }
    }
    report
}

/// A render-ready template: the validated config plus the rendered empty
/// document (static text and logo layers only). Immutable once built.
#[derive(Debug, Clone)]
pub struct Template {
    pub config: CountryConfig,
    /// Rendered canvas with subject-specific layers left empty.
    pub empty: RgbaImage,
}

impl Template {
    /// Count of layers per class; classes partition the stack.
    pub fn class_counts(&self) -> BTreeMap<LayerClass, usize> {
        let mut counts = BTreeMap::new();
        for layer in &self.config.layers {
            *counts.entry(layer.class).or_insert(0) += 1;
        }
        counts
    }

    /// Subject and biometric layers awaiting content.
    pub fn slot_layers(&self) -> Vec<&LayerSpec> {
        self.config
            .layers
            .iter()
            .filter(|l| {
                matches!(l.class, LayerClass::SubjectTextField | LayerClass::BiometricArea)
            })
            .collect()
    }
}

// derive_empty_template lives in the compositor (it is a rendering
// operation) and is re-exported here next to the other template ops.
pub use crate::compose::derive_empty_template;
