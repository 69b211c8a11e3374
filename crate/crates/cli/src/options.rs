//! Option structs shared by the binary and the integration tests, plus
//! config path resolution and resolution scaling.

use std::path::{Path, PathBuf};

use synthpass_core::metrics::{Pai, PaiSelector};
use synthpass_core::template::CountryConfig;

use crate::CONFIG_DIR_ENV;

#[derive(Debug, Clone)]
pub struct GenerateOptions {
    pub config: PathBuf,
    pub count: u32,
    pub seed: u64,
    pub out: PathBuf,
    /// 0 lets the thread pool pick; any other value fixes the pool size.
    pub workers: usize,
    /// Canvas scale factor; 0.5 renders at half resolution.
    pub scale: f64,
    /// Directory of per-subject face candidate pools; defaults to
    /// `<config dir>/../faces`.
    pub faces_dir: Option<PathBuf>,
    /// Directory of signature scans; defaults to
    /// `<config dir>/../signatures`.
    pub signatures_dir: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct FilterOptions {
    pub faces_dir: PathBuf,
    pub out: PathBuf,
    pub keep: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitMode {
    Intra,
    Loo,
}

#[derive(Debug, Clone)]
pub struct SplitOptions {
    pub manifest: PathBuf,
    pub mode: SplitMode,
    pub seed: u64,
    pub out: PathBuf,
    pub ratios: [f64; 3],
    pub test_country: Option<String>,
    pub test_pai: Option<Pai>,
    pub val_fraction: f64,
}

#[derive(Debug, Clone)]
pub struct EvaluateOptions {
    pub scores: PathBuf,
    pub out: PathBuf,
    pub selector: PaiSelector,
}

/// Resolve a config argument: an existing path is used as-is, a directory
/// gains `config.toml`, and otherwise the argument is looked up under
/// `$SYNTHPASS_CONFIG_DIR`.
pub fn resolve_config_path(arg: &Path) -> anyhow::Result<PathBuf> {
    let candidates = {
        let mut c = vec![arg.to_path_buf()];
        if let Ok(base) = std::env::var(CONFIG_DIR_ENV) {
            c.push(Path::new(&base).join(arg));
        }
        c
    };
    for candidate in &candidates {
        if candidate.is_dir() {
            let with_file = candidate.join("config.toml");
            if with_file.is_file() {
                return Ok(with_file);
            }
        }
        if candidate.is_file() {
            return Ok(candidate.clone());
        }
    }
    anyhow::bail!(
        "config {:?} not found (also tried ${})",
        arg,
        CONFIG_DIR_ENV
    )
}

fn scale_u32(v: u32, s: f64) -> u32 {
    ((v as f64 * s).round() as u32).max(1)
}

/// Uniformly rescale a validated config: canvas, layer bounds, font
/// metrics and blur radii all shrink or grow together so the layout keeps
/// its proportions.
pub fn scale_config(config: &CountryConfig, s: f64) -> CountryConfig {
    assert!(s > 0.0, "scale must be positive");
    let mut scaled = config.clone();
    scaled.canvas.width = scale_u32(scaled.canvas.width, s);
    scaled.canvas.height = scale_u32(scaled.canvas.height, s);
    scaled.canvas.dpi = scale_u32(scaled.canvas.dpi, s);
    scaled.edge_blur_sigma = (scaled.edge_blur_sigma as f64 * s) as f32;
    for layer in &mut scaled.layers {
        let b = &mut layer.bounds;
        b.x = (b.x as f64 * s).round() as u32;
        b.y = (b.y as f64 * s).round() as u32;
        b.width = scale_u32(b.width, s);
        b.height = scale_u32(b.height, s);
        if let Some(style) = &mut layer.text_style {
            style.font_size = (style.font_size as f64 * s) as f32;
            if let Some(adv) = &mut style.fixed_advance {
                *adv = (*adv as f64 * s) as f32;
            }
            for k in &mut style.kerning_offsets {
                *k = (*k as f64 * s) as f32;
            }
        }
        if let Some(image) = &mut layer.image {
            if let Some(sigma) = &mut image.edge_blur_sigma {
                *sigma = (*sigma as f64 * s) as f32;
            }
        }
    }
    scaled
}
