//! The five subcommands. Each returns `Ok(())` on success and prints
//! nothing to stdout except its own report; diagnostics go to stderr via
//! the error path in `main`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use image::RgbaImage;
use rayon::prelude::*;

use synthpass_core::compose::{
    derive_empty_template, load_logo_assets, load_masks, render_document, RenderJob, SubjectAssets,
};
use synthpass_core::face::{
    crop_icao, rank_and_select, signature_extract, CropGeometry, LandmarkProvider, Landmarks,
    QualityThresholds, SidecarProvider,
};
use synthpass_core::font::FontStore;
use synthpass_core::metrics::{parse_score_file, PadMetrics};
use synthpass_core::mrz::{build_td3, validate_td3};
use synthpass_core::protocol::{self, Label, ManifestEntry, SplitResult};
use synthpass_core::raster::{bytes_digest, image_digest};
use synthpass_core::subject::{generate_subjects, write_manifest, AssetPools, Dictionaries};
use synthpass_core::template::{load_config, BiometricKind, CountryConfig, LayerClass};

use crate::options::{
    resolve_config_path, scale_config, EvaluateOptions, FilterOptions, GenerateOptions, SplitMode,
    SplitOptions,
};

fn sorted_dir_entries(dir: &Path, keep: impl Fn(&Path) -> bool) -> anyhow::Result<Vec<PathBuf>> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("cannot read directory {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| keep(p))
        .collect();
    entries.sort();
    Ok(entries)
}

fn load_candidates(pool_dir: &Path) -> anyhow::Result<Vec<(PathBuf, RgbaImage, Landmarks)>> {
    let provider = SidecarProvider;
    let images = sorted_dir_entries(pool_dir, |p| {
        p.extension().is_some_and(|e| e == "png")
    })?;
    images
        .into_iter()
        .map(|path| {
            let img = image::open(&path)
                .with_context(|| format!("cannot read {}", path.display()))?
                .to_rgba8();
            let lm = provider.landmarks(&path)?;
            Ok((path, img, lm))
        })
        .collect()
}

/// Best passing portrait of a candidate pool, cropped to the target size.
fn select_portrait(pool_dir: &Path, target: (u32, u32)) -> anyhow::Result<RgbaImage> {
    let candidates = load_candidates(pool_dir)?;
    if candidates.is_empty() {
        bail!("face pool {} has no candidates", pool_dir.display());
    }
    let pairs: Vec<(RgbaImage, Landmarks)> =
        candidates.iter().map(|(_, img, lm)| (img.clone(), lm.clone())).collect();
    let selection = rank_and_select(&pairs, &QualityThresholds::default(), 3)?;
    let best = *selection.selected.first().with_context(|| {
        format!("no candidate in {} passes the quality filter", pool_dir.display())
    })?;
    let (_, img, lm) = &candidates[best];
    Ok(crop_icao(img, lm, target, &CropGeometry::default())?)
}

fn biometric_bounds(config: &CountryConfig, kind: BiometricKind) -> Option<(u32, u32)> {
    config.layers.iter().find_map(|l| {
        (l.class == LayerClass::BiometricArea
            && l.image.as_ref().and_then(|i| i.slot) == Some(kind))
        .then(|| (l.bounds.width, l.bounds.height))
    })
}

#[derive(serde::Serialize)]
struct RunReceipt {
    tool_version: &'static str,
    country: String,
    count: u32,
    seed: u64,
    scale: f64,
    config_path: String,
    config_sha256: String,
    dictionaries_sha256: String,
    subjects_sha256: String,
    manifest_sha256: String,
    /// Digest of each rendered document's raw pixels, by filename.
    images: BTreeMap<String, String>,
}

pub fn cmd_generate(opts: &GenerateOptions) -> anyhow::Result<()> {
    let config_path = resolve_config_path(&opts.config)?;
    let base_config = load_config(&config_path)?;
    let config = if (opts.scale - 1.0).abs() > f64::EPSILON {
        scale_config(&base_config, opts.scale)
    } else {
        base_config
    };
    let config_dir = config_path.parent().unwrap_or_else(|| Path::new("."));
    let faces_dir = opts
        .faces_dir
        .clone()
        .unwrap_or_else(|| config_dir.join("../faces"));
    let signatures_dir = opts
        .signatures_dir
        .clone()
        .unwrap_or_else(|| config_dir.join("../signatures"));

    let face_pools = sorted_dir_entries(&faces_dir, |p| p.is_dir())?;
    let signature_files = sorted_dir_entries(&signatures_dir, |p| {
        p.extension().is_some_and(|e| e == "png")
    })?;
    let name_of = |p: &Path| p.file_name().unwrap().to_string_lossy().to_string();
    let pools = AssetPools {
        faces: face_pools.iter().map(|p| name_of(p)).collect(),
        signatures: signature_files.iter().map(|p| name_of(p)).collect(),
        fingerprints: Vec::new(),
    };

    let dicts = Dictionaries::load(&config)?;
    let subjects = generate_subjects(opts.count, opts.seed, &config, &dicts, &pools)?;

    let photo_target = biometric_bounds(&config, BiometricKind::Face)
        .context("config has no face biometric layer")?;
    let mut portraits: BTreeMap<String, RgbaImage> = BTreeMap::new();
    for pool in &face_pools {
        portraits.insert(name_of(pool), select_portrait(pool, photo_target)?);
    }
    let mut signatures: BTreeMap<String, RgbaImage> = BTreeMap::new();
    for file in &signature_files {
        let img = image::open(file)
            .with_context(|| format!("cannot read {}", file.display()))?
            .to_rgba8();
        signatures.insert(name_of(file), signature_extract(&img)?.rgba);
    }

    let fonts = FontStore::load(&config)?;
    let logo_assets = load_logo_assets(&config)?;
    let masks = load_masks(&config)?;
    let images_dir = opts.out.join("images");
    fs::create_dir_all(&images_dir)
        .with_context(|| format!("cannot create {}", images_dir.display()))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .context("cannot build worker pool")?;
    let mut results: Vec<(u32, String, String)> = pool.install(|| {
        subjects
            .par_iter()
            .map(|subject| {
                let mrz = build_td3(subject)
                    .with_context(|| format!("subject {}", subject.subject_id))?;
                let violations = validate_td3(&mrz.line1, &mrz.line2);
                if !violations.is_empty() {
                    bail!("subject {}: invalid MRZ: {violations:?}", subject.subject_id);
                }
                let job = RenderJob {
                    config: &config,
                    subject: Some(subject),
                    mrz: Some(mrz),
                    assets: SubjectAssets {
                        face: portraits.get(&subject.face_asset).cloned(),
                        signature: signatures.get(&subject.signature_asset).cloned(),
                        fingerprint: None,
                    },
                    logo_assets: logo_assets.clone(),
                    masks: masks.clone(),
                    opacity_overrides: BTreeMap::new(),
                    edge_blur_sigma: None,
                    seed: opts.seed,
                };
                let (canvas, _) = render_document(&job, &fonts)
                    .with_context(|| format!("subject {}", subject.subject_id))?;
                let filename =
                    format!("{}_{:05}.png", config.country_code.to_lowercase(), subject.subject_id);
                canvas
                    .save(images_dir.join(&filename))
                    .with_context(|| format!("cannot write {filename}"))?;
                Ok((subject.subject_id, filename, image_digest(&canvas)))
            })
            .collect::<anyhow::Result<Vec<_>>>()
    })?;
    results.sort_by_key(|(id, _, _)| *id);

    let subjects_text = write_manifest(&subjects);
    fs::write(opts.out.join("subjects.jsonl"), &subjects_text)?;

    let manifest: Vec<ManifestEntry> = results
        .iter()
        .map(|(id, filename, _)| ManifestEntry {
            path: format!("images/{filename}"),
            country: config.country_code.clone(),
            subject_id: *id,
            label: Label::Bonafide,
            pai: None,
        })
        .collect();
    let manifest_text = protocol::write_manifest_csv(&manifest);
    fs::write(opts.out.join("manifest.csv"), &manifest_text)?;

    let config_bytes = fs::read(&config_path)?;
    let receipt = RunReceipt {
        tool_version: env!("CARGO_PKG_VERSION"),
        country: config.country_code.clone(),
        count: opts.count,
        seed: opts.seed,
        scale: opts.scale,
        config_path: config_path.display().to_string(),
        config_sha256: bytes_digest(&config_bytes),
        dictionaries_sha256: dicts.digest(),
        subjects_sha256: bytes_digest(subjects_text.as_bytes()),
        manifest_sha256: bytes_digest(manifest_text.as_bytes()),
        images: results.into_iter().map(|(_, f, d)| (f, d)).collect(),
    };
    let receipt_text = serde_json::to_string_pretty(&receipt)?;
    fs::write(opts.out.join("run_receipt.json"), receipt_text)?;
    Ok(())
}

pub fn cmd_filter(opts: &FilterOptions) -> anyhow::Result<()> {
    let pools = sorted_dir_entries(&opts.faces_dir, |p| p.is_dir())?;
    if pools.is_empty() {
        bail!("no candidate pools under {}", opts.faces_dir.display());
    }
    let mut report = serde_json::Map::new();
    for pool in &pools {
        let candidates = load_candidates(pool)?;
        let pairs: Vec<(RgbaImage, Landmarks)> =
            candidates.iter().map(|(_, img, lm)| (img.clone(), lm.clone())).collect();
        let selection = rank_and_select(&pairs, &QualityThresholds::default(), opts.keep)?;
        let names: Vec<String> = candidates
            .iter()
            .map(|(p, _, _)| p.file_name().unwrap().to_string_lossy().to_string())
            .collect();
        let mut entry = serde_json::Map::new();
        entry.insert(
            "selected".into(),
            serde_json::json!(selection.selected.iter().map(|&i| &names[i]).collect::<Vec<_>>()),
        );
        entry.insert("shortfall".into(), serde_json::json!(selection.shortfall));
        let reports: serde_json::Map<String, serde_json::Value> = names
            .iter()
            .zip(&selection.reports)
            .map(|(name, r)| (name.clone(), serde_json::to_value(r).unwrap()))
            .collect();
        entry.insert("reports".into(), reports.into());
        report.insert(
            pool.file_name().unwrap().to_string_lossy().to_string(),
            entry.into(),
        );
    }
    let text = serde_json::to_string_pretty(&serde_json::Value::Object(report))?;
    fs::write(&opts.out, text)
        .with_context(|| format!("cannot write {}", opts.out.display()))?;
    Ok(())
}

fn write_split(out: &Path, result: &SplitResult) -> anyhow::Result<()> {
    fs::create_dir_all(out)?;
    for (name, entries) in [
        ("train.csv", &result.train),
        ("validation.csv", &result.validation),
        ("test.csv", &result.test),
        ("excluded.csv", &result.excluded),
    ] {
        fs::write(out.join(name), protocol::write_manifest_csv(entries))?;
    }
    Ok(())
}

pub fn cmd_split(opts: &SplitOptions) -> anyhow::Result<()> {
    let text = fs::read_to_string(&opts.manifest)
        .with_context(|| format!("cannot read {}", opts.manifest.display()))?;
    let entries = protocol::read_manifest_csv(&text)?;
    let result = match opts.mode {
        SplitMode::Intra => protocol::split_intra(&entries, opts.ratios, opts.seed)?,
        SplitMode::Loo => {
            let country = opts
                .test_country
                .as_deref()
                .context("--test-country is required for loo splits")?;
            let pai = opts.test_pai.context("--test-pai is required for loo splits")?;
            protocol::split_loo(&entries, country, pai, opts.val_fraction, opts.seed)?
        }
    };
    write_split(&opts.out, &result)
}

fn finite_or_string(v: f64) -> serde_json::Value {
    if v.is_finite() {
        serde_json::json!(v)
    } else {
        serde_json::json!(v.to_string())
    }
}

fn report_json(metrics: &PadMetrics) -> serde_json::Value {
    serde_json::json!({
        "eer": metrics.eer,
        "eer_threshold": finite_or_string(metrics.eer_threshold),
        "bpcer_at_apcer": metrics.bpcer_at_apcer.iter().map(|p| serde_json::json!({
            "apcer_level": p.apcer_level,
            "bpcer": p.bpcer,
            "threshold": finite_or_string(p.threshold),
            "attainable": p.attainable,
        })).collect::<Vec<_>>(),
        "apcer_per_pai": metrics.apcer_per_pai.iter()
            .map(|(pai, v)| (pai.to_string(), serde_json::json!(v)))
            .collect::<serde_json::Map<_, _>>(),
    })
}

fn report_text(metrics: &PadMetrics) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "EER               {:6.2}%  (threshold {:.6})\n",
        metrics.eer * 100.0,
        metrics.eer_threshold
    ));
    for p in &metrics.bpcer_at_apcer {
        let name = format!("BPCER{}", (1.0 / p.apcer_level).round() as u32);
        out.push_str(&format!(
            "{name:<12} {:10.2}%  (threshold {}{})\n",
            p.bpcer * 100.0,
            p.threshold,
            if p.attainable { "" } else { ", level below APCER resolution" }
        ));
    }
    out.push_str("APCER at the EER threshold, per instrument:\n");
    for (pai, v) in &metrics.apcer_per_pai {
        out.push_str(&format!("  {pai:<8} {:6.2}%\n", v * 100.0));
    }
    out
}

pub fn cmd_evaluate(opts: &EvaluateOptions) -> anyhow::Result<()> {
    let text = fs::read_to_string(&opts.scores)
        .with_context(|| format!("cannot read {}", opts.scores.display()))?;
    let set = parse_score_file(&text)?;
    let metrics = set.summarize(opts.selector)?;

    fs::create_dir_all(&opts.out)?;
    let json = serde_json::to_string_pretty(&report_json(&metrics))?;
    fs::write(opts.out.join("report.json"), json)?;
    let report = report_text(&metrics);
    fs::write(opts.out.join("report.txt"), &report)?;

    let mut det = String::from("apcer,bpcer,threshold\n");
    for p in &metrics.det_points {
        det.push_str(&format!("{},{},{}\n", p.apcer, p.bpcer, p.threshold));
    }
    fs::write(opts.out.join("det.csv"), det)?;

    print!("{report}");
    Ok(())
}

pub fn cmd_inspect(config_arg: &Path, render_empty: Option<&Path>) -> anyhow::Result<()> {
    let config_path = resolve_config_path(config_arg)?;
    let config = load_config(&config_path)?;
    println!("config       {}", config_path.display());
    println!("country      {}", config.country_code);
    println!(
        "canvas       {}x{} @ {} dpi",
        config.canvas.width, config.canvas.height, config.canvas.dpi
    );
    println!("number form  {}", config.document_number_pattern);
    let mut counts: BTreeMap<LayerClass, usize> = BTreeMap::new();
    for layer in &config.layers {
        *counts.entry(layer.class).or_insert(0) += 1;
    }
    for (class, n) in &counts {
        println!("  {n:>3} x {class}");
    }
    println!("layers (z-order):");
    for layer in config.layers_by_z() {
        let binding = config
            .binding_for(&layer.id)
            .map(|a| format!("  <- {a:?}"))
            .unwrap_or_default();
        println!(
            "  z={:>3}  {:<28} {:<24} {}x{}+{}+{}{binding}",
            layer.z_order,
            layer.id,
            layer.class.to_string(),
            layer.bounds.width,
            layer.bounds.height,
            layer.bounds.x,
            layer.bounds.y,
        );
    }
    if let Some(out) = render_empty {
        let fonts = FontStore::load(&config)?;
        let template = derive_empty_template(&config, &fonts)?;
        template.empty.save(out)?;
        println!("empty template written to {} ({})", out.display(), image_digest(&template.empty));
    }
    Ok(())
}
