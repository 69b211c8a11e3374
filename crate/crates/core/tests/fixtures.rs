//! End-to-end checks against the committed fixture corpus: country
//! configs, face candidates with landmark sidecars, signature scans and
//! a classifier score file with independently computed reference values.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use synthpass_core::compose::{derive_empty_template, render_document, RenderJob, SubjectAssets};
use synthpass_core::face::{
    blur_rgba, crop_icao, rank_and_select, sharpness, signature_extract, CropGeometry,
    LandmarkProvider, Landmarks, QualityThresholds, SidecarProvider,
};
use synthpass_core::font::FontStore;
use synthpass_core::metrics::{parse_score_file, Pai, PaiSelector};
use synthpass_core::mrz::{build_td3, validate_td3};
use synthpass_core::raster::image_digest;
use synthpass_core::subject::{generate_subjects, AssetPools, Dictionaries};
use synthpass_core::template::{load_config, LayerClass};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn face_candidates(subject: u32) -> Vec<(image::RgbaImage, Landmarks)> {
    let dir = fixtures().join(format!("faces/subj{subject:03}"));
    let provider = SidecarProvider;
    (1..=6)
        .map(|i| {
            let path = dir.join(format!("cand{i}.png"));
            let img = image::open(&path).unwrap().to_rgba8();
            let lm = provider.landmarks(&path).unwrap();
            (img, lm)
        })
        .collect()
}

#[test]
fn country_configs_load_with_expected_layer_classes() {
    for country in ["pol", "esp", "prt"] {
        let config = load_config(&fixtures().join(country).join("config.toml")).unwrap();
        let count = |class: LayerClass| {
            config.layers.iter().filter(|l| l.class == class).count()
        };
        assert_eq!(count(LayerClass::SubjectTextField), 9, "{country}");
        assert_eq!(count(LayerClass::StaticDescriptionText), 1, "{country}");
        assert_eq!(count(LayerClass::LogoPattern), 2, "{country}");
        assert_eq!(count(LayerClass::BiometricArea), 2, "{country}");
        assert_eq!(config.field_bindings.len(), 9, "{country}");
    }
}

#[test]
fn empty_template_is_deterministic() {
    let config = load_config(&fixtures().join("pol/config.toml")).unwrap();
    let fonts = FontStore::load(&config).unwrap();
    let a = derive_empty_template(&config, &fonts).unwrap();
    let b = derive_empty_template(&config, &fonts).unwrap();
    assert_eq!(image_digest(&a.empty), image_digest(&b.empty));

    let job = RenderJob::empty(&config).unwrap();
    let (canvas, log) = render_document(&job, &fonts).unwrap();
    assert_eq!(image_digest(&canvas), image_digest(&a.empty));
    assert_eq!(log.len(), config.layers.len());
}

#[test]
fn full_document_render_round_trip() {
    let config = load_config(&fixtures().join("pol/config.toml")).unwrap();
    let fonts = FontStore::load(&config).unwrap();
    let dicts = Dictionaries::load(&config).unwrap();
    let pools = AssetPools {
        faces: (1..=5).map(|i| format!("subj{i:03}")).collect(),
        signatures: (1..=5).map(|i| format!("sig{i:02}.png")).collect(),
        fingerprints: Vec::new(),
    };
    let subjects = generate_subjects(5, 99, &config, &dicts, &pools).unwrap();

    let thresholds = QualityThresholds::default();
    let empty = derive_empty_template(&config, &fonts).unwrap();
    let mut digests = Vec::new();
    for subject in &subjects {
        let mrz = build_td3(subject).unwrap();
        assert!(validate_td3(&mrz.line1, &mrz.line2).is_empty(), "{subject:?}");

        let subj_no: u32 = subject.face_asset[4..].parse().unwrap();
        let candidates = face_candidates(subj_no);
        let selection = rank_and_select(&candidates, &thresholds, 3).unwrap();
        assert!(!selection.shortfall);
        let best = &candidates[selection.selected[0]];
        let portrait = crop_icao(&best.0, &best.1, (320, 400), &CropGeometry::default()).unwrap();

        let sig_img = image::open(fixtures().join("signatures").join(&subject.signature_asset))
            .unwrap()
            .to_rgba8();
        let cutout = signature_extract(&sig_img).unwrap();

        let job = RenderJob {
            config: &config,
            subject: Some(subject),
            mrz: Some(mrz),
            assets: SubjectAssets {
                face: Some(portrait),
                signature: Some(cutout.rgba),
                fingerprint: None,
            },
            logo_assets: synthpass_core::compose::load_logo_assets(&config).unwrap(),
            masks: synthpass_core::compose::load_masks(&config).unwrap(),
            opacity_overrides: BTreeMap::new(),
            edge_blur_sigma: None,
            seed: 99,
        };
        let (canvas, _) = render_document(&job, &fonts).unwrap();
        assert_ne!(image_digest(&canvas), image_digest(&empty.empty));
        digests.push(image_digest(&canvas));

        let (again, _) = render_document(&job, &fonts).unwrap();
        assert_eq!(image_digest(&again), *digests.last().unwrap());
    }
    let unique: std::collections::HashSet<_> = digests.iter().collect();
    assert_eq!(unique.len(), digests.len(), "documents must differ per subject");
}

#[test]
fn face_selection_keeps_top_three_sharpest() {
    let thresholds = QualityThresholds::default();
    for subject in 1..=5 {
        let candidates = face_candidates(subject);
        let selection = rank_and_select(&candidates, &thresholds, 3).unwrap();
        // candidates 1-3 carry the strongest high-frequency texture
        assert_eq!(selection.selected, vec![0, 1, 2], "subject {subject}");
        assert!(!selection.shortfall);
        assert!(!selection.reports[4].sharpness.pass, "cand5 is defocused");
        assert!(selection.reports[4].bbox_resolution.pass);
        assert!(!selection.reports[5].eye_margin.pass, "cand6 hugs the frame edge");
        let sharp: Vec<f64> = selection.reports[..4].iter().map(|r| r.rank_score).collect();
        for pair in sharp.windows(2) {
            assert!(pair[0] > pair[1], "sharpness must decrease: {sharp:?}");
        }
    }
}

#[test]
fn blurring_a_passing_image_lowers_sharpness() {
    let candidates = face_candidates(1);
    for (img, lm) in &candidates[..4] {
        let before = sharpness(img, &lm.face_bbox);
        let after = sharpness(&blur_rgba(img, 2.0), &lm.face_bbox);
        assert!(after < before, "blur must lower sharpness ({before} -> {after})");
    }
}

#[test]
fn signature_foreground_counts_match_reference() {
    let dir = fixtures().join("signatures");
    let reference: BTreeMap<String, u64> =
        serde_json::from_str(&std::fs::read_to_string(dir.join("reference_counts.json")).unwrap())
            .unwrap();
    assert_eq!(reference.len(), 5);
    for (name, expected) in reference {
        let img = image::open(dir.join(&name)).unwrap().to_rgba8();
        let cutout = signature_extract(&img).unwrap();
        assert_eq!(cutout.foreground_pixels as u64, expected, "{name}");
    }
}

#[derive(serde::Deserialize)]
struct Golden {
    eer: f64,
    eer_threshold: f64,
    bpcer10: f64,
    bpcer20: f64,
    bpcer100: f64,
    apcer_per_pai: BTreeMap<String, f64>,
}

#[test]
fn score_fixture_reproduces_reference_metrics() {
    let dir = fixtures().join("scores");
    let text = std::fs::read_to_string(dir.join("classifier_scores.csv")).unwrap();
    let golden: Golden =
        serde_json::from_str(&std::fs::read_to_string(dir.join("golden_metrics.json")).unwrap())
            .unwrap();
    let set = parse_score_file(&text).unwrap();
    let metrics = set.summarize(PaiSelector::WorstCase).unwrap();

    let close = |a: f64, b: f64, what: &str| {
        assert!((a - b).abs() < 1e-9, "{what}: {a} vs {b}");
    };
    close(metrics.eer, golden.eer, "eer");
    close(metrics.eer_threshold, golden.eer_threshold, "eer_threshold");
    close(metrics.bpcer_at_apcer[0].bpcer, golden.bpcer10, "bpcer10");
    close(metrics.bpcer_at_apcer[1].bpcer, golden.bpcer20, "bpcer20");
    close(metrics.bpcer_at_apcer[2].bpcer, golden.bpcer100, "bpcer100");
    for p in metrics.bpcer_at_apcer {
        assert!(p.attainable, "200 attacks per instrument resolve all levels");
    }
    close(metrics.apcer_per_pai[&Pai::Print], golden.apcer_per_pai["print"], "apcer print");
    close(metrics.apcer_per_pai[&Pai::Screen], golden.apcer_per_pai["screen"], "apcer screen");
}
