//! Dataset manifests and the two evaluation splits: subject-disjoint
//! intra-dataset (60/20/20 by default) and leave-one-country-out with
//! per-instrument attack selection.

use crate::metrics::Pai;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Bonafide,
    Attack,
}

/// One dataset image with its provenance and class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub country: String,
    pub subject_id: u32,
    pub label: Label,
    /// `None` iff label is bona fide.
    pub pai: Option<Pai>,
}

impl ManifestEntry {
    pub fn is_consistent(&self) -> bool {
        matches!(
            (self.label, self.pai),
            (Label::Bonafide, None) | (Label::Attack, Some(_))
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SplitResult {
    pub train: Vec<ManifestEntry>,
    pub validation: Vec<ManifestEntry>,
    pub test: Vec<ManifestEntry>,
    /// Entries deliberately left out (LOO: non-test-PAI attacks of the
    /// test country). Empty for intra splits.
    pub excluded: Vec<ManifestEntry>,
}

#[derive(Debug, Error, PartialEq)]
pub enum ProtocolError {
    #[error("manifest is empty")]
    EmptyManifest,
    #[error("split ratios must be positive and sum to 1, got {0:?}")]
    BadRatios([f64; 3]),
    #[error("need at least 3 subjects for a 3-way split, have {0}")]
    TooFewSubjects(usize),
    #[error("inconsistent label/pai on entry {0:?}")]
    InconsistentEntry(String),
    #[error("test country {0:?} not present in manifest")]
    TestCountryAbsent(String),
    #[error("no country other than {0:?} in manifest")]
    NoTrainingCountry(String),
    #[error("LOO test set is empty")]
    EmptyTestSet,
    #[error("validation fraction must be in (0, 1), got {0}")]
    BadValFraction(f64),
    #[error("manifest line {line}: {message}")]
    Parse { line: usize, message: String },
}

fn check_entries(manifest: &[ManifestEntry]) -> Result<(), ProtocolError> {
    if manifest.is_empty() {
        return Err(ProtocolError::EmptyManifest);
    }
    for e in manifest {
        if !e.is_consistent() {
            return Err(ProtocolError::InconsistentEntry(e.path.clone()));
        }
    }
    Ok(())
}

/// Group entries by (country, subject) keeping first-seen group order.
fn subject_groups(manifest: &[ManifestEntry]) -> Vec<((String, u32), Vec<ManifestEntry>)> {
    let mut groups: BTreeMap<(String, u32), Vec<ManifestEntry>> = BTreeMap::new();
    for e in manifest {
        groups.entry((e.country.clone(), e.subject_id)).or_default().push(e.clone());
    }
    groups.into_iter().collect()
}

/// Partition sizes: floor of each share, leftovers first to empty
/// partitions, then by largest fractional remainder.
fn allocate(n: usize, ratios: [f64; 3]) -> [usize; 3] {
    let exact: Vec<f64> = ratios.iter().map(|r| r * n as f64).collect();
    let mut sizes: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut leftover = n - sizes.iter().sum::<usize>();
    // non-empty partitions first
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| {
        (sizes[a] > 0)
            .cmp(&(sizes[b] > 0))
            .then_with(|| {
                let ra = exact[a] - sizes[a] as f64;
                let rb = exact[b] - sizes[b] as f64;
                rb.partial_cmp(&ra).expect("finite remainders")
            })
    });
    for &i in &order {
        if leftover == 0 {
            break;
        }
        sizes[i] += 1;
        leftover -= 1;
    }
    [sizes[0], sizes[1], sizes[2]]
}

/// Subject-disjoint intra-dataset split. All of a subject's images travel
/// together; group assignment is a deterministic function of the seed.
pub fn split_intra(
    manifest: &[ManifestEntry],
    ratios: [f64; 3],
    seed: u64,
) -> Result<SplitResult, ProtocolError> {
    check_entries(manifest)?;
    let sum: f64 = ratios.iter().sum();
    if ratios.iter().any(|&r| r <= 0.0) || (sum - 1.0).abs() > 1e-9 {
        return Err(ProtocolError::BadRatios(ratios));
    }
    let mut groups = subject_groups(manifest);
    if groups.len() < 3 {
        return Err(ProtocolError::TooFewSubjects(groups.len()));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    groups.shuffle(&mut rng);
    let [n_train, n_val, _] = allocate(groups.len(), ratios);
    let mut result = SplitResult::default();
    for (i, (_, entries)) in groups.into_iter().enumerate() {
        let bucket = if i < n_train {
            &mut result.train
        } else if i < n_train + n_val {
            &mut result.validation
        } else {
            &mut result.test
        };
        bucket.extend(entries);
    }
    Ok(result)
}

/// Leave-one-country-out split. The test set is the held-out country's
/// bona fide images plus only the requested attack instrument; that
/// country's other attacks go to `excluded`. The remaining countries are
/// split subject-disjointly into train and validation.
pub fn split_loo(
    manifest: &[ManifestEntry],
    test_country: &str,
    test_pai: Pai,
    val_fraction: f64,
    seed: u64,
) -> Result<SplitResult, ProtocolError> {
    check_entries(manifest)?;
    if !(0.0..1.0).contains(&val_fraction) || val_fraction == 0.0 {
        return Err(ProtocolError::BadValFraction(val_fraction));
    }
    let countries: BTreeSet<&str> = manifest.iter().map(|e| e.country.as_str()).collect();
    if !countries.contains(test_country) {
        return Err(ProtocolError::TestCountryAbsent(test_country.to_string()));
    }
    if countries.len() < 2 {
        return Err(ProtocolError::NoTrainingCountry(test_country.to_string()));
    }

    let mut result = SplitResult::default();
    let mut rest = Vec::new();
    for e in manifest {
        if e.country == test_country {
            match e.pai {
                None => result.test.push(e.clone()),
                Some(p) if p == test_pai => result.test.push(e.clone()),
                Some(_) => result.excluded.push(e.clone()),
            }
        } else {
            rest.push(e.clone());
        }
    }
    if result.test.is_empty() {
        return Err(ProtocolError::EmptyTestSet);
    }

    let mut groups = subject_groups(&rest);
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    groups.shuffle(&mut rng);
    let n_val = ((groups.len() as f64 * val_fraction).round() as usize)
        .clamp(1, groups.len().saturating_sub(1).max(1));
    for (i, (_, entries)) in groups.into_iter().enumerate() {
        if i < n_val {
            result.validation.extend(entries);
        } else {
            result.train.extend(entries);
        }
    }
    Ok(result)
}

const HEADER: &str = "path,country,subject_id,label,pai";

/// Manifest CSV: header `path,country,subject_id,label,pai`.
pub fn write_manifest_csv(entries: &[ManifestEntry]) -> String {
    let mut out = String::from(HEADER);
    out.push('\n');
    for e in entries {
        let label = match e.label {
            Label::Bonafide => "bonafide",
            Label::Attack => "attack",
        };
        let pai = match e.pai {
            None => "none".to_string(),
            Some(p) => p.to_string(),
        };
        out.push_str(&format!("{},{},{},{},{}\n", e.path, e.country, e.subject_id, label, pai));
    }
    out
}

pub fn read_manifest_csv(text: &str) -> Result<Vec<ManifestEntry>, ProtocolError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == HEADER => {}
        Some((_, h)) => {
            return Err(ProtocolError::Parse {
                line: 1,
                message: format!("expected header {HEADER:?}, got {:?}", h.trim()),
            })
        }
        None => return Err(ProtocolError::Parse { line: 1, message: "empty file".into() }),
    }
    let mut entries = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 {
            return Err(ProtocolError::Parse {
                line: line_no,
                message: format!("expected 5 fields, got {}", f.len()),
            });
        }
        let subject_id = f[2].trim().parse().map_err(|e| ProtocolError::Parse {
            line: line_no,
            message: format!("bad subject_id: {e}"),
        })?;
        let (label, pai) = match (f[3].trim(), f[4].trim()) {
            ("bonafide", "none") => (Label::Bonafide, None),
            ("attack", "print") => (Label::Attack, Some(Pai::Print)),
            ("attack", "screen") => (Label::Attack, Some(Pai::Screen)),
            (l, p) => {
                return Err(ProtocolError::Parse {
                    line: line_no,
                    message: format!("inconsistent label/pai ({l:?}, {p:?})"),
                })
            }
        };
        entries.push(ManifestEntry {
            path: f[0].trim().to_string(),
            country: f[1].trim().to_string(),
            subject_id,
            label,
            pai,
        });
    }
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(country: &str, subject: u32, pai: Option<Pai>) -> ManifestEntry {
        let tag = match pai {
            None => "bf",
            Some(Pai::Print) => "print",
            Some(Pai::Screen) => "screen",
        };
        ManifestEntry {
            path: format!("{country}/{subject:05}_{tag}.png"),
            country: country.to_string(),
            subject_id: subject,
            label: if pai.is_some() { Label::Attack } else { Label::Bonafide },
            pai,
        }
    }

    /// 3 countries x `subjects` x {bonafide, print, screen}.
    fn synthetic_manifest(subjects: u32) -> Vec<ManifestEntry> {
        let mut m = Vec::new();
        for country in ["POL", "ESP", "PRT"] {
            for s in 0..subjects {
                m.push(entry(country, s, None));
                m.push(entry(country, s, Some(Pai::Print)));
                m.push(entry(country, s, Some(Pai::Screen)));
            }
        }
        m
    }

    fn subject_key(e: &ManifestEntry) -> (String, u32) {
        (e.country.clone(), e.subject_id)
    }

    #[test]
    fn intra_split_exact_sizes() {
        let manifest = synthetic_manifest(1000); // 9000 entries, 3000 groups
        let split = split_intra(&manifest, [0.6, 0.2, 0.2], 42).unwrap();
        assert_eq!(split.train.len(), 5400);
        assert_eq!(split.validation.len(), 1800);
        assert_eq!(split.test.len(), 1800);
        assert!(split.excluded.is_empty());
    }

    #[test]
    fn intra_split_is_subject_disjoint_and_complete() {
        let manifest = synthetic_manifest(17);
        let split = split_intra(&manifest, [0.6, 0.2, 0.2], 7).unwrap();
        let train: BTreeSet<_> = split.train.iter().map(subject_key).collect();
        let val: BTreeSet<_> = split.validation.iter().map(subject_key).collect();
        let test: BTreeSet<_> = split.test.iter().map(subject_key).collect();
        assert!(train.is_disjoint(&val));
        assert!(train.is_disjoint(&test));
        assert!(val.is_disjoint(&test));
        let mut all: Vec<_> = split
            .train
            .iter()
            .chain(&split.validation)
            .chain(&split.test)
            .map(|e| e.path.clone())
            .collect();
        all.sort();
        let mut orig: Vec<_> = manifest.iter().map(|e| e.path.clone()).collect();
        orig.sort();
        assert_eq!(all, orig);
    }

    #[test]
    fn three_subjects_go_one_each() {
        let manifest: Vec<_> = (0..3).map(|s| entry("POL", s, None)).collect();
        let split = split_intra(&manifest, [0.6, 0.2, 0.2], 1).unwrap();
        assert_eq!(split.train.len(), 1);
        assert_eq!(split.validation.len(), 1);
        assert_eq!(split.test.len(), 1);
    }

    #[test]
    fn too_few_subjects_errors() {
        let manifest: Vec<_> = (0..2).map(|s| entry("POL", s, None)).collect();
        assert_eq!(
            split_intra(&manifest, [0.6, 0.2, 0.2], 1),
            Err(ProtocolError::TooFewSubjects(2))
        );
    }

    #[test]
    fn intra_split_deterministic() {
        let manifest = synthetic_manifest(20);
        let a = split_intra(&manifest, [0.6, 0.2, 0.2], 99).unwrap();
        let b = split_intra(&manifest, [0.6, 0.2, 0.2], 99).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn loo_filters_test_country_pai() {
        let manifest = synthetic_manifest(1000);
        let split = split_loo(&manifest, "POL", Pai::Print, 0.25, 3).unwrap();
        assert_eq!(split.test.len(), 2000); // 1000 bona fide + 1000 print
        assert!(split.test.iter().all(|e| e.country == "POL"));
        assert!(split.test.iter().all(|e| e.pai != Some(Pai::Screen)));
        assert_eq!(split.excluded.len(), 1000); // Poland screen attacks
        assert!(split.excluded.iter().all(|e| e.pai == Some(Pai::Screen)));
        assert!(split.train.iter().chain(&split.validation).all(|e| e.country != "POL"));
    }

    #[test]
    fn loo_single_country_errors() {
        let manifest: Vec<_> = (0..5).map(|s| entry("POL", s, None)).collect();
        assert_eq!(
            split_loo(&manifest, "POL", Pai::Print, 0.25, 3),
            Err(ProtocolError::NoTrainingCountry("POL".to_string()))
        );
    }

    #[test]
    fn loo_absent_country_errors() {
        let manifest = synthetic_manifest(4);
        assert_eq!(
            split_loo(&manifest, "DEU", Pai::Print, 0.25, 3),
            Err(ProtocolError::TestCountryAbsent("DEU".to_string()))
        );
    }

    #[test]
    fn manifest_csv_round_trip() {
        let manifest = synthetic_manifest(3);
        let text = write_manifest_csv(&manifest);
        assert_eq!(read_manifest_csv(&text).unwrap(), manifest);
    }
}
