//! Synthetic subject records: dictionary loading, seeded generation and
//! record validation.

use crate::template::CountryConfig;
use chrono::{Months, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sex {
    M,
    F,
}

impl fmt::Display for Sex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sex::M => "M",
            Sex::F => "F",
        })
    }
}

/// One synthetic identity, sufficient to render a full document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubjectRecord {
    pub subject_id: u32,
    pub given_name: String,
    pub surname: String,
    pub sex: Sex,
    pub birth_date: NaiveDate,
    pub birth_place: String,
    pub nationality: String,
    pub document_number: String,
    pub issue_date: NaiveDate,
    pub expiry_date: NaiveDate,
    pub issuing_authority: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub personal_number: Option<String>,
    pub face_asset: String,
    pub signature_asset: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fingerprint_asset: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DictionaryCategory {
    GivenMale,
    GivenFemale,
    Surname,
    City,
    Authority,
}

impl DictionaryCategory {
    pub const ALL: [DictionaryCategory; 5] = [
        DictionaryCategory::GivenMale,
        DictionaryCategory::GivenFemale,
        DictionaryCategory::Surname,
        DictionaryCategory::City,
        DictionaryCategory::Authority,
    ];
}

/// Deduplicated, non-empty word list for one category.
#[derive(Debug, Clone)]
pub struct Dictionary {
    pub category: DictionaryCategory,
    pub entries: Vec<String>,
}

impl Dictionary {
    /// One entry per line, UTF-8; blank lines ignored, duplicates dropped
    /// keeping first occurrence.
    pub fn from_lines(category: DictionaryCategory, text: &str) -> Result<Self, SubjectError> {
        let mut seen = HashSet::new();
        let entries: Vec<String> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .filter(|l| seen.insert(l.to_string()))
            .map(str::to_string)
            .collect();
        if entries.is_empty() {
            return Err(SubjectError::EmptyDictionary(category));
        }
        Ok(Self { category, entries })
    }
}

/// The full dictionary set needed by the generator.
#[derive(Debug, Clone)]
pub struct Dictionaries {
    pub given_male: Dictionary,
    pub given_female: Dictionary,
    pub surname: Dictionary,
    pub city: Dictionary,
    pub authority: Dictionary,
}

impl Dictionaries {
    pub fn load(config: &CountryConfig) -> Result<Self, SubjectError> {
        let read = |cat: DictionaryCategory, path: &Path| -> Result<Dictionary, SubjectError> {
            let text = std::fs::read_to_string(path).map_err(|source| {
                SubjectError::DictionaryIo { category: cat, path: path.to_path_buf(), source }
            })?;
            Dictionary::from_lines(cat, &text)
        };
        Ok(Self {
            given_male: read(DictionaryCategory::GivenMale, &config.dictionaries.given_male)?,
            given_female: read(DictionaryCategory::GivenFemale, &config.dictionaries.given_female)?,
            surname: read(DictionaryCategory::Surname, &config.dictionaries.surname)?,
            city: read(DictionaryCategory::City, &config.dictionaries.city)?,
            authority: read(DictionaryCategory::Authority, &config.dictionaries.authority)?,
        })
    }

    /// Digest over all entries, for run receipts.
    pub fn digest(&self) -> String {
        let mut joined = String::new();
        for d in [&self.given_male, &self.given_female, &self.surname, &self.city, &self.authority]
        {
            joined.push_str(&format!("{:?}\n", d.category));
            for e in &d.entries {
                joined.push_str(e);
                joined.push('\n');
            }
        }
        crate::raster::bytes_digest(joined.as_bytes())
    }
}

/// Pools of biometric asset references to assign to subjects.
#[derive(Debug, Clone, Default)]
pub struct AssetPools {
    pub faces: Vec<String>,
    pub signatures: Vec<String>,
    pub fingerprints: Vec<String>,
}

#[derive(Debug, Error)]
pub enum SubjectError {
    #[error("dictionary {0:?} has no entries")]
    EmptyDictionary(DictionaryCategory),
    #[error("cannot read dictionary {category:?} from {path}: {source}")]
    DictionaryIo {
        category: DictionaryCategory,
        path: std::path::PathBuf,
        source: std::io::Error,
    },
    #[error("requested {requested} subjects but the document number pattern only has {space} combinations")]
    NumberSpaceExhausted { requested: u64, space: u64 },
    #[error("asset pool {0} is empty")]
    EmptyAssetPool(&'static str),
    #[error("subject count must be at least 1")]
    ZeroCount,
}

const MIN_AGE_AT_ISSUE: i32 = 18;
const MAX_AGE_AT_ISSUE: i32 = 80;
const ISSUE_WINDOW_DAYS: i64 = 5 * 365;

/// Number of strings matched by a document number pattern ('L' = letter,
/// 'D' = digit, anything else literal). Saturates at u64::MAX.
fn pattern_space(pattern: &str) -> u64 {
    let mut space = 1u64;
    for ch in pattern.chars() {
        let factor = match ch {
            'L' => 26,
            'D' => 10,
            _ => 1,
        };
        space = space.saturating_mul(factor);
    }
    space
}

fn draw_document_number(rng: &mut impl Rng, pattern: &str) -> String {
    pattern
        .chars()
        .map(|ch| match ch {
            'L' => (b'A' + rng.gen_range(0..26u8)) as char,
            'D' => (b'0' + rng.gen_range(0..10u8)) as char,
            literal => literal,
        })
        .collect()
}

/// Per-subject RNG stream: a fixed-width mix of the master seed and the
/// subject id, so generation order does not matter.
fn subject_rng(master_seed: u64, subject_id: u32) -> ChaCha12Rng {
    let mut seed = [0u8; 32];
    seed[..8].copy_from_slice(&master_seed.to_le_bytes());
    seed[8..12].copy_from_slice(&subject_id.to_le_bytes());
    seed[12..20].copy_from_slice(b"subjgen\0");
    ChaCha12Rng::from_seed(seed)
}

fn pick<'a>(rng: &mut impl Rng, entries: &'a [String]) -> &'a str {
    &entries[rng.gen_range(0..entries.len())]
}

/// Generate `n` subject records. Pure in (n, seed, config, dicts, pools):
/// the same inputs always give byte-identical output.
pub fn generate_subjects(
    n: u32,
    seed: u64,
    config: &CountryConfig,
    dicts: &Dictionaries,
    pools: &AssetPools,
) -> Result<Vec<SubjectRecord>, SubjectError> {
    if n == 0 {
        return Err(SubjectError::ZeroCount);
    }
    if pools.faces.is_empty() {
        return Err(SubjectError::EmptyAssetPool("faces"));
    }
    if pools.signatures.is_empty() {
        return Err(SubjectError::EmptyAssetPool("signatures"));
    }
    let space = pattern_space(&config.document_number_pattern);
    // beyond half the space, rejection sampling degenerates
    if u64::from(n) > space / 2 {
        return Err(SubjectError::NumberSpaceExhausted { requested: n.into(), space });
    }

    let reference = config.reference_date;
    let mut records: Vec<SubjectRecord> = (0..n)
        .map(|subject_id| {
            let mut rng = subject_rng(seed, subject_id);
            let sex = if rng.gen_bool(0.5) { Sex::M } else { Sex::F };
            let given = match sex {
                Sex::M => pick(&mut rng, &dicts.given_male.entries),
                Sex::F => pick(&mut rng, &dicts.given_female.entries),
            }
            .to_string();
            let surname = pick(&mut rng, &dicts.surname.entries).to_string();
            let birth_place = pick(&mut rng, &dicts.city.entries).to_string();
            let issuing_authority = pick(&mut rng, &dicts.authority.entries).to_string();

            let issue_date = reference - chrono::Days::new(rng.gen_range(0..ISSUE_WINDOW_DAYS) as u64);
            let age_years = rng.gen_range(MIN_AGE_AT_ISSUE..=MAX_AGE_AT_ISSUE);
            let age_extra_days = rng.gen_range(0..365u64);
            let birth_date = issue_date
                .checked_sub_months(Months::new(12 * age_years as u32))
                .expect("birth date in range")
                - chrono::Days::new(age_extra_days);
            let expiry_date = issue_date
                .checked_add_months(Months::new(12 * config.validity_years))
                .expect("expiry date in range");

            let document_number = draw_document_number(&mut rng, &config.document_number_pattern);
            let face_asset = pools.faces[rng.gen_range(0..pools.faces.len())].clone();
            let signature_asset =
                pools.signatures[rng.gen_range(0..pools.signatures.len())].clone();
            let fingerprint_asset = if pools.fingerprints.is_empty() {
                None
            } else {
                Some(pools.fingerprints[rng.gen_range(0..pools.fingerprints.len())].clone())
            };

            SubjectRecord {
                subject_id,
                given_name: given,
                surname,
                sex,
                birth_date,
                birth_place,
                nationality: config.country_code.clone(),
                document_number,
                issue_date,
                expiry_date,
                issuing_authority,
                personal_number: None,
                face_asset,
                signature_asset,
                fingerprint_asset,
            }
        })
        .collect();

    // uniqueness pass in subject order; each collision redraws from the
    // owning subject's stream continuation
    let mut used: HashSet<String> = HashSet::with_capacity(n as usize);
    for record in &mut records {
        if !used.insert(record.document_number.clone()) {
            let mut seed_bytes = [0u8; 32];
            seed_bytes[..8].copy_from_slice(&seed.to_le_bytes());
            seed_bytes[8..12].copy_from_slice(&record.subject_id.to_le_bytes());
            seed_bytes[12..20].copy_from_slice(b"docretry");
            let mut rng = ChaCha12Rng::from_seed(seed_bytes);
            loop {
                let candidate = draw_document_number(&mut rng, &config.document_number_pattern);
                if used.insert(candidate.clone()) {
                    record.document_number = candidate;
                    break;
                }
            }
        }
    }
    Ok(records)
}

/// One violated record invariant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubjectViolation {
    pub field: String,
    pub message: String,
}

/// Check a record against the config-dependent invariants. Empty report
/// means the record is valid.
pub fn validate_subject(record: &SubjectRecord, config: &CountryConfig) -> Vec<SubjectViolation> {
    let mut report = Vec::new();
    let mut push = |field: &str, message: String| {
        report.push(SubjectViolation { field: field.to_string(), message });
    };
    if record.birth_date >= record.issue_date {
        push("birth_date", format!("birth {} not before issue {}", record.birth_date, record.issue_date));
    }
    if record.issue_date >= record.expiry_date {
        push("expiry_date", format!("expiry {} not after issue {}", record.expiry_date, record.issue_date));
    }
    let expected_expiry = record
        .issue_date
        .checked_add_months(Months::new(12 * config.validity_years))
        .expect("expiry in range");
    if record.expiry_date != expected_expiry {
        push("expiry_date", format!("expiry {} != issue + {} years ({expected_expiry})", record.expiry_date, config.validity_years));
    }
    let adult = record
        .birth_date
        .checked_add_months(Months::new(12 * MIN_AGE_AT_ISSUE as u32))
        .expect("age bound in range");
    if adult > record.issue_date {
        push("birth_date", format!("subject younger than {MIN_AGE_AT_ISSUE} at issue date"));
    }
    if !matches_pattern(&record.document_number, &config.document_number_pattern) {
        push("document_number", format!("{:?} does not match pattern {:?}", record.document_number, config.document_number_pattern));
    }
    report
}

fn matches_pattern(value: &str, pattern: &str) -> bool {
    if value.chars().count() != pattern.chars().count() {
        return false;
    }
    value.chars().zip(pattern.chars()).all(|(v, p)| match p {
        'L' => v.is_ascii_uppercase(),
        'D' => v.is_ascii_digit(),
        literal => v == literal,
    })
}

/// Serialize records as line-delimited JSON, one subject per line, in
/// subject_id order.
pub fn write_manifest(records: &[SubjectRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("record serializes"));
        out.push('\n');
    }
    out
}

/// Parse a line-delimited subject manifest.
pub fn read_manifest(text: &str) -> Result<Vec<SubjectRecord>, serde_json::Error> {
    text.lines().filter(|l| !l.trim().is_empty()).map(serde_json::from_str).collect()
}
