//! ICAO 9303 TD3 machine-readable zone: check digits, name encoding,
//! transliteration and two-line encode/validate.

use crate::subject::{Sex, SubjectRecord};
use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const LINE_LEN: usize = 44;
pub const NAME_FIELD_LEN: usize = 39;
const CHECK_WEIGHTS: [u32; 3] = [7, 3, 1];

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MrzError {
    #[error("illegal MRZ character {ch:?} at position {position}")]
    IllegalCharacter { ch: char, position: usize },
    #[error("no transliteration for character {0:?}")]
    Untransliterable(char),
    #[error("document number {0:?} exceeds 9 characters after encoding")]
    DocumentNumberTooLong(String),
    #[error("name component is empty")]
    EmptyName,
}

/// Two 44-character TD3 lines.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MrzTd3 {
    pub line1: String,
    pub line2: String,
}

/// Value of one MRZ character under the 9303 mapping: digits keep their
/// face value, A=10..Z=35, filler '<' is 0.
fn char_value(ch: char, position: usize) -> Result<u32, MrzError> {
    match ch {
        '0'..='9' => Ok(ch as u32 - '0' as u32),
        'A'..='Z' => Ok(ch as u32 - 'A' as u32 + 10),
        '<' => Ok(0),
        _ => Err(MrzError::IllegalCharacter { ch, position }),
    }
}

/// 7-3-1 weighted check digit of an MRZ-alphabet field.
pub fn check_digit(field: &str) -> Result<u8, MrzError> {
    let mut sum = 0u32;
    for (i, ch) in field.chars().enumerate() {
        sum += char_value(ch, i)? * CHECK_WEIGHTS[i % 3];
    }
    Ok((sum % 10) as u8)
}

/// ICAO 9303 Latin transliteration subset covering the Polish, Spanish and
/// Portuguese alphabets. Unknown non-ASCII characters are errors.
fn transliterate_char(ch: char) -> Result<&'static str, MrzError> {
    Ok(match ch {
        'A'..='Z' => return Ok(ASCII_UPPER[(ch as u8 - b'A') as usize]),
        // Polish
        'Ą' => "A",
        'Ć' => "C",
        'Ę' => "E",
        'Ł' => "L",
        'Ń' => "N",
        'Ś' => "S",
        'Ź' | 'Ż' => "Z",
        // Spanish / Portuguese vowel diacritics and consonants
        'Á' | 'À' | 'Â' | 'Ã' | 'Ä' => "A",
        'É' | 'È' | 'Ê' => "E",
        'Í' | 'Ì' => "I",
        'Ó' | 'Ò' | 'Ô' | 'Õ' | 'Ö' => "O",
        'Ú' | 'Ù' | 'Ü' => "U",
        'Ñ' => "N",
        'Ç' => "C",
        _ => return Err(MrzError::Untransliterable(ch)),
    })
}

static ASCII_UPPER: [&str; 26] = [
    "A", "B", "C", "D", "E", "F", "G", "H", "I", "J", "K", "L", "M", "N", "O", "P", "Q", "R", "S",
    "T", "U", "V", "W", "X", "Y", "Z",
];

/// Map one name to its MRZ component form: uppercase, transliterated,
/// spaces and hyphens become single fillers.
fn encode_name_component(name: &str) -> Result<String, MrzError> {
    if name.trim().is_empty() {
        return Err(MrzError::EmptyName);
    }
    let mut out = String::new();
    for ch in name.trim().chars() {
        match ch {
            ' ' | '-' => out.push('<'),
            '\'' => {} // apostrophes are omitted
            _ => {
                for up in ch.to_uppercase() {
                    out.push_str(transliterate_char(up)?);
                }
            }
        }
    }
    Ok(out)
}

/// Outcome of name-field encoding; truncation is in-contract and flagged.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedName {
    pub field: String,
    pub truncated: bool,
}

/// Build the 39-character TD3 name field: surname, '<<', given names,
/// right-padded with fillers and truncated at 39.
pub fn encode_name(surname: &str, given: &str) -> Result<EncodedName, MrzError> {
    let mut field = encode_name_component(surname)?;
    field.push_str("<<");
    field.push_str(&encode_name_component(given)?);
    let truncated = field.len() > NAME_FIELD_LEN;
    field.truncate(NAME_FIELD_LEN);
    while field.len() < NAME_FIELD_LEN {
        field.push('<');
    }
    Ok(EncodedName { field, truncated })
}

fn encode_date(date: NaiveDate) -> String {
    format!("{:02}{:02}{:02}", date.year() % 100, date.month(), date.day())
}

fn pad_field(value: &str, len: usize) -> String {
    let mut s: String = value.chars().take(len).collect();
    while s.len() < len {
        s.push('<');
    }
    s
}

/// Encode a subject record as a TD3 MRZ. The issuing state and nationality
/// both come from the record's nationality code.
pub fn build_td3(record: &SubjectRecord) -> Result<MrzTd3, MrzError> {
    let name = encode_name(&record.surname, &record.given_name)?;
    let mut line1 = String::with_capacity(LINE_LEN);
    line1.push_str("P<");
    line1.push_str(&pad_field(&record.nationality, 3));
    line1.push_str(&name.field);
    debug_assert_eq!(line1.len(), LINE_LEN);

    if record.document_number.len() > 9 {
        return Err(MrzError::DocumentNumberTooLong(record.document_number.clone()));
    }
    for ch in record.document_number.chars() {
        if !matches!(ch, 'A'..='Z' | '0'..='9') {
            return Err(MrzError::Untransliterable(ch));
        }
    }
    let doc = pad_field(&record.document_number, 9);
    let birth = encode_date(record.birth_date);
    let expiry = encode_date(record.expiry_date);
    let personal = pad_field(record.personal_number.as_deref().unwrap_or(""), 14);
    let sex = match record.sex {
        Sex::M => 'M',
        Sex::F => 'F',
    };

    let mut line2 = String::with_capacity(LINE_LEN);
    line2.push_str(&doc);
    line2.push(char::from(b'0' + check_digit(&doc)?));
    line2.push_str(&pad_field(&record.nationality, 3));
    line2.push_str(&birth);
    line2.push(char::from(b'0' + check_digit(&birth)?));
    line2.push(sex);
    line2.push_str(&expiry);
    line2.push(char::from(b'0' + check_digit(&expiry)?));
    line2.push_str(&personal);
    line2.push(char::from(b'0' + check_digit(&personal)?));
    // composite: document number + cd, birth + cd, expiry + cd,
    // personal number + cd (line2 positions 1-10, 14-20, 22-43)
    let composite_input: String = [&line2[0..10], &line2[13..20], &line2[21..43]].concat();
    line2.push(char::from(b'0' + check_digit(&composite_input)?));
    debug_assert_eq!(line2.len(), LINE_LEN);

    Ok(MrzTd3 { line1, line2 })
}

/// One validation finding from `validate_td3`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum MrzViolation {
    LineLength { line: u8, actual: usize },
    Alphabet { line: u8, position: usize, ch: char },
    DocumentTypeNotP,
    CheckDigit { field: &'static str, expected: u8, actual: char },
}

impl std::fmt::Display for MrzViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MrzViolation::LineLength { line, actual } => {
                write!(f, "line {line} has length {actual}, expected {LINE_LEN}")
            }
            MrzViolation::Alphabet { line, position, ch } => {
                write!(f, "line {line} position {position}: illegal character {ch:?}")
            }
            MrzViolation::DocumentTypeNotP => write!(f, "line 1 must start with 'P'"),
            MrzViolation::CheckDigit { field, expected, actual } => {
                write!(f, "{field} check digit is {actual:?}, expected {expected}")
            }
        }
    }
}

/// Structural and check-digit validation of two MRZ lines.
pub fn validate_td3(line1: &str, line2: &str) -> Vec<MrzViolation> {
    let mut violations = Vec::new();
    for (idx, line) in [(1u8, line1), (2u8, line2)] {
        if line.chars().count() != LINE_LEN {
            violations.push(MrzViolation::LineLength { line: idx, actual: line.chars().count() });
        }
        for (pos, ch) in line.chars().enumerate() {
            if !matches!(ch, 'A'..='Z' | '0'..='9' | '<') {
                violations.push(MrzViolation::Alphabet { line: idx, position: pos + 1, ch });
            }
        }
    }
    if !violations.is_empty() {
        return violations;
    }
    if !line1.starts_with('P') {
        violations.push(MrzViolation::DocumentTypeNotP);
    }

    let mut check = |field: &'static str, data: &str, cd_char: char| {
        let expected = check_digit(data).expect("alphabet already validated");
        if cd_char != char::from(b'0' + expected) {
            violations.push(MrzViolation::CheckDigit { field, expected, actual: cd_char });
        }
    };
    let at = |s: &str, i: usize| s.as_bytes()[i] as char;
    check("document number", &line2[0..9], at(line2, 9));
    check("birth date", &line2[13..19], at(line2, 19));
    check("expiry date", &line2[21..27], at(line2, 27));
    check("personal number", &line2[28..42], at(line2, 42));
    let composite: String = [&line2[0..10], &line2[13..20], &line2[21..43]].concat();
    check("composite", &composite, at(line2, 43));
    violations
}
