//! ISO/IEC 30107-3 detection metrics over labeled score sets: APCER per
//! attack instrument, BPCER, DET-curve data, EER and fixed operating
//! points (BPCER10/20/100).
//!
//! Decision rule: a presentation is classified as an attack when its
//! score is `>= threshold` (ties decide attack). Scores are normalized at
//! parse time so that higher always means more attack-like.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

/// Presentation attack instrument species.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pai {
    Print,
    Screen,
}

impl fmt::Display for Pai {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pai::Print => "print",
            Pai::Screen => "screen",
        })
    }
}

/// APCER target: one instrument or the worst case across all present.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PaiSelector {
    Single(Pai),
    WorstCase,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreEntry {
    pub score: f64,
    /// `None` for bona fide, `Some(pai)` for attacks.
    pub pai: Option<Pai>,
}

impl ScoreEntry {
    pub fn is_attack(&self) -> bool {
        self.pai.is_some()
    }
}

/// Immutable labeled score set with "higher score means attack" polarity.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSet {
    entries: Vec<ScoreEntry>,
}

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("score set is empty")]
    Empty,
    #[error("no attack entries with PAI {0}")]
    NoSuchPai(Pai),
    #[error("score set needs both bona fide and attack entries")]
    SingleClass,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// One DET operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetPoint {
    pub apcer: f64,
    pub bpcer: f64,
    pub threshold: f64,
}

/// BPCER at a fixed APCER level, with attainability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub apcer_level: f64,
    pub bpcer: f64,
    pub threshold: f64,
    /// False when no threshold reaches an APCER <= level (too few attacks).
    pub attainable: bool,
}

/// Full metrics bundle produced by `summarize`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PadMetrics {
    pub eer: f64,
    pub eer_threshold: f64,
    pub bpcer_at_apcer: Vec<OperatingPoint>,
    pub apcer_per_pai: BTreeMap<Pai, f64>,
    pub det_points: Vec<DetPoint>,
}

impl ScoreSet {
    pub fn new(entries: Vec<ScoreEntry>) -> Result<Self, MetricsError> {
        if entries.is_empty() {
            return Err(MetricsError::Empty);
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[ScoreEntry] {
        &self.entries
    }

    pub fn bona_fide_count(&self) -> usize {
        self.entries.iter().filter(|e| !e.is_attack()).count()
    }

    pub fn attack_count(&self, pai: Pai) -> usize {
        self.entries.iter().filter(|e| e.pai == Some(pai)).count()
    }

    /// PAIs present in the set, sorted.
    pub fn pais(&self) -> Vec<Pai> {
        let mut pais: Vec<Pai> = self.entries.iter().filter_map(|e| e.pai).collect();
        pais.sort();
        pais.dedup();
        pais
    }

    fn require_both_classes(&self) -> Result<(), MetricsError> {
        let attacks = self.entries.iter().filter(|e| e.is_attack()).count();
        if attacks == 0 || attacks == self.entries.len() {
            return Err(MetricsError::SingleClass);
        }
        Ok(())
    }

    /// APCER for one instrument at a threshold: the fraction of that
    /// instrument's attacks NOT classified as attacks.
    pub fn apcer(&self, pai: Pai, threshold: f64) -> Result<f64, MetricsError> {
        let scores: Vec<f64> =
            self.entries.iter().filter(|e| e.pai == Some(pai)).map(|e| e.score).collect();
        if scores.is_empty() {
            return Err(MetricsError::NoSuchPai(pai));
        }
        let detected = scores.iter().filter(|&&s| s >= threshold).count();
        Ok(1.0 - detected as f64 / scores.len() as f64)
    }

    /// Worst-case APCER: the maximum over all instruments present.
    pub fn apcer_worst(&self, threshold: f64) -> Result<f64, MetricsError> {
        let pais = self.pais();
        if pais.is_empty() {
            return Err(MetricsError::SingleClass);
        }
        let mut worst = 0.0f64;
        for pai in pais {
            worst = worst.max(self.apcer(pai, threshold)?);
        }
        Ok(worst)
    }

    fn apcer_for(&self, sel: PaiSelector, threshold: f64) -> Result<f64, MetricsError> {
        match sel {
            PaiSelector::Single(pai) => self.apcer(pai, threshold),
            PaiSelector::WorstCase => self.apcer_worst(threshold),
        }
    }

    /// BPCER at a threshold: bona fide presentations classified as attack.
    pub fn bpcer(&self, threshold: f64) -> Result<f64, MetricsError> {
        let scores: Vec<f64> =
            self.entries.iter().filter(|e| !e.is_attack()).map(|e| e.score).collect();
        if scores.is_empty() {
            return Err(MetricsError::SingleClass);
        }
        let rejected = scores.iter().filter(|&&s| s >= threshold).count();
        Ok(rejected as f64 / scores.len() as f64)
    }

    /// Candidate thresholds: -inf, midpoints between consecutive distinct
    /// scores, +inf. Sweeping these visits every achievable operating point.
    fn thresholds(&self) -> Vec<f64> {
        let mut scores: Vec<f64> = self.entries.iter().map(|e| e.score).collect();
        scores.sort_by(|a, b| a.partial_cmp(b).expect("scores are finite"));
        scores.dedup();
        let mut ts = Vec::with_capacity(scores.len() + 1);
        ts.push(f64::NEG_INFINITY);
        for pair in scores.windows(2) {
            ts.push((pair[0] + pair[1]) / 2.0);
        }
        ts.push(f64::INFINITY);
        ts
    }

    /// DET curve: one point per candidate threshold, ordered by ascending
    /// threshold (APCER non-decreasing, BPCER non-increasing).
    pub fn det_curve(&self, sel: PaiSelector) -> Result<Vec<DetPoint>, MetricsError> {
        self.require_both_classes()?;
        self.thresholds()
            .into_iter()
            .map(|t| {
                Ok(DetPoint { apcer: self.apcer_for(sel, t)?, bpcer: self.bpcer(t)?, threshold: t })
            })
            .collect()
    }

    /// Equal error rate on the DET polyline, linearly interpolated when no
    /// threshold hits APCER == BPCER exactly. Returns (rate, threshold).
    pub fn eer(&self, sel: PaiSelector) -> Result<(f64, f64), MetricsError> {
        let points = self.det_curve(sel)?;
        // diff = bpcer - apcer runs from >= 0 down to <= 0 along the sweep
        for pair in points.windows(2) {
            let (p1, p2) = (pair[0], pair[1]);
            let d1 = p1.bpcer - p1.apcer;
            let d2 = p2.bpcer - p2.apcer;
            if d1 == 0.0 {
                return Ok((p1.apcer, p1.threshold));
            }
            if d1 > 0.0 && d2 <= 0.0 {
                if d2 == 0.0 {
                    return Ok((p2.apcer, p2.threshold));
                }
                let frac = d1 / (d1 - d2);
                let rate = p1.apcer + frac * (p2.apcer - p1.apcer);
                let threshold = if p1.threshold.is_finite() && p2.threshold.is_finite() {
                    p1.threshold + frac * (p2.threshold - p1.threshold)
                } else if p2.threshold.is_finite() {
                    p2.threshold
                } else {
                    p1.threshold
                };
                return Ok((rate, threshold));
            }
        }
        let last = points.last().expect("curve non-empty");
        Ok((last.apcer.max(last.bpcer), last.threshold))
    }

    /// BPCER at each requested APCER level: pick the threshold with the
    /// largest APCER still <= level and report BPCER there. The
    /// attainability flag clears when the attack sample count is too
    /// small for the APCER grid to resolve the level (step 1/N > level).
    pub fn bpcer_at_apcer(
        &self,
        sel: PaiSelector,
        levels: &[f64],
    ) -> Result<Vec<OperatingPoint>, MetricsError> {
        let points = self.det_curve(sel)?;
        let grid_step = match sel {
            PaiSelector::Single(pai) => 1.0 / self.attack_count(pai).max(1) as f64,
            PaiSelector::WorstCase => {
                let min_count =
                    self.pais().iter().map(|&p| self.attack_count(p)).min().unwrap_or(0);
                1.0 / min_count.max(1) as f64
            }
        };
        let mut out = Vec::with_capacity(levels.len());
        for &level in levels {
            let p = points
                .iter()
                .filter(|p| p.apcer <= level)
                .max_by(|a, b| a.apcer.partial_cmp(&b.apcer).expect("rates are finite"))
                .expect("apcer 0 is always achievable");
            out.push(OperatingPoint {
                apcer_level: level,
                bpcer: p.bpcer,
                threshold: p.threshold,
                attainable: grid_step <= level,
            });
        }
        Ok(out)
    }

    /// Standard report: worst-case EER and operating points plus per-PAI
    /// APCER at the EER threshold.
    pub fn summarize(&self, sel: PaiSelector) -> Result<PadMetrics, MetricsError> {
        let (eer, eer_threshold) = self.eer(sel)?;
        let bpcer_at_apcer = self.bpcer_at_apcer(sel, &[0.10, 0.05, 0.01])?;
        let mut apcer_per_pai = BTreeMap::new();
        for pai in self.pais() {
            apcer_per_pai.insert(pai, self.apcer(pai, eer_threshold)?);
        }
        Ok(PadMetrics {
            eer,
            eer_threshold,
            bpcer_at_apcer,
            apcer_per_pai,
            det_points: self.det_curve(sel)?,
        })
    }
}

/// Parse the score file format: optional `# polarity=...` pragma, then a
/// CSV header `path,label,pai,score`. Polarity `higher_attack` (default)
/// keeps scores as-is; `higher_bonafide` negates them so the "higher
/// means attack" convention holds internally.
pub fn parse_score_file(text: &str) -> Result<ScoreSet, MetricsError> {
    let mut lines = text.lines().enumerate().peekable();
    let mut negate = false;
    if let Some((_, first)) = lines.peek() {
        if let Some(rest) = first.trim().strip_prefix('#') {
            let pragma = rest.trim();
            if let Some(value) = pragma.strip_prefix("polarity=") {
                match value.trim() {
                    "higher_attack" => negate = false,
                    "higher_bonafide" => negate = true,
                    other => {
                        return Err(MetricsError::Parse {
                            line: 1,
                            message: format!("unknown polarity {other:?}"),
                        })
                    }
                }
                lines.next();
            }
        }
    }
    let (header_line, header) = lines.next().ok_or(MetricsError::Parse {
        line: 1,
        message: "missing header".to_string(),
    })?;
    if header.trim() != "path,label,pai,score" {
        return Err(MetricsError::Parse {
            line: header_line + 1,
            message: format!("expected header 'path,label,pai,score', got {:?}", header.trim()),
        });
    }
    let mut entries = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(MetricsError::Parse {
                line: line_no,
                message: format!("expected 4 fields, got {}", fields.len()),
            });
        }
        let pai = match (fields[1].trim(), fields[2].trim()) {
            ("bonafide", "none") => None,
            ("attack", "print") => Some(Pai::Print),
            ("attack", "screen") => Some(Pai::Screen),
            (label, pai) => {
                return Err(MetricsError::Parse {
                    line: line_no,
                    message: format!("inconsistent label/pai pair ({label:?}, {pai:?})"),
                })
            }
        };
        let score: f64 = fields[3].trim().parse().map_err(|e| MetricsError::Parse {
            line: line_no,
            message: format!("bad score: {e}"),
        })?;
        if !score.is_finite() {
            return Err(MetricsError::Parse {
                line: line_no,
                message: "score must be finite".to_string(),
            });
        }
        entries.push(ScoreEntry { score: if negate { -score } else { score }, pai });
    }
    ScoreSet::new(entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn bona(score: f64) -> ScoreEntry {
        ScoreEntry { score, pai: None }
    }

    fn attack(score: f64, pai: Pai) -> ScoreEntry {
        ScoreEntry { score, pai: Some(pai) }
    }

    #[test]
    fn apcer_counts() {
        let set = ScoreSet::new(vec![
            attack(0.9, Pai::Print),
            attack(0.8, Pai::Print),
            attack(0.7, Pai::Print),
            attack(0.2, Pai::Print),
            bona(0.1),
        ])
        .unwrap();
        // all four above threshold -> perfect detection
        assert_eq!(set.apcer(Pai::Print, 0.15).unwrap(), 0.0);
        // 3 of 4 detected
        assert_eq!(set.apcer(Pai::Print, 0.5).unwrap(), 0.25);
        // nothing classified attack
        assert_eq!(set.apcer(Pai::Print, 1.5).unwrap(), 1.0);
        assert_eq!(set.apcer(Pai::Screen, 0.5), Err(MetricsError::NoSuchPai(Pai::Screen)));
    }

    #[test]
    fn bpcer_counts() {
        let set = ScoreSet::new(vec![
            bona(0.1),
            bona(0.2),
            bona(0.3),
            bona(0.4),
            bona(0.9),
            attack(0.95, Pai::Print),
        ])
        .unwrap();
        assert_eq!(set.bpcer(0.05).unwrap(), 1.0);
        assert_eq!(set.bpcer(0.5).unwrap(), 0.2);
        assert_eq!(set.bpcer(2.0).unwrap(), 0.0);
    }

    #[test]
    fn tie_decides_attack() {
        let set = ScoreSet::new(vec![bona(0.5), attack(0.5, Pai::Print)]).unwrap();
        assert_eq!(set.bpcer(0.5).unwrap(), 1.0);
        assert_eq!(set.apcer(Pai::Print, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn perfectly_separated_curve_contains_origin() {
        let set = ScoreSet::new(vec![
            bona(0.1),
            bona(0.2),
            attack(0.8, Pai::Print),
            attack(0.9, Pai::Print),
        ])
        .unwrap();
        let curve = set.det_curve(PaiSelector::WorstCase).unwrap();
        assert!(curve.iter().any(|p| p.apcer == 0.0 && p.bpcer == 0.0));
        let (eer, _) = set.eer(PaiSelector::WorstCase).unwrap();
        assert_eq!(eer, 0.0);
        for op in set.bpcer_at_apcer(PaiSelector::WorstCase, &[0.10, 0.05, 0.01]).unwrap() {
            assert_eq!(op.bpcer, 0.0);
        }
    }

    #[test]
    fn degenerate_identical_scores() {
        let set = ScoreSet::new(vec![bona(0.5), attack(0.5, Pai::Screen)]).unwrap();
        let curve = set.det_curve(PaiSelector::WorstCase).unwrap();
        assert_eq!(curve.len(), 2);
        assert_eq!((curve[0].apcer, curve[0].bpcer), (0.0, 1.0));
        assert_eq!((curve[1].apcer, curve[1].bpcer), (1.0, 0.0));
    }

    #[test]
    fn worst_case_dominates_per_pai() {
        let set = ScoreSet::new(vec![
            bona(0.3),
            attack(0.2, Pai::Print),
            attack(0.9, Pai::Print),
            attack(0.6, Pai::Screen),
        ])
        .unwrap();
        for t in [-1.0, 0.25, 0.5, 0.7, 2.0] {
            let worst = set.apcer_worst(t).unwrap();
            for pai in set.pais() {
                assert!(worst >= set.apcer(pai, t).unwrap());
            }
        }
    }

    #[test]
    fn identically_distributed_eer_near_half() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(11);
        let mut entries = Vec::new();
        for _ in 0..4000 {
            entries.push(bona(rng.gen::<f64>()));
            entries.push(attack(rng.gen::<f64>(), Pai::Print));
        }
        let set = ScoreSet::new(entries).unwrap();
        let (eer, _) = set.eer(PaiSelector::Single(Pai::Print)).unwrap();
        assert_relative_eq!(eer, 0.5, epsilon = 0.03);
    }

    #[test]
    fn unattainable_level_is_flagged() {
        // 2 attacks cannot resolve APCER = 1%: the grid step is 0.5
        let set = ScoreSet::new(vec![
            bona(0.1),
            attack(0.6, Pai::Print),
            attack(0.7, Pai::Print),
        ])
        .unwrap();
        let ops =
            set.bpcer_at_apcer(PaiSelector::Single(Pai::Print), &[0.10, 0.01]).unwrap();
        assert!(!ops[0].attainable);
        assert!(!ops[1].attainable);
        // with 200 attacks all standard levels resolve
        let mut entries = vec![bona(0.0)];
        for i in 0..200 {
            entries.push(attack(0.5 + i as f64 / 1000.0, Pai::Screen));
        }
        let big = ScoreSet::new(entries).unwrap();
        let ops = big.bpcer_at_apcer(PaiSelector::Single(Pai::Screen), &[0.01]).unwrap();
        assert!(ops[0].attainable);
    }

    #[test]
    fn parse_rejects_malformed() {
        assert!(matches!(
            parse_score_file(""),
            Err(MetricsError::Parse { line: 1, .. })
        ));
        let bad = "path,label,pai,score\nimg,attack,none,0.5\n";
        assert!(matches!(parse_score_file(bad), Err(MetricsError::Parse { line: 2, .. })));
    }

    #[test]
    fn parse_polarity_pragma_negates() {
        let text = "# polarity=higher_bonafide\npath,label,pai,score\na,bonafide,none,0.9\nb,attack,print,0.1\n";
        let set = parse_score_file(text).unwrap();
        let (eer, _) = set.eer(PaiSelector::WorstCase).unwrap();
        assert_eq!(eer, 0.0);
    }

    #[test]
    fn single_class_errors() {
        let set = ScoreSet::new(vec![bona(0.1), bona(0.2)]).unwrap();
        assert_eq!(set.det_curve(PaiSelector::WorstCase), Err(MetricsError::SingleClass));
        assert_eq!(set.eer(PaiSelector::WorstCase), Err(MetricsError::SingleClass));
    }
}
