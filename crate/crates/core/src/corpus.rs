//! Caption files, ground-truth summaries, labeled summaries and text
//! normalization.
//!
//! Caption files are JSON maps from video id to parallel arrays:
//!
//! ```json
//! { "v_001": { "duration": 42.0,
//!              "timestamps": [[0.0, 10.5], [8.0, 20.0]],
//!              "sentences": ["A man enters.", "He grabs a bag."],
//!              "scores": [0.9, 0.7] } }
//! ```
//!
//! `scores` is optional and defaults to 1.0 for every event.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use indexmap::IndexMap;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::segments::TemporalSegment;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionEvent {
    pub segment: TemporalSegment,
    pub sentence: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionRecord {
    pub video_id: String,
    pub duration: f64,
    pub events: Vec<CaptionEvent>,
}

impl CaptionRecord {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(format!("duration must be positive, got {}", self.duration));
        }
        for (k, ev) in self.events.iter().enumerate() {
            ev.segment
                .validate()
                .map_err(|e| format!("event {k}: {e}"))?;
            if ev.segment.end > self.duration {
                return Err(format!(
                    "event {k}: end {} exceeds duration {}",
                    ev.segment.end, self.duration
                ));
            }
            if ev.sentence.trim().is_empty() {
                return Err(format!("event {k}: empty sentence"));
            }
        }
        Ok(())
    }

    /// All sentences in file order joined by spaces.
    pub fn summary(&self) -> String {
        self.events
            .iter()
            .map(|e| e.sentence.trim())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCaption {
    duration: f64,
    timestamps: Vec<[f64; 2]>,
    sentences: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scores: Option<Vec<f64>>,
}

pub fn parse_captions(text: &str, origin: &Path) -> Result<Vec<CaptionRecord>> {
    if text.trim().is_empty() {
        log::warn!("{}: empty caption file", origin.display());
        return Ok(Vec::new());
    }
    let raw: IndexMap<String, RawCaption> =
        serde_json::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            location: format!("line {} column {}", e.line(), e.column()),
            message: e.to_string(),
        })?;

    let mut records = Vec::with_capacity(raw.len());
    for (video_id, rc) in raw {
        let invalid = |reason: String| Error::InvalidRecord {
            path: origin.to_path_buf(),
            video_id: video_id.clone(),
            reason,
        };
        if rc.timestamps.len() != rc.sentences.len() {
            return Err(invalid(format!(
                "{} timestamps but {} sentences",
                rc.timestamps.len(),
                rc.sentences.len()
            )));
        }
        let scores = match rc.scores {
            Some(s) if s.len() != rc.timestamps.len() => {
                return Err(invalid(format!(
                    "{} timestamps but {} scores",
                    rc.timestamps.len(),
                    s.len()
                )))
            }
            Some(s) => s,
            None => vec![1.0; rc.timestamps.len()],
        };
        let events = rc
            .timestamps
            .iter()
            .zip(rc.sentences)
            .zip(scores)
            .map(|(([start, end], sentence), score)| CaptionEvent {
                segment: TemporalSegment {
                    start: *start,
                    end: *end,
                    score,
                },
                sentence,
            })
            .collect();
        let record = CaptionRecord {
            video_id: video_id.clone(),
            duration: rc.duration,
            events,
        };
        record.validate().map_err(invalid)?;
        records.push(record);
    }
    Ok(records)
}

pub fn load_captions(path: &Path) -> Result<Vec<CaptionRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_captions(&text, path)
}

/// Pretty JSON in the caption file format. Scores are always written.
pub fn captions_to_json(records: &[CaptionRecord]) -> String {
    let map: IndexMap<&str, RawCaption> = records
        .iter()
        .map(|r| {
            (
                r.video_id.as_str(),
                RawCaption {
                    duration: r.duration,
                    timestamps: r
                        .events
                        .iter()
                        .map(|e| [e.segment.start, e.segment.end])
                        .collect(),
                    sentences: r.events.iter().map(|e| e.sentence.clone()).collect(),
                    scores: Some(r.events.iter().map(|e| e.segment.score).collect()),
                },
            )
        })
        .collect();
    let mut out = serde_json::to_string_pretty(&map).expect("caption records serialize");
    out.push('\n');
    out
}

pub fn save_captions(path: &Path, records: &[CaptionRecord]) -> Result<()> {
    std::fs::write(path, captions_to_json(records)).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CrimeClass {
    Arrest,
    Arson,
    Assault,
    Burglary,
    Explosion,
    Normal,
    RoadAccidents,
    Robbery,
    Shooting,
    Shoplifting,
    Vandalism,
}

impl CrimeClass {
    pub const ALL: [CrimeClass; 11] = [
        CrimeClass::Arrest,
        CrimeClass::Arson,
        CrimeClass::Assault,
        CrimeClass::Burglary,
        CrimeClass::Explosion,
        CrimeClass::Normal,
        CrimeClass::RoadAccidents,
        CrimeClass::Robbery,
        CrimeClass::Shooting,
        CrimeClass::Shoplifting,
        CrimeClass::Vandalism,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CrimeClass::Arrest => "Arrest",
            CrimeClass::Arson => "Arson",
            CrimeClass::Assault => "Assault",
            CrimeClass::Burglary => "Burglary",
            CrimeClass::Explosion => "Explosion",
            CrimeClass::Normal => "Normal",
            CrimeClass::RoadAccidents => "RoadAccidents",
            CrimeClass::Robbery => "Robbery",
            CrimeClass::Shooting => "Shooting",
            CrimeClass::Shoplifting => "Shoplifting",
            CrimeClass::Vandalism => "Vandalism",
        }
    }
}

impl fmt::Display for CrimeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CrimeClass {
    type Err = Error;

    /// Case-insensitive; internal spaces and underscores are ignored, so
    /// "Road Accidents" parses.
    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| !c.is_whitespace() && *c != '_')
            .flat_map(char::to_lowercase)
            .collect();
        CrimeClass::ALL
            .into_iter()
            .find(|c| c.name().to_lowercase() == key)
            .ok_or_else(|| Error::Domain(format!("unknown class `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthSummary {
    pub video_id: String,
    pub class_label: CrimeClass,
    pub text: String,
}

fn csv_reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

fn check_header(
    rdr: &mut csv::Reader<&[u8]>,
    expected: &[&str],
    origin: &Path,
) -> Result<()> {
    let headers = rdr.headers().map_err(|e| csv_error(e, origin))?;
    let got: Vec<&str> = headers.iter().collect();
    if got != expected {
        return Err(Error::Parse {
            path: origin.to_path_buf(),
            location: "line 1".into(),
            message: format!("expected header `{}`, got `{}`", expected.join(","), got.join(",")),
        });
    }
    Ok(())
}

fn csv_error(e: csv::Error, origin: &Path) -> Error {
    let location = e
        .position()
        .map(|p| format!("line {}", p.line()))
        .unwrap_or_else(|| "unknown".into());
    Error::Parse {
        path: origin.to_path_buf(),
        location,
        message: e.to_string(),
    }
}

/// Parses `video_id,class,summary` CSV.
pub fn parse_ground_truth(text: &str, origin: &Path) -> Result<Vec<GroundTruthSummary>> {
    if text.trim().is_empty() {
        log::warn!("{}: empty ground-truth file", origin.display());
        return Ok(Vec::new());
    }
    let mut rdr = csv_reader(text);
    check_header(&mut rdr, &["video_id", "class", "summary"], origin)?;
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(e, origin))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let video_id = rec[0].to_string();
        let invalid = |reason: String| Error::InvalidRecord {
            path: origin.to_path_buf(),
            video_id: video_id.clone(),
            reason: format!("line {line}: {reason}"),
        };
        let class_label = rec[1].parse::<CrimeClass>().map_err(|e| invalid(e.to_string()))?;
        if rec[2].trim().is_empty() {
            return Err(invalid("empty summary".into()));
        }
        if !seen.insert(video_id.clone()) {
            return Err(invalid("duplicate video id".into()));
        }
        out.push(GroundTruthSummary {
            video_id,
            class_label,
            text: rec[2].to_string(),
        });
    }
    Ok(out)
}

pub fn load_ground_truth(path: &Path) -> Result<Vec<GroundTruthSummary>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_ground_truth(&text, path)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    NonSuspicious = 0,
    Suspicious = 1,
}

impl Label {
    pub fn as_u8(self) -> u8 {
        self as u8
    }

    pub fn from_u8(v: u8) -> Result<Self> {
        match v {
            0 => Ok(Label::NonSuspicious),
            1 => Ok(Label::Suspicious),
            other => Err(Error::Domain(format!("label must be 0 or 1, got {other}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledSummary {
    pub text: String,
    pub label: Label,
}

impl LabeledSummary {
    pub fn new(text: impl Into<String>, label: Label) -> Self {
        Self {
            text: text.into(),
            label,
        }
    }
}

/// Parses `label,text` CSV with labels in {0, 1}.
pub fn parse_labeled(text: &str, origin: &Path) -> Result<Vec<LabeledSummary>> {
    if text.trim().is_empty() {
        log::warn!("{}: empty labeled-summary file", origin.display());
        return Ok(Vec::new());
    }
    let mut rdr = csv_reader(text);
    check_header(&mut rdr, &["label", "text"], origin)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(e, origin))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let parse_err = |message: String| Error::Parse {
            path: origin.to_path_buf(),
            location: format!("line {line}"),
            message,
        };
        let label = rec[0]
            .parse::<u8>()
            .map_err(|e| parse_err(format!("label {:?}: {e}", &rec[0])))
            .and_then(|v| Label::from_u8(v).map_err(|e| parse_err(e.to_string())))?;
        out.push(LabeledSummary::new(&rec[1], label));
    }
    Ok(out)
}

pub fn load_labeled(path: &Path) -> Result<Vec<LabeledSummary>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_labeled(&text, path)
}

const BUILTIN_STOPWORDS: &str = include_str!("../data/stopwords.txt");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StopWords(HashSet<String>);

impl StopWords {
    /// One word per line; `#` starts a comment.
    pub fn parse(text: &str) -> Self {
        Self(
            text.lines()
                .map(|l| l.split('#').next().unwrap_or("").trim().to_lowercase())
                .filter(|w| !w.is_empty())
                .collect(),
        )
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::parse(&text))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.0.contains(word)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl Default for StopWords {
    fn default() -> Self {
        Self::parse(BUILTIN_STOPWORDS)
    }
}

impl<S: Into<String>> FromIterator<S> for StopWords {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        Self(iter.into_iter().map(|s| s.into().to_lowercase()).collect())
    }
}

/// Rules are applied in field order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizeRules {
    pub lowercase: bool,
    pub strip_punctuation: bool,
    pub remove_stopwords: bool,
    pub substitute_person_terms: bool,
}

impl NormalizeRules {
    pub const ALL: NormalizeRules = NormalizeRules {
        lowercase: true,
        strip_punctuation: true,
        remove_stopwords: true,
        substitute_person_terms: true,
    };

    pub const NONE: NormalizeRules = NormalizeRules {
        lowercase: false,
        strip_punctuation: false,
        remove_stopwords: false,
        substitute_person_terms: false,
    };
}

impl Default for NormalizeRules {
    fn default() -> Self {
        Self::ALL
    }
}

fn core_word(token: &str) -> String {
    token
        .trim_matches(|c: char| !c.is_alphanumeric())
        .to_lowercase()
}

/// Replaces the alphanumeric core of `token`, keeping surrounding punctuation.
fn replace_core(token: &str, replacement: &str) -> String {
    let start = token.find(|c: char| c.is_alphanumeric()).unwrap_or(0);
    let end = token
        .rfind(|c: char| c.is_alphanumeric())
        .map(|i| i + token[i..].chars().next().map_or(1, char::len_utf8))
        .unwrap_or(token.len());
    let core = &token[start..end];
    let replacement = if core.chars().next().is_some_and(char::is_uppercase) {
        let mut chars = replacement.chars();
        chars
            .next()
            .map(|c| c.to_uppercase().chain(chars).collect())
            .unwrap_or_default()
    } else {
        replacement.to_string()
    };
    format!("{}{}{}", &token[..start], replacement, &token[end..])
}

/// Applies the enabled rules in order: lowercase, strip punctuation, remove
/// stop words, rewrite "a person" / "person" to "man". Whitespace is
/// collapsed to single spaces. Idempotent for any fixed rule set.
pub fn normalize_text(text: &str, rules: NormalizeRules, stopwords: &StopWords) -> String {
    let mut tokens: Vec<String> = text.split_whitespace().map(str::to_string).collect();
    if rules.lowercase {
        tokens.iter_mut().for_each(|t| *t = t.to_lowercase());
    }
    if rules.strip_punctuation {
        tokens = tokens
            .into_iter()
            .map(|t| t.trim_matches(|c: char| !c.is_alphanumeric()).to_string())
            .filter(|t| !t.is_empty())
            .collect();
    }
    if rules.remove_stopwords {
        tokens.retain(|t| !stopwords.contains(&core_word(t)));
    }
    if rules.substitute_person_terms {
        let mut out = Vec::with_capacity(tokens.len());
        let mut k = 0;
        while k < tokens.len() {
            let word = core_word(&tokens[k]);
            let next_is_person = tokens.get(k + 1).is_some_and(|t| core_word(t) == "person");
            // "a person" collapses only when the article carries no punctuation.
            if word == "a" && tokens[k].len() == 1 && next_is_person {
                let article = &tokens[k];
                let mut merged = replace_core(&tokens[k + 1], "man");
                if article == "A" {
                    merged = replace_core(&tokens[k + 1], "Man");
                }
                out.push(merged);
                k += 2;
            } else if word == "person" {
                out.push(replace_core(&tokens[k], "man"));
                k += 1;
            } else {
                out.push(tokens[k].clone());
                k += 1;
            }
        }
        tokens = out;
    }
    tokens.join(" ")
}

const ROLES: [(&str, &str); 4] = [
    ("suspect", "suspect"),
    ("suspects", "suspect"),
    ("victim", "victim"),
    ("victims", "victim"),
];

fn gendered(word: &str, female: bool) -> &'static str {
    let plural = word.ends_with('s');
    match (female, plural) {
        (false, false) => "man",
        (false, true) => "men",
        (true, false) => "woman",
        (true, true) => "women",
    }
}

/// Every assignment of "man"/"woman" to the roles "suspect" and "victim"
/// (plurals become "men"/"women"). Each role is rewritten consistently
/// across the sentence. Returns the sorted, de-duplicated variants; text
/// without role words comes back unchanged.
pub fn augment_person_terms(text: &str) -> Vec<String> {
    let tokens: Vec<&str> = text.split_whitespace().collect();
    let role_of = |t: &str| {
        let w = core_word(t);
        ROLES.iter().find(|(k, _)| *k == w).map(|(_, r)| *r)
    };
    let mut roles: Vec<&str> = tokens.iter().filter_map(|t| role_of(t)).collect();
    roles.sort_unstable();
    roles.dedup();
    if roles.is_empty() {
        return vec![tokens.join(" ")];
    }
    let mut variants: Vec<String> = (0..1u32 << roles.len())
        .map(|mask| {
            tokens
                .iter()
                .map(|t| match role_of(t) {
                    Some(role) => {
                        let bit = roles.iter().position(|r| *r == role).unwrap_or(0);
                        replace_core(t, gendered(&core_word(t), mask & (1 << bit) != 0))
                    }
                    None => t.to_string(),
                })
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect();
    variants.sort();
    variants.dedup();
    variants
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Remainder {
    /// Emit a short trailing group as-is.
    #[default]
    Keep,
    /// Discard a trailing group smaller than `k`.
    Drop,
}

/// Joins consecutive groups of `k` transcripts with ". ".
pub fn merge_transcripts<S: AsRef<str>>(
    transcripts: &[S],
    k: usize,
    remainder: Remainder,
) -> Result<Vec<String>> {
    if k == 0 {
        return Err(Error::Domain("group size must be at least 1".into()));
    }
    Ok(transcripts
        .chunks(k)
        .filter(|group| group.len() == k || remainder == Remainder::Keep)
        .map(|group| {
            group
                .iter()
                .map(|t| t.as_ref().trim().trim_end_matches('.').trim_end())
                .collect::<Vec<_>>()
                .join(". ")
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<LabeledSummary>,
    pub test: Vec<LabeledSummary>,
}

/// Per-label shuffled split. Each label sends `round((1 - train_ratio) * n)`
/// samples to test and the rest to train; both sides keep input order.
pub fn stratified_split(data: &[LabeledSummary], train_ratio: f64, seed: u64) -> Result<Split> {
    if !(train_ratio > 0.0 && train_ratio < 1.0) {
        return Err(Error::Domain(format!(
            "train ratio {train_ratio} outside (0, 1)"
        )));
    }
    let mut by_label: BTreeMap<Label, Vec<usize>> = BTreeMap::new();
    for (idx, s) in data.iter().enumerate() {
        by_label.entry(s.label).or_default().push(idx);
    }
    if by_label.len() < 2 {
        log::warn!("stratified split over a single-class dataset");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut is_test = vec![false; data.len()];
    for indices in by_label.values_mut() {
        let n_test = (indices.len() as f64 * (1.0 - train_ratio)).round() as usize;
        indices.shuffle(&mut rng);
        for &idx in &indices[..n_test.min(indices.len())] {
            is_test[idx] = true;
        }
    }
    let (test, train): (Vec<_>, Vec<_>) = data
        .iter()
        .cloned()
        .zip(is_test)
        .partition(|(_, t)| *t);
    Ok(Split {
        train: train.into_iter().map(|(s, _)| s).collect(),
        test: test.into_iter().map(|(s, _)| s).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_VIDEOS: &str = r#"{
        "v1": {"duration": 30.0, "timestamps": [[0, 10], [1, 9]], "sentences": ["A man enters.", "He looks around."], "scores": [0.9, 0.8]},
        "v2": {"duration": 12.5, "timestamps": [[2.5, 12.5]], "sentences": ["A car stops."]}
    }"#;

    fn origin() -> &'static Path {
        Path::new("test.json")
    }

    #[test]
    fn parses_two_videos() {
        let recs = parse_captions(TWO_VIDEOS, origin()).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].video_id, "v1");
        assert_eq!(recs[0].events[1].segment.score, 0.8);
        assert_eq!(recs[1].events[0].segment.score, 1.0);
        assert_eq!(recs[0].summary(), "A man enters. He looks around.");
    }

    #[test]
    fn end_before_start_names_video() {
        let text = r#"{"bad_vid": {"duration": 10, "timestamps": [[5, 2]], "sentences": ["x"]}}"#;
        let err = parse_captions(text, origin()).unwrap_err();
        assert!(matches!(&err, Error::InvalidRecord { video_id, .. } if video_id == "bad_vid"));
    }

    #[test]
    fn malformed_json_reports_location() {
        let err = parse_captions("{\n \"v\": {\"duration\": }\n}", origin()).unwrap_err();
        match err {
            Error::Parse { location, .. } => assert!(location.starts_with("line 2"), "{location}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn mismatched_arrays_and_bounds_rejected() {
        let text = r#"{"v": {"duration": 10, "timestamps": [[0, 2], [3, 4]], "sentences": ["x"]}}"#;
        assert!(parse_captions(text, origin()).is_err());
        let text = r#"{"v": {"duration": 10, "timestamps": [[0, 2]], "sentences": ["x"], "scores": []}}"#;
        assert!(parse_captions(text, origin()).is_err());
        let text = r#"{"v": {"duration": 10, "timestamps": [[0, 12]], "sentences": ["x"]}}"#;
        assert!(parse_captions(text, origin()).is_err());
        let text = r#"{"v": {"duration": 10, "timestamps": [[0, 2]], "sentences": ["  "]}}"#;
        assert!(parse_captions(text, origin()).is_err());
    }

    #[test]
    fn empty_file_is_empty_list() {
        assert!(parse_captions("", origin()).unwrap().is_empty());
        assert!(parse_captions("  \n", origin()).unwrap().is_empty());
    }

    #[test]
    fn caption_round_trip() {
        let recs = parse_captions(TWO_VIDEOS, origin()).unwrap();
        let again = parse_captions(&captions_to_json(&recs), origin()).unwrap();
        assert_eq!(recs, again);
    }

    #[test]
    fn crime_class_parsing() {
        assert_eq!("Road Accidents".parse::<CrimeClass>().unwrap(), CrimeClass::RoadAccidents);
        assert_eq!("shoplifting".parse::<CrimeClass>().unwrap(), CrimeClass::Shoplifting);
        assert!("Jaywalking".parse::<CrimeClass>().is_err());
        for c in CrimeClass::ALL {
            assert_eq!(c.to_string().parse::<CrimeClass>().unwrap(), c);
        }
    }

    #[test]
    fn ground_truth_csv() {
        let text = "video_id,class,summary\nv1,Arson,\"A man sets fire, then runs.\"\nv2,Road Accidents,Two cars collide.\n";
        let gts = parse_ground_truth(text, Path::new("gt.csv")).unwrap();
        assert_eq!(gts.len(), 2);
        assert_eq!(gts[0].text, "A man sets fire, then runs.");
        assert_eq!(gts[1].class_label, CrimeClass::RoadAccidents);

        let bad = "video_id,class,summary\nv1,Jaywalking,text\n";
        assert!(matches!(
            parse_ground_truth(bad, Path::new("gt.csv")),
            Err(Error::InvalidRecord { .. })
        ));
        assert!(parse_ground_truth("id,class,summary\n", Path::new("gt.csv")).is_err());
        let dup = "video_id,class,summary\nv1,Arson,a\nv1,Arson,b\n";
        assert!(parse_ground_truth(dup, Path::new("gt.csv")).is_err());
    }

    #[test]
    fn labeled_csv() {
        let text = "label,text\n1,man holding gun\n0,woman walks dog\n";
        let rows = parse_labeled(text, Path::new("l.csv")).unwrap();
        assert_eq!(rows[0].label, Label::Suspicious);
        assert_eq!(rows[1].label, Label::NonSuspicious);
        let err = parse_labeled("label,text\n2,x\n", Path::new("l.csv")).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn normalize_examples() {
        let sw: StopWords = ["a"].into_iter().collect();
        assert_eq!(normalize_text("A person runs.", NormalizeRules::ALL, &sw), "man runs");
        assert_eq!(normalize_text("", NormalizeRules::ALL, &sw), "");
        let only_sub = NormalizeRules {
            substitute_person_terms: true,
            ..NormalizeRules::NONE
        };
        assert_eq!(
            normalize_text("A person waves at the person.", only_sub, &sw),
            "Man waves at the man."
        );
    }

    #[test]
    fn builtin_stopwords_exclude_person_terms() {
        let sw = StopWords::default();
        assert!(sw.contains("the"));
        for w in ["man", "woman", "person", "men", "women"] {
            assert!(!sw.contains(w));
        }
    }

    #[test]
    fn augmentation_covers_both_roles() {
        let got = augment_person_terms("the suspect hit the victim");
        assert!(got.contains(&"the man hit the woman".to_string()));
        assert!(got.contains(&"the woman hit the man".to_string()));
        assert_eq!(got.len(), 4);
        assert_eq!(augment_person_terms("Suspects fled."), vec!["Men fled.", "Women fled."]);
        assert_eq!(augment_person_terms("a dog barks"), vec!["a dog barks"]);
    }

    #[test]
    fn merge_examples() {
        let items: Vec<String> = (0..7985).map(|i| format!("t{i}")).collect();
        let merged = merge_transcripts(&items, 3, Remainder::Keep).unwrap();
        assert_eq!(merged.len(), 2662);
        assert_eq!(merged.last().unwrap(), "t7983. t7984");
        assert_eq!(merge_transcripts(&items, 3, Remainder::Drop).unwrap().len(), 2661);
        assert_eq!(
            merge_transcripts(&["a.", "b", "c"], 3, Remainder::Keep).unwrap(),
            vec!["a. b. c"]
        );
        let none: [&str; 0] = [];
        assert!(merge_transcripts(&none, 3, Remainder::Keep).unwrap().is_empty());
        assert!(merge_transcripts(&["a"], 0, Remainder::Keep).is_err());
    }

    fn labeled(n_pos: usize, n_neg: usize) -> Vec<LabeledSummary> {
        (0..n_pos)
            .map(|i| LabeledSummary::new(format!("pos {i}"), Label::Suspicious))
            .chain((0..n_neg).map(|i| LabeledSummary::new(format!("neg {i}"), Label::NonSuspicious)))
            .collect()
    }

    fn count(v: &[LabeledSummary], l: Label) -> usize {
        v.iter().filter(|s| s.label == l).count()
    }

    #[test]
    fn split_counts() {
        let s = stratified_split(&labeled(445, 475), 0.7, 7).unwrap();
        assert_eq!(count(&s.train, Label::Suspicious), 311);
        assert_eq!(count(&s.train, Label::NonSuspicious), 332);
        assert_eq!(count(&s.test, Label::Suspicious), 134);
        assert_eq!(count(&s.test, Label::NonSuspicious), 143);

        let s = stratified_split(&labeled(10, 10), 0.7, 1).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (14, 6));
        assert_eq!(count(&s.test, Label::Suspicious), 3);
    }

    #[test]
    fn split_is_seeded() {
        let data = labeled(30, 25);
        let a = stratified_split(&data, 0.7, 5).unwrap();
        assert_eq!(a, stratified_split(&data, 0.7, 5).unwrap());
        assert_ne!(a, stratified_split(&data, 0.7, 6).unwrap());
        assert!(stratified_split(&data, 1.0, 5).is_err());
        let single = stratified_split(&labeled(10, 0), 0.7, 5).unwrap();
        assert_eq!(single.test.len(), 3);
    }
}
