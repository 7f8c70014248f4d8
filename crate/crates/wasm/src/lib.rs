//! Browser bindings for the demo page in `www/`.
//!
//! Every export takes plain values and returns a JSON string, so the same
//! functions run unchanged in native tests.

use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

use denseval::caption_metrics::{score_pair, BleuMode};
use denseval::segments::{nms_indices, TemporalSegment};
use denseval::tuner::{run_search, FitnessSource, GaConfig, SyntheticFitness, TableFitness};

#[derive(Deserialize)]
struct SegmentIn {
    start: f64,
    end: f64,
    score: f64,
}

#[derive(Serialize)]
struct NmsOut {
    kept: Vec<usize>,
    profile: Vec<(f64, usize)>,
}

fn to_json<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

/// `segments_json` is `[{"start", "end", "score"}, ...]`. Returns the kept
/// indices at `threshold` and the surviving count at thresholds 0, 0.05, ..., 1.
#[wasm_bindgen]
pub fn nms_profile(segments_json: &str, threshold: f64) -> Result<String, String> {
    let raw: Vec<SegmentIn> = serde_json::from_str(segments_json).map_err(|e| e.to_string())?;
    let segments = raw
        .iter()
        .enumerate()
        .map(|(i, s)| {
            TemporalSegment::new(s.start, s.end, s.score).map_err(|e| format!("segment {i}: {e}"))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let kept = nms_indices(&segments, threshold).map_err(|e| e.to_string())?;
    let profile = (0..=20)
        .map(|k| {
            let t = f64::from(k) / 20.0;
            nms_indices(&segments, t).map(|kept| (t, kept.len()))
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    to_json(&NmsOut { kept, profile })
}

/// GA threshold search. A non-blank `table_tsv` (`threshold<TAB>bleu1`
/// lines) is used as the fitness table; otherwise the synthetic peak at `peak`.
#[wasm_bindgen]
pub fn tune(table_tsv: &str, peak: f64, seed: u32, generations: u32) -> Result<String, String> {
    let source: Box<dyn FitnessSource> = if table_tsv.trim().is_empty() {
        Box::new(SyntheticFitness::with_peak(peak))
    } else {
        Box::new(
            TableFitness::parse(table_tsv, std::path::Path::new("table"))
                .map_err(|e| e.to_string())?,
        )
    };
    let config = GaConfig {
        rng_seed: u64::from(seed),
        generations: generations as usize,
        ..GaConfig::default()
    };
    let outcome = run_search(&config, source.as_ref()).map_err(|e| e.to_string())?;
    to_json(&outcome)
}

/// BLEU@1..4 and METEOR (0-100) of one candidate against one reference.
/// `mode` is `individual` or `cumulative`.
#[wasm_bindgen]
pub fn score_captions(candidate: &str, reference: &str, mode: &str) -> Result<String, String> {
    let mode: BleuMode = mode.parse().map_err(|e: denseval::Error| e.to_string())?;
    let scores = score_pair(candidate, reference, mode).map_err(|e| e.to_string())?;
    to_json(&scores)
}
