//! Score tables in fixed-width and csv form.

use std::fmt::Write;

pub const SCORE_COLUMNS: [&str; 5] = ["BLEU@1", "BLEU@2", "BLEU@3", "BLEU@4", "METEOR"];

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub model: String,
    pub values: [f64; 5],
}

/// Appends a `Mean` row averaging each column over `rows`.
pub fn with_mean(rows: &[ScoreRow]) -> Vec<ScoreRow> {
    let mut out = rows.to_vec();
    if rows.is_empty() {
        return out;
    }
    let mut sums = [0.0; 5];
    for r in rows {
        for (s, v) in sums.iter_mut().zip(r.values) {
            *s += v;
        }
    }
    out.push(ScoreRow {
        model: "Mean".into(),
        values: sums.map(|s| s / rows.len() as f64),
    });
    out
}

/// Left-aligned model column, right-aligned numbers, two spaces between columns.
pub fn table(rows: &[ScoreRow], decimals: usize) -> String {
    let header: Vec<String> = std::iter::once("Model")
        .chain(SCORE_COLUMNS)
        .map(String::from)
        .collect();
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            std::iter::once(r.model.clone())
                .chain(r.values.iter().map(|v| format!("{v:.decimals$}")))
                .collect()
        })
        .collect();
    grid(&header, &body)
}

/// First column left-aligned, the rest right-aligned.
pub fn grid(header: &[String], rows: &[Vec<String>]) -> String {
    let width = |c: usize| {
        rows.iter()
            .filter_map(|r| r.get(c))
            .chain(header.get(c))
            .map(|s| s.chars().count())
            .max()
            .unwrap_or(0)
    };
    let widths: Vec<usize> = (0..header.len()).map(width).collect();
    let mut out = String::new();
    for line in std::iter::once(header).chain(rows.iter().map(Vec::as_slice)) {
        for (c, (cell, w)) in line.iter().zip(&widths).enumerate() {
            if c == 0 {
                let _ = write!(out, "{cell:<w$}");
            } else {
                let _ = write!(out, "  {cell:>w$}");
            }
        }
        out.push('\n');
    }
    out
}

/// Same columns as [`table`] with shortest round-trip float formatting.
pub fn csv(rows: &[ScoreRow]) -> String {
    let mut out = String::from("model");
    for name in SCORE_COLUMNS {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for r in rows {
        out.push_str(&csv_field(&r.model));
        for v in r.values {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
