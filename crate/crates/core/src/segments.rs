//! Temporal segments, time-IoU and greedy non-maximum suppression.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A scored `[start, end]` interval on one video's timeline, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemporalSegment {
    pub start: f64,
    pub end: f64,
    pub score: f64,
}

impl TemporalSegment {
    pub fn new(start: f64, end: f64, score: f64) -> Result<Self> {
        let seg = Self { start, end, score };
        seg.validate()?;
        Ok(seg)
    }

    /// Segment without a meaningful score (ground truth, unscored captions).
    pub fn unscored(start: f64, end: f64) -> Result<Self> {
        Self::new(start, end, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.start.is_finite() && self.end.is_finite()) || self.start < 0.0 {
            return Err(Error::InvalidSegment(format!(
                "bounds must be finite with start >= 0, got [{}, {}]",
                self.start, self.end
            )));
        }
        if self.end <= self.start {
            return Err(Error::InvalidSegment(format!(
                "end {} must be greater than start {}",
                self.end, self.start
            )));
        }
        if !(0.0..=1.0).contains(&self.score) {
            return Err(Error::InvalidSegment(format!(
                "score {} outside [0, 1]",
                self.score
            )));
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }

    /// Length of the open-interval intersection; touching intervals give 0.
    pub fn intersection(&self, other: &Self) -> f64 {
        (self.end.min(other.end) - self.start.max(other.start)).max(0.0)
    }
}

/// Canonical proposal order: descending score, then ascending start, then ascending end.
pub fn canonical_cmp(a: &TemporalSegment, b: &TemporalSegment) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then(a.start.total_cmp(&b.start))
        .then(a.end.total_cmp(&b.end))
}

/// Time intersection-over-union of two intervals, in `[0, 1]`.
pub fn tiou(a: &TemporalSegment, b: &TemporalSegment) -> f64 {
    let inter = a.intersection(b);
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.duration() + b.duration() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Proposals for a single video, kept in canonical order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalSet {
    video_id: String,
    duration: f64,
    segments: Vec<TemporalSegment>,
}

impl ProposalSet {
    /// Validates every segment against `duration` and sorts into canonical order.
    pub fn new(
        video_id: impl Into<String>,
        duration: f64,
        mut segments: Vec<TemporalSegment>,
    ) -> Result<Self> {
        let video_id = video_id.into();
        if !(duration.is_finite() && duration > 0.0) {
            return Err(Error::InvalidProposals {
                video_id,
                reason: format!("duration must be positive, got {duration}"),
            });
        }
        for seg in &segments {
            seg.validate().map_err(|e| Error::InvalidProposals {
                video_id: video_id.clone(),
                reason: e.to_string(),
            })?;
            if seg.end > duration {
                return Err(Error::InvalidProposals {
                    video_id,
                    reason: format!("segment end {} exceeds duration {duration}", seg.end),
                });
            }
        }
        segments.sort_by(canonical_cmp);
        Ok(Self {
            video_id,
            duration,
            segments,
        })
    }

    pub fn video_id(&self) -> &str {
        &self.video_id
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn segments(&self) -> &[TemporalSegment] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }
}

fn check_threshold(threshold: f64) -> Result<()> {
    if (0.0..=1.0).contains(&threshold) {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "NMS threshold {threshold} outside [0, 1]"
        )))
    }
}

/// Greedy NMS over an arbitrary slice; returns indices of kept segments in
/// canonical order. A segment is discarded when its tIoU with an already
/// kept one is strictly greater than `threshold`.
pub fn nms_indices(segments: &[TemporalSegment], threshold: f64) -> Result<Vec<usize>> {
    check_threshold(threshold)?;
    let mut order: Vec<usize> = (0..segments.len()).collect();
    order.sort_by(|&i, &j| canonical_cmp(&segments[i], &segments[j]).then(i.cmp(&j)));

    let mut kept: Vec<usize> = Vec::new();
    for idx in order {
        let cand = &segments[idx];
        if kept
            .iter()
            .all(|&k| tiou(&segments[k], cand) <= threshold)
        {
            kept.push(idx);
        }
    }
    Ok(kept)
}

pub fn nms(proposals: &ProposalSet, threshold: f64) -> Result<ProposalSet> {
    let kept = nms_indices(&proposals.segments, threshold)?;
    Ok(ProposalSet {
        video_id: proposals.video_id.clone(),
        duration: proposals.duration,
        segments: kept.into_iter().map(|i| proposals.segments[i]).collect(),
    })
}

/// Number of segments that survive NMS at each threshold.
pub fn segment_count_profile(
    proposals: &ProposalSet,
    thresholds: &[f64],
) -> Result<Vec<(f64, usize)>> {
    thresholds
        .iter()
        .map(|&t| Ok((t, nms_indices(&proposals.segments, t)?.len())))
        .collect()
}
