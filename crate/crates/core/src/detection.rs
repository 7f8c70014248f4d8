//! Average precision and mAP over temporal detections.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::segments::{canonical_cmp, tiou, TemporalSegment};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub video_id: String,
    pub class_label: String,
    /// The segment score is the detection confidence.
    pub segment: TemporalSegment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthInstance {
    pub video_id: String,
    pub class_label: String,
    pub segment: TemporalSegment,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MatchFlag {
    TruePositive,
    FalsePositive,
}

impl MatchFlag {
    pub fn is_tp(self) -> bool {
        self == MatchFlag::TruePositive
    }
}

/// Greedy single-claim matching for one class.
///
/// Detections are visited by descending confidence; each claims the unclaimed
/// same-video ground truth of highest tIoU (first in input order on ties) and
/// is a true positive when that tIoU is at least `iou_threshold`.
pub fn match_detections(
    dets: &[Detection],
    gts: &[GroundTruthInstance],
    iou_threshold: f64,
) -> Result<Vec<(Detection, MatchFlag)>> {
    if !(0.0..=1.0).contains(&iou_threshold) {
        return Err(Error::Domain(format!(
            "IoU threshold {iou_threshold} outside [0, 1]"
        )));
    }
    let labels: BTreeSet<&str> = dets
        .iter()
        .map(|d| d.class_label.as_str())
        .chain(gts.iter().map(|g| g.class_label.as_str()))
        .collect();
    if labels.len() > 1 {
        return Err(Error::Domain(format!(
            "detections span several classes: {labels:?}"
        )));
    }

    let mut order: Vec<&Detection> = dets.iter().collect();
    order.sort_by(|a, b| {
        canonical_cmp(&a.segment, &b.segment).then_with(|| a.video_id.cmp(&b.video_id))
    });

    let mut claimed = vec![false; gts.len()];
    let mut out = Vec::with_capacity(dets.len());
    for det in order {
        let mut best: Option<(usize, f64)> = None;
        for (k, gt) in gts.iter().enumerate() {
            if claimed[k] || gt.video_id != det.video_id {
                continue;
            }
            let overlap = tiou(&det.segment, &gt.segment);
            if best.is_none_or(|(_, b)| overlap > b) {
                best = Some((k, overlap));
            }
        }
        let flag = match best {
            Some((k, overlap)) if overlap >= iou_threshold => {
                claimed[k] = true;
                MatchFlag::TruePositive
            }
            _ => MatchFlag::FalsePositive,
        };
        out.push((det.clone(), flag));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrCurve {
    /// `(recall, precision)` after each detection, in ranked order.
    pub points: Vec<(f64, f64)>,
    pub ap: f64,
}

/// Cumulative precision/recall and all-point interpolated AP.
pub fn pr_curve(flags: &[MatchFlag], num_gt: usize) -> Result<PrCurve> {
    if num_gt == 0 {
        return Err(Error::Domain(
            "recall is undefined without ground truth".into(),
        ));
    }
    let mut tp = 0usize;
    let points: Vec<(f64, f64)> = flags
        .iter()
        .enumerate()
        .map(|(k, f)| {
            if f.is_tp() {
                tp += 1;
            }
            (tp as f64 / num_gt as f64, tp as f64 / (k + 1) as f64)
        })
        .collect();

    // Precision envelope, non-increasing from the right.
    let mut envelope: Vec<f64> = points.iter().map(|&(_, p)| p).collect();
    for k in (0..envelope.len().saturating_sub(1)).rev() {
        envelope[k] = envelope[k].max(envelope[k + 1]);
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (&(recall, _), &p) in points.iter().zip(&envelope) {
        ap += (recall - prev_recall) * p;
        prev_recall = recall;
    }
    Ok(PrCurve {
        points,
        ap: ap.clamp(0.0, 1.0),
    })
}

/// AP of one class at one IoU threshold.
pub fn average_precision(
    dets: &[Detection],
    gts: &[GroundTruthInstance],
    iou_threshold: f64,
) -> Result<f64> {
    let matched = match_detections(dets, gts, iou_threshold)?;
    let flags: Vec<MatchFlag> = matched.into_iter().map(|(_, f)| f).collect();
    Ok(pr_curve(&flags, gts.len())?.ap)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassAp {
    pub class_label: String,
    /// AP at each IoU threshold, in the order given.
    pub per_threshold: Vec<f64>,
    /// Weighted mean over thresholds.
    pub ap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapReport {
    pub iou_thresholds: Vec<f64>,
    pub classes: Vec<ClassAp>,
    pub map: f64,
}

/// Per-class AP table plus mAP, with explicit weights over IoU thresholds.
///
/// Classes are those present in `gts`; detections of other classes are
/// ignored. Weights are normalized to sum to one.
pub fn map_report_weighted(
    dets: &[Detection],
    gts: &[GroundTruthInstance],
    iou_thresholds: &[f64],
    weights: &[f64],
) -> Result<MapReport> {
    if gts.is_empty() {
        return Err(Error::Domain("mAP needs at least one ground truth".into()));
    }
    if iou_thresholds.is_empty() {
        return Err(Error::Domain("no IoU thresholds given".into()));
    }
    if weights.len() != iou_thresholds.len()
        || weights.iter().any(|w| !(w.is_finite() && *w >= 0.0))
    {
        return Err(Error::Domain(
            "one finite non-negative weight per threshold is required".into(),
        ));
    }
    let weight_sum: f64 = weights.iter().sum();
    if weight_sum <= 0.0 {
        return Err(Error::Domain("threshold weights sum to zero".into()));
    }

    let classes: BTreeSet<&str> = gts.iter().map(|g| g.class_label.as_str()).collect();
    let mut out = Vec::with_capacity(classes.len());
    for class in classes {
        let class_dets: Vec<Detection> = dets
            .iter()
            .filter(|d| d.class_label == class)
            .cloned()
            .collect();
        let class_gts: Vec<GroundTruthInstance> = gts
            .iter()
            .filter(|g| g.class_label == class)
            .cloned()
            .collect();
        let per_threshold = iou_thresholds
            .iter()
            .map(|&t| average_precision(&class_dets, &class_gts, t))
            .collect::<Result<Vec<_>>>()?;
        let ap = per_threshold
            .iter()
            .zip(weights)
            .map(|(a, w)| a * w)
            .sum::<f64>()
            / weight_sum;
        out.push(ClassAp {
            class_label: class.to_string(),
            per_threshold,
            ap,
        });
    }
    let map = out.iter().map(|c| c.ap).sum::<f64>() / out.len() as f64;
    Ok(MapReport {
        iou_thresholds: iou_thresholds.to_vec(),
        classes: out,
        map,
    })
}

pub fn map_report(
    dets: &[Detection],
    gts: &[GroundTruthInstance],
    iou_thresholds: &[f64],
) -> Result<MapReport> {
    let weights = vec![1.0; iou_thresholds.len()];
    map_report_weighted(dets, gts, iou_thresholds, &weights)
}

/// Uniform mean over thresholds, then over classes.
pub fn mean_ap(
    dets: &[Detection],
    gts: &[GroundTruthInstance],
    iou_thresholds: &[f64],
) -> Result<f64> {
    Ok(map_report(dets, gts, iou_thresholds)?.map)
}

fn segment_csv_rows(
    text: &str,
    origin: &Path,
    header: &[&str],
) -> Result<Vec<(String, String, TemporalSegment)>> {
    let parse_err = |location: String, message: String| Error::Parse {
        path: origin.to_path_buf(),
        location,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let got: Vec<String> = rdr
        .headers()
        .map_err(|e| parse_err("line 1".into(), e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if got != header {
        return Err(parse_err(
            "line 1".into(),
            format!("expected header `{}`, got `{}`", header.join(","), got.join(",")),
        ));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let loc = e.position().map_or("unknown".into(), |p| format!("line {}", p.line()));
            parse_err(loc, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let num = |k: usize| -> Result<f64> {
            rec[k].parse::<f64>().map_err(|e| {
                parse_err(format!("line {line}"), format!("{} {:?}: {e}", header[k], &rec[k]))
            })
        };
        let score = if header.len() == 5 { num(4)? } else { 1.0 };
        let segment = TemporalSegment::new(num(2)?, num(3)?, score).map_err(|e| {
            Error::InvalidRecord {
                path: origin.to_path_buf(),
                video_id: rec[0].to_string(),
                reason: format!("line {line}: {e}"),
            }
        })?;
        rows.push((rec[0].to_string(), rec[1].to_string(), segment));
    }
    Ok(rows)
}

/// Parses `video_id,class,start,end,score` CSV.
pub fn parse_detections(text: &str, origin: &Path) -> Result<Vec<Detection>> {
    Ok(
        segment_csv_rows(text, origin, &["video_id", "class", "start", "end", "score"])?
            .into_iter()
            .map(|(video_id, class_label, segment)| Detection {
                video_id,
                class_label,
                segment,
            })
            .collect(),
    )
}

/// Parses `video_id,class,start,end` CSV.
pub fn parse_ground_truth_instances(text: &str, origin: &Path) -> Result<Vec<GroundTruthInstance>> {
    Ok(
        segment_csv_rows(text, origin, &["video_id", "class", "start", "end"])?
            .into_iter()
            .map(|(video_id, class_label, segment)| GroundTruthInstance {
                video_id,
                class_label,
                segment,
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use MatchFlag::{FalsePositive as FP, TruePositive as TP};

    fn det(class: &str, start: f64, end: f64, score: f64) -> Detection {
        Detection {
            video_id: "v".into(),
            class_label: class.into(),
            segment: TemporalSegment::new(start, end, score).unwrap(),
        }
    }

    fn gt(class: &str, start: f64, end: f64) -> GroundTruthInstance {
        GroundTruthInstance {
            video_id: "v".into(),
            class_label: class.into(),
            segment: TemporalSegment::unscored(start, end).unwrap(),
        }
    }

    fn flags(m: &[(Detection, MatchFlag)]) -> Vec<MatchFlag> {
        m.iter().map(|(_, f)| *f).collect()
    }

    #[test]
    fn match_examples() {
        let g = [gt("a", 0.0, 10.0)];
        let m = match_detections(&[det("a", 0.0, 10.0, 0.9)], &g, 0.5).unwrap();
        assert_eq!(flags(&m), vec![TP]);
        let m = match_detections(&[det("a", 20.0, 30.0, 0.9)], &g, 0.5).unwrap();
        assert_eq!(flags(&m), vec![FP]);
        let m = match_detections(
            &[det("a", 1.0, 10.0, 0.6), det("a", 0.0, 9.0, 0.8)],
            &g,
            0.5,
        )
        .unwrap();
        assert_eq!(m[0].0.segment.score, 0.8);
        assert_eq!(flags(&m), vec![TP, FP]);
    }

    #[test]
    fn match_is_per_video() {
        let mut d = det("a", 0.0, 10.0, 0.9);
        d.video_id = "other".into();
        let m = match_detections(&[d], &[gt("a", 0.0, 10.0)], 0.5).unwrap();
        assert_eq!(flags(&m), vec![FP]);
    }

    #[test]
    fn match_rejects_mixed_classes() {
        let r = match_detections(&[det("a", 0.0, 1.0, 0.5)], &[gt("b", 0.0, 1.0)], 0.5);
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn threshold_is_inclusive() {
        // tiou([0,10],[5,15]) = 1/3
        let g = [gt("a", 5.0, 15.0)];
        let m = match_detections(&[det("a", 0.0, 10.0, 0.5)], &g, 1.0 / 3.0).unwrap();
        assert_eq!(flags(&m), vec![TP]);
    }

    #[test]
    fn pr_curve_examples() {
        let c = pr_curve(&[TP], 1).unwrap();
        assert_eq!(c.points, vec![(1.0, 1.0)]);
        assert_eq!(c.ap, 1.0);
        assert_eq!(pr_curve(&[FP], 1).unwrap().ap, 0.0);
        let c = pr_curve(&[TP, FP, TP], 2).unwrap();
        assert_eq!(c.points, vec![(0.5, 1.0), (0.5, 0.5), (1.0, 2.0 / 3.0)]);
        assert!((c.ap - 0.833333333).abs() < 1e-6);
        assert!(pr_curve(&[TP], 0).is_err());
        assert_eq!(pr_curve(&[], 3).unwrap().ap, 0.0);
    }

    #[test]
    fn mean_ap_examples() {
        let g = [gt("a", 0.0, 10.0), gt("a", 20.0, 30.0)];
        let d = [det("a", 0.0, 10.0, 0.9), det("a", 20.0, 30.0, 0.8)];
        assert_eq!(mean_ap(&d, &g, &[0.5, 0.75, 0.95]).unwrap(), 1.0);

        let g2 = [gt("a", 0.0, 10.0), gt("b", 0.0, 10.0)];
        let d2 = [det("a", 0.0, 10.0, 0.9)];
        assert_eq!(mean_ap(&d2, &g2, &[0.5]).unwrap(), 0.5);

        // tp, fp, tp for class a (AP 5/6) plus a perfect class b.
        let g3 = [
            gt("a", 0.0, 10.0),
            gt("a", 20.0, 30.0),
            gt("b", 40.0, 50.0),
        ];
        let d3 = [
            det("a", 0.0, 10.0, 0.9),
            det("a", 50.0, 60.0, 0.8),
            det("a", 20.0, 30.0, 0.7),
            det("b", 40.0, 50.0, 0.9),
        ];
        let m = mean_ap(&d3, &g3, &[0.5]).unwrap();
        assert!((m - (5.0 / 6.0 + 1.0) / 2.0).abs() < 1e-12);
        assert!((m - 0.9167).abs() < 1e-4);

        assert!(mean_ap(&d3, &[], &[0.5]).is_err());
        assert!(mean_ap(&d3, &g3, &[]).is_err());
    }

    #[test]
    fn detection_csv() {
        let p = Path::new("d.csv");
        let d = parse_detections("video_id,class,start,end,score\nv,a,0,10,0.9\n", p).unwrap();
        assert_eq!(d, vec![det("a", 0.0, 10.0, 0.9)]);
        let g = parse_ground_truth_instances("video_id,class,start,end\nv,a,0,10\n", p).unwrap();
        assert_eq!(g, vec![gt("a", 0.0, 10.0)]);
        assert!(parse_detections("video_id,class,start,end\n", p).is_err());
        let err = parse_detections("video_id,class,start,end,score\nv,a,0,x,0.9\n", p).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        assert!(matches!(
            parse_ground_truth_instances("video_id,class,start,end\nbad,a,5,1\n", p),
            Err(Error::InvalidRecord { .. })
        ));
    }

    #[test]
    fn weighted_thresholds() {
        let g = [gt("a", 0.0, 10.0)];
        // tiou = 0.8: TP at 0.5, FP at 0.9
        let d = [det("a", 0.0, 8.0, 0.9)];
        let r = map_report_weighted(&d, &g, &[0.5, 0.9], &[3.0, 1.0]).unwrap();
        assert_eq!(r.classes[0].per_threshold, vec![1.0, 0.0]);
        assert_eq!(r.map, 0.75);
        assert!(map_report_weighted(&d, &g, &[0.5], &[0.0]).is_err());
        assert!(map_report_weighted(&d, &g, &[0.5], &[1.0, 1.0]).is_err());
    }
}
