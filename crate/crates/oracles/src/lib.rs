//! Naive reference implementations for differential tests.
//!
//! Everything here works on plain tuples and string slices and shares no
//! code with the `denseval` crate. Speed is irrelevant; each function is the
//! most literal reading of its definition.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

/// `(start, end, score)`.
pub type Interval = (f64, f64, f64);

pub fn interval_iou(a: Interval, b: Interval) -> f64 {
    let lo = if a.0 > b.0 { a.0 } else { b.0 };
    let hi = if a.1 < b.1 { a.1 } else { b.1 };
    if hi <= lo {
        return 0.0;
    }
    let inter = hi - lo;
    inter / ((a.1 - a.0) + (b.1 - b.0) - inter)
}

fn ranks_before(a: Interval, ia: usize, b: Interval, ib: usize) -> bool {
    if a.2 != b.2 {
        return a.2 > b.2;
    }
    if a.0 != b.0 {
        return a.0 < b.0;
    }
    if a.1 != b.1 {
        return a.1 < b.1;
    }
    ia < ib
}

/// O(n²) greedy suppression: repeatedly pull the top-ranked survivor and
/// delete everything overlapping it by more than `threshold`.
/// Returns indices into `segments` in selection order.
pub fn naive_nms(segments: &[Interval], threshold: f64) -> Vec<usize> {
    let mut alive: Vec<usize> = (0..segments.len()).collect();
    let mut kept = Vec::new();
    while !alive.is_empty() {
        let mut top = 0;
        for k in 1..alive.len() {
            if ranks_before(segments[alive[k]], alive[k], segments[alive[top]], alive[top]) {
                top = k;
            }
        }
        let chosen = alive.remove(top);
        kept.push(chosen);
        alive.retain(|&i| !(interval_iou(segments[chosen], segments[i]) > threshold));
    }
    kept
}

/// Clipped n-gram precision by literal counting over all positions.
pub fn clipped_precision(candidate: &[&str], references: &[Vec<&str>], n: usize) -> f64 {
    if candidate.len() < n {
        return 0.0;
    }
    let occurrences = |seq: &[&str], gram: &[&str]| -> usize {
        if seq.len() < n {
            return 0;
        }
        (0..=seq.len() - n).filter(|&s| &seq[s..s + n] == gram).count()
    };
    let total = candidate.len() - n + 1;
    let mut credited = 0;
    for start in 0..total {
        let gram = &candidate[start..start + n];
        // Count each distinct gram once, at its first occurrence.
        if (0..start).any(|p| &candidate[p..p + n] == gram) {
            continue;
        }
        let in_cand = occurrences(candidate, gram);
        let max_ref = references
            .iter()
            .map(|r| occurrences(r, gram))
            .max()
            .unwrap_or(0);
        credited += in_cand.min(max_ref);
    }
    credited as f64 / total as f64
}

/// Exhaustive search over every injective exact-match alignment.
/// Returns `(max matches, min chunks among maximal alignments)`.
pub fn brute_force_alignment(candidate: &[&str], reference: &[&str]) -> (usize, usize) {
    fn chunks(links: &[(usize, usize)]) -> usize {
        links
            .iter()
            .filter(|&&(i, j)| {
                !(i > 0 && j > 0 && links.contains(&(i - 1, j - 1)))
            })
            .count()
    }
    fn rec(
        i: usize,
        cand: &[&str],
        reference: &[&str],
        used: &mut Vec<bool>,
        links: &mut Vec<(usize, usize)>,
        best: &mut (usize, usize),
    ) {
        if i == cand.len() {
            let m = links.len();
            let c = chunks(links);
            if m > best.0 || (m == best.0 && c < best.1) {
                *best = (m, c);
            }
            return;
        }
        rec(i + 1, cand, reference, used, links, best);
        for j in 0..reference.len() {
            if !used[j] && reference[j] == cand[i] {
                used[j] = true;
                links.push((i, j));
                rec(i + 1, cand, reference, used, links, best);
                links.pop();
                used[j] = false;
            }
        }
    }
    let mut best = (0, 0);
    rec(
        0,
        candidate,
        reference,
        &mut vec![false; reference.len()],
        &mut Vec::new(),
        &mut best,
    );
    best
}

/// Area under the interpolated precision envelope: for every rank where
/// recall rises, take the best precision at that recall or beyond.
pub fn envelope_ap(flags: &[bool], num_gt: usize) -> f64 {
    let mut recall = Vec::new();
    let mut precision = Vec::new();
    let mut tp = 0;
    for (k, &f) in flags.iter().enumerate() {
        if f {
            tp += 1;
        }
        recall.push(tp as f64 / num_gt as f64);
        precision.push(tp as f64 / (k + 1) as f64);
    }
    let mut area = 0.0;
    let mut prev = 0.0;
    for k in 0..flags.len() {
        if recall[k] > prev {
            let best = (k..flags.len())
                .map(|q| precision[q])
                .fold(0.0, f64::max);
            area += (recall[k] - prev) * best;
            prev = recall[k];
        }
    }
    area
}

/// Greedy single-claim matching over a precomputed overlap matrix.
/// `dets` and `gts` are `(video, interval)`; detections are ranked by
/// descending score, then start, then end, then video id.
/// Returns the TP flag of each detection in ranked order.
pub fn greedy_match(dets: &[(&str, Interval)], gts: &[(&str, Interval)], threshold: f64) -> Vec<bool> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| {
        let (va, da) = dets[a];
        let (vb, db) = dets[b];
        db.2.partial_cmp(&da.2)
            .unwrap()
            .then(da.0.partial_cmp(&db.0).unwrap())
            .then(da.1.partial_cmp(&db.1).unwrap())
            .then(va.cmp(vb))
    });
    let overlap: Vec<Vec<f64>> = dets
        .iter()
        .map(|&(vd, d)| {
            gts.iter()
                .map(|&(vg, g)| if vd == vg { interval_iou(d, g) } else { -1.0 })
                .collect()
        })
        .collect();
    let mut claimed = vec![false; gts.len()];
    order
        .into_iter()
        .map(|d| {
            let candidates: Vec<usize> = (0..gts.len())
                .filter(|&g| !claimed[g] && overlap[d][g] >= 0.0)
                .collect();
            let Some(&first) = candidates.first() else {
                return false;
            };
            let mut pick = first;
            for &g in &candidates {
                if overlap[d][g] > overlap[d][pick] {
                    pick = g;
                }
            }
            if overlap[d][pick] >= threshold {
                claimed[pick] = true;
                true
            } else {
                false
            }
        })
        .collect()
}

/// Central finite-difference gradient of `f` at `x`.
pub fn central_difference<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut plus = x.to_vec();
            let mut minus = x.to_vec();
            plus[i] += h;
            minus[i] -= h;
            (f(&plus) - f(&minus)) / (2.0 * h)
        })
        .collect()
}
