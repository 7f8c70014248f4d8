use denseval::caption_metrics::{align, meteor, modified_ngram_precision, TokenSequence};
use denseval::classifier::{featurize, loss_and_gradient, train, Hyperparams, LinearModel, Vocabulary};
use denseval::corpus::{
    merge_transcripts, normalize_text, stratified_split, Label, LabeledSummary, NormalizeRules,
    Remainder, StopWords,
};
use denseval::detection::{match_detections, pr_curve, Detection, GroundTruthInstance, MatchFlag};
use denseval::segments::{nms, segment_count_profile, tiou, ProposalSet, TemporalSegment};
use denseval_oracles as oracle;
use proptest::prelude::*;

fn segment() -> impl Strategy<Value = TemporalSegment> {
    // Quarter-second grid so ties and touching intervals actually occur.
    (0u32..80, 1u32..40, 0u32..=10).prop_map(|(s, len, score)| TemporalSegment {
        start: s as f64 * 0.25,
        end: (s + len) as f64 * 0.25,
        score: score as f64 / 10.0,
    })
}

fn proposals(max: usize) -> impl Strategy<Value = ProposalSet> {
    prop::collection::vec(segment(), 0..=max)
        .prop_map(|segs| ProposalSet::new("v", 30.0, segs).unwrap())
}

fn words(max_len: usize) -> impl Strategy<Value = Vec<&'static str>> {
    prop::collection::vec(prop::sample::select(vec!["a", "b", "c", "d", "e"]), 0..=max_len)
}

fn seq(w: &[&str]) -> TokenSequence {
    TokenSequence::from_tokens(w.iter().copied()).unwrap()
}

fn as_tuple(s: &TemporalSegment) -> oracle::Interval {
    (s.start, s.end, s.score)
}

proptest! {
    #[test]
    fn tiou_symmetric_and_bounded(a in segment(), b in segment()) {
        let ab = tiou(&a, &b);
        prop_assert_eq!(ab, tiou(&b, &a));
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(tiou(&a, &a), 1.0);
        prop_assert!((ab - oracle::interval_iou(as_tuple(&a), as_tuple(&b))).abs() < 1e-12);
    }

    #[test]
    fn nms_matches_naive_reference(p in proposals(8), t in 0.0f64..=1.0) {
        let kept = nms(&p, t).unwrap();
        let tuples: Vec<_> = p.segments().iter().map(as_tuple).collect();
        let expected: Vec<_> = oracle::naive_nms(&tuples, t).into_iter().map(|i| tuples[i]).collect();
        let got: Vec<_> = kept.segments().iter().map(as_tuple).collect();
        prop_assert_eq!(&got, &expected);
        prop_assert_eq!(nms(&kept, t).unwrap(), kept.clone());
        // every discarded segment is covered by a kept one of >= score
        for s in p.segments() {
            if !kept.segments().contains(s) {
                prop_assert!(kept.segments().iter().any(|k| k.score >= s.score && tiou(k, s) > t));
            }
        }
    }

    #[test]
    fn count_profile_extremes(p in proposals(8), t in 0.0f64..=1.0) {
        let counts = segment_count_profile(&p, &[t, 1.0]).unwrap();
        prop_assert_eq!(counts[1].1, p.len());
        prop_assert!(counts[0].1 <= p.len());
        prop_assert_eq!(counts[0].1 == 0, p.is_empty());
    }

    #[test]
    fn precision_matches_counting_oracle(c in words(10), r in words(10), n in 1usize..=4) {
        let got = modified_ngram_precision(&seq(&c), &[seq(&r)], n).unwrap();
        prop_assert_eq!(got, oracle::clipped_precision(&c, &[r.clone()], n));
    }

    #[test]
    fn alignment_matches_exhaustive_search(c in words(7), r in words(7)) {
        let cs: Vec<String> = c.iter().map(|s| s.to_string()).collect();
        let rs: Vec<String> = r.iter().map(|s| s.to_string()).collect();
        prop_assert_eq!(align(&cs, &rs), oracle::brute_force_alignment(&c, &r));
    }

    #[test]
    fn meteor_bounded_and_monotone(c in words(8), r in words(8)) {
        prop_assume!(!c.is_empty() && !r.is_empty());
        let m = meteor(&seq(&c), &seq(&r)).unwrap();
        prop_assert!((0.0..=1.0).contains(&m.score));
        prop_assert!(m.chunks <= m.matches);
        let mut c2 = c.clone();
        c2.push("zz");
        prop_assert!(meteor(&seq(&c2), &seq(&r)).unwrap().precision <= m.precision);
        let mut r2 = r.clone();
        r2.push("zz");
        prop_assert!(meteor(&seq(&c), &seq(&r2)).unwrap().recall <= m.recall);
    }

    #[test]
    fn normalize_is_idempotent(
        text in "[A-Za-z ,.!]{0,40}( a person| person| the)?[A-Za-z ,.]{0,20}",
        lc in any::<bool>(), sp in any::<bool>(), sw in any::<bool>(), sub in any::<bool>(),
    ) {
        let rules = NormalizeRules { lowercase: lc, strip_punctuation: sp, remove_stopwords: sw, substitute_person_terms: sub };
        let stop = StopWords::default();
        let once = normalize_text(&text, rules, &stop);
        prop_assert_eq!(normalize_text(&once, rules, &stop), once);
    }

    #[test]
    fn merge_preserves_tokens(items in prop::collection::vec("[a-z]{1,5}( [a-z]{1,5}){0,3}", 0..20), k in 1usize..5) {
        let merged = merge_transcripts(&items, k, Remainder::Keep).unwrap();
        let flat = |v: &[String]| -> Vec<String> {
            v.iter().flat_map(|s| denseval::caption_metrics::tokenize(s).tokens().to_vec()).collect()
        };
        prop_assert_eq!(flat(&merged), flat(&items));
        prop_assert_eq!(merged.len(), items.len().div_ceil(k));
    }

    #[test]
    fn split_is_exact_partition(n_pos in 1usize..40, n_neg in 1usize..40, seed in any::<u64>()) {
        let data: Vec<LabeledSummary> = (0..n_pos)
            .map(|i| LabeledSummary::new(format!("p{i}"), Label::Suspicious))
            .chain((0..n_neg).map(|i| LabeledSummary::new(format!("n{i}"), Label::NonSuspicious)))
            .collect();
        let s = stratified_split(&data, 0.7, seed).unwrap();
        prop_assert_eq!(s.clone(), stratified_split(&data, 0.7, seed).unwrap());
        let mut all: Vec<String> = s.train.iter().chain(&s.test).map(|x| x.text.clone()).collect();
        all.sort();
        let mut orig: Vec<String> = data.iter().map(|x| x.text.clone()).collect();
        orig.sort();
        prop_assert_eq!(all, orig);
        let test_pos = s.test.iter().filter(|x| x.label == Label::Suspicious).count() as f64;
        prop_assert!((test_pos - 0.3 * n_pos as f64).abs() <= 1.0);
    }
}

fn det_strategy() -> impl Strategy<Value = Vec<(u8, TemporalSegment)>> {
    prop::collection::vec((0u8..2, segment()), 0..=5)
}

proptest! {
    #[test]
    fn matching_agrees_with_oracle(d in det_strategy(), g in det_strategy(), t in 0.0f64..=1.0) {
        let vid = |v: u8| if v == 0 { "v0" } else { "v1" };
        let dets: Vec<Detection> = d.iter().map(|(v, s)| Detection { video_id: vid(*v).into(), class_label: "c".into(), segment: *s }).collect();
        let gts: Vec<GroundTruthInstance> = g.iter().map(|(v, s)| GroundTruthInstance { video_id: vid(*v).into(), class_label: "c".into(), segment: *s }).collect();
        let got: Vec<bool> = match_detections(&dets, &gts, t).unwrap().into_iter().map(|(_, f)| f.is_tp()).collect();
        let od: Vec<(&str, oracle::Interval)> = d.iter().map(|(v, s)| (vid(*v), as_tuple(s))).collect();
        let og: Vec<(&str, oracle::Interval)> = g.iter().map(|(v, s)| (vid(*v), as_tuple(s))).collect();
        prop_assert_eq!(got, oracle::greedy_match(&od, &og, t));
    }

    #[test]
    fn ap_matches_envelope_oracle(flags in prop::collection::vec(any::<bool>(), 0..20), extra in 0usize..5) {
        let num_gt = flags.iter().filter(|f| **f).count() + extra;
        prop_assume!(num_gt > 0);
        let mf: Vec<MatchFlag> = flags.iter().map(|&f| if f { MatchFlag::TruePositive } else { MatchFlag::FalsePositive }).collect();
        let curve = pr_curve(&mf, num_gt).unwrap();
        prop_assert!((curve.ap - oracle::envelope_ap(&flags, num_gt)).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&curve.ap));
        for w in curve.points.windows(2) {
            prop_assert!(w[1].0 >= w[0].0);
        }
        let mut with_fp = mf.clone();
        with_fp.push(MatchFlag::FalsePositive);
        prop_assert!(pr_curve(&with_fp, num_gt).unwrap().ap <= curve.ap + 1e-12);
        if extra > 0 {
            let mut with_tp = mf.clone();
            with_tp.push(MatchFlag::TruePositive);
            prop_assert!(pr_curve(&with_tp, num_gt).unwrap().ap >= curve.ap - 1e-12);
        }
    }

    #[test]
    fn gradient_matches_finite_differences(
        w in prop::collection::vec(-1.0f64..1.0, 1..=20),
        b in -1.0f64..1.0,
        rows in prop::collection::vec((prop::collection::vec((0usize..20, 1u8..4), 0..6), any::<bool>()), 1..8),
    ) {
        let v = w.len();
        let features: Vec<Vec<(usize, f64)>> = rows.iter().map(|(x, _)| {
            let mut m = std::collections::BTreeMap::new();
            for &(i, c) in x { *m.entry(i % v).or_insert(0.0) += c as f64; }
            m.into_iter().collect()
        }).collect();
        let labels: Vec<f64> = rows.iter().map(|(_, y)| if *y { 1.0 } else { 0.0 }).collect();
        let (_, grad, grad_b) = loss_and_gradient(&w, b, &features, &labels);
        let mut params = w.clone();
        params.push(b);
        let numeric = oracle::central_difference(|p| {
            loss_and_gradient(&p[..v], p[v], &features, &labels).0
        }, &params, 1e-6);
        let analytic: Vec<f64> = grad.iter().copied().chain([grad_b]).collect();
        for (a, n) in analytic.iter().zip(&numeric) {
            let scale = a.abs().max(n.abs()).max(1e-3);
            prop_assert!((a - n).abs() / scale < 1e-5, "analytic {} numeric {}", a, n);
        }
    }
}

#[test]
fn prediction_invariant_under_feature_permutation() {
    let data = vec![
        LabeledSummary::new("man holding gun", Label::Suspicious),
        LabeledSummary::new("man breaks window", Label::Suspicious),
        LabeledSummary::new("woman walks dog", Label::NonSuspicious),
        LabeledSummary::new("children play park", Label::NonSuspicious),
    ];
    let m = train(&data, Hyperparams { learning_rate: 0.5, ..Hyperparams::default() }).unwrap();
    let n = m.vocab.len();
    let perm: Vec<usize> = (0..n).map(|i| (i * 7 + 3) % n).collect();
    let mut grams = vec![String::new(); n];
    let mut weights = vec![0.0; n];
    for (old, &new) in perm.iter().enumerate() {
        grams[new] = m.vocab.grams()[old].clone();
        weights[new] = m.weights[old];
    }
    let permuted = LinearModel { vocab: Vocabulary::from_grams(grams).unwrap(), weights, ..m.clone() };
    for text in ["man holding gun", "woman walks dog", "man walks", "unknown words here"] {
        assert_eq!(m.predict(text).0, permuted.predict(text).0);
        assert!((m.predict(text).1 - permuted.predict(text).1).abs() < 1e-12);
        assert_eq!(featurize(text, &m.vocab).len(), featurize(text, &permuted.vocab).len());
    }
}

#[test]
fn seeded_training_is_bit_reproducible() {
    let data = vec![
        LabeledSummary::new("man holding gun", Label::Suspicious),
        LabeledSummary::new("woman walks dog", Label::NonSuspicious),
    ];
    let h = Hyperparams { learning_rate: 0.1, init_scale: 0.05, seed: 3, ..Hyperparams::default() };
    let a = train(&data, h).unwrap();
    let b = train(&data, h).unwrap();
    assert_eq!(a.weights.iter().map(|w| w.to_bits()).collect::<Vec<_>>(), b.weights.iter().map(|w| w.to_bits()).collect::<Vec<_>>());
    assert_eq!(a.bias.to_bits(), b.bias.to_bits());
    assert_eq!(a.loss_history, b.loss_history);
}
