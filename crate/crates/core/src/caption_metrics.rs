//! Caption-quality metrics: BLEU@1–4 with brevity penalty, and METEOR.
//!
//! Both metrics work on [`TokenSequence`]s produced by [`tokenize`]. BLEU is
//! reported on a 0–100 scale. METEOR is computed on `[0, 1]` and scaled to
//! 0–100 only by [`corpus_eval`].

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lowercase word tokens with no whitespace and no empty entries.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct TokenSequence(Vec<String>);

impl TokenSequence {
    /// Builds a sequence from pre-split tokens, rejecting empty or
    /// whitespace-bearing entries.
    pub fn from_tokens<I, S>(tokens: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let tokens: Vec<String> = tokens.into_iter().map(Into::into).collect();
        if let Some(bad) = tokens
            .iter()
            .find(|t| t.is_empty() || t.chars().any(char::is_whitespace))
        {
            return Err(Error::Domain(format!("invalid token {bad:?}")));
        }
        Ok(Self(tokens))
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for TokenSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.join(" "))
    }
}

/// Lowercases, splits on whitespace and trims punctuation from both ends of
/// every token. Tokens that are pure punctuation disappear.
pub fn tokenize(text: &str) -> TokenSequence {
    TokenSequence(
        text.split_whitespace()
            .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
            .filter(|w| !w.is_empty())
            .collect(),
    )
}

/// Multiset of the n-grams of one sequence.
#[derive(Debug, Clone)]
pub struct NGramProfile<'a> {
    n: usize,
    counts: HashMap<&'a [String], usize>,
}

impl<'a> NGramProfile<'a> {
    pub fn new(seq: &'a TokenSequence, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("n-gram order must be >= 1".into()));
        }
        let mut counts = HashMap::new();
        if seq.len() >= n {
            for gram in seq.0.windows(n) {
                *counts.entry(gram).or_insert(0) += 1;
            }
        }
        Ok(Self { n, counts })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn count(&self, gram: &[String]) -> usize {
        self.counts.get(gram).copied().unwrap_or(0)
    }

    /// Total number of n-gram occurrences, `max(0, len - n + 1)`.
    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&'a [String], usize)> + '_ {
        self.counts.iter().map(|(g, c)| (*g, *c))
    }
}

/// Clipped n-gram precision of `candidate` against `references`.
pub fn modified_ngram_precision(
    candidate: &TokenSequence,
    references: &[TokenSequence],
    n: usize,
) -> Result<f64> {
    if references.is_empty() {
        return Err(Error::Domain("at least one reference is required".into()));
    }
    let cand = NGramProfile::new(candidate, n)?;
    let refs = references
        .iter()
        .map(|r| NGramProfile::new(r, n))
        .collect::<Result<Vec<_>>>()?;
    let total = cand.total();
    if total == 0 {
        return Ok(0.0);
    }
    let credited: usize = cand
        .iter()
        .map(|(gram, count)| {
            let max_ref = refs.iter().map(|r| r.count(gram)).max().unwrap_or(0);
            count.min(max_ref)
        })
        .sum();
    Ok(credited as f64 / total as f64)
}

/// `exp(-max(0, r/c - 1))` for reference length `r` and candidate length `c`.
pub fn brevity_penalty(reference_len: usize, candidate_len: usize) -> Result<f64> {
    if candidate_len == 0 {
        return Err(Error::Domain(
            "brevity penalty undefined for an empty candidate".into(),
        ));
    }
    let excess = reference_len as f64 / candidate_len as f64 - 1.0;
    Ok((-excess.max(0.0)).exp())
}

/// Reference length closest to `candidate_len`, ties going to the shorter one.
pub fn effective_reference_length(references: &[TokenSequence], candidate_len: usize) -> usize {
    references
        .iter()
        .map(TokenSequence::len)
        .min_by_key(|&len| (len.abs_diff(candidate_len), len))
        .unwrap_or(0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BleuMode {
    /// Precision of the single n-gram order `n`, times the brevity penalty.
    #[default]
    Individual,
    /// Uniform geometric mean of precisions for orders `1..=n`.
    Cumulative,
}

impl fmt::Display for BleuMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BleuMode::Individual => "individual",
            BleuMode::Cumulative => "cumulative",
        })
    }
}

impl std::str::FromStr for BleuMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "individual" => Ok(BleuMode::Individual),
            "cumulative" => Ok(BleuMode::Cumulative),
            other => Err(Error::Domain(format!("unknown BLEU mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BleuResult {
    pub n: usize,
    pub mode: BleuMode,
    /// Single-order precision (individual) or geometric mean (cumulative).
    pub precision: f64,
    pub brevity_penalty: f64,
    /// `precision * brevity_penalty * 100`.
    pub score: f64,
}

pub fn bleu(
    candidate: &TokenSequence,
    references: &[TokenSequence],
    n: usize,
    mode: BleuMode,
) -> Result<BleuResult> {
    if !(1..=4).contains(&n) {
        return Err(Error::Domain(format!("BLEU order {n} outside 1..=4")));
    }
    if references.is_empty() {
        return Err(Error::Domain("at least one reference is required".into()));
    }
    let bp = brevity_penalty(
        effective_reference_length(references, candidate.len()),
        candidate.len(),
    )?;
    let precision = match mode {
        BleuMode::Individual => modified_ngram_precision(candidate, references, n)?,
        BleuMode::Cumulative => {
            let mut log_sum = 0.0;
            let mut zero = false;
            for k in 1..=n {
                let p = modified_ngram_precision(candidate, references, k)?;
                if p == 0.0 {
                    zero = true;
                    break;
                }
                log_sum += p.ln();
            }
            if zero {
                0.0
            } else {
                (log_sum / n as f64).exp()
            }
        }
    };
    Ok(BleuResult {
        n,
        mode,
        precision,
        brevity_penalty: bp,
        score: precision * bp * 100.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeteorResult {
    /// Matched unigrams.
    pub matches: usize,
    /// Number of chunks the matches fall into.
    pub chunks: usize,
    pub precision: f64,
    pub recall: f64,
    pub fmean: f64,
    pub penalty: f64,
    /// In `[0, 1]`.
    pub score: f64,
}

/// Exact-match unigram METEOR against a single reference.
pub fn meteor(candidate: &TokenSequence, reference: &TokenSequence) -> Result<MeteorResult> {
    if candidate.is_empty() || reference.is_empty() {
        return Err(Error::Domain(
            "METEOR needs a non-empty candidate and reference".into(),
        ));
    }
    let (matches, chunks) = align(candidate.tokens(), reference.tokens());
    if matches == 0 {
        return Ok(MeteorResult {
            matches: 0,
            chunks: 0,
            precision: 0.0,
            recall: 0.0,
            fmean: 0.0,
            penalty: 0.0,
            score: 0.0,
        });
    }
    let precision = matches as f64 / candidate.len() as f64;
    let recall = matches as f64 / reference.len() as f64;
    let fmean = 10.0 * precision * recall / (recall + 9.0 * precision);
    let penalty = 0.5 * (chunks as f64 / matches as f64).powi(3);
    Ok(MeteorResult {
        matches,
        chunks,
        precision,
        recall,
        fmean,
        penalty,
        score: fmean * (1.0 - penalty),
    })
}

/// Beyond this many memoized search states the alignment falls back to a
/// greedy left-to-right pass (still maximal, chunk count may be suboptimal).
const ALIGN_STATE_LIMIT: usize = 1 << 20;

/// Maximum-cardinality exact alignment with the fewest chunks.
/// Returns `(matches, chunks)`.
pub fn align(candidate: &[String], reference: &[String]) -> (usize, usize) {
    Aligner::new(candidate, reference).solve()
}

struct Aligner<'a> {
    cand: &'a [String],
    /// Reference positions holding each candidate token (empty when absent).
    options: Vec<Vec<usize>>,
    /// Type id per candidate position.
    cand_type: Vec<usize>,
    /// Per type: matches required so the alignment is maximal.
    need: Vec<usize>,
    /// Per position: occurrences of the same type at or after it.
    rest: Vec<usize>,
    ref_len: usize,
    memo: HashMap<(usize, usize, Vec<u64>), Option<usize>>,
    overflow: bool,
}

impl<'a> Aligner<'a> {
    fn new(cand: &'a [String], reference: &'a [String]) -> Self {
        let mut type_ids: HashMap<&str, usize> = HashMap::new();
        let mut ref_positions: Vec<Vec<usize>> = Vec::new();
        for (j, tok) in reference.iter().enumerate() {
            let id = *type_ids.entry(tok.as_str()).or_insert_with(|| {
                ref_positions.push(Vec::new());
                ref_positions.len() - 1
            });
            ref_positions[id].push(j);
        }
        let mut cand_counts = vec![0usize; ref_positions.len()];
        let cand_type: Vec<usize> = cand
            .iter()
            .map(|tok| match type_ids.get(tok.as_str()) {
                Some(&id) => {
                    cand_counts[id] += 1;
                    id
                }
                None => usize::MAX,
            })
            .collect();
        let need = cand_counts
            .iter()
            .zip(&ref_positions)
            .map(|(&c, r)| c.min(r.len()))
            .collect();
        let mut rest = vec![0; cand.len()];
        let mut seen = vec![0usize; ref_positions.len()];
        for i in (0..cand.len()).rev() {
            if cand_type[i] != usize::MAX {
                seen[cand_type[i]] += 1;
                rest[i] = seen[cand_type[i]];
            }
        }
        let options = cand_type
            .iter()
            .map(|&t| {
                if t == usize::MAX {
                    Vec::new()
                } else {
                    ref_positions[t].clone()
                }
            })
            .collect();
        Self {
            cand,
            options,
            cand_type,
            need,
            rest,
            ref_len: reference.len(),
            memo: HashMap::new(),
            overflow: false,
        }
    }

    fn solve(mut self) -> (usize, usize) {
        let matches: usize = self.need.iter().sum();
        if matches == 0 {
            return (0, 0);
        }
        let used = vec![0u64; self.ref_len.div_ceil(64)];
        let mut left = self.need.clone();
        let best_adj = self.search(0, usize::MAX, &mut used.clone(), &mut left);
        match best_adj {
            Some(adj) if !self.overflow => (matches, matches - adj),
            _ => {
                log::debug!(
                    "alignment search exceeded {ALIGN_STATE_LIMIT} states; using greedy alignment"
                );
                let adj = self.greedy();
                (matches, matches - adj)
            }
        }
    }

    /// Best number of adjacent match pairs obtainable from position `i`,
    /// given the reference position `prev` matched at `i - 1`
    /// (`usize::MAX` when unmatched). `None` when no maximal completion exists.
    fn search(
        &mut self,
        i: usize,
        prev: usize,
        used: &mut Vec<u64>,
        left: &mut Vec<usize>,
    ) -> Option<usize> {
        if i == self.cand.len() {
            return left.iter().all(|&l| l == 0).then_some(0);
        }
        if self.overflow {
            return None;
        }
        let key = (i, prev, used.clone());
        if let Some(&cached) = self.memo.get(&key) {
            return cached;
        }
        if self.memo.len() >= ALIGN_STATE_LIMIT {
            self.overflow = true;
            return None;
        }

        let t = self.cand_type[i];
        let mut best: Option<usize> = None;
        if t == usize::MAX || left[t] == 0 {
            best = self.search(i + 1, usize::MAX, used, left);
        } else {
            for k in 0..self.options[i].len() {
                let j = self.options[i][k];
                if used[j / 64] & (1 << (j % 64)) != 0 {
                    continue;
                }
                used[j / 64] |= 1 << (j % 64);
                left[t] -= 1;
                let gain = usize::from(prev != usize::MAX && prev + 1 == j);
                if let Some(rest) = self.search(i + 1, j, used, left) {
                    best = best.max(Some(rest + gain));
                }
                left[t] += 1;
                used[j / 64] &= !(1 << (j % 64));
            }
            // Leave this occurrence unmatched only if later ones can cover the quota.
            if self.rest[i] > left[t] {
                if let Some(rest) = self.search(i + 1, usize::MAX, used, left) {
                    best = best.max(Some(rest));
                }
            }
        }
        self.memo.insert(key, best);
        best
    }

    fn greedy(&self) -> usize {
        let mut used = vec![false; self.ref_len];
        let mut left = self.need.clone();
        let mut prev = usize::MAX;
        let mut adj = 0;
        for i in 0..self.cand.len() {
            let t = self.cand_type[i];
            if t == usize::MAX || left[t] == 0 {
                prev = usize::MAX;
                continue;
            }
            let free = |j: &&usize| !used[**j];
            let pick = self.options[i]
                .iter()
                .filter(free)
                .find(|&&j| prev != usize::MAX && j == prev + 1)
                .or_else(|| self.options[i].iter().find(free))
                .copied();
            let must_match = self.rest[i] <= left[t];
            match pick {
                Some(j) if must_match || (prev != usize::MAX && j == prev + 1) => {
                    used[j] = true;
                    left[t] -= 1;
                    if prev != usize::MAX && j == prev + 1 {
                        adj += 1;
                    }
                    prev = j;
                }
                _ => prev = usize::MAX,
            }
        }
        adj
    }
}

/// Scores of one candidate/reference pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairScores {
    /// BLEU@1..4 on the 0–100 scale.
    pub bleu: [f64; 4],
    /// METEOR on the 0–100 scale.
    pub meteor: f64,
}

/// Scores a pair of raw texts. An empty candidate scores zero everywhere;
/// an empty reference is a domain error.
pub fn score_pair(candidate: &str, reference: &str, mode: BleuMode) -> Result<PairScores> {
    let cand = tokenize(candidate);
    let reference = tokenize(reference);
    if reference.is_empty() {
        return Err(Error::Domain("empty reference".into()));
    }
    if cand.is_empty() {
        return Ok(PairScores {
            bleu: [0.0; 4],
            meteor: 0.0,
        });
    }
    let refs = std::slice::from_ref(&reference);
    let mut scores = [0.0; 4];
    for (k, slot) in scores.iter_mut().enumerate() {
        *slot = bleu(&cand, refs, k + 1, mode)?.score;
    }
    Ok(PairScores {
        bleu: scores,
        meteor: meteor(&cand, &reference)?.score * 100.0,
    })
}

/// Macro-averaged corpus scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mode: BleuMode,
    /// Mean BLEU@1..4 (0–100).
    pub bleu: [f64; 4],
    /// Mean METEOR (0–100).
    pub meteor: f64,
    /// Pairs that contributed to the means.
    pub pairs: usize,
    /// Indices of pairs skipped because their reference was empty.
    pub skipped: Vec<usize>,
}

pub fn corpus_eval<C, R>(pairs: &[(C, R)], mode: BleuMode) -> Result<EvalReport>
where
    C: AsRef<str>,
    R: AsRef<str>,
{
    if pairs.is_empty() {
        return Err(Error::Empty("no candidate/reference pairs".into()));
    }
    let mut bleu_sum = [0.0; 4];
    let mut meteor_sum = 0.0;
    let mut used = 0usize;
    let mut skipped = Vec::new();
    for (idx, (cand, reference)) in pairs.iter().enumerate() {
        if tokenize(reference.as_ref()).is_empty() {
            log::warn!("skipping pair {idx}: empty reference");
            skipped.push(idx);
            continue;
        }
        let s = score_pair(cand.as_ref(), reference.as_ref(), mode)?;
        for (acc, v) in bleu_sum.iter_mut().zip(s.bleu) {
            *acc += v;
        }
        meteor_sum += s.meteor;
        used += 1;
    }
    if used == 0 {
        return Err(Error::Empty("every pair had an empty reference".into()));
    }
    let n = used as f64;
    Ok(EvalReport {
        mode,
        bleu: bleu_sum.map(|s| s / n),
        meteor: meteor_sum / n,
        pairs: used,
        skipped,
    })
}
