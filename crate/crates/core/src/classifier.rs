//! Bag-of-n-grams logistic regression for suspicious / non-suspicious text.
//!
//! Features are counts of unigrams and bigrams over whitespace tokens of
//! already-normalized text. Training is full-batch gradient descent on the
//! mean logistic loss.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::corpus::{Label, LabeledSummary};
use crate::error::{Error, Result};

pub const MODEL_MAGIC: &str = "denseval-lm";
pub const MODEL_VERSION: &str = "v1";

/// Dense feature indices for the n-grams seen in training, in first-seen order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    grams: Vec<String>,
    index: HashMap<String, usize>,
}

fn ngrams(text: &str) -> impl Iterator<Item = String> + '_ {
    let tokens: Vec<&str> = text.split_whitespace().collect();
    let bigrams: Vec<String> = tokens.windows(2).map(|w| format!("{} {}", w[0], w[1])).collect();
    tokens
        .into_iter()
        .map(str::to_string)
        .chain(bigrams)
}

impl Vocabulary {
    pub fn build<'a, I>(texts: I) -> Self
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut vocab = Self::default();
        for text in texts {
            for gram in ngrams(text) {
                vocab.insert(gram);
            }
        }
        vocab
    }

    fn insert(&mut self, gram: String) -> usize {
        if let Some(&i) = self.index.get(&gram) {
            return i;
        }
        let i = self.grams.len();
        self.index.insert(gram.clone(), i);
        self.grams.push(gram);
        i
    }

    /// Builds from an explicit index-ordered list; entries must be unique.
    pub fn from_grams(grams: Vec<String>) -> Result<Self> {
        let mut vocab = Self::default();
        for g in grams {
            if vocab.index.contains_key(&g) {
                return Err(Error::Domain(format!("duplicate n-gram `{g}`")));
            }
            vocab.insert(g);
        }
        Ok(vocab)
    }

    pub fn get(&self, gram: &str) -> Option<usize> {
        self.index.get(gram).copied()
    }

    pub fn grams(&self) -> &[String] {
        &self.grams
    }

    pub fn len(&self) -> usize {
        self.grams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grams.is_empty()
    }
}

/// Sparse count vector sorted by feature index.
pub type SparseVector = Vec<(usize, f64)>;

/// Counts of in-vocabulary unigrams and bigrams.
pub fn featurize(text: &str, vocab: &Vocabulary) -> SparseVector {
    let mut counts: HashMap<usize, f64> = HashMap::new();
    for gram in ngrams(text) {
        if let Some(i) = vocab.get(&gram) {
            *counts.entry(i).or_insert(0.0) += 1.0;
        }
    }
    let mut out: SparseVector = counts.into_iter().collect();
    out.sort_by_key(|&(i, _)| i);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub learning_rate: f64,
    pub epochs: usize,
    pub steps_per_epoch: usize,
    /// Std-dev of the seeded Gaussian weight initialization; 0 starts from zero.
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            epochs: 2,
            steps_per_epoch: 50,
            init_scale: 0.0,
            seed: 47,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub vocab: Vocabulary,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub hyperparams: Hyperparams,
    /// Mean loss at initialization followed by the loss after every step.
    pub loss_history: Vec<f64>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn dot(weights: &[f64], x: &[(usize, f64)]) -> f64 {
    x.iter().map(|&(i, v)| weights[i] * v).sum()
}

/// Mean logistic loss and its gradient with respect to weights and bias.
pub fn loss_and_gradient(
    weights: &[f64],
    bias: f64,
    features: &[SparseVector],
    labels: &[f64],
) -> (f64, Vec<f64>, f64) {
    let n = features.len() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; weights.len()];
    let mut grad_bias = 0.0;
    for (x, &y) in features.iter().zip(labels) {
        let z = dot(weights, x) + bias;
        loss += softplus(z) - y * z;
        let residual = sigmoid(z) - y;
        for &(i, v) in x {
            grad[i] += residual * v;
        }
        grad_bias += residual;
    }
    grad.iter_mut().for_each(|g| *g /= n);
    (loss / n, grad, grad_bias / n)
}

/// Trains on already-normalized texts. Both labels must be present.
pub fn train(dataset: &[LabeledSummary], hyper: Hyperparams) -> Result<LinearModel> {
    let has = |l: Label| dataset.iter().any(|s| s.label == l);
    if !(has(Label::Suspicious) && has(Label::NonSuspicious)) {
        return Err(Error::Domain(
            "training data must contain both labels".into(),
        ));
    }
    if !(hyper.learning_rate.is_finite() && hyper.learning_rate >= 0.0) {
        return Err(Error::Domain(format!(
            "invalid learning rate {}",
            hyper.learning_rate
        )));
    }
    let vocab = Vocabulary::build(dataset.iter().map(|s| s.text.as_str()));
    let features: Vec<SparseVector> = dataset.iter().map(|s| featurize(&s.text, &vocab)).collect();
    let labels: Vec<f64> = dataset.iter().map(|s| f64::from(s.label.as_u8())).collect();

    let mut weights = vec![0.0; vocab.len()];
    if hyper.init_scale > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
        let normal = Normal::new(0.0, hyper.init_scale)
            .map_err(|e| Error::Domain(format!("init scale: {e}")))?;
        weights.iter_mut().for_each(|w| *w = normal.sample(&mut rng));
    }
    let mut bias = 0.0;

    let steps = hyper.epochs * hyper.steps_per_epoch;
    let mut loss_history = Vec::with_capacity(steps + 1);
    for _ in 0..steps {
        let (loss, grad, grad_bias) = loss_and_gradient(&weights, bias, &features, &labels);
        loss_history.push(loss);
        for (w, g) in weights.iter_mut().zip(&grad) {
            *w -= hyper.learning_rate * g;
        }
        bias -= hyper.learning_rate * grad_bias;
    }
    loss_history.push(loss_and_gradient(&weights, bias, &features, &labels).0);

    if weights.iter().any(|w| !w.is_finite()) || !bias.is_finite() {
        return Err(Error::Domain("training diverged to non-finite weights".into()));
    }
    Ok(LinearModel {
        vocab,
        weights,
        bias,
        hyperparams: hyper,
        loss_history,
    })
}

impl LinearModel {
    /// Model with every weight and the bias at zero.
    pub fn zeros(vocab: Vocabulary) -> Self {
        Self {
            weights: vec![0.0; vocab.len()],
            vocab,
            bias: 0.0,
            hyperparams: Hyperparams::default(),
            loss_history: Vec::new(),
        }
    }

    /// `(label, probability)`; label is suspicious iff probability >= 0.5.
    pub fn predict(&self, text: &str) -> (Label, f64) {
        let x = featurize(text, &self.vocab);
        let p = sigmoid(dot(&self.weights, &x) + self.bias);
        let label = if p >= 0.5 {
            Label::Suspicious
        } else {
            Label::NonSuspicious
        };
        (label, p)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{MODEL_MAGIC} {MODEL_VERSION} V={}\n", self.vocab.len());
        for (i, (gram, w)) in self.vocab.grams().iter().zip(&self.weights).enumerate() {
            let _ = writeln!(out, "{gram}\t{i}\t{w}");
        }
        let _ = writeln!(out, "bias\t{}", self.bias);
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let header = lines.next().map(|(_, l)| l.trim()).unwrap_or("");
        let mut parts = header.split_whitespace();
        let (magic, version, size) = (parts.next(), parts.next(), parts.next());
        if magic != Some(MODEL_MAGIC) || version != Some(MODEL_VERSION) || parts.next().is_some() {
            return Err(Error::ModelVersion(format!(
                "{}: expected header `{MODEL_MAGIC} {MODEL_VERSION} V=<n>`, got {header:?}",
                origin.display()
            )));
        }
        let v: usize = size
            .and_then(|s| s.strip_prefix("V="))
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| {
                Error::ModelVersion(format!("{}: bad vocabulary size in header", origin.display()))
            })?;

        let parse_err = |lineno: usize, message: String| Error::Parse {
            path: origin.to_path_buf(),
            location: format!("line {}", lineno + 1),
            message,
        };
        let mut slots: Vec<Option<(String, f64)>> = vec![None; v];
        let mut bias = None;
        for (lineno, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            if bias.is_some() {
                return Err(parse_err(lineno, "content after bias line".into()));
            }
            let fields: Vec<&str> = line.split('\t').collect();
            match fields.as_slice() {
                ["bias", b] => {
                    bias = Some(
                        b.parse::<f64>()
                            .map_err(|e| parse_err(lineno, format!("bias: {e}")))?,
                    );
                }
                [gram, idx, w] => {
                    let idx: usize = idx
                        .parse()
                        .map_err(|e| parse_err(lineno, format!("index: {e}")))?;
                    let w: f64 = w
                        .parse()
                        .map_err(|e| parse_err(lineno, format!("weight: {e}")))?;
                    let slot = slots.get_mut(idx).ok_or_else(|| {
                        Error::ModelVersion(format!(
                            "{}: index {idx} outside declared vocabulary of {v}",
                            origin.display()
                        ))
                    })?;
                    if slot.is_some() {
                        return Err(parse_err(lineno, format!("duplicate index {idx}")));
                    }
                    *slot = Some((gram.to_string(), w));
                }
                _ => return Err(parse_err(lineno, format!("malformed line {line:?}"))),
            }
        }
        let bias = bias.ok_or_else(|| parse_err(text.lines().count(), "missing bias line".into()))?;
        let filled = slots.iter().filter(|s| s.is_some()).count();
        if filled != v {
            return Err(Error::ModelVersion(format!(
                "{}: header declares {v} features, file has {filled}",
                origin.display()
            )));
        }
        let (grams, weights): (Vec<String>, Vec<f64>) = slots.into_iter().flatten().unzip();
        Ok(Self {
            vocab: Vocabulary::from_grams(grams)?,
            weights,
            bias,
            hyperparams: Hyperparams::default(),
            loss_history: Vec::new(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    pub true_positives: usize,
    pub false_positives: usize,
    pub true_negatives: usize,
    pub false_negatives: usize,
}

/// Binary accuracy with suspicious as the positive class.
pub fn evaluate(model: &LinearModel, dataset: &[LabeledSummary]) -> Result<Evaluation> {
    if dataset.is_empty() {
        return Err(Error::Domain("cannot evaluate on an empty dataset".into()));
    }
    let mut e = Evaluation {
        accuracy: 0.0,
        true_positives: 0,
        false_positives: 0,
        true_negatives: 0,
        false_negatives: 0,
    };
    for s in dataset {
        match (model.predict(&s.text).0, s.label) {
            (Label::Suspicious, Label::Suspicious) => e.true_positives += 1,
            (Label::Suspicious, Label::NonSuspicious) => e.false_positives += 1,
            (Label::NonSuspicious, Label::NonSuspicious) => e.true_negatives += 1,
            (Label::NonSuspicious, Label::Suspicious) => e.false_negatives += 1,
        }
    }
    e.accuracy = (e.true_positives + e.true_negatives) as f64 / dataset.len() as f64;
    Ok(e)
}
