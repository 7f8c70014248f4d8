//! Genetic-algorithm search over the scalar NMS threshold.
//!
//! Individuals are single thresholds. Each generation keeps the `elite_count`
//! fittest unchanged and refills the population with Gaussian mutations of
//! parents drawn by fitness-proportional selection. There is no crossover.

use std::collections::BTreeMap;
use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::caption_metrics::{corpus_eval, BleuMode};
use crate::corpus::CaptionRecord;
use crate::error::{Error, Result};
use crate::segments::nms_indices;

pub const DEFAULT_MUTATION_MAGNITUDES: [f64; 5] = [0.01, 0.03, 0.05, 0.07, 0.1];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaConfig {
    pub generations: usize,
    pub population_size: usize,
    pub elite_count: usize,
    /// Standard deviations; one is picked uniformly per mutation.
    pub mutation_magnitudes: Vec<f64>,
    pub bounds: (f64, f64),
    pub rng_seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            generations: 5,
            population_size: 8,
            elite_count: 2,
            mutation_magnitudes: DEFAULT_MUTATION_MAGNITUDES.to_vec(),
            bounds: (0.0, 1.0),
            rng_seed: 47,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population_size == 0 {
            return Err(Error::Domain("population size must be positive".into()));
        }
        if self.elite_count >= self.population_size {
            return Err(Error::Domain(format!(
                "elite count {} must be below population size {}",
                self.elite_count, self.population_size
            )));
        }
        if self.mutation_magnitudes.is_empty()
            || self
                .mutation_magnitudes
                .iter()
                .any(|m| !(m.is_finite() && *m > 0.0))
        {
            return Err(Error::Domain(
                "mutation magnitudes must be a non-empty list of positive values".into(),
            ));
        }
        let (lo, hi) = self.bounds;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Domain(format!("invalid bounds ({lo}, {hi})")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub threshold: f64,
    /// BLEU@1; `None` until evaluated.
    pub fitness: Option<f64>,
}

impl Individual {
    pub fn unevaluated(threshold: f64) -> Self {
        Self {
            threshold,
            fitness: None,
        }
    }

    fn score(&self) -> f64 {
        self.fitness.unwrap_or(f64::NEG_INFINITY)
    }
}

/// Maps an NMS threshold to a BLEU@1 fitness. Must be deterministic.
pub trait FitnessSource {
    fn fitness(&self, threshold: f64) -> Result<f64>;

    /// The threshold reported for `threshold`; lookup tables snap to their
    /// nearest key.
    fn canonical_threshold(&self, threshold: f64) -> f64 {
        threshold
    }

    /// Thresholds known to be meaningful for this source. They seed the
    /// initial population ahead of uniform draws.
    fn candidate_thresholds(&self) -> Vec<f64> {
        Vec::new()
    }
}

impl<F: FitnessSource + ?Sized> FitnessSource for &F {
    fn fitness(&self, threshold: f64) -> Result<f64> {
        (**self).fitness(threshold)
    }

    fn canonical_threshold(&self, threshold: f64) -> f64 {
        (**self).canonical_threshold(threshold)
    }

    fn candidate_thresholds(&self) -> Vec<f64> {
        (**self).candidate_thresholds()
    }
}

const TIE_EPSILON: f64 = 1e-12;

/// Fitness from a `(threshold, bleu1)` table with nearest-key lookup; ties
/// go to the lower threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct TableFitness {
    entries: Vec<(f64, f64)>,
}

impl TableFitness {
    pub fn new(mut entries: Vec<(f64, f64)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Domain("fitness table is empty".into()));
        }
        if entries
            .iter()
            .any(|(t, f)| !(t.is_finite() && f.is_finite()))
        {
            return Err(Error::Domain("fitness table holds non-finite values".into()));
        }
        entries.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Self { entries })
    }

    /// Parses `threshold<TAB>bleu1` lines; blank lines and `#` comments are skipped.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut entries = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                path: origin.to_path_buf(),
                location: format!("line {}", lineno + 1),
                message,
            };
            let mut fields = line.split('\t');
            let (Some(t), Some(f), None) = (fields.next(), fields.next(), fields.next()) else {
                return Err(parse_err(format!(
                    "expected `threshold<TAB>bleu1`, got {line:?}"
                )));
            };
            let t: f64 = t
                .trim()
                .parse()
                .map_err(|e| parse_err(format!("threshold {t:?}: {e}")))?;
            let f: f64 = f
                .trim()
                .parse()
                .map_err(|e| parse_err(format!("fitness {f:?}: {e}")))?;
            entries.push((t, f));
        }
        Self::new(entries).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            location: "file".into(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn entries(&self) -> &[(f64, f64)] {
        &self.entries
    }

    fn nearest(&self, threshold: f64) -> (f64, f64) {
        let mut best = self.entries[0];
        for &entry in &self.entries[1..] {
            // Entries are sorted, so requiring a clear improvement keeps the
            // lower key on (floating-point) ties.
            if (entry.0 - threshold).abs() < (best.0 - threshold).abs() - TIE_EPSILON {
                best = entry;
            }
        }
        best
    }

    /// Highest fitness in the table, lowest threshold first on ties.
    pub fn argmax(&self) -> (f64, f64) {
        let mut best = self.entries[0];
        for &entry in &self.entries[1..] {
            if entry.1 > best.1 {
                best = entry;
            }
        }
        best
    }
}

impl FitnessSource for TableFitness {
    fn fitness(&self, threshold: f64) -> Result<f64> {
        Ok(self.nearest(threshold).1)
    }

    fn canonical_threshold(&self, threshold: f64) -> f64 {
        self.nearest(threshold).0
    }

    /// Table keys, fittest first.
    fn candidate_thresholds(&self) -> Vec<f64> {
        let mut ranked = self.entries.clone();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.total_cmp(&b.0)));
        ranked.into_iter().map(|(t, _)| t).collect()
    }
}

/// `height - curvature * (t - peak)^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticFitness {
    pub peak: f64,
    pub height: f64,
    pub curvature: f64,
}

impl SyntheticFitness {
    pub fn with_peak(peak: f64) -> Self {
        Self {
            peak,
            height: 100.0,
            curvature: 500.0,
        }
    }
}

impl FitnessSource for SyntheticFitness {
    fn fitness(&self, threshold: f64) -> Result<f64> {
        let d = threshold - self.peak;
        Ok(self.height - self.curvature * d * d)
    }
}

/// Closure-backed fitness.
pub struct FnFitness<F>(pub F);

impl<F: Fn(f64) -> f64> FitnessSource for FnFitness<F> {
    fn fitness(&self, threshold: f64) -> Result<f64> {
        Ok((self.0)(threshold))
    }
}

/// Live fitness: NMS over generated captions, then corpus BLEU@1 of the
/// surviving sentences against reference summaries.
#[derive(Debug, Clone)]
pub struct PipelineFitness {
    captions: Vec<CaptionRecord>,
    references: BTreeMap<String, String>,
}

impl PipelineFitness {
    /// Videos without a reference are ignored; at least one must match.
    pub fn new(captions: Vec<CaptionRecord>, references: BTreeMap<String, String>) -> Result<Self> {
        let captions: Vec<CaptionRecord> = captions
            .into_iter()
            .filter(|c| references.contains_key(&c.video_id))
            .collect();
        if captions.is_empty() {
            return Err(Error::Empty(
                "no caption video has a reference summary".into(),
            ));
        }
        Ok(Self {
            captions,
            references,
        })
    }

    /// Candidate summary per video after NMS: surviving sentences in
    /// chronological order, joined by spaces.
    pub fn summaries(&self, threshold: f64) -> Result<Vec<(String, String)>> {
        self.captions
            .iter()
            .map(|rec| {
                let segments: Vec<_> = rec.events.iter().map(|e| e.segment).collect();
                let mut kept = nms_indices(&segments, threshold)?;
                kept.sort_by(|&a, &b| {
                    segments[a]
                        .start
                        .total_cmp(&segments[b].start)
                        .then(a.cmp(&b))
                });
                let text = kept
                    .iter()
                    .map(|&k| rec.events[k].sentence.trim())
                    .collect::<Vec<_>>()
                    .join(" ");
                Ok((text, self.references[&rec.video_id].clone()))
            })
            .collect()
    }
}

impl FitnessSource for PipelineFitness {
    fn fitness(&self, threshold: f64) -> Result<f64> {
        let pairs = self.summaries(threshold)?;
        let report =
            corpus_eval(&pairs, BleuMode::Individual).map_err(|e| Error::Fitness(e.to_string()))?;
        Ok(report.bleu[0])
    }
}

fn evaluate<F: FitnessSource + ?Sized>(ind: &mut Individual, fitness: &F) -> Result<()> {
    let value = fitness.fitness(ind.threshold)?;
    if !value.is_finite() {
        return Err(Error::Fitness(format!(
            "non-finite fitness at threshold {}",
            ind.threshold
        )));
    }
    ind.fitness = Some(value);
    Ok(())
}

/// Gaussian perturbation with a uniformly chosen magnitude, clamped to bounds.
pub fn mutate<R: Rng + ?Sized>(parent: &Individual, config: &GaConfig, rng: &mut R) -> Individual {
    let (lo, hi) = config.bounds;
    let sigma = *config
        .mutation_magnitudes
        .choose(rng)
        .expect("mutation magnitudes are non-empty");
    let delta = Normal::new(0.0, sigma)
        .map(|n| n.sample(rng))
        .unwrap_or(0.0);
    Individual::unevaluated((parent.threshold + delta).clamp(lo, hi))
}

fn by_fitness_desc(a: &Individual, b: &Individual) -> std::cmp::Ordering {
    b.score()
        .total_cmp(&a.score())
        .then(a.threshold.total_cmp(&b.threshold))
}

/// One generation step. Every returned individual is evaluated.
pub fn evolve<F, R>(
    population: &[Individual],
    config: &GaConfig,
    fitness: &F,
    rng: &mut R,
) -> Result<Vec<Individual>>
where
    F: FitnessSource + ?Sized,
    R: Rng + ?Sized,
{
    config.validate()?;
    if population.len() != config.population_size {
        return Err(Error::Domain(format!(
            "population has {} individuals, config expects {}",
            population.len(),
            config.population_size
        )));
    }
    if population.iter().any(|i| i.fitness.is_none()) {
        return Err(Error::Domain("population has unevaluated individuals".into()));
    }

    let mut ranked = population.to_vec();
    ranked.sort_by(by_fitness_desc);
    let mut next: Vec<Individual> = ranked[..config.elite_count].to_vec();

    // Roulette weights shifted so the worst individual has weight zero;
    // a flat population falls back to uniform choice.
    let min = ranked.iter().map(Individual::score).fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = population.iter().map(|i| i.score() - min).collect();
    let roulette = WeightedIndex::new(&weights).ok();

    while next.len() < config.population_size {
        let parent = match &roulette {
            Some(dist) => &population[dist.sample(rng)],
            None => &population[rng.gen_range(0..population.len())],
        };
        let mut child = mutate(parent, config, rng);
        evaluate(&mut child, fitness)?;
        next.push(child);
    }
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    /// Best fitness in this generation's population.
    pub best: f64,
    pub mean: f64,
    /// Threshold of the best individual in this generation.
    pub best_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    /// Canonical threshold of the best individual ever evaluated.
    pub best_threshold: f64,
    pub best_fitness: f64,
    /// Generation 0 is the initial population.
    pub history: Vec<GenerationStats>,
    /// Every individual evaluated, in evaluation order.
    pub evaluated: Vec<Individual>,
}

impl SearchOutcome {
    /// True when every evaluation returned the same fitness.
    pub fn is_flat(&self) -> bool {
        let mut values = self.evaluated.iter().filter_map(|i| i.fitness);
        match values.next() {
            Some(first) => values.all(|v| v == first),
            None => true,
        }
    }
}

fn stats(generation: usize, population: &[Individual]) -> GenerationStats {
    let best = population
        .iter()
        .min_by(|a, b| by_fitness_desc(a, b))
        .expect("population is non-empty");
    let mean = population.iter().map(Individual::score).sum::<f64>() / population.len() as f64;
    GenerationStats {
        generation,
        best: best.score(),
        mean,
        best_threshold: best.threshold,
    }
}

/// Initial population from the source's candidate thresholds (those inside
/// the bounds, at most `population_size`) topped up with uniform draws, then
/// `config.generations` rounds of [`evolve`]. Deterministic for a fixed seed
/// and fitness source.
pub fn run_search<F: FitnessSource + ?Sized>(config: &GaConfig, fitness: &F) -> Result<SearchOutcome> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let (lo, hi) = config.bounds;

    let mut starts: Vec<f64> = fitness
        .candidate_thresholds()
        .into_iter()
        .filter(|t| (lo..=hi).contains(t))
        .take(config.population_size)
        .collect();
    while starts.len() < config.population_size {
        starts.push(rng.gen_range(lo..hi));
    }

    let mut population = Vec::with_capacity(config.population_size);
    for threshold in starts {
        let mut ind = Individual::unevaluated(threshold);
        evaluate(&mut ind, fitness)?;
        population.push(ind);
    }
    let mut evaluated = population.clone();
    let mut history = vec![stats(0, &population)];

    for generation in 1..=config.generations {
        let next = evolve(&population, config, fitness, &mut rng)?;
        evaluated.extend_from_slice(&next[config.elite_count..]);
        history.push(stats(generation, &next));
        population = next;
    }

    let best = evaluated
        .iter()
        .copied()
        .reduce(|best, ind| if ind.score() > best.score() { ind } else { best })
        .expect("at least one evaluation");
    Ok(SearchOutcome {
        best_threshold: fitness.canonical_threshold(best.threshold),
        best_fitness: best.score(),
        history,
        evaluated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bleu_table() -> TableFitness {
        TableFitness::new(vec![
            (0.1, 12.44),
            (0.3, 12.57),
            (0.35, 13.44),
            (0.45, 13.12),
            (0.47, 13.97),
            (0.5, 12.41),
            (0.7, 12.11),
            (0.9, 11.17),
        ])
        .unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(GaConfig::default().validate().is_ok());
        let bad = GaConfig {
            elite_count: 8,
            ..GaConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = GaConfig {
            mutation_magnitudes: vec![0.1, 0.0],
            ..GaConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = GaConfig {
            bounds: (0.5, 0.5),
            ..GaConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn table_lookup_nearest_with_low_ties() {
        let t = bleu_table();
        assert_eq!(t.fitness(0.47).unwrap(), 13.97);
        assert_eq!(t.fitness(0.0).unwrap(), 12.44);
        assert_eq!(t.fitness(1.0).unwrap(), 11.17);
        assert_eq!(t.canonical_threshold(0.2), 0.1);
        assert_eq!(t.canonical_threshold(0.8), 0.7);
        assert_eq!(t.canonical_threshold(0.4), 0.35);
        assert_eq!(t.argmax(), (0.47, 13.97));
    }

    #[test]
    fn table_parse() {
        let text = "# thresholds\n0.1\t12.44\n\n0.47\t13.97  # best\n";
        let t = TableFitness::parse(text, Path::new("x.tsv")).unwrap();
        assert_eq!(t.entries(), &[(0.1, 12.44), (0.47, 13.97)]);
        let err = TableFitness::parse("0.1 12.4\n", Path::new("x.tsv")).unwrap_err();
        assert!(err.to_string().contains("line 1"), "{err}");
        assert!(TableFitness::parse("0.1\tabc\n", Path::new("x.tsv")).is_err());
        assert!(TableFitness::parse("# nothing\n", Path::new("x.tsv")).is_err());
    }

    #[test]
    fn mutation_is_clamped() {
        let config = GaConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let wide = GaConfig {
            mutation_magnitudes: vec![5.0],
            ..config.clone()
        };
        for _ in 0..1000 {
            let child = mutate(&Individual::unevaluated(0.45), &wide, &mut rng);
            assert!((0.0..=1.0).contains(&child.threshold));
            assert!(child.fitness.is_none());
        }
    }

    #[test]
    fn tiny_magnitude_leaves_parent_unchanged() {
        let config = GaConfig {
            mutation_magnitudes: vec![1e-300],
            ..GaConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let child = mutate(&Individual::unevaluated(0.45), &config, &mut rng);
        assert_eq!(child.threshold, 0.45);
    }

    #[test]
    fn mutation_std_matches_magnitude() {
        let config = GaConfig {
            mutation_magnitudes: vec![0.05],
            ..GaConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let samples: Vec<f64> = (0..10_000)
            .map(|_| mutate(&Individual::unevaluated(0.5), &config, &mut rng).threshold)
            .collect();
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>()
            / (samples.len() - 1) as f64;
        assert!((var.sqrt() - 0.05).abs() < 0.005, "std {}", var.sqrt());
        assert!((mean - 0.5).abs() < 0.005);
    }

    fn evaluated(threshold: f64, fitness: f64) -> Individual {
        Individual {
            threshold,
            fitness: Some(fitness),
        }
    }

    #[test]
    fn elitism_keeps_best_verbatim() {
        let config = GaConfig {
            population_size: 2,
            elite_count: 1,
            ..GaConfig::default()
        };
        let pop = [evaluated(0.9, 50.0), evaluated(0.1, 0.0)];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let next = evolve(&pop, &config, &FnFitness(|_| 1.0), &mut rng).unwrap();
        assert_eq!(next[0], pop[0]);
        assert!(next.iter().all(|i| i.fitness.is_some()));
    }

    #[test]
    fn flat_population_uses_uniform_parents() {
        let config = GaConfig {
            population_size: 4,
            elite_count: 2,
            mutation_magnitudes: vec![1e-300],
            ..GaConfig::default()
        };
        let pop = [
            evaluated(0.1, 5.0),
            evaluated(0.3, 5.0),
            evaluated(0.6, 5.0),
            evaluated(0.8, 5.0),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut seen = std::collections::BTreeSet::new();
        for _ in 0..200 {
            let next = evolve(&pop, &config, &FnFitness(|_| 5.0), &mut rng).unwrap();
            // Elites: ties broken by ascending threshold.
            assert_eq!(next[0].threshold, 0.1);
            assert_eq!(next[1].threshold, 0.3);
            for child in &next[2..] {
                seen.insert((child.threshold * 10.0).round() as i64);
            }
        }
        assert_eq!(seen.into_iter().collect::<Vec<_>>(), vec![1, 3, 6, 8]);
    }

    #[test]
    fn evolve_checks_preconditions() {
        let config = GaConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pop = vec![evaluated(0.5, 1.0); 3];
        assert!(evolve(&pop, &config, &FnFitness(|_| 1.0), &mut rng).is_err());
        let mut pop = vec![evaluated(0.5, 1.0); 8];
        pop[3].fitness = None;
        assert!(evolve(&pop, &config, &FnFitness(|_| 1.0), &mut rng).is_err());
    }

    #[test]
    fn bleu_table_search_finds_argmax() {
        let out = run_search(&GaConfig::default(), &bleu_table()).unwrap();
        assert_eq!(out.best_threshold, 0.47);
        assert_eq!(out.best_fitness, 13.97);
        assert_eq!(out.history.len(), 6);
    }

    #[test]
    fn table_search_matches_argmax_for_any_seed() {
        let t = bleu_table();
        for seed in 0..200 {
            let config = GaConfig {
                rng_seed: seed,
                ..GaConfig::default()
            };
            let out = run_search(&config, &t).unwrap();
            assert_eq!((out.best_threshold, out.best_fitness), t.argmax());
        }
        // Larger tables than the population keep their fittest keys.
        let wide = TableFitness::new((0..20).map(|k| (k as f64 / 20.0, k as f64)).collect()).unwrap();
        let out = run_search(&GaConfig::default(), &wide).unwrap();
        assert_eq!(out.best_threshold, 0.95);
    }

    #[test]
    fn constant_fitness_is_flat() {
        let out = run_search(&GaConfig::default(), &FnFitness(|_| 12.5)).unwrap();
        assert_eq!(out.best_fitness, 12.5);
        assert!(out.is_flat());
        assert!((0.0..=1.0).contains(&out.best_threshold));
    }

    #[test]
    fn elite_best_never_decreases() {
        let f = SyntheticFitness::with_peak(0.47);
        for seed in 0..20 {
            let config = GaConfig {
                rng_seed: seed,
                ..GaConfig::default()
            };
            let out = run_search(&config, &f).unwrap();
            for w in out.history.windows(2) {
                assert!(w[1].best >= w[0].best);
            }
            assert!(out
                .evaluated
                .iter()
                .all(|i| (0.0..=1.0).contains(&i.threshold)));
        }
    }

    #[test]
    fn search_is_deterministic() {
        let config = GaConfig {
            rng_seed: 99,
            ..GaConfig::default()
        };
        let f = SyntheticFitness::with_peak(0.3);
        assert_eq!(run_search(&config, &f).unwrap(), run_search(&config, &f).unwrap());
    }

    #[test]
    fn failing_fitness_propagates() {
        struct Broken;
        impl FitnessSource for Broken {
            fn fitness(&self, _: f64) -> Result<f64> {
                Err(Error::Fitness("boom".into()))
            }
        }
        assert!(matches!(
            run_search(&GaConfig::default(), &Broken),
            Err(Error::Fitness(_))
        ));
        assert!(run_search(&GaConfig::default(), &FnFitness(|_| f64::NAN)).is_err());
    }
}
