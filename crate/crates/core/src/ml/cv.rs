//! Single-shot accuracy, k-fold cross-validation and randomised hyperparameter search.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::knn::{argmax, nearest, vote_mass, Hyper, KnnModel, Metric, Weighting};
use super::FeatureMatrix;
use crate::error::{Error, Result};
use crate::exec::Exec;

const FOLD_STREAM: u64 = 1;
const SEARCH_STREAM: u64 = 2;

pub const DEFAULT_FOLDS: usize = 5;
pub const DEFAULT_N_ITER: usize = 10;

/// Percentage of exact label matches.
pub fn accuracy_of(predicted: &[u8], truth: &[u8]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::domain(format!(
            "{} predictions for {} labels",
            predicted.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::domain("accuracy of an empty evaluation set"));
    }
    let hits = predicted.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / truth.len() as f64 * 100.0)
}

pub fn single_shot_accuracy(model: &KnnModel, x: &FeatureMatrix, y: &[u8]) -> Result<f64> {
    single_shot_accuracy_with(model, x, y, Exec::default())
}

pub fn single_shot_accuracy_with(
    model: &KnnModel,
    x: &FeatureMatrix,
    y: &[u8],
    exec: Exec,
) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::domain("feature/label length mismatch"));
    }
    let pred = model.predict_batch(x, exec)?;
    accuracy_of(&pred, y)
}

/// Seeded shuffle of `0..n` cut into `folds` contiguous pieces; the first
/// `n % folds` pieces are one longer.
pub fn fold_partition(n: usize, folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 {
        return Err(Error::domain("at least two folds are required"));
    }
    if n < folds {
        return Err(Error::domain(format!("{n} samples cannot fill {folds} folds")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(FOLD_STREAM);
    idx.shuffle(&mut rng);
    let base = n / folds;
    let extra = n % folds;
    let mut out = Vec::with_capacity(folds);
    let mut start = 0;
    for f in 0..folds {
        let len = base + usize::from(f < extra);
        out.push(idx[start..start + len].to_vec());
        start += len;
    }
    Ok(out)
}

/// Rows outside `held_out`, ascending.
fn complement(n: usize, held_out: &[usize]) -> Vec<usize> {
    let mut mask = vec![true; n];
    for &i in held_out {
        mask[i] = false;
    }
    (0..n).filter(|&i| mask[i]).collect()
}

/// Per-fold single-shot accuracies.
pub fn kfold_scores(
    x: &FeatureMatrix,
    y: &[u8],
    hyper: Hyper,
    folds: usize,
    seed: u64,
    exec: Exec,
) -> Result<Vec<f64>> {
    if x.len() != y.len() {
        return Err(Error::domain("feature/label length mismatch"));
    }
    let parts = fold_partition(x.len(), folds, seed)?;
    let dim = x.dim();
    parts
        .iter()
        .map(|held| {
            let train = complement(x.len(), held);
            let ty: Vec<u8> = train.iter().map(|&i| y[i]).collect();
            let model = KnnModel::fit(x.select(&train), ty, hyper, (0..dim).collect(), false)?;
            let vy: Vec<u8> = held.iter().map(|&i| y[i]).collect();
            single_shot_accuracy_with(&model, &x.select(held), &vy, exec)
        })
        .collect()
}

/// Mean single-shot accuracy over `folds` train/evaluate rounds.
pub fn kfold_accuracy(
    x: &FeatureMatrix,
    y: &[u8],
    hyper: Hyper,
    folds: usize,
    seed: u64,
) -> Result<f64> {
    let s = kfold_scores(x, y, hyper, folds, seed, Exec::default())?;
    Ok(s.iter().sum::<f64>() / s.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperSpace {
    pub k_min: usize,
    pub k_max: usize,
    pub weightings: Vec<Weighting>,
    pub metrics: Vec<Metric>,
}

impl Default for HyperSpace {
    fn default() -> Self {
        Self {
            k_min: 1,
            k_max: 50,
            weightings: vec![Weighting::Uniform, Weighting::Distance],
            metrics: vec![Metric::Euclidean, Metric::Manhattan],
        }
    }
}

impl HyperSpace {
    pub fn single(h: Hyper) -> Self {
        Self {
            k_min: h.k,
            k_max: h.k,
            weightings: vec![h.weighting],
            metrics: vec![h.metric],
        }
    }

    /// All combinations in preference order: lower k, uniform before distance,
    /// euclidean before manhattan.
    pub fn combos(&self) -> Vec<Hyper> {
        let mut w = self.weightings.clone();
        w.sort();
        w.dedup();
        let mut m = self.metrics.clone();
        m.sort();
        m.dedup();
        let mut out = Vec::new();
        for k in self.k_min..=self.k_max {
            for &weighting in &w {
                for &metric in &m {
                    out.push(Hyper { k, weighting, metric });
                }
            }
        }
        out
    }

    pub fn size(&self) -> usize {
        self.combos().len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best: Hyper,
    pub best_score: f64,
    /// Candidates in the order they were drawn, with their mean CV accuracy.
    pub trials: Vec<(Hyper, f64)>,
}

/// Sorted neighbour lists for every held-out row of every fold, for one metric.
struct NeighborCache {
    k_max: usize,
    /// per fold: (truth labels, flattened k_max neighbour lists)
    folds: Vec<(Vec<u8>, Vec<(f64, u8)>)>,
}

impl NeighborCache {
    fn build(
        x: &FeatureMatrix,
        y: &[u8],
        parts: &[Vec<usize>],
        metric: Metric,
        k_max: usize,
        exec: Exec,
    ) -> Result<Self> {
        let mut folds = Vec::with_capacity(parts.len());
        for held in parts {
            let train = complement(x.len(), held);
            if k_max > train.len() {
                return Err(Error::domain(format!(
                    "k={k_max} exceeds fold training size {}",
                    train.len()
                )));
            }
            let tx = x.select(&train);
            let ty: Vec<u8> = train.iter().map(|&i| y[i]).collect();
            let lists = exec.map(held.len(), |q| {
                nearest(&tx, x.row(held[q]), k_max, metric)
                    .into_iter()
                    .map(|(d, i)| (d, ty[i]))
                    .collect::<Vec<_>>()
            });
            let truth = held.iter().map(|&i| y[i]).collect();
            folds.push((truth, lists.concat()));
        }
        Ok(Self { k_max, folds })
    }

    fn score(&self, k: usize, weighting: Weighting) -> Result<f64> {
        let mut total = 0.0;
        for (truth, flat) in &self.folds {
            let pred: Vec<u8> = flat
                .chunks_exact(self.k_max)
                .map(|nb| argmax(&vote_mass(nb[..k].iter().copied(), weighting)))
                .collect();
            total += accuracy_of(&pred, truth)?;
        }
        Ok(total / self.folds.len() as f64)
    }
}

/// Randomised search over `space`: draws `n_iter` distinct combinations,
/// scores each by k-fold accuracy and returns the best (ties resolved by
/// [`HyperSpace::combos`] order).
pub fn random_search(
    x: &FeatureMatrix,
    y: &[u8],
    space: &HyperSpace,
    n_iter: usize,
    folds: usize,
    seed: u64,
) -> Result<SearchResult> {
    random_search_with(x, y, space, n_iter, folds, seed, Exec::default())
}

#[allow(clippy::too_many_arguments)]
pub fn random_search_with(
    x: &FeatureMatrix,
    y: &[u8],
    space: &HyperSpace,
    n_iter: usize,
    folds: usize,
    seed: u64,
    exec: Exec,
) -> Result<SearchResult> {
    if n_iter == 0 {
        return Err(Error::domain("n_iter must be at least 1"));
    }
    if x.len() != y.len() {
        return Err(Error::domain("feature/label length mismatch"));
    }
    let combos = space.combos();
    if combos.is_empty() || space.k_min == 0 {
        return Err(Error::domain("empty or invalid hyperparameter space"));
    }
    let n_iter = if n_iter > combos.len() {
        log::warn!(
            "n_iter={n_iter} exceeds the {} available combinations; clipping",
            combos.len()
        );
        combos.len()
    } else {
        n_iter
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(SEARCH_STREAM);
    let picked = rand::seq::index::sample(&mut rng, combos.len(), n_iter).into_vec();

    let parts = fold_partition(x.len(), folds, seed)?;
    let k_max = picked.iter().map(|&i| combos[i].k).max().unwrap_or(1);
    let mut caches: Vec<(Metric, NeighborCache)> = Vec::new();
    for &i in &picked {
        let m = combos[i].metric;
        if !caches.iter().any(|(cm, _)| *cm == m) {
            caches.push((m, NeighborCache::build(x, y, &parts, m, k_max, exec)?));
        }
    }

    let mut trials = Vec::with_capacity(n_iter);
    let mut best: Option<(usize, f64)> = None;
    for &i in &picked {
        let h = combos[i];
        let cache = &caches.iter().find(|(m, _)| *m == h.metric).expect("cache built").1;
        let s = cache.score(h.k, h.weighting)?;
        trials.push((h, s));
        best = match best {
            Some((bi, bs)) if bs > s || (bs == s && bi < i) => Some((bi, bs)),
            _ => Some((i, s)),
        };
    }
    let (bi, best_score) = best.expect("n_iter >= 1");
    Ok(SearchResult {
        best: combos[bi],
        best_score,
        trials,
    })
}
