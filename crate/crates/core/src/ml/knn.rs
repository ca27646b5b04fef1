//! Exhaustive-scan k-nearest-neighbour classifier.

use serde::{Deserialize, Serialize};

use super::{FeatureMatrix, Mapping};
use crate::dataset::NUM_CLASSES;
use crate::error::{Error, Result};
use crate::exec::Exec;

pub const MODEL_SCHEMA: &str = "coherence-lab/knn-model/v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    Uniform,
    Distance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Euclidean,
    Manhattan,
}

impl Metric {
    #[inline]
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Metric::Euclidean => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
            Metric::Manhattan => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Hyper {
    pub k: usize,
    pub weighting: Weighting,
    pub metric: Metric,
}

impl Default for Hyper {
    fn default() -> Self {
        Self {
            k: 5,
            weighting: Weighting::Uniform,
            metric: Metric::Euclidean,
        }
    }
}

impl std::fmt::Display for Hyper {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "k={} weights={:?} metric={:?}", self.k, self.weighting, self.metric)
    }
}

/// Per-feature standardisation fitted on the training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZScore {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl ZScore {
    pub fn fit(x: &FeatureMatrix) -> Self {
        let d = x.dim();
        let n = x.len().max(1) as f64;
        let mut mean = vec![0.0; d];
        for row in x.rows() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v / n;
            }
        }
        let mut std = vec![0.0; d];
        for row in x.rows() {
            for ((s, v), m) in std.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m) / n;
            }
        }
        for s in &mut std {
            *s = if *s > 0.0 { s.sqrt() } else { 1.0 };
        }
        Self { mean, std }
    }

    pub fn apply(&self, row: &[f64], out: &mut [f64]) {
        for i in 0..row.len() {
            out[i] = (row[i] - self.mean[i]) / self.std[i];
        }
    }

    pub fn transform(&self, x: &FeatureMatrix) -> FeatureMatrix {
        let mut data = vec![0.0; x.as_slice().len()];
        for (row, out) in x.rows().zip(data.chunks_mut(x.dim())) {
            self.apply(row, out);
        }
        FeatureMatrix::new(x.dim(), data).expect("same shape")
    }
}

/// A neighbour: distance and training-row index.
pub type Neighbor = (f64, usize);

/// The `k` nearest rows of `train` to `query`, ordered by `(distance, index)`.
///
/// Equal distances keep the lower training index first.
pub fn nearest(train: &FeatureMatrix, query: &[f64], k: usize, metric: Metric) -> Vec<Neighbor> {
    let mut best: Vec<Neighbor> = Vec::with_capacity(k + 1);
    for (i, row) in train.rows().enumerate() {
        let d = metric.distance(row, query);
        if best.len() == k {
            if !(d < best[k - 1].0) {
                continue;
            }
            best.pop();
        }
        let pos = best.partition_point(|&(bd, _)| bd <= d);
        best.insert(pos, (d, i));
    }
    best
}

/// Unnormalised class masses of a neighbour set.
///
/// With distance weighting, any exact match (distance 0) takes all the mass.
pub fn vote_mass(
    neighbors: impl Iterator<Item = (f64, u8)> + Clone,
    weighting: Weighting,
) -> [f64; NUM_CLASSES] {
    let mut mass = [0.0; NUM_CLASSES];
    match weighting {
        Weighting::Uniform => {
            for (_, l) in neighbors {
                mass[l as usize] += 1.0;
            }
        }
        Weighting::Distance => {
            if neighbors.clone().any(|(d, _)| d == 0.0) {
                for (_, l) in neighbors.filter(|(d, _)| *d == 0.0) {
                    mass[l as usize] += 1.0;
                }
            } else {
                for (d, l) in neighbors {
                    mass[l as usize] += 1.0 / d;
                }
            }
        }
    }
    mass
}

/// Index of the largest mass; ties go to the smallest class index.
pub fn argmax(mass: &[f64; NUM_CLASSES]) -> u8 {
    let mut best = 0;
    for c in 1..NUM_CLASSES {
        if mass[c] > mass[best] {
            best = c;
        }
    }
    best as u8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub schema: String,
    pub hyper: Hyper,
    /// Zero-based indices into the four cumulant ratios.
    pub feature_subset: Vec<usize>,
    pub scaler: Option<ZScore>,
    pub train_features: FeatureMatrix,
    pub train_labels: Vec<u8>,
}

impl KnnModel {
    /// Stores the training set. `x` must already be restricted to `feature_subset`.
    pub fn fit(
        x: FeatureMatrix,
        y: Vec<u8>,
        hyper: Hyper,
        feature_subset: Vec<usize>,
        standardize: bool,
    ) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::domain(format!(
                "{} feature rows but {} labels",
                x.len(),
                y.len()
            )));
        }
        if x.dim() != feature_subset.len() {
            return Err(Error::domain("feature dimension does not match feature subset"));
        }
        if hyper.k == 0 || hyper.k > x.len().max(1) {
            return Err(Error::domain(format!(
                "k={} outside 1..={}",
                hyper.k,
                x.len()
            )));
        }
        if y.iter().any(|&l| l as usize >= NUM_CLASSES) {
            return Err(Error::domain("label out of range"));
        }
        let (scaler, train_features) = if standardize {
            let z = ZScore::fit(&x);
            let t = z.transform(&x);
            (Some(z), t)
        } else {
            (None, x)
        };
        Ok(Self {
            schema: MODEL_SCHEMA.to_string(),
            hyper,
            feature_subset,
            scaler,
            train_features,
            train_labels: y,
        })
    }

    pub fn for_mapping(
        mapping: Mapping,
        x: FeatureMatrix,
        y: Vec<u8>,
        hyper: Hyper,
    ) -> Result<Self> {
        Self::fit(x, y, hyper, mapping.feature_subset().to_vec(), false)
    }

    pub fn dim(&self) -> usize {
        self.feature_subset.len()
    }

    pub fn len(&self) -> usize {
        self.train_labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.train_labels.is_empty()
    }

    fn mass(&self, x: &[f64]) -> Result<[f64; NUM_CLASSES]> {
        if self.is_empty() {
            return Err(Error::State("model has no training data".into()));
        }
        if x.len() != self.dim() {
            return Err(Error::domain(format!(
                "query has {} features, model expects {}",
                x.len(),
                self.dim()
            )));
        }
        let mut buf = [0.0; 4];
        let q: &[f64] = match &self.scaler {
            Some(z) => {
                z.apply(x, &mut buf[..x.len()]);
                &buf[..x.len()]
            }
            None => x,
        };
        let nb = nearest(&self.train_features, q, self.hyper.k, self.hyper.metric);
        let labels = &self.train_labels;
        Ok(vote_mass(
            nb.iter().map(|&(d, i)| (d, labels[i])),
            self.hyper.weighting,
        ))
    }

    pub fn predict(&self, x: &[f64]) -> Result<u8> {
        Ok(argmax(&self.mass(x)?))
    }

    /// Normalised class vote masses.
    pub fn predict_proba(&self, x: &[f64]) -> Result<[f64; NUM_CLASSES]> {
        let m = self.mass(x)?;
        let total: f64 = m.iter().sum();
        Ok(m.map(|v| v / total))
    }

    pub fn predict_batch(&self, x: &FeatureMatrix, exec: Exec) -> Result<Vec<u8>> {
        exec.try_map(x.len(), |i| self.predict(x.row(i)))
    }

    pub fn predict_proba_batch(
        &self,
        x: &FeatureMatrix,
        exec: Exec,
    ) -> Result<Vec<[f64; NUM_CLASSES]>> {
        exec.try_map(x.len(), |i| self.predict_proba(x.row(i)))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(s)?;
        if m.schema != MODEL_SCHEMA {
            return Err(Error::domain(format!("unsupported model schema {:?}", m.schema)));
        }
        if m.train_features.len() != m.train_labels.len() || m.train_features.dim() != m.dim() {
            return Err(Error::domain("model training matrix is inconsistent"));
        }
        Ok(m)
    }
}
