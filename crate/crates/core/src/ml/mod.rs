//! Classifiers mapping cumulant ratios to hot-coherence classes.

pub mod cv;
pub mod knn;
pub mod tree;

use serde::{Deserialize, Serialize};

use crate::dataset::LabeledSample;
use crate::error::{Error, Result};

pub use cv::{kfold_accuracy, random_search, single_shot_accuracy, HyperSpace, SearchResult};
pub use knn::{Hyper, KnnModel, Metric, Weighting};

/// Dense row-major feature matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || data.len() % dim != 0 {
            return Err(Error::domain(format!(
                "{} values do not form rows of width {dim}",
                data.len()
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows<I: IntoIterator<Item = Vec<f64>>>(rows: I) -> Result<Self> {
        let mut dim = 0;
        let mut data = Vec::new();
        for r in rows {
            if dim == 0 {
                dim = r.len();
            } else if r.len() != dim {
                return Err(Error::domain("ragged feature rows"));
            }
            data.extend(r);
        }
        Self::new(dim, data)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self {
            dim: self.dim,
            data,
        }
    }

    /// Multiplies every entry by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }
}

/// Which cumulant ratios a classifier sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Mapping {
    /// C1..C4
    F1,
    /// C1..C3
    F2,
    /// C1, C2
    F3,
}

impl Mapping {
    pub const ALL: [Mapping; 3] = [Mapping::F1, Mapping::F2, Mapping::F3];

    pub fn feature_subset(self) -> &'static [usize] {
        match self {
            Mapping::F1 => &[0, 1, 2, 3],
            Mapping::F2 => &[0, 1, 2],
            Mapping::F3 => &[0, 1],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Mapping::F1 => "f1",
            Mapping::F2 => "f2",
            Mapping::F3 => "f3",
        }
    }

    /// Features and labels of `samples` restricted to this mapping.
    pub fn extract<'a>(
        self,
        samples: impl IntoIterator<Item = &'a LabeledSample>,
    ) -> (FeatureMatrix, Vec<u8>) {
        let subset = self.feature_subset();
        let mut data = Vec::new();
        let mut labels = Vec::new();
        for s in samples {
            data.extend(subset.iter().map(|&i| s.features[i]));
            labels.push(s.label);
        }
        (
            FeatureMatrix {
                dim: subset.len(),
                data,
            },
            labels,
        )
    }
}

impl std::fmt::Display for Mapping {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}
