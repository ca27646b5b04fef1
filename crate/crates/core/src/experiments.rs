//! End-to-end runs: tuning and evaluating the three mappings, the
//! constrained-scenario study and the dataset-size sweep.
//!
//! Scenario features are synthetic draws inside the given ranges. A drawn
//! quadruple need not correspond to any physical parameter set.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{self, Dataset, GenerateConfig, Interval, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::metrics::{self, AccuracyRow, ConfusionMatrix};
use crate::ml::cv::{self, accuracy_of, fold_partition, DEFAULT_FOLDS, DEFAULT_N_ITER};
use crate::ml::knn::argmax;
use crate::ml::tree::{DecisionTree, TreeParams};
use crate::ml::{FeatureMatrix, Hyper, HyperSpace, KnnModel, Mapping, SearchResult};

/// A predicted probability at least this close to 1 counts as unit probability.
pub const UNIT_PROBABILITY_TOL: f64 = 1e-12;
pub const MAX_REJECTION_ATTEMPTS: usize = 1_000_000;
pub const MIN_ACCEPTANCE_RATE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub space: HyperSpace,
    pub n_iter: usize,
    pub folds: usize,
    pub seed: u64,
    pub standardize: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            space: HyperSpace::default(),
            n_iter: DEFAULT_N_ITER,
            folds: DEFAULT_FOLDS,
            seed: 0,
            standardize: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineReport {
    pub mapping: Mapping,
    /// CV accuracy on the training split with `k=5`, uniform, euclidean.
    pub default_cv_accuracy: f64,
    pub search: SearchResult,
    pub validation_accuracy: f64,
    pub confusion: ConfusionMatrix,
}

impl PipelineReport {
    pub fn accuracy_row(&self) -> AccuracyRow {
        let h = self.search.best;
        AccuracyRow {
            mapping: self.mapping.to_string(),
            k: h.k,
            weighting: format!("{:?}", h.weighting).to_lowercase(),
            metric: format!("{:?}", h.metric).to_lowercase(),
            cv_accuracy: self.search.best_score,
            validation_accuracy: self.validation_accuracy,
        }
    }
}

/// Tunes on the training split, refits with the best hyperparameters and
/// scores the validation split.
pub fn run_pipeline(
    mapping: Mapping,
    ds: &Dataset,
    cfg: &PipelineConfig,
) -> Result<(KnnModel, PipelineReport)> {
    run_pipeline_with(mapping, ds, cfg, Exec::default())
}

pub fn run_pipeline_with(
    mapping: Mapping,
    ds: &Dataset,
    cfg: &PipelineConfig,
    exec: Exec,
) -> Result<(KnnModel, PipelineReport)> {
    if ds.train.is_empty() || ds.validation.is_empty() {
        return Err(Error::domain("dataset needs both a training and a validation split"));
    }
    let (tx, ty) = mapping.extract(ds.train_samples());
    let (vx, vy) = mapping.extract(ds.validation_samples());
    let tx_s = if cfg.standardize {
        crate::ml::knn::ZScore::fit(&tx).transform(&tx)
    } else {
        tx.clone()
    };

    let default_scores = cv::kfold_scores(&tx_s, &ty, Hyper::default(), cfg.folds, cfg.seed, exec)?;
    let default_cv = default_scores.iter().sum::<f64>() / default_scores.len() as f64;
    let search = cv::random_search_with(&tx_s, &ty, &cfg.space, cfg.n_iter, cfg.folds, cfg.seed, exec)?;
    log::info!(
        "{mapping}: best {} with CV accuracy {:.2}%",
        search.best,
        search.best_score
    );

    let model = KnnModel::fit(
        tx,
        ty,
        search.best,
        mapping.feature_subset().to_vec(),
        cfg.standardize,
    )?;
    let pred = model.predict_batch(&vx, exec)?;
    let confusion = ConfusionMatrix::from_predictions(&pred, &vy)?;
    let validation_accuracy = accuracy_of(&pred, &vy)?;
    Ok((
        model,
        PipelineReport {
            mapping,
            default_cv_accuracy: default_cv,
            search,
            validation_accuracy,
            confusion,
        },
    ))
}

/// Writes `accuracy.csv`, `class_metrics.csv` and one `confusion_<mapping>.txt` per report.
pub fn write_pipeline_reports(reports: &[PipelineReport], dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let rows: Vec<AccuracyRow> = reports.iter().map(PipelineReport::accuracy_row).collect();
    fs::write(dir.join("accuracy.csv"), metrics::accuracy_table_csv(&rows))?;
    let entries: Vec<(String, ConfusionMatrix)> = reports
        .iter()
        .map(|r| (r.mapping.to_string(), r.confusion))
        .collect();
    fs::write(dir.join("class_metrics.csv"), metrics::class_table_csv(&entries))?;
    for r in reports {
        fs::write(
            dir.join(format!("confusion_{}.txt", r.mapping)),
            r.confusion.render(),
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairConstraint {
    Equal,
    Greater,
    Less,
    Absent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioSpec {
    /// Relation imposed on `(C1, C2)`; `absent` is not allowed here.
    pub pair12: PairConstraint,
    /// Relation imposed on `(C3, C4)`; `absent` draws them independently.
    pub pair34: PairConstraint,
    pub n: usize,
    pub ranges: [Interval; 4],
    pub seed: u64,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self {
            pair12: PairConstraint::Equal,
            pair34: PairConstraint::Absent,
            n: 1000,
            ranges: [
                Interval::new(0.76, 1.001),
                Interval::new(0.80, 1.01),
                Interval::new(0.76, 1.002),
                Interval::new(0.76, 1.001),
            ],
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioResult {
    /// Instances whose largest class probability is (numerically) one.
    pub unit_counts: [usize; NUM_CLASSES],
    /// Instances whose argmax prediction is each class.
    pub predicted_counts: [usize; NUM_CLASSES],
    pub mean_proba: [f64; NUM_CLASSES],
    /// Class with the most unit-probability instances.
    pub winner: u8,
    pub acceptance_rate: f64,
}

fn pair_feasible(c: PairConstraint, a: Interval, b: Interval) -> bool {
    match c {
        PairConstraint::Greater => a.hi > b.lo,
        PairConstraint::Less => a.lo < b.hi,
        _ => true,
    }
}

/// Draws one constrained pair; returns the values and the number of attempts.
fn draw_pair(
    c: PairConstraint,
    a: Interval,
    b: Interval,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, f64, usize)> {
    match c {
        PairConstraint::Equal => {
            let x = a.sample(rng);
            Ok((x, x, 1))
        }
        PairConstraint::Absent => Ok((a.sample(rng), b.sample(rng), 1)),
        PairConstraint::Greater | PairConstraint::Less => {
            for attempt in 1..=MAX_REJECTION_ATTEMPTS {
                let x = a.sample(rng);
                let y = b.sample(rng);
                let ok = if c == PairConstraint::Greater { x > y } else { x < y };
                if ok {
                    return Ok((x, y, attempt));
                }
            }
            Err(Error::InfeasibleConstraint {
                rate: 1.0 / MAX_REJECTION_ATTEMPTS as f64,
            })
        }
    }
}

/// Four synthetic feature values per instance; instance `i` uses ChaCha stream `i`.
pub fn scenario_features(spec: &ScenarioSpec, exec: Exec) -> Result<(Vec<[f64; 4]>, f64)> {
    if spec.n == 0 {
        return Err(Error::domain("scenario needs at least one instance"));
    }
    if spec.pair12 == PairConstraint::Absent {
        return Err(Error::domain("the (C1, C2) constraint cannot be absent"));
    }
    for r in &spec.ranges {
        if !(r.lo <= r.hi) || !r.lo.is_finite() || !r.hi.is_finite() {
            return Err(Error::domain(format!("invalid range [{}, {}]", r.lo, r.hi)));
        }
    }
    let r = spec.ranges;
    if !pair_feasible(spec.pair12, r[0], r[1]) || !pair_feasible(spec.pair34, r[2], r[3]) {
        return Err(Error::InfeasibleConstraint { rate: 0.0 });
    }
    let rows = exec.try_map(spec.n, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(i as u64);
        let (c1, c2, a12) = draw_pair(spec.pair12, r[0], r[1], &mut rng)?;
        let (c3, c4, a34) = draw_pair(spec.pair34, r[2], r[3], &mut rng)?;
        Ok::<_, Error>(([c1, c2, c3, c4], a12, a34))
    })?;
    let attempts = |sel: fn(&([f64; 4], usize, usize)) -> usize| rows.iter().map(sel).sum::<usize>();
    let rate12 = spec.n as f64 / attempts(|t| t.1) as f64;
    let rate34 = spec.n as f64 / attempts(|t| t.2) as f64;
    let rate = rate12.min(rate34);
    if rate < MIN_ACCEPTANCE_RATE {
        return Err(Error::InfeasibleConstraint { rate });
    }
    Ok((rows.into_iter().map(|t| t.0).collect(), rate))
}

pub fn run_scenario(model: &KnnModel, spec: &ScenarioSpec) -> Result<ScenarioResult> {
    run_scenario_with(model, spec, Exec::default())
}

pub fn run_scenario_with(model: &KnnModel, spec: &ScenarioSpec, exec: Exec) -> Result<ScenarioResult> {
    let subset = &model.feature_subset;
    if spec.pair34 != PairConstraint::Absent && !(subset.contains(&2) && subset.contains(&3)) {
        return Err(Error::domain(
            "a (C3, C4) constraint needs a model that uses both C3 and C4",
        ));
    }
    if subset.iter().any(|&i| i >= 4) {
        return Err(Error::domain("model feature subset out of range"));
    }
    let (rows, acceptance_rate) = scenario_features(spec, exec)?;
    let x = FeatureMatrix::from_rows(
        rows.iter()
            .map(|r| subset.iter().map(|&i| r[i]).collect::<Vec<_>>()),
    )?;
    let proba = model.predict_proba_batch(&x, exec)?;
    let mut unit_counts = [0; NUM_CLASSES];
    let mut predicted_counts = [0; NUM_CLASSES];
    let mut mean_proba = [0.0; NUM_CLASSES];
    for p in &proba {
        let top = argmax(p);
        predicted_counts[top as usize] += 1;
        if p[top as usize] >= 1.0 - UNIT_PROBABILITY_TOL {
            unit_counts[top as usize] += 1;
        }
        for (m, v) in mean_proba.iter_mut().zip(p) {
            *m += v;
        }
    }
    for m in &mut mean_proba {
        *m /= proba.len() as f64;
    }
    let mut winner = 0;
    for c in 1..NUM_CLASSES {
        if unit_counts[c] > unit_counts[winner] {
            winner = c;
        }
    }
    Ok(ScenarioResult {
        unit_counts,
        predicted_counts,
        mean_proba,
        winner: winner as u8,
        acceptance_rate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub n: usize,
    pub knn_cv_accuracy: f64,
    pub tree_cv_accuracy: f64,
}

/// Mean k-fold accuracy of the tree baseline on the same folds as the KNN runs.
pub fn tree_kfold_accuracy(
    x: &FeatureMatrix,
    y: &[u8],
    params: TreeParams,
    folds: usize,
    seed: u64,
) -> Result<f64> {
    let parts = fold_partition(x.len(), folds, seed)?;
    let mut total = 0.0;
    for held in &parts {
        let mut mask = vec![true; x.len()];
        for &i in held {
            mask[i] = false;
        }
        let train: Vec<usize> = (0..x.len()).filter(|&i| mask[i]).collect();
        let ty: Vec<u8> = train.iter().map(|&i| y[i]).collect();
        let tree = DecisionTree::fit(&x.select(&train), &ty, params)?;
        let pred = tree.predict_batch(&x.select(held))?;
        let vy: Vec<u8> = held.iter().map(|&i| y[i]).collect();
        total += accuracy_of(&pred, &vy)?;
    }
    Ok(total / parts.len() as f64)
}

/// For each size, generates a dataset and reports default-hyperparameter
/// k-fold accuracy on its training split, for KNN and the tree baseline.
pub fn run_size_sweep(sizes: &[usize], mapping: Mapping, seed: u64) -> Result<Vec<SweepRow>> {
    run_size_sweep_with(sizes, mapping, seed, Exec::default())
}

pub fn run_size_sweep_with(
    sizes: &[usize],
    mapping: Mapping,
    seed: u64,
    exec: Exec,
) -> Result<Vec<SweepRow>> {
    if sizes.is_empty() {
        return Err(Error::domain("no sizes given"));
    }
    if sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::domain("sizes must be strictly ascending"));
    }
    sizes
        .iter()
        .map(|&n| {
            let ds = dataset::generate_with(&GenerateConfig::new(n, seed), exec)?;
            let (x, y) = mapping.extract(ds.train_samples());
            let knn = cv::kfold_scores(&x, &y, Hyper::default(), DEFAULT_FOLDS, seed, exec)?;
            let tree = tree_kfold_accuracy(&x, &y, TreeParams::default(), DEFAULT_FOLDS, seed)?;
            Ok(SweepRow {
                n,
                knn_cv_accuracy: knn.iter().sum::<f64>() / knn.len() as f64,
                tree_cv_accuracy: tree,
            })
        })
        .collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("n,knn_cv_accuracy,tree_cv_accuracy\n");
    for r in rows {
        let _ = writeln!(s, "{},{:.4},{:.4}", r.n, r.knn_cv_accuracy, r.tree_cv_accuracy);
    }
    s
}

/// Whitespace-separated columns for gnuplot.
pub fn sweep_dat(rows: &[SweepRow]) -> String {
    let mut s = String::from("# n knn_cv_accuracy tree_cv_accuracy\n");
    for r in rows {
        let _ = writeln!(s, "{} {:.4} {:.4}", r.n, r.knn_cv_accuracy, r.tree_cv_accuracy);
    }
    s
}

pub fn scenario_csv(results: &[(String, ScenarioResult)]) -> String {
    let mut s = String::from("case,unit_0,unit_1,unit_2,unit_3,pred_0,pred_1,pred_2,pred_3,p_0,p_1,p_2,p_3,winner\n");
    for (case, r) in results {
        let _ = write!(s, "{case}");
        for v in r.unit_counts.iter().chain(&r.predicted_counts) {
            let _ = write!(s, ",{v}");
        }
        for v in &r.mean_proba {
            let _ = write!(s, ",{v:.6}");
        }
        let _ = writeln!(s, ",{}", r.winner);
    }
    s
}
