//! Labelled cumulant-ratio datasets: sampling, labelling and CSV persistence.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::counting::cumulant_ratios;
use crate::engine::EngineParams;
use crate::error::{Error, Result};
use crate::exec::Exec;

pub const NUM_CLASSES: usize = 4;
pub const DEFAULT_TRAIN_FRACTION: f64 = 0.7;
/// Maximum fraction of degenerate draws before generation is abandoned.
pub const MAX_DEGENERATE_FRACTION: f64 = 0.1;
const MAX_REDRAWS_PER_SAMPLE: usize = 1000;
const SPLIT_STREAM: u64 = u64::MAX;

pub const CSV_HEADER: &str = "c1,c2,c3,c4,label,t_c,t_h,t_l,p_c,p_h,split";

/// Interval index of the hot-bath coherence strength.
///
/// Intervals are closed below and open above, with `p_h = 1` folded into class 3.
pub fn label_of(p_h: f64) -> Result<u8> {
    if !(0.0..=1.0).contains(&p_h) {
        return Err(Error::domain(format!("p_h must lie in [0, 1], got {p_h}")));
    }
    Ok(((p_h * 4.0).floor() as u8).min(3))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub const fn point(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        let u: f64 = rng.random();
        self.lo + (self.hi - self.lo) * u
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    fn check(&self, name: &str) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo <= self.hi) {
            return Err(Error::domain(format!(
                "invalid range for {name}: [{}, {}]",
                self.lo, self.hi
            )));
        }
        Ok(())
    }
}

/// Sampling box for the five varied engine parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterRanges {
    pub t_c: Interval,
    pub t_h: Interval,
    pub t_l: Interval,
    pub p_c: Interval,
    pub p_h: Interval,
}

impl Default for ParameterRanges {
    fn default() -> Self {
        Self {
            t_c: Interval::new(0.4, 2.5),
            t_h: Interval::new(3.0, 4.5),
            t_l: Interval::new(1.0, 7.0),
            p_c: Interval::new(0.0, 1.0),
            p_h: Interval::new(0.0, 1.0),
        }
    }
}

impl ParameterRanges {
    pub fn validate(&self) -> Result<()> {
        self.t_c.check("t_c")?;
        self.t_h.check("t_h")?;
        self.t_l.check("t_l")?;
        self.p_c.check("p_c")?;
        self.p_h.check("p_h")?;
        for (name, iv) in [("t_c", self.t_c), ("t_h", self.t_h), ("t_l", self.t_l)] {
            if !(iv.lo > 0.0) {
                return Err(Error::domain(format!("{name} range must be positive")));
            }
        }
        for (name, iv) in [("p_c", self.p_c), ("p_h", self.p_h)] {
            if iv.lo < 0.0 || iv.hi > 1.0 {
                return Err(Error::domain(format!("{name} range must lie in [0, 1]")));
            }
        }
        Ok(())
    }

    /// One draw; the order of the five uniforms is part of the determinism contract.
    pub fn draw(&self, fixed: &EngineParams, rng: &mut impl Rng) -> EngineParams {
        let t_c = self.t_c.sample(rng);
        let t_h = self.t_h.sample(rng);
        let t_l = self.t_l.sample(rng);
        let p_c = self.p_c.sample(rng);
        let p_h = self.p_h.sample(rng);
        EngineParams {
            t_c,
            t_h,
            t_l,
            p_c,
            p_h,
            ..*fixed
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub features: [f64; 4],
    pub label: u8,
    pub params: EngineParams,
}

impl LabeledSample {
    pub fn from_params(params: EngineParams) -> Result<Self> {
        let set = cumulant_ratios(&params)?;
        if set.c.iter().any(|c| !c.is_finite()) {
            return Err(Error::domain("non-finite cumulant ratio"));
        }
        Ok(Self {
            features: set.c,
            label: label_of(params.p_h)?,
            params,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitTag {
    Train,
    Validation,
}

impl SplitTag {
    fn as_str(self) -> &'static str {
        match self {
            SplitTag::Train => "train",
            SplitTag::Validation => "validation",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub seed: u64,
    pub n: usize,
    pub ranges: ParameterRanges,
    /// Template for the non-varied parameters (its t/p fields are ignored).
    pub fixed: EngineParams,
    pub train_fraction: f64,
    pub degenerate_redraws: usize,
    pub generated_at_unix: u64,
    pub code_version: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<LabeledSample>,
    /// Sorted sample indices of the training split.
    pub train: Vec<usize>,
    /// Sorted sample indices of the validation split.
    pub validation: Vec<usize>,
    pub meta: DatasetMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateConfig {
    pub n: usize,
    pub seed: u64,
    pub ranges: ParameterRanges,
    pub fixed: EngineParams,
    pub train_fraction: f64,
}

impl GenerateConfig {
    pub fn new(n: usize, seed: u64) -> Self {
        Self {
            n,
            seed,
            ranges: ParameterRanges::default(),
            fixed: EngineParams::default(),
            train_fraction: DEFAULT_TRAIN_FRACTION,
        }
    }
}

/// Deterministic train/validation partition of `0..n`.
pub fn split_indices(n: usize, train_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(SPLIT_STREAM);
    idx.shuffle(&mut rng);
    let n_train = (n as f64 * train_fraction).round() as usize;
    let mut train = idx[..n_train].to_vec();
    let mut val = idx[n_train..].to_vec();
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

pub fn generate(n: usize, ranges: &ParameterRanges, seed: u64) -> Result<Dataset> {
    let cfg = GenerateConfig {
        ranges: *ranges,
        ..GenerateConfig::new(n, seed)
    };
    generate_with(&cfg, Exec::default())
}

/// Draws `cfg.n` labelled samples; sample `i` uses ChaCha stream `i` of the seed
/// and is re-drawn within that stream until its baseline is non-degenerate.
pub fn generate_with(cfg: &GenerateConfig, exec: Exec) -> Result<Dataset> {
    if cfg.n == 0 {
        return Err(Error::domain("dataset size must be at least 1"));
    }
    if !(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0) {
        return Err(Error::domain("train fraction must lie in (0, 1)"));
    }
    cfg.ranges.validate()?;
    let fixed = cfg.fixed;
    let drawn: Vec<(LabeledSample, usize)> = exec.try_map(cfg.n, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(i as u64);
        let mut rejected = 0;
        loop {
            let params = cfg.ranges.draw(&fixed, &mut rng);
            match LabeledSample::from_params(params) {
                Ok(s) => return Ok((s, rejected)),
                Err(Error::DegenerateSample { .. }) if rejected < MAX_REDRAWS_PER_SAMPLE => {
                    rejected += 1;
                }
                Err(Error::DegenerateSample { .. }) => {
                    return Err(Error::GenerationQuality {
                        rejected,
                        drawn: rejected,
                    })
                }
                Err(e) => return Err(e),
            }
        }
    })?;
    let rejected: usize = drawn.iter().map(|d| d.1).sum();
    let total = rejected + cfg.n;
    if rejected as f64 > MAX_DEGENERATE_FRACTION * total as f64 {
        return Err(Error::GenerationQuality {
            rejected,
            drawn: total,
        });
    }
    if rejected > 0 {
        log::info!("re-drew {rejected} degenerate samples out of {total} draws");
    }
    let samples: Vec<LabeledSample> = drawn.into_iter().map(|d| d.0).collect();
    let (train, validation) = split_indices(cfg.n, cfg.train_fraction, cfg.seed);
    Ok(Dataset {
        samples,
        train,
        validation,
        meta: DatasetMeta {
            seed: cfg.seed,
            n: cfg.n,
            ranges: cfg.ranges,
            fixed,
            train_fraction: cfg.train_fraction,
            degenerate_redraws: rejected,
            generated_at_unix: unix_now(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
        },
    })
}

fn unix_now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn split_of(&self, index: usize) -> SplitTag {
        if self.train.binary_search(&index).is_ok() {
            SplitTag::Train
        } else {
            SplitTag::Validation
        }
    }

    pub fn train_samples(&self) -> impl Iterator<Item = &LabeledSample> {
        self.train.iter().map(|&i| &self.samples[i])
    }

    pub fn validation_samples(&self) -> impl Iterator<Item = &LabeledSample> {
        self.validation.iter().map(|&i| &self.samples[i])
    }

    /// Per-class sample counts.
    pub fn class_counts(&self) -> [usize; NUM_CLASSES] {
        let mut c = [0; NUM_CLASSES];
        for s in &self.samples {
            c[s.label as usize] += 1;
        }
        c
    }

    /// A dataset with no samples, e.g. as a schema placeholder.
    pub fn empty(meta: DatasetMeta) -> Self {
        Self {
            samples: Vec::new(),
            train: Vec::new(),
            validation: Vec::new(),
            meta,
        }
    }

    /// CSV body as written by [`write_csv`].
    pub fn to_csv_string(&self) -> String {
        let mut out = String::with_capacity(64 + self.samples.len() * 200);
        out.push_str(CSV_HEADER);
        out.push('\n');
        for (i, s) in self.samples.iter().enumerate() {
            for c in s.features {
                let _ = write!(out, "{c:.16e},");
            }
            let p = &s.params;
            let _ = writeln!(
                out,
                "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
                s.label,
                p.t_c,
                p.t_h,
                p.t_l,
                p.p_c,
                p.p_h,
                self.split_of(i).as_str()
            );
        }
        out
    }
}

/// `<dir>/<stem>.meta.json` next to a CSV path.
pub fn meta_path(csv: &Path) -> PathBuf {
    let stem = csv
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    csv.with_file_name(format!("{stem}.meta.json"))
}

/// Writes the CSV and its JSON metadata sidecar.
pub fn write_csv(ds: &Dataset, path: &Path) -> Result<()> {
    fs::write(path, ds.to_csv_string())?;
    fs::write(meta_path(path), serde_json::to_string_pretty(&ds.meta)?)?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path)?;
    let meta: DatasetMeta = {
        let mp = meta_path(path);
        let raw = fs::read_to_string(&mp).map_err(|e| Error::Parse {
            path: mp.clone(),
            line: 0,
            msg: format!("cannot read metadata sidecar: {e}"),
        })?;
        serde_json::from_str(&raw).map_err(|e| Error::Parse {
            path: mp,
            line: e.line(),
            msg: e.to_string(),
        })?
    };
    parse_csv(&text, &meta, path)
}

fn parse_csv(text: &str, meta: &DatasetMeta, path: &Path) -> Result<Dataset> {
    let err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end() == CSV_HEADER => {}
        Some((_, h)) => return Err(err(1, format!("unexpected header {h:?}"))),
        None => return Err(err(1, "missing header".into())),
    }
    let mut samples = Vec::new();
    let mut train = Vec::new();
    let mut validation = Vec::new();
    for (lineno, line) in lines {
        let lineno = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 11 {
            return Err(err(lineno, format!("expected 11 fields, found {}", fields.len())));
        }
        let num = |k: usize| -> Result<f64> {
            fields[k]
                .trim()
                .parse::<f64>()
                .map_err(|e| err(lineno, format!("field {}: {e}", k + 1)))
        };
        let features = [num(0)?, num(1)?, num(2)?, num(3)?];
        let label: u8 = fields[4]
            .trim()
            .parse()
            .map_err(|e| err(lineno, format!("label: {e}")))?;
        let params = EngineParams {
            t_c: num(5)?,
            t_h: num(6)?,
            t_l: num(7)?,
            p_c: num(8)?,
            p_h: num(9)?,
            ..meta.fixed
        };
        let expected = label_of(params.p_h).map_err(|e| err(lineno, e.to_string()))?;
        if label != expected {
            return Err(err(
                lineno,
                format!("label {label} inconsistent with p_h={} (class {expected})", params.p_h),
            ));
        }
        let idx = samples.len();
        match fields[10].trim() {
            "train" => train.push(idx),
            "validation" => validation.push(idx),
            other => return Err(err(lineno, format!("unknown split tag {other:?}"))),
        }
        samples.push(LabeledSample {
            features,
            label,
            params,
        });
    }
    Ok(Dataset {
        samples,
        train,
        validation,
        meta: meta.clone(),
    })
}
