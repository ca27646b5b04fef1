use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use coherence_lab::counting::{cgf, cumulants, mean_current, steady_state};
use coherence_lab::dataset::{self, Dataset, GenerateConfig, ParameterRanges};
use coherence_lab::engine::{build_generator, EngineParams};
use coherence_lab::experiments::{self, PipelineConfig, ScenarioSpec};
use coherence_lab::ml::{cv, Hyper, KnnModel, Mapping, Metric, Weighting};
use coherence_lab::trajectory::{simulate, JumpProcess};
use coherence_lab::{Error, Result};

#[derive(Parser)]
#[command(name = "coherence-lab", version, about = "Counting statistics and coherence classification for a four-level heat engine")]
struct Cli {
    /// Master seed for data generation, folds and search.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Pipeline configuration (JSON); missing fields take defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct DataArgs {
    /// Read a dataset CSV (with its .meta.json sidecar) instead of generating one.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Size of the generated dataset when --data is absent.
    #[arg(long, default_value_t = 50_000)]
    n: usize,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a labelled dataset.
    GenData {
        #[arg(long, default_value_t = 50_000)]
        n: usize,
    },
    /// Fit a KNN model with fixed hyperparameters and score the validation split.
    Train {
        #[arg(long, value_enum)]
        mapping: Mapping,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long, default_value = "uniform", value_parser = parse_weighting)]
        weighting: Weighting,
        #[arg(long, default_value = "euclidean", value_parser = parse_metric)]
        metric: Metric,
    },
    /// Random-search the hyperparameters of one mapping.
    Tune {
        #[arg(long, value_enum)]
        mapping: Mapping,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        n_iter: Option<usize>,
    },
    /// Tune, train and report metrics for one or all mappings.
    Evaluate {
        #[arg(long, value_enum)]
        mapping: Option<Mapping>,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Query a trained model on a constrained scenario.
    Apply {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        model: PathBuf,
    },
    /// Default-hyperparameter CV accuracy against dataset size.
    Sweep {
        #[arg(long, value_delimiter = ',', default_values_t = vec![1000, 5000, 10_000, 20_000, 35_000, 50_000])]
        sizes: Vec<usize>,
        #[arg(long, value_enum, default_value = "f1")]
        mapping: Mapping,
    },
    /// Cross-check the counting statistics against independent routes.
    OracleCheck {
        #[arg(long, default_value_t = 20)]
        draws: usize,
    },
}

fn parse_weighting(s: &str) -> std::result::Result<Weighting, String> {
    match s {
        "uniform" => Ok(Weighting::Uniform),
        "distance" => Ok(Weighting::Distance),
        _ => Err(format!("unknown weighting {s:?}")),
    }
}

fn parse_metric(s: &str) -> std::result::Result<Metric, String> {
    match s {
        "euclidean" => Ok(Metric::Euclidean),
        "manhattan" => Ok(Metric::Manhattan),
        _ => Err(format!("unknown metric {s:?}")),
    }
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(p) => serde_json::from_str(&fs::read_to_string(p)?)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn load_data(args: &DataArgs, seed: u64) -> Result<Dataset> {
    match &args.data {
        Some(p) => dataset::read_csv(p),
        None => dataset::generate_with(&GenerateConfig::new(args.n, seed), Default::default()),
    }
}

fn write(out: &Path, name: &str, body: &str) -> Result<()> {
    fs::create_dir_all(out)?;
    let path = out.join(name);
    fs::write(&path, body)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli)?;
    let out = cli.out.as_path();
    match &cli.cmd {
        Cmd::GenData { n } => {
            let ds = dataset::generate_with(&GenerateConfig::new(*n, cfg.seed), Default::default())?;
            fs::create_dir_all(out)?;
            let path = out.join("dataset.csv");
            dataset::write_csv(&ds, &path)?;
            println!(
                "wrote {} ({} samples, class counts {:?}, {} degenerate redraws)",
                path.display(),
                ds.len(),
                ds.class_counts(),
                ds.meta.degenerate_redraws
            );
        }
        Cmd::Train {
            mapping,
            data,
            k,
            weighting,
            metric,
        } => {
            let ds = load_data(data, cfg.seed)?;
            let hyper = Hyper {
                k: *k,
                weighting: *weighting,
                metric: *metric,
            };
            let (tx, ty) = mapping.extract(ds.train_samples());
            let (vx, vy) = mapping.extract(ds.validation_samples());
            let model = KnnModel::fit(tx, ty, hyper, mapping.feature_subset().to_vec(), cfg.standardize)?;
            let acc = cv::single_shot_accuracy(&model, &vx, &vy)?;
            println!("{mapping} {hyper}: validation accuracy {acc:.2}%");
            write(out, &format!("model_{mapping}.json"), &model.to_json()?)?;
        }
        Cmd::Tune {
            mapping,
            data,
            n_iter,
        } => {
            let ds = load_data(data, cfg.seed)?;
            let (tx, ty) = mapping.extract(ds.train_samples());
            let res = cv::random_search(
                &tx,
                &ty,
                &cfg.space,
                n_iter.unwrap_or(cfg.n_iter),
                cfg.folds,
                cfg.seed,
            )?;
            for (h, s) in &res.trials {
                println!("{h}: {s:.2}%");
            }
            println!("best {} at {:.2}%", res.best, res.best_score);
            write(out, &format!("search_{mapping}.json"), &serde_json::to_string_pretty(&res)?)?;
        }
        Cmd::Evaluate { mapping, data } => {
            let ds = load_data(data, cfg.seed)?;
            let maps: Vec<Mapping> = match mapping {
                Some(m) => vec![*m],
                None => Mapping::ALL.to_vec(),
            };
            let mut reports = Vec::new();
            for m in maps {
                let (model, rep) = experiments::run_pipeline(m, &ds, &cfg)?;
                println!(
                    "{m}: default CV {:.2}%, tuned {} CV {:.2}%, validation {:.2}%",
                    rep.default_cv_accuracy, rep.search.best, rep.search.best_score, rep.validation_accuracy
                );
                print!("{}", rep.confusion.render());
                write(out, &format!("model_{m}.json"), &model.to_json()?)?;
                reports.push(rep);
            }
            experiments::write_pipeline_reports(&reports, out)?;
        }
        Cmd::Apply { scenario, model } => {
            let mut spec: ScenarioSpec = serde_json::from_str(&fs::read_to_string(scenario)?)?;
            if let Some(s) = cli.seed {
                spec.seed = s;
            }
            let model = KnnModel::from_json(&fs::read_to_string(model)?)?;
            let res = experiments::run_scenario(&model, &spec)?;
            println!("{}", serde_json::to_string_pretty(&res)?);
            let case = scenario
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            write(out, &format!("scenario_{case}.csv"), &experiments::scenario_csv(&[(case.clone(), res)]))?;
        }
        Cmd::Sweep { sizes, mapping } => {
            let rows = experiments::run_size_sweep(sizes, *mapping, cfg.seed)?;
            for r in &rows {
                println!("{:>6}  knn {:.2}%  tree {:.2}%", r.n, r.knn_cv_accuracy, r.tree_cv_accuracy);
            }
            write(out, "sweep.csv", &experiments::sweep_csv(&rows))?;
            write(out, "sweep.dat", &experiments::sweep_dat(&rows))?;
        }
        Cmd::OracleCheck { draws } => oracle_check(*draws, cfg.seed)?,
    }
    Ok(())
}

/// Cheap consistency checks between independent computation routes.
fn oracle_check(draws: usize, seed: u64) -> Result<()> {
    let ranges = ParameterRanges::default();
    let fixed = EngineParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_trace: f64 = 0.0;
    let mut worst_ss: f64 = 0.0;
    let mut worst_j1: f64 = 0.0;
    let mut worst_slope: f64 = 0.0;
    for _ in 0..draws {
        let p = ranges.draw(&fixed, &mut rng);
        let gen = build_generator(&p)?;
        worst_trace = gen.trace_residual().iter().fold(worst_trace, |m, v| m.max(v.abs()));
        worst_ss = worst_ss.max(steady_state(&gen)?.residual(&gen));
        let j = cumulants(&gen)?;
        let scale = j[0].abs().max(1e-12);
        worst_j1 = worst_j1.max((mean_current(&gen)? - j[0]).abs() / scale);
        let h = 1e-4;
        let slope = (cgf(&gen, h)? - cgf(&gen, -h)?) / (2.0 * h);
        worst_slope = worst_slope.max((slope - j[0]).abs() / scale.max(1e-6));
    }
    println!("trace residual        max {worst_trace:.3e}");
    println!("steady-state residual max {worst_ss:.3e}");
    println!("j1 closed form        max rel {worst_j1:.3e}");
    println!("j1 vs cgf slope       max rel {worst_slope:.3e}");

    let p0 = EngineParams::default().classical();
    let proc = JumpProcess::from_params(&p0)?;
    let j = cumulants(&build_generator(&p0)?)?;
    let stats = simulate(&proc, 2e4, 100, seed)?;
    let z1 = (stats.mean_rate - j[0]) / stats.mean_rate_se;
    let z2 = (stats.var_rate - j[1]) / stats.var_rate_se;
    println!("trajectory mean       z = {z1:+.2}");
    println!("trajectory variance   z = {z2:+.2}");

    let ok = worst_trace < 1e-12 && worst_ss < 1e-10 && worst_j1 < 1e-9 && worst_slope < 1e-5 && z1.abs() < 4.0 && z2.abs() < 4.0;
    if ok {
        println!("oracle check passed");
        Ok(())
    } else {
        Err(Error::OracleMismatch("see the lines above".into()))
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                ExitCode::from(3)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
