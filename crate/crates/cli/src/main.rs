//! `gmc`: featurize, split, train and study BBB permeability models.
//!
//! Exit codes: 0 success, 1 usage or config error, 2 data error,
//! 3 diverged training or failed study.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use gmc_core::config::{parse_config, search_space_violations, ConfigError, ExperimentConfig};
use gmc_core::datasplit::split_by_keys;
use gmc_core::featurize::Featurizer;
use gmc_core::harness::{
    ablation_study, candidate_pairs, format_grid, format_metric_rows, format_sweep, grid_search,
    kernel_sweep, run_experiment_on, worker_pool, write_ablation, write_table, Dataset,
    FeatureStore, HarnessError,
};
use gmc_core::metrics::{auc_roc, pearson, rmse};
use gmc_core::mpnn::{load_checkpoint, predict_batch, MpnnError};
use gmc_core::wcs::SybylPair;
use gmc_core::{AblationMask, TaskKind};

#[derive(Parser)]
#[command(
    name = "gmc",
    version,
    about = "Geometric multi-color MPNN for blood-brain barrier permeability"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config file.
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory, overriding `[study] out`.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Feature cache directory, overriding `[study] cache`.
    #[arg(long, value_name = "DIR")]
    cache: Option<PathBuf>,
}

#[derive(Args)]
struct Seeds {
    /// A single seed.
    #[arg(long, value_name = "N", conflicts_with = "seeds")]
    seed: Option<u64>,
    /// Inclusive range `A..B` or comma list.
    #[arg(long, value_name = "A..B")]
    seeds: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Compute WCS features for the dataset and write a feature cache.
    Featurize {
        #[command(flatten)]
        common: Common,
    },
    /// Write scaffold split assignments.
    Split {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        seeds: Seeds,
    },
    /// Train on one seed's split; writes a checkpoint and test metrics.
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        seeds: Seeds,
    },
    /// Predict the dataset with a trained checkpoint.
    Predict {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "PATH")]
        checkpoint: PathBuf,
    },
    /// Multi-seed run with summary statistics.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        seeds: Seeds,
    },
    /// SYBYL-pair ablation study.
    Ablate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        seeds: Seeds,
        /// Comma-separated pairs such as `N.ar-O.2,C.3-H`.
        #[arg(long, value_name = "LIST")]
        pairs: Option<String>,
    },
    /// Grid search over `[study] search.*`.
    Hpo {
        #[command(flatten)]
        common: Common,
    },
    /// Kernel-parameter sweep over `[study] sweep_*`.
    Sweep {
        #[command(flatten)]
        common: Common,
    },
}

/// Marks an error as a usage error (exit 1).
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn parse_seed_list(text: &str) -> Result<Vec<u64>> {
    let probe = format!("[study]\nseeds = {text}\n");
    parse_config(&probe)
        .map(|c| c.study.seeds)
        .map_err(|e| Usage(format!("--seeds: {e}")).into())
}

fn load_config(common: &Common, seeds: Option<&Seeds>) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(&common.config)
        .map_err(|e| Usage(format!("{}: {e}", common.config.display())))?;
    let mut config =
        parse_config(&text).with_context(|| format!("in config {}", common.config.display()))?;
    let base = common.config.parent().unwrap_or(Path::new("."));
    config.resolve_paths(base);
    if let Some(out) = &common.out {
        config.study.out = out.clone();
    }
    if let Some(cache) = &common.cache {
        config.study.cache = Some(cache.clone());
    }
    if let Some(s) = seeds {
        if let Some(seed) = s.seed {
            config.study.seeds = vec![seed];
        } else if let Some(list) = &s.seeds {
            config.study.seeds = parse_seed_list(list)?;
        }
    }
    for v in search_space_violations(&config) {
        log::warn!("outside the hyperparameter search space: {v}");
    }
    Ok(config)
}

fn print_metrics(rows: &str) {
    print!("{rows}");
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Featurize { common } => {
            let config = load_config(&common, None)?;
            let data = Dataset::load(&config)?;
            let featurizer = Featurizer::new(data.wcs_params(&config), AblationMask::empty());
            let cache_dir = config
                .study
                .cache
                .clone()
                .unwrap_or_else(|| config.study.out.clone());
            let store = FeatureStore::new(Some(cache_dir));
            let graphs = store.graphs(&data, &featurizer)?;
            let mut table = String::from("id,atoms,node_width\n");
            for g in graphs.iter() {
                let _ = writeln!(table, "{},{},{}", g.id, g.atom_count(), g.node_width());
            }
            write_table(&config, &data, "features.csv", &table)?;
            println!(
                "featurized {} molecules, sigma {:.6}, cache {}",
                graphs.len(),
                data.sigma,
                store
                    .cache_path(&featurizer.fingerprint())
                    .expect("cache dir set")
                    .display()
            );
        }
        Command::Split { common, seeds } => {
            let config = load_config(&common, Some(&seeds))?;
            let data = Dataset::load(&config)?;
            let ids = data.ids();
            for &seed in &config.study.seeds {
                let split = split_by_keys(&data.scaffold_keys, config.study.split, seed)?;
                let path = config.study.out.join(format!("split_seed_{seed}.csv"));
                fs::create_dir_all(&config.study.out)?;
                split
                    .write(&path, &ids)
                    .with_context(|| path.display().to_string())?;
                let [a, b, c] = split.sizes();
                println!("seed {seed}: train {a}, val {b}, test {c}");
            }
        }
        Command::Train { common, seeds } => {
            let mut config = load_config(&common, Some(&seeds))?;
            if seeds.seed.is_none() && seeds.seeds.is_none() {
                config.study.seeds.truncate(1);
            }
            let data = Dataset::load(&config)?;
            let report = run_experiment_on(&config, &data)?;
            print_metrics(&format_metric_rows(&report.metrics));
            info!("artifacts in {}", report.out_dir.display());
        }
        Command::Evaluate { common, seeds } => {
            let config = load_config(&common, Some(&seeds))?;
            let data = Dataset::load(&config)?;
            let report = run_experiment_on(&config, &data)?;
            for (seed, e) in &report.failures {
                eprintln!("seed {seed} failed: {e}");
            }
            print_metrics(&format_metric_rows(&report.metrics));
        }
        Command::Predict { common, checkpoint } => {
            let config = load_config(&common, None)?;
            let model = load_checkpoint(&checkpoint)?;
            let data = Dataset::load(&config)?;
            let featurizer = Featurizer::new(data.wcs_params(&config), AblationMask::empty());
            let graphs =
                FeatureStore::new(config.study.cache.clone()).graphs(&data, &featurizer)?;
            let pred = predict_batch(&model, &graphs)?;
            let truth: Vec<f64> = data.records.iter().map(|r| r.label.value()).collect();
            let mut table = String::from("id,prediction,label\n");
            for ((r, p), t) in data.records.iter().zip(&pred).zip(&truth) {
                let _ = writeln!(table, "{},{p:?},{t:?}", r.id);
            }
            write_table(&config, &data, "predictions.csv", &table)?;
            match model.config.task {
                TaskKind::Classification => {
                    let labels: Vec<bool> = truth.iter().map(|&t| t > 0.5).collect();
                    if let Ok(auc) = auc_roc(&pred, &labels) {
                        println!("auc {auc:.4}");
                    }
                }
                TaskKind::Regression => {
                    println!("rmse {:.4}", rmse(&pred, &truth)?);
                    if let Ok(r) = pearson(&pred, &truth) {
                        println!("pearson {r:.4}");
                    }
                }
            }
        }
        Command::Ablate {
            common,
            seeds,
            pairs,
        } => {
            let config = load_config(&common, Some(&seeds))?;
            let data = Dataset::load(&config)?;
            let pairs: Vec<SybylPair> = match pairs {
                Some(list) => list
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| s.parse().map_err(|e| Usage(format!("--pairs: {e}"))))
                    .collect::<std::result::Result<_, _>>()?,
                None if !config.study.pairs.is_empty() => config.study.pairs.clone(),
                None => candidate_pairs(&data, &data.wcs_params(&config), config.study.pair_floor)
                    .into_iter()
                    .map(|(p, _)| p)
                    .collect(),
            };
            let study = ablation_study(&config, &data, &pairs)?;
            write_ablation(&config, &data, &study)?;
            for r in &study.results {
                match &r.summary {
                    Some(s) => println!(
                        "{}: mean delta {} {:+.4} ± {:.4} (n = {}, frequency {})",
                        r.pair,
                        study.metric,
                        s.mean,
                        s.half_width(),
                        r.delta.len(),
                        r.frequency
                    ),
                    None => println!(
                        "{}: {} paired runs, frequency {}",
                        r.pair,
                        r.delta.len(),
                        r.frequency
                    ),
                }
            }
        }
        Command::Hpo { common } => {
            let config = load_config(&common, None)?;
            if config.study.search.is_empty() {
                bail!(Usage("no `search.*` keys in [study]".into()));
            }
            let data = Dataset::load(&config)?;
            let result = grid_search(&config, &data)?;
            write_table(&config, &data, "grid.csv", &format_grid(&result))?;
            let best_path = config.study.out.join("best.cfg");
            fs::write(&best_path, result.best.dump())?;
            let best = &result.candidates[result.best_index];
            if !best.score.is_finite() {
                bail!(HarnessError::AllSeedsFailed {
                    seed: config.study.hpo_seed,
                    message: best.error.clone().unwrap_or_default()
                });
            }
            println!(
                "best candidate {}: {:?} (score {:.4})",
                result.best_index, best.settings, best.score
            );
        }
        Command::Sweep { common } => {
            let config = load_config(&common, None)?;
            let data = Dataset::load(&config)?;
            let s = &config.study;
            let result = kernel_sweep(
                &config,
                &data,
                &s.sweep_tau,
                &s.sweep_kappa,
                &s.sweep_kernels,
            )?;
            write_table(&config, &data, "sweep.csv", &format_sweep(&result))?;
            let b = &result.best;
            if result.points.iter().all(|p| !p.score.is_finite()) {
                bail!(HarnessError::AllSeedsFailed {
                    seed: s.hpo_seed,
                    message: "every sweep point failed".into()
                });
            }
            println!(
                "best kernel {} kappa {:?} tau {:?}",
                b.kernel, b.kappa, b.tau
            );
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<Usage>().is_some() || cause.downcast_ref::<ConfigError>().is_some()
        {
            return 1;
        }
        let diverged = |e: &MpnnError| matches!(e, MpnnError::Diverged { .. });
        if let Some(e) = cause.downcast_ref::<MpnnError>() {
            if diverged(e) {
                return 3;
            }
        }
        if let Some(e) = cause.downcast_ref::<HarnessError>() {
            match e {
                HarnessError::AllSeedsFailed { .. } => return 3,
                HarnessError::Mpnn(m) if diverged(m) => return 3,
                _ => {}
            }
        }
    }
    2
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    ExitCode::SUCCESS
                }
                _ => ExitCode::from(1),
            };
        }
    };
    match worker_pool().install(|| run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
