//! Multi-seed experiments, grid search, kernel sweeps and pair ablation.
//!
//! Every job (seed, grid point, ablation arm) is independent and runs on a
//! bounded rayon pool sized by `GMC_THREADS`. Results are merged in job
//! order, so reports do not depend on the thread count.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use log::{info, warn};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::chem_io::{load_dataset, ChemIoError, DatasetRecord, TaskKind};
pub use crate::config::ExperimentConfig;
use crate::datasplit::{scaffold_keys, split_by_keys, Partition, SplitAssignment, SplitError};
use crate::featurize::{FeaturizeError, Featurizer, MolGraph};
use crate::metrics::{auc_roc, pearson, rmse, summarize, MetricSummary, MetricsError};
use crate::mpnn::{
    predict_batch, save_checkpoint, train, CheckpointError, History, ModelParams, MpnnError,
    TrainConfig,
};
use crate::wcs::{
    dataset_sigma, pair_frequencies, read_cache, write_cache, AblationMask, CacheError, KernelKind,
    SybylPair, WcsError, WcsParams,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{what} `{}` does not exist", .path.display())]
    MissingPath { what: &'static str, path: PathBuf },
    #[error("config has no {0}")]
    MissingSetting(&'static str),
    #[error(transparent)]
    Load(#[from] ChemIoError),
    #[error("no molecule could be loaded")]
    EmptyDataset,
    #[error(transparent)]
    Split(#[from] SplitError),
    #[error(transparent)]
    Wcs(#[from] WcsError),
    #[error(transparent)]
    Cache(#[from] CacheError),
    #[error(transparent)]
    Featurize(#[from] FeaturizeError),
    #[error(transparent)]
    Mpnn(#[from] MpnnError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("every seed failed; first: seed {seed}: {message}")]
    AllSeedsFailed { seed: u64, message: String },
    #[error("search space is empty")]
    EmptySpace,
    #[error("SYBYL type `{0}` does not occur in the dataset")]
    UnknownSybylType(String),
}

type Result<T> = std::result::Result<T, HarnessError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    fs::write(path, contents).map_err(io_err(path))
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Worker pool bounded by `GMC_THREADS` (all cores when unset or invalid).
pub fn worker_pool() -> rayon::ThreadPool {
    let threads = std::env::var("GMC_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .unwrap_or(0);
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool")
}

/// Loaded molecules plus everything derived from them once.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub records: Vec<DatasetRecord>,
    pub scaffold_keys: Vec<String>,
    /// σ over the element classes present, under the configured radii.
    pub sigma: f64,
    /// sha256 of the manifest and of the concatenated structure files.
    pub input_hashes: Vec<(String, String)>,
}

impl Dataset {
    pub fn from_records(records: Vec<DatasetRecord>, config: &ExperimentConfig) -> Result<Self> {
        if records.is_empty() {
            return Err(HarnessError::EmptyDataset);
        }
        let sigma = dataset_sigma(records.iter().map(|r| &r.molecule), &config.wcs.radii)?;
        let scaffold_keys = scaffold_keys(&records);
        Ok(Dataset {
            records,
            scaffold_keys,
            sigma,
            input_hashes: Vec::new(),
        })
    }

    /// Loads the configured manifest; paths are checked before any parsing.
    pub fn load(config: &ExperimentConfig) -> Result<Self> {
        let manifest = config
            .manifest
            .as_ref()
            .ok_or(HarnessError::MissingSetting("dataset manifest"))?;
        let mol2_dir = config
            .mol2_dir
            .as_ref()
            .ok_or(HarnessError::MissingSetting("dataset mol2_dir"))?;
        check_paths(config)?;
        let report = load_dataset(manifest, mol2_dir, config.task())?;
        for s in &report.skipped {
            warn!("skipped {}: {}", s.id, s.reason);
        }
        let manifest_bytes = fs::read(manifest).map_err(io_err(manifest))?;
        let mut structures = Sha256::new();
        for r in &report.records {
            structures.update(crate::chem_io::write_mol2(&r.molecule).as_bytes());
        }
        let mut data = Dataset::from_records(report.records, config)?;
        data.input_hashes = vec![
            (manifest.display().to_string(), sha256_hex(&manifest_bytes)),
            (
                format!("{} ({} structures)", mol2_dir.display(), data.records.len()),
                hex::encode(structures.finalize()),
            ),
        ];
        Ok(data)
    }

    pub fn ids(&self) -> Vec<String> {
        self.records.iter().map(|r| r.id.clone()).collect()
    }

    pub fn wcs_params(&self, config: &ExperimentConfig) -> WcsParams {
        config.wcs.params(self.sigma)
    }

    /// SYBYL types present anywhere in the dataset.
    pub fn sybyl_inventory(&self) -> BTreeSet<String> {
        self.records
            .iter()
            .flat_map(|r| r.molecule.atoms.iter().map(|a| a.sybyl_type.clone()))
            .collect()
    }

    /// Surviving atom-pair counts per SYBYL pair over the whole dataset.
    pub fn pair_frequencies(&self, params: &WcsParams) -> BTreeMap<SybylPair, usize> {
        let per_mol: Vec<BTreeMap<SybylPair, usize>> = self
            .records
            .par_iter()
            .map(|r| pair_frequencies(&r.molecule, params))
            .collect();
        let mut total = BTreeMap::new();
        for m in per_mol {
            for (k, v) in m {
                *total.entry(k).or_insert(0) += v;
            }
        }
        total
    }
}

/// Fails if a configured input path is missing.
pub fn check_paths(config: &ExperimentConfig) -> Result<()> {
    for (what, path) in [
        ("manifest", &config.manifest),
        ("mol2 directory", &config.mol2_dir),
    ] {
        if let Some(p) = path {
            if !p.exists() {
                return Err(HarnessError::MissingPath {
                    what,
                    path: p.clone(),
                });
            }
        }
    }
    Ok(())
}

/// Featurized graphs for the whole dataset, memoized by fingerprint in
/// memory and, when a directory is set, on disk.
#[derive(Debug, Default)]
pub struct FeatureStore {
    dir: Option<PathBuf>,
    graphs: Mutex<HashMap<String, Arc<Vec<MolGraph>>>>,
}

impl FeatureStore {
    pub fn new(dir: Option<PathBuf>) -> Self {
        FeatureStore {
            dir,
            graphs: Mutex::new(HashMap::new()),
        }
    }

    pub fn cache_path(&self, fingerprint: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| {
            d.join(format!(
                "wcs-{}.gmcw",
                &sha256_hex(fingerprint.as_bytes())[..16]
            ))
        })
    }

    pub fn graphs(&self, data: &Dataset, featurizer: &Featurizer) -> Result<Arc<Vec<MolGraph>>> {
        let fp = featurizer.fingerprint();
        if let Some(g) = self.graphs.lock().expect("store lock").get(&fp) {
            return Ok(Arc::clone(g));
        }
        let graphs = match self.cache_path(&fp) {
            Some(path) if path.exists() => {
                let cache = read_cache(&path, Some(&fp))?;
                featurizer.featurize_from_cache(&data.records, &cache)?
            }
            Some(path) => {
                let cache = featurizer.build_cache(&data.records);
                if let Some(parent) = path.parent() {
                    fs::create_dir_all(parent).map_err(io_err(parent))?;
                }
                write_cache(&path, &cache)?;
                featurizer.featurize_from_cache(&data.records, &cache)?
            }
            None => featurizer.featurize_all(&data.records),
        };
        let graphs = Arc::new(graphs);
        self.graphs
            .lock()
            .expect("store lock")
            .insert(fp, Arc::clone(&graphs));
        Ok(graphs)
    }
}

/// Headline metric per task: AUC, or RMSE then Pearson r.
pub fn metric_names(task: TaskKind) -> &'static [&'static str] {
    match task {
        TaskKind::Classification => &["auc"],
        TaskKind::Regression => &["rmse", "pearson"],
    }
}

fn test_metrics(task: TaskKind, pred: &[f64], truth: &[f64]) -> Result<Vec<f64>> {
    Ok(match task {
        TaskKind::Classification => {
            let labels: Vec<bool> = truth.iter().map(|&t| t > 0.5).collect();
            vec![auc_roc(pred, &labels)?]
        }
        TaskKind::Regression => vec![rmse(pred, truth)?, pearson(pred, truth)?],
    })
}

/// One split-train-evaluate cycle.
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub split: SplitAssignment,
    pub model: ModelParams,
    pub history: History,
    pub test_ids: Vec<String>,
    pub test_pred: Vec<f64>,
    pub test_truth: Vec<f64>,
    /// Values for [`metric_names`], in order.
    pub metrics: Vec<f64>,
}

impl SeedRun {
    /// Best validation score: AUC, or −RMSE for regression.
    pub fn val_score(&self) -> f64 {
        self.history.best().score
    }
}

fn pick(graphs: &[MolGraph], idx: &[usize]) -> Vec<MolGraph> {
    idx.iter().map(|&i| graphs[i].clone()).collect()
}

/// Splits by scaffold with `seed`, trains with init seed `seed` and
/// evaluates on the test partition.
pub fn run_seed(
    graphs: &[MolGraph],
    keys: &[String],
    ratios: [f64; 3],
    train_config: &TrainConfig,
    seed: u64,
) -> Result<SeedRun> {
    let split = split_by_keys(keys, ratios, seed)?;
    let (tr, va, te) = (
        pick(graphs, &split.indices(Partition::Train)),
        pick(graphs, &split.indices(Partition::Val)),
        pick(graphs, &split.indices(Partition::Test)),
    );
    if te.is_empty() {
        return Err(MpnnError::EmptyPartition("test").into());
    }
    let mut config = train_config.clone();
    config.seed = seed;
    let (model, history) = train(&tr, &va, &config)?;
    let test_pred = predict_batch(&model, &te)?;
    let test_truth: Vec<f64> = te
        .iter()
        .map(|g| {
            g.label
                .map(|l| l.value())
                .ok_or_else(|| MpnnError::MissingLabel(g.id.clone()))
        })
        .collect::<std::result::Result<_, _>>()?;
    let metrics = test_metrics(config.task, &test_pred, &test_truth)?;
    Ok(SeedRun {
        seed,
        split,
        model,
        history,
        test_ids: te.iter().map(|g| g.id.clone()).collect(),
        test_pred,
        test_truth,
        metrics,
    })
}

/// Per-metric values over the seeds that succeeded.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricResult {
    pub name: String,
    pub seeds: Vec<u64>,
    pub values: Vec<f64>,
    /// Absent when fewer than two seeds succeeded.
    pub summary: Option<MetricSummary>,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub metrics: Vec<MetricResult>,
    pub failures: Vec<(u64, String)>,
    pub out_dir: PathBuf,
}

impl ExperimentReport {
    pub fn metric(&self, name: &str) -> Option<&MetricResult> {
        self.metrics.iter().find(|m| m.name == name)
    }
}

/// `metric,seed,value` rows, plus summary rows where a summary exists.
pub fn format_metric_rows(results: &[MetricResult]) -> String {
    let mut out = String::from("metric,seed,value\n");
    for m in results {
        for (s, v) in m.seeds.iter().zip(&m.values) {
            let _ = writeln!(out, "{},{s},{v:?}", m.name);
        }
        if let Some(sum) = &m.summary {
            for (tag, v) in [
                ("mean", sum.mean),
                ("std", sum.std),
                ("ci_lo", sum.ci_lo),
                ("ci_hi", sum.ci_hi),
                ("ci_half", sum.half_width()),
            ] {
                let _ = writeln!(out, "{},{tag},{v:?}", m.name);
            }
        }
    }
    out
}

fn summarize_runs(task: TaskKind, runs: &[(u64, &[f64])]) -> Result<Vec<MetricResult>> {
    metric_names(task)
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let seeds: Vec<u64> = runs.iter().map(|(s, _)| *s).collect();
            let values: Vec<f64> = runs.iter().map(|(_, m)| m[k]).collect();
            let summary = match summarize(&values, 0.95) {
                Ok(s) => Some(s),
                Err(MetricsError::TooFewSamples(_)) => None,
                Err(e) => return Err(e.into()),
            };
            Ok(MetricResult {
                name: name.to_string(),
                seeds,
                values,
                summary,
            })
        })
        .collect()
}

fn history_csv(h: &History) -> String {
    let mut out = String::from("epoch,train_loss,val_loss,val_metric,score,lr\n");
    for e in &h.epochs {
        let _ = writeln!(
            out,
            "{},{:?},{:?},{:?},{:?},{:?}",
            e.epoch, e.train_loss, e.val_loss, e.val_metric, e.score, e.lr
        );
    }
    out
}

fn predictions_csv(ids: &[String], pred: &[f64], truth: &[f64]) -> String {
    let mut out = String::from("id,prediction,label\n");
    for ((id, p), t) in ids.iter().zip(pred).zip(truth) {
        let _ = writeln!(out, "{id},{p:?},{t:?}");
    }
    out
}

/// Records written files and hashes them into `manifest.txt`.
struct Artifacts {
    root: PathBuf,
    files: Vec<PathBuf>,
}

impl Artifacts {
    fn new(root: &Path) -> Self {
        Artifacts {
            root: root.to_path_buf(),
            files: Vec::new(),
        }
    }

    fn write(&mut self, rel: impl AsRef<Path>, contents: impl AsRef<[u8]>) -> Result<()> {
        write_file(&self.root.join(rel.as_ref()), contents)?;
        self.files.push(rel.as_ref().to_path_buf());
        Ok(())
    }

    fn record(&mut self, rel: impl AsRef<Path>) {
        self.files.push(rel.as_ref().to_path_buf());
    }

    fn finish(self, config: &ExperimentConfig, data: &Dataset) -> Result<()> {
        let dump = config.dump();
        let mut m = String::new();
        let _ = writeln!(m, "config {}", sha256_hex(dump.as_bytes()));
        for (what, hash) in &data.input_hashes {
            let _ = writeln!(m, "input {hash} {what}");
        }
        for rel in &self.files {
            let path = self.root.join(rel);
            let bytes = fs::read(&path).map_err(io_err(&path))?;
            let _ = writeln!(m, "artifact {} {}", sha256_hex(&bytes), rel.display());
        }
        write_file(&self.root.join("manifest.txt"), m)
    }
}

/// Runs every configured seed and writes, under the output directory,
/// the normalized config, per-seed splits, checkpoints, histories and test
/// predictions, `report.csv`, `seeds.csv` and `manifest.txt`. Seeds that
/// fail are logged and skipped; the run fails only if all of them fail.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let data = Dataset::load(config)?;
    run_experiment_on(config, &data)
}

pub fn run_experiment_on(config: &ExperimentConfig, data: &Dataset) -> Result<ExperimentReport> {
    let out = &config.study.out;
    let store = FeatureStore::new(config.study.cache.clone());
    let featurizer = Featurizer::new(data.wcs_params(config), AblationMask::empty());
    let graphs = store.graphs(data, &featurizer)?;
    let ids = data.ids();
    let pool = worker_pool();
    let results: Vec<Result<SeedRun>> = pool.install(|| {
        config
            .study
            .seeds
            .par_iter()
            .map(|&seed| {
                run_seed(
                    &graphs,
                    &data.scaffold_keys,
                    config.study.split,
                    &config.train,
                    seed,
                )
            })
            .collect()
    });

    let mut artifacts = Artifacts::new(out);
    artifacts.write("config.cfg", config.dump())?;
    let mut ok: Vec<SeedRun> = Vec::new();
    let mut failures = Vec::new();
    let mut seeds_csv = String::from("seed,status,n_train,n_val,n_test,best_epoch,detail\n");
    for (&seed, r) in config.study.seeds.iter().zip(results) {
        match r {
            Ok(run) => {
                let dir = PathBuf::from(format!("seed_{seed}"));
                artifacts.write(dir.join("split.csv"), run.split.to_csv(&ids))?;
                artifacts.write(dir.join("history.csv"), history_csv(&run.history))?;
                artifacts.write(
                    dir.join("test_predictions.csv"),
                    predictions_csv(&run.test_ids, &run.test_pred, &run.test_truth),
                )?;
                let ckpt = dir.join("model.gmcm");
                save_checkpoint(&run.model, &out.join(&ckpt))?;
                artifacts.record(ckpt);
                let [a, b, c] = run.split.sizes();
                let _ = writeln!(
                    seeds_csv,
                    "{seed},ok,{a},{b},{c},{},",
                    run.history.best_epoch
                );
                info!("seed {seed}: {:?}", run.metrics);
                ok.push(run);
            }
            Err(e) => {
                warn!("seed {seed} failed: {e}");
                let _ = writeln!(
                    seeds_csv,
                    "{seed},failed,,,,,{}",
                    e.to_string().replace(',', ";")
                );
                failures.push((seed, e.to_string()));
            }
        }
    }
    if ok.is_empty() {
        let (seed, message) = failures.first().cloned().unwrap_or((0, "no seeds".into()));
        return Err(HarnessError::AllSeedsFailed { seed, message });
    }
    let runs: Vec<(u64, &[f64])> = ok.iter().map(|r| (r.seed, r.metrics.as_slice())).collect();
    let metrics = summarize_runs(config.task(), &runs)?;
    artifacts.write("seeds.csv", seeds_csv)?;
    artifacts.write("report.csv", format_metric_rows(&metrics))?;
    artifacts.finish(config, data)?;
    Ok(ExperimentReport {
        metrics,
        failures,
        out_dir: out.clone(),
    })
}

/// A scored grid candidate; diverged or failed runs score −∞.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub settings: BTreeMap<String, String>,
    pub score: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct GridResult {
    pub candidates: Vec<Candidate>,
    pub best_index: usize,
    pub best: ExperimentConfig,
}

/// Cross-product size of a search space.
pub fn space_size(space: &BTreeMap<String, Vec<String>>) -> usize {
    space.values().map(Vec::len).product()
}

/// The `budget` candidates to evaluate: the full cross-product if it fits,
/// else a uniform sample without replacement drawn with `seed`, kept in
/// cross-product order.
pub fn grid_candidates(
    space: &BTreeMap<String, Vec<String>>,
    budget: usize,
    seed: u64,
) -> Result<Vec<BTreeMap<String, String>>> {
    if space.is_empty() || space.values().any(Vec::is_empty) || budget == 0 {
        return Err(HarnessError::EmptySpace);
    }
    let total = space_size(space);
    let chosen: Vec<usize> = if total <= budget {
        (0..total).collect()
    } else {
        let mut v = index::sample(&mut ChaCha8Rng::seed_from_u64(seed), total, budget).into_vec();
        v.sort_unstable();
        v
    };
    let axes: Vec<(&String, &Vec<String>)> = space.iter().collect();
    Ok(chosen
        .into_iter()
        .map(|mut flat| {
            let mut c = BTreeMap::new();
            for (key, values) in axes.iter().rev() {
                c.insert((*key).clone(), values[flat % values.len()].clone());
                flat /= values.len();
            }
            c
        })
        .collect())
}

/// Validation score of `train_config` on the scaffold split for `seed`.
fn validation_score(
    graphs: &[MolGraph],
    data: &Dataset,
    ratios: [f64; 3],
    train_config: &TrainConfig,
    seed: u64,
) -> (f64, Option<String>) {
    let split = match split_by_keys(&data.scaffold_keys, ratios, seed) {
        Ok(s) => s,
        Err(e) => return (f64::NEG_INFINITY, Some(e.to_string())),
    };
    let tr = pick(graphs, &split.indices(Partition::Train));
    let va = pick(graphs, &split.indices(Partition::Val));
    let mut config = train_config.clone();
    config.seed = seed;
    match train(&tr, &va, &config) {
        Ok((_, h)) => (h.best().score, None),
        Err(e) => (f64::NEG_INFINITY, Some(e.to_string())),
    }
}

/// Trains each candidate from `config.study.search` on the `hpo_seed`
/// split and keeps the best validation score (AUC, or −RMSE); ties go to
/// the earlier candidate.
pub fn grid_search(config: &ExperimentConfig, data: &Dataset) -> Result<GridResult> {
    let candidates = grid_candidates(
        &config.study.search,
        config.study.hpo_budget,
        config.study.hpo_seed,
    )?;
    let store = FeatureStore::new(config.study.cache.clone());
    let graphs = store.graphs(
        data,
        &Featurizer::new(data.wcs_params(config), AblationMask::empty()),
    )?;
    let configs: Vec<TrainConfig> = candidates
        .iter()
        .map(|c| {
            let mut t = config.train.clone();
            for (k, v) in c {
                t.set(k, v)
                    .expect("candidate values were checked at parse time");
            }
            t
        })
        .collect();
    let scored: Vec<(f64, Option<String>)> = worker_pool().install(|| {
        configs
            .par_iter()
            .map(|t| validation_score(&graphs, data, config.study.split, t, config.study.hpo_seed))
            .collect()
    });
    let mut best_index = 0;
    for (i, (s, _)) in scored.iter().enumerate() {
        if *s > scored[best_index].0 {
            best_index = i;
        }
    }
    let mut best = config.clone();
    best.train = configs[best_index].clone();
    Ok(GridResult {
        candidates: candidates
            .into_iter()
            .zip(scored)
            .map(|(settings, (score, error))| Candidate {
                settings,
                score,
                error,
            })
            .collect(),
        best_index,
        best,
    })
}

pub fn format_grid(result: &GridResult) -> String {
    let keys: Vec<&String> = result
        .candidates
        .first()
        .map(|c| c.settings.keys().collect())
        .unwrap_or_default();
    let mut out = String::from("candidate");
    for k in &keys {
        let _ = write!(out, ",{k}");
    }
    out.push_str(",score,best,error\n");
    for (i, c) in result.candidates.iter().enumerate() {
        let _ = write!(out, "{i}");
        for k in &keys {
            let _ = write!(out, ",{}", c.settings[*k]);
        }
        let _ = writeln!(
            out,
            ",{:?},{},{}",
            c.score,
            i == result.best_index,
            c.error.as_deref().unwrap_or("").replace(',', ";")
        );
    }
    out
}

/// One kernel-sweep grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub kernel: KernelKind,
    pub kappa: f64,
    pub tau: f64,
    pub score: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    pub best: WcsParams,
}

/// Every (kernel, κ, τ) combination, kernels outermost.
pub fn sweep_grid(
    taus: &[f64],
    kappas: &[f64],
    kinds: &[KernelKind],
) -> Vec<(KernelKind, f64, f64)> {
    let mut v = Vec::with_capacity(taus.len() * kappas.len() * kinds.len());
    for &k in kinds {
        for &kappa in kappas {
            for &tau in taus {
                v.push((k, kappa, tau));
            }
        }
    }
    v
}

/// Index of the winner: highest score, ties to the smallest
/// `(kernel, κ, τ)`. Independent of the order of `points`.
pub fn sweep_winner(points: &[SweepPoint]) -> Option<usize> {
    let key = |p: &SweepPoint| (p.kernel, p.kappa, p.tau);
    let mut best: Option<usize> = None;
    for (i, p) in points.iter().enumerate() {
        best = match best {
            None => Some(i),
            Some(b) => {
                let q = &points[b];
                let better = p.score > q.score
                    || (p.score == q.score
                        && key(p).partial_cmp(&key(q)) == Some(std::cmp::Ordering::Less));
                Some(if better { i } else { b })
            }
        };
    }
    best
}

/// Trains one model per grid point on the `hpo_seed` split and returns the
/// validation-best WCS parameters.
pub fn kernel_sweep(
    config: &ExperimentConfig,
    data: &Dataset,
    taus: &[f64],
    kappas: &[f64],
    kinds: &[KernelKind],
) -> Result<SweepResult> {
    let grid = sweep_grid(taus, kappas, kinds);
    if grid.is_empty() {
        return Err(HarnessError::EmptySpace);
    }
    let store = FeatureStore::new(config.study.cache.clone());
    let base = data.wcs_params(config);
    let points: Vec<SweepPoint> = worker_pool().install(|| {
        grid.par_iter()
            .map(|&(kernel, kappa, tau)| {
                let params = WcsParams {
                    kernel,
                    kappa,
                    tau,
                    ..base.clone()
                };
                let scored = params
                    .validate()
                    .map_err(HarnessError::from)
                    .and_then(|_| {
                        store.graphs(data, &Featurizer::new(params, AblationMask::empty()))
                    })
                    .map(|g| {
                        validation_score(
                            &g,
                            data,
                            config.study.split,
                            &config.train,
                            config.study.hpo_seed,
                        )
                    });
                let (score, error) = match scored {
                    Ok(s) => s,
                    Err(e) => (f64::NEG_INFINITY, Some(e.to_string())),
                };
                SweepPoint {
                    kernel,
                    kappa,
                    tau,
                    score,
                    error,
                }
            })
            .collect()
    });
    let w = &points[sweep_winner(&points).expect("non-empty grid")];
    let best = WcsParams {
        kernel: w.kernel,
        kappa: w.kappa,
        tau: w.tau,
        ..base
    };
    Ok(SweepResult { points, best })
}

pub fn format_sweep(result: &SweepResult) -> String {
    let mut out = String::from("kernel,kappa,tau,score,error\n");
    for p in &result.points {
        let _ = writeln!(
            out,
            "{},{:?},{:?},{:?},{}",
            p.kernel,
            p.kappa,
            p.tau,
            p.score,
            p.error.as_deref().unwrap_or("").replace(',', ";")
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationResult {
    pub pair: SybylPair,
    /// Surviving atom pairs of this type across the dataset.
    pub frequency: usize,
    /// Seeds where both arms succeeded.
    pub seeds: Vec<u64>,
    pub baseline: Vec<f64>,
    pub ablated: Vec<f64>,
    /// Ablated − baseline, per seed.
    pub delta: Vec<f64>,
    pub summary: Option<MetricSummary>,
}

#[derive(Debug, Clone)]
pub struct AblationStudy {
    /// Name of the compared metric.
    pub metric: &'static str,
    pub baseline: Vec<(u64, std::result::Result<f64, String>)>,
    pub results: Vec<AblationResult>,
}

/// Pairs whose dataset frequency reaches `floor`, most frequent first.
pub fn candidate_pairs(
    data: &Dataset,
    params: &WcsParams,
    floor: usize,
) -> Vec<(SybylPair, usize)> {
    let mut v: Vec<(SybylPair, usize)> = data
        .pair_frequencies(params)
        .into_iter()
        .filter(|&(_, n)| n >= floor)
        .collect();
    v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    v
}

/// Retrains per seed with each pair masked and compares against an
/// unmasked baseline trained with the same split and init seed. Compares
/// the first metric of [`metric_names`] (AUC for classification).
pub fn ablation_study(
    config: &ExperimentConfig,
    data: &Dataset,
    pairs: &[SybylPair],
) -> Result<AblationStudy> {
    let inventory = data.sybyl_inventory();
    for p in pairs {
        let (a, b) = p.types();
        for t in [a, b] {
            if !inventory.contains(t) {
                return Err(HarnessError::UnknownSybylType(t.to_string()));
            }
        }
    }
    let params = data.wcs_params(config);
    let store = FeatureStore::new(config.study.cache.clone());
    let seeds = &config.study.seeds;
    let masks: Vec<AblationMask> = std::iter::once(AblationMask::empty())
        .chain(pairs.iter().map(|p| AblationMask::single(p.clone())))
        .collect();
    let graph_sets: Vec<Arc<Vec<MolGraph>>> = masks
        .iter()
        .map(|m| store.graphs(data, &Featurizer::new(params.clone(), m.clone())))
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, u64)> = (0..masks.len())
        .flat_map(|a| seeds.iter().map(move |&s| (a, s)))
        .collect();
    let outcomes: Vec<std::result::Result<f64, String>> = worker_pool().install(|| {
        jobs.par_iter()
            .map(|&(arm, seed)| {
                run_seed(
                    &graph_sets[arm],
                    &data.scaffold_keys,
                    config.study.split,
                    &config.train,
                    seed,
                )
                .map(|r| r.metrics[0])
                .map_err(|e| e.to_string())
            })
            .collect()
    });
    let arm = |a: usize| &outcomes[a * seeds.len()..(a + 1) * seeds.len()];
    let baseline: Vec<(u64, std::result::Result<f64, String>)> =
        seeds.iter().copied().zip(arm(0).iter().cloned()).collect();
    let freq = data.pair_frequencies(&params);
    let mut results = Vec::with_capacity(pairs.len());
    for (k, pair) in pairs.iter().enumerate() {
        let mut r = AblationResult {
            pair: pair.clone(),
            frequency: freq.get(pair).copied().unwrap_or(0),
            seeds: Vec::new(),
            baseline: Vec::new(),
            ablated: Vec::new(),
            delta: Vec::new(),
            summary: None,
        };
        for ((&seed, b), a) in seeds.iter().zip(arm(0)).zip(arm(k + 1)) {
            if let (Ok(b), Ok(a)) = (b, a) {
                r.seeds.push(seed);
                r.baseline.push(*b);
                r.ablated.push(*a);
                r.delta.push(a - b);
            }
        }
        r.summary = summarize(&r.delta, 0.95).ok();
        results.push(r);
    }
    Ok(AblationStudy {
        metric: metric_names(config.task())[0],
        baseline,
        results,
    })
}

/// Per-seed rows `pair,frequency,seed,baseline,ablated,delta`.
pub fn format_ablation_runs(study: &AblationStudy) -> String {
    let mut out = String::from("pair,frequency,seed,baseline,ablated,delta\n");
    for r in &study.results {
        for i in 0..r.seeds.len() {
            let _ = writeln!(
                out,
                "{},{},{},{:?},{:?},{:?}",
                r.pair, r.frequency, r.seeds[i], r.baseline[i], r.ablated[i], r.delta[i]
            );
        }
    }
    out
}

/// One row per pair: `pair,frequency,n,mean,std,ci_lo,ci_hi,ci_half`.
pub fn format_ablation_summary(study: &AblationStudy) -> String {
    let mut out = String::from("pair,frequency,n,mean,std,ci_lo,ci_hi,ci_half\n");
    for r in &study.results {
        let _ = write!(out, "{},{},{}", r.pair, r.frequency, r.delta.len());
        match &r.summary {
            Some(s) => {
                let _ = writeln!(
                    out,
                    ",{:?},{:?},{:?},{:?},{:?}",
                    s.mean,
                    s.std,
                    s.ci_lo,
                    s.ci_hi,
                    s.half_width()
                );
            }
            None => out.push_str(",,,,,\n"),
        }
    }
    out
}

/// Writes the ablation reports and a manifest under the output directory.
pub fn write_ablation(
    config: &ExperimentConfig,
    data: &Dataset,
    study: &AblationStudy,
) -> Result<()> {
    let mut a = Artifacts::new(&config.study.out);
    a.write("config.cfg", config.dump())?;
    let mut base = format!("seed,{}\n", study.metric);
    for (s, r) in &study.baseline {
        match r {
            Ok(v) => {
                let _ = writeln!(base, "{s},{v:?}");
            }
            Err(_) => {
                let _ = writeln!(base, "{s},");
            }
        }
    }
    a.write("ablation_baseline.csv", base)?;
    a.write("ablation_runs.csv", format_ablation_runs(study))?;
    a.write("ablation_summary.csv", format_ablation_summary(study))?;
    a.finish(config, data)
}

/// Writes a grid or sweep table plus manifest under the output directory.
pub fn write_table(
    config: &ExperimentConfig,
    data: &Dataset,
    name: &str,
    table: &str,
) -> Result<()> {
    let mut a = Artifacts::new(&config.study.out);
    a.write("config.cfg", config.dump())?;
    a.write(name, table)?;
    a.finish(config, data)
}
