//! Experiment configuration files.
//!
//! ```text
//! # comment
//! [dataset]   manifest, mol2_dir, task
//! [wcs]       kernel, kappa, tau, sigma (number or `auto`), with_median,
//!             radius.<class>
//! [model]     depth, message_hidden, ffn_hidden, ffn_layers, activation,
//!             aggregation, aggregation_norm, dropout
//! [train]     batch_size, epochs, max_lr, init_lr_ratio, final_lr_ratio,
//!             warmup_epochs
//! [study]     seeds, split, pairs, pair_floor, out, cache, hpo_budget,
//!             hpo_seed, sweep_tau, sweep_kappa, sweep_kernels,
//!             search.<model or train key>
//! ```
//!
//! Lists are comma-separated. `seeds` also accepts an inclusive range
//! `A..B`. Unknown sections and keys are errors.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::chem_io::TaskKind;
use crate::datasplit::DEFAULT_RATIOS;
use crate::mpnn::TrainConfig;
use crate::wcs::{ElementClass, KernelKind, RadiiTable, SybylPair, WcsParams};

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: unknown section [{name}]{}", hint(.suggestion))]
    UnknownSection {
        line: usize,
        name: String,
        suggestion: Option<String>,
    },
    #[error("line {line}: unknown key `{key}` in [{section}]{}", hint(.suggestion))]
    UnknownKey {
        line: usize,
        section: String,
        key: String,
        suggestion: Option<String>,
    },
    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { line: usize, key: String },
    #[error("line {line}: `{key}`: {msg}")]
    TypeError {
        line: usize,
        key: String,
        msg: String,
    },
    #[error("{0}")]
    RangeError(String),
}

fn hint(suggestion: &Option<String>) -> String {
    suggestion
        .as_ref()
        .map(|s| format!(" (did you mean `{s}`?)"))
        .unwrap_or_default()
}

fn suggest<'a>(word: &str, candidates: impl IntoIterator<Item = &'a str>) -> Option<String> {
    candidates
        .into_iter()
        .map(|c| (strsim::damerau_levenshtein(word, c), c))
        .filter(|&(d, c)| d <= 2.max(c.len() / 3))
        .min()
        .map(|(_, c)| c.to_string())
}

const SECTIONS: [&str; 5] = ["dataset", "wcs", "model", "train", "study"];
const DATASET_KEYS: [&str; 3] = ["manifest", "mol2_dir", "task"];
const WCS_KEYS: [&str; 5] = ["kernel", "kappa", "tau", "sigma", "with_median"];
const MODEL_KEYS: [&str; 8] = [
    "depth",
    "message_hidden",
    "ffn_hidden",
    "ffn_layers",
    "activation",
    "aggregation",
    "aggregation_norm",
    "dropout",
];
const TRAIN_KEYS: [&str; 6] = [
    "batch_size",
    "epochs",
    "max_lr",
    "init_lr_ratio",
    "final_lr_ratio",
    "warmup_epochs",
];
const STUDY_KEYS: [&str; 11] = [
    "seeds",
    "split",
    "pairs",
    "pair_floor",
    "out",
    "cache",
    "hpo_budget",
    "hpo_seed",
    "sweep_tau",
    "sweep_kappa",
    "sweep_kernels",
];

#[derive(Debug, Clone, PartialEq)]
pub enum Sigma {
    /// Population std of the radii of the element classes in the dataset.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct WcsSettings {
    pub kernel: KernelKind,
    pub kappa: f64,
    pub tau: f64,
    pub sigma: Sigma,
    pub with_median: bool,
    pub radii: RadiiTable,
}

impl Default for WcsSettings {
    fn default() -> Self {
        WcsSettings {
            kernel: KernelKind::Exponential,
            kappa: 2.0,
            tau: 1.0,
            sigma: Sigma::Auto,
            with_median: false,
            radii: RadiiTable::bondi(),
        }
    }
}

impl WcsSettings {
    /// Concrete parameters once σ is known.
    pub fn params(&self, dataset_sigma: f64) -> WcsParams {
        WcsParams {
            kernel: self.kernel,
            kappa: self.kappa,
            tau: self.tau,
            sigma: match self.sigma {
                Sigma::Auto => dataset_sigma,
                Sigma::Fixed(s) => s,
            },
            radii: self.radii.clone(),
            with_median: self.with_median,
        }
    }
}

/// The kernel grid: τ 0.5..=10 and κ 0.5..=20 in steps of 0.5, both kernels.
pub fn default_tau_grid() -> Vec<f64> {
    (1..=20).map(|k| k as f64 * 0.5).collect()
}

pub fn default_kappa_grid() -> Vec<f64> {
    (1..=40).map(|k| k as f64 * 0.5).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudySettings {
    pub seeds: Vec<u64>,
    pub split: [f64; 3],
    pub pairs: Vec<SybylPair>,
    /// Minimum surviving-pair count for automatic ablation candidates.
    pub pair_floor: usize,
    pub out: PathBuf,
    pub cache: Option<PathBuf>,
    pub hpo_budget: usize,
    pub hpo_seed: u64,
    pub sweep_tau: Vec<f64>,
    pub sweep_kappa: Vec<f64>,
    pub sweep_kernels: Vec<KernelKind>,
    /// Candidate values per training key, in file order of the keys.
    pub search: BTreeMap<String, Vec<String>>,
}

impl Default for StudySettings {
    fn default() -> Self {
        StudySettings {
            seeds: (0..=20).collect(),
            split: DEFAULT_RATIOS,
            pairs: Vec::new(),
            pair_floor: 100,
            out: PathBuf::from("gmc-out"),
            cache: None,
            hpo_budget: 10,
            hpo_seed: 0,
            sweep_tau: default_tau_grid(),
            sweep_kappa: default_kappa_grid(),
            sweep_kernels: vec![KernelKind::Exponential, KernelKind::Lorentz],
            search: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentConfig {
    pub manifest: Option<PathBuf>,
    pub mol2_dir: Option<PathBuf>,
    pub train: TrainConfig,
    pub wcs: WcsSettings,
    pub study: StudySettings,
}

impl ExperimentConfig {
    pub fn task(&self) -> TaskKind {
        self.train.task
    }

    /// Makes relative paths relative to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        self.manifest.as_mut().map(fix);
        self.mol2_dir.as_mut().map(fix);
        fix(&mut self.study.out);
        self.study.cache.as_mut().map(fix);
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.train.validate().map_err(ConfigError::RangeError)?;
        let w = self.wcs.params(0.0);
        w.validate()
            .map_err(|e| ConfigError::RangeError(e.to_string()))?;
        if let Sigma::Fixed(s) = self.wcs.sigma {
            if !(s.is_finite() && s >= 0.0) {
                return Err(ConfigError::RangeError(format!(
                    "sigma must be non-negative, got {s}"
                )));
            }
        }
        let st = &self.study;
        if st.seeds.is_empty() {
            return Err(ConfigError::RangeError("seed list is empty".into()));
        }
        if st.split.iter().any(|r| !(0.0..=1.0).contains(r))
            || (st.split.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return Err(ConfigError::RangeError(format!(
                "split ratios must lie in [0, 1] and sum to 1, got {:?}",
                st.split
            )));
        }
        if st.hpo_budget == 0 {
            return Err(ConfigError::RangeError(
                "hpo_budget must be at least 1".into(),
            ));
        }
        if st.sweep_tau.is_empty() || st.sweep_kappa.is_empty() || st.sweep_kernels.is_empty() {
            return Err(ConfigError::RangeError(
                "sweep grids must be non-empty".into(),
            ));
        }
        for (key, values) in &st.search {
            for v in values {
                let mut probe = self.train.clone();
                probe.set(key, v).map_err(|msg| ConfigError::TypeError {
                    line: 0,
                    key: format!("search.{key}"),
                    msg,
                })?;
                probe.validate().map_err(ConfigError::RangeError)?;
            }
        }
        Ok(())
    }

    /// Every setting, defaults included, in the file grammar.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let t = &self.train;
        let entries: BTreeMap<&str, String> = t.entries().into_iter().collect();
        out.push_str("[dataset]\n");
        if let Some(p) = &self.manifest {
            let _ = writeln!(out, "manifest = {}", p.display());
        }
        if let Some(p) = &self.mol2_dir {
            let _ = writeln!(out, "mol2_dir = {}", p.display());
        }
        let _ = writeln!(out, "task = {}", t.task);

        let w = &self.wcs;
        out.push_str("\n[wcs]\n");
        let _ = writeln!(out, "kernel = {}", w.kernel);
        let _ = writeln!(out, "kappa = {:?}", w.kappa);
        let _ = writeln!(out, "tau = {:?}", w.tau);
        match w.sigma {
            Sigma::Auto => out.push_str("sigma = auto\n"),
            Sigma::Fixed(s) => {
                let _ = writeln!(out, "sigma = {s:?}");
            }
        }
        let _ = writeln!(out, "with_median = {}", w.with_median);
        for class in ElementClass::ALL {
            let _ = writeln!(out, "radius.{class} = {:?}", w.radii.radius(class));
        }

        for (section, keys) in [("model", &MODEL_KEYS[..]), ("train", &TRAIN_KEYS[..])] {
            let _ = writeln!(out, "\n[{section}]");
            for k in keys {
                let _ = writeln!(out, "{k} = {}", entries[k]);
            }
        }

        let s = &self.study;
        let join = |v: Vec<String>| v.join(", ");
        out.push_str("\n[study]\n");
        let _ = writeln!(
            out,
            "seeds = {}",
            join(s.seeds.iter().map(u64::to_string).collect())
        );
        let _ = writeln!(
            out,
            "split = {}",
            join(s.split.iter().map(|r| format!("{r:?}")).collect())
        );
        let _ = writeln!(
            out,
            "pairs = {}",
            join(s.pairs.iter().map(|p| p.to_string()).collect())
        );
        let _ = writeln!(out, "pair_floor = {}", s.pair_floor);
        let _ = writeln!(out, "out = {}", s.out.display());
        if let Some(c) = &s.cache {
            let _ = writeln!(out, "cache = {}", c.display());
        }
        let _ = writeln!(out, "hpo_budget = {}", s.hpo_budget);
        let _ = writeln!(out, "hpo_seed = {}", s.hpo_seed);
        let _ = writeln!(
            out,
            "sweep_tau = {}",
            join(s.sweep_tau.iter().map(|v| format!("{v:?}")).collect())
        );
        let _ = writeln!(
            out,
            "sweep_kappa = {}",
            join(s.sweep_kappa.iter().map(|v| format!("{v:?}")).collect())
        );
        let _ = writeln!(
            out,
            "sweep_kernels = {}",
            join(s.sweep_kernels.iter().map(|k| k.to_string()).collect())
        );
        for (k, values) in &s.search {
            let _ = writeln!(out, "search.{k} = {}", values.join(", "));
        }
        out
    }
}

fn list(value: &str) -> Vec<String> {
    value
        .split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

fn parse_seeds(value: &str) -> Result<Vec<u64>, String> {
    if let Some((a, b)) = value.split_once("..") {
        let a: u64 = a
            .trim()
            .parse()
            .map_err(|_| format!("bad range start `{a}`"))?;
        let b: u64 = b
            .trim()
            .parse()
            .map_err(|_| format!("bad range end `{b}`"))?;
        if a > b {
            return Err(format!("empty seed range {a}..{b}"));
        }
        return Ok((a..=b).collect());
    }
    list(value)
        .iter()
        .map(|s| s.parse().map_err(|_| format!("bad seed `{s}`")))
        .collect()
}

fn parse_f64(value: &str) -> Result<f64, String> {
    value
        .trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| format!("expected a finite number, got `{value}`"))
}

fn parse_f64_list(value: &str) -> Result<Vec<f64>, String> {
    list(value).iter().map(|s| parse_f64(s)).collect()
}

fn parse_bool(value: &str) -> Result<bool, String> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("expected true or false, got `{value}`")),
    }
}

fn unquote(v: &str) -> &str {
    v.strip_prefix('"')
        .and_then(|s| s.strip_suffix('"'))
        .unwrap_or(v)
}

fn apply(
    cfg: &mut ExperimentConfig,
    section: &str,
    key: &str,
    value: &str,
    line: usize,
) -> Result<(), ConfigError> {
    let type_err = |msg: String| ConfigError::TypeError {
        line,
        key: key.to_string(),
        msg,
    };
    let unknown = |candidates: Vec<&str>| ConfigError::UnknownKey {
        line,
        section: section.to_string(),
        key: key.to_string(),
        suggestion: suggest(key, candidates),
    };
    match section {
        "dataset" => match key {
            "manifest" => cfg.manifest = Some(PathBuf::from(value)),
            "mol2_dir" => cfg.mol2_dir = Some(PathBuf::from(value)),
            "task" => cfg.train.task = value.parse().map_err(type_err)?,
            _ => return Err(unknown(DATASET_KEYS.to_vec())),
        },
        "wcs" => {
            if let Some(class) = key.strip_prefix("radius.") {
                let class: ElementClass = class.parse().map_err(type_err)?;
                let r = parse_f64(value).map_err(type_err)?;
                return cfg.wcs.radii.set(class, r).map_err(ConfigError::RangeError);
            }
            match key {
                "kernel" => cfg.wcs.kernel = value.parse().map_err(type_err)?,
                "kappa" => cfg.wcs.kappa = parse_f64(value).map_err(type_err)?,
                "tau" => cfg.wcs.tau = parse_f64(value).map_err(type_err)?,
                "sigma" => {
                    cfg.wcs.sigma = if value.eq_ignore_ascii_case("auto") {
                        Sigma::Auto
                    } else {
                        Sigma::Fixed(parse_f64(value).map_err(type_err)?)
                    }
                }
                "with_median" => cfg.wcs.with_median = parse_bool(value).map_err(type_err)?,
                _ => {
                    let mut c = WCS_KEYS.to_vec();
                    c.push("radius.C");
                    return Err(unknown(c));
                }
            }
        }
        "model" | "train" => {
            let keys: &[&str] = if section == "model" {
                &MODEL_KEYS
            } else {
                &TRAIN_KEYS
            };
            if !keys.contains(&key) {
                return Err(unknown(keys.to_vec()));
            }
            cfg.train.set(key, value).map_err(type_err)?;
        }
        "study" => {
            if let Some(train_key) = key.strip_prefix("search.") {
                let searchable: Vec<&str> = MODEL_KEYS.iter().chain(&TRAIN_KEYS).copied().collect();
                if !searchable.contains(&train_key) {
                    return Err(ConfigError::UnknownKey {
                        line,
                        section: section.to_string(),
                        key: key.to_string(),
                        suggestion: suggest(train_key, searchable).map(|s| format!("search.{s}")),
                    });
                }
                let values = list(value);
                if values.is_empty() {
                    return Err(type_err("empty candidate list".into()));
                }
                let mut probe = cfg.train.clone();
                for v in &values {
                    probe.set(train_key, v).map_err(type_err)?;
                }
                cfg.study.search.insert(train_key.to_string(), values);
                return Ok(());
            }
            let s = &mut cfg.study;
            match key {
                "seeds" => s.seeds = parse_seeds(value).map_err(type_err)?,
                "split" => {
                    let v = parse_f64_list(value).map_err(type_err)?;
                    s.split = v
                        .try_into()
                        .map_err(|_| type_err("expected three ratios".into()))?;
                }
                "pairs" => {
                    s.pairs = list(value)
                        .iter()
                        .map(|p| p.parse::<SybylPair>().map_err(|e| type_err(e.to_string())))
                        .collect::<Result<_, _>>()?
                }
                "pair_floor" => {
                    s.pair_floor = value
                        .parse()
                        .map_err(|_| type_err("expected an integer".into()))?
                }
                "out" => s.out = PathBuf::from(value),
                "cache" => s.cache = Some(PathBuf::from(value)),
                "hpo_budget" => {
                    s.hpo_budget = value
                        .parse()
                        .map_err(|_| type_err("expected an integer".into()))?
                }
                "hpo_seed" => {
                    s.hpo_seed = value
                        .parse()
                        .map_err(|_| type_err("expected an integer".into()))?
                }
                "sweep_tau" => s.sweep_tau = parse_f64_list(value).map_err(type_err)?,
                "sweep_kappa" => s.sweep_kappa = parse_f64_list(value).map_err(type_err)?,
                "sweep_kernels" => {
                    s.sweep_kernels = list(value)
                        .iter()
                        .map(|k| k.parse().map_err(type_err))
                        .collect::<Result<_, _>>()?
                }
                _ => {
                    let mut c = STUDY_KEYS.to_vec();
                    c.push("search.depth");
                    return Err(unknown(c));
                }
            }
        }
        _ => unreachable!("section validated by the caller"),
    }
    Ok(())
}

/// Parses and validates a configuration; absent keys keep their defaults.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = ExperimentConfig::default();
    let mut section: Option<String> = None;
    let mut seen: BTreeMap<(String, String), usize> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with(';') {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| ConfigError::Syntax {
                    line,
                    msg: "unterminated section header".into(),
                })?
                .trim()
                .to_ascii_lowercase();
            if !SECTIONS.contains(&name.as_str()) {
                return Err(ConfigError::UnknownSection {
                    line,
                    suggestion: suggest(&name, SECTIONS),
                    name,
                });
            }
            section = Some(name);
            continue;
        }
        let (key, value) = trimmed.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line,
            msg: format!("expected `key = value`, got `{trimmed}`"),
        })?;
        let (key, value) = (key.trim(), unquote(value.trim()));
        let sec = section.as_deref().ok_or_else(|| ConfigError::Syntax {
            line,
            msg: "key outside of any section".into(),
        })?;
        if seen
            .insert((sec.to_string(), key.to_string()), line)
            .is_some()
        {
            return Err(ConfigError::DuplicateKey {
                line,
                key: key.to_string(),
            });
        }
        apply(&mut cfg, sec, key, value, line)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Values outside the hyperparameter search space, one message each.
pub fn search_space_violations(cfg: &ExperimentConfig) -> Vec<String> {
    let t = &cfg.train;
    let mut v = Vec::new();
    let on_grid = |x: f64, lo: f64, hi: f64, step: f64| {
        let k = ((x - lo) / step).round();
        x >= lo - 1e-9 && x <= hi + 1e-9 && (lo + k * step - x).abs() < 1e-9
    };
    if !(on_grid(t.aggregation_norm, 1.0, 200.0, 1.0)) {
        v.push(format!(
            "aggregation_norm {} not an integer in [1, 200]",
            t.aggregation_norm
        ));
    }
    if ![16, 32, 64, 128, 256].contains(&t.batch_size) {
        v.push(format!(
            "batch_size {} not in {{16, 32, 64, 128, 256}}",
            t.batch_size
        ));
    }
    if !(2..=6).contains(&t.depth) {
        v.push(format!("depth {} not in [2, 6]", t.depth));
    }
    if !on_grid(t.dropout, 0.0, 0.45, 0.05) {
        v.push(format!("dropout {} not in {{0, 0.05, …, 0.45}}", t.dropout));
    }
    for (name, x) in [
        ("ffn_hidden", t.ffn_hidden),
        ("message_hidden", t.message_hidden),
    ] {
        if !on_grid(x as f64, 300.0, 2400.0, 100.0) {
            v.push(format!("{name} {x} not in [300, 2400] step 100"));
        }
    }
    if !(1..=3).contains(&t.ffn_layers) {
        v.push(format!("ffn_layers {} not in [1, 3]", t.ffn_layers));
    }
    for (name, x) in [
        ("init_lr_ratio", t.init_lr_ratio),
        ("final_lr_ratio", t.final_lr_ratio),
    ] {
        if !(1e-2..=1.0).contains(&x) {
            v.push(format!("{name} {x} not in [1e-2, 1]"));
        }
    }
    if !(1e-4..=1e-2).contains(&t.max_lr) {
        v.push(format!("max_lr {} not in [1e-4, 1e-2]", t.max_lr));
    }
    if !on_grid(cfg.wcs.tau, 0.5, 10.0, 0.5) {
        v.push(format!("tau {} not in [0.5, 10] step 0.5", cfg.wcs.tau));
    }
    if !on_grid(cfg.wcs.kappa, 0.5, 20.0, 0.5) {
        v.push(format!("kappa {} not in [0.5, 20] step 0.5", cfg.wcs.kappa));
    }
    v
}
