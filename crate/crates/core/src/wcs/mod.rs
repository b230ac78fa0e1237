//! Weighted colored subgraphs (WCS).
//!
//! Atoms are colored by one of twelve element classes. For a class pair
//! `(k, k')` the subgraph joins atoms of those classes with kernel-weighted
//! edges `Φ(‖rᵢ − rⱼ‖; η_kk')`, `η_kk' = τ (r_k + r_k')`. Bonded pairs and
//! pairs closer than `r_vdwᵢ + r_vdwⱼ + σ` carry no edge. For `k ≠ k'` the
//! subgraph is bipartite, for `k = k'` it is complete over surviving pairs.
//!
//! Each atom gets, for every partner class `k'`, the degree `(D_kk')ᵢᵢ` and
//! the min / max / mean / population std of its nonzero incident weights:
//! 12 × 5 = 60 features (72 with the optional median).

mod cache;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::chem_io::Molecule;
pub use crate::chem_io::RadiiTable;
pub use cache::{read_cache, write_cache, CacheError, FeatureCache, CACHE_MAGIC, CACHE_VERSION};

#[derive(Debug, Error, PartialEq)]
pub enum WcsError {
    #[error("invalid WCS parameter: {0}")]
    InvalidParams(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("`{0}` is not a SYBYL atom-type pair like `N.ar-O.2`")]
    BadPair(String),
}

/// The twelve atom colors, in feature-block order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ElementClass {
    C = 0,
    H,
    O,
    N,
    P,
    Cl,
    F,
    Br,
    S,
    Si,
    I,
    X,
}

impl ElementClass {
    pub const COUNT: usize = 12;
    pub const ALL: [ElementClass; 12] = [
        ElementClass::C,
        ElementClass::H,
        ElementClass::O,
        ElementClass::N,
        ElementClass::P,
        ElementClass::Cl,
        ElementClass::F,
        ElementClass::Br,
        ElementClass::S,
        ElementClass::Si,
        ElementClass::I,
        ElementClass::X,
    ];

    pub fn from_element(symbol: &str) -> Self {
        match symbol {
            "C" => ElementClass::C,
            "H" => ElementClass::H,
            "O" => ElementClass::O,
            "N" => ElementClass::N,
            "P" => ElementClass::P,
            "Cl" => ElementClass::Cl,
            "F" => ElementClass::F,
            "Br" => ElementClass::Br,
            "S" => ElementClass::S,
            "Si" => ElementClass::Si,
            "I" => ElementClass::I,
            _ => ElementClass::X,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            ElementClass::C => "C",
            ElementClass::H => "H",
            ElementClass::O => "O",
            ElementClass::N => "N",
            ElementClass::P => "P",
            ElementClass::Cl => "Cl",
            ElementClass::F => "F",
            ElementClass::Br => "Br",
            ElementClass::S => "S",
            ElementClass::Si => "Si",
            ElementClass::I => "I",
            ElementClass::X => "X",
        }
    }
}

impl fmt::Display for ElementClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl FromStr for ElementClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ElementClass::ALL
            .into_iter()
            .find(|c| c.symbol() == s)
            .ok_or_else(|| format!("unknown element class `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum KernelKind {
    Exponential,
    Lorentz,
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KernelKind::Exponential => "Exponential",
            KernelKind::Lorentz => "Lorentz",
        })
    }
}

impl FromStr for KernelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "exponential" | "exp" | "e" => Ok(KernelKind::Exponential),
            "lorentz" | "lor" | "l" => Ok(KernelKind::Lorentz),
            _ => Err(format!("unknown kernel `{s}` (Exponential | Lorentz)")),
        }
    }
}

/// Φ_E = exp(−(d/η)^κ), Φ_L = 1 / (1 + (d/η)^κ).
pub fn kernel_eval(d: f64, eta: f64, kappa: f64, kind: KernelKind) -> f64 {
    let ratio = (d / eta).powf(kappa);
    match kind {
        KernelKind::Exponential => (-ratio).exp(),
        KernelKind::Lorentz => 1.0 / (1.0 + ratio),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WcsParams {
    pub kernel: KernelKind,
    /// Kernel power κ.
    pub kappa: f64,
    /// Scale τ of the characteristic distance.
    pub tau: f64,
    /// Covalent-exclusion margin σ (Å).
    pub sigma: f64,
    pub radii: RadiiTable,
    /// Adds the median as a sixth statistic per block (72 features).
    pub with_median: bool,
}

impl WcsParams {
    pub fn new(kernel: KernelKind, kappa: f64, tau: f64, sigma: f64) -> Result<Self, WcsError> {
        let params = WcsParams {
            kernel,
            kappa,
            tau,
            sigma,
            radii: RadiiTable::bondi(),
            with_median: false,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), WcsError> {
        if !(self.kappa.is_finite() && self.kappa > 0.0) {
            return Err(WcsError::InvalidParams(format!(
                "kappa must be positive, got {}",
                self.kappa
            )));
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(WcsError::InvalidParams(format!(
                "tau must be positive, got {}",
                self.tau
            )));
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(WcsError::InvalidParams(format!(
                "sigma must be finite and non-negative, got {}",
                self.sigma
            )));
        }
        Ok(())
    }

    pub fn stats_per_block(&self) -> usize {
        if self.with_median {
            6
        } else {
            5
        }
    }

    pub fn feature_width(&self) -> usize {
        ElementClass::COUNT * self.stats_per_block()
    }

    /// Identifies every input that changes the feature values.
    pub fn fingerprint(&self) -> String {
        format!(
            "kernel={};kappa={:?};tau={:?};sigma={:?};radii={};width={}",
            self.kernel,
            self.kappa,
            self.tau,
            self.sigma,
            self.radii.fingerprint(),
            self.feature_width()
        )
    }
}

/// η_kk' = τ (r_k + r_k').
pub fn characteristic_distance(k: ElementClass, k2: ElementClass, params: &WcsParams) -> f64 {
    params.tau * (params.radii.radius(k) + params.radii.radius(k2))
}

/// Population standard deviation of the radii of the distinct element
/// classes that occur anywhere in `molecules`.
pub fn dataset_sigma<'a>(
    molecules: impl IntoIterator<Item = &'a Molecule>,
    radii: &RadiiTable,
) -> Result<f64, WcsError> {
    let mut classes = BTreeSet::new();
    let mut any = false;
    for mol in molecules {
        any = true;
        classes.extend(
            mol.atoms
                .iter()
                .map(|a| ElementClass::from_element(&a.element)),
        );
    }
    if !any || classes.is_empty() {
        return Err(WcsError::EmptyDataset);
    }
    let values: Vec<f64> = classes.iter().map(|&c| radii.radius(c)).collect();
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok(var.sqrt())
}

fn valid_sybyl(s: &str) -> bool {
    let (head, tail) = match s.split_once('.') {
        Some((h, t)) => (h, Some(t)),
        None => (s, None),
    };
    let mut chars = head.chars();
    let head_ok = match (chars.next(), chars.next(), chars.next()) {
        (Some(a), None, None) => a.is_ascii_uppercase(),
        (Some(a), Some(b), None) => a.is_ascii_uppercase() && b.is_ascii_lowercase(),
        _ => false,
    };
    head_ok
        && crate::elements::atomic_number(head).is_some()
        && tail.is_none_or(|t| !t.is_empty() && t.chars().all(|c| c.is_ascii_alphanumeric()))
}

/// Unordered pair of SYBYL atom types, stored sorted.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SybylPair(String, String);

impl SybylPair {
    pub fn new(a: &str, b: &str) -> Result<Self, WcsError> {
        for t in [a, b] {
            if !valid_sybyl(t) {
                return Err(WcsError::BadPair(format!("{a}-{b}")));
            }
        }
        Ok(if a <= b {
            SybylPair(a.to_string(), b.to_string())
        } else {
            SybylPair(b.to_string(), a.to_string())
        })
    }

    pub fn matches(&self, a: &str, b: &str) -> bool {
        (self.0 == a && self.1 == b) || (self.0 == b && self.1 == a)
    }

    pub fn types(&self) -> (&str, &str) {
        (&self.0, &self.1)
    }
}

impl FromStr for SybylPair {
    type Err = WcsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s
            .trim()
            .split_once('-')
            .ok_or_else(|| WcsError::BadPair(s.to_string()))?;
        SybylPair::new(a.trim(), b.trim())
    }
}

impl fmt::Display for SybylPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.0, self.1)
    }
}

/// SYBYL-type pairs whose interactions are dropped before adjacency
/// construction.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AblationMask {
    pairs: BTreeSet<SybylPair>,
}

impl AblationMask {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn single(pair: SybylPair) -> Self {
        AblationMask {
            pairs: BTreeSet::from([pair]),
        }
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = SybylPair>) -> Self {
        AblationMask {
            pairs: pairs.into_iter().collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn suppresses(&self, a: &str, b: &str) -> bool {
        !self.pairs.is_empty() && self.pairs.iter().any(|p| p.matches(a, b))
    }

    pub fn pairs(&self) -> impl Iterator<Item = &SybylPair> {
        self.pairs.iter()
    }

    /// `"none"` for the empty mask, else a short digest.
    pub fn digest(&self) -> String {
        if self.pairs.is_empty() {
            return "none".to_string();
        }
        let joined: Vec<String> = self.pairs.iter().map(|p| p.to_string()).collect();
        hex::encode(&Sha256::digest(joined.join(",").as_bytes())[..8])
    }
}

/// Weighted adjacency of the `(k, k')` subgraph over `vertex_ids`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairAdjacency {
    pub pair: (ElementClass, ElementClass),
    /// Atom indices of the vertices, in molecule order.
    pub vertex_ids: Vec<usize>,
    pub weights: Array2<f64>,
}

/// Per-atom geometry shared by the adjacency builders.
pub(crate) struct Geometry<'a> {
    mol: &'a Molecule,
    classes: Vec<ElementClass>,
    radii: Vec<f64>,
    bonded: Vec<bool>,
}

impl<'a> Geometry<'a> {
    pub(crate) fn new(mol: &'a Molecule, params: &WcsParams) -> Self {
        let classes: Vec<ElementClass> = mol
            .atoms
            .iter()
            .map(|a| ElementClass::from_element(&a.element))
            .collect();
        let radii = classes.iter().map(|&c| params.radii.radius(c)).collect();
        Geometry {
            mol,
            classes,
            radii,
            bonded: mol.bond_matrix(),
        }
    }

    /// Distance if `(i, j)` survives the bond, cutoff and mask filters.
    pub(crate) fn surviving_distance(
        &self,
        i: usize,
        j: usize,
        sigma: f64,
        mask: &AblationMask,
    ) -> Option<f64> {
        let n = self.classes.len();
        if i == j || self.bonded[i * n + j] {
            return None;
        }
        let (a, b) = (&self.mol.atoms[i], &self.mol.atoms[j]);
        let d = a.distance(b);
        if d < self.radii[i] + self.radii[j] + sigma {
            return None;
        }
        if mask.suppresses(&a.sybyl_type, &b.sybyl_type) {
            return None;
        }
        Some(d)
    }
}

fn pair_adjacency(
    geo: &Geometry<'_>,
    k: ElementClass,
    k2: ElementClass,
    params: &WcsParams,
    mask: &AblationMask,
) -> PairAdjacency {
    let vertex_ids: Vec<usize> = (0..geo.classes.len())
        .filter(|&i| geo.classes[i] == k || geo.classes[i] == k2)
        .collect();
    let eta = characteristic_distance(k, k2, params);
    let m = vertex_ids.len();
    let mut weights = Array2::zeros((m, m));
    for u in 0..m {
        for v in (u + 1)..m {
            let (i, j) = (vertex_ids[u], vertex_ids[v]);
            let (ci, cj) = (geo.classes[i], geo.classes[j]);
            let colored = (ci == k && cj == k2) || (ci == k2 && cj == k);
            if !colored {
                continue;
            }
            if let Some(d) = geo.surviving_distance(i, j, params.sigma, mask) {
                let w = kernel_eval(d, eta, params.kappa, params.kernel);
                weights[[u, v]] = w;
                weights[[v, u]] = w;
            }
        }
    }
    PairAdjacency {
        pair: (k, k2),
        vertex_ids,
        weights,
    }
}

pub fn build_pair_adjacency(
    mol: &Molecule,
    k: ElementClass,
    k2: ElementClass,
    params: &WcsParams,
    mask: &AblationMask,
) -> PairAdjacency {
    pair_adjacency(&Geometry::new(mol, params), k, k2, params, mask)
}

/// Counts, per unordered SYBYL-type pair, the atom pairs of `mol` that
/// survive the bond and distance filters. Atoms whose type is not a valid
/// SYBYL name are skipped.
pub fn pair_frequencies(mol: &Molecule, params: &WcsParams) -> BTreeMap<SybylPair, usize> {
    let geo = Geometry::new(mol, params);
    let none = AblationMask::empty();
    let mut counts = BTreeMap::new();
    let n = mol.atom_count();
    for i in 0..n {
        for j in (i + 1)..n {
            if geo.surviving_distance(i, j, params.sigma, &none).is_none() {
                continue;
            }
            if let Ok(pair) = SybylPair::new(&mol.atoms[i].sybyl_type, &mol.atoms[j].sybyl_type) {
                *counts.entry(pair).or_insert(0) += 1;
            }
        }
    }
    counts
}

/// Degrees `Dᵢᵢ = Σⱼ Aᵢⱼ` and Laplacian `L = D − A`.
pub fn degree_and_laplacian(adj: &PairAdjacency) -> (Array1<f64>, Array2<f64>) {
    let degree = adj.weights.sum_axis(ndarray::Axis(1));
    let mut lap = -&adj.weights;
    for (i, &d) in degree.iter().enumerate() {
        lap[[i, i]] += d;
    }
    (degree, lap)
}

/// Atoms × (12 · stats) feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct WcsFeatureMatrix {
    pub stats_per_block: usize,
    pub data: Array2<f64>,
}

impl WcsFeatureMatrix {
    pub fn atom_count(&self) -> usize {
        self.data.nrows()
    }

    pub fn width(&self) -> usize {
        self.data.ncols()
    }

    /// Statistics of atom `atom` against partner class `partner`.
    pub fn block(&self, atom: usize, partner: ElementClass) -> &[f64] {
        let s = self.stats_per_block;
        let row = self.data.row(atom).to_slice().expect("standard layout");
        &row[partner as usize * s..(partner as usize + 1) * s]
    }
}

/// Writes `[sum, min, max, mean, std(, median)]` for `weights` into `out`.
/// Zero weights are not samples; with none left every entry is 0.
fn write_stats(sum: f64, weights: &mut Vec<f64>, out: &mut [f64]) {
    weights.retain(|&w| w != 0.0);
    if weights.is_empty() {
        return;
    }
    let n = weights.len() as f64;
    let min = weights.iter().copied().fold(f64::INFINITY, f64::min);
    let max = weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = weights.iter().sum::<f64>() / n;
    let var = weights.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / n;
    out[0] = sum;
    out[1] = min;
    out[2] = max;
    out[3] = mean;
    out[4] = var.sqrt();
    if out.len() > 5 {
        weights.sort_by(f64::total_cmp);
        let m = weights.len();
        out[5] = if m % 2 == 1 {
            weights[m / 2]
        } else {
            0.5 * (weights[m / 2 - 1] + weights[m / 2])
        };
    }
}

pub fn wcs_atom_features(
    mol: &Molecule,
    params: &WcsParams,
    mask: &AblationMask,
) -> WcsFeatureMatrix {
    let geo = Geometry::new(mol, params);
    let s = params.stats_per_block();
    let mut data = Array2::zeros((mol.atom_count(), ElementClass::COUNT * s));
    let present: BTreeSet<ElementClass> = geo.classes.iter().copied().collect();
    let present: Vec<ElementClass> = present.into_iter().collect();
    let mut scratch = Vec::new();

    for (a, &k) in present.iter().enumerate() {
        for &k2 in &present[a..] {
            let adj = pair_adjacency(&geo, k, k2, params, mask);
            let (degree, _) = degree_and_laplacian(&adj);
            for (u, &atom) in adj.vertex_ids.iter().enumerate() {
                let own = geo.classes[atom];
                let partner = if own == k { k2 } else { k };
                scratch.clear();
                scratch.extend(adj.weights.row(u).iter().copied());
                let block = partner as usize * s;
                let mut row = data.row_mut(atom);
                let out = &mut row.as_slice_mut().expect("standard layout")[block..block + s];
                write_stats(degree[u], &mut scratch, out);
            }
        }
    }
    WcsFeatureMatrix {
        stats_per_block: s,
        data,
    }
}
