//! Murcko scaffolds and scaffold-grouped train/validation/test splits.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::chem_io::{BondOrder, DatasetRecord, Molecule};
use crate::featurize::ring_bonds;

#[derive(Debug, Error, PartialEq)]
pub enum SplitError {
    #[error("cannot split an empty dataset")]
    EmptyDataset,
    #[error("split ratios must be non-negative and sum to 1, got {0:?}")]
    InvalidRatios([f64; 3]),
}

/// Heavy-atom scaffold: ring systems plus linkers plus exocyclic atoms
/// double-bonded to ring atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaffoldGraph {
    pub elements: Vec<String>,
    /// `(a, b, order)` with amide folded into single.
    pub bonds: Vec<(usize, usize, BondOrder)>,
}

impl ScaffoldGraph {
    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }
}

fn scaffold_order(order: BondOrder) -> BondOrder {
    match order {
        BondOrder::Amide => BondOrder::Single,
        o => o,
    }
}

pub fn scaffold_graph(mol: &Molecule) -> ScaffoldGraph {
    let heavy: Vec<usize> = (0..mol.atom_count())
        .filter(|&i| !mol.atoms[i].is_hydrogen())
        .collect();
    let mut local = vec![usize::MAX; mol.atom_count()];
    for (k, &i) in heavy.iter().enumerate() {
        local[i] = k;
    }
    let heavy_mol = Molecule {
        id: mol.id.clone(),
        atoms: heavy.iter().map(|&i| mol.atoms[i].clone()).collect(),
        bonds: mol
            .bonds
            .iter()
            .filter(|b| local[b.a] != usize::MAX && local[b.b] != usize::MAX)
            .map(|b| crate::chem_io::Bond {
                a: local[b.a],
                b: local[b.b],
                order: b.order,
            })
            .collect(),
        source_smiles: None,
    };
    let n = heavy_mol.atom_count();
    let rings = ring_bonds(&heavy_mol);
    let mut ring_atom = vec![false; n];
    for (k, b) in heavy_mol.bonds.iter().enumerate() {
        if rings[k] {
            ring_atom[b.a] = true;
            ring_atom[b.b] = true;
        }
    }
    if !ring_atom.iter().any(|&r| r) {
        return ScaffoldGraph {
            elements: Vec::new(),
            bonds: Vec::new(),
        };
    }

    let adj = heavy_mol.adjacency();
    let mut alive = vec![true; n];
    let live_degree = |alive: &[bool], i: usize| adj[i].iter().filter(|&&(j, _)| alive[j]).count();
    loop {
        let doomed: Vec<usize> = (0..n)
            .filter(|&i| alive[i] && !ring_atom[i] && live_degree(&alive, i) <= 1)
            .filter(|&i| {
                let exocyclic = adj[i].iter().any(|&(j, b)| {
                    alive[j] && ring_atom[j] && heavy_mol.bonds[b].order == BondOrder::Double
                });
                !exocyclic
            })
            .collect();
        if doomed.is_empty() {
            break;
        }
        for i in doomed {
            alive[i] = false;
        }
    }

    let kept: Vec<usize> = (0..n).filter(|&i| alive[i]).collect();
    let mut pos = vec![usize::MAX; n];
    for (k, &i) in kept.iter().enumerate() {
        pos[i] = k;
    }
    ScaffoldGraph {
        elements: kept
            .iter()
            .map(|&i| heavy_mol.atoms[i].element.clone())
            .collect(),
        bonds: heavy_mol
            .bonds
            .iter()
            .filter(|b| alive[b.a] && alive[b.b])
            .map(|b| (pos[b.a], pos[b.b], scaffold_order(b.order)))
            .collect(),
    }
}

fn digest(parts: &[&str]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p.as_bytes());
    }
    hex::encode(h.finalize())
}

/// Weisfeiler–Lehman hash of a scaffold graph, `atom count` rounds.
/// Empty graphs hash to `""`.
pub fn wl_hash(g: &ScaffoldGraph) -> String {
    let n = g.elements.len();
    if n == 0 {
        return String::new();
    }
    let mut adj: Vec<Vec<(usize, String)>> = vec![Vec::new(); n];
    for &(a, b, order) in &g.bonds {
        let code = order.mol2_code().to_string();
        adj[a].push((b, code.clone()));
        adj[b].push((a, code));
    }
    let mut labels: Vec<String> = g.elements.clone();
    for _ in 0..n {
        labels = (0..n)
            .map(|i| {
                let mut nbrs: Vec<String> = adj[i]
                    .iter()
                    .map(|(j, code)| format!("{code}:{}", labels[*j]))
                    .collect();
                nbrs.sort();
                let joined = nbrs.join(",");
                digest(&[&labels[i], &joined])
            })
            .collect();
    }
    labels.sort();
    let counts = format!("{}/{}", n, g.bonds.len());
    let mut parts: Vec<&str> = vec![&counts];
    parts.extend(labels.iter().map(String::as_str));
    digest(&parts)
}

pub fn murcko_scaffold(mol: &Molecule) -> String {
    wl_hash(&scaffold_graph(mol))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Partition {
    Train = 0,
    Val = 1,
    Test = 2,
}

impl Partition {
    pub const ALL: [Partition; 3] = [Partition::Train, Partition::Val, Partition::Test];
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Partition::Train => "train",
            Partition::Val => "val",
            Partition::Test => "test",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitAssignment {
    pub partitions: Vec<Partition>,
    pub keys: Vec<String>,
    pub seed: u64,
    pub ratios: [f64; 3],
}

impl SplitAssignment {
    pub fn indices(&self, part: Partition) -> Vec<usize> {
        (0..self.partitions.len())
            .filter(|&i| self.partitions[i] == part)
            .collect()
    }

    pub fn sizes(&self) -> [usize; 3] {
        let mut s = [0; 3];
        for p in &self.partitions {
            s[*p as usize] += 1;
        }
        s
    }

    /// `id,partition,seed,scaffold_key` rows.
    pub fn to_csv(&self, ids: &[String]) -> String {
        let mut out = String::from("id,partition,seed,scaffold_key\n");
        for (i, id) in ids.iter().enumerate() {
            out.push_str(&format!(
                "{id},{},{},{}\n",
                self.partitions[i], self.seed, self.keys[i]
            ));
        }
        out
    }

    pub fn write(&self, path: &Path, ids: &[String]) -> io::Result<()> {
        fs::write(path, self.to_csv(ids))
    }
}

pub const DEFAULT_RATIOS: [f64; 3] = [0.8, 0.1, 0.1];

/// Groups by key, shuffles group order with `seed`, then hands each group
/// to the partition with the largest deficit `ratio·N − size`; ties go to
/// train, then val, then test.
pub fn split_by_keys(
    keys: &[String],
    ratios: [f64; 3],
    seed: u64,
) -> Result<SplitAssignment, SplitError> {
    if keys.is_empty() {
        return Err(SplitError::EmptyDataset);
    }
    if ratios.iter().any(|r| !r.is_finite() || *r < 0.0)
        || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9
    {
        return Err(SplitError::InvalidRatios(ratios));
    }
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, k) in keys.iter().enumerate() {
        groups.entry(k.as_str()).or_default().push(i);
    }
    let mut groups: Vec<Vec<usize>> = groups.into_values().collect();
    groups.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let n = keys.len() as f64;
    let mut sizes = [0usize; 3];
    let mut partitions = vec![Partition::Train; keys.len()];
    for group in groups {
        let mut best = 0;
        let mut best_deficit = f64::NEG_INFINITY;
        for p in 0..3 {
            let deficit = ratios[p] * n - sizes[p] as f64;
            if deficit > best_deficit {
                best = p;
                best_deficit = deficit;
            }
        }
        sizes[best] += group.len();
        for i in group {
            partitions[i] = Partition::ALL[best];
        }
    }
    Ok(SplitAssignment {
        partitions,
        keys: keys.to_vec(),
        seed,
        ratios,
    })
}

pub fn scaffold_keys(records: &[DatasetRecord]) -> Vec<String> {
    records
        .par_iter()
        .map(|r| murcko_scaffold(&r.molecule))
        .collect()
}

pub fn scaffold_split(
    records: &[DatasetRecord],
    ratios: [f64; 3],
    seed: u64,
) -> Result<SplitAssignment, SplitError> {
    split_by_keys(&scaffold_keys(records), ratios, seed)
}
