#![allow(dead_code)]

pub mod oracles;

use std::path::{Path, PathBuf};

use gmc_core::chem_io::{load_dataset, parse_mol2};
use gmc_core::featurize::Featurizer;
use gmc_core::mpnn::{Activation, Aggregation};
use gmc_core::wcs::dataset_sigma;
use gmc_core::{
    AblationMask, Atom, Bond, BondOrder, DatasetRecord, KernelKind, MolGraph, Molecule, RadiiTable,
    TaskKind, TrainConfig, WcsParams,
};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn mol2_dir() -> PathBuf {
    fixtures().join("mol2")
}

pub fn molecule(name: &str) -> Molecule {
    let text = std::fs::read_to_string(mol2_dir().join(format!("{name}.mol2"))).unwrap();
    let mut m = parse_mol2(&text).unwrap();
    m.id = name.to_string();
    m
}

pub fn records(task: TaskKind) -> Vec<DatasetRecord> {
    let manifest = match task {
        TaskKind::Classification => "cls_manifest.csv",
        TaskKind::Regression => "reg_manifest.csv",
    };
    let report = load_dataset(&fixtures().join(manifest), &mol2_dir(), task).unwrap();
    assert!(report.skipped.is_empty(), "{:?}", report.skipped);
    report.records
}

pub fn all_molecules() -> Vec<Molecule> {
    records(TaskKind::Classification)
        .into_iter()
        .map(|r| r.molecule)
        .collect()
}

pub fn wcs_params(records: &[DatasetRecord]) -> WcsParams {
    let radii = RadiiTable::bondi();
    let sigma = dataset_sigma(records.iter().map(|r| &r.molecule), &radii).unwrap();
    WcsParams::new(KernelKind::Exponential, 2.0, 1.0, sigma).unwrap()
}

pub fn graphs(records: &[DatasetRecord]) -> Vec<MolGraph> {
    Featurizer::new(wcs_params(records), AblationMask::empty()).featurize_all(records)
}

/// Small network for fast tests.
pub fn tiny_config(task: TaskKind) -> TrainConfig {
    TrainConfig {
        task,
        depth: 2,
        message_hidden: 16,
        ffn_hidden: 12,
        ffn_layers: 2,
        activation: Activation::LeakyRelu,
        aggregation: Aggregation::Sum,
        aggregation_norm: 10.0,
        batch_size: 8,
        epochs: 20,
        max_lr: 1e-3,
        init_lr_ratio: 0.1,
        final_lr_ratio: 0.1,
        warmup_epochs: 2,
        dropout: 0.0,
        seed: 0,
    }
}

const RANDOM_TYPES: [(&str, &str, u32); 12] = [
    ("C", "C.3", 6),
    ("C", "C.ar", 6),
    ("H", "H", 1),
    ("O", "O.2", 8),
    ("N", "N.ar", 7),
    ("P", "P.3", 15),
    ("Cl", "Cl", 17),
    ("F", "F", 9),
    ("Br", "Br", 35),
    ("S", "S.3", 16),
    ("I", "I", 53),
    ("Na", "Na", 11),
];

/// Molecules with 1–14 atoms of mixed classes in a 12 Å box and a random
/// bond set.
pub fn arb_molecule() -> impl proptest::strategy::Strategy<Value = Molecule> {
    use proptest::prelude::*;
    (1usize..15)
        .prop_flat_map(|n| {
            (
                proptest::collection::vec(
                    (0..RANDOM_TYPES.len(), [-6.0f64..6.0, -6.0..6.0, -6.0..6.0]),
                    n,
                ),
                proptest::collection::vec(any::<bool>(), n * (n - 1) / 2),
            )
        })
        .prop_map(|(atoms, bond_bits)| {
            let n = atoms.len();
            let atoms: Vec<Atom> = atoms
                .into_iter()
                .enumerate()
                .map(|(i, (t, position))| {
                    let (element, sybyl, z) = RANDOM_TYPES[t];
                    Atom {
                        index: i,
                        name: format!("{element}{i}"),
                        element: element.to_string(),
                        atomic_number: z,
                        sybyl_type: sybyl.to_string(),
                        position,
                        formal_charge: 0,
                        partial_charge: 0.0,
                    }
                })
                .collect();
            let mut bonds = Vec::new();
            let mut k = 0;
            for a in 0..n {
                for b in (a + 1)..n {
                    // sparse: roughly one pair in four
                    if bond_bits[k] && (a + b) % 2 == 0 {
                        bonds.push(Bond {
                            a,
                            b,
                            order: BondOrder::Single,
                        });
                    }
                    k += 1;
                }
            }
            Molecule {
                id: "random".into(),
                atoms,
                bonds,
                source_smiles: None,
            }
        })
}

/// Rotation from a unit quaternion, then translation.
pub fn rigid_transform(mol: &Molecule, q: [f64; 4], t: [f64; 3]) -> Molecule {
    let norm = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    let [w, x, y, z] = q.map(|v| v / norm);
    let r = [
        [
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
        ],
        [
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
        ],
        [
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        ],
    ];
    let mut out = mol.clone();
    for a in &mut out.atoms {
        let p = a.position;
        a.position =
            std::array::from_fn(|i| r[i][0] * p[0] + r[i][1] * p[1] + r[i][2] * p[2] + t[i]);
    }
    out
}
