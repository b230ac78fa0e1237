//! Molecule model, MOL2 reading/writing, SMILES cleanup and dataset manifests.

mod dataset;
mod mol2;
mod radii;
mod smiles;

use std::fmt;

use thiserror::Error;

pub use dataset::{load_dataset, DatasetRecord, Label, LoadReport, SkippedRecord, TaskKind};
pub use mol2::{parse_mol2, write_mol2};
pub use radii::{vdw_radius, RadiiTable};
pub use smiles::{clean_smiles, heavy_atom_count};

#[derive(Debug, Error)]
pub enum ChemIoError {
    #[error("line {line}: malformed record: {msg}")]
    MalformedRecord { line: usize, msg: String },
    #[error("line {line}: unsupported atom type `{sybyl}`")]
    UnsupportedAtomType { line: usize, sybyl: String },
    #[error("line {line}: bond references atom {index}, molecule has {atom_count} atoms")]
    DanglingBondIndex {
        line: usize,
        index: i64,
        atom_count: usize,
    },
    #[error("every fragment of `{0}` is an isolated ion")]
    EmptyAfterCleaning(String),
    #[error("manifest is missing required column `{0}`")]
    MissingColumn(String),
    #[error("row {row} ({id}): label `{value}` does not fit a {expected:?} dataset")]
    LabelKindMismatch {
        row: usize,
        id: String,
        value: String,
        expected: TaskKind,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    /// 0-based position in the source file.
    pub index: usize,
    pub name: String,
    /// Canonical element symbol, e.g. `"Cl"`.
    pub element: String,
    pub atomic_number: u32,
    /// SYBYL type verbatim from the file (`"N.ar"`, `"C.3"`, `"Cl"`).
    pub sybyl_type: String,
    /// Cartesian coordinates in Ångström.
    pub position: [f64; 3],
    pub formal_charge: i32,
    /// Carried through from the charge column; no feature reads it.
    pub partial_charge: f64,
}

impl Atom {
    pub fn is_hydrogen(&self) -> bool {
        self.atomic_number == 1
    }

    /// SYBYL subtype suffix after the dot (`"ar"` for `"N.ar"`), if any.
    pub fn sybyl_suffix(&self) -> Option<&str> {
        self.sybyl_type.split_once('.').map(|(_, s)| s)
    }

    pub fn distance(&self, other: &Atom) -> f64 {
        let [x, y, z] = self.position;
        let [a, b, c] = other.position;
        ((x - a).powi(2) + (y - b).powi(2) + (z - c).powi(2)).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
    Amide,
}

impl BondOrder {
    pub fn from_mol2(code: &str) -> Option<Self> {
        match code.to_ascii_lowercase().as_str() {
            "1" => Some(BondOrder::Single),
            "2" => Some(BondOrder::Double),
            "3" => Some(BondOrder::Triple),
            "ar" => Some(BondOrder::Aromatic),
            "am" => Some(BondOrder::Amide),
            _ => None,
        }
    }

    pub fn mol2_code(self) -> &'static str {
        match self {
            BondOrder::Single => "1",
            BondOrder::Double => "2",
            BondOrder::Triple => "3",
            BondOrder::Aromatic => "ar",
            BondOrder::Amide => "am",
        }
    }

    /// Double, triple or aromatic.
    pub fn is_multiple(self) -> bool {
        matches!(
            self,
            BondOrder::Double | BondOrder::Triple | BondOrder::Aromatic
        )
    }
}

impl fmt::Display for BondOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.mol2_code())
    }
}

/// Undirected bond between two atom indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
}

impl Bond {
    pub fn other(&self, atom: usize) -> usize {
        if self.a == atom {
            self.b
        } else {
            self.a
        }
    }

    pub fn joins(&self, i: usize, j: usize) -> bool {
        (self.a == i && self.b == j) || (self.a == j && self.b == i)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Molecule {
    pub id: String,
    pub atoms: Vec<Atom>,
    pub bonds: Vec<Bond>,
    pub source_smiles: Option<String>,
}

impl Molecule {
    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    /// Per-atom list of `(neighbor, bond index)` in bond-file order.
    pub fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.atoms.len()];
        for (k, bond) in self.bonds.iter().enumerate() {
            adj[bond.a].push((bond.b, k));
            adj[bond.b].push((bond.a, k));
        }
        adj
    }

    /// Dense bonded-pair lookup, `n * n` row-major.
    pub fn bond_matrix(&self) -> Vec<bool> {
        let n = self.atoms.len();
        let mut m = vec![false; n * n];
        for bond in &self.bonds {
            m[bond.a * n + bond.b] = true;
            m[bond.b * n + bond.a] = true;
        }
        m
    }

    /// Counts atoms by element symbol.
    pub fn formula_count(&self, element: &str) -> usize {
        self.atoms.iter().filter(|a| a.element == element).count()
    }
}
