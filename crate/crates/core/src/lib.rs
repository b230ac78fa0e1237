//! Geometric multi-color message passing for blood-brain barrier permeability.
//!
//! The pipeline runs in this order:
//!
//! 1. [`chem_io`] parses TRIPOS MOL2 structures and dataset manifests.
//! 2. [`wcs`] builds kernel-weighted colored subgraphs per element-class pair
//!    and reduces them to 60 geometric statistics per atom.
//! 3. [`featurize`] adds cheminformatics atom and bond descriptors and
//!    assembles the network input graph.
//! 4. [`mpnn`] trains the message-passing network (hand-written reverse mode).
//! 5. [`datasplit`] and [`metrics`] provide scaffold splits and evaluation.
//! 6. [`harness`] runs multi-seed experiments, grid searches, kernel sweeps
//!    and atom-pair ablations, configured through [`config`].

mod binio;
pub mod chem_io;
pub mod config;
pub mod datasplit;
pub mod elements;
pub mod featurize;
pub mod harness;
pub mod metrics;
pub mod mpnn;
pub mod wcs;

pub use chem_io::{Atom, Bond, BondOrder, DatasetRecord, Label, Molecule, TaskKind};
pub use featurize::MolGraph;
pub use mpnn::{ModelParams, TrainConfig};
pub use wcs::{AblationMask, ElementClass, KernelKind, RadiiTable, WcsParams};
