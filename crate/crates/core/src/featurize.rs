//! Cheminformatics atom features (CAF), bond features and the fused graph
//! handed to the network.
//!
//! CAF layout (127 columns):
//!
//! | columns   | block                                              |
//! |-----------|----------------------------------------------------|
//! | 0..100    | atomic number one-hot (Z − 1)                      |
//! | 100..106  | bond count 0..=5                                   |
//! | 106..111  | formal charge −2..=+2                              |
//! | 111..115  | chirality: unspecified, CW, CCW, other             |
//! | 115..120  | bonded hydrogens 0..=4                             |
//! | 120..125  | hybridization: sp, sp2, sp3, sp3d, sp3d2           |
//! | 125       | aromatic                                           |
//! | 126       | atomic mass / 100                                  |
//!
//! Bond layout (12 columns): single, double, triple, aromatic, conjugated,
//! in ring, then stereo none / any / Z / E / cis / trans.
//!
//! Out-of-range values are clamped into the nearest slot with a warning.

use log::warn;
use ndarray::{s, Array1, Array2};
use rayon::prelude::*;
use thiserror::Error;

use crate::chem_io::{BondOrder, DatasetRecord, Label, Molecule};
use crate::elements;
use crate::wcs::{self, AblationMask, FeatureCache, WcsFeatureMatrix, WcsParams};

pub const CAF_WIDTH: usize = 127;
pub const BOND_WIDTH: usize = 12;

const DEGREE_OFFSET: usize = 100;
const CHARGE_OFFSET: usize = 106;
const CHIRALITY_OFFSET: usize = 111;
const HCOUNT_OFFSET: usize = 115;
const HYBRID_OFFSET: usize = 120;
const AROMATIC_COL: usize = 125;
const MASS_COL: usize = 126;

#[derive(Debug, Error, PartialEq)]
pub enum FeaturizeError {
    #[error("{what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("molecule `{0}` missing from feature cache")]
    MissingFromCache(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hybridization {
    Sp = 0,
    Sp2,
    Sp3,
    Sp3d,
    Sp3d2,
}

impl Hybridization {
    /// `.1` sp, `.2`/`.ar`/`.am`/`.pl3` sp2, everything else sp3.
    pub fn from_sybyl(sybyl: &str) -> Self {
        let suffix = sybyl
            .split_once('.')
            .map(|(_, s)| s.to_ascii_lowercase())
            .unwrap_or_default();
        match suffix.as_str() {
            "1" => Hybridization::Sp,
            "2" | "ar" | "am" | "pl3" => Hybridization::Sp2,
            _ => Hybridization::Sp3,
        }
    }
}

/// Atoms carrying an `.ar` type or touching an aromatic bond.
pub fn aromatic_atoms(mol: &Molecule) -> Vec<bool> {
    let mut aromatic: Vec<bool> = mol
        .atoms
        .iter()
        .map(|a| {
            a.sybyl_suffix()
                .is_some_and(|s| s.eq_ignore_ascii_case("ar"))
        })
        .collect();
    for bond in &mol.bonds {
        if bond.order == BondOrder::Aromatic {
            aromatic[bond.a] = true;
            aromatic[bond.b] = true;
        }
    }
    aromatic
}

/// Marks bonds that lie on a cycle: exactly the non-bridge edges.
pub fn ring_bonds(mol: &Molecule) -> Vec<bool> {
    let n = mol.atom_count();
    let adj = mol.adjacency();
    let mut in_ring = vec![true; mol.bonds.len()];
    let mut disc = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut timer = 0;
    // iterative DFS: (vertex, parent bond, next neighbor position)
    for root in 0..n {
        if disc[root] != usize::MAX {
            continue;
        }
        let mut stack: Vec<(usize, usize, usize)> = vec![(root, usize::MAX, 0)];
        disc[root] = timer;
        low[root] = timer;
        timer += 1;
        while let Some(&mut (v, parent_bond, ref mut pos)) = stack.last_mut() {
            if *pos < adj[v].len() {
                let (w, bond) = adj[v][*pos];
                *pos += 1;
                if bond == parent_bond {
                    continue;
                }
                if disc[w] == usize::MAX {
                    disc[w] = timer;
                    low[w] = timer;
                    timer += 1;
                    stack.push((w, bond, 0));
                } else {
                    low[v] = low[v].min(disc[w]);
                }
            } else {
                stack.pop();
                if let Some(&(u, _, _)) = stack.last() {
                    low[u] = low[u].min(low[v]);
                    if low[v] > disc[u] {
                        in_ring[parent_bond] = false;
                    }
                }
            }
        }
    }
    in_ring
}

fn one_hot_clamped(out: &mut [f64], offset: usize, slots: usize, value: i64, what: &str, id: &str) {
    let clamped = value.clamp(0, slots as i64 - 1);
    if clamped != value {
        warn!("{id}: {what} {value} outside one-hot range, clamped");
    }
    out[offset + clamped as usize] = 1.0;
}

/// Context shared by per-atom and per-bond featurization.
struct Topology {
    adj: Vec<Vec<(usize, usize)>>,
    aromatic: Vec<bool>,
    hybrid: Vec<Hybridization>,
}

impl Topology {
    fn new(mol: &Molecule) -> Self {
        Topology {
            adj: mol.adjacency(),
            aromatic: aromatic_atoms(mol),
            hybrid: mol
                .atoms
                .iter()
                .map(|a| Hybridization::from_sybyl(&a.sybyl_type))
                .collect(),
        }
    }
}

fn caf_into(mol: &Molecule, topo: &Topology, i: usize, out: &mut [f64]) {
    let atom = &mol.atoms[i];
    let z = atom.atomic_number as i64;
    one_hot_clamped(out, 0, 100, z - 1, "atomic number", &mol.id);
    one_hot_clamped(
        out,
        DEGREE_OFFSET,
        6,
        topo.adj[i].len() as i64,
        "degree",
        &mol.id,
    );
    one_hot_clamped(
        out,
        CHARGE_OFFSET,
        5,
        i64::from(atom.formal_charge) + 2,
        "formal charge slot",
        &mol.id,
    );
    out[CHIRALITY_OFFSET] = 1.0;
    let hydrogens = topo.adj[i]
        .iter()
        .filter(|&&(j, _)| mol.atoms[j].is_hydrogen())
        .count();
    one_hot_clamped(
        out,
        HCOUNT_OFFSET,
        5,
        hydrogens as i64,
        "hydrogen count",
        &mol.id,
    );
    out[HYBRID_OFFSET + topo.hybrid[i] as usize] = 1.0;
    out[AROMATIC_COL] = f64::from(u8::from(topo.aromatic[i]));
    out[MASS_COL] = elements::atomic_weight(atom.atomic_number).unwrap_or(0.0) / 100.0;
}

pub fn atom_caf(mol: &Molecule, atom_index: usize) -> Array1<f64> {
    let mut v = Array1::zeros(CAF_WIDTH);
    caf_into(
        mol,
        &Topology::new(mol),
        atom_index,
        v.as_slice_mut().expect("contiguous"),
    );
    v
}

/// Multiple-order or aromatic bonds at `atom`, excluding `skip`.
fn other_multiple_bonds(mol: &Molecule, topo: &Topology, atom: usize, skip: usize) -> usize {
    topo.adj[atom]
        .iter()
        .filter(|&&(_, b)| b != skip && mol.bonds[b].order.is_multiple())
        .count()
}

fn unsaturated(topo: &Topology, i: usize) -> bool {
    topo.aromatic[i] || matches!(topo.hybrid[i], Hybridization::Sp | Hybridization::Sp2)
}

/// A single bond between two unsaturated atoms that each carry another
/// multiple or aromatic bond.
fn single_links_pi_systems(mol: &Molecule, topo: &Topology, k: usize) -> bool {
    let bond = mol.bonds[k];
    !bond.order.is_multiple()
        && unsaturated(topo, bond.a)
        && unsaturated(topo, bond.b)
        && other_multiple_bonds(mol, topo, bond.a, k) > 0
        && other_multiple_bonds(mol, topo, bond.b, k) > 0
}

/// Aromatic bonds, linking single bonds, and multiple bonds adjacent to a
/// linking single bond.
fn is_conjugated(mol: &Molecule, topo: &Topology, k: usize) -> bool {
    let bond = mol.bonds[k];
    match bond.order {
        BondOrder::Aromatic => true,
        BondOrder::Single | BondOrder::Amide => single_links_pi_systems(mol, topo, k),
        BondOrder::Double | BondOrder::Triple => [bond.a, bond.b].iter().any(|&end| {
            topo.adj[end]
                .iter()
                .any(|&(_, j)| j != k && single_links_pi_systems(mol, topo, j))
        }),
    }
}

fn bond_into(mol: &Molecule, topo: &Topology, rings: &[bool], k: usize, out: &mut [f64]) {
    let slot = match mol.bonds[k].order {
        BondOrder::Single | BondOrder::Amide => 0,
        BondOrder::Double => 1,
        BondOrder::Triple => 2,
        BondOrder::Aromatic => 3,
    };
    out[slot] = 1.0;
    out[4] = f64::from(u8::from(is_conjugated(mol, topo, k)));
    out[5] = f64::from(u8::from(rings[k]));
    // MOL2 has no stereo annotation
    out[6] = 1.0;
}

pub fn bond_features(mol: &Molecule, bond_index: usize) -> Array1<f64> {
    let mut v = Array1::zeros(BOND_WIDTH);
    bond_into(
        mol,
        &Topology::new(mol),
        &ring_bonds(mol),
        bond_index,
        v.as_slice_mut().expect("contiguous"),
    );
    v
}

/// Network input for one molecule.
#[derive(Debug, Clone, PartialEq)]
pub struct MolGraph {
    pub id: String,
    /// atoms × (127 + WCS width), `[CAF ‖ WCS]`.
    pub node_features: Array2<f64>,
    /// Directed edges; bond `k` gives `2k: a→b` and `2k+1: b→a`.
    pub edges: Vec<(usize, usize)>,
    pub edge_features: Array2<f64>,
    pub label: Option<Label>,
    /// Identifies the featurization that produced this graph.
    pub fingerprint: String,
}

impl MolGraph {
    pub fn atom_count(&self) -> usize {
        self.node_features.nrows()
    }

    pub fn node_width(&self) -> usize {
        self.node_features.ncols()
    }

    /// Incoming directed-edge indices per atom.
    pub fn incoming(&self) -> Vec<Vec<usize>> {
        let mut inc = vec![Vec::new(); self.atom_count()];
        for (e, &(_, dst)) in self.edges.iter().enumerate() {
            inc[dst].push(e);
        }
        inc
    }

    /// Same molecule with atoms reordered: new atom `i` is old atom `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> MolGraph {
        let mut inverse = vec![0; perm.len()];
        for (new, &old) in perm.iter().enumerate() {
            inverse[old] = new;
        }
        let node_features = Array2::from_shape_fn(self.node_features.dim(), |(i, j)| {
            self.node_features[[perm[i], j]]
        });
        MolGraph {
            node_features,
            edges: self
                .edges
                .iter()
                .map(|&(a, b)| (inverse[a], inverse[b]))
                .collect(),
            ..self.clone()
        }
    }
}

fn base_fingerprint(wcs_width: usize) -> String {
    format!("gmc-features/v1;caf={CAF_WIDTH};bond={BOND_WIDTH};wcs={wcs_width}")
}

pub fn build_molgraph(
    mol: &Molecule,
    wcs_features: &WcsFeatureMatrix,
    label: Option<Label>,
) -> Result<MolGraph, FeaturizeError> {
    let n = mol.atom_count();
    if wcs_features.atom_count() != n {
        return Err(FeaturizeError::DimensionMismatch {
            what: "WCS feature rows",
            expected: n,
            found: wcs_features.atom_count(),
        });
    }
    let wcs_width = wcs_features.width();
    let topo = Topology::new(mol);
    let rings = ring_bonds(mol);

    let mut nodes = Array2::zeros((n, CAF_WIDTH + wcs_width));
    for i in 0..n {
        let mut row = nodes.row_mut(i);
        let row = row.as_slice_mut().expect("standard layout");
        caf_into(mol, &topo, i, &mut row[..CAF_WIDTH]);
    }
    nodes
        .slice_mut(s![.., CAF_WIDTH..])
        .assign(&wcs_features.data);

    let mut edges = Vec::with_capacity(2 * mol.bonds.len());
    let mut edge_features = Array2::zeros((2 * mol.bonds.len(), BOND_WIDTH));
    for (k, bond) in mol.bonds.iter().enumerate() {
        edges.push((bond.a, bond.b));
        edges.push((bond.b, bond.a));
        let mut f = [0.0; BOND_WIDTH];
        bond_into(mol, &topo, &rings, k, &mut f);
        for e in [2 * k, 2 * k + 1] {
            edge_features
                .row_mut(e)
                .assign(&ndarray::ArrayView1::from(&f));
        }
    }

    Ok(MolGraph {
        id: mol.id.clone(),
        node_features: nodes,
        edges,
        edge_features,
        label,
        fingerprint: base_fingerprint(wcs_width),
    })
}

/// WCS parameters plus ablation mask: everything that decides node features.
#[derive(Debug, Clone, PartialEq)]
pub struct Featurizer {
    pub params: WcsParams,
    pub mask: AblationMask,
}

impl Featurizer {
    pub fn new(params: WcsParams, mask: AblationMask) -> Self {
        Featurizer { params, mask }
    }

    pub fn fingerprint(&self) -> String {
        format!(
            "{};{};mask={}",
            base_fingerprint(self.params.feature_width()),
            self.params.fingerprint(),
            self.mask.digest()
        )
    }

    pub fn wcs(&self, mol: &Molecule) -> WcsFeatureMatrix {
        wcs::wcs_atom_features(mol, &self.params, &self.mask)
    }

    pub fn featurize(&self, record: &DatasetRecord) -> MolGraph {
        let wcs = self.wcs(&record.molecule);
        let mut g = build_molgraph(&record.molecule, &wcs, Some(record.label))
            .expect("WCS rows match atom count by construction");
        g.fingerprint = self.fingerprint();
        g
    }

    pub fn featurize_all(&self, records: &[DatasetRecord]) -> Vec<MolGraph> {
        records.par_iter().map(|r| self.featurize(r)).collect()
    }

    /// WCS matrices for `records`, in record order, tagged with this
    /// featurizer's fingerprint.
    pub fn build_cache(&self, records: &[DatasetRecord]) -> FeatureCache {
        let entries = records
            .par_iter()
            .map(|r| (r.id.clone(), self.wcs(&r.molecule).data))
            .collect();
        FeatureCache {
            fingerprint: self.fingerprint(),
            entries,
        }
    }

    /// Graphs from cached WCS matrices; the cache must carry this
    /// featurizer's fingerprint.
    pub fn featurize_from_cache(
        &self,
        records: &[DatasetRecord],
        cache: &FeatureCache,
    ) -> Result<Vec<MolGraph>, FeaturizeError> {
        let s = self.params.stats_per_block();
        records
            .iter()
            .map(|r| {
                let data = cache
                    .get(&r.id)
                    .ok_or_else(|| FeaturizeError::MissingFromCache(r.id.clone()))?;
                if data.ncols() != self.params.feature_width() {
                    return Err(FeaturizeError::DimensionMismatch {
                        what: "cached WCS width",
                        expected: self.params.feature_width(),
                        found: data.ncols(),
                    });
                }
                let wcs = WcsFeatureMatrix {
                    stats_per_block: s,
                    data: data.clone(),
                };
                let mut g = build_molgraph(&r.molecule, &wcs, Some(r.label))?;
                g.fingerprint = cache.fingerprint.clone();
                Ok(g)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem_io::{Atom, Bond};
    use crate::wcs::KernelKind;

    fn atom(index: usize, element: &str, sybyl: &str, charge: i32) -> Atom {
        Atom {
            index,
            name: String::new(),
            element: element.into(),
            atomic_number: elements::atomic_number(element).unwrap(),
            sybyl_type: sybyl.into(),
            position: [index as f64 * 1.5, 0.0, 0.0],
            formal_charge: charge,
            partial_charge: 0.0,
        }
    }

    fn bond(a: usize, b: usize, order: BondOrder) -> Bond {
        Bond { a, b, order }
    }

    fn molecule(atoms: Vec<Atom>, bonds: Vec<Bond>) -> Molecule {
        Molecule {
            id: "t".into(),
            atoms,
            bonds,
            source_smiles: None,
        }
    }

    fn benzene() -> Molecule {
        let mut atoms: Vec<Atom> = (0..6).map(|i| atom(i, "C", "C.ar", 0)).collect();
        atoms.extend((6..12).map(|i| atom(i, "H", "H", 0)));
        let mut bonds: Vec<Bond> = (0..6)
            .map(|i| bond(i, (i + 1) % 6, BondOrder::Aromatic))
            .collect();
        bonds.extend((0..6).map(|i| bond(i, i + 6, BondOrder::Single)));
        molecule(atoms, bonds)
    }

    fn argmax(v: &[f64]) -> usize {
        v.iter().position(|&x| x == 1.0).unwrap()
    }

    #[test]
    fn benzene_carbon_caf() {
        let v = atom_caf(&benzene(), 0);
        let v = v.as_slice().unwrap();
        assert_eq!(v.len(), CAF_WIDTH);
        assert_eq!(argmax(&v[0..100]), 5);
        assert_eq!(argmax(&v[DEGREE_OFFSET..DEGREE_OFFSET + 6]), 3);
        assert_eq!(v[AROMATIC_COL], 1.0);
        assert_eq!(argmax(&v[HCOUNT_OFFSET..HCOUNT_OFFSET + 5]), 1);
        assert_eq!(v[MASS_COL], 0.12011);
        assert_eq!(argmax(&v[HYBRID_OFFSET..HYBRID_OFFSET + 5]), 1);
        assert_eq!(argmax(&v[CHIRALITY_OFFSET..CHIRALITY_OFFSET + 4]), 0);
    }

    #[test]
    fn methane_caf() {
        let mut atoms = vec![atom(0, "C", "C.3", 0)];
        atoms.extend((1..5).map(|i| atom(i, "H", "H", 0)));
        let bonds = (1..5).map(|i| bond(0, i, BondOrder::Single)).collect();
        let v = atom_caf(&molecule(atoms, bonds), 0);
        let v = v.as_slice().unwrap();
        assert_eq!(
            argmax(&v[HYBRID_OFFSET..HYBRID_OFFSET + 5]),
            Hybridization::Sp3 as usize
        );
        assert_eq!(argmax(&v[CHARGE_OFFSET..CHARGE_OFFSET + 5]), 2);
        assert_eq!(argmax(&v[HCOUNT_OFFSET..HCOUNT_OFFSET + 5]), 4);
        assert_eq!(v[AROMATIC_COL], 0.0);
    }

    #[test]
    fn charge_clamped() {
        let m = molecule(
            vec![atom(0, "N", "N.3", -3), atom(1, "N", "N.4", 5)],
            vec![],
        );
        let a = atom_caf(&m, 0);
        assert_eq!(
            argmax(&a.as_slice().unwrap()[CHARGE_OFFSET..CHARGE_OFFSET + 5]),
            0
        );
        let b = atom_caf(&m, 1);
        assert_eq!(
            argmax(&b.as_slice().unwrap()[CHARGE_OFFSET..CHARGE_OFFSET + 5]),
            4
        );
    }

    #[test]
    fn one_hot_blocks_sum_to_one() {
        let v = atom_caf(&benzene(), 7);
        let v = v.as_slice().unwrap();
        for (lo, hi) in [
            (0, 100),
            (100, 106),
            (106, 111),
            (111, 115),
            (115, 120),
            (120, 125),
        ] {
            assert_eq!(v[lo..hi].iter().sum::<f64>(), 1.0, "{lo}..{hi}");
        }
    }

    #[test]
    fn hybridization_map() {
        for (t, h) in [
            ("C.1", Hybridization::Sp),
            ("C.2", Hybridization::Sp2),
            ("C.3", Hybridization::Sp3),
            ("N.ar", Hybridization::Sp2),
            ("N.am", Hybridization::Sp2),
            ("N.pl3", Hybridization::Sp2),
            ("S.o", Hybridization::Sp3),
            ("S.O2", Hybridization::Sp3),
            ("N.4", Hybridization::Sp3),
            ("Cl", Hybridization::Sp3),
        ] {
            assert_eq!(Hybridization::from_sybyl(t), h, "{t}");
        }
    }

    #[test]
    fn benzene_bond() {
        let m = benzene();
        let f = bond_features(&m, 0);
        assert_eq!(
            f.as_slice().unwrap(),
            &[0., 0., 0., 1., 1., 1., 1., 0., 0., 0., 0., 0.]
        );
        let ch = bond_features(&m, 6);
        assert_eq!(ch[0], 1.0);
        assert_eq!(ch[4], 0.0);
        assert_eq!(ch[5], 0.0);
    }

    #[test]
    fn ethane_bond() {
        let m = molecule(
            vec![atom(0, "C", "C.3", 0), atom(1, "C", "C.3", 0)],
            vec![bond(0, 1, BondOrder::Single)],
        );
        let f = bond_features(&m, 0);
        assert_eq!(
            f.as_slice().unwrap(),
            &[1., 0., 0., 0., 0., 0., 1., 0., 0., 0., 0., 0.]
        );
    }

    #[test]
    fn butadiene_central_bond_conjugated() {
        // C1=C2-C3=C4
        let atoms = (0..4).map(|i| atom(i, "C", "C.2", 0)).collect();
        let bonds = vec![
            bond(0, 1, BondOrder::Double),
            bond(1, 2, BondOrder::Single),
            bond(2, 3, BondOrder::Double),
        ];
        let m = molecule(atoms, bonds);
        assert_eq!(bond_features(&m, 1)[4], 1.0);
        assert_eq!(bond_features(&m, 0)[4], 1.0);
        assert_eq!(bond_features(&m, 0)[1], 1.0);
    }

    #[test]
    fn isolated_double_bond_not_conjugated() {
        let m = molecule(
            vec![atom(0, "C", "C.2", 0), atom(1, "C", "C.2", 0)],
            vec![bond(0, 1, BondOrder::Double)],
        );
        assert_eq!(bond_features(&m, 0)[4], 0.0);
    }

    #[test]
    fn amide_maps_to_single() {
        let m = molecule(
            vec![atom(0, "C", "C.2", 0), atom(1, "N", "N.am", 0)],
            vec![bond(0, 1, BondOrder::Amide)],
        );
        assert_eq!(bond_features(&m, 0)[0], 1.0);
    }

    #[test]
    fn ring_detection_on_fused_and_bridged() {
        // square 0-1-2-3 with tail 3-4 and a triangle 4-5-6
        let atoms = (0..7).map(|i| atom(i, "C", "C.3", 0)).collect();
        let bonds = vec![
            bond(0, 1, BondOrder::Single),
            bond(1, 2, BondOrder::Single),
            bond(2, 3, BondOrder::Single),
            bond(3, 0, BondOrder::Single),
            bond(3, 4, BondOrder::Single),
            bond(4, 5, BondOrder::Single),
            bond(5, 6, BondOrder::Single),
            bond(6, 4, BondOrder::Single),
        ];
        let rings = ring_bonds(&molecule(atoms, bonds));
        assert_eq!(rings, vec![true, true, true, true, false, true, true, true]);
    }

    #[test]
    fn molgraph_shapes() {
        let m = molecule(
            vec![atom(0, "C", "C.3", 0), atom(1, "O", "O.3", 0)],
            vec![bond(0, 1, BondOrder::Single)],
        );
        let p = WcsParams::new(KernelKind::Exponential, 1.0, 1.0, 0.0).unwrap();
        let w = wcs::wcs_atom_features(&m, &p, &AblationMask::empty());
        let g = build_molgraph(&m, &w, None).unwrap();
        assert_eq!(g.node_features.dim(), (2, 187));
        assert_eq!(g.edges, vec![(0, 1), (1, 0)]);
        assert_eq!(g.edge_features.dim(), (2, 12));

        let short = WcsFeatureMatrix {
            stats_per_block: 5,
            data: Array2::zeros((1, 60)),
        };
        assert_eq!(
            build_molgraph(&m, &short, None),
            Err(FeaturizeError::DimensionMismatch {
                what: "WCS feature rows",
                expected: 2,
                found: 1
            })
        );
    }
}
