//! TRIPOS MOL2 subset: `MOLECULE`, `ATOM` and `BOND` record blocks.
//!
//! Only the first molecule of a multi-molecule file is read. Atom order is
//! kept exactly as written since every downstream feature matrix is indexed
//! by it.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use super::{Atom, Bond, BondOrder, ChemIoError, Molecule};
use crate::elements;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Section {
    None,
    Molecule,
    Atom,
    Bond,
    Other,
}

fn malformed(line: usize, msg: impl Into<String>) -> ChemIoError {
    ChemIoError::MalformedRecord {
        line,
        msg: msg.into(),
    }
}

fn parse_field<T: std::str::FromStr>(line: usize, what: &str, raw: &str) -> Result<T, ChemIoError> {
    raw.parse()
        .map_err(|_| malformed(line, format!("cannot parse {what} from `{raw}`")))
}

/// Element for a SYBYL type. Dummy and pseudo types (`Du`, `LP`, `Any`,
/// `Hal`, `Het`, `Hev`) have no element and are rejected.
fn element_of(sybyl: &str) -> Option<u32> {
    let head = sybyl.split('.').next().unwrap_or("");
    if head.is_empty() || head.len() > 2 || !head.chars().all(|c| c.is_ascii_alphabetic()) {
        return None;
    }
    elements::atomic_number(head)
}

pub fn parse_mol2(text: &str) -> Result<Molecule, ChemIoError> {
    let mut section = Section::None;
    let mut seen_molecule = false;
    let mut seen_atoms = false;
    let mut molecule_lines: Vec<&str> = Vec::new();
    let mut atoms: Vec<Atom> = Vec::new();
    let mut id_to_index: HashMap<i64, usize> = HashMap::new();
    // (line number, a id, b id, order)
    let mut raw_bonds: Vec<(usize, i64, i64, BondOrder)> = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.trim_end();
        if let Some(tag) = line.trim_start().strip_prefix("@<TRIPOS>") {
            let next = match tag.trim() {
                "MOLECULE" => Section::Molecule,
                "ATOM" => Section::Atom,
                "BOND" => Section::Bond,
                _ => Section::Other,
            };
            if next == Section::Molecule && seen_molecule {
                break;
            }
            seen_molecule |= next == Section::Molecule;
            seen_atoms |= next == Section::Atom;
            section = next;
            continue;
        }
        if line.trim_start().starts_with('#') {
            continue;
        }
        match section {
            Section::Molecule => molecule_lines.push(line),
            Section::Atom => {
                if line.trim().is_empty() {
                    continue;
                }
                let f: Vec<&str> = line.split_whitespace().collect();
                if f.len() < 6 {
                    return Err(malformed(
                        lineno,
                        format!("ATOM record needs at least 6 fields, found {}", f.len()),
                    ));
                }
                let id: i64 = parse_field(lineno, "atom id", f[0])?;
                let mut position = [0.0; 3];
                for (k, p) in position.iter_mut().enumerate() {
                    *p = parse_field::<f64>(lineno, "coordinate", f[2 + k])?;
                    if !p.is_finite() {
                        return Err(malformed(lineno, "non-finite coordinate"));
                    }
                }
                let sybyl = f[5];
                let atomic_number =
                    element_of(sybyl).ok_or_else(|| ChemIoError::UnsupportedAtomType {
                        line: lineno,
                        sybyl: sybyl.to_string(),
                    })?;
                let partial_charge = match f.get(8) {
                    Some(q) => parse_field(lineno, "charge", q)?,
                    None => 0.0,
                };
                let index = atoms.len();
                if id_to_index.insert(id, index).is_some() {
                    return Err(malformed(lineno, format!("duplicate atom id {id}")));
                }
                atoms.push(Atom {
                    index,
                    name: f[1].to_string(),
                    element: elements::symbol(atomic_number).unwrap().to_string(),
                    atomic_number,
                    sybyl_type: sybyl.to_string(),
                    position,
                    formal_charge: 0,
                    partial_charge,
                });
            }
            Section::Bond => {
                if line.trim().is_empty() {
                    continue;
                }
                let f: Vec<&str> = line.split_whitespace().collect();
                if f.len() < 4 {
                    return Err(malformed(
                        lineno,
                        format!("BOND record needs 4 fields, found {}", f.len()),
                    ));
                }
                let a: i64 = parse_field(lineno, "origin atom id", f[1])?;
                let b: i64 = parse_field(lineno, "target atom id", f[2])?;
                let order = BondOrder::from_mol2(f[3]).ok_or_else(|| {
                    malformed(lineno, format!("unsupported bond type `{}`", f[3]))
                })?;
                raw_bonds.push((lineno, a, b, order));
            }
            Section::None | Section::Other => {}
        }
    }

    if !seen_molecule {
        return Err(malformed(0, "missing @<TRIPOS>MOLECULE block"));
    }
    if !seen_atoms || atoms.is_empty() {
        return Err(malformed(0, "missing or empty @<TRIPOS>ATOM block"));
    }

    let name = molecule_lines.first().map(|s| s.trim()).unwrap_or("");
    if let Some(counts) = molecule_lines.get(1) {
        if let Some(n) = counts.split_whitespace().next() {
            if let Ok(n) = n.parse::<usize>() {
                if n != atoms.len() {
                    return Err(malformed(
                        0,
                        format!("header declares {n} atoms, ATOM block has {}", atoms.len()),
                    ));
                }
            }
        }
    }
    let no_charges = molecule_lines
        .get(3)
        .is_some_and(|c| c.trim().eq_ignore_ascii_case("NO_CHARGES"));
    for atom in &mut atoms {
        atom.formal_charge = if no_charges {
            0
        } else {
            atom.partial_charge.round() as i32
        };
    }

    let n = atoms.len();
    let mut bonds = Vec::with_capacity(raw_bonds.len());
    let mut seen = HashSet::new();
    for (lineno, a, b, order) in raw_bonds {
        let resolve = |id: i64| {
            id_to_index
                .get(&id)
                .copied()
                .ok_or(ChemIoError::DanglingBondIndex {
                    line: lineno,
                    index: id,
                    atom_count: n,
                })
        };
        let (a, b) = (resolve(a)?, resolve(b)?);
        if a == b {
            return Err(malformed(lineno, "bond joins an atom to itself"));
        }
        if !seen.insert((a.min(b), a.max(b))) {
            return Err(malformed(lineno, "duplicate bond"));
        }
        bonds.push(Bond { a, b, order });
    }

    Ok(Molecule {
        id: name.to_string(),
        atoms,
        bonds,
        source_smiles: None,
    })
}

/// Writes the supported subset back out. Coordinates use the shortest
/// representation that parses back to the same `f64`.
pub fn write_mol2(mol: &Molecule) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "@<TRIPOS>MOLECULE");
    let _ = writeln!(out, "{}", mol.id);
    let _ = writeln!(out, " {} {} 1 0 0", mol.atoms.len(), mol.bonds.len());
    let _ = writeln!(out, "SMALL");
    // Formal charges are recovered by rounding the charge column on read.
    let rounding_lies = mol
        .atoms
        .iter()
        .any(|a| a.partial_charge.round() as i32 != a.formal_charge);
    let charge_type = if rounding_lies && mol.atoms.iter().all(|a| a.formal_charge == 0) {
        "NO_CHARGES"
    } else {
        "USER_CHARGES"
    };
    let _ = writeln!(out, "{charge_type}");
    let _ = writeln!(out);
    let _ = writeln!(out, "@<TRIPOS>ATOM");
    for atom in &mol.atoms {
        let [x, y, z] = atom.position;
        let name = if atom.name.is_empty() {
            atom.element.as_str()
        } else {
            atom.name.as_str()
        };
        let _ = writeln!(
            out,
            "{:>7} {:<6} {:?} {:?} {:?} {:<6} 1 UNL1 {:?}",
            atom.index + 1,
            name,
            x,
            y,
            z,
            atom.sybyl_type,
            atom.partial_charge
        );
    }
    let _ = writeln!(out, "@<TRIPOS>BOND");
    for (k, bond) in mol.bonds.iter().enumerate() {
        let _ = writeln!(
            out,
            "{:>6} {:>5} {:>5} {}",
            k + 1,
            bond.a + 1,
            bond.b + 1,
            bond.order
        );
    }
    out
}
