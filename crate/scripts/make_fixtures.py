#!/usr/bin/env python3
"""Regenerate the MOL2 test corpus under crates/core/tests/fixtures.

Conformers come from RDKit ETKDG + MMFF relaxation with a fixed random seed.
SYBYL atom types are assigned by a small rule set that covers the elements
and environments present in the corpus. Labels are synthetic: a Clark-style
logBB estimate (0.152 * ClogP - 0.0148 * TPSA + 0.139) for regression, and
its sign relative to the corpus median for classification.
"""
import csv
import os
import statistics

from rdkit import Chem
from rdkit.Chem import AllChem, Crippen, rdMolDescriptors

HERE = os.path.dirname(os.path.abspath(__file__))
OUT = os.path.join(HERE, "..", "crates", "core", "tests", "fixtures")

MOLECULES = [
    ("chlorotheophylline", "Clc1nc2c([nH]1)C(=O)N(C)C(=O)N2C"),
    ("benzene", "c1ccccc1"),
    ("toluene", "Cc1ccccc1"),
    ("propane", "CCC"),
    ("ethane", "CC"),
    ("butadiene", "C=CC=C"),
    ("biphenyl", "c1ccc(cc1)-c1ccccc1"),
    ("naphthalene", "c1ccc2ccccc2c1"),
    ("caffeine", "Cn1cnc2c1c(=O)n(C)c(=O)n2C"),
    ("aspirin", "CC(=O)Oc1ccccc1C(=O)O"),
    ("ibuprofen", "CC(C)Cc1ccc(cc1)C(C)C(=O)O"),
    ("paracetamol", "CC(=O)Nc1ccc(O)cc1"),
    ("diazepam", "CN1C(=O)CN=C(c2ccccc2)c2cc(Cl)ccc21"),
    ("nicotine", "CN1CCCC1c1cccnc1"),
    ("propranolol", "CC(C)NCC(O)COc1cccc2ccccc12"),
    ("haloperidol", "OC1(CCN(CCCC(=O)c2ccc(F)cc2)CC1)c1ccc(Cl)cc1"),
    ("chlorpromazine", "CN(C)CCCN1c2ccccc2Sc2ccc(Cl)cc21"),
    ("fluoxetine", "CNCCC(Oc1ccc(cc1)C(F)(F)F)c1ccccc1"),
    ("dopamine", "NCCc1ccc(O)c(O)c1"),
    ("serotonin", "NCCc1c[nH]c2ccc(O)cc12"),
    ("histamine", "NCCc1c[nH]cn1"),
    ("lidocaine", "CCN(CC)CC(=O)Nc1c(C)cccc1C"),
    ("phenytoin", "O=C1NC(=O)C(N1)(c1ccccc1)c1ccccc1"),
    ("carbamazepine", "NC(=O)N1c2ccccc2C=Cc2ccccc21"),
    ("amphetamine", "CC(N)Cc1ccccc1"),
    ("sulfamethoxazole", "Cc1cc(NS(=O)(=O)c2ccc(N)cc2)no1"),
    ("dmso", "CS(C)=O"),
    ("atenolol", "CC(C)NCC(O)COc1ccc(CC(N)=O)cc1"),
    ("metformin", "CN(C)C(=N)NC(N)=N"),
    ("glucose", "OCC1OC(O)C(O)C(O)C1O"),
    ("ethanol", "CCO"),
    ("pyridine", "c1ccncc1"),
    ("thiophene", "c1ccsc1"),
    ("cyclohexane", "C1CCCCC1"),
    ("bromazepam", "O=C1CN=C(c2ccccn2)c2cc(Br)ccc2N1"),
    ("iodobenzene", "Ic1ccccc1"),
    ("tetramethylsilane", "C[Si](C)(C)C"),
    ("trimethylphosphate", "COP(=O)(OC)OC"),
    ("acetonitrile", "CC#N"),
    ("benzamide", "NC(=O)c1ccccc1"),
]


def is_carbonyl_c(atom):
    return atom.GetSymbol() == "C" and any(
        b.GetBondType() == Chem.BondType.DOUBLE and b.GetOtherAtom(atom).GetSymbol() == "O"
        for b in atom.GetBonds())


def is_amide_n(atom):
    return any(is_carbonyl_c(nb) for nb in atom.GetNeighbors())


def sybyl_type(atom):
    sym = atom.GetSymbol()
    hyb = atom.GetHybridization()
    arom = atom.GetIsAromatic()
    if sym == "C":
        if arom:
            return "C.ar"
        if hyb == Chem.HybridizationType.SP:
            return "C.1"
        if hyb == Chem.HybridizationType.SP2:
            return "C.2"
        return "C.3"
    if sym == "N":
        if arom:
            return "N.ar"
        if atom.GetFormalCharge() > 0 and atom.GetDegree() == 4:
            return "N.4"
        if hyb == Chem.HybridizationType.SP:
            return "N.1"
        if any(b.GetBondType() == Chem.BondType.DOUBLE for b in atom.GetBonds()):
            return "N.2"
        if is_amide_n(atom):
            return "N.am"
        if any(nb.GetIsAromatic() or nb.GetHybridization() == Chem.HybridizationType.SP2
               for nb in atom.GetNeighbors()):
            return "N.pl3"
        return "N.3"
    if sym == "O":
        if arom:
            return "O.2"
        if any(b.GetBondType() == Chem.BondType.DOUBLE for b in atom.GetBonds()):
            return "O.2"
        return "O.3"
    if sym == "S":
        n_oxo = sum(1 for b in atom.GetBonds()
                    if b.GetBondType() == Chem.BondType.DOUBLE
                    and b.GetOtherAtom(atom).GetSymbol() == "O")
        if n_oxo == 1:
            return "S.o"
        if n_oxo >= 2:
            return "S.o2"
        return "S.3"
    if sym == "P":
        return "P.3"
    return sym


def bond_code(bond):
    if bond.GetIsAromatic():
        return "ar"
    a, b = bond.GetBeginAtom(), bond.GetEndAtom()
    if bond.GetBondType() == Chem.BondType.SINGLE:
        for x, y in ((a, b), (b, a)):
            if x.GetSymbol() == "N" and not x.GetIsAromatic() and is_carbonyl_c(y):
                return "am"
        return "1"
    return {Chem.BondType.DOUBLE: "2", Chem.BondType.TRIPLE: "3"}[bond.GetBondType()]


def embed(smiles):
    mol = Chem.AddHs(Chem.MolFromSmiles(smiles))
    params = AllChem.ETKDGv3()
    params.randomSeed = 20240601
    if AllChem.EmbedMolecule(mol, params) != 0:
        raise RuntimeError(f"embedding failed for {smiles}")
    AllChem.MMFFOptimizeMolecule(mol, maxIters=2000)
    AllChem.ComputeGasteigerCharges(mol)
    return mol


def write_mol2(name, mol, path):
    conf = mol.GetConformer()
    lines = ["@<TRIPOS>MOLECULE", name,
             f" {mol.GetNumAtoms()} {mol.GetNumBonds()} 1 0 0", "SMALL", "GASTEIGER", "",
             "@<TRIPOS>ATOM"]
    counts = {}
    for atom in mol.GetAtoms():
        sym = atom.GetSymbol()
        counts[sym] = counts.get(sym, 0) + 1
        p = conf.GetAtomPosition(atom.GetIdx())
        q = float(atom.GetProp("_GasteigerCharge"))
        lines.append(f"{atom.GetIdx() + 1:>7} {sym}{counts[sym]:<6} {p.x:>10.4f} {p.y:>10.4f} "
                     f"{p.z:>10.4f} {sybyl_type(atom):<6} 1  UNL1 {q:>10.4f}")
    lines.append("@<TRIPOS>BOND")
    for i, bond in enumerate(mol.GetBonds()):
        lines.append(f"{i + 1:>6} {bond.GetBeginAtomIdx() + 1:>5} {bond.GetEndAtomIdx() + 1:>5} "
                     f"{bond_code(bond)}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def main():
    os.makedirs(os.path.join(OUT, "mol2"), exist_ok=True)
    rows = []
    for name, smiles in MOLECULES:
        mol = embed(smiles)
        write_mol2(name, mol, os.path.join(OUT, "mol2", f"{name}.mol2"))
        heavy = Chem.RemoveHs(mol)
        logbb = 0.152 * Crippen.MolLogP(heavy) - 0.0148 * rdMolDescriptors.CalcTPSA(heavy) + 0.139
        rows.append((name, smiles, round(logbb, 4)))
    cut = statistics.median(r[2] for r in rows)
    with open(os.path.join(OUT, "cls_manifest.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "label", "mol2", "smiles"])
        for name, smiles, logbb in rows:
            w.writerow([name, 1 if logbb > cut else 0, f"{name}.mol2", smiles])
    with open(os.path.join(OUT, "reg_manifest.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "label", "mol2", "smiles"])
        for name, smiles, logbb in rows:
            w.writerow([name, logbb, f"{name}.mol2", smiles])


if __name__ == "__main__":
    main()
