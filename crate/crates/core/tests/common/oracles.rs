#![allow(clippy::needless_range_loop)]

use gmc_core::mpnn::{example_gradient, forward, loss_on_output, Mode, ModelParams};
use gmc_core::{AblationMask, ElementClass, KernelKind, MolGraph, Molecule, WcsParams};

/// Weight of the pair `(i, j)` written from the definition, or 0 when the
/// pair is bonded, too close or masked.
pub fn oracle_weight(
    mol: &Molecule,
    i: usize,
    j: usize,
    params: &WcsParams,
    mask: &AblationMask,
) -> f64 {
    if i == j || mol.bonds.iter().any(|b| b.joins(i, j)) {
        return 0.0;
    }
    let (a, b) = (&mol.atoms[i], &mol.atoms[j]);
    let (ca, cb) = (
        ElementClass::from_element(&a.element),
        ElementClass::from_element(&b.element),
    );
    let (ra, rb) = (params.radii.radius(ca), params.radii.radius(cb));
    let d = ((a.position[0] - b.position[0]).powi(2)
        + (a.position[1] - b.position[1]).powi(2)
        + (a.position[2] - b.position[2]).powi(2))
    .sqrt();
    if d < ra + rb + params.sigma || mask.suppresses(&a.sybyl_type, &b.sybyl_type) {
        return 0.0;
    }
    let eta = params.tau * (ra + rb);
    let x = (d / eta).powf(params.kappa);
    match params.kernel {
        KernelKind::Exponential => (-x).exp(),
        KernelKind::Lorentz => 1.0 / (1.0 + x),
    }
}

/// `[sum, min, max, mean, pop std]` over nonzero weights of atom `i`
/// towards class `partner`.
pub fn oracle_block(
    mol: &Molecule,
    i: usize,
    partner: ElementClass,
    params: &WcsParams,
    mask: &AblationMask,
) -> [f64; 5] {
    let mut w = Vec::new();
    for j in 0..mol.atoms.len() {
        if ElementClass::from_element(&mol.atoms[j].element) != partner {
            continue;
        }
        let x = oracle_weight(mol, i, j, params, mask);
        if x != 0.0 {
            w.push(x);
        }
    }
    if w.is_empty() {
        return [0.0; 5];
    }
    let n = w.len() as f64;
    let sum: f64 = w.iter().sum();
    let mean = sum / n;
    let min = w.iter().cloned().fold(f64::MAX, f64::min);
    let max = w.iter().cloned().fold(f64::MIN, f64::max);
    let var = w.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    [sum, min, max, mean, var.sqrt()]
}

pub const EPS: f64 = 1e-5;
pub const MAX_REL: f64 = 1e-4;
/// Relative-error denominator floor. Central differences at EPS carry
/// roundoff near 1e-10, so entries below the floor are held to an
/// absolute tolerance of MAX_REL · FLOOR.
pub const FLOOR: f64 = 1e-5;

pub fn loss_at(model: &ModelParams, g: &MolGraph) -> f64 {
    let out = forward(model, g, Mode::Eval).unwrap().output;
    loss_on_output(out, g.label.unwrap().value(), model.config.task).0
}

/// Largest relative error between analytic and central-difference
/// gradients over every parameter entry.
pub fn max_relative_error(model: &ModelParams, g: &MolGraph) -> (f64, String) {
    let (_, grads) = example_gradient(model, g, g.label.unwrap().value(), Mode::Eval).unwrap();
    let analytic: Vec<(String, Vec<f64>)> = grads
        .tensors()
        .into_iter()
        .map(|(n, t)| (n, t.iter().copied().collect()))
        .collect();
    let mut worst = (0.0, String::new());
    let mut probe = model.clone();
    for (t, (name, a)) in analytic.iter().enumerate() {
        for k in 0..a.len() {
            let original = probe.tensors_mut()[t].as_slice_mut().unwrap()[k];
            probe.tensors_mut()[t].as_slice_mut().unwrap()[k] = original + EPS;
            let up = loss_at(&probe, g);
            probe.tensors_mut()[t].as_slice_mut().unwrap()[k] = original - EPS;
            let down = loss_at(&probe, g);
            probe.tensors_mut()[t].as_slice_mut().unwrap()[k] = original;
            let numeric = (up - down) / (2.0 * EPS);
            let rel = (a[k] - numeric).abs() / a[k].abs().max(numeric.abs()).max(FLOOR);
            if rel > worst.0 {
                worst = (
                    rel,
                    format!("{name}[{k}] analytic {} numeric {numeric}", a[k]),
                );
            }
        }
    }
    worst
}

/// Concordant pairs plus half the ties, over n₊·n₋.
pub fn auc_oracle(scores: &[f64], labels: &[bool]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, &li) in labels.iter().enumerate() {
        for (j, &lj) in labels.iter().enumerate() {
            if li && !lj {
                den += 1.0;
                if scores[i] > scores[j] {
                    num += 1.0;
                } else if scores[i] == scores[j] {
                    num += 0.5;
                }
            }
        }
    }
    num / den
}
