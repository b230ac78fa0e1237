//! Removal of isolated ions from dot-separated SMILES.
//!
//! Only heavy atoms are counted, using a minimal tokenizer: bracket atoms,
//! the two-letter organic symbols `Cl`/`Br`, and the one-letter organic and
//! aromatic symbols. Bonds, branches and ring closures are skipped.

use super::ChemIoError;
use crate::elements;

/// Number of non-hydrogen atoms in one SMILES fragment.
pub fn heavy_atom_count(fragment: &str) -> usize {
    let chars: Vec<char> = fragment.chars().collect();
    let mut count = 0;
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c == '[' {
            let close = chars[i..]
                .iter()
                .position(|&c| c == ']')
                .map(|p| i + p)
                .unwrap_or(chars.len());
            if bracket_is_heavy(&chars[i + 1..close]) {
                count += 1;
            }
            i = close + 1;
            continue;
        }
        if (c == 'C' && chars.get(i + 1) == Some(&'l'))
            || (c == 'B' && chars.get(i + 1) == Some(&'r'))
        {
            count += 1;
            i += 2;
            continue;
        }
        if matches!(
            c,
            'B' | 'C' | 'N' | 'O' | 'P' | 'S' | 'F' | 'I' | 'b' | 'c' | 'n' | 'o' | 'p' | 's'
        ) {
            count += 1;
        }
        i += 1;
    }
    count
}

fn bracket_is_heavy(body: &[char]) -> bool {
    let rest: Vec<char> = body
        .iter()
        .copied()
        .skip_while(|c| c.is_ascii_digit())
        .collect();
    let Some(&first) = rest.first() else {
        return false;
    };
    if !first.is_ascii_alphabetic() {
        return false;
    }
    if first.is_ascii_lowercase() {
        // aromatic bracket atom: [nH], [se], [te]
        return true;
    }
    let symbol = match rest.get(1) {
        Some(&second) if second.is_ascii_lowercase() => {
            let two: String = [first, second].iter().collect();
            if elements::atomic_number(&two).is_some() {
                two
            } else {
                first.to_string()
            }
        }
        _ => first.to_string(),
    };
    symbol != "H"
}

/// Drops fragments with at most one heavy atom (`[Na+]`, `[Cl-]`, `[H+]`,
/// `O`) and rejoins the rest in their original order.
pub fn clean_smiles(smiles: &str) -> Result<String, ChemIoError> {
    if !smiles.contains('.') {
        return Ok(smiles.to_string());
    }
    let kept: Vec<&str> = smiles
        .split('.')
        .filter(|frag| heavy_atom_count(frag) > 1)
        .collect();
    if kept.is_empty() {
        return Err(ChemIoError::EmptyAfterCleaning(smiles.to_string()));
    }
    Ok(kept.join("."))
}
