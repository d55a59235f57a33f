//! Word algebra of the measurement/Eve operators used by the moment-matrix
//! relaxation.
//!
//! Letters: Alice projectors A0, A1 (the +1-outcome projector per input),
//! Bob projectors B0, B1, B2, and Eve operators Z_c with adjoints, one pair
//! per Alice outcome c. Operators of different parties commute; projectors
//! are idempotent; Eve's operators satisfy no relations among themselves.
//! Words are kept in a party-sorted normal form, and a moment variable is
//! identified with its adjoint (the relaxation uses a real representation).

/// A letter of the operator alphabet.
pub type Letter = u8;

pub const A0: Letter = 0;
pub const A1: Letter = 1;
pub const B0: Letter = 2;
pub const B1: Letter = 3;
pub const B2: Letter = 4;

/// Z operator of Alice-outcome `c`.
pub fn z(c: usize) -> Letter {
    5 + 2 * c as Letter
}

/// Adjoint Z operator of Alice-outcome `c`.
pub fn z_dag(c: usize) -> Letter {
    6 + 2 * c as Letter
}

fn party(l: Letter) -> u8 {
    match l {
        0..=1 => 0,
        2..=4 => 1,
        _ => 2,
    }
}

fn is_projector(l: Letter) -> bool {
    l < 5
}

fn adjoint_letter(l: Letter) -> Letter {
    if is_projector(l) {
        l
    } else if (l - 5) % 2 == 0 {
        l + 1
    } else {
        l - 1
    }
}

/// An operator word in normal form (party-sorted, idempotents collapsed).
pub type Word = Vec<Letter>;

/// Reduce a word to its normal form: stable-sort letters by party (letters
/// of different parties commute, order within a party is preserved), then
/// collapse adjacent repeated projectors.
pub fn normal_form(word: &[Letter]) -> Word {
    let mut w: Word = word.to_vec();
    // stable bubble sort swapping only commuting (cross-party) pairs
    let mut changed = true;
    while changed {
        changed = false;
        for i in 0..w.len().saturating_sub(1) {
            if party(w[i]) > party(w[i + 1]) {
                w.swap(i, i + 1);
                changed = true;
            }
        }
    }
    // idempotence of projectors
    let mut out: Word = Vec::with_capacity(w.len());
    for l in w {
        if is_projector(l) && out.last() == Some(&l) {
            continue;
        }
        out.push(l);
    }
    out
}

/// Adjoint of a word (reverse order, adjoint letters), in normal form.
pub fn adjoint(word: &[Letter]) -> Word {
    let rev: Word = word.iter().rev().map(|&l| adjoint_letter(l)).collect();
    normal_form(&rev)
}

/// Product u^dagger * v in normal form: the moment-matrix entry word.
pub fn entry_word(u: &[Letter], v: &[Letter]) -> Word {
    let mut w = adjoint(u);
    w.extend_from_slice(v);
    normal_form(&w)
}

/// Canonical key of a moment: a word and its adjoint carry the same real
/// moment variable, so the lexicographically smaller normal form is used.
pub fn canonical(word: &[Letter]) -> Word {
    let nf = normal_form(word);
    let adj = adjoint(&nf);
    if adj < nf {
        adj
    } else {
        nf
    }
}

/// Pretty-print a word for diagnostics and export headers.
pub fn word_name(word: &[Letter]) -> String {
    if word.is_empty() {
        return "I".to_string();
    }
    word.iter()
        .map(|&l| match l {
            0 => "A0".to_string(),
            1 => "A1".to_string(),
            2 => "B0".to_string(),
            3 => "B1".to_string(),
            4 => "B2".to_string(),
            l => {
                let c = (l - 5) / 2;
                if (l - 5) % 2 == 0 {
                    format!("Z{c}")
                } else {
                    format!("Z{c}*")
                }
            }
        })
        .collect::<Vec<_>>()
        .join(".")
}
