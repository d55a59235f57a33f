//! Construction of the moment-matrix semidefinite relaxation for one
//! quadrature node of the entropy bound.
//!
//! The relaxation minimizes a linear functional of unknown moments subject
//! to the moment matrix F0 + sum_k y_k E_k being positive semidefinite,
//! where F0 carries the entries fixed by the observed behavior and each E_k
//! is the 0/1 indicator of the positions sharing unknown moment y_k.

use super::algebra::{self, canonical, entry_word, normal_form, word_name, Word};
use crate::error::{Error, Result};
use crate::photonic::Behavior;
use nalgebra::DMatrix;
use std::collections::{BTreeMap, HashSet};

/// One SDP block of the entropy bound: quadrature node `t`, the Alice
/// outcomes whose Eve operators live in this block, and the preprocessing
/// flip probability entering through Alice's effective key POVM.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSpec {
    pub t: f64,
    pub outcomes: Vec<usize>,
    pub q: f64,
    /// Alice input used for key generation (0 or 1).
    pub x_key: usize,
    /// Augment the level-2 basis with the third-order ABZ and A Z*Z words.
    pub extras: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemMeta {
    pub t: f64,
    pub q: f64,
    pub x_key: usize,
    pub outcomes: Vec<usize>,
    pub y_set: Vec<usize>,
    pub level: String,
}

/// A dense moment-matrix SDP: minimize c.y subject to
/// F0 + sum_k y_k E_k >= 0 (PSD), with E_k given by `var_entries`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentProblem {
    pub basis: Vec<Word>,
    pub f0: DMatrix<f64>,
    /// Upper-triangle (i <= j) positions carrying each unknown moment.
    pub var_entries: Vec<Vec<(usize, usize)>>,
    /// Canonical word of each unknown moment, for diagnostics/export.
    pub var_words: Vec<Word>,
    pub c: Vec<f64>,
    pub obj_const: f64,
    pub meta: ProblemMeta,
}

impl MomentProblem {
    pub fn n(&self) -> usize {
        self.basis.len()
    }

    pub fn num_vars(&self) -> usize {
        self.var_entries.len()
    }

    /// Evaluate F0 + sum y_k E_k.
    pub fn matrix_at(&self, y: &[f64]) -> DMatrix<f64> {
        let mut m = self.f0.clone();
        for (k, entries) in self.var_entries.iter().enumerate() {
            for &(i, j) in entries {
                m[(i, j)] += y[k];
                if i != j {
                    m[(j, i)] += y[k];
                }
            }
        }
        m
    }
}

/// NPA level-2 monomial basis over the block's letters, augmented with the
/// third-order ABZ and A Z*Z words.
fn block_basis(outcomes: &[usize], extras: bool) -> Vec<Word> {
    let alice = [algebra::A0, algebra::A1];
    let bob = [algebra::B0, algebra::B1, algebra::B2];
    let eve: Vec<u8> = outcomes
        .iter()
        .flat_map(|&c| [algebra::z(c), algebra::z_dag(c)])
        .collect();
    let letters: Vec<u8> = alice.iter().chain(bob.iter()).chain(eve.iter()).copied().collect();

    let mut seen: HashSet<Word> = HashSet::new();
    let mut basis: Vec<Word> = Vec::new();
    let push = |w: Word, seen: &mut HashSet<Word>, basis: &mut Vec<Word>| {
        if seen.insert(w.clone()) {
            basis.push(w);
        }
    };
    push(Vec::new(), &mut seen, &mut basis);
    for &l in &letters {
        push(vec![l], &mut seen, &mut basis);
    }
    for &u in &letters {
        for &v in &letters {
            let nf = normal_form(&[u, v]);
            if nf.len() == 2 {
                push(nf, &mut seen, &mut basis);
            }
        }
    }
    if extras {
        for &a in &alice {
            for &b in &bob {
                for &e in &eve {
                    push(normal_form(&[a, b, e]), &mut seen, &mut basis);
                }
            }
        }
        for &a in &alice {
            for &c in outcomes {
                push(normal_form(&[a, algebra::z_dag(c), algebra::z(c)]), &mut seen, &mut basis);
                push(normal_form(&[a, algebra::z(c), algebra::z_dag(c)]), &mut seen, &mut basis);
            }
        }
    }
    basis
}

/// Moment value fixed by the behavior, if any. Only pure measurement words
/// up to one Alice and one Bob projector are pinned; joint cells outside the
/// constrained y-set stay free.
fn known_moment(word: &[u8], b: &Behavior, y_set: &[usize]) -> Option<f64> {
    if word.iter().any(|&l| l >= 5) {
        return None;
    }
    match word {
        [] => Some(1.0),
        [a] if *a < 2 => Some(b.marginal_a(0, *a as usize)),
        [y] => Some(b.marginal_b(0, (*y - 2) as usize)),
        [a, y] if *a < 2 && *y >= 2 => {
            let yy = (*y - 2) as usize;
            if y_set.contains(&yy) {
                Some(b.prob(0, 0, *a as usize, yy))
            } else {
                None
            }
        }
        _ => None,
    }
}

/// Build the moment problem of one block. The objective realizes
/// <M_c (Z_c + Z_c* + (1-t) Z_c* Z_c) + t Z_c Z_c*> summed over the block's
/// outcomes, with Alice's key POVM mixed by the flip probability q.
pub fn build_block(b: &Behavior, spec: &BlockSpec, y_set: &[usize]) -> Result<MomentProblem> {
    if spec.x_key >= 2 {
        return Err(Error::domain(format!("x_key = {} out of range", spec.x_key)));
    }
    if !(0.0 < spec.t && spec.t <= 1.0) {
        return Err(Error::domain(format!("quadrature node t = {} outside (0,1]", spec.t)));
    }
    if !(0.0..=0.5).contains(&spec.q) {
        return Err(Error::domain(format!("q = {} outside [0,0.5]", spec.q)));
    }
    if spec.outcomes.is_empty() || spec.outcomes.iter().any(|&c| c >= 2) {
        return Err(Error::domain("block outcomes must be a nonempty subset of {0,1}"));
    }
    b.validate(1e-7)
        .map_err(|e| Error::Constraint(format!("behavior rejected: {e}")))?;

    let basis = block_basis(&spec.outcomes, spec.extras);
    let n = basis.len();
    let mut f0 = DMatrix::zeros(n, n);
    let mut var_index: BTreeMap<Word, usize> = BTreeMap::new();
    let mut var_entries: Vec<Vec<(usize, usize)>> = Vec::new();
    let mut var_words: Vec<Word> = Vec::new();
    for i in 0..n {
        for j in i..n {
            let word = entry_word(&basis[i], &basis[j]);
            let key = canonical(&word);
            if let Some(v) = known_moment(&key, b, y_set) {
                f0[(i, j)] = v;
                f0[(j, i)] = v;
            } else {
                let k = *var_index.entry(key.clone()).or_insert_with(|| {
                    var_entries.push(Vec::new());
                    var_words.push(key.clone());
                    var_entries.len() - 1
                });
                var_entries[k].push((i, j));
            }
        }
    }

    let mut c = vec![0.0; var_entries.len()];
    let mut obj_const = 0.0;
    let a_key = if spec.x_key == 0 { algebra::A0 } else { algebra::A1 };
    let add_term = |word: Vec<u8>, coeff: f64, c: &mut Vec<f64>, obj_const: &mut f64| {
        if coeff == 0.0 {
            return;
        }
        let key = canonical(&word);
        if let Some(v) = known_moment(&key, b, y_set) {
            *obj_const += coeff * v;
        } else {
            let k = *var_index
                .get(&key)
                .expect("objective word must appear in the moment matrix");
            c[k] += coeff;
        }
    };
    for &cc in &spec.outcomes {
        // effective key POVM element: alpha I + beta A_key
        let (alpha, beta) = if cc == 0 {
            (spec.q, 1.0 - 2.0 * spec.q)
        } else {
            (1.0 - spec.q, -(1.0 - 2.0 * spec.q))
        };
        let zl = algebra::z(cc);
        let zd = algebra::z_dag(cc);
        for (word, w_alpha) in [
            (vec![zl], 1.0),
            (vec![zd], 1.0),
            (vec![zd, zl], 1.0 - spec.t),
        ] {
            add_term(word.clone(), alpha * w_alpha, &mut c, &mut obj_const);
            let mut aw = vec![a_key];
            aw.extend_from_slice(&word);
            add_term(aw, beta * w_alpha, &mut c, &mut obj_const);
        }
        add_term(vec![zl, zd], spec.t, &mut c, &mut obj_const);
    }

    Ok(MomentProblem {
        basis,
        f0,
        var_entries,
        var_words,
        c,
        obj_const,
        meta: ProblemMeta {
            t: spec.t,
            q: spec.q,
            x_key: spec.x_key,
            outcomes: spec.outcomes.clone(),
            y_set: y_set.to_vec(),
            level: if spec.extras { "2+ABZ+AZ*Z" } else { "2" }.to_string(),
        },
    })
}

/// Human-readable listing of the basis, for export headers.
pub fn basis_names(p: &MomentProblem) -> Vec<String> {
    p.basis.iter().map(|w| word_name(w)).collect()
}
