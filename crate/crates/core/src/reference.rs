//! Slow reference implementations used to cross-check the fast paths.
//! These stay deliberately naive and share no code with what they verify.

use crate::cnf::{Assignment, CnfFormula};
use crate::field::{FieldElement, FieldMatrix};

/// Permanent by direct expansion over all n! permutations. Exponential in a
/// worse way than Ryser; intended for n <= 8.
pub fn permanent_expansion(a: &FieldMatrix) -> FieldElement {
    let n = a.dimension();
    let mut cols: Vec<usize> = (0..n).collect();
    let mut total = FieldElement::zero(a.modulus());
    permute(&mut cols, 0, a, &mut total);
    total
}

fn permute(cols: &mut Vec<usize>, row: usize, a: &FieldMatrix, total: &mut FieldElement) {
    let n = cols.len();
    if row == n {
        let mut prod = FieldElement::one(a.modulus());
        for (i, &j) in cols.iter().enumerate() {
            prod = prod.mul(&a.get(i, j));
        }
        *total = total.add(&prod);
        return;
    }
    for k in row..n {
        cols.swap(row, k);
        permute(cols, row + 1, a, total);
        cols.swap(row, k);
    }
}

/// Model count by evaluating the formula on every assignment through the
/// public evaluator.
pub fn count_by_evaluation(f: &CnfFormula) -> u64 {
    let n = f.var_count();
    assert!(n <= 24, "reference counter is for small formulas");
    (0..1u64 << n)
        .filter(|&idx| f.evaluate(&Assignment::from_index(n, idx)).unwrap())
        .count() as u64
}
