//! CNF formulas: DIMACS parsing, evaluation, conjunction, tensor powers, and
//! XOR-constraint augmentation.
//!
//! Literals use the DIMACS convention: variable indices start at 1 and a
//! negative literal denotes negation. Tautological clauses are rejected at
//! construction so model counts are deterministic functions of the clause
//! list.

use crate::error::{Error, Result};
use rand::seq::SliceRandom;
use rand::Rng;
use std::fmt::Write as _;

/// A formula in conjunctive normal form.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct CnfFormula {
    var_count: usize,
    clauses: Vec<Vec<i32>>,
}

/// One assignment of truth values to all variables of a formula.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Assignment {
    bits: Vec<bool>,
}

impl Assignment {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    /// Assignment from the low bits of `index`; bit i-1 is variable i.
    pub fn from_index(var_count: usize, index: u64) -> Self {
        Self {
            bits: (0..var_count).map(|i| (index >> i) & 1 == 1).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bit(&self, var: usize) -> bool {
        self.bits[var - 1]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }
}

fn validate_clause(var_count: usize, clause: &[i32]) -> Result<()> {
    if clause.is_empty() {
        return Err(Error::InvalidFormula {
            message: "empty clause".into(),
        });
    }
    for &lit in clause {
        let var = lit.unsigned_abs() as usize;
        if lit == 0 || var > var_count {
            return Err(Error::InvalidFormula {
                message: format!("literal {lit} out of range 1..={var_count}"),
            });
        }
        if clause.contains(&-lit) {
            return Err(Error::InvalidFormula {
                message: format!("tautological clause contains both {lit} and {}", -lit),
            });
        }
    }
    Ok(())
}

impl CnfFormula {
    pub fn new(var_count: usize, clauses: Vec<Vec<i32>>) -> Result<Self> {
        if var_count == 0 {
            return Err(Error::InvalidFormula {
                message: "variable count must be positive".into(),
            });
        }
        for clause in &clauses {
            validate_clause(var_count, clause)?;
        }
        Ok(Self { var_count, clauses })
    }

    /// The empty formula on `var_count` variables, satisfied by everything.
    pub fn empty(var_count: usize) -> Result<Self> {
        Self::new(var_count, Vec::new())
    }

    pub fn var_count(&self) -> usize {
        self.var_count
    }

    pub fn clauses(&self) -> &[Vec<i32>] {
        &self.clauses
    }

    pub fn clause_count(&self) -> usize {
        self.clauses.len()
    }

    /// Parse DIMACS CNF: 'c' comment lines, a 'p cnf <vars> <clauses>'
    /// header, then zero-terminated clauses (line breaks are not
    /// significant). The clause count must match the header.
    pub fn parse_dimacs(text: &str) -> Result<Self> {
        let mut header: Option<(usize, usize)> = None;
        let mut clauses: Vec<Vec<i32>> = Vec::new();
        let mut current: Vec<i32> = Vec::new();
        let mut last_line = 0usize;

        for (lineno, line) in text.lines().enumerate() {
            let lineno = lineno + 1;
            last_line = lineno;
            let line = line.trim();
            if line.is_empty() || line.starts_with('c') || line.starts_with('%') {
                continue;
            }
            if line.starts_with('p') {
                if header.is_some() {
                    return Err(Error::Parse {
                        line: lineno,
                        message: "duplicate header".into(),
                    });
                }
                let fields: Vec<&str> = line.split_whitespace().collect();
                if fields.len() != 4 || fields[0] != "p" || fields[1] != "cnf" {
                    return Err(Error::Parse {
                        line: lineno,
                        message: format!("malformed header '{line}'"),
                    });
                }
                let vars = fields[2].parse::<usize>().map_err(|_| Error::Parse {
                    line: lineno,
                    message: format!("bad variable count '{}'", fields[2]),
                })?;
                let count = fields[3].parse::<usize>().map_err(|_| Error::Parse {
                    line: lineno,
                    message: format!("bad clause count '{}'", fields[3]),
                })?;
                if vars == 0 {
                    return Err(Error::Parse {
                        line: lineno,
                        message: "variable count must be positive".into(),
                    });
                }
                header = Some((vars, count));
                continue;
            }
            let (vars, _) = header.ok_or(Error::Parse {
                line: lineno,
                message: "clause before header".into(),
            })?;
            for tok in line.split_whitespace() {
                let lit = tok.parse::<i32>().map_err(|_| Error::Parse {
                    line: lineno,
                    message: format!("bad literal '{tok}'"),
                })?;
                if lit == 0 {
                    validate_clause(vars, &current).map_err(|e| Error::Parse {
                        line: lineno,
                        message: e.to_string(),
                    })?;
                    clauses.push(std::mem::take(&mut current));
                } else {
                    current.push(lit);
                }
            }
        }

        let (vars, declared) = header.ok_or(Error::Parse {
            line: last_line,
            message: "missing header".into(),
        })?;
        if !current.is_empty() {
            return Err(Error::Parse {
                line: last_line,
                message: "unterminated clause at end of input".into(),
            });
        }
        if clauses.len() != declared {
            return Err(Error::Parse {
                line: last_line,
                message: format!(
                    "header declares {declared} clauses but {} were provided",
                    clauses.len()
                ),
            });
        }
        Self::new(vars, clauses)
    }

    /// Canonical serializer: header, then clauses one per line,
    /// zero-terminated.
    pub fn to_dimacs(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "p cnf {} {}", self.var_count, self.clauses.len());
        for clause in &self.clauses {
            for lit in clause {
                let _ = write!(out, "{lit} ");
            }
            let _ = writeln!(out, "0");
        }
        out
    }

    /// 1 iff every clause has a satisfied literal.
    pub fn evaluate(&self, a: &Assignment) -> Result<bool> {
        if a.len() != self.var_count {
            return Err(Error::Arity {
                message: format!(
                    "assignment has {} bits, formula has {} variables",
                    a.len(),
                    self.var_count
                ),
            });
        }
        Ok(self.clauses.iter().all(|clause| {
            clause.iter().any(|&lit| {
                let v = a.bit(lit.unsigned_abs() as usize);
                if lit > 0 {
                    v
                } else {
                    !v
                }
            })
        }))
    }

    /// Clause union; the satisfying set is the intersection.
    pub fn conjoin(&self, other: &CnfFormula) -> Result<CnfFormula> {
        if self.var_count != other.var_count {
            return Err(Error::Arity {
                message: format!(
                    "conjoin needs equal variable counts ({} vs {})",
                    self.var_count, other.var_count
                ),
            });
        }
        let mut clauses = self.clauses.clone();
        clauses.extend(other.clauses.iter().cloned());
        Ok(CnfFormula {
            var_count: self.var_count,
            clauses,
        })
    }

    /// `t` disjoint copies of the formula; the model count of the result is
    /// count(self)^t. Copy j (0-based) uses variables shifted by
    /// j * var_count. Errors if the result would exceed `var_budget`
    /// variables.
    pub fn tensor_power(&self, t: usize, var_budget: usize) -> Result<CnfFormula> {
        if t == 0 {
            return Err(Error::InvalidFormula {
                message: "tensor power must be positive".into(),
            });
        }
        let total = self.var_count * t;
        if total > var_budget {
            return Err(Error::ResourceLimit {
                message: format!(
                    "tensor power {t} needs {total} variables, budget is {var_budget}"
                ),
            });
        }
        let mut clauses = Vec::with_capacity(self.clauses.len() * t);
        for copy in 0..t {
            let shift = (copy * self.var_count) as i32;
            for clause in &self.clauses {
                clauses.push(
                    clause
                        .iter()
                        .map(|&lit| if lit > 0 { lit + shift } else { lit - shift })
                        .collect(),
                );
            }
        }
        Ok(CnfFormula {
            var_count: total,
            clauses,
        })
    }

    /// Encode parity constraints into CNF with chained auxiliary variables.
    ///
    /// Auxiliary variables are appended after all original variables and are
    /// functionally determined by them, so the model count over the full
    /// variable set equals the count of original-variable models satisfying
    /// every constraint.
    pub fn add_xor_constraints(&self, constraints: &[XorConstraint]) -> CnfFormula {
        let mut clauses = self.clauses.clone();
        let mut next_var = self.var_count;
        for c in constraints {
            assert!(
                c.variables.iter().all(|&v| v >= 1 && v <= self.var_count),
                "constraint variable out of formula range"
            );
            encode_parity(&c.variables, c.parity, &mut next_var, &mut clauses);
        }
        CnfFormula {
            var_count: next_var,
            clauses,
        }
    }

    /// Random k-CNF: each clause picks `k` distinct variables with uniform
    /// signs. Distinct variables per clause rule out tautologies.
    pub fn random_ksat(k: usize, var_count: usize, clause_count: usize, rng: &mut impl Rng) -> Self {
        assert!(k >= 1 && k <= var_count);
        let vars: Vec<i32> = (1..=var_count as i32).collect();
        let clauses = (0..clause_count)
            .map(|_| {
                let mut picked: Vec<i32> = vars
                    .choose_multiple(rng, k)
                    .map(|&v| if rng.gen::<bool>() { v } else { -v })
                    .collect();
                picked.sort_by_key(|l| l.abs());
                picked
            })
            .collect();
        CnfFormula {
            var_count,
            clauses,
        }
    }
}

/// parity(vars) == parity bit, encoded over `clauses` with fresh auxiliaries.
fn encode_parity(vars: &[usize], parity: bool, next_var: &mut usize, clauses: &mut Vec<Vec<i32>>) {
    match vars.len() {
        0 => {
            if parity {
                // unsatisfiable: x1 and not x1
                clauses.push(vec![1]);
                clauses.push(vec![-1]);
            }
        }
        1 => {
            let v = vars[0] as i32;
            clauses.push(vec![if parity { v } else { -v }]);
        }
        _ => {
            // chain: acc = v1 xor v2, acc = acc xor v3, ...; assert final acc == parity
            let mut acc = vars[0] as i32;
            for &v in &vars[1..vars.len() - 1] {
                *next_var += 1;
                let fresh = *next_var as i32;
                xor_equals(acc, v as i32, fresh, clauses);
                acc = fresh;
            }
            let last = vars[vars.len() - 1] as i32;
            // acc xor last == parity
            if parity {
                clauses.push(vec![acc, last]);
                clauses.push(vec![-acc, -last]);
            } else {
                clauses.push(vec![acc, -last]);
                clauses.push(vec![-acc, last]);
            }
        }
    }
}

/// z <-> (a xor b), four clauses.
fn xor_equals(a: i32, b: i32, z: i32, clauses: &mut Vec<Vec<i32>>) {
    clauses.push(vec![-a, -b, -z]);
    clauses.push(vec![a, b, -z]);
    clauses.push(vec![-a, b, z]);
    clauses.push(vec![a, -b, z]);
}

/// A parity constraint over a subset of variables: xor of the subset must
/// equal the parity bit. These are the random vectors of the pairwise
/// independent hash family used for approximate counting.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct XorConstraint {
    variables: Vec<usize>, // sorted, 1-based
    parity: bool,
}

impl XorConstraint {
    pub fn new(mut variables: Vec<usize>, parity: bool) -> Self {
        variables.sort_unstable();
        variables.dedup();
        Self { variables, parity }
    }

    /// Uniform draw from the hash family: each variable joins the subset
    /// independently with probability 1/2, and the parity bit is uniform.
    pub fn random(var_count: usize, rng: &mut impl Rng) -> Self {
        let variables = (1..=var_count).filter(|_| rng.gen::<bool>()).collect();
        Self {
            variables,
            parity: rng.gen(),
        }
    }

    pub fn variables(&self) -> &[usize] {
        &self.variables
    }

    pub fn parity(&self) -> bool {
        self.parity
    }

    /// Whether the assignment satisfies the parity constraint.
    pub fn satisfied_by(&self, a: &Assignment) -> bool {
        let mut acc = false;
        for &v in &self.variables {
            acc ^= a.bit(v);
        }
        acc == self.parity
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::count_exact;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn parse_simple_formula() {
        let f = CnfFormula::parse_dimacs("p cnf 2 1\n1 2 0\n").unwrap();
        assert_eq!(f.var_count(), 2);
        assert_eq!(f.clauses(), &[vec![1, 2]]);
    }

    #[test]
    fn parse_empty_formula() {
        let f = CnfFormula::parse_dimacs("p cnf 1 0\n").unwrap();
        assert_eq!(f.var_count(), 1);
        assert!(f.clauses().is_empty());
        // satisfied by all assignments
        for idx in 0..2 {
            assert!(f.evaluate(&Assignment::from_index(1, idx)).unwrap());
        }
    }

    #[test]
    fn parse_clause_count_mismatch() {
        let err = CnfFormula::parse_dimacs("p cnf 2 2\n1 2 0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { .. }), "{err}");
    }

    #[test]
    fn parse_reports_line_numbers() {
        let err = CnfFormula::parse_dimacs("c comment\np cnf 2 1\n1 3 0\n").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn parse_rejects_tautology() {
        let err = CnfFormula::parse_dimacs("p cnf 2 1\n1 -1 0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
    }

    #[test]
    fn parse_rejects_malformed_header() {
        assert!(CnfFormula::parse_dimacs("p dnf 2 1\n1 0\n").is_err());
        assert!(CnfFormula::parse_dimacs("p cnf two 1\n1 0\n").is_err());
        assert!(CnfFormula::parse_dimacs("1 2 0\n").is_err());
    }

    #[test]
    fn evaluate_examples() {
        let f = CnfFormula::new(2, vec![vec![1, 2]]).unwrap();
        assert!(!f.evaluate(&Assignment::new(vec![false, false])).unwrap());
        let g = CnfFormula::new(2, vec![vec![1, 2], vec![-1]]).unwrap();
        assert!(g.evaluate(&Assignment::new(vec![false, true])).unwrap());
        assert!(matches!(
            f.evaluate(&Assignment::new(vec![false])),
            Err(Error::Arity { .. })
        ));
    }

    #[test]
    fn conjoin_with_empty_is_identity() {
        let f = CnfFormula::new(3, vec![vec![1, -2], vec![3]]).unwrap();
        let e = CnfFormula::empty(3).unwrap();
        let c = f.conjoin(&e).unwrap();
        assert_eq!(c.clauses(), f.clauses());
        assert_eq!(count_exact(&c).unwrap(), count_exact(&f).unwrap());
    }

    #[test]
    fn conjoin_contradiction_is_unsat() {
        let f = CnfFormula::new(1, vec![vec![1]]).unwrap();
        let g = CnfFormula::new(1, vec![vec![-1]]).unwrap();
        assert_eq!(count_exact(&f.conjoin(&g).unwrap()).unwrap(), 0);
    }

    #[test]
    fn conjoin_count_is_intersection_count() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for _ in 0..30 {
            let n = rng.gen_range(4..=10);
            let f = CnfFormula::random_ksat(3, n, rng.gen_range(2..=3 * n), &mut rng);
            let h = CnfFormula::random_ksat(3, n, rng.gen_range(2..=3 * n), &mut rng);
            let both = f.conjoin(&h).unwrap();
            let expected = (0..1u64 << n)
                .filter(|&idx| {
                    let a = Assignment::from_index(n, idx);
                    f.evaluate(&a).unwrap() && h.evaluate(&a).unwrap()
                })
                .count() as u64;
            assert_eq!(count_exact(&both).unwrap(), expected);
        }
    }

    #[test]
    fn tensor_power_identity_and_counts() {
        let f = CnfFormula::new(1, vec![vec![1]]).unwrap();
        assert_eq!(f.tensor_power(1, 40).unwrap(), f);
        let cubed = f.tensor_power(3, 40).unwrap();
        assert_eq!(cubed.var_count(), 3);
        assert_eq!(count_exact(&cubed).unwrap(), 1);
        assert!(matches!(
            f.tensor_power(100, 40),
            Err(Error::ResourceLimit { .. })
        ));
    }

    #[test]
    fn tensor_power_squares_model_count() {
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        for _ in 0..10 {
            let f = CnfFormula::random_ksat(3, 8, rng.gen_range(4..=24), &mut rng);
            let c = count_exact(&f).unwrap();
            let squared = f.tensor_power(2, 40).unwrap();
            assert_eq!(count_exact(&squared).unwrap(), c * c);
        }
    }

    #[test]
    fn xor_constraints_empty_list_is_identity() {
        let f = CnfFormula::new(2, vec![vec![1, 2]]).unwrap();
        assert_eq!(f.add_xor_constraints(&[]), f);
    }

    #[test]
    fn xor_pair_constraint_keeps_two_models() {
        let f = CnfFormula::empty(2).unwrap();
        let g = f.add_xor_constraints(&[XorConstraint::new(vec![1, 2], false)]);
        // models over the original two variables: (0,0) and (1,1)
        assert_eq!(count_exact(&g).unwrap(), 2);
    }

    #[test]
    fn xor_encoding_matches_semantics_exhaustively() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        for _ in 0..40 {
            let n = rng.gen_range(2..=7);
            let f = CnfFormula::random_ksat(2, n, rng.gen_range(0..=n), &mut rng);
            let c = XorConstraint::random(n, &mut rng);
            let g = f.add_xor_constraints(std::slice::from_ref(&c));
            let expected = (0..1u64 << n)
                .filter(|&idx| {
                    let a = Assignment::from_index(n, idx);
                    f.evaluate(&a).unwrap() && c.satisfied_by(&a)
                })
                .count() as u64;
            assert_eq!(count_exact(&g).unwrap(), expected, "constraint {c:?}");
        }
    }

    #[test]
    fn empty_subset_constraints() {
        let f = CnfFormula::empty(2).unwrap();
        let even = f.add_xor_constraints(&[XorConstraint::new(vec![], false)]);
        assert_eq!(count_exact(&even).unwrap(), 4);
        let odd = f.add_xor_constraints(&[XorConstraint::new(vec![], true)]);
        assert_eq!(count_exact(&odd).unwrap(), 0);
    }

    #[test]
    fn xor_constraint_halves_count_on_average() {
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        let f = CnfFormula::random_ksat(3, 10, 12, &mut rng);
        let base = count_exact(&f).unwrap();
        assert!(base > 0, "fixture must be satisfiable");
        let mut total = 0u64;
        let draws = 200;
        for _ in 0..draws {
            let c = XorConstraint::random(10, &mut rng);
            total += count_exact(&f.add_xor_constraints(&[c])).unwrap();
        }
        let mean = total as f64 / draws as f64;
        let target = base as f64 / 2.0;
        assert!(
            (mean - target).abs() / target < 0.10,
            "mean constrained count {mean} vs target {target}"
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn dimacs_round_trip(seed in any::<u64>()) {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let n = rng.gen_range(1..=12);
            let k = rng.gen_range(1..=n.min(4));
            let f = CnfFormula::random_ksat(k, n, rng.gen_range(0..=20), &mut rng);
            let reparsed = CnfFormula::parse_dimacs(&f.to_dimacs()).unwrap();
            prop_assert_eq!(reparsed, f);
        }
    }
}
