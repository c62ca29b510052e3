//! A deterministic DPLL SAT solver with two-watched-literal unit propagation.
//!
//! Branching always picks the lowest-index unassigned variable and tries
//! false first, so the model returned for a satisfiable formula is a fixed
//! function of the formula. No clause learning; reproducibility matters more
//! than speed at the sizes this crate handles.

use crate::cnf::CnfFormula;

// literal code: variable v (0-based) as 2v for positive, 2v+1 for negated
#[inline]
fn code(lit: i32) -> usize {
    let v = (lit.unsigned_abs() as usize) - 1;
    if lit > 0 {
        2 * v
    } else {
        2 * v + 1
    }
}

#[inline]
fn negate(code: usize) -> usize {
    code ^ 1
}

struct Clause {
    lits: Vec<usize>,
}

struct Decision {
    var: usize,
    trail_len: usize,
    flipped: bool,
}

pub struct Solver {
    nvars: usize,
    clauses: Vec<Clause>,
    watches: Vec<Vec<usize>>, // literal code -> clause indices watching it
    assign: Vec<Option<bool>>,
    trail: Vec<usize>, // literal codes made true, in order
    qhead: usize,
    decisions: Vec<Decision>,
    root_conflict: bool,
}

impl Solver {
    pub fn new(formula: &CnfFormula) -> Self {
        let nvars = formula.var_count();
        let mut solver = Solver {
            nvars,
            clauses: Vec::with_capacity(formula.clause_count()),
            watches: vec![Vec::new(); 2 * nvars],
            assign: vec![None; nvars],
            trail: Vec::with_capacity(nvars),
            qhead: 0,
            decisions: Vec::new(),
            root_conflict: false,
        };
        for clause in formula.clauses() {
            let mut lits: Vec<usize> = clause.iter().map(|&l| code(l)).collect();
            lits.sort_unstable();
            lits.dedup();
            if lits.len() == 1 {
                if !solver.enqueue(lits[0]) {
                    solver.root_conflict = true;
                }
                continue;
            }
            let idx = solver.clauses.len();
            solver.watches[lits[0]].push(idx);
            solver.watches[lits[1]].push(idx);
            solver.clauses.push(Clause { lits });
        }
        solver
    }

    #[inline]
    fn value(&self, lit: usize) -> Option<bool> {
        self.assign[lit >> 1].map(|b| if lit & 1 == 0 { b } else { !b })
    }

    /// Make `lit` true. Returns false on an immediate contradiction.
    fn enqueue(&mut self, lit: usize) -> bool {
        match self.value(lit) {
            Some(true) => true,
            Some(false) => false,
            None => {
                self.assign[lit >> 1] = Some(lit & 1 == 0);
                self.trail.push(lit);
                true
            }
        }
    }

    /// Propagate until fixpoint. Returns false on conflict.
    fn propagate(&mut self) -> bool {
        while self.qhead < self.trail.len() {
            let lit = self.trail[self.qhead];
            self.qhead += 1;
            let falsified = negate(lit);
            let mut i = 0;
            'clause: while i < self.watches[falsified].len() {
                let ci = self.watches[falsified][i];
                // make lits[1] the falsified watch
                if self.clauses[ci].lits[0] == falsified {
                    self.clauses[ci].lits.swap(0, 1);
                }
                let first = self.clauses[ci].lits[0];
                if self.value(first) == Some(true) {
                    i += 1;
                    continue;
                }
                // look for a replacement watch
                for k in 2..self.clauses[ci].lits.len() {
                    let cand = self.clauses[ci].lits[k];
                    if self.value(cand) != Some(false) {
                        self.clauses[ci].lits.swap(1, k);
                        self.watches[falsified].swap_remove(i);
                        self.watches[cand].push(ci);
                        continue 'clause;
                    }
                }
                // clause is unit (or conflicting) on its first watch
                if !self.enqueue(first) {
                    return false;
                }
                i += 1;
            }
        }
        true
    }

    fn undo_to(&mut self, trail_len: usize) {
        while self.trail.len() > trail_len {
            let lit = self.trail.pop().unwrap();
            self.assign[lit >> 1] = None;
        }
        self.qhead = trail_len;
    }

    /// Lowest unassigned variable at or after `from`, if any.
    fn next_unassigned(&self, from: usize) -> Option<usize> {
        (from..self.nvars).find(|&v| self.assign[v].is_none())
    }

    /// First model under the deterministic search order, or None if
    /// unsatisfiable.
    pub fn solve(mut self) -> Option<Vec<bool>> {
        if self.root_conflict {
            return None;
        }
        loop {
            if self.propagate() {
                if self.trail.len() == self.nvars {
                    return Some(self.assign.iter().map(|v| v.unwrap()).collect());
                }
                let scan_from = self.decisions.last().map_or(0, |d| d.var + 1);
                let var = self
                    .next_unassigned(scan_from)
                    .expect("unassigned variable must exist");
                self.decisions.push(Decision {
                    var,
                    trail_len: self.trail.len(),
                    flipped: false,
                });
                let ok = self.enqueue(2 * var + 1); // try false first
                debug_assert!(ok);
            } else {
                // backtrack to the most recent decision with an untried value
                loop {
                    match self.decisions.pop() {
                        None => return None,
                        Some(d) if d.flipped => continue,
                        Some(d) => {
                            self.undo_to(d.trail_len);
                            self.decisions.push(Decision {
                                flipped: true,
                                ..d
                            });
                            let ok = self.enqueue(2 * d.var); // now true
                            debug_assert!(ok);
                            break;
                        }
                    }
                }
            }
        }
    }
}

/// Decide satisfiability; returns the first model under the fixed search
/// order when satisfiable.
pub fn solve(formula: &CnfFormula) -> Option<Vec<bool>> {
    Solver::new(formula).solve()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnf::Assignment;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn brute_sat(f: &CnfFormula) -> bool {
        (0..1u64 << f.var_count())
            .any(|idx| f.evaluate(&Assignment::from_index(f.var_count(), idx)).unwrap())
    }

    #[test]
    fn unit_clause_forced() {
        let f = CnfFormula::new(1, vec![vec![1]]).unwrap();
        assert_eq!(solve(&f), Some(vec![true]));
    }

    #[test]
    fn contradiction_unsat() {
        let f = CnfFormula::new(1, vec![vec![1], vec![-1]]).unwrap();
        assert_eq!(solve(&f), None);
    }

    #[test]
    fn empty_formula_all_false_model() {
        let f = CnfFormula::empty(3).unwrap();
        assert_eq!(solve(&f), Some(vec![false, false, false]));
    }

    #[test]
    fn model_is_deterministic() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let f = CnfFormula::random_ksat(3, 12, 30, &mut rng);
        assert_eq!(solve(&f), solve(&f));
    }

    #[test]
    fn agrees_with_brute_force_on_random_formulas() {
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        for _ in 0..300 {
            let n = rng.gen_range(2..=10);
            let m = rng.gen_range(1..=4 * n);
            let f = CnfFormula::random_ksat(n.min(3), n, m, &mut rng);
            let model = solve(&f);
            assert_eq!(model.is_some(), brute_sat(&f), "formula {}", f.to_dimacs());
            if let Some(bits) = model {
                assert!(f.evaluate(&Assignment::new(bits)).unwrap());
            }
        }
    }
}
