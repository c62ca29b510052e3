//! Ground-truth oracles and the batch query discipline.
//!
//! Every oracle answers whole batches: one `answer_batch` call is one round
//! of non-adaptive queries, and the per-oracle statistics record rounds,
//! total queries, and the largest batch seen. Individual queries are keyed
//! by a global index so that corrupting wrappers produce the same answers
//! regardless of evaluation order within a batch.

use crate::cnf::{Assignment, CnfFormula};
use crate::dpll;
use crate::error::{Error, Result};
use crate::field::{FieldElement, FieldMatrix};
use crate::randomness::rng_for_index;
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use std::sync::atomic::{AtomicU64, Ordering};

/// Snapshot of an oracle's traffic counters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub struct OracleStats {
    pub total_queries: u64,
    pub rounds: u64,
    pub max_batch: u64,
}

/// Monotone counters shared by all oracles.
#[derive(Debug, Default)]
pub struct StatCounters {
    total_queries: AtomicU64,
    rounds: AtomicU64,
    max_batch: AtomicU64,
}

impl StatCounters {
    pub fn new() -> Self {
        Self::default()
    }

    /// Record one batch submission; returns the global index of the batch's
    /// first query.
    pub fn begin_round(&self, batch_len: usize) -> u64 {
        self.rounds.fetch_add(1, Ordering::Relaxed);
        self.max_batch
            .fetch_max(batch_len as u64, Ordering::Relaxed);
        self.total_queries
            .fetch_add(batch_len as u64, Ordering::Relaxed)
    }

    pub fn snapshot(&self) -> OracleStats {
        OracleStats {
            total_queries: self.total_queries.load(Ordering::Relaxed),
            rounds: self.rounds.load(Ordering::Relaxed),
            max_batch: self.max_batch.load(Ordering::Relaxed),
        }
    }
}

/// An oracle answering indexed queries in single-round batches.
///
/// Implementations provide `answer_indexed`; the batch driver assigns global
/// query indices, bumps the round counters once per batch, and may evaluate
/// queries concurrently (answers are reassembled by position, so results are
/// independent of evaluation order).
pub trait BatchOracle<Q: Sync, A: Send>: Sync {
    fn answer_indexed(&self, index: u64, query: &Q) -> Result<A>;

    fn counters(&self) -> &StatCounters;

    fn answer_batch(&self, queries: &[Q]) -> Result<Vec<A>> {
        let base = self.counters().begin_round(queries.len());
        queries
            .par_iter()
            .enumerate()
            .map(|(i, q)| self.answer_indexed(base + i as u64, q))
            .collect()
    }

    fn stats(&self) -> OracleStats {
        self.counters().snapshot()
    }
}

/// Work bound for the exact permanent (2^n subsets).
pub const PERMANENT_DIMENSION_BUDGET: usize = 20;
/// Work bound for exact model counting by enumeration (2^n assignments).
pub const COUNT_VARIABLE_BUDGET: usize = 26;

/// Exact permanent over GF(p) by Ryser's formula with Gray-code subset
/// updates: perm(A) = (-1)^n * sum over S of (-1)^{|S|} prod_i sum_{j in S} a_ij.
pub fn permanent_exact(a: &FieldMatrix) -> Result<FieldElement> {
    let n = a.dimension();
    if n > PERMANENT_DIMENSION_BUDGET {
        return Err(Error::ResourceLimit {
            message: format!("permanent dimension {n} exceeds budget {PERMANENT_DIMENSION_BUDGET}"),
        });
    }
    let p = a.modulus();
    let mut row_sums = vec![0u64; n];
    let mut total = 0u64;
    let mut prev_gray = 0u64;
    for counter in 1u64..(1 << n) {
        let gray = counter ^ (counter >> 1);
        let changed = (gray ^ prev_gray).trailing_zeros() as usize;
        let added = gray & (1 << changed) != 0;
        for (i, rs) in row_sums.iter_mut().enumerate() {
            let entry = a.raw(i, changed);
            *rs = if added {
                let s = *rs + entry;
                if s >= p {
                    s - p
                } else {
                    s
                }
            } else if *rs >= entry {
                *rs - entry
            } else {
                *rs + p - entry
            };
        }
        prev_gray = gray;
        let mut prod = 1u64;
        for &rs in &row_sums {
            prod = ((prod as u128 * rs as u128) % p as u128) as u64;
            if prod == 0 {
                break;
            }
        }
        // sign (-1)^(n - |S|)
        if (n as u32).wrapping_sub(gray.count_ones()) % 2 == 0 {
            total = (total + prod) % p;
        } else {
            total = (total + p - prod) % p;
        }
    }
    // the matrix constructor already validated the modulus
    Ok(FieldElement::reduced(total, p))
}

/// Exact number of satisfying assignments, by enumeration with bitmask
/// clause checks.
pub fn count_exact(f: &CnfFormula) -> Result<u64> {
    let n = f.var_count();
    if n > COUNT_VARIABLE_BUDGET {
        return Err(Error::ResourceLimit {
            message: format!("count_exact on {n} variables exceeds budget {COUNT_VARIABLE_BUDGET}"),
        });
    }
    // clause -> (positive literal mask, negative literal mask)
    let masks: Vec<(u64, u64)> = f
        .clauses()
        .iter()
        .map(|clause| {
            let mut pos = 0u64;
            let mut neg = 0u64;
            for &lit in clause {
                let bit = 1u64 << (lit.unsigned_abs() - 1);
                if lit > 0 {
                    pos |= bit;
                } else {
                    neg |= bit;
                }
            }
            (pos, neg)
        })
        .collect();
    let mut count = 0u64;
    for a in 0..(1u64 << n) {
        if masks.iter().all(|&(pos, neg)| a & pos != 0 || !a & neg != 0) {
            count += 1;
        }
    }
    Ok(count)
}

/// A SAT oracle's answer: the satisfiability bit, plus a model when one
/// exists. Honest oracles always attach a witness to a positive answer; the
/// faulty wrapper may flip a verdict and then carries none.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SatVerdict {
    pub satisfiable: bool,
    pub witness: Option<Assignment>,
}

impl SatVerdict {
    pub fn unsat() -> Self {
        Self {
            satisfiable: false,
            witness: None,
        }
    }
}

/// Decide satisfiability with the deterministic DPLL engine; positive
/// answers carry the first model under the fixed branching order.
pub fn sat_decide(f: &CnfFormula) -> SatVerdict {
    match dpll::solve(f) {
        Some(bits) => {
            let witness = Assignment::new(bits);
            debug_assert!(f.evaluate(&witness).unwrap());
            SatVerdict {
                satisfiable: true,
                witness: Some(witness),
            }
        }
        None => SatVerdict::unsat(),
    }
}

/// Batch oracle for the exact permanent.
#[derive(Default)]
pub struct PermanentOracle {
    counters: StatCounters,
}

impl PermanentOracle {
    pub fn new() -> Self {
        Self::default()
    }
}

impl BatchOracle<FieldMatrix, FieldElement> for PermanentOracle {
    fn answer_indexed(&self, _index: u64, query: &FieldMatrix) -> Result<FieldElement> {
        permanent_exact(query)
    }

    fn counters(&self) -> &StatCounters {
        &self.counters
    }
}

/// Batch oracle for exact #SAT.
#[derive(Default)]
pub struct CountOracle {
    counters: StatCounters,
}

impl CountOracle {
    pub fn new() -> Self {
        Self::default()
    }
}

impl BatchOracle<CnfFormula, u64> for CountOracle {
    fn answer_indexed(&self, _index: u64, query: &CnfFormula) -> Result<u64> {
        count_exact(query)
    }

    fn counters(&self) -> &StatCounters {
        &self.counters
    }
}

/// Batch oracle for SAT with witnesses.
#[derive(Default)]
pub struct SatOracle {
    counters: StatCounters,
}

impl SatOracle {
    pub fn new() -> Self {
        Self::default()
    }
}

impl BatchOracle<CnfFormula, SatVerdict> for SatOracle {
    fn answer_indexed(&self, _index: u64, query: &CnfFormula) -> Result<SatVerdict> {
        Ok(sat_decide(query))
    }

    fn counters(&self) -> &StatCounters {
        &self.counters
    }
}

/// Answer types that know how to be wrong.
pub trait Corrupt {
    /// Produce an answer guaranteed to differ from `self`.
    fn corrupted(&self, rng: &mut ChaCha12Rng) -> Self;
}

impl Corrupt for FieldElement {
    fn corrupted(&self, rng: &mut ChaCha12Rng) -> Self {
        // add a uniformly random nonzero field element
        let offset = rng.gen_range(1..self.modulus());
        self.add(&FieldElement::reduced(offset, self.modulus()))
    }
}

impl Corrupt for u64 {
    fn corrupted(&self, rng: &mut ChaCha12Rng) -> Self {
        self.wrapping_add(rng.gen_range(1..=u64::from(u32::MAX)))
    }
}

impl Corrupt for bool {
    fn corrupted(&self, _rng: &mut ChaCha12Rng) -> Self {
        !self
    }
}

impl Corrupt for SatVerdict {
    fn corrupted(&self, _rng: &mut ChaCha12Rng) -> Self {
        // flipped verdict; a fabricated positive carries no witness
        SatVerdict {
            satisfiable: !self.satisfiable,
            witness: None,
        }
    }
}

/// Wrapper that answers each query incorrectly with probability `epsilon`,
/// independently. The corruption decision and noise for query `i` come from
/// a stream derived from `(seed, i)`, so answers do not depend on the order
/// in which a batch is evaluated.
pub struct FaultyOracle<O> {
    inner: O,
    epsilon: f64,
    seed: u64,
    counters: StatCounters,
}

impl<O> FaultyOracle<O> {
    pub fn new(inner: O, epsilon: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::InvalidProbability {
                message: format!("fault rate {epsilon} outside [0, 1]"),
            });
        }
        Ok(Self {
            inner,
            epsilon,
            seed,
            counters: StatCounters::new(),
        })
    }
}

impl<Q, A, O> BatchOracle<Q, A> for FaultyOracle<O>
where
    Q: Sync,
    A: Send + Corrupt,
    O: BatchOracle<Q, A>,
{
    fn answer_indexed(&self, index: u64, query: &Q) -> Result<A> {
        let honest = self.inner.answer_indexed(index, query)?;
        let mut rng = rng_for_index(self.seed, index);
        if rng.gen_bool(self.epsilon) {
            Ok(honest.corrupted(&mut rng))
        } else {
            Ok(honest)
        }
    }

    fn counters(&self) -> &StatCounters {
        &self.counters
    }
}

/// Oracle backed by a plain function; handy for synthetic reductions.
pub struct FnOracle<Q, A, F> {
    f: F,
    counters: StatCounters,
    _marker: std::marker::PhantomData<fn(&Q) -> A>,
}

impl<Q, A, F: Fn(&Q) -> A> FnOracle<Q, A, F> {
    pub fn new(f: F) -> Self {
        Self {
            f,
            counters: StatCounters::new(),
            _marker: std::marker::PhantomData,
        }
    }
}

impl<Q, A, F> BatchOracle<Q, A> for FnOracle<Q, A, F>
where
    Q: Sync,
    A: Send,
    F: Fn(&Q) -> A + Sync,
{
    fn answer_indexed(&self, _index: u64, query: &Q) -> Result<A> {
        Ok((self.f)(query))
    }

    fn counters(&self) -> &StatCounters {
        &self.counters
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn permanent_of_identity_is_one() {
        let m = FieldMatrix::identity(3, 101).unwrap();
        assert_eq!(permanent_exact(&m).unwrap().value(), 1);
    }

    #[test]
    fn permanent_two_by_two() {
        let m = FieldMatrix::new(101, vec![vec![1, 2], vec![3, 4]]).unwrap();
        // 1*4 + 2*3
        assert_eq!(permanent_exact(&m).unwrap().value(), 10);
    }

    #[test]
    fn permanent_all_ones_is_factorial() {
        let m = FieldMatrix::new(101, vec![vec![1; 4]; 4]).unwrap();
        assert_eq!(permanent_exact(&m).unwrap().value(), 24);
    }

    #[test]
    fn permanent_dimension_budget() {
        let m = FieldMatrix::identity(21, 101).unwrap();
        assert!(matches!(
            permanent_exact(&m),
            Err(Error::ResourceLimit { .. })
        ));
    }

    #[test]
    fn ryser_matches_permutation_expansion() {
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        for p in [7u64, 101] {
            for _ in 0..100 {
                let n = rand::Rng::gen_range(&mut rng, 1..=5);
                let m = FieldMatrix::random(n, p, &mut rng).unwrap();
                assert_eq!(
                    permanent_exact(&m).unwrap(),
                    reference::permanent_expansion(&m)
                );
            }
        }
    }

    #[test]
    fn count_examples() {
        let empty = CnfFormula::empty(5).unwrap();
        assert_eq!(count_exact(&empty).unwrap(), 32);
        let or2 = CnfFormula::new(2, vec![vec![1, 2]]).unwrap();
        assert_eq!(count_exact(&or2).unwrap(), 3);
        let contra = CnfFormula::new(1, vec![vec![1], vec![-1]]).unwrap();
        assert_eq!(count_exact(&contra).unwrap(), 0);
        let big = CnfFormula::empty(27).unwrap();
        assert!(matches!(count_exact(&big), Err(Error::ResourceLimit { .. })));
    }

    #[test]
    fn sat_decide_examples() {
        let v = sat_decide(&CnfFormula::new(1, vec![vec![1]]).unwrap());
        assert!(v.satisfiable);
        assert!(v.witness.unwrap().bit(1));
        let u = sat_decide(&CnfFormula::new(1, vec![vec![1], vec![-1]]).unwrap());
        assert!(!u.satisfiable);
        assert!(u.witness.is_none());
    }

    #[test]
    fn sat_decide_agrees_with_exact_count() {
        let mut rng = ChaCha12Rng::seed_from_u64(12);
        for _ in 0..500 {
            let n = rand::Rng::gen_range(&mut rng, 8..=20);
            let ratio = 1.0 + 4.0 * rand::Rng::gen::<f64>(&mut rng);
            let m = ((n as f64) * ratio).round() as usize;
            let f = CnfFormula::random_ksat(3, n, m, &mut rng);
            let verdict = sat_decide(&f);
            assert_eq!(verdict.satisfiable, count_exact(&f).unwrap() > 0);
            if let Some(w) = verdict.witness {
                assert!(f.evaluate(&w).unwrap());
            }
        }
    }

    #[test]
    fn faulty_oracle_epsilon_zero_is_transparent() {
        let inner = SatOracle::new();
        let faulty = FaultyOracle::new(inner, 0.0, 99).unwrap();
        let f = CnfFormula::new(2, vec![vec![1, 2]]).unwrap();
        let answers = faulty.answer_batch(std::slice::from_ref(&f)).unwrap();
        assert_eq!(answers[0], sat_decide(&f));
    }

    #[test]
    fn faulty_oracle_epsilon_one_always_wrong() {
        let faulty = FaultyOracle::new(PermanentOracle::new(), 1.0, 5).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        for _ in 0..50 {
            let m = FieldMatrix::random(3, 101, &mut rng).unwrap();
            let truth = permanent_exact(&m).unwrap();
            let got = faulty.answer_batch(std::slice::from_ref(&m)).unwrap();
            assert_ne!(got[0], truth);
        }
    }

    #[test]
    fn faulty_oracle_observed_rate() {
        let faulty = FaultyOracle::new(CountOracle::new(), 0.05, 31).unwrap();
        let f = CnfFormula::new(2, vec![vec![1, 2]]).unwrap();
        let truth = count_exact(&f).unwrap();
        let queries = vec![f; 10_000];
        let answers = faulty.answer_batch(&queries).unwrap();
        let wrong = answers.iter().filter(|&&a| a != truth).count() as f64;
        let rate = wrong / queries.len() as f64;
        assert!((0.04..=0.06).contains(&rate), "observed fault rate {rate}");
    }

    #[test]
    fn faulty_answers_are_order_independent() {
        let f1 = CnfFormula::new(2, vec![vec![1, 2]]).unwrap();
        let f2 = CnfFormula::new(2, vec![vec![1], vec![-1, 2]]).unwrap();
        let batch = vec![f1, f2];
        let a = FaultyOracle::new(SatOracle::new(), 0.5, 7)
            .unwrap()
            .answer_batch(&batch)
            .unwrap();
        let b = FaultyOracle::new(SatOracle::new(), 0.5, 7)
            .unwrap()
            .answer_batch(&batch)
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn stats_count_rounds_not_queries() {
        let oracle = SatOracle::new();
        let f = CnfFormula::new(1, vec![vec![1]]).unwrap();
        oracle.answer_batch(&vec![f.clone(); 5]).unwrap();
        oracle.answer_batch(&vec![f; 3]).unwrap();
        let stats = oracle.stats();
        assert_eq!(stats.rounds, 2);
        assert_eq!(stats.total_queries, 8);
        assert_eq!(stats.max_batch, 5);
    }
}
