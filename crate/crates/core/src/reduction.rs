//! Non-adaptive random reductions.
//!
//! A reduction is a pair of pure functions: a query selector `sigma` mapping
//! (query index, instance, random tape) to an oracle query, and a decoder
//! `phi` mapping (instance, tape, all k answers) to the output. Properties
//! this module maintains by construction:
//!
//! * non-adaptivity is structural: the full query batch is materialized
//!   before any oracle answer exists, and `phi` receives all answers in one
//!   call;
//! * each per-index query distribution should not depend on the instance
//!   (only on its size); `marginal_distribution_probe` estimates how far a
//!   reduction strays from that;
//! * randomness budgets are declared up front so tapes can be resampled or
//!   enumerated faithfully.

use crate::error::Result;
use crate::oracles::BatchOracle;
use crate::randomness::{digest64, BitString};
use rand::RngCore;
use std::collections::BTreeMap;
use std::hash::Hash;
use std::sync::Arc;

type SigmaFn<X, Q> = dyn Fn(usize, &X, &BitString) -> Q + Send + Sync;
type PhiFn<X, A, O> = dyn Fn(&X, &BitString, &[A]) -> O + Send + Sync;

/// A non-adaptive k-query random reduction.
pub struct RandomReduction<X, Q, A, O> {
    query_count: usize,
    randomness_len: usize,
    sigma: Arc<SigmaFn<X, Q>>,
    phi: Arc<PhiFn<X, A, O>>,
}

impl<X, Q, A, O> Clone for RandomReduction<X, Q, A, O> {
    fn clone(&self) -> Self {
        Self {
            query_count: self.query_count,
            randomness_len: self.randomness_len,
            sigma: Arc::clone(&self.sigma),
            phi: Arc::clone(&self.phi),
        }
    }
}

/// One round of queries, fixed in full before any answer exists.
#[derive(Clone, Debug)]
pub struct QueryBatch<Q> {
    pub queries: Vec<Q>,
    pub provenance: BatchProvenance,
}

/// Digests identifying which instance and tape produced a batch.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BatchProvenance {
    pub instance_digest: u64,
    pub randomness_digest: u64,
}

impl<Q> QueryBatch<Q> {
    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }
}

/// Indexed answers matching a batch, position for position.
#[derive(Clone, Debug)]
pub struct AnswerSheet<A> {
    answers: Vec<A>,
}

impl<A> AnswerSheet<A> {
    pub fn for_batch<Q>(batch: &QueryBatch<Q>, answers: Vec<A>) -> Self {
        assert_eq!(
            batch.len(),
            answers.len(),
            "answer sheet must match its batch"
        );
        Self { answers }
    }

    pub fn answers(&self) -> &[A] {
        &self.answers
    }

    pub fn len(&self) -> usize {
        self.answers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.answers.is_empty()
    }
}

impl<X, Q, A, O> RandomReduction<X, Q, A, O> {
    pub fn new(
        query_count: usize,
        randomness_len: usize,
        sigma: impl Fn(usize, &X, &BitString) -> Q + Send + Sync + 'static,
        phi: impl Fn(&X, &BitString, &[A]) -> O + Send + Sync + 'static,
    ) -> Self {
        Self {
            query_count,
            randomness_len,
            sigma: Arc::new(sigma),
            phi: Arc::new(phi),
        }
    }

    pub fn query_count(&self) -> usize {
        self.query_count
    }

    pub fn randomness_len(&self) -> usize {
        self.randomness_len
    }

    /// The query at `index` (0-based) for the given instance and tape.
    pub fn query(&self, index: usize, x: &X, r: &BitString) -> Q {
        assert!(index < self.query_count, "query index out of range");
        (self.sigma)(index, x, r)
    }

    /// Decode the output from the full indexed answer list.
    pub fn decode(&self, x: &X, r: &BitString, answers: &[A]) -> O {
        assert_eq!(
            answers.len(),
            self.query_count,
            "decoder needs exactly k answers"
        );
        (self.phi)(x, r, answers)
    }

    pub fn draw_tape(&self, rng: &mut impl RngCore) -> BitString {
        BitString::random(self.randomness_len, rng)
    }

    /// Materialize the whole batch for one tape.
    pub fn build_batch(&self, x: &X, r: &BitString) -> QueryBatch<Q>
    where
        X: Hash,
    {
        assert_eq!(r.len(), self.randomness_len, "tape length mismatch");
        QueryBatch {
            queries: (0..self.query_count).map(|i| self.query(i, x, r)).collect(),
            provenance: BatchProvenance {
                instance_digest: digest64(x),
                randomness_digest: digest64(r),
            },
        }
    }
}

/// Submit a batch as one oracle round and index the answers.
pub fn submit_batch<Q: Sync, A: Send>(
    oracle: &dyn BatchOracle<Q, A>,
    batch: &QueryBatch<Q>,
) -> Result<AnswerSheet<A>> {
    let answers = oracle.answer_batch(&batch.queries)?;
    Ok(AnswerSheet::for_batch(batch, answers))
}

/// Run a reduction once: draw a tape, submit the batch as a single round,
/// decode. The oracle's round counter advances by exactly one.
pub fn run_reduction<X: Hash, Q: Sync, A: Send, O>(
    rr: &RandomReduction<X, Q, A, O>,
    x: &X,
    oracle: &dyn BatchOracle<Q, A>,
    rng: &mut impl RngCore,
) -> Result<O> {
    let tape = rr.draw_tape(rng);
    run_with_tape(rr, x, &tape, oracle)
}

/// Run a reduction on a caller-supplied tape.
pub fn run_with_tape<X: Hash, Q: Sync, A: Send, O>(
    rr: &RandomReduction<X, Q, A, O>,
    x: &X,
    tape: &BitString,
    oracle: &dyn BatchOracle<Q, A>,
) -> Result<O> {
    let batch = rr.build_batch(x, tape);
    let sheet = submit_batch(oracle, &batch)?;
    Ok(rr.decode(x, tape, sheet.answers()))
}

impl<X, Q, A, O> RandomReduction<X, Q, A, O>
where
    X: 'static,
    Q: 'static,
    A: 'static,
    O: Ord + Clone + 'static,
{
    /// Error reduction: 24*t independent runs inside one combined batch of
    /// 24*t*k queries, decoded by plurality vote. When each inner run
    /// succeeds with probability at least 2/3, the plurality is wrong with
    /// probability at most 2^-t. Ties break toward the smallest output
    /// under its canonical ordering.
    pub fn boost(&self, t: usize) -> RandomReduction<X, Q, A, O> {
        assert!(t >= 1);
        let runs = 24 * t;
        let inner_k = self.query_count;
        let inner_len = self.randomness_len;
        let sigma_inner = Arc::clone(&self.sigma);
        let phi_inner = Arc::clone(&self.phi);
        RandomReduction::new(
            runs * inner_k,
            runs * inner_len,
            move |flat, x, r| {
                let run = flat / inner_k;
                let i = flat % inner_k;
                let tape = r.slice(run * inner_len, inner_len);
                (sigma_inner)(i, x, &tape)
            },
            move |x, r, answers| {
                let mut votes: BTreeMap<O, usize> = BTreeMap::new();
                for run in 0..runs {
                    let tape = r.slice(run * inner_len, inner_len);
                    let chunk = &answers[run * inner_k..(run + 1) * inner_k];
                    let out = (phi_inner)(x, &tape, chunk);
                    *votes.entry(out).or_insert(0) += 1;
                }
                // first key with the maximal count wins: smallest on ties
                let mut best: Option<(&O, usize)> = None;
                for (value, &count) in &votes {
                    if best.is_none_or(|(_, c)| count > c) {
                        best = Some((value, count));
                    }
                }
                best.expect("at least one run").0.clone()
            },
        )
    }
}

/// Compose an outer reduction (whose queries are instances of a language B)
/// with an inner reduction that answers B. The result issues all
/// outer.k * inner.k queries as one batch over the combined tape
/// r # r_1 # ... # r_k; query (j, i) is the inner reduction's i-th query for
/// the outer's j-th query instance, using tape r_j.
pub fn compose<X, Y, B, Q, A, O>(
    outer: &RandomReduction<X, Y, B, O>,
    inner: &RandomReduction<Y, Q, A, B>,
) -> RandomReduction<X, Q, A, O>
where
    X: 'static,
    Y: 'static,
    B: 'static,
    Q: 'static,
    A: 'static,
    O: 'static,
{
    let outer_k = outer.query_count;
    let outer_len = outer.randomness_len;
    let inner_k = inner.query_count;
    let inner_len = inner.randomness_len;
    let outer_sigma = Arc::clone(&outer.sigma);
    let outer_phi = Arc::clone(&outer.phi);
    let inner_sigma = Arc::clone(&inner.sigma);
    let inner_phi = Arc::clone(&inner.phi);
    RandomReduction::new(
        outer_k * inner_k,
        outer_len + outer_k * inner_len,
        {
            let outer_sigma = Arc::clone(&outer_sigma);
            let inner_sigma = Arc::clone(&inner_sigma);
            move |flat, x, r| {
                let j = flat / inner_k;
                let i = flat % inner_k;
                let outer_tape = r.slice(0, outer_len);
                let inner_tape = r.slice(outer_len + j * inner_len, inner_len);
                let y = (outer_sigma)(j, x, &outer_tape);
                (inner_sigma)(i, &y, &inner_tape)
            }
        },
        move |x, r, answers| {
            let outer_tape = r.slice(0, outer_len);
            let b_answers: Vec<B> = (0..outer_k)
                .map(|j| {
                    let inner_tape = r.slice(outer_len + j * inner_len, inner_len);
                    let y = (outer_sigma)(j, x, &outer_tape);
                    let chunk = &answers[j * inner_k..(j + 1) * inner_k];
                    (inner_phi)(&y, &inner_tape, chunk)
                })
                .collect();
            (outer_phi)(x, &outer_tape, &b_answers)
        },
    )
}

/// The one-query reduction that forwards its instance verbatim and returns
/// the oracle's answer.
pub fn identity_reduction<X: Clone + 'static, A: Clone + 'static>() -> RandomReduction<X, X, A, A> {
    RandomReduction::new(
        1,
        0,
        |_, x: &X, _| x.clone(),
        |_, _, answers: &[A]| answers[0].clone(),
    )
}

/// Empirical total-variation distance between the distributions of the
/// index-th query on two instances, over `samples` fresh tapes.
///
/// Queries are projected onto `buckets` cells through a 64-bit canonical
/// hash; collisions can only make the estimate optimistic. With b buckets
/// and s samples the noise floor is about sqrt(b / (pi * s)).
pub fn marginal_distribution_probe<X, Q: Hash, A, O>(
    rr: &RandomReduction<X, Q, A, O>,
    index: usize,
    x1: &X,
    x2: &X,
    samples: usize,
    buckets: usize,
    rng: &mut impl RngCore,
) -> f64 {
    assert!(buckets >= 1 && samples >= 1);
    let mut h1 = vec![0u64; buckets];
    let mut h2 = vec![0u64; buckets];
    for _ in 0..samples {
        let tape = rr.draw_tape(rng);
        h1[(digest64(&rr.query(index, x1, &tape)) % buckets as u64) as usize] += 1;
        h2[(digest64(&rr.query(index, x2, &tape)) % buckets as u64) as usize] += 1;
    }
    total_variation(&h1, &h2, samples)
}

/// Empirical total-variation distance between the index-th query marginal on
/// one instance and the uniform distribution over `reference` (the full
/// enumerated query space), with the same bucket projection.
pub fn marginal_vs_uniform_reference<X, Q: Hash, A, O>(
    rr: &RandomReduction<X, Q, A, O>,
    index: usize,
    x: &X,
    samples: usize,
    buckets: usize,
    reference: &[Q],
    rng: &mut impl RngCore,
) -> f64 {
    assert!(buckets >= 1 && samples >= 1 && !reference.is_empty());
    let mut observed = vec![0u64; buckets];
    for _ in 0..samples {
        let tape = rr.draw_tape(rng);
        observed[(digest64(&rr.query(index, x, &tape)) % buckets as u64) as usize] += 1;
    }
    let mut expected = vec![0.0f64; buckets];
    for q in reference {
        expected[(digest64(q) % buckets as u64) as usize] += 1.0 / reference.len() as f64;
    }
    0.5 * observed
        .iter()
        .zip(&expected)
        .map(|(&o, &e)| (o as f64 / samples as f64 - e).abs())
        .sum::<f64>()
}

fn total_variation(h1: &[u64], h2: &[u64], samples: usize) -> f64 {
    0.5 * h1
        .iter()
        .zip(h2)
        .map(|(&a, &b)| (a as f64 - b as f64).abs() / samples as f64)
        .sum::<f64>()
}
