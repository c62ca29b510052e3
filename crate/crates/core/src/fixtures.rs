//! Synthetic reductions with plantable instances, controllable query
//! satisfiability probabilities, and enumerable tapes.
//!
//! Running the protocol machinery on genuine counting reductions is out of
//! reach at desk scale, so these fixtures exercise exactly the quantified
//! structure instead: membership is planted in the instance, queries are
//! one-time-padded so their distributions are provably input-independent,
//! and every probability is an exact dyadic rational.

use crate::am::SatReduction;
use crate::cnf::CnfFormula;
use crate::error::Result;
use crate::oracles::{BatchOracle, FnOracle, StatCounters};
use crate::randomness::BitString;
use crate::reduction::RandomReduction;

/// An instance with its membership bit planted. The size field is the
/// nominal input length the protocol's 2^-n terms refer to.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct PlantedInstance {
    pub size: usize,
    pub member: bool,
}

impl PlantedInstance {
    pub fn new(size: usize, member: bool) -> Self {
        Self { size, member }
    }
}

/// Satisfiability probability of a noise query, as a dyadic rational
/// numerator / 2^bits.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct NoiseSpec {
    numerator: u64,
    bits: u32,
}

impl NoiseSpec {
    /// p = numerator / denominator; the denominator must be a power of two.
    pub fn new(numerator: u64, denominator: u64) -> Self {
        assert!(denominator.is_power_of_two(), "denominator must be 2^b");
        assert!(numerator <= denominator);
        Self {
            numerator,
            bits: denominator.trailing_zeros(),
        }
    }

    pub fn half() -> Self {
        Self::new(1, 2)
    }

    pub fn certain() -> Self {
        Self::new(1, 1)
    }

    pub fn never() -> Self {
        Self::new(0, 1)
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn probability(&self) -> (u64, u64) {
        (self.numerator, 1 << self.bits)
    }
}

/// The canonical satisfiable query: (x1 or x2) on two variables.
pub fn canonical_sat_formula() -> CnfFormula {
    CnfFormula::new(2, vec![vec![1, 2]]).expect("static formula")
}

/// The canonical unsatisfiable query: x1 and not x1 on two variables.
pub fn canonical_unsat_formula() -> CnfFormula {
    CnfFormula::new(2, vec![vec![1], vec![-1]]).expect("static formula")
}

/// A reduction to SAT with planted membership.
///
/// The first `signals` query indices carry the membership bit through a
/// one-time pad: query i is satisfiable iff member xor pad_i, where pad_i
/// is one fresh tape bit, so the query marginal is an even coin regardless
/// of the instance. The remaining indices are pure noise with the given
/// satisfiability probabilities, read from disjoint tape chunks. The
/// decoder recovers the majority of the padded signal bits (which, against
/// an honest oracle, all equal the membership bit, so the reduction never
/// errs); with `complement` the decoder proves non-membership instead.
pub fn planted_sat_reduction(
    signals: usize,
    noise: &[NoiseSpec],
    complement: bool,
) -> SatReduction<PlantedInstance> {
    assert!(signals >= 1, "at least one signal index");
    let noise = noise.to_vec();
    let k = signals + noise.len();
    let tape_len = signals + noise.iter().map(|s| s.bits() as usize).sum::<usize>();
    RandomReduction::new(
        k,
        tape_len,
        move |i, x: &PlantedInstance, r: &BitString| {
            if i < signals {
                let pad = r.bit(i);
                if x.member ^ pad {
                    canonical_sat_formula()
                } else {
                    canonical_unsat_formula()
                }
            } else {
                let spec = &noise[i - signals];
                let offset = signals
                    + noise[..i - signals]
                        .iter()
                        .map(|s| s.bits() as usize)
                        .sum::<usize>();
                let draw = r.read_u64(offset, spec.bits() as usize);
                if draw < spec.probability().0 {
                    canonical_sat_formula()
                } else {
                    canonical_unsat_formula()
                }
            }
        },
        move |_x, r, answers: &[bool]| {
            let votes = (0..signals)
                .filter(|&i| answers[i] ^ r.bit(i))
                .count();
            let decoded = 2 * votes > signals;
            decoded ^ complement
        },
    )
}

/// Noise-only reduction whose decoder outputs a constant; used for
/// threshold edge cases where no index carries signal.
pub fn noise_only_reduction(noise: &[NoiseSpec], output: bool) -> SatReduction<PlantedInstance> {
    let noise = noise.to_vec();
    let k = noise.len();
    let tape_len = noise.iter().map(|s| s.bits() as usize).sum::<usize>();
    RandomReduction::new(
        k,
        tape_len,
        move |i, _x: &PlantedInstance, r: &BitString| {
            let spec = &noise[i];
            let offset = noise[..i].iter().map(|s| s.bits() as usize).sum::<usize>();
            let draw = r.read_u64(offset, spec.bits() as usize);
            if draw < spec.probability().0 {
                canonical_sat_formula()
            } else {
                canonical_unsat_formula()
            }
        },
        move |_x, _r, _answers: &[bool]| output,
    )
}

/// Oracle for the parity language over 64-bit words.
pub struct ParityOracle {
    counters: StatCounters,
}

impl ParityOracle {
    pub fn new() -> Self {
        Self {
            counters: StatCounters::new(),
        }
    }
}

impl Default for ParityOracle {
    fn default() -> Self {
        Self::new()
    }
}

impl BatchOracle<u64, bool> for ParityOracle {
    fn answer_indexed(&self, _index: u64, query: &u64) -> Result<bool> {
        Ok(query.count_ones() % 2 == 1)
    }

    fn counters(&self) -> &StatCounters {
        &self.counters
    }
}

pub fn parity(word: u64) -> bool {
    word.count_ones() % 2 == 1
}

/// Bits of tape reserved at the end of a parity reduction's tape for its
/// failure draw.
const FAILURE_DRAW_BITS: usize = 16;

/// A reduction computing parity(x) from `queries` parity-oracle calls on
/// one-time-padded words. Each query is the instance xor a fresh uniform
/// 64-bit mask, so query marginals are exactly uniform and independent of
/// the instance. The decoder unmasks each answer and takes the xor of the
/// unmasked bits (the query count must be odd so agreeing answers
/// reconstruct the parity); it then deliberately fails with probability
/// `failure` = numerator/2^16, drawn from the tape's tail, which gives the
/// composition experiments an exactly configured per-level error rate.
pub fn parity_reduction(queries: usize, failure: NoiseSpec) -> RandomReduction<u64, u64, bool, bool> {
    assert!(queries % 2 == 1, "odd query count so xor aggregation works");
    assert_eq!(failure.bits() as usize, FAILURE_DRAW_BITS);
    let tape_len = 64 * queries + FAILURE_DRAW_BITS;
    RandomReduction::new(
        queries,
        tape_len,
        move |i, x: &u64, r: &BitString| x ^ r.read_u64(64 * i, 64),
        move |_x, r, answers: &[bool]| {
            let mut acc = false;
            for (i, &a) in answers.iter().enumerate() {
                acc ^= a ^ parity(r.read_u64(64 * i, 64));
            }
            let draw = r.read_u64(64 * answers.len(), FAILURE_DRAW_BITS);
            if draw < failure.probability().0 {
                acc = !acc;
            }
            acc
        },
    )
}

/// A parity failure spec over the 2^16 tape draw.
pub fn failure_over_16_bits(numerator: u64) -> NoiseSpec {
    NoiseSpec::new(numerator, 1 << FAILURE_DRAW_BITS)
}

/// Oracle answering planted-fixture SAT queries with a bit, for running the
/// fixture reductions end to end.
pub fn sat_bit_oracle() -> FnOracle<CnfFormula, bool, impl Fn(&CnfFormula) -> bool> {
    FnOracle::new(|f: &CnfFormula| crate::oracles::sat_decide(f).satisfiable)
}
