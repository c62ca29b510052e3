//! Approximate model counting in one parallel round, and the post-selected
//! ratio estimator built on top of it.
//!
//! The counter fixes all of its random parity vectors up front: for each
//! repetition it draws n constraints and asks, in a single batch, whether
//! the formula stays satisfiable under the first 0, 1, ..., n of them. A
//! set of size C survives i constraints with probability controlled by
//! pairwise independence, so the largest surviving level estimates log2(C)
//! to within a factor of 2. Tighter factors come from counting a tensor
//! power and taking roots, trading variables for accuracy.
//!
//! All estimates are exact rationals; t-th roots are rounded to a fixed
//! denominator of 2^16 so factor checks stay decidable.

use crate::cnf::{CnfFormula, XorConstraint};
use crate::error::{Error, Result};
use crate::oracles::{BatchOracle, SatVerdict};
use crate::randomness::digest64;
use crate::reduction::{submit_batch, AnswerSheet, BatchProvenance, QueryBatch};
use num::bigint::BigUint;
use num::rational::{BigRational, Ratio};
use num::{BigInt, One, Signed, ToPrimitive, Zero};
use rand::RngCore;

/// Exact rational with fixed-width components; large enough for every value
/// this module produces (counts up to 2^40, roots scaled by 2^16).
pub type Rat = Ratio<i128>;

/// The multiplicative factor the raw hash estimator guarantees per count.
pub fn base_factor() -> Rat {
    Rat::from_integer(2)
}

/// Denominator scale for rational t-th roots.
pub const ROOT_DENOM_BITS: u32 = 16;

/// Outcome of an approximate count.
#[derive(Clone, Debug)]
pub struct ApproxCountResult {
    /// The estimate itself: a count for the plain mode, a probability for
    /// the ratio mode.
    pub estimate: Rat,
    /// The factor g the caller asked for.
    pub target_factor: Rat,
    /// 1 - delta.
    pub confidence: f64,
    /// Oracle rounds consumed; 1 in parallel mode.
    pub oracle_rounds: u64,
    /// Hash repetitions per counted quantity.
    pub repetitions: usize,
    /// Tensor power used for amplification.
    pub amplification: usize,
}

/// All parity constraints for one counting job, drawn before any query.
/// Within a repetition, level i uses the first i constraints, so the levels
/// are nested prefix slices.
#[derive(Clone, Debug, Hash)]
pub struct HashLevelPlan {
    var_count: usize,
    repetitions: Vec<Vec<XorConstraint>>,
}

impl HashLevelPlan {
    pub fn draw(var_count: usize, repetitions: usize, rng: &mut impl RngCore) -> Self {
        Self {
            var_count,
            repetitions: (0..repetitions)
                .map(|_| {
                    (0..var_count)
                        .map(|_| XorConstraint::random(var_count, rng))
                        .collect()
                })
                .collect(),
        }
    }

    pub fn repetitions(&self) -> usize {
        self.repetitions.len()
    }

    /// Levels run 0..=var_count.
    pub fn levels(&self) -> usize {
        self.var_count + 1
    }

    pub fn constraints(&self, repetition: usize, level: usize) -> &[XorConstraint] {
        &self.repetitions[repetition][..level]
    }

    /// Flat index of (repetition, level) in the query batch this plan
    /// generates.
    pub fn query_index(&self, repetition: usize, level: usize) -> usize {
        repetition * self.levels() + level
    }

    /// Every level of every repetition, as one query list.
    pub fn augmented_queries(&self, f: &CnfFormula) -> Vec<CnfFormula> {
        assert_eq!(f.var_count(), self.var_count, "plan drawn for another size");
        let mut queries = Vec::with_capacity(self.repetitions() * self.levels());
        for rep in 0..self.repetitions() {
            for level in 0..self.levels() {
                queries.push(f.add_xor_constraints(self.constraints(rep, level)));
            }
        }
        queries
    }
}

/// Repetition count delivering failure probability `delta` through median
/// aggregation: 8 * ceil(ln(1/delta)).
pub fn repetitions_for(delta: f64) -> Result<usize> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidProbability {
            message: format!("delta {delta} outside (0, 1)"),
        });
    }
    Ok(8 * (1.0 / delta).ln().ceil().max(1.0) as usize)
}

/// Smallest t with base^(1/t) <= g: counting the t-th tensor power to the
/// base factor and taking t-th roots achieves factor g.
pub fn derive_amplification(g: &Rat, base: &Rat) -> Result<usize> {
    if *g <= Rat::one() {
        return Err(Error::InvalidFactor {
            message: format!("factor must exceed 1, got {g}"),
        });
    }
    let g_big = BigRational::new(BigInt::from(*g.numer()), BigInt::from(*g.denom()));
    let base_big = BigRational::new(BigInt::from(*base.numer()), BigInt::from(*base.denom()));
    let mut power = g_big.clone();
    for t in 1..=1_000_000usize {
        if power >= base_big {
            return Ok(t);
        }
        power *= &g_big;
    }
    Err(Error::InvalidFactor {
        message: format!("factor {g} too close to 1"),
    })
}

/// Median per-repetition estimate: within each repetition the estimate is
/// 2^(largest satisfiable level), or 0 when even the constraint-free level
/// is unsatisfiable. The lower median of the repetition estimates is
/// returned.
pub fn raw_hash_estimate(
    f: &CnfFormula,
    plan: &HashLevelPlan,
    answers: &AnswerSheet<SatVerdict>,
) -> Rat {
    assert_eq!(f.var_count(), plan.var_count, "plan drawn for another size");
    assert_eq!(
        answers.len(),
        plan.repetitions() * plan.levels(),
        "answer sheet must cover every repetition and level"
    );
    let mut estimates: Vec<u128> = (0..plan.repetitions())
        .map(|rep| {
            let top = (0..plan.levels())
                .rev()
                .find(|&level| answers.answers()[plan.query_index(rep, level)].satisfiable);
            match top {
                Some(level) => 1u128 << level,
                None => 0,
            }
        })
        .collect();
    estimates.sort_unstable();
    Rat::from_integer(estimates[(estimates.len() - 1) / 2] as i128)
}

/// Rational t-th root with denominator 2^16, rounded down.
fn nth_root_scaled(value: u128, t: usize) -> Rat {
    if value == 0 {
        return Rat::zero();
    }
    let scaled = BigUint::from(value) << (ROOT_DENOM_BITS as usize * t);
    let root = scaled.nth_root(t as u32);
    let root_i128 = root.to_i128().expect("root fits in 128 bits at these scales");
    Rat::new(root_i128, 1i128 << ROOT_DENOM_BITS)
}

fn rat_to_u128(r: &Rat) -> u128 {
    debug_assert!(r.is_integer() && !r.is_negative());
    *r.numer() as u128
}

/// Approximate count(f) to within a multiplicative factor g with failure
/// probability delta, submitting every satisfiability query as one batch.
///
/// The estimate is exactly zero iff the formula is unsatisfiable: level 0
/// of the plan is the constraint-free satisfiability probe.
pub fn approx_count_parallel(
    f: &CnfFormula,
    g: &Rat,
    delta: f64,
    oracle: &dyn BatchOracle<CnfFormula, SatVerdict>,
    rng: &mut impl RngCore,
    var_budget: usize,
) -> Result<ApproxCountResult> {
    let t = derive_amplification(g, &base_factor())?;
    let tensored = f.tensor_power(t, var_budget)?;
    let repetitions = repetitions_for(delta)?;
    let plan = HashLevelPlan::draw(tensored.var_count(), repetitions, rng);

    let batch = QueryBatch {
        queries: plan.augmented_queries(&tensored),
        provenance: BatchProvenance {
            instance_digest: digest64(f),
            randomness_digest: digest64(&plan),
        },
    };
    let rounds_before = oracle.stats().rounds;
    let sheet = submit_batch(oracle, &batch)?;
    let oracle_rounds = oracle.stats().rounds - rounds_before;

    let estimate = if sheet.answers()[plan.query_index(0, 0)].satisfiable {
        nth_root_scaled(rat_to_u128(&raw_hash_estimate(&tensored, &plan, &sheet)), t)
    } else {
        Rat::zero()
    };
    Ok(ApproxCountResult {
        estimate,
        target_factor: *g,
        confidence: 1.0 - delta,
        oracle_rounds,
        repetitions,
        amplification: t,
    })
}

/// Estimate the post-selected probability p = count(f and h) / count(h) to
/// within factor g: both counts are taken to the tighter factor
/// g' = 1 + (g-1)/3 with failure budget delta/2 each, and their queries
/// share one oracle round. The returned ratio is then within
/// g'^2 <= g of p.
///
/// With `shared_plan` the numerator and denominator reuse the same
/// constraint draws, which makes the estimate exactly 1 whenever f and h
/// agree.
#[allow(clippy::too_many_arguments)]
pub fn approx_count_ratio(
    f: &CnfFormula,
    h: &CnfFormula,
    g: &Rat,
    delta: f64,
    oracle: &dyn BatchOracle<CnfFormula, SatVerdict>,
    rng: &mut impl RngCore,
    var_budget: usize,
    shared_plan: bool,
) -> Result<ApproxCountResult> {
    let conjoined = f.conjoin(h)?;
    let g_prime = Rat::one() + (*g - Rat::one()) / Rat::from_integer(3);
    let t = derive_amplification(&g_prime, &base_factor())?;
    let numerator_f = conjoined.tensor_power(t, var_budget)?;
    let denominator_f = h.tensor_power(t, var_budget)?;
    let repetitions = repetitions_for(delta / 2.0)?;

    let num_plan = HashLevelPlan::draw(numerator_f.var_count(), repetitions, rng);
    let den_plan = if shared_plan {
        num_plan.clone()
    } else {
        HashLevelPlan::draw(denominator_f.var_count(), repetitions, rng)
    };

    let mut queries = num_plan.augmented_queries(&numerator_f);
    let num_len = queries.len();
    queries.extend(den_plan.augmented_queries(&denominator_f));
    let batch = QueryBatch {
        queries,
        provenance: BatchProvenance {
            instance_digest: digest64(&(f, h)),
            randomness_digest: digest64(&(&num_plan, &den_plan)),
        },
    };
    let rounds_before = oracle.stats().rounds;
    let sheet = submit_batch(oracle, &batch)?;
    let oracle_rounds = oracle.stats().rounds - rounds_before;

    let num_sheet = AnswerSheet::for_batch(
        &QueryBatch {
            queries: batch.queries[..num_len].to_vec(),
            provenance: batch.provenance,
        },
        sheet.answers()[..num_len].to_vec(),
    );
    let den_sheet = AnswerSheet::for_batch(
        &QueryBatch {
            queries: batch.queries[num_len..].to_vec(),
            provenance: batch.provenance,
        },
        sheet.answers()[num_len..].to_vec(),
    );

    if !den_sheet.answers()[den_plan.query_index(0, 0)].satisfiable {
        return Err(Error::PostselectionImpossible);
    }
    let numerator = if num_sheet.answers()[num_plan.query_index(0, 0)].satisfiable {
        nth_root_scaled(
            rat_to_u128(&raw_hash_estimate(&numerator_f, &num_plan, &num_sheet)),
            t,
        )
    } else {
        Rat::zero()
    };
    let denominator = nth_root_scaled(
        rat_to_u128(&raw_hash_estimate(&denominator_f, &den_plan, &den_sheet)),
        t,
    );

    Ok(ApproxCountResult {
        estimate: numerator / denominator,
        target_factor: *g,
        confidence: 1.0 - delta,
        oracle_rounds,
        repetitions,
        amplification: t,
    })
}

/// Whether `estimate` lies within the multiplicative band
/// [truth / g, truth * g]. A zero truth demands a zero estimate.
pub fn within_factor(estimate: &Rat, truth: &Rat, g: &Rat) -> bool {
    if truth.is_zero() {
        return estimate.is_zero();
    }
    estimate * g >= *truth && *estimate <= truth * g
}

/// Exact check of the error-composition chain used by the ratio estimator:
/// for x = 1/n^d, (1 + x/3)^2 = 1 + 2x/3 + x^2/9 <= 1 + (7/9) x < 1 + x.
/// Returns the grid points where it fails (none, for n >= 1, d >= 1).
pub fn ratio_error_composition_violations(
    n_range: std::ops::RangeInclusive<u32>,
    d_range: std::ops::RangeInclusive<u32>,
) -> Vec<(u32, u32)> {
    let one = BigRational::one();
    let mut violations = Vec::new();
    for n in n_range {
        for d in d_range.clone() {
            let x = BigRational::new(BigInt::one(), BigInt::from(n).pow(d));
            let g_prime = &one + &x / BigRational::from_integer(3.into());
            let squared = &g_prime * &g_prime;
            let seven_ninths = &one + BigRational::new(BigInt::from(7), BigInt::from(9)) * &x;
            let target = &one + &x;
            if !(squared <= seven_ninths && seven_ninths < target) {
                violations.push((n, d));
            }
        }
    }
    violations
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnf::Assignment;
    use crate::oracles::{count_exact, SatOracle};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn rat(n: i128, d: i128) -> Rat {
        Rat::new(n, d)
    }

    #[test]
    fn amplification_examples() {
        let two = Rat::from_integer(2);
        assert_eq!(derive_amplification(&two, &two).unwrap(), 1);
        assert_eq!(derive_amplification(&rat(3, 2), &two).unwrap(), 2);
        assert_eq!(derive_amplification(&rat(10, 9), &two).unwrap(), 7);
        assert!(derive_amplification(&Rat::one(), &two).is_err());
    }

    #[test]
    fn unsatisfiable_formula_estimates_zero_exactly() {
        let f = CnfFormula::new(3, vec![vec![1], vec![-1]]).unwrap();
        let oracle = SatOracle::new();
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let r = approx_count_parallel(&f, &Rat::from_integer(2), 0.1, &oracle, &mut rng, 40)
            .unwrap();
        assert!(r.estimate.is_zero());
        assert_eq!(r.oracle_rounds, 1);
    }

    #[test]
    fn zero_exactness_both_directions() {
        let sat = CnfFormula::new(4, vec![vec![1, 2]]).unwrap();
        let oracle = SatOracle::new();
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let r = approx_count_parallel(&sat, &Rat::from_integer(2), 0.1, &oracle, &mut rng, 40)
            .unwrap();
        assert!(!r.estimate.is_zero());
    }

    #[test]
    fn counts_a_power_of_two_set() {
        // empty formula on 10 variables: exactly 1024 models
        let f = CnfFormula::empty(10).unwrap();
        let truth = Rat::from_integer(1024);
        let g = Rat::from_integer(2);
        let oracle = SatOracle::new();
        let mut hits = 0;
        let runs = 200;
        for seed in 0..runs {
            let mut rng = ChaCha12Rng::seed_from_u64(1_000 + seed);
            let r = approx_count_parallel(&f, &g, 0.1, &oracle, &mut rng, 40).unwrap();
            assert_eq!(r.oracle_rounds, 1);
            if within_factor(&r.estimate, &truth, &g) {
                hits += 1;
            }
        }
        assert!(hits * 10 >= runs * 9, "within factor in {hits}/{runs} runs");
    }

    #[test]
    fn single_model_median_lands_on_one_or_two() {
        // count 1: each level survives with probability exactly 2^-i
        let f = CnfFormula::new(6, vec![vec![1], vec![2], vec![3], vec![4], vec![5], vec![6]])
            .unwrap();
        let oracle = SatOracle::new();
        let mut in_range = 0;
        let runs = 200;
        for seed in 0..runs {
            let mut rng = ChaCha12Rng::seed_from_u64(7_000 + seed);
            let r = approx_count_parallel(&f, &Rat::from_integer(2), 0.1, &oracle, &mut rng, 40)
                .unwrap();
            if r.estimate == Rat::one() || r.estimate == Rat::from_integer(2) {
                in_range += 1;
            }
        }
        assert!(in_range * 10 >= runs * 9, "median in {{1,2}} for {in_range}/{runs}");
    }

    #[test]
    fn satisfiable_levels_form_a_prefix_per_repetition() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let f = CnfFormula::random_ksat(3, 10, 20, &mut rng);
        let plan = HashLevelPlan::draw(10, 6, &mut rng);
        let oracle = SatOracle::new();
        let batch = QueryBatch {
            queries: plan.augmented_queries(&f),
            provenance: BatchProvenance {
                instance_digest: 0,
                randomness_digest: 0,
            },
        };
        let sheet = submit_batch(&oracle, &batch).unwrap();
        for rep in 0..plan.repetitions() {
            let mut seen_unsat = false;
            for level in 0..plan.levels() {
                let sat = sheet.answers()[plan.query_index(rep, level)].satisfiable;
                assert!(!(sat && seen_unsat), "level {level} breaks the prefix");
                seen_unsat |= !sat;
            }
        }
    }

    #[test]
    fn all_levels_unsat_estimates_zero() {
        let f = CnfFormula::new(2, vec![vec![1], vec![-1]]).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let plan = HashLevelPlan::draw(2, 4, &mut rng);
        let oracle = SatOracle::new();
        let batch = QueryBatch {
            queries: plan.augmented_queries(&f),
            provenance: BatchProvenance {
                instance_digest: 0,
                randomness_digest: 0,
            },
        };
        let sheet = submit_batch(&oracle, &batch).unwrap();
        assert!(raw_hash_estimate(&f, &plan, &sheet).is_zero());
    }

    #[test]
    fn random_three_cnf_sixteen_vars_factor_two() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let oracle = SatOracle::new();
        let g = Rat::from_integer(2);
        let mut hits = 0;
        let runs = 20;
        for _ in 0..runs {
            let f = CnfFormula::random_ksat(3, 16, 56, &mut rng);
            let truth = Rat::from_integer(count_exact(&f).unwrap() as i128);
            let r = approx_count_parallel(&f, &g, 0.1, &oracle, &mut rng, 40).unwrap();
            assert_eq!(r.oracle_rounds, 1);
            if within_factor(&r.estimate, &truth, &g) {
                hits += 1;
            }
        }
        assert!(hits >= runs - 3, "{hits}/{runs} within factor 2");
    }

    #[test]
    fn ratio_of_formula_with_itself_is_exactly_one_under_shared_plan() {
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let f = CnfFormula::random_ksat(3, 8, 12, &mut rng);
        let oracle = SatOracle::new();
        let r = approx_count_ratio(
            &f,
            &f,
            &Rat::from_integer(2),
            0.1,
            &oracle,
            &mut rng,
            40,
            true,
        )
        .unwrap();
        assert_eq!(r.estimate, Rat::one());
        assert_eq!(r.oracle_rounds, 1);
    }

    #[test]
    fn ratio_fixture_two_thirds() {
        // f = {x1}, h = {x1 or x2}: p = 2/3 by truth table
        let f = CnfFormula::new(2, vec![vec![1]]).unwrap();
        let h = CnfFormula::new(2, vec![vec![1, 2]]).unwrap();
        let models_h = (0..4u64)
            .filter(|&i| h.evaluate(&Assignment::from_index(2, i)).unwrap())
            .count();
        let models_fh = (0..4u64)
            .filter(|&i| {
                let a = Assignment::from_index(2, i);
                f.evaluate(&a).unwrap() && h.evaluate(&a).unwrap()
            })
            .count();
        assert_eq!((models_fh, models_h), (2, 3));
        let truth = rat(2, 3);
        let g = Rat::from_integer(2);
        let oracle = SatOracle::new();
        let mut hits = 0;
        let runs = 40;
        for seed in 0..runs {
            let mut rng = ChaCha12Rng::seed_from_u64(9_000 + seed);
            let r =
                approx_count_ratio(&f, &h, &g, 0.1, &oracle, &mut rng, 40, false).unwrap();
            assert_eq!(r.oracle_rounds, 1);
            if within_factor(&r.estimate, &truth, &g) {
                hits += 1;
            }
        }
        assert!(hits * 10 >= runs * 9, "{hits}/{runs} within factor");
    }

    #[test]
    fn unsatisfiable_condition_is_rejected() {
        let f = CnfFormula::new(1, vec![vec![1]]).unwrap();
        let h = CnfFormula::new(1, vec![vec![1], vec![-1]]).unwrap();
        let oracle = SatOracle::new();
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let err = approx_count_ratio(
            &f,
            &h,
            &Rat::from_integer(2),
            0.1,
            &oracle,
            &mut rng,
            40,
            false,
        )
        .unwrap_err();
        assert_eq!(err, Error::PostselectionImpossible);
    }

    #[test]
    fn error_composition_chain_holds_on_grid() {
        assert!(ratio_error_composition_violations(1..=64, 1..=4).is_empty());
    }

    #[test]
    fn pairwise_independence_exact_at_one_constraint() {
        // enumerate the whole constraint family on 8 variables: for any two
        // distinct assignments, exactly 1/4 of (subset, parity) pairs keep
        // both alive
        let n = 8u32;
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        for _ in 0..20 {
            let a_idx = rng.gen_range(0..1u64 << n);
            let b_idx = loop {
                let b = rng.gen_range(0..1u64 << n);
                if b != a_idx {
                    break b;
                }
            };
            let a = Assignment::from_index(n as usize, a_idx);
            let b = Assignment::from_index(n as usize, b_idx);
            let mut both = 0u32;
            for subset in 0..1u32 << n {
                for parity in [false, true] {
                    let vars: Vec<usize> =
                        (1..=n as usize).filter(|&v| subset >> (v - 1) & 1 == 1).collect();
                    let c = XorConstraint::new(vars, parity);
                    if c.satisfied_by(&a) && c.satisfied_by(&b) {
                        both += 1;
                    }
                }
            }
            assert_eq!(both, (1u32 << n) * 2 / 4);
        }
    }

    #[test]
    fn pairwise_independence_compounds_over_levels() {
        // survival of a fixed pair under i independent draws is 4^-i
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let a = Assignment::from_index(8, 0b1010_1100);
        let b = Assignment::from_index(8, 0b0110_0001);
        for i in 1..=3u32 {
            let trials = 40_000;
            let mut both = 0u32;
            for _ in 0..trials {
                if (0..i).all(|_| {
                    let c = XorConstraint::random(8, &mut rng);
                    c.satisfied_by(&a) && c.satisfied_by(&b)
                }) {
                    both += 1;
                }
            }
            let observed = both as f64 / trials as f64;
            let expected = 0.25f64.powi(i as i32);
            assert!(
                (observed - expected).abs() < 0.01,
                "level {i}: observed {observed} vs {expected}"
            );
        }
    }

    #[test]
    fn within_factor_edges() {
        let g = Rat::from_integer(2);
        assert!(within_factor(&rat(1, 2), &Rat::one(), &g));
        assert!(within_factor(&Rat::from_integer(2), &Rat::one(), &g));
        assert!(!within_factor(&rat(9, 4), &Rat::one(), &g));
        assert!(within_factor(&Rat::zero(), &Rat::zero(), &g));
        assert!(!within_factor(&Rat::one(), &Rat::zero(), &g));
    }
}
