//! The permanent's random self-reduction.
//!
//! To evaluate perm(A) for an n x n matrix A over GF(p), draw a uniform
//! direction matrix R and query the permanent oracle on the line
//! A + t_i * R at the fixed nonzero points t_i = 1..n+1. The map
//! t -> perm(A + t R) is a polynomial of degree at most n, so interpolating
//! the n+1 answers and evaluating at 0 recovers perm(A). Each individual
//! query A + t_i R is uniform over all matrices, so queries leak nothing
//! about A.

use crate::error::{Error, Result};
use crate::field::{lagrange_interpolate, FieldElement, FieldMatrix};
use crate::oracles::{permanent_exact, FaultyOracle, PermanentOracle};
use crate::randomness::BitString;
use crate::reduction::{run_reduction, RandomReduction};
use rand::Rng;
use rand_chacha::ChaCha12Rng;

/// Bits of tape one direction matrix consumes: 64 per entry, reduced mod p.
pub fn randomness_len_for(n: usize) -> usize {
    64 * n * n
}

/// One materialized run of the self-reduction: the base instance, the random
/// direction, and the sample points the queries are taken at.
#[derive(Clone, Debug)]
pub struct PermRsrInstance {
    base: FieldMatrix,
    direction: FieldMatrix,
    sample_points: Vec<FieldElement>,
}

impl PermRsrInstance {
    /// Read the direction matrix off the tape and fix the canonical sample
    /// points t_i = i for i = 1..n+1.
    pub fn from_tape(base: &FieldMatrix, tape: &BitString) -> Self {
        let n = base.dimension();
        let p = base.modulus();
        debug_assert!(p >= (n as u64) + 2, "modulus admits n+1 nonzero points");
        let mut reader = tape.reader();
        let direction = FieldMatrix::from_tape(n, p, &mut reader);
        let sample_points = (1..=(n as u64) + 1)
            .map(|t| FieldElement::reduced(t, p))
            .collect();
        Self {
            base: base.clone(),
            direction,
            sample_points,
        }
    }

    pub fn sample_points(&self) -> &[FieldElement] {
        &self.sample_points
    }

    pub fn direction(&self) -> &FieldMatrix {
        &self.direction
    }

    /// The index-th query matrix, base + t_index * direction.
    pub fn query(&self, index: usize) -> FieldMatrix {
        self.base
            .add_scaled(self.sample_points[index], &self.direction)
    }

    /// Interpolate the answers at the sample points and read off the value
    /// at zero.
    pub fn recover(&self, answers: &[FieldElement]) -> FieldElement {
        let points: Vec<(FieldElement, FieldElement)> = self
            .sample_points
            .iter()
            .copied()
            .zip(answers.iter().copied())
            .collect();
        let poly = lagrange_interpolate(&points).expect("sample points are distinct");
        poly.evaluate(FieldElement::zero(self.base.modulus()))
    }
}

/// The (sigma, phi, k = n+1) reduction computing the permanent of n x n
/// matrices over GF(p) from permanent queries on uniform matrices.
pub fn perm_rsr(
    n: usize,
    modulus: u64,
) -> Result<RandomReduction<FieldMatrix, FieldMatrix, FieldElement, FieldElement>> {
    crate::field::check_modulus(modulus)?;
    if modulus < (n as u64) + 2 {
        return Err(Error::FieldTooSmall {
            modulus,
            required: (n as u64) + 2,
            dimension: n,
        });
    }
    Ok(RandomReduction::new(
        n + 1,
        randomness_len_for(n),
        |i, a: &FieldMatrix, r| PermRsrInstance::from_tape(a, r).query(i),
        |a: &FieldMatrix, r, answers: &[FieldElement]| {
            PermRsrInstance::from_tape(a, r).recover(answers)
        },
    ))
}

/// Fraction of trials on which the reduction returns the true permanent when
/// every oracle answer is independently wrong with probability `epsilon`.
/// Each trial draws a fresh uniform instance and a fresh fault stream.
pub fn perm_rsr_success_curve(
    n: usize,
    modulus: u64,
    epsilon: f64,
    trials: usize,
    rng: &mut ChaCha12Rng,
) -> Result<f64> {
    let rr = perm_rsr(n, modulus)?;
    let mut successes = 0usize;
    for _ in 0..trials {
        let a = FieldMatrix::random(n, modulus, rng)?;
        let truth = permanent_exact(&a)?;
        let oracle = FaultyOracle::new(PermanentOracle::new(), epsilon, rng.gen())?;
        if run_reduction(&rr, &a, &oracle, rng)? == truth {
            successes += 1;
        }
    }
    Ok(successes as f64 / trials as f64)
}

/// Same curve for a boosted copy of the reduction.
pub fn perm_rsr_boosted_success_curve(
    n: usize,
    modulus: u64,
    epsilon: f64,
    t: usize,
    trials: usize,
    rng: &mut ChaCha12Rng,
) -> Result<f64> {
    let rr = perm_rsr(n, modulus)?.boost(t);
    let mut successes = 0usize;
    for _ in 0..trials {
        let a = FieldMatrix::random(n, modulus, rng)?;
        let truth = permanent_exact(&a)?;
        let oracle = FaultyOracle::new(PermanentOracle::new(), epsilon, rng.gen())?;
        if run_reduction(&rr, &a, &oracle, rng)? == truth {
            successes += 1;
        }
    }
    Ok(successes as f64 / trials as f64)
}
