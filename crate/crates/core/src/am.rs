//! Monte-Carlo simulator of the advice-based Arthur-Merlin protocol for
//! languages that randomly reduce to SAT.
//!
//! Arthur holds, as advice, the probability p_i that the i-th query of the
//! reduction is satisfiable (input-independent, because per-index query
//! distributions are). A session draws m = 9k^3 tapes, asks Merlin for a
//! witness-or-NIL transcript per tape, and accepts iff
//!
//! 1. every claimed witness verifies,
//! 2. the reduction's decoder accepts the claimed bits on every tape, and
//! 3. for each query index, more than p_i m - 2 sqrt(k m) queries were
//!    proved satisfiable.
//!
//! Merlin can never fake a witness for an unsatisfiable query, so lying is
//! NIL-only; the third check meters how many satisfiable queries he may deny
//! before the Z_i statistic exposes him.

use crate::cnf::CnfFormula;
use crate::error::{Error, Result};
use crate::oracles::{BatchOracle, SatVerdict};
use crate::randomness::BitString;
use crate::reduction::{QueryBatch, RandomReduction};
use num::rational::Ratio;
use num::Zero;
use rand::RngCore;

/// Random reductions whose queries are SAT instances and whose output is a
/// membership bit.
pub type SatReduction<X> = RandomReduction<X, CnfFormula, bool, bool>;

type Rat = Ratio<i128>;

/// Number of tapes Arthur samples per session.
pub fn protocol_repetitions(k: usize) -> usize {
    9 * k * k * k
}

/// Largest tape length the exact advice mode will enumerate.
pub const EXACT_ADVICE_TAPE_BITS: usize = 22;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AdviceMode {
    Exact,
    Sampled { samples: usize },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AdviceProvenance {
    ExactEnumeration,
    Sampled { samples: usize },
}

/// Arthur's advice: the per-index query satisfiability probabilities.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Advice {
    pub probabilities: Vec<Rat>,
    pub provenance: AdviceProvenance,
}

/// Compute the advice for a reduction. The probabilities do not depend on
/// the instance, so any representative of the right size works; exact mode
/// enumerates every tape of the declared length.
pub fn compute_advice<X>(
    rr: &SatReduction<X>,
    representative: &X,
    mode: AdviceMode,
    oracle: &dyn BatchOracle<CnfFormula, SatVerdict>,
    rng: &mut impl RngCore,
) -> Result<Advice> {
    let k = rr.query_count();
    match mode {
        AdviceMode::Exact => {
            let bits = rr.randomness_len();
            if bits > EXACT_ADVICE_TAPE_BITS {
                return Err(Error::ResourceLimit {
                    message: format!(
                        "exact advice enumerates 2^{bits} tapes; limit is 2^{EXACT_ADVICE_TAPE_BITS}"
                    ),
                });
            }
            let total: u64 = 1 << bits;
            let mut hits = vec![0u64; k];
            for idx in 0..total {
                let tape = BitString::from_index(bits, idx);
                for (i, hit) in hits.iter_mut().enumerate() {
                    let q = rr.query(i, representative, &tape);
                    if oracle.answer_indexed(idx * k as u64 + i as u64, &q)?.satisfiable {
                        *hit += 1;
                    }
                }
            }
            Ok(Advice {
                probabilities: hits
                    .into_iter()
                    .map(|h| Rat::new(h as i128, total as i128))
                    .collect(),
                provenance: AdviceProvenance::ExactEnumeration,
            })
        }
        AdviceMode::Sampled { samples } => {
            assert!(samples > 0);
            let mut hits = vec![0u64; k];
            for s in 0..samples {
                let tape = rr.draw_tape(rng);
                for (i, hit) in hits.iter_mut().enumerate() {
                    let q = rr.query(i, representative, &tape);
                    if oracle
                        .answer_indexed((s * k + i) as u64, &q)?
                        .satisfiable
                    {
                        *hit += 1;
                    }
                }
            }
            Ok(Advice {
                probabilities: hits
                    .into_iter()
                    .map(|h| Rat::new(h as i128, samples as i128))
                    .collect(),
                provenance: AdviceProvenance::Sampled { samples },
            })
        }
    }
}

/// Merlin's claim for one query.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum WitnessClaim {
    Witness(crate::cnf::Assignment),
    Nil,
}

impl WitnessClaim {
    pub fn claims_satisfiable(&self) -> bool {
        matches!(self, WitnessClaim::Witness(_))
    }
}

/// Merlin's message for one tape: a claim per query index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transcript {
    pub claims: Vec<WitnessClaim>,
}

/// How Merlin plays.
#[derive(Clone, Debug)]
pub enum MerlinStrategy {
    Honest,
    Adversarial(AdversarialPolicy),
}

/// Lying rule for the adversarial Merlin: deny satisfiable queries at one
/// target index, up to a budget. Lies that flip the decoder's verdict for
/// their tape are spent first (ascending tape order), then any remaining
/// budget denies the remaining satisfiable target queries.
#[derive(Clone, Debug)]
pub struct AdversarialPolicy {
    pub target_index: usize,
    pub lie_budget: usize,
}

/// One session's sampled tapes and their materialized query batches.
pub struct Session<'a, X> {
    rr: &'a SatReduction<X>,
    instance: &'a X,
    tapes: Vec<BitString>,
    batches: Vec<QueryBatch<CnfFormula>>,
}

impl<'a, X: std::hash::Hash> Session<'a, X> {
    /// Draw m = 9k^3 tapes and fix every query up front.
    pub fn draw(rr: &'a SatReduction<X>, instance: &'a X, rng: &mut impl RngCore) -> Self {
        let m = protocol_repetitions(rr.query_count());
        let tapes: Vec<BitString> = (0..m).map(|_| rr.draw_tape(rng)).collect();
        let batches = tapes
            .iter()
            .map(|tape| rr.build_batch(instance, tape))
            .collect();
        Self {
            rr,
            instance,
            tapes,
            batches,
        }
    }

    pub fn tape_count(&self) -> usize {
        self.tapes.len()
    }

    pub fn batches(&self) -> &[QueryBatch<CnfFormula>] {
        &self.batches
    }

    fn decode(&self, j: usize, bits: &[bool]) -> bool {
        self.rr.decode(self.instance, &self.tapes[j], bits)
    }
}

/// Honest Merlin: a valid witness for every satisfiable query, NIL for the
/// rest.
pub fn merlin_honest<X: std::hash::Hash>(
    session: &Session<'_, X>,
    oracle: &dyn BatchOracle<CnfFormula, SatVerdict>,
) -> Result<Vec<Transcript>> {
    let k = session.rr.query_count();
    let flat: Vec<CnfFormula> = session
        .batches
        .iter()
        .flat_map(|b| b.queries.iter().cloned())
        .collect();
    let verdicts = oracle.answer_batch(&flat)?;
    Ok(verdicts
        .chunks(k)
        .map(|chunk| Transcript {
            claims: chunk
                .iter()
                .map(|v| match (&v.satisfiable, &v.witness) {
                    (true, Some(w)) => WitnessClaim::Witness(w.clone()),
                    _ => WitnessClaim::Nil,
                })
                .collect(),
        })
        .collect())
}

/// Adversarial Merlin per the policy. Lies are NIL-only: no strategy can
/// fabricate a witness the verifier would accept.
pub fn merlin_adversarial<X: std::hash::Hash>(
    session: &Session<'_, X>,
    oracle: &dyn BatchOracle<CnfFormula, SatVerdict>,
    policy: &AdversarialPolicy,
) -> Result<Vec<Transcript>> {
    let k = session.rr.query_count();
    if policy.target_index >= k {
        return Err(Error::Policy {
            message: format!(
                "target index {} out of range for {k} queries",
                policy.target_index
            ),
        });
    }
    let mut transcripts = merlin_honest(session, oracle)?;
    let mut bits: Vec<Vec<bool>> = transcripts
        .iter()
        .map(|t| t.claims.iter().map(|c| c.claims_satisfiable()).collect())
        .collect();
    let target = policy.target_index;
    let mut budget = policy.lie_budget;

    // pass 1: lies that flip the decoder to accept their tape
    for j in 0..transcripts.len() {
        if budget == 0 {
            break;
        }
        if bits[j][target] && !session.decode(j, &bits[j]) {
            bits[j][target] = false;
            if session.decode(j, &bits[j]) {
                transcripts[j].claims[target] = WitnessClaim::Nil;
                budget -= 1;
            } else {
                bits[j][target] = true;
            }
        }
    }
    // pass 2: exhaust the budget denying the remaining satisfiable targets
    for j in 0..transcripts.len() {
        if budget == 0 {
            break;
        }
        if bits[j][target] {
            bits[j][target] = false;
            transcripts[j].claims[target] = WitnessClaim::Nil;
            budget -= 1;
        }
    }
    Ok(transcripts)
}

/// Per-index tally against its acceptance threshold.
#[derive(Clone, Debug)]
pub struct IndexStats {
    /// Z_i: queries at this index proved satisfiable.
    pub proved: usize,
    /// The advice probability p_i.
    pub advice: Rat,
    /// Whether Z_i > p_i m - 2 sqrt(k m).
    pub threshold_passed: bool,
}

/// Verdict and per-check diagnostics for one session.
#[derive(Clone, Debug)]
pub struct ProtocolOutcome {
    pub accepted: bool,
    /// Lowest-numbered failed check, if any.
    pub failed_check: Option<u8>,
    pub index_stats: Vec<IndexStats>,
    pub tape_count: usize,
}

/// Exact comparison Z > p m - 2 sqrt(k m) without floating point:
/// p m - Z <= 0, or (p m - Z)^2 < 4 k m.
fn threshold_passed(proved: usize, advice: &Rat, k: usize, m: usize) -> bool {
    let deficit = advice * Rat::from_integer(m as i128) - Rat::from_integer(proved as i128);
    if deficit <= Rat::zero() {
        return true;
    }
    deficit * deficit < Rat::from_integer(4 * k as i128 * m as i128)
}

/// Run Arthur's three checks on a set of transcripts.
pub fn arthur_judge<X: std::hash::Hash>(
    session: &Session<'_, X>,
    advice: &Advice,
    transcripts: &[Transcript],
) -> ProtocolOutcome {
    let k = session.rr.query_count();
    let m = session.tape_count();
    assert_eq!(advice.probabilities.len(), k, "advice length must match k");
    assert_eq!(transcripts.len(), m, "one transcript per tape");

    // check 1: every claimed witness verifies against its query
    let mut witnesses_valid = true;
    for (t, batch) in transcripts.iter().zip(&session.batches) {
        for (claim, query) in t.claims.iter().zip(&batch.queries) {
            if let WitnessClaim::Witness(w) = claim {
                if !query.evaluate(w).unwrap_or(false) {
                    witnesses_valid = false;
                }
            }
        }
    }

    // check 2: the decoder accepts the claimed bits on every tape
    let mut decoder_accepts = true;
    for (j, t) in transcripts.iter().enumerate() {
        let bits: Vec<bool> = t.claims.iter().map(|c| c.claims_satisfiable()).collect();
        if !session.decode(j, &bits) {
            decoder_accepts = false;
        }
    }

    // check 3: enough proved-satisfiable queries per index
    let mut index_stats = Vec::with_capacity(k);
    let mut thresholds_ok = true;
    for i in 0..k {
        let proved = transcripts
            .iter()
            .filter(|t| t.claims[i].claims_satisfiable())
            .count();
        let passed = threshold_passed(proved, &advice.probabilities[i], k, m);
        thresholds_ok &= passed;
        index_stats.push(IndexStats {
            proved,
            advice: advice.probabilities[i],
            threshold_passed: passed,
        });
    }

    let failed_check = if !witnesses_valid {
        Some(1)
    } else if !decoder_accepts {
        Some(2)
    } else if !thresholds_ok {
        Some(3)
    } else {
        None
    };
    ProtocolOutcome {
        accepted: failed_check.is_none(),
        failed_check,
        index_stats,
        tape_count: m,
    }
}

/// One full session: draw tapes, collect transcripts from the given Merlin,
/// judge.
pub fn arthur_session<X: std::hash::Hash>(
    instance: &X,
    rr: &SatReduction<X>,
    advice: &Advice,
    merlin: &MerlinStrategy,
    oracle: &dyn BatchOracle<CnfFormula, SatVerdict>,
    rng: &mut impl RngCore,
) -> Result<ProtocolOutcome> {
    let session = Session::draw(rr, instance, rng);
    let transcripts = match merlin {
        MerlinStrategy::Honest => merlin_honest(&session, oracle)?,
        MerlinStrategy::Adversarial(policy) => merlin_adversarial(&session, oracle, policy)?,
    };
    Ok(arthur_judge(&session, advice, &transcripts))
}

/// Closed-form audit of the protocol's parameters for one (k, n).
#[derive(Clone, Debug, serde::Serialize)]
pub struct BoundAuditEntry {
    pub k: usize,
    pub n: u32,
    /// m = 9 k^3.
    pub m: usize,
    /// m/k - 2 sqrt(km); equals 3 k^2 exactly.
    pub lying_margin: u64,
    /// Whether the identity lying_margin == 3 k^2 holds (it always does).
    pub margin_identity: bool,
    /// Chebyshev completeness term 1/(4k).
    pub chebyshev_bound: f64,
    /// Chernoff exponent for the soundness tail: 2k.
    pub chernoff_exponent: u64,
    /// 1/4 + 2^-n, and whether it is below 1/3.
    pub completeness_bound: f64,
    pub completeness_certified: bool,
    /// m 2^-n + 1/(4k), and whether it is below 1/3.
    pub soundness_bound: f64,
    pub soundness_certified: bool,
    /// Both sides certified: the protocol's error bounds bite at this size.
    pub certified: bool,
}

/// Integer square root check: km = 9k^4 is a perfect square with root 3k^2.
fn exact_lying_margin(k: u64) -> (u64, bool) {
    let m = 9 * k * k * k;
    let km = k * m;
    let root = 3 * k * k;
    let identity = root * root == km && m / k >= 2 * root;
    (m / k - 2 * root, identity)
}

pub fn bound_audit_entry(k: usize, n: u32) -> BoundAuditEntry {
    let m = protocol_repetitions(k);
    let (lying_margin, margin_identity) = exact_lying_margin(k as u64);
    let third = Rat::new(1, 3);
    let quarter = Rat::new(1, 4);
    let chebyshev = Rat::new(1, 4 * k as i128);
    // 2^-n as an exact rational where it fits; beyond 63 bits it is smaller
    // than any grid this audit runs on and certification is immediate
    let (completeness_certified, soundness_certified) = if n <= 63 {
        let two_pow = Rat::new(1, 1i128 << n);
        (
            quarter + two_pow < third,
            Rat::from_integer(m as i128) * two_pow + chebyshev < third,
        )
    } else {
        (true, true)
    };
    BoundAuditEntry {
        k,
        n,
        m,
        lying_margin,
        margin_identity,
        chebyshev_bound: 1.0 / (4.0 * k as f64),
        chernoff_exponent: 2 * k as u64,
        completeness_bound: 0.25 + 0.5f64.powi(n as i32),
        completeness_certified,
        soundness_bound: m as f64 * 0.5f64.powi(n as i32) + 1.0 / (4.0 * k as f64),
        soundness_certified,
        certified: completeness_certified && soundness_certified,
    }
}

/// Audit a grid of (k, n) pairs.
pub fn bound_audit(
    k_range: std::ops::RangeInclusive<usize>,
    n_range: std::ops::RangeInclusive<u32>,
) -> Vec<BoundAuditEntry> {
    let mut entries = Vec::new();
    for k in k_range {
        for n in n_range.clone() {
            entries.push(bound_audit_entry(k, n));
        }
    }
    entries
}
