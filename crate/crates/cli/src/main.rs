//! Unified command-line front end.
//!
//! Every subcommand emits one JSON report on stdout. Reports are pure
//! functions of (inputs, seed): rerunning with the same seed and inputs
//! reproduces them byte for byte apart from the `elapsed_ms` field, and the
//! worker count never changes results because batch answers are reassembled
//! by index.
//!
//! Exit codes: 0 on success, 1 on domain errors, 2 on usage errors.

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use countkit::am::{
    self, bound_audit, bound_audit_entry, compute_advice, AdviceMode, AdversarialPolicy,
    MerlinStrategy,
};
use countkit::approx::{approx_count_parallel, approx_count_ratio, within_factor, Rat};
use countkit::cnf::CnfFormula;
use countkit::field::FieldMatrix;
use countkit::fixtures::{
    parity, parity_reduction, failure_over_16_bits, planted_sat_reduction, NoiseSpec,
    ParityOracle, PlantedInstance,
};
use countkit::oracles::{
    count_exact, permanent_exact, BatchOracle, FaultyOracle, PermanentOracle, SatOracle,
    COUNT_VARIABLE_BUDGET,
};
use countkit::perm_rsr::perm_rsr;
use countkit::randomness::derive_rng;
use countkit::reduction::run_reduction;
use num::ToPrimitive;
use rand::Rng;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};
use std::io::Write as _;
use std::path::PathBuf;
use std::time::Instant;

#[derive(Parser)]
#[command(name = "countkit", version, about = "counting oracles, random reductions, and protocol simulations", max_term_width = 100)]
struct Cli {
    /// Master seed; drawn fresh and echoed in the report when omitted.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for batch oracle evaluation (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,

    /// Variable budget for tensor-power amplification.
    #[arg(long, global = true, default_value_t = 40)]
    budget_vars: usize,

    /// Emit JSON on stdout (the only supported mode; kept for forward
    /// compatibility).
    #[arg(long, global = true, default_value_t = true)]
    json: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact model count of a DIMACS CNF file.
    CountExact { file: PathBuf },
    /// Approximate model count within a multiplicative factor, one oracle
    /// round.
    CountApprox {
        file: PathBuf,
        /// Target factor g > 1; accepts "2", "3/2", or "1.5".
        #[arg(long, default_value = "2")]
        factor: String,
        /// Failure probability.
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        /// Estimate the post-selected ratio count(f and h)/count(h) against
        /// this condition file instead of a plain count.
        #[arg(long)]
        ratio: Option<PathBuf>,
        /// Reuse one constraint plan for numerator and denominator.
        #[arg(long, default_value_t = false)]
        shared_plan: bool,
        /// Also report the estimate normalized by 2^vars.
        #[arg(long, default_value_t = false)]
        probability: bool,
    },
    /// Exact permanent of a matrix JSON file.
    PermExact { file: PathBuf },
    /// Run the permanent's random self-reduction on a matrix.
    RsrPerm {
        #[arg(long)]
        matrix: PathBuf,
        /// Per-query fault rate injected into the permanent oracle.
        #[arg(long)]
        fault: Option<f64>,
        /// Boost level t: 24 t independent runs, plurality vote.
        #[arg(long)]
        boost: Option<usize>,
    },
    /// Run a named random reduction on an input file.
    RrRun {
        /// One of: perm-rsr (matrix JSON), parity (JSON integer).
        #[arg(long)]
        reduction: String,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        fault: Option<f64>,
        #[arg(long)]
        boost: Option<usize>,
    },
    /// Simulate Arthur-Merlin sessions on a planted fixture.
    AmSim {
        /// Fixture family: uniform (all advice 1/2) or skewed.
        #[arg(long, default_value = "uniform")]
        fixture: String,
        /// Query count of the fixture reduction.
        #[arg(long, default_value_t = 4)]
        k: usize,
        /// Nominal instance size for the bound audit.
        #[arg(long, default_value_t = 20)]
        n: u32,
        #[arg(long, value_enum, default_value_t = MerlinKind::Honest)]
        merlin: MerlinKind,
        /// Lie budget for the adversarial Merlin (default: m).
        #[arg(long)]
        lies: Option<usize>,
        /// Plant a yes or no instance.
        #[arg(long, value_enum, default_value_t = Plant::Yes)]
        plant: Plant,
        #[arg(long, default_value_t = 100)]
        sessions: usize,
        /// Adversarial target query index.
        #[arg(long, default_value_t = 0)]
        target: usize,
    },
    /// Closed-form audit of the protocol bounds over a (k, n) grid.
    AuditBounds {
        #[arg(long, default_value_t = 4)]
        k: usize,
        #[arg(long, default_value_t = 20)]
        n: u32,
        #[arg(long)]
        k_max: Option<usize>,
        #[arg(long)]
        n_max: Option<u32>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MerlinKind {
    Honest,
    Adversarial,
}

#[derive(Clone, Copy, ValueEnum)]
enum Plant {
    Yes,
    No,
}

fn main() -> std::process::ExitCode {
    let cli = Cli::parse();
    let seed = cli.seed.unwrap_or_else(rand::random);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.workers)
        .build()
        .expect("worker pool");
    let started = Instant::now();
    let result = pool.install(|| dispatch(&cli, seed));
    match result {
        Ok((command_name, digest, mut fields)) => {
            let mut report = Map::new();
            report.insert("command".into(), Value::String(command_name));
            report.insert("seed".into(), json!(seed));
            report.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
            report.insert("inputs_digest".into(), Value::String(digest));
            report.append(&mut fields);
            report.insert(
                "elapsed_ms".into(),
                json!(started.elapsed().as_secs_f64() * 1e3),
            );
            let mut stdout = std::io::stdout().lock();
            let _ = writeln!(
                stdout,
                "{}",
                serde_json::to_string_pretty(&Value::Object(report)).expect("report is valid JSON")
            );
            std::process::ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::ExitCode::FAILURE
        }
    }
}

type Report = (String, String, Map<String, Value>);

fn dispatch(cli: &Cli, seed: u64) -> anyhow::Result<Report> {
    match &cli.command {
        Command::CountExact { file } => count_exact_cmd(file),
        Command::CountApprox {
            file,
            factor,
            delta,
            ratio,
            shared_plan,
            probability,
        } => count_approx_cmd(
            file,
            factor,
            *delta,
            ratio.as_deref(),
            *shared_plan,
            *probability,
            seed,
            cli.budget_vars,
        ),
        Command::PermExact { file } => perm_exact_cmd(file),
        Command::RsrPerm {
            matrix,
            fault,
            boost,
        } => rr_run_cmd("perm-rsr", matrix, *fault, *boost, seed).map(
            |(_, digest, fields)| ("rsr-perm".to_string(), digest, fields),
        ),
        Command::RrRun {
            reduction,
            input,
            fault,
            boost,
        } => rr_run_cmd(reduction, input, *fault, *boost, seed),
        Command::AmSim {
            fixture,
            k,
            n,
            merlin,
            lies,
            plant,
            sessions,
            target,
        } => am_sim_cmd(fixture, *k, *n, *merlin, *lies, *plant, *sessions, *target, seed),
        Command::AuditBounds { k, n, k_max, n_max } => audit_bounds_cmd(*k, *n, *k_max, *n_max),
    }
}

fn file_digest(contents: &[&str]) -> String {
    let mut hasher = Sha256::new();
    for c in contents {
        hasher.update(c.as_bytes());
    }
    format!("{:x}", hasher.finalize())
}

fn read_input(path: &std::path::Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn rat_fields(map: &mut Map<String, Value>, key: &str, value: &Rat) {
    map.insert(key.into(), json!(format!("{}/{}", value.numer(), value.denom())));
    map.insert(
        format!("{key}_float"),
        json!(value.to_f64().unwrap_or(f64::NAN)),
    );
}

fn parse_factor(text: &str) -> anyhow::Result<Rat> {
    let text = text.trim();
    if let Some((n, d)) = text.split_once('/') {
        let n: i128 = n.trim().parse()?;
        let d: i128 = d.trim().parse()?;
        if d <= 0 {
            return Err(anyhow!("factor denominator must be positive"));
        }
        return Ok(Rat::new(n, d));
    }
    if let Some((int, frac)) = text.split_once('.') {
        if frac.len() > 9 {
            return Err(anyhow!("at most 9 decimal places supported"));
        }
        let scale = 10i128.pow(frac.len() as u32);
        let int: i128 = if int.is_empty() { 0 } else { int.parse()? };
        let frac: i128 = if frac.is_empty() { 0 } else { frac.parse()? };
        return Ok(Rat::new(int * scale + frac, scale));
    }
    Ok(Rat::from_integer(text.parse::<i128>()?))
}

fn count_exact_cmd(path: &std::path::Path) -> anyhow::Result<Report> {
    let text = read_input(path)?;
    let f = CnfFormula::parse_dimacs(&text)?;
    let value = count_exact(&f)?;
    let mut fields = Map::new();
    fields.insert("value".into(), json!(value));
    fields.insert("vars".into(), json!(f.var_count()));
    fields.insert("clauses".into(), json!(f.clause_count()));
    fields.insert("queries".into(), json!(1));
    Ok(("count-exact".into(), file_digest(&[&text]), fields))
}

fn perm_exact_cmd(path: &std::path::Path) -> anyhow::Result<Report> {
    let text = read_input(path)?;
    let m = FieldMatrix::from_json(&text)?;
    let value = permanent_exact(&m)?;
    let mut fields = Map::new();
    fields.insert("value".into(), json!(value.value()));
    fields.insert("modulus".into(), json!(m.modulus()));
    fields.insert("dimension".into(), json!(m.dimension()));
    fields.insert("queries".into(), json!(1));
    Ok(("perm-exact".into(), file_digest(&[&text]), fields))
}

#[allow(clippy::too_many_arguments)]
fn count_approx_cmd(
    path: &std::path::Path,
    factor: &str,
    delta: f64,
    ratio: Option<&std::path::Path>,
    shared_plan: bool,
    probability: bool,
    seed: u64,
    budget_vars: usize,
) -> anyhow::Result<Report> {
    let text = read_input(path)?;
    let f = CnfFormula::parse_dimacs(&text)?;
    let g = parse_factor(factor)?;
    let oracle = SatOracle::new();
    let mut rng = derive_rng(seed, "count-approx");
    let mut fields = Map::new();
    rat_fields(&mut fields, "factor", &g);
    fields.insert("delta".into(), json!(delta));

    let digest = match ratio {
        None => {
            let result = approx_count_parallel(&f, &g, delta, &oracle, &mut rng, budget_vars)?;
            rat_fields(&mut fields, "estimate", &result.estimate);
            fields.insert("rounds".into(), json!(result.oracle_rounds));
            fields.insert("repetitions".into(), json!(result.repetitions));
            fields.insert("amplification".into(), json!(result.amplification));
            if f.var_count() <= COUNT_VARIABLE_BUDGET {
                let exact = count_exact(&f)?;
                fields.insert("exact".into(), json!(exact));
                fields.insert(
                    "within_factor".into(),
                    json!(within_factor(
                        &result.estimate,
                        &Rat::from_integer(exact as i128),
                        &g
                    )),
                );
            }
            if probability {
                let denom = Rat::from_integer(1i128 << f.var_count());
                rat_fields(&mut fields, "probability", &(result.estimate / denom));
            }
            file_digest(&[&text])
        }
        Some(h_path) => {
            let h_text = read_input(h_path)?;
            let h = CnfFormula::parse_dimacs(&h_text)?;
            let result = approx_count_ratio(
                &f,
                &h,
                &g,
                delta,
                &oracle,
                &mut rng,
                budget_vars,
                shared_plan,
            )?;
            rat_fields(&mut fields, "estimate", &result.estimate);
            fields.insert("rounds".into(), json!(result.oracle_rounds));
            fields.insert("repetitions".into(), json!(result.repetitions));
            fields.insert("amplification".into(), json!(result.amplification));
            fields.insert("shared_plan".into(), json!(shared_plan));
            if f.var_count() <= COUNT_VARIABLE_BUDGET {
                let num = count_exact(&f.conjoin(&h)?)?;
                let den = count_exact(&h)?;
                if den > 0 {
                    let truth = Rat::new(num as i128, den as i128);
                    rat_fields(&mut fields, "exact", &truth);
                    fields.insert(
                        "within_factor".into(),
                        json!(within_factor(&result.estimate, &truth, &g)),
                    );
                }
            }
            file_digest(&[&text, &h_text])
        }
    };
    fields.insert("stats".into(), serde_json::to_value(oracle.stats())?);
    Ok(("count-approx".into(), digest, fields))
}

fn rr_run_cmd(
    reduction: &str,
    input: &std::path::Path,
    fault: Option<f64>,
    boost: Option<usize>,
    seed: u64,
) -> anyhow::Result<Report> {
    let text = read_input(input)?;
    let mut rng = derive_rng(seed, "rr-run");
    let mut fields = Map::new();
    if let Some(t) = boost {
        fields.insert("boost".into(), json!(t));
    }
    if let Some(eps) = fault {
        fields.insert("fault".into(), json!(eps));
    }

    match reduction {
        "perm-rsr" => {
            let a = FieldMatrix::from_json(&text)?;
            let rr = perm_rsr(a.dimension(), a.modulus())?;
            let rr = match boost {
                Some(t) => rr.boost(t),
                None => rr,
            };
            let output = match fault {
                Some(eps) => {
                    let oracle =
                        FaultyOracle::new(PermanentOracle::new(), eps, rng.gen::<u64>())?;
                    let out = run_reduction(&rr, &a, &oracle, &mut rng)?;
                    record_stats(&mut fields, oracle.stats())?;
                    out
                }
                None => {
                    let oracle = PermanentOracle::new();
                    let out = run_reduction(&rr, &a, &oracle, &mut rng)?;
                    record_stats(&mut fields, oracle.stats())?;
                    out
                }
            };
            fields.insert("output".into(), json!(output.value()));
            let truth = permanent_exact(&a)?;
            fields.insert("truth".into(), json!(truth.value()));
            fields.insert("success".into(), json!(output == truth));
        }
        "parity" => {
            let x: u64 = serde_json::from_str(text.trim())
                .context("parity input must be a JSON integer")?;
            let rr = parity_reduction(3, failure_over_16_bits(0));
            let rr = match boost {
                Some(t) => rr.boost(t),
                None => rr,
            };
            let output = match fault {
                Some(eps) => {
                    let oracle = FaultyOracle::new(ParityOracle::new(), eps, rng.gen::<u64>())?;
                    let out = run_reduction(&rr, &x, &oracle, &mut rng)?;
                    record_stats(&mut fields, oracle.stats())?;
                    out
                }
                None => {
                    let oracle = ParityOracle::new();
                    let out = run_reduction(&rr, &x, &oracle, &mut rng)?;
                    record_stats(&mut fields, oracle.stats())?;
                    out
                }
            };
            fields.insert("output".into(), json!(output));
            fields.insert("truth".into(), json!(parity(x)));
            fields.insert("success".into(), json!(output == parity(x)));
        }
        other => return Err(anyhow!("unknown reduction '{other}' (try perm-rsr or parity)")),
    }
    fields.insert("reduction".into(), json!(reduction));
    Ok(("rr-run".into(), file_digest(&[&text]), fields))
}

fn record_stats(
    fields: &mut Map<String, Value>,
    stats: countkit::oracles::OracleStats,
) -> anyhow::Result<()> {
    fields.insert("queries".into(), json!(stats.total_queries));
    fields.insert("rounds".into(), json!(stats.rounds));
    Ok(())
}

fn fixture_noise(fixture: &str, k: usize) -> anyhow::Result<Vec<NoiseSpec>> {
    if k < 1 {
        return Err(anyhow!("k must be at least 1"));
    }
    match fixture {
        "uniform" => Ok(vec![NoiseSpec::half(); k - 1]),
        "skewed" => {
            let cycle = [
                NoiseSpec::new(3, 4),
                NoiseSpec::new(15, 16),
                NoiseSpec::new(1, 4),
                NoiseSpec::new(9, 16),
            ];
            Ok((0..k - 1).map(|i| cycle[i % cycle.len()]).collect())
        }
        other => Err(anyhow!("unknown fixture '{other}' (try uniform or skewed)")),
    }
}

#[allow(clippy::too_many_arguments)]
fn am_sim_cmd(
    fixture: &str,
    k: usize,
    n: u32,
    merlin: MerlinKind,
    lies: Option<usize>,
    plant: Plant,
    sessions: usize,
    target: usize,
    seed: u64,
) -> anyhow::Result<Report> {
    let noise = fixture_noise(fixture, k)?;
    let rr = planted_sat_reduction(1, &noise, false);
    let oracle = SatOracle::new();
    let instance = PlantedInstance::new(n as usize, matches!(plant, Plant::Yes));
    let m = am::protocol_repetitions(k);

    let mut advice_rng = derive_rng(seed, "am-advice");
    let mode = if rr.randomness_len() <= am::EXACT_ADVICE_TAPE_BITS {
        AdviceMode::Exact
    } else {
        AdviceMode::Sampled { samples: 20_000 }
    };
    let advice = compute_advice(&rr, &instance, mode, &oracle, &mut advice_rng)?;

    let strategy = match merlin {
        MerlinKind::Honest => MerlinStrategy::Honest,
        MerlinKind::Adversarial => MerlinStrategy::Adversarial(AdversarialPolicy {
            target_index: target,
            lie_budget: lies.unwrap_or(m),
        }),
    };

    use rayon::prelude::*;
    let outcomes: Vec<_> = (0..sessions)
        .into_par_iter()
        .map(|i| {
            let mut rng = derive_rng(seed, &format!("am-session-{i}"));
            am::arthur_session(&instance, &rr, &advice, &strategy, &oracle, &mut rng)
        })
        .collect::<countkit::Result<_>>()?;

    let accepted = outcomes.iter().filter(|o| o.accepted).count();
    let mut check_failures = [0usize; 3];
    for o in &outcomes {
        if let Some(c) = o.failed_check {
            check_failures[(c - 1) as usize] += 1;
        }
    }
    let thresholds: Vec<f64> = advice
        .probabilities
        .iter()
        .map(|p| p.to_f64().unwrap_or(f64::NAN) * m as f64 - 2.0 * ((k * m) as f64).sqrt())
        .collect();

    let mut fields = Map::new();
    fields.insert("fixture".into(), json!(fixture));
    fields.insert("k".into(), json!(k));
    fields.insert("n".into(), json!(n));
    fields.insert("m".into(), json!(m));
    fields.insert("sessions".into(), json!(sessions));
    fields.insert("accept_rate".into(), json!(accepted as f64 / sessions as f64));
    fields.insert(
        "per_check_failures".into(),
        json!({
            "check1": check_failures[0],
            "check2": check_failures[1],
            "check3": check_failures[2],
        }),
    );
    fields.insert(
        "advice".into(),
        json!(advice
            .probabilities
            .iter()
            .map(|p| format!("{}/{}", p.numer(), p.denom()))
            .collect::<Vec<_>>()),
    );
    fields.insert("thresholds".into(), json!(thresholds));
    fields.insert("audit".into(), serde_json::to_value(bound_audit_entry(k, n))?);
    Ok(("am-sim".into(), file_digest(&[]), fields))
}

fn audit_bounds_cmd(
    k: usize,
    n: u32,
    k_max: Option<usize>,
    n_max: Option<u32>,
) -> anyhow::Result<Report> {
    let entries = bound_audit(k..=k_max.unwrap_or(k), n..=n_max.unwrap_or(n));
    let mut fields = Map::new();
    if entries.len() == 1 {
        let e = &entries[0];
        fields.insert("m".into(), json!(e.m));
        fields.insert("lying_margin".into(), json!(e.lying_margin));
        fields.insert("three_k_squared".into(), json!(3 * e.k * e.k));
        fields.insert("certified".into(), json!(e.certified));
    }
    fields.insert("entries".into(), serde_json::to_value(&entries)?);
    Ok(("audit-bounds".into(), file_digest(&[]), fields))
}

