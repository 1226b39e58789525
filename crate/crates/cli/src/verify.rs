//! The self-check battery behind `fpprace verify`.
//!
//! `fast` runs the exact oracles (pairing uniformity against full matching
//! enumeration, conditional-expectation enumeration of the active-fraction
//! chain, the Yule race against its known uniform limit) plus small
//! statistical checks, in under a minute. `full` adds the large-instance
//! statistical suites at n = 10^5. Checks draw from dedicated streams of the
//! battery seed, so a run is reproducible end to end.

use std::collections::BTreeMap;
use std::collections::HashMap;
use std::path::PathBuf;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use fpprace_core::branching::{
    coupling_check, estimate_growth_rate, estimate_v_distribution, simulate_branching_pair,
    PairRng,
};
use fpprace_core::degrees::{DegreeSequence, DegreeSource, IntPmf};
use fpprace_core::ensemble::{
    martingale_enumeration_oracle, run_ensemble, ExperimentConfig,
};
use fpprace_core::exploration::{ExplorationConfig, ExplorationState, SeedChoice};
use fpprace_core::pairing::{canonical_matching, enumerate_matchings, generate_configuration_graph};
use fpprace_core::stats::{chi_square_test, ks_test_uniform, median};
use fpprace_core::SCHEMA_VERSION;

use crate::config::CliError;

/// Default battery seed; override with --seed to rerandomize the suite.
pub const DEFAULT_VERIFY_SEED: u64 = 0x5EED_CAFE;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum VerifyLevel {
    /// Exact oracles and small statistical checks, under a minute.
    Fast,
    /// Fast checks plus the n = 10^5 statistical suites.
    Full,
}

impl VerifyLevel {
    fn as_str(self) -> &'static str {
        match self {
            VerifyLevel::Fast => "fast",
            VerifyLevel::Full => "full",
        }
    }
}

#[derive(Debug, Serialize)]
struct CheckOutcome {
    name: &'static str,
    passed: bool,
    detail: String,
    seconds: f64,
}

fn stream_rng(master_seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}

/// Runs the battery, prints one line per check, optionally writes the JSON
/// report, and returns the process exit code (0 pass, 3 fail).
pub fn run(level: VerifyLevel, seed: u64, out: Option<&PathBuf>) -> i32 {
    let echo = json!({
        "schema_version": SCHEMA_VERSION,
        "subcommand": "verify",
        "level": level.as_str(),
        "master_seed": seed,
        "out": out,
    });
    println!("resolved_config: {echo}");

    let t0 = Instant::now();
    let mut checks: Vec<CheckOutcome> = Vec::new();
    let mut run_check = |name: &'static str, f: &dyn Fn() -> (bool, String)| {
        let start = Instant::now();
        let (passed, detail) = f();
        let outcome = CheckOutcome {
            name,
            passed,
            detail,
            seconds: start.elapsed().as_secs_f64(),
        };
        println!(
            "{} {} ({:.2}s): {}",
            if outcome.passed { "PASS" } else { "FAIL" },
            outcome.name,
            outcome.seconds,
            outcome.detail
        );
        checks.push(outcome);
    };

    run_check("matching_uniformity", &|| check_matching_uniformity(seed));
    run_check("martingale_enumeration", &|| check_martingale_enumeration());
    run_check("exploration_bookkeeping", &|| check_exploration_bookkeeping(seed));
    run_check("yule_race_uniform", &|| check_yule_race(seed));
    run_check("yule_growth_rate", &|| check_yule_growth(seed));
    run_check("coupling_small_graph", &|| check_coupling_small(seed));
    if level == VerifyLevel::Full {
        run_check("coexistence_at_1e5", &|| check_coexistence_large(seed));
        run_check("advantage_collapse_at_1e5", &|| check_advantage_large(seed));
        run_check("coupling_at_1e5", &|| check_coupling_large(seed));
        run_check("window_statistics_shrink", &|| check_window_shrink(seed));
    }

    let passed = checks.iter().filter(|c| c.passed).count();
    let all_passed = passed == checks.len();
    println!(
        "verification {}: {}/{} checks passed ({:.1}s)",
        level.as_str(),
        passed,
        checks.len(),
        t0.elapsed().as_secs_f64()
    );

    if let Some(dir) = out {
        let report = json!({
            "schema_version": SCHEMA_VERSION,
            "resolved_config": echo,
            "checks": checks,
            "passed": all_passed,
        });
        let write = || -> Result<(), CliError> {
            std::fs::create_dir_all(dir).map_err(|e| {
                CliError::runtime(format!("cannot create {}: {e}", dir.display()))
            })?;
            let path = dir.join("verify.json");
            let mut text = serde_json::to_string_pretty(&report)
                .map_err(|e| CliError::runtime(e.to_string()))?;
            text.push('\n');
            std::fs::write(&path, text)
                .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))
        };
        if let Err(e) = write() {
            eprintln!("error: {e}");
            return 2;
        }
    }

    if all_passed {
        0
    } else {
        3
    }
}

/// Sampled matchings against the uniform law on the full enumeration, for
/// two tiny half-edge sets.
fn check_matching_uniformity(seed: u64) -> (bool, String) {
    let mut details = Vec::new();
    let mut ok = true;
    for (stream, degrees, samples) in [(101u64, vec![1usize, 1, 1, 1], 30_000usize),
        (102, vec![2, 2, 2], 30_000)]
    {
        let seq = DegreeSequence::from_degrees(degrees).expect("valid degrees");
        let matchings = enumerate_matchings(seq.total_half_edges());
        let index: HashMap<Vec<(u32, u32)>, usize> = matchings
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let mut canon = m.clone();
                canon.sort_unstable();
                (canon, i)
            })
            .collect();
        let mut counts = vec![0u64; matchings.len()];
        let mut rng = stream_rng(seed, stream);
        for _ in 0..samples {
            let g = generate_configuration_graph(&seq, &mut rng);
            counts[index[&canonical_matching(g.pairing())]] += 1;
        }
        let expected = vec![samples as f64 / matchings.len() as f64; matchings.len()];
        let test = chi_square_test(&counts, &expected);
        ok &= test.p_value > 1e-3;
        details.push(format!(
            "{} matchings p={:.4}",
            matchings.len(),
            test.p_value
        ));
    }
    (ok, details.join("; "))
}

/// Exact enumeration of E[M_(k+1) | step k states]: the active fraction is a
/// martingale at equal rates and is not one at unequal rates.
fn check_martingale_enumeration() -> (bool, String) {
    let triangle = DegreeSequence::from_degrees(vec![2, 2, 2]).expect("valid");
    let mixed = DegreeSequence::from_degrees(vec![2, 2, 3, 3]).expect("valid");
    let r1 = martingale_enumeration_oracle(&triangle, 0, 1, 1.0, 1.0).expect("small instance");
    let r2 = martingale_enumeration_oracle(&triangle, 0, 1, 2.5, 2.5).expect("small instance");
    let r3 = martingale_enumeration_oracle(&mixed, 0, 3, 1.0, 1.0).expect("small instance");
    let r4 = martingale_enumeration_oracle(&triangle, 0, 1, 1.0, 2.0).expect("small instance");
    let ok = r1 <= 1e-12 && r2 <= 1e-12 && r3 <= 1e-12 && r4 > 1e-3;
    (
        ok,
        format!(
            "equal-rate residuals {:.2e}, {:.2e}, {:.2e}; unequal-rate residual {:.2e}",
            r1, r2, r3, r4
        ),
    )
}

/// Runs a mid-size competition with the full structural validator engaged
/// and cross-checks the outcome bookkeeping.
fn check_exploration_bookkeeping(seed: u64) -> (bool, String) {
    let mut rng = stream_rng(seed, 103);
    let seq = half_half_source(500).realize(&mut rng).expect("valid pmf");
    let cfg = ExplorationConfig::default();
    let mut state =
        ExplorationState::init(&seq, SeedChoice::UniformDistinct, &cfg, &mut rng).expect("init");
    let mut steps = 0usize;
    while state.active_total() > 0 {
        state.step(&mut rng).expect("step");
        steps += 1;
        if steps % 64 == 0 {
            state.validate();
        }
    }
    state.validate();
    let outcome = state.run_to_termination(&mut rng, 100).expect("finish");
    let infected = outcome
        .vertices
        .iter()
        .filter(|v| !matches!(v, fpprace_core::exploration::VertexState::Uninfected))
        .count();
    let degrees_match = outcome.final_graph.induced_degrees() == seq.degrees();
    let counts_match = infected == outcome.n1 + outcome.n2;
    let ok = degrees_match && counts_match;
    (
        ok,
        format!(
            "n1={} n2={} termination_step={} degrees_match={}",
            outcome.n1, outcome.n2, outcome.termination_step, degrees_match
        ),
    )
}

/// The symmetric Yule race: the limit fraction is uniform on (0,1).
fn check_yule_race(seed: u64) -> (bool, String) {
    let offspring = yule_offspring();
    let dist = estimate_v_distribution(1, 1, 1.0, 1.0, &offspring, 8.0, 2000, seed ^ 0x59)
        .expect("valid parameters");
    let test = ks_test_uniform(&dist.samples);
    (
        test.p_value > 1e-3,
        format!("KS D={:.4} p={:.4} over {} samples", test.statistic, test.p_value, dist.samples.len()),
    )
}

/// Yule growth: the empirical Malthusian rate of a binary-splitting process
/// at unit intensity is 1.
fn check_yule_growth(seed: u64) -> (bool, String) {
    let offspring = yule_offspring();
    let traj = simulate_branching_pair(
        1,
        1,
        1.0,
        1.0,
        &offspring,
        12.0,
        PairRng::from_seed(seed ^ 0x60, 0),
    )
    .expect("valid parameters");
    let alphas: Vec<f64> = [0, 1]
        .iter()
        .filter_map(|&i| estimate_growth_rate(&traj.series(i)).ok())
        .collect();
    if alphas.is_empty() {
        return (false, "no process grew two decades by t=12".into());
    }
    let alpha = alphas.iter().sum::<f64>() / alphas.len() as f64;
    ((alpha - 1.0).abs() <= 0.1, format!("alpha={alpha:.4}"))
}

fn yule_offspring() -> IntPmf {
    let map: BTreeMap<usize, f64> = [(2usize, 1.0)].into_iter().collect();
    IntPmf::new(&map).expect("valid pmf")
}

fn half_half_source(n: usize) -> DegreeSource {
    let map: BTreeMap<usize, f64> = [(2usize, 0.5), (3, 0.5)].into_iter().collect();
    DegreeSource::Iid {
        pmf: IntPmf::new(&map).expect("valid pmf"),
        n,
    }
}

fn realized_sequence(seed: u64, n: usize) -> DegreeSequence {
    let mut rng = stream_rng(seed, u64::MAX);
    half_half_source(n).realize(&mut rng).expect("valid pmf")
}

/// Small-time agreement between the exploration engine and the branching
/// pair on a mid-size graph.
fn check_coupling_small(seed: u64) -> (bool, String) {
    let seq = realized_sequence(seed ^ 0x61, 2000);
    let report = coupling_check(&seq, 1.0, 1.0, 1.5, 500, seed ^ 0x61).expect("valid parameters");
    let ok = !report.diverged && report.tv_distance < 0.35;
    (
        ok,
        format!(
            "mean_z=[{:.2}, {:.2}] tv={:.3}",
            report.mean_z[0], report.mean_z[1], report.tv_distance
        ),
    )
}

fn equal_rate_config(seed: u64, n: usize, replicas: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(half_half_source(n), seed);
    cfg.replicas = replicas;
    cfg
}

/// Equal rates at n = 10^5: both types keep macroscopic shares.
fn check_coexistence_large(seed: u64) -> (bool, String) {
    let cfg = equal_rate_config(seed ^ 0x70, 100_000, 100);
    let report = match run_ensemble(&cfg) {
        Ok(r) => r,
        Err(e) => return (false, format!("ensemble failed: {e}")),
    };
    let nbar1: Vec<f64> = report.rows.iter().map(|r| r.nbar1).collect();
    let std = report.aggregates.nbar1.std;
    let interior = nbar1.iter().filter(|&&x| x > 0.1 && x < 0.9).count() as f64
        / nbar1.len() as f64;
    let covered = report
        .rows
        .iter()
        .filter(|r| r.nbar1 + r.nbar2 >= 0.99)
        .count() as f64
        / report.rows.len() as f64;
    let ok = std > 0.05 && interior >= 0.5 && covered >= 0.99;
    (
        ok,
        format!("std={std:.3} interior={interior:.2} covered={covered:.2}"),
    )
}

/// Unequal rates: the slow type's share collapses as n grows.
fn check_advantage_large(seed: u64) -> (bool, String) {
    let mut med = [0.0f64; 2];
    for (i, n) in [10_000usize, 100_000].into_iter().enumerate() {
        let mut cfg = equal_rate_config(seed ^ 0x71, n, 60);
        cfg.lambda2 = 2.0;
        let report = match run_ensemble(&cfg) {
            Ok(r) => r,
            Err(e) => return (false, format!("ensemble failed: {e}")),
        };
        let nbar1: Vec<f64> = report.rows.iter().map(|r| r.nbar1).collect();
        med[i] = median(&nbar1);
    }
    let ok = med[1] < 0.05 && med[1] < med[0];
    (
        ok,
        format!("median share of the slow type: {:.4} at 1e4, {:.4} at 1e5", med[0], med[1]),
    )
}

/// Small-time coupling at n = 10^5.
fn check_coupling_large(seed: u64) -> (bool, String) {
    let seq = realized_sequence(seed ^ 0x72, 100_000);
    let report = coupling_check(&seq, 1.0, 1.0, 3.0, 2000, seed ^ 0x72).expect("valid parameters");
    (
        !report.diverged,
        format!(
            "mean_z=[{:.2}, {:.2}] tv={:.3}",
            report.mean_z[0], report.mean_z[1], report.tv_distance
        ),
    )
}

/// The late-window martingale diagnostics tighten with n at equal rates.
fn check_window_shrink(seed: u64) -> (bool, String) {
    let mut sup_med = [0.0f64; 2];
    let mut qv_mean = [0.0f64; 2];
    for (i, n) in [10_000usize, 100_000].into_iter().enumerate() {
        let cfg = equal_rate_config(seed ^ 0x73, n, 60);
        let report = match run_ensemble(&cfg) {
            Ok(r) => r,
            Err(e) => return (false, format!("ensemble failed: {e}")),
        };
        let sups: Vec<f64> = report.rows.iter().filter_map(|r| r.sup_deviation).collect();
        let qvs: Vec<f64> = report.rows.iter().filter_map(|r| r.qv_window).collect();
        if sups.is_empty() || qvs.is_empty() {
            return (false, format!("no windowed statistics at n={n}"));
        }
        sup_med[i] = median(&sups);
        qv_mean[i] = qvs.iter().sum::<f64>() / qvs.len() as f64;
    }
    let ok = sup_med[1] < sup_med[0] && qv_mean[1] < qv_mean[0];
    (
        ok,
        format!(
            "sup medians {:.4} -> {:.4}; qv means {:.2e} -> {:.2e}",
            sup_med[0], sup_med[1], qv_mean[0], qv_mean[1]
        ),
    )
}
