//! The experiment subcommands. Each writes its outputs under the resolved
//! output directory and embeds the resolved settings document, so a run is
//! reproducible from its files alone.
//!
//! Stream discipline: single-run commands (`generate`, `compete`) draw from
//! stream 0 of the master seed, matching replica 0 of an ensemble with the
//! same settings. Sequence realization for `branching --mode coupling` uses
//! stream `u64::MAX`, the same stream the ensemble uses for a shared
//! sequence.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use fpprace_core::branching::{
    coupling_check, estimate_growth_rate, estimate_v_distribution, pair_trajectory_csv,
    simulate_branching_pair, PairRng,
};
use fpprace_core::degrees::{
    compute_stats, degree_file_string, DegreeSequence, DegreeSource, IntPmf,
};
use fpprace_core::ensemble::{constancy_statistic, per_replica_csv, qv_statistic, run_ensemble};
use fpprace_core::exploration::{
    m_at, trajectory_csv, ExplorationConfig, ExplorationState, OutcomeSummary,
};
use fpprace_core::pairing::{generate_configuration_graph, sample_simple_graph};
use fpprace_core::SCHEMA_VERSION;

use crate::config::{BranchingEcho, BranchingMode, CliError, Settings};

fn stream_rng(master_seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}

fn ensure_out_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| {
        CliError::runtime(format!(
            "cannot create output directory {}: {e}",
            dir.display()
        ))
    })
}

fn write_text(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents)
        .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::runtime(format!("cannot serialize {}: {e}", path.display())))?;
    text.push('\n');
    write_text(path, &text)
}

/// Samples one graph and writes the edge list, degree file, and summary.
pub fn cmd_generate(settings: &Settings) -> Result<(), CliError> {
    let echo = &settings.echo;
    let mut rng = stream_rng(echo.master_seed, 0);
    let seq = settings
        .degrees
        .realize(&mut rng)
        .map_err(|e| CliError::validation(e.to_string()))?;
    let graph = if echo.simple {
        sample_simple_graph(&seq, &mut rng, echo.max_simple_attempts)
            .map_err(|e| CliError::runtime(e.to_string()))?
    } else {
        generate_configuration_graph(&seq, &mut rng)
    };

    ensure_out_dir(&echo.out)?;
    let edges_path = echo.out.join("graph.edges");
    let degrees_path = echo.out.join("degrees.txt");
    let summary_path = echo.out.join("generate.json");
    write_text(&edges_path, &graph.edge_list_string())?;
    write_text(&degrees_path, &degree_file_string(&seq))?;
    write_json(
        &summary_path,
        &json!({
            "schema_version": SCHEMA_VERSION,
            "resolved_config": echo,
            "graph": {
                "n": graph.n(),
                "edge_count": graph.edge_count(),
                "is_simple": graph.is_simple(),
            },
        }),
    )?;
    println!(
        "wrote {} ({} edges), {}, {}",
        edges_path.display(),
        graph.edge_count(),
        degrees_path.display(),
        summary_path.display()
    );
    Ok(())
}

/// Runs a single competition to termination and writes the outcome document
/// plus the recorded trajectory.
pub fn cmd_compete(settings: &Settings) -> Result<(), CliError> {
    let echo = &settings.echo;
    let mut rng = stream_rng(echo.master_seed, 0);
    let seq = settings
        .degrees
        .realize(&mut rng)
        .map_err(|e| CliError::validation(e.to_string()))?;
    let nu = echo.nu;
    let horizon = ((1.0 - echo.epsilon) * seq.edge_count() as f64).floor() as usize;
    let windowed = nu <= horizon;
    let ecfg = ExplorationConfig {
        lambda1: echo.lambda1,
        lambda2: echo.lambda2,
        thinning: echo.thinning,
        dense_prefix: 1000,
        checkpoints: if windowed { vec![nu, horizon] } else { Vec::new() },
        stats_range: windowed.then_some((nu, horizon)),
    };
    let state = if echo.simple {
        let graph = sample_simple_graph(&seq, &mut rng, echo.max_simple_attempts)
            .map_err(|e| CliError::runtime(e.to_string()))?;
        ExplorationState::init_on_graph(&seq, &graph, settings.seeds, &ecfg, &mut rng)
            .map_err(|e| CliError::validation(e.to_string()))?
    } else {
        ExplorationState::init(&seq, settings.seeds, &ecfg, &mut rng)
            .map_err(|e| CliError::validation(e.to_string()))?
    };
    let outcome = state
        .run_to_termination(&mut rng, echo.thinning)
        .map_err(|e| CliError::runtime(e.to_string()))?;

    let summary = OutcomeSummary::from(&outcome);
    let (m_burn_in, sup_deviation, qv_window) = if windowed {
        (
            m_at(&outcome, nu).ok(),
            constancy_statistic(&outcome, nu, echo.epsilon).ok(),
            qv_statistic(&outcome, nu, echo.epsilon).ok(),
        )
    } else {
        (None, None, None)
    };

    ensure_out_dir(&echo.out)?;
    let outcome_path = echo.out.join("outcome.json");
    let trajectory_path = echo.out.join("trajectory.csv");
    write_json(
        &outcome_path,
        &json!({
            "schema_version": SCHEMA_VERSION,
            "resolved_config": echo,
            "outcome": summary,
            "m_burn_in": m_burn_in,
            "sup_deviation": sup_deviation,
            "qv_window": qv_window,
            "min_active_ratio": outcome.min_active_ratio,
        }),
    )?;
    write_text(&trajectory_path, &trajectory_csv(&outcome))?;
    println!(
        "n1={} n2={} termination_step={} wrote {}, {}",
        outcome.n1,
        outcome.n2,
        outcome.termination_step,
        outcome_path.display(),
        trajectory_path.display()
    );
    Ok(())
}

/// Runs the replica ensemble and writes the aggregate report and the
/// per-replica table.
pub fn cmd_ensemble(settings: &Settings) -> Result<(), CliError> {
    let cfg = settings.experiment_config();
    let report = run_ensemble(&cfg).map_err(|e| match e {
        fpprace_core::ensemble::EnsembleError::InvalidConfig(_) => {
            CliError::validation(e.to_string())
        }
        other => CliError::runtime(other.to_string()),
    })?;

    let echo = &settings.echo;
    ensure_out_dir(&echo.out)?;
    let report_path = echo.out.join("report.json");
    let csv_path = echo.out.join("replicas.csv");
    write_json(
        &report_path,
        &json!({
            "schema_version": SCHEMA_VERSION,
            "resolved_config": echo,
            "report": report,
        }),
    )?;
    write_text(&csv_path, &per_replica_csv(&report))?;
    println!(
        "replicas={} mean_nbar1={:.4} mean_coverage={:.4} wrote {}, {}",
        report.rows.len(),
        report.aggregates.nbar1.mean,
        report.aggregates.coverage.mean,
        report_path.display(),
        csv_path.display()
    );
    Ok(())
}

/// Offspring law for the branching pair: explicit pmf when configured, else
/// the size-biased degree law of the source, shifted down by one.
fn resolve_offspring(settings: &Settings) -> Result<(BTreeMap<usize, f64>, IntPmf), CliError> {
    let map: BTreeMap<usize, f64> = match &settings.branching.offspring {
        Some(map) => map.clone(),
        None => match &settings.degrees {
            DegreeSource::Iid { pmf, .. } => {
                let total: f64 = pmf.iter().map(|(d, p)| d as f64 * p).sum();
                if total <= 0.0 {
                    return Err(CliError::validation(
                        "degree pmf has zero mean; no offspring law can be derived",
                    ));
                }
                pmf.iter()
                    .filter(|&(d, _)| d >= 1)
                    .map(|(d, p)| (d - 1, d as f64 * p / total))
                    .collect()
            }
            DegreeSource::Explicit(seq) => compute_stats(seq)
                .size_biased_pmf
                .iter()
                .map(|(&d, &p)| (d - 1, p))
                .collect(),
        },
    };
    let pmf = IntPmf::new(&map).map_err(|e| CliError::validation(format!("offspring pmf: {e}")))?;
    Ok((map, pmf))
}

/// Default probe time: the expected pair population reaches n^(1/4), using
/// the faster rate's Malthusian exponent. Small or subcritical setups need
/// an explicit probe time.
fn default_t_probe(settings: &Settings, offspring_mean: f64) -> Result<f64, CliError> {
    let echo = &settings.echo;
    let alpha = echo.lambda1.max(echo.lambda2) * (offspring_mean - 1.0);
    if alpha <= 1e-9 {
        return Err(CliError::validation(
            "offspring mean is at most 1, so populations do not grow; set t_probe explicitly",
        ));
    }
    let a_total = (settings.branching.a1 + settings.branching.a2) as f64;
    let n = settings.degrees.n() as f64;
    Ok(((0.25 * n.ln() - a_total.ln()) / alpha).max(0.0))
}

#[derive(Serialize)]
struct GrowthEstimate {
    alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    note: Option<String>,
}

fn growth_estimate(series: &[(f64, u64)]) -> GrowthEstimate {
    match estimate_growth_rate(series) {
        Ok(alpha) => GrowthEstimate {
            alpha: Some(alpha),
            note: None,
        },
        Err(e) => GrowthEstimate {
            alpha: None,
            note: Some(e.to_string()),
        },
    }
}

/// Branching-pair experiments; the mode picks the output.
pub fn cmd_branching(settings: &Settings) -> Result<(), CliError> {
    let echo = &settings.echo;
    let b = &settings.branching;
    let (offspring_map, offspring) = resolve_offspring(settings)?;
    let offspring_mean = offspring.mean();

    ensure_out_dir(&echo.out)?;
    match b.mode {
        BranchingMode::Trajectory => {
            let rngs = PairRng::from_seed(echo.master_seed, 0);
            let traj = simulate_branching_pair(
                b.a1,
                b.a2,
                echo.lambda1,
                echo.lambda2,
                &offspring,
                b.t_end,
                rngs,
            )
            .map_err(|e| CliError::validation(e.to_string()))?;
            let mut echo = echo.clone();
            echo.branching = Some(BranchingEcho {
                mode: b.mode.as_str(),
                a1: b.a1,
                a2: b.a2,
                offspring: offspring_map,
                t_end: Some(b.t_end),
                t_probe: None,
            });
            let csv_path = echo.out.join("branching.csv");
            let json_path = echo.out.join("branching.json");
            write_text(&csv_path, &pair_trajectory_csv(&traj))?;
            write_json(
                &json_path,
                &json!({
                    "schema_version": SCHEMA_VERSION,
                    "resolved_config": echo,
                    "final_state": traj.final_state,
                    "events": traj.events,
                    "recording_stride": traj.stride,
                    "growth": {
                        "alpha1": growth_estimate(&traj.series(0)),
                        "alpha2": growth_estimate(&traj.series(1)),
                    },
                }),
            )?;
            println!(
                "b1={} b2={} events={} wrote {}, {}",
                traj.final_state.b1,
                traj.final_state.b2,
                traj.events,
                csv_path.display(),
                json_path.display()
            );
        }
        BranchingMode::V => {
            let t_probe = match b.t_probe {
                Some(t) => t,
                None => default_t_probe(settings, offspring_mean)?,
            };
            let dist = estimate_v_distribution(
                b.a1,
                b.a2,
                echo.lambda1,
                echo.lambda2,
                &offspring,
                t_probe,
                echo.replicas,
                echo.master_seed,
            )
            .map_err(|e| CliError::validation(e.to_string()))?;
            let mut echo = echo.clone();
            echo.branching = Some(BranchingEcho {
                mode: b.mode.as_str(),
                a1: b.a1,
                a2: b.a2,
                offspring: offspring_map,
                t_end: None,
                t_probe: Some(t_probe),
            });
            let csv_path = echo.out.join("v_samples.csv");
            let json_path = echo.out.join("v_distribution.json");
            let mut csv = String::from("v\n");
            for v in &dist.samples {
                csv.push_str(&format!("{v}\n"));
            }
            write_text(&csv_path, &csv)?;
            write_json(
                &json_path,
                &json!({
                    "schema_version": SCHEMA_VERSION,
                    "resolved_config": echo,
                    "replicas": dist.replicas,
                    "t_probe": dist.t_probe,
                    "extinct_pairs": dist.extinct_pairs,
                    "summary": dist.summary,
                    "histogram": dist.histogram,
                }),
            )?;
            println!(
                "samples={} extinct_pairs={} mean={:.4} wrote {}, {}",
                dist.samples.len(),
                dist.extinct_pairs,
                dist.summary.mean,
                csv_path.display(),
                json_path.display()
            );
        }
        BranchingMode::Coupling => {
            if settings.branching.offspring.is_some() {
                return Err(CliError::validation(
                    "coupling mode derives its offspring law from the degrees; \
                     remove the explicit offspring pmf",
                ));
            }
            let seq = realize_shared_sequence(settings)?;
            let t_probe = match b.t_probe {
                Some(t) => t,
                None => default_t_probe(settings, offspring_mean)?,
            };
            let report = coupling_check(
                &seq,
                echo.lambda1,
                echo.lambda2,
                t_probe,
                echo.replicas,
                echo.master_seed,
            )
            .map_err(|e| CliError::runtime(e.to_string()))?;
            let mut echo = echo.clone();
            echo.branching = Some(BranchingEcho {
                mode: b.mode.as_str(),
                a1: b.a1,
                a2: b.a2,
                offspring: offspring_map,
                t_end: None,
                t_probe: Some(t_probe),
            });
            let json_path = echo.out.join("coupling.json");
            write_json(
                &json_path,
                &json!({
                    "schema_version": SCHEMA_VERSION,
                    "resolved_config": echo,
                    "report": report,
                }),
            )?;
            println!(
                "mean_z=[{:.2}, {:.2}] tv={:.4} diverged={} wrote {}",
                report.mean_z[0],
                report.mean_z[1],
                report.tv_distance,
                report.diverged,
                json_path.display()
            );
        }
    }
    Ok(())
}

fn realize_shared_sequence(settings: &Settings) -> Result<DegreeSequence, CliError> {
    let mut rng = stream_rng(settings.echo.master_seed, u64::MAX);
    settings
        .degrees
        .realize(&mut rng)
        .map_err(|e| CliError::validation(e.to_string()))
}
