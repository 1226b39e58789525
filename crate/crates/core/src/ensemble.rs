//! Reproducible Monte Carlo ensembles over independent competition runs.
//!
//! Every replica derives its randomness from one master seed: replica `i`
//! uses the ChaCha stream `i` of that seed, so ensembles are reproducible
//! run-to-run and independent of execution order, including under the
//! optional `parallel` feature (rayon). Stream `u64::MAX` is reserved for
//! sampling a shared degree sequence, stream `u64::MAX - 1` for bootstrap
//! resampling.
//!
//! Per replica the engine records two checkpoints: the burn-in step `nu`
//! (default `ceil(n^(1/3))`) and the horizon `H = floor((1 - epsilon) N)`.
//! The windowed statistics over `[nu, H]` are the burn-in-anchored sup
//! deviation of the active fraction, its accumulated quadratic variation,
//! and the minimum of `S_k / k`.

use std::collections::{BTreeMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::degrees::{DegreeError, DegreeSequence, DegreeSource, IntPmf};
use crate::exploration::{
    m_at, qv_at, CompetitionOutcome, ExplorationConfig, ExplorationState, SeedChoice,
};
use crate::pairing::{sample_simple_graph, HalfEdgeMap};
use crate::stats::{histogram, linear_fit, quantile_sorted, Histogram, Summary};
use crate::SCHEMA_VERSION;

/// Largest instance (in half-edges) the exhaustive martingale oracle accepts.
pub const MAX_ENUMERATION_HALF_EDGES: usize = 10;

#[derive(Debug, Error, PartialEq)]
pub enum EnsembleError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("replica {index}: {message}")]
    ReplicaFailed { index: usize, message: String },
    #[error("scaling study needs at least 3 sizes spanning a factor of 100")]
    InsufficientSizes,
    #[error("enumeration handles at most {max} half-edges, got {half_edges}")]
    InstanceTooLarge { half_edges: usize, max: usize },
    #[error("trajectory does not cover steps [{lo}, {hi}]")]
    RangeNotCovered { lo: usize, hi: usize },
    #[error(transparent)]
    Degree(#[from] DegreeError),
}

/// Default burn-in `ceil(n^(1/3))`.
pub fn default_burn_in(n: usize) -> usize {
    (n as f64).cbrt().ceil() as usize
}

/// Full specification of one ensemble experiment.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub degrees: DegreeSource,
    pub lambda1: f64,
    pub lambda2: f64,
    pub replicas: usize,
    pub master_seed: u64,
    /// Burn-in override; `None` resolves to [`default_burn_in`].
    pub burn_in: Option<usize>,
    pub epsilon: f64,
    pub thinning: usize,
    /// Condition every replica graph on simplicity (rejection sampling).
    pub simple: bool,
    pub max_simple_attempts: usize,
    /// Sample one degree sequence (stream `u64::MAX`) and reuse it in every
    /// replica.
    pub fixed_sequence: bool,
    pub seeds: SeedChoice,
}

impl ExperimentConfig {
    pub fn new(degrees: DegreeSource, master_seed: u64) -> Self {
        Self {
            degrees,
            lambda1: 1.0,
            lambda2: 1.0,
            replicas: 100,
            master_seed,
            burn_in: None,
            epsilon: 0.1,
            thinning: 100,
            simple: false,
            max_simple_attempts: 1000,
            fixed_sequence: false,
            seeds: SeedChoice::UniformDistinct,
        }
    }

    pub fn validate(&self) -> Result<(), EnsembleError> {
        if self.replicas == 0 {
            return Err(EnsembleError::InvalidConfig("replicas must be >= 1".into()));
        }
        for value in [self.lambda1, self.lambda2] {
            if !(value.is_finite() && value > 0.0) {
                return Err(EnsembleError::InvalidConfig(format!(
                    "rate {value} is not a positive finite number"
                )));
            }
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(EnsembleError::InvalidConfig(format!(
                "epsilon {} must lie in (0, 1)",
                self.epsilon
            )));
        }
        if self.thinning == 0 {
            return Err(EnsembleError::InvalidConfig("thinning must be >= 1".into()));
        }
        if self.max_simple_attempts == 0 {
            return Err(EnsembleError::InvalidConfig(
                "max_simple_attempts must be >= 1".into(),
            ));
        }
        Ok(())
    }

    fn resolved_burn_in(&self) -> usize {
        self.burn_in.unwrap_or_else(|| default_burn_in(self.degrees.n()))
    }
}

/// One replica's results. `None` statistics mean the `[nu, H]` window was
/// empty for that instance.
#[derive(Debug, Clone, Serialize)]
pub struct ReplicaRow {
    pub replica: usize,
    pub n: usize,
    pub edges: usize,
    pub v1: usize,
    pub v2: usize,
    pub a1: usize,
    pub a2: usize,
    pub n1: usize,
    pub n2: usize,
    pub nbar1: f64,
    pub nbar2: f64,
    pub termination_step: usize,
    pub m_burn_in: Option<f64>,
    pub sup_deviation: Option<f64>,
    pub qv_window: Option<f64>,
    pub min_active_ratio: Option<f64>,
}

/// Echo of the degree source, compact enough to embed in every report.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DegreeSourceEcho {
    Iid { n: usize, pmf: BTreeMap<usize, f64> },
    Explicit { n: usize, total_half_edges: usize },
}

impl From<&DegreeSource> for DegreeSourceEcho {
    fn from(src: &DegreeSource) -> Self {
        match src {
            DegreeSource::Iid { pmf, n } => DegreeSourceEcho::Iid {
                n: *n,
                pmf: pmf.iter().collect(),
            },
            DegreeSource::Explicit(seq) => DegreeSourceEcho::Explicit {
                n: seq.n(),
                total_half_edges: seq.total_half_edges(),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SeedEcho {
    Uniform,
    Explicit { v1: usize, v2: usize },
}

impl From<SeedChoice> for SeedEcho {
    fn from(s: SeedChoice) -> Self {
        match s {
            SeedChoice::UniformDistinct => SeedEcho::Uniform,
            SeedChoice::Explicit { v1, v2 } => SeedEcho::Explicit { v1, v2 },
        }
    }
}

/// Fully resolved settings, echoed into every report so runs are
/// self-describing.
#[derive(Debug, Clone, Serialize)]
pub struct ResolvedSettings {
    pub degrees: DegreeSourceEcho,
    pub lambda1: f64,
    pub lambda2: f64,
    pub replicas: usize,
    pub master_seed: u64,
    pub burn_in: usize,
    pub epsilon: f64,
    pub thinning: usize,
    pub simple: bool,
    pub max_simple_attempts: usize,
    pub fixed_sequence: bool,
    pub seeds: SeedEcho,
    pub assumptions: crate::degrees::AssumptionFlags,
}

impl From<&ExperimentConfig> for ResolvedSettings {
    fn from(cfg: &ExperimentConfig) -> Self {
        ResolvedSettings {
            degrees: (&cfg.degrees).into(),
            lambda1: cfg.lambda1,
            lambda2: cfg.lambda2,
            replicas: cfg.replicas,
            master_seed: cfg.master_seed,
            burn_in: cfg.resolved_burn_in(),
            epsilon: cfg.epsilon,
            thinning: cfg.thinning,
            simple: cfg.simple,
            max_simple_attempts: cfg.max_simple_attempts,
            fixed_sequence: cfg.fixed_sequence,
            seeds: cfg.seeds.into(),
            assumptions: cfg.degrees.assumption_flags(),
        }
    }
}

/// Summaries over replicas; a `None` summary means no replica produced that
/// statistic.
#[derive(Debug, Clone, Serialize)]
pub struct EnsembleAggregates {
    pub nbar1: Summary,
    pub nbar2: Summary,
    pub coverage: Summary,
    pub nbar1_histogram: Histogram,
    pub m_burn_in: Option<Summary>,
    pub sup_deviation: Option<Summary>,
    pub qv_window: Option<Summary>,
    pub min_active_ratio: Option<Summary>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnsembleReport {
    pub schema_version: u32,
    pub settings: ResolvedSettings,
    pub rows: Vec<ReplicaRow>,
    pub aggregates: EnsembleAggregates,
}

fn replica_rng(master_seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}

fn run_replica(
    cfg: &ExperimentConfig,
    index: usize,
    shared: Option<&DegreeSequence>,
) -> Result<ReplicaRow, String> {
    let mut rng = replica_rng(cfg.master_seed, index as u64);
    let seq = match shared {
        Some(seq) => seq.clone(),
        None => cfg.degrees.realize(&mut rng).map_err(|e| e.to_string())?,
    };
    let n = seq.n();
    let edges = seq.edge_count();
    let nu = cfg.burn_in.unwrap_or_else(|| default_burn_in(n));
    let horizon = ((1.0 - cfg.epsilon) * edges as f64).floor() as usize;
    let windowed = nu <= horizon;
    let ecfg = ExplorationConfig {
        lambda1: cfg.lambda1,
        lambda2: cfg.lambda2,
        thinning: cfg.thinning,
        dense_prefix: 1000,
        checkpoints: if windowed { vec![nu, horizon] } else { Vec::new() },
        stats_range: windowed.then_some((nu, horizon)),
    };
    let state = if cfg.simple {
        let graph = sample_simple_graph(&seq, &mut rng, cfg.max_simple_attempts)
            .map_err(|e| e.to_string())?;
        ExplorationState::init_on_graph(&seq, &graph, cfg.seeds, &ecfg, &mut rng)
            .map_err(|e| e.to_string())?
    } else {
        ExplorationState::init(&seq, cfg.seeds, &ecfg, &mut rng).map_err(|e| e.to_string())?
    };
    let (v1, v2) = state.seeds();
    let (a1, a2) = state.initial_active();
    let outcome = state
        .run_to_termination(&mut rng, cfg.thinning)
        .map_err(|e| e.to_string())?;
    let (m_burn_in, sup_deviation, qv_window) = if windowed {
        (
            m_at(&outcome, nu).ok(),
            constancy_statistic(&outcome, nu, cfg.epsilon).ok(),
            qv_statistic(&outcome, nu, cfg.epsilon).ok(),
        )
    } else {
        (None, None, None)
    };
    Ok(ReplicaRow {
        replica: index,
        n,
        edges,
        v1,
        v2,
        a1,
        a2,
        n1: outcome.n1,
        n2: outcome.n2,
        nbar1: outcome.n1 as f64 / n as f64,
        nbar2: outcome.n2 as f64 / n as f64,
        termination_step: outcome.termination_step,
        m_burn_in,
        sup_deviation,
        qv_window,
        min_active_ratio: outcome.min_active_ratio,
    })
}

/// Runs all replicas (in parallel under the `parallel` feature; results are
/// ordered by replica index either way) and aggregates.
pub fn run_ensemble(cfg: &ExperimentConfig) -> Result<EnsembleReport, EnsembleError> {
    cfg.validate()?;
    let shared: Option<DegreeSequence> = match (&cfg.degrees, cfg.fixed_sequence) {
        (DegreeSource::Explicit(seq), _) => Some(seq.clone()),
        (DegreeSource::Iid { .. }, true) => {
            let mut rng = replica_rng(cfg.master_seed, u64::MAX);
            Some(cfg.degrees.realize(&mut rng)?)
        }
        (DegreeSource::Iid { .. }, false) => None,
    };
    #[cfg(feature = "parallel")]
    let results: Vec<Result<ReplicaRow, String>> = (0..cfg.replicas)
        .into_par_iter()
        .map(|i| run_replica(cfg, i, shared.as_ref()))
        .collect();
    #[cfg(not(feature = "parallel"))]
    let results: Vec<Result<ReplicaRow, String>> = (0..cfg.replicas)
        .map(|i| run_replica(cfg, i, shared.as_ref()))
        .collect();
    let mut rows = Vec::with_capacity(results.len());
    for (index, result) in results.into_iter().enumerate() {
        match result {
            Ok(row) => rows.push(row),
            Err(message) => return Err(EnsembleError::ReplicaFailed { index, message }),
        }
    }
    let aggregates = aggregate(&rows);
    Ok(EnsembleReport {
        schema_version: SCHEMA_VERSION,
        settings: cfg.into(),
        rows,
        aggregates,
    })
}

fn aggregate(rows: &[ReplicaRow]) -> EnsembleAggregates {
    let nbar1: Vec<f64> = rows.iter().map(|r| r.nbar1).collect();
    let nbar2: Vec<f64> = rows.iter().map(|r| r.nbar2).collect();
    let coverage: Vec<f64> = rows.iter().map(|r| r.nbar1 + r.nbar2).collect();
    let optional = |get: fn(&ReplicaRow) -> Option<f64>| -> Option<Summary> {
        let values: Vec<f64> = rows.iter().filter_map(get).collect();
        (!values.is_empty()).then(|| Summary::from_samples(&values))
    };
    EnsembleAggregates {
        nbar1: Summary::from_samples(&nbar1),
        nbar2: Summary::from_samples(&nbar2),
        coverage: Summary::from_samples(&coverage),
        nbar1_histogram: histogram(&nbar1, 0.0, 1.0, 20),
        m_burn_in: optional(|r| r.m_burn_in),
        sup_deviation: optional(|r| r.sup_deviation),
        qv_window: optional(|r| r.qv_window),
        min_active_ratio: optional(|r| r.min_active_ratio),
    }
}

/// Per-replica results as CSV; optional statistics render as empty fields.
pub fn per_replica_csv(report: &EnsembleReport) -> String {
    let mut out = String::from(
        "replica,n,edges,v1,v2,a1,a2,n1,n2,nbar1,nbar2,termination_step,\
         m_burn_in,sup_deviation,qv_window,min_active_ratio\n",
    );
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in &report.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.replica,
            r.n,
            r.edges,
            r.v1,
            r.v2,
            r.a1,
            r.a2,
            r.n1,
            r.n2,
            r.nbar1,
            r.nbar2,
            r.termination_step,
            opt(r.m_burn_in),
            opt(r.sup_deviation),
            opt(r.qv_window),
            opt(r.min_active_ratio),
        ));
    }
    out
}

/// Sup over the recorded steps in `[nu, H]` of `|M_k - M_nu|`, with `H =
/// floor((1 - epsilon) N)`. The burn-in step and the horizon must have been
/// recorded (the ensemble driver checkpoints them); between checkpoints the
/// sup runs over the thinned recording, so it is a lower bound on the
/// step-exact sup with the same asymptotics.
pub fn constancy_statistic(
    outcome: &CompetitionOutcome,
    nu: usize,
    epsilon: f64,
) -> Result<f64, EnsembleError> {
    let horizon = ((1.0 - epsilon) * outcome.edge_count as f64).floor() as usize;
    if nu > horizon {
        return Err(EnsembleError::RangeNotCovered {
            lo: nu,
            hi: horizon,
        });
    }
    let m_nu = m_at(outcome, nu).map_err(|_| EnsembleError::RangeNotCovered {
        lo: nu,
        hi: horizon,
    })?;
    let mut sup = 0.0f64;
    for p in &outcome.trajectory {
        if p.k >= nu && p.k <= horizon {
            sup = sup.max((p.m - m_nu).abs());
        }
    }
    // Beyond termination M is constant at its final value.
    if outcome.termination_step < horizon {
        sup = sup.max((outcome.final_point().m - m_nu).abs());
    }
    Ok(sup)
}

/// Accumulated quadratic variation of `M` over `(nu, H]`: `sum (M_k -
/// M_(k-1))^2`. Exact, read from the checkpointed cumulative sums.
pub fn qv_statistic(
    outcome: &CompetitionOutcome,
    nu: usize,
    epsilon: f64,
) -> Result<f64, EnsembleError> {
    let horizon = ((1.0 - epsilon) * outcome.edge_count as f64).floor() as usize;
    if nu > horizon {
        return Err(EnsembleError::RangeNotCovered {
            lo: nu,
            hi: horizon,
        });
    }
    let range_err = || EnsembleError::RangeNotCovered {
        lo: nu,
        hi: horizon,
    };
    let q_nu = qv_at(outcome, nu).map_err(|_| range_err())?;
    let q_h = qv_at(outcome, horizon).map_err(|_| range_err())?;
    Ok(q_h - q_nu)
}

/// Scaling-study specification: the same race run at several sizes.
#[derive(Debug, Clone)]
pub struct ScalingConfig {
    pub pmf: IntPmf,
    pub sizes: Vec<usize>,
    pub lambda1: f64,
    pub lambda2: f64,
    pub replicas_per_size: usize,
    pub master_seed: u64,
    pub bootstrap: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SizePoint {
    pub n: usize,
    pub median_n1: f64,
    pub replicas: usize,
}

/// Log-log fit of the losing type's median count against n. Exploratory:
/// the fitted exponent is reported with a bootstrap CI and never gates
/// anything.
#[derive(Debug, Clone, Serialize)]
pub struct ScalingReport {
    pub schema_version: u32,
    pub lambda1: f64,
    pub lambda2: f64,
    pub replicas_per_size: usize,
    pub master_seed: u64,
    pub points: Vec<SizePoint>,
    pub slope: f64,
    pub intercept: f64,
    pub slope_ci: (f64, f64),
    pub bootstrap: usize,
    pub exploratory: bool,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E3779B97F4A7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D049BB133111EB);
    x ^ (x >> 31)
}

/// Runs the race at each size and fits `log median N1` against `log n`.
/// Needs at least 3 distinct sizes spanning a factor of 100. The per-size
/// master seed is `splitmix64(master_seed XOR n)`, so adding sizes never
/// perturbs existing ones.
pub fn scaling_study(cfg: &ScalingConfig) -> Result<ScalingReport, EnsembleError> {
    let mut sizes: Vec<usize> = cfg.sizes.clone();
    sizes.sort_unstable();
    sizes.dedup();
    if sizes.len() < 3 || *sizes.last().unwrap() < 100 * sizes[0] {
        return Err(EnsembleError::InsufficientSizes);
    }
    if cfg.replicas_per_size < 2 {
        return Err(EnsembleError::InvalidConfig(
            "scaling study needs at least 2 replicas per size".into(),
        ));
    }
    let mut points = Vec::with_capacity(sizes.len());
    let mut samples_per_size: Vec<Vec<f64>> = Vec::with_capacity(sizes.len());
    for &n in &sizes {
        let mut ecfg = ExperimentConfig::new(
            DegreeSource::Iid {
                pmf: cfg.pmf.clone(),
                n,
            },
            splitmix64(cfg.master_seed ^ n as u64),
        );
        ecfg.lambda1 = cfg.lambda1;
        ecfg.lambda2 = cfg.lambda2;
        ecfg.replicas = cfg.replicas_per_size;
        let report = run_ensemble(&ecfg)?;
        let n1s: Vec<f64> = report.rows.iter().map(|r| r.n1 as f64).collect();
        let mut sorted = n1s.clone();
        sorted.sort_by(|a, b| a.total_cmp(b));
        points.push(SizePoint {
            n,
            median_n1: quantile_sorted(&sorted, 0.5),
            replicas: n1s.len(),
        });
        samples_per_size.push(n1s);
    }
    let xs: Vec<f64> = points.iter().map(|p| (p.n as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.median_n1.ln()).collect();
    let fit = linear_fit(&xs, &ys);
    // Percentile bootstrap over replica resampling within each size.
    let mut rng = replica_rng(cfg.master_seed, u64::MAX - 1);
    let mut slopes = Vec::with_capacity(cfg.bootstrap);
    for _ in 0..cfg.bootstrap {
        let ys_b: Vec<f64> = samples_per_size
            .iter()
            .map(|samples| {
                let mut draw: Vec<f64> = (0..samples.len())
                    .map(|_| samples[rng.gen_range(0..samples.len())])
                    .collect();
                draw.sort_by(|a, b| a.total_cmp(b));
                quantile_sorted(&draw, 0.5).max(1.0).ln()
            })
            .collect();
        slopes.push(linear_fit(&xs, &ys_b).slope);
    }
    slopes.sort_by(|a, b| a.total_cmp(b));
    let slope_ci = if slopes.is_empty() {
        (fit.slope, fit.slope)
    } else {
        (
            quantile_sorted(&slopes, 0.025),
            quantile_sorted(&slopes, 0.975),
        )
    };
    Ok(ScalingReport {
        schema_version: SCHEMA_VERSION,
        lambda1: cfg.lambda1,
        lambda2: cfg.lambda2,
        replicas_per_size: cfg.replicas_per_size,
        master_seed: cfg.master_seed,
        points,
        slope: fit.slope,
        intercept: fit.intercept,
        slope_ci,
        bootstrap: cfg.bootstrap,
        exploratory: true,
    })
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
enum EnumStatus {
    Inactive,
    Active1,
    Active2,
    Paired,
}

/// Exhaustive check of the one-step martingale property: enumerates every
/// reachable state of the competition on a tiny sequence and returns the
/// largest `|E[M_(k+1) | state] - M_k|` over states with active half-edges.
/// Zero (to rounding) iff the active fraction is a martingale, which holds
/// exactly when `lambda1 == lambda2`.
pub fn martingale_enumeration_oracle(
    seq: &DegreeSequence,
    v1: usize,
    v2: usize,
    lambda1: f64,
    lambda2: f64,
) -> Result<f64, EnsembleError> {
    let total = seq.total_half_edges();
    if total > MAX_ENUMERATION_HALF_EDGES {
        return Err(EnsembleError::InstanceTooLarge {
            half_edges: total,
            max: MAX_ENUMERATION_HALF_EDGES,
        });
    }
    for value in [lambda1, lambda2] {
        if !(value.is_finite() && value > 0.0) {
            return Err(EnsembleError::InvalidConfig(format!(
                "rate {value} is not a positive finite number"
            )));
        }
    }
    let n = seq.n();
    if v1 >= n || v2 >= n || v1 == v2 {
        return Err(EnsembleError::InvalidConfig(format!(
            "seeds ({v1}, {v2}) invalid for n = {n}"
        )));
    }
    let map = HalfEdgeMap::new(seq);
    let mut initial = vec![EnumStatus::Inactive; total];
    for h in map.half_edges_of(v1) {
        initial[h.0 as usize] = EnumStatus::Active1;
    }
    for h in map.half_edges_of(v2) {
        initial[h.0 as usize] = EnumStatus::Active2;
    }

    fn counts(status: &[EnumStatus]) -> (usize, usize, usize) {
        let mut s1 = 0;
        let mut s2 = 0;
        let mut free = 0;
        for &st in status {
            match st {
                EnumStatus::Active1 => s1 += 1,
                EnumStatus::Active2 => s2 += 1,
                EnumStatus::Inactive => {}
                EnumStatus::Paired => continue,
            }
            free += 1;
        }
        (s1, s2, free)
    }

    fn child(
        status: &[EnumStatus],
        map: &HalfEdgeMap,
        q: usize,
        r: usize,
        kind: EnumStatus,
    ) -> Vec<EnumStatus> {
        let mut next = status.to_vec();
        let r_was_inactive = next[r] == EnumStatus::Inactive;
        next[q] = EnumStatus::Paired;
        next[r] = EnumStatus::Paired;
        if r_was_inactive {
            let y = map.vertex_of(crate::pairing::HalfEdgeId(r as u32));
            for h in map.half_edges_of(y) {
                if next[h.0 as usize] == EnumStatus::Inactive {
                    next[h.0 as usize] = kind;
                }
            }
        }
        next
    }

    let mut visited: HashSet<Vec<EnumStatus>> = HashSet::new();
    let mut stack = vec![initial];
    let mut max_residual = 0.0f64;
    while let Some(status) = stack.pop() {
        if !visited.insert(status.clone()) {
            continue;
        }
        let (s1, s2, free) = counts(&status);
        if s1 + s2 == 0 {
            continue;
        }
        let m = s1 as f64 / (s1 + s2) as f64;
        let rate = lambda1 * s1 as f64 + lambda2 * s2 as f64;
        let mut expected = 0.0;
        for q in 0..status.len() {
            let (kind, lambda) = match status[q] {
                EnumStatus::Active1 => (EnumStatus::Active1, lambda1),
                EnumStatus::Active2 => (EnumStatus::Active2, lambda2),
                _ => continue,
            };
            let p_q = lambda / rate;
            let p_r = 1.0 / (free - 1) as f64;
            for r in 0..status.len() {
                if r == q || status[r] == EnumStatus::Paired {
                    continue;
                }
                let next = child(&status, &map, q, r, kind);
                let (c1, c2, _) = counts(&next);
                let child_m = if c1 + c2 > 0 {
                    c1 as f64 / (c1 + c2) as f64
                } else {
                    m
                };
                expected += p_q * p_r * child_m;
                stack.push(next);
            }
        }
        max_residual = max_residual.max((expected - m).abs());
    }
    Ok(max_residual)
}
