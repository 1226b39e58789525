//! Continuous-time branching approximation of the early competition.
//!
//! Before the two infections meet, each behaves like an independent Markov
//! branching process: a population of `b` individuals (active half-edges)
//! fires at total rate `lambda * b`, and a firing individual is replaced by
//! `xi` children, `xi` drawn from the offspring pmf. For the competition on
//! a degree sequence the offspring law is the size-biased degree minus one.
//!
//! The two processes of a pair run on separate, independent RNG streams, so
//! neither consumes the other's randomness. Per event the firing process
//! draws the offspring count and then one standard exponential for its next
//! holding time; extinct processes draw nothing. Point-mass offspring pmfs
//! skip the offspring draw.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::Serialize;
use thiserror::Error;

use crate::degrees::{compute_stats, DegreeSequence, IntPmf};
use crate::exploration::{ExplorationConfig, ExplorationError, ExplorationState, SeedChoice};
use crate::stats::{histogram, Histogram, Summary};

#[derive(Debug, Error, PartialEq)]
pub enum BranchingError {
    #[error("branching rate {value} is not a positive finite number")]
    InvalidRate { value: f64 },
    #[error("initial population must be at least 1")]
    EmptyInitialPopulation,
    #[error("population spans a factor of {ratio:.2}, need >= 100 for a growth fit")]
    InsufficientGrowth { ratio: f64 },
    #[error("probe time {value} must be finite and nonnegative")]
    InvalidProbeTime { value: f64 },
    #[error(transparent)]
    Exploration(#[from] ExplorationError),
}

/// Mean-discrepancy z-score above which a coupling report flags divergence.
pub const DIVERGENCE_Z: f64 = 4.0;

/// Snapshot of a branching pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BranchingState {
    pub b1: u64,
    pub b2: u64,
    pub t: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub a1: u64,
    pub a2: u64,
}

/// One recorded event of a pair trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairPoint {
    pub t: f64,
    pub b1: u64,
    pub b2: u64,
}

/// Independent RNG streams for the two processes of one pair; pair `i` of a
/// family uses streams `2i` and `2i + 1` of the master seed.
#[derive(Debug, Clone)]
pub struct PairRng {
    pub rng1: ChaCha8Rng,
    pub rng2: ChaCha8Rng,
}

impl PairRng {
    pub fn from_seed(master_seed: u64, pair_index: u64) -> Self {
        let mut rng1 = ChaCha8Rng::seed_from_u64(master_seed);
        rng1.set_stream(2 * pair_index);
        let mut rng2 = ChaCha8Rng::seed_from_u64(master_seed);
        rng2.set_stream(2 * pair_index + 1);
        Self { rng1, rng2 }
    }
}

#[derive(Debug, Clone)]
struct BranchingProcess {
    population: u64,
    time: f64,
    next_event: f64,
    lambda: f64,
    offspring: IntPmf,
    degenerate: Option<usize>,
    rng: ChaCha8Rng,
}

impl BranchingProcess {
    fn new(a: u64, lambda: f64, offspring: IntPmf, rng: ChaCha8Rng) -> Self {
        let mut p = Self {
            population: a,
            time: 0.0,
            next_event: f64::INFINITY,
            lambda,
            degenerate: offspring.degenerate_value(),
            offspring,
            rng,
        };
        p.schedule();
        p
    }

    fn schedule(&mut self) {
        if self.population == 0 {
            self.next_event = f64::INFINITY;
            return;
        }
        let holding: f64 = self.rng.sample(Exp1);
        self.next_event = self.time + holding / (self.lambda * self.population as f64);
    }

    fn fire(&mut self) {
        debug_assert!(self.population > 0);
        self.time = self.next_event;
        let xi = match self.degenerate {
            Some(v) => v,
            None => self.offspring.sample(&mut self.rng),
        };
        self.population = self.population - 1 + xi as u64;
        self.schedule();
    }
}

/// Two independent branching processes advanced on a common clock.
#[derive(Debug, Clone)]
pub struct BranchingPair {
    procs: [BranchingProcess; 2],
    t: f64,
    a: (u64, u64),
    events: u64,
}

impl BranchingPair {
    pub fn new(
        a1: u64,
        a2: u64,
        lambda1: f64,
        lambda2: f64,
        offspring: &IntPmf,
        rngs: PairRng,
    ) -> Result<Self, BranchingError> {
        for value in [lambda1, lambda2] {
            if !(value.is_finite() && value > 0.0) {
                return Err(BranchingError::InvalidRate { value });
            }
        }
        if a1 == 0 || a2 == 0 {
            return Err(BranchingError::EmptyInitialPopulation);
        }
        Ok(Self {
            procs: [
                BranchingProcess::new(a1, lambda1, offspring.clone(), rngs.rng1),
                BranchingProcess::new(a2, lambda2, offspring.clone(), rngs.rng2),
            ],
            t: 0.0,
            a: (a1, a2),
            events: 0,
        })
    }

    pub fn state(&self) -> BranchingState {
        BranchingState {
            b1: self.procs[0].population,
            b2: self.procs[1].population,
            t: self.t,
            lambda1: self.procs[0].lambda,
            lambda2: self.procs[1].lambda,
            a1: self.a.0,
            a2: self.a.1,
        }
    }

    pub fn populations(&self) -> (u64, u64) {
        (self.procs[0].population, self.procs[1].population)
    }

    pub fn events(&self) -> u64 {
        self.events
    }

    /// Time and index of the next event, if either process is alive.
    pub fn peek(&self) -> Option<(usize, f64)> {
        let t1 = self.procs[0].next_event;
        let t2 = self.procs[1].next_event;
        if t1.is_infinite() && t2.is_infinite() {
            return None;
        }
        // The other process's clock is untouched by a firing: exponential
        // holding times are memoryless, so no reconditioning is needed.
        Some(if t1 <= t2 { (0, t1) } else { (1, t2) })
    }

    /// Fires every event up to and including `t_end`, leaving the pair clock
    /// at exactly `t_end`. Returns the number of events fired.
    pub fn advance_until(&mut self, t_end: f64) -> u64 {
        let before = self.events;
        while let Some((which, t)) = self.peek() {
            if t > t_end {
                break;
            }
            self.procs[which].fire();
            self.events += 1;
        }
        self.t = t_end;
        self.events - before
    }
}

/// Trajectory of one pair run: recorded points (decimated once the buffer
/// fills, by doubling the event stride) and the exact final state.
#[derive(Debug, Clone)]
pub struct PairTrajectory {
    pub points: Vec<PairPoint>,
    pub final_state: BranchingState,
    pub events: u64,
    pub stride: u64,
}

const MAX_TRAJECTORY_POINTS: usize = 16_384;

/// Runs a pair to `t_end`, recording a bounded trajectory. Deterministic in
/// the pair RNG.
pub fn simulate_branching_pair(
    a1: u64,
    a2: u64,
    lambda1: f64,
    lambda2: f64,
    offspring: &IntPmf,
    t_end: f64,
    rngs: PairRng,
) -> Result<PairTrajectory, BranchingError> {
    if !(t_end.is_finite() && t_end >= 0.0) {
        return Err(BranchingError::InvalidProbeTime { value: t_end });
    }
    let mut pair = BranchingPair::new(a1, a2, lambda1, lambda2, offspring, rngs)?;
    let mut points = vec![PairPoint {
        t: 0.0,
        b1: a1,
        b2: a2,
    }];
    let mut stride: u64 = 1;
    let mut events: u64 = 0;
    while let Some((which, t)) = pair.peek() {
        if t > t_end {
            break;
        }
        pair.procs[which].fire();
        pair.events += 1;
        events += 1;
        if events % stride == 0 {
            if points.len() >= MAX_TRAJECTORY_POINTS {
                // Halve the resolution: keep every other point, double the
                // stride.
                let kept: Vec<PairPoint> =
                    points.iter().copied().step_by(2).collect();
                points = kept;
                stride *= 2;
            }
            if events % stride == 0 {
                let (b1, b2) = pair.populations();
                points.push(PairPoint { t, b1, b2 });
            }
        }
    }
    pair.t = t_end;
    let (b1, b2) = pair.populations();
    if points.last().map(|p| p.t) != Some(t_end) {
        points.push(PairPoint { t: t_end, b1, b2 });
    }
    Ok(PairTrajectory {
        points,
        final_state: pair.state(),
        events,
        stride,
    })
}

impl PairTrajectory {
    /// One process's recorded series as `(t, population)` pairs.
    pub fn series(&self, which: usize) -> Vec<(f64, u64)> {
        assert!(which < 2);
        self.points
            .iter()
            .map(|p| (p.t, if which == 0 { p.b1 } else { p.b2 }))
            .collect()
    }
}

/// Trajectory in CSV form: header `t,b1,b2`, one recorded event per row.
pub fn pair_trajectory_csv(traj: &PairTrajectory) -> String {
    let mut out = String::from("t,b1,b2\n");
    for p in &traj.points {
        out.push_str(&format!("{},{},{}\n", p.t, p.b1, p.b2));
    }
    out
}

/// Least-squares slope of `ln b` against `t` over the positive-population
/// points: the empirical Malthusian growth rate. Requires the populations to
/// span at least a factor of 100.
pub fn estimate_growth_rate(series: &[(f64, u64)]) -> Result<f64, BranchingError> {
    let alive: Vec<(f64, f64)> = series
        .iter()
        .filter(|&&(_, b)| b > 0)
        .map(|&(t, b)| (t, (b as f64).ln()))
        .collect();
    if alive.len() < 2 {
        return Err(BranchingError::InsufficientGrowth { ratio: 1.0 });
    }
    let max = alive.iter().map(|&(_, y)| y).fold(f64::MIN, f64::max);
    let min = alive.iter().map(|&(_, y)| y).fold(f64::MAX, f64::min);
    let ratio = (max - min).exp();
    if ratio < 100.0 {
        return Err(BranchingError::InsufficientGrowth { ratio });
    }
    let xs: Vec<f64> = alive.iter().map(|&(t, _)| t).collect();
    let ys: Vec<f64> = alive.iter().map(|&(_, y)| y).collect();
    Ok(crate::stats::linear_fit(&xs, &ys).slope)
}

/// Empirical distribution of the limiting fraction `V = b1 / (b1 + b2)`.
#[derive(Debug, Clone, Serialize)]
pub struct VDistribution {
    pub replicas: usize,
    pub t_probe: f64,
    /// Pairs where both processes died before the probe; they contribute no
    /// sample.
    pub extinct_pairs: usize,
    pub samples: Vec<f64>,
    pub summary: Summary,
    pub histogram: Histogram,
}

/// Samples `V` over independent pairs, probing at `t_probe`. Pair `i` uses
/// streams `2i, 2i + 1` of the master seed.
#[allow(clippy::too_many_arguments)]
pub fn estimate_v_distribution(
    a1: u64,
    a2: u64,
    lambda1: f64,
    lambda2: f64,
    offspring: &IntPmf,
    t_probe: f64,
    replicas: usize,
    master_seed: u64,
) -> Result<VDistribution, BranchingError> {
    if !(t_probe.is_finite() && t_probe >= 0.0) {
        return Err(BranchingError::InvalidProbeTime { value: t_probe });
    }
    assert!(replicas > 0);
    let mut samples = Vec::with_capacity(replicas);
    let mut extinct = 0;
    for i in 0..replicas {
        let rngs = PairRng::from_seed(master_seed, i as u64);
        let mut pair = BranchingPair::new(a1, a2, lambda1, lambda2, offspring, rngs)?;
        pair.advance_until(t_probe);
        let (b1, b2) = pair.populations();
        if b1 + b2 == 0 {
            extinct += 1;
        } else {
            samples.push(b1 as f64 / (b1 + b2) as f64);
        }
    }
    assert!(
        !samples.is_empty(),
        "every pair died before the probe; lower t_probe"
    );
    let summary = Summary::from_samples(&samples);
    let hist = histogram(&samples, 0.0, 1.0, 20);
    Ok(VDistribution {
        replicas,
        t_probe,
        extinct_pairs: extinct,
        samples,
        summary,
        histogram: hist,
    })
}

/// Moment comparison between the competition probed at `t_probe` and the
/// matched branching pair (same seed degrees, offspring = size-biased degree
/// minus one).
#[derive(Debug, Clone, Serialize)]
pub struct CouplingReport {
    pub replicas: usize,
    pub t_probe: f64,
    pub exploration_mean: [f64; 2],
    pub exploration_var: [f64; 2],
    pub branching_mean: [f64; 2],
    pub branching_var: [f64; 2],
    /// `|mean difference| / pooled standard error`, per type.
    pub mean_z: [f64; 2],
    /// `|variance difference| / pooled standard error` (fourth-moment based),
    /// per type.
    pub var_z: [f64; 2],
    /// Total-variation distance between the binned joint laws of `(s1, s2)`
    /// and `(b1, b2)`; upward-biased by sampling noise, so compare runs
    /// rather than reading it as an absolute.
    pub tv_distance: f64,
    /// True when some mean z-score exceeds [`DIVERGENCE_Z`].
    pub diverged: bool,
}

/// Runs `replicas` paired probes on a fixed degree sequence. Replica `i`
/// explores with stream `3i` and branches with streams `3i + 1, 3i + 2`; the
/// branching pair starts from the explorer's seed degrees.
pub fn coupling_check(
    seq: &DegreeSequence,
    lambda1: f64,
    lambda2: f64,
    t_probe: f64,
    replicas: usize,
    master_seed: u64,
) -> Result<CouplingReport, BranchingError> {
    if !(t_probe.is_finite() && t_probe >= 0.0) {
        return Err(BranchingError::InvalidProbeTime { value: t_probe });
    }
    assert!(replicas > 0);
    let stats = compute_stats(seq);
    let offspring_map: std::collections::BTreeMap<usize, f64> = stats
        .size_biased_pmf
        .iter()
        .map(|(&d, &p)| (d - 1, p))
        .collect();
    let offspring = IntPmf::new(&offspring_map)
        .expect("size-biased pmf is a valid distribution");
    let cfg = ExplorationConfig {
        lambda1,
        lambda2,
        thinning: usize::MAX,
        dense_prefix: 0,
        checkpoints: Vec::new(),
        stats_range: None,
    };
    let mut s_samples: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    let mut b_samples: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    let mut joint: std::collections::HashMap<(u64, u64), [u64; 2]> =
        std::collections::HashMap::new();
    for i in 0..replicas as u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(3 * i);
        let mut state =
            ExplorationState::init(seq, SeedChoice::UniformDistinct, &cfg, &mut rng)?;
        let (a1, a2) = state.initial_active();
        let (s1, s2) = state.run_until_time(t_probe, &mut rng)?;
        let mut rng1 = ChaCha8Rng::seed_from_u64(master_seed);
        rng1.set_stream(3 * i + 1);
        let mut rng2 = ChaCha8Rng::seed_from_u64(master_seed);
        rng2.set_stream(3 * i + 2);
        let rngs = PairRng { rng1, rng2 };
        let mut pair =
            BranchingPair::new(a1 as u64, a2 as u64, lambda1, lambda2, &offspring, rngs)?;
        pair.advance_until(t_probe);
        let (b1, b2) = pair.populations();
        s_samples[0].push(s1 as f64);
        s_samples[1].push(s2 as f64);
        b_samples[0].push(b1 as f64);
        b_samples[1].push(b2 as f64);
        joint.entry((s1 as u64, s2 as u64)).or_default()[0] += 1;
        joint.entry((b1, b2)).or_default()[1] += 1;
    }
    let r = replicas as f64;
    let mut exploration_mean = [0.0; 2];
    let mut exploration_var = [0.0; 2];
    let mut branching_mean = [0.0; 2];
    let mut branching_var = [0.0; 2];
    let mut mean_z = [0.0; 2];
    let mut var_z = [0.0; 2];
    for side in 0..2 {
        let (ms, vs) = (
            crate::stats::mean(&s_samples[side]),
            crate::stats::variance(&s_samples[side]),
        );
        let (mb, vb) = (
            crate::stats::mean(&b_samples[side]),
            crate::stats::variance(&b_samples[side]),
        );
        exploration_mean[side] = ms;
        exploration_var[side] = vs;
        branching_mean[side] = mb;
        branching_var[side] = vb;
        mean_z[side] = z_score(mb - ms, vs / r + vb / r);
        let se2 = var_of_variance(&s_samples[side], ms, vs) / r
            + var_of_variance(&b_samples[side], mb, vb) / r;
        var_z[side] = z_score(vb - vs, se2);
    }
    let tv_distance = joint
        .values()
        .map(|c| (c[0] as f64 / r - c[1] as f64 / r).abs())
        .sum::<f64>()
        / 2.0;
    let diverged = mean_z.iter().any(|&z| z > DIVERGENCE_Z);
    Ok(CouplingReport {
        replicas,
        t_probe,
        exploration_mean,
        exploration_var,
        branching_mean,
        branching_var,
        mean_z,
        var_z,
        tv_distance,
        diverged,
    })
}

fn z_score(diff: f64, se2: f64) -> f64 {
    if se2 > 0.0 {
        diff.abs() / se2.sqrt()
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Asymptotic variance of the sample variance: (m4 - var^2), estimated from
/// the sample's central fourth moment.
fn var_of_variance(xs: &[f64], mean: f64, var: f64) -> f64 {
    let m4 = xs
        .iter()
        .map(|x| {
            let d = x - mean;
            d * d * d * d
        })
        .sum::<f64>()
        / xs.len() as f64;
    (m4 - var * var).max(0.0)
}
