//! The two-type competition engine.
//!
//! Two infections start from two seed vertices and race over a
//! configuration-model multigraph that is revealed while they spread. The
//! process is simulated as a discrete jump chain with exponential holding
//! times: at each step one free active half-edge `q` is chosen (type `i`
//! with probability proportional to `lambda_i * s_i`, then uniformly within
//! the type), paired with a uniform free half-edge `r != q`, and
//!
//! * if `r` is active (its vertex already infected, self-loops included),
//!   the active count drops by 2 and nobody is infected;
//! * if `r` is inactive, its vertex `y` joins type `i` and the other
//!   `d_y - 1` half-edges of `y` activate, a net change of `d_y - 2`.
//!
//! The chain tracks the active-fraction sequence `M_k = S1_k / (S1_k +
//! S2_k)`, carried forward unchanged once the active set empties. With
//! `lambda1 = lambda2` this sequence is a martingale; with distinct rates it
//! is not, and the toolkit's diagnostics quantify the difference.
//!
//! RNG discipline (one step): (1) a standard exponential for the holding
//! time, (2) one uniform for the type choice, (3) one `gen_range` for the
//! in-type index of `q`, (4) `gen_range` draws for `r`, redrawn while `r ==
//! q`. On a fixed graph (simple-graph conditioning) draw (4) is replaced by
//! a table lookup. Seed choice draws two `gen_range` values before any step.

use rand::Rng;
use rand_distr::Exp1;
use serde::Serialize;
use thiserror::Error;

use crate::degrees::DegreeSequence;
use crate::pairing::{uniform_matching, HalfEdgeId, HalfEdgeMap, Multigraph};

#[derive(Debug, Error, PartialEq)]
pub enum ExplorationError {
    #[error("competition needs at least 2 vertices, got {n}")]
    TooFewVertices { n: usize },
    #[error("seed vertex {vertex} out of range for n = {n}")]
    SeedOutOfRange { vertex: usize, n: usize },
    #[error("seed vertices must be distinct, both are {vertex}")]
    IdenticalSeeds { vertex: usize },
    #[error("transmission rate {value} is not a positive finite number")]
    InvalidRate { value: f64 },
    #[error("no active half-edges; the competition has terminated")]
    NoActiveHalfEdges,
    #[error("step {step} is not recorded in the trajectory")]
    StepNotRecorded { step: usize },
    #[error("graph does not realize the degree sequence")]
    GraphMismatch,
}

/// The two competing infection types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum InfectionType {
    One,
    Two,
}

impl InfectionType {
    pub fn index(self) -> usize {
        match self {
            InfectionType::One => 0,
            InfectionType::Two => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum HalfEdgeStatus {
    FreeInactive,
    FreeActive(InfectionType),
    Paired,
}

/// Per-vertex infection record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VertexState {
    Uninfected,
    Infected {
        kind: InfectionType,
        step: usize,
        time: f64,
    },
}

/// How the two seed vertices are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedChoice {
    /// Two distinct uniform vertices: `v1` uniform on `0..n`, then `v2`
    /// uniform on the remaining `n - 1` (two `gen_range` draws).
    UniformDistinct,
    Explicit { v1: usize, v2: usize },
}

/// Recording and rate parameters for one competition run.
#[derive(Debug, Clone)]
pub struct ExplorationConfig {
    pub lambda1: f64,
    pub lambda2: f64,
    /// Record every `thinning`-th step beyond the dense prefix.
    pub thinning: usize,
    /// Record every step with `k < dense_prefix`.
    pub dense_prefix: usize,
    /// Steps that must be recorded exactly (sorted); used for windowed
    /// statistics.
    pub checkpoints: Vec<usize>,
    /// Inclusive step window over which `min S_k / k` is tracked online.
    pub stats_range: Option<(usize, usize)>,
}

impl Default for ExplorationConfig {
    fn default() -> Self {
        Self {
            lambda1: 1.0,
            lambda2: 1.0,
            thinning: 100,
            dense_prefix: 1000,
            checkpoints: Vec::new(),
            stats_range: None,
        }
    }
}

/// One recorded state of the jump chain: after step `k` (at time `t`) there
/// are `s1 + s2` active half-edges and the active fraction is `m`; `qv` is
/// the accumulated quadratic variation `sum_(j<=k) (M_j - M_(j-1))^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub k: usize,
    pub t: f64,
    pub s1: usize,
    pub s2: usize,
    pub m: f64,
    pub qv: f64,
}

/// What one step did; returned for fine-grained testing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepEvent {
    pub k: usize,
    pub t: f64,
    pub kind: InfectionType,
    pub q: HalfEdgeId,
    pub r: HalfEdgeId,
    /// Vertex infected by this step, if `r` was inactive.
    pub newly_infected: Option<usize>,
    pub s1: usize,
    pub s2: usize,
}

const NONE_POS: u32 = u32::MAX;

/// Live state of one competition. Built by [`ExplorationState::init`] (graph
/// revealed on the fly) or [`ExplorationState::init_on_graph`] (partners
/// read from a fixed matching), then driven by [`ExplorationState::step`] or
/// [`ExplorationState::run_to_termination`].
#[derive(Debug, Clone)]
pub struct ExplorationState {
    map: HalfEdgeMap,
    degrees: DegreeSequence,
    lambda: [f64; 2],
    status: Vec<HalfEdgeStatus>,
    vertices: Vec<VertexState>,
    free_pool: Vec<u32>,
    free_pos: Vec<u32>,
    active_pool: [Vec<u32>; 2],
    active_pos: Vec<u32>,
    pairing: Vec<(HalfEdgeId, HalfEdgeId)>,
    fixed_partner: Option<Vec<u32>>,
    step: usize,
    time: f64,
    m_prev: f64,
    qv_cum: f64,
    min_ratio: f64,
    trajectory: Vec<TrajectoryPoint>,
    thinning: usize,
    dense_prefix: usize,
    checkpoints: Vec<usize>,
    stats_range: Option<(usize, usize)>,
    seeds: (usize, usize),
    initial_active: (usize, usize),
    infected: [usize; 2],
}

/// Result of a competition run to termination: infection counts, the
/// completed graph, per-vertex outcomes, and the recorded trajectory.
#[derive(Debug, Clone)]
pub struct CompetitionOutcome {
    pub n: usize,
    pub edge_count: usize,
    pub lambda1: f64,
    pub lambda2: f64,
    pub seeds: (usize, usize),
    /// Seed degrees `(a1, a2)`: the initial active counts.
    pub initial_active: (usize, usize),
    pub n1: usize,
    pub n2: usize,
    /// First step after which no active half-edge remains. The chain is
    /// conceptually defined for all of `0..=edge_count` steps; `M` stays
    /// constant beyond this point.
    pub termination_step: usize,
    pub trajectory: Vec<TrajectoryPoint>,
    /// `min S_k / k` over the configured stats window, 0 when the process
    /// died before the window opened.
    pub min_active_ratio: Option<f64>,
    pub vertices: Vec<VertexState>,
    pub final_graph: Multigraph,
}

impl ExplorationState {
    /// Starts a competition on `seq`, revealing the matching as the
    /// infections spread.
    pub fn init(
        seq: &DegreeSequence,
        seeds: SeedChoice,
        config: &ExplorationConfig,
        rng: &mut impl Rng,
    ) -> Result<Self, ExplorationError> {
        Self::build(seq, None, seeds, config, rng)
    }

    /// Starts a competition on a fixed multigraph realizing `seq`; partner
    /// choices are read from the matching instead of drawn.
    pub fn init_on_graph(
        seq: &DegreeSequence,
        graph: &Multigraph,
        seeds: SeedChoice,
        config: &ExplorationConfig,
        rng: &mut impl Rng,
    ) -> Result<Self, ExplorationError> {
        let total = seq.total_half_edges();
        if graph.n() != seq.n() || graph.edge_count() * 2 != total {
            return Err(ExplorationError::GraphMismatch);
        }
        let mut partner = vec![NONE_POS; total];
        for &(a, b) in graph.pairing() {
            let (a, b) = (a.0 as usize, b.0 as usize);
            if a >= total || b >= total || a == b {
                return Err(ExplorationError::GraphMismatch);
            }
            if partner[a] != NONE_POS || partner[b] != NONE_POS {
                return Err(ExplorationError::GraphMismatch);
            }
            partner[a] = b as u32;
            partner[b] = a as u32;
        }
        if partner.iter().any(|&p| p == NONE_POS) {
            return Err(ExplorationError::GraphMismatch);
        }
        Self::build(seq, Some(partner), seeds, config, rng)
    }

    fn build(
        seq: &DegreeSequence,
        fixed_partner: Option<Vec<u32>>,
        seeds: SeedChoice,
        config: &ExplorationConfig,
        rng: &mut impl Rng,
    ) -> Result<Self, ExplorationError> {
        let n = seq.n();
        if n < 2 {
            return Err(ExplorationError::TooFewVertices { n });
        }
        assert!(seq.total_half_edges() <= u32::MAX as usize);
        for value in [config.lambda1, config.lambda2] {
            if !(value.is_finite() && value > 0.0) {
                return Err(ExplorationError::InvalidRate { value });
            }
        }
        let (v1, v2) = match seeds {
            SeedChoice::UniformDistinct => {
                let v1 = rng.gen_range(0..n);
                let shifted = rng.gen_range(0..n - 1);
                let v2 = shifted + usize::from(shifted >= v1);
                (v1, v2)
            }
            SeedChoice::Explicit { v1, v2 } => {
                for v in [v1, v2] {
                    if v >= n {
                        return Err(ExplorationError::SeedOutOfRange { vertex: v, n });
                    }
                }
                if v1 == v2 {
                    return Err(ExplorationError::IdenticalSeeds { vertex: v1 });
                }
                (v1, v2)
            }
        };
        let map = HalfEdgeMap::new(seq);
        let total = map.total_half_edges();
        let mut state = Self {
            map,
            degrees: seq.clone(),
            lambda: [config.lambda1, config.lambda2],
            status: vec![HalfEdgeStatus::FreeInactive; total],
            vertices: vec![VertexState::Uninfected; n],
            free_pool: (0..total as u32).collect(),
            free_pos: (0..total as u32).collect(),
            active_pool: [Vec::new(), Vec::new()],
            active_pos: vec![NONE_POS; total],
            pairing: Vec::with_capacity(total / 2),
            fixed_partner,
            step: 0,
            time: 0.0,
            m_prev: 0.0,
            qv_cum: 0.0,
            min_ratio: f64::INFINITY,
            trajectory: Vec::new(),
            thinning: config.thinning.max(1),
            dense_prefix: config.dense_prefix,
            checkpoints: {
                let mut cp = config.checkpoints.clone();
                cp.sort_unstable();
                cp
            },
            stats_range: config.stats_range,
            seeds: (v1, v2),
            initial_active: (0, 0),
            infected: [0, 0],
        };
        for (v, kind) in [(v1, InfectionType::One), (v2, InfectionType::Two)] {
            state.vertices[v] = VertexState::Infected {
                kind,
                step: 0,
                time: 0.0,
            };
            state.infected[kind.index()] += 1;
            let ids: Vec<HalfEdgeId> = state.map.half_edges_of(v).collect();
            for h in ids {
                state.activate(h, kind);
            }
        }
        state.initial_active = (state.active_pool[0].len(), state.active_pool[1].len());
        let (a1, a2) = state.initial_active;
        state.m_prev = a1 as f64 / (a1 + a2) as f64;
        state.record_point();
        Ok(state)
    }

    pub fn s1(&self) -> usize {
        self.active_pool[0].len()
    }

    pub fn s2(&self) -> usize {
        self.active_pool[1].len()
    }

    pub fn active_total(&self) -> usize {
        self.s1() + self.s2()
    }

    pub fn current_step(&self) -> usize {
        self.step
    }

    pub fn current_time(&self) -> f64 {
        self.time
    }

    pub fn seeds(&self) -> (usize, usize) {
        self.seeds
    }

    pub fn initial_active(&self) -> (usize, usize) {
        self.initial_active
    }

    fn activate(&mut self, h: HalfEdgeId, kind: InfectionType) {
        debug_assert_eq!(self.status[h.0 as usize], HalfEdgeStatus::FreeInactive);
        self.status[h.0 as usize] = HalfEdgeStatus::FreeActive(kind);
        let pool = &mut self.active_pool[kind.index()];
        self.active_pos[h.0 as usize] = pool.len() as u32;
        pool.push(h.0);
    }

    fn remove_free(&mut self, h: u32) {
        let i = self.free_pos[h as usize] as usize;
        debug_assert!(i != NONE_POS as usize);
        self.free_pos[h as usize] = NONE_POS;
        let last = self.free_pool.pop().expect("free pool underflow");
        if last != h {
            self.free_pool[i] = last;
            self.free_pos[last as usize] = i as u32;
        }
    }

    fn remove_active(&mut self, h: u32, kind: InfectionType) {
        let pool = &mut self.active_pool[kind.index()];
        let i = self.active_pos[h as usize] as usize;
        debug_assert!(i != NONE_POS as usize);
        self.active_pos[h as usize] = NONE_POS;
        let last = pool.pop().expect("active pool underflow");
        if last != h {
            pool[i] = last;
            self.active_pos[last as usize] = i as u32;
        }
    }

    /// Advances the chain by one event. Errors once no active half-edge
    /// remains.
    pub fn step(&mut self, rng: &mut impl Rng) -> Result<StepEvent, ExplorationError> {
        let (s1, s2) = (self.s1(), self.s2());
        if s1 + s2 == 0 {
            return Err(ExplorationError::NoActiveHalfEdges);
        }
        // (1) holding time: one standard exponential, scaled by the total rate.
        let rate = self.lambda[0] * s1 as f64 + self.lambda[1] * s2 as f64;
        let holding: f64 = rng.sample(Exp1);
        self.time += holding / rate;
        // (2) type choice: the threshold is exactly 0 or 1 when a side is
        // extinct, so the degenerate cases need no special-casing.
        let u: f64 = rng.gen();
        let kind = if u < self.lambda[0] * s1 as f64 / rate {
            InfectionType::One
        } else {
            InfectionType::Two
        };
        // (3) the active half-edge, uniform within its type.
        let pool = &self.active_pool[kind.index()];
        let q = pool[rng.gen_range(0..pool.len())];
        // (4) the partner, uniform over free half-edges other than q.
        let r = match &self.fixed_partner {
            Some(partner) => partner[q as usize],
            None => loop {
                let cand = self.free_pool[rng.gen_range(0..self.free_pool.len())];
                if cand != q {
                    break cand;
                }
            },
        };
        debug_assert_ne!(q, r);
        let r_status = self.status[r as usize];
        debug_assert_ne!(r_status, HalfEdgeStatus::Paired);

        self.remove_free(q);
        self.remove_free(r);
        self.remove_active(q, kind);
        self.status[q as usize] = HalfEdgeStatus::Paired;
        let newly_infected = match r_status {
            HalfEdgeStatus::FreeActive(other) => {
                self.remove_active(r, other);
                self.status[r as usize] = HalfEdgeStatus::Paired;
                None
            }
            HalfEdgeStatus::FreeInactive => {
                self.status[r as usize] = HalfEdgeStatus::Paired;
                let y = self.map.vertex_of(HalfEdgeId(r));
                self.vertices[y] = VertexState::Infected {
                    kind,
                    step: self.step + 1,
                    time: self.time,
                };
                self.infected[kind.index()] += 1;
                let ids: Vec<HalfEdgeId> = self
                    .map
                    .half_edges_of(y)
                    .filter(|h| h.0 != r)
                    .collect();
                for h in ids {
                    self.activate(h, kind);
                }
                Some(y)
            }
            HalfEdgeStatus::Paired => unreachable!("paired half-edge in free pool"),
        };
        self.pairing.push((HalfEdgeId(q), HalfEdgeId(r)));
        self.step += 1;

        // Conservation: every half-edge is paired or free, never both.
        debug_assert_eq!(
            2 * self.pairing.len() + self.free_pool.len(),
            self.map.total_half_edges()
        );

        let (s1, s2) = (self.s1(), self.s2());
        let total = s1 + s2;
        let m = if total > 0 {
            s1 as f64 / total as f64
        } else {
            self.m_prev
        };
        let dm = m - self.m_prev;
        self.qv_cum += dm * dm;
        self.m_prev = m;
        if let Some((lo, hi)) = self.stats_range {
            if self.step >= lo && self.step <= hi {
                let ratio = total as f64 / self.step as f64;
                self.min_ratio = self.min_ratio.min(ratio);
            }
        }
        if self.step < self.dense_prefix
            || self.step % self.thinning == 0
            || self.checkpoints.binary_search(&self.step).is_ok()
            || total == 0
        {
            self.record_point();
        }
        Ok(StepEvent {
            k: self.step,
            t: self.time,
            kind,
            q: HalfEdgeId(q),
            r: HalfEdgeId(r),
            newly_infected,
            s1,
            s2,
        })
    }

    fn record_point(&mut self) {
        self.trajectory.push(TrajectoryPoint {
            k: self.step,
            t: self.time,
            s1: self.s1(),
            s2: self.s2(),
            m: self.m_prev,
            qv: self.qv_cum,
        });
    }

    /// Runs until the active set empties, then completes the matching on the
    /// untouched half-edges so the outcome carries a full multigraph.
    /// `thinning` overrides the recording stride for this run (0 records
    /// every step).
    pub fn run_to_termination(
        mut self,
        rng: &mut impl Rng,
        thinning: usize,
    ) -> Result<CompetitionOutcome, ExplorationError> {
        self.thinning = thinning.max(1);
        while self.active_total() > 0 {
            self.step(rng)?;
        }
        self.finish(rng)
    }

    fn finish(mut self, rng: &mut impl Rng) -> Result<CompetitionOutcome, ExplorationError> {
        let termination_step = self.step;
        let mut remaining: Vec<HalfEdgeId> =
            self.free_pool.iter().map(|&h| HalfEdgeId(h)).collect();
        remaining.sort_unstable();
        let tail = match &self.fixed_partner {
            Some(partner) => {
                let mut used = vec![false; self.map.total_half_edges()];
                let mut tail = Vec::with_capacity(remaining.len() / 2);
                for h in &remaining {
                    if used[h.0 as usize] {
                        continue;
                    }
                    let p = partner[h.0 as usize];
                    used[h.0 as usize] = true;
                    used[p as usize] = true;
                    tail.push((*h, HalfEdgeId(p)));
                }
                tail
            }
            None => uniform_matching(&remaining, rng).expect("even remainder"),
        };
        self.pairing.extend(tail);
        let final_graph =
            Multigraph::from_pairing(&self.map, self.degrees.n(), std::mem::take(&mut self.pairing));
        let min_active_ratio = self.stats_range.map(|(lo, _)| {
            if termination_step < lo {
                0.0
            } else {
                self.min_ratio
            }
        });
        Ok(CompetitionOutcome {
            n: self.degrees.n(),
            edge_count: self.degrees.edge_count(),
            lambda1: self.lambda[0],
            lambda2: self.lambda[1],
            seeds: self.seeds,
            initial_active: self.initial_active,
            n1: self.infected[0],
            n2: self.infected[1],
            termination_step,
            trajectory: self.trajectory,
            min_active_ratio,
            vertices: self.vertices,
            final_graph,
        })
    }

    /// Advances until the first event time exceeds `t_end` and returns the
    /// active counts `(s1, s2)` as of `t_end`. The state itself is left one
    /// event past the probe time, so this is a consuming probe.
    pub fn run_until_time(
        &mut self,
        t_end: f64,
        rng: &mut impl Rng,
    ) -> Result<(usize, usize), ExplorationError> {
        loop {
            if self.active_total() == 0 {
                return Ok((0, 0));
            }
            let snapshot = (self.s1(), self.s2());
            self.step(rng)?;
            if self.time > t_end {
                return Ok(snapshot);
            }
        }
    }

    /// Exhaustive consistency check of statuses, pools, and vertex states;
    /// panics on violation. Test support, O(N).
    pub fn validate(&self) {
        let total = self.map.total_half_edges();
        let mut free = vec![false; total];
        for (i, &h) in self.free_pool.iter().enumerate() {
            assert_eq!(self.free_pos[h as usize], i as u32);
            free[h as usize] = true;
        }
        for kind in [InfectionType::One, InfectionType::Two] {
            for (i, &h) in self.active_pool[kind.index()].iter().enumerate() {
                assert_eq!(self.active_pos[h as usize], i as u32);
                assert_eq!(self.status[h as usize], HalfEdgeStatus::FreeActive(kind));
                assert!(free[h as usize], "active half-edge not free");
            }
        }
        let mut paired = vec![false; total];
        for &(a, b) in &self.pairing {
            for h in [a, b] {
                assert!(!paired[h.0 as usize], "half-edge paired twice");
                paired[h.0 as usize] = true;
                assert_eq!(self.status[h.0 as usize], HalfEdgeStatus::Paired);
            }
        }
        for h in 0..total {
            assert_ne!(free[h], paired[h], "half-edge must be free xor paired");
            let v = self.map.vertex_of(HalfEdgeId(h as u32));
            match (self.vertices[v], self.status[h]) {
                (VertexState::Uninfected, HalfEdgeStatus::FreeInactive) => {}
                (VertexState::Uninfected, s) => panic!("uninfected vertex has status {s:?}"),
                (VertexState::Infected { kind, .. }, HalfEdgeStatus::FreeActive(k)) => {
                    assert_eq!(kind, k, "active type differs from vertex type")
                }
                (VertexState::Infected { .. }, HalfEdgeStatus::Paired) => {}
                (VertexState::Infected { .. }, HalfEdgeStatus::FreeInactive) => {
                    panic!("infected vertex has an inactive half-edge")
                }
            }
        }
        let infected = self
            .vertices
            .iter()
            .filter(|v| matches!(v, VertexState::Infected { .. }))
            .count();
        assert_eq!(infected, self.infected[0] + self.infected[1]);
    }
}

impl CompetitionOutcome {
    /// The recorded point for step `k`, if `k` was recorded.
    pub fn point_at(&self, k: usize) -> Option<&TrajectoryPoint> {
        self.trajectory
            .binary_search_by_key(&k, |p| p.k)
            .ok()
            .map(|i| &self.trajectory[i])
    }

    pub fn final_point(&self) -> &TrajectoryPoint {
        self.trajectory.last().expect("k = 0 is always recorded")
    }
}

/// `M_k` for any step up to the edge count: read from the trajectory while
/// the process lives, the terminal value carried forward afterwards.
pub fn m_at(outcome: &CompetitionOutcome, k: usize) -> Result<f64, ExplorationError> {
    if k > outcome.edge_count {
        return Err(ExplorationError::StepNotRecorded { step: k });
    }
    if k >= outcome.termination_step {
        return Ok(outcome.final_point().m);
    }
    outcome
        .point_at(k)
        .map(|p| p.m)
        .ok_or(ExplorationError::StepNotRecorded { step: k })
}

/// Accumulated quadratic variation through step `k`; same recording rules
/// as [`m_at`].
pub fn qv_at(outcome: &CompetitionOutcome, k: usize) -> Result<f64, ExplorationError> {
    if k > outcome.edge_count {
        return Err(ExplorationError::StepNotRecorded { step: k });
    }
    if k >= outcome.termination_step {
        return Ok(outcome.final_point().qv);
    }
    outcome
        .point_at(k)
        .map(|p| p.qv)
        .ok_or(ExplorationError::StepNotRecorded { step: k })
}

/// Flat, serializable summary of an outcome, for embedding in reports.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct OutcomeSummary {
    pub n: usize,
    pub edge_count: usize,
    pub lambda1: f64,
    pub lambda2: f64,
    pub v1: usize,
    pub v2: usize,
    pub a1: usize,
    pub a2: usize,
    pub n1: usize,
    pub n2: usize,
    pub nbar1: f64,
    pub nbar2: f64,
    pub termination_step: usize,
    pub final_m: f64,
}

impl From<&CompetitionOutcome> for OutcomeSummary {
    fn from(o: &CompetitionOutcome) -> Self {
        OutcomeSummary {
            n: o.n,
            edge_count: o.edge_count,
            lambda1: o.lambda1,
            lambda2: o.lambda2,
            v1: o.seeds.0,
            v2: o.seeds.1,
            a1: o.initial_active.0,
            a2: o.initial_active.1,
            n1: o.n1,
            n2: o.n2,
            nbar1: o.n1 as f64 / o.n as f64,
            nbar2: o.n2 as f64 / o.n as f64,
            termination_step: o.termination_step,
            final_m: o.final_point().m,
        }
    }
}

/// Trajectory in CSV form: header `k,t,s1,s2,m`, one recorded step per row.
pub fn trajectory_csv(outcome: &CompetitionOutcome) -> String {
    let mut out = String::from("k,t,s1,s2,m\n");
    for p in &outcome.trajectory {
        out.push_str(&format!("{},{},{},{},{}\n", p.k, p.t, p.s1, p.s2, p.m));
    }
    out
}
