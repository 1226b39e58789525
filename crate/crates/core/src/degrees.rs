//! Degree sequences for the configuration model.
//!
//! A degree sequence assigns each vertex a positive number of half-edges;
//! the total must be even so that all half-edges can be paired. This module
//! loads explicit sequences, samples IID sequences from a finite pmf (with a
//! parity fix that increments one uniformly chosen degree when the raw sum
//! is odd), and computes the empirical statistics that drive the rest of the
//! toolkit: the degree law, its size-biased version, and the mean excess
//! `E[D* - 1]` whose value 1 marks the giant-component threshold.

use std::collections::BTreeMap;

use rand::Rng;
use thiserror::Error;

/// Tolerance for `|sum(pmf) - 1|` when validating user-supplied pmfs.
pub const PMF_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum DegreeError {
    #[error("degree sequence is empty")]
    EmptySequence,
    #[error("degree {value} at index {index} is not a positive integer")]
    NonPositiveDegree { index: usize, value: i64 },
    #[error("total degree {total} is odd; half-edges cannot all be paired")]
    OddTotalDegree { total: u64 },
    #[error("invalid pmf: {0}")]
    InvalidPmf(String),
    #[error("degree file, line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// A validated degree sequence: every degree is at least 1 and the total
/// degree is even.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DegreeSequence {
    degrees: Vec<usize>,
    total_half_edges: usize,
}

impl DegreeSequence {
    /// Builds a sequence from plain (possibly invalid) integers.
    pub fn new(raw: &[i64]) -> Result<Self, DegreeError> {
        if raw.is_empty() {
            return Err(DegreeError::EmptySequence);
        }
        let mut degrees = Vec::with_capacity(raw.len());
        let mut total: u64 = 0;
        for (index, &value) in raw.iter().enumerate() {
            if value < 1 {
                return Err(DegreeError::NonPositiveDegree { index, value });
            }
            total += value as u64;
            degrees.push(value as usize);
        }
        if total % 2 != 0 {
            return Err(DegreeError::OddTotalDegree { total });
        }
        Ok(Self {
            degrees,
            total_half_edges: total as usize,
        })
    }

    pub fn from_degrees(degrees: Vec<usize>) -> Result<Self, DegreeError> {
        if degrees.is_empty() {
            return Err(DegreeError::EmptySequence);
        }
        if let Some(index) = degrees.iter().position(|&d| d == 0) {
            return Err(DegreeError::NonPositiveDegree { index, value: 0 });
        }
        let total: usize = degrees.iter().sum();
        if total % 2 != 0 {
            return Err(DegreeError::OddTotalDegree {
                total: total as u64,
            });
        }
        Ok(Self {
            degrees,
            total_half_edges: total,
        })
    }

    /// Number of vertices.
    pub fn n(&self) -> usize {
        self.degrees.len()
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn degree(&self, vertex: usize) -> usize {
        self.degrees[vertex]
    }

    pub fn total_half_edges(&self) -> usize {
        self.total_half_edges
    }

    /// Number of edges `N = total_half_edges / 2`; exact by the parity invariant.
    pub fn edge_count(&self) -> usize {
        self.total_half_edges / 2
    }
}

/// Empirical statistics of a degree sequence: the law of the degree of a
/// uniform vertex, its size-biased version, and derived moments.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeStats {
    /// Empirical pmf: `P(D = k) = #{i : d_i = k} / n`.
    pub pmf: BTreeMap<usize, f64>,
    pub mean: f64,
    pub second_moment: f64,
    /// Size-biased pmf: `P(D* = d) = d P(D = d) / E[D]`, the degree law of
    /// the vertex reached by following a uniform half-edge.
    pub size_biased_pmf: BTreeMap<usize, f64>,
    /// `E[D* - 1]`; the giant-component threshold sits at 1.
    pub mean_excess: f64,
}

/// Exact empirical statistics of `seq`. Deterministic and invariant under
/// permutation of the degree list.
pub fn compute_stats(seq: &DegreeSequence) -> DegreeStats {
    let n = seq.n() as f64;
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for &d in seq.degrees() {
        *counts.entry(d).or_insert(0) += 1;
    }
    let pmf: BTreeMap<usize, f64> = counts
        .iter()
        .map(|(&d, &c)| (d, c as f64 / n))
        .collect();
    let mean = seq.total_half_edges() as f64 / n;
    let second_moment = counts
        .iter()
        .map(|(&d, &c)| (d * d * c) as f64)
        .sum::<f64>()
        / n;
    let size_biased_pmf: BTreeMap<usize, f64> = pmf
        .iter()
        .map(|(&d, &p)| (d, d as f64 * p / mean))
        .collect();
    let mean_excess = second_moment / mean - 1.0;
    DegreeStats {
        pmf,
        mean,
        second_moment,
        size_biased_pmf,
        mean_excess,
    }
}

/// Structural flags behind the regularity assumptions: minimum degree 2 and
/// some degree above 2 keep the giant component covering almost all
/// vertices. Always computed from the data, never user-asserted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct AssumptionFlags {
    pub all_at_least_two: bool,
    pub some_above_two: bool,
    /// Whether the generating law has finite second moment. Finite lists and
    /// finitely supported pmfs always do; the flag records the declaration
    /// for the source.
    pub finite_second_moment_declared: bool,
}

pub fn check_assumptions(seq: &DegreeSequence) -> AssumptionFlags {
    let min = seq.degrees().iter().copied().min().unwrap_or(0);
    let max = seq.degrees().iter().copied().max().unwrap_or(0);
    AssumptionFlags {
        all_at_least_two: min >= 2,
        some_above_two: max > 2,
        finite_second_moment_declared: true,
    }
}

/// A finitely supported probability mass function on nonnegative integers,
/// prepared for O(log support) inverse-cdf sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct IntPmf {
    values: Vec<usize>,
    probs: Vec<f64>,
    cdf: Vec<f64>,
}

impl IntPmf {
    /// Validates and normalizes a pmf given as `value -> probability`.
    /// Entries with zero mass are dropped; negative mass or a total farther
    /// than [`PMF_TOLERANCE`] from 1 is rejected.
    pub fn new(map: &BTreeMap<usize, f64>) -> Result<Self, DegreeError> {
        let mut values = Vec::new();
        let mut probs = Vec::new();
        let mut sum = 0.0;
        for (&v, &p) in map {
            if !p.is_finite() || p < 0.0 {
                return Err(DegreeError::InvalidPmf(format!(
                    "probability {p} for value {v}"
                )));
            }
            sum += p;
            if p > 0.0 {
                values.push(v);
                probs.push(p);
            }
        }
        if values.is_empty() {
            return Err(DegreeError::InvalidPmf("no positive mass".into()));
        }
        if (sum - 1.0).abs() > PMF_TOLERANCE {
            return Err(DegreeError::InvalidPmf(format!(
                "total mass {sum} differs from 1 by more than {PMF_TOLERANCE}"
            )));
        }
        let mut cdf = Vec::with_capacity(probs.len());
        let mut acc = 0.0;
        for &p in &probs {
            acc += p;
            cdf.push(acc);
        }
        // Guard the last bucket against rounding in the running sum.
        if let Some(last) = cdf.last_mut() {
            *last = 1.0;
        }
        Ok(Self { values, probs, cdf })
    }

    /// Like [`IntPmf::new`] but additionally requires support on positive
    /// integers, as a degree law must be.
    pub fn positive(map: &BTreeMap<usize, f64>) -> Result<Self, DegreeError> {
        let pmf = Self::new(map)?;
        if pmf.values[0] == 0 {
            return Err(DegreeError::InvalidPmf(
                "degree pmf has mass at 0".into(),
            ));
        }
        Ok(pmf)
    }

    /// One draw by inversion; consumes exactly one uniform from `rng`.
    pub fn sample(&self, rng: &mut impl Rng) -> usize {
        let u: f64 = rng.gen();
        let idx = self.cdf.partition_point(|&c| c <= u);
        self.values[idx.min(self.values.len() - 1)]
    }

    /// The single supported value, if the pmf is a point mass.
    pub fn degenerate_value(&self) -> Option<usize> {
        (self.values.len() == 1).then(|| self.values[0])
    }

    pub fn support(&self) -> &[usize] {
        &self.values
    }

    pub fn mean(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.probs)
            .map(|(&v, &p)| v as f64 * p)
            .sum()
    }

    pub fn min_value(&self) -> usize {
        self.values[0]
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values.iter().copied().zip(self.probs.iter().copied())
    }
}

/// Draws `n` IID degrees from `pmf`. If the raw sum is odd, exactly one
/// uniformly chosen entry is incremented by 1 (an extra `gen_range` draw),
/// so the output total is always even and at most one entry differs by +1
/// from its raw draw.
pub fn sample_iid_degrees(
    pmf: &IntPmf,
    n: usize,
    rng: &mut impl Rng,
) -> Result<DegreeSequence, DegreeError> {
    if n == 0 {
        return Err(DegreeError::EmptySequence);
    }
    if pmf.min_value() == 0 {
        return Err(DegreeError::InvalidPmf(
            "degree pmf has mass at 0".into(),
        ));
    }
    let mut degrees = Vec::with_capacity(n);
    let mut total: usize = 0;
    for _ in 0..n {
        let d = pmf.sample(rng);
        total += d;
        degrees.push(d);
    }
    if total % 2 != 0 {
        let idx = rng.gen_range(0..n);
        degrees[idx] += 1;
    }
    DegreeSequence::from_degrees(degrees)
}

/// Loads a degree sequence, rejecting non-positive entries and odd totals.
pub fn load_degree_sequence(raw: &[i64]) -> Result<DegreeSequence, DegreeError> {
    DegreeSequence::new(raw)
}

/// Parses the degree file format: one integer per line, `#` starts a
/// comment, blank lines are skipped.
pub fn parse_degree_file(text: &str) -> Result<DegreeSequence, DegreeError> {
    let mut raw = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let value: i64 = body.parse().map_err(|e| DegreeError::Parse {
            line: i + 1,
            reason: format!("{e}"),
        })?;
        raw.push(value);
    }
    DegreeSequence::new(&raw)
}

/// Renders a sequence in the degree file format.
pub fn degree_file_string(seq: &DegreeSequence) -> String {
    let mut out = String::new();
    for &d in seq.degrees() {
        out.push_str(&d.to_string());
        out.push('\n');
    }
    out
}

/// Where degree sequences come from: a fixed list or an IID sampler.
#[derive(Debug, Clone)]
pub enum DegreeSource {
    Explicit(DegreeSequence),
    Iid { pmf: IntPmf, n: usize },
}

impl DegreeSource {
    pub fn n(&self) -> usize {
        match self {
            DegreeSource::Explicit(seq) => seq.n(),
            DegreeSource::Iid { n, .. } => *n,
        }
    }

    /// Flags computed from the list itself, or from the declared pmf support
    /// for IID sources.
    pub fn assumption_flags(&self) -> AssumptionFlags {
        match self {
            DegreeSource::Explicit(seq) => check_assumptions(seq),
            DegreeSource::Iid { pmf, .. } => AssumptionFlags {
                all_at_least_two: pmf.min_value() >= 2,
                some_above_two: pmf.support().iter().any(|&v| v > 2),
                finite_second_moment_declared: true,
            },
        }
    }

    /// Produces a concrete sequence: a fresh IID sample, or a clone of the
    /// explicit list.
    pub fn realize(&self, rng: &mut impl Rng) -> Result<DegreeSequence, DegreeError> {
        match self {
            DegreeSource::Explicit(seq) => Ok(seq.clone()),
            DegreeSource::Iid { pmf, n } => sample_iid_degrees(pmf, *n, rng),
        }
    }
}
