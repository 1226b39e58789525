//! Half-edge pairing: the configuration model.
//!
//! Each vertex `v` owns `d_v` half-edges, numbered consecutively so that
//! half-edge ids `offsets[v]..offsets[v+1]` belong to `v`. A multigraph is a
//! perfect matching of the half-edges; drawing the matching uniformly at
//! random yields the configuration model. Conditioning on the result being
//! simple (no self-loops, no parallel edges) by rejection yields a uniform
//! simple graph with the given degrees.

use rand::Rng;
use thiserror::Error;

use crate::degrees::DegreeSequence;

#[derive(Debug, Error, PartialEq)]
pub enum PairingError {
    #[error("cannot match an odd set of {size} half-edges")]
    OddSetSize { size: usize },
    #[error("no simple graph found in {attempts} attempts")]
    MaxAttemptsExceeded { attempts: usize },
}

/// Index of a half-edge; ids are dense in `0..total_half_edges`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HalfEdgeId(pub u32);

/// Constant-time translation between half-edges and their owning vertices.
#[derive(Debug, Clone)]
pub struct HalfEdgeMap {
    offsets: Vec<u32>,
    vertex: Vec<u32>,
}

impl HalfEdgeMap {
    pub fn new(seq: &DegreeSequence) -> Self {
        let mut offsets = Vec::with_capacity(seq.n() + 1);
        let mut vertex = Vec::with_capacity(seq.total_half_edges());
        let mut acc = 0u32;
        offsets.push(0);
        for (v, &d) in seq.degrees().iter().enumerate() {
            acc += d as u32;
            offsets.push(acc);
            vertex.extend(std::iter::repeat(v as u32).take(d));
        }
        Self { offsets, vertex }
    }

    pub fn total_half_edges(&self) -> usize {
        self.vertex.len()
    }

    pub fn vertex_of(&self, h: HalfEdgeId) -> usize {
        self.vertex[h.0 as usize] as usize
    }

    /// Half-edge ids owned by `v`, in increasing order.
    pub fn half_edges_of(&self, v: usize) -> impl Iterator<Item = HalfEdgeId> {
        (self.offsets[v]..self.offsets[v + 1]).map(HalfEdgeId)
    }

    pub fn degree(&self, v: usize) -> usize {
        (self.offsets[v + 1] - self.offsets[v]) as usize
    }
}

/// Uniformly random perfect matching of `half_edges` (which must hold
/// distinct ids). Repeatedly matches the lowest-numbered unmatched half-edge
/// to a uniform choice among the others, removing both from a swap-remove
/// pool; O(1) per pick. The partner draw is one `gen_range` per pair.
pub fn uniform_matching(
    half_edges: &[HalfEdgeId],
    rng: &mut impl Rng,
) -> Result<Vec<(HalfEdgeId, HalfEdgeId)>, PairingError> {
    if half_edges.len() % 2 != 0 {
        return Err(PairingError::OddSetSize {
            size: half_edges.len(),
        });
    }
    let mut order = half_edges.to_vec();
    order.sort_unstable();
    let max_id = match order.last() {
        Some(h) => h.0 as usize,
        None => return Ok(Vec::new()),
    };
    // pos[id] = index in pool, u32::MAX once removed.
    let mut pool = order.clone();
    let mut pos = vec![u32::MAX; max_id + 1];
    for (i, h) in pool.iter().enumerate() {
        debug_assert_eq!(pos[h.0 as usize], u32::MAX, "duplicate half-edge id");
        pos[h.0 as usize] = i as u32;
    }
    fn remove(pool: &mut Vec<HalfEdgeId>, pos: &mut [u32], h: HalfEdgeId) {
        let i = pos[h.0 as usize] as usize;
        pos[h.0 as usize] = u32::MAX;
        let last = pool.pop().expect("pool underflow");
        if last != h {
            pool[i] = last;
            pos[last.0 as usize] = i as u32;
        }
    }
    let mut pairs = Vec::with_capacity(order.len() / 2);
    for &q in &order {
        if pos[q.0 as usize] == u32::MAX {
            continue;
        }
        remove(&mut pool, &mut pos, q);
        let r = pool[rng.gen_range(0..pool.len())];
        remove(&mut pool, &mut pos, r);
        pairs.push((q, r));
    }
    Ok(pairs)
}

/// A multigraph realized as a perfect matching of half-edges, kept in
/// pairing order together with its projection to vertex pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct Multigraph {
    n: usize,
    pairing: Vec<(HalfEdgeId, HalfEdgeId)>,
    edges: Vec<(u32, u32)>,
}

impl Multigraph {
    pub fn from_pairing(
        map: &HalfEdgeMap,
        n: usize,
        pairing: Vec<(HalfEdgeId, HalfEdgeId)>,
    ) -> Self {
        let edges = pairing
            .iter()
            .map(|&(a, b)| (map.vertex_of(a) as u32, map.vertex_of(b) as u32))
            .collect();
        Self { n, pairing, edges }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn pairing(&self) -> &[(HalfEdgeId, HalfEdgeId)] {
        &self.pairing
    }

    /// Edges as vertex pairs, in pairing order; a self-loop appears as
    /// `(v, v)`.
    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    /// True when the multigraph has no self-loops and no parallel edges.
    pub fn is_simple(&self) -> bool {
        let mut sorted: Vec<(u32, u32)> = self
            .edges
            .iter()
            .map(|&(u, v)| (u.min(v), u.max(v)))
            .collect();
        if sorted.iter().any(|&(u, v)| u == v) {
            return false;
        }
        sorted.sort_unstable();
        sorted.windows(2).all(|w| w[0] != w[1])
    }

    /// Degree of each vertex induced by the matching; equals the input
    /// sequence whenever the pairing covers all half-edges exactly once.
    pub fn induced_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.n];
        for &(u, v) in &self.edges {
            deg[u as usize] += 1;
            deg[v as usize] += 1;
        }
        deg
    }

    /// Plain-text edge list: one `u v` pair per line, vertices 0-based, in
    /// pairing order.
    pub fn edge_list_string(&self) -> String {
        let mut out = String::new();
        for &(u, v) in &self.edges {
            out.push_str(&format!("{u} {v}\n"));
        }
        out
    }
}

/// Samples a configuration-model multigraph on `seq`.
pub fn generate_configuration_graph(seq: &DegreeSequence, rng: &mut impl Rng) -> Multigraph {
    let map = HalfEdgeMap::new(seq);
    let all: Vec<HalfEdgeId> = (0..map.total_half_edges() as u32).map(HalfEdgeId).collect();
    let pairing = uniform_matching(&all, rng).expect("even by DegreeSequence invariant");
    Multigraph::from_pairing(&map, seq.n(), pairing)
}

/// Samples a uniform simple graph with the given degrees by rejection:
/// regenerates until `is_simple`, failing after `max_attempts` draws. Each
/// accepted graph is uniform because conditioning a uniform matching on a
/// property preserves uniformity on the survivors.
pub fn sample_simple_graph(
    seq: &DegreeSequence,
    rng: &mut impl Rng,
    max_attempts: usize,
) -> Result<Multigraph, PairingError> {
    assert!(max_attempts > 0);
    for _ in 0..max_attempts {
        let g = generate_configuration_graph(seq, rng);
        if g.is_simple() {
            return Ok(g);
        }
    }
    Err(PairingError::MaxAttemptsExceeded {
        attempts: max_attempts,
    })
}

/// All perfect matchings of half-edges `0..m`, each in canonical form; there
/// are (m-1)!! of them. Exhaustive, so only tiny instances are allowed.
pub fn enumerate_matchings(m: usize) -> Vec<Vec<(u32, u32)>> {
    assert!(m % 2 == 0 && m <= 12, "enumeration limited to m <= 12");
    let mut avail: Vec<u32> = (0..m as u32).collect();
    let mut cur = Vec::with_capacity(m / 2);
    let mut out = Vec::new();
    fn rec(avail: &mut Vec<u32>, cur: &mut Vec<(u32, u32)>, out: &mut Vec<Vec<(u32, u32)>>) {
        if avail.is_empty() {
            out.push(cur.clone());
            return;
        }
        let q = avail.remove(0);
        for i in 0..avail.len() {
            let r = avail.remove(i);
            cur.push((q, r));
            rec(avail, cur, out);
            cur.pop();
            avail.insert(i, r);
        }
        avail.insert(0, q);
    }
    rec(&mut avail, &mut cur, &mut out);
    out
}

/// Canonical form of a matching: each pair ordered low-high, pairs sorted by
/// first element. Two matchings are equal iff their canonical forms are.
pub fn canonical_matching(pairing: &[(HalfEdgeId, HalfEdgeId)]) -> Vec<(u32, u32)> {
    let mut v: Vec<(u32, u32)> = pairing
        .iter()
        .map(|&(a, b)| (a.0.min(b.0), a.0.max(b.0)))
        .collect();
    v.sort_unstable();
    v
}
