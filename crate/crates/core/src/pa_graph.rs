//! Preferential attachment multigraphs `PA_t(m, δ)`.
//!
//! `PA_t(1, δ)` starts from a single vertex carrying one self-loop. Vertex
//! `s` (0-based, so `s` vertices are already present) sends its single edge
//! to itself with probability `(1+δ) / (s(2+δ) + (1+δ))` and to an older
//! vertex `i` with probability `(D_i(s)+δ) / (s(2+δ) + (1+δ))`.
//! `PA_t(m, δ)` is obtained from `PA_{mt}(1, δ/m)` by merging consecutive
//! blocks of `m` vertices; loops and parallel edges survive the merge.
//!
//! Vertices are numbered from 0 in arrival order. Every edge is recorded as
//! `(child, target)` with `target <= child`, `target == child` meaning a
//! self-loop.
//!
//! Randomness comes from [`ChaCha8Rng::seed_from_u64`], so a given
//! `(t, m, δ, seed)` produces the same edge sequence on every platform.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Model parameters `m` (edges per arriving vertex) and `δ` (attachment
/// offset, `δ > -m`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PaParams {
    m: usize,
    delta: f64,
}

impl PaParams {
    pub fn new(m: usize, delta: f64) -> Result<Self> {
        if m == 0 {
            return Err(Error::param("m must be at least 1"));
        }
        if !delta.is_finite() || delta <= -(m as f64) {
            return Err(Error::param(format!("delta must exceed -m = -{m}, got {delta}")));
        }
        Ok(PaParams { m, delta })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Degree growth exponent `γ = 1 / (2 + δ/m)`, always in `(0, 1)`.
    pub fn gamma(&self) -> f64 {
        1.0 / (2.0 + self.delta / self.m as f64)
    }
}

/// An arrival-ordered multigraph with `t` vertices and `m·t` edges.
///
/// The adjacency is stored as incident edge-endpoint slots: an ordinary edge
/// `(u, w)` puts `w` in the slots of `u` and `u` in the slots of `w`, a
/// self-loop puts `v` twice in the slots of `v`. The slot count of a vertex
/// is therefore its degree.
#[derive(Debug, Clone)]
pub struct PaGraph {
    t: usize,
    params: PaParams,
    seed: u64,
    edges: Vec<(u32, u32)>,
    offsets: Vec<usize>,
    slots: Vec<u32>,
}

impl PartialEq for PaGraph {
    fn eq(&self, other: &Self) -> bool {
        // the adjacency is a pure function of the edge sequence
        self.t == other.t
            && self.params == other.params
            && self.seed == other.seed
            && self.edges == other.edges
    }
}

/// Per-vertex degrees `D_i(t)` and their prefix sums `S_i(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeStats {
    pub degrees: Vec<u64>,
    /// `prefix_sums[i]` is the total degree of vertices `0..=i`.
    pub prefix_sums: Vec<u64>,
}

impl PaGraph {
    /// Builds a graph from an arrival-ordered edge list, checking every
    /// structural invariant: `m·t` edges, `m` consecutive edges per child and
    /// `target <= child`.
    pub fn from_edges(t: usize, params: PaParams, seed: u64, edges: Vec<(u32, u32)>) -> Result<Self> {
        let m = params.m();
        if t == 0 {
            return Err(Error::param("a graph needs at least one vertex"));
        }
        if edges.len() != m * t {
            return Err(Error::param(format!(
                "expected {} edges for t={t}, m={m}, got {}",
                m * t,
                edges.len()
            )));
        }
        for (e, &(child, target)) in edges.iter().enumerate() {
            if child as usize != e / m {
                return Err(Error::param(format!("edge {e} has child {child}, expected {}", e / m)));
            }
            if target > child {
                return Err(Error::ArrivalOrder {
                    line: e + 1,
                    child: child as usize,
                    target: target as usize,
                });
            }
        }
        Ok(Self::assemble(t, params, seed, edges))
    }

    fn assemble(t: usize, params: PaParams, seed: u64, edges: Vec<(u32, u32)>) -> Self {
        let mut degree = vec![0usize; t];
        for &(c, w) in &edges {
            degree[c as usize] += 1;
            degree[w as usize] += 1;
        }
        let mut offsets = Vec::with_capacity(t + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut fill = offsets[..t].to_vec();
        let mut slots = vec![0u32; 2 * edges.len()];
        for &(c, w) in &edges {
            slots[fill[c as usize]] = w;
            fill[c as usize] += 1;
            slots[fill[w as usize]] = c;
            fill[w as usize] += 1;
        }
        PaGraph {
            t,
            params,
            seed,
            edges,
            offsets,
            slots,
        }
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn params(&self) -> PaParams {
        self.params
    }

    pub fn m(&self) -> usize {
        self.params.m
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Edges in arrival order; edge `e` belongs to child `e / m`.
    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    /// Incident edge-endpoint slots of `v`, with multiplicity.
    pub fn slots(&self, v: usize) -> &[u32] {
        &self.slots[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn total_degree(&self) -> usize {
        self.slots.len()
    }

    pub fn min_degree(&self) -> usize {
        (0..self.t).map(|v| self.degree(v)).min().unwrap_or(0)
    }

    pub fn degree_stats(&self) -> DegreeStats {
        let degrees: Vec<u64> = (0..self.t).map(|v| self.degree(v) as u64).collect();
        let prefix_sums = degrees
            .iter()
            .scan(0u64, |acc, &d| {
                *acc += d;
                Some(*acc)
            })
            .collect();
        DegreeStats { degrees, prefix_sums }
    }

    /// Writes the plain-text format: a header line `t m delta seed`
    /// followed by `m·t` lines `child target` in arrival order.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        self.write_to(&mut out)?;
        out.flush()?;
        Ok(())
    }

    pub fn write_to<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "{} {} {} {}", self.t, self.params.m, self.params.delta, self.seed)?;
        for &(c, w) in &self.edges {
            writeln!(out, "{c} {w}")?;
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }

    pub fn read_from<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines();
        let header = lines.next().ok_or_else(|| Error::Malformed {
            line: 1,
            reason: "empty file".into(),
        })??;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::Malformed {
                line: 1,
                reason: format!("header needs `t m delta seed`, got {:?}", header),
            });
        }
        let bad = |what: &str| Error::Malformed {
            line: 1,
            reason: format!("cannot parse {what}"),
        };
        let t: usize = fields[0].parse().map_err(|_| bad("t"))?;
        let m: usize = fields[1].parse().map_err(|_| bad("m"))?;
        let delta: f64 = fields[2].parse().map_err(|_| bad("delta"))?;
        let seed: u64 = fields[3].parse().map_err(|_| bad("seed"))?;
        let params = PaParams::new(m, delta).map_err(|e| Error::Malformed {
            line: 1,
            reason: e.to_string(),
        })?;
        if t == 0 {
            return Err(Error::Malformed {
                line: 1,
                reason: "t must be at least 1".into(),
            });
        }
        let expected = m.checked_mul(t).filter(|&n| n <= u32::MAX as usize).ok_or_else(|| {
            Error::Malformed {
                line: 1,
                reason: "m*t exceeds the supported graph size".into(),
            }
        })?;

        let mut edges = Vec::with_capacity(expected);
        for (idx, line) in lines.enumerate() {
            let line_no = idx + 2;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let malformed = |reason: String| Error::Malformed { line: line_no, reason };
            let mut parts = line.split_whitespace();
            let (Some(c), Some(w), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(malformed(format!("expected `child target`, got {line:?}")));
            };
            let child: usize = c.parse().map_err(|_| malformed(format!("bad child {c:?}")))?;
            let target: usize = w.parse().map_err(|_| malformed(format!("bad target {w:?}")))?;
            if target > child {
                return Err(Error::ArrivalOrder {
                    line: line_no,
                    child,
                    target,
                });
            }
            let e = edges.len();
            if e >= expected {
                return Err(malformed(format!("more than m*t = {expected} edges")));
            }
            if child != e / m {
                return Err(malformed(format!(
                    "vertex {} has {} edges, expected m = {m}",
                    e / m,
                    e % m
                )));
            }
            edges.push((child as u32, target as u32));
        }
        if edges.len() != expected {
            return Err(Error::Truncated {
                expected,
                found: edges.len(),
            });
        }
        Ok(Self::assemble(t, params, seed, edges))
    }
}

/// Growth probabilities for the next `m = 1` arrival given the current
/// degrees: entry `i < s` is `(D_i+δ)/Z`, the last entry is the self-loop
/// probability `(1+δ)/Z`, with `Z = s(2+δ) + (1+δ)`.
pub fn attachment_distribution(degrees: &[u64], delta: f64) -> Vec<f64> {
    let s = degrees.len() as f64;
    let z = s * (2.0 + delta) + (1.0 + delta);
    let mut probs: Vec<f64> = degrees.iter().map(|&d| (d as f64 + delta) / z).collect();
    probs.push((1.0 + delta) / z);
    probs
}

/// Targets of `PA_n(1, δ)`: entry `u` is the vertex that `u` attached to.
fn grow_single(n: usize, delta: f64, rng: &mut ChaCha8Rng) -> Vec<u32> {
    if delta >= 0.0 {
        grow_mixture(n, delta, rng)
    } else {
        grow_weighted(n, delta, rng)
    }
}

/// `δ >= 0`: a draw is a uniform edge endpoint (weight `2s`), a uniform
/// existing vertex (weight `sδ`) or the new vertex itself (weight `1+δ`).
fn grow_mixture(n: usize, delta: f64, rng: &mut ChaCha8Rng) -> Vec<u32> {
    let mut targets = Vec::with_capacity(n);
    let mut endpoints: Vec<u32> = Vec::with_capacity(2 * n);
    for s in 0..n {
        let sf = s as f64;
        let z = sf * (2.0 + delta) + (1.0 + delta);
        let (endpoint_w, uniform_w, self_w) = (2.0 * sf, sf * delta, 1.0 + delta);
        debug_assert!(((endpoint_w + uniform_w + self_w) - z).abs() <= 1e-12 * z);
        let x = rng.random::<f64>() * z;
        let target = if x < endpoint_w {
            endpoints[rng.random_range(0..2 * s)]
        } else if x < endpoint_w + uniform_w {
            rng.random_range(0..s) as u32
        } else {
            s as u32
        };
        targets.push(target);
        endpoints.push(s as u32);
        endpoints.push(target);
    }
    targets
}

/// Any `δ > -1`: inverse-CDF sampling over the weights `D_i + δ` held in a
/// Fenwick tree.
fn grow_weighted(n: usize, delta: f64, rng: &mut ChaCha8Rng) -> Vec<u32> {
    let mut tree = Fenwick::new(n);
    let mut targets = Vec::with_capacity(n);
    for s in 0..n {
        // the newcomer's pending endpoint gives it weight 1+δ
        tree.add(s, 1.0 + delta);
        let z = (s as f64) * (2.0 + delta) + (1.0 + delta);
        let x = rng.random::<f64>() * z;
        let target = tree.find(x).min(s);
        tree.add(target, 1.0);
        targets.push(target as u32);
    }
    targets
}

struct Fenwick {
    tree: Vec<f64>,
}

impl Fenwick {
    fn new(n: usize) -> Self {
        Fenwick { tree: vec![0.0; n + 1] }
    }

    fn add(&mut self, i: usize, w: f64) {
        let mut i = i + 1;
        while i < self.tree.len() {
            self.tree[i] += w;
            i += i & i.wrapping_neg();
        }
    }

    /// Smallest index whose prefix sum exceeds `x`.
    fn find(&self, mut x: f64) -> usize {
        let n = self.tree.len() - 1;
        let mut pos = 0;
        let mut step = n.next_power_of_two();
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next] <= x {
                pos = next;
                x -= self.tree[next];
            }
            step >>= 1;
        }
        pos
    }
}

/// Samples `PA_t(1, δ)`.
pub fn generate_pa1(t: usize, delta: f64, seed: u64) -> Result<PaGraph> {
    if t == 0 {
        return Err(Error::param("t must be at least 1"));
    }
    if t > u32::MAX as usize {
        return Err(Error::param("t exceeds the supported graph size"));
    }
    let params = PaParams::new(1, delta)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let edges = grow_single(t, delta, &mut rng)
        .into_iter()
        .enumerate()
        .map(|(u, w)| (u as u32, w))
        .collect();
    Ok(PaGraph::assemble(t, params, seed, edges))
}

/// Merges consecutive blocks of `m` vertices of an `m = 1` graph into single
/// vertices. The result has offset `m` times the input's offset.
pub fn contract(g: &PaGraph, m: usize) -> Result<PaGraph> {
    if g.m() != 1 {
        return Err(Error::param(format!("can only contract m = 1 graphs, got m = {}", g.m())));
    }
    if m == 0 || !g.t().is_multiple_of(m) {
        return Err(Error::param(format!(
            "vertex count {} is not divisible by m = {m}",
            g.t()
        )));
    }
    let params = PaParams::new(m, g.params().delta() * m as f64)?;
    let m32 = m as u32;
    let edges = g.edges().iter().map(|&(c, w)| (c / m32, w / m32)).collect();
    Ok(PaGraph::assemble(g.t() / m, params, g.seed(), edges))
}

/// Samples `PA_t(m, δ)` as the contraction of `PA_{mt}(1, δ/m)`.
pub fn generate_pa(t: usize, m: usize, delta: f64, seed: u64) -> Result<PaGraph> {
    if t == 0 {
        return Err(Error::param("t must be at least 1"));
    }
    let params = PaParams::new(m, delta)?;
    let n = t
        .checked_mul(m)
        .filter(|&n| n <= u32::MAX as usize)
        .ok_or_else(|| Error::param("m*t exceeds the supported graph size"))?;
    let single = generate_pa1(n, delta / m as f64, seed)?;
    let mut g = contract(&single, m)?;
    // keep the caller's δ exactly rather than (δ/m)*m
    g.params = params;
    Ok(g)
}

/// Samples `D_v(t)` through the two-colour urn seen by vertex `v` once its
/// own `m` edges are in place.
///
/// Red balls are the `a` endpoints at `v`, black balls the remaining
/// `2m(v+1) - a` endpoints. Each later edge of the underlying `m = 1`
/// process is one draw: red has weight `R + δ`, the total weight is
/// `s(2+δ/m) + (1+δ/m)` when `s` single-edge vertices are present. A red
/// draw adds one red and one black ball (the newcomer's endpoint), a black
/// draw adds two black balls. There are exactly `m(t - v - 1)` draws, the
/// same number of edge arrivals as in direct generation.
pub fn degree_evolution_urn(v: usize, a: u64, t: usize, params: PaParams, seed: u64) -> Result<u64> {
    let m = params.m();
    if a < m as u64 || a > 2 * m as u64 {
        return Err(Error::param(format!("initial degree {a} outside [{m}, {}]", 2 * m)));
    }
    if v >= t {
        return Err(Error::param(format!("vertex {v} does not exist in a graph of size {t}")));
    }
    let delta = params.delta();
    let delta_single = delta / m as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut red = a;
    let first = m * (v + 1);
    for s in first..m * t {
        let sf = s as f64;
        let z = sf * (2.0 + delta_single) + (1.0 + delta_single);
        if rng.random::<f64>() * z < red as f64 + delta {
            red += 1;
        }
    }
    Ok(red)
}
