//! Local structure around light vertices.
//!
//! Vertices with index below `kappa` form the inner core and are called
//! heavy; all others are light. Vertices below `kappa_o` form the outer
//! core. The scans here look at the radius-`r` ball of a light root: how
//! many independent cycles its light part carries, how many of the root's
//! edges start short paths into the inner core, and which shape the
//! truncated ball (core edges cut, root component kept, core edges to that
//! component restored) takes.
//!
//! Distances ignore edge multiplicity; cycle counts do not, so a self-loop
//! or a pair of parallel edges is a cycle.

use std::collections::{HashMap, HashSet, VecDeque};

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pa_graph::PaGraph;

/// Core cutoffs and path radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructureParams {
    pub omega: usize,
    pub kappa: usize,
    pub kappa_o: usize,
    pub gamma: f64,
}

impl StructureParams {
    pub fn new(t: usize, omega: usize, kappa: usize, kappa_o: usize, gamma: f64) -> Result<Self> {
        if omega == 0 {
            return Err(Error::param("omega must be at least 1"));
        }
        if kappa > kappa_o || kappa_o > t {
            return Err(Error::param(format!(
                "need kappa <= kappa_o <= t, got {kappa}, {kappa_o}, {t}"
            )));
        }
        Ok(StructureParams {
            omega,
            kappa,
            kappa_o,
            gamma,
        })
    }

    /// `κ = ⌈t^0.3⌉`, `κ_o = ⌈t^0.5⌉`, `ω = 3`, `γ` from the graph.
    pub fn desk_defaults(g: &PaGraph) -> Self {
        let t = g.t() as f64;
        StructureParams {
            omega: 3,
            kappa: t.powf(0.3).ceil() as usize,
            kappa_o: t.powf(0.5).ceil() as usize,
            gamma: g.params().gamma(),
        }
    }

    pub fn is_heavy(&self, v: usize) -> bool {
        v < self.kappa
    }

    fn check_light(&self, g: &PaGraph, v: usize) -> Result<()> {
        if v >= g.t() {
            return Err(Error::param(format!("vertex {v} not in graph of size {}", g.t())));
        }
        if self.is_heavy(v) {
            return Err(Error::param(format!("root {v} is heavy (kappa = {})", self.kappa)));
        }
        Ok(())
    }
}

/// Vertices within distance `radius` of `root` and every edge between them.
#[derive(Debug, Clone)]
pub struct Ball {
    pub root: usize,
    pub radius: usize,
    /// Breadth-first order, root first.
    pub vertices: Vec<u32>,
    pub distance: HashMap<u32, usize>,
    /// `(u, w)` with `u <= w`, one entry per edge.
    pub edges: Vec<(u32, u32)>,
}

impl Ball {
    pub fn contains(&self, v: u32) -> bool {
        self.distance.contains_key(&v)
    }
}

pub fn ball(g: &PaGraph, root: usize, radius: usize) -> Ball {
    let mut distance = HashMap::new();
    let mut vertices = vec![root as u32];
    distance.insert(root as u32, 0);
    let mut head = 0;
    while head < vertices.len() {
        let u = vertices[head];
        head += 1;
        let du = distance[&u];
        if du == radius {
            continue;
        }
        for &w in g.slots(u as usize) {
            if let std::collections::hash_map::Entry::Vacant(e) = distance.entry(w) {
                e.insert(du + 1);
                vertices.push(w);
            }
        }
    }
    let mut edges = Vec::new();
    for &u in &vertices {
        let mut loop_slots = 0;
        for &w in g.slots(u as usize) {
            if w == u {
                loop_slots += 1;
                if loop_slots % 2 == 0 {
                    edges.push((u, u));
                }
            } else if u < w && distance.contains_key(&w) {
                edges.push((u, w));
            }
        }
    }
    Ball {
        root,
        radius,
        vertices,
        distance,
        edges,
    }
}

/// Shapes a truncated ball can take. Checked in declaration order, so the
/// first matching category wins; the first two require an acyclic ball,
/// the next two a single light cycle with the root on it or off it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Category {
    /// A tree without heavy vertices.
    TreeAllLight,
    /// Acyclic with one or two heavy vertices.
    #[serde(rename = "acyclic-with-1-or-2-heavy")]
    AcyclicFewHeavy,
    /// The root lies on the only (short) light cycle and reaches heavy
    /// vertices only through cycle edges.
    RootOnLightCycle,
    /// The only (short) light cycle hangs off the root via a short path
    /// `P`, and at most one root edge off `P` leads to a heavy vertex.
    LightCycleViaPath,
    Other,
}

impl Category {
    pub const ALL: [Category; 5] = [
        Category::TreeAllLight,
        Category::AcyclicFewHeavy,
        Category::RootOnLightCycle,
        Category::LightCycleViaPath,
        Category::Other,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Category::TreeAllLight => "tree-all-light",
            Category::AcyclicFewHeavy => "acyclic-with-1-or-2-heavy",
            Category::RootOnLightCycle => "root-on-light-cycle",
            Category::LightCycleViaPath => "light-cycle-via-path",
            Category::Other => "other",
        }
    }
}

/// The truncated ball of a light root and its classification.
#[derive(Debug, Clone)]
pub struct TruncatedBall {
    pub root: usize,
    pub radius: usize,
    /// Light vertices of the root's component, then the restored heavy ones.
    pub vertices: Vec<u32>,
    pub heavy: Vec<u32>,
    /// Light component edges followed by restored core edges `(heavy, light)`.
    pub edges: Vec<(u32, u32)>,
    pub light_cycles: usize,
    /// Root edges (by slot) that start a path to a heavy vertex inside the
    /// truncated ball.
    pub root_core_edges: usize,
    pub category: Category,
}

pub fn truncated_ball(g: &PaGraph, root: usize, radius: usize, params: &StructureParams) -> Result<TruncatedBall> {
    params.check_light(g, root)?;
    let b = ball(g, root, radius);
    let heavy = |v: u32| params.is_heavy(v as usize);

    let mut light_adj: HashMap<u32, Vec<u32>> = HashMap::new();
    for &(u, w) in &b.edges {
        if !heavy(u) && !heavy(w) {
            light_adj.entry(u).or_default().push(w);
            if u != w {
                light_adj.entry(w).or_default().push(u);
            }
        }
    }
    let component = reachable(root as u32, &light_adj, |_| true);

    let mut light_edges = Vec::new();
    let mut core_edges = Vec::new();
    for &(u, w) in &b.edges {
        match (heavy(u), heavy(w)) {
            (false, false) if component.contains(&u) => light_edges.push((u, w)),
            (true, false) if component.contains(&w) => core_edges.push((u, w)),
            (false, true) if component.contains(&u) => core_edges.push((w, u)),
            _ => {}
        }
    }
    let mut heavy_vertices: Vec<u32> = core_edges.iter().map(|&(h, _)| h).collect();
    heavy_vertices.sort_unstable();
    heavy_vertices.dedup();

    let mut vertices: Vec<u32> = b.vertices.iter().copied().filter(|v| component.contains(v)).collect();
    vertices.extend(&heavy_vertices);

    let light_cycles = light_edges.len() + 1 - component.len();
    let total_cycles = light_edges.len() + core_edges.len() + 1 - vertices.len();

    // light vertices with a restored edge to the core
    let touches_core: HashSet<u32> = core_edges.iter().map(|&(_, l)| l).collect();
    let root32 = root as u32;
    let mut leads_to_core: HashMap<u32, bool> = HashMap::new();
    let mut core_edge_targets = Vec::new();
    for &(u, w) in light_edges.iter().chain(core_edges.iter()) {
        let other = if u == root32 && w != root32 {
            w
        } else if w == root32 && u != root32 {
            u
        } else {
            continue;
        };
        let hit = heavy(other)
            || *leads_to_core.entry(other).or_insert_with(|| {
                reachable(other, &light_adj, |x| x != root32)
                    .iter()
                    .any(|x| touches_core.contains(x))
            });
        if hit {
            core_edge_targets.push(other);
        }
    }
    let root_core_edges = core_edge_targets.len();

    let category = if total_cycles == 0 && heavy_vertices.is_empty() {
        Category::TreeAllLight
    } else if total_cycles == 0 && heavy_vertices.len() <= 2 {
        Category::AcyclicFewHeavy
    } else if light_cycles == 1 {
        classify_unicyclic(
            root32,
            radius,
            &light_adj,
            &component,
            &core_edge_targets,
        )
    } else {
        Category::Other
    };

    Ok(TruncatedBall {
        root,
        radius,
        vertices,
        heavy: heavy_vertices,
        edges: light_edges.into_iter().chain(core_edges).collect(),
        light_cycles,
        root_core_edges,
        category,
    })
}

fn classify_unicyclic(
    root: u32,
    radius: usize,
    light_adj: &HashMap<u32, Vec<u32>>,
    component: &HashSet<u32>,
    core_edge_targets: &[u32],
) -> Category {
    let cycle = two_core(light_adj, component);
    if cycle.len() > 2 * radius + 1 {
        return Category::Other;
    }
    if cycle.contains(&root) {
        // every root edge into the core must be a cycle edge
        if core_edge_targets.iter().all(|w| cycle.contains(w)) {
            Category::RootOnLightCycle
        } else {
            Category::Other
        }
    } else {
        let Some(path) = path_to_set(root, light_adj, &cycle) else {
            return Category::Other;
        };
        if path.len() - 1 > radius {
            return Category::Other;
        }
        let first_hop = path[1];
        let mut skipped_path_edge = false;
        let off_path = core_edge_targets
            .iter()
            .filter(|&&w| {
                if w == first_hop && !skipped_path_edge {
                    skipped_path_edge = true;
                    false
                } else {
                    true
                }
            })
            .count();
        if off_path <= 1 {
            Category::LightCycleViaPath
        } else {
            Category::Other
        }
    }
}

/// Vertices reachable from `start` through vertices accepted by `allow`.
fn reachable(start: u32, adj: &HashMap<u32, Vec<u32>>, allow: impl Fn(u32) -> bool) -> HashSet<u32> {
    let mut seen = HashSet::from([start]);
    let mut queue = VecDeque::from([start]);
    while let Some(u) = queue.pop_front() {
        for &w in adj.get(&u).map(Vec::as_slice).unwrap_or(&[]) {
            if allow(w) && seen.insert(w) {
                queue.push_back(w);
            }
        }
    }
    seen
}

/// Vertices left after repeatedly stripping degree-1 vertices; for a
/// unicyclic component this is exactly the cycle.
fn two_core(adj: &HashMap<u32, Vec<u32>>, component: &HashSet<u32>) -> HashSet<u32> {
    let mut degree: HashMap<u32, usize> = component
        .iter()
        .map(|&v| {
            let d = adj
                .get(&v)
                .map(|ns| ns.iter().map(|&w| if w == v { 2 } else { 1 }).sum())
                .unwrap_or(0);
            (v, d)
        })
        .collect();
    let mut alive: HashSet<u32> = component.clone();
    let mut queue: VecDeque<u32> = degree.iter().filter(|(_, &d)| d <= 1).map(|(&v, _)| v).collect();
    while let Some(v) = queue.pop_front() {
        if !alive.remove(&v) {
            continue;
        }
        for &w in adj.get(&v).map(Vec::as_slice).unwrap_or(&[]) {
            if w != v && alive.contains(&w) {
                let d = degree.get_mut(&w).unwrap();
                *d -= 1;
                if *d == 1 {
                    queue.push_back(w);
                }
            }
        }
    }
    alive
}

/// Shortest path from `start` to any vertex of `targets`, inclusive.
fn path_to_set(start: u32, adj: &HashMap<u32, Vec<u32>>, targets: &HashSet<u32>) -> Option<Vec<u32>> {
    let mut parent: HashMap<u32, u32> = HashMap::from([(start, start)]);
    let mut queue = VecDeque::from([start]);
    while let Some(u) = queue.pop_front() {
        if targets.contains(&u) {
            let mut path = vec![u];
            let mut cur = u;
            while cur != start {
                cur = parent[&cur];
                path.push(cur);
            }
            path.reverse();
            return Some(path);
        }
        for &w in adj.get(&u).map(Vec::as_slice).unwrap_or(&[]) {
            if let std::collections::hash_map::Entry::Vacant(e) = parent.entry(w) {
                e.insert(u);
                queue.push_back(w);
            }
        }
    }
    None
}

/// Cyclomatic number of the light part of `ball(root, radius)`; loops and
/// parallel edges each add a cycle.
pub fn light_cycle_census(g: &PaGraph, root: usize, radius: usize, params: &StructureParams) -> Result<usize> {
    params.check_light(g, root)?;
    let b = ball(g, root, radius);
    let mut forest = DisjointSets::default();
    let mut cycles = 0;
    for &(u, w) in &b.edges {
        if params.is_heavy(u as usize) || params.is_heavy(w as usize) {
            continue;
        }
        if !forest.union(u, w) {
            cycles += 1;
        }
    }
    Ok(cycles)
}

#[derive(Default)]
struct DisjointSets {
    parent: HashMap<u32, u32>,
}

impl DisjointSets {
    fn find(&mut self, v: u32) -> u32 {
        let p = *self.parent.entry(v).or_insert(v);
        if p == v {
            return v;
        }
        let root = self.find(p);
        self.parent.insert(v, root);
        root
    }

    /// Merges the sets of `a` and `b`; false if they were already joined.
    fn union(&mut self, a: u32, b: u32) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent.insert(ra, rb);
        true
    }
}

/// Number of edges at `v` (counted per edge, loops excluded) that begin a
/// path of length at most `max_len` ending in the inner core.
pub fn short_paths_into_core(g: &PaGraph, v: usize, max_len: usize, params: &StructureParams) -> Result<usize> {
    params.check_light(g, v)?;
    if max_len == 0 {
        return Ok(0);
    }
    let mut memo: HashMap<u32, bool> = HashMap::new();
    let mut count = 0;
    for &w in g.slots(v) {
        if w as usize == v {
            continue;
        }
        let hit = *memo
            .entry(w)
            .or_insert_with(|| core_within(g, w as usize, v, max_len - 1, params));
        count += usize::from(hit);
    }
    Ok(count)
}

/// Whether some heavy vertex lies within `budget` steps of `start` in the
/// graph with `avoid` removed. Only light vertices are expanded.
fn core_within(g: &PaGraph, start: usize, avoid: usize, budget: usize, params: &StructureParams) -> bool {
    if params.is_heavy(start) {
        return true;
    }
    let mut seen = HashSet::from([start as u32, avoid as u32]);
    let mut frontier = vec![start as u32];
    for _ in 0..budget {
        let mut next = Vec::new();
        for &u in &frontier {
            for &w in g.slots(u as usize) {
                if params.is_heavy(w as usize) && w as usize != avoid {
                    return true;
                }
                if seen.insert(w) {
                    next.push(w);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    false
}

/// Outer-core vertices whose degree is below `(t/κ_o)^γ / κ_o²`.
pub fn outer_core_degree_check(g: &PaGraph, params: &StructureParams) -> Vec<usize> {
    let threshold = outer_core_degree_threshold(g.t(), params);
    (0..params.kappa_o.min(g.t()))
        .filter(|&i| (g.degree(i) as f64) < threshold)
        .collect()
}

pub fn outer_core_degree_threshold(t: usize, params: &StructureParams) -> f64 {
    let ko = params.kappa_o as f64;
    (t as f64 / ko).powf(params.gamma) / (ko * ko)
}

/// `samples` distinct light roots drawn uniformly (all of them if fewer).
pub fn sample_light_roots(g: &PaGraph, params: &StructureParams, samples: usize, seed: u64) -> Vec<usize> {
    let light = g.t().saturating_sub(params.kappa);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut roots: Vec<usize> = index::sample(&mut rng, light, samples.min(light))
        .into_iter()
        .map(|i| params.kappa + i)
        .collect();
    roots.sort_unstable();
    roots
}

/// Per-root outcome of a structure scan.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RootReport {
    pub root: usize,
    pub category: Category,
    pub light_cycles: usize,
    pub core_edges: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanSummary {
    pub roots: usize,
    pub outer_roots: usize,
    /// Share of roots whose ball has two or more light cycles.
    pub multi_cycle_fraction: f64,
    /// Share of roots beyond the outer core with three or more core edges.
    pub core_edge_fraction: f64,
    /// Share of roots whose truncated ball fits no category.
    pub other_fraction: f64,
    pub category_counts: Vec<(Category, usize)>,
}

/// Scans sampled light roots: ball radius `ball_radius` for cycles and
/// truncated balls, path length `params.omega` for core edges.
pub fn scan(
    g: &PaGraph,
    params: &StructureParams,
    ball_radius: usize,
    samples: usize,
    seed: u64,
) -> Result<(Vec<RootReport>, ScanSummary)> {
    let roots = sample_light_roots(g, params, samples, seed);
    let reports = roots
        .par_iter()
        .map(|&root| {
            let tb = truncated_ball(g, root, ball_radius, params)?;
            Ok(RootReport {
                root,
                category: tb.category,
                light_cycles: light_cycle_census(g, root, ball_radius, params)?,
                core_edges: short_paths_into_core(g, root, params.omega, params)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let summary = summarize(&reports, params);
    Ok((reports, summary))
}

pub fn summarize(reports: &[RootReport], params: &StructureParams) -> ScanSummary {
    let n = reports.len();
    let frac = |count: usize, of: usize| if of == 0 { 0.0 } else { count as f64 / of as f64 };
    let outer: Vec<&RootReport> = reports.iter().filter(|r| r.root >= params.kappa_o).collect();
    let category_counts = Category::ALL
        .iter()
        .map(|&c| (c, reports.iter().filter(|r| r.category == c).count()))
        .collect();
    ScanSummary {
        roots: n,
        outer_roots: outer.len(),
        multi_cycle_fraction: frac(reports.iter().filter(|r| r.light_cycles >= 2).count(), n),
        core_edge_fraction: frac(outer.iter().filter(|r| r.core_edges >= 3).count(), outer.len()),
        other_fraction: frac(reports.iter().filter(|r| r.category == Category::Other).count(), n),
        category_counts,
    }
}
