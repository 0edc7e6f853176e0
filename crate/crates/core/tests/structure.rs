use std::collections::{HashMap, HashSet};

use pamaj::pa_graph::{generate_pa, PaGraph};
use pamaj::structure::{ball, light_cycle_census, scan, short_paths_into_core, truncated_ball, StructureParams};
use proptest::prelude::*;

/// Distances up to `radius` by repeated relaxation over the edge list.
fn distances(g: &PaGraph, root: usize, radius: usize) -> HashMap<u32, usize> {
    let mut dist = HashMap::from([(root as u32, 0usize)]);
    for r in 0..radius {
        let frontier: Vec<u32> = dist.iter().filter(|(_, &d)| d == r).map(|(&v, _)| v).collect();
        for &(u, w) in g.edges() {
            for (a, b) in [(u, w), (w, u)] {
                if frontier.contains(&a) {
                    dist.entry(b).or_insert(r + 1);
                }
            }
        }
    }
    dist
}

/// `E - V + C` of the light part of the ball, with components counted by
/// depth-first search.
fn cyclomatic_oracle(g: &PaGraph, root: usize, radius: usize, kappa: usize) -> usize {
    let dist = distances(g, root, radius);
    let light: HashSet<u32> = dist.keys().copied().filter(|&v| v as usize >= kappa).collect();
    let edges: Vec<(u32, u32)> = g
        .edges()
        .iter()
        .copied()
        .filter(|(u, w)| light.contains(u) && light.contains(w))
        .collect();
    let mut seen = HashSet::new();
    let mut components = 0;
    for &start in &light {
        if !seen.insert(start) {
            continue;
        }
        components += 1;
        let mut stack = vec![start];
        while let Some(u) = stack.pop() {
            for &(a, b) in &edges {
                for (x, y) in [(a, b), (b, a)] {
                    if x == u && seen.insert(y) {
                        stack.push(y);
                    }
                }
            }
        }
    }
    edges.len() + components - light.len()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn ball_matches_relaxation(t in 1usize..120, m in 1usize..4, seed: u64, root_frac in 0.0f64..1.0, radius in 0usize..4) {
        let g = generate_pa(t, m, 0.0, seed).unwrap();
        let root = ((t as f64 * root_frac) as usize).min(t - 1);
        let b = ball(&g, root, radius);
        let dist = distances(&g, root, radius);
        prop_assert_eq!(b.distance.len(), dist.len());
        for (v, d) in &dist {
            prop_assert_eq!(b.distance.get(v), Some(d));
        }
        let inside = g.edges().iter().filter(|(u, w)| dist.contains_key(u) && dist.contains_key(w)).count();
        prop_assert_eq!(b.edges.len(), inside);
    }

    #[test]
    fn census_matches_cyclomatic_oracle(t in 5usize..150, m in 1usize..4, seed: u64, root_frac in 0.0f64..1.0, radius in 0usize..4) {
        let g = generate_pa(t, m, 0.0, seed).unwrap();
        let kappa = 3;
        let params = StructureParams::new(t, 2, kappa, kappa, g.params().gamma()).unwrap();
        let root = (kappa + ((t - kappa) as f64 * root_frac) as usize).min(t - 1);
        prop_assert_eq!(
            light_cycle_census(&g, root, radius, &params).unwrap(),
            cyclomatic_oracle(&g, root, radius, kappa)
        );
    }

    #[test]
    fn truncated_ball_is_a_subgraph_with_light_interior(t in 5usize..150, m in 1usize..4, seed: u64, root_frac in 0.0f64..1.0, radius in 0usize..4) {
        let g = generate_pa(t, m, 0.0, seed).unwrap();
        let kappa = 4;
        let params = StructureParams::new(t, 2, kappa, kappa, g.params().gamma()).unwrap();
        let root = (kappa + ((t - kappa) as f64 * root_frac) as usize).min(t - 1);
        let b = ball(&g, root, radius);
        let tb = truncated_ball(&g, root, radius, &params).unwrap();
        let light: HashSet<u32> = tb.vertices.iter().copied().filter(|&v| v as usize >= kappa).collect();
        prop_assert!(light.contains(&(root as u32)));
        for &v in &tb.vertices {
            prop_assert!(b.contains(v));
        }
        for &h in &tb.heavy {
            prop_assert!((h as usize) < kappa);
        }
        let mut pool: HashMap<(u32, u32), usize> = HashMap::new();
        for &(u, w) in &b.edges {
            *pool.entry((u.min(w), u.max(w))).or_default() += 1;
        }
        for &(u, w) in &tb.edges {
            let slot = pool.entry((u.min(w), u.max(w))).or_default();
            prop_assert!(*slot > 0, "edge ({}, {}) not in the ball", u, w);
            *slot -= 1;
            let (hu, hw) = ((u as usize) < kappa, (w as usize) < kappa);
            prop_assert!(!(hu && hw), "heavy-heavy edge ({}, {})", u, w);
            if hu {
                prop_assert!(light.contains(&w));
            }
            if hw {
                prop_assert!(light.contains(&u));
            }
        }
    }
}

#[test]
fn light_roots_far_from_core_have_no_core_paths() {
    // A path 0 - 1 - ... - 9 with vertex 0 heavy.
    let mut edges = vec![(0u32, 0u32)];
    edges.extend((1..10u32).map(|v| (v, v - 1)));
    let g = PaGraph::from_edges(10, pamaj::PaParams::new(1, 0.0).unwrap(), 0, edges).unwrap();
    let params = StructureParams::new(10, 3, 1, 1, 0.5).unwrap();
    assert_eq!(short_paths_into_core(&g, 9, 3, &params).unwrap(), 0);
    assert_eq!(short_paths_into_core(&g, 3, 3, &params).unwrap(), 1);
    assert_eq!(short_paths_into_core(&g, 4, 3, &params).unwrap(), 0);
    assert!(short_paths_into_core(&g, 0, 3, &params).is_err());
}

#[test]
fn scan_is_reproducible() {
    let g = generate_pa(5000, 3, 0.0, 12).unwrap();
    let params = StructureParams::desk_defaults(&g);
    let a = scan(&g, &params, 2, 200, 1).unwrap();
    let b = scan(&g, &params, 2, 200, 1).unwrap();
    assert_eq!(a.0, b.0);
    assert_eq!(a.1, b.1);
    assert_eq!(a.1.roots, 200);
    let total: usize = a.1.category_counts.iter().map(|(_, n)| n).sum();
    assert_eq!(total, 200);
    assert!(a.0.iter().all(|r| r.root >= params.kappa));
}
