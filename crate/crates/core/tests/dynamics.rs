use pamaj::dynamics::{
    init_colours, poll_size, run, run_from, sample_poll, step, voter_step, Colour, ColourState, Protocol,
    ProtocolConfig,
};
use pamaj::pa_graph::generate_pa;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn initial_red_count_concentrates() {
    let t = 100_000;
    for alpha in [0.05, 0.3, 0.5] {
        let sd = (t as f64 * alpha * (1.0 - alpha)).sqrt();
        for seed in 0..5 {
            let red = init_colours(t, alpha, seed).unwrap().red_count() as f64;
            assert!((red - alpha * t as f64).abs() < 5.0 * sd, "alpha {alpha} seed {seed}: {red}");
        }
    }
}

#[test]
fn voter_preserves_degree_weighted_red_mass_in_expectation() {
    let g = generate_pa(2000, 3, 0.0, 5).unwrap();
    let start = init_colours(g.t(), 0.4, 6).unwrap();
    let mass = |s: &ColourState| -> f64 {
        (0..g.t()).map(|v| (g.degree(v) * s.bits()[v] as usize) as f64).sum()
    };
    let m0 = mass(&start);
    let runs = 400;
    let samples: Vec<f64> = (0..runs).map(|seed| mass(&voter_step(&g, &start, seed))).collect();
    let mean = samples.iter().sum::<f64>() / runs as f64;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (runs - 1) as f64;
    let se = (var / runs as f64).sqrt();
    assert!((mean - m0).abs() < 5.0 * se, "{mean} vs {m0} (se {se})");
}

#[test]
fn more_initial_red_means_more_red_after_a_step() {
    let g = generate_pa(20_000, 5, 0.0, 1).unwrap();
    let mut last = 0.0;
    for alpha in [0.1, 0.3, 0.5, 0.7, 0.9] {
        let mean: f64 = (0..5)
            .map(|seed| {
                let s = init_colours(g.t(), alpha, seed).unwrap();
                step(&g, &s, 5, 100 + seed).red_count() as f64
            })
            .sum::<f64>()
            / 5.0;
        assert!(mean > last, "alpha {alpha}: {mean} <= {last}");
        last = mean;
    }
}

#[test]
fn flipping_initial_colours_mirrors_the_trace() {
    let g = generate_pa(5000, 5, 0.0, 2).unwrap();
    let config = ProtocolConfig::new(7, 0.3, 9, 30).unwrap();
    let start = init_colours(g.t(), 0.3, 9).unwrap();
    for protocol in [Protocol::Mpk, Protocol::Voter] {
        let a = run_from(&g, start.clone(), &config, protocol);
        let b = run_from(&g, start.flipped(), &config, protocol);
        assert_eq!(a.steps_run, b.steps_run);
        for (ra, rb) in a.red_counts.iter().zip(&b.red_counts) {
            assert_eq!(ra + rb, g.t());
        }
        assert_eq!(a.winner.map(|c| c == Colour::Red), b.winner.map(|c| c == Colour::Blue));
    }
}

#[test]
fn runs_do_not_depend_on_thread_count() {
    let g = generate_pa(30_000, 5, 0.0, 3).unwrap();
    let config = ProtocolConfig::new(5, 0.2, 4, 50).unwrap();
    let reference = run(&g, &config);
    for threads in [1, 3] {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        assert_eq!(pool.install(|| run(&g, &config)), reference);
    }
}

#[test]
fn consensus_is_absorbing() {
    let g = generate_pa(1000, 5, 0.0, 3).unwrap();
    for alpha in [0.0, 1.0] {
        let s = init_colours(g.t(), alpha, 0).unwrap();
        let colour = s.consensus().unwrap();
        let mut cur = s;
        for seed in 0..3 {
            cur = step(&g, &cur, 5, seed);
            assert_eq!(cur.consensus(), Some(colour));
            cur = voter_step(&g, &cur, seed);
            assert_eq!(cur.consensus(), Some(colour));
        }
    }
    let trace = run(&g, &ProtocolConfig::new(5, 0.0, 0, 10).unwrap());
    assert_eq!(trace.consensus_step, Some(0));
    assert_eq!(trace.steps_run, 0);
    assert_eq!(trace.red_counts, vec![0]);
}

#[test]
fn step_cap_is_respected() {
    let g = generate_pa(3000, 5, 0.0, 8).unwrap();
    let trace = run(&g, &ProtocolConfig::new(5, 0.5, 1, 1).unwrap());
    assert_eq!(trace.steps_run, 1);
    assert_eq!(trace.red_counts.len(), 2);
}

proptest! {
    #[test]
    fn polls_are_odd_and_draw_from_slots(t in 2usize..80, m in 1usize..8, seed: u64, k in prop::sample::select(vec![5usize, 7, 9])) {
        let g = generate_pa(t, m, 0.0, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for v in 0..t {
            let slots = g.slots(v);
            let poll = sample_poll(&g, v, k, &mut rng);
            prop_assert_eq!(poll.len(), poll_size(slots.len(), k));
            prop_assert!(poll.len() % 2 == 1);
            prop_assert!(poll.len() <= k);
            for w in &poll {
                let polled = poll.iter().filter(|x| *x == w).count();
                let available = slots.iter().filter(|x| *x == w).count();
                prop_assert!(polled <= available);
            }
        }
    }
}
