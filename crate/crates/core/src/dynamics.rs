//! Synchronous two-colour opinion dynamics on a [`PaGraph`].
//!
//! Under the k-choice majority protocol every vertex polls an odd number of
//! its incident edge-endpoint slots (parallel edges count once per edge, a
//! self-loop counts twice and points back at the vertex) and adopts the
//! strict majority colour of the previous step. With at least `k` slots it
//! polls `k` of them without replacement; otherwise it polls all of them,
//! or all but one uniformly dropped slot when the count is even.
//!
//! Every vertex draws from its own ChaCha8 stream, keyed by the run seed,
//! the step number and the vertex index, so a step can be evaluated in
//! parallel and still produce the same colours on every run.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pa_graph::PaGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Colour {
    Blue,
    Red,
}

impl Colour {
    fn from_bit(bit: u8) -> Self {
        if bit == 0 {
            Colour::Blue
        } else {
            Colour::Red
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    /// k-choice local majority.
    Mpk,
    /// Copy one uniformly chosen slot.
    Voter,
}

/// Colours at one step, stored as bits (red = 1, blue = 0).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColourState {
    colours: Vec<u8>,
    step: usize,
}

impl ColourState {
    pub fn from_bits(colours: Vec<u8>, step: usize) -> Self {
        assert!(colours.iter().all(|&b| b <= 1), "colours must be 0 or 1");
        ColourState { colours, step }
    }

    pub fn len(&self) -> usize {
        self.colours.len()
    }

    pub fn is_empty(&self) -> bool {
        self.colours.is_empty()
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn bits(&self) -> &[u8] {
        &self.colours
    }

    pub fn colour(&self, v: usize) -> Colour {
        Colour::from_bit(self.colours[v])
    }

    pub fn red_count(&self) -> usize {
        self.colours.iter().map(|&b| b as usize).sum()
    }

    /// The common colour if every vertex agrees.
    pub fn consensus(&self) -> Option<Colour> {
        match self.red_count() {
            0 => Some(Colour::Blue),
            r if r == self.colours.len() => Some(Colour::Red),
            _ => None,
        }
    }

    /// Swaps red and blue everywhere.
    pub fn flipped(&self) -> Self {
        ColourState {
            colours: self.colours.iter().map(|&b| 1 - b).collect(),
            step: self.step,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub k: usize,
    pub alpha: f64,
    pub seed: u64,
    pub max_steps: usize,
}

impl ProtocolConfig {
    pub fn new(k: usize, alpha: f64, seed: u64, max_steps: usize) -> Result<Self> {
        if k < 5 || k.is_multiple_of(2) {
            return Err(Error::param(format!("k must be odd and at least 5, got {k}")));
        }
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::param(format!("alpha {alpha} outside [0, 1]")));
        }
        if max_steps == 0 {
            return Err(Error::param("max_steps must be positive"));
        }
        Ok(ProtocolConfig {
            k,
            alpha,
            seed,
            max_steps,
        })
    }
}

/// Red counts per step plus the consensus outcome, if any.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    /// `red_counts[τ]` for `τ = 0..=steps_run`.
    pub red_counts: Vec<usize>,
    pub consensus_step: Option<usize>,
    pub winner: Option<Colour>,
    pub steps_run: usize,
}

/// Colours at step 0: each vertex red independently with probability
/// `alpha`, drawn sequentially from `ChaCha8Rng::seed_from_u64(seed)`.
pub fn init_colours(t: usize, alpha: f64, seed: u64) -> Result<ColourState> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::param(format!("alpha {alpha} outside [0, 1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let colours = (0..t).map(|_| u8::from(rng.random::<f64>() < alpha)).collect();
    Ok(ColourState { colours, step: 0 })
}

/// Number of slots polled by a vertex of degree `degree`: always odd.
pub fn poll_size(degree: usize, k: usize) -> usize {
    if degree >= k {
        k
    } else if degree % 2 == 1 {
        degree
    } else {
        degree - 1
    }
}

/// Draws the polled slots of `v` and returns the neighbours they point at,
/// with multiplicity.
pub fn sample_poll<R: Rng + ?Sized>(g: &PaGraph, v: usize, k: usize, rng: &mut R) -> Vec<u32> {
    let mut out = Vec::with_capacity(k);
    for_each_polled(g.slots(v), k, rng, |w| out.push(w));
    out
}

fn for_each_polled<R: Rng + ?Sized>(slots: &[u32], k: usize, rng: &mut R, mut visit: impl FnMut(u32)) {
    let degree = slots.len();
    assert!(degree > 0, "isolated vertex cannot poll");
    let size = poll_size(degree, k);
    if size == degree {
        slots.iter().copied().for_each(visit);
    } else if size + 1 == degree && degree < k {
        let dropped = rng.random_range(0..degree);
        for (i, &w) in slots.iter().enumerate() {
            if i != dropped {
                visit(w);
            }
        }
    } else {
        for i in index::sample(rng, degree, size) {
            visit(slots[i]);
        }
    }
}

/// Key shared by every per-vertex stream of a run.
fn stream_key(seed: u64) -> [u8; 32] {
    ChaCha8Rng::seed_from_u64(seed).get_seed()
}

/// Stream for vertex `v` at step `step`; steps start at 1 so the stream
/// used by [`init_colours`] is never reused.
fn vertex_rng(key: [u8; 32], step: usize, v: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(((step as u64) << 32) | v as u64);
    rng
}

fn check_len(g: &PaGraph, state: &ColourState) {
    assert_eq!(state.len(), g.t(), "colour vector does not match graph size");
}

/// One synchronous majority step. Reads only `state`, writes a fresh
/// vector for step `state.step() + 1`.
pub fn step(g: &PaGraph, state: &ColourState, k: usize, seed: u64) -> ColourState {
    check_len(g, state);
    let key = stream_key(seed);
    let next_step = state.step + 1;
    let prev = &state.colours;
    let colours = (0..g.t())
        .into_par_iter()
        .with_min_len(1024)
        .map(|v| {
            let mut rng = vertex_rng(key, next_step, v);
            let (mut red, mut polled) = (0usize, 0usize);
            for_each_polled(g.slots(v), k, &mut rng, |w| {
                red += prev[w as usize] as usize;
                polled += 1;
            });
            debug_assert!(polled % 2 == 1, "even poll at vertex {v}");
            u8::from(2 * red > polled)
        })
        .collect();
    ColourState {
        colours,
        step: next_step,
    }
}

/// One synchronous voter step: every vertex copies one uniform slot.
pub fn voter_step(g: &PaGraph, state: &ColourState, seed: u64) -> ColourState {
    check_len(g, state);
    let key = stream_key(seed);
    let next_step = state.step + 1;
    let prev = &state.colours;
    let colours = (0..g.t())
        .into_par_iter()
        .with_min_len(1024)
        .map(|v| {
            let mut rng = vertex_rng(key, next_step, v);
            let slots = g.slots(v);
            prev[slots[rng.random_range(0..slots.len())] as usize]
        })
        .collect();
    ColourState {
        colours,
        step: next_step,
    }
}

/// Runs the majority protocol from random initial colours.
pub fn run(g: &PaGraph, config: &ProtocolConfig) -> Trace {
    run_protocol(g, config, Protocol::Mpk)
}

pub fn run_protocol(g: &PaGraph, config: &ProtocolConfig, protocol: Protocol) -> Trace {
    let initial = init_colours(g.t(), config.alpha, config.seed).expect("alpha validated by ProtocolConfig");
    run_from(g, initial, config, protocol)
}

/// Iterates from `initial` until every vertex agrees or `max_steps` steps
/// have been taken.
pub fn run_from(g: &PaGraph, initial: ColourState, config: &ProtocolConfig, protocol: Protocol) -> Trace {
    let mut state = initial;
    let mut red_counts = vec![state.red_count()];
    let mut winner = state.consensus();
    let mut consensus_step = winner.map(|_| state.step);
    while winner.is_none() && state.step < config.max_steps {
        state = match protocol {
            Protocol::Mpk => step(g, &state, config.k, config.seed),
            Protocol::Voter => voter_step(g, &state, config.seed),
        };
        red_counts.push(state.red_count());
        winner = state.consensus();
        if winner.is_some() {
            consensus_step = Some(state.step);
        }
    }
    Trace {
        steps_run: red_counts.len() - 1,
        red_counts,
        consensus_step,
        winner,
    }
}
