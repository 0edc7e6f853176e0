//! Parameter sweeps over `(t, m, δ, k, α)` with seeded, order-independent
//! trials.
//!
//! Every trial draws a fresh graph and fresh initial colours. Its seed is a
//! hash of the base seed, the cell parameters and the trial index, so a
//! cell's results do not depend on which other cells are in the sweep or on
//! the order in which worker threads finish.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{self, Colour, ProtocolConfig};
use crate::error::{Error, Result};
use crate::pa_graph::generate_pa;
use crate::stats::nearest_rank;
use crate::threshold::{alpha_star, effective_d, ConvergenceSchedule};

pub const CSV_HEADER: &str = "t,m,delta,k,alpha,trials,blue_rate,red_rate,nonconv_rate,cs_p50,cs_p95,tau_star";

/// ε used for the predicted schedule when a spec does not set one.
pub const DEFAULT_EPSILON: f64 = 0.1;

/// Sweep description, read from a flat JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub t: Vec<usize>,
    pub m: Vec<usize>,
    pub delta: Vec<f64>,
    pub k: Vec<usize>,
    pub alpha: Vec<f64>,
    pub trials: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// Fixed step cap; defaults to `10·⌈τ*⌉ + 100` per cell.
    #[serde(default)]
    pub max_steps: Option<usize>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Reject grids with `δ < 0`.
    #[serde(default)]
    pub theorem_mode: bool,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub csv_out: Option<String>,
    #[serde(default)]
    pub json_out: Option<String>,
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.trials == 0 {
            return bad("trials must be positive".into());
        }
        if self.t.contains(&0) {
            return bad("every t must be positive".into());
        }
        if self.m.contains(&0) {
            return bad("every m must be positive".into());
        }
        if let Some(&k) = self.k.iter().find(|&&k| k < 5 || k % 2 == 0) {
            return bad(format!("k must be odd and at least 5, got {k}"));
        }
        if let Some(a) = self.alpha.iter().find(|a| !(0.0..=1.0).contains(*a)) {
            return bad(format!("alpha {a} outside [0, 1]"));
        }
        for &m in &self.m {
            if let Some(d) = self.delta.iter().find(|&&d| d <= -(m as f64) || !d.is_finite()) {
                return bad(format!("delta {d} must exceed -m = -{m}"));
            }
        }
        if self.theorem_mode {
            if let Some(d) = self.delta.iter().find(|&&d| d < 0.0) {
                return bad(format!("theorem mode requires delta >= 0, got {d}"));
            }
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if self.max_steps == Some(0) {
            return bad("max_steps must be positive".into());
        }
        if self.workers == Some(0) {
            return bad("workers must be positive".into());
        }
        Ok(())
    }

    /// Grid cells in `t, m, delta, k, alpha` nesting order.
    pub fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        for &t in &self.t {
            for &m in &self.m {
                for &delta in &self.delta {
                    for &k in &self.k {
                        for &alpha in &self.alpha {
                            cells.push(Cell { t, m, delta, k, alpha });
                        }
                    }
                }
            }
        }
        cells
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub t: usize,
    pub m: usize,
    pub delta: f64,
    pub k: usize,
    pub alpha: f64,
}

/// Position of `α` relative to `α*(d)` for the cell's effective degree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Subcritical,
    Supercritical,
    /// `d < 5`, where no threshold is defined.
    Undefined,
}

impl Cell {
    pub fn effective_d(&self) -> Option<u32> {
        effective_d(self.m as u32, self.k as u32).ok().filter(|&d| d >= 5)
    }

    pub fn regime(&self) -> Regime {
        match self.effective_d().map(|d| alpha_star(d).expect("d checked")) {
            Some(a) if self.alpha < a => Regime::Subcritical,
            Some(_) => Regime::Supercritical,
            None => Regime::Undefined,
        }
    }

    pub fn schedule(&self, epsilon: f64) -> Option<ConvergenceSchedule> {
        ConvergenceSchedule::new(self.effective_d()?, epsilon, self.t as f64).ok()
    }

    /// `10·⌈τ*⌉ + 100`, or 100 when `τ*` is undefined.
    pub fn default_max_steps(&self, epsilon: f64) -> usize {
        self.schedule(epsilon)
            .map(|s| 10 * s.tau_star.ceil() as usize + 100)
            .unwrap_or(100)
    }

    /// Seed of trial `trial` in this cell.
    pub fn trial_seed(&self, base_seed: u64, trial: u64) -> u64 {
        let scaled = |x: f64| (x * 1e6).round() as i64 as u64;
        [
            self.t as u64,
            self.m as u64,
            scaled(self.delta),
            self.k as u64,
            scaled(self.alpha),
            trial,
        ]
        .into_iter()
        .fold(splitmix64(base_seed), |h, x| splitmix64(h ^ x))
    }
}

/// SplitMix64 output function, used to mix seeds.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent graph and dynamics seeds derived from one trial seed.
pub fn split_seed(seed: u64) -> (u64, u64) {
    (splitmix64(seed ^ 0x0067_7261_7068), splitmix64(seed ^ 0x0064_796e_616d))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub seed: u64,
    pub winner: Option<Colour>,
    pub consensus_step: Option<usize>,
    pub steps_run: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub t: usize,
    pub m: usize,
    pub delta: f64,
    pub k: usize,
    pub alpha: f64,
    pub trials: usize,
    pub regime: Regime,
    pub blue_rate: f64,
    pub red_rate: f64,
    pub nonconv_rate: f64,
    pub cs_p50: Option<f64>,
    pub cs_p95: Option<f64>,
    pub tau_star: Option<f64>,
    /// `⌈τ*⌉ + 2`.
    pub predicted_consensus: Option<usize>,
    pub records: Vec<TrialRecord>,
}

impl CellResult {
    pub fn aggregate(cell: Cell, epsilon: f64, records: Vec<TrialRecord>) -> Self {
        let n = records.len();
        let rate = |c: Option<Colour>| records.iter().filter(|r| r.winner == c).count() as f64 / n as f64;
        let mut steps: Vec<f64> = records
            .iter()
            .filter_map(|r| r.consensus_step.map(|s| s as f64))
            .collect();
        steps.sort_by(f64::total_cmp);
        let schedule = cell.schedule(epsilon);
        CellResult {
            t: cell.t,
            m: cell.m,
            delta: cell.delta,
            k: cell.k,
            alpha: cell.alpha,
            trials: n,
            regime: cell.regime(),
            blue_rate: rate(Some(Colour::Blue)),
            red_rate: rate(Some(Colour::Red)),
            nonconv_rate: rate(None),
            cs_p50: nearest_rank(&steps, 0.5),
            cs_p95: nearest_rank(&steps, 0.95),
            tau_star: schedule.map(|s| s.tau_star),
            predicted_consensus: schedule.map(|s| s.consensus_bound()),
            records,
        }
    }

    fn csv_row(&self) -> String {
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.t,
            self.m,
            self.delta,
            self.k,
            self.alpha,
            self.trials,
            self.blue_rate,
            self.red_rate,
            self.nonconv_rate,
            opt(self.cs_p50),
            opt(self.cs_p95),
            opt(self.tau_star)
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub cells: Vec<CellResult>,
}

/// Runs one trial: a graph, initial colours and the majority protocol.
pub fn run_trial(cell: &Cell, trial: u64, seed: u64, max_steps: usize) -> Result<TrialRecord> {
    let (graph_seed, dynamics_seed) = split_seed(seed);
    let g = generate_pa(cell.t, cell.m, cell.delta, graph_seed)?;
    let config = ProtocolConfig::new(cell.k, cell.alpha, dynamics_seed, max_steps)?;
    let trace = dynamics::run(&g, &config);
    Ok(TrialRecord {
        trial,
        seed,
        winner: trace.winner,
        consensus_step: trace.consensus_step,
        steps_run: trace.steps_run,
    })
}

/// Runs every cell of `spec` on a pool of `workers` threads (all cores if
/// `None`). The result does not depend on the worker count.
pub fn run_sweep(spec: &ExperimentSpec, workers: Option<usize>) -> Result<SweepResult> {
    spec.validate()?;
    let cells = spec.cells();
    let jobs: Vec<(usize, u64)> = (0..cells.len())
        .flat_map(|c| (0..spec.trials as u64).map(move |i| (c, i)))
        .collect();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers.or(spec.workers) {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::Config(e.to_string()))?;
    let records: Vec<TrialRecord> = pool.install(|| {
        jobs.par_iter()
            .map(|&(c, i)| {
                let cell = &cells[c];
                let max_steps = spec.max_steps.unwrap_or_else(|| cell.default_max_steps(spec.epsilon));
                run_trial(cell, i, cell.trial_seed(spec.base_seed, i), max_steps)
            })
            .collect::<Result<_>>()
    })?;
    let mut records = records.into_iter();
    let cells = cells
        .into_iter()
        .map(|cell| {
            let recs: Vec<TrialRecord> = records.by_ref().take(spec.trials).collect();
            CellResult::aggregate(cell, spec.epsilon, recs)
        })
        .collect();
    Ok(SweepResult { cells })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for cell in &self.cells {
            out.push_str(&cell.csv_row());
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

pub fn emit(result: &SweepResult, format: Format, path: impl AsRef<Path>) -> Result<()> {
    let text = match format {
        Format::Csv => result.to_csv(),
        Format::Json => result.to_json()?,
    };
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(text.as_bytes())?;
    out.flush()?;
    Ok(())
}
