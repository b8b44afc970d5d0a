//! Property testing in the adjacency-matrix model.
//!
//! [`BipartitenessTester`] samples a uniform vertex subset, reads every
//! ordered pair of the subset through the traced matrix and accepts iff the
//! induced subgraph is 2-colourable. Its access pattern is input-independent
//! but its output bit is not; [`do_tester`] hides the bit by repeating any
//! one-sided base tester on successively smaller induced subgraphs and
//! comparing the success count against a Laplace-noised threshold.

use std::collections::BTreeSet;

use rand::seq::index;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graphs::{induced_subgraph, is_bipartite_with, DenseGraph};
use crate::noise::{laplace, LaplaceScale};
use crate::trace::AccessTrace;

/// `⌈(8/γ²)·log₂(8/γ)⌉`, the bundled sample size for a γ-tester. It does not
/// depend on `n`.
pub fn default_sample_size(gamma: f64) -> usize {
    ((8.0 / (gamma * gamma)) * (8.0 / gamma).log2()).ceil() as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BaseTesterConfig {
    pub beta: f64,
    pub gamma: f64,
    pub sample_size: usize,
}

impl BaseTesterConfig {
    pub fn new(beta: f64, gamma: f64) -> Result<Self> {
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(Error::param(format!("beta must be in (0, 1], got {beta}")));
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::param(format!("gamma must be in (0, 1), got {gamma}")));
        }
        Ok(Self {
            beta,
            gamma,
            sample_size: default_sample_size(gamma),
        })
    }

    /// Overrides the sample size, e.g. to fit the wrapper's vertex budget on
    /// small graphs.
    pub fn with_sample_size(mut self, sample_size: usize) -> Result<Self> {
        if sample_size == 0 {
            return Err(Error::param("sample size must be at least 1"));
        }
        self.sample_size = sample_size;
        Ok(self)
    }
}

/// A tester that accepts every member of its property with probability 1.
pub trait OneSidedTester {
    /// Number of vertices sampled per run.
    fn sample_size(&self) -> usize;

    /// Runs once on `g`, returning the verdict and the probed vertex set.
    fn run(&self, g: &mut DenseGraph, rng: &mut dyn rand::RngCore) -> Result<(bool, BTreeSet<usize>)>;
}

#[derive(Debug, Clone, Copy)]
pub struct BipartitenessTester {
    pub config: BaseTesterConfig,
}

impl OneSidedTester for BipartitenessTester {
    fn sample_size(&self) -> usize {
        self.config.sample_size
    }

    fn run(&self, g: &mut DenseGraph, rng: &mut dyn rand::RngCore) -> Result<(bool, BTreeSet<usize>)> {
        base_bipartite_tester(g, &self.config, rng)
    }
}

pub fn base_bipartite_tester<R: Rng + ?Sized>(
    g: &mut DenseGraph,
    cfg: &BaseTesterConfig,
    rng: &mut R,
) -> Result<(bool, BTreeSet<usize>)> {
    let n = g.n();
    let c = cfg.sample_size;
    if n < c {
        return Err(Error::param(format!("graph has {n} vertices, tester samples {c}")));
    }
    let mut sample = index::sample(rng, n, c).into_vec();
    sample.sort_unstable();
    // Local copy of the induced adjacency; this is the private cache.
    let mut local = vec![false; c * c];
    for (a, &u) in sample.iter().enumerate() {
        for (b, &v) in sample.iter().enumerate() {
            local[a * c + b] = g.probe(u, v);
        }
    }
    let accept = is_bipartite_with(c, |a, b| local[a * c + b]);
    Ok((accept, sample.into_iter().collect()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DoTesterParams {
    pub epsilon: f64,
    pub delta: f64,
    /// `ln(1/(2δ))/ε`.
    pub threshold: f64,
    /// `⌈4T⌉` base-tester repetitions.
    pub rounds: usize,
}

impl DoTesterParams {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::param(format!("epsilon must be positive, got {epsilon}")));
        }
        if !(delta > 0.0 && delta < 0.5) {
            return Err(Error::param(format!("delta must be in (0, 1/2), got {delta}")));
        }
        let threshold = (1.0 / (2.0 * delta)).ln() / epsilon;
        Ok(Self {
            epsilon,
            delta,
            threshold,
            rounds: (4.0 * threshold).ceil() as usize,
        })
    }

    /// Fewest vertices the wrapper needs: one fresh sample per round plus one spare.
    pub fn min_vertices(&self, sample_size: usize) -> usize {
        self.rounds * sample_size + sample_size
    }

    /// Degraded farness `γ − 4·ln(1/2δ)·c/(n·ε)` at which soundness is guaranteed.
    pub fn gamma_prime(&self, gamma: f64, sample_size: usize, n: usize) -> f64 {
        gamma - 4.0 * (1.0 / (2.0 * self.delta)).ln() * sample_size as f64 / (n as f64 * self.epsilon)
    }

    /// Failure bound `δ + (2δ)^{1/(3ε)}` on γ′-far inputs.
    pub fn soundness_failure_bound(&self) -> f64 {
        self.delta + (2.0 * self.delta).powf(1.0 / (3.0 * self.epsilon))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TesterOutcome {
    pub output: bool,
    /// Number of accepting base runs.
    pub successes: usize,
    pub noisy_threshold: f64,
    pub rounds: usize,
    #[serde(skip)]
    pub trace: AccessTrace,
}

impl TesterOutcome {
    pub fn probes(&self) -> usize {
        self.trace.reads()
    }
}

pub fn do_tester<B: OneSidedTester + ?Sized, R: Rng>(
    g: &DenseGraph,
    base: &B,
    params: &DoTesterParams,
    rng: &mut R,
) -> Result<TesterOutcome> {
    let c = base.sample_size();
    let need = params.min_vertices(c);
    if g.n() < need {
        return Err(Error::param(format!(
            "graph has {} vertices; {} rounds of {c} samples need {need}",
            g.n(),
            params.rounds
        )));
    }
    let mut current = g.clone();
    current.take_trace();
    let mut trace = AccessTrace::new();
    let mut successes = 0usize;
    for round in 0..params.rounds {
        let (accept, probed) = base.run(&mut current, rng)?;
        successes += accept as usize;
        trace.append(current.trace());
        if round + 1 < params.rounds {
            current = induced_subgraph(&current, &probed)?;
        }
    }
    let scale = LaplaceScale::for_epsilon(params.epsilon)?;
    let noisy_threshold = 3.0 * params.threshold + laplace(scale, rng);
    let output = successes as f64 >= noisy_threshold.min(4.0 * params.threshold);
    Ok(TesterOutcome {
        output,
        successes,
        noisy_threshold,
        rounds: params.rounds,
        trace,
    })
}
