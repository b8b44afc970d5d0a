//! Differentially oblivious existence check for a predicate.
//!
//! Samples records uniformly with replacement for up to `⌊n/2⌋` steps and, at
//! every power-of-two step, compares the number of hits against a freshly
//! noised threshold; a crossing halts with output 1. Otherwise the whole
//! dataset is scanned in address order. The output is always exact; only the
//! halting time is randomized, and it leaks through nothing but the trace
//! length.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::noise::{laplace, LaplaceScale};
use crate::trace::{AccessKind, AccessTrace, TracedStore};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LocateParams {
    pub epsilon: f64,
    pub delta: f64,
    pub n: usize,
    /// `ε / (2·log₂(2/δ))`, the per-checkpoint Laplace budget.
    pub eps_prime: f64,
    /// `(1/ε′)·ln(log₂(n)/δ)`.
    pub threshold: f64,
}

impl LocateParams {
    pub fn new(epsilon: f64, delta: f64, n: usize) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::param(format!("epsilon must be positive, got {epsilon}")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::param(format!("delta must be in (0, 1), got {delta}")));
        }
        if n < 4 {
            return Err(Error::param(format!("locate needs n >= 4, got {n}")));
        }
        let eps_prime = epsilon / (2.0 * (2.0 / delta).log2());
        let threshold = ((n as f64).log2() / delta).ln() / eps_prime;
        Ok(Self {
            epsilon,
            delta,
            n,
            eps_prime,
            threshold,
        })
    }

    /// Number of sampling steps before the fallback scan.
    pub fn sample_steps(&self) -> usize {
        self.n / 2
    }

    /// Steps at which a noisy threshold is drawn: `1, 2, 4, ... ≤ ⌊n/2⌋`.
    pub fn checkpoints(&self) -> impl Iterator<Item = usize> {
        let last = self.sample_steps();
        std::iter::successors(Some(1usize), |&i| i.checked_mul(2)).take_while(move |&i| i <= last)
    }

    /// Read count of a run that never halts early: the samples plus the scan.
    pub fn fallback_probes(&self) -> usize {
        self.sample_steps() + self.n
    }

    /// Multiplicity bound `2·log₂(2/δ)` on any single sampled index.
    pub fn repeat_bound(&self) -> f64 {
        2.0 * (2.0 / self.delta).log2()
    }
}

/// Records in a traced store plus a predicate evaluated in private memory.
pub struct PredicateDataset<T, P> {
    store: TracedStore<T>,
    predicate: P,
}

impl<T: Clone, P: Fn(&T) -> bool> PredicateDataset<T, P> {
    pub fn new(records: Vec<T>, predicate: P) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::param("dataset must not be empty"));
        }
        Ok(Self {
            store: TracedStore::from_vec(records),
            predicate,
        })
    }

    pub fn len(&self) -> usize {
        self.store.capacity()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Ground truth, computed without touching the trace.
    pub fn exists(&self) -> bool {
        self.store.untraced().iter().any(&self.predicate)
    }

    pub fn trace(&self) -> &AccessTrace {
        self.store.trace()
    }

    pub fn take_trace(&mut self) -> AccessTrace {
        self.store.take_trace()
    }

    fn check(&mut self, address: usize) -> bool {
        let record = self.store.read(address);
        (self.predicate)(&record)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocateOutcome {
    pub output: bool,
    /// Step `i` at which a noisy threshold was crossed, if any.
    pub halted_at: Option<usize>,
    pub probes: usize,
    /// Largest number of times a single index was drawn while sampling.
    pub max_repeat: usize,
}

pub fn do_locate<T, P, R>(x: &mut PredicateDataset<T, P>, params: &LocateParams, rng: &mut R) -> Result<LocateOutcome>
where
    T: Clone,
    P: Fn(&T) -> bool,
    R: Rng + ?Sized,
{
    let n = x.len();
    if n != params.n {
        return Err(Error::param(format!("params built for n={}, dataset has {n}", params.n)));
    }
    let before = x.trace().reads();
    let scale = LaplaceScale::for_epsilon(params.eps_prime)?;
    let mut hits = 0usize;
    let mut draws = vec![0u32; n];
    for i in 1..=params.sample_steps() {
        let j = rng.gen_range(0..n);
        draws[j] += 1;
        if x.check(j) {
            hits += 1;
        }
        if i.is_power_of_two() {
            let noisy = params.threshold + laplace(scale, rng);
            if hits as f64 > noisy.max(0.0) {
                return Ok(LocateOutcome {
                    output: true,
                    halted_at: Some(i),
                    probes: x.trace().reads() - before,
                    max_repeat: *draws.iter().max().unwrap_or(&0) as usize,
                });
            }
        }
    }
    let mut found = false;
    for address in 0..n {
        found |= x.check(address);
    }
    Ok(LocateOutcome {
        output: found,
        halted_at: None,
        probes: x.trace().reads() - before,
        max_repeat: *draws.iter().max().unwrap_or(&0) as usize,
    })
}

/// Number of reads in a trace of one [`do_locate`] run on `n` records.
/// Rejects traces that contain writes, out-of-range addresses, or a length no
/// run can produce.
pub fn locate_probe_count(trace: &AccessTrace, n: usize) -> Result<usize> {
    const WHO: &str = "do_locate";
    if trace
        .events()
        .iter()
        .any(|e| e.kind != AccessKind::Read || e.address >= n)
    {
        return Err(Error::ForeignTrace(WHO));
    }
    let m = trace.len();
    let early = m >= 1 && m.is_power_of_two() && m <= n / 2;
    if !(early || m == n / 2 + n) {
        return Err(Error::ForeignTrace(WHO));
    }
    if m == n / 2 + n {
        let scan = &trace.events()[n / 2..];
        if scan.iter().enumerate().any(|(k, e)| e.address != k) {
            return Err(Error::ForeignTrace(WHO));
        }
    }
    Ok(m)
}
