//! Empirical side of obliviousness.
//!
//! * The two-phase adversary game: the adversary picks two neighboring
//!   inputs, then queries a mechanism running on one of them and guesses
//!   which one it was, seeing only what the mechanism exposes.
//! * [`estimate_privacy`]: runs a mechanism many times on both inputs of a
//!   neighbor pair, projects every trace to a token and searches a family of
//!   token sets for the largest `ln((p̂₀(S) − δ)/p̂₁(S))`. The event family is
//!   chosen on half of the trials and evaluated on the other half. The result
//!   is a lower estimate: an audit can refute a privacy claim, never prove it.
//! * [`lowerbound_demo`]: the attack on adaptive connectivity testers in the
//!   degree-2 model, comparing a permuted cycle with a rewired copy.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Debug;

use rand::{Rng, RngCore, SeedableRng};
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::dense_tester::{do_tester, BaseTesterConfig, BipartitenessTester, DoTesterParams};
use crate::error::{Error, Result};
use crate::graphs::{cycle_graph, make_h2, random_isomorphism, BoundedDegreeGraph, DenseGraph};
use crate::locate::{do_locate, LocateParams, PredicateDataset};
use crate::prefix::{do_search, SearchParams, SortedDataset};
use crate::rng::{derive_seed, trial_rng, TrialRng};
use crate::stats::clopper_pearson;
use crate::trace::{project_trace, AccessTrace, Projected, Projection};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum NeighborKind {
    /// Equal length, exactly one position differs.
    DatasetEntry,
    /// Same vertex set; only the neighborhood of one vertex changes.
    GraphNode,
    /// Both sorted; the multisets agree on all but one element.
    SortedMultiset,
}

/// Inputs that can be checked against a declared neighbor relation.
pub trait Neighboring {
    fn check_neighbors(x0: &Self, x1: &Self, kind: NeighborKind) -> Result<()>;
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}

impl<T: PartialOrd + Debug> Neighboring for Vec<T> {
    fn check_neighbors(x0: &Self, x1: &Self, kind: NeighborKind) -> Result<()> {
        if x0.len() != x1.len() {
            return Err(invalid(format!("lengths differ: {} vs {}", x0.len(), x1.len())));
        }
        match kind {
            NeighborKind::DatasetEntry => {
                let diff = x0.iter().zip(x1).filter(|(a, b)| a != b).count();
                if diff != 1 {
                    return Err(invalid(format!("{diff} entries differ, expected exactly 1")));
                }
            }
            NeighborKind::SortedMultiset => {
                let sorted = |x: &[T]| x.windows(2).all(|w| w[0] <= w[1]);
                if !sorted(x0) || !sorted(x1) {
                    return Err(invalid("multiset neighbors must be given sorted"));
                }
                // merge walk counting elements without a partner
                let (mut i, mut j, mut unmatched) = (0, 0, 0);
                while i < x0.len() && j < x1.len() {
                    if x0[i] == x1[j] {
                        i += 1;
                        j += 1;
                    } else if x0[i] < x1[j] {
                        i += 1;
                        unmatched += 1;
                    } else {
                        j += 1;
                    }
                }
                unmatched += x0.len() - i;
                if unmatched != 1 {
                    return Err(invalid(format!("multisets differ in {unmatched} elements, expected 1")));
                }
            }
            NeighborKind::GraphNode => return Err(invalid("a vector is not a graph")),
        }
        Ok(())
    }
}

impl Neighboring for DenseGraph {
    fn check_neighbors(x0: &Self, x1: &Self, kind: NeighborKind) -> Result<()> {
        if kind != NeighborKind::GraphNode {
            return Err(invalid("graphs are compared with the GraphNode relation"));
        }
        let n = x0.n();
        if x1.n() != n {
            return Err(invalid(format!("vertex counts differ: {n} vs {}", x1.n())));
        }
        let mut diff = Vec::new();
        for u in 0..n {
            for v in (u + 1)..n {
                if x0.has_edge(u, v) != x1.has_edge(u, v) {
                    diff.push((u, v));
                }
            }
        }
        let Some(&(a, b)) = diff.first() else {
            return Err(invalid("graphs are identical"));
        };
        if [a, b].iter().any(|&c| diff.iter().all(|&(u, v)| u == c || v == c)) {
            Ok(())
        } else {
            Err(invalid("changed edges are not incident to a single vertex"))
        }
    }
}

#[derive(Debug, Clone)]
pub struct NeighborPair<X> {
    pub x0: X,
    pub x1: X,
    pub kind: NeighborKind,
}

impl<X: Neighboring> NeighborPair<X> {
    pub fn new(x0: X, x1: X, kind: NeighborKind) -> Result<Self> {
        X::check_neighbors(&x0, &x1, kind)?;
        Ok(Self { x0, x1, kind })
    }

    pub fn validate(&self) -> Result<()> {
        X::check_neighbors(&self.x0, &self.x1, self.kind)
    }
}

/// What one mechanism run exposes: its trace and, where the setting grants
/// it, its output bit.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Observation {
    pub trace: AccessTrace,
    pub output: Option<bool>,
}

/// A two-phase adversary.
pub trait Adversary<X> {
    /// First phase: the pair of inputs.
    fn choose(&mut self, rng: &mut TrialRng) -> Result<NeighborPair<X>>;

    /// Second phase: query the oracle any number of times, then guess `b`.
    fn guess(&mut self, oracle: &mut dyn FnMut() -> Result<Observation>, rng: &mut TrialRng) -> Result<bool>;
}

/// One run of the experiment with hidden bit `b`; returns the guess.
pub fn run_experiment<X, A, M>(adversary: &mut A, mechanism: &M, b: bool, rng: &mut TrialRng) -> Result<bool>
where
    X: Neighboring,
    A: Adversary<X> + ?Sized,
    M: Fn(&X, &mut TrialRng) -> Result<Observation>,
{
    let pair = adversary.choose(rng)?;
    pair.validate()?;
    let x = if b { &pair.x1 } else { &pair.x0 };
    let mut mech_rng = TrialRng::seed_from_u64(rng.next_u64());
    let mut oracle = || mechanism(x, &mut mech_rng);
    adversary.guess(&mut oracle, rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Advantage {
    /// `Pr[guess = 1 | b = 0]`.
    pub p_one_given_0: f64,
    /// `Pr[guess = 1 | b = 1]`.
    pub p_one_given_1: f64,
    pub advantage: f64,
    pub trials: usize,
}

/// Runs the experiment `trials` times for each `b` with a fresh adversary.
pub fn measure_advantage<X, A, M>(new_adversary: impl Fn() -> A, mechanism: &M, trials: usize, seed: u64) -> Result<Advantage>
where
    X: Neighboring,
    A: Adversary<X>,
    M: Fn(&X, &mut TrialRng) -> Result<Observation>,
{
    if trials == 0 {
        return Err(Error::param("trials must be positive"));
    }
    let mut ones = [0usize; 2];
    for (side, count) in ones.iter_mut().enumerate() {
        let stream = derive_seed(seed, side as u64);
        for t in 0..trials {
            let mut adv = new_adversary();
            *count += run_experiment(&mut adv, mechanism, side == 1, &mut trial_rng(stream, t as u64))? as usize;
        }
    }
    let p0 = ones[0] as f64 / trials as f64;
    let p1 = ones[1] as f64 / trials as f64;
    Ok(Advantage {
        p_one_given_0: p0,
        p_one_given_1: p1,
        advantage: (p1 - p0).abs(),
        trials,
    })
}

/// Ignores the oracle and always answers the same bit.
pub struct ConstantAdversary<X> {
    pub pair: NeighborPair<X>,
    pub answer: bool,
}

impl<X: Clone> Adversary<X> for ConstantAdversary<X> {
    fn choose(&mut self, _rng: &mut TrialRng) -> Result<NeighborPair<X>> {
        Ok(self.pair.clone())
    }

    fn guess(&mut self, _oracle: &mut dyn FnMut() -> Result<Observation>, _rng: &mut TrialRng) -> Result<bool> {
        Ok(self.answer)
    }
}

/// Queries once and guesses 1 iff the trace is longer than `cut`.
pub struct LengthAdversary<X> {
    pub pair: NeighborPair<X>,
    pub cut: usize,
}

impl<X: Clone> Adversary<X> for LengthAdversary<X> {
    fn choose(&mut self, _rng: &mut TrialRng) -> Result<NeighborPair<X>> {
        Ok(self.pair.clone())
    }

    fn guess(&mut self, oracle: &mut dyn FnMut() -> Result<Observation>, _rng: &mut TrialRng) -> Result<bool> {
        Ok(oracle()?.trace.len() > self.cut)
    }
}

/// Mechanisms that are not oblivious, kept as auditor test subjects.
pub mod baselines {
    use super::Observation;
    use crate::trace::TracedStore;

    /// Linear scan that stops at the first marker.
    pub fn first_hit_scan(x: &[u32], marker: u32) -> Observation {
        let mut s = TracedStore::from_vec(x.to_vec());
        let mut found = false;
        for a in 0..x.len() {
            if s.read(a) == marker {
                found = true;
                break;
            }
        }
        Observation {
            trace: s.take_trace(),
            output: Some(found),
        }
    }

    /// Full scan, plus one extra read iff a marker is present.
    pub fn marker_padding(x: &[u32], marker: u32) -> Observation {
        let mut s = TracedStore::from_vec(x.to_vec());
        let mut found = false;
        for a in 0..x.len() {
            found |= s.read(a) == marker;
        }
        if found {
            s.read(0);
        }
        Observation {
            trace: s.take_trace(),
            output: Some(found),
        }
    }

    /// Full scan; the trace does not depend on the contents.
    pub fn full_scan(x: &[u32], marker: u32) -> Observation {
        let mut s = TracedStore::from_vec(x.to_vec());
        let mut found = false;
        for a in 0..x.len() {
            found |= s.read(a) == marker;
        }
        Observation {
            trace: s.take_trace(),
            output: Some(found),
        }
    }
}

fn serialize_extended<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_infinite() {
        s.serialize_str(if *v > 0.0 { "inf" } else { "-inf" })
    } else {
        s.serialize_f64(*v)
    }
}

pub const ESTIMATE_NOTE: &str =
    "eps_hat is a lower estimate of the true epsilon: a large value refutes a privacy claim, a small one does not prove it";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsilonEstimate {
    #[serde(serialize_with = "serialize_extended")]
    pub eps_hat: f64,
    pub delta_used: f64,
    /// Projection that defines the tokens.
    pub event_family: String,
    #[serde(serialize_with = "serialize_extended")]
    pub ci_low: f64,
    #[serde(serialize_with = "serialize_extended")]
    pub ci_high: f64,
    /// Runs per input.
    pub trials: usize,
    pub distinct_tokens: usize,
    /// Size and direction of the maximizing token set.
    pub best_set_size: usize,
    pub best_direction: String,
    pub warnings: Vec<String>,
    pub note: &'static str,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditConfig {
    pub projection: Projection,
    /// Add the mechanism's output bit to each token.
    pub include_output: bool,
    pub delta: f64,
    pub trials: usize,
    pub seed: u64,
    /// Evaluation-half hits a token set needs on the numerator side.
    pub min_support: u64,
}

impl AuditConfig {
    pub fn new(projection: Projection, delta: f64, trials: usize, seed: u64) -> Self {
        Self {
            projection,
            include_output: false,
            delta,
            trials,
            seed,
            min_support: 30,
        }
    }

    pub fn with_output(mut self, include: bool) -> Self {
        self.include_output = include;
        self
    }
}

pub type Token = (Projected, Option<bool>);

/// Collects `trials` tokens of `mechanism` on `x`, trials in parallel.
pub fn sample_tokens<X, M>(mechanism: &M, x: &X, cfg: &AuditConfig, stream: u64) -> Result<Vec<Token>>
where
    X: Sync,
    M: Fn(&X, &mut TrialRng) -> Result<Observation> + Sync,
{
    (0..cfg.trials as u64)
        .into_par_iter()
        .map(|t| {
            let obs = mechanism(x, &mut trial_rng(stream, t))?;
            let out = if cfg.include_output { obs.output } else { None };
            Ok((project_trace(&obs.trace, cfg.projection), out))
        })
        .collect()
}

pub fn estimate_privacy<X, M>(mechanism: &M, pair: &NeighborPair<X>, cfg: &AuditConfig) -> Result<EpsilonEstimate>
where
    X: Neighboring + Sync,
    M: Fn(&X, &mut TrialRng) -> Result<Observation> + Sync,
{
    if cfg.trials < 1000 {
        return Err(Error::param(format!("the auditor needs at least 1000 trials, got {}", cfg.trials)));
    }
    if !(0.0..1.0).contains(&cfg.delta) {
        return Err(Error::param(format!("delta must be in [0, 1), got {}", cfg.delta)));
    }
    pair.validate()?;
    let t0 = sample_tokens(mechanism, &pair.x0, cfg, derive_seed(cfg.seed, 0))?;
    let t1 = sample_tokens(mechanism, &pair.x1, cfg, derive_seed(cfg.seed, 1))?;
    let core = estimate_from_tokens(&t0, &t1, cfg.delta, cfg.min_support);
    let mut warnings = Vec::new();
    if core.distinct == 1 {
        warnings.push("degenerate projection: every run produced the same token; estimate is 0".to_string());
    } else if core.distinct * 20 > cfg.trials {
        warnings.push(format!(
            "sparse projection: {} distinct tokens over {} runs per input; the estimate has little power",
            core.distinct, cfg.trials
        ));
    }
    let (eps_hat, ci_low, ci_high) = if core.distinct == 1 {
        (0.0, 0.0, core.ci_high)
    } else {
        (core.eps_hat, core.ci_low, core.ci_high)
    };
    Ok(EpsilonEstimate {
        eps_hat,
        delta_used: cfg.delta,
        event_family: cfg.projection.name().to_string() + if cfg.include_output { "+output" } else { "" },
        ci_low,
        ci_high,
        trials: cfg.trials,
        distinct_tokens: core.distinct,
        best_set_size: core.best_size,
        best_direction: core.direction.to_string(),
        warnings,
        note: ESTIMATE_NOTE,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoreEstimate {
    pub eps_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub distinct: usize,
    pub best_size: usize,
    pub direction: &'static str,
}

/// `max(0, ln((p_a − δ)/p_b))`, with `+∞` when `p_b = 0 < p_a − δ`.
fn log_ratio(pa: f64, pb: f64, delta: f64) -> f64 {
    let num = pa - delta;
    if num <= 0.0 {
        f64::NEG_INFINITY
    } else if pb <= 0.0 {
        f64::INFINITY
    } else {
        (num / pb).ln()
    }
}

/// Estimator on raw token samples. Even-indexed samples pick the event
/// family (all singletons and the prefixes of the tokens sorted by smoothed
/// likelihood ratio, in both directions, plus the whole space); odd-indexed
/// samples evaluate it. The family never depends on `δ`, so the estimate is
/// non-increasing in `δ`.
pub fn estimate_from_tokens<K: Ord + Clone>(t0: &[K], t1: &[K], delta: f64, min_support: u64) -> CoreEstimate {
    let split = |t: &[K]| -> (BTreeMap<K, u64>, BTreeMap<K, u64>, u64) {
        let (mut sel, mut eval) = (BTreeMap::new(), BTreeMap::new());
        let mut n_eval = 0;
        for (i, k) in t.iter().enumerate() {
            if i % 2 == 0 {
                *sel.entry(k.clone()).or_insert(0) += 1;
            } else {
                *eval.entry(k.clone()).or_insert(0) += 1;
                n_eval += 1;
            }
        }
        (sel, eval, n_eval)
    };
    let (sel0, ev0, n0) = split(t0);
    let (sel1, ev1, n1) = split(t1);
    let distinct = t0.iter().chain(t1).collect::<std::collections::BTreeSet<_>>().len();
    let get = |m: &BTreeMap<K, u64>, k: &K| m.get(k).copied().unwrap_or(0);

    // (value, support, (c_a, c_b, n_a, n_b), set size, direction)
    type Candidate = (f64, u64, (u64, u64, u64, u64), usize, &'static str);
    let mut best: Option<Candidate> = None;
    let mut consider = |value: f64, ca: u64, cb: u64, na: u64, nb: u64, size: usize, dir: &'static str| {
        if ca < min_support && size != usize::MAX {
            return;
        }
        let better = match &best {
            None => true,
            Some((v, s, ..)) => value > *v || (value == *v && ca > *s),
        };
        if better {
            best = Some((value, ca, (ca, cb, na, nb), size, dir));
        }
    };
    let keys: Vec<&K> = sel0.keys().chain(sel1.keys()).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
    for (dir, sel_a, sel_b, ev_a, ev_b, na, nb) in [
        ("x0 over x1", &sel0, &sel1, &ev0, &ev1, n0, n1),
        ("x1 over x0", &sel1, &sel0, &ev1, &ev0, n1, n0),
    ] {
        let mut order: Vec<(f64, &K)> = keys
            .iter()
            .map(|&k| ((get(sel_a, k) as f64 + 1.0) / (get(sel_b, k) as f64 + 1.0), k))
            .collect();
        order.sort_by(|a, b| b.0.total_cmp(&a.0));
        let (mut ca, mut cb) = (0u64, 0u64);
        for (size, (_, k)) in order.iter().enumerate() {
            let (sa, sb) = (get(ev_a, k), get(ev_b, k));
            let v = log_ratio(sa as f64 / na as f64, sb as f64 / nb as f64, delta);
            consider(v, sa, sb, na, nb, 1, dir);
            ca += sa;
            cb += sb;
            let v = log_ratio(ca as f64 / na as f64, cb as f64 / nb as f64, delta);
            consider(v, ca, cb, na, nb, size + 1, dir);
        }
    }
    // the whole space is always eligible
    consider(log_ratio(1.0, 1.0, delta), n0, n1, n0, n1, usize::MAX, "x0 over x1");

    let (value, _, (ca, cb, na, nb), size, dir) = best.expect("the whole space is always considered");
    let (lo_a, hi_a) = clopper_pearson(ca, na, 0.95);
    let (lo_b, hi_b) = clopper_pearson(cb, nb, 0.95);
    let clamp = |v: f64| v.max(0.0);
    CoreEstimate {
        eps_hat: clamp(value),
        ci_low: clamp(log_ratio(lo_a, hi_b, delta)),
        ci_high: clamp(log_ratio(hi_a, lo_b, delta)),
        distinct,
        best_size: if size == usize::MAX { distinct } else { size },
        direction: dir,
    }
}

/// One marker at `n/2` versus none.
pub fn canonical_locate_pair(n: usize) -> Result<NeighborPair<Vec<u32>>> {
    if n < 2 {
        return Err(Error::param("n must be at least 2"));
    }
    let x1 = vec![0u32; n];
    let mut x0 = x1.clone();
    x0[n / 2] = 1;
    NeighborPair::new(x0, x1, NeighborKind::DatasetEntry)
}

/// Existence of the marker value 1; only the trace is exposed, since the
/// exact output is not hidden.
pub fn locate_mechanism(params: LocateParams) -> impl Fn(&Vec<u32>, &mut TrialRng) -> Result<Observation> + Sync {
    move |x, rng| {
        let mut d = PredicateDataset::new(x.clone(), |r: &u32| *r == 1)?;
        let out = do_locate(&mut d, &params, rng)?;
        Ok(Observation {
            trace: d.take_trace(),
            output: Some(out.output),
        })
    }
}

/// `x0 = 0, 2, …, 2(n−1)`; `x1` moves the element `n` (even `n`) or `n−1`
/// to `2n + 1`. The query `n` then has rank `⌊n/2⌋ + 1` versus `⌊n/2⌋`.
pub fn canonical_search_pair(n: usize) -> Result<(NeighborPair<Vec<f64>>, f64)> {
    if n < 2 {
        return Err(Error::param("n must be at least 2"));
    }
    let x0: Vec<f64> = (0..n).map(|i| (2 * i) as f64).collect();
    let mut x1 = x0.clone();
    x1.remove(n / 2);
    x1.push((2 * n + 1) as f64);
    Ok((NeighborPair::new(x0, x1, NeighborKind::SortedMultiset)?, n as f64))
}

pub fn search_mechanism(params: SearchParams, a: f64) -> impl Fn(&Vec<f64>, &mut TrialRng) -> Result<Observation> + Sync {
    move |x, rng| {
        let mut d = SortedDataset::new(x.clone())?;
        let out = do_search(&mut d, a, &params, rng)?;
        let correct = out.index == d.values().iter().filter(|&&v| v <= a).count();
        Ok(Observation {
            trace: d.take_trace(),
            output: Some(correct),
        })
    }
}

/// A random bipartite graph versus the same graph with vertex 0 joined to
/// every other vertex, which creates triangles.
pub fn canonical_tester_pair(n: usize, seed: u64) -> Result<NeighborPair<DenseGraph>> {
    let (g, _) = DenseGraph::random_bipartite(n, 0.5, &mut trial_rng(seed, 0));
    let mut edges = g.edges();
    edges.retain(|&(u, v)| u != 0 && v != 0);
    edges.extend((1..n).map(|v| (0, v)));
    let h = DenseGraph::from_edges(n, &edges)?;
    NeighborPair::new(g, h, NeighborKind::GraphNode)
}

pub fn tester_mechanism(
    config: BaseTesterConfig,
    params: DoTesterParams,
) -> impl Fn(&DenseGraph, &mut TrialRng) -> Result<Observation> + Sync {
    move |g, rng| {
        let out = do_tester(g, &BipartitenessTester { config }, &params, rng)?;
        Ok(Observation {
            trace: out.trace,
            output: Some(out.output),
        })
    }
}

/// An adaptive tester for connectivity in the degree-2 incidence-list model.
pub trait ConnectivityTester: Sync {
    fn name(&self) -> &'static str;

    fn probe_budget(&self) -> usize;

    /// Runs on `g`; the probes land in `g`'s trace.
    fn run(&self, g: &mut BoundedDegreeGraph, rng: &mut dyn RngCore) -> bool;
}

/// Probes a random vertex, then keeps walking to an unprobed neighbor.
/// Rejects if the walk closes on itself (a small component).
#[derive(Debug, Clone, Copy)]
pub struct NaiveWalkTester {
    pub q: usize,
}

impl ConnectivityTester for NaiveWalkTester {
    fn name(&self) -> &'static str {
        "naive-walk"
    }

    fn probe_budget(&self) -> usize {
        self.q
    }

    fn run(&self, g: &mut BoundedDegreeGraph, rng: &mut dyn RngCore) -> bool {
        let n = g.n();
        let mut probed = vec![false; n];
        let mut v = rng.gen_range(0..n);
        for step in 0..self.q.min(n) {
            probed[v] = true;
            let nb = g.probe(v);
            if step + 1 == self.q {
                break;
            }
            match nb.into_iter().find(|&u| !probed[u]) {
                Some(u) => v = u,
                None => return false,
            }
        }
        true
    }
}

/// Probes vertices `0..q` regardless of the input.
#[derive(Debug, Clone, Copy)]
pub struct FixedProbeTester {
    pub q: usize,
}

impl ConnectivityTester for FixedProbeTester {
    fn name(&self) -> &'static str {
        "fixed-probe"
    }

    fn probe_budget(&self) -> usize {
        self.q
    }

    fn run(&self, g: &mut BoundedDegreeGraph, _rng: &mut dyn RngCore) -> bool {
        let q = self.q.min(g.n());
        let mut closed = q < g.n();
        for v in 0..q {
            closed &= g.probe(v).into_iter().all(|u| u < q);
        }
        !closed
    }
}

/// Distinct vertices in the order they were first probed.
pub fn probed_nodes(trace: &AccessTrace, d: usize) -> Vec<usize> {
    let mut seen = HashSet::new();
    trace
        .events()
        .iter()
        .map(|e| e.address / d)
        .filter(|&v| seen.insert(v))
        .collect()
}

/// Distance at most 2 between distinct vertices, from the untraced lists.
pub fn within_two(g: &BoundedDegreeGraph, a: usize, b: usize) -> bool {
    let na = g.neighbors(a);
    na.contains(&b) || g.neighbors(b).iter().any(|c| na.contains(c))
}

/// The distinguisher: 1 iff, at the first moment the probe sequence contains
/// a pair of vertices within distance 2 (in either graph), every such pair is
/// `{u_i, u_{i+1}}` or `{u_i, u_{i+2}}`.
pub fn distinguisher(
    probes: &[usize],
    h1: &BoundedDegreeGraph,
    h2: &BoundedDegreeGraph,
    perm: &[usize],
    i: usize,
) -> bool {
    let n = perm.len();
    let (ui, ui1, ui2) = (perm[i], perm[(i + 1) % n], perm[(i + 2) % n]);
    let allowed = |a: usize, b: usize| {
        let (a, b) = (a.min(b), a.max(b));
        [(ui, ui1), (ui, ui2)].iter().any(|&(x, y)| (x.min(y), x.max(y)) == (a, b))
    };
    for (k, &b) in probes.iter().enumerate() {
        let mut hit = false;
        for &a in &probes[..k] {
            if within_two(h1, a, b) || within_two(h2, a, b) {
                if !allowed(a, b) {
                    return false;
                }
                hit = true;
            }
        }
        if hit {
            return true;
        }
    }
    false
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowerBoundReport {
    pub n: usize,
    pub q: usize,
    pub tester: String,
    pub trials: usize,
    pub adv_h1: f64,
    pub adv_h2: f64,
    /// `adv_h1 / max(adv_h2, 1/trials)`.
    pub ratio: f64,
}

impl LowerBoundReport {
    /// Whether the measured probabilities break the `(ε, δ)` inequality
    /// `Pr[A(H₁)=1] ≤ e^{4ε}·Pr[A(H₂)=1] + 4e^{4ε}·δ`.
    pub fn violates(&self, epsilon: f64, delta: f64) -> bool {
        let f = (4.0 * epsilon).exp();
        self.adv_h1 > f * self.adv_h2 + 4.0 * f * delta
    }
}

pub fn lowerbound_demo(n: usize, tester: &dyn ConnectivityTester, trials: usize, seed: u64) -> Result<LowerBoundReport> {
    if n < 9 || !n.is_multiple_of(3) {
        return Err(Error::param(format!("n must be a multiple of 3 and at least 9, got {n}")));
    }
    if trials == 0 {
        return Err(Error::param("trials must be positive"));
    }
    let base = cycle_graph(n)?;
    let hits = (0..trials as u64)
        .into_par_iter()
        .map(|t| -> Result<(u64, u64)> {
            let mut rng = trial_rng(seed, t);
            let (mut h1, perm) = random_isomorphism(&base, &mut rng);
            let (mut h2, i, _) = make_h2(&h1, &perm, &mut rng)?;
            let (g1, g2) = (h1.clone(), h2.clone());
            h1.take_trace();
            h2.take_trace();
            tester.run(&mut h1, &mut rng);
            tester.run(&mut h2, &mut rng);
            let a1 = distinguisher(&probed_nodes(h1.trace(), 2), &g1, &g2, &perm, i);
            let a2 = distinguisher(&probed_nodes(h2.trace(), 2), &g1, &g2, &perm, i);
            Ok((a1 as u64, a2 as u64))
        })
        .try_reduce(|| (0, 0), |a, b| Ok((a.0 + b.0, a.1 + b.1)))?;
    let adv_h1 = hits.0 as f64 / trials as f64;
    let adv_h2 = hits.1 as f64 / trials as f64;
    Ok(LowerBoundReport {
        n,
        q: tester.probe_budget(),
        tester: tester.name().to_string(),
        trials,
        adv_h1,
        adv_h2,
        ratio: adv_h1 / adv_h2.max(1.0 / trials as f64),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::make_h2_at;

    #[test]
    fn neighbor_validators() {
        assert!(NeighborPair::new(vec![1, 2, 3], vec![1, 5, 3], NeighborKind::DatasetEntry).is_ok());
        assert!(NeighborPair::new(vec![1, 2, 3], vec![1, 2, 3], NeighborKind::DatasetEntry).is_err());
        assert!(NeighborPair::new(vec![1, 2, 3], vec![0, 5, 3], NeighborKind::DatasetEntry).is_err());
        assert!(NeighborPair::new(vec![1, 2], vec![1, 2, 3], NeighborKind::DatasetEntry).is_err());
        assert!(NeighborPair::new(vec![1, 2, 3], vec![2, 3, 9], NeighborKind::SortedMultiset).is_ok());
        assert!(NeighborPair::new(vec![1, 2, 3], vec![4, 5, 6], NeighborKind::SortedMultiset).is_err());
        assert!(NeighborPair::new(vec![3, 2, 1], vec![3, 2, 0], NeighborKind::SortedMultiset).is_err());
        assert!(NeighborPair::new(vec![1, 1, 2], vec![1, 2, 2], NeighborKind::SortedMultiset).is_ok());

        let g = DenseGraph::cycle(6).unwrap();
        let mut edges = g.edges();
        edges.push((0, 3));
        let h = DenseGraph::from_edges(6, &edges).unwrap();
        assert!(NeighborPair::new(g.clone(), h, NeighborKind::GraphNode).is_ok());
        let k = DenseGraph::from_edges(6, &[(0, 1), (2, 3)]).unwrap();
        assert!(NeighborPair::new(g, k, NeighborKind::GraphNode).is_err());
        assert!(canonical_tester_pair(40, 1).is_ok());
        assert!(canonical_locate_pair(64).is_ok());
        assert!(canonical_search_pair(64).is_ok());
    }

    fn marker_pair() -> NeighborPair<Vec<u32>> {
        let x0 = vec![0u32; 32];
        let mut x1 = x0.clone();
        x1[3] = 1;
        NeighborPair::new(x0, x1, NeighborKind::DatasetEntry).unwrap()
    }

    #[test]
    fn constant_adversary_has_no_advantage() {
        let mech = |x: &Vec<u32>, _: &mut TrialRng| Ok(baselines::first_hit_scan(x, 1));
        let adv = measure_advantage(
            || ConstantAdversary {
                pair: marker_pair(),
                answer: false,
            },
            &mech,
            500,
            1,
        )
        .unwrap();
        assert_eq!(adv.advantage, 0.0);
    }

    #[test]
    fn leaky_scan_is_fully_distinguishable() {
        let mech = |x: &Vec<u32>, _: &mut TrialRng| Ok(baselines::first_hit_scan(x, 1));
        let adv = measure_advantage(|| LengthAdversary { pair: marker_pair(), cut: 4 }, &mech, 500, 2).unwrap();
        // b = 1 stops at address 3 (4 reads), b = 0 reads all 32
        assert_eq!(adv.p_one_given_0, 1.0);
        assert_eq!(adv.p_one_given_1, 0.0);
        assert_eq!(adv.advantage, 1.0);
    }

    #[test]
    fn non_neighbors_are_rejected_by_the_experiment() {
        let mut bad = ConstantAdversary {
            pair: marker_pair(),
            answer: true,
        };
        bad.pair.x1[5] = 1;
        let mech = |x: &Vec<u32>, _: &mut TrialRng| Ok(baselines::full_scan(x, 1));
        assert!(matches!(
            run_experiment(&mut bad, &mech, true, &mut trial_rng(0, 0)),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn full_scan_estimates_zero() {
        let mech = |x: &Vec<u32>, _: &mut TrialRng| Ok(baselines::full_scan(x, 1));
        let cfg = AuditConfig::new(Projection::Full, 0.0, 100_000, 3);
        let est = estimate_privacy(&mech, &marker_pair(), &cfg).unwrap();
        assert_eq!(est.eps_hat, 0.0);
        assert!(est.ci_high <= 0.05, "{}", est.ci_high);
        assert_eq!(est.ci_low, 0.0);
        assert!(est.warnings.iter().any(|w| w.contains("degenerate")));
    }

    #[test]
    fn marker_padding_is_infinite() {
        let mech = |x: &Vec<u32>, _: &mut TrialRng| Ok(baselines::marker_padding(x, 1));
        let cfg = AuditConfig::new(Projection::LengthOnly, 0.0, 10_000, 4);
        let est = estimate_privacy(&mech, &marker_pair(), &cfg).unwrap();
        assert!(est.eps_hat.is_infinite());
        assert!(est.ci_high.is_infinite());
        let json = serde_json::to_value(&est).unwrap();
        assert_eq!(json["ci_high"], "inf");
    }

    #[test]
    fn estimator_needs_enough_trials() {
        let mech = |x: &Vec<u32>, _: &mut TrialRng| Ok(baselines::full_scan(x, 1));
        let cfg = AuditConfig::new(Projection::Full, 0.0, 999, 3);
        assert!(estimate_privacy(&mech, &marker_pair(), &cfg).is_err());
    }

    #[test]
    fn estimator_recovers_randomized_response() {
        // token = bit flipped with probability 1/(1+e), true ε = 1
        let p = 1.0 / (1.0 + 1f64.exp());
        let mut rng = trial_rng(5, 0);
        let n = 200_000;
        let t0: Vec<u8> = (0..n).map(|_| (rng.gen::<f64>() < p) as u8).collect();
        let t1: Vec<u8> = (0..n).map(|_| (rng.gen::<f64>() >= p) as u8).collect();
        let est = estimate_from_tokens(&t0, &t1, 0.0, 30);
        assert!((est.eps_hat - 1.0).abs() < 0.05, "{est:?}");
        assert!(est.ci_low <= est.eps_hat && est.eps_hat <= est.ci_high);
    }

    #[test]
    fn estimate_is_monotone_in_delta() {
        let p = 0.3;
        let mut rng = trial_rng(6, 0);
        let t0: Vec<u8> = (0..20_000).map(|_| rng.gen_range(0..4) + (rng.gen::<f64>() < p) as u8).collect();
        let t1: Vec<u8> = (0..20_000).map(|_| rng.gen_range(0..4)).collect();
        let mut last = f64::INFINITY;
        for k in 0..20 {
            let e = estimate_from_tokens(&t0, &t1, k as f64 * 0.02, 30).eps_hat;
            assert!(e <= last);
            last = e;
        }
    }

    #[test]
    fn sparse_unique_tokens_do_not_fake_leakage() {
        // identical laws over a huge token space
        let mut rng = trial_rng(7, 0);
        let t0: Vec<u64> = (0..10_000).map(|_| rng.gen()).collect();
        let t1: Vec<u64> = (0..10_000).map(|_| rng.gen()).collect();
        let est = estimate_from_tokens(&t0, &t1, 0.0, 30);
        assert!(est.eps_hat < 0.1, "{est:?}");
    }

    /// Brute-force distance by breadth-first search.
    fn bfs_distance(g: &BoundedDegreeGraph, a: usize, b: usize) -> usize {
        let mut dist = vec![usize::MAX; g.n()];
        dist[a] = 0;
        let mut queue = std::collections::VecDeque::from([a]);
        while let Some(v) = queue.pop_front() {
            for u in g.neighbors(v) {
                if dist[u] == usize::MAX {
                    dist[u] = dist[v] + 1;
                    queue.push_back(u);
                }
            }
        }
        dist[b]
    }

    #[test]
    fn within_two_matches_bfs() {
        let path = BoundedDegreeGraph::from_edges(6, 2, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)]).unwrap();
        let close: Vec<(usize, usize)> = (0..6)
            .flat_map(|a| ((a + 1)..6).map(move |b| (a, b)))
            .filter(|&(a, b)| within_two(&path, a, b))
            .collect();
        assert_eq!(close, vec![(0, 1), (0, 2), (1, 2), (1, 3), (2, 3), (2, 4), (3, 4), (3, 5), (4, 5)]);
        let mut rng = trial_rng(8, 0);
        let (h1, perm) = random_isomorphism(&cycle_graph(30).unwrap(), &mut rng);
        let (h2, _, _) = make_h2(&h1, &perm, &mut rng).unwrap();
        for g in [&h1, &h2] {
            for a in 0..30 {
                for b in 0..30 {
                    if a != b {
                        assert_eq!(within_two(g, a, b), bfs_distance(g, a, b) <= 2);
                    }
                }
            }
        }
    }

    #[test]
    fn distinguisher_cases() {
        let n = 30;
        let perm: Vec<usize> = (0..n).collect();
        let h1 = cycle_graph(n).unwrap();
        let h2 = make_h2_at(&h1, &perm, 5, 15).unwrap();
        assert!(distinguisher(&[5, 6], &h1, &h2, &perm, 5));
        assert!(distinguisher(&[7, 20, 5], &h1, &h2, &perm, 5));
        assert!(!distinguisher(&[5, 4], &h1, &h2, &perm, 5));
        // u_i, u_j adjacent in H2
        assert!(!distinguisher(&[5, 15], &h1, &h2, &perm, 5));
        assert!(!distinguisher(&[0, 10, 20], &h1, &h2, &perm, 5));
        assert!(!distinguisher(&[6, 7, 5], &h1, &h2, &perm, 5));
    }

    #[test]
    fn naive_tester_leaks_fixed_tester_does_not() {
        let naive = lowerbound_demo(99, &NaiveWalkTester { q: 6 }, 100_000, 1).unwrap();
        assert!((naive.adv_h1 - 1.0 / 99.0).abs() < 0.002, "{naive:?}");
        assert!(naive.adv_h2 < 0.001, "{naive:?}");
        let fixed = lowerbound_demo(99, &FixedProbeTester { q: 6 }, 100_000, 1).unwrap();
        assert_eq!(fixed.adv_h1, fixed.adv_h2);
        assert!(lowerbound_demo(100, &NaiveWalkTester { q: 6 }, 10, 1).is_err());
    }

    #[test]
    fn naive_tester_rejects_triangles() {
        let mut g = crate::graphs::triangles_graph(9).unwrap();
        assert!(!NaiveWalkTester { q: 6 }.run(&mut g, &mut trial_rng(0, 0)));
        let mut c = cycle_graph(9).unwrap();
        assert!(NaiveWalkTester { q: 6 }.run(&mut c, &mut trial_rng(0, 0)));
    }
}
