//! Noisy chunked binary search and prefix sums over a sorted traced dataset.
//!
//! Each loop iteration probes `k` evenly spaced records of the current window
//! `[min, max]`, finds the last chunk boundary `≤ a`, perturbs that chunk index
//! with Laplace noise and keeps a window of `2w + 1` chunks around it. Once the
//! window holds at most `k` records it is scanned in full. The window always
//! loses more than a quarter of its width per iteration, so the loop runs at
//! most `⌈2.5·log₂ n⌉` times.
//!
//! Positions are 1-based (`x_1 ≤ ... ≤ x_n`, address `p - 1`); the answer is
//! the rank `max{p : x_p ≤ a}`, or 0 when every record exceeds `a`.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::noise::{laplace, truncated_laplace, LaplaceScale};
use crate::trace::{AccessTrace, TracedStore};

/// Sorted records in traced memory.
#[derive(Debug, Clone)]
pub struct SortedDataset {
    store: TracedStore<f64>,
}

impl SortedDataset {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::Data("NaN record".into()));
        }
        if values.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Data("records are not in nondecreasing order".into()));
        }
        Ok(Self::new_unchecked(values))
    }

    /// Skips the order check; unsorted input is then only noticed (if at all)
    /// by the final window scan.
    pub fn new_unchecked(values: Vec<f64>) -> Self {
        Self {
            store: TracedStore::from_vec(values),
        }
    }

    pub fn len(&self) -> usize {
        self.store.capacity()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn values(&self) -> &[f64] {
        self.store.untraced()
    }

    pub fn trace(&self) -> &AccessTrace {
        self.store.trace()
    }

    pub fn take_trace(&mut self) -> AccessTrace {
        self.store.take_trace()
    }

    pub(crate) fn store_mut(&mut self) -> &mut TracedStore<f64> {
        &mut self.store
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SearchParams {
    pub epsilon: f64,
    pub beta: f64,
    pub n: usize,
    /// `ε / (2.5·log₂ n)`, spent by each loop iteration.
    pub eps_prime: f64,
    /// `β / (2.5·log₂ n)`, failure allowance per iteration.
    pub beta_prime: f64,
    /// Noise half-width in chunks, `ln(1/β′)/ε′`.
    pub width: f64,
    /// Probes per iteration, `⌈4·ln(1/β′)/ε′⌉`.
    pub k: usize,
}

impl SearchParams {
    pub fn new(epsilon: f64, beta: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::param(format!("search needs n >= 2, got {n}")));
        }
        let log_n = (n as f64).log2();
        if !(epsilon.is_finite() && epsilon > 0.0 && epsilon < log_n * log_n) {
            return Err(Error::param(format!(
                "epsilon must be in (0, log2(n)^2 = {}), got {epsilon}",
                log_n * log_n
            )));
        }
        Self::derive(epsilon, beta, n)
    }

    /// Like [`SearchParams::new`] without the upper limit on `ε`; used for
    /// short suffixes inside a larger computation.
    pub(crate) fn derive(epsilon: f64, beta: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::param(format!("search needs n >= 2, got {n}")));
        }
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::param(format!("epsilon must be positive, got {epsilon}")));
        }
        let log_n = (n as f64).log2();
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::param(format!("beta must be in (0, 1), got {beta}")));
        }
        let eps_prime = epsilon / (2.5 * log_n);
        let beta_prime = beta / (2.5 * log_n);
        let log_inv = (1.0 / beta_prime).ln();
        let width = log_inv / eps_prime;
        let k = (4.0 * log_inv / eps_prime).ceil() as usize;
        if k < 4 || width <= 1.0 {
            return Err(Error::param(format!("degenerate search parameters: k={k}, w={width}")));
        }
        Ok(Self {
            epsilon,
            beta,
            n,
            eps_prime,
            beta_prime,
            width,
            k,
        })
    }

    /// `⌈2.5·log₂ n⌉`.
    pub fn max_iterations(&self) -> usize {
        (2.5 * (self.n as f64).log2()).ceil() as usize
    }

    /// `k` probes per iteration plus at most `k` in the final scan.
    pub fn max_probes(&self) -> usize {
        self.max_iterations() * self.k + self.k
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum NoiseMode {
    Laplace,
    /// Noise clamped to `±w`; the window then always contains the answer.
    Truncated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SearchIteration {
    pub min: usize,
    pub max: usize,
    /// Real chunk width `(max − min)/k`.
    pub chunk: f64,
    /// Last chunk boundary `≤ a`, in `0..=k`.
    pub chunk_index: usize,
    pub noise: f64,
    pub next_min: usize,
    pub next_max: usize,
}

impl SearchIteration {
    pub fn shrink(&self) -> f64 {
        (self.next_max - self.next_min) as f64 / (self.max - self.min) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchOutcome {
    pub index: usize,
    pub iterations: Vec<SearchIteration>,
    /// Reads issued by this search.
    pub probes: usize,
    /// Every noise draw satisfied `|noise| < w`.
    pub noise_within_width: bool,
    /// Final window `(min, max)` that was scanned.
    pub final_window: (usize, usize),
}

pub(crate) fn search_range<R: Rng + ?Sized>(
    store: &mut TracedStore<f64>,
    offset: usize,
    n: usize,
    a: f64,
    params: &SearchParams,
    mode: NoiseMode,
    rng: &mut R,
) -> Result<SearchOutcome> {
    if offset + n > store.capacity() {
        return Err(Error::param("search range exceeds the dataset"));
    }
    let k = params.k;
    let w = params.width;
    let scale = LaplaceScale::for_epsilon(params.eps_prime)?;
    let reads_before = store.trace().reads();
    let read = |store: &mut TracedStore<f64>, position: usize| store.read(offset + position - 1);

    let (mut min, mut max) = (0usize, n);
    let mut iterations = Vec::new();
    let mut within = true;
    while max - min > k {
        let span = max - min;
        let mut chunk_index = 0;
        for i in 1..=k {
            // integer floor of min + i·span/k; the k-th probe lands on max
            let y = read(store, min + i * span / k);
            if y <= a {
                chunk_index = i;
            }
        }
        let noise = match mode {
            NoiseMode::Laplace => laplace(scale, rng),
            NoiseMode::Truncated => truncated_laplace(scale, w, rng)?,
        };
        within &= noise.abs() < w;
        let chunk = span as f64 / k as f64;
        let base = min as f64;
        let lo = base + ((chunk_index as f64 + noise - w) * chunk).floor();
        let hi = base + ((chunk_index as f64 + noise + w + 1.0) * chunk).floor();
        let next_min = lo.clamp(0.0, n as f64) as usize;
        let next_max = (hi.clamp(0.0, n as f64) as usize).max(next_min);
        iterations.push(SearchIteration {
            min,
            max,
            chunk,
            chunk_index,
            noise,
            next_min,
            next_max,
        });
        min = next_min;
        max = next_max;
    }

    let mut index = min;
    let mut prev = f64::NEG_INFINITY;
    for p in (min + 1)..=max {
        let v = read(store, p);
        if v < prev {
            return Err(Error::Data(format!("records out of order at position {p}")));
        }
        prev = v;
        if v <= a {
            index = p;
        }
    }
    Ok(SearchOutcome {
        index,
        iterations,
        probes: store.trace().reads() - reads_before,
        noise_within_width: within,
        final_window: (min, max),
    })
}

/// Rank of `a` in `x`, correct with probability at least `1 − β`.
pub fn do_search<R: Rng + ?Sized>(x: &mut SortedDataset, a: f64, params: &SearchParams, rng: &mut R) -> Result<SearchOutcome> {
    check_size(x, params)?;
    let n = x.len();
    search_range(&mut x.store, 0, n, a, params, NoiseMode::Laplace, rng)
}

/// [`do_search`] with noise truncated to `±w`: never wrong, at the price of a
/// `δ` term in the privacy guarantee.
pub fn search_exact_variant<R: Rng + ?Sized>(
    x: &mut SortedDataset,
    a: f64,
    params: &SearchParams,
    rng: &mut R,
) -> Result<SearchOutcome> {
    check_size(x, params)?;
    let n = x.len();
    search_range(&mut x.store, 0, n, a, params, NoiseMode::Truncated, rng)
}

fn check_size(x: &SortedDataset, params: &SearchParams) -> Result<()> {
    if x.len() != params.n {
        return Err(Error::param(format!("params built for n={}, dataset has {}", params.n, x.len())));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrefixOutcome {
    pub index: usize,
    /// Number of leading records scanned, `Î ≥ index`.
    pub padded_len: usize,
    pub sum: f64,
    /// Reads of the search and the padded scan together.
    pub probes: usize,
    /// `Î` had to be clamped into `[index, n]`.
    pub clamped: bool,
    pub search: SearchOutcome,
}

/// Sum of all records `≤ a`. After the search, scans the first
/// `Î = ⌈I + Lap(1/ε) + ln(1/δ)/ε⌉` records (clamped to `[I, n]`) and adds
/// up only the first `I`.
pub fn do_prefix_sum<R: Rng + ?Sized>(
    x: &mut SortedDataset,
    a: f64,
    epsilon: f64,
    delta: f64,
    params: &SearchParams,
    rng: &mut R,
) -> Result<PrefixOutcome> {
    let scale = LaplaceScale::for_epsilon(epsilon)?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::param(format!("delta must be in (0, 1), got {delta}")));
    }
    let reads_before = x.trace().reads();
    let search = do_search(x, a, params, rng)?;
    let index = search.index;
    let n = x.len();
    let raw = (index as f64 + laplace(scale, rng) + (1.0 / delta).ln() / epsilon).ceil();
    let padded = raw.clamp(index as f64, n as f64) as usize;
    let clamped = raw < index as f64 || raw > n as f64;
    let mut sum = 0.0;
    for address in 0..padded {
        let v = x.store.read(address);
        if address < index {
            sum += v;
        }
    }
    Ok(PrefixOutcome {
        index,
        padded_len: padded,
        sum,
        probes: x.trace().reads() - reads_before,
        clamped,
        search,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::trial_rng;
    use proptest::prelude::*;
    use rand::Rng;

    /// Independent oracle: plain scan for the last position with `x_p ≤ a`.
    fn rank_oracle(values: &[f64], a: f64) -> usize {
        let mut r = 0;
        for (i, &v) in values.iter().enumerate() {
            if v <= a {
                r = i + 1;
            }
        }
        r
    }

    fn sorted(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = trial_rng(seed, 77);
        let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(0..(4 * n)) as f64).collect();
        v.sort_by(f64::total_cmp);
        v
    }

    #[test]
    fn params_at_4096() {
        let p = SearchParams::new(2.0, 0.01, 4096).unwrap();
        assert!((p.eps_prime - 2.0 / 30.0).abs() < 1e-15);
        assert!((p.beta_prime - 0.01 / 30.0).abs() < 1e-15);
        assert_eq!(p.k, (4.0 * 3000f64.ln() * 15.0).ceil() as usize);
        assert_eq!(p.max_iterations(), 30);
        assert!(SearchParams::new(144.0, 0.01, 4096).is_err());
        assert!(SearchParams::new(1.0, 1.0, 4096).is_err());
        assert!(SearchParams::new(1.0, 0.1, 1).is_err());
    }

    #[test]
    fn extremes() {
        let p = SearchParams::new(2.0, 0.01, 4096).unwrap();
        let v = sorted(4096, 1);
        for seed in 0..20 {
            let mut x = SortedDataset::new(v.clone()).unwrap();
            assert_eq!(do_search(&mut x, v[0] - 1.0, &p, &mut trial_rng(seed, 0)).unwrap().index, 0);
            let mut x = SortedDataset::new(v.clone()).unwrap();
            assert_eq!(do_search(&mut x, v[4095] + 1.0, &p, &mut trial_rng(seed, 1)).unwrap().index, 4096);
        }
    }

    #[test]
    fn shrink_iteration_and_probe_bounds() {
        let p = SearchParams::new(2.0, 0.01, 4096).unwrap();
        for seed in 0..300 {
            let v = sorted(4096, seed);
            let a = v[(seed as usize * 131) % 4096] + 0.5;
            let mut x = SortedDataset::new(v.clone()).unwrap();
            let out = do_search(&mut x, a, &p, &mut trial_rng(seed, 2)).unwrap();
            assert!(!out.iterations.is_empty());
            assert!(out.iterations.len() <= p.max_iterations());
            assert!(out.probes <= p.max_probes());
            assert_eq!(out.probes, x.trace().reads());
            for it in &out.iterations {
                assert!(it.shrink() <= 0.75, "{it:?}");
            }
            if out.noise_within_width {
                assert_eq!(out.index, rank_oracle(&v, a));
            }
        }
    }

    #[test]
    fn exact_variant_full_sweep() {
        let n = 4096;
        let p = SearchParams::new(2.0, 0.01, n).unwrap();
        let v: Vec<f64> = (1..=n).map(|i| (2 * i) as f64).collect();
        let mut rng = trial_rng(9, 9);
        for r in 0..=n {
            let a = (2 * r + 1) as f64;
            let mut x = SortedDataset::new(v.clone()).unwrap();
            let out = search_exact_variant(&mut x, a, &p, &mut rng).unwrap();
            assert_eq!(out.index, r);
            assert!(out.iterations.len() <= p.max_iterations());
        }
    }

    #[test]
    fn unsorted_input_detected_in_final_scan() {
        let p = SearchParams::new(1.0, 0.001, 8).unwrap();
        let mut x = SortedDataset::new_unchecked(vec![1.0, 2.0, 5.0, 3.0, 6.0, 7.0, 8.0, 9.0]);
        assert!(matches!(do_search(&mut x, 4.0, &p, &mut trial_rng(0, 0)), Err(Error::Data(_))));
        assert!(SortedDataset::new(vec![2.0, 1.0]).is_err());
        assert!(SortedDataset::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn prefix_sum_small() {
        let p = SearchParams::new(1.0, 0.001, 4).unwrap();
        let mut x = SortedDataset::new(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let out = do_prefix_sum(&mut x, 2.5, 1.0, 0.01, &p, &mut trial_rng(0, 0)).unwrap();
        assert_eq!(out.index, 2);
        assert_eq!(out.sum, 3.0);
        assert!(out.padded_len >= 2 && out.padded_len <= 4);

        let mut x = SortedDataset::new(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let out = do_prefix_sum(&mut x, 0.5, 1.0, 0.01, &p, &mut trial_rng(0, 1)).unwrap();
        assert_eq!(out.index, 0);
        assert_eq!(out.sum, 0.0);
    }

    #[test]
    fn prefix_sum_matches_direct_summation_when_search_is_right() {
        let n = 2048;
        let p = SearchParams::new(2.0, 0.01, n).unwrap();
        for seed in 0..100 {
            let v = sorted(n, seed + 1000);
            let a = v[(seed as usize * 37) % n];
            let mut x = SortedDataset::new(v.clone()).unwrap();
            let out = do_prefix_sum(&mut x, a, 1.0, 0.01, &p, &mut trial_rng(seed, 3)).unwrap();
            if out.index == rank_oracle(&v, a) {
                let direct: f64 = v.iter().filter(|&&y| y <= a).sum();
                assert_eq!(out.sum, direct);
            }
            assert_eq!(out.probes, x.trace().reads());
        }
    }

    #[test]
    fn same_seed_same_trace() {
        let p = SearchParams::new(2.0, 0.01, 4096).unwrap();
        let v = sorted(4096, 5);
        let mut x1 = SortedDataset::new(v.clone()).unwrap();
        let mut x2 = SortedDataset::new(v).unwrap();
        do_search(&mut x1, 100.0, &p, &mut trial_rng(1, 1)).unwrap();
        do_search(&mut x2, 100.0, &p, &mut trial_rng(1, 1)).unwrap();
        assert_eq!(x1.trace(), x2.trace());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn exact_variant_never_errs(
            raw in proptest::collection::vec(-1000i32..1000, 2..3000),
            a in -1100i32..1100,
            seed in any::<u64>(),
        ) {
            let mut v: Vec<f64> = raw.into_iter().map(f64::from).collect();
            v.sort_by(f64::total_cmp);
            let n = v.len();
            let log_n = (n as f64).log2();
            let eps = (4.0f64).min(0.9 * log_n * log_n);
            let p = SearchParams::new(eps, 0.01, n).unwrap();
            let mut x = SortedDataset::new(v.clone()).unwrap();
            let out = search_exact_variant(&mut x, a as f64 + 0.5, &p, &mut trial_rng(seed, 0)).unwrap();
            prop_assert_eq!(out.index, rank_oracle(&v, a as f64 + 0.5));
            for it in &out.iterations {
                prop_assert!(it.shrink() <= 0.75);
            }
        }
    }
}
