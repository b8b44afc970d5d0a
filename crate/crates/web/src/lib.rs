//! Browser bindings for the demo page in `www/`.
//!
//! Every export takes plain numbers and returns a JSON string; errors come
//! back as `{"error": "..."}` so the page never has to catch exceptions.

use rand::Rng;
use serde::Serialize;
use serde_json::{json, Value};
use wasm_bindgen::prelude::wasm_bindgen;

use oblab::locate::{do_locate, LocateParams, PredicateDataset};
use oblab::prefix::{do_search, SearchParams, SortedDataset};
use oblab::rng::trial_rng;
use oblab::trace::AccessKind;
use oblab::verifier::{lowerbound_demo, FixedProbeTester, NaiveWalkTester};

fn respond(result: Result<Value, String>) -> String {
    match result {
        Ok(v) => v.to_string(),
        Err(e) => json!({ "error": e }).to_string(),
    }
}

#[derive(Serialize)]
struct Window {
    min: usize,
    max: usize,
    chunk_index: usize,
    noise: f64,
}

/// One noisy search for rank `rank` in `0, 2, 4, ..`: the window of every
/// iteration and the addresses read, one row per iteration plus a last row for
/// the final scan.
pub fn search_walk(n: usize, epsilon: f64, beta: f64, rank: usize, seed: u64) -> Result<Value, String> {
    if rank > n {
        return Err(format!("rank {rank} is larger than n = {n}"));
    }
    let params = SearchParams::new(epsilon, beta, n).map_err(|e| e.to_string())?;
    let values: Vec<f64> = (0..n).map(|i| 2.0 * i as f64).collect();
    let a = 2.0 * rank as f64 - 1.0;
    let mut x = SortedDataset::new(values).map_err(|e| e.to_string())?;
    let out = do_search(&mut x, a, &params, &mut trial_rng(seed, 0)).map_err(|e| e.to_string())?;
    let windows: Vec<Window> = out
        .iterations
        .iter()
        .map(|it| Window { min: it.min, max: it.max, chunk_index: it.chunk_index, noise: it.noise })
        .collect();
    let mut reads: Vec<usize> = x
        .trace()
        .events()
        .iter()
        .filter(|e| e.kind == AccessKind::Read)
        .map(|e| e.address)
        .collect();
    // every iteration reads exactly k cells
    let scan = reads.split_off(out.iterations.len() * params.k);
    let mut rows: Vec<Vec<usize>> = reads.chunks(params.k).map(<[usize]>::to_vec).collect();
    rows.push(scan);
    Ok(json!({
        "n": n,
        "k": params.k,
        "width": params.width,
        "rank": rank,
        "index": out.index,
        "correct": out.index == rank,
        "windows": windows,
        "final_window": [out.final_window.0, out.final_window.1],
        "reads": rows,
    }))
}

/// Histogram of the number of records read by the existence check over
/// `trials` random datasets with match probability `p`.
pub fn locate_histogram(n: usize, p: f64, epsilon: f64, delta: f64, trials: usize, seed: u64) -> Result<Value, String> {
    if !(0.0..=1.0).contains(&p) {
        return Err(format!("p must be in [0, 1], got {p}"));
    }
    if trials == 0 {
        return Err("trials must be positive".into());
    }
    let params = LocateParams::new(epsilon, delta, n).map_err(|e| e.to_string())?;
    let mut counts: std::collections::BTreeMap<usize, usize> = Default::default();
    let mut wrong = 0;
    for t in 0..trials as u64 {
        let mut rng = trial_rng(seed, t);
        let data: Vec<bool> = (0..n).map(|_| rng.gen_bool(p)).collect();
        let mut x = PredicateDataset::new(data, |b: &bool| *b).map_err(|e| e.to_string())?;
        let truth = x.exists();
        let out = do_locate(&mut x, &params, &mut rng).map_err(|e| e.to_string())?;
        wrong += (out.output != truth) as usize;
        *counts.entry(out.probes).or_default() += 1;
    }
    let bins: Vec<[usize; 2]> = counts.into_iter().map(|(k, v)| [k, v]).collect();
    Ok(json!({
        "n": n,
        "threshold": params.threshold,
        "fallback": params.fallback_probes(),
        "trials": trials,
        "wrong": wrong,
        "bins": bins,
    }))
}

/// Distinguishing advantage of the naive and fixed connectivity testers on
/// the permuted cycle and its two-cycle neighbor.
pub fn lowerbound(n: usize, q: usize, trials: usize, seed: u64) -> Result<Value, String> {
    let naive = lowerbound_demo(n, &NaiveWalkTester { q }, trials, seed).map_err(|e| e.to_string())?;
    let fixed = lowerbound_demo(n, &FixedProbeTester { q }, trials, seed).map_err(|e| e.to_string())?;
    Ok(json!({ "naive": naive, "fixed": fixed }))
}

#[wasm_bindgen]
pub fn search_demo(n: u32, epsilon: f64, beta: f64, rank: u32, seed: u32) -> String {
    respond(search_walk(n as usize, epsilon, beta, rank as usize, seed as u64))
}

#[wasm_bindgen]
pub fn locate_demo(n: u32, p: f64, epsilon: f64, delta: f64, trials: u32, seed: u32) -> String {
    respond(locate_histogram(n as usize, p, epsilon, delta, trials as usize, seed as u64))
}

#[wasm_bindgen]
pub fn lowerbound_attack(n: u32, q: u32, trials: u32, seed: u32) -> String {
    respond(lowerbound(n as usize, q as usize, trials as usize, seed as u64))
}
