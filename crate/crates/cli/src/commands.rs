use std::fs;
use std::io::Write;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use oblab::dense_tester::{default_sample_size, do_tester, BaseTesterConfig, BipartitenessTester, DoTesterParams};
use oblab::graphs::{DenseGraph, GraphFixture};
use oblab::locate::{do_locate, LocateParams, PredicateDataset};
use oblab::multiquery::MultiSearchState;
use oblab::prefix::{do_prefix_sum, do_search, search_exact_variant, SearchParams, SortedDataset};
use oblab::rng::{derive_seed, trial_rng, TrialRng};
use oblab::trace::{project_trace, AccessTrace, Projection};
use oblab::verifier::{
    canonical_locate_pair, canonical_search_pair, canonical_tester_pair, estimate_privacy, locate_mechanism,
    lowerbound_demo, search_mechanism, tester_mechanism, AuditConfig, ConnectivityTester, FixedProbeTester,
    NaiveWalkTester,
};

use crate::{
    CliError, CliResult, DumpArgs, Fixture, LocateArgs, LowerArgs, MultiArgs, PrefixArgs, ProjectionArg, SearchArgs,
    Target, TesterArgs, TesterKind, VerifyArgs,
};

pub struct Context {
    pub seed: u64,
    pub pool: rayon::ThreadPool,
}

impl Context {
    /// Runs `f` for every trial index on the worker pool; results come back
    /// in trial order.
    fn trials<T, F>(&self, trials: usize, f: F) -> CliResult<Vec<T>>
    where
        T: Send,
        F: Fn(u64, &mut TrialRng) -> CliResult<T> + Sync,
    {
        self.pool.install(|| {
            (0..trials as u64)
                .into_par_iter()
                .map(|t| f(t, &mut trial_rng(self.seed, t)))
                .collect()
        })
    }
}

fn required<T>(value: Option<T>, flag: &str) -> CliResult<T> {
    value.ok_or_else(|| CliError::Invalid(format!("missing --{flag}")))
}

fn positive_trials(trials: usize) -> CliResult<usize> {
    if trials == 0 {
        Err(CliError::Invalid("--trials must be positive".into()))
    } else {
        Ok(trials)
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
}

fn write_rows<R: Serialize>(out: &mut dyn Write, rows: &[R]) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(out: &mut dyn Write, value: &T) -> CliResult<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}

fn random_sorted(n: usize, rng: &mut TrialRng) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(0..(10 * n as u64)) as f64).collect();
    v.sort_by(f64::total_cmp);
    v
}

fn rank(values: &[f64], a: f64) -> usize {
    values.iter().filter(|&&v| v <= a).count()
}

#[derive(Serialize)]
struct TesterRow {
    trial: u64,
    output: u8,
    probes: usize,
}

fn tester_setup(a: &TesterArgs, n: usize) -> CliResult<(BaseTesterConfig, DoTesterParams)> {
    let params = DoTesterParams::new(required(a.epsilon, "epsilon")?, a.delta)?;
    let config = BaseTesterConfig::new(a.beta, a.gamma)?;
    let c = match a.sample_size {
        Some(c) => c,
        None => default_sample_size(a.gamma).min(n / (params.rounds + 1)),
    };
    if c == 0 {
        return Err(CliError::Invalid(format!(
            "n = {n} is too small for {} tester rounds",
            params.rounds
        )));
    }
    Ok((config.with_sample_size(c)?, params))
}

pub fn tester_bench(ctx: &Context, a: &TesterArgs, out: &mut dyn Write) -> CliResult<()> {
    let trials = positive_trials(a.trials)?;
    let fixed = match a.fixture {
        Fixture::File => {
            let fixture: GraphFixture = read_json(required(a.file.as_deref(), "file")?)?;
            Some(fixture.to_dense()?)
        }
        Fixture::Complete => Some(DenseGraph::complete(required(a.n, "n")?)),
        Fixture::Bipartite => None,
    };
    let n = match &fixed {
        Some(g) => g.n(),
        None => required(a.n, "n")?,
    };
    let (config, params) = tester_setup(a, n)?;
    let need = params.min_vertices(config.sample_size);
    if n < need {
        return Err(CliError::Invalid(format!(
            "n = {n} is below the {need} vertices needed by {} rounds of {} samples",
            params.rounds, config.sample_size
        )));
    }
    let base = BipartitenessTester { config };
    let rows = ctx.trials(trials, |t, rng| {
        let out = match &fixed {
            Some(g) => do_tester(g, &base, &params, rng)?,
            None => {
                let (g, _) = DenseGraph::random_bipartite(n, 0.5, rng);
                do_tester(&g, &base, &params, rng)?
            }
        };
        Ok(TesterRow {
            trial: t,
            output: out.output as u8,
            probes: out.probes(),
        })
    })?;
    write_rows(out, &rows)
}

#[derive(Serialize)]
struct LocateRow {
    trial: u64,
    output: u8,
    probes: usize,
    halted_at_checkpoint: Option<usize>,
}

fn check_probability(p: f64) -> CliResult<f64> {
    if (0.0..=1.0).contains(&p) {
        Ok(p)
    } else {
        Err(CliError::Invalid(format!("--p must be in [0, 1], got {p}")))
    }
}

pub fn locate_bench(ctx: &Context, a: &LocateArgs, out: &mut dyn Write) -> CliResult<()> {
    let trials = positive_trials(a.trials)?;
    let n = required(a.n, "n")?;
    let p = check_probability(required(a.p, "p")?)?;
    let params = LocateParams::new(required(a.epsilon, "epsilon")?, required(a.delta, "delta")?, n)?;
    let rows = ctx.trials(trials, |t, rng| {
        let data: Vec<bool> = (0..n).map(|_| rng.gen_bool(p)).collect();
        let mut x = PredicateDataset::new(data, |b: &bool| *b)?;
        let o = do_locate(&mut x, &params, rng)?;
        Ok(LocateRow {
            trial: t,
            output: o.output as u8,
            probes: o.probes,
            halted_at_checkpoint: o.halted_at,
        })
    })?;
    write_rows(out, &rows)
}

#[derive(Serialize)]
struct SearchRow {
    trial: u64,
    correct: u8,
    iterations: usize,
    probes: usize,
}

pub fn search_bench(ctx: &Context, a: &SearchArgs, out: &mut dyn Write) -> CliResult<()> {
    let trials = positive_trials(a.trials)?;
    let n = required(a.n, "n")?;
    let params = SearchParams::new(required(a.epsilon, "epsilon")?, required(a.beta, "beta")?, n)?;
    let rows = ctx.trials(trials, |t, rng| {
        let v = random_sorted(n, rng);
        let q = rng.gen_range(-1.0..(10 * n) as f64 + 1.0);
        let truth = rank(&v, q);
        let mut x = SortedDataset::new(v)?;
        let o = if a.exact {
            search_exact_variant(&mut x, q, &params, rng)?
        } else {
            do_search(&mut x, q, &params, rng)?
        };
        Ok(SearchRow {
            trial: t,
            correct: (o.index == truth) as u8,
            iterations: o.iterations.len(),
            probes: o.probes,
        })
    })?;
    write_rows(out, &rows)
}

#[derive(Serialize)]
struct PrefixReport {
    index: usize,
    sum: f64,
    probes: usize,
    padded_len: usize,
    search_epsilon: f64,
    padding_epsilon: f64,
    padding_delta: f64,
    beta: f64,
}

pub fn prefix(ctx: &Context, a: &PrefixArgs, out: &mut dyn Write) -> CliResult<()> {
    let values: Vec<f64> = read_json(required(a.file.as_deref(), "file")?)?;
    let epsilon = required(a.epsilon, "epsilon")?;
    let delta = required(a.delta, "delta")?;
    let beta = required(a.beta, "beta")?;
    let search_epsilon = a.search_epsilon.unwrap_or(epsilon);
    let mut x = SortedDataset::new(values)?;
    let params = SearchParams::new(search_epsilon, beta, x.len())?;
    let o = do_prefix_sum(&mut x, required(a.a, "a")?, epsilon, delta, &params, &mut trial_rng(ctx.seed, 0))?;
    write_json(
        out,
        &PrefixReport {
            index: o.index,
            sum: o.sum,
            probes: o.probes,
            padded_len: o.padded_len,
            search_epsilon,
            padding_epsilon: epsilon,
            padding_delta: delta,
            beta,
        },
    )
}

#[derive(Serialize)]
struct MultiRow {
    query: f64,
    answer: f64,
    oracle: f64,
    eps_spent: f64,
    search_invoked: u8,
    #[serde(rename = "M")]
    m: usize,
    t: usize,
}

pub fn multisearch_bench(ctx: &Context, a: &MultiArgs, out: &mut dyn Write) -> CliResult<()> {
    let n = required(a.n, "n")?;
    let epsilon = required(a.epsilon, "epsilon")?;
    let beta = required(a.beta, "beta")?;
    let mut data_rng = trial_rng(derive_seed(ctx.seed, 0), 0);
    let values = random_sorted(n, &mut data_rng);
    let queries: Vec<f64> = if a.queries == "random" {
        let mut q: Vec<f64> = (0..a.count)
            .map(|_| data_rng.gen_range(-1.0..(10 * n) as f64 + 1.0))
            .collect();
        q.sort_by(f64::total_cmp);
        q
    } else {
        read_json(Path::new(&a.queries))?
    };
    let mut st = MultiSearchState::new(SortedDataset::new(values.clone())?, epsilon)?;
    let mut rng = trial_rng(derive_seed(ctx.seed, 1), 0);
    let mut rows = Vec::with_capacity(queries.len());
    for q in queries {
        let ans = st.answer_query(q, beta, &mut rng)?;
        rows.push(MultiRow {
            query: q,
            answer: ans.answer,
            oracle: values.iter().filter(|&&v| v <= q).fold(0.0, |s, v| s + v),
            eps_spent: ans.eps_spent,
            search_invoked: ans.search_invoked as u8,
            m: ans.m,
            t: ans.t,
        });
    }
    write_rows(out, &rows)
}

fn projection_of(arg: ProjectionArg, block: usize) -> Projection {
    match arg {
        ProjectionArg::Full => Projection::Full,
        ProjectionArg::Addresses => Projection::AddressesOnly,
        ProjectionArg::Length => Projection::LengthOnly,
        ProjectionArg::Intervals => Projection::IntervalSummary { block },
    }
}

pub fn verify(ctx: &Context, a: &VerifyArgs, out: &mut dyn Write) -> CliResult<()> {
    let target = required(a.target, "target")?;
    let n = required(a.n, "n")?;
    let epsilon = required(a.epsilon, "epsilon")?;
    let paired_delta = a.delta * (1.0 + epsilon.exp());
    let estimate = match target {
        Target::Locate => {
            let params = LocateParams::new(epsilon, a.delta, n)?;
            let projection = projection_of(a.projection.unwrap_or(ProjectionArg::Length), 1);
            let cfg = AuditConfig::new(projection, a.audit_delta.unwrap_or(paired_delta), a.trials, ctx.seed);
            ctx.pool
                .install(|| estimate_privacy(&locate_mechanism(params), &canonical_locate_pair(n)?, &cfg))?
        }
        Target::Search => {
            let params = SearchParams::new(epsilon, a.beta, n)?;
            let (pair, q) = canonical_search_pair(n)?;
            let projection = projection_of(a.projection.unwrap_or(ProjectionArg::Intervals), params.k);
            let cfg = AuditConfig::new(projection, a.audit_delta.unwrap_or(0.0), a.trials, ctx.seed);
            ctx.pool.install(|| estimate_privacy(&search_mechanism(params, q), &pair, &cfg))?
        }
        Target::Tester => {
            let params = DoTesterParams::new(epsilon, a.delta)?;
            let c = default_sample_size(0.25).min(n / (params.rounds + 1));
            if c == 0 {
                return Err(CliError::Invalid(format!("n = {n} is too small for {} tester rounds", params.rounds)));
            }
            let config = BaseTesterConfig::new(2.0 / 3.0, 0.25)?.with_sample_size(c)?;
            let projection = projection_of(a.projection.unwrap_or(ProjectionArg::Length), c);
            let cfg = AuditConfig::new(projection, a.audit_delta.unwrap_or(paired_delta), a.trials, ctx.seed)
                .with_output(true);
            let pair = canonical_tester_pair(n, derive_seed(ctx.seed, 99))?;
            ctx.pool.install(|| estimate_privacy(&tester_mechanism(config, params), &pair, &cfg))?
        }
    };
    write_json(out, &estimate)
}

pub fn lowerbound(ctx: &Context, a: &LowerArgs, out: &mut dyn Write) -> CliResult<()> {
    let n = required(a.n, "n")?;
    if a.q == 0 {
        return Err(CliError::Invalid("--q must be positive".into()));
    }
    let tester: Box<dyn ConnectivityTester> = match a.tester {
        TesterKind::Naive => Box::new(NaiveWalkTester { q: a.q }),
        TesterKind::Fixed => Box::new(FixedProbeTester { q: a.q }),
    };
    let report = ctx
        .pool
        .install(|| lowerbound_demo(n, tester.as_ref(), positive_trials(a.trials)?, ctx.seed).map_err(CliError::from))?;
    write_json(out, &report)
}

pub fn dump_trace(ctx: &Context, a: &DumpArgs, out: &mut dyn Write) -> CliResult<()> {
    let target = required(a.target, "target")?;
    let n = required(a.n, "n")?;
    let mut rng = trial_rng(ctx.seed, 0);
    let (trace, block): (AccessTrace, usize) = match target {
        Target::Locate => {
            let p = check_probability(a.p)?;
            let params = LocateParams::new(a.epsilon, a.delta, n)?;
            let data: Vec<bool> = (0..n).map(|_| rng.gen_bool(p)).collect();
            let mut x = PredicateDataset::new(data, |b: &bool| *b)?;
            do_locate(&mut x, &params, &mut rng)?;
            (x.take_trace(), 1)
        }
        Target::Search => {
            let params = SearchParams::new(a.epsilon, a.beta, n)?;
            let v = random_sorted(n, &mut rng);
            let q = v[n / 2];
            let mut x = SortedDataset::new(v)?;
            do_search(&mut x, q, &params, &mut rng)?;
            (x.take_trace(), params.k)
        }
        Target::Tester => {
            let params = DoTesterParams::new(a.epsilon, a.delta)?;
            let c = default_sample_size(0.25).min(n / (params.rounds + 1));
            if c == 0 {
                return Err(CliError::Invalid(format!("n = {n} is too small for {} tester rounds", params.rounds)));
            }
            let config = BaseTesterConfig::new(2.0 / 3.0, 0.25)?.with_sample_size(c)?;
            let (g, _) = DenseGraph::random_bipartite(n, 0.5, &mut rng);
            let o = do_tester(&g, &BipartitenessTester { config }, &params, &mut rng)?;
            (o.trace, c)
        }
    };
    match a.projection {
        Some(p) => write_json(out, &project_trace(&trace, projection_of(p, block))),
        None => {
            trace.write_csv(&mut *out)?;
            Ok(())
        }
    }
}
