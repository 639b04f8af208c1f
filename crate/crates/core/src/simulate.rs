//! Monte Carlo for the ν-Brownian motion through its embedded continuous-time
//! chain on a mesh.
//!
//! At a mesh vertex `x` the chain jumps to a neighbour `y` with probability
//! proportional to `1 / r(x,y)` after an exponential holding time with rate
//! `Σ_y (2 r(x,y))⁻¹ / m(x)`, where `m` is the lumped speed measure. Expected
//! hitting times and occupation functionals of this chain solve exactly the
//! discrete linear systems of the form matrix.
//!
//! Randomness: walk `i` draws from `ChaCha8Rng::seed_from_u64(seed)` switched to
//! stream `i`, so the numbers a walk sees do not depend on how walks are
//! scheduled. Walks are aggregated in fixed-size chunks folded in index order,
//! which makes every aggregate bit-identical for any thread count.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::calculus::PiecewiseLinearFn;
use crate::error::{Error, Result};
use crate::linalg;
use crate::measure::{LumpedMeasure, SpeedMeasure};
use crate::potential;
use crate::scalar::Scalar;
use crate::tree::{PointRef, SubdivisionMap, TreeSpec, VertexId};

/// Environment variable capping the number of simulation threads.
pub const THREADS_ENV: &str = "DENDRITE_THREADS";

/// Walks per aggregation chunk. Part of the reproducibility contract: changing it
/// changes the rounding of aggregated sums.
const CHUNK: usize = 256;

/// Threads to use when a configuration leaves the choice open.
pub fn default_threads() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

/// The embedded chain on a mesh of a source tree.
#[derive(Clone, Debug)]
pub struct Chain<S> {
    pub source: TreeSpec<S>,
    pub mesh: TreeSpec<S>,
    pub map: SubdivisionMap<S>,
    pub mass: LumpedMeasure<S>,
    neighbors: Vec<Vec<VertexId>>,
    cumulative: Vec<Vec<f64>>,
    rate: Vec<S>,
    killing: Vec<bool>,
}

/// Builds the chain on `tree` subdivided to mesh size `h`.
pub fn build_chain<S: Scalar>(tree: &TreeSpec<S>, nu: &SpeedMeasure<S>, h: S) -> Result<Chain<S>> {
    build_chain_at(tree, nu, h, &[])
}

/// As [`build_chain`], with the given points inserted as mesh vertices first.
pub fn build_chain_at<S: Scalar>(
    tree: &TreeSpec<S>,
    nu: &SpeedMeasure<S>,
    h: S,
    points: &[PointRef<S>],
) -> Result<Chain<S>> {
    if !nu.matches(tree) {
        return Err(Error::InvalidMeasure("measure does not belong to this tree".into()));
    }
    let (mid, first) = tree.refine_at(points)?;
    let (mesh, second) = mid.subdivide(h)?;
    let map = first.then(&second);
    let mass = nu.lump_onto(&map, &mesh)?;
    let n = mesh.vertex_count();
    let two = S::of(2.0);
    let mut neighbors = Vec::with_capacity(n);
    let mut cumulative = Vec::with_capacity(n);
    let mut rate = Vec::with_capacity(n);
    let mut killing = Vec::with_capacity(n);
    for v in mesh.vertices() {
        let kill = mesh.is_open(v);
        let adj = mesh.neighbors(v);
        let weights: Vec<S> = adj.iter().map(|&(_, e)| S::one() / mesh.edge(e).length).collect();
        let total: S = weights.iter().copied().sum();
        let mut acc = 0.0;
        let mut cum: Vec<f64> = weights
            .iter()
            .map(|&w| {
                acc += (w / total).as_f64();
                acc
            })
            .collect();
        if let Some(last) = cum.last_mut() {
            *last = 1.0;
        }
        let m = mass.get(v);
        if !kill && !adj.is_empty() && !(m > S::zero()) {
            return Err(Error::InvalidMeasure(format!(
                "zero lumped mass at mesh vertex {:?}; the speed measure must charge every edge or vertex",
                mesh.name(v)
            )));
        }
        rate.push(if adj.is_empty() { S::zero() } else { total / (two * m) });
        neighbors.push(adj.iter().map(|&(w, _)| w).collect());
        cumulative.push(cum);
        killing.push(kill);
    }
    Ok(Chain { source: tree.clone(), mesh, map, mass, neighbors, cumulative, rate, killing })
}

impl<S: Scalar> Chain<S> {
    /// The mesh vertex at a point of the source tree.
    pub fn locate(&self, p: &PointRef<S>) -> Result<VertexId> {
        self.map.map_vertex(&self.mesh, p)
    }

    pub fn holding_rate(&self, v: VertexId) -> S {
        self.rate[v.0]
    }

    pub fn is_killing(&self, v: VertexId) -> bool {
        self.killing[v.0]
    }

    /// Neighbours of `v` with their jump probabilities.
    pub fn jump_probabilities(&self, v: VertexId) -> Vec<(VertexId, f64)> {
        let cum = &self.cumulative[v.0];
        self.neighbors[v.0]
            .iter()
            .enumerate()
            .map(|(i, &w)| (w, cum[i] - if i == 0 { 0.0 } else { cum[i - 1] }))
            .collect()
    }

    /// One jump of the embedded chain from `v`.
    pub fn sample_jump<R: Rng + ?Sized>(&self, v: VertexId, rng: &mut R) -> Option<VertexId> {
        pick(&self.neighbors[v.0], &self.cumulative[v.0], rng)
    }

    /// Exact `E[τ]` and `E[τ²]` from `start` until the chain hits `targets`,
    /// from `Q u = m` and `Q v = 2 M u`. Killing vertices count as targets.
    pub fn exact_hitting_moments(&self, start: VertexId, targets: &[VertexId]) -> Result<(S, S)> {
        let n = self.mesh.vertex_count();
        let mut fixed = vec![None; n];
        for &t in targets {
            fixed[t.0] = Some(S::zero());
        }
        for v in 0..n {
            if self.killing[v] {
                fixed[v] = Some(S::zero());
            }
        }
        let two = S::of(2.0);
        let weights: Vec<S> = self.mesh.edges().iter().map(|e| S::one() / (two * e.length)).collect();
        let zeros = vec![S::zero(); n];
        let u = linalg::solve_tree_system(&self.mesh, &weights, &zeros, &fixed, &self.mass.mass)?;
        let rhs: Vec<S> = u.iter().zip(&self.mass.mass).map(|(&a, &m)| two * m * a).collect();
        let v = linalg::solve_tree_system(&self.mesh, &weights, &zeros, &fixed, &rhs)?;
        Ok((u[start.0], v[start.0]))
    }
}

fn pick<R: Rng + ?Sized>(targets: &[VertexId], cum: &[f64], rng: &mut R) -> Option<VertexId> {
    match targets.len() {
        0 => None,
        1 => Some(targets[0]),
        len => {
            let u: f64 = rng.gen();
            Some(targets[cum.partition_point(|&c| c <= u).min(len - 1)])
        }
    }
}

fn exponential<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u: f64 = rng.gen();
    -(1.0 - u).ln()
}

#[derive(Clone, Debug, PartialEq)]
pub enum Stop<S> {
    /// Run until one of these points (mesh vertices) is hit.
    Hit(Vec<PointRef<S>>),
    /// Run for a fixed amount of time.
    Horizon(S),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Clock {
    /// Exponential holding times: the continuous-time chain.
    Exponential,
    /// Every visit lasts one unit: elapsed time counts jumps.
    JumpCountOnly,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WalkConfig<S> {
    pub mesh_h: S,
    pub n_walks: usize,
    pub seed: u64,
    pub stop: Stop<S>,
    pub clock: Clock,
    /// Walks still running after this many jumps are reported as censored.
    pub max_jumps: u64,
    /// Worker threads; 0 means [`default_threads`].
    pub threads: usize,
}

impl<S: Scalar> WalkConfig<S> {
    pub fn new(mesh_h: S, n_walks: usize, seed: u64, stop: Stop<S>) -> Self {
        WalkConfig {
            mesh_h,
            n_walks,
            seed,
            stop,
            clock: Clock::Exponential,
            max_jumps: 1_000_000_000,
            threads: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_walks == 0 {
            return Err(Error::InvalidArgument("at least one walk is required".into()));
        }
        if !(self.mesh_h > S::zero() && self.mesh_h.is_finite()) {
            return Err(Error::InvalidArgument(format!("mesh size must be positive, got {}", self.mesh_h)));
        }
        match &self.stop {
            Stop::Hit(set) if set.is_empty() => Err(Error::InvalidArgument("stop set is empty".into())),
            Stop::Horizon(t) if !(*t >= S::zero() && t.is_finite()) => {
                Err(Error::InvalidArgument(format!("time horizon must be finite and nonnegative, got {t}")))
            }
            _ => Ok(()),
        }
    }
}

/// One trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct WalkResult<S> {
    /// The stop vertex reached; `None` for killed, censored and horizon walks.
    pub exit: Option<VertexId>,
    /// Where the walk was when it ended.
    pub position: VertexId,
    pub elapsed: S,
    pub jumps: u64,
    pub killed: bool,
    pub censored: bool,
    /// `∫ f(X_s) ds` over the walk when a functional was supplied, else zero.
    pub functional: S,
}

/// Ordered aggregate over all walks.
#[derive(Clone, Debug, PartialEq)]
pub struct WalkAggregate<S> {
    pub walks: Vec<WalkResult<S>>,
    /// Time spent at each mesh vertex, summed over walks.
    pub occupation: Vec<S>,
    pub exit_counts: BTreeMap<VertexId, u64>,
    pub killed: u64,
    pub censored: u64,
    /// Sums over walks that were neither killed nor censored.
    pub completed: u64,
    pub sum_elapsed: S,
    pub sum_elapsed_sq: S,
    pub sum_functional: S,
    pub sum_functional_sq: S,
}

impl<S: Scalar> WalkAggregate<S> {
    fn empty(n: usize) -> Self {
        WalkAggregate {
            walks: Vec::new(),
            occupation: vec![S::zero(); n],
            exit_counts: BTreeMap::new(),
            killed: 0,
            censored: 0,
            completed: 0,
            sum_elapsed: S::zero(),
            sum_elapsed_sq: S::zero(),
            sum_functional: S::zero(),
            sum_functional_sq: S::zero(),
        }
    }

    fn push(&mut self, w: WalkResult<S>) {
        if let Some(x) = w.exit {
            *self.exit_counts.entry(x).or_insert(0) += 1;
        }
        if w.killed {
            self.killed += 1;
        } else if w.censored {
            self.censored += 1;
        } else {
            self.completed += 1;
            self.sum_elapsed += w.elapsed;
            self.sum_elapsed_sq += w.elapsed * w.elapsed;
            self.sum_functional += w.functional;
            self.sum_functional_sq += w.functional * w.functional;
        }
        self.walks.push(w);
    }

    fn merge(&mut self, other: WalkAggregate<S>) {
        for (o, x) in self.occupation.iter_mut().zip(&other.occupation) {
            *o += *x;
        }
        for (v, c) in other.exit_counts {
            *self.exit_counts.entry(v).or_insert(0) += c;
        }
        self.killed += other.killed;
        self.censored += other.censored;
        self.completed += other.completed;
        self.sum_elapsed += other.sum_elapsed;
        self.sum_elapsed_sq += other.sum_elapsed_sq;
        self.sum_functional += other.sum_functional;
        self.sum_functional_sq += other.sum_functional_sq;
        self.walks.extend(other.walks);
    }

    pub fn n_walks(&self) -> usize {
        self.walks.len()
    }

    pub fn exit_count(&self, v: VertexId) -> u64 {
        self.exit_counts.get(&v).copied().unwrap_or(0)
    }

    /// Mean elapsed time of completed walks with its standard error.
    pub fn elapsed_estimate(&self) -> Estimate<S> {
        Estimate::from_sums(self.completed, self.sum_elapsed, self.sum_elapsed_sq)
    }

    pub fn functional_estimate(&self) -> Estimate<S> {
        Estimate::from_sums(self.completed, self.sum_functional, self.sum_functional_sq)
    }

    /// `walk_id,exit,elapsed,killed` with the exit as a mesh vertex name.
    pub fn to_csv(&self, mesh: &TreeSpec<S>) -> String {
        let mut out = String::from("walk_id,exit,elapsed,killed\n");
        for (i, w) in self.walks.iter().enumerate() {
            let exit = w.exit.map(|v| mesh.name(v)).unwrap_or("");
            out.push_str(&format!("{i},{exit},{},{}\n", w.elapsed, w.killed));
        }
        out
    }
}

/// A sample mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate<S> {
    pub mean: S,
    pub std_error: S,
    pub samples: u64,
}

impl<S: Scalar> Estimate<S> {
    fn from_sums(n: u64, sum: S, sum_sq: S) -> Self {
        if n == 0 {
            return Estimate { mean: S::nan(), std_error: S::nan(), samples: 0 };
        }
        let nf = S::of(n as f64);
        let mean = sum / nf;
        let std_error = if n > 1 {
            let var = ((sum_sq - nf * mean * mean) / (nf - S::one())).max(S::zero());
            (var / nf).sqrt()
        } else {
            S::infinity()
        };
        Estimate { mean, std_error, samples: n }
    }
}

struct Walker<'c, S> {
    chain: &'c Chain<S>,
    stop: Vec<bool>,
    horizon: Option<S>,
    clock: Clock,
    max_jumps: u64,
    functional: Option<Vec<S>>,
}

impl<S: Scalar> Walker<'_, S> {
    fn run(&self, start: VertexId, rng: &mut ChaCha8Rng, occupation: &mut [S]) -> WalkResult<S> {
        let chain = self.chain;
        let mut v = start;
        let mut elapsed = S::zero();
        let mut functional = S::zero();
        let mut jumps = 0u64;
        let result = |exit, position, elapsed, jumps, killed, censored, functional| WalkResult {
            exit,
            position,
            elapsed,
            jumps,
            killed,
            censored,
            functional,
        };
        loop {
            if self.horizon.is_none() && self.stop[v.0] {
                return result(Some(v), v, elapsed, jumps, false, false, functional);
            }
            if chain.killing[v.0] {
                return result(None, v, elapsed, jumps, true, false, functional);
            }
            if jumps >= self.max_jumps {
                return result(None, v, elapsed, jumps, false, true, functional);
            }
            let hold = match self.clock {
                Clock::Exponential => {
                    let rate = chain.rate[v.0];
                    if rate > S::zero() {
                        S::of(exponential(rng)) / rate
                    } else {
                        S::infinity()
                    }
                }
                Clock::JumpCountOnly => S::one(),
            };
            let weight = self.functional.as_ref().map(|f| f[v.0]);
            if let Some(t) = self.horizon {
                if elapsed + hold >= t {
                    let rest = t - elapsed;
                    occupation[v.0] += rest;
                    if let Some(w) = weight {
                        functional += w * rest;
                    }
                    return result(None, v, t, jumps, false, false, functional);
                }
            }
            if !hold.is_finite() {
                // An isolated vertex never leaves.
                return result(None, v, elapsed, jumps, false, true, functional);
            }
            elapsed += hold;
            occupation[v.0] += hold;
            if let Some(w) = weight {
                functional += w * hold;
            }
            match pick(&chain.neighbors[v.0], &chain.cumulative[v.0], rng) {
                Some(next) => v = next,
                None => return result(None, v, elapsed, jumps, false, true, functional),
            }
            jumps += 1;
        }
    }
}

fn thread_pool(threads: usize) -> Result<rayon::ThreadPool> {
    let n = if threads == 0 { default_threads() } else { threads };
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map_err(|e| Error::Simulation(format!("cannot start worker threads: {e}")))
}

/// Runs `n` independent tasks in deterministic chunks and folds the chunk
/// results in index order.
fn chunked<T>(
    threads: usize,
    n: usize,
    mut init: impl FnMut() -> T,
    step: impl Fn(&mut T, usize) + Sync,
    merge: impl Fn(&mut T, T),
) -> Result<T>
where
    T: Send,
{
    let pool = thread_pool(threads)?;
    let chunks = n.div_ceil(CHUNK);
    let blanks: Vec<T> = (0..chunks).map(|_| init()).collect();
    let parts: Vec<T> = pool.install(|| {
        blanks
            .into_par_iter()
            .enumerate()
            .map(|(c, mut acc)| {
                for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                    step(&mut acc, i);
                }
                acc
            })
            .collect()
    });
    let mut total = init();
    for p in parts {
        merge(&mut total, p);
    }
    Ok(total)
}

fn walk_rng(seed: u64, walk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(walk as u64);
    rng
}

fn run_internal<S: Scalar>(
    chain: &Chain<S>,
    cfg: &WalkConfig<S>,
    start: &PointRef<S>,
    functional: Option<Vec<S>>,
) -> Result<WalkAggregate<S>> {
    cfg.validate()?;
    let start = chain.locate(start)?;
    let n = chain.mesh.vertex_count();
    let mut stop = vec![false; n];
    let horizon = match &cfg.stop {
        Stop::Hit(set) => {
            for p in set {
                stop[chain.locate(p)?.0] = true;
            }
            None
        }
        Stop::Horizon(t) => Some(*t),
    };
    let walker = Walker { chain, stop, horizon, clock: cfg.clock, max_jumps: cfg.max_jumps, functional };
    chunked(
        cfg.threads,
        cfg.n_walks,
        || WalkAggregate::empty(n),
        |acc, i| {
            let mut rng = walk_rng(cfg.seed, i);
            let w = walker.run(start, &mut rng, &mut acc.occupation);
            acc.push(w);
        },
        |total, part| total.merge(part),
    )
}

/// Runs `cfg.n_walks` independent walks from `start`.
pub fn run_walks<S: Scalar>(chain: &Chain<S>, cfg: &WalkConfig<S>, start: &PointRef<S>) -> Result<WalkAggregate<S>> {
    run_internal(chain, cfg, start, None)
}

/// Largest tolerated fraction of censored walks in the estimators.
pub const MAX_CENSORED_FRACTION: f64 = 0.01;

fn check_censoring<S: Scalar>(agg: &WalkAggregate<S>) -> Result<()> {
    if agg.censored as f64 > MAX_CENSORED_FRACTION * agg.n_walks() as f64 {
        return Err(Error::Simulation(format!(
            "{} of {} walks hit the jump limit",
            agg.censored,
            agg.n_walks()
        )));
    }
    Ok(())
}

/// Mean time to hit `target` from `start`, over walks that were not killed.
pub fn estimate_hitting_time<S: Scalar>(
    chain: &Chain<S>,
    cfg: &WalkConfig<S>,
    start: &PointRef<S>,
    target: &[PointRef<S>],
) -> Result<Estimate<S>> {
    let cfg = WalkConfig { stop: Stop::Hit(target.to_vec()), ..cfg.clone() };
    let agg = run_walks(chain, &cfg, start)?;
    check_censoring(&agg)?;
    Ok(agg.elapsed_estimate())
}

/// Monte Carlo estimate of `E[∫_0^{τ} f(X_s) ds]` with `τ` the hitting time of `target`.
pub fn estimate_occupation<S: Scalar>(
    chain: &Chain<S>,
    cfg: &WalkConfig<S>,
    start: &PointRef<S>,
    target: &[PointRef<S>],
    f: &PiecewiseLinearFn<S>,
) -> Result<Estimate<S>> {
    let values = f.refine(&chain.map, &chain.source, &chain.mesh)?.into_values();
    let cfg = WalkConfig { stop: Stop::Hit(target.to_vec()), ..cfg.clone() };
    let agg = run_internal(chain, &cfg, start, Some(values))?;
    check_censoring(&agg)?;
    Ok(agg.functional_estimate())
}

/// Empirical exit law.
#[derive(Clone, Debug, PartialEq)]
pub struct ExitEstimate {
    pub targets: Vec<VertexId>,
    pub counts: Vec<u64>,
    pub killed: u64,
    pub censored: u64,
    pub n_walks: u64,
}

impl ExitEstimate {
    pub fn probability(&self, i: usize) -> f64 {
        self.counts[i] as f64 / self.n_walks as f64
    }

    /// Binomial standard error `sqrt(p(1−p)/n)`.
    pub fn std_error(&self, i: usize) -> f64 {
        let p = self.probability(i);
        (p * (1.0 - p) / self.n_walks as f64).sqrt()
    }
}

/// Where walks from `start` first meet `targets`.
///
/// Only the exit point is recorded, so each walk runs on the chain reduced to
/// its junctions (vertices of degree other than two, plus the start, the targets
/// and killing vertices). Between junctions the chain moves along a path, and by
/// gambler's ruin it leaves a junction through the path towards `y` with
/// probability proportional to `1 / r(x,y)`: the reduced walk has exactly the
/// exit law of the full one.
pub fn estimate_exit_probabilities<S: Scalar>(
    chain: &Chain<S>,
    cfg: &WalkConfig<S>,
    start: &PointRef<S>,
    targets: &[PointRef<S>],
) -> Result<ExitEstimate> {
    let cfg = WalkConfig { stop: Stop::Hit(targets.to_vec()), ..cfg.clone() };
    cfg.validate()?;
    let start = chain.locate(start)?;
    let target_ids: Vec<VertexId> = targets.iter().map(|p| chain.locate(p)).collect::<Result<_>>()?;
    let mesh = &chain.mesh;
    let n = mesh.vertex_count();
    let mut slot = vec![usize::MAX; n];
    for (i, t) in target_ids.iter().enumerate() {
        if slot[t.0] == usize::MAX {
            slot[t.0] = i;
        }
    }
    let junction: Vec<bool> = (0..n)
        .map(|v| mesh.degree(VertexId(v)) != 2 || v == start.0 || slot[v] != usize::MAX || chain.killing[v])
        .collect();
    let mut next: Vec<Vec<VertexId>> = vec![Vec::new(); n];
    let mut cum: Vec<Vec<f64>> = vec![Vec::new(); n];
    for v in (0..n).filter(|&v| junction[v]) {
        let mut weights = Vec::new();
        for &(w0, e0) in mesh.neighbors(VertexId(v)) {
            let (mut prev, mut cur, mut len) = (VertexId(v), w0, mesh.edge(e0).length);
            while !junction[cur.0] {
                let &(w, e) = mesh
                    .neighbors(cur)
                    .iter()
                    .find(|(w, _)| *w != prev)
                    .expect("interior path vertices have two neighbours");
                len += mesh.edge(e).length;
                prev = cur;
                cur = w;
            }
            next[v].push(cur);
            weights.push(S::one() / len);
        }
        let total: S = weights.iter().copied().sum();
        let mut acc = 0.0;
        cum[v] = weights
            .iter()
            .map(|&w| {
                acc += (w / total).as_f64();
                acc
            })
            .collect();
        if let Some(last) = cum[v].last_mut() {
            *last = 1.0;
        }
    }
    #[derive(Clone)]
    struct Tally {
        counts: Vec<u64>,
        killed: u64,
        censored: u64,
    }
    let k = target_ids.len();
    let tally = chunked(
        cfg.threads,
        cfg.n_walks,
        || Tally { counts: vec![0; k], killed: 0, censored: 0 },
        |acc, i| {
            let mut rng = walk_rng(cfg.seed, i);
            let mut v = start;
            let mut jumps = 0u64;
            loop {
                if slot[v.0] != usize::MAX {
                    acc.counts[slot[v.0]] += 1;
                    break;
                }
                if chain.killing[v.0] {
                    acc.killed += 1;
                    break;
                }
                if jumps >= cfg.max_jumps {
                    acc.censored += 1;
                    break;
                }
                match pick(&next[v.0], &cum[v.0], &mut rng) {
                    Some(w) => v = w,
                    None => {
                        acc.censored += 1;
                        break;
                    }
                }
                jumps += 1;
            }
        },
        |total, part| {
            for (a, b) in total.counts.iter_mut().zip(&part.counts) {
                *a += b;
            }
            total.killed += part.killed;
            total.censored += part.censored;
        },
    )?;
    let est = ExitEstimate {
        targets: target_ids,
        counts: tally.counts,
        killed: tally.killed,
        censored: tally.censored,
        n_walks: cfg.n_walks as u64,
    };
    if est.censored as f64 > MAX_CENSORED_FRACTION * est.n_walks as f64 {
        return Err(Error::Simulation(format!("{} of {} walks hit the jump limit", est.censored, est.n_walks)));
    }
    Ok(est)
}

/// Outcome of comparing `E^x[τ_b]` with `2 ν(T) r(x,b)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundCheck<S> {
    pub value: S,
    pub bound: S,
    pub holds: bool,
}

pub fn bound_check_mean_hitting<S: Scalar>(
    tree: &TreeSpec<S>,
    nu: &SpeedMeasure<S>,
    x: &PointRef<S>,
    b: &PointRef<S>,
) -> Result<BoundCheck<S>> {
    let one = PiecewiseLinearFn::constant(tree, S::one());
    let value = potential::expected_occupation(tree, nu, x, b, &one)?;
    let bound = S::of(2.0) * nu.total_mass(tree) * tree.distance(x, b)?;
    Ok(BoundCheck { value, bound, holds: value <= bound * (S::one() + S::tolerance()) })
}
