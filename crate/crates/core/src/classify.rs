//! Recurrence and transience: the compactness dichotomy for bounded trees, and
//! resistance and end-space dimension tests for self-similar k-ary trees.

use std::fmt;

use crate::error::{Error, Result};
use crate::measure::SpeedMeasure;
use crate::scalar::Scalar;
use crate::tree::{TreeBuilder, TreeSpec};

/// The k-ary tree: a single root edge of length `first_edge`, after which every
/// vertex has `k` children, and edges at level `m` have length `first_edge · c^m`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeneratorSpec<S> {
    pub k: usize,
    pub c: S,
    pub first_edge: S,
}

impl<S: Scalar> GeneratorSpec<S> {
    pub fn new(k: usize, c: S) -> Self {
        GeneratorSpec { k, c, first_edge: S::one() }
    }

    pub fn with_first_edge(mut self, first_edge: S) -> Self {
        self.first_edge = first_edge;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidArgument("branching number must be at least 1".into()));
        }
        if !(self.c > S::zero() && self.c.is_finite()) {
            return Err(Error::InvalidArgument(format!("length ratio must be positive, got {}", self.c)));
        }
        if !(self.first_edge > S::zero() && self.first_edge.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "first edge length must be positive, got {}",
                self.first_edge
            )));
        }
        Ok(())
    }

    /// Length of the edges at level `m`.
    pub fn edge_length(&self, m: usize) -> S {
        self.first_edge * self.c.powi(m as i32)
    }

    /// Distance from the root to the branch points at level `m`: `Σ_{l≤m} ℓ_l`.
    pub fn branch_depth(&self, m: usize) -> S {
        (0..=m).map(|l| self.edge_length(l)).sum()
    }

    pub fn is_bounded(&self) -> bool {
        self.c < S::one()
    }

    /// The first `depth` levels as a finite tree with closed leaves. The root is
    /// `o`, the first branch point `x`, and children append their index: `x.0.2`.
    pub fn truncate(&self, depth: usize) -> Result<TreeSpec<S>> {
        self.validate()?;
        if depth == 0 {
            return Err(Error::InvalidArgument("depth must be at least 1".into()));
        }
        (0..depth)
            .try_fold(0usize, |acc, m| self.k.checked_pow(m as u32).and_then(|p| acc.checked_add(p)))
            .filter(|&n| n <= 4_000_000)
            .ok_or_else(|| Error::InvalidArgument("truncated tree is too large".into()))?;
        let mut b = TreeBuilder::new();
        let root = b.add_vertex("o")?;
        let top = b.add_vertex("x")?;
        b.add_edge(root, top, self.edge_length(0));
        let mut frontier = vec![(top, String::from("x"))];
        for m in 1..depth {
            let len = self.edge_length(m);
            let mut next = Vec::with_capacity(frontier.len() * self.k);
            for (v, name) in &frontier {
                for i in 0..self.k {
                    let child = format!("{name}.{i}");
                    let w = b.add_vertex(&child)?;
                    b.add_edge(*v, w, len);
                    next.push((w, child));
                }
            }
            frontier = next;
        }
        b.set_root(root);
        b.build()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Verdict {
    PositiveRecurrent,
    Recurrent,
    Transient,
    Undetermined,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::PositiveRecurrent => "positive_recurrent",
            Verdict::Recurrent => "recurrent",
            Verdict::Transient => "transient",
            Verdict::Undetermined => "undetermined",
        }
    }

    pub fn is_recurrent(self) -> bool {
        matches!(self, Verdict::PositiveRecurrent | Verdict::Recurrent)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Outcome of summing a resistance series.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SeriesLimit<S> {
    Finite(S),
    Infinite,
    Unknown { partial: S, levels: usize },
}

impl<S: Scalar> SeriesLimit<S> {
    /// The limit as a number, infinite when the series diverges and `None` when undecided.
    pub fn value(&self) -> Option<S> {
        match *self {
            SeriesLimit::Finite(v) => Some(v),
            SeriesLimit::Infinite => Some(S::infinity()),
            SeriesLimit::Unknown { .. } => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evidence<S> {
    /// Whether the tree (not its completion) is compact; `None` for unbounded trees.
    pub compact: Option<bool>,
    pub resistance_limit: Option<SeriesLimit<S>>,
    pub hausdorff_dimension: Option<S>,
    pub notes: Vec<String>,
}

impl<S> Default for Evidence<S> {
    fn default() -> Self {
        Evidence { compact: None, resistance_limit: None, hausdorff_dimension: None, notes: Vec::new() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Classification<S> {
    pub verdict: Verdict,
    pub evidence: Evidence<S>,
}

impl<S: Scalar> Classification<S> {
    /// `key=value` lines: verdict first, then the evidence that is present.
    pub fn to_lines(&self) -> Vec<String> {
        let mut out = vec![format!("verdict={}", self.verdict)];
        if let Some(c) = self.evidence.compact {
            out.push(format!("compact={c}"));
        }
        match self.evidence.resistance_limit {
            Some(SeriesLimit::Finite(v)) => out.push(format!("resistance_limit={v}")),
            Some(SeriesLimit::Infinite) => out.push("resistance_limit=inf".into()),
            Some(SeriesLimit::Unknown { partial, levels }) => {
                out.push(format!("resistance_limit=unknown (partial {partial} after {levels} levels)"))
            }
            None => {}
        }
        if let Some(d) = self.evidence.hausdorff_dimension {
            out.push(format!("hausdorff_dimension={d}"));
        }
        for n in &self.evidence.notes {
            out.push(format!("note={n}"));
        }
        out
    }
}

/// Bounded finite trees: compact trees are positive recurrent, trees with a
/// missing end point are transient. The speed measure plays no role.
pub fn classify_finite<S: Scalar>(tree: &TreeSpec<S>, _nu: &SpeedMeasure<S>) -> Classification<S> {
    let compact = !tree.has_open_leaves();
    let mut evidence = Evidence { compact: Some(compact), ..Evidence::default() };
    let verdict = if compact {
        Verdict::PositiveRecurrent
    } else {
        evidence.notes.push("open leaves: the motion leaves through a missing end point".into());
        Verdict::Transient
    };
    Classification { verdict, evidence }
}

pub const SERIES_MAX_LEVELS: usize = 10_000;
pub const SERIES_REL_TOL: f64 = 1e-12;

/// Sums a series of nonnegative, non-increasing terms level by level. A term
/// that fails to decrease is read as divergence; a term below `SERIES_REL_TOL`
/// of the partial sum is taken as convergence, and the tail is then estimated
/// as geometric with the last ratio. Anything else after `SERIES_MAX_LEVELS`
/// levels is left undecided.
pub fn sum_series<S: Scalar>(mut term: impl FnMut(usize) -> S) -> SeriesLimit<S> {
    let tol = S::of(SERIES_REL_TOL);
    let mut sum = S::zero();
    let mut prev = S::infinity();
    for m in 0..SERIES_MAX_LEVELS {
        let t = term(m);
        if !t.is_finite() {
            return SeriesLimit::Infinite;
        }
        sum += t;
        if !sum.is_finite() {
            return SeriesLimit::Infinite;
        }
        if t > S::zero() && t >= prev {
            return SeriesLimit::Infinite;
        }
        if t <= tol * sum {
            let r = if prev.is_finite() { t / prev } else { S::zero() };
            return SeriesLimit::Finite(sum + t * r / (S::one() - r));
        }
        prev = t;
    }
    SeriesLimit::Unknown { partial: sum, levels: SERIES_MAX_LEVELS }
}

/// Limit of the root-to-depth-`n` resistance `Σ_m ℓ_m / k^m` as `n → ∞`.
pub fn resistance_limit<S: Scalar>(g: &GeneratorSpec<S>) -> Result<SeriesLimit<S>> {
    g.validate()?;
    let ratio = g.c / S::of_usize(g.k);
    Ok(sum_series(|m| g.first_edge * ratio.powi(m as i32)))
}

/// `log k / log c`, the Hausdorff dimension of the ends at infinity.
pub fn end_space_dimension<S: Scalar>(g: &GeneratorSpec<S>) -> Result<S> {
    g.validate()?;
    if !(g.c > S::one()) {
        return Err(Error::InvalidArgument(format!(
            "ends at infinity carry a finite dimension only for c > 1, got c = {}",
            g.c
        )));
    }
    Ok(S::of_usize(g.k).ln() / g.c.ln())
}

/// Box-counting estimate of the end-space dimension from the depth-`depth`
/// truncation. At the scale of the level-`m` branch points, `ε_m = 1/D_m`, the
/// ends fall into `k^m` balls; the dimension is the least-squares slope of
/// `log N` against `log(1/ε)` over the finest `scales` levels.
pub fn box_counting_dimension<S: Scalar>(g: &GeneratorSpec<S>, depth: usize, scales: usize) -> Result<S> {
    g.validate()?;
    if !(g.c > S::one()) {
        return Err(Error::InvalidArgument("box counting needs an unbounded generator (c > 1)".into()));
    }
    if scales < 2 || scales > depth + 1 {
        return Err(Error::InvalidArgument(format!("cannot fit {scales} scales at depth {depth}")));
    }
    let ln_k = S::of_usize(g.k).ln();
    let points: Vec<(S, S)> = (depth + 1 - scales..=depth)
        .map(|m| (g.branch_depth(m).ln(), S::of_usize(m) * ln_k))
        .collect();
    Ok(least_squares_slope(&points))
}

/// The same estimate read off an explicit finite tree: at each of the finest
/// `scales` distinct branch depths `d`, count the edges crossing depth `d`.
pub fn box_counting_dimension_of_tree<S: Scalar>(tree: &TreeSpec<S>, scales: usize) -> Result<S> {
    let mut depths: Vec<S> = tree
        .vertices()
        .filter(|&v| v != tree.root() && !tree.is_leaf(v))
        .map(|v| tree.depth(v))
        .collect();
    depths.sort_by(|a, b| a.partial_cmp(b).expect("finite depths"));
    depths.dedup_by(|a, b| (*a - *b).abs() <= S::tolerance() * b.abs());
    if depths.len() < scales || scales < 2 {
        return Err(Error::InvalidArgument(format!(
            "tree has {} branch depths, {scales} needed",
            depths.len()
        )));
    }
    let mut points = Vec::with_capacity(scales);
    for &d in &depths[depths.len() - scales..] {
        let slack = S::tolerance() * d;
        let count = tree
            .edges()
            .iter()
            .enumerate()
            .filter(|(i, _)| {
                let e = crate::tree::EdgeId(*i);
                let near = tree.depth(tree.parent_end(e));
                let far = tree.depth(tree.child_end(e));
                near < d - slack && far >= d - slack
            })
            .count();
        points.push((d.ln(), S::of_usize(count).ln()));
    }
    Ok(least_squares_slope(&points))
}

fn least_squares_slope<S: Scalar>(points: &[(S, S)]) -> S {
    let n = S::of_usize(points.len());
    let mx = points.iter().map(|p| p.0).sum::<S>() / n;
    let my = points.iter().map(|p| p.1).sum::<S>() / n;
    let sxy: S = points.iter().map(|&(x, y)| (x - mx) * (y - my)).sum();
    let sxx: S = points.iter().map(|&(x, _)| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

fn dimension_evidence<S: Scalar>(g: &GeneratorSpec<S>) -> Option<S> {
    if g.c > S::one() {
        end_space_dimension(g).ok()
    } else if g.c == S::one() {
        Some(if g.k == 1 { S::zero() } else { S::infinity() })
    } else {
        None
    }
}

/// Verdict from the end-space geometry of an unbounded generator: finite
/// one-dimensional measure (dimension below one, or exactly one at `c = k`)
/// means recurrence, dimension above one means transience.
fn analytic_verdict<S: Scalar>(g: &GeneratorSpec<S>, notes: &mut Vec<String>) -> Verdict {
    let k = S::of_usize(g.k);
    if g.c >= k {
        if g.c == k {
            notes.push("critical case c = k: dimension one with finite one-dimensional measure".into());
        }
        Verdict::Recurrent
    } else {
        Verdict::Transient
    }
}

/// Brownian motion on the k-ary tree.
pub fn classify_generator<S: Scalar>(g: &GeneratorSpec<S>) -> Result<Classification<S>> {
    g.validate()?;
    let limit = resistance_limit(g)?;
    let mut evidence = Evidence {
        compact: None,
        resistance_limit: Some(limit),
        hausdorff_dimension: dimension_evidence(g),
        notes: Vec::new(),
    };
    if g.is_bounded() {
        evidence.compact = Some(false);
        let completion_compact = g.c * S::of_usize(g.k) < S::one();
        evidence.notes.push(if completion_compact {
            "bounded but not compact; total length is finite, so the completion is positive recurrent".into()
        } else {
            "bounded but not compact; total length is infinite".into()
        });
        return Ok(Classification { verdict: Verdict::Transient, evidence });
    }
    let verdict = match limit {
        SeriesLimit::Finite(_) => Verdict::Transient,
        SeriesLimit::Infinite => Verdict::Recurrent,
        SeriesLimit::Unknown { .. } => analytic_verdict(g, &mut evidence.notes),
    };
    let mut scratch = Vec::new();
    let geometric = analytic_verdict(g, &mut scratch);
    if geometric != verdict {
        evidence
            .notes
            .push(format!("dimension test suggests {geometric}; resistance decides"));
    } else {
        evidence.notes.extend(scratch);
    }
    Ok(Classification { verdict, evidence })
}

/// The nearest-neighbour random walk on the k-ary tree with conductances
/// proportional to inverse edge lengths. Requires infinite total length along
/// every ray, i.e. `c ≥ 1`.
pub fn classify_random_walk<S: Scalar>(g: &GeneratorSpec<S>) -> Result<Classification<S>> {
    g.validate()?;
    if g.c < S::one() {
        return Err(Error::InvalidArgument(
            "rays must have infinite length (c >= 1) for the walk correspondence".into(),
        ));
    }
    classify_generator(g)
}
