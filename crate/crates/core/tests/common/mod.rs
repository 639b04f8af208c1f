//! Independent reference computations and proptest strategies. Nothing here
//! calls into the solvers under test; only the tree's raw edge list is read.
#![allow(dead_code)]

use std::collections::{BinaryHeap, HashSet};
use std::cmp::Reverse;

use dendrite::measure::SpeedMeasure;
use dendrite::{PointRef, TreeBuilder, TreeSpec, VertexId};
use proptest::prelude::*;
use proptest::sample::Index;

pub type T = TreeSpec<f64>;

/// A tree from a parent choice and a length per non-root vertex.
pub fn build(parents: &[Index], lengths: &[f64]) -> T {
    let n = parents.len() + 1;
    let mut b = TreeBuilder::with_vertices(n);
    for i in 1..n {
        b.add_edge(VertexId(parents[i - 1].index(i)), VertexId(i), lengths[i - 1]);
    }
    b.set_root(VertexId(0));
    b.build().unwrap()
}

pub fn tree_strategy(max_vertices: usize) -> impl Strategy<Value = T> {
    (2..=max_vertices).prop_flat_map(|n| {
        (prop::collection::vec(any::<Index>(), n - 1), prop::collection::vec(0.1f64..3.0, n - 1))
            .prop_map(|(p, l)| build(&p, &l))
    })
}

/// A tree with a speed measure: densities in [0.2, 3) and sparse atoms.
pub fn measured_tree(max_vertices: usize) -> impl Strategy<Value = (T, SpeedMeasure<f64>)> {
    tree_strategy(max_vertices).prop_flat_map(|t| {
        let (ne, nv) = (t.edge_count(), t.vertex_count());
        (
            Just(t),
            prop::collection::vec(0.2f64..3.0, ne),
            prop::collection::vec(prop_oneof![3 => Just(0.0), 1 => 0.0f64..2.0], nv),
        )
            .prop_map(|(t, d, a)| {
                let nu = SpeedMeasure::new(&t, d, a).unwrap();
                (t, nu)
            })
    })
}

pub fn vertex(t: &T, i: &Index) -> VertexId {
    VertexId(i.index(t.vertex_count()))
}

/// A vertex or an interior point chosen by two indices and a fraction.
pub fn point(t: &T, i: &Index, frac: f64, interior: bool) -> PointRef<f64> {
    if interior {
        let e = dendrite::EdgeId(i.index(t.edge_count()));
        t.point_on_edge(e, frac * t.edge(e).length).unwrap()
    } else {
        PointRef::Vertex(vertex(t, i))
    }
}

pub fn adjacency(t: &T) -> Vec<Vec<(usize, f64)>> {
    let mut adj = vec![Vec::new(); t.vertex_count()];
    for e in t.edges() {
        adj[e.u.0].push((e.v.0, e.length));
        adj[e.v.0].push((e.u.0, e.length));
    }
    adj
}

/// Dijkstra from `s` over the raw edge list.
pub fn dijkstra(t: &T, s: usize) -> Vec<f64> {
    let adj = adjacency(t);
    let mut dist = vec![f64::INFINITY; adj.len()];
    let mut heap = BinaryHeap::new();
    dist[s] = 0.0;
    heap.push(Reverse((0u64, s)));
    while let Some(Reverse((d, u))) = heap.pop() {
        let d = f64::from_bits(d);
        if d > dist[u] {
            continue;
        }
        for &(w, l) in &adj[u] {
            if d + l < dist[w] {
                dist[w] = d + l;
                // Nonnegative floats order like their bit patterns.
                heap.push(Reverse(((d + l).to_bits(), w)));
            }
        }
    }
    dist
}

/// Vertex path by depth-first search.
pub fn path(t: &T, a: usize, b: usize) -> Vec<usize> {
    let adj = adjacency(t);
    let mut prev = vec![usize::MAX; adj.len()];
    let mut stack = vec![a];
    prev[a] = a;
    while let Some(u) = stack.pop() {
        for &(w, _) in &adj[u] {
            if prev[w] == usize::MAX {
                prev[w] = u;
                stack.push(w);
            }
        }
    }
    let mut out = vec![b];
    let mut u = b;
    while u != a {
        u = prev[u];
        out.push(u);
    }
    out.reverse();
    out
}

/// The unique vertex common to the three paths between `a`, `b`, `c`.
pub fn brute_branch_point(t: &T, a: usize, b: usize, c: usize) -> usize {
    let ab: HashSet<usize> = path(t, a, b).into_iter().collect();
    let bc: HashSet<usize> = path(t, b, c).into_iter().collect();
    let ca: HashSet<usize> = path(t, c, a).into_iter().collect();
    let common: Vec<usize> = ab.iter().filter(|v| bc.contains(v) && ca.contains(v)).copied().collect();
    assert_eq!(common.len(), 1, "three geodesics in a tree meet in one point");
    common[0]
}

/// Dense symmetric system `K u = rhs` with some entries pinned, solved by
/// Gaussian elimination with partial pivoting.
pub fn dense_solve(k: &[Vec<f64>], rhs: &[f64], fixed: &[Option<f64>]) -> Vec<f64> {
    let free: Vec<usize> = (0..k.len()).filter(|&i| fixed[i].is_none()).collect();
    let m = free.len();
    let mut a = vec![vec![0.0; m + 1]; m];
    for (r, &i) in free.iter().enumerate() {
        a[r][m] = rhs[i];
        for j in 0..k.len() {
            match fixed[j] {
                Some(val) => a[r][m] -= k[i][j] * val,
                None => {
                    let c = free.iter().position(|&f| f == j).unwrap();
                    a[r][c] = k[i][j];
                }
            }
        }
    }
    for col in 0..m {
        let piv = (col..m).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs())).unwrap();
        a.swap(col, piv);
        for r in 0..m {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..=m {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    let mut u: Vec<f64> = fixed.iter().map(|f| f.unwrap_or(0.0)).collect();
    for (r, &i) in free.iter().enumerate() {
        u[i] = a[r][m] / a[r][r];
    }
    u
}

/// Stiffness matrix of `½∫(f')²` for piecewise linear functions: conductance
/// `1/(2L)` per edge.
pub fn stiffness(t: &T) -> Vec<Vec<f64>> {
    let n = t.vertex_count();
    let mut k = vec![vec![0.0; n]; n];
    for e in t.edges() {
        let c = 1.0 / (2.0 * e.length);
        let (u, v) = (e.u.0, e.v.0);
        k[u][u] += c;
        k[v][v] += c;
        k[u][v] -= c;
        k[v][u] -= c;
    }
    k
}

/// Energy by midpoint quadrature of `½ (f')²` on each edge with 16 cells,
/// using finite differences of the linear interpolant.
pub fn quadrature_energy(t: &T, values: &[f64]) -> f64 {
    let mut total = 0.0;
    for e in t.edges() {
        let cells = 16;
        let h = e.length / cells as f64;
        for j in 0..cells {
            let s0 = j as f64 * h;
            let f = |s: f64| values[e.u.0] + (values[e.v.0] - values[e.u.0]) * s / e.length;
            let d = (f(s0 + h) - f(s0)) / h;
            total += 0.5 * d * d * h;
        }
    }
    total
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}
