//! Fixtures and random instances.

use rand::Rng;

use crate::error::Result;
use crate::measure::SpeedMeasure;
use crate::scalar::Scalar;
use crate::tree::{TreeBuilder, TreeSpec, VertexId};

/// Root `v0`, edges `v0–v1` (1), `v1–v2` (2), `v1–v3` (3).
pub fn y_tree<S: Scalar>() -> TreeSpec<S> {
    let mut b = TreeBuilder::with_vertices(4);
    b.add_edge(VertexId(0), VertexId(1), S::one());
    b.add_edge(VertexId(1), VertexId(2), S::of(2.0));
    b.add_edge(VertexId(1), VertexId(3), S::of(3.0));
    b.set_root(VertexId(0));
    b.build().expect("fixture is a tree")
}

/// `[0, len]` as a single edge `v0–v1` rooted at `v0`.
pub fn interval<S: Scalar>(len: S) -> TreeSpec<S> {
    let mut b = TreeBuilder::with_vertices(2);
    b.add_edge(VertexId(0), VertexId(1), len);
    b.set_root(VertexId(0));
    b.build().expect("fixture is a tree")
}

/// A star with centre `v0` and arms `v1 ..` of the given lengths.
pub fn star<S: Scalar>(arms: &[S]) -> TreeSpec<S> {
    let mut b = TreeBuilder::with_vertices(arms.len() + 1);
    for (i, &len) in arms.iter().enumerate() {
        b.add_edge(VertexId(0), VertexId(i + 1), len);
    }
    b.set_root(VertexId(0));
    b.build().expect("fixture is a tree")
}

/// A random recursive tree on `n` vertices: vertex `i` attaches to a uniform
/// earlier vertex. Lengths are uniform on `[min_len, max_len)`; the root is `v0`.
pub fn random_tree<S: Scalar, R: Rng + ?Sized>(rng: &mut R, n: usize, min_len: f64, max_len: f64) -> TreeSpec<S> {
    let n = n.max(2);
    let mut b = TreeBuilder::with_vertices(n);
    for i in 1..n {
        let parent = rng.gen_range(0..i);
        let len = rng.gen_range(min_len..max_len);
        b.add_edge(VertexId(parent), VertexId(i), S::of(len));
    }
    b.set_root(VertexId(0));
    b.build().expect("attachment produces a tree")
}

/// Random densities on `[min, max)` and, with probability `atom_p` per vertex, an
/// atom on `[0, max)`.
pub fn random_measure<S: Scalar, R: Rng + ?Sized>(
    rng: &mut R,
    tree: &TreeSpec<S>,
    min: f64,
    max: f64,
    atom_p: f64,
) -> Result<SpeedMeasure<S>> {
    let density = (0..tree.edge_count()).map(|_| S::of(rng.gen_range(min..max))).collect();
    let atom = (0..tree.vertex_count())
        .map(|_| if rng.gen_bool(atom_p) { S::of(rng.gen_range(0.0..max)) } else { S::zero() })
        .collect();
    SpeedMeasure::new(tree, density, atom)
}
