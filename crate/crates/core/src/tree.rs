//! Finite rooted metric trees and their metric calculus.
//!
//! A [`TreeSpec`] is the finite skeleton of an ℝ-tree: vertices joined by edges of
//! positive length. Points of the tree are addressed by [`PointRef`], either a vertex
//! or a position strictly inside an edge. All metric operations (distances, meets,
//! branch points, arcs) accept arbitrary points and are answered combinatorially
//! through the rooted structure, so equality of the returned points is exact.

use std::collections::{HashMap, VecDeque};
use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VertexId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeId(pub usize);

impl VertexId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl EdgeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

/// Whether a leaf is part of the space (`Closed`) or marks a missing completion
/// point (`Open`), i.e. the tree is incomplete there.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum LeafKind {
    #[default]
    Closed,
    Open,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge<S> {
    pub u: VertexId,
    pub v: VertexId,
    pub length: S,
}

impl<S: Copy> Edge<S> {
    /// The endpoint of the edge that is not `w`.
    pub fn other(&self, w: VertexId) -> VertexId {
        if w == self.u {
            self.v
        } else {
            self.u
        }
    }
}

/// A location on a tree. Interior offsets are measured from `edge.u` and lie
/// strictly between 0 and the edge length; endpoints are always represented as
/// vertices (see [`TreeSpec::point_on_edge`]).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PointRef<S> {
    Vertex(VertexId),
    Interior { edge: EdgeId, offset: S },
}

impl<S> From<VertexId> for PointRef<S> {
    fn from(v: VertexId) -> Self {
        PointRef::Vertex(v)
    }
}

impl<S> PointRef<S> {
    pub fn as_vertex(&self) -> Option<VertexId> {
        match self {
            PointRef::Vertex(v) => Some(*v),
            PointRef::Interior { .. } => None,
        }
    }
}

/// Incremental construction of a [`TreeSpec`].
#[derive(Clone, Debug)]
pub struct TreeBuilder<S> {
    names: Vec<String>,
    index: HashMap<String, VertexId>,
    open: Vec<bool>,
    edges: Vec<Edge<S>>,
    root: Option<VertexId>,
}

impl<S: Scalar> Default for TreeBuilder<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Scalar> TreeBuilder<S> {
    pub fn new() -> Self {
        TreeBuilder {
            names: Vec::new(),
            index: HashMap::new(),
            open: Vec::new(),
            edges: Vec::new(),
            root: None,
        }
    }

    /// A builder pre-populated with vertices named `v0 .. v{n-1}`.
    pub fn with_vertices(n: usize) -> Self {
        let mut b = Self::new();
        for i in 0..n {
            b.add_vertex(&format!("v{i}")).expect("fresh names are unique");
        }
        b
    }

    pub fn add_vertex(&mut self, name: &str) -> Result<VertexId> {
        if name.is_empty() || name.chars().any(char::is_whitespace) || name.starts_with('#') {
            return Err(Error::InvalidTree(format!("invalid vertex name {name:?}")));
        }
        if self.index.contains_key(name) {
            return Err(Error::InvalidTree(format!("duplicate vertex {name:?}")));
        }
        let id = VertexId(self.names.len());
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), id);
        self.open.push(false);
        Ok(id)
    }

    pub fn vertex(&self, name: &str) -> Option<VertexId> {
        self.index.get(name).copied()
    }

    pub fn set_open(&mut self, v: VertexId, open: bool) -> &mut Self {
        self.open[v.0] = open;
        self
    }

    pub fn add_edge(&mut self, u: VertexId, v: VertexId, length: S) -> EdgeId {
        self.edges.push(Edge { u, v, length });
        EdgeId(self.edges.len() - 1)
    }

    pub fn set_root(&mut self, root: VertexId) -> &mut Self {
        self.root = Some(root);
        self
    }

    pub fn build(self) -> Result<TreeSpec<S>> {
        let root = self
            .root
            .ok_or_else(|| Error::InvalidTree("no root".into()))?;
        TreeSpec::from_parts(self.names, self.open, self.edges, root)
    }
}

/// A finite rooted metric tree. Immutable once built.
#[derive(Clone, Debug)]
pub struct TreeSpec<S> {
    names: Vec<String>,
    index: HashMap<String, VertexId>,
    open: Vec<bool>,
    edges: Vec<Edge<S>>,
    root: VertexId,
    adjacency: Vec<Vec<(VertexId, EdgeId)>>,
    parent: Vec<Option<(VertexId, EdgeId)>>,
    depth: Vec<S>,
    level: Vec<usize>,
    order: Vec<VertexId>,
    ancestors: Vec<Vec<usize>>,
}

impl<S: Scalar> PartialEq for TreeSpec<S> {
    fn eq(&self, other: &Self) -> bool {
        self.names == other.names
            && self.open == other.open
            && self.edges == other.edges
            && self.root == other.root
    }
}

impl<S: Scalar> TreeSpec<S> {
    /// Validates the raw parts and precomputes the rooted structure.
    pub fn from_parts(
        names: Vec<String>,
        open: Vec<bool>,
        edges: Vec<Edge<S>>,
        root: VertexId,
    ) -> Result<Self> {
        let n = names.len();
        if n == 0 {
            return Err(Error::InvalidTree("tree has no vertices".into()));
        }
        if open.len() != n {
            return Err(Error::InvalidTree("leaf kinds do not match vertices".into()));
        }
        if root.0 >= n {
            return Err(Error::InvalidTree(format!("root {} out of range", root.0)));
        }
        let mut index = HashMap::with_capacity(n);
        for (i, name) in names.iter().enumerate() {
            if index.insert(name.clone(), VertexId(i)).is_some() {
                return Err(Error::InvalidTree(format!("duplicate vertex {name:?}")));
            }
        }
        if edges.len() + 1 != n {
            return Err(Error::InvalidTree(format!(
                "{n} vertices need {} edges, got {}",
                n - 1,
                edges.len()
            )));
        }
        let mut adjacency = vec![Vec::new(); n];
        for (i, e) in edges.iter().enumerate() {
            if e.u.0 >= n || e.v.0 >= n {
                return Err(Error::InvalidTree(format!("edge {i} has an unknown endpoint")));
            }
            if e.u == e.v {
                return Err(Error::InvalidTree(format!("edge {i} is a loop")));
            }
            if !(e.length > S::zero() && e.length.is_finite()) {
                return Err(Error::InvalidTree(format!(
                    "edge {i} has non-positive or non-finite length {}",
                    e.length
                )));
            }
            adjacency[e.u.0].push((e.v, EdgeId(i)));
            adjacency[e.v.0].push((e.u, EdgeId(i)));
        }
        for (i, &is_open) in open.iter().enumerate() {
            if is_open && adjacency[i].len() != 1 {
                return Err(Error::InvalidTree(format!(
                    "vertex {:?} is marked open but is not a leaf",
                    names[i]
                )));
            }
        }
        let mut tree = TreeSpec {
            names,
            index,
            open,
            edges,
            root,
            adjacency,
            parent: Vec::new(),
            depth: Vec::new(),
            level: Vec::new(),
            order: Vec::new(),
            ancestors: Vec::new(),
        };
        tree.index_from_root()?;
        Ok(tree)
    }

    fn index_from_root(&mut self) -> Result<()> {
        let n = self.names.len();
        let mut parent = vec![None; n];
        let mut depth = vec![S::zero(); n];
        let mut level = vec![0usize; n];
        let mut seen = vec![false; n];
        let mut order = Vec::with_capacity(n);
        let mut queue = VecDeque::new();
        seen[self.root.0] = true;
        queue.push_back(self.root);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for &(w, e) in &self.adjacency[v.0] {
                if !seen[w.0] {
                    seen[w.0] = true;
                    parent[w.0] = Some((v, e));
                    depth[w.0] = depth[v.0] + self.edges[e.0].length;
                    level[w.0] = level[v.0] + 1;
                    queue.push_back(w);
                }
            }
        }
        if order.len() != n {
            return Err(Error::InvalidTree("edges do not connect all vertices".into()));
        }
        let max_level = level.iter().copied().max().unwrap_or(0);
        let mut log = 1;
        while (1usize << log) <= max_level {
            log += 1;
        }
        let mut ancestors = vec![vec![0usize; n]; log];
        for v in 0..n {
            ancestors[0][v] = parent[v].map_or(v, |(p, _)| p.0);
        }
        for k in 1..log {
            for v in 0..n {
                ancestors[k][v] = ancestors[k - 1][ancestors[k - 1][v]];
            }
        }
        self.parent = parent;
        self.depth = depth;
        self.level = level;
        self.order = order;
        self.ancestors = ancestors;
        Ok(())
    }

    // ---- accessors -------------------------------------------------------------

    pub fn vertex_count(&self) -> usize {
        self.names.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> impl Iterator<Item = VertexId> + '_ {
        (0..self.names.len()).map(VertexId)
    }

    pub fn edges(&self) -> &[Edge<S>] {
        &self.edges
    }

    pub fn edge(&self, e: EdgeId) -> &Edge<S> {
        &self.edges[e.0]
    }

    pub fn root(&self) -> VertexId {
        self.root
    }

    pub fn name(&self, v: VertexId) -> &str {
        &self.names[v.0]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn vertex(&self, name: &str) -> Option<VertexId> {
        self.index.get(name).copied()
    }

    /// Looks up a vertex by name, failing with [`Error::InvalidPoint`].
    pub fn require_vertex(&self, name: &str) -> Result<VertexId> {
        self.vertex(name)
            .ok_or_else(|| Error::InvalidPoint(format!("unknown vertex {name:?}")))
    }

    pub fn leaf_kind(&self, v: VertexId) -> LeafKind {
        if self.open[v.0] {
            LeafKind::Open
        } else {
            LeafKind::Closed
        }
    }

    pub fn is_open(&self, v: VertexId) -> bool {
        self.open[v.0]
    }

    pub fn has_open_leaves(&self) -> bool {
        self.open.iter().any(|&o| o)
    }

    pub fn degree(&self, v: VertexId) -> usize {
        self.adjacency[v.0].len()
    }

    pub fn is_leaf(&self, v: VertexId) -> bool {
        self.adjacency[v.0].len() == 1
    }

    pub fn neighbors(&self, v: VertexId) -> &[(VertexId, EdgeId)] {
        &self.adjacency[v.0]
    }

    /// Parent vertex and the connecting edge, `None` at the root.
    pub fn parent(&self, v: VertexId) -> Option<(VertexId, EdgeId)> {
        self.parent[v.0]
    }

    /// Distance from the root.
    pub fn depth(&self, v: VertexId) -> S {
        self.depth[v.0]
    }

    /// Vertices in breadth-first order from the root; parents precede children.
    pub fn bfs_order(&self) -> &[VertexId] {
        &self.order
    }

    /// The endpoint of `e` farther from the root.
    pub fn child_end(&self, e: EdgeId) -> VertexId {
        let edge = &self.edges[e.0];
        match self.parent[edge.u.0] {
            Some((_, pe)) if pe == e => edge.u,
            _ => edge.v,
        }
    }

    /// The endpoint of `e` closer to the root.
    pub fn parent_end(&self, e: EdgeId) -> VertexId {
        let c = self.child_end(e);
        self.edges[e.0].other(c)
    }

    pub fn total_length(&self) -> S {
        self.edges.iter().map(|e| e.length).sum()
    }

    // ---- points ----------------------------------------------------------------

    /// Canonical point at `offset` from `edge.u`; endpoints become vertices.
    pub fn point_on_edge(&self, e: EdgeId, offset: S) -> Result<PointRef<S>> {
        let edge = self
            .edges
            .get(e.0)
            .ok_or_else(|| Error::InvalidPoint(format!("unknown edge {}", e.0)))?;
        if !offset.is_finite() || offset < S::zero() || offset > edge.length {
            return Err(Error::InvalidPoint(format!(
                "offset {offset} outside [0, {}] on edge {}",
                edge.length, e.0
            )));
        }
        Ok(if offset == S::zero() {
            PointRef::Vertex(edge.u)
        } else if offset == edge.length {
            PointRef::Vertex(edge.v)
        } else {
            PointRef::Interior { edge: e, offset }
        })
    }

    pub fn validate_point(&self, p: &PointRef<S>) -> Result<()> {
        match *p {
            PointRef::Vertex(v) if v.0 < self.names.len() => Ok(()),
            PointRef::Vertex(v) => Err(Error::InvalidPoint(format!("unknown vertex {}", v.0))),
            PointRef::Interior { edge, offset } => {
                let e = self
                    .edges
                    .get(edge.0)
                    .ok_or_else(|| Error::InvalidPoint(format!("unknown edge {}", edge.0)))?;
                if offset > S::zero() && offset < e.length {
                    Ok(())
                } else {
                    Err(Error::InvalidPoint(format!(
                        "interior offset {offset} not strictly inside (0, {}) on edge {}",
                        e.length, edge.0
                    )))
                }
            }
        }
    }

    /// Offset of an interior point measured from the parent end of its edge.
    fn offset_from_parent(&self, e: EdgeId, offset: S) -> S {
        let edge = &self.edges[e.0];
        if self.parent_end(e) == edge.u {
            offset
        } else {
            edge.length - offset
        }
    }

    /// Distance from the root to a point.
    pub fn point_depth(&self, p: &PointRef<S>) -> S {
        match *p {
            PointRef::Vertex(v) => self.depth[v.0],
            PointRef::Interior { edge, offset } => {
                self.depth[self.parent_end(edge).0] + self.offset_from_parent(edge, offset)
            }
        }
    }

    /// The shallowest vertex at or below `p`.
    fn low_vertex(&self, p: &PointRef<S>) -> VertexId {
        match *p {
            PointRef::Vertex(v) => v,
            PointRef::Interior { edge, .. } => self.child_end(edge),
        }
    }

    /// Lowest common ancestor of two vertices with respect to the root.
    pub fn lca(&self, a: VertexId, b: VertexId) -> VertexId {
        let (mut a, mut b) = (a.0, b.0);
        if self.level[a] < self.level[b] {
            std::mem::swap(&mut a, &mut b);
        }
        let mut diff = self.level[a] - self.level[b];
        let mut k = 0;
        while diff > 0 {
            if diff & 1 == 1 {
                a = self.ancestors[k][a];
            }
            diff >>= 1;
            k += 1;
        }
        if a == b {
            return VertexId(a);
        }
        for k in (0..self.ancestors.len()).rev() {
            if self.ancestors[k][a] != self.ancestors[k][b] {
                a = self.ancestors[k][a];
                b = self.ancestors[k][b];
            }
        }
        VertexId(self.ancestors[0][a])
    }

    /// `x ∧ y`: the branch point of the root, `x` and `y`.
    pub fn meet(&self, x: &PointRef<S>, y: &PointRef<S>) -> Result<PointRef<S>> {
        self.validate_point(x)?;
        self.validate_point(y)?;
        Ok(self.meet_unchecked(x, y))
    }

    fn meet_unchecked(&self, x: &PointRef<S>, y: &PointRef<S>) -> PointRef<S> {
        if let (
            PointRef::Interior { edge: ex, offset: ox },
            PointRef::Interior { edge: ey, offset: oy },
        ) = (*x, *y)
        {
            if ex == ey {
                let (dx, dy) = (self.offset_from_parent(ex, ox), self.offset_from_parent(ey, oy));
                return if dx <= dy { *x } else { *y };
            }
        }
        let (lx, ly) = (self.low_vertex(x), self.low_vertex(y));
        let l = self.lca(lx, ly);
        if l == lx && matches!(x, PointRef::Interior { .. }) {
            *x
        } else if l == ly && matches!(y, PointRef::Interior { .. }) {
            *y
        } else {
            PointRef::Vertex(l)
        }
    }

    /// The branch point `c(a, b, x)`: the unique point with `[a,x] ∩ [a,b] = [a,c]`.
    pub fn branch_point(
        &self,
        a: &PointRef<S>,
        b: &PointRef<S>,
        x: &PointRef<S>,
    ) -> Result<PointRef<S>> {
        self.validate_point(a)?;
        self.validate_point(b)?;
        self.validate_point(x)?;
        Ok(self.branch_point_unchecked(a, b, x))
    }

    pub(crate) fn branch_point_unchecked(
        &self,
        a: &PointRef<S>,
        b: &PointRef<S>,
        x: &PointRef<S>,
    ) -> PointRef<S> {
        // Two of the three pairwise meets coincide; the odd one out is the median.
        let ab = self.meet_unchecked(a, b);
        let ax = self.meet_unchecked(a, x);
        let bx = self.meet_unchecked(b, x);
        if ab == ax {
            bx
        } else if ab == bx {
            ax
        } else {
            ab
        }
    }

    pub fn distance(&self, x: &PointRef<S>, y: &PointRef<S>) -> Result<S> {
        self.validate_point(x)?;
        self.validate_point(y)?;
        Ok(self.distance_unchecked(x, y))
    }

    pub(crate) fn distance_unchecked(&self, x: &PointRef<S>, y: &PointRef<S>) -> S {
        if x == y {
            return S::zero();
        }
        let m = self.meet_unchecked(x, y);
        let d = self.point_depth(x) + self.point_depth(y) - self.point_depth(&m) * S::of(2.0);
        d.max(S::zero())
    }

    /// Distance between two vertices.
    pub fn vertex_distance(&self, a: VertexId, b: VertexId) -> S {
        self.distance_unchecked(&PointRef::Vertex(a), &PointRef::Vertex(b))
    }

    /// Whether `m` lies on the arc `[x, y]`.
    pub fn on_arc(&self, m: &PointRef<S>, x: &PointRef<S>, y: &PointRef<S>) -> Result<bool> {
        Ok(self.branch_point(x, y, m)? == *m)
    }

    /// Largest distance between two points; attained at a pair of leaves.
    pub fn diameter(&self) -> S {
        self.diameter_pair().2
    }

    /// Endpoints and length of a longest arc, found by a double sweep.
    pub fn diameter_pair(&self) -> (VertexId, VertexId, S) {
        let far = |from: VertexId| {
            self.vertices()
                .map(|v| (v, self.vertex_distance(from, v)))
                .fold((from, S::zero()), |best, cur| if cur.1 > best.1 { cur } else { best })
        };
        let (a, _) = far(self.root);
        let (b, d) = far(a);
        (a, b, d)
    }

    /// Vertices on the path from `a` to `b`, inclusive, in order.
    pub fn vertex_path(&self, a: VertexId, b: VertexId) -> Vec<VertexId> {
        let l = self.lca(a, b);
        let climb = |mut v: VertexId| {
            let mut out = vec![v];
            while v != l {
                v = self.parent[v.0].expect("below lca").0;
                out.push(v);
            }
            out
        };
        let mut up = climb(a);
        let mut down = climb(b);
        down.pop();
        down.reverse();
        up.extend(down);
        up
    }

    /// Edges on the path from `a` to `b`, in order.
    pub fn edge_path(&self, a: VertexId, b: VertexId) -> Vec<EdgeId> {
        let verts = self.vertex_path(a, b);
        verts
            .windows(2)
            .map(|w| {
                self.adjacency[w[0].0]
                    .iter()
                    .find(|(n, _)| *n == w[1])
                    .expect("consecutive path vertices are adjacent")
                    .1
            })
            .collect()
    }

    // ---- transforms --------------------------------------------------------------

    /// The same tree rooted at another vertex.
    pub fn with_root(&self, root: VertexId) -> Result<Self> {
        TreeSpec::from_parts(self.names.clone(), self.open.clone(), self.edges.clone(), root)
    }

    /// Same topology with edge lengths replaced.
    pub fn with_lengths(&self, lengths: &[S]) -> Result<Self> {
        if lengths.len() != self.edges.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} edge lengths, got {}",
                self.edges.len(),
                lengths.len()
            )));
        }
        let edges = self
            .edges
            .iter()
            .zip(lengths)
            .map(|(e, &length)| Edge { length, ..*e })
            .collect();
        TreeSpec::from_parts(self.names.clone(), self.open.clone(), edges, self.root)
    }

    /// Scale change by a potential constant on each edge: every length `l` becomes
    /// `l * exp(-2 phi)`, which is the integral of `exp(-2 phi)` over the edge.
    pub fn apply_potential(&self, phi: &[S]) -> Result<Self> {
        if phi.len() != self.edges.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} potential values, got {}",
                self.edges.len(),
                phi.len()
            )));
        }
        if let Some(i) = phi.iter().position(|p| !p.is_finite()) {
            return Err(Error::InvalidArgument(format!("potential on edge {i} is not finite")));
        }
        let lengths: Vec<S> = self
            .edges
            .iter()
            .zip(phi)
            .map(|(e, &p)| e.length * (-(p + p)).exp())
            .collect();
        self.with_lengths(&lengths)
    }

    /// Splits every edge into `ceil(length / h)` equal pieces.
    pub fn subdivide(&self, h: S) -> Result<(Self, SubdivisionMap<S>)> {
        if !(h > S::zero() && h.is_finite()) {
            return Err(Error::InvalidArgument(format!("mesh size must be positive, got {h}")));
        }
        let cuts = self
            .edges
            .iter()
            .map(|e| {
                let n = pieces_for(e.length, h);
                let step = e.length / S::of_usize(n);
                (1..n).map(|i| step * S::of_usize(i)).collect()
            })
            .collect();
        self.refine(cuts)
    }

    /// Inserts the given points as vertices. Points that already are vertices are
    /// left alone; duplicates are merged.
    pub fn refine_at(&self, points: &[PointRef<S>]) -> Result<(Self, SubdivisionMap<S>)> {
        let mut cuts: Vec<Vec<S>> = vec![Vec::new(); self.edges.len()];
        for p in points {
            self.validate_point(p)?;
            if let PointRef::Interior { edge, offset } = *p {
                cuts[edge.0].push(offset);
            }
        }
        for c in &mut cuts {
            c.sort_by(|a, b| a.partial_cmp(b).expect("finite offsets"));
            c.dedup();
        }
        self.refine(cuts)
    }

    /// Refines the tree at the given strictly increasing interior offsets per edge.
    pub fn refine(&self, cuts: Vec<Vec<S>>) -> Result<(Self, SubdivisionMap<S>)> {
        if cuts.len() != self.edges.len() {
            return Err(Error::InvalidArgument("one cut list per edge required".into()));
        }
        let mut names = self.names.clone();
        let mut open = self.open.clone();
        let mut taken: std::collections::HashSet<String> = names.iter().cloned().collect();
        let mut edges = Vec::new();
        let mut map_cuts = Vec::with_capacity(self.edges.len());
        let mut pieces = Vec::with_capacity(self.edges.len());
        let mut origin = Vec::new();
        for (ei, (edge, offs)) in self.edges.iter().zip(&cuts).enumerate() {
            let mut prev_off = S::zero();
            for w in offs.windows(2) {
                if !(w[0] < w[1]) {
                    return Err(Error::InvalidArgument(format!(
                        "cuts on edge {ei} are not strictly increasing"
                    )));
                }
            }
            if offs.iter().any(|&o| !(o > S::zero() && o < edge.length)) {
                return Err(Error::InvalidArgument(format!("cut outside edge {ei}")));
            }
            let mut prev = edge.u;
            let mut edge_cuts = Vec::with_capacity(offs.len());
            let mut edge_pieces = Vec::with_capacity(offs.len() + 1);
            for (i, &off) in offs.iter().enumerate() {
                let mut name = format!("{}~{}@{}", self.names[edge.u.0], self.names[edge.v.0], i + 1);
                while taken.contains(&name) {
                    name.push('\'');
                }
                taken.insert(name.clone());
                let id = VertexId(names.len());
                names.push(name);
                open.push(false);
                edge_pieces.push(EdgeId(edges.len()));
                edges.push(Edge { u: prev, v: id, length: off - prev_off });
                origin.push(PieceOrigin { edge: EdgeId(ei), start: prev_off, end: off });
                edge_cuts.push((off, id));
                prev = id;
                prev_off = off;
            }
            edge_pieces.push(EdgeId(edges.len()));
            edges.push(Edge { u: prev, v: edge.v, length: edge.length - prev_off });
            origin.push(PieceOrigin { edge: EdgeId(ei), start: prev_off, end: edge.length });
            map_cuts.push(edge_cuts);
            pieces.push(edge_pieces);
        }
        let mesh = TreeSpec::from_parts(names, open, edges, self.root)?;
        let map = SubdivisionMap {
            source_vertices: self.names.len(),
            source_lengths: self.edges.iter().map(|e| e.length).collect(),
            cuts: map_cuts,
            pieces,
            origin,
        };
        Ok((mesh, map))
    }
}

fn pieces_for<S: Scalar>(length: S, h: S) -> usize {
    let ratio = length / h;
    let mut n = ratio.ceil().to_usize().unwrap_or(usize::MAX).max(1);
    // Absorb rounding in the quotient, e.g. 1.0000000000000002 pieces.
    if n > 1 && length / S::of_usize(n - 1) <= h * (S::one() + S::tolerance()) {
        n -= 1;
    }
    n
}

/// Where a mesh edge came from: a source edge and the offset range it covers,
/// measured from the source edge's `u` end.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PieceOrigin<S> {
    pub edge: EdgeId,
    pub start: S,
    pub end: S,
}

/// Correspondence between a tree and one of its refinements. Source vertices keep
/// their ids in the refinement; new vertices are appended after them.
#[derive(Clone, Debug)]
pub struct SubdivisionMap<S> {
    source_vertices: usize,
    source_lengths: Vec<S>,
    cuts: Vec<Vec<(S, VertexId)>>,
    pieces: Vec<Vec<EdgeId>>,
    origin: Vec<PieceOrigin<S>>,
}

impl<S: Scalar> SubdivisionMap<S> {
    /// The identity refinement of `tree`.
    pub fn identity(tree: &TreeSpec<S>) -> Self {
        SubdivisionMap {
            source_vertices: tree.vertex_count(),
            source_lengths: tree.edges.iter().map(|e| e.length).collect(),
            cuts: vec![Vec::new(); tree.edge_count()],
            pieces: (0..tree.edge_count()).map(|i| vec![EdgeId(i)]).collect(),
            origin: tree
                .edges
                .iter()
                .enumerate()
                .map(|(i, e)| PieceOrigin { edge: EdgeId(i), start: S::zero(), end: e.length })
                .collect(),
        }
    }

    pub fn source_vertex_count(&self) -> usize {
        self.source_vertices
    }

    /// Source edge and offsets covered by a mesh edge.
    pub fn origin(&self, mesh_edge: EdgeId) -> PieceOrigin<S> {
        self.origin[mesh_edge.0]
    }

    /// Mesh edges covering a source edge, ordered from its `u` end.
    pub fn pieces(&self, source_edge: EdgeId) -> &[EdgeId] {
        &self.pieces[source_edge.0]
    }

    /// Mesh vertices inserted inside a source edge with their offsets.
    pub fn cuts(&self, source_edge: EdgeId) -> &[(S, VertexId)] {
        &self.cuts[source_edge.0]
    }

    pub fn is_source_vertex(&self, v: VertexId) -> bool {
        v.0 < self.source_vertices
    }

    /// Carries a point of the source tree to the same point of the refinement.
    pub fn map_point(&self, mesh: &TreeSpec<S>, p: &PointRef<S>) -> Result<PointRef<S>> {
        match *p {
            PointRef::Vertex(v) if v.0 < self.source_vertices => Ok(PointRef::Vertex(v)),
            PointRef::Vertex(v) => Err(Error::InvalidPoint(format!("unknown vertex {}", v.0))),
            PointRef::Interior { edge, offset } => {
                let len = *self
                    .source_lengths
                    .get(edge.0)
                    .ok_or_else(|| Error::InvalidPoint(format!("unknown edge {}", edge.0)))?;
                if !(offset > S::zero() && offset < len) {
                    return Err(Error::InvalidPoint(format!(
                        "interior offset {offset} not inside (0, {len})"
                    )));
                }
                let cuts = &self.cuts[edge.0];
                let k = cuts.partition_point(|&(o, _)| o < offset);
                if k < cuts.len() && cuts[k].0 == offset {
                    return Ok(PointRef::Vertex(cuts[k].1));
                }
                let piece = self.pieces[edge.0][k];
                let start = self.origin[piece.0].start;
                let local = (offset - start).min(mesh.edge(piece).length);
                mesh.point_on_edge(piece, local)
            }
        }
    }

    /// The mesh vertex at `p`, if `p` is a mesh vertex.
    pub fn map_vertex(&self, mesh: &TreeSpec<S>, p: &PointRef<S>) -> Result<VertexId> {
        self.map_point(mesh, p)?
            .as_vertex()
            .ok_or_else(|| Error::InvalidPoint("point is not a vertex of the mesh".into()))
    }

    /// Composes `self: source -> mid` with `next: mid -> fine` into `source -> fine`.
    pub fn then(&self, next: &SubdivisionMap<S>) -> SubdivisionMap<S> {
        let mut cuts = Vec::with_capacity(self.cuts.len());
        let mut pieces = Vec::with_capacity(self.pieces.len());
        let mut origin = vec![
            PieceOrigin { edge: EdgeId(0), start: S::zero(), end: S::zero() };
            next.origin.len()
        ];
        for (e, mid_pieces) in self.pieces.iter().enumerate() {
            let mut edge_cuts = Vec::new();
            let mut edge_pieces = Vec::new();
            for (i, &mp) in mid_pieces.iter().enumerate() {
                let base = self.origin[mp.0].start;
                if i > 0 {
                    edge_cuts.push(self.cuts[e][i - 1]);
                }
                for &(off, v) in &next.cuts[mp.0] {
                    edge_cuts.push((base + off, v));
                }
                for &fp in &next.pieces[mp.0] {
                    let o = next.origin[fp.0];
                    origin[fp.0] = PieceOrigin { edge: EdgeId(e), start: base + o.start, end: base + o.end };
                    edge_pieces.push(fp);
                }
            }
            cuts.push(edge_cuts);
            pieces.push(edge_pieces);
        }
        SubdivisionMap {
            source_vertices: self.source_vertices,
            source_lengths: self.source_lengths.clone(),
            cuts,
            pieces,
            origin,
        }
    }
}

impl<S: Scalar> fmt::Display for TreeSpec<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "tree({} vertices, {} edges, root {})",
            self.vertex_count(),
            self.edge_count(),
            self.name(self.root)
        )
    }
}
