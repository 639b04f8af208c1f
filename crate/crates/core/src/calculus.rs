//! Piecewise linear functions on a tree, their gradients with respect to the
//! root, oriented integration, and the Dirichlet energy `½∫∇f∇g dλ`.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tree::{EdgeId, PointRef, SubdivisionMap, TreeSpec, VertexId};

/// A continuous function that is linear along every edge, stored by its vertex values.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseLinearFn<S> {
    values: Vec<S>,
}

impl<S: Scalar> PiecewiseLinearFn<S> {
    pub fn new(tree: &TreeSpec<S>, values: Vec<S>) -> Result<Self> {
        if values.len() != tree.vertex_count() {
            return Err(Error::MeshMismatch { expected: tree.vertex_count(), got: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "value at {:?} is not finite",
                tree.name(VertexId(i))
            )));
        }
        Ok(PiecewiseLinearFn { values })
    }

    pub fn constant(tree: &TreeSpec<S>, c: S) -> Self {
        PiecewiseLinearFn { values: vec![c; tree.vertex_count()] }
    }

    pub fn from_fn(tree: &TreeSpec<S>, f: impl FnMut(VertexId) -> S) -> Self {
        PiecewiseLinearFn { values: tree.vertices().map(f).collect() }
    }

    pub(crate) fn from_values_unchecked(values: Vec<S>) -> Self {
        PiecewiseLinearFn { values }
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn into_values(self) -> Vec<S> {
        self.values
    }

    #[inline]
    pub fn value(&self, v: VertexId) -> S {
        self.values[v.0]
    }

    pub(crate) fn check(&self, tree: &TreeSpec<S>) -> Result<()> {
        if self.values.len() == tree.vertex_count() {
            Ok(())
        } else {
            Err(Error::MeshMismatch { expected: tree.vertex_count(), got: self.values.len() })
        }
    }

    /// Value at an arbitrary point by linear interpolation along its edge.
    pub fn eval(&self, tree: &TreeSpec<S>, p: &PointRef<S>) -> Result<S> {
        self.check(tree)?;
        tree.validate_point(p)?;
        Ok(match *p {
            PointRef::Vertex(v) => self.values[v.0],
            PointRef::Interior { edge, offset } => {
                let e = tree.edge(edge);
                let t = offset / e.length;
                self.values[e.u.0] * (S::one() - t) + self.values[e.v.0] * t
            }
        })
    }

    /// The same function on a refinement of its tree.
    pub fn refine(&self, map: &SubdivisionMap<S>, source: &TreeSpec<S>, mesh: &TreeSpec<S>) -> Result<Self> {
        self.check(source)?;
        let mut values = vec![S::zero(); mesh.vertex_count()];
        values[..source.vertex_count()].copy_from_slice(&self.values);
        for (i, e) in source.edges().iter().enumerate() {
            for &(off, v) in map.cuts(EdgeId(i)) {
                let t = off / e.length;
                values[v.0] = self.values[e.u.0] * (S::one() - t) + self.values[e.v.0] * t;
            }
        }
        Ok(PiecewiseLinearFn { values })
    }

    /// Restriction to the source vertices of a refinement.
    pub fn restrict(&self, map: &SubdivisionMap<S>) -> Self {
        PiecewiseLinearFn { values: self.values[..map.source_vertex_count()].to_vec() }
    }

    /// `vertex_id,value` lines with a header.
    pub fn to_csv(&self, tree: &TreeSpec<S>) -> String {
        let mut out = String::from("vertex_id,value\n");
        for v in tree.vertices() {
            let _ = writeln!(out, "{},{}", tree.name(v), self.values[v.0]);
        }
        out
    }

    /// Reads `vertex_id,value` lines; every vertex must appear exactly once.
    pub fn from_csv(tree: &TreeSpec<S>, text: &str) -> Result<Self> {
        let mut values: Vec<Option<S>> = vec![None; tree.vertex_count()];
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || (lineno == 0 && line == "vertex_id,value") {
                continue;
            }
            let err = |message: String| Error::Parse { line: lineno + 1, column: 1, message };
            let (name, value) = line
                .split_once(',')
                .ok_or_else(|| err("expected `vertex_id,value`".into()))?;
            let v = tree
                .vertex(name.trim())
                .ok_or_else(|| err(format!("unknown vertex {:?}", name.trim())))?;
            let x: f64 = value
                .trim()
                .parse()
                .map_err(|_| err(format!("invalid number {:?}", value.trim())))?;
            if values[v.0].replace(S::of(x)).is_some() {
                return Err(err(format!("vertex {name:?} listed twice")));
            }
        }
        let values = values
            .into_iter()
            .enumerate()
            .map(|(i, v)| {
                v.ok_or_else(|| Error::InvalidArgument(format!(
                    "no value for vertex {:?}",
                    tree.name(VertexId(i))
                )))
            })
            .collect::<Result<Vec<_>>>()?;
        PiecewiseLinearFn::new(tree, values)
    }
}

/// Slopes of a function along each edge, oriented away from the root.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeGradient<S> {
    slopes: Vec<S>,
}

impl<S: Scalar> EdgeGradient<S> {
    /// An edge density read in the away-from-root direction.
    pub fn from_slopes(tree: &TreeSpec<S>, slopes: Vec<S>) -> Result<Self> {
        if slopes.len() != tree.edge_count() {
            return Err(Error::MeshMismatch { expected: tree.edge_count(), got: slopes.len() });
        }
        Ok(EdgeGradient { slopes })
    }

    pub fn slope(&self, e: EdgeId) -> S {
        self.slopes[e.0]
    }

    pub fn slopes(&self) -> &[S] {
        &self.slopes
    }
}

/// The gradient of `f`: on every edge, (value at the far end − value at the
/// near end) / length, where "near" is the end closer to the root.
pub fn gradient<S: Scalar>(tree: &TreeSpec<S>, f: &PiecewiseLinearFn<S>) -> Result<EdgeGradient<S>> {
    f.check(tree)?;
    let slopes = (0..tree.edge_count())
        .map(|i| {
            let e = EdgeId(i);
            let (near, far) = (tree.parent_end(e), tree.child_end(e));
            (f.value(far) - f.value(near)) / tree.edge(e).length
        })
        .collect();
    Ok(EdgeGradient { slopes })
}

/// `∫_{[ρ,p]} g dλ` accumulated along the root path.
fn integral_from_root<S: Scalar>(tree: &TreeSpec<S>, g: &EdgeGradient<S>, p: &PointRef<S>) -> S {
    let (mut acc, mut v) = match *p {
        PointRef::Vertex(v) => (S::zero(), v),
        PointRef::Interior { edge, offset } => {
            let e = tree.edge(edge);
            let near = tree.parent_end(edge);
            let along = if near == e.u { offset } else { e.length - offset };
            (g.slope(edge) * along, near)
        }
    };
    while let Some((parent, e)) = tree.parent(v) {
        acc += g.slope(e) * tree.edge(e).length;
        v = parent;
    }
    acc
}

/// Orientation-sensitive integral from `x` to `y`:
/// `−∫_{[x∧y,x]} g dλ + ∫_{[x∧y,y]} g dλ`.
pub fn oriented_integral<S: Scalar>(
    tree: &TreeSpec<S>,
    g: &EdgeGradient<S>,
    x: &PointRef<S>,
    y: &PointRef<S>,
) -> Result<S> {
    if g.slopes.len() != tree.edge_count() {
        return Err(Error::MeshMismatch { expected: tree.edge_count(), got: g.slopes.len() });
    }
    let m = tree.meet(x, y)?;
    let base = integral_from_root(tree, g, &m);
    Ok((integral_from_root(tree, g, y) - base) - (integral_from_root(tree, g, x) - base))
}

/// `½ Σ_e slope_f · slope_g · length`, the Dirichlet form on piecewise linear functions.
pub fn energy<S: Scalar>(tree: &TreeSpec<S>, f: &PiecewiseLinearFn<S>, g: &PiecewiseLinearFn<S>) -> Result<S> {
    f.check(tree)?;
    g.check(tree)?;
    let half = S::of(0.5);
    Ok(tree
        .edges()
        .iter()
        .map(|e| (f.value(e.v) - f.value(e.u)) * (g.value(e.v) - g.value(e.u)) / e.length * half)
        .sum())
}

/// `g_a(x) = r(a, x)` at every vertex.
pub fn distance_function<S: Scalar>(tree: &TreeSpec<S>, a: &PointRef<S>) -> Result<PiecewiseLinearFn<S>> {
    tree.validate_point(a)?;
    Ok(PiecewiseLinearFn::from_fn(tree, |v| tree.distance_unchecked(a, &PointRef::Vertex(v))))
}

/// `f_{a,b}(x) = r(c(x,a,b), b)` at every vertex.
pub fn branch_distance_function<S: Scalar>(
    tree: &TreeSpec<S>,
    a: &PointRef<S>,
    b: &PointRef<S>,
) -> Result<PiecewiseLinearFn<S>> {
    tree.validate_point(a)?;
    tree.validate_point(b)?;
    Ok(PiecewiseLinearFn::from_fn(tree, |v| {
        let c = tree.branch_point_unchecked(&PointRef::Vertex(v), a, b);
        tree.distance_unchecked(&c, b)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::TreeBuilder;

    fn y_tree() -> TreeSpec<f64> {
        let mut b = TreeBuilder::<f64>::with_vertices(4);
        b.add_edge(VertexId(0), VertexId(1), 1.0);
        b.add_edge(VertexId(1), VertexId(2), 2.0);
        b.add_edge(VertexId(1), VertexId(3), 3.0);
        b.set_root(VertexId(0));
        b.build().unwrap()
    }

    #[test]
    fn distance_gradient_on_segment() {
        // [0,2] with a vertex at 1, rooted at 0.
        let mut b = TreeBuilder::<f64>::with_vertices(3);
        b.add_edge(VertexId(0), VertexId(1), 1.0);
        b.add_edge(VertexId(1), VertexId(2), 1.0);
        b.set_root(VertexId(0));
        let t = b.build().unwrap();
        let g = distance_function(&t, &PointRef::Vertex(VertexId(1))).unwrap();
        assert_eq!(gradient(&t, &g).unwrap().slopes(), &[-1.0, 1.0]);
    }

    #[test]
    fn branch_gradient_on_y_tree() {
        let t = y_tree();
        let f = branch_distance_function(&t, &VertexId(2).into(), &VertexId(3).into()).unwrap();
        assert_eq!(f.values(), &[3.0, 3.0, 5.0, 0.0]);
        assert_eq!(gradient(&t, &f).unwrap().slopes(), &[0.0, 1.0, -1.0]);
    }

    #[test]
    fn oriented_integral_basics() {
        let mut b = TreeBuilder::<f64>::with_vertices(2);
        b.add_edge(VertexId(0), VertexId(1), 2.0);
        b.set_root(VertexId(0));
        let t = b.build().unwrap();
        let one = EdgeGradient::from_slopes(&t, vec![1.0]).unwrap();
        let x = t.point_on_edge(EdgeId(0), 0.5).unwrap();
        let y = t.point_on_edge(EdgeId(0), 1.5).unwrap();
        assert_eq!(oriented_integral(&t, &one, &x, &y).unwrap(), 1.0);
        assert_eq!(oriented_integral(&t, &one, &y, &x).unwrap(), -1.0);
        assert_eq!(oriented_integral(&t, &one, &x, &x).unwrap(), 0.0);
    }

    #[test]
    fn energy_of_position() {
        let mut b = TreeBuilder::<f64>::with_vertices(3);
        b.add_edge(VertexId(0), VertexId(1), 0.5);
        b.add_edge(VertexId(1), VertexId(2), 0.5);
        b.set_root(VertexId(0));
        let t = b.build().unwrap();
        let f = PiecewiseLinearFn::new(&t, vec![0.0, 0.5, 1.0]).unwrap();
        assert!((energy(&t, &f, &f).unwrap() - 0.5).abs() < 1e-15);
        let c = PiecewiseLinearFn::constant(&t, 3.0);
        assert_eq!(energy(&t, &c, &c).unwrap(), 0.0);
        assert!(energy(&t, &f, &PiecewiseLinearFn::constant(&y_tree(), 0.0)).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let t = y_tree();
        let f = PiecewiseLinearFn::new(&t, vec![0.25, -1.5, 3.0, 1e-7]).unwrap();
        let back = PiecewiseLinearFn::from_csv(&t, &f.to_csv(&t)).unwrap();
        assert_eq!(back, f);
        assert!(PiecewiseLinearFn::from_csv(&t, "v0,1\nv1,2\n").is_err());
    }

    #[test]
    fn refine_interpolates() {
        let t = y_tree();
        let f = PiecewiseLinearFn::new(&t, vec![0.0, 1.0, 3.0, -2.0]).unwrap();
        let (m, map) = t.subdivide(0.5).unwrap();
        let fm = f.refine(&map, &t, &m).unwrap();
        let p = t.point_on_edge(EdgeId(1), 0.5).unwrap();
        let mp = map.map_point(&m, &p).unwrap();
        assert!((fm.eval(&m, &mp).unwrap() - f.eval(&t, &p).unwrap()).abs() < 1e-15);
        assert!((energy(&m, &fm, &fm).unwrap() - energy(&t, &f, &f).unwrap()).abs() < 1e-12);
        assert_eq!(fm.restrict(&map), f);
    }
}
