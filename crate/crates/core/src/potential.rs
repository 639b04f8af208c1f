//! Potential theory of the Dirichlet form: harmonic minimizers, capacities,
//! Green kernels, hitting probabilities, expected occupation times and
//! effective resistance.
//!
//! The discrete form on a mesh joins neighbouring vertices `x ~ y` by the
//! conductance `1 / (2 r(x,y))`, so that for piecewise linear `f` the quadratic
//! form equals the continuum energy `½∫(∇f)² dλ` exactly. Variational problems
//! whose minimizers are piecewise linear between mesh vertices are therefore
//! solved without discretisation error.

use crate::calculus::{self, PiecewiseLinearFn};
use crate::classify::GeneratorSpec;
use crate::error::{Error, Result};
use crate::linalg::{self, DenseMatrix};
use crate::measure::{LumpedMeasure, SpeedMeasure};
use crate::scalar::Scalar;
use crate::tree::{PointRef, SubdivisionMap, TreeSpec, VertexId};

/// The quadratic form of `ℰ_α = ℰ + α(·,·)_ν` on the vertices of a tree, with `ν`
/// lumped to the vertices.
#[derive(Clone, Debug)]
pub struct FormMatrix<'t, S> {
    tree: &'t TreeSpec<S>,
    conductance: Vec<S>,
    mass: LumpedMeasure<S>,
    alpha: S,
}

/// Assembles the form of `ℰ_α` on `tree`.
pub fn assemble_form<'t, S: Scalar>(
    tree: &'t TreeSpec<S>,
    nu: &SpeedMeasure<S>,
    alpha: S,
) -> Result<FormMatrix<'t, S>> {
    if !(alpha >= S::zero() && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!("alpha must be non-negative, got {alpha}")));
    }
    let two = S::of(2.0);
    Ok(FormMatrix {
        tree,
        conductance: tree.edges().iter().map(|e| S::one() / (two * e.length)).collect(),
        mass: nu.lump(tree)?,
        alpha,
    })
}

impl<'t, S: Scalar> FormMatrix<'t, S> {
    pub fn tree(&self) -> &'t TreeSpec<S> {
        self.tree
    }

    pub fn conductances(&self) -> &[S] {
        &self.conductance
    }

    pub fn mass(&self) -> &LumpedMeasure<S> {
        &self.mass
    }

    pub fn alpha(&self) -> S {
        self.alpha
    }

    pub fn dim(&self) -> usize {
        self.tree.vertex_count()
    }

    /// `f · Q g`.
    pub fn quadratic(&self, f: &[S], g: &[S]) -> S {
        let edges: S = self
            .tree
            .edges()
            .iter()
            .zip(&self.conductance)
            .map(|(e, &c)| c * (f[e.u.0] - f[e.v.0]) * (g[e.u.0] - g[e.v.0]))
            .sum();
        if self.alpha > S::zero() {
            let mass: S = self.mass.mass.iter().zip(f).zip(g).map(|((&m, &a), &b)| m * a * b).sum();
            edges + self.alpha * mass
        } else {
            edges
        }
    }

    /// `Q f`.
    pub fn apply(&self, f: &[S]) -> Vec<S> {
        let mut y = linalg::laplacian_apply(self.tree, &self.conductance, f);
        if self.alpha > S::zero() {
            for ((yi, &m), &fi) in y.iter_mut().zip(&self.mass.mass).zip(f) {
                *yi += self.alpha * m * fi;
            }
        }
        y
    }

    pub fn to_dense(&self) -> DenseMatrix<S> {
        let n = self.dim();
        let mut q = DenseMatrix::zeros(n);
        for (e, &c) in self.tree.edges().iter().zip(&self.conductance) {
            q.add(e.u.0, e.u.0, c);
            q.add(e.v.0, e.v.0, c);
            q.add(e.u.0, e.v.0, -c);
            q.add(e.v.0, e.u.0, -c);
        }
        for v in 0..n {
            q.add(v, v, self.alpha * self.mass.mass[v]);
        }
        q
    }

    /// Solves `Q u = rhs` on the vertices not held fixed.
    pub fn solve(&self, fixed: &[Option<S>], rhs: &[S]) -> Result<Vec<S>> {
        let extra: Vec<S> = self.mass.mass.iter().map(|&m| self.alpha * m).collect();
        linalg::solve_tree_system(self.tree, &self.conductance, &extra, fixed, rhs)
    }
}

/// A minimizer together with the refined tree it lives on. Points passed to the
/// solver are inserted as vertices; the source tree's vertices keep their ids.
#[derive(Clone, Debug)]
pub struct HarmonicSolution<S> {
    pub mesh: TreeSpec<S>,
    pub map: SubdivisionMap<S>,
    pub values: PiecewiseLinearFn<S>,
    pub energy_value: S,
}

impl<S: Scalar> HarmonicSolution<S> {
    /// Value at a point of the source tree.
    pub fn value_at(&self, p: &PointRef<S>) -> Result<S> {
        let q = self.map.map_point(&self.mesh, p)?;
        self.values.eval(&self.mesh, &q)
    }

    /// Values at the source tree's vertices.
    pub fn source_values(&self) -> PiecewiseLinearFn<S> {
        self.values.restrict(&self.map)
    }
}

fn mesh_vertices<S: Scalar>(
    map: &SubdivisionMap<S>,
    mesh: &TreeSpec<S>,
    points: &[PointRef<S>],
) -> Result<Vec<VertexId>> {
    points.iter().map(|p| map.map_vertex(mesh, p)).collect()
}

/// The minimizer of `ℰ_α(f,f)` over `f` with `f = 0` on `a_set` and `f = 1` on `b_set`.
pub fn harmonic<S: Scalar>(
    tree: &TreeSpec<S>,
    nu: &SpeedMeasure<S>,
    a_set: &[PointRef<S>],
    b_set: &[PointRef<S>],
    alpha: S,
) -> Result<HarmonicSolution<S>> {
    if a_set.is_empty() || b_set.is_empty() {
        return Err(Error::InvalidArgument("boundary sets must be non-empty".into()));
    }
    if !nu.matches(tree) {
        return Err(Error::InvalidMeasure("measure does not belong to this tree".into()));
    }
    let all: Vec<PointRef<S>> = a_set.iter().chain(b_set).copied().collect();
    let (mesh, map) = tree.refine_at(&all)?;
    let a = mesh_vertices(&map, &mesh, a_set)?;
    let b = mesh_vertices(&map, &mesh, b_set)?;
    if a.iter().any(|v| b.contains(v)) {
        return Err(Error::InvalidArgument("boundary sets must be disjoint".into()));
    }
    let mut fixed = vec![None; mesh.vertex_count()];
    for v in &a {
        fixed[v.0] = Some(S::zero());
    }
    for v in &b {
        fixed[v.0] = Some(S::one());
    }
    let nu_mesh = nu.refine(&map, &mesh);
    let form = assemble_form(&mesh, &nu_mesh, alpha)?;
    let values = form.solve(&fixed, &vec![S::zero(); mesh.vertex_count()])?;
    let energy_value = form.quadratic(&values, &values);
    Ok(HarmonicSolution {
        values: PiecewiseLinearFn::from_values_unchecked(values),
        mesh,
        map,
        energy_value,
    })
}

/// `cap^α_A(B)`: the minimal energy among functions vanishing on `A` and equal to one on `B`.
pub fn capacity<S: Scalar>(
    tree: &TreeSpec<S>,
    nu: &SpeedMeasure<S>,
    a_set: &[PointRef<S>],
    b_set: &[PointRef<S>],
    alpha: S,
) -> Result<S> {
    Ok(harmonic(tree, nu, a_set, b_set, alpha)?.energy_value)
}

/// Green kernel of the process killed at `b` with pole `x`, evaluated at `y`:
/// `2 r(c(y, x, b), b)`.
pub fn green_two_point<S: Scalar>(
    tree: &TreeSpec<S>,
    x: &PointRef<S>,
    b: &PointRef<S>,
    y: &PointRef<S>,
) -> Result<S> {
    tree.validate_point(x)?;
    tree.validate_point(b)?;
    tree.validate_point(y)?;
    if x == b {
        return Err(Error::InvalidArgument("pole and killing point coincide".into()));
    }
    let c = tree.branch_point_unchecked(y, x, b);
    Ok(S::of(2.0) * tree.distance_unchecked(&c, b))
}

/// Minimizer of `ℰ_α(g,g) − 2∫g dκ` over `g` vanishing on `A`, for a finite
/// measure `κ` given as atoms.
pub fn green_general<S: Scalar>(
    tree: &TreeSpec<S>,
    nu: &SpeedMeasure<S>,
    a_set: &[PointRef<S>],
    kappa: &[(PointRef<S>, S)],
    alpha: S,
) -> Result<HarmonicSolution<S>> {
    if a_set.is_empty() {
        return Err(Error::InvalidArgument("killing set must be non-empty".into()));
    }
    if let Some((_, w)) = kappa.iter().find(|(_, w)| !(w.is_finite() && *w >= S::zero())) {
        return Err(Error::InvalidMeasure(format!("source weight {w} is negative or not finite")));
    }
    let all: Vec<PointRef<S>> = a_set.iter().copied().chain(kappa.iter().map(|(p, _)| *p)).collect();
    let (mesh, map) = tree.refine_at(&all)?;
    let mut fixed = vec![None; mesh.vertex_count()];
    for v in mesh_vertices(&map, &mesh, a_set)? {
        fixed[v.0] = Some(S::zero());
    }
    let mut rhs = vec![S::zero(); mesh.vertex_count()];
    for (p, w) in kappa {
        let v = map.map_vertex(&mesh, p)?;
        if fixed[v.0].is_none() {
            rhs[v.0] += *w;
        }
    }
    let nu_mesh = nu.refine(&map, &mesh);
    let form = assemble_form(&mesh, &nu_mesh, alpha)?;
    let values = form.solve(&fixed, &rhs)?;
    let energy_value = form.quadratic(&values, &values);
    Ok(HarmonicSolution {
        values: PiecewiseLinearFn::from_values_unchecked(values),
        mesh,
        map,
        energy_value,
    })
}

/// `P^x{τ_a < τ_b} = r(c(x,a,b), b) / r(a,b)`, assuming `{a, b}` is hit almost surely.
pub fn hitting_probability<S: Scalar>(
    tree: &TreeSpec<S>,
    x: &PointRef<S>,
    a: &PointRef<S>,
    b: &PointRef<S>,
) -> Result<S> {
    tree.validate_point(x)?;
    tree.validate_point(a)?;
    tree.validate_point(b)?;
    if a == b {
        return Err(Error::InvalidArgument("hitting targets coincide".into()));
    }
    let c = tree.branch_point_unchecked(x, a, b);
    Ok(tree.distance_unchecked(&c, b) / tree.distance_unchecked(a, b))
}

/// Exit law from `x` through neighbours separated by `x`: weights `1/r(x, x_i)`, normalised.
pub fn star_exit_distribution<S: Scalar>(
    tree: &TreeSpec<S>,
    x: &PointRef<S>,
    neighbors: &[PointRef<S>],
) -> Result<Vec<S>> {
    if neighbors.is_empty() {
        return Err(Error::InvalidArgument("no neighbours given".into()));
    }
    tree.validate_point(x)?;
    for p in neighbors {
        tree.validate_point(p)?;
        if p == x {
            return Err(Error::InvalidArgument("a neighbour coincides with the centre".into()));
        }
    }
    for (i, p) in neighbors.iter().enumerate() {
        for q in &neighbors[i + 1..] {
            if tree.branch_point_unchecked(p, q, x) != *x {
                return Err(Error::InvalidArgument(
                    "neighbours must be pairwise separated by the centre".into(),
                ));
            }
        }
    }
    let weights: Vec<S> = neighbors
        .iter()
        .map(|p| S::one() / tree.distance_unchecked(x, p))
        .collect();
    let total: S = weights.iter().copied().sum();
    Ok(weights.into_iter().map(|w| w / total).collect())
}

/// `E^x[∫_0^{τ_b} f(B_s) ds] = 2 ∫ ν(dy) r(c(y,x,b), b) f(y)` for piecewise linear `f`,
/// integrated exactly edge by edge.
pub fn expected_occupation<S: Scalar>(
    tree: &TreeSpec<S>,
    nu: &SpeedMeasure<S>,
    x: &PointRef<S>,
    b: &PointRef<S>,
    f: &PiecewiseLinearFn<S>,
) -> Result<S> {
    if tree.has_open_leaves() {
        return Err(Error::NotCompact("expected occupation"));
    }
    let (mesh, map) = tree.refine_at(&[*x, *b])?;
    let xv = map.map_point(&mesh, x)?;
    let bv = map.map_point(&mesh, b)?;
    let f_mesh = f.refine(&map, tree, &mesh)?;
    let nu_mesh = nu.refine(&map, &mesh);
    // With x and b as vertices, y ↦ r(c(y,x,b), b) is linear along every edge.
    let green = PiecewiseLinearFn::from_fn(&mesh, |v| {
        let c = mesh.branch_point_unchecked(&PointRef::Vertex(v), &xv, &bv);
        mesh.distance_unchecked(&c, &bv)
    });
    Ok(S::of(2.0) * nu_mesh.integrate_product(&mesh, &green, &f_mesh)?)
}

/// Effective resistance (in units of length) from the root of the generator tree
/// to its depth-`n` cut set, by series–parallel reduction from the cut upwards:
/// `R_m = ℓ_m + R_{m+1} / k`.
pub fn effective_resistance_to_depth<S: Scalar>(gen: &GeneratorSpec<S>, n: usize) -> Result<S> {
    gen.validate()?;
    if n == 0 {
        return Err(Error::InvalidArgument("depth must be at least 1".into()));
    }
    let k = S::of_usize(gen.k);
    let mut below = S::zero();
    for m in (0..n).rev() {
        below = gen.edge_length(m) + below / k;
    }
    Ok(below)
}

/// Two-point capacity by the closed form `1 / (2 r(a,b))`.
pub fn two_point_capacity<S: Scalar>(tree: &TreeSpec<S>, a: &PointRef<S>, b: &PointRef<S>) -> Result<S> {
    let r = tree.distance(a, b)?;
    if r == S::zero() {
        return Err(Error::InvalidArgument("points coincide".into()));
    }
    Ok(S::one() / (S::of(2.0) * r))
}

/// Checks the energy of a candidate against the exact continuum form; used by
/// callers that build their own test functions.
pub fn energy<S: Scalar>(tree: &TreeSpec<S>, f: &PiecewiseLinearFn<S>) -> Result<S> {
    calculus::energy(tree, f, f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::{EdgeId, TreeBuilder};

    fn y_tree() -> TreeSpec<f64> {
        let mut b = TreeBuilder::<f64>::with_vertices(4);
        b.add_edge(VertexId(0), VertexId(1), 1.0);
        b.add_edge(VertexId(1), VertexId(2), 2.0);
        b.add_edge(VertexId(1), VertexId(3), 3.0);
        b.set_root(VertexId(0));
        b.build().unwrap()
    }

    fn v(i: usize) -> PointRef<f64> {
        PointRef::Vertex(VertexId(i))
    }

    #[test]
    fn unit_edge_form() {
        let mut b = TreeBuilder::<f64>::with_vertices(2);
        b.add_edge(VertexId(0), VertexId(1), 1.0);
        b.set_root(VertexId(0));
        let t = b.build().unwrap();
        let q = assemble_form(&t, &SpeedMeasure::lebesgue(&t), 0.0).unwrap().to_dense();
        assert_eq!(q.data, vec![0.5, -0.5, -0.5, 0.5]);
    }

    #[test]
    fn y_tree_values() {
        let t = y_tree();
        let nu = SpeedMeasure::lebesgue(&t);
        let cap = capacity(&t, &nu, &[v(3)], &[v(2)], 0.0).unwrap();
        assert!((cap - 0.1).abs() < 1e-15);
        assert_eq!(green_two_point(&t, &v(2), &v(3), &v(1)).unwrap(), 6.0);
        assert_eq!(green_two_point(&t, &v(2), &v(3), &v(3)).unwrap(), 0.0);
        assert!(green_two_point(&t, &v(3), &v(3), &v(1)).is_err());
        assert!((hitting_probability(&t, &v(1), &v(2), &v(3)).unwrap() - 0.6).abs() < 1e-15);
        assert_eq!(hitting_probability(&t, &v(2), &v(2), &v(3)).unwrap(), 1.0);
        assert_eq!(hitting_probability(&t, &v(3), &v(2), &v(3)).unwrap(), 0.0);
        let p = star_exit_distribution(&t, &v(1), &[v(0), v(2), v(3)]).unwrap();
        for (got, want) in p.iter().zip([6.0 / 11.0, 3.0 / 11.0, 2.0 / 11.0]) {
            assert!((got - want).abs() < 1e-15);
        }
        assert!(star_exit_distribution(&t, &v(1), &[v(0), v(1)]).is_err());
        assert!(star_exit_distribution(&t, &v(0), &[v(2), v(3)]).is_err());
    }

    #[test]
    fn y_tree_occupation_with_atoms() {
        let t = y_tree();
        let nu = SpeedMeasure::atoms_only(&t, vec![1.0; 4]).unwrap();
        let one = PiecewiseLinearFn::constant(&t, 1.0);
        let occ = expected_occupation(&t, &nu, &v(2), &v(3), &one).unwrap();
        assert!((occ - 22.0).abs() < 1e-12);
        let zero = PiecewiseLinearFn::constant(&t, 0.0);
        assert_eq!(expected_occupation(&t, &nu, &v(2), &v(3), &zero).unwrap(), 0.0);
    }

    #[test]
    fn interval_occupation() {
        let mut b = TreeBuilder::<f64>::with_vertices(2);
        b.add_edge(VertexId(0), VertexId(1), 1.0);
        b.set_root(VertexId(0));
        let t = b.build().unwrap();
        let nu = SpeedMeasure::lebesgue(&t);
        let one = PiecewiseLinearFn::constant(&t, 1.0);
        assert!((expected_occupation(&t, &nu, &v(1), &v(0), &one).unwrap() - 1.0).abs() < 1e-15);
        // From an interior start the answer is 2x − x².
        let x = t.point_on_edge(EdgeId(0), 0.3).unwrap();
        let e = expected_occupation(&t, &nu, &x, &v(0), &one).unwrap();
        assert!((e - (0.6 - 0.09)).abs() < 1e-15);
    }

    #[test]
    fn open_leaves_rejected() {
        let mut b = TreeBuilder::<f64>::with_vertices(2);
        b.add_edge(VertexId(0), VertexId(1), 1.0);
        b.set_open(VertexId(1), true);
        b.set_root(VertexId(0));
        let t = b.build().unwrap();
        let nu = SpeedMeasure::lebesgue(&t);
        let one = PiecewiseLinearFn::constant(&t, 1.0);
        assert!(matches!(
            expected_occupation(&t, &nu, &v(1), &v(0), &one),
            Err(Error::NotCompact(_))
        ));
    }

    #[test]
    fn harmonic_errors() {
        let t = y_tree();
        let nu = SpeedMeasure::lebesgue(&t);
        assert!(harmonic(&t, &nu, &[v(2)], &[v(2)], 0.0).is_err());
        assert!(harmonic(&t, &nu, &[], &[v(2)], 0.0).is_err());
        assert!(harmonic(&t, &nu, &[v(1)], &[v(2)], -1.0).is_err());
    }

    #[test]
    fn resistance_series() {
        let binary = GeneratorSpec::<f64>::new(2, 1.0);
        assert!((effective_resistance_to_depth(&binary, 3).unwrap() - 1.75).abs() < 1e-15);
        let critical = GeneratorSpec::<f64>::new(2, 2.0);
        assert!((effective_resistance_to_depth(&critical, 7).unwrap() - 7.0).abs() < 1e-12);
        let ray = GeneratorSpec::<f64>::new(1, 1.0);
        assert_eq!(effective_resistance_to_depth(&ray, 5).unwrap(), 5.0);
        assert!(effective_resistance_to_depth(&ray, 0).is_err());
    }
}
