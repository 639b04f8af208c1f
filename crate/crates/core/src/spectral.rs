//! Principal eigenvalues, the spectral gap, the two-sided eigenvalue estimate and
//! total-variation mixing on compact trees.
//!
//! All eigenproblems are posed on a mesh with the lumped mass matrix `M` and the
//! form matrix `Q`. The discrete problem is itself the spectral problem of the
//! Brownian motion whose speed measure is the lumped (atomic) measure, so every
//! estimate that holds for arbitrary speed measures also holds exactly for the
//! computed eigenvalues.

use crate::calculus::PiecewiseLinearFn;
use crate::error::{Error, Result};
use crate::linalg::{self, DenseMatrix, SymmetricEigen};
use crate::measure::{LumpedMeasure, SpeedMeasure};
use crate::potential::{assemble_form, FormMatrix};
use crate::scalar::Scalar;
use crate::tree::{PointRef, SubdivisionMap, TreeSpec, VertexId};

const EIGEN_TOL: f64 = 1e-10;
const EIGEN_MAX_ITER: usize = 2000;

/// Largest mesh for which the heat semigroup is diagonalised densely.
pub const DEFAULT_DENSE_CAP: usize = 500;

#[derive(Clone, Debug)]
pub struct SpectralResult<S> {
    pub eigenvalue: S,
    /// Normalised to `(f,f)_M = 1`; for principal eigenfunctions, nonnegative.
    pub eigenfunction: PiecewiseLinearFn<S>,
    pub mesh: TreeSpec<S>,
    pub map: SubdivisionMap<S>,
    pub mass: LumpedMeasure<S>,
    pub mesh_size: S,
}

impl<S: Scalar> SpectralResult<S> {
    /// `ℰ(f,f) / (f,f)_M` for the returned eigenfunction.
    pub fn rayleigh_quotient(&self) -> S {
        rayleigh(&self.mesh, &self.mass, self.eigenfunction.values())
    }

    /// A point of the mesh where the eigenfunction vanishes, found on the first
    /// edge (in edge order) across which it changes sign.
    pub fn zero_point(&self) -> Option<PointRef<S>> {
        let f = self.eigenfunction.values();
        for (i, e) in self.mesh.edges().iter().enumerate() {
            let (a, b) = (f[e.u.0], f[e.v.0]);
            if a == S::zero() {
                return Some(PointRef::Vertex(e.u));
            }
            if b == S::zero() {
                return Some(PointRef::Vertex(e.v));
            }
            if (a < S::zero()) != (b < S::zero()) {
                let off = e.length * a / (a - b);
                return self.mesh.point_on_edge(crate::tree::EdgeId(i), off).ok();
            }
        }
        None
    }
}

fn rayleigh<S: Scalar>(mesh: &TreeSpec<S>, mass: &LumpedMeasure<S>, f: &[S]) -> S {
    let two = S::of(2.0);
    let num: S = mesh
        .edges()
        .iter()
        .map(|e| {
            let d = f[e.u.0] - f[e.v.0];
            d * d / (two * e.length)
        })
        .sum();
    let den: S = f.iter().zip(&mass.mass).map(|(&x, &m)| m * x * x).sum();
    num / den
}

fn require_compact<S: Scalar>(tree: &TreeSpec<S>, what: &'static str) -> Result<()> {
    if tree.has_open_leaves() {
        Err(Error::NotCompact(what))
    } else {
        Ok(())
    }
}

/// Refines at `points`, then subdivides to mesh size `h`.
fn mesh_for<S: Scalar>(
    tree: &TreeSpec<S>,
    nu: &SpeedMeasure<S>,
    points: &[PointRef<S>],
    h: S,
) -> Result<(TreeSpec<S>, SubdivisionMap<S>, SpeedMeasure<S>)> {
    if !nu.matches(tree) {
        return Err(Error::InvalidMeasure("measure does not belong to this tree".into()));
    }
    let (mid, first) = tree.refine_at(points)?;
    let (mesh, second) = mid.subdivide(h)?;
    let map = first.then(&second);
    let nu_mesh = nu.refine(&map, &mesh);
    Ok((mesh, map, nu_mesh))
}

fn normalise<S: Scalar>(x: &mut [S], mass: &[S]) {
    let norm = x.iter().zip(mass).map(|(&a, &m)| m * a * a).sum::<S>().sqrt();
    let weight: S = x.iter().zip(mass).map(|(&a, &m)| m * a).sum();
    let pivot = x
        .iter()
        .copied()
        .fold(S::zero(), |best, a| if a.abs() > best.abs() { a } else { best });
    let sign = if weight.abs() > S::tolerance() * norm {
        weight.signum()
    } else {
        pivot.signum()
    };
    for a in x.iter_mut() {
        *a = *a * sign / norm;
    }
}

/// Unit roundoff times a Gershgorin bound on `M⁻¹K`: residuals below this are noise.
fn rounding_floor<S: Scalar>(form: &FormMatrix<'_, S>, mass: &[S]) -> S {
    let tree = form.tree();
    let mut row = vec![S::zero(); tree.vertex_count()];
    for (e, &c) in tree.edges().iter().zip(form.conductances()) {
        row[e.u.0] += c + c;
        row[e.v.0] += c + c;
    }
    let spread = row
        .iter()
        .zip(mass)
        .filter(|(_, &m)| m > S::zero())
        .map(|(&r, &m)| r / m)
        .fold(S::zero(), S::max);
    S::epsilon() * spread
}

/// `λ_A`: the smallest Rayleigh quotient `ℰ(f,f)/(f,f)_ν` over `f` vanishing on `A`.
pub fn principal_eigenvalue<S: Scalar>(
    tree: &TreeSpec<S>,
    nu: &SpeedMeasure<S>,
    a_set: &[PointRef<S>],
    h: S,
) -> Result<SpectralResult<S>> {
    require_compact(tree, "the principal eigenvalue")?;
    if a_set.is_empty() {
        return Err(Error::InvalidArgument("Dirichlet set must be non-empty".into()));
    }
    let (mesh, map, nu_mesh) = mesh_for(tree, nu, a_set, h)?;
    let form = assemble_form(&mesh, &nu_mesh, S::zero())?;
    let n = mesh.vertex_count();
    let mut fixed = vec![None; n];
    for p in a_set {
        fixed[map.map_vertex(&mesh, p)?.0] = Some(S::zero());
    }
    let mut mass = form.mass().mass.clone();
    for (m, f) in mass.iter_mut().zip(&fixed) {
        if f.is_some() {
            *m = S::zero();
        }
    }
    if !mass.iter().any(|&m| m > S::zero()) {
        return Err(Error::InvalidMeasure("no mass off the Dirichlet set".into()));
    }
    let pair = linalg::smallest_eigenpair(
        &mass,
        |x| {
            let mut y = form.apply(x);
            for (yi, f) in y.iter_mut().zip(&fixed) {
                if f.is_some() {
                    *yi = S::zero();
                }
            }
            y
        },
        |b| form.solve(&fixed, b),
        None,
        S::of(EIGEN_TOL),
        rounding_floor(&form, &mass),
        EIGEN_MAX_ITER,
    )?;
    let mass = form.mass().clone();
    finish(mass, mesh, map, pair.vector, h, true)
}

fn finish<S: Scalar>(
    mass: LumpedMeasure<S>,
    mesh: TreeSpec<S>,
    map: SubdivisionMap<S>,
    mut x: Vec<S>,
    h: S,
    positive: bool,
) -> Result<SpectralResult<S>> {
    normalise(&mut x, &mass.mass);
    if positive {
        // The principal eigenfunction does not change sign; clear rounding noise.
        for a in x.iter_mut() {
            if *a < S::zero() {
                *a = S::zero();
            }
        }
    }
    let eigenvalue = rayleigh(&mesh, &mass, &x);
    Ok(SpectralResult {
        eigenvalue,
        eigenfunction: PiecewiseLinearFn::from_values_unchecked(x),
        mesh,
        map,
        mass,
        mesh_size: h,
    })
}

/// `λ₂`: the smallest Rayleigh quotient over functions with zero `ν`-mean.
pub fn spectral_gap<S: Scalar>(tree: &TreeSpec<S>, nu: &SpeedMeasure<S>, h: S) -> Result<SpectralResult<S>> {
    require_compact(tree, "the spectral gap")?;
    let (mesh, map, nu_mesh) = mesh_for(tree, nu, &[], h)?;
    if mesh.vertex_count() < 2 {
        return Err(Error::InvalidArgument("tree has a single point".into()));
    }
    let form = assemble_form(&mesh, &nu_mesh, S::zero())?;
    let mass = form.mass().mass.clone();
    if mass.iter().filter(|&&m| m > S::zero()).count() < 2 {
        return Err(Error::InvalidMeasure("speed measure charges fewer than two mesh vertices".into()));
    }
    let ones = vec![S::one(); mesh.vertex_count()];
    // Right-hand sides orthogonal to constants make the Neumann system solvable;
    // grounding one vertex picks a solution, and the constant is removed afterwards.
    let mut grounded = vec![None; mesh.vertex_count()];
    grounded[mesh.root().0] = Some(S::zero());
    let pair = linalg::smallest_eigenpair(
        &mass,
        |x| form.apply(x),
        |b| form.solve(&grounded, b),
        Some(&ones),
        S::of(EIGEN_TOL),
        rounding_floor(&form, &mass),
        EIGEN_MAX_ITER,
    )?;
    let mass = form.mass().clone();
    finish(mass, mesh, map, pair.vector, h, false)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EigenvalueBounds<S> {
    /// `1 / (2 · diam · ν(T))`.
    pub lower: S,
    /// `½ · inf_x (ν{y : x ∈ [y,b]} · r(x,b))⁻¹`; infinite when all mass sits at `b`.
    pub upper: S,
}

/// Two-sided estimate of `λ_b`. The infimum in the upper bound is taken over
/// every point of the tree: along an edge the product is a concave quadratic in
/// the position, so its supremum is found in closed form.
pub fn eigenvalue_bounds<S: Scalar>(
    tree: &TreeSpec<S>,
    nu: &SpeedMeasure<S>,
    b: &PointRef<S>,
) -> Result<EigenvalueBounds<S>> {
    require_compact(tree, "the eigenvalue bounds")?;
    if !nu.matches(tree) {
        return Err(Error::InvalidMeasure("measure does not belong to this tree".into()));
    }
    let total = nu.total_mass(tree);
    let two = S::of(2.0);
    let lower = S::one() / (two * tree.diameter() * total);

    let (mesh, map) = tree.refine_at(&[*b])?;
    let bv = map.map_vertex(&mesh, b)?;
    let mesh = mesh.with_root(bv)?;
    let nu_mesh = nu.refine(&map, &mesh);

    // Mass of everything on the far side of each vertex, the vertex included.
    let mut beyond: Vec<S> = nu_mesh.atoms().to_vec();
    for &v in mesh.bfs_order().iter().rev() {
        if let Some((p, e)) = mesh.parent(v) {
            let add = beyond[v.0] + nu_mesh.edge_mass(&mesh, e);
            beyond[p.0] += add;
        }
    }
    let mut best = S::zero();
    for v in mesh.vertices() {
        if v != bv {
            best = best.max(beyond[v.0] * mesh.depth(v));
        }
    }
    for (i, e) in mesh.edges().iter().enumerate() {
        let eid = crate::tree::EdgeId(i);
        let rho = nu_mesh.density(eid);
        if !(rho > S::zero()) {
            continue;
        }
        let (near, far) = (mesh.parent_end(eid), mesh.child_end(eid));
        let d = mesh.depth(near);
        // g(s) = (beyond(far) + ρ(L − s)) (d + s), maximised at s*.
        let s = (beyond[far.0] + rho * e.length - rho * d) / (two * rho);
        if s > S::zero() && s < e.length {
            best = best.max((beyond[far.0] + rho * (e.length - s)) * (d + s));
        }
    }
    let upper = if best > S::zero() { S::one() / (two * best) } else { S::infinity() };
    Ok(EigenvalueBounds { lower, upper })
}

fn check_initial_law<S: Scalar>(tree: &TreeSpec<S>, nu_prime: &SpeedMeasure<S>) -> Result<()> {
    let total = nu_prime.total_mass(tree);
    if (total - S::one()).abs() > S::of(1e-9).max(S::tolerance()) {
        return Err(Error::InvalidMeasure(format!("initial law has mass {total}, expected 1")));
    }
    Ok(())
}

/// `(1 + ν(T) · sqrt(∫ (dν'/dν) dν')) · exp(−t / (2 · diam · ν(T)))` at each time.
pub fn mixing_bound<S: Scalar>(
    tree: &TreeSpec<S>,
    nu: &SpeedMeasure<S>,
    nu_prime: &SpeedMeasure<S>,
    times: &[S],
) -> Result<Vec<S>> {
    require_compact(tree, "the mixing bound")?;
    check_initial_law(tree, nu_prime)?;
    let chi = nu_prime.density_second_moment(nu, tree)?;
    let total = nu.total_mass(tree);
    let factor = S::one() + total * chi.sqrt();
    let rate = S::one() / (S::of(2.0) * tree.diameter() * total);
    Ok(times.iter().map(|&t| factor * (-t * rate).exp()).collect())
}

/// The L² estimate driven by the spectral gap itself:
/// `½ · sqrt(ν(T) · ∫ (dν'/dν) dν' − 1) · exp(−λ₂ t)`.
///
/// This is a diagnostic next to [`mixing_bound`], not a replacement for it.
pub fn gap_mixing_diagnostic<S: Scalar>(
    tree: &TreeSpec<S>,
    nu: &SpeedMeasure<S>,
    nu_prime: &SpeedMeasure<S>,
    lambda2: S,
    times: &[S],
) -> Result<Vec<S>> {
    check_initial_law(tree, nu_prime)?;
    let chi = nu_prime.density_second_moment(nu, tree)?;
    let excess = (nu.total_mass(tree) * chi - S::one()).max(S::zero());
    let factor = S::of(0.5) * excess.sqrt();
    Ok(times.iter().map(|&t| factor * (-lambda2 * t).exp()).collect())
}

/// The heat semigroup `exp(−t M⁻¹Q)` of the mesh chain, diagonalised once.
#[derive(Clone, Debug)]
pub struct HeatSemigroup<S> {
    pub mesh: TreeSpec<S>,
    pub map: SubdivisionMap<S>,
    mass: Vec<S>,
    total: S,
    eigen: SymmetricEigen<S>,
}

impl<S: Scalar> HeatSemigroup<S> {
    pub fn new(tree: &TreeSpec<S>, nu: &SpeedMeasure<S>, h: S, cap: usize) -> Result<Self> {
        require_compact(tree, "the heat semigroup")?;
        let (mesh, map, nu_mesh) = mesh_for(tree, nu, &[], h)?;
        let n = mesh.vertex_count();
        if n > cap {
            return Err(Error::InvalidArgument(format!(
                "mesh has {n} vertices, more than the dense limit {cap}"
            )));
        }
        let form = assemble_form(&mesh, &nu_mesh, S::zero())?;
        let mass = form.mass().mass.clone();
        if let Some(v) = mass.iter().position(|&m| !(m > S::zero())) {
            return Err(Error::InvalidMeasure(format!(
                "speed measure vanishes near mesh vertex {:?}",
                mesh.name(VertexId(v))
            )));
        }
        let q = form.to_dense();
        let inv_sqrt: Vec<S> = mass.iter().map(|&m| S::one() / m.sqrt()).collect();
        let mut s = DenseMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                s.set(i, j, q.get(i, j) * inv_sqrt[i] * inv_sqrt[j]);
            }
        }
        let eigen = linalg::symmetric_eigen(s)?;
        let total = mass.iter().copied().sum();
        Ok(HeatSemigroup { mesh, map, mass, total, eigen })
    }

    pub fn eigenvalues(&self) -> &[S] {
        &self.eigen.values
    }

    /// Lumped masses of the mesh vertices.
    pub fn mass(&self) -> &[S] {
        &self.mass
    }

    /// The law at time `t` of the chain started from the vertex law `p0`.
    pub fn evolve(&self, p0: &[S], t: S) -> Vec<S> {
        let n = self.mass.len();
        let psi0: Vec<S> = p0.iter().zip(&self.mass).map(|(&p, &m)| p / m.sqrt()).collect();
        let mut coef = vec![S::zero(); n];
        for (k, c) in coef.iter_mut().enumerate() {
            let mut acc = S::zero();
            for (i, &x) in psi0.iter().enumerate() {
                acc += self.eigen.vectors.get(i, k) * x;
            }
            *c = acc * (-self.eigen.values[k].max(S::zero()) * t).exp();
        }
        (0..n)
            .map(|i| {
                let mut acc = S::zero();
                for (k, &c) in coef.iter().enumerate() {
                    acc += self.eigen.vectors.get(i, k) * c;
                }
                acc * self.mass[i].sqrt()
            })
            .collect()
    }

    /// `‖ν'P_t − ν/ν(T)‖_TV` (half the L¹ distance) at each time.
    pub fn tv_curve(&self, nu_prime_source: &SpeedMeasure<S>, times: &[S]) -> Result<Vec<S>> {
        let p0 = nu_prime_source.lump_onto(&self.map, &self.mesh)?.mass;
        let half = S::of(0.5);
        Ok(times
            .iter()
            .map(|&t| {
                let p = self.evolve(&p0, t);
                half * p
                    .iter()
                    .zip(&self.mass)
                    .map(|(&a, &m)| (a - m / self.total).abs())
                    .sum::<S>()
            })
            .collect())
    }
}

/// Total-variation distance to equilibrium of the mesh chain started from `ν'`.
pub fn tv_distance_curve<S: Scalar>(
    tree: &TreeSpec<S>,
    nu: &SpeedMeasure<S>,
    nu_prime: &SpeedMeasure<S>,
    times: &[S],
    h: S,
) -> Result<Vec<S>> {
    check_initial_law(tree, nu_prime)?;
    HeatSemigroup::new(tree, nu, h, DEFAULT_DENSE_CAP)?.tv_curve(nu_prime, times)
}
