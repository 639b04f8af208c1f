//! Linear algebra on tree-structured operators.
//!
//! Every operator in this crate has the sparsity pattern of the tree itself: a
//! diagonal plus one symmetric coupling per edge. Eliminating vertices from the
//! leaves towards the root produces no fill-in, so such systems are solved
//! exactly in linear time. Small dense symmetric eigenproblems are handled by
//! cyclic Jacobi rotations.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tree::TreeSpec;

/// Solves `(L + diag(extra)) x = rhs` on the free vertices, where `L` is the
/// weighted graph Laplacian with edge weights `weights` and vertices with
/// `fixed[v] = Some(value)` are held at that value.
pub fn solve_tree_system<S: Scalar>(
    tree: &TreeSpec<S>,
    weights: &[S],
    extra: &[S],
    fixed: &[Option<S>],
    rhs: &[S],
) -> Result<Vec<S>> {
    let n = tree.vertex_count();
    debug_assert_eq!(weights.len(), tree.edge_count());
    debug_assert!(extra.len() == n && fixed.len() == n && rhs.len() == n);

    let mut diag = extra.to_vec();
    let mut b = rhs.to_vec();
    let mut scale = vec![S::zero(); n];
    for (i, e) in tree.edges().iter().enumerate() {
        let w = weights[i];
        diag[e.u.0] += w;
        diag[e.v.0] += w;
        if let Some(val) = fixed[e.v.0] {
            b[e.u.0] += w * val;
        }
        if let Some(val) = fixed[e.u.0] {
            b[e.v.0] += w * val;
        }
    }
    for v in 0..n {
        scale[v] = diag[v].abs();
    }

    let order = tree.bfs_order();
    for &v in order.iter().rev() {
        if fixed[v.0].is_some() {
            continue;
        }
        let pivot = diag[v.0];
        if !(pivot > scale[v.0] * S::tolerance() * S::of(16.0)) || pivot <= S::zero() {
            return Err(Error::Singular(format!(
                "component containing {:?} has no boundary",
                tree.name(v)
            )));
        }
        if let Some((p, e)) = tree.parent(v) {
            if fixed[p.0].is_none() {
                let w = weights[e.0];
                diag[p.0] -= w * w / pivot;
                let bv = b[v.0];
                b[p.0] += w * bv / pivot;
            }
        }
    }

    let mut x = vec![S::zero(); n];
    for &v in order {
        if let Some(val) = fixed[v.0] {
            x[v.0] = val;
            continue;
        }
        let mut acc = b[v.0];
        if let Some((p, e)) = tree.parent(v) {
            if fixed[p.0].is_none() {
                acc += weights[e.0] * x[p.0];
            }
        }
        x[v.0] = acc / diag[v.0];
    }
    Ok(x)
}

/// `y = L x` for the weighted graph Laplacian of the tree.
pub fn laplacian_apply<S: Scalar>(tree: &TreeSpec<S>, weights: &[S], x: &[S]) -> Vec<S> {
    let mut y = vec![S::zero(); x.len()];
    for (i, e) in tree.edges().iter().enumerate() {
        let d = weights[i] * (x[e.u.0] - x[e.v.0]);
        y[e.u.0] += d;
        y[e.v.0] -= d;
    }
    y
}

/// Row-major dense square matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix<S> {
    pub n: usize,
    pub data: Vec<S>,
}

impl<S: Scalar> DenseMatrix<S> {
    pub fn zeros(n: usize) -> Self {
        DenseMatrix { n, data: vec![S::zero(); n * n] }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> S {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: S) {
        self.data[i * self.n + j] = v;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: S) {
        self.data[i * self.n + j] += v;
    }

    pub fn mul_vec(&self, x: &[S]) -> Vec<S> {
        (0..self.n)
            .map(|i| self.data[i * self.n..(i + 1) * self.n].iter().zip(x).map(|(&a, &b)| a * b).sum())
            .collect()
    }
}

/// Eigen-decomposition of a symmetric matrix: eigenvalues ascending, with the
/// matching orthonormal eigenvectors stored as columns of `vectors`.
#[derive(Clone, Debug)]
pub struct SymmetricEigen<S> {
    pub values: Vec<S>,
    pub vectors: DenseMatrix<S>,
}

impl<S: Scalar> SymmetricEigen<S> {
    pub fn vector(&self, k: usize) -> Vec<S> {
        (0..self.vectors.n).map(|i| self.vectors.get(i, k)).collect()
    }
}

/// Cyclic Jacobi eigenvalue algorithm.
pub fn symmetric_eigen<S: Scalar>(mut a: DenseMatrix<S>) -> Result<SymmetricEigen<S>> {
    let n = a.n;
    let mut v = DenseMatrix::zeros(n);
    for i in 0..n {
        v.set(i, i, S::one());
    }
    let frob: S = a.data.iter().map(|&x| x * x).sum::<S>().sqrt();
    // Rounding keeps the off-diagonal norm near n * eps * |A|.
    let target = frob * S::epsilon() * S::of(n.max(1) as f64);
    const MAX_SWEEPS: usize = 100;
    let mut converged = n <= 1;
    let mut off = S::zero();
    for _ in 0..MAX_SWEEPS {
        off = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a.get(i, j) * a.get(i, j))
            .sum::<S>()
            .sqrt();
        if off <= target {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                if apq.abs() <= S::min_positive_value() {
                    continue;
                }
                let (app, aqq) = (a.get(p, p), a.get(q, q));
                let theta = (aqq - app) / (apq + apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + S::one()).sqrt());
                let c = S::one() / (t * t + S::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a.get(k, p), a.get(k, q));
                    a.set(k, p, c * akp - s * akq);
                    a.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let (apk, aqk) = (a.get(p, k), a.get(q, k));
                    a.set(p, k, c * apk - s * aqk);
                    a.set(q, k, s * apk + c * aqk);
                }
                for k in 0..n {
                    let (vkp, vkq) = (v.get(k, p), v.get(k, q));
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    if !converged {
        return Err(Error::NoConvergence { iterations: MAX_SWEEPS, residual: off.to_f64().unwrap_or(f64::NAN) });
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| a.get(i, i).partial_cmp(&a.get(j, j)).expect("finite eigenvalues"));
    let values = idx.iter().map(|&i| a.get(i, i)).collect();
    let mut vectors = DenseMatrix::zeros(n);
    for (col, &i) in idx.iter().enumerate() {
        for k in 0..n {
            vectors.set(k, col, v.get(k, i));
        }
    }
    Ok(SymmetricEigen { values, vectors })
}

/// Smallest eigenpair of the pencil `(K, M)` with `M` diagonal positive.
pub struct Eigenpair<S> {
    pub value: S,
    pub vector: Vec<S>,
}

/// Subspace (block inverse) iteration with Rayleigh–Ritz for the smallest
/// eigenpair of `K x = λ M x`.
///
/// `solve` applies `(K + σM)⁻¹` for some fixed shift σ making it definite;
/// `apply` applies `K`; `constraint`, if given, is a vector that every iterate is
/// kept M-orthogonal to. Iteration stops once the `M⁻¹`-norm residual is below
/// `tol · λ` or below `floor`, the level at which rounding in `K x` dominates.
pub fn smallest_eigenpair<S: Scalar>(
    mass: &[S],
    apply: impl Fn(&[S]) -> Vec<S>,
    solve: impl Fn(&[S]) -> Result<Vec<S>>,
    constraint: Option<&[S]>,
    tol: S,
    floor: S,
    max_iter: usize,
) -> Result<Eigenpair<S>> {
    let n = mass.len();
    let block = mass.iter().filter(|&&m| m > S::zero()).count().min(4);
    if block == 0 {
        return Err(Error::Singular("mass matrix vanishes".into()));
    }
    let dot_m = |x: &[S], y: &[S]| -> S { x.iter().zip(y).zip(mass).map(|((&a, &b), &m)| a * b * m).sum() };
    let deflate = |x: &mut Vec<S>| {
        if let Some(c) = constraint {
            let cc = dot_m(c, c);
            let coef = dot_m(x, c) / cc;
            for (xi, &ci) in x.iter_mut().zip(c) {
                *xi -= coef * ci;
            }
        }
    };
    let orthonormalize = |vs: &mut Vec<Vec<S>>| -> Result<()> {
        for pass in 0..2 {
            for j in 0..vs.len() {
                for k in 0..j {
                    let coef = dot_m(&vs[j], &vs[k]);
                    let (head, tail) = vs.split_at_mut(j);
                    for (x, &y) in tail[0].iter_mut().zip(&head[k]) {
                        *x -= coef * y;
                    }
                }
                let norm = dot_m(&vs[j], &vs[j]).sqrt();
                if !(norm > S::zero()) {
                    if pass == 0 {
                        return Err(Error::Singular("subspace collapsed".into()));
                    }
                    continue;
                }
                for x in vs[j].iter_mut() {
                    *x /= norm;
                }
            }
        }
        Ok(())
    };

    // Constants are the natural first guess, unless they are excluded.
    let skip = usize::from(constraint.is_some());
    let mut xs: Vec<Vec<S>> = (skip..block + skip)
        .map(|j| {
            (0..n)
                .map(|i| {
                    if j == 0 {
                        S::one()
                    } else {
                        let phase = S::of(((i + 1) * (2 * j + 1)) as f64 * 0.618_033_988_749_895);
                        (phase * S::TAU()).cos()
                    }
                })
                .collect()
        })
        .collect();
    for x in xs.iter_mut() {
        deflate(x);
    }
    orthonormalize(&mut xs)?;

    let mut residual = S::infinity();
    for iter in 0..max_iter {
        let mut ys = Vec::with_capacity(block);
        for x in &xs {
            let mx: Vec<S> = x.iter().zip(mass).map(|(&a, &m)| a * m).collect();
            let mut y = solve(&mx)?;
            deflate(&mut y);
            ys.push(y);
        }
        orthonormalize(&mut ys)?;
        let kys: Vec<Vec<S>> = ys.iter().map(|y| apply(y)).collect();
        let mut small = DenseMatrix::zeros(block);
        for i in 0..block {
            for j in 0..block {
                let v: S = ys[i].iter().zip(&kys[j]).map(|(&a, &b)| a * b).sum();
                small.set(i, j, v);
            }
        }
        for i in 0..block {
            for j in 0..i {
                let avg = (small.get(i, j) + small.get(j, i)) * S::of(0.5);
                small.set(i, j, avg);
                small.set(j, i, avg);
            }
        }
        let ritz = symmetric_eigen(small)?;
        xs = (0..block)
            .map(|k| {
                let mut x = vec![S::zero(); n];
                for (j, y) in ys.iter().enumerate() {
                    let c = ritz.vectors.get(j, k);
                    for (xi, &yi) in x.iter_mut().zip(y) {
                        *xi += c * yi;
                    }
                }
                x
            })
            .collect();
        let theta = ritz.values[0];
        let kx = apply(&xs[0]);
        residual = kx
            .iter()
            .zip(&xs[0])
            .zip(mass)
            .filter(|(_, &m)| m > S::zero())
            .map(|((&k, &x), &m)| {
                let r = k - theta * m * x;
                r * r / m
            })
            .sum::<S>()
            .sqrt();
        if residual <= (tol * theta.abs()).max(floor) && iter > 0 {
            return Ok(Eigenpair { value: theta, vector: xs.swap_remove(0) });
        }
    }
    Err(Error::NoConvergence { iterations: max_iter, residual: residual.as_f64() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::{TreeBuilder, VertexId};

    #[test]
    fn jacobi_diagonalizes() {
        let mut a = DenseMatrix::<f64>::zeros(3);
        let vals = [[2.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 2.0]];
        for i in 0..3 {
            for j in 0..3 {
                a.set(i, j, vals[i][j]);
            }
        }
        let eig = symmetric_eigen(a.clone()).unwrap();
        let s2 = 2f64.sqrt();
        for (got, want) in eig.values.iter().zip([2.0 - s2, 2.0, 2.0 + s2]) {
            assert!((got - want).abs() < 1e-14);
        }
        for k in 0..3 {
            let x = eig.vector(k);
            let ax = a.mul_vec(&x);
            for i in 0..3 {
                assert!((ax[i] - eig.values[k] * x[i]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn tree_solver_on_path() {
        // Path 0-1-2 with unit weights, x0 = 0, x2 = 1 => x1 = 1/2.
        let mut b = TreeBuilder::<f64>::with_vertices(3);
        b.add_edge(VertexId(0), VertexId(1), 1.0);
        b.add_edge(VertexId(1), VertexId(2), 1.0);
        b.set_root(VertexId(1));
        let t = b.build().unwrap();
        let x = solve_tree_system(&t, &[1.0, 1.0], &[0.0; 3], &[Some(0.0), None, Some(1.0)], &[0.0; 3]).unwrap();
        assert_eq!(x, vec![0.0, 0.5, 1.0]);
        let err = solve_tree_system(&t, &[1.0, 1.0], &[0.0; 3], &[None, None, None], &[0.0; 3]);
        assert!(matches!(err, Err(Error::Singular(_))));
    }
}
