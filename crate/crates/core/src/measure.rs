//! Speed measures: constant densities on edges plus atoms on vertices.

use crate::calculus::PiecewiseLinearFn;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tree::{EdgeId, SubdivisionMap, TreeSpec, VertexId};

/// A Radon measure on a finite tree with density `edge_density[e]` (mass per unit
/// length) on each edge and point masses `vertex_atom[v]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpeedMeasure<S> {
    density: Vec<S>,
    atom: Vec<S>,
}

impl<S: Scalar> SpeedMeasure<S> {
    pub fn new(tree: &TreeSpec<S>, density: Vec<S>, atom: Vec<S>) -> Result<Self> {
        if density.len() != tree.edge_count() || atom.len() != tree.vertex_count() {
            return Err(Error::InvalidMeasure(format!(
                "expected {} densities and {} atoms, got {} and {}",
                tree.edge_count(),
                tree.vertex_count(),
                density.len(),
                atom.len()
            )));
        }
        if let Some(i) = density.iter().position(|d| !(d.is_finite() && *d >= S::zero())) {
            return Err(Error::InvalidMeasure(format!("density on edge {i} is negative or not finite")));
        }
        if let Some(i) = atom.iter().position(|a| !(a.is_finite() && *a >= S::zero())) {
            return Err(Error::InvalidMeasure(format!(
                "atom at {:?} is negative or not finite",
                tree.name(VertexId(i))
            )));
        }
        let nu = SpeedMeasure { density, atom };
        if !(nu.total_mass(tree) > S::zero()) {
            return Err(Error::InvalidMeasure("measure has zero total mass".into()));
        }
        Ok(nu)
    }

    /// The length measure: density one on every edge, no atoms.
    pub fn lebesgue(tree: &TreeSpec<S>) -> Self {
        SpeedMeasure {
            density: vec![S::one(); tree.edge_count()],
            atom: vec![S::zero(); tree.vertex_count()],
        }
    }

    pub fn atoms_only(tree: &TreeSpec<S>, atom: Vec<S>) -> Result<Self> {
        Self::new(tree, vec![S::zero(); tree.edge_count()], atom)
    }

    pub fn density(&self, e: EdgeId) -> S {
        self.density[e.0]
    }

    pub fn atom(&self, v: VertexId) -> S {
        self.atom[v.0]
    }

    pub fn densities(&self) -> &[S] {
        &self.density
    }

    pub fn atoms(&self) -> &[S] {
        &self.atom
    }

    pub fn matches(&self, tree: &TreeSpec<S>) -> bool {
        self.density.len() == tree.edge_count() && self.atom.len() == tree.vertex_count()
    }

    fn check(&self, tree: &TreeSpec<S>) -> Result<()> {
        if self.matches(tree) {
            Ok(())
        } else {
            Err(Error::InvalidMeasure("measure does not belong to this tree".into()))
        }
    }

    /// Whether every open ball has positive mass, i.e. every edge carries density.
    pub fn has_full_support(&self) -> bool {
        if self.density.is_empty() {
            return self.atom.iter().any(|&a| a > S::zero());
        }
        self.density.iter().all(|&d| d > S::zero())
    }

    pub fn edge_mass(&self, tree: &TreeSpec<S>, e: EdgeId) -> S {
        self.density[e.0] * tree.edge(e).length
    }

    /// `ν(T)`.
    pub fn total_mass(&self, tree: &TreeSpec<S>) -> S {
        let edges: S = self
            .density
            .iter()
            .zip(tree.edges())
            .map(|(&d, e)| d * e.length)
            .sum();
        edges + self.atom.iter().copied().sum::<S>()
    }

    pub fn scaled(&self, factor: S) -> Self {
        SpeedMeasure {
            density: self.density.iter().map(|&d| d * factor).collect(),
            atom: self.atom.iter().map(|&a| a * factor).collect(),
        }
    }

    /// The same measure expressed on a refinement of its tree.
    pub fn refine(&self, map: &SubdivisionMap<S>, mesh: &TreeSpec<S>) -> Self {
        let density = (0..mesh.edge_count())
            .map(|e| self.density[map.origin(EdgeId(e)).edge.0])
            .collect();
        let atom = (0..mesh.vertex_count())
            .map(|v| if map.is_source_vertex(VertexId(v)) { self.atom[v] } else { S::zero() })
            .collect();
        SpeedMeasure { density, atom }
    }

    /// Lumps the measure onto the vertices of its own tree: each vertex receives
    /// its atom plus half the mass of every incident edge.
    pub fn lump(&self, tree: &TreeSpec<S>) -> Result<LumpedMeasure<S>> {
        self.check(tree)?;
        let half = S::of(0.5);
        let mut mass = self.atom.clone();
        for (i, e) in tree.edges().iter().enumerate() {
            let m = self.density[i] * e.length * half;
            mass[e.u.0] += m;
            mass[e.v.0] += m;
        }
        Ok(LumpedMeasure { mass })
    }

    /// Refines onto `mesh` and lumps there.
    pub fn lump_onto(&self, map: &SubdivisionMap<S>, mesh: &TreeSpec<S>) -> Result<LumpedMeasure<S>> {
        self.refine(map, mesh).lump(mesh)
    }

    /// `∫ f dν` for a piecewise linear `f`, exact.
    pub fn integrate(&self, tree: &TreeSpec<S>, f: &PiecewiseLinearFn<S>) -> Result<S> {
        self.check(tree)?;
        f.check(tree)?;
        let half = S::of(0.5);
        let edges: S = tree
            .edges()
            .iter()
            .enumerate()
            .map(|(i, e)| self.density[i] * e.length * (f.value(e.u) + f.value(e.v)) * half)
            .sum();
        let atoms: S = self
            .atom
            .iter()
            .enumerate()
            .map(|(v, &a)| a * f.value(VertexId(v)))
            .sum();
        Ok(edges + atoms)
    }

    /// `∫ f g dν` for piecewise linear `f` and `g`, exact.
    pub fn integrate_product(
        &self,
        tree: &TreeSpec<S>,
        f: &PiecewiseLinearFn<S>,
        g: &PiecewiseLinearFn<S>,
    ) -> Result<S> {
        self.check(tree)?;
        f.check(tree)?;
        g.check(tree)?;
        let two = S::of(2.0);
        let sixth = S::one() / S::of(6.0);
        let edges: S = tree
            .edges()
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let (fu, fv, gu, gv) = (f.value(e.u), f.value(e.v), g.value(e.u), g.value(e.v));
                self.density[i] * e.length * (two * fu * gu + two * fv * gv + fu * gv + fv * gu) * sixth
            })
            .sum();
        let atoms: S = self
            .atom
            .iter()
            .enumerate()
            .map(|(v, &a)| a * f.value(VertexId(v)) * g.value(VertexId(v)))
            .sum();
        Ok(edges + atoms)
    }

    /// `ν` restricted to the given edges (densities only) and normalised to a
    /// probability measure.
    pub fn restricted_to_edges(&self, tree: &TreeSpec<S>, edges: &[EdgeId]) -> Result<Self> {
        self.check(tree)?;
        let mut density = vec![S::zero(); self.density.len()];
        for e in edges {
            if e.0 >= density.len() {
                return Err(Error::InvalidArgument(format!("unknown edge {}", e.0)));
            }
            density[e.0] = self.density[e.0];
        }
        let nu = SpeedMeasure { density, atom: vec![S::zero(); self.atom.len()] };
        let total = nu.total_mass(tree);
        if !(total > S::zero()) {
            return Err(Error::InvalidMeasure("restriction has zero mass".into()));
        }
        Ok(nu.scaled(S::one() / total))
    }

    /// `∫ (dν'/dν) dν'` where `self = ν'`; fails unless `ν' ≪ ν`.
    pub fn density_second_moment(&self, nu: &SpeedMeasure<S>, tree: &TreeSpec<S>) -> Result<S> {
        self.check(tree)?;
        nu.check(tree)?;
        let mut acc = S::zero();
        for (i, e) in tree.edges().iter().enumerate() {
            let (p, q) = (self.density[i], nu.density[i]);
            if p > S::zero() {
                if !(q > S::zero()) {
                    return Err(Error::InvalidMeasure(format!(
                        "initial law has density on edge {i} where the speed measure has none"
                    )));
                }
                acc += e.length * p * p / q;
            }
        }
        for (v, (&p, &q)) in self.atom.iter().zip(&nu.atom).enumerate() {
            if p > S::zero() {
                if !(q > S::zero()) {
                    return Err(Error::InvalidMeasure(format!(
                        "initial law has an atom at {:?} where the speed measure has none",
                        tree.name(VertexId(v))
                    )));
                }
                acc += p * p / q;
            }
        }
        Ok(acc)
    }
}

/// A measure concentrated on mesh vertices.
#[derive(Clone, Debug, PartialEq)]
pub struct LumpedMeasure<S> {
    pub mass: Vec<S>,
}

impl<S: Scalar> LumpedMeasure<S> {
    pub fn total(&self) -> S {
        self.mass.iter().copied().sum()
    }

    pub fn get(&self, v: VertexId) -> S {
        self.mass[v.0]
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }
}
