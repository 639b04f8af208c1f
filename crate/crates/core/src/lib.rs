//! Potential theory and Brownian motion on finite metric trees.
//!
//! A tree is given by its skeleton ([`TreeSpec`]) and a speed measure made of edge
//! densities and vertex atoms ([`SpeedMeasure`]). On top of that the crate offers
//! the metric calculus of the tree, the Dirichlet form `½∫(∇f)² dλ` with its
//! capacities, Green kernels and hitting laws, eigenvalue and mixing estimates,
//! recurrence tests for self-similar trees, and a simulator for the diffusion.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix `f64`.

// `!(x > 0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calculus;
pub mod classify;
pub mod error;
pub mod format;
pub mod gen;
pub mod linalg;
pub mod measure;
pub mod potential;
pub mod scalar;
pub mod simulate;
pub mod spectral;
pub mod tree;
pub mod verify;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use tree::{EdgeId, LeafKind, PointRef, SubdivisionMap, TreeBuilder, TreeSpec, VertexId};

pub type Tree = tree::TreeSpec<f64>;
pub type Point = tree::PointRef<f64>;
pub type Measure = measure::SpeedMeasure<f64>;
pub type Lumped = measure::LumpedMeasure<f64>;
pub type PlFn = calculus::PiecewiseLinearFn<f64>;
pub type Gradient = calculus::EdgeGradient<f64>;
pub type Generator = classify::GeneratorSpec<f64>;
pub type Chain = simulate::Chain<f64>;
pub type Config = simulate::WalkConfig<f64>;
pub type TreeFile = format::TreeFile<f64>;
