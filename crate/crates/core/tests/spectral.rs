//! Eigenvalues, their bounds and the heat semigroup.

mod common;

use common::*;
use dendrite::measure::SpeedMeasure;
use dendrite::spectral::{self, HeatSemigroup};
use dendrite::{EdgeId, PointRef, VertexId};
use proptest::prelude::*;
use proptest::sample::Index;
use std::f64::consts::PI;

/// Smallest eigenvalue of `K u = λ M u` with `u = 0` on `pinned`, by dense
/// inverse iteration.
fn dense_principal(k: &[Vec<f64>], mass: &[f64], pinned: &[usize]) -> f64 {
    let n = mass.len();
    let mut fixed = vec![None; n];
    for &p in pinned {
        fixed[p] = Some(0.0);
    }
    let mut u: Vec<f64> = (0..n).map(|i| if fixed[i].is_some() { 0.0 } else { 1.0 + i as f64 * 1e-3 }).collect();
    let mut lambda = 0.0;
    for _ in 0..500 {
        let rhs: Vec<f64> = u.iter().zip(mass).map(|(a, m)| a * m).collect();
        let w = dense_solve(k, &rhs, &fixed);
        let num: f64 = (0..n).map(|i| u[i] * rhs[i]).sum();
        let den: f64 = (0..n).map(|i| w[i] * rhs[i]).sum();
        lambda = num / den;
        let norm = w.iter().zip(mass).map(|(a, m)| m * a * a).sum::<f64>().sqrt();
        u = w.iter().map(|a| a / norm).collect();
    }
    lambda
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn principal_eigenvalue_matches_dense_inverse_iteration((t, nu) in measured_tree(8), b: Index) {
        let b = vertex(&t, &b);
        let res = spectral::principal_eigenvalue(&t, &nu, &[b.into()], t.total_length() / 40.0).unwrap();
        let k = stiffness(&res.mesh);
        let pinned = res.map.map_vertex(&res.mesh, &b.into()).unwrap().0;
        let mut mass = res.mass.mass.clone();
        mass[pinned] = 0.0;
        let want = dense_principal(&k, &mass, &[pinned]);
        prop_assert!(close(res.eigenvalue, want, 1e-7), "{} vs {want}", res.eigenvalue);
        prop_assert!(close(res.rayleigh_quotient(), res.eigenvalue, 1e-9));
        prop_assert!(res.eigenfunction.values().iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn principal_eigenvalue_respects_its_bounds((t, nu) in measured_tree(12), b: Index, f in 0.05f64..0.95, interior: bool) {
        let b = point(&t, &b, f, interior);
        let res = spectral::principal_eigenvalue(&t, &nu, &[b], t.total_length() / 200.0).unwrap();
        // The computed value is exact for the lumped measure on the mesh.
        let lumped = SpeedMeasure::atoms_only(&res.mesh, res.mass.mass.clone()).unwrap();
        let bm = res.map.map_point(&res.mesh, &b).unwrap();
        let bounds = spectral::eigenvalue_bounds(&res.mesh, &lumped, &bm).unwrap();
        prop_assert!(bounds.lower <= res.eigenvalue * (1.0 + 1e-9), "{bounds:?} {}", res.eigenvalue);
        prop_assert!(res.eigenvalue <= bounds.upper * (1.0 + 1e-9), "{bounds:?} {}", res.eigenvalue);
    }

    #[test]
    fn dirichlet_value_is_below_the_gap((t, nu) in measured_tree(10), b: Index) {
        let h = t.total_length() / 100.0;
        let lambda_b = spectral::principal_eigenvalue(&t, &nu, &[vertex(&t, &b).into()], h).unwrap().eigenvalue;
        let gap = spectral::spectral_gap(&t, &nu, h).unwrap();
        prop_assert!(lambda_b <= gap.eigenvalue * (1.0 + 1e-7), "{lambda_b} > {}", gap.eigenvalue);
        // The gap eigenfunction is orthogonal to constants.
        let mean: f64 = gap.eigenfunction.values().iter().zip(&gap.mass.mass).map(|(a, m)| a * m).sum();
        prop_assert!(mean.abs() < 1e-7);
    }

    #[test]
    fn eigenvalue_scales_with_length_squared(t in tree_strategy(8), s in 0.2f64..5.0, b: Index) {
        let b: PointRef<f64> = vertex(&t, &b).into();
        let scaled = t.with_lengths(&t.edges().iter().map(|e| e.length * s).collect::<Vec<_>>()).unwrap();
        let l0 = spectral::principal_eigenvalue(&t, &SpeedMeasure::lebesgue(&t), &[b], t.total_length() / 50.0).unwrap();
        let l1 = spectral::principal_eigenvalue(&scaled, &SpeedMeasure::lebesgue(&scaled), &[b], scaled.total_length() / 50.0).unwrap();
        prop_assert!(close(l1.eigenvalue * s * s, l0.eigenvalue, 1e-7));
    }

    #[test]
    fn heat_flow_conserves_mass_and_contracts((t, nu) in measured_tree(8), e: Index) {
        let heat = HeatSemigroup::new(&t, &nu, t.total_length() / 60.0, 200).unwrap();
        let law = nu.restricted_to_edges(&t, &[EdgeId(e.index(t.edge_count()))]).unwrap();
        let scale = 2.0 * t.diameter() * nu.total_mass(&t);
        let times: Vec<f64> = (0..20).map(|j| j as f64 * scale / 4.0).collect();
        let tv = heat.tv_curve(&law, &times).unwrap();
        let bound = spectral::mixing_bound(&t, &nu, &law, &times).unwrap();
        for w in tv.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-9);
        }
        for (a, b) in tv.iter().zip(&bound) {
            prop_assert!(a <= b);
        }
        let p0 = vec![1.0 / heat.mass().len() as f64; heat.mass().len()];
        let p = heat.evolve(&p0, scale);
        prop_assert!(close(p.iter().sum::<f64>(), 1.0, 1e-9));
        prop_assert!(p.iter().all(|&x| x > -1e-9));
    }
}

#[test]
fn mesh_refinement_converges_on_the_interval() {
    let t = dendrite::gen::interval::<f64>(1.0);
    let nu = SpeedMeasure::lebesgue(&t);
    let exact = PI * PI / 8.0;
    let mut last = f64::INFINITY;
    for h in [0.1, 0.05, 0.025, 0.0125] {
        let err = (spectral::principal_eigenvalue(&t, &nu, &[VertexId(0).into()], h).unwrap().eigenvalue - exact).abs();
        assert!(err < last / 3.0, "h={h}: error {err} after {last}");
        last = err;
    }
    let gap = spectral::spectral_gap(&t, &nu, 1e-3).unwrap().eigenvalue;
    assert!((gap - PI * PI / 2.0).abs() < 1e-2 * PI * PI / 2.0);
}

#[test]
fn heat_semigroup_matches_runge_kutta() {
    let t = dendrite::gen::y_tree::<f64>();
    let nu = SpeedMeasure::new(&t, vec![1.0, 0.5, 2.0], vec![0.0, 0.3, 0.0, 0.0]).unwrap();
    let heat = HeatSemigroup::new(&t, &nu, 0.5, 100).unwrap();
    let (mesh, _) = t.subdivide(0.5).unwrap();
    let k = stiffness(&mesh);
    let m = heat.mass().to_vec();
    let n = m.len();
    // The law evolves by dp/dt = -K M^{-1} p.
    let rate = |p: &[f64]| -> Vec<f64> {
        let y: Vec<f64> = p.iter().zip(&m).map(|(a, b)| a / b).collect();
        (0..n).map(|i| -(0..n).map(|j| k[i][j] * y[j]).sum::<f64>()).collect()
    };
    let mut p = vec![0.0; n];
    p[0] = 1.0;
    let p0 = p.clone();
    let (horizon, steps) = (2.0, 20_000);
    let dt = horizon / steps as f64;
    let axpy = |a: &[f64], s: f64, b: &[f64]| a.iter().zip(b).map(|(x, y)| x + s * y).collect::<Vec<_>>();
    for _ in 0..steps {
        let k1 = rate(&p);
        let k2 = rate(&axpy(&p, dt / 2.0, &k1));
        let k3 = rate(&axpy(&p, dt / 2.0, &k2));
        let k4 = rate(&axpy(&p, dt, &k3));
        for i in 0..n {
            p[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    let got = heat.evolve(&p0, horizon);
    for (a, b) in got.iter().zip(&p) {
        assert!((a - b).abs() < 1e-8, "{a} vs {b}");
    }
}

#[test]
fn half_interval_mixing_law() {
    // The uniform law on [0, 1/2] inside [0, 1]: chi = 2, so the prefactor is 1 + sqrt 2.
    let t = dendrite::gen::interval::<f64>(1.0);
    let (t, _) = t.refine_at(&[t.point_on_edge(EdgeId(0), 0.5).unwrap()]).unwrap();
    let nu = SpeedMeasure::lebesgue(&t);
    let half = t.edges().iter().position(|e| e.u == VertexId(0) || e.v == VertexId(0)).unwrap();
    let law = nu.restricted_to_edges(&t, &[EdgeId(half)]).unwrap();
    let b = spectral::mixing_bound(&t, &nu, &law, &[0.0, 2.0]).unwrap();
    assert!((b[0] - (1.0 + 2f64.sqrt())).abs() < 1e-12);
    assert!((b[1] - (1.0 + 2f64.sqrt()) * (-1.0f64).exp()).abs() < 1e-12);
}
