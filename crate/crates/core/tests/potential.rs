//! Harmonic functions, Green kernels and capacities against a dense oracle and
//! closed forms.

mod common;

use common::*;
use dendrite::classify::GeneratorSpec;
use dendrite::measure::SpeedMeasure;
use dendrite::{potential, simulate, PointRef, VertexId};
use proptest::prelude::*;
use proptest::sample::Index;

fn distinct(t: &T, a: &Index, b: &Index) -> Option<(VertexId, VertexId)> {
    let (a, b) = (vertex(t, a), vertex(t, b));
    (a != b).then_some((a, b))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn harmonic_matches_dense_solve((t, nu) in measured_tree(15), a: Index, b: Index, alpha in prop_oneof![Just(0.0), 0.01f64..2.0]) {
        let Some((a, b)) = distinct(&t, &a, &b) else { return Ok(()) };
        let h = potential::harmonic(&t, &nu, &[a.into()], &[b.into()], alpha).unwrap();
        let mesh = &h.mesh;
        let mut k = stiffness(mesh);
        let lumped = nu.lump_onto(&h.map, mesh).unwrap();
        for (i, row) in k.iter_mut().enumerate() {
            row[i] += alpha * lumped.get(VertexId(i));
        }
        let mut fixed = vec![None; mesh.vertex_count()];
        fixed[h.map.map_vertex(mesh, &a.into()).unwrap().0] = Some(0.0);
        fixed[h.map.map_vertex(mesh, &b.into()).unwrap().0] = Some(1.0);
        let want = dense_solve(&k, &vec![0.0; k.len()], &fixed);
        for (got, want) in h.values.values().iter().zip(&want) {
            prop_assert!(close(*got, *want, 1e-9), "{got} vs {want}");
            prop_assert!(-1e-12 <= *got && *got <= 1.0 + 1e-12);
        }
        let u = h.values.values();
        let energy: f64 = k.iter().zip(u).map(|(row, ui)| ui * row.iter().zip(u).map(|(kij, uj)| kij * uj).sum::<f64>()).sum();
        prop_assert!(close(h.energy_value, energy, 1e-9), "{} vs {energy}", h.energy_value);
    }

    #[test]
    fn green_matches_dense_solve((t, nu) in measured_tree(12), x: Index, b: Index, alpha in prop_oneof![Just(0.0), 0.01f64..2.0]) {
        let Some((x, b)) = distinct(&t, &x, &b) else { return Ok(()) };
        let g = potential::green_general(&t, &nu, &[b.into()], &[(x.into(), 1.0)], alpha).unwrap();
        let mesh = &g.mesh;
        let mut k = stiffness(mesh);
        let lumped = nu.lump_onto(&g.map, mesh).unwrap();
        for (i, row) in k.iter_mut().enumerate() {
            row[i] += alpha * lumped.get(VertexId(i));
        }
        let mut fixed = vec![None; mesh.vertex_count()];
        fixed[g.map.map_vertex(mesh, &b.into()).unwrap().0] = Some(0.0);
        let mut rhs = vec![0.0; mesh.vertex_count()];
        rhs[g.map.map_vertex(mesh, &x.into()).unwrap().0] = 1.0;
        let want = dense_solve(&k, &rhs, &fixed);
        for (got, want) in g.values.values().iter().zip(&want) {
            prop_assert!(close(*got, *want, 1e-9), "{got} vs {want}");
        }
    }

    #[test]
    fn green_kernel_is_symmetric((t, nu) in measured_tree(15), x: Index, y: Index, b: Index, alpha in prop_oneof![Just(0.0), 0.01f64..2.0]) {
        let (x, y, b) = (vertex(&t, &x), vertex(&t, &y), vertex(&t, &b));
        if x == b || y == b {
            return Ok(());
        }
        let gx = potential::green_general(&t, &nu, &[b.into()], &[(x.into(), 1.0)], alpha).unwrap();
        let gy = potential::green_general(&t, &nu, &[b.into()], &[(y.into(), 1.0)], alpha).unwrap();
        let (u, w) = (gx.value_at(&y.into()).unwrap(), gy.value_at(&x.into()).unwrap());
        prop_assert!(close(u, w, 1e-9), "{u} vs {w}");
        if alpha == 0.0 {
            let exact = potential::green_two_point(&t, &x.into(), &b.into(), &y.into()).unwrap();
            prop_assert!(close(u, exact, 1e-9));
        }
    }

    #[test]
    fn two_point_capacity_is_half_inverse_distance(
        (t, nu) in measured_tree(15),
        p in (any::<Index>(), 0.01f64..0.99, any::<bool>()),
        q in (any::<Index>(), 0.01f64..0.99, any::<bool>()),
    ) {
        let (a, b) = (point(&t, &p.0, p.1, p.2), point(&t, &q.0, q.1, q.2));
        let r = t.distance(&a, &b).unwrap();
        if r < 1e-6 {
            return Ok(());
        }
        let cap = potential::capacity(&t, &nu, &[a], &[b], 0.0).unwrap();
        prop_assert!(close(cap, 1.0 / (2.0 * r), 1e-9));
        prop_assert!(close(potential::two_point_capacity(&t, &a, &b).unwrap(), cap, 1e-9));
        // Killing only adds energy.
        prop_assert!(potential::capacity(&t, &nu, &[a], &[b], 0.5).unwrap() >= cap * (1.0 - 1e-12));
    }

    #[test]
    fn capacity_grows_with_the_target_set((t, nu) in measured_tree(15), a: Index, b: Index, c: Index) {
        let (a, b, c) = (vertex(&t, &a), vertex(&t, &b), vertex(&t, &c));
        if a == b || a == c {
            return Ok(());
        }
        let small = potential::capacity(&t, &nu, &[a.into()], &[b.into()], 0.0).unwrap();
        let large = potential::capacity(&t, &nu, &[a.into()], &[b.into(), c.into()], 0.0).unwrap();
        prop_assert!(large >= small * (1.0 - 1e-12));
    }

    #[test]
    fn hitting_probabilities_are_complementary(t in tree_strategy(20), x: Index, a: Index, b: Index) {
        let Some((a, b)) = distinct(&t, &a, &b) else { return Ok(()) };
        let x: PointRef<f64> = vertex(&t, &x).into();
        let p = potential::hitting_probability(&t, &x, &a.into(), &b.into()).unwrap();
        let q = potential::hitting_probability(&t, &x, &b.into(), &a.into()).unwrap();
        prop_assert!(close(p + q, 1.0, 1e-12));
        let nu = SpeedMeasure::lebesgue(&t);
        let h = potential::harmonic(&t, &nu, &[b.into()], &[a.into()], 0.0).unwrap();
        prop_assert!(close(h.value_at(&x).unwrap(), p, 1e-9));
    }

    #[test]
    fn star_exit_law_is_inverse_resistance(arms in prop::collection::vec((0.2f64..3.0, 0.05f64..0.95), 2..7)) {
        let t = dendrite::gen::star(&arms.iter().map(|a| a.0).collect::<Vec<_>>());
        let pts: Vec<PointRef<f64>> = arms
            .iter()
            .enumerate()
            .map(|(i, (len, f))| t.point_on_edge(dendrite::EdgeId(i), len * f).unwrap())
            .collect();
        let p = potential::star_exit_distribution(&t, &VertexId(0).into(), &pts).unwrap();
        prop_assert!(close(p.iter().sum::<f64>(), 1.0, 1e-12));
        let w: Vec<f64> = arms.iter().map(|(len, f)| 1.0 / (len * f)).collect();
        let total: f64 = w.iter().sum();
        for (pi, wi) in p.iter().zip(&w) {
            prop_assert!(close(*pi, wi / total, 1e-12));
        }
    }

    #[test]
    fn occupation_matches_the_chain_for_atomic_measures(t in tree_strategy(12), atoms in prop::collection::vec(0.1f64..3.0, 12), x: Index, b: Index) {
        let Some((x, b)) = distinct(&t, &x, &b) else { return Ok(()) };
        let nu = SpeedMeasure::atoms_only(&t, atoms[..t.vertex_count()].to_vec()).unwrap();
        let one = dendrite::calculus::PiecewiseLinearFn::constant(&t, 1.0);
        let formula = potential::expected_occupation(&t, &nu, &x.into(), &b.into(), &one).unwrap();
        let longest = t.edges().iter().map(|e| e.length).fold(0.0, f64::max);
        let chain = simulate::build_chain(&t, &nu, longest * 2.0).unwrap();
        let (mean, second) = chain.exact_hitting_moments(x, &[b]).unwrap();
        prop_assert!(close(formula, mean, 1e-9), "{formula} vs {mean}");
        prop_assert!(second >= mean * mean * (1.0 - 1e-12));
        let check = simulate::bound_check_mean_hitting(&t, &nu, &x.into(), &b.into()).unwrap();
        prop_assert!(check.holds && check.value <= check.bound * (1.0 + 1e-12));
    }

    #[test]
    fn scaling_lengths_scales_capacity(t in tree_strategy(12), s in 0.1f64..10.0, a: Index, b: Index) {
        let Some((a, b)) = distinct(&t, &a, &b) else { return Ok(()) };
        let scaled = t.with_lengths(&t.edges().iter().map(|e| e.length * s).collect::<Vec<_>>()).unwrap();
        let c0 = potential::capacity(&t, &SpeedMeasure::lebesgue(&t), &[a.into()], &[b.into()], 0.0).unwrap();
        let c1 = potential::capacity(&scaled, &SpeedMeasure::lebesgue(&scaled), &[a.into()], &[b.into()], 0.0).unwrap();
        prop_assert!(close(c1 * s, c0, 1e-9));
    }
}

#[test]
fn resistance_recursion_matches_truncated_trees() {
    for (k, c) in [(2usize, 1.0f64), (2, 2.0), (3, 1.5), (3, 4.0)] {
        let g = GeneratorSpec::new(k, c);
        for depth in 1..=6 {
            let t = g.truncate(depth).unwrap();
            let nu = SpeedMeasure::lebesgue(&t);
            let leaves: Vec<PointRef<f64>> =
                t.vertices().filter(|&v| v != t.root() && t.is_leaf(v)).map(PointRef::Vertex).collect();
            let cap = potential::capacity(&t, &nu, &[t.root().into()], &leaves, 0.0).unwrap();
            let r = potential::effective_resistance_to_depth(&g, depth).unwrap();
            assert!(close(1.0 / (2.0 * cap), r, 1e-9), "k={k} c={c} depth={depth}: {} vs {r}", 1.0 / (2.0 * cap));
        }
    }
}

#[test]
fn interval_occupation_closed_form() {
    // E_x[tau_0] on [0, L] with Lebesgue speed is 2xL - x^2.
    let t = dendrite::gen::interval::<f64>(3.0);
    let nu = SpeedMeasure::lebesgue(&t);
    let one = dendrite::calculus::PiecewiseLinearFn::constant(&t, 1.0);
    for x in [0.5, 1.0, 2.9] {
        let p = t.point_on_edge(dendrite::EdgeId(0), x).unwrap();
        let got = potential::expected_occupation(&t, &nu, &p, &VertexId(0).into(), &one).unwrap();
        assert!(close(got, 2.0 * x * 3.0 - x * x, 1e-12), "{got}");
    }
}

proptest! {
    #[test]
    fn capacity_after_a_scale_change(t in tree_strategy(12), phi in prop::collection::vec(-2.0f64..2.0, 11), a: Index, b: Index) {
        let Some((a, b)) = distinct(&t, &a, &b) else { return Ok(()) };
        let phi = &phi[..t.edge_count()];
        let warped = t.apply_potential(phi).unwrap();
        // r_phi(a, b) is the integral of exp(-2 phi) along the arc.
        let r: f64 = t.edge_path(a, b).iter().map(|e| t.edge(*e).length * (-2.0 * phi[e.0]).exp()).sum();
        let cap = potential::capacity(&warped, &SpeedMeasure::lebesgue(&warped), &[a.into()], &[b.into()], 0.0).unwrap();
        prop_assert!(close(cap, 1.0 / (2.0 * r), 1e-9));
    }
}
