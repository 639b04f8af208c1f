//! The walk simulator: reproducibility, exactness of the embedded chain and
//! agreement with linear solves.

mod common;

use common::*;
use dendrite::calculus::PiecewiseLinearFn;
use dendrite::measure::SpeedMeasure;
use dendrite::simulate::{self, Clock, Stop, WalkConfig};
use dendrite::{gen, Error, PointRef, VertexId};
use proptest::prelude::*;
use proptest::sample::Index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn results_do_not_depend_on_threads((t, nu) in measured_tree(10), seed: u64, start: Index, threads in 2usize..6) {
        let h = t.total_length() / 30.0;
        let chain = simulate::build_chain(&t, &nu, h).unwrap();
        let stop = Stop::Hit(vec![t.root().into()]);
        let start: PointRef<f64> = vertex(&t, &start).into();
        let one = simulate::run_walks(&chain, &WalkConfig { threads: 1, ..WalkConfig::new(h, 700, seed, stop.clone()) }, &start).unwrap();
        let many = simulate::run_walks(&chain, &WalkConfig { threads, ..WalkConfig::new(h, 700, seed, stop) }, &start).unwrap();
        prop_assert_eq!(one, many);
    }

    #[test]
    fn jump_laws_follow_conductances((t, nu) in measured_tree(10)) {
        let chain = simulate::build_chain(&t, &nu, t.total_length() / 20.0).unwrap();
        let mesh = &chain.mesh;
        for v in mesh.vertices() {
            let probs = chain.jump_probabilities(v);
            prop_assert!(close(probs.iter().map(|p| p.1).sum::<f64>(), 1.0, 1e-12));
            let total: f64 = mesh.neighbors(v).iter().map(|&(_, e)| 1.0 / mesh.edge(e).length).sum();
            for (w, p) in probs {
                let (_, e) = *mesh.neighbors(v).iter().find(|n| n.0 == w).unwrap();
                prop_assert!(close(p, 1.0 / mesh.edge(e).length / total, 1e-12));
            }
            let rate = total / (2.0 * chain.mass.get(v));
            prop_assert!(close(chain.holding_rate(v), rate, 1e-12));
        }
    }
}

#[test]
fn mean_hitting_time_agrees_with_the_linear_solve() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for i in 0..4 {
        let t = gen::random_tree::<f64, _>(&mut rng, 8, 0.3, 2.0);
        let nu = gen::random_measure(&mut rng, &t, 0.5, 2.0, 0.3).unwrap();
        let h = t.total_length() / 40.0;
        let chain = simulate::build_chain(&t, &nu, h).unwrap();
        let start = chain.locate(&VertexId(7).into()).unwrap();
        let (mean, second) = chain.exact_hitting_moments(start, &[chain.locate(&VertexId(0).into()).unwrap()]).unwrap();
        let n = 4000;
        let cfg = WalkConfig::new(h, n, 100 + i, Stop::Hit(vec![VertexId(0).into()]));
        let est = simulate::estimate_hitting_time(&chain, &cfg, &VertexId(7).into(), &[VertexId(0).into()]).unwrap();
        let sigma = ((second - mean * mean) / n as f64).sqrt();
        assert!((est.mean - mean).abs() < 5.0 * sigma, "tree {i}: {} vs {mean} (sigma {sigma})", est.mean);
        assert!(close(est.std_error, sigma, 0.2), "tree {i}: standard error {} vs {sigma}", est.std_error);
    }
}

#[test]
fn occupation_of_one_is_the_hitting_time() {
    let t = gen::y_tree::<f64>();
    let nu = SpeedMeasure::lebesgue(&t);
    let chain = simulate::build_chain(&t, &nu, 0.25).unwrap();
    let cfg = WalkConfig::new(0.25, 2000, 9, Stop::Hit(vec![VertexId(3).into()]));
    let one = PiecewiseLinearFn::constant(&t, 1.0);
    let occ = simulate::estimate_occupation(&chain, &cfg, &VertexId(2).into(), &[VertexId(3).into()], &one).unwrap();
    let tau = simulate::estimate_hitting_time(&chain, &cfg, &VertexId(2).into(), &[VertexId(3).into()]).unwrap();
    assert!(close(occ.mean, tau.mean, 1e-12), "{} vs {}", occ.mean, tau.mean);
}

#[test]
fn horizon_walks_stop_on_time() {
    let t = gen::y_tree::<f64>();
    let nu = SpeedMeasure::lebesgue(&t);
    let chain = simulate::build_chain(&t, &nu, 0.5).unwrap();
    let cfg = WalkConfig::new(0.5, 300, 3, Stop::Horizon(4.0));
    let agg = simulate::run_walks(&chain, &cfg, &VertexId(1).into()).unwrap();
    assert!(agg.walks.iter().all(|w| w.elapsed == 4.0 && w.exit.is_none()));
    assert!(close(agg.occupation.iter().sum::<f64>(), 300.0 * 4.0, 1e-12));
    let csv = agg.to_csv(&chain.mesh);
    assert!(csv.starts_with("walk_id,exit,elapsed,killed\n"));
    assert_eq!(csv.lines().count(), 301);
}

#[test]
fn seeds_matter_and_repeat() {
    let t = gen::y_tree::<f64>();
    let nu = SpeedMeasure::lebesgue(&t);
    let chain = simulate::build_chain(&t, &nu, 0.5).unwrap();
    let run = |seed| {
        let cfg = WalkConfig::new(0.5, 200, seed, Stop::Hit(vec![VertexId(3).into()]));
        simulate::run_walks(&chain, &cfg, &VertexId(2).into()).unwrap()
    };
    assert_eq!(run(1), run(1));
    assert_ne!(run(1), run(2));
}

#[test]
fn jump_count_clock_counts_jumps() {
    let t = gen::interval::<f64>(1.0);
    let nu = SpeedMeasure::lebesgue(&t);
    let chain = simulate::build_chain(&t, &nu, 0.1).unwrap();
    let cfg = WalkConfig { clock: Clock::JumpCountOnly, ..WalkConfig::new(0.1, 500, 4, Stop::Hit(vec![VertexId(0).into()])) };
    let agg = simulate::run_walks(&chain, &cfg, &VertexId(1).into()).unwrap();
    assert!(agg.walks.iter().all(|w| w.elapsed == w.jumps as f64));
    // Simple random walk on 11 sites reflected at one end: E[jumps] = 10^2.
    let mean = agg.elapsed_estimate();
    assert!((mean.mean - 100.0).abs() < 5.0 * mean.std_error, "{mean:?}");
}

#[test]
fn censoring_is_reported() {
    let t = gen::interval::<f64>(1.0);
    let nu = SpeedMeasure::lebesgue(&t);
    let chain = simulate::build_chain(&t, &nu, 0.01).unwrap();
    let cfg = WalkConfig { max_jumps: 5, ..WalkConfig::new(0.01, 100, 4, Stop::Hit(vec![VertexId(0).into()])) };
    let agg = simulate::run_walks(&chain, &cfg, &VertexId(1).into()).unwrap();
    assert_eq!(agg.censored, 100);
    let err = simulate::estimate_hitting_time(&chain, &cfg, &VertexId(1).into(), &[VertexId(0).into()]).unwrap_err();
    assert!(matches!(err, Error::Simulation(_)), "{err:?}");
}

#[test]
fn invalid_configurations_are_rejected() {
    let t = gen::y_tree::<f64>();
    let nu = SpeedMeasure::lebesgue(&t);
    let chain = simulate::build_chain(&t, &nu, 0.5).unwrap();
    let start: PointRef<f64> = VertexId(1).into();
    for cfg in [
        WalkConfig::new(0.5, 0, 1, Stop::Horizon(1.0)),
        WalkConfig::new(0.5, 10, 1, Stop::Hit(vec![])),
        WalkConfig::new(0.5, 10, 1, Stop::Horizon(-1.0)),
        WalkConfig::new(f64::NAN, 10, 1, Stop::Horizon(1.0)),
    ] {
        assert!(matches!(simulate::run_walks(&chain, &cfg, &start), Err(Error::InvalidArgument(_))), "{cfg:?}");
    }
    let atoms = SpeedMeasure::atoms_only(&t, vec![1.0, 0.0, 1.0, 1.0]).unwrap();
    assert!(simulate::build_chain(&t, &atoms, 10.0).is_err());
}

#[test]
fn second_moment_converges_at_second_order() {
    // On [0, 1] from x = 1: E[tau] = 1 exactly at every mesh, E[tau^2] = 5/3 in the limit.
    let t = gen::interval::<f64>(1.0);
    let nu = SpeedMeasure::lebesgue(&t);
    let mut errors = Vec::new();
    for h in [0.2, 0.1, 0.05, 0.025] {
        let chain = simulate::build_chain(&t, &nu, h).unwrap();
        let (start, target) = (chain.locate(&VertexId(1).into()).unwrap(), chain.locate(&VertexId(0).into()).unwrap());
        let (mean, second) = chain.exact_hitting_moments(start, &[target]).unwrap();
        assert!((mean - 1.0).abs() < 1e-12);
        errors.push((second - 5.0 / 3.0).abs());
    }
    for w in errors.windows(2) {
        assert!((w[0] / w[1]).log2() >= 1.8, "{errors:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn first_moment_is_exact_on_every_mesh((t, nu) in measured_tree(10), x: Index, b: Index, h in 0.05f64..1.0) {
        let (x, b) = (vertex(&t, &x), vertex(&t, &b));
        prop_assume!(x != b);
        let chain = simulate::build_chain(&t, &nu, h).unwrap();
        let (xm, bm) = (chain.locate(&x.into()).unwrap(), chain.locate(&b.into()).unwrap());
        let (mean, _) = chain.exact_hitting_moments(xm, &[bm]).unwrap();
        let one = PiecewiseLinearFn::constant(&t, 1.0);
        let exact = dendrite::potential::expected_occupation(&t, &nu, &x.into(), &b.into(), &one).unwrap();
        prop_assert!(close(mean, exact, 1e-9), "{mean} vs {exact}");
    }
}
