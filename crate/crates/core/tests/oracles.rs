mod common;

use cimnet_core::dataflow::{compile_dataflow, enumerate_spatial_tiles};
use cimnet_core::predict::{fit_ridge, kendall_tau, TargetTransform};
use cimnet_core::search::{crowding_distance, hypervolume};
use cimnet_core::{
    cycle_reduction_at_iso_accuracy, non_dominated_sort, pareto_front, rng, Genome, Objectives, ParetoPoint,
    Provenance,
};
use common::*;
use rand::Rng;

fn o(a: f64, c: f64) -> Objectives {
    Objectives::new(a, c)
}

#[test]
fn kendall_matches_pair_counting() {
    let mut r = rng::seeded(11);
    for case in 0..200 {
        let n = r.gen_range(2..60);
        // Small value ranges force ties.
        let span = if case % 2 == 0 { 5 } else { 1000 };
        let x: Vec<f64> = (0..n).map(|_| r.gen_range(0..span) as f64).collect();
        let y: Vec<f64> = (0..n).map(|_| r.gen_range(0..span) as f64).collect();
        match kendall_tau(&x, &y) {
            Ok(t) => assert_eq!(t, kendall_tau_b(&x, &y), "case {case}"),
            Err(_) => assert!(kendall_tau_b(&x, &y).is_nan(), "case {case}"),
        }
    }
}

#[test]
fn kendall_examples() {
    assert_eq!(kendall_tau(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
    assert_eq!(kendall_tau(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), -1.0);
    assert!(kendall_tau(&[1.0, 1.0], &[1.0, 2.0]).is_err());
}

#[test]
fn sort_matches_peeling() {
    let mut r = rng::seeded(12);
    for case in 0..100 {
        let n = r.gen_range(1..=200);
        let pts: Vec<Objectives> = (0..n)
            .map(|_| o(r.gen_range(0..20) as f64 / 20.0, r.gen_range(1..40) as f64))
            .collect();
        let fronts = non_dominated_sort(&pts);
        let ranks = brute_force_ranks(&pts);
        let mut seen = vec![false; n];
        for (level, f) in fronts.iter().enumerate() {
            for &i in f {
                assert_eq!(ranks[i], level, "case {case}");
                assert!(!seen[i]);
                seen[i] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
    }
}

#[test]
fn pareto_front_matches_dominance_filter() {
    let mut r = rng::seeded(13);
    let pts: Vec<ParetoPoint> = (0..200u32)
        .map(|i| ParetoPoint {
            genome: Genome::from_bits((0..12).map(|b| ((i >> b) & 1) as u8).collect()).unwrap(),
            accuracy: r.gen_range(0.5..0.8),
            cycles: r.gen_range(1e5..1e7),
            provenance: Provenance::True,
        })
        .collect();
    let objs: Vec<Objectives> = pts.iter().map(|p| p.objectives()).collect();
    let ranks = brute_force_ranks(&objs);
    let front = pareto_front(&pts);
    assert_eq!(front.len(), ranks.iter().filter(|&&k| k == 0).count());
    for w in front.windows(2) {
        assert!(w[0].cycles <= w[1].cycles);
        assert!(w[0].accuracy < w[1].accuracy);
    }
    assert_eq!(pareto_front(&pts[..1]), pts[..1].to_vec());
}

#[test]
fn ridge_is_stationary() {
    let mut r = rng::seeded(14);
    for case in 0..50 {
        let n = r.gen_range(5..80);
        let d = r.gen_range(1..12);
        let lambda = [0.01, 0.1, 1.0, 10.0][case % 4];
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| if r.gen_bool(0.5) { 1.0 } else { 0.0 }).collect())
            .collect();
        let y: Vec<f64> = (0..n).map(|_| r.gen_range(-3.0..3.0)).collect();
        let m = fit_ridge(&x, &y, lambda, TargetTransform::Identity).unwrap();
        let g = ridge_gradient(&x, &y, &m.weights, m.bias, lambda);
        assert!(norm(&g) <= 1e-8, "case {case}: gradient norm {}", norm(&g));
    }
}

#[test]
fn ridge_two_points() {
    // Centered x = ±0.5, y = ±1: w = Σxy / (Σx² + λ) = 1 / 1.5.
    let m = fit_ridge(
        &[vec![1.0], vec![2.0]],
        &[2.0, 4.0],
        1.0,
        TargetTransform::Identity,
    )
    .unwrap();
    assert!((m.weights[0] - 2.0 / 3.0).abs() < 1e-12);
    assert!((m.bias - 2.0).abs() < 1e-12);
}

#[test]
fn iso_accuracy_examples() {
    let r = cycle_reduction_at_iso_accuracy(&[o(0.75, 500.0)], o(0.75, 1000.0)).unwrap();
    assert_eq!(r, 2.0);
    let r = cycle_reduction_at_iso_accuracy(&[o(0.70, 200.0), o(0.80, 600.0)], o(0.75, 1000.0)).unwrap();
    assert!((r - 2.5).abs() < 1e-12);
    assert!(cycle_reduction_at_iso_accuracy(&[o(0.6, 10.0)], o(0.75, 1000.0)).is_err());
    assert!(cycle_reduction_at_iso_accuracy(&[], o(0.75, 1000.0)).is_err());
}

#[test]
fn crowding_and_hypervolume() {
    let f = [o(0.6, 100.0), o(0.7, 200.0), o(0.8, 400.0)];
    let c = crowding_distance(&f);
    assert!(c[0].is_infinite() && c[2].is_infinite());
    // (0.8 - 0.6) / 0.2 + (400 - 100) / 300
    assert!((c[1] - 2.0).abs() < 1e-12);
    let hv = hypervolume(&f, o(0.5, 500.0));
    let expect = 100.0 * 0.1 + 200.0 * 0.2 + 100.0 * 0.3;
    assert!((hv - expect).abs() < 1e-9);
}

#[test]
fn compiler_matches_ladder_brute_force() {
    let mut r = rng::seeded(15);
    for i in 0..40 {
        let layer = random_small_layer(&mut r, i);
        let cfg = random_small_machine(&mut r);
        let got = compile_dataflow(&layer, &cfg).map(|t| t.cost.cycles).ok();
        assert_eq!(
            got,
            brute_force_min_cycles(&layer, &cfg, pow2_clipped),
            "{layer:?} {cfg:?}"
        );
    }
}

#[test]
fn groups_are_placed_first() {
    let mut r = rng::seeded(16);
    for i in 0..40 {
        let layer = random_small_layer(&mut r, i);
        let cfg = random_small_machine(&mut r);
        let sg = layer.groups.min(cfg.nodes());
        for s in enumerate_spatial_tiles(&layer, &cfg) {
            assert_eq!(s.groups, sg);
            assert!(s.product() <= cfg.nodes());
        }
    }
}
