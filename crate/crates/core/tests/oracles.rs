//! Statistical and brute-force checks of the library against independent
//! re-computations, plus property tests.

use std::f64::consts::TAU;

use ndarray::Array2;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use vertical_cluster::clustering::{
    kmedoids_assign, kmedoids_fit, pairwise_cost, som_fit, KMedoidsConfig, SomConfig, Topology,
};
use vertical_cluster::geometry::{centerline, project_to_centerline, scan_flexible, surface_point};
use vertical_cluster::io::{read_csv, write_cloud, ReadOptions};
use vertical_cluster::pipeline::{project_xy, turn_split, vertical_cluster};
use vertical_cluster::verticality::{circular_span, threshold_search, verticality_report, Scenario, ScanSpec};
use vertical_cluster::{seed, Algo, FeatureSet, FitConfig, HelixParams, LabeledCloud, Method, SplitMethod};

fn with_labels(cloud: vertical_cluster::PointCloud, labels: Vec<usize>, k: usize) -> LabeledCloud {
    LabeledCloud {
        cloud,
        labels,
        k_per_turn: k,
        method: Method {
            algo: Algo::Kmedoids,
            features: FeatureSet::Xy,
            turn_split: SplitMethod::Truth,
        },
        fits: vec![],
    }
}

#[test]
fn flexible_scan_fills_every_sector() {
    let p = HelixParams::default();
    let mut violations = 0;
    for s in 0..1000 {
        let c = scan_flexible(&p, 3600, 0.1, s).unwrap();
        let mut bins = [0usize; 72];
        for q in &c.points {
            let t = q.truth.unwrap().t;
            bins[((t / TAU * 72.0) as usize).min(71)] += 1;
        }
        if bins.iter().any(|&b| b < 20) {
            violations += 1;
        }
    }
    assert!(violations < 10, "{violations} of 1000 seeds had a sparse sector");
}

#[test]
fn projection_matches_fine_grid() {
    let p = HelixParams::default();
    let mut rng = seed::rng(3);
    let mut noiseless = seed::rng(0);
    for _ in 0..200 {
        let t0 = rng.gen_range(0.0..p.t_max());
        let phi = rng.gen_range(0.0..TAU);
        let q = surface_point(t0, phi, &p, 0.0, &mut noiseless).xyz();
        let d2 = |t: f64| {
            let c = centerline(t, &p);
            (0..3).map(|i| (q[i] - c[i]).powi(2)).sum::<f64>()
        };
        let steps = (p.t_max() / 1e-4) as usize;
        let oracle = (0..=steps)
            .map(|i| i as f64 * 1e-4)
            .fold((0.0, f64::INFINITY), |b, t| if d2(t) < b.1 { (t, d2(t)) } else { b })
            .0;
        let t = project_to_centerline(q, &p);
        assert!((t - t0).abs() < 0.02, "t0 {t0} got {t}");
        assert!((t - oracle).abs() <= 1e-4, "oracle {oracle} got {t}");
        assert!(d2(t) <= d2(oracle) + 1e-12);
    }
}

#[test]
fn model_split_agrees_with_truth() {
    let p = HelixParams {
        turns: 2.0,
        ..HelixParams::default()
    };
    assert!(p.tube_b < p.pitch / 4.0);
    for s in 0..10 {
        let c = scan_flexible(&p, 2000, 0.0, s).unwrap();
        let mut model = vec![usize::MAX; c.len()];
        for (turn, idx) in turn_split(&c, &p, SplitMethod::Model).unwrap() {
            for i in idx {
                model[i] = turn;
            }
        }
        let agree = c
            .points
            .iter()
            .zip(&model)
            .filter(|(q, &m)| q.truth.unwrap().turn as usize == m)
            .count();
        assert!(agree as f64 >= 0.99 * c.len() as f64, "seed {s}: {agree}/{}", c.len());
    }
}

#[test]
fn random_labels_are_never_vertical() {
    let p = HelixParams::default();
    for s in 0..100 {
        let c = scan_flexible(&p, 3600, 0.1, s).unwrap();
        let mut rng = seed::rng(1000 + s);
        let labels = (0..c.len()).map(|_| rng.gen_range(0..20)).collect();
        let r = verticality_report(&with_labels(c, labels, 20), 1.5).unwrap();
        assert!(!r.vertical, "seed {s}");
    }
}

#[test]
fn pairwise_cost_matches_double_loop() {
    let mut rng = seed::rng(4);
    for _ in 0..50 {
        let (n, d, k) = (rng.gen_range(1..60), rng.gen_range(1..4), rng.gen_range(1..6));
        let x = Array2::from_shape_fn((n, d), |_| rng.gen_range(-100.0f64..100.0));
        let centers = Array2::from_shape_fn((k, d), |_| rng.gen_range(-100.0f64..100.0));
        let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
        let mut want = 0.0;
        for i in 0..n {
            let mut s = 0.0f64;
            for c in 0..d {
                s += (x[[i, c]] - centers[[labels[i], c]]).powi(2);
            }
            want += s.sqrt();
        }
        let got = pairwise_cost(&labels, centers.view(), x.view()).unwrap();
        assert!((got - want).abs() <= 1e-9 * want.max(1.0));
    }
    let x = Array2::zeros((2, 2));
    let centers = Array2::zeros((1, 2));
    assert!(pairwise_cost(&[0, 1], centers.view(), x.view()).is_err());
}

#[test]
fn medoids_are_input_points_and_labels_are_a_fixpoint() {
    let c = scan_flexible(&HelixParams::default(), 600, 0.1, 12).unwrap();
    let x = project_xy(&c, &(0..c.len()).collect::<Vec<_>>());
    let r = kmedoids_fit(x.view(), &KMedoidsConfig::new(18, 2)).unwrap();
    for m in r.centers.rows() {
        assert!(x.rows().into_iter().any(|row| row == m));
    }
    assert_eq!(kmedoids_assign(r.centers.view(), x.view()), r.labels);
    let recomputed = pairwise_cost(&r.labels, r.centers.view(), x.view()).unwrap();
    assert!((recomputed - r.cost).abs() <= 1e-9 * r.cost);
}

#[test]
fn turnwise_kmedoids_fills_72_clusters() {
    let p = HelixParams::default();
    let c = scan_flexible(&p, 3600, 0.1, 77).unwrap();
    let lc = vertical_cluster(&c, &p, Algo::Kmedoids, 72, &FitConfig::with_seed(1), SplitMethod::Model).unwrap();
    let r = verticality_report(&lc, 1.5).unwrap();
    assert_eq!(r.nonempty, 72);
    assert!(r.mean_span() < 1.5 * TAU / 72.0);
}

#[test]
fn som_ring_follows_a_circle() {
    for s in 0..10 {
        let mut rng = seed::rng(500 + s);
        let mut x = Array2::zeros((2000, 2));
        for mut row in x.rows_mut() {
            let a = rng.gen_range(0.0..TAU);
            row[0] = 10.0 * a.cos();
            row[1] = 10.0 * a.sin();
        }
        let r = som_fit(x.view(), &SomConfig::new(Topology::Ring { nodes: 24 }, s)).unwrap();
        let inside = r
            .centers
            .rows()
            .into_iter()
            .filter(|w| (8.0..=11.0).contains(&w[0].hypot(w[1])))
            .count();
        assert!(inside >= 22, "seed {s}: {inside}/24");
    }
}

#[test]
fn threshold_search_is_reproducible() {
    let mut s = Scenario::standard(Algo::Kmedoids, FeatureSet::Xy, 21);
    s.scan = ScanSpec::Flexible { points: 500 };
    let a = threshold_search(&s, &[4, 8, 12], 3, 0.6, 1.5).unwrap();
    let b = threshold_search(&s, &[4, 8, 12], 3, 0.6, 1.5).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

fn span_oracle(a: &[f64]) -> f64 {
    a.iter()
        .map(|&s| a.iter().map(|&x| (x - s).rem_euclid(TAU)).fold(0.0, f64::max))
        .fold(f64::INFINITY, f64::min)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn span_is_rotation_invariant(
        a in prop::collection::vec(0.0..TAU, 1..30),
        theta in -50.0..50.0f64,
    ) {
        let s = circular_span(&a).unwrap();
        let r: Vec<f64> = a.iter().map(|x| x + theta).collect();
        prop_assert!((circular_span(&r).unwrap() - s).abs() <= 1e-9);
        prop_assert_eq!(s, span_oracle(&a));
        prop_assert!((0.0..TAU).contains(&s));
    }

    #[test]
    fn cost_is_translation_invariant(
        pts in prop::collection::vec((-50.0..50.0f64, -50.0..50.0f64), 2..40),
        shift in (-1e3..1e3f64, -1e3..1e3f64),
        k in 1usize..4,
    ) {
        let n = pts.len();
        let k = k.min(n);
        let x = Array2::from_shape_fn((n, 2), |(i, c)| if c == 0 { pts[i].0 } else { pts[i].1 });
        let moved = Array2::from_shape_fn((n, 2), |(i, c)| x[[i, c]] + if c == 0 { shift.0 } else { shift.1 });
        let r = kmedoids_fit(x.view(), &KMedoidsConfig::new(k, 0)).unwrap();
        let mut centers = r.centers.clone();
        for mut row in centers.rows_mut() {
            row[0] += shift.0;
            row[1] += shift.1;
        }
        let c = pairwise_cost(&r.labels, centers.view(), moved.view()).unwrap();
        prop_assert!((c - r.cost).abs() <= 1e-9 * r.cost.max(1.0));
    }

    #[test]
    fn verdict_ignores_relabeling(seed_val in 0u64..1000, k in 2usize..12) {
        let c = scan_flexible(&HelixParams::default(), 300, 0.1, seed_val).unwrap();
        let mut rng = seed::rng(seed_val);
        let labels: Vec<usize> = (0..c.len()).map(|i| i * k / c.len()).collect();
        let mut perm: Vec<usize> = (0..k).collect();
        perm.shuffle(&mut rng);
        let a = verticality_report(&with_labels(c.clone(), labels.clone(), k), 1.5).unwrap();
        let b = verticality_report(&with_labels(c, labels.iter().map(|&l| perm[l]).collect(), k), 1.5).unwrap();
        prop_assert_eq!(a.vertical, b.vertical);
        prop_assert_eq!(a.max_span, b.max_span);
        prop_assert!((a.purity - b.purity).abs() < 1e-15);
        prop_assert!((0.0..=1.0).contains(&a.purity));
    }

    #[test]
    fn merge_preserves_label_counts(seed_val in 0u64..500, k in 1usize..8, turns in 1usize..4) {
        let p = HelixParams { turns: turns as f64, ..HelixParams::default() };
        let c = scan_flexible(&p, 120 * turns, 0.05, seed_val).unwrap();
        let cfg = FitConfig { epochs: 5, ..FitConfig::with_seed(seed_val) };
        let lc = vertical_cluster(&c, &p, Algo::Som, k, &cfg, SplitMethod::Truth).unwrap();
        prop_assert_eq!(lc.labels.len(), c.len());
        for (turn, idx) in turn_split(&c, &p, SplitMethod::Truth).unwrap() {
            let fit = lc.fits.iter().find(|f| f.turn == turn).unwrap();
            let mut hist = vec![0; k];
            for &i in &idx {
                prop_assert_eq!(lc.turn_of(lc.labels[i]), turn);
                hist[lc.labels[i] % k] += 1;
            }
            prop_assert_eq!(&hist, &fit.sizes);
        }
    }

    #[test]
    fn csv_round_trip(seed_val in 0u64..1000, n in 1usize..50, noise in 0.0..1.0f64) {
        let c = scan_flexible(&HelixParams::default(), n, noise, seed_val).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        write_cloud(&path, &c).unwrap();
        let back = read_csv(&path, ReadOptions::default()).unwrap();
        prop_assert_eq!(&back.cloud.points, &c.points);
        let again = dir.path().join("d.csv");
        write_cloud(&again, &back.cloud).unwrap();
        prop_assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&again).unwrap());
    }
}
