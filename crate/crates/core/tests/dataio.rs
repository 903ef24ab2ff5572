mod common;

use common::sim::{fsbsm, rng, start, white_noise};
use ivts_core::dataio::{
    annual_descriptives, cluster_complete_linkage, correlation_matrix, from_centre_logrange,
    read_panel, same_partition, to_centre_logrange, write_panel, InputFormat, IntervalPanel,
    LoadOptions, Location,
};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn locations(n: usize) -> Vec<Location> {
    (0..n)
        .map(|i| Location {
            id: format!("S{i}"),
            name: format!("Station {i}"),
            lat: 40.0 + i as f64 * 0.1,
            lon: -3.0,
        })
        .collect()
}

fn interval_panel(centre: &DMatrix<f64>, log_range: &DMatrix<f64>) -> IntervalPanel {
    let (lo, hi) = from_centre_logrange(centre, log_range).unwrap();
    IntervalPanel::new(
        locations(centre.ncols()),
        start().range(centre.nrows()),
        lo,
        hi,
    )
    .unwrap()
}

#[test]
fn transform_of_known_interval() {
    let p = IntervalPanel::new(
        locations(1),
        start().range(1),
        DMatrix::from_element(1, 1, 10.0),
        DMatrix::from_element(1, 1, 20.0),
    )
    .unwrap();
    let (c, r) = to_centre_logrange(&p).unwrap();
    assert_eq!(c.values()[(0, 0)], 15.0);
    assert_eq!(r.values()[(0, 0)], 10f64.ln());
}

#[test]
fn written_panel_reads_back_with_comments() {
    let mut r = rng(2);
    let c = DMatrix::from_fn(30, 3, |_, _| r.gen_range(-5.0..25.0));
    let l = DMatrix::from_fn(30, 3, |_, _| r.gen_range(1.0..3.0));
    let p = interval_panel(&c, &l);
    let mut buf = b"# generated\n".to_vec();
    write_panel(&mut buf, &p).unwrap();
    let back = read_panel(&buf[..], InputFormat::LongCsv, LoadOptions::default()).unwrap();
    assert_eq!(back, p);
}

#[test]
fn annual_differences_show_positive_drift() {
    let x = fsbsm([1.0, 1e-3, 0.0, 1e-4, 0.0], 1092, 8).panel.series(0);
    let drift = 0.0025;
    let x: Vec<f64> = x
        .iter()
        .enumerate()
        .map(|(t, v)| v + drift * t as f64)
        .collect();
    let a = annual_descriptives(&x).unwrap();
    assert!(a.moments.mean > 0.0, "mean {}", a.moments.mean);
    assert!(a.moments.mean < 0.1, "mean {}", a.moments.mean);
}

#[test]
fn independent_centre_and_log_range_are_uncorrelated() {
    let (n, reps) = (1092, 200);
    let mut r = rng(9);
    let small = (0..reps)
        .filter(|_| {
            let c = DMatrix::from_vec(n, 1, white_noise(&mut r, n)).map(|v| 15.0 + 3.0 * v);
            let l = DMatrix::from_vec(n, 1, white_noise(&mut r, n)).map(|v| 10f64.ln() + 0.1 * v);
            let (pc, pr) = to_centre_logrange(&interval_panel(&c, &l)).unwrap();
            correlation_matrix(&[&pc, &pr]).unwrap()[(0, 1)].abs() < 0.1
        })
        .count();
    assert!(small as f64 > 0.95 * reps as f64, "{small}/{reps}");
}

fn block_correlation(sizes: &[usize], rho: f64) -> (DMatrix<f64>, Vec<usize>) {
    let truth: Vec<usize> = sizes
        .iter()
        .enumerate()
        .flat_map(|(b, &m)| std::iter::repeat(b + 1).take(m))
        .collect();
    let n = truth.len();
    let c = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            1.0
        } else if truth[i] == truth[j] {
            rho
        } else {
            0.0
        }
    });
    (c, truth)
}

#[test]
fn planted_blocks_are_recovered_exactly() {
    let (c, truth) = block_correlation(&[4, 6, 5], 0.9);
    let a = cluster_complete_linkage(&c, 3).unwrap();
    assert!(same_partition(&a.labels, &truth));
    assert_eq!(a.heights.len(), truth.len() - 1);
}

fn random_correlation(seed: u64, n: usize) -> DMatrix<f64> {
    let mut r = rng(seed);
    let x: DMatrix<f64> = DMatrix::from_fn(n, n + 3, |_, _| r.gen_range(-1.0..1.0));
    let s = &x * x.transpose();
    DMatrix::from_fn(n, n, |i, j| s[(i, j)] / (s[(i, i)] * s[(j, j)]).sqrt())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn centre_log_range_round_trip(lo in -40f64..40.0, width in 1e-3f64..40.0) {
        let p = IntervalPanel::new(
            locations(1),
            start().range(1),
            DMatrix::from_element(1, 1, lo),
            DMatrix::from_element(1, 1, lo + width),
        ).unwrap();
        let (c, r) = to_centre_logrange(&p).unwrap();
        let (lo2, hi2) = from_centre_logrange(c.values(), r.values()).unwrap();
        prop_assert!((lo2[(0, 0)] - lo).abs() < 1e-12);
        prop_assert!((hi2[(0, 0)] - (lo + width)).abs() < 1e-12);
        prop_assert!(hi2[(0, 0)] > lo2[(0, 0)]);
    }

    #[test]
    fn clusters_are_labelled_and_non_empty(seed in any::<u64>(), n in 2usize..14, k in 1usize..6) {
        let k = k.min(n);
        let a = cluster_complete_linkage(&random_correlation(seed, n), k).unwrap();
        prop_assert_eq!(a.labels.len(), n);
        for c in 1..=k {
            prop_assert!(a.labels.contains(&c));
        }
        prop_assert!(a.labels.iter().all(|&l| (1..=k).contains(&l)));
    }

    #[test]
    fn clustering_ignores_location_order(seed in any::<u64>(), n in 3usize..14, k in 1usize..6) {
        let k = k.min(n);
        let c = random_correlation(seed, n);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng(seed ^ 7));
        let cp = DMatrix::from_fn(n, n, |i, j| c[(perm[i], perm[j])]);
        let a = cluster_complete_linkage(&c, k).unwrap();
        let b = cluster_complete_linkage(&cp, k).unwrap();
        let mut back = vec![0; n];
        for (i, &p) in perm.iter().enumerate() {
            back[p] = b.labels[i];
        }
        prop_assert!(same_partition(&a.labels, &back));
    }
}
