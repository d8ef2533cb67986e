#![allow(clippy::excessive_precision)]

use multidiscrete::gaussian::{bvn_cdf, dichotomize, mvn_sample, nearest_pd, solve_tetrachoric, std_normal_cdf, std_normal_quantile};
use multidiscrete::stats::pearson;
use multidiscrete::{ep_binary_bounds, CorrelationMatrix, Error, RngStream};
use proptest::prelude::*;

// Reference values from 50-digit quadrature.
const BVN_REFERENCE: [(f64, f64, f64, f64); 10] = [
    (0.3, -0.4, 0.2, 0.2408080150976448476),
    (-1.2, 0.7, -0.6, 0.041014421748693167539),
    (1.5, 1.1, 0.8, 0.84736210508156816043),
    (-0.5, -0.5, -0.95, 0.000027161656372142612529),
    (0.84, -0.84, -0.95, 0.035410190311151191771),
    (-2.0, -1.5, 0.99, 0.022749515662487262648),
    (1.0, 2.0, 0.93, 0.8412896494064768673),
    (-0.25, 0.6, -0.99, 0.12715238790984527718),
    (-3.0, -3.0, 0.5, 0.000081889661832192112167),
    (2.5, -1.0, 0.95, 0.15865525393145705141),
];

#[test]
fn bvn_matches_reference() {
    for (x, y, rho, want) in BVN_REFERENCE {
        let got = bvn_cdf(x, y, rho).unwrap();
        assert!((got - want).abs() < 1e-12, "bvn({x}, {y}, {rho}) = {got}, want {want}");
    }
}

#[test]
fn bvn_special_cases() {
    assert!((bvn_cdf(0.0, 0.0, 0.0).unwrap() - 0.25).abs() < 1e-15);
    for rho in [-0.7f64, 0.0, 0.4, 0.9] {
        let want = 0.25 + rho.asin() / (2.0 * std::f64::consts::PI);
        assert!((bvn_cdf(0.0, 0.0, rho).unwrap() - want).abs() < 1e-13);
    }
    let (x, y) = (0.3, -1.1);
    assert!((bvn_cdf(x, y, 0.0).unwrap() - std_normal_cdf(x) * std_normal_cdf(y)).abs() < 1e-14);
    assert!((bvn_cdf(x, y, 1.0).unwrap() - std_normal_cdf(y)).abs() < 1e-14);
    assert!((bvn_cdf(x, y, -1.0).unwrap() - (std_normal_cdf(x) + std_normal_cdf(y) - 1.0).max(0.0)).abs() < 1e-14);
    assert!(bvn_cdf(0.0, 0.0, 1.5).is_err());
}

#[test]
fn quantile_matches_reference() {
    for (p, want) in [
        (0.975, 1.9599639845400542355),
        (0.0013499, -2.9999995558583211423),
        (1e-10, -6.3613409024040562047),
        (0.3, -0.52440051270804078404),
        (0.999999, 4.7534243088228989482),
    ] {
        // the decimal inputs are not exact doubles; near 1 that alone moves x by ~1e-12
        let got = std_normal_quantile(p).unwrap();
        assert!((got - want).abs() < 1e-11, "quantile({p}) = {got}");
    }
}

#[test]
fn tetrachoric_matches_reference() {
    for (pj, pk, d, want) in [
        (0.3, 0.7, 0.2, 0.362853071412199),
        (0.2, 0.2, -0.2, -0.509929767091011),
        (0.4545, 0.5017, 0.6, 0.812229893062981),
    ] {
        let got = solve_tetrachoric(pj, pk, d).unwrap();
        assert!((got - want).abs() < 1e-10, "tetrachoric({pj}, {pk}, {d}) = {got}");
    }
}

#[test]
fn tetrachoric_examples() {
    assert_eq!(solve_tetrachoric(0.5, 0.5, 0.0).unwrap().abs(), 0.0);
    let r = solve_tetrachoric(0.5, 0.5, 0.5).unwrap();
    assert!((r - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-9);
    let (_, hi) = ep_binary_bounds(0.3, 0.7).unwrap();
    assert!(solve_tetrachoric(0.3, 0.7, hi).unwrap() > 0.98);
    assert!(solve_tetrachoric(0.8, 0.35, 0.4).is_err());
}

#[test]
fn tetrachoric_round_trip_grid() {
    for pj in [0.2, 0.5, 0.8] {
        for pk in [0.2, 0.5, 0.8] {
            let (zj, zk) = (std_normal_quantile(pj).unwrap(), std_normal_quantile(pk).unwrap());
            let sd = (pj * (1.0 - pj) * pk * (1.0 - pk)).sqrt();
            for step in 0..=38 {
                let rho = -0.95 + 0.05 * step as f64;
                let delta = (bvn_cdf(zj, zk, rho).unwrap() - pj * pk) / sd;
                let back = solve_tetrachoric(pj, pk, delta).unwrap();
                assert!((back - rho).abs() < 1e-6, "p = ({pj}, {pk}), rho {rho}: got {back}");
            }
        }
    }
}

#[test]
fn nearest_pd_leaves_valid_matrices() {
    let id = CorrelationMatrix::identity(4);
    let r = nearest_pd(&id).unwrap();
    assert!(!r.was_repaired);
    assert_eq!(r.repaired, id);
    let exch = CorrelationMatrix::from_upper_triangle(5, &[0.5; 10]).unwrap();
    let r = nearest_pd(&exch).unwrap();
    assert!(!r.was_repaired && r.repaired == exch);
}

#[test]
fn nearest_pd_matches_reference() {
    // Higham's iteration run to machine precision converges to +-0.5.
    let m = CorrelationMatrix::from_upper_triangle(3, &[0.9, 0.9, -0.9]).unwrap();
    assert!(m.min_eigenvalue() < -0.79);
    let r = nearest_pd(&m).unwrap();
    assert!(r.was_repaired);
    assert!(r.min_eigenvalue_after >= 0.0);
    let want = [[1.0, 0.5, 0.5], [0.5, 1.0, -0.5], [0.5, -0.5, 1.0]];
    for (i, row) in want.iter().enumerate() {
        assert_eq!(r.repaired.get(i, i), 1.0);
        for (j, &w) in row.iter().enumerate() {
            assert!((r.repaired.get(i, j) - w).abs() < 1e-5);
            assert_eq!(r.repaired.get(i, j), r.repaired.get(j, i));
        }
    }
}

#[test]
fn mvn_sample_correlations() {
    let n = 1_000_000;
    let id = CorrelationMatrix::identity(3);
    let z = mvn_sample(&id, n, &mut RngStream::new(11)).unwrap();
    for (a, b) in id.pairs() {
        let r = pearson(z.column(a).as_slice(), z.column(b).as_slice()).unwrap();
        assert!(r.abs() <= 0.005, "identity pair ({a}, {b}): {r}");
    }
    let exch = CorrelationMatrix::from_upper_triangle(5, &[0.5; 10]).unwrap();
    let z = mvn_sample(&exch, n, &mut RngStream::new(12)).unwrap();
    for (a, b) in exch.pairs() {
        let r = pearson(z.column(a).as_slice(), z.column(b).as_slice()).unwrap();
        assert!((r - 0.5).abs() <= 0.005, "pair ({a}, {b}): {r}");
    }
    let mean = z.column(0).mean();
    assert!(mean.abs() < 0.005);
    assert!(mvn_sample(&id, 0, &mut RngStream::new(1)).is_err());
}

#[test]
fn dichotomize_means_and_threshold() {
    let n = 1_000_000;
    let p = [0.4545, 0.7168, 0.5017];
    let z = mvn_sample(&CorrelationMatrix::identity(3), n, &mut RngStream::new(3)).unwrap();
    let y = dichotomize(&z, &p).unwrap();
    for (j, &pj) in p.iter().enumerate() {
        let mean = y.column(j).iter().map(|&v| v as f64).sum::<f64>() / n as f64;
        assert!((mean - pj).abs() <= 0.005, "column {j}: {mean}");
    }
    let t = std_normal_quantile(0.3).unwrap();
    let at = nalgebra::DMatrix::from_row_slice(1, 1, &[t]);
    assert_eq!(dichotomize(&at, &[0.3]).unwrap()[(0, 0)], 1);
    assert!(matches!(dichotomize(&at, &[0.3, 0.4]), Err(Error::Dimension(_))));
}

#[test]
fn dichotomized_pair_correlation() {
    let n = 1_000_000;
    let rho = 0.6;
    let sigma = CorrelationMatrix::from_upper_triangle(2, &[rho]).unwrap();
    let z = mvn_sample(&sigma, n, &mut RngStream::new(21)).unwrap();
    let y = dichotomize(&z, &[0.5, 0.5]).unwrap();
    let r = pearson(y.column(0).as_slice(), y.column(1).as_slice()).unwrap();
    let want = 4.0 * bvn_cdf(0.0, 0.0, rho).unwrap() - 1.0;
    assert!((r - want).abs() < 3.0 / (n as f64).sqrt(), "{r} vs {want}");
}

proptest! {
    #[test]
    fn bvn_is_symmetric(x in -4.0f64..4.0, y in -4.0f64..4.0, rho in -0.999f64..0.999) {
        let a = bvn_cdf(x, y, rho).unwrap();
        let b = bvn_cdf(y, x, rho).unwrap();
        prop_assert!((a - b).abs() < 1e-14);
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn quantile_inverts_cdf(p in 1e-12f64..(1.0 - 1e-12)) {
        let x = std_normal_quantile(p).unwrap();
        prop_assert!((std_normal_cdf(x) - p).abs() <= 1e-13 * p.max(1e-3));
    }

    #[test]
    fn tetrachoric_is_increasing(pj in 0.05f64..0.95, pk in 0.05f64..0.95, u in 0.02f64..0.97, gap in 0.005f64..0.02) {
        let (lo, hi) = ep_binary_bounds(pj, pk).unwrap();
        let d1 = lo + u * (hi - lo);
        let d2 = (d1 + gap * (hi - lo)).min(hi - 1e-3 * (hi - lo));
        prop_assume!(d2 > d1);
        let r1 = solve_tetrachoric(pj, pk, d1).unwrap();
        let r2 = solve_tetrachoric(pj, pk, d2).unwrap();
        prop_assert!(r2 > r1, "delta {d1} -> {r1}, {d2} -> {r2}");
    }

    #[test]
    fn repair_is_idempotent(a in -0.99f64..0.99, b in -0.99f64..0.99, c in -0.99f64..0.99) {
        let m = CorrelationMatrix::from_upper_triangle(3, &[a, b, c]).unwrap();
        let once = nearest_pd(&m).unwrap().repaired;
        let twice = nearest_pd(&once).unwrap().repaired;
        for i in 0..3 {
            prop_assert_eq!(once.get(i, i), 1.0);
            for j in 0..3 {
                prop_assert_eq!(once.get(i, j), once.get(j, i));
                prop_assert!((once.get(i, j) - twice.get(i, j)).abs() < 1e-10);
            }
        }
        prop_assert!(once.min_eigenvalue() > 0.0);
    }
}
