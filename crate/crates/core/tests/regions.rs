mod common;

use geomed::regions::{contains, ellipsoid, hyperrectangle, principal_axes, CredibleRegion};
use geomed::DataMatrix;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn correlated_draws(n: usize, k: usize, seed: u64) -> DataMatrix {
    let z = common::normal_data(n, k, seed);
    let mut a = DMatrix::<f64>::identity(k, k);
    for i in 0..k {
        for j in 0..i {
            a[(i, j)] = 0.3 * (i + j) as f64 / k as f64;
        }
        a[(i, i)] = 1.0 + i as f64;
    }
    z.affine_map(&a, &vec![0.5; k]).unwrap()
}

proptest! {
    #![proptest_config(common::config(40))]

    #[test]
    fn axes_are_orthonormal_and_rebuild_the_shape(seed in 0u64..1000, k in 2usize..=5) {
        let e = ellipsoid(&correlated_draws(200, k, seed), 0.95).unwrap();
        let ax = principal_axes(&e).unwrap();
        let mut rebuilt = DMatrix::<f64>::zeros(k, k);
        for (i, v) in ax.axes.iter().enumerate() {
            for (j, w) in ax.axes.iter().enumerate() {
                let dot: f64 = v.iter().zip(w).map(|(a, b)| a * b).sum();
                let delta = if i == j { 1.0 } else { 0.0 };
                prop_assert!((dot - delta).abs() < 1e-10);
            }
            let first = v.iter().find(|x| **x != 0.0).unwrap();
            prop_assert!(*first >= 0.0);
            let col = nalgebra::DVector::from_column_slice(v);
            rebuilt += &col * col.transpose() * ax.eigenvalues[i];
        }
        prop_assert!((&rebuilt - &e.shape).norm() < 1e-8);
        prop_assert!(ax.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn inside_count_matches_level(seed in 0u64..1000, n in 50usize..400) {
        let d = correlated_draws(n, 3, seed);
        let e = ellipsoid(&d, 0.95).unwrap();
        let inside = d.rows().filter(|r| e.mahalanobis(r).unwrap() <= e.radius).count() as i64;
        let target = (0.95 * n as f64).ceil() as i64;
        prop_assert!((inside - target).abs() <= 1, "{inside} vs {target}");
        prop_assert!(contains(&CredibleRegion::Ellipsoid(e.clone()), &e.center).unwrap());
    }

    #[test]
    fn translation_moves_regions(seed in 0u64..1000, b in prop::collection::vec(-10.0f64..10.0, 3)) {
        let d = correlated_draws(100, 3, seed);
        let db = d.affine_map(&DMatrix::identity(3, 3), &b).unwrap();
        let (h, hb) = (hyperrectangle(&d, 0.9).unwrap(), hyperrectangle(&db, 0.9).unwrap());
        let (e, eb) = (ellipsoid(&d, 0.9).unwrap(), ellipsoid(&db, 0.9).unwrap());
        for j in 0..3 {
            prop_assert!((hb.lo[j] - h.lo[j] - b[j]).abs() < 1e-10);
            prop_assert!((hb.hi[j] - h.hi[j] - b[j]).abs() < 1e-10);
            prop_assert!((eb.center[j] - e.center[j] - b[j]).abs() < 1e-10);
        }
        prop_assert!((eb.radius - e.radius).abs() < 1e-10 * e.radius);
        prop_assert!((&eb.shape - &e.shape).norm() < 1e-10 * e.shape.norm());
    }

    #[test]
    fn linear_maps_preserve_ellipsoid_membership(seed in 0u64..1000, entries in prop::collection::vec(-1.0f64..1.0, 4)) {
        let d = correlated_draws(150, 2, seed);
        let a = DMatrix::from_row_slice(2, 2, &entries) + DMatrix::identity(2, 2) * 2.5;
        let da = d.affine_map(&a, &[0.0, 0.0]).unwrap();
        let (e, ea) = (ellipsoid(&d, 0.95).unwrap(), ellipsoid(&da, 0.95).unwrap());
        prop_assert!((ea.radius - e.radius).abs() < 1e-10 * e.radius);
        for (r, ra) in d.rows().zip(da.rows()) {
            prop_assert!((e.mahalanobis(r).unwrap() - ea.mahalanobis(ra).unwrap()).abs() < 1e-10 * (1.0 + e.radius));
        }
    }
}

#[test]
fn box_marginals_hold_their_share() {
    let d = correlated_draws(1000, 3, 1);
    let b = hyperrectangle(&d, 0.95).unwrap();
    for j in 0..3 {
        let inside = d.column(j).iter().filter(|x| b.lo[j] <= **x && **x <= b.hi[j]).count();
        assert!(inside as f64 >= 0.95 * 1000.0 - 2.0);
    }
    assert!(contains(&CredibleRegion::Hyperrectangle(b.clone()), &b.lo).unwrap());
}

#[test]
fn singular_draw_covariance_is_rejected() {
    let d = DataMatrix::from_rows(&[[1.0, 2.0], [2.0, 4.0], [3.0, 6.0], [4.0, 8.0]]).unwrap();
    assert!(ellipsoid(&d, 0.95).is_err());
    let d = DataMatrix::from_rows(&[[1.0, 2.0], [2.0, 4.0]]).unwrap();
    assert!(ellipsoid(&d, 0.95).is_err());
}
