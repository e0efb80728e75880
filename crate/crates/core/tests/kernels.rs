mod common;

use hetgp::{chol_jitter, Points, SeKernel};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn spd(n: usize, entries: &[f64]) -> DMatrix<f64> {
    let b = DMatrix::from_column_slice(n, n, &entries[..n * n]);
    &b * b.transpose() + DMatrix::identity(n, n) * 0.1
}

proptest! {
    #[test]
    fn cholesky_reconstructs(n in 1usize..8, entries in prop::collection::vec(-2.0f64..2.0, 64)) {
        let a = spd(n, &entries);
        let f = chol_jitter(&a, 0.0).unwrap();
        let l = f.lower();
        let back = l * l.transpose();
        prop_assert!((&back - &a).amax() <= 1e-12 * a.amax());
        for i in 0..n {
            for j in (i + 1)..n {
                prop_assert_eq!(l[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn solves_and_densities_match_nalgebra(n in 1usize..7, entries in prop::collection::vec(-2.0f64..2.0, 49), b in prop::collection::vec(-3.0f64..3.0, 7)) {
        let a = spd(n, &entries);
        let b = DVector::from_column_slice(&b[..n]);
        let ours = chol_jitter(&a, 0.0).unwrap();
        let theirs = a.clone().cholesky().unwrap();
        let x = ours.solve(&b);
        prop_assert!((&x - theirs.solve(&b)).amax() <= 1e-9 * x.amax().max(1.0));
        let log_det = theirs.determinant().ln();
        prop_assert!((ours.log_det() - log_det).abs() <= 1e-10 * log_det.abs().max(1.0));
        let zero = DVector::zeros(n);
        let want = -0.5 * b.dot(&theirs.solve(&b)) - 0.5 * log_det
            - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
        prop_assert!((ours.log_normal_density(&b, &zero) - want).abs() <= 1e-9 * want.abs().max(1.0));
    }

    #[test]
    fn gram_is_symmetric_bounded_and_positive(
        coords in prop::collection::vec(-1.0f64..1.0, 2..16),
        amp in 0.1f64..10.0,
        p1 in 0.1f64..5.0,
        p2 in 0.1f64..5.0,
    ) {
        let n = coords.len() / 2;
        let x = Points::new(2, coords[..2 * n].to_vec()).unwrap();
        prop_assume!(x.find_duplicate().is_none());
        let k = SeKernel::new(amp, vec![p1, p2]).unwrap();
        let g = k.gram(&x).unwrap();
        prop_assert_eq!(&g, &g.transpose());
        for i in 0..n {
            prop_assert_eq!(g[(i, i)], amp);
            for j in 0..n {
                prop_assert!(g[(i, j)] > 0.0 && g[(i, j)] <= amp);
                let want = common::se(amp, &[p1, p2], x.point(i), x.point(j));
                prop_assert!((g[(i, j)] - want).abs() <= 1e-14 * amp);
            }
        }
        prop_assert!(chol_jitter(&g, 1e-8 * amp).is_ok());
    }
}

#[test]
fn squared_exponential_reference_values() {
    let k = SeKernel::new(407.0, vec![1.37, 5.55]).unwrap();
    assert_eq!(k.eval(&[0.3, -0.2], &[0.3, -0.2]).unwrap(), 407.0);
    let want = 407.0 * (-0.5 * (1.37 * 0.25 + 5.55 * 0.09_f64)).exp();
    let got = k.eval(&[0.5, 0.1], &[0.0, -0.2]).unwrap();
    assert!((got - want).abs() < 1e-12);
    assert!(k.eval(&[0.0], &[0.0, 1.0]).is_err());
}

#[test]
fn large_duplicate_search() {
    let n = 50_000;
    let mut data: Vec<f64> = (0..n).map(|i| i as f64 * 1e-3).collect();
    assert!(Points::new(1, data.clone()).unwrap().find_duplicate().is_none());
    data[40_000] = data[123];
    assert_eq!(Points::new(1, data).unwrap().find_duplicate(), Some((123, 40_000)));
}
