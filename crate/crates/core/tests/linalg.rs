//! Dense kernels checked against nalgebra on random matrices.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;
use ribodelay::linalg::{eigenvalues, least_squares, Lu, Matrix};

fn ours(rows: &[Vec<f64>]) -> Matrix {
    Matrix::from_rows(rows)
}

fn theirs(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    DMatrix::from_row_slice(rows.len(), rows[0].len(), &flat)
}

fn square(n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-5.0..5.0_f64, n), n)
}

fn sorted(mut v: Vec<Complex64>) -> Vec<Complex64> {
    v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    v
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn eigenvalues_match(rows in (2usize..9).prop_flat_map(square)) {
        let n = rows.len();
        let a = sorted(eigenvalues(&ours(&rows)).unwrap());
        let b: Vec<Complex64> = theirs(&rows).complex_eigenvalues().iter().copied().collect();
        // Match each reference value to its nearest computed one.
        for z in &b {
            let gap = a.iter().map(|w| (w - z).norm()).fold(f64::INFINITY, f64::min);
            prop_assert!(gap < 1e-8 * (1.0 + z.norm()), "{z} missing from {a:?}");
        }
        prop_assert_eq!(a.len(), n);
    }

    #[test]
    fn lu_solves_like_nalgebra(rows in square(6), b in prop::collection::vec(-5.0..5.0_f64, 6)) {
        let reference = theirs(&rows).lu().solve(&DVector::from_vec(b.clone()));
        prop_assume!(reference.is_some());
        let reference = reference.unwrap();
        prop_assume!(theirs(&rows).determinant().abs() > 1e-3);
        let x = Lu::factor(&ours(&rows)).unwrap().solve(&b);
        let scale = reference.amax().max(1.0);
        for (u, v) in x.iter().zip(reference.iter()) {
            prop_assert!((u - v).abs() < 1e-8 * scale);
        }
    }

    #[test]
    fn least_squares_matches_svd(
        rows in prop::collection::vec(prop::collection::vec(-5.0..5.0_f64, 4), 12),
        b in prop::collection::vec(-5.0..5.0_f64, 12),
    ) {
        let a = theirs(&rows);
        let svd = a.clone().svd(true, true);
        prop_assume!(svd.singular_values.min() > 1e-2);
        let reference = svd.solve(&DVector::from_vec(b.clone()), 1e-12).unwrap();
        let x = least_squares(&ours(&rows), &b).unwrap();
        for (u, v) in x.iter().zip(reference.iter()) {
            prop_assert!((u - v).abs() < 1e-9 * (1.0 + v.abs()));
        }
    }
}

#[test]
fn companion_matrix_roots() {
    // x^3 - 6x^2 + 11x - 6 = (x-1)(x-2)(x-3)
    let c = ours(&[vec![6.0, -11.0, 6.0], vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]);
    let ev = sorted(eigenvalues(&c).unwrap());
    for (z, want) in ev.iter().zip([1.0, 2.0, 3.0]) {
        assert!((z - want).norm() < 1e-12, "{z}");
    }
}

#[test]
fn rotation_gives_a_conjugate_pair() {
    let (s, c) = 0.3_f64.sin_cos();
    let ev = eigenvalues(&ours(&[vec![c, -s], vec![s, c]])).unwrap();
    assert_eq!(ev[0], ev[1].conj());
    assert!((ev[0].norm() - 1.0).abs() < 1e-14);
    assert!((ev[0].arg().abs() - 0.3).abs() < 1e-14);
}
