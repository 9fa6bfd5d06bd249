//! Gradient-free primitives used by dictionary construction and evaluation.

use super::matrix::{dot, norm, Matrix};
use crate::error::{Error, Result};

/// Norms below this are treated as zero.
pub const ZERO_NORM: f64 = 1e-12;

/// `a·b / (‖a‖‖b‖)`.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::dims(a.len(), b.len()));
    }
    let (na, nb) = (norm(a), norm(b));
    if na < ZERO_NORM || nb < ZERO_NORM {
        return Err(Error::ZeroNorm { row: None });
    }
    Ok(dot(a, b) / (na * nb))
}

/// Column-wise mean over the rows of `m`.
pub fn mean_pool_rows(m: &Matrix) -> Result<Vec<f64>> {
    if m.rows() == 0 {
        return Err(Error::EmptyInput("mean over zero rows"));
    }
    let n = m.rows() as f64;
    Ok(m.column_sums()
        .into_vec()
        .into_iter()
        .map(|s| s / n)
        .collect())
}

/// Row-wise softmax with the row maximum subtracted before exponentiation.
pub fn softmax_rows(m: &Matrix) -> Matrix {
    let mut out = m.clone();
    for i in 0..out.rows() {
        softmax_in_place(out.row_mut(i));
    }
    out
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for x in row.iter_mut() {
        *x = (*x - max).exp();
        total += *x;
    }
    for x in row.iter_mut() {
        *x /= total;
    }
}

/// `log Σ exp(x)` computed around the maximum.
pub fn log_sum_exp(xs: impl IntoIterator<Item = f64> + Clone) -> f64 {
    let max = xs.clone().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.into_iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Scales every row of `m` to unit L2 norm.
pub fn l2_normalize_rows(m: &Matrix) -> Result<Matrix> {
    let mut out = m.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let n = norm(row);
        if n < ZERO_NORM {
            return Err(Error::ZeroNorm { row: Some(i) });
        }
        row.iter_mut().for_each(|x| *x /= n);
    }
    Ok(out)
}

/// Unit-norm copy of a single vector.
pub fn l2_normalize(v: &[f64]) -> Result<Vec<f64>> {
    let n = norm(v);
    if n < ZERO_NORM {
        return Err(Error::ZeroNorm { row: None });
    }
    Ok(v.iter().map(|x| x / n).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine_similarity(&[2.0, 0.0], &[1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let c = cosine_similarity(&[1.0, 1.0], &[1.0, 0.0]).unwrap();
        assert!(close(c, 0.7071067811865475, 1e-15));
    }

    #[test]
    fn cosine_errors() {
        assert!(matches!(
            cosine_similarity(&[0.0, 0.0], &[1.0, 0.0]),
            Err(Error::ZeroNorm { .. })
        ));
        assert!(matches!(
            cosine_similarity(&[1.0, 0.0], &[1.0e-13, 0.0]),
            Err(Error::ZeroNorm { .. })
        ));
        assert!(matches!(
            cosine_similarity(&[1.0], &[1.0, 0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn mean_pool_examples() {
        let m = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        assert_eq!(mean_pool_rows(&m).unwrap(), vec![2.0, 3.0]);
        let m = Matrix::from_rows(&[[5.0, 5.0]]).unwrap();
        assert_eq!(mean_pool_rows(&m).unwrap(), vec![5.0, 5.0]);
        let m = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]).unwrap();
        let p = mean_pool_rows(&m).unwrap();
        assert!(p.iter().all(|&x| close(x, 2.0 / 3.0, 1e-15)));
        assert!(matches!(
            mean_pool_rows(&Matrix::zeros(0, 3)),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn softmax_examples() {
        let s = softmax_rows(&Matrix::from_rows(&[[0.0, 0.0, 0.0]]).unwrap());
        assert!(s.as_slice().iter().all(|&x| close(x, 1.0 / 3.0, 1e-15)));
        for c in [-1e4, -3.0, 0.0, 7.5, 1e4] {
            assert_eq!(softmax_rows(&Matrix::scalar(c)).as_slice(), &[1.0]);
        }
        let s = softmax_rows(&Matrix::from_rows(&[[1.0, 0.0]]).unwrap());
        let e = std::f64::consts::E;
        assert!(close(s[(0, 0)], e / (e + 1.0), 1e-15));
        assert!(close(s[(0, 1)], 1.0 / (e + 1.0), 1e-15));
        assert!(close(s[(0, 0)], 0.7310585786, 1e-10));
        assert!(close(s[(0, 1)], 0.2689414214, 1e-10));
    }

    #[test]
    fn normalize_examples() {
        let n = l2_normalize_rows(&Matrix::from_rows(&[[3.0, 4.0]]).unwrap()).unwrap();
        assert!(close(n[(0, 0)], 0.6, 1e-15) && close(n[(0, 1)], 0.8, 1e-15));
        let n = l2_normalize_rows(&Matrix::from_rows(&[[1.0, 0.0]]).unwrap()).unwrap();
        assert_eq!(n.as_slice(), &[1.0, 0.0]);
        let n = l2_normalize_rows(&Matrix::filled(1, 4, 1.0)).unwrap();
        assert!(n.as_slice().iter().all(|&x| close(x, 0.5, 1e-15)));
        let bad = Matrix::from_rows(&[[1.0, 0.0], [0.0, 0.0]]).unwrap();
        assert!(matches!(
            l2_normalize_rows(&bad),
            Err(Error::ZeroNorm { row: Some(1) })
        ));
    }

    #[test]
    fn log_sum_exp_is_stable() {
        let v = log_sum_exp([1000.0, 1000.0]);
        assert!(close(v, 1000.0 + 2f64.ln(), 1e-12));
        let v = log_sum_exp([-1000.0, -1000.0]);
        assert!(close(v, -1000.0 + 2f64.ln(), 1e-12));
    }

    proptest! {
        #[test]
        fn softmax_rows_sum_to_one(rows in prop::collection::vec(
            prop::collection::vec(-1e4f64..1e4, 1..12), 1..6)) {
            let cols = rows[0].len();
            let rows: Vec<Vec<f64>> = rows.into_iter().map(|mut r| { r.resize(cols, 0.0); r }).collect();
            let s = softmax_rows(&Matrix::from_rows(&rows).unwrap());
            for r in s.iter_rows() {
                prop_assert!(r.iter().all(|&x| x >= 0.0));
                prop_assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }

        #[test]
        fn cosine_is_scale_invariant(
            a in prop::collection::vec(-10.0f64..10.0, 4),
            b in prop::collection::vec(-10.0f64..10.0, 4),
            alpha in 1e-3f64..1e3,
            beta in 1e-3f64..1e3,
        ) {
            prop_assume!(norm(&a) > 1e-3 && norm(&b) > 1e-3);
            let c = cosine_similarity(&a, &b).unwrap();
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&c));
            let sa: Vec<f64> = a.iter().map(|x| x * alpha).collect();
            let sb: Vec<f64> = b.iter().map(|x| x * beta).collect();
            prop_assert!((cosine_similarity(&sa, &sb).unwrap() - c).abs() < 1e-9);
        }

        #[test]
        fn mean_pool_commutes_with_row_permutation(
            rows in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 3), 1..8),
            seed in any::<u64>(),
        ) {
            let m = Matrix::from_rows(&rows).unwrap();
            let mut idx: Vec<usize> = (0..rows.len()).collect();
            let mut s = seed;
            for i in (1..idx.len()).rev() {
                let j = (crate::rng::splitmix64(&mut s) % (i as u64 + 1)) as usize;
                idx.swap(i, j);
            }
            let a = mean_pool_rows(&m).unwrap();
            let b = mean_pool_rows(&m.select_rows(&idx)).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn normalized_rows_are_unit(rows in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 5), 1..6)) {
            let m = Matrix::from_rows(&rows).unwrap();
            prop_assume!(m.iter_rows().all(|r| norm(r) > 1e-6));
            let n = l2_normalize_rows(&m).unwrap();
            for r in n.iter_rows() {
                prop_assert!((norm(r) - 1.0).abs() < 1e-9);
            }
        }
    }
}
