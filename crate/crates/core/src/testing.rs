//! Finite-difference oracle shared by unit tests.

use crate::numerics::Matrix;

/// Central differences of `f` at `x`, one coordinate at a time.
pub fn finite_difference(x: &Matrix, h: f64, f: impl Fn(&Matrix) -> f64) -> Matrix {
    let mut grad = Matrix::zeros(x.rows(), x.cols());
    let mut probe = x.clone();
    for k in 0..x.len() {
        let orig = probe.as_slice()[k];
        probe.as_mut_slice()[k] = orig + h;
        let up = f(&probe);
        probe.as_mut_slice()[k] = orig - h;
        let down = f(&probe);
        probe.as_mut_slice()[k] = orig;
        grad.as_mut_slice()[k] = (up - down) / (2.0 * h);
    }
    grad
}

/// `‖a - b‖ / max(‖a‖, ‖b‖, 1e-6)` in the Frobenius norm.
pub fn rel_error(a: &Matrix, b: &Matrix) -> f64 {
    let diff = a.zip_map(b, |x, y| x - y).expect("shapes agree");
    let n = |m: &Matrix| m.as_slice().iter().map(|v| v * v).sum::<f64>().sqrt();
    n(&diff) / n(a).max(n(b)).max(1e-6)
}
