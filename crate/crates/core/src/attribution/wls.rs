use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Minimises `sum_i w_i (y_i - design_i . beta)^2 + ridge * |beta|^2`
/// through the normal equations and a Cholesky factorisation.
pub fn weighted_least_squares<T: Scalar>(design: ArrayView2<'_, T>, y: &[T], w: &[T], ridge: T) -> Result<Array1<T>> {
    let (n, p) = design.dim();
    if y.len() != n {
        return Err(Error::WidthMismatch {
            expected: n,
            actual: y.len(),
        });
    }
    if w.len() != n {
        return Err(Error::WidthMismatch {
            expected: n,
            actual: w.len(),
        });
    }
    if let Some(bad) = w.iter().find(|&&wi| !(wi >= T::zero())) {
        return Err(Error::InvalidArgument(format!("negative or NaN weight {bad}")));
    }
    if ridge < T::zero() {
        return Err(Error::InvalidArgument("ridge must be non-negative".into()));
    }

    let mut weighted = design.to_owned();
    for (mut row, &wi) in weighted.rows_mut().into_iter().zip(w) {
        row *= wi;
    }
    let mut gram = weighted.t().dot(&design);
    for d in 0..p {
        gram[[d, d]] += ridge;
    }
    let rhs = weighted.t().dot(&Array1::from(y.to_vec()));
    cholesky_solve(gram, rhs, ridge)
}

fn cholesky_solve<T: Scalar>(a: Array2<T>, b: Array1<T>, ridge: T) -> Result<Array1<T>> {
    T::solve_spd(&a, &b).map_err(|condition| Error::NotPositiveDefinite {
        condition,
        ridge: ridge.as_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn exact_fit_square_system() {
        let x = array![[2.0f64, 1.0], [1.0, 3.0]];
        let beta = weighted_least_squares(x.view(), &[5.0, 10.0], &[1.0, 1.0], 0.0).unwrap();
        assert!((beta[0] - 1.0).abs() < 1e-12);
        assert!((beta[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn duplicated_rows_with_half_weight() {
        let x1 = array![[1.0, 0.0], [1.0, 1.0], [1.0, 2.0], [1.0, 4.0]];
        let y1 = [0.3, 1.1, 2.2, 3.6];
        let w1 = [1.0, 2.0, 1.0, 0.5];
        let x2 = array![
            [1.0, 0.0],
            [1.0, 1.0],
            [1.0, 2.0],
            [1.0, 4.0],
            [1.0, 0.0],
            [1.0, 1.0],
            [1.0, 2.0],
            [1.0, 4.0]
        ];
        let y2 = [0.3, 1.1, 2.2, 3.6, 0.3, 1.1, 2.2, 3.6];
        let w2: Vec<f64> = w1.iter().chain(w1.iter()).map(|w| w / 2.0).collect();
        let a = weighted_least_squares(x1.view(), &y1, &w1, 0.0).unwrap();
        let b = weighted_least_squares(x2.view(), &y2, &w2, 0.0).unwrap();
        for (u, v) in a.iter().zip(b.iter()) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_without_ridge() {
        let x = array![[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]];
        let err = weighted_least_squares(x.view(), &[1.0, 2.0, 3.0], &[1.0; 3], 0.0).unwrap_err();
        assert!(matches!(err, Error::NotPositiveDefinite { .. }));
        assert!(weighted_least_squares(x.view(), &[1.0, 2.0, 3.0], &[1.0; 3], 1e-6).is_ok());
    }

    #[test]
    fn rejects_bad_inputs() {
        let x = array![[1.0], [2.0]];
        assert!(weighted_least_squares(x.view(), &[1.0], &[1.0, 1.0], 0.0).is_err());
        assert!(weighted_least_squares(x.view(), &[1.0, 2.0], &[1.0], 0.0).is_err());
        assert!(weighted_least_squares(x.view(), &[1.0, 2.0], &[1.0, -1.0], 0.0).is_err());
    }
}
