use crate::attribution::{check_inputs, coalition_values, ScalarTarget};
use crate::dataset::BackgroundSet;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const EXACT_MAX_ARITY: usize = 15;

/// Shapley values by enumerating all `2^M` coalitions.
///
/// `phi_j = sum_{S not containing j} |S|! (M-|S|-1)! / M! * (v(S+j) - v(S))`
pub fn exact_shapley<T: Scalar>(t: &dyn ScalarTarget<T>, x: &[T], bg: &BackgroundSet<T>) -> Result<Vec<T>> {
    check_inputs(t, x, bg)?;
    let m = x.len();
    if m > EXACT_MAX_ARITY {
        return Err(Error::ArityTooLarge {
            arity: m,
            max: EXACT_MAX_ARITY,
        });
    }
    if m == 0 {
        return Ok(Vec::new());
    }
    let n_sets = 1usize << m;
    let coalitions: Vec<Vec<bool>> = (0..n_sets)
        .map(|mask| (0..m).map(|j| mask >> j & 1 == 1).collect())
        .collect();
    let v = coalition_values(t, x, bg, &coalitions)?;

    // |S|!(M-|S|-1)!/M! for |S| = 0..M-1
    let mut fact = vec![1.0f64; m + 1];
    for i in 1..=m {
        fact[i] = fact[i - 1] * i as f64;
    }
    let weight: Vec<T> = (0..m).map(|s| T::lit(fact[s] * fact[m - s - 1] / fact[m])).collect();

    let mut phi = vec![T::zero(); m];
    for (j, p) in phi.iter_mut().enumerate() {
        let bit = 1usize << j;
        for mask in 0..n_sets {
            if mask & bit == 0 {
                let s = mask.count_ones() as usize;
                *p += weight[s] * (v[mask | bit] - v[mask]);
            }
        }
    }
    Ok(phi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attribution::FnTarget;
    use ndarray::array;

    fn bg(rows: ndarray::Array2<f64>) -> BackgroundSet<f64> {
        BackgroundSet::from_rows(rows).unwrap()
    }

    #[test]
    fn product_game() {
        let t = FnTarget::new(2, |x: &[f64]| x[0] * x[1]);
        let phi = exact_shapley(&t, &[1.0, 1.0], &bg(array![[0.0, 0.0]])).unwrap();
        assert_eq!(phi, vec![0.5, 0.5]);
    }

    #[test]
    fn efficiency_and_dummy() {
        let t = FnTarget::new(4, |x: &[f64]| x[0] * x[1] + (x[2] * 3.0).sin());
        let background = bg(array![[0.1, 0.5, 0.2, 0.9], [0.7, 0.3, 0.4, 0.0]]);
        let x = [0.9, 0.8, 0.3, 0.6];
        let phi = exact_shapley(&t, &x, &background).unwrap();
        let full = t.eval(&x).unwrap();
        let empty = background
            .rows
            .rows()
            .into_iter()
            .map(|r| t.eval(&r.to_vec()).unwrap())
            .sum::<f64>()
            / 2.0;
        assert!((phi.iter().sum::<f64>() - (full - empty)).abs() < 1e-12);
        assert_eq!(phi[3], 0.0);
    }

    #[test]
    fn arity_limit() {
        let t = FnTarget::new(16, |_: &[f64]| 0.0);
        let err = exact_shapley(&t, &[0.0; 16], &bg(ndarray::Array2::zeros((1, 16)))).unwrap_err();
        assert!(matches!(err, Error::ArityTooLarge { .. }));
    }
}
