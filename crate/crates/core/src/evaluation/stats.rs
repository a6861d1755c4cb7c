//! Paired t-test; the tail probability comes from the regularised
//! incomplete beta function.
//!
//! Works in `f64` whatever scalar the harness ran in; p-values are reported,
//! not fed back into the pipeline.

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    /// Two-sided.
    pub p: f64,
    pub df: usize,
    pub mean_difference: f64,
}

/// Two-sided paired t-test of `a - b` against zero mean.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(Error::WidthMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::InvalidArgument("paired t-test needs at least two pairs".into()));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    if diffs.iter().all(|&d| d == diffs[0]) {
        return Err(Error::Degenerate(format!(
            "all {n} paired differences equal {}; t is undefined",
            diffs[0]
        )));
    }
    let nf = n as f64;
    let mean = diffs.iter().sum::<f64>() / nf;
    let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (nf - 1.0);
    let t = mean / (var.sqrt() / nf.sqrt());
    let df = n - 1;
    Ok(TTest {
        t,
        p: student_t_two_sided_p(t, df as f64),
        df,
        mean_difference: mean,
    })
}

/// `P(|T| >= |t|)` for Student's t with `df` degrees of freedom.
pub fn student_t_two_sided_p(t: f64, df: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    if t.is_infinite() {
        return 0.0;
    }
    let x = df / (df + t * t);
    beta_reg(df / 2.0, 0.5, x).clamp(0.0, 1.0)
}

pub fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.iter().sum::<f64>() / v.len() as f64
}
