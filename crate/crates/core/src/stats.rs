//! Two-sample t-tests for comparing planners.

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Variance {
    /// Student's test with a pooled variance estimate.
    #[default]
    Pooled,
    /// Welch's test with Satterthwaite degrees of freedom.
    Welch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub p: f64,
    pub df: f64,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum StatsError {
    #[error("each sample needs at least 2 values (got {0} and {1})")]
    TooFew(usize, usize),
    #[error("samples must be finite")]
    NonFinite,
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Two-sided p-value of Student's t with `df` degrees of freedom.
pub fn student_t_two_sided(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    beta_reg(df / 2.0, 0.5, df / (df + t * t)).clamp(0.0, 1.0)
}

/// Independent-samples t-test of `a` against `b` (t > 0 when `a` has the larger mean).
///
/// Zero variance in both samples gives `t = 0, p = 1` for equal means and
/// `t = ±inf, p = 0` otherwise.
pub fn t_test_independent(a: &[f64], b: &[f64], variance: Variance) -> Result<TTest, StatsError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(StatsError::TooFew(a.len(), b.len()));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (se2, df) = match variance {
        Variance::Pooled => {
            let df = na + nb - 2.0;
            let pooled = ((na - 1.0) * va + (nb - 1.0) * vb) / df;
            (pooled * (1.0 / na + 1.0 / nb), df)
        }
        Variance::Welch => {
            let (sa, sb) = (va / na, vb / nb);
            let se2 = sa + sb;
            let denom = sa * sa / (na - 1.0) + sb * sb / (nb - 1.0);
            let df = if denom > 0.0 { se2 * se2 / denom } else { na + nb - 2.0 };
            (se2, df)
        }
    };
    let diff = ma - mb;
    if se2 == 0.0 {
        return Ok(if diff == 0.0 {
            TTest { t: 0.0, p: 1.0, df }
        } else {
            TTest { t: diff.signum() * f64::INFINITY, p: 0.0, df }
        });
    }
    let t = diff / se2.sqrt();
    Ok(TTest { t, p: student_t_two_sided(t, df), df })
}

/// Four significant digits, as in the result tables.
pub fn format_p(p: f64) -> String {
    if p == 0.0 || !p.is_finite() {
        return format!("{p}");
    }
    let digits = (3 - p.abs().log10().floor() as i32).max(0) as usize;
    if digits > 8 {
        format!("{p:.3e}")
    } else {
        format!("{p:.digits$}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn textbook_pooled_example() {
        // means 3 and 4, both variances 2.5, pooled se = 1, df = 8
        let r = t_test_independent(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 3.0, 4.0, 5.0, 6.0], Variance::Pooled).unwrap();
        assert_abs_diff_eq!(r.t, -1.0, epsilon = 1e-12);
        assert_eq!(r.df, 8.0);
        assert_abs_diff_eq!(r.p, 0.346_593_507, epsilon = 1e-6);
        assert_eq!(format_p(r.p), "0.3466");
    }

    #[test]
    fn identical_samples() {
        let x = [0.3, 0.9, 1.4];
        let r = t_test_independent(&x, &x, Variance::Pooled).unwrap();
        assert_eq!((r.t, r.p), (0.0, 1.0));
    }

    #[test]
    fn constant_samples() {
        let r = t_test_independent(&[1.0, 1.0], &[1.0, 1.0, 1.0], Variance::Pooled).unwrap();
        assert_eq!((r.t, r.p), (0.0, 1.0));
        let r = t_test_independent(&[2.0, 2.0], &[1.0, 1.0], Variance::Welch).unwrap();
        assert_eq!((r.t, r.p), (f64::INFINITY, 0.0));
    }

    #[test]
    fn welch_matches_pooled_for_balanced_equal_variance() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let b = [2.0, 3.0, 4.0, 5.0, 6.0];
        let w = t_test_independent(&a, &b, Variance::Welch).unwrap();
        assert_abs_diff_eq!(w.t, -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(w.df, 8.0, epsilon = 1e-12);
    }

    #[test]
    fn welch_unequal_variances() {
        // hand computation: se^2 = 0.5/3 + 32/4, df from Satterthwaite
        let a = [1.0, 2.0, 1.5];
        let b = [10.0, 2.0, 6.0, 14.0];
        let r = t_test_independent(&a, &b, Variance::Welch).unwrap();
        let (sa, sb) = (0.25 / 3.0, (1.0f64 + 49.0 + 9.0 + 49.0 - 0.0) / 3.0 / 4.0);
        let _ = sb;
        let vb = [10.0f64, 2.0, 6.0, 14.0].iter().map(|x| (x - 8.0f64).powi(2)).sum::<f64>() / 3.0;
        let se2 = sa + vb / 4.0;
        assert_abs_diff_eq!(r.t, (1.5 - 8.0) / se2.sqrt(), epsilon = 1e-12);
        let df = se2 * se2 / (sa * sa / 2.0 + (vb / 4.0).powi(2) / 3.0);
        assert_abs_diff_eq!(r.df, df, epsilon = 1e-9);
    }

    #[test]
    fn p_value_against_known_quantiles() {
        // t_{0.975, 10} = 2.228138852
        assert_abs_diff_eq!(student_t_two_sided(2.228_138_852, 10.0), 0.05, epsilon = 1e-8);
        // t_{0.995, 3} = 5.840909309
        assert_abs_diff_eq!(student_t_two_sided(-5.840_909_309, 3.0), 0.01, epsilon = 1e-8);
    }

    #[test]
    fn rejects_small_or_bad_samples() {
        assert_eq!(t_test_independent(&[1.0], &[1.0, 2.0], Variance::Pooled), Err(StatsError::TooFew(1, 2)));
        assert_eq!(t_test_independent(&[1.0, f64::NAN], &[1.0, 2.0], Variance::Pooled), Err(StatsError::NonFinite));
    }

    #[test]
    fn p_formatting() {
        assert_eq!(format_p(0.049_871_2), "0.04987");
        assert_eq!(format_p(1.0), "1.000");
        assert_eq!(format_p(0.000_123_456), "0.0001235");
    }
}
