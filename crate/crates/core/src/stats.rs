//! Two-sided t-tests and summary statistics.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("paired samples differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 observations per sample, got {0}")]
    TooFewSamples(usize),
    #[error("zero variance: the t statistic is undefined")]
    Degenerate,
    #[error("non-finite observation")]
    NonFinite,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    pub p_value: f64,
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance with the `n - 1` denominator.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Sample standard deviation; 0 for fewer than two observations.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        0.0
    } else {
        variance(xs).sqrt()
    }
}

fn two_sided(t: f64, df: f64) -> f64 {
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    (2.0 * dist.cdf(-t.abs())).min(1.0)
}

fn check(xs: &[f64]) -> Result<(), StatsError> {
    if xs.len() < 2 {
        return Err(StatsError::TooFewSamples(xs.len()));
    }
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    Ok(())
}

/// Dependent-samples t-test on the differences `a_i - b_i`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTest, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch(a.len(), b.len()));
    }
    check(a)?;
    check(b)?;
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let var = variance(&d);
    if var <= 0.0 {
        return Err(StatsError::Degenerate);
    }
    let n = d.len() as f64;
    let t = mean(&d) / (var / n).sqrt();
    let df = n - 1.0;
    Ok(TTest {
        t,
        df,
        p_value: two_sided(t, df),
    })
}

/// Unequal-variance t-test with Welch-Satterthwaite degrees of freedom.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<TTest, StatsError> {
    check(a)?;
    check(b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (va, vb) = (variance(a) / na, variance(b) / nb);
    let se2 = va + vb;
    if se2 <= 0.0 {
        return Err(StatsError::Degenerate);
    }
    let t = (mean(a) - mean(b)) / se2.sqrt();
    let df = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    Ok(TTest {
        t,
        df,
        p_value: two_sided(t, df),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values from scipy.stats.ttest_rel / ttest_ind(equal_var=False).
    const A: [f64; 5] = [12.1, 14.3, 11.8, 15.0, 13.2];
    const B: [f64; 5] = [11.0, 13.9, 12.2, 13.1, 12.0];
    const X: [f64; 6] = [19.1, 22.4, 17.8, 24.0, 20.5, 21.7];
    const Y: [f64; 7] = [15.2, 18.9, 25.1, 14.0, 16.3, 13.8, 17.7];

    #[test]
    fn paired_matches_reference() {
        let r = paired_t_test(&A, &B).unwrap();
        assert!((r.t - 2.1503146772063806).abs() < 1e-9);
        assert!((r.p_value - 0.09794701659469866).abs() < 1e-6);
        assert_eq!(r.df, 4.0);
        let s = paired_t_test(&B, &A).unwrap();
        assert!((s.p_value - r.p_value).abs() < 1e-15);
    }

    #[test]
    fn welch_matches_reference() {
        let r = welch_t_test(&X, &Y).unwrap();
        assert!((r.t - 2.0813512941545396).abs() < 1e-9);
        assert!((r.df - 9.788734995319805).abs() < 1e-9);
        assert!((r.p_value - 0.06464685459616654).abs() < 1e-6);
        let s = welch_t_test(&Y, &X).unwrap();
        assert!((s.p_value - r.p_value).abs() < 1e-15);
    }

    #[test]
    fn degenerate_inputs() {
        assert_eq!(paired_t_test(&A, &A), Err(StatsError::Degenerate));
        assert_eq!(paired_t_test(&A, &X[..4]), Err(StatsError::LengthMismatch(5, 4)));
        assert_eq!(welch_t_test(&[1.0], &X), Err(StatsError::TooFewSamples(1)));
        assert_eq!(welch_t_test(&[2.0, 2.0], &[2.0, 2.0]), Err(StatsError::Degenerate));
        assert_eq!(welch_t_test(&[2.0, f64::NAN], &X), Err(StatsError::NonFinite));
    }

    #[test]
    fn disjoint_samples_are_highly_significant() {
        let a: Vec<f64> = (0..30).map(|i| (i % 5) as f64 * 0.5 - 1.0).collect();
        let b: Vec<f64> = a.iter().map(|x| x + 100.0).collect();
        assert!(welch_t_test(&a, &b).unwrap().p_value < 1e-10);
    }

    #[test]
    fn std_dev_of_short_samples() {
        assert_eq!(std_dev(&[3.0]), 0.0);
        assert!((std_dev(&[1.0, 3.0]) - 2f64.sqrt()).abs() < 1e-12);
    }
}
