//! Effect sizes and rank correlation.

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::StatsError;
use crate::ranks::midranks;
use crate::TestResult;

pub(crate) fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample variance with n − 1 denominator.
pub(crate) fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Standardized mean difference with the (n − 1)-weighted pooled SD.
pub fn cohen_d(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    if x.len() < 2 || y.len() < 2 {
        return Err(StatsError::InsufficientData(
            "each sample needs at least two observations".into(),
        ));
    }
    let (n1, n2) = (x.len() as f64, y.len() as f64);
    let pooled = ((n1 - 1.0) * variance(x) + (n2 - 1.0) * variance(y)) / (n1 + n2 - 2.0);
    if pooled <= 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    Ok((mean(x) - mean(y)) / pooled.sqrt())
}

/// Cohen's h: 2·asin(√p₁) − 2·asin(√p₂). Inputs are clamped to [0, 1].
pub fn cohen_h(p1: f64, p2: f64) -> f64 {
    let phi = |p: f64| 2.0 * p.clamp(0.0, 1.0).sqrt().asin();
    phi(p1) - phi(p2)
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    (sxx > 0.0 && syy > 0.0).then(|| (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman's ρ (Pearson correlation of midranks) with a two-sided p from
/// the t approximation on n − 2 degrees of freedom.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<TestResult, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::InvalidInput("samples differ in length".into()));
    }
    if x.len() < 3 {
        return Err(StatsError::InsufficientData("need at least 3 pairs".into()));
    }
    let rho = pearson(&midranks(x), &midranks(y)).ok_or(StatsError::ConstantInput)?;
    let df = x.len() as f64 - 2.0;
    let p = if rho.abs() >= 1.0 {
        0.0
    } else {
        let t = rho * (df / (1.0 - rho * rho)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
        2.0 * dist.sf(t.abs())
    };
    let mut r = TestResult::new("spearman", rho, p);
    r.df = Some(vec![df]);
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cohen_d_examples() {
        let x = [0.0, 0.0, 1.0, 1.0];
        let y = [1.0, 1.0, 2.0, 2.0];
        assert!((cohen_d(&x, &y).unwrap() + 3f64.sqrt()).abs() < 1e-12);
        assert_eq!(cohen_d(&x, &x).unwrap(), 0.0);
        assert_eq!(cohen_d(&[1.0, 1.0], &[1.0, 1.0]), Err(StatsError::ZeroVariance));
        assert_eq!(cohen_d(&x, &y).unwrap(), -cohen_d(&y, &x).unwrap());
    }

    #[test]
    fn cohen_h_examples() {
        assert_eq!(cohen_h(0.3, 0.3), 0.0);
        assert!((cohen_h(1.0, 0.0) - std::f64::consts::PI).abs() < 1e-15);
        assert!((cohen_h(0.25, 0.75) + 1.047_197_551_196_597_7).abs() < 1e-12);
        assert_eq!(cohen_h(0.2, 0.7), -cohen_h(0.7, 0.2));
    }

    #[test]
    fn spearman_examples() {
        let x = [1.0, 5.0, 2.0, 8.0, 3.0];
        assert!((spearman(&x, &x).unwrap().statistic - 1.0).abs() < 1e-15);
        let mut rev = x;
        rev.sort_by(|a, b| b.total_cmp(a));
        let mut sorted = x;
        sorted.sort_by(f64::total_cmp);
        assert!((spearman(&sorted, &rev).unwrap().statistic + 1.0).abs() < 1e-15);
        assert_eq!(spearman(&[1.0, 1.0, 1.0], &x[..3]), Err(StatsError::ConstantInput));
    }
}
