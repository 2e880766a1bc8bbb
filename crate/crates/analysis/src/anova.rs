use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use crate::effect::mean;
use crate::error::StatsError;
use crate::TestResult;

/// Between/within decomposition shared by ANOVA and Tukey's HSD.
pub(crate) struct Decomposition {
    pub means: Vec<f64>,
    pub sizes: Vec<usize>,
    pub ss_between: f64,
    pub ss_within: f64,
    pub df_between: f64,
    pub df_within: f64,
}

pub(crate) fn decompose(groups: &[Vec<f64>]) -> Result<Decomposition, StatsError> {
    if groups.len() < 2 {
        return Err(StatsError::InsufficientData("need at least two groups".into()));
    }
    if groups.iter().any(|g| g.len() < 2) {
        return Err(StatsError::InsufficientData(
            "every group needs at least two observations".into(),
        ));
    }
    let n: usize = groups.iter().map(Vec::len).sum();
    let grand = groups.iter().flatten().sum::<f64>() / n as f64;
    let means: Vec<f64> = groups.iter().map(|g| mean(g)).collect();
    let ss_between = groups
        .iter()
        .zip(&means)
        .map(|(g, m)| g.len() as f64 * (m - grand) * (m - grand))
        .sum();
    let ss_within = groups
        .iter()
        .zip(&means)
        .map(|(g, m)| g.iter().map(|v| (v - m) * (v - m)).sum::<f64>())
        .sum();
    Ok(Decomposition {
        sizes: groups.iter().map(Vec::len).collect(),
        means,
        ss_between,
        ss_within,
        df_between: (groups.len() - 1) as f64,
        df_within: (n - groups.len()) as f64,
    })
}

/// One-way ANOVA; the statistic is F on (k − 1, N − k) degrees of freedom.
pub fn one_way_anova(groups: &[Vec<f64>]) -> Result<TestResult, StatsError> {
    let d = decompose(groups)?;
    let ms_within = d.ss_within / d.df_within;
    let ms_between = d.ss_between / d.df_between;
    let (f, p) = if ms_within > 0.0 {
        let f = ms_between / ms_within;
        let dist = FisherSnedecor::new(d.df_between, d.df_within).expect("positive df");
        (f, dist.sf(f))
    } else if ms_between == 0.0 {
        (0.0, 1.0)
    } else {
        (f64::INFINITY, 0.0)
    };
    let mut r = TestResult::new("one_way_anova", f, p);
    r.df = Some(vec![d.df_between, d.df_within]);
    Ok(r)
}
