//! Tukey's honest significant difference, with the studentized range
//! distribution evaluated by Gauss–Legendre quadrature.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

use crate::anova::decompose;
use crate::error::StatsError;

const GL_POINTS: usize = 16;

/// Nodes and weights of the 16-point Gauss–Legendre rule on [−1, 1].
fn gauss_legendre() -> &'static [(f64, f64); GL_POINTS] {
    static RULE: OnceLock<[(f64, f64); GL_POINTS]> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = GL_POINTS;
        let mut rule = [(0.0, 0.0); GL_POINTS];
        for (i, slot) in rule.iter_mut().enumerate() {
            // Newton iteration from the Chebyshev-like initial guess.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let k = k as f64;
                    let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            *slot = (x, 2.0 / ((1.0 - x * x) * dp * dp));
        }
        rule
    })
}

/// ∫ f over [a, b] split into `pieces` equal panels.
fn integrate(a: f64, b: f64, pieces: usize, f: impl Fn(f64) -> f64) -> f64 {
    let rule = gauss_legendre();
    let h = (b - a) / pieces as f64;
    let mut total = 0.0;
    for p in 0..pieces {
        let mid = a + h * (p as f64 + 0.5);
        let half = h / 2.0;
        total += half * rule.iter().map(|&(x, w)| w * f(mid + half * x)).sum::<f64>();
    }
    total
}

fn phi(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn big_phi(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

const INNER_LO: f64 = -8.0;
const INNER_HI: f64 = 8.0;
const INNER_PANELS: usize = 24;

/// Inner quadrature nodes on [−8, 8] with their weight·φ(z) and Φ(z),
/// which do not depend on the range being evaluated.
fn inner_nodes() -> &'static [(f64, f64, f64)] {
    static NODES: OnceLock<Vec<(f64, f64, f64)>> = OnceLock::new();
    NODES.get_or_init(|| {
        let rule = gauss_legendre();
        let h = (INNER_HI - INNER_LO) / INNER_PANELS as f64;
        let mut nodes = Vec::with_capacity(INNER_PANELS * GL_POINTS);
        for p in 0..INNER_PANELS {
            let mid = INNER_LO + h * (p as f64 + 0.5);
            for &(x, w) in rule {
                let z = mid + h / 2.0 * x;
                nodes.push((z, h / 2.0 * w * phi(z), big_phi(z)));
            }
        }
        nodes
    })
}

/// P(range of k independent standard normals < w).
fn range_cdf(w: f64, k: f64) -> f64 {
    if w <= 0.0 {
        return 0.0;
    }
    let v: f64 = inner_nodes()
        .iter()
        .map(|&(z, wphi, cdf)| wphi * (cdf - big_phi(z - w)).max(0.0).powf(k - 1.0))
        .sum();
    (k * v).clamp(0.0, 1.0)
}

/// CDF of the studentized range distribution with `k` groups and `df`
/// error degrees of freedom (`f64::INFINITY` for a known variance).
pub fn ptukey(q: f64, k: usize, df: f64) -> f64 {
    assert!(k >= 2, "studentized range needs k >= 2");
    assert!(df > 0.0, "df must be positive");
    if q <= 0.0 {
        return 0.0;
    }
    let kf = k as f64;
    if df.is_infinite() || df > 1e6 {
        return range_cdf(q, kf);
    }
    // s = sqrt(chi2_df / df) has density
    // df^(df/2) s^(df-1) exp(-df s^2 / 2) / (Gamma(df/2) 2^(df/2 - 1)).
    let log_norm = 0.5 * df * df.ln() - ln_gamma(0.5 * df) - (0.5 * df - 1.0) * 2f64.ln();
    let spread = 12.0 / (2.0 * df).sqrt();
    let lo = (1.0 - spread).max(0.0);
    let hi = 1.0 + spread;
    let v = integrate(lo, hi, 48, |s| {
        if s <= 0.0 {
            return 0.0;
        }
        let log_density = log_norm + (df - 1.0) * s.ln() - 0.5 * df * s * s;
        log_density.exp() * range_cdf(q * s, kf)
    });
    v.clamp(0.0, 1.0)
}

/// Quantile of the studentized range distribution, by Illinois false
/// position on a bracket found by doubling.
pub fn qtukey(p: f64, k: usize, df: f64) -> f64 {
    assert!((0.0..1.0).contains(&p), "p must be in [0, 1)");
    // Reports ask for the same critical value once per item; the root
    // search is the expensive part.
    static CACHE: OnceLock<Mutex<HashMap<(u64, usize, u64), f64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    let key = (p.to_bits(), k, df.to_bits());
    if let Some(&q) = cache.lock().expect("cache lock").get(&key) {
        return q;
    }
    let q = qtukey_uncached(p, k, df);
    cache.lock().expect("cache lock").insert(key, q);
    q
}

fn qtukey_uncached(p: f64, k: usize, df: f64) -> f64 {
    let f = |q: f64| ptukey(q, k, df) - p;
    let (mut a, mut fa) = (0.0, -p);
    let mut b = 4.0;
    let mut fb = f(b);
    while fb < 0.0 {
        a = b;
        fa = fb;
        b *= 2.0;
        fb = f(b);
    }
    let mut side = 0;
    for _ in 0..200 {
        let c = (a * fb - b * fa) / (fb - fa);
        let fc = f(c);
        if fc.abs() < 1e-13 || (b - a).abs() < 1e-12 * c.abs().max(1.0) {
            return c;
        }
        if fc * fb > 0.0 {
            b = c;
            fb = fc;
            if side == -1 {
                fa /= 2.0;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb /= 2.0;
            }
            side = 1;
        }
    }
    (a + b) / 2.0
}

/// One pairwise comparison: `difference` is mean(j) − mean(i).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TukeyRow {
    pub group_i: usize,
    pub group_j: usize,
    pub difference: f64,
    pub lower: f64,
    pub upper: f64,
    pub p_adjusted: f64,
}

/// All pairwise comparisons with Tukey–Kramer standard errors and 95%
/// simultaneous confidence intervals.
pub fn tukey_hsd(groups: &[Vec<f64>]) -> Result<Vec<TukeyRow>, StatsError> {
    tukey_hsd_with(groups, 0.95)
}

pub fn tukey_hsd_with(groups: &[Vec<f64>], confidence: f64) -> Result<Vec<TukeyRow>, StatsError> {
    let d = decompose(groups)?;
    let k = groups.len();
    let mse = d.ss_within / d.df_within;
    let q_crit = qtukey(confidence, k, d.df_within);
    let mut rows = Vec::with_capacity(k * (k - 1) / 2);
    for i in 0..k {
        for j in i + 1..k {
            let diff = d.means[j] - d.means[i];
            let se = (mse / 2.0 * (1.0 / d.sizes[i] as f64 + 1.0 / d.sizes[j] as f64)).sqrt();
            let p = if se > 0.0 {
                1.0 - ptukey(diff.abs() / se, k, d.df_within)
            } else if diff == 0.0 {
                1.0
            } else {
                0.0
            };
            rows.push(TukeyRow {
                group_i: i,
                group_j: j,
                difference: diff,
                lower: diff - q_crit * se,
                upper: diff + q_crit * se,
                p_adjusted: p.clamp(0.0, 1.0),
            });
        }
    }
    Ok(rows)
}
