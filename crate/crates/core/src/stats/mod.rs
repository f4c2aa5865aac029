//! Correlation, cross-source calibration, paired t-tests and Bland-Altman
//! agreement.
//!
//! Sample standard deviations use the `n - 1` denominator throughout.

mod distribution;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use distribution::{beta_regularized, ln_gamma, t_cdf, t_critical, t_quantile};

/// Significance level used when none is configured.
pub const DEFAULT_ALPHA: f64 = 0.05;

/// Limits-of-agreement multiplier for roughly 95% coverage.
pub const DEFAULT_BA_MULTIPLIER: f64 = 1.96;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum StatsError {
    #[error("series lengths differ ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("{0} has zero variance")]
    ZeroVariance(&'static str),
    #[error("paired differences have zero variance")]
    ZeroVarianceOfDifferences,
    #[error("input contains a non-finite value")]
    NonFinite,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, StatsError>;

fn check_pair(x: &[f64], y: &[f64], needed: usize) -> Result<()> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < needed {
        return Err(StatsError::TooFewSamples { needed, got: x.len() });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    Ok(())
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample standard deviation around a precomputed mean.
fn sample_sd(x: &[f64], m: f64) -> f64 {
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub r: f64,
    /// Two-tailed p-value of `r`.
    pub p: f64,
    pub n: usize,
}

/// Sample (Pearson) correlation coefficient.
pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y, 3)?;
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if !(sxx > 0.0) {
        return Err(StatsError::ZeroVariance("x"));
    }
    if !(syy > 0.0) {
        return Err(StatsError::ZeroVariance("y"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Two-tailed p-value of a correlation coefficient through the t transform
/// with `n - 2` degrees of freedom. `|r| = 1` gives zero.
pub fn pearson_p(r: f64, n: usize) -> Result<f64> {
    if n < 3 {
        return Err(StatsError::TooFewSamples { needed: 3, got: n });
    }
    if !(r.abs() <= 1.0) {
        return Err(StatsError::InvalidParameter(format!("correlation {r} outside [-1, 1]")));
    }
    if r.abs() == 1.0 {
        return Ok(0.0);
    }
    let df = (n - 2) as f64;
    let t = r * df.sqrt() / (1.0 - r * r).sqrt();
    Ok((2.0 * (1.0 - t_cdf(t.abs(), df))).clamp(0.0, 1.0))
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<CorrelationResult> {
    let r = pearson_r(x, y)?;
    Ok(CorrelationResult {
        r,
        p: pearson_p(r, x.len())?,
        n: x.len(),
    })
}

/// Affine map from one pose source's feature values onto another's.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationModel {
    pub slope: f64,
    pub intercept: f64,
    /// RMS of `y - x` before calibration.
    pub rmse_before: f64,
    /// RMS of `y - (slope * x + intercept)` on the training pair.
    pub rmse_after: f64,
    pub n: usize,
}

fn rms(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v * v, n + 1));
    (sum / n as f64).sqrt()
}

/// Ordinary least squares fit of `y` on `x`.
pub fn fit_calibration(x: &[f64], y: &[f64]) -> Result<CalibrationModel> {
    check_pair(x, y, 2)?;
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
    }
    if !(sxx > 0.0) {
        return Err(StatsError::ZeroVariance("x"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    Ok(CalibrationModel {
        slope,
        intercept,
        rmse_before: rms(x.iter().zip(y).map(|(a, b)| b - a)),
        rmse_after: rms(x.iter().zip(y).map(|(a, b)| b - (slope * a + intercept))),
        n: x.len(),
    })
}

pub fn apply_calibration(model: &CalibrationModel, x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| model.slope * v + model.intercept).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Tails {
    #[default]
    One,
    Two,
}

impl fmt::Display for Tails {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Tails::One => "one",
            Tails::Two => "two",
        })
    }
}

impl std::str::FromStr for Tails {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "one" => Ok(Tails::One),
            "two" => Ok(Tails::Two),
            _ => Err(format!("tails must be \"one\" or \"two\", got {s:?}")),
        }
    }
}

/// Direction of the one-tailed alternative for `d = post - pre`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    /// Mean difference above zero: significant when `t > critical`.
    #[default]
    Greater,
    /// Mean difference below zero: significant when `t < -critical`.
    Less,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedTestOptions {
    pub tails: Tails,
    pub alternative: Alternative,
    pub alpha: f64,
}

impl Default for PairedTestOptions {
    fn default() -> Self {
        PairedTestOptions {
            tails: Tails::One,
            alternative: Alternative::Greater,
            alpha: DEFAULT_ALPHA,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedTestResult {
    pub n: usize,
    pub df: usize,
    pub mean_diff: f64,
    pub sd_diff: f64,
    /// Statistic for `d = post - pre`.
    pub t: f64,
    /// p-value under the selected tails.
    pub p: f64,
    pub p_one: f64,
    pub p_two: f64,
    pub tails: Tails,
    pub alternative: Alternative,
    pub alpha: f64,
    /// One-tailed critical value at `alpha`.
    pub critical: f64,
    pub significant: bool,
}

/// Paired t-test with the default one-tailed `Greater` alternative at 0.05.
pub fn paired_t_test(pre: &[f64], post: &[f64], tails: Tails) -> Result<PairedTestResult> {
    paired_t_test_with(
        pre,
        post,
        &PairedTestOptions {
            tails,
            ..PairedTestOptions::default()
        },
    )
}

pub fn paired_t_test_with(pre: &[f64], post: &[f64], opts: &PairedTestOptions) -> Result<PairedTestResult> {
    check_pair(pre, post, 2)?;
    if !(opts.alpha > 0.0 && opts.alpha < 1.0) {
        return Err(StatsError::InvalidParameter(format!(
            "alpha {} outside (0, 1)",
            opts.alpha
        )));
    }
    let d: Vec<f64> = pre.iter().zip(post).map(|(a, b)| b - a).collect();
    let n = d.len();
    let md = mean(&d);
    let sd = sample_sd(&d, md);
    let scale = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(sd > f64::EPSILON * scale) {
        return Err(StatsError::ZeroVarianceOfDifferences);
    }
    let df = n - 1;
    let t = md * (n as f64).sqrt() / sd;
    let cdf = t_cdf(t, df as f64);
    let p_one = match opts.alternative {
        Alternative::Greater => 1.0 - cdf,
        Alternative::Less => cdf,
    };
    let p_two = (2.0 * (1.0 - t_cdf(t.abs(), df as f64))).min(1.0);
    let critical = t_critical(opts.alpha, df as f64);
    let significant = match opts.tails {
        Tails::One => match opts.alternative {
            Alternative::Greater => t > critical,
            Alternative::Less => t < -critical,
        },
        Tails::Two => p_two < opts.alpha,
    };
    Ok(PairedTestResult {
        n,
        df,
        mean_diff: md,
        sd_diff: sd,
        t,
        p: match opts.tails {
            Tails::One => p_one,
            Tails::Two => p_two,
        },
        p_one,
        p_two,
        tails: opts.tails,
        alternative: opts.alternative,
        alpha: opts.alpha,
        critical,
        significant,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlandAltmanSummary {
    /// `(pre + post) / 2` per pair.
    pub pair_means: Vec<f64>,
    /// `post - pre` per pair.
    pub differences: Vec<f64>,
    pub mean_diff: f64,
    pub sd_diff: f64,
    pub multiplier: f64,
    pub lower_limit: f64,
    pub upper_limit: f64,
    /// Differences within the limits, inclusive.
    pub inside: usize,
    pub coverage: f64,
}

impl BlandAltmanSummary {
    pub fn n(&self) -> usize {
        self.differences.len()
    }

    pub fn coverage_label(&self) -> String {
        format!("{}/{} inside limits", self.inside, self.n())
    }
}

pub fn bland_altman(pre: &[f64], post: &[f64]) -> Result<BlandAltmanSummary> {
    bland_altman_with(pre, post, DEFAULT_BA_MULTIPLIER)
}

/// Limits of agreement `mean(d) ± multiplier * sd(d)`.
pub fn bland_altman_with(pre: &[f64], post: &[f64], multiplier: f64) -> Result<BlandAltmanSummary> {
    check_pair(pre, post, 3)?;
    if !(multiplier.is_finite() && multiplier > 0.0) {
        return Err(StatsError::InvalidParameter(format!("multiplier {multiplier}")));
    }
    let pair_means: Vec<f64> = pre.iter().zip(post).map(|(a, b)| 0.5 * (a + b)).collect();
    let differences: Vec<f64> = pre.iter().zip(post).map(|(a, b)| b - a).collect();
    let md = mean(&differences);
    let sd = sample_sd(&differences, md);
    let half = multiplier * sd;
    let (lower_limit, upper_limit) = (md - half, md + half);
    let inside = differences
        .iter()
        .filter(|&&d| d >= lower_limit && d <= upper_limit)
        .count();
    Ok(BlandAltmanSummary {
        coverage: inside as f64 / differences.len() as f64,
        pair_means,
        differences,
        mean_diff: md,
        sd_diff: sd,
        multiplier,
        lower_limit,
        upper_limit,
        inside,
    })
}
