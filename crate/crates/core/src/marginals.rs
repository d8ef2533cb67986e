//! The three count families: generalized Poisson (GP), negative binomial
//! (NB, failures before the r-th success) and binomial.
//!
//! PMFs are evaluated in log space. Unbounded margins are truncated at a
//! pseudo upper limit `K` beyond which every point probability is at most
//! `1e-10`.

use std::fmt;

use serde::{Deserialize, Serialize};
use libm::lgamma as ln_gamma;

use crate::error::{Error, Result};

/// Point-probability threshold defining the pseudo upper limit.
pub const TAIL_THRESHOLD: f64 = 1e-10;
/// Largest acceptable deficit of the raw truncated mass.
pub const MASS_TOLERANCE: f64 = 1e-8;
/// Hard cap on the pseudo upper limit.
pub const SUPPORT_CAP: u64 = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    GeneralizedPoisson,
    NegativeBinomial,
    Binomial,
}

impl Family {
    /// Abbreviation used in table labels.
    pub fn short_name(&self) -> &'static str {
        match self {
            Family::GeneralizedPoisson => "GP",
            Family::NegativeBinomial => "NB",
            Family::Binomial => "B",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::GeneralizedPoisson => "generalized Poisson",
            Family::NegativeBinomial => "negative binomial",
            Family::Binomial => "binomial",
        })
    }
}

/// One marginal distribution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", deny_unknown_fields)]
pub enum MarginalSpec {
    /// Rate `theta > 0`, dispersion `lambda < 1`.
    #[serde(rename = "gp")]
    GeneralizedPoisson { theta: f64, lambda: f64 },
    /// `r` successes, success probability `p`.
    #[serde(rename = "nb")]
    NegativeBinomial { r: u32, p: f64 },
    /// `n` trials, success probability `p`.
    #[serde(rename = "binomial")]
    Binomial { n: u32, p: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub constraint: String,
    pub value: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {} violates {}", self.field, self.value, self.constraint)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub(crate) fn push(&mut self, field: &str, constraint: impl Into<String>, value: f64) {
        self.violations.push(Violation {
            field: field.to_string(),
            constraint: constraint.into(),
            value,
        });
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_ok() {
            Ok(())
        } else {
            Err(Error::InvalidSpec(self))
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return f.write_str("ok");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

fn check_probability(report: &mut ValidationReport, p: f64) {
    if !(p.is_finite() && p > 0.0 && p < 1.0) {
        report.push("p", "0 < p < 1", p);
    }
}

impl MarginalSpec {
    pub fn family(&self) -> Family {
        match self {
            MarginalSpec::GeneralizedPoisson { .. } => Family::GeneralizedPoisson,
            MarginalSpec::NegativeBinomial { .. } => Family::NegativeBinomial,
            MarginalSpec::Binomial { .. } => Family::Binomial,
        }
    }

    /// For a GP margin with `lambda < 0`, the largest integer `m` with
    /// `theta + m * lambda > 0`; the PMF vanishes beyond it.
    pub fn gp_upper_support(&self) -> Option<u64> {
        match *self {
            MarginalSpec::GeneralizedPoisson { theta, lambda } if lambda < 0.0 => {
                let ratio = theta / -lambda;
                if !ratio.is_finite() || ratio <= 0.0 {
                    return Some(0);
                }
                Some((ratio.ceil() - 1.0).max(0.0) as u64)
            }
            _ => None,
        }
    }

    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        match *self {
            MarginalSpec::GeneralizedPoisson { theta, lambda } => {
                if !(theta.is_finite() && theta > 0.0) {
                    report.push("theta", "theta > 0", theta);
                }
                if !(lambda.is_finite() && lambda < 1.0) {
                    report.push("lambda", "lambda < 1", lambda);
                }
                if lambda.is_finite() && lambda < 0.0 {
                    if lambda < -1.0 {
                        report.push("lambda", "lambda >= -1", lambda);
                    }
                    if theta.is_finite() && theta > 0.0 {
                        let m = self.gp_upper_support().unwrap_or(0);
                        if m < 4 {
                            report.push(
                                "lambda",
                                format!("m >= 4 where m is the largest integer with theta + m*lambda > 0 (m = {m})"),
                                lambda,
                            );
                        } else if lambda < -theta / m as f64 {
                            report.push("lambda", format!("lambda >= -theta/m (m = {m})"), lambda);
                        }
                    }
                }
            }
            MarginalSpec::NegativeBinomial { r, p } => {
                if r < 1 {
                    report.push("r", "r >= 1", r as f64);
                }
                check_probability(&mut report, p);
            }
            MarginalSpec::Binomial { n, p } => {
                if n < 1 {
                    report.push("n", "n >= 1", n as f64);
                }
                check_probability(&mut report, p);
            }
        }
        report
    }

    fn ensure_valid(&self) -> Result<()> {
        self.validate().into_result()
    }

    /// Log point probability; `-inf` outside the support. Assumes a valid spec.
    pub(crate) fn ln_pmf_unchecked(&self, k: u64) -> f64 {
        let kf = k as f64;
        match *self {
            MarginalSpec::GeneralizedPoisson { theta, lambda } => {
                if let Some(m) = self.gp_upper_support() {
                    if k > m {
                        return f64::NEG_INFINITY;
                    }
                }
                if k == 0 {
                    return -theta;
                }
                theta.ln() + (kf - 1.0) * (theta + lambda * kf).ln() - theta - lambda * kf
                    - ln_gamma(kf + 1.0)
            }
            MarginalSpec::NegativeBinomial { r, p } => {
                let r = r as f64;
                ln_gamma(r + kf) - ln_gamma(r) - ln_gamma(kf + 1.0)
                    + r * p.ln()
                    + kf * (-p).ln_1p()
            }
            MarginalSpec::Binomial { n, p } => {
                if k > n as u64 {
                    return f64::NEG_INFINITY;
                }
                let nf = n as f64;
                let ln_choose = ln_gamma(nf + 1.0) - ln_gamma(kf + 1.0) - ln_gamma(nf - kf + 1.0);
                let success = if k == 0 { 0.0 } else { kf * p.ln() };
                let failure = if k == n as u64 { 0.0 } else { (nf - kf) * (-p).ln_1p() };
                ln_choose + success + failure
            }
        }
    }

    pub fn ln_pmf(&self, k: u64) -> Result<f64> {
        self.ensure_valid()?;
        Ok(self.ln_pmf_unchecked(k))
    }

    /// `P(X = k)`.
    pub fn pmf(&self, k: u64) -> Result<f64> {
        Ok(self.ln_pmf(k)?.exp())
    }

    /// Closed-form `(mean, variance)`.
    pub fn moments(&self) -> Result<(f64, f64)> {
        self.ensure_valid()?;
        Ok(match *self {
            MarginalSpec::GeneralizedPoisson { theta, lambda } => {
                let s = 1.0 - lambda;
                (theta / s, theta / (s * s * s))
            }
            MarginalSpec::NegativeBinomial { r, p } => {
                let r = r as f64;
                (r * (1.0 - p) / p, r * (1.0 - p) / (p * p))
            }
            MarginalSpec::Binomial { n, p } => {
                let n = n as f64;
                (n * p, n * p * (1.0 - p))
            }
        })
    }

    /// Truncate the support at the pseudo upper limit `K`.
    ///
    /// The PMF is scanned upward from zero. Every family is unimodal, so the
    /// first `k` past the mode with `pmf(k) <= 1e-10` certifies the whole
    /// tail and `K = k - 1`. Binomial margins keep `K = n`; GP margins with
    /// negative dispersion never exceed their support limit `m`. If the raw
    /// mass on `0..=K` falls short of `1 - 1e-8` the limit keeps growing
    /// until it does. The stored probabilities are renormalized to sum to
    /// one and the raw mass is kept for diagnostics.
    pub fn truncate_support(&self) -> Result<TruncatedPmf> {
        self.ensure_valid()?;
        let mut probs = Vec::new();
        match *self {
            MarginalSpec::Binomial { n, .. } => {
                for k in 0..=n as u64 {
                    probs.push(self.ln_pmf_unchecked(k).exp());
                }
            }
            _ => {
                let limit = self.gp_upper_support().unwrap_or(u64::MAX);
                let mut mass = 0.0;
                let mut prev = f64::INFINITY;
                let mut k = 0u64;
                loop {
                    if k > SUPPORT_CAP {
                        return Err(Error::TruncationCap { cap: SUPPORT_CAP });
                    }
                    if k > limit {
                        break;
                    }
                    let p = self.ln_pmf_unchecked(k).exp();
                    let in_tail = k > 0 && p <= TAIL_THRESHOLD && p <= prev;
                    if in_tail && mass >= 1.0 - MASS_TOLERANCE {
                        break;
                    }
                    probs.push(p);
                    mass += p;
                    prev = p;
                    k += 1;
                }
            }
        }
        TruncatedPmf::from_raw(probs)
    }
}

/// A finite PMF on `0..=K` with its CDF and moments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncatedPmf {
    pub support_max: u32,
    pub probs: Vec<f64>,
    pub cdf: Vec<f64>,
    pub mean: f64,
    pub variance: f64,
    /// Mass of the untruncated PMF on `0..=K` before renormalization.
    pub raw_mass: f64,
}

impl TruncatedPmf {
    /// Build from point probabilities on `0..=K`, renormalizing them.
    pub fn from_raw(raw: Vec<f64>) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::InvalidArgument("empty probability vector".into()));
        }
        if raw.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidArgument(
                "probabilities must be finite and nonnegative".into(),
            ));
        }
        let raw_mass: f64 = raw.iter().sum();
        if raw_mass <= 0.0 {
            return Err(Error::InvalidArgument("probabilities sum to zero".into()));
        }
        let probs: Vec<f64> = raw.iter().map(|p| p / raw_mass).collect();
        let mut cdf = Vec::with_capacity(probs.len());
        let mut acc = 0.0;
        for p in &probs {
            acc += p;
            cdf.push(acc);
        }
        let mean: f64 = probs.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
        let variance: f64 = probs
            .iter()
            .enumerate()
            .map(|(k, p)| (k as f64 - mean).powi(2) * p)
            .sum();
        Ok(TruncatedPmf {
            support_max: (probs.len() - 1) as u32,
            probs,
            cdf,
            mean,
            variance,
            raw_mass,
        })
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Smallest `k` with `cdf[k] > u`; values of `u` at or above the final
    /// CDF entry map to `K`.
    pub fn quantile(&self, u: f64) -> Result<u32> {
        if !(0.0..1.0).contains(&u) {
            return Err(Error::InvalidArgument(format!("quantile level {u} outside [0, 1)")));
        }
        Ok(self.quantile_unchecked(u))
    }

    #[inline]
    pub(crate) fn quantile_unchecked(&self, u: f64) -> u32 {
        let idx = self.cdf.partition_point(|&c| c <= u);
        idx.min(self.probs.len() - 1) as u32
    }
}

/// Parameters recovered by the method of moments. Counts (`r`, `n`) are
/// left unrounded.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum EstimatedParams {
    GeneralizedPoisson { theta: f64, lambda: f64 },
    NegativeBinomial { r: f64, p: f64 },
    Binomial { n: f64, p: f64 },
}

impl EstimatedParams {
    pub fn values(&self) -> [f64; 2] {
        match *self {
            EstimatedParams::GeneralizedPoisson { theta, lambda } => [theta, lambda],
            EstimatedParams::NegativeBinomial { r, p } => [r, p],
            EstimatedParams::Binomial { n, p } => [n, p],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamEstimate {
    pub params: EstimatedParams,
    pub sample_mean: f64,
    pub sample_variance: f64,
}

impl ParamEstimate {
    pub fn family(&self) -> Family {
        match self.params {
            EstimatedParams::GeneralizedPoisson { .. } => Family::GeneralizedPoisson,
            EstimatedParams::NegativeBinomial { .. } => Family::NegativeBinomial,
            EstimatedParams::Binomial { .. } => Family::Binomial,
        }
    }

    /// Estimated parameters in the order of [`MarginalSpec::parameter_values`].
    pub fn values(&self) -> [f64; 2] {
        self.params.values()
    }

    /// The estimate as a spec, with `r` or `n` rounded up to an integer.
    pub fn rounded_spec(&self) -> MarginalSpec {
        match self.params {
            EstimatedParams::GeneralizedPoisson { theta, lambda } => {
                MarginalSpec::GeneralizedPoisson { theta, lambda }
            }
            EstimatedParams::NegativeBinomial { r, p } => MarginalSpec::NegativeBinomial {
                r: r.ceil().max(1.0) as u32,
                p,
            },
            EstimatedParams::Binomial { n, p } => MarginalSpec::Binomial {
                n: n.ceil().max(1.0) as u32,
                p,
            },
        }
    }
}

impl MarginalSpec {
    /// The two true parameters, in the same order as [`ParamEstimate::values`].
    pub fn parameter_values(&self) -> [f64; 2] {
        match *self {
            MarginalSpec::GeneralizedPoisson { theta, lambda } => [theta, lambda],
            MarginalSpec::NegativeBinomial { r, p } => [r as f64, p],
            MarginalSpec::Binomial { n, p } => [n as f64, p],
        }
    }

    /// Short names of the two parameters.
    pub fn parameter_names(&self) -> [&'static str; 2] {
        match self {
            MarginalSpec::GeneralizedPoisson { .. } => ["theta", "lambda"],
            MarginalSpec::NegativeBinomial { .. } => ["r", "p"],
            MarginalSpec::Binomial { .. } => ["n", "p"],
        }
    }
}

/// Invert the closed-form moment equations of `family`.
pub fn invert_moments(mean: f64, variance: f64, family: Family) -> Result<EstimatedParams> {
    if !(mean.is_finite() && variance.is_finite()) {
        return Err(Error::Estimation("non-finite moments".into()));
    }
    match family {
        Family::GeneralizedPoisson => {
            if mean <= 0.0 || variance <= 0.0 {
                return Err(Error::Estimation(format!(
                    "GP needs positive mean and variance (mean {mean}, variance {variance})"
                )));
            }
            let ratio = (mean / variance).sqrt();
            Ok(EstimatedParams::GeneralizedPoisson {
                theta: mean * ratio,
                lambda: 1.0 - ratio,
            })
        }
        Family::NegativeBinomial => {
            if mean <= 0.0 || variance <= mean {
                return Err(Error::Estimation(format!(
                    "NB needs variance > mean > 0 (mean {mean}, variance {variance})"
                )));
            }
            Ok(EstimatedParams::NegativeBinomial {
                r: mean * mean / (variance - mean),
                p: mean / variance,
            })
        }
        Family::Binomial => {
            if variance <= 0.0 || variance >= mean {
                return Err(Error::Estimation(format!(
                    "binomial needs 0 < variance < mean (mean {mean}, variance {variance})"
                )));
            }
            let p = 1.0 - variance / mean;
            Ok(EstimatedParams::Binomial { n: mean / p, p })
        }
    }
}

/// Sample mean and unbiased (n - 1) sample variance.
pub fn sample_moments(sample: &[u32]) -> (f64, f64) {
    let n = sample.len() as f64;
    let mean = sample.iter().map(|&x| x as f64).sum::<f64>() / n;
    let ss: f64 = sample.iter().map(|&x| (x as f64 - mean).powi(2)).sum();
    (mean, ss / (n - 1.0))
}

/// Method-of-moments estimate from a sample.
pub fn mom_estimate(sample: &[u32], family: Family) -> Result<ParamEstimate> {
    if sample.len() < 2 {
        return Err(Error::InvalidArgument("method of moments needs at least two observations".into()));
    }
    let (mean, variance) = sample_moments(sample);
    Ok(ParamEstimate {
        params: invert_moments(mean, variance, family)?,
        sample_mean: mean,
        sample_variance: variance,
    })
}
