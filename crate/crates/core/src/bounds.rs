//! Correlation feasibility: simulated Fréchet bounds for discrete pairs
//! (generate, sort, correlate), closed-form bounds for Bernoulli pairs, and
//! a whole-matrix feasibility report.

use std::fmt;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::collapse::CollapsedMargin;
use crate::error::{Error, Result};
use crate::gaussian::CorrelationMatrix;
use crate::marginals::TruncatedPmf;
use crate::rng::{Phase, RngStream};
use crate::stats::PairMoments;

/// Default number of draws for simulated bounds.
pub const DEFAULT_GSC_DRAWS: usize = 100_000;
/// Minimum number of draws accepted for simulated bounds.
pub const MIN_GSC_DRAWS: usize = 10_000;
/// Targets this close to a bound get a `Marginal` verdict.
pub const MARGINAL_BAND: f64 = 0.01;

/// Closed-form correlation range of two Bernoulli variables with success
/// probabilities `p_i` and `p_j`.
pub fn ep_binary_bounds(p_i: f64, p_j: f64) -> Result<(f64, f64)> {
    for p in [p_i, p_j] {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "binary probability {p} must lie strictly between 0 and 1"
            )));
        }
    }
    let (q_i, q_j) = (1.0 - p_i, 1.0 - p_j);
    let lower = (-(p_i * p_j / (q_i * q_j)).sqrt()).max(-(q_i * q_j / (p_i * p_j)).sqrt());
    let upper = (p_i * q_j / (q_i * p_j)).sqrt().min((q_i * p_j / (p_i * q_j)).sqrt());
    Ok((lower, upper))
}

/// Simulated correlation bounds of two discrete margins: `n` uniforms are
/// pushed through both quantile functions in the same order (upper bound)
/// and in opposite order (lower bound).
pub fn gsc_bounds(a: &TruncatedPmf, b: &TruncatedPmf, n: usize, stream: &mut RngStream) -> Result<(f64, f64)> {
    if n < MIN_GSC_DRAWS {
        return Err(Error::InvalidArgument(format!(
            "simulated bounds need at least {MIN_GSC_DRAWS} draws, got {n}"
        )));
    }
    let mut upper = PairMoments::default();
    let mut lower = PairMoments::default();
    for _ in 0..n {
        let u: f64 = stream.random();
        let x = a.quantile_unchecked(u) as f64;
        upper.push(x, b.quantile_unchecked(u) as f64);
        lower.push(x, b.quantile_unchecked(1.0 - u) as f64);
    }
    match (lower.correlation(), upper.correlation()) {
        (Some(lo), Some(hi)) => Ok((lo.min(hi), hi.max(lo))),
        _ => Err(Error::Degenerate("a margin produced a constant sample".into())),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundSource {
    /// Simulated Fréchet bounds on the discrete scale.
    Gsc,
    /// Bernoulli bounds on the collapsed binary scale.
    Ep,
    /// Bernoulli bounds mapped through both expansions: the range the
    /// collapse/expand construction can actually reach.
    Collapse,
}

impl fmt::Display for BoundSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundSource::Gsc => "GSC",
            BoundSource::Ep => "EP",
            BoundSource::Collapse => "collapse",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Feasible,
    Marginal,
    Infeasible,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Feasible => "feasible",
            Verdict::Marginal => "marginal",
            Verdict::Infeasible => "infeasible",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    fn verdict(&self, target: f64) -> Verdict {
        if target < self.lower || target > self.upper {
            Verdict::Infeasible
        } else if target - self.lower <= MARGINAL_BAND || self.upper - target <= MARGINAL_BAND {
            Verdict::Marginal
        } else {
            Verdict::Feasible
        }
    }
}

/// Feasibility of one off-diagonal target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairBounds {
    pub i: usize,
    pub j: usize,
    pub label: String,
    pub target: f64,
    /// Tightest lower and upper bound over all sources.
    pub lower: f64,
    pub upper: f64,
    /// Source of the binding bound on the side nearest the target.
    pub source: BoundSource,
    pub verdict: Verdict,
    pub gsc: Option<Interval>,
    pub ep: Interval,
    pub collapse: Interval,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub pairs: Vec<PairBounds>,
}

impl BoundsReport {
    pub fn is_feasible(&self) -> bool {
        self.pairs.iter().all(|p| p.verdict != Verdict::Infeasible)
    }

    pub fn infeasible(&self) -> impl Iterator<Item = &PairBounds> {
        self.pairs.iter().filter(|p| p.verdict == Verdict::Infeasible)
    }

    /// Comma-separated labels of the infeasible pairs.
    pub fn infeasible_labels(&self) -> String {
        self.infeasible().map(|p| p.label.as_str()).collect::<Vec<_>>().join(", ")
    }

    pub fn pair(&self, i: usize, j: usize) -> Option<&PairBounds> {
        let (i, j) = (i.min(j), i.max(j));
        self.pairs.iter().find(|p| p.i == i && p.j == j)
    }
}

impl fmt::Display for BoundsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<8} {:>8} {:>9} {:>9} {:>9}  {:<10} {:>17} {:>17} {:>17}",
            "pair", "target", "lower", "upper", "binding", "verdict", "GSC", "EP", "collapse"
        )?;
        let fmt_iv = |iv: Option<Interval>| match iv {
            Some(iv) => format!("[{:.4}, {:.4}]", iv.lower, iv.upper),
            None => "-".to_string(),
        };
        for p in &self.pairs {
            writeln!(
                f,
                "{:<8} {:>8.4} {:>9.4} {:>9.4} {:>9}  {:<10} {:>17} {:>17} {:>17}",
                p.label,
                p.target,
                p.lower,
                p.upper,
                p.source.to_string(),
                p.verdict.to_string(),
                fmt_iv(p.gsc),
                fmt_iv(Some(p.ep)),
                fmt_iv(Some(p.collapse)),
            )?;
        }
        Ok(())
    }
}

/// Label for the correlation between variables `i` and `j` (zero-based).
pub fn pair_label(i: usize, j: usize, dim: usize) -> String {
    if dim < 10 {
        format!("rho{}{}", i + 1, j + 1)
    } else {
        format!("rho{}_{}", i + 1, j + 1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsOptions {
    /// Draws per pair for the simulated bounds; 0 skips them.
    pub gsc_draws: usize,
    pub seed: u64,
}

impl Default for BoundsOptions {
    fn default() -> Self {
        BoundsOptions {
            gsc_draws: DEFAULT_GSC_DRAWS,
            seed: 0,
        }
    }
}

/// Assess one pair. `gsc` carries the simulated bounds when available.
pub fn pair_bounds(
    i: usize,
    j: usize,
    dim: usize,
    a: &CollapsedMargin,
    b: &CollapsedMargin,
    target: f64,
    gsc: Option<(f64, f64)>,
) -> Result<PairBounds> {
    let (ep_lo, ep_hi) = ep_binary_bounds(a.p_b, b.p_b)?;
    let scale = a.attenuation() * b.attenuation();
    let ep = Interval { lower: ep_lo, upper: ep_hi };
    let collapse = Interval {
        lower: ep_lo * scale,
        upper: ep_hi * scale,
    };
    let gsc = gsc.map(|(lower, upper)| Interval { lower, upper });
    let mut candidates = vec![(BoundSource::Ep, ep), (BoundSource::Collapse, collapse)];
    if let Some(g) = gsc {
        candidates.push((BoundSource::Gsc, g));
    }
    let (lo_src, lower) = candidates
        .iter()
        .map(|(s, iv)| (*s, iv.lower))
        .fold((BoundSource::Ep, f64::NEG_INFINITY), |acc, c| if c.1 > acc.1 { c } else { acc });
    let (hi_src, upper) = candidates
        .iter()
        .map(|(s, iv)| (*s, iv.upper))
        .fold((BoundSource::Ep, f64::INFINITY), |acc, c| if c.1 < acc.1 { c } else { acc });
    let tight = Interval { lower, upper };
    let source = if target >= 0.5 * (lower + upper) { hi_src } else { lo_src };
    Ok(PairBounds {
        i,
        j,
        label: pair_label(i, j, dim),
        target,
        lower,
        upper,
        source,
        verdict: tight.verdict(target),
        gsc,
        ep,
        collapse,
    })
}

/// Check every off-diagonal target against the simulated discrete bounds,
/// the binary bounds of the collapsed margins, and the range reachable
/// through collapse and expansion.
pub fn check_target_matrix(
    margins: &[CollapsedMargin],
    sigma: &CorrelationMatrix,
    opts: &BoundsOptions,
) -> Result<BoundsReport> {
    let dim = sigma.dim();
    if margins.len() != dim {
        return Err(Error::Dimension(format!(
            "{} margins but a {dim}x{dim} correlation matrix",
            margins.len()
        )));
    }
    let pairs: Vec<(usize, usize)> = sigma.pairs().collect();
    let pairs = pairs
        .par_iter()
        .map(|&(i, j)| {
            let gsc = if opts.gsc_draws == 0 {
                None
            } else {
                let mut s = RngStream::derive(opts.seed, Phase::Gsc, i as u64, j as u64);
                Some(gsc_bounds(&margins[i].source, &margins[j].source, opts.gsc_draws, &mut s)?)
            };
            pair_bounds(i, j, dim, &margins[i], &margins[j], sigma.get(i, j), gsc)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BoundsReport { pairs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::marginals::MarginalSpec;

    #[test]
    fn ep_examples() {
        assert_eq!(ep_binary_bounds(0.5, 0.5).unwrap(), (-1.0, 1.0));
        let (_, hi) = ep_binary_bounds(0.4545, 0.7168).unwrap();
        // the probabilities are themselves rounded to 4 d.p.; half a unit of
        // input rounding moves these bounds by up to 2e-4
        assert!((hi - 0.5738).abs() < 3e-4, "{hi}");
        let (_, hi) = ep_binary_bounds(0.4545, 0.5017).unwrap();
        assert!((hi - 0.9099).abs() < 3e-4, "{hi}");
        let (_, hi) = ep_binary_bounds(0.7168, 0.5017).unwrap();
        assert!((hi - 0.6306).abs() < 3e-4, "{hi}");
        assert!(ep_binary_bounds(0.0, 0.5).is_err());
        assert!(ep_binary_bounds(0.5, 1.0).is_err());
    }

    #[test]
    fn gsc_identical_and_symmetric() {
        let pmf = MarginalSpec::Binomial { n: 5, p: 0.5 }.truncate_support().unwrap();
        let mut s = RngStream::new(3);
        let (lo, hi) = gsc_bounds(&pmf, &pmf, 100_000, &mut s).unwrap();
        assert!((hi - 1.0).abs() < 1e-9);
        assert!((lo + 1.0).abs() < 0.01, "{lo}");
        assert!(gsc_bounds(&pmf, &pmf, 100, &mut s).is_err());
    }

    #[test]
    fn verdict_band() {
        let iv = Interval { lower: -0.5, upper: 0.6 };
        assert_eq!(iv.verdict(0.0), Verdict::Feasible);
        assert_eq!(iv.verdict(0.595), Verdict::Marginal);
        assert_eq!(iv.verdict(0.61), Verdict::Infeasible);
        assert_eq!(iv.verdict(-0.51), Verdict::Infeasible);
    }
}
