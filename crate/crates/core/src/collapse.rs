//! Median collapsing of a discrete margin into a binary variable, and the
//! reverse step that maps binary draws back onto the discrete scale.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::marginals::TruncatedPmf;
use crate::rng::RngStream;

/// Binary success probabilities closer than this to 0 or 1 are rejected.
pub const DEGENERATE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MedianSide {
    Zero,
    One,
}

/// A conditional PMF supported on the contiguous range `lo..=hi`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoryPmf {
    pub lo: u32,
    pub hi: u32,
    pub probs: Vec<f64>,
    pub cdf: Vec<f64>,
    pub mean: f64,
}

impl CategoryPmf {
    fn from_slice(lo: u32, raw: &[f64], mass: f64) -> Self {
        let probs: Vec<f64> = raw.iter().map(|p| p / mass).collect();
        let mut acc = 0.0;
        let cdf = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        let mean = probs
            .iter()
            .enumerate()
            .map(|(i, p)| (lo as f64 + i as f64) * p)
            .sum();
        CategoryPmf {
            lo,
            hi: lo + raw.len() as u32 - 1,
            probs,
            cdf,
            mean,
        }
    }

    /// Probability of `k` under this conditional PMF (0 outside the range).
    pub fn prob(&self, k: u32) -> f64 {
        if k < self.lo || k > self.hi {
            0.0
        } else {
            self.probs[(k - self.lo) as usize]
        }
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Smallest `k` in the range with conditional CDF above `u`, clamped to `hi`.
    #[inline]
    pub fn quantile(&self, u: f64) -> u32 {
        let idx = self.cdf.partition_point(|&c| c <= u);
        self.lo + idx.min(self.probs.len() - 1) as u32
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollapsedMargin {
    pub source: TruncatedPmf,
    pub median_m: u32,
    pub median_side: MedianSide,
    pub p_b: f64,
    pub cond_pmf_zero: CategoryPmf,
    pub cond_pmf_one: CategoryPmf,
}

/// Collapse at the median `M` (smallest `k` with `cdf[k] >= 0.5`). Values
/// below `M` map to 0, above `M` to 1, and `M` itself joins whichever side
/// puts `P(Y = 1)` closer to 0.5, preferring 1 on a tie.
pub fn collapse_margin(pmf: &TruncatedPmf) -> Result<CollapsedMargin> {
    if pmf.probs.iter().filter(|&&p| p > 0.0).count() < 2 {
        return Err(Error::Degenerate("margin has fewer than two support points".into()));
    }
    let k_max = pmf.probs.len() - 1;
    let m = pmf.cdf.partition_point(|&c| c < 0.5).min(k_max);
    let below: f64 = pmf.probs[..m].iter().sum();
    let above: f64 = pmf.probs[m + 1..].iter().sum();
    let with_one = above + pmf.probs[m];
    let with_zero = above;
    let side = if (with_one - 0.5).abs() <= (with_zero - 0.5).abs() {
        MedianSide::One
    } else {
        MedianSide::Zero
    };
    // first support point of category 1
    let split = match side {
        MedianSide::One => m,
        MedianSide::Zero => m + 1,
    };
    let p_b = match side {
        MedianSide::One => with_one,
        MedianSide::Zero => with_zero,
    };
    let q_b = match side {
        MedianSide::One => below,
        MedianSide::Zero => below + pmf.probs[m],
    };
    if split == 0 || split > k_max || p_b < DEGENERATE_TOL || q_b < DEGENERATE_TOL {
        return Err(Error::Degenerate(format!(
            "collapsed success probability {p_b} is numerically 0 or 1"
        )));
    }
    Ok(CollapsedMargin {
        source: pmf.clone(),
        median_m: m as u32,
        median_side: side,
        p_b,
        cond_pmf_zero: CategoryPmf::from_slice(0, &pmf.probs[..split], q_b),
        cond_pmf_one: CategoryPmf::from_slice(split as u32, &pmf.probs[split..], p_b),
    })
}

impl CollapsedMargin {
    /// Map one binary value to the discrete scale using the uniform `u`.
    #[inline]
    pub fn expand_one(&self, bit: u8, u: f64) -> u32 {
        if bit == 0 {
            self.cond_pmf_zero.quantile(u)
        } else {
            self.cond_pmf_one.quantile(u)
        }
    }

    /// Correlation between the discrete variable and its collapsed binary.
    /// Expanding two binaries with correlation `d` yields discrete
    /// correlation `d * a.attenuation() * b.attenuation()`.
    pub fn attenuation(&self) -> f64 {
        let gap = self.cond_pmf_one.mean - self.cond_pmf_zero.mean;
        gap * (self.p_b * (1.0 - self.p_b)).sqrt() / self.source.variance.sqrt()
    }
}

/// Replace each binary entry with a draw from the matching conditional
/// PMF, one uniform per entry in input order.
pub fn expand(margin: &CollapsedMargin, binary: &[u8], stream: &mut RngStream) -> Result<Vec<u32>> {
    if let Some(bad) = binary.iter().find(|&&b| b > 1) {
        return Err(Error::InvalidArgument(format!("binary entry {bad} is not 0 or 1")));
    }
    Ok(binary
        .iter()
        .map(|&b| margin.expand_one(b, stream.random::<f64>()))
        .collect())
}
