//! Pairwise search for the intermediate binary correlation that, after
//! expansion back to the discrete scale, reproduces a target correlation.

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{ep_binary_bounds, gsc_bounds, pair_bounds, BoundsReport, Interval, MIN_GSC_DRAWS};
use crate::collapse::CollapsedMargin;
use crate::error::{Error, Result};
use crate::gaussian::{nearest_pd, solve_tetrachoric, std_normal_quantile, CorrelationMatrix, PdRepairReport};
use crate::rng::{Phase, RngStream};
use crate::stats::PairMoments;

/// Distance kept from the binary bounds when updating.
pub const BOUND_MARGIN: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationOptions {
    pub n_binary: usize,
    pub tolerance: f64,
    pub step_fraction: f64,
    pub max_iterations: usize,
    pub seed: u64,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        CalibrationOptions {
            n_binary: 100_000,
            tolerance: 0.001,
            step_fraction: 0.5,
            max_iterations: 50,
            seed: 0,
        }
    }
}

impl CalibrationOptions {
    pub fn validate(&self) -> Result<()> {
        if self.n_binary < MIN_GSC_DRAWS {
            return Err(Error::InvalidArgument(format!(
                "n_binary must be at least {MIN_GSC_DRAWS}, got {}",
                self.n_binary
            )));
        }
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(Error::InvalidArgument(format!("tolerance must be positive, got {}", self.tolerance)));
        }
        if !(self.step_fraction > 0.0 && self.step_fraction <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "step_fraction must lie in (0, 1], got {}",
                self.step_fraction
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidArgument("max_iterations must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub delta_b: f64,
    pub delta_star_c: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairCalibration {
    pub pair: (usize, usize),
    pub delta_star: f64,
    pub delta_b: f64,
    pub delta_star_c: f64,
    pub iterations: usize,
    pub converged: bool,
    pub ep_bounds: Interval,
    pub gsc_bounds: Interval,
    pub trajectory: Vec<TrajectoryPoint>,
}

/// Correlation of `n` expanded pairs drawn from the binary model with
/// latent correlation `rho`.
fn simulate_expanded(
    a: &CollapsedMargin,
    b: &CollapsedMargin,
    rho: f64,
    n: usize,
    stream: &mut RngStream,
) -> Result<f64> {
    let ta = std_normal_quantile(a.p_b)?;
    let tb = std_normal_quantile(b.p_b)?;
    let s = (1.0 - rho * rho).max(0.0).sqrt();
    let mut acc = PairMoments::default();
    for _ in 0..n {
        let e1: f64 = stream.sample(StandardNormal);
        let e2: f64 = stream.sample(StandardNormal);
        let z2 = rho * e1 + s * e2;
        let ya = u8::from(e1 <= ta);
        let yb = u8::from(z2 <= tb);
        let xa = a.expand_one(ya, stream.random());
        let xb = b.expand_one(yb, stream.random());
        acc.push(xa as f64, xb as f64);
    }
    acc.correlation()
        .ok_or_else(|| Error::Degenerate("expanded calibration sample is constant".into()))
}

/// Iterate `delta_b` until the expanded correlation is within tolerance of
/// `delta_star`. Non-convergence is returned with `converged = false`.
pub fn calibrate_pair(
    a: &CollapsedMargin,
    b: &CollapsedMargin,
    delta_star: f64,
    opts: &CalibrationOptions,
    stream: &mut RngStream,
) -> Result<PairCalibration> {
    opts.validate()?;
    let (gsc_lo, gsc_hi) = gsc_bounds(&a.source, &b.source, opts.n_binary, stream)?;
    let (ep_lo, ep_hi) = ep_binary_bounds(a.p_b, b.p_b)?;
    let infeasible = !(gsc_lo..=gsc_hi).contains(&delta_star) || !(ep_lo..=ep_hi).contains(&delta_star);
    if !delta_star.is_finite() || infeasible {
        let pb = pair_bounds(0, 1, 2, a, b, delta_star, Some((gsc_lo, gsc_hi)))?;
        return Err(Error::Infeasible(Box::new(BoundsReport { pairs: vec![pb] })));
    }
    let (lo, hi) = (ep_lo + BOUND_MARGIN, ep_hi - BOUND_MARGIN);
    let mut report = PairCalibration {
        pair: (0, 1),
        delta_star,
        delta_b: delta_star,
        delta_star_c: f64::NAN,
        iterations: 0,
        converged: false,
        ep_bounds: Interval { lower: ep_lo, upper: ep_hi },
        gsc_bounds: Interval { lower: gsc_lo, upper: gsc_hi },
        trajectory: Vec::new(),
    };
    if delta_star == 0.0 {
        // independent binaries expand to independent discrete variables
        report.delta_star_c = 0.0;
        report.iterations = 1;
        report.converged = true;
        report.trajectory.push(TrajectoryPoint { delta_b: 0.0, delta_star_c: 0.0 });
        return Ok(report);
    }
    let mut delta_b = delta_star;
    for iter in 1..=opts.max_iterations {
        let rho = solve_tetrachoric(a.p_b, b.p_b, delta_b)?;
        let c = simulate_expanded(a, b, rho, opts.n_binary, stream)?;
        report.trajectory.push(TrajectoryPoint { delta_b, delta_star_c: c });
        report.delta_b = delta_b;
        report.delta_star_c = c;
        report.iterations = iter;
        if (delta_star - c).abs() <= opts.tolerance {
            report.converged = true;
            break;
        }
        delta_b = (delta_b + opts.step_fraction * (delta_star - c)).clamp(lo, hi);
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixCalibration {
    pub sigma_b: CorrelationMatrix,
    pub repair: PdRepairReport,
    pub pairs: Vec<PairCalibration>,
}

/// Calibrate every pair independently (each on its own derived stream),
/// assemble the binary correlation matrix and repair it if needed.
pub fn calibrate_matrix(
    margins: &[CollapsedMargin],
    sigma_star: &CorrelationMatrix,
    opts: &CalibrationOptions,
) -> Result<MatrixCalibration> {
    opts.validate()?;
    let dim = sigma_star.dim();
    if margins.len() != dim {
        return Err(Error::Dimension(format!(
            "{} margins but a {dim}x{dim} correlation matrix",
            margins.len()
        )));
    }
    let pairs: Vec<(usize, usize)> = sigma_star.pairs().collect();
    let pairs = pairs
        .par_iter()
        .map(|&(i, j)| {
            let mut s = RngStream::derive(opts.seed, Phase::Calibration, i as u64, j as u64);
            let mut pc = calibrate_pair(&margins[i], &margins[j], sigma_star.get(i, j), opts, &mut s)
                .map_err(|e| match e {
                    Error::Infeasible(mut r) => {
                        let dim = sigma_star.dim();
                        for p in r.pairs.iter_mut() {
                            p.i = i;
                            p.j = j;
                            p.label = crate::bounds::pair_label(i, j, dim);
                        }
                        Error::Infeasible(r)
                    }
                    other => other,
                })?;
            pc.pair = (i, j);
            Ok(pc)
        })
        .collect::<Result<Vec<_>>>()?;
    if let Some(bad) = pairs.iter().find(|p| !p.converged) {
        return Err(Error::NotConverged {
            pair: bad.pair,
            report: Box::new(bad.clone()),
        });
    }
    let mut m = nalgebra::DMatrix::identity(dim, dim);
    for p in &pairs {
        m[(p.pair.0, p.pair.1)] = p.delta_b;
        m[(p.pair.1, p.pair.0)] = p.delta_b;
    }
    let sigma_b = CorrelationMatrix::new(m)?;
    let repair = nearest_pd(&sigma_b)?;
    Ok(MatrixCalibration {
        sigma_b: repair.repaired.clone(),
        repair,
        pairs,
    })
}

/// Write calibration trajectories as CSV, one row per iteration.
pub fn write_trajectories<W: Write>(pairs: &[PairCalibration], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(["i", "j", "iteration", "delta_star", "delta_b", "delta_star_c"])?;
    for p in pairs {
        for (k, t) in p.trajectory.iter().enumerate() {
            w.write_record([
                (p.pair.0 + 1).to_string(),
                (p.pair.1 + 1).to_string(),
                (k + 1).to_string(),
                p.delta_star.to_string(),
                t.delta_b.to_string(),
                t.delta_star_c.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
