//! End-to-end pipeline: build a reusable [`GenerationPlan`] once, then draw
//! datasets of any size from it.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bounds::{check_target_matrix, ep_binary_bounds, BoundsOptions, BoundsReport};
use crate::calibration::{calibrate_matrix, CalibrationOptions, PairCalibration};
use crate::collapse::{collapse_margin, CollapsedMargin};
use crate::error::{Error, Result};
use crate::gaussian::{latent_factor, nearest_pd, solve_tetrachoric, std_normal_quantile, CorrelationMatrix, PdRepairReport};
use crate::marginals::{MarginalSpec, TruncatedPmf, ValidationReport, Violation};
use crate::rng::{Phase, RngStream};
use crate::stats::PairMoments;

pub const SCHEMA_VERSION: u32 = 1;
/// Rows per generation chunk. Each chunk and column has its own streams,
/// so output does not depend on the number of worker threads.
pub const CHUNK_ROWS: usize = 4096;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanMargin {
    pub spec: MarginalSpec,
    pub collapsed: CollapsedMargin,
}

impl PlanMargin {
    pub fn pmf(&self) -> &TruncatedPmf {
        &self.collapsed.source
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationPlan {
    pub schema_version: u32,
    pub labels: Vec<String>,
    pub margins: Vec<PlanMargin>,
    pub options: CalibrationOptions,
    pub sigma_star: CorrelationMatrix,
    /// Calibrated binary correlations after repair.
    pub sigma_b: CorrelationMatrix,
    /// Latent normal correlations after repair.
    pub sigma_latent: CorrelationMatrix,
    pub binary_repair: PdRepairReport,
    pub latent_repair: PdRepairReport,
    pub calibration: Vec<PairCalibration>,
    pub bounds: BoundsReport,
}

pub fn default_labels(dim: usize) -> Vec<String> {
    (1..=dim).map(|i| format!("X{i}")).collect()
}

/// Validate every margin, prefixing violations with the margin's position.
pub fn validate_specs(specs: &[MarginalSpec]) -> ValidationReport {
    let mut all = ValidationReport::default();
    for (i, spec) in specs.iter().enumerate() {
        for v in spec.validate().violations {
            all.violations.push(Violation {
                field: format!("margins[{}].{}", i + 1, v.field),
                ..v
            });
        }
    }
    all
}

/// Truncate and collapse every margin.
pub fn collapse_specs(specs: &[MarginalSpec]) -> Result<Vec<CollapsedMargin>> {
    validate_specs(specs).into_result()?;
    specs
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let pmf = s.truncate_support()?;
            collapse_margin(&pmf).map_err(|e| match e {
                Error::Degenerate(msg) => Error::Degenerate(format!("margin {}: {msg}", i + 1)),
                other => other,
            })
        })
        .collect()
}

/// Feasibility report for a target matrix, with simulated bounds drawn at
/// the calibration sample size.
pub fn check_specs(specs: &[MarginalSpec], sigma_star: &CorrelationMatrix, opts: &CalibrationOptions) -> Result<BoundsReport> {
    let collapsed = collapse_specs(specs)?;
    check_target_matrix(
        &collapsed,
        sigma_star,
        &BoundsOptions {
            gsc_draws: opts.n_binary,
            seed: opts.seed,
        },
    )
}

pub fn build_plan(specs: &[MarginalSpec], sigma_star: &CorrelationMatrix, opts: &CalibrationOptions) -> Result<GenerationPlan> {
    build_plan_with_labels(specs, sigma_star, opts, default_labels(specs.len()))
}

pub fn build_plan_with_labels(
    specs: &[MarginalSpec],
    sigma_star: &CorrelationMatrix,
    opts: &CalibrationOptions,
    labels: Vec<String>,
) -> Result<GenerationPlan> {
    opts.validate()?;
    let dim = specs.len();
    if dim == 0 {
        return Err(Error::Dimension("at least one margin is required".into()));
    }
    if sigma_star.dim() != dim || labels.len() != dim {
        return Err(Error::Dimension(format!(
            "{dim} margins, {} labels and a {d}x{d} correlation matrix",
            labels.len(),
            d = sigma_star.dim()
        )));
    }
    let collapsed = collapse_specs(specs)?;
    let bounds = check_target_matrix(
        &collapsed,
        sigma_star,
        &BoundsOptions {
            gsc_draws: opts.n_binary,
            seed: opts.seed,
        },
    )?;
    if !bounds.is_feasible() {
        return Err(Error::Infeasible(Box::new(bounds)));
    }
    let cal = calibrate_matrix(&collapsed, sigma_star, opts)?;

    let mut latent = DMatrix::identity(dim, dim);
    for (i, j) in sigma_star.pairs() {
        let (pi, pj) = (collapsed[i].p_b, collapsed[j].p_b);
        let (lo, hi) = ep_binary_bounds(pi, pj)?;
        let rho = solve_tetrachoric(pi, pj, cal.sigma_b.get(i, j).clamp(lo, hi))?;
        latent[(i, j)] = rho;
        latent[(j, i)] = rho;
    }
    let latent_repair = nearest_pd(&CorrelationMatrix::new(latent)?)?;

    Ok(GenerationPlan {
        schema_version: SCHEMA_VERSION,
        labels,
        margins: specs
            .iter()
            .zip(collapsed)
            .map(|(spec, collapsed)| PlanMargin { spec: *spec, collapsed })
            .collect(),
        options: *opts,
        sigma_star: sigma_star.clone(),
        sigma_b: cal.sigma_b,
        sigma_latent: latent_repair.repaired.clone(),
        binary_repair: cal.repair,
        latent_repair,
        calibration: cal.pairs,
        bounds,
    })
}

impl GenerationPlan {
    pub fn dim(&self) -> usize {
        self.margins.len()
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let plan: GenerationPlan = serde_json::from_str(text)?;
        if plan.schema_version != SCHEMA_VERSION {
            return Err(Error::InvalidArgument(format!(
                "plan schema version {} is not supported (expected {SCHEMA_VERSION})",
                plan.schema_version
            )));
        }
        let dim = plan.dim();
        if [plan.sigma_star.dim(), plan.sigma_b.dim(), plan.sigma_latent.dim(), plan.labels.len()]
            .iter()
            .any(|&d| d != dim)
        {
            return Err(Error::Dimension("plan matrices and margins disagree in dimension".into()));
        }
        Ok(plan)
    }

    /// SHA-256 of the serialized plan, hex encoded.
    pub fn hash(&self) -> Result<String> {
        Ok(sha256_hex(self.to_json()?.as_bytes()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub labels: Vec<String>,
    /// Column-major values, one vector per margin.
    pub columns: Vec<Vec<u32>>,
    pub seed: u64,
    pub plan_hash: String,
    /// `None` when some column is constant.
    pub empirical_corr: Option<CorrelationMatrix>,
}

impl Dataset {
    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn row(&self, r: usize) -> Vec<u32> {
        self.columns.iter().map(|c| c[r]).collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(&self.labels)?;
        let mut buf = Vec::with_capacity(self.columns.len());
        for r in 0..self.n_rows() {
            buf.clear();
            buf.extend(self.columns.iter().map(|c| c[r].to_string()));
            w.write_record(&buf)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let labels: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let mut columns = vec![Vec::new(); labels.len()];
        for rec in r.records() {
            let rec = rec?;
            for (col, field) in columns.iter_mut().zip(rec.iter()) {
                col.push(field.parse::<u32>().map_err(|e| {
                    Error::InvalidArgument(format!("non-integer cell {field:?}: {e}"))
                })?);
            }
        }
        let mut d = Dataset {
            labels,
            columns,
            seed: 0,
            plan_hash: String::new(),
            empirical_corr: None,
        };
        d.empirical_corr = empirical_corr(&d).ok();
        Ok(d)
    }

    pub fn metadata(&self) -> DatasetMeta {
        DatasetMeta {
            seed: self.seed,
            n_rows: self.n_rows(),
            labels: self.labels.clone(),
            plan_sha256: self.plan_hash.clone(),
            empirical_corr: self.empirical_corr.clone(),
        }
    }

    /// Write the CSV to `csv_path` and the metadata JSON to `meta_path`.
    pub fn save(&self, csv_path: &Path, meta_path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(fs::File::create(csv_path)?);
        self.write_csv(&mut f)?;
        f.flush()?;
        let mut meta = serde_json::to_string_pretty(&self.metadata())?;
        meta.push('\n');
        fs::write(meta_path, meta)?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub seed: u64,
    pub n_rows: usize,
    pub labels: Vec<String>,
    pub plan_sha256: String,
    pub empirical_corr: Option<CorrelationMatrix>,
}

/// Pearson correlation matrix of the dataset's columns.
pub fn empirical_corr(data: &Dataset) -> Result<CorrelationMatrix> {
    let dim = data.columns.len();
    if data.n_rows() < 2 {
        return Err(Error::InvalidArgument("correlation needs at least two rows".into()));
    }
    let mut m = DMatrix::identity(dim, dim);
    for i in 0..dim {
        for j in (i + 1)..dim {
            let mut acc = PairMoments::default();
            for (&x, &y) in data.columns[i].iter().zip(&data.columns[j]) {
                acc.push(x as f64, y as f64);
            }
            let r = acc.correlation().ok_or_else(|| {
                Error::Degenerate(format!(
                    "column {} or {} has zero variance",
                    data.labels[i], data.labels[j]
                ))
            })?;
            m[(i, j)] = r;
            m[(j, i)] = r;
        }
    }
    for (i, c) in data.columns.iter().enumerate() {
        if c.iter().all(|&v| v == c[0]) {
            return Err(Error::Degenerate(format!("column {} has zero variance", data.labels[i])));
        }
    }
    CorrelationMatrix::new(m)
}

/// Generate `n` rows from `plan`: correlated latent normals, thresholded
/// at each margin's binary probability, then expanded to counts.
pub fn generate(plan: &GenerationPlan, n: usize, seed: u64) -> Result<Dataset> {
    let columns = generate_columns(plan, n, seed)?;
    let mut data = Dataset {
        labels: plan.labels.clone(),
        columns,
        seed,
        plan_hash: plan.hash()?,
        empirical_corr: None,
    };
    data.empirical_corr = empirical_corr(&data).ok();
    Ok(data)
}

/// Column-major generated values without metadata.
pub fn generate_columns(plan: &GenerationPlan, n: usize, seed: u64) -> Result<Vec<Vec<u32>>> {
    if n == 0 {
        return Err(Error::InvalidArgument("number of rows must be positive".into()));
    }
    let dim = plan.dim();
    let factor = latent_factor(&plan.sigma_latent)?;
    let thresholds = plan
        .margins
        .iter()
        .map(|m| std_normal_quantile(m.collapsed.p_b))
        .collect::<Result<Vec<_>>>()?;
    let n_chunks = n.div_ceil(CHUNK_ROWS);
    let chunks: Vec<Vec<Vec<u32>>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let rows = CHUNK_ROWS.min(n - c * CHUNK_ROWS);
            let mut e = vec![vec![0.0f64; rows]; dim];
            for (a, col) in e.iter_mut().enumerate() {
                let mut s = RngStream::derive(seed, Phase::Latent, c as u64, a as u64);
                for v in col.iter_mut() {
                    *v = s.sample(StandardNormal);
                }
            }
            let mut out = Vec::with_capacity(dim);
            for a in 0..dim {
                let mut s = RngStream::derive(seed, Phase::Expand, c as u64, a as u64);
                let margin = &plan.margins[a].collapsed;
                let col: Vec<u32> = (0..rows)
                    .map(|r| {
                        let mut z = 0.0;
                        for (b, eb) in e.iter().enumerate() {
                            z += factor[(a, b)] * eb[r];
                        }
                        margin.expand_one(u8::from(z <= thresholds[a]), s.random())
                    })
                    .collect();
                out.push(col);
            }
            out
        })
        .collect();
    let mut columns: Vec<Vec<u32>> = (0..dim).map(|_| Vec::with_capacity(n)).collect();
    for chunk in chunks {
        for (col, part) in columns.iter_mut().zip(chunk) {
            col.extend(part);
        }
    }
    Ok(columns)
}
