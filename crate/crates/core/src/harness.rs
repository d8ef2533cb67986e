//! Replication studies: generate many datasets from one plan, recover the
//! margins by method of moments, and summarize bias, spread and coverage.

use std::fmt;
use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::pair_label;
use crate::calibration::CalibrationOptions;
use crate::engine::{build_plan, generate_columns, GenerationPlan};
use crate::error::{Error, Result};
use crate::gaussian::{std_normal_quantile, CorrelationMatrix};
use crate::marginals::{invert_moments, mom_estimate, Family, MarginalSpec};
use crate::rng::{derive_seed, Phase, RngStream};
use crate::stats::{mean_var, pearson};

pub const DEFAULT_REPLICATIONS: usize = 200;
pub const DEFAULT_RESAMPLES: usize = 500;
pub const DEFAULT_LEVEL: f64 = 0.95;
const MIN_CI_SAMPLE: usize = 30;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub specs: Vec<MarginalSpec>,
    pub sigma_star: CorrelationMatrix,
    pub n: usize,
    pub replications: usize,
}

impl Scenario {
    pub fn with_replications(mut self, r: usize) -> Self {
        self.replications = r;
        self
    }

    pub fn with_n(mut self, n: usize) -> Self {
        self.n = n;
        self
    }
}

fn gp(theta: f64, lambda: f64) -> MarginalSpec {
    MarginalSpec::GeneralizedPoisson { theta, lambda }
}

fn nb(r: u32, p: f64) -> MarginalSpec {
    MarginalSpec::NegativeBinomial { r, p }
}

fn binom(n: u32, p: f64) -> MarginalSpec {
    MarginalSpec::Binomial { n, p }
}

fn upper(dim: usize, entries: &[f64]) -> CorrelationMatrix {
    CorrelationMatrix::from_upper_triangle(dim, entries).expect("preset matrix is valid")
}

fn preset_base(kind: &str) -> Option<(Vec<MarginalSpec>, CorrelationMatrix)> {
    let out = match kind {
        "gp" => (
            [(5.14, 0.6445), (10.67, 0.1420), (30.38, -0.1378), (50.02, -0.0499), (2.0, 0.365)]
                .iter()
                .map(|&(t, l)| gp(t, l))
                .collect(),
            upper(
                5,
                &[0.0644, 0.1041, -0.0658, 0.2619, 0.1008, 0.1246, -0.0122, 0.0867, 0.1724, 0.0452],
            ),
        ),
        "nb" => (
            [(3, 0.33), (8, 0.45), (15, 0.24), (20, 0.61), (43, 0.58)]
                .iter()
                .map(|&(r, p)| nb(r, p))
                .collect(),
            upper(5, &[0.5; 10]),
        ),
        "binomial" => (
            [(5, 0.68), (12, 0.36), (25, 0.45), (30, 0.51), (40, 0.57)]
                .iter()
                .map(|&(n, p)| binom(n, p))
                .collect(),
            upper(5, &[0.45, 0.40, 0.35, 0.30, 0.45, 0.40, 0.35, 0.45, 0.40, 0.45]),
        ),
        "mixed" => (
            vec![
                gp(9.39, -0.023),
                gp(18.6, 0.1203),
                nb(6, 0.54),
                nb(15, 0.47),
                binom(20, 0.62),
                binom(40, 0.58),
            ],
            upper(
                6,
                &[
                    0.28, 0.31, 0.27, 0.24, 0.17, 0.18, 0.26, 0.11, 0.12, 0.14, 0.23, 0.26, 0.24, 0.13, 0.15,
                ],
            ),
        ),
        _ => return None,
    };
    Some(out)
}

pub const PRESET_KINDS: [&str; 4] = ["gp", "nb", "binomial", "mixed"];

/// The four study designs at both sample sizes: `gp-small`, `gp-large`,
/// `nb-small`, ..., `mixed-large`.
pub fn preset_scenarios() -> Vec<Scenario> {
    PRESET_KINDS
        .iter()
        .flat_map(|kind| ["small", "large"].map(|size| preset(&format!("{kind}-{size}")).expect("known preset")))
        .collect()
}

/// Look up a preset by name (`<kind>-small` is N = 200, `<kind>-large` is N = 2000).
pub fn preset(name: &str) -> Option<Scenario> {
    let (kind, size) = name.rsplit_once('-')?;
    let n = match size {
        "small" => 200,
        "large" => 2000,
        _ => return None,
    };
    let (specs, sigma_star) = preset_base(kind)?;
    Some(Scenario {
        name: name.to_string(),
        specs,
        sigma_star,
        n,
        replications: DEFAULT_REPLICATIONS,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarnessOptions {
    pub calibration: CalibrationOptions,
    pub resamples: usize,
    pub level: f64,
}

impl Default for HarnessOptions {
    fn default() -> Self {
        HarnessOptions {
            calibration: CalibrationOptions::default(),
            resamples: DEFAULT_RESAMPLES,
            level: DEFAULT_LEVEL,
        }
    }
}

/// Fisher z interval for a sample correlation `r` from `n` pairs.
pub fn fisher_ci(r: f64, n: usize, level: f64) -> Result<(f64, f64)> {
    if n < 4 {
        return Err(Error::InvalidArgument("Fisher interval needs at least 4 pairs".into()));
    }
    let z_star = std_normal_quantile(0.5 + level / 2.0)?;
    let z = r.clamp(-1.0 + 1e-15, 1.0 - 1e-15).atanh();
    let half = z_star / ((n - 3) as f64).sqrt();
    Ok(((z - half).tanh(), (z + half).tanh()))
}

/// Linear-interpolation percentile of sorted values.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Percentile bootstrap intervals for a two-valued statistic of the
/// resample mean and `n - 1` variance. Resamples where `stat` returns
/// `None` are dropped.
pub fn bootstrap_percentile<F>(
    sample: &[f64],
    resamples: usize,
    level: f64,
    stream: &mut RngStream,
    stat: F,
) -> Result<[(f64, f64); 2]>
where
    F: Fn(f64, f64) -> Option<[f64; 2]>,
{
    if sample.len() < MIN_CI_SAMPLE {
        return Err(Error::InvalidArgument(format!(
            "bootstrap needs at least {MIN_CI_SAMPLE} observations"
        )));
    }
    let n = sample.len();
    let nf = n as f64;
    let mut est = [Vec::with_capacity(resamples), Vec::with_capacity(resamples)];
    for _ in 0..resamples {
        let mut acc = 0.0f64;
        let mut draws = Vec::with_capacity(n);
        for _ in 0..n {
            let x = sample[stream.random_range(0..n)];
            acc += x;
            draws.push(x);
        }
        let mean = acc / nf;
        let var = draws.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (nf - 1.0);
        if let Some(v) = stat(mean, var) {
            est[0].push(v[0]);
            est[1].push(v[1]);
        }
    }
    let alpha = 1.0 - level;
    let mut out = [(0.0, 0.0); 2];
    for (k, e) in est.iter_mut().enumerate() {
        if e.len() < 2 {
            return Err(Error::Bootstrap("fewer than two usable resamples".into()));
        }
        e.sort_by(f64::total_cmp);
        if e[0] == e[e.len() - 1] {
            return Err(Error::Bootstrap("all resamples identical".into()));
        }
        out[k] = (percentile(e, alpha / 2.0), percentile(e, 1.0 - alpha / 2.0));
    }
    Ok(out)
}

/// Percentile bootstrap intervals for both moment-estimated parameters of
/// one margin. Resamples whose moments are infeasible for the family are
/// dropped.
pub fn bootstrap_ci(
    sample: &[u32],
    family: Family,
    resamples: usize,
    level: f64,
    stream: &mut RngStream,
) -> Result<[(f64, f64); 2]> {
    let x: Vec<f64> = sample.iter().map(|&v| v as f64).collect();
    bootstrap_percentile(&x, resamples, level, stream, |m, v| {
        invert_moments(m, v, family).ok().map(|p| p.values())
    })
}

pub enum CiKind<'a> {
    MarginalParam { sample: &'a [u32], family: Family },
    Correlation { x: &'a [u32], y: &'a [u32] },
}

/// Confidence interval(s) for an estimate: Fisher z for a correlation (one
/// interval), bootstrap percentile for a margin's two parameters.
pub fn ci_for_estimate(kind: CiKind<'_>, level: f64, resamples: usize, stream: &mut RngStream) -> Result<Vec<(f64, f64)>> {
    match kind {
        CiKind::Correlation { x, y } => {
            if x.len() < MIN_CI_SAMPLE || x.len() != y.len() {
                return Err(Error::InvalidArgument(format!(
                    "correlation interval needs two equally long samples of at least {MIN_CI_SAMPLE}"
                )));
            }
            let r = pearson(x, y).ok_or_else(|| Error::Degenerate("constant column".into()))?;
            Ok(vec![fisher_ci(r, x.len(), level)?])
        }
        CiKind::MarginalParam { sample, family } => {
            Ok(bootstrap_ci(sample, family, resamples, level, stream)?.to_vec())
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowKind {
    Parameter,
    Correlation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub label: String,
    pub kind: RowKind,
    pub tv: f64,
    pub ae: f64,
    pub sd: f64,
    pub rb: f64,
    pub sb: f64,
    pub rmse: f64,
    pub cr: f64,
    /// Replicates contributing an estimate.
    pub n_used: usize,
    /// Replicates whose estimate was infeasible.
    pub n_excluded: usize,
    /// Replicates contributing a confidence interval.
    pub n_covered_den: usize,
    pub estimates: Vec<f64>,
}

impl EvalRow {
    fn from_estimates(label: String, kind: RowKind, tv: f64, estimates: Vec<f64>, hits: usize, ci_count: usize, excluded: usize) -> Self {
        let n = estimates.len();
        let (ae, sd) = if n == 0 {
            (f64::NAN, f64::NAN)
        } else if n == 1 {
            (estimates[0], f64::NAN)
        } else {
            let (m, v) = mean_var(&estimates);
            (m, v.sqrt())
        };
        let rmse = (estimates.iter().map(|e| (e - tv).powi(2)).sum::<f64>() / n as f64).sqrt();
        EvalRow {
            label,
            kind,
            tv,
            ae,
            sd,
            rb: ((ae - tv) / tv).abs() * 100.0,
            sb: (ae - tv).abs() / sd * 100.0,
            rmse,
            cr: hits as f64 / ci_count as f64 * 100.0,
            n_used: n,
            n_excluded: excluded,
            n_covered_den: ci_count,
            estimates,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalTable {
    pub scenario: String,
    pub n: usize,
    pub replications: usize,
    pub seed: u64,
    pub rows: Vec<EvalRow>,
}

impl EvalTable {
    pub fn row(&self, label: &str) -> Option<&EvalRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    pub fn parameters(&self) -> impl Iterator<Item = &EvalRow> {
        self.rows.iter().filter(|r| r.kind == RowKind::Parameter)
    }

    pub fn correlations(&self) -> impl Iterator<Item = &EvalRow> {
        self.rows.iter().filter(|r| r.kind == RowKind::Correlation)
    }

    /// True when SD (and so SB) is undefined because fewer than two
    /// replicates contributed.
    pub fn sd_undefined(&self) -> bool {
        self.rows.iter().any(|r| r.sd.is_nan())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(["parameter", "kind", "TV", "AE", "SD", "RB", "SB", "RMSE", "CR", "n_used", "n_excluded"])?;
        for r in &self.rows {
            w.write_record([
                r.label.clone(),
                format!("{:?}", r.kind).to_lowercase(),
                fmt_num(r.tv),
                fmt_num(r.ae),
                fmt_num(r.sd),
                fmt_num(r.rb),
                fmt_num(r.sb),
                fmt_num(r.rmse),
                fmt_num(r.cr),
                r.n_used.to_string(),
                r.n_excluded.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn fmt_num(x: f64) -> String {
    if x.is_finite() {
        x.to_string()
    } else {
        "NA".to_string()
    }
}

fn fmt4(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.4}")
    } else {
        "NA".to_string()
    }
}

impl fmt::Display for EvalTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} (N = {}, R = {})", self.scenario, self.n, self.replications)?;
        writeln!(
            f,
            "{:<12} {:>9} {:>9} {:>8} {:>8} {:>8} {:>8} {:>6} {:>5}",
            "Parameter", "TV", "AE", "SD", "RB", "SB", "RMSE", "CR", "excl"
        )?;
        let mut last = None;
        for r in &self.rows {
            if last.is_some() && last != Some(r.kind) {
                writeln!(f)?;
            }
            last = Some(r.kind);
            writeln!(
                f,
                "{:<12} {:>9} {:>9} {:>8} {:>8} {:>8} {:>8} {:>6} {:>5}",
                r.label,
                fmt4(r.tv),
                fmt4(r.ae),
                fmt4(r.sd),
                fmt4(r.rb),
                fmt4(r.sb),
                fmt4(r.rmse),
                if r.cr.is_finite() { format!("{:.1}", r.cr) } else { "NA".into() },
                r.n_excluded
            )?;
        }
        if self.sd_undefined() {
            writeln!(f, "note: SD and SB are undefined with fewer than two usable replicates")?;
        }
        Ok(())
    }
}

/// Label and true value of each marginal parameter, in table order: families
/// in order of first appearance, then parameter slot, then margin.
fn parameter_layout(specs: &[MarginalSpec]) -> Vec<(String, usize, usize)> {
    let mut families: Vec<Family> = Vec::new();
    for s in specs {
        if !families.contains(&s.family()) {
            families.push(s.family());
        }
    }
    let mixed = families.len() > 1;
    let mut out = Vec::new();
    for fam in families {
        let members: Vec<usize> = (0..specs.len()).filter(|&i| specs[i].family() == fam).collect();
        for slot in 0..2 {
            for (k, &i) in members.iter().enumerate() {
                let name = specs[i].parameter_names()[slot];
                let label = if mixed {
                    format!("{name}_{}{}", fam.short_name(), k + 1)
                } else {
                    format!("{name}{}", k + 1)
                };
                out.push((label, i, slot));
            }
        }
    }
    out
}

/// Estimates of a margin's two parameters and their intervals, if any.
type ParamResult = ([f64; 2], Option<[(f64, f64); 2]>);

struct ReplicateResult {
    /// Per margin; `None` when the replicate was excluded.
    params: Vec<Option<ParamResult>>,
    corrs: Vec<Option<(f64, (f64, f64))>>,
}

fn run_one(plan: &GenerationPlan, n: usize, seed: u64, rep: usize, opts: &HarnessOptions) -> Result<ReplicateResult> {
    let cols = generate_columns(plan, n, derive_seed(seed, Phase::Replicate, rep as u64))?;
    let params = plan
        .margins
        .iter()
        .enumerate()
        .map(|(j, m)| {
            let fam = m.spec.family();
            let est = mom_estimate(&cols[j], fam).ok()?;
            let ci = if opts.resamples > 0 {
                let mut s = RngStream::derive(seed, Phase::Bootstrap, rep as u64, j as u64);
                bootstrap_ci(&cols[j], fam, opts.resamples, opts.level, &mut s).ok()
            } else {
                None
            };
            Some((est.values(), ci))
        })
        .collect();
    let corrs = plan
        .sigma_star
        .pairs()
        .map(|(a, b)| {
            let r = pearson(&cols[a], &cols[b])?;
            Some((r, fisher_ci(r, n, opts.level).ok()?))
        })
        .collect();
    Ok(ReplicateResult { params, corrs })
}

/// Replication study on an already built plan.
pub fn run_with_plan(scenario: &Scenario, plan: &GenerationPlan, seed: u64, opts: &HarnessOptions) -> Result<EvalTable> {
    if scenario.replications == 0 {
        return Err(Error::InvalidArgument("at least one replication is required".into()));
    }
    if scenario.n < 2 {
        return Err(Error::InvalidArgument("datasets need at least two rows".into()));
    }
    let results = (0..scenario.replications)
        .into_par_iter()
        .map(|rep| run_one(plan, scenario.n, seed, rep, opts))
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    for (label, margin, slot) in parameter_layout(&scenario.specs) {
        let tv = scenario.specs[margin].parameter_values()[slot];
        let mut est = Vec::new();
        let (mut hits, mut ci_count, mut excluded) = (0, 0, 0);
        for res in &results {
            match &res.params[margin] {
                None => excluded += 1,
                Some((v, ci)) => {
                    est.push(v[slot]);
                    if let Some(ci) = ci {
                        ci_count += 1;
                        if ci[slot].0 <= tv && tv <= ci[slot].1 {
                            hits += 1;
                        }
                    }
                }
            }
        }
        if est.is_empty() {
            return Err(Error::Estimation(format!("{label}: moment estimation failed in every replicate")));
        }
        rows.push(EvalRow::from_estimates(label, RowKind::Parameter, tv, est, hits, ci_count, excluded));
    }
    let dim = scenario.sigma_star.dim();
    for (k, (a, b)) in scenario.sigma_star.pairs().enumerate() {
        let tv = scenario.sigma_star.get(a, b);
        let mut est = Vec::new();
        let (mut hits, mut excluded) = (0, 0);
        for res in &results {
            match res.corrs[k] {
                None => excluded += 1,
                Some((r, (lo, hi))) => {
                    est.push(r);
                    if lo <= tv && tv <= hi {
                        hits += 1;
                    }
                }
            }
        }
        let count = est.len();
        rows.push(EvalRow::from_estimates(pair_label(a, b, dim), RowKind::Correlation, tv, est, hits, count, excluded));
    }
    Ok(EvalTable {
        scenario: scenario.name.clone(),
        n: scenario.n,
        replications: scenario.replications,
        seed,
        rows,
    })
}

/// Calibration options used by [`run_replication`] for a given master seed.
pub fn plan_options(seed: u64, base: &CalibrationOptions) -> CalibrationOptions {
    CalibrationOptions {
        seed: derive_seed(seed, Phase::Plan, 0),
        ..*base
    }
}

/// Build the scenario's plan once, then run every replicate against it.
pub fn run_replication(scenario: &Scenario, seed: u64) -> Result<EvalTable> {
    run_replication_with(scenario, seed, &HarnessOptions::default())
}

pub fn run_replication_with(scenario: &Scenario, seed: u64, opts: &HarnessOptions) -> Result<EvalTable> {
    let plan = build_plan(&scenario.specs, &scenario.sigma_star, &plan_options(seed, &opts.calibration))?;
    run_with_plan(scenario, &plan, seed, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_transcribed() {
        let all = preset_scenarios();
        assert_eq!(all.len(), 8);
        let gp = preset("gp-large").unwrap();
        let thetas: Vec<f64> = gp.specs.iter().map(|s| s.parameter_values()[0]).collect();
        assert_eq!(thetas, vec![5.14, 10.67, 30.38, 50.02, 2.0]);
        assert_eq!(gp.sigma_star.get(0, 4), 0.2619);
        assert_eq!(gp.sigma_star.get(4, 1), -0.0122);
        let b = preset("binomial-small").unwrap();
        assert_eq!(b.n, 200);
        assert_eq!(b.sigma_star.rows()[0], vec![1.0, 0.45, 0.40, 0.35, 0.30]);
        let m = preset("mixed-large").unwrap();
        let lambdas: Vec<f64> = m.specs[..2].iter().map(|s| s.parameter_values()[1]).collect();
        assert_eq!(lambdas, vec![-0.023, 0.1203]);
        assert!(preset("gp-medium").is_none());
    }

    #[test]
    fn fisher_zero() {
        let (lo, hi) = fisher_ci(0.0, 2000, 0.95).unwrap();
        assert!((hi - 0.0438).abs() < 5e-5, "{hi}");
        assert!((lo + hi).abs() < 1e-15);
    }

    #[test]
    fn labels() {
        let m = preset("mixed-large").unwrap();
        let l: Vec<String> = parameter_layout(&m.specs).into_iter().map(|x| x.0).collect();
        assert_eq!(&l[..4], &["theta_GP1", "theta_GP2", "lambda_GP1", "lambda_GP2"]);
        assert_eq!(l.len(), 12);
        let g = preset("gp-large").unwrap();
        assert_eq!(parameter_layout(&g.specs)[5].0, "lambda1");
    }

    #[test]
    fn row_arithmetic() {
        let r = EvalRow::from_estimates("x".into(), RowKind::Parameter, 2.0, vec![1.0, 2.0, 4.0], 2, 3, 1);
        assert!((r.ae - 7.0 / 3.0).abs() < 1e-15);
        assert!((r.rb - 100.0 / 6.0).abs() < 1e-12);
        assert!((r.rmse - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!((r.cr - 200.0 / 3.0).abs() < 1e-12);
        let one = EvalRow::from_estimates("x".into(), RowKind::Parameter, 2.0, vec![1.0], 1, 1, 0);
        assert!(one.sd.is_nan() && one.sb.is_nan());
    }
}
