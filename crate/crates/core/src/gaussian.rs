//! Normal and bivariate-normal machinery for the latent Gaussian layer:
//! quantiles, the bivariate normal CDF, the tetrachoric root solve, latent
//! sampling, thresholding, and nearest correlation-matrix repair.

use std::f64::consts::{PI, SQRT_2};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use libm::erfc;

use crate::bounds::ep_binary_bounds;
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Symmetry tolerance for correlation matrices.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Eigenvalue floor for repaired matrices; inputs at or above it are left alone.
pub const PD_FLOOR: f64 = 1e-8;
/// Inputs with a minimum eigenvalue in `[-PSD_NOISE, PD_FLOOR)` are floored
/// instead of re-projected.
pub const PSD_NOISE: f64 = 1e-10;
const REPAIR_TOL: f64 = 1e-7;
const REPAIR_MAX_ITER: usize = 200;
/// Edge of the search interval for the tetrachoric root.
pub const RHO_EDGE: f64 = 1.0 - 1e-9;
const TETRACHORIC_RESIDUAL: f64 = 1e-8;
const TETRACHORIC_MAX_ITER: usize = 200;

/// Symmetric matrix with unit diagonal and entries in `[-1, 1]`.
/// Not necessarily positive semidefinite.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationMatrix(DMatrix<f64>);

impl CorrelationMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Dimension(format!(
                "correlation matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let j = m.nrows();
        if j == 0 {
            return Err(Error::Dimension("correlation matrix is empty".into()));
        }
        for r in 0..j {
            if (m[(r, r)] - 1.0).abs() > SYMMETRY_TOL {
                return Err(Error::InvalidArgument(format!(
                    "diagonal entry ({}, {}) is {}, expected 1",
                    r + 1,
                    r + 1,
                    m[(r, r)]
                )));
            }
            for c in 0..j {
                let v = m[(r, c)];
                if !v.is_finite() || !(-1.0..=1.0).contains(&v) {
                    return Err(Error::InvalidArgument(format!(
                        "entry ({}, {}) = {v} outside [-1, 1]",
                        r + 1,
                        c + 1
                    )));
                }
                if (v - m[(c, r)]).abs() > SYMMETRY_TOL {
                    return Err(Error::InvalidArgument(format!(
                        "matrix not symmetric at ({}, {})",
                        r + 1,
                        c + 1
                    )));
                }
            }
        }
        let mut m = m;
        symmetrize_unit_diagonal(&mut m);
        Ok(CorrelationMatrix(m))
    }

    pub fn identity(dim: usize) -> Self {
        CorrelationMatrix(DMatrix::identity(dim, dim))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let j = rows.len();
        if rows.iter().any(|r| r.len() != j) {
            return Err(Error::Dimension("correlation rows must form a square matrix".into()));
        }
        Self::new(DMatrix::from_fn(j, j, |r, c| rows[r][c]))
    }

    /// Build from the strictly upper-triangular entries in row-major order,
    /// `(1,2), (1,3), ..., (1,J), (2,3), ...`, which is also the lower
    /// triangle in column-major order.
    pub fn from_upper_triangle(dim: usize, entries: &[f64]) -> Result<Self> {
        let expected = dim * dim.saturating_sub(1) / 2;
        if entries.len() != expected {
            return Err(Error::Dimension(format!(
                "{dim}x{dim} matrix needs {expected} off-diagonal entries, got {}",
                entries.len()
            )));
        }
        let mut m = DMatrix::identity(dim, dim);
        let mut it = entries.iter();
        for r in 0..dim {
            for c in (r + 1)..dim {
                let v = *it.next().expect("length checked");
                m[(r, c)] = v;
                m[(c, r)] = v;
            }
        }
        Self::new(m)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.0[(r, c)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim())
            .map(|r| (0..self.dim()).map(|c| self.0[(r, c)]).collect())
            .collect()
    }

    /// Index pairs `(i, j)` with `i < j`, in row-major upper-triangle order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> {
        let j = self.dim();
        (0..j).flat_map(move |a| ((a + 1)..j).map(move |b| (a, b)))
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.0)
    }

    pub(crate) fn from_matrix_unchecked(m: DMatrix<f64>) -> Self {
        CorrelationMatrix(m)
    }
}

impl Serialize for CorrelationMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for CorrelationMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        CorrelationMatrix::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

fn symmetrize_unit_diagonal(m: &mut DMatrix<f64>) {
    let j = m.nrows();
    for r in 0..j {
        m[(r, r)] = 1.0;
        for c in (r + 1)..j {
            let v = 0.5 * (m[(r, c)] + m[(c, r)]);
            m[(r, c)] = v;
            m[(c, r)] = v;
        }
    }
}

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// `Phi(x)`.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Standard normal density.
pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Standard normal quantile (Wichura's AS 241, followed by one Halley step).
pub fn std_normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidArgument(format!("normal quantile level {p} outside (0, 1)")));
    }
    let z = ppnd16(p);
    // Halley refinement against the erfc-based CDF
    let e = std_normal_cdf(z) - p;
    let u = e / std_normal_pdf(z);
    Ok(z - u / (1.0 + 0.5 * z * u))
}

#[allow(clippy::excessive_precision)]
fn ppnd16(p: f64) -> f64 {
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q
            * (((((((2509.0809287301226727 * r + 33430.575583588128105) * r
                + 67265.770927008700853)
                * r
                + 45921.953931549871457)
                * r
                + 13731.693765509461125)
                * r
                + 1971.5909503065514427)
                * r
                + 133.14166789178437745)
                * r
                + 3.387132872796366608)
            / (((((((5226.495278852545925 * r + 28729.085735721942674) * r
                + 39307.89580009271061)
                * r
                + 21213.794301586595867)
                * r
                + 5394.1960214247511077)
                * r
                + 687.1870074920579083)
                * r
                + 42.313330701600911252)
                * r
                + 1.0);
    }
    let mut r = if q < 0.0 { p } else { 1.0 - p };
    r = (-r.ln()).sqrt();
    let val = if r <= 5.0 {
        r -= 1.6;
        (((((((7.7454501427834140764e-4 * r + 0.0227238449892691845833) * r
            + 0.24178072517745061177)
            * r
            + 1.27045825245236838258)
            * r
            + 3.64784832476320460504)
            * r
            + 5.7694972214606914055)
            * r
            + 4.6303378461565452959)
            * r
            + 1.42343711074968357734)
            / (((((((1.05075007164441684324e-9 * r + 5.475938084995344946e-4) * r
                + 0.0151986665636164571966)
                * r
                + 0.14810397642748007459)
                * r
                + 0.68976733498510000455)
                * r
                + 1.6763848301838038494)
                * r
                + 2.05319162663775882187)
                * r
                + 1.0)
    } else {
        r -= 5.0;
        (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r
            + 0.0012426609473880784386)
            * r
            + 0.026532189526576123093)
            * r
            + 0.29656057182850489123)
            * r
            + 1.7848265399172913358)
            * r
            + 5.4637849111641143699)
            * r
            + 6.6579046435011037772)
            / (((((((2.04426310338993978564e-15 * r + 1.4215117583164458887e-7) * r
                + 1.8463183175100546818e-5)
                * r
                + 7.868691311456132591e-4)
                * r
                + 0.0148753612908506148525)
                * r
                + 0.13692988092273580531)
                * r
                + 0.59983220655588793769)
                * r
                + 1.0)
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

// Gauss-Legendre half-rules (weight, abscissa) on [-1, 1] for 6, 12 and 20 points.
#[allow(clippy::excessive_precision)]
const GL6: [(f64, f64); 3] = [
    (0.1713244923791705, 0.9324695142031522),
    (0.3607615730481384, 0.6612093864662647),
    (0.4679139345726904, 0.2386191860831970),
];
#[allow(clippy::excessive_precision)]
const GL12: [(f64, f64); 6] = [
    (0.04717533638651177, 0.9815606342467191),
    (0.1069393259953183, 0.9041172563704750),
    (0.1600783285433464, 0.7699026741943050),
    (0.2031674267230659, 0.5873179542866171),
    (0.2334925365383547, 0.3678314989981802),
    (0.2491470458134029, 0.1252334085114692),
];
#[allow(clippy::excessive_precision)]
const GL20: [(f64, f64); 10] = [
    (0.01761400713915212, 0.9931285991850949),
    (0.04060142980038694, 0.9639719272779138),
    (0.06267204833410906, 0.9122344282513259),
    (0.08327674157670475, 0.8391169718222188),
    (0.1019301198172404, 0.7463319064601508),
    (0.1181945319615184, 0.6360536807265150),
    (0.1316886384491766, 0.5108670019508271),
    (0.1420961093183821, 0.3737060887154196),
    (0.1491729864726037, 0.2277858511416451),
    (0.1527533871307259, 0.07652652113349733),
];

/// `P(X > h, Y > k)` for standard bivariate normal `(X, Y)` with
/// correlation `r`, by Gauss-Legendre quadrature of the single-integral
/// (Drezner-Wesolowsky) representation; near `|r| = 1` the integrand is
/// expanded around the singularity first.
fn bvn_upper(h: f64, k: f64, r: f64) -> f64 {
    if h == f64::INFINITY || k == f64::INFINITY {
        return 0.0;
    }
    if h == f64::NEG_INFINITY {
        return if k == f64::NEG_INFINITY { 1.0 } else { std_normal_cdf(-k) };
    }
    if k == f64::NEG_INFINITY {
        return std_normal_cdf(-h);
    }
    if r == 0.0 {
        return std_normal_cdf(-h) * std_normal_cdf(-k);
    }
    let two_pi = 2.0 * PI;
    let rule: &[(f64, f64)] = if r.abs() < 0.3 {
        &GL6
    } else if r.abs() < 0.75 {
        &GL12
    } else {
        &GL20
    };
    let mut k = k;
    let mut hk = h * k;
    let mut bvn = 0.0;
    if r.abs() < 0.925 {
        let hs = 0.5 * (h * h + k * k);
        let asr = 0.5 * r.asin();
        for &(w, x) in rule {
            for s in [1.0 - x, 1.0 + x] {
                let sn = (asr * s).sin();
                bvn += w * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
            }
        }
        return (bvn * asr / two_pi + std_normal_cdf(-h) * std_normal_cdf(-k)).clamp(0.0, 1.0);
    }
    if r < 0.0 {
        k = -k;
        hk = -hk;
    }
    if r.abs() < 1.0 {
        let a_s = (1.0 - r) * (1.0 + r);
        let mut a = a_s.sqrt();
        let b_s = (h - k) * (h - k);
        let c = (4.0 - hk) / 8.0;
        let d = (12.0 - hk) / 80.0;
        let asr = -0.5 * (b_s / a_s + hk);
        if asr > -100.0 {
            bvn = a * asr.exp() * (1.0 - c * (b_s - a_s) * (1.0 - d * b_s) / 3.0 + c * d * a_s * a_s);
        }
        if hk > -100.0 {
            let b = b_s.sqrt();
            let sp = two_pi.sqrt() * std_normal_cdf(-b / a);
            bvn -= (-0.5 * hk).exp() * sp * b * (1.0 - c * b_s * (1.0 - d * b_s) / 3.0);
        }
        a *= 0.5;
        let mut acc = 0.0;
        for &(w, x) in rule {
            for s in [1.0 - x, 1.0 + x] {
                let xs = (a * s) * (a * s);
                let asr = -0.5 * (b_s / xs + hk);
                if asr > -100.0 {
                    let sp = 1.0 + c * xs * (1.0 + 5.0 * d * xs);
                    let rs = (1.0 - xs).sqrt();
                    let ep = (-0.5 * hk * xs / ((1.0 + rs) * (1.0 + rs))).exp() / rs;
                    acc += w * asr.exp() * (sp - ep);
                }
            }
        }
        bvn = (a * acc - bvn) / two_pi;
    }
    let out = if r > 0.0 {
        bvn + std_normal_cdf(-h.max(k))
    } else if h >= k {
        -bvn
    } else {
        let l = if h < 0.0 {
            std_normal_cdf(k) - std_normal_cdf(h)
        } else {
            std_normal_cdf(-h) - std_normal_cdf(-k)
        };
        l - bvn
    };
    out.clamp(0.0, 1.0)
}

/// Standard bivariate normal CDF `P(Z1 <= x1, Z2 <= x2)` with correlation `rho`.
/// `|rho| = 1` is handled as the comonotone / countermonotone limit.
pub fn bvn_cdf(x1: f64, x2: f64, rho: f64) -> Result<f64> {
    if x1.is_nan() || x2.is_nan() || !rho.is_finite() {
        return Err(Error::InvalidArgument("bivariate normal CDF needs non-NaN limits and finite rho".into()));
    }
    if !(-1.0..=1.0).contains(&rho) {
        return Err(Error::InvalidArgument(format!("correlation {rho} outside [-1, 1]")));
    }
    if rho == 1.0 {
        return Ok(std_normal_cdf(x1.min(x2)));
    }
    if rho == -1.0 {
        return Ok((std_normal_cdf(x1) - std_normal_cdf(-x2)).max(0.0));
    }
    Ok(bvn_upper(-x1, -x2, rho))
}

/// Left-hand side minus right-hand side of the binary/latent correlation
/// equation, as a function of the latent correlation.
struct TetrachoricEquation {
    zj: f64,
    zk: f64,
    target: f64,
}

impl TetrachoricEquation {
    fn eval(&self, rho: f64) -> f64 {
        bvn_upper(-self.zj, -self.zk, rho) - self.target
    }
}

/// Latent normal correlation `rho` that makes two thresholded normals with
/// success probabilities `p_j`, `p_k` have Pearson correlation `delta`.
pub fn solve_tetrachoric(p_j: f64, p_k: f64, delta: f64) -> Result<f64> {
    let (lo, hi) = ep_binary_bounds(p_j, p_k)?;
    if !delta.is_finite() || delta < lo - 1e-12 || delta > hi + 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "binary correlation {delta} outside feasible range [{lo}, {hi}] for p = ({p_j}, {p_k})"
        )));
    }
    let eq = TetrachoricEquation {
        zj: std_normal_quantile(p_j)?,
        zk: std_normal_quantile(p_k)?,
        target: delta * (p_j * (1.0 - p_j) * p_k * (1.0 - p_k)).sqrt() + p_j * p_k,
    };
    let (mut a, mut b) = (-RHO_EDGE, RHO_EDGE);
    let (mut fa, mut fb) = (eq.eval(a), eq.eval(b));
    if fa >= 0.0 {
        if fa <= TETRACHORIC_RESIDUAL {
            return Ok(a);
        }
        return Err(Error::NotBracketed(format!("delta {delta} below attainable range")));
    }
    if fb <= 0.0 {
        if -fb <= TETRACHORIC_RESIDUAL {
            return Ok(b);
        }
        return Err(Error::NotBracketed(format!("delta {delta} above attainable range")));
    }
    brent(&|x| eq.eval(x), &mut a, &mut b, &mut fa, &mut fb)
}

/// Brent's method on a sign-changing bracket. Stops on an exact zero, a
/// bracket narrower than ~1e-14, or the iteration cap.
fn brent(f: &dyn Fn(f64) -> f64, a: &mut f64, b: &mut f64, fa: &mut f64, fb: &mut f64) -> Result<f64> {
    let xtol = 1e-14;
    let (mut c, mut fc) = (*a, *fa);
    let mut d = *b - *a;
    let mut e = d;
    for _ in 0..TETRACHORIC_MAX_ITER {
        if (*fb > 0.0) == (fc > 0.0) {
            c = *a;
            fc = *fa;
            d = *b - *a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            *a = *b;
            *b = c;
            c = *a;
            *fa = *fb;
            *fb = fc;
            fc = *fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - *b);
        if m.abs() <= tol || *fb == 0.0 {
            return Ok(*b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = *fb / *fa;
            let (mut p, mut q);
            if *a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qq = *fa / fc;
                let r = *fb / fc;
                p = s * (2.0 * m * qq * (qq - r) - (*b - *a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        *a = *b;
        *fa = *fb;
        *b += if d.abs() > tol { d } else { tol.copysign(m) };
        *fb = f(*b);
    }
    if fb.abs() <= TETRACHORIC_RESIDUAL {
        Ok(*b)
    } else {
        Err(Error::NotBracketed("root search hit the iteration cap".into()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PdRepairReport {
    pub input: CorrelationMatrix,
    pub repaired: CorrelationMatrix,
    pub was_repaired: bool,
    pub min_eigenvalue_before: f64,
    pub min_eigenvalue_after: f64,
    pub max_abs_change: f64,
    pub iterations: usize,
}

fn project_psd(m: &DMatrix<f64>, floor: f64) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let d = eig.eigenvalues.map(|v| v.max(floor));
    let v = &eig.eigenvectors;
    let mut out = v * DMatrix::from_diagonal(&d) * v.transpose();
    // exact symmetry
    let j = out.nrows();
    for r in 0..j {
        for c in (r + 1)..j {
            let s = 0.5 * (out[(r, c)] + out[(c, r)]);
            out[(r, c)] = s;
            out[(c, r)] = s;
        }
    }
    out
}

/// Raise eigenvalues to `PD_FLOOR` and rescale back to unit diagonal,
/// repeating until the rescaled matrix clears the floor.
fn floor_and_rescale(mut m: DMatrix<f64>) -> DMatrix<f64> {
    for _ in 0..10 {
        if min_eigenvalue(&m) >= PD_FLOOR {
            break;
        }
        let mut p = project_psd(&m, PD_FLOOR);
        let scale: Vec<f64> = (0..p.nrows()).map(|i| 1.0 / p[(i, i)].sqrt()).collect();
        for r in 0..p.nrows() {
            for c in 0..p.ncols() {
                p[(r, c)] *= scale[r] * scale[c];
            }
        }
        symmetrize_unit_diagonal(&mut p);
        m = p;
    }
    m
}

/// Nearest correlation matrix by alternating projections (with Dykstra's
/// correction) between the PSD cone and the unit-diagonal subspace,
/// finished with an eigenvalue floor of `PD_FLOOR`.
pub fn nearest_pd(matrix: &CorrelationMatrix) -> Result<PdRepairReport> {
    let a = matrix.matrix();
    let before = min_eigenvalue(a);
    if before >= PD_FLOOR {
        return Ok(PdRepairReport {
            input: matrix.clone(),
            repaired: matrix.clone(),
            was_repaired: false,
            min_eigenvalue_before: before,
            min_eigenvalue_after: before,
            max_abs_change: 0.0,
            iterations: 0,
        });
    }
    let mut iterations = 0;
    let projected = if before >= -PSD_NOISE {
        a.clone()
    } else {
        let mut y = a.clone();
        let mut ds = DMatrix::<f64>::zeros(a.nrows(), a.ncols());
        let mut converged = false;
        while iterations < REPAIR_MAX_ITER {
            iterations += 1;
            let r = &y - &ds;
            let x = project_psd(&r, 0.0);
            ds = &x - &r;
            let mut next = x;
            symmetrize_unit_diagonal(&mut next);
            let change = (&next - &y).norm();
            y = next;
            if change <= REPAIR_TOL {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::Repair(format!(
                "alternating projections did not converge in {REPAIR_MAX_ITER} iterations"
            )));
        }
        y
    };
    let repaired = floor_and_rescale(projected);
    let after = min_eigenvalue(&repaired);
    let max_abs_change = (&repaired - a).abs().max();
    Ok(PdRepairReport {
        input: matrix.clone(),
        repaired: CorrelationMatrix::from_matrix_unchecked(repaired),
        was_repaired: true,
        min_eigenvalue_before: before,
        min_eigenvalue_after: after,
        max_abs_change,
        iterations,
    })
}

/// A factor `B` with `B * B^T = corr`: the Cholesky factor when it exists,
/// otherwise `V * sqrt(max(D, 0))` from the eigendecomposition.
pub fn latent_factor(corr: &CorrelationMatrix) -> Result<DMatrix<f64>> {
    if let Some(ch) = corr.matrix().clone().cholesky() {
        return Ok(ch.l());
    }
    let eig = SymmetricEigen::new(corr.matrix().clone());
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -1e-6 {
        return Err(Error::Repair(format!(
            "latent correlation matrix is indefinite (min eigenvalue {min})"
        )));
    }
    let d = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&d))
}

/// `n` independent rows of a zero-mean normal vector with correlation `corr`.
pub fn mvn_sample(corr: &CorrelationMatrix, n: usize, stream: &mut RngStream) -> Result<DMatrix<f64>> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample size must be positive".into()));
    }
    let factor = latent_factor(corr)?;
    let j = corr.dim();
    let mut out = DMatrix::zeros(n, j);
    let mut e = vec![0.0; j];
    for row in 0..n {
        for v in e.iter_mut() {
            *v = stream.sample(StandardNormal);
        }
        for a in 0..j {
            let mut s = 0.0;
            for b in 0..j {
                s += factor[(a, b)] * e[b];
            }
            out[(row, a)] = s;
        }
    }
    Ok(out)
}

/// Threshold each column: 1 where `z <= Phi^{-1}(p_j)`, else 0.
pub fn dichotomize(z: &DMatrix<f64>, p: &[f64]) -> Result<DMatrix<u8>> {
    if z.ncols() != p.len() {
        return Err(Error::Dimension(format!(
            "{} latent columns but {} probabilities",
            z.ncols(),
            p.len()
        )));
    }
    let thresholds = p
        .iter()
        .map(|&pj| std_normal_quantile(pj))
        .collect::<Result<Vec<_>>>()?;
    Ok(DMatrix::from_fn(z.nrows(), z.ncols(), |r, c| u8::from(z[(r, c)] <= thresholds[c])))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_examples() {
        assert_eq!(std_normal_quantile(0.5).unwrap(), 0.0);
        assert!((std_normal_quantile(0.975).unwrap() - 1.959963984540054).abs() < 1e-12);
        assert!((std_normal_quantile(0.0013499).unwrap() + 3.0).abs() < 1e-4);
        assert!(std_normal_quantile(0.0).is_err());
        assert!(std_normal_quantile(1.0).is_err());
    }

    #[test]
    fn quantile_inverts_cdf() {
        for i in 1..2000 {
            let p = i as f64 / 2000.0;
            let z = std_normal_quantile(p).unwrap();
            assert!((std_normal_cdf(z) - p).abs() <= 1e-12, "p = {p}");
        }
        for p in [1e-12, 1e-9, 1e-6, 1.0 - 1e-9] {
            let z = std_normal_quantile(p).unwrap();
            assert!((std_normal_cdf(z) - p).abs() <= 1e-12);
        }
    }

    #[test]
    fn bvn_examples() {
        assert!((bvn_cdf(0.0, 0.0, 0.0).unwrap() - 0.25).abs() < 1e-15);
        assert!((bvn_cdf(0.0, 0.0, 0.5).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        for rho in [-0.99, -0.5, 0.0, 0.3, 0.95] {
            let v = bvn_cdf(f64::INFINITY, 0.7, rho).unwrap();
            assert!((v - std_normal_cdf(0.7)).abs() < 1e-14);
        }
        assert_eq!(bvn_cdf(f64::NEG_INFINITY, 0.7, 0.3).unwrap(), 0.0);
        assert!(bvn_cdf(f64::NAN, 0.0, 0.0).is_err());
    }

    #[test]
    fn bvn_arcsin_identity() {
        for i in -19..=19 {
            let rho = i as f64 / 20.0;
            let exact = 0.25 + rho.asin() / (2.0 * PI);
            assert!((bvn_cdf(0.0, 0.0, rho).unwrap() - exact).abs() < 1e-12, "rho {rho}");
        }
    }

    #[test]
    fn bvn_degenerate_limits() {
        assert!((bvn_cdf(0.3, -0.2, 1.0).unwrap() - std_normal_cdf(-0.2)).abs() < 1e-15);
        let lo = bvn_cdf(0.3, -0.2, -1.0).unwrap();
        assert!((lo - (std_normal_cdf(0.3) - std_normal_cdf(0.2))).abs() < 1e-15);
        assert_eq!(bvn_cdf(-0.5, -0.5, -1.0).unwrap(), 0.0);
    }

    #[test]
    fn tetrachoric_examples() {
        assert!(solve_tetrachoric(0.5, 0.5, 0.0).unwrap().abs() < 1e-10);
        let rho = solve_tetrachoric(0.5, 0.5, 0.5).unwrap();
        assert!((rho - (PI / 4.0).sin()).abs() < 1e-9);
        // the equation flattens out towards the comonotone limit
        let (_, hi) = ep_binary_bounds(0.3, 0.7).unwrap();
        let rho = solve_tetrachoric(0.3, 0.7, hi).unwrap();
        let (z3, z7) = (std_normal_quantile(0.3).unwrap(), std_normal_quantile(0.7).unwrap());
        assert!(rho > 0.98, "{rho}");
        assert!((bvn_cdf(z3, z7, rho).unwrap() - 0.3).abs() <= 1e-8);
        assert!(solve_tetrachoric(0.3, 0.7, hi + 0.01).is_err());
        assert!(solve_tetrachoric(0.0, 0.7, 0.1).is_err());
    }

    #[test]
    fn nearest_pd_identity_untouched() {
        let id = CorrelationMatrix::identity(4);
        let rep = nearest_pd(&id).unwrap();
        assert!(!rep.was_repaired);
        assert_eq!(rep.repaired, id);
    }

    #[test]
    fn nearest_pd_repairs_indefinite() {
        let m = CorrelationMatrix::from_upper_triangle(3, &[0.9, 0.9, -0.9]).unwrap();
        assert!(m.min_eigenvalue() < 0.0);
        let rep = nearest_pd(&m).unwrap();
        assert!(rep.was_repaired);
        assert!(rep.min_eigenvalue_after >= PD_FLOOR);
        for i in 0..3 {
            assert_eq!(rep.repaired.get(i, i), 1.0);
            for j in 0..3 {
                assert_eq!(rep.repaired.get(i, j), rep.repaired.get(j, i));
            }
        }
        let again = nearest_pd(&rep.repaired).unwrap();
        assert!((again.repaired.matrix() - rep.repaired.matrix()).abs().max() <= 1e-10);
    }

    #[test]
    fn upper_triangle_order() {
        let m = CorrelationMatrix::from_upper_triangle(3, &[0.1, 0.2, 0.3]).unwrap();
        assert_eq!(m.get(0, 1), 0.1);
        assert_eq!(m.get(2, 0), 0.2);
        assert_eq!(m.get(1, 2), 0.3);
        assert!(CorrelationMatrix::from_upper_triangle(3, &[0.1]).is_err());
        assert!(CorrelationMatrix::from_rows(&[vec![1.0, 0.2], vec![0.3, 1.0]]).is_err());
        assert!(CorrelationMatrix::from_rows(&[vec![1.0, 1.2], vec![1.2, 1.0]]).is_err());
    }

    #[test]
    fn dichotomize_threshold_inclusive() {
        let z = DMatrix::from_row_slice(2, 1, &[0.0, 1e-300]);
        let y = dichotomize(&z, &[0.5]).unwrap();
        assert_eq!(y[(0, 0)], 1);
        assert_eq!(y[(1, 0)], 0);
        assert!(dichotomize(&z, &[0.5, 0.5]).is_err());
    }
}
