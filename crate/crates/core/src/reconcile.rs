//! Post-hoc forecast reconciliation: `y_tilde = S G y_hat`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hierarchy::Hierarchy;
use crate::linalg::{DenseMatrix, SparseMatrix};

/// Variance floor for residual rows with (near) zero variance.
const VARIANCE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// No reconciliation.
    Base,
    BottomUp,
    Ols,
    WlsStruct,
    WlsVar,
    MintShrink,
    Erm,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Base,
        Method::BottomUp,
        Method::Ols,
        Method::WlsStruct,
        Method::WlsVar,
        Method::MintShrink,
        Method::Erm,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Base => "base",
            Method::BottomUp => "bottom_up",
            Method::Ols => "ols",
            Method::WlsStruct => "wls_struct",
            Method::WlsVar => "wls_var",
            Method::MintShrink => "mint_shrink",
            Method::Erm => "erm",
        }
    }

    /// True for methods fitted from in-sample residuals.
    pub fn needs_residuals(self) -> bool {
        matches!(self, Method::WlsVar | Method::MintShrink)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == norm)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown reconciliation method `{s}`")))
    }
}

/// The `G` matrix of a reconciler.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "storage", content = "matrix", rename_all = "lowercase")]
pub enum GMatrix {
    Sparse(SparseMatrix),
    Dense(DenseMatrix),
}

impl GMatrix {
    pub fn shape(&self) -> (usize, usize) {
        match self {
            GMatrix::Sparse(m) => m.shape(),
            GMatrix::Dense(m) => m.shape(),
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        match self {
            GMatrix::Sparse(m) => m.to_dense(),
            GMatrix::Dense(m) => m.clone(),
        }
    }

    fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            GMatrix::Sparse(m) => m.spmv(x),
            GMatrix::Dense(m) => m.matvec(x),
        }
    }

    fn mul_dense(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        match self {
            GMatrix::Sparse(m) => m.spmm_dense(x),
            GMatrix::Dense(m) => m.matmul(x),
        }
    }
}

/// A fitted reconciliation `G` (`n_b x n`) together with the summing matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reconciler {
    method: Method,
    s: SparseMatrix,
    g: Option<GMatrix>,
    /// Shrinkage intensity (MinT-shrink only).
    lambda: Option<f64>,
    /// True when ERM had to fall back to a pseudo-inverse of rank-deficient
    /// base forecasts.
    pinv_fallback: bool,
}

/// Weight matrix `W` of the generalized least-squares projection.
#[derive(Debug, Clone)]
pub enum Weights {
    Diagonal(Vec<f64>),
    Dense(DenseMatrix),
}

impl Reconciler {
    pub fn method(&self) -> Method {
        self.method
    }

    pub fn g(&self) -> Option<&GMatrix> {
        self.g.as_ref()
    }

    pub fn s(&self) -> &SparseMatrix {
        &self.s
    }

    pub fn lambda(&self) -> Option<f64> {
        self.lambda
    }

    pub fn pinv_fallback(&self) -> bool {
        self.pinv_fallback
    }

    pub fn n(&self) -> usize {
        self.s.n_rows()
    }

    /// Reconciles one base-forecast vector of length `n`.
    pub fn reconcile(&self, base: &[f64]) -> Result<Vec<f64>> {
        if base.len() != self.n() {
            return Err(Error::shape(format!("{} base forecasts", self.n()), format!("{}", base.len())));
        }
        match &self.g {
            None => Ok(base.to_vec()),
            Some(g) => self.s.spmv(&g.mul_vec(base)?),
        }
    }

    /// Reconciles an `n x T` panel of base forecasts column by column.
    pub fn reconcile_panel(&self, base: &DenseMatrix) -> Result<DenseMatrix> {
        if base.n_rows() != self.n() {
            return Err(Error::shape(format!("{} rows", self.n()), format!("{}", base.n_rows())));
        }
        match &self.g {
            None => Ok(base.clone()),
            Some(g) => self.s.spmm_dense(&g.mul_dense(base)?),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let r: Reconciler = serde_json::from_str(s)?;
        if let Some(g) = &r.g {
            if g.shape() != (r.s.n_cols(), r.s.n_rows()) {
                return Err(Error::Data("reconciler G does not match its summing matrix".into()));
            }
        }
        Ok(r)
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Aggregates bottom-level forecasts: `S b`.
pub fn bottom_up(h: &Hierarchy, bottom: &[f64]) -> Result<Vec<f64>> {
    h.s().spmv(bottom)
}

/// Fits a reconciler. `residuals` (`n x T_in` in-sample errors) are required
/// by WLS-var and MinT-shrink. ERM is fitted with [`fit_erm`].
pub fn fit_reconciler(method: Method, h: &Hierarchy, residuals: Option<&DenseMatrix>) -> Result<Reconciler> {
    let base = |g: Option<GMatrix>, lambda: Option<f64>| Reconciler {
        method,
        s: h.s().clone(),
        g,
        lambda,
        pinv_fallback: false,
    };
    let residuals = || -> Result<&DenseMatrix> {
        let r = residuals.ok_or_else(|| {
            Error::InvalidArgument(format!("{method} needs in-sample residuals"))
        })?;
        if r.n_rows() != h.n() {
            return Err(Error::shape(format!("{} residual rows", h.n()), format!("{}", r.n_rows())));
        }
        if r.n_cols() < 2 {
            return Err(Error::InvalidArgument(format!("{method} needs at least 2 residual columns")));
        }
        Ok(r)
    };
    match method {
        Method::Base => Ok(base(None, None)),
        Method::BottomUp => Ok(base(Some(GMatrix::Sparse(h.partition().j)), None)),
        Method::Ols => Ok(base(Some(GMatrix::Dense(projection(h, &Weights::Diagonal(vec![1.0; h.n()]))?)), None)),
        Method::WlsStruct => {
            let w = h.s().row_sums();
            Ok(base(Some(GMatrix::Dense(projection(h, &Weights::Diagonal(w))?)), None))
        }
        Method::WlsVar => {
            let cov = covariance(residuals()?);
            let w = (0..h.n()).map(|i| cov.get(i, i).max(VARIANCE_FLOOR)).collect();
            Ok(base(Some(GMatrix::Dense(projection(h, &Weights::Diagonal(w))?)), None))
        }
        Method::MintShrink => {
            let r = residuals()?;
            let (w, lambda) = shrunk_covariance(r);
            Ok(base(Some(GMatrix::Dense(projection(h, &Weights::Dense(w))?)), Some(lambda)))
        }
        Method::Erm => Err(Error::InvalidArgument(
            "ERM is fitted from training targets and forecasts; use fit_erm".into(),
        )),
    }
}

/// `G = J - J W U (U' W U)^-1 U'` for the given weights.
pub fn projection(h: &Hierarchy, w: &Weights) -> Result<DenseMatrix> {
    let (n, n_a, n_b) = (h.n(), h.n_a(), h.n_b());
    let part = h.partition();
    let u = part.u_t.transpose();
    let wu = match w {
        Weights::Diagonal(d) => {
            if d.len() != n {
                return Err(Error::shape(format!("{n} weights"), format!("{}", d.len())));
            }
            let mut wu = u.to_dense();
            for i in 0..n {
                wu.row_mut(i).iter_mut().for_each(|v| *v *= d[i]);
            }
            wu
        }
        Weights::Dense(m) => {
            if m.shape() != (n, n) {
                return Err(Error::shape(format!("{n}x{n} weights"), format!("{:?}", m.shape())));
            }
            m.mul_sparse(&u)?
        }
    };
    let mut g = DenseMatrix::zeros(n_b, n);
    for i in 0..n_b {
        g.set(i, n_a + i, 1.0);
    }
    if n_a == 0 {
        return Ok(g);
    }
    let m = part.u_t.spmm_dense(&wu)?;
    let rhs = part.u_t.to_dense();
    let x = solve_spd(&m, &rhs)?;
    let jwu = DenseMatrix::from_fn(n_b, n_a, |i, j| wu.get(n_a + i, j));
    let correction = jwu.matmul(&x)?;
    g.sub(&correction)
}

fn to_na(m: &DenseMatrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.n_rows(), m.n_cols(), m.values())
}

fn from_na(m: &DMatrix<f64>) -> DenseMatrix {
    DenseMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Solves `A X = B` for symmetric positive definite `A` by Cholesky, retrying
/// once with a small diagonal jitter.
fn solve_spd(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    let mut m = to_na(a);
    let rhs = to_na(b);
    if let Some(ch) = m.clone().cholesky() {
        return Ok(from_na(&ch.solve(&rhs)));
    }
    let n = m.nrows();
    let jitter = 1e-10 * m.trace().abs() / n.max(1) as f64;
    log::warn!("U'WU is not positive definite; retrying with jitter {jitter:e}");
    for i in 0..n {
        m[(i, i)] += jitter;
    }
    match m.cholesky() {
        Some(ch) => Ok(from_na(&ch.solve(&rhs))),
        None => Err(Error::Singular(
            "U'WU is singular; use mint_shrink or a WLS method instead".into(),
        )),
    }
}

/// Unbiased sample covariance of the rows of `r` (`n x T`).
pub fn covariance(r: &DenseMatrix) -> DenseMatrix {
    let (n, t) = r.shape();
    let centered = center_rows(r);
    let denom = (t as f64 - 1.0).max(1.0);
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let ri = centered.row(i);
            (0..n)
                .map(|j| ri.iter().zip(centered.row(j)).map(|(a, b)| a * b).sum::<f64>() / denom)
                .collect()
        })
        .collect();
    DenseMatrix::from_rows(&rows).expect("square")
}

fn center_rows(r: &DenseMatrix) -> DenseMatrix {
    let (n, t) = r.shape();
    let mut out = r.clone();
    for i in 0..n {
        let row = out.row_mut(i);
        let mean = row.iter().sum::<f64>() / t as f64;
        row.iter_mut().for_each(|v| *v -= mean);
    }
    out
}

/// Shrinkage intensity toward the diagonal target, from standardized
/// residuals; clamped to `[0, 1]`, and 1 when all sample correlations vanish.
pub fn shrinkage_intensity(r: &DenseMatrix) -> f64 {
    let (n, t) = r.shape();
    if n < 2 || t < 2 {
        return 1.0;
    }
    let tf = t as f64;
    let mut x = center_rows(r);
    for i in 0..n {
        let row = x.row_mut(i);
        let sd = (row.iter().map(|v| v * v).sum::<f64>() / (tf - 1.0)).max(VARIANCE_FLOOR).sqrt();
        row.iter_mut().for_each(|v| *v /= sd);
    }
    let per_row: Vec<(f64, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = x.row(i);
            let (mut var_sum, mut r2_sum) = (0.0, 0.0);
            for j in (0..n).filter(|&j| j != i) {
                let xj = x.row(j);
                let w_bar = xi.iter().zip(xj).map(|(a, b)| a * b).sum::<f64>() / tf;
                let ss: f64 = xi.iter().zip(xj).map(|(a, b)| (a * b - w_bar).powi(2)).sum();
                var_sum += tf / (tf - 1.0).powi(3) * ss;
                let r_ij = tf / (tf - 1.0) * w_bar;
                r2_sum += r_ij * r_ij;
            }
            (var_sum, r2_sum)
        })
        .collect();
    let var_sum: f64 = per_row.iter().map(|p| p.0).sum();
    let r2_sum: f64 = per_row.iter().map(|p| p.1).sum();
    if r2_sum <= 0.0 {
        return 1.0;
    }
    (var_sum / r2_sum).clamp(0.0, 1.0)
}

/// `lambda diag(cov) + (1 - lambda) cov` and the intensity used.
pub fn shrunk_covariance(r: &DenseMatrix) -> (DenseMatrix, f64) {
    let lambda = shrinkage_intensity(r);
    let mut cov = covariance(r);
    let n = cov.n_rows();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                cov.set(i, i, cov.get(i, i).max(VARIANCE_FLOOR));
            } else {
                cov.set(i, j, (1.0 - lambda) * cov.get(i, j));
            }
        }
    }
    (cov, lambda)
}

/// Unregularized empirical-risk-minimizing reconciliation: the minimum-norm
/// `P` minimizing `||Y - S P Y_hat||_F` over training targets `y` and base
/// forecasts `y_hat`, both `n x T`.
pub fn fit_erm(h: &Hierarchy, y: &DenseMatrix, y_hat: &DenseMatrix) -> Result<Reconciler> {
    let n = h.n();
    if y.n_rows() != n || y_hat.n_rows() != n {
        return Err(Error::shape(
            format!("{n} rows"),
            format!("{} and {}", y.n_rows(), y_hat.n_rows()),
        ));
    }
    if y.n_cols() != y_hat.n_cols() {
        return Err(Error::shape(format!("{} columns", y.n_cols()), format!("{}", y_hat.n_cols())));
    }
    let t = y.n_cols();
    if t < n {
        log::warn!("ERM fitted on {t} time steps for {n} series; the estimate is rank-deficient");
    }
    // Z = S^+ Y by QR (S has full column rank)
    let s = to_na(&h.s().to_dense());
    let qr = s.qr();
    let qty = qr.q().transpose() * to_na(y);
    let z = qr
        .r()
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::Singular("summing matrix is rank-deficient".into()))?;

    // P = Z Y_hat^+, i.e. P' = (Y_hat')^+ Z'
    let yh_t = to_na(y_hat).transpose(); // T x n
    let svd = yh_t.clone().svd(true, true);
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let eps = sigma_max * (t.max(n) as f64) * f64::EPSILON;
    let rank = svd.singular_values.iter().filter(|&&s| s > eps).count();
    let pinv_fallback = rank < n;
    let p_t = if pinv_fallback {
        let pinv = svd
            .pseudo_inverse(eps)
            .map_err(|e| Error::Singular(format!("pseudo-inverse failed: {e}")))?;
        pinv * z.transpose()
    } else {
        let qr = yh_t.qr();
        let qtz = qr.q().transpose() * z.transpose();
        qr.r()
            .solve_upper_triangular(&qtz)
            .ok_or_else(|| Error::Singular("base forecasts are rank-deficient".into()))?
    };
    if pinv_fallback {
        log::warn!("ERM base forecasts have rank {rank} < {n}; used the minimum-norm pseudo-inverse solution");
    }
    Ok(Reconciler {
        method: Method::Erm,
        s: h.s().clone(),
        g: Some(GMatrix::Dense(from_na(&p_t.transpose()))),
        lambda: None,
        pinv_fallback,
    })
}
