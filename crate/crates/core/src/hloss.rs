//! Sparse hierarchical loss.
//!
//! For bottom-level forecasts `Ŷ` and actuals `Y` (series x timesteps), the
//! loss aggregates the error through both summing matrices,
//! `R = S_cs (Ŷ - Y) S_teᵀ`, and sums `½ R² / (d_cs d_teᵀ)` over every
//! cross-sectional/temporal cell. The gradient with respect to `Ŷ` is
//! `A R B` with `A = S_csᵀ / d_cs` and `B = S_te / d_te`, both fixed for a
//! given pair of hierarchies, so they are built once in [`ObjectiveContext`].
//! The second derivative does not depend on the forecasts at all.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hierarchy::Hierarchy;
use crate::linalg::{DenseMatrix, SparseMatrix};

/// Sample id to `(series row, timestep column)` map over the bottom grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexMap {
    n_rows: usize,
    n_cols: usize,
    cells: Vec<(u32, u32)>,
}

impl IndexMap {
    /// Checks bounds and injectivity.
    pub fn new(n_rows: usize, n_cols: usize, cells: Vec<(u32, u32)>) -> Result<Self> {
        let mut seen = vec![false; n_rows * n_cols];
        for (k, &(r, c)) in cells.iter().enumerate() {
            let (r, c) = (r as usize, c as usize);
            if r >= n_rows || c >= n_cols {
                return Err(Error::IndexOutOfBounds {
                    row: r,
                    col: c,
                    n_rows,
                    n_cols,
                });
            }
            let flat = r * n_cols + c;
            if seen[flat] {
                return Err(Error::InvalidArgument(format!(
                    "sample {k} maps to cell ({r}, {c}) which is already taken"
                )));
            }
            seen[flat] = true;
        }
        Ok(Self {
            n_rows,
            n_cols,
            cells,
        })
    }

    /// Row-major map covering the whole grid.
    pub fn full(n_rows: usize, n_cols: usize) -> Self {
        let cells = (0..n_rows as u32)
            .flat_map(|r| (0..n_cols as u32).map(move |c| (r, c)))
            .collect();
        Self {
            n_rows,
            n_cols,
            cells,
        }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_rows, self.n_cols)
    }

    pub fn cells(&self) -> &[(u32, u32)] {
        &self.cells
    }

    /// Places per-sample values on the grid; cells without a sample are zero.
    pub fn scatter(&self, values: &[f64]) -> Result<DenseMatrix> {
        if values.len() != self.cells.len() {
            return Err(Error::shape(
                format!("{} per-sample values", self.cells.len()),
                format!("{}", values.len()),
            ));
        }
        let mut m = DenseMatrix::zeros(self.n_rows, self.n_cols);
        for (&(r, c), &v) in self.cells.iter().zip(values) {
            m.set(r as usize, c as usize, v);
        }
        Ok(m)
    }

    pub fn gather(&self, grid: &DenseMatrix) -> Vec<f64> {
        self.cells
            .iter()
            .map(|&(r, c)| grid.get(r as usize, c as usize))
            .collect()
    }
}

/// Per-sample first and second derivatives handed to the booster.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GradHess {
    pub grad: Vec<f64>,
    pub hess: Vec<f64>,
}

impl GradHess {
    pub fn len(&self) -> usize {
        self.grad.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grad.is_empty()
    }
}

/// Everything about the loss that does not depend on the forecasts.
#[derive(Debug, Clone)]
pub struct ObjectiveContext {
    h_cs: Hierarchy,
    h_te: Hierarchy,
    /// `S_csᵀ` with column `a` scaled by `1 / d_cs[a]`, `n_b_cs x n_cs`.
    left: SparseMatrix,
    /// `S_te` with row `b` scaled by `1 / d_te[b]`, `n_te x n_b_te`.
    right: SparseMatrix,
    s_te_t: SparseMatrix,
    hess: DenseMatrix,
    index_map: IndexMap,
}

/// Precomputes the scaled aggregation matrices and the constant second
/// derivative `S_csᵀ (1 ⊘ d_cs d_teᵀ) S_te`.
pub fn make_context(h_cs: Hierarchy, h_te: Hierarchy, index_map: IndexMap) -> Result<ObjectiveContext> {
    if index_map.shape() != (h_cs.n_b(), h_te.n_b()) {
        return Err(Error::shape(
            format!("index map over a {}x{} grid", h_cs.n_b(), h_te.n_b()),
            format!("{}x{}", index_map.shape().0, index_map.shape().1),
        ));
    }
    let inv_cs: Vec<f64> = h_cs.d().iter().map(|d| 1.0 / d).collect();
    let inv_te: Vec<f64> = h_te.d().iter().map(|d| 1.0 / d).collect();
    let left = h_cs.s().transpose().scale_cols(&inv_cs)?;
    let right = h_te.s().scale_rows(&inv_te)?;
    // 1 ⊘ (d_cs d_teᵀ) has rank one, so the second derivative is the outer
    // product of the scaled column sums of the two summing matrices.
    let u = left.row_sums();
    let v = right.col_sums();
    let hess = DenseMatrix::from_fn(u.len(), v.len(), |i, j| u[i] * v[j]);
    let s_te_t = h_te.s().transpose();
    Ok(ObjectiveContext {
        h_cs,
        h_te,
        left,
        right,
        s_te_t,
        hess,
        index_map,
    })
}

impl ObjectiveContext {
    /// Cross-sectional hierarchy only; the temporal side is the identity over
    /// `n_timesteps` columns.
    pub fn cross_sectional(h_cs: Hierarchy, n_timesteps: usize, index_map: IndexMap) -> Result<Self> {
        let h_te = crate::hierarchy::build_cross_sectional(
            &(0..n_timesteps).map(|t| t.to_string()).collect::<Vec<_>>(),
            &[],
        )?;
        make_context(h_cs, h_te, index_map)
    }

    pub fn h_cs(&self) -> &Hierarchy {
        &self.h_cs
    }

    pub fn h_te(&self) -> &Hierarchy {
        &self.h_te
    }

    pub fn left(&self) -> &SparseMatrix {
        &self.left
    }

    pub fn right(&self) -> &SparseMatrix {
        &self.right
    }

    pub fn hess(&self) -> &DenseMatrix {
        &self.hess
    }

    pub fn index_map(&self) -> &IndexMap {
        &self.index_map
    }

    pub fn grid_shape(&self) -> (usize, usize) {
        (self.h_cs.n_b(), self.h_te.n_b())
    }

    fn check(&self, m: &DenseMatrix, what: &str) -> Result<()> {
        if m.shape() != self.grid_shape() {
            return Err(Error::shape(
                format!("{what} of shape {:?}", self.grid_shape()),
                format!("{:?}", m.shape()),
            ));
        }
        Ok(())
    }

    /// `S_cs E S_teᵀ` for a bottom-level error matrix `E`.
    fn aggregate_error(&self, err: &DenseMatrix) -> Result<DenseMatrix> {
        let cs = self.h_cs.s().spmm_dense(err)?;
        if self.h_te.is_trivial() {
            return Ok(cs);
        }
        cs.mul_sparse(&self.s_te_t)
    }

    fn weighted_value(&self, agg: &DenseMatrix) -> f64 {
        let (d_cs, d_te) = (self.h_cs.d(), self.h_te.d());
        let mut total = 0.0;
        for (i, &dc) in d_cs.iter().enumerate() {
            let row: f64 = agg
                .row(i)
                .iter()
                .zip(d_te)
                .map(|(&r, &dt)| r * r / dt)
                .sum();
            total += row / dc;
        }
        0.5 * total
    }

    fn gradient_from_aggregate(&self, agg: &DenseMatrix) -> Result<DenseMatrix> {
        let g = self.left.spmm_dense(agg)?;
        if self.h_te.is_trivial() {
            return Ok(g);
        }
        g.mul_sparse(&self.right)
    }

    /// Loss and gradient from one aggregation of the error.
    pub fn value_and_gradient(&self, y_hat: &DenseMatrix, y: &DenseMatrix) -> Result<(f64, DenseMatrix)> {
        self.check(y_hat, "forecasts")?;
        self.check(y, "actuals")?;
        let agg = self.aggregate_error(&y_hat.sub(y)?)?;
        Ok((self.weighted_value(&agg), self.gradient_from_aggregate(&agg)?))
    }
}

/// Loss value over all aggregated cells.
pub fn hloss_value(ctx: &ObjectiveContext, y_hat: &DenseMatrix, y: &DenseMatrix) -> Result<f64> {
    ctx.check(y_hat, "forecasts")?;
    ctx.check(y, "actuals")?;
    let agg = ctx.aggregate_error(&y_hat.sub(y)?)?;
    Ok(ctx.weighted_value(&agg))
}

/// Gradient with respect to the bottom-level forecasts.
pub fn hloss_gradient(ctx: &ObjectiveContext, y_hat: &DenseMatrix, y: &DenseMatrix) -> Result<DenseMatrix> {
    ctx.check(y_hat, "forecasts")?;
    ctx.check(y, "actuals")?;
    let agg = ctx.aggregate_error(&y_hat.sub(y)?)?;
    ctx.gradient_from_aggregate(&agg)
}

/// Per-sample gradient and second derivative for the booster.
pub fn hloss_objective(ctx: &ObjectiveContext, predictions: &[f64], targets: &[f64]) -> Result<GradHess> {
    check_lengths(predictions, targets)?;
    let y_hat = ctx.index_map.scatter(predictions)?;
    let y = ctx.index_map.scatter(targets)?;
    let grad = hloss_gradient(ctx, &y_hat, &y)?;
    Ok(GradHess {
        grad: ctx.index_map.gather(&grad),
        hess: ctx.index_map.gather(&ctx.hess),
    })
}

/// The loss as an evaluation metric over flat per-sample vectors.
pub fn hloss_metric(ctx: &ObjectiveContext, predictions: &[f64], targets: &[f64]) -> Result<f64> {
    check_lengths(predictions, targets)?;
    let y_hat = ctx.index_map.scatter(predictions)?;
    let y = ctx.index_map.scatter(targets)?;
    hloss_value(ctx, &y_hat, &y)
}

/// `grad = pred - target`, `hess = 1`.
pub fn squared_error_objective(predictions: &[f64], targets: &[f64]) -> Result<GradHess> {
    check_lengths(predictions, targets)?;
    Ok(GradHess {
        grad: predictions.iter().zip(targets).map(|(p, t)| p - t).collect(),
        hess: vec![1.0; predictions.len()],
    })
}

/// Tweedie deviance with a log link on raw scores `f`:
/// `grad = -y e^{(1-ρ)f} + e^{(2-ρ)f}`,
/// `hess = -(1-ρ) y e^{(1-ρ)f} + (2-ρ) e^{(2-ρ)f}`.
pub fn tweedie_objective(raw_scores: &[f64], targets: &[f64], rho: f64) -> Result<GradHess> {
    check_rho(rho)?;
    check_lengths(raw_scores, targets)?;
    let mut grad = Vec::with_capacity(raw_scores.len());
    let mut hess = Vec::with_capacity(raw_scores.len());
    for (&f, &y) in raw_scores.iter().zip(targets) {
        let a = ((1.0 - rho) * f).exp();
        let b = ((2.0 - rho) * f).exp();
        grad.push(-y * a + b);
        hess.push(-(1.0 - rho) * y * a + (2.0 - rho) * b);
    }
    Ok(GradHess { grad, hess })
}

/// Tweedie negative log-likelihood (up to terms constant in the forecast),
/// summed over samples; takes raw log-link scores.
pub fn tweedie_loss(raw_scores: &[f64], targets: &[f64], rho: f64) -> Result<f64> {
    check_rho(rho)?;
    check_lengths(raw_scores, targets)?;
    Ok(raw_scores
        .iter()
        .zip(targets)
        .map(|(&f, &y)| {
            -y * ((1.0 - rho) * f).exp() / (1.0 - rho) + ((2.0 - rho) * f).exp() / (2.0 - rho)
        })
        .sum())
}

pub(crate) fn check_rho(rho: f64) -> Result<()> {
    if !(rho > 1.0 && rho < 2.0) {
        return Err(Error::InvalidArgument(format!(
            "tweedie power must lie in (1, 2), got {rho}"
        )));
    }
    Ok(())
}

pub(crate) fn check_lengths(predictions: &[f64], targets: &[f64]) -> Result<()> {
    if predictions.len() != targets.len() {
        return Err(Error::shape(
            format!("{} targets", predictions.len()),
            format!("{}", targets.len()),
        ));
    }
    Ok(())
}

/// Dense evaluation of the same loss, materialising every matrix. Used by
/// the scaling benchmark as the non-sparse baseline.
#[derive(Debug, Clone)]
pub struct DenseHierarchicalLoss {
    s_cs: DenseMatrix,
    s_cs_t: DenseMatrix,
    s_te: DenseMatrix,
    s_te_t: DenseMatrix,
    inv_denominator: DenseMatrix,
}

impl DenseHierarchicalLoss {
    pub fn new(h_cs: &Hierarchy, h_te: &Hierarchy) -> Self {
        let s_cs = h_cs.s().to_dense();
        let s_te = h_te.s().to_dense();
        let (d_cs, d_te) = (h_cs.d(), h_te.d());
        Self {
            s_cs_t: s_cs.transpose(),
            s_te_t: s_te.transpose(),
            s_cs,
            s_te,
            inv_denominator: DenseMatrix::from_fn(d_cs.len(), d_te.len(), |i, j| {
                1.0 / (d_cs[i] * d_te[j])
            }),
        }
    }

    pub fn value_and_gradient(&self, y_hat: &DenseMatrix, y: &DenseMatrix) -> Result<(f64, DenseMatrix)> {
        let forecast = self.s_cs.matmul(y_hat)?.matmul(&self.s_te_t)?;
        let actual = self.s_cs.matmul(y)?.matmul(&self.s_te_t)?;
        let diff = forecast.sub(&actual)?;
        let value = 0.5 * diff.zip_with(&self.inv_denominator, |r, w| r * r * w)?.sum();
        let scaled = diff.zip_with(&self.inv_denominator, |r, w| r * w)?;
        let grad = self.s_cs_t.matmul(&scaled)?.matmul(&self.s_te)?;
        Ok((value, grad))
    }

    pub fn hess(&self) -> Result<DenseMatrix> {
        self.s_cs_t.matmul(&self.inv_denominator)?.matmul(&self.s_te)
    }
}
