//! Grouped linear model data and group-level standardization.
//!
//! Columns are centered and reordered so that each group occupies a
//! contiguous block. In [`Standardization::Orthonormalize`] mode every block
//! X_j is replaced by X_j U_j^{-1}, where U_j'U_j = X_j'X_j/n, so that the
//! 2-norm penalties reduce to the orthonormal-group case. In
//! [`Standardization::UnitVariance`] mode (used by the bi-level solvers)
//! each column is scaled to unit sample variance and U_j is diagonal.
//!
//! Coefficients in the stored (working) coordinates are mapped back to the
//! caller's original columns by [`GroupedDesign::back_transform`].

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::penalty::{norm2, rho_unchecked, PenaltyFamily, PenaltySpec, ScalarPenalty};

/// Pivot threshold, relative to the largest diagonal of R_j.
pub const SINGULAR_REL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum WeightRule {
    /// c_j = sqrt(d_j)
    SqrtDj,
    /// c_j = d_j^gamma
    DjPow(f64),
    /// Per-group weights, ordered by sorted group label.
    Custom(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Standardization {
    Orthonormalize,
    UnitVariance,
}

/// Contiguous block of working columns belonging to one group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupRange {
    pub start: usize,
    pub len: usize,
}

impl GroupRange {
    pub fn end(&self) -> usize {
        self.start + self.len
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.start..self.end()
    }
}

#[derive(Debug, Clone)]
struct Source {
    x: DMatrix<f64>,
    y: Vec<f64>,
    labels: Vec<i64>,
    weights: WeightRule,
    mode: Standardization,
}

#[derive(Debug, Clone)]
pub struct GroupedDesign {
    y: DVector<f64>,
    x: DMatrix<f64>,
    x_centered: DMatrix<f64>,
    groups: Vec<GroupRange>,
    group_labels: Vec<i64>,
    weights: Vec<f64>,
    factors: Vec<DMatrix<f64>>,
    mode: Standardization,
    /// Working column k holds original column `perm[k]`.
    perm: Vec<usize>,
    x_means: Vec<f64>,
    y_mean: f64,
    source: Source,
}

/// Builds a grouped design from raw (uncentered) data.
///
/// `group_labels[k]` is the group of original column k. Labels are sorted
/// and must form a gap-free integer range; groups are ordered by label and
/// columns keep their relative order inside a group.
pub fn build_grouped_design(
    raw_x: &DMatrix<f64>,
    raw_y: &[f64],
    group_labels: &[i64],
    weights_rule: WeightRule,
    mode: Standardization,
) -> Result<GroupedDesign> {
    let (n, p) = raw_x.shape();
    if raw_y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: raw_y.len() });
    }
    if group_labels.len() != p {
        return Err(Error::DimensionMismatch { expected: p, got: group_labels.len() });
    }
    if n < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 observations, got {n}")));
    }
    if p == 0 {
        return Err(Error::InvalidArgument("design has no columns".into()));
    }
    if raw_x.iter().chain(raw_y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite value in data".into()));
    }

    let mut labels: Vec<i64> = group_labels.to_vec();
    labels.sort_unstable();
    labels.dedup();
    for w in labels.windows(2) {
        if w[1] - w[0] > 1 {
            return Err(Error::EmptyGroup { label: w[0] + 1 });
        }
    }

    let mut perm = Vec::with_capacity(p);
    let mut groups = Vec::with_capacity(labels.len());
    for &lab in &labels {
        let start = perm.len();
        perm.extend((0..p).filter(|&k| group_labels[k] == lab));
        groups.push(GroupRange { start, len: perm.len() - start });
    }

    let weights = match &weights_rule {
        WeightRule::SqrtDj => groups.iter().map(|g| (g.len as f64).sqrt()).collect(),
        WeightRule::DjPow(gamma) => groups.iter().map(|g| (g.len as f64).powf(*gamma)).collect(),
        WeightRule::Custom(w) => {
            if w.len() != groups.len() {
                return Err(Error::DimensionMismatch { expected: groups.len(), got: w.len() });
            }
            if w.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
                return Err(Error::InvalidArgument("group weights must be finite and positive".into()));
            }
            w.clone()
        }
    };

    let nf = n as f64;
    let y_mean = raw_y.iter().sum::<f64>() / nf;
    let y = DVector::from_iterator(n, raw_y.iter().map(|v| v - y_mean));
    let x_means: Vec<f64> = (0..p).map(|k| raw_x.column(k).sum() / nf).collect();
    let x_centered = DMatrix::from_fn(n, p, |i, k| raw_x[(i, perm[k])] - x_means[perm[k]]);

    // Constant columns vanish after centering.
    for (j, g) in groups.iter().enumerate() {
        for k in g.range() {
            let raw_ms = raw_x.column(perm[k]).norm_squared() / nf;
            let ms = x_centered.column(k).norm_squared() / nf;
            if !(ms > SINGULAR_REL_TOL * raw_ms) || ms == 0.0 {
                return Err(Error::SingularGroup { group: j });
            }
        }
    }

    let mut x = DMatrix::<f64>::zeros(n, p);
    let mut factors = Vec::with_capacity(groups.len());
    for (j, g) in groups.iter().enumerate() {
        let block = x_centered.columns(g.start, g.len).clone_owned();
        let u = match mode {
            Standardization::Orthonormalize => {
                let r = linalg::gram_over_n(&block);
                linalg::cholesky_upper(&r, SINGULAR_REL_TOL).ok_or(Error::SingularGroup { group: j })?
            }
            Standardization::UnitVariance => {
                DMatrix::from_fn(g.len, g.len, |a, b| if a == b { (block.column(a).norm_squared() / nf).sqrt() } else { 0.0 })
            }
        };
        // X~_j = X_j U^{-1}, row by row: U' x~_i = x_i.
        for i in 0..n {
            let row: Vec<f64> = (0..g.len).map(|c| block[(i, c)]).collect();
            let t = linalg::solve_upper_transpose(&u, &row);
            for c in 0..g.len {
                x[(i, g.start + c)] = t[c];
            }
        }
        factors.push(u);
    }

    Ok(GroupedDesign {
        y,
        x,
        x_centered,
        groups,
        group_labels: labels,
        weights,
        factors,
        mode,
        perm,
        x_means,
        y_mean,
        source: Source {
            x: raw_x.clone(),
            y: raw_y.to_vec(),
            labels: group_labels.to_vec(),
            weights: weights_rule,
            mode,
        },
    })
}

impl GroupedDesign {
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn n_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn groups(&self) -> &[GroupRange] {
        &self.groups
    }

    pub fn group_labels(&self) -> &[i64] {
        &self.group_labels
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Working design matrix (transformed or standardized, grouped column order).
    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    /// Centered predictors in grouped column order, before any scaling.
    pub fn x_centered(&self) -> &DMatrix<f64> {
        &self.x_centered
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn y_mean(&self) -> f64 {
        self.y_mean
    }

    pub fn x_means(&self) -> &[f64] {
        &self.x_means
    }

    pub fn factor(&self, j: usize) -> &DMatrix<f64> {
        &self.factors[j]
    }

    pub fn is_orthonormalized(&self) -> bool {
        self.mode == Standardization::Orthonormalize
    }

    pub fn standardization(&self) -> Standardization {
        self.mode
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    pub fn weight_rule(&self) -> &WeightRule {
        &self.source.weights
    }

    /// Maps working coefficients b to original coefficients, beta_j = U_j^{-1} b_j,
    /// in the caller's column order.
    pub fn back_transform(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.check_len(b.len())?;
        let mut beta = vec![0.0; self.p()];
        for (g, u) in self.groups.iter().zip(&self.factors) {
            let bj = &b[g.range()];
            if bj.iter().all(|v| *v == 0.0) {
                continue;
            }
            let sol = linalg::solve_upper(u, bj);
            for (c, v) in sol.into_iter().enumerate() {
                beta[self.perm[g.start + c]] = v;
            }
        }
        Ok(beta)
    }

    /// Inverse of [`back_transform`](Self::back_transform): b_j = U_j beta_j.
    pub fn to_working(&self, beta: &[f64]) -> Result<Vec<f64>> {
        self.check_len(beta.len())?;
        let mut b = vec![0.0; self.p()];
        for (g, u) in self.groups.iter().zip(&self.factors) {
            for r in 0..g.len {
                b[g.start + r] = (r..g.len).map(|c| u[(r, c)] * beta[self.perm[g.start + c]]).sum();
            }
        }
        Ok(b)
    }

    /// Fitted values X~ b in working coordinates.
    pub fn fitted(&self, b: &[f64]) -> Result<DVector<f64>> {
        self.check_len(b.len())?;
        Ok(&self.x * DVector::from_column_slice(b))
    }

    /// Penalized criterion in working coordinates:
    /// (1/2n)||y - X~ b||^2 plus the family's penalty.
    pub fn objective(&self, b: &[f64], pen: &PenaltySpec) -> Result<f64> {
        let resid = &self.y - self.fitted(b)?;
        let loss = resid.norm_squared() / (2.0 * self.n() as f64);
        Ok(loss + self.penalty_value(b, pen)?)
    }

    pub fn penalty_value(&self, b: &[f64], pen: &PenaltySpec) -> Result<f64> {
        self.check_len(b.len())?;
        let mut total = 0.0;
        for (j, g) in self.groups.iter().enumerate() {
            let bj = &b[g.range()];
            total += group_penalty(bj, self.weights[j], pen);
        }
        Ok(total)
    }

    /// Same X, new response (centered on the fly).
    pub fn with_response(&self, raw_y: &[f64]) -> Result<GroupedDesign> {
        if raw_y.len() != self.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), got: raw_y.len() });
        }
        let mut out = self.clone();
        let mean = raw_y.iter().sum::<f64>() / self.n() as f64;
        out.y = DVector::from_iterator(self.n(), raw_y.iter().map(|v| v - mean));
        out.y_mean = mean;
        out.source.y = raw_y.to_vec();
        Ok(out)
    }

    /// Rebuilds the design from a subset of the raw rows (re-centering and
    /// re-standardizing on those rows only).
    pub fn subset_rows(&self, rows: &[usize]) -> Result<GroupedDesign> {
        let src = &self.source;
        let x = DMatrix::from_fn(rows.len(), src.x.ncols(), |i, k| src.x[(rows[i], k)]);
        let y: Vec<f64> = rows.iter().map(|&i| src.y[i]).collect();
        build_grouped_design(&x, &y, &src.labels, src.weights.clone(), src.mode)
    }

    /// Raw rows of the data this design was built from.
    pub fn raw_x(&self) -> &DMatrix<f64> {
        &self.source.x
    }

    pub fn raw_y(&self) -> &[f64] {
        &self.source.y
    }

    pub fn raw_labels(&self) -> &[i64] {
        &self.source.labels
    }

    /// Predictions for raw (uncentered) rows given coefficients in original
    /// coordinates; uses this design's centering.
    pub fn predict_raw(&self, beta: &[f64], raw_rows: &DMatrix<f64>) -> Result<Vec<f64>> {
        if beta.len() != raw_rows.ncols() || beta.len() != self.x_means.len() {
            return Err(Error::DimensionMismatch { expected: self.x_means.len(), got: beta.len() });
        }
        Ok((0..raw_rows.nrows())
            .map(|i| self.y_mean + (0..beta.len()).map(|k| (raw_rows[(i, k)] - self.x_means[k]) * beta[k]).sum::<f64>())
            .collect())
    }

    /// Per-group 2-norms of working coefficients.
    pub fn group_norms(&self, b: &[f64]) -> Vec<f64> {
        self.groups.iter().map(|g| norm2(&b[g.range()])).collect()
    }

    /// Per-group 2-norms of coefficients given in original column order.
    pub fn original_group_norms(&self, beta: &[f64]) -> Vec<f64> {
        self.groups
            .iter()
            .map(|g| g.range().map(|k| beta[self.perm[k]].powi(2)).sum::<f64>().sqrt())
            .collect()
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.p() {
            return Err(Error::DimensionMismatch { expected: self.p(), got: len });
        }
        Ok(())
    }
}

/// Penalty contributed by one group's working coefficients.
pub(crate) fn group_penalty(bj: &[f64], weight: f64, pen: &PenaltySpec) -> f64 {
    match pen.family {
        PenaltyFamily::GroupLasso | PenaltyFamily::GroupMcp2 | PenaltyFamily::GroupScad2 => {
            pen.two_norm_penalty(norm2(bj), weight)
        }
        PenaltyFamily::GroupBridge1 => {
            let l1: f64 = bj.iter().map(|v| v.abs()).sum();
            pen.lambda * weight * l1.powf(pen.gamma)
        }
        PenaltyFamily::CompositeMcp => {
            if pen.lambda == 0.0 {
                return 0.0;
            }
            let inner: f64 = bj
                .iter()
                .map(|v| rho_unchecked(v.abs(), pen.lambda, pen.gamma_inner, ScalarPenalty::Mcp))
                .sum();
            let gamma_outer = bj.len() as f64 * pen.gamma_inner * pen.lambda / 2.0;
            rho_unchecked(inner, pen.lambda, gamma_outer, ScalarPenalty::Mcp)
        }
        PenaltyFamily::SparseGroupLasso => {
            let l1: f64 = bj.iter().map(|v| v.abs()).sum();
            pen.lambda * l1 + pen.lambda2 * norm2(bj)
        }
    }
}
