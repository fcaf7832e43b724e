//! Bi-level selection on column-standardized designs: 1-norm group bridge
//! and composite MCP by local coordinate descent, and the sparse group LASSO
//! by blockwise proximal descent.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::design::GroupedDesign;
use crate::error::{Error, Result};
use crate::gcd::{FitResult, SolverOptions};
use crate::linalg;
use crate::penalty::{norm2, rho_prime_unchecked, rho_unchecked, soft_threshold, PenaltyFamily, PenaltySpec, ScalarPenalty};

/// A group's l1 norm below this freezes the group at zero for the rest of a
/// group bridge fit.
pub const BRIDGE_FREEZE_TOL: f64 = 1e-10;

/// Composite MCP parameters. The outer range parameter is derived per group
/// as d_j * gamma_inner * lambda / 2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompositeSpec {
    pub lambda: f64,
    pub gamma_inner: f64,
}

impl CompositeSpec {
    pub fn new(lambda: f64, gamma_inner: f64) -> Result<Self> {
        PenaltySpec::composite_mcp(lambda, gamma_inner)?;
        Ok(CompositeSpec { lambda, gamma_inner })
    }

    pub fn gamma_outer(&self, group_size: usize) -> f64 {
        group_size as f64 * self.gamma_inner * self.lambda / 2.0
    }

    /// Composite penalty of one group: outer MCP applied to the summed inner MCPs.
    pub fn group_value(&self, beta_group: &[f64]) -> f64 {
        if self.lambda == 0.0 {
            return 0.0;
        }
        let inner: f64 = beta_group
            .iter()
            .map(|v| rho_unchecked(v.abs(), self.lambda, self.gamma_inner, ScalarPenalty::Mcp))
            .sum();
        rho_unchecked(inner, self.lambda, self.gamma_outer(beta_group.len()), ScalarPenalty::Mcp)
    }
}

/// Per-coordinate soft-threshold level of the composite MCP:
/// rho_O'(sum_m rho_I(|b_m|)) * rho_I'(|b_k|).
pub fn composite_threshold_lambda(beta_group: &[f64], k: usize, spec: &CompositeSpec) -> Result<f64> {
    if k >= beta_group.len() {
        return Err(Error::DimensionMismatch { expected: beta_group.len(), got: k });
    }
    Ok(composite_threshold_unchecked(beta_group, k, spec))
}

fn composite_threshold_unchecked(beta_group: &[f64], k: usize, spec: &CompositeSpec) -> f64 {
    let lam = spec.lambda;
    if lam == 0.0 {
        return 0.0;
    }
    let inner: f64 = beta_group
        .iter()
        .map(|v| rho_unchecked(v.abs(), lam, spec.gamma_inner, ScalarPenalty::Mcp))
        .sum();
    let outer = rho_prime_unchecked(inner, lam, spec.gamma_outer(beta_group.len()), ScalarPenalty::Mcp);
    outer * rho_prime_unchecked(beta_group[k].abs(), lam, spec.gamma_inner, ScalarPenalty::Mcp)
}

/// Concave penalty handled by local coordinate descent.
#[derive(Debug, Clone, Copy)]
enum LcdPenalty {
    Bridge { lambda: f64, gamma: f64 },
    Composite(CompositeSpec),
    /// rho(||b_j||_1; c_j lambda, gamma) with an MCP or SCAD outer penalty.
    #[cfg_attr(not(feature = "experimental"), allow(dead_code))]
    OneNorm { kind: ScalarPenalty, lambda: f64, gamma: f64 },
}

impl LcdPenalty {
    fn group_value(&self, bj: &[f64], weight: f64) -> f64 {
        let l1: f64 = bj.iter().map(|v| v.abs()).sum();
        match *self {
            LcdPenalty::Bridge { lambda, gamma } => lambda * weight * l1.powf(gamma),
            LcdPenalty::Composite(spec) => spec.group_value(bj),
            LcdPenalty::OneNorm { kind, lambda, gamma } => rho_unchecked(l1, weight * lambda, gamma, kind),
        }
    }

    /// Threshold for coordinate k, or `None` when the group is frozen at zero.
    fn threshold(&self, bj: &[f64], k: usize, weight: f64) -> Option<f64> {
        match *self {
            LcdPenalty::Bridge { lambda, gamma } => {
                let l1: f64 = bj.iter().map(|v| v.abs()).sum();
                if l1 < BRIDGE_FREEZE_TOL {
                    None
                } else {
                    Some(gamma * lambda * weight * l1.powf(gamma - 1.0))
                }
            }
            LcdPenalty::Composite(spec) => Some(composite_threshold_unchecked(bj, k, &spec)),
            LcdPenalty::OneNorm { kind, lambda, gamma } => {
                let l1: f64 = bj.iter().map(|v| v.abs()).sum();
                Some(rho_prime_unchecked(l1, weight * lambda, gamma, kind))
            }
        }
    }
}

fn check_standardized(design: &GroupedDesign) -> Result<()> {
    if design.is_orthonormalized() {
        return Err(Error::NotStandardized);
    }
    Ok(())
}

fn column_scales(design: &GroupedDesign) -> Vec<f64> {
    let n = design.n() as f64;
    (0..design.p()).map(|k| design.x().column(k).norm_squared() / n).collect()
}

fn initial_coef(design: &GroupedDesign, init: Option<&[f64]>) -> Result<Vec<f64>> {
    match init {
        Some(v) if v.len() != design.p() => Err(Error::DimensionMismatch { expected: design.p(), got: v.len() }),
        Some(v) => Ok(v.to_vec()),
        None => Ok(vec![0.0; design.p()]),
    }
}

/// Fits the 1-norm group bridge or the composite MCP by local coordinate
/// descent. Each coordinate update is the one-dimensional LASSO solution
/// with threshold given by the linearized penalty at the current iterate.
///
/// Coordinates are swept globally in working column order. For the bridge,
/// a group whose l1 norm drops below [`BRIDGE_FREEZE_TOL`] stays at zero
/// for the rest of the fit; starting a bridge fit from zero therefore
/// returns zero.
pub fn fit_lcd(design: &GroupedDesign, pen: &PenaltySpec, init: Option<&[f64]>, opts: &SolverOptions) -> Result<FitResult> {
    check_standardized(design)?;
    pen.validate()?;
    let lcd = match pen.family {
        PenaltyFamily::GroupBridge1 => LcdPenalty::Bridge { lambda: pen.lambda, gamma: pen.gamma },
        PenaltyFamily::CompositeMcp => LcdPenalty::Composite(CompositeSpec {
            lambda: pen.lambda,
            gamma_inner: pen.gamma_inner,
        }),
        other => return Err(Error::UnsupportedFamily(other.to_string())),
    };
    run_lcd(design, lcd, *pen, init, opts)
}

/// 1-norm group MCP or SCAD, rho(||b_j||_1; c_j lambda, gamma), fit by local
/// coordinate descent. These estimators are experimental.
#[cfg(feature = "experimental")]
pub fn fit_one_norm_group(
    design: &GroupedDesign,
    kind: ScalarPenalty,
    lambda: f64,
    gamma: f64,
    init: Option<&[f64]>,
    opts: &SolverOptions,
) -> Result<(FitResult, f64)> {
    check_standardized(design)?;
    let family = match kind {
        ScalarPenalty::Mcp => PenaltyFamily::GroupMcp2,
        ScalarPenalty::Scad => PenaltyFamily::GroupScad2,
        _ => return Err(Error::UnsupportedFamily(format!("{kind:?}"))),
    };
    // Validates gamma for the scalar kind; the family tag is descriptive only.
    let tag = PenaltySpec::new(family, lambda, gamma)?;
    let lcd = LcdPenalty::OneNorm { kind, lambda, gamma };
    let fit = run_lcd(design, lcd, tag, init, opts)?;
    let objective = lcd_objective(design, &lcd, &fit.coef);
    Ok((fit, objective))
}

fn lcd_objective(design: &GroupedDesign, lcd: &LcdPenalty, b: &[f64]) -> f64 {
    let r = design.y() - &(design.x() * DVector::from_column_slice(b));
    let loss = r.norm_squared() / (2.0 * design.n() as f64);
    loss + design
        .groups()
        .iter()
        .zip(design.weights())
        .map(|(g, w)| lcd.group_value(&b[g.range()], *w))
        .sum::<f64>()
}

fn run_lcd(design: &GroupedDesign, lcd: LcdPenalty, pen: PenaltySpec, init: Option<&[f64]>, opts: &SolverOptions) -> Result<FitResult> {
    let n = design.n() as f64;
    let scales = column_scales(design);
    let weights = design.weights();
    let mut b = initial_coef(design, init)?;
    let mut r = design.y() - design.fitted(&b)?;
    let initial_objective = lcd_objective(design, &lcd, &b);
    let mut current = initial_objective;
    let mut max_ascent: Option<f64> = opts.track_descent.then_some(0.0);
    let mut pens: Vec<f64> = design
        .groups()
        .iter()
        .zip(weights)
        .map(|(g, w)| lcd.group_value(&b[g.range()], *w))
        .collect();

    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        iterations += 1;
        let mut max_change = 0.0_f64;
        for (j, g) in design.groups().iter().enumerate() {
            for k in g.range() {
                let thresh = lcd.threshold(&b[g.range()], k - g.start, weights[j]);
                let new = match thresh {
                    Some(t) => {
                        let z = design.x().column(k).dot(&r) / n + scales[k] * b[k];
                        soft_threshold(z, t) / scales[k]
                    }
                    None => 0.0,
                };
                let delta = new - b[k];
                if delta != 0.0 {
                    max_change = max_change.max(delta.abs());
                    r.axpy(-delta, &design.x().column(k), 1.0);
                    b[k] = new;
                    if let Some(worst) = max_ascent.as_mut() {
                        pens[j] = lcd.group_value(&b[g.range()], weights[j]);
                        let next = r.norm_squared() / (2.0 * n) + pens.iter().sum::<f64>();
                        *worst = worst.max(next - current);
                        current = next;
                    }
                }
            }
        }
        if opts.recompute_every > 0 && iterations % opts.recompute_every == 0 {
            r = design.y() - design.fitted(&b)?;
        }
        if max_change <= opts.tol {
            converged = true;
            break;
        }
    }

    let objective = lcd_objective(design, &lcd, &b);
    let kkt = lcd_kkt(design, &lcd, &b);
    Ok(FitResult {
        beta: design.back_transform(&b)?,
        coef: b,
        objective,
        initial_objective,
        iterations,
        converged,
        kkt_max_violation: kkt,
        penalty: pen,
        max_ascent,
    })
}

/// Coordinatewise stationarity of the linearized problem at `b`.
fn lcd_kkt(design: &GroupedDesign, lcd: &LcdPenalty, b: &[f64]) -> f64 {
    let n = design.n() as f64;
    let r = design.y() - &(design.x() * DVector::from_column_slice(b));
    let mut worst = 0.0_f64;
    for (j, g) in design.groups().iter().enumerate() {
        for k in g.range() {
            let Some(t) = lcd.threshold(&b[g.range()], k - g.start, design.weights()[j]) else {
                continue;
            };
            let grad = design.x().column(k).dot(&r) / n;
            let v = if b[k] == 0.0 {
                (grad.abs() - t).max(0.0)
            } else {
                (grad - t * b[k].signum()).abs()
            };
            worst = worst.max(v);
        }
    }
    worst
}

/// Smallest composite MCP lambda with an all-zero solution. At b = 0 the
/// coordinate threshold is lambda^2, so this is sqrt(max_k |x_k'y/n|).
pub fn composite_lambda_max(design: &GroupedDesign) -> f64 {
    let n = design.n() as f64;
    let zmax = (0..design.p())
        .map(|k| (design.x().column(k).dot(design.y()) / n).abs())
        .fold(0.0_f64, f64::max);
    let mut lmax = zmax.sqrt();
    while lmax * lmax < zmax {
        lmax = lmax.next_up();
    }
    lmax
}

/// Blockwise proximal descent for
/// (1/2n)||y - X b||^2 + lambda1 ||b||_1 + lambda2 sum_j ||b_j||_2.
///
/// Each block takes proximal gradient steps with step 1/L_j, L_j the largest
/// eigenvalue of X_j'X_j/n, until its own change falls below `tol / 10`
/// (at most 200 inner steps), then the sweep moves on.
pub fn fit_sparse_group_lasso(
    design: &GroupedDesign,
    lambda1: f64,
    lambda2: f64,
    init: Option<&[f64]>,
    opts: &SolverOptions,
) -> Result<FitResult> {
    check_standardized(design)?;
    let pen = PenaltySpec::sparse_group_lasso(lambda1, lambda2)?;
    let n = design.n() as f64;
    let steps: Vec<f64> = design
        .groups()
        .iter()
        .map(|g| {
            let block = design.x().columns(g.start, g.len).clone_owned();
            linalg::sym_eig_extremes(&linalg::gram_over_n(&block)).1
        })
        .collect();
    let mut b = initial_coef(design, init)?;
    let mut r = design.y() - design.fitted(&b)?;
    let initial_objective = design.objective(&b, &pen)?;
    let mut current = initial_objective;
    let mut max_ascent: Option<f64> = opts.track_descent.then_some(0.0);

    let dmax = design.groups().iter().map(|g| g.len).max().unwrap_or(0);
    let mut u = vec![0.0; dmax];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        iterations += 1;
        let mut max_change = 0.0_f64;
        for (j, g) in design.groups().iter().enumerate() {
            let d = g.len;
            let l = steps[j];
            for _ in 0..200 {
                #[allow(clippy::needless_range_loop)]
                for c in 0..d {
                    let k = g.start + c;
                    let grad = design.x().column(k).dot(&r) / n;
                    u[c] = soft_threshold(b[k] + grad / l, lambda1 / l);
                }
                let norm = norm2(&u[..d]);
                let scale = if norm <= lambda2 / l || norm == 0.0 { 0.0 } else { 1.0 - lambda2 / (l * norm) };
                let mut inner_change = 0.0_f64;
                #[allow(clippy::needless_range_loop)]
                for c in 0..d {
                    let k = g.start + c;
                    let new = scale * u[c];
                    let delta = new - b[k];
                    if delta != 0.0 {
                        inner_change = inner_change.max(delta.abs());
                        r.axpy(-delta, &design.x().column(k), 1.0);
                        b[k] = new;
                    }
                }
                max_change = max_change.max(inner_change);
                if let Some(worst) = max_ascent.as_mut() {
                    if inner_change > 0.0 {
                        let next = design.objective(&b, &pen)?;
                        *worst = worst.max(next - current);
                        current = next;
                    }
                }
                if inner_change <= opts.tol / 10.0 {
                    break;
                }
            }
        }
        if opts.recompute_every > 0 && iterations % opts.recompute_every == 0 {
            r = design.y() - design.fitted(&b)?;
        }
        if max_change <= opts.tol {
            converged = true;
            break;
        }
    }
    let objective = design.objective(&b, &pen)?;
    let kkt = sgl_kkt(design, lambda1, lambda2, &b)?;
    Ok(FitResult {
        beta: design.back_transform(&b)?,
        coef: b,
        objective,
        initial_objective,
        iterations,
        converged,
        kkt_max_violation: kkt,
        penalty: pen,
        max_ascent,
    })
}

/// Subgradient optimality residual of the sparse group LASSO at `b`.
pub fn sgl_kkt(design: &GroupedDesign, lambda1: f64, lambda2: f64, b: &[f64]) -> Result<f64> {
    let n = design.n() as f64;
    let r = design.y() - design.fitted(b)?;
    let mut worst = 0.0_f64;
    for g in design.groups() {
        let grad: Vec<f64> = g.range().map(|k| design.x().column(k).dot(&r) / n).collect();
        let bj = &b[g.range()];
        let nb = norm2(bj);
        if nb == 0.0 {
            let shrunk: Vec<f64> = grad.iter().map(|v| soft_threshold(*v, lambda1)).collect();
            worst = worst.max((norm2(&shrunk) - lambda2).max(0.0));
        } else {
            for (gk, bk) in grad.iter().zip(bj) {
                let v = if *bk == 0.0 {
                    (gk.abs() - lambda1).max(0.0)
                } else {
                    (gk - lambda1 * bk.signum() - lambda2 * bk / nb).abs()
                };
                worst = worst.max(v);
            }
        }
    }
    Ok(worst)
}
