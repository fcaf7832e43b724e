//! Regularization paths over a log-spaced lambda grid, with warm starts.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bilevel::{composite_lambda_max, fit_lcd, fit_sparse_group_lasso};
use crate::design::{GroupedDesign, Standardization};
use crate::error::{Error, Result};
use crate::gcd::{fit_gcd, lambda_max, FitResult, SolverOptions};
use crate::linalg;
use crate::penalty::{soft_threshold, PenaltyFamily, PenaltySpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WarmStart {
    /// Start each fit from the solution at the previous (larger) lambda.
    PreviousLambda,
    /// Start each (lambda, gamma) fit from the group LASSO solution at the
    /// same lambda. 2-norm families only.
    GroupLassoInit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathOptions {
    pub n_lambda: usize,
    /// `None` picks 1e-3 when n > p and 0.05 otherwise.
    pub lambda_min_ratio: Option<f64>,
    /// Gamma values for the MCP/SCAD/bridge/composite families. Empty means
    /// the template's gamma. `f64::INFINITY` is the group LASSO limit.
    pub gamma_grid: Vec<f64>,
    pub warm_start: WarmStart,
    pub solver: SolverOptions,
    /// Explicit descending lambda grid; overrides `n_lambda` and the ratio.
    pub lambdas: Option<Vec<f64>>,
}

impl Default for PathOptions {
    fn default() -> Self {
        PathOptions {
            n_lambda: 100,
            lambda_min_ratio: None,
            gamma_grid: Vec::new(),
            warm_start: WarmStart::PreviousLambda,
            solver: SolverOptions::default(),
            lambdas: None,
        }
    }
}

/// Fits along a (lambda, gamma) grid. `fits` is gamma-major with lambda
/// descending inside each gamma block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionPath {
    pub family: PenaltyFamily,
    pub lambda_max: f64,
    pub lambdas: Vec<f64>,
    pub gammas: Vec<f64>,
    pub fits: Vec<FitResult>,
}

impl SolutionPath {
    pub fn fits_for_gamma(&self, gamma_index: usize) -> &[FitResult] {
        let m = self.lambdas.len();
        &self.fits[gamma_index * m..(gamma_index + 1) * m]
    }

    /// (lambda, gamma) for every fit, in `fits` order.
    pub fn grid(&self) -> Vec<(f64, f64)> {
        self.gammas
            .iter()
            .flat_map(|g| self.lambdas.iter().map(move |l| (*l, *g)))
            .collect()
    }

    pub fn all_converged(&self) -> bool {
        self.fits.iter().all(|f| f.converged)
    }
}

/// Log-spaced grid from `lmax` down to `ratio * lmax`.
pub fn lambda_grid(lmax: f64, n_lambda: usize, ratio: f64) -> Vec<f64> {
    if n_lambda == 1 {
        return vec![lmax];
    }
    let step = ratio.ln() / (n_lambda - 1) as f64;
    (0..n_lambda)
        .map(|i| if i == 0 { lmax } else { lmax * (step * i as f64).exp() })
        .collect()
}

pub fn default_lambda_min_ratio(design: &GroupedDesign) -> f64 {
    if design.n() > design.p() {
        1e-3
    } else {
        0.05
    }
}

/// Largest lambda worth fitting for the template's family on this design.
pub fn path_lambda_max(design: &GroupedDesign, template: &PenaltySpec, solver: &SolverOptions) -> Result<f64> {
    match template.family {
        f if f.is_two_norm() => Ok(lambda_max(design)),
        PenaltyFamily::CompositeMcp => Ok(composite_lambda_max(design)),
        PenaltyFamily::SparseGroupLasso => Ok(sgl_lambda_max(design, template)),
        PenaltyFamily::GroupBridge1 => bridge_lambda_max(design, template, solver),
        _ => unreachable!(),
    }
}

fn sgl_weights(template: &PenaltySpec) -> Result<(f64, f64)> {
    let total = template.lambda + template.lambda2;
    if !(total > 0.0) {
        return Err(Error::InvalidArgument("sparse group LASSO template needs lambda + lambda2 > 0".into()));
    }
    Ok((template.lambda / total, template.lambda2 / total))
}

fn sgl_lambda_max(design: &GroupedDesign, template: &PenaltySpec) -> f64 {
    let Ok((w1, w2)) = sgl_weights(template) else { return 0.0 };
    let n = design.n() as f64;
    let mut lmax = 0.0_f64;
    for g in design.groups() {
        let grad: Vec<f64> = g.range().map(|k| design.x().column(k).dot(design.y()) / n).collect();
        let excess = |t: f64| {
            let s: f64 = grad.iter().map(|v| soft_threshold(*v, t * w1).powi(2)).sum::<f64>().sqrt();
            s - t * w2
        };
        let mut hi = grad.iter().fold(0.0_f64, |a, v| a.max(v.abs())) / w1.max(1e-300);
        hi = hi.min(crate::penalty::norm2(&grad) / w2.max(1e-300));
        let mut lo = 0.0;
        if excess(hi) > 0.0 {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if excess(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lmax = lmax.max(hi);
    }
    lmax * (1.0 + 1e-9)
}

/// Ridge-stabilized least squares start used by every group bridge fit.
pub fn bridge_start(design: &GroupedDesign) -> Vec<f64> {
    let n = design.n() as f64;
    let mut gram = linalg::gram_over_n(design.x());
    let rhs: Vec<f64> = (0..design.p()).map(|k| design.x().column(k).dot(design.y()) / n).collect();
    if design.n() > design.p() {
        if let Some(sol) = linalg::spd_solve(&gram, &rhs) {
            return sol;
        }
    }
    for k in 0..design.p() {
        gram[(k, k)] += 0.1;
    }
    linalg::spd_solve(&gram, &rhs).unwrap_or_else(|| vec![0.0; design.p()])
}

fn bridge_lambda_max(design: &GroupedDesign, template: &PenaltySpec, solver: &SolverOptions) -> Result<f64> {
    let start = bridge_start(design);
    let is_zero = |lam: f64| -> Result<bool> {
        let fit = fit_lcd(design, &template.with_lambda(lam), Some(&start), solver)?;
        Ok(fit.coef.iter().all(|v| *v == 0.0))
    };
    let n = design.n() as f64;
    let mut hi = (0..design.p())
        .map(|k| (design.x().column(k).dot(design.y()) / n).abs())
        .fold(0.0_f64, f64::max)
        .max(1e-8);
    let mut lo = 0.0;
    let mut doublings = 0;
    while !is_zero(hi)? {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > 80 {
            return Err(Error::DomainError("could not bracket the group bridge lambda_max".into()));
        }
    }
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if is_zero(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-6 * hi {
            break;
        }
    }
    Ok(hi)
}

/// Design standardization each family's solver expects.
pub fn standardization_for(family: PenaltyFamily) -> Standardization {
    if family.is_two_norm() {
        Standardization::Orthonormalize
    } else {
        Standardization::UnitVariance
    }
}

/// Single fit at the penalty's own lambda and gamma, dispatched to the
/// family's solver. Group bridge fits without `init` start from
/// [`bridge_start`]; the sparse group LASSO uses `lambda` and `lambda2` as is.
pub fn fit_penalized(design: &GroupedDesign, spec: &PenaltySpec, init: Option<&[f64]>, solver: &SolverOptions) -> Result<FitResult> {
    spec.validate()?;
    match spec.family {
        f if f.is_two_norm() => fit_gcd(design, spec, init, solver),
        PenaltyFamily::CompositeMcp => fit_lcd(design, spec, init, solver),
        PenaltyFamily::GroupBridge1 => match init {
            Some(b) => fit_lcd(design, spec, Some(b), solver),
            None => fit_lcd(design, spec, Some(&bridge_start(design)), solver),
        },
        PenaltyFamily::SparseGroupLasso => fit_sparse_group_lasso(design, spec.lambda, spec.lambda2, init, solver),
        _ => unreachable!(),
    }
}

/// Fits the template's family over a descending lambda grid for every gamma
/// in the grid. Distinct gamma chains run in parallel.
pub fn fit_path(design: &GroupedDesign, template: &PenaltySpec, opts: &PathOptions) -> Result<SolutionPath> {
    template.validate()?;
    let family = template.family;
    if family.is_two_norm() != design.is_orthonormalized() {
        return Err(if family.is_two_norm() { Error::NotOrthonormalized } else { Error::NotStandardized });
    }
    if opts.warm_start == WarmStart::GroupLassoInit && !family.is_two_norm() {
        return Err(Error::InvalidArgument("group LASSO warm starts apply to 2-norm families only".into()));
    }

    let lmax = path_lambda_max(design, template, &opts.solver)?;
    let lambdas = match &opts.lambdas {
        Some(l) => {
            if l.is_empty() || l.windows(2).any(|w| w[1] > w[0]) {
                return Err(Error::InvalidArgument("lambda grid must be non-empty and descending".into()));
            }
            l.clone()
        }
        None => {
            if opts.n_lambda < 2 {
                return Err(Error::InvalidArgument("n_lambda must be at least 2".into()));
            }
            let ratio = opts.lambda_min_ratio.unwrap_or_else(|| default_lambda_min_ratio(design));
            if !(ratio > 0.0 && ratio < 1.0) {
                return Err(Error::InvalidArgument(format!("lambda_min_ratio must be in (0,1), got {ratio}")));
            }
            lambda_grid(lmax, opts.n_lambda, ratio)
        }
    };

    let gammas: Vec<f64> = match family {
        PenaltyFamily::GroupLasso | PenaltyFamily::SparseGroupLasso => vec![template.gamma],
        _ if opts.gamma_grid.is_empty() => vec![template.gamma],
        _ => opts.gamma_grid.clone(),
    };
    let specs: Vec<PenaltySpec> = gammas.iter().map(|g| template.with_gamma(*g)).collect::<Result<_>>()?;

    let lasso_inits = if opts.warm_start == WarmStart::GroupLassoInit {
        let lasso = PenaltySpec::group_lasso(template.lambda)?;
        Some(chain(design, &lasso, &lambdas, &opts.solver, None)?)
    } else {
        None
    };

    let blocks: Vec<Vec<FitResult>> = specs
        .par_iter()
        .map(|spec| chain(design, spec, &lambdas, &opts.solver, lasso_inits.as_deref()))
        .collect::<Result<_>>()?;

    Ok(SolutionPath {
        family,
        lambda_max: lmax,
        lambdas,
        gammas,
        fits: blocks.into_iter().flatten().collect(),
    })
}

fn chain(
    design: &GroupedDesign,
    spec: &PenaltySpec,
    lambdas: &[f64],
    solver: &SolverOptions,
    inits: Option<&[FitResult]>,
) -> Result<Vec<FitResult>> {
    let sgl = if spec.family == PenaltyFamily::SparseGroupLasso { Some(sgl_weights(spec)?) } else { None };
    let bridge = (spec.family == PenaltyFamily::GroupBridge1).then(|| bridge_start(design));
    let mut out: Vec<FitResult> = Vec::with_capacity(lambdas.len());
    for (i, &lam) in lambdas.iter().enumerate() {
        let prev = out.last().map(|f| f.coef.as_slice());
        let fit = match spec.family {
            f if f.is_two_norm() => {
                let init = inits.map(|v| v[i].coef.as_slice()).or(prev);
                fit_gcd(design, &spec.with_lambda(lam), init, solver)?
            }
            PenaltyFamily::CompositeMcp => fit_lcd(design, &spec.with_lambda(lam), prev, solver)?,
            PenaltyFamily::GroupBridge1 => fit_lcd(design, &spec.with_lambda(lam), bridge.as_deref(), solver)?,
            PenaltyFamily::SparseGroupLasso => {
                let (w1, w2) = sgl.unwrap();
                fit_sparse_group_lasso(design, lam * w1, lam * w2, prev, solver)?
            }
            _ => unreachable!(),
        };
        out.push(fit);
    }
    Ok(out)
}
