//! Group coordinate descent for the group LASSO, 2-norm group MCP and
//! 2-norm group SCAD on group-orthonormalized designs.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::design::{group_penalty, GroupedDesign};
use crate::error::{Error, Result};
use crate::penalty::{norm2, rho_prime_unchecked, single_group_into, PenaltySpec, ScalarPenalty};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Convergence when the largest absolute coefficient change over one
    /// full cycle is at most `tol`.
    pub tol: f64,
    pub max_iter: usize,
    /// Evaluate the objective after every block/coordinate update and record
    /// the largest increase in [`FitResult::max_ascent`].
    pub track_descent: bool,
    /// Residuals are recomputed from scratch every this many cycles.
    pub recompute_every: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-7,
            max_iter: 10_000,
            track_descent: false,
            recompute_every: 100,
        }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        SolverOptions { tol, ..Default::default() }
    }
}

/// Result of a single (lambda, gamma) fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    /// Coefficients in original coordinates and original column order.
    pub beta: Vec<f64>,
    /// Coefficients in the design's working coordinates.
    pub coef: Vec<f64>,
    /// Penalized objective at `coef` (working coordinates).
    pub objective: f64,
    /// Objective at the initial value.
    pub initial_objective: f64,
    /// Full cycles performed.
    pub iterations: usize,
    pub converged: bool,
    pub kkt_max_violation: f64,
    pub penalty: PenaltySpec,
    /// Largest single-update objective increase, when tracked.
    pub max_ascent: Option<f64>,
}

impl FitResult {
    pub fn lambda(&self) -> f64 {
        self.penalty.lambda
    }

    pub fn gamma(&self) -> f64 {
        self.penalty.gamma
    }

    /// Errors with `MaxIterExceeded` when the fit did not converge.
    pub fn ensure_converged(&self, max_iter: usize) -> Result<&Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::MaxIterExceeded { max_iter })
        }
    }

    pub fn n_nonzero(&self) -> usize {
        self.beta.iter().filter(|v| **v != 0.0).count()
    }
}

/// Partial gradient X~_j' r / n of one group.
fn group_score(design: &GroupedDesign, j: usize, r: &DVector<f64>, out: &mut [f64]) {
    let g = design.groups()[j];
    let n = design.n() as f64;
    for (c, o) in out.iter_mut().enumerate() {
        *o = design.x().column(g.start + c).dot(r) / n;
    }
}

/// Smallest lambda at which every group is thresholded to zero from b = 0:
/// max_j ||X~_j'y/n||_2 / c_j. The value is rounded up so that
/// `c_j * lambda_max >= ||X~_j'y/n||` holds in floating point.
pub fn lambda_max(design: &GroupedDesign) -> f64 {
    let norms: Vec<f64> = (0..design.n_groups())
        .map(|j| {
            let mut s = vec![0.0; design.groups()[j].len];
            group_score(design, j, design.y(), &mut s);
            norm2(&s)
        })
        .collect();
    let weights = design.weights();
    let mut lmax = norms
        .iter()
        .zip(weights)
        .map(|(a, c)| a / c)
        .fold(0.0_f64, f64::max);
    while norms.iter().zip(weights).any(|(a, c)| c * lmax < *a) {
        lmax = lmax.next_up();
    }
    lmax
}

fn check_two_norm(design: &GroupedDesign, pen: &PenaltySpec) -> Result<()> {
    if !pen.family.is_two_norm() {
        return Err(Error::UnsupportedFamily(pen.family.to_string()));
    }
    if !design.is_orthonormalized() {
        return Err(Error::NotOrthonormalized);
    }
    pen.validate()
}

fn scalar_kind(pen: &PenaltySpec) -> ScalarPenalty {
    match pen.family {
        crate::PenaltyFamily::GroupMcp2 => ScalarPenalty::Mcp,
        crate::PenaltyFamily::GroupScad2 => ScalarPenalty::Scad,
        _ => ScalarPenalty::L1,
    }
}

/// Largest KKT violation of working coefficients `b` for a 2-norm family.
pub fn kkt_check(design: &GroupedDesign, pen: &PenaltySpec, b: &[f64]) -> Result<f64> {
    check_two_norm(design, pen)?;
    let r = design.y() - design.fitted(b)?;
    let kind = scalar_kind(pen);
    let mut worst = 0.0_f64;
    for (j, g) in design.groups().iter().enumerate() {
        let mut s = vec![0.0; g.len];
        group_score(design, j, &r, &mut s);
        let bj = &b[g.range()];
        let nb = norm2(bj);
        let lam = design.weights()[j] * pen.lambda;
        let v = if nb == 0.0 {
            (norm2(&s) - lam).max(0.0)
        } else {
            let d = rho_prime_unchecked(nb, lam, pen.gamma, kind);
            s.iter()
                .zip(bj)
                .map(|(si, bi)| (si - d * bi / nb).powi(2))
                .sum::<f64>()
                .sqrt()
        };
        worst = worst.max(v);
    }
    Ok(worst)
}

/// Fits one (lambda, gamma) point by group coordinate descent.
///
/// `init` is in working coordinates; `None` starts from zero. For the
/// concave families the result is a stationary point, not necessarily the
/// global minimizer. A non-converged fit is returned with
/// `converged = false`.
pub fn fit_gcd(design: &GroupedDesign, pen: &PenaltySpec, init: Option<&[f64]>, opts: &SolverOptions) -> Result<FitResult> {
    check_two_norm(design, pen)?;
    let p = design.p();
    let n = design.n() as f64;
    let mut b = match init {
        Some(v) if v.len() != p => return Err(Error::DimensionMismatch { expected: p, got: v.len() }),
        Some(v) => v.to_vec(),
        None => vec![0.0; p],
    };
    let mut r = design.y() - design.fitted(&b)?;
    let initial_objective = design.objective(&b, pen)?;

    let weights = design.weights();
    let mut pens: Vec<f64> = design
        .groups()
        .iter()
        .enumerate()
        .map(|(j, g)| group_penalty(&b[g.range()], weights[j], pen))
        .collect();
    let mut current = initial_objective;
    let mut max_ascent: Option<f64> = opts.track_descent.then_some(0.0);

    let dmax = design.groups().iter().map(|g| g.len).max().unwrap_or(0);
    let mut z = vec![0.0; dmax];
    let mut new = vec![0.0; dmax];

    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        iterations += 1;
        let mut max_change = 0.0_f64;
        for (j, g) in design.groups().iter().enumerate() {
            let d = g.len;
            group_score(design, j, &r, &mut z[..d]);
            for c in 0..d {
                z[c] += b[g.start + c];
            }
            single_group_into(&z[..d], weights[j] * pen.lambda, pen.gamma, pen.family, &mut new[..d]);
            let mut moved = false;
            for c in 0..d {
                let delta = new[c] - b[g.start + c];
                if delta != 0.0 {
                    moved = true;
                    max_change = max_change.max(delta.abs());
                    r.axpy(-delta, &design.x().column(g.start + c), 1.0);
                    b[g.start + c] = new[c];
                }
            }
            if let Some(worst) = max_ascent.as_mut() {
                if moved {
                    pens[j] = group_penalty(&b[g.range()], weights[j], pen);
                    let next = r.norm_squared() / (2.0 * n) + pens.iter().sum::<f64>();
                    *worst = worst.max(next - current);
                    current = next;
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

    let objective = design.objective(&b, pen)?;
    let kkt = kkt_check(design, pen, &b)?;
    Ok(FitResult {
        beta: design.back_transform(&b)?,
        coef: b,
        objective,
        initial_objective,
        iterations,
        converged,
        kkt_max_violation: kkt,
        penalty: *pen,
        max_ascent,
    })
}

/// Runs [`fit_gcd`] from zero plus `extra_starts` random initial values and
/// returns the fit with the smallest objective.
pub fn fit_gcd_multistart(
    design: &GroupedDesign,
    pen: &PenaltySpec,
    extra_starts: usize,
    seed: u64,
    opts: &SolverOptions,
) -> Result<FitResult> {
    let mut best = fit_gcd(design, pen, None, opts)?;
    let scale = {
        let n = design.n() as f64;
        let s = (design.x().transpose() * design.y()) / n;
        2.0 * s.amax().max(1e-3)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..extra_starts {
        let init: Vec<f64> = (0..design.p()).map(|_| rng.random_range(-scale..scale)).collect();
        let fit = fit_gcd(design, pen, Some(&init), opts)?;
        if fit.objective < best.objective {
            best = fit;
        }
    }
    Ok(best)
}
