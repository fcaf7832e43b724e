//! Penalty functions, their derivatives, and the closed-form single-group
//! threshold operators used inside the group coordinate descent solver.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};

/// Penalty families fit by this crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PenaltyFamily {
    GroupLasso,
    GroupMcp2,
    GroupScad2,
    GroupBridge1,
    CompositeMcp,
    SparseGroupLasso,
}

impl PenaltyFamily {
    /// Families whose penalty acts on the group 2-norm and that are fit on
    /// group-orthonormalized designs.
    pub fn is_two_norm(self) -> bool {
        matches!(
            self,
            PenaltyFamily::GroupLasso | PenaltyFamily::GroupMcp2 | PenaltyFamily::GroupScad2
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            PenaltyFamily::GroupLasso => "glasso",
            PenaltyFamily::GroupMcp2 => "gmcp",
            PenaltyFamily::GroupScad2 => "gscad",
            PenaltyFamily::GroupBridge1 => "gbridge",
            PenaltyFamily::CompositeMcp => "cmcp",
            PenaltyFamily::SparseGroupLasso => "sgl",
        }
    }
}

impl fmt::Display for PenaltyFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for PenaltyFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "glasso" => Ok(PenaltyFamily::GroupLasso),
            "gmcp" => Ok(PenaltyFamily::GroupMcp2),
            "gscad" => Ok(PenaltyFamily::GroupScad2),
            "gbridge" => Ok(PenaltyFamily::GroupBridge1),
            "cmcp" => Ok(PenaltyFamily::CompositeMcp),
            "sgl" => Ok(PenaltyFamily::SparseGroupLasso),
            other => Err(Error::UnsupportedFamily(other.to_string())),
        }
    }
}

pub const DEFAULT_MCP_GAMMA: f64 = 2.7;
pub const DEFAULT_SCAD_GAMMA: f64 = 3.7;
pub const DEFAULT_BRIDGE_GAMMA: f64 = 0.5;

pub fn default_gamma(family: PenaltyFamily) -> f64 {
    match family {
        PenaltyFamily::GroupScad2 => DEFAULT_SCAD_GAMMA,
        PenaltyFamily::GroupBridge1 => DEFAULT_BRIDGE_GAMMA,
        PenaltyFamily::GroupLasso | PenaltyFamily::SparseGroupLasso => f64::INFINITY,
        _ => DEFAULT_MCP_GAMMA,
    }
}

/// A penalty family with its tuning parameters.
///
/// `gamma = f64::INFINITY` is accepted for the MCP and SCAD families and
/// routes them to the group LASSO kernel. For the sparse group LASSO,
/// `lambda` is the l1 weight and `lambda2` the group l2 weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec {
    pub family: PenaltyFamily,
    pub lambda: f64,
    pub lambda2: f64,
    pub gamma: f64,
    pub gamma_inner: f64,
}

impl PenaltySpec {
    pub fn new(family: PenaltyFamily, lambda: f64, gamma: f64) -> Result<Self> {
        let spec = PenaltySpec {
            family,
            lambda,
            lambda2: 0.0,
            gamma,
            gamma_inner: gamma,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn group_lasso(lambda: f64) -> Result<Self> {
        Self::new(PenaltyFamily::GroupLasso, lambda, f64::INFINITY)
    }

    pub fn group_mcp(lambda: f64, gamma: f64) -> Result<Self> {
        Self::new(PenaltyFamily::GroupMcp2, lambda, gamma)
    }

    pub fn group_scad(lambda: f64, gamma: f64) -> Result<Self> {
        Self::new(PenaltyFamily::GroupScad2, lambda, gamma)
    }

    pub fn group_bridge(lambda: f64, gamma: f64) -> Result<Self> {
        Self::new(PenaltyFamily::GroupBridge1, lambda, gamma)
    }

    pub fn composite_mcp(lambda: f64, gamma_inner: f64) -> Result<Self> {
        Self::new(PenaltyFamily::CompositeMcp, lambda, gamma_inner)
    }

    /// Any family from its name-level parameters. A missing gamma takes the
    /// family default; `sgl_ratio` sets lambda2 = sgl_ratio * lambda for the
    /// sparse group LASSO and is ignored otherwise.
    pub fn for_family(family: PenaltyFamily, lambda: f64, gamma: Option<f64>, sgl_ratio: f64) -> Result<Self> {
        match family {
            PenaltyFamily::SparseGroupLasso => Self::sparse_group_lasso(lambda, sgl_ratio * lambda),
            PenaltyFamily::GroupLasso => Self::group_lasso(lambda),
            f => Self::new(f, lambda, gamma.unwrap_or_else(|| default_gamma(f))),
        }
    }

    pub fn sparse_group_lasso(lambda1: f64, lambda2: f64) -> Result<Self> {
        let spec = PenaltySpec {
            family: PenaltyFamily::SparseGroupLasso,
            lambda: lambda1,
            lambda2,
            gamma: f64::INFINITY,
            gamma_inner: f64::INFINITY,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Same family and gamma, different lambda. For the sparse group LASSO
    /// the l2 weight is rescaled to keep the lambda2/lambda ratio.
    pub fn with_lambda(&self, lambda: f64) -> Self {
        let mut out = *self;
        if self.family == PenaltyFamily::SparseGroupLasso && self.lambda > 0.0 {
            out.lambda2 = self.lambda2 * lambda / self.lambda;
        }
        out.lambda = lambda;
        out
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        let mut out = *self;
        out.gamma = gamma;
        out.gamma_inner = gamma;
        out.validate()?;
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::DomainError(format!("lambda must be finite and >= 0, got {}", self.lambda)));
        }
        if !(self.lambda2 >= 0.0) || !self.lambda2.is_finite() {
            return Err(Error::DomainError(format!("lambda2 must be finite and >= 0, got {}", self.lambda2)));
        }
        let g = self.gamma;
        let ok = match self.family {
            PenaltyFamily::GroupLasso | PenaltyFamily::SparseGroupLasso => true,
            PenaltyFamily::GroupMcp2 | PenaltyFamily::CompositeMcp => g > 1.0,
            PenaltyFamily::GroupScad2 => g > 2.0,
            PenaltyFamily::GroupBridge1 => g > 0.0 && g < 1.0,
        };
        if !ok {
            return Err(Error::GammaOutOfRange {
                family: self.family.to_string(),
                gamma: g,
            });
        }
        Ok(())
    }

    /// Group-level penalty for a 2-norm family, evaluated at `norm = ||b_j||_2`
    /// with group weight `weight` (the c_j factor on lambda).
    pub(crate) fn two_norm_penalty(&self, norm: f64, weight: f64) -> f64 {
        let lam = weight * self.lambda;
        match self.family {
            PenaltyFamily::GroupLasso => lam * norm,
            PenaltyFamily::GroupMcp2 => rho_unchecked(norm, lam, self.gamma, ScalarPenalty::Mcp),
            PenaltyFamily::GroupScad2 => rho_unchecked(norm, lam, self.gamma, ScalarPenalty::Scad),
            _ => unreachable!("not a 2-norm family"),
        }
    }
}

/// Scalar penalties applied to a nonnegative argument.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScalarPenalty {
    L1,
    Mcp,
    Scad,
    Bridge,
    /// min(gamma*lambda^2/2, lambda*t); value only, no group solver.
    CappedL1,
}

fn check_gamma(gamma: f64, kind: ScalarPenalty) -> Result<()> {
    let ok = match kind {
        ScalarPenalty::L1 => true,
        ScalarPenalty::Mcp | ScalarPenalty::CappedL1 => gamma > 1.0,
        ScalarPenalty::Scad => gamma > 2.0,
        ScalarPenalty::Bridge => gamma > 0.0 && gamma <= 1.0,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::GammaOutOfRange {
            family: format!("{kind:?}"),
            gamma,
        })
    }
}

/// Penalty value rho(t; lambda, gamma) for t >= 0.
pub fn rho(t: f64, lambda: f64, gamma: f64, kind: ScalarPenalty) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::DomainError(format!("penalty argument must be >= 0, got {t}")));
    }
    check_gamma(gamma, kind)?;
    Ok(rho_unchecked(t, lambda, gamma, kind))
}

pub(crate) fn rho_unchecked(t: f64, lambda: f64, gamma: f64, kind: ScalarPenalty) -> f64 {
    match kind {
        ScalarPenalty::L1 => lambda * t,
        ScalarPenalty::Mcp => {
            if gamma.is_infinite() {
                lambda * t
            } else if t <= gamma * lambda {
                lambda * t - t * t / (2.0 * gamma)
            } else {
                gamma * lambda * lambda / 2.0
            }
        }
        ScalarPenalty::Scad => {
            if gamma.is_infinite() || t <= lambda {
                lambda * t
            } else if t <= gamma * lambda {
                (2.0 * gamma * lambda * t - t * t - lambda * lambda) / (2.0 * (gamma - 1.0))
            } else {
                lambda * lambda * (gamma + 1.0) / 2.0
            }
        }
        ScalarPenalty::Bridge => lambda * t.powf(gamma),
        ScalarPenalty::CappedL1 => (gamma * lambda * lambda / 2.0).min(lambda * t),
    }
}

/// Derivative of rho in t. Undefined for the bridge at t = 0.
pub fn rho_prime(t: f64, lambda: f64, gamma: f64, kind: ScalarPenalty) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::DomainError(format!("penalty argument must be >= 0, got {t}")));
    }
    check_gamma(gamma, kind)?;
    if kind == ScalarPenalty::Bridge && t == 0.0 && gamma < 1.0 {
        return Err(Error::DomainError("bridge derivative is unbounded at 0".into()));
    }
    Ok(rho_prime_unchecked(t, lambda, gamma, kind))
}

pub(crate) fn rho_prime_unchecked(t: f64, lambda: f64, gamma: f64, kind: ScalarPenalty) -> f64 {
    match kind {
        ScalarPenalty::L1 => lambda,
        ScalarPenalty::Mcp => {
            if gamma.is_infinite() {
                lambda
            } else if lambda == 0.0 {
                0.0
            } else {
                lambda * (1.0 - t / (gamma * lambda)).max(0.0)
            }
        }
        ScalarPenalty::Scad => {
            if gamma.is_infinite() {
                lambda
            } else if lambda == 0.0 {
                0.0
            } else {
                lambda * (((gamma - t / lambda).max(0.0)) / (gamma - 1.0)).min(1.0)
            }
        }
        ScalarPenalty::Bridge => gamma * lambda * t.powf(gamma - 1.0),
        ScalarPenalty::CappedL1 => {
            if lambda * t < gamma * lambda * lambda / 2.0 {
                lambda
            } else {
                0.0
            }
        }
    }
}

pub(crate) fn norm2(z: &[f64]) -> f64 {
    z.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Scalar soft threshold sign(z)(|z| - t)_+.
pub fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Multivariate soft threshold (1 - t/||z||_2)_+ z.
pub fn soft_threshold_vec(z: &[f64], t: f64) -> Vec<f64> {
    let norm = norm2(z);
    if norm <= t || norm == 0.0 {
        return vec![0.0; z.len()];
    }
    let scale = 1.0 - t / norm;
    z.iter().map(|v| scale * v).collect()
}

/// Group hard threshold: 0 when ||z||_2 <= lambda, z otherwise.
pub fn hard_threshold(z: &[f64], lambda: f64) -> Vec<f64> {
    if norm2(z) <= lambda {
        vec![0.0; z.len()]
    } else {
        z.to_vec()
    }
}

/// Limit of the group SCAD operator as gamma -> 2.
pub fn hard_threshold_star(z: &[f64], lambda: f64) -> Vec<f64> {
    if norm2(z) <= 2.0 * lambda {
        soft_threshold_vec(z, lambda)
    } else {
        z.to_vec()
    }
}

/// Exact minimizer of 1/2 ||z - theta||^2 + rho(||theta||_2; lambda, gamma)
/// for the 2-norm families.
pub fn solve_single_group(z: &[f64], lambda: f64, gamma: f64, family: PenaltyFamily) -> Result<Vec<f64>> {
    match family {
        PenaltyFamily::GroupLasso => {}
        PenaltyFamily::GroupMcp2 if gamma > 1.0 => {}
        PenaltyFamily::GroupScad2 if gamma > 2.0 => {}
        PenaltyFamily::GroupMcp2 | PenaltyFamily::GroupScad2 => {
            return Err(Error::GammaOutOfRange {
                family: family.to_string(),
                gamma,
            })
        }
        other => return Err(Error::UnsupportedFamily(other.to_string())),
    }
    let mut out = vec![0.0; z.len()];
    single_group_into(z, lambda, gamma, family, &mut out);
    Ok(out)
}

/// Allocation-free kernel used by the solver; parameters are assumed valid.
pub(crate) fn single_group_into(z: &[f64], lambda: f64, gamma: f64, family: PenaltyFamily, out: &mut [f64]) {
    let norm = norm2(z);
    let scale = if norm == 0.0 {
        0.0
    } else {
        match family {
            PenaltyFamily::GroupMcp2 if gamma.is_finite() => {
                if norm <= gamma * lambda {
                    soft_scale(norm, lambda) * gamma / (gamma - 1.0)
                } else {
                    1.0
                }
            }
            PenaltyFamily::GroupScad2 if gamma.is_finite() => {
                if norm <= 2.0 * lambda {
                    soft_scale(norm, lambda)
                } else if norm <= gamma * lambda {
                    soft_scale(norm, gamma * lambda / (gamma - 1.0)) * (gamma - 1.0) / (gamma - 2.0)
                } else {
                    1.0
                }
            }
            _ => soft_scale(norm, lambda),
        }
    };
    for (o, v) in out.iter_mut().zip(z) {
        *o = scale * v;
    }
}

#[inline]
fn soft_scale(norm: f64, t: f64) -> f64 {
    if norm <= t {
        0.0
    } else {
        1.0 - t / norm
    }
}
