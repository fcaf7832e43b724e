//! Simulated datasets with known grouped coefficients.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioName {
    Figure1,
    Figure3,
    Custom,
}

impl fmt::Display for ScenarioName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScenarioName::Figure1 => "figure1",
            ScenarioName::Figure3 => "figure3",
            ScenarioName::Custom => "custom",
        })
    }
}

impl FromStr for ScenarioName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "figure1" => Ok(ScenarioName::Figure1),
            "figure3" => Ok(ScenarioName::Figure3),
            "custom" => Ok(ScenarioName::Custom),
            other => Err(Error::BadSpec(format!("unknown scenario '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: ScenarioName,
    pub n: usize,
    pub sigma: f64,
    /// Equicorrelation between every pair of columns, in [0, 1).
    #[serde(default)]
    pub correlation: f64,
    pub seed: u64,
    /// Per-group true coefficients; required for `custom`, ignored otherwise.
    #[serde(default)]
    pub groups: Option<Vec<Vec<f64>>>,
}

impl ScenarioSpec {
    pub fn figure1(n: usize, sigma: f64, seed: u64) -> Self {
        ScenarioSpec { name: ScenarioName::Figure1, n, sigma, correlation: 0.0, seed, groups: None }
    }

    pub fn figure3(n: usize, sigma: f64, seed: u64) -> Self {
        ScenarioSpec { name: ScenarioName::Figure3, n, sigma, correlation: 0.0, seed, groups: None }
    }

    pub fn custom(groups: Vec<Vec<f64>>, n: usize, sigma: f64, correlation: f64, seed: u64) -> Self {
        ScenarioSpec { name: ScenarioName::Custom, n, sigma, correlation, seed, groups: Some(groups) }
    }

    pub fn group_coefficients(&self) -> Result<Vec<Vec<f64>>> {
        match self.name {
            ScenarioName::Figure1 => {
                let s = std::f64::consts::SQRT_2;
                let mut g = vec![vec![-s, s], vec![0.5, 1.0, -0.5]];
                g.extend(std::iter::repeat_n(vec![0.0; 3], 18));
                Ok(g)
            }
            ScenarioName::Figure3 => Ok(vec![vec![1.0, 1.0, 0.0], vec![0.0, 0.0, -1.0]]),
            ScenarioName::Custom => {
                let g = self.groups.clone().ok_or_else(|| Error::BadSpec("custom scenario needs group coefficients".into()))?;
                if g.is_empty() || g.iter().any(|v| v.is_empty()) {
                    return Err(Error::BadSpec("custom groups must be nonempty".into()));
                }
                if g.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(Error::BadSpec("custom coefficients must be finite".into()));
                }
                Ok(g)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::BadSpec(format!("n must be >= 2, got {}", self.n)));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::BadSpec(format!("sigma must be finite and >= 0, got {}", self.sigma)));
        }
        if !(0.0..1.0).contains(&self.correlation) {
            return Err(Error::BadSpec(format!("correlation must lie in [0, 1), got {}", self.correlation)));
        }
        self.group_coefficients().map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// Centered design, n x p.
    pub x: DMatrix<f64>,
    pub y: Vec<f64>,
    pub names: Vec<String>,
    /// Group label (1-based) of every column.
    pub labels: Vec<i64>,
    pub true_beta: Vec<f64>,
    /// Labels of groups with a nonzero true coefficient.
    pub support: Vec<i64>,
}

impl Dataset {
    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn n_groups(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| *m as usize)
    }

    /// 2-norm of every group's true coefficients.
    pub fn true_group_norms(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_groups()];
        for (b, l) in self.true_beta.iter().zip(&self.labels) {
            out[(*l - 1) as usize] += b * b;
        }
        out.iter().map(|v| v.sqrt()).collect()
    }
}

/// Draws columns x = sqrt(1 - rho) z + sqrt(rho) w with a shared w per row,
/// centers them, and sets y = X beta + sigma eps.
pub fn simulate(spec: &ScenarioSpec) -> Result<Dataset> {
    spec.validate()?;
    let coefs = spec.group_coefficients()?;
    let p: usize = coefs.iter().map(Vec::len).sum();
    let n = spec.n;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (a, b) = ((1.0 - spec.correlation).sqrt(), spec.correlation.sqrt());
    let mut x = DMatrix::zeros(n, p);
    for i in 0..n {
        let w: f64 = rng.sample(StandardNormal);
        for c in 0..p {
            let z: f64 = rng.sample(StandardNormal);
            x[(i, c)] = a * z + b * w;
        }
    }
    for c in 0..p {
        let m = x.column(c).mean();
        x.column_mut(c).add_scalar_mut(-m);
    }
    let true_beta: Vec<f64> = coefs.iter().flatten().copied().collect();
    let mean = &x * nalgebra::DVector::from_column_slice(&true_beta);
    let y: Vec<f64> = mean.iter().map(|m| m + spec.sigma * rng.sample::<f64, _>(StandardNormal)).collect();

    let mut labels = Vec::with_capacity(p);
    let mut names = Vec::with_capacity(p);
    let mut support = Vec::new();
    for (j, g) in coefs.iter().enumerate() {
        let label = j as i64 + 1;
        if g.iter().any(|v| *v != 0.0) {
            support.push(label);
        }
        for k in 0..g.len() {
            labels.push(label);
            names.push(format!("g{}_{}", label, k + 1));
        }
    }
    Ok(Dataset { x, y, names, labels, true_beta, support })
}
