//! K-fold cross-validation over (lambda, gamma) grids.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::GroupedDesign;
use crate::error::{Error, Result};
use crate::path::{default_lambda_min_ratio, fit_path, lambda_grid, path_lambda_max, PathOptions};
use crate::penalty::{PenaltyFamily, PenaltySpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub index: usize,
    pub lambda: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub family: PenaltyFamily,
    pub folds: usize,
    pub seed: u64,
    pub lambda_max: f64,
    pub lambdas: Vec<f64>,
    pub gammas: Vec<f64>,
    /// Gamma-major (lambda, gamma) pairs, matching `mean_cv_error` and `se`.
    pub grid: Vec<(f64, f64)>,
    pub mean_cv_error: Vec<f64>,
    pub se: Vec<f64>,
    pub chosen_min: GridPoint,
    pub chosen_1se: GridPoint,
    /// Fold index of every observation.
    pub fold_of: Vec<usize>,
}

/// Default gamma grid searched jointly with lambda: {1.2, 2.7, 3.7, inf}
/// restricted to the family's admissible range. Empty for families without
/// a concavity parameter to tune.
pub fn default_gamma_grid(family: PenaltyFamily) -> Vec<f64> {
    let full = [1.2, 2.7, 3.7, f64::INFINITY];
    match family {
        PenaltyFamily::GroupMcp2 => full.to_vec(),
        PenaltyFamily::GroupScad2 => full.iter().copied().filter(|g| *g > 2.0).collect(),
        PenaltyFamily::CompositeMcp => full[..3].to_vec(),
        _ => Vec::new(),
    }
}

/// Deterministic fold assignment: a seeded shuffle dealt round-robin.
pub fn assign_folds(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    let mut fold_of = vec![0; n];
    for (pos, &i) in idx.iter().enumerate() {
        fold_of[i] = pos % k;
    }
    fold_of
}

/// K-fold cross-validation of the template's path. Each fold rebuilds the
/// design (centering and standardization) from its training rows only and
/// scores the mean squared prediction error on the held-out rows. The lambda
/// grid is fixed from the full data so that all folds share it.
pub fn kfold_cv(design: &GroupedDesign, template: &PenaltySpec, path_opts: &PathOptions, k: usize, seed: u64) -> Result<CvReport> {
    let n = design.n();
    if k < 2 {
        return Err(Error::FoldTooSmall(format!("need at least 2 folds, got {k}")));
    }
    if k > n {
        return Err(Error::FoldTooSmall(format!("{k} folds for {n} observations")));
    }
    if n - n.div_ceil(k) < 2 {
        return Err(Error::FoldTooSmall("training folds would have fewer than 2 rows".into()));
    }

    let lmax = path_lambda_max(design, template, &path_opts.solver)?;
    let lambdas = match &path_opts.lambdas {
        Some(l) => l.clone(),
        None => {
            let ratio = path_opts.lambda_min_ratio.unwrap_or_else(|| default_lambda_min_ratio(design));
            lambda_grid(lmax, path_opts.n_lambda, ratio)
        }
    };
    let fold_opts = PathOptions { lambdas: Some(lambdas.clone()), ..path_opts.clone() };
    let fold_of = assign_folds(n, k, seed);

    let fold_errors: Vec<(Vec<f64>, Vec<f64>)> = (0..k)
        .into_par_iter()
        .map(|f| -> Result<(Vec<f64>, Vec<f64>)> {
            let train: Vec<usize> = (0..n).filter(|&i| fold_of[i] != f).collect();
            let test: Vec<usize> = (0..n).filter(|&i| fold_of[i] == f).collect();
            let train_design = design.subset_rows(&train)?;
            let path = fit_path(&train_design, template, &fold_opts)?;
            let raw = design.raw_x();
            let test_x = DMatrix::from_fn(test.len(), raw.ncols(), |i, c| raw[(test[i], c)]);
            let test_y: Vec<f64> = test.iter().map(|&i| design.raw_y()[i]).collect();
            let errs = path
                .fits
                .iter()
                .map(|fit| {
                    let pred = train_design.predict_raw(&fit.beta, &test_x)?;
                    Ok(pred.iter().zip(&test_y).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / test.len() as f64)
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok((path.gammas, errs))
        })
        .collect::<Result<_>>()?;

    let gammas = fold_errors[0].0.clone();
    let m = fold_errors[0].1.len();
    let kf = k as f64;
    let mut mean = vec![0.0; m];
    let mut se = vec![0.0; m];
    for i in 0..m {
        let vals: Vec<f64> = fold_errors.iter().map(|(_, e)| e[i]).collect();
        let mu = vals.iter().sum::<f64>() / kf;
        let var = vals.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (kf - 1.0);
        mean[i] = mu;
        se[i] = (var / kf).sqrt();
    }
    let grid: Vec<(f64, f64)> = gammas.iter().flat_map(|g| lambdas.iter().map(move |l| (*l, *g))).collect();

    let mut best = 0;
    for i in 1..m {
        if mean[i] < mean[best] {
            best = i;
        }
    }
    let cutoff = mean[best] + se[best];
    let mut one_se = best;
    for i in 0..m {
        if mean[i] <= cutoff {
            let (li, lb) = (grid[i].0, grid[one_se].0);
            if li > lb || (li == lb && mean[i] < mean[one_se]) {
                one_se = i;
            }
        }
    }
    let point = |i: usize| GridPoint { index: i, lambda: grid[i].0, gamma: grid[i].1 };

    Ok(CvReport {
        family: template.family,
        folds: k,
        seed,
        lambda_max: lmax,
        lambdas,
        gammas,
        chosen_min: point(best),
        chosen_1se: point(one_se),
        grid,
        mean_cv_error: mean,
        se,
        fold_of,
    })
}
