#![allow(dead_code)]

use grpsel::{rho, PenaltyFamily, ScalarPenalty};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, n: usize, p: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal))
}

pub fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

fn scalar_kind(family: PenaltyFamily) -> ScalarPenalty {
    match family {
        PenaltyFamily::GroupLasso => ScalarPenalty::L1,
        PenaltyFamily::GroupMcp2 => ScalarPenalty::Mcp,
        PenaltyFamily::GroupScad2 => ScalarPenalty::Scad,
        f => panic!("no scalar penalty for {f}"),
    }
}

/// Radial criterion s -> (||z|| - s)^2 / 2 + rho(s) along the direction of z.
fn radial(a: f64, s: f64, lambda: f64, gamma: f64, kind: ScalarPenalty) -> f64 {
    0.5 * (a - s).powi(2) + rho(s, lambda, gamma, kind).unwrap()
}

/// Brute-force minimizer of ||z - theta||^2 / 2 + rho(||theta||; lambda, gamma).
/// The minimizer is a nonnegative multiple of z with length in [0, ||z||],
/// so a dense radial grid followed by golden-section refinement of the
/// bracketing cell finds it.
pub fn brute_single_group(z: &[f64], lambda: f64, gamma: f64, family: PenaltyFamily) -> Vec<f64> {
    let kind = scalar_kind(family);
    let a = z.iter().map(|v| v * v).sum::<f64>().sqrt();
    if a == 0.0 {
        return vec![0.0; z.len()];
    }
    let m = 20_000;
    let f = |s: f64| radial(a, s, lambda, gamma, kind);
    let mut best = 0;
    let mut best_val = f(0.0);
    for i in 1..=m {
        let v = f(a * i as f64 / m as f64);
        if v < best_val {
            best_val = v;
            best = i;
        }
    }
    let h = a / m as f64;
    let (mut lo, mut hi) = (((best as f64) - 1.0).max(0.0) * h, ((best as f64 + 1.0) * h).min(a));
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let c = hi - phi * (hi - lo);
        let d = lo + phi * (hi - lo);
        if f(c) <= f(d) {
            hi = d;
        } else {
            lo = c;
        }
    }
    let mut s = 0.5 * (lo + hi);
    // the endpoints carry kinks; keep whichever candidate is lowest
    for cand in [0.0, a] {
        if f(cand) <= f(s) {
            s = cand;
        }
    }
    z.iter().map(|v| v * s / a).collect()
}

pub fn single_group_objective(z: &[f64], theta: &[f64], lambda: f64, gamma: f64, family: PenaltyFamily) -> f64 {
    let kind = scalar_kind(family);
    let dist: f64 = z.iter().zip(theta).map(|(a, b)| (a - b).powi(2)).sum();
    let norm = theta.iter().map(|v| v * v).sum::<f64>().sqrt();
    0.5 * dist + rho(norm, lambda, gamma, kind).unwrap()
}

/// Upper bound on the distance from `theta` to the minimizer of
/// ||z - theta||^2 / 2 + t1 ||theta||_1 + t2 ||theta||_2, from an explicit
/// subgradient (the criterion is 1-strongly convex).
pub fn sgl_prox_certificate(z: &[f64], theta: &[f64], t1: f64, t2: f64) -> f64 {
    let nt = theta.iter().map(|v| v * v).sum::<f64>().sqrt();
    if nt == 0.0 {
        // choose s1 = clamp(z / t1), then s2 along the remainder
        let rem: Vec<f64> = z.iter().map(|v| v - t1 * (v / t1).clamp(-1.0, 1.0)).collect();
        let nr = rem.iter().map(|v| v * v).sum::<f64>().sqrt();
        return (nr - t2).max(0.0);
    }
    let mut g2 = 0.0;
    for (zk, tk) in z.iter().zip(theta) {
        let base = tk - zk + t2 * tk / nt;
        let gk = if *tk != 0.0 {
            base + t1 * tk.signum()
        } else {
            // free s1 in [-1, 1]
            let s = (-base / t1.max(1e-300)).clamp(-1.0, 1.0);
            base + t1 * s
        };
        g2 += gk * gk;
    }
    g2.sqrt()
}

/// Plain cyclic coordinate descent LASSO on unit-variance columns:
/// (1/2n)||y - Xb||^2 + lambda ||b||_1.
pub fn lasso_cd(x: &DMatrix<f64>, y: &[f64], lambda: f64) -> Vec<f64> {
    let (n, p) = x.shape();
    let nf = n as f64;
    let mut b = vec![0.0; p];
    let mut r: Vec<f64> = y.to_vec();
    let sq: Vec<f64> = (0..p).map(|k| x.column(k).norm_squared() / nf).collect();
    for _ in 0..100_000 {
        let mut change = 0.0_f64;
        for k in 0..p {
            let z: f64 = (0..n).map(|i| x[(i, k)] * r[i]).sum::<f64>() / nf + sq[k] * b[k];
            let new = grpsel::soft_threshold(z, lambda) / sq[k];
            let d = new - b[k];
            if d != 0.0 {
                for i in 0..n {
                    r[i] -= d * x[(i, k)];
                }
                b[k] = new;
                change = change.max(d.abs());
            }
        }
        if change < 1e-13 {
            break;
        }
    }
    b
}

/// Columns centered and scaled so that X'X/n = I exactly (up to rounding).
pub fn orthonormal_design(rng: &mut ChaCha8Rng, n: usize, p: usize) -> DMatrix<f64> {
    let mut x = gaussian_matrix(rng, n, p);
    for c in 0..p {
        let m = x.column(c).mean();
        x.column_mut(c).add_scalar_mut(-m);
    }
    let q = x.qr().q();
    q * (n as f64).sqrt()
}

pub fn print_line(ok: bool, label: &str, detail: &str) {
    println!("{} {label}: {detail}", if ok { "PASS" } else { "FAIL" });
}
