//! Solver checks against the independent oracles, each over a fixed number
//! of seeded random instances. Every check returns the worst observed
//! deviation so callers can print it.

use favnet::linalg::max_abs;
use favnet::precision::{aclime, clime};
use favnet::var_estimation::{dantzig_lp, lasso_fista, FistaOptions, YuleWalkerSystem};
use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use super::oracles::{aclime_brute, l1_min_box_brute, scalar_lasso};

pub const INSTANCES: usize = 100;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn uniform_matrix(r: &mut ChaCha8Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || r.random_range(lo..hi))
}

fn random_spd(r: &mut ChaCha8Rng, p: usize, shift: f64) -> Array2<f64> {
    let a = uniform_matrix(r, p, p + 2, -1.0, 1.0);
    a.dot(&a.t()) / (p + 2) as f64 + Array2::<f64>::eye(p) * shift
}

/// FISTA on a diagonal Gram matrix against the entrywise soft-threshold
/// closed form.
pub fn fista_vs_soft_threshold(tol: f64) -> Result<f64, String> {
    let mut r = rng(1);
    let mut worst = 0.0f64;
    for case in 0..INSTANCES {
        let k = r.random_range(1..=6);
        let cols = r.random_range(1..=3);
        let diag: Vec<f64> = (0..k).map(|_| r.random_range(0.2..3.0)).collect();
        let big_g = Array2::from_diag(&ndarray::Array1::from(diag.clone()));
        let small_g = uniform_matrix(&mut r, k, cols, -1.0, 1.0);
        let lambda = r.random_range(0.01..1.5);
        let sys = YuleWalkerSystem { order_b: 1, big_g, small_g: small_g.clone() };
        let fit = lasso_fista(&sys, lambda, FistaOptions { max_iter: 100_000, tol: 1e-15 })
            .map_err(|e| format!("instance {case}: {e}"))?;
        let expect = Array2::from_shape_fn((k, cols), |(i, j)| scalar_lasso(diag[i], small_g[[i, j]], lambda));
        let dev = max_abs((&fit.beta - &expect).view());
        worst = worst.max(dev);
        if dev > tol {
            return Err(format!("instance {case}: deviation {dev:.3e}"));
        }
    }
    Ok(worst)
}

/// Dantzig columns against vertex enumeration with `pd <= 4`. Objectives
/// always agree; solutions are compared when the vertex optimum is unique.
pub fn dantzig_vs_vertices(tol: f64) -> Result<f64, String> {
    let mut r = rng(2);
    let mut worst = 0.0f64;
    for case in 0..INSTANCES {
        let k = r.random_range(1..=4);
        let big_g = random_spd(&mut r, k, 0.2);
        let small_g = uniform_matrix(&mut r, k, 2, -1.0, 1.0);
        let lambda = r.random_range(0.02..0.5) * max_abs(small_g.view()).max(1e-3);
        let sys = YuleWalkerSystem { order_b: 1, big_g: big_g.clone(), small_g: small_g.clone() };
        let fit = dantzig_lp(&sys, lambda).map_err(|e| format!("instance {case}: {e}"))?;
        for j in 0..2 {
            let target = small_g.column(j).to_vec();
            let (x, obj, unique) = l1_min_box_brute(big_g.view(), &target, &vec![lambda; k])
                .ok_or_else(|| format!("instance {case}: oracle found no vertex"))?;
            let ours: f64 = fit.beta.column(j).iter().map(|v| v.abs()).sum();
            let mut dev = (ours - obj).abs();
            if unique {
                for (a, b) in fit.beta.column(j).iter().zip(&x) {
                    dev = dev.max((a - b).abs());
                }
            }
            worst = worst.max(dev);
            if dev > tol {
                return Err(format!("instance {case}, column {j}: deviation {dev:.3e}"));
            }
        }
    }
    Ok(worst)
}

/// CLIME on the identity with `η = 0.1`.
pub fn clime_identity(tol: f64) -> Result<f64, String> {
    let mut worst = 0.0f64;
    for p in 1..=8 {
        let eye = Array2::<f64>::eye(p);
        let delta = clime(eye.view(), 0.1).map_err(|e| e.to_string())?;
        let dev = max_abs((&delta - &(eye * 0.9)).view());
        worst = worst.max(dev);
        if dev > tol {
            return Err(format!("p = {p}: deviation {dev:.3e}"));
        }
    }
    Ok(worst)
}

/// Adaptive CLIME at `p <= 3` against the two-step definition solved by
/// vertex enumeration; instances with several optimal vertices are skipped.
/// Returns the worst deviation and the number of compared instances.
pub fn aclime_vs_brute(tol: f64) -> Result<(f64, usize), String> {
    let mut r = rng(4);
    let mut worst = 0.0f64;
    let mut compared = 0;
    for case in 0..INSTANCES {
        let p = r.random_range(2..=3);
        let gamma = random_spd(&mut r, p, 0.3);
        let n = r.random_range(30..400);
        let eta = r.random_range(0.3..2.0);
        let ours = aclime(gamma.view(), eta, n).map_err(|e| format!("instance {case}: {e}"))?;
        let brute = aclime_brute(&gamma, eta, n, favnet::precision::POSITIVITY_FLOOR)
            .ok_or_else(|| format!("instance {case}: oracle infeasible"))?;
        if !brute.unique {
            continue;
        }
        compared += 1;
        let dev = max_abs((&ours - &brute.delta).view());
        worst = worst.max(dev);
        if dev > tol {
            return Err(format!("instance {case}: deviation {dev:.3e}\n{ours:?}\n{:?}", brute.delta));
        }
    }
    if compared < INSTANCES / 2 {
        return Err(format!("only {compared} instances had a unique oracle solution"));
    }
    Ok((worst, compared))
}
