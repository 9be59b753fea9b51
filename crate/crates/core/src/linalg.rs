//! Dense eigensolvers and small matrix helpers.
//!
//! Real symmetric problems are solved with the cyclic Jacobi method. Complex
//! Hermitian problems are mapped onto the real symmetric embedding
//! `[[Re, -Im], [Im, Re]]`, whose spectrum is that of the Hermitian matrix
//! with every eigenvalue repeated twice.

use ndarray::{Array1, Array2, ArrayView2};
use num_complex::Complex64;

const MAX_SWEEPS: usize = 100;

/// Eigenpairs of a real symmetric matrix, eigenvalues in descending order.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Array1<f64>,
    /// Eigenvectors stored as columns, aligned with `values`.
    pub vectors: Array2<f64>,
}

/// Eigenpairs of a complex Hermitian matrix, eigenvalues in descending order.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Array1<f64>,
    pub vectors: Array2<Complex64>,
}

/// In-place cyclic Jacobi on a row-major `n x n` buffer. Returns the diagonal
/// (unsorted eigenvalues); `vecs`, when given, accumulates the rotations.
fn jacobi_in_place(a: &mut [f64], n: usize, mut vecs: Option<&mut [f64]>) -> Vec<f64> {
    if let Some(v) = vecs.as_deref_mut() {
        v.iter_mut().for_each(|x| *x = 0.0);
        for i in 0..n {
            v[i * n + i] = 1.0;
        }
    }
    let frob2: f64 = a.iter().map(|x| x * x).sum();
    if frob2 == 0.0 {
        return vec![0.0; n];
    }
    let tol2 = (f64::EPSILON * f64::EPSILON) * frob2;

    for sweep in 0..MAX_SWEEPS {
        let mut off2 = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off2 += a[p * n + q] * a[p * n + q];
            }
        }
        if 2.0 * off2 <= tol2 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let g = 100.0 * apq.abs();
                // after a few sweeps, annihilate entries below the diagonal's resolution
                if sweep > 3 && app.abs() + g == app.abs() && aqq.abs() + g == aqq.abs() {
                    a[p * n + q] = 0.0;
                    a[q * n + p] = 0.0;
                    continue;
                }
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.is_infinite() {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                a[p * n + p] = app - t * apq;
                a[q * n + q] = aqq + t * apq;
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for r in 0..n {
                    if r == p || r == q {
                        continue;
                    }
                    let arp = a[r * n + p];
                    let arq = a[r * n + q];
                    let new_rp = c * arp - s * arq;
                    let new_rq = s * arp + c * arq;
                    a[r * n + p] = new_rp;
                    a[p * n + r] = new_rp;
                    a[r * n + q] = new_rq;
                    a[q * n + r] = new_rq;
                }
                if let Some(v) = vecs.as_deref_mut() {
                    for r in 0..n {
                        let vrp = v[r * n + p];
                        let vrq = v[r * n + q];
                        v[r * n + p] = c * vrp - s * vrq;
                        v[r * n + q] = s * vrp + c * vrq;
                    }
                }
            }
        }
    }
    (0..n).map(|i| a[i * n + i]).collect()
}

fn descending_order(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&i, &j| values[j].total_cmp(&values[i]).then(i.cmp(&j)));
    idx
}

fn symmetrised_buffer(a: ArrayView2<f64>) -> Vec<f64> {
    let n = a.nrows();
    let mut buf = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            buf[i * n + j] = 0.5 * (a[[i, j]] + a[[j, i]]);
        }
    }
    buf
}

/// Full eigendecomposition of a real symmetric matrix (the symmetric part of
/// `a` is used).
pub fn symmetric_eigen(a: ArrayView2<f64>) -> SymmetricEigen {
    assert_eq!(a.nrows(), a.ncols(), "square matrix required");
    let n = a.nrows();
    let mut buf = symmetrised_buffer(a);
    let mut v = vec![0.0; n * n];
    let diag = jacobi_in_place(&mut buf, n, Some(&mut v));
    let order = descending_order(&diag);
    let values = Array1::from_iter(order.iter().map(|&i| diag[i]));
    let mut vectors = Array2::zeros((n, n));
    for (col, &k) in order.iter().enumerate() {
        for r in 0..n {
            vectors[[r, col]] = v[r * n + k];
        }
    }
    SymmetricEigen { values, vectors }
}

/// Eigenvalues only, descending.
pub fn symmetric_eigenvalues(a: ArrayView2<f64>) -> Array1<f64> {
    assert_eq!(a.nrows(), a.ncols(), "square matrix required");
    let n = a.nrows();
    let mut buf = symmetrised_buffer(a);
    let diag = jacobi_in_place(&mut buf, n, None);
    Array1::from_iter(descending_order(&diag).into_iter().map(|i| diag[i]))
}

fn real_embedding(h: ArrayView2<Complex64>) -> Vec<f64> {
    let p = h.nrows();
    let n = 2 * p;
    let mut buf = vec![0.0; n * n];
    for i in 0..p {
        for j in 0..p {
            // Hermitian part, so the embedding is exactly symmetric
            let z = 0.5 * (h[[i, j]] + h[[j, i]].conj());
            buf[i * n + j] = z.re;
            buf[(i + p) * n + (j + p)] = z.re;
            buf[(i + p) * n + j] = z.im;
            buf[i * n + (j + p)] = -z.im;
        }
    }
    buf
}

/// Eigenvalues of a Hermitian matrix, descending. Each embedded pair is
/// averaged into one value.
pub fn hermitian_eigenvalues(h: ArrayView2<Complex64>) -> Array1<f64> {
    let p = h.nrows();
    let mut buf = real_embedding(h);
    let mut diag = jacobi_in_place(&mut buf, 2 * p, None);
    diag.sort_by(|a, b| b.total_cmp(a));
    Array1::from_iter((0..p).map(|j| 0.5 * (diag[2 * j] + diag[2 * j + 1])))
}

/// Full eigendecomposition of a Hermitian matrix.
///
/// Each eigenvector is normalised so that its largest-modulus entry is real
/// and positive.
pub fn hermitian_eigen(h: ArrayView2<Complex64>) -> HermitianEigen {
    assert_eq!(h.nrows(), h.ncols(), "square matrix required");
    let p = h.nrows();
    let n = 2 * p;
    let mut buf = real_embedding(h);
    let mut v = vec![0.0; n * n];
    let diag = jacobi_in_place(&mut buf, n, Some(&mut v));
    let order = descending_order(&diag);

    // Pair deduplication: the real eigenvector (u; w) maps to u + i w, and its
    // twin maps to i (u + i w). Gram-Schmidt in C^p keeps one per pair.
    let mut accepted: Vec<Vec<Complex64>> = Vec::with_capacity(p);
    let mut used = vec![false; n];
    for &threshold in &[0.5, 1e-6] {
        for &k in &order {
            if accepted.len() == p {
                break;
            }
            if used[k] {
                continue;
            }
            let mut z: Vec<Complex64> = (0..p)
                .map(|r| Complex64::new(v[r * n + k], v[(r + p) * n + k]))
                .collect();
            for e in &accepted {
                let proj: Complex64 = e.iter().zip(&z).map(|(a, b)| a.conj() * b).sum();
                for (zi, ei) in z.iter_mut().zip(e) {
                    *zi -= proj * ei;
                }
            }
            let norm = z.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            if norm > threshold {
                z.iter_mut().for_each(|c| *c /= norm);
                used[k] = true;
                accepted.push(z);
            }
        }
    }
    debug_assert_eq!(accepted.len(), p);

    let hh = h;
    let mut pairs: Vec<(f64, Vec<Complex64>)> = accepted
        .into_iter()
        .map(|mut z| {
            fix_phase(&mut z);
            // Rayleigh quotient z* H z
            let mut rq = 0.0;
            for i in 0..p {
                let mut hz = Complex64::new(0.0, 0.0);
                for j in 0..p {
                    hz += hh[[i, j]] * z[j];
                }
                rq += (z[i].conj() * hz).re;
            }
            (rq, z)
        })
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut values = Array1::zeros(p);
    let mut vectors = Array2::zeros((p, p));
    for (col, (val, z)) in pairs.into_iter().enumerate() {
        values[col] = val;
        for r in 0..p {
            vectors[[r, col]] = z[r];
        }
    }
    HermitianEigen { values, vectors }
}

fn fix_phase(z: &mut [Complex64]) {
    let mut best = 0;
    let mut best_mod = -1.0;
    for (i, c) in z.iter().enumerate() {
        let m = c.norm();
        if m > best_mod * (1.0 + 1e-12) {
            best = i;
            best_mod = m;
        }
    }
    if best_mod > 0.0 {
        let phase = z[best].conj() / best_mod;
        z.iter_mut().for_each(|c| *c *= phase);
        z[best] = Complex64::new(z[best].norm(), 0.0);
    }
}

/// Largest absolute entry, `|M|_inf` in elementwise sense.
pub fn max_abs(a: ArrayView2<f64>) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Spectral norm (largest singular value).
pub fn spectral_norm(a: ArrayView2<f64>) -> f64 {
    let ata = a.t().dot(&a);
    symmetric_eigenvalues(ata.view())[0].max(0.0).sqrt()
}

/// Frobenius norm.
pub fn frobenius_norm(a: ArrayView2<f64>) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Inverse of a square matrix by Gauss-Jordan elimination with partial
/// pivoting; `None` if numerically singular.
pub fn inverse(a: ArrayView2<f64>) -> Option<Array2<f64>> {
    let n = a.nrows();
    let mut m = a.to_owned();
    let mut inv = Array2::<f64>::eye(n);
    let scale = max_abs(a).max(f64::MIN_POSITIVE);
    for col in 0..n {
        let (piv, pmax) = (col..n)
            .map(|r| (r, m[[r, col]].abs()))
            .fold((col, -1.0), |b, x| if x.1 > b.1 { x } else { b });
        if pmax <= 1e-14 * scale {
            return None;
        }
        if piv != col {
            for j in 0..n {
                m.swap([piv, j], [col, j]);
                inv.swap([piv, j], [col, j]);
            }
        }
        let d = m[[col, col]];
        for j in 0..n {
            m[[col, j]] /= d;
            inv[[col, j]] /= d;
        }
        for r in 0..n {
            if r != col {
                let f = m[[r, col]];
                if f != 0.0 {
                    for j in 0..n {
                        m[[r, j]] -= f * m[[col, j]];
                        inv[[r, j]] -= f * inv[[col, j]];
                    }
                }
            }
        }
    }
    Some(inv)
}

/// Natural log of |det(a)| and the sign of the determinant, by LU with
/// partial pivoting. Sign is 0 for a singular matrix.
pub fn log_abs_det(a: ArrayView2<f64>) -> (f64, f64) {
    let n = a.nrows();
    let mut m = a.to_owned();
    let mut sign = 1.0;
    let mut logdet = 0.0;
    for col in 0..n {
        let (piv, pmax) = (col..n)
            .map(|r| (r, m[[r, col]].abs()))
            .fold((col, -1.0), |b, x| if x.1 > b.1 { x } else { b });
        if pmax == 0.0 {
            return (f64::NEG_INFINITY, 0.0);
        }
        if piv != col {
            for j in 0..n {
                m.swap([piv, j], [col, j]);
            }
            sign = -sign;
        }
        let d = m[[col, col]];
        if d < 0.0 {
            sign = -sign;
        }
        logdet += d.abs().ln();
        for r in (col + 1)..n {
            let f = m[[r, col]] / d;
            if f != 0.0 {
                for j in col..n {
                    m[[r, j]] -= f * m[[col, j]];
                }
            }
        }
    }
    (logdet, sign)
}
