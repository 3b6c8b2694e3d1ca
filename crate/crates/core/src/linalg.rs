//! Dense and iterative symmetric eigenvalue kernels.
//!
//! The dense path is Householder tridiagonalization followed by the
//! implicit-shift QL iteration, values only. The iterative path is Lanczos
//! with full reorthogonalization, used when only the bottom of the
//! spectrum of a large sparse operator is needed.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// All eigenvalues of a symmetric matrix, ascending. Consumes the matrix.
pub fn symmetric_eigenvalues(mut a: Array2<f64>) -> Result<Vec<f64>> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "matrix must be square");
    if n == 0 {
        return Ok(Vec::new());
    }
    let (mut d, mut e) = householder_tridiagonalize(&mut a);
    ql_implicit_shift(&mut d, &mut e)?;
    d.sort_by(f64::total_cmp);
    Ok(d)
}

/// Householder reduction of a symmetric matrix to tridiagonal form,
/// accumulating no transforms. Returns (diagonal, subdiagonal) where
/// `e[i]` couples rows i-1 and i (`e[0]` is zero).
fn householder_tridiagonalize(a: &mut Array2<f64>) -> (Vec<f64>, Vec<f64>) {
    let n = a.nrows();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = 0.0;
        if l > 0 {
            let mut scale = 0.0;
            for k in 0..=l {
                scale += a[[i, k]].abs();
            }
            if scale == 0.0 {
                e[i] = a[[i, l]];
            } else {
                for k in 0..=l {
                    a[[i, k]] /= scale;
                    h += a[[i, k]] * a[[i, k]];
                }
                let f = a[[i, l]];
                let g = if f >= 0.0 { -h.sqrt() } else { h.sqrt() };
                e[i] = scale * g;
                h -= f * g;
                a[[i, l]] = f - g;
                let mut f_acc = 0.0;
                for j in 0..=l {
                    let mut g_acc = 0.0;
                    for k in 0..=j {
                        g_acc += a[[j, k]] * a[[i, k]];
                    }
                    for k in (j + 1)..=l {
                        g_acc += a[[k, j]] * a[[i, k]];
                    }
                    e[j] = g_acc / h;
                    f_acc += e[j] * a[[i, j]];
                }
                let hh = f_acc / (h + h);
                for j in 0..=l {
                    let f_j = a[[i, j]];
                    let g_j = e[j] - hh * f_j;
                    e[j] = g_j;
                    for k in 0..=j {
                        a[[j, k]] -= f_j * e[k] + g_j * a[[i, k]];
                    }
                }
            }
        } else {
            e[i] = a[[i, l]];
        }
        d[i] = h;
    }
    e[0] = 0.0;
    for i in 0..n {
        d[i] = a[[i, i]];
    }
    (d, e)
}

/// QL iteration with implicit shifts on a symmetric tridiagonal matrix.
/// Overwrites `d` with the (unsorted) eigenvalues.
fn ql_implicit_shift(d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let n = d.len();
    if n <= 1 {
        return Ok(());
    }
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    for l in 0..n {
        let mut iterations = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iterations += 1;
            if iterations > 50 {
                return Err(Error::EigenNonConvergence {
                    iterations,
                    residual: e[l].abs(),
                });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0f64, 1.0f64, 0.0f64);
            let mut underflow = false;
            for i in (l..m).rev() {
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// Smallest `want` eigenvalues of a symmetric operator given by `apply`,
/// via Lanczos with full reorthogonalization.
///
/// Convergence is declared when the bottom Ritz values move by less than
/// `tol` between checks. Degenerate eigenvalues are resolved only as far
/// as restarts after breakdown allow; use the dense path when exact
/// multiplicities matter (e.g. counting graph components).
pub fn lanczos_smallest<F>(
    apply: F,
    n: usize,
    want: usize,
    tol: f64,
    max_dim: usize,
) -> Result<Vec<f64>>
where
    F: Fn(&[f64], &mut [f64]),
{
    assert!(want >= 1 && want <= n);
    let max_dim = max_dim.min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(0x1a2c);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new(); // beta[j] couples v_j and v_{j+1}

    let mut v = random_unit(n, &mut rng);
    let mut prev_ritz: Option<Vec<f64>> = None;
    let mut w = vec![0.0; n];

    while basis.len() < max_dim {
        basis.push(v.clone());
        let j = basis.len() - 1;
        apply(&basis[j], &mut w);
        let alpha = dot(&basis[j], &w);
        alphas.push(alpha);
        // Full reorthogonalization, twice.
        for _ in 0..2 {
            for b in &basis {
                let proj = dot(b, &w);
                for (wi, bi) in w.iter_mut().zip(b) {
                    *wi -= proj * bi;
                }
            }
        }
        let beta = norm(&w);

        let dim = basis.len();
        if dim >= want && (dim % 5 == 0 || beta < 1e-12 || dim == max_dim) {
            let ritz = tridiagonal_eigenvalues(&alphas, &betas)?;
            let bottom: Vec<f64> = ritz.iter().take(want).copied().collect();
            if let Some(prev) = &prev_ritz {
                let delta = bottom
                    .iter()
                    .zip(prev)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0f64, f64::max);
                if delta < tol {
                    return Ok(bottom);
                }
            }
            prev_ritz = Some(bottom);
        }

        if beta < 1e-12 {
            // Invariant subspace: restart in its orthogonal complement.
            if basis.len() >= want {
                let ritz = tridiagonal_eigenvalues(&alphas, &betas)?;
                return Ok(ritz.into_iter().take(want).collect());
            }
            betas.push(0.0);
            v = random_unit(n, &mut rng);
            for b in &basis {
                let proj = dot(b, &v);
                for (vi, bi) in v.iter_mut().zip(b) {
                    *vi -= proj * bi;
                }
            }
            let nv = norm(&v);
            if nv < 1e-12 {
                break;
            }
            for x in &mut v {
                *x /= nv;
            }
        } else {
            betas.push(beta);
            v = w.iter().map(|x| x / beta).collect();
        }
    }

    let ritz = tridiagonal_eigenvalues(&alphas, &betas)?;
    if ritz.len() >= want {
        let bottom: Vec<f64> = ritz.iter().take(want).copied().collect();
        if let Some(prev) = &prev_ritz {
            let delta = bottom
                .iter()
                .zip(prev)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            if delta < tol {
                return Ok(bottom);
            }
        }
        return Err(Error::EigenNonConvergence {
            iterations: basis.len(),
            residual: prev_ritz
                .map(|p| {
                    bottom
                        .iter()
                        .zip(&p)
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0f64, f64::max)
                })
                .unwrap_or(f64::NAN),
        });
    }
    Err(Error::EigenNonConvergence {
        iterations: basis.len(),
        residual: f64::NAN,
    })
}

fn tridiagonal_eigenvalues(alphas: &[f64], betas: &[f64]) -> Result<Vec<f64>> {
    let mut d = alphas.to_vec();
    let mut e = vec![0.0; d.len()];
    for (i, &b) in betas.iter().enumerate() {
        if i + 1 < e.len() {
            e[i + 1] = b;
        }
    }
    ql_implicit_shift(&mut d, &mut e)?;
    d.sort_by(f64::total_cmp);
    Ok(d)
}

fn random_unit(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
    let nv = norm(&v);
    for x in &mut v {
        *x /= nv;
    }
    v
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
