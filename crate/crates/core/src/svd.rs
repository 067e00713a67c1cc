//! Singular value decomposition.
//!
//! Two independent paths are provided on purpose: the main path is
//! Householder bidiagonalization followed by implicit-shift QR on the
//! bidiagonal band (Golub–Kahan), and [`DenseMatrix::svd_jacobi`] is a
//! one-sided Jacobi implementation kept as an in-repo cross-check. The
//! test suite verifies one against the other.

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::tol;

/// Thin SVD factors `A = U · diag(σ) · V^T` with `p = sigma.len()`
/// singular values.
///
/// Invariants: `sigma` is non-increasing and non-negative, `u` (rows×p)
/// has orthonormal columns and `vt` (p×cols) has orthonormal rows.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    pub u: DenseMatrix,
    pub sigma: Vec<f64>,
    pub vt: DenseMatrix,
}

impl SvdFactors {
    /// Multiply the factors back together.
    pub fn reconstruct(&self) -> DenseMatrix {
        let p = self.sigma.len();
        let scaled =
            DenseMatrix::from_fn(p, self.vt.cols(), |i, j| self.sigma[i] * self.vt.get(i, j));
        self.u.matmul(&scaled)
    }

    /// Keep the top `r` singular triplets.
    pub fn truncate(&self, r: usize) -> Result<SvdFactors> {
        let p = self.sigma.len();
        if r == 0 || r > p {
            return Err(Error::Rank(format!("requested rank {r} outside 1..={p}")));
        }
        let u = DenseMatrix::from_fn(self.u.rows(), r, |i, j| self.u.get(i, j));
        let vt = DenseMatrix::from_fn(r, self.vt.cols(), |i, j| self.vt.get(i, j));
        Ok(SvdFactors {
            u,
            sigma: self.sigma[..r].to_vec(),
            vt,
        })
    }

    /// Numerical rank: singular values above `rel_tol · σ₁`.
    pub fn rank(&self, rel_tol: f64) -> usize {
        let s1 = self.sigma.first().copied().unwrap_or(0.0);
        if s1 == 0.0 {
            return 0;
        }
        self.sigma.iter().filter(|&&s| s > rel_tol * s1).count()
    }

    /// Right singular vectors as columns of an m×p matrix.
    pub fn v(&self) -> DenseMatrix {
        self.vt.transpose()
    }
}

impl DenseMatrix {
    /// Full (thin) SVD with `p = min(rows, cols)` via Golub–Kahan.
    pub fn svd_full(&self) -> Result<SvdFactors> {
        golub_kahan(self, true).map(|(f, _)| f.expect("factors requested"))
    }

    /// Singular values only; skips accumulating U and V.
    pub fn singular_values(&self) -> Result<Vec<f64>> {
        golub_kahan(self, false).map(|(_, s)| s)
    }

    /// Top-`r` factors of the full SVD.
    ///
    /// Exactly-singular inputs yield trailing zero singular values rather
    /// than an error; `r` outside `1..=min(rows, cols)` is a rank error.
    pub fn svd_truncated(&self, r: usize) -> Result<SvdFactors> {
        let p = self.rows().min(self.cols());
        if r == 0 || r > p {
            return Err(Error::Rank(format!(
                "truncation rank {r} outside 1..={p} for a {}x{} matrix",
                self.rows(),
                self.cols()
            )));
        }
        self.svd_full()?.truncate(r)
    }

    /// One-sided Jacobi SVD; the reference path.
    pub fn svd_jacobi(&self) -> Result<SvdFactors> {
        if self.rows() < self.cols() {
            let f = self.transpose().svd_jacobi()?;
            return Ok(SvdFactors {
                u: f.vt.transpose(),
                sigma: f.sigma,
                vt: f.u.transpose(),
            });
        }
        jacobi_tall(self)
    }
}

fn golub_kahan(a: &DenseMatrix, accumulate: bool) -> Result<(Option<SvdFactors>, Vec<f64>)> {
    if a.rows() < a.cols() {
        let (f, s) = golub_kahan(&a.transpose(), accumulate)?;
        let f = f.map(|f| SvdFactors {
            u: f.vt.transpose(),
            sigma: f.sigma,
            vt: f.u.transpose(),
        });
        return Ok((f, s));
    }

    let (n, m) = (a.rows(), a.cols());
    let mut work = a.clone();
    let mut u = if accumulate {
        Some(DenseMatrix::identity(n))
    } else {
        None
    };
    let mut v = if accumulate {
        Some(DenseMatrix::identity(m))
    } else {
        None
    };
    let mut diag = vec![0.0; m];
    let mut off = vec![0.0; m.saturating_sub(1)];

    bidiagonalize(&mut work, &mut diag, &mut off, u.as_mut(), v.as_mut());
    bidiagonal_qr(&mut diag, &mut off, u.as_mut(), v.as_mut())?;

    let sigma = diag;
    let factors = match (u, v) {
        (Some(u), Some(v)) => {
            // thin slices: first m columns of U, all of V transposed
            let u_thin = DenseMatrix::from_fn(n, m, |i, j| u.get(i, j));
            Some(SvdFactors {
                u: u_thin,
                sigma: sigma.clone(),
                vt: v.transpose(),
            })
        }
        _ => None,
    };
    Ok((factors, sigma))
}

/// Householder reduction of a tall matrix to upper bidiagonal form.
/// `diag` receives the diagonal, `off` the superdiagonal; `u` and `v`
/// accumulate the left and right transforms when present.
#[allow(clippy::needless_range_loop)] // offset index pairs read clearer
fn bidiagonalize(
    a: &mut DenseMatrix,
    diag: &mut [f64],
    off: &mut [f64],
    mut u: Option<&mut DenseMatrix>,
    mut v: Option<&mut DenseMatrix>,
) {
    let (n, m) = (a.rows(), a.cols());
    let mut house = vec![0.0; n.max(m)];

    for k in 0..m {
        // Left reflector: zero a[k+1.., k]. Skipped when that part is
        // already zero.
        let below: f64 = (k + 1..n).map(|i| a.get(i, k) * a.get(i, k)).sum();
        if below > 0.0 {
            let x0 = a.get(k, k);
            let norm = (below + x0 * x0).sqrt();
            let alpha = if x0 >= 0.0 { -norm } else { norm };
            let len = n - k;
            house[0] = x0 - alpha;
            for (t, i) in (k + 1..n).enumerate() {
                house[t + 1] = a.get(i, k);
            }
            let vnorm2: f64 = house[..len].iter().map(|x| x * x).sum();
            if vnorm2 > 0.0 {
                let beta = 2.0 / vnorm2;
                for j in k..m {
                    let mut s = 0.0;
                    for t in 0..len {
                        s += house[t] * a.get(k + t, j);
                    }
                    s *= beta;
                    for t in 0..len {
                        let val = a.get(k + t, j) - s * house[t];
                        a.set(k + t, j, val);
                    }
                }
                if let Some(u) = u.as_deref_mut() {
                    for row in 0..n {
                        let mut s = 0.0;
                        for t in 0..len {
                            s += u.get(row, k + t) * house[t];
                        }
                        s *= beta;
                        for t in 0..len {
                            let val = u.get(row, k + t) - s * house[t];
                            u.set(row, k + t, val);
                        }
                    }
                }
            }
            // rounding residue below the diagonal is structurally zero
            for i in k + 1..n {
                a.set(i, k, 0.0);
            }
            a.set(k, k, alpha);
        }
        diag[k] = a.get(k, k);

        // Right reflector: zero a[k, k+2..]. Skipped when that part is
        // already zero.
        if k + 1 < m {
            let beyond: f64 = (k + 2..m).map(|j| a.get(k, j) * a.get(k, j)).sum();
            if beyond > 0.0 {
                let x0 = a.get(k, k + 1);
                let norm = (beyond + x0 * x0).sqrt();
                let alpha = if x0 >= 0.0 { -norm } else { norm };
                let len = m - (k + 1);
                house[0] = x0 - alpha;
                for (t, j) in (k + 2..m).enumerate() {
                    house[t + 1] = a.get(k, j);
                }
                let vnorm2: f64 = house[..len].iter().map(|x| x * x).sum();
                if vnorm2 > 0.0 {
                    let beta = 2.0 / vnorm2;
                    for i in k..n {
                        let mut s = 0.0;
                        for t in 0..len {
                            s += house[t] * a.get(i, k + 1 + t);
                        }
                        s *= beta;
                        for t in 0..len {
                            let val = a.get(i, k + 1 + t) - s * house[t];
                            a.set(i, k + 1 + t, val);
                        }
                    }
                    if let Some(v) = v.as_deref_mut() {
                        for row in 0..m {
                            let mut s = 0.0;
                            for t in 0..len {
                                s += v.get(row, k + 1 + t) * house[t];
                            }
                            s *= beta;
                            for t in 0..len {
                                let val = v.get(row, k + 1 + t) - s * house[t];
                                v.set(row, k + 1 + t, val);
                            }
                        }
                    }
                }
                for j in k + 2..m {
                    a.set(k, j, 0.0);
                }
                a.set(k, k + 1, alpha);
            }
            off[k] = a.get(k, k + 1);
        }
    }
}

fn givens(a: f64, b: f64) -> (f64, f64) {
    let r = a.hypot(b);
    if r == 0.0 {
        (1.0, 0.0)
    } else {
        (a / r, b / r)
    }
}

fn rotate_cols(m: &mut DenseMatrix, p: usize, q: usize, c: f64, s: f64) {
    for row in 0..m.rows() {
        let mp = m.get(row, p);
        let mq = m.get(row, q);
        m.set(row, p, c * mp + s * mq);
        m.set(row, q, c * mq - s * mp);
    }
}

/// Implicit-shift QR on the bidiagonal band. On return `diag` holds the
/// singular values sorted descending and `off` is zeroed.
#[allow(clippy::needless_range_loop)]
fn bidiagonal_qr(
    diag: &mut [f64],
    off: &mut [f64],
    mut u: Option<&mut DenseMatrix>,
    mut v: Option<&mut DenseMatrix>,
) -> Result<()> {
    let p = diag.len();
    if p == 0 {
        return Ok(());
    }

    let eps = tol::SVD_CONV_REL;
    let max_iter = (10 * p * p).max(200);
    let mut iter = 0usize;
    let mut hi = p - 1;

    while hi > 0 {
        // Deflate converged trailing entries.
        let band_scale = diag
            .iter()
            .chain(off.iter())
            .fold(0.0_f64, |acc, x| acc.max(x.abs()));
        if off[hi - 1].abs() <= eps * (diag[hi - 1].abs() + diag[hi].abs()).max(band_scale) {
            off[hi - 1] = 0.0;
            hi -= 1;
            continue;
        }

        let mut lo = hi - 1;
        while lo > 0 {
            if off[lo - 1].abs() <= eps * (diag[lo - 1].abs() + diag[lo].abs()).max(band_scale) {
                off[lo - 1] = 0.0;
                break;
            }
            lo -= 1;
        }

        iter += 1;
        if iter > max_iter {
            return Err(Error::Convergence { iterations: iter });
        }

        // A negligible diagonal in the middle of the block blocks the
        // shift; chase the coupled off-diagonal out with rotations.
        let zero_thresh = eps * band_scale;
        if let Some(idx) = (lo..hi).find(|&i| diag[i].abs() <= zero_thresh) {
            diag[idx] = 0.0;
            let mut z = off[idx];
            off[idx] = 0.0;
            for j in idx + 1..=hi {
                let (c, s) = givens(diag[j], z);
                diag[j] = c * diag[j] + s * z;
                if j < hi {
                    z = -s * off[j];
                    off[j] *= c;
                }
                if let Some(u) = u.as_deref_mut() {
                    rotate_cols(u, j, idx, c, s);
                }
            }
            continue;
        }
        if diag[hi].abs() <= zero_thresh {
            diag[hi] = 0.0;
            let mut z = off[hi - 1];
            off[hi - 1] = 0.0;
            for j in (lo..hi).rev() {
                let (c, s) = givens(diag[j], z);
                diag[j] = c * diag[j] + s * z;
                if j > lo {
                    z = -s * off[j - 1];
                    off[j - 1] *= c;
                }
                if let Some(v) = v.as_deref_mut() {
                    rotate_cols(v, j, hi, c, s);
                }
            }
            continue;
        }

        // Wilkinson shift from the trailing 2x2 of B^T B.
        let d_hi = diag[hi];
        let d_hi1 = diag[hi - 1];
        let e_hi1 = off[hi - 1];
        let e_hi2 = if hi >= 2 && hi - 1 > lo {
            off[hi - 2]
        } else {
            0.0
        };
        let t11 = d_hi1 * d_hi1 + e_hi2 * e_hi2;
        let t12 = d_hi1 * e_hi1;
        let t22 = d_hi * d_hi + e_hi1 * e_hi1;
        let delta = (t11 - t22) / 2.0;
        let sign_d = if delta >= 0.0 { 1.0 } else { -1.0 };
        let mu = t22 - t12 * t12 / (delta + sign_d * (delta * delta + t12 * t12).sqrt());

        let mut x = diag[lo] * diag[lo] - mu;
        let mut z = diag[lo] * off[lo];

        for k in lo..hi {
            // right rotation zeroing z against x
            let (c, s) = givens(x, z);
            if k > lo {
                off[k - 1] = c * x + s * z;
            }
            let dk = diag[k];
            let ek = off[k];
            let dk1 = diag[k + 1];
            diag[k] = c * dk + s * ek;
            off[k] = c * ek - s * dk;
            let bulge = s * dk1;
            diag[k + 1] = c * dk1;
            if let Some(v) = v.as_deref_mut() {
                rotate_cols(v, k, k + 1, c, s);
            }

            // left rotation clearing the bulge
            let (c2, s2) = givens(diag[k], bulge);
            diag[k] = c2 * diag[k] + s2 * bulge;
            let old_ek = off[k];
            let old_dk1 = diag[k + 1];
            off[k] = c2 * old_ek + s2 * old_dk1;
            diag[k + 1] = c2 * old_dk1 - s2 * old_ek;
            if k + 1 < hi {
                let old_ek1 = off[k + 1];
                x = off[k];
                z = s2 * old_ek1;
                off[k + 1] = c2 * old_ek1;
            }
            if let Some(u) = u.as_deref_mut() {
                rotate_cols(u, k, k + 1, c2, s2);
            }
        }
    }

    // Flip negative values into U, then sort descending.
    for i in 0..p {
        if diag[i] < 0.0 {
            diag[i] = -diag[i];
            if let Some(u) = u.as_deref_mut() {
                for row in 0..u.rows() {
                    let val = -u.get(row, i);
                    u.set(row, i, val);
                }
            }
        }
    }
    for i in 0..p {
        let mut max_idx = i;
        for j in i + 1..p {
            if diag[j] > diag[max_idx] {
                max_idx = j;
            }
        }
        if max_idx != i {
            diag.swap(i, max_idx);
            if let Some(u) = u.as_deref_mut() {
                swap_cols(u, i, max_idx);
            }
            if let Some(v) = v.as_deref_mut() {
                swap_cols(v, i, max_idx);
            }
        }
    }
    Ok(())
}

fn swap_cols(m: &mut DenseMatrix, a: usize, b: usize) {
    for row in 0..m.rows() {
        let va = m.get(row, a);
        let vb = m.get(row, b);
        m.set(row, a, vb);
        m.set(row, b, va);
    }
}

/// One-sided Jacobi on a tall matrix: rotate column pairs until all are
/// mutually orthogonal, then read off norms as singular values.
fn jacobi_tall(a: &DenseMatrix) -> Result<SvdFactors> {
    let (n, m) = (a.rows(), a.cols());
    let mut w = a.clone();
    let mut v = DenseMatrix::identity(m);
    let max_sweeps = (10 * m * m).max(30);

    let mut converged = false;
    for _ in 0..max_sweeps {
        let mut rotated = false;
        for p in 0..m.saturating_sub(1) {
            for q in p + 1..m {
                let mut alpha = 0.0;
                let mut beta = 0.0;
                let mut gamma = 0.0;
                for i in 0..n {
                    let wp = w.get(i, p);
                    let wq = w.get(i, q);
                    alpha += wp * wp;
                    beta += wq * wq;
                    gamma += wp * wq;
                }
                if gamma.abs() <= tol::SVD_CONV_REL * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..n {
                    let wp = w.get(i, p);
                    let wq = w.get(i, q);
                    w.set(i, p, c * wp - s * wq);
                    w.set(i, q, s * wp + c * wq);
                }
                for i in 0..m {
                    let vp = v.get(i, p);
                    let vq = v.get(i, q);
                    v.set(i, p, c * vp - s * vq);
                    v.set(i, q, s * vp + c * vq);
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged && m > 1 {
        return Err(Error::Convergence {
            iterations: max_sweeps,
        });
    }

    let mut order: Vec<usize> = (0..m).collect();
    let norms: Vec<f64> = (0..m)
        .map(|j| {
            (0..n)
                .map(|i| w.get(i, j) * w.get(i, j))
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    order.sort_by(|&x, &y| norms[y].partial_cmp(&norms[x]).unwrap());

    let sigma: Vec<f64> = order.iter().map(|&j| norms[j]).collect();
    let sigma_max = sigma.first().copied().unwrap_or(0.0);
    let mut u = DenseMatrix::zeros(n, m);
    let mut completed: Vec<usize> = Vec::new();
    for (col, &j) in order.iter().enumerate() {
        if sigma[col] > sigma_max * 1e-13 && sigma[col] > 0.0 {
            for i in 0..n {
                u.set(i, col, w.get(i, j) / sigma[col]);
            }
        } else {
            completed.push(col);
        }
    }
    if !completed.is_empty() {
        complete_basis(&mut u, &completed);
    }
    let vt = DenseMatrix::from_fn(m, m, |i, j| v.get(j, order[i]));

    Ok(SvdFactors { u, sigma, vt })
}

/// Fill the listed zero columns of `u` with unit vectors orthogonal to
/// every other column (Gram–Schmidt against standard basis candidates).
#[allow(clippy::needless_range_loop)]
fn complete_basis(u: &mut DenseMatrix, empty_cols: &[usize]) {
    let n = u.rows();
    let m = u.cols();
    for &col in empty_cols {
        'candidates: for cand in 0..n {
            let mut vec: Vec<f64> = (0..n).map(|i| if i == cand { 1.0 } else { 0.0 }).collect();
            // projecting against still-zero columns is a no-op, so only
            // the column being filled needs skipping
            for j in 0..m {
                if j == col {
                    continue;
                }
                let proj: f64 = (0..n).map(|i| vec[i] * u.get(i, j)).sum();
                for i in 0..n {
                    vec[i] -= proj * u.get(i, j);
                }
            }
            let norm: f64 = vec.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.5 {
                for i in 0..n {
                    u.set(i, col, vec[i] / norm);
                }
                break 'candidates;
            }
        }
    }
}
