//! Dense real eigenvalue computation for small matrices.
//!
//! Householder reduction to upper Hessenberg form followed by the implicit
//! double-shift QR iteration, eigenvalues only. The QR sweep follows the
//! classic EISPACK/Jama `hqr` scheme with the usual exceptional shifts at
//! iterations 10 and 30. Matrix sizes in this crate stay below ~130, so no
//! blocking or balancing is attempted.

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use num_complex::Complex64;

/// Dimension cap for [`eigenvalues`].
pub const MAX_EIG_SIZE: usize = 128;

/// All eigenvalues of a real square matrix, unordered.
pub fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "eigenvalues of a {}x{} matrix",
            m.nrows(),
            m.ncols()
        )));
    }
    if n > MAX_EIG_SIZE {
        return Err(Error::InvalidArgument(format!(
            "matrix dimension {n} exceeds {MAX_EIG_SIZE}"
        )));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    if n == 1 {
        return Ok(vec![Complex64::new(m[(0, 0)], 0.0)]);
    }
    let mut h = m.clone();
    hessenberg_in_place(&mut h);
    hqr_eigenvalues(h)
}

/// Spectral radius of a spectrum.
pub fn spectral_radius(spectrum: &[Complex64]) -> f64 {
    spectrum.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// 2-norm (largest singular value) of a real matrix.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

/// Greedy nearest-pair matching distance between two equally sized spectra.
///
/// Repeatedly removes the globally closest pair and reports the largest
/// distance used. Adequate for the well-separated Gauss spectra handled here.
pub fn pairing_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len(), "pairing requires equal multiset sizes");
    let mut left = a.to_vec();
    let mut right = b.to_vec();
    let mut worst = 0.0f64;
    while !left.is_empty() {
        let mut best = (0, 0, f64::INFINITY);
        for (i, x) in left.iter().enumerate() {
            for (j, y) in right.iter().enumerate() {
                let d = (x - y).norm();
                if d < best.2 {
                    best = (i, j, d);
                }
            }
        }
        worst = worst.max(best.2);
        left.swap_remove(best.0);
        right.swap_remove(best.1);
    }
    worst
}

/// Householder similarity reduction to upper Hessenberg form.
fn hessenberg_in_place(h: &mut DMatrix<f64>) {
    let n = h.nrows();
    let mut ort = vec![0.0; n];
    for m in 1..n.saturating_sub(1) {
        let scale: f64 = (m..n).map(|i| h[(i, m - 1)].abs()).sum();
        if scale == 0.0 {
            continue;
        }
        let mut hsum = 0.0;
        for i in (m..n).rev() {
            ort[i] = h[(i, m - 1)] / scale;
            hsum += ort[i] * ort[i];
        }
        let mut g = hsum.sqrt();
        if ort[m] > 0.0 {
            g = -g;
        }
        hsum -= ort[m] * g;
        ort[m] -= g;

        // H <- (I - u u^T / hsum) H (I - u u^T / hsum)
        for j in m..n {
            let mut f = 0.0;
            for i in (m..n).rev() {
                f += ort[i] * h[(i, j)];
            }
            f /= hsum;
            for i in m..n {
                h[(i, j)] -= f * ort[i];
            }
        }
        for i in 0..n {
            let mut f = 0.0;
            for j in (m..n).rev() {
                f += ort[j] * h[(i, j)];
            }
            f /= hsum;
            for j in m..n {
                h[(i, j)] -= f * ort[j];
            }
        }
        h[(m, m - 1)] = scale * g;
        for i in m + 1..n {
            h[(i, m - 1)] = 0.0;
        }
    }
}

/// Implicit double-shift QR on an upper Hessenberg matrix, eigenvalues only.
fn hqr_eigenvalues(mut h: DMatrix<f64>) -> Result<Vec<Complex64>> {
    let nn = h.nrows();
    let eps = f64::EPSILON;
    let mut re = vec![0.0; nn];
    let mut im = vec![0.0; nn];

    let mut norm = 0.0;
    for i in 0..nn {
        for j in i.saturating_sub(1)..nn {
            norm += h[(i, j)].abs();
        }
    }
    if norm == 0.0 {
        return Ok(vec![Complex64::new(0.0, 0.0); nn]);
    }

    let mut n = nn as i64 - 1;
    let mut exshift = 0.0;
    let mut iter = 0usize;
    let mut total_iter = 0usize;
    let max_total_iter = 50 * nn.max(4);
    let (mut p, mut q, mut r, mut s, mut z);
    let (mut w, mut x, mut y);

    while n >= 0 {
        let nu = n as usize;

        // look for a single small subdiagonal element
        let mut l = nu;
        while l > 0 {
            s = h[(l - 1, l - 1)].abs() + h[(l, l)].abs();
            if s == 0.0 {
                s = norm;
            }
            if h[(l, l - 1)].abs() < eps * s {
                break;
            }
            l -= 1;
        }

        if l == nu {
            // one root found
            re[nu] = h[(nu, nu)] + exshift;
            im[nu] = 0.0;
            n -= 1;
            iter = 0;
        } else if l + 1 == nu {
            // two roots found
            w = h[(nu, nu - 1)] * h[(nu - 1, nu)];
            p = (h[(nu - 1, nu - 1)] - h[(nu, nu)]) / 2.0;
            q = p * p + w;
            z = q.abs().sqrt();
            x = h[(nu, nu)] + exshift;
            if q >= 0.0 {
                // real pair
                z = if p >= 0.0 { p + z } else { p - z };
                re[nu - 1] = x + z;
                re[nu] = if z != 0.0 { x - w / z } else { re[nu - 1] };
                im[nu - 1] = 0.0;
                im[nu] = 0.0;
            } else {
                // complex conjugate pair
                re[nu - 1] = x + p;
                re[nu] = x + p;
                im[nu - 1] = z;
                im[nu] = -z;
            }
            n -= 2;
            iter = 0;
        } else {
            // no convergence yet: form shift
            x = h[(nu, nu)];
            y = 0.0;
            w = 0.0;
            if l < nu {
                y = h[(nu - 1, nu - 1)];
                w = h[(nu, nu - 1)] * h[(nu - 1, nu)];
            }

            if iter == 10 {
                // exceptional shift
                exshift += x;
                for i in l..=nu {
                    h[(i, i)] -= x;
                }
                s = h[(nu, nu - 1)].abs() + h[(nu - 1, nu - 2)].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            if iter == 30 {
                s = (y - x) / 2.0;
                s = s * s + w;
                if s > 0.0 {
                    s = s.sqrt();
                    if y < x {
                        s = -s;
                    }
                    s = x - w / ((y - x) / 2.0 + s);
                    for i in l..=nu {
                        h[(i, i)] -= s;
                    }
                    exshift += s;
                    x = 0.964;
                    y = 0.964;
                    w = 0.964;
                }
            }

            iter += 1;
            total_iter += 1;
            if total_iter > max_total_iter {
                return Err(Error::Numeric(format!(
                    "QR iteration did not converge after {total_iter} sweeps"
                )));
            }

            // look for two consecutive small subdiagonal elements
            let mut m = nu - 2;
            loop {
                z = h[(m, m)];
                r = x - z;
                s = y - z;
                p = (r * s - w) / h[(m + 1, m)] + h[(m, m + 1)];
                q = h[(m + 1, m + 1)] - z - r - s;
                r = h[(m + 2, m + 1)];
                s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                if h[(m, m - 1)].abs() * (q.abs() + r.abs())
                    < eps
                        * (p.abs()
                            * (h[(m - 1, m - 1)].abs() + z.abs() + h[(m + 1, m + 1)].abs()))
                {
                    break;
                }
                m -= 1;
            }
            for i in m + 2..=nu {
                h[(i, i - 2)] = 0.0;
                if i > m + 2 {
                    h[(i, i - 3)] = 0.0;
                }
            }

            // double QR step on rows l..=nu and columns m..=nu
            for k in m..nu {
                let notlast = k != nu - 1;
                if k != m {
                    p = h[(k, k - 1)];
                    q = h[(k + 1, k - 1)];
                    r = if notlast { h[(k + 2, k - 1)] } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x == 0.0 {
                        continue;
                    }
                    p /= x;
                    q /= x;
                    r /= x;
                }
                s = (p * p + q * q + r * r).sqrt();
                if p < 0.0 {
                    s = -s;
                }
                if s != 0.0 {
                    if k != m {
                        h[(k, k - 1)] = -s * x;
                    } else if l != m {
                        h[(k, k - 1)] = -h[(k, k - 1)];
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    z = r / s;
                    q /= p;
                    r /= p;

                    for j in k..nn {
                        p = h[(k, j)] + q * h[(k + 1, j)];
                        if notlast {
                            p += r * h[(k + 2, j)];
                            h[(k + 2, j)] -= p * z;
                        }
                        h[(k, j)] -= p * x;
                        h[(k + 1, j)] -= p * y;
                    }
                    for i in 0..=nu.min(k + 3) {
                        p = x * h[(i, k)] + y * h[(i, k + 1)];
                        if notlast {
                            p += z * h[(i, k + 2)];
                            h[(i, k + 2)] -= p * r;
                        }
                        h[(i, k)] -= p;
                        h[(i, k + 1)] -= p * q;
                    }
                }
            }
        }
    }

    Ok((0..nn).map(|i| Complex64::new(re[i], im[i])).collect())
}
