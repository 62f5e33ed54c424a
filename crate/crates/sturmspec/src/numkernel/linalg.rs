use num_complex::Complex64;

use super::{CMatrix, InertiaSignature, Tolerances};
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 64;

/// Eigendecomposition of a Hermitian matrix by cyclic complex Jacobi
/// rotations.
///
/// Returns eigenvalues in ascending order together with a unitary matrix of
/// matching eigenvector columns, so `m * v = v * diag(vals)` up to roundoff.
/// The input is checked against `tols.herm_tol` and symmetrised exactly
/// before iteration.
pub fn herm_eig(m: &CMatrix, tols: &Tolerances) -> Result<(Vec<f64>, CMatrix)> {
    if !m.is_square() {
        return Err(Error::NotHermitian(format!("matrix is {}x{}", m.rows(), m.cols())));
    }
    let defect = m.herm_defect();
    let scale = m.max_abs();
    if defect > tols.herm_tol * (1.0 + scale) {
        return Err(Error::NotHermitian(format!(
            "symmetry defect {defect:.3e} exceeds tolerance at scale {scale:.3e}"
        )));
    }
    let n = m.rows();
    let mut a = m.hermitized();
    let mut v = CMatrix::identity(n);
    if n <= 1 {
        let vals = (0..n).map(|i| a[(i, i)].re).collect();
        return Ok((vals, v));
    }

    let stop = (n as f64) * f64::EPSILON * scale.max(f64::MIN_POSITIVE);
    let mut converged = false;
    for _sweep in 0..MAX_SWEEPS {
        if off_diag_norm(&a) <= stop {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let beta = a[(p, q)];
                let babs = beta.norm();
                if babs <= f64::EPSILON * 0.01 * scale.max(f64::MIN_POSITIVE) {
                    a[(p, q)] = Complex64::ZERO;
                    a[(q, p)] = Complex64::ZERO;
                    continue;
                }
                let alpha = a[(p, p)].re;
                let gamma = a[(q, q)].re;
                let phase = beta / babs;
                // annihilation angle: smaller root of t^2 - 2*tau*t - 1 = 0
                let tau = (alpha - gamma) / (2.0 * babs);
                let t = if tau >= 0.0 {
                    -1.0 / (tau + (tau * tau + 1.0).sqrt())
                } else {
                    1.0 / (-tau + (tau * tau + 1.0).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = phase * (t * c);

                apply_rotation(&mut a, &mut v, p, q, c, s);
            }
        }
    }
    if !converged && off_diag_norm(&a) > stop {
        return Err(Error::NoConvergence { sweeps: MAX_SWEEPS });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.partial_cmp(&a[(j, j)].re).unwrap());
    let vals: Vec<f64> = order.iter().map(|&i| a[(i, i)].re).collect();
    let vecs = CMatrix::from_fn(n, n, |i, j| v[(i, order[j])]);
    Ok((vals, vecs))
}

/// One two-sided rotation `a <- g* a g`, `v <- v g`, where `g` differs from
/// the identity only at `(p,p)=(q,q)=c`, `(p,q)=s`, `(q,p)=-conj(s)`.
fn apply_rotation(a: &mut CMatrix, v: &mut CMatrix, p: usize, q: usize, c: f64, s: Complex64) {
    let n = a.rows();
    // columns: a <- a g
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = akp * c - akq * s.conj();
        a[(k, q)] = akp * s + akq * c;
    }
    // rows: a <- g* a
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = apk * c - aqk * s;
        a[(q, k)] = apk * s.conj() + aqk * c;
    }
    a[(p, q)] = Complex64::ZERO;
    a[(q, p)] = Complex64::ZERO;
    a[(p, p)] = Complex64::new(a[(p, p)].re, 0.0);
    a[(q, q)] = Complex64::new(a[(q, q)].re, 0.0);
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * c - vkq * s.conj();
        v[(k, q)] = vkp * s + vkq * c;
    }
}

fn off_diag_norm(a: &CMatrix) -> f64 {
    let n = a.rows();
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                sum += a[(i, j)].norm_sqr();
            }
        }
    }
    sum.sqrt()
}

/// Inertia of a Hermitian matrix. Eigenvalues within
/// `rank_tol * max(1, |lambda|_max)` of zero count as zero.
pub fn inertia(m: &CMatrix, tols: &Tolerances) -> Result<InertiaSignature> {
    let (vals, _) = herm_eig(m, tols)?;
    let scale = vals.iter().fold(0.0f64, |acc, &x| acc.max(x.abs()));
    let tau = tols.rank_tol * scale.max(1.0);
    let mut sig = InertiaSignature::new(0, 0, 0);
    for &x in &vals {
        if x < -tau {
            sig.r_minus += 1;
        } else if x > tau {
            sig.r_plus += 1;
        } else {
            sig.r_zero += 1;
        }
    }
    Ok(sig)
}

/// One-sided Jacobi SVD: returns singular values in ascending order and the
/// unitary matrix of right-singular vectors.
///
/// Column rotations orthogonalise the working copy in place, which keeps full
/// relative accuracy for tiny singular values. Forming the Gram matrix
/// `m* m` instead would bury exact kernels at `sqrt(eps) * sigma_max`, far
/// above the rank threshold.
fn svd_right(m: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    let cols = m.cols();
    let mut a = m.clone();
    let mut v = CMatrix::identity(cols);
    if cols > 1 {
        // columns below this are numerically zero; rotating two such
        // noise columns against each other never meets the relative
        // threshold and would stall the sweep
        let floor2 = (a.fro_norm() * f64::EPSILON).powi(2);
        let mut converged = false;
        for _sweep in 0..MAX_SWEEPS {
            let mut rotated = false;
            for p in 0..cols {
                for q in (p + 1)..cols {
                    // 2x2 Gram data for the column pair
                    let mut gpp = 0.0;
                    let mut gqq = 0.0;
                    let mut gpq = Complex64::ZERO;
                    for k in 0..a.rows() {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        gpp += akp.norm_sqr();
                        gqq += akq.norm_sqr();
                        gpq += akp.conj() * akq;
                    }
                    if gpp <= floor2 || gqq <= floor2 {
                        continue;
                    }
                    let babs = gpq.norm();
                    if babs <= f64::EPSILON * (gpp * gqq).sqrt() {
                        continue;
                    }
                    rotated = true;
                    let phase = gpq / babs;
                    let tau = (gpp - gqq) / (2.0 * babs);
                    let t = if tau >= 0.0 {
                        -1.0 / (tau + (tau * tau + 1.0).sqrt())
                    } else {
                        1.0 / (-tau + (tau * tau + 1.0).sqrt())
                    };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = phase * (t * c);
                    for k in 0..a.rows() {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = akp * c - akq * s.conj();
                        a[(k, q)] = akp * s + akq * c;
                    }
                    for k in 0..cols {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = vkp * c - vkq * s.conj();
                        v[(k, q)] = vkp * s + vkq * c;
                    }
                }
            }
            if !rotated {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NoConvergence { sweeps: MAX_SWEEPS });
        }
    }
    let mut order: Vec<usize> = (0..cols).collect();
    let norms: Vec<f64> = (0..cols)
        .map(|j| (0..a.rows()).map(|k| a[(k, j)].norm_sqr()).sum::<f64>().sqrt())
        .collect();
    order.sort_by(|&i, &j| norms[i].partial_cmp(&norms[j]).unwrap());
    let sv = order.iter().map(|&i| norms[i]).collect();
    let vecs = CMatrix::from_fn(cols, cols, |i, j| v[(i, order[j])]);
    Ok((sv, vecs))
}

/// Singular values in ascending order.
pub fn singular_values(m: &CMatrix, _tols: &Tolerances) -> Result<Vec<f64>> {
    Ok(svd_right(m)?.0)
}

/// Numerical rank: number of singular values above
/// `rank_tol * max(1, sigma_max)`.
pub fn num_rank(m: &CMatrix, tols: &Tolerances) -> Result<usize> {
    let sv = singular_values(m, tols)?;
    let smax = sv.last().copied().unwrap_or(0.0);
    let tau = tols.rank_tol * smax.max(1.0);
    Ok(sv.iter().filter(|&&s| s > tau).count())
}

/// Spectral norm (largest singular value).
pub fn two_norm(m: &CMatrix, tols: &Tolerances) -> Result<f64> {
    let sv = singular_values(m, tols)?;
    Ok(sv.last().copied().unwrap_or(0.0))
}

/// Orthonormal basis of the numerical kernel of `m` (columns). May have zero
/// columns. Directions are right-singular vectors whose singular value falls
/// below the rank threshold.
pub fn nullspace(m: &CMatrix, tols: &Tolerances) -> Result<CMatrix> {
    let (svs, vecs) = svd_right(m)?;
    let smax = svs.last().copied().unwrap_or(0.0);
    let tau = tols.rank_tol * smax.max(1.0);
    let keep: Vec<usize> = (0..svs.len()).filter(|&i| svs[i] <= tau).collect();
    let mut out = CMatrix::zeros(m.cols(), keep.len());
    for (j, &i) in keep.iter().enumerate() {
        out.set_block(0, j, &vecs.column(i));
    }
    Ok(out)
}

/// Solve `a x = b` by LU with partial pivoting. `b` may have several columns.
pub fn solve(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    assert!(a.is_square(), "solve needs a square matrix");
    assert_eq!(a.rows(), b.rows(), "rhs row count mismatch");
    let n = a.rows();
    let m = b.cols();
    let mut lu = a.clone();
    let mut x = b.clone();
    let scale = a.max_abs().max(f64::MIN_POSITIVE);
    for col in 0..n {
        let mut piv = col;
        let mut best = lu[(col, col)].norm();
        for r in (col + 1)..n {
            let v = lu[(r, col)].norm();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best <= (n as f64) * f64::EPSILON * scale {
            return Err(Error::Singular(format!("pivot {col} collapsed (|pivot| = {best:.3e})")));
        }
        if piv != col {
            for j in 0..n {
                let t = lu[(col, j)];
                lu[(col, j)] = lu[(piv, j)];
                lu[(piv, j)] = t;
            }
            for j in 0..m {
                let t = x[(col, j)];
                x[(col, j)] = x[(piv, j)];
                x[(piv, j)] = t;
            }
        }
        let d = lu[(col, col)];
        for r in (col + 1)..n {
            let f = lu[(r, col)] / d;
            if f == Complex64::ZERO {
                continue;
            }
            for j in col..n {
                let v = lu[(col, j)];
                lu[(r, j)] -= f * v;
            }
            for j in 0..m {
                let v = x[(col, j)];
                x[(r, j)] -= f * v;
            }
        }
    }
    for col in (0..n).rev() {
        let d = lu[(col, col)];
        for j in 0..m {
            let mut acc = x[(col, j)];
            for k in (col + 1)..n {
                acc -= lu[(col, k)] * x[(k, j)];
            }
            x[(col, j)] = acc / d;
        }
    }
    Ok(x)
}

/// Solve `x m = b` from the right, i.e. compute `b m^{-1}`.
pub fn solve_right(b: &CMatrix, m: &CMatrix) -> Result<CMatrix> {
    Ok(solve(&m.transpose(), &b.transpose())?.transpose())
}

pub fn inverse(a: &CMatrix) -> Result<CMatrix> {
    solve(a, &CMatrix::identity(a.rows()))
}

/// QR factorization of a square matrix by Householder reflections, with the
/// diagonal of `R` normalized real nonnegative: `m = Q R`, `Q` unitary.
pub fn qr_square(m: &CMatrix) -> (CMatrix, CMatrix) {
    assert!(m.is_square(), "qr_square needs a square matrix");
    let n = m.rows();
    let mut r = m.clone();
    let mut q = CMatrix::identity(n);
    for k in 0..n {
        let mut nrm2 = 0.0;
        for i in k..n {
            nrm2 += r[(i, k)].norm_sqr();
        }
        let nrm = nrm2.sqrt();
        if nrm == 0.0 {
            continue;
        }
        let x0 = r[(k, k)];
        let phase = if x0 == Complex64::ZERO {
            Complex64::ONE
        } else {
            x0 / x0.norm()
        };
        let alpha = -phase * nrm;
        // v = x - alpha e1; apply H = I - 2 v v* / v*v from the left
        let mut v = vec![Complex64::ZERO; n - k];
        for i in k..n {
            v[i - k] = r[(i, k)];
        }
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|c| c.norm_sqr()).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        for j in k..n {
            let mut dot = Complex64::ZERO;
            for i in k..n {
                dot += v[i - k].conj() * r[(i, j)];
            }
            let f = dot * (2.0 / vnorm2);
            for i in k..n {
                r[(i, j)] -= f * v[i - k];
            }
        }
        // q <- q H (H is Hermitian)
        for i in 0..n {
            let mut dot = Complex64::ZERO;
            for j in k..n {
                dot += q[(i, j)] * v[j - k];
            }
            let f = dot * (2.0 / vnorm2);
            for j in k..n {
                q[(i, j)] -= f * v[j - k].conj();
            }
        }
    }
    // rotate residual diagonal phases into q
    for k in 0..n {
        let d = r[(k, k)];
        if d == Complex64::ZERO {
            continue;
        }
        let phase = d.conj() / d.norm();
        for j in k..n {
            r[(k, j)] *= phase;
        }
        for i in 0..n {
            q[(i, k)] *= phase.conj();
        }
        // clear roundoff below the normalized diagonal
        for i in (k + 1)..n {
            r[(i, k)] = Complex64::ZERO;
        }
    }
    (q, r)
}

/// Solve `x r = b` for upper-triangular `r` by forward substitution on
/// columns.
pub fn solve_right_upper(b: &CMatrix, r: &CMatrix) -> Result<CMatrix> {
    assert!(r.is_square(), "solve_right_upper needs a square matrix");
    assert_eq!(b.cols(), r.rows(), "dimension mismatch");
    let n = r.rows();
    let rows = b.rows();
    let mut x = CMatrix::zeros(rows, n);
    for j in 0..n {
        let d = r[(j, j)];
        if d == Complex64::ZERO {
            return Err(Error::Singular(format!(
                "triangular solve hit a zero diagonal at {j}"
            )));
        }
        for i in 0..rows {
            let mut acc = b[(i, j)];
            for k in 0..j {
                acc -= x[(i, k)] * r[(k, j)];
            }
            x[(i, j)] = acc / d;
        }
    }
    Ok(x)
}

/// Determinant by LU with partial pivoting. Near-singular inputs yield a
/// near-zero value rather than an error; sampling a characteristic
/// determinant close to a root is a legitimate use.
pub fn det(a: &CMatrix) -> Complex64 {
    assert!(a.is_square(), "det needs a square matrix");
    let n = a.rows();
    let mut lu = a.clone();
    let mut sign = Complex64::ONE;
    for col in 0..n {
        let mut piv = col;
        let mut best = lu[(col, col)].norm();
        for r in (col + 1)..n {
            let v = lu[(r, col)].norm();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best == 0.0 {
            return Complex64::ZERO;
        }
        if piv != col {
            sign = -sign;
            for j in 0..n {
                let t = lu[(col, j)];
                lu[(col, j)] = lu[(piv, j)];
                lu[(piv, j)] = t;
            }
        }
        let d = lu[(col, col)];
        for r in (col + 1)..n {
            let f = lu[(r, col)] / d;
            if f == Complex64::ZERO {
                continue;
            }
            for j in col..n {
                let v = lu[(col, j)];
                lu[(r, j)] -= f * v;
            }
        }
    }
    let mut out = sign;
    for i in 0..n {
        out *= lu[(i, i)];
    }
    out
}

/// Positive definiteness of a Hermitian matrix: all eigenvalues strictly
/// above the rank threshold.
pub fn is_positive_definite(m: &CMatrix, tols: &Tolerances) -> Result<bool> {
    let (vals, _) = herm_eig(m, tols)?;
    let scale = vals.iter().fold(0.0f64, |acc, &x| acc.max(x.abs()));
    let tau = tols.rank_tol * scale.max(1.0);
    Ok(vals.iter().all(|&x| x > tau))
}
