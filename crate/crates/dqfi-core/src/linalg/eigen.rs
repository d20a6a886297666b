//! Eigenvalue solvers.
//!
//! General matrices go through balancing, Householder reduction to upper
//! Hessenberg form, single-shift complex QR down to triangular Schur form,
//! and back-substitution for the eigenvectors. Hermitian matrices use
//! cyclic complex Jacobi rotations.

use super::{dot, CMatrix, CVector, C64, ONE, ZERO};
use crate::error::{Error, Result};

/// Output of an eigensolver.
#[derive(Clone, Debug)]
pub struct EigResult {
    pub values: Vec<C64>,
    /// Columns are unit-norm right eigenvectors.
    pub right_vectors: CMatrix,
    /// max_k ‖A v_k − λ_k v_k‖.
    pub residual: f64,
    /// Index pairs whose eigenvalues coincide and whose vectors are nearly
    /// parallel, the fingerprint of a defective matrix.
    pub parallel_pairs: Vec<(usize, usize)>,
}

impl EigResult {
    pub fn vector(&self, k: usize) -> CVector {
        self.right_vectors.column(k)
    }
}

const SUBDIAG_TOL: f64 = 1e-14;

/// Unit norm, and the first entry of (near-)maximal magnitude made real positive.
pub(crate) fn fix_phase(v: &mut [C64]) {
    let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if n == 0.0 {
        return;
    }
    let m = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let k = v.iter().position(|z| z.norm() >= m * (1.0 - 1e-12)).unwrap_or(0);
    let ph = v[k].conj() / v[k].norm();
    for z in v.iter_mut() {
        *z = *z * ph / n;
    }
}

fn balance(a: &mut CMatrix) -> Vec<f64> {
    let n = a.rows();
    let mut d = vec![1.0; n];
    let radix = 2.0;
    let mut changed = true;
    let mut passes = 0;
    while changed && passes < 100 {
        changed = false;
        passes += 1;
        for i in 0..n {
            let mut cn = 0.0;
            let mut rn = 0.0;
            for j in 0..n {
                if j != i {
                    cn += a[(j, i)].norm();
                    rn += a[(i, j)].norm();
                }
            }
            if cn == 0.0 || rn == 0.0 {
                continue;
            }
            let s = cn + rn;
            let mut f = 1.0;
            let (mut cc, mut rr) = (cn, rn);
            while cc < rr / radix {
                cc *= radix;
                rr /= radix;
                f *= radix;
            }
            while cc >= rr * radix {
                cc /= radix;
                rr *= radix;
                f /= radix;
            }
            if (cc + rr) < 0.95 * s {
                changed = true;
                d[i] *= f;
                for j in 0..n {
                    a[(i, j)] /= f;
                    a[(j, i)] *= f;
                }
            }
        }
    }
    d
}

/// Householder reduction: returns (H, Q) with A = Q·H·Q†.
fn hessenberg(a: &CMatrix) -> (CMatrix, CMatrix) {
    let n = a.rows();
    let mut h = a.clone();
    let mut q = CMatrix::identity(n);
    for k in 0..n.saturating_sub(2) {
        let xnorm: f64 = (k + 1..n).map(|i| h[(i, k)].norm_sqr()).sum::<f64>().sqrt();
        if xnorm == 0.0 {
            continue;
        }
        let x0 = h[(k + 1, k)];
        let phase = if x0.norm() == 0.0 { ONE } else { x0 / x0.norm() };
        let alpha = -phase * xnorm;
        let mut v: Vec<C64> = (k + 1..n).map(|i| h[(i, k)]).collect();
        v[0] -= alpha;
        let vn = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if vn == 0.0 {
            continue;
        }
        for z in v.iter_mut() {
            *z /= vn;
        }
        // H ← (I − 2vv†) H
        for j in 0..n {
            let s: C64 = (k + 1..n).map(|i| v[i - k - 1].conj() * h[(i, j)]).sum();
            for i in k + 1..n {
                h[(i, j)] -= 2.0 * v[i - k - 1] * s;
            }
        }
        // H ← H (I − 2vv†), Q ← Q (I − 2vv†)
        for m in [&mut h, &mut q] {
            for i in 0..n {
                let s: C64 = (k + 1..n).map(|j| m[(i, j)] * v[j - k - 1]).sum();
                for j in k + 1..n {
                    m[(i, j)] -= 2.0 * s * v[j - k - 1].conj();
                }
            }
        }
        for i in k + 2..n {
            h[(i, k)] = ZERO;
        }
    }
    (h, q)
}

/// Rotation (c, s) with [[c, s], [−s̄, c]]·[a; b] = [r; 0].
fn givens(a: C64, b: C64) -> (f64, C64) {
    let an = a.norm();
    let bn = b.norm();
    if bn == 0.0 {
        return (1.0, ZERO);
    }
    if an == 0.0 {
        return (0.0, b.conj() / bn);
    }
    let r = an.hypot(bn);
    (an / r, (a / an) * b.conj() / r)
}

fn wilkinson(a: C64, b: C64, cc: C64, d: C64) -> C64 {
    let tr = a + d;
    let det = a * d - b * cc;
    let disc = (tr * tr * 0.25 - det).sqrt();
    let l1 = tr * 0.5 + disc;
    let l2 = tr * 0.5 - disc;
    if (l1 - d).norm() < (l2 - d).norm() {
        l1
    } else {
        l2
    }
}

/// Reduces Hessenberg `h` to upper-triangular Schur form in place, accumulating into `z`.
fn schur(h: &mut CMatrix, z: &mut CMatrix) -> Result<()> {
    let n = h.rows();
    if n <= 1 {
        return Ok(());
    }
    let cap = 100 * n;
    let fro = h.norm_fro().max(f64::MIN_POSITIVE);
    let mut total = 0usize;
    let mut its = 0usize;
    let mut hi = n - 1;
    while hi > 0 {
        let mut l = hi;
        while l > 0 {
            let mut s = h[(l - 1, l - 1)].norm() + h[(l, l)].norm();
            if s == 0.0 {
                s = fro;
            }
            if h[(l, l - 1)].norm() < SUBDIAG_TOL * s {
                h[(l, l - 1)] = ZERO;
                break;
            }
            l -= 1;
        }
        if l == hi {
            hi -= 1;
            its = 0;
            continue;
        }
        total += 1;
        its += 1;
        if total > cap {
            return Err(Error::NoConvergence(cap));
        }
        let mu = if its % 11 == 10 {
            h[(hi, hi)] + C64::new(0.75 * h[(hi, hi - 1)].norm(), 0.5 * h[(hi, hi - 1)].norm())
        } else {
            wilkinson(h[(hi - 1, hi - 1)], h[(hi - 1, hi)], h[(hi, hi - 1)], h[(hi, hi)])
        };
        for i in l..=hi {
            h[(i, i)] -= mu;
        }
        let mut rots = Vec::with_capacity(hi - l);
        for k in l..hi {
            let (cs, sn) = givens(h[(k, k)], h[(k + 1, k)]);
            for j in k..n {
                let x = h[(k, j)];
                let y = h[(k + 1, j)];
                h[(k, j)] = cs * x + sn * y;
                h[(k + 1, j)] = -sn.conj() * x + cs * y;
            }
            h[(k + 1, k)] = ZERO;
            rots.push((cs, sn));
        }
        for (off, &(cs, sn)) in rots.iter().enumerate() {
            let k = l + off;
            for i in 0..=(k + 1).min(hi) {
                let x = h[(i, k)];
                let y = h[(i, k + 1)];
                h[(i, k)] = cs * x + sn.conj() * y;
                h[(i, k + 1)] = -sn * x + cs * y;
            }
            for i in 0..n {
                let x = z[(i, k)];
                let y = z[(i, k + 1)];
                z[(i, k)] = cs * x + sn.conj() * y;
                z[(i, k + 1)] = -sn * x + cs * y;
            }
        }
        for i in l..=hi {
            h[(i, i)] += mu;
        }
    }
    Ok(())
}

/// Eigenvectors of an upper-triangular matrix by back-substitution.
fn triangular_vectors(t: &CMatrix) -> CMatrix {
    let n = t.rows();
    let small = f64::EPSILON * t.norm_fro().max(f64::MIN_POSITIVE);
    let mut y_all = CMatrix::zeros(n, n);
    for k in 0..n {
        let lam = t[(k, k)];
        let mut y = vec![ZERO; n];
        y[k] = ONE;
        for j in (0..k).rev() {
            let s: C64 = (j + 1..=k).map(|m| t[(j, m)] * y[m]).sum();
            let mut d = t[(j, j)] - lam;
            if d.norm() < small {
                d = C64::new(small, 0.0);
            }
            y[j] = -s / d;
            let big = y.iter().map(|z| z.norm()).fold(0.0, f64::max);
            if big > 1e150 {
                for z in y.iter_mut() {
                    *z /= big;
                }
            }
        }
        y_all.set_column(k, &y);
    }
    y_all
}

fn residual_of(a: &CMatrix, values: &[C64], vecs: &CMatrix) -> f64 {
    let mut r: f64 = 0.0;
    for (k, &lam) in values.iter().enumerate() {
        let v = vecs.column(k);
        let av = a.mat_vec(&v);
        let e = av.iter().zip(v.iter()).map(|(x, y)| (x - lam * y).norm_sqr()).sum::<f64>().sqrt();
        r = r.max(e);
    }
    r
}

fn parallel_pairs(values: &[C64], vecs: &CMatrix) -> Vec<(usize, usize)> {
    let scale = values.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let mut out = Vec::new();
    for i in 0..values.len() {
        for j in i + 1..values.len() {
            if (values[i] - values[j]).norm() <= 1e-7 * scale {
                let ov = dot(&vecs.column(i), &vecs.column(j)).norm();
                let sine = (1.0 - (ov * ov).min(1.0)).sqrt();
                if sine < 1e-4 {
                    out.push((i, j));
                }
            }
        }
    }
    out
}

/// All eigenvalues and right eigenvectors of a general complex matrix.
pub fn eig_general(a: &CMatrix) -> Result<EigResult> {
    let n = a.require_square()?;
    a.check_finite()?;
    let mut b = a.clone();
    let d = balance(&mut b);
    let (mut h, mut z) = hessenberg(&b);
    schur(&mut h, &mut z)?;
    let values: Vec<C64> = (0..n).map(|k| h[(k, k)]).collect();
    let y = triangular_vectors(&h);
    let mut vecs = z.matmul(&y);
    for k in 0..n {
        let mut v: Vec<C64> = (0..n).map(|i| vecs[(i, k)] * d[i]).collect();
        fix_phase(&mut v);
        vecs.set_column(k, &v);
    }
    let residual = residual_of(a, &values, &vecs);
    let tol = 1e-6 * a.norm_fro().max(1.0);
    if !residual.is_finite() || residual > tol {
        return Err(Error::NoConvergence(100 * n));
    }
    let parallel_pairs = parallel_pairs(&values, &vecs);
    Ok(EigResult { values, right_vectors: vecs, residual, parallel_pairs })
}

/// Hermitian eigendecomposition: real eigenvalues ascending, orthonormal vectors.
pub fn eig_hermitian(a: &CMatrix) -> Result<EigResult> {
    let n = a.require_square()?;
    a.check_finite()?;
    let herr = a.hermiticity_error();
    if herr > 1e-9 * a.max_abs().max(1.0) {
        return Err(Error::NotHermitian(herr));
    }
    let mut m = CMatrix::from_fn(n, n, |i, j| (a[(i, j)] + a[(j, i)].conj()) * 0.5);
    let mut v = CMatrix::identity(n);
    let scale = m.norm_fro();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let beta = m[(p, q)];
                let bn = beta.norm();
                if bn <= 1e-300 {
                    continue;
                }
                let alpha = m[(p, p)].re;
                let delta = m[(q, q)].re;
                let tau = (delta - alpha) / (2.0 * bn);
                let t = if tau == 0.0 {
                    1.0
                } else {
                    tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt())
                };
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = t * cs;
                let eph = beta.conj() / bn; // e^{-iφ}
                // columns: M ← M W
                for k in 0..n {
                    let x = m[(k, p)];
                    let y = m[(k, q)];
                    m[(k, p)] = cs * x - sn * eph * y;
                    m[(k, q)] = sn * x + cs * eph * y;
                    let x = v[(k, p)];
                    let y = v[(k, q)];
                    v[(k, p)] = cs * x - sn * eph * y;
                    v[(k, q)] = sn * x + cs * eph * y;
                }
                // rows: M ← W† M
                for k in 0..n {
                    let x = m[(p, k)];
                    let y = m[(q, k)];
                    m[(p, k)] = cs * x - sn * eph.conj() * y;
                    m[(q, k)] = sn * x + cs * eph.conj() * y;
                }
                m[(p, q)] = ZERO;
                m[(q, p)] = ZERO;
                m[(p, p)] = C64::new(m[(p, p)].re, 0.0);
                m[(q, q)] = C64::new(m[(q, q)].re, 0.0);
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].re.total_cmp(&m[(j, j)].re));
    let values: Vec<C64> = order.iter().map(|&i| C64::new(m[(i, i)].re, 0.0)).collect();
    let mut vecs = CMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        let mut col: Vec<C64> = v.column(i).into_inner();
        fix_phase(&mut col);
        vecs.set_column(k, &col);
    }
    let residual = residual_of(a, &values, &vecs);
    Ok(EigResult { values, right_vectors: vecs, residual, parallel_pairs: Vec::new() })
}
