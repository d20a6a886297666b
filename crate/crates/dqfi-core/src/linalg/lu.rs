use super::{CMatrix, C64, ZERO};
use crate::error::{Error, Result};

/// LU factorisation with partial pivoting, P·A = L·U packed in one matrix.
#[derive(Clone, Debug)]
pub struct Lu {
    lu: CMatrix,
    perm: Vec<usize>,
}

impl Lu {
    pub fn new(a: &CMatrix) -> Result<Self> {
        let n = a.require_square()?;
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a.max_abs();
        let tiny = scale * f64::EPSILON * n as f64;
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, lu[(i, k)].norm()))
                .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if pmax <= tiny || pmax == 0.0 {
                return Err(Error::Singular);
            }
            if p != k {
                perm.swap(p, k);
                for j in 0..n {
                    let t = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = t;
                }
            }
            let piv = lu[(k, k)];
            for i in k + 1..n {
                let f = lu[(i, k)] / piv;
                lu[(i, k)] = f;
                if f == ZERO {
                    continue;
                }
                for j in k + 1..n {
                    let u = lu[(k, j)];
                    lu[(i, j)] -= f * u;
                }
            }
        }
        Ok(Self { lu, perm })
    }

    pub fn solve_vec(&self, b: &[C64]) -> Vec<C64> {
        let n = self.perm.len();
        let mut x: Vec<C64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s / self.lu[(i, i)];
        }
        x
    }

    pub fn solve(&self, b: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(b.rows(), b.cols());
        for j in 0..b.cols() {
            let col = self.solve_vec(&b.column(j));
            out.set_column(j, &col);
        }
        out
    }
}

/// Solves a·x = b.
pub fn solve(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    let x = Lu::new(a)?.solve(b);
    x.check_finite().map_err(|_| Error::Singular)?;
    Ok(x)
}

pub fn inverse(a: &CMatrix) -> Result<CMatrix> {
    solve(a, &CMatrix::identity(a.require_square()?))
}

/// Regularised pseudoinverse a†(a·a† + δI)⁻¹.
///
/// With δ = 0 a failed factorisation retries once with δ = 1e-12·‖a·a†‖∞.
pub fn pinv(a: &CMatrix, delta: f64) -> Result<CMatrix> {
    if !(delta >= 0.0) {
        return Err(Error::Invalid(format!("pinv regulariser must be >= 0, got {delta}")));
    }
    let ad = a.adjoint();
    let aad = a.matmul(&ad);
    let shifted = |d: f64| {
        let mut m = aad.clone();
        for i in 0..m.rows() {
            m[(i, i)] += d;
        }
        m
    };
    let attempt = |d: f64| -> Result<CMatrix> {
        let m = shifted(d);
        let inv = inverse(&m)?;
        Ok(ad.matmul(&inv))
    };
    match attempt(delta) {
        Ok(p) => Ok(p),
        Err(Error::Singular) if delta == 0.0 => {
            let d = 1e-12 * aad.norm_inf();
            if d == 0.0 {
                return Ok(CMatrix::zeros(a.cols(), a.rows()));
            }
            attempt(d)
        }
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    #[test]
    fn pinv_identity() {
        let p = pinv(&CMatrix::identity(3), 0.0).unwrap();
        assert!(p.max_diff(&CMatrix::identity(3)) < 1e-15);
    }

    #[test]
    fn pinv_rank_deficient_diag() {
        let a = CMatrix::diag(&[c(2.0, 0.0), c(0.0, 0.0)]);
        let p = pinv(&a, 0.0).unwrap();
        assert!((p[(0, 0)] - c(0.5, 0.0)).norm() < 1e-10);
        assert!(p[(1, 1)].norm() < 1e-10);
    }

    #[test]
    fn solve_small_system() {
        let a = CMatrix::from_rows(&[vec![c(0.0, 1.0), c(2.0, 0.0)], vec![c(1.0, 0.0), c(1.0, -1.0)]]);
        let x = CMatrix::from_rows(&[vec![c(1.0, 2.0)], vec![c(-3.0, 0.5)]]);
        let b = a.matmul(&x);
        let got = solve(&a, &b).unwrap();
        assert!(got.max_diff(&x) < 1e-13);
    }

    #[test]
    fn singular_is_reported() {
        let a = CMatrix::from_real_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
        assert_eq!(inverse(&a), Err(Error::Singular));
    }
}
