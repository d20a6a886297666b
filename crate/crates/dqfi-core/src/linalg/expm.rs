use super::{lu::solve, CMatrix, C64};
use crate::error::{Error, Result};

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

const THETA13: f64 = 5.4;

fn add_scaled(acc: &mut CMatrix, m: &CMatrix, s: f64) {
    for i in 0..acc.rows() {
        for j in 0..acc.cols() {
            acc[(i, j)] += m[(i, j)] * s;
        }
    }
}

/// e^{scale·a} by scaling and squaring with a degree-13 Padé approximant.
pub fn matexp(a: &CMatrix, scale: f64) -> Result<CMatrix> {
    let n = a.require_square()?;
    if !scale.is_finite() {
        return Err(Error::Invalid(format!("matexp scale must be finite, got {scale}")));
    }
    let a = a.scale_re(scale);
    let norm = a.norm_one();
    if norm == 0.0 {
        return Ok(CMatrix::identity(n));
    }
    let s = if norm > THETA13 { (norm / THETA13).log2().ceil() as i32 } else { 0 };
    let a = a.scale_re(0.5f64.powi(s));
    let id = CMatrix::identity(n);
    let a2 = a.matmul(&a);
    let a4 = a2.matmul(&a2);
    let a6 = a4.matmul(&a2);
    let b = &PADE13;

    let mut inner = a6.scale_re(b[13]);
    add_scaled(&mut inner, &a4, b[11]);
    add_scaled(&mut inner, &a2, b[9]);
    let mut u = a6.matmul(&inner);
    add_scaled(&mut u, &a6, b[7]);
    add_scaled(&mut u, &a4, b[5]);
    add_scaled(&mut u, &a2, b[3]);
    add_scaled(&mut u, &id, b[1]);
    let u = a.matmul(&u);

    let mut inner = a6.scale_re(b[12]);
    add_scaled(&mut inner, &a4, b[10]);
    add_scaled(&mut inner, &a2, b[8]);
    let mut v = a6.matmul(&inner);
    add_scaled(&mut v, &a6, b[6]);
    add_scaled(&mut v, &a4, b[4]);
    add_scaled(&mut v, &a2, b[2]);
    add_scaled(&mut v, &id, b[0]);

    let p = &v + &u;
    let q = &v - &u;
    let mut r = solve(&q, &p).map_err(|_| Error::Overflow("Padé denominator singular".into()))?;
    for _ in 0..s {
        r = r.matmul(&r);
        if r.max_abs() > f64::MAX / (n as f64 + 1.0) {
            return Err(Error::Overflow("matrix exponential exceeds floating-point range".into()));
        }
    }
    if r.check_finite().is_err() {
        return Err(Error::Overflow("matrix exponential exceeds floating-point range".into()));
    }
    Ok(r)
}

/// e^z − 1 without cancellation for small |z|.
pub fn cexpm1(z: C64) -> C64 {
    let (x, y) = (z.re, z.im);
    let h = (0.5 * y).sin();
    C64::new(x.exp_m1() * y.cos() - 2.0 * h * h, x.exp() * y.sin())
}

/// Scalar (e^{δt} − 1)/δ, continuous through δ = 0.
pub fn exprel(delta: C64, t: f64) -> C64 {
    let z = delta * t;
    if z.norm() < 1e-5 {
        t * (1.0 + z * (0.5 + z * (1.0 / 6.0 + z / 24.0)))
    } else {
        cexpm1(z) / delta
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    #[test]
    fn zero_gives_identity() {
        let e = matexp(&CMatrix::zeros(3, 3), 2.0).unwrap();
        assert_eq!(e, CMatrix::identity(3));
    }

    #[test]
    fn diagonal() {
        let a = CMatrix::diag(&[c(-1.0, 0.0), c(-2.0, 0.0)]);
        let e = matexp(&a, 1.0).unwrap();
        assert!((e[(0, 0)].re - (-1.0f64).exp()).abs() < 1e-15);
        assert!((e[(1, 1)].re - (-2.0f64).exp()).abs() < 1e-15);
        assert!(e[(0, 1)].norm() < 1e-300);
    }

    #[test]
    fn rotation_generator() {
        let a = CMatrix::from_real_rows(&[vec![0.0, -1.0], vec![1.0, 0.0]]);
        let e = matexp(&a, 30.0).unwrap();
        assert!((e[(0, 0)].re - 30f64.cos()).abs() < 1e-12);
        assert!((e[(1, 0)].re - 30f64.sin()).abs() < 1e-12);
    }

    #[test]
    fn overflow_is_reported() {
        let a = CMatrix::diag(&[c(1.0, 0.0)]);
        assert!(matches!(matexp(&a, 800.0), Err(Error::Overflow(_))));
    }

    #[test]
    fn exprel_continuity() {
        for &d in &[1e-9, 1e-4, 1e-3, 2e-3, 0.5] {
            let z = c(d, 0.3 * d);
            let direct = ((z * 1.7).exp() - 1.0) / z;
            let got = exprel(z, 1.7);
            assert!((got - direct).norm() < 1e-6 * direct.norm(), "d={d}");
        }
        assert_eq!(exprel(c(0.0, 0.0), 2.5), c(2.5, 0.0));
    }
}
