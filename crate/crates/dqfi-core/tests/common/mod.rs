#![allow(dead_code)]

use std::sync::Arc;

use dqfi_core::linalg::{c, CMatrix, C64};
use dqfi_core::liouville::OpenSystemModel;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(r: &mut impl Rng, n: usize) -> CMatrix {
    CMatrix::from_fn(n, n, |_, _| c(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)))
}

pub fn random_hermitian(r: &mut impl Rng, n: usize) -> CMatrix {
    let a = random_matrix(r, n);
    (&a + &a.adjoint()).scale_re(0.5)
}

pub fn random_density(r: &mut impl Rng, n: usize) -> CMatrix {
    let a = random_matrix(r, n);
    let p = a.matmul(&a.adjoint());
    let tr = p.trace().re;
    p.scale_re(1.0 / tr)
}

pub fn from_slice(n: usize, xs: &[f64]) -> CMatrix {
    CMatrix::from_fn(n, n, |i, j| {
        let k = 2 * (i * n + j);
        C64::new(xs[k], xs[k + 1])
    })
}

/// H(θ) = H₀ + θH₁ with two random jumps whose rates grow linearly in θ.
pub fn random_model(seed: u64, n: usize) -> OpenSystemModel {
    let mut r = rng(seed);
    let h0 = random_hermitian(&mut r, n);
    let h1 = random_hermitian(&mut r, n);
    let dh = h1.clone();
    let mut m = OpenSystemModel::new(n, move |th| &h0 + &h1.scale_re(th)).with_h_derivative(move |_| dh.clone());
    for _ in 0..2 {
        let op = random_matrix(&mut r, n);
        let (a, b) = (r.gen_range(0.1..0.5), r.gen_range(0.0..0.2));
        m = m.with_jump(op, move |th| a + b * th, Some(Arc::new(move |_| b)));
    }
    m
}
