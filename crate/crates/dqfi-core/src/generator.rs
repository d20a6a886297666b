//! The dissipative generator Ξ = i(∂θU)U⁻¹ of the propagator U = e^{Lt}.
//!
//! Four evaluations are provided: the biorthogonal eigen-expansion, the
//! Jordan-basis expansion for order-2 exceptional points, Gauss–Legendre
//! quadrature of i∫₀ᵗ e^{μL} ∂θL e^{−μL} dμ, and central differences of the
//! propagator.

use crate::error::{Error, Result};
use crate::linalg::{eig_general, eig_hermitian, exprel, inverse, matexp, pinv, CMatrix, CVector, C64, I, ONE, ZERO};
use crate::liouville::{build_liouvillian, OpenSystemModel};
use crate::spectral::BiorthogonalSpectrum;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

/// Refuse quadrature when t·max|Re L_n| exceeds this.
pub const OVERFLOW_GUARD: f64 = 300.0;
pub const MAX_PANELS: usize = 1 << 14;
const QUAD_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Route {
    Spectral,
    Quadrature,
    PropagatorFd,
    EpJordan,
    /// Closed form, only available for the spin-flip qubit.
    Analytic,
}

impl fmt::Display for Route {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Route::Spectral => "spectral",
            Route::Quadrature => "quadrature",
            Route::PropagatorFd => "propagator-fd",
            Route::EpJordan => "ep-jordan",
            Route::Analytic => "analytic",
        })
    }
}

impl FromStr for Route {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spectral" => Ok(Route::Spectral),
            "quadrature" => Ok(Route::Quadrature),
            "fd" | "propagator-fd" => Ok(Route::PropagatorFd),
            "ep" | "ep-jordan" | "jordan" => Ok(Route::EpJordan),
            "analytic" => Ok(Route::Analytic),
            other => Err(Error::Invalid(format!("unknown route '{other}'"))),
        }
    }
}

/// Ξ together with Ξ† and the Hermitian split Ξ = Θ − iΛ.
#[derive(Clone, Debug)]
pub struct GeneratorPair {
    pub xi: CMatrix,
    pub xi_dag: CMatrix,
    pub theta_herm: CMatrix,
    pub lambda_herm: CMatrix,
    pub route: Route,
    pub t: f64,
    pub residual_vs_alternate: Option<f64>,
    /// Last refinement difference for quadrature.
    pub error_estimate: Option<f64>,
}

impl GeneratorPair {
    pub fn new(xi: CMatrix, route: Route, t: f64) -> Self {
        let xi_dag = xi.adjoint();
        let (theta_herm, lambda_herm) = split(&xi, &xi_dag);
        Self {
            xi,
            xi_dag,
            theta_herm,
            lambda_herm,
            route,
            t,
            residual_vs_alternate: None,
            error_estimate: None,
        }
    }

    /// Relative max-norm distance to another evaluation of the same generator.
    pub fn relative_diff(&self, other: &GeneratorPair) -> f64 {
        self.xi.max_diff(&other.xi) / self.xi.max_abs().max(other.xi.max_abs()).max(1.0)
    }
}

fn split(xi: &CMatrix, xi_dag: &CMatrix) -> (CMatrix, CMatrix) {
    let theta = (xi + xi_dag).scale_re(0.5);
    let lambda = (xi - xi_dag).scale(I * 0.5);
    (theta, lambda)
}

/// Θ = (Ξ + Ξ†)/2, Λ = i(Ξ − Ξ†)/2.
pub fn hermitian_split(g: &GeneratorPair) -> GeneratorPair {
    let mut out = g.clone();
    out.xi_dag = g.xi.adjoint();
    let (th, la) = split(&out.xi, &out.xi_dag);
    out.theta_herm = th;
    out.lambda_herm = la;
    out
}

/// [(λmax Θ + λmax Λ) − (λmin Θ + λmin Λ)]².
pub fn dqfi_upper_bound(g: &GeneratorPair) -> Result<f64> {
    let et = eig_hermitian(&g.theta_herm)?;
    let el = eig_hermitian(&g.lambda_herm)?;
    let n = et.values.len();
    if n == 0 {
        return Ok(0.0);
    }
    let spread = (et.values[n - 1].re + el.values[n - 1].re) - (et.values[0].re + el.values[0].re);
    Ok(spread * spread)
}

/// Ξ = i Σ_{n,m} E(L_n − L_m, t) ⟨⟨χ_n|∂L|φ_m⟩⟩ |φ_n⟩⟩⟨⟨χ_m|, E(δ, t) = (e^{δt} − 1)/δ.
///
/// The n = m terms reduce to i t ∂θL_n; equal eigenvalues with independent
/// eigenvectors are handled by the continuous limit E(0, t) = t.
pub fn generator_spectral(s: &BiorthogonalSpectrum, dl: &CMatrix, t: f64) -> Result<GeneratorPair> {
    check_time(t)?;
    if !s.is_usable() {
        return Err(Error::IllConditioned(format!(
            "spectral route refused (EP clusters: {}, condition {:.3e})",
            s.ep_clusters.len(),
            s.condition
        )));
    }
    let n = s.len();
    let phi = s.right_matrix();
    let chi = CMatrix::from_columns(&s.left);
    let g = chi.adjoint().matmul(dl).matmul(&phi);
    let coef = CMatrix::from_fn(n, n, |a, b| I * exprel(s.values[a] - s.values[b], t) * g[(a, b)]);
    let xi = phi.matmul(&coef).matmul(&chi.adjoint());
    xi.check_finite()?;
    Ok(GeneratorPair::new(xi, Route::Spectral, t))
}

fn check_time(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::Invalid(format!("time must be finite and >= 0, got {t}")))
    }
}

#[derive(Clone, Copy, Debug)]
struct Block {
    start: usize,
    size: usize,
    value: C64,
}

/// Similarity S with S⁻¹ L S block-diagonal in 1×1 and 2×2 Jordan blocks.
#[derive(Clone, Debug)]
pub struct JordanBasis {
    s: CMatrix,
    s_inv: CMatrix,
    blocks: Vec<Block>,
}

impl JordanBasis {
    /// Plain eigenbasis when no clusters are flagged, chain-completed otherwise.
    pub fn from_spectrum(sp: &BiorthogonalSpectrum) -> Result<Self> {
        let n = sp.len();
        if sp.ep_clusters.is_empty() {
            let s = sp.right_matrix();
            let s_inv = CMatrix::from_columns(&sp.left).adjoint();
            let blocks = (0..n).map(|k| Block { start: k, size: 1, value: sp.values[k] }).collect();
            return Ok(Self { s, s_inv, blocks });
        }
        let mut cols: Vec<CVector> = Vec::with_capacity(n);
        let mut blocks = Vec::new();
        let mut used = vec![false; n];
        for k in 0..n {
            if used[k] {
                continue;
            }
            if let Some(cl) = sp.ep_clusters.iter().find(|c| c.members.contains(&k)) {
                if cl.order != 2 {
                    return Err(Error::Unsupported(format!("exceptional point of order {}", cl.order)));
                }
                let chain = cl
                    .jordan_chain
                    .as_ref()
                    .ok_or_else(|| Error::Invalid("EP cluster without Jordan chain".into()))?;
                for &m in &cl.members {
                    used[m] = true;
                }
                blocks.push(Block { start: cols.len(), size: 2, value: cl.value });
                cols.push(chain[0].clone());
                cols.push(chain[1].clone());
            } else {
                used[k] = true;
                blocks.push(Block { start: cols.len(), size: 1, value: sp.values[k] });
                cols.push(sp.right[k].clone());
            }
        }
        let s = CMatrix::from_columns(&cols);
        let s_inv = inverse(&s)?;
        Ok(Self { s, s_inv, blocks })
    }

    fn transformed(&self, dl: &CMatrix) -> CMatrix {
        self.s_inv.matmul(dl).matmul(&self.s)
    }

    /// Ξ in the original basis.
    pub fn generator(&self, dl: &CMatrix, t: f64) -> CMatrix {
        let g = self.transformed(dl);
        let mut x = CMatrix::zeros(g.rows(), g.cols());
        for a in &self.blocks {
            for b in &self.blocks {
                let ga = sub(&g, a, b);
                let m = moments(a.value - b.value, t);
                let na_g = shift_left(&ga, a.size);
                let g_nb = shift_right(&ga, b.size);
                let na_g_nb = shift_right(&na_g, b.size);
                for i in 0..a.size {
                    for j in 0..b.size {
                        let v = ga[(i, j)] * m[0] + (na_g[(i, j)] - g_nb[(i, j)]) * m[1]
                            - na_g_nb[(i, j)] * m[2];
                        x[(a.start + i, b.start + j)] = I * v;
                    }
                }
            }
        }
        self.s.matmul(&x).matmul(&self.s_inv)
    }

    /// ∂θU = ∫₀ᵗ e^{(t−μ)L} ∂θL e^{μL} dμ, with every exponential bounded.
    pub fn propagator_derivative(&self, dl: &CMatrix, t: f64) -> CMatrix {
        let g = self.transformed(dl);
        let mut y = CMatrix::zeros(g.rows(), g.cols());
        for a in &self.blocks {
            for b in &self.blocks {
                let ga = sub(&g, a, b);
                let na_g = shift_left(&ga, a.size);
                let g_nb = shift_right(&ga, b.size);
                let na_g_nb = shift_right(&na_g, b.size);
                let a_leads = a.value.re >= b.value.re;
                let (lead, kappa) = if a_leads {
                    (a.value, b.value - a.value)
                } else {
                    (b.value, a.value - b.value)
                };
                let m = moments(kappa, t);
                let pre = (lead * t).exp();
                // weights for (G, N_A·G, G·N_B, N_A·G·N_B)
                let w = if a_leads {
                    [m[0], t * m[0] - m[1], m[1], t * m[1] - m[2]]
                } else {
                    [m[0], m[1], t * m[0] - m[1], t * m[1] - m[2]]
                };
                for i in 0..a.size {
                    for j in 0..b.size {
                        let v = ga[(i, j)] * w[0]
                            + na_g[(i, j)] * w[1]
                            + g_nb[(i, j)] * w[2]
                            + na_g_nb[(i, j)] * w[3];
                        y[(a.start + i, b.start + j)] = pre * v;
                    }
                }
            }
        }
        self.s.matmul(&y).matmul(&self.s_inv)
    }
}

fn sub(g: &CMatrix, a: &Block, b: &Block) -> CMatrix {
    CMatrix::from_fn(a.size, b.size, |i, j| g[(a.start + i, b.start + j)])
}

/// N·G with N the nilpotent shift of a Jordan block (N e₂ = e₁).
fn shift_left(g: &CMatrix, size: usize) -> CMatrix {
    CMatrix::from_fn(g.rows(), g.cols(), |i, j| if size == 2 && i == 0 { g[(1, j)] } else { ZERO })
}

/// G·N.
fn shift_right(g: &CMatrix, size: usize) -> CMatrix {
    CMatrix::from_fn(g.rows(), g.cols(), |i, j| if size == 2 && j == 1 { g[(i, 0)] } else { ZERO })
}

/// [∫₀ᵗ μᵏ e^{μκ} dμ for k = 0, 1, 2].
fn moments(kappa: C64, t: f64) -> [C64; 3] {
    let z = kappa * t;
    if z.norm() < 1.0 {
        let mut out = [ZERO; 3];
        for (k, o) in out.iter_mut().enumerate() {
            let mut term = ONE; // z^j / j!
            let mut sum = ZERO;
            for j in 0..40 {
                if j > 0 {
                    term *= z / j as f64;
                }
                sum += term / (j + k + 1) as f64;
                if term.norm() < 1e-18 {
                    break;
                }
            }
            *o = sum * t.powi(k as i32 + 1);
        }
        out
    } else {
        let e = (z).exp();
        let m0 = exprel(kappa, t);
        let m1 = (e * t - m0) / kappa;
        let m2 = (e * t * t - m1 * 2.0) / kappa;
        [m0, m1, m2]
    }
}

/// Ξ by the chain-completed Jordan basis; equals the spectral route when no EP is flagged.
pub fn generator_ep(s: &BiorthogonalSpectrum, dl: &CMatrix, t: f64) -> Result<GeneratorPair> {
    check_time(t)?;
    let basis = JordanBasis::from_spectrum(s)?;
    let xi = basis.generator(dl, t);
    xi.check_finite()?;
    Ok(GeneratorPair::new(xi, Route::EpJordan, t))
}

/// 16-point Gauss–Legendre nodes and weights on [−1, 1].
fn gauss_legendre() -> &'static [(f64, f64); 16] {
    static NODES: OnceLock<[(f64, f64); 16]> = OnceLock::new();
    NODES.get_or_init(|| {
        let n = 16;
        let mut out = [(0.0, 0.0); 16];
        for i in 0..n {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            out[i] = (x, 2.0 / ((1.0 - x * x) * dp * dp));
        }
        out
    })
}

fn quad_pass(l: &CMatrix, dl: &CMatrix, t: f64, panels: usize) -> Result<CMatrix> {
    let n = l.rows();
    let mut acc = CMatrix::zeros(n, n);
    let h = t / panels as f64;
    for p in 0..panels {
        let a = p as f64 * h;
        for &(x, w) in gauss_legendre() {
            let mu = a + 0.5 * h * (x + 1.0);
            let fwd = matexp(l, mu).map_err(|e| overflow_at(e, mu))?;
            let back = matexp(l, -mu).map_err(|e| overflow_at(e, mu))?;
            let f = fwd.matmul(dl).matmul(&back);
            acc = &acc + &f.scale_re(0.5 * h * w);
        }
    }
    acc.check_finite().map_err(|_| Error::Overflow("non-finite quadrature sum".into()))?;
    Ok(acc.scale(I))
}

fn overflow_at(e: Error, mu: f64) -> Error {
    match e {
        Error::Overflow(msg) => Error::Overflow(format!("{msg} at mu = {mu}")),
        other => other,
    }
}

/// Ξ = i∫₀ᵗ e^{μL} ∂θL e^{−μL} dμ by panel-doubling Gauss–Legendre quadrature.
pub fn generator_quadrature(l: &CMatrix, dl: &CMatrix, t: f64, max_panels: usize) -> Result<GeneratorPair> {
    check_time(t)?;
    let n = l.require_square()?;
    if t == 0.0 {
        return Ok(GeneratorPair::new(CMatrix::zeros(n, n), Route::Quadrature, t));
    }
    let re_max = eig_general(l)?.values.iter().map(|z| z.re.abs()).fold(0.0, f64::max);
    if t * re_max > OVERFLOW_GUARD {
        return Err(Error::Overflow(format!(
            "t·max|Re L_n| = {:.3e} exceeds the guard {OVERFLOW_GUARD}",
            t * re_max
        )));
    }
    let mut panels = 1;
    let mut prev = quad_pass(l, dl, t, panels)?;
    while panels < max_panels.max(1) {
        panels *= 2;
        let next = quad_pass(l, dl, t, panels)?;
        let diff = next.max_diff(&prev);
        if diff < QUAD_TOL * next.max_abs().max(1.0) {
            let mut g = GeneratorPair::new(next, Route::Quadrature, t);
            g.error_estimate = Some(diff);
            return Ok(g);
        }
        prev = next;
    }
    Err(Error::Quadrature(format!("no convergence with {panels} panels")))
}

fn dprop_pass(l: &CMatrix, dl: &CMatrix, t: f64, panels: usize) -> Result<CMatrix> {
    let n = l.rows();
    let mut acc = CMatrix::zeros(n, n);
    let h = t / panels as f64;
    for p in 0..panels {
        let a = p as f64 * h;
        for &(x, w) in gauss_legendre() {
            let mu = a + 0.5 * h * (x + 1.0);
            let f = matexp(l, t - mu)?.matmul(dl).matmul(&matexp(l, mu)?);
            acc = &acc + &f.scale_re(0.5 * h * w);
        }
    }
    acc.check_finite()?;
    Ok(acc)
}

/// ∂θU = ∫₀ᵗ e^{(t−μ)L} ∂θL e^{μL} dμ by panel-doubling Gauss–Legendre.
///
/// Both exponentials run forward in time, so this never overflows for a
/// Lindblad generator. Returns the integral and the last doubling difference.
pub fn propagator_derivative_quadrature(
    l: &CMatrix,
    dl: &CMatrix,
    t: f64,
    max_panels: usize,
) -> Result<(CMatrix, f64)> {
    check_time(t)?;
    let n = l.require_square()?;
    if t == 0.0 {
        return Ok((CMatrix::zeros(n, n), 0.0));
    }
    let mut panels = 1;
    let mut prev = dprop_pass(l, dl, t, panels)?;
    while panels < max_panels.max(1) {
        panels *= 2;
        let next = dprop_pass(l, dl, t, panels)?;
        let diff = next.max_diff(&prev);
        if diff < QUAD_TOL * next.max_abs().max(1.0) {
            return Ok((next, diff));
        }
        prev = next;
    }
    Err(Error::Quadrature(format!("no convergence with {panels} panels")))
}

/// Ξ = i(∂θU)U⁺ with ∂θU from central differences of the propagator.
pub fn generator_propagator_fd(model: &OpenSystemModel, theta: f64, t: f64, h: f64) -> Result<GeneratorPair> {
    check_time(t)?;
    let du = propagator_fd_derivative(model, theta, t, h)?;
    let u = matexp(&build_liouvillian(model, theta)?.matrix, t)?;
    let uinv = pinv(&u, 0.0)?;
    let xi = du.matmul(&uinv).scale(I);
    xi.check_finite()?;
    Ok(GeneratorPair::new(xi, Route::PropagatorFd, t))
}

/// (U(θ+h) − U(θ−h))/2h.
pub fn propagator_fd_derivative(model: &OpenSystemModel, theta: f64, t: f64, h: f64) -> Result<CMatrix> {
    if !(h > 0.0) {
        return Err(Error::Invalid(format!("finite-difference step must be > 0, got {h}")));
    }
    let up = matexp(&build_liouvillian(model, theta + h)?.matrix, t)?;
    let um = matexp(&build_liouvillian(model, theta - h)?.matrix, t)?;
    Ok((&up - &um).scale_re(0.5 / h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use crate::liouville::models::spin_flip_matrix;
    use crate::spectral::biorthogonal_spectrum;

    fn dl() -> CMatrix {
        CMatrix::diag(&[ZERO, c(0.0, -1.0), c(0.0, 1.0), ZERO])
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let s: f64 = gauss_legendre().iter().map(|&(x, w)| w * x.powi(30)).sum();
        assert!((s - 2.0 / 31.0).abs() < 1e-14);
        let w: f64 = gauss_legendre().iter().map(|&(_, w)| w).sum();
        assert!((w - 2.0).abs() < 1e-14);
    }

    #[test]
    fn moments_match_series_and_recursion() {
        for &k in &[c(-0.3, 0.2), c(-2.0, 1.0), c(0.9, -0.1), c(-0.999, 0.0), c(-1.001, 0.0)] {
            let m = moments(k, 1.0);
            // numeric reference by fine midpoint rule
            let steps = 20000;
            let mut r = [ZERO; 3];
            for i in 0..steps {
                let mu = (i as f64 + 0.5) / steps as f64;
                let e = (k * mu).exp() / steps as f64;
                r[0] += e;
                r[1] += e * mu;
                r[2] += e * mu * mu;
            }
            for j in 0..3 {
                assert!((m[j] - r[j]).norm() < 1e-8, "k={k} j={j}");
            }
        }
    }

    #[test]
    fn zero_time_is_zero() {
        let s = biorthogonal_spectrum(&spin_flip_matrix(1.0, 0.5)).unwrap();
        let g = generator_spectral(&s, &dl(), 0.0).unwrap();
        assert_eq!(g.xi.max_abs(), 0.0);
    }

    #[test]
    fn spectral_vs_quadrature() {
        let l = spin_flip_matrix(1.0, 0.5);
        let s = biorthogonal_spectrum(&l).unwrap();
        for &t in &[0.5, 1.0, 2.0] {
            let a = generator_spectral(&s, &dl(), t).unwrap();
            let b = generator_quadrature(&l, &dl(), t, MAX_PANELS).unwrap();
            assert!(a.relative_diff(&b) < 1e-9, "t={t}");
        }
    }

    #[test]
    fn spectral_refuses_at_ep() {
        let s = biorthogonal_spectrum(&spin_flip_matrix(1.0, 1.0)).unwrap();
        assert!(matches!(generator_spectral(&s, &dl(), 1.0), Err(Error::IllConditioned(_))));
    }

    #[test]
    fn split_reassembles() {
        let l = spin_flip_matrix(1.0, 0.3);
        let s = biorthogonal_spectrum(&l).unwrap();
        let g = generator_spectral(&s, &dl(), 1.7).unwrap();
        let back = &g.theta_herm - &g.lambda_herm.scale(I);
        assert!(back.max_diff(&g.xi) < 1e-12);
        assert!(g.theta_herm.is_hermitian(1e-12) && g.lambda_herm.is_hermitian(1e-12));
    }

    #[test]
    fn propagator_derivative_matches_fd() {
        let l = spin_flip_matrix(1.0, 1.0);
        let mut s = biorthogonal_spectrum(&l).unwrap();
        s.attach_chains(&l).unwrap();
        let basis = JordanBasis::from_spectrum(&s).unwrap();
        let t = 2.3;
        let du = basis.propagator_derivative(&dl(), t);
        let h = 1e-5;
        let fd = (&matexp(&spin_flip_matrix(1.0 + h, 1.0), t).unwrap()
            - &matexp(&spin_flip_matrix(1.0 - h, 1.0), t).unwrap())
            .scale_re(0.5 / h);
        assert!(du.max_diff(&fd) < 1e-8);
    }

    #[test]
    fn route_names_round_trip() {
        for r in [Route::Spectral, Route::Quadrature, Route::PropagatorFd, Route::EpJordan] {
            assert_eq!(r.to_string().parse::<Route>().unwrap(), r);
        }
    }
}
