//! Fisher-information quantities in Liouville and Hilbert space.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::generator::{GeneratorPair, Route};
use crate::linalg::{c, dot, eig_hermitian, kron, CMatrix, CVector, C64, I, ZERO};
use crate::liouville::{
    build_liouvillian, devectorize, propagate, purity_normalize, side, LiouvilleState, OpenSystemModel,
};
use crate::spectral::BiorthogonalSpectrum;
use crate::Extended;

/// Eigenvalues below this fraction of the largest are outside the support.
pub const SUPPORT_TOL: f64 = 1e-12;
/// Eigenvalues closer than this fraction of the largest are treated as degenerate.
const DEGENERACY_TOL: f64 = 1e-7;

#[derive(Clone, Debug, PartialEq)]
pub struct FisherResult {
    pub t: f64,
    pub dqfi: f64,
    pub cqfi: Option<f64>,
    pub purity: f64,
    pub route: Route,
    pub route_residuals: BTreeMap<Route, f64>,
    pub bound: Option<f64>,
    pub var_bound: Extended,
}

impl FisherResult {
    /// Checks the documented invariants; returns a description of the first violation.
    pub fn check(&self) -> std::result::Result<(), String> {
        if self.dqfi < -1e-10 {
            return Err(format!("negative DQFI {}", self.dqfi));
        }
        if let Some(b) = self.bound {
            if self.dqfi > b + 1e-8 * b.max(1.0) {
                return Err(format!("DQFI {} exceeds bound {}", self.dqfi, b));
            }
        }
        if let (Some(f), true) = (self.cqfi, (self.purity - 1.0).abs() < 1e-12) {
            if (self.dqfi - 2.0 * f).abs() > 1e-8 * self.dqfi.max(1.0) {
                return Err(format!("pure state but DQFI {} != 2·CQFI {}", self.dqfi, f));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SldPair {
    pub dsld: CMatrix,
    pub csld: Option<CMatrix>,
}

/// Check-then-truncate a quantity that must be real; `scale` sizes the residue allowed.
fn real_checked(z: C64, scale: f64, what: &str) -> Result<f64> {
    let tol = 1e-10 * (1.0 + z.re.abs().max(scale));
    if z.im.abs() > tol {
        return Err(Error::Invalid(format!("{what} has imaginary residue {:.3e}", z.im)));
    }
    if z.re < -tol {
        return Err(Error::Invalid(format!("{what} is negative ({:.3e})", z.re)));
    }
    Ok(z.re.max(0.0))
}

fn require_normalized(s: &LiouvilleState) -> Result<()> {
    if !s.normalized || (s.vector.norm() - 1.0).abs() > 1e-9 {
        return Err(Error::BadState("state must be purity-normalised".into()));
    }
    Ok(())
}

/// 4[⟨Ξ†Ξ⟩ − ⟨Ξ†⟩⟨Ξ⟩] in a purity-normalised state.
pub fn dqfi_covariance(state: &LiouvilleState, g: &GeneratorPair) -> Result<f64> {
    require_normalized(state)?;
    let v = &state.vector;
    if g.xi.rows() != v.len() {
        return Err(Error::Dimension(format!("generator is {}×{}, state has {}", g.xi.rows(), g.xi.cols(), v.len())));
    }
    let xv = g.xi.mat_vec(v);
    let second = dot(v, &g.xi_dag.mat_vec(&xv));
    let mean = dot(v, &xv);
    let mean_dag = dot(v, &g.xi_dag.mat_vec(v));
    let cov = (second - mean_dag * mean) * 4.0;
    // rounding in Ξ|v⟩⟩ grows with ‖Ξ‖, which is large once modes have decayed
    let scale = 4.0 * (second.norm() + g.xi.max_abs() * xv.norm());
    real_checked(cov, scale, "DQFI covariance")
}

/// The three pieces ⟨ΔΘ²⟩, ⟨ΔΛ²⟩ and ⟨i[Λ, Θ]⟩ whose sum is a quarter of the DQFI.
pub fn dqfi_split(state: &LiouvilleState, g: &GeneratorPair) -> Result<(f64, f64, f64)> {
    require_normalized(state)?;
    let v = &state.vector;
    let var = |a: &CMatrix| -> f64 {
        let av = a.mat_vec(v);
        let m = dot(v, &av).re;
        av.norm().powi(2) - m * m
    };
    let comm = g.lambda_herm.commutator(&g.theta_herm).scale(I);
    let cv = dot(v, &comm.mat_vec(v));
    let scale = cv.norm() + g.xi.max_abs() * g.xi.mat_vec(v).norm();
    let cr = real_checked(c(0.0, cv.im), scale, "commutator expectation").map(|_| cv.re)?;
    Ok((var(&g.theta_herm), var(&g.lambda_herm), cr))
}

/// 4(⟨∂ρ|∂ρ⟩ − |⟨ρ|∂ρ⟩|²) with both vectors in the normalised gauge.
pub fn dqfi_derivative(state: &LiouvilleState, dstate: &[C64]) -> Result<f64> {
    require_normalized(state)?;
    if dstate.len() != state.vector.len() {
        return Err(Error::Dimension("state and derivative lengths differ".into()));
    }
    let d = CVector::from(dstate.to_vec());
    let overlap = dot(&state.vector, &d);
    let f = 4.0 * (d.norm().powi(2) - overlap.norm_sqr());
    real_checked(c(f, 0.0), 4.0 * d.norm().powi(2), "DQFI")
}

/// DQFI from an unnormalised output |v⟩⟩ and its derivative:
/// 4(‖∂v‖²/S − |⟨v|∂v⟩|²/S²) with S = ‖v‖².
pub fn dqfi_from_action(v: &[C64], dv: &[C64]) -> Result<f64> {
    let s: f64 = v.iter().map(|z| z.norm_sqr()).sum();
    if s == 0.0 {
        return Err(Error::BadState("zero state".into()));
    }
    let dd: f64 = dv.iter().map(|z| z.norm_sqr()).sum();
    let o = dot(v, dv);
    let f = 4.0 * (dd / s - o.norm_sqr() / (s * s));
    real_checked(c(f, 0.0), 4.0 * dd / s, "DQFI")
}

/// Normalised output state and its central-difference θ-derivative.
///
/// Estimates at steps h and h/2 are combined by Richardson extrapolation;
/// their disagreement is returned and must stay below 1e-5.
pub fn state_derivative_fd(
    model: &OpenSystemModel,
    rho0: &LiouvilleState,
    theta: f64,
    t: f64,
    h: f64,
) -> Result<(LiouvilleState, CVector, f64)> {
    if !(h > 0.0) {
        return Err(Error::Invalid(format!("finite-difference step must be > 0, got {h}")));
    }
    let at = |th: f64| -> Result<LiouvilleState> {
        let l = build_liouvillian(model, th)?;
        purity_normalize(&propagate(&l, rho0, t)?)
    };
    let centre = at(theta)?;
    let diff = |step: f64| -> Result<CVector> {
        let p = at(theta + step)?;
        let m = at(theta - step)?;
        Ok(p.vector.sub(&m.vector).scale(c(0.5 / step, 0.0)))
    };
    let d1 = diff(h)?;
    let d2 = diff(0.5 * h)?;
    let noise = d1.max_diff(&d2);
    if noise > 1e-5 * d2.norm().max(1.0) {
        return Err(Error::IllConditioned(format!("finite-difference estimates disagree by {noise:.3e}")));
    }
    let rich = d2.scale(c(4.0 / 3.0, 0.0)).sub(&d1.scale(c(1.0 / 3.0, 0.0)));
    Ok((centre, rich, noise))
}

/// 4t²·Cov(L†, L) for models of the form L(θ) = θ·L_base.
pub fn dqfi_overall_factor(l_base: &CMatrix, state: &LiouvilleState, t: f64) -> Result<f64> {
    let g = GeneratorPair::new(l_base.scale(c(0.0, t)), Route::Analytic, t);
    dqfi_covariance(state, &g)
}

fn steady_coefficients(s: &BiorthogonalSpectrum, dl: &CMatrix, t: Option<f64>) -> Result<Vec<C64>> {
    if s.has_ep() {
        return Err(Error::IllConditioned("steady-state series needs a diagonalisable spectrum".into()));
    }
    if s.is_empty() || s.values[0].norm() > 1e-8 * s.values.iter().map(|z| z.norm()).fold(1.0, f64::max) {
        return Err(Error::Invalid("leading eigenvalue is not zero; no steady state".into()));
    }
    let phi1 = &s.right[0];
    let dphi = dl.mat_vec(phi1);
    Ok((1..s.len())
        .map(|n| {
            let g = dot(&s.left[n], &dphi);
            let ln = s.values[n];
            match t {
                Some(t) => crate::linalg::exprel(ln, t) * g,
                None => -g / ln,
            }
        })
        .collect())
}

fn steady_sum(s: &BiorthogonalSpectrum, coef: &[C64]) -> Result<f64> {
    let phi1 = &s.right[0];
    let mut acc = ZERO;
    for (a, ca) in coef.iter().enumerate() {
        for (b, cb) in coef.iter().enumerate() {
            let (n, k) = (a + 1, b + 1);
            let g = dot(&s.right[n], &s.right[k]) - dot(&s.right[n], phi1) * dot(phi1, &s.right[k]);
            acc += ca.conj() * cb * g;
        }
    }
    let scale = 4.0 * coef.iter().map(|z| z.norm_sqr()).sum::<f64>();
    real_checked(acc * 4.0, scale, "steady-state DQFI")
}

/// Covariance of Ξ(t) in the steady state |φ₁⟩⟩, summed over the decaying modes.
pub fn dqfi_steady_series(s: &BiorthogonalSpectrum, dl: &CMatrix, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::Invalid(format!("time must be >= 0, got {t}")));
    }
    steady_sum(s, &steady_coefficients(s, dl, Some(t))?)
}

/// t → ∞ limit of [`dqfi_steady_series`].
pub fn dqfi_steady_limit(s: &BiorthogonalSpectrum, dl: &CMatrix) -> Result<f64> {
    steady_sum(s, &steady_coefficients(s, dl, None)?)
}

/// M̃ = 2(|∂ρ⟩⟩⟨⟨ρ| + |ρ⟩⟩⟨⟨∂ρ|) in the normalised gauge.
pub fn dsld(state: &LiouvilleState, dstate: &[C64]) -> Result<SldPair> {
    require_normalized(state)?;
    let v = &state.vector;
    let m = &CMatrix::outer(dstate, v) + &CMatrix::outer(v, dstate);
    Ok(SldPair { dsld: m.scale_re(2.0), csld: None })
}

/// Eigen-decomposition of ρ with ∂ρ expressed in its eigenbasis.
#[derive(Clone, Debug)]
pub struct SpectralData {
    pub p: Vec<f64>,
    pub psi: CMatrix,
    /// ⟨ψ_k|∂ρ|ψ_j⟩; within degenerate groups the basis diagonalises this block.
    pub d: CMatrix,
    pub support: Vec<bool>,
    group: Vec<usize>,
}

impl SpectralData {
    pub fn new(rho: &CMatrix, drho: &CMatrix) -> Result<Self> {
        let m = rho.require_square()?;
        if drho.rows() != m || drho.cols() != m {
            return Err(Error::Dimension("rho and drho differ in size".into()));
        }
        let herr = rho.hermiticity_error().max(drho.hermiticity_error());
        if herr > 1e-9 * rho.max_abs().max(drho.max_abs()).max(1.0) {
            return Err(Error::NotHermitian(herr));
        }
        let tr = rho.trace();
        if (tr - c(1.0, 0.0)).norm() > 1e-9 {
            return Err(Error::BadState(format!("trace of rho is {tr}")));
        }
        if drho.trace().norm() > 1e-9 * drho.max_abs().max(1.0) {
            return Err(Error::BadState(format!("trace of drho is {}", drho.trace())));
        }
        let e = eig_hermitian(rho)?;
        let p: Vec<f64> = e.values.iter().map(|z| z.re).collect();
        let pmax = p.iter().cloned().fold(0.0, f64::max);
        let mut psi = CMatrix::from_columns(&(0..m).map(|k| e.vector(k)).collect::<Vec<_>>());
        let mut group = vec![0; m];
        for k in 1..m {
            group[k] = if p[k] - p[k - 1] <= DEGENERACY_TOL * pmax { group[k - 1] } else { group[k - 1] + 1 };
        }
        let mut d = psi.adjoint().matmul(drho).matmul(&psi);
        let mut k = 0;
        while k < m {
            let mut end = k + 1;
            while end < m && group[end] == group[k] {
                end += 1;
            }
            if end - k > 1 {
                let block = CMatrix::from_fn(end - k, end - k, |i, j| d[(k + i, k + j)]);
                let eb = eig_hermitian(&block)?;
                let rot = CMatrix::from_columns(&(0..end - k).map(|i| eb.vector(i)).collect::<Vec<_>>());
                let mut full = CMatrix::identity(m);
                for i in 0..end - k {
                    for j in 0..end - k {
                        full[(k + i, k + j)] = rot[(i, j)];
                    }
                }
                psi = psi.matmul(&full);
                d = full.adjoint().matmul(&d).matmul(&full);
            }
            k = end;
        }
        let support = p.iter().map(|&x| x > SUPPORT_TOL * pmax).collect();
        Ok(Self { p, psi, d, support, group })
    }

    pub fn dim(&self) -> usize {
        self.p.len()
    }

    /// ∂θp_k.
    pub fn dp(&self, k: usize) -> f64 {
        self.d[(k, k)].re
    }

    /// ⟨ψ_k|∂θψ_j⟩ in the parallel-transport gauge.
    pub fn overlap(&self, k: usize, j: usize) -> C64 {
        if k == j || self.group[k] == self.group[j] {
            ZERO
        } else {
            self.d[(k, j)] / (self.p[j] - self.p[k])
        }
    }

    /// ⟨∂θψ_k|∂θψ_k⟩ via completeness.
    pub fn dpsi_norm_sqr(&self, k: usize) -> f64 {
        (0..self.dim()).map(|j| self.overlap(j, k).norm_sqr()).sum()
    }
}

/// M̂ in the eigenbasis: ∂p_k/p_k on the diagonal and
/// −2(p_k − p_j)/(p_k + p_j)⟨ψ_k|∂ψ_j⟩ off it; zero where both indices lie outside the support.
fn csld_eigenbasis(sd: &SpectralData) -> Result<CMatrix> {
    let m = sd.dim();
    let pmax = sd.p.iter().cloned().fold(0.0, f64::max);
    let mut out = CMatrix::zeros(m, m);
    for k in 0..m {
        for j in 0..m {
            if !sd.support[k] && !sd.support[j] {
                continue;
            }
            let s = sd.p[k] + sd.p[j];
            if s <= SUPPORT_TOL * pmax {
                return Err(Error::IllConditioned(format!("p_{k} + p_{j} vanishes inside the support")));
            }
            out[(k, j)] = if k == j {
                c(sd.dp(k) / sd.p[k], 0.0)
            } else if sd.group[k] == sd.group[j] {
                // degenerate pair: the rotated basis makes ⟨ψ_k|∂ρ|ψ_j⟩ vanish
                sd.d[(k, j)] * (2.0 / s)
            } else {
                sd.overlap(k, j) * (-2.0 * (sd.p[k] - sd.p[j]) / s)
            };
        }
    }
    Ok(out)
}

/// Conventional SLD M̂ with ∂ρ = (ρM̂ + M̂ρ)/2.
pub fn csld(rho: &CMatrix, drho: &CMatrix) -> Result<SldPair> {
    let sd = SpectralData::new(rho, drho)?;
    let mk = csld_eigenbasis(&sd)?;
    let m = sd.psi.matmul(&mk).matmul(&sd.psi.adjoint());
    let n = m.rows();
    Ok(SldPair { dsld: CMatrix::zeros(n * n, n * n), csld: Some(m) })
}

/// Σ(∂p_k)²/p_k + 4Σ p_k⟨∂ψ_k|∂ψ_k⟩ − ΣΣ 8p_kp_j/(p_k+p_j)|⟨ψ_k|∂ψ_j⟩|² over the support.
pub fn cqfi_spectral(rho: &CMatrix, drho: &CMatrix) -> Result<f64> {
    let sd = SpectralData::new(rho, drho)?;
    let sup: Vec<usize> = (0..sd.dim()).filter(|&k| sd.support[k]).collect();
    let mut f = 0.0;
    for &k in &sup {
        f += sd.dp(k).powi(2) / sd.p[k] + 4.0 * sd.p[k] * sd.dpsi_norm_sqr(k);
        for &j in &sup {
            f -= 8.0 * sd.p[k] * sd.p[j] / (sd.p[k] + sd.p[j]) * sd.overlap(k, j).norm_sqr();
        }
    }
    real_checked(c(f, 0.0), f.abs(), "CQFI")
}

/// DQFI of a mixed state from the spectral data of ρ and ∂ρ.
pub fn dqfi_spectral_mixed(rho: &CMatrix, drho: &CMatrix) -> Result<f64> {
    let sd = SpectralData::new(rho, drho)?;
    let sup: Vec<usize> = (0..sd.dim()).filter(|&k| sd.support[k]).collect();
    let s2: f64 = sup.iter().map(|&k| sd.p[k].powi(2)).sum();
    let mut f = 0.0;
    let mut pdp = 0.0;
    for &k in &sup {
        f += 4.0 * sd.dp(k).powi(2) / s2 + 8.0 * sd.p[k].powi(2) / s2 * sd.dpsi_norm_sqr(k);
        for &j in &sup {
            f -= 8.0 * sd.p[k] * sd.p[j] / s2 * sd.overlap(k, j).norm_sqr();
        }
        pdp += sd.p[k] * sd.dp(k);
    }
    f -= 4.0 * pdp * pdp / (s2 * s2);
    real_checked(c(f, 0.0), f.abs(), "DQFI")
}

/// M̃ = M̂⊗I + I⊗M̂ᵀ − 2Tr[ρ²M̂]/Tr[ρ²]·I.
pub fn dsld_spectral(rho: &CMatrix, drho: &CMatrix) -> Result<SldPair> {
    let sd = SpectralData::new(rho, drho)?;
    let m_hat = sd.psi.matmul(&csld_eigenbasis(&sd)?).matmul(&sd.psi.adjoint());
    let n = m_hat.rows();
    let id = CMatrix::identity(n);
    let rho2 = rho.matmul(rho);
    let shift = 2.0 * rho2.matmul(&m_hat).trace().re / rho2.trace().re;
    let big = &(&kron(&m_hat, &id) + &kron(&id, &m_hat.transpose())) - &CMatrix::identity(n * n).scale_re(shift);
    Ok(SldPair { dsld: big, csld: Some(m_hat) })
}

/// ĥ_θ = i(∂θU)U† by central differences of a unitary family.
pub fn conventional_generator(u: &dyn Fn(f64) -> CMatrix, theta: f64, h: f64) -> Result<CMatrix> {
    if !(h > 0.0) {
        return Err(Error::Invalid(format!("finite-difference step must be > 0, got {h}")));
    }
    let (u0, up, um) = (u(theta), u(theta + h), u(theta - h));
    for m in [&u0, &up, &um] {
        let n = m.require_square()?;
        let err = m.matmul(&m.adjoint()).max_diff(&CMatrix::identity(n));
        if err > 1e-10 {
            return Err(Error::Invalid(format!("family is not unitary (‖UU† − I‖ = {err:.3e})")));
        }
    }
    Ok((&up - &um).scale(c(0.0, 0.5 / h)).matmul(&u0.adjoint()))
}

/// Pure-state CQFI 4⟨Δh²⟩, its maximum (η_max − η_min)² and the probe that attains it.
pub fn cqfi_closed_helpers(h: &CMatrix, psi: &[C64]) -> Result<(f64, f64, CVector)> {
    let e = eig_hermitian(h)?;
    let n = e.values.len();
    if psi.len() != n {
        return Err(Error::Dimension("probe and generator differ in size".into()));
    }
    let psi = CVector::from(psi.to_vec()).normalized();
    let hp = h.mat_vec(&psi);
    let m = dot(&psi, &hp).re;
    let f_pure = (4.0 * (hp.norm().powi(2) - m * m)).max(0.0);
    let gap = e.values[n - 1].re - e.values[0].re;
    let probe = e.vector(n - 1).add(&e.vector(0)).scale(c(std::f64::consts::FRAC_1_SQRT_2, 0.0));
    Ok((f_pure, gap * gap, probe))
}

/// Cramér–Rao bound 1/(n·f).
pub fn crb_bounds(f: f64, n: u64) -> Result<Extended> {
    if n == 0 {
        return Err(Error::Invalid("protocol count must be at least 1".into()));
    }
    if !(f >= 0.0) {
        return Err(Error::Invalid(format!("Fisher information must be >= 0, got {f}")));
    }
    if f == 0.0 {
        return Ok(Extended::Divergent);
    }
    Ok(Extended::Finite(1.0 / (n as f64 * f)))
}

/// Devectorised, Hermitised (ρ, ∂ρ) from an output vector and its derivative.
pub fn density_pair(v: &[C64], dv: &[C64]) -> Result<(CMatrix, CMatrix)> {
    let m = side(v.len())?;
    let rho = devectorize(v, m)?;
    let drho = devectorize(dv, m)?;
    let herm = |a: &CMatrix| (a + &a.adjoint()).scale_re(0.5);
    Ok((herm(&rho), herm(&drho)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::pauli;

    fn qubit(r: [f64; 3]) -> CMatrix {
        let m = &(&pauli::x().scale_re(r[0]) + &pauli::y().scale_re(r[1])) + &pauli::z().scale_re(r[2]);
        (&CMatrix::identity(2) + &m).scale_re(0.5)
    }

    #[test]
    fn crb() {
        assert_eq!(crb_bounds(4.0, 1).unwrap(), Extended::Finite(0.25));
        assert_eq!(crb_bounds(0.0, 3).unwrap(), Extended::Divergent);
        assert!(crb_bounds(1.0, 0).is_err());
    }

    #[test]
    fn diagonal_csld() {
        let rho = CMatrix::diag(&[c(0.7, 0.0), c(0.3, 0.0)]);
        let drho = CMatrix::diag(&[c(0.2, 0.0), c(-0.2, 0.0)]);
        let m = csld(&rho, &drho).unwrap().csld.unwrap();
        assert!((m[(0, 0)].re - 0.2 / 0.7).abs() < 1e-12);
        assert!((m[(1, 1)].re + 0.2 / 0.3).abs() < 1e-12);
        assert!(m[(0, 1)].norm() < 1e-12);
    }

    #[test]
    fn csld_solves_lyapunov_and_qubit_formula() {
        let r = [0.3, -0.2, 0.5];
        let dr = [0.1, 0.4, -0.2];
        let rho = qubit(r);
        let drho = (&(&pauli::x().scale_re(dr[0]) + &pauli::y().scale_re(dr[1])) + &pauli::z().scale_re(dr[2]))
            .scale_re(0.5);
        let m = csld(&rho, &drho).unwrap().csld.unwrap();
        let lhs = (&rho.matmul(&m) + &m.matmul(&rho)).scale_re(0.5);
        assert!(lhs.max_diff(&drho) < 1e-12);
        // Bloch-vector form: |∂r|² + (r·∂r)²/(1 − |r|²)
        let rr: f64 = r.iter().map(|x| x * x).sum();
        let rd: f64 = r.iter().zip(&dr).map(|(a, b)| a * b).sum();
        let dd: f64 = dr.iter().map(|x| x * x).sum();
        let want = dd + rd * rd / (1.0 - rr);
        let trm2 = rho.matmul(&m).matmul(&m).trace().re;
        assert!((cqfi_spectral(&rho, &drho).unwrap() - want).abs() < 1e-12);
        assert!((trm2 - want).abs() < 1e-12);
    }

    #[test]
    fn pure_state_doubling_spectral() {
        let psi = [c(0.6, 0.0), c(0.0, 0.8)];
        let dpsi = [c(0.0, -0.8 * 0.3), c(0.6 * 0.3, 0.0)];
        let rho = CMatrix::outer(&psi, &psi);
        let drho = &CMatrix::outer(&dpsi, &psi) + &CMatrix::outer(&psi, &dpsi);
        let fq = cqfi_spectral(&rho, &drho).unwrap();
        let dn: f64 = dpsi.iter().map(|z| z.norm_sqr()).sum();
        let ov = dot(&psi, &dpsi);
        assert!((fq - 4.0 * (dn - ov.norm_sqr())).abs() < 1e-12);
        assert!((dqfi_spectral_mixed(&rho, &drho).unwrap() - 2.0 * fq).abs() < 1e-12);
    }

    #[test]
    fn maximally_mixed_static() {
        let rho = CMatrix::identity(3).scale_re(1.0 / 3.0);
        let drho = CMatrix::zeros(3, 3);
        assert_eq!(cqfi_spectral(&rho, &drho).unwrap(), 0.0);
        assert_eq!(dqfi_spectral_mixed(&rho, &drho).unwrap(), 0.0);
        assert!(dsld_spectral(&rho, &drho).unwrap().dsld.max_abs() < 1e-15);
    }

    #[test]
    fn closed_helpers() {
        let t = 0.7;
        let h = pauli::z().scale_re(t);
        let (fp, fm, probe) = cqfi_closed_helpers(&h, &[c(1.0, 0.0), ZERO]).unwrap();
        assert!(fp.abs() < 1e-15);
        assert!((fm - 4.0 * t * t).abs() < 1e-12);
        let (fp2, _, _) = cqfi_closed_helpers(&h, &probe).unwrap();
        assert!((fp2 - fm).abs() < 1e-12);
    }

    #[test]
    fn conventional_generator_of_fixed_hamiltonian() {
        let hmat = pauli::x().scale_re(0.4);
        let t = 1.5;
        let u = move |th: f64| crate::linalg::matexp(&hmat.scale(c(0.0, -th * t)), 1.0).unwrap();
        let g = conventional_generator(&u, 0.3, 1e-4).unwrap();
        assert!(g.max_diff(&pauli::x().scale_re(0.4 * t)) < 1e-6);
        let still = |_: f64| CMatrix::identity(2);
        assert!(conventional_generator(&still, 0.0, 1e-3).unwrap().max_abs() == 0.0);
        let bad = |_: f64| CMatrix::identity(2).scale_re(1.1);
        assert!(conventional_generator(&bad, 0.0, 1e-3).is_err());
    }

    #[test]
    fn dsld_relations() {
        let v = CVector::from(vec![c(0.6, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.8, 0.0)]);
        let st = LiouvilleState { vector: v.clone(), normalized: true, purity: 1.0 };
        let dv = vec![c(0.8, 0.0), ZERO, ZERO, c(-0.6, 0.0)];
        let sld = dsld(&st, &dv).unwrap();
        assert!(sld.dsld.hermiticity_error() < 1e-15);
        let rt = CMatrix::outer(&v, &v);
        let lhs = &rt.matmul(&sld.dsld) + &sld.dsld.matmul(&rt);
        let drt = (&CMatrix::outer(&dv, &v) + &CMatrix::outer(&v, &dv)).scale_re(2.0);
        assert!(lhs.max_diff(&drt) < 1e-14);
        let f = dqfi_derivative(&st, &dv).unwrap();
        let tr = rt.matmul(&sld.dsld).matmul(&sld.dsld).trace().re;
        assert!((f - tr).abs() < 1e-12);
        let ev = eig_hermitian(&sld.dsld).unwrap();
        assert!(ev.values.iter().filter(|z| z.re.abs() > 1e-12).count() <= 2);
    }

    #[test]
    fn requires_normalised_state() {
        let st = crate::liouville::models::plus_state(2);
        let g = GeneratorPair::new(CMatrix::zeros(4, 4), Route::Analytic, 0.0);
        assert!(dqfi_covariance(&st, &g).is_err());
    }
}
