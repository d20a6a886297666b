//! Parameterised Lindblad models and their Liouville-space representation.
//!
//! Vectorisation stacks rows: entry (i, j) of an M×M operator lands at
//! index i·M + j, so |AρB⟩⟩ = (A ⊗ Bᵀ)|ρ⟩⟩.

use crate::error::{Error, Result};
use crate::linalg::{c, kron, matexp, pauli, CMatrix, CVector, C64, I, ZERO};
use std::fmt;
use std::sync::Arc;

/// Scalar- or matrix-valued function of the estimated parameter.
pub type ParamFn<T> = Arc<dyn Fn(f64) -> T + Send + Sync>;

const HERMITIAN_TOL: f64 = 1e-12;

/// A jump operator with a parameter-dependent rate.
#[derive(Clone)]
pub struct Jump {
    pub op: CMatrix,
    pub rate: ParamFn<f64>,
    pub d_rate: Option<ParamFn<f64>>,
}

/// Lindblad model dρ/dt = −i[H(θ), ρ] + Σ_k γ_k(θ)(Γ_k ρ Γ_k† − ½{Γ_k†Γ_k, ρ}).
#[derive(Clone)]
pub struct OpenSystemModel {
    dim: usize,
    hamiltonian: ParamFn<CMatrix>,
    d_hamiltonian: Option<ParamFn<CMatrix>>,
    jumps: Vec<Jump>,
}

impl fmt::Debug for OpenSystemModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OpenSystemModel")
            .field("dim", &self.dim)
            .field("jumps", &self.jumps.len())
            .field("analytic", &self.has_analytic_derivatives())
            .finish()
    }
}

impl OpenSystemModel {
    pub fn new(dim: usize, hamiltonian: impl Fn(f64) -> CMatrix + Send + Sync + 'static) -> Self {
        Self { dim, hamiltonian: Arc::new(hamiltonian), d_hamiltonian: None, jumps: Vec::new() }
    }

    pub fn with_h_derivative(mut self, dh: impl Fn(f64) -> CMatrix + Send + Sync + 'static) -> Self {
        self.d_hamiltonian = Some(Arc::new(dh));
        self
    }

    pub fn with_jump(
        mut self,
        op: CMatrix,
        rate: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d_rate: Option<ParamFn<f64>>,
    ) -> Self {
        self.jumps.push(Jump { op, rate: Arc::new(rate), d_rate });
        self
    }

    pub fn push_jump(&mut self, jump: Jump) {
        self.jumps.push(jump);
    }

    pub fn set_h_derivative(&mut self, dh: ParamFn<CMatrix>) {
        self.d_hamiltonian = Some(dh);
    }

    pub fn from_parts(dim: usize, hamiltonian: ParamFn<CMatrix>) -> Self {
        Self { dim, hamiltonian, d_hamiltonian: None, jumps: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn jumps(&self) -> &[Jump] {
        &self.jumps
    }

    pub fn hamiltonian_at(&self, theta: f64) -> CMatrix {
        (self.hamiltonian)(theta)
    }

    pub fn rates_at(&self, theta: f64) -> Vec<f64> {
        self.jumps.iter().map(|j| (j.rate)(theta)).collect()
    }

    pub fn has_analytic_derivatives(&self) -> bool {
        self.d_hamiltonian.is_some() && self.jumps.iter().all(|j| j.d_rate.is_some())
    }

    /// Checks Hermiticity of H, operator shapes and rate signs at θ.
    pub fn validate_at(&self, theta: f64) -> Result<()> {
        let h = self.hamiltonian_at(theta);
        if h.rows() != self.dim || h.cols() != self.dim {
            return Err(Error::Dimension(format!(
                "Hamiltonian is {}x{}, model dimension is {}",
                h.rows(),
                h.cols(),
                self.dim
            )));
        }
        h.check_finite()?;
        let herr = h.hermiticity_error();
        if herr > HERMITIAN_TOL * h.max_abs().max(1.0) {
            return Err(Error::NotHermitian(herr));
        }
        for (k, j) in self.jumps.iter().enumerate() {
            if j.op.rows() != self.dim || j.op.cols() != self.dim {
                return Err(Error::Dimension(format!("jump {k} has wrong shape")));
            }
            let r = (j.rate)(theta);
            if !r.is_finite() || r < 0.0 {
                return Err(Error::NegativeRate { index: k, rate: r });
            }
        }
        Ok(())
    }

    /// Right-hand side of the master equation applied to ρ, in matrix form.
    pub fn lindblad_rhs(&self, theta: f64, rho: &CMatrix) -> CMatrix {
        let h = self.hamiltonian_at(theta);
        let mut out = h.commutator(rho).scale(-I);
        for j in &self.jumps {
            let g = (j.rate)(theta);
            let gd = j.op.adjoint();
            let gdg = gd.matmul(&j.op);
            let term = &j.op.matmul(rho).matmul(&gd)
                - &(&gdg.matmul(rho) + &rho.matmul(&gdg)).scale_re(0.5);
            out = &out + &term.scale_re(g);
        }
        out
    }
}

/// Tag for the vectorisation order used by a supermatrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Vectorization {
    RowMajor,
}

impl fmt::Display for Vectorization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("row-major-stacking")
    }
}

/// Vectorised Lindblad generator at a fixed parameter value.
#[derive(Clone, Debug)]
pub struct LiouvillianMatrix {
    pub matrix: CMatrix,
    pub theta: f64,
    pub convention: Vectorization,
}

impl LiouvillianMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    /// max |⟨⟨vec(I)| L|, zero for a trace-preserving generator.
    pub fn trace_defect(&self) -> f64 {
        let n = self.dim();
        let m = (n as f64).sqrt().round() as usize;
        let id = vectorize(&CMatrix::identity(m));
        (0..n)
            .map(|j| (0..n).map(|i| id[i].conj() * self.matrix[(i, j)]).sum::<C64>().norm())
            .fold(0.0, f64::max)
    }
}

/// L = −i(H⊗I − I⊗Hᵀ) + Σ γ_k (Γ⊗Γ* − ½(Γ†Γ⊗I + I⊗ΓᵀΓ*)).
///
/// Linear in (H, γ); the derivative supermatrix reuses it with (∂H, ∂γ).
pub fn supermatrix(h: &CMatrix, jumps: &[(&CMatrix, f64)]) -> CMatrix {
    let m = h.rows();
    let id = CMatrix::identity(m);
    let mut l = (&kron(h, &id) - &kron(&id, &h.transpose())).scale(-I);
    for &(g, rate) in jumps {
        if rate == 0.0 {
            continue;
        }
        let gdg = g.adjoint().matmul(g);
        let gdg_t = gdg.transpose();
        let mut d = kron(g, &g.conj());
        d = &d - &(&kron(&gdg, &id) + &kron(&id, &gdg_t)).scale_re(0.5);
        l = &l + &d.scale_re(rate);
    }
    l
}

pub fn build_liouvillian(model: &OpenSystemModel, theta: f64) -> Result<LiouvillianMatrix> {
    model.validate_at(theta)?;
    let h = model.hamiltonian_at(theta);
    let rates = model.rates_at(theta);
    let jumps: Vec<(&CMatrix, f64)> = model.jumps.iter().map(|j| &j.op).zip(rates).collect();
    let matrix = supermatrix(&h, &jumps);
    let out = LiouvillianMatrix { matrix, theta, convention: Vectorization::RowMajor };
    let defect = out.trace_defect();
    if defect > 1e-10 * out.matrix.max_abs().max(1.0) {
        return Err(Error::BadState(format!("Liouvillian is not trace preserving ({defect:.3e})")));
    }
    Ok(out)
}

/// How ∂θL is obtained.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DerivMode {
    Analytic,
    CentralFd { h: f64 },
}

pub fn default_fd_step(theta: f64) -> f64 {
    1e-6 * theta.abs().max(1.0)
}

pub fn d_liouvillian(model: &OpenSystemModel, theta: f64, mode: DerivMode) -> Result<CMatrix> {
    match mode {
        DerivMode::Analytic => {
            let dh = model.d_hamiltonian.as_ref().ok_or(Error::MissingDerivative)?;
            let dh = dh(theta);
            let mut jumps = Vec::with_capacity(model.jumps.len());
            for j in &model.jumps {
                let dr = j.d_rate.as_ref().ok_or(Error::MissingDerivative)?;
                jumps.push((&j.op, dr(theta)));
            }
            Ok(supermatrix(&dh, &jumps))
        }
        DerivMode::CentralFd { h } => {
            if !(h > 0.0) {
                return Err(Error::Invalid(format!("finite-difference step must be > 0, got {h}")));
            }
            let lp = build_liouvillian(model, theta + h)?.matrix;
            let lm = build_liouvillian(model, theta - h)?.matrix;
            Ok((&lp - &lm).scale_re(0.5 / h))
        }
    }
}

/// Analytic derivative when the model carries one, central differences otherwise.
pub fn d_liouvillian_auto(model: &OpenSystemModel, theta: f64) -> Result<CMatrix> {
    if model.has_analytic_derivatives() {
        d_liouvillian(model, theta, DerivMode::Analytic)
    } else {
        d_liouvillian(model, theta, DerivMode::CentralFd { h: default_fd_step(theta) })
    }
}

/// Row-major stacking: index i·M + j holds ρ(i, j).
pub fn vectorize(rho: &CMatrix) -> CVector {
    CVector::from(rho.as_slice().to_vec())
}

pub fn devectorize(v: &[C64], m: usize) -> Result<CMatrix> {
    if v.len() != m * m {
        return Err(Error::Dimension(format!("vector of length {} is not {m}x{m}", v.len())));
    }
    CMatrix::from_vec(m, m, v.to_vec())
}

/// Side length M of an M²-vector.
pub fn side(n: usize) -> Result<usize> {
    let m = (n as f64).sqrt().round() as usize;
    if m * m == n {
        Ok(m)
    } else {
        Err(Error::Dimension(format!("{n} is not a perfect square")))
    }
}

/// A density matrix in Liouville space, optionally purity-normalised.
#[derive(Clone, Debug, PartialEq)]
pub struct LiouvilleState {
    pub vector: CVector,
    pub normalized: bool,
    /// Tr ρ² of the unnormalised state.
    pub purity: f64,
}

impl LiouvilleState {
    /// Wraps a density matrix after checking Hermiticity and unit trace.
    pub fn from_density(rho: &CMatrix) -> Result<Self> {
        rho.require_square()?;
        check_density(rho, 1.0)?;
        let v = vectorize(rho);
        let purity = v.norm().powi(2);
        Ok(Self { vector: v, normalized: false, purity })
    }

    pub fn pure(psi: &[C64]) -> Result<Self> {
        let n: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if n == 0.0 {
            return Err(Error::Invalid("zero state vector".into()));
        }
        let psi: Vec<C64> = psi.iter().map(|z| z / n).collect();
        Self::from_density(&CMatrix::outer(&psi, &psi))
    }

    pub fn matrix(&self) -> CMatrix {
        let m = side(self.vector.len()).expect("state length is a square");
        devectorize(&self.vector, m).expect("dimension checked")
    }

    pub fn dim(&self) -> usize {
        side(self.vector.len()).expect("state length is a square")
    }
}

fn check_density(rho: &CMatrix, scale: f64) -> Result<()> {
    let tol = 1e-9 * scale.max(1.0);
    let herr = rho.hermiticity_error();
    if herr > tol {
        return Err(Error::BadState(format!("density matrix not Hermitian ({herr:.3e})")));
    }
    let tr = rho.trace();
    if (tr - c(1.0, 0.0)).norm() > tol {
        return Err(Error::BadState(format!("density matrix trace is {tr}")));
    }
    Ok(())
}

/// e^{Lt}|ρ₀⟩⟩ with post-checks on Hermiticity and trace.
pub fn propagate(l: &LiouvillianMatrix, rho0: &LiouvilleState, t: f64) -> Result<LiouvilleState> {
    if !(t >= 0.0) {
        return Err(Error::Invalid(format!("time must be >= 0, got {t}")));
    }
    if rho0.normalized {
        return Err(Error::Invalid("propagate expects a trace-normalised state".into()));
    }
    let u = matexp(&l.matrix, t)?;
    let v = u.mat_vec(&rho0.vector);
    let m = side(v.len())?;
    let rho = devectorize(&v, m)?;
    check_density(&rho, v.norm())?;
    let purity = v.norm().powi(2);
    Ok(LiouvilleState { vector: v, normalized: false, purity })
}

/// Divides by √Tr ρ² so the coherence vector has unit Euclidean norm.
pub fn purity_normalize(s: &LiouvilleState) -> Result<LiouvilleState> {
    if s.normalized {
        return Ok(s.clone());
    }
    let n = s.vector.norm();
    if n == 0.0 {
        return Err(Error::Invalid("cannot normalise a zero vector".into()));
    }
    Ok(LiouvilleState {
        vector: s.vector.scale(c(1.0 / n, 0.0)),
        normalized: true,
        purity: n * n,
    })
}

/// Ready-made models used across the crate and its tests.
pub mod models {
    use super::*;

    /// H = θσz/2 with σx jumps at rate γx; θ plays the role of ω.
    pub fn spin_flip(gamma_x: f64) -> OpenSystemModel {
        OpenSystemModel::new(2, |w| pauli::z().scale_re(0.5 * w))
            .with_h_derivative(|_| pauli::z().scale_re(0.5))
            .with_jump(pauli::x(), move |_| gamma_x, Some(Arc::new(|_| 0.0)))
    }

    /// H = B(cos θ σx + sin θ σz), optionally with σz dephasing.
    pub fn field_angle(b: f64, dephasing: f64) -> OpenSystemModel {
        OpenSystemModel::new(2, move |th| {
            &pauli::x().scale_re(b * th.cos()) + &pauli::z().scale_re(b * th.sin())
        })
        .with_h_derivative(move |th| {
            &pauli::x().scale_re(-b * th.sin()) + &pauli::z().scale_re(b * th.cos())
        })
        .with_jump(pauli::z(), move |_| dephasing, Some(Arc::new(|_| 0.0)))
    }

    /// Resonantly driven qubit with decay: H = θσx/2, jump σ⁻ at rate κ.
    /// Its steady state depends on θ.
    pub fn driven_decay(kappa: f64) -> OpenSystemModel {
        let lower = CMatrix::from_real_rows(&[vec![0.0, 0.0], vec![1.0, 0.0]]);
        OpenSystemModel::new(2, |th| pauli::x().scale_re(0.5 * th))
            .with_h_derivative(|_| pauli::x().scale_re(0.5))
            .with_jump(lower, move |_| kappa, Some(Arc::new(|_| 0.0)))
    }

    /// L(θ) = θ·L_base: H = θσz/2 and σz dephasing at rate κθ.
    pub fn scaled_dephasing(kappa: f64) -> OpenSystemModel {
        OpenSystemModel::new(2, |th| pauli::z().scale_re(0.5 * th))
            .with_h_derivative(|_| pauli::z().scale_re(0.5))
            .with_jump(pauli::z(), move |th| kappa * th, Some(Arc::new(move |_| kappa)))
    }

    /// Equal superposition of all basis states, (|e⟩+|g⟩)/√2 for a qubit.
    pub fn plus_state(dim: usize) -> LiouvilleState {
        let psi = vec![c(1.0, 0.0); dim];
        LiouvilleState::pure(&psi).expect("non-zero probe")
    }

    /// Spin-flip supermatrix written out entry by entry.
    pub fn spin_flip_matrix(omega: f64, gamma_x: f64) -> CMatrix {
        let g = c(gamma_x, 0.0);
        CMatrix::from_rows(&[
            vec![-g, ZERO, ZERO, g],
            vec![ZERO, c(-gamma_x, -omega), g, ZERO],
            vec![ZERO, g, c(-gamma_x, omega), ZERO],
            vec![g, ZERO, ZERO, -g],
        ])
    }
}

#[cfg(test)]
mod tests {
    use super::models::*;
    use super::*;

    #[test]
    fn vectorize_row_major() {
        let m = CMatrix::from_real_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        let v = vectorize(&m);
        let want: Vec<C64> = [1.0, 2.0, 3.0, 4.0].iter().map(|&x| c(x, 0.0)).collect();
        assert_eq!(&*v, &want[..]);
        assert_eq!(devectorize(&v, 2).unwrap(), m);
    }

    #[test]
    fn plus_state_vector() {
        let s = plus_state(2);
        assert!(s.vector.iter().all(|z| (z - c(0.5, 0.0)).norm() < 1e-15));
    }

    #[test]
    fn spin_flip_supermatrix() {
        let l = build_liouvillian(&spin_flip(0.7), 1.3).unwrap();
        assert!(l.matrix.max_diff(&spin_flip_matrix(1.3, 0.7)) < 1e-15);
    }

    #[test]
    fn closed_system_is_anti_hermitian() {
        let l = build_liouvillian(&spin_flip(0.0), 1.0).unwrap().matrix;
        assert!(l.max_diff(&l.adjoint().scale_re(-1.0)) < 1e-15);
    }

    #[test]
    fn negative_rate_rejected() {
        let m = OpenSystemModel::new(2, |_| pauli::z()).with_jump(pauli::x(), |_| -1.0, None);
        assert!(matches!(build_liouvillian(&m, 0.0), Err(Error::NegativeRate { .. })));
    }

    #[test]
    fn analytic_derivative_spin_flip() {
        let d = d_liouvillian(&spin_flip(0.5), 1.0, DerivMode::Analytic).unwrap();
        let want = CMatrix::diag(&[ZERO, c(0.0, -1.0), c(0.0, 1.0), ZERO]);
        assert!(d.max_diff(&want) < 1e-15);
    }

    #[test]
    fn missing_derivative() {
        let m = OpenSystemModel::new(2, |_| pauli::z());
        assert_eq!(d_liouvillian(&m, 0.0, DerivMode::Analytic), Err(Error::MissingDerivative));
    }

    #[test]
    fn purity_normalize_mixed() {
        let s = LiouvilleState::from_density(&CMatrix::identity(2).scale_re(0.5)).unwrap();
        let n = purity_normalize(&s).unwrap();
        assert!((n.vector[0].re - 0.5 * 2f64.sqrt()).abs() < 1e-15);
        assert!((n.purity - 0.5).abs() < 1e-15);
    }

    #[test]
    fn long_time_is_maximally_mixed() {
        let l = build_liouvillian(&spin_flip(1.0), 1.0).unwrap();
        let s = propagate(&l, &plus_state(2), 40.0).unwrap();
        let want = [0.5, 0.0, 0.0, 0.5];
        for (z, w) in s.vector.iter().zip(want) {
            assert!((z - c(w, 0.0)).norm() < 1e-12);
        }
    }
}
