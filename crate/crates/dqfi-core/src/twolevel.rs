//! Closed forms for the spin-flip qubit: H = ωσz/2, jump σx at rate γx,
//! probe (|e⟩ + |g⟩)/√2, estimated parameter ω.
//!
//! Everything is written through entire functions of z = Ω² = γx² − ω², so
//! the exceptional point γx = ω is an ordinary point of every formula and
//! needs no special casing beyond switching to power series near z = 0.

use crate::error::{Error, Result};
use crate::generator::{GeneratorPair, Route};
use crate::linalg::{c, CMatrix, CVector, C64, ZERO};
use crate::liouville::LiouvilleState;
use crate::spectral::{BiorthogonalSpectrum, EpCluster};

/// |γx − ω| below this fraction of ω counts as the exceptional point.
pub const LEP_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoLevelParams {
    pub omega: f64,
    pub gamma_x: f64,
    /// Ω = √(γx² − ω²), principal branch.
    pub big_omega: C64,
    pub is_lep: bool,
}

impl TwoLevelParams {
    pub fn new(omega: f64, gamma_x: f64) -> Result<Self> {
        if !(omega > 0.0) || !(gamma_x >= 0.0) || !omega.is_finite() || !gamma_x.is_finite() {
            return Err(Error::Invalid(format!("need ω > 0 and γx ≥ 0, got ω={omega}, γx={gamma_x}")));
        }
        Ok(Self {
            omega,
            gamma_x,
            big_omega: c(gamma_x * gamma_x - omega * omega, 0.0).sqrt(),
            is_lep: (gamma_x - omega).abs() < LEP_TOL * omega,
        })
    }

    fn z(&self) -> f64 {
        (self.gamma_x - self.omega) * (self.gamma_x + self.omega)
    }
}

/// Power series Σ_{k≥k0} z^{k−k0} τ^{2k+p} w(k) / (2k+p)!.
fn series(z: f64, tau: f64, k0: usize, p: usize, w: impl Fn(usize) -> f64) -> f64 {
    let mut sum = 0.0;
    for k in k0..k0 + 40 {
        let n = 2 * k + p;
        let mut term = w(k) * z.powi((k - k0) as i32);
        let mut fact = 1.0;
        for j in 1..=n {
            fact *= j as f64;
        }
        term *= tau.powi(n as i32) / fact;
        sum += term;
        if k > k0 + 2 && term.abs() < 1e-18 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

fn near(z: f64, tau: f64) -> bool {
    z.abs() * tau * tau < 1.0
}

/// cosh(√z τ).
fn ch(z: f64, tau: f64) -> f64 {
    if near(z, tau) {
        series(z, tau, 0, 0, |_| 1.0)
    } else if z > 0.0 {
        (z.sqrt() * tau).cosh()
    } else {
        ((-z).sqrt() * tau).cos()
    }
}

/// sinh(√z τ)/√z.
fn sh(z: f64, tau: f64) -> f64 {
    if near(z, tau) {
        series(z, tau, 0, 1, |_| 1.0)
    } else if z > 0.0 {
        (z.sqrt() * tau).sinh() / z.sqrt()
    } else {
        ((-z).sqrt() * tau).sin() / (-z).sqrt()
    }
}

/// (ch − 1)/z.
fn g1(z: f64, tau: f64) -> f64 {
    if near(z, tau) {
        series(z, tau, 1, 0, |_| 1.0)
    } else {
        (ch(z, tau) - 1.0) / z
    }
}

/// (sh − τ)/z.
fn g2(z: f64, tau: f64) -> f64 {
    if near(z, tau) {
        series(z, tau, 1, 1, |_| 1.0)
    } else {
        (sh(z, tau) - tau) / z
    }
}

/// (τ·ch − sh)/z.
fn hh(z: f64, tau: f64) -> f64 {
    if near(z, tau) {
        series(z, tau, 1, 1, |k| 2.0 * k as f64)
    } else {
        (tau * ch(z, tau) - sh(z, tau)) / z
    }
}

/// Eigenvalues in the closed-form labelling: 0, −2γx, −γx − Ω, −γx + Ω.
pub fn closed_form_values(p: &TwoLevelParams) -> [C64; 4] {
    let g = c(p.gamma_x, 0.0);
    [ZERO, -g * 2.0, -g - p.big_omega, -g + p.big_omega]
}

fn unit_phase(mut v: Vec<C64>) -> CVector {
    let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let m = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let k = v.iter().position(|z| z.norm() >= m * (1.0 - 1e-12)).unwrap_or(0);
    let ph = v[k].conj() / v[k].norm();
    for z in v.iter_mut() {
        *z = *z * ph / n;
    }
    CVector::from(v)
}

/// Closed-form biorthogonal system, ordered like the numerical pipeline
/// (descending real part, then ascending imaginary part).
///
/// The supermatrix is complex symmetric, so ⟨⟨χ_n| = φ_nᵀ/(φ_nᵀφ_n). At the
/// exceptional point φ₃ = φ₄ is self-orthogonal; the pair is flagged and
/// its left vectors are left at zero.
pub fn analytic_spectrum(p: &TwoLevelParams) -> BiorthogonalSpectrum {
    let (w, g) = (p.omega, p.gamma_x);
    let om = p.big_omega;
    let vals = closed_form_values(p);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let raw: [Vec<C64>; 4] = [
        vec![c(h, 0.0), ZERO, ZERO, c(h, 0.0)],
        vec![c(-h, 0.0), ZERO, ZERO, c(h, 0.0)],
        vec![ZERO, c(0.0, -w) - om, c(g, 0.0), ZERO],
        vec![ZERO, c(0.0, -w) + om, c(g, 0.0), ZERO],
    ];
    let mut idx: Vec<usize> = (0..4).collect();
    idx.sort_by(|&a, &b| {
        let (x, y) = (vals[a], vals[b]);
        if (x.re - y.re).abs() <= 1e-12 {
            x.im.total_cmp(&y.im)
        } else {
            y.re.total_cmp(&x.re)
        }
    });
    let mut values = Vec::new();
    let mut right = Vec::new();
    let mut left = Vec::new();
    let mut condition: f64 = 0.0;
    for &k in &idx {
        values.push(vals[k]);
        let phi = unit_phase(raw[k].clone());
        let tt: C64 = phi.iter().map(|z| z * z).sum();
        let chi = if p.is_lep && k >= 2 {
            condition = f64::INFINITY;
            CVector::zeros(4)
        } else {
            let chi = CVector::from(phi.iter().map(|z| z.conj() / tt.conj()).collect::<Vec<_>>());
            condition = condition.max(chi.norm());
            chi
        };
        right.push(phi);
        left.push(chi);
    }
    let mut ep_clusters = Vec::new();
    if p.is_lep {
        let members: Vec<usize> = (0..4).filter(|&n| idx[n] >= 2).collect();
        ep_clusters.push(EpCluster {
            members,
            value: c(-g, 0.0),
            order: 2,
            coalescence: 1.0,
            jordan_chain: None,
        });
    }
    BiorthogonalSpectrum { values, right, left, condition, ep_clusters, warnings: Vec::new() }
}

/// The 4×4 generator; only the coherence block (indices 1, 2) is non-zero.
pub fn analytic_generator(p: &TwoLevelParams, t: f64) -> Result<GeneratorPair> {
    if !(t >= 0.0) {
        return Err(Error::Invalid(format!("time must be >= 0, got {t}")));
    }
    let (w, g) = (p.omega, p.gamma_x);
    let z = if p.is_lep { 0.0 } else { p.z() };
    let tau = 2.0 * t;
    let x22 = t + 0.5 * g * g * g2(z, tau);
    let a = g1(z, tau);
    let b = w * g2(z, tau);
    let mut xi = CMatrix::zeros(4, 4);
    xi[(1, 1)] = c(x22, 0.0);
    xi[(1, 2)] = c(-a, b) * (0.5 * g);
    xi[(2, 1)] = c(a, b) * (0.5 * g);
    xi[(2, 2)] = c(-x22, 0.0);
    Ok(GeneratorPair::new(xi, Route::Analytic, t))
}

/// ℘(t), the coherence of the evolved probe.
pub fn wp(p: &TwoLevelParams, t: f64) -> C64 {
    let z = if p.is_lep { 0.0 } else { p.z() };
    let e = (-p.gamma_x * t).exp() * 0.5;
    c(ch(z, t), 0.0) * e + c(p.gamma_x, -p.omega) * (sh(z, t) * e)
}

/// ∂ω℘(t), differentiated in closed form.
pub fn dwp(p: &TwoLevelParams, t: f64) -> C64 {
    let z = if p.is_lep { 0.0 } else { p.z() };
    let w = p.omega;
    let e = (-p.gamma_x * t).exp() * 0.5;
    let s = sh(z, t);
    let h = hh(z, t);
    (c(-w * t * s, -s) - c(p.gamma_x, -w) * (w * h)) * e
}

/// Purity-normalised state [½, ℘, ℘*, ½]/√(½ + 2|℘|²) and ℘.
pub fn analytic_state(p: &TwoLevelParams, t: f64) -> Result<(LiouvilleState, C64)> {
    if !(t >= 0.0) {
        return Err(Error::Invalid(format!("time must be >= 0, got {t}")));
    }
    let q = wp(p, t);
    let purity = 0.5 + 2.0 * q.norm_sqr();
    let s = 1.0 / purity.sqrt();
    let v = vec![c(0.5 * s, 0.0), q * s, q.conj() * s, c(0.5 * s, 0.0)];
    Ok((LiouvilleState { vector: CVector::from(v), normalized: true, purity }, q))
}

/// 4/(½+2|℘|²)·[2|∂℘|² − (∂|℘|²)²/(½+2|℘|²)].
///
/// At the exceptional point the covariance of the polynomial generator in
/// the polynomial state is evaluated instead.
pub fn analytic_dqfi(p: &TwoLevelParams, t: f64) -> f64 {
    if p.is_lep {
        return lep_dqfi(p, t);
    }
    let q = wp(p, t);
    let dq = dwp(p, t);
    let a = 0.5 + 2.0 * q.norm_sqr();
    let d = 2.0 * (q.conj() * dq).re;
    (4.0 / a * (2.0 * dq.norm_sqr() - d * d / a)).max(0.0)
}

fn lep_dqfi(p: &TwoLevelParams, t: f64) -> f64 {
    let g = analytic_generator(p, t).expect("t checked by caller");
    let (st, _) = analytic_state(p, t).expect("t checked by caller");
    let v = &st.vector;
    let xv = g.xi.mat_vec(v);
    let mean = crate::linalg::dot(v, &xv);
    let second = crate::linalg::dot(&xv, &xv);
    (4.0 * (second - mean.conj() * mean).re).max(0.0)
}

/// Single-qubit CQFI, 4|∂℘|² + 16[Re(℘*∂℘)]²/(1 − 4|℘|²), with the pure-state limit.
pub fn analytic_cqfi(p: &TwoLevelParams, t: f64) -> f64 {
    let q = wp(p, t);
    let dq = dwp(p, t);
    let mixed = 1.0 - 4.0 * q.norm_sqr();
    let r = (q.conj() * dq).re;
    if mixed <= 1e-12 {
        return 4.0 * dq.norm_sqr();
    }
    4.0 * dq.norm_sqr() + 16.0 * r * r / mixed
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CurveLabel {
    Dqfi,
    Cqfi,
    EigReal,
    EigImag,
}

impl std::fmt::Display for CurveLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CurveLabel::Dqfi => "dqfi",
            CurveLabel::Cqfi => "cqfi",
            CurveLabel::EigReal => "eig-real",
            CurveLabel::EigImag => "eig-imag",
        })
    }
}

/// One plotted series: `key` names the eigenvalue (L1..L4) or the rate.
#[derive(Clone, Debug, PartialEq)]
pub struct AnalyticCurve {
    pub label: CurveLabel,
    pub key: String,
    pub param: f64,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FigureKind {
    Fig1,
    Fig2,
    Fig3,
}

impl std::str::FromStr for FigureKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim_start_matches("fig") {
            "1" => Ok(FigureKind::Fig1),
            "2" => Ok(FigureKind::Fig2),
            "3" => Ok(FigureKind::Fig3),
            other => Err(Error::Invalid(format!("unknown figure '{other}'"))),
        }
    }
}

/// Grid specification for [`figure_data`]; ω = 1 sets the scale.
#[derive(Clone, Debug, PartialEq)]
pub struct FigureGrid {
    pub ratio_max: f64,
    pub ratio_points: usize,
    pub t_max: f64,
    pub t_points: usize,
    pub rates: Vec<f64>,
}

impl Default for FigureGrid {
    fn default() -> Self {
        Self {
            ratio_max: 2.5,
            ratio_points: 251,
            t_max: 250.0,
            t_points: 2501,
            rates: vec![0.05, 0.3, 0.5, 1.0, 2.0],
        }
    }
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![a];
    }
    (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
}

pub fn figure_data(which: FigureKind, grid: &FigureGrid) -> Result<Vec<AnalyticCurve>> {
    if grid.ratio_points < 2 || grid.t_points < 2 || !(grid.t_max > 0.0) || !(grid.ratio_max > 0.0) {
        return Err(Error::Invalid("figure grid needs ≥ 2 points and a positive range".into()));
    }
    match which {
        FigureKind::Fig1 => {
            let ratios = linspace(0.0, grid.ratio_max, grid.ratio_points);
            let mut out = Vec::new();
            for n in 0..4 {
                let mut re = Vec::with_capacity(ratios.len());
                let mut im = Vec::with_capacity(ratios.len());
                for &r in &ratios {
                    let v = closed_form_values(&TwoLevelParams::new(1.0, r)?)[n];
                    re.push(v.re);
                    im.push(v.im);
                }
                let key = format!("L{}", n + 1);
                out.push(AnalyticCurve { label: CurveLabel::EigReal, key: key.clone(), param: n as f64 + 1.0, grid: ratios.clone(), values: re });
                out.push(AnalyticCurve { label: CurveLabel::EigImag, key, param: n as f64 + 1.0, grid: ratios.clone(), values: im });
            }
            Ok(out)
        }
        FigureKind::Fig2 | FigureKind::Fig3 => {
            let ts = linspace(0.0, grid.t_max, grid.t_points);
            let mut out = Vec::new();
            for &g in &grid.rates {
                let p = TwoLevelParams::new(1.0, g)?;
                let key = format!("gamma_x={g}");
                let d: Vec<f64> = ts.iter().map(|&t| analytic_dqfi(&p, t)).collect();
                out.push(AnalyticCurve { label: CurveLabel::Dqfi, key: key.clone(), param: g, grid: ts.clone(), values: d });
                if which == FigureKind::Fig3 {
                    let f: Vec<f64> = ts.iter().map(|&t| analytic_cqfi(&p, t)).collect();
                    out.push(AnalyticCurve { label: CurveLabel::Cqfi, key, param: g, grid: ts.clone(), values: f });
                }
            }
            Ok(out)
        }
    }
}

/// Local maxima and minima among points above `floor` times the curve peak.
pub fn count_extrema(values: &[f64], floor: f64) -> (usize, usize) {
    let peak = values.iter().cloned().fold(0.0, f64::max);
    let cut = floor * peak;
    let (mut maxima, mut minima) = (0, 0);
    for i in 1..values.len().saturating_sub(1) {
        let (a, b, cc) = (values[i - 1], values[i], values[i + 1]);
        if b < cut {
            continue;
        }
        if b > a && b >= cc {
            maxima += 1;
        }
        if b < a && b <= cc {
            minima += 1;
        }
    }
    (maxima, minima)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_agree_with_direct_forms() {
        for &z in &[-0.9f64, -0.2, 0.3, 0.8] {
            for &tau in &[0.5, 0.9] {
                let s = z.abs().sqrt() * tau;
                let (chd, shd) = if z > 0.0 {
                    (s.cosh(), s.sinh() / z.sqrt())
                } else {
                    (s.cos(), s.sin() / (-z).sqrt())
                };
                assert!((ch(z, tau) - chd).abs() < 1e-15);
                assert!((sh(z, tau) - shd).abs() < 1e-15);
                assert!((g1(z, tau) - (chd - 1.0) / z).abs() < 1e-12);
                assert!((g2(z, tau) - (shd - tau) / z).abs() < 1e-12);
                assert!((hh(z, tau) - (tau * chd - shd) / z).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn lep_generator_entries() {
        let p = TwoLevelParams::new(1.0, 1.0).unwrap();
        assert!(p.is_lep);
        let g = analytic_generator(&p, 1.0).unwrap();
        // t + 2t³γx²/3 at t = γx = 1
        assert!((g.xi[(1, 1)] - c(5.0 / 3.0, 0.0)).norm() < 1e-14);
        assert!((g.xi[(1, 2)] - c(-1.0, 2.0 / 3.0)).norm() < 1e-14);
        assert!((g.xi[(2, 1)] - c(1.0, 2.0 / 3.0)).norm() < 1e-14);
    }

    #[test]
    fn wp_at_lep_is_polynomial() {
        let p = TwoLevelParams::new(1.0, 1.0).unwrap();
        for &t in &[0.3, 1.0, 4.0] {
            let want = c(1.0 + t, -t) * ((-t).exp() * 0.5);
            assert!((wp(&p, t) - want).norm() < 1e-14);
        }
    }

    #[test]
    fn dwp_matches_central_difference() {
        for &g in &[0.05, 0.5, 1.0, 2.0] {
            for &t in &[0.2, 1.0, 3.0] {
                let h = 1e-5;
                let p = TwoLevelParams::new(1.0, g).unwrap();
                let pp = TwoLevelParams::new(1.0 + h, g).unwrap();
                let pm = TwoLevelParams::new(1.0 - h, g).unwrap();
                let fd = (wp(&pp, t) - wp(&pm, t)) / (2.0 * h);
                assert!((dwp(&p, t) - fd).norm() < 1e-8, "g={g} t={t}");
            }
        }
    }

    #[test]
    fn unitary_limit_keeps_purity() {
        let p = TwoLevelParams::new(1.0, 0.0).unwrap();
        for &t in &[0.0, 0.7, 5.0] {
            assert!((wp(&p, t).norm() - 0.5).abs() < 1e-15);
        }
        assert_eq!(wp(&p, 0.0), c(0.5, 0.0));
    }

    #[test]
    fn cqfi_forms_agree() {
        let p = TwoLevelParams::new(1.0, 0.4).unwrap();
        let t = 1.3;
        let (q, d) = (wp(&p, t), dwp(&p, t));
        let literal = 2.0 * d.norm_sqr()
            + ((q * d.conj()).powi(2) * 4.0 + (q.conj() * d).powi(2) * 4.0 + 2.0 * d.norm_sqr()).re
                / (1.0 - 4.0 * q.norm_sqr());
        assert!((literal - analytic_cqfi(&p, t)).abs() < 1e-12);
    }

    #[test]
    fn zero_time() {
        let p = TwoLevelParams::new(1.0, 0.5).unwrap();
        assert_eq!(analytic_dqfi(&p, 0.0), 0.0);
        assert_eq!(analytic_generator(&p, 0.0).unwrap().xi.max_abs(), 0.0);
    }

    #[test]
    fn lep_spectrum_flagged() {
        let s = analytic_spectrum(&TwoLevelParams::new(1.0, 1.0).unwrap());
        assert_eq!(s.ep_clusters.len(), 1);
        assert!((s.right[s.ep_clusters[0].members[0]].max_diff(&s.right[s.ep_clusters[0].members[1]])) < 1e-15);
    }
}
