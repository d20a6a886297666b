//! Route selection and per-time evaluation of DQFI, CQFI, purity and bound.
//!
//! The output derivative is always formed as ∂θU·|ρ₀⟩⟩ rather than Ξ·|ρ(t)⟩⟩:
//! Ξ contains U⁻¹ and its entries grow like e^{t·max|Re L|}, while ∂θU
//! stays bounded for any Lindblad generator.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::fisher::{cqfi_spectral, density_pair, dqfi_from_action, FisherResult};
use crate::generator::{
    dqfi_upper_bound, generator_ep, generator_propagator_fd, generator_quadrature, generator_spectral,
    propagator_derivative_quadrature, propagator_fd_derivative, GeneratorPair, JordanBasis, Route, MAX_PANELS,
};
use crate::linalg::{matexp, CMatrix, CVector};
use crate::liouville::{build_liouvillian, d_liouvillian_auto, default_fd_step, LiouvilleState, LiouvillianMatrix, OpenSystemModel};
use crate::spectral::{biorthogonal_spectrum, BiorthogonalSpectrum};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RoutePolicy {
    Auto,
    Fixed(Route),
}

impl fmt::Display for RoutePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RoutePolicy::Auto => f.write_str("auto"),
            RoutePolicy::Fixed(r) => write!(f, "{r}"),
        }
    }
}

impl FromStr for RoutePolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(RoutePolicy::Auto);
        }
        match s.parse::<Route>()? {
            Route::Analytic => Err(Error::Invalid("the analytic route is not available for general models".into())),
            r => Ok(RoutePolicy::Fixed(r)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalOptions {
    /// Protocol repetitions n in the Cramér–Rao column.
    pub protocols: u64,
    pub with_cqfi: bool,
    pub with_bound: bool,
    /// Compare the chosen route with propagator finite differences.
    pub with_residual: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self { protocols: 1, with_cqfi: true, with_bound: true, with_residual: true }
    }
}

/// A model frozen at one θ with its spectrum, ready to be evaluated at many times.
pub struct Evaluator {
    model: OpenSystemModel,
    theta: f64,
    rho0: LiouvilleState,
    l: LiouvillianMatrix,
    dl: CMatrix,
    spectrum: BiorthogonalSpectrum,
    jordan: Option<JordanBasis>,
    policy: RoutePolicy,
}

impl fmt::Debug for Evaluator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Evaluator")
            .field("theta", &self.theta)
            .field("policy", &self.policy)
            .field("route", &self.preferred_route())
            .finish()
    }
}

impl Evaluator {
    pub fn new(model: &OpenSystemModel, theta: f64, rho0: &LiouvilleState, policy: RoutePolicy) -> Result<Self> {
        if rho0.normalized {
            return Err(Error::BadState("initial state must be trace-normalised".into()));
        }
        let l = build_liouvillian(model, theta)?;
        if rho0.vector.len() != l.matrix.rows() {
            return Err(Error::Dimension(format!(
                "initial state has {} entries, supermatrix is {}×{}",
                rho0.vector.len(),
                l.matrix.rows(),
                l.matrix.cols()
            )));
        }
        let dl = d_liouvillian_auto(model, theta)?;
        let mut spectrum = biorthogonal_spectrum(&l.matrix)?;
        let jordan = if spectrum.is_usable() {
            JordanBasis::from_spectrum(&spectrum).ok()
        } else if spectrum.has_ep() {
            match spectrum.attach_chains(&l.matrix) {
                Ok(()) => JordanBasis::from_spectrum(&spectrum).ok(),
                Err(e) => {
                    log::debug!("no Jordan chain at θ = {theta}: {e}");
                    None
                }
            }
        } else {
            None
        };
        Ok(Self { model: model.clone(), theta, rho0: rho0.clone(), l, dl, spectrum, jordan, policy })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn spectrum(&self) -> &BiorthogonalSpectrum {
        &self.spectrum
    }

    pub fn liouvillian(&self) -> &LiouvillianMatrix {
        &self.l
    }

    pub fn d_liouvillian(&self) -> &CMatrix {
        &self.dl
    }

    /// Route used by `auto`: spectral when the eigenbasis is usable, the Jordan
    /// route at a resolvable EP, quadrature otherwise.
    pub fn preferred_route(&self) -> Route {
        match self.policy {
            RoutePolicy::Fixed(r) => r,
            RoutePolicy::Auto if self.spectrum.is_usable() => Route::Spectral,
            RoutePolicy::Auto if self.jordan.is_some() => Route::EpJordan,
            RoutePolicy::Auto => Route::Quadrature,
        }
    }

    fn candidates(&self) -> Vec<Route> {
        let first = self.preferred_route();
        match self.policy {
            RoutePolicy::Fixed(r) => vec![r],
            RoutePolicy::Auto => {
                let mut v = vec![first];
                for r in [Route::EpJordan, Route::Quadrature] {
                    if !v.contains(&r) {
                        v.push(r);
                    }
                }
                v
            }
        }
    }

    /// |ρ(t)⟩⟩ = e^{Lt}|ρ₀⟩⟩, trace-normalised.
    pub fn output(&self, t: f64) -> Result<CVector> {
        check_time(t)?;
        Ok(matexp(&self.l.matrix, t)?.mat_vec(&self.rho0.vector))
    }

    /// ∂θU(t)·|ρ₀⟩⟩ by the given route.
    pub fn action(&self, route: Route, t: f64) -> Result<CVector> {
        check_time(t)?;
        let du = match route {
            Route::Spectral => {
                if !self.spectrum.is_usable() {
                    return Err(Error::IllConditioned(format!(
                        "spectral route refused (EP clusters: {}, condition {:.3e})",
                        self.spectrum.ep_clusters.len(),
                        self.spectrum.condition
                    )));
                }
                self.basis()?.propagator_derivative(&self.dl, t)
            }
            Route::EpJordan => self.basis()?.propagator_derivative(&self.dl, t),
            Route::Quadrature => propagator_derivative_quadrature(&self.l.matrix, &self.dl, t, MAX_PANELS)?.0,
            Route::PropagatorFd => propagator_fd_derivative(&self.model, self.theta, t, default_fd_step(self.theta))?,
            Route::Analytic => return Err(Error::Unsupported("analytic route in the generic pipeline".into())),
        };
        du.check_finite()?;
        Ok(du.mat_vec(&self.rho0.vector))
    }

    fn basis(&self) -> Result<&JordanBasis> {
        self.jordan
            .as_ref()
            .ok_or_else(|| Error::IllConditioned("no eigenbasis or Jordan basis available".into()))
    }

    /// Ξ(t) by the given route.
    pub fn generator(&self, route: Route, t: f64) -> Result<GeneratorPair> {
        match route {
            Route::Spectral => generator_spectral(&self.spectrum, &self.dl, t),
            Route::EpJordan => {
                if self.jordan.is_none() {
                    return Err(Error::IllConditioned("no Jordan basis available".into()));
                }
                generator_ep(&self.spectrum, &self.dl, t)
            }
            Route::Quadrature => generator_quadrature(&self.l.matrix, &self.dl, t, MAX_PANELS),
            Route::PropagatorFd => generator_propagator_fd(&self.model, self.theta, t, default_fd_step(self.theta)),
            Route::Analytic => Err(Error::Unsupported("analytic route in the generic pipeline".into())),
        }
    }

    /// Ξ(t) by the policy, falling back along the same chain as [`Evaluator::evaluate`].
    pub fn generator_auto(&self, t: f64) -> Result<GeneratorPair> {
        let mut last = None;
        for r in self.candidates() {
            match self.generator(r, t) {
                Ok(g) => return Ok(g),
                Err(e) => {
                    log::info!("generator route {r} failed at t = {t}: {e}");
                    last = Some(e);
                }
            }
        }
        Err(last.unwrap_or_else(|| Error::Invalid("no route available".into())))
    }

    /// Action by the policy; returns the route that succeeded.
    pub fn action_auto(&self, t: f64) -> Result<(Route, CVector)> {
        let mut last = None;
        for r in self.candidates() {
            match self.action(r, t) {
                Ok(v) => return Ok((r, v)),
                Err(e) => {
                    log::info!("route {r} failed at t = {t}: {e}");
                    last = Some(e);
                }
            }
        }
        Err(last.unwrap_or_else(|| Error::Invalid("no route available".into())))
    }

    pub fn evaluate(&self, t: f64, opts: &EvalOptions) -> Result<FisherResult> {
        let v = self.output(t)?;
        let (route, dv) = self.action_auto(t)?;
        let dqfi = dqfi_from_action(&v, &dv)?;
        let purity = v.norm().powi(2);
        let cqfi = if opts.with_cqfi {
            let (rho, drho) = density_pair(&v, &dv)?;
            Some(cqfi_spectral(&rho, &drho)?)
        } else {
            None
        };
        let mut route_residuals = BTreeMap::new();
        if opts.with_residual {
            let alt = if route == Route::PropagatorFd { Route::Quadrature } else { Route::PropagatorFd };
            let dv_alt = self.action(alt, t)?;
            let diff = dv.iter().zip(dv_alt.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            let scale = dv.iter().map(|z| z.norm()).fold(1.0, f64::max);
            route_residuals.insert(alt, diff / scale);
        }
        let bound = if opts.with_bound {
            match self.generator(route, t).and_then(|g| dqfi_upper_bound(&g)) {
                Ok(b) if b.is_finite() => Some(b),
                Ok(_) => None,
                Err(e) => {
                    log::debug!("bound unavailable at t = {t}: {e}");
                    None
                }
            }
        } else {
            None
        };
        let var_bound = crate::fisher::crb_bounds(dqfi, opts.protocols)?;
        let fallback = route != self.preferred_route();
        if fallback {
            log::warn!("t = {t}: fell back from {} to {route}", self.preferred_route());
        }
        Ok(FisherResult { t, dqfi, cqfi, purity, route, route_residuals, bound, var_bound })
    }
}

fn check_time(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::Invalid(format!("time must be finite and >= 0, got {t}")))
    }
}
