//! Interaction models, the kernel exponent map, and two-body collision
//! geometry.
//!
//! A binary collision with deflection direction `σ` sends the incoming pair
//! `(ξ, ξ*)` to
//!
//! ```text
//! ξ'  = (ξ + ξ*)/2 + |ξ − ξ*| σ / 2
//! ξ'* = (ξ + ξ*)/2 − |ξ − ξ*| σ / 2
//! ```
//!
//! which conserves momentum and kinetic energy exactly. The collision rate is
//! weighted by the kernel `B = kernel_scale · b(cosθ) · |ξ − ξ*|^γ`, where
//! `cosθ = σ·(ξ−ξ*)/|ξ−ξ*|` and the exponent `γ = (s−5)/(s−1)` encodes a
//! repulsive two-body potential decaying with exponent `s`:
//! hard potentials for `s > 5` (`γ > 0`), soft for `s < 5` (`γ < 0`), and
//! Maxwell molecules at `s = 5` (`γ = 0`, rate independent of relative speed).

use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Angular part `b(cosθ)` of the collision kernel.
///
/// The default is the isotropic constant `b = 1/(4π)`, normalized so that
/// `∫_{S²} b dσ = 1`. `Custom` is a hook for any other smooth angular weight;
/// only the isotropic form is supported by the fast spectral evaluator.
#[derive(Clone)]
pub enum AngularModel {
    /// `b(cosθ) = 1/(4π)`.
    Isotropic,
    /// User-supplied smooth `b(cosθ)`.
    Custom(std::sync::Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl AngularModel {
    /// Evaluate `b(cosθ)`.
    pub fn eval(&self, cos_theta: f64) -> f64 {
        match self {
            AngularModel::Isotropic => 1.0 / (4.0 * std::f64::consts::PI),
            AngularModel::Custom(b) => b(cos_theta),
        }
    }

    /// True for the isotropic constant weight.
    pub fn is_isotropic(&self) -> bool {
        matches!(self, AngularModel::Isotropic)
    }
}

impl std::fmt::Debug for AngularModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AngularModel::Isotropic => write!(f, "Isotropic"),
            AngularModel::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl PartialEq for AngularModel {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (AngularModel::Isotropic, AngularModel::Isotropic) => true,
            (AngularModel::Custom(a), AngularModel::Custom(b)) => std::sync::Arc::ptr_eq(a, b),
            _ => false,
        }
    }
}

/// Kernel exponent `γ = (s−5)/(s−1)` for a potential decay exponent `s > 2`.
///
/// Strictly increasing in `s`, with range `(−3, 1)`; `γ = 0` iff `s = 5`.
pub fn gamma_from_s(s: f64) -> Result<f64> {
    if !s.is_finite() || s <= 2.0 {
        return Err(Error::InvalidParam(format!(
            "potential exponent s must be finite and > 2, got {s}"
        )));
    }
    Ok((s - 5.0) / (s - 1.0))
}

/// Inverse of [`gamma_from_s`]: `s = (5−γ)/(1−γ)` for `γ ∈ (−3, 1)`.
pub fn s_from_gamma(gamma: f64) -> Result<f64> {
    if !gamma.is_finite() || gamma <= -3.0 || gamma >= 1.0 {
        return Err(Error::InvalidParam(format!(
            "kernel exponent gamma must lie in (-3, 1), got {gamma}"
        )));
    }
    Ok((5.0 - gamma) / (1.0 - gamma))
}

/// Interaction model: potential exponent, kernel exponent, angular weight,
/// and overall kernel scale.
#[derive(Clone, Debug, PartialEq)]
pub struct InteractionModel {
    /// Potential decay exponent `s > 2`.
    pub s: f64,
    /// Kernel exponent `γ = (s−5)/(s−1) ∈ (−3, 1)`.
    pub gamma: f64,
    /// Angular weight `b(cosθ)`.
    pub angular: AngularModel,
    /// Positive prefactor absorbing the magnitude of `b`.
    pub kernel_scale: f64,
}

impl InteractionModel {
    /// Model for a potential with decay exponent `s > 2`, isotropic angular
    /// weight, and unit kernel scale.
    pub fn from_s(s: f64) -> Result<Self> {
        Ok(Self {
            s,
            gamma: gamma_from_s(s)?,
            angular: AngularModel::Isotropic,
            kernel_scale: 1.0,
        })
    }

    /// Model with the kernel exponent given directly; `s` is derived.
    pub fn from_gamma(gamma: f64) -> Result<Self> {
        Ok(Self {
            s: s_from_gamma(gamma)?,
            gamma,
            angular: AngularModel::Isotropic,
            kernel_scale: 1.0,
        })
    }

    /// Maxwell molecules: `s = 5`, `γ = 0`.
    pub fn maxwell() -> Self {
        Self::from_s(5.0).expect("s = 5 is valid")
    }

    /// Replace the kernel scale (must be positive).
    pub fn with_kernel_scale(mut self, kernel_scale: f64) -> Result<Self> {
        if !kernel_scale.is_finite() || kernel_scale <= 0.0 {
            return Err(Error::InvalidParam(format!(
                "kernel_scale must be finite and > 0, got {kernel_scale}"
            )));
        }
        self.kernel_scale = kernel_scale;
        Ok(self)
    }

    /// Replace the angular weight.
    pub fn with_angular(mut self, angular: AngularModel) -> Self {
        self.angular = angular;
        self
    }

    /// Check the model invariants (`γ` consistent with `s`, positive scale).
    pub fn validate(&self) -> Result<()> {
        let expect = gamma_from_s(self.s)?;
        if (self.gamma - expect).abs() > 1e-12 {
            return Err(Error::InvalidParam(format!(
                "gamma {} inconsistent with s {} (expected {})",
                self.gamma, self.s, expect
            )));
        }
        if !self.kernel_scale.is_finite() || self.kernel_scale <= 0.0 {
            return Err(Error::InvalidParam(format!(
                "kernel_scale must be finite and > 0, got {}",
                self.kernel_scale
            )));
        }
        Ok(())
    }
}

/// Serializable form of the model section of a config file.
///
/// Exactly one of `s` and `gamma` is required; giving both is accepted only
/// when they are consistent.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Angular weight selector; only `"isotropic"` is recognized.
    #[serde(default = "default_angular")]
    pub angular: String,
    #[serde(default = "default_kernel_scale")]
    pub kernel_scale: f64,
}

fn default_angular() -> String {
    "isotropic".to_owned()
}

fn default_kernel_scale() -> f64 {
    1.0
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            s: Some(5.0),
            gamma: None,
            angular: default_angular(),
            kernel_scale: default_kernel_scale(),
        }
    }
}

impl ModelConfig {
    /// Resolve into an [`InteractionModel`], enforcing `s`/`gamma` consistency.
    pub fn resolve(&self) -> Result<InteractionModel> {
        let model = match (self.s, self.gamma) {
            (Some(s), None) => InteractionModel::from_s(s)?,
            (None, Some(g)) => InteractionModel::from_gamma(g)?,
            (Some(s), Some(g)) => {
                let model = InteractionModel::from_s(s)?;
                if (model.gamma - g).abs() > 1e-10 {
                    return Err(Error::Config(format!(
                        "model.s = {s} implies gamma = {}, but model.gamma = {g} was given",
                        model.gamma
                    )));
                }
                model
            }
            (None, None) => {
                return Err(Error::Config(
                    "model section needs either s or gamma".to_owned(),
                ))
            }
        };
        if !self.angular.eq_ignore_ascii_case("isotropic") {
            return Err(Error::Config(format!(
                "unknown angular weight {:?}; only \"isotropic\" is available from config",
                self.angular
            )));
        }
        model.with_kernel_scale(self.kernel_scale)
    }

    /// Config echo of a resolved model.
    pub fn from_model(model: &InteractionModel) -> Self {
        Self {
            s: Some(model.s),
            gamma: Some(model.gamma),
            angular: "isotropic".to_owned(),
            kernel_scale: model.kernel_scale,
        }
    }
}

/// An incoming velocity pair together with a deflection direction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CollisionPair {
    pub xi: [f64; 3],
    pub xi_star: [f64; 3],
    /// Unit deflection direction (|σ| = 1 within 1e−12).
    pub sigma: [f64; 3],
}

impl CollisionPair {
    pub fn new(xi: [f64; 3], xi_star: [f64; 3], sigma: [f64; 3]) -> Result<Self> {
        let norm = dot(sigma, sigma).sqrt();
        if !norm.is_finite() || (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParam(format!(
                "sigma must be a unit vector, got |sigma| = {norm}"
            )));
        }
        Ok(Self { xi, xi_star, sigma })
    }
}

#[inline]
pub(crate) fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Post-collision velocities
/// `ξ' = (ξ+ξ*)/2 + |ξ−ξ*|σ/2`, `ξ'* = (ξ+ξ*)/2 − |ξ−ξ*|σ/2`.
///
/// Momentum and kinetic energy of the pair are preserved exactly up to
/// roundoff for any unit `σ`.
pub fn post_collision(pair: &CollisionPair) -> ([f64; 3], [f64; 3]) {
    let g = [
        pair.xi[0] - pair.xi_star[0],
        pair.xi[1] - pair.xi_star[1],
        pair.xi[2] - pair.xi_star[2],
    ];
    let r = dot(g, g).sqrt();
    let mut prime = [0.0; 3];
    let mut prime_star = [0.0; 3];
    for d in 0..3 {
        let center = 0.5 * (pair.xi[d] + pair.xi_star[d]);
        let kick = 0.5 * r * pair.sigma[d];
        prime[d] = center + kick;
        prime_star[d] = center - kick;
    }
    (prime, prime_star)
}

/// Shared kernel core `kernel_scale · b · max(|rel|, eps_rel)^γ`.
///
/// `eps_rel` regularizes the `|rel| → 0` singularity for soft potentials
/// (`γ < 0`); callers tie it to the grid spacing. For `γ ≥ 0` the floor is
/// irrelevant except to keep `0^γ` finite at `γ = 0` (where `|rel|` drops out
/// entirely).
#[inline]
pub(crate) fn kernel_core(kernel_scale: f64, b: f64, rel_speed: f64, gamma: f64, eps_rel: f64) -> f64 {
    let r = rel_speed.max(eps_rel);
    // r^0 = 1 even at r = 0 keeps the Maxwell case exact without a floor.
    let pow = if gamma == 0.0 { 1.0 } else { r.powf(gamma) };
    kernel_scale * b * pow
}

/// Collision kernel `B(rel, cosθ) = kernel_scale · b(cosθ) · |rel|^γ`.
///
/// For `γ < 0` the relative speed is floored at `eps_rel`; pass the
/// grid-derived floor used by the quadrature, or `0.0` when no
/// regularization is wanted.
pub fn kernel_eval(
    rel: [f64; 3],
    cos_theta: f64,
    model: &InteractionModel,
    eps_rel: f64,
) -> Result<f64> {
    if !rel.iter().all(|x| x.is_finite()) || !cos_theta.is_finite() || !eps_rel.is_finite() {
        return Err(Error::InvalidParam(format!(
            "kernel_eval requires finite inputs, got rel = {rel:?}, cos_theta = {cos_theta}"
        )));
    }
    if !(-1.0 - 1e-12..=1.0 + 1e-12).contains(&cos_theta) {
        return Err(Error::InvalidParam(format!(
            "cos_theta must lie in [-1, 1], got {cos_theta}"
        )));
    }
    let speed = dot(rel, rel).sqrt();
    Ok(kernel_core(
        model.kernel_scale,
        model.angular.eval(cos_theta),
        speed,
        model.gamma,
        eps_rel,
    ))
}
