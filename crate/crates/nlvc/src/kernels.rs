//! Antisymmetric two-point kernel families α(x, y) with horizon support,
//! plus the bond-based micromodulus correspondence and the kernel-weighted
//! energy seminorm.

use crate::error::{NlvcError, Result};
use crate::fields::VectorField;
use crate::geometry::{in_closed_ball, GridMode, NodeSet, PairStructure};
use crate::linalg::{Mat3, Point3};

/// Kernel family selector.
///
/// * `PeridynamicUnit`: α = (y−x)/|y−x| on the horizon ball.
/// * `PlanarScaled`: α = δ^(−3/2) (y−x)/|y−x|, third component exactly 0;
///   intended for plane-embedded grids.
/// * `FractionalPrototype`: α = (y−x)/|y−x|^(1+β), 0 < β < spatial dim.
/// * `ConstantGamma`: the unit-direction kernel again, kept as its own
///   family because γ = α·α ≡ 1 on the ball is used as a standing
///   assumption by the local-limit studies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelFamily {
    PeridynamicUnit,
    PlanarScaled,
    FractionalPrototype,
    ConstantGamma,
}

impl KernelFamily {
    pub fn as_str(self) -> &'static str {
        match self {
            KernelFamily::PeridynamicUnit => "peridynamic_unit",
            KernelFamily::PlanarScaled => "planar_scaled",
            KernelFamily::FractionalPrototype => "fractional_prototype",
            KernelFamily::ConstantGamma => "constant_gamma",
        }
    }

    pub fn parse(s: &str) -> Result<KernelFamily> {
        match s {
            "peridynamic_unit" => Ok(KernelFamily::PeridynamicUnit),
            "planar_scaled" => Ok(KernelFamily::PlanarScaled),
            "fractional_prototype" => Ok(KernelFamily::FractionalPrototype),
            "constant_gamma" => Ok(KernelFamily::ConstantGamma),
            other => Err(NlvcError::InvalidInput(format!(
                "kernel.family: unknown family {other:?} (expected peridynamic_unit, \
                 planar_scaled, fractional_prototype, or constant_gamma)"
            ))),
        }
    }
}

/// An antisymmetric kernel with compact horizon support.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub delta: f64,
    /// Fractional exponent; `FractionalPrototype` only.
    pub beta: Option<f64>,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, delta: f64) -> KernelSpec {
        KernelSpec { family, delta, beta: None }
    }

    pub fn fractional(delta: f64, beta: f64) -> KernelSpec {
        KernelSpec { family: KernelFamily::FractionalPrototype, delta, beta: Some(beta) }
    }

    /// Check this kernel description against the grid mode it will run on.
    pub fn validate(&self, mode: GridMode) -> Result<()> {
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return Err(NlvcError::InvalidInput(format!(
                "kernel.delta: horizon must be positive, got {}",
                self.delta
            )));
        }
        let dim = match mode {
            GridMode::Full3D => 3.0,
            GridMode::PlaneEmbedded => 2.0,
        };
        match self.family {
            KernelFamily::FractionalPrototype => {
                let beta = self.beta.ok_or_else(|| {
                    NlvcError::InvalidInput(
                        "kernel.beta: required for family fractional_prototype".into(),
                    )
                })?;
                if !(beta > 0.0 && beta < dim) {
                    return Err(NlvcError::InvalidInput(format!(
                        "kernel.beta: exponent {beta} outside (0, {dim}); exponents at or above \
                         the spatial dimension make the node-level |α|² sums diverge under \
                         refinement and are not supported"
                    )));
                }
            }
            _ => {
                if self.beta.is_some() {
                    return Err(NlvcError::InvalidInput(format!(
                        "kernel.beta: only meaningful for fractional_prototype, not {}",
                        self.family.as_str()
                    )));
                }
            }
        }
        Ok(())
    }

    /// α evaluated for a separation d = y − x already known to be nonzero.
    /// Returns the zero vector outside the closed horizon ball.
    #[inline]
    pub fn alpha_of_separation(&self, d: Point3) -> Point3 {
        let r2 = d.norm_sq();
        if r2 > self.delta * self.delta * (1.0 + crate::geometry::BALL_EPS) {
            return Point3::ZERO;
        }
        let r = r2.sqrt();
        match self.family {
            KernelFamily::PeridynamicUnit | KernelFamily::ConstantGamma => d * (1.0 / r),
            KernelFamily::PlanarScaled => {
                let s = self.delta.powf(-1.5) / r;
                Point3::new(d.x1 * s, d.x2 * s, 0.0)
            }
            KernelFamily::FractionalPrototype => {
                let beta = self.beta.expect("validated spec");
                d * r.powf(-(1.0 + beta))
            }
        }
    }

    /// γ = α·α for a nonzero separation, zero outside the ball.
    #[inline]
    pub fn gamma_of_separation(&self, d: Point3) -> f64 {
        let a = self.alpha_of_separation(d);
        a.dot(a)
    }

    /// Seminorm weight ρ(r): the family's radial coefficient, constant 1 for
    /// the unit-direction families, δ^(−3) for the planar scaling, and
    /// r^(−β) for the fractional prototype.
    #[inline]
    pub fn rho(&self, r: f64) -> f64 {
        match self.family {
            KernelFamily::PeridynamicUnit | KernelFamily::ConstantGamma => 1.0,
            KernelFamily::PlanarScaled => self.delta.powi(-3),
            KernelFamily::FractionalPrototype => r.powf(-self.beta.expect("validated spec")),
        }
    }
}

/// Kernel value α(x, y). Coincident points are rejected (the direction is
/// singular); node pair structures never contain self-pairs.
pub fn eval_kernel(spec: &KernelSpec, x: Point3, y: Point3) -> Result<Point3> {
    let d = y - x;
    if d.norm_sq() == 0.0 {
        return Err(NlvcError::InvalidInput(format!(
            "kernel evaluated at coincident points ({}, {}, {})",
            x.x1, x.x2, x.x3
        )));
    }
    Ok(spec.alpha_of_separation(d))
}

/// Radial micromodulus coefficients for the fractional prototype kernel:
/// ρ(r) = F₀(r) = r^(−β), plus the rank-4-collapsed bond tensor
/// ℂ(ξ) = 2ρ(|ξ|)|ξ|^(−2) ξ⊗ξ + 2F₀(|ξ|) 𝕀.
#[derive(Clone, Copy, Debug)]
pub struct MicromodulusCoefficients {
    pub beta: f64,
}

impl MicromodulusCoefficients {
    pub fn rho(&self, r: f64) -> f64 {
        r.powf(-self.beta)
    }

    pub fn f0(&self, r: f64) -> f64 {
        r.powf(-self.beta)
    }

    pub fn tensor(&self, xi: Point3) -> Mat3 {
        let r2 = xi.norm_sq();
        let r = r2.sqrt();
        xi.outer(xi) * (2.0 * self.rho(r) / r2) + Mat3::IDENTITY * (2.0 * self.f0(r))
    }
}

pub fn micromodulus_coefficients(spec: &KernelSpec) -> Result<MicromodulusCoefficients> {
    match (spec.family, spec.beta) {
        (KernelFamily::FractionalPrototype, Some(beta)) => Ok(MicromodulusCoefficients { beta }),
        _ => Err(NlvcError::InvalidInput(format!(
            "micromodulus coefficients are defined for fractional_prototype only, got {}",
            spec.family.as_str()
        ))),
    }
}

/// Frobenius residual of the tensor identity linking the kernel outer
/// product to the radial micromodulus pair at separation ξ:
/// α⊗α − (α·α)𝕀 = ρ₂(|ξ|) (ξ̂⊗ξ̂ − 𝕀) with ρ₂(r) = r^(−2β).
/// Zero (to roundoff) for every in-support ξ.
pub fn micromodulus_relation_residual(spec: &KernelSpec, xi: Point3) -> Result<f64> {
    let coeff = micromodulus_coefficients(spec)?;
    let alpha = eval_kernel(spec, Point3::ZERO, xi)?;
    let gamma = alpha.dot(alpha);
    let lhs = alpha.outer(alpha) - Mat3::IDENTITY * gamma;
    let r2 = xi.norm_sq();
    let rho2 = coeff.rho(r2.sqrt()).powi(2);
    let rhs = xi.outer(xi) * (rho2 / r2) - Mat3::IDENTITY * rho2;
    Ok((lhs - rhs).frobenius_norm())
}

/// Kernel-weighted quadratic form Σ_{i≠j} ρ(|x_j−x_i|) |d̂·(w_j−w_i)|² V_i V_j
/// over the directed pairs of the structure (d̂ the unit separation).
/// Zero exactly when w is bondwise parallel-invariant, e.g. constant.
pub fn energy_seminorm(
    w: &VectorField,
    spec: &KernelSpec,
    nodes: &NodeSet,
    pairs: &PairStructure,
) -> Result<f64> {
    if w.len() != nodes.len() {
        return Err(NlvcError::InvalidInput(format!(
            "vector field has {} entries for {} nodes",
            w.len(),
            nodes.len()
        )));
    }
    let mut acc = 0.0;
    for (_, i, j) in pairs.iter_pairs() {
        let d = nodes.positions[j] - nodes.positions[i];
        if !in_closed_ball(nodes.positions[i], nodes.positions[j], spec.delta) {
            continue;
        }
        let r = d.norm();
        let proj = d.dot(w.get(j) - w.get(i)) / r;
        acc += spec.rho(r) * proj * proj * nodes.volumes[i] * nodes.volumes[j];
    }
    Ok(acc)
}
