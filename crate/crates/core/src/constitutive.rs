//! Hypoelastic stress update in Jaumann rate form and J2 radial return.

use serde::{Deserialize, Serialize};

use crate::tensor::{add_to_diagonal, deviator, symmetric_part, trace};
use crate::{Error, Mat3, Result};

const SQRT_2_3: f64 = 0.816_496_580_927_726;

/// Newton iteration cap for the return mapping.
pub const RETURN_MAX_ITERATIONS: usize = 50;
/// Residual tolerance relative to the initial yield stress.
pub const RETURN_TOLERANCE: f64 = 1e-10;

/// Isotropic linear elasticity in terms of Young's modulus and Poisson's ratio.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ElasticParams {
    pub youngs_modulus: f64,
    pub poisson_ratio: f64,
    pub density: f64,
    mu: f64,
    lambda: f64,
}

impl ElasticParams {
    pub fn new(youngs_modulus: f64, poisson_ratio: f64, density: f64) -> Result<Self> {
        if !(youngs_modulus > 0.0 && youngs_modulus.is_finite()) {
            return Err(Error::config("material.youngs_modulus", "must be positive"));
        }
        if !(poisson_ratio > -1.0 && poisson_ratio < 0.5) {
            return Err(Error::config("material.poisson_ratio", "must lie in (-1, 0.5)"));
        }
        if !(density > 0.0 && density.is_finite()) {
            return Err(Error::config("material.density", "must be positive"));
        }
        let mu = youngs_modulus / (2.0 * (1.0 + poisson_ratio));
        let lambda = 2.0 * mu * poisson_ratio / (1.0 - 2.0 * poisson_ratio);
        Ok(Self {
            youngs_modulus,
            poisson_ratio,
            density,
            mu,
            lambda,
        })
    }

    /// Shear modulus μ.
    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// First Lamé parameter λ.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// P-wave speed `√((λ + 2μ)/ρ)`.
    pub fn dilatational_wave_speed(&self) -> f64 {
        ((self.lambda + 2.0 * self.mu) / self.density).sqrt()
    }
}

/// Isotropic hardening law for the flow stress `K(ē_p)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Hardening {
    #[default]
    Perfect,
    /// `K = σ_Y (1 + A ē_p)^m`
    PowerLaw { coefficient: f64, exponent: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct J2Params {
    pub elastic: ElasticParams,
    pub yield_stress: f64,
    pub hardening: Hardening,
}

impl J2Params {
    pub fn new(elastic: ElasticParams, yield_stress: f64, hardening: Hardening) -> Result<Self> {
        if !(yield_stress > 0.0 && yield_stress.is_finite()) {
            return Err(Error::config("material.yield_stress", "must be positive"));
        }
        if let Hardening::PowerLaw { coefficient, exponent } = hardening {
            if coefficient < 0.0 || exponent < 0.0 {
                return Err(Error::config(
                    "material.hardening",
                    "power-law coefficient and exponent must be non-negative",
                ));
            }
        }
        Ok(Self {
            elastic,
            yield_stress,
            hardening,
        })
    }

    pub fn flow_stress(&self, eps_p: f64) -> f64 {
        match self.hardening {
            Hardening::Perfect => self.yield_stress,
            Hardening::PowerLaw { coefficient, exponent } => {
                self.yield_stress * (1.0 + coefficient * eps_p).powf(exponent)
            }
        }
    }

    pub fn flow_stress_slope(&self, eps_p: f64) -> f64 {
        match self.hardening {
            Hardening::Perfect => 0.0,
            Hardening::PowerLaw { coefficient, exponent } => {
                self.yield_stress * exponent * coefficient * (1.0 + coefficient * eps_p).powf(exponent - 1.0)
            }
        }
    }

    /// `f = ‖σ^dev‖ − √(2/3) K(ē_p)` with the Frobenius norm.
    pub fn yield_function(&self, stress: &Mat3, eps_p: f64) -> f64 {
        deviator(stress).norm() - SQRT_2_3 * self.flow_stress(eps_p)
    }

    /// Consistency residual `g(Δγ)` of the radial return.
    pub fn consistency_residual(&self, trial_dev_norm: f64, eps_p: f64, delta_gamma: f64) -> f64 {
        trial_dev_norm
            - 2.0 * self.elastic.mu() * delta_gamma
            - SQRT_2_3 * self.flow_stress(eps_p + SQRT_2_3 * delta_gamma)
    }
}

/// Material law attached to particles.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Material {
    Elastic(ElasticParams),
    J2(J2Params),
}

impl Material {
    pub fn elastic(&self) -> &ElasticParams {
        match self {
            Material::Elastic(e) => e,
            Material::J2(j) => &j.elastic,
        }
    }

    /// Full rate update followed by the plastic correction, returning the new
    /// stress and equivalent plastic strain.
    pub fn update(&self, stress: &Mat3, eps_p: f64, d: &Mat3, w: &Mat3, dt: f64) -> Result<(Mat3, f64)> {
        let trial = elastic_rate_update(stress, d, w, dt, self.elastic());
        match self {
            Material::Elastic(_) => Ok((trial, eps_p)),
            Material::J2(j2) => {
                let r = j2_radial_return(&trial, eps_p, j2)?;
                Ok((r.stress, r.eps_plastic))
            }
        }
    }
}

/// `σ^{n+1} = σ^n + Δt (λ tr(D) I + 2μ D + ω σ^n + σ^n ωᵀ)`, symmetrised.
pub fn elastic_rate_update(stress: &Mat3, d: &Mat3, w: &Mat3, dt: f64, p: &ElasticParams) -> Mat3 {
    let mut rate = d * (2.0 * p.mu()) + w * stress + stress * w.transpose();
    add_to_diagonal(&mut rate, p.lambda() * trace(d));
    symmetric_part(&(stress + rate * dt))
}

/// Outcome of [`j2_radial_return`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReturnMapping {
    pub stress: Mat3,
    pub eps_plastic: f64,
    /// Plastic multiplier; zero for an elastic step.
    pub delta_gamma: f64,
}

/// Radial return of the trial deviator onto the yield surface. The
/// hydrostatic part is left untouched.
pub fn j2_radial_return(trial: &Mat3, eps_p: f64, p: &J2Params) -> Result<ReturnMapping> {
    let s = deviator(trial);
    let norm = s.norm();
    let f = norm - SQRT_2_3 * p.flow_stress(eps_p);
    if f <= 0.0 {
        return Ok(ReturnMapping {
            stress: *trial,
            eps_plastic: eps_p,
            delta_gamma: 0.0,
        });
    }
    let mu = p.elastic.mu();
    let tol = RETURN_TOLERANCE * p.yield_stress;
    let mut dg = 0.0;
    let mut converged = false;
    let mut g = f;
    for _ in 0..RETURN_MAX_ITERATIONS {
        g = p.consistency_residual(norm, eps_p, dg);
        if g.abs() <= tol {
            converged = true;
            break;
        }
        let slope = -2.0 * mu - (2.0 / 3.0) * p.flow_stress_slope(eps_p + SQRT_2_3 * dg);
        dg -= g / slope;
    }
    if !converged {
        return Err(Error::ReturnMapping {
            iterations: RETURN_MAX_ITERATIONS,
            residual: g,
        });
    }
    let scale = 1.0 - 2.0 * mu * dg / norm;
    let stress = trial - s * (1.0 - scale);
    Ok(ReturnMapping {
        stress: symmetric_part(&stress),
        eps_plastic: eps_p + SQRT_2_3 * dg,
        delta_gamma: dg,
    })
}
