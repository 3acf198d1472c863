//! F-bar projection for higher-order MPM.
//!
//! The dilatational part of the particle velocity gradient, and afterwards
//! the hydrostatic part of the updated stress, are replaced by their lumped
//! L² projection onto a second background grid one degree lower than the
//! main grid (or onto per-cell constants):
//!
//! ```text
//! π(q)_j   = Σ_mp Ñ_j(x_mp) q_mp V_mp / Σ_mp Ñ_j(x_mp) V_mp
//! π(q)_mp  = Σ_j Ñ_j(x_mp) π(q)_j
//! ∇v̄      = ∇v + ⅓ (π(∇·v) − ∇·v) I
//! σ̿       = σ̄ + (π(σ̄_h) − σ̄_h) I,   σ̄_h = tr(σ̄)/3
//! ```
//!
//! The determinant weighting of the exact rate form is dropped: the
//! projection is local, and J is taken constant over one support.

use serde::{Deserialize, Serialize};

use crate::particles::MaterialPoint;
use crate::splines::{Stencil, TensorBasis3D};
use crate::tensor::{add_to_diagonal, hydrostatic, trace};
use crate::{Error, Mat3, Result, Vec3};

/// Relative cutoff below which a projection node counts as empty.
pub const VOLUME_CUTOFF: f64 = 1e-12;

/// Which space the dilatation is projected onto.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProjectionMode {
    /// Plain MPM.
    #[default]
    Off,
    /// Per-cell constants.
    Constants,
    /// B-splines one degree below the main grid; constants for linear grids.
    Pminus1,
}

impl ProjectionMode {
    /// Degree of the projection space for a main grid of degree `p`.
    pub fn projection_degree(self, p: usize) -> Option<usize> {
        match self {
            ProjectionMode::Off => None,
            ProjectionMode::Constants => Some(0),
            ProjectionMode::Pminus1 => Some(p.saturating_sub(1)),
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "off" => Some(ProjectionMode::Off),
            "constants" => Some(ProjectionMode::Constants),
            "pminus1" => Some(ProjectionMode::Pminus1),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ProjectionMode::Off => "off",
            ProjectionMode::Constants => "constants",
            ProjectionMode::Pminus1 => "pminus1",
        }
    }
}

/// Lower-order grid sharing the element partition of the main grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionGrid {
    basis: TensorBasis3D,
}

impl ProjectionGrid {
    pub fn new(main: &TensorBasis3D, degree: usize) -> Result<Self> {
        if degree >= main.degree() && main.degree() > 0 {
            return Err(Error::config(
                "grid.projection",
                format!(
                    "projection degree {degree} must be below the grid degree {}",
                    main.degree()
                ),
            ));
        }
        Ok(Self {
            basis: main.with_degree(degree)?,
        })
    }

    pub fn for_mode(main: &TensorBasis3D, mode: ProjectionMode) -> Result<Option<Self>> {
        mode.projection_degree(main.degree())
            .map(|d| Self::new(main, d))
            .transpose()
    }

    pub fn basis(&self) -> &TensorBasis3D {
        &self.basis
    }

    pub fn degree(&self) -> usize {
        self.basis.degree()
    }

    pub fn stencils(&self, positions: impl Iterator<Item = Vec3>) -> Result<Vec<Stencil>> {
        positions.map(|x| self.basis.stencil(&x)).collect()
    }
}

/// Nodal accumulators and resulting values of one lumped projection.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionField {
    pub numerator: Vec<f64>,
    pub denominator: Vec<f64>,
    /// `numerator / denominator` where active, zero on empty nodes.
    pub values: Vec<f64>,
    sums: Vec<[f64; 2]>,
}

impl ProjectionField {
    pub fn new(n: usize) -> Self {
        Self {
            numerator: vec![0.0; n],
            denominator: vec![0.0; n],
            values: vec![0.0; n],
            sums: vec![[0.0; 2]; n],
        }
    }

    /// Zeroes the accumulators before a sequence of [`Self::add`] calls.
    pub fn clear(&mut self) {
        self.sums.fill([0.0; 2]);
    }

    /// Adds one particle's `q V` and `V`.
    #[inline]
    pub fn add(&mut self, stencil: &Stencil, q: f64, volume: f64) {
        let qv = q * volume;
        stencil.scatter_values_into(&mut self.sums, |n, w| {
            n[0] += w * qv;
            n[1] += w * volume;
        });
    }

    /// Normalises the accumulated sums; `cutoff` is an absolute volume threshold.
    pub fn finish(&mut self, cutoff: f64) {
        for (j, &[num, den]) in self.sums.iter().enumerate() {
            self.numerator[j] = num;
            self.denominator[j] = den;
            self.values[j] = if den > cutoff { num / den } else { 0.0 };
        }
    }

    /// Accumulates and normalises `q` at particles with the given stencils and
    /// volumes. `cutoff` is an absolute volume threshold.
    pub fn accumulate(&mut self, stencils: &[Stencil], q: &[f64], volumes: impl Iterator<Item = f64>, cutoff: f64) {
        self.clear();
        for ((st, &qi), v) in stencils.iter().zip(q).zip(volumes) {
            self.add(st, qi, v);
        }
        self.finish(cutoff);
    }

    pub fn is_active(&self, j: usize, cutoff: f64) -> bool {
        self.denominator[j] > cutoff
    }

    #[inline]
    pub fn reconstruct_with(&self, stencil: &Stencil) -> f64 {
        let mut s = 0.0;
        stencil.gather_values_from(&self.values, |q, w| s += w * q);
        s
    }
}

fn volume_cutoff(particles: &[MaterialPoint]) -> f64 {
    if particles.is_empty() {
        return 0.0;
    }
    VOLUME_CUTOFF * particles.iter().map(|p| p.volume).sum::<f64>() / particles.len() as f64
}

/// Lumped L² projection of a per-particle scalar onto the projection grid.
pub fn project(q: &[f64], particles: &[MaterialPoint], pg: &ProjectionGrid) -> Result<ProjectionField> {
    assert_eq!(q.len(), particles.len(), "one value per particle");
    let stencils = pg.stencils(particles.iter().map(|p| p.position))?;
    let mut field = ProjectionField::new(pg.basis.n_control_points());
    field.accumulate(
        &stencils,
        q,
        particles.iter().map(|p| p.volume),
        volume_cutoff(particles),
    );
    Ok(field)
}

/// `Σ_j Ñ_j(x) π_j`
pub fn reconstruct(pf: &ProjectionField, pg: &ProjectionGrid, x: &Vec3) -> Result<f64> {
    Ok(pf.reconstruct_with(&pg.basis.stencil(x)?))
}

/// `∇v̄ = ∇v + ⅓ (π(∇·v) − ∇·v) I`
#[inline]
pub fn modified_velocity_gradient(grad_v: &Mat3, reconstructed_divergence: f64) -> Mat3 {
    let mut out = *grad_v;
    add_to_diagonal(&mut out, (reconstructed_divergence - trace(grad_v)) / 3.0);
    out
}

/// Replaces the hydrostatic part of `stress` by `reconstructed_hydrostatic`.
#[inline]
pub fn replace_hydrostatic(stress: &Mat3, reconstructed_hydrostatic: f64) -> Mat3 {
    let mut out = *stress;
    add_to_diagonal(&mut out, reconstructed_hydrostatic - hydrostatic(stress));
    out
}

/// `σ̿ = σ̄ + (π(σ̄_h) − σ̄_h) I` for every particle, projecting with the
/// particles' current positions and volumes.
pub fn double_bar_stress(stress: &[Mat3], particles: &[MaterialPoint], pg: &ProjectionGrid) -> Result<Vec<Mat3>> {
    let h: Vec<f64> = stress.iter().map(hydrostatic).collect();
    let stencils = pg.stencils(particles.iter().map(|p| p.position))?;
    let mut field = ProjectionField::new(pg.basis.n_control_points());
    field.accumulate(
        &stencils,
        &h,
        particles.iter().map(|p| p.volume),
        volume_cutoff(particles),
    );
    Ok(stress
        .iter()
        .zip(&stencils)
        .map(|(s, st)| replace_hydrostatic(s, field.reconstruct_with(st)))
        .collect())
}

/// Element equations over incompressibility constraints.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConstraintRatio {
    pub equations: usize,
    pub constraints: usize,
}

impl ConstraintRatio {
    pub fn value(&self) -> f64 {
        self.equations as f64 / self.constraints as f64
    }
}

impl std::fmt::Display for ConstraintRatio {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{} = {:.4}", self.equations, self.constraints, self.value())
    }
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

/// Constraint counting for a degree-`p` grid in `n_sd` dimensions.
///
/// Each element asymptotically carries `p^n_sd` nodes' worth of equations
/// per direction. Without projection the constraints are the independent
/// monomials of `∇·v`, which for tensor-product degree-`p` velocities are all
/// exponent tuples in `{0..p}^n_sd` except the top one. With projection the
/// constraints are the monomials of the complete polynomials of degree
/// `p − 1`.
pub fn constraint_ratio(p: usize, n_sd: usize, projection_enabled: bool) -> ConstraintRatio {
    assert!((1..=3).contains(&p) && (1..=3).contains(&n_sd));
    let equations = n_sd * p.pow(n_sd as u32);
    let constraints = if projection_enabled {
        binomial(p - 1 + n_sd, n_sd)
    } else {
        (p + 1).pow(n_sd as u32) - 1
    };
    ConstraintRatio { equations, constraints }
}
