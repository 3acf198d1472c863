//! Explicit MUSL time integration with optional F-bar projection.
//!
//! One step, in order:
//!
//! 1. reset the grid, evaluate every particle's stencil at `x^n`;
//! 2. scatter mass, momentum, internal force `−Σ σ ∇N V` and external force;
//! 3. nodal velocity, boundary conditions, nodal acceleration, boundary
//!    conditions, grid velocity update;
//! 4. particle velocity and position from the grid (basis at `x^n`);
//! 5. rescatter the updated particle momentum, divide by `m^n`, boundary
//!    conditions;
//! 6. particle velocity gradient from the updated grid velocity;
//! 7. with projection: lumped projection of `∇·v` and the modified gradient;
//! 8. deformation gradient, volume, rate of deformation and spin, stress;
//! 9. with projection: replace the hydrostatic stress by its projection.
//!
//! The projected stress drives the next internal force and the output. The
//! constitutive law continues from the unprojected stress, recovered through
//! [`MaterialPoint::pressure_shift`].

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::constitutive::Material;
use crate::fbar::{modified_velocity_gradient, replace_hydrostatic, ProjectionField, ProjectionGrid, VOLUME_CUTOFF};
use crate::grid::{BackgroundGrid, BcTarget, BoundaryConditionSet, ResolvedBcs};
use crate::particles::{advance_particles, update_deformation_gradient, velocity_gradient, MaterialPoint};
use crate::splines::{Stencil, TensorBasis3D};
use crate::tensor::{hydrostatic, skew_part, symmetric_part, trace};
use crate::{Error, Result, Vec3};

/// Relative nodal mass cutoff (times the mean particle mass).
pub const MASS_CUTOFF: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeControls {
    pub dt: f64,
    pub t_end: f64,
    /// Observer cadence in steps.
    #[serde(default = "default_cadence")]
    pub cadence: u64,
}

fn default_cadence() -> u64 {
    100
}

impl TimeControls {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::config("time.dt", "must be positive"));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::config("time.t_end", "must be non-negative"));
        }
        if self.cadence == 0 {
            return Err(Error::config("time.cadence", "must be at least 1"));
        }
        Ok(())
    }

    /// Number of steps needed to reach `t_end`.
    pub fn total_steps(&self) -> u64 {
        if self.t_end <= 0.0 {
            0
        } else {
            (self.t_end / self.dt - 1e-9).ceil() as u64
        }
    }
}

/// How the dilatational part is projected.
#[derive(Clone, Debug)]
pub enum Projector {
    /// Plain MPM path; the F-bar stages are skipped entirely.
    Off,
    /// Runs the F-bar stages with `π` replaced by the particle's own value.
    /// Numerically identical to [`Projector::Off`]; used to check that the
    /// projection pipeline adds nothing beyond the projection itself.
    Identity,
    Lumped(ProjectionGrid),
}

/// Constant load on a set of particles, lumped as equal point forces.
#[derive(Clone, Debug, PartialEq)]
pub struct PointLoad {
    pub particles: Vec<usize>,
    pub force_each: Vec3,
}

/// Full simulation state.
#[derive(Clone, Debug)]
pub struct SimState {
    pub grid: BackgroundGrid,
    pub projector: Projector,
    pub particles: Vec<MaterialPoint>,
    pub bcs: ResolvedBcs,
    /// Body force per unit mass.
    pub body_force: Vec3,
    /// Extra external force per particle; empty when there are no tractions.
    pub point_forces: Vec<Vec3>,
    pub materials: Vec<Material>,
    pub mass_cutoff: f64,
    pub volume_cutoff: f64,
    step: u64,
    time: f64,
    /// Time-integrated stress power `∫ Σ σ:D V dt`.
    pub internal_work: f64,
    stencils: Vec<Stencil>,
    stencil_positions: Vec<Vec3>,
    proj_stencils: Vec<Stencil>,
    proj_positions: Vec<Vec3>,
    proj_field: Option<ProjectionField>,
}

impl SimState {
    pub fn new(
        basis: TensorBasis3D,
        projector: Projector,
        particles: Vec<MaterialPoint>,
        bcs: &BoundaryConditionSet,
        materials: Vec<Material>,
    ) -> Result<Self> {
        if particles.is_empty() {
            return Err(Error::config("blocks", "scene contains no particles"));
        }
        for (k, mp) in particles.iter().enumerate() {
            if mp.material as usize >= materials.len() {
                return Err(Error::config(
                    "material",
                    format!("particle {k} refers to unknown material {}", mp.material),
                ));
            }
            if !basis.contains(&mp.position) {
                return Err(Error::config(
                    "blocks",
                    format!("particle {k} lies outside the background"),
                ));
            }
        }
        let n = particles.len() as f64;
        let mass_cutoff = MASS_CUTOFF * particles.iter().map(|p| p.mass).sum::<f64>() / n;
        let volume_cutoff = VOLUME_CUTOFF * particles.iter().map(|p| p.volume).sum::<f64>() / n;
        let bcs = bcs.resolve(&basis)?;
        let proj_field = match &projector {
            Projector::Lumped(pg) => Some(ProjectionField::new(pg.basis().n_control_points())),
            _ => None,
        };
        Ok(Self {
            grid: BackgroundGrid::new(basis),
            projector,
            particles,
            bcs,
            body_force: Vec3::zeros(),
            point_forces: Vec::new(),
            materials,
            mass_cutoff,
            volume_cutoff,
            step: 0,
            time: 0.0,
            internal_work: 0.0,
            stencils: Vec::new(),
            stencil_positions: Vec::new(),
            proj_stencils: Vec::new(),
            proj_positions: Vec::new(),
            proj_field,
        })
    }

    /// Adds lumped point loads on top of any existing ones.
    pub fn add_point_load(&mut self, load: &PointLoad) {
        if self.point_forces.is_empty() {
            self.point_forces = vec![Vec3::zeros(); self.particles.len()];
        }
        for &k in &load.particles {
            self.point_forces[k] += load.force_each;
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn kinetic_energy(&self) -> f64 {
        self.particles
            .iter()
            .map(|p| 0.5 * p.mass * p.velocity.norm_squared())
            .sum()
    }

    pub fn total_momentum(&self) -> Vec3 {
        self.particles.iter().map(|p| p.velocity * p.mass).sum()
    }

    /// Largest stable step estimate `min h / c` over the materials.
    pub fn cfl_time_step(&self) -> f64 {
        let h = self.grid.basis().cell_size().into_iter().fold(f64::INFINITY, f64::min);
        let c = self
            .materials
            .iter()
            .map(|m| m.elastic().dilatational_wave_speed())
            .fold(0.0, f64::max);
        h / c
    }

    fn fault(&self, particle: Option<usize>, err: Error) -> Error {
        let message = match err {
            Error::Numeric { message, .. } => message,
            Error::OutOfDomain { point } => format!("particle left the background domain at {point:?}"),
            other => other.to_string(),
        };
        Error::Numeric {
            step: self.step + 1,
            particle,
            message,
        }
    }

    fn refresh_projection_stencils(&mut self) -> Result<()> {
        if let Projector::Lumped(pg) = &self.projector {
            if let Err((k, e)) = pg.basis().update_stencils(
                self.particles.iter().map(|p| &p.position),
                &mut self.proj_positions,
                &mut self.proj_stencils,
            ) {
                return Err(self.fault(Some(k), e));
            }
        }
        Ok(())
    }

    /// Advances the state by one MUSL step of size `controls.dt`.
    pub fn step(&mut self, controls: &TimeControls) -> Result<()> {
        let dt = controls.dt;
        let cut = self.mass_cutoff;

        self.grid.reset();
        let basis = self.grid.basis();
        if let Err((k, e)) = basis.update_stencils(
            self.particles.iter().map(|p| &p.position),
            &mut self.stencil_positions,
            &mut self.stencils,
        ) {
            return Err(self.fault(Some(k), e));
        }
        self.refresh_projection_stencils()?;

        self.grid
            .scatter_step(&self.stencils, &self.particles, &self.body_force, &self.point_forces);
        self.grid.nodal_velocity(cut);
        self.grid.apply_bcs(&self.bcs, BcTarget::Velocity);
        self.grid.nodal_acceleration(cut);
        self.grid.apply_bcs(&self.bcs, BcTarget::Acceleration);
        if let Some(i) = self
            .grid
            .acceleration
            .iter()
            .position(|a| !a.iter().all(|c| c.is_finite()))
        {
            return Err(self.fault(
                None,
                Error::Numeric {
                    step: 0,
                    particle: None,
                    message: format!("non-finite acceleration at control point {i}"),
                },
            ));
        }
        self.grid.advance_velocity(dt);

        if let Err((k, e)) = advance_particles(&mut self.grid, &self.stencils, &mut self.particles, dt) {
            return Err(self.fault(Some(k), e));
        }
        self.grid.updated_velocity(cut);
        self.grid.apply_bcs(&self.bcs, BcTarget::UpdatedVelocity);

        let proj_basis = match &self.projector {
            Projector::Lumped(pg) => Some(pg.basis()),
            _ => None,
        };
        let identity = matches!(self.projector, Projector::Identity);
        let cutoff = self.volume_cutoff;

        match (proj_basis, self.proj_field.as_mut()) {
            (Some(_), Some(field)) => {
                field.clear();
                for ((mp, st), pst) in self.particles.iter_mut().zip(&self.stencils).zip(&self.proj_stencils) {
                    let g = velocity_gradient(&self.grid, st);
                    field.add(pst, trace(&g), mp.volume);
                    mp.velocity_gradient = g;
                }
                field.finish(cutoff);
            }
            _ => {
                for (mp, st) in self.particles.iter_mut().zip(&self.stencils) {
                    mp.velocity_gradient = velocity_gradient(&self.grid, st);
                }
            }
        }

        if let Some(f) = self.proj_field.as_mut() {
            f.clear();
        }
        let mut work = 0.0;
        let mut failure = None;
        for k in 0..self.particles.len() {
            let mp = &mut self.particles[k];
            let mut l = mp.velocity_gradient;
            let mut field = self.proj_field.as_mut();
            if let Some(f) = field.as_deref_mut() {
                l = modified_velocity_gradient(&l, f.reconstruct_with(&self.proj_stencils[k]));
            } else if identity {
                l = modified_velocity_gradient(&l, trace(&l));
            }
            if let Err(e) = update_deformation_gradient(mp, &l, dt) {
                failure = Some((k, e));
                break;
            }
            let d = symmetric_part(&l);
            let w = skew_part(&l);
            let old = mp.constitutive_stress();
            match self.materials[mp.material as usize].update(&old, mp.eps_plastic, &d, &w, dt) {
                Ok((stress, eps_p)) => {
                    mp.stress = stress;
                    mp.eps_plastic = eps_p;
                }
                Err(e) => {
                    failure = Some((k, e));
                    break;
                }
            }
            work += 0.5 * (old + mp.stress).dot(&d) * mp.volume * dt;
            if let (Some(pb), Some(f)) = (proj_basis, field) {
                let pst = &mut self.proj_stencils[k];
                if mp.position != self.proj_positions[k] {
                    if let Err(e) = pb.stencil_into(&mp.position, pst) {
                        failure = Some((k, e));
                        break;
                    }
                    self.proj_positions[k] = mp.position;
                }
                f.add(pst, hydrostatic(&mp.stress), mp.volume);
                mp.pressure_shift = 0.0;
            }
        }
        if let Some((k, e)) = failure {
            return Err(self.fault(Some(k), e));
        }
        self.internal_work += work;

        if let Some(f) = self.proj_field.as_mut() {
            f.finish(cutoff);
        }
        let field = self.proj_field.as_ref();
        for (k, mp) in self.particles.iter_mut().enumerate() {
            if let Some(f) = field {
                let h = hydrostatic(&mp.stress);
                mp.pressure_shift = f.reconstruct_with(&self.proj_stencils[k]) - h;
                mp.stress = replace_hydrostatic(&mp.stress, h + mp.pressure_shift);
            } else if identity {
                mp.stress = replace_hydrostatic(&mp.stress, hydrostatic(&mp.stress));
            }
            if !(mp.stress.iter().all(|c| c.is_finite()) && mp.velocity.iter().all(|c| c.is_finite())) {
                failure = Some((
                    k,
                    Error::Numeric {
                        step: 0,
                        particle: None,
                        message: "non-finite particle state".into(),
                    },
                ));
                break;
            }
        }
        if let Some((k, e)) = failure {
            return Err(self.fault(Some(k), e));
        }

        self.step += 1;
        self.time = self.step as f64 * dt;
        Ok(())
    }
}

/// Receives read-only snapshots during [`run`].
pub trait Observer {
    fn observe(&mut self, state: &SimState) -> Result<()>;
}

impl<F: FnMut(&SimState) -> Result<()>> Observer for F {
    fn observe(&mut self, state: &SimState) -> Result<()> {
        self(state)
    }
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub steps: u64,
    pub final_time: f64,
    pub wall_time: Duration,
    pub kinetic_energy: f64,
    pub internal_work: f64,
    pub observations: u64,
}

/// Steps until `t_end`, calling every observer after each step whose index is
/// a multiple of the cadence.
pub fn run(state: &mut SimState, controls: &TimeControls, observers: &mut [&mut dyn Observer]) -> Result<RunSummary> {
    controls.validate()?;
    let start = Instant::now();
    let target = controls.total_steps();
    let first = state.step_count();
    let mut observations = 0;
    while state.step_count() < target {
        state.step(controls)?;
        if state.step_count() % controls.cadence == 0 {
            for obs in observers.iter_mut() {
                obs.observe(state)?;
            }
            observations += 1;
        }
    }
    Ok(RunSummary {
        steps: state.step_count() - first,
        final_time: state.time(),
        wall_time: start.elapsed(),
        kinetic_energy: state.kinetic_energy(),
        internal_work: state.internal_work,
        observations,
    })
}
