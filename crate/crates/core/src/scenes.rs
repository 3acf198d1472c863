//! Benchmark scenes, analytic references and diagnostic metrics.

use std::f64::consts::PI;

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::constitutive::{ElasticParams, Hardening, J2Params, Material};
use crate::fbar::{ProjectionGrid, ProjectionMode};
use crate::grid::{Axis, BoundaryCondition, BoundaryConditionSet, Constraint, Face, Selector};
use crate::particles::{init_block, MaterialPoint, ParticleBlock, Shape, VelocityField};
use crate::solver::{PointLoad, Projector, SimState, TimeControls};
use crate::splines::TensorBasis3D;
use crate::tensor::hydrostatic;
use crate::{Error, Result, Vec3};

pub const SCENE_NAMES: [&str; 5] = [
    "vibrating_bar",
    "cook_membrane",
    "elastoplastic_collapse",
    "taylor_bar",
    "taylor_bar_paper",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub min: [f64; 3],
    pub max: [f64; 3],
    pub elements: [usize; 3],
    pub degree: usize,
    #[serde(default)]
    pub projection: ProjectionMode,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlasticitySpec {
    pub yield_stress: f64,
    #[serde(default)]
    pub hardening: Hardening,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialSpec {
    pub youngs_modulus: f64,
    pub poisson_ratio: f64,
    pub density: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plasticity: Option<PlasticitySpec>,
}

impl MaterialSpec {
    pub fn build(&self) -> Result<Material> {
        let elastic = ElasticParams::new(self.youngs_modulus, self.poisson_ratio, self.density)?;
        Ok(match &self.plasticity {
            None => Material::Elastic(elastic),
            Some(pl) => Material::J2(J2Params::new(elastic, pl.yield_stress, pl.hardening)?),
        })
    }
}

/// Traction on the particles whose initial position lies in `[min, max]`,
/// lumped into equal point forces totalling `traction · area`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TractionLoad {
    pub min: [f64; 3],
    pub max: [f64; 3],
    pub traction: [f64; 3],
    pub area: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Loads {
    /// Body force per unit mass.
    #[serde(default)]
    pub body_force: [f64; 3],
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tractions: Vec<TractionLoad>,
}

/// Scalar diagnostics a scene reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MetricSpec {
    /// Displacement error against the standing-wave solution of a bar.
    BarL2Error {
        length: f64,
        amplitude: f64,
        wave_speed: f64,
    },
    /// Vertical displacement of the particle starting nearest `point`.
    TipDisplacement {
        point: [f64; 3],
    },
    PressureRoughness,
    /// Largest downward displacement of any particle.
    MaxSettlement,
    /// Radius about the z axis and height, in cm.
    BarDimensions,
}

impl MetricSpec {
    pub fn names(&self) -> &'static [&'static str] {
        match self {
            MetricSpec::BarL2Error { .. } => &["l2_error"],
            MetricSpec::TipDisplacement { .. } => &["tip_displacement"],
            MetricSpec::PressureRoughness => &["pressure_roughness"],
            MetricSpec::MaxSettlement => &["max_settlement"],
            MetricSpec::BarDimensions => &["radius_cm", "height_cm"],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    pub name: String,
    pub grid: GridSpec,
    pub material: MaterialSpec,
    pub blocks: Vec<ParticleBlock>,
    #[serde(default)]
    pub boundaries: Vec<BoundaryCondition>,
    #[serde(default)]
    pub plane_strain: bool,
    #[serde(default)]
    pub loads: Loads,
    pub time: TimeControls,
    #[serde(default)]
    pub metrics: Vec<MetricSpec>,
}

impl SceneConfig {
    pub fn basis(&self) -> Result<TensorBasis3D> {
        if !(1..=3).contains(&self.grid.degree) {
            return Err(Error::config("grid.degree", "must be 1, 2 or 3"));
        }
        TensorBasis3D::new(self.grid.min, self.grid.max, self.grid.elements, self.grid.degree)
    }

    pub fn boundary_set(&self) -> BoundaryConditionSet {
        BoundaryConditionSet {
            conditions: self.boundaries.clone(),
            plane_strain: self.plane_strain,
        }
    }

    /// Checks everything that can be checked without stepping.
    pub fn validate(&self) -> Result<()> {
        self.build().map(|_| ())
    }

    pub fn particles(&self) -> Result<Vec<MaterialPoint>> {
        let basis = self.basis()?;
        let mut out = Vec::new();
        for (k, b) in self.blocks.iter().enumerate() {
            b.shape.validate(&format!("blocks[{k}].shape"))?;
            if b.material != 0 {
                return Err(Error::config(
                    format!("blocks[{k}].material"),
                    "only material 0 is defined",
                ));
            }
            out.extend(init_block(b, self.material.density, &basis)?);
        }
        Ok(out)
    }

    pub fn build(&self) -> Result<SimState> {
        self.time.validate()?;
        let basis = self.basis()?;
        let material = self.material.build()?;
        let projector = match ProjectionGrid::for_mode(&basis, self.grid.projection)? {
            Some(pg) => Projector::Lumped(pg),
            None => Projector::Off,
        };
        let particles = self.particles()?;
        let mut state = SimState::new(basis, projector, particles, &self.boundary_set(), vec![material])?;
        state.body_force = Vec3::from(self.loads.body_force);
        for (k, t) in self.loads.tractions.iter().enumerate() {
            let key = format!("loads.tractions[{k}]");
            let selected: Vec<usize> = state
                .particles
                .iter()
                .enumerate()
                .filter(|(_, p)| (0..3).all(|a| p.initial_position[a] >= t.min[a] && p.initial_position[a] <= t.max[a]))
                .map(|(i, _)| i)
                .collect();
            if selected.is_empty() {
                return Err(Error::config(key, "selects no particles"));
            }
            if !(t.area > 0.0) {
                return Err(Error::config(key, "area must be positive"));
            }
            let force_each = Vec3::from(t.traction) * (t.area / selected.len() as f64);
            state.add_point_load(&PointLoad {
                particles: selected,
                force_each,
            });
        }
        Ok(state)
    }

    /// Non-fatal diagnostics, currently the explicit stability estimate.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let (Ok(basis), Ok(mat)) = (self.basis(), self.material.build()) {
            let h = basis.cell_size().into_iter().fold(f64::INFINITY, f64::min);
            let c = mat.elastic().dilatational_wave_speed();
            if self.time.dt > h / c {
                out.push(format!(
                    "time step {:e} s exceeds the CFL estimate h/c = {:e} s",
                    self.time.dt,
                    h / c
                ));
            }
        }
        out
    }

    /// Names of the reported metrics in column order.
    pub fn metric_names(&self) -> Vec<&'static str> {
        self.metrics.iter().flat_map(|m| m.names().iter().copied()).collect()
    }
}

fn check_level(level: u32) -> Result<()> {
    if (1..=3).contains(&level) {
        Ok(())
    } else {
        Err(Error::config("level", format!("must be 1, 2 or 3, got {level}")))
    }
}

fn face(face: Face, constraint: Constraint) -> BoundaryCondition {
    BoundaryCondition {
        selector: Selector::Face { face },
        constraint,
    }
}

fn roller(f: Face, axis: Axis) -> BoundaryCondition {
    face(f, Constraint::Roller { axes: vec![axis] })
}

pub const BAR_LENGTH: f64 = 25.0;
pub const BAR_VELOCITY: f64 = 0.1;
pub const BAR_YOUNGS: f64 = 100.0;
pub const BAR_DENSITY: f64 = 1.0;

pub fn vibrating_bar_wave_speed() -> f64 {
    (BAR_YOUNGS / BAR_DENSITY).sqrt()
}

/// Bar fixed at both ends with a half-sine initial velocity.
pub fn vibrating_bar_scene(level: u32, p: usize, projection: ProjectionMode) -> Result<SceneConfig> {
    check_level(level)?;
    let elements = match level {
        1 => [12, 2, 1],
        2 => [25, 5, 1],
        _ => [50, 10, 1],
    };
    Ok(SceneConfig {
        name: "vibrating_bar".into(),
        grid: GridSpec {
            min: [0.0; 3],
            max: [BAR_LENGTH, 5.0, 1.0],
            elements,
            degree: p,
            projection,
        },
        material: MaterialSpec {
            youngs_modulus: BAR_YOUNGS,
            poisson_ratio: 0.0,
            density: BAR_DENSITY,
            plasticity: None,
        },
        blocks: vec![ParticleBlock {
            min: [0.0; 3],
            max: [BAR_LENGTH, 5.0, 1.0],
            ppc: [4, 4, 2],
            shape: Shape::Box,
            velocity: VelocityField::SineX {
                amplitude: BAR_VELOCITY,
                length: BAR_LENGTH,
            },
            material: 0,
        }],
        boundaries: vec![face(Face::XMin, Constraint::Fixed), face(Face::XMax, Constraint::Fixed)],
        plane_strain: true,
        loads: Loads::default(),
        time: TimeControls {
            dt: 2e-4 * 2f64.powi(1 - level as i32),
            t_end: 0.5,
            cadence: 500,
        },
        metrics: vec![MetricSpec::BarL2Error {
            length: BAR_LENGTH,
            amplitude: BAR_VELOCITY,
            wave_speed: vibrating_bar_wave_speed(),
        }],
    })
}

/// `u(x, t) = v0 L / (π c) · sin(π c t / L) · sin(π x / L)`
pub fn vibrating_bar_analytic(x: f64, t: f64) -> f64 {
    bar_displacement(x, t, BAR_LENGTH, BAR_VELOCITY, vibrating_bar_wave_speed())
}

fn bar_displacement(x: f64, t: f64, length: f64, v0: f64, c: f64) -> f64 {
    v0 * length / (PI * c) * (PI * c * t / length).sin() * (PI * x / length).sin()
}

/// Volume-weighted RMS of the displacement error, normalized by the total
/// volume. The reference is evaluated at the initial positions.
pub fn l2_displacement_error(particles: &[MaterialPoint], exact: impl Fn(&Vec3) -> Vec3) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for p in particles {
        num += p.volume * (p.displacement() - exact(&p.initial_position)).norm_squared();
        den += p.volume;
    }
    if den > 0.0 {
        (num / den).sqrt()
    } else {
        0.0
    }
}

pub fn vibrating_bar_error(particles: &[MaterialPoint], t: f64) -> f64 {
    l2_displacement_error(particles, |x| Vec3::new(vibrating_bar_analytic(x[0], t), 0.0, 0.0))
}

/// Corners of the tapered membrane, counter-clockwise.
pub const COOK_CORNERS: [[f64; 2]; 4] = [[0.0, 0.0], [48.0, 44.0], [48.0, 60.0], [0.0, 44.0]];
pub const COOK_TIP: [f64; 3] = [48.0, 60.0, 0.5];

pub fn cook_membrane_scene(level: u32, p: usize, projection: ProjectionMode) -> Result<SceneConfig> {
    check_level(level)?;
    let n = 1usize << (level - 1);
    let elements = [25 * n, 31 * n, 1];
    let spacing = 49.0 / elements[0] as f64 / 3.0;
    Ok(SceneConfig {
        name: "cook_membrane".into(),
        grid: GridSpec {
            min: [0.0; 3],
            max: [49.0, 61.0, 1.0],
            elements,
            degree: p,
            projection,
        },
        material: MaterialSpec {
            youngs_modulus: 1000.0,
            poisson_ratio: 0.499,
            density: 1.0,
            plasticity: None,
        },
        blocks: vec![ParticleBlock {
            min: [0.0, 0.0, 0.0],
            max: [48.0, 60.0, 1.0],
            ppc: [3, 3, 2],
            shape: Shape::ConvexPolygon {
                vertices: COOK_CORNERS.to_vec(),
            },
            velocity: VelocityField::Zero,
            material: 0,
        }],
        boundaries: vec![face(Face::XMin, Constraint::Fixed)],
        plane_strain: true,
        loads: Loads {
            body_force: [0.0; 3],
            tractions: vec![TractionLoad {
                min: [48.0 - spacing, 0.0, 0.0],
                max: [48.0, 61.0, 1.0],
                traction: [0.0, 0.25, 0.0],
                area: 16.0,
            }],
        },
        time: TimeControls {
            dt: 2e-4 * 2f64.powi(1 - level as i32),
            t_end: 3.0,
            cadence: 1000,
        },
        metrics: vec![
            MetricSpec::TipDisplacement { point: COOK_TIP },
            MetricSpec::PressureRoughness,
        ],
    })
}

fn collapse_scene(elements: [usize; 2], p: usize, projection: ProjectionMode) -> SceneConfig {
    SceneConfig {
        name: "elastoplastic_collapse".into(),
        grid: GridSpec {
            min: [0.0; 3],
            max: [15.0, 10.0, 1.0],
            elements: [elements[0], elements[1], 1],
            degree: p,
            projection,
        },
        material: MaterialSpec {
            youngs_modulus: 100e3,
            poisson_ratio: 0.3,
            density: 1.0,
            plasticity: Some(PlasticitySpec {
                yield_stress: 15e3,
                hardening: Hardening::Perfect,
            }),
        },
        blocks: vec![ParticleBlock {
            min: [0.0; 3],
            max: [8.0, 8.0, 1.0],
            ppc: [5, 5, 2],
            shape: Shape::Box,
            velocity: VelocityField::Zero,
            material: 0,
        }],
        boundaries: vec![face(Face::YMin, Constraint::Fixed), roller(Face::XMin, Axis::X)],
        plane_strain: true,
        loads: Loads {
            body_force: [0.0, -3000.0, 0.0],
            tractions: vec![],
        },
        time: TimeControls {
            dt: 5e-4,
            t_end: 0.3,
            cadence: 100,
        },
        metrics: vec![MetricSpec::MaxSettlement, MetricSpec::PressureRoughness],
    }
}

/// Half of a 16 m × 8 m plane-strain block collapsing under its own weight.
pub fn elastoplastic_collapse_scene(p: usize, projection: ProjectionMode) -> SceneConfig {
    collapse_scene([30, 20], p, projection)
}

/// The collapse on a background with half the elements per direction.
pub fn elastoplastic_collapse_quarter(p: usize, projection: ProjectionMode) -> SceneConfig {
    collapse_scene([15, 10], p, projection)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TaylorResolution {
    Paper,
    Desk,
}

pub const TAYLOR_RADIUS: f64 = 0.391e-2;
pub const TAYLOR_HEIGHT: f64 = 2.346e-2;

/// Quarter of an aluminium cylinder striking a rigid wall at z = 0.
pub fn taylor_bar_scene(resolution: TaylorResolution, p: usize, projection: ProjectionMode) -> SceneConfig {
    let (elements, dt, name) = match resolution {
        TaylorResolution::Paper => ([20, 20, 40], 1e-8, "taylor_bar_paper"),
        TaylorResolution::Desk => ([10, 10, 20], 2e-8, "taylor_bar"),
    };
    SceneConfig {
        name: name.into(),
        grid: GridSpec {
            min: [0.0; 3],
            max: [1.2e-2, 1.2e-2, 2.4e-2],
            elements,
            degree: p,
            projection,
        },
        material: MaterialSpec {
            youngs_modulus: 78.2e9,
            poisson_ratio: 0.3,
            density: 2700.0,
            plasticity: Some(PlasticitySpec {
                yield_stress: 0.29e9,
                hardening: Hardening::PowerLaw {
                    coefficient: 125.0,
                    exponent: 0.1,
                },
            }),
        },
        blocks: vec![ParticleBlock {
            min: [0.0; 3],
            max: [TAYLOR_RADIUS, TAYLOR_RADIUS, TAYLOR_HEIGHT],
            ppc: [5, 5, 5],
            shape: Shape::Cylinder {
                center: [0.0, 0.0],
                radius: TAYLOR_RADIUS,
            },
            velocity: VelocityField::Uniform {
                value: [0.0, 0.0, -373.0],
            },
            material: 0,
        }],
        boundaries: vec![
            roller(Face::XMin, Axis::X),
            roller(Face::YMin, Axis::Y),
            face(Face::ZMin, Constraint::Wall),
        ],
        plane_strain: false,
        loads: Loads::default(),
        time: TimeControls {
            dt,
            t_end: 4e-5,
            cadence: 200,
        },
        metrics: vec![MetricSpec::BarDimensions, MetricSpec::PressureRoughness],
    }
}

/// Looks a scene up by name. `level` applies to the vibrating bar and Cook's
/// membrane; the other scenes accept only level 1 or none.
pub fn scene_by_name(
    name: &str,
    level: Option<u32>,
    degree: Option<usize>,
    projection: Option<ProjectionMode>,
) -> Result<SceneConfig> {
    let p = degree.unwrap_or(2);
    let mode = projection.unwrap_or(ProjectionMode::Pminus1);
    let single = |level: Option<u32>| match level {
        None | Some(1) => Ok(()),
        Some(l) => Err(Error::config(
            "level",
            format!("scene `{name}` has a single level, got {l}"),
        )),
    };
    let cfg = match name {
        "vibrating_bar" => vibrating_bar_scene(level.unwrap_or(1), p, mode)?,
        "cook_membrane" => cook_membrane_scene(level.unwrap_or(1), p, mode)?,
        "elastoplastic_collapse" => {
            single(level)?;
            elastoplastic_collapse_scene(p, mode)
        }
        "taylor_bar" => {
            single(level)?;
            taylor_bar_scene(TaylorResolution::Desk, p, mode)
        }
        "taylor_bar_paper" => {
            single(level)?;
            taylor_bar_scene(TaylorResolution::Paper, p, mode)
        }
        _ => {
            return Err(Error::config(
                "scene",
                format!("unknown scene `{name}`; available: {}", SCENE_NAMES.join(", ")),
            ))
        }
    };
    if !(1..=3).contains(&p) {
        return Err(Error::config("degree", "must be 1, 2 or 3"));
    }
    Ok(cfg)
}

/// Vertical displacement of the particle that started nearest `point`.
pub fn tip_displacement(particles: &[MaterialPoint], point: [f64; 3]) -> f64 {
    let target = Vec3::from(point);
    let mut best = (f64::INFINITY, 0.0);
    for p in particles {
        let d = (p.initial_position - target).norm_squared();
        if d < best.0 {
            best = (d, p.displacement()[1]);
        }
    }
    best.1
}

pub fn max_settlement(particles: &[MaterialPoint]) -> f64 {
    particles
        .iter()
        .map(|p| p.initial_position[1] - p.position[1])
        .fold(0.0, f64::max)
}

/// Final radius about the z axis and height of the Taylor bar, in cm.
/// Radius is the largest in-plane distance of a particle from the axis,
/// height the largest axial coordinate.
pub fn final_bar_dimensions(particles: &[MaterialPoint]) -> (f64, f64) {
    let mut r: f64 = 0.0;
    let mut h: f64 = 0.0;
    for p in particles {
        r = r.max(p.position[0].hypot(p.position[1]));
        h = h.max(p.position[2]);
    }
    (r * 100.0, h * 100.0)
}

/// Local roughness of the particle hydrostatic stress.
///
/// For every occupied background cell an affine function is fitted by least
/// squares to the hydrostatic stress of the particles in the surrounding
/// 3×3×3 block of cells; the cell contributes the RMS residual of its own
/// particles about that fit. Returns the mean over occupied cells. Smooth
/// fields score near zero, checkerboards and cell-wise jumps do not.
pub fn pressure_roughness(particles: &[MaterialPoint], basis: &TensorBasis3D) -> f64 {
    let ne = basis.elements();
    let h = basis.cell_size();
    let lo = basis.min();
    let n_cells = ne[0] * ne[1] * ne[2];
    let cell_index = |c: [usize; 3]| c[0] + ne[0] * (c[1] + ne[1] * c[2]);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_cells];
    for (k, p) in particles.iter().enumerate() {
        let c = basis.cell_of(&p.position).unwrap_or([0; 3]);
        members[cell_index(c)].push(k);
    }
    let pressure: Vec<f64> = particles.iter().map(|p| hydrostatic(&p.stress)).collect();

    let (mut total, mut occupied) = (0.0, 0usize);
    for cz in 0..ne[2] {
        for cy in 0..ne[1] {
            for cx in 0..ne[0] {
                let own = &members[cell_index([cx, cy, cz])];
                if own.is_empty() {
                    continue;
                }
                let centre = Vec3::new(
                    lo[0] + (cx as f64 + 0.5) * h[0],
                    lo[1] + (cy as f64 + 0.5) * h[1],
                    lo[2] + (cz as f64 + 0.5) * h[2],
                );
                let local = |k: usize| {
                    let x = particles[k].position;
                    Vector4::new(
                        1.0,
                        (x[0] - centre[0]) / h[0],
                        (x[1] - centre[1]) / h[1],
                        (x[2] - centre[2]) / h[2],
                    )
                };
                let mut ata = Matrix4::zeros();
                let mut atb = Vector4::zeros();
                let (mut sum, mut count) = (0.0, 0.0);
                for nz in cz.saturating_sub(1)..(cz + 2).min(ne[2]) {
                    for ny in cy.saturating_sub(1)..(cy + 2).min(ne[1]) {
                        for nx in cx.saturating_sub(1)..(cx + 2).min(ne[0]) {
                            for &k in &members[cell_index([nx, ny, nz])] {
                                let a = local(k);
                                ata += a * a.transpose();
                                atb += a * pressure[k];
                                sum += pressure[k];
                                count += 1.0;
                            }
                        }
                    }
                }
                let coef = fit_affine(&ata, &atb).unwrap_or_else(|| Vector4::new(sum / count, 0.0, 0.0, 0.0));
                let mut sq = 0.0;
                for &k in own {
                    let r = pressure[k] - coef.dot(&local(k));
                    sq += r * r;
                }
                total += (sq / own.len() as f64).sqrt();
                occupied += 1;
            }
        }
    }
    if occupied == 0 {
        0.0
    } else {
        total / occupied as f64
    }
}

/// Solves the normal equations, dropping directions the points do not span.
fn fit_affine(ata: &Matrix4<f64>, atb: &Vector4<f64>) -> Option<Vector4<f64>> {
    let eig = ata.symmetric_eigen();
    let max = eig.eigenvalues.max();
    if !(max > 0.0) {
        return None;
    }
    let rhs = eig.eigenvectors.transpose() * atb;
    let mut y = Vector4::zeros();
    for i in 0..4 {
        let l = eig.eigenvalues[i];
        if l > 1e-10 * max {
            y[i] = rhs[i] / l;
        }
    }
    Some(eig.eigenvectors * y)
}

/// Evaluates the configured metrics on a state, in [`SceneConfig::metric_names`] order.
pub fn evaluate_metrics(config: &SceneConfig, state: &SimState) -> Vec<f64> {
    let mut out = Vec::new();
    for m in &config.metrics {
        match m {
            MetricSpec::BarL2Error {
                length,
                amplitude,
                wave_speed,
            } => {
                let t = state.time();
                out.push(l2_displacement_error(&state.particles, |x| {
                    Vec3::new(bar_displacement(x[0], t, *length, *amplitude, *wave_speed), 0.0, 0.0)
                }));
            }
            MetricSpec::TipDisplacement { point } => out.push(tip_displacement(&state.particles, *point)),
            MetricSpec::PressureRoughness => out.push(pressure_roughness(&state.particles, state.grid.basis())),
            MetricSpec::MaxSettlement => out.push(max_settlement(&state.particles)),
            MetricSpec::BarDimensions => {
                let (r, h) = final_bar_dimensions(&state.particles);
                out.push(r);
                out.push(h);
            }
        }
    }
    out
}
