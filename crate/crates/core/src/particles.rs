//! Material points: storage, lattice initialisation and kinematic updates.

use serde::{Deserialize, Serialize};

use crate::grid::BackgroundGrid;
use crate::splines::{Stencil, TensorBasis3D};
use crate::{Error, Mat3, Result, Vec3};

/// Lagrangian carrier of mass, volume and history.
#[derive(Clone, Debug, PartialEq)]
pub struct MaterialPoint {
    pub mass: f64,
    pub initial_volume: f64,
    pub volume: f64,
    pub position: Vec3,
    /// Position at creation, used for displacement metrics.
    pub initial_position: Vec3,
    pub velocity: Vec3,
    pub deformation_gradient: Mat3,
    /// Cauchy stress entering the internal force; with projection this is
    /// the double-bar stress.
    pub stress: Mat3,
    /// `π(σ̄_h) − σ̄_h` from the last stress projection, zero without one.
    pub pressure_shift: f64,
    pub eps_plastic: f64,
    /// Velocity gradient from the last step (F-bar modified when projecting).
    pub velocity_gradient: Mat3,
    pub material: u32,
}

impl MaterialPoint {
    pub fn new(position: Vec3, mass: f64, volume: f64, material: u32) -> Self {
        Self {
            mass,
            initial_volume: volume,
            volume,
            position,
            initial_position: position,
            velocity: Vec3::zeros(),
            deformation_gradient: Mat3::identity(),
            stress: Mat3::zeros(),
            pressure_shift: 0.0,
            eps_plastic: 0.0,
            velocity_gradient: Mat3::zeros(),
            material,
        }
    }

    /// Stress carried by the constitutive law, `σ − shift I`.
    pub fn constitutive_stress(&self) -> Mat3 {
        let mut s = self.stress;
        if self.pressure_shift != 0.0 {
            for i in 0..3 {
                s[(i, i)] -= self.pressure_shift;
            }
        }
        s
    }

    pub fn displacement(&self) -> Vec3 {
        self.position - self.initial_position
    }
}

/// Geometry mask applied to lattice points of a block.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    /// The whole block box.
    #[default]
    Box,
    /// Convex polygon in the xy-plane (counter-clockwise), extruded over the
    /// block's z-range.
    ConvexPolygon { vertices: Vec<[f64; 2]> },
    /// Cylinder with axis parallel to z through `center`.
    Cylinder { center: [f64; 2], radius: f64 },
}

impl Shape {
    /// Inclusive membership test with an absolute slack `tol`.
    pub fn contains(&self, x: &Vec3, tol: f64) -> bool {
        match self {
            Shape::Box => true,
            Shape::ConvexPolygon { vertices } => {
                let n = vertices.len();
                (0..n).all(|k| {
                    let a = vertices[k];
                    let b = vertices[(k + 1) % n];
                    let (ex, ey) = (b[0] - a[0], b[1] - a[1]);
                    let len = ex.hypot(ey);
                    ex * (x[1] - a[1]) - ey * (x[0] - a[0]) >= -tol * len
                })
            }
            Shape::Cylinder { center, radius } => {
                let (dx, dy) = (x[0] - center[0], x[1] - center[1]);
                dx * dx + dy * dy <= (radius + tol) * (radius + tol)
            }
        }
    }

    pub fn validate(&self, key: &str) -> Result<()> {
        match self {
            Shape::Box => Ok(()),
            Shape::ConvexPolygon { vertices } => {
                if vertices.len() < 3 {
                    return Err(Error::config(key, "polygon needs at least three vertices"));
                }
                let n = vertices.len();
                for k in 0..n {
                    let [a, b, c] = [vertices[k], vertices[(k + 1) % n], vertices[(k + 2) % n]];
                    let turn = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]);
                    if turn <= 0.0 {
                        return Err(Error::config(key, "polygon must be convex and counter-clockwise"));
                    }
                }
                Ok(())
            }
            Shape::Cylinder { radius, .. } => {
                if *radius > 0.0 {
                    Ok(())
                } else {
                    Err(Error::config(key, "cylinder radius must be positive"))
                }
            }
        }
    }
}

/// Initial velocity assigned to the particles of a block.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum VelocityField {
    #[default]
    Zero,
    Uniform {
        value: [f64; 3],
    },
    /// `v_x = amplitude · sin(π x / length)`
    SineX {
        amplitude: f64,
        length: f64,
    },
}

impl VelocityField {
    pub fn at(&self, x: &Vec3) -> Vec3 {
        match self {
            VelocityField::Zero => Vec3::zeros(),
            VelocityField::Uniform { value } => Vec3::from(*value),
            VelocityField::SineX { amplitude, length } => {
                Vec3::new(amplitude * (std::f64::consts::PI * x[0] / length).sin(), 0.0, 0.0)
            }
        }
    }
}

/// Axis-aligned box filled with a regular particle lattice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticleBlock {
    pub min: [f64; 3],
    pub max: [f64; 3],
    /// Particles per background cell along each axis.
    pub ppc: [usize; 3],
    #[serde(default)]
    pub shape: Shape,
    #[serde(default)]
    pub velocity: VelocityField,
    #[serde(default)]
    pub material: u32,
}

/// Places particles at the centroids of a `ppc` sub-lattice of the background
/// cells, keeping those inside the block box and its shape mask.
pub fn init_block(block: &ParticleBlock, density: f64, basis: &TensorBasis3D) -> Result<Vec<MaterialPoint>> {
    let (lo, hi) = (basis.min(), basis.max());
    for k in 0..3 {
        if !(block.min[k] >= lo[k] && block.max[k] <= hi[k] && block.min[k] < block.max[k]) {
            return Err(Error::config(
                "blocks",
                format!(
                    "block [{:?}, {:?}] is empty or exceeds the background domain",
                    block.min, block.max
                ),
            ));
        }
        if block.ppc[k] == 0 {
            return Err(Error::config("blocks.ppc", "particles per cell must be positive"));
        }
    }
    block.shape.validate("blocks.shape")?;
    let h = basis.cell_size();
    let elements = basis.elements();
    let spacing = [0, 1, 2].map(|k| h[k] / block.ppc[k] as f64);
    let counts = [0, 1, 2].map(|k| elements[k] * block.ppc[k]);
    let volume = h[0] * h[1] * h[2] / (block.ppc.iter().product::<usize>() as f64);
    let tol = 1e-9 * spacing.iter().cloned().fold(f64::INFINITY, f64::min);

    let coord = |k: usize, i: usize| lo[k] + (i as f64 + 0.5) * spacing[k];
    let range = |k: usize| {
        (0..counts[k]).filter(move |&i| {
            let x = coord(k, i);
            x >= block.min[k] - tol && x <= block.max[k] + tol
        })
    };

    let mut out = Vec::new();
    for kz in range(2) {
        for ky in range(1) {
            for kx in range(0) {
                let x = Vec3::new(coord(0, kx), coord(1, ky), coord(2, kz));
                if !block.shape.contains(&x, tol) {
                    continue;
                }
                let mut mp = MaterialPoint::new(x, density * volume, volume, block.material);
                mp.velocity = block.velocity.at(&x);
                out.push(mp);
            }
        }
    }
    Ok(out)
}

/// `v ← v + Δt Σ N_i a_i`, `x ← x + Δt Σ N_i v_i^{n+1}`, both with the basis
/// at the old position.
pub fn update_particle_kinematics(
    mp: &mut MaterialPoint,
    grid: &BackgroundGrid,
    stencil: &Stencil,
    dt: f64,
) -> Result<()> {
    let mut a = Vec3::zeros();
    let mut v = Vec3::zeros();
    stencil.gather_values_from(&grid.acceleration, |ai, w| a += ai * w);
    stencil.gather_values_from(&grid.velocity, |vi, w| v += vi * w);
    mp.velocity += a * dt;
    mp.position += v * dt;
    check_inside(mp, grid.basis())
}

#[inline]
fn check_inside(mp: &MaterialPoint, basis: &TensorBasis3D) -> Result<()> {
    if !basis.contains(&mp.position) {
        let p = mp.position;
        return Err(Error::OutOfDomain {
            point: [p[0], p[1], p[2]],
        });
    }
    Ok(())
}

/// Kinematic update of every particle followed by the rescatter of the
/// updated momentum `(m v̄)_i = Σ N_i(x^n) m_mp v_mp^{n+1}`, fused in one
/// sweep. On failure returns the index of the offending particle.
pub fn advance_particles(
    grid: &mut BackgroundGrid,
    stencils: &[Stencil],
    particles: &mut [MaterialPoint],
    dt: f64,
) -> std::result::Result<(), (usize, Error)> {
    let kin = grid.kinematics_packed();
    if let Some(st) = stencils.first() {
        crate::with_support!(st.support(), N => advance_kernel::<N>(&kin, &mut grid.momentum_updated, stencils, particles, dt));
    }
    grid.recycle_kinematics(kin);
    for (k, mp) in particles.iter().enumerate() {
        check_inside(mp, grid.basis()).map_err(|e| (k, e))?;
    }
    Ok(())
}

fn advance_kernel<const N: usize>(
    kin: &[[f64; 6]],
    momentum_updated: &mut [Vec3],
    stencils: &[Stencil],
    particles: &mut [MaterialPoint],
    dt: f64,
) {
    for (mp, st) in particles.iter_mut().zip(stencils) {
        let wx = &st.axes[0].values;
        let mut av = [0.0; 6];
        st.for_each_row::<N>(|start, wyz, _, _| {
            let row = &kin[start..start + N];
            let mut r = [0.0; 6];
            for a in 0..N {
                for d in 0..6 {
                    r[d] += row[a][d] * wx[a];
                }
            }
            for d in 0..6 {
                av[d] += r[d] * wyz;
            }
        });
        mp.velocity += Vec3::new(av[0], av[1], av[2]) * dt;
        mp.position += Vec3::new(av[3], av[4], av[5]) * dt;
        let p = mp.velocity * mp.mass;
        st.for_each_row::<N>(|start, wyz, _, _| {
            let pw = p * wyz;
            let row = &mut momentum_updated[start..start + N];
            for a in 0..N {
                row[a] += pw * wx[a];
            }
        });
    }
}

/// `∇v = Σ v̄_i ⊗ ∇N_i(x^n)`
#[inline]
pub fn velocity_gradient(grid: &BackgroundGrid, stencil: &Stencil) -> Mat3 {
    crate::with_support!(stencil.support(), N => velocity_gradient_n::<N>(&grid.velocity_updated, stencil))
}

#[inline(always)]
fn velocity_gradient_n<const N: usize>(vel: &[Vec3], st: &Stencil) -> Mat3 {
    let (wx, dx) = (&st.axes[0].values, &st.axes[0].derivs);
    // Per row: Σ_a v_a ⊗ (dx_a wyz, wx_a dyz, wx_a wdz)
    let mut l = [[0.0; 3]; 3];
    st.for_each_row::<N>(|start, wyz, dyz, wdz| {
        let row = &vel[start..start + N];
        let mut sd = [0.0; 3];
        let mut sw = [0.0; 3];
        for a in 0..N {
            for r in 0..3 {
                sd[r] += row[a][r] * dx[a];
                sw[r] += row[a][r] * wx[a];
            }
        }
        for r in 0..3 {
            l[r][0] += sd[r] * wyz;
            l[r][1] += sw[r] * dyz;
            l[r][2] += sw[r] * wdz;
        }
    });
    Mat3::new(
        l[0][0], l[0][1], l[0][2], l[1][0], l[1][1], l[1][2], l[2][0], l[2][1], l[2][2],
    )
}

/// `F ← (I + Δt ∇v̄) F`, `V ← det(F) V0`.
pub fn update_deformation_gradient(mp: &mut MaterialPoint, grad_v: &Mat3, dt: f64) -> Result<()> {
    let f = (Mat3::identity() + grad_v * dt) * mp.deformation_gradient;
    let j = f.determinant();
    if !(j > 0.0 && j.is_finite()) {
        return Err(Error::Numeric {
            step: 0,
            particle: None,
            message: format!("deformation gradient inverted or non-finite (det F = {j:e})"),
        });
    }
    mp.deformation_gradient = f;
    mp.volume = j * mp.initial_volume;
    mp.velocity_gradient = *grad_v;
    Ok(())
}
