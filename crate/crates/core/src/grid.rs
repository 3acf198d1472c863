//! Background control-point lattice and its nodal state.

use serde::{Deserialize, Serialize};

use crate::particles::MaterialPoint;
use crate::splines::{Stencil, TensorBasis3D};
use crate::{Error, Result, Vec3};

type StdResult<T, E> = std::result::Result<T, E>;

/// Nodal arrays on the control points of a [`TensorBasis3D`], stored
/// x-fastest with a single flat index.
#[derive(Clone, Debug)]
pub struct BackgroundGrid {
    basis: TensorBasis3D,
    pub mass: Vec<f64>,
    pub momentum: Vec<Vec3>,
    pub velocity: Vec<Vec3>,
    pub force_internal: Vec<Vec3>,
    pub force_external: Vec<Vec3>,
    pub acceleration: Vec<Vec3>,
    pub momentum_updated: Vec<Vec3>,
    pub velocity_updated: Vec<Vec3>,
    packed: Vec<[f64; 8]>,
    packed_kin: Vec<[f64; 6]>,
}

impl BackgroundGrid {
    pub fn new(basis: TensorBasis3D) -> Self {
        let n = basis.n_control_points();
        let zeros = vec![Vec3::zeros(); n];
        Self {
            basis,
            mass: vec![0.0; n],
            momentum: zeros.clone(),
            velocity: zeros.clone(),
            force_internal: zeros.clone(),
            force_external: zeros.clone(),
            acceleration: zeros.clone(),
            momentum_updated: zeros.clone(),
            velocity_updated: zeros,
            packed: Vec::new(),
            packed_kin: Vec::new(),
        }
    }

    pub fn basis(&self) -> &TensorBasis3D {
        &self.basis
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn reset(&mut self) {
        self.mass.fill(0.0);
        for a in [
            &mut self.momentum,
            &mut self.velocity,
            &mut self.force_internal,
            &mut self.force_external,
            &mut self.acceleration,
            &mut self.momentum_updated,
            &mut self.velocity_updated,
        ] {
            a.fill(Vec3::zeros());
        }
    }

    pub fn stencils(&self, particles: &[MaterialPoint]) -> Result<Vec<Stencil>> {
        particles.iter().map(|mp| self.basis.stencil(&mp.position)).collect()
    }

    /// `m_i = Σ N_i m_mp`, `(mv)_i = Σ N_i m_mp v_mp`.
    pub fn scatter_mass_momentum(&mut self, particles: &[MaterialPoint]) -> Result<()> {
        let stencils = self.stencils(particles)?;
        self.scatter_mass_momentum_with(&stencils, particles);
        Ok(())
    }

    pub fn scatter_mass_momentum_with(&mut self, stencils: &[Stencil], particles: &[MaterialPoint]) {
        for (st, mp) in stencils.iter().zip(particles) {
            let p = mp.velocity * mp.mass;
            let (mass, momentum) = (&mut self.mass, &mut self.momentum);
            st.for_each_value(|i, w| {
                mass[i] += w * mp.mass;
                momentum[i] += p * w;
            });
        }
    }

    /// Mass, momentum, internal and external force in one particle sweep.
    ///
    /// `point_forces` is either empty or holds one extra force per particle.
    pub fn scatter_step(
        &mut self,
        stencils: &[Stencil],
        particles: &[MaterialPoint],
        body_force: &Vec3,
        point_forces: &[Vec3],
    ) {
        // [m, mv, f_int] per node, packed for locality.
        let mut acc = std::mem::take(&mut self.packed);
        acc.clear();
        acc.resize(self.mass.len(), [0.0; 8]);
        if let Some(st) = stencils.first() {
            crate::with_support!(st.support(), N => scatter_kernel::<N>(&mut acc, stencils, particles));
        }
        for (i, n) in acc.iter().enumerate() {
            self.mass[i] = n[0];
            self.momentum[i] = Vec3::new(n[1], n[2], n[3]);
            self.force_internal[i] = Vec3::new(n[4], n[5], n[6]);
            self.force_external[i] = body_force * n[0];
        }
        self.packed = acc;
        for (st, f) in stencils.iter().zip(point_forces) {
            if *f != Vec3::zeros() {
                st.scatter_values_into(&mut self.force_external, |fe, w| *fe += f * w);
            }
        }
    }

    /// `(m v̄)_i = Σ N_i(x^n) m_mp v_mp^{n+1}`.
    pub fn scatter_updated_momentum(&mut self, stencils: &[Stencil], particles: &[MaterialPoint]) {
        for (st, mp) in stencils.iter().zip(particles) {
            let p = mp.velocity * mp.mass;
            st.scatter_values_into(&mut self.momentum_updated, |m, w| *m += p * w);
        }
    }

    /// `v_i = (mv)_i / m_i` above the cutoff, zero otherwise.
    pub fn nodal_velocity(&mut self, mass_cutoff: f64) {
        for ((v, mv), &m) in self.velocity.iter_mut().zip(&self.momentum).zip(&self.mass) {
            *v = if m > mass_cutoff { mv / m } else { Vec3::zeros() };
        }
    }

    pub fn nodal_acceleration(&mut self, mass_cutoff: f64) {
        for i in 0..self.mass.len() {
            let m = self.mass[i];
            self.acceleration[i] = if m > mass_cutoff {
                (self.force_internal[i] + self.force_external[i]) / m
            } else {
                Vec3::zeros()
            };
        }
    }

    /// `v_i ← v_i + Δt a_i`
    pub fn advance_velocity(&mut self, dt: f64) {
        for (v, a) in self.velocity.iter_mut().zip(&self.acceleration) {
            *v += a * dt;
        }
    }

    /// `[a_i, v_i]` interleaved, for gathers that need both.
    pub(crate) fn kinematics_packed(&mut self) -> Vec<[f64; 6]> {
        let mut out = std::mem::take(&mut self.packed_kin);
        out.clear();
        out.extend(
            self.acceleration
                .iter()
                .zip(&self.velocity)
                .map(|(a, v)| [a[0], a[1], a[2], v[0], v[1], v[2]]),
        );
        out
    }

    pub(crate) fn recycle_kinematics(&mut self, buf: Vec<[f64; 6]>) {
        self.packed_kin = buf;
    }

    /// `v̄_i = (m v̄)_i / m_i^n` above the cutoff.
    pub fn updated_velocity(&mut self, mass_cutoff: f64) {
        for i in 0..self.mass.len() {
            let m = self.mass[i];
            self.velocity_updated[i] = if m > mass_cutoff {
                self.momentum_updated[i] / m
            } else {
                Vec3::zeros()
            };
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.mass.iter().sum()
    }

    pub fn total_momentum(&self) -> Vec3 {
        self.momentum.iter().sum()
    }

    pub fn apply_bcs(&mut self, bcs: &ResolvedBcs, which: BcTarget) {
        let field = match which {
            BcTarget::Velocity => &mut self.velocity,
            BcTarget::Acceleration => &mut self.acceleration,
            BcTarget::UpdatedVelocity => &mut self.velocity_updated,
        };
        bcs.apply(field);
    }
}

fn scatter_kernel<const N: usize>(acc: &mut [[f64; 8]], stencils: &[Stencil], particles: &[MaterialPoint]) {
    for (st, mp) in stencils.iter().zip(particles) {
        let m = mp.mass;
        let p = mp.velocity * m;
        let sv = mp.stress * mp.volume;
        let (wx, dx) = (&st.axes[0].values, &st.axes[0].derivs);
        // Per row: f_a = -(σV)(dx_a wyz, wx_a dyz, wx_a wdz)
        st.for_each_row::<N>(|start, wyz, dyz, wdz| {
            // node += N_x * a + N_x' * b, lane-uniform
            let a = [
                m * wyz,
                p[0] * wyz,
                p[1] * wyz,
                p[2] * wyz,
                -(sv[(0, 1)] * dyz + sv[(0, 2)] * wdz),
                -(sv[(1, 1)] * dyz + sv[(1, 2)] * wdz),
                -(sv[(2, 1)] * dyz + sv[(2, 2)] * wdz),
                0.0,
            ];
            let b = [
                0.0,
                0.0,
                0.0,
                0.0,
                -sv[(0, 0)] * wyz,
                -sv[(1, 0)] * wyz,
                -sv[(2, 0)] * wyz,
                0.0,
            ];
            let row = &mut acc[start..start + N];
            for i in 0..N {
                let (w, d) = (wx[i], dx[i]);
                let n = &mut row[i];
                for k in 0..8 {
                    n[k] += w * a[k] + d * b[k];
                }
            }
        });
    }
}

/// Which nodal array a boundary condition acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BcTarget {
    Velocity,
    Acceleration,
    UpdatedVelocity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Face {
    #[serde(rename = "x-")]
    XMin,
    #[serde(rename = "x+")]
    XMax,
    #[serde(rename = "y-")]
    YMin,
    #[serde(rename = "y+")]
    YMax,
    #[serde(rename = "z-")]
    ZMin,
    #[serde(rename = "z+")]
    ZMax,
}

impl Face {
    pub fn axis(self) -> usize {
        match self {
            Face::XMin | Face::XMax => 0,
            Face::YMin | Face::YMax => 1,
            Face::ZMin | Face::ZMax => 2,
        }
    }

    pub fn is_max(self) -> bool {
        matches!(self, Face::XMax | Face::YMax | Face::ZMax)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

/// Control points a boundary condition applies to.
#[derive(Clone, Debug, PartialEq)]
pub enum Selector {
    Face {
        face: Face,
    },
    /// Control points whose Greville location lies inside the box.
    Region {
        min: [f64; 3],
        max: [f64; 3],
    },
}

#[derive(Clone, Debug, PartialEq)]
pub enum Constraint {
    /// All components zero.
    Fixed,
    /// Listed components zero; on a face the default is the face normal.
    Roller { axes: Vec<Axis> },
    /// Rigid wall on a face: the outward normal component may not be
    /// positive, separation is free.
    Wall,
}

/// Serialized as a flat table: `face = "x-"` or `min`/`max`, plus `kind`
/// (`fixed`, `roller`, `wall`) and optional roller `axes`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBoundaryCondition", into = "RawBoundaryCondition")]
pub struct BoundaryCondition {
    pub selector: Selector,
    pub constraint: Constraint,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum ConstraintKind {
    Fixed,
    Roller,
    Wall,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBoundaryCondition {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    face: Option<Face>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    min: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    max: Option<[f64; 3]>,
    kind: ConstraintKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    axes: Vec<Axis>,
}

impl TryFrom<RawBoundaryCondition> for BoundaryCondition {
    type Error = String;

    fn try_from(raw: RawBoundaryCondition) -> StdResult<Self, String> {
        let selector = match (raw.face, raw.min, raw.max) {
            (Some(face), None, None) => Selector::Face { face },
            (None, Some(min), Some(max)) => Selector::Region { min, max },
            _ => return Err("boundary needs either `face` or both `min` and `max`".into()),
        };
        if raw.kind != ConstraintKind::Roller && !raw.axes.is_empty() {
            return Err("`axes` only applies to roller constraints".into());
        }
        let constraint = match raw.kind {
            ConstraintKind::Fixed => Constraint::Fixed,
            ConstraintKind::Roller => Constraint::Roller { axes: raw.axes },
            ConstraintKind::Wall => Constraint::Wall,
        };
        Ok(Self { selector, constraint })
    }
}

impl From<BoundaryCondition> for RawBoundaryCondition {
    fn from(bc: BoundaryCondition) -> Self {
        let (face, min, max) = match bc.selector {
            Selector::Face { face } => (Some(face), None, None),
            Selector::Region { min, max } => (None, Some(min), Some(max)),
        };
        let (kind, axes) = match bc.constraint {
            Constraint::Fixed => (ConstraintKind::Fixed, vec![]),
            Constraint::Roller { axes } => (ConstraintKind::Roller, axes),
            Constraint::Wall => (ConstraintKind::Wall, vec![]),
        };
        Self {
            face,
            min,
            max,
            kind,
            axes,
        }
    }
}

/// Declarative boundary conditions; resolve against a basis before use.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BoundaryConditionSet {
    pub conditions: Vec<BoundaryCondition>,
    /// Zero the out-of-plane (z) component at every control point.
    pub plane_strain: bool,
}

/// Boundary conditions compiled to control-point indices.
#[derive(Clone, Debug, Default)]
pub struct ResolvedBcs {
    /// (control point, constrained components)
    masks: Vec<(usize, [bool; 3])>,
    /// (control point, axis, outward sign)
    walls: Vec<(usize, usize, f64)>,
    plane_strain: bool,
}

impl ResolvedBcs {
    pub fn is_empty(&self) -> bool {
        self.masks.is_empty() && self.walls.is_empty() && !self.plane_strain
    }

    pub fn apply(&self, field: &mut [Vec3]) {
        for &(i, mask) in &self.masks {
            for k in 0..3 {
                if mask[k] {
                    field[i][k] = 0.0;
                }
            }
        }
        for &(i, k, sign) in &self.walls {
            if field[i][k] * sign > 0.0 {
                field[i][k] = 0.0;
            }
        }
        if self.plane_strain {
            for v in field.iter_mut() {
                v[2] = 0.0;
            }
        }
    }
}

fn on_boundary(n: [usize; 3], ijk: [usize; 3]) -> bool {
    (0..3).any(|k| ijk[k] == 0 || ijk[k] + 1 == n[k])
}

impl BoundaryConditionSet {
    pub fn resolve(&self, basis: &TensorBasis3D) -> Result<ResolvedBcs> {
        let n = basis.n_basis();
        let mut out = ResolvedBcs {
            plane_strain: self.plane_strain,
            ..Default::default()
        };
        for (c, bc) in self.conditions.iter().enumerate() {
            let key = format!("boundaries[{c}]");
            let points: Vec<usize> = match &bc.selector {
                Selector::Face { face } => {
                    let k = face.axis();
                    let layer = if face.is_max() { n[k] - 1 } else { 0 };
                    (0..basis.n_control_points())
                        .filter(|&i| basis.unflatten(i)[k] == layer)
                        .collect()
                }
                Selector::Region { min, max } => {
                    let mut sel = Vec::new();
                    for i in 0..basis.n_control_points() {
                        let ijk = basis.unflatten(i);
                        let x = basis.control_point(ijk);
                        if (0..3).all(|k| x[k] >= min[k] && x[k] <= max[k]) {
                            if !on_boundary(n, ijk) {
                                return Err(Error::config(
                                    key,
                                    format!("region selects interior control point {ijk:?}"),
                                ));
                            }
                            sel.push(i);
                        }
                    }
                    sel
                }
            };
            if points.is_empty() {
                return Err(Error::config(key, "selector matches no control points"));
            }
            match &bc.constraint {
                Constraint::Fixed => out.masks.extend(points.iter().map(|&i| (i, [true; 3]))),
                Constraint::Roller { axes } => {
                    let mut mask = [false; 3];
                    if axes.is_empty() {
                        match &bc.selector {
                            Selector::Face { face } => mask[face.axis()] = true,
                            Selector::Region { .. } => {
                                return Err(Error::config(key, "roller on a region needs `axes`"))
                            }
                        }
                    }
                    for a in axes {
                        mask[*a as usize] = true;
                    }
                    out.masks.extend(points.iter().map(|&i| (i, mask)));
                }
                Constraint::Wall => {
                    let Selector::Face { face } = &bc.selector else {
                        return Err(Error::config(key, "wall constraints need a face selector"));
                    };
                    let sign = if face.is_max() { 1.0 } else { -1.0 };
                    out.walls.extend(points.iter().map(|&i| (i, face.axis(), sign)));
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::particles::MaterialPoint;

    fn grid(p: usize) -> BackgroundGrid {
        BackgroundGrid::new(TensorBasis3D::new([0.0; 3], [4.0, 3.0, 2.0], [4, 3, 2], p).unwrap())
    }

    fn point(x: [f64; 3], m: f64, v: [f64; 3]) -> MaterialPoint {
        let mut mp = MaterialPoint::new(Vec3::from(x), m, 1.0, 0);
        mp.velocity = Vec3::from(v);
        mp
    }

    #[test]
    fn reset_zeroes_everything() {
        let mut g = grid(2);
        g.scatter_mass_momentum(&[point([1.3, 0.2, 1.9], 2.0, [1.0, 2.0, 3.0])])
            .unwrap();
        assert!(g.total_mass() > 0.0);
        g.reset();
        g.reset();
        assert_eq!(g.total_mass(), 0.0);
        assert!(g.momentum.iter().all(|v| *v == Vec3::zeros()));
    }

    #[test]
    fn particle_on_a_node_puts_all_mass_there() {
        let mut g = grid(1);
        g.scatter_mass_momentum(&[point([2.0, 1.0, 1.0], 3.0, [0.0; 3])])
            .unwrap();
        let i = g.basis().flat_index([2, 1, 1]);
        assert_eq!(g.mass[i], 3.0);
        assert_eq!(g.total_mass(), 3.0);
    }

    #[test]
    fn out_of_domain_scatter_fails() {
        let mut g = grid(2);
        let err = g.scatter_mass_momentum(&[point([4.5, 1.0, 1.0], 1.0, [0.0; 3])]);
        assert!(matches!(err, Err(Error::OutOfDomain { .. })));
    }

    #[test]
    fn empty_nodes_get_zero_velocity() {
        let mut g = grid(2);
        g.scatter_mass_momentum(&[point([0.5, 0.5, 0.5], 1.0, [2.0, -1.0, 0.5])])
            .unwrap();
        g.nodal_velocity(1e-12);
        for i in 0..g.len() {
            if g.mass[i] == 0.0 {
                assert_eq!(g.velocity[i], Vec3::zeros());
            } else {
                assert!((g.velocity[i] - Vec3::new(2.0, -1.0, 0.5)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn uniform_velocity_is_reproduced() {
        let mut g = grid(3);
        let v = [0.3, -0.7, 1.1];
        let ps: Vec<_> = (0..40)
            .map(|k| {
                let t = k as f64 / 40.0;
                point([4.0 * t, 3.0 * (1.0 - t), 2.0 * t * t], 1.0 + t, v)
            })
            .collect();
        g.scatter_mass_momentum(&ps).unwrap();
        g.nodal_velocity(1e-12);
        for i in 0..g.len() {
            if g.mass[i] > 1e-12 {
                assert!((g.velocity[i] - Vec3::from(v)).abs().max() < 1e-12);
            }
        }
    }

    fn fill(g: &mut BackgroundGrid) {
        for (i, v) in g.velocity.iter_mut().enumerate() {
            *v = Vec3::new(1.0 + i as f64, -2.0, 3.0);
        }
    }

    #[test]
    fn fixed_face_zeroes_all_components() {
        let mut g = grid(2);
        fill(&mut g);
        let bcs = BoundaryConditionSet {
            conditions: vec![BoundaryCondition {
                selector: Selector::Face { face: Face::XMin },
                constraint: Constraint::Fixed,
            }],
            plane_strain: false,
        }
        .resolve(g.basis())
        .unwrap();
        g.apply_bcs(&bcs, BcTarget::Velocity);
        for i in 0..g.len() {
            let on_face = g.basis().unflatten(i)[0] == 0;
            assert_eq!(g.velocity[i] == Vec3::zeros(), on_face);
        }
    }

    #[test]
    fn roller_only_touches_the_normal() {
        let mut g = grid(2);
        fill(&mut g);
        let before = g.velocity.clone();
        let bcs = BoundaryConditionSet {
            conditions: vec![BoundaryCondition {
                selector: Selector::Face { face: Face::XMin },
                constraint: Constraint::Roller { axes: vec![] },
            }],
            plane_strain: false,
        }
        .resolve(g.basis())
        .unwrap();
        g.apply_bcs(&bcs, BcTarget::Velocity);
        let once = g.velocity.clone();
        g.apply_bcs(&bcs, BcTarget::Velocity);
        assert_eq!(once, g.velocity);
        for i in 0..g.len() {
            if g.basis().unflatten(i)[0] == 0 {
                assert_eq!(g.velocity[i][0], 0.0);
                assert_eq!(g.velocity[i][1], before[i][1]);
                assert_eq!(g.velocity[i][2], before[i][2]);
            } else {
                assert_eq!(g.velocity[i], before[i]);
            }
        }
    }

    #[test]
    fn empty_set_is_a_no_op() {
        let mut g = grid(1);
        fill(&mut g);
        let before = g.velocity.clone();
        let bcs = BoundaryConditionSet::default().resolve(g.basis()).unwrap();
        assert!(bcs.is_empty());
        g.apply_bcs(&bcs, BcTarget::Velocity);
        assert_eq!(before, g.velocity);
    }

    #[test]
    fn wall_only_blocks_penetration() {
        let mut g = grid(1);
        let bcs = BoundaryConditionSet {
            conditions: vec![BoundaryCondition {
                selector: Selector::Face { face: Face::ZMin },
                constraint: Constraint::Wall,
            }],
            plane_strain: false,
        }
        .resolve(g.basis())
        .unwrap();
        let a = g.basis().flat_index([1, 1, 0]);
        let b = g.basis().flat_index([2, 1, 0]);
        g.velocity[a] = Vec3::new(1.0, 1.0, -5.0);
        g.velocity[b] = Vec3::new(1.0, 1.0, 5.0);
        g.apply_bcs(&bcs, BcTarget::Velocity);
        assert_eq!(g.velocity[a], Vec3::new(1.0, 1.0, 0.0));
        assert_eq!(g.velocity[b], Vec3::new(1.0, 1.0, 5.0));
    }

    #[test]
    fn interior_region_is_rejected() {
        let g = grid(2);
        let set = BoundaryConditionSet {
            conditions: vec![BoundaryCondition {
                selector: Selector::Region {
                    min: [1.0, 1.0, 0.5],
                    max: [3.0, 2.0, 1.5],
                },
                constraint: Constraint::Fixed,
            }],
            plane_strain: false,
        };
        assert!(matches!(set.resolve(g.basis()), Err(Error::Config { .. })));
    }

    #[test]
    fn plane_strain_zeroes_z_everywhere() {
        let mut g = grid(2);
        fill(&mut g);
        let bcs = BoundaryConditionSet {
            conditions: vec![],
            plane_strain: true,
        }
        .resolve(g.basis())
        .unwrap();
        g.apply_bcs(&bcs, BcTarget::Velocity);
        assert!(g.velocity.iter().all(|v| v[2] == 0.0 && v[1] == -2.0));
    }
}
