//! Explicit material point method on B-spline background grids, with a
//! lumped-L² F-bar projection that relieves volumetric locking in
//! near-incompressible elasticity and J2 plasticity.
//!
//! The crate is organised bottom-up:
//!
//! - [`splines`]: open-knot B-spline bases and tensor-product evaluation.
//! - [`grid`]: background control-point lattice, scatter and boundary conditions.
//! - [`particles`]: material points and their kinematic updates.
//! - [`constitutive`]: Jaumann-rate hypoelasticity and J2 radial return.
//! - [`fbar`]: projection grid, dilatational projection and double-bar stress.
//! - [`solver`]: the MUSL explicit time loop.
//! - [`scenes`]: benchmark builders, analytic references and metrics.
//! - [`io`]: configuration parsing, snapshots, series and convergence reports.

pub mod constitutive;
pub mod error;
pub mod fbar;
pub mod grid;
pub mod io;
pub mod particles;
pub mod scenes;
pub mod solver;
pub mod splines;
pub mod tensor;

pub use error::{Error, Result};

pub type Vec3 = nalgebra::Vector3<f64>;
pub type Mat3 = nalgebra::Matrix3<f64>;
