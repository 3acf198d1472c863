//! Small helpers for second-order tensors stored as `Matrix3`.

use crate::Mat3;

#[inline]
pub fn trace(a: &Mat3) -> f64 {
    a[(0, 0)] + a[(1, 1)] + a[(2, 2)]
}

#[inline]
pub fn hydrostatic(a: &Mat3) -> f64 {
    trace(a) / 3.0
}

#[inline]
pub fn deviator(a: &Mat3) -> Mat3 {
    let h = hydrostatic(a);
    let mut d = *a;
    d[(0, 0)] -= h;
    d[(1, 1)] -= h;
    d[(2, 2)] -= h;
    d
}

/// Adds `s` to the diagonal in place.
#[inline]
pub fn add_to_diagonal(a: &mut Mat3, s: f64) {
    a[(0, 0)] += s;
    a[(1, 1)] += s;
    a[(2, 2)] += s;
}

#[inline]
pub fn symmetric_part(a: &Mat3) -> Mat3 {
    (a + a.transpose()) * 0.5
}

#[inline]
pub fn skew_part(a: &Mat3) -> Mat3 {
    (a - a.transpose()) * 0.5
}

/// Frobenius norm of the deviator.
#[inline]
pub fn deviatoric_norm(a: &Mat3) -> f64 {
    deviator(a).norm()
}

/// √(3/2 s:s)
#[inline]
pub fn von_mises(a: &Mat3) -> f64 {
    (1.5f64).sqrt() * deviatoric_norm(a)
}
