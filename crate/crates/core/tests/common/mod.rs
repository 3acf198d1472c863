#![allow(dead_code)]

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use splinempm::particles::MaterialPoint;
use splinempm::splines::TensorBasis3D;
use splinempm::Vec3;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Textbook recursive Cox–de Boor on an explicit knot list. The last
/// non-empty span is closed on the right.
pub fn cox_de_boor(knots: &[f64], i: usize, p: usize, x: f64) -> f64 {
    if p == 0 {
        let (a, b) = (knots[i], knots[i + 1]);
        let last = knots[knots.len() - 1];
        let closes = b == last && x == last && a < b;
        return if (a <= x && x < b) || closes { 1.0 } else { 0.0 };
    }
    let mut out = 0.0;
    let d1 = knots[i + p] - knots[i];
    if d1 > 0.0 {
        out += (x - knots[i]) / d1 * cox_de_boor(knots, i, p - 1, x);
    }
    let d2 = knots[i + p + 1] - knots[i + 1];
    if d2 > 0.0 {
        out += (knots[i + p + 1] - x) / d2 * cox_de_boor(knots, i + 1, p - 1, x);
    }
    out
}

/// Open uniform knots written out directly.
pub fn open_knots(n_elements: usize, p: usize, a: f64, b: f64) -> Vec<f64> {
    let h = (b - a) / n_elements as f64;
    let mut k = vec![a; p];
    k.extend((0..=n_elements).map(|e| if e == n_elements { b } else { a + e as f64 * h }));
    k.extend(std::iter::repeat(b).take(p));
    k
}

pub fn random_point(r: &mut impl Rng, basis: &TensorBasis3D) -> Vec3 {
    let (lo, hi) = (basis.min(), basis.max());
    Vec3::from_fn(|k, _| r.gen_range(lo[k]..hi[k]))
}

/// Random particle cloud with random masses, volumes and velocities.
pub fn random_cloud(r: &mut impl Rng, basis: &TensorBasis3D, n: usize) -> Vec<MaterialPoint> {
    (0..n)
        .map(|_| {
            let x = random_point(r, basis);
            let mut mp = MaterialPoint::new(x, r.gen_range(0.1..2.0), r.gen_range(0.05..1.0), 0);
            mp.velocity = Vec3::from_fn(|_, _| r.gen_range(-3.0..3.0));
            mp
        })
        .collect()
}
