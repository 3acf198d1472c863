//! One test per benchmark criterion. Each prints a `PASS`/`FAIL` line to
//! stderr (uncaptured) before asserting.

mod common;

use std::collections::HashMap;
use std::io::Write;

use rand::Rng;

use splinempm::constitutive::{j2_radial_return, ElasticParams, Hardening, J2Params};
use splinempm::fbar::{
    constraint_ratio, double_bar_stress, modified_velocity_gradient, project, reconstruct, ProjectionGrid,
    ProjectionMode,
};
use splinempm::grid::{BackgroundGrid, BcTarget};
use splinempm::io::{execute, read_snapshot, RunManifest, SceneSource};
use splinempm::particles::{advance_particles, update_deformation_gradient, velocity_gradient};
use splinempm::scenes::{
    cook_membrane_scene, elastoplastic_collapse_quarter, elastoplastic_collapse_scene, evaluate_metrics,
    taylor_bar_scene, vibrating_bar_scene, SceneConfig, TaylorResolution, SCENE_NAMES,
};
use splinempm::solver::{run, Projector, SimState};
use splinempm::splines::{eval_basis_3d, TensorBasis3D};
use splinempm::tensor::{deviator, skew_part, symmetric_part, trace};
use splinempm::{Mat3, Vec3};

use common::{cox_de_boor, open_knots, random_cloud, random_point, rng};

/// CPU time of the calling thread; tests run concurrently, so wall time
/// would charge each test for its neighbours.
fn thread_cpu_seconds() -> f64 {
    let mut ts = libc::timespec { tv_sec: 0, tv_nsec: 0 };
    unsafe { libc::clock_gettime(libc::CLOCK_THREAD_CPUTIME_ID, &mut ts) };
    ts.tv_sec as f64 + ts.tv_nsec as f64 * 1e-9
}

struct Criterion {
    name: &'static str,
    budget: f64,
    start: f64,
    checks: Vec<(String, bool)>,
}

impl Criterion {
    fn new(name: &'static str, budget_seconds: f64) -> Self {
        Self {
            name,
            budget: budget_seconds,
            start: thread_cpu_seconds(),
            checks: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, detail: impl Into<String>) {
        self.checks.push((detail.into(), ok));
    }

    fn finish(mut self) {
        let elapsed = thread_cpu_seconds() - self.start;
        if self.budget.is_finite() {
            self.check(
                elapsed < self.budget,
                format!("runtime {elapsed:.1} s CPU (budget {:.0} s)", self.budget),
            );
        }
        let ok = self.checks.iter().all(|(_, ok)| *ok);
        let mut err = std::io::stderr().lock();
        let _ = writeln!(err, "[{}] {}", if ok { "PASS" } else { "FAIL" }, self.name);
        for (d, ok) in &self.checks {
            let _ = writeln!(err, "    {} {d}", if *ok { "ok  " } else { "FAIL" });
        }
        drop(err);
        let failed: Vec<_> = self.checks.iter().filter(|c| !c.1).map(|c| c.0.as_str()).collect();
        assert!(ok, "{}: {}", self.name, failed.join("; "));
    }
}

struct Outcome {
    state: SimState,
    metrics: HashMap<String, f64>,
}

fn simulate(cfg: &SceneConfig) -> Outcome {
    let mut state = cfg.build().expect("scene builds");
    run(&mut state, &cfg.time, &mut []).unwrap_or_else(|e| panic!("{}: {e}", cfg.name));
    let metrics = cfg
        .metric_names()
        .into_iter()
        .map(String::from)
        .zip(evaluate_metrics(cfg, &state))
        .collect();
    Outcome { state, metrics }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn basis_suite() {
    let mut c = Criterion::new("basis suite: partition of unity, gradient sum, finite differences", 1.0);
    let mut r = rng(1);
    for p in 1..=3 {
        let (lo, hi, ne) = ([-1.0, 0.0, 2.0], [3.0, 1.5, 3.0], [7, 5, 3]);
        let basis = TensorBasis3D::new(lo, hi, ne, p).unwrap();
        let knots: Vec<Vec<f64>> = (0..3).map(|k| open_knots(ne[k], p, lo[k], hi[k])).collect();
        let h = basis.cell_size();
        let (mut pu, mut gs, mut fd_err, mut oracle) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        let mut skipped = 0;
        for _ in 0..1000 {
            let x = random_point(&mut r, &basis);
            let (idx, val, grad) = eval_basis_3d(&basis, &x).unwrap();
            pu = pu.max((val.iter().sum::<f64>() - 1.0).abs());
            gs = gs.max(grad.iter().sum::<Vec3>().amax());
            for (i, v) in idx.iter().zip(&val) {
                let ijk = basis.unflatten(*i);
                let o: f64 = (0..3).map(|k| cox_de_boor(&knots[k], ijk[k], p, x[k])).product();
                oracle = oracle.max((o - v).abs());
            }
            for k in 0..3 {
                let d = 1e-6 * h[k];
                let near_knot = {
                    let t = (x[k] - lo[k]) / h[k];
                    (t - t.round()).abs() * h[k] < 4.0 * d || x[k] - d < lo[k] || x[k] + d > hi[k]
                };
                if near_knot {
                    skipped += 1;
                    continue;
                }
                let mut xp = x;
                let mut xm = x;
                xp[k] += d;
                xm[k] -= d;
                let look = |y: &Vec3| -> HashMap<usize, f64> {
                    let (ii, vv, _) = eval_basis_3d(&basis, y).unwrap();
                    ii.into_iter().zip(vv).collect()
                };
                let (fp, fm) = (look(&xp), look(&xm));
                let scale = grad.iter().map(|g| g[k].abs()).fold(0.0, f64::max);
                for (i, g) in idx.iter().zip(&grad) {
                    let fd = (fp.get(i).unwrap_or(&0.0) - fm.get(i).unwrap_or(&0.0)) / (2.0 * d);
                    fd_err = fd_err.max((fd - g[k]).abs() / scale);
                }
            }
        }
        c.check(pu <= 1e-12, format!("p={p}: max |ΣN − 1| = {pu:.2e} (≤ 1e-12)"));
        c.check(gs <= 1e-10, format!("p={p}: max |Σ∇N| = {gs:.2e} (≤ 1e-10)"));
        c.check(
            fd_err <= 1e-5,
            format!("p={p}: finite-difference gradient error {fd_err:.2e} relative (≤ 1e-5, {skipped} near-knot axes skipped)"),
        );
        c.check(
            oracle <= 1e-13,
            format!("p={p}: recursive Cox–de Boor oracle mismatch {oracle:.2e}"),
        );
    }
    c.finish();
}

#[test]
fn conservation_suite() {
    let mut c = Criterion::new("conservation suite: scatter mass and momentum", 5.0);
    let mut r = rng(2);
    let (mut worst_m, mut worst_p, mut worst_f) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..100 {
        let p = r.gen_range(1..=3);
        let ne = [r.gen_range(1..9), r.gen_range(1..9), r.gen_range(1..5)];
        let lo = [r.gen_range(-2.0..0.0), r.gen_range(-2.0..0.0), 0.0];
        let hi = [
            lo[0] + r.gen_range(0.5..5.0),
            lo[1] + r.gen_range(0.5..5.0),
            r.gen_range(0.1..2.0),
        ];
        let basis = TensorBasis3D::new(lo, hi, ne, p).unwrap();
        let n = r.gen_range(1..400);
        let mut particles = random_cloud(&mut r, &basis, n);
        for mp in &mut particles {
            let a = Mat3::from_fn(|_, _| r.gen_range(-50.0..50.0));
            mp.stress = a + a.transpose();
        }
        let mass: f64 = particles.iter().map(|p| p.mass).sum();
        let mom: Vec3 = particles.iter().map(|p| p.velocity * p.mass).sum();
        let mom_scale: f64 = particles.iter().map(|p| p.velocity.norm() * p.mass).sum();

        let mut grid = BackgroundGrid::new(basis.clone());
        let stencils = grid.stencils(&particles).unwrap();
        grid.scatter_step(&stencils, &particles, &Vec3::new(0.0, -9.81, 0.0), &[]);
        worst_m = worst_m.max(rel(grid.total_mass(), mass));
        worst_p = worst_p.max((grid.total_momentum() - mom).norm() / mom_scale);
        let f_int: Vec3 = grid.force_internal.iter().sum();
        let f_scale: f64 = particles.iter().map(|p| p.stress.norm() * p.volume).sum::<f64>()
            / basis.cell_size().into_iter().fold(f64::INFINITY, f64::min);
        worst_f = worst_f.max(f_int.norm() / f_scale);

        let mut plain = BackgroundGrid::new(basis);
        plain.scatter_mass_momentum(&particles).unwrap();
        worst_m = worst_m.max(rel(plain.total_mass(), mass));
        worst_p = worst_p.max((plain.total_momentum() - mom).norm() / mom_scale);
    }
    c.check(worst_m <= 1e-12, format!("mass relative error {worst_m:.2e} (≤ 1e-12)"));
    c.check(
        worst_p <= 1e-12,
        format!("momentum relative error {worst_p:.2e} (≤ 1e-12)"),
    );
    c.check(worst_f <= 1e-12, format!("net internal force {worst_f:.2e} relative"));
    c.finish();
}

/// Plain MUSL loop assembled from the grid and particle primitives, with no
/// projection code involved.
fn plain_mpm(cfg: &SceneConfig, steps: usize) -> Vec<splinempm::particles::MaterialPoint> {
    let state = cfg.build().unwrap();
    let mut grid = BackgroundGrid::new(cfg.basis().unwrap());
    let mut particles = state.particles.clone();
    let material = cfg.material.build().unwrap();
    let (dt, cut, bcs, body) = (cfg.time.dt, state.mass_cutoff, &state.bcs, state.body_force);
    for _ in 0..steps {
        grid.reset();
        let stencils = grid.stencils(&particles).unwrap();
        grid.scatter_step(&stencils, &particles, &body, &[]);
        grid.nodal_velocity(cut);
        grid.apply_bcs(bcs, BcTarget::Velocity);
        grid.nodal_acceleration(cut);
        grid.apply_bcs(bcs, BcTarget::Acceleration);
        grid.advance_velocity(dt);
        advance_particles(&mut grid, &stencils, &mut particles, dt).unwrap();
        grid.updated_velocity(cut);
        grid.apply_bcs(bcs, BcTarget::UpdatedVelocity);
        for (mp, st) in particles.iter_mut().zip(&stencils) {
            let l = velocity_gradient(&grid, st);
            update_deformation_gradient(mp, &l, dt).unwrap();
            let (s, e) = material
                .update(&mp.stress, mp.eps_plastic, &symmetric_part(&l), &skew_part(&l), dt)
                .unwrap();
            mp.stress = s;
            mp.eps_plastic = e;
        }
    }
    particles
}

#[test]
fn fbar_identity_suite() {
    let mut c = Criterion::new("F-bar identity suite", 60.0);
    let mut r = rng(3);

    let mut trace_err = 0.0f64;
    let mut dev_err = 0.0f64;
    let mut offdiag_exact = true;
    for _ in 0..10_000 {
        let g = Mat3::from_fn(|_, _| r.gen_range(-10.0..10.0));
        let pi = r.gen_range(-10.0..10.0);
        let m = modified_velocity_gradient(&g, pi);
        trace_err = trace_err.max((trace(&m) - pi).abs());
        dev_err = dev_err.max((deviator(&m) - deviator(&g)).amax() / g.amax());
        offdiag_exact &= (0..3).all(|i| (0..3).all(|j| i == j || m[(i, j)].to_bits() == g[(i, j)].to_bits()));
    }
    c.check(
        trace_err <= 1e-13,
        format!("tr(∇v̄) − π(∇·v): {trace_err:.2e} (≤ 1e-13)"),
    );
    c.check(
        offdiag_exact,
        "modified gradient leaves off-diagonal entries bit-identical",
    );
    c.check(
        dev_err <= 4.0 * f64::EPSILON,
        format!("deviator of ∇v̄ equals deviator of ∇v to {dev_err:.2e}"),
    );

    let basis = TensorBasis3D::new([0.0; 3], [3.0, 2.0, 1.0], [6, 4, 2], 2).unwrap();
    let particles = random_cloud(&mut r, &basis, 500);
    let (mut fixed_err, mut recon_trace_err, mut stress_dev_err) = (0.0f64, 0.0f64, 0.0f64);
    for mode in [ProjectionMode::Constants, ProjectionMode::Pminus1] {
        let pg = ProjectionGrid::for_mode(&basis, mode).unwrap().unwrap();
        let field = project(&vec![-4.25; particles.len()], &particles, &pg).unwrap();
        for mp in &particles {
            fixed_err = fixed_err.max((reconstruct(&field, &pg, &mp.position).unwrap() + 4.25).abs());
        }
        for j in 0..field.values.len() {
            if field.denominator[j] > 0.0 {
                fixed_err = fixed_err.max((field.values[j] + 4.25).abs());
            }
        }
        let grads: Vec<Mat3> = particles
            .iter()
            .map(|_| Mat3::from_fn(|_, _| r.gen_range(-1.0..1.0)))
            .collect();
        let div: Vec<f64> = grads.iter().map(trace).collect();
        let field = project(&div, &particles, &pg).unwrap();
        for (mp, g) in particles.iter().zip(&grads) {
            let pi = reconstruct(&field, &pg, &mp.position).unwrap();
            recon_trace_err = recon_trace_err.max((trace(&modified_velocity_gradient(g, pi)) - pi).abs());
        }
        let stress: Vec<Mat3> = particles
            .iter()
            .map(|_| {
                let a = Mat3::from_fn(|_, _| r.gen_range(-100.0..100.0));
                a + a.transpose()
            })
            .collect();
        let bar = double_bar_stress(&stress, &particles, &pg).unwrap();
        for (s, b) in stress.iter().zip(&bar) {
            stress_dev_err = stress_dev_err.max((deviator(s) - deviator(b)).amax() / s.amax());
        }
    }
    c.check(
        fixed_err <= 1e-13,
        format!("constant field is a projection fixed point to {fixed_err:.2e}"),
    );
    c.check(
        recon_trace_err <= 1e-13,
        format!("tr(∇v̄) equals the reconstructed lumped projection to {recon_trace_err:.2e}"),
    );
    c.check(
        stress_dev_err <= 4.0 * f64::EPSILON,
        format!("double-bar stress keeps the deviator to {stress_dev_err:.2e}"),
    );

    let cfg = elastoplastic_collapse_quarter(2, ProjectionMode::Off);
    let mut off = cfg.build().unwrap();
    let mut identity = {
        let particles = cfg.particles().unwrap();
        let mut s = SimState::new(
            cfg.basis().unwrap(),
            Projector::Identity,
            particles,
            &cfg.boundary_set(),
            vec![cfg.material.build().unwrap()],
        )
        .unwrap();
        s.body_force = off.body_force;
        s
    };
    for _ in 0..50 {
        off.step(&cfg.time).unwrap();
        identity.step(&cfg.time).unwrap();
    }
    let reference = plain_mpm(&cfg, 50);
    let same = |a: &[splinempm::particles::MaterialPoint], b: &[splinempm::particles::MaterialPoint]| {
        a.len() == b.len()
            && a.iter().zip(b).all(|(p, q)| {
                p.position
                    .iter()
                    .zip(q.position.iter())
                    .all(|(x, y)| x.to_bits() == y.to_bits())
                    && p.velocity
                        .iter()
                        .zip(q.velocity.iter())
                        .all(|(x, y)| x.to_bits() == y.to_bits())
                    && p.stress
                        .iter()
                        .zip(q.stress.iter())
                        .all(|(x, y)| x.to_bits() == y.to_bits())
            })
    };
    let moved = off
        .particles
        .iter()
        .map(|p| p.displacement().norm())
        .fold(0.0, f64::max);
    c.check(
        same(&off.particles, &reference) && moved > 0.0,
        format!("projection off is bit-identical to a plain MPM loop over 50 quarter-resolution collapse steps (max displacement {moved:.3e})"),
    );
    c.check(
        same(&off.particles, &identity.particles),
        "identity projection through the F-bar path is bit-identical to projection off",
    );
    c.finish();
}

#[test]
fn constraint_ratio_values() {
    let mut c = Criterion::new("constraint ratio, quadratic 2D", 1.0);
    let without = constraint_ratio(2, 2, false);
    let with = constraint_ratio(2, 2, true);
    c.check(
        (without.value() - 1.0).abs() < 1e-15,
        format!("without projection r = {without} (1)"),
    );
    c.check(
        (with.value() - 8.0 / 3.0).abs() < 1e-15,
        format!("projection onto constants r = {with} (8/3)"),
    );
    c.finish();
}

/// `g(Δγ)` root on `[0, ‖s‖/2μ]` by bisection to the last representable bit.
fn bisect_delta_gamma(norm: f64, eps_p: f64, p: &J2Params) -> f64 {
    let g = |dg: f64| p.consistency_residual(norm, eps_p, dg);
    let (mut a, mut b) = (0.0, norm / (2.0 * p.elastic.mu()));
    if g(a) <= 0.0 {
        return 0.0;
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if g(m) > 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

#[test]
fn plasticity_oracle() {
    let mut c = Criterion::new("J2 radial return against bisection", 10.0);
    let mut r = rng(5);
    let laws = [
        ("perfect", Hardening::Perfect),
        (
            "power law A=125, m=0.1",
            Hardening::PowerLaw {
                coefficient: 125.0,
                exponent: 0.1,
            },
        ),
        (
            "power law A=10, m=0.5",
            Hardening::PowerLaw {
                coefficient: 10.0,
                exponent: 0.5,
            },
        ),
    ];
    for (label, hardening) in laws {
        let (mut f_worst, mut dg_worst, mut plastic) = (0.0f64, 0.0f64, 0);
        let n = if label == "perfect" { 4000 } else { 3000 };
        for _ in 0..n {
            let e = 10f64.powf(r.gen_range(3.0..11.0));
            let nu = r.gen_range(0.0..0.49);
            let sy = e * 10f64.powf(r.gen_range(-4.0..-2.0));
            let params = J2Params::new(ElasticParams::new(e, nu, 1.0).unwrap(), sy, hardening).unwrap();
            let a = Mat3::from_fn(|_, _| r.gen_range(-1.0..1.0));
            let dir = deviator(&(a + a.transpose()));
            let dir = dir / dir.norm();
            let mag = sy * r.gen_range(0.1..20.0);
            let mut trial = dir * mag;
            let p = sy * r.gen_range(-5.0..5.0);
            trial[(0, 0)] += p;
            trial[(1, 1)] += p;
            trial[(2, 2)] += p;
            let eps_p = if r.gen_bool(0.3) { 0.0 } else { r.gen_range(0.0..0.5) };
            let out = j2_radial_return(&trial, eps_p, &params).unwrap();
            let f_after = params.yield_function(&out.stress, out.eps_plastic);
            let norm = deviator(&trial).norm();
            let reference = bisect_delta_gamma(norm, eps_p, &params);
            if out.delta_gamma > 0.0 {
                plastic += 1;
                f_worst = f_worst.max(f_after.abs() / sy);
            } else {
                f_worst = f_worst.max(f_after.max(0.0) / sy);
            }
            dg_worst = dg_worst.max((out.delta_gamma - reference).abs() / (sy / params.elastic.mu()));
        }
        c.check(
            f_worst <= 1e-8,
            format!("{label}: {plastic}/{n} plastic, max |f|/σ_Y = {f_worst:.2e} (≤ 1e-8)"),
        );
        c.check(
            dg_worst <= 1e-10,
            format!("{label}: max |Δγ − Δγ_bisection| / (σ_Y/μ) = {dg_worst:.2e} (≤ 1e-10)"),
        );
    }
    c.finish();
}

#[test]
fn vibrating_bar_convergence() {
    let mut c = Criterion::new("vibrating bar, p=2, levels M1–M3", 300.0);
    let mut projected = Vec::new();
    let mut plain = Vec::new();
    for level in 1..=3 {
        for (mode, out) in [
            (ProjectionMode::Pminus1, &mut projected),
            (ProjectionMode::Off, &mut plain),
        ] {
            let cfg = vibrating_bar_scene(level, 2, mode).unwrap();
            let o = simulate(&cfg);
            assert!((o.state.time() - 0.5).abs() < 1e-9);
            out.push(o.metrics["l2_error"]);
        }
    }
    for l in 0..3 {
        c.check(
            projected[l] <= 2.0 * plain[l],
            format!(
                "M{}: projected error {:.4e}, unprojected {:.4e}, ratio {:.3} (≤ 2)",
                l + 1,
                projected[l],
                plain[l],
                projected[l] / plain[l]
            ),
        );
    }
    for l in 0..2 {
        let order = (projected[l] / projected[l + 1]).log2();
        let order_plain = (plain[l] / plain[l + 1]).log2();
        c.check(
            projected[l + 1] < projected[l] && order >= 1.8,
            format!(
                "M{}→M{}: observed order {order:.3} with projection (≥ 1.8); {order_plain:.3} without",
                l + 1,
                l + 2
            ),
        );
    }
    c.finish();
}

#[test]
fn cook_membrane_locking() {
    let mut c = Criterion::new("Cook's membrane, ν = 0.499, M1–M2", 900.0);
    let m1_p2 = simulate(&cook_membrane_scene(1, 2, ProjectionMode::Pminus1).unwrap());
    let m1_p1 = simulate(&cook_membrane_scene(1, 1, ProjectionMode::Off).unwrap());
    let m2_p2 = simulate(&cook_membrane_scene(2, 2, ProjectionMode::Pminus1).unwrap());
    let m2_off = simulate(&cook_membrane_scene(2, 2, ProjectionMode::Off).unwrap());
    assert_eq!(m1_p2.state.particles.len(), 6710);
    assert_eq!(m2_p2.state.particles.len(), 26_900);

    let tip = |o: &Outcome| o.metrics["tip_displacement"];
    let rough = |o: &Outcome| o.metrics["pressure_roughness"];
    let gain = tip(&m1_p2) / tip(&m1_p1) - 1.0;
    c.check(
        gain >= 0.15,
        format!(
            "(a) M1 tip: p2+linears {:.4e}, p1 unprojected {:.4e}, excess {:.1}% (≥ 15%)",
            tip(&m1_p2),
            tip(&m1_p1),
            100.0 * gain
        ),
    );
    let change = rel(tip(&m2_p2), tip(&m1_p2));
    c.check(
        change <= 0.05,
        format!(
            "(b) projected tip M1 {:.4e} → M2 {:.4e}, change {:.2}% (≤ 5%)",
            tip(&m1_p2),
            tip(&m2_p2),
            100.0 * change
        ),
    );
    let ratio = rough(&m2_p2) / rough(&m2_off);
    c.check(
        ratio <= 0.5,
        format!(
            "(c) M2 pressure roughness p2+linears {:.4e} vs unprojected {:.4e}, ratio {ratio:.3} (≤ 0.5)",
            rough(&m2_p2),
            rough(&m2_off)
        ),
    );
    c.finish();
}

#[test]
fn elastoplastic_collapse_smoothing() {
    let mut c = Criterion::new("elasto-plastic collapse, full resolution", 600.0);
    let linears = simulate(&elastoplastic_collapse_scene(2, ProjectionMode::Pminus1));
    let off = simulate(&elastoplastic_collapse_scene(2, ProjectionMode::Off));
    let constants = simulate(&elastoplastic_collapse_scene(2, ProjectionMode::Constants));
    assert_eq!(linears.state.particles.len(), 12_800);
    assert_eq!(linears.state.step_count(), 600);
    let rough = |o: &Outcome| o.metrics["pressure_roughness"];
    let settle = |o: &Outcome| o.metrics["max_settlement"];
    c.check(
        rough(&linears) <= 0.5 * rough(&off),
        format!(
            "roughness p2+linears {:.4e} vs unprojected {:.4e}, ratio {:.3} (≤ 0.5)",
            rough(&linears),
            rough(&off),
            rough(&linears) / rough(&off)
        ),
    );
    c.check(
        rough(&linears) <= 0.5 * rough(&constants),
        format!(
            "roughness p2+linears {:.4e} vs p2+constants {:.4e}, ratio {:.3} (≤ 0.5)",
            rough(&linears),
            rough(&constants),
            rough(&linears) / rough(&constants)
        ),
    );
    c.check(
        settle(&linears) >= settle(&off),
        format!(
            "max settlement with projection {:.4e} ≥ without {:.4e}",
            settle(&linears),
            settle(&off)
        ),
    );
    c.finish();
}

fn taylor_check(c: &mut Criterion, resolution: TaylorResolution, tol: f64) {
    let cases = [
        (2, ProjectionMode::Pminus1, "p2+linears", (0.776, 1.649)),
        (1, ProjectionMode::Constants, "p1+constants", (0.770, 1.634)),
    ];
    for (p, mode, label, (r_ref, h_ref)) in cases {
        let o = simulate(&taylor_bar_scene(resolution, p, mode));
        if resolution == TaylorResolution::Desk {
            assert!(o.state.particles.len() >= 20_000);
        }
        let (rad, h) = (o.metrics["radius_cm"], o.metrics["height_cm"]);
        c.check(
            rel(rad, r_ref) <= tol,
            format!(
                "{label}: radius {rad:.4} cm vs {r_ref} ({:+.2}%, ±{:.0}%)",
                100.0 * (rad / r_ref - 1.0),
                100.0 * tol
            ),
        );
        c.check(
            rel(h, h_ref) <= tol,
            format!(
                "{label}: height {h:.4} cm vs {h_ref} ({:+.2}%, ±{:.0}%)",
                100.0 * (h / h_ref - 1.0),
                100.0 * tol
            ),
        );
    }
}

#[test]
fn taylor_bar_desk() {
    let mut c = Criterion::new("Taylor bar, desk resolution", 1800.0);
    taylor_check(&mut c, TaylorResolution::Desk, 0.07);
    c.finish();
}

#[test]
#[ignore = "long-running: about 20 min of CPU"]
fn taylor_bar_paper_resolution() {
    let mut c = Criterion::new("Taylor bar, paper resolution", f64::INFINITY);
    taylor_check(&mut c, TaylorResolution::Paper, 0.02);
    c.finish();
}

#[test]
fn determinism() {
    let mut c = Criterion::new("determinism: identical manifests give identical snapshots", 600.0);
    let dir = tempfile::tempdir().unwrap();
    for name in SCENE_NAMES.iter().filter(|n| **n != "taylor_bar_paper") {
        let short = *name != "vibrating_bar";
        let outputs: Vec<_> = (0..2)
            .map(|k| {
                let mut m = RunManifest::new(
                    SceneSource::Named { name: name.to_string() },
                    dir.path().join(format!("{name}_{k}")),
                );
                if short {
                    let cfg = m.resolve().unwrap();
                    m.overrides.t_end = Some(20.0 * cfg.time.dt);
                    m.cadence = Some(10);
                } else {
                    m.cadence = Some(500);
                }
                execute(&m).unwrap();
                m.out_dir.clone()
            })
            .collect();
        let mut files: Vec<_> = std::fs::read_dir(&outputs[0])
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .filter(|f| f.to_string_lossy().ends_with(".csv"))
            .collect();
        files.sort();
        let snapshots = files
            .iter()
            .filter(|f| f.to_string_lossy().starts_with("snapshot_"))
            .count();
        let identical = files
            .iter()
            .all(|f| std::fs::read(outputs[0].join(f)).unwrap() == std::fs::read(outputs[1].join(f)).unwrap());
        let rows = read_snapshot(&outputs[0].join("final.csv")).unwrap().len();
        c.check(
            identical && snapshots >= 2 && rows > 0,
            format!(
                "{name}: {} files ({snapshots} snapshots, {rows} particles) byte-identical",
                files.len()
            ),
        );
    }
    c.finish();
}
