//! Benchmark presets and the measurement harnesses built on them: the
//! manufactured-solution convergence sweep and the cut-position robustness
//! sweep.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::solver::{Preconditioner, SolverOptions};
use crate::timeloop::{
    ErrorAccumulator, ErrorNorms, InitialCondition, Phase, Schedule, Simulation,
};
use crate::Vec3;

fn sphere_domain() -> (Vec3, Vec3) {
    (
        Vec3::new(-5.0 / 3.0, -5.0 / 3.0, -5.0 / 3.0),
        Vec3::new(10.0 / 3.0, 5.0 / 3.0, 5.0 / 3.0),
    )
}

fn cube_domain() -> (Vec3, Vec3) {
    (
        Vec3::new(-5.0 / 3.0, -5.0 / 3.0, -5.0 / 3.0),
        Vec3::new(5.0 / 3.0, 5.0 / 3.0, 5.0 / 3.0),
    )
}

fn collision_domain() -> (Vec3, Vec3) {
    (
        Vec3::new(-10.0 / 3.0, -5.0 / 3.0, -5.0 / 3.0),
        Vec3::new(10.0 / 3.0, 5.0 / 3.0, 5.0 / 3.0),
    )
}

/// The large collision runs solve fastest with a light preconditioner and a
/// short restart; robustness comes from the warm start and the maxit cap.
fn collision_solver() -> SolverOptions {
    SolverOptions {
        preconditioner: Preconditioner::Jacobi,
        restart: 30,
        ..Default::default()
    }
}

fn base_config(name: &str, level: u32, domain: (Vec3, Vec3), schedule: Schedule) -> RunConfig {
    RunConfig {
        scenario: name.to_string(),
        level,
        box_min: domain.0,
        box_max: domain.1,
        velocity: Vec3::zeros(),
        angular: Vec3::zeros(),
        center: Vec3::zeros(),
        frequency: 1.0,
        speed: 1.0,
        epsilon: 0.1,
        sigma: 1.0,
        beta_s: None,
        c_delta: 1.0,
        rho: 1.0,
        forcing: false,
        schedule,
        ic: InitialCondition::Constant { value: 0.5 },
        seed: 0,
        solver: SolverOptions::default(),
        output_dir: None,
        vtk_interval: 0,
    }
}

/// Named benchmark configurations. `level` overrides the preset default.
pub fn preset(name: &str, level: Option<u32>) -> Option<RunConfig> {
    let uniform = |t0: f64, t1: f64, dt: f64| Schedule::uniform(t0, t1, dt).unwrap();
    let mut cfg = match name {
        "moving_sphere" | "test1a" => {
            let lv = level.unwrap_or(4);
            let mut c = base_config(name, lv, sphere_domain(), uniform(0.0, 1.0, 0.01));
            c.velocity = Vec3::new(1.0, 0.0, 0.0);
            c.angular = Vec3::new(1.0, 0.0, 0.0);
            c.ic = InitialCondition::Profile { axis: 1, delta: 0.0 };
            c
        }
        "test1b" => {
            let lv = level.unwrap_or(3);
            let dt = 4f64.powi(1 - lv as i32) / 10.0;
            let mut c = base_config(name, lv, sphere_domain(), uniform(0.0, 0.1, dt));
            c.velocity = Vec3::new(10.0, 0.0, 0.0);
            c.angular = Vec3::new(10.0, 0.0, 0.0);
            c.ic = InitialCondition::Manufactured;
            c.forcing = true;
            c
        }
        "oscillating_ellipsoid" | "test2a" => {
            let lv = level.unwrap_or(3);
            let mut c = base_config(name, lv, cube_domain(), uniform(0.0, 1.0, 0.01));
            c.ic = InitialCondition::Cosine { base: 0.5, amplitude: 0.05 };
            c
        }
        "test2b" => {
            let lv = level.unwrap_or(4);
            let mut c = base_config(name, lv, cube_domain(), uniform(0.0, 1.0, 0.01));
            c.epsilon = 0.01;
            c.ic = InitialCondition::Cosine { base: 0.5, amplitude: 0.05 };
            c
        }
        "test2c" => {
            let lv = level.unwrap_or(4);
            let mut c = base_config(name, lv, cube_domain(), uniform(0.0, 1.0, 0.001));
            c.frequency = 5.0;
            c.sigma = 16.0;
            c.ic = InitialCondition::Cosine { base: 0.5, amplitude: 0.05 };
            c
        }
        "colliding_spheres" | "collide_steady" => {
            let lv = level.unwrap_or(4);
            let mut c = base_config(name, lv, collision_domain(), uniform(0.0, 1.0, 0.001));
            c.solver = collision_solver();
            c.epsilon = 0.01;
            c.speed = 1.0;
            c.ic = InitialCondition::Piecewise {
                neg: Box::new(InitialCondition::Profile { axis: 1, delta: 0.0 }),
                pos: Box::new(InitialCondition::Profile { axis: 0, delta: 0.0 }),
            };
            c
        }
        "collide_slow" => {
            let lv = level.unwrap_or(4);
            let ts = 0.23;
            let schedule = Schedule::new(
                vec![Phase { t_start: ts, dt: 1e-4 }, Phase { t_start: ts + 0.01, dt: 1e-2 }],
                ts + 1.0,
            )
            .unwrap();
            let mut c = base_config(name, lv, collision_domain(), schedule);
            c.solver = collision_solver();
            c.epsilon = 0.01;
            c.speed = 1.0;
            c.seed = 1;
            c.ic = InitialCondition::Piecewise {
                neg: Box::new(InitialCondition::Random { seed: 1 }),
                pos: Box::new(InitialCondition::Constant { value: 0.0 }),
            };
            c
        }
        "collide_fast" => {
            let lv = level.unwrap_or(4);
            let ts = 0.023;
            let schedule = Schedule::new(
                vec![Phase { t_start: ts, dt: 1e-4 }, Phase { t_start: ts + 0.01, dt: 1e-3 }],
                ts + 0.1,
            )
            .unwrap();
            let mut c = base_config(name, lv, collision_domain(), schedule);
            c.solver = collision_solver();
            c.epsilon = 0.01;
            c.speed = 10.0;
            c.seed = 1;
            c.ic = InitialCondition::Piecewise {
                neg: Box::new(InitialCondition::Random { seed: 1 }),
                pos: Box::new(InitialCondition::Constant { value: 0.0 }),
            };
            c
        }
        "splitting_spheres" | "split_rotated" => {
            let lv = level.unwrap_or(4);
            let mut c = base_config(name, lv, collision_domain(), uniform(0.0, 1.5, 0.001));
            c.solver = collision_solver();
            c.epsilon = 0.01;
            c.speed = -1.0;
            c.ic = InitialCondition::RotatedProfile {
                angle: std::f64::consts::FRAC_PI_4,
                delta: 0.0,
            };
            c
        }
        "split_horizontal" => {
            let lv = level.unwrap_or(4);
            let mut c = base_config(name, lv, collision_domain(), uniform(0.0, 1.37, 0.001));
            c.solver = collision_solver();
            c.epsilon = 0.01;
            c.speed = -1.0;
            c.ic = InitialCondition::Profile { axis: 2, delta: 20.0 };
            c
        }
        _ => return None,
    };
    if let Some(lv) = level {
        cfg.level = lv;
    }
    Some(cfg)
}

/// Least-squares slope of `log(err)` versus `log(h)`: the observed
/// convergence rate.
pub fn fit_rate(hs: &[f64], errors: &[f64]) -> f64 {
    assert_eq!(hs.len(), errors.len());
    assert!(hs.len() >= 2);
    let xs: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.max(1e-300).ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// One level of the synthetic-solution accuracy sweep.
#[derive(Debug, Clone)]
pub struct LevelResult {
    pub level: u32,
    pub h: f64,
    pub steps: usize,
    pub norms: ErrorNorms,
}

/// Runs the rigid-sphere benchmark at one level and accumulates the discrete
/// space-time error norms at every accepted step.
pub fn run_test1b_level(level: u32, solver: Option<SolverOptions>) -> Result<LevelResult> {
    let mut cfg = preset("test1b", Some(level)).expect("test1b preset");
    if let Some(s) = solver {
        cfg.solver = s;
    }
    let setup = cfg.setup()?;
    let h = setup.lattice.h;
    let mut sim = Simulation::new(setup)?;
    let exact = sim.manufactured.clone().expect("rigid sphere benchmark");
    let mut acc = ErrorAccumulator::default();
    let mut steps = 0;
    while !sim.is_done() {
        let record = sim.step()?;
        acc.add_step(record.dt, sim.state(), sim.band(), sim.surface(), &exact);
        steps += 1;
    }
    Ok(LevelResult { level, h, steps, norms: acc.finalize() })
}

#[derive(Debug, Clone)]
pub struct ConvergenceTable {
    pub levels: Vec<LevelResult>,
    pub rate_l2l2_c: f64,
    pub rate_l2l2_mu: f64,
    pub rate_l2h1_c: f64,
    pub rate_l2h1_mu: f64,
}

impl ConvergenceTable {
    pub fn render(&self) -> String {
        let mut out = String::from(
            "level        h  steps      L2L2(c)     L2L2(mu)      L2H1(c)     L2H1(mu)\n",
        );
        for r in &self.levels {
            out.push_str(&format!(
                "{:5} {:8.5} {:6} {:12.5e} {:12.5e} {:12.5e} {:12.5e}\n",
                r.level, r.h, r.steps, r.norms.l2l2_c, r.norms.l2l2_mu, r.norms.l2h1_c,
                r.norms.l2h1_mu
            ));
        }
        out.push_str(&format!(
            "rates: L2L2(c) {:.2}  L2L2(mu) {:.2}  L2H1(c) {:.2}  L2H1(mu) {:.2}\n",
            self.rate_l2l2_c, self.rate_l2l2_mu, self.rate_l2h1_c, self.rate_l2h1_mu
        ));
        out
    }
}

/// The accuracy sweep over a level range, with fitted rates.
pub fn convergence_test1b(levels: std::ops::RangeInclusive<u32>) -> Result<ConvergenceTable> {
    let mut results = Vec::new();
    for level in levels {
        results.push(run_test1b_level(level, None)?);
    }
    if results.len() < 2 {
        return Err(Error::InvalidParameter("need at least two levels to fit rates".into()));
    }
    let hs: Vec<f64> = results.iter().map(|r| r.h).collect();
    let pick = |f: fn(&ErrorNorms) -> f64| -> Vec<f64> {
        results.iter().map(|r| f(&r.norms)).collect()
    };
    Ok(ConvergenceTable {
        rate_l2l2_c: fit_rate(&hs, &pick(|n| n.l2l2_c)),
        rate_l2l2_mu: fit_rate(&hs, &pick(|n| n.l2l2_mu)),
        rate_l2h1_c: fit_rate(&hs, &pick(|n| n.l2h1_c)),
        rate_l2h1_mu: fit_rate(&hs, &pick(|n| n.l2h1_mu)),
        levels: results,
    })
}

/// GMRES iteration counts for one step of the stationary sphere, its center
/// shifted by random sub-cell offsets. Stability of these counts is the
/// cut-position robustness measure.
pub fn sweep_offsets(n: usize, level: u32, seed: u64) -> Result<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut iters = Vec::with_capacity(n);
    for _ in 0..n {
        let mut cfg = preset("moving_sphere", Some(level)).expect("sphere preset");
        cfg.velocity = Vec3::zeros();
        cfg.angular = Vec3::zeros();
        let base = cfg.lattice()?;
        cfg.center = Vec3::new(
            rng.gen_range(0.0..base.h),
            rng.gen_range(0.0..base.h),
            rng.gen_range(0.0..base.h),
        );
        cfg.ic = InitialCondition::Profile { axis: 1, delta: 0.0 };
        cfg.schedule = Schedule::uniform(0.0, 0.01, 0.01)?;
        let mut sim = Simulation::new(cfg.setup()?)?;
        let record = sim.step()?;
        iters.push(record.gmres_iters);
    }
    Ok(iters)
}
