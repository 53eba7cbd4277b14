//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line with the measured quantities. Tolerances are pinned here.
//!
//! The heavy scenario runs (criteria 4 and 7) take minutes each; the whole
//! suite is sized for a desk machine.

use chsurf_core::assembly::{
    assemble, evaluate_prev, mobility, potential, tangential_gradient, ModelParams,
};
use chsurf_core::cutgeom::{
    extract_surface, select_band, surface_quadrature, CutSurface, NarrowBand, SurfaceTriangle,
};
use chsurf_core::levelset::DiscreteLevelSet;
use chsurf_core::manufactured::ManufacturedSolution;
use chsurf_core::scenarios::{self, fit_rate, preset};
use chsurf_core::solver::{solve, solve_dense, SolverOptions};
use chsurf_core::timeloop::{InitialCondition, Schedule, Simulation};
use chsurf_core::{CellId, LatticeSpec, ScenarioField, Vec3};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cube_lattice(level: u32) -> LatticeSpec {
    LatticeSpec::from_level(
        Vec3::new(-5.0 / 3.0, -5.0 / 3.0, -5.0 / 3.0),
        [10.0 / 3.0; 3],
        level,
    )
    .unwrap()
}

fn stationary_sphere_surface(level: u32) -> (LatticeSpec, CutSurface) {
    let field = ScenarioField::moving_sphere(Vec3::zeros(), Vec3::zeros());
    let lattice = cube_lattice(level);
    let dls = DiscreteLevelSet::new(&field, &lattice, 0.0);
    let band = select_band(&lattice, &dls, 0.0).unwrap();
    let mut surface = extract_surface(&band, &dls);
    surface_quadrature(&mut surface, 4, &dls).unwrap();
    (lattice, surface)
}

fn verdict(name: &str, pass: bool, detail: &str) {
    println!("{name}: {} -- {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "{name} failed: {detail}");
}

/// Geometric accuracy of the extracted surface: both the linearized distance
/// to the exact sphere and the total-area defect must shrink at second order
/// over levels 2..4.
#[test]
fn criterion_1_geometric_accuracy() {
    let field = ScenarioField::moving_sphere(Vec3::zeros(), Vec3::zeros());
    let exact_area = 4.0 * std::f64::consts::PI;
    let mut hs = Vec::new();
    let mut dist_errs = Vec::new();
    let mut area_errs = Vec::new();
    for level in 2..=4 {
        let (lattice, surface) = stationary_sphere_surface(level);
        let mut worst = 0.0f64;
        for x in &surface.quad_points {
            let d = field.phi(*x, 0.0).unwrap().abs() / field.grad_phi(*x, 0.0).unwrap().norm();
            worst = worst.max(d);
        }
        hs.push(lattice.h);
        dist_errs.push(worst);
        area_errs.push((surface.area() - exact_area).abs());
    }
    let dist_rate = fit_rate(&hs, &dist_errs);
    let area_rate = fit_rate(&hs, &area_errs);
    verdict(
        "criterion 1 (geometric accuracy)",
        dist_rate >= 1.8 && area_rate >= 1.8,
        &format!(
            "distance rate {dist_rate:.2} (>= 1.8), area rate {area_rate:.2} (>= 1.8); \
             dist {dist_errs:?}, area {area_errs:?}"
        ),
    );
}

/// Space-time accuracy against the synthetic rigid-sphere solution with the
/// coupled step law `dt = 4^(1-l)/10` over levels 1..3.
#[test]
fn criterion_2_synthetic_solution_rates() {
    let table = scenarios::convergence_test1b(1..=3).unwrap();
    print!("{}", table.render());
    for r in &table.levels {
        println!("  level {} ran {} steps", r.level, r.steps);
    }
    let pass =
        table.rate_l2l2_c >= 1.7 && table.rate_l2l2_mu >= 1.7 && table.rate_l2h1_c >= 0.8;
    verdict(
        "criterion 2 (synthetic-solution rates, levels 1..3)",
        pass,
        &format!(
            "L2L2(c) {:.2} (>= 1.7), L2L2(mu) {:.2} (>= 1.7), L2H1(c) {:.2} (>= 0.8)",
            table.rate_l2l2_c, table.rate_l2l2_mu, table.rate_l2h1_c
        ),
    );
}

/// Asymptotic-range diagnostic for the same benchmark: one level deeper,
/// coarsest level dropped. Not gated; printed to document the trend.
#[test]
fn criterion_2_supplement_rates_levels_2_to_4() {
    let table = scenarios::convergence_test1b(2..=4).unwrap();
    print!("{}", table.render());
    println!(
        "criterion 2 supplement (levels 2..4): L2L2(c) {:.2}, L2L2(mu) {:.2}, L2H1(c) {:.2}",
        table.rate_l2l2_c, table.rate_l2l2_mu, table.rate_l2h1_c
    );
}

/// Conservation on a stationary surface: total mass is preserved to solver
/// accuracy and the Lyapunov energy never increases beyond solver noise.
#[test]
fn criterion_3_stationary_conservation() {
    let mut cfg = preset("moving_sphere", Some(3)).unwrap();
    cfg.velocity = Vec3::zeros();
    cfg.angular = Vec3::zeros();
    cfg.box_min = Vec3::new(-5.0 / 3.0, -5.0 / 3.0, -5.0 / 3.0);
    cfg.box_max = Vec3::new(5.0 / 3.0, 5.0 / 3.0, 5.0 / 3.0);
    cfg.ic = InitialCondition::Cosine { base: 0.5, amplitude: 0.05 };
    cfg.schedule = Schedule::uniform(0.0, 1.0, 0.01).unwrap();
    let mut sim = Simulation::new(cfg.setup().unwrap()).unwrap();
    sim.run(None).unwrap();
    let records = &sim.records;
    assert_eq!(records.len(), 101);
    let tol = cfg.solver.tol;
    let area = sim.surface().area();
    let mass0 = records[0].mass;
    let worst_drift = records
        .iter()
        .map(|r| (r.mass - mass0).abs())
        .fold(0.0f64, f64::max);
    let worst_rise = records
        .windows(2)
        .map(|w| w[1].energy - w[0].energy)
        .fold(f64::NEG_INFINITY, f64::max);
    let pass = worst_drift <= 10.0 * tol * area && worst_rise <= 10.0 * tol;
    verdict(
        "criterion 3 (stationary conservation, 100 steps)",
        pass,
        &format!(
            "mass drift {worst_drift:.2e} (<= {:.2e}), worst energy rise {worst_rise:.2e} (<= {:.2e})",
            10.0 * tol * area,
            10.0 * tol
        ),
    );
}

/// Energy boundedness on the oscillating ellipsoid: bounded energy with no
/// step-to-step growth beyond `1 + 10 dt`, and level-3/level-4 energy curves
/// agreeing in sup norm.
#[test]
fn criterion_4_energy_boundedness_moving_surface() {
    let run = |level: u32| -> Vec<f64> {
        let cfg = preset("test2a", Some(level)).unwrap();
        let mut sim = Simulation::new(cfg.setup().unwrap()).unwrap();
        sim.run(None).unwrap();
        sim.records.iter().map(|r| r.energy).collect()
    };
    let e3 = run(3);
    let e4 = run(4);
    assert_eq!(e3.len(), 101);
    assert_eq!(e4.len(), 101);
    let dt = 0.01;
    let finite = e3.iter().chain(&e4).all(|e| e.is_finite());
    let growth = e3
        .windows(2)
        .map(|w| w[1] / w[0])
        .fold(0.0f64, f64::max);
    let sup_diff = e3
        .iter()
        .zip(&e4)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    let sup_ref = e4.iter().cloned().fold(0.0f64, f64::max);
    let rel = sup_diff / sup_ref;
    let pass = finite && growth <= 1.0 + 10.0 * dt && rel <= 0.05;
    verdict(
        "criterion 4 (moving-surface energy bound)",
        pass,
        &format!(
            "finite={finite}, max growth factor {growth:.4} (<= {:.2}), \
             level-3/4 sup difference {rel:.3} (<= 0.05)",
            1.0 + 10.0 * dt
        ),
    );
}

/// Pure phases and the unstable mixture value are fixed points of the step.
#[test]
fn criterion_5_constant_state_fixed_point() {
    let mut detail = String::new();
    let mut pass = true;
    for c0 in [0.0, 0.5, 1.0] {
        let mut cfg = preset("moving_sphere", Some(3)).unwrap();
        cfg.velocity = Vec3::zeros();
        cfg.angular = Vec3::zeros();
        cfg.box_min = Vec3::new(-5.0 / 3.0, -5.0 / 3.0, -5.0 / 3.0);
        cfg.box_max = Vec3::new(5.0 / 3.0, 5.0 / 3.0, 5.0 / 3.0);
        cfg.ic = InitialCondition::Constant { value: c0 };
        cfg.schedule = Schedule::uniform(0.0, 0.1, 0.01).unwrap();
        let tol = cfg.solver.tol;
        let mut sim = Simulation::new(cfg.setup().unwrap()).unwrap();
        sim.run(None).unwrap();
        let dev = sim
            .state()
            .c
            .iter()
            .map(|v| (v - c0).abs())
            .fold(0.0f64, f64::max);
        detail.push_str(&format!("c0={c0}: |c-c0|_inf {dev:.2e}; "));
        pass &= dev <= 100.0 * tol;
    }
    verdict(
        "criterion 5 (constant-state fixed point, 10 steps)",
        pass,
        &format!("{detail}(<= 100 x solver tol)"),
    );
}

/// Cut-position robustness: iteration counts of the fixed-preconditioner
/// solve stay within a factor of two over random sub-cell sphere offsets.
#[test]
fn criterion_6_cut_position_robustness() {
    let iters = scenarios::sweep_offsets(20, 3, 12345).unwrap();
    let max = *iters.iter().max().unwrap();
    let min = *iters.iter().min().unwrap();
    let ratio = max as f64 / min.max(1) as f64;
    verdict(
        "criterion 6 (cut-position robustness, 20 offsets)",
        ratio <= 2.0,
        &format!("iterations {iters:?}, max/min {ratio:.2} (<= 2)"),
    );
}

/// The slow collision runs through the topological merge with every step
/// passing the band-inclusion check, no solver failure, and bounded mass
/// drift.
#[test]
fn criterion_7_topological_change() {
    let mut cfg = preset("collide_steady", Some(4)).unwrap();
    cfg.schedule = Schedule::uniform(0.0, 0.4, 1e-3).unwrap();
    let mut sim = Simulation::new(cfg.setup().unwrap()).unwrap();
    // Any inclusion violation or solver failure aborts the run.
    sim.run(None).unwrap();
    let records = &sim.records;
    assert_eq!(records.len(), 401);
    let margin_ok = records.iter().skip(1).all(|r| r.inclusion_margin > 0.0);
    let mass0 = records[0].mass;
    let drift = records
        .iter()
        .map(|r| (r.mass - mass0).abs() / mass0.abs())
        .fold(0.0f64, f64::max);
    let pass = margin_ok && drift <= 0.02;
    verdict(
        "criterion 7 (topological change, merge at t ~ 0.24)",
        pass,
        &format!(
            "400 steps through the merge, margins positive: {margin_ok}, mass drift {:.3}% (<= 2%)",
            drift * 100.0
        ),
    );
}

/// Oracle equivalence: the synthetic source against its finite-difference
/// oracle, one assembled element against closed forms, and the iterative
/// solver against a dense factorization.
#[test]
fn criterion_8_oracle_equivalence() {
    // (a) Manufactured forcing vs the nested central-difference oracle.
    let ms = ManufacturedSolution::new(
        Vec3::new(10.0, 0.0, 0.0),
        Vec3::new(10.0, 0.0, 0.0),
        0.1,
        1.0,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(88);
    let mut pairs = Vec::with_capacity(200);
    for _ in 0..200 {
        let t = rng.gen_range(0.0..0.1);
        let center = Vec3::new(10.0, 0.0, 0.0) * t;
        let dir = loop {
            let d = Vec3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            if d.norm() > 0.1 {
                break d.normalize();
            }
        };
        let x = center + dir;
        pairs.push((ms.forcing(x, t), ms.forcing_fd_oracle(x, t)));
    }
    // The source crosses zero, so near-zero samples are measured against the
    // field scale rather than their own magnitude.
    let scale =
        (pairs.iter().map(|(_, g)| g * g).sum::<f64>() / pairs.len() as f64).sqrt();
    let mut worst_g = 0.0f64;
    for (g, g_fd) in &pairs {
        worst_g = worst_g.max((g - g_fd).abs() / g_fd.abs().max(0.1 * scale));
    }
    let g_ok = worst_g <= 1e-5;

    // (b) One assembled element against symbolic integration of the forms.
    let elem_dev = single_element_deviation();
    let elem_ok = elem_dev <= 1e-12;

    // (c) GMRES vs dense LU on a small random system and on one real
    // assembled step system under 2000 unknowns.
    let mut worst_solver = 0.0f64;
    {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 50;
        let mut trips = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i == j || rng.gen::<f64>() < 0.15 {
                    let v = rng.gen_range(-1.0..1.0);
                    trips.push((i, j, v));
                    trips.push((j, i, v));
                }
            }
        }
        for i in 0..n {
            trips.push((i, i, 6.0));
        }
        let a = chsurf_core::SparseMatrix::from_triplets(n, n, trips);
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let opts = SolverOptions { tol: 1e-10, ..Default::default() };
        let (x, rep) = solve(&a, &b, &opts).unwrap();
        assert!(rep.converged);
        let xd = solve_dense(&a, &b).unwrap();
        let num: f64 = x.iter().zip(&xd).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
        let den: f64 = xd.iter().map(|v| v * v).sum::<f64>().sqrt();
        worst_solver = worst_solver.max(num / den);
    }
    {
        // Small real system: coarse stationary sphere, one step matrix.
        let field = ScenarioField::moving_sphere(Vec3::zeros(), Vec3::zeros());
        let lattice = cube_lattice(1);
        let dls = DiscreteLevelSet::new(&field, &lattice, 0.0);
        let band = select_band(&lattice, &dls, 0.0).unwrap();
        let mut surface = extract_surface(&band, &dls);
        surface_quadrature(&mut surface, 4, &dls).unwrap();
        let params = ModelParams::new(0.1, 1.0, 0.01, lattice.h).unwrap();
        let u = vec![Vec3::zeros(); surface.quad_points.len()];
        let normals: Vec<Option<Vec3>> = band
            .cells
            .iter()
            .map(|cell| {
                let v = band.lattice.cell_vertices(*cell).unwrap();
                let bc = (v[0] + v[1] + v[2] + v[3]) / 4.0;
                field.grad_phi(bc, 0.0).ok().map(|g| g / g.norm())
            })
            .collect();
        let prev = |_x: Vec3| Ok((0.4, Vec3::zeros()));
        let sys = assemble(&band, &surface, &params, &u, &normals, &prev, None).unwrap();
        let (a, b) = sys.swapped_rows();
        assert!(a.n_rows <= 2000, "oracle system too large: {}", a.n_rows);
        let opts = SolverOptions { tol: 1e-10, ..Default::default() };
        let (x, rep) = solve(&a, &b, &opts).unwrap();
        assert!(rep.converged);
        let xd = solve_dense(&a, &b).unwrap();
        let num: f64 = x.iter().zip(&xd).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
        let den: f64 = xd.iter().map(|v| v * v).sum::<f64>().sqrt();
        worst_solver = worst_solver.max(num / den);
    }
    let solver_ok = worst_solver <= 1e-8;

    verdict(
        "criterion 8 (oracle equivalence)",
        g_ok && elem_ok && solver_ok,
        &format!(
            "forcing vs FD rel {worst_g:.2e} (<= 1e-5), element vs symbolic {elem_dev:.2e} \
             (<= 1e-12), solver vs dense rel {worst_solver:.2e} (<= 1e-8)"
        ),
    );
}

/// Largest entrywise deviation between one assembled element and the closed
/// forms of the integrals (constant data, so every form is exact).
fn single_element_deviation() -> f64 {
    let lat = LatticeSpec::with_mesh_size(Vec3::zeros(), [1.0, 1.0, 1.0], 0, 1.0).unwrap();
    let cell = CellId { cube: [0, 0, 0], tet: 0 };
    let band = NarrowBand::from_parts(lat.clone(), 0.0, 0.0, vec![cell], vec![true]);
    let tri = SurfaceTriangle {
        v: [
            Vec3::new(0.2, 0.1, 0.05),
            Vec3::new(0.6, 0.3, 0.1),
            Vec3::new(0.3, 0.25, 0.2),
        ],
        parent: cell,
    };
    let area = tri.area();
    let nrm = Vec3::new(0.3, -0.5, 0.8).normalize();
    let rule = chsurf_core::cutgeom::triangle_rule(4).unwrap();
    let mut surface = CutSurface {
        time: 0.0,
        triangles: vec![tri.clone()],
        quad_degree: 4,
        quad_points: Vec::new(),
        quad_weights: Vec::new(),
        quad_normals: Vec::new(),
        quad_triangle: Vec::new(),
    };
    for (b, w) in rule {
        let x = tri.v[0] * b[0] + tri.v[1] * b[1] + tri.v[2] * b[2];
        surface.quad_points.push(x);
        surface.quad_weights.push(area * w);
        surface.quad_normals.push(nrm);
        surface.quad_triangle.push(0);
    }
    let params = ModelParams {
        epsilon: 0.1,
        sigma: 1.0,
        beta_s: 10.0,
        rho_c: 2.0,
        rho_mu: 3.0,
        rho: 1.3,
        dt: 0.05,
    };
    let u = Vec3::new(0.7, -0.2, 0.4);
    let u_at_qp = vec![u; surface.quad_points.len()];
    let c_prev = 0.3;
    let prev = move |_x: Vec3| Ok((c_prev, Vec3::zeros()));
    let sys = assemble(&band, &surface, &params, &u_at_qp, &[Some(nrm)], &prev, None).unwrap();

    let exact_affine_product = |f: [f64; 3], g: [f64; 3]| -> f64 {
        let dot: f64 = (0..3).map(|k| f[k] * g[k]).sum();
        let sf: f64 = f.iter().sum();
        let sg: f64 = g.iter().sum();
        area / 12.0 * (dot + sf * sg)
    };
    let grads = lat.shape_gradients(cell);
    let shape_at = |a: usize| -> [f64; 3] {
        [
            lat.barycentric(cell, tri.v[0])[a],
            lat.barycentric(cell, tri.v[1])[a],
            lat.barycentric(cell, tri.v[2])[a],
        ]
    };
    let vol = lat.cell_volume();
    let mob = mobility(c_prev, params.sigma);
    let (_, df, _) = potential(c_prev);
    let nodes = lat.cell_nodes(cell);
    let n = band.node_count();
    let get = |i: usize, j: usize| -> f64 {
        let (cols, vals) = sys.matrix.row(i);
        vals[cols.binary_search(&j).unwrap()]
    };
    let mut dev = 0.0f64;
    let scale = |x: f64, y: f64| (x - y).abs() / y.abs().max(1.0);
    for a in 0..4 {
        let ga = band.node_position(&nodes[a]).unwrap();
        let fa = shape_at(a);
        let ia: f64 = area / 3.0 * fa.iter().sum::<f64>();
        for b in 0..4 {
            let gb = band.node_position(&nodes[b]).unwrap();
            let fb = shape_at(b);
            let mass = exact_affine_product(fa, fb);
            let pga = tangential_gradient(grads[a], nrm);
            let pgb = tangential_gradient(grads[b], nrm);
            let stab = vol * nrm.dot(&grads[a]) * nrm.dot(&grads[b]);
            let cc = params.rho / params.dt * mass + params.rho * u.dot(&grads[b]) * ia;
            let cmu = mob * pga.dot(&pgb) * area + params.rho_mu * stab;
            let muc =
                -params.beta_s * mass - params.epsilon * pga.dot(&pgb) * area - params.rho_c * stab;
            let mumu = mass;
            dev = dev.max(scale(get(ga, gb), cc));
            dev = dev.max(scale(get(ga, gb + n), cmu));
            dev = dev.max(scale(get(ga + n, gb), muc));
            dev = dev.max(scale(get(ga + n, gb + n), mumu));
        }
        let rhs_c = params.rho / params.dt * c_prev * ia;
        let rhs_mu = (df / params.epsilon - params.beta_s * c_prev) * ia;
        dev = dev.max(scale(sys.rhs[ga], rhs_c));
        dev = dev.max(scale(sys.rhs[ga + n], rhs_mu));
    }
    dev
}

/// Every narrow-band step of the paper scenarios must keep the new surface
/// inside the previous band; this is asserted inside `Simulation::step`, so
/// a short slice of each scenario doubles as the runtime check.
#[test]
fn inclusion_holds_across_scenario_catalog() {
    for (name, level, steps) in [
        ("test1a", 2u32, 5usize),
        ("test2a", 2, 5),
        ("test2c", 2, 5),
        ("collide_slow", 2, 5),
        ("split_rotated", 2, 5),
        ("split_horizontal", 2, 5),
    ] {
        let mut cfg = preset(name, Some(level)).unwrap();
        let t0 = cfg.schedule.t_start();
        let dt0 = cfg.schedule.dt_at(t0);
        cfg.schedule = Schedule::uniform(t0, t0 + steps as f64 * dt0, dt0).unwrap();
        let mut sim = Simulation::new(cfg.setup().unwrap())
            .unwrap_or_else(|e| panic!("{name}: {e}"));
        sim.run(None).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert!(
            sim.records.iter().skip(1).all(|r| r.inclusion_margin > 0.0),
            "{name}: nonpositive inclusion margin"
        );
    }
    println!("scenario catalog slices: PASS -- inclusion margin positive at every step");
}
