// Scratch: forensics on the post-merge step system.
use chsurf_core::assembly::{assemble, evaluate_prev, ModelParams};
use chsurf_core::cutgeom::{check_inclusion, extract_surface, select_band, surface_quadrature};
use chsurf_core::levelset::DiscreteLevelSet;
use chsurf_core::scenarios::preset;
use chsurf_core::solver::{solve, Preconditioner, SolverOptions};
use chsurf_core::timeloop::{stabilization_normals, Schedule, Simulation};
use chsurf_core::Vec3;

fn main() {
    let mut cfg = preset("collide_steady", Some(4)).unwrap();
    cfg.schedule = Schedule::uniform(0.238, 0.240, 1e-3).unwrap();
    let mut sim = Simulation::new(cfg.setup().unwrap()).unwrap();
    while !sim.is_done() {
        sim.step().unwrap();
    }
    // Reproduce the failing t = 0.241 step by hand.
    let field = cfg.field().unwrap();
    let lattice = cfg.lattice().unwrap();
    let t = 0.241;
    let dt = 1e-3;
    let dls = DiscreteLevelSet::new(&field, &lattice, t);
    let band = select_band(&lattice, &dls, 2.2e-3).unwrap();
    let mut surface = extract_surface(&band, &dls);
    surface_quadrature(&mut surface, 4, &dls).unwrap();
    let rep = check_inclusion(sim.band(), &surface);
    println!("inclusion ok={} margin={:.2e}", rep.ok, rep.margin);
    let params = ModelParams::new(0.01, 1.0, dt, lattice.h).unwrap();
    let state = sim.state().clone();
    let old_band = sim.band().clone();
    let prev = move |x: Vec3| evaluate_prev(&state, &old_band, x);
    let normals = stabilization_normals(&field, &band, t);

    for cap in [f64::INFINITY, 20.0] {
        let u: Vec<Vec3> = surface
            .quad_points
            .iter()
            .map(|x| {
                let u = field.material_velocity(*x, t).unwrap();
                if u.norm() > cap {
                    u * (cap / u.norm())
                } else {
                    u
                }
            })
            .collect();
        let sys = assemble(&band, &surface, &params, &u, &normals, &prev, None).unwrap();
        let (a, b) = sys.swapped_rows();
        // Matrix stats.
        let mut dmin = f64::INFINITY;
        let mut dmax = 0.0f64;
        let mut rmin = f64::INFINITY;
        let mut rmax = 0.0f64;
        for i in 0..a.n_rows {
            let (cols, vals) = a.row(i);
            let rn = vals.iter().map(|v| v * v).sum::<f64>().sqrt();
            rmin = rmin.min(rn);
            rmax = rmax.max(rn);
            if let Ok(k) = cols.binary_search(&i) {
                dmin = dmin.min(vals[k].abs());
                dmax = dmax.max(vals[k].abs());
            }
        }
        println!("cap={cap:.1e}: diag range [{dmin:.2e}, {dmax:.2e}], row norms [{rmin:.2e}, {rmax:.2e}]");
        for (name, opts) in [
            ("ilut", SolverOptions { preconditioner: Preconditioner::Ilut, ..Default::default() }),
            ("jacobi", SolverOptions { preconditioner: Preconditioner::Jacobi, restart: 30, ..Default::default() }),
        ] {
            let t0 = std::time::Instant::now();
            match solve(&a, &b, &opts) {
                Ok((_, rep)) => println!(
                    "  {name}: iters={} resid={:.2e} converged={} ({:?})",
                    rep.iterations, rep.relative_residual, rep.converged, t0.elapsed()
                ),
                Err(e) => println!("  {name}: {e}"),
            }
        }
    }
}
