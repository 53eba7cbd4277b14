// Scratch: compare preconditioning strategies on one assembled step system.
use chsurf_core::assembly::{assemble, evaluate_prev, ModelParams};
use chsurf_core::cutgeom::{extract_surface, select_band, surface_quadrature};
use chsurf_core::levelset::DiscreteLevelSet;
use chsurf_core::scenarios::preset;
use chsurf_core::solver::{solve, Preconditioner, SolverOptions, SparseMatrix};
use chsurf_core::timeloop::{initialize, stabilization_normals};
use chsurf_core::Vec3;
use std::time::Instant;

fn main() {
    let name = std::env::args().nth(2).unwrap_or_else(|| "test1b".into());
    let level: u32 = std::env::args().nth(1).unwrap().parse().unwrap();
    let cfg = preset(&name, Some(level)).unwrap();
    let setup = cfg.setup().unwrap();
    let field = setup.field.clone();
    let lattice = setup.lattice.clone();
    let t0s = cfg.schedule.t_start();
    let dt = cfg.schedule.dt_at(t0s);
    let dls = DiscreteLevelSet::new(&field, &lattice, t0s);
    let band = select_band(&lattice, &dls, 2.0 * dt).unwrap();
    let mut surface = extract_surface(&band, &dls);
    surface_quadrature(&mut surface, 4, &dls).unwrap();
    println!("cells={} cut={} nodes={}", band.cell_count(), band.cut_cell_count(), band.node_count());
    let params = ModelParams::new(cfg.epsilon, cfg.sigma, dt, lattice.h).unwrap();
    let ms = chsurf_core::manufactured::ManufacturedSolution::new(
        Vec3::new(10.0, 0.0, 0.0), Vec3::new(10.0, 0.0, 0.0), 0.1, 1.0);
    let state = initialize(&band, &cfg.ic, cfg.epsilon, t0s, Some(&ms)).unwrap();
    let u: Vec<Vec3> = surface.quad_points.iter().map(|x| field.material_velocity(*x, t0s).unwrap()).collect();
    let normals = stabilization_normals(&field, &band, t0s);
    let prev = |x: Vec3| evaluate_prev(&state, &band, x);
    let forcing = |x: Vec3| ms.forcing(x, t0s);
    let use_forcing = name == "test1b";
    let t0 = Instant::now();
    let sys = assemble(&band, &surface, &params, &u, &normals, &prev,
        if use_forcing { Some(&forcing) } else { None }).unwrap();
    println!("assemble: {:?}, nnz={}", t0.elapsed(), sys.matrix.nnz());
    let (a, b) = sys.swapped_rows();

    // Plain ILU0 on the swapped system.
    let t0 = Instant::now();
    let opts = SolverOptions::default();
    let (_, rep) = solve(&a, &b, &opts).unwrap();
    println!("plain ilu0:   iters={} resid={:.1e} time={:?}", rep.iterations, rep.relative_residual, t0.elapsed());

    // Symmetric equilibration by row max, then ILU0.
    let n = a.n_rows;
    let mut s = vec![1.0f64; n];
    for i in 0..n {
        let (_, vals) = a.row(i);
        let m = vals.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if m > 0.0 { s[i] = 1.0 / m.sqrt(); }
    }
    let mut a2 = a.clone();
    for i in 0..n {
        let r = a2.row_offsets[i]..a2.row_offsets[i + 1];
        for k in r {
            a2.values[k] *= s[i] * s[a2.col_indices[k]];
        }
    }
    let b2: Vec<f64> = (0..n).map(|i| b[i] * s[i]).collect();
    let t0 = Instant::now();
    let (y, rep) = solve(&a2, &b2, &opts).unwrap();
    let x: Vec<f64> = (0..n).map(|i| y[i] * s[i]).collect();
    let mut r = a.matvec_alloc(&x);
    for i in 0..n { r[i] = b[i] - r[i]; }
    let tn = r.iter().map(|v| v * v).sum::<f64>().sqrt() / b.iter().map(|v| v * v).sum::<f64>().sqrt();
    println!("equil ilu0:   iters={} scaled_resid={:.1e} true_resid={:.1e} time={:?}", rep.iterations, rep.relative_residual, tn, t0.elapsed());

    // ILUT.
    for (drop, fill) in [(1e-3, 40usize), (1e-2, 20), (1e-4, 60)] {
        let t0 = Instant::now();
        let opts = SolverOptions { preconditioner: Preconditioner::Ilut, ilut_drop_tol: drop, ilut_max_fill: fill, ..Default::default() };
        let (_, rep) = solve(&a, &b, &opts).unwrap();
        println!("ilut({drop:.0e},{fill}): iters={} resid={:.1e} time={:?}", rep.iterations, rep.relative_residual, t0.elapsed());
    }

    // mu-column scaling by beta_s, then cheap ILUT.
    {
        let beta = 1.0 / cfg.epsilon;
        let nn = sys.n_nodes;
        let mut a3 = a.clone();
        for i in 0..a3.n_rows {
            let r = a3.row_offsets[i]..a3.row_offsets[i + 1];
            for k in r {
                if a3.col_indices[k] >= nn {
                    a3.values[k] *= beta;
                }
            }
        }
        for (drop, fill) in [(1e-3, 40usize), (3e-4, 40), (1e-4, 60)] {
            let t0 = Instant::now();
            let opts = SolverOptions { preconditioner: Preconditioner::Ilut, ilut_drop_tol: drop, ilut_max_fill: fill, ..Default::default() };
            match solve(&a3, &b, &opts) {
                Ok((_, rep)) => println!("mu-scaled ilut({drop:.0e},{fill}): iters={} resid={:.1e} time={:?}", rep.iterations, rep.relative_residual, t0.elapsed()),
                Err(e) => println!("mu-scaled ilut({drop:.0e},{fill}): error {e}"),
            }
        }
    }

    // Jacobi for reference.
    let t0 = Instant::now();
    let opts = SolverOptions { preconditioner: Preconditioner::Jacobi, ..Default::default() };
    let (_, rep) = solve(&a, &b, &opts).unwrap();
    println!("jacobi:       iters={} resid={:.1e} time={:?}", rep.iterations, rep.relative_residual, t0.elapsed());
    let _ = SparseMatrix::identity(1);
}
// (ilut timing appended in main via second binary run)
