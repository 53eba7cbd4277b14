// Scratch: per-step timing breakdown for one scenario level.
use chsurf_core::scenarios::preset;
use chsurf_core::timeloop::Simulation;
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let name = args[1].clone();
    let level: u32 = args[2].parse().unwrap();
    let steps: usize = args[3].parse().unwrap();
    let mut cfg = preset(&name, Some(level)).unwrap();
    if let Some(prec) = std::env::args().nth(4) {
        cfg.solver.preconditioner = prec.parse().unwrap();
    }
    if let Some(r) = std::env::args().nth(5) {
        cfg.solver.restart = r.parse().unwrap();
    }
    let t0 = Instant::now();
    let mut sim = Simulation::new(cfg.setup().unwrap()).unwrap();
    println!("init: {:?}", t0.elapsed());
    for _ in 0..steps {
        let t = Instant::now();
        let r = sim.step().unwrap();
        println!(
            "t={:.4} dt={:.1e} cells={} nodes={} iters={} resid={:.1e} margin={:.2e} wall={:?}",
            r.time, r.dt, r.band_cells, r.active_nodes, r.gmres_iters, r.residual,
            r.inclusion_margin, t.elapsed()
        );
    }
}
