// Scratch diagnostic: test1b level with custom dt.
use chsurf_core::scenarios::preset;
use chsurf_core::timeloop::{ErrorAccumulator, Schedule, Simulation};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let level: u32 = args[1].parse().unwrap();
    let dt: f64 = args[2].parse().unwrap();
    let t_end: f64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(0.1);
    let mut cfg = preset("test1b", Some(level)).unwrap();
    cfg.schedule = Schedule::uniform(0.0, t_end, dt).unwrap();
    let mut sim = Simulation::new(cfg.setup().unwrap()).unwrap();
    let exact = sim.manufactured.clone().unwrap();
    let mut acc = ErrorAccumulator::default();
    while !sim.is_done() {
        let r = sim.step().unwrap();
        acc.add_step(r.dt, sim.state(), sim.band(), sim.surface(), &exact);
    }
    let n = acc.finalize();
    println!(
        "level {level} dt {dt:.2e}: L2L2(c) {:.4e}  L2L2(mu) {:.4e}  L2H1(c) {:.4e}  L2H1(mu) {:.4e}",
        n.l2l2_c, n.l2l2_mu, n.l2h1_c, n.l2h1_mu
    );
}
