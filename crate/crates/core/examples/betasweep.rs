// Scratch: effect of the stabilization coefficient on the benchmark rates.
use chsurf_core::scenarios::{fit_rate, preset};
use chsurf_core::timeloop::{ErrorAccumulator, Simulation};

fn main() {
    for beta in [10.0, 7.0, 5.5] {
        let mut hs = Vec::new();
        let mut ec = Vec::new();
        let mut emu = Vec::new();
        let mut eh1 = Vec::new();
        for level in 1..=3 {
            let mut cfg = preset("test1b", Some(level)).unwrap();
            cfg.beta_s = Some(beta);
            let setup = cfg.setup().unwrap();
            hs.push(setup.lattice.h);
            let mut sim = Simulation::new(setup).unwrap();
            let exact = sim.manufactured.clone().unwrap();
            let mut acc = ErrorAccumulator::default();
            while !sim.is_done() {
                let r = sim.step().unwrap();
                acc.add_step(r.dt, sim.state(), sim.band(), sim.surface(), &exact);
            }
            let n = acc.finalize();
            ec.push(n.l2l2_c);
            emu.push(n.l2l2_mu);
            eh1.push(n.l2h1_c);
        }
        println!(
            "beta_s={beta}: errors c={ec:?} mu={emu:?} | rates c={:.2} mu={:.2} h1c={:.2}",
            fit_rate(&hs, &ec),
            fit_rate(&hs, &emu),
            fit_rate(&hs, &eh1)
        );
    }
}
