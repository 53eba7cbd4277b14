//! Time marching: rebuild the geometry at each step, verify the band
//! inclusion condition, assemble and solve, and track diagnostics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::{self, assemble, evaluate_prev, ModelParams, SystemState};
use crate::cutgeom::{
    band_width, check_inclusion, extract_surface, select_band, surface_quadrature, CutSurface,
    NarrowBand,
};
use crate::error::{Error, Result};
use crate::lattice::LatticeSpec;
use crate::levelset::{DiscreteLevelSet, ScenarioField};
use crate::manufactured::ManufacturedSolution;
use crate::solver::{self, Preconditioner, SolverOptions};
use crate::Vec3;

/// Piecewise-constant time step plan.
#[derive(Debug, Clone, PartialEq)]
pub struct Phase {
    pub t_start: f64,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub phases: Vec<Phase>,
    pub t_end: f64,
}

impl Schedule {
    pub fn uniform(t_start: f64, t_end: f64, dt: f64) -> Result<Self> {
        Self::new(vec![Phase { t_start, dt }], t_end)
    }

    pub fn new(phases: Vec<Phase>, t_end: f64) -> Result<Self> {
        if phases.is_empty() {
            return Err(Error::InvalidParameter("schedule needs at least one phase".into()));
        }
        if phases.iter().any(|p| p.dt <= 0.0) {
            return Err(Error::InvalidParameter("phase time steps must be positive".into()));
        }
        if phases.windows(2).any(|w| w[1].t_start <= w[0].t_start) {
            return Err(Error::InvalidParameter("phases must be strictly ordered".into()));
        }
        if t_end <= phases.last().unwrap().t_start {
            return Err(Error::InvalidParameter("t_end must exceed the last phase start".into()));
        }
        Ok(Self { phases, t_end })
    }

    pub fn t_start(&self) -> f64 {
        self.phases[0].t_start
    }

    pub fn dt_at(&self, t: f64) -> f64 {
        let mut dt = self.phases[0].dt;
        for p in &self.phases {
            if p.t_start <= t + 1e-12 {
                dt = p.dt;
            }
        }
        dt
    }

    /// The discrete time levels, snapped onto phase boundaries and `t_end`.
    pub fn time_grid(&self) -> Vec<f64> {
        let mut times = vec![self.t_start()];
        let mut t = self.t_start();
        while t < self.t_end - 1e-12 {
            let dt = self.dt_at(t);
            let mut tn = t + dt;
            if let Some(next) = self.phases.iter().find(|p| p.t_start > t + 1e-12) {
                if tn > next.t_start - 0.5 * dt {
                    tn = next.t_start;
                }
            }
            if tn > self.t_end - 0.5 * dt {
                tn = self.t_end;
            }
            times.push(tn);
            t = tn;
        }
        times
    }
}

/// Initial nodal concentration.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    /// Steady planar interface `1/2 (1 + tanh(delta + x_i / (2 sqrt2 eps)))`.
    Profile { axis: usize, delta: f64 },
    /// The same profile along an in-plane direction rotated by `angle` in
    /// the `x1 x2` plane.
    RotatedProfile { angle: f64, delta: f64 },
    /// Independent uniform draws per node.
    Random { seed: u64 },
    Constant { value: f64 },
    /// `base + amp cos(2 pi x1) cos(2 pi x2) cos(2 pi x3)`.
    Cosine { base: f64, amplitude: f64 },
    /// Split by the sign of `x1` (left: `neg`, right: `pos`).
    Piecewise { neg: Box<InitialCondition>, pos: Box<InitialCondition> },
    /// The synthetic exact solution at the start time.
    Manufactured,
}

impl InitialCondition {
    fn value(
        &self,
        x: Vec3,
        uniform_draw: f64,
        epsilon: f64,
        t0: f64,
        ms: Option<&ManufacturedSolution>,
    ) -> Result<f64> {
        let profile = |s: f64, delta: f64| {
            0.5 * (1.0 + (delta + s / (2.0 * std::f64::consts::SQRT_2 * epsilon)).tanh())
        };
        Ok(match self {
            InitialCondition::Profile { axis, delta } => profile(x[*axis], *delta),
            InitialCondition::RotatedProfile { angle, delta } => {
                let s = -angle.sin() * x.x + angle.cos() * x.y;
                profile(s, *delta)
            }
            InitialCondition::Random { .. } => uniform_draw,
            InitialCondition::Constant { value } => *value,
            InitialCondition::Cosine { base, amplitude } => {
                let tau = 2.0 * std::f64::consts::PI;
                base + amplitude * (tau * x.x).cos() * (tau * x.y).cos() * (tau * x.z).cos()
            }
            InitialCondition::Piecewise { neg, pos } => {
                if x.x <= 0.0 {
                    neg.value(x, uniform_draw, epsilon, t0, ms)?
                } else {
                    pos.value(x, uniform_draw, epsilon, t0, ms)?
                }
            }
            InitialCondition::Manufactured => {
                let ms = ms.ok_or_else(|| {
                    Error::InvalidParameter(
                        "manufactured initial data needs a rigid-sphere scenario".into(),
                    )
                })?;
                ms.c_exact(x, t0)
            }
        })
    }

    fn seed(&self) -> Option<u64> {
        match self {
            InitialCondition::Random { seed } => Some(*seed),
            InitialCondition::Piecewise { neg, pos } => neg.seed().or(pos.seed()),
            _ => None,
        }
    }
}

/// Per-step diagnostics; one CSV row each.
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub time: f64,
    pub dt: f64,
    pub energy: f64,
    pub mass: f64,
    pub band_cells: usize,
    pub active_nodes: usize,
    pub gmres_iters: usize,
    pub residual: f64,
    pub inclusion_margin: f64,
}

/// Everything a run needs besides the outputs.
#[derive(Debug, Clone)]
pub struct SimulationSetup {
    pub field: ScenarioField,
    pub lattice: LatticeSpec,
    pub epsilon: f64,
    pub sigma: f64,
    /// Defaults to `1/epsilon`.
    pub beta_s: Option<f64>,
    pub c_delta: f64,
    pub rho: f64,
    pub schedule: Schedule,
    pub ic: InitialCondition,
    pub solver: SolverOptions,
    /// Apply the synthetic source term of the rigid-sphere benchmark.
    pub manufactured_forcing: bool,
}

/// One running simulation; owns the state of the latest accepted step.
pub struct Simulation {
    pub field: ScenarioField,
    pub lattice: LatticeSpec,
    pub params: ModelParams,
    pub c_delta: f64,
    pub solver_options: SolverOptions,
    pub manufactured: Option<ManufacturedSolution>,
    pub use_forcing: bool,
    grid: Vec<f64>,
    cursor: usize,
    state: SystemState,
    band: NarrowBand,
    surface: CutSurface,
    pub records: Vec<StepRecord>,
}

impl Simulation {
    /// Builds the initial band, surface, and nodal state at the start time.
    pub fn new(setup: SimulationSetup) -> Result<Self> {
        let grid = setup.schedule.time_grid();
        let t0 = grid[0];
        let dt0 = if grid.len() > 1 { grid[1] - grid[0] } else { setup.schedule.dt_at(t0) };
        let mut params = ModelParams::new(setup.epsilon, setup.sigma, dt0, setup.lattice.h)?;
        if let Some(beta) = setup.beta_s {
            params.beta_s = beta;
        }
        params.rho = setup.rho;

        let manufactured = match &setup.field.kind {
            crate::levelset::ScenarioKind::MovingSphere { v, omega, center0 } => {
                Some(ManufacturedSolution {
                    v: *v,
                    omega: *omega,
                    center0: *center0,
                    epsilon: setup.epsilon,
                    sigma: setup.sigma,
                })
            }
            _ => None,
        };
        if setup.manufactured_forcing && manufactured.is_none() {
            return Err(Error::InvalidParameter(
                "manufactured forcing is defined for the rigid-sphere scenario only".into(),
            ));
        }

        // Bootstrap: cut cells only, then widen by the first window's bound.
        let dls = DiscreteLevelSet::new(&setup.field, &setup.lattice, t0);
        let band0 = select_band(&setup.lattice, &dls, 0.0)?;
        let mut surface0 = extract_surface(&band0, &dls);
        surface_quadrature(&mut surface0, 4, &dls)?;
        let bound = velocity_bound(&setup.field, &surface0, t0, t0 + dt0);
        let delta0 = band_width(dt0, bound, setup.c_delta);
        let (band, surface) = if delta0 > 0.0 {
            let band = select_band(&setup.lattice, &dls, delta0)?;
            let mut surface = extract_surface(&band, &dls);
            surface_quadrature(&mut surface, 4, &dls)?;
            (band, surface)
        } else {
            (band0, surface0)
        };

        let state = initialize(
            &band,
            &setup.ic,
            setup.epsilon,
            t0,
            manufactured.as_ref(),
        )?;

        let mut sim = Self {
            field: setup.field,
            lattice: setup.lattice,
            params,
            c_delta: setup.c_delta,
            solver_options: setup.solver,
            manufactured,
            use_forcing: setup.manufactured_forcing,
            grid,
            cursor: 0,
            state,
            band,
            surface,
            records: Vec::new(),
        };
        let (energy, mass) =
            surface_diagnostics(&sim.state, &sim.band, &sim.surface, sim.params.epsilon);
        sim.records.push(StepRecord {
            time: t0,
            dt: 0.0,
            energy,
            mass,
            band_cells: sim.band.cell_count(),
            active_nodes: sim.band.node_count(),
            gmres_iters: 0,
            residual: 0.0,
            inclusion_margin: f64::INFINITY,
        });
        Ok(sim)
    }

    pub fn state(&self) -> &SystemState {
        &self.state
    }

    pub fn band(&self) -> &NarrowBand {
        &self.band
    }

    pub fn surface(&self) -> &CutSurface {
        &self.surface
    }

    pub fn time(&self) -> f64 {
        self.grid[self.cursor]
    }

    pub fn is_done(&self) -> bool {
        self.cursor + 1 >= self.grid.len()
    }

    pub fn steps_total(&self) -> usize {
        self.grid.len() - 1
    }

    /// Advances one time step. Returns the accepted step's record.
    pub fn step(&mut self) -> Result<StepRecord> {
        if self.is_done() {
            return Err(Error::InvalidParameter("schedule exhausted".into()));
        }
        let t_prev = self.grid[self.cursor];
        let t = self.grid[self.cursor + 1];
        let dt = t - t_prev;
        let dt_next = if self.cursor + 2 < self.grid.len() {
            self.grid[self.cursor + 2] - t
        } else {
            dt
        };

        let trace = std::env::var_os("CHSURF_STEP_TRACE").is_some();
        let mut mark = std::time::Instant::now();
        let lap = |label: &str, mark: &mut std::time::Instant| {
            if trace {
                eprintln!("  {label}: {:?}", mark.elapsed());
            }
            *mark = std::time::Instant::now();
        };
        // Band for the *next* window so the next surface stays inside it.
        let bound = velocity_bound(&self.field, &self.surface, t, t + dt_next);
        let delta = band_width(dt_next, bound, self.c_delta);
        lap("bound", &mut mark);

        let dls = DiscreteLevelSet::new(&self.field, &self.lattice, t);
        let band = select_band(&self.lattice, &dls, delta)?;
        lap("band", &mut mark);
        let mut surface = extract_surface(&band, &dls);
        lap("extract", &mut mark);
        surface_quadrature(&mut surface, 4, &dls)?;
        lap("quadrature", &mut mark);

        let inclusion = check_inclusion(&self.band, &surface);
        lap("inclusion", &mut mark);
        if !inclusion.ok {
            return Err(Error::InclusionViolation {
                time: t,
                point: inclusion.worst_point.unwrap_or_else(Vec3::zeros),
            });
        }

        let u_at_qp = capped_velocities(&self.field, &surface, t)?;
        let stab_normals = stabilization_normals(&self.field, &band, t);

        let params = self.params.with_dt(dt);
        let prev_state = &self.state;
        let prev_band = &self.band;
        let prev = move |x: Vec3| evaluate_prev(prev_state, prev_band, x);
        let ms = self.manufactured.clone();
        let forcing_fn = ms.map(|m| move |x: Vec3| m.forcing(x, t));
        lap("velocity+normals", &mut mark);
        let sys = assemble(
            &band,
            &surface,
            &params,
            &u_at_qp,
            &stab_normals,
            &prev,
            if self.use_forcing {
                forcing_fn.as_ref().map(|f| f as &(dyn Fn(Vec3) -> f64 + Sync))
            } else {
                None
            },
        )?;
        lap("assemble", &mut mark);

        let (matrix, rhs) = sys.swapped_rows();
        // Warm start from the previous nodal values where nodes persist.
        let n = sys.n_nodes;
        let mut guess = vec![0.0; 2 * n];
        for (i, node) in band.nodes.iter().enumerate() {
            if let Some(k) = self.band.node_position(node) {
                guess[i] = self.state.c[k];
                guess[i + n] = self.state.mu[k];
            }
        }
        let solve_once =
            |opts: &SolverOptions| solver::solve_from(&matrix, &rhs, Some(&guess), opts);
        let (solution, report) = match solve_once(&self.solver_options) {
            Ok(ok) => ok,
            Err(Error::IluBreakdown { .. }) => {
                // Degenerate pivot on this cut; Jacobi keeps the step going.
                let opts =
                    SolverOptions { preconditioner: Preconditioner::Jacobi, ..self.solver_options.clone() };
                solve_once(&opts)?
            }
            Err(e) => return Err(e),
        };
        lap("solve", &mut mark);
        if !report.converged {
            return Err(Error::SolveFailed(format!(
                "GMRES stalled at t = {t}: residual {:.3e} after {} iterations",
                report.relative_residual, report.iterations
            )));
        }
        let n = sys.n_nodes;
        let state = SystemState {
            time: t,
            c: solution[..n].to_vec(),
            mu: solution[n..].to_vec(),
        };

        let (energy, mass) = surface_diagnostics(&state, &band, &surface, self.params.epsilon);
        lap("diagnostics", &mut mark);
        let record = StepRecord {
            time: t,
            dt,
            energy,
            mass,
            band_cells: band.cell_count(),
            active_nodes: band.node_count(),
            gmres_iters: report.iterations,
            residual: report.relative_residual,
            inclusion_margin: inclusion.margin,
        };

        self.state = state;
        self.band = band;
        self.surface = surface;
        self.cursor += 1;
        self.records.push(record.clone());
        Ok(record)
    }

    /// Runs to the end of the schedule, optionally writing CSV/VTK output.
    pub fn run(&mut self, output: Option<&OutputConfig>) -> Result<&[StepRecord]> {
        let mut csv = match output {
            Some(cfg) => {
                std::fs::create_dir_all(&cfg.dir)?;
                let mut w = crate::output::CsvWriter::create(cfg.dir.join("records.csv"))?;
                for r in &self.records {
                    w.write_record(r)?;
                }
                Some(w)
            }
            None => None,
        };
        self.maybe_write_vtk(output, 0)?;
        while !self.is_done() {
            let record = self.step()?;
            if let Some(w) = csv.as_mut() {
                w.write_record(&record)?;
            }
            self.maybe_write_vtk(output, self.cursor)?;
        }
        Ok(&self.records)
    }

    fn maybe_write_vtk(&self, output: Option<&OutputConfig>, step: usize) -> Result<()> {
        let Some(cfg) = output else { return Ok(()) };
        if cfg.vtk_interval == 0 {
            return Ok(());
        }
        if step % cfg.vtk_interval == 0 || self.is_done() {
            let path = cfg.dir.join(format!("surface_{step:06}.vtk"));
            crate::output::write_vtk(&self.surface, &self.state, &self.band, &path)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct OutputConfig {
    pub dir: std::path::PathBuf,
    /// Write a VTK snapshot every this many steps; 0 disables VTK output.
    pub vtk_interval: usize,
}

/// Nodal initial state on the initial band; the chemical potential starts at
/// zero (only the concentration is lagged by the scheme).
pub fn initialize(
    band: &NarrowBand,
    ic: &InitialCondition,
    epsilon: f64,
    t0: f64,
    ms: Option<&ManufacturedSolution>,
) -> Result<SystemState> {
    let mut rng = ChaCha8Rng::seed_from_u64(ic.seed().unwrap_or(0));
    let mut c = Vec::with_capacity(band.node_count());
    for node in &band.nodes {
        let x = band.lattice.node_position(*node);
        // One draw per node in sorted node order, used only by random data.
        let draw = rng.gen::<f64>();
        c.push(ic.value(x, draw, epsilon, t0, ms)?);
    }
    Ok(SystemState { time: t0, c, mu: vec![0.0; band.node_count()] })
}

/// A robust ceiling for sampled velocities: merging and splitting level sets
/// have an isolated pinch instant where the normal velocity blows up like
/// `1/|grad phi|`; samples beyond `20 x median` are treated as that
/// singularity and clipped. The inclusion check still verifies every step,
/// so clipping can never silently under-resolve the band.
const VELOCITY_SPIKE_FACTOR: f64 = 20.0;

fn spike_cap(magnitudes: &mut Vec<f64>) -> Option<f64> {
    if magnitudes.is_empty() {
        return None;
    }
    magnitudes.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = magnitudes[magnitudes.len() / 2];
    (median > 1e-12).then_some(VELOCITY_SPIKE_FACTOR * median)
}

/// Estimates `sup |u . n|` over the window by sampling the current surface
/// quadrature points (thinned to a few per triangle) at three times,
/// inflated by 10 percent and clipped at the spike ceiling. Inclusion is
/// asserted downstream, so an underestimate fails loudly rather than
/// silently.
pub fn velocity_bound(field: &ScenarioField, surface: &CutSurface, t_from: f64, t_to: f64) -> f64 {
    let stride = 3;
    let mut samples = Vec::new();
    for tau in [t_from, 0.5 * (t_from + t_to), t_to] {
        for x in surface.quad_points.iter().step_by(stride) {
            let (Ok(u), Ok(n)) = (field.material_velocity(*x, tau), field.normal(*x, tau)) else {
                continue;
            };
            samples.push(u.dot(&n).abs());
        }
    }
    let bound = match spike_cap(&mut samples.clone()) {
        Some(cap) => samples.iter().fold(0.0f64, |acc, &v| acc.max(v.min(cap))),
        None => samples.iter().fold(0.0f64, |acc, &v| acc.max(v)),
    };
    1.1 * bound
}

/// Material velocities at the quadrature points, clipped at the spike
/// ceiling so the isolated pinch singularity cannot poison the convection
/// rows.
pub fn capped_velocities(
    field: &ScenarioField,
    surface: &CutSurface,
    t: f64,
) -> Result<Vec<Vec3>> {
    let u: Vec<Vec3> = surface
        .quad_points
        .iter()
        .map(|x| field.material_velocity(*x, t))
        .collect::<Result<_>>()?;
    let mut mags: Vec<f64> = u.iter().map(|v| v.norm()).collect();
    let Some(cap) = spike_cap(&mut mags) else {
        return Ok(u);
    };
    Ok(u
        .into_iter()
        .map(|v| {
            let m = v.norm();
            if m > cap {
                v * (cap / m)
            } else {
                v
            }
        })
        .collect())
}

/// Surface normals at cell barycenters for the volume stabilization; `None`
/// where the level-set gradient degenerates (deep inside a wide band).
pub fn stabilization_normals(
    field: &ScenarioField,
    band: &NarrowBand,
    t: f64,
) -> Vec<Option<Vec3>> {
    band.cells
        .iter()
        .map(|cell| {
            let v = band.lattice.cell_vertices(*cell).expect("active cell in bounds");
            let bc = (v[0] + v[1] + v[2] + v[3]) / 4.0;
            match field.grad_phi(bc, t) {
                Ok(g) if g.norm() > 1e-8 => Some(g / g.norm()),
                _ => None,
            }
        })
        .collect()
}

/// Sampler of the P1 fields at surface quadrature points; caches the node
/// indices of the most recent parent cell.
struct SurfaceSampler<'a> {
    state: &'a SystemState,
    band: &'a NarrowBand,
    surface: &'a CutSurface,
    cached_tri: u32,
    nodes: [usize; 4],
    grads: [Vec3; 4],
    cell: crate::lattice::CellId,
}

impl<'a> SurfaceSampler<'a> {
    fn new(state: &'a SystemState, band: &'a NarrowBand, surface: &'a CutSurface) -> Self {
        let mut s = Self {
            state,
            band,
            surface,
            cached_tri: u32::MAX,
            nodes: [0; 4],
            grads: [Vec3::zeros(); 4],
            cell: crate::lattice::CellId { cube: [0, 0, 0], tet: 0 },
        };
        if !surface.triangles.is_empty() {
            s.load(0);
        }
        s
    }

    fn load(&mut self, tri: u32) {
        let cell = self.surface.triangles[tri as usize].parent;
        for (i, node) in self.band.lattice.cell_nodes(cell).iter().enumerate() {
            self.nodes[i] = self.band.node_position(node).expect("inactive node");
        }
        self.grads = self.band.lattice.shape_gradients(cell);
        self.cell = cell;
        self.cached_tri = tri;
    }

    fn sample(&mut self, q: usize) -> (f64, f64, Vec3, Vec3) {
        let tri = self.surface.quad_triangle[q];
        if tri != self.cached_tri {
            self.load(tri);
        }
        let bary = self.band.lattice.barycentric(self.cell, self.surface.quad_points[q]);
        let mut c = 0.0;
        let mut mu = 0.0;
        let mut gc = Vec3::zeros();
        let mut gmu = Vec3::zeros();
        for i in 0..4 {
            let k = self.nodes[i];
            c += bary[i] * self.state.c[k];
            mu += bary[i] * self.state.mu[k];
            gc += self.grads[i] * self.state.c[k];
            gmu += self.grads[i] * self.state.mu[k];
        }
        (c, mu, gc, gmu)
    }
}

/// Energy and mass in one sweep over the quadrature points.
pub fn surface_diagnostics(
    state: &SystemState,
    band: &NarrowBand,
    surface: &CutSurface,
    epsilon: f64,
) -> (f64, f64) {
    let mut sampler = SurfaceSampler::new(state, band, surface);
    let mut energy = 0.0;
    let mut mass = 0.0;
    for q in 0..surface.quad_points.len() {
        let (c, _, gc, _) = sampler.sample(q);
        let gt = assembly::tangential_gradient(gc, surface.quad_normals[q]);
        let (f0, _, _) = assembly::potential(c);
        let w = surface.quad_weights[q];
        energy += w * (f0 / epsilon + 0.5 * epsilon * gt.norm_squared());
        mass += w * c;
    }
    (energy, mass)
}

/// Discrete Ginzburg-Landau energy `int f0(c)/eps + eps/2 |grad_G c|^2`.
pub fn lyapunov_energy(
    state: &SystemState,
    band: &NarrowBand,
    surface: &CutSurface,
    epsilon: f64,
) -> f64 {
    let energy = surface_diagnostics(state, band, surface, epsilon).0;
    debug_assert!(energy >= 0.0);
    energy
}

/// Total surface mass `int_Gamma c`.
pub fn surface_mass(state: &SystemState, band: &NarrowBand, surface: &CutSurface) -> f64 {
    let mut sampler = SurfaceSampler::new(state, band, surface);
    (0..surface.quad_points.len())
        .map(|q| {
            let (c, _, _, _) = sampler.sample(q);
            surface.quad_weights[q] * c
        })
        .sum()
}

/// Discrete space-time error norms against the synthetic solution,
/// accumulated at every accepted step.
#[derive(Debug, Clone, Default)]
pub struct ErrorAccumulator {
    total_time: f64,
    l2l2_c: f64,
    l2l2_mu: f64,
    l2h1_c: f64,
    l2h1_mu: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct ErrorNorms {
    pub l2l2_c: f64,
    pub l2l2_mu: f64,
    pub l2h1_c: f64,
    pub l2h1_mu: f64,
}

impl ErrorAccumulator {
    pub fn add_step(
        &mut self,
        dt: f64,
        state: &SystemState,
        band: &NarrowBand,
        surface: &CutSurface,
        exact: &ManufacturedSolution,
    ) {
        let t = state.time;
        let mut sampler = SurfaceSampler::new(state, band, surface);
        for q in 0..surface.quad_points.len() {
            let x = surface.quad_points[q];
            let w = surface.quad_weights[q];
            let n = surface.quad_normals[q];
            let (c, mu, gc, gmu) = sampler.sample(q);
            let ec = c - exact.c_exact(x, t);
            let emu = mu - exact.mu_exact(x, t);
            let egc = assembly::tangential_gradient(gc - exact.grad_c_exact(x, t), n);
            let egmu = assembly::tangential_gradient(gmu - exact.grad_mu_exact(x, t), n);
            self.l2l2_c += dt * w * ec * ec;
            self.l2l2_mu += dt * w * emu * emu;
            self.l2h1_c += dt * w * egc.norm_squared();
            self.l2h1_mu += dt * w * egmu.norm_squared();
        }
        self.total_time += dt;
    }

    pub fn finalize(&self) -> ErrorNorms {
        let t = self.total_time.max(f64::MIN_POSITIVE);
        ErrorNorms {
            l2l2_c: (self.l2l2_c / t).sqrt(),
            l2l2_mu: (self.l2l2_mu / t).sqrt(),
            l2h1_c: (self.l2h1_c / t).sqrt(),
            l2h1_mu: (self.l2h1_mu / t).sqrt(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sphere_box() -> LatticeSpec {
        LatticeSpec::from_level(
            Vec3::new(-5.0 / 3.0, -5.0 / 3.0, -5.0 / 3.0),
            [10.0 / 3.0; 3],
            2,
        )
        .unwrap()
    }

    fn stationary_setup(ic: InitialCondition, steps: usize, dt: f64) -> SimulationSetup {
        SimulationSetup {
            field: ScenarioField::moving_sphere(Vec3::zeros(), Vec3::zeros()),
            lattice: sphere_box(),
            epsilon: 0.1,
            sigma: 1.0,
            beta_s: None,
            c_delta: 1.0,
            rho: 1.0,
            schedule: Schedule::uniform(0.0, steps as f64 * dt, dt).unwrap(),
            ic,
            solver: SolverOptions::default(),
            manufactured_forcing: false,
        }
    }

    #[test]
    fn schedule_grid_spans_phases_exactly() {
        let s = Schedule::new(
            vec![Phase { t_start: 0.23, dt: 1e-4 }, Phase { t_start: 0.24, dt: 1e-2 }],
            1.23,
        )
        .unwrap();
        let grid = s.time_grid();
        assert_relative_eq!(grid[0], 0.23);
        assert_relative_eq!(*grid.last().unwrap(), 1.23, epsilon = 1e-12);
        // 100 fine steps then 99 coarse ones.
        assert_eq!(grid.len(), 1 + 100 + 99);
        assert!(grid.iter().any(|t| (t - 0.24).abs() < 1e-12));
        assert!(grid.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn profile_ic_reference_values() {
        let ic = InitialCondition::Profile { axis: 1, delta: 0.0 };
        let v0 = ic.value(Vec3::new(0.3, 0.0, 0.1), 0.0, 0.1, 0.0, None).unwrap();
        assert_relative_eq!(v0, 0.5, epsilon = 1e-15);
        let v1 = ic.value(Vec3::new(0.0, 100.0, 0.0), 0.0, 0.1, 0.0, None).unwrap();
        assert_relative_eq!(v1, 1.0, epsilon = 1e-12);
        // delta = 20 pushes the transition far off the unit sphere.
        let far = InitialCondition::Profile { axis: 2, delta: 20.0 };
        for z in [-1.0, 0.0, 1.0] {
            let v = far.value(Vec3::new(0.0, 0.0, z), 0.0, 0.1, 0.0, None).unwrap();
            assert!(v > 0.999999, "profile with delta=20 at z={z}: {v}");
        }
    }

    #[test]
    fn random_ic_is_reproducible() {
        let field = ScenarioField::moving_sphere(Vec3::zeros(), Vec3::zeros());
        let lat = sphere_box();
        let dls = DiscreteLevelSet::new(&field, &lat, 0.0);
        let band = select_band(&lat, &dls, 0.05).unwrap();
        let ic = InitialCondition::Random { seed: 42 };
        let a = initialize(&band, &ic, 0.1, 0.0, None).unwrap();
        let b = initialize(&band, &ic, 0.1, 0.0, None).unwrap();
        assert_eq!(a.c, b.c);
        let other = initialize(&band, &InitialCondition::Random { seed: 43 }, 0.1, 0.0, None).unwrap();
        assert_ne!(a.c, other.c);
    }

    #[test]
    fn lyapunov_energy_of_constant_states() {
        let field = ScenarioField::moving_sphere(Vec3::zeros(), Vec3::zeros());
        let lat = LatticeSpec::from_level(
            Vec3::new(-5.0 / 3.0, -5.0 / 3.0, -5.0 / 3.0),
            [10.0 / 3.0; 3],
            3,
        )
        .unwrap();
        let dls = DiscreteLevelSet::new(&field, &lat, 0.0);
        let band = select_band(&lat, &dls, 0.0).unwrap();
        let mut surf = extract_surface(&band, &dls);
        surface_quadrature(&mut surf, 4, &dls).unwrap();

        let zero = SystemState {
            time: 0.0,
            c: vec![0.0; band.node_count()],
            mu: vec![0.0; band.node_count()],
        };
        assert_eq!(lyapunov_energy(&zero, &band, &surf, 0.1), 0.0);

        let half = SystemState {
            time: 0.0,
            c: vec![0.5; band.node_count()],
            mu: vec![0.0; band.node_count()],
        };
        let e = lyapunov_energy(&half, &band, &surf, 0.1);
        // Constant integrand: exactly f0(1/2)/eps times the discrete area.
        assert_relative_eq!(e, 0.15625 * surf.area(), max_relative = 1e-12);
        assert_relative_eq!(e, 1.9635, max_relative = 0.02);
    }

    #[test]
    fn error_norms_zero_for_exact_feed_and_area_for_unit_offset() {
        let ms = ManufacturedSolution::new(Vec3::zeros(), Vec3::zeros(), 0.1, 1.0);
        let field = ScenarioField::moving_sphere(Vec3::zeros(), Vec3::zeros());
        let lat = sphere_box();
        let dls = DiscreteLevelSet::new(&field, &lat, 0.0);
        let band = select_band(&lat, &dls, 0.0).unwrap();
        let mut surf = extract_surface(&band, &dls);
        surface_quadrature(&mut surf, 4, &dls).unwrap();

        // Exact solution interpolated pointwise: nodal values of c*.
        let c: Vec<f64> = band
            .nodes
            .iter()
            .map(|n| ms.c_exact(lat.node_position(*n), 0.0))
            .collect();
        let mu: Vec<f64> = band
            .nodes
            .iter()
            .map(|n| ms.mu_exact(lat.node_position(*n), 0.0))
            .collect();
        let state = SystemState { time: 0.0, c, mu };

        // Interpolation is not exact, but feeding the exact values back
        // through the same sampler is: check the L2L2 path with a synthetic
        // "identical" comparison by accumulating with dt over one step and
        // asserting smallness at interpolation accuracy.
        let mut acc = ErrorAccumulator::default();
        acc.add_step(1.0, &state, &band, &surf, &ms);
        let norms = acc.finalize();
        let h = lat.h;
        assert!(norms.l2l2_c < h * h * 2.0, "interp error {}", norms.l2l2_c);

        // Constant offset of one: L2L2 error equals sqrt(area).
        let state_off = SystemState {
            time: 0.0,
            c: state.c.iter().map(|v| v + 1.0).collect(),
            mu: state.mu.clone(),
        };
        let mut acc = ErrorAccumulator::default();
        acc.add_step(0.5, &state_off, &band, &surf, &ms);
        acc.add_step(0.5, &state_off, &band, &surf, &ms);
        let norms = acc.finalize();
        // The feed carries an O(h^2) interpolation residue on top of the
        // unit offset, so compare at that accuracy.
        assert_relative_eq!(norms.l2l2_c, surf.area().sqrt(), max_relative = 5e-3);
        assert_relative_eq!(norms.l2l2_c, (4.0 * std::f64::consts::PI).sqrt(), max_relative = 0.02);
    }

    #[test]
    fn constant_half_is_a_fixed_point() {
        let mut sim = Simulation::new(stationary_setup(
            InitialCondition::Constant { value: 0.5 },
            3,
            0.01,
        ))
        .unwrap();
        sim.run(None).unwrap();
        let tol = sim.solver_options.tol;
        for v in &sim.state().c {
            assert!((v - 0.5).abs() <= 100.0 * tol, "drift {}", (v - 0.5).abs());
        }
        for v in &sim.state().mu {
            assert!(v.abs() <= 100.0 * tol);
        }
    }

    #[test]
    fn stationary_mass_and_energy_are_stable() {
        let mut sim = Simulation::new(stationary_setup(
            InitialCondition::Cosine { base: 0.5, amplitude: 0.05 },
            10,
            0.01,
        ))
        .unwrap();
        sim.run(None).unwrap();
        let records = &sim.records;
        let tol = sim.solver_options.tol;
        let area = sim.surface().area();
        let mass0 = records[0].mass;
        for r in records.iter().skip(1) {
            assert!((r.mass - mass0).abs() <= 10.0 * tol * area, "mass drift {}", r.mass - mass0);
        }
        for w in records.windows(2) {
            assert!(
                w[1].energy <= w[0].energy + 10.0 * tol,
                "energy rose: {} -> {}",
                w[0].energy,
                w[1].energy
            );
        }
        // Inclusion margins positive on all accepted steps.
        assert!(records.iter().skip(1).all(|r| r.inclusion_margin > 0.0));
    }

    #[test]
    fn moving_sphere_runs_and_keeps_margin() {
        let mut setup = stationary_setup(InitialCondition::Constant { value: 0.5 }, 5, 0.01);
        setup.field = ScenarioField::moving_sphere(Vec3::new(1.0, 0.0, 0.0), Vec3::zeros());
        setup.lattice = LatticeSpec::from_level(
            Vec3::new(-5.0 / 3.0, -5.0 / 3.0, -5.0 / 3.0),
            [5.0, 10.0 / 3.0, 10.0 / 3.0],
            2,
        )
        .unwrap();
        let mut sim = Simulation::new(setup).unwrap();
        sim.run(None).unwrap();
        assert!(sim.records.iter().skip(1).all(|r| r.inclusion_margin > 0.0));
        assert_eq!(sim.records.len(), 6);
    }

    #[test]
    fn normal_extension_has_small_radial_spread() {
        // After a step on the stationary sphere the solution is nearly
        // constant along normal segments through the band.
        let mut sim = Simulation::new(stationary_setup(
            InitialCondition::Profile { axis: 1, delta: 0.0 },
            2,
            0.01,
        ))
        .unwrap();
        sim.run(None).unwrap();
        let band = sim.band();
        let state = sim.state();
        let h = band.lattice.h;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut checked = 0;
        let mut worst: f64 = 0.0;
        while checked < 50 {
            let dir = Vec3::new(
                rng.gen_range(-1.0f64..1.0),
                rng.gen_range(-1.0f64..1.0),
                rng.gen_range(-1.0f64..1.0),
            );
            if dir.norm() < 0.2 {
                continue;
            }
            let dir = dir.normalize();
            let mut values = Vec::new();
            for k in -3..=3 {
                let x = Vec3::from(dir * (1.0 + k as f64 * h / 6.0));
                if let Ok((v, _)) = evaluate_prev(state, band, x) {
                    values.push(v);
                }
            }
            if values.len() < 4 {
                continue;
            }
            let max = values.iter().cloned().fold(f64::MIN, f64::max);
            let min = values.iter().cloned().fold(f64::MAX, f64::min);
            worst = worst.max(max - min);
            checked += 1;
        }
        assert!(worst <= 10.0 * h * h + 1e-6, "radial spread {worst}");
    }

    #[test]
    fn central_inversion_equivariance() {
        // The Kuhn triangulation is symmetric under x -> -x about the origin
        // (a lattice node), so inverted nodal data must produce the inverted
        // nodal solution up to solver tolerance.
        let mut base = stationary_setup(InitialCondition::Profile { axis: 1, delta: 0.0 }, 1, 0.01);
        base.solver.tol = 1e-13;
        let mut sim_a = Simulation::new(base.clone()).unwrap();
        let mut sim_b = Simulation::new(base).unwrap();
        // Initialize run B with the point-inverted data of run A.
        let lat = sim_b.lattice.clone();
        let band_a = sim_a.band().clone();
        let state_a0 = sim_a.state().clone();
        let c0: Vec<f64> = sim_b
            .band()
            .nodes
            .iter()
            .map(|node| {
                let x = lat.node_position(*node);
                evaluate_prev(&state_a0, &band_a, -x).unwrap().0
            })
            .collect();
        sim_b.state = SystemState { time: 0.0, c: c0, mu: vec![0.0; sim_b.band().node_count()] };
        sim_a.run(None).unwrap();
        sim_b.run(None).unwrap();

        let state_a = sim_a.state().clone();
        let mut worst: f64 = 0.0;
        for (i, node) in sim_b.band().nodes.iter().enumerate() {
            let x = lat.node_position(*node);
            let (va, _) = evaluate_prev(&state_a, sim_a.band(), -x).unwrap();
            worst = worst.max((sim_b.state().c[i] - va).abs());
        }
        assert!(worst <= 1e-10, "inversion mismatch {worst}");
    }
}
