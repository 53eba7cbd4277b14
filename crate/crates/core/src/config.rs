//! Run configuration: a small key=value format with sections, strict key
//! checking, named benchmark presets, and a canonical echo whose reparse is a
//! fixed point.

use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::lattice::LatticeSpec;
use crate::levelset::ScenarioField;
use crate::solver::{Preconditioner, SolverOptions};
use crate::timeloop::{InitialCondition, Phase, Schedule, SimulationSetup};
use crate::Vec3;

/// Base surface motions a scenario name resolves to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioBase {
    MovingSphere,
    OscillatingEllipsoid,
    CollidingSpheres,
    SplittingSpheres,
}

pub fn scenario_base(name: &str) -> Result<ScenarioBase> {
    Ok(match name {
        "moving_sphere" | "test1a" | "test1b" => ScenarioBase::MovingSphere,
        "oscillating_ellipsoid" | "test2a" | "test2b" | "test2c" => {
            ScenarioBase::OscillatingEllipsoid
        }
        "colliding_spheres" | "collide_steady" | "collide_slow" | "collide_fast" => {
            ScenarioBase::CollidingSpheres
        }
        "splitting_spheres" | "split_rotated" | "split_horizontal" => {
            ScenarioBase::SplittingSpheres
        }
        other => {
            return Err(Error::InvalidParameter(format!("unknown scenario '{other}'")));
        }
    })
}

/// A fully resolved run description.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: String,
    pub level: u32,
    pub box_min: Vec3,
    pub box_max: Vec3,
    /// Rigid-sphere translation and angular velocity, initial center.
    pub velocity: Vec3,
    pub angular: Vec3,
    pub center: Vec3,
    /// Ellipsoid oscillation frequency.
    pub frequency: f64,
    /// Collision/splitting speed.
    pub speed: f64,
    pub epsilon: f64,
    pub sigma: f64,
    /// `None` means the default `1/epsilon`.
    pub beta_s: Option<f64>,
    pub c_delta: f64,
    pub rho: f64,
    /// Apply the synthetic source of the rigid-sphere benchmark.
    pub forcing: bool,
    pub schedule: Schedule,
    pub ic: InitialCondition,
    pub seed: u64,
    pub solver: SolverOptions,
    pub output_dir: Option<PathBuf>,
    pub vtk_interval: usize,
}

impl RunConfig {
    pub fn base(&self) -> Result<ScenarioBase> {
        scenario_base(&self.scenario)
    }

    pub fn field(&self) -> Result<ScenarioField> {
        Ok(match self.base()? {
            ScenarioBase::MovingSphere => {
                let mut f = ScenarioField::moving_sphere_at(self.center, self.velocity, self.angular);
                f.rho = self.rho;
                f
            }
            ScenarioBase::OscillatingEllipsoid => {
                let mut f = ScenarioField::oscillating_ellipsoid(self.frequency);
                f.rho = self.rho;
                f
            }
            ScenarioBase::CollidingSpheres => {
                let mut f = ScenarioField::colliding_spheres(self.speed);
                f.rho = self.rho;
                f
            }
            ScenarioBase::SplittingSpheres => {
                let mut f = ScenarioField::splitting_spheres(self.speed);
                f.rho = self.rho;
                f
            }
        })
    }

    pub fn lattice(&self) -> Result<LatticeSpec> {
        let extents = [
            self.box_max.x - self.box_min.x,
            self.box_max.y - self.box_min.y,
            self.box_max.z - self.box_min.z,
        ];
        LatticeSpec::from_level(self.box_min, extents, self.level)
    }

    pub fn setup(&self) -> Result<SimulationSetup> {
        Ok(SimulationSetup {
            field: self.field()?,
            lattice: self.lattice()?,
            epsilon: self.epsilon,
            sigma: self.sigma,
            beta_s: self.beta_s,
            c_delta: self.c_delta,
            rho: self.rho,
            schedule: self.schedule.clone(),
            ic: self.ic.clone(),
            solver: self.solver.clone(),
            manufactured_forcing: self.forcing,
        })
    }

    /// Canonical text form; parsing it reproduces this config exactly.
    pub fn to_config_text(&self) -> String {
        let v3 = |v: Vec3| format!("{:e},{:e},{:e}", v.x, v.y, v.z);
        let phases = self
            .schedule
            .phases
            .iter()
            .map(|p| format!("{:e}:{:e}", p.t_start, p.dt))
            .collect::<Vec<_>>()
            .join(",");
        let beta = match self.beta_s {
            Some(b) => format!("{b:e}"),
            None => "auto".into(),
        };
        let prec = match self.solver.preconditioner {
            Preconditioner::None => "none",
            Preconditioner::Jacobi => "jacobi",
            Preconditioner::Ilu0 => "ilu0",
            Preconditioner::Ilut => "ilut",
        };
        let mut out = String::new();
        out.push_str("[scenario]\n");
        out.push_str(&format!("name = {}\n", self.scenario));
        out.push_str(&format!("level = {}\n", self.level));
        out.push_str(&format!("box_min = {}\n", v3(self.box_min)));
        out.push_str(&format!("box_max = {}\n", v3(self.box_max)));
        out.push_str(&format!("velocity = {}\n", v3(self.velocity)));
        out.push_str(&format!("angular = {}\n", v3(self.angular)));
        out.push_str(&format!("center = {}\n", v3(self.center)));
        out.push_str(&format!("frequency = {:e}\n", self.frequency));
        out.push_str(&format!("speed = {:e}\n", self.speed));
        out.push_str("\n[model]\n");
        out.push_str(&format!("epsilon = {:e}\n", self.epsilon));
        out.push_str(&format!("sigma = {:e}\n", self.sigma));
        out.push_str(&format!("beta_s = {beta}\n"));
        out.push_str(&format!("c_delta = {:e}\n", self.c_delta));
        out.push_str(&format!("rho = {:e}\n", self.rho));
        out.push_str(&format!(
            "forcing = {}\n",
            if self.forcing { "manufactured" } else { "none" }
        ));
        out.push_str("\n[time]\n");
        out.push_str(&format!("phases = {phases}\n"));
        out.push_str(&format!("t_end = {:e}\n", self.schedule.t_end));
        out.push_str("\n[ic]\n");
        out.push_str(&format!("spec = {}\n", format_ic(&self.ic)));
        out.push_str(&format!("seed = {}\n", self.seed));
        out.push_str("\n[solver]\n");
        out.push_str(&format!("tol = {:e}\n", self.solver.tol));
        out.push_str(&format!("maxit = {}\n", self.solver.max_iters));
        out.push_str(&format!("restart = {}\n", self.solver.restart));
        out.push_str(&format!("preconditioner = {prec}\n"));
        out.push_str("\n[output]\n");
        if let Some(dir) = &self.output_dir {
            out.push_str(&format!("dir = {}\n", dir.display()));
        }
        out.push_str(&format!("vtk_interval = {}\n", self.vtk_interval));
        out
    }
}

pub fn format_ic(ic: &InitialCondition) -> String {
    match ic {
        InitialCondition::Profile { axis, delta } => {
            format!("profile(x{},{:e})", axis + 1, delta)
        }
        InitialCondition::RotatedProfile { angle, delta } => {
            format!("rotated_profile({:e},{:e})", angle, delta)
        }
        InitialCondition::Random { seed } => format!("random({seed})"),
        InitialCondition::Constant { value } => format!("constant({value:e})"),
        InitialCondition::Cosine { base, amplitude } => {
            format!("cosine({base:e},{amplitude:e})")
        }
        InitialCondition::Piecewise { neg, pos } => {
            format!("piecewise({},{})", format_ic(neg), format_ic(pos))
        }
        InitialCondition::Manufactured => "manufactured".into(),
    }
}

/// Splits `args` of `name(args)` at top-level commas.
fn split_args(s: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0usize;
    let mut start = 0usize;
    for (i, ch) in s.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => depth = depth.saturating_sub(1),
            ',' if depth == 0 => {
                out.push(s[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
    }
    let last = s[start..].trim();
    if !last.is_empty() || !out.is_empty() {
        out.push(last);
    }
    out
}

pub fn parse_ic(spec: &str, default_seed: u64) -> std::result::Result<InitialCondition, String> {
    let spec = spec.trim();
    let (head, args) = match spec.find('(') {
        Some(open) => {
            if !spec.ends_with(')') {
                return Err(format!("unbalanced parentheses in '{spec}'"));
            }
            (&spec[..open], split_args(&spec[open + 1..spec.len() - 1]))
        }
        None => (spec, Vec::new()),
    };
    let axis = |s: &str| -> std::result::Result<usize, String> {
        match s {
            "x1" => Ok(0),
            "x2" => Ok(1),
            "x3" => Ok(2),
            other => Err(format!("unknown axis '{other}' (use x1|x2|x3)")),
        }
    };
    let num = |s: &str| s.parse::<f64>().map_err(|_| format!("malformed number '{s}'"));
    match head {
        "profile" => {
            if args.len() != 2 {
                return Err("profile(axis, delta) takes 2 arguments".into());
            }
            Ok(InitialCondition::Profile { axis: axis(args[0])?, delta: num(args[1])? })
        }
        "rotated_profile" => match args.len() {
            1 => Ok(InitialCondition::RotatedProfile { angle: num(args[0])?, delta: 0.0 }),
            2 => Ok(InitialCondition::RotatedProfile {
                angle: num(args[0])?,
                delta: num(args[1])?,
            }),
            _ => Err("rotated_profile(angle[, delta])".into()),
        },
        "random" => match args.len() {
            0 => Ok(InitialCondition::Random { seed: default_seed }),
            1 => Ok(InitialCondition::Random {
                seed: args[0].parse().map_err(|_| format!("malformed seed '{}'", args[0]))?,
            }),
            _ => Err("random([seed])".into()),
        },
        "constant" => {
            if args.len() != 1 {
                return Err("constant(value)".into());
            }
            Ok(InitialCondition::Constant { value: num(args[0])? })
        }
        "cosine" => {
            if args.len() != 2 {
                return Err("cosine(base, amplitude)".into());
            }
            Ok(InitialCondition::Cosine { base: num(args[0])?, amplitude: num(args[1])? })
        }
        "piecewise" => {
            if args.len() != 2 {
                return Err("piecewise(neg_spec, pos_spec)".into());
            }
            Ok(InitialCondition::Piecewise {
                neg: Box::new(parse_ic(args[0], default_seed)?),
                pos: Box::new(parse_ic(args[1], default_seed)?),
            })
        }
        "manufactured" => {
            if !args.is_empty() {
                return Err("manufactured takes no arguments".into());
            }
            Ok(InitialCondition::Manufactured)
        }
        other => Err(format!("unknown initial condition '{other}'")),
    }
}

const KEYS: &[(&str, &str)] = &[
    ("scenario", "name"),
    ("scenario", "level"),
    ("scenario", "box_min"),
    ("scenario", "box_max"),
    ("scenario", "velocity"),
    ("scenario", "angular"),
    ("scenario", "center"),
    ("scenario", "frequency"),
    ("scenario", "speed"),
    ("model", "epsilon"),
    ("model", "sigma"),
    ("model", "beta_s"),
    ("model", "c_delta"),
    ("model", "rho"),
    ("model", "forcing"),
    ("time", "phases"),
    ("time", "t_end"),
    ("ic", "spec"),
    ("ic", "seed"),
    ("solver", "tol"),
    ("solver", "maxit"),
    ("solver", "restart"),
    ("solver", "preconditioner"),
    ("output", "dir"),
    ("output", "vtk_interval"),
];

struct Item {
    line: usize,
    key: &'static str,
    section: &'static str,
    value: String,
}

fn tokenize(text: &str) -> Result<Vec<Item>> {
    let mut items = Vec::new();
    let mut section = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('[') {
            if !line.ends_with(']') {
                return Err(Error::Config { line: line_no, msg: "unterminated section header".into() });
            }
            section = line[1..line.len() - 1].trim().to_string();
            continue;
        }
        let Some(eq) = line.find('=') else {
            return Err(Error::Config { line: line_no, msg: format!("expected key = value, got '{line}'") });
        };
        let key = line[..eq].trim();
        let value = line[eq + 1..].trim().to_string();
        let matches: Vec<&(&str, &str)> = KEYS
            .iter()
            .filter(|(s, k)| *k == key && (section.is_empty() || *s == section))
            .collect();
        match matches.as_slice() {
            [] => {
                return Err(Error::Config {
                    line: line_no,
                    msg: format!("unknown key '{key}' in section '[{section}]'"),
                })
            }
            [(s, k)] => items.push(Item { line: line_no, key: k, section: s, value }),
            _ => {
                return Err(Error::Config {
                    line: line_no,
                    msg: format!("ambiguous bare key '{key}'; qualify it with a section"),
                })
            }
        }
    }
    Ok(items)
}

fn parse_f64(v: &str, line: usize) -> Result<f64> {
    v.parse::<f64>()
        .map_err(|_| Error::Config { line, msg: format!("malformed number '{v}'") })
}

fn parse_vec3(v: &str, line: usize) -> Result<Vec3> {
    let parts: Vec<&str> = v.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(Error::Config { line, msg: format!("expected x,y,z but got '{v}'") });
    }
    Ok(Vec3::new(
        parse_f64(parts[0], line)?,
        parse_f64(parts[1], line)?,
        parse_f64(parts[2], line)?,
    ))
}

fn parse_phases(v: &str, line: usize) -> Result<Vec<Phase>> {
    let mut phases = Vec::new();
    for part in v.split(',') {
        let part = part.trim();
        let Some((t, dt)) = part.split_once(':') else {
            return Err(Error::Config { line, msg: format!("expected t_start:dt, got '{part}'") });
        };
        phases.push(Phase { t_start: parse_f64(t.trim(), line)?, dt: parse_f64(dt.trim(), line)? });
    }
    Ok(phases)
}

/// Parses a config text. The scenario name selects a preset whose fields the
/// remaining keys override; defaults fill everything else.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let items = tokenize(text)?;
    let name_item = items
        .iter()
        .find(|it| it.key == "name")
        .ok_or(Error::Config { line: 0, msg: "missing scenario name".into() })?;
    let level = items
        .iter()
        .find(|it| it.key == "level")
        .map(|it| {
            it.value
                .parse::<u32>()
                .map_err(|_| Error::Config { line: it.line, msg: format!("malformed level '{}'", it.value) })
        })
        .transpose()?;
    let name_line = name_item.line;
    let mut cfg = crate::scenarios::preset(&name_item.value, level)
        .ok_or(Error::Config { line: name_line, msg: format!("unknown scenario '{}'", name_item.value) })?;

    let mut phases: Option<Vec<Phase>> = None;
    let mut t_end: Option<f64> = None;
    let mut ic_spec: Option<(String, usize)> = None;
    for it in &items {
        let line = it.line;
        let v = it.value.as_str();
        match (it.section, it.key) {
            ("scenario", "name") | ("scenario", "level") => {}
            ("scenario", "box_min") => cfg.box_min = parse_vec3(v, line)?,
            ("scenario", "box_max") => cfg.box_max = parse_vec3(v, line)?,
            ("scenario", "velocity") => cfg.velocity = parse_vec3(v, line)?,
            ("scenario", "angular") => cfg.angular = parse_vec3(v, line)?,
            ("scenario", "center") => cfg.center = parse_vec3(v, line)?,
            ("scenario", "frequency") => cfg.frequency = parse_f64(v, line)?,
            ("scenario", "speed") => cfg.speed = parse_f64(v, line)?,
            ("model", "epsilon") => {
                cfg.epsilon = parse_f64(v, line)?;
                if cfg.epsilon <= 0.0 {
                    return Err(Error::Config { line, msg: format!("epsilon must be positive, got {v}") });
                }
            }
            ("model", "sigma") => cfg.sigma = parse_f64(v, line)?,
            ("model", "beta_s") => {
                cfg.beta_s = if v == "auto" { None } else { Some(parse_f64(v, line)?) };
            }
            ("model", "c_delta") => {
                cfg.c_delta = parse_f64(v, line)?;
                if cfg.c_delta < 1.0 {
                    return Err(Error::Config { line, msg: "c_delta must be >= 1".into() });
                }
            }
            ("model", "rho") => cfg.rho = parse_f64(v, line)?,
            ("model", "forcing") => {
                cfg.forcing = match v {
                    "manufactured" => true,
                    "none" => false,
                    other => {
                        return Err(Error::Config {
                            line,
                            msg: format!("forcing must be manufactured|none, got '{other}'"),
                        })
                    }
                };
            }
            ("time", "phases") => phases = Some(parse_phases(v, line)?),
            ("time", "t_end") => t_end = Some(parse_f64(v, line)?),
            ("ic", "spec") => ic_spec = Some((v.to_string(), line)),
            ("ic", "seed") => {
                cfg.seed = v
                    .parse()
                    .map_err(|_| Error::Config { line, msg: format!("malformed seed '{v}'") })?;
            }
            ("solver", "tol") => {
                cfg.solver.tol = parse_f64(v, line)?;
                if cfg.solver.tol <= 0.0 || cfg.solver.tol >= 1.0 {
                    return Err(Error::Config { line, msg: "tol must lie in (0, 1)".into() });
                }
            }
            ("solver", "maxit") => {
                cfg.solver.max_iters = v
                    .parse()
                    .map_err(|_| Error::Config { line, msg: format!("malformed maxit '{v}'") })?;
            }
            ("solver", "restart") => {
                cfg.solver.restart = v
                    .parse()
                    .map_err(|_| Error::Config { line, msg: format!("malformed restart '{v}'") })?;
            }
            ("solver", "preconditioner") => {
                cfg.solver.preconditioner = v
                    .parse()
                    .map_err(|e| Error::Config { line, msg: e })?;
            }
            ("output", "dir") => cfg.output_dir = Some(PathBuf::from(v)),
            ("output", "vtk_interval") => {
                cfg.vtk_interval = v
                    .parse()
                    .map_err(|_| Error::Config { line, msg: format!("malformed vtk_interval '{v}'") })?;
            }
            _ => unreachable!("key table mismatch"),
        }
    }
    if let Some((spec, line)) = ic_spec {
        cfg.ic = parse_ic(&spec, cfg.seed).map_err(|msg| Error::Config { line, msg })?;
    }
    if phases.is_some() || t_end.is_some() {
        let p = phases.unwrap_or_else(|| cfg.schedule.phases.clone());
        let te = t_end.unwrap_or(cfg.schedule.t_end);
        cfg.schedule = Schedule::new(p, te).map_err(|e| Error::Config {
            line: 0,
            msg: format!("invalid schedule: {e}"),
        })?;
    }
    for p in &cfg.schedule.phases {
        if p.dt <= 0.0 {
            return Err(Error::Config { line: 0, msg: format!("non-positive time step {}", p.dt) });
        }
    }
    Ok(cfg)
}
