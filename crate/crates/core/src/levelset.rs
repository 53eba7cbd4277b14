//! Analytic scenario fields: level set, derivatives, normals, velocities,
//! and the nodal interpolant that defines the discrete surface.
//!
//! All benchmark surfaces are zero sets of closed-form level sets, so every
//! quantity here is evaluated exactly where needed; the P1 interpolant on the
//! half-size lattice only ever samples these closed forms at lattice nodes.

use crate::error::{Error, Result};
use crate::lattice::{LatticeSpec, NodeId};
use crate::Vec3;

/// Level-set value assigned to nodes that coincide with a field singularity
/// (deep inside a colliding sphere); sign classification still works there.
const SINGULAR_NODE_VALUE: f64 = -1e30;

/// One benchmark scenario: level set, its derivatives, and the material
/// velocity. The density is a prescribed constant field.
#[derive(Debug, Clone)]
pub enum ScenarioKind {
    /// Unit sphere under rigid motion: translation `v`, angular velocity
    /// `omega` about the moving center.
    MovingSphere { v: Vec3, omega: Vec3, center0: Vec3 },
    /// Ellipsoid with `x1` semi-axis `a(t) = 1 + 0.2 sin(2 pi k t)`.
    OscillatingEllipsoid { k: f64 },
    /// Two unit-ish spheres approaching along `x1` with speed `w > 0`,
    /// merging when the centers reach distance `2^(1/3)` apart.
    CollidingSpheres { w: f64 },
    /// Time-reversed collision: a merged ball splitting into two droplets.
    /// `w < 0` by convention; the level set equals the colliding field with
    /// speed `|w|` evaluated at time `1.5/|w| + t`.
    SplittingSpheres { w: f64 },
}

#[derive(Debug, Clone)]
pub struct ScenarioField {
    pub kind: ScenarioKind,
    /// Prescribed density (constant 1 in all benchmarks).
    pub rho: f64,
}

impl ScenarioField {
    pub fn new(kind: ScenarioKind) -> Self {
        Self { kind, rho: 1.0 }
    }

    pub fn moving_sphere(v: Vec3, omega: Vec3) -> Self {
        Self::new(ScenarioKind::MovingSphere { v, omega, center0: Vec3::zeros() })
    }

    pub fn moving_sphere_at(center0: Vec3, v: Vec3, omega: Vec3) -> Self {
        Self::new(ScenarioKind::MovingSphere { v, omega, center0 })
    }

    pub fn oscillating_ellipsoid(k: f64) -> Self {
        Self::new(ScenarioKind::OscillatingEllipsoid { k })
    }

    pub fn colliding_spheres(w: f64) -> Self {
        Self::new(ScenarioKind::CollidingSpheres { w })
    }

    pub fn splitting_spheres(w: f64) -> Self {
        Self::new(ScenarioKind::SplittingSpheres { w })
    }

    /// Level-set value. Errors at field singularities.
    pub fn phi(&self, x: Vec3, t: f64) -> Result<f64> {
        match &self.kind {
            ScenarioKind::MovingSphere { .. } => {
                let r = x - self.sphere_center(t);
                Ok(r.norm() - 1.0)
            }
            ScenarioKind::OscillatingEllipsoid { k } => {
                let a = ellipsoid_axis(*k, t);
                Ok((x.x / a).powi(2) + x.y * x.y + x.z * x.z - 1.0)
            }
            ScenarioKind::CollidingSpheres { w } => {
                let (rp, rm) = colliding_offsets(x, *w, t);
                let (np, nm) = (rp.norm(), rm.norm());
                if np < 1e-9 || nm < 1e-9 {
                    return Err(Error::SingularPoint(x));
                }
                Ok(1.0 - np.powi(-3) - nm.powi(-3))
            }
            ScenarioKind::SplittingSpheres { w } => {
                self.as_colliding().phi(x, split_shift(*w) + t)
            }
        }
    }

    /// Level-set value for nodal interpolation: singularities saturate to a
    /// large negative value instead of erroring.
    pub fn phi_clamped(&self, x: Vec3, t: f64) -> f64 {
        match self.phi(x, t) {
            Ok(v) => v,
            Err(_) => SINGULAR_NODE_VALUE,
        }
    }

    pub fn grad_phi(&self, x: Vec3, t: f64) -> Result<Vec3> {
        match &self.kind {
            ScenarioKind::MovingSphere { .. } => {
                let r = x - self.sphere_center(t);
                let n = r.norm();
                if n < 1e-12 {
                    return Err(Error::SingularPoint(x));
                }
                Ok(r / n)
            }
            ScenarioKind::OscillatingEllipsoid { k } => {
                let a = ellipsoid_axis(*k, t);
                Ok(Vec3::new(2.0 * x.x / (a * a), 2.0 * x.y, 2.0 * x.z))
            }
            ScenarioKind::CollidingSpheres { w } => {
                let (rp, rm) = colliding_offsets(x, *w, t);
                let (np, nm) = (rp.norm(), rm.norm());
                if np < 1e-9 || nm < 1e-9 {
                    return Err(Error::SingularPoint(x));
                }
                Ok(rp * (3.0 * np.powi(-5)) + rm * (3.0 * nm.powi(-5)))
            }
            ScenarioKind::SplittingSpheres { w } => {
                self.as_colliding().grad_phi(x, split_shift(*w) + t)
            }
        }
    }

    pub fn dphi_dt(&self, x: Vec3, t: f64) -> Result<f64> {
        match &self.kind {
            ScenarioKind::MovingSphere { v, .. } => {
                let r = x - self.sphere_center(t);
                let n = r.norm();
                if n < 1e-12 {
                    return Err(Error::SingularPoint(x));
                }
                Ok(-v.dot(&r) / n)
            }
            ScenarioKind::OscillatingEllipsoid { k } => {
                let a = ellipsoid_axis(*k, t);
                let da = ellipsoid_axis_rate(*k, t);
                Ok(-2.0 * x.x * x.x * da / (a * a * a))
            }
            ScenarioKind::CollidingSpheres { w } => {
                let (rp, rm) = colliding_offsets(x, *w, t);
                let (np, nm) = (rp.norm(), rm.norm());
                if np < 1e-9 || nm < 1e-9 {
                    return Err(Error::SingularPoint(x));
                }
                // Centers move with velocity (-w, 0, 0) and (w, 0, 0).
                Ok(3.0 * w * (rp.x * np.powi(-5) - rm.x * nm.powi(-5)))
            }
            ScenarioKind::SplittingSpheres { w } => {
                self.as_colliding().dphi_dt(x, split_shift(*w) + t)
            }
        }
    }

    /// Outward unit normal `grad phi / |grad phi|`.
    pub fn normal(&self, x: Vec3, t: f64) -> Result<Vec3> {
        let g = self.grad_phi(x, t)?;
        let n = g.norm();
        if n <= 1e-12 {
            return Err(Error::VanishingGradient(x));
        }
        Ok(g / n)
    }

    /// Geometric velocity of the level sets: `-(dphi/dt / |grad phi|^2) grad phi`.
    pub fn normal_velocity(&self, x: Vec3, t: f64) -> Result<Vec3> {
        let g = self.grad_phi(x, t)?;
        let g2 = g.norm_squared();
        if g2 <= 1e-24 {
            return Err(Error::VanishingGradient(x));
        }
        Ok(g * (-self.dphi_dt(x, t)? / g2))
    }

    /// Material velocity transporting the order parameter.
    pub fn material_velocity(&self, x: Vec3, t: f64) -> Result<Vec3> {
        match &self.kind {
            ScenarioKind::MovingSphere { v, omega, .. } => {
                Ok(v + omega.cross(&(x - self.sphere_center(t))))
            }
            ScenarioKind::OscillatingEllipsoid { .. } => self.normal_velocity(x, t),
            ScenarioKind::CollidingSpheres { w } | ScenarioKind::SplittingSpheres { w } => {
                // Nearly normal motion at the merging plane, parallel
                // advection with speed |w| away from it.
                let blend = (x.x.abs() / 0.1).tanh();
                let wn = self.normal_velocity(x, t)?;
                let far = Vec3::new(-x.x.signum() * w, 0.0, 0.0);
                let far = if x.x == 0.0 { Vec3::zeros() } else { far };
                Ok(wn * (1.0 - blend) + far * blend)
            }
        }
    }

    pub fn density(&self, _x: Vec3, _t: f64) -> f64 {
        self.rho
    }

    /// Center of the rigidly moving sphere.
    pub fn sphere_center(&self, t: f64) -> Vec3 {
        match &self.kind {
            ScenarioKind::MovingSphere { v, center0, .. } => center0 + v * t,
            _ => Vec3::zeros(),
        }
    }

    /// Interior anchor points from which surface seeds are shot; one per
    /// connected component of the enclosed volume.
    pub fn anchor_points(&self, t: f64) -> Vec<Vec3> {
        match &self.kind {
            ScenarioKind::MovingSphere { .. } => vec![self.sphere_center(t)],
            ScenarioKind::OscillatingEllipsoid { .. } => vec![Vec3::zeros()],
            ScenarioKind::CollidingSpheres { w } => {
                let c = 1.5 - w * t;
                vec![Vec3::new(c, 0.0, 0.0), Vec3::new(-c, 0.0, 0.0)]
            }
            ScenarioKind::SplittingSpheres { w } => {
                self.as_colliding().anchor_points(split_shift(*w) + t)
            }
        }
    }

    /// Points on the analytic surface, found by bisecting `phi` along rays
    /// from the anchors. Used to seed the narrow-band flood fill so every
    /// connected component of the cut-cell shell is reached.
    pub fn surface_seeds(&self, t: f64, max_radius: f64) -> Vec<Vec3> {
        let mut seeds = Vec::new();
        for anchor in self.anchor_points(t) {
            if self.phi_clamped(anchor, t) >= 0.0 {
                continue;
            }
            for dir in seed_directions() {
                if let Some(p) = self.bisect_along_ray(anchor, dir, t, max_radius) {
                    seeds.push(p);
                }
            }
        }
        seeds
    }

    fn bisect_along_ray(&self, anchor: Vec3, dir: Vec3, t: f64, max_radius: f64) -> Option<Vec3> {
        let f = |s: f64| self.phi_clamped(anchor + dir * s, t);
        let mut lo = 0.0;
        let mut f_lo = f(lo);
        if f_lo >= 0.0 {
            return None;
        }
        let mut hi = None;
        let steps = 64;
        for i in 1..=steps {
            let s = max_radius * i as f64 / steps as f64;
            let v = f(s);
            if v >= 0.0 {
                hi = Some(s);
                break;
            }
            lo = s;
            f_lo = v;
        }
        let mut hi = hi?;
        let _ = f_lo;
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(anchor + dir * (0.5 * (lo + hi)))
    }

    fn as_colliding(&self) -> ScenarioField {
        match &self.kind {
            ScenarioKind::SplittingSpheres { w } => {
                ScenarioField { kind: ScenarioKind::CollidingSpheres { w: w.abs() }, rho: self.rho }
            }
            _ => self.clone(),
        }
    }
}

fn ellipsoid_axis(k: f64, t: f64) -> f64 {
    1.0 + 0.2 * (2.0 * std::f64::consts::PI * k * t).sin()
}

fn ellipsoid_axis_rate(k: f64, t: f64) -> f64 {
    let two_pi_k = 2.0 * std::f64::consts::PI * k;
    0.2 * two_pi_k * (two_pi_k * t).cos()
}

fn colliding_offsets(x: Vec3, w: f64, t: f64) -> (Vec3, Vec3) {
    let c = 1.5 - w * t;
    (x - Vec3::new(c, 0.0, 0.0), x - Vec3::new(-c, 0.0, 0.0))
}

/// Time shift identifying the splitting field with the colliding one.
fn split_shift(w: f64) -> f64 {
    1.5 / w.abs()
}

/// 26 lattice directions, normalized.
fn seed_directions() -> Vec<Vec3> {
    let mut dirs = Vec::with_capacity(26);
    for i in -1..=1 {
        for j in -1..=1 {
            for k in -1..=1 {
                if i == 0 && j == 0 && k == 0 {
                    continue;
                }
                dirs.push(Vec3::new(i as f64, j as f64, k as f64).normalize());
            }
        }
    }
    dirs
}

/// The P1 nodal interpolant of `phi` at a fixed time, on the size-h lattice
/// and its half-size refinement. Values are evaluated lazily: a node value is
/// the analytic `phi` at the node position, saturated at singularities and
/// with exact zeros perturbed so sign classification is deterministic.
#[derive(Debug, Clone)]
pub struct DiscreteLevelSet<'a> {
    pub field: &'a ScenarioField,
    pub lattice: LatticeSpec,
    pub half: LatticeSpec,
    pub time: f64,
}

impl<'a> DiscreteLevelSet<'a> {
    pub fn new(field: &'a ScenarioField, lattice: &LatticeSpec, time: f64) -> Self {
        Self { field, lattice: lattice.clone(), half: lattice.refined(), time }
    }

    /// Nodal value on the half-size lattice. Exact zeros are perturbed by
    /// `+1e-12 * h/2` before classification.
    pub fn half_node_value(&self, node: NodeId) -> f64 {
        let v = self.field.phi_clamped(self.half.node_position(node), self.time);
        if v == 0.0 {
            1e-12 * self.half.h
        } else {
            v
        }
    }

    /// Nodal value at a size-h lattice node (a half-lattice node with doubled
    /// indices, so the position and hence the value agree bitwise).
    pub fn node_value(&self, node: NodeId) -> f64 {
        self.half_node_value(NodeId([2 * node.0[0], 2 * node.0[1], 2 * node.0[2]]))
    }
}
