//! Deterministic planar rigid-body world: one dynamic object on a table,
//! manipulated by a kinematic parallel-jaw gripper (left) and a constraint
//! bar (right). Side view, x across the table and z up, fixed dt = 1/60 s.

mod body;
mod solver;

pub use body::{BarSpec, BodyShape, DynamicBody, Effector, GripperSpec};
pub use solver::PairId;

use crate::geom::{signed_gap, v2, wrap_angle, Pose, Vec2};
use crate::rng::fnv1a64;
use crate::{Error, Result};
use solver::ImpulseCache;

#[derive(Clone, Copy, Debug)]
pub struct SimParams {
    pub dt: f64,
    pub gravity: f64,
    pub velocity_iters: usize,
    pub position_iters: usize,
    /// Position-correction gain per iteration.
    pub baumgarte: f64,
    /// Penetration tolerated without correction.
    pub slop: f64,
    /// Table contacts are kept while within this gap, so resting manifolds
    /// survive small tilts instead of degenerating to a single corner.
    pub contact_margin: f64,
    /// Hard bound on object penetration. The gripper yields beyond it; the
    /// object is projected out of the stiff bar and table.
    pub penetration_cap: f64,
    pub max_correction: f64,
    pub max_effector_speed: f64,
    pub max_effector_omega: f64,
    pub max_opening_speed: f64,
    /// Object counts as settled below this speed.
    pub settle_speed: f64,
    pub table_friction: (f64, f64),
    /// Workspace bounds for effector positions.
    pub x_range: (f64, f64),
    pub z_range: (f64, f64),
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            dt: 1.0 / 60.0,
            gravity: 9.81,
            velocity_iters: 4,
            position_iters: 2,
            baumgarte: 0.2,
            slop: 2e-4,
            contact_margin: 2e-3,
            penetration_cap: 1e-3,
            max_correction: 0.02,
            max_effector_speed: 0.25,
            max_effector_omega: 2.0,
            max_opening_speed: 0.2,
            settle_speed: 1e-3,
            table_friction: (1.0, 0.85),
            x_range: (-0.6, 0.6),
            z_range: (-0.05, 0.6),
        }
    }
}

/// Default effector parking poses, outside the manipulation zone.
pub const LEFT_HOME: Pose = Pose {
    pos: Vec2 { x: -0.30, z: 0.30 },
    theta: -std::f64::consts::FRAC_PI_2,
};
pub const RIGHT_HOME_X: f64 = 0.50;

#[derive(Clone, Copy, Debug, Default)]
pub struct StepCmd {
    /// Desired left pose change (position, angle) this substep.
    pub left_delta: (Vec2, f64),
    /// Desired right pose change.
    pub right_delta: (Vec2, f64),
    /// Desired jaw opening change.
    pub opening_delta: f64,
}

/// Outcome of testing a grasp pose against the current scene.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GraspCheck {
    /// Jaws straddle the object without hitting anything.
    Feasible,
    /// The posed gripper intersects table, object, or the bar.
    Colliding,
    /// Collision-free but the jaws don't enclose the object.
    Unreachable,
}

#[derive(Clone, Copy, Debug)]
struct ExternalForce {
    /// Application point in object-local coordinates (follows the body).
    local_point: Vec2,
    force: Vec2,
}

#[derive(Clone, Debug)]
pub struct World {
    pub params: SimParams,
    pub object: DynamicBody,
    pub left: Effector,
    pub right: Effector,
    pub gripper: GripperSpec,
    pub bar: BarSpec,
    pub opening: f64,
    pub time: f64,
    /// Object pose relative to the left effector while gripped.
    pub attached: Option<Pose>,
    pub solver_fault: bool,
    cache: ImpulseCache,
    external: Option<ExternalForce>,
}

impl World {
    /// Object placed as given; effectors parked at their homes.
    pub fn new(object: DynamicBody, gripper: GripperSpec, bar: BarSpec, params: SimParams) -> Self {
        let opening = gripper.max_opening * 0.8;
        let left = Effector::new(gripper.body_shape(opening), LEFT_HOME);
        let mut right = Effector::new(
            bar.body_shape(),
            bar.pose_on_table(RIGHT_HOME_X, 0.0, 0.0),
        );
        // The bar is rubber-coated like the table mat: an object face must
        // roll on its top edge without slipping, or a tip-over never passes
        // the balance point.
        right.friction = params.table_friction;
        World {
            params,
            object,
            left,
            right,
            gripper,
            bar,
            opening,
            time: 0.0,
            attached: None,
            solver_fault: false,
            cache: ImpulseCache::new(),
            external: None,
        }
    }

    /// Teleports the left effector (pre-episode placement only).
    pub fn place_left(&mut self, pose: Pose) {
        self.left.pose = self.clamp_pose(pose);
        self.left.vel = v2(0.0, 0.0);
        self.left.omega = 0.0;
        self.left.retreat = v2(0.0, 0.0);
    }

    /// Teleports the bar to stand on the table at (x, theta).
    pub fn place_bar_on_table(&mut self, x: f64, theta: f64) {
        self.right.pose = self.bar.pose_on_table(
            x.clamp(self.params.x_range.0, self.params.x_range.1),
            theta,
            0.0,
        );
        self.right.vel = v2(0.0, 0.0);
        self.right.omega = 0.0;
    }

    /// Teleports the bar to an arbitrary pose (oracle scenes).
    pub fn place_bar(&mut self, pose: Pose) {
        self.right.pose = pose;
        self.right.vel = v2(0.0, 0.0);
        self.right.omega = 0.0;
    }

    pub fn set_opening(&mut self, opening: f64) {
        self.opening = opening.clamp(0.0, self.gripper.max_opening);
        self.left.shape = self.gripper.body_shape(self.opening);
    }

    fn clamp_pose(&self, mut pose: Pose) -> Pose {
        pose.pos.x = pose.pos.x.clamp(self.params.x_range.0, self.params.x_range.1);
        pose.pos.z = pose.pos.z.clamp(self.params.z_range.0, self.params.z_range.1);
        pose.theta = wrap_angle(pose.theta);
        pose
    }

    fn move_effectors(&mut self, cmd: &StepCmd) {
        let dt = self.params.dt;
        let cap = self.params.max_effector_speed * dt;
        let cap_w = self.params.max_effector_omega * dt;

        for (eff, delta) in [
            (&mut self.left, cmd.left_delta),
            (&mut self.right, cmd.right_delta),
        ] {
            let (mut dp, mut dw) = delta;
            let n = dp.length();
            if n > cap {
                dp = dp * (cap / n);
            }
            dw = dw.clamp(-cap_w, cap_w);
            let old = eff.pose;
            let target = Pose {
                pos: old.pos + dp,
                theta: old.theta + dw,
            };
            let new = Pose {
                pos: v2(
                    target.pos.x.clamp(self.params.x_range.0, self.params.x_range.1),
                    target.pos.z.clamp(self.params.z_range.0, self.params.z_range.1),
                ),
                theta: wrap_angle(target.theta),
            };
            eff.pose = new;
            eff.vel = (new.pos - old.pos + eff.retreat) * (1.0 / dt);
            eff.omega = wrap_angle(new.theta - old.theta) / dt;
            eff.retreat = v2(0.0, 0.0);
        }

        if cmd.opening_delta != 0.0 {
            let cap_o = self.params.max_opening_speed * dt;
            let d = cmd.opening_delta.clamp(-cap_o, cap_o);
            self.set_opening(self.opening + d);
        }
    }

    /// One substep of fixed dt.
    pub fn step(&mut self, cmd: &StepCmd) {
        if self.solver_fault {
            return;
        }
        let dt = self.params.dt;
        self.move_effectors(cmd);

        if let Some(rel) = self.attached {
            // Gripped object rides the left effector kinematically.
            self.object.pose = self.left.pose.compose(rel);
            self.object.vel = self.left.vel;
            self.object.omega = self.left.omega;
            self.time += dt;
            return;
        }

        let mut contacts = solver::generate_contacts(
            &self.object,
            &self.left,
            &self.right,
            0.0,
            self.params.contact_margin,
        );

        // Integrate velocity: gravity plus any probe force.
        self.object.vel.z -= self.params.gravity * dt;
        if let Some(ext) = self.external {
            let p = self.object.pose.transform(ext.local_point);
            self.object.vel = self.object.vel + ext.force * (self.object.inv_mass * dt);
            let r = p - self.object.pose.pos;
            self.object.omega += self.object.inv_inertia * r.cross(ext.force) * dt;
        }

        solver::solve_velocity(
            &mut self.object,
            &self.left,
            &self.right,
            self.params.table_friction,
            &mut contacts,
            &self.cache,
            self.params.velocity_iters,
            dt,
        );

        self.object.pose.pos = self.object.pose.pos + self.object.vel * dt;
        self.object.pose.theta = wrap_angle(self.object.pose.theta + self.object.omega * dt);

        solver::correct_positions(&mut self.object, &self.left, &self.right, 0.0, &self.params);
        solver::enforce_penetration_caps(
            &mut self.object,
            &mut self.left,
            &mut self.right,
            0.0,
            &self.params,
        );

        // Shed numerical dust so resting objects rest exactly.
        if self.external.is_none()
            && self.object.vel.length() < 5e-4
            && self.object.omega.abs() < 5e-3
        {
            self.object.vel = v2(0.0, 0.0);
            self.object.omega = 0.0;
        }

        self.cache = solver::store_cache(&contacts);

        let bad = !self.object.pose.pos.x.is_finite()
            || !self.object.pose.pos.z.is_finite()
            || !self.object.pose.theta.is_finite()
            || !self.object.vel.x.is_finite()
            || !self.object.vel.z.is_finite()
            || !self.object.omega.is_finite()
            || self.object.vel.length() > 50.0
            || self.object.omega.abs() > 200.0;
        if bad {
            self.solver_fault = true;
        }
        self.time += dt;
    }

    /// Steps with zero commands until the object is still (5 consecutive
    /// settled substeps). Errors if it never settles.
    pub fn settle(&mut self, max_steps: usize) -> Result<()> {
        let mut quiet = 0;
        for _ in 0..max_steps {
            self.step(&StepCmd::default());
            if self.solver_fault {
                return Err(Error::Sim("solver fault while settling".into()));
            }
            if self.object_settled() {
                quiet += 1;
                if quiet >= 5 {
                    return Ok(());
                }
            } else {
                quiet = 0;
            }
        }
        Err(Error::Sim(format!(
            "object did not settle (speed {:.2e}, omega {:.2e})",
            self.object.speed(),
            self.object.omega
        )))
    }

    pub fn object_settled(&self) -> bool {
        self.object.speed() < self.params.settle_speed
            && self.object.omega.abs() < 10.0 * self.params.settle_speed
    }

    /// Signed clearance between two bodies: positive penetration depth when
    /// overlapping, negative separation distance otherwise. Symmetric in its
    /// arguments (pairs are evaluated in canonical order).
    pub fn signed_distance(&self, a: BodyRef, b: BodyRef) -> f64 {
        let (a, b) = if (a as u8) <= (b as u8) { (a, b) } else { (b, a) };
        assert_ne!(a as u8, b as u8, "signed_distance of a body with itself");
        if b == BodyRef::Table {
            // Penetration below z = 0, else clearance above.
            return -self.body_polys(a).iter().map(|p| p.min_z()).fold(f64::INFINITY, f64::min);
        }
        let pa = self.body_polys(a);
        let pb = self.body_polys(b);
        let mut best = f64::NEG_INFINITY;
        for x in &pa {
            for y in &pb {
                let g = signed_gap(x, y);
                if g > best {
                    best = g;
                }
            }
        }
        best
    }

    fn body_polys(&self, r: BodyRef) -> Vec<crate::geom::Polygon> {
        match r {
            BodyRef::Object => self.object.shape.transformed(self.object.pose),
            BodyRef::Left => self.left.shape.transformed(self.left.pose),
            BodyRef::Right => self.right.shape.transformed(self.right.pose),
            BodyRef::Table => panic!("table has no polygon form"),
        }
    }

    /// Deepest current object penetration against table and effectors.
    pub fn max_penetration(&self) -> f64 {
        let contacts = solver::generate_contacts(&self.object, &self.left, &self.right, 0.0, 0.0);
        contacts.iter().map(|c| c.depth).fold(0.0, f64::max)
    }

    /// Applies `force` at the material point currently at `world_point` for
    /// `duration` seconds and reports the peak speed of that point. The
    /// force ramps in over the first 0.2 s so the loading stays
    /// quasi-static: a step-applied force rings the solver and overshoots
    /// tipping margins that hold under gradual loading, which is also how
    /// an arm actually presses. The world must be settled first. State is
    /// mutated; probe callers clone.
    pub fn force_probe(&mut self, force: Vec2, world_point: Vec2, duration: f64) -> Result<f64> {
        if !self.object_settled() {
            return Err(Error::Sim("force_probe on an unsettled world".into()));
        }
        let local = self.object.pose.inverse_transform(world_point);
        let steps = (duration / self.params.dt).round() as usize;
        let ramp = (0.2 / self.params.dt).round() as usize;
        let mut peak = 0.0_f64;
        for k in 0..steps {
            let scale = if ramp > 0 { ((k + 1) as f64 / ramp as f64).min(1.0) } else { 1.0 };
            self.external = Some(ExternalForce {
                local_point: local,
                force: force * scale,
            });
            self.step(&StepCmd::default());
            if self.solver_fault {
                self.external = None;
                return Err(Error::Sim("solver fault during force probe".into()));
            }
            let p = self.object.pose.transform(local);
            let speed = self.object.velocity_at(p).length();
            if speed > peak {
                peak = speed;
            }
        }
        self.external = None;
        Ok(peak)
    }

    /// Tests a virtual gripper at `grasp` with jaws sized for `width`.
    /// Collision with table, object, or bar dominates; otherwise the jaws
    /// must enclose part of the object to be feasible.
    pub fn check_grasp(&self, grasp: Pose, width: f64) -> GraspCheck {
        let clearance = 0.015;
        let opening = (width + clearance).min(self.gripper.max_opening);
        let shape = self.gripper.body_shape(opening);
        let polys = shape.transformed(grasp);

        let obj = self.object.shape.transformed(self.object.pose);
        let bar = self.right.shape.transformed(self.right.pose);
        for p in &polys {
            if p.min_z() < -1e-6 {
                return GraspCheck::Colliding;
            }
            for o in obj.iter().chain(bar.iter()) {
                if signed_gap(p, o) > 1e-6 {
                    return GraspCheck::Colliding;
                }
            }
        }

        let mouth = self.gripper.mouth(opening).transformed(grasp);
        for o in &obj {
            if signed_gap(&mouth, o) > 1e-6 {
                return GraspCheck::Feasible;
            }
        }
        GraspCheck::Unreachable
    }

    /// Rigidly attaches the object to the left effector (grip closed).
    pub fn attach(&mut self) {
        let rel_pos = self.left.pose.inverse_transform(self.object.pose.pos);
        let rel_theta = wrap_angle(self.object.pose.theta - self.left.pose.theta);
        self.attached = Some(Pose {
            pos: rel_pos,
            theta: rel_theta,
        });
    }

    pub fn detach(&mut self) {
        self.attached = None;
    }

    /// FNV-1a over the exact bit patterns of all dynamic state.
    pub fn state_hash(&self) -> u64 {
        let mut bytes = Vec::with_capacity(160);
        let mut push = |v: f64| bytes.extend_from_slice(&v.to_bits().to_le_bytes());
        push(self.object.pose.pos.x);
        push(self.object.pose.pos.z);
        push(self.object.pose.theta);
        push(self.object.vel.x);
        push(self.object.vel.z);
        push(self.object.omega);
        push(self.left.pose.pos.x);
        push(self.left.pose.pos.z);
        push(self.left.pose.theta);
        push(self.opening);
        push(self.right.pose.pos.x);
        push(self.right.pose.pos.z);
        push(self.right.pose.theta);
        push(self.time);
        match self.attached {
            Some(rel) => {
                push(1.0);
                push(rel.pos.x);
                push(rel.pos.z);
                push(rel.theta);
            }
            None => push(0.0),
        }
        push(if self.solver_fault { 1.0 } else { 0.0 });
        fnv1a64(&bytes)
    }

    /// Line-oriented dump: `body <id> <x> <z> <theta> <vx> <vz> <omega>`,
    /// ids 0 = object, 1 = left effector, 2 = right effector.
    pub fn snapshot(&self) -> String {
        let mut s = String::new();
        for (id, pose, vel, omega) in [
            (0, self.object.pose, self.object.vel, self.object.omega),
            (1, self.left.pose, self.left.vel, self.left.omega),
            (2, self.right.pose, self.right.vel, self.right.omega),
        ] {
            s.push_str(&format!(
                "body {} {} {} {} {} {} {}\n",
                id, pose.pos.x, pose.pos.z, pose.theta, vel.x, vel.z, omega
            ));
        }
        s
    }
}

/// Body handle for distance queries.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BodyRef {
    Object = 0,
    Left = 1,
    Right = 2,
    Table = 3,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Polygon;

    fn box_world(w: f64, h: f64, mass: f64, friction: (f64, f64)) -> World {
        let shape = BodyShape::new(vec![Polygon::rect(w, h)]);
        let body = DynamicBody::new(shape, Pose::new(0.0, h / 2.0, 0.0), mass, friction);
        World::new(body, GripperSpec::default(), BarSpec::default(), SimParams::default())
    }

    #[test]
    fn resting_box_does_not_drift() {
        let mut w = box_world(0.12, 0.05, 0.3, (1.0, 0.85));
        w.settle(300).unwrap();
        let p0 = w.object.pose;
        for _ in 0..1000 {
            w.step(&StepCmd::default());
        }
        let dp = (w.object.pose.pos - p0.pos).length();
        let dth = (w.object.pose.theta - p0.theta).abs();
        assert!(dp < 1e-5, "drift {dp}");
        assert!(dth < 1e-5, "spin {dth}");
        assert!(w.max_penetration() <= 1e-3);
    }

    #[test]
    fn dropped_box_settles_on_table() {
        let shape = BodyShape::new(vec![Polygon::rect(0.1, 0.04)]);
        let body = DynamicBody::new(shape, Pose::new(0.0, 0.15, 0.0), 0.25, (1.0, 0.85));
        let mut w = World::new(body, GripperSpec::default(), BarSpec::default(), SimParams::default());
        w.settle(600).unwrap();
        // Bottom face on the table: center at half height, upright.
        assert!((w.object.pose.pos.z - 0.02).abs() < 2e-3, "z {}", w.object.pose.pos.z);
        assert!(w.object.pose.theta.abs() < 1e-2);
    }

    #[test]
    fn force_probe_calibrates_on_frictionless_push() {
        // 1 N on 1 kg for 0.5 s from rest. The force ramps linearly over the
        // first 12 steps (0.2 s), so the impulse sum is
        // (sum_{k=1..12} k/12 + 18) * dt = 24.5 / 60 exactly.
        let mut w = box_world(0.1, 0.05, 1.0, (0.0, 0.0));
        let mut p = w.params;
        p.table_friction = (0.0, 0.0);
        w.params = p;
        w.settle(300).unwrap();
        let center = w.object.pose.pos;
        let peak = w.force_probe(v2(1.0, 0.0), center, 0.5).unwrap();
        assert!((peak - 24.5 / 60.0).abs() < 1e-6, "peak {peak}");
    }

    #[test]
    fn probe_requires_settled_world() {
        let shape = BodyShape::new(vec![Polygon::rect(0.1, 0.04)]);
        let body = DynamicBody::new(shape, Pose::new(0.0, 0.2, 0.0), 0.25, (1.0, 0.85));
        let mut w = World::new(body, GripperSpec::default(), BarSpec::default(), SimParams::default());
        w.object.vel = v2(0.0, -0.5);
        assert!(w.force_probe(v2(1.0, 0.0), v2(0.0, 0.2), 0.1).is_err());
    }

    #[test]
    fn sliding_box_decelerates_at_mu_g() {
        let mut w = box_world(0.1, 0.04, 0.5, (0.5, 0.5));
        let mut p = w.params;
        p.table_friction = (0.5, 0.5);
        w.params = p;
        w.settle(300).unwrap();
        w.object.vel = v2(1.0, 0.0);
        // 0.1 s of sliding: dv = mu * g * t = 0.5 * 9.81 * 0.1.
        for _ in 0..6 {
            w.step(&StepCmd::default());
        }
        let expect = 1.0 - 0.5 * 9.81 * 0.1;
        assert!((w.object.vel.x - expect).abs() < 5e-3, "v {}", w.object.vel.x);
    }

    #[test]
    fn squeeze_respects_penetration_cap() {
        let mut w = box_world(0.12, 0.05, 0.3, (1.0, 0.85));
        w.settle(300).unwrap();
        w.set_opening(0.01);
        w.place_left(Pose::new(0.0, 0.12, -std::f64::consts::FRAC_PI_2));
        // Drive the closed gripper straight down through the object.
        for _ in 0..120 {
            w.step(&StepCmd {
                left_delta: (v2(0.0, -0.004), 0.0),
                ..Default::default()
            });
            assert!(w.max_penetration() <= 1e-3 + 1e-9, "pen {}", w.max_penetration());
            assert!(!w.solver_fault);
        }
        // The gripper must have stalled above the object, not passed through.
        assert!(w.left.pose.pos.z > 0.04, "left z {}", w.left.pose.pos.z);
        assert!(w.object.pose.pos.z < 0.04);
    }

    #[test]
    fn push_above_bar_top_tips_the_object_clockwise() {
        let mut w = box_world(0.10, 0.06, 0.3, (0.5, 0.4));
        w.settle(300).unwrap();
        // Bar flush against the right face; its top edge is well below the
        // object's top, so a push along the top strip has a long lever over
        // the edge while the bar blocks sliding away.
        w.place_bar_on_table(0.05 + w.bar.width / 2.0 + 1e-4, 0.0);
        w.set_opening(0.0);
        let tip = GripperSpec::default().tip_reach();
        w.place_left(Pose::new(-0.08, 0.056 + tip, -std::f64::consts::FRAC_PI_2));
        let mut min_theta: f64 = 0.0;
        for _ in 0..600 {
            w.step(&StepCmd {
                left_delta: (v2(0.003, 0.0), 0.0),
                ..Default::default()
            });
            min_theta = min_theta.min(w.object.pose.theta);
            if min_theta < -0.5 {
                break;
            }
        }
        assert!(min_theta < -0.5, "object only reached theta {min_theta}");
        assert!(!w.solver_fault);
    }

    #[test]
    fn steps_are_deterministic() {
        let run = || {
            let mut w = box_world(0.14, 0.05, 0.35, (1.0, 0.85));
            w.settle(300).unwrap();
            w.place_left(Pose::new(-0.2, 0.08, -1.2));
            let mut hashes = Vec::new();
            for i in 0..400 {
                let dx = 0.002 * ((i as f64) * 0.05).sin();
                let dz = 0.002 * ((i as f64) * 0.07).cos();
                w.step(&StepCmd {
                    left_delta: (v2(dx, dz), 0.001),
                    right_delta: (v2(-dx, 0.0), 0.0),
                    opening_delta: 0.0,
                });
                hashes.push(w.state_hash());
            }
            hashes
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn snapshot_round_trips_through_parse() {
        let w = box_world(0.1, 0.05, 0.3, (1.0, 0.85));
        let snap = w.snapshot();
        let lines: Vec<&str> = snap.lines().collect();
        assert_eq!(lines.len(), 3);
        for (i, line) in lines.iter().enumerate() {
            let f: Vec<&str> = line.split(' ').collect();
            assert_eq!(f.len(), 8);
            assert_eq!(f[0], "body");
            assert_eq!(f[1], i.to_string());
            // Display output must parse back to the exact same f64.
            let x: f64 = f[2].parse().unwrap();
            if i == 0 {
                assert_eq!(x.to_bits(), w.object.pose.pos.x.to_bits());
            }
        }
    }

    #[test]
    fn grasp_checks_distinguish_the_three_cases() {
        let w = box_world(0.12, 0.05, 0.3, (1.0, 0.85));
        // Horizontal approach at the object center: the lower jaw would
        // occupy the table.
        let occluded = w.check_grasp(Pose::new(0.0, 0.025, 0.0), 0.05);
        assert_eq!(occluded, GraspCheck::Colliding);
        // Vertical approach from above, jaws around the 0.12 width.
        let side = w.check_grasp(
            Pose::new(0.0, 0.030, -std::f64::consts::FRAC_PI_2),
            0.12,
        );
        assert_eq!(side, GraspCheck::Feasible);
        // Far from everything.
        let away = w.check_grasp(Pose::new(-0.5, 0.3, -std::f64::consts::FRAC_PI_2), 0.05);
        assert_eq!(away, GraspCheck::Unreachable);
    }

    #[test]
    fn attach_carries_object_with_effector() {
        let mut w = box_world(0.1, 0.04, 0.3, (1.0, 0.85));
        w.settle(300).unwrap();
        w.place_left(Pose::new(0.0, 0.05, -std::f64::consts::FRAC_PI_2));
        w.attach();
        let before = w.object.pose.pos;
        for _ in 0..60 {
            w.step(&StepCmd {
                left_delta: (v2(0.0, 0.002), 0.0),
                ..Default::default()
            });
        }
        let rise = w.object.pose.pos.z - before.z;
        assert!((rise - 0.12).abs() < 1e-9, "rise {rise}");
    }
}
