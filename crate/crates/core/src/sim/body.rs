//! Body definitions: the one dynamic object (possibly multiple convex
//! parts), kinematic effectors (parallel-jaw gripper and constraint bar),
//! and the static table half-space.

use crate::geom::{v2, Polygon, Pose, Vec2};

/// Convex decomposition in the body's local frame. The local origin is the
/// center of mass for dynamic bodies.
#[derive(Clone, Debug)]
pub struct BodyShape {
    pub parts: Vec<Polygon>,
}

impl BodyShape {
    pub fn new(parts: Vec<Polygon>) -> Self {
        assert!(!parts.is_empty());
        BodyShape { parts }
    }

    pub fn area(&self) -> f64 {
        self.parts.iter().map(|p| p.area()).sum()
    }

    /// Area centroid over all parts.
    pub fn centroid(&self) -> Vec2 {
        let total = self.area();
        let mut c = v2(0.0, 0.0);
        for p in &self.parts {
            c = c + p.centroid() * p.area();
        }
        c * (1.0 / total)
    }

    /// Unit-mass moment of inertia about the local origin.
    pub fn unit_inertia_origin(&self) -> f64 {
        let total = self.area();
        self.parts
            .iter()
            .map(|p| p.second_moment_origin())
            .sum::<f64>()
            / total
    }

    pub fn transformed(&self, pose: Pose) -> Vec<Polygon> {
        self.parts.iter().map(|p| p.transformed(pose)).collect()
    }

    pub fn min_z_at(&self, pose: Pose) -> f64 {
        self.transformed(pose)
            .iter()
            .map(|p| p.min_z())
            .fold(f64::INFINITY, f64::min)
    }
}

/// The manipulated object. Local origin must be the center of mass
/// (shape generators re-center their polygons).
#[derive(Clone, Debug)]
pub struct DynamicBody {
    pub shape: BodyShape,
    pub pose: Pose,
    pub vel: Vec2,
    pub omega: f64,
    pub mass: f64,
    pub inv_mass: f64,
    pub inertia: f64,
    pub inv_inertia: f64,
    /// (static, dynamic) Coulomb coefficients.
    pub friction: (f64, f64),
}

impl DynamicBody {
    pub fn new(shape: BodyShape, pose: Pose, mass: f64, friction: (f64, f64)) -> Self {
        let com = shape.centroid();
        assert!(
            com.length() < 1e-9,
            "object shape must be centered on its center of mass (off by {:?})",
            com
        );
        let inertia = shape.unit_inertia_origin() * mass;
        DynamicBody {
            shape,
            pose,
            vel: v2(0.0, 0.0),
            omega: 0.0,
            mass,
            inv_mass: 1.0 / mass,
            inertia,
            inv_inertia: 1.0 / inertia,
            friction,
        }
    }

    /// Velocity of the material point currently at world position `p`.
    pub fn velocity_at(&self, p: Vec2) -> Vec2 {
        self.vel + (p - self.pose.pos).perp() * self.omega
    }

    pub fn speed(&self) -> f64 {
        self.vel.length()
    }
}

/// Position-controlled body: infinite effective mass in the velocity solve,
/// but it yields positionally rather than crush the object (see solver).
#[derive(Clone, Debug)]
pub struct Effector {
    pub shape: BodyShape,
    pub pose: Pose,
    /// Achieved velocity this step; contacts see it. Includes last step's
    /// yield, so a stalled effector presses at zero speed instead of
    /// pumping its commanded speed into the object forever.
    pub vel: Vec2,
    pub omega: f64,
    /// Displacement applied by the last yield, consumed by the next step's
    /// velocity computation.
    pub retreat: Vec2,
    pub friction: (f64, f64),
}

impl Effector {
    pub fn new(shape: BodyShape, pose: Pose) -> Self {
        Effector {
            shape,
            pose,
            vel: v2(0.0, 0.0),
            omega: 0.0,
            retreat: v2(0.0, 0.0),
            // Slick hard shell. Pushed objects must pivot rather than stick:
            // above sqrt(0.15 * 0.5) ~ 0.27 contact friction, face pushes
            // self-lock on squat objects and no reorientation is possible.
            friction: (0.15, 0.12),
        }
    }

    pub fn velocity_at(&self, p: Vec2) -> Vec2 {
        self.vel + (p - self.pose.pos).perp() * self.omega
    }
}

/// Parallel-jaw gripper dimensions. Local frame: approach along +x, jaws
/// offset along +-z. The pose origin sits between the fingers at 3/4 of
/// their length, so the origin is the grasp center it is commanded to.
#[derive(Clone, Copy, Debug)]
pub struct GripperSpec {
    pub finger_length: f64,
    pub finger_width: f64,
    pub max_opening: f64,
    pub palm_thickness: f64,
}

impl Default for GripperSpec {
    fn default() -> Self {
        GripperSpec {
            finger_length: 0.09,
            finger_width: 0.012,
            max_opening: 0.26,
            palm_thickness: 0.02,
        }
    }
}

impl GripperSpec {
    /// Finger span along the approach axis: tips extend 1/4 finger length
    /// past the origin, the rest trails behind.
    pub fn tip_reach(&self) -> f64 {
        0.25 * self.finger_length
    }

    pub fn body_shape(&self, opening: f64) -> BodyShape {
        let opening = opening.clamp(0.0, self.max_opening);
        let l = self.finger_length;
        let (x0, x1) = (-0.75 * l, 0.25 * l);
        let half = opening / 2.0;
        let w = self.finger_width;
        let palm = Polygon::rect_spans(
            x0 - self.palm_thickness,
            x0,
            -(half + w),
            half + w,
        );
        let upper = Polygon::rect_spans(x0, x1, half, half + w);
        let lower = Polygon::rect_spans(x0, x1, -(half + w), -half);
        BodyShape::new(vec![palm, upper, lower])
    }

    /// Open region between the jaws, used for grasp feasibility tests.
    /// Slightly inset from the palm so palm contact still counts as a miss.
    pub fn mouth(&self, opening: f64) -> Polygon {
        let opening = opening.clamp(1e-4, self.max_opening);
        let l = self.finger_length;
        Polygon::rect_spans(-0.70 * l, 0.25 * l, -opening / 2.0, opening / 2.0)
    }
}

/// Constraint-side effector: a plain bar standing on (or tilted above) the
/// table. Local origin at the bottom center of the bar.
#[derive(Clone, Copy, Debug)]
pub struct BarSpec {
    pub width: f64,
    pub height: f64,
}

impl Default for BarSpec {
    fn default() -> Self {
        // The edge must sit well below object tops: a push above the edge
        // torques the object over it, and the margin over contact friction
        // grows with that height difference.
        BarSpec {
            width: 0.016,
            height: 0.016,
        }
    }
}

impl BarSpec {
    pub fn body_shape(&self) -> BodyShape {
        BodyShape::new(vec![Polygon::rect_spans(
            -self.width / 2.0,
            self.width / 2.0,
            0.0,
            self.height,
        )])
    }

    /// Pose for a bar at horizontal position x with tilt theta, dropped so
    /// its lowest corner rests exactly on the table.
    pub fn pose_on_table(&self, x: f64, theta: f64, table_z: f64) -> Pose {
        let shape = self.body_shape();
        let trial = Pose::new(x, 0.0, theta);
        let low = shape.min_z_at(trial);
        Pose::new(x, table_z - low, theta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Pose;

    #[test]
    fn gripper_shape_parts_and_mouth() {
        let spec = GripperSpec::default();
        let shape = spec.body_shape(0.1);
        assert_eq!(shape.parts.len(), 3);
        // Jaw inner faces sit at +-opening/2.
        let mouth = spec.mouth(0.1);
        assert!(mouth.contains(crate::geom::v2(0.0, 0.049)));
        assert!(!mouth.contains(crate::geom::v2(0.0, 0.051)));
    }

    #[test]
    fn bar_pose_rests_lowest_corner_on_table() {
        let bar = BarSpec::default();
        for &theta in &[0.0, 0.4, -0.9, 1.2] {
            let pose = bar.pose_on_table(0.1, theta, 0.0);
            let low = bar.body_shape().min_z_at(pose);
            assert!(low.abs() < 1e-12, "theta {theta}: min z {low}");
        }
    }

    #[test]
    fn centered_box_body_properties() {
        let shape = BodyShape::new(vec![Polygon::rect(0.12, 0.06)]);
        let body = DynamicBody::new(shape, Pose::identity(), 0.3, (1.0, 0.85));
        // I = m (w^2 + h^2) / 12.
        let expect = 0.3 * (0.12f64.powi(2) + 0.06f64.powi(2)) / 12.0;
        assert!((body.inertia - expect).abs() < 1e-12);
    }
}
