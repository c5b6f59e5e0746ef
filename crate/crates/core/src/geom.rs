//! Planar geometry in the x-z plane: vectors, rigid poses, convex polygons,
//! SAT overlap tests with clipped contact manifolds, and separation
//! distances. Angles are CCW-positive; polygon windings are CCW.

use std::ops::{Add, Mul, Neg, Sub};

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Vec2 {
    pub x: f64,
    pub z: f64,
}

pub const fn v2(x: f64, z: f64) -> Vec2 {
    Vec2 { x, z }
}

impl Vec2 {
    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.z * o.z
    }

    /// Scalar cross product (z-component of the 3-D cross).
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.z - self.z * o.x
    }

    /// CCW perpendicular.
    pub fn perp(self) -> Vec2 {
        v2(-self.z, self.x)
    }

    pub fn length(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn length_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn normalized(self) -> Vec2 {
        let l = self.length();
        assert!(l > 1e-12, "normalizing near-zero vector");
        v2(self.x / l, self.z / l)
    }

    pub fn rotate(self, theta: f64) -> Vec2 {
        let (s, c) = theta.sin_cos();
        v2(c * self.x - s * self.z, s * self.x + c * self.z)
    }

    pub fn scale(self, k: f64) -> Vec2 {
        v2(self.x * k, self.z * k)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        v2(self.x + o.x, self.z + o.z)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        v2(self.x - o.x, self.z - o.z)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        v2(-self.x, -self.z)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        self.scale(k)
    }
}

/// Rigid transform: rotate by theta, then translate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    pub pos: Vec2,
    pub theta: f64,
}

impl Pose {
    pub fn new(x: f64, z: f64, theta: f64) -> Self {
        Pose {
            pos: v2(x, z),
            theta,
        }
    }

    pub fn identity() -> Self {
        Pose::new(0.0, 0.0, 0.0)
    }

    pub fn transform(self, p: Vec2) -> Vec2 {
        self.pos + p.rotate(self.theta)
    }

    pub fn rotate_vec(self, d: Vec2) -> Vec2 {
        d.rotate(self.theta)
    }

    pub fn inverse_transform(self, world: Vec2) -> Vec2 {
        (world - self.pos).rotate(-self.theta)
    }

    /// self applied after `inner`: world = self * (inner * local).
    pub fn compose(self, inner: Pose) -> Pose {
        Pose {
            pos: self.transform(inner.pos),
            theta: self.theta + inner.theta,
        }
    }
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let mut r = a % std::f64::consts::TAU;
    if r <= -std::f64::consts::PI {
        r += std::f64::consts::TAU;
    } else if r > std::f64::consts::PI {
        r -= std::f64::consts::TAU;
    }
    r
}

/// Convex polygon, CCW winding, in local coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct Polygon {
    verts: Vec<Vec2>,
}

impl Polygon {
    /// Validates CCW winding and convexity (cross of consecutive edges >= 0,
    /// no zero-length edges).
    pub fn new(verts: Vec<Vec2>) -> Self {
        assert!(verts.len() >= 3, "polygon needs >= 3 vertices");
        let n = verts.len();
        for i in 0..n {
            let a = verts[i];
            let b = verts[(i + 1) % n];
            let c = verts[(i + 2) % n];
            let e1 = b - a;
            let e2 = c - b;
            assert!(e1.length() > 1e-9, "degenerate edge at {i}");
            assert!(
                e1.cross(e2) > -1e-12,
                "polygon not convex CCW at vertex {}",
                (i + 1) % n
            );
        }
        Polygon { verts }
    }

    pub fn rect(w: f64, h: f64) -> Self {
        // Centered box, CCW from the bottom-left corner.
        let (hw, hh) = (w / 2.0, h / 2.0);
        Polygon::new(vec![v2(-hw, -hh), v2(hw, -hh), v2(hw, hh), v2(-hw, hh)])
    }

    /// Axis-aligned rectangle given by corner spans (not centered).
    pub fn rect_spans(x0: f64, x1: f64, z0: f64, z1: f64) -> Self {
        assert!(x1 > x0 && z1 > z0);
        Polygon::new(vec![v2(x0, z0), v2(x1, z0), v2(x1, z1), v2(x0, z1)])
    }

    pub fn verts(&self) -> &[Vec2] {
        &self.verts
    }

    pub fn area(&self) -> f64 {
        let n = self.verts.len();
        let mut a = 0.0;
        for i in 0..n {
            a += self.verts[i].cross(self.verts[(i + 1) % n]);
        }
        a / 2.0
    }

    pub fn centroid(&self) -> Vec2 {
        let n = self.verts.len();
        let mut c = v2(0.0, 0.0);
        let mut a = 0.0;
        for i in 0..n {
            let p = self.verts[i];
            let q = self.verts[(i + 1) % n];
            let w = p.cross(q);
            a += w;
            c = c + (p + q) * w;
        }
        c * (1.0 / (3.0 * a))
    }

    /// Second moment of area about the origin (divide by area for the
    /// unit-mass inertia contribution).
    pub fn second_moment_origin(&self) -> f64 {
        let n = self.verts.len();
        let mut acc = 0.0;
        for i in 0..n {
            let p = self.verts[i];
            let q = self.verts[(i + 1) % n];
            let w = p.cross(q);
            acc += w * (p.dot(p) + p.dot(q) + q.dot(q));
        }
        acc / 12.0
    }

    pub fn transformed(&self, pose: Pose) -> Polygon {
        Polygon {
            verts: self.verts.iter().map(|&v| pose.transform(v)).collect(),
        }
    }

    pub fn contains(&self, p: Vec2) -> bool {
        let n = self.verts.len();
        for i in 0..n {
            let a = self.verts[i];
            let b = self.verts[(i + 1) % n];
            if (b - a).cross(p - a) < 0.0 {
                return false;
            }
        }
        true
    }

    pub fn min_z(&self) -> f64 {
        self.verts.iter().map(|v| v.z).fold(f64::INFINITY, f64::min)
    }

    pub fn max_z(&self) -> f64 {
        self.verts.iter().map(|v| v.z).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn perimeter(&self) -> f64 {
        let n = self.verts.len();
        (0..n)
            .map(|i| (self.verts[(i + 1) % n] - self.verts[i]).length())
            .sum()
    }
}

/// One clipped contact. `point` is in world coordinates; `depth` is the
/// positive penetration along the manifold normal; `feature` identifies the
/// (reference face, incident vertex) pair for warm-start matching.
#[derive(Clone, Copy, Debug)]
pub struct ContactPoint {
    pub point: Vec2,
    pub depth: f64,
    pub feature: u32,
}

/// Contact manifold between two convex polygons. `normal` points from `a`
/// toward `b` (push `b` along +normal to separate).
#[derive(Clone, Debug)]
pub struct Manifold {
    pub normal: Vec2,
    pub points: Vec<ContactPoint>,
}

struct FaceSep {
    face: usize,
    sep: f64,
}

/// Deepest face separation of `other` against every face of `poly`.
/// Positive means separated along that face normal.
fn best_face(poly: &Polygon, other: &Polygon) -> FaceSep {
    let n = poly.verts().len();
    let mut best = FaceSep {
        face: 0,
        sep: f64::NEG_INFINITY,
    };
    for i in 0..n {
        let a = poly.verts()[i];
        let b = poly.verts()[(i + 1) % n];
        let normal = (b - a).perp().normalized() * -1.0; // outward for CCW
        let mut min_d = f64::INFINITY;
        for &v in other.verts() {
            let d = normal.dot(v - a);
            if d < min_d {
                min_d = d;
            }
        }
        if min_d > best.sep {
            best = FaceSep { face: i, sep: min_d };
        }
    }
    best
}

fn face_normal(poly: &Polygon, i: usize) -> Vec2 {
    let n = poly.verts().len();
    let a = poly.verts()[i];
    let b = poly.verts()[(i + 1) % n];
    (b - a).perp().normalized() * -1.0
}

/// SAT overlap test with clipped manifold. Returns None when separated.
/// The reference face is the least-penetrating one; ties keep `a` as
/// reference so results are symmetric only up to normal sign, which is why
/// callers canonicalize the argument order.
pub fn contact_manifold(a: &Polygon, b: &Polygon) -> Option<Manifold> {
    let sep_a = best_face(a, b);
    if sep_a.sep > 0.0 {
        return None;
    }
    let sep_b = best_face(b, a);
    if sep_b.sep > 0.0 {
        return None;
    }

    // Reference on whichever polygon penetrates least, with a small bias
    // toward `a` for stability under symmetric overlap.
    let (reference, incident, ref_face, flip) = if sep_b.sep > sep_a.sep + 1e-10 {
        (b, a, sep_b.face, true)
    } else {
        (a, b, sep_a.face, false)
    };

    let n = reference.verts().len();
    let rv1 = reference.verts()[ref_face];
    let rv2 = reference.verts()[(ref_face + 1) % n];
    let ref_normal = face_normal(reference, ref_face);

    // Incident face: most anti-parallel to the reference normal.
    let m = incident.verts().len();
    let mut inc_face = 0;
    let mut min_dot = f64::INFINITY;
    for i in 0..m {
        let d = face_normal(incident, i).dot(ref_normal);
        if d < min_dot {
            min_dot = d;
            inc_face = i;
        }
    }
    let mut p1 = incident.verts()[inc_face];
    let mut p2 = incident.verts()[(inc_face + 1) % m];
    let mut id1 = inc_face as u32;
    let mut id2 = ((inc_face + 1) % m) as u32;

    // Clip the incident segment to the reference face's side planes.
    let tangent = (rv2 - rv1).normalized();
    for (plane_p, sign, plane_id) in [(rv1, -1.0, 100_u32), (rv2, 1.0, 200_u32)] {
        let d1 = tangent.dot(p1 - plane_p) * sign;
        let d2 = tangent.dot(p2 - plane_p) * sign;
        if d1 > 0.0 && d2 > 0.0 {
            return None; // fully clipped away; grazing contact
        }
        if d1 > 0.0 {
            let t = d1 / (d1 - d2);
            p1 = p1 + (p2 - p1) * t;
            id1 = plane_id;
        } else if d2 > 0.0 {
            let t = d2 / (d2 - d1);
            p2 = p2 + (p1 - p2) * t;
            id2 = plane_id;
        }
    }

    let mut points = Vec::with_capacity(2);
    for (p, vid) in [(p1, id1), (p2, id2)] {
        let depth = -ref_normal.dot(p - rv1);
        if depth >= 0.0 {
            points.push(ContactPoint {
                point: p,
                depth,
                feature: ((ref_face as u32) << 16) | (vid << 1) | u32::from(flip),
            });
        }
    }
    if points.is_empty() {
        return None;
    }
    // Normal convention: from a toward b.
    let normal = if flip { ref_normal * -1.0 } else { ref_normal };
    Some(Manifold { normal, points })
}

fn point_segment_dist(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let t = ((p - a).dot(ab) / ab.length_sq()).clamp(0.0, 1.0);
    (p - (a + ab * t)).length()
}

/// Exact separation distance between two non-overlapping convex polygons.
pub fn polygon_distance(a: &Polygon, b: &Polygon) -> f64 {
    let mut best = f64::INFINITY;
    let (na, nb) = (a.verts().len(), b.verts().len());
    for i in 0..na {
        for j in 0..nb {
            let d = point_segment_dist(
                a.verts()[i],
                b.verts()[j],
                b.verts()[(j + 1) % nb],
            );
            if d < best {
                best = d;
            }
            let d = point_segment_dist(
                b.verts()[j],
                a.verts()[i],
                a.verts()[(i + 1) % na],
            );
            if d < best {
                best = d;
            }
        }
    }
    best
}

/// Penetration depth if overlapping (positive), else negated separation
/// distance. Positive sign means penetration throughout the crate.
pub fn signed_gap(a: &Polygon, b: &Polygon) -> f64 {
    match contact_manifold(a, b) {
        Some(m) => m
            .points
            .iter()
            .map(|p| p.depth)
            .fold(0.0, f64::max),
        None => -polygon_distance(a, b),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_area_centroid_inertia() {
        let p = Polygon::rect(0.4, 0.2);
        assert!((p.area() - 0.08).abs() < 1e-12);
        let c = p.centroid();
        assert!(c.length() < 1e-12);
        // Unit-mass inertia of a centered box: (w^2 + h^2)/12.
        let unit_inertia = p.second_moment_origin() / p.area();
        assert!((unit_inertia - (0.16 + 0.04) / 12.0).abs() < 1e-12);
    }

    #[test]
    fn pose_round_trip() {
        let pose = Pose::new(0.3, -0.1, 0.7);
        let p = v2(0.05, 0.2);
        let w = pose.transform(p);
        let back = pose.inverse_transform(w);
        assert!((back - p).length() < 1e-14);
    }

    #[test]
    fn wrap_angle_range() {
        assert!((wrap_angle(3.0 * std::f64::consts::PI) - std::f64::consts::PI).abs() < 1e-12);
        assert!((wrap_angle(-3.5 * std::f64::consts::PI) - 0.5 * std::f64::consts::PI).abs() < 1e-12);
        assert_eq!(wrap_angle(0.25), 0.25);
    }

    #[test]
    fn overlapping_boxes_manifold() {
        // Unit squares offset by 0.9 in x: overlap 0.1, normal +x (a -> b),
        // two contact points on the overlap band.
        let a = Polygon::rect(1.0, 1.0);
        let b = Polygon::rect(1.0, 1.0).transformed(Pose::new(0.9, 0.0, 0.0));
        let m = contact_manifold(&a, &b).expect("boxes overlap");
        assert!((m.normal.x - 1.0).abs() < 1e-12, "normal {:?}", m.normal);
        assert_eq!(m.points.len(), 2);
        for p in &m.points {
            assert!((p.depth - 0.1).abs() < 1e-9, "depth {}", p.depth);
        }
    }

    #[test]
    fn separated_boxes_distance() {
        let a = Polygon::rect(1.0, 1.0);
        let b = Polygon::rect(1.0, 1.0).transformed(Pose::new(1.25, 0.0, 0.0));
        assert!(contact_manifold(&a, &b).is_none());
        assert!((polygon_distance(&a, &b) - 0.25).abs() < 1e-12);
        assert!((signed_gap(&a, &b) + 0.25).abs() < 1e-12);
    }

    #[test]
    fn signed_gap_positive_means_penetration() {
        let a = Polygon::rect(1.0, 1.0);
        let b = Polygon::rect(1.0, 1.0).transformed(Pose::new(0.0, 0.95, 0.0));
        let g = signed_gap(&a, &b);
        assert!((g - 0.05).abs() < 1e-9, "gap {g}");
    }

    #[test]
    fn rotated_box_contains() {
        let p = Polygon::rect(0.2, 0.1).transformed(Pose::new(0.0, 0.0, 0.3));
        assert!(p.contains(v2(0.0, 0.0)));
        assert!(!p.contains(v2(0.2, 0.0)));
    }

    #[test]
    fn diamond_vs_box_single_point() {
        // Diamond tip dipping 0.05 into the top of a box.
        let diamond = Polygon::new(vec![v2(0.1, 0.0), v2(0.0, 0.1), v2(-0.1, 0.0), v2(0.0, -0.1)]);
        let box_ = Polygon::rect_spans(-1.0, 1.0, -1.0, 0.0);
        let d = diamond.transformed(Pose::new(0.0, 0.05, 0.0));
        let m = contact_manifold(&box_, &d).expect("tip penetrates");
        assert_eq!(m.points.len(), 1);
        assert!((m.points[0].depth - 0.05).abs() < 1e-9);
        assert!((m.normal.z - 1.0).abs() < 1e-9);
    }
}
