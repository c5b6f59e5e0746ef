//! Contact generation and the sequential-impulse solver. One dynamic object
//! against a static table and two kinematic effectors; effectors have
//! infinite effective mass in the velocity solve but yield positionally so
//! object penetration stays capped (a position-controlled arm stalls at
//! contact instead of crushing).

use std::collections::BTreeMap;

use super::body::{DynamicBody, Effector};
use super::SimParams;
use crate::geom::{contact_manifold, v2, Polygon, Vec2};

/// Which obstacle the object touches. Order fixes solver iteration order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum PairId {
    Table = 0,
    Left = 1,
    Right = 2,
}

#[derive(Clone, Debug)]
pub struct Contact {
    pub pair: PairId,
    pub feature: u64,
    pub point: Vec2,
    /// Unit normal pointing from the obstacle into the object.
    pub normal: Vec2,
    /// Penetration when positive; negative is a speculative contact at
    /// that separation (admitted so near-touching features stay in the
    /// solve instead of flickering in and out across steps).
    pub depth: f64,
    pub jn: f64,
    pub jt: f64,
}

pub type ImpulseCache = BTreeMap<u64, (f64, f64)>;

fn pack_feature(pair: PairId, a_part: usize, b_part: usize, feature: u32) -> u64 {
    ((pair as u64) << 56) | ((a_part as u64) << 48) | ((b_part as u64) << 40) | feature as u64
}

/// Contacts between the object and the table half-space z <= table_z.
/// Vertices within `margin` above the table are kept as speculative
/// contacts; without them a nearly flat body alternates between
/// single-corner manifolds and rocks forever instead of coming to rest.
fn table_contacts(object: &DynamicBody, table_z: f64, margin: f64, out: &mut Vec<Contact>) {
    for (pi, poly) in object.shape.transformed(object.pose).iter().enumerate() {
        // Up to the two deepest vertices per convex part.
        let mut below: Vec<(usize, f64)> = poly
            .verts()
            .iter()
            .enumerate()
            .filter(|(_, v)| v.z <= table_z + margin)
            .map(|(i, v)| (i, table_z - v.z))
            .collect();
        below.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
        for &(vi, depth) in below.iter().take(2) {
            out.push(Contact {
                pair: PairId::Table,
                feature: pack_feature(PairId::Table, pi, 0, vi as u32),
                point: poly.verts()[vi],
                normal: v2(0.0, 1.0),
                depth,
                jn: 0.0,
                jt: 0.0,
            });
        }
    }
}

fn effector_contacts(
    object: &DynamicBody,
    eff_polys: &[Polygon],
    pair: PairId,
    out: &mut Vec<Contact>,
) {
    let obj_polys = object.shape.transformed(object.pose);
    for (ei, ep) in eff_polys.iter().enumerate() {
        for (oi, op) in obj_polys.iter().enumerate() {
            if let Some(m) = contact_manifold(ep, op) {
                for p in &m.points {
                    out.push(Contact {
                        pair,
                        feature: pack_feature(pair, ei, oi, p.feature),
                        point: p.point,
                        normal: m.normal,
                        depth: p.depth,
                        jn: 0.0,
                        jt: 0.0,
                    });
                }
            }
        }
    }
}

pub fn generate_contacts(
    object: &DynamicBody,
    left: &Effector,
    right: &Effector,
    table_z: f64,
    margin: f64,
) -> Vec<Contact> {
    let mut out = Vec::new();
    table_contacts(object, table_z, margin, &mut out);
    effector_contacts(object, &left.shape.transformed(left.pose), PairId::Left, &mut out);
    effector_contacts(object, &right.shape.transformed(right.pose), PairId::Right, &mut out);
    out
}

fn obstacle_velocity_at(pair: PairId, left: &Effector, right: &Effector, p: Vec2) -> Vec2 {
    match pair {
        PairId::Table => v2(0.0, 0.0),
        PairId::Left => left.velocity_at(p),
        PairId::Right => right.velocity_at(p),
    }
}

fn contact_friction(pair: PairId, object: &DynamicBody, left: &Effector, right: &Effector, table: (f64, f64)) -> (f64, f64) {
    let other = match pair {
        PairId::Table => table,
        PairId::Left => left.friction,
        PairId::Right => right.friction,
    };
    (
        (object.friction.0 * other.0).sqrt(),
        (object.friction.1 * other.1).sqrt(),
    )
}

/// Warm start plus fixed-count velocity iterations. Zero restitution: the
/// target normal velocity is zero for touching contacts, while a speculative
/// contact at separation s may still close at up to s/dt so it lands exactly
/// this step instead of being stopped mid-air.
pub fn solve_velocity(
    object: &mut DynamicBody,
    left: &Effector,
    right: &Effector,
    table_friction: (f64, f64),
    contacts: &mut [Contact],
    cache: &ImpulseCache,
    iters: usize,
    dt: f64,
) {
    // Warm start: reapply cached impulses for persistent features.
    for c in contacts.iter_mut() {
        if let Some(&(jn, jt)) = cache.get(&c.feature) {
            c.jn = jn;
            c.jt = jt;
            let t = c.normal.perp();
            let imp = c.normal * jn + t * jt;
            let r = c.point - object.pose.pos;
            object.vel = object.vel + imp * object.inv_mass;
            object.omega += object.inv_inertia * r.cross(imp);
        }
    }

    for _ in 0..iters {
        for c in contacts.iter_mut() {
            let r = c.point - object.pose.pos;
            let vo = obstacle_velocity_at(c.pair, left, right, c.point);

            // Normal impulse toward zero approach velocity (less the
            // closing allowance for a still-separated contact).
            let rel = object.velocity_at(c.point) - vo;
            let vn = c.normal.dot(rel);
            let allowance = (-c.depth).max(0.0) / dt;
            let rn = r.cross(c.normal);
            let kn = object.inv_mass + object.inv_inertia * rn * rn;
            let dj = -(vn + allowance) / kn;
            let jn_new = (c.jn + dj).max(0.0);
            let applied = jn_new - c.jn;
            c.jn = jn_new;
            let imp = c.normal * applied;
            object.vel = object.vel + imp * object.inv_mass;
            object.omega += object.inv_inertia * r.cross(imp);

            // Friction clamped by the Coulomb cone; static bound near rest,
            // dynamic bound when sliding.
            let t = c.normal.perp();
            let rel = object.velocity_at(c.point) - vo;
            let vt = t.dot(rel);
            let rt = r.cross(t);
            let kt = object.inv_mass + object.inv_inertia * rt * rt;
            let (mu_s, mu_d) = contact_friction(c.pair, object, left, right, table_friction);
            let mu = if vt.abs() > 0.01 { mu_d } else { mu_s };
            let bound = mu * c.jn;
            let jt_new = (c.jt - vt / kt).clamp(-bound, bound);
            let applied = jt_new - c.jt;
            c.jt = jt_new;
            let imp = t * applied;
            object.vel = object.vel + imp * object.inv_mass;
            object.omega += object.inv_inertia * r.cross(imp);
        }
    }
}

/// Baumgarte-style non-linear position correction applied to the object.
/// Contacts are regenerated every iteration because corrections move the
/// geometry.
pub fn correct_positions(
    object: &mut DynamicBody,
    left: &Effector,
    right: &Effector,
    table_z: f64,
    params: &SimParams,
) {
    for _ in 0..params.position_iters {
        let contacts = generate_contacts(object, left, right, table_z, params.contact_margin);
        for c in &contacts {
            let pen = c.depth - params.slop;
            if pen <= 0.0 {
                continue;
            }
            let correction = (params.baumgarte * pen).min(params.max_correction);
            let r = c.point - object.pose.pos;
            let rn = r.cross(c.normal);
            let kn = object.inv_mass + object.inv_inertia * rn * rn;
            let p = correction / kn;
            object.pose.pos = object.pose.pos + c.normal * (p * object.inv_mass);
            object.pose.theta += object.inv_inertia * rn * p;
        }
    }
}

/// Hard caps after the iterative pass. The table cannot move, so the object
/// is projected out of it; effectors yield (back away along the deepest
/// contact normal) so object-effector penetration stays under the cap.
pub fn enforce_penetration_caps(
    object: &mut DynamicBody,
    left: &mut Effector,
    right: &mut Effector,
    table_z: f64,
    params: &SimParams,
) {
    let trigger = 0.5 * params.penetration_cap;
    let rest = 0.25 * params.penetration_cap;

    // Object out of table (translation only; rotation stays untouched).
    let min_z = object.shape.min_z_at(object.pose);
    let depth = table_z - min_z;
    if depth > trigger {
        object.pose.pos.z += depth - rest;
    }

    // The gripper is compliant: it retreats rather than crush the object.
    let mut deepest: Option<Contact> = None;
    let mut cs = Vec::new();
    effector_contacts(object, &left.shape.transformed(left.pose), PairId::Left, &mut cs);
    for c in cs.drain(..) {
        if deepest.as_ref().map_or(true, |d| c.depth > d.depth) {
            deepest = Some(c);
        }
    }
    if let Some(c) = deepest {
        if c.depth > trigger {
            // Normal points effector -> object; retreat the other way.
            let back = c.normal * -(c.depth - rest);
            left.pose.pos = left.pose.pos + back;
            left.retreat = left.retreat + back;
        }
    }

    // The bar is a stiff holder like the table: the object is projected out
    // of it, so a push can wedge the object against the bar without
    // bulldozing the constraint aside. A squeeze still resolves because the
    // gripper side yields.
    effector_contacts(object, &right.shape.transformed(right.pose), PairId::Right, &mut cs);
    let mut deepest: Option<Contact> = None;
    for c in cs {
        if deepest.as_ref().map_or(true, |d| c.depth > d.depth) {
            deepest = Some(c);
        }
    }
    if let Some(c) = deepest {
        if c.depth > trigger {
            object.pose.pos = object.pose.pos + c.normal * (c.depth - rest);
        }
    }
}

pub fn store_cache(contacts: &[Contact]) -> ImpulseCache {
    let mut cache = ImpulseCache::new();
    for c in contacts {
        cache.insert(c.feature, (c.jn, c.jt));
    }
    cache
}
