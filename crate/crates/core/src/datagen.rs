//! Self-supervised constraint-pose collection: sample bar placements against
//! randomized settled scenes, probe force closure at the desired grasp, and
//! keep the positives as a TSV dataset.

use crate::env::GraspEnv;
use crate::error::{Error, Result};
use crate::geom::{signed_gap, Pose};
use crate::par::par_map;
use crate::rng::Stream;
use crate::shapes::{GraspPose2, ObjectId, ShapeEntry};
use crate::sim::World;
use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::path::Path;

/// Probe force magnitude per kilogram of object mass.
pub const PROBE_FORCE_PER_KG: f64 = 25.0;
/// Seconds the probe force is held.
pub const PROBE_DURATION: f64 = 0.5;
/// Closure label threshold on the peak grasp-point speed during the probe.
pub const PROBE_SPEED_LIMIT: f64 = 5e-3;
/// Samples collected per shape by default.
pub const DEFAULT_PER_SHAPE: usize = 300;

/// Separation left between bar and object after the tangency slide; small
/// enough that the contact solver holds approach speed far below the label
/// threshold, large enough to register as non-intersecting.
const TANGENCY_GAP: f64 = 1e-6;
/// Attempt count after which a sub-1% acceptance rate aborts collection.
const ABORT_ATTEMPTS: usize = 10_000;
const ABORT_RATE: f64 = 0.01;
/// Two samples closer than this on every key field count as duplicates.
const DUP_TOL: f64 = 1e-6;

/// One positive force-closure example. The grasp is in the world frame as
/// it stood at labeling time; the object pose makes it recoverable in the
/// object frame.
#[derive(Clone, Debug)]
pub struct ConstraintSample {
    pub shape_id: String,
    pub object_pose: Pose,
    pub grasp: GraspPose2,
    /// Bar placement (x, theta) resting on the table.
    pub constraint: (f64, f64),
    pub object_id: ObjectId,
}

/// Per-shape collection tally. `rate` is the positive acceptance fraction.
#[derive(Clone, Debug)]
pub struct CollectStats {
    pub shape_id: String,
    pub accepted: usize,
    pub attempts: usize,
}

impl CollectStats {
    pub fn rate(&self) -> f64 {
        if self.attempts == 0 {
            0.0
        } else {
            self.accepted as f64 / self.attempts as f64
        }
    }
}

impl fmt::Display for CollectStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {}/{} accepted ({:.1}%)",
            self.shape_id,
            self.accepted,
            self.attempts,
            100.0 * self.rate()
        )
    }
}

/// Signed clearance between the bar placed at (x, theta) and the object:
/// positive penetration depth when overlapping, negative separation
/// otherwise. Pure query; the world is not touched.
fn bar_separation(world: &World, x: f64, theta: f64) -> f64 {
    let pose = world.bar.pose_on_table(x, theta, 0.0);
    let bar_polys = world.bar.body_shape().transformed(pose);
    let obj_polys = world.object.shape.transformed(world.object.pose);
    let mut best = f64::NEG_INFINITY;
    for a in &bar_polys {
        for b in &obj_polys {
            best = best.max(signed_gap(a, b));
        }
    }
    best
}

/// Draws a candidate bar pose near the object: x uniform within
/// 1.5 object widths of the object center, theta in (-pi/2, pi/2], then the
/// bar slides along the table toward the object until tangent. The slide is
/// what a compliant arm pressing toward the object does; without it a thin
/// bar sampled over the whole band almost never ends up close enough to
/// constrain anything, and every probe would trivially fail. The sampled
/// side and tilt survive the slide, so candidates stay diverse. The result
/// never intersects the object.
pub fn sample_candidate_pose(world: &World, object_width: f64, rng: &mut Stream) -> (f64, f64) {
    let obj_x = world.object.pose.pos.x;
    let band = 1.5 * object_width;
    let x_raw = obj_x + rng.uniform(-band, band);
    // uniform is half-open at the top; negate to close the upper end.
    let theta = -rng.uniform(-FRAC_PI_2, FRAC_PI_2);

    let side = if x_raw >= obj_x { 1.0 } else { -1.0 };
    // Outer bracket: separated. A raw draw overlapping the object walks
    // outward first (the spawn-intersection rejection, resolved by sliding
    // back to contact instead of discarding the draw).
    let mut hi = x_raw;
    let mut guard = 0;
    while bar_separation(world, hi, theta) >= 0.0 {
        hi += side * 0.5 * object_width;
        guard += 1;
        if guard > 8 {
            return (x_raw, theta);
        }
    }
    // Inner bracket: the bar footprint at the object center always overlaps
    // a table-resting object.
    let mut lo = obj_x;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if bar_separation(world, mid, theta) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (hi + side * TANGENCY_GAP, theta)
}

/// Places the bar at `constraint`, settles the scene, then applies the
/// probe force (25 N per kg of object mass, along the grasp approach, at
/// the grasp center) for `PROBE_DURATION`. Returns true iff the peak speed
/// of the grasp point stays under `PROBE_SPEED_LIMIT`. `grasp` is in the
/// world frame. The candidate must not intersect the object; the world is
/// left perturbed by the probe.
pub fn label_force_closure(
    world: &mut World,
    grasp: &GraspPose2,
    constraint: (f64, f64),
) -> Result<bool> {
    debug_assert!(
        bar_separation(world, constraint.0, constraint.1) < 1e-9,
        "labeling an intersecting candidate"
    );
    world.place_bar_on_table(constraint.0, constraint.1);
    world.settle(1200)?;
    let force = grasp.approach * (PROBE_FORCE_PER_KG * world.object.mass);
    let peak = world.force_probe(force, grasp.pos, PROBE_DURATION)?;
    Ok(peak < PROBE_SPEED_LIMIT)
}

/// Collects positives for one shape under full reset randomization. Each
/// attempt derives its own seed, so labels are reproducible per attempt and
/// the output is independent of scheduling. Aborts with a diagnostic when
/// the acceptance rate is still under 1% after 10k attempts; a healthy
/// scene accepts well above that and a starved one will not recover.
pub fn collect_shape(
    entry: &ShapeEntry,
    per_shape: usize,
    master: u64,
) -> Result<(Vec<ConstraintSample>, CollectStats)> {
    let shape_id = entry.spec.shape_id.clone();
    let mut env = GraspEnv::new(entry.clone());
    let mut samples: Vec<ConstraintSample> = Vec::new();
    let mut attempts = 0usize;
    while samples.len() < per_shape {
        if attempts >= ABORT_ATTEMPTS && (samples.len() as f64) < ABORT_RATE * attempts as f64 {
            return Err(Error::Dataset(format!(
                "{shape_id}: acceptance rate {:.2}% after {attempts} attempts; \
                 candidate geometry almost never wedges this shape",
                100.0 * samples.len() as f64 / attempts as f64
            )));
        }
        let attempt_seed =
            Stream::named(master, &format!("collect/{shape_id}/{attempts}")).raw();
        attempts += 1;
        if env.reset(true, attempt_seed).is_err() {
            continue;
        }
        let mut rng = Stream::named(attempt_seed, "collect/candidate");
        let candidate = sample_candidate_pose(&env.world, env.entry.spec.width(), &mut rng);
        if !env.place_constraint(candidate.0, candidate.1) {
            continue;
        }
        let object_pose = env.world.object.pose;
        let wp = env.grasp.world_pose(object_pose);
        let grasp = GraspPose2::new(wp.pos, wp.theta, env.grasp.width);
        // Solver faults and settle failures under a probe are evidence of
        // violent motion, not closure; skip rather than store or crash.
        let stable = match label_force_closure(&mut env.world, &grasp, candidate) {
            Ok(s) => s,
            Err(_) => continue,
        };
        if !stable {
            continue;
        }
        let key = [candidate.0, candidate.1, grasp.pos.x, grasp.pos.z, grasp.angle];
        let dup = samples.iter().any(|s| {
            let k = [
                s.constraint.0,
                s.constraint.1,
                s.grasp.pos.x,
                s.grasp.pos.z,
                s.grasp.angle,
            ];
            k.iter().zip(&key).all(|(a, b)| (a - b).abs() < DUP_TOL)
        });
        if dup {
            continue;
        }
        samples.push(ConstraintSample {
            shape_id: shape_id.clone(),
            object_pose,
            grasp,
            constraint: candidate,
            object_id: entry.object_id,
        });
    }
    let stats = CollectStats {
        shape_id,
        accepted: samples.len(),
        attempts,
    };
    Ok((samples, stats))
}

fn header() -> String {
    let ids: Vec<String> = (0..16).map(|i| format!("id{i}")).collect();
    format!(
        "shape_id\tobj_x\tobj_z\tobj_theta\tgrasp_x\tgrasp_z\tgrasp_angle\tgrasp_width\
         \tconstraint_x\tconstraint_theta\t{}",
        ids.join("\t")
    )
}

fn tsv_row(s: &ConstraintSample) -> String {
    let mut cols = vec![
        s.shape_id.clone(),
        s.object_pose.pos.x.to_string(),
        s.object_pose.pos.z.to_string(),
        s.object_pose.theta.to_string(),
        s.grasp.pos.x.to_string(),
        s.grasp.pos.z.to_string(),
        s.grasp.angle.to_string(),
        s.grasp.width.to_string(),
        s.constraint.0.to_string(),
        s.constraint.1.to_string(),
    ];
    cols.extend(s.object_id.0.iter().map(|v| v.to_string()));
    cols.join("\t")
}

fn parse_row(line: &str, lineno: usize) -> Result<ConstraintSample> {
    let cols: Vec<&str> = line.split('\t').collect();
    if cols.len() != 26 {
        return Err(Error::Dataset(format!(
            "row {lineno}: expected 26 columns, got {}",
            cols.len()
        )));
    }
    let num = |i: usize| -> Result<f64> {
        cols[i]
            .parse::<f64>()
            .map_err(|e| Error::Dataset(format!("row {lineno} col {i}: {e}")))
    };
    let mut id = [0.0; 16];
    for (k, slot) in id.iter_mut().enumerate() {
        *slot = num(10 + k)?;
    }
    Ok(ConstraintSample {
        shape_id: cols[0].to_string(),
        object_pose: Pose::new(num(1)?, num(2)?, num(3)?),
        grasp: GraspPose2::new(crate::geom::v2(num(4)?, num(5)?), num(6)?, num(7)?),
        constraint: (num(8)?, num(9)?),
        object_id: ObjectId(id),
    })
}

/// Collects `per_shape` positives for every entry and writes one TSV.
/// Shapes run through `par_map` and rows are written in entry order with
/// per-attempt seeds, so the file is byte-identical across reruns, thread
/// counts, and the `parallel` feature; consumers still must not attach
/// meaning to row order.
pub fn collect(
    entries: &[ShapeEntry],
    per_shape: usize,
    master: u64,
    out: &Path,
) -> Result<Vec<CollectStats>> {
    let jobs: Vec<ShapeEntry> = entries.to_vec();
    let results = par_map(jobs, |entry| collect_shape(&entry, per_shape, master));
    let mut stats = Vec::new();
    let mut text = header();
    text.push('\n');
    for r in results {
        let (samples, st) = r?;
        for s in &samples {
            text.push_str(&tsv_row(s));
            text.push('\n');
        }
        stats.push(st);
    }
    std::fs::write(out, text)?;
    Ok(stats)
}

/// Reads a dataset written by `collect`.
pub fn load_dataset(path: &Path) -> Result<Vec<ConstraintSample>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == header() => {}
        other => {
            return Err(Error::Dataset(format!(
                "unrecognized dataset header: {other:?}"
            )))
        }
    }
    lines
        .enumerate()
        .map(|(i, line)| parse_row(line, i + 2))
        .collect()
}
