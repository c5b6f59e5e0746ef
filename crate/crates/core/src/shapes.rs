//! Procedural planar object families, antipodal grasp annotation, scene
//! point synthesis, and the object-identity autoencoder.

use std::fmt;
use std::fs;
use std::path::Path;

use crate::autodiff::checkpoint;
use crate::autodiff::{
    mlp_forward, Activation, MlpSpec, OptKind, Optimizer, ParamStore, Session, Tensor,
};
use crate::geom::{v2, Polygon, Pose, Vec2};
use crate::rng::Stream;
use crate::sim::{BarSpec, BodyShape, DynamicBody, GraspCheck, GripperSpec, SimParams, World};
use crate::{Error, Result};

pub const N_TRAIN: usize = 12;
pub const N_HELDOUT: usize = 4;
pub const OBJECT_ID_DIM: usize = 16;
/// Canonical encoder input resolution (object-frame boundary cloud).
pub const AE_CLOUD_POINTS: usize = 128;
/// Decoder reconstruction resolution.
pub const AE_RECON_POINTS: usize = 96;
pub const SCENE_CLOUD_SIZE: usize = 256;
/// Identity-autoencoder budget that reaches the reconstruction bar.
pub const AE_TRAIN_STEPS: usize = 7200;
/// Friction coefficient used for grasp annotation; conservative against the
/// randomized range the policies train under.
pub const ANNOTATION_FRICTION: f64 = 0.5;
/// Planar surface density, kg per m^2 of cross-section.
const DENSITY: f64 = 50.0;
/// Boundary sampling pitch for synthesized point sets.
const CLOUD_SPACING: f64 = 0.003;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Family {
    Rectangle,
    Trapezoid,
    RoundedBox,
    NotchedBox,
    WideSlab,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::Rectangle,
        Family::Trapezoid,
        Family::RoundedBox,
        Family::NotchedBox,
        Family::WideSlab,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Rectangle => "rect",
            Family::Trapezoid => "trap",
            Family::RoundedBox => "round",
            Family::NotchedBox => "notch",
            Family::WideSlab => "slab",
        }
    }

    pub fn parse(s: &str) -> Result<Family> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::Shape(format!("unknown family {s:?}")))
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Dims per family: rect/slab [w, h]; trapezoid [w_bottom, w_top, h];
/// rounded [w, h, chamfer]; notched [w, h, notch_w, notch_depth].
#[derive(Clone, Debug, PartialEq)]
pub struct ShapeSpec {
    pub shape_id: String,
    pub family: Family,
    pub dims: Vec<f64>,
    pub mass: f64,
}

impl ShapeSpec {
    /// Convex parts with the flat bottom on z = 0 and x centered on 0.
    fn raw_parts(&self) -> Vec<Polygon> {
        let d = &self.dims;
        match self.family {
            Family::Rectangle | Family::WideSlab => {
                vec![Polygon::rect_spans(-d[0] / 2.0, d[0] / 2.0, 0.0, d[1])]
            }
            Family::Trapezoid => {
                let (wb, wt, h) = (d[0], d[1], d[2]);
                vec![Polygon::new(vec![
                    v2(-wb / 2.0, 0.0),
                    v2(wb / 2.0, 0.0),
                    v2(wt / 2.0, h),
                    v2(-wt / 2.0, h),
                ])]
            }
            Family::RoundedBox => {
                let (w, h, r) = (d[0], d[1], d[2]);
                let (hw, hh) = (w / 2.0, h / 2.0);
                // 45-degree corner chamfers; single segment per corner.
                vec![Polygon::new(vec![
                    v2(-hw + r, 0.0),
                    v2(hw - r, 0.0),
                    v2(hw, r),
                    v2(hw, 2.0 * hh - r),
                    v2(hw - r, 2.0 * hh),
                    v2(-hw + r, 2.0 * hh),
                    v2(-hw, 2.0 * hh - r),
                    v2(-hw, r),
                ])]
            }
            Family::NotchedBox => {
                let (w, h, nw, nd) = (d[0], d[1], d[2], d[3]);
                vec![
                    Polygon::rect_spans(-w / 2.0, w / 2.0, 0.0, h - nd),
                    Polygon::rect_spans(-w / 2.0, -nw / 2.0, h - nd, h),
                    Polygon::rect_spans(nw / 2.0, w / 2.0, h - nd, h),
                ]
            }
        }
    }

    fn area_centroid(parts: &[Polygon]) -> (f64, Vec2) {
        let mut area = 0.0;
        let mut cx = v2(0.0, 0.0);
        for p in parts {
            let a = p.area();
            area += a;
            cx = cx + p.centroid() * a;
        }
        (area, cx * (1.0 / area))
    }

    pub fn area(&self) -> f64 {
        Self::area_centroid(&self.raw_parts()).0
    }

    /// Convex parts recentered on the center of mass, as `DynamicBody` needs.
    pub fn body_shape(&self) -> BodyShape {
        let parts = self.raw_parts();
        let (_, com) = Self::area_centroid(&parts);
        let centered = parts
            .iter()
            .map(|p| Polygon::new(p.verts().iter().map(|&q| q - com).collect()))
            .collect();
        BodyShape::new(centered)
    }

    /// Upright rest pose at horizontal position x (flat bottom on the table).
    pub fn resting_pose(&self, x: f64) -> Pose {
        let (_, com) = Self::area_centroid(&self.raw_parts());
        Pose::new(x, com.z, 0.0)
    }

    pub fn width(&self) -> f64 {
        self.dims[0]
    }

    pub fn height(&self) -> f64 {
        match self.family {
            Family::Trapezoid => self.dims[2],
            _ => self.dims[1],
        }
    }
}

/// Parallel-jaw grasp in the object frame. The gripper's approach axis is
/// its local +x; `approach` is that axis as a unit vector, `width` the plate
/// separation the object needs along the closing axis (local z).
#[derive(Clone, Copy, Debug)]
pub struct GraspPose2 {
    pub pos: Vec2,
    pub angle: f64,
    pub approach: Vec2,
    pub width: f64,
}

impl GraspPose2 {
    pub fn new(pos: Vec2, angle: f64, width: f64) -> Self {
        GraspPose2 {
            pos,
            angle,
            approach: v2(angle.cos(), angle.sin()),
            width,
        }
    }

    pub fn local_pose(&self) -> Pose {
        Pose::new(self.pos.x, self.pos.z, self.angle)
    }

    pub fn world_pose(&self, object: Pose) -> Pose {
        object.compose(self.local_pose())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CloudFrame {
    Object,
    World,
}

#[derive(Clone, Debug)]
pub struct PointSet {
    pub points: Vec<Vec2>,
    pub frame: CloudFrame,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObjectId(pub [f64; OBJECT_ID_DIM]);

impl ObjectId {
    pub fn zero() -> Self {
        ObjectId([0.0; OBJECT_ID_DIM])
    }
}

pub fn generate_shape(family: Family, index: usize, rng: &mut Stream) -> ShapeSpec {
    let dims = match family {
        Family::Rectangle => vec![rng.uniform(0.09, 0.13), rng.uniform(0.050, 0.065)],
        Family::Trapezoid => {
            // Taper kept shallow enough that slanted-side pairs stay inside
            // the annotation friction cone, so a reachable side grasp exists.
            let wb = rng.uniform(0.10, 0.14);
            let wt = wb * rng.uniform(0.84, 0.92);
            vec![wb, wt, rng.uniform(0.056, 0.066)]
        }
        Family::RoundedBox => {
            let w = rng.uniform(0.09, 0.12);
            let h = rng.uniform(0.052, 0.065);
            vec![w, h, 0.25 * h * rng.uniform(0.6, 1.0)]
        }
        Family::NotchedBox => {
            let w = rng.uniform(0.10, 0.14);
            let h = rng.uniform(0.055, 0.070);
            vec![w, h, w * rng.uniform(0.25, 0.35), h * rng.uniform(0.28, 0.40)]
        }
        Family::WideSlab => vec![rng.uniform(0.13, 0.16), rng.uniform(0.048, 0.058)],
    };
    let mut spec = ShapeSpec {
        shape_id: format!("{}-{index:02}", family.name()),
        family,
        dims,
        mass: 0.0,
    };
    spec.mass = DENSITY * spec.area();
    debug_assert!(spec.height() >= 0.02 && spec.width() >= 0.08);
    spec
}

/// Friction-cone acceptance for an antipodal pair: inward contact normals
/// antiparallel within atan(mu), and the closing chord inside both cones so
/// the plates press against faces they can hold.
pub fn antipodal_accepts(m1: Vec2, m2: Vec2, d: Vec2, mu: f64) -> bool {
    let cone = mu.atan();
    let ang = |a: Vec2, b: Vec2| a.normalized().dot(b.normalized()).clamp(-1.0, 1.0).acos();
    ang(m1, -m2) <= cone && ang(m1, d) <= cone && ang(m2, -d) <= cone
}

/// All crossings of the line q(t) = origin + t*dir with the polygon's edges,
/// as (t, outward edge normal).
fn line_crossings(poly: &Polygon, origin: Vec2, dir: Vec2, out: &mut Vec<(f64, Vec2)>) {
    let vs = poly.verts();
    for i in 0..vs.len() {
        let a = vs[i];
        let b = vs[(i + 1) % vs.len()];
        let ab = b - a;
        let denom = dir.cross(ab);
        if denom.abs() < 1e-12 {
            continue;
        }
        let t = (a - origin).cross(ab) / denom;
        let s = (a - origin).cross(dir) / denom;
        if (0.0..1.0).contains(&s) {
            // CCW winding: outward normal is the edge direction rotated -90.
            out.push((t, -ab.perp().normalized()));
        }
    }
}

/// Antipodal grasp sampling over the shape boundary. Each accepted closing
/// chord yields two grasps, one per approach side.
pub fn sample_antipodal(spec: &ShapeSpec, mu: f64, n: usize, rng: &mut Stream) -> Vec<GraspPose2> {
    let parts = spec.body_shape().parts;
    let mut out = Vec::new();
    let mut hits = Vec::new();
    for _ in 0..n {
        let psi = rng.uniform(0.0, std::f64::consts::PI);
        let d = v2(psi.cos(), psi.sin());
        let e = d.perp();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for p in &parts {
            for v in p.verts() {
                let u = e.dot(*v);
                lo = lo.min(u);
                hi = hi.max(u);
            }
        }
        // Stay off the silhouette edges where chords graze corners.
        let span = hi - lo;
        let u = rng.uniform(lo + 0.1 * span, hi - 0.1 * span);
        let origin = e * u;

        hits.clear();
        for p in &parts {
            line_crossings(p, origin, d, &mut hits);
        }
        if hits.len() < 2 {
            continue;
        }
        hits.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let (t1, n1) = hits[0];
        let (t2, n2) = hits[hits.len() - 1];
        if t2 - t1 < 0.02 {
            continue;
        }
        if !antipodal_accepts(-n1, -n2, d, mu) {
            continue;
        }

        let center = origin + d * (0.5 * (t1 + t2));
        // Snap the closing axis to the contact-normal bisector so the jaw
        // plates sit flush on the faces; for parallel faces the width then
        // equals the face separation exactly.
        let axis = (n2 - n1).normalized();
        let (mut plo, mut phi) = (f64::INFINITY, f64::NEG_INFINITY);
        for p in &parts {
            for v in p.verts() {
                let q = axis.dot(*v);
                plo = plo.min(q);
                phi = phi.max(q);
            }
        }
        let width = phi - plo;
        for approach in [axis.perp(), -axis.perp()] {
            out.push(GraspPose2::new(
                center,
                approach.z.atan2(approach.x),
                width,
            ));
        }
    }
    out
}

/// Keeps grasps whose gripper placement collides at the given object pose:
/// the occluded subset that motivates repositioning before the pick.
pub fn filter_occluded(world: &World, resting: Pose, grasps: &[GraspPose2]) -> Vec<GraspPose2> {
    let mut w = world.clone();
    w.object.pose = resting;
    w.object.vel = v2(0.0, 0.0);
    w.object.omega = 0.0;
    grasps
        .iter()
        .filter(|g| w.check_grasp(g.world_pose(resting), g.width) == GraspCheck::Colliding)
        .copied()
        .collect()
}

/// Symmetric mean-of-squared-nearest chamfer distance.
pub fn chamfer(a: &[Vec2], b: &[Vec2]) -> f64 {
    assert!(!a.is_empty() && !b.is_empty());
    let one_way = |from: &[Vec2], to: &[Vec2]| -> f64 {
        let mut acc = 0.0;
        for p in from {
            let mut best = f64::INFINITY;
            for q in to {
                best = best.min((*p - *q).length_sq());
            }
            acc += best;
        }
        acc / from.len() as f64
    };
    one_way(a, b) + one_way(b, a)
}

/// Evenly spaced points along every edge of every polygon, midpoint rule.
pub fn boundary_points(polys: &[Polygon], spacing: f64) -> Vec<Vec2> {
    let mut out = Vec::new();
    for p in polys {
        let vs = p.verts();
        for i in 0..vs.len() {
            let a = vs[i];
            let b = vs[(i + 1) % vs.len()];
            let len = (b - a).length();
            let count = (len / spacing).ceil().max(2.0) as usize;
            for k in 0..count {
                let t = (k as f64 + 0.5) / count as f64;
                out.push(a + (b - a) * t);
            }
        }
    }
    out
}

/// Farthest-point subsample to exactly n points, seeded at index 0 so the
/// result is a pure function of the input order.
pub fn farthest_point_sample(pts: &[Vec2], n: usize) -> Vec<Vec2> {
    assert!(n >= 1 && pts.len() >= n, "{} points for fps {n}", pts.len());
    let mut chosen = Vec::with_capacity(n);
    let mut dist = vec![f64::INFINITY; pts.len()];
    let mut next = 0usize;
    for _ in 0..n {
        chosen.push(pts[next]);
        let picked = pts[next];
        let mut best = 0usize;
        for (i, p) in pts.iter().enumerate() {
            let d = (*p - picked).length_sq();
            if d < dist[i] {
                dist[i] = d;
            }
            if dist[i] > dist[best] {
                best = i;
            }
        }
        next = best;
    }
    chosen
}

/// Scene observation: boundary samples of object, gripper, and bar in the
/// world frame, jittered and farthest-point-resampled to n points. Interior
/// seams of multi-part shapes contribute a few inside points; they are kept
/// (cheap, and consistent across observations).
pub fn synth_scene_cloud(world: &World, n: usize, noise_std: f64, rng: &mut Stream) -> PointSet {
    let mut polys = world.object.shape.transformed(world.object.pose);
    polys.extend(world.left.shape.transformed(world.left.pose));
    polys.extend(world.right.shape.transformed(world.right.pose));
    let mut raw = boundary_points(&polys, CLOUD_SPACING);
    if noise_std > 0.0 {
        for p in &mut raw {
            p.x += rng.normal_scaled(noise_std);
            p.z += rng.normal_scaled(noise_std);
        }
    }
    PointSet {
        points: farthest_point_sample(&raw, n),
        frame: CloudFrame::World,
    }
}

/// Canonical object-frame boundary cloud for identity encoding.
pub fn object_cloud(spec: &ShapeSpec, m: usize) -> PointSet {
    let raw = boundary_points(&spec.body_shape().parts, 0.0015);
    PointSet {
        points: farthest_point_sample(&raw, m),
        frame: CloudFrame::Object,
    }
}

fn enc_point_spec() -> MlpSpec {
    MlpSpec::new(vec![2, 64, 128], Activation::Relu, Activation::Relu)
}

fn enc_head_spec() -> MlpSpec {
    MlpSpec::new(vec![128, OBJECT_ID_DIM], Activation::Identity, Activation::Identity)
}

fn dec_spec() -> MlpSpec {
    MlpSpec::new(
        vec![OBJECT_ID_DIM, 256, 2 * AE_RECON_POINTS],
        Activation::Relu,
        Activation::Identity,
    )
}

fn cloud_tensor(points: &[Vec2]) -> Tensor {
    let mut flat = Vec::with_capacity(points.len() * 2);
    for p in points {
        flat.push(p.x);
        flat.push(p.z);
    }
    Tensor::matrix(points.len(), 2, flat)
}

/// Point-order-invariant identity embedding: per-point features, column max,
/// linear head. Shares kernels with the taped training path.
pub fn encode_object(store: &ParamStore, cloud: &PointSet) -> ObjectId {
    let x = cloud_tensor(&cloud.points);
    let feats = mlp_forward(store, "enc", &enc_point_spec(), &x);
    let (rows, d) = (feats.rows(), feats.cols());
    let mut pooled = vec![f64::NEG_INFINITY; d];
    for r in 0..rows {
        for c in 0..d {
            let v = feats.data()[r * d + c];
            if v > pooled[c] {
                pooled[c] = v;
            }
        }
    }
    let lat = mlp_forward(
        store,
        "enc_head",
        &enc_head_spec(),
        &Tensor::matrix(1, d, pooled),
    );
    let mut id = [0.0; OBJECT_ID_DIM];
    id.copy_from_slice(lat.data());
    ObjectId(id)
}

pub fn init_object_ae(rng: &mut Stream) -> ParamStore {
    let mut store = ParamStore::new();
    store.init_mlp("enc", &enc_point_spec(), rng, 1.0);
    store.init_mlp("enc_head", &enc_head_spec(), rng, 1.0);
    store.init_mlp("dec", &dec_spec(), rng, 0.1);
    store
}

/// Trains the identity autoencoder by chamfer reconstruction of canonical
/// clouds, cycling shapes one per step. Returns the store and the mean loss
/// over the final cycle.
pub fn train_object_autoencoder(
    specs: &[ShapeSpec],
    master: u64,
    steps: usize,
) -> Result<(ParamStore, f64)> {
    assert!(specs.len() >= 2, "autoencoder needs at least two shapes");
    let clouds: Vec<Vec<[f64; 2]>> = specs
        .iter()
        .map(|s| {
            object_cloud(s, AE_CLOUD_POINTS)
                .points
                .iter()
                .map(|p| [p.x, p.z])
                .collect()
        })
        .collect();
    let mut rng = Stream::named(master, "object-ae/init");
    let mut store = init_object_ae(&mut rng);
    let mut opt = Optimizer::new(OptKind::Adam, 1e-3);
    let mut tail = vec![0.0; specs.len()];
    for step in 0..steps {
        // Cosine-free two-stage schedule: settle into a sharper optimum.
        opt.lr = if step * 4 >= steps * 3 { 2e-4 } else { 1e-3 };
        let i = step % specs.len();
        let mut s = Session::new(&store);
        let x = s.constant(cloud_tensor(
            &clouds[i].iter().map(|p| v2(p[0], p[1])).collect::<Vec<_>>(),
        ));
        let feats = s.mlp("enc", &enc_point_spec(), x);
        let pooled = s.tape.max_pool_seg(feats, AE_CLOUD_POINTS);
        let lat = s.mlp("enc_head", &enc_head_spec(), pooled);
        let flat = s.mlp("dec", &dec_spec(), lat);
        let recon = s.tape.reshape(flat, vec![AE_RECON_POINTS, 2]);
        let loss = s.tape.chamfer(recon, &clouds[i]);
        let lv = s.tape.value(loss).item();
        if !lv.is_finite() {
            return Err(Error::Gradient(format!(
                "object autoencoder diverged at step {step} (loss {lv})"
            )));
        }
        tail[i] = lv;
        let (grads, _) = s.backward(loss);
        opt.step(&mut store, &grads)?;
    }
    let mean = tail.iter().sum::<f64>() / tail.len() as f64;
    Ok((store, mean))
}

#[derive(Clone, Debug)]
pub struct GraspEntry {
    pub grasp: GraspPose2,
    pub occluded: bool,
}

#[derive(Clone, Debug)]
pub struct ShapeEntry {
    pub spec: ShapeSpec,
    pub train: bool,
    pub grasps: Vec<GraspEntry>,
    pub object_id: ObjectId,
}

impl ShapeEntry {
    pub fn occluded(&self) -> impl Iterator<Item = &GraspEntry> {
        self.grasps.iter().filter(|g| g.occluded)
    }
}

pub struct Registry {
    pub entries: Vec<ShapeEntry>,
    pub ae: ParamStore,
}

impl Registry {
    pub fn get(&self, shape_id: &str) -> Result<&ShapeEntry> {
        self.entries
            .iter()
            .find(|e| e.spec.shape_id == shape_id)
            .ok_or_else(|| Error::Shape(format!("unregistered shape {shape_id:?}")))
    }

    pub fn train_ids(&self) -> Vec<String> {
        self.entries
            .iter()
            .filter(|e| e.train)
            .map(|e| e.spec.shape_id.clone())
            .collect()
    }

    pub fn heldout_ids(&self) -> Vec<String> {
        self.entries
            .iter()
            .filter(|e| !e.train)
            .map(|e| e.spec.shape_id.clone())
            .collect()
    }
}

/// World with only the object placed at its rest pose and both effectors
/// parked, for grasp reachability classification.
pub fn canonical_world(spec: &ShapeSpec) -> World {
    let body = DynamicBody::new(
        spec.body_shape(),
        spec.resting_pose(0.0),
        spec.mass,
        (1.0, 0.85),
    );
    World::new(body, GripperSpec::default(), BarSpec::default(), SimParams::default())
}

pub fn build_shapes(master: u64) -> Vec<(ShapeSpec, bool)> {
    let mut s = Stream::named(master, "shapes");
    (0..N_TRAIN + N_HELDOUT)
        .map(|i| {
            let fam = Family::ALL[i % Family::ALL.len()];
            let mut child = s.child(i as u64);
            (generate_shape(fam, i, &mut child), i < N_TRAIN)
        })
        .collect()
}

fn near_duplicate(a: &GraspPose2, b: &GraspPose2) -> bool {
    (a.pos - b.pos).length() < 0.008
        && crate::geom::wrap_angle(a.angle - b.angle).abs() < 0.15
        && (a.width - b.width).abs() < 0.005
}

/// Samples, dedupes, and classifies grasps for one shape.
pub fn annotate_grasps(spec: &ShapeSpec, master: u64, attempts: usize) -> Vec<GraspEntry> {
    let mut rng = Stream::named(master, &format!("grasps/{}", spec.shape_id));
    let raw = sample_antipodal(spec, ANNOTATION_FRICTION, attempts, &mut rng);
    let mut kept: Vec<GraspPose2> = Vec::new();
    for g in raw {
        if kept.len() >= 32 {
            break;
        }
        if kept.iter().all(|k| !near_duplicate(k, &g)) {
            kept.push(g);
        }
    }
    let world = canonical_world(spec);
    let resting = spec.resting_pose(0.0);
    kept.into_iter()
        .map(|grasp| {
            let check = world.check_grasp(grasp.world_pose(resting), grasp.width);
            GraspEntry {
                grasp,
                occluded: check == GraspCheck::Colliding,
            }
        })
        .collect()
}

/// Builds the full registry: shapes, grasp annotations, and identity
/// latents from an autoencoder fitted on the training shapes.
pub fn build_registry(master: u64, ae_steps: usize) -> Result<Registry> {
    let shapes = build_shapes(master);
    let train_specs: Vec<ShapeSpec> = shapes
        .iter()
        .filter(|(_, train)| *train)
        .map(|(s, _)| s.clone())
        .collect();
    let (ae, _) = train_object_autoencoder(&train_specs, master, ae_steps)?;

    let mut entries = Vec::new();
    for (spec, train) in shapes {
        let grasps = annotate_grasps(&spec, master, 96);
        let n_occ = grasps.iter().filter(|g| g.occluded).count();
        if n_occ == 0 {
            return Err(Error::Shape(format!(
                "{} has no occluded grasp",
                spec.shape_id
            )));
        }
        if train && n_occ == grasps.len() {
            return Err(Error::Shape(format!(
                "{} has no reachable grasp",
                spec.shape_id
            )));
        }
        let object_id = encode_object(&ae, &object_cloud(&spec, AE_CLOUD_POINTS));
        if !object_id.0.iter().all(|v| v.is_finite()) {
            return Err(Error::Shape(format!("{} latent non-finite", spec.shape_id)));
        }
        entries.push(ShapeEntry {
            spec,
            train,
            grasps,
            object_id,
        });
    }
    Ok(Registry { entries, ae })
}

pub fn write_registry(reg: &Registry, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut shapes = String::from("shape_id\tfamily\ttrain\tmass\tdims\n");
    let mut grasps =
        String::from("shape_id\tgrasp_index\tx\tz\tangle\tapproach_x\tapproach_z\twidth\toccluded_flag\n");
    let mut ids = String::from("shape_id");
    for k in 0..OBJECT_ID_DIM {
        ids.push_str(&format!("\tid{k}"));
    }
    ids.push('\n');
    for e in &reg.entries {
        let dims = e
            .spec
            .dims
            .iter()
            .map(|d| d.to_string())
            .collect::<Vec<_>>()
            .join(",");
        shapes.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            e.spec.shape_id,
            e.spec.family,
            e.train as u8,
            e.spec.mass,
            dims
        ));
        for (gi, g) in e.grasps.iter().enumerate() {
            grasps.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                e.spec.shape_id,
                gi,
                g.grasp.pos.x,
                g.grasp.pos.z,
                g.grasp.angle,
                g.grasp.approach.x,
                g.grasp.approach.z,
                g.grasp.width,
                g.occluded as u8
            ));
        }
        ids.push_str(&e.spec.shape_id);
        for v in e.object_id.0 {
            ids.push_str(&format!("\t{v}"));
        }
        ids.push('\n');
    }
    fs::write(dir.join("shapes.tsv"), shapes)?;
    fs::write(dir.join("grasps.tsv"), grasps)?;
    fs::write(dir.join("object_ids.tsv"), ids)?;
    checkpoint::save(&reg.ae, &dir.join("object_ae.ckpt"))
}

fn parse_f64(s: &str, ctx: &str) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| Error::Dataset(format!("bad float {s:?} in {ctx}")))
}

pub fn read_registry(dir: &Path) -> Result<Registry> {
    let shapes_txt = fs::read_to_string(dir.join("shapes.tsv"))?;
    let grasps_txt = fs::read_to_string(dir.join("grasps.tsv"))?;
    let ids_txt = fs::read_to_string(dir.join("object_ids.tsv"))?;
    let ae = checkpoint::load(&dir.join("object_ae.ckpt"))?;

    let mut entries = Vec::new();
    for line in shapes_txt.lines().skip(1) {
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 5 {
            return Err(Error::Dataset(format!("bad shapes.tsv row {line:?}")));
        }
        let dims = f[4]
            .split(',')
            .map(|d| parse_f64(d, "shapes.tsv dims"))
            .collect::<Result<Vec<f64>>>()?;
        entries.push(ShapeEntry {
            spec: ShapeSpec {
                shape_id: f[0].to_string(),
                family: Family::parse(f[1])?,
                dims,
                mass: parse_f64(f[3], "shapes.tsv mass")?,
            },
            train: f[2] == "1",
            grasps: Vec::new(),
            object_id: ObjectId::zero(),
        });
    }
    for line in grasps_txt.lines().skip(1) {
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 9 {
            return Err(Error::Dataset(format!("bad grasps.tsv row {line:?}")));
        }
        let e = entries
            .iter_mut()
            .find(|e| e.spec.shape_id == f[0])
            .ok_or_else(|| Error::Dataset(format!("grasp for unknown shape {:?}", f[0])))?;
        e.grasps.push(GraspEntry {
            grasp: GraspPose2::new(
                v2(parse_f64(f[2], "grasp x")?, parse_f64(f[3], "grasp z")?),
                parse_f64(f[4], "grasp angle")?,
                parse_f64(f[7], "grasp width")?,
            ),
            occluded: f[8] == "1",
        });
    }
    for line in ids_txt.lines().skip(1) {
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 1 + OBJECT_ID_DIM {
            return Err(Error::Dataset(format!("bad object_ids.tsv row {line:?}")));
        }
        let e = entries
            .iter_mut()
            .find(|e| e.spec.shape_id == f[0])
            .ok_or_else(|| Error::Dataset(format!("latent for unknown shape {:?}", f[0])))?;
        for k in 0..OBJECT_ID_DIM {
            e.object_id.0[k] = parse_f64(f[1 + k], "object id")?;
        }
    }
    Ok(Registry { entries, ae })
}
