//! Analytic synthetic scenes: a ray-cast box room with optional tilted
//! rectangular slabs and one sphere.
//!
//! Every planar pixel satisfies its stored plane equation exactly (before
//! optional noise), segmentation labels planar instances 1..N with the
//! sphere and nothing else mapped to 0, and the normal map carries the
//! exact analytic normals. Scenes are bit-reproducible per seed, which
//! makes them usable as test oracles: the generator stores the geometry it
//! rendered from.

use nalgebra::{Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::CameraIntrinsics;
use crate::grid::{DepthMap, Grid};
use crate::normal::CombinedNormalMap;
use crate::par::map_indexed;
use crate::plane::{orient_camera_facing, Plane3D};

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("camera position {pos:?} is outside the {room:?} room")]
    CameraOutsideRoom { pos: [f64; 3], room: [f64; 3] },
    #[error("invalid scene spec: {0}")]
    BadSpec(String),
}

/// Scene recipe. The room spans `[0, room[i]]` per world axis; the camera
/// sits at `cam_pos` looking along +z after yaw (around y) and pitch
/// (around x) are applied.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    /// Horizontal field of view, degrees; sets fx = fy.
    pub hfov_deg: f64,
    pub room: [f64; 3],
    pub cam_pos: [f64; 3],
    pub yaw_deg: f64,
    pub pitch_deg: f64,
    /// Extra tilted rectangular slabs, each its own planar instance.
    pub extra_planes: usize,
    pub sphere: bool,
    /// Additive zero-mean Gaussian depth noise, meters.
    pub noise_sigma: f64,
    pub rng_seed: u64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            width: 64,
            height: 48,
            hfov_deg: 60.0,
            room: [4.0, 3.0, 5.0],
            cam_pos: [2.0, 1.5, 0.8],
            yaw_deg: 0.0,
            pitch_deg: 0.0,
            extra_planes: 0,
            sphere: false,
            noise_sigma: 0.0,
            rng_seed: 0,
        }
    }
}

/// Sphere in the camera frame.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Sphere {
    pub center: [f64; 3],
    pub radius: f64,
}

/// Generated scene plus the exact geometry it was rendered from.
#[derive(Clone, Debug)]
pub struct SyntheticScene {
    pub cam: CameraIntrinsics,
    /// Depth with noise applied (equals `clean_depth` when sigma = 0).
    pub depth: DepthMap,
    /// Noiseless analytic depth.
    pub clean_depth: DepthMap,
    /// Instance ids: walls 1..6, slabs 7.., sphere and background 0.
    pub seg: Grid<u32>,
    /// Exact analytic normals (camera frame, camera-facing).
    pub normals: CombinedNormalMap,
    /// Camera-frame plane models, indexed by instance id - 1.
    pub planes: Vec<Plane3D>,
    pub sphere: Option<Sphere>,
    pub noise_sigma: f64,
}

struct WorldPlane {
    normal: Vector3<f64>,
    offset: f64,
}

struct Slab {
    plane: WorldPlane,
    center: Vector3<f64>,
    e1: Vector3<f64>,
    e2: Vector3<f64>,
    half1: f64,
    half2: f64,
}

struct WorldSphere {
    center: Vector3<f64>,
    radius: f64,
}

fn validate(spec: &SceneSpec) -> Result<(), SynthError> {
    if spec.width < 8 || spec.height < 8 {
        return Err(SynthError::BadSpec(format!(
            "image {}x{} too small (need >= 8x8)",
            spec.width, spec.height
        )));
    }
    if !(10.0..=170.0).contains(&spec.hfov_deg) {
        return Err(SynthError::BadSpec(format!(
            "hfov {} degrees outside [10, 170]",
            spec.hfov_deg
        )));
    }
    if spec.room.iter().any(|&s| s <= 0.0) {
        return Err(SynthError::BadSpec(format!("room extents {:?} must be positive", spec.room)));
    }
    if spec.noise_sigma < 0.0 {
        return Err(SynthError::BadSpec("noise_sigma must be >= 0".into()));
    }
    let margin = 1e-3;
    for a in 0..3 {
        if !(margin..spec.room[a] - margin).contains(&spec.cam_pos[a]) {
            return Err(SynthError::CameraOutsideRoom {
                pos: spec.cam_pos,
                room: spec.room,
            });
        }
    }
    Ok(())
}

/// Nearest wall hit along `dir` from `origin`; returns (t, wall id 1..6).
/// The room is closed, so a positive hit always exists for any nonzero dir.
fn wall_hit(origin: &Vector3<f64>, dir: &Vector3<f64>, room: &[f64; 3]) -> (f64, u32) {
    let mut best = (f64::INFINITY, 0u32);
    for axis in 0..3 {
        let d = dir[axis];
        if d.abs() < 1e-15 {
            continue;
        }
        let (bound, id) = if d < 0.0 {
            (0.0, 1 + 2 * axis as u32)
        } else {
            (room[axis], 2 + 2 * axis as u32)
        };
        let t = (bound - origin[axis]) / d;
        if t > 1e-9 && t < best.0 {
            best = (t, id);
        }
    }
    best
}

fn orthonormal_frame(n: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let helper = if n.x.abs() < 0.9 {
        Vector3::x()
    } else {
        Vector3::y()
    };
    let e1 = n.cross(&helper).normalize();
    let e2 = n.cross(&e1).normalize();
    (e1, e2)
}

/// Ray-casts the scene described by `spec`.
pub fn generate_scene(spec: &SceneSpec) -> Result<SyntheticScene, SynthError> {
    validate(spec)?;
    let (w, h) = (spec.width, spec.height);
    let fx = (w as f64 / 2.0) / (spec.hfov_deg.to_radians() / 2.0).tan();
    let cam = CameraIntrinsics::new(
        fx,
        fx,
        (w as f64 - 1.0) / 2.0,
        (h as f64 - 1.0) / 2.0,
        w,
        h,
    )
    .map_err(|e| SynthError::BadSpec(e.to_string()))?;

    let origin = Vector3::from(spec.cam_pos);
    let room = spec.room;
    let rot = Rotation3::from_axis_angle(&Vector3::y_axis(), spec.yaw_deg.to_radians())
        * Rotation3::from_axis_angle(&Vector3::x_axis(), spec.pitch_deg.to_radians());

    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);

    // A random ray through the central part of the image, in world frame.
    let central_ray = |rng: &mut ChaCha8Rng| -> Vector3<f64> {
        let u = rng.random_range(0.2 * w as f64..0.8 * w as f64);
        let v = rng.random_range(0.2 * h as f64..0.8 * h as f64);
        rot * cam.ray(u, v)
    };

    let mut slabs = Vec::with_capacity(spec.extra_planes);
    for _ in 0..spec.extra_planes {
        let dir = central_ray(&mut rng);
        let (t_wall, _) = wall_hit(&origin, &dir, &room);
        let frac = rng.random_range(0.35..0.7);
        let center = origin + dir * (frac * t_wall);
        // Face roughly toward the camera, with a bounded tilt.
        let toward = (origin - center).normalize();
        let wobble = Vector3::new(
            rng.random_range(-0.3..0.3),
            rng.random_range(-0.3..0.3),
            rng.random_range(-0.3..0.3),
        );
        let normal = (toward + wobble).normalize();
        let (e1, e2) = orthonormal_frame(&normal);
        let scale = room.iter().cloned().fold(f64::INFINITY, f64::min);
        slabs.push(Slab {
            plane: WorldPlane {
                normal,
                offset: normal.dot(&center),
            },
            center,
            e1,
            e2,
            half1: rng.random_range(0.12..0.3) * scale,
            half2: rng.random_range(0.12..0.3) * scale,
        });
    }

    let sphere = if spec.sphere {
        let dir = central_ray(&mut rng);
        let (t_wall, _) = wall_hit(&origin, &dir, &room);
        let frac = rng.random_range(0.4..0.7);
        let mut center = origin + dir * (frac * t_wall);
        let dist = (center - origin).norm();
        let radius = rng.random_range(0.08..0.16) * dist.max(1.0);
        for a in 0..3 {
            center[a] = center[a].clamp(radius + 0.05, room[a] - radius - 0.05);
        }
        Some(WorldSphere { center, radius })
    } else {
        None
    };

    // Camera-frame plane models for walls and slabs, camera-facing.
    let to_cam_plane = |n_w: &Vector3<f64>, d_w: f64, pixel_count: usize| {
        let n_c = rot.inverse() * n_w;
        let d_c = d_w - n_w.dot(&origin);
        let (n, d) = orient_camera_facing(n_c, d_c);
        Plane3D {
            normal: [n.x, n.y, n.z],
            offset: d,
            inlier_count: pixel_count,
            rms_residual: 0.0,
        }
    };

    let mut world_planes: Vec<WorldPlane> = Vec::new();
    for axis in 0..3 {
        let mut n = Vector3::zeros();
        n[axis] = 1.0;
        world_planes.push(WorldPlane { normal: n, offset: 0.0 });
        let mut n = Vector3::zeros();
        n[axis] = 1.0;
        world_planes.push(WorldPlane {
            normal: n,
            offset: room[axis],
        });
    }
    // Reorder to match wall ids: low/high per axis interleaved already:
    // ids 1,2 = x walls, 3,4 = y walls, 5,6 = z walls.

    let rows = map_indexed(h, |y| {
        let mut depth_row = vec![0.0f64; w];
        let mut seg_row = vec![0u32; w];
        let mut normal_row = vec![[0.0f64; 3]; w];
        for x in 0..w {
            let dir = rot * cam.ray(x as f64, y as f64);
            let (mut t, mut id) = wall_hit(&origin, &dir, &room);
            for (k, slab) in slabs.iter().enumerate() {
                let denom = slab.plane.normal.dot(&dir);
                if denom.abs() < 1e-12 {
                    continue;
                }
                let ts = (slab.plane.offset - slab.plane.normal.dot(&origin)) / denom;
                if ts <= 1e-9 || ts >= t {
                    continue;
                }
                let p = origin + dir * ts;
                let local = p - slab.center;
                if local.dot(&slab.e1).abs() <= slab.half1 && local.dot(&slab.e2).abs() <= slab.half2
                {
                    t = ts;
                    id = 7 + k as u32;
                }
            }
            let mut sphere_normal: Option<Vector3<f64>> = None;
            if let Some(s) = &sphere {
                let oc = origin - s.center;
                let a = dir.dot(&dir);
                let b = 2.0 * dir.dot(&oc);
                let c = oc.dot(&oc) - s.radius * s.radius;
                let disc = b * b - 4.0 * a * c;
                if disc > 0.0 {
                    let sq = disc.sqrt();
                    let t1 = (-b - sq) / (2.0 * a);
                    let t2 = (-b + sq) / (2.0 * a);
                    let ts = if t1 > 1e-9 { t1 } else { t2 };
                    if ts > 1e-9 && ts < t {
                        t = ts;
                        id = 0;
                        let p = origin + dir * ts;
                        let n_w = (p - s.center) / s.radius;
                        let (n, _) = orient_camera_facing(rot.inverse() * n_w, 0.0);
                        sphere_normal = Some(n);
                    }
                }
            }
            depth_row[x] = t;
            seg_row[x] = id;
            normal_row[x] = if let Some(n) = sphere_normal {
                [n.x, n.y, n.z]
            } else {
                // Filled from the plane table after the loop; store the id
                // marker for now via the plane lookup below.
                [0.0, 0.0, 0.0]
            };
        }
        (depth_row, seg_row, normal_row)
    });

    let mut depth_data = Vec::with_capacity(w * h);
    let mut seg_data = Vec::with_capacity(w * h);
    let mut normal_data = Vec::with_capacity(w * h);
    for (d, s, n) in rows {
        depth_data.extend(d);
        seg_data.extend(s);
        normal_data.extend(n);
    }
    let seg = Grid::from_vec(w, h, seg_data);

    // Plane models with per-instance pixel counts.
    let mut counts = vec![0usize; 6 + slabs.len()];
    for &id in seg.data() {
        if id > 0 {
            counts[id as usize - 1] += 1;
        }
    }
    let mut planes = Vec::with_capacity(6 + slabs.len());
    for (i, wp) in world_planes.iter().enumerate() {
        planes.push(to_cam_plane(&wp.normal, wp.offset, counts[i]));
    }
    for (k, slab) in slabs.iter().enumerate() {
        planes.push(to_cam_plane(&slab.plane.normal, slab.plane.offset, counts[6 + k]));
    }

    // Planar pixels take their instance's exact normal.
    for i in 0..w * h {
        let id = seg.data()[i];
        if id > 0 {
            normal_data[i] = planes[id as usize - 1].normal;
        }
    }
    let normals = CombinedNormalMap {
        normals: Grid::from_vec(w, h, normal_data),
        valid: Grid::new(w, h, true),
        region_of: seg.clone(),
    };

    let clean_depth = DepthMap::from_values(Grid::from_vec(w, h, depth_data.clone()));
    let depth = if spec.noise_sigma > 0.0 {
        for v in depth_data.iter_mut() {
            let n: f64 = rng.sample(StandardNormal);
            *v += spec.noise_sigma * n;
        }
        DepthMap::from_values(Grid::from_vec(w, h, depth_data))
    } else {
        clean_depth.clone()
    };

    Ok(SyntheticScene {
        cam,
        depth,
        clean_depth,
        seg,
        normals,
        planes,
        sphere: sphere.map(|s| {
            let c = rot.inverse() * (s.center - origin);
            Sphere {
                center: [c.x, c.y, c.z],
                radius: s.radius,
            }
        }),
        noise_sigma: spec.noise_sigma,
    })
}
