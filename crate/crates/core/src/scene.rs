//! Animated scenes: geometry, materials, emitters and a keyframed pinhole camera.
//!
//! Scenes are loaded from JSON (see `docs/scene-format.md`), validated once and
//! are immutable afterwards. Each discrete frame `s` in `1..=frames` maps to the
//! normalized time `(s - 1) / (frames - 1)`; camera and primitive keyframes are
//! interpolated at that time and the result is frozen into a [`FrameGeometry`].

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{Quat, Vec3};

/// Offset applied along the surface normal to secondary-ray origins.
pub const RAY_EPSILON: f64 = 1e-4;

const UNIT_QUAT_TOLERANCE: f64 = 1e-6;
const MIN_TRIANGLE_AREA: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraKeyframe {
    pub t: f64,
    pub pos: Vec3,
    pub quat: Quat,
}

/// Pinhole camera. Looks down its local `-z` axis with `+y` up.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub keyframes: Vec<CameraKeyframe>,
    /// Vertical field of view in radians.
    pub fov: f64,
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosedCamera {
    pub position: Vec3,
    pub orientation: Quat,
    pub fov: f64,
    pub width: u32,
    pub height: u32,
    tan_half_fov: f64,
    /// Camera axes in world space: local `+x`, `+y` and `-z`.
    basis: [Vec3; 3],
}

impl PosedCamera {
    /// Ray through film position `(x + jx, y + jy)`; `y = 0` is the top row.
    #[inline]
    pub fn primary_ray(&self, x: u32, y: u32, jx: f64, jy: f64) -> Ray {
        let tan_half = self.tan_half_fov;
        let aspect = self.width as f64 / self.height as f64;
        let u = (x as f64 + jx) / self.width as f64;
        let v = (y as f64 + jy) / self.height as f64;
        let local = Vec3::new(
            (2.0 * u - 1.0) * tan_half * aspect,
            (1.0 - 2.0 * v) * tan_half,
            -1.0,
        );
        let [right, up, forward] = self.basis;
        let dir = right * local.x + up * local.y + forward * -local.z;
        Ray::new(self.position, dir.normalized())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Shape {
    Sphere { center: Vec3, radius: f64 },
    Triangle { vertices: [Vec3; 3] },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Material {
    Lambertian { albedo: Vec3 },
    Mirror { reflectance: f64 },
    /// Two-sided diffuse emitter; does not scatter.
    Emitter { radiance: Vec3 },
}

impl Material {
    pub fn emission(&self) -> Option<Vec3> {
        match *self {
            Material::Emitter { radiance } => Some(radiance),
            _ => None,
        }
    }
}

/// Rigid transform keyframe: `world = quat.rotate(local) + translation`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionKeyframe {
    pub t: f64,
    pub translation: Vec3,
    #[serde(default)]
    pub quat: Quat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Primitive {
    pub shape: Shape,
    pub material: Material,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub motion: Vec<MotionKeyframe>,
}

impl Primitive {
    pub fn is_animated(&self) -> bool {
        !self.motion.is_empty()
    }

    fn posed(&self, time: f64) -> Shape {
        if self.motion.is_empty() {
            return self.shape;
        }
        let (translation, rotation) = interpolate_keyframes(
            &self.motion,
            time,
            |k| k.t,
            |k| (k.translation, k.quat),
            |a, b, u| (a.0.lerp(b.0, u), a.1.slerp(b.1, u)),
        );
        let xf = |p: Vec3| rotation.rotate(p) + translation;
        match self.shape {
            Shape::Sphere { center, radius } => Shape::Sphere {
                center: xf(center),
                radius,
            },
            Shape::Triangle { vertices } => Shape::Triangle {
                vertices: vertices.map(xf),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub camera: Camera,
    pub primitives: Vec<Primitive>,
    /// Constant radiance returned by rays that escape the scene.
    #[serde(default)]
    pub environment: Option<Vec3>,
    /// Log-luminance contrast threshold.
    pub threshold: f64,
    /// Number of discrete frames.
    pub frames: u32,
}

impl Scene {
    pub fn from_json_str(text: &str, origin: &Path) -> Result<Scene> {
        let scene: Scene = serde_json::from_str(text).map_err(|e| Error::SceneParse {
            path: origin.to_path_buf(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene serializes")
    }

    /// Checks every invariant of the scene model.
    pub fn validate(&self) -> Result<()> {
        let cam = &self.camera;
        if !(cam.fov > 0.0 && cam.fov < std::f64::consts::PI) {
            return Err(Error::validation(format!("fov out of range: {}", cam.fov)));
        }
        if cam.width < 1 || cam.height < 1 {
            return Err(Error::validation("image width and height must be >= 1"));
        }
        if self.frames < 2 {
            return Err(Error::validation(format!("frames must be >= 2, got {}", self.frames)));
        }
        if cam.keyframes.is_empty() {
            return Err(Error::validation("camera needs at least one keyframe"));
        }
        check_keyframe_times(cam.keyframes.iter().map(|k| k.t), "camera")?;
        for k in &cam.keyframes {
            check_finite(k.pos, "camera position")?;
            check_unit_quat(k.quat, "camera")?;
        }

        for (i, p) in self.primitives.iter().enumerate() {
            match p.shape {
                Shape::Sphere { center, radius } => {
                    check_finite(center, "sphere center")?;
                    if !(radius > 0.0 && radius.is_finite()) {
                        return Err(Error::validation(format!(
                            "primitive {i}: sphere radius must be > 0, got {radius}"
                        )));
                    }
                }
                Shape::Triangle { vertices: [a, b, c] } => {
                    for v in [a, b, c] {
                        check_finite(v, "triangle vertex")?;
                    }
                    let area = 0.5 * (b - a).cross(c - a).length();
                    if !(area > MIN_TRIANGLE_AREA) {
                        return Err(Error::validation(format!(
                            "primitive {i}: degenerate triangle (area {area:e})"
                        )));
                    }
                }
            }
            match p.material {
                Material::Lambertian { albedo } => {
                    if !(albedo.min_component() >= 0.0 && albedo.max_component() <= 1.0) {
                        return Err(Error::validation(format!(
                            "primitive {i}: albedo components must lie in [0, 1]"
                        )));
                    }
                }
                Material::Mirror { reflectance } => {
                    if !(0.0..=1.0).contains(&reflectance) {
                        return Err(Error::validation(format!(
                            "primitive {i}: mirror reflectance must lie in [0, 1]"
                        )));
                    }
                }
                Material::Emitter { radiance } => {
                    if !(radiance.is_finite() && radiance.min_component() >= 0.0) {
                        return Err(Error::validation(format!(
                            "primitive {i}: emitter radiance must be finite and >= 0"
                        )));
                    }
                }
            }
            check_keyframe_times(p.motion.iter().map(|k| k.t), "motion")?;
            for k in &p.motion {
                check_finite(k.translation, "motion translation")?;
                check_unit_quat(k.quat, "motion")?;
            }
        }

        if let Some(env) = self.environment {
            if !(env.is_finite() && env.min_component() >= 0.0) {
                return Err(Error::validation("environment radiance must be finite and >= 0"));
            }
        }
        let env_nonzero = self.environment.is_some_and(|e| e.max_component() > 0.0);
        if self.primitives.is_empty() && !env_nonzero {
            return Err(Error::validation(
                "scene needs at least one primitive or a nonzero environment",
            ));
        }
        if !(self.threshold >= 0.0 && self.threshold.is_finite()) {
            return Err(Error::validation(format!(
                "threshold must be finite and >= 0, got {}",
                self.threshold
            )));
        }
        Ok(())
    }

    pub fn width(&self) -> u32 {
        self.camera.width
    }

    pub fn height(&self) -> u32 {
        self.camera.height
    }

    pub fn environment_radiance(&self) -> Vec3 {
        self.environment.unwrap_or(Vec3::ZERO)
    }

    /// Copy with a different film size.
    pub fn with_resolution(&self, width: u32, height: u32) -> Result<Scene> {
        let mut s = self.clone();
        s.camera.width = width;
        s.camera.height = height;
        s.validate()?;
        Ok(s)
    }

    pub fn with_frames(&self, frames: u32) -> Result<Scene> {
        let mut s = self.clone();
        s.frames = frames;
        s.validate()?;
        Ok(s)
    }

    fn check_frame(&self, s: u32) -> Result<()> {
        if s < 1 || s > self.frames {
            return Err(Error::OutOfRange(format!(
                "frame {s} outside 1..={}",
                self.frames
            )));
        }
        Ok(())
    }

    /// Normalized time of frame `s`.
    pub fn frame_time(&self, s: u32) -> f64 {
        (s - 1) as f64 / (self.frames - 1) as f64
    }

    pub fn camera_at(&self, s: u32) -> Result<PosedCamera> {
        self.check_frame(s)?;
        let (position, orientation) = interpolate_keyframes(
            &self.camera.keyframes,
            self.frame_time(s),
            |k| k.t,
            |k| (k.pos, k.quat),
            |a, b, u| (a.0.lerp(b.0, u), a.1.slerp(b.1, u)),
        );
        Ok(PosedCamera {
            position,
            orientation,
            fov: self.camera.fov,
            width: self.camera.width,
            height: self.camera.height,
            tan_half_fov: (self.camera.fov * 0.5).tan(),
            basis: [
                orientation.rotate(Vec3::new(1.0, 0.0, 0.0)),
                orientation.rotate(Vec3::new(0.0, 1.0, 0.0)),
                orientation.rotate(Vec3::new(0.0, 0.0, -1.0)),
            ],
        })
    }

    /// Freezes all primitives at frame `s`.
    pub fn frame(&self, s: u32) -> Result<FrameGeometry> {
        let camera = self.camera_at(s)?;
        let time = self.frame_time(s);
        let shapes: Vec<Shape> = self.primitives.iter().map(|p| p.posed(time)).collect();
        let materials = self.primitives.iter().map(|p| p.material).collect();
        Ok(FrameGeometry::new(s, camera, shapes, materials, self.environment_radiance()))
    }

    /// Nearest intersection of `ray` with the scene posed at frame `s`.
    pub fn intersect(&self, s: u32, ray: &Ray) -> Result<Intersection> {
        if ((ray.dir.length_squared()).sqrt() - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidArgument("ray direction must be unit length".into()));
        }
        Ok(self.frame(s)?.intersect(ray))
    }
}

/// Reads and validates a scene file.
pub fn load_scene(path: impl AsRef<Path>) -> Result<Scene> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Scene::from_json_str(&text, path)
}

fn check_finite(v: Vec3, what: &str) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::validation(format!("{what} must be finite")))
    }
}

fn check_unit_quat(q: Quat, what: &str) -> Result<()> {
    if (q.norm() - 1.0).abs() > UNIT_QUAT_TOLERANCE {
        return Err(Error::validation(format!(
            "{what} quaternion not unit-norm (|q| = {})",
            q.norm()
        )));
    }
    Ok(())
}

fn check_keyframe_times(times: impl Iterator<Item = f64>, what: &str) -> Result<()> {
    let mut prev: Option<f64> = None;
    for t in times {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::validation(format!("{what} keyframe time {t} outside [0, 1]")));
        }
        if prev.is_some_and(|p| t <= p) {
            return Err(Error::validation(format!(
                "{what} keyframe times must be strictly increasing"
            )));
        }
        prev = Some(t);
    }
    Ok(())
}

/// Piecewise interpolation over time-sorted keyframes, clamped at both ends.
fn interpolate_keyframes<K, V: Copy>(
    keys: &[K],
    time: f64,
    t_of: impl Fn(&K) -> f64,
    value: impl Fn(&K) -> V,
    mix: impl Fn(V, V, f64) -> V,
) -> V {
    let first = &keys[0];
    if keys.len() == 1 || time <= t_of(first) {
        return value(first);
    }
    let last = &keys[keys.len() - 1];
    if time >= t_of(last) {
        return value(last);
    }
    let i = keys.partition_point(|k| t_of(k) <= time);
    let (a, b) = (&keys[i - 1], &keys[i]);
    let u = (time - t_of(a)) / (t_of(b) - t_of(a));
    mix(value(a), value(b), u)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    pub dir: Vec3,
}

impl Ray {
    #[inline]
    pub fn new(origin: Vec3, dir: Vec3) -> Self {
        Ray { origin, dir }
    }

    #[inline]
    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.dir * t
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub point: Vec3,
    /// Unit normal facing against the incoming ray.
    pub normal: Vec3,
    pub primitive: usize,
    pub material: Material,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Intersection {
    Hit(Hit),
    Miss { radiance: Vec3 },
}

/// Ray parameter below which intersections are ignored.
const T_MIN: f64 = 1e-9;

#[cfg(test)]
pub(crate) fn intersect_shape(shape: &Shape, ray: &Ray) -> Option<f64> {
    Prepared::new(shape).intersect(ray)
}

#[inline]
fn sphere_hit(center: Vec3, r2: f64, ray: &Ray) -> Option<f64> {
    let oc = ray.origin - center;
    let b = oc.dot(ray.dir);
    let c = oc.length_squared() - r2;
    let disc = b * b - c;
    // tangent rays (disc == 0) are misses
    if disc <= 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let t0 = -b - sq;
    if t0 > T_MIN {
        return Some(t0);
    }
    let t1 = -b + sq;
    (t1 > T_MIN).then_some(t1)
}

#[inline]
fn triangle_hit(v0: Vec3, e1: Vec3, e2: Vec3, ray: &Ray) -> Option<f64> {
    let p = ray.dir.cross(e2);
    let det = e1.dot(p);
    if det.abs() < 1e-14 {
        return None;
    }
    let inv = 1.0 / det;
    let s = ray.origin - v0;
    let u = s.dot(p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(e1);
    let v = ray.dir.dot(q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(q) * inv;
    (t > T_MIN).then_some(t)
}

/// Shape with the per-ray invariants hoisted out.
#[derive(Debug, Clone, Copy)]
enum Prepared {
    Sphere { center: Vec3, radius: f64, r2: f64 },
    Triangle { v0: Vec3, e1: Vec3, e2: Vec3, normal: Vec3 },
}

impl Prepared {
    fn new(shape: &Shape) -> Self {
        match *shape {
            Shape::Sphere { center, radius } => Prepared::Sphere { center, radius, r2: radius * radius },
            Shape::Triangle { vertices: [v0, v1, v2] } => {
                let (e1, e2) = (v1 - v0, v2 - v0);
                Prepared::Triangle { v0, e1, e2, normal: e1.cross(e2).normalized() }
            }
        }
    }

    #[inline]
    fn intersect(&self, ray: &Ray) -> Option<f64> {
        match *self {
            Prepared::Sphere { center, r2, .. } => sphere_hit(center, r2, ray),
            Prepared::Triangle { v0, e1, e2, .. } => triangle_hit(v0, e1, e2, ray),
        }
    }

    #[inline]
    fn outward_normal(&self, point: Vec3) -> Vec3 {
        match *self {
            Prepared::Sphere { center, radius, .. } => (point - center) / radius,
            Prepared::Triangle { normal, .. } => normal,
        }
    }
}

/// All primitives posed at one frame. Cheap to query from many threads.
#[derive(Debug, Clone)]
pub struct FrameGeometry {
    pub frame: u32,
    pub camera: PosedCamera,
    pub shapes: Vec<Shape>,
    pub materials: Vec<Material>,
    pub environment: Vec3,
    prepared: Vec<Prepared>,
}

impl FrameGeometry {
    pub fn new(
        frame: u32,
        camera: PosedCamera,
        shapes: Vec<Shape>,
        materials: Vec<Material>,
        environment: Vec3,
    ) -> Self {
        assert_eq!(shapes.len(), materials.len(), "one material per shape");
        let prepared = shapes.iter().map(Prepared::new).collect();
        FrameGeometry { frame, camera, shapes, materials, environment, prepared }
    }

    #[inline]
    pub fn intersect(&self, ray: &Ray) -> Intersection {
        match self.nearest(ray, f64::INFINITY) {
            Some((i, t)) => {
                let point = ray.at(t);
                let mut normal = self.prepared[i].outward_normal(point);
                if normal.dot(ray.dir) > 0.0 {
                    normal = -normal;
                }
                Intersection::Hit(Hit {
                    t,
                    point,
                    normal,
                    primitive: i,
                    material: self.materials[i],
                })
            }
            None => Intersection::Miss {
                radiance: self.environment,
            },
        }
    }

    /// Index and distance of the nearest shape hit closer than `t_max`.
    #[inline]
    pub fn nearest(&self, ray: &Ray, t_max: f64) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        let mut limit = t_max;
        for (i, shape) in self.prepared.iter().enumerate() {
            if let Some(t) = shape.intersect(ray) {
                if t < limit {
                    limit = t;
                    best = Some((i, t));
                }
            }
        }
        best
    }

    /// Whether anything blocks the open segment `(0, t_max)` along `ray`.
    #[inline]
    pub fn occluded(&self, ray: &Ray, t_max: f64) -> bool {
        self.prepared
            .iter()
            .any(|s| s.intersect(ray).is_some_and(|t| t < t_max))
    }
}
