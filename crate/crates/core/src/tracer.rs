//! Unidirectional path tracer producing one scalar luminance per path.
//!
//! Lambertian vertices combine next-event estimation toward one uniformly
//! chosen emitter with cosine-weighted BSDF sampling (balance heuristic).
//! Mirrors reflect deterministically. Each sample is keyed by
//! `(seed, pixel, frame, sample index)` so batches can be traced in any order
//! or on any worker and still reproduce the same values.

use std::f64::consts::{FRAC_1_PI, PI};

use crate::error::Result;
use crate::math::Vec3;
use crate::rng::{RngKey, SampleRng};
use crate::scene::{FrameGeometry, Intersection, Material, Ray, Scene, Shape, RAY_EPSILON};

/// Depth after which Russian roulette applies.
pub const RR_START_DEPTH: u32 = 3;
/// Hard cap on scattering events per path.
pub const MAX_DEPTH: u32 = 16;
/// Default luminance floor applied before taking logarithms.
pub const DEFAULT_EPSILON: f64 = 1e-3;

/// Single-path luminance estimate `f(x) / p(x)`, reduced to Rec. 709 luma.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
#[repr(transparent)]
pub struct PathSample {
    pub luminance: f64,
}

/// Counts of samples that had to be repaired.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TraceDiagnostics {
    pub traced: u64,
    /// Non-finite estimates clamped to zero.
    pub clamped: u64,
}

impl std::ops::AddAssign for TraceDiagnostics {
    fn add_assign(&mut self, o: Self) {
        self.traced += o.traced;
        self.clamped += o.clamped;
    }
}

#[derive(Debug, Clone, Copy)]
enum Light {
    Sphere {
        prim: usize,
        center: Vec3,
        radius: f64,
        radiance: Vec3,
    },
    Triangle {
        prim: usize,
        v0: Vec3,
        e1: Vec3,
        e2: Vec3,
        normal: Vec3,
        area: f64,
        radiance: Vec3,
    },
    Environment {
        radiance: Vec3,
    },
}

struct LightSample {
    dir: Vec3,
    radiance: Vec3,
    /// Solid-angle density of choosing `dir` given this light.
    pdf: f64,
    /// `Some(i)` if the sample lands on primitive `i`, `None` for the environment.
    target: Option<usize>,
}

/// Solid angle `2π(1 - cos θmax)` subtended by a sphere, in a cancellation-free form.
#[inline]
fn sphere_cone(center: Vec3, radius: f64, p: Vec3) -> Option<(f64, f64)> {
    let dist2 = (center - p).length_squared();
    let r2 = radius * radius;
    if dist2 <= r2 {
        return None;
    }
    let sin2 = r2 / dist2;
    let cos_max = (1.0 - sin2).sqrt();
    let one_minus_cos = sin2 / (1.0 + cos_max);
    Some((cos_max, one_minus_cos))
}

/// Uniform point in the unit disk, as a polar angle `(cos φ, sin φ)` and a
/// squared radius `r²`. Both `φ` and `r²` are uniform and independent, so one
/// draw stands in for two uniform variates without any trigonometry.
#[derive(Debug, Clone, Copy)]
struct Disk {
    cos_phi: f64,
    sin_phi: f64,
    r2: f64,
}

#[inline]
fn unit_disk(rng: &mut SampleRng) -> Disk {
    loop {
        let dx = 2.0 * rng.next_f64() - 1.0;
        let dy = 2.0 * rng.next_f64() - 1.0;
        let r2 = dx * dx + dy * dy;
        if r2 < 1.0 && r2 > 0.0 {
            let inv_r = 1.0 / r2.sqrt();
            return Disk { cos_phi: dx * inv_r, sin_phi: dy * inv_r, r2 };
        }
    }
}

impl Light {
    #[inline]
    fn sample(&self, p: Vec3, d: Disk) -> Option<LightSample> {
        match *self {
            Light::Sphere { prim, center, radius, radiance } => {
                let (_, one_minus_cos) = sphere_cone(center, radius, p)?;
                let axis = (center - p).normalized();
                let cos_t = 1.0 - d.r2 * one_minus_cos;
                let sin_t = (1.0 - cos_t * cos_t).max(0.0).sqrt();
                let (t, b) = axis.orthonormal_basis();
                let dir = t * (sin_t * d.cos_phi) + b * (sin_t * d.sin_phi) + axis * cos_t;
                Some(LightSample {
                    dir,
                    radiance,
                    pdf: 1.0 / (2.0 * PI * one_minus_cos),
                    target: Some(prim),
                })
            }
            Light::Triangle { prim, v0, e1, e2, normal, area, radiance } => {
                // φ / 2π is the second uniform variate
                let u2 = d.sin_phi.atan2(d.cos_phi) * (0.5 * FRAC_1_PI) + 0.5;
                let su = d.r2.sqrt();
                let (b0, b1) = (1.0 - su, u2 * su);
                let x = v0 + e1 * b1 + e2 * (1.0 - b0 - b1);
                let d = x - p;
                let dist2 = d.length_squared();
                let dir = d / dist2.sqrt();
                let cos_l = normal.dot(dir).abs();
                if cos_l < 1e-12 {
                    return None;
                }
                Some(LightSample {
                    dir,
                    radiance,
                    pdf: dist2 / (area * cos_l),
                    target: Some(prim),
                })
            }
            Light::Environment { radiance } => {
                let z = 1.0 - 2.0 * d.r2;
                let r = (1.0 - z * z).max(0.0).sqrt();
                Some(LightSample {
                    dir: Vec3::new(r * d.cos_phi, r * d.sin_phi, z),
                    radiance,
                    pdf: 1.0 / (4.0 * PI),
                    target: None,
                })
            }
        }
    }

    /// Solid-angle density this light would assign to a direction from `p`
    /// that reaches it at distance `dist`.
    #[inline]
    fn pdf(&self, p: Vec3, dir: Vec3, dist: f64) -> f64 {
        match *self {
            Light::Sphere { center, radius, .. } => match sphere_cone(center, radius, p) {
                Some((_, one_minus_cos)) => 1.0 / (2.0 * PI * one_minus_cos),
                None => 0.0,
            },
            Light::Triangle { normal, area, .. } => {
                let cos_l = normal.dot(dir).abs();
                if cos_l < 1e-12 {
                    0.0
                } else {
                    dist * dist / (area * cos_l)
                }
            }
            Light::Environment { .. } => 1.0 / (4.0 * PI),
        }
    }
}

#[inline]
fn luma(c: Vec3) -> f64 {
    if c.x == c.y && c.y == c.z {
        // the weights sum to one; keep grey values exact
        c.x
    } else {
        c.luma()
    }
}

/// Malley's method: project a uniform disk point up onto the hemisphere.
#[inline]
fn cosine_hemisphere(n: Vec3, d: Disk) -> (Vec3, f64) {
    let r = d.r2.sqrt();
    let z = (1.0 - d.r2).max(0.0).sqrt();
    let (t, b) = n.orthonormal_basis();
    let dir = t * (r * d.cos_phi) + b * (r * d.sin_phi) + n * z;
    (dir, z * FRAC_1_PI)
}

/// Path tracer bound to one posed frame.
pub struct Tracer<'a> {
    geom: &'a FrameGeometry,
    lights: Vec<Light>,
    light_of_prim: Vec<Option<usize>>,
    env_light: bool,
    seed: u64,
}

impl<'a> Tracer<'a> {
    pub fn new(geom: &'a FrameGeometry, seed: u64) -> Self {
        let mut lights = Vec::new();
        let mut light_of_prim = vec![None; geom.shapes.len()];
        for (i, (shape, mat)) in geom.shapes.iter().zip(&geom.materials).enumerate() {
            let Some(radiance) = mat.emission() else { continue };
            if radiance.max_component() <= 0.0 {
                continue;
            }
            light_of_prim[i] = Some(lights.len());
            lights.push(match *shape {
                Shape::Sphere { center, radius } => Light::Sphere { prim: i, center, radius, radiance },
                Shape::Triangle { vertices: [v0, v1, v2] } => {
                    let e1 = v1 - v0;
                    let e2 = v2 - v0;
                    let c = e1.cross(e2);
                    let area = 0.5 * c.length();
                    Light::Triangle { prim: i, v0, e1, e2, normal: c.normalized(), area, radiance }
                }
            });
        }
        let env_light = geom.environment.max_component() > 0.0;
        if env_light {
            lights.push(Light::Environment { radiance: geom.environment });
        }
        Tracer { geom, lights, light_of_prim, env_light, seed }
    }

    pub fn frame(&self) -> u32 {
        self.geom.frame
    }

    /// Traces sample `index` of pixel `(x, y)` and returns its RGB estimate.
    pub fn radiance(&self, x: u32, y: u32, index: u64) -> Vec3 {
        let mut rng = SampleRng::from_key(RngKey::new(self.seed, x, y, self.geom.frame, index));
        let jx = rng.next_f64();
        let jy = rng.next_f64();
        let ray = self.geom.camera.primary_ray(x, y, jx, jy);
        self.li(ray, &mut rng)
    }

    /// Luminance of one path; non-finite estimates come back as `None`.
    #[inline]
    pub fn luminance(&self, x: u32, y: u32, index: u64) -> Option<f64> {
        let l = luma(self.radiance(x, y, index));
        (l.is_finite() && l >= 0.0).then_some(l)
    }

    /// Appends `n` samples with indices `start..start + n` to `out`.
    pub fn trace_paths(
        &self,
        x: u32,
        y: u32,
        n: u64,
        start: u64,
        out: &mut Vec<PathSample>,
    ) -> TraceDiagnostics {
        let mut diag = TraceDiagnostics::default();
        out.reserve(n as usize);
        for i in start..start + n {
            let luminance = self.luminance(x, y, i).unwrap_or_else(|| {
                diag.clamped += 1;
                0.0
            });
            out.push(PathSample { luminance });
        }
        diag.traced = n;
        diag
    }

    fn li(&self, mut ray: Ray, rng: &mut SampleRng) -> Vec3 {
        let n_lights = self.lights.len() as f64;
        let mut radiance = Vec3::ZERO;
        let mut throughput = Vec3::ONE;
        // density of the BSDF sample that produced `ray`; None after camera or mirror
        let mut bsdf_pdf: Option<f64> = None;
        let mut prev_point = ray.origin;

        for depth in 0..=MAX_DEPTH {
            let hit = match self.geom.intersect(&ray) {
                Intersection::Miss { radiance: env } => {
                    if self.env_light {
                        let w = match bsdf_pdf {
                            Some(pb) => {
                                let pl = 1.0 / (4.0 * PI) / n_lights;
                                pb / (pb + pl)
                            }
                            None => 1.0,
                        };
                        radiance += throughput.hadamard(env) * w;
                    }
                    break;
                }
                Intersection::Hit(h) => h,
            };

            let albedo = match hit.material {
                Material::Emitter { radiance: le } => {
                    let w = match (bsdf_pdf, self.light_of_prim[hit.primitive]) {
                        (Some(pb), Some(k)) => {
                            let pl = self.lights[k].pdf(prev_point, ray.dir, hit.t) / n_lights;
                            pb / (pb + pl)
                        }
                        _ => 1.0,
                    };
                    radiance += throughput.hadamard(le) * w;
                    break;
                }
                Material::Lambertian { albedo } => albedo,
                Material::Mirror { reflectance } => Vec3::splat(reflectance),
            };
            if depth == MAX_DEPTH {
                break;
            }

            let origin = hit.point + hit.normal * RAY_EPSILON;
            match hit.material {
                Material::Lambertian { albedo } => {
                    if !self.lights.is_empty() {
                        radiance += throughput.hadamard(self.direct(origin, hit.normal, albedo, rng));
                    }
                    let (dir, pdf) = cosine_hemisphere(hit.normal, unit_disk(rng));
                    throughput = throughput.hadamard(albedo);
                    bsdf_pdf = Some(pdf);
                    ray = Ray::new(origin, dir);
                }
                Material::Mirror { reflectance } => {
                    let d = ray.dir;
                    let dir = (d - hit.normal * (2.0 * d.dot(hit.normal))).normalized();
                    throughput *= reflectance;
                    bsdf_pdf = None;
                    ray = Ray::new(origin, dir);
                }
                Material::Emitter { .. } => unreachable!(),
            }
            prev_point = origin;

            if depth >= RR_START_DEPTH {
                let survive = albedo.max_component().min(1.0);
                if survive <= 0.0 || rng.next_f64() >= survive {
                    break;
                }
                throughput = throughput / survive;
            }
        }
        radiance
    }

    /// Next-event estimate at a Lambertian vertex, MIS-weighted.
    fn direct(&self, p: Vec3, n: Vec3, albedo: Vec3, rng: &mut SampleRng) -> Vec3 {
        let n_lights = self.lights.len();
        let pick = ((rng.next_f64() * n_lights as f64) as usize).min(n_lights - 1);
        let Some(ls) = self.lights[pick].sample(p, unit_disk(rng)) else {
            return Vec3::ZERO;
        };
        let cos = n.dot(ls.dir);
        if cos <= 0.0 || !(ls.pdf > 0.0) || !ls.pdf.is_finite() {
            return Vec3::ZERO;
        }
        let shadow = Ray::new(p, ls.dir);
        let visible = match (self.geom.nearest(&shadow, f64::INFINITY), ls.target) {
            (None, None) => true,
            (Some((i, _)), Some(target)) => i == target,
            _ => false,
        };
        if !visible {
            return Vec3::ZERO;
        }
        let pl = ls.pdf / n_lights as f64;
        let pb = cos * FRAC_1_PI;
        let w = pl / (pl + pb);
        albedo.hadamard(ls.radiance) * (FRAC_1_PI * cos * w / pl)
    }
}

/// Traces `n` paths at pixel `q` of frame `s`, starting at sample index `start`.
pub fn trace_paths(
    scene: &Scene,
    q: (u32, u32),
    s: u32,
    n: u64,
    start: u64,
    seed: u64,
) -> Result<(Vec<PathSample>, TraceDiagnostics)> {
    let geom = scene.frame(s)?;
    let tracer = Tracer::new(&geom, seed);
    let mut out = Vec::with_capacity(n as usize);
    let diag = tracer.trace_paths(q.0, q.1, n, start, &mut out);
    Ok((out, diag))
}

/// `B_i = ln(max(L_i, epsilon))`.
pub fn log_samples(samples: &[PathSample], epsilon: f64) -> Vec<f64> {
    samples.iter().map(|s| log_luminance(s.luminance, epsilon)).collect()
}

#[inline]
pub fn log_luminance(l: f64, epsilon: f64) -> f64 {
    l.max(epsilon).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ps(v: &[f64]) -> Vec<PathSample> {
        v.iter().map(|&luminance| PathSample { luminance }).collect()
    }

    #[test]
    fn log_floor_rule() {
        assert_eq!(log_samples(&ps(&[1.0]), 1e-3), vec![0.0]);
        let b = log_samples(&ps(&[std::f64::consts::E.powi(2)]), 1e-3);
        assert!((b[0] - 2.0).abs() < 1e-15);
        let b = log_samples(&ps(&[0.0]), 1e-3);
        assert!((b[0] - (-6.907_755_278_982_137)).abs() < 1e-12);
    }

    #[test]
    fn grey_luma_is_exact() {
        assert_eq!(luma(Vec3::splat(5.0)), 5.0);
        assert!((luma(Vec3::new(1.0, 0.0, 0.0)) - 0.2126).abs() < 1e-15);
    }

    #[test]
    fn cone_sampling_stays_on_sphere() {
        let light = Light::Sphere {
            prim: 0,
            center: Vec3::new(0.0, 0.0, -4.0),
            radius: 0.5,
            radiance: Vec3::ONE,
        };
        let p = Vec3::ZERO;
        let mut rng = SampleRng::from_key(RngKey::new(1, 0, 0, 1, 0));
        for _ in 0..1000 {
            let s = light.sample(p, unit_disk(&mut rng)).unwrap();
            let t = crate::scene::intersect_shape(
                &Shape::Sphere { center: Vec3::new(0.0, 0.0, -4.0), radius: 0.5 },
                &Ray::new(p, s.dir),
            );
            // edge-of-cone directions can graze; allow them to be tangent
            let oc = p - Vec3::new(0.0, 0.0, -4.0);
            let b = oc.dot(s.dir);
            assert!(t.is_some() || (b * b - (oc.length_squared() - 0.25)).abs() < 1e-9);
        }
    }

    #[test]
    fn triangle_light_pdf_integrates_to_one() {
        // Monte Carlo estimate of the solid angle via pdf: E[1/pdf] = Ω
        let v0 = Vec3::new(-1.0, -1.0, -2.0);
        let light = Light::Triangle {
            prim: 0,
            v0,
            e1: Vec3::new(2.0, 0.0, 0.0),
            e2: Vec3::new(0.0, 2.0, 0.0),
            normal: Vec3::new(0.0, 0.0, 1.0),
            area: 2.0,
            radiance: Vec3::ONE,
        };
        let mut rng = SampleRng::from_key(RngKey::new(3, 0, 0, 1, 0));
        let n = 200_000;
        let mut omega_from_samples = 0.0;
        let mut hits = 0usize;
        for _ in 0..n {
            let s = light.sample(Vec3::ZERO, unit_disk(&mut rng)).unwrap();
            omega_from_samples += 1.0 / s.pdf;
            // uniform-sphere directions landing on the triangle estimate the same solid angle
            let z = 1.0 - 2.0 * rng.next_f64();
            let r = (1.0 - z * z).sqrt();
            let phi = 2.0 * PI * rng.next_f64();
            let d = Vec3::new(r * phi.cos(), r * phi.sin(), z);
            let tri = Shape::Triangle {
                vertices: [v0, v0 + Vec3::new(2.0, 0.0, 0.0), v0 + Vec3::new(0.0, 2.0, 0.0)],
            };
            if crate::scene::intersect_shape(&tri, &Ray::new(Vec3::ZERO, d)).is_some() {
                hits += 1;
            }
        }
        let a = omega_from_samples / n as f64;
        let b = 4.0 * PI * hits as f64 / n as f64;
        assert!((a - b).abs() / b < 0.03, "{a} vs {b}");
    }
}
