//! Pinhole cameras, ray sampling through the unit scene box, emission and
//! absorption compositing, and the emptiness voxel used to skip samples.
//!
//! World space is the box `[-1, 1]^3`; field coordinates are the same box
//! mapped to `[0, 1]^3`. Cameras look along their local `+z` axis with `+x`
//! to the right and `+y` down the image.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{Grid3, Image};

pub type Vec3 = [f64; 3];

fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn normalize(a: Vec3) -> Vec3 {
    let n = dot(a, a).sqrt();
    [a[0] / n, a[1] / n, a[2] / n]
}

#[derive(Debug, Clone, PartialEq)]
pub struct Camera {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    /// Camera-to-world rotation; columns are the camera axes in world space.
    pub rotation: [[f64; 3]; 3],
    /// Camera center in world space.
    pub translation: Vec3,
    pub width: usize,
    pub height: usize,
}

impl Camera {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        rotation: [[f64; 3]; 3],
        translation: Vec3,
        width: usize,
        height: usize,
    ) -> Result<Self> {
        if !(fx > 0.0 && fy > 0.0) || width == 0 || height == 0 {
            return Err(Error::Invalid("focal lengths and image size must be positive".into()));
        }
        for i in 0..3 {
            for j in 0..3 {
                let d: f64 = (0..3).map(|k| rotation[k][i] * rotation[k][j]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                if (d - want).abs() > 1e-9 {
                    return Err(Error::Invalid("rotation is not orthonormal".into()));
                }
            }
        }
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            rotation,
            translation,
            width,
            height,
        })
    }

    /// Camera at `eye` looking at `target`, with vertical field of view
    /// `fov_y` in degrees and the principal point at the image center.
    pub fn look_at(eye: Vec3, target: Vec3, up: Vec3, fov_y: f64, width: usize, height: usize) -> Result<Self> {
        let fwd = normalize([target[0] - eye[0], target[1] - eye[1], target[2] - eye[2]]);
        let right = cross(fwd, up);
        if dot(right, right) < 1e-24 {
            return Err(Error::Invalid("up vector is parallel to the view direction".into()));
        }
        let right = normalize(right);
        let down = cross(fwd, right);
        let f = 0.5 * height as f64 / (0.5 * fov_y.to_radians()).tan();
        let rotation = [
            [right[0], down[0], fwd[0]],
            [right[1], down[1], fwd[1]],
            [right[2], down[2], fwd[2]],
        ];
        Self::new(
            f,
            f,
            0.5 * width as f64,
            0.5 * height as f64,
            rotation,
            eye,
            width,
            height,
        )
    }

    /// Ray through continuous image coordinates `(u, v)`; pixel `(x, y)`
    /// covers `[x, x + 1) x [y, y + 1)`.
    pub fn ray_through(&self, u: f64, v: f64) -> Ray {
        let d = [(u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0];
        let r = &self.rotation;
        let w = [
            r[0][0] * d[0] + r[0][1] * d[1] + r[0][2] * d[2],
            r[1][0] * d[0] + r[1][1] * d[1] + r[1][2] * d[2],
            r[2][0] * d[0] + r[2][1] * d[1] + r[2][2] * d[2],
        ];
        Ray {
            origin: self.translation,
            dir: normalize(w),
        }
    }

    /// Continuous image coordinates of a world point in front of the
    /// camera.
    pub fn project(&self, p: Vec3) -> Option<(f64, f64)> {
        let d = [
            p[0] - self.translation[0],
            p[1] - self.translation[1],
            p[2] - self.translation[2],
        ];
        let r = &self.rotation;
        let c: Vec3 = [0, 1, 2].map(|k| r[0][k] * d[0] + r[1][k] * d[1] + r[2][k] * d[2]);
        if c[2] <= 0.0 {
            return None;
        }
        Some((self.fx * c[0] / c[2] + self.cx, self.fy * c[1] / c[2] + self.cy))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    pub dir: Vec3,
}

impl Ray {
    /// Entry and exit distances through `[-1, 1]^3`, if the ray hits it.
    pub fn box_interval(&self) -> Option<(f64, f64)> {
        let (mut t0, mut t1) = (0.0f64, f64::INFINITY);
        for k in 0..3 {
            let (o, d) = (self.origin[k], self.dir[k]);
            if d.abs() < 1e-15 {
                if !(-1.0..=1.0).contains(&o) {
                    return None;
                }
                continue;
            }
            let (a, b) = ((-1.0 - o) / d, (1.0 - o) / d);
            t0 = t0.max(a.min(b));
            t1 = t1.min(a.max(b));
        }
        (t1 > t0).then_some((t0, t1))
    }
}

/// Rays through the centers of `pixels` (`(x, y)` pairs).
pub fn generate_rays(cam: &Camera, pixels: &[(usize, usize)]) -> Vec<Ray> {
    pixels
        .iter()
        .map(|&(x, y)| cam.ray_through(x as f64 + 0.5, y as f64 + 0.5))
        .collect()
}

/// Field coordinate of a world point.
pub fn to_unit(p: Vec3) -> Vec3 {
    p.map(|v| 0.5 * (v + 1.0))
}

/// Sample positions along a ray inside the scene box.
#[derive(Debug, Clone, PartialEq)]
pub struct RaySamples {
    /// Field coordinates `(x, y, z, t)` in `[0, 1]`.
    pub points: Vec<[f64; 4]>,
    /// Distances along the ray.
    pub ts: Vec<f64>,
    /// Constant segment length.
    pub delta: f64,
}

/// `k` stratified samples over the box interval. With `jitter` each sample
/// is uniform in its stratum, otherwise at the stratum midpoint.
pub fn sample_ray(ray: &Ray, time: f64, k: usize, jitter: Option<&mut ChaCha8Rng>) -> Option<RaySamples> {
    let (t0, t1) = ray.box_interval()?;
    let delta = (t1 - t0) / k as f64;
    let mut offsets = vec![0.5; k];
    if let Some(rng) = jitter {
        offsets.iter_mut().for_each(|o| *o = rng.random::<f64>());
    }
    let ts: Vec<f64> = offsets
        .iter()
        .enumerate()
        .map(|(i, o)| t0 + (i as f64 + o) * delta)
        .collect();
    let points = ts
        .iter()
        .map(|&t| {
            let p = to_unit([
                ray.origin[0] + t * ray.dir[0],
                ray.origin[1] + t * ray.dir[1],
                ray.origin[2] + t * ray.dir[2],
            ]);
            [p[0].clamp(0.0, 1.0), p[1].clamp(0.0, 1.0), p[2].clamp(0.0, 1.0), time]
        })
        .collect();
    Some(RaySamples { points, ts, delta })
}

/// Counter-based generator for one ray: the ChaCha stream is chosen by
/// `frame` and the position by `pixel`, so any ray's jitter can be
/// reproduced independently of evaluation order.
pub fn ray_rng(seed: u64, frame: u64, pixel: u64, samples: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(frame);
    rng.set_word_pos(pixel as u128 * samples as u128 * 2);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayOutput {
    pub rgb: [f64; 3],
    pub opacity: f64,
    pub depth: f64,
}

/// Floor of the accumulated opacity used to normalize depth.
pub const DEPTH_EPS: f64 = 1e-10;

/// Emission-absorption compositing of samples with densities `sigma`,
/// colors `rgb`, segment lengths `delta` and distances `ts`.
pub fn integrate(sigma: &[f64], rgb: &[[f64; 3]], delta: &[f64], ts: &[f64], background: [f64; 3]) -> RayOutput {
    let mut trans = 1.0;
    let (mut c, mut o, mut d) = ([0.0; 3], 0.0, 0.0);
    for k in 0..sigma.len() {
        let a = sigma[k] * delta[k];
        let next = trans * (-a).exp();
        let w = trans - next;
        for ch in 0..3 {
            c[ch] += w * rgb[k][ch];
        }
        o += w;
        d += w * ts[k];
        trans = next;
    }
    for ch in 0..3 {
        c[ch] += (1.0 - o) * background[ch];
    }
    RayOutput {
        rgb: c,
        opacity: o,
        depth: d / o.max(DEPTH_EPS),
    }
}

/// Gradients of `<g.rgb, rgb> + g.opacity * opacity + g.depth * depth`
/// with respect to each `sigma[k]` and `rgb[k]`.
pub fn integrate_backward(
    sigma: &[f64],
    rgb: &[[f64; 3]],
    delta: &[f64],
    ts: &[f64],
    background: [f64; 3],
    g: &RayOutput,
    g_sigma: &mut [f64],
    g_rgb: &mut [[f64; 3]],
) {
    let n = sigma.len();
    let mut w = vec![0.0; n];
    let mut t_after = vec![0.0; n];
    let mut trans = 1.0;
    let (mut o, mut d) = (0.0, 0.0);
    for k in 0..n {
        let next = trans * (-sigma[k] * delta[k]).exp();
        w[k] = trans - next;
        t_after[k] = next;
        o += w[k];
        d += w[k] * ts[k];
        trans = next;
    }
    let od = o.max(DEPTH_EPS);
    let depth = d / od;
    // Value each weight multiplies in the scalar objective.
    let e: Vec<f64> = (0..n)
        .map(|k| {
            let col: f64 = (0..3).map(|ch| g.rgb[ch] * (rgb[k][ch] - background[ch])).sum();
            let dep = if o > DEPTH_EPS {
                (ts[k] - depth) / od
            } else {
                ts[k] / od
            };
            col + g.opacity + g.depth * dep
        })
        .collect();
    let mut suffix = 0.0;
    for k in (0..n).rev() {
        g_sigma[k] = delta[k] * (t_after[k] * e[k] - suffix);
        suffix += w[k] * e[k];
        for ch in 0..3 {
            g_rgb[k][ch] = w[k] * g.rgb[ch];
        }
    }
}

/// Coarse occupancy over the unit cube, max-pooled over time.
#[derive(Debug, Clone, PartialEq)]
pub struct EmptinessVoxel {
    pub occupancy: Grid3<bool>,
    pub tau: f64,
}

pub const EMPTINESS_RES: usize = 32;
pub const EMPTINESS_TAU: f64 = 1e-4;

impl EmptinessVoxel {
    pub fn full(res: usize) -> Self {
        Self {
            occupancy: Grid3::filled([res; 3], true),
            tau: 0.0,
        }
    }

    pub fn resolution(&self) -> usize {
        self.occupancy.dims()[0]
    }

    /// Occupancy of the cell holding field coordinate `p`.
    pub fn occupied(&self, p: &[f64; 4]) -> bool {
        let e = self.resolution();
        let idx = |v: f64| ((v * e as f64).floor().max(0.0) as usize).min(e - 1);
        *self.occupancy.get(idx(p[0]), idx(p[1]), idx(p[2]))
    }

    pub fn occupied_fraction(&self) -> f64 {
        let s = self.occupancy.as_slice();
        s.iter().filter(|&&b| b).count() as f64 / s.len() as f64
    }
}

/// Occupancy from density probes at every cell corner and cell center
/// for each time sample; a cell is occupied when any of its probes exceeds
/// `tau`, and occupancy is then dilated by one cell.
pub fn build_emptiness(
    density: &(dyn Fn(&[f64; 4]) -> f64 + Sync),
    res: usize,
    tau: f64,
    times: &[f64],
) -> Result<EmptinessVoxel> {
    if res < 2 {
        return Err(Error::Invalid("emptiness resolution must be at least 2".into()));
    }
    let e = res as f64;
    let np = res + 1;
    // Max over time at corner probes.
    let corners: Vec<f64> = (0..np * np * np)
        .into_par_iter()
        .map(|i| {
            let (a, b, c) = (i / (np * np), (i / np) % np, i % np);
            times
                .iter()
                .map(|&t| density(&[a as f64 / e, b as f64 / e, c as f64 / e, t]))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    let raw: Vec<bool> = (0..res * res * res)
        .into_par_iter()
        .map(|i| {
            let (a, b, c) = (i / (res * res), (i / res) % res, i % res);
            let corner = (0..8).any(|k| {
                let (da, db, dc) = (k >> 2, (k >> 1) & 1, k & 1);
                corners[((a + da) * np + b + db) * np + c + dc] > tau
            });
            corner
                || times
                    .iter()
                    .any(|&t| density(&[(a as f64 + 0.5) / e, (b as f64 + 0.5) / e, (c as f64 + 0.5) / e, t]) > tau)
        })
        .collect();
    let mut occ = Grid3::filled([res; 3], false);
    for a in 0..res {
        for b in 0..res {
            for c in 0..res {
                let hit = (a.saturating_sub(1)..=(a + 1).min(res - 1)).any(|x| {
                    (b.saturating_sub(1)..=(b + 1).min(res - 1))
                        .any(|y| (c.saturating_sub(1)..=(c + 1).min(res - 1)).any(|z| raw[(x * res + y) * res + z]))
                });
                occ.set(a, b, c, hit);
            }
        }
    }
    Ok(EmptinessVoxel { occupancy: occ, tau })
}

/// Anything that can be rendered: density and view-dependent color at a
/// field coordinate.
pub trait RadianceField: Sync {
    fn density(&self, p: &[f64; 4]) -> f64;
    fn color(&self, p: &[f64; 4], view_dir: Vec3) -> [f64; 3];
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderJob {
    pub camera: Camera,
    pub time: f64,
    pub samples: usize,
    pub background: [f64; 3],
    /// Stratified jitter seed; `None` samples stratum midpoints.
    pub jitter_seed: Option<u64>,
    pub frame: u64,
    /// Stop marching once transmittance falls below this value.
    pub min_transmittance: f64,
}

impl RenderJob {
    pub fn new(camera: Camera, time: f64, samples: usize) -> Self {
        Self {
            camera,
            time,
            samples,
            background: [0.0; 3],
            jitter_seed: None,
            frame: 0,
            min_transmittance: 0.0,
        }
    }
}

/// Renders one ray; samples in empty voxels are skipped.
pub fn render_ray(
    job: &RenderJob,
    ray: &Ray,
    pixel: u64,
    field: &dyn RadianceField,
    voxel: Option<&EmptinessVoxel>,
) -> RayOutput {
    let mut rng = job.jitter_seed.map(|s| ray_rng(s, job.frame, pixel, job.samples));
    let Some(s) = sample_ray(ray, job.time, job.samples, rng.as_mut()) else {
        return RayOutput {
            rgb: job.background,
            opacity: 0.0,
            depth: 0.0,
        };
    };
    let (mut sig, mut col, mut ts) = (Vec::new(), Vec::new(), Vec::new());
    let mut trans = 1.0;
    for (p, &t) in s.points.iter().zip(&s.ts) {
        if trans < job.min_transmittance {
            break;
        }
        if voxel.is_some_and(|v| !v.occupied(p)) {
            continue;
        }
        let sigma = field.density(p);
        if sigma <= 0.0 {
            continue;
        }
        sig.push(sigma);
        col.push(field.color(p, ray.dir));
        ts.push(t);
        trans *= (-sigma * s.delta).exp();
    }
    let deltas = vec![s.delta; sig.len()];
    integrate(&sig, &col, &deltas, &ts, job.background)
}

/// Renders the full image, parallel over rows. Output does not depend on
/// the number of workers.
pub fn render_image(job: &RenderJob, field: &dyn RadianceField, voxel: Option<&EmptinessVoxel>) -> Image {
    let (w, h) = (job.camera.width, job.camera.height);
    let rows: Vec<Vec<f64>> = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut row = Vec::with_capacity(w * 3);
            for x in 0..w {
                let ray = job.camera.ray_through(x as f64 + 0.5, y as f64 + 0.5);
                let out = render_ray(job, &ray, (y * w + x) as u64, field, voxel);
                row.extend_from_slice(&out.rgb);
            }
            row
        })
        .collect();
    Image::from_vec(w, h, 3, rows.concat()).expect("sized buffer")
}

/// Depth map (expected termination distance) for the same job.
pub fn render_depth(job: &RenderJob, field: &dyn RadianceField, voxel: Option<&EmptinessVoxel>) -> Image {
    let (w, h) = (job.camera.width, job.camera.height);
    let data: Vec<f64> = (0..h)
        .into_par_iter()
        .flat_map_iter(|y| {
            (0..w)
                .map(|x| {
                    let ray = job.camera.ray_through(x as f64 + 0.5, y as f64 + 0.5);
                    render_ray(job, &ray, (y * w + x) as u64, field, voxel).depth
                })
                .collect::<Vec<_>>()
        })
        .collect();
    Image::from_vec(w, h, 1, data).expect("sized buffer")
}
