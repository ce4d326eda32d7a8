//! Synthetic scenes with analytic ground truth: an opaque box carrying a
//! solid texture, seen by cameras on a ring around the origin.

use std::f64::consts::{PI, TAU};

use dareplane::grid::Image;
use dareplane::render::{Camera, Ray, Vec3};
use dareplane::train::{frame_time, Dataset, View};

use crate::config::Config;
use crate::CliError;

/// Half edge of the textured box, inside the `[-1, 1]^3` world box.
pub const BOX_HALF: f64 = 0.6;
/// Distance of the camera ring from the origin.
pub const RING_RADIUS: f64 = 3.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SceneId {
    /// Every pixel, background included, has one color.
    Constant,
    /// Static box with an oriented solid texture.
    TexturedBox,
    /// Static box whose texture rotates about the vertical axis over time.
    RotatingTexture4d,
    /// Static box carrying a vertical grating that shifts one grid cell
    /// per frame.
    ShiftedGrating,
}

impl SceneId {
    pub const ALL: [SceneId; 4] = [
        SceneId::Constant,
        SceneId::TexturedBox,
        SceneId::RotatingTexture4d,
        SceneId::ShiftedGrating,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SceneId::Constant => "constant",
            SceneId::TexturedBox => "textured-box",
            SceneId::RotatingTexture4d => "rotating-texture-4d",
            SceneId::ShiftedGrating => "shifted-grating",
        }
    }

    pub fn from_name(s: &str) -> Result<Self, CliError> {
        Self::ALL.into_iter().find(|id| id.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Self::ALL.iter().map(|id| id.name()).collect();
            CliError::Config(format!(
                "key 'scene': unknown scene '{s}', expected one of {}",
                names.join(", ")
            ))
        })
    }

    pub fn is_dynamic(self) -> bool {
        matches!(self, SceneId::RotatingTexture4d | SceneId::ShiftedGrating)
    }
}

/// Scene geometry and appearance.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub id: SceneId,
    pub frames: usize,
    pub color: [f64; 3],
    /// Grid resolution the grating shift is tied to.
    pub grid_n: usize,
}

/// Entry and exit distances of `ray` through the box `[-h, h]^3`.
fn box_hit(ray: &Ray, h: f64) -> Option<(f64, f64)> {
    let (mut t0, mut t1) = (0.0f64, f64::INFINITY);
    for a in 0..3 {
        let (o, d) = (ray.origin[a], ray.dir[a]);
        if d.abs() < 1e-15 {
            if o.abs() > h {
                return None;
            }
            continue;
        }
        let (mut a0, mut a1) = ((-h - o) / d, (h - o) / d);
        if a0 > a1 {
            std::mem::swap(&mut a0, &mut a1);
        }
        t0 = t0.max(a0);
        t1 = t1.min(a1);
    }
    (t0 <= t1).then_some((t0, t1))
}

impl Scene {
    pub fn from_config(cfg: &Config) -> Result<Self, CliError> {
        let id = SceneId::from_name(cfg.str("scene")?)?;
        let frames = if id.is_dynamic() {
            cfg.get::<usize>("frames")?
        } else {
            1
        };
        if frames == 0 {
            return Err(CliError::Config("key 'frames' must be positive".into()));
        }
        Ok(Self {
            id,
            frames,
            color: cfg.color()?,
            grid_n: cfg.get("n")?,
        })
    }

    pub fn background(&self) -> [f64; 3] {
        match self.id {
            SceneId::Constant => self.color,
            _ => [0.0; 3],
        }
    }

    /// Surface color of the box at world point `p` and normalized time.
    pub fn texture(&self, p: Vec3, time: f64, frame: usize) -> [f64; 3] {
        match self.id {
            SceneId::Constant => self.color,
            SceneId::TexturedBox => oriented_texture(p),
            SceneId::RotatingTexture4d => {
                let a = 0.5 * PI * time;
                let (s, c) = a.sin_cos();
                oriented_texture([c * p[0] + s * p[2], p[1], -s * p[0] + c * p[2]])
            }
            SceneId::ShiftedGrating => {
                // period of four grid cells, shifted one cell per frame
                let cell = 2.0 / (self.grid_n.max(2) - 1) as f64;
                let phase = TAU * (p[0] - frame as f64 * cell) / (4.0 * cell);
                let g = 0.5 + 0.4 * phase.sin();
                [g, g, g]
            }
        }
    }

    /// Color and depth seen along a ray (depth 0 on a miss).
    pub fn trace(&self, ray: &Ray, time: f64, frame: usize) -> ([f64; 3], f64) {
        match box_hit(ray, BOX_HALF) {
            Some((t0, _)) => {
                let p = [0, 1, 2].map(|a| ray.origin[a] + t0 * ray.dir[a]);
                (self.texture(p, time, frame), t0)
            }
            None => (self.background(), 0.0),
        }
    }

    pub fn render(&self, cam: &Camera, time: f64, frame: usize) -> (Image, Image) {
        let (w, h) = (cam.width, cam.height);
        let mut rgb = Vec::with_capacity(w * h * 3);
        let mut depth = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                let (c, d) = self.trace(&cam.ray_through(x as f64 + 0.5, y as f64 + 0.5), time, frame);
                rgb.extend_from_slice(&c);
                depth.push(d);
            }
        }
        (
            Image::from_vec(w, h, 3, rgb).expect("sized buffer"),
            Image::from_vec(w, h, 1, depth).expect("sized buffer"),
        )
    }
}

/// Three sinusoidal gratings with different orientations, one per channel.
fn oriented_texture(p: Vec3) -> [f64; 3] {
    const DIRS: [Vec3; 3] = [[0.866, 0.5, 0.0], [0.0, 0.707, 0.707], [-0.5, 0.0, 0.866]];
    const FREQ: [f64; 3] = [2.0, 2.5, 3.0];
    [0, 1, 2].map(|c| {
        let d = DIRS[c][0] * p[0] + DIRS[c][1] * p[1] + DIRS[c][2] * p[2];
        0.5 + 0.35 * (TAU * FREQ[c] * d + c as f64).sin()
    })
}

/// Camera `k` of `count` on the ring, alternating above and below the
/// equator.
pub fn ring_camera(k: f64, count: usize, size: usize, fov: f64) -> Result<Camera, CliError> {
    let a = TAU * k / count as f64;
    let elev = 0.6 * (a * 1.5).cos();
    let eye = [RING_RADIUS * a.cos(), elev, RING_RADIUS * a.sin()];
    Camera::look_at(eye, [0.0; 3], [0.0, 1.0, 0.0], fov, size, size).map_err(CliError::Core)
}

/// Training views: `views` ring cameras per frame, rotated by half a step
/// on odd frames. Held-out views: `test_views` cameras per frame placed
/// between the training cameras.
pub fn build_dataset(cfg: &Config) -> Result<Dataset, CliError> {
    let scene = Scene::from_config(cfg)?;
    let size: usize = cfg.get("image_size")?;
    let views: usize = cfg.get("views")?;
    let test_views: usize = cfg.get("test_views")?;
    let fov: f64 = cfg.get("fov")?;
    if size == 0 || views == 0 || test_views == 0 || !(fov > 0.0 && fov < 170.0) {
        return Err(CliError::Config(
            "image_size, views and test_views must be positive and fov in (0, 170)".into(),
        ));
    }
    let mut data = Dataset {
        train: Vec::new(),
        test: Vec::new(),
        background: scene.background(),
        frames: scene.frames,
    };
    for f in 0..scene.frames {
        let time = frame_time(f, scene.frames);
        let mut add = |cam: Camera, test: bool| {
            let (image, depth) = scene.render(&cam, time, f);
            let v = View {
                camera: cam,
                time,
                frame: f,
                image,
                depth: Some(depth),
            };
            if test {
                data.test.push(v)
            } else {
                data.train.push(v)
            }
        };
        for k in 0..views {
            add(ring_camera(k as f64 + 0.5 * (f % 2) as f64, views, size, fov)?, false);
        }
        for j in 0..test_views {
            let k = (j as f64 + 0.5) * views as f64 / test_views as f64 + 0.25;
            add(ring_camera(k, views, size, fov)?, true);
        }
    }
    Ok(data)
}
