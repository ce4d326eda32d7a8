//! Coarse-to-fine fitting loop.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{psnr, ssim, Image};
use crate::render::{
    build_emptiness, render_image, Camera, EmptinessVoxel, RadianceField, RenderJob, EMPTINESS_RES, EMPTINESS_TAU,
};
use crate::rep::{FieldKind, ParamGroup};
use crate::sparsity::encode_model;

use super::adam::{clip_global_norm, AdamState};
use super::model::{loss_and_grads, LossWeights, MarchOptions, MaskMode, Model, ModelSpec, RayTarget};

/// One posed training or evaluation image.
#[derive(Debug, Clone, PartialEq)]
pub struct View {
    pub camera: Camera,
    /// Normalized time in `[0, 1]`.
    pub time: f64,
    /// Frame index of `time`.
    pub frame: usize,
    pub image: Image,
    pub depth: Option<Image>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub train: Vec<View>,
    pub test: Vec<View>,
    pub background: [f64; 3],
    pub frames: usize,
}

impl Dataset {
    /// Normalized time of every frame.
    pub fn frame_times(&self) -> Vec<f64> {
        (0..self.frames).map(|f| frame_time(f, self.frames)).collect()
    }
}

/// Time coordinate of frame `f` out of `frames`.
pub fn frame_time(f: usize, frames: usize) -> f64 {
    if frames <= 1 {
        0.0
    } else {
        f as f64 / (frames - 1) as f64
    }
}

/// Grid resolution change at a given step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Upsample {
    pub step: usize,
    pub n: usize,
    pub t: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schedule {
    pub steps: usize,
    pub upsample: Vec<Upsample>,
    pub emptiness: Vec<usize>,
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        let inc = |s: &[usize]| s.windows(2).all(|w| w[0] < w[1]);
        let up: Vec<usize> = self.upsample.iter().map(|u| u.step).collect();
        if !inc(&up) || !inc(&self.emptiness) {
            return Err(Error::Invalid("schedule steps must be strictly increasing".into()));
        }
        if up
            .iter()
            .chain(&self.emptiness)
            .any(|&s| s == 0 || s >= self.steps.max(1))
        {
            return Err(Error::Invalid(format!("schedule steps must lie in 1..{}", self.steps)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub model: ModelSpec,
    pub schedule: Schedule,
    pub batch: usize,
    pub samples: usize,
    pub weights: LossWeights,
    pub lr_planes: f64,
    pub lr_network: f64,
    /// Learning rates decay exponentially to this fraction at the last step.
    pub lr_final_ratio: f64,
    pub clip_norm: f64,
    pub seed: u64,
    /// Samples per ray for evaluation renders.
    pub eval_samples: usize,
    pub min_transmittance: f64,
    pub quantize: bool,
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        self.weights.validate()?;
        if self.batch == 0 || self.samples == 0 || self.eval_samples == 0 {
            return Err(Error::Invalid("batch and sample counts must be positive".into()));
        }
        let rates = [self.lr_planes, self.lr_network, self.lr_final_ratio, self.clip_norm];
        if rates.iter().any(|r| !r.is_finite() || *r <= 0.0) {
            return Err(Error::Invalid("learning rates and clip norm must be positive".into()));
        }
        Ok(())
    }

    /// Plane learning rate at `step`.
    pub fn lr_at(&self, base: f64, step: usize) -> f64 {
        let frac = step as f64 / self.schedule.steps.max(1) as f64;
        base * self.lr_final_ratio.powf(frac)
    }
}

/// One line of the training log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepLog {
    pub step: usize,
    pub loss: f64,
    pub psnr: f64,
    pub sparsity: f64,
    pub lr: f64,
}

impl StepLog {
    pub fn line(&self) -> String {
        format!(
            "{}\t{:.9e}\t{:.6}\t{:.6}\t{:.6e}",
            self.step, self.loss, self.psnr, self.sparsity, self.lr
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViewMetrics {
    pub psnr: f64,
    pub ssim: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub views: Vec<ViewMetrics>,
    /// Mean held-out PSNR of each frame that has held-out views.
    pub frame_psnr: Vec<(usize, f64)>,
    pub renders: Vec<Image>,
    pub sparsity: f64,
    pub archive: Vec<u8>,
    pub log: Vec<StepLog>,
}

impl FitReport {
    pub fn mean_psnr(&self) -> f64 {
        self.views.iter().map(|v| v.psnr).sum::<f64>() / self.views.len().max(1) as f64
    }

    pub fn mean_ssim(&self) -> f64 {
        self.views.iter().map(|v| v.ssim).sum::<f64>() / self.views.len().max(1) as f64
    }

    /// Population variance of the per-frame PSNRs.
    pub fn frame_psnr_variance(&self) -> f64 {
        let n = self.frame_psnr.len().max(1) as f64;
        let mean = self.frame_psnr.iter().map(|f| f.1).sum::<f64>() / n;
        self.frame_psnr.iter().map(|f| (f.1 - mean).powi(2)).sum::<f64>() / n
    }
}

/// Mean squared error to PSNR with peak 1, capped for exact fits.
fn mse_psnr(mse: f64) -> f64 {
    if mse <= 0.0 {
        f64::INFINITY
    } else {
        -10.0 * mse.log10()
    }
}

fn sample_batch(data: &Dataset, batch: usize, seed: u64, step: usize) -> Vec<RayTarget> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(step as u64 + 1);
    (0..batch)
        .map(|k| {
            let v = &data.train[rng.random_range(0..data.train.len())];
            let x = rng.random_range(0..v.image.width());
            let y = rng.random_range(0..v.image.height());
            let px = v.image.pixel(x, y);
            RayTarget {
                ray: v.camera.ray_through(x as f64 + 0.5, y as f64 + 0.5),
                time: v.time,
                rgb: [px[0], px[1], px[2]],
                frame: step as u64,
                pixel: k as u64,
            }
        })
        .collect()
}

fn emptiness(model: &Model, data: &Dataset) -> Result<EmptinessVoxel> {
    let view = model.view(MaskMode::Hard)?;
    let times = match model.density.kind {
        FieldKind::Static => vec![0.0],
        FieldKind::Dynamic => data.frame_times(),
    };
    build_emptiness(&|p| view.density(p), EMPTINESS_RES, EMPTINESS_TAU, &times)
}

/// Renders every held-out view of `data`.
pub fn evaluate(
    model: &Model,
    data: &Dataset,
    cfg: &FitConfig,
    voxel: Option<&EmptinessVoxel>,
) -> Result<(Vec<ViewMetrics>, Vec<(usize, f64)>, Vec<Image>)> {
    let view = model.view(MaskMode::Hard)?;
    let mut metrics = Vec::new();
    let mut renders = Vec::new();
    let mut per_frame = vec![(0.0, 0usize); data.frames.max(1)];
    for v in &data.test {
        let mut job = RenderJob::new(v.camera.clone(), v.time, cfg.eval_samples);
        job.background = data.background;
        job.min_transmittance = cfg.min_transmittance;
        let img = render_image(&job, &view, voxel);
        let p = psnr(&img, &v.image, 1.0)?;
        metrics.push(ViewMetrics {
            psnr: p,
            ssim: ssim(&img, &v.image)?,
        });
        let slot = &mut per_frame[v.frame.min(data.frames.max(1) - 1)];
        slot.0 += p;
        slot.1 += 1;
        renders.push(img);
    }
    let frames = per_frame
        .iter()
        .enumerate()
        .filter(|(_, s)| s.1 > 0)
        .map(|(f, s)| (f, s.0 / s.1 as f64))
        .collect();
    Ok((metrics, frames, renders))
}

/// Encodes the model: both fields with their masks, then the color
/// network weights.
pub fn archive_model(model: &Model, quantize: bool) -> Result<Vec<u8>> {
    let mut mlp = Vec::new();
    model.mlp.visit(&mut |s| mlp.extend_from_slice(s));
    encode_model(
        &[
            (&model.density, &model.density_masks),
            (&model.appearance, &model.appearance_masks),
        ],
        &mlp,
        quantize,
    )
}

/// Optimizes a freshly initialized model on `data`.
pub fn fit(data: &Dataset, cfg: &FitConfig) -> Result<(Model, FitReport)> {
    fit_with(data, cfg, &mut |_| {})
}

/// [`fit`] with a callback receiving each log line as it is produced.
pub fn fit_with(data: &Dataset, cfg: &FitConfig, on_step: &mut dyn FnMut(&StepLog)) -> Result<(Model, FitReport)> {
    cfg.validate()?;
    if data.train.is_empty() || data.test.is_empty() {
        return Err(Error::Invalid("dataset needs training and held-out views".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = Model::random(&cfg.model, &mut rng)?;
    let opts = MarchOptions {
        samples: cfg.samples,
        background: data.background,
        jitter_seed: Some(cfg.seed),
        min_transmittance: cfg.min_transmittance,
    };
    let mut voxel: Option<EmptinessVoxel> = None;
    let mut adam = AdamState::new(model.param_count());
    let mut groups = model.groups();
    let mut log = Vec::with_capacity(cfg.schedule.steps);
    for step in 0..cfg.schedule.steps {
        if let Some(u) = cfg.schedule.upsample.iter().find(|u| u.step == step) {
            model = model.upsample(u.n, u.t)?;
            adam = AdamState::new(model.param_count());
            groups = model.groups();
        }
        if cfg.schedule.emptiness.contains(&step) {
            voxel = Some(emptiness(&model, data)?);
        }
        let targets = sample_batch(data, cfg.batch, cfg.seed, step);
        let (parts, grads) = loss_and_grads(
            &model,
            MaskMode::Hard,
            &targets,
            &opts,
            &cfg.weights,
            voxel.as_ref(),
            true,
        )?;
        let mut g = grads.expect("gradients requested").flatten();
        if !parts.total.is_finite() || g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericAbort { step });
        }
        clip_global_norm(&mut g, cfg.clip_norm);
        let lr_p = cfg.lr_at(cfg.lr_planes, step);
        let lr_n = cfg.lr_at(cfg.lr_network, step);
        let lr: Vec<f64> = groups
            .iter()
            .map(|g| match g {
                ParamGroup::Coefficients | ParamGroup::Masks => lr_p,
                ParamGroup::Basis | ParamGroup::Mixer | ParamGroup::Network => lr_n,
            })
            .collect();
        let mut theta = model.flatten();
        adam.step(&mut theta, &g, &lr);
        model.unflatten(&theta);
        let photo_mse = if cfg.weights.photo > 0.0 {
            parts.photo / cfg.weights.photo
        } else {
            parts.photo
        };
        let entry = StepLog {
            step,
            loss: parts.total,
            psnr: mse_psnr(photo_mse),
            sparsity: model.sparsity(),
            lr: lr_p,
        };
        on_step(&entry);
        log.push(entry);
    }
    let (views, frame_psnr, renders) = evaluate(&model, data, cfg, voxel.as_ref())?;
    if views.iter().any(|v| v.psnr.is_nan()) {
        return Err(Error::NumericAbort {
            step: cfg.schedule.steps,
        });
    }
    let report = FitReport {
        views,
        frame_psnr,
        renders,
        sparsity: model.sparsity(),
        archive: archive_model(&model, cfg.quantize)?,
        log,
    };
    Ok((model, report))
}
