//! The trainable model (density field, appearance field, masks, color
//! network) and its batched forward/backward pass.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{color_input, density_grad, softplus, MlpCache, TinyMlp, VIEW_ENC_LEN};
use crate::grid::Grid2;
use crate::render::{
    integrate, integrate_backward, ray_rng, sample_ray, EmptinessVoxel, RadianceField, Ray, RayOutput, Vec3,
};
use crate::rep::{DaRePlaneField, FieldKind, FieldSpec, MaterializedPlanes, ParamGroup};
use crate::sparsity::{
    apply_mask, apply_mask_surrogate, mask_backward, mask_loss, mask_loss_backward, sigmoid, sparsity, MaskSet,
    MASK_INIT,
};
use crate::wavelet::PlaneTransform;

use super::loss::{tv_backward, tv_loss};

/// Geometry of a [`Model`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub kind: FieldKind,
    pub n: usize,
    pub t: usize,
    pub transform: PlaneTransform,
    pub density_ranks: [usize; 3],
    pub appearance_ranks: [usize; 3],
    /// Basis length per pair of the appearance field.
    pub feature_dim: usize,
    /// Appearance feature length fed to the color network.
    pub appearance_dim: usize,
    pub hidden: usize,
    pub masks: bool,
}

impl ModelSpec {
    pub fn density_spec(&self) -> FieldSpec {
        FieldSpec {
            kind: self.kind,
            n: self.n,
            t: self.t,
            ranks: self.density_ranks,
            feature_dim: 1,
            out_dim: 1,
            transform: self.transform,
            trainable_mixer: false,
        }
    }

    pub fn appearance_spec(&self) -> FieldSpec {
        FieldSpec {
            kind: self.kind,
            n: self.n,
            t: self.t,
            ranks: self.appearance_ranks,
            feature_dim: self.feature_dim,
            out_dim: self.appearance_dim,
            transform: self.transform,
            trainable_mixer: true,
        }
    }
}

/// Finer split of the parameters than [`ParamGroup`], for diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamClass {
    /// Low-pass (approximation) wavelet coefficients.
    Approximation,
    /// Oriented (DTCWT) or detail (DWT) wavelet coefficients.
    Detail,
    /// Line factors of the static decomposition.
    Vector,
    Mask,
    /// Per-rank feature basis vectors.
    Basis,
    /// Final feature mixing matrix.
    Mixer,
    Network,
}

/// How masks gate coefficients in the forward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskMode {
    /// Hard threshold (training and rendering).
    Hard,
    /// `w * sigmoid(m)`, whose exact gradient is the straight-through one;
    /// used to check gradients by finite differences.
    Surrogate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub density: DaRePlaneField,
    pub appearance: DaRePlaneField,
    pub density_masks: MaskSet,
    pub appearance_masks: MaskSet,
    pub mlp: TinyMlp,
    pub masks_enabled: bool,
}

impl Model {
    pub fn random(spec: &ModelSpec, rng: &mut impl Rng) -> Result<Self> {
        let density = DaRePlaneField::random(&spec.density_spec(), rng)?;
        let appearance = DaRePlaneField::random(&spec.appearance_spec(), rng)?;
        let mlp = TinyMlp::three_layer(spec.appearance_dim + VIEW_ENC_LEN, spec.hidden, 3, rng)?;
        Ok(Self {
            density_masks: MaskSet::for_field(&density, MASK_INIT),
            appearance_masks: MaskSet::for_field(&appearance, MASK_INIT),
            density,
            appearance,
            mlp,
            masks_enabled: spec.masks,
        })
    }

    /// Same structure with every trainable value zero.
    pub fn zeros_like(&self) -> Self {
        Self {
            density: self.density.zeros_like(),
            appearance: self.appearance.zeros_like(),
            density_masks: self.density_masks.zeros_like(),
            appearance_masks: self.appearance_masks.zeros_like(),
            mlp: self.mlp.zeros_like(),
            masks_enabled: self.masks_enabled,
        }
    }

    pub fn visit(&self, f: &mut dyn FnMut(ParamGroup, &[f64])) {
        self.density.visit(f);
        self.appearance.visit(f);
        if self.masks_enabled {
            self.density_masks.visit(&mut |s| f(ParamGroup::Masks, s));
            self.appearance_masks.visit(&mut |s| f(ParamGroup::Masks, s));
        }
        self.mlp.visit(&mut |s| f(ParamGroup::Network, s));
    }

    pub fn visit_mut(&mut self, f: &mut dyn FnMut(ParamGroup, &mut [f64])) {
        self.density.visit_mut(f);
        self.appearance.visit_mut(f);
        if self.masks_enabled {
            self.density_masks.visit_mut(&mut |s| f(ParamGroup::Masks, s));
            self.appearance_masks.visit_mut(&mut |s| f(ParamGroup::Masks, s));
        }
        self.mlp.visit_mut(&mut |s| f(ParamGroup::Network, s));
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::new();
        self.visit(&mut |_, s| v.extend_from_slice(s));
        v
    }

    pub fn groups(&self) -> Vec<ParamGroup> {
        let mut v = Vec::new();
        self.visit(&mut |g, s| v.extend(std::iter::repeat_n(g, s.len())));
        v
    }

    pub fn unflatten(&mut self, flat: &[f64]) {
        let mut off = 0;
        self.visit_mut(&mut |_, s| {
            s.copy_from_slice(&flat[off..off + s.len()]);
            off += s.len();
        });
        assert_eq!(off, flat.len(), "flat parameter length mismatch");
    }

    /// Class of every flat parameter, aligned with [`Model::flatten`].
    pub fn param_classes(&self) -> Vec<ParamClass> {
        let mut v = Vec::new();
        for f in [&self.density, &self.appearance] {
            let flags = f.approx_flags();
            let mut grid = 0;
            f.visit(&mut |g, s| {
                let c = match g {
                    ParamGroup::Coefficients if grid < flags.len() => {
                        grid += 1;
                        if flags[grid - 1] {
                            ParamClass::Approximation
                        } else {
                            ParamClass::Detail
                        }
                    }
                    ParamGroup::Coefficients => ParamClass::Vector,
                    ParamGroup::Basis => ParamClass::Basis,
                    _ => ParamClass::Mixer,
                };
                v.extend(std::iter::repeat_n(c, s.len()));
            });
        }
        if self.masks_enabled {
            for m in [&self.density_masks, &self.appearance_masks] {
                m.visit(&mut |s| v.extend(std::iter::repeat_n(ParamClass::Mask, s.len())));
            }
        }
        v.extend(std::iter::repeat_n(ParamClass::Network, self.mlp.param_count()));
        v
    }

    pub fn param_count(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_, s| n += s.len());
        n
    }

    /// Plane coefficients of both fields (the budget compared across
    /// transforms).
    pub fn coefficient_count(&self) -> usize {
        self.density.coefficient_count() + self.appearance.coefficient_count()
    }

    pub fn sparsity(&self) -> f64 {
        if !self.masks_enabled {
            return 0.0;
        }
        let a = self.density_masks.entry_count() as f64;
        let b = self.appearance_masks.entry_count() as f64;
        (sparsity(&self.density_masks) * a + sparsity(&self.appearance_masks) * b) / (a + b)
    }

    pub fn mask_loss(&self) -> f64 {
        if self.masks_enabled {
            mask_loss(&self.density_masks) + mask_loss(&self.appearance_masks)
        } else {
            0.0
        }
    }

    /// Copies of both fields with masks applied to the coefficients.
    pub fn gated_fields(&self, mode: MaskMode) -> Result<(DaRePlaneField, DaRePlaneField)> {
        let gate = |f: &DaRePlaneField, m: &MaskSet| -> Result<DaRePlaneField> {
            let mut out = f.clone();
            if self.masks_enabled {
                for (w, mk) in out.coefficient_grids_mut().into_iter().zip(&m.grids) {
                    *w = match mode {
                        MaskMode::Hard => apply_mask(w, mk)?,
                        MaskMode::Surrogate => apply_mask_surrogate(w, mk)?,
                    };
                }
            }
            Ok(out)
        };
        Ok((
            gate(&self.density, &self.density_masks)?,
            gate(&self.appearance, &self.appearance_masks)?,
        ))
    }

    pub fn view(&self, mode: MaskMode) -> Result<ModelView<'_>> {
        let (density, appearance) = self.gated_fields(mode)?;
        Ok(ModelView {
            density_planes: density.materialize(None)?,
            appearance_planes: appearance.materialize(None)?,
            density,
            appearance,
            mlp: &self.mlp,
        })
    }

    /// Doubles (or otherwise grows) the grid resolution; masks are resized
    /// to the new coefficient grids.
    pub fn upsample(&self, n: usize, t: usize) -> Result<Self> {
        let density = self.density.upsample(n, t)?;
        let appearance = self.appearance.upsample(n, t)?;
        Ok(Self {
            density_masks: self.density_masks.resized_for(&density)?,
            appearance_masks: self.appearance_masks.resized_for(&appearance)?,
            density,
            appearance,
            mlp: self.mlp.clone(),
            masks_enabled: self.masks_enabled,
        })
    }
}

/// A model with its planes materialized, ready to query.
pub struct ModelView<'a> {
    pub density: DaRePlaneField,
    pub appearance: DaRePlaneField,
    pub density_planes: MaterializedPlanes,
    pub appearance_planes: MaterializedPlanes,
    pub mlp: &'a TinyMlp,
}

impl ModelView<'_> {
    pub fn density_feature(&self, p: &[f64; 4]) -> f64 {
        let mut out = [0.0];
        self.density.query(&self.density_planes, p, &mut out);
        out[0]
    }
}

impl RadianceField for ModelView<'_> {
    fn density(&self, p: &[f64; 4]) -> f64 {
        softplus(self.density_feature(p))
    }

    fn color(&self, p: &[f64; 4], view_dir: Vec3) -> [f64; 3] {
        let mut feat = vec![0.0; self.appearance.out_dim];
        self.appearance.query(&self.appearance_planes, p, &mut feat);
        crate::field::color(&feat, view_dir, self.mlp)
    }
}

/// One supervised ray.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayTarget {
    pub ray: Ray,
    pub time: f64,
    pub rgb: [f64; 3],
    /// Jitter stream and position.
    pub frame: u64,
    pub pixel: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarchOptions {
    pub samples: usize,
    pub background: [f64; 3],
    pub jitter_seed: Option<u64>,
    pub min_transmittance: f64,
}

/// Loss weights: photometric, TV on spatial planes, TV on space-time
/// planes, mask sparsity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub photo: f64,
    pub tv_spatial: f64,
    pub tv_temporal: f64,
    pub mask: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            photo: 1.0,
            tv_spatial: 1e-5,
            tv_temporal: 2e-5,
            mask: 1e-11,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.photo, self.tv_spatial, self.tv_temporal, self.mask];
        if all.iter().all(|w| w.is_finite() && *w >= 0.0) {
            Ok(())
        } else {
            Err(Error::Invalid(format!(
                "loss weights must be finite and non-negative: {self:?}"
            )))
        }
    }
}

/// Per-worker gradient accumulators.
struct GradBuffers {
    density_planes: Vec<Grid2>,
    appearance_planes: Vec<Grid2>,
    density: DaRePlaneField,
    appearance: DaRePlaneField,
    mlp: TinyMlp,
    loss: f64,
}

impl GradBuffers {
    fn new(view: &ModelView) -> Self {
        Self {
            density_planes: view.density.plane_grad_buffers(),
            appearance_planes: view.appearance.plane_grad_buffers(),
            density: view.density.zeros_like(),
            appearance: view.appearance.zeros_like(),
            mlp: view.mlp.zeros_like(),
            loss: 0.0,
        }
    }

    fn add(&mut self, o: &GradBuffers) {
        for (a, b) in self.density_planes.iter_mut().zip(&o.density_planes) {
            a.add_scaled(b, 1.0);
        }
        for (a, b) in self.appearance_planes.iter_mut().zip(&o.appearance_planes) {
            a.add_scaled(b, 1.0);
        }
        add_params(&mut self.density, &o.density);
        add_params(&mut self.appearance, &o.appearance);
        let mut src = Vec::new();
        o.mlp.visit(&mut |s| src.push(s.to_vec()));
        let mut it = src.into_iter();
        self.mlp.visit_mut(&mut |d| {
            for (x, y) in d.iter_mut().zip(it.next().expect("same shape")) {
                *x += y;
            }
        });
        self.loss += o.loss;
    }
}

fn add_params(dst: &mut DaRePlaneField, src: &DaRePlaneField) {
    let mut parts = Vec::new();
    src.visit(&mut |_, s| parts.push(s.to_vec()));
    let mut it = parts.into_iter();
    dst.visit_mut(&mut |_, d| {
        for (x, y) in d.iter_mut().zip(it.next().expect("same shape")) {
            *x += y;
        }
    });
}

/// Rays per gradient chunk. Chunks are fixed by position in the batch
/// and reduced in order, so results do not depend on the worker count.
const CHUNK: usize = 32;

/// Predicted color of one ray (no gradients).
pub fn render_target(
    view: &ModelView,
    t: &RayTarget,
    opts: &MarchOptions,
    voxel: Option<&EmptinessVoxel>,
) -> RayOutput {
    let mut buf = None;
    march(view, t, opts, voxel, 0.0, &mut buf)
}

/// Marches one ray; with `grads`, back-propagates `scale * |pred - gt|^2`.
fn march(
    view: &ModelView,
    t: &RayTarget,
    opts: &MarchOptions,
    voxel: Option<&EmptinessVoxel>,
    scale: f64,
    grads: &mut Option<&mut GradBuffers>,
) -> RayOutput {
    let mut rng = opts.jitter_seed.map(|s| ray_rng(s, t.frame, t.pixel, opts.samples));
    let Some(s) = sample_ray(&t.ray, t.time, opts.samples, rng.as_mut()) else {
        let out = RayOutput {
            rgb: opts.background,
            opacity: 0.0,
            depth: 0.0,
        };
        if let Some(g) = grads {
            g.loss += (0..3).map(|c| (out.rgb[c] - t.rgb[c]).powi(2)).sum::<f64>();
        }
        return out;
    };
    let fdim = view.appearance.out_dim;
    let mut pts = Vec::with_capacity(s.points.len());
    let (mut sig, mut dfeat, mut col, mut ts) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut caches: Vec<MlpCache> = Vec::new();
    let mut feat = vec![0.0; fdim];
    let mut input = Vec::with_capacity(fdim + VIEW_ENC_LEN);
    let mut trans = 1.0;
    for (p, &tt) in s.points.iter().zip(&s.ts) {
        if trans < opts.min_transmittance {
            break;
        }
        if voxel.is_some_and(|v| !v.occupied(p)) {
            continue;
        }
        let df = view.density_feature(p);
        let sigma = softplus(df);
        view.appearance.query(&view.appearance_planes, p, &mut feat);
        color_input(&feat, t.ray.dir, &mut input);
        let mut cache = MlpCache::default();
        view.mlp.forward_cached(&input, &mut cache);
        let o = cache.output();
        col.push([sigmoid(o[0]), sigmoid(o[1]), sigmoid(o[2])]);
        caches.push(cache);
        pts.push(*p);
        sig.push(sigma);
        dfeat.push(df);
        ts.push(tt);
        trans *= (-sigma * s.delta).exp();
    }
    let deltas = vec![s.delta; sig.len()];
    let out = integrate(&sig, &col, &deltas, &ts, opts.background);
    let Some(g) = grads else {
        return out;
    };
    let err: Vec<f64> = (0..3).map(|c| out.rgb[c] - t.rgb[c]).collect();
    g.loss += err.iter().map(|e| e * e).sum::<f64>();
    let go = RayOutput {
        rgb: [0, 1, 2].map(|c| 2.0 * scale * err[c]),
        opacity: 0.0,
        depth: 0.0,
    };
    let n = sig.len();
    let mut g_sig = vec![0.0; n];
    let mut g_col = vec![[0.0; 3]; n];
    integrate_backward(&sig, &col, &deltas, &ts, opts.background, &go, &mut g_sig, &mut g_col);
    let mut g_in = vec![0.0; fdim + VIEW_ENC_LEN];
    for k in 0..n {
        let g_out: Vec<f64> = (0..3).map(|c| g_col[k][c] * col[k][c] * (1.0 - col[k][c])).collect();
        view.mlp.backward(&caches[k], &g_out, &mut g.mlp, Some(&mut g_in));
        view.appearance.query_backward(
            &view.appearance_planes,
            &pts[k],
            &g_in[..fdim],
            &mut g.appearance_planes,
            &mut g.appearance,
        );
        let gd = g_sig[k] * density_grad(&[dfeat[k]]);
        view.density.query_backward(
            &view.density_planes,
            &pts[k],
            &[gd],
            &mut g.density_planes,
            &mut g.density,
        );
    }
    out
}

/// Loss terms of one evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossParts {
    pub photo: f64,
    pub tv: f64,
    pub mask: f64,
    pub total: f64,
}

/// Total loss over a ray batch and, when `want_grads`, its gradient with
/// the model's structure. The photometric term is the mean squared error
/// over rays and channels.
pub fn loss_and_grads(
    model: &Model,
    mode: MaskMode,
    targets: &[RayTarget],
    opts: &MarchOptions,
    weights: &LossWeights,
    voxel: Option<&EmptinessVoxel>,
    want_grads: bool,
) -> Result<(LossParts, Option<Model>)> {
    let view = model.view(mode)?;
    let scale = weights.photo / (3 * targets.len().max(1)) as f64;
    let chunks: Vec<GradBuffers> = targets
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut buf = GradBuffers::new(&view);
            for t in chunk {
                let mut g = Some(&mut buf);
                if want_grads {
                    march(&view, t, opts, voxel, scale, &mut g);
                } else {
                    let out = render_target(&view, t, opts, voxel);
                    buf.loss += (0..3).map(|c| (out.rgb[c] - t.rgb[c]).powi(2)).sum::<f64>();
                }
            }
            buf
        })
        .collect();
    let mut acc = GradBuffers::new(&view);
    for c in &chunks {
        acc.add(c);
    }
    let photo = weights.photo * acc.loss / (3 * targets.len().max(1)) as f64;

    // TV on every materialized plane.
    let mut tv = 0.0;
    for (field, planes, grads) in [
        (&view.density, &view.density_planes, &mut acc.density_planes),
        (&view.appearance, &view.appearance_planes, &mut acc.appearance_planes),
    ] {
        for ((plane, temporal), g) in planes.planes.iter().zip(field.slot_is_temporal()).zip(grads.iter_mut()) {
            let w = if temporal {
                weights.tv_temporal
            } else {
                weights.tv_spatial
            };
            if w > 0.0 {
                tv += w * tv_loss(plane);
                if want_grads {
                    tv_backward(plane, w, g);
                }
            }
        }
    }
    let mask = weights.mask * model.mask_loss();
    let parts = LossParts {
        photo,
        tv,
        mask,
        total: photo + tv + mask,
    };
    if !want_grads {
        return Ok((parts, None));
    }

    let mut grads = model.zeros_like();
    grads.density = acc.density;
    grads.appearance = acc.appearance;
    grads.mlp = acc.mlp;
    for (field, masks, plane_grads, gfield, gmasks) in [
        (
            &model.density,
            &model.density_masks,
            &acc.density_planes,
            &mut grads.density,
            &mut grads.density_masks,
        ),
        (
            &model.appearance,
            &model.appearance_masks,
            &acc.appearance_planes,
            &mut grads.appearance,
            &mut grads.appearance_masks,
        ),
    ] {
        let coeff_grads: Vec<Grid2> = field.coefficient_grads(plane_grads)?.into_iter().flatten().collect();
        let w = field.coefficient_grids();
        let mut gw = gfield.coefficient_grids_mut();
        for (k, g) in coeff_grads.iter().enumerate() {
            if model.masks_enabled {
                mask_backward(w[k], &masks.grids[k], g, gw[k], &mut gmasks.grids[k]);
            } else {
                gw[k].add_scaled(g, 1.0);
            }
        }
        if model.masks_enabled && weights.mask > 0.0 {
            mask_loss_backward(masks, weights.mask, gmasks);
        }
    }
    Ok((parts, Some(grads)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::render::Camera;
    use crate::wavelet::{DwtWavelet, FilterBankName};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spec(kind: FieldKind, transform: PlaneTransform) -> ModelSpec {
        ModelSpec {
            kind,
            n: 8,
            t: 4,
            transform,
            density_ranks: [1, 1, 2],
            appearance_ranks: [2, 1, 1],
            feature_dim: 2,
            appearance_dim: 3,
            hidden: 6,
            masks: true,
        }
    }

    fn targets(rng: &mut ChaCha8Rng, n: usize) -> Vec<RayTarget> {
        let cam = Camera::look_at([1.5, 1.0, -2.5], [0.0; 3], [0.0, 1.0, 0.0], 50.0, 8, 8).unwrap();
        (0..n)
            .map(|i| RayTarget {
                ray: cam.ray_through(rng.random_range(1.0..7.0), rng.random_range(1.0..7.0)),
                time: rng.random(),
                rgb: [rng.random(), rng.random(), rng.random()],
                frame: 0,
                pixel: i as u64,
            })
            .collect()
    }

    fn opts() -> MarchOptions {
        MarchOptions {
            samples: 6,
            background: [0.1, 0.2, 0.3],
            jitter_seed: Some(3),
            min_transmittance: 0.0,
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let weights = LossWeights {
            photo: 1.0,
            tv_spatial: 0.3,
            tv_temporal: 0.5,
            mask: 0.01,
        };
        for (kind, t) in [
            (FieldKind::Dynamic, PlaneTransform::default()),
            (
                FieldKind::Static,
                PlaneTransform::Dtcwt {
                    bank: FilterBankName::LeGall,
                    levels: 2,
                },
            ),
            (
                FieldKind::Dynamic,
                PlaneTransform::Dwt {
                    wavelet: DwtWavelet::Biorthogonal44,
                    levels: 1,
                },
            ),
        ] {
            let mut m = Model::random(&spec(kind, t), &mut rng).unwrap();
            // spread the masks so the surrogate slope is not saturated
            m.visit_mut(&mut |g, s| {
                if g == ParamGroup::Masks {
                    s.iter_mut()
                        .enumerate()
                        .for_each(|(i, v)| *v = ((i * 7) % 5) as f64 * 0.4 - 0.8);
                }
            });
            let tg = targets(&mut rng, 10);
            let checks = super::super::gradient_check(&m, &tg, &opts(), &weights, 6, 1e-5, 1e-5, 7).unwrap();
            let want = if kind == FieldKind::Static { 7 } else { 6 };
            assert_eq!(checks.len(), want, "{checks:?}");
            for c in checks {
                assert!(c.worst < 1e-5, "{kind:?} {t:?}: {c:?}");
            }
        }
    }

    #[test]
    fn independent_parameters_have_zero_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut m = Model::random(&spec(FieldKind::Dynamic, PlaneTransform::default()), &mut rng).unwrap();
        m.masks_enabled = false;
        // Rays that miss the box touch nothing.
        let miss = vec![RayTarget {
            ray: Ray {
                origin: [5.0, 5.0, 5.0],
                dir: [1.0, 0.0, 0.0],
            },
            time: 0.5,
            rgb: [0.5; 3],
            frame: 0,
            pixel: 0,
        }];
        let w = LossWeights {
            photo: 1.0,
            tv_spatial: 0.0,
            tv_temporal: 0.0,
            mask: 0.0,
        };
        let (parts, g) = loss_and_grads(&m, MaskMode::Hard, &miss, &opts(), &w, None, true).unwrap();
        assert!(g.unwrap().flatten().iter().all(|&v| v == 0.0));
        let want = [0.4f64, 0.3, 0.2].iter().map(|d| d * d).sum::<f64>() / 3.0;
        assert!((parts.photo - want).abs() < 1e-15);
    }

    #[test]
    fn mask_loss_gradient_is_linear_weight() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = Model::random(&spec(FieldKind::Dynamic, PlaneTransform::default()), &mut rng).unwrap();
        let w = LossWeights {
            photo: 0.0,
            tv_spatial: 0.0,
            tv_temporal: 0.0,
            mask: 2.0,
        };
        let (parts, g) = loss_and_grads(&m, MaskMode::Hard, &targets(&mut rng, 3), &opts(), &w, None, true).unwrap();
        let s = sigmoid(MASK_INIT);
        let entries = m.density_masks.entry_count() + m.appearance_masks.entry_count();
        assert!((parts.mask - 2.0 * s * entries as f64).abs() < 1e-9);
        let g = g.unwrap();
        assert!(g
            .density_masks
            .grids
            .iter()
            .all(|x| x.as_slice().iter().all(|&v| (v - 2.0 * s * (1.0 - s)).abs() < 1e-15)));
    }

    #[test]
    fn flatten_round_trip_and_groups() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = Model::random(&spec(FieldKind::Static, PlaneTransform::default()), &mut rng).unwrap();
        let flat = m.flatten();
        assert_eq!(flat.len(), m.param_count());
        assert_eq!(m.groups().len(), flat.len());
        let mut z = m.zeros_like();
        z.unflatten(&flat);
        assert_eq!(z, m);
    }

    #[test]
    fn results_do_not_depend_on_worker_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = Model::random(&spec(FieldKind::Dynamic, PlaneTransform::default()), &mut rng).unwrap();
        let tg = targets(&mut rng, 100);
        let run = |n| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .unwrap()
                .install(|| {
                    let (p, g) =
                        loss_and_grads(&m, MaskMode::Hard, &tg, &opts(), &LossWeights::default(), None, true).unwrap();
                    (p, g.unwrap().flatten())
                })
        };
        assert_eq!(run(1), run(3));
    }
}
