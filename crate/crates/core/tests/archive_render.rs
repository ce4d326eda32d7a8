//! A model restored from its archive renders like the original.

use dareplane::render::{render_image, Camera, RenderJob};
use dareplane::rep::{FieldKind, ParamGroup};
use dareplane::sparsity::decode_model;
use dareplane::train::{archive_model, MaskMode, Model, ModelSpec};
use dareplane::wavelet::PlaneTransform;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn restored(model: &Model, quantize: bool) -> Model {
    let bytes = archive_model(model, quantize).unwrap();
    let mut d = decode_model(&bytes).unwrap();
    assert_eq!(d.fields.len(), 2);
    let (appearance, appearance_masks) = d.fields.pop().unwrap();
    let (density, density_masks) = d.fields.pop().unwrap();
    let mut out = model.clone();
    out.density = density;
    out.appearance = appearance;
    out.density_masks = density_masks;
    out.appearance_masks = appearance_masks;
    let mut off = 0;
    out.mlp.visit_mut(&mut |s| {
        s.copy_from_slice(&d.extra[off..off + s.len()]);
        off += s.len();
    });
    assert_eq!(off, d.extra.len());
    out
}

#[test]
fn archived_model_renders_like_the_original() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let spec = ModelSpec {
        kind: FieldKind::Dynamic,
        n: 16,
        t: 4,
        transform: PlaneTransform::default(),
        density_ranks: [2, 2, 2],
        appearance_ranks: [2, 2, 2],
        feature_dim: 4,
        appearance_dim: 4,
        hidden: 8,
        masks: true,
    };
    let mut model = Model::random(&spec, &mut rng).unwrap();
    model.visit_mut(&mut |g, s| {
        if g == ParamGroup::Masks {
            s.iter_mut()
                .for_each(|v| *v = if rng.random_bool(0.3) { -1.0 } else { 1.0 });
        }
    });
    let back = restored(&model, false);
    assert!((back.sparsity() - model.sparsity()).abs() < 1e-12);

    let cam = Camera::look_at([2.0, 1.0, -2.5], [0.0; 3], [0.0, 1.0, 0.0], 45.0, 12, 12).unwrap();
    let job = RenderJob::new(cam, 0.4, 24);
    let a = render_image(&job, &model.view(MaskMode::Hard).unwrap(), None);
    let b = render_image(&job, &back.view(MaskMode::Hard).unwrap(), None);
    let worst = a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    // values are stored as f32
    assert!(worst < 1e-5, "{worst}");
}

#[test]
fn quantized_archive_is_smaller_and_close() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let spec = ModelSpec {
        kind: FieldKind::Static,
        n: 16,
        t: 1,
        transform: PlaneTransform::default(),
        density_ranks: [2, 2, 2],
        appearance_ranks: [2, 2, 2],
        feature_dim: 4,
        appearance_dim: 4,
        hidden: 8,
        masks: true,
    };
    let model = Model::random(&spec, &mut rng).unwrap();
    let full = archive_model(&model, false).unwrap();
    let small = archive_model(&model, true).unwrap();
    assert!(small.len() < full.len());
    let back = restored(&model, true);
    let coeffs = |m: &Model| -> Vec<f64> {
        let mut v = Vec::new();
        for f in [&m.density, &m.appearance] {
            f.coefficient_grids()
                .iter()
                .for_each(|g| v.extend_from_slice(g.as_slice()));
        }
        v
    };
    let (a, b) = (coeffs(&model), coeffs(&back));
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let worst = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(worst <= scale / 100.0, "{worst} vs scale {scale}");
}
