//! From features to renderable quantities: density activation, the color
//! MLP with view conditioning, and the Gaussian deformation heads.

use rand::Rng;
use rand_distr::{Distribution, Uniform};

use crate::error::{Error, Result};
use crate::grid::Grid2;
use crate::sparsity::sigmoid;

/// Number of view-direction encoding terms appended to the color input.
pub const VIEW_ENC_LEN: usize = 9;

pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x + (-x).exp()
    } else {
        x.exp().ln_1p()
    }
}

/// Density from the first density-feature component.
pub fn density(feature: &[f64]) -> f64 {
    softplus(feature[0])
}

/// `d density / d feature[0]`.
pub fn density_grad(feature: &[f64]) -> f64 {
    sigmoid(feature[0])
}

/// Degree-two polynomial encoding of a direction. Non-unit inputs are
/// normalized first; a zero vector encodes as the `+z` direction.
pub fn view_encoding(dir: [f64; 3]) -> [f64; VIEW_ENC_LEN] {
    let n = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt();
    let [x, y, z] = if n > 0.0 {
        [dir[0] / n, dir[1] / n, dir[2] / n]
    } else {
        [0.0, 0.0, 1.0]
    };
    [1.0, x, y, z, x * y, y * z, x * z, x * x - y * y, 3.0 * z * z - 1.0]
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `(out, in)`.
    pub w: Grid2,
    pub b: Vec<f64>,
}

/// Fully connected network with ReLU between layers and a linear output.
#[derive(Debug, Clone, PartialEq)]
pub struct TinyMlp {
    pub layers: Vec<Dense>,
}

/// Activations recorded by [`TinyMlp::forward_cached`]: the input followed
/// by each layer's output (post-ReLU for hidden layers).
#[derive(Debug, Clone, Default)]
pub struct MlpCache {
    acts: Vec<Vec<f64>>,
}

impl MlpCache {
    pub fn output(&self) -> &[f64] {
        self.acts.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

impl TinyMlp {
    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::Invalid(format!("bad layer sizes {sizes:?}")));
        }
        Ok(Self {
            layers: sizes
                .windows(2)
                .map(|s| Dense {
                    w: Grid2::zeros(s[1], s[0]),
                    b: vec![0.0; s[1]],
                })
                .collect(),
        })
    }

    /// He-uniform weights, zero biases.
    pub fn random(sizes: &[usize], rng: &mut impl Rng) -> Result<Self> {
        let mut m = Self::zeros(sizes)?;
        for l in &mut m.layers {
            let bound = (6.0 / l.w.cols() as f64).sqrt();
            let u = Uniform::new(-bound, bound).expect("valid range");
            l.w.as_mut_slice().iter_mut().for_each(|x| *x = u.sample(rng));
        }
        Ok(m)
    }

    /// Three layers: `input -> hidden -> hidden -> output`.
    pub fn three_layer(input: usize, hidden: usize, output: usize, rng: &mut impl Rng) -> Result<Self> {
        Self::random(&[input, hidden, hidden, output], rng)
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.input_dim()];
        s.extend(self.layers.iter().map(|l| l.w.rows()));
        s
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].w.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").w.rows()
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(&self.sizes()).expect("sizes of a valid network")
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut cache = MlpCache::default();
        self.forward_cached(x, &mut cache);
        cache.acts.pop().expect("output")
    }

    pub fn forward_cached(&self, x: &[f64], cache: &mut MlpCache) {
        let nl = self.layers.len();
        cache.acts.resize(nl + 1, Vec::new());
        cache.acts[0].clear();
        cache.acts[0].extend_from_slice(x);
        for (k, l) in self.layers.iter().enumerate() {
            let (prev, rest) = cache.acts.split_at_mut(k + 1);
            let input = &prev[k];
            let out = &mut rest[0];
            out.clear();
            let cols = l.w.cols();
            let w = l.w.as_slice();
            for (o, &b) in l.b.iter().enumerate() {
                let row = &w[o * cols..(o + 1) * cols];
                let mut s = b;
                for (a, v) in row.iter().zip(input) {
                    s += a * v;
                }
                out.push(if k + 1 < nl { s.max(0.0) } else { s });
            }
        }
    }

    /// Accumulates parameter gradients of `<g_out, output>` into `grads`
    /// and writes the input gradient into `g_in` when given.
    pub fn backward(&self, cache: &MlpCache, g_out: &[f64], grads: &mut TinyMlp, g_in: Option<&mut [f64]>) {
        let mut g = g_out.to_vec();
        let nl = self.layers.len();
        let mut next = Vec::new();
        for k in (0..nl).rev() {
            let l = &self.layers[k];
            let gl = &mut grads.layers[k];
            let input = &cache.acts[k];
            let cols = l.w.cols();
            if k + 1 < nl {
                // ReLU: zero where the recorded output was clamped.
                for (gv, &a) in g.iter_mut().zip(&cache.acts[k + 1]) {
                    if a <= 0.0 {
                        *gv = 0.0;
                    }
                }
            }
            let need_input = k > 0 || g_in.is_some();
            next.clear();
            next.resize(cols, 0.0);
            let w = l.w.as_slice();
            let gw = gl.w.as_mut_slice();
            for (o, &go) in g.iter().enumerate() {
                if go == 0.0 {
                    continue;
                }
                gl.b[o] += go;
                let row = o * cols..(o + 1) * cols;
                for (gwv, &x) in gw[row.clone()].iter_mut().zip(input) {
                    *gwv += go * x;
                }
                if need_input {
                    for (n, &wv) in next.iter_mut().zip(&w[row]) {
                        *n += go * wv;
                    }
                }
            }
            std::mem::swap(&mut g, &mut next);
        }
        if let Some(gi) = g_in {
            gi.copy_from_slice(&g);
        }
    }

    pub fn visit(&self, f: &mut dyn FnMut(&[f64])) {
        for l in &self.layers {
            f(l.w.as_slice());
            f(&l.b);
        }
    }

    pub fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        for l in &mut self.layers {
            f(l.w.as_mut_slice());
            f(&mut l.b);
        }
    }
}

/// Color input: appearance feature followed by the view encoding.
pub fn color_input(feature: &[f64], view_dir: [f64; 3], buf: &mut Vec<f64>) {
    buf.clear();
    buf.extend_from_slice(feature);
    buf.extend_from_slice(&view_encoding(view_dir));
}

/// RGB in `(0, 1)^3` from an appearance feature and a view direction.
pub fn color(feature: &[f64], view_dir: [f64; 3], mlp: &TinyMlp) -> [f64; 3] {
    let mut x = Vec::new();
    color_input(feature, view_dir, &mut x);
    let o = mlp.forward(&x);
    [sigmoid(o[0]), sigmoid(o[1]), sigmoid(o[2])]
}

/// One Gaussian primitive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian {
    pub mu: [f64; 3],
    /// Unit quaternion `(w, x, y, z)`.
    pub rot: [f64; 4],
    pub scale: [f64; 3],
    pub opacity: f64,
}

pub type GaussianSet = Vec<Gaussian>;

/// Smallest scale kept after a deformation.
pub const SCALE_FLOOR: f64 = 1e-6;

impl Gaussian {
    pub fn is_valid(&self) -> bool {
        let qn: f64 = self.rot.iter().map(|v| v * v).sum::<f64>().sqrt();
        (qn - 1.0).abs() <= 1e-9 && self.scale.iter().all(|&s| s > 0.0) && (0.0..=1.0).contains(&self.opacity)
    }

    /// Flat `[mu, rot, scale, opacity]`, 11 values.
    pub fn to_array(&self) -> [f64; 11] {
        let mut a = [0.0; 11];
        a[..3].copy_from_slice(&self.mu);
        a[3..7].copy_from_slice(&self.rot);
        a[7..10].copy_from_slice(&self.scale);
        a[10] = self.opacity;
        a
    }
}

/// Position, rotation, scale and opacity heads.
#[derive(Debug, Clone, PartialEq)]
pub struct DeformationHeads {
    pub mu: TinyMlp,
    pub rot: TinyMlp,
    pub scale: TinyMlp,
    pub opacity: TinyMlp,
}

impl DeformationHeads {
    pub fn random(feature_dim: usize, hidden: usize, rng: &mut impl Rng) -> Result<Self> {
        Ok(Self {
            mu: TinyMlp::three_layer(feature_dim, hidden, 3, rng)?,
            rot: TinyMlp::three_layer(feature_dim, hidden, 4, rng)?,
            scale: TinyMlp::three_layer(feature_dim, hidden, 3, rng)?,
            opacity: TinyMlp::three_layer(feature_dim, hidden, 1, rng)?,
        })
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            mu: self.mu.zeros_like(),
            rot: self.rot.zeros_like(),
            scale: self.scale.zeros_like(),
            opacity: self.opacity.zeros_like(),
        }
    }

    pub fn heads(&self) -> [&TinyMlp; 4] {
        [&self.mu, &self.rot, &self.scale, &self.opacity]
    }

    pub fn heads_mut(&mut self) -> [&mut TinyMlp; 4] {
        [&mut self.mu, &mut self.rot, &mut self.scale, &mut self.opacity]
    }
}

/// Time-`t` Gaussians: additive deltas from the heads, then the quaternion
/// is renormalized, scales floored at [`SCALE_FLOOR`] and opacity clamped
/// to `[0, 1]`. `features[i]` is the field feature queried for Gaussian
/// `i` at its canonical position and time `t`.
pub fn deform(g0: &[Gaussian], features: &[Vec<f64>], heads: &DeformationHeads) -> Result<GaussianSet> {
    if g0.len() != features.len() {
        return Err(Error::shape(&[g0.len()], &[features.len()]));
    }
    Ok(g0
        .iter()
        .zip(features)
        .map(|(g, f)| {
            let dm = heads.mu.forward(f);
            let dr = heads.rot.forward(f);
            let ds = heads.scale.forward(f);
            let dop = heads.opacity.forward(f);
            let mut r = [0.0; 4];
            for k in 0..4 {
                r[k] = g.rot[k] + dr[k];
            }
            Gaussian {
                mu: [g.mu[0] + dm[0], g.mu[1] + dm[1], g.mu[2] + dm[2]],
                rot: normalize_quat(r),
                scale: [0, 1, 2].map(|k| (g.scale[k] + ds[k]).max(SCALE_FLOOR)),
                opacity: (g.opacity + dop[0]).clamp(0.0, 1.0),
            }
        })
        .collect())
}

fn normalize_quat(r: [f64; 4]) -> [f64; 4] {
    let n = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n > 0.0 {
        r.map(|v| v / n)
    } else {
        [1.0, 0.0, 0.0, 0.0]
    }
}

/// Accumulates head gradients of `sum_i <g_out[i], deform(..)[i].to_array()>`
/// into `grads`.
pub fn deform_backward(
    g0: &[Gaussian],
    features: &[Vec<f64>],
    heads: &DeformationHeads,
    g_out: &[[f64; 11]],
    grads: &mut DeformationHeads,
) {
    let mut cache = MlpCache::default();
    for ((g, f), go) in g0.iter().zip(features).zip(g_out) {
        heads.mu.forward_cached(f, &mut cache);
        heads.mu.backward(&cache, &go[..3], &mut grads.mu, None);

        heads.rot.forward_cached(f, &mut cache);
        let dr = cache.output().to_vec();
        let r: Vec<f64> = (0..4).map(|k| g.rot[k] + dr[k]).collect();
        let n = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 0.0 {
            let q: Vec<f64> = r.iter().map(|v| v / n).collect();
            let gq = &go[3..7];
            let qg: f64 = q.iter().zip(gq).map(|(a, b)| a * b).sum();
            let gr: Vec<f64> = (0..4).map(|k| (gq[k] - q[k] * qg) / n).collect();
            heads.rot.backward(&cache, &gr, &mut grads.rot, None);
        }

        heads.scale.forward_cached(f, &mut cache);
        let ds = cache.output().to_vec();
        let gs: Vec<f64> = (0..3)
            .map(|k| {
                if g.scale[k] + ds[k] > SCALE_FLOOR {
                    go[7 + k]
                } else {
                    0.0
                }
            })
            .collect();
        heads.scale.backward(&cache, &gs, &mut grads.scale, None);

        heads.opacity.forward_cached(f, &mut cache);
        let o = g.opacity + cache.output()[0];
        let go_o = if (0.0..=1.0).contains(&o) { go[10] } else { 0.0 };
        heads.opacity.backward(&cache, &[go_o], &mut grads.opacity, None);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::{prop_assert, proptest};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn density_examples() {
        assert!((density(&[0.0]) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(density(&[-60.0]) < 1e-25 && density(&[-60.0]) > 0.0);
        for x in [-3.2, -0.1, 0.7, 12.0, 45.0] {
            assert!((density(&[x, 9.0]) - (1.0 + f64::exp(x)).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_mlp_gives_grey() {
        let mlp = TinyMlp::zeros(&[4 + VIEW_ENC_LEN, 8, 8, 3]).unwrap();
        assert_eq!(color(&[1.0, 2.0, 3.0, 4.0], [0.0, 0.0, 1.0], &mlp), [0.5; 3]);
    }

    #[test]
    fn hand_computed_forward() {
        // in 2 -> hidden 2 -> out 1
        let mut m = TinyMlp::zeros(&[2, 2, 1]).unwrap();
        m.layers[0].w = Grid2::from_vec(2, 2, vec![1.0, -1.0, 0.5, 2.0]).unwrap();
        m.layers[0].b = vec![0.0, -1.0];
        m.layers[1].w = Grid2::from_vec(1, 2, vec![3.0, -2.0]).unwrap();
        m.layers[1].b = vec![0.25];
        // x = (1, 2): h = relu(-1, 3.5) = (0, 3.5); y = -7 + 0.25
        assert_eq!(m.forward(&[1.0, 2.0]), vec![-6.75]);
    }

    #[test]
    fn identity_path_color() {
        let f = 2;
        let mut m = TinyMlp::zeros(&[f + VIEW_ENC_LEN, 3, 3, 3]).unwrap();
        for k in 0..3 {
            m.layers[1].w.set(k, k, 1.0);
            m.layers[2].w.set(k, k, 1.0);
        }
        m.layers[0].w.set(0, 0, 1.0);
        m.layers[0].w.set(1, 1, 1.0);
        m.layers[0].w.set(2, f, 1.0); // constant view term
        let c = color(&[0.3, -0.4], [1.0, 0.0, 0.0], &m);
        assert!((c[0] - sigmoid(0.3)).abs() < 1e-15);
        assert_eq!(c[1], 0.5);
        assert!((c[2] - sigmoid(1.0)).abs() < 1e-15);
    }

    #[test]
    fn view_weights_zeroed_ignore_direction() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = 3;
        let mut m = TinyMlp::three_layer(f + VIEW_ENC_LEN, 16, 3, &mut rng).unwrap();
        for o in 0..16 {
            for j in f..f + VIEW_ENC_LEN {
                m.layers[0].w.set(o, j, 0.0);
            }
        }
        let feat = [0.2, -0.7, 1.1];
        assert_eq!(color(&feat, [1.0, 0.0, 0.0], &m), color(&feat, [0.0, -0.6, 0.8], &m));
    }

    #[test]
    fn view_encoding_normalizes() {
        assert_eq!(view_encoding([0.0, 0.0, 2.0]), view_encoding([0.0, 0.0, 1.0]));
        assert_eq!(view_encoding([0.0; 3]), view_encoding([0.0, 0.0, 1.0]));
    }

    #[test]
    fn mlp_backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = TinyMlp::three_layer(5, 7, 3, &mut rng).unwrap();
        let x: Vec<f64> = (0..5).map(|i| (i as f64 * 0.7).sin()).collect();
        let g = [0.3, -1.2, 0.8];
        let loss = |m: &TinyMlp, x: &[f64]| m.forward(x).iter().zip(&g).map(|(a, b)| a * b).sum::<f64>();
        let mut cache = MlpCache::default();
        m.forward_cached(&x, &mut cache);
        let mut grads = m.zeros_like();
        let mut gx = vec![0.0; 5];
        m.backward(&cache, &g, &mut grads, Some(&mut gx));
        let h = 1e-6;
        for k in 0..5 {
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[k] += h;
            xm[k] -= h;
            let fd = (loss(&m, &xp) - loss(&m, &xm)) / (2.0 * h);
            assert!((fd - gx[k]).abs() < 1e-7);
        }
        for l in 0..3 {
            for i in 0..m.layers[l].w.len() {
                let (mut mp, mut mm) = (m.clone(), m.clone());
                mp.layers[l].w.as_mut_slice()[i] += h;
                mm.layers[l].w.as_mut_slice()[i] -= h;
                let fd = (loss(&mp, &x) - loss(&mm, &x)) / (2.0 * h);
                assert!((fd - grads.layers[l].w.as_slice()[i]).abs() < 1e-7);
            }
        }
    }

    fn gaussians(rng: &mut ChaCha8Rng, n: usize) -> GaussianSet {
        (0..n)
            .map(|_| Gaussian {
                mu: [rng.random(), rng.random(), rng.random()],
                rot: normalize_quat([rng.random(), rng.random(), rng.random(), rng.random()]),
                scale: [0.1 + rng.random::<f64>(), 0.2, 0.3],
                opacity: 0.2 + 0.6 * rng.random::<f64>(),
            })
            .collect()
    }

    #[test]
    fn zero_heads_are_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g0 = gaussians(&mut rng, 4);
        let mut heads = DeformationHeads::random(3, 8, &mut rng).unwrap();
        heads = heads.zeros_like();
        let feats = vec![vec![0.1, 0.2, 0.3]; 4];
        let gt = deform(&g0, &feats, &heads).unwrap();
        for (a, b) in g0.iter().zip(&gt) {
            for (x, y) in a.to_array().iter().zip(b.to_array()) {
                assert!((x - y).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn forced_translation() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g0 = gaussians(&mut rng, 3);
        let mut heads = DeformationHeads::random(2, 4, &mut rng).unwrap().zeros_like();
        heads.mu.layers[2].b = vec![1.0, 0.0, 0.0];
        let gt = deform(&g0, &vec![vec![0.5, -0.5]; 3], &heads).unwrap();
        for (a, b) in g0.iter().zip(&gt) {
            assert_eq!(b.mu, [a.mu[0] + 1.0, a.mu[1], a.mu[2]]);
        }
        assert!(deform(&g0, &[vec![0.0; 2]], &heads).is_err());
    }

    #[test]
    fn random_heads_match_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g0 = gaussians(&mut rng, 5);
        let heads = DeformationHeads::random(3, 6, &mut rng).unwrap();
        let feats: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64 * 0.1, -0.3, 0.5]).collect();
        let gt = deform(&g0, &feats, &heads).unwrap();
        for i in 0..5 {
            let dm = heads.mu.forward(&feats[i]);
            let dr = heads.rot.forward(&feats[i]);
            let ds = heads.scale.forward(&feats[i]);
            let dop = heads.opacity.forward(&feats[i]);
            let r: Vec<f64> = (0..4).map(|k| g0[i].rot[k] + dr[k]).collect();
            let n = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            for k in 0..3 {
                assert_eq!(gt[i].mu[k], g0[i].mu[k] + dm[k]);
                assert_eq!(gt[i].scale[k], (g0[i].scale[k] + ds[k]).max(SCALE_FLOOR));
            }
            for k in 0..4 {
                assert!((gt[i].rot[k] - r[k] / n).abs() < 1e-15);
            }
            assert_eq!(gt[i].opacity, (g0[i].opacity + dop[0]).clamp(0.0, 1.0));
            assert!(gt[i].is_valid());
        }
    }

    #[test]
    fn deform_backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let g0 = gaussians(&mut rng, 3);
        let mut heads = DeformationHeads::random(2, 5, &mut rng).unwrap();
        // keep the outputs away from the clamps
        for h in heads.heads_mut() {
            for l in &mut h.layers {
                l.w.scale(0.1);
            }
        }
        let feats: Vec<Vec<f64>> = (0..3).map(|i| vec![0.3 * i as f64 - 0.2, 0.4]).collect();
        let g_out: Vec<[f64; 11]> = (0..3)
            .map(|i| std::array::from_fn(|k| ((i * 11 + k) as f64 * 0.37).sin()))
            .collect();
        let loss = |h: &DeformationHeads| -> f64 {
            deform(&g0, &feats, h)
                .unwrap()
                .iter()
                .zip(&g_out)
                .map(|(g, go)| g.to_array().iter().zip(go).map(|(a, b)| a * b).sum::<f64>())
                .sum()
        };
        let mut grads = heads.zeros_like();
        deform_backward(&g0, &feats, &heads, &g_out, &mut grads);
        let h = 1e-6;
        for hi in 0..4 {
            for l in 0..3 {
                let n = heads.heads()[hi].layers[l].w.len();
                for i in (0..n).step_by(3) {
                    let (mut p, mut m) = (heads.clone(), heads.clone());
                    p.heads_mut()[hi].layers[l].w.as_mut_slice()[i] += h;
                    m.heads_mut()[hi].layers[l].w.as_mut_slice()[i] -= h;
                    let fd = (loss(&p) - loss(&m)) / (2.0 * h);
                    let an = grads.heads()[hi].layers[l].w.as_slice()[i];
                    assert!((fd - an).abs() < 1e-7, "head {hi} layer {l} [{i}]: {fd} vs {an}");
                }
            }
        }
    }

    proptest! {
        #[test]
        fn density_monotone_nonnegative(a in -50.0f64..50.0, d in 0.0f64..10.0) {
            prop_assert!(density(&[a]) >= 0.0);
            prop_assert!(density(&[a + d]) >= density(&[a]));
        }

        #[test]
        fn color_is_lipschitz(seed in 0u64..50, d in proptest::collection::vec(-1e-3f64..1e-3, 4)) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = TinyMlp::three_layer(4 + VIEW_ENC_LEN, 16, 3, &mut rng).unwrap();
            let bound: f64 = m.layers.iter().map(|l| l.w.sum_sq().sqrt()).product::<f64>() / 4.0;
            let f = [0.1, -0.2, 0.3, 0.9];
            let g: Vec<f64> = f.iter().zip(&d).map(|(a, b)| a + b).collect();
            let (a, b) = (color(&f, [0.0, 1.0, 0.0], &m), color(&g, [0.0, 1.0, 0.0], &m));
            let dc = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            let df = d.iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assert!(dc <= bound * df + 1e-15);
        }

        #[test]
        fn deformed_quaternions_are_unit(seed in 0u64..30) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g0 = gaussians(&mut rng, 4);
            let heads = DeformationHeads::random(2, 4, &mut rng).unwrap();
            let feats: Vec<Vec<f64>> = (0..4).map(|_| vec![rng.random(), rng.random()]).collect();
            for g in deform(&g0, &feats, &heads).unwrap() {
                let n: f64 = g.rot.iter().map(|v| v * v).sum::<f64>().sqrt();
                prop_assert!((n - 1.0).abs() <= 1e-9);
                prop_assert!(g.scale.iter().all(|&s| s > 0.0));
                prop_assert!((0.0..=1.0).contains(&g.opacity));
            }
        }
    }
}
