//! Finite-difference verification of the analytic model gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;

use super::model::{loss_and_grads, LossWeights, MarchOptions, MaskMode, Model, ParamClass, RayTarget};

/// Worst finite-difference mismatch within one parameter class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassCheck {
    pub class: ParamClass,
    pub checked: usize,
    pub worst: f64,
}

/// Relative error with an absolute floor that absorbs round-off in the
/// summed loss when both values are tiny.
pub fn relative_error(fd: f64, analytic: f64, floor: f64) -> f64 {
    (fd - analytic).abs() / fd.abs().max(analytic.abs()).max(floor)
}

/// Compares analytic gradients (surrogate masks) with central differences
/// of step `h` on `picks` random entries of every class present in `model`.
pub fn gradient_check(
    model: &Model,
    targets: &[RayTarget],
    opts: &MarchOptions,
    weights: &LossWeights,
    picks: usize,
    h: f64,
    floor: f64,
    seed: u64,
) -> Result<Vec<ClassCheck>> {
    let loss = |m: &Model, grads: bool| loss_and_grads(m, MaskMode::Surrogate, targets, opts, weights, None, grads);
    let g = loss(model, true)?.1.expect("gradients requested").flatten();
    let theta = model.flatten();
    let classes = model.param_classes();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for class in [
        ParamClass::Approximation,
        ParamClass::Detail,
        ParamClass::Vector,
        ParamClass::Mask,
        ParamClass::Basis,
        ParamClass::Mixer,
        ParamClass::Network,
    ] {
        let idx: Vec<usize> = (0..theta.len()).filter(|&k| classes[k] == class).collect();
        if idx.is_empty() {
            continue;
        }
        let mut worst: f64 = 0.0;
        let mut m = model.clone();
        for _ in 0..picks {
            let k = idx[rng.random_range(0..idx.len())];
            let mut eval = |d: f64| -> Result<f64> {
                let mut th = theta.clone();
                th[k] += d;
                m.unflatten(&th);
                Ok(loss(&m, false)?.0.total)
            };
            let fd = (eval(h)? - eval(-h)?) / (2.0 * h);
            worst = worst.max(relative_error(fd, g[k], floor));
        }
        out.push(ClassCheck {
            class,
            checked: picks,
            worst,
        });
    }
    Ok(out)
}
