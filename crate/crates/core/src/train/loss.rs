//! Loss terms and their gradients.

use crate::error::{Error, Result};
use crate::grid::{Grid2, Image};

/// Mean squared difference over all pixels and channels.
pub fn photometric_mse(pred: &Image, gt: &Image) -> Result<f64> {
    pred.mse(gt)
}

/// Mean squared forward difference along rows plus the same along
/// columns.
pub fn tv_loss(plane: &Grid2) -> f64 {
    let (r, c) = plane.shape();
    let (mut v, mut h) = (0.0, 0.0);
    for i in 0..r {
        for j in 0..c {
            let x = plane.get(i, j);
            if i + 1 < r {
                v += (plane.get(i + 1, j) - x).powi(2);
            }
            if j + 1 < c {
                h += (plane.get(i, j + 1) - x).powi(2);
            }
        }
    }
    let nv = ((r - 1) * c).max(1) as f64;
    let nh = (r * (c - 1)).max(1) as f64;
    v / nv + h / nh
}

/// Accumulates `scale * d tv_loss / d plane` into `grad`.
pub fn tv_backward(plane: &Grid2, scale: f64, grad: &mut Grid2) {
    let (r, c) = plane.shape();
    let sv = 2.0 * scale / ((r - 1) * c).max(1) as f64;
    let sh = 2.0 * scale / (r * (c - 1)).max(1) as f64;
    for i in 0..r {
        for j in 0..c {
            let x = plane.get(i, j);
            if i + 1 < r {
                let d = plane.get(i + 1, j) - x;
                grad[(i + 1, j)] += sv * d;
                grad[(i, j)] -= sv * d;
            }
            if j + 1 < c {
                let d = plane.get(i, j + 1) - x;
                grad[(i, j + 1)] += sh * d;
                grad[(i, j)] -= sh * d;
            }
        }
    }
}

fn check_mask(pred: &Image, mask: &[bool]) -> Result<()> {
    let n = pred.width() * pred.height();
    if mask.len() != n {
        return Err(Error::shape(&[n], &[mask.len()]));
    }
    Ok(())
}

/// Sum of `|pred - gt|` over the channels of pixels where `mask` is set.
pub fn masked_l1_color(pred: &Image, gt: &Image, mask: &[bool]) -> Result<f64> {
    if pred.shape() != gt.shape() {
        return Err(Error::shape(&pred.shape(), &gt.shape()));
    }
    check_mask(pred, mask)?;
    let ch = pred.channels();
    Ok(pred
        .as_slice()
        .chunks(ch)
        .zip(gt.as_slice().chunks(ch))
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|((a, b), _)| a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>())
        .sum())
}

/// One minus the Pearson correlation of masked single-channel depths.
/// Zero variance in either input counts as uncorrelated (loss 1).
pub fn pcc_depth_loss(pred: &Image, gt: &Image, mask: &[bool]) -> Result<f64> {
    if pred.shape() != gt.shape() || pred.channels() != 1 {
        return Err(Error::shape(&gt.shape(), &pred.shape()));
    }
    check_mask(pred, mask)?;
    let pairs: Vec<(f64, f64)> = pred
        .as_slice()
        .iter()
        .zip(gt.as_slice())
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|((&a, &b), _)| (a, b))
        .collect();
    if pairs.len() < 2 {
        return Err(Error::Invalid("depth correlation needs two masked pixels".into()));
    }
    let n = pairs.len() as f64;
    let ma = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let mb = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for &(a, b) in &pairs {
        cov += (a - ma) * (b - mb);
        va += (a - ma).powi(2);
        vb += (b - mb).powi(2);
    }
    if va <= 0.0 || vb <= 0.0 {
        return Ok(1.0);
    }
    Ok((1.0 - cov / (va * vb).sqrt()).clamp(0.0, 2.0))
}
