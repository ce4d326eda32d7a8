//! Straight-through coefficient masks and the compressed coefficient
//! archive.
//!
//! A mask entry `m` gates its coefficient `w`: the forward value is
//! `w * H(m)` (kept iff `m > 0`), while gradients flow as if the value were
//! `w * sigmoid(m)`.

mod archive;
pub mod huffman;
pub mod rle;

pub use archive::{
    decode_archive, decode_model, encode_archive, encode_model, inspect_archive, ArchiveInfo, DecodedModel,
    FORMAT_VERSION, MAGIC,
};

use crate::error::{Error, Result};
use crate::grid::Grid2;
use crate::rep::DaRePlaneField;

/// Initial logit of every mask entry: all coefficients start switched on.
pub const MASK_INIT: f64 = 2.0;

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// One real-valued mask grid per coefficient grid, in the field's
/// canonical grid order.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskSet {
    pub grids: Vec<Grid2>,
}

impl MaskSet {
    pub fn for_field(field: &DaRePlaneField, init: f64) -> Self {
        Self {
            grids: field
                .coefficient_grids()
                .into_iter()
                .map(|g| Grid2::filled(g.rows(), g.cols(), init))
                .collect(),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            grids: self.grids.iter().map(|g| Grid2::zeros(g.rows(), g.cols())).collect(),
        }
    }

    pub fn entry_count(&self) -> usize {
        self.grids.iter().map(Grid2::len).sum()
    }

    /// Checks the one-to-one shape correspondence with `field`.
    pub fn check(&self, field: &DaRePlaneField) -> Result<()> {
        let coeffs = field.coefficient_grids();
        if coeffs.len() != self.grids.len() {
            return Err(Error::shape(&[coeffs.len()], &[self.grids.len()]));
        }
        for (c, m) in coeffs.iter().zip(&self.grids) {
            if c.shape() != m.shape() {
                return Err(Error::shape(&[c.rows(), c.cols()], &[m.rows(), m.cols()]));
            }
            if !m.is_finite() {
                return Err(Error::Invalid("mask contains non-finite values".into()));
            }
        }
        Ok(())
    }

    /// Masks for an upsampled field: each logit grid is resized
    /// bilinearly to the new coefficient-grid shape.
    pub fn resized_for(&self, field: &DaRePlaneField) -> Result<Self> {
        let coeffs = field.coefficient_grids();
        if coeffs.len() != self.grids.len() {
            return Err(Error::shape(&[coeffs.len()], &[self.grids.len()]));
        }
        Ok(Self {
            grids: self
                .grids
                .iter()
                .zip(coeffs)
                .map(|(m, c)| m.resize_bilinear(c.rows(), c.cols()))
                .collect(),
        })
    }

    /// Binarized copy: `+1` where kept, `-1` where pruned.
    pub fn binarized(&self) -> Self {
        Self {
            grids: self
                .grids
                .iter()
                .map(|g| g.map(|m| if m > 0.0 { 1.0 } else { -1.0 }))
                .collect(),
        }
    }

    pub fn visit(&self, f: &mut dyn FnMut(&[f64])) {
        for g in &self.grids {
            f(g.as_slice());
        }
    }

    pub fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        for g in &mut self.grids {
            f(g.as_mut_slice());
        }
    }
}

/// Forward value of the straight-through gate: `w` where `m > 0`, else 0.
pub fn apply_mask(w: &Grid2, m: &Grid2) -> Result<Grid2> {
    if w.shape() != m.shape() {
        return Err(Error::shape(&[w.rows(), w.cols()], &[m.rows(), m.cols()]));
    }
    let data = w
        .as_slice()
        .iter()
        .zip(m.as_slice())
        .map(|(&w, &m)| if m > 0.0 { w } else { 0.0 })
        .collect();
    Grid2::from_vec(w.rows(), w.cols(), data)
}

/// Smooth gate `w * sigmoid(m)`. Its exact derivative equals the
/// straight-through gradient, which makes it the reference for gradient
/// checks.
pub fn apply_mask_surrogate(w: &Grid2, m: &Grid2) -> Result<Grid2> {
    if w.shape() != m.shape() {
        return Err(Error::shape(&[w.rows(), w.cols()], &[m.rows(), m.cols()]));
    }
    let data = w
        .as_slice()
        .iter()
        .zip(m.as_slice())
        .map(|(&w, &m)| w * sigmoid(m))
        .collect();
    Grid2::from_vec(w.rows(), w.cols(), data)
}

/// Straight-through backward. Given `g = dL/dW_hat`, accumulates
/// `dL/dW = sigmoid(m) g` and `dL/dm = sigmoid'(m) w g`.
pub fn mask_backward(w: &Grid2, m: &Grid2, g: &Grid2, gw: &mut Grid2, gm: &mut Grid2) {
    let it = w.as_slice().iter().zip(m.as_slice()).zip(g.as_slice());
    for ((((&w, &m), &g), gw), gm) in it.zip(gw.as_mut_slice()).zip(gm.as_mut_slice()) {
        let s = sigmoid(m);
        *gw += s * g;
        *gm += s * (1.0 - s) * w * g;
    }
}

/// Sum of `sigmoid(m)` over all mask entries.
pub fn mask_loss(masks: &MaskSet) -> f64 {
    masks
        .grids
        .iter()
        .map(|g| g.as_slice().iter().map(|&m| sigmoid(m)).sum::<f64>())
        .sum()
}

/// Accumulates `scale * d(mask_loss)/dm` into `grads`.
pub fn mask_loss_backward(masks: &MaskSet, scale: f64, grads: &mut MaskSet) {
    for (m, g) in masks.grids.iter().zip(&mut grads.grids) {
        for (&m, g) in m.as_slice().iter().zip(g.as_mut_slice()) {
            let s = sigmoid(m);
            *g += scale * s * (1.0 - s);
        }
    }
}

/// Fraction of mask entries that prune their coefficient (`m <= 0`).
pub fn sparsity(masks: &MaskSet) -> f64 {
    let total = masks.entry_count();
    if total == 0 {
        return 0.0;
    }
    let off: usize = masks
        .grids
        .iter()
        .map(|g| g.as_slice().iter().filter(|&&m| m <= 0.0).count())
        .sum();
    off as f64 / total as f64
}
