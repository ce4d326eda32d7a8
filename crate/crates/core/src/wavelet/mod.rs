//! Wavelet transforms used to parameterize planes.
//!
//! [`PlaneTransform`] hides the difference between the dual-tree transform
//! and the DWT baseline behind a flat list of coefficient grids, which is
//! what the representation, the masks and the archive operate on.

pub mod analysis;
mod dtcwt;
mod dwt;
mod filters;
pub mod ops;
mod taps;

pub use analysis::{orientation_deg, shift_energy_variation, subband_atom, textured_crop, TransformKind};
pub use dtcwt::{
    dtcwt2d_forward, dtcwt2d_forward_adjoint, dtcwt2d_inverse, dtcwt2d_inverse_adjoint, DtcwtCoeffs, DtcwtLevel,
    GRIDS_PER_LEVEL, SUBBAND_ANGLES,
};
pub use dwt::{dwt2d_forward, dwt2d_inverse, dwt2d_inverse_adjoint, DwtCoeffs, DwtLevel, DwtWavelet};
pub use filters::{Biorthogonal, FilterBank, FilterBankName, QShift, QSHIFT14};

use crate::error::{Error, Result};
use crate::grid::Grid2;

/// Transform that turns a coefficient list into a plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlaneTransform {
    Dtcwt { bank: FilterBankName, levels: usize },
    Dwt { wavelet: DwtWavelet, levels: usize },
}

impl Default for PlaneTransform {
    fn default() -> Self {
        PlaneTransform::Dtcwt {
            bank: FilterBankName::default(),
            levels: 1,
        }
    }
}

impl PlaneTransform {
    pub fn levels(&self) -> usize {
        match *self {
            PlaneTransform::Dtcwt { levels, .. } | PlaneTransform::Dwt { levels, .. } => levels,
        }
    }

    /// Coefficients per plane sample.
    pub fn redundancy(&self) -> f64 {
        match *self {
            PlaneTransform::Dtcwt { levels, .. } => {
                let approx = 0.25f64.powi(levels as i32 - 1);
                let detail: f64 = (1..=levels).map(|l| 3.0 * 0.25f64.powi(l as i32 - 1)).sum();
                approx + detail
            }
            PlaneTransform::Dwt { .. } => 1.0,
        }
    }

    /// Shapes of the coefficient grids for an `(m, n)` plane, in canonical
    /// order.
    pub fn grid_shapes(&self, m: usize, n: usize) -> Result<Vec<(usize, usize)>> {
        Ok(match *self {
            PlaneTransform::Dtcwt { levels, .. } => DtcwtCoeffs::zeros(m, n, levels)?
                .grids()
                .iter()
                .map(|g| g.shape())
                .collect(),
            PlaneTransform::Dwt { levels, .. } => DwtCoeffs::zeros(m, n, levels)?
                .grids()
                .iter()
                .map(|g| g.shape())
                .collect(),
        })
    }

    /// Checks that `(m, n)` can be represented at this level count.
    pub fn check_shape(&self, m: usize, n: usize) -> Result<()> {
        self.grid_shapes(m, n).map(|_| ())
    }

    /// True for grids that hold lowpass (approximation) coefficients.
    pub fn is_approx_grid(&self, index: usize) -> bool {
        index == 0
    }

    pub fn analyze(&self, plane: &Grid2) -> Result<Vec<Grid2>> {
        Ok(match *self {
            PlaneTransform::Dtcwt { bank, levels } => {
                let c = dtcwt2d_forward(plane, levels, &FilterBank::new(bank))?;
                c.grids().into_iter().cloned().collect()
            }
            PlaneTransform::Dwt { wavelet, levels } => {
                let c = dwt2d_forward(plane, levels, wavelet)?;
                c.grids().into_iter().cloned().collect()
            }
        })
    }

    pub fn synthesize(&self, grids: &[Grid2], m: usize, n: usize) -> Result<Grid2> {
        match *self {
            PlaneTransform::Dtcwt { bank, levels } => {
                let mut c = DtcwtCoeffs::zeros(m, n, levels)?;
                fill(c.grids_mut(), grids)?;
                dtcwt2d_inverse(&c, &FilterBank::new(bank))
            }
            PlaneTransform::Dwt { wavelet, levels } => {
                let mut c = DwtCoeffs::zeros(m, n, levels)?;
                fill(c.grids_mut(), grids)?;
                dwt2d_inverse(&c, wavelet)
            }
        }
    }

    /// Transpose of [`PlaneTransform::synthesize`].
    pub fn synthesize_adjoint(&self, grad: &Grid2) -> Result<Vec<Grid2>> {
        Ok(match *self {
            PlaneTransform::Dtcwt { bank, levels } => dtcwt2d_inverse_adjoint(grad, levels, &FilterBank::new(bank))?
                .grids()
                .into_iter()
                .cloned()
                .collect(),
            PlaneTransform::Dwt { wavelet, levels } => dwt2d_inverse_adjoint(grad, levels, wavelet)?
                .grids()
                .into_iter()
                .cloned()
                .collect(),
        })
    }
}

fn fill(dst: Vec<&mut Grid2>, src: &[Grid2]) -> Result<()> {
    if dst.len() != src.len() {
        return Err(Error::shape(&[dst.len()], &[src.len()]));
    }
    for (d, s) in dst.into_iter().zip(src) {
        if d.shape() != s.shape() {
            return Err(Error::shape(&[d.rows(), d.cols()], &[s.rows(), s.cols()]));
        }
        d.as_mut_slice().copy_from_slice(s.as_slice());
    }
    Ok(())
}
