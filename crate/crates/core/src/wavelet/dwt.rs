//! Separable real 2D DWT, the shift-variant baseline.
//!
//! Haar is orthonormal. `Biorthogonal44` is the CDF 9/7 pair computed by
//! lifting with whole-sample symmetric extension, scaled so the lowpass has
//! DC gain `sqrt(2)` like Haar. Each level maps a `(r, c)` lowpass into
//! four `(r/2, c/2)` images.

use std::f64::consts::SQRT_2;
use std::fmt;
use std::str::FromStr;

use super::ops::{Axis, SparseOp};
use crate::error::{Error, Result};
use crate::grid::Grid2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DwtWavelet {
    Haar,
    Biorthogonal44,
}

impl DwtWavelet {
    pub const ALL: [DwtWavelet; 2] = [DwtWavelet::Haar, DwtWavelet::Biorthogonal44];

    pub fn as_str(self) -> &'static str {
        match self {
            DwtWavelet::Haar => "haar",
            DwtWavelet::Biorthogonal44 => "bior4.4",
        }
    }

    pub fn code(self) -> u8 {
        match self {
            DwtWavelet::Haar => 0,
            DwtWavelet::Biorthogonal44 => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|w| w.code() == code)
    }
}

impl fmt::Display for DwtWavelet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DwtWavelet {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|w| w.as_str() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown DWT wavelet '{s}'")))
    }
}

/// Detail subbands of one level. `lh` is lowpass along rows and highpass
/// along columns, `hl` the reverse, `hh` highpass along both.
#[derive(Debug, Clone, PartialEq)]
pub struct DwtLevel {
    pub lh: Grid2,
    pub hl: Grid2,
    pub hh: Grid2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DwtCoeffs {
    pub approx: Grid2,
    pub levels: Vec<DwtLevel>,
    source_shape: (usize, usize),
}

impl DwtCoeffs {
    pub fn zeros(rows: usize, cols: usize, levels: usize) -> Result<Self> {
        check_shape(rows, cols, levels)?;
        let lv = (1..=levels)
            .map(|l| {
                let z = Grid2::zeros(rows >> l, cols >> l);
                DwtLevel {
                    lh: z.clone(),
                    hl: z.clone(),
                    hh: z,
                }
            })
            .collect();
        Ok(Self {
            approx: Grid2::zeros(rows >> levels, cols >> levels),
            levels: lv,
            source_shape: (rows, cols),
        })
    }

    pub fn source_shape(&self) -> (usize, usize) {
        self.source_shape
    }

    /// All grids in canonical order: approx, then (lh, hl, hh) per level.
    pub fn grids(&self) -> Vec<&Grid2> {
        let mut v = vec![&self.approx];
        for l in &self.levels {
            v.extend([&l.lh, &l.hl, &l.hh]);
        }
        v
    }

    pub fn grids_mut(&mut self) -> Vec<&mut Grid2> {
        let mut v = vec![&mut self.approx];
        for l in &mut self.levels {
            v.extend([&mut l.lh, &mut l.hl, &mut l.hh]);
        }
        v
    }

    pub fn coefficient_count(&self) -> usize {
        self.grids().iter().map(|g| g.len()).sum()
    }

    pub fn dot(&self, other: &DwtCoeffs) -> f64 {
        self.grids().iter().zip(other.grids()).map(|(a, b)| a.dot(b)).sum()
    }

    pub fn sum_sq(&self) -> f64 {
        self.grids().iter().map(|g| g.sum_sq()).sum()
    }

    fn validate(&self) -> Result<()> {
        let (m, n) = self.source_shape;
        let expect = Self::zeros(m, n, self.levels.len())?;
        for (a, b) in self.grids().iter().zip(expect.grids()) {
            if a.shape() != b.shape() {
                return Err(Error::shape(&[b.rows(), b.cols()], &[a.rows(), a.cols()]));
            }
        }
        Ok(())
    }
}

fn check_shape(rows: usize, cols: usize, levels: usize) -> Result<()> {
    let d = 1usize << levels;
    if levels == 0 || rows == 0 || cols == 0 || rows % d != 0 || cols % d != 0 {
        return Err(Error::InvalidShape {
            shape: vec![rows, cols],
            reason: format!("need levels >= 1 and dimensions divisible by 2^{levels}"),
        });
    }
    Ok(())
}

const ALPHA: f64 = -1.586_134_342_059_924;
const BETA: f64 = -0.052_980_118_572_961;
const GAMMA: f64 = 0.882_911_075_530_934;
const DELTA: f64 = 0.443_506_852_043_971;
const KAPPA: f64 = 1.230_174_104_914_001;

/// One 1D analysis step on an even-length signal: returns `(lo, hi)`.
fn analyze_1d(w: DwtWavelet, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let h = x.len() / 2;
    let mut s: Vec<f64> = (0..h).map(|i| x[2 * i]).collect();
    let mut d: Vec<f64> = (0..h).map(|i| x[2 * i + 1]).collect();
    match w {
        DwtWavelet::Haar => {
            let lo = s.iter().zip(&d).map(|(a, b)| (a + b) / SQRT_2).collect();
            let hi = s.iter().zip(&d).map(|(a, b)| (a - b) / SQRT_2).collect();
            (lo, hi)
        }
        DwtWavelet::Biorthogonal44 => {
            predict(&mut d, &s, ALPHA);
            update(&mut s, &d, BETA);
            predict(&mut d, &s, GAMMA);
            update(&mut s, &d, DELTA);
            s.iter_mut().for_each(|v| *v *= SQRT_2 / KAPPA);
            d.iter_mut().for_each(|v| *v *= KAPPA / SQRT_2);
            (s, d)
        }
    }
}

fn synthesize_1d(w: DwtWavelet, lo: &[f64], hi: &[f64]) -> Vec<f64> {
    let h = lo.len();
    let mut x = vec![0.0; 2 * h];
    match w {
        DwtWavelet::Haar => {
            for i in 0..h {
                x[2 * i] = (lo[i] + hi[i]) / SQRT_2;
                x[2 * i + 1] = (lo[i] - hi[i]) / SQRT_2;
            }
        }
        DwtWavelet::Biorthogonal44 => {
            let mut s: Vec<f64> = lo.iter().map(|v| v * KAPPA / SQRT_2).collect();
            let mut d: Vec<f64> = hi.iter().map(|v| v * SQRT_2 / KAPPA).collect();
            update(&mut s, &d, -DELTA);
            predict(&mut d, &s, -GAMMA);
            update(&mut s, &d, -BETA);
            predict(&mut d, &s, -ALPHA);
            for i in 0..h {
                x[2 * i] = s[i];
                x[2 * i + 1] = d[i];
            }
        }
    }
    x
}

// Whole-sample symmetric extension: the even sample past the right edge
// mirrors to the last even sample, the odd sample before the left edge to
// the first odd sample.
fn predict(d: &mut [f64], s: &[f64], c: f64) {
    let h = s.len();
    for i in 0..h {
        let right = if i + 1 < h { s[i + 1] } else { s[h - 1] };
        d[i] += c * (s[i] + right);
    }
}

fn update(s: &mut [f64], d: &[f64], c: f64) {
    for i in 0..s.len() {
        let left = if i > 0 { d[i - 1] } else { d[0] };
        s[i] += c * (left + d[i]);
    }
}

/// Analysis and synthesis stages of one level along a signal of length
/// `len`, as sparse maps. Built by pushing basis vectors through the
/// lifting scheme.
struct LevelOps {
    lo: SparseOp,
    hi: SparseOp,
    inv_lo: SparseOp,
    inv_hi: SparseOp,
}

fn level_ops(w: DwtWavelet, len: usize) -> LevelOps {
    let h = len / 2;
    let mut lo = vec![vec![0.0; len]; h];
    let mut hi = vec![vec![0.0; len]; h];
    let mut e = vec![0.0; len];
    for k in 0..len {
        e[k] = 1.0;
        let (a, b) = analyze_1d(w, &e);
        for i in 0..h {
            lo[i][k] = a[i];
            hi[i][k] = b[i];
        }
        e[k] = 0.0;
    }
    let mut inv_lo = vec![vec![0.0; h]; len];
    let mut inv_hi = vec![vec![0.0; h]; len];
    let zero = vec![0.0; h];
    let mut e = vec![0.0; h];
    for k in 0..h {
        e[k] = 1.0;
        let a = synthesize_1d(w, &e, &zero);
        let b = synthesize_1d(w, &zero, &e);
        for i in 0..len {
            inv_lo[i][k] = a[i];
            inv_hi[i][k] = b[i];
        }
        e[k] = 0.0;
    }
    LevelOps {
        lo: SparseOp::from_dense(&lo, len),
        hi: SparseOp::from_dense(&hi, len),
        inv_lo: SparseOp::from_dense(&inv_lo, h),
        inv_hi: SparseOp::from_dense(&inv_hi, h),
    }
}

pub fn dwt2d_forward(plane: &Grid2, levels: usize, w: DwtWavelet) -> Result<DwtCoeffs> {
    let (m, n) = plane.shape();
    let mut out = DwtCoeffs::zeros(m, n, levels)?;
    let mut a = plane.clone();
    for l in 0..levels {
        let (r, c) = a.shape();
        let (row_ops, col_ops) = (level_ops(w, r), level_ops(w, c));
        let lo = row_ops.lo.apply(&a, Axis::Rows);
        let hi = row_ops.hi.apply(&a, Axis::Rows);
        out.levels[l] = DwtLevel {
            lh: col_ops.hi.apply(&lo, Axis::Cols),
            hl: col_ops.lo.apply(&hi, Axis::Cols),
            hh: col_ops.hi.apply(&hi, Axis::Cols),
        };
        a = col_ops.lo.apply(&lo, Axis::Cols);
    }
    out.approx = a;
    Ok(out)
}

pub fn dwt2d_inverse(c: &DwtCoeffs, w: DwtWavelet) -> Result<Grid2> {
    c.validate()?;
    let mut a = c.approx.clone();
    for l in (0..c.levels.len()).rev() {
        let (r, cc) = (a.rows() * 2, a.cols() * 2);
        let (row_ops, col_ops) = (level_ops(w, r), level_ops(w, cc));
        let lv = &c.levels[l];
        let mut lo = col_ops.inv_lo.apply(&a, Axis::Cols);
        lo.add_scaled(&col_ops.inv_hi.apply(&lv.lh, Axis::Cols), 1.0);
        let mut hi = col_ops.inv_lo.apply(&lv.hl, Axis::Cols);
        hi.add_scaled(&col_ops.inv_hi.apply(&lv.hh, Axis::Cols), 1.0);
        a = row_ops.inv_lo.apply(&lo, Axis::Rows);
        a.add_scaled(&row_ops.inv_hi.apply(&hi, Axis::Rows), 1.0);
    }
    Ok(a)
}

/// Transpose of [`dwt2d_inverse`].
pub fn dwt2d_inverse_adjoint(grad: &Grid2, levels: usize, w: DwtWavelet) -> Result<DwtCoeffs> {
    let (m, n) = grad.shape();
    let mut out = DwtCoeffs::zeros(m, n, levels)?;
    let mut g = grad.clone();
    for l in 0..levels {
        let (r, c) = g.shape();
        let (row_ops, col_ops) = (level_ops(w, r), level_ops(w, c));
        let glo = row_ops.inv_lo.apply_t(&g, Axis::Rows);
        let ghi = row_ops.inv_hi.apply_t(&g, Axis::Rows);
        out.levels[l] = DwtLevel {
            lh: col_ops.inv_hi.apply_t(&glo, Axis::Cols),
            hl: col_ops.inv_lo.apply_t(&ghi, Axis::Cols),
            hh: col_ops.inv_hi.apply_t(&ghi, Axis::Cols),
        };
        g = col_ops.inv_lo.apply_t(&glo, Axis::Cols);
    }
    out.approx = g;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Grid2 {
        Grid2::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn haar_constant_block() {
        let a = 0.37;
        let c = dwt2d_forward(&Grid2::filled(2, 2, a), 1, DwtWavelet::Haar).unwrap();
        assert!((c.approx.get(0, 0) - 2.0 * a).abs() < 1e-15);
        let l = &c.levels[0];
        assert_eq!((l.lh.get(0, 0), l.hl.get(0, 0), l.hh.get(0, 0)), (0.0, 0.0, 0.0));
    }

    #[test]
    fn bior44_constant_has_no_detail() {
        let c = dwt2d_forward(&Grid2::filled(16, 16, 1.5), 2, DwtWavelet::Biorthogonal44).unwrap();
        for l in &c.levels {
            for g in [&l.lh, &l.hl, &l.hh] {
                assert!(g.max_abs() < 1e-12);
            }
        }
        // lowpass gain sqrt(2) per axis per level
        assert!((c.approx.get(2, 2) - 1.5 * 4.0).abs() < 1e-9);
    }

    #[test]
    fn bior44_filter_taps() {
        // Interior rows of the analysis matrices are the 9/7 filters.
        let ops = level_ops(DwtWavelet::Biorthogonal44, 32);
        let lo = &ops.lo.to_dense()[8];
        let nz: Vec<f64> = lo.iter().copied().filter(|v| v.abs() > 1e-14).collect();
        assert_eq!(nz.len(), 9);
        let hi = &ops.hi.to_dense()[8];
        assert_eq!(hi.iter().filter(|v| v.abs() > 1e-14).count(), 7);
        assert!((nz.iter().sum::<f64>() - SQRT_2).abs() < 1e-12);
        assert!((nz[4] - 0.852_698_679_008_9).abs() < 1e-9, "{}", nz[4]);
    }

    #[test]
    fn round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for w in DwtWavelet::ALL {
            for levels in 1..=3 {
                let x = random(&mut rng, 32, 32);
                let c = dwt2d_forward(&x, levels, w).unwrap();
                let y = dwt2d_inverse(&c, w).unwrap();
                assert!(y.rel_l2(&x) < 1e-9, "{w} {levels}");
            }
        }
    }

    #[test]
    fn haar_is_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random(&mut rng, 16, 16);
        let c = dwt2d_forward(&x, 3, DwtWavelet::Haar).unwrap();
        let ratio = c.sum_sq() / x.sum_sq();
        assert!((ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn inverse_adjoint_inner_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for w in DwtWavelet::ALL {
            let x = random(&mut rng, 16, 8);
            let mut c = DwtCoeffs::zeros(16, 8, 2).unwrap();
            for g in c.grids_mut() {
                *g = random(&mut rng, g.rows(), g.cols());
            }
            let lhs = dwt2d_inverse(&c, w).unwrap().dot(&x);
            let rhs = c.dot(&dwt2d_inverse_adjoint(&x, 2, w).unwrap());
            assert!((lhs - rhs).abs() < 1e-10);
        }
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(dwt2d_forward(&Grid2::zeros(6, 8), 2, DwtWavelet::Haar).is_err());
        let mut c = DwtCoeffs::zeros(8, 8, 1).unwrap();
        c.levels[0].hh = Grid2::zeros(3, 3);
        assert!(dwt2d_inverse(&c, DwtWavelet::Haar).is_err());
    }
}
