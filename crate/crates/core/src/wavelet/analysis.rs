//! Diagnostics for the transforms: shift sensitivity of subband energies,
//! orientation of synthesis atoms, and a periodic texture generator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{DwtWavelet, FilterBankName, PlaneTransform, GRIDS_PER_LEVEL};
use crate::error::Result;
use crate::grid::Grid2;

/// The two transform families compared by the shift diagnostics, each at
/// one level with its default filters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransformKind {
    Dwt,
    Dtcwt,
}

impl TransformKind {
    pub fn transform(self) -> PlaneTransform {
        match self {
            TransformKind::Dwt => PlaneTransform::Dwt {
                wavelet: DwtWavelet::Biorthogonal44,
                levels: 1,
            },
            TransformKind::Dtcwt => PlaneTransform::Dtcwt {
                bank: FilterBankName::NearSymmetricA,
                levels: 1,
            },
        }
    }
}

/// Energy per detail subband. Dual-tree subbands count the squared
/// magnitude of the complex coefficient, so one entry per orientation.
pub fn subband_energies(t: &PlaneTransform, img: &Grid2) -> Result<Vec<f64>> {
    let grids = t.analyze(img)?;
    Ok(match t {
        PlaneTransform::Dtcwt { levels, .. } => (0..*levels)
            .flat_map(|l| {
                let base = 1 + l * GRIDS_PER_LEVEL;
                let grids = &grids;
                (0..6).map(move |k| grids[base + k].sum_sq() + grids[base + 6 + k].sum_sq())
            })
            .collect(),
        PlaneTransform::Dwt { .. } => grids[1..].iter().map(|g| g.sum_sq()).collect(),
    })
}

/// Circular shift of the columns by `shift` (positive moves content right).
pub fn roll_cols(img: &Grid2, shift: isize) -> Grid2 {
    let n = img.cols() as isize;
    Grid2::from_fn(img.rows(), img.cols(), |i, j| {
        img.get(i, (j as isize - shift).rem_euclid(n) as usize)
    })
}

/// Largest relative change of a detail-subband energy when the image is
/// circularly shifted by `shift` columns. Each change is normalized by the
/// larger of the two energies, so the result lies in `[0, 1]`.
pub fn shift_energy_variation(kind: TransformKind, img: &Grid2, shift: isize) -> Result<f64> {
    shift_energy_variation_with(&kind.transform(), img, shift)
}

pub fn shift_energy_variation_with(t: &PlaneTransform, img: &Grid2, shift: isize) -> Result<f64> {
    let eo = subband_energies(t, img)?;
    let es = subband_energies(t, &roll_cols(img, shift))?;
    Ok(eo
        .iter()
        .zip(&es)
        .map(|(&a, &b)| {
            let d = a.max(b);
            if d > 0.0 {
                (a - b).abs() / d
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max))
}

/// Plane synthesized from a unit coefficient at the center of real subband
/// `k` (0..6) of `level` (1-based).
pub fn subband_atom(bank: FilterBankName, levels: usize, level: usize, k: usize, size: usize) -> Result<Grid2> {
    let t = PlaneTransform::Dtcwt { bank, levels };
    let shapes = t.grid_shapes(size, size)?;
    let mut grids: Vec<Grid2> = shapes.iter().map(|&(r, c)| Grid2::zeros(r, c)).collect();
    let g = &mut grids[1 + (level - 1) * GRIDS_PER_LEVEL + k];
    let (r, c) = g.shape();
    g.set(r / 2, c / 2, 1.0);
    t.synthesize(&grids, size, size)
}

/// Dominant orientation of the local wave vector, in degrees within
/// `(-90, 90]`, from the image structure tensor. The x axis runs along
/// columns and the y axis points up (decreasing row index).
pub fn orientation_deg(g: &Grid2) -> f64 {
    let (r, c) = g.shape();
    let (mut jxx, mut jyy, mut jxy) = (0.0, 0.0, 0.0);
    for i in 1..r - 1 {
        for j in 1..c - 1 {
            let gx = 0.5 * (g.get(i, j + 1) - g.get(i, j - 1));
            let gy = 0.5 * (g.get(i - 1, j) - g.get(i + 1, j));
            jxx += gx * gx;
            jyy += gy * gy;
            jxy += gx * gy;
        }
    }
    let theta = 0.5 * (2.0 * jxy).atan2(jxx - jyy);
    let mut deg = theta.to_degrees();
    if deg <= -90.0 {
        deg += 180.0;
    }
    deg
}

/// Smallest distance between two orientations modulo 180 degrees.
pub fn angle_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(180.0);
    d.min(180.0 - d)
}

/// Periodic texture on a `size x size` torus modelling a natural image
/// crop: random-phase noise with a `1/f` amplitude spectrum, seen through
/// a Gaussian optical blur of one pixel. Circular shifts of it introduce
/// no seams.
pub fn textured_crop(seed: u64, size: usize) -> Grid2 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = size as i64 / 2;
    let sigma = 1.0;
    let w = std::f64::consts::TAU / size as f64;
    let mut comps = Vec::with_capacity(size * size);
    for fy in -h..h {
        for fx in -h..h {
            if fx == 0 && fy == 0 {
                continue;
            }
            let (fx, fy) = (fx as f64, fy as f64);
            let r2 = fx * fx + fy * fy;
            let blur = (-0.5 * sigma * sigma * w * w * r2).exp();
            let g: f64 = rng.sample(StandardNormal);
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            comps.push((w * fx, w * fy, g * blur / r2.sqrt(), phase));
        }
    }
    let img = Grid2::from_fn(size, size, |i, j| {
        let (x, y) = (j as f64, i as f64);
        comps
            .iter()
            .map(|&(ax, ay, a, p)| a * (ax * x + ay * y + p).cos())
            .sum()
    });
    let scale = (img.sum_sq() / img.len() as f64).sqrt().max(f64::MIN_POSITIVE);
    img.map(|v| v / scale)
}
