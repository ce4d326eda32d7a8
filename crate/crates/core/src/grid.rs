//! Dense row-major tensors, interpolation, image metrics and PPM I/O.
//!
//! All numerics are `f64`. Images are only quantized to 8 bits when written
//! to disk.

use std::fs;
use std::ops::{Index, IndexMut};
use std::path::Path;

use crate::error::{Error, Result};

/// Rank-2 dense tensor, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid2 {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Grid2 {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows >= 1 && cols >= 1, "grid dimensions must be positive");
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        let mut g = Self::zeros(rows, cols);
        g.data.fill(value);
        g
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidShape {
                shape: vec![rows, cols],
                reason: "dimensions must be positive".into(),
            });
        }
        if data.len() != rows * cols {
            return Err(Error::shape(&[rows * cols], &[data.len()]));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Grid2 {
        Grid2::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Grid2 {
        Grid2 {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn fill(&mut self, v: f64) {
        self.data.fill(v);
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|x| *x *= s);
    }

    /// `self += s * other`
    pub fn add_scaled(&mut self, other: &Grid2, s: f64) {
        assert_eq!(self.shape(), other.shape(), "add_scaled shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    pub fn dot(&self, other: &Grid2) -> f64 {
        assert_eq!(self.shape(), other.shape(), "dot shape mismatch");
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn sum_sq(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Relative L2 distance `|self - other| / max(|other|, tiny)`.
    pub fn rel_l2(&self, other: &Grid2) -> f64 {
        assert_eq!(self.shape(), other.shape());
        let num: f64 = self.data.iter().zip(&other.data).map(|(a, b)| (a - b) * (a - b)).sum();
        let den = other.sum_sq().max(f64::MIN_POSITIVE);
        (num / den).sqrt()
    }

    /// Bilinear resize that maps corner cells onto corner cells
    /// (`align_corners` semantics).
    pub fn resize_bilinear(&self, rows: usize, cols: usize) -> Grid2 {
        let su = if rows > 1 {
            (self.rows - 1) as f64 / (rows - 1) as f64
        } else {
            0.0
        };
        let sv = if cols > 1 {
            (self.cols - 1) as f64 / (cols - 1) as f64
        } else {
            0.0
        };
        Grid2::from_fn(rows, cols, |i, j| bilinear_sample(self, i as f64 * su, j as f64 * sv))
    }
}

impl Index<(usize, usize)> for Grid2 {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Grid2 {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Rank-3 dense tensor, row-major (last index fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct Grid3<T = f64> {
    dims: [usize; 3],
    data: Vec<T>,
}

impl<T: Clone> Grid3<T> {
    pub fn filled(dims: [usize; 3], value: T) -> Self {
        Self {
            dims,
            data: vec![value; dims.iter().product()],
        }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    #[inline]
    fn offset(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dims[1] + j) * self.dims[2] + k
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> &T {
        &self.data[self.offset(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: T) {
        let o = self.offset(i, j, k);
        self.data[o] = v;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }
}

/// Rank-4 dense tensor, row-major (last index fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct Grid4 {
    dims: [usize; 4],
    data: Vec<f64>,
}

impl Grid4 {
    pub fn zeros(dims: [usize; 4]) -> Self {
        Self {
            dims,
            data: vec![0.0; dims.iter().product()],
        }
    }

    pub fn dims(&self) -> [usize; 4] {
        self.dims
    }

    #[inline]
    fn offset(&self, i: [usize; 4]) -> usize {
        ((i[0] * self.dims[1] + i[1]) * self.dims[2] + i[2]) * self.dims[3] + i[3]
    }

    pub fn get(&self, i: [usize; 4]) -> f64 {
        self.data[self.offset(i)]
    }

    pub fn set(&mut self, i: [usize; 4], v: f64) {
        let o = self.offset(i);
        self.data[o] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Corner indices and weights of a clamped bilinear lookup. The four
/// weights sum to one.
#[derive(Debug, Clone, Copy)]
pub struct BilinearTap {
    pub idx: [usize; 4],
    pub w: [f64; 4],
}

impl BilinearTap {
    /// Continuous index coordinates `u` (row) and `v` (col); values outside
    /// `[0, rows-1] x [0, cols-1]` are clamped to the border.
    #[inline]
    pub fn new(rows: usize, cols: usize, u: f64, v: f64) -> Self {
        let (i0, i1, fu) = split_coord(u, rows);
        let (j0, j1, fv) = split_coord(v, cols);
        Self {
            idx: [i0 * cols + j0, i0 * cols + j1, i1 * cols + j0, i1 * cols + j1],
            w: [(1.0 - fu) * (1.0 - fv), (1.0 - fu) * fv, fu * (1.0 - fv), fu * fv],
        }
    }

    #[inline]
    pub fn sample(&self, data: &[f64]) -> f64 {
        self.w[0] * data[self.idx[0]]
            + self.w[1] * data[self.idx[1]]
            + self.w[2] * data[self.idx[2]]
            + self.w[3] * data[self.idx[3]]
    }

    /// Accumulates `g` into `grad` with the transpose of the lookup.
    #[inline]
    pub fn scatter(&self, grad: &mut [f64], g: f64) {
        for k in 0..4 {
            grad[self.idx[k]] += self.w[k] * g;
        }
    }
}

#[inline]
fn split_coord(u: f64, n: usize) -> (usize, usize, f64) {
    if n == 1 {
        return (0, 0, 0.0);
    }
    let max = (n - 1) as f64;
    let u = if u.is_nan() { 0.0 } else { u.clamp(0.0, max) };
    let i0 = (u.floor() as usize).min(n - 2);
    let f = u - i0 as f64;
    (i0, i0 + 1, f)
}

/// Linear interpolation on a 1D array with clamped coordinates.
#[derive(Debug, Clone, Copy)]
pub struct LinearTap {
    pub idx: [usize; 2],
    pub w: [f64; 2],
}

impl LinearTap {
    #[inline]
    pub fn new(len: usize, u: f64) -> Self {
        let (i0, i1, f) = split_coord(u, len);
        Self {
            idx: [i0, i1],
            w: [1.0 - f, f],
        }
    }

    #[inline]
    pub fn sample(&self, data: &[f64]) -> f64 {
        self.w[0] * data[self.idx[0]] + self.w[1] * data[self.idx[1]]
    }

    #[inline]
    pub fn scatter(&self, grad: &mut [f64], g: f64) {
        grad[self.idx[0]] += self.w[0] * g;
        grad[self.idx[1]] += self.w[1] * g;
    }
}

/// Bilinear interpolation at continuous index coordinates `(u, v)`, with
/// `u` along rows. Out-of-range coordinates clamp to the border.
pub fn bilinear_sample(g: &Grid2, u: f64, v: f64) -> f64 {
    BilinearTap::new(g.rows, g.cols, u, v).sample(&g.data)
}

/// Interleaved-channel image with values nominally in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize) -> Result<Self> {
        Self::from_vec(width, height, channels, vec![0.0; width * height * channels])
    }

    pub fn filled(width: usize, height: usize, color: &[f64]) -> Result<Self> {
        let mut img = Self::new(width, height, color.len())?;
        for px in img.data.chunks_mut(color.len()) {
            px.copy_from_slice(color);
        }
        Ok(img)
    }

    pub fn from_vec(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidShape {
                shape: vec![height, width, channels],
                reason: "channel count must be 1 or 3".into(),
            });
        }
        if width == 0 || height == 0 {
            return Err(Error::InvalidShape {
                shape: vec![height, width, channels],
                reason: "image must be non-empty".into(),
            });
        }
        if data.len() != width * height * channels {
            return Err(Error::shape(&[width * height * channels], &[data.len()]));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn from_grid(g: &Grid2) -> Self {
        Self {
            width: g.cols(),
            height: g.rows(),
            channels: 1,
            data: g.as_slice().to_vec(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.height, self.width, self.channels]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[f64] {
        let o = (y * self.width + x) * self.channels;
        &self.data[o..o + self.channels]
    }

    pub fn pixel_mut(&mut self, x: usize, y: usize) -> &mut [f64] {
        let o = (y * self.width + x) * self.channels;
        &mut self.data[o..o + self.channels]
    }

    /// One channel as a `height x width` grid.
    pub fn channel(&self, c: usize) -> Grid2 {
        Grid2::from_fn(self.height, self.width, |y, x| {
            self.data[(y * self.width + x) * self.channels + c]
        })
    }

    fn check_same_shape(&self, other: &Image) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::shape(&self.shape(), &other.shape()));
        }
        Ok(())
    }

    pub fn mse(&self, other: &Image) -> Result<f64> {
        self.check_same_shape(other)?;
        let sum: f64 = self.data.iter().zip(&other.data).map(|(a, b)| (a - b) * (a - b)).sum();
        Ok(sum / self.data.len() as f64)
    }

    /// Values quantized to 8 bits the way `write_ppm` stores them.
    pub fn quantized(&self) -> Image {
        Image {
            data: self.data.iter().map(|&v| quantize_u8(v) as f64 / 255.0).collect(),
            ..self.clone()
        }
    }
}

#[inline]
fn quantize_u8(v: f64) -> u8 {
    let v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
    (v * 255.0).round() as u8
}

/// Peak signal-to-noise ratio in dB. Identical images return
/// `f64::INFINITY`.
pub fn psnr(a: &Image, b: &Image, peak: f64) -> Result<f64> {
    let mse = a.mse(b)?;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

/// Normalized Gaussian window of odd length `n`.
pub fn gaussian_window(n: usize, sigma: f64) -> Vec<f64> {
    let c = (n as f64 - 1.0) / 2.0;
    let mut w: Vec<f64> = (0..n)
        .map(|i| {
            let d = i as f64 - c;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
    w
}

/// Window length used for an image of the given size: 11 taps, shrunk to
/// the largest odd length that fits small images.
pub fn ssim_window_len(rows: usize, cols: usize) -> usize {
    let n = SSIM_WINDOW.min(rows).min(cols);
    if n % 2 == 0 {
        n - 1
    } else {
        n
    }
}

/// Mean SSIM with an 11-tap Gaussian window (sigma 1.5) over all fully
/// contained windows, dynamic range 1. Multi-channel images average the
/// per-channel scores.
pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    a.check_same_shape(b)?;
    let mut total = 0.0;
    for c in 0..a.channels {
        total += ssim_gray(&a.channel(c), &b.channel(c));
    }
    Ok(total / a.channels as f64)
}

fn ssim_gray(x: &Grid2, y: &Grid2) -> f64 {
    let n = ssim_window_len(x.rows(), x.cols());
    let w = gaussian_window(n, SSIM_SIGMA);
    let c1 = (SSIM_K1 * 1.0_f64).powi(2);
    let c2 = (SSIM_K2 * 1.0_f64).powi(2);

    let xx = Grid2::from_fn(x.rows(), x.cols(), |i, j| x.get(i, j) * x.get(i, j));
    let yy = Grid2::from_fn(x.rows(), x.cols(), |i, j| y.get(i, j) * y.get(i, j));
    let xy = Grid2::from_fn(x.rows(), x.cols(), |i, j| x.get(i, j) * y.get(i, j));

    let mx = filter_valid(x, &w);
    let my = filter_valid(y, &w);
    let sxx = filter_valid(&xx, &w);
    let syy = filter_valid(&yy, &w);
    let sxy = filter_valid(&xy, &w);

    let mut acc = 0.0;
    for k in 0..mx.len() {
        let (ux, uy) = (mx.as_slice()[k], my.as_slice()[k]);
        let vx = sxx.as_slice()[k] - ux * ux;
        let vy = syy.as_slice()[k] - uy * uy;
        let cxy = sxy.as_slice()[k] - ux * uy;
        acc += ((2.0 * ux * uy + c1) * (2.0 * cxy + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2));
    }
    acc / mx.len() as f64
}

/// Separable correlation keeping only fully supported outputs.
fn filter_valid(g: &Grid2, w: &[f64]) -> Grid2 {
    let n = w.len();
    let (r, c) = g.shape();
    let rows = Grid2::from_fn(r, c + 1 - n, |i, j| (0..n).map(|k| w[k] * g.get(i, j + k)).sum());
    Grid2::from_fn(r + 1 - n, c + 1 - n, |i, j| {
        (0..n).map(|k| w[k] * rows.get(i + k, j)).sum()
    })
}

/// Reads a binary PPM (P6) or PGM (P5) file with maxval 255.
pub fn read_ppm(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_ppm(&bytes)
}

pub fn write_ppm(path: impl AsRef<Path>, img: &Image) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_ppm(img)).map_err(|e| Error::io(path, e))
}

pub fn encode_ppm(img: &Image) -> Vec<u8> {
    let magic = if img.channels == 3 { "P6" } else { "P5" };
    let mut out = format!("{magic}\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend(img.data.iter().map(|&v| quantize_u8(v)));
    out
}

pub fn decode_ppm(bytes: &[u8]) -> Result<Image> {
    let err = |offset: usize, reason: &str| Error::Ppm {
        offset,
        reason: reason.to_string(),
    };
    if bytes.len() < 2 {
        return Err(err(0, "missing magic number"));
    }
    let channels = match &bytes[..2] {
        b"P6" => 3,
        b"P5" => 1,
        _ => return Err(err(0, "expected P5 or P6")),
    };
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while let Some(&b) = bytes.get(pos) {
                        pos += 1;
                        if b == b'\n' {
                            break;
                        }
                    }
                }
                Some(_) => break,
                None => return Err(err(pos, "truncated header")),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(err(pos, "expected decimal header field"));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| err(start, "header field out of range"))?;
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(err(pos, "only maxval 255 is supported"));
    }
    if width == 0 || height == 0 {
        return Err(err(pos, "zero image dimension"));
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(err(pos, "expected single whitespace after maxval")),
    }
    let need = width * height * channels;
    let payload = &bytes[pos..];
    if payload.len() < need {
        return Err(err(
            bytes.len(),
            &format!("truncated payload: expected {need} bytes, found {}", payload.len()),
        ));
    }
    let data = payload[..need].iter().map(|&b| b as f64 / 255.0).collect();
    Image::from_vec(width, height, channels, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_grid(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Grid2 {
        Grid2::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn bilinear_constant_grid() {
        let g = Grid2::filled(4, 6, 2.5);
        for &(u, v) in &[(0.0, 0.0), (1.3, 4.7), (3.0, 5.0), (-2.0, 9.0)] {
            assert_eq!(bilinear_sample(&g, u, v), 2.5);
        }
    }

    #[test]
    fn bilinear_midpoint() {
        let g = Grid2::from_vec(2, 2, vec![0.0, 1.0, 0.0, 1.0]).unwrap();
        assert_eq!(bilinear_sample(&g, 0.0, 0.5), 0.5);
    }

    #[test]
    fn bilinear_matches_weighted_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g = random_grid(&mut rng, 5, 5);
        let (u, v) = (2.25, 3.75);
        let expected = 0.75 * 0.25 * g.get(2, 3)
            + 0.75 * 0.75 * g.get(2, 4)
            + 0.25 * 0.25 * g.get(3, 3)
            + 0.25 * 0.75 * g.get(3, 4);
        assert!((bilinear_sample(&g, u, v) - expected).abs() < 1e-15);
    }

    #[test]
    fn bilinear_integer_coordinates_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = random_grid(&mut rng, 6, 3);
        for i in 0..6 {
            for j in 0..3 {
                assert_eq!(bilinear_sample(&g, i as f64, j as f64), g.get(i, j));
            }
        }
    }

    #[test]
    fn bilinear_clamps_out_of_range() {
        let g = Grid2::from_fn(3, 3, |i, j| (i * 3 + j) as f64);
        assert_eq!(bilinear_sample(&g, -5.0, -1.0), g.get(0, 0));
        assert_eq!(bilinear_sample(&g, 10.0, 2.0), g.get(2, 2));
    }

    #[test]
    fn bilinear_single_cell_axis() {
        let g = Grid2::from_vec(1, 3, vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(bilinear_sample(&g, 0.4, 1.5), 2.5);
    }

    #[test]
    fn scatter_is_transpose_of_sample() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = random_grid(&mut rng, 4, 5);
        let tap = BilinearTap::new(4, 5, 1.7, 2.2);
        let mut grad = vec![0.0; 20];
        tap.scatter(&mut grad, 1.0);
        let via_scatter: f64 = grad.iter().zip(g.as_slice()).map(|(a, b)| a * b).sum();
        assert!((via_scatter - tap.sample(g.as_slice())).abs() < 1e-15);
    }

    #[test]
    fn psnr_cases() {
        let a = Image::filled(4, 3, &[0.0, 0.0, 0.0]).unwrap();
        let b = Image::filled(4, 3, &[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(psnr(&a, &a, 1.0).unwrap(), f64::INFINITY);
        assert!(psnr(&a, &b, 1.0).unwrap().abs() < 1e-12);
        let c = Image::filled(4, 3, &[0.5, 0.2, 0.3]).unwrap();
        let d = Image::filled(4, 3, &[0.6, 0.3, 0.4]).unwrap();
        assert!((psnr(&c, &d, 1.0).unwrap() - 20.0).abs() < 1e-9);
        assert_eq!(psnr(&c, &d, 1.0).unwrap(), psnr(&d, &c, 1.0).unwrap());
    }

    #[test]
    fn psnr_shape_mismatch() {
        let a = Image::new(4, 3, 3).unwrap();
        let b = Image::new(3, 4, 3).unwrap();
        assert!(matches!(psnr(&a, &b, 1.0), Err(Error::ShapeMismatch { .. })));
        assert!(ssim(&a, &b).is_err());
    }

    #[test]
    fn ssim_identity_and_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = random_grid(&mut rng, 16, 16).map(|x| 0.5 + 0.4 * x);
        let img = Image::from_grid(&g);
        assert!((ssim(&img, &img).unwrap() - 1.0).abs() < 1e-12);
        let k = Image::filled(12, 12, &[0.3]).unwrap();
        assert!((ssim(&k, &k).unwrap() - 1.0).abs() < 1e-12);
    }

    /// Direct per-window evaluation, independent of the separable filter path.
    fn ssim_oracle(x: &Grid2, y: &Grid2) -> f64 {
        let n = ssim_window_len(x.rows(), x.cols());
        let w1 = gaussian_window(n, 1.5);
        let (c1, c2) = (1e-4, 9e-4);
        let mut acc = 0.0;
        let mut count = 0;
        for i0 in 0..=x.rows() - n {
            for j0 in 0..=x.cols() - n {
                let (mut mx, mut my) = (0.0, 0.0);
                for a in 0..n {
                    for b in 0..n {
                        let w = w1[a] * w1[b];
                        mx += w * x.get(i0 + a, j0 + b);
                        my += w * y.get(i0 + a, j0 + b);
                    }
                }
                let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
                for a in 0..n {
                    for b in 0..n {
                        let w = w1[a] * w1[b];
                        let dx = x.get(i0 + a, j0 + b) - mx;
                        let dy = y.get(i0 + a, j0 + b) - my;
                        vx += w * dx * dx;
                        vy += w * dy * dy;
                        cxy += w * dx * dy;
                    }
                }
                acc += ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
                count += 1;
            }
        }
        acc / count as f64
    }

    #[test]
    fn ssim_matches_window_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &(r, c) in &[(20, 17), (8, 8)] {
            let x = random_grid(&mut rng, r, c).map(|v| 0.5 + 0.5 * v);
            let y = random_grid(&mut rng, r, c).map(|v| 0.5 + 0.5 * v);
            let fast = ssim(&Image::from_grid(&x), &Image::from_grid(&y)).unwrap();
            let slow = ssim_oracle(&x, &y);
            assert!((fast - slow).abs() < 1e-9, "{fast} vs {slow}");
            assert!((-1.0..=1.0).contains(&fast));
        }
    }

    #[test]
    fn ppm_round_trip_is_exact_at_8_bits() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for channels in [1, 3] {
            let data = (0..7 * 5 * channels).map(|_| rng.random_range(-0.1..1.1)).collect();
            let img = Image::from_vec(7, 5, channels, data).unwrap();
            let back = decode_ppm(&encode_ppm(&img)).unwrap();
            assert_eq!(back, img.quantized());
            assert_eq!(decode_ppm(&encode_ppm(&back)).unwrap(), back);
        }
    }

    #[test]
    fn ppm_errors_carry_offsets() {
        assert!(matches!(
            decode_ppm(b"P3\n1 1\n255\n"),
            Err(Error::Ppm { offset: 0, .. })
        ));
        let e = decode_ppm(b"P6\n2 2\n255\n\x01\x02").unwrap_err();
        match e {
            Error::Ppm { offset, reason } => {
                assert_eq!(offset, 13);
                assert!(reason.contains("expected 12"));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(decode_ppm(b"P5\n2 x\n"), Err(Error::Ppm { offset: 5, .. })));
        assert!(decode_ppm(b"P5\n# comment\n1 1\n255\n\x80").is_ok());
    }

    #[test]
    fn resize_bilinear_align_corners() {
        let g = Grid2::from_fn(3, 3, |i, j| i as f64 + 2.0 * j as f64);
        let r = g.resize_bilinear(5, 5);
        // affine data is reproduced exactly
        for i in 0..5 {
            for j in 0..5 {
                assert!((r.get(i, j) - (i as f64 * 0.5 + j as f64)).abs() < 1e-12);
            }
        }
    }
}
