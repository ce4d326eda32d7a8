//! One-dimensional filtering stages expressed as sparse linear maps.
//!
//! Every stage of the transforms is a fixed linear map along one axis of a
//! grid. Storing each map as explicit (index, weight) rows gives the forward
//! application and its exact transpose from the same data, which is what the
//! gradient code needs.

use crate::grid::Grid2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    /// Filter along the row index (each column is a signal).
    Rows,
    /// Filter along the column index (each row is a signal).
    Cols,
}

/// Sparse `out_len x in_len` matrix in compressed-row form.
#[derive(Debug, Clone)]
pub struct SparseOp {
    in_len: usize,
    starts: Vec<usize>,
    idx: Vec<usize>,
    w: Vec<f64>,
}

impl SparseOp {
    fn builder(in_len: usize, out_len: usize) -> Builder {
        Builder {
            op: SparseOp {
                in_len,
                starts: Vec::with_capacity(out_len + 1),
                idx: Vec::new(),
                w: Vec::new(),
            },
            rows: vec![Vec::new(); out_len],
        }
    }

    pub fn in_len(&self) -> usize {
        self.in_len
    }

    pub fn out_len(&self) -> usize {
        self.starts.len() - 1
    }

    #[inline]
    fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (s, e) = (self.starts[i], self.starts[i + 1]);
        self.idx[s..e].iter().copied().zip(self.w[s..e].iter().copied())
    }

    pub fn apply_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.in_len);
        (0..self.out_len())
            .map(|i| self.row(i).map(|(k, w)| w * x[k]).sum())
            .collect()
    }

    pub fn apply_t_vec(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.out_len());
        let mut x = vec![0.0; self.in_len];
        for (i, &g) in y.iter().enumerate() {
            for (k, w) in self.row(i) {
                x[k] += w * g;
            }
        }
        x
    }

    /// Applies the map to every signal of `g` along `axis`.
    pub fn apply(&self, g: &Grid2, axis: Axis) -> Grid2 {
        let (r, c) = g.shape();
        match axis {
            Axis::Rows => {
                assert_eq!(r, self.in_len, "row-axis length mismatch");
                let mut out = Grid2::zeros(self.out_len(), c);
                let src = g.as_slice();
                let dst = out.as_mut_slice();
                for i in 0..self.out_len() {
                    let orow = &mut dst[i * c..(i + 1) * c];
                    for (k, w) in self.row(i) {
                        let irow = &src[k * c..(k + 1) * c];
                        for (o, x) in orow.iter_mut().zip(irow) {
                            *o += w * x;
                        }
                    }
                }
                out
            }
            Axis::Cols => {
                assert_eq!(c, self.in_len, "col-axis length mismatch");
                let n = self.out_len();
                let mut out = Grid2::zeros(r, n);
                let src = g.as_slice();
                let dst = out.as_mut_slice();
                for i in 0..r {
                    let irow = &src[i * c..(i + 1) * c];
                    let orow = &mut dst[i * n..(i + 1) * n];
                    for (j, o) in orow.iter_mut().enumerate() {
                        *o = self.row(j).map(|(k, w)| w * irow[k]).sum();
                    }
                }
                out
            }
        }
    }

    /// Applies the transpose of the map along `axis`.
    pub fn apply_t(&self, g: &Grid2, axis: Axis) -> Grid2 {
        let (r, c) = g.shape();
        match axis {
            Axis::Rows => {
                assert_eq!(r, self.out_len(), "row-axis length mismatch");
                let mut out = Grid2::zeros(self.in_len, c);
                let src = g.as_slice();
                let dst = out.as_mut_slice();
                for i in 0..self.out_len() {
                    let grow = &src[i * c..(i + 1) * c];
                    for (k, w) in self.row(i) {
                        let orow = &mut dst[k * c..(k + 1) * c];
                        for (o, x) in orow.iter_mut().zip(grow) {
                            *o += w * x;
                        }
                    }
                }
                out
            }
            Axis::Cols => {
                assert_eq!(c, self.out_len(), "col-axis length mismatch");
                let n = self.in_len;
                let mut out = Grid2::zeros(r, n);
                let src = g.as_slice();
                let dst = out.as_mut_slice();
                for i in 0..r {
                    let grow = &src[i * c..(i + 1) * c];
                    let orow = &mut dst[i * n..(i + 1) * n];
                    for (j, &gv) in grow.iter().enumerate() {
                        for (k, w) in self.row(j) {
                            orow[k] += w * gv;
                        }
                    }
                }
                out
            }
        }
    }

    /// Dense matrix, row-major. Used for small baselines and diagnostics.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.out_len())
            .map(|i| {
                let mut row = vec![0.0; self.in_len];
                for (k, w) in self.row(i) {
                    row[k] += w;
                }
                row
            })
            .collect()
    }

    /// Builds a sparse map from a dense matrix, dropping exact zeros.
    pub fn from_dense(m: &[Vec<f64>], in_len: usize) -> SparseOp {
        let mut b = SparseOp::builder(in_len, m.len());
        for (i, row) in m.iter().enumerate() {
            for (k, &w) in row.iter().enumerate() {
                if w != 0.0 {
                    b.push(i, k, w);
                }
            }
        }
        b.finish()
    }
}

struct Builder {
    op: SparseOp,
    rows: Vec<Vec<(usize, f64)>>,
}

impl Builder {
    fn push(&mut self, out: usize, input: usize, w: f64) {
        self.rows[out].push((input, w));
    }

    fn finish(mut self) -> SparseOp {
        self.op.starts.push(0);
        for row in self.rows {
            for (k, w) in row {
                self.op.idx.push(k);
                self.op.w.push(w);
            }
            self.op.starts.push(self.op.idx.len());
        }
        self.op
    }
}

/// Half-sample symmetric index: `..., 1, 0 | 0, 1, ..., n-1 | n-1, n-2, ...`.
#[inline]
pub(crate) fn sym_index(x: isize, n: usize) -> usize {
    let n = n as isize;
    let p = x.rem_euclid(2 * n);
    (if p < n { p } else { 2 * n - 1 - p }) as usize
}

/// Undecimated filtering with an odd-length filter; output aligned with
/// input, same length.
pub fn colfilter_op(len: usize, h: &[f64]) -> SparseOp {
    let m = h.len();
    assert!(m % 2 == 1, "colfilter requires an odd-length filter");
    let m2 = (m / 2) as isize;
    let mut b = SparseOp::builder(len, len);
    for i in 0..len {
        for (k, &hk) in h.iter().enumerate() {
            // extended sample q = i + m - 1 - k sits at signal position q - m2
            let pos = i as isize + (m - 1 - k) as isize - m2;
            b.push(i, sym_index(pos, len), hk);
        }
    }
    b.finish()
}

/// Decimate-by-two quarter-shift filtering. `ha` acts on one phase and `hb`
/// (its time reverse) on the other; outputs of the two trees interleave.
pub fn coldfilt_op(len: usize, ha: &[f64], hb: &[f64]) -> SparseOp {
    let m = ha.len();
    assert!(len % 4 == 0, "coldfilt requires a length divisible by 4");
    assert!(
        m % 2 == 0 && hb.len() == m,
        "coldfilt requires equal even-length filters"
    );
    let half = m / 2;
    let mi = m as isize;
    // t = 5, 9, 13, ... < len + 2m - 2
    let t: Vec<isize> = (5..(len as isize + 2 * mi - 2)).step_by(4).collect();
    let xe = |q: isize| sym_index(q - mi, len);
    let ab: f64 = ha.iter().zip(hb).map(|(a, b)| a * b).sum();
    let (s1, s2) = if ab > 0.0 { (0usize, 1usize) } else { (1, 0) };
    let out_len = len / 2;
    let mut b = SparseOp::builder(len, out_len);
    let n_out = out_len / 2;
    for i in 0..n_out {
        for k in 0..half {
            let tt = t[i + half - 1 - k];
            b.push(2 * i + s1, xe(tt - 1), ha[2 * k]);
            b.push(2 * i + s1, xe(tt - 3), ha[2 * k + 1]);
            b.push(2 * i + s2, xe(tt), hb[2 * k]);
            b.push(2 * i + s2, xe(tt - 2), hb[2 * k + 1]);
        }
    }
    b.finish()
}

/// Interpolate-by-two quarter-shift filtering, the synthesis counterpart
/// of [`coldfilt_op`].
pub fn colifilt_op(len: usize, ha: &[f64], hb: &[f64]) -> SparseOp {
    let m = ha.len();
    assert!(len % 2 == 0, "colifilt requires an even length");
    assert!(
        m % 2 == 0 && hb.len() == m,
        "colifilt requires equal even-length filters"
    );
    let half = m / 2;
    let m2 = half as isize;
    let xe = |q: isize| sym_index(q - m2, len);
    let ab: f64 = ha.iter().zip(hb).map(|(a, b)| a * b).sum();
    let out_len = 2 * len;
    let mut b = SparseOp::builder(len, out_len);
    let n_blocks = len / 2;
    let hao: Vec<f64> = ha.iter().step_by(2).copied().collect();
    let hae: Vec<f64> = ha.iter().skip(1).step_by(2).copied().collect();
    let hbo: Vec<f64> = hb.iter().step_by(2).copied().collect();
    let hbe: Vec<f64> = hb.iter().skip(1).step_by(2).copied().collect();
    // Each output phase is a valid convolution of a strided gather.
    let emit = |b: &mut Builder, phase: usize, seq: &[isize], f: &[f64]| {
        for i in 0..n_blocks {
            for (k, &fk) in f.iter().enumerate() {
                b.push(4 * i + phase, xe(seq[i + half - 1 - k]), fk);
            }
        }
    };
    if half % 2 == 0 {
        let t: Vec<isize> = (3..(len as isize + m as isize)).step_by(2).collect();
        let (ta, tb): (Vec<isize>, Vec<isize>) = if ab > 0.0 {
            (t.clone(), t.iter().map(|x| x - 1).collect())
        } else {
            (t.iter().map(|x| x - 1).collect(), t.clone())
        };
        let tb2: Vec<isize> = tb.iter().map(|x| x - 2).collect();
        let ta2: Vec<isize> = ta.iter().map(|x| x - 2).collect();
        emit(&mut b, 0, &tb2, &hae);
        emit(&mut b, 1, &ta2, &hbe);
        emit(&mut b, 2, &tb, &hao);
        emit(&mut b, 3, &ta, &hbo);
    } else {
        let t: Vec<isize> = (2..(len as isize + m as isize - 1)).step_by(2).collect();
        let (ta, tb): (Vec<isize>, Vec<isize>) = if ab > 0.0 {
            (t.clone(), t.iter().map(|x| x - 1).collect())
        } else {
            (t.iter().map(|x| x - 1).collect(), t.clone())
        };
        emit(&mut b, 0, &tb, &hao);
        emit(&mut b, 1, &ta, &hbo);
        emit(&mut b, 2, &tb, &hae);
        emit(&mut b, 3, &ta, &hbe);
    }
    b.finish()
}
