//! Plane-factorized fields whose planes are stored as wavelet coefficients.
//!
//! A dynamic field pairs each spatial plane with a space-time plane
//! (XY with ZT, XZ with YT, YZ with XT); a static field pairs each spatial
//! plane with a vector along the remaining axis. A point feature is the
//! rank sum of factor products times per-rank basis vectors, concatenated
//! over the three pairs and multiplied by the mixing matrix.
//!
//! Canonical parameter order, used by masks and archives: pairs in the
//! order above; within a pair, rank-major, the spatial plane before its
//! partner plane; within a plane, the transform's grid order.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::grid::{BilinearTap, Grid2, LinearTap};
use crate::wavelet::PlaneTransform;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FieldKind {
    Dynamic,
    Static,
}

impl FieldKind {
    pub fn code(self) -> u8 {
        match self {
            FieldKind::Dynamic => 0,
            FieldKind::Static => 1,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(FieldKind::Dynamic),
            1 => Some(FieldKind::Static),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PairId {
    /// XY spatial plane with ZT partner (or Z vector).
    XyZt,
    /// XZ with YT (or Y).
    XzYt,
    /// YZ with XT (or X).
    YzXt,
}

pub const PAIRS: [PairId; 3] = [PairId::XyZt, PairId::XzYt, PairId::YzXt];

impl PairId {
    /// Coordinate indices `(a, b, c)` into `[x, y, z, t]`: the spatial
    /// plane spans `(a, b)`, the partner spans `(c, t)` or `c` alone.
    pub fn axes(self) -> (usize, usize, usize) {
        match self {
            PairId::XyZt => (0, 1, 2),
            PairId::XzYt => (0, 2, 1),
            PairId::YzXt => (1, 2, 0),
        }
    }

    pub fn name(self, kind: FieldKind) -> &'static str {
        match (self, kind) {
            (PairId::XyZt, FieldKind::Dynamic) => "XY-ZT",
            (PairId::XzYt, FieldKind::Dynamic) => "XZ-YT",
            (PairId::YzXt, FieldKind::Dynamic) => "YZ-XT",
            (PairId::XyZt, FieldKind::Static) => "XY-Z",
            (PairId::XzYt, FieldKind::Static) => "XZ-Y",
            (PairId::YzXt, FieldKind::Static) => "YZ-X",
        }
    }
}

/// Coefficient grids of one plane.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneParam {
    pub rows: usize,
    pub cols: usize,
    pub coeffs: Vec<Grid2>,
}

impl PlaneParam {
    pub fn zeros(t: &PlaneTransform, rows: usize, cols: usize) -> Result<Self> {
        let coeffs = t
            .grid_shapes(rows, cols)?
            .into_iter()
            .map(|(r, c)| Grid2::zeros(r, c))
            .collect();
        Ok(Self { rows, cols, coeffs })
    }

    pub fn from_plane(t: &PlaneTransform, plane: &Grid2) -> Result<Self> {
        Ok(Self {
            rows: plane.rows(),
            cols: plane.cols(),
            coeffs: t.analyze(plane)?,
        })
    }

    pub fn synthesize(&self, t: &PlaneTransform) -> Result<Grid2> {
        t.synthesize(&self.coeffs, self.rows, self.cols)
    }

    pub fn coefficient_count(&self) -> usize {
        self.coeffs.iter().map(|g| g.len()).sum()
    }
}

/// Partner factors of a pair: space-time planes or axis vectors.
#[derive(Debug, Clone, PartialEq)]
pub enum Partner {
    Planes(Vec<PlaneParam>),
    Vectors(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanePairStack {
    pub pair: PairId,
    pub spatial: Vec<PlaneParam>,
    pub partner: Partner,
    /// Per-rank basis vectors `v_r`, each of length `F`.
    pub basis: Vec<Vec<f64>>,
}

impl PlanePairStack {
    pub fn rank(&self) -> usize {
        self.spatial.len()
    }
}

/// Shape and initialization settings of a field.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSpec {
    pub kind: FieldKind,
    /// Spatial resolution per axis.
    pub n: usize,
    /// Temporal resolution (ignored for static fields).
    pub t: usize,
    pub ranks: [usize; 3],
    /// Basis length `F` per pair.
    pub feature_dim: usize,
    /// Output length of the mixing matrix.
    pub out_dim: usize,
    pub transform: PlaneTransform,
    /// When false the mixing matrix is fixed to all ones and is not a
    /// trainable parameter (used for density fields).
    pub trainable_mixer: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DaRePlaneField {
    pub kind: FieldKind,
    pub n: usize,
    pub t: usize,
    pub feature_dim: usize,
    pub out_dim: usize,
    pub transform: PlaneTransform,
    pub stacks: Vec<PlanePairStack>,
    /// `V^RF`, shape `(3F, out_dim)`.
    pub mixer: Grid2,
    pub trainable_mixer: bool,
}

/// Where a plane slot lives inside the field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlotRef {
    pub stack: usize,
    pub rank: usize,
    /// True for partner (space-time) planes.
    pub partner: bool,
}

impl DaRePlaneField {
    /// Field with every parameter zero (useful as a gradient buffer shape).
    pub fn zeros(spec: &FieldSpec) -> Result<Self> {
        let n = spec.n;
        if spec.feature_dim == 0 || spec.out_dim == 0 {
            return Err(Error::Invalid("feature and output sizes must be positive".into()));
        }
        if n < 2 || (spec.kind == FieldKind::Dynamic && spec.t < 2) {
            return Err(Error::InvalidShape {
                shape: vec![n, spec.t],
                reason: "resolutions must be at least 2".into(),
            });
        }
        spec.transform.check_shape(n, n)?;
        if spec.kind == FieldKind::Dynamic {
            spec.transform.check_shape(n, spec.t)?;
        }
        let mut stacks = Vec::with_capacity(3);
        for (s, pair) in PAIRS.into_iter().enumerate() {
            let r = spec.ranks[s];
            let spatial = (0..r)
                .map(|_| PlaneParam::zeros(&spec.transform, n, n))
                .collect::<Result<Vec<_>>>()?;
            let partner = match spec.kind {
                FieldKind::Dynamic => Partner::Planes(
                    (0..r)
                        .map(|_| PlaneParam::zeros(&spec.transform, n, spec.t))
                        .collect::<Result<Vec<_>>>()?,
                ),
                FieldKind::Static => Partner::Vectors(vec![vec![0.0; n]; r]),
            };
            stacks.push(PlanePairStack {
                pair,
                spatial,
                partner,
                basis: vec![vec![0.0; spec.feature_dim]; r],
            });
        }
        let mixer = if spec.trainable_mixer {
            Grid2::zeros(3 * spec.feature_dim, spec.out_dim)
        } else {
            Grid2::filled(3 * spec.feature_dim, spec.out_dim, 1.0)
        };
        Ok(Self {
            kind: spec.kind,
            n,
            t: if spec.kind == FieldKind::Dynamic { spec.t } else { 1 },
            feature_dim: spec.feature_dim,
            out_dim: spec.out_dim,
            transform: spec.transform,
            stacks,
            mixer,
            trainable_mixer: spec.trainable_mixer,
        })
    }

    /// Random initialization: approximation grids `N(0, 0.1 * gain)`,
    /// oriented grids `N(0, 0.01)`, axis vectors `N(0, 0.1)`, basis
    /// vectors `N(0, 1)`, mixer `N(0, 1/sqrt(3F))`. `gain` is the DC gain of
    /// the transform's approximation band, so every transform starts from
    /// planes with the same statistics.
    pub fn random(spec: &FieldSpec, rng: &mut impl Rng) -> Result<Self> {
        let mut f = Self::zeros(spec)?;
        let gain = approx_gain(&spec.transform);
        let approx = Normal::new(0.0, 0.1 * gain).expect("valid std");
        let detail = Normal::new(0.0, 0.01).expect("valid std");
        let unit = Normal::new(0.0, 1.0).expect("valid std");
        let vec_init = Normal::new(0.0, 0.1).expect("valid std");
        for stack in &mut f.stacks {
            let r = stack.spatial.len();
            for k in 0..r {
                init_plane(&mut stack.spatial[k], &spec.transform, &approx, &detail, rng);
                match &mut stack.partner {
                    Partner::Planes(p) => init_plane(&mut p[k], &spec.transform, &approx, &detail, rng),
                    Partner::Vectors(v) => v[k].iter_mut().for_each(|x| *x = vec_init.sample(rng)),
                }
                stack.basis[k].iter_mut().for_each(|x| *x = unit.sample(rng));
            }
        }
        if f.trainable_mixer {
            let m = Normal::new(0.0, 1.0 / ((3 * f.feature_dim) as f64).sqrt()).expect("valid std");
            f.mixer.as_mut_slice().iter_mut().for_each(|x| *x = m.sample(rng));
        }
        Ok(f)
    }

    pub fn spec(&self) -> FieldSpec {
        FieldSpec {
            kind: self.kind,
            n: self.n,
            t: self.t,
            ranks: self.ranks(),
            feature_dim: self.feature_dim,
            out_dim: self.out_dim,
            transform: self.transform,
            trainable_mixer: self.trainable_mixer,
        }
    }

    pub fn ranks(&self) -> [usize; 3] {
        [self.stacks[0].rank(), self.stacks[1].rank(), self.stacks[2].rank()]
    }

    /// Plane slots in canonical order.
    pub fn slots(&self) -> Vec<SlotRef> {
        let mut v = Vec::new();
        for (s, stack) in self.stacks.iter().enumerate() {
            for r in 0..stack.rank() {
                v.push(SlotRef {
                    stack: s,
                    rank: r,
                    partner: false,
                });
                if matches!(stack.partner, Partner::Planes(_)) {
                    v.push(SlotRef {
                        stack: s,
                        rank: r,
                        partner: true,
                    });
                }
            }
        }
        v
    }

    pub fn plane(&self, s: SlotRef) -> &PlaneParam {
        let st = &self.stacks[s.stack];
        match (&st.partner, s.partner) {
            (Partner::Planes(p), true) => &p[s.rank],
            _ => &st.spatial[s.rank],
        }
    }

    pub fn plane_mut(&mut self, s: SlotRef) -> &mut PlaneParam {
        let st = &mut self.stacks[s.stack];
        match (&mut st.partner, s.partner) {
            (Partner::Planes(p), true) => &mut p[s.rank],
            _ => &mut st.spatial[s.rank],
        }
    }

    pub fn planes(&self) -> Vec<&PlaneParam> {
        self.slots().into_iter().map(|s| self.plane(s)).collect()
    }

    /// All coefficient grids in canonical order.
    pub fn coefficient_grids(&self) -> Vec<&Grid2> {
        self.planes().into_iter().flat_map(|p| p.coeffs.iter()).collect()
    }

    pub fn coefficient_grids_mut(&mut self) -> Vec<&mut Grid2> {
        let mut out = Vec::new();
        for stack in &mut self.stacks {
            let r = stack.spatial.len();
            let mut partner = match &mut stack.partner {
                Partner::Planes(p) => p.iter_mut().map(Some).collect::<Vec<_>>(),
                Partner::Vectors(_) => (0..r).map(|_| None).collect(),
            };
            for (k, sp) in stack.spatial.iter_mut().enumerate() {
                out.extend(sp.coeffs.iter_mut());
                if let Some(p) = partner[k].take() {
                    out.extend(p.coeffs.iter_mut());
                }
            }
        }
        out
    }

    /// Index of each coefficient grid's first-level approximation flag, in
    /// canonical order: true for approximation grids.
    pub fn approx_flags(&self) -> Vec<bool> {
        self.planes()
            .into_iter()
            .flat_map(|p| (0..p.coeffs.len()).map(|i| self.transform.is_approx_grid(i)))
            .collect()
    }

    pub fn coefficient_count(&self) -> usize {
        self.planes().iter().map(|p| p.coefficient_count()).sum()
    }

    /// Every stored scalar: coefficients, axis vectors, basis, and the
    /// mixer when trainable.
    pub fn param_count(&self) -> usize {
        let vectors: usize = self
            .stacks
            .iter()
            .map(|s| match &s.partner {
                Partner::Vectors(v) => v.iter().map(Vec::len).sum(),
                Partner::Planes(_) => 0,
            })
            .sum();
        let basis: usize = self.stacks.iter().map(|s| s.rank() * self.feature_dim).sum();
        let mixer = if self.trainable_mixer { self.mixer.len() } else { 0 };
        self.coefficient_count() + vectors + basis + mixer
    }

    /// Size of the dense 4D (or 3D) feature volume this field replaces.
    pub fn dense_param_count(&self) -> usize {
        self.n.pow(3) * self.t * self.feature_dim
    }

    /// Same geometry with all trainable values zero; the mixer stays as is
    /// when not trainable.
    pub fn zeros_like(&self) -> Self {
        let mut z = Self::zeros(&self.spec()).expect("spec of a valid field");
        if !self.trainable_mixer {
            z.mixer = self.mixer.clone();
        }
        z
    }

    /// Materializes every plane (optionally through binary masks).
    pub fn materialize(&self, masks: Option<&crate::sparsity::MaskSet>) -> Result<MaterializedPlanes> {
        let mut m = MaterializedPlanes {
            planes: Vec::new(),
            dirty: Vec::new(),
        };
        m.planes = self
            .slots()
            .into_iter()
            .map(|s| {
                let p = self.plane(s);
                Grid2::zeros(p.rows, p.cols)
            })
            .collect();
        m.dirty = vec![true; m.planes.len()];
        m.refresh(self, masks)?;
        Ok(m)
    }

    /// Feature at `p = (x, y, z, t)` in `[0, 1]`. Static fields ignore `t`.
    pub fn query(&self, planes: &MaterializedPlanes, p: &[f64; 4], out: &mut [f64]) {
        let f = self.feature_dim;
        let mut concat = vec![0.0; 3 * f];
        self.pair_features(planes, p, &mut concat);
        mix(&self.mixer, &concat, out);
    }

    pub fn query_dynamic(&self, planes: &MaterializedPlanes, p: [f64; 4]) -> Vec<f64> {
        let mut out = vec![0.0; self.out_dim];
        self.query(planes, &p, &mut out);
        out
    }

    pub fn query_static(&self, planes: &MaterializedPlanes, p: [f64; 3]) -> Vec<f64> {
        self.query_dynamic(planes, [p[0], p[1], p[2], 0.0])
    }

    /// Rank-summed per-pair features before mixing (length `3F`).
    pub fn pair_features(&self, planes: &MaterializedPlanes, p: &[f64; 4], concat: &mut [f64]) {
        let f = self.feature_dim;
        concat.iter_mut().for_each(|v| *v = 0.0);
        let mut slot = 0;
        for (s, stack) in self.stacks.iter().enumerate() {
            let taps = self.taps(stack.pair, p);
            let dst = &mut concat[s * f..(s + 1) * f];
            for r in 0..stack.rank() {
                let a = taps.spatial.sample(planes.planes[slot].as_slice());
                slot += 1;
                let b = match &stack.partner {
                    Partner::Planes(_) => {
                        let v = taps.partner.sample(planes.planes[slot].as_slice());
                        slot += 1;
                        v
                    }
                    Partner::Vectors(v) => taps.axis.sample(&v[r]),
                };
                let prod = a * b;
                for (d, &bv) in dst.iter_mut().zip(&stack.basis[r]) {
                    *d += prod * bv;
                }
            }
        }
    }

    /// Accumulates gradients of `<g_out, query(p)>` into `grads`: plane
    /// gradients per slot in `plane_grads`, and basis, axis-vector and
    /// mixer gradients in the matching fields of `grads`.
    pub fn query_backward(
        &self,
        planes: &MaterializedPlanes,
        p: &[f64; 4],
        g_out: &[f64],
        plane_grads: &mut [Grid2],
        grads: &mut DaRePlaneField,
    ) {
        let f = self.feature_dim;
        let mut concat = vec![0.0; 3 * f];
        self.pair_features(planes, p, &mut concat);
        if self.trainable_mixer {
            let gm = grads.mixer.as_mut_slice();
            for (i, &c) in concat.iter().enumerate() {
                for (j, &g) in g_out.iter().enumerate() {
                    gm[i * self.out_dim + j] += c * g;
                }
            }
        }
        let mut g_concat = vec![0.0; 3 * f];
        let m = self.mixer.as_slice();
        for (i, gc) in g_concat.iter_mut().enumerate() {
            *gc = (0..self.out_dim).map(|j| m[i * self.out_dim + j] * g_out[j]).sum();
        }
        let mut slot = 0;
        for (s, stack) in self.stacks.iter().enumerate() {
            let taps = self.taps(stack.pair, p);
            let gf = &g_concat[s * f..(s + 1) * f];
            let gstack = &mut grads.stacks[s];
            for r in 0..stack.rank() {
                let s_slot = slot;
                let a = taps.spatial.sample(planes.planes[slot].as_slice());
                slot += 1;
                let (b, p_slot) = match &stack.partner {
                    Partner::Planes(_) => {
                        let v = taps.partner.sample(planes.planes[slot].as_slice());
                        slot += 1;
                        (v, Some(slot - 1))
                    }
                    Partner::Vectors(v) => (taps.axis.sample(&v[r]), None),
                };
                let prod = a * b;
                let mut g_prod = 0.0;
                for ((gb, &bv), &g) in gstack.basis[r].iter_mut().zip(&stack.basis[r]).zip(gf) {
                    *gb += prod * g;
                    g_prod += bv * g;
                }
                if g_prod == 0.0 {
                    continue;
                }
                taps.spatial.scatter(plane_grads[s_slot].as_mut_slice(), g_prod * b);
                match p_slot {
                    Some(ps) => taps.partner.scatter(plane_grads[ps].as_mut_slice(), g_prod * a),
                    None => {
                        if let Partner::Vectors(gv) = &mut gstack.partner {
                            taps.axis.scatter(&mut gv[r], g_prod * a);
                        }
                    }
                }
            }
        }
    }

    fn taps(&self, pair: PairId, p: &[f64; 4]) -> PairTaps {
        let (a, b, c) = pair.axes();
        let s = (self.n - 1) as f64;
        let tt = (self.t.max(1) - 1) as f64;
        PairTaps {
            spatial: BilinearTap::new(self.n, self.n, p[a] * s, p[b] * s),
            partner: BilinearTap::new(self.n, self.t.max(1), p[c] * s, p[3] * tt),
            axis: LinearTap::new(self.n, p[c] * s),
        }
    }

    /// Zero plane-gradient buffers, one per slot.
    pub fn plane_grad_buffers(&self) -> Vec<Grid2> {
        self.planes()
            .into_iter()
            .map(|p| Grid2::zeros(p.rows, p.cols))
            .collect()
    }

    /// Maps plane gradients to gradients on the (masked) coefficients, one
    /// grid list per slot.
    pub fn coefficient_grads(&self, plane_grads: &[Grid2]) -> Result<Vec<Vec<Grid2>>> {
        plane_grads
            .iter()
            .map(|g| self.transform.synthesize_adjoint(g))
            .collect()
    }

    /// Coarse-to-fine step: synthesize each plane, resize bilinearly
    /// (corner-aligned), and re-analyze at the new resolution. Axis vectors
    /// are resized linearly.
    pub fn upsample(&self, new_n: usize, new_t: usize) -> Result<Self> {
        let new_t = if self.kind == FieldKind::Static { 1 } else { new_t };
        if new_n < self.n || new_t < self.t {
            return Err(Error::Invalid(format!(
                "upsampling cannot shrink ({}x{} -> {}x{})",
                self.n, self.t, new_n, new_t
            )));
        }
        let mut spec = self.spec();
        spec.n = new_n;
        spec.t = new_t.max(2);
        let mut out = Self::zeros(&spec)?;
        out.t = new_t;
        out.mixer = self.mixer.clone();
        for (s, stack) in self.stacks.iter().enumerate() {
            out.stacks[s].basis = stack.basis.clone();
            for r in 0..stack.rank() {
                let sp = stack.spatial[r].synthesize(&self.transform)?;
                out.stacks[s].spatial[r] = PlaneParam::from_plane(&self.transform, &sp.resize_bilinear(new_n, new_n))?;
                match (&stack.partner, &mut out.stacks[s].partner) {
                    (Partner::Planes(src), Partner::Planes(dst)) => {
                        let pl = src[r].synthesize(&self.transform)?;
                        dst[r] = PlaneParam::from_plane(&self.transform, &pl.resize_bilinear(new_n, new_t))?;
                    }
                    (Partner::Vectors(src), Partner::Vectors(dst)) => {
                        let g = Grid2::from_vec(1, self.n, src[r].clone())?;
                        dst[r] = g.resize_bilinear(1, new_n).into_vec();
                    }
                    _ => unreachable!("partner kinds match by construction"),
                }
            }
        }
        Ok(out)
    }

    /// Visits every trainable scalar array in canonical order.
    pub fn visit(&self, f: &mut dyn FnMut(ParamGroup, &[f64])) {
        for g in self.coefficient_grids() {
            f(ParamGroup::Coefficients, g.as_slice());
        }
        for stack in &self.stacks {
            if let Partner::Vectors(v) = &stack.partner {
                for x in v {
                    f(ParamGroup::Coefficients, x);
                }
            }
        }
        for stack in &self.stacks {
            for b in &stack.basis {
                f(ParamGroup::Basis, b);
            }
        }
        if self.trainable_mixer {
            f(ParamGroup::Mixer, self.mixer.as_slice());
        }
    }

    pub fn visit_mut(&mut self, f: &mut dyn FnMut(ParamGroup, &mut [f64])) {
        for g in self.coefficient_grids_mut() {
            f(ParamGroup::Coefficients, g.as_mut_slice());
        }
        for stack in &mut self.stacks {
            if let Partner::Vectors(v) = &mut stack.partner {
                for x in v {
                    f(ParamGroup::Coefficients, x);
                }
            }
        }
        for stack in &mut self.stacks {
            for b in &mut stack.basis {
                f(ParamGroup::Basis, b);
            }
        }
        if self.trainable_mixer {
            f(ParamGroup::Mixer, self.mixer.as_mut_slice());
        }
    }

    /// True for slots holding space-time planes.
    pub fn slot_is_temporal(&self) -> Vec<bool> {
        self.slots().into_iter().map(|s| s.partner).collect()
    }
}

/// Parameter classes, used for learning rates and diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamGroup {
    Coefficients,
    Masks,
    Basis,
    Mixer,
    Network,
}

struct PairTaps {
    spatial: BilinearTap,
    partner: BilinearTap,
    axis: LinearTap,
}

fn mix(m: &Grid2, x: &[f64], out: &mut [f64]) {
    let cols = m.cols();
    out.iter_mut().for_each(|v| *v = 0.0);
    let d = m.as_slice();
    for (i, &xi) in x.iter().enumerate() {
        if xi == 0.0 {
            continue;
        }
        let row = &d[i * cols..(i + 1) * cols];
        for (o, &w) in out.iter_mut().zip(row) {
            *o += xi * w;
        }
    }
}

fn approx_gain(t: &PlaneTransform) -> f64 {
    match *t {
        PlaneTransform::Dtcwt { .. } => 1.0,
        PlaneTransform::Dwt { levels, .. } => 2f64.powi(levels as i32),
    }
}

fn init_plane(p: &mut PlaneParam, t: &PlaneTransform, approx: &Normal<f64>, detail: &Normal<f64>, rng: &mut impl Rng) {
    for (i, g) in p.coeffs.iter_mut().enumerate() {
        let d = if t.is_approx_grid(i) { approx } else { detail };
        g.as_mut_slice().iter_mut().for_each(|x| *x = d.sample(rng));
    }
}

/// Planes synthesized from the current coefficients, one per slot, with
/// per-slot dirty flags.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterializedPlanes {
    pub planes: Vec<Grid2>,
    dirty: Vec<bool>,
}

impl MaterializedPlanes {
    pub fn invalidate(&mut self, slot: usize) {
        self.dirty[slot] = true;
    }

    pub fn invalidate_all(&mut self) {
        self.dirty.iter_mut().for_each(|d| *d = true);
    }

    pub fn is_dirty(&self, slot: usize) -> bool {
        self.dirty[slot]
    }

    /// Re-synthesizes dirty slots. With masks, each coefficient is kept
    /// only where its mask is positive.
    pub fn refresh(&mut self, field: &DaRePlaneField, masks: Option<&crate::sparsity::MaskSet>) -> Result<()> {
        let mut offset = 0;
        for (k, slot) in field.slots().into_iter().enumerate() {
            let p = field.plane(slot);
            let ng = p.coeffs.len();
            if self.dirty[k] {
                self.planes[k] = match masks {
                    Some(m) => {
                        let masked: Vec<Grid2> = p
                            .coeffs
                            .iter()
                            .zip(&m.grids[offset..offset + ng])
                            .map(|(w, mk)| crate::sparsity::apply_mask(w, mk))
                            .collect::<Result<_>>()?;
                        field.transform.synthesize(&masked, p.rows, p.cols)?
                    }
                    None => p.synthesize(&field.transform)?,
                };
                self.dirty[k] = false;
            }
            offset += ng;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavelet::DwtWavelet;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spec(kind: FieldKind, n: usize, t: usize, r: usize, f: usize) -> FieldSpec {
        FieldSpec {
            kind,
            n,
            t,
            ranks: [r; 3],
            feature_dim: f,
            out_dim: 3 * f,
            transform: PlaneTransform::default(),
            trainable_mixer: true,
        }
    }

    fn identity_mixer(field: &mut DaRePlaneField) {
        let k = field.mixer.rows();
        field.mixer = Grid2::from_fn(k, k, |i, j| f64::from(i == j));
    }

    /// Scalar-loop oracle: re-derives the plane values by explicit
    /// bilinear interpolation over freshly synthesized planes.
    fn loop_oracle(field: &DaRePlaneField, p: [f64; 4]) -> Vec<f64> {
        let bil = |g: &Grid2, u: f64, v: f64| {
            let (r, c) = g.shape();
            let u = u.clamp(0.0, (r - 1) as f64);
            let v = v.clamp(0.0, (c - 1) as f64);
            let (i0, j0) = ((u.floor() as usize).min(r - 2), (v.floor() as usize).min(c - 2));
            let (fu, fv) = (u - i0 as f64, v - j0 as f64);
            let mut s = 0.0;
            for (di, wu) in [(0, 1.0 - fu), (1, fu)] {
                for (dj, wv) in [(0, 1.0 - fv), (1, fv)] {
                    s += wu * wv * g.get(i0 + di, j0 + dj);
                }
            }
            s
        };
        let n1 = (field.n - 1) as f64;
        let t1 = (field.t - 1) as f64;
        let mut concat = Vec::new();
        for stack in &field.stacks {
            let (a, b, c) = stack.pair.axes();
            let mut acc = vec![0.0; field.feature_dim];
            for r in 0..stack.rank() {
                let sp = stack.spatial[r].synthesize(&field.transform).unwrap();
                let x = bil(&sp, p[a] * n1, p[b] * n1);
                let y = match &stack.partner {
                    Partner::Planes(pl) => {
                        let g = pl[r].synthesize(&field.transform).unwrap();
                        bil(&g, p[c] * n1, p[3] * t1)
                    }
                    Partner::Vectors(v) => {
                        let u = (p[c] * n1).clamp(0.0, n1);
                        let i0 = (u.floor() as usize).min(field.n - 2);
                        let fu = u - i0 as f64;
                        (1.0 - fu) * v[r][i0] + fu * v[r][i0 + 1]
                    }
                };
                for k in 0..field.feature_dim {
                    acc[k] += x * y * stack.basis[r][k];
                }
            }
            concat.extend(acc);
        }
        (0..field.out_dim)
            .map(|j| (0..concat.len()).map(|i| concat[i] * field.mixer.get(i, j)).sum())
            .collect()
    }

    #[test]
    fn zero_field_gives_zero_features() {
        let f = DaRePlaneField::zeros(&spec(FieldKind::Dynamic, 4, 2, 2, 3)).unwrap();
        let pl = f.materialize(None).unwrap();
        assert!(f.query_dynamic(&pl, [0.3, 0.1, 0.9, 0.5]).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_planes_give_product() {
        let (a, b) = (0.7, -1.3);
        let sp = spec(FieldKind::Dynamic, 8, 4, 1, 2);
        let mut f = DaRePlaneField::zeros(&sp).unwrap();
        identity_mixer(&mut f);
        for s in 0..3 {
            f.stacks[s].spatial[0] = PlaneParam::from_plane(&f.transform, &Grid2::filled(8, 8, a)).unwrap();
            if let Partner::Planes(p) = &mut f.stacks[s].partner {
                p[0] = PlaneParam::from_plane(&f.transform, &Grid2::filled(8, 4, b)).unwrap();
            }
            f.stacks[s].basis[0] = vec![1.0, 0.0];
        }
        let pl = f.materialize(None).unwrap();
        let out = f.query_dynamic(&pl, [0.2, 0.4, 0.6, 0.8]);
        for s in 0..3 {
            assert!((out[2 * s] - a * b).abs() < 1e-12);
            assert!(out[2 * s + 1].abs() < 1e-12);
        }
    }

    #[test]
    fn static_constant_product() {
        let sp = spec(FieldKind::Static, 8, 1, 1, 1);
        let mut f = DaRePlaneField::zeros(&sp).unwrap();
        identity_mixer(&mut f);
        for s in 0..3 {
            f.stacks[s].spatial[0] = PlaneParam::from_plane(&f.transform, &Grid2::filled(8, 8, 2.0)).unwrap();
            f.stacks[s].partner = Partner::Vectors(vec![vec![0.25; 8]]);
            f.stacks[s].basis[0] = vec![1.0];
        }
        let pl = f.materialize(None).unwrap();
        let out = f.query_static(&pl, [0.1, 0.5, 0.9]);
        assert!(out.iter().all(|&v| (v - 0.5).abs() < 1e-12));
    }

    #[test]
    fn random_field_matches_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for kind in [FieldKind::Dynamic, FieldKind::Static] {
            let mut sp = spec(kind, 4, 2, 2, 3);
            sp.out_dim = 5;
            let f = DaRePlaneField::random(&sp, &mut rng).unwrap();
            let pl = f.materialize(None).unwrap();
            for _ in 0..20 {
                let p = [rng.random(), rng.random(), rng.random(), rng.random()];
                let got = f.query_dynamic(&pl, p);
                let want = loop_oracle(&f, p);
                for (g, w) in got.iter().zip(&want) {
                    assert!((g - w).abs() < 1e-12, "{kind:?}: {g} vs {w}");
                }
            }
        }
    }

    #[test]
    fn clamps_outside_unit_cube() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = DaRePlaneField::random(&spec(FieldKind::Dynamic, 8, 4, 2, 2), &mut rng).unwrap();
        let pl = f.materialize(None).unwrap();
        assert_eq!(
            f.query_dynamic(&pl, [-0.5, 1.5, 0.0, 2.0]),
            f.query_dynamic(&pl, [0.0, 1.0, 0.0, 1.0])
        );
    }

    #[test]
    fn materialize_reproduces_known_planes() {
        let sp = spec(FieldKind::Dynamic, 8, 4, 1, 1);
        let mut f = DaRePlaneField::zeros(&sp).unwrap();
        let m = Grid2::from_fn(8, 8, |i, j| (i * 8 + j) as f64 / 64.0);
        f.stacks[1].spatial[0] = PlaneParam::from_plane(&f.transform, &m).unwrap();
        let pl = f.materialize(None).unwrap();
        let slot = f.slots().iter().position(|s| s.stack == 1 && !s.partner).unwrap();
        assert!(pl.planes[slot].rel_l2(&m) < 1e-9);
    }

    #[test]
    fn refresh_only_touches_dirty_slots() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut f = DaRePlaneField::random(&spec(FieldKind::Dynamic, 8, 4, 1, 1), &mut rng).unwrap();
        let mut pl = f.materialize(None).unwrap();
        let before = pl.clone();
        f.stacks[0].spatial[0].coeffs[0].fill(0.0);
        pl.refresh(&f, None).unwrap();
        assert_eq!(pl, before);
        pl.invalidate(0);
        pl.refresh(&f, None).unwrap();
        assert_eq!(pl.planes[0], f.stacks[0].spatial[0].synthesize(&f.transform).unwrap());
        assert_eq!(pl, f.materialize(None).unwrap());
    }

    #[test]
    fn parameter_budget_is_small() {
        let sp = FieldSpec {
            kind: FieldKind::Dynamic,
            n: 128,
            t: 32,
            ranks: [48; 3],
            feature_dim: 27,
            out_dim: 27,
            transform: PlaneTransform::default(),
            trainable_mixer: true,
        };
        // Count arithmetically rather than allocating the field.
        let per_rank = 4 * (128 * 128 + 128 * 32) + 27;
        let total = 3 * 48 * per_rank + 81 * 27;
        let dense = 128usize.pow(3) * 32 * 27;
        assert!((total as f64) < 0.01 * dense as f64);
        let small = DaRePlaneField::zeros(&FieldSpec {
            n: 16,
            t: 4,
            ranks: [2; 3],
            ..sp
        })
        .unwrap();
        assert_eq!(small.param_count(), 3 * 2 * (4 * (256 + 64) + 27) + 81 * 27);
    }

    #[test]
    fn upsample_matches_resized_planes() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let f = DaRePlaneField::random(&spec(FieldKind::Dynamic, 16, 4, 1, 2), &mut rng).unwrap();
        let up = f.upsample(32, 8).unwrap();
        let (a, b) = (f.materialize(None).unwrap(), up.materialize(None).unwrap());
        for (pa, pb) in a.planes.iter().zip(&b.planes) {
            assert!(pb.rel_l2(&pa.resize_bilinear(pb.rows(), pb.cols())) < 1e-9);
        }
        // New grid points carry the old field's values.
        for &(i, j, k, l) in &[(0, 0, 0, 0), (5, 17, 31, 3), (31, 8, 12, 7)] {
            let p = [i as f64 / 31.0, j as f64 / 31.0, k as f64 / 31.0, l as f64 / 7.0];
            let (x, y) = (f.query_dynamic(&a, p), up.query_dynamic(&b, p));
            for (u, v) in x.iter().zip(&y) {
                assert!((u - v).abs() < 1e-9);
            }
        }
        let same = f.upsample(16, 4).unwrap();
        let c = same.materialize(None).unwrap();
        for (pa, pc) in a.planes.iter().zip(&c.planes) {
            assert!(pc.rel_l2(pa) < 1e-9);
        }
        assert!(f.upsample(8, 4).is_err());
        assert!(f.upsample(21, 4).is_err());
    }

    #[test]
    fn constant_field_upsamples_to_constant() {
        let sp = spec(FieldKind::Dynamic, 8, 4, 1, 1);
        let mut f = DaRePlaneField::zeros(&sp).unwrap();
        for s in 0..3 {
            f.stacks[s].spatial[0] = PlaneParam::from_plane(&f.transform, &Grid2::filled(8, 8, 0.5)).unwrap();
            if let Partner::Planes(p) = &mut f.stacks[s].partner {
                p[0] = PlaneParam::from_plane(&f.transform, &Grid2::filled(8, 4, 2.0)).unwrap();
            }
            f.stacks[s].basis[0] = vec![1.0];
        }
        f.mixer = Grid2::filled(3, 1, 1.0);
        let up = f.upsample(16, 8).unwrap();
        let pl = up.materialize(None).unwrap();
        for p in [[0.0, 0.0, 0.0, 0.0], [0.3, 0.7, 0.1, 0.9]] {
            assert!((up.query_dynamic(&pl, p)[0] - 3.0).abs() < 1e-9);
        }
    }

    #[test]
    fn dwt_planes_are_supported() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut sp = spec(FieldKind::Dynamic, 8, 4, 2, 2);
        sp.transform = PlaneTransform::Dwt {
            wavelet: DwtWavelet::Haar,
            levels: 1,
        };
        let f = DaRePlaneField::random(&sp, &mut rng).unwrap();
        assert_eq!(f.coefficient_count(), 3 * 2 * (64 + 32));
        let pl = f.materialize(None).unwrap();
        let p = [0.1, 0.2, 0.3, 0.4];
        let want = loop_oracle(&f, p);
        for (g, w) in f.query_dynamic(&pl, p).iter().zip(&want) {
            assert!((g - w).abs() < 1e-12);
        }
    }
}
