//! Binary container for masked coefficients.
//!
//! Layout (little-endian):
//!
//! ```text
//! "DARE" u8:version u32:total_length u8:flags u8:field_count u32:extra_len
//! per field: u8:kind u32:n u32:t u32x3:ranks u32:feature_dim u32:out_dim
//!            u8:family u8:filter u8:levels u8:trainable_mixer u8:order
//! u8x256: Huffman code lengths over RLE run bytes
//! per field: f32 dense parameters (axis vectors, basis, trainable mixer)
//! per field, per coefficient grid in canonical order:
//!            u32:stream_bytes, Huffman-coded RLE of the binary mask,
//!            retained values: f32 each, or f32:min f32:max u8 each
//! f32 x extra_len
//! u32: CRC32 of everything above
//! ```
//!
//! Flag bit 0 selects 8-bit affine quantization of retained values.

use super::huffman::{code_lengths, frequencies, BitReader, BitWriter, Codebook, MAX_CODE_LEN};
use super::{rle, MaskSet};
use crate::error::{ArchiveError, Error, Result};
use crate::rep::{DaRePlaneField, FieldKind, FieldSpec, Partner};
use crate::wavelet::{DwtWavelet, FilterBankName, PlaneTransform};

pub const MAGIC: [u8; 4] = *b"DARE";
pub const FORMAT_VERSION: u8 = 1;
const FLAG_QUANT8: u8 = 1;
/// Rank-major within (XY-ZT, XZ-YT, YZ-XT); the only order defined so far.
const ORDER_CANONICAL: u8 = 0;
const MAX_DIM: u32 = 1 << 16;

/// A decoded archive: fields with pruned coefficients zeroed and masks
/// binarized to `+1`/`-1`, plus the extra dense parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodedModel {
    pub fields: Vec<(DaRePlaneField, MaskSet)>,
    pub extra: Vec<f64>,
    pub quantized: bool,
}

/// Header summary and section sizes of an archive.
#[derive(Debug, Clone, PartialEq)]
pub struct ArchiveInfo {
    pub version: u8,
    pub total_bytes: usize,
    pub quantized: bool,
    pub fields: Vec<FieldSpec>,
    pub mask_entries: usize,
    pub retained: usize,
    /// Huffman-coded mask streams, excluding the shared code table.
    pub mask_stream_bytes: usize,
    pub value_bytes: usize,
    pub dense_bytes: usize,
    pub crc: u32,
}

impl ArchiveInfo {
    pub fn sparsity(&self) -> f64 {
        if self.mask_entries == 0 {
            0.0
        } else {
            1.0 - self.retained as f64 / self.mask_entries as f64
        }
    }
}

/// Encodes one field and its masks.
pub fn encode_archive(field: &DaRePlaneField, masks: &MaskSet, quantize_8bit: bool) -> Result<Vec<u8>> {
    encode_model(&[(field, masks)], &[], quantize_8bit)
}

/// Decodes an archive holding exactly one field.
pub fn decode_archive(bytes: &[u8]) -> Result<(DaRePlaneField, MaskSet), ArchiveError> {
    let mut m = decode_model(bytes)?;
    if m.fields.len() != 1 {
        return Err(ArchiveError::Corrupt(format!(
            "expected one field, found {}",
            m.fields.len()
        )));
    }
    Ok(m.fields.pop().expect("one field"))
}

/// Encodes several fields plus `extra` dense parameters (stored as f32).
pub fn encode_model(fields: &[(&DaRePlaneField, &MaskSet)], extra: &[f64], quantize_8bit: bool) -> Result<Vec<u8>> {
    if fields.len() > u8::MAX as usize {
        return Err(Error::Invalid("too many fields for one archive".into()));
    }
    for (f, m) in fields {
        m.check(f)?;
    }
    let streams: Vec<Vec<Vec<u8>>> = fields
        .iter()
        .map(|(_, m)| {
            m.grids
                .iter()
                .map(|g| rle::encode(g.as_slice().iter().map(|&v| v > 0.0)))
                .collect()
        })
        .collect();
    let freqs = frequencies(streams.iter().flatten().map(Vec::as_slice));
    let book = Codebook::from_lengths(&code_lengths(&freqs, MAX_CODE_LEN))?;

    let mut out = Vec::new();
    out.extend_from_slice(&MAGIC);
    out.push(FORMAT_VERSION);
    out.extend_from_slice(&[0; 4]);
    out.push(if quantize_8bit { FLAG_QUANT8 } else { 0 });
    out.push(fields.len() as u8);
    put_u32(&mut out, extra.len())?;
    for (f, _) in fields {
        write_geometry(&mut out, f)?;
    }
    out.extend_from_slice(book.lengths());
    for (f, _) in fields {
        for v in dense_params(f) {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    for ((f, m), grid_streams) in fields.iter().zip(&streams) {
        for ((w, mask), syms) in f.coefficient_grids().into_iter().zip(&m.grids).zip(grid_streams) {
            let mut bw = BitWriter::default();
            book.encode(syms, &mut bw);
            let bytes = bw.into_bytes();
            put_u32(&mut out, bytes.len())?;
            out.extend_from_slice(&bytes);
            let kept: Vec<f64> = w
                .as_slice()
                .iter()
                .zip(mask.as_slice())
                .filter(|(_, &m)| m > 0.0)
                .map(|(&w, _)| w)
                .collect();
            write_values(&mut out, &kept, quantize_8bit);
        }
    }
    for &v in extra {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    let total = out.len() + 4;
    let total32 = u32::try_from(total).map_err(|_| Error::Invalid("archive exceeds 4 GiB".into()))?;
    out[5..9].copy_from_slice(&total32.to_le_bytes());
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

pub fn decode_model(bytes: &[u8]) -> Result<DecodedModel, ArchiveError> {
    let (model, _) = parse(bytes)?;
    Ok(model)
}

/// Validates the archive and summarizes it.
pub fn inspect_archive(bytes: &[u8]) -> Result<ArchiveInfo, ArchiveError> {
    parse(bytes).map(|(_, info)| info)
}

fn parse(bytes: &[u8]) -> Result<(DecodedModel, ArchiveInfo), ArchiveError> {
    let crc = check_envelope(bytes)?;
    let body = &bytes[..bytes.len() - 4];
    let mut r = Reader { b: body, pos: 9 };
    let flags = r.u8()?;
    if flags & !FLAG_QUANT8 != 0 {
        return Err(ArchiveError::Corrupt(format!("unknown flags {flags:#04x}")));
    }
    let quantized = flags & FLAG_QUANT8 != 0;
    let nfields = r.u8()? as usize;
    let extra_len = r.u32()? as usize;
    let specs = (0..nfields)
        .map(|_| read_geometry(&mut r))
        .collect::<Result<Vec<_>, _>>()?;
    let mut lengths = [0u8; 256];
    lengths.copy_from_slice(r.take(256)?);
    let book = Codebook::from_lengths(&lengths)?;

    let mut fields: Vec<DaRePlaneField> = specs
        .iter()
        .map(|s| DaRePlaneField::zeros(s).map_err(|e| ArchiveError::Corrupt(e.to_string())))
        .collect::<Result<_, _>>()?;
    let dense_start = r.pos;
    for f in &mut fields {
        let n = dense_params(f).len();
        let vals = (0..n).map(|_| r.f32().map(f64::from)).collect::<Result<Vec<_>, _>>()?;
        set_dense_params(f, &vals);
    }
    let dense_bytes = r.pos - dense_start;

    let (mut mask_entries, mut retained, mut mask_stream_bytes, mut value_bytes) = (0, 0, 0, 0);
    let mut out_fields = Vec::with_capacity(fields.len());
    for mut f in fields {
        let mut masks = MaskSet::for_field(&f, -1.0);
        for (w, mask) in f.coefficient_grids_mut().into_iter().zip(&mut masks.grids) {
            let len = r.u32()? as usize;
            let stream = r.take(len)?;
            mask_stream_bytes += len;
            let bits = decode_mask(&book, stream, mask.len())?;
            let kept = bits.iter().filter(|&&b| b).count();
            let before = r.pos;
            let vals = read_values(&mut r, kept, quantized)?;
            value_bytes += r.pos - before;
            let mut vals = vals.into_iter();
            for ((b, m), w) in bits.iter().zip(mask.as_mut_slice()).zip(w.as_mut_slice()) {
                if *b {
                    *m = 1.0;
                    *w = vals.next().expect("counted");
                }
            }
            mask_entries += bits.len();
            retained += kept;
        }
        out_fields.push((f, masks));
    }
    let extra = (0..extra_len)
        .map(|_| r.f32().map(f64::from))
        .collect::<Result<Vec<_>, _>>()?;
    if r.pos != body.len() {
        return Err(ArchiveError::Corrupt(format!("{} trailing bytes", body.len() - r.pos)));
    }
    let info = ArchiveInfo {
        version: FORMAT_VERSION,
        total_bytes: bytes.len(),
        quantized,
        fields: specs,
        mask_entries,
        retained,
        mask_stream_bytes,
        value_bytes,
        dense_bytes,
        crc,
    };
    Ok((
        DecodedModel {
            fields: out_fields,
            extra,
            quantized,
        },
        info,
    ))
}

/// Magic, version, declared length and CRC; returns the stored CRC.
fn check_envelope(bytes: &[u8]) -> Result<u32, ArchiveError> {
    if bytes.len() < 4 {
        return Err(ArchiveError::Truncated {
            expected: 13,
            actual: bytes.len(),
        });
    }
    let magic: [u8; 4] = bytes[..4].try_into().expect("four bytes");
    if magic != MAGIC {
        return Err(ArchiveError::BadMagic(magic));
    }
    if bytes.len() < 13 {
        return Err(ArchiveError::Truncated {
            expected: 13,
            actual: bytes.len(),
        });
    }
    if bytes[4] != FORMAT_VERSION {
        return Err(ArchiveError::Version {
            found: bytes[4],
            expected: FORMAT_VERSION,
        });
    }
    let total = u32::from_le_bytes(bytes[5..9].try_into().expect("four bytes")) as usize;
    if bytes.len() < total || total < 13 {
        return Err(ArchiveError::Truncated {
            expected: total,
            actual: bytes.len(),
        });
    }
    if bytes.len() > total {
        return Err(ArchiveError::Corrupt(format!(
            "{} bytes after declared end",
            bytes.len() - total
        )));
    }
    let stored = u32::from_le_bytes(bytes[total - 4..].try_into().expect("four bytes"));
    let computed = crc32fast::hash(&bytes[..total - 4]);
    if stored != computed {
        return Err(ArchiveError::Crc { stored, computed });
    }
    Ok(stored)
}

fn decode_mask(book: &Codebook, stream: &[u8], len: usize) -> Result<Vec<bool>, ArchiveError> {
    let mut br = BitReader::new(stream);
    let mut syms = Vec::new();
    let mut covered = 0usize;
    // The encoder never ends on a zero-length run unless the grid is empty,
    // so symbols are read until they cover the grid.
    loop {
        let s = book.decode_symbol(&mut br)?;
        syms.push(s);
        covered += s as usize;
        if covered >= len {
            break;
        }
    }
    rle::decode(&syms, len)
}

fn put_u32(out: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Invalid(format!("{v} does not fit in u32")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

fn write_geometry(out: &mut Vec<u8>, f: &DaRePlaneField) -> Result<()> {
    out.push(f.kind.code());
    put_u32(out, f.n)?;
    put_u32(out, f.t)?;
    for r in f.ranks() {
        put_u32(out, r)?;
    }
    put_u32(out, f.feature_dim)?;
    put_u32(out, f.out_dim)?;
    let (family, code, levels) = match f.transform {
        PlaneTransform::Dtcwt { bank, levels } => (0u8, bank.code(), levels),
        PlaneTransform::Dwt { wavelet, levels } => (1u8, wavelet.code(), levels),
    };
    out.extend_from_slice(&[family, code, levels as u8, u8::from(f.trainable_mixer), ORDER_CANONICAL]);
    Ok(())
}

fn read_geometry(r: &mut Reader) -> Result<FieldSpec, ArchiveError> {
    let kind = FieldKind::from_code(r.u8()?).ok_or_else(|| ArchiveError::Corrupt("unknown field kind".into()))?;
    let mut dims = [0u32; 7];
    for d in &mut dims {
        *d = r.u32()?;
        if *d > MAX_DIM {
            return Err(ArchiveError::Corrupt(format!("dimension {d} out of range")));
        }
    }
    let [n, t, r0, r1, r2, fdim, odim] = dims.map(|d| d as usize);
    let family = r.u8()?;
    let code = r.u8()?;
    let levels = r.u8()? as usize;
    let transform = match family {
        0 => PlaneTransform::Dtcwt {
            bank: FilterBankName::from_code(code)
                .ok_or_else(|| ArchiveError::Corrupt(format!("unknown filter bank {code}")))?,
            levels,
        },
        1 => PlaneTransform::Dwt {
            wavelet: DwtWavelet::from_code(code)
                .ok_or_else(|| ArchiveError::Corrupt(format!("unknown wavelet {code}")))?,
            levels,
        },
        _ => return Err(ArchiveError::Corrupt(format!("unknown transform family {family}"))),
    };
    let trainable_mixer = r.u8()? != 0;
    let order = r.u8()?;
    if order != ORDER_CANONICAL {
        return Err(ArchiveError::Corrupt(format!("unknown concatenation order {order}")));
    }
    Ok(FieldSpec {
        kind,
        n,
        t,
        ranks: [r0, r1, r2],
        feature_dim: fdim,
        out_dim: odim,
        transform,
        trainable_mixer,
    })
}

fn dense_params(f: &DaRePlaneField) -> Vec<f64> {
    let mut v = Vec::new();
    for s in &f.stacks {
        if let Partner::Vectors(vs) = &s.partner {
            vs.iter().for_each(|x| v.extend_from_slice(x));
        }
    }
    for s in &f.stacks {
        s.basis.iter().for_each(|b| v.extend_from_slice(b));
    }
    if f.trainable_mixer {
        v.extend_from_slice(f.mixer.as_slice());
    }
    v
}

fn set_dense_params(f: &mut DaRePlaneField, vals: &[f64]) {
    let mut it = vals.iter().copied();
    let mut fill = |dst: &mut [f64]| dst.iter_mut().for_each(|d| *d = it.next().expect("sized"));
    for s in &mut f.stacks {
        if let Partner::Vectors(vs) = &mut s.partner {
            vs.iter_mut().for_each(|x| fill(x));
        }
    }
    for s in &mut f.stacks {
        s.basis.iter_mut().for_each(|b| fill(b));
    }
    if f.trainable_mixer {
        fill(f.mixer.as_mut_slice());
    }
}

/// Affine 8-bit code of `v` on `[lo, hi]`.
pub(crate) fn quantize(v: f64, lo: f64, hi: f64) -> u8 {
    if hi > lo {
        ((v - lo) / (hi - lo) * 255.0).round().clamp(0.0, 255.0) as u8
    } else {
        0
    }
}

pub(crate) fn dequantize(q: u8, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * q as f64 / 255.0
}

fn write_values(out: &mut Vec<u8>, kept: &[f64], quantize_8bit: bool) {
    if !quantize_8bit {
        for &v in kept {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
        return;
    }
    if kept.is_empty() {
        return;
    }
    let lo = kept.iter().copied().fold(f64::INFINITY, f64::min) as f32;
    let hi = kept.iter().copied().fold(f64::NEG_INFINITY, f64::max) as f32;
    out.extend_from_slice(&lo.to_le_bytes());
    out.extend_from_slice(&hi.to_le_bytes());
    out.extend(kept.iter().map(|&v| quantize(v, lo as f64, hi as f64)));
}

fn read_values(r: &mut Reader, n: usize, quantized: bool) -> Result<Vec<f64>, ArchiveError> {
    if !quantized {
        return (0..n).map(|_| r.f32().map(f64::from)).collect();
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let lo = r.f32()? as f64;
    let hi = r.f32()? as f64;
    Ok(r.take(n)?.iter().map(|&q| dequantize(q, lo, hi)).collect())
}

struct Reader<'a> {
    b: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ArchiveError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.b.len())
            .ok_or_else(|| ArchiveError::Corrupt(format!("section overruns payload at byte {}", self.pos)))?;
        let s = &self.b[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, ArchiveError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, ArchiveError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("four bytes")))
    }

    fn f32(&mut self) -> Result<f32, ArchiveError> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().expect("four bytes")))
    }
}
