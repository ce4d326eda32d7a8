//! Length-limited canonical Huffman codes over byte symbols.
//!
//! Code lengths come from package-merge, so no code exceeds
//! [`MAX_CODE_LEN`]. Codes are assigned canonically from the lengths alone
//! (shorter first, then by symbol), which is all a decoder needs.

use crate::error::ArchiveError;

pub const MAX_CODE_LEN: u8 = 24;

/// Optimal code lengths for `freqs` subject to `limit`. Unused symbols get
/// length 0; a lone used symbol gets length 1.
pub fn code_lengths(freqs: &[u64; 256], limit: u8) -> [u8; 256] {
    let mut lens = [0u8; 256];
    let mut leaves: Vec<(u64, usize)> = freqs
        .iter()
        .enumerate()
        .filter(|(_, &f)| f > 0)
        .map(|(s, &f)| (f, s))
        .collect();
    match leaves.len() {
        0 => return lens,
        1 => {
            lens[leaves[0].1] = 1;
            return lens;
        }
        _ => {}
    }
    leaves.sort();
    let n = leaves.len();
    assert!(n <= 1usize << limit, "code length limit too small");

    // Items carry the leaves they contain; a leaf's code length is the
    // number of selected items it appears in.
    let leaf_items: Vec<(u64, Vec<usize>)> = leaves.iter().map(|&(f, s)| (f, vec![s])).collect();
    let mut list = leaf_items.clone();
    for _ in 1..limit {
        let packages: Vec<(u64, Vec<usize>)> = list
            .chunks_exact(2)
            .map(|p| {
                let mut syms = p[0].1.clone();
                syms.extend_from_slice(&p[1].1);
                (p[0].0 + p[1].0, syms)
            })
            .collect();
        list = merge(&leaf_items, packages);
    }
    for (_, syms) in list.iter().take(2 * n - 2) {
        for &s in syms {
            lens[s] += 1;
        }
    }
    lens
}

fn merge(a: &[(u64, Vec<usize>)], b: Vec<(u64, Vec<usize>)>) -> Vec<(u64, Vec<usize>)> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let mut ai = a.iter().peekable();
    let mut bi = b.into_iter().peekable();
    loop {
        let take_a = match (ai.peek(), bi.peek()) {
            (Some(x), Some(y)) => x.0 <= y.0,
            (Some(_), None) => true,
            (None, Some(_)) => false,
            (None, None) => break,
        };
        if take_a {
            out.push(ai.next().cloned().expect("peeked"));
        } else {
            out.push(bi.next().expect("peeked"));
        }
    }
    out
}

/// Canonical code table derived from code lengths.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Codebook {
    lengths: [u8; 256],
    codes: [u32; 256],
    /// Symbols sorted by (length, symbol).
    sorted: Vec<u8>,
    /// Per length: first canonical code, first index into `sorted`, count.
    first_code: [u32; MAX_CODE_LEN as usize + 1],
    first_index: [usize; MAX_CODE_LEN as usize + 1],
    count: [usize; MAX_CODE_LEN as usize + 1],
}

impl Codebook {
    /// Rejects lengths above the limit and over-subscribed tables (Kraft
    /// sum above one).
    pub fn from_lengths(lengths: &[u8; 256]) -> Result<Self, ArchiveError> {
        let max = MAX_CODE_LEN as usize;
        let mut count = [0usize; MAX_CODE_LEN as usize + 1];
        for &l in lengths {
            if l as usize > max {
                return Err(ArchiveError::HuffmanTable(format!("code length {l} exceeds {max}")));
            }
            if l > 0 {
                count[l as usize] += 1;
            }
        }
        let kraft: u64 = (1..=max).map(|l| (count[l] as u64) << (max - l)).sum();
        if kraft > 1u64 << max {
            return Err(ArchiveError::HuffmanTable("over-subscribed code lengths".into()));
        }
        let mut sorted: Vec<u8> = (0..=255u8).filter(|&s| lengths[s as usize] > 0).collect();
        sorted.sort_by_key(|&s| (lengths[s as usize], s));

        let mut first_code = [0u32; MAX_CODE_LEN as usize + 1];
        let mut first_index = [0usize; MAX_CODE_LEN as usize + 1];
        let (mut code, mut index) = (0u32, 0usize);
        for l in 1..=max {
            first_code[l] = code;
            first_index[l] = index;
            code = (code + count[l] as u32) << 1;
            index += count[l];
        }
        let mut codes = [0u32; 256];
        let mut next = first_code;
        for &s in &sorted {
            let l = lengths[s as usize] as usize;
            codes[s as usize] = next[l];
            next[l] += 1;
        }
        Ok(Self {
            lengths: *lengths,
            codes,
            sorted,
            first_code,
            first_index,
            count,
        })
    }

    pub fn lengths(&self) -> &[u8; 256] {
        &self.lengths
    }

    pub fn code(&self, sym: u8) -> (u32, u8) {
        (self.codes[sym as usize], self.lengths[sym as usize])
    }

    pub fn encode(&self, symbols: &[u8], w: &mut BitWriter) {
        for &s in symbols {
            let (c, l) = self.code(s);
            debug_assert!(l > 0, "symbol {s} has no code");
            w.write(c, l);
        }
    }

    pub fn decode_symbol(&self, r: &mut BitReader) -> Result<u8, ArchiveError> {
        let mut code = 0u32;
        for l in 1..=MAX_CODE_LEN as usize {
            code = (code << 1) | r.read_bit()? as u32;
            let off = code.wrapping_sub(self.first_code[l]) as usize;
            if code >= self.first_code[l] && off < self.count[l] {
                return Ok(self.sorted[self.first_index[l] + off]);
            }
        }
        Err(ArchiveError::HuffmanTable("bit pattern matches no code".into()))
    }
}

/// MSB-first bit packer.
#[derive(Debug, Default)]
pub struct BitWriter {
    bytes: Vec<u8>,
    nbits: usize,
}

impl BitWriter {
    pub fn write(&mut self, code: u32, len: u8) {
        for k in (0..len).rev() {
            if self.nbits % 8 == 0 {
                self.bytes.push(0);
            }
            let bit = ((code >> k) & 1) as u8;
            *self.bytes.last_mut().expect("pushed") |= bit << (7 - self.nbits % 8);
            self.nbits += 1;
        }
    }

    pub fn bit_len(&self) -> usize {
        self.nbits
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.bytes
    }
}

pub struct BitReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> BitReader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    pub fn read_bit(&mut self) -> Result<u8, ArchiveError> {
        let byte = self
            .bytes
            .get(self.pos / 8)
            .ok_or_else(|| ArchiveError::Corrupt("bit stream ended early".into()))?;
        let bit = (byte >> (7 - self.pos % 8)) & 1;
        self.pos += 1;
        Ok(bit)
    }
}

pub fn frequencies<'a>(streams: impl IntoIterator<Item = &'a [u8]>) -> [u64; 256] {
    let mut f = [0u64; 256];
    for s in streams {
        for &b in s {
            f[b as usize] += 1;
        }
    }
    f
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Unlimited Huffman total cost via the classic two-smallest merge.
    fn huffman_cost(freqs: &[u64]) -> u64 {
        let mut w: Vec<u64> = freqs.iter().copied().filter(|&f| f > 0).collect();
        if w.len() == 1 {
            return w[0];
        }
        let mut cost = 0;
        while w.len() > 1 {
            w.sort_unstable_by(|a, b| b.cmp(a));
            let (a, b) = (w.pop().unwrap(), w.pop().unwrap());
            cost += a + b;
            w.push(a + b);
        }
        cost
    }

    #[test]
    fn lengths_of_known_distribution() {
        let mut f = [0u64; 256];
        f[0] = 8;
        f[1] = 4;
        f[2] = 2;
        f[3] = 1;
        f[4] = 1;
        let l = code_lengths(&f, MAX_CODE_LEN);
        assert_eq!(&l[..5], &[1, 2, 3, 4, 4]);
        let limited = code_lengths(&f, 3);
        assert!(limited.iter().all(|&x| x <= 3));
        let book = Codebook::from_lengths(&l).unwrap();
        assert_eq!(book.code(0), (0b0, 1));
        assert_eq!(book.code(1), (0b10, 2));
        assert_eq!(book.code(2), (0b110, 3));
        assert_eq!(book.code(3), (0b1110, 4));
        assert_eq!(book.code(4), (0b1111, 4));
    }

    #[test]
    fn single_symbol_and_empty() {
        let mut f = [0u64; 256];
        assert_eq!(code_lengths(&f, MAX_CODE_LEN), [0; 256]);
        f[7] = 100;
        let l = code_lengths(&f, MAX_CODE_LEN);
        assert_eq!(l[7], 1);
        assert_eq!(l.iter().map(|&x| x as u32).sum::<u32>(), 1);
    }

    #[test]
    fn rejects_bad_tables() {
        let mut l = [0u8; 256];
        l[0] = 1;
        l[1] = 1;
        l[2] = 1;
        assert!(matches!(Codebook::from_lengths(&l), Err(ArchiveError::HuffmanTable(_))));
        l = [0; 256];
        l[0] = 30;
        assert!(Codebook::from_lengths(&l).is_err());
    }

    #[test]
    fn incomplete_code_reports_unmatched_pattern() {
        let mut l = [0u8; 256];
        l[5] = 2;
        let book = Codebook::from_lengths(&l).unwrap();
        let bytes = [0xFFu8; 4];
        let mut r = BitReader::new(&bytes);
        assert!(book.decode_symbol(&mut r).is_err());
    }

    proptest! {
        #[test]
        fn optimal_when_unconstrained(freqs in proptest::collection::vec(0u64..1000, 2..40)) {
            prop_assume!(freqs.iter().filter(|&&f| f > 0).count() >= 2);
            let mut f = [0u64; 256];
            f[..freqs.len()].copy_from_slice(&freqs);
            let l = code_lengths(&f, MAX_CODE_LEN);
            let cost: u64 = (0..256).map(|s| f[s] * l[s] as u64).sum();
            prop_assert_eq!(cost, huffman_cost(&freqs));
        }

        #[test]
        fn round_trip(data in proptest::collection::vec(0u8..=255, 1..500), limit in 8u8..=24) {
            let f = frequencies([data.as_slice()]);
            let l = code_lengths(&f, limit);
            prop_assert!(l.iter().all(|&x| x <= limit));
            let book = Codebook::from_lengths(&l).unwrap();
            // Canonical reconstruction from lengths is deterministic.
            prop_assert_eq!(&book, &Codebook::from_lengths(book.lengths()).unwrap());
            let mut w = BitWriter::default();
            book.encode(&data, &mut w);
            let bytes = w.into_bytes();
            let mut r = BitReader::new(&bytes);
            for &s in &data {
                prop_assert_eq!(book.decode_symbol(&mut r).unwrap(), s);
            }
        }
    }
}
