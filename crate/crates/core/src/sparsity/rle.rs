//! Run-length coding of binary masks over byte-sized runs.
//!
//! Runs alternate between off and on, starting with off. A run longer than
//! 255 is split as `255, 0, rest`, where the zero-length run of the other
//! value keeps the alternation intact.

use crate::error::ArchiveError;

pub fn encode(bits: impl IntoIterator<Item = bool>) -> Vec<u8> {
    let mut out = Vec::new();
    let mut cur = false;
    let mut run = 0u8;
    for b in bits {
        if b == cur {
            if run == u8::MAX {
                out.extend([u8::MAX, 0]);
                run = 0;
            }
            run += 1;
        } else {
            out.push(run);
            cur = b;
            run = 1;
        }
    }
    out.push(run);
    out
}

/// Decodes exactly `len` bits; `symbols` must be fully consumed.
pub fn decode(symbols: &[u8], len: usize) -> Result<Vec<bool>, ArchiveError> {
    let mut bits = Vec::with_capacity(len);
    let mut cur = false;
    for &s in symbols {
        if bits.len() + s as usize > len {
            return Err(ArchiveError::Corrupt("run exceeds grid size".into()));
        }
        bits.extend(std::iter::repeat_n(cur, s as usize));
        cur = !cur;
    }
    if bits.len() != len {
        return Err(ArchiveError::Corrupt(format!(
            "runs cover {} of {len} entries",
            bits.len()
        )));
    }
    Ok(bits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(encode([]), vec![0]);
        assert_eq!(encode([true, true, false]), vec![0, 2, 1]);
        assert_eq!(encode([false; 3]), vec![3]);
        let long = vec![false; 600];
        assert_eq!(encode(long.iter().copied()), vec![255, 0, 255, 0, 90]);
    }

    #[test]
    fn decode_rejects_mismatch() {
        assert!(decode(&[3], 2).is_err());
        assert!(decode(&[1], 2).is_err());
        assert!(decode(&[1, 1, 0], 2).is_ok());
    }

    proptest! {
        #[test]
        fn round_trip(bits in proptest::collection::vec(proptest::bool::weighted(0.1), 0..2000)) {
            let s = encode(bits.iter().copied());
            prop_assert_eq!(decode(&s, bits.len()).unwrap(), bits);
        }
    }
}
