//! Binary feature file:
//!
//! ```text
//! "IKFT" | version u16 | kind u8 | T u32 | L u32 | n_F u32
//! | L * n_F f32 (row-major) | L mask bytes (0/1)
//! ```
//! All integers and floats little-endian.

use std::path::Path;

use super::{FeatureKind, FeatureSequence};
use crate::error::{Error, Result};

pub const FEATURE_MAGIC: &[u8; 4] = b"IKFT";
pub const FEATURE_VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 1 + 4 + 4 + 4;

pub fn encode_features(seq: &FeatureSequence) -> Vec<u8> {
    let rows = seq.rows();
    let mut b = Vec::with_capacity(HEADER_LEN + rows * seq.n_features() * 4 + rows);
    b.extend_from_slice(FEATURE_MAGIC);
    b.extend_from_slice(&FEATURE_VERSION.to_le_bytes());
    b.push(seq.kind().code());
    b.extend_from_slice(&(seq.native_frames() as u32).to_le_bytes());
    b.extend_from_slice(&(rows as u32).to_le_bytes());
    b.extend_from_slice(&(seq.n_features() as u32).to_le_bytes());
    for v in seq.values() {
        b.extend_from_slice(&v.to_le_bytes());
    }
    b.extend(seq.mask().iter().map(|&m| m as u8));
    b
}

pub fn decode_features(bytes: &[u8]) -> Result<FeatureSequence> {
    let err = |m: &str| Error::FeatureFile(m.to_string());
    if bytes.len() < HEADER_LEN {
        return Err(err("truncated header"));
    }
    if &bytes[..4] != FEATURE_MAGIC {
        return Err(err("bad magic"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != FEATURE_VERSION {
        return Err(Error::FeatureFile(format!("unsupported version {version}")));
    }
    let kind = FeatureKind::from_code(bytes[6]).ok_or_else(|| err("unknown feature kind"))?;
    let (t, l, d) = (u32_at(7), u32_at(11), u32_at(15));
    let n_vals = l.checked_mul(d).ok_or_else(|| err("dimension overflow"))?;
    let expected = HEADER_LEN + n_vals * 4 + l;
    if bytes.len() != expected {
        return Err(Error::FeatureFile(format!(
            "expected {expected} bytes, found {}",
            bytes.len()
        )));
    }
    let body = &bytes[HEADER_LEN..];
    let values = body[..n_vals * 4]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let mask = body[n_vals * 4..]
        .iter()
        .map(|&m| match m {
            0 => Ok(false),
            1 => Ok(true),
            _ => Err(err("mask byte not 0/1")),
        })
        .collect::<Result<Vec<_>>>()?;
    FeatureSequence::from_parts(kind, d, t, values, mask)
}

pub fn write_feature_file(path: impl AsRef<Path>, seq: &FeatureSequence) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_features(seq)).map_err(|e| Error::io(path, e))
}

pub fn read_feature_file(path: impl AsRef<Path>) -> Result<FeatureSequence> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_features(&bytes)
}

#[cfg(test)]
mod tests {
    use super::super::pad_or_cut;
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let s = FeatureSequence::new(FeatureKind::Modulation, 2, vec![1.0, -2.5]).unwrap();
        let b = encode_features(&pad_or_cut(&s, 3));
        assert_eq!(&b[..4], b"IKFT");
        assert_eq!(&b[4..6], &[1, 0]);
        assert_eq!(b[6], 1);
        assert_eq!(&b[7..11], &[1, 0, 0, 0]);
        assert_eq!(&b[11..15], &[3, 0, 0, 0]);
        assert_eq!(&b[15..19], &[2, 0, 0, 0]);
        assert_eq!(&b[19..23], &1.0f32.to_le_bytes());
        assert_eq!(&b[b.len() - 3..], &[1, 0, 0]);
    }

    #[test]
    fn rejects_corruption() {
        let s = FeatureSequence::new(FeatureKind::Logmel, 1, vec![1.0, 2.0]).unwrap();
        let good = encode_features(&s);
        assert!(decode_features(&good[..good.len() - 1]).is_err());
        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(decode_features(&bad).is_err());
        let mut bad = good;
        bad[6] = 9;
        assert!(decode_features(&bad).is_err());
    }

    proptest! {
        #[test]
        fn bit_exact_round_trip(
            vals in proptest::collection::vec(proptest::num::f32::ANY, 1..64),
            d in 1usize..4,
            pad in 1usize..40,
        ) {
            let n = vals.len() / d * d;
            prop_assume!(n > 0);
            let s = FeatureSequence::new(FeatureKind::Logmel, d, vals[..n].to_vec()).unwrap();
            let p = pad_or_cut(&s, pad);
            let bytes = encode_features(&p);
            let back = decode_features(&bytes).unwrap();
            prop_assert_eq!(encode_features(&back), bytes);
            prop_assert_eq!(back.mask(), p.mask());
            prop_assert_eq!(back.native_frames(), p.native_frames());
        }
    }
}
