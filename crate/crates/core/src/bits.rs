//! Bit-exact packet representation.
//!
//! Bits are stored MSB-first within each byte. The trailing byte of a
//! non-byte-aligned string keeps its unused low bits at zero so that
//! structural equality coincides with bit equality.

use std::fmt;

use serde::de::{self, Deserializer};
use serde::{Deserialize, Serialize, Serializer};

#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitString {
    bytes: Vec<u8>,
    len: usize,
}

impl BitString {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_bytes(bytes: &[u8]) -> Self {
        BitString {
            bytes: bytes.to_vec(),
            len: bytes.len() * 8,
        }
    }

    /// Builds a string from the first `len` bits of `bytes`.
    pub fn from_bytes_with_len(bytes: &[u8], len: usize) -> Option<Self> {
        if len > bytes.len() * 8 {
            return None;
        }
        let mut bytes = bytes[..len.div_ceil(8)].to_vec();
        if !len.is_multiple_of(8) {
            let last = bytes.len() - 1;
            bytes[last] &= 0xFFu8 << (8 - len % 8);
        }
        Some(BitString { bytes, len })
    }

    pub fn from_hex(s: &str) -> Result<Self, hex::FromHexError> {
        Ok(Self::from_bytes(&hex::decode(s.trim())?))
    }

    /// The `width` low bits of `value`, most significant first.
    pub fn from_uint(value: u64, width: usize) -> Self {
        let mut out = BitString::new();
        out.push_uint(value, width);
        out
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn is_byte_aligned(&self) -> bool {
        self.len.is_multiple_of(8)
    }

    /// Byte view; only defined for byte-aligned strings.
    pub fn as_bytes(&self) -> Option<&[u8]> {
        self.is_byte_aligned().then_some(&self.bytes[..])
    }

    /// Backing bytes, with the tail zero-padded when not byte aligned.
    pub fn raw_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn to_hex(&self) -> String {
        hex::encode(&self.bytes)
    }

    pub fn bit(&self, idx: usize) -> bool {
        assert!(idx < self.len, "bit index {idx} out of range {}", self.len);
        self.bytes[idx / 8] & (0x80 >> (idx % 8)) != 0
    }

    pub fn push_bit(&mut self, bit: bool) {
        if self.len.is_multiple_of(8) {
            self.bytes.push(0);
        }
        if bit {
            let last = self.bytes.len() - 1;
            self.bytes[last] |= 0x80 >> (self.len % 8);
        }
        self.len += 1;
    }

    pub fn push_uint(&mut self, value: u64, width: usize) {
        assert!(width <= 64, "field width {width} exceeds 64 bits");
        for i in (0..width).rev() {
            self.push_bit((value >> i) & 1 == 1);
        }
    }

    pub fn append(&mut self, other: &BitString) {
        if self.is_byte_aligned() {
            self.bytes.extend_from_slice(&other.bytes);
            self.len += other.len;
        } else {
            for i in 0..other.len {
                self.push_bit(other.bit(i));
            }
        }
    }

    pub fn concat(&self, other: &BitString) -> BitString {
        let mut out = self.clone();
        out.append(other);
        out
    }

    /// Reads `width` bits starting at `offset` as a big-endian unsigned value.
    pub fn read_uint(&self, offset: usize, width: usize) -> Option<u64> {
        if width > 64 || offset.checked_add(width)? > self.len {
            return None;
        }
        let mut v = 0u64;
        for i in offset..offset + width {
            v = (v << 1) | self.bit(i) as u64;
        }
        Some(v)
    }

    /// Bits `[start, start + len)`.
    pub fn slice(&self, start: usize, len: usize) -> Option<BitString> {
        if start.checked_add(len)? > self.len {
            return None;
        }
        if start.is_multiple_of(8) {
            return BitString::from_bytes_with_len(&self.bytes[start / 8..], len);
        }
        let mut out = BitString::new();
        for i in start..start + len {
            out.push_bit(self.bit(i));
        }
        Some(out)
    }

    pub fn split_at(&self, at: usize) -> Option<(BitString, BitString)> {
        Some((self.slice(0, at)?, self.slice(at, self.len.checked_sub(at)?)?))
    }

    pub fn suffix(&self, from: usize) -> Option<BitString> {
        self.slice(from, self.len.checked_sub(from)?)
    }

    pub fn flip_bit(&mut self, idx: usize) {
        assert!(idx < self.len);
        self.bytes[idx / 8] ^= 0x80 >> (idx % 8);
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_byte_aligned() {
            write!(f, "BitString({})", self.to_hex())
        } else {
            write!(f, "BitString({}/{} bits)", self.to_hex(), self.len)
        }
    }
}

impl From<&[u8]> for BitString {
    fn from(b: &[u8]) -> Self {
        BitString::from_bytes(b)
    }
}

impl From<Vec<u8>> for BitString {
    fn from(bytes: Vec<u8>) -> Self {
        let len = bytes.len() * 8;
        BitString { bytes, len }
    }
}

impl FromIterator<bool> for BitString {
    fn from_iter<I: IntoIterator<Item = bool>>(iter: I) -> Self {
        let mut out = BitString::new();
        for b in iter {
            out.push_bit(b);
        }
        out
    }
}

#[derive(Serialize, Deserialize)]
struct UnalignedRepr {
    hex: String,
    len_bits: usize,
}

// Byte-aligned strings serialize as a bare hex string, others as
// `{"hex": ..., "len_bits": n}`.
impl Serialize for BitString {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.is_byte_aligned() {
            s.serialize_str(&self.to_hex())
        } else {
            UnalignedRepr {
                hex: self.to_hex(),
                len_bits: self.len,
            }
            .serialize(s)
        }
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Hex(String),
            Unaligned(UnalignedRepr),
        }
        match Repr::deserialize(d)? {
            Repr::Hex(h) => BitString::from_hex(&h).map_err(de::Error::custom),
            Repr::Unaligned(u) => {
                let bytes = hex::decode(&u.hex).map_err(de::Error::custom)?;
                if bytes.len() != u.len_bits.div_ceil(8) {
                    return Err(de::Error::custom(format!(
                        "hex holds {} bytes but len_bits is {}",
                        bytes.len(),
                        u.len_bits
                    )));
                }
                BitString::from_bytes_with_len(&bytes, u.len_bits)
                    .ok_or_else(|| de::Error::custom("len_bits exceeds hex data"))
            }
        }
    }
}
