//! Text encodings shared by key files, transcripts and tallies.
//!
//! Integers are lowercase big-endian hex without leading zeros (`0` for zero).
//! Byte strings are lowercase hex, with `-` standing in for the empty string so
//! that every field stays a non-empty whitespace-free token.

use num_bigint::BigUint;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HexError {
    #[error("malformed hex integer {0:?}")]
    Integer(String),
    #[error("malformed hex bytes {0:?}")]
    Bytes(String),
    #[error("expected {expected} bytes, found {found}")]
    Width { expected: usize, found: usize },
}

pub fn int_to_hex(value: &BigUint) -> String {
    value.to_str_radix(16)
}

/// Parses the canonical integer form; uppercase digits and leading zeros are rejected
/// so that parse/render round-trips byte for byte.
pub fn int_from_hex(text: &str) -> Result<BigUint, HexError> {
    let canonical = !text.is_empty()
        && text.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'))
        && (text == "0" || !text.starts_with('0'));
    if !canonical {
        return Err(HexError::Integer(text.to_owned()));
    }
    BigUint::parse_bytes(text.as_bytes(), 16).ok_or_else(|| HexError::Integer(text.to_owned()))
}

pub fn bytes_to_hex(bytes: &[u8]) -> String {
    if bytes.is_empty() {
        "-".to_owned()
    } else {
        hex::encode(bytes)
    }
}

pub fn bytes_from_hex(text: &str) -> Result<Vec<u8>, HexError> {
    if text == "-" {
        return Ok(Vec::new());
    }
    if text.is_empty() || text.bytes().any(|b| b.is_ascii_uppercase()) {
        return Err(HexError::Bytes(text.to_owned()));
    }
    hex::decode(text).map_err(|_| HexError::Bytes(text.to_owned()))
}

pub fn fixed_from_hex<const N: usize>(text: &str) -> Result<[u8; N], HexError> {
    let bytes = bytes_from_hex(text)?;
    let found = bytes.len();
    bytes.try_into().map_err(|_| HexError::Width { expected: N, found })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn integers_use_canonical_form() {
        assert_eq!(int_to_hex(&BigUint::from(0u32)), "0");
        assert_eq!(int_to_hex(&BigUint::from(3233u32)), "ca1");
        assert_eq!(int_from_hex("ca1").unwrap(), BigUint::from(3233u32));
        assert!(int_from_hex("0ca1").is_err());
        assert!(int_from_hex("CA1").is_err());
        assert!(int_from_hex("").is_err());
        assert!(int_from_hex("xyz").is_err());
    }

    #[test]
    fn empty_bytes_render_as_dash() {
        assert_eq!(bytes_to_hex(&[]), "-");
        assert_eq!(bytes_from_hex("-").unwrap(), Vec::<u8>::new());
        assert!(bytes_from_hex("").is_err());
        assert!(bytes_from_hex("ABCD").is_err());
        assert_eq!(fixed_from_hex::<2>("abc").unwrap_err(), HexError::Bytes("abc".into()));
        assert_eq!(fixed_from_hex::<2>("abcdef").unwrap_err(), HexError::Width { expected: 2, found: 3 });
    }

    proptest! {
        #[test]
        fn integer_round_trip(limbs in proptest::collection::vec(any::<u32>(), 0..8)) {
            let value = BigUint::new(limbs);
            let text = int_to_hex(&value);
            prop_assert_eq!(int_from_hex(&text).unwrap(), value);
        }

        #[test]
        fn bytes_round_trip(bytes in proptest::collection::vec(any::<u8>(), 0..64)) {
            let text = bytes_to_hex(&bytes);
            prop_assert!(!text.is_empty() && !text.contains(char::is_whitespace));
            prop_assert_eq!(bytes_from_hex(&text).unwrap(), bytes);
        }
    }
}
