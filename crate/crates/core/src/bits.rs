//! Bit-string helpers shared by the whole crate.
//!
//! One convention everywhere: an n-bit value prints most-significant bit
//! first, and "bit k" (1-based) means the k-th character of that printing,
//! so bit 1 is the most significant. Prefixes are taken from the left.

use crate::error::{Error, Result};

/// Renders `value` as an `n`-character string of `0`/`1`, MSB first.
pub fn format_bits(value: usize, n: usize) -> String {
    (0..n)
        .map(|i| if value >> (n - 1 - i) & 1 == 1 { '1' } else { '0' })
        .collect()
}

/// Parses an `n`-character `0`/`1` string into a value. Width is exact.
pub fn parse_bits(text: &str, n: usize) -> Result<usize> {
    if text.len() != n {
        return Err(Error::BadBitString(format!(
            "`{text}` has {} characters, expected {n}",
            text.len()
        )));
    }
    let mut value = 0usize;
    for ch in text.chars() {
        value = (value << 1)
            | match ch {
                '0' => 0,
                '1' => 1,
                _ => return Err(Error::BadBitString(format!("`{text}` is not a bit-string"))),
            };
    }
    Ok(value)
}

/// The k-th bit of an n-bit value, 1-based from the most significant end.
pub fn bit_at(value: usize, n: usize, k: usize) -> usize {
    debug_assert!(k >= 1 && k <= n);
    value >> (n - k) & 1
}

/// The first `k` bits of an n-bit value, as a k-bit value. `k = 0` gives 0.
pub fn prefix(value: usize, n: usize, k: usize) -> usize {
    debug_assert!(k <= n);
    if k == 0 { 0 } else { value >> (n - k) }
}

/// True when two n-bit values agree on their first `k` bits.
pub fn prefix_eq(a: usize, b: usize, n: usize, k: usize) -> bool {
    prefix(a, n, k) == prefix(b, n, k)
}

/// String form of [`prefix`]: the first `k` characters of `value`.
pub fn prefix_str(value: &str, k: usize) -> Result<&str> {
    value
        .get(..k)
        .ok_or(Error::ValueWidth { value: k, width: value.len() })
}
