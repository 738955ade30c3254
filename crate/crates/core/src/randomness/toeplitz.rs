//! Toeplitz hashing over GF(2).

use crate::{Error, Result};

/// Bits packed into 64-bit words, bit `i` at position `i % 64` of word `i / 64`.
fn pack(bits: &[bool]) -> Vec<u64> {
    let mut words = vec![0u64; bits.len().div_ceil(64)];
    for (i, &b) in bits.iter().enumerate() {
        if b {
            words[i / 64] |= 1 << (i % 64);
        }
    }
    words
}

/// Word `k` of the bit window starting at `offset`.
fn window_word(words: &[u64], offset: usize, k: usize) -> u64 {
    let start = offset + 64 * k;
    let (w, s) = (start / 64, start % 64);
    let lo = words.get(w).copied().unwrap_or(0) >> s;
    if s == 0 {
        lo
    } else {
        lo | (words.get(w + 1).copied().unwrap_or(0) << (64 - s))
    }
}

/// `T·input` over GF(2) for the `ℓ×m` Toeplitz matrix `T[i][j] = seed[ℓ−1−i+j]`.
///
/// The first row is `seed[ℓ−1..m+ℓ−1)` and the first column runs through
/// `seed[0..ℓ)` from the bottom up.
pub fn toeplitz_extract(input: &[bool], seed: &[bool], ell: usize) -> Result<Vec<bool>> {
    let m = input.len();
    if ell == 0 {
        return Ok(Vec::new());
    }
    if seed.len() != m + ell - 1 {
        return Err(Error::Dimension(format!(
            "seed has {} bits, expected m + ℓ − 1 = {}",
            seed.len(),
            m + ell - 1
        )));
    }
    let x = pack(input);
    let s = pack(seed);
    let tail = if m.is_multiple_of(64) {
        u64::MAX
    } else {
        (1u64 << (m % 64)) - 1
    };
    Ok((0..ell)
        .map(|i| {
            let offset = ell - 1 - i;
            let mut acc = 0u64;
            for (k, &xk) in x.iter().enumerate() {
                let mut w = window_word(&s, offset, k) & xk;
                if k + 1 == x.len() {
                    w &= tail;
                }
                acc ^= w;
            }
            acc.count_ones() % 2 == 1
        })
        .collect())
}

/// Reads a string of `0`/`1` characters, ignoring whitespace and underscores.
pub fn parse_bits(text: &str) -> Result<Vec<bool>> {
    text.chars()
        .filter(|c| !c.is_whitespace() && *c != '_')
        .enumerate()
        .map(|(i, c)| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            _ => Err(Error::parse(1, format!("character {i}: expected 0 or 1, got {c:?}"))),
        })
        .collect()
}

pub fn format_bits(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

/// Packs bits most-significant first; the last byte is zero-padded.
pub fn bits_to_bytes(bits: &[bool]) -> Vec<u8> {
    bits.chunks(8)
        .map(|c| {
            c.iter()
                .enumerate()
                .fold(0u8, |acc, (i, &b)| acc | (u8::from(b) << (7 - i)))
        })
        .collect()
}

pub fn bytes_to_bits(bytes: &[u8], len: usize) -> Result<Vec<bool>> {
    if len > 8 * bytes.len() {
        return Err(Error::Dimension(format!(
            "{len} bits requested from {} bytes",
            bytes.len()
        )));
    }
    Ok((0..len).map(|i| bytes[i / 8] >> (7 - i % 8) & 1 == 1).collect())
}

pub fn to_hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
