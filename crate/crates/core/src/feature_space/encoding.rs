//! Packing of half-precision embedding vectors into 64-bit integers.
//!
//! Four fp16 lanes per word, little-endian lane order: element `4k + l` lives
//! in bits `16l..16l + 16` of word `k`.

use half::f16;

use crate::error::{Error, Result};

pub const LANES_PER_WORD: usize = 4;

/// Round a value to the nearest fp16-representable value.
pub fn quantize_f16(x: f64) -> f64 {
    f16::from_f64(x).to_f64()
}

pub fn encode_embedding(values: &[f64]) -> Result<Vec<i64>> {
    if values.is_empty() || !values.len().is_multiple_of(LANES_PER_WORD) {
        return Err(Error::InvalidConfig(format!(
            "cannot pack {} values into {}-lane words",
            values.len(),
            LANES_PER_WORD
        )));
    }
    Ok(values
        .chunks_exact(LANES_PER_WORD)
        .map(|lanes| {
            let word = lanes.iter().enumerate().fold(0u64, |acc, (l, &x)| {
                acc | (u64::from(f16::from_f64(x).to_bits()) << (16 * l))
            });
            word as i64
        })
        .collect())
}

/// Unpack words into `4 * words.len()` reals.
///
/// Lanes that decode to NaN map to 0.0 and infinities saturate to the largest
/// finite fp16 magnitude, so corrupted words always yield a finite vector.
pub fn decode_encoded_embedding(words: &[i64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(words.len() * LANES_PER_WORD);
    for &word in words {
        let bits = word as u64;
        for l in 0..LANES_PER_WORD {
            let lane = f16::from_bits(((bits >> (16 * l)) & 0xffff) as u16);
            let x = if lane.is_nan() {
                0.0
            } else if lane.is_infinite() {
                f64::from(f16::MAX).copysign(lane.to_f64())
            } else {
                lane.to_f64()
            };
            out.push(x);
        }
    }
    out
}
