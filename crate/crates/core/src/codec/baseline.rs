//! Baseline codecs used as experimental controls.

use crate::csi::FEATURE_LEN;

use super::{CodecError, Result};

/// The do-nothing codec: reconstruction error 0, remaining ratio 1.
pub fn identity_codec(x: &[f32]) -> Vec<f32> {
    x.to_vec()
}

/// Uniform scalar quantizer with per-channel ranges fitted on training data.
///
/// Each scalar maps to the nearest of `2^bits` evenly spaced levels spanning
/// the training min/max of its channel.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizerCodec {
    bits: u32,
    mins: Vec<f32>,
    maxs: Vec<f32>,
}

impl QuantizerCodec {
    /// Fits per-channel ranges over flattened samples laid out as
    /// `channels x (len / channels)`.
    pub fn fit(samples: &[&[f32]], channels: usize, bits: u32) -> Result<Self> {
        if !(1..=16).contains(&bits) {
            return Err(CodecError::BadQuantizerBits(bits));
        }
        let mut mins = vec![f32::INFINITY; channels];
        let mut maxs = vec![f32::NEG_INFINITY; channels];
        for s in samples {
            let per = s.len() / channels;
            for c in 0..channels {
                for &v in &s[c * per..(c + 1) * per] {
                    mins[c] = mins[c].min(v);
                    maxs[c] = maxs[c].max(v);
                }
            }
        }
        Ok(Self { bits, mins, maxs })
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    /// Quantize-then-dequantize one flattened sample.
    pub fn transcode(&self, x: &[f32]) -> Result<Vec<f32>> {
        if x.len() != FEATURE_LEN && x.len() % self.mins.len() != 0 {
            return Err(CodecError::WrongInputWidth {
                expected: FEATURE_LEN,
                got: x.len(),
            });
        }
        let channels = self.mins.len();
        let per = x.len() / channels;
        let levels = (1u32 << self.bits) - 1; // level count - 1
        let mut out = Vec::with_capacity(x.len());
        for (c, chunk) in x.chunks(per).enumerate() {
            let lo = self.mins[c];
            let hi = self.maxs[c];
            let span = hi - lo;
            for &v in chunk {
                if span <= 0.0 {
                    out.push(lo);
                    continue;
                }
                let t = ((v - lo) / span).clamp(0.0, 1.0);
                let q = (t * levels as f32).round();
                out.push(lo + q / levels as f32 * span);
            }
        }
        Ok(out)
    }
}
