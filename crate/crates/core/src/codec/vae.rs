//! VAE models: encode, reparameterize, decode, and the ELBO loss.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::csi::{wrap_phase, AMP_CHANNELS};
use crate::nn::{Array, DenseStack};
use crate::rng::rng_from_seed;

use super::{CodecError, Result};

/// Which half of a sample a model compresses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DataKind {
    Amplitude,
    Phase,
}

impl DataKind {
    pub fn code(self) -> u32 {
        match self {
            DataKind::Amplitude => 0,
            DataKind::Phase => 1,
        }
    }

    pub fn from_code(c: u32) -> Option<Self> {
        match c {
            0 => Some(DataKind::Amplitude),
            1 => Some(DataKind::Phase),
            _ => None,
        }
    }
}

/// Per-channel affine normalization `x' = (x - min) / (max - min)`.
///
/// Amplitude halves are min-max normalized per channel; phase is passed
/// raw, expressed here as the identity transform.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelNorm {
    pub mins: Vec<f32>,
    pub spans: Vec<f32>,
}

impl ChannelNorm {
    pub fn identity(channels: usize) -> Self {
        Self {
            mins: vec![0.0; channels],
            spans: vec![1.0; channels],
        }
    }

    /// Fits min/max per channel over flattened halves laid out as
    /// `channels x (len / channels)`.
    pub fn fit(halves: &[&[f32]], channels: usize) -> Self {
        let mut mins = vec![f32::INFINITY; channels];
        let mut maxs = vec![f32::NEG_INFINITY; channels];
        for half in halves {
            let per = half.len() / channels;
            for c in 0..channels {
                for &v in &half[c * per..(c + 1) * per] {
                    mins[c] = mins[c].min(v);
                    maxs[c] = maxs[c].max(v);
                }
            }
        }
        let spans = mins
            .iter()
            .zip(&maxs)
            .map(|(&lo, &hi)| if hi > lo { hi - lo } else { 1.0 })
            .collect();
        Self { mins, spans }
    }

    pub fn channels(&self) -> usize {
        self.mins.len()
    }

    pub fn apply(&self, half: &mut [f32]) {
        let per = half.len() / self.channels();
        for (c, chunk) in half.chunks_mut(per).enumerate() {
            let (lo, span) = (self.mins[c], self.spans[c]);
            for v in chunk {
                *v = (*v - lo) / span;
            }
        }
    }

    pub fn invert(&self, half: &mut [f32]) {
        let per = half.len() / self.channels();
        for (c, chunk) in half.chunks_mut(per).enumerate() {
            let (lo, span) = (self.mins[c], self.spans[c]);
            for v in chunk {
                *v = *v * span + lo;
            }
        }
    }
}

/// Training provenance carried by a model.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingMeta {
    pub epochs: u32,
    pub loss_history: Vec<f32>,
    pub seed: u64,
}

/// Codec output for one half-sample.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentEmbedding {
    pub mu: Array<f32>,
    pub logvar: Array<f32>,
    pub z: Array<f32>,
    /// Scalars that cross the link under the transmit-z policy.
    pub transmitted_scalars: usize,
}

/// How the latent is produced at encode time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EncodeMode {
    /// `z = mu`; inference-time behavior.
    Deterministic,
    /// `z = mu + exp(logvar/2) * n` with seeded standard-normal `n`.
    Sampled { seed: u64 },
}

/// One variational autoencoder for one data kind.
#[derive(Debug, Clone, PartialEq)]
pub struct VaeModel {
    pub encoder: DenseStack<f32>,
    pub decoder: DenseStack<f32>,
    pub bottleneck: usize,
    pub input_dim: usize,
    pub data_kind: DataKind,
    pub version: u32,
    pub norm: ChannelNorm,
    pub training_meta: TrainingMeta,
}

impl VaeModel {
    /// Encoder output `(mu, logvar)` plus the sampled or copied latent.
    pub fn encode(&self, x_half: &[f32], mode: EncodeMode) -> Result<LatentEmbedding> {
        if x_half.len() != self.input_dim {
            return Err(CodecError::WrongInputWidth {
                expected: self.input_dim,
                got: x_half.len(),
            });
        }
        let mut normed = x_half.to_vec();
        self.norm.apply(&mut normed);
        let out = self.encoder.forward(&Array::vector(normed))?;
        let b = self.bottleneck;
        let mu = Array::vector(out.as_slice()[..b].to_vec());
        let logvar = Array::vector(out.as_slice()[b..].to_vec());
        let z = match mode {
            EncodeMode::Deterministic => mu.clone(),
            EncodeMode::Sampled { seed } => {
                let mut rng = rng_from_seed(seed);
                let data = mu
                    .as_slice()
                    .iter()
                    .zip(logvar.as_slice())
                    .map(|(&m, &lv)| {
                        let n: f32 = StandardNormal.sample(&mut rng);
                        m + (lv / 2.0).exp() * n
                    })
                    .collect();
                Array::vector(data)
            }
        };
        if !z.all_finite() {
            return Err(CodecError::NonFinite("latent"));
        }
        Ok(LatentEmbedding {
            mu,
            logvar,
            z,
            transmitted_scalars: b,
        })
    }

    /// Reconstruction in input space; phase outputs wrapped to `[-pi, pi)`.
    pub fn decode(&self, z: &Array<f32>) -> Result<Vec<f32>> {
        if z.len() != self.bottleneck {
            return Err(CodecError::WrongLatentWidth {
                expected: self.bottleneck,
                got: z.len(),
            });
        }
        let out = self.decoder.forward(z)?;
        let mut data = out.into_vec();
        match self.data_kind {
            DataKind::Amplitude => self.norm.invert(&mut data),
            DataKind::Phase => {
                for v in &mut data {
                    *v = wrap_phase(*v as f64) as f32;
                }
            }
        }
        Ok(data)
    }

    /// Batched deterministic reconstruction (`z = mu`) of row-major halves.
    /// Same math as `encode`/`decode` per row, evaluated with batch GEMMs.
    pub fn reconstruct_batch(&self, halves: &Array<f32>, rows: usize) -> Result<Array<f32>> {
        let mut normed = halves.clone();
        for row in normed.as_mut_slice().chunks_mut(self.input_dim) {
            self.norm.apply(row);
        }
        let enc = self.encoder.forward_batch(&normed, rows)?;
        let b = self.bottleneck;
        let mut mu = Array::zeros(&[rows, b]);
        for (r, row) in enc.as_slice().chunks(2 * b).enumerate() {
            mu.as_mut_slice()[r * b..(r + 1) * b].copy_from_slice(&row[..b]);
        }
        let mut out = self.decoder.forward_batch(&mu, rows)?;
        match self.data_kind {
            DataKind::Amplitude => {
                for row in out.as_mut_slice().chunks_mut(self.input_dim) {
                    self.norm.invert(row);
                }
            }
            DataKind::Phase => {
                for v in out.as_mut_slice() {
                    *v = wrap_phase(*v as f64) as f32;
                }
            }
        }
        Ok(out)
    }
}

/// The three ELBO components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElboLoss {
    pub reconstruction: f64,
    pub kl: f64,
    pub total: f64,
}

/// `reconstruction = mean((x - x_hat)^2)`,
/// `kl = 0.5 * sum(mu^2 + exp(logvar) - 1 - logvar)`,
/// `total = reconstruction + beta * kl` with `beta = 1`.
pub fn elbo_loss(
    x: &Array<f32>,
    x_hat: &Array<f32>,
    mu: &Array<f32>,
    logvar: &Array<f32>,
) -> Result<ElboLoss> {
    elbo_loss_with_beta(x, x_hat, mu, logvar, 1.0)
}

pub fn elbo_loss_with_beta(
    x: &Array<f32>,
    x_hat: &Array<f32>,
    mu: &Array<f32>,
    logvar: &Array<f32>,
    beta: f64,
) -> Result<ElboLoss> {
    if x.shape() != x_hat.shape() {
        return Err(CodecError::Nn(crate::nn::NnError::ShapeMismatch {
            context: "elbo reconstruction operands",
            expected: x.shape().to_vec(),
            got: x_hat.shape().to_vec(),
        }));
    }
    if mu.shape() != logvar.shape() {
        return Err(CodecError::Nn(crate::nn::NnError::ShapeMismatch {
            context: "elbo latent operands",
            expected: mu.shape().to_vec(),
            got: logvar.shape().to_vec(),
        }));
    }
    if !(x.all_finite() && x_hat.all_finite() && mu.all_finite() && logvar.all_finite()) {
        return Err(CodecError::NonFinite("elbo_loss input"));
    }

    let mut recon = 0.0f64;
    for (&a, &b) in x.as_slice().iter().zip(x_hat.as_slice()) {
        let d = (a - b) as f64;
        recon += d * d;
    }
    recon /= x.len() as f64;

    let mut kl = 0.0f64;
    for (&m, &lv) in mu.as_slice().iter().zip(logvar.as_slice()) {
        let (m, lv) = (m as f64, lv as f64);
        kl += m * m + lv.exp() - 1.0 - lv;
    }
    kl *= 0.5;

    let total = recon + beta * kl;
    if !total.is_finite() {
        return Err(CodecError::NonFinite("elbo_loss total"));
    }
    Ok(ElboLoss {
        reconstruction: recon,
        kl,
        total,
    })
}

/// Channel count used when normalizing one half of a sample.
pub fn half_channels() -> usize {
    AMP_CHANNELS
}
