//! The semantic codec: paired VAEs per data kind, ELBO training, baseline
//! codecs, the AWGN latent channel, and transmission accounting.

mod baseline;
mod channel;
mod checkpoint;
mod train;
mod vae;

pub use baseline::{identity_codec, QuantizerCodec};
pub use channel::{awgn_channel, ChannelSpec};
pub use checkpoint::{load_vae, save_vae, vae_from_container, vae_to_container};
pub use train::{train_vae, train_vae_on_matrix, VaeTrainConfig};
pub use vae::{
    elbo_loss, elbo_loss_with_beta, ChannelNorm, DataKind, ElboLoss, EncodeMode, LatentEmbedding,
    TrainingMeta, VaeModel,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::csi::{FEATURE_LEN, HALF_LEN};
use crate::rng::derive_seed;

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("nn: {0}")]
    Nn(#[from] crate::nn::NnError),
    #[error("input width {got} does not match the model input width {expected}")]
    WrongInputWidth { expected: usize, got: usize },
    #[error("latent width {got} does not match the bottleneck {expected}")]
    WrongLatentWidth { expected: usize, got: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("training diverged at epoch {epoch}, batch {batch}: {what}")]
    Diverged {
        epoch: u32,
        batch: usize,
        what: String,
    },
    #[error("training set is empty")]
    EmptyTrainSet,
    #[error("quantizer bits must be in [1, 16], got {0}")]
    BadQuantizerBits(u32),
    #[error("codec pair mismatch: {0}")]
    PairMismatch(String),
    #[error("container: {0}")]
    Container(#[from] crate::container::ContainerError),
    #[error("checkpoint is inconsistent: {0}")]
    BadCheckpoint(String),
}

pub type Result<T> = std::result::Result<T, CodecError>;

/// The two VAEs serving one sweep point: one per data kind.
#[derive(Debug, Clone, PartialEq)]
pub struct CodecPair {
    pub amplitude: VaeModel,
    pub phase: VaeModel,
}

impl CodecPair {
    pub fn new(amplitude: VaeModel, phase: VaeModel) -> Result<Self> {
        if amplitude.data_kind != DataKind::Amplitude || phase.data_kind != DataKind::Phase {
            return Err(CodecError::PairMismatch("data kinds are swapped or wrong".into()));
        }
        if amplitude.bottleneck != phase.bottleneck {
            return Err(CodecError::PairMismatch(format!(
                "bottlenecks differ: {} vs {}",
                amplitude.bottleneck, phase.bottleneck
            )));
        }
        Ok(Self { amplitude, phase })
    }

    pub fn bottleneck(&self) -> usize {
        self.amplitude.bottleneck
    }

    /// Scalars crossing the air interface per sample: one latent per half.
    pub fn transmitted_scalars(&self) -> usize {
        2 * self.bottleneck()
    }
}

/// Transmitted scalars over raw feature scalars under the transmit-z policy.
pub fn remaining_ratio(pair: &CodecPair) -> f64 {
    pair.transmitted_scalars() as f64 / FEATURE_LEN as f64
}

/// A codec applied to whole flattened samples in the evaluation and
/// simulation pipelines.
#[derive(Debug, Clone)]
pub enum Codec {
    /// Passes features through untouched.
    Identity,
    /// Per-channel uniform scalar quantizer (experimental control).
    Quantizer(QuantizerCodec),
    /// The semantic codec pair.
    Vae(std::sync::Arc<CodecPair>),
}

/// How a codec names itself in reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CodecKindTag {
    Identity,
    Quantizer,
    Vae,
}

impl Codec {
    pub fn kind_tag(&self) -> CodecKindTag {
        match self {
            Codec::Identity => CodecKindTag::Identity,
            Codec::Quantizer(_) => CodecKindTag::Quantizer,
            Codec::Vae(_) => CodecKindTag::Vae,
        }
    }

    /// Scalars on the air per sample.
    pub fn transmitted_scalars(&self) -> usize {
        match self {
            Codec::Identity | Codec::Quantizer(_) => FEATURE_LEN,
            Codec::Vae(pair) => pair.transmitted_scalars(),
        }
    }

    /// Runs one flattened sample through encode -> channel -> decode.
    ///
    /// `seed` individualizes the channel noise; pipelines derive it per
    /// sample/request so results do not depend on evaluation order.
    pub fn transmit(&self, flat: &[f32], channel: &ChannelSpec, seed: u64) -> Result<Vec<f32>> {
        if flat.len() != FEATURE_LEN {
            return Err(CodecError::WrongInputWidth {
                expected: FEATURE_LEN,
                got: flat.len(),
            });
        }
        match self {
            Codec::Identity => Ok(flat.to_vec()),
            Codec::Quantizer(q) => q.transcode(flat),
            Codec::Vae(pair) => {
                let amp = &flat[..HALF_LEN];
                let ph = &flat[HALF_LEN..];
                let e_amp = pair.amplitude.encode(amp, EncodeMode::Deterministic)?;
                let e_ph = pair.phase.encode(ph, EncodeMode::Deterministic)?;
                let z_amp = awgn_channel(&e_amp.z, channel, derive_seed(seed, 0));
                let z_ph = awgn_channel(&e_ph.z, channel, derive_seed(seed, 1));
                let mut out = pair.amplitude.decode(&z_amp)?;
                out.extend(pair.phase.decode(&z_ph)?);
                Ok(out)
            }
        }
    }
}
