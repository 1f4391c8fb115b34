//! ELBO training of one VAE with Adamax.

use log::debug;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::csi::{Dataset, AMP_CHANNELS, HALF_LEN};
use crate::nn::{Activation, AdamaxHyper, AdamaxState, Array, DenseStack, NnError};
use crate::rng::{derive_seed, rng_from_seed};

use super::vae::{ChannelNorm, DataKind, TrainingMeta, VaeModel};
use super::{CodecError, Result};

/// Hyperparameters for one VAE training run.
#[derive(Debug, Clone, PartialEq)]
pub struct VaeTrainConfig {
    pub bottleneck: usize,
    /// Hidden widths of the encoder; the decoder mirrors them.
    pub hidden: Vec<usize>,
    pub epochs: u32,
    pub batch_size: usize,
    /// Adamax step size.
    pub alpha: f64,
    /// Weight of the KL term in the total loss.
    pub kl_beta: f64,
    /// Initial bias of the log-variance head. Negative values start the
    /// posterior near-deterministic, which speeds up short runs.
    pub logvar_bias_init: f32,
    pub seed: u64,
}

impl Default for VaeTrainConfig {
    fn default() -> Self {
        Self {
            bottleneck: 270,
            hidden: vec![1024, 512],
            epochs: 50,
            batch_size: 64,
            alpha: 0.002,
            kl_beta: 1.0,
            logvar_bias_init: -4.0,
            seed: 0,
        }
    }
}

/// Trains on the chosen half of every sample in `train`.
pub fn train_vae(train: &Dataset, kind: DataKind, cfg: &VaeTrainConfig) -> Result<VaeModel> {
    if train.is_empty() {
        return Err(CodecError::EmptyTrainSet);
    }
    let rows = train.len();
    let mut data = Vec::with_capacity(rows * HALF_LEN);
    for s in &train.samples {
        data.extend_from_slice(match kind {
            DataKind::Amplitude => s.amplitude_half(),
            DataKind::Phase => s.phase_half(),
        });
    }
    let mut x = Array::from_vec(&[rows, HALF_LEN], data)?;
    let norm = match kind {
        DataKind::Amplitude => {
            let halves: Vec<&[f32]> = x.as_slice().chunks(HALF_LEN).collect();
            ChannelNorm::fit(&halves, AMP_CHANNELS)
        }
        DataKind::Phase => ChannelNorm::identity(AMP_CHANNELS),
    };
    for row in x.as_mut_slice().chunks_mut(HALF_LEN) {
        norm.apply(row);
    }
    train_vae_on_matrix(&x, norm, kind, cfg)
}

/// Trains on an already-normalized `[rows, input_dim]` matrix.
///
/// Exposed so sweeps can normalize a shared training matrix once; the
/// fitted `norm` is stored in the model for inference.
pub fn train_vae_on_matrix(
    x: &Array<f32>,
    norm: ChannelNorm,
    kind: DataKind,
    cfg: &VaeTrainConfig,
) -> Result<VaeModel> {
    let rows = x.shape()[0];
    let input_dim = x.shape()[1];
    if rows == 0 {
        return Err(CodecError::EmptyTrainSet);
    }
    let b = cfg.bottleneck;

    let mut enc_dims = vec![input_dim];
    enc_dims.extend_from_slice(&cfg.hidden);
    enc_dims.push(2 * b);
    let mut dec_dims = vec![b];
    dec_dims.extend(cfg.hidden.iter().rev());
    dec_dims.push(input_dim);

    let mut enc_rng = rng_from_seed(derive_seed(cfg.seed, 0));
    let mut dec_rng = rng_from_seed(derive_seed(cfg.seed, 1));
    let mut encoder = DenseStack::glorot(&enc_dims, Activation::Relu, Activation::Identity, &mut enc_rng);
    let mut decoder = DenseStack::glorot(&dec_dims, Activation::Relu, Activation::Identity, &mut dec_rng);
    if let Some(last) = encoder.layers_mut().last_mut() {
        for v in &mut last.bias_mut().as_mut_slice()[b..] {
            *v = cfg.logvar_bias_init;
        }
    }

    let hyper = AdamaxHyper::<f32>::with_alpha(cfg.alpha);
    let mut enc_states: Vec<(AdamaxState<f32>, AdamaxState<f32>)> = encoder
        .layers()
        .iter()
        .map(|l| {
            (
                AdamaxState::new(l.weights().shape(), hyper),
                AdamaxState::new(l.bias().shape(), hyper),
            )
        })
        .collect();
    let mut dec_states: Vec<(AdamaxState<f32>, AdamaxState<f32>)> = decoder
        .layers()
        .iter()
        .map(|l| {
            (
                AdamaxState::new(l.weights().shape(), hyper),
                AdamaxState::new(l.bias().shape(), hyper),
            )
        })
        .collect();

    let batch = cfg.batch_size.max(1).min(rows);
    let mut history = Vec::with_capacity(cfg.epochs as usize);
    let beta = cfg.kl_beta;

    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..rows).collect();
        let mut shuffle_rng = rng_from_seed(derive_seed(cfg.seed, 100 + epoch as u64));
        for i in (1..rows).rev() {
            let j = shuffle_rng.gen_range(0..=i);
            order.swap(i, j);
        }

        let mut epoch_loss = 0.0f64;
        for (batch_idx, chunk) in order.chunks(batch).enumerate() {
            let rows_b = chunk.len();
            let mut xb = Array::zeros(&[rows_b, input_dim]);
            for (r, &i) in chunk.iter().enumerate() {
                xb.as_mut_slice()[r * input_dim..(r + 1) * input_dim]
                    .copy_from_slice(&x.as_slice()[i * input_dim..(i + 1) * input_dim]);
            }

            let step = step_batch(
                &mut encoder,
                &mut decoder,
                &mut enc_states,
                &mut dec_states,
                &xb,
                rows_b,
                b,
                beta,
                derive_seed(cfg.seed, 1_000_003 * (epoch as u64 + 1) + batch_idx as u64),
            )
            .map_err(|e| CodecError::Diverged {
                epoch,
                batch: batch_idx,
                what: e.to_string(),
            })?;
            epoch_loss += step * rows_b as f64;
        }
        let epoch_loss = epoch_loss / rows as f64;
        if !epoch_loss.is_finite() {
            return Err(CodecError::Diverged {
                epoch,
                batch: 0,
                what: "epoch loss non-finite".into(),
            });
        }
        debug!("vae {kind:?} b={b} epoch {epoch}: loss {epoch_loss:.6}");
        history.push(epoch_loss as f32);
    }

    Ok(VaeModel {
        encoder,
        decoder,
        bottleneck: b,
        input_dim,
        data_kind: kind,
        version: 1,
        norm,
        training_meta: TrainingMeta {
            epochs: cfg.epochs,
            loss_history: history,
            seed: cfg.seed,
        },
    })
}

/// One minibatch update; returns the total loss.
#[allow(clippy::too_many_arguments)]
fn step_batch(
    encoder: &mut DenseStack<f32>,
    decoder: &mut DenseStack<f32>,
    enc_states: &mut [(AdamaxState<f32>, AdamaxState<f32>)],
    dec_states: &mut [(AdamaxState<f32>, AdamaxState<f32>)],
    xb: &Array<f32>,
    rows: usize,
    b: usize,
    beta: f64,
    noise_seed: u64,
) -> std::result::Result<f64, NnError> {
    let input_dim = xb.len() / rows;
    let (enc_out, enc_tape) = encoder.forward_recording(xb, rows)?;

    // Split [B, 2b] into mu and logvar, sample z = mu + exp(lv/2) * n.
    let mut mu = Array::<f32>::zeros(&[rows, b]);
    let mut logvar = Array::<f32>::zeros(&[rows, b]);
    for r in 0..rows {
        let row = &enc_out.as_slice()[r * 2 * b..(r + 1) * 2 * b];
        mu.as_mut_slice()[r * b..(r + 1) * b].copy_from_slice(&row[..b]);
        logvar.as_mut_slice()[r * b..(r + 1) * b].copy_from_slice(&row[b..]);
    }
    let mut noise_rng = rng_from_seed(noise_seed);
    let mut noise = Array::<f32>::zeros(&[rows, b]);
    for v in noise.as_mut_slice() {
        *v = StandardNormal.sample(&mut noise_rng);
    }
    let mut z = Array::<f32>::zeros(&[rows, b]);
    for i in 0..rows * b {
        z[i] = mu[i] + (logvar[i] / 2.0).exp() * noise[i];
    }

    let (x_hat, dec_tape) = decoder.forward_recording(&z, rows)?;

    // total = mean((x_hat - x)^2) + beta * mean_batch(0.5 * sum(mu^2 + e^lv - 1 - lv))
    let denom = (rows * input_dim) as f64;
    let mut recon = 0.0f64;
    for (&p, &t) in x_hat.as_slice().iter().zip(xb.as_slice()) {
        let d = (p - t) as f64;
        recon += d * d;
    }
    recon /= denom;
    let mut kl = 0.0f64;
    for i in 0..rows * b {
        let (m, lv) = (mu[i] as f64, logvar[i] as f64);
        kl += m * m + lv.exp() - 1.0 - lv;
    }
    kl = 0.5 * kl / rows as f64;
    let total = recon + beta * kl;
    if !total.is_finite() {
        return Err(NnError::NonFinite("vae batch loss"));
    }

    // d total / d x_hat
    let scale = 2.0 / denom;
    let mut d_xhat = Array::<f32>::zeros(&[rows, input_dim]);
    for i in 0..rows * input_dim {
        d_xhat[i] = ((x_hat[i] - xb[i]) as f64 * scale) as f32;
    }
    let dec_grads = decoder.backward(dec_tape, &d_xhat)?;
    let d_z = &dec_grads.input;

    // d total / d mu = d_z + (beta/B) * mu
    // d total / d lv = d_z * n * exp(lv/2)/2 + (beta/2B) * (e^lv - 1)
    let kl_mu = (beta / rows as f64) as f32;
    let kl_lv = (beta / (2.0 * rows as f64)) as f32;
    let mut upstream = Array::<f32>::zeros(&[rows, 2 * b]);
    for r in 0..rows {
        for j in 0..b {
            let i = r * b + j;
            let half_sigma = (logvar[i] / 2.0).exp() * 0.5;
            upstream.as_mut_slice()[r * 2 * b + j] = d_z[i] + kl_mu * mu[i];
            upstream.as_mut_slice()[r * 2 * b + b + j] =
                d_z[i] * noise[i] * half_sigma + kl_lv * (logvar[i].exp() - 1.0);
        }
    }
    let enc_grads = encoder.backward(enc_tape, &upstream)?;

    for (layer, (grads_w, grads_b, states)) in encoder.layers_mut().iter_mut().zip(
        enc_grads
            .weights
            .iter()
            .zip(enc_grads.biases.iter())
            .zip(enc_states.iter_mut())
            .map(|((w, bias), s)| (w, bias, s)),
    ) {
        states.0.step(layer.weights_mut(), grads_w)?;
        states.1.step(layer.bias_mut(), grads_b)?;
    }
    for (layer, (grads_w, grads_b, states)) in decoder.layers_mut().iter_mut().zip(
        dec_grads
            .weights
            .iter()
            .zip(dec_grads.biases.iter())
            .zip(dec_states.iter_mut())
            .map(|((w, bias), s)| (w, bias, s)),
    ) {
        states.0.step(layer.weights_mut(), grads_w)?;
        states.1.step(layer.bias_mut(), grads_b)?;
    }

    Ok(total)
}

/// Minimal pair with empty stacks; only bottleneck metadata is meaningful.
#[cfg(test)]
pub(crate) fn tiny_pair_for_tests(bottleneck: usize) -> super::CodecPair {
    let model = |kind| VaeModel {
        encoder: DenseStack::new(vec![]).unwrap(),
        decoder: DenseStack::new(vec![]).unwrap(),
        bottleneck,
        input_dim: HALF_LEN,
        data_kind: kind,
        version: 1,
        norm: ChannelNorm::identity(AMP_CHANNELS),
        training_meta: TrainingMeta {
            epochs: 0,
            loss_history: vec![],
            seed: 0,
        },
    };
    super::CodecPair::new(model(DataKind::Amplitude), model(DataKind::Phase)).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::vae::EncodeMode;

    fn toy_matrix(rows: usize, seed: u64) -> Array<f32> {
        // 1-D samples drawn from two clusters.
        let mut rng = rng_from_seed(seed);
        let data: Vec<f32> = (0..rows)
            .map(|_| {
                let c = if rng.gen_bool(0.5) { -1.0 } else { 1.0 };
                c + rng.gen_range(-0.1..0.1)
            })
            .collect();
        Array::from_vec(&[rows, 1], data).unwrap()
    }

    fn toy_config(epochs: u32) -> VaeTrainConfig {
        VaeTrainConfig {
            bottleneck: 1,
            hidden: vec![8],
            epochs,
            batch_size: 16,
            alpha: 0.01,
            kl_beta: 1e-3,
            logvar_bias_init: -4.0,
            seed: 11,
        }
    }

    #[test]
    fn toy_reconstruction_loss_halves() {
        let x = toy_matrix(64, 3);
        let m = train_vae_on_matrix(&x, ChannelNorm::identity(1), DataKind::Amplitude, &toy_config(200))
            .unwrap();
        let h = &m.training_meta.loss_history;
        assert_eq!(h.len(), 200);
        assert!(
            h[199] <= 0.5 * h[0],
            "expected >=50% drop, got {} -> {}",
            h[0],
            h[199]
        );
        assert!(h[199] <= h[0]);
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let x = toy_matrix(8, 5);
        let a = train_vae_on_matrix(&x, ChannelNorm::identity(1), DataKind::Amplitude, &toy_config(0))
            .unwrap();
        let cfg2 = toy_config(0);
        let b = train_vae_on_matrix(&x, ChannelNorm::identity(1), DataKind::Amplitude, &cfg2).unwrap();
        assert_eq!(a.encoder, b.encoder);
        assert_eq!(a.decoder, b.decoder);
        assert!(a.training_meta.loss_history.is_empty());
    }

    #[test]
    fn same_seed_reproduces_identical_model() {
        let x = toy_matrix(32, 7);
        let cfg = toy_config(20);
        let a = train_vae_on_matrix(&x, ChannelNorm::identity(1), DataKind::Phase, &cfg).unwrap();
        let b = train_vae_on_matrix(&x, ChannelNorm::identity(1), DataKind::Phase, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn divergent_run_aborts_with_diagnostic() {
        let x = toy_matrix(32, 7);
        let mut cfg = toy_config(50);
        cfg.alpha = 1e18;
        let err = train_vae_on_matrix(&x, ChannelNorm::identity(1), DataKind::Amplitude, &cfg);
        assert!(matches!(err, Err(CodecError::Diverged { .. })));
    }

    #[test]
    fn trained_round_trip_beats_mean_predictor() {
        // Reconstruction MSE on held-out data must beat predicting the mean,
        // i.e. stay below the input variance.
        let x = toy_matrix(128, 13);
        let m = train_vae_on_matrix(&x, ChannelNorm::identity(1), DataKind::Amplitude, &toy_config(300))
            .unwrap();
        let test = toy_matrix(64, 14);
        let mean = test.as_slice().iter().sum::<f32>() / test.len() as f32;
        let variance = test
            .as_slice()
            .iter()
            .map(|v| (v - mean).powi(2))
            .sum::<f32>()
            / test.len() as f32;
        let mut mse = 0.0f32;
        for &v in test.as_slice() {
            let emb = m.encode(&[v], EncodeMode::Deterministic).unwrap();
            let rec = m.decode(&emb.z).unwrap();
            mse += (rec[0] - v).powi(2);
        }
        mse /= test.len() as f32;
        assert!(
            mse < variance,
            "trained codec (mse {mse}) must beat the mean predictor (var {variance})"
        );
    }
}
