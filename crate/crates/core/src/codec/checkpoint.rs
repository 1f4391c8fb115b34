//! VAE checkpoints in the `SEMORAN1` container.

use std::path::Path;

use crate::container::{Container, Entry};
use crate::nn::{Activation, Array, DenseLayer, DenseStack};

use super::vae::{ChannelNorm, DataKind, TrainingMeta, VaeModel};
use super::{CodecError, Result};

fn push_stack(c: &mut Container, prefix: &str, stack: &DenseStack<f32>) -> Result<()> {
    c.insert_scalar(&format!("{prefix}/n_layers"), stack.layers().len() as f32)?;
    for (i, layer) in stack.layers().iter().enumerate() {
        c.insert(
            &format!("{prefix}/{i}/w"),
            Entry {
                dims: vec![layer.out_dim() as u32, layer.in_dim() as u32],
                data: layer.weights().as_slice().to_vec(),
            },
        )?;
        c.insert(&format!("{prefix}/{i}/b"), Entry::vec1(layer.bias().as_slice().to_vec()))?;
        c.insert_scalar(&format!("{prefix}/{i}/act"), layer.activation().code() as f32)?;
    }
    Ok(())
}

fn pull_stack(c: &Container, prefix: &str) -> Result<DenseStack<f32>> {
    let n = c.scalar(&format!("{prefix}/n_layers"))? as usize;
    let mut layers = Vec::with_capacity(n);
    for i in 0..n {
        let w = c.get(&format!("{prefix}/{i}/w"))?;
        if w.dims.len() != 2 {
            return Err(CodecError::BadCheckpoint(format!("{prefix}/{i}/w must be rank 2")));
        }
        let b = c.get(&format!("{prefix}/{i}/b"))?;
        let act_code = c.scalar(&format!("{prefix}/{i}/act"))? as u32;
        let act = Activation::from_code(act_code)
            .ok_or_else(|| CodecError::BadCheckpoint(format!("unknown activation code {act_code}")))?;
        let weights = Array::from_vec(&[w.dims[0] as usize, w.dims[1] as usize], w.data.clone())
            .map_err(|e| CodecError::BadCheckpoint(e.to_string()))?;
        if !weights.all_finite() {
            return Err(CodecError::BadCheckpoint(format!("{prefix}/{i}/w has non-finite values")));
        }
        let bias = Array::vector(b.data.clone());
        layers.push(
            DenseLayer::new(weights, bias, act).map_err(|e| CodecError::BadCheckpoint(e.to_string()))?,
        );
    }
    DenseStack::new(layers).map_err(|e| CodecError::BadCheckpoint(e.to_string()))
}

pub fn vae_to_container(model: &VaeModel) -> Result<Container> {
    let mut c = Container::new();
    c.insert_scalar("codec/bottleneck", model.bottleneck as f32)?;
    c.insert_scalar("codec/input_dim", model.input_dim as f32)?;
    c.insert_scalar("codec/data_kind", model.data_kind.code() as f32)?;
    c.insert_scalar("codec/version", model.version as f32)?;
    c.insert_u64("codec/seed", model.training_meta.seed)?;
    c.insert_scalar("codec/epochs", model.training_meta.epochs as f32)?;
    c.insert("codec/loss_history", Entry::vec1(model.training_meta.loss_history.clone()))?;
    c.insert("norm/min", Entry::vec1(model.norm.mins.clone()))?;
    c.insert("norm/span", Entry::vec1(model.norm.spans.clone()))?;
    push_stack(&mut c, "enc", &model.encoder)?;
    push_stack(&mut c, "dec", &model.decoder)?;
    Ok(c)
}

pub fn vae_from_container(c: &Container) -> Result<VaeModel> {
    let bottleneck = c.scalar("codec/bottleneck")? as usize;
    let input_dim = c.scalar("codec/input_dim")? as usize;
    let kind_code = c.scalar("codec/data_kind")? as u32;
    let data_kind = DataKind::from_code(kind_code)
        .ok_or_else(|| CodecError::BadCheckpoint(format!("unknown data kind {kind_code}")))?;
    let encoder = pull_stack(c, "enc")?;
    let decoder = pull_stack(c, "dec")?;
    if encoder.out_dim() != 2 * bottleneck {
        return Err(CodecError::BadCheckpoint(format!(
            "encoder output {} != 2 x bottleneck {}",
            encoder.out_dim(),
            bottleneck
        )));
    }
    if decoder.out_dim() != input_dim || decoder.in_dim() != bottleneck {
        return Err(CodecError::BadCheckpoint("decoder geometry mismatch".into()));
    }
    let norm = ChannelNorm {
        mins: c.get("norm/min")?.data.clone(),
        spans: c.get("norm/span")?.data.clone(),
    };
    if norm.mins.len() != norm.spans.len() || norm.mins.is_empty() {
        return Err(CodecError::BadCheckpoint("norm stats malformed".into()));
    }
    Ok(VaeModel {
        encoder,
        decoder,
        bottleneck,
        input_dim,
        data_kind,
        version: c.scalar("codec/version")? as u32,
        norm,
        training_meta: TrainingMeta {
            epochs: c.scalar("codec/epochs")? as u32,
            loss_history: c.get("codec/loss_history")?.data.clone(),
            seed: c.u64_bits("codec/seed")?,
        },
    })
}

pub fn save_vae(model: &VaeModel, path: &Path) -> Result<()> {
    vae_to_container(model)?.save(path)?;
    Ok(())
}

pub fn load_vae(path: &Path) -> Result<VaeModel> {
    vae_from_container(&Container::load(path)?)
}
