//! Labeled datasets: generation, splitting, and the dataset file schema.

use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::container::{Container, Entry};
use crate::nn::Array;
use crate::rng::{derive_seed, rng_from_seed};

use super::synth::{sample_seed, synthesize_csi, CsiSample, FEATURE_LEN, SAMPLE_SHAPE};
use super::{CsiError, Result, Scene, WallSegment};

/// A set of samples sharing one scene.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub scene: Scene,
    pub samples: Vec<CsiSample>,
    pub seed: u64,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// SHA-256 over features and labels; the determinism fingerprint.
    pub fn content_hash(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        for s in &self.samples {
            for v in s.features.as_slice() {
                h.update(v.to_le_bytes());
            }
            h.update(s.label.0.to_le_bytes());
            h.update(s.label.1.to_le_bytes());
        }
        h.finalize().into()
    }
}

/// Generates `n` samples at seeded uniform positions inside the room.
///
/// Sample `i` depends only on `(scene, seed, i)`, so generation may be
/// partitioned across threads without changing the result.
pub fn generate_dataset(scene: &Scene, n: usize, seed: u64) -> Result<Dataset> {
    scene.validate()?;
    if n == 0 {
        return Err(CsiError::EmptyDataset);
    }
    let samples: Vec<CsiSample> = (0..n)
        .into_par_iter()
        .map(|i| {
            let root = sample_seed(seed, i as u64);
            let mut pos_rng = rng_from_seed(derive_seed(root, 0));
            let pos = (
                pos_rng.gen_range(0.0..=scene.room_width),
                pos_rng.gen_range(0.0..=scene.room_length),
            );
            synthesize_csi(scene, pos, derive_seed(root, 1))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        scene: scene.clone(),
        samples,
        seed,
    })
}

/// Seeded-shuffle split into `floor(n*f)` train and the rest test.
pub fn split_dataset(ds: Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(CsiError::DegenerateSplit(train_fraction));
    }
    let n = ds.len();
    let n_train = (n as f64 * train_fraction).floor() as usize;
    if n_train == 0 || n_train == n {
        return Err(CsiError::DegenerateSplit(train_fraction));
    }

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = rng_from_seed(seed);
    // Fisher-Yates; stable across platforms through ChaCha8.
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }

    let mut slots: Vec<Option<CsiSample>> = ds.samples.into_iter().map(Some).collect();
    let take = |slots: &mut Vec<Option<CsiSample>>, idx: &[usize]| -> Vec<CsiSample> {
        idx.iter().map(|&i| slots[i].take().expect("split indices disjoint")).collect()
    };
    let train = take(&mut slots, &order[..n_train]);
    let test = take(&mut slots, &order[n_train..]);

    Ok((
        Dataset {
            scene: ds.scene.clone(),
            samples: train,
            seed: ds.seed,
        },
        Dataset {
            scene: ds.scene,
            samples: test,
            seed: ds.seed,
        },
    ))
}

/// Writes the dataset into a `SEMORAN1` container.
pub fn save_dataset(ds: &Dataset, path: &Path) -> Result<()> {
    let c = dataset_to_container(ds)?;
    c.save(path)?;
    Ok(())
}

pub fn dataset_to_container(ds: &Dataset) -> Result<Container> {
    if ds.is_empty() {
        return Err(CsiError::EmptyDataset);
    }
    let mut c = Container::new();
    let s = &ds.scene;
    c.insert("scene/room", Entry::vec1(vec![s.room_width, s.room_length]))?;
    c.insert(
        "scene/ap_positions",
        Entry {
            dims: vec![3, 2],
            data: s.ap_positions.iter().flat_map(|&(x, y)| [x, y]).collect(),
        },
    )?;
    c.insert("scene/carrier_frequencies", Entry::vec1(s.carrier_frequencies.clone()))?;
    c.insert(
        "scene/reflectors",
        Entry {
            dims: vec![s.reflectors.len() as u32, 4],
            data: s
                .reflectors
                .iter()
                .flat_map(|w| [w.a.0, w.a.1, w.b.0, w.b.1])
                .collect(),
        },
    )?;
    c.insert_scalar("scene/path_loss_exponent", s.path_loss_exponent)?;
    c.insert_scalar("scene/packet_noise_std", s.packet_noise_std)?;
    c.insert_u64("meta/seed", ds.seed)?;

    let n = ds.len();
    let mut features = Vec::with_capacity(n * FEATURE_LEN);
    let mut labels = Vec::with_capacity(n * 2);
    for sm in &ds.samples {
        features.extend_from_slice(sm.features.as_slice());
        labels.push(sm.label.0);
        labels.push(sm.label.1);
    }
    c.insert(
        "data/features",
        Entry {
            dims: vec![
                n as u32,
                SAMPLE_SHAPE[0] as u32,
                SAMPLE_SHAPE[1] as u32,
                SAMPLE_SHAPE[2] as u32,
            ],
            data: features,
        },
    )?;
    c.insert(
        "data/labels",
        Entry {
            dims: vec![n as u32, 2],
            data: labels,
        },
    )?;
    Ok(c)
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let c = Container::load(path)?;
    dataset_from_container(&c)
}

pub fn dataset_from_container(c: &Container) -> Result<Dataset> {
    let room = c.get("scene/room")?;
    if room.data.len() != 2 {
        return Err(CsiError::BadFile("scene/room must hold [width, length]".into()));
    }
    let aps = c.get("scene/ap_positions")?;
    if aps.dims != [3, 2] {
        return Err(CsiError::BadFile("scene/ap_positions must be [3,2]".into()));
    }
    let refl = c.get("scene/reflectors")?;
    if refl.dims.len() != 2 || refl.dims[1] != 4 {
        return Err(CsiError::BadFile("scene/reflectors must be [n,4]".into()));
    }
    let scene = Scene {
        room_width: room.data[0],
        room_length: room.data[1],
        ap_positions: [
            (aps.data[0], aps.data[1]),
            (aps.data[2], aps.data[3]),
            (aps.data[4], aps.data[5]),
        ],
        carrier_frequencies: c.get("scene/carrier_frequencies")?.data.clone(),
        reflectors: refl
            .data
            .chunks_exact(4)
            .map(|w| WallSegment {
                a: (w[0], w[1]),
                b: (w[2], w[3]),
            })
            .collect(),
        path_loss_exponent: c.scalar("scene/path_loss_exponent")?,
        packet_noise_std: c.scalar("scene/packet_noise_std")?,
    };
    scene.validate()?;

    let feats = c.get("data/features")?;
    let labels = c.get("data/labels")?;
    if feats.dims.len() != 4
        || feats.dims[1] as usize != SAMPLE_SHAPE[0]
        || feats.dims[2] as usize != SAMPLE_SHAPE[1]
        || feats.dims[3] as usize != SAMPLE_SHAPE[2]
    {
        return Err(CsiError::BadFile(format!(
            "data/features dims {:?} do not match the sample shape",
            feats.dims
        )));
    }
    let n = feats.dims[0] as usize;
    if n == 0 {
        return Err(CsiError::EmptyDataset);
    }
    if labels.dims != [n as u32, 2] {
        return Err(CsiError::BadFile("data/labels dims do not match sample count".into()));
    }

    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let flat = &feats.data[i * FEATURE_LEN..(i + 1) * FEATURE_LEN];
        let label = (labels.data[i * 2], labels.data[i * 2 + 1]);
        if !scene.contains(label.0, label.1) {
            return Err(CsiError::BadFile(format!("label {label:?} outside the room")));
        }
        samples.push(CsiSample {
            features: Array::from_vec(&SAMPLE_SHAPE, flat.to_vec())
                .map_err(|e| CsiError::BadFile(e.to_string()))?,
            label,
        });
    }

    Ok(Dataset {
        scene,
        samples,
        seed: c.u64_bits("meta/seed")?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(n: usize, seed: u64) -> Dataset {
        generate_dataset(&Scene::default_scene(), n, seed).unwrap()
    }

    #[test]
    fn single_sample_label_is_the_drawn_position() {
        let ds = small(1, 42);
        assert_eq!(ds.len(), 1);
        let s = &ds.samples[0];
        assert!(ds.scene.contains(s.label.0, s.label.1));
        // Regenerating reproduces the same label and features.
        let again = small(1, 42);
        assert_eq!(ds.content_hash(), again.content_hash());
    }

    #[test]
    fn different_seeds_give_different_content() {
        assert_ne!(small(8, 1).content_hash(), small(8, 2).content_hash());
    }

    #[test]
    fn split_sizes_follow_floor_rule() {
        let ds = small(10, 3);
        let (train, test) = split_dataset(ds, 0.8, 11).unwrap();
        assert_eq!(train.len(), 8);
        assert_eq!(test.len(), 2);
    }

    #[test]
    fn split_is_a_partition() {
        let ds = small(12, 5);
        let all: std::collections::BTreeSet<_> = ds
            .samples
            .iter()
            .map(|s| s.label.0.to_bits())
            .collect();
        let (train, test) = split_dataset(ds, 0.5, 7).unwrap();
        let mut seen = std::collections::BTreeSet::new();
        for s in train.samples.iter().chain(test.samples.iter()) {
            assert!(seen.insert(s.label.0.to_bits()), "duplicate sample in split");
        }
        assert_eq!(seen, all);
    }

    #[test]
    fn degenerate_splits_are_rejected() {
        assert!(matches!(
            split_dataset(small(1, 0), 0.5, 0),
            Err(CsiError::DegenerateSplit(_))
        ));
        assert!(matches!(
            split_dataset(small(10, 0), 0.01, 0),
            Err(CsiError::DegenerateSplit(_))
        ));
        assert!(split_dataset(small(10, 0), 1.0, 0).is_err());
    }

    #[test]
    fn save_load_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ds.sem");
        let ds = small(4, 9);
        save_dataset(&ds, &path).unwrap();
        let back = load_dataset(&path).unwrap();
        assert_eq!(back, ds);
        // Re-serialization reproduces identical bytes.
        let a = dataset_to_container(&ds).unwrap().to_bytes();
        let b = dataset_to_container(&back).unwrap().to_bytes();
        assert_eq!(a, b);
    }

    #[test]
    fn truncated_dataset_file_is_rejected() {
        let ds = small(2, 1);
        let bytes = dataset_to_container(&ds).unwrap().to_bytes();
        for cut in [10usize, 100, bytes.len() / 2, bytes.len() - 1] {
            let c = crate::container::Container::read_from(&mut &bytes[..cut]);
            match c {
                Err(_) => {}
                Ok(partial) => {
                    assert!(dataset_from_container(&partial).is_err(), "cut {cut}");
                }
            }
        }
    }

    #[test]
    fn version_mismatch_is_surfaced() {
        let ds = small(1, 1);
        let mut bytes = dataset_to_container(&ds).unwrap().to_bytes();
        bytes[8..12].copy_from_slice(&7u32.to_le_bytes());
        let err = crate::container::Container::read_from(&mut bytes.as_slice()).unwrap_err();
        assert!(matches!(
            err,
            crate::container::ContainerError::UnsupportedVersion { found: 7, .. }
        ));
    }

    #[test]
    fn generation_is_parallelism_independent() {
        // Same seed across differently-sized thread pools.
        let a = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| small(16, 77));
        let b = small(16, 77);
        assert_eq!(a.content_hash(), b.content_hash());
    }
}
