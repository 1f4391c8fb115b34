//! Synthetic WiFi CSI: scene description, image-method multipath synthesis,
//! dataset generation/splitting, and dataset files.

mod dataset;
mod scene;
mod synth;

pub use dataset::{generate_dataset, load_dataset, save_dataset, split_dataset, Dataset};
pub use scene::{Scene, WallSegment};
pub use synth::{synthesize_csi, wrap_phase, CsiSample, AMP_CHANNELS, FEATURE_LEN, HALF_LEN, N_ANTENNAS, N_APS, N_PACKETS, N_SUBCARRIERS, SAMPLE_SHAPE};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CsiError {
    #[error("position ({0}, {1}) is outside the room")]
    OutsideRoom(f32, f32),
    #[error("scene is invalid: {0}")]
    BadScene(String),
    #[error("dataset must contain at least one sample")]
    EmptyDataset,
    #[error("train fraction {0} leaves one side of the split empty")]
    DegenerateSplit(f64),
    #[error("container: {0}")]
    Container(#[from] crate::container::ContainerError),
    #[error("dataset file is inconsistent: {0}")]
    BadFile(String),
}

pub type Result<T> = std::result::Result<T, CsiError>;
