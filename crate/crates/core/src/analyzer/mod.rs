//! Block-level texture classification: patch preparation, a synthetic
//! training set, classifier training, and per-frame masks.

mod dataset;
mod mask;
mod patches;
mod segment;
mod train;

pub use dataset::{non_texture_patch, synthesize_dataset, texture_patch, texture_patch_of, DatasetConfig};
pub use mask::{clean_mask, load_masks, mask_path, probs_path, save_masks, TextureMask, DEFAULT_THRESHOLD};
pub use patches::{
    frame_block_rgb, normalize, DATASET_MAGIC, DATASET_VERSION, prepare_patches, resize_area, ycbcr_to_rgb, PatchDataset, RgbImage, NON_TEXTURE,
    PATCH, PATCH_LEN, TEXTURE,
};
pub use segment::{frame_cells, segment_frame, segment_sequence};
pub use train::{
    evaluate, inverse_frequency_weights, predict, texture_probs, train_classifier, Confusion, EpochLog, TrainLog,
    TrainOptions,
};

use thiserror::Error;

use crate::nn::NnError;

#[derive(Debug, Error)]
pub enum AnalyzerError {
    #[error("mask grid {mask:?} does not match frame grid {frame:?}")]
    MaskSize { mask: (usize, usize), frame: (usize, usize) },
    #[error("bad mask file: {0}")]
    MaskFormat(String),
    #[error("missing mask: {0}")]
    MissingMask(String),
    #[error("source image {width}x{height} is smaller than the {crop}x{crop} crop")]
    SourceTooSmall { width: usize, height: usize, crop: usize },
    #[error("bad dataset file: {0}")]
    DatasetFormat(String),
    #[error("dataset must contain both classes")]
    SingleClass,
    #[error("training diverged (non-finite loss) in epoch {epoch}")]
    Diverged { epoch: usize },
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
