//! Denoising and scribble segmentation built on the learner.

pub mod dataset;
pub mod denoise;
mod grid;
pub mod kmeans;
pub mod multilabel_demo;
pub mod segment;

pub use grid::{encode_mask_png, load_mask, save_mask, ImageGrid, ScribbleMask, SCRIBBLE_BG, SCRIBBLE_FG, SCRIBBLE_NONE};
