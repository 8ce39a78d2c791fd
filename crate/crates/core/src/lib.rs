//! Preprocessing, mask planning and reference numerics for masked
//! autoencoder pretraining on isolated sign-language video.
//!
//! A clip is a stack of frames with per-frame body keypoints and a body-part
//! segmentation. [`ingest`] parses and crops it, [`geometry`] trims resting
//! frames and classifies handedness, [`patchgrid`] maps parts onto the
//! `2x16x16` tube-token lattice, [`maskgen`] plans which tokens each stream
//! hides and reconstructs, [`heatmap`] renders the keypoint stream's input
//! and [`refmae`] pins down the training objectives and fusion arithmetic.

pub mod cli;
pub mod config;
pub mod error;
pub mod geometry;
pub mod heatmap;
pub mod ingest;
pub mod maskgen;
pub mod patchgrid;
pub mod pipeline;
pub mod refmae;
pub mod rng;
pub mod synth;
pub mod tokenset;

pub use config::{ChannelPolicy, Composite, PipelineConfig};
pub use error::{Error, Result};
pub use geometry::Handedness;
pub use ingest::{ClipBundle, ClipMeta, KeypointFrame, SegmentFrame, Side};
pub use maskgen::{generate, MaskPlan, Strategy, Stream};
pub use patchgrid::{RegionTokens, TokenGrid};
pub use tokenset::TokenSet;
