//! Center-head-point oriented ship detection.
//!
//! Ships are described by a center, a head (bow) point, and a width and
//! length. The crate covers target encoding, decoding, losses, orientation
//! invariant kernels, size-prior rescoring, tiling, rotated NMS, evaluation
//! and the file formats that tie them together.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dataset_io;
pub mod detector_decoder;
pub mod error;
pub mod evaluator;
pub mod geometry;
pub mod gradcheck;
pub mod losses;
pub mod maps;
pub mod oim_kernels;
pub mod postprocess;
pub mod selftest;
pub mod size_prior;
pub mod target_encoder;
pub mod tiling;

pub use dataset_io::{AnnotationFile, ClassConfig, SceneSpec, TensorFile};
pub use detector_decoder::{decode_detections, extract_peaks, DecodeConfig, Peak};
pub use error::{Error, Result};
pub use evaluator::{evaluate, EvalReport};
pub use geometry::{angle_diff, chp_to_rbox, rbox_to_chp, rbox_to_quad, rotated_iou, ChpBox, Point, Quad, RBox};
pub use losses::{LossConfig, LossTerm};
pub use maps::{Cell, DetectionMaps};
pub use oim_kernels::{arf_convolve, orpool, Arf};
pub use postprocess::rotated_nms;
pub use size_prior::{refine_scores, ClassLengthTable};
pub use target_encoder::{encode_targets, EncodingConfig, TargetTensors};
pub use tiling::{make_slices, merge_detections, SliceSpec};
