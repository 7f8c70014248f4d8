//! Evaluation toolkit for dense video captioning of surveillance footage.
//!
//! The crate covers the non-neural parts of a proposal → caption → label
//! pipeline:
//!
//! * [`segments`]: temporal segments, tIoU and greedy non-maximum suppression.
//! * [`caption_metrics`]: tokenization, BLEU@1–4 and METEOR.
//! * [`detection`]: precision/recall curves, AP and mAP over temporal detections.
//! * [`tuner`]: genetic-algorithm search for the NMS threshold.
//! * [`corpus`]: caption / summary file formats and text normalization.
//! * [`classifier`]: bag-of-n-grams logistic regression baseline.

pub mod caption_metrics;
pub mod classifier;
pub mod corpus;
pub mod detection;
mod error;
pub mod segments;
pub mod tuner;

pub use error::{Error, Result};
pub use segments::{nms, tiou, ProposalSet, TemporalSegment};
