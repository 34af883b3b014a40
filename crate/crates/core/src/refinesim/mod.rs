//! Desk-scale teacher/student refinement loop.
//!
//! A map is rendered from Gaussian blobs, a moment-based soft box predictor
//! is calibrated against the boxes the teacher pipeline extracts, and then,
//! with the predictor frozen, the blob parameters are refined by gradient
//! descent on the union-box set loss plus a squared-difference regularizer
//! toward the original map.

mod demo;
mod optimize;
mod render;
mod soft;

pub use demo::{calibration_dataset, run_demo, DemoConfig, DemoReport};
pub use optimize::{phase1_fit, phase2_refine, reg_loss_f, top_extracted_box, FitResult, RefineResult, Schedule};
pub use render::{render, render_vjp, Blob, BlobParams};
pub use soft::{soft_boxes, soft_boxes_vjp, Calibration, Moments, VARIANCE_FLOOR};
