//! CSI-based physical-layer authentication, end to end.
//!
//! The crate simulates correlated Rician channel observations for an
//! enrollment phase and a later authentication phase, preprocesses them with
//! PCA / robust PCA / adaptive robust PCA (a temporally regularized principal
//! component pursuit solved by ADMM), quantizes the low-rank parts with a
//! Lloyd-Max quantizer and Gray mapping, reconciles the two phases' bit
//! sequences with a CRC-aided successive-cancellation-list polar code, and
//! finally runs the hypothesis test that accepts or rejects the transmitter.
//!
//! Modules mirror the pipeline stages:
//!
//! * [`channel_sim`] — Rician + Gauss-Markov channel generation.
//! * [`numkernel`] — SVD, singular-value thresholding, soft thresholding, norms.
//! * [`preprocess`] — PCA, PCP-ADMM, and the adaptive TR-PCP solver.
//! * [`quantizer`] — Lloyd-Max design, Gray mapping, block assembly, BMR.
//! * [`polar`] — GA construction, polar transform, CRC, SC/SCL decoding.
//! * [`reconcile`] — Slepian-Wolf enrollment/authentication over the polar code.
//! * [`metrics`] — decision rule, ROC, EER, post-reconciliation error.
//! * [`harness`] — experiment configs, Monte-Carlo sweeps, CSV ingest/emit.

pub mod channel_sim;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod numkernel;
pub mod polar;
pub mod preprocess;
pub mod quantizer;
pub mod reconcile;

pub use error::{Error, Result};
