//! Volumetric CT radiomics pipeline.
//!
//! A CT volume and its organ mask go in; a preprocessed region of interest,
//! a 107-entry radiomics feature vector, a boosted-tree classifier and
//! cross-validated metrics come out. The crate is organized by pipeline
//! stage:
//!
//! - [`grid`] and [`io`]: volumes, masks, NIfTI-1 files and feature tables
//! - [`preprocess`]: canonical reorientation and Gaussian denoising
//! - [`roi`]: bounding boxes, the proportional box expansion, cropping and
//!   2D slice export
//! - [`radiomics`]: first-order, shape and five texture-matrix families
//! - [`gbdt`]: second-order gradient boosted trees and grid search
//! - [`eval`]: stratified folds, classification and overlap metrics
//! - [`phantom`]: deterministic synthetic cases for testing
//! - [`config`] and [`cli`]: the command line front end

pub mod cli;
pub mod config;
pub mod error;
pub mod eval;
pub mod gbdt;
pub mod grid;
pub mod io;
pub mod phantom;
pub mod pipeline;
pub mod preprocess;
pub mod radiomics;
pub mod roi;

pub use error::{Error, Result};
pub use grid::{Geometry, Grid, Mask, Volume};
