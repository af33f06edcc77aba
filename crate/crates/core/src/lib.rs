//! Discrete Dirac operators with zigzag boundary conditions on voxelized
//! domains, sparse Hermitian eigensolvers, and checks of the supersymmetric
//! correspondence between the Dirac spectrum and the induced Laplacian.

pub mod algebra;
pub mod assembly;
pub mod cli;
pub mod config;
pub mod domain;
pub mod eigen;
pub mod error;
pub mod modes;
pub mod report;
pub mod sparse;
pub mod spectral_map;
pub mod susy;

pub use error::{Error, Result};
