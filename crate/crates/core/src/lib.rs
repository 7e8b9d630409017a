//! Steady states and photon correlations of laser-driven atom chains.
//!
//! The crate models a chain of `N` atoms coupled either by the dipole-dipole
//! interaction (two-level atoms) or by a van-der-Waals shift between Rydberg
//! states (three-level ladder atoms). From the steady state of the master
//! equation it computes first- and second-order correlation functions of the
//! scattered light for pairs of detector angles, splits `G2` into the parts
//! involving 2, 3 and 4 distinct atoms, and locates detection directions where
//! individual `n`-atom correlations are directly visible.
//!
//! Units: all rates and frequencies are in units of the lower-transition decay
//! rate `gamma_p`, all lengths in units of the probe wavelength `lambda_p`.
//!
//! Pipeline:
//!
//! 1. [`SystemSpec`] describes geometry, drives and interaction.
//! 2. [`couplings`] derives pairwise coupling matrices.
//! 3. [`dynamics`] assembles the Liouvillian and solves for the steady state.
//! 4. [`correlations`] tabulates all angle-independent expectation values once
//!    and evaluates `G1`, `G2` and their decompositions per detector pair.
//! 5. [`scanner`] sweeps angle grids, extracts contours and runs the two
//!    measurement protocols; [`pipeline`] drives everything from a config file.

pub mod config;
pub mod contour;
pub mod correlations;
pub mod couplings;
pub mod dynamics;
mod error;
pub mod heatmap;
pub mod pipeline;
pub mod quantum;
pub mod scanner;
pub mod sparse;

pub use error::{Error, Result};
pub use quantum::{
    DensityMatrix, Interaction, Level, LevelScheme, MultiAtomOperator, RydbergStrength, SystemSpec,
};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
