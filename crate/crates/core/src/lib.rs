//! Three-dimensional FDTD solver for stacked silver-strip metamaterials.
//!
//! The crate is organised bottom-up:
//!
//! - [`grid`] and [`fdtd`]: Yee-grid state and leapfrog time stepping.
//! - [`materials`]: Drude permittivity and the auxiliary-current update.
//! - [`geometry`]: the three-strip unit cell, the isolated strip pair, voxelization.
//! - [`boundaries`]: CPML absorbers and periodic wrapping.
//! - [`sources`]: Gaussian pulses, TFSF boxes and periodic injection planes.
//! - [`monitors`]: on-the-fly DFT point probes, flux planes and field maps.
//! - [`analysis`]: spectra, extremum finding, sweep branch tracking and the
//!   field-symmetry score used to tell bright from dark modes.
//! - [`config`], [`scenario`] and [`output`]: configuration files, the
//!   scenario runner and on-disk formats.

pub mod analysis;
pub mod boundaries;
pub mod config;
pub mod constants;
pub mod error;
pub mod fdtd;
pub mod geometry;
pub mod grid;
pub mod materials;
pub mod monitors;
pub mod output;
pub mod scenario;
pub mod sources;

pub use error::{Error, Result};
pub use num_complex;
