//! Limited-aperture far-field recovery and qualitative imaging for 2D
//! acoustic scattering.
//!
//! The crate generates multi-static response (MSR) matrices for sound-soft
//! obstacles, removes observation directions and adds noise, recovers the
//! missing data by alternating Tikhonov-regularized layer-potential fits with
//! reciprocity completion, and images the obstacle with the direct sampling
//! and factorization indicators.

pub mod commands;
pub mod config;
pub mod error;
pub mod forward;
pub mod geometry;
pub mod imaging;
pub mod io;
pub mod msr;
pub mod recovery;
pub mod specfun;

pub use error::{Error, Result};
pub use geometry::{Curve, Vec2};
pub use msr::{DirectionGrid, MsrMatrix, NoiseSpec, Provenance};
pub use recovery::{ArtificialBoundary, Method, RecoverySchedule};
