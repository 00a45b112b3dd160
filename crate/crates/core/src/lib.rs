//! Simulation laboratory for frequency-bin-encoded microwave photons.
//!
//! The pipeline runs from a driven three-level emitter coupled to a hybridized
//! pair of waveguide modes, through capture of the two emitted temporal modes,
//! noisy moment measurement and denoising, to state and process tomography and a
//! loss-heralding analysis.
//!
//! Units: user-facing frequencies are linear (GHz or MHz). The dynamics work in
//! microseconds and angular frequency `rad/μs`, so `ω = 2π · f[MHz]`.

pub mod detection;
pub mod device;
pub mod dynamics;
pub mod error;
pub mod heralding;
pub mod linalg;
pub mod tomography;

pub use error::{Error, Result, Warning};
