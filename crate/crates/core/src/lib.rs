//! Classical and quantum sloppy baker map.
//!
//! The classical map squeezes the unit torus like the baker transformation
//! and then drops the top half by `Delta/2`, so strips overlap and the map
//! loses information. The quantum counterpart is a Kraus channel built from
//! the Balazs-Voros baker unitary and momentum projectors.

pub mod classical;
pub mod error;
pub mod io;
pub mod numerics;
pub mod phasespace;
pub mod quantum;
pub mod spectral;

pub use error::{Error, Result};
pub use numerics::{ComplexMatrix, ComplexVector, C64};

/// Version of this crate, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
