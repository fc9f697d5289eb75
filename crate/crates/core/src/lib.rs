//! Transport transforms (CDT, R-CDT, LOT) for signals and images, and tools
//! for checking when classes generated by diffeomorphism groups become
//! convex in transform space.

pub mod cdt;
pub mod diffeo1d;
pub mod diffeo2d;
pub mod error;
pub mod experiments;
pub mod image;
pub mod io;
pub mod lab;
pub mod lot;
pub mod monotone;
pub mod oracle;
pub mod radon;
pub mod signal;
pub mod verify;

pub use cdt::TransportMap1D;
pub use diffeo1d::{Diffeo1D, GroupKind, GroupSpec1D};
pub use diffeo2d::{Diffeo2D, Profile};
pub use error::{Error, Result};
pub use image::{Grid2D, Image2D};
pub use lot::{PrMember, TransportMap2D};
pub use monotone::MonotoneTable;
pub use oracle::CouplingPlan;
pub use signal::{Grid1D, Signal1D};
