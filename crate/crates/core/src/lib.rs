//! Exact cut-and-project schemes and model sets.
//!
//! The crate builds cut-and-project schemes over a concrete family of
//! internal spaces, enumerates model-set patches exactly, performs the
//! translation, injective-extension and window-augmentation constructions,
//! and checks densities, Fourier-Bohr coefficients and hull statements on
//! finite boxes.

pub mod analysis;
pub mod cli;
pub mod error;
pub mod hull;
pub mod linalg;
pub mod relation;
pub mod scalar;
pub mod scheme;
pub mod space;
pub mod substitution;
pub mod transforms;
pub mod window;

pub use error::{Error, Result};
pub use scalar::{Scalar, Surd};
pub use scheme::{CutProjectScheme, DirectBox, Generator, Patch};
pub use space::{Coord, Descriptor, Factor, HPoint};
pub use window::{Interval, IntervalSet, Region, TorusRegion, Window};
