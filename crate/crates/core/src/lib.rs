pub mod classify;
pub mod cli;
pub mod error;
pub mod extensions;
pub mod linalg;
pub mod primitives;
pub mod random;
pub mod solver;
pub mod spectral;
pub mod system;

pub use error::{Error, Result};
pub use primitives::{c, canonical_skew, CMatrix, DiscreteInterval, MatrixSeq, RealSeq, Trajectory, C64};
