//! Dissipative quantum Fisher information for Lindblad dynamics.
//!
//! Density matrices are row-stacked into Liouville-space vectors, the
//! Lindblad generator becomes a non-Hermitian supermatrix, and parameter
//! sensitivity is carried by the dissipative generator
//! Ξ = i(∂θU)U⁻¹ of the propagator U = e^{Lt}.

pub mod error;
pub mod linalg;
pub mod liouville;
pub mod generator;
pub mod spectral;
pub mod twolevel;
pub mod fisher;
pub mod pipeline;
pub mod dsl;

pub use error::{Error, Result};

/// A real quantity that may legitimately be infinite.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Extended {
    Finite(f64),
    Divergent,
}

impl Extended {
    pub fn finite(self) -> Option<f64> {
        match self {
            Extended::Finite(x) => Some(x),
            Extended::Divergent => None,
        }
    }
}

impl std::fmt::Display for Extended {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Extended::Finite(x) => write!(f, "{x}"),
            Extended::Divergent => f.write_str("inf"),
        }
    }
}
