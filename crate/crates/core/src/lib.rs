//! Numerical laboratory for Γₙ-contractions: tuples `(S₁, …, S_{n−1}, P)` of
//! commuting matrices with the symmetrized polydisc as a spectral set.
//!
//! Every routine is generic over the real scalar ([`Real`], implemented for
//! `f32` and `f64`). The aliases below fix `f64`, which is what the command
//! line tool and the acceptance suite use.

pub mod abstractmodel;
pub mod dilation;
pub mod error;
pub mod gammaops;
pub mod hardy;
pub mod invariants;
pub mod matcore;
pub mod polydisc;
pub mod scalar;

pub use error::{LabError, Result};
pub use matcore::{CMatrix, Subspace, Tolerances};
pub use scalar::Real;

/// Complex `f64` matrix.
pub type Mat = CMatrix<f64>;
/// Γₙ-tuple over `f64`.
pub type Tuple = gammaops::GammaTuple<f64>;
/// F_O-tuple over `f64`.
pub type FoTuple = gammaops::FundamentalTuple<f64>;
/// Truncated dilation over `f64`.
pub type Dilation = dilation::DilationTuple<f64>;
/// Asymptotic limits over `f64`.
pub type Asymptotics = abstractmodel::AsymptoticData<f64>;
/// Characteristic tuple over `f64`.
pub type CharacteristicTuple = invariants::CharTuple<f64>;
