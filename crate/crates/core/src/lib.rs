//! Numerical toolkit for self-adjoint S-nodes: the frame `𝔄(S,z)` and its
//! identities, linear-fractional Herglotz functions generated by property-J
//! pairs, boundary densities and their outer spectral factors, and a
//! verifier for the entropy bound `2πG(z)*G(z) ≤ ρ(z,z̄)⁻¹`.

// `!(x > 0.0)` is used on purpose so that NaN takes the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod conformal;
pub mod entropy;
pub mod error;
pub mod frame;
pub mod lft;
pub mod linalg;
pub mod report;
pub mod snode;
pub mod specfact;

pub use conformal::{CircleGrid, DensityGrid, MoebiusMap};
pub use entropy::{EntropyReport, EntropyVerification, GrowthReport, SmirnovReport};
pub use error::{Error, Result};
pub use frame::{FrameSample, JReport, RhoValue};
pub use lft::{HerglotzEval, PairJ, PairReport};
pub use linalg::CMatrix;
pub use snode::{SNode, SpectrumReport, ToleranceSet, ValidationReport};
pub use specfact::{CertificateReport, SpectralFactor, SzegoReport};
