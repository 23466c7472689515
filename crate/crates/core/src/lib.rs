//! Simulation and theory for the long-range percolation random matrix
//! ensemble `H(i,j) = a(i,j)·d(i,j)/√b`, where `d` is a Bernoulli mask with
//! connection probability `ψ((i−j)/b)`.
//!
//! The crate samples the ensemble ([`ensemble`]), computes spectra and
//! resolvent traces ([`spectra`]), runs Monte Carlo experiments
//! ([`montecarlo`]) and evaluates the closed-form predictions they are
//! compared with ([`theory`], [`profiles`], [`cumulant`]).

// `!(x > 0.0)` is used on purpose so that NaN is rejected with the bad values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cumulant;
pub mod ensemble;
pub mod error;
pub mod montecarlo;
pub mod profiles;
pub mod quad;
pub mod rng;
pub mod spectra;
pub mod theory;

pub use num_complex::Complex64;

pub use ensemble::{sample_matrix, EnsembleSpec, EntryDistribution, EntryKind, SampledMatrix};
pub use error::{Error, Result};
pub use montecarlo::{McOptions, McReport};
pub use profiles::{ExpansionData, Profile, ProfileKind, ProfileMoments};
pub use spectra::{ResolventTrace, SpectralSample, SymmetricMatrix};
pub use theory::TheoryContext;
