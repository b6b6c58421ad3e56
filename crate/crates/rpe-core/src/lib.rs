//! Amplitude-exact simulation of single-photon interference, interaction-free
//! measurement, and post-selected entanglement between distant atoms.
//!
//! The crate is organized around a sparse Fock-space substrate:
//!
//! - [`fock`] — labeled tensor-product state spaces, sparse pure states,
//!   density matrices, partial trace.
//! - [`optics`] — sources, beam splitters, phase shifters, detectors.
//! - [`atoms`] — spin-box preparation, absorptive photon–atom interaction,
//!   box reunification, and the three-level emission scheme.
//! - [`measurement`] — post-selection, spin correlations, CHSH, concurrence,
//!   and a seeded Born-rule sampler.
//! - [`experiments`] — six canned scenarios wired from the modules above.
//! - [`report`] — the structured, serializable run report.
//!
//! Every value is immutable after construction and every operation is a
//! pure function returning a new value, so states and reports can be
//! shared or moved across threads freely. Sampling draws one counter-based
//! stream per shot, which makes aggregate counts independent of execution
//! order.

pub mod atoms;
pub mod error;
pub mod experiments;
pub mod fock;
pub mod measurement;
pub mod optics;
pub mod report;

pub use error::{Result, SimError};
pub use fock::{BasisKet, DensityMatrix, PureState, StateSpace, SubsystemKind, SubsystemLabel};
