//! Multiple testing with sign declarations under directional false discovery
//! rate (FDR_dir) control.
//!
//! A discovery here is a rejected index together with a declared sign for its
//! effect; a discovery is false when the declared sign differs from the true
//! sign of the effect (declaring any sign for a zero effect is false). The
//! crate provides:
//!
//! * classical step-up procedures over two-sided p-values ([`classical`]),
//!   including the adaptive null-proportion variant and its automatic
//!   tuning-parameter selection,
//! * a masking-based interactive procedure ([`zdirect`]) that iteratively
//!   unmasks statistics while an estimate of the directional FDR stays above
//!   the target,
//! * the unimodal mixture prior machinery behind it ([`mixture`]),
//! * oracle benchmarks and the adaptive-shrinkage procedure ([`oracle`]),
//! * a reproducible Monte-Carlo study harness ([`sim`]).
//!
//! All procedures consume a [`ZSample`]: z-values paired with their known
//! symmetric null distributions ([`NullFamily`]).

pub mod classical;
pub mod error;
pub mod mixture;
pub mod normal;
pub mod null;
pub mod oracle;
pub mod rng;
pub mod sim;
pub mod zdirect;

pub use classical::{DecisionSet, StoreyConfig};
pub use error::{Error, Result};
pub use mixture::{MixtureModel, PenaltyConfig, SupportGrid};
pub use null::{MaskedValues, NullFamily, ZSample};
pub use oracle::SimPrior;
pub use sim::{MethodId, SimConfig, SimResult};
pub use zdirect::ZdirectConfig;
