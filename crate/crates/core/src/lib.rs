//! Prioritized random linear coding (PRLC) of layered data, with exact MDP
//! planning and Q-learning of receiver request schedules.

pub mod codec;
pub mod config;
pub mod error;
pub mod galois;
pub mod mdp;
pub mod rl;
pub mod scalar;
pub mod sim;
pub mod subspace;

pub use codec::{encode_packet, DecodingBuffer, GenerationBuffer, GenerationSources, GenerationSpec, Packet};
pub use error::{Error, Result};
pub use galois::{Elem, EchelonBasis, Field, FieldMatrix, FieldOp};
pub use scalar::Probability;
pub use subspace::{gaussian_binomial, DimPmf, ProbabilityMode, RankVector, SubspaceLaws};

/// Exact rational probabilities.
pub type ExactProb = num_rational::BigRational;
