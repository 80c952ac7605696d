//! Search for minimal-noise subsystems of noisy quantum channels.
//!
//! A noisy channel is given either in operator-sum (Kraus) form or as a
//! Lindblad generator. For a chosen block shape `N = N1*N2 + N3`, an encoding
//! unitary `U` places a logical state `rho1` as `rho1 (x) I/N2 (+) 0` and the
//! weight `p1` of the identity component of the resulting reduced channel on
//! the logical factor is maximized with BFGS. A value of `p1 = 1` identifies a
//! decoherence-free subsystem.
//!
//! Modules:
//! - [`tensor_algebra`]: dense complex helpers and the generalized Pauli basis.
//! - [`unitary`]: the phase/angle chart of the unitary group.
//! - [`noise`]: collective and perturbed noise models, Lindblad to Kraus.
//! - [`objective`]: the encoded channel, its coefficients and the objective.
//! - [`bfgs`] and [`search`]: the multi-start quasi-Newton search.
//! - [`fidelity`]: exact time evolution and worst-case fidelity.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bfgs;
pub mod error;
pub mod fidelity;
pub mod noise;
pub mod objective;
pub mod search;
pub mod simplex;
pub mod tensor_algebra;
pub mod unitary;

pub use error::{MnsError, Result};
pub use noise::{KrausChannel, LindbladModel, LindbladTerm};
pub use objective::{EncodingCandidate, EncodingDims, ReducedChannel};
pub use search::{SearchConfig, SearchResult};
pub use tensor_algebra::{ComplexMatrix, PauliBasis};
pub use unitary::UnitaryParams;

pub use num_complex::Complex64 as C64;
