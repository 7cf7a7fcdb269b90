#![allow(clippy::neg_cmp_op_on_partial_ord)]
//! Lyapunov-condition checks and Gaussian-integrability certificates for
//! diffusion and birth-death generators.
//!
//! The crate is organised by generator family:
//!
//! - [`expr`]: parsed symbolic expressions with exact differentiation.
//! - [`diffusion`]: `L = Δ − ∇V·∇`, Lyapunov defects and constant fitting.
//! - [`unbounded`]: generators `L_a` with a position-dependent diffusion matrix.
//! - [`jump`]: birth-death chains, intrinsic metric and series verdicts.
//! - [`gozlan`]: the `ω`-weighted condition and its moment certificate.
//! - [`moments`]: moment recursions, factorial envelopes, exponential bounds.
//! - [`oracle`]: quadrature, series summation, Metropolis sampling and
//!   finite-difference audits used as independent ground truth.

pub mod diffusion;
pub mod expr;
pub mod gozlan;
pub mod grid;
pub mod jump;
pub mod moments;
pub mod oracle;
pub mod rounding;
pub mod unbounded;

pub use diffusion::{DefectScan, DiffusionProblem, LyapunovConstants, WeakLyapunovConstants};
pub use expr::{parse, parse_with, Derivatives, EvalError, Expr, ParseError};
pub use gozlan::{GozlanConstants, GozlanParameters};
pub use grid::GridSpec;
pub use jump::{BirthDeathChain, JumpAdmissibility};
pub use moments::{CertificateKind, MomentCertificate};
pub use oracle::{OracleReport, Verdict};
pub use unbounded::UnboundedProblem;
