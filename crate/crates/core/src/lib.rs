//! Exact pseudo-differential operator calculus for the BKP and CKP
//! integrable hierarchies.
//!
//! Everything here is computed over exact rational arithmetic: differential
//! polynomials in the dependent variables `u2, u3, ...`, Laurent series in
//! the derivation `D` with polynomial coefficients, and closed-form
//! operators with `D^-1` integral tails.  On top of the operator ring sit
//! the hierarchy constructions: Lax operators and their powers, the odd
//! variable elimination induced by the adjoint constraint, flow equations,
//! `(2n+1)`-reductions, and the recursion operators of the reduced systems.
//!
//! Design notes
//! ------------
//! * Truncation is tracked, never silent.  A Laurent operator either knows
//!   itself exactly or carries an explicit cutoff; any composition whose
//!   requested window cannot be filled from the known coefficients fails
//!   with [`CalcError::InsufficientCutoff`] rather than returning a wrong
//!   answer.
//! * All comparisons in the crate and its tests are exact; there is no
//!   floating point anywhere.
//! * Text output is canonical and round-trips through the parsers in
//!   [`textform`], so frozen expectation strings stay readable.

pub mod diffpoly;
pub mod error;
pub mod hierarchy;
pub mod pdo;
pub mod recursion;
pub mod textform;

pub use diffpoly::{rat, rat_int, DiffPoly, Monomial, Rational, VarDeriv};
pub use error::{CalcError, CalcResult};
pub use hierarchy::{
    b_operator, b_operator_by_composition, constraint_residual, eliminate_odd,
    even_residual_check, flow, make_lax, o_operator, q_operator, reduce, reduced_flow,
    EliminationTable, HierarchyKind, LaxSpec, Reduction,
};
pub use pdo::{binom, LaurentPDO, NonlocalPDO};
pub use recursion::{
    hat_phi_operator, kp_phi_operator, phi_action, scaling_transform, OpMatrix,
    RecursionContext, RecursionMatrices,
};
