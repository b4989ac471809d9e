//! Exact closed forms for `R_{θ,n}`: determinant, minors and inverse, all
//! in sign-tracked log space.
//!
//! Resolved sign table: every closed-form minor below returns the signed
//! determinant `|R_{-i,-j}|` itself, and inverse entries take the plain
//! cofactor sign `(-1)^{i+j}`. No further sign corrections are applied; the
//! sweep in `cofactor::tests::sign_sweep_all_cells` pins this down against
//! dense minors.

mod cofactor;
mod determinant;
mod inverse;
mod roots;
mod tau;

pub use cofactor::{canonicalize, cofactor_closed, cofactor_recurrence, CLOSED_FORM_MIN_N};
pub use determinant::{logdet_closed, logdet_recurrence};
pub use inverse::{inverse_entry, inverse_matrix, ClosedForm};
pub use roots::{minor_constants, roots, AxisScalars, MinorConstants, RootPair};
pub use tau::{tau_in, tau_values, Precision, TauFamily, TauKind, WIDE_PRECISION_THRESHOLD};
