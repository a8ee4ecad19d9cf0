//! Symbolic perturbation calculus on expressions c·x^a·y^b·ψ^{(d)}(x).
//!
//! The operators Q act on such sums, P inverts the fast y-relaxation Q₁¹ on
//! the y-dependent part and P₀ keeps the y-free part. Running the recursion
//! up to order ν leaves the limiting drift in P₀φ[ν].

mod conjecture;
mod expr;
mod ops;
mod recursion;

pub use conjecture::{
    conjecture_drift, conjecture_drift_extended, conjecture_sum, conjecture_sum_extended,
};
pub use expr::{VExpression, VTerm, DROP_TOL};
pub use ops::{
    apply_operator, build_extended_q, build_standard_q, project_p, project_p0, CurveConstraint,
    OpKind, OperatorSet, OperatorSpec,
};
pub use recursion::{
    combo_check, p0_phi2_closed_form, p0_phi4_closed_form, perturb, perturb_from,
    triple_combo_check, PerturbationResult,
};
