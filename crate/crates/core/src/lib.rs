//! Generalized Dobrushin coefficients, spectral convergence rates and
//! Doeblin certificates for Markov operators on finite-dimensional
//! base-norm spaces.
//!
//! Operators act on columns: a matrix `T` is Markov when it maps the base
//! `K = {x ≥ 0 : f(x) = 1}` into itself, which on the simplex means
//! nonnegative entries and unit column sums.

pub mod coefficients;
pub mod corpus;
pub mod doeblin;
pub mod linalg;
pub mod operators;
pub mod spectral;
pub mod statespace;

pub use coefficients::{
    check_coefficient_properties, delta, delta_bruteforce, delta_p, delta_p_matrix,
    eigenvalue_bound_check, kernel_ball_vertices, pair_formula, CoefficientError, DeltaMethod,
    DeltaResult, KernelPolytope,
};
pub use doeblin::{
    certificate_from_ergodicity, check_dp, check_dp_star, max_tau, search_certificate,
    verify_dp_star, DStarCertificate, DoeblinCertificate, DoeblinError,
};
pub use operators::{
    commutes, kronecker, sub_projection, validate_markov, MarkovOperator, MarkovProjection,
    OperatorError, ProjectionKind,
};
pub use spectral::{
    best_rate, classify, eigenvalues, gelfand_trail, multiplicativity_test, rate_profile,
    spectrum_shift_check, tensor_rate_bound, ClassifyOptions, ErgodicityVerdict, SpectralError,
    SpectralReport,
};
pub use statespace::{make_embedded, make_simplex, InnerBall, SpaceError, SpaceKind, StateSpace};
