//! Doeblin-type certificates.
//!
//! Two minorization conditions are handled, both on lattice (simplex-type)
//! spaces where the positive part `x₊` exists:
//!
//! * `T^{n₀}x + φ_x ≥ τQx` with `‖φ_x‖ ≤ τ/4`, equivalent to uniform
//!   `P`-ergodicity;
//! * `T^{n₀}x ≥ u_x`, `Qx ≥ u_x` with `f(u_x) ≥ λ > 1/2`, which is sufficient.
//!
//! Both are quantified over every state `x ∈ K` but checked at base vertices
//! only. For the first, `x ↦ ‖(τQx − T^{n₀}x)₊‖` is convex (a norm of the
//! positive part of an affine map), so its maximum over `K` sits at a vertex,
//! and the vertex correctors interpolate to feasible correctors for every
//! `x`. For the second, `x ↦ f(min(T^{n₀}x, Qx))` is concave (a sum of minima
//! of linear functions), so its minimum over `K` is also attained at a vertex.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::coefficients::KernelPolytope;
use crate::operators::{MarkovOperator, MarkovProjection, ProjectionKind};
use crate::spectral::{classify, ClassifyOptions, SpectralError};

/// Smallest `τ` worth reporting; below it the instance is infeasible.
pub const MIN_TAU: f64 = 1e-6;
/// Bisection resolution for `τ`.
pub const TAU_RESOLUTION: f64 = 1e-9;
/// Certificate inequalities are checked to this tolerance.
pub const CERT_TOL: f64 = 1e-10;
/// Implied coefficient bounds are checked to this tolerance.
pub const IMPLIED_BOUND_TOL: f64 = 1e-9;
/// Default search horizon.
pub const DEFAULT_N0_CAP: usize = 200;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DoeblinError {
    #[error("Doeblin conditions need a lattice state space, got {0}")]
    Unsupported(&'static str),
    #[error("Q is not a sub-projection of P")]
    NotSubProjection,
    #[error("hypothesis not met: {0}")]
    Hypothesis(String),
    #[error("n0 must be positive")]
    ZeroPower,
    #[error("operator is not uniformly P-ergodic")]
    NotUniformlyErgodic,
    #[error("no n0 <= {cap} brings ||T^n - P|| below 1/4")]
    CapReached { cap: usize },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

#[derive(Debug, Clone)]
pub struct DoeblinCertificate {
    pub tau: f64,
    pub n0: usize,
    pub q: MarkovProjection,
    /// Corrector `φ_x` for each base vertex, in vertex order.
    pub phi: Vec<DVector<f64>>,
    pub sup_phi_norm: f64,
}

#[derive(Debug, Clone)]
pub struct DStarCertificate {
    pub lambda: f64,
    pub n0: usize,
    pub q: MarkovProjection,
    /// Common lower bound `u_x` for each base vertex.
    pub u: Vec<DVector<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CertificateViolation {
    TauOutOfRange { tau: f64 },
    LambdaOutOfRange { lambda: f64 },
    ZeroPower,
    NotSubProjection,
    TableSize { expected: usize, found: usize },
    CorrectorTooLarge { sup_norm: f64, bound: f64 },
    CorrectorNotPositive { vertex: usize, breach: f64 },
    MinorizationFails { vertex: usize, breach: f64 },
    LowerBoundAboveOperator { vertex: usize, breach: f64 },
    LowerBoundAboveProjection { vertex: usize, breach: f64 },
    LowerBoundMass { vertex: usize, mass: f64 },
    ImpliedBoundFails { bound: f64, actual: f64 },
}

impl fmt::Display for CertificateViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use CertificateViolation::*;
        match self {
            TauOutOfRange { tau } => write!(f, "tau = {tau} outside (0, 1]"),
            LambdaOutOfRange { lambda } => write!(f, "lambda = {lambda} outside (1/2, 1]"),
            ZeroPower => write!(f, "n0 = 0"),
            NotSubProjection => write!(f, "Q is not below P"),
            TableSize { expected, found } => {
                write!(f, "table has {found} entries, expected {expected}")
            }
            CorrectorTooLarge { sup_norm, bound } => {
                write!(f, "sup ||phi_x|| = {sup_norm} exceeds tau/4 = {bound}")
            }
            CorrectorNotPositive { vertex, breach } => {
                write!(f, "phi at vertex {vertex} leaves the cone by {breach:e}")
            }
            MinorizationFails { vertex, breach } => write!(
                f,
                "T^n0 x + phi_x - tau Qx leaves the cone by {breach:e} at vertex {vertex}"
            ),
            LowerBoundAboveOperator { vertex, breach } => {
                write!(f, "u_x exceeds T^n0 x by {breach:e} at vertex {vertex}")
            }
            LowerBoundAboveProjection { vertex, breach } => {
                write!(f, "u_x exceeds Qx by {breach:e} at vertex {vertex}")
            }
            LowerBoundMass { vertex, mass } => {
                write!(f, "f(u_x) = {mass} below lambda at vertex {vertex}")
            }
            ImpliedBoundFails { bound, actual } => {
                write!(f, "delta_P(T^n0) = {actual} exceeds the implied bound {bound}")
            }
        }
    }
}

/// Outcome of an independent certificate re-verification.
#[derive(Debug, Clone, PartialEq)]
pub struct CertificateCheck {
    pub violations: Vec<CertificateViolation>,
    /// `1 − τ/2` or `2(1 − λ)`.
    pub implied_bound: f64,
    /// `δ_P(T^{n₀})`, computed from scratch.
    pub actual_delta: f64,
}

impl CertificateCheck {
    pub fn valid(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Debug, Clone)]
pub enum TauOutcome {
    Feasible(DoeblinCertificate),
    /// `g(τ) > 0` already at the smallest `τ`; `gap` is that value.
    Infeasible { gap: f64 },
}

impl TauOutcome {
    pub fn certificate(&self) -> Option<&DoeblinCertificate> {
        match self {
            TauOutcome::Feasible(c) => Some(c),
            TauOutcome::Infeasible { .. } => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DStarOutcome {
    pub lambda: f64,
    pub certificate: Option<DStarCertificate>,
    pub implied_bound: f64,
    pub actual_delta: f64,
}

fn require_lattice(t: &MarkovOperator) -> Result<(), DoeblinError> {
    if !t.space().is_lattice() {
        return Err(DoeblinError::Unsupported(t.space().kind().name()));
    }
    Ok(())
}

fn require_hypotheses(
    t: &MarkovOperator,
    p: &MarkovProjection,
    q: &MarkovProjection,
) -> Result<(), DoeblinError> {
    require_lattice(t)?;
    if !q.sub_projection_of(p) {
        return Err(DoeblinError::NotSubProjection);
    }
    let fixes = t.fixes(p);
    let commutes = t.commutes(p);
    if !fixes.commutes || !commutes.commutes {
        return Err(DoeblinError::Hypothesis(format!(
            "TP = PT = P (defects {:.3e}, {:.3e})",
            fixes.defect, commutes.defect
        )));
    }
    Ok(())
}

/// `(Tⁿ, (T − P)ⁿ)`; the second is used for coefficients so that small
/// values keep full relative accuracy.
fn powers(t: &MarkovOperator, p: &MarkovProjection, n: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let tn = t.power(n as u64).matrix().clone();
    let deflated = crate::linalg::matrix_power(&(t.matrix() - p.matrix()), n as u64);
    (tn, deflated)
}

fn positive(x: DVector<f64>) -> DVector<f64> {
    x.map(|v| v.max(0.0))
}

/// `max_i ‖(τQeᵢ − Tⁿeᵢ)₊‖ − τ/4`, convex in `τ` with `g(0) = 0`.
fn gap(tn: &DMatrix<f64>, q: &DMatrix<f64>, tau: f64) -> f64 {
    let n = tn.ncols();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|k| (tau * q[(k, i)] - tn[(k, i)]).max(0.0))
                .sum::<f64>()
        })
        .fold(0.0, f64::max)
        - tau / 4.0
}

fn assemble(tn: &DMatrix<f64>, q: &MarkovProjection, tau: f64, n0: usize) -> DoeblinCertificate {
    let phi: Vec<DVector<f64>> = (0..tn.ncols())
        .map(|i| positive(q.matrix().column(i) * tau - tn.column(i)))
        .collect();
    let sup_phi_norm = phi.iter().map(|v| v.sum()).fold(0.0, f64::max);
    DoeblinCertificate {
        tau,
        n0,
        q: q.clone(),
        phi,
        sup_phi_norm,
    }
}

fn max_tau_for_power(tn: &DMatrix<f64>, q: &MarkovProjection, n0: usize) -> TauOutcome {
    let qm = q.matrix();
    if gap(tn, qm, 1.0) <= 0.0 {
        return TauOutcome::Feasible(assemble(tn, q, 1.0, n0));
    }
    let g_min = gap(tn, qm, MIN_TAU);
    if g_min > 0.0 {
        return TauOutcome::Infeasible { gap: g_min };
    }
    // Convexity and g(0) = 0 make {g ≤ 0} an interval containing 0.
    let (mut lo, mut hi) = (MIN_TAU, 1.0);
    while hi - lo > TAU_RESOLUTION {
        let mid = 0.5 * (lo + hi);
        if gap(tn, qm, mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    TauOutcome::Feasible(assemble(tn, q, lo, n0))
}

/// Largest `τ ∈ (0, 1]` for which `T^{n₀}x + φ_x ≥ τQx` admits correctors
/// with `‖φ_x‖ ≤ τ/4`; the minimal corrector is `(τQx − T^{n₀}x)₊`.
pub fn max_tau(
    t: &MarkovOperator,
    p: &MarkovProjection,
    q: &MarkovProjection,
    n0: usize,
) -> Result<TauOutcome, DoeblinError> {
    if n0 == 0 {
        return Err(DoeblinError::ZeroPower);
    }
    require_hypotheses(t, p, q)?;
    let tn = t.power(n0 as u64).matrix().clone();
    Ok(max_tau_for_power(&tn, q, n0))
}

/// Re-verifies every invariant of a `τ`-certificate from scratch and checks
/// the implied bound `δ_P(T^{n₀}) ≤ 1 − τ/2`.
pub fn check_dp(
    cert: &DoeblinCertificate,
    t: &MarkovOperator,
    p: &MarkovProjection,
) -> Result<CertificateCheck, DoeblinError> {
    require_lattice(t)?;
    let mut violations = Vec::new();
    if !(cert.tau > 0.0 && cert.tau <= 1.0) {
        violations.push(CertificateViolation::TauOutOfRange { tau: cert.tau });
    }
    if !cert.q.sub_projection_of(p) {
        violations.push(CertificateViolation::NotSubProjection);
    }
    let n = t.dim();
    if cert.phi.len() != n {
        violations.push(CertificateViolation::TableSize {
            expected: n,
            found: cert.phi.len(),
        });
    }
    let bound = cert.tau / 4.0;
    let recomputed = cert.phi.iter().map(|v| v.abs().sum()).fold(0.0, f64::max);
    let sup_norm = recomputed.max(cert.sup_phi_norm);
    if sup_norm > bound + CERT_TOL {
        violations.push(CertificateViolation::CorrectorTooLarge { sup_norm, bound });
    }
    let n0 = cert.n0.max(1);
    if cert.n0 == 0 {
        violations.push(CertificateViolation::ZeroPower);
    }
    let (tn, deflated) = powers(t, p, n0);
    let space = t.space();
    for (i, phi) in cert.phi.iter().enumerate().take(n) {
        if phi.len() != n {
            violations.push(CertificateViolation::TableSize {
                expected: n,
                found: phi.len(),
            });
            continue;
        }
        let breach = space.cone_breach(phi);
        if breach > CERT_TOL {
            violations.push(CertificateViolation::CorrectorNotPositive { vertex: i, breach });
        }
        let slack = tn.column(i) + phi - cert.q.matrix().column(i) * cert.tau;
        let breach = space.cone_breach(&slack);
        if breach > CERT_TOL {
            violations.push(CertificateViolation::MinorizationFails { vertex: i, breach });
        }
    }
    let implied_bound = 1.0 - cert.tau / 2.0;
    let actual_delta = KernelPolytope::new(p).evaluate(&deflated).value;
    if actual_delta > implied_bound + IMPLIED_BOUND_TOL {
        violations.push(CertificateViolation::ImpliedBoundFails {
            bound: implied_bound,
            actual: actual_delta,
        });
    }
    Ok(CertificateCheck {
        violations,
        implied_bound,
        actual_delta,
    })
}

fn lower_bounds(tn: &DMatrix<f64>, q: &DMatrix<f64>) -> Vec<DVector<f64>> {
    (0..tn.ncols())
        .map(|i| tn.column(i).zip_map(&q.column(i), f64::min))
        .collect()
}

/// Best `λ` for `T^{n₀}x ≥ u_x`, `Qx ≥ u_x`: the optimal `u_x` is the
/// componentwise minimum and `λ` the smallest vertex mass. A certificate is
/// issued only when `λ > 1/2`.
pub fn check_dp_star(
    t: &MarkovOperator,
    p: &MarkovProjection,
    q: &MarkovProjection,
    n0: usize,
) -> Result<DStarOutcome, DoeblinError> {
    if n0 == 0 {
        return Err(DoeblinError::ZeroPower);
    }
    require_hypotheses(t, p, q)?;
    let (tn, deflated) = powers(t, p, n0);
    let actual_delta = KernelPolytope::new(p).evaluate(&deflated).value;
    Ok(dp_star_for_power(&tn, q, n0, actual_delta))
}

fn dp_star_for_power(
    tn: &DMatrix<f64>,
    q: &MarkovProjection,
    n0: usize,
    actual_delta: f64,
) -> DStarOutcome {
    let u = lower_bounds(tn, q.matrix());
    let lambda = u.iter().map(|v| v.sum()).fold(f64::INFINITY, f64::min).min(1.0);
    let certificate = (lambda > 0.5 + CERT_TOL).then(|| DStarCertificate {
        lambda,
        n0,
        q: q.clone(),
        u,
    });
    DStarOutcome {
        lambda,
        certificate,
        implied_bound: 2.0 * (1.0 - lambda),
        actual_delta,
    }
}

/// Re-verifies a `λ`-certificate and the implied bound `δ_P(T^{n₀}) ≤ 2(1 − λ)`.
pub fn verify_dp_star(
    cert: &DStarCertificate,
    t: &MarkovOperator,
    p: &MarkovProjection,
) -> Result<CertificateCheck, DoeblinError> {
    require_lattice(t)?;
    let mut violations = Vec::new();
    if !(cert.lambda > 0.5 && cert.lambda <= 1.0) {
        violations.push(CertificateViolation::LambdaOutOfRange {
            lambda: cert.lambda,
        });
    }
    if !cert.q.sub_projection_of(p) {
        violations.push(CertificateViolation::NotSubProjection);
    }
    if cert.n0 == 0 {
        violations.push(CertificateViolation::ZeroPower);
    }
    let n = t.dim();
    if cert.u.len() != n {
        violations.push(CertificateViolation::TableSize {
            expected: n,
            found: cert.u.len(),
        });
    }
    let (tn, deflated) = powers(t, p, cert.n0.max(1));
    let space = t.space();
    for (i, u) in cert.u.iter().enumerate().take(n) {
        if u.len() != n {
            violations.push(CertificateViolation::TableSize {
                expected: n,
                found: u.len(),
            });
            continue;
        }
        let breach = space.cone_breach(&(tn.column(i) - u));
        if breach > CERT_TOL {
            violations.push(CertificateViolation::LowerBoundAboveOperator { vertex: i, breach });
        }
        let breach = space.cone_breach(&(cert.q.matrix().column(i) - u));
        if breach > CERT_TOL {
            violations.push(CertificateViolation::LowerBoundAboveProjection { vertex: i, breach });
        }
        let mass = space.norm(u);
        if mass < cert.lambda - CERT_TOL {
            violations.push(CertificateViolation::LowerBoundMass { vertex: i, mass });
        }
    }
    let implied_bound = 2.0 * (1.0 - cert.lambda);
    let actual_delta = KernelPolytope::new(p).evaluate(&deflated).value;
    if actual_delta > implied_bound + IMPLIED_BOUND_TOL {
        violations.push(CertificateViolation::ImpliedBoundFails {
            bound: implied_bound,
            actual: actual_delta,
        });
    }
    Ok(CertificateCheck {
        violations,
        implied_bound,
        actual_delta,
    })
}

/// Builds the `τ = 1`, `Q = P` certificate at the first `n₀` with
/// `max_x ‖T^{n₀}x − Px‖ ≤ 1/4`, taking `φ_x = (T^{n₀}x − Px)₋`. The vertex
/// maximum bounds the supremum over `K` by convexity of the norm.
pub fn certificate_from_ergodicity(
    t: &MarkovOperator,
    p: &MarkovProjection,
    n0_cap: usize,
) -> Result<DoeblinCertificate, DoeblinError> {
    require_hypotheses(t, p, p)?;
    let (verdict, _) = classify(t, p, ClassifyOptions::default())?;
    if !verdict.uniform {
        return Err(DoeblinError::NotUniformlyErgodic);
    }
    let step = t.matrix() - p.matrix();
    let mut d = step.clone();
    for n0 in 1..=n0_cap {
        if t.space().operator_norm(&d) <= 0.25 {
            let phi: Vec<DVector<f64>> = d.column_iter().map(|c| c.map(|v| (-v).max(0.0))).collect();
            let sup_phi_norm = phi.iter().map(|v| v.sum()).fold(0.0, f64::max);
            return Ok(DoeblinCertificate {
                tau: 1.0,
                n0,
                q: p.clone(),
                phi,
                sup_phi_norm,
            });
        }
        d = &step * &d;
    }
    Err(DoeblinError::CapReached { cap: n0_cap })
}

/// `P` followed by the rank-one projections `T_y` for each distinct column
/// `y = Pe_i`; every one of them lies below `P`.
pub fn default_candidates(p: &MarkovProjection) -> Vec<MarkovProjection> {
    let mut out = vec![p.clone()];
    if matches!(p.kind(), ProjectionKind::RankOne { .. }) {
        return out;
    }
    let mut seen: Vec<DVector<f64>> = Vec::new();
    for col in p.matrix().column_iter() {
        let y = col.into_owned();
        if seen.iter().any(|s| (s - &y).abs().max() <= 1e-12) {
            continue;
        }
        if let Ok(q) = MarkovProjection::rank_one(p.space().clone(), y.clone()) {
            if q.sub_projection_of(p) {
                out.push(q);
            }
        }
        seen.push(y);
    }
    out
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    /// Largest `τ`, ties broken towards smaller `n₀` then earlier candidate.
    pub dp: Option<DoeblinCertificate>,
    /// Largest `λ`, same tie-breaking.
    pub dp_star: Option<DStarCertificate>,
    /// Largest `λ` seen, issued or not.
    pub best_lambda: f64,
    pub scanned_n0: usize,
    pub candidates: usize,
    pub diagnostics: Vec<String>,
}

impl SearchOutcome {
    pub fn exhausted(&self) -> bool {
        self.dp.is_none()
    }
}

/// Scans `n₀ = 1..=cap` against every candidate `Q`.
pub fn search_certificate(
    t: &MarkovOperator,
    p: &MarkovProjection,
    n0_cap: usize,
    candidates: Option<Vec<MarkovProjection>>,
) -> Result<SearchOutcome, DoeblinError> {
    require_lattice(t)?;
    let candidates = candidates.unwrap_or_else(|| default_candidates(p));
    let mut valid = Vec::with_capacity(candidates.len());
    let mut diagnostics = Vec::new();
    for (k, q) in candidates.into_iter().enumerate() {
        if q.sub_projection_of(p) {
            valid.push(q);
        } else {
            diagnostics.push(format!("candidate {k} is not below P; skipped"));
        }
    }
    let hypotheses = t.fixes(p).commutes && t.commutes(p).commutes;
    if !hypotheses {
        diagnostics.push("TP = PT = P fails; no certificate can exist".into());
    }

    let mut dp: Option<DoeblinCertificate> = None;
    let mut dp_star: Option<DStarCertificate> = None;
    let mut best_lambda = f64::NEG_INFINITY;
    let mut scanned = 0;
    if hypotheses {
        let kernel = KernelPolytope::new(p);
        let step = t.matrix() - p.matrix();
        let mut tn = t.matrix().clone();
        let mut deflated = step.clone();
        for n0 in 1..=n0_cap {
            scanned = n0;
            let delta = kernel.evaluate(&deflated).value;
            for q in &valid {
                if let TauOutcome::Feasible(c) = max_tau_for_power(&tn, q, n0) {
                    if dp.as_ref().is_none_or(|best| c.tau > best.tau) {
                        dp = Some(c);
                    }
                }
                let star = dp_star_for_power(&tn, q, n0, delta);
                best_lambda = best_lambda.max(star.lambda);
                if let Some(c) = star.certificate {
                    if dp_star.as_ref().is_none_or(|best| c.lambda > best.lambda) {
                        dp_star = Some(c);
                    }
                }
            }
            let done = |v: Option<f64>| v.is_some_and(|x| x >= 1.0);
            if done(dp.as_ref().map(|c| c.tau)) && done(dp_star.as_ref().map(|c| c.lambda)) {
                break;
            }
            tn = t.matrix() * &tn;
            deflated = &step * &deflated;
        }
    }
    if dp.is_none() && hypotheses {
        let (verdict, _) = classify(t, p, ClassifyOptions::default())?;
        if verdict.uniform {
            diagnostics.push(format!(
                "operator is uniformly P-ergodic but no certificate exists for n0 <= {n0_cap}; try larger n0_cap"
            ));
        }
    }
    Ok(SearchOutcome {
        dp,
        dp_star,
        best_lambda,
        scanned_n0: scanned,
        candidates: valid.len(),
        diagnostics,
    })
}

/// Horizon by which `C·β*ⁿ ≤ 1/4`, plus a margin; used as a search cap.
pub fn rate_derived_cap(c: f64, beta_star: f64, margin: usize) -> usize {
    if beta_star <= 0.0 || c <= 0.25 {
        return 1 + margin;
    }
    let n = ((0.25 / c).ln() / beta_star.ln()).ceil();
    (n.max(1.0) as usize) + margin
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::validate_markov;
    use crate::statespace::{make_embedded, make_simplex, InnerBall, StateSpace};
    use approx::assert_abs_diff_eq;
    use std::sync::Arc;

    fn chain(a: f64, b: f64) -> DMatrix<f64> {
        DMatrix::from_column_slice(2, 2, &[1.0 - a, a, b, 1.0 - b])
    }

    fn simplex(n: usize) -> Arc<StateSpace> {
        Arc::new(make_simplex(n).unwrap())
    }

    fn two_state() -> (MarkovOperator, MarkovProjection) {
        let s = simplex(2);
        let t = validate_markov(chain(0.3, 0.1), s.clone()).unwrap();
        let p = MarkovProjection::rank_one(s, DVector::from_vec(vec![0.25, 0.75])).unwrap();
        (t, p)
    }

    fn swap() -> (MarkovOperator, MarkovProjection) {
        let s = simplex(2);
        let t = validate_markov(chain(1.0, 1.0), s.clone()).unwrap();
        let p = MarkovProjection::rank_one(s, DVector::from_vec(vec![0.5, 0.5])).unwrap();
        (t, p)
    }

    fn block() -> (MarkovOperator, MarkovProjection) {
        let s = simplex(4);
        let mut m = DMatrix::zeros(4, 4);
        m.view_mut((0, 0), (2, 2)).copy_from(&chain(0.3, 0.3));
        m.view_mut((2, 2), (2, 2)).copy_from(&chain(0.1, 0.1));
        let t = validate_markov(m, s.clone()).unwrap();
        let p = MarkovProjection::block_averaging(s, vec![vec![0, 1], vec![2, 3]], None).unwrap();
        (t, p)
    }

    #[test]
    fn max_tau_two_state() {
        let (t, p) = two_state();
        let out = max_tau(&t, &p, &p, 1).unwrap();
        let cert = out.certificate().unwrap();
        assert!(cert.tau >= 0.4);
        assert_abs_diff_eq!(cert.tau, 0.6, epsilon = 2e-9);
        assert!(check_dp(cert, &t, &p).unwrap().valid());

        // At τ = 0.4 no corrector is needed at all.
        let tn = t.matrix().clone();
        let c = assemble(&tn, &p, 0.4, 1);
        assert!(c.sup_phi_norm < 1e-15);
        let check = check_dp(&c, &t, &p).unwrap();
        assert!(check.valid());
        assert_abs_diff_eq!(check.implied_bound, 0.8, epsilon = 1e-15);
        assert_abs_diff_eq!(check.actual_delta, 0.6, epsilon = 1e-12);
    }

    #[test]
    fn max_tau_permutation_infeasible() {
        let (t, p) = swap();
        for n0 in 1..=4 {
            assert!(matches!(
                max_tau(&t, &p, &p, n0).unwrap(),
                TauOutcome::Infeasible { .. }
            ));
        }
    }

    #[test]
    fn max_tau_projection_itself() {
        let (_, p) = two_state();
        let cert = max_tau(&p.as_operator(), &p, &p, 1).unwrap();
        let cert = cert.certificate().unwrap();
        assert_eq!(cert.tau, 1.0);
        assert!(cert.phi.iter().all(|v| v.iter().all(|x| *x == 0.0)));
    }

    #[test]
    fn tampered_certificates_rejected() {
        let (t, p) = two_state();
        let mut cert = max_tau(&t, &p, &p, 1).unwrap().certificate().unwrap().clone();
        cert.sup_phi_norm = cert.tau;
        let check = check_dp(&cert, &t, &p).unwrap();
        assert!(check
            .violations
            .iter()
            .any(|v| matches!(v, CertificateViolation::CorrectorTooLarge { .. })));

        let (t, p) = block();
        let cert = certificate_from_ergodicity(&t, &p, 200).unwrap();
        let mut bad = cert.clone();
        bad.q = MarkovProjection::identity(p.space().clone());
        let check = check_dp(&bad, &t, &p).unwrap();
        assert!(check.violations.contains(&CertificateViolation::NotSubProjection));
    }

    #[test]
    fn dp_star_examples() {
        let (t, p) = two_state();
        let out = check_dp_star(&t, &p, &p, 1).unwrap();
        assert_abs_diff_eq!(out.lambda, 0.55, epsilon = 1e-15);
        let cert = out.certificate.unwrap();
        assert_abs_diff_eq!(out.implied_bound, 0.9, epsilon = 1e-15);
        assert_abs_diff_eq!(out.actual_delta, 0.6, epsilon = 1e-12);
        assert!(verify_dp_star(&cert, &t, &p).unwrap().valid());

        let (t, p) = swap();
        let out = check_dp_star(&t, &p, &p, 1).unwrap();
        assert_abs_diff_eq!(out.lambda, 0.5, epsilon = 1e-15);
        assert!(out.certificate.is_none());

        let (_, p) = two_state();
        let out = check_dp_star(&p.as_operator(), &p, &p, 1).unwrap();
        assert_abs_diff_eq!(out.lambda, 1.0, epsilon = 1e-15);
        let u = &out.certificate.unwrap().u;
        assert_abs_diff_eq!(u[0], p.matrix().column(0).into_owned(), epsilon = 1e-15);
    }

    #[test]
    fn certificate_from_ergodicity_examples() {
        let (t, p) = two_state();
        let c = certificate_from_ergodicity(&t, &p, 200).unwrap();
        assert_eq!(c.n0, 4);
        assert_eq!(c.tau, 1.0);
        assert!(check_dp(&c, &t, &p).unwrap().valid());

        let c = certificate_from_ergodicity(&p.as_operator(), &p, 200).unwrap();
        assert_eq!(c.n0, 1);
        assert!(c.phi.iter().all(|v| v.iter().all(|x| *x == 0.0)));

        let (t, p) = block();
        let c = certificate_from_ergodicity(&t, &p, 200).unwrap();
        assert!(c.n0 <= 200);
        assert!(check_dp(&c, &t, &p).unwrap().valid());

        let (t, p) = swap();
        assert_eq!(
            certificate_from_ergodicity(&t, &p, 200).unwrap_err(),
            DoeblinError::NotUniformlyErgodic
        );
    }

    #[test]
    fn search_examples() {
        let (t, p) = block();
        let out = search_certificate(&t, &p, 200, None).unwrap();
        assert_eq!(out.candidates, 3);
        let dp = out.dp.unwrap();
        assert!(check_dp(&dp, &t, &p).unwrap().valid());
        let star = out.dp_star.unwrap();
        assert!(verify_dp_star(&star, &t, &p).unwrap().valid());

        let (t, p) = swap();
        let out = search_certificate(&t, &p, 50, None).unwrap();
        assert!(out.exhausted() && out.dp_star.is_none());
        assert!(out.diagnostics.is_empty());
    }

    #[test]
    fn slow_chain_with_small_cap_reports_diagnostic() {
        // Lazy walk around a 6-cycle: after n steps a state reaches at most
        // n + 1 neighbours, so short horizons cannot minorize.
        let n = 6;
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 0.99;
            m[((i + 1) % n, i)] = 0.01;
        }
        let s = simplex(n);
        let t = validate_markov(m, s.clone()).unwrap();
        let p = MarkovProjection::rank_one(s, DVector::from_element(n, 1.0 / n as f64)).unwrap();
        let out = search_certificate(&t, &p, 3, None).unwrap();
        assert!(out.exhausted());
        assert!(out.diagnostics.iter().any(|d| d.contains("try larger n0_cap")));
    }

    #[test]
    fn embedded_unsupported() {
        let space = Arc::new(make_embedded(1, InnerBall::L1).unwrap());
        let t = validate_markov(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.5]), space.clone())
            .unwrap();
        let p = MarkovProjection::rank_one(space, DVector::from_vec(vec![1.0, 0.0])).unwrap();
        assert!(matches!(
            search_certificate(&t, &p, 5, None),
            Err(DoeblinError::Unsupported(_))
        ));
        assert!(matches!(max_tau(&t, &p, &p, 1), Err(DoeblinError::Unsupported(_))));
    }

    #[test]
    fn rate_cap() {
        // 0.9·0.6^{n−1} = 1.5·0.6ⁿ ≤ 1/4 first at n = 4.
        assert_eq!(rate_derived_cap(1.5, 0.6, 0), 4);
        assert_eq!(rate_derived_cap(1.5, 0.0, 2), 3);
    }
}
