//! Generalized Dobrushin coefficients.
//!
//! `δ_P(A) = sup { ‖Ax‖ / ‖x‖ : x ∈ N_P, x ≠ 0 }` with `N_P = ker P`. On a
//! polytopal space `x ↦ ‖Ax‖` is convex, so the supremum over the unit ball
//! of `N_P` is attained at one of its vertices. Those vertices are known in
//! closed form for rank-one and block-averaging projections and enumerated
//! otherwise. `δ(T)` is the case `N = ker f`.

use std::sync::Arc;

use nalgebra::{Complex, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::linalg::{null_space, range_basis};
use crate::operators::{MarkovOperator, MarkovProjection, ProjectionKind, OPERATOR_TOL};
use crate::spectral::{eigenvalues, SpectralError, UNIT_EIGENVALUE_TOL};
use crate::statespace::{SpaceKind, StateSpace};

/// Largest generator count (base vertices) for kernel vertex enumeration.
pub const ENUMERATION_CAP: usize = 12;

/// Samples used by the Monte-Carlo fallback for unstructured projections.
pub const FALLBACK_SAMPLES: usize = 100_000;

const FALLBACK_SEED: u64 = 0x5eed_d0b5;

/// Tolerance of the coefficient property checks.
pub const PROPERTY_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoefficientError {
    #[error("kernel vertex enumeration needs at most {cap} generators, got {generators}")]
    DimensionTooLarge { generators: usize, cap: usize },
    #[error("operator is not in Σ_P (commutation defect {defect:e})")]
    NotInSigmaP { defect: f64 },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeltaMethod {
    /// Closed-form vertex family `(u − v)/2` over admissible base-vertex pairs.
    PairFormula,
    /// Vertices of `{x ∈ N_P : ‖x‖ ≤ 1}` found by support enumeration.
    KernelVertexEnum,
    /// Random search; a lower bound only.
    MonteCarloLowerBound,
    /// `N_P = {0}` (`P = I`): the value is 1 by convention.
    TrivialKernel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeltaResult {
    pub value: f64,
    pub method: DeltaMethod,
    /// Maximizing kernel vector, when one exists.
    pub witness: Option<DVector<f64>>,
    pub certified_exact: bool,
    /// Equal to `value` when exact; `δ(A)` for the Monte-Carlo fallback.
    pub upper_bound: f64,
}

#[derive(Debug, Clone)]
enum Vertices {
    Trivial,
    Listed {
        vertices: Vec<DVector<f64>>,
        method: DeltaMethod,
    },
    TooLarge {
        generators: usize,
    },
}

/// The unit ball of a kernel `N_P`, prepared once and reused for `δ_P` of
/// many operators (powers, differences).
#[derive(Debug, Clone)]
pub struct KernelPolytope {
    space: Arc<StateSpace>,
    projection: DMatrix<f64>,
    vertices: Vertices,
}

impl KernelPolytope {
    pub fn new(p: &MarkovProjection) -> Self {
        let space = p.space().clone();
        let vertices = if p.is_identity() {
            Vertices::Trivial
        } else {
            match p.kind() {
                ProjectionKind::RankOne { .. } => Vertices::Listed {
                    vertices: functional_kernel_vertices(&space),
                    method: DeltaMethod::PairFormula,
                },
                ProjectionKind::BlockAveraging { blocks, .. } => Vertices::Listed {
                    vertices: block_kernel_vertices(space.dim(), blocks),
                    method: DeltaMethod::PairFormula,
                },
                ProjectionKind::Explicit => match enumerate_kernel_vertices(&space, p.matrix()) {
                    Ok(vertices) => Vertices::Listed {
                        vertices,
                        method: DeltaMethod::KernelVertexEnum,
                    },
                    Err(CoefficientError::DimensionTooLarge { generators, .. }) => {
                        Vertices::TooLarge { generators }
                    }
                    Err(e) => unreachable!("enumeration only fails on size: {e}"),
                },
            }
        };
        Self {
            space,
            projection: p.matrix().clone(),
            vertices,
        }
    }

    /// The kernel `N = ker f` of the functional (any rank-one `T_y`).
    pub fn functional(space: Arc<StateSpace>) -> Self {
        let n = space.dim();
        let vertices = if n == 1 {
            Vertices::Trivial
        } else {
            Vertices::Listed {
                vertices: functional_kernel_vertices(&space),
                method: DeltaMethod::PairFormula,
            }
        };
        let y = space.base_vertices()[0].clone();
        let projection = &y * space.functional().transpose();
        Self {
            space,
            projection,
            vertices,
        }
    }

    pub fn vertices(&self) -> Result<&[DVector<f64>], CoefficientError> {
        match &self.vertices {
            Vertices::Trivial => Ok(&[]),
            Vertices::Listed { vertices, .. } => Ok(vertices),
            Vertices::TooLarge { generators } => Err(CoefficientError::DimensionTooLarge {
                generators: *generators,
                cap: ENUMERATION_CAP,
            }),
        }
    }

    pub fn is_exact(&self) -> bool {
        !matches!(self.vertices, Vertices::TooLarge { .. })
    }

    /// `δ_P(a)` for an arbitrary matrix `a` on the same space.
    pub fn evaluate(&self, a: &DMatrix<f64>) -> DeltaResult {
        match &self.vertices {
            Vertices::Trivial => DeltaResult {
                value: 1.0,
                method: DeltaMethod::TrivialKernel,
                witness: None,
                certified_exact: true,
                upper_bound: 1.0,
            },
            Vertices::Listed { vertices, method } => {
                let mut best = 0.0;
                let mut witness = None;
                for v in vertices {
                    let nv = self.space.norm(v);
                    if nv <= f64::EPSILON {
                        continue;
                    }
                    let ratio = self.space.norm(&(a * v)) / nv;
                    // First maximizer wins; vertex lists are in a fixed order.
                    if witness.is_none() || ratio > best {
                        best = ratio;
                        witness = Some(v.clone());
                    }
                }
                DeltaResult {
                    value: best,
                    method: *method,
                    witness,
                    certified_exact: true,
                    upper_bound: best,
                }
            }
            Vertices::TooLarge { .. } => {
                let (lower, witness) = sample_kernel_ratio(
                    &self.space,
                    a,
                    &self.projection,
                    FALLBACK_SAMPLES,
                    FALLBACK_SEED,
                );
                let upper = KernelPolytope::functional(self.space.clone()).evaluate(a).value;
                DeltaResult {
                    value: lower,
                    method: DeltaMethod::MonteCarloLowerBound,
                    witness,
                    certified_exact: false,
                    upper_bound: upper,
                }
            }
        }
    }
}

/// Extreme points of `{x ∈ ker f : ‖x‖ ≤ 1}`.
fn functional_kernel_vertices(space: &StateSpace) -> Vec<DVector<f64>> {
    let n = space.dim();
    match space.kind() {
        SpaceKind::Simplex | SpaceKind::TensorProduct { .. } => {
            let all: Vec<usize> = (0..n).collect();
            block_kernel_vertices(n, &[all])
        }
        // ker f = {(0, x)}, and the base norm there is the inner norm.
        SpaceKind::EmbeddedBall { .. } => space
            .base_vertices()
            .iter()
            .map(|v| {
                let mut w = v.clone();
                w[0] = 0.0;
                w
            })
            .collect(),
    }
}

/// `(e_i − e_j)/2` for ordered pairs `i ≠ j` inside a common block.
fn block_kernel_vertices(n: usize, blocks: &[Vec<usize>]) -> Vec<DVector<f64>> {
    let mut block_of = vec![usize::MAX; n];
    for (b, block) in blocks.iter().enumerate() {
        for &i in block {
            block_of[i] = b;
        }
    }
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j && block_of[i] == block_of[j] {
                let mut v = DVector::zeros(n);
                v[i] = 0.5;
                v[j] = -0.5;
                out.push(v);
            }
        }
    }
    out
}

/// Extreme points of `{x : Px = 0, ‖x‖ ≤ 1}` for arbitrary `P`.
///
/// The unit ball is the image of the `ℓ¹` ball under `G` (base vertices as
/// columns), so the kernel ball is the image of `{μ : PGμ = 0, ‖μ‖₁ ≤ 1}`.
/// A vertex of the latter with support `S` spans the one-dimensional null
/// space of the columns of `PG` in `S` and has no zero entry there.
fn enumerate_kernel_vertices(
    space: &StateSpace,
    p: &DMatrix<f64>,
) -> Result<Vec<DVector<f64>>, CoefficientError> {
    let generators = space.base_vertices();
    let m = generators.len();
    if m > ENUMERATION_CAP {
        return Err(CoefficientError::DimensionTooLarge {
            generators: m,
            cap: ENUMERATION_CAP,
        });
    }
    let g = DMatrix::from_columns(generators);
    let a = p * &g;
    let mut out: Vec<DVector<f64>> = Vec::new();
    for mask in 1u32..(1u32 << m) {
        let support: Vec<usize> = (0..m).filter(|k| mask >> k & 1 == 1).collect();
        let cols = DMatrix::from_fn(a.nrows(), support.len(), |r, c| a[(r, support[c])]);
        let null = null_space(&cols, 1e-10);
        if null.ncols() != 1 {
            continue;
        }
        let coeffs = null.column(0);
        let scale = coeffs.iter().fold(0.0, |s, c| s + c.abs());
        if coeffs.iter().any(|c| c.abs() <= 1e-9 * scale) {
            continue;
        }
        let mut x = DVector::zeros(space.dim());
        for (c, &k) in coeffs.iter().zip(&support) {
            x.axpy(*c / scale, &generators[k], 1.0);
        }
        for candidate in [x.clone(), -x] {
            if !out.iter().any(|w| (w - &candidate).amax() <= 1e-12) {
                out.push(candidate);
            }
        }
    }
    Ok(out)
}

/// Extreme points of the unit ball of `N_P`.
pub fn kernel_ball_vertices(p: &MarkovProjection) -> Result<Vec<DVector<f64>>, CoefficientError> {
    KernelPolytope::new(p).vertices().map(|v| v.to_vec())
}

/// Classical `δ(T)` over `N = ker f`.
pub fn delta(t: &MarkovOperator) -> DeltaResult {
    KernelPolytope::functional(t.space().clone()).evaluate(t.matrix())
}

/// `δ_P(T)`.
pub fn delta_p(t: &MarkovOperator, p: &MarkovProjection) -> DeltaResult {
    KernelPolytope::new(p).evaluate(t.matrix())
}

/// `δ_P` of an arbitrary matrix (differences, compositions with non-Markov maps).
pub fn delta_p_matrix(a: &DMatrix<f64>, p: &MarkovProjection) -> DeltaResult {
    KernelPolytope::new(p).evaluate(a)
}

/// Half the largest `‖A(u − v)‖` over base-vertex pairs with `P(u − v) = 0`.
///
/// Computed directly from base vertices, without the kernel vertex lists.
/// Returns `None` when no admissible pair exists.
pub fn pair_formula(a: &DMatrix<f64>, p: &MarkovProjection) -> Option<f64> {
    let space = p.space();
    let images: Vec<DVector<f64>> = space.base_vertices().iter().map(|v| a * v).collect();
    let projected: Vec<DVector<f64>> = space
        .base_vertices()
        .iter()
        .map(|v| p.matrix() * v)
        .collect();
    let mut best: Option<f64> = None;
    for i in 0..images.len() {
        for j in (i + 1)..images.len() {
            if space.norm(&(&projected[i] - &projected[j])) > OPERATOR_TOL {
                continue;
            }
            let value = 0.5 * space.norm(&(&images[i] - &images[j]));
            best = Some(best.map_or(value, |b: f64| b.max(value)));
        }
    }
    best
}

/// Monte-Carlo lower bound for `δ_P(A)`: the best ratio `‖Ax‖/‖x‖` over
/// random `x` pushed into `N_P` by `I − P`.
///
/// Draws alternate between Gaussian vectors and sparse sign vectors; the
/// latter reach low-dimensional faces of the kernel ball that isotropic
/// samples essentially never approach.
pub fn delta_bruteforce(a: &DMatrix<f64>, p: &MarkovProjection, samples: usize, seed: u64) -> f64 {
    sample_kernel_ratio(p.space(), a, p.matrix(), samples, seed).0
}

fn sample_kernel_ratio(
    space: &StateSpace,
    a: &DMatrix<f64>,
    p: &DMatrix<f64>,
    samples: usize,
    seed: u64,
) -> (f64, Option<DVector<f64>>) {
    let n = space.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let complement = DMatrix::<f64>::identity(n, n) - p;
    let c = complement.as_slice();
    let am = a.as_slice();
    let pm = p.as_slice();
    let mut px = vec![0.0; n];
    let mut raw = vec![0.0; n];
    let mut x = vec![0.0; n];
    let mut ax = vec![0.0; n];
    let mut best = 0.0;
    let mut best_x: Option<Vec<f64>> = None;
    for s in 0..samples {
        if s % 2 == 0 {
            for r in raw.iter_mut() {
                *r = rng.sample(StandardNormal);
            }
        } else {
            let keep: f64 = rng.random_range(0.1..1.0);
            for r in raw.iter_mut() {
                *r = if rng.random::<f64>() < keep {
                    if rng.random::<bool>() {
                        1.0
                    } else {
                        -1.0
                    }
                } else {
                    0.0
                };
            }
        }
        mat_vec(c, n, &raw, &mut x);
        // One refinement step: rounding in (I − P)·raw leaves a component
        // outside N_P that A would amplify relative to a small δ_P(A).
        mat_vec(pm, n, &x, &mut px);
        x.iter_mut().zip(&px).for_each(|(xi, pi)| *xi -= pi);
        let nx = space.norm_slice(&x);
        if nx <= 1e-12 {
            continue;
        }
        mat_vec(am, n, &x, &mut ax);
        let ratio = space.norm_slice(&ax) / nx;
        if ratio > best {
            best = ratio;
            best_x = Some(x.iter().map(|v| v / nx).collect());
        }
    }
    (best, best_x.map(DVector::from_vec))
}

/// Column-major `y = M x` for a square `n × n` slice.
fn mat_vec(m: &[f64], n: usize, x: &[f64], y: &mut [f64]) {
    y.iter_mut().for_each(|v| *v = 0.0);
    for (j, xj) in x.iter().enumerate() {
        if *xj == 0.0 {
            continue;
        }
        let col = &m[j * n..(j + 1) * n];
        for (yi, mij) in y.iter_mut().zip(col) {
            *yi += mij * xj;
        }
    }
}

/// One numerical inequality check.
#[derive(Debug, Clone, PartialEq)]
pub struct PropertyCheck {
    /// `None` when the hypothesis of the property does not hold.
    pub holds: Option<bool>,
    pub lhs: f64,
    pub rhs: f64,
    pub note: &'static str,
}

impl PropertyCheck {
    fn compare(lhs: f64, rhs: f64, note: &'static str) -> Self {
        Self {
            holds: Some(lhs <= rhs + PROPERTY_TOL),
            lhs,
            rhs,
            note,
        }
    }

    fn skipped(note: &'static str) -> Self {
        Self {
            holds: None,
            lhs: f64::NAN,
            rhs: f64::NAN,
            note,
        }
    }

    /// Passing or not applicable.
    pub fn ok(&self) -> bool {
        self.holds != Some(false)
    }
}

/// The five basic properties of `δ_P` for Markov `T, S`, a linear map `H`
/// and a projection `P`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientProperties {
    /// `0 ≤ δ_P(T) ≤ 1`.
    pub bounded: PropertyCheck,
    /// `|δ_P(T) − δ_P(S)| ≤ δ_P(T − S)`.
    pub lipschitz: PropertyCheck,
    /// `δ_P(T − S) ≤ ‖T − S‖`.
    pub difference_norm: PropertyCheck,
    /// `HP = PH ⟹ δ_P(TH) ≤ δ_P(T)‖H‖`.
    pub commuting_factor: PropertyCheck,
    /// `PH = 0 ⟹ ‖TH‖ ≤ δ_P(T)‖H‖`.
    pub annihilated_factor: PropertyCheck,
    /// `S ∈ Σ_P ⟹ δ_P(TS) ≤ δ_P(T)δ_P(S)`.
    pub submultiplicative: PropertyCheck,
}

impl CoefficientProperties {
    pub fn checks(&self) -> [(&'static str, &PropertyCheck); 6] {
        [
            ("bounded", &self.bounded),
            ("lipschitz", &self.lipschitz),
            ("difference-norm", &self.difference_norm),
            ("commuting-factor", &self.commuting_factor),
            ("annihilated-factor", &self.annihilated_factor),
            ("submultiplicative", &self.submultiplicative),
        ]
    }

    pub fn all_ok(&self) -> bool {
        self.checks().iter().all(|(_, c)| c.ok())
    }
}

/// Numerically checks the basic properties of `δ_P` at tolerance [`PROPERTY_TOL`].
pub fn check_coefficient_properties(
    t: &MarkovOperator,
    s: &MarkovOperator,
    h: &DMatrix<f64>,
    p: &MarkovProjection,
) -> CoefficientProperties {
    let space = p.space();
    let kernel = KernelPolytope::new(p);
    let dt = kernel.evaluate(t.matrix()).value;
    let bounded = PropertyCheck {
        holds: Some((-PROPERTY_TOL..=1.0 + PROPERTY_TOL).contains(&dt)),
        lhs: dt,
        rhs: 1.0,
        note: "0 <= delta_P(T) <= 1",
    };
    if p.is_identity() {
        let skip = PropertyCheck::skipped("P = I: delta_P fixed to 1 by convention");
        return CoefficientProperties {
            bounded,
            lipschitz: skip.clone(),
            difference_norm: skip.clone(),
            commuting_factor: skip.clone(),
            annihilated_factor: skip.clone(),
            submultiplicative: skip,
        };
    }

    let ds = kernel.evaluate(s.matrix()).value;
    let diff = t.matrix() - s.matrix();
    let d_diff = kernel.evaluate(&diff).value;
    let lipschitz = PropertyCheck::compare((dt - ds).abs(), d_diff, "|dP(T)-dP(S)| <= dP(T-S)");
    let difference_norm =
        PropertyCheck::compare(d_diff, space.operator_norm(&diff), "dP(T-S) <= ||T-S||");

    let h_norm = space.operator_norm(h);
    let p_m = p.matrix();
    let commuting_factor = if space.operator_norm(&(h * p_m - p_m * h)) <= OPERATOR_TOL {
        let th = kernel.evaluate(&(t.matrix() * h)).value;
        PropertyCheck::compare(th, dt * h_norm, "dP(TH) <= dP(T)||H||")
    } else {
        PropertyCheck::skipped("HP != PH")
    };
    let annihilated_factor = if space.operator_norm(&(p_m * h)) <= OPERATOR_TOL {
        let th = space.operator_norm(&(t.matrix() * h));
        PropertyCheck::compare(th, dt * h_norm, "||TH|| <= dP(T)||H||")
    } else {
        PropertyCheck::skipped("PH != 0")
    };
    let submultiplicative = if s.commutes(p).commutes {
        let ts = kernel.evaluate(&(t.matrix() * s.matrix())).value;
        PropertyCheck::compare(ts, dt * ds, "dP(TS) <= dP(T)dP(S)")
    } else {
        PropertyCheck::skipped("S not in Sigma_P")
    };

    CoefficientProperties {
        bounded,
        lipschitz,
        difference_norm,
        commuting_factor,
        annihilated_factor,
        submultiplicative,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenvalueBoundReport {
    /// Spectrum of `S` compressed to `range(I − P)`.
    pub restricted_eigenvalues: Vec<Complex<f64>>,
    pub delta: f64,
    /// Largest `|λ|` over restricted eigenvalues `λ ≠ 1` (0 if none).
    pub max_modulus: f64,
    pub holds: bool,
}

/// Every eigenvalue `λ ≠ 1` of `S` on `range(I − P)` satisfies `|λ| ≤ δ_P(S)`.
pub fn eigenvalue_bound_check(
    s: &MarkovOperator,
    p: &MarkovProjection,
) -> Result<EigenvalueBoundReport, CoefficientError> {
    let c = s.commutes(p);
    if !c.commutes {
        return Err(CoefficientError::NotInSigmaP { defect: c.defect });
    }
    let n = s.dim();
    let complement = DMatrix::<f64>::identity(n, n) - p.matrix();
    let basis = range_basis(&complement, 1e-10);
    let restricted = if basis.ncols() == 0 {
        Vec::new()
    } else {
        // range(I − P) is S-invariant, so S·B = B·(BᵀSB).
        let compressed = basis.transpose() * s.matrix() * &basis;
        eigenvalues(&compressed)?
    };
    let delta = delta_p(s, p).value;
    let max_modulus = restricted
        .iter()
        .filter(|l| (*l - Complex::new(1.0, 0.0)).norm() > UNIT_EIGENVALUE_TOL)
        .map(|l| l.norm())
        .fold(0.0, f64::max);
    Ok(EigenvalueBoundReport {
        restricted_eigenvalues: restricted,
        delta,
        max_modulus,
        holds: max_modulus <= delta + PROPERTY_TOL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::validate_markov;
    use crate::statespace::{make_embedded, make_simplex, InnerBall};
    use approx::assert_abs_diff_eq;

    fn simplex(n: usize) -> Arc<StateSpace> {
        Arc::new(make_simplex(n).unwrap())
    }

    fn chain(a: f64, b: f64) -> DMatrix<f64> {
        DMatrix::from_column_slice(2, 2, &[1.0 - a, a, b, 1.0 - b])
    }

    /// Brute-force pair oracle on the simplex: ½ max ‖Te_i − Te_j‖₁.
    fn pair_oracle(t: &DMatrix<f64>, same_block: impl Fn(usize, usize) -> bool) -> f64 {
        let n = t.ncols();
        let mut best: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j && same_block(i, j) {
                    let d: f64 = (0..n).map(|k| (t[(k, i)] - t[(k, j)]).abs()).sum();
                    best = best.max(0.5 * d);
                }
            }
        }
        best
    }

    fn block_example() -> (MarkovOperator, MarkovProjection) {
        let s = simplex(4);
        let mut m = DMatrix::zeros(4, 4);
        m.view_mut((0, 0), (2, 2)).copy_from(&chain(0.3, 0.3));
        m.view_mut((2, 2), (2, 2)).copy_from(&chain(0.1, 0.1));
        let t = validate_markov(m, s.clone()).unwrap();
        let p = MarkovProjection::block_averaging(s, vec![vec![0, 1], vec![2, 3]], None).unwrap();
        (t, p)
    }

    #[test]
    fn kernel_vertices_two_state() {
        let p = MarkovProjection::rank_one(simplex(2), DVector::from_vec(vec![0.25, 0.75])).unwrap();
        let v = kernel_ball_vertices(&p).unwrap();
        assert_eq!(
            v,
            vec![
                DVector::from_vec(vec![0.5, -0.5]),
                DVector::from_vec(vec![-0.5, 0.5])
            ]
        );
    }

    #[test]
    fn kernel_vertices_blocks_match_enumeration() {
        let (_, p) = block_example();
        let closed = kernel_ball_vertices(&p).unwrap();
        assert_eq!(closed.len(), 4);
        let explicit = MarkovProjection::explicit(p.space().clone(), p.matrix().clone()).unwrap();
        let enumerated = kernel_ball_vertices(&explicit).unwrap();
        assert_eq!(enumerated.len(), closed.len());
        for v in &closed {
            assert!(enumerated.iter().any(|w| (w - v).amax() < 1e-12), "{v}");
        }
    }

    #[test]
    fn kernel_vertices_identity_is_empty() {
        let p = MarkovProjection::identity(simplex(3));
        assert!(kernel_ball_vertices(&p).unwrap().is_empty());
        let e = MarkovProjection::identity(Arc::new(make_embedded(2, InnerBall::L1).unwrap()));
        assert!(kernel_ball_vertices(&e).unwrap().is_empty());
    }

    #[test]
    fn delta_examples() {
        let s = simplex(3);
        assert_eq!(delta(&MarkovOperator::identity(s.clone())).value, 1.0);
        let y = MarkovProjection::rank_one(s.clone(), DVector::from_vec(vec![0.2, 0.3, 0.5])).unwrap();
        assert_eq!(delta(&y.as_operator()).value, 0.0);
        let t = validate_markov(chain(0.3, 0.1), simplex(2)).unwrap();
        let d = delta(&t);
        assert_abs_diff_eq!(d.value, 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(d.value, pair_oracle(t.matrix(), |_, _| true), epsilon = 1e-15);
        assert_eq!(d.method, DeltaMethod::PairFormula);
    }

    #[test]
    fn delta_p_identity_convention() {
        let t = validate_markov(chain(0.3, 0.1), simplex(2)).unwrap();
        let d = delta_p(&t, &MarkovProjection::identity(simplex(2)));
        assert_eq!(d.value, 1.0);
        assert_eq!(d.method, DeltaMethod::TrivialKernel);
    }

    #[test]
    fn delta_p_block_example() {
        let (t, p) = block_example();
        let d = delta_p(&t, &p);
        assert_abs_diff_eq!(d.value, 0.8, epsilon = 1e-15);
        let oracle = pair_oracle(t.matrix(), |i, j| i / 2 == j / 2);
        assert_abs_diff_eq!(d.value, oracle, epsilon = 1e-15);
        let w = d.witness.unwrap();
        assert!((p.matrix() * &w).amax() <= 1e-10);
        assert_abs_diff_eq!(
            d.value * t.space().norm(&w),
            t.space().norm(&(t.matrix() * &w)),
            epsilon = 1e-9
        );
    }

    #[test]
    fn delta_p_embedded_example() {
        let space = Arc::new(make_embedded(1, InnerBall::L1).unwrap());
        let t = validate_markov(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.5]), space.clone())
            .unwrap();
        let p = MarkovProjection::rank_one(space.clone(), DVector::from_vec(vec![1.0, 0.0])).unwrap();
        assert_abs_diff_eq!(delta_p(&t, &p).value, 0.5, epsilon = 1e-15);
        let explicit = MarkovProjection::explicit(space, p.matrix().clone()).unwrap();
        let d = delta_p(&t, &explicit);
        assert_eq!(d.method, DeltaMethod::KernelVertexEnum);
        assert_abs_diff_eq!(d.value, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn explicit_linf_enumeration_matches_closed_form() {
        let space = Arc::new(make_embedded(2, InnerBall::Linf).unwrap());
        let mut m = DMatrix::zeros(3, 3);
        m[(0, 0)] = 1.0;
        m[(1, 1)] = 0.3;
        m[(1, 2)] = 0.6;
        m[(2, 1)] = -0.5;
        m[(2, 2)] = 0.2;
        let t = validate_markov(m, space.clone()).unwrap();
        let y = DVector::from_vec(vec![1.0, 0.0, 0.0]);
        let p = MarkovProjection::rank_one(space.clone(), y).unwrap();
        let explicit = MarkovProjection::explicit(space, p.matrix().clone()).unwrap();
        assert_abs_diff_eq!(delta_p(&t, &p).value, delta_p(&t, &explicit).value, epsilon = 1e-12);
        assert_abs_diff_eq!(delta_p(&t, &p).value, 0.9, epsilon = 1e-12);
    }

    #[test]
    fn enumeration_cap() {
        let s = simplex(13);
        let mut m = DMatrix::zeros(13, 13);
        for j in 0..13 {
            m[(j / 2 * 2, j)] = 1.0;
        }
        let p = MarkovProjection::explicit(s.clone(), m).unwrap();
        assert!(matches!(
            kernel_ball_vertices(&p),
            Err(CoefficientError::DimensionTooLarge { generators: 13, .. })
        ));
        let t = MarkovOperator::identity(s);
        let d = delta_p(&t, &p);
        assert_eq!(d.method, DeltaMethod::MonteCarloLowerBound);
        assert!(!d.certified_exact);
        assert!(d.value <= d.upper_bound);
        assert_abs_diff_eq!(d.upper_bound, 1.0);
    }

    #[test]
    fn bruteforce_examples() {
        let s = simplex(3);
        let p = MarkovProjection::rank_one(s.clone(), DVector::from_vec(vec![0.2, 0.3, 0.5])).unwrap();
        let id = DMatrix::identity(3, 3);
        let b = delta_bruteforce(&id, &p, 1000, 1);
        assert!(b <= 1.0 + 1e-15 && b > 0.999);
        assert!(delta_bruteforce(p.matrix(), &p, 1000, 1) < 1e-14);

        let t = chain(0.3, 0.1);
        let p2 = MarkovProjection::rank_one(simplex(2), DVector::from_vec(vec![0.25, 0.75])).unwrap();
        let b = delta_bruteforce(&t, &p2, 100_000, 7);
        assert!((0.6 - 1e-6..=0.6 + 1e-15).contains(&b), "{b}");
    }

    #[test]
    fn pair_formula_matches_vertices() {
        let (t, p) = block_example();
        assert_abs_diff_eq!(pair_formula(t.matrix(), &p).unwrap(), 0.8, epsilon = 1e-15);
        assert_eq!(pair_formula(t.matrix(), &MarkovProjection::identity(simplex(4))), None);
    }

    #[test]
    fn properties_two_state() {
        let s2 = simplex(2);
        let t = validate_markov(chain(0.3, 0.1), s2.clone()).unwrap();
        let p = MarkovProjection::rank_one(s2.clone(), DVector::from_vec(vec![0.25, 0.75])).unwrap();
        let h = DMatrix::identity(2, 2) - p.matrix();
        let r = check_coefficient_properties(&t, &t, &h, &p);
        assert_eq!(r.lipschitz.lhs, 0.0);
        assert!(r.all_ok());
        // ‖T(I − P)‖ ≤ δ_P(T)‖I − P‖ ≤ 2δ_P(T)
        assert_eq!(r.annihilated_factor.holds, Some(true));
        assert!(r.annihilated_factor.rhs <= 2.0 * 0.6 + 1e-12);
    }

    #[test]
    fn properties_skip_unmet_hypotheses() {
        let s2 = simplex(2);
        let t = validate_markov(chain(0.3, 0.1), s2.clone()).unwrap();
        let swap = validate_markov(chain(1.0, 1.0), s2.clone()).unwrap();
        let p = MarkovProjection::rank_one(s2, DVector::from_vec(vec![0.25, 0.75])).unwrap();
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        let r = check_coefficient_properties(&t, &swap, &h, &p);
        assert_eq!(r.commuting_factor.holds, None);
        assert_eq!(r.annihilated_factor.holds, None);
        assert_eq!(r.submultiplicative.holds, None);
        assert!(r.all_ok());
    }

    #[test]
    fn eigenvalue_bound_examples() {
        let s2 = simplex(2);
        let p = MarkovProjection::rank_one(s2.clone(), DVector::from_vec(vec![0.25, 0.75])).unwrap();
        let r = eigenvalue_bound_check(&p.as_operator(), &p).unwrap();
        assert!(r.holds);
        assert!(r.max_modulus <= 1e-12);
        assert_eq!(r.delta, 0.0);

        let t = validate_markov(chain(0.3, 0.1), s2.clone()).unwrap();
        let r = eigenvalue_bound_check(&t, &p).unwrap();
        assert_eq!(r.restricted_eigenvalues.len(), 1);
        assert_abs_diff_eq!(r.max_modulus, 0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(r.delta, 0.6, epsilon = 1e-12);
        assert!(r.holds);

        let (t, p) = block_example();
        let r = eigenvalue_bound_check(&t, &p).unwrap();
        let mut mods: Vec<f64> = r.restricted_eigenvalues.iter().map(|l| l.norm()).collect();
        mods.sort_by(f64::total_cmp);
        assert_abs_diff_eq!(mods[0], 0.4, epsilon = 1e-12);
        assert_abs_diff_eq!(mods[1], 0.8, epsilon = 1e-12);
        assert!(r.holds);

        let e1 = MarkovProjection::rank_one(s2.clone(), DVector::from_vec(vec![1.0, 0.0])).unwrap();
        let swap = validate_markov(chain(1.0, 1.0), s2).unwrap();
        assert!(matches!(
            eigenvalue_bound_check(&swap, &e1),
            Err(CoefficientError::NotInSigmaP { .. })
        ));
    }
}
