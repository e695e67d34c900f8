//! Finite-dimensional base-norm spaces `(X, X₊, K, f)`.
//!
//! Three polytopal instances are supported:
//!
//! * the probability simplex on `n` points (classical `L¹`), where the base
//!   norm is the `ℓ¹` norm;
//! * the embedded space `ℝ ⊕ X` with `X = ℝ^m` under an `ℓ¹` or `ℓ∞` norm,
//!   cone `{(α, x) : ‖x‖ ≤ α}`, functional `f(α, x) = α` and base norm
//!   `max(|α|, ‖x‖)`;
//! * Kronecker products of simplices, which are again simplices on the
//!   product index set.
//!
//! All of them are strong: the unit ball is exactly `conv(K ∪ −K)`, so the
//! listed ball vertices generate it.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Tolerance for cone inequalities and for `f(x) = 1`.
pub const CONE_TOL: f64 = 1e-10;

/// Largest inner dimension accepted for an `ℓ∞` embedded ball (`2^m` base vertices).
pub const MAX_LINF_INNER_DIM: usize = 16;

/// Elements are plain coordinate vectors in the ambient space.
pub type Element = DVector<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpaceError {
    #[error("state space dimension must be positive")]
    ZeroDimension,
    #[error("l-infinity inner ball of dimension {dim} exceeds the vertex cap ({max})")]
    TooManyVertices { dim: usize, max: usize },
    #[error("positive/negative decomposition is unsupported on {0} spaces")]
    UnsupportedDecomposition(&'static str),
    #[error("tensor products are restricted to simplex factors")]
    NonSimplexTensor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InnerBall {
    L1,
    Linf,
}

impl InnerBall {
    pub fn norm(self, x: &[f64]) -> f64 {
        match self {
            InnerBall::L1 => x.iter().map(|v| v.abs()).sum(),
            InnerBall::Linf => x.iter().fold(0.0, |m, v| m.max(v.abs())),
        }
    }

    /// Extreme points of the inner unit ball, in a fixed order.
    fn vertices(self, m: usize) -> Vec<Vec<f64>> {
        match self {
            InnerBall::L1 => {
                let mut out = Vec::with_capacity(2 * m);
                for j in 0..m {
                    for sign in [1.0, -1.0] {
                        let mut w = vec![0.0; m];
                        w[j] = sign;
                        out.push(w);
                    }
                }
                out
            }
            InnerBall::Linf => (0..1usize << m)
                .map(|mask| {
                    (0..m)
                        .map(|j| if mask >> j & 1 == 0 { 1.0 } else { -1.0 })
                        .collect()
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SpaceKind {
    Simplex,
    EmbeddedBall { inner_dim: usize, inner_ball: InnerBall },
    TensorProduct { left: usize, right: usize },
}

impl SpaceKind {
    pub fn name(&self) -> &'static str {
        match self {
            SpaceKind::Simplex => "simplex",
            SpaceKind::EmbeddedBall { .. } => "embedded",
            SpaceKind::TensorProduct { .. } => "tensor",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    kind: SpaceKind,
    dim: usize,
    functional: DVector<f64>,
    base_vertices: Vec<Element>,
    ball_vertices: Vec<Element>,
}

/// The simplex on `n` points.
pub fn make_simplex(n: usize) -> Result<StateSpace, SpaceError> {
    StateSpace::simplex(n)
}

/// The space `ℝ ⊕ ℝ^m` with the chosen inner polytopal norm.
pub fn make_embedded(m: usize, inner_ball: InnerBall) -> Result<StateSpace, SpaceError> {
    StateSpace::embedded(m, inner_ball)
}

impl StateSpace {
    pub fn simplex(n: usize) -> Result<Self, SpaceError> {
        if n == 0 {
            return Err(SpaceError::ZeroDimension);
        }
        Ok(Self::lattice(SpaceKind::Simplex, n))
    }

    pub fn embedded(m: usize, inner_ball: InnerBall) -> Result<Self, SpaceError> {
        if m == 0 {
            return Err(SpaceError::ZeroDimension);
        }
        if inner_ball == InnerBall::Linf && m > MAX_LINF_INNER_DIM {
            return Err(SpaceError::TooManyVertices {
                dim: m,
                max: MAX_LINF_INNER_DIM,
            });
        }
        let dim = m + 1;
        let mut functional = DVector::zeros(dim);
        functional[0] = 1.0;
        let base_vertices: Vec<Element> = inner_ball
            .vertices(m)
            .into_iter()
            .map(|w| {
                let mut v = DVector::zeros(dim);
                v[0] = 1.0;
                v.rows_mut(1, m).copy_from_slice(&w);
                v
            })
            .collect();
        Ok(Self::with_base(
            SpaceKind::EmbeddedBall {
                inner_dim: m,
                inner_ball,
            },
            functional,
            base_vertices,
        ))
    }

    /// Product of two simplex-type spaces; canonically the simplex on the
    /// product index set, with index `i * right + k` for the pair `(i, k)`.
    pub fn tensor(left: &StateSpace, right: &StateSpace) -> Result<Self, SpaceError> {
        if !left.is_lattice() || !right.is_lattice() {
            return Err(SpaceError::NonSimplexTensor);
        }
        Ok(Self::lattice(
            SpaceKind::TensorProduct {
                left: left.dim,
                right: right.dim,
            },
            left.dim * right.dim,
        ))
    }

    fn lattice(kind: SpaceKind, n: usize) -> Self {
        let base_vertices = (0..n)
            .map(|i| DVector::from_fn(n, |k, _| if k == i { 1.0 } else { 0.0 }))
            .collect();
        Self::with_base(kind, DVector::from_element(n, 1.0), base_vertices)
    }

    fn with_base(kind: SpaceKind, functional: DVector<f64>, base_vertices: Vec<Element>) -> Self {
        // Extreme points of conv(K ∪ −K), interleaved as v, −v.
        let ball_vertices = base_vertices
            .iter()
            .flat_map(|v| [v.clone(), -v])
            .collect();
        Self {
            kind,
            dim: functional.len(),
            functional,
            base_vertices,
            ball_vertices,
        }
    }

    pub fn kind(&self) -> &SpaceKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// True when the order is the coordinatewise one (simplex and products).
    pub fn is_lattice(&self) -> bool {
        matches!(
            self.kind,
            SpaceKind::Simplex | SpaceKind::TensorProduct { .. }
        )
    }

    pub fn functional(&self) -> &DVector<f64> {
        &self.functional
    }

    pub fn base_vertices(&self) -> &[Element] {
        &self.base_vertices
    }

    pub fn ball_vertices(&self) -> &[Element] {
        &self.ball_vertices
    }

    /// `f(x)`.
    pub fn f(&self, x: &DVector<f64>) -> f64 {
        self.functional.dot(x)
    }

    pub fn norm(&self, x: &DVector<f64>) -> f64 {
        self.norm_slice(x.as_slice())
    }

    pub fn norm_slice(&self, x: &[f64]) -> f64 {
        match self.kind {
            SpaceKind::Simplex | SpaceKind::TensorProduct { .. } => {
                x.iter().map(|v| v.abs()).sum()
            }
            SpaceKind::EmbeddedBall { inner_ball, .. } => {
                x[0].abs().max(inner_ball.norm(&x[1..]))
            }
        }
    }

    /// How far `x` is outside the cone; non-positive means inside.
    pub fn cone_breach(&self, x: &DVector<f64>) -> f64 {
        match self.kind {
            SpaceKind::Simplex | SpaceKind::TensorProduct { .. } => {
                -x.iter().cloned().fold(f64::INFINITY, f64::min)
            }
            SpaceKind::EmbeddedBall { inner_ball, .. } => {
                inner_ball.norm(&x.as_slice()[1..]) - x[0]
            }
        }
    }

    pub fn in_cone(&self, x: &DVector<f64>) -> bool {
        self.cone_breach(x) <= CONE_TOL
    }

    /// Membership in the base `K = {x ≥ 0 : f(x) = 1}`.
    pub fn in_base(&self, x: &DVector<f64>) -> bool {
        self.in_cone(x) && (self.f(x) - 1.0).abs() <= CONE_TOL
    }

    /// Lattice decomposition `x = x₊ − x₋`.
    pub fn positive_part(&self, x: &DVector<f64>) -> Result<(Element, Element), SpaceError> {
        if !self.is_lattice() {
            return Err(SpaceError::UnsupportedDecomposition(self.kind.name()));
        }
        Ok((x.map(|v| v.max(0.0)), x.map(|v| (-v).max(0.0))))
    }

    /// Induced operator norm of `a`, exact because the unit ball is a polytope.
    pub fn operator_norm(&self, a: &DMatrix<f64>) -> f64 {
        if self.is_lattice() {
            return a
                .column_iter()
                .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
                .fold(0.0, f64::max);
        }
        self.base_vertices
            .iter()
            .map(|v| self.norm(&(a * v)))
            .fold(0.0, f64::max)
    }

    pub fn zero(&self) -> Element {
        DVector::zeros(self.dim)
    }
}
