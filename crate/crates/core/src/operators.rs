//! Markov operators and Markov projections as validated dense matrices.
//!
//! Matrices act on coordinate columns: column `j` is the image of the `j`-th
//! coordinate vector, so on the simplex a Markov operator is a
//! column-stochastic matrix.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::linalg::matrix_power;
use crate::statespace::{SpaceError, StateSpace, CONE_TOL};

/// Tolerance for operator identities (`P² = P`, `TP = PT`, `Q ≤ P`).
pub const OPERATOR_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum ViolationKind {
    /// `T v` leaves the cone by `amount`.
    ConeBreach { amount: f64 },
    /// `f(T v)` differs from one.
    MassDefect { mass: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    /// Index into the space's base vertices.
    pub vertex: usize,
    pub kind: ViolationKind,
}

/// Why a matrix failed Markov validation, per escaping base vertex.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ViolationReport {
    pub violations: Vec<Violation>,
}

impl fmt::Display for ViolationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .violations
            .iter()
            .map(|v| match v.kind {
                ViolationKind::ConeBreach { amount } => {
                    format!("vertex {} leaves the cone by {amount:e}", v.vertex)
                }
                ViolationKind::MassDefect { mass } => {
                    format!("vertex {} maps to mass {mass}", v.vertex)
                }
            })
            .collect();
        write!(f, "{}", parts.join("; "))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OperatorError {
    #[error("matrix is {rows}x{cols} but the space has dimension {dim}")]
    DimensionMismatch { rows: usize, cols: usize, dim: usize },
    #[error("not a Markov operator: {0}")]
    NotMarkov(ViolationReport),
    #[error("projection is not idempotent (defect {defect:e})")]
    NotIdempotent { defect: f64 },
    #[error("operands live on different state spaces")]
    SpaceMismatch,
    #[error("{0} requires simplex-type spaces")]
    NotSimplex(&'static str),
    #[error("invalid block partition: {0}")]
    InvalidPartition(String),
    #[error("anchor for block {block} is not a probability vector supported on the block")]
    InvalidAnchor { block: usize },
    #[error("rank-one vector is not in the base")]
    NotInBase,
    #[error(transparent)]
    Space(#[from] SpaceError),
}

#[derive(Debug, Clone)]
pub struct MarkovOperator {
    matrix: DMatrix<f64>,
    space: Arc<StateSpace>,
}

/// Certifies that `matrix` maps the base `K` of `space` into itself.
pub fn validate_markov(
    matrix: DMatrix<f64>,
    space: Arc<StateSpace>,
) -> Result<MarkovOperator, OperatorError> {
    MarkovOperator::new(matrix, space)
}

/// Checks `T(K) ⊆ K` on the base vertices; convexity covers the rest of `K`.
pub fn markov_violations(matrix: &DMatrix<f64>, space: &StateSpace) -> ViolationReport {
    let mut violations = Vec::new();
    for (i, v) in space.base_vertices().iter().enumerate() {
        let image = matrix * v;
        let breach = space.cone_breach(&image);
        if breach > CONE_TOL {
            violations.push(Violation {
                vertex: i,
                kind: ViolationKind::ConeBreach { amount: breach },
            });
        }
        let mass = space.f(&image);
        if (mass - 1.0).abs() > CONE_TOL {
            violations.push(Violation {
                vertex: i,
                kind: ViolationKind::MassDefect { mass },
            });
        }
    }
    ViolationReport { violations }
}

fn check_shape(matrix: &DMatrix<f64>, space: &StateSpace) -> Result<(), OperatorError> {
    if matrix.nrows() != space.dim() || matrix.ncols() != space.dim() {
        return Err(OperatorError::DimensionMismatch {
            rows: matrix.nrows(),
            cols: matrix.ncols(),
            dim: space.dim(),
        });
    }
    Ok(())
}

impl MarkovOperator {
    pub fn new(matrix: DMatrix<f64>, space: Arc<StateSpace>) -> Result<Self, OperatorError> {
        check_shape(&matrix, &space)?;
        let report = markov_violations(&matrix, &space);
        if !report.violations.is_empty() {
            return Err(OperatorError::NotMarkov(report));
        }
        Ok(Self { matrix, space })
    }

    pub fn identity(space: Arc<StateSpace>) -> Self {
        let n = space.dim();
        Self {
            matrix: DMatrix::identity(n, n),
            space,
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn space(&self) -> &Arc<StateSpace> {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    /// `Tⁿ`; Markov operators are closed under composition, so no revalidation.
    pub fn power(&self, n: u64) -> MarkovOperator {
        Self {
            matrix: matrix_power(&self.matrix, n),
            space: self.space.clone(),
        }
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &MarkovOperator) -> Result<MarkovOperator, OperatorError> {
        if self.space != other.space {
            return Err(OperatorError::SpaceMismatch);
        }
        Ok(Self {
            matrix: &self.matrix * &other.matrix,
            space: self.space.clone(),
        })
    }

    /// `S ⊗ T` on the product simplex.
    pub fn kronecker(&self, other: &MarkovOperator) -> Result<MarkovOperator, OperatorError> {
        kronecker(self, other)
    }

    pub fn operator_norm(&self) -> f64 {
        self.space.operator_norm(&self.matrix)
    }

    /// `‖TP − PT‖`; membership of `T` in `Σ_P` when it is below tolerance.
    pub fn commutes(&self, p: &MarkovProjection) -> Commutation {
        let defect = self
            .space
            .operator_norm(&(&self.matrix * p.matrix() - p.matrix() * &self.matrix));
        Commutation {
            commutes: defect <= OPERATOR_TOL,
            defect,
        }
    }

    /// `‖TP − P‖`.
    pub fn fixes(&self, p: &MarkovProjection) -> Commutation {
        let defect = self
            .space
            .operator_norm(&(&self.matrix * p.matrix() - p.matrix()));
        Commutation {
            commutes: defect <= OPERATOR_TOL,
            defect,
        }
    }
}

/// Outcome of an operator identity test with its defect norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Commutation {
    pub commutes: bool,
    pub defect: f64,
}

/// Kronecker product of two Markov operators on simplex-type spaces.
pub fn kronecker(s: &MarkovOperator, t: &MarkovOperator) -> Result<MarkovOperator, OperatorError> {
    let space = StateSpace::tensor(&s.space, &t.space)
        .map_err(|_| OperatorError::NotSimplex("kronecker product"))?;
    Ok(MarkovOperator {
        matrix: s.matrix.kronecker(&t.matrix),
        space: Arc::new(space),
    })
}

/// `commutes(T, P)` as a free function.
pub fn commutes(t: &MarkovOperator, p: &MarkovProjection) -> Commutation {
    t.commutes(p)
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProjectionKind {
    /// `P x = f(x) y`.
    RankOne { y: DVector<f64> },
    /// On each block `B`, `(P x)|_B = (Σ_{i∈B} x_i) · anchor_B`.
    BlockAveraging {
        blocks: Vec<Vec<usize>>,
        anchors: Vec<DVector<f64>>,
    },
    /// An arbitrary idempotent Markov matrix; no closed-form kernel.
    Explicit,
}

#[derive(Debug, Clone)]
pub struct MarkovProjection {
    kind: ProjectionKind,
    matrix: DMatrix<f64>,
    space: Arc<StateSpace>,
}

/// Blocks of indices with one anchor distribution per block.
type Blocks = (Vec<Vec<usize>>, Vec<DVector<f64>>);

impl MarkovProjection {
    /// `T_y` for `y ∈ K`.
    pub fn rank_one(space: Arc<StateSpace>, y: DVector<f64>) -> Result<Self, OperatorError> {
        if y.len() != space.dim() {
            return Err(OperatorError::DimensionMismatch {
                rows: y.len(),
                cols: 1,
                dim: space.dim(),
            });
        }
        if !space.in_base(&y) {
            return Err(OperatorError::NotInBase);
        }
        let matrix = &y * space.functional().transpose();
        Ok(Self {
            kind: ProjectionKind::RankOne { y },
            matrix,
            space,
        })
    }

    /// Conditional expectation onto a partition of the coordinates. Anchors
    /// default to the uniform distribution on each block; a supplied anchor
    /// may have the block's length or the full dimension.
    pub fn block_averaging(
        space: Arc<StateSpace>,
        blocks: Vec<Vec<usize>>,
        anchors: Option<Vec<DVector<f64>>>,
    ) -> Result<Self, OperatorError> {
        if !space.is_lattice() {
            return Err(OperatorError::NotSimplex("block averaging"));
        }
        let n = space.dim();
        let mut seen = vec![false; n];
        for block in &blocks {
            if block.is_empty() {
                return Err(OperatorError::InvalidPartition("empty block".into()));
            }
            for &i in block {
                if i >= n {
                    return Err(OperatorError::InvalidPartition(format!(
                        "index {i} out of range for dimension {n}"
                    )));
                }
                if seen[i] {
                    return Err(OperatorError::InvalidPartition(format!(
                        "index {i} appears twice"
                    )));
                }
                seen[i] = true;
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(OperatorError::InvalidPartition(format!(
                "index {i} is not covered"
            )));
        }

        let anchors: Vec<DVector<f64>> = match anchors {
            None => blocks
                .iter()
                .map(|b| {
                    let mut a = DVector::zeros(n);
                    for &i in b {
                        a[i] = 1.0 / b.len() as f64;
                    }
                    a
                })
                .collect(),
            Some(given) => {
                if given.len() != blocks.len() {
                    return Err(OperatorError::InvalidPartition(format!(
                        "{} anchors for {} blocks",
                        given.len(),
                        blocks.len()
                    )));
                }
                let mut out = Vec::with_capacity(given.len());
                for (k, (b, a)) in blocks.iter().zip(given).enumerate() {
                    let full = if a.len() == n {
                        a
                    } else if a.len() == b.len() {
                        let mut full = DVector::zeros(n);
                        for (&i, &w) in b.iter().zip(a.iter()) {
                            full[i] = w;
                        }
                        full
                    } else {
                        return Err(OperatorError::InvalidAnchor { block: k });
                    };
                    let off_block = (0..n)
                        .filter(|i| !b.contains(i))
                        .any(|i| full[i].abs() > CONE_TOL);
                    if off_block || !space.in_base(&full) {
                        return Err(OperatorError::InvalidAnchor { block: k });
                    }
                    out.push(full);
                }
                out
            }
        };

        let mut matrix = DMatrix::zeros(n, n);
        for (b, a) in blocks.iter().zip(&anchors) {
            for &j in b {
                matrix.set_column(j, a);
            }
        }
        Ok(Self {
            kind: ProjectionKind::BlockAveraging { blocks, anchors },
            matrix,
            space,
        })
    }

    /// Any idempotent Markov matrix.
    pub fn explicit(space: Arc<StateSpace>, matrix: DMatrix<f64>) -> Result<Self, OperatorError> {
        let op = MarkovOperator::new(matrix, space.clone())?;
        let matrix = op.matrix;
        let defect = space.operator_norm(&(&matrix * &matrix - &matrix));
        if defect > OPERATOR_TOL {
            return Err(OperatorError::NotIdempotent { defect });
        }
        Ok(Self {
            kind: ProjectionKind::Explicit,
            matrix,
            space,
        })
    }

    /// The identity as a projection: singleton blocks on lattices, explicit otherwise.
    pub fn identity(space: Arc<StateSpace>) -> Self {
        let n = space.dim();
        if space.is_lattice() {
            let blocks = (0..n).map(|i| vec![i]).collect();
            return Self::block_averaging(space, blocks, None)
                .expect("singleton partition is valid");
        }
        Self {
            kind: ProjectionKind::Explicit,
            matrix: DMatrix::identity(n, n),
            space,
        }
    }

    pub fn kind(&self) -> &ProjectionKind {
        &self.kind
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn space(&self) -> &Arc<StateSpace> {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    /// Closed-form kernel available (rank-one or block averaging).
    pub fn is_structured(&self) -> bool {
        !matches!(self.kind, ProjectionKind::Explicit)
    }

    pub fn is_identity(&self) -> bool {
        let n = self.dim();
        let id = DMatrix::<f64>::identity(n, n);
        self.space.operator_norm(&(&self.matrix - id)) <= OPERATOR_TOL
    }

    pub fn as_operator(&self) -> MarkovOperator {
        MarkovOperator {
            matrix: self.matrix.clone(),
            space: self.space.clone(),
        }
    }

    /// `self ≤ p`, i.e. `Q = QP = PQ`.
    pub fn sub_projection_of(&self, p: &MarkovProjection) -> bool {
        sub_projection(self, p)
    }

    /// `Q ⊗ P`; structured kinds stay structured (products of blocks with
    /// product anchors).
    pub fn kronecker(&self, other: &MarkovProjection) -> Result<MarkovProjection, OperatorError> {
        let space = Arc::new(
            StateSpace::tensor(&self.space, &other.space)
                .map_err(|_| OperatorError::NotSimplex("kronecker product"))?,
        );
        let matrix = self.matrix.kronecker(&other.matrix);
        let (Some((lb, la)), Some((rb, ra))) = (self.as_blocks(), other.as_blocks()) else {
            return Ok(MarkovProjection {
                kind: ProjectionKind::Explicit,
                matrix,
                space,
            });
        };
        let right = other.dim();
        if lb.len() == 1 && rb.len() == 1 {
            let y = la[0].kronecker(&ra[0]);
            return MarkovProjection::rank_one(space, y);
        }
        let mut blocks = Vec::with_capacity(lb.len() * rb.len());
        let mut anchors = Vec::with_capacity(lb.len() * rb.len());
        for (b1, a1) in lb.iter().zip(&la) {
            for (b2, a2) in rb.iter().zip(&ra) {
                let mut block: Vec<usize> = b1
                    .iter()
                    .flat_map(|&i| b2.iter().map(move |&k| i * right + k))
                    .collect();
                block.sort_unstable();
                blocks.push(block);
                anchors.push(a1.kronecker(a2));
            }
        }
        MarkovProjection::block_averaging(space, blocks, Some(anchors))
    }

    /// Block view of structured projections on lattice spaces.
    fn as_blocks(&self) -> Option<Blocks> {
        match &self.kind {
            ProjectionKind::RankOne { y } if self.space.is_lattice() => {
                Some((vec![(0..self.dim()).collect()], vec![y.clone()]))
            }
            ProjectionKind::BlockAveraging { blocks, anchors } => {
                Some((blocks.clone(), anchors.clone()))
            }
            _ => None,
        }
    }
}

/// `Q ≤ P` iff `QP = PQ = Q` within tolerance.
pub fn sub_projection(q: &MarkovProjection, p: &MarkovProjection) -> bool {
    if q.space != p.space {
        return false;
    }
    let space = &q.space;
    let qp = q.matrix() * p.matrix();
    let pq = p.matrix() * q.matrix();
    space.operator_norm(&(&qp - q.matrix())) <= OPERATOR_TOL
        && space.operator_norm(&(&pq - q.matrix())) <= OPERATOR_TOL
}
