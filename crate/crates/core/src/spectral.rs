//! Spectra, convergence rates and the ergodicity classification.
//!
//! Complex numbers appear only inside the eigenvalue computations; all
//! coefficient and norm work stays real, since the coefficient of the
//! complexified operator equals the real one.
//!
//! When `TP = PT = P` we have `Tⁿ − P = (T − P)ⁿ`, and on `N_P` the two
//! operators `Tⁿ` and `(T − P)ⁿ` agree. Powers are therefore taken of the
//! deflated operator `T − P`, which keeps geometrically small quantities
//! free of the cancellation error that `Tⁿ − P` would carry.

use nalgebra::linalg::balancing::balance_parlett_reinsch;
use nalgebra::{Complex, DMatrix, DVector, Schur};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::coefficients::KernelPolytope;
use crate::linalg::min_cost_assignment;
use crate::operators::{kronecker, MarkovOperator, MarkovProjection, OperatorError, OPERATOR_TOL};

/// Absolute distance below which an eigenvalue is identified with 1.
pub const UNIT_EIGENVALUE_TOL: f64 = 1e-8;

/// Agreement tolerance between `β*` and `r(T − P)`.
pub const RATE_TOL: f64 = 1e-8;

/// A coefficient or radius below `1 − CONTRACTION_MARGIN` counts as `< 1`.
pub const CONTRACTION_MARGIN: f64 = 1e-10;

/// Radii in `[1 − CONTRACTION_MARGIN, 1 − ROUNDOFF_BAND)` cannot be told
/// apart from 1 and are reported as indeterminate.
const ROUNDOFF_BAND: f64 = 1e-13;

/// Default cap on the power trail used by the classification.
pub const DEFAULT_MAX_POWER: usize = 64;

/// Shifted-QR sweeps allowed per unit of dimension.
const QR_SWEEPS_PER_DIM: usize = 200;

/// Orthogonal similarities tried when the QR iteration stalls.
const SIMILARITY_RETRIES: u64 = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("eigenvalue iteration did not converge for a {dim}x{dim} matrix")]
    NoConvergence { dim: usize },
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("Markov operator shows no eigenvalue within {tol:e} of 1 (closest {closest})")]
    UnitEigenvalueMissing { closest: f64, tol: f64 },
    #[error("operator is not uniformly P-ergodic")]
    NotUniformlyErgodic,
    #[error("beta* = {beta_star} and r(T-P) = {radius} differ by more than {tol:e}")]
    RateMismatch { beta_star: f64, radius: f64, tol: f64 },
    #[error("hypothesis not met: {0}")]
    Hypothesis(String),
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

/// All complex eigenvalues of a real square matrix, with multiplicity.
///
/// Parlett–Reinsch balancing followed by Hessenberg reduction and the
/// shifted QR iteration of the real Schur form. The result is sorted by
/// decreasing modulus, then real part, then imaginary part.
pub fn eigenvalues(a: &DMatrix<f64>) -> Result<Vec<Complex<f64>>, SpectralError> {
    assert!(a.is_square(), "eigenvalues of a non-square matrix");
    let n = a.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(SpectralError::NonFinite);
    }
    let mut balanced = a.clone();
    balance_parlett_reinsch(&mut balanced);
    let sweeps = QR_SWEEPS_PER_DIM * n;
    // Permutation-like matrices can make the Francis iteration cycle; a
    // random orthogonal similarity keeps the spectrum and breaks the cycle.
    let schur = Schur::try_new(balanced.clone(), f64::EPSILON, sweeps)
        .or_else(|| {
            (0..SIMILARITY_RETRIES).find_map(|seed| {
                let q = random_orthogonal(n, seed);
                Schur::try_new(q.transpose() * &balanced * &q, f64::EPSILON, sweeps)
            })
        })
        .ok_or(SpectralError::NoConvergence { dim: n })?;
    let mut values: Vec<Complex<f64>> = schur.complex_eigenvalues().iter().cloned().collect();
    values.sort_by(|x, y| {
        y.norm()
            .total_cmp(&x.norm())
            .then(y.re.total_cmp(&x.re))
            .then(y.im.total_cmp(&x.im))
    });
    Ok(values)
}

fn random_orthogonal(n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    g.qr().q()
}

/// Largest eigenvalue modulus.
pub fn spectral_radius(a: &DMatrix<f64>) -> Result<f64, SpectralError> {
    Ok(eigenvalues(a)?.iter().map(|l| l.norm()).fold(0.0, f64::max))
}

/// An eigenvector for `lambda` by shifted inverse iteration.
pub fn eigenvector(a: &DMatrix<f64>, lambda: Complex<f64>) -> Option<DVector<Complex<f64>>> {
    let n = a.nrows();
    let shift = lambda + Complex::new(1e-10 * (1.0 + lambda.norm()), 0.0);
    let shifted = a.map(|v| Complex::new(v, 0.0)) - DMatrix::identity(n, n) * shift;
    let lu = shifted.lu();
    let mut v = DVector::from_fn(n, |i, _| Complex::new(1.0 + 0.1 * i as f64, 0.05 * i as f64));
    for _ in 0..4 {
        let w = lu.solve(&v)?;
        let scale = w.norm();
        if !scale.is_finite() || scale == 0.0 {
            return None;
        }
        v = w.unscale(scale);
    }
    Some(v)
}

/// `‖Av − λv‖ / ‖v‖` in the Euclidean norm.
pub fn eigen_residual(a: &DMatrix<f64>, lambda: Complex<f64>, v: &DVector<Complex<f64>>) -> f64 {
    let ac = a.map(|x| Complex::new(x, 0.0));
    (ac * v - v * lambda).norm() / v.norm()
}

fn is_unit(l: &Complex<f64>) -> bool {
    (l - Complex::new(1.0, 0.0)).norm() <= UNIT_EIGENVALUE_TOL
}

/// `sup { |λ| : λ ∈ σ(T), λ ≠ 1 }` from a precomputed spectrum.
pub fn beta_star_of(spectrum: &[Complex<f64>]) -> f64 {
    spectrum
        .iter()
        .filter(|l| !is_unit(l))
        .map(|l| l.norm())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralReport {
    /// `σ(T)` with multiplicity.
    pub eigenvalues: Vec<Complex<f64>>,
    /// `σ(T − P)` with multiplicity.
    pub shifted_eigenvalues: Vec<Complex<f64>>,
    /// `r(T − P)`.
    pub r_tp: f64,
    pub beta_star: f64,
    /// Distance from 1 to the rest of `σ(T)`; `None` when nothing else is there.
    pub isolation_distance: Option<f64>,
    pub one_isolated: bool,
    /// `‖T(I − P)‖`.
    pub gap_value: f64,
}

pub fn spectral_report(
    t: &MarkovOperator,
    p: &MarkovProjection,
) -> Result<SpectralReport, SpectralError> {
    let spectrum = eigenvalues(t.matrix())?;
    let closest = spectrum
        .iter()
        .map(|l| (l - Complex::new(1.0, 0.0)).norm())
        .fold(f64::INFINITY, f64::min);
    // f∘T = f, so 1 is always an eigenvalue of a Markov operator.
    if closest > UNIT_EIGENVALUE_TOL {
        return Err(SpectralError::UnitEigenvalueMissing {
            closest,
            tol: UNIT_EIGENVALUE_TOL,
        });
    }
    let shifted = eigenvalues(&(t.matrix() - p.matrix()))?;
    let r_tp = shifted.iter().map(|l| l.norm()).fold(0.0, f64::max);
    let isolation_distance = spectrum
        .iter()
        .filter(|l| !is_unit(l))
        .map(|l| (l - Complex::new(1.0, 0.0)).norm())
        .reduce(f64::min);
    let n = t.dim();
    let gap_value = t
        .space()
        .operator_norm(&(t.matrix() * (DMatrix::identity(n, n) - p.matrix())));
    Ok(SpectralReport {
        beta_star: beta_star_of(&spectrum),
        eigenvalues: spectrum,
        shifted_eigenvalues: shifted,
        r_tp,
        isolation_distance,
        one_isolated: isolation_distance.is_none_or(|d| d > 0.0),
        gap_value,
    })
}

/// Iterates `Dₙ` with `Dₙ = (T − P)ⁿ = Tⁿ − P` when `TP = PT = P`, and
/// `Dₙ = Tⁿ` otherwise, for `n = 1, 2, …`.
struct PowerTrail {
    step: DMatrix<f64>,
    current: DMatrix<f64>,
}

impl PowerTrail {
    fn new(t: &MarkovOperator, p: &MarkovProjection, deflate: bool) -> Self {
        let step = if deflate {
            t.matrix() - p.matrix()
        } else {
            t.matrix().clone()
        };
        let n = t.dim();
        Self {
            step,
            current: DMatrix::identity(n, n),
        }
    }
}

impl Iterator for PowerTrail {
    type Item = DMatrix<f64>;

    fn next(&mut self) -> Option<DMatrix<f64>> {
        self.current = &self.step * &self.current;
        Some(self.current.clone())
    }
}

/// Verdict of one clause of the uniform-ergodicity equivalence.
#[derive(Debug, Clone, PartialEq)]
pub struct Clause {
    pub holds: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErgodicityVerdict {
    pub uniform: bool,
    pub weak: bool,
    /// `r(T − P)` sits within the contraction margin of 1.
    pub indeterminate: bool,
    /// First `n` with `δ_P(Tⁿ) < 1`.
    pub witness_n0: Option<usize>,
    pub fixes_projection: bool,
    pub commutes: bool,
    /// `‖Tⁿ − P‖ → 0`, read off the power trail.
    pub norm_clause: Clause,
    /// `TP = P` and `δ_P(T^{n₀}) < 1` for some `n₀` up to the cap.
    pub coefficient_clause: Clause,
    /// `TP = P` and `r(T − P) < 1`.
    pub spectral_clause: Clause,
    /// Disagreements between the clauses, if any.
    pub diagnostics: Vec<String>,
}

impl ErgodicityVerdict {
    pub fn clauses_agree(&self) -> bool {
        self.norm_clause.holds == self.spectral_clause.holds
            && self.coefficient_clause.holds == self.spectral_clause.holds
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifyOptions {
    pub max_power: usize,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self {
            max_power: DEFAULT_MAX_POWER,
        }
    }
}

/// Decides uniform `P`-ergodicity three independent ways: the power trail,
/// the coefficient of a power, and the spectral radius of `T − P`.
pub fn classify(
    t: &MarkovOperator,
    p: &MarkovProjection,
    options: ClassifyOptions,
) -> Result<(ErgodicityVerdict, SpectralReport), SpectralError> {
    let report = spectral_report(t, p)?;
    let fixes = t.fixes(p);
    let commutes = t.commutes(p);
    let hypotheses = fixes.commutes && commutes.commutes;
    let space = t.space();
    let kernel = KernelPolytope::new(p);
    let trivial = p.is_identity();

    let mut first_contraction = None;
    let mut witness_n0 = None;
    let mut last_norm = f64::NAN;
    let mut last_delta = f64::NAN;
    for (k, d) in PowerTrail::new(t, p, hypotheses)
        .take(options.max_power.max(1))
        .enumerate()
    {
        let n = k + 1;
        let diff = if hypotheses { d.clone() } else { &d - p.matrix() };
        last_norm = space.operator_norm(&diff);
        if first_contraction.is_none() && last_norm < 1.0 - CONTRACTION_MARGIN {
            first_contraction = Some(n);
        }
        last_delta = kernel.evaluate(&d).value;
        if witness_n0.is_none() && last_delta < 1.0 - CONTRACTION_MARGIN {
            witness_n0 = Some(n);
        }
        if first_contraction.is_some() && (witness_n0.is_some() || trivial) && last_norm < 1e-300 {
            break;
        }
    }

    let norm_clause = if !hypotheses {
        Clause {
            holds: false,
            detail: format!(
                "TP = PT = P fails (defects {:.3e}, {:.3e}); ||T^n - P|| cannot vanish",
                fixes.defect, commutes.defect
            ),
        }
    } else if let Some(n) = first_contraction {
        Clause {
            holds: true,
            detail: format!("||T^{n} - P|| < 1, so ||T^n - P|| -> 0 geometrically"),
        }
    } else {
        Clause {
            holds: false,
            detail: format!(
                "||T^n - P|| >= 1 for n <= {} (last {last_norm:.6})",
                options.max_power
            ),
        }
    };

    let coefficient_clause = if !hypotheses {
        Clause {
            holds: false,
            detail: "TP = P or PT = TP fails".into(),
        }
    } else if trivial {
        // δ_I is 1 by convention; uniform I-ergodicity means T = I.
        Clause {
            holds: first_contraction.is_some(),
            detail: "P = I: delta_P fixed to 1, clause read from T = I".into(),
        }
    } else if let Some(n) = witness_n0 {
        Clause {
            holds: true,
            detail: format!("delta_P(T^{n}) < 1"),
        }
    } else {
        Clause {
            holds: false,
            detail: format!(
                "delta_P(T^n) >= 1 for n <= {} (last {last_delta:.6})",
                options.max_power
            ),
        }
    };

    let r = report.r_tp;
    let spectral_clause = Clause {
        holds: hypotheses && r < 1.0 - CONTRACTION_MARGIN,
        detail: if hypotheses {
            format!("r(T - P) = {r:.12}")
        } else {
            "TP = P or PT = TP fails".into()
        },
    };
    let indeterminate = hypotheses && (1.0 - CONTRACTION_MARGIN..1.0 - ROUNDOFF_BAND).contains(&r);

    let weak = if commutes.commutes {
        // Submultiplicativity on Σ_P turns one contraction into decay.
        witness_n0.is_some()
    } else {
        last_delta <= 1e-9
    };

    let mut diagnostics = Vec::new();
    if norm_clause.holds != spectral_clause.holds {
        diagnostics.push(format!(
            "power-trail clause disagrees with the spectral clause (r = {r:.12}, cap {})",
            options.max_power
        ));
    }
    if coefficient_clause.holds != spectral_clause.holds {
        diagnostics.push(format!(
            "coefficient clause disagrees with the spectral clause (r = {r:.12}, cap {})",
            options.max_power
        ));
    }
    if indeterminate {
        diagnostics.push(format!("r(T - P) = {r} is indeterminate at tolerance"));
    }

    let verdict = ErgodicityVerdict {
        uniform: spectral_clause.holds,
        weak: weak || spectral_clause.holds,
        indeterminate,
        witness_n0,
        fixes_projection: fixes.commutes,
        commutes: commutes.commutes,
        norm_clause,
        coefficient_clause,
        spectral_clause,
        diagnostics,
    };
    Ok((verdict, report))
}

/// `β*`, checked against `r(T − P)`; only meaningful for uniformly ergodic `T`.
pub fn best_rate(t: &MarkovOperator, p: &MarkovProjection) -> Result<f64, SpectralError> {
    let (verdict, report) = classify(t, p, ClassifyOptions::default())?;
    if !verdict.uniform {
        return Err(SpectralError::NotUniformlyErgodic);
    }
    if (report.beta_star - report.r_tp).abs() > RATE_TOL {
        return Err(SpectralError::RateMismatch {
            beta_star: report.beta_star,
            radius: report.r_tp,
            tol: RATE_TOL,
        });
    }
    Ok(report.r_tp)
}

fn require_fixed(t: &MarkovOperator, p: &MarkovProjection) -> Result<(), SpectralError> {
    let fixes = t.fixes(p);
    let commutes = t.commutes(p);
    if !fixes.commutes || !commutes.commutes {
        return Err(SpectralError::Hypothesis(format!(
            "TP = PT = P (defects {:.3e}, {:.3e})",
            fixes.defect, commutes.defect
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateProfile {
    /// `‖Tⁿ − P‖` for `n = 1..=N`.
    pub norms: Vec<f64>,
    /// `αₙ = ‖Tⁿ − P‖^{1/n} − β*`.
    pub alphas: Vec<f64>,
    pub beta_star: f64,
    /// Least-squares (log-space) `C` in `‖Tⁿ − P‖ ≈ C β*ⁿ` over the second half.
    pub fitted_c: Option<f64>,
}

pub fn rate_profile(
    t: &MarkovOperator,
    p: &MarkovProjection,
    n_max: usize,
) -> Result<RateProfile, SpectralError> {
    let spectrum = eigenvalues(t.matrix())?;
    let beta_star = beta_star_of(&spectrum);
    let deflate = t.fixes(p).commutes && t.commutes(p).commutes;
    let space = t.space();
    let norms: Vec<f64> = PowerTrail::new(t, p, deflate)
        .take(n_max)
        .map(|d| {
            if deflate {
                space.operator_norm(&d)
            } else {
                space.operator_norm(&(&d - p.matrix()))
            }
        })
        .collect();
    let alphas = norms
        .iter()
        .enumerate()
        .map(|(k, v)| v.powf(1.0 / (k + 1) as f64) - beta_star)
        .collect();
    let tail: Vec<(usize, f64)> = norms
        .iter()
        .enumerate()
        .skip(n_max / 2)
        .filter(|(_, v)| **v > 0.0)
        .map(|(k, v)| (k + 1, *v))
        .collect();
    let fitted_c = if beta_star > 0.0 && !tail.is_empty() {
        let log_c = tail
            .iter()
            .map(|(n, v)| v.ln() - *n as f64 * beta_star.ln())
            .sum::<f64>()
            / tail.len() as f64;
        Some(log_c.exp())
    } else {
        None
    };
    Ok(RateProfile {
        norms,
        alphas,
        beta_star,
        fitted_c,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GelfandTrail {
    /// `(n, δ_P(Tⁿ)^{1/n})`.
    pub terms: Vec<(usize, f64)>,
    pub radius: f64,
    /// Every term is at least `r(T − P) − 1e−9`.
    pub bounded_below: bool,
    pub certified_exact: bool,
}

/// `δ_P(Tⁿ)^{1/n}` for `n = 1..=N`; the sequence converges to, and is
/// bounded below by, `r(T − P)`.
pub fn gelfand_trail(
    t: &MarkovOperator,
    p: &MarkovProjection,
    n_max: usize,
) -> Result<GelfandTrail, SpectralError> {
    require_fixed(t, p)?;
    let radius = spectral_radius(&(t.matrix() - p.matrix()))?;
    let kernel = KernelPolytope::new(p);
    let terms: Vec<(usize, f64)> = PowerTrail::new(t, p, true)
        .take(n_max)
        .enumerate()
        .map(|(k, d)| {
            let n = k + 1;
            (n, kernel.evaluate(&d).value.powf(1.0 / n as f64))
        })
        .collect();
    Ok(GelfandTrail {
        bounded_below: terms.iter().all(|(_, v)| *v >= radius - 1e-9),
        terms,
        radius,
        certified_exact: kernel.is_exact(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumShiftReport {
    /// `σ(T) \ {0, 1}`.
    pub operator_part: Vec<Complex<f64>>,
    /// `σ(T − P) \ {0, 1}`.
    pub shifted_part: Vec<Complex<f64>>,
    /// Optimal matching `(operator index, shifted index)`.
    pub matching: Vec<(usize, usize)>,
    pub max_distance: f64,
    pub holds: bool,
}

/// Matching tolerance for the spectrum comparison.
pub const SHIFT_MATCH_TOL: f64 = 1e-7;
const ZERO_EXCLUSION: f64 = 1e-6;

/// `σ(T − P)` and `σ(T)` coincide away from `{0, 1}` when `TP = PT = P`.
pub fn spectrum_shift_check(
    t: &MarkovOperator,
    p: &MarkovProjection,
) -> Result<SpectrumShiftReport, SpectralError> {
    require_fixed(t, p)?;
    let keep = |l: &Complex<f64>| l.norm() > ZERO_EXCLUSION && !is_unit(l);
    let operator_part: Vec<_> = eigenvalues(t.matrix())?.into_iter().filter(keep).collect();
    let shifted_part: Vec<_> = eigenvalues(&(t.matrix() - p.matrix()))?
        .into_iter()
        .filter(keep)
        .collect();
    if operator_part.len() != shifted_part.len() {
        return Ok(SpectrumShiftReport {
            operator_part,
            shifted_part,
            matching: Vec::new(),
            max_distance: f64::INFINITY,
            holds: false,
        });
    }
    let k = operator_part.len();
    let cost = DMatrix::from_fn(k, k, |i, j| (operator_part[i] - shifted_part[j]).norm());
    let assignment = min_cost_assignment(&cost);
    let matching: Vec<(usize, usize)> = assignment.into_iter().enumerate().collect();
    let max_distance = matching
        .iter()
        .map(|&(i, j)| cost[(i, j)])
        .fold(0.0, f64::max);
    Ok(SpectrumShiftReport {
        operator_part,
        shifted_part,
        matching,
        max_distance,
        holds: max_distance <= SHIFT_MATCH_TOL,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiplicativityReport {
    pub delta: f64,
    pub radius: f64,
    /// `δ_P(T) = r(T − P)`.
    pub delta_equals_radius: bool,
    /// `δ_P(Tⁿ) = δ_P(T)ⁿ` for all `n ≤ N`.
    pub multiplicative: bool,
    /// First `(n, δ_P(Tⁿ), δ_P(T)ⁿ)` that breaks multiplicativity.
    pub first_deviation: Option<(usize, f64, f64)>,
    pub agree: bool,
}

/// Multiplicativity tolerance.
pub const MULTIPLICATIVITY_TOL: f64 = 1e-8;

/// Tests both sides of the equivalence `δ_P(T) = r(T − P)` ⟺
/// `δ_P(Tⁿ) = δ_P(T)ⁿ` for every `n`.
pub fn multiplicativity_test(
    t: &MarkovOperator,
    p: &MarkovProjection,
    n_max: usize,
) -> Result<MultiplicativityReport, SpectralError> {
    if p.is_identity() {
        // δ_I = 1 by convention while r(T − I) can be anything.
        return Err(SpectralError::Hypothesis("P = I leaves N_P = {0}".into()));
    }
    let (verdict, report) = classify(t, p, ClassifyOptions::default())?;
    if !verdict.uniform {
        return Err(SpectralError::NotUniformlyErgodic);
    }
    let kernel = KernelPolytope::new(p);
    let delta = kernel.evaluate(t.matrix()).value;
    let radius = report.r_tp;
    let delta_equals_radius = (delta - radius).abs() <= MULTIPLICATIVITY_TOL;
    let mut first_deviation = None;
    for (k, d) in PowerTrail::new(t, p, true).take(n_max).enumerate() {
        let n = k + 1;
        let value = kernel.evaluate(&d).value;
        let expected = delta.powi(n as i32);
        if (value - expected).abs() > MULTIPLICATIVITY_TOL {
            first_deviation = Some((n, value, expected));
            break;
        }
    }
    let multiplicative = first_deviation.is_none();
    Ok(MultiplicativityReport {
        delta,
        radius,
        delta_equals_radius,
        multiplicative,
        first_deviation,
        agree: delta_equals_radius == multiplicative,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorBoundReport {
    /// `r(S ⊗ T − Q ⊗ P)`.
    pub lhs: f64,
    pub left_radius: f64,
    pub right_radius: f64,
    /// `max{r(S − Q), r(T − P)}`.
    pub rhs: f64,
    /// Largest of `‖ZQ‖, ‖QZ‖, ‖PR‖, ‖RP‖` with `Z = S − Q`, `R = T − P`.
    pub annihilation_defect: f64,
    pub holds: bool,
    pub tight: bool,
    pub product_uniform: bool,
}

/// Bound tolerance and tightness tolerance for the tensor product radius.
pub const TENSOR_BOUND_TOL: f64 = 1e-9;
pub const TENSOR_TIGHT_TOL: f64 = 1e-8;

/// `r(S ⊗ T − Q ⊗ P) ≤ max{r(S − Q), r(T − P)}` for uniformly ergodic factors.
pub fn tensor_rate_bound(
    s: &MarkovOperator,
    q: &MarkovProjection,
    t: &MarkovOperator,
    p: &MarkovProjection,
) -> Result<TensorBoundReport, SpectralError> {
    if !s.space().is_lattice() || !t.space().is_lattice() {
        return Err(SpectralError::Operator(OperatorError::NotSimplex(
            "tensor rate bound",
        )));
    }
    let (vs, rs) = classify(s, q, ClassifyOptions::default())?;
    let (vt, rt) = classify(t, p, ClassifyOptions::default())?;
    if !vs.uniform || !vt.uniform {
        return Err(SpectralError::Hypothesis(
            "both factors must be uniformly ergodic".into(),
        ));
    }
    let z = s.matrix() - q.matrix();
    let r = t.matrix() - p.matrix();
    let annihilation_defect = [
        s.space().operator_norm(&(&z * q.matrix())),
        s.space().operator_norm(&(q.matrix() * &z)),
        t.space().operator_norm(&(p.matrix() * &r)),
        t.space().operator_norm(&(&r * p.matrix())),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    if annihilation_defect > OPERATOR_TOL {
        return Err(SpectralError::Hypothesis(format!(
            "ZQ = QZ = 0 and PR = RP = 0 (defect {annihilation_defect:.3e})"
        )));
    }
    let product = kronecker(s, t)?;
    let projection = q.kronecker(p)?;
    let lhs = spectral_radius(&(product.matrix() - projection.matrix()))?;
    let rhs = rs.r_tp.max(rt.r_tp);
    let (verdict, _) = classify(&product, &projection, ClassifyOptions::default())?;
    Ok(TensorBoundReport {
        lhs,
        left_radius: rs.r_tp,
        right_radius: rt.r_tp,
        rhs,
        annihilation_defect,
        holds: lhs <= rhs + TENSOR_BOUND_TOL,
        tight: (lhs - rhs).abs() <= TENSOR_TIGHT_TOL,
        product_uniform: verdict.uniform,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{gelfand_radius, l1_operator_norm};
    use crate::operators::validate_markov;
    use crate::statespace::{make_embedded, make_simplex, InnerBall, StateSpace};
    use approx::assert_abs_diff_eq;
    use std::sync::Arc;

    #[test]
    fn permutation_spectrum_despite_stalled_qr() {
        // Two fixed points and a 4-cycle; plain Francis QR cycles on this.
        let mut m = DMatrix::zeros(6, 6);
        for (row, col) in [(0, 0), (1, 1), (2, 3), (3, 4), (4, 5), (5, 2)] {
            m[(row, col)] = 1.0;
        }
        let values = eigenvalues(&m).unwrap();
        assert_eq!(values.len(), 6);
        for l in &values {
            assert_abs_diff_eq!(l.norm(), 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!((l.powi(4) - Complex::new(1.0, 0.0)).norm(), 0.0, epsilon = 1e-10);
        }
        let near_one = values.iter().filter(|l| (*l - Complex::new(1.0, 0.0)).norm() < 1e-8).count();
        assert_eq!(near_one, 3);
    }

    fn simplex(n: usize) -> Arc<StateSpace> {
        Arc::new(make_simplex(n).unwrap())
    }

    fn chain(a: f64, b: f64) -> DMatrix<f64> {
        DMatrix::from_column_slice(2, 2, &[1.0 - a, a, b, 1.0 - b])
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

    /// Trace/determinant oracle for 2×2 spectra.
    fn eig2(m: &DMatrix<f64>) -> (Complex<f64>, Complex<f64>) {
        let tr = m[(0, 0)] + m[(1, 1)];
        let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
        let disc = Complex::new(tr * tr - 4.0 * det, 0.0).sqrt();
        ((tr + disc) / 2.0, (tr - disc) / 2.0)
    }

    #[test]
    fn eigenvalue_examples() {
        let id = eigenvalues(&DMatrix::identity(3, 3)).unwrap();
        assert!(id.iter().all(|l| (l - Complex::new(1.0, 0.0)).norm() < 1e-14));
        assert_eq!(id.len(), 3);

        let m = chain(0.3, 0.1);
        let ev = eigenvalues(&m).unwrap();
        let (a, b) = eig2(&m);
        assert_abs_diff_eq!(ev[0].re, a.re, epsilon = 1e-14);
        assert_abs_diff_eq!(ev[1].re, b.re, epsilon = 1e-14);
        assert_abs_diff_eq!(ev[1].re, 0.6, epsilon = 1e-14);

        let ev = eigenvalues(&chain(1.0, 1.0)).unwrap();
        assert_abs_diff_eq!(ev[0].re, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(ev[1].re, -1.0, epsilon = 1e-14);
    }

    #[test]
    fn eigenvalues_complex_pair_and_residuals() {
        // Cyclic shift on three states: cube roots of unity.
        let m = DMatrix::from_column_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0]);
        let ev = eigenvalues(&m).unwrap();
        assert!(ev.iter().all(|l| (l.norm() - 1.0).abs() < 1e-12));
        let ims: Vec<f64> = ev.iter().map(|l| l.im).collect();
        assert!(ims.iter().any(|v| (v - 3f64.sqrt() / 2.0).abs() < 1e-12));
        for l in ev {
            let v = eigenvector(&m, l).unwrap();
            assert!(eigen_residual(&m, l, &v) <= 1e-8);
        }
    }

    #[test]
    fn non_finite_rejected() {
        let mut m = DMatrix::identity(2, 2);
        m[(0, 1)] = f64::NAN;
        assert_eq!(eigenvalues(&m), Err(SpectralError::NonFinite));
    }

    #[test]
    fn classify_two_state() {
        let (t, p) = two_state();
        let (v, r) = classify(&t, &p, ClassifyOptions::default()).unwrap();
        assert!(v.uniform && v.weak);
        assert_eq!(v.witness_n0, Some(1));
        assert!(v.clauses_agree());
        assert_abs_diff_eq!(r.r_tp, 0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(r.beta_star, 0.6, epsilon = 1e-12);
        assert!(r.one_isolated);
        assert_abs_diff_eq!(r.isolation_distance.unwrap(), 0.4, epsilon = 1e-12);
    }

    #[test]
    fn classify_swap_not_ergodic() {
        let (t, p) = swap();
        let (v, r) = classify(&t, &p, ClassifyOptions::default()).unwrap();
        assert!(!v.uniform && !v.weak);
        assert!(!v.indeterminate);
        assert!(v.clauses_agree());
        assert_abs_diff_eq!(r.r_tp, 1.0, epsilon = 1e-12);
        assert_eq!(v.witness_n0, None);
    }

    #[test]
    fn classify_projection_itself() {
        let (_, p) = two_state();
        let (v, r) = classify(&p.as_operator(), &p, ClassifyOptions::default()).unwrap();
        assert!(v.uniform);
        assert_eq!(r.r_tp, 0.0);
        assert_eq!(v.witness_n0, Some(1));
        assert!(v.clauses_agree());
    }

    #[test]
    fn classify_identity_projection() {
        let s = simplex(3);
        let id = MarkovProjection::identity(s.clone());
        let (v, _) = classify(&MarkovOperator::identity(s), &id, ClassifyOptions::default()).unwrap();
        assert!(v.uniform);
        assert!(v.clauses_agree());
        let (t, _) = two_state();
        let (v, _) = classify(&t, &MarkovProjection::identity(simplex(2)), ClassifyOptions::default())
            .unwrap();
        assert!(!v.uniform && v.clauses_agree());
    }

    #[test]
    fn best_rate_examples() {
        let (t, p) = two_state();
        assert_abs_diff_eq!(best_rate(&t, &p).unwrap(), 0.6, epsilon = 1e-12);
        let (t, p) = block();
        assert_abs_diff_eq!(best_rate(&t, &p).unwrap(), 0.8, epsilon = 1e-12);
        let space = Arc::new(make_embedded(1, InnerBall::L1).unwrap());
        let t = validate_markov(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.5]), space.clone())
            .unwrap();
        let p = MarkovProjection::rank_one(space, DVector::from_vec(vec![1.0, 0.0])).unwrap();
        assert_abs_diff_eq!(best_rate(&t, &p).unwrap(), 0.5, epsilon = 1e-12);
        let (t, p) = swap();
        assert_eq!(best_rate(&t, &p), Err(SpectralError::NotUniformlyErgodic));
    }

    #[test]
    fn gelfand_trail_examples() {
        let (t, p) = two_state();
        let g = gelfand_trail(&t, &p, 30).unwrap();
        assert!(g.terms.iter().all(|(_, v)| (v - 0.6).abs() < 1e-9));
        assert!(g.bounded_below);

        let g = gelfand_trail(&p.as_operator(), &p, 10).unwrap();
        assert!(g.terms.iter().all(|(_, v)| *v == 0.0));

        let (t, p) = block();
        let g = gelfand_trail(&t, &p, 30).unwrap();
        assert!(g.bounded_below);
        assert!((g.terms[29].1 - 0.8).abs() < 1e-9);
    }

    #[test]
    fn rate_profile_two_state() {
        let (t, p) = two_state();
        let prof = rate_profile(&t, &p, 40).unwrap();
        for (k, v) in prof.norms.iter().enumerate() {
            let closed = 0.9 * 0.6f64.powi(k as i32);
            assert!((v - closed).abs() <= 1e-12 * closed.max(1e-300) + 1e-300, "{k}: {v} vs {closed}");
        }
        assert!(prof.alphas[39].abs() < 0.01);
        assert!(prof.alphas[39].abs() < prof.alphas[19].abs() + 1e-9);
        assert_abs_diff_eq!(prof.fitted_c.unwrap(), 1.5, epsilon = 1e-9);
    }

    #[test]
    fn spectrum_shift_examples() {
        for (t, p) in [two_state(), block()] {
            let s = spectrum_shift_check(&t, &p).unwrap();
            assert!(s.holds, "{s:?}");
        }
        let (t, p) = block();
        let s = spectrum_shift_check(&t, &p).unwrap();
        let mut mods: Vec<f64> = s.operator_part.iter().map(|l| l.norm()).collect();
        mods.sort_by(f64::total_cmp);
        assert_abs_diff_eq!(mods[0], 0.4, epsilon = 1e-12);
        assert_abs_diff_eq!(mods[1], 0.8, epsilon = 1e-12);

        let (_, p) = two_state();
        let s = spectrum_shift_check(&p.as_operator(), &p).unwrap();
        assert!(s.operator_part.is_empty() && s.shifted_part.is_empty() && s.holds);
    }

    #[test]
    fn multiplicativity_examples() {
        let (t, p) = two_state();
        let m = multiplicativity_test(&t, &p, 20).unwrap();
        assert!(m.delta_equals_radius && m.multiplicative && m.agree);
        let (t, p) = block();
        let m = multiplicativity_test(&t, &p, 20).unwrap();
        assert!(m.delta_equals_radius && m.multiplicative && m.agree);
    }

    #[test]
    fn tensor_bound_examples() {
        let s2 = simplex(2);
        let (s, q) = two_state();
        let t = validate_markov(chain(0.6, 0.2), s2.clone()).unwrap();
        let p = MarkovProjection::rank_one(s2, DVector::from_vec(vec![0.25, 0.75])).unwrap();
        let rep = tensor_rate_bound(&s, &q, &t, &p).unwrap();
        assert_abs_diff_eq!(rep.lhs, 0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(rep.rhs, 0.6, epsilon = 1e-12);
        assert!(rep.holds && rep.tight && rep.product_uniform);

        let rep = tensor_rate_bound(&q.as_operator(), &q, &p.as_operator(), &p).unwrap();
        assert_eq!(rep.rhs, 0.0);
        assert!(rep.lhs <= 1e-12 && rep.holds);
    }

    #[test]
    fn gelfand_radius_agrees_with_eigenvalues() {
        let (t, p) = block();
        let d = t.matrix() - p.matrix();
        let r = spectral_radius(&d).unwrap();
        let g = gelfand_radius(&d, 24, l1_operator_norm);
        assert!((g - r).abs() <= 1e-4 * r);
    }
}
