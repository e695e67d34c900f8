//! The named checks run by `analyze` (on one instance) and `verify` (on a
//! corpus).

use std::sync::Arc;

use ergodicity::coefficients::PROPERTY_TOL;
use ergodicity::corpus;
use ergodicity::spectral::{
    ErgodicityVerdict, SpectralReport, MULTIPLICATIVITY_TOL, RATE_TOL, SHIFT_MATCH_TOL,
};
use ergodicity::{
    check_coefficient_properties, check_dp, delta_bruteforce, delta_p, eigenvalue_bound_check,
    gelfand_trail, make_simplex, multiplicativity_test, pair_formula, search_certificate,
    spectrum_shift_check, tensor_rate_bound, verify_dp_star, MarkovOperator, MarkovProjection,
};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::instance::decimal;
use crate::Options;

pub const CHECK_NAMES: [&str; 12] = [
    "coefficient-bounds",
    "pair-formula",
    "coefficient-oracle",
    "eigenvalue-bound",
    "ergodicity-equivalence",
    "best-rate",
    "gelfand-limit",
    "spectrum-shift",
    "multiplicativity",
    "doeblin-equivalence",
    "doeblin-star-soundness",
    "tensor-bound",
];

const PAIR_TOL: f64 = 1e-12;
const ORACLE_SAMPLES: usize = 10_000;
const GELFAND_TERMS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub status: Status,
    pub tolerance: String,
    pub detail: String,
}

fn check(name: &'static str, pass: bool, tol: f64, detail: String) -> Check {
    Check {
        name,
        status: if pass { Status::Pass } else { Status::Fail },
        tolerance: decimal(tol),
        detail,
    }
}

fn skip(name: &'static str, why: &str) -> Check {
    Check {
        name,
        status: Status::Skipped,
        tolerance: String::new(),
        detail: why.to_string(),
    }
}

/// Second factor for the tensor check: a fixed two-state chain at its
/// stationary distribution.
fn tensor_partner() -> (MarkovOperator, MarkovProjection) {
    let space = Arc::new(make_simplex(2).expect("dimension 2"));
    let m = DMatrix::from_column_slice(2, 2, &[0.7, 0.3, 0.1, 0.9]);
    let t = MarkovOperator::new(m, space.clone()).expect("stochastic");
    let p = MarkovProjection::rank_one(space, DVector::from_vec(vec![0.25, 0.75])).expect("state");
    (t, p)
}

pub struct Context<'a> {
    pub t: &'a MarkovOperator,
    pub p: &'a MarkovProjection,
    pub verdict: &'a ErgodicityVerdict,
    pub report: &'a SpectralReport,
    /// What the generator promises about uniform ergodicity, if anything.
    pub expected_uniform: Option<bool>,
    pub seed: u64,
}

pub fn run_all(cx: &Context, o: &Options) -> Vec<Check> {
    let (t, p, v) = (cx.t, cx.p, cx.verdict);
    let lattice = t.space().is_lattice();
    let hypotheses = v.fixes_projection && v.commutes;
    let trivial = p.is_identity();
    let mut out = Vec::with_capacity(CHECK_NAMES.len());

    let mut rng = corpus::rng(cx.seed);
    let n = t.dim();
    let companion = if lattice {
        corpus::companion(&mut rng, p)
    } else {
        p.as_operator()
    };
    let h = DMatrix::identity(n, n) - p.matrix();
    let props = check_coefficient_properties(t, &companion, &h, p);
    let failing: Vec<&str> = props
        .checks()
        .iter()
        .filter(|(_, c)| !c.ok())
        .map(|(name, _)| *name)
        .collect();
    out.push(check(
        "coefficient-bounds",
        failing.is_empty(),
        PROPERTY_TOL,
        if failing.is_empty() {
            "bounds, Lipschitz, difference, commuting and annihilated factors, submultiplicativity".into()
        } else {
            format!("failing: {}", failing.join(", "))
        },
    ));

    let exact = delta_p(t, p);
    match pair_formula(t.matrix(), p) {
        Some(pair) => out.push(check(
            "pair-formula",
            (exact.value - pair).abs() <= PAIR_TOL,
            PAIR_TOL,
            format!("vertex {} vs pair {}", decimal(exact.value), decimal(pair)),
        )),
        None => out.push(skip("pair-formula", "no closed-form pairs for this projection")),
    }

    if exact.certified_exact && !trivial {
        let sampled = delta_bruteforce(t.matrix(), p, ORACLE_SAMPLES, cx.seed);
        out.push(check(
            "coefficient-oracle",
            sampled <= exact.value + PAIR_TOL,
            PAIR_TOL,
            format!("sampled {} <= exact {}", decimal(sampled), decimal(exact.value)),
        ));
    } else {
        out.push(skip("coefficient-oracle", "no exact value to compare against"));
    }

    match eigenvalue_bound_check(t, p) {
        Ok(r) => out.push(check(
            "eigenvalue-bound",
            r.holds,
            PROPERTY_TOL,
            format!(
                "max |lambda| on range(I-P) {} <= delta_P {}",
                decimal(r.max_modulus),
                decimal(r.delta)
            ),
        )),
        Err(e) => out.push(check("eigenvalue-bound", false, PROPERTY_TOL, e.to_string())),
    }

    let agree = v.clauses_agree() && !v.indeterminate;
    let expected_ok = cx.expected_uniform.is_none_or(|e| e == v.uniform);
    out.push(check(
        "ergodicity-equivalence",
        agree && expected_ok,
        1e-10,
        format!(
            "power trail {}, coefficient {}, spectral {}{}",
            v.norm_clause.holds,
            v.coefficient_clause.holds,
            v.spectral_clause.holds,
            match cx.expected_uniform {
                Some(e) if e != v.uniform => format!("; generator promised uniform = {e}"),
                _ => String::new(),
            }
        ),
    ));

    if v.uniform {
        let gap = (cx.report.beta_star - cx.report.r_tp).abs();
        out.push(check(
            "best-rate",
            gap <= RATE_TOL,
            RATE_TOL,
            format!("|beta* - r(T-P)| = {}", decimal(gap)),
        ));
    } else {
        out.push(skip("best-rate", "not uniformly ergodic"));
    }

    if hypotheses && !trivial {
        match gelfand_trail(t, p, GELFAND_TERMS) {
            Ok(g) => {
                let low = g
                    .terms
                    .iter()
                    .map(|(_, x)| *x)
                    .fold(f64::INFINITY, f64::min);
                out.push(check(
                    "gelfand-limit",
                    low >= g.radius - o.tolerance,
                    o.tolerance,
                    format!(
                        "min over n <= {GELFAND_TERMS} of delta_P(T^n)^(1/n) = {} vs r = {}",
                        decimal(low),
                        decimal(g.radius)
                    ),
                ));
            }
            Err(e) => out.push(check("gelfand-limit", false, o.tolerance, e.to_string())),
        }
        match spectrum_shift_check(t, p) {
            Ok(s) => out.push(check(
                "spectrum-shift",
                s.holds,
                SHIFT_MATCH_TOL,
                format!(
                    "{} eigenvalues matched, max distance {}",
                    s.operator_part.len(),
                    decimal(s.max_distance)
                ),
            )),
            Err(e) => out.push(check("spectrum-shift", false, SHIFT_MATCH_TOL, e.to_string())),
        }
    } else {
        let why = if trivial { "P = I" } else { "TP = PT = P fails" };
        out.push(skip("gelfand-limit", why));
        out.push(skip("spectrum-shift", why));
    }

    if v.uniform && !trivial {
        match multiplicativity_test(t, p, GELFAND_TERMS) {
            Ok(m) => out.push(check(
                "multiplicativity",
                m.agree,
                MULTIPLICATIVITY_TOL,
                format!(
                    "delta_P = r: {}, delta_P(T^n) = delta_P(T)^n: {}",
                    m.delta_equals_radius, m.multiplicative
                ),
            )),
            Err(e) => out.push(check("multiplicativity", false, MULTIPLICATIVITY_TOL, e.to_string())),
        }
    } else {
        out.push(skip("multiplicativity", "needs uniform ergodicity and P != I"));
    }

    if lattice {
        match search_certificate(t, p, o.n0_cap, None) {
            Ok(search) => {
                let (pass, detail) = match (&search.dp, v.uniform) {
                    (Some(c), true) => match check_dp(c, t, p) {
                        Ok(chk) => (
                            chk.valid() && chk.actual_delta <= chk.implied_bound + o.tolerance,
                            format!(
                                "tau {} at n0 {}, delta_P(T^n0) {} <= {}",
                                decimal(c.tau),
                                c.n0,
                                decimal(chk.actual_delta),
                                decimal(chk.implied_bound)
                            ),
                        ),
                        Err(e) => (false, e.to_string()),
                    },
                    (None, true) => (
                        false,
                        format!("uniformly ergodic but no certificate for n0 <= {}", o.n0_cap),
                    ),
                    (None, false) => (true, format!("exhausted for n0 <= {}", search.scanned_n0)),
                    (Some(c), false) => (
                        false,
                        format!("certificate (tau {}) for a non-ergodic operator", decimal(c.tau)),
                    ),
                };
                out.push(check("doeblin-equivalence", pass, o.tolerance, detail));
                match &search.dp_star {
                    Some(c) => {
                        let valid = verify_dp_star(c, t, p).is_ok_and(|chk| chk.valid());
                        out.push(check(
                            "doeblin-star-soundness",
                            valid && v.uniform,
                            o.tolerance,
                            format!(
                                "lambda {} at n0 {}, uniform {}",
                                decimal(c.lambda),
                                c.n0,
                                v.uniform
                            ),
                        ));
                    }
                    None => out.push(skip("doeblin-star-soundness", "no lambda-certificate issued")),
                }
            }
            Err(e) => {
                out.push(check("doeblin-equivalence", false, o.tolerance, e.to_string()));
                out.push(skip("doeblin-star-soundness", "search failed"));
            }
        }
    } else {
        out.push(skip("doeblin-equivalence", "needs a lattice space"));
        out.push(skip("doeblin-star-soundness", "needs a lattice space"));
    }

    if lattice && v.uniform {
        let (s, q) = tensor_partner();
        match tensor_rate_bound(t, p, &s, &q) {
            Ok(r) => out.push(check(
                "tensor-bound",
                r.lhs <= r.rhs + o.tolerance,
                o.tolerance,
                format!(
                    "r(product - projection) {} <= {}",
                    decimal(r.lhs),
                    decimal(r.rhs)
                ),
            )),
            Err(e) => out.push(check("tensor-bound", false, o.tolerance, e.to_string())),
        }
    } else {
        out.push(skip("tensor-bound", "needs a uniformly ergodic lattice instance"));
    }

    out
}
