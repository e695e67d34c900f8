use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use ergodicity::corpus;
use ergodicity::doeblin::{CertificateCheck, DoeblinError, IMPLIED_BOUND_TOL};
use ergodicity::operators::OPERATOR_TOL;
use ergodicity::spectral::{
    SpectralError, CONTRACTION_MARGIN, TENSOR_BOUND_TOL, TENSOR_TIGHT_TOL, UNIT_EIGENVALUE_TOL,
};
use ergodicity::{
    check_dp, classify, delta, delta_p, rate_profile, search_certificate, tensor_rate_bound,
    verify_dp_star, ClassifyOptions, MarkovProjection, OperatorError,
};
use nalgebra::DVector;
use rayon::prelude::*;

use crate::checks::{self, Context, Status, CHECK_NAMES};
use crate::instance::{decimal, load, Instance};
use crate::report::*;
use crate::{CliError, Format, Options, Output, Which};

/// Exact coefficients are vertex maxima; they carry rounding only.
const DELTA_TOL: f64 = 1e-12;

fn echo(inst: &Instance) -> InstanceEcho {
    InstanceEcho {
        digest: inst.digest(),
        space: inst.space.kind().name(),
        dim: inst.space.dim(),
    }
}

fn render(format: Format, text: String, structured: String) -> Output {
    Output {
        text: match format {
            Format::Text => text,
            Format::Structured => structured,
        },
        code: 0,
    }
}

fn spectral_failure(e: SpectralError) -> CliError {
    match e {
        SpectralError::Operator(OperatorError::NotSimplex(what)) => {
            CliError::Unsupported(format!("{what} needs simplex-type spaces"))
        }
        SpectralError::Hypothesis(_) | SpectralError::NotUniformlyErgodic => {
            CliError::Validation(e.to_string())
        }
        other => CliError::Validation(other.to_string()),
    }
}

pub fn analyze(path: &Path, o: &Options) -> Result<Output, CliError> {
    let clock = Instant::now();
    let inst = load(path)?;
    let parsed = clock.elapsed().as_secs_f64();
    let (t, p) = (&inst.t, &inst.p);

    let clock = Instant::now();
    let d = delta(t);
    let dp = delta_p(t, p);
    let coeff_time = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let options = ClassifyOptions {
        max_power: o.max_power,
    };
    let (verdict, spectral) = classify(t, p, options).map_err(spectral_failure)?;
    let profile = if verdict.uniform {
        Some(rate_profile(t, p, o.max_power.max(2)).map_err(spectral_failure)?)
    } else {
        None
    };
    let spectral_time = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let certs = if inst.space.is_lattice() {
        Some(certificates(&inst, Which::Both, o.n0_cap)?)
    } else {
        None
    };
    let cert_time = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let check_list = checks::run_all(
        &Context {
            t,
            p,
            verdict: &verdict,
            report: &spectral,
            expected_uniform: None,
            seed: o.seed,
        },
        o,
    );
    let check_time = clock.elapsed().as_secs_f64();

    let fixes = t.fixes(p);
    let commutes = t.commutes(p);
    let report = AnalysisReport {
        command: "analyze",
        instance: echo(&inst),
        validation: Validation {
            markov: true,
            projection: projection_kind(p),
            tp_equals_p: Flag {
                holds: fixes.commutes,
                defect: decimal(fixes.defect),
                tolerance: decimal(OPERATOR_TOL),
            },
            pt_equals_tp: Flag {
                holds: commutes.commutes,
                defect: decimal(commutes.defect),
                tolerance: decimal(OPERATOR_TOL),
            },
        },
        delta: delta_entry(&d, DELTA_TOL),
        delta_p: delta_entry(&dp, DELTA_TOL),
        spectral: SpectralEntry {
            eigenvalues: complex(&spectral.eigenvalues),
            shifted_eigenvalues: complex(&spectral.shifted_eigenvalues),
            r_tp: decimal(spectral.r_tp),
            beta_star: decimal(spectral.beta_star),
            one_isolated: spectral.one_isolated,
            isolation_distance: spectral.isolation_distance.map(decimal),
            gap_value: decimal(spectral.gap_value),
            unit_tolerance: decimal(UNIT_EIGENVALUE_TOL),
        },
        verdict: VerdictEntry {
            uniform: verdict.uniform,
            weak: verdict.weak,
            indeterminate: verdict.indeterminate,
            witness_n0: verdict.witness_n0,
            clauses: vec![
                ClauseEntry {
                    name: "power-trail",
                    holds: verdict.norm_clause.holds,
                    detail: verdict.norm_clause.detail.clone(),
                },
                ClauseEntry {
                    name: "coefficient",
                    holds: verdict.coefficient_clause.holds,
                    detail: verdict.coefficient_clause.detail.clone(),
                },
                ClauseEntry {
                    name: "spectral",
                    holds: verdict.spectral_clause.holds,
                    detail: verdict.spectral_clause.detail.clone(),
                },
            ],
            diagnostics: verdict.diagnostics.clone(),
            max_power: o.max_power,
            contraction_margin: decimal(CONTRACTION_MARGIN),
        },
        rate_profile: profile.map(|r| RateEntry {
            norms: r.norms.iter().map(|x| decimal(*x)).collect(),
            alphas: r.alphas.iter().map(|x| decimal(*x)).collect(),
            beta_star: decimal(r.beta_star),
            fitted_c: r.fitted_c.map(decimal),
        }),
        certificates: certs,
        checks: check_list,
        timings: o.timings.then(|| {
            [
                ("parse", parsed),
                ("coefficients", coeff_time),
                ("spectral", spectral_time),
                ("certificates", cert_time),
                ("checks", check_time),
            ]
            .into_iter()
            .map(|(stage, s)| Timing {
                stage,
                seconds: format!("{s:.6}"),
            })
            .collect()
        }),
    };
    Ok(render(o.format, report.text(), structured(&report)))
}

fn summary(c: &CertificateCheck, tolerance: f64) -> CheckSummary {
    CheckSummary {
        valid: c.valid(),
        violations: c.violations.iter().map(ToString::to_string).collect(),
        implied_bound: decimal(c.implied_bound),
        actual_delta: decimal(c.actual_delta),
        tolerance: decimal(tolerance),
    }
}

fn doeblin_failure(e: DoeblinError) -> CliError {
    match e {
        DoeblinError::Unsupported(kind) => {
            CliError::Unsupported(format!("Doeblin conditions need a lattice space, got {kind}"))
        }
        other => CliError::Validation(other.to_string()),
    }
}

fn certificates(
    inst: &Instance,
    which: Which,
    n0_cap: usize,
) -> Result<CertificatesEntry, CliError> {
    let (t, p) = (&inst.t, &inst.p);
    let candidates = inst.q.clone().map(|q| vec![q]);
    let search = search_certificate(t, p, n0_cap, candidates).map_err(doeblin_failure)?;
    let tol = IMPLIED_BOUND_TOL;
    let dp = match which {
        Which::DpStar => None,
        _ => Some(match &search.dp {
            Some(c) => Some(TauEntry {
                tau: decimal(c.tau),
                n0: c.n0,
                q: projection_entry(&c.q),
                phi: c.phi.iter().map(vector).collect(),
                sup_phi_norm: decimal(c.sup_phi_norm),
                verification: summary(&check_dp(c, t, p).map_err(doeblin_failure)?, tol),
            }),
            None => None,
        }),
    };
    let dp_star = match which {
        Which::Dp => None,
        _ => Some(match &search.dp_star {
            Some(c) => Some(LambdaEntry {
                lambda: decimal(c.lambda),
                n0: c.n0,
                q: projection_entry(&c.q),
                u: c.u.iter().map(vector).collect(),
                verification: summary(&verify_dp_star(c, t, p).map_err(doeblin_failure)?, tol),
            }),
            None => None,
        }),
    };
    let exhausted = match which {
        Which::Dp => search.dp.is_none(),
        Which::DpStar => search.dp_star.is_none(),
        Which::Both => search.dp.is_none() && search.dp_star.is_none(),
    };
    Ok(CertificatesEntry {
        n0_cap,
        candidates: search.candidates,
        scanned_n0: search.scanned_n0,
        dp,
        dp_star,
        best_lambda: decimal(search.best_lambda),
        exhausted,
        diagnostics: search.diagnostics,
    })
}

pub fn doeblin(path: &Path, which: Which, o: &Options) -> Result<Output, CliError> {
    let inst = load(path)?;
    let report = DoeblinReport {
        command: "doeblin",
        instance: echo(&inst),
        certificates: certificates(&inst, which, o.n0_cap)?,
    };
    Ok(render(o.format, report.text(), structured(&report)))
}

pub fn tensor(left: &Path, right: &Path, o: &Options) -> Result<Output, CliError> {
    let s = load(left)?;
    let t = load(right)?;
    for inst in [&s, &t] {
        if !inst.space.is_lattice() {
            return Err(CliError::Unsupported(format!(
                "tensor products need simplex-type factors, got {}",
                inst.space.kind().name()
            )));
        }
    }
    let r = tensor_rate_bound(&s.t, &s.p, &t.t, &t.p).map_err(spectral_failure)?;
    let bound_tol = o.tolerance.max(TENSOR_BOUND_TOL);
    let report = TensorReport {
        command: "tensor",
        left: echo(&s),
        right: echo(&t),
        lhs: decimal(r.lhs),
        left_radius: decimal(r.left_radius),
        right_radius: decimal(r.right_radius),
        rhs: decimal(r.rhs),
        holds: r.lhs <= r.rhs + bound_tol,
        tight: r.tight,
        bound_tolerance: decimal(bound_tol),
        tight_tolerance: decimal(TENSOR_TIGHT_TOL),
        annihilation_defect: decimal(r.annihilation_defect),
        product_uniform: r.product_uniform,
    };
    Ok(render(o.format, report.text(), structured(&report)))
}

/// Replaces the projection of a generator-certified instance with one the
/// operator does not fix; the ergodicity check must then fail by name.
fn corrupt(inst: &mut corpus::Instance) {
    if !inst.family.ergodic() {
        return;
    }
    let n = inst.t.dim();
    let mut y = DVector::from_element(n, 0.0);
    y[0] = 1.0;
    inst.p = MarkovProjection::rank_one(Arc::clone(inst.t.space()), y).expect("vertex is a state");
}

pub fn verify(count: usize, dims: &[usize], corrupt_generator: bool, o: &Options) -> Output {
    let mut instances = corpus::mixed(o.seed, count, dims);
    if corrupt_generator {
        instances.iter_mut().for_each(corrupt);
    }
    let options = ClassifyOptions {
        max_power: o.max_power,
    };
    let results: Vec<(String, Vec<checks::Check>)> = instances
        .par_iter()
        .enumerate()
        .map(|(k, inst)| {
            let checks = match classify(&inst.t, &inst.p, options) {
                Ok((verdict, report)) => checks::run_all(
                    &Context {
                        t: &inst.t,
                        p: &inst.p,
                        verdict: &verdict,
                        report: &report,
                        expected_uniform: Some(inst.family.ergodic()),
                        seed: o.seed.wrapping_add(k as u64),
                    },
                    o,
                ),
                Err(e) => vec![checks::Check {
                    name: "ergodicity-equivalence",
                    status: Status::Fail,
                    tolerance: decimal(CONTRACTION_MARGIN),
                    detail: e.to_string(),
                }],
            };
            (inst.label.clone(), checks)
        })
        .collect();

    let mut tallies: Vec<Tally> = CHECK_NAMES
        .iter()
        .map(|&name| Tally {
            name,
            passed: 0,
            failed: 0,
            skipped: 0,
        })
        .collect();
    let mut failures = Vec::new();
    for (label, list) in &results {
        for c in list {
            let tally = tallies
                .iter_mut()
                .find(|t| t.name == c.name)
                .expect("every check is registered");
            match c.status {
                Status::Pass => tally.passed += 1,
                Status::Skipped => tally.skipped += 1,
                Status::Fail => {
                    tally.failed += 1;
                    failures.push(Failure {
                        instance: label.clone(),
                        check: c.name,
                        detail: c.detail.clone(),
                    });
                }
            }
        }
    }
    let all_passed = failures.is_empty();
    let report = VerifyReport {
        command: "verify",
        seed: o.seed,
        count,
        dims: dims.to_vec(),
        instances: instances.len(),
        tolerance: decimal(o.tolerance),
        checks: tallies,
        failures,
        all_passed,
    };
    let mut out = render(o.format, report.text(), structured(&report));
    out.code = if all_passed { 0 } else { 1 };
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ergodicity::corpus::Family;

    #[test]
    fn empty_verify_passes() {
        let out = verify(0, &[2, 3], false, &Options::default());
        assert_eq!(out.code, 0);
        assert!(out.text.contains("0 instances"));
    }

    #[test]
    fn family_labels_survive_corruption() {
        let mut inst = corpus::mixed(3, 1, &[3]).remove(0);
        assert_eq!(inst.family, Family::RankOne);
        corrupt(&mut inst);
        assert!(!inst.t.fixes(&inst.p).commutes);
    }
}
