//! Report documents. Every real is a decimal string, and every measured
//! quantity sits next to the tolerance it was judged at.

use std::fmt::Write;

use ergodicity::{DeltaResult, MarkovProjection, ProjectionKind};
use nalgebra::{Complex, DMatrix, DVector};
use serde::Serialize;

use crate::checks::{Check, Status};
use crate::instance::decimal;

#[derive(Debug, Clone, Serialize)]
pub struct Measured {
    pub value: String,
    pub tolerance: String,
}

pub fn measured(value: f64, tolerance: f64) -> Measured {
    Measured {
        value: decimal(value),
        tolerance: decimal(tolerance),
    }
}

pub fn vector(v: &DVector<f64>) -> Vec<String> {
    v.iter().map(|x| decimal(*x)).collect()
}

/// Row-major.
pub fn matrix(m: &DMatrix<f64>) -> Vec<Vec<String>> {
    m.row_iter().map(|r| r.iter().map(|x| decimal(*x)).collect()).collect()
}

pub fn complex(values: &[Complex<f64>]) -> Vec<[String; 2]> {
    values.iter().map(|l| [decimal(l.re), decimal(l.im)]).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct InstanceEcho {
    pub digest: String,
    pub space: &'static str,
    pub dim: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Flag {
    pub holds: bool,
    pub defect: String,
    pub tolerance: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Validation {
    pub markov: bool,
    pub projection: &'static str,
    pub tp_equals_p: Flag,
    pub pt_equals_tp: Flag,
}

#[derive(Debug, Clone, Serialize)]
pub struct DeltaEntry {
    pub value: String,
    pub method: String,
    pub certified_exact: bool,
    pub upper_bound: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<String>>,
    pub tolerance: String,
}

pub fn delta_entry(d: &DeltaResult, tolerance: f64) -> DeltaEntry {
    DeltaEntry {
        value: decimal(d.value),
        method: format!("{:?}", d.method),
        certified_exact: d.certified_exact,
        upper_bound: decimal(d.upper_bound),
        witness: d.witness.as_ref().map(vector),
        tolerance: decimal(tolerance),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralEntry {
    /// `[re, im]` pairs.
    pub eigenvalues: Vec<[String; 2]>,
    pub shifted_eigenvalues: Vec<[String; 2]>,
    pub r_tp: String,
    pub beta_star: String,
    pub one_isolated: bool,
    pub isolation_distance: Option<String>,
    pub gap_value: String,
    pub unit_tolerance: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClauseEntry {
    pub name: &'static str,
    pub holds: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerdictEntry {
    pub uniform: bool,
    pub weak: bool,
    pub indeterminate: bool,
    pub witness_n0: Option<usize>,
    pub clauses: Vec<ClauseEntry>,
    pub diagnostics: Vec<String>,
    pub max_power: usize,
    pub contraction_margin: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RateEntry {
    pub norms: Vec<String>,
    pub alphas: Vec<String>,
    pub beta_star: String,
    pub fitted_c: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Timing {
    pub stage: &'static str,
    pub seconds: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalysisReport {
    pub command: &'static str,
    pub instance: InstanceEcho,
    pub validation: Validation,
    pub delta: DeltaEntry,
    pub delta_p: DeltaEntry,
    pub spectral: SpectralEntry,
    pub verdict: VerdictEntry,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate_profile: Option<RateEntry>,
    /// Absent on spaces without a lattice order.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificates: Option<CertificatesEntry>,
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<Vec<Timing>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProjectionEntry {
    pub kind: &'static str,
    pub matrix: Vec<Vec<String>>,
}

pub fn projection_entry(p: &MarkovProjection) -> ProjectionEntry {
    ProjectionEntry {
        kind: projection_kind(p),
        matrix: matrix(p.matrix()),
    }
}

pub fn projection_kind(p: &MarkovProjection) -> &'static str {
    match p.kind() {
        ProjectionKind::RankOne { .. } => "rank_one",
        ProjectionKind::BlockAveraging { .. } => "block",
        ProjectionKind::Explicit => "matrix",
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckSummary {
    pub valid: bool,
    pub violations: Vec<String>,
    pub implied_bound: String,
    pub actual_delta: String,
    pub tolerance: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct TauEntry {
    pub tau: String,
    pub n0: usize,
    pub q: ProjectionEntry,
    pub phi: Vec<Vec<String>>,
    pub sup_phi_norm: String,
    pub verification: CheckSummary,
}

#[derive(Debug, Clone, Serialize)]
pub struct LambdaEntry {
    pub lambda: String,
    pub n0: usize,
    pub q: ProjectionEntry,
    pub u: Vec<Vec<String>>,
    pub verification: CheckSummary,
}

/// Outcome of a certificate search, shared by `doeblin` and `analyze`.
#[derive(Debug, Clone, Serialize)]
pub struct CertificatesEntry {
    pub n0_cap: usize,
    pub candidates: usize,
    pub scanned_n0: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dp: Option<Option<TauEntry>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dp_star: Option<Option<LambdaEntry>>,
    pub best_lambda: String,
    pub exhausted: bool,
    pub diagnostics: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DoeblinReport {
    pub command: &'static str,
    pub instance: InstanceEcho,
    #[serde(flatten)]
    pub certificates: CertificatesEntry,
}

#[derive(Debug, Clone, Serialize)]
pub struct TensorReport {
    pub command: &'static str,
    pub left: InstanceEcho,
    pub right: InstanceEcho,
    pub lhs: String,
    pub left_radius: String,
    pub right_radius: String,
    pub rhs: String,
    pub holds: bool,
    pub tight: bool,
    pub bound_tolerance: String,
    pub tight_tolerance: String,
    pub annihilation_defect: String,
    pub product_uniform: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Tally {
    pub name: &'static str,
    pub passed: usize,
    pub failed: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Failure {
    pub instance: String,
    pub check: &'static str,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub command: &'static str,
    pub seed: u64,
    pub count: usize,
    pub dims: Vec<usize>,
    pub instances: usize,
    pub tolerance: String,
    pub checks: Vec<Tally>,
    pub failures: Vec<Failure>,
    pub all_passed: bool,
}

pub fn structured<T: Serialize>(report: &T) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("reports always serialize");
    s.push('\n');
    s
}

fn yes(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn status(s: Status) -> &'static str {
    match s {
        Status::Pass => "pass",
        Status::Fail => "FAIL",
        Status::Skipped => "skip",
    }
}

fn complex_list(v: &[[String; 2]]) -> String {
    v.iter()
        .map(|[re, im]| {
            if im.parse::<f64>().unwrap_or(0.0) == 0.0 {
                re.clone()
            } else {
                format!("{re}{}{im}i", if im.starts_with('-') { "" } else { "+" })
            }
        })
        .collect::<Vec<_>>()
        .join(", ")
}

impl AnalysisReport {
    pub fn text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "instance   {} ({}, dim {})", self.instance.digest, self.instance.space, self.instance.dim);
        let v = &self.validation;
        let _ = writeln!(
            s,
            "validation markov {}, projection {}, TP = P {} (defect {}), PT = TP {} (defect {})",
            yes(v.markov),
            v.projection,
            yes(v.tp_equals_p.holds),
            v.tp_equals_p.defect,
            yes(v.pt_equals_tp.holds),
            v.pt_equals_tp.defect
        );
        let _ = writeln!(s, "delta      {} [{}]", self.delta.value, self.delta.method);
        let _ = writeln!(s, "delta_P    {} [{}]", self.delta_p.value, self.delta_p.method);
        let sp = &self.spectral;
        let _ = writeln!(s, "spectrum   {}", complex_list(&sp.eigenvalues));
        let _ = writeln!(s, "r(T-P)     {}", sp.r_tp);
        let _ = writeln!(s, "beta*      {}", sp.beta_star);
        let _ = writeln!(s, "gap value  {}", sp.gap_value);
        let vd = &self.verdict;
        let _ = writeln!(
            s,
            "verdict    uniform {}, weak {}{}{}",
            yes(vd.uniform),
            yes(vd.weak),
            vd.witness_n0.map(|n| format!(", witness n0 = {n}")).unwrap_or_default(),
            if vd.indeterminate { ", indeterminate at tolerance" } else { "" }
        );
        for c in &vd.clauses {
            let _ = writeln!(s, "  {:<12} {}  {}", c.name, yes(c.holds), c.detail);
        }
        for d in &vd.diagnostics {
            let _ = writeln!(s, "  diagnostic: {d}");
        }
        if let Some(r) = &self.rate_profile {
            let last = r.norms.len();
            let _ = writeln!(
                s,
                "rates      ||T^{last} - P|| = {}, alpha_{last} = {}, C = {}",
                r.norms.last().map(String::as_str).unwrap_or("-"),
                r.alphas.last().map(String::as_str).unwrap_or("-"),
                r.fitted_c.as_deref().unwrap_or("-")
            );
        }
        if let Some(c) = &self.certificates {
            s.push_str(&c.text());
        }
        let _ = writeln!(s, "checks");
        for c in &self.checks {
            let _ = writeln!(s, "  {:<4} {:<24} {}", status(c.status), c.name, c.detail);
        }
        if let Some(ts) = &self.timings {
            for t in ts {
                let _ = writeln!(s, "time       {:<12} {}s", t.stage, t.seconds);
            }
        }
        s
    }
}

impl DoeblinReport {
    pub fn text(&self) -> String {
        format!("instance   {}\n{}", self.instance.digest, self.certificates.text())
    }
}

impl CertificatesEntry {
    pub fn text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "search     n0 <= {} ({} scanned), {} candidate projections",
            self.n0_cap, self.scanned_n0, self.candidates
        );
        if let Some(dp) = &self.dp {
            match dp {
                Some(c) => {
                    let _ = writeln!(
                        s,
                        "D_P        tau = {}, n0 = {}, Q {}, sup ||phi|| = {}, verified {}",
                        c.tau,
                        c.n0,
                        c.q.kind,
                        c.sup_phi_norm,
                        yes(c.verification.valid)
                    );
                    let _ = writeln!(
                        s,
                        "           delta_P(T^n0) = {} <= 1 - tau/2 = {}",
                        c.verification.actual_delta, c.verification.implied_bound
                    );
                }
                None => {
                    let _ = writeln!(s, "D_P        exhausted");
                }
            }
        }
        if let Some(star) = &self.dp_star {
            match star {
                Some(c) => {
                    let _ = writeln!(
                        s,
                        "D_P*       lambda = {}, n0 = {}, Q {}, verified {}",
                        c.lambda,
                        c.n0,
                        c.q.kind,
                        yes(c.verification.valid)
                    );
                    let _ = writeln!(
                        s,
                        "           delta_P(T^n0) = {} <= 2(1 - lambda) = {}",
                        c.verification.actual_delta, c.verification.implied_bound
                    );
                }
                None => {
                    let _ = writeln!(s, "D_P*       exhausted (best lambda {})", self.best_lambda);
                }
            }
        }
        for d in &self.diagnostics {
            let _ = writeln!(s, "diagnostic {d}");
        }
        s
    }
}

impl TensorReport {
    pub fn text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "left       {} (r = {})", self.left.digest, self.left_radius);
        let _ = writeln!(s, "right      {} (r = {})", self.right.digest, self.right_radius);
        let _ = writeln!(s, "lhs        r(S(x)T - Q(x)P) = {}", self.lhs);
        let _ = writeln!(s, "rhs        max(r(S-Q), r(T-P)) = {}", self.rhs);
        let _ = writeln!(
            s,
            "bound      {} (tol {}), tight {} (tol {})",
            if self.holds { "holds" } else { "VIOLATED" },
            self.bound_tolerance,
            yes(self.tight),
            self.tight_tolerance
        );
        s
    }
}

impl VerifyReport {
    pub fn text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "verify     seed {}, {} per dim, dims {:?}: {} instances",
            self.seed, self.count, self.dims, self.instances
        );
        for t in &self.checks {
            let _ = writeln!(
                s,
                "  {:<24} {:>5} passed {:>5} failed {:>5} skipped",
                t.name, t.passed, t.failed, t.skipped
            );
        }
        for f in &self.failures {
            let _ = writeln!(s, "FAIL {} on {}: {}", f.check, f.instance, f.detail);
        }
        let _ = writeln!(s, "{}", if self.all_passed { "all checks passed" } else { "some checks FAILED" });
        s
    }
}
