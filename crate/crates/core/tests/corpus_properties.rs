//! Spectral and coefficient relations checked across a seeded corpus.

use ergodicity::coefficients::KernelPolytope;
use ergodicity::corpus::{self, Instance};
use ergodicity::linalg::{gelfand_radius, matrix_power};
use ergodicity::spectral::{eigen_residual, eigenvector, spectral_radius};
use ergodicity::{
    classify, delta_p, eigenvalue_bound_check, eigenvalues, make_simplex, multiplicativity_test,
    rate_profile, validate_markov, ClassifyOptions, MarkovProjection,
};
use nalgebra::{DMatrix, DVector};
use std::sync::Arc;

fn corpus() -> Vec<Instance> {
    corpus::generate(99, 8, &[2, 3, 4, 5, 6], true)
}

#[test]
fn eigenpairs_have_small_residuals() {
    for inst in corpus() {
        let m = inst.t.matrix();
        let values = eigenvalues(m).unwrap();
        assert_eq!(values.len(), inst.t.dim());
        for l in values {
            // Repeated eigenvalues (permutations, reducible chains) are
            // ill-conditioned for inverse iteration; check the simple ones.
            if inst.family.ergodic() {
                let v = eigenvector(m, l).unwrap();
                assert!(eigen_residual(m, l, &v) <= 1e-8, "{}: {l}", inst.label);
            }
        }
    }
}

#[test]
fn spectral_radius_matches_gelfand_limit() {
    for inst in corpus() {
        let d = inst.t.matrix() - inst.p.matrix();
        let r = spectral_radius(&d).unwrap();
        if r >= 0.05 {
            let g = gelfand_radius(&d, 24, |a| inst.t.space().operator_norm(a));
            assert!((g - r).abs() <= 1e-4 * r, "{}: {g} vs {r}", inst.label);
        }
    }
}

#[test]
fn spectral_gap_chain() {
    for inst in corpus() {
        let n = inst.t.dim();
        let kernel = KernelPolytope::new(&inst.p);
        let complement = DMatrix::identity(n, n) - inst.p.matrix();
        let space = inst.t.space();
        for k in 1..=20u64 {
            let tn = matrix_power(inst.t.matrix(), k);
            let deflated = matrix_power(&(inst.t.matrix() - inst.p.matrix()), k);
            let d = kernel.evaluate(&deflated).value;
            assert!(space.operator_norm(&(&tn * &complement)) <= 2.0 * d + 1e-9, "{}", inst.label);
            assert!(d <= space.operator_norm(&(&tn - inst.p.matrix())) + 1e-9, "{}", inst.label);
        }
    }
}

#[test]
fn weak_ergodicity_iff_radius_below_one() {
    for inst in corpus() {
        let (v, r) = classify(&inst.t, &inst.p, ClassifyOptions::default()).unwrap();
        assert_eq!(v.weak, r.r_tp < 1.0 - 1e-10, "{}", inst.label);
        assert!(!v.uniform || v.weak);
    }
}

#[test]
fn eigenvalues_off_p_bounded_by_coefficient() {
    for inst in corpus() {
        let report = eigenvalue_bound_check(&inst.t, &inst.p).unwrap();
        assert!(report.holds, "{}", inst.label);
        let (_, r) = classify(&inst.t, &inst.p, ClassifyOptions::default()).unwrap();
        if delta_p(&inst.t, &inst.p).value < 1.0 {
            assert!(r.one_isolated, "{}", inst.label);
        }
    }
}

#[test]
fn rate_corrections_decay() {
    for inst in corpus().into_iter().filter(|i| i.family.ergodic()) {
        let prof = rate_profile(&inst.t, &inst.p, 40).unwrap();
        assert!(
            prof.alphas[39].abs() < prof.alphas[19].abs() + 1e-9,
            "{}: {:?}",
            inst.label,
            (prof.alphas[19], prof.alphas[39])
        );
    }
}

/// A three-state chain where `δ_P(T)` exceeds `r(T − P)`: neither side of the
/// multiplicativity equivalence holds.
#[test]
fn three_state_chain_without_multiplicativity() {
    let t = DMatrix::from_column_slice(
        3,
        3,
        &[
            0.21609573293449896,
            0.08884892630807022,
            0.6950553407574307,
            0.4225979743778222,
            0.31223968039295386,
            0.26516234522922394,
            0.16194818195564864,
            0.7763315452940376,
            0.06172027275031378,
        ],
    );
    let space = Arc::new(make_simplex(3).unwrap());
    let pi = ergodicity::linalg::stationary_distribution(&t).unwrap();
    let t = validate_markov(t, space.clone()).unwrap();
    let p = MarkovProjection::rank_one(space, pi).unwrap();
    let report = multiplicativity_test(&t, &p, 30).unwrap();
    assert!(!report.delta_equals_radius && !report.multiplicative && report.agree);
    assert!(report.delta > report.radius + 0.2);
    let (n, got, expected) = report.first_deviation.unwrap();
    assert!(n >= 2 && got < expected);
}

#[test]
fn complex_spectrum_instance() {
    // Rotation-like 3-cycle mixed with uniform jumps: complex pair of modulus < 1.
    let c = DMatrix::from_column_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0]);
    let t = c * 0.7 + DMatrix::from_element(3, 3, 0.1);
    let space = Arc::new(make_simplex(3).unwrap());
    let t = validate_markov(t, space.clone()).unwrap();
    let p = MarkovProjection::rank_one(space, DVector::from_element(3, 1.0 / 3.0)).unwrap();
    let (v, r) = classify(&t, &p, ClassifyOptions::default()).unwrap();
    assert!(v.uniform);
    assert!((r.r_tp - 0.7).abs() <= 1e-12);
    assert!(r.eigenvalues.iter().any(|l| l.im.abs() > 0.5));
}
