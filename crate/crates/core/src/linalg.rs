//! Small dense helpers shared by the coefficient, spectral and corpus code.

use nalgebra::{DMatrix, DVector};

/// `aⁿ` by repeated squaring; `a⁰ = I`.
pub fn matrix_power(a: &DMatrix<f64>, mut n: u64) -> DMatrix<f64> {
    assert!(a.is_square(), "matrix_power needs a square matrix");
    let mut result = DMatrix::identity(a.nrows(), a.ncols());
    let mut base = a.clone();
    while n > 0 {
        if n & 1 == 1 {
            result = &result * &base;
        }
        n >>= 1;
        if n > 0 {
            base = &base * &base;
        }
    }
    result
}

/// Largest absolute entry.
pub fn max_abs(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Induced `ℓ¹` norm (largest absolute column sum).
pub fn l1_operator_norm(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Rank-revealing QR: the orthogonal factor (full when `a` is square) and
/// the numerical rank, counting `|rᵢᵢ| > tol · max(1, |r₀₀|)`.
///
/// Column-pivoted Householder QR rather than an SVD: nalgebra's SVD can
/// return factors that do not reproduce the input (reconstruction errors
/// of order 0.1 on 2×2 and 5×5 stochastic differences), while the pivoted
/// QR stays at roundoff.
fn rank_revealing_qr(a: &DMatrix<f64>, tol: f64) -> (DMatrix<f64>, usize) {
    let qr = a.clone().col_piv_qr();
    let r = qr.r();
    let lead = r.get((0, 0)).map_or(0.0, |v| v.abs());
    let cutoff = tol * lead.max(1.0);
    let rank = (0..r.nrows().min(r.ncols()))
        .take_while(|&i| r[(i, i)].abs() > cutoff)
        .count();
    (qr.q(), rank)
}

/// Orthonormal basis (as columns) of the null space of `a`.
///
/// The null space is the orthogonal complement of the row space, read off
/// a pivoted QR of `aᵀ`. Tall inputs are first reduced to their square `R`
/// factor (same null space); wide ones are padded with zero rows.
pub fn null_space(a: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let (rows, cols) = a.shape();
    if cols == 0 {
        return DMatrix::zeros(0, 0);
    }
    let square = if rows > cols {
        a.clone().qr().r()
    } else {
        let mut s = DMatrix::zeros(cols, cols);
        s.view_mut((0, 0), (rows, cols)).copy_from(a);
        s
    };
    let (q, rank) = rank_revealing_qr(&square.transpose(), tol);
    q.columns(rank, cols - rank).into_owned()
}

/// Orthonormal basis of the column space of `a`.
pub fn range_basis(a: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let n = a.nrows();
    if n == 0 || a.ncols() == 0 {
        return DMatrix::zeros(n, 0);
    }
    let (q, rank) = rank_revealing_qr(a, tol);
    q.columns(0, rank).into_owned()
}

/// A probability vector fixed by the column-stochastic matrix `t`, taken
/// from the null space of `t − I`. Returns `None` when no nonnegative
/// null vector is found (numerically).
pub fn stationary_distribution(t: &DMatrix<f64>) -> Option<DVector<f64>> {
    let n = t.nrows();
    let shifted = t - DMatrix::identity(n, n);
    let basis = null_space(&shifted, 1e-9);
    if basis.ncols() == 0 {
        return None;
    }
    let v = basis.column(0).into_owned();
    let total: f64 = v.sum();
    if total.abs() < 1e-12 {
        return None;
    }
    let mut pi = v / total;
    if pi.iter().any(|x| *x < -1e-9) {
        return None;
    }
    pi.apply(|x| *x = x.max(0.0));
    let s = pi.sum();
    Some(pi / s)
}

/// Spectral radius estimate `‖a^N‖^{1/N}` with `N = 2^squarings`, using
/// normalized repeated squaring so that neither overflow nor underflow occurs.
pub fn gelfand_radius(a: &DMatrix<f64>, squarings: u32, norm: impl Fn(&DMatrix<f64>) -> f64) -> f64 {
    let mut m = a.clone();
    let mut log_scale = 0.0;
    let mut exponent = 1.0;
    for _ in 0..squarings {
        let s = norm(&m);
        if s == 0.0 {
            return 0.0;
        }
        m /= s;
        log_scale += s.ln() / exponent;
        m = &m * &m;
        exponent *= 2.0;
    }
    let s = norm(&m);
    if s == 0.0 {
        return 0.0;
    }
    (log_scale + s.ln() / exponent).exp()
}

/// Minimum-cost perfect assignment for a square cost matrix (Hungarian
/// method, O(n³)). Returns `assignment[row] = column`.
pub fn min_cost_assignment(cost: &DMatrix<f64>) -> Vec<usize> {
    let n = cost.nrows();
    assert_eq!(n, cost.ncols(), "assignment needs a square cost matrix");
    if n == 0 {
        return Vec::new();
    }
    // 1-based potentials formulation.
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[(i0 - 1, j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        if p[j] != 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    assignment
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn range_of_rank_one_complement_in_two_dimensions() {
        // The raw 2×2 SVD of this matrix does not reconstruct it.
        let (p0, p1) = (0.9472037857601119, 0.052796214239888006);
        let c = DMatrix::from_row_slice(2, 2, &[1.0 - p0, -p0, -p1, 1.0 - p1]);
        let b = range_basis(&c, 1e-10);
        assert_eq!(b.ncols(), 1);
        assert_abs_diff_eq!(b[0] + b[1], 0.0, epsilon = 1e-12);
        let n = null_space(&c, 1e-10);
        assert_eq!(n.ncols(), 1);
        assert_abs_diff_eq!(n[0] / n[1], p0 / p1, epsilon = 1e-9);
    }

    #[test]
    fn power_examples() {
        let m = DMatrix::from_column_slice(2, 2, &[0.7, 0.3, 0.1, 0.9]);
        assert_eq!(matrix_power(&m, 0), DMatrix::identity(2, 2));
        assert_eq!(matrix_power(&m, 1), m);
        let m2 = matrix_power(&m, 2);
        let expected = DMatrix::from_column_slice(2, 2, &[0.52, 0.48, 0.16, 0.84]);
        assert_abs_diff_eq!(m2, expected, epsilon = 1e-15);
        let m7 = matrix_power(&m, 7);
        let mut naive = DMatrix::identity(2, 2);
        for _ in 0..7 {
            naive = &naive * &m;
        }
        assert_abs_diff_eq!(m7, naive, epsilon = 1e-14);
    }

    #[test]
    fn null_space_of_rank_deficient() {
        let a = DMatrix::from_row_slice(2, 3, &[1.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let n = null_space(&a, 1e-10);
        assert_eq!(n.ncols(), 1);
        let x = n.column(0);
        assert_abs_diff_eq!((&a * x).norm(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(x[0], -x[1], epsilon = 1e-12);
    }

    #[test]
    fn stationary_of_two_state_chain() {
        let m = DMatrix::from_column_slice(2, 2, &[0.7, 0.3, 0.1, 0.9]);
        let pi = stationary_distribution(&m).unwrap();
        assert_abs_diff_eq!(pi[0], 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(pi[1], 0.75, epsilon = 1e-12);
    }

    #[test]
    fn gelfand_radius_of_diagonal() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, -0.8, 0.1]));
        assert_abs_diff_eq!(gelfand_radius(&a, 20, l1_operator_norm), 0.8, epsilon = 1e-12);
        let z = DMatrix::<f64>::zeros(3, 3);
        assert_eq!(gelfand_radius(&z, 10, l1_operator_norm), 0.0);
    }

    #[test]
    fn assignment_matches_brute_force() {
        let cost = DMatrix::from_row_slice(
            4,
            4,
            &[
                4.0, 1.0, 3.0, 2.0, 2.0, 0.0, 5.0, 3.0, 3.0, 2.0, 2.0, 1.0, 1.0, 4.0, 2.0, 0.5,
            ],
        );
        let a = min_cost_assignment(&cost);
        let total: f64 = a.iter().enumerate().map(|(i, &j)| cost[(i, j)]).sum();
        let mut best = f64::INFINITY;
        let mut perm = [0usize, 1, 2, 3];
        permute(&mut perm, 0, &mut |p| {
            let c: f64 = p.iter().enumerate().map(|(i, &j)| cost[(i, j)]).sum();
            best = best.min(c);
        });
        assert_abs_diff_eq!(total, best);
    }

    fn permute(p: &mut [usize; 4], k: usize, visit: &mut impl FnMut(&[usize; 4])) {
        if k == p.len() {
            visit(p);
            return;
        }
        for i in k..p.len() {
            p.swap(k, i);
            permute(p, k + 1, visit);
            p.swap(k, i);
        }
    }
}
