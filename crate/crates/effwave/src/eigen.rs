//! Dense Hermitian eigensolver.
//!
//! The route is the classical one: unitary Householder reduction of the
//! complex Hermitian matrix to tridiagonal form, a diagonal phase similarity
//! that makes the subdiagonal real nonnegative, then implicit-shift QL on
//! the real symmetric tridiagonal matrix with the rotations accumulated
//! into the complex transformation. Matrices in this crate stay below a few
//! hundred rows, where a dense solve is both fast and robust.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;

const MAX_QL_ITERATIONS_PER_EIGENVALUE: usize = 50;

#[derive(Debug, Clone)]
pub struct HermitianEigen {
    /// Eigenvalues in ascending order, repeated with multiplicity.
    pub values: Vec<f64>,
    /// Column `j` is the orthonormal eigenvector for `values[j]`.
    pub vectors: CMatrix,
    /// Total QL iterations, reported on non-convergence diagnostics.
    pub iterations: usize,
}

/// Eigendecomposition of a Hermitian matrix. The input is taken as given:
/// callers are expected to have checked Hermiticity to their own tolerance.
pub fn eigh(a: &CMatrix) -> Result<HermitianEigen> {
    assert_eq!(a.n_rows(), a.n_cols(), "eigh needs a square matrix");
    let n = a.n_rows();
    if n == 0 {
        return Ok(HermitianEigen { values: vec![], vectors: CMatrix::zeros(0, 0), iterations: 0 });
    }

    let mut work = a.clone();
    let mut q = CMatrix::identity(n);

    // Householder reduction to complex tridiagonal form, Q accumulated.
    for col in 0..n.saturating_sub(2) {
        let m = n - col - 1;
        let x: Vec<Complex64> = (0..m).map(|j| work[(col + 1 + j, col)]).collect();
        let sigma = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if sigma == 0.0 {
            continue;
        }
        let alpha = x[0];
        let phase = if alpha.norm() == 0.0 { Complex64::ONE } else { alpha / alpha.norm() };
        let beta = -phase * sigma;

        let mut u = x;
        u[0] -= beta;
        let unorm2: f64 = u.iter().map(|z| z.norm_sqr()).sum();
        if unorm2 == 0.0 {
            continue;
        }
        let c = 2.0 / unorm2;

        // p = c * B u on the trailing block, then the rank-2 update
        // B <- B - u w^H - w u^H with w = p - (c u^H p / 2) u.
        let mut p = vec![Complex64::ZERO; m];
        for i in 0..m {
            let mut acc = Complex64::ZERO;
            for j in 0..m {
                acc += work[(col + 1 + i, col + 1 + j)] * u[j];
            }
            p[i] = c * acc;
        }
        let up: Complex64 = u.iter().zip(&p).map(|(ui, pi)| ui.conj() * pi).sum();
        let w: Vec<Complex64> =
            p.iter().zip(&u).map(|(pi, ui)| pi - 0.5 * c * up * ui).collect();
        for i in 0..m {
            for j in 0..m {
                let delta = u[i] * w[j].conj() + w[i] * u[j].conj();
                work[(col + 1 + i, col + 1 + j)] -= delta;
            }
        }

        work[(col + 1, col)] = beta;
        work[(col, col + 1)] = beta.conj();
        for i in col + 2..n {
            work[(i, col)] = Complex64::ZERO;
            work[(col, i)] = Complex64::ZERO;
        }

        // Q <- Q (I - c u u^H) on trailing columns.
        for row in 0..n {
            let mut qu = Complex64::ZERO;
            for j in 0..m {
                qu += q[(row, col + 1 + j)] * u[j];
            }
            let qu = qu * c;
            for j in 0..m {
                let delta = qu * u[j].conj();
                q[(row, col + 1 + j)] -= delta;
            }
        }
    }

    // Chase the subdiagonal phases into Q so the tridiagonal matrix is real.
    let mut d: Vec<f64> = (0..n).map(|i| work[(i, i)].re).collect();
    let mut e = vec![0.0f64; n];
    let mut dphase = Complex64::ONE;
    for i in 0..n.saturating_sub(1) {
        let ec = work[(i + 1, i)];
        let em = ec.norm();
        e[i] = em;
        if em > 0.0 {
            dphase *= ec / em;
        }
        if dphase != Complex64::ONE {
            for row in 0..n {
                q[(row, i + 1)] *= dphase;
            }
        }
    }

    let iterations = tql2(&mut d, &mut e, &mut q)?;

    // Ascending order with eigenvector columns permuted to match.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].partial_cmp(&d[j]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| d[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (new_col, &old_col) in order.iter().enumerate() {
        for row in 0..n {
            vectors[(row, new_col)] = q[(row, old_col)];
        }
    }

    Ok(HermitianEigen { values, vectors, iterations })
}

/// Implicit-shift QL on a real symmetric tridiagonal matrix, after the Algol
/// procedure tql2 (Bowdler, Martin, Reinsch, Wilkinson), rotations applied
/// to the complex columns of `v`. `e[i]` couples rows `i` and `i+1`.
fn tql2(d: &mut [f64], e: &mut [f64], v: &mut CMatrix) -> Result<usize> {
    let n = d.len();
    if n == 0 {
        return Ok(0);
    }
    e[n - 1] = 0.0;

    let eps = f64::EPSILON;
    let mut f = 0.0f64;
    let mut tst1 = 0.0f64;
    let mut total_iter = 0usize;

    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m == n {
            m = n - 1;
        }

        if m > l {
            let mut iter = 0usize;
            loop {
                iter += 1;
                total_iter += 1;
                if iter > MAX_QL_ITERATIONS_PER_EIGENVALUE {
                    return Err(Error::EigenNoConvergence { iterations: total_iter, offset: l });
                }

                // Wilkinson-style shift.
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for i in l + 2..n {
                    d[i] -= h;
                }
                f += h;

                // Implicit QL sweep from m-1 down to l.
                p = d[m];
                let mut c = 1.0f64;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0f64;
                let mut s2 = 0.0f64;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let gg = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * gg;
                    d[i + 1] = h + s * (c * gg + s * d[i]);

                    for k in 0..v.n_rows() {
                        let t = v[(k, i + 1)];
                        v[(k, i + 1)] = s * v[(k, i)] + c * t;
                        v[(k, i)] = c * v[(k, i)] - s * t;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;

                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(total_iter)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{dot, norm2};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_hermitian(n: usize, seed: u64) -> CMatrix {
        let mut state = seed;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let mut a = CMatrix::zeros(n, n);
        for i in 0..n {
            a[(i, i)] = c(2.0 * next(), 0.0);
            for j in i + 1..n {
                let z = c(next(), next());
                a[(i, j)] = z;
                a[(j, i)] = z.conj();
            }
        }
        a
    }

    fn check_decomposition(a: &CMatrix, tol: f64) {
        let n = a.n_rows();
        let eig = eigh(a).unwrap();
        let scale = a.max_abs().max(1.0);
        for j in 0..n {
            let v = eig.vectors.column(j);
            let av = a.matvec(&v);
            let mut res = 0.0f64;
            for i in 0..n {
                res += (av[i] - eig.values[j] * v[i]).norm_sqr();
            }
            assert!(res.sqrt() <= tol * scale, "residual {} for eigenvalue {}", res.sqrt(), j);
            assert!((norm2(&v) - 1.0).abs() <= tol);
            for k in j + 1..n {
                let vk = eig.vectors.column(k);
                assert!(dot(&v, &vk).norm() <= tol, "columns {j},{k} not orthogonal");
            }
        }
        for j in 1..n {
            assert!(eig.values[j] >= eig.values[j - 1]);
        }
        let trace: f64 = (0..n).map(|i| a[(i, i)].re).sum();
        let sum: f64 = eig.values.iter().sum();
        assert!((trace - sum).abs() <= 1e-10 * scale * n as f64);
    }

    #[test]
    fn diagonal_matrix_is_exact() {
        let mut a = CMatrix::zeros(5, 5);
        let entries = [3.0, -1.0, 0.0, 7.5, 2.5];
        for (i, &x) in entries.iter().enumerate() {
            a[(i, i)] = c(x, 0.0);
        }
        let eig = eigh(&a).unwrap();
        let mut sorted = entries;
        sorted.sort_by(|x, y| x.partial_cmp(y).unwrap());
        for (l, s) in eig.values.iter().zip(sorted.iter()) {
            assert_eq!(l, s);
        }
    }

    #[test]
    fn real_toeplitz_matches_analytic_spectrum() {
        // Second-difference matrix: eigenvalues 2 - 2 cos(k pi / (n+1)).
        let n = 16;
        let mut a = CMatrix::zeros(n, n);
        for i in 0..n {
            a[(i, i)] = c(2.0, 0.0);
            if i + 1 < n {
                a[(i, i + 1)] = c(-1.0, 0.0);
                a[(i + 1, i)] = c(-1.0, 0.0);
            }
        }
        let eig = eigh(&a).unwrap();
        let mut expected: Vec<f64> = (1..=n)
            .map(|k| 2.0 - 2.0 * (k as f64 * std::f64::consts::PI / (n as f64 + 1.0)).cos())
            .collect();
        expected.sort_by(|x, y| x.partial_cmp(y).unwrap());
        for (got, want) in eig.values.iter().zip(&expected) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn random_hermitian_decompositions() {
        for (n, seed) in [(2usize, 7u64), (3, 11), (8, 5), (24, 1), (33, 9)] {
            let a = random_hermitian(n, seed);
            check_decomposition(&a, 1e-11);
        }
    }

    #[test]
    fn unitary_similarity_preserves_spectrum() {
        let n = 12;
        let s = random_hermitian(n, 3);
        let base = eigh(&s).unwrap();
        // Conjugate by a diagonal unitary: spectrum must be unchanged.
        let mut a = CMatrix::zeros(n, n);
        for i in 0..n {
            let pi = c(0.0, 0.37 * (i as f64 + 1.0)).exp();
            for j in 0..n {
                let pj = c(0.0, 0.37 * (j as f64 + 1.0)).exp();
                a[(i, j)] = pi * s[(i, j)] * pj.conj();
            }
        }
        let eig = eigh(&a).unwrap();
        for (x, y) in eig.values.iter().zip(&base.values) {
            assert!((x - y).abs() < 1e-10);
        }
        check_decomposition(&a, 1e-11);
    }

    #[test]
    fn degenerate_spectrum_keeps_orthonormal_basis() {
        let a = CMatrix::identity(6);
        check_decomposition(&a, 1e-12);
    }
}
