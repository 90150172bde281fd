//! The shifted spectral cell problem on the unit torus.
//!
//! In the plane-wave basis `e_k(y) = exp(2 pi i k y)`, `k = -K..K`, the
//! operator `-(d/dy + 2 pi i theta) sigma(y) (d/dy + 2 pi i theta) + c(y)`
//! becomes the dense Hermitian matrix
//!
//! ```text
//! A[k, l] = 4 pi^2 (k + theta)(l + theta) sigma_hat(k - l) + c_hat(k - l)
//! ```
//!
//! Its sorted eigenpairs are the Bloch bands; eigenvectors are normalized in
//! `L^2(T)` (coefficient-space `l2` by Parseval) and gauge fixed so that
//! scalar quantities computed downstream do not depend on the arbitrary
//! eigenvector phase.

use num_complex::Complex64;

use crate::eigen::eigh;
use crate::error::{Error, Result};
use crate::linalg::{dot, norm2, CMatrix};
use crate::periodic::PeriodicFunction;

const PI2_4: f64 = 4.0 * std::f64::consts::PI * std::f64::consts::PI;

#[derive(Debug, Clone)]
pub struct CellOperator {
    pub theta: f64,
    pub k_max: usize,
    pub matrix: CMatrix,
    /// Zero for the bare operator; `lambda_n(theta)` when the matrix
    /// represents the operator deflated around band `n`.
    pub spectral_shift: f64,
}

#[derive(Debug, Clone)]
pub struct CellEigenpair {
    /// Band index, 1-based.
    pub n: usize,
    pub theta: f64,
    pub lambda: f64,
    /// Plane-wave coefficients, length `2K+1`, unit norm, gauge fixed.
    pub psi: Vec<Complex64>,
    pub residual: f64,
}

pub fn assemble_cell_operator(
    sigma: &PeriodicFunction,
    c: &PeriodicFunction,
    theta: f64,
    k_max: usize,
) -> Result<CellOperator> {
    if !theta.is_finite() {
        return Err(Error::NonFinite { what: "Bloch parameter theta" });
    }
    if sigma.uniform_positivity().is_none() {
        return Err(Error::NotUniformlyPositive { what: "sigma", min: sigma.min_sample() });
    }
    if !c.is_real() {
        return Err(Error::NotRealValued { what: "potential c", imag_max: f64::NAN });
    }

    let n = 2 * k_max + 1;
    let mut matrix = CMatrix::zeros(n, n);
    for ki in 0..n {
        let k = ki as i64 - k_max as i64;
        for li in 0..n {
            let l = li as i64 - k_max as i64;
            let kinetic = PI2_4 * (k as f64 + theta) * (l as f64 + theta) * sigma.coeff(k - l);
            matrix[(ki, li)] = kinetic + c.coeff(k - l);
        }
    }

    let defect = matrix.hermitian_defect();
    if defect > 1e-12 * matrix.max_abs().max(1.0) {
        return Err(Error::NotHermitian { asymmetry: defect });
    }
    Ok(CellOperator { theta, k_max, matrix, spectral_shift: 0.0 })
}

impl CellOperator {
    pub fn dim(&self) -> usize {
        self.matrix.n_rows()
    }

    /// The operator with `lambda` subtracted from the diagonal.
    pub fn shifted(&self, lambda: f64) -> CellOperator {
        let mut matrix = self.matrix.clone();
        for i in 0..matrix.n_rows() {
            matrix[(i, i)] -= Complex64::new(lambda, 0.0);
        }
        CellOperator {
            theta: self.theta,
            k_max: self.k_max,
            matrix,
            spectral_shift: self.spectral_shift + lambda,
        }
    }

    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        self.matrix.matvec(v)
    }
}

/// The first `n_max` eigenpairs, ascending, repeated with multiplicity,
/// orthonormal, gauge fixed, with recorded residuals.
pub fn solve_cell_eigen(op: &CellOperator, n_max: usize) -> Result<Vec<CellEigenpair>> {
    let dim = op.dim();
    if n_max > dim {
        return Err(Error::BandOutOfRange { n: n_max, available: dim });
    }
    let eig = eigh(&op.matrix)?;
    let mut pairs = Vec::with_capacity(n_max);
    for idx in 0..n_max {
        let lambda = eig.values[idx] + op.spectral_shift;
        let psi = fix_gauge(&eig.vectors.column(idx), None)?;
        let av = op.apply(&psi);
        let residual = av
            .iter()
            .zip(&psi)
            .map(|(a, p)| (a - (lambda - op.spectral_shift) * p).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let tol = 1e-9 * (1.0 + lambda.abs()).max(op.matrix.max_abs() * 1e-6);
        if residual > tol {
            return Err(Error::ResidualTooLarge { what: "cell eigenpair", residual, tol });
        }
        pairs.push(CellEigenpair { n: idx + 1, theta: op.theta, lambda, psi, residual });
    }
    Ok(pairs)
}

/// Remove the arbitrary eigenvector phase.
///
/// Without a reference the coefficient of largest modulus is made real
/// positive (ties broken by the smallest wavenumber); with a reference the
/// phase maximizes `Re <psi, reference>`, which keeps gauges continuous
/// along a Bloch-parameter sweep. The norm is unchanged.
pub fn fix_gauge(psi: &[Complex64], reference: Option<&[Complex64]>) -> Result<Vec<Complex64>> {
    let norm = norm2(psi);
    if norm == 0.0 {
        return Err(Error::ZeroVector);
    }
    let phase = match reference {
        Some(r) => {
            let overlap = dot(psi, r);
            if overlap.norm() > 1e-14 * norm {
                overlap.conj() / overlap.norm()
            } else {
                anchor_phase(psi)
            }
        }
        None => anchor_phase(psi),
    };
    Ok(psi.iter().map(|z| z * phase).collect())
}

fn anchor_phase(psi: &[Complex64]) -> Complex64 {
    let mut best = 0usize;
    let mut best_mag = psi[0].norm();
    for (i, z) in psi.iter().enumerate().skip(1) {
        let mag = z.norm();
        if mag > best_mag {
            best = i;
            best_mag = mag;
        }
    }
    let anchor = psi[best];
    anchor.conj() / anchor.norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::periodic::{inner_product_coeffs, PeriodicFunction};
    use proptest::prelude::*;

    const PI: f64 = std::f64::consts::PI;

    fn free_sigma() -> PeriodicFunction {
        PeriodicFunction::constant(1.0, 64)
    }

    fn zero_c() -> PeriodicFunction {
        PeriodicFunction::constant(0.0, 64)
    }

    fn mathieu_c() -> PeriodicFunction {
        PeriodicFunction::cosine(0.0, 2.0, 1, 64).unwrap()
    }

    #[test]
    fn free_operator_is_diagonal_kinetic() {
        let op = assemble_cell_operator(&free_sigma(), &zero_c(), 0.0, 2).unwrap();
        let expected =
            [157.91367041742973, 39.47841760435743, 0.0, 39.47841760435743, 157.91367041742973];
        for (i, want) in expected.iter().enumerate() {
            assert!((op.matrix[(i, i)] - Complex64::new(*want, 0.0)).norm() < 1e-10);
            for j in 0..5 {
                if i != j {
                    assert!(op.matrix[(i, j)].norm() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn cosine_potential_fills_first_off_diagonals() {
        let op = assemble_cell_operator(&free_sigma(), &mathieu_c(), 0.0, 1).unwrap();
        let d = [PI2_4, 0.0, PI2_4];
        for (i, want) in d.iter().enumerate() {
            assert!((op.matrix[(i, i)] - Complex64::new(*want, 0.0)).norm() < 1e-12);
        }
        for i in 0..2 {
            assert!((op.matrix[(i, i + 1)] - Complex64::ONE).norm() < 1e-12);
            assert!((op.matrix[(i + 1, i)] - Complex64::ONE).norm() < 1e-12);
        }
    }

    #[test]
    fn entries_match_direct_summation_oracle() {
        // Independent entry-by-entry evaluation of the Galerkin form.
        let sigma = PeriodicFunction::cosine(1.0, 0.5, 1, 64).unwrap();
        let theta = 0.25;
        let k_max = 2i64;
        let op = assemble_cell_operator(&sigma, &zero_c(), theta, 2).unwrap();
        for k in -k_max..=k_max {
            for l in -k_max..=k_max {
                let want = PI2_4 * (k as f64 + theta) * (l as f64 + theta) * sigma.coeff(k - l);
                let got = op.matrix[((k + k_max) as usize, (l + k_max) as usize)];
                assert!((got - want).norm() < 1e-12, "entry ({k},{l})");
            }
        }
    }

    #[test]
    fn nonpositive_sigma_rejected() {
        let sigma = PeriodicFunction::cosine(0.2, 1.0, 1, 64).unwrap();
        let err = assemble_cell_operator(&sigma, &zero_c(), 0.0, 4);
        assert!(matches!(err, Err(Error::NotUniformlyPositive { .. })));
    }

    #[test]
    fn free_spectrum_at_gamma_point() {
        let op = assemble_cell_operator(&free_sigma(), &zero_c(), 0.0, 2).unwrap();
        let pairs = solve_cell_eigen(&op, 5).unwrap();
        let want = [0.0, PI2_4, PI2_4, 4.0 * PI2_4, 4.0 * PI2_4];
        for (p, w) in pairs.iter().zip(&want) {
            assert!((p.lambda - w).abs() < 1e-10, "{} vs {}", p.lambda, w);
        }
        // Ground state is the constant function, gauge fixed real positive.
        let psi1 = &pairs[0].psi;
        assert!((psi1[2] - Complex64::ONE).norm() < 1e-10);
    }

    #[test]
    fn free_spectrum_at_quarter_point() {
        let op = assemble_cell_operator(&free_sigma(), &zero_c(), 0.25, 2).unwrap();
        let pairs = solve_cell_eigen(&op, 2).unwrap();
        assert!((pairs[0].lambda - PI * PI / 4.0).abs() < 1e-10);
        assert!((pairs[1].lambda - 9.0 * PI * PI / 4.0).abs() < 1e-10);
    }

    #[test]
    fn mathieu_ground_state_matches_higher_resolution() {
        let lo = {
            let op = assemble_cell_operator(&free_sigma(), &mathieu_c(), 0.0, 16).unwrap();
            solve_cell_eigen(&op, 1).unwrap()[0].lambda
        };
        let hi = {
            let sigma = PeriodicFunction::constant(1.0, 128);
            let c = PeriodicFunction::cosine(0.0, 2.0, 1, 128).unwrap();
            let op = assemble_cell_operator(&sigma, &c, 0.0, 32).unwrap();
            solve_cell_eigen(&op, 1).unwrap()[0].lambda
        };
        assert!((lo - hi).abs() < 1e-8, "K=16 {} vs K=32 {}", lo, hi);
    }

    #[test]
    fn eigenvectors_orthonormal() {
        let op = assemble_cell_operator(&free_sigma(), &mathieu_c(), 0.3, 8).unwrap();
        let pairs = solve_cell_eigen(&op, 17).unwrap();
        for i in 0..pairs.len() {
            for j in i..pairs.len() {
                let ip = inner_product_coeffs(&pairs[i].psi, &pairs[j].psi);
                let want = if i == j { Complex64::ONE } else { Complex64::ZERO };
                assert!((ip - want).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn time_reversal_and_periodicity_of_spectra() {
        let sigma = PeriodicFunction::cosine(1.0, 0.4, 1, 64).unwrap();
        let c = mathieu_c();
        let spectrum = |theta: f64| {
            let op = assemble_cell_operator(&sigma, &c, theta, 12).unwrap();
            solve_cell_eigen(&op, 3).unwrap().iter().map(|p| p.lambda).collect::<Vec<_>>()
        };
        let plus = spectrum(0.2);
        let minus = spectrum(-0.2);
        for (a, b) in plus.iter().zip(&minus) {
            assert!((a - b).abs() < 1e-10);
        }
        // One full dual-cell shift relabels the plane-wave basis; the low
        // bands, whose eigenvectors decay well inside the truncation window,
        // must agree as sorted sets.
        let shifted = spectrum(1.2);
        for (a, b) in plus.iter().zip(&shifted) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn constant_potential_shifts_spectrum_exactly() {
        let c0 = 3.25;
        let base = assemble_cell_operator(&free_sigma(), &mathieu_c(), 0.1, 8).unwrap();
        let shifted_c = PeriodicFunction::from_coeff_list(
            &[(0, Complex64::new(c0, 0.0)), (1, Complex64::ONE), (-1, Complex64::ONE)],
            64,
        )
        .unwrap();
        let shifted = assemble_cell_operator(&free_sigma(), &shifted_c, 0.1, 8).unwrap();
        let a = solve_cell_eigen(&base, 6).unwrap();
        let b = solve_cell_eigen(&shifted, 6).unwrap();
        for (pa, pb) in a.iter().zip(&b) {
            assert!((pb.lambda - pa.lambda - c0).abs() < 1e-10);
        }
    }

    #[test]
    fn gauge_examples() {
        let i = Complex64::new(0.0, 1.0);
        let psi = vec![i, Complex64::ZERO, Complex64::ZERO];
        let fixed = fix_gauge(&psi, None).unwrap();
        assert!((fixed[0] - Complex64::ONE).norm() < 1e-15);

        let again = fix_gauge(&fixed, None).unwrap();
        for (a, b) in again.iter().zip(&fixed) {
            assert!((a - b).norm() < 1e-15);
        }

        assert!(matches!(fix_gauge(&[Complex64::ZERO], None), Err(Error::ZeroVector)));
    }

    proptest! {
        /// Re-phased inputs produce identical gauge-fixed outputs.
        #[test]
        fn gauge_is_phase_invariant(alpha in 0.0f64..std::f64::consts::TAU) {
            let psi = vec![
                Complex64::new(0.3, -0.4),
                Complex64::new(0.8, 0.1),
                Complex64::new(-0.2, 0.25),
            ];
            let rotated: Vec<Complex64> =
                psi.iter().map(|z| z * Complex64::from_polar(1.0, alpha)).collect();
            let a = fix_gauge(&psi, None).unwrap();
            let b = fix_gauge(&rotated, None).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).norm() < 1e-12);
            }
        }
    }
}
