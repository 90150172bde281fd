//! Small dense complex linear algebra: a row-major matrix type, complex LU
//! with partial pivoting, and a complex tridiagonal (Thomas) solver with a
//! reusable factorization for repeated right-hand sides.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dense complex matrix, row major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    n_rows: usize,
    n_cols: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self { n_rows, n_cols, data: vec![Complex64::ZERO; n_rows * n_cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::ONE;
        }
        m
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn column(&self, j: usize) -> Vec<Complex64> {
        (0..self.n_rows).map(|i| self[(i, j)]).collect()
    }

    pub fn matvec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(v.len(), self.n_cols);
        (0..self.n_rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, x)| a * x).sum())
            .collect()
    }

    /// Largest absolute deviation from the conjugate transpose.
    pub fn hermitian_defect(&self) -> f64 {
        let mut defect = 0.0f64;
        for i in 0..self.n_rows {
            for j in i..self.n_cols {
                let d = (self[(i, j)] - self[(j, i)].conj()).norm();
                defect = defect.max(d);
            }
        }
        defect
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

impl std::ops::Index<(usize, usize)> for CMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.n_cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.n_cols + j]
    }
}

/// LU factorization with partial pivoting of a square complex matrix.
pub struct LuFactors {
    n: usize,
    lu: Vec<Complex64>,
    pivots: Vec<usize>,
    /// Smallest |pivot| / largest |pivot|, a cheap conditioning indicator.
    pub pivot_ratio: f64,
}

pub fn lu_decompose(a: &CMatrix, what: &'static str) -> Result<LuFactors> {
    assert_eq!(a.n_rows(), a.n_cols());
    let n = a.n_rows();
    let mut lu = a.data().to_vec();
    let mut pivots = vec![0usize; n];
    let mut min_piv = f64::INFINITY;
    let mut max_piv = 0.0f64;

    for k in 0..n {
        let mut p = k;
        let mut best = lu[k * n + k].norm();
        for i in k + 1..n {
            let mag = lu[i * n + k].norm();
            if mag > best {
                best = mag;
                p = i;
            }
        }
        pivots[k] = p;
        if p != k {
            for j in 0..n {
                lu.swap(k * n + j, p * n + j);
            }
        }
        let piv = lu[k * n + k];
        let mag = piv.norm();
        min_piv = min_piv.min(mag);
        max_piv = max_piv.max(mag);
        if mag == 0.0 {
            return Err(Error::SingularSystem { what, pivot_ratio: 0.0 });
        }
        for i in k + 1..n {
            let factor = lu[i * n + k] / piv;
            lu[i * n + k] = factor;
            for j in k + 1..n {
                let sub = factor * lu[k * n + j];
                lu[i * n + j] -= sub;
            }
        }
    }

    let pivot_ratio = if max_piv > 0.0 { min_piv / max_piv } else { 0.0 };
    Ok(LuFactors { n, lu, pivots, pivot_ratio })
}

impl LuFactors {
    pub fn solve(&self, rhs: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(rhs.len(), self.n);
        let n = self.n;
        let mut x = rhs.to_vec();
        for k in 0..n {
            x.swap(k, self.pivots[k]);
            let xk = x[k];
            for i in k + 1..n {
                let sub = self.lu[i * n + k] * xk;
                x[i] -= sub;
            }
        }
        for k in (0..n).rev() {
            for j in k + 1..n {
                let sub = self.lu[k * n + j] * x[j];
                x[k] -= sub;
            }
            x[k] /= self.lu[k * n + k];
        }
        x
    }
}

/// Factorized complex tridiagonal system, reusable across right-hand sides.
///
/// Elimination without pivoting; the time-stepping matrices this backs are
/// strictly dominated on the diagonal by construction (identity plus a
/// skew-scaled Hermitian part), so breakdown indicates corrupted input.
pub struct TridiagFactors {
    n: usize,
    /// lower[j] couples row j+1 to column j (unchanged by elimination).
    lower: Vec<Complex64>,
    /// upper[j] / pivot[j], precomputed for the back substitution.
    upper_over_pivot: Vec<Complex64>,
    inv_pivot: Vec<Complex64>,
}

pub fn tridiag_factorize(
    lower: &[Complex64],
    diag: &[Complex64],
    upper: &[Complex64],
) -> Result<TridiagFactors> {
    let n = diag.len();
    assert!(n >= 1);
    assert_eq!(lower.len(), n - 1);
    assert_eq!(upper.len(), n - 1);

    let mut upper_over_pivot = vec![Complex64::ZERO; n - 1];
    let mut inv_pivot = vec![Complex64::ZERO; n];
    let mut pivot = diag[0];
    let scale = diag.iter().map(|z| z.norm()).fold(0.0, f64::max);
    for j in 0..n {
        if pivot.norm() <= 1e-300 * scale.max(1.0) {
            return Err(Error::SingularSystem {
                what: "tridiagonal elimination",
                pivot_ratio: pivot.norm() / scale.max(1.0),
            });
        }
        inv_pivot[j] = pivot.inv();
        if j + 1 < n {
            upper_over_pivot[j] = upper[j] * inv_pivot[j];
            pivot = diag[j + 1] - lower[j] * upper_over_pivot[j];
        }
    }
    Ok(TridiagFactors { n, lower: lower.to_vec(), upper_over_pivot, inv_pivot })
}

impl TridiagFactors {
    /// Solve in place: `rhs` is overwritten with the solution.
    pub fn solve_in_place(&self, rhs: &mut [Complex64]) {
        assert_eq!(rhs.len(), self.n);
        let n = self.n;
        rhs[0] *= self.inv_pivot[0];
        for j in 1..n {
            let t = rhs[j] - self.lower[j - 1] * rhs[j - 1];
            rhs[j] = t * self.inv_pivot[j];
        }
        for j in (0..n - 1).rev() {
            let sub = self.upper_over_pivot[j] * rhs[j + 1];
            rhs[j] -= sub;
        }
    }
}

/// One-shot Thomas solve for callers without repeated right-hand sides.
pub fn solve_tridiagonal(
    lower: &[Complex64],
    diag: &[Complex64],
    upper: &[Complex64],
    rhs: &[Complex64],
) -> Result<Vec<Complex64>> {
    let factors = tridiag_factorize(lower, diag, upper)?;
    let mut x = rhs.to_vec();
    factors.solve_in_place(&mut x);
    Ok(x)
}

pub fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
}

pub fn norm2(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn lu_solves_random_system() {
        // Fixed pseudo-random complex matrix; verify A x = b after solving.
        let n = 12;
        let mut state = 0x12345678u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let mut a = CMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] = c(next(), next());
            }
            a[(i, i)] += c(4.0, 0.0);
        }
        let b: Vec<Complex64> = (0..n).map(|_| c(next(), next())).collect();
        let lu = lu_decompose(&a, "test").unwrap();
        let x = lu.solve(&b);
        let r = a.matvec(&x);
        for (ri, bi) in r.iter().zip(&b) {
            assert!((ri - bi).norm() < 1e-12);
        }
    }

    #[test]
    fn lu_rejects_singular() {
        let mut a = CMatrix::zeros(3, 3);
        a[(0, 0)] = c(1.0, 0.0);
        a[(1, 1)] = c(1.0, 0.0);
        // third row identically zero
        assert!(matches!(lu_decompose(&a, "test"), Err(Error::SingularSystem { .. })));
    }

    #[test]
    fn thomas_matches_dense_solve() {
        let n = 9;
        let lower: Vec<Complex64> = (0..n - 1).map(|j| c(0.3 + 0.1 * j as f64, -0.2)).collect();
        let upper: Vec<Complex64> = (0..n - 1).map(|j| c(-0.4, 0.05 * j as f64)).collect();
        let diag: Vec<Complex64> = (0..n).map(|j| c(3.0 + 0.2 * j as f64, 0.7)).collect();
        let rhs: Vec<Complex64> = (0..n).map(|j| c(j as f64, 1.0 - j as f64)).collect();

        let x = solve_tridiagonal(&lower, &diag, &upper, &rhs).unwrap();

        let mut a = CMatrix::zeros(n, n);
        for j in 0..n {
            a[(j, j)] = diag[j];
        }
        for j in 0..n - 1 {
            a[(j + 1, j)] = lower[j];
            a[(j, j + 1)] = upper[j];
        }
        let r = a.matvec(&x);
        for (ri, bi) in r.iter().zip(&rhs) {
            assert!((ri - bi).norm() < 1e-12, "residual {}", (ri - bi).norm());
        }
    }

    #[test]
    fn tridiag_factors_reusable() {
        let n = 6;
        let lower = vec![c(1.0, 0.1); n - 1];
        let upper = vec![c(1.0, -0.1); n - 1];
        let diag = vec![c(5.0, 1.0); n];
        let f = tridiag_factorize(&lower, &diag, &upper).unwrap();
        for trial in 0..3 {
            let rhs: Vec<Complex64> = (0..n).map(|j| c((j + trial) as f64, 0.5)).collect();
            let mut x = rhs.clone();
            f.solve_in_place(&mut x);
            for j in 0..n {
                let mut r = diag[j] * x[j];
                if j > 0 {
                    r += lower[j - 1] * x[j - 1];
                }
                if j + 1 < n {
                    r += upper[j] * x[j + 1];
                }
                assert!((r - rhs[j]).norm() < 1e-12);
            }
        }
    }
}
