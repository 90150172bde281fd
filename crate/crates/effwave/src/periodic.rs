//! Real or complex 1-periodic functions on the unit torus, held as symmetric
//! Fourier coefficients `k = -K..K` together with `M >= 2K+1` uniform grid
//! samples. Quadrature is the uniform-grid rule, which is exact for
//! band-limited integrands; closed forms beyond the truncation are projected
//! by sampling followed by a discrete transform, and the resulting aliasing
//! is accepted.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const TAU: f64 = std::f64::consts::TAU;

/// Tolerance for structural identities (conjugate symmetry, round trips).
pub const COEFF_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicFunction {
    /// Coefficient for wavenumber `k` lives at index `k + k_max`.
    coeffs: Vec<Complex64>,
    /// Uniform samples at `y_j = j / M`, `j = 0..M`.
    samples: Vec<Complex64>,
    k_max: usize,
    real: bool,
    /// Minimum of the real part over samples; only meaningful when `real`.
    min_sample: f64,
}

impl PeriodicFunction {
    /// Build from a full symmetric coefficient vector of length `2K+1`.
    pub fn from_coeff_vec(coeffs: Vec<Complex64>, m: usize) -> Result<Self> {
        if coeffs.len() % 2 != 1 {
            return Err(Error::LengthMismatch {
                what: "symmetric coefficient vector",
                left: coeffs.len(),
                right: coeffs.len() + 1,
            });
        }
        let k_max = coeffs.len() / 2;
        if m < 2 * k_max + 1 {
            return Err(Error::GridTooSmall { got: m, k_max, needed: 2 * k_max + 1 });
        }
        if coeffs.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite { what: "Fourier coefficients" });
        }
        let samples = dft_inverse(&coeffs, m)?;
        Ok(Self::finish(coeffs, samples, k_max))
    }

    /// Build from a sparse `(k, value)` list; `k_max` is the largest |k|.
    pub fn from_coeff_list(list: &[(i64, Complex64)], m: usize) -> Result<Self> {
        let k_max = list.iter().map(|(k, _)| k.unsigned_abs() as usize).max().unwrap_or(0);
        let mut coeffs = vec![Complex64::ZERO; 2 * k_max + 1];
        for &(k, z) in list {
            coeffs[(k + k_max as i64) as usize] += z;
        }
        Self::from_coeff_vec(coeffs, m)
    }

    /// Project `M` grid samples onto wavenumbers `-K..K`.
    pub fn from_samples(samples: Vec<Complex64>, k_max: usize) -> Result<Self> {
        if samples.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite { what: "grid samples" });
        }
        let coeffs = dft_forward(&samples, k_max)?;
        Ok(Self::finish(coeffs, samples, k_max))
    }

    pub fn constant(value: f64, m: usize) -> Self {
        Self::from_coeff_vec(vec![Complex64::new(value, 0.0)], m).expect("constant is always valid")
    }

    /// `mean + amplitude * cos(2 pi harmonic y)`.
    pub fn cosine(mean: f64, amplitude: f64, harmonic: u32, m: usize) -> Result<Self> {
        let k = harmonic.max(1) as i64;
        let half = Complex64::new(amplitude / 2.0, 0.0);
        Self::from_coeff_list(&[(0, Complex64::new(mean, 0.0)), (k, half), (-k, half)], m)
    }

    fn finish(coeffs: Vec<Complex64>, samples: Vec<Complex64>, k_max: usize) -> Self {
        let scale = coeffs.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
        let real = (0..=2 * k_max).all(|i| {
            let k = i as i64 - k_max as i64;
            let mirror = (-k + k_max as i64) as usize;
            (coeffs[i] - coeffs[mirror].conj()).norm() <= COEFF_TOL * scale
        });
        let min_sample = samples.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
        Self { coeffs, samples, k_max, real, min_sample }
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn grid_len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_real(&self) -> bool {
        self.real
    }

    /// `Some(nu)` when the function is real with all samples `>= nu > 0`.
    pub fn uniform_positivity(&self) -> Option<f64> {
        (self.real && self.min_sample > 0.0).then_some(self.min_sample)
    }

    pub fn min_sample(&self) -> f64 {
        self.min_sample
    }

    pub fn max_abs_sample(&self) -> f64 {
        self.samples.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Coefficient at wavenumber `k`, zero outside the truncation.
    pub fn coeff(&self, k: i64) -> Complex64 {
        if k.unsigned_abs() as usize > self.k_max {
            Complex64::ZERO
        } else {
            self.coeffs[(k + self.k_max as i64) as usize]
        }
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    /// Trigonometric evaluation at an arbitrary point of the torus.
    pub fn eval(&self, y: f64) -> Complex64 {
        eval_coeffs(&self.coeffs, y)
    }

    /// Samples on a fresh uniform grid of `m` points (exact for `m >= 2K+1`).
    pub fn eval_on_grid(&self, m: usize) -> Result<Vec<Complex64>> {
        dft_inverse(&self.coeffs, m)
    }

    /// Mean value over the torus.
    pub fn mean(&self) -> Complex64 {
        self.coeff(0)
    }
}

/// Evaluate a symmetric coefficient vector at a point of the torus.
pub fn eval_coeffs(coeffs: &[Complex64], y: f64) -> Complex64 {
    let k_max = coeffs.len() / 2;
    let step = Complex64::from_polar(1.0, TAU * y);
    // Start at k = -K and walk up by multiplying with e^{2 pi i y}.
    let mut phase = Complex64::from_polar(1.0, -TAU * y * k_max as f64);
    let mut acc = Complex64::ZERO;
    for &c in coeffs {
        acc += c * phase;
        phase *= step;
    }
    acc
}

/// Forward transform: grid samples to coefficients `-K..K`, normalized so a
/// constant sequence maps to a unit zeroth coefficient.
pub fn dft_forward(samples: &[Complex64], k_max: usize) -> Result<Vec<Complex64>> {
    let m = samples.len();
    if m < 2 * k_max + 1 {
        return Err(Error::GridTooSmall { got: m, k_max, needed: 2 * k_max + 1 });
    }
    let mut coeffs = vec![Complex64::ZERO; 2 * k_max + 1];
    for (i, c) in coeffs.iter_mut().enumerate() {
        let k = i as i64 - k_max as i64;
        let mut acc = Complex64::ZERO;
        for (j, &s) in samples.iter().enumerate() {
            let angle = -TAU * (k as f64) * (j as f64) / (m as f64);
            acc += s * Complex64::from_polar(1.0, angle);
        }
        *c = acc / m as f64;
    }
    Ok(coeffs)
}

/// Inverse transform: coefficients `-K..K` to `m` grid samples.
pub fn dft_inverse(coeffs: &[Complex64], m: usize) -> Result<Vec<Complex64>> {
    let k_max = coeffs.len() / 2;
    if m < 2 * k_max + 1 {
        return Err(Error::GridTooSmall { got: m, k_max, needed: 2 * k_max + 1 });
    }
    Ok((0..m).map(|j| eval_coeffs(coeffs, j as f64 / m as f64)).collect())
}

/// `∫_T a(y) conj(b(y)) dy` by the uniform-grid rule on a shared grid.
pub fn inner_product_torus(a: &PeriodicFunction, b: &PeriodicFunction) -> Result<Complex64> {
    if a.grid_len() != b.grid_len() {
        return Err(Error::LengthMismatch {
            what: "torus quadrature grids",
            left: a.grid_len(),
            right: b.grid_len(),
        });
    }
    let m = a.grid_len() as f64;
    Ok(a.samples.iter().zip(&b.samples).map(|(x, y)| x * y.conj()).sum::<Complex64>() / m)
}

/// Coefficient-space inner product `Σ_k a_k conj(b_k)`.
pub fn inner_product_coeffs(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    assert_eq!(a.len(), b.len(), "coefficient inner product needs equal truncations");
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
}

/// Declarative coefficient specification, the JSON-facing form.
///
/// Exactly one of `fourier` (a list of `[k, re, im]` triples) or `named`
/// (with optional `params`) must be present.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CoeffSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fourier: Option<Vec<(i64, f64, f64)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub named: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<NamedParams>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct NamedParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub harmonic: Option<u32>,
}

impl CoeffSpec {
    pub fn constant(value: f64) -> Self {
        Self {
            fourier: None,
            named: Some("constant".into()),
            params: Some(NamedParams { value: Some(value), ..Default::default() }),
        }
    }

    pub fn cosine(mean: f64, amplitude: f64) -> Self {
        Self {
            fourier: None,
            named: Some("cosine".into()),
            params: Some(NamedParams {
                mean: Some(mean),
                amplitude: Some(amplitude),
                ..Default::default()
            }),
        }
    }
}

/// Materialize a coefficient spec on an `M`-point grid.
pub fn sample_periodic(spec: &CoeffSpec, m: usize) -> Result<PeriodicFunction> {
    match (&spec.fourier, &spec.named) {
        (Some(list), None) => {
            let pairs: Vec<(i64, Complex64)> =
                list.iter().map(|&(k, re, im)| (k, Complex64::new(re, im))).collect();
            if pairs.iter().any(|(_, z)| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::NonFinite { what: "fourier coefficient spec" });
            }
            PeriodicFunction::from_coeff_list(&pairs, m)
        }
        (None, Some(name)) => {
            let p = spec.params.clone().unwrap_or_default();
            match name.as_str() {
                "constant" => {
                    let v = p.value.unwrap_or(1.0);
                    if !v.is_finite() {
                        return Err(Error::NonFinite { what: "constant value" });
                    }
                    Ok(PeriodicFunction::constant(v, m))
                }
                "cosine" => {
                    let mean = p.mean.unwrap_or(0.0);
                    let amplitude = p.amplitude.unwrap_or(1.0);
                    if !mean.is_finite() || !amplitude.is_finite() {
                        return Err(Error::NonFinite { what: "cosine parameters" });
                    }
                    PeriodicFunction::cosine(mean, amplitude, p.harmonic.unwrap_or(1), m)
                }
                other => Err(Error::Config {
                    path: "named".into(),
                    message: format!("unknown named coefficient '{other}' (expected 'constant' or 'cosine')"),
                }),
            }
        }
        _ => Err(Error::Config {
            path: "coefficient spec".into(),
            message: "exactly one of 'fourier' or 'named' must be given".into(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn cosine_spec_samples_match_closed_form() {
        // f(y) = 2 cos(2 pi y) via unit coefficients at k = +-1.
        let f = PeriodicFunction::from_coeff_list(
            &[(1, Complex64::ONE), (-1, Complex64::ONE)],
            16,
        )
        .unwrap();
        for j in 0..16 {
            let want = 2.0 * (TAU * j as f64 / 16.0).cos();
            let got = f.samples()[j];
            assert!((got - c(want, 0.0)).norm() < COEFF_TOL);
        }
        assert!(f.is_real());
    }

    #[test]
    fn constant_has_single_coefficient() {
        let f = PeriodicFunction::constant(1.0, 8);
        assert_eq!(f.k_max(), 0);
        assert_eq!(f.coeff(0), Complex64::ONE);
        assert_eq!(f.coeff(3), Complex64::ZERO);
    }

    #[test]
    fn positivity_flag_detects_minimum() {
        let f = PeriodicFunction::cosine(1.0, 0.5, 1, 64).unwrap();
        let nu = f.uniform_positivity().expect("sigma profile should be positive");
        assert!((nu - 0.5).abs() < 1e-12);

        let g = PeriodicFunction::cosine(0.0, 1.0, 1, 64).unwrap();
        assert!(g.uniform_positivity().is_none());
    }

    #[test]
    fn grid_too_small_is_rejected() {
        let err = PeriodicFunction::from_coeff_list(&[(3, Complex64::ONE)], 5);
        assert!(matches!(err, Err(Error::GridTooSmall { needed: 7, .. })));
    }

    #[test]
    fn non_finite_rejected() {
        let err = PeriodicFunction::from_coeff_vec(vec![c(f64::NAN, 0.0)], 4);
        assert!(matches!(err, Err(Error::NonFinite { .. })));
    }

    #[test]
    fn dft_of_ones_is_delta() {
        let coeffs = dft_forward(&vec![Complex64::ONE; 4], 1).unwrap();
        assert!((coeffs[1] - Complex64::ONE).norm() < COEFF_TOL);
        assert!(coeffs[0].norm() < COEFF_TOL && coeffs[2].norm() < COEFF_TOL);
    }

    #[test]
    fn single_mode_inverse_is_exponential() {
        let m = 8;
        let samples = dft_inverse(&[Complex64::ZERO, Complex64::ZERO, Complex64::ONE], m).unwrap();
        for (j, s) in samples.iter().enumerate() {
            let want = Complex64::from_polar(1.0, TAU * j as f64 / m as f64);
            assert!((s - want).norm() < COEFF_TOL);
        }
    }

    #[test]
    fn round_trip_matches_direct_summation_oracle() {
        // Independent O(M^2) oracle for the forward transform, then an exact
        // round trip back to samples.
        let m = 32;
        let k_max = 15;
        let mut state = 99u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let samples: Vec<Complex64> = (0..m).map(|_| c(next(), 0.0)).collect();

        let coeffs = dft_forward(&samples, k_max).unwrap();
        for k in -(k_max as i64)..=k_max as i64 {
            let mut acc = Complex64::ZERO;
            for (j, &s) in samples.iter().enumerate() {
                let angle = -TAU * k as f64 * j as f64 / m as f64;
                acc += s * c(angle.cos(), angle.sin());
            }
            acc /= m as f64;
            assert!((acc - coeffs[(k + k_max as i64) as usize]).norm() < 1e-12);
        }

        // Coefficient round trip on the same grid is an identity.
        let f = PeriodicFunction::from_coeff_vec(coeffs, m).unwrap();
        let back = dft_forward(f.samples(), k_max).unwrap();
        for (a, b) in back.iter().zip(f.coeffs()) {
            assert!((a - b).norm() < 1e-12);
        }

        // With a square transform (M = 2K+1) arbitrary samples round trip.
        let m_odd = 2 * k_max + 1;
        let samples: Vec<Complex64> = (0..m_odd).map(|_| c(next(), 0.0)).collect();
        let g = PeriodicFunction::from_samples(samples.clone(), k_max).unwrap();
        let rebuilt = dft_inverse(g.coeffs(), m_odd).unwrap();
        for (a, b) in rebuilt.iter().zip(&samples) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn inner_product_examples() {
        let one = PeriodicFunction::constant(1.0, 32);
        assert!((inner_product_torus(&one, &one).unwrap() - Complex64::ONE).norm() < COEFF_TOL);

        let e1 = PeriodicFunction::from_coeff_list(&[(1, Complex64::ONE)], 32).unwrap();
        assert!(inner_product_torus(&e1, &one).unwrap().norm() < COEFF_TOL);

        let cosf = PeriodicFunction::cosine(0.0, 1.0, 1, 32).unwrap();
        let ip = inner_product_torus(&cosf, &cosf).unwrap();
        assert!((ip - c(0.5, 0.0)).norm() < COEFF_TOL);
    }

    #[test]
    fn inner_product_conjugate_symmetry() {
        let a = PeriodicFunction::from_coeff_list(
            &[(0, c(0.5, 0.0)), (1, c(0.2, -0.7)), (-2, c(0.1, 0.4))],
            16,
        )
        .unwrap();
        let b = PeriodicFunction::from_coeff_list(&[(1, c(-0.3, 0.6)), (2, c(0.9, 0.1))], 16)
            .unwrap();
        let ab = inner_product_torus(&a, &b).unwrap();
        let ba = inner_product_torus(&b, &a).unwrap();
        assert!((ab - ba.conj()).norm() < COEFF_TOL);
        let aa = inner_product_torus(&a, &a).unwrap();
        assert!(aa.re >= 0.0 && aa.im.abs() < COEFF_TOL);
    }

    #[test]
    fn grid_mismatch_rejected() {
        let a = PeriodicFunction::constant(1.0, 16);
        let b = PeriodicFunction::constant(1.0, 32);
        assert!(matches!(inner_product_torus(&a, &b), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn spec_requires_exactly_one_form() {
        let bad = CoeffSpec { fourier: Some(vec![(0, 1.0, 0.0)]), named: Some("constant".into()), params: None };
        assert!(sample_periodic(&bad, 8).is_err());
        let empty = CoeffSpec { fourier: None, named: None, params: None };
        assert!(sample_periodic(&empty, 8).is_err());
    }

    proptest! {
        /// Parseval: the coefficient-space norm equals the grid-space norm
        /// for band-limited functions, and the quadrature inner product
        /// equals the coefficient-space inner product.
        #[test]
        fn parseval_and_quadrature_consistency(
            re in proptest::collection::vec(-1.0f64..1.0, 7),
            im in proptest::collection::vec(-1.0f64..1.0, 7),
        ) {
            let coeffs: Vec<Complex64> = re.iter().zip(&im).map(|(&a, &b)| c(a, b)).collect();
            let f = PeriodicFunction::from_coeff_vec(coeffs, 16).unwrap();
            let coeff_norm: f64 = f.coeffs().iter().map(|z| z.norm_sqr()).sum();
            let grid_norm: f64 =
                f.samples().iter().map(|z| z.norm_sqr()).sum::<f64>() / f.grid_len() as f64;
            prop_assert!((coeff_norm - grid_norm).abs() <= COEFF_TOL * (1.0 + coeff_norm));

            let ip_grid = inner_product_torus(&f, &f).unwrap();
            let ip_coeff = inner_product_coeffs(f.coeffs(), f.coeffs());
            prop_assert!((ip_grid - ip_coeff).norm() <= COEFF_TOL * (1.0 + ip_coeff.norm()));
        }

        /// Real-valued inputs keep the conjugate-symmetry flag.
        #[test]
        fn real_inputs_flagged_real(vals in proptest::collection::vec(-2.0f64..2.0, 9)) {
            let samples: Vec<Complex64> = vals.iter().map(|&v| c(v, 0.0)).collect();
            let f = PeriodicFunction::from_samples(samples, 4).unwrap();
            prop_assert!(f.is_real());
            for k in 0..=4i64 {
                prop_assert!((f.coeff(-k) - f.coeff(k).conj()).norm() <= COEFF_TOL);
            }
        }
    }
}
