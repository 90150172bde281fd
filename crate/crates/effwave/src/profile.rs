//! Slow-variable (macroscopic) profiles on the domain `D = (0, L)`: initial
//! envelopes, test-function envelopes, and the `x`-factor of separable
//! potentials. Profiles carry analytic derivatives so oscillatory-test
//! machinery does not have to difference them numerically.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, rename_all = "snake_case", tag = "kind")]
pub enum MacroProfile {
    Zero,
    Constant {
        value: f64,
    },
    Linear {
        slope: f64,
        #[serde(default)]
        intercept: f64,
    },
    /// `amplitude * sin(mode pi x / L)`; vanishes at the boundary but is not
    /// compactly supported inside `D`.
    Sine {
        #[serde(default = "one_u32")]
        mode: u32,
        #[serde(default = "one_f64")]
        amplitude: f64,
    },
    /// Smooth bump `amplitude * exp(1 - 1/(1 - r^2))`, `r = 2(x-center)/width`,
    /// compactly supported in `[center - width/2, center + width/2]`.
    Bump {
        center: f64,
        width: f64,
        #[serde(default = "one_f64")]
        amplitude: f64,
    },
    /// `amplitude * sin(mode pi x / L)` windowed by the smooth bump.
    SineBump {
        center: f64,
        width: f64,
        #[serde(default = "one_f64")]
        amplitude: f64,
        #[serde(default = "one_u32")]
        mode: u32,
    },
}

fn one_u32() -> u32 {
    1
}

fn one_f64() -> f64 {
    1.0
}

fn bump_shape(r: f64) -> f64 {
    if r.abs() < 1.0 {
        (1.0 - 1.0 / (1.0 - r * r)).exp()
    } else {
        0.0
    }
}

fn bump_shape_deriv(r: f64) -> f64 {
    if r.abs() < 1.0 {
        let denom = 1.0 - r * r;
        bump_shape(r) * (-2.0 * r / (denom * denom))
    } else {
        0.0
    }
}

impl MacroProfile {
    pub fn eval(&self, x: f64, domain_len: f64) -> f64 {
        match *self {
            MacroProfile::Zero => 0.0,
            MacroProfile::Constant { value } => value,
            MacroProfile::Linear { slope, intercept } => slope * x + intercept,
            MacroProfile::Sine { mode, amplitude } => {
                amplitude * (mode as f64 * std::f64::consts::PI * x / domain_len).sin()
            }
            MacroProfile::Bump { center, width, amplitude } => {
                amplitude * bump_shape(2.0 * (x - center) / width)
            }
            MacroProfile::SineBump { center, width, amplitude, mode } => {
                let s = (mode as f64 * std::f64::consts::PI * x / domain_len).sin();
                amplitude * s * bump_shape(2.0 * (x - center) / width)
            }
        }
    }

    pub fn eval_deriv(&self, x: f64, domain_len: f64) -> f64 {
        match *self {
            MacroProfile::Zero | MacroProfile::Constant { .. } => 0.0,
            MacroProfile::Linear { slope, .. } => slope,
            MacroProfile::Sine { mode, amplitude } => {
                let k = mode as f64 * std::f64::consts::PI / domain_len;
                amplitude * k * (k * x).cos()
            }
            MacroProfile::Bump { center, width, amplitude } => {
                let r = 2.0 * (x - center) / width;
                amplitude * bump_shape_deriv(r) * 2.0 / width
            }
            MacroProfile::SineBump { center, width, amplitude, mode } => {
                let k = mode as f64 * std::f64::consts::PI / domain_len;
                let r = 2.0 * (x - center) / width;
                amplitude
                    * ((k * x).cos() * k * bump_shape(r)
                        + (k * x).sin() * bump_shape_deriv(r) * 2.0 / width)
            }
        }
    }

    /// Support interval when the profile is compactly supported; `None` for
    /// profiles that extend across the whole domain.
    pub fn support_bounds(&self) -> Option<(f64, f64)> {
        match *self {
            MacroProfile::Zero => Some((0.0, 0.0)),
            MacroProfile::Bump { center, width, .. }
            | MacroProfile::SineBump { center, width, .. } => {
                Some((center - width / 2.0, center + width / 2.0))
            }
            _ => None,
        }
    }

    /// Whether the profile vanishes identically outside the open domain
    /// interior, which is what Dirichlet initial data requires.
    pub fn compactly_supported_in(&self, domain_len: f64) -> bool {
        match self.support_bounds() {
            Some((lo, hi)) => lo >= 0.0 && hi <= domain_len,
            None => matches!(self, MacroProfile::Zero),
        }
    }

    pub fn sample(&self, x_grid: &[f64], domain_len: f64) -> Vec<f64> {
        x_grid.iter().map(|&x| self.eval(x, domain_len)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_is_smooth_and_compact() {
        let p = MacroProfile::Bump { center: 0.5, width: 0.6, amplitude: 2.0 };
        assert_eq!(p.eval(0.1, 1.0), 0.0);
        assert_eq!(p.eval(0.9, 1.0), 0.0);
        assert!((p.eval(0.5, 1.0) - 2.0).abs() < 1e-15);
        assert!(p.compactly_supported_in(1.0));

        // Analytic derivative against a centered difference.
        let h = 1e-6;
        for x in [0.3, 0.45, 0.62] {
            let fd = (p.eval(x + h, 1.0) - p.eval(x - h, 1.0)) / (2.0 * h);
            assert!((fd - p.eval_deriv(x, 1.0)).abs() < 1e-6);
        }
    }

    #[test]
    fn sine_is_not_compact() {
        let p = MacroProfile::Sine { mode: 1, amplitude: 1.0 };
        assert!(!p.compactly_supported_in(1.0));
        assert!((p.eval(0.5, 1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sine_bump_derivative_consistent() {
        let p = MacroProfile::SineBump { center: 0.5, width: 0.8, amplitude: 1.0, mode: 2 };
        let h = 1e-6;
        for x in [0.2, 0.5, 0.7] {
            let fd = (p.eval(x + h, 1.0) - p.eval(x - h, 1.0)) / (2.0 * h);
            assert!((fd - p.eval_deriv(x, 1.0)).abs() < 1e-5);
        }
    }
}
