//! Angular impulse and smoothness of a sampled series.
//!
//! Both descriptors collapse a biomarker curve to one number. The impulse is
//! the area under the curve after its lowest value is subtracted, so it
//! measures excursion rather than absolute level. Smoothness integrates the
//! squared second derivative; lower values mean smoother motion.

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum TemporalError {
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("sampling interval must be positive and finite, got {0}")]
    InvalidDt(f64),
    #[error("series contains a non-finite value at index {0}")]
    NonFinite(usize),
}

pub type Result<T> = std::result::Result<T, TemporalError>;

/// Uniformly sampled values (degrees for angle biomarkers).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarSeries {
    pub values: Vec<f64>,
    pub dt: f64,
}

impl ScalarSeries {
    pub fn new(values: Vec<f64>, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(TemporalError::InvalidDt(dt));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(TemporalError::NonFinite(i));
        }
        Ok(ScalarSeries { values, dt })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn require(&self, needed: usize) -> Result<()> {
        if self.values.len() < needed {
            Err(TemporalError::TooFewSamples {
                needed,
                got: self.values.len(),
            })
        } else {
            Ok(())
        }
    }
}

/// Relative size of a second difference treated as rounding noise.
const ROUNDING_FLOOR: f64 = 16.0 * f64::EPSILON;

/// What the impulse integrates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ImpulseMode {
    /// The biomarker curve itself.
    #[default]
    Curve,
    /// The second derivative of the curve (angular acceleration).
    Acceleration,
}

/// Second difference at every sample. Interior points use the central
/// stencil; each endpoint reuses the stencil of its nearest interior
/// neighbour. Exact on quadratics.
///
/// Stencil sums no larger than the rounding already present in the inputs
/// are set to zero, so affine data has an identically zero derivative.
pub fn second_derivative(s: &ScalarSeries) -> Result<ScalarSeries> {
    s.require(3)?;
    let y = &s.values;
    let n = y.len();
    let inv = 1.0 / (s.dt * s.dt);
    let floor = ROUNDING_FLOOR * y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let stencil = |i: usize| {
        let raw = y[i - 1] - 2.0 * y[i] + y[i + 1];
        if raw.abs() <= floor {
            0.0
        } else {
            raw * inv
        }
    };
    let mut out = Vec::with_capacity(n);
    out.push(stencil(1));
    out.extend((1..n - 1).map(stencil));
    out.push(stencil(n - 2));
    Ok(ScalarSeries { values: out, dt: s.dt })
}

/// Trapezoid rule, `sum dt * (y[i] + y[i+1]) / 2`.
pub fn trapezoid_integral(s: &ScalarSeries) -> Result<f64> {
    s.require(2)?;
    Ok(s.values.windows(2).map(|w| 0.5 * (w[0] + w[1])).sum::<f64>() * s.dt)
}

fn baseline_area(s: &ScalarSeries) -> Result<f64> {
    s.require(2)?;
    let lowest = s.values.iter().copied().fold(f64::INFINITY, f64::min);
    let shifted = ScalarSeries {
        values: s.values.iter().map(|v| v - lowest).collect(),
        dt: s.dt,
    };
    trapezoid_integral(&shifted)
}

/// Area under the min-subtracted curve, degree-seconds. Never negative.
pub fn angular_impulse(s: &ScalarSeries) -> Result<f64> {
    angular_impulse_with(s, ImpulseMode::Curve)
}

pub fn angular_impulse_with(s: &ScalarSeries, mode: ImpulseMode) -> Result<f64> {
    match mode {
        ImpulseMode::Curve => baseline_area(s),
        ImpulseMode::Acceleration => baseline_area(&second_derivative(s)?),
    }
}

/// Integral of the squared second derivative, degrees squared per cubed second.
pub fn smoothness(s: &ScalarSeries) -> Result<f64> {
    let mut d2 = second_derivative(s)?;
    for v in &mut d2.values {
        *v *= *v;
    }
    trapezoid_integral(&d2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn series(values: &[f64], dt: f64) -> ScalarSeries {
        ScalarSeries::new(values.to_vec(), dt).unwrap()
    }

    #[test]
    fn second_derivative_examples() {
        assert_eq!(
            second_derivative(&series(&[0., 1., 2., 3.], 1.0)).unwrap().values,
            vec![0.0; 4]
        );
        assert_eq!(
            second_derivative(&series(&[0., 1., 4., 9.], 1.0)).unwrap().values,
            vec![2.0; 4]
        );
        let d = second_derivative(&series(&[0., 0., 1., 0., 0.], 1.0)).unwrap().values;
        assert_eq!(&d[1..4], &[1.0, -2.0, 1.0]);
        assert_eq!(d.len(), 5);
    }

    #[test]
    fn too_few_samples() {
        assert_eq!(
            second_derivative(&series(&[1., 2.], 1.0)),
            Err(TemporalError::TooFewSamples { needed: 3, got: 2 })
        );
        assert_eq!(
            trapezoid_integral(&series(&[1.], 1.0)),
            Err(TemporalError::TooFewSamples { needed: 2, got: 1 })
        );
        assert!(smoothness(&series(&[1., 2.], 1.0)).is_err());
        assert!(angular_impulse(&series(&[1.], 1.0)).is_err());
    }

    #[test]
    fn rejects_bad_series() {
        assert_eq!(ScalarSeries::new(vec![1.0], 0.0), Err(TemporalError::InvalidDt(0.0)));
        assert_eq!(
            ScalarSeries::new(vec![1.0, f64::NAN], 1.0),
            Err(TemporalError::NonFinite(1))
        );
    }

    #[test]
    fn trapezoid_examples() {
        assert_eq!(trapezoid_integral(&series(&[1., 1., 1.], 1.0)).unwrap(), 2.0);
        assert_eq!(trapezoid_integral(&series(&[0., 1., 2.], 1.0)).unwrap(), 2.0);
        assert_eq!(trapezoid_integral(&series(&[3., 1., 2.], 0.5)).unwrap(), 1.75);
    }

    #[test]
    fn impulse_examples() {
        assert_eq!(angular_impulse(&series(&[7.5; 6], 0.1)).unwrap(), 0.0);
        assert_eq!(angular_impulse(&series(&[0., 1., 2.], 1.0)).unwrap(), 2.0);
        assert_eq!(angular_impulse(&series(&[3., 1., 2.], 0.5)).unwrap(), 0.75);
    }

    #[test]
    fn acceleration_mode_integrates_second_derivative() {
        // Parabola: second derivative is constant, so min-subtraction leaves zero.
        let s = series(&[0., 1., 4., 9., 16.], 1.0);
        assert_eq!(angular_impulse_with(&s, ImpulseMode::Acceleration).unwrap(), 0.0);
        let s = series(&[0., 0., 1., 0., 0.], 1.0);
        // d2 = [1, 1, -2, 1, 1] -> shifted [3, 3, 0, 3, 3] -> area 3 + 1.5 + 1.5 + 3
        assert_eq!(angular_impulse_with(&s, ImpulseMode::Acceleration).unwrap(), 9.0);
    }

    #[test]
    fn smoothness_examples() {
        assert_eq!(smoothness(&series(&[2., 5., 8., 11., 14.], 0.25)).unwrap(), 0.0);

        for n in [2usize, 4, 10, 100] {
            let dt = 1.0 / n as f64;
            let values: Vec<f64> = (0..=n).map(|i| (i as f64 * dt).powi(2)).collect();
            if values.len() < 3 {
                continue;
            }
            assert_abs_diff_eq!(smoothness(&series(&values, dt)).unwrap(), 4.0, epsilon = 1e-9);
        }

        let dt = 1e-3;
        let n = (2.0 * std::f64::consts::PI / dt).floor() as usize;
        let values: Vec<f64> = (0..=n).map(|i| (i as f64 * dt).sin()).collect();
        assert_abs_diff_eq!(
            smoothness(&series(&values, dt)).unwrap(),
            std::f64::consts::PI,
            epsilon = 0.01
        );
    }

    #[test]
    fn smoothness_converges_under_refinement() {
        let run = |dt: f64| {
            let n = (2.0 * std::f64::consts::PI / dt).round() as usize;
            let dt = 2.0 * std::f64::consts::PI / n as f64;
            let values: Vec<f64> = (0..=n).map(|i| (i as f64 * dt).sin()).collect();
            (smoothness(&series(&values, dt)).unwrap() - std::f64::consts::PI).abs()
        };
        let coarse = run(0.02);
        let fine = run(0.01);
        // Second order: error drops by about four when dt halves.
        assert!(fine < coarse / 3.0, "coarse {coarse} fine {fine}");
    }

    proptest! {
        #[test]
        fn impulse_shift_invariant(values in prop::collection::vec(-100i32..100, 2..40), c in -1000i32..1000) {
            // Integer-valued samples keep the shift exact in floating point.
            let s = series(&values.iter().map(|&v| v as f64).collect::<Vec<_>>(), 0.5);
            let shifted = series(&values.iter().map(|&v| (v + c) as f64).collect::<Vec<_>>(), 0.5);
            prop_assert_eq!(angular_impulse(&s).unwrap(), angular_impulse(&shifted).unwrap());
        }

        #[test]
        fn descriptors_nonnegative(values in prop::collection::vec(-1e3f64..1e3, 3..50), dt in 1e-3f64..1.0) {
            let s = series(&values, dt);
            prop_assert!(angular_impulse(&s).unwrap() >= 0.0);
            prop_assert!(angular_impulse_with(&s, ImpulseMode::Acceleration).unwrap() >= 0.0);
            prop_assert!(smoothness(&s).unwrap() >= 0.0);
        }

        #[test]
        fn smoothness_scales_quadratically(values in prop::collection::vec(-1e2f64..1e2, 3..50), k in -10f64..10.0) {
            let s = series(&values, 0.1);
            let scaled = series(&values.iter().map(|v| k * v).collect::<Vec<_>>(), 0.1);
            let base = smoothness(&s).unwrap();
            let got = smoothness(&scaled).unwrap();
            prop_assert!((got - k * k * base).abs() <= 1e-9 * (k * k * base).abs().max(1e-300));
        }

        #[test]
        fn affine_series_has_zero_smoothness(
            a in -180f64..180.0, b in -500f64..500.0, dt in 1e-3f64..0.5, n in 3usize..400
        ) {
            let values: Vec<f64> = (0..n).map(|i| a + b * (i as f64 * dt)).collect();
            prop_assert_eq!(smoothness(&series(&values, dt)).unwrap(), 0.0);
        }

        #[test]
        fn quadratic_second_derivative_is_constant(
            a in -5i32..5, b in -5i32..5, c in -5i32..5, n in 3usize..30
        ) {
            // Small integer coefficients and dt = 1 keep every term exact.
            let values: Vec<f64> = (0..n).map(|i| {
                let t = i as f64;
                a as f64 * t * t + b as f64 * t + c as f64
            }).collect();
            let d = second_derivative(&series(&values, 1.0)).unwrap();
            prop_assert!(d.values.iter().all(|&v| v == 2.0 * a as f64));
        }
    }
}
