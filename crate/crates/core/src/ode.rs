//! Fixed-step classic fourth-order Runge-Kutta integration.

use crate::error::{Error, Result};

/// Sub-stepping of one sample period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSpec {
    /// Size of each sub-step (s).
    pub h: f64,
    /// Number of sub-steps per sample period.
    pub substeps: u32,
}

impl StepSpec {
    /// Splits `period` into `substeps` equal steps.
    pub fn new(period: f64, substeps: u32) -> Result<Self> {
        if !(period > 0.0) || !period.is_finite() {
            return Err(Error::InvalidParameter {
                name: "period",
                reason: format!("must be positive and finite, got {period}"),
            });
        }
        if substeps == 0 {
            return Err(Error::InvalidParameter {
                name: "substeps",
                reason: "must be at least 1".into(),
            });
        }
        Ok(Self {
            h: period / f64::from(substeps),
            substeps,
        })
    }
}

/// One classic RK4 update `y + (h/6)(k1 + 2k2 + 2k3 + k4)`.
///
/// Fails with [`Error::NonFiniteDerivative`] if any stage evaluates to a
/// non-finite value.
pub fn rk4_step<const N: usize, F>(mut f: F, t: f64, y: &[f64; N], h: f64) -> Result<[f64; N]>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
{
    let check = |k: [f64; N], t: f64| -> Result<[f64; N]> {
        if k.iter().all(|v| v.is_finite()) {
            Ok(k)
        } else {
            Err(Error::NonFiniteDerivative { t })
        }
    };
    let half = 0.5 * h;
    let k1 = check(f(t, y)?, t)?;
    let mut y2 = *y;
    for i in 0..N {
        y2[i] = y[i] + half * k1[i];
    }
    let k2 = check(f(t + half, &y2)?, t + half)?;
    let mut y3 = *y;
    for i in 0..N {
        y3[i] = y[i] + half * k2[i];
    }
    let k3 = check(f(t + half, &y3)?, t + half)?;
    let mut y4 = *y;
    for i in 0..N {
        y4[i] = y[i] + h * k3[i];
    }
    let k4 = check(f(t + h, &y4)?, t + h)?;
    let mut out = *y;
    for i in 0..N {
        out[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    Ok(out)
}

/// Integrates over one sample period with the given sub-stepping.
pub fn integrate<const N: usize, F>(
    mut f: F,
    t0: f64,
    y0: &[f64; N],
    spec: StepSpec,
) -> Result<[f64; N]>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
{
    let mut y = *y0;
    let mut t = t0;
    for _ in 0..spec.substeps {
        y = rk4_step(&mut f, t, &y, spec.h)?;
        t += spec.h;
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_field_is_identity() {
        let y = rk4_step(|_, _| Ok([0.0]), 0.0, &[3.5], 0.01).unwrap();
        assert_eq!(y, [3.5]);
    }

    #[test]
    fn constant_field_is_exact() {
        let y = rk4_step(|_, _| Ok([1.0]), 0.0, &[0.0], 0.01).unwrap();
        assert!((y[0] - 0.01).abs() < 1e-18);
    }

    #[test]
    fn exponential_matches_closed_form() {
        let y = rk4_step(|_, s: &[f64; 1]| Ok([s[0]]), 0.0, &[1.0], 0.1).unwrap();
        assert!((y[0] - (0.1f64).exp()).abs() < 1e-7);
        assert!((y[0] - 1.105_170_91).abs() < 1e-7);
    }

    #[test]
    fn fourth_order_convergence() {
        // Global error on y' = y over [0, 1] shrinks ~16x per halving.
        let run = |steps: u32| {
            let mut y = [1.0];
            let h = 1.0 / f64::from(steps);
            for i in 0..steps {
                y = rk4_step(|_, s: &[f64; 1]| Ok([s[0]]), f64::from(i) * h, &y, h).unwrap();
            }
            (y[0] - 1.0f64.exp()).abs()
        };
        let mut prev = run(16);
        for steps in [32, 64, 128] {
            let err = run(steps);
            let factor = prev / err;
            assert!(
                (14.0..=18.0).contains(&factor),
                "steps={steps}: factor {factor}"
            );
            prev = err;
        }
    }

    #[test]
    fn non_finite_stage_is_reported() {
        let r = rk4_step(|_, _: &[f64; 1]| Ok([f64::NAN]), 0.0, &[0.0], 0.1);
        assert!(matches!(r, Err(Error::NonFiniteDerivative { .. })));
    }

    #[test]
    fn substeps_compose() {
        let spec = StepSpec::new(0.4, 4).unwrap();
        assert_eq!(spec.h, 0.1);
        let y = integrate(|_, s: &[f64; 1]| Ok([s[0]]), 0.0, &[1.0], spec).unwrap();
        assert!((y[0] - (0.4f64).exp()).abs() < 1e-6);
    }
}
