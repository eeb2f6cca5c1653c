//! Adaptive Dormand-Prince 5(4) integrator with PI step-size control.
//!
//! Plain explicit RK on a dense state vector; the Pfaffian right-hand sides
//! are smooth on valid segments so no stiffness machinery is needed. The
//! right-hand side returns a `Result` so that domain guards (gap checks) can
//! abort the integration cleanly.

use crate::error::{Error, Result};

/// Tolerances and budgets for one propagation.
#[derive(Debug, Clone, Copy)]
pub struct OdeControl {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_steps: usize,
    pub initial_step: f64,
}

impl Default for OdeControl {
    fn default() -> Self {
        OdeControl {
            rel_tol: 1e-10,
            abs_tol: 1e-10,
            max_steps: 1_000_000,
            initial_step: 1e-3,
        }
    }
}

impl OdeControl {
    pub fn validated(&self) -> Result<()> {
        for (what, v) in [
            ("rel_tol", self.rel_tol),
            ("abs_tol", self.abs_tol),
            ("initial_step", self.initial_step),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidTolerance { what, value: v });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct OdeStats {
    pub steps: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

// Dormand-Prince coefficients.
const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// The 5th-order weights equal A[5], so the last stage lands on the new point
// (FSAL) and no separate combination is needed.
/// Error weights b - b*.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrate `dy/dt = f(t, y)` from `t0` to `t1` (`t1 >= t0`).
pub fn integrate<F>(f: F, t0: f64, t1: f64, y0: &[f64], ctl: &OdeControl) -> Result<(Vec<f64>, OdeStats)>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    integrate_observed(f, t0, t1, y0, ctl, |_, _| Ok(()))
}

/// As [`integrate`], invoking `observe(t, y)` after every accepted step.
/// An error from the observer aborts the integration.
pub fn integrate_observed<F, O>(
    mut f: F,
    t0: f64,
    t1: f64,
    y0: &[f64],
    ctl: &OdeControl,
    mut observe: O,
) -> Result<(Vec<f64>, OdeStats)>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
    O: FnMut(f64, &[f64]) -> Result<()>,
{
    ctl.validated()?;
    let mut stats = OdeStats::default();
    let span = t1 - t0;
    let n = y0.len();
    let mut y = y0.to_vec();
    if span == 0.0 || n == 0 {
        return Ok((y, stats));
    }

    let mut t = t0;
    let mut h = ctl.initial_step.min(span);
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    let mut y_stage = vec![0.0; n];
    let mut y_new = vec![0.0; n];

    f(t, &y, &mut k[0])?;
    stats.rhs_evals += 1;

    // PI controller state (Hairer's beta = 0.04).
    const ALPHA: f64 = 0.17;
    const BETA: f64 = 0.04;
    const SAFETY: f64 = 0.9;
    let mut err_old: f64 = 1e-4;

    while t < t1 {
        if stats.steps + stats.rejected >= ctl.max_steps {
            return Err(Error::OdeMaxSteps {
                max_steps: ctl.max_steps,
            });
        }
        if h < 1e-14 * span.max(1.0) {
            return Err(Error::OdeStepUnderflow { t });
        }
        if t + h > t1 {
            h = t1 - t;
        }

        for stage in 0..6 {
            for i in 0..n {
                let mut acc = 0.0;
                for (j, kj) in k.iter().take(stage + 1).enumerate() {
                    acc += A[stage][j] * kj[i];
                }
                y_stage[i] = y[i] + h * acc;
            }
            f(t + C[stage] * h, &y_stage, &mut k[stage + 1])?;
            stats.rhs_evals += 1;
        }
        // stage 6 used y_new coefficients (row A[5] == B), so y_stage is y_new
        y_new.copy_from_slice(&y_stage);

        let mut err_sq = 0.0;
        for i in 0..n {
            let mut e = 0.0;
            for (j, kj) in k.iter().enumerate() {
                e += E[j] * kj[i];
            }
            e *= h;
            let scale = ctl.abs_tol + ctl.rel_tol * y[i].abs().max(y_new[i].abs());
            let r = e / scale;
            err_sq += r * r;
        }
        let mut err = (err_sq / n as f64).sqrt();
        if !err.is_finite() {
            err = 1e10;
        }

        if err <= 1.0 {
            t += h;
            std::mem::swap(&mut y, &mut y_new);
            // FSAL: k7 is f at the accepted point
            k.swap(0, 6);
            stats.steps += 1;
            observe(t, &y)?;
            let fac = SAFETY * err.max(1e-10).powf(-ALPHA) * err_old.powf(BETA);
            h *= fac.clamp(0.2, 5.0);
            err_old = err.max(1e-4);
        } else {
            stats.rejected += 1;
            let fac = SAFETY * err.powf(-ALPHA);
            h *= fac.clamp(0.1, 1.0);
        }
    }
    Ok((y, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exponential_growth() {
        let ctl = OdeControl::default();
        let (y, stats) = integrate(
            |_t, y, dy| {
                dy[0] = y[0];
                Ok(())
            },
            0.0,
            1.0,
            &[1.0],
            &ctl,
        )
        .unwrap();
        assert_relative_eq!(y[0], std::f64::consts::E, max_relative = 1e-9);
        assert!(stats.steps > 0);
    }

    #[test]
    fn harmonic_oscillator_period() {
        let ctl = OdeControl {
            rel_tol: 1e-12,
            abs_tol: 1e-12,
            ..Default::default()
        };
        let tau = 2.0 * std::f64::consts::PI;
        let (y, _) = integrate(
            |_t, y, dy| {
                dy[0] = y[1];
                dy[1] = -y[0];
                Ok(())
            },
            0.0,
            tau,
            &[1.0, 0.0],
            &ctl,
        )
        .unwrap();
        assert_relative_eq!(y[0], 1.0, epsilon = 1e-9);
        assert_relative_eq!(y[1], 0.0, epsilon = 1e-9);
    }

    #[test]
    fn zero_span_is_identity() {
        let ctl = OdeControl::default();
        let (y, stats) = integrate(
            |_t, _y, dy| {
                dy[0] = 1.0;
                Ok(())
            },
            0.5,
            0.5,
            &[3.0],
            &ctl,
        )
        .unwrap();
        assert_eq!(y[0], 3.0);
        assert_eq!(stats.steps, 0);
    }

    #[test]
    fn tolerance_halving_converges() {
        // time-dependent rhs with a known integral: y' = cos(t)*y
        let run = |tol: f64| {
            let ctl = OdeControl {
                rel_tol: tol,
                abs_tol: tol,
                ..Default::default()
            };
            integrate(
                |t, y, dy| {
                    dy[0] = t.cos() * y[0];
                    Ok(())
                },
                0.0,
                1.0,
                &[1.0],
                &ctl,
            )
            .unwrap()
            .0[0]
        };
        let exact = 1.0f64.sin().exp();
        let coarse = run(1e-8);
        let fine = run(5e-9);
        assert!((coarse - fine).abs() < 1e-8);
        assert_relative_eq!(fine, exact, max_relative = 1e-8);
    }

    #[test]
    fn rhs_error_propagates() {
        let ctl = OdeControl::default();
        let res = integrate(
            |t, _y, dy| {
                if t > 0.5 {
                    return Err(Error::PfaffianGap { gap: 0.0 });
                }
                dy[0] = 1.0;
                Ok(())
            },
            0.0,
            1.0,
            &[0.0],
            &ctl,
        );
        assert!(matches!(res, Err(Error::PfaffianGap { .. })));
    }

    #[test]
    fn observer_sees_monotone_time_and_can_abort() {
        let ctl = OdeControl::default();
        let mut last = 0.0;
        let res = integrate_observed(
            |_t, _y, dy| {
                dy[0] = 1.0;
                Ok(())
            },
            0.0,
            1.0,
            &[0.0],
            &ctl,
            |t, _y| {
                assert!(t > last);
                last = t;
                if t > 0.7 {
                    return Err(Error::OrderViolation { tau: t });
                }
                Ok(())
            },
        );
        assert!(matches!(res, Err(Error::OrderViolation { .. })));
    }

    #[test]
    fn max_steps_enforced() {
        let ctl = OdeControl {
            max_steps: 10,
            ..Default::default()
        };
        let res = integrate(
            |t, y, dy| {
                dy[0] = (40.0 * t).sin() * 1e4 * y[0].max(1.0);
                Ok(())
            },
            0.0,
            1.0,
            &[1.0],
            &ctl,
        );
        assert!(matches!(res, Err(Error::OdeMaxSteps { .. })));
    }
}
