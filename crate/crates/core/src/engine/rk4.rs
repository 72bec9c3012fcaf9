//! Classical fourth-order Runge-Kutta over fixed-size state arrays.

use crate::error::{Result, SimError};

/// One RK4 step of `dx/dt = f(t, x)` from `t` to `t + dt`.
///
/// Inputs other than `x` are held constant by the caller across the four
/// stages (zero-order hold).
pub fn rk4_step<const N: usize, F>(f: F, t: f64, x: &[f64; N], dt: f64) -> Result<[f64; N]>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    if !(dt > 0.0) {
        return Err(SimError::domain(format!("dt must be > 0, got {dt}")));
    }
    let half = 0.5 * dt;
    let k1 = checked(f(t, x), t, x)?;
    let k2 = checked(f(t + half, &axpy(x, half, &k1)), t, x)?;
    let k3 = checked(f(t + half, &axpy(x, half, &k2)), t, x)?;
    let k4 = checked(f(t + dt, &axpy(x, dt, &k3)), t, x)?;

    let sixth = dt / 6.0;
    let mut out = *x;
    for i in 0..N {
        out[i] += sixth * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    checked(out, t, x)
}

fn axpy<const N: usize>(x: &[f64; N], a: f64, k: &[f64; N]) -> [f64; N] {
    let mut out = *x;
    for i in 0..N {
        out[i] += a * k[i];
    }
    out
}

fn checked<const N: usize>(v: [f64; N], t: f64, x: &[f64; N]) -> Result<[f64; N]> {
    if v.iter().all(|c| c.is_finite()) {
        Ok(v)
    } else {
        Err(SimError::NumericalBlowup { t, detail: format!("non-finite derivative or state; state snapshot {x:?}") })
    }
}
