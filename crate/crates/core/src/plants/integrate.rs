//! Fixed-step integrators: classical RK4 and Euler-Maruyama.

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::draw_normal;

/// Right-hand side signature: writes dstate/dt into `out`.
pub type DerivFn<'a> = &'a dyn Fn(&[f64], &[f64], &mut [f64]);

fn check_finite(v: &[f64], context: &str) -> Result<()> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Integration {
            context: context.to_string(),
            state: v.to_vec(),
        });
    }
    Ok(())
}

/// Classical 4th-order Runge-Kutta over `substeps` equal sub-intervals with
/// the action held constant.
pub fn rk4_step(
    f: DerivFn,
    state: &[f64],
    action: &[f64],
    dt: f64,
    substeps: usize,
) -> Result<Vec<f64>> {
    if !(dt > 0.0) {
        return Err(Error::config(format!("rk4_step needs dt > 0, got {dt}")));
    }
    if substeps < 1 {
        return Err(Error::config("rk4_step needs substeps >= 1"));
    }
    let n = state.len();
    let h = dt / substeps as f64;
    let mut y = state.to_vec();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    for _ in 0..substeps {
        f(&y, action, &mut k1);
        check_finite(&k1, "non-finite derivative (k1)")?;
        for i in 0..n {
            tmp[i] = y[i] + 0.5 * h * k1[i];
        }
        f(&tmp, action, &mut k2);
        check_finite(&k2, "non-finite derivative (k2)")?;
        for i in 0..n {
            tmp[i] = y[i] + 0.5 * h * k2[i];
        }
        f(&tmp, action, &mut k3);
        check_finite(&k3, "non-finite derivative (k3)")?;
        for i in 0..n {
            tmp[i] = y[i] + h * k3[i];
        }
        f(&tmp, action, &mut k4);
        check_finite(&k4, "non-finite derivative (k4)")?;
        for i in 0..n {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        check_finite(&y, "non-finite state after RK4 substep")?;
    }
    Ok(y)
}

/// Euler-Maruyama: x <- x + f h + g sqrt(h) z per substep, with independent
/// standard-normal z per state component (diagonal diffusion).
pub fn euler_maruyama_step(
    drift: DerivFn,
    diffusion: DerivFn,
    state: &[f64],
    action: &[f64],
    dt: f64,
    substeps: usize,
    rng: &mut impl Rng,
) -> Result<Vec<f64>> {
    if !(dt > 0.0) {
        return Err(Error::config(format!(
            "euler_maruyama_step needs dt > 0, got {dt}"
        )));
    }
    if substeps < 1 {
        return Err(Error::config("euler_maruyama_step needs substeps >= 1"));
    }
    let n = state.len();
    let h = dt / substeps as f64;
    let sqrt_h = h.sqrt();
    let mut y = state.to_vec();
    let mut f = vec![0.0; n];
    let mut g = vec![0.0; n];
    for _ in 0..substeps {
        drift(&y, action, &mut f);
        check_finite(&f, "non-finite drift")?;
        diffusion(&y, action, &mut g);
        check_finite(&g, "non-finite diffusion")?;
        for i in 0..n {
            y[i] += f[i] * h + g[i] * sqrt_h * draw_normal(rng);
        }
        check_finite(&y, "non-finite state after Euler-Maruyama substep")?;
    }
    Ok(y)
}
