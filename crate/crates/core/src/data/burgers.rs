//! Viscous Burgers equation `u_t + u u_x = nu u_xx` on the periodic unit
//! interval, integrated pseudo-spectrally.
//!
//! The state lives in the half spectrum. Diffusion is integrated exactly by
//! an integrating factor and the dealiased nonlinear term `-u u_x` is
//! advanced with the Lawson (integrating-factor) RK4 scheme.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::spectral::{irfftn_values, rfftn_values};
use crate::tensor::C64;

struct Solver {
    n: usize,
    nu: f64,
    /// `2 pi i k` for retained wavenumbers, zero where dealiased.
    deriv: Vec<C64>,
    keep: Vec<bool>,
}

impl Solver {
    fn new(n: usize, nu: f64) -> Solver {
        let h = n / 2 + 1;
        let keep: Vec<bool> = (0..h).map(|k| 3 * k < n).collect();
        let deriv = (0..h).map(|k| if keep[k] { C64::new(0.0, 2.0 * PI * k as f64) } else { C64::new(0.0, 0.0) }).collect();
        Solver { n, nu, deriv, keep }
    }

    fn physical(&self, v: &[C64]) -> Vec<f64> {
        irfftn_values(v, 1, &[self.n])
    }

    /// Dealiased `-P(P u * (P u)_x)` with its mean removed.
    fn nonlinear(&self, v: &[C64]) -> Vec<C64> {
        let masked: Vec<C64> = v.iter().zip(&self.keep).map(|(&z, &k)| if k { z } else { C64::new(0.0, 0.0) }).collect();
        let dv: Vec<C64> = masked.iter().zip(&self.deriv).map(|(z, d)| z * d).collect();
        let u = self.physical(&masked);
        let ux = self.physical(&dv);
        let prod: Vec<f64> = u.iter().zip(&ux).map(|(a, b)| -a * b).collect();
        let mut out = rfftn_values(&prod, 1, &[self.n]);
        for (z, &k) in out.iter_mut().zip(&self.keep) {
            if !k {
                *z = C64::new(0.0, 0.0);
            }
        }
        out[0] = C64::new(0.0, 0.0);
        out
    }

    fn half_step_factor(&self, dt: f64) -> Vec<f64> {
        (0..self.deriv.len())
            .map(|k| {
                let w = 2.0 * PI * k as f64;
                (-self.nu * w * w * dt / 2.0).exp()
            })
            .collect()
    }

    fn step(&self, v: &[C64], dt: f64) -> Vec<C64> {
        let e = self.half_step_factor(dt);
        let len = v.len();
        let comb = |a: &[C64], sa: &dyn Fn(usize) -> f64, b: &[C64], sb: &dyn Fn(usize) -> f64| -> Vec<C64> {
            (0..len).map(|k| a[k] * sa(k) + b[k] * sb(k)).collect()
        };
        let k1 = self.nonlinear(v);
        let k2 = self.nonlinear(&comb(v, &|k| e[k], &k1, &|k| e[k] * dt / 2.0));
        let k3 = self.nonlinear(&comb(v, &|k| e[k], &k2, &|_| dt / 2.0));
        let k4 = self.nonlinear(&comb(v, &|k| e[k] * e[k], &k3, &|k| e[k] * dt));
        (0..len)
            .map(|k| {
                let e1 = e[k];
                let e2 = e1 * e1;
                v[k] * e2 + (k1[k] * e2 + (k2[k] + k3[k]) * (2.0 * e1) + k4[k]) * (dt / 6.0)
            })
            .collect()
    }

    fn time_step(&self, u: &[f64]) -> f64 {
        let dx = 1.0 / self.n as f64;
        let umax = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let diffusive = 0.4 * dx * dx / self.nu;
        if umax > 0.0 {
            (0.5 * dx / umax).min(diffusive)
        } else {
            diffusive
        }
    }
}

fn check(u0: &[f64], nu: f64, t: f64) -> Result<()> {
    let n = u0.len();
    if n < 16 || !n.is_power_of_two() {
        return Err(Error::Invalid(format!("Burgers grid must be a power of two >= 16, got {n}")));
    }
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(Error::Invalid(format!("viscosity must be positive, got {nu}")));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::Invalid(format!("final time must be non-negative, got {t}")));
    }
    if u0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("Burgers initial condition".into()));
    }
    Ok(())
}

/// Integrates from `u0` to time `t`, calling `observe(time, u)` at the
/// initial time and after every step.
pub fn solve_burgers_observed(u0: &[f64], nu: f64, t: f64, observe: &mut dyn FnMut(f64, &[f64])) -> Result<Vec<f64>> {
    check(u0, nu, t)?;
    let n = u0.len();
    let solver = Solver::new(n, nu);
    let mut v = rfftn_values(u0, 1, &[n]);
    let mut u = u0.to_vec();
    let mut time = 0.0;
    observe(time, &u);
    while time < t {
        let mut dt = solver.time_step(&u);
        if time + dt >= t {
            dt = t - time;
        }
        v = solver.step(&v, dt);
        time = if time + dt >= t { t } else { time + dt };
        u = solver.physical(&v);
        if u.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("Burgers state blew up at t = {time}")));
        }
        observe(time, &u);
    }
    Ok(u)
}

pub fn solve_burgers(u0: &[f64], nu: f64, t: f64) -> Result<Vec<f64>> {
    solve_burgers_observed(u0, nu, t, &mut |_, _| {})
}

/// Band-limited interpolation of a periodic signal onto `m >= n` points.
pub fn spectral_upsample(u: &[f64], m: usize) -> Result<Vec<f64>> {
    let n = u.len();
    if m < n || n == 0 {
        return Err(Error::Invalid(format!("cannot upsample {n} points to {m}")));
    }
    let z = rfftn_values(u, 1, &[n]);
    let mut w = vec![C64::new(0.0, 0.0); m / 2 + 1];
    let scale = m as f64 / n as f64;
    for (k, &c) in z.iter().enumerate() {
        // A Nyquist bin of the coarse grid is split between +-k on the fine grid.
        let c = if n.is_multiple_of(2) && k == n / 2 && m > n { c * 0.5 } else { c };
        w[k] = c * scale;
    }
    Ok(irfftn_values(&w, 1, &[m]))
}
