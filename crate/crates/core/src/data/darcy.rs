//! Steady Darcy flow `-div(a grad u) = f` on the unit square with `u = 0` on
//! the boundary.
//!
//! Nodes sit at `(i/n, j/n)` for `i, j < n`; rows `i = 0` and `j = 0` lie on
//! the boundary and the boundary at `x = 1` (`y = 1`) is the implicit node
//! `i = n`. The coefficient there repeats `a[0]` (periodic sampling). Faces
//! use the harmonic mean of the two adjacent coefficients.

use crate::error::{Error, Result};

pub const DEFAULT_A_HI: f64 = 12.0;
pub const DEFAULT_A_LO: f64 = 3.0;

/// Two-phase thresholding of a random field.
pub fn darcy_coefficient(field: &[f64], a_hi: f64, a_lo: f64) -> Vec<f64> {
    field.iter().map(|&v| if v >= 0.0 { a_hi } else { a_lo }).collect()
}

#[derive(Debug, Clone)]
pub struct DarcySolution {
    /// Solution on the `n x n` grid, row-major in `(i, j)`.
    pub u: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
}

pub const CG_TOLERANCE: f64 = 1e-8;

fn harmonic(a: f64, b: f64) -> f64 {
    2.0 * a * b / (a + b)
}

/// Matrix-free operator on the `(n-1)^2` interior unknowns.
struct Operator {
    m: usize,
    /// Face coefficient between interior row `p` and `p+1`, including the
    /// boundary faces (`m + 1` faces per line).
    fx: Vec<f64>,
    fy: Vec<f64>,
}

impl Operator {
    fn new(a: &[f64], n: usize) -> Operator {
        let m = n - 1;
        let at = |i: usize, j: usize| a[(i % n) * n + (j % n)];
        // fx[(p, q)] with p in 0..=m: face between node i=p and i=p+1 at column j=q+1
        let mut fx = vec![0.0; (m + 1) * m];
        let mut fy = vec![0.0; m * (m + 1)];
        for p in 0..=m {
            for q in 0..m {
                fx[p * m + q] = harmonic(at(p, q + 1), at(p + 1, q + 1));
                fy[q * (m + 1) + p] = harmonic(at(q + 1, p), at(q + 1, p + 1));
            }
        }
        Operator { m, fx, fy }
    }

    fn apply(&self, u: &[f64], out: &mut [f64]) {
        let m = self.m;
        for p in 0..m {
            for q in 0..m {
                let w = self.fx[p * m + q];
                let e = self.fx[(p + 1) * m + q];
                let s = self.fy[p * (m + 1) + q];
                let nn = self.fy[p * (m + 1) + q + 1];
                let c = u[p * m + q];
                let mut v = (w + e + s + nn) * c;
                if p > 0 {
                    v -= w * u[(p - 1) * m + q];
                }
                if p + 1 < m {
                    v -= e * u[(p + 1) * m + q];
                }
                if q > 0 {
                    v -= s * u[p * m + q - 1];
                }
                if q + 1 < m {
                    v -= nn * u[p * m + q + 1];
                }
                out[p * m + q] = v;
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves with conjugate gradients to relative residual `1e-8`, failing
/// after `10 n^2` iterations.
pub fn solve_darcy(a: &[f64], f: &[f64], n: usize) -> Result<DarcySolution> {
    if n < 3 {
        return Err(Error::Invalid(format!("Darcy grid needs n >= 3, got {n}")));
    }
    if a.len() != n * n || f.len() != n * n {
        return Err(Error::Invalid(format!("coefficient and forcing must have {} values", n * n)));
    }
    if let Some(i) = a.iter().position(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::Invalid(format!("coefficient must be positive, a[{i}] = {}", a[i])));
    }
    let op = Operator::new(a, n);
    let m = n - 1;
    let h2 = 1.0 / (n * n) as f64;
    let b: Vec<f64> = (0..m * m).map(|k| h2 * f[(k / m + 1) * n + k % m + 1]).collect();
    let bnorm = dot(&b, &b).sqrt();
    let mut x = vec![0.0; m * m];
    let mut iterations = 0;
    let mut rel = 0.0;
    if bnorm > 0.0 {
        let mut r = b.clone();
        let mut p = r.clone();
        let mut ap = vec![0.0; m * m];
        let mut rr = dot(&r, &r);
        let max_iter = 10 * n * n;
        loop {
            rel = rr.sqrt() / bnorm;
            if rel <= CG_TOLERANCE {
                break;
            }
            if iterations >= max_iter {
                return Err(Error::Solver(format!(
                    "conjugate gradients stalled after {iterations} iterations at relative residual {rel:.3e}"
                )));
            }
            op.apply(&p, &mut ap);
            let alpha = rr / dot(&p, &ap);
            for k in 0..m * m {
                x[k] += alpha * p[k];
                r[k] -= alpha * ap[k];
            }
            let rr_new = dot(&r, &r);
            let beta = rr_new / rr;
            rr = rr_new;
            for k in 0..m * m {
                p[k] = r[k] + beta * p[k];
            }
            iterations += 1;
        }
    }
    let mut u = vec![0.0; n * n];
    for p in 0..m {
        for q in 0..m {
            u[(p + 1) * n + q + 1] = x[p * m + q];
        }
    }
    Ok(DarcySolution { u, iterations, relative_residual: rel })
}

/// Max-norm error against `sin(pi x) sin(pi y)` with a unit coefficient.
pub fn manufactured_error(n: usize) -> Result<f64> {
    use std::f64::consts::PI;
    let exact = |i: usize, j: usize| (PI * i as f64 / n as f64).sin() * (PI * j as f64 / n as f64).sin();
    let f: Vec<f64> = (0..n * n).map(|k| 2.0 * PI * PI * exact(k / n, k % n)).collect();
    let sol = solve_darcy(&vec![1.0; n * n], &f, n)?;
    Ok((0..n * n).map(|k| (sol.u[k] - exact(k / n, k % n)).abs()).fold(0.0, f64::max))
}
