//! Restarted GMRES for real linear operators.
//!
//! Complex systems are passed in real-linearized form: a vector of `n`
//! complex unknowns is stored as `2n` reals, all real parts first.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{NvsError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GmresSettings {
    /// Target for `|b - A x| / |b|`.
    pub tolerance: f64,
    /// Total number of Arnoldi steps across all restarts.
    pub max_iterations: usize,
    pub restart: usize,
}

impl Default for GmresSettings {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 500,
            restart: 60,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GmresOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    /// Relative residual after every Arnoldi step.
    pub history: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solves `A x = b` starting from `x = 0`. `apply(x, out)` writes `A x`.
pub fn gmres(
    apply: impl Fn(&[f64], &mut [f64]),
    b: &[f64],
    settings: &GmresSettings,
) -> Result<GmresOutcome> {
    let n = b.len();
    let bnorm = norm(b);
    let mut x = vec![0.0; n];
    let mut history = Vec::new();
    if bnorm == 0.0 {
        return Ok(GmresOutcome {
            x,
            iterations: 0,
            residual: 0.0,
            history,
        });
    }
    let m = settings.restart.max(1);
    let mut iterations = 0;
    let mut r = vec![0.0; n];
    let mut ax = vec![0.0; n];
    let mut residual;

    loop {
        apply(&x, &mut ax);
        for i in 0..n {
            r[i] = b[i] - ax[i];
        }
        let beta = norm(&r);
        residual = beta / bnorm;
        if residual <= settings.tolerance {
            return Ok(GmresOutcome {
                x,
                iterations,
                residual,
                history,
            });
        }
        if iterations >= settings.max_iterations {
            return Err(NvsError::NonConvergence {
                iterations,
                residual,
                history,
            });
        }

        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut hess = vec![vec![0.0; m]; m + 1];
        let mut cs = vec![0.0; m];
        let mut sn = vec![0.0; m];
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut steps = 0;

        for j in 0..m {
            let mut w = vec![0.0; n];
            apply(&basis[j], &mut w);
            // Modified Gram-Schmidt with one reorthogonalization pass.
            for _ in 0..2 {
                for (i, v) in basis.iter().enumerate() {
                    let c = dot(&w, v);
                    hess[i][j] += c;
                    w.iter_mut().zip(v).for_each(|(a, b)| *a -= c * b);
                }
            }
            let wn = norm(&w);
            hess[j + 1][j] = wn;

            for i in 0..j {
                let t = cs[i] * hess[i][j] + sn[i] * hess[i + 1][j];
                hess[i + 1][j] = -sn[i] * hess[i][j] + cs[i] * hess[i + 1][j];
                hess[i][j] = t;
            }
            let (a, bb) = (hess[j][j], hess[j + 1][j]);
            let rho = a.hypot(bb);
            if rho == 0.0 {
                cs[j] = 1.0;
                sn[j] = 0.0;
            } else {
                cs[j] = a / rho;
                sn[j] = bb / rho;
            }
            hess[j][j] = rho;
            hess[j + 1][j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];

            steps = j + 1;
            iterations += 1;
            let est = g[j + 1].abs() / bnorm;
            history.push(est);
            if est <= settings.tolerance || wn == 0.0 || iterations >= settings.max_iterations {
                break;
            }
            basis.push(w.iter().map(|v| v / wn).collect());
        }

        let mut y = vec![0.0; steps];
        for i in (0..steps).rev() {
            let mut s = g[i];
            for k in (i + 1)..steps {
                s -= hess[i][k] * y[k];
            }
            y[i] = s / hess[i][i];
        }
        for (k, yk) in y.iter().enumerate() {
            x.iter_mut().zip(&basis[k]).for_each(|(a, v)| *a += yk * v);
        }
    }
}

pub(crate) fn split(values: &[Complex64]) -> Vec<f64> {
    values
        .iter()
        .map(|v| v.re)
        .chain(values.iter().map(|v| v.im))
        .collect()
}

pub(crate) fn join(values: &[f64]) -> Vec<Complex64> {
    let n = values.len() / 2;
    (0..n)
        .map(|i| Complex64::new(values[i], values[n + i]))
        .collect()
}
