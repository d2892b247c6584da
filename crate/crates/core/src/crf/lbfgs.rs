//! Limited-memory BFGS with a backtracking Armijo line search.

use std::collections::VecDeque;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct LbfgsConfig {
    pub memory: usize,
    pub max_iterations: usize,
    /// Stop once the gradient's largest absolute coordinate is at most this.
    pub gradient_tolerance: f64,
    pub max_line_search: usize,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        Self {
            memory: 10,
            max_iterations: 500,
            gradient_tolerance: 1e-4,
            max_line_search: 40,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub initial_value: f64,
    /// Sup-norm of the final gradient.
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sup_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Minimizes `f`, which returns the objective and its gradient. Accepted
/// steps never increase the objective.
pub fn minimize<F>(mut f: F, x0: Vec<f64>, config: &LbfgsConfig) -> Result<Minimum>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let mut x = x0;
    let (mut fx, mut g) = f(&x)?;
    if !fx.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical {
            iteration: 0,
            message: format!("objective {fx} at the starting point"),
        });
    }
    let initial_value = fx;
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(config.memory);
    let mut iterations = 0;
    let mut converged = false;
    let mut alpha_buf = vec![0.0; config.memory];

    while iterations < config.max_iterations {
        if sup_norm(&g) <= config.gradient_tolerance {
            converged = true;
            break;
        }

        // two-loop recursion
        let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
        for (i, (s, y, rho)) in history.iter().enumerate().rev() {
            let a = rho * dot(s, &d);
            alpha_buf[i] = a;
            for (dj, yj) in d.iter_mut().zip(y) {
                *dj -= a * yj;
            }
        }
        if let Some((s, y, _)) = history.back() {
            let gamma = dot(s, y) / dot(y, y);
            d.iter_mut().for_each(|v| *v *= gamma);
        }
        for (i, (s, y, rho)) in history.iter().enumerate() {
            let b = rho * dot(y, &d);
            for (dj, sj) in d.iter_mut().zip(s) {
                *dj += (alpha_buf[i] - b) * sj;
            }
        }

        let mut slope = dot(&g, &d);
        if slope.is_nan() || slope >= 0.0 {
            history.clear();
            d = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
        }

        let mut step = if history.is_empty() {
            (1.0 / dot(&d, &d).sqrt()).min(1.0)
        } else {
            1.0
        };
        let mut accepted = None;
        let mut last_value = fx;
        for _ in 0..config.max_line_search {
            let xn: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + step * di).collect();
            let (fxn, gn) = f(&xn)?;
            last_value = fxn;
            if fxn.is_finite() && fxn <= fx + 1e-4 * step * slope && gn.iter().all(|v| v.is_finite()) {
                accepted = Some((xn, fxn, gn));
                break;
            }
            step *= 0.5;
        }

        let Some((xn, fxn, gn)) = accepted else {
            if !last_value.is_finite() {
                return Err(Error::Numerical {
                    iteration: iterations + 1,
                    message: format!("objective {last_value} during line search"),
                });
            }
            if history.is_empty() {
                // no descent left at floating-point resolution
                break;
            }
            history.clear();
            continue;
        };

        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 {
            if history.len() == config.memory {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        x = xn;
        fx = fxn;
        g = gn;
        iterations += 1;
    }
    if !converged && sup_norm(&g) <= config.gradient_tolerance {
        converged = true;
    }

    Ok(Minimum {
        gradient_norm: sup_norm(&g),
        x,
        value: fx,
        initial_value,
        iterations,
        converged,
    })
}
