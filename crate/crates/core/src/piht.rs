//! Iterative hard thresholding driven by the pinball subgradient.
//!
//! Each iteration takes a fixed-size subgradient step and projects back onto
//! the set of `K`-sparse vectors:
//!
//! ```text
//! a^{l+1} = x^l - alpha * U g^l        g_i = -y_i   if y_i (u_i^T x^l) <= c
//! x^{l+1} = eta_K(a^{l+1})                   tau*y_i otherwise
//! ```
//!
//! There is no convergence test: the loop always runs `l_max` iterations and
//! the final iterate is normalized to the unit sphere. The hinge special
//! case `tau = 0, c = 0` is the classic binary iterative hard thresholding
//! update.

use crate::error::{Error, Result};
use crate::loss::{pinball_value, PinballParams, ProblemData};
use crate::sensing::{axpy, dot, norm2, SensingMatrix};

/// Keeps the `k` entries of largest magnitude and zeroes the rest.
/// Magnitude ties are broken toward the lower index. `k >= len` is the
/// identity.
pub fn hard_threshold(a: &[f64], k: usize) -> Vec<f64> {
    let n = a.len();
    if k >= n {
        return a.to_vec();
    }
    let mut out = vec![0.0; n];
    if k == 0 {
        return out;
    }
    let mut idx: Vec<usize> = (0..n).collect();
    // Descending magnitude, ascending index; total_cmp keeps the order total.
    idx.select_nth_unstable_by(k - 1, |&i, &j| {
        a[j].abs().total_cmp(&a[i].abs()).then(i.cmp(&j))
    });
    for &i in &idx[..k] {
        out[i] = a[i];
    }
    out
}

/// Solver knobs. `alpha = None` uses the step `1/m`; `x0 = None` starts from
/// the normalized back-projection `U y / ||U y||_2`.
#[derive(Debug, Clone, PartialEq)]
pub struct PihtConfig {
    pub k: usize,
    pub alpha: Option<f64>,
    pub l_max: usize,
    pub x0: Option<Vec<f64>>,
}

impl PihtConfig {
    pub fn new(k: usize) -> Self {
        PihtConfig {
            k,
            alpha: None,
            l_max: 500,
            x0: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PihtStatus {
    /// The final iterate was nonzero and has been normalized.
    Completed,
    /// The final iterate was identically zero and is returned unnormalized.
    Degenerate,
}

#[derive(Debug, Clone)]
pub struct PihtResult {
    pub x: Vec<f64>,
    /// Objective value at `x^0, x^1, ..., x^{l_max}` (length `l_max + 1`).
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub status: PihtStatus,
}

pub fn piht_solve(
    data: &ProblemData,
    params: &PinballParams,
    config: &PihtConfig,
) -> Result<PihtResult> {
    solve_on_signs(data.matrix(), data.y().as_slice(), params, config)
}

/// Internal entry point that takes the sign vector as a plain slice so the
/// adaptive-outlier wrapper can re-solve with corrected signs without
/// rebuilding the problem.
pub(crate) fn solve_on_signs(
    matrix: &SensingMatrix,
    y: &[f64],
    params: &PinballParams,
    config: &PihtConfig,
) -> Result<PihtResult> {
    let n = matrix.n();
    let m = matrix.m();
    if m == 0 {
        return Err(Error::InvalidParameter {
            name: "m",
            message: "need at least one measurement".into(),
        });
    }
    if config.k == 0 || config.k > n {
        return Err(Error::InvalidParameter {
            name: "k",
            message: format!("must satisfy 1 <= k <= n = {n} (got {})", config.k),
        });
    }
    if config.l_max == 0 {
        return Err(Error::InvalidParameter {
            name: "l_max",
            message: "must be at least 1".into(),
        });
    }
    let alpha = config.alpha.unwrap_or(1.0 / m as f64);
    if !(alpha > 0.0) {
        return Err(Error::InvalidParameter {
            name: "alpha",
            message: format!("must be positive (got {alpha})"),
        });
    }

    let mut x = match &config.x0 {
        Some(x0) => {
            if x0.len() != n {
                return Err(Error::DimensionMismatch {
                    context: "piht x0",
                    expected: n,
                    got: x0.len(),
                });
            }
            x0.clone()
        }
        None => {
            // back-projection start: U y, normalized (left at zero in the
            // degenerate case U y = 0)
            let mut x0 = matrix.weighted_column_sum(y);
            let norm = norm2(&x0);
            if norm > 0.0 {
                x0.iter_mut().for_each(|v| *v /= norm);
            }
            x0
        }
    };

    let inv_m = 1.0 / m as f64;
    let mut trace = Vec::with_capacity(config.l_max + 1);
    for _ in 0..config.l_max {
        // One pass gives both the loss of the current iterate and the
        // subgradient coefficients.
        let mut obj = 0.0;
        let mut a = x.clone();
        for i in 0..m {
            let col = matrix.column(i);
            let margin = y[i] * dot(col, &x);
            obj += pinball_value(params.c - margin, params);
            let g = if margin <= params.c { -y[i] } else { params.tau * y[i] };
            axpy(-alpha * g, col, &mut a);
        }
        trace.push(obj * inv_m);
        x = hard_threshold(&a, config.k);
    }
    // objective of the final iterate
    let mut obj = 0.0;
    for i in 0..m {
        let margin = y[i] * dot(matrix.column(i), &x);
        obj += pinball_value(params.c - margin, params);
    }
    trace.push(obj * inv_m);

    let norm = norm2(&x);
    let status = if norm > 0.0 {
        x.iter_mut().for_each(|v| *v /= norm);
        PihtStatus::Completed
    } else {
        PihtStatus::Degenerate
    };
    Ok(PihtResult {
        x,
        objective_trace: trace,
        iterations: config.l_max,
        status,
    })
}
