//! Sparsity-regularized sign recovery solved through its dual.
//!
//! Primal model (`mu > 0`, `tau` in [-1, 0], bias `c`):
//!
//! ```text
//! min  mu ||x||_1 + (1/m) sum_i L_tau(c - y_i u_i^T x)   s.t. ||x||_2 <= 1
//! ```
//!
//! Its dual maximizes `c * sum_i xi_i - || sum_i xi_i y_i u_i - beta ||_2`
//! over the box `xi_i in [-tau/m, 1/m]`, `||beta||_inf <= mu`. Coordinate
//! ascent sweeps the `xi` box with an exact 1-D maximizer (closed-form root
//! of a quadratic), then refreshes `beta` by clamping. A primal solution is
//! read off the final `w = sum_i xi_i y_i u_i - beta` as `x = w / ||w||_2`.
//!
//! At `tau = -1` the box collapses to the single point `xi = 1/m` and the
//! whole procedure reduces to one soft-threshold step — the classic passive
//! closed form, available directly as [`passive_closed_form`].

use crate::error::{Error, Result};
use crate::loss::{self, PinballParams, ProblemData};
use crate::sensing::{axpy, dot, norm2, SensingMatrix};

/// Dual iterate with its cached aggregates:
/// `s = sum_i xi_i y_i u_i` and `w = s - beta`.
#[derive(Debug, Clone)]
pub struct DualState {
    pub beta: Vec<f64>,
    pub xi: Vec<f64>,
    pub s: Vec<f64>,
    pub w: Vec<f64>,
}

/// Regularization weight interpolation nodes: `(tau, C)` pairs for
/// `mu = C * sqrt(ln n / m)`.
const MU_COEF_NODES: [(f64, f64); 5] = [
    (-1.0, 1.0),
    (-0.9, 0.9),
    (-0.7, 0.8),
    (-0.5, 0.7),
    (-0.4, 0.6),
];

/// Piecewise-linear interpolation of the regularization coefficient over
/// `tau`; clamped to the outermost nodes beyond them.
pub fn default_mu_coef(tau: f64) -> f64 {
    if tau <= MU_COEF_NODES[0].0 {
        return MU_COEF_NODES[0].1;
    }
    for pair in MU_COEF_NODES.windows(2) {
        let (t0, c0) = pair[0];
        let (t1, c1) = pair[1];
        if tau <= t1 {
            return c0 + (c1 - c0) * (tau - t0) / (t1 - t0);
        }
    }
    MU_COEF_NODES[MU_COEF_NODES.len() - 1].1
}

/// `C(tau) * sqrt(ln n / m)`.
pub fn default_mu(tau: f64, n: usize, m: usize) -> f64 {
    default_mu_coef(tau) * ((n as f64).ln() / m as f64).sqrt()
}

/// Solver knobs. Exactly one of `mu` / `mu_coef` is typically set; with
/// neither, the coefficient comes from [`default_mu_coef`]. `delta = None`
/// uses the stopping threshold `(1 + tau) / (10 m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsvmConfig {
    pub mu: Option<f64>,
    pub mu_coef: Option<f64>,
    pub l_max: usize,
    pub delta: Option<f64>,
}

impl Default for EpsvmConfig {
    fn default() -> Self {
        EpsvmConfig {
            mu: None,
            mu_coef: None,
            l_max: 100,
            delta: None,
        }
    }
}

impl EpsvmConfig {
    pub fn resolve_mu(&self, params: &PinballParams, n: usize, m: usize) -> Result<f64> {
        let mu = match self.mu {
            Some(mu) => mu,
            None => {
                let coef = self.mu_coef.unwrap_or_else(|| default_mu_coef(params.tau));
                coef * ((n as f64).ln() / m as f64).sqrt()
            }
        };
        loss::check_mu(mu)?;
        Ok(mu)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpsvmStatus {
    /// `w != 0`: the recovered point sits on the unit sphere.
    OnSphere,
    /// `w = 0` with every `xi_i = 1/m` and `||(1/m) sum y_i u_i||_inf <= mu`:
    /// x = 0 is genuinely optimal.
    ZeroOptimal,
    /// `w = 0` without the zero-optimality certificate.
    Degenerate,
}

#[derive(Debug, Clone)]
pub struct EpsvmResult {
    pub x: Vec<f64>,
    pub status: EpsvmStatus,
    pub dual_objective: f64,
    pub primal_objective: f64,
    pub kkt_residual: f64,
    pub sweeps: usize,
    /// True when the sweep-to-sweep change dropped below `delta` (or to
    /// exactly zero) before `l_max` ran out.
    pub converged: bool,
    /// Final dual box variables, one per measurement.
    pub xi: Vec<f64>,
    /// Largest observed decrease of the dual objective across all updates
    /// (0 when ascent was perfectly monotone; tiny values are accumulated
    /// floating-point drift).
    pub dual_ascent_violation: f64,
}

/// Clamp of the cached `s` onto the `beta` box — the exact maximizer of the
/// dual over `beta` for fixed `xi`.
pub fn beta_update(state: &DualState, mu: f64) -> Vec<f64> {
    state.s.iter().map(|&sj| sj.clamp(-mu, mu)).collect()
}

/// Exact maximizer of the dual restricted to one box coordinate.
///
/// Returns the increment `d` to add to `xi_i`, already clamped to
/// `[-tau/m - xi_i, 1/m - xi_i]`. When `c >= ||u_i||` the 1-D objective is
/// non-decreasing and the upper bound is optimal; otherwise the stationary
/// point is the larger root of
/// `A d^2 + B d + C = 0` with `A = ||u||^2 (||u||^2 - c^2)`,
/// `B = 2 (||u||^2 - c^2) y u^T w`, `C = (u^T w)^2 - c^2 ||w||^2`.
/// The discriminant equals `4 c^2 (||u||^2 - c^2)(||u||^2 ||w||^2 - (u^T w)^2)`
/// and is nonnegative by Cauchy-Schwarz; round-off negatives clamp to zero.
pub fn xi_step(
    xi_i: f64,
    u_i: &[f64],
    y_i: f64,
    w: &[f64],
    params: &PinballParams,
    m: usize,
) -> Result<f64> {
    if m == 0 {
        return Err(Error::InvalidParameter {
            name: "m",
            message: "need at least one measurement".into(),
        });
    }
    if y_i != 1.0 && y_i != -1.0 {
        return Err(Error::InvalidSign {
            index: 0,
            value: y_i,
        });
    }
    if u_i.len() != w.len() {
        return Err(Error::DimensionMismatch {
            context: "xi_step vectors",
            expected: u_i.len(),
            got: w.len(),
        });
    }
    let mf = m as f64;
    let lo = -params.tau / mf;
    let hi = 1.0 / mf;
    if xi_i < lo - 1e-12 || xi_i > hi + 1e-12 {
        return Err(Error::InfeasibleDualState(format!(
            "xi = {xi_i} outside [{lo}, {hi}]"
        )));
    }
    Ok(xi_increment(
        xi_i,
        y_i,
        dot(u_i, u_i),
        dot(u_i, w),
        dot(w, w),
        params,
        mf,
    ))
}

#[inline]
fn xi_increment(
    xi_i: f64,
    y_i: f64,
    unorm_sq: f64,
    udw: f64,
    wsq: f64,
    params: &PinballParams,
    mf: f64,
) -> f64 {
    let lo = -params.tau / mf - xi_i;
    let hi = 1.0 / mf - xi_i;
    let c = params.c;
    if c * c >= unorm_sq {
        // non-decreasing objective: push to the upper bound
        return hi;
    }
    let diff = unorm_sq - c * c; // > 0 here
    let a = unorm_sq * diff;
    let b = 2.0 * diff * y_i * udw;
    let cq = udw * udw - c * c * wsq;
    let disc = (b * b - 4.0 * a * cq).max(0.0);
    let dbar = (-b + disc.sqrt()) / (2.0 * a);
    dbar.clamp(lo, hi)
}

fn sign_weighted_sum(matrix: &SensingMatrix, y: &[f64], weight: f64) -> Vec<f64> {
    let weights: Vec<f64> = y.iter().map(|yi| weight * yi).collect();
    matrix.weighted_column_sum(&weights)
}

/// Dual coordinate ascent. Each sweep maximizes every `xi_i` exactly with
/// incremental maintenance of `w` and `||w||^2`, then refreshes `beta` by
/// clamping and recomputes `w = s - beta`; `s` is rebuilt from scratch every
/// tenth sweep to bound floating-point drift. Stops when the largest stored
/// `xi` change in a sweep is below `delta` (or exactly zero, which also
/// covers the width-zero box at `tau = -1`).
pub fn epsvm_solve(
    data: &ProblemData,
    params: &PinballParams,
    config: &EpsvmConfig,
) -> Result<EpsvmResult> {
    let n = data.n();
    let m = data.m();
    if m == 0 {
        return Err(Error::InvalidParameter {
            name: "m",
            message: "need at least one measurement".into(),
        });
    }
    if config.l_max == 0 {
        return Err(Error::InvalidParameter {
            name: "l_max",
            message: "must be at least 1".into(),
        });
    }
    let mu = config.resolve_mu(params, n, m)?;
    let mf = m as f64;
    let delta = config
        .delta
        .unwrap_or_else(|| (1.0 + params.tau) / (10.0 * mf));
    if params.tau > -1.0 && !(delta > 0.0) {
        return Err(Error::InvalidParameter {
            name: "delta",
            message: format!("must be positive for tau > -1 (got {delta})"),
        });
    }

    let matrix = data.matrix();
    let y = data.y().as_slice();
    let col_norms_sq = matrix.column_norms_sq();

    // A bias at or above the median measurement norm forces most xi to the
    // upper bound and the model degenerates to the linear-loss closed form.
    {
        let mut norms: Vec<f64> = col_norms_sq.iter().map(|v| v.sqrt()).collect();
        norms.sort_by(f64::total_cmp);
        let median = norms[m / 2];
        if params.c >= median {
            log::warn!(
                "bias c = {} is >= the median measurement norm {median:.4}; \
                 the solution will match the linear-loss closed form",
                params.c
            );
        }
    }

    let lo0 = -params.tau / mf;
    let hi = 1.0 / mf;
    let mut xi = vec![lo0; m];
    let mut beta = vec![0.0; n];
    let mut w = sign_weighted_sum(matrix, y, lo0); // beta = 0 initially
    let mut wsq = dot(&w, &w);
    let mut sum_xi: f64 = xi.iter().sum();

    let mut ascent_violation = 0.0f64;
    let mut sweeps = 0;
    let mut converged = false;

    for sweep in 1..=config.l_max {
        let mut max_change = 0.0f64;
        for i in 0..m {
            let xi_i = xi[i];
            if xi_i >= hi && params.c * params.c >= col_norms_sq[i] {
                continue; // pinned at the upper bound for good
            }
            let col = matrix.column(i);
            let yi = y[i];
            let udw = dot(col, &w);
            let d = xi_increment(xi_i, yi, col_norms_sq[i], udw, wsq.max(0.0), params, mf);
            if d != 0.0 {
                let wsq_new = wsq + 2.0 * yi * d * udw + d * d * col_norms_sq[i];
                let before = params.c * sum_xi - wsq.max(0.0).sqrt();
                let after = params.c * (sum_xi + d) - wsq_new.max(0.0).sqrt();
                let drop = before - after;
                if drop > ascent_violation {
                    ascent_violation = drop;
                }
                debug_assert!(
                    drop <= 1e-10 * before.abs().max(1.0),
                    "dual objective decreased by {drop} at coordinate {i}"
                );
                axpy(yi * d, col, &mut w);
                wsq = wsq_new;
                sum_xi += d;
                xi[i] = xi_i + d;
                let applied = (xi[i] - xi_i).abs();
                if applied > max_change {
                    max_change = applied;
                }
            }
        }

        // beta step on s = w + beta; periodic exact rebuild of s kills the
        // drift of the incremental w updates
        let s: Vec<f64> = if sweep % 10 == 0 {
            let weights: Vec<f64> = xi.iter().zip(y).map(|(x, yy)| x * yy).collect();
            matrix.weighted_column_sum(&weights)
        } else {
            w.iter().zip(&beta).map(|(wj, bj)| wj + bj).collect()
        };
        let before = params.c * sum_xi - wsq.max(0.0).sqrt();
        for j in 0..n {
            beta[j] = s[j].clamp(-mu, mu);
            w[j] = s[j] - beta[j];
        }
        wsq = dot(&w, &w);
        sum_xi = xi.iter().sum();
        let after = params.c * sum_xi - wsq.sqrt();
        let drop = before - after;
        if drop > ascent_violation {
            ascent_violation = drop;
        }
        debug_assert!(
            drop <= 1e-10 * before.abs().max(1.0),
            "dual objective decreased by {drop} at the beta step"
        );

        sweeps = sweep;
        if max_change == 0.0 || max_change < delta {
            converged = true;
            break;
        }
    }

    // Recover the primal point from an exactly rebuilt aggregate.
    let weights: Vec<f64> = xi.iter().zip(y).map(|(x, yy)| x * yy).collect();
    let s_final = matrix.weighted_column_sum(&weights);
    let w_final: Vec<f64> = s_final.iter().zip(&beta).map(|(sj, bj)| sj - bj).collect();
    finish(
        data, params, mu, xi, w_final, sweeps, converged, ascent_violation,
    )
}

fn finish(
    data: &ProblemData,
    params: &PinballParams,
    mu: f64,
    xi: Vec<f64>,
    w: Vec<f64>,
    sweeps: usize,
    converged: bool,
    ascent_violation: f64,
) -> Result<EpsvmResult> {
    let m = data.m();
    let mf = m as f64;
    let wnorm = norm2(&w);
    let (x, status) = if wnorm > 0.0 {
        (w.iter().map(|v| v / wnorm).collect::<Vec<f64>>(), EpsvmStatus::OnSphere)
    } else {
        let all_at_top = xi.iter().all(|&v| (mf * v - 1.0).abs() <= 1e-9);
        let s_unit = sign_weighted_sum(data.matrix(), data.y().as_slice(), 1.0 / mf);
        let s_inf = s_unit.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        let status = if all_at_top && s_inf <= mu * (1.0 + 1e-12) {
            EpsvmStatus::ZeroOptimal
        } else {
            EpsvmStatus::Degenerate
        };
        (vec![0.0; data.n()], status)
    };

    let sum_xi: f64 = xi.iter().sum();
    let dual_objective = params.c * sum_xi - wnorm;
    let primal_objective = loss::epsvm_primal_objective(&x, data, params, mu)?;
    let kkt_residual = check_optimality(&x, &xi, data, params, mu)?;
    Ok(EpsvmResult {
        x,
        status,
        dual_objective,
        primal_objective,
        kkt_residual,
        sweeps,
        converged,
        xi,
        dual_ascent_violation: ascent_violation,
    })
}

/// Closed form for the linear loss (`tau = -1`): soft-threshold the scaled
/// back-projection `s = (1/m) sum_i y_i u_i` by `mu` and normalize.
///
/// The recovered point does not depend on the bias; the reported objectives
/// and optimality residual are evaluated at `tau = -1, c = 1`.
pub fn passive_closed_form(data: &ProblemData, mu: f64) -> Result<EpsvmResult> {
    let m = data.m();
    if m == 0 {
        return Err(Error::InvalidParameter {
            name: "m",
            message: "need at least one measurement".into(),
        });
    }
    loss::check_mu(mu)?;
    let mf = m as f64;
    let s = sign_weighted_sum(data.matrix(), data.y().as_slice(), 1.0 / mf);
    let beta: Vec<f64> = s.iter().map(|&sj| sj.clamp(-mu, mu)).collect();
    let w: Vec<f64> = s.iter().zip(&beta).map(|(sj, bj)| sj - bj).collect();
    let xi = vec![1.0 / mf; m];
    let params = PinballParams::new(-1.0, 1.0)?;
    finish(data, &params, mu, xi, w, 1, true, 0.0)
}

// Tolerance bands for the optimality check: a margin within R_BAND of zero
// (relative to the data scale) is treated as exactly zero, a scaled xi
// within ACT_BAND of a box edge counts as active, and the sphere constraint
// counts as active within SPHERE_BAND.
const R_BAND_REL: f64 = 1e-7;
const ACT_BAND: f64 = 1e-7;
const SPHERE_BAND: f64 = 1e-9;

/// First-order optimality residual of a primal/dual pair (0 = optimal).
///
/// Measures, over all measurements with margin residue `r_i = c - y_i u_i^T x`:
/// the box violation of `m * xi_i` against `[-tau, 1]`; the sign rules
/// (`r_i > 0` forces the upper bound, `r_i < 0` the lower one, strictly
/// interior `xi_i` forces `r_i = 0`); plus the ball feasibility `||x|| <= 1`
/// and the sphere multiplier sign: `sum_i xi_i y_i u_i^T x - mu ||x||_1`
/// must vanish strictly inside the ball and be nonnegative on the sphere.
pub fn check_optimality(
    x: &[f64],
    xi: &[f64],
    data: &ProblemData,
    params: &PinballParams,
    mu: f64,
) -> Result<f64> {
    loss::check_mu(mu)?;
    let m = data.m();
    let n = data.n();
    if x.len() != n {
        return Err(Error::DimensionMismatch {
            context: "optimality x",
            expected: n,
            got: x.len(),
        });
    }
    if xi.len() != m {
        return Err(Error::DimensionMismatch {
            context: "optimality xi",
            expected: m,
            got: xi.len(),
        });
    }
    let mf = m as f64;
    let matrix = data.matrix();
    let y = data.y().as_slice();

    let max_norm = (0..m)
        .map(|i| norm2(matrix.column(i)))
        .fold(0.0f64, f64::max);
    let r_band = R_BAND_REL * (params.c + max_norm).max(1.0);

    let mut residual = 0.0f64;
    let mut bump = |v: f64| {
        if v > residual {
            residual = v;
        }
    };

    let mut weighted_margin = 0.0;
    for i in 0..m {
        let sx = mf * xi[i];
        bump((sx - 1.0).max(0.0));
        bump((-params.tau - sx).max(0.0));

        let margin = y[i] * dot(matrix.column(i), x);
        let r = params.c - margin;
        weighted_margin += xi[i] * margin;

        if r > r_band {
            bump((1.0 - sx).abs());
        } else if r < -r_band {
            bump((sx + params.tau).abs());
        }
        let interior = (1.0 - sx) > ACT_BAND && (sx + params.tau) > ACT_BAND;
        if interior {
            bump(r.abs());
        }
    }

    let xnorm = norm2(x);
    bump((xnorm - 1.0).max(0.0));
    let l1: f64 = x.iter().map(|v| v.abs()).sum();
    let g = weighted_margin - mu * l1;
    if xnorm >= 1.0 - SPHERE_BAND {
        bump((-g).max(0.0));
    } else {
        bump(g.abs());
    }
    Ok(residual)
}

/// Sufficient separation test between the reachable set
/// `{ sum_i xi_i y_i u_i : xi in the box }` and the cube `||z||_inf <= mu`:
/// true when some coordinate's reachable interval stays strictly outside
/// `[-mu, mu]`. Intervals are computed independently per coordinate, which
/// is exact for each coordinate (the map is linear) but only sufficient
/// jointly.
pub fn hypercube_separation(data: &ProblemData, params: &PinballParams, mu: f64) -> Result<bool> {
    loss::check_mu(mu)?;
    let m = data.m();
    if m == 0 {
        return Err(Error::InvalidParameter {
            name: "m",
            message: "need at least one measurement".into(),
        });
    }
    let mf = m as f64;
    let lo = -params.tau / mf;
    let hi = 1.0 / mf;
    let n = data.n();
    let y = data.y().as_slice();
    let mut min_z = vec![0.0f64; n];
    let mut max_z = vec![0.0f64; n];
    for i in 0..m {
        let col = data.matrix().column(i);
        for j in 0..n {
            let g = y[i] * col[j];
            if g >= 0.0 {
                min_z[j] += lo * g;
                max_z[j] += hi * g;
            } else {
                min_z[j] += hi * g;
                max_z[j] += lo * g;
            }
        }
    }
    Ok(min_z
        .iter()
        .zip(&max_z)
        .any(|(&a, &b)| a > mu || b < -mu))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensing::{
        generate_measurement_system, generate_sparse_signal, quantize, BitMeasurements,
        FlipSpec, NoiseSpec, Seed, SensingMatrix,
    };
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn random_data(n: usize, m: usize, seed: u64) -> ProblemData {
        let s = Seed(seed);
        let signal = generate_sparse_signal(n, (n / 4).max(1), s).unwrap();
        let matrix = generate_measurement_system(n, m, s);
        let clean = quantize(&matrix, signal.dense(), &NoiseSpec::noiseless(), s).unwrap();
        let y = crate::sensing::flip_signs(&clean, &FlipSpec::with_ratio(0.1).unwrap(), s);
        ProblemData::new(matrix, y).unwrap()
    }

    #[test]
    fn mu_coefficient_interpolates_the_node_table() {
        assert_eq!(default_mu_coef(-1.0), 1.0);
        assert_eq!(default_mu_coef(-0.9), 0.9);
        assert_eq!(default_mu_coef(-0.7), 0.8);
        assert_eq!(default_mu_coef(-0.5), 0.7);
        assert_eq!(default_mu_coef(-0.4), 0.6);
        // between nodes: linear
        assert!((default_mu_coef(-0.8) - 0.85).abs() < 1e-12);
        assert!((default_mu_coef(-0.6) - 0.75).abs() < 1e-12);
        assert!((default_mu_coef(-0.95) - 0.95).abs() < 1e-12);
        // clamped outside
        assert_eq!(default_mu_coef(-0.2), 0.6);
        assert_eq!(default_mu_coef(0.0), 0.6);
    }

    #[test]
    fn default_mu_follows_the_rate() {
        let v = default_mu(-0.5, 1000, 500);
        assert!((v - 0.7 * (1000f64.ln() / 500.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn beta_update_is_coordinatewise_clamp() {
        let state = DualState {
            beta: vec![0.0; 3],
            xi: vec![],
            s: vec![0.3, -0.05, -0.4],
            w: vec![0.0; 3],
        };
        assert_eq!(beta_update(&state, 0.2), vec![0.2, -0.05, -0.2]);
    }

    #[test]
    fn xi_step_small_norm_pushes_to_upper_bound() {
        // ||u|| = 0.5 <= c = 1: optimal increment is the full gap to 1/m.
        let u = [0.3, 0.4];
        let w = [0.1, -0.2];
        let params = PinballParams::new(-0.5, 1.0).unwrap();
        let d = xi_step(0.05, &u, 1.0, &w, &params, 10).unwrap();
        assert!((d - 0.05).abs() < 1e-15);
    }

    #[test]
    fn xi_step_zero_w_is_a_fixed_point() {
        let u = [2.0, 0.0];
        let w = [0.0, 0.0];
        let params = PinballParams::new(-0.5, 1.0).unwrap();
        let d = xi_step(0.07, &u, -1.0, &w, &params, 10).unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn xi_step_matches_hand_solved_stationary_point() {
        // f(d) = 0.5 d - sqrt((d + 0.2)^2 + 0.09) peaks at d = sqrt(0.03) - 0.2.
        let u = [1.0, 0.0];
        let w = [0.2, 0.3];
        let params = PinballParams::new(0.0, 0.5).unwrap(); // box [0, 1]
        let d = xi_step(0.5, &u, 1.0, &w, &params, 1).unwrap();
        let expected = 0.03f64.sqrt() - 0.2;
        assert!((d - expected).abs() < 1e-12, "{d} vs {expected}");
    }

    #[test]
    fn xi_step_rejects_out_of_box_values() {
        let u = [1.0];
        let w = [0.0];
        let params = PinballParams::new(-0.5, 0.0).unwrap();
        assert!(xi_step(0.2, &u, 1.0, &w, &params, 10).is_err()); // above 1/m
        assert!(xi_step(0.01, &u, 1.0, &w, &params, 10).is_err()); // below -tau/m
        assert!(xi_step(0.06, &u, 0.5, &w, &params, 10).is_err()); // bad sign
    }

    /// Golden-section maximizer of the exact 1-D dual slice
    /// f(d) = c*d - ||y*u*d + w||_2 over [lo, hi].
    fn golden_section_xi(
        xi_i: f64,
        u: &[f64],
        y: f64,
        w: &[f64],
        params: &PinballParams,
        m: usize,
    ) -> f64 {
        let f = |d: f64| {
            let norm: f64 = u
                .iter()
                .zip(w)
                .map(|(ui, wi)| {
                    let v = y * ui * d + wi;
                    v * v
                })
                .sum::<f64>()
                .sqrt();
            params.c * d - norm
        };
        let mf = m as f64;
        let mut a = -params.tau / mf - xi_i;
        let mut b = 1.0 / mf - xi_i;
        let inv_phi = (5.0f64.sqrt() - 1.0) / 2.0;
        let mut c1 = b - inv_phi * (b - a);
        let mut c2 = a + inv_phi * (b - a);
        for _ in 0..200 {
            if f(c1) >= f(c2) {
                b = c2;
                c2 = c1;
                c1 = b - inv_phi * (b - a);
            } else {
                a = c1;
                c1 = c2;
                c2 = a + inv_phi * (b - a);
            }
        }
        0.5 * (a + b)
    }

    #[test]
    fn xi_step_matches_golden_section_search() {
        let mut rng = StdRng::seed_from_u64(99);
        let mut upper_branch = 0;
        let mut quad_branch = 0;
        for _ in 0..200 {
            let n = rng.gen_range(1..8);
            let m = rng.gen_range(1..20);
            let tau = -rng.gen_range(0.0..=1.0);
            let c = rng.gen_range(0.0..2.0);
            let params = PinballParams::new(tau, c).unwrap();
            // random u, scaled down half the time to exercise both branches
            let scale = if rng.gen::<bool>() { 0.2 } else { 3.0 };
            let u: Vec<f64> = (0..n).map(|_| scale * rng.gen_range(-1.0..1.0)).collect();
            if u.iter().all(|&v| v == 0.0) {
                continue;
            }
            let w: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            let mf = m as f64;
            let xi_i = rng.gen_range(-tau / mf..=1.0 / mf);
            if c * c >= dot(&u, &u) {
                upper_branch += 1;
            } else {
                quad_branch += 1;
            }
            let d = xi_step(xi_i, &u, y, &w, &params, m).unwrap();
            let oracle = golden_section_xi(xi_i, &u, y, &w, &params, m);
            assert!(
                (d - oracle).abs() <= 1e-6,
                "closed form {d} vs golden section {oracle} (tau={tau}, c={c})"
            );
        }
        assert!(upper_branch > 10, "branch coverage: {upper_branch} upper");
        assert!(quad_branch > 10, "branch coverage: {quad_branch} quadratic");
    }

    #[test]
    fn solver_converges_with_monotone_dual_ascent() {
        for seed in 0..5 {
            let data = random_data(30, 60, 500 + seed);
            let params = PinballParams::new(-0.5, 1.0).unwrap();
            let config = EpsvmConfig::default();
            let result = epsvm_solve(&data, &params, &config).unwrap();
            assert!(result.converged, "no convergence at seed {seed}");
            assert_eq!(result.status, EpsvmStatus::OnSphere);
            assert!((norm2(&result.x) - 1.0).abs() < 1e-12);
            assert!(result.dual_ascent_violation <= 1e-10);
            // weak duality on the reported pair
            assert!(result.dual_objective <= result.primal_objective + 1e-10);
            // box feasibility of the final xi
            let mf = data.m() as f64;
            for &v in &result.xi {
                assert!(v >= -params.tau / mf - 1e-15 && v <= 1.0 / mf + 1e-15);
            }
        }
    }

    #[test]
    fn tight_convergence_reaches_small_residual_and_gap() {
        let data = random_data(25, 40, 4242);
        let params = PinballParams::new(-0.6, 1.0).unwrap();
        let config = EpsvmConfig {
            l_max: 20_000,
            delta: Some(1e-14),
            ..EpsvmConfig::default()
        };
        let result = epsvm_solve(&data, &params, &config).unwrap();
        assert!(result.converged);
        assert!(
            result.kkt_residual <= 1e-6,
            "residual {}",
            result.kkt_residual
        );
        let gap = result.primal_objective - result.dual_objective;
        assert!(
            gap.abs() <= 1e-4 * result.primal_objective.abs().max(1.0),
            "duality gap {gap}"
        );
    }

    #[test]
    fn linear_loss_stops_after_one_sweep_and_matches_closed_form() {
        for seed in 0..10 {
            let data = random_data(20, 35, 900 + seed);
            let params = PinballParams::new(-1.0, 1.0).unwrap();
            let mu = default_mu(-1.0, data.n(), data.m());
            let config = EpsvmConfig {
                mu: Some(mu),
                ..EpsvmConfig::default()
            };
            let iterative = epsvm_solve(&data, &params, &config).unwrap();
            let closed = passive_closed_form(&data, mu).unwrap();
            assert_eq!(iterative.sweeps, 1);
            assert!(iterative.converged);
            for (a, b) in iterative.x.iter().zip(&closed.x) {
                assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
            }
            assert_eq!(iterative.status, closed.status);
        }
    }

    #[test]
    fn oversized_bias_reduces_to_the_closed_form_for_any_tau() {
        // c >= every ||u_i||: all xi hit 1/m after one sweep no matter tau.
        let mut rng = StdRng::seed_from_u64(31);
        let n = 8;
        let m = 12;
        let data = {
            let mut cols = Vec::new();
            for _ in 0..m {
                for _ in 0..n {
                    cols.push(0.05 * rng.gen_range(-1.0..1.0));
                }
            }
            let matrix = SensingMatrix::from_columns(n, m, cols).unwrap();
            let signs: Vec<f64> =
                (0..m).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect();
            ProblemData::new(matrix, BitMeasurements::from_vec(signs).unwrap()).unwrap()
        };
        let params = PinballParams::new(-0.3, 1.0).unwrap();
        let mu = 0.001;
        let config = EpsvmConfig {
            mu: Some(mu),
            ..EpsvmConfig::default()
        };
        let result = epsvm_solve(&data, &params, &config).unwrap();
        let closed = passive_closed_form(&data, mu).unwrap();
        let mf = m as f64;
        for &v in &result.xi {
            assert!((v - 1.0 / mf).abs() < 1e-15);
        }
        for (a, b) in result.x.iter().zip(&closed.x) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn large_mu_certifies_the_zero_solution() {
        let data = random_data(15, 25, 77);
        let mf = data.m() as f64;
        let s = sign_weighted_sum(data.matrix(), data.y().as_slice(), 1.0 / mf);
        let s_inf = s.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        let mu = s_inf * 1.5;
        let params = PinballParams::new(-1.0, 1.0).unwrap();
        let config = EpsvmConfig {
            mu: Some(mu),
            ..EpsvmConfig::default()
        };
        let result = epsvm_solve(&data, &params, &config).unwrap();
        assert_eq!(result.status, EpsvmStatus::ZeroOptimal);
        assert!(result.x.iter().all(|&v| v == 0.0));
        assert_eq!(result.kkt_residual, 0.0);
        // and the closed form agrees
        let closed = passive_closed_form(&data, mu).unwrap();
        assert_eq!(closed.status, EpsvmStatus::ZeroOptimal);
    }

    #[test]
    fn optimality_residual_grows_under_perturbation() {
        let data = random_data(20, 30, 11);
        let params = PinballParams::new(-0.5, 1.0).unwrap();
        let config = EpsvmConfig {
            l_max: 20_000,
            delta: Some(1e-14),
            ..EpsvmConfig::default()
        };
        let result = epsvm_solve(&data, &params, &config).unwrap();
        let mu = config.resolve_mu(&params, data.n(), data.m()).unwrap();
        let base = check_optimality(&result.x, &result.xi, &data, &params, mu).unwrap();
        assert!(base <= 1e-6);

        let mut perturbed = result.x.clone();
        perturbed[0] += 1e-2;
        let norm = norm2(&perturbed);
        perturbed.iter_mut().for_each(|v| *v /= norm);
        let worse = check_optimality(&perturbed, &result.xi, &data, &params, mu).unwrap();
        assert!(worse > base, "perturbed residual {worse} <= base {base}");
    }

    /// Exhaustive oracle over the box vertices: per coordinate the reachable
    /// interval of a linear map is spanned by vertex values, so vertex
    /// enumeration reconstructs the same intervals.
    fn separation_by_vertex_enumeration(
        data: &ProblemData,
        params: &PinballParams,
        mu: f64,
    ) -> bool {
        let m = data.m();
        let n = data.n();
        let mf = m as f64;
        let levels = [-params.tau / mf, 1.0 / mf];
        let mut min_z = vec![f64::INFINITY; n];
        let mut max_z = vec![f64::NEG_INFINITY; n];
        for mask in 0u32..(1 << m) {
            let weights: Vec<f64> = (0..m)
                .map(|i| {
                    let level = levels[((mask >> i) & 1) as usize];
                    level * data.y().as_slice()[i]
                })
                .collect();
            let z = data.matrix().weighted_column_sum(&weights);
            for j in 0..n {
                min_z[j] = min_z[j].min(z[j]);
                max_z[j] = max_z[j].max(z[j]);
            }
        }
        (0..n).any(|j| min_z[j] > mu || max_z[j] < -mu)
    }

    #[test]
    fn separation_agrees_with_vertex_enumeration() {
        let mut rng = StdRng::seed_from_u64(3030);
        let mut separated = 0;
        for trial in 0..60 {
            let n = rng.gen_range(1..5);
            let m = rng.gen_range(1..10);
            let matrix = generate_measurement_system(n, m, Seed(7000 + trial));
            let signs: Vec<f64> =
                (0..m).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect();
            let data =
                ProblemData::new(matrix, BitMeasurements::from_vec(signs).unwrap()).unwrap();
            let tau = *[-1.0, -0.5, 0.0].iter().nth(rng.gen_range(0..3)).unwrap();
            let params = PinballParams::new(tau, 1.0).unwrap();
            let mu = rng.gen_range(0.01..1.0);
            let fast = hypercube_separation(&data, &params, mu).unwrap();
            let slow = separation_by_vertex_enumeration(&data, &params, mu);
            assert_eq!(fast, slow, "trial {trial}");
            if fast {
                separated += 1;
            }
        }
        assert!(separated > 0, "no separated instance sampled");
    }

    #[test]
    fn separation_at_linear_loss_reduces_to_a_norm_test() {
        // tau = -1 collapses the box to s = (1/m) sum y_i u_i.
        let data = random_data(10, 12, 55);
        let mf = data.m() as f64;
        let s = sign_weighted_sum(data.matrix(), data.y().as_slice(), 1.0 / mf);
        let s_inf = s.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        let params = PinballParams::new(-1.0, 1.0).unwrap();
        assert!(hypercube_separation(&data, &params, s_inf * 0.999).unwrap());
        assert!(!hypercube_separation(&data, &params, s_inf * 1.001).unwrap());
        // a tiny mu separates whenever s != 0
        assert!(hypercube_separation(&data, &params, 1e-12).unwrap());
    }

    #[test]
    fn config_validation_paths() {
        let data = random_data(6, 8, 1);
        let params = PinballParams::new(-0.5, 1.0).unwrap();
        let bad_mu = EpsvmConfig {
            mu: Some(0.0),
            ..EpsvmConfig::default()
        };
        assert!(epsvm_solve(&data, &params, &bad_mu).is_err());
        let bad_delta = EpsvmConfig {
            delta: Some(0.0),
            ..EpsvmConfig::default()
        };
        assert!(epsvm_solve(&data, &params, &bad_delta).is_err());
        let bad_lmax = EpsvmConfig {
            l_max: 0,
            ..EpsvmConfig::default()
        };
        assert!(epsvm_solve(&data, &params, &bad_lmax).is_err());
        assert!(passive_closed_form(&data, -1.0).is_err());
    }
}
