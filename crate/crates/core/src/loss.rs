//! Pinball loss and the objectives built from it.
//!
//! The scalar loss with slope parameter `tau` in [-1, 0] is
//!
//! ```text
//! L_tau(t) = t        if t >= 0
//!          = -tau * t if t < 0
//! ```
//!
//! `tau = 0` gives the one-sided (hinge) loss, `tau = -1` the linear loss.
//! Margins enter through `t = c - y_i * (u_i^T x)` with bias `c >= 0`; the
//! boundary `t = 0` always belongs to the first branch.

use crate::epsvm::DualState;
use crate::error::{Error, Result};
use crate::sensing::{dot, BitMeasurements, SensingMatrix};

/// Loss shape: slope `tau` in [-1, 0] and margin bias `c >= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PinballParams {
    pub tau: f64,
    pub c: f64,
}

impl PinballParams {
    pub fn new(tau: f64, c: f64) -> Result<Self> {
        if !(-1.0..=0.0).contains(&tau) {
            return Err(Error::InvalidParameter {
                name: "tau",
                message: format!("must lie in [-1, 0] (got {tau})"),
            });
        }
        if !(c >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "c",
                message: format!("must be nonnegative (got {c})"),
            });
        }
        Ok(PinballParams { tau, c })
    }
}

/// A measurement system together with its observed signs.
#[derive(Debug, Clone)]
pub struct ProblemData {
    matrix: SensingMatrix,
    y: BitMeasurements,
}

impl ProblemData {
    /// Pairs a matrix with signs; rejects length mismatches and all-zero
    /// columns (a zero measurement vector carries no sign information and
    /// breaks the dual coordinate step).
    pub fn new(matrix: SensingMatrix, y: BitMeasurements) -> Result<Self> {
        if y.len() != matrix.m() {
            return Err(Error::DimensionMismatch {
                context: "measurements",
                expected: matrix.m(),
                got: y.len(),
            });
        }
        for i in 0..matrix.m() {
            if matrix.column(i).iter().all(|&v| v == 0.0) {
                return Err(Error::ZeroColumn { index: i });
            }
        }
        Ok(ProblemData { matrix, y })
    }

    pub fn matrix(&self) -> &SensingMatrix {
        &self.matrix
    }

    pub fn y(&self) -> &BitMeasurements {
        &self.y
    }

    pub fn n(&self) -> usize {
        self.matrix.n()
    }

    pub fn m(&self) -> usize {
        self.matrix.m()
    }
}

/// Scalar pinball loss.
#[inline]
pub fn pinball_value(t: f64, params: &PinballParams) -> f64 {
    if t >= 0.0 {
        t
    } else {
        -params.tau * t
    }
}

/// `(1/m) * sum_i L_tau(c - y_i * (u_i^T x))`.
pub fn piht_objective(x: &[f64], data: &ProblemData, params: &PinballParams) -> Result<f64> {
    check_x(x, data)?;
    let m = data.m();
    let mut total = 0.0;
    for i in 0..m {
        let margin = data.y.as_slice()[i] * dot(data.matrix.column(i), x);
        total += pinball_value(params.c - margin, params);
    }
    Ok(total / m as f64)
}

/// Subgradient direction `U g` with `g_i = -y_i` when `y_i (u_i^T x) <= c`
/// and `g_i = tau * y_i` otherwise. The `1/m` scaling of the objective is
/// left to the caller (the iterative solver folds it into its step size).
pub fn piht_subgradient(x: &[f64], data: &ProblemData, params: &PinballParams) -> Result<Vec<f64>> {
    check_x(x, data)?;
    let y = data.y.as_slice();
    let mut acc = vec![0.0; data.n()];
    for i in 0..data.m() {
        let col = data.matrix.column(i);
        let margin = y[i] * dot(col, x);
        let g = if margin <= params.c { -y[i] } else { params.tau * y[i] };
        crate::sensing::axpy(g, col, &mut acc);
    }
    Ok(acc)
}

/// `mu * ||x||_1 + (1/m) * sum_i L_tau(c - y_i * (u_i^T x))`.
pub fn epsvm_primal_objective(
    x: &[f64],
    data: &ProblemData,
    params: &PinballParams,
    mu: f64,
) -> Result<f64> {
    check_mu(mu)?;
    let l1: f64 = x.iter().map(|v| v.abs()).sum();
    Ok(mu * l1 + piht_objective(x, data, params)?)
}

/// Dual objective `c * sum_i xi_i - || sum_i xi_i y_i u_i - beta ||_2`,
/// evaluated from scratch (the state's cached vectors are not trusted).
///
/// Errors if the state is infeasible: `xi` outside `[-tau/m, 1/m]` or
/// `||beta||_inf > mu` (beyond a 1e-12 slack for clamping round-off).
pub fn epsvm_dual_objective(
    state: &DualState,
    data: &ProblemData,
    params: &PinballParams,
    mu: f64,
) -> Result<f64> {
    check_mu(mu)?;
    let m = data.m();
    if state.xi.len() != m {
        return Err(Error::DimensionMismatch {
            context: "dual xi",
            expected: m,
            got: state.xi.len(),
        });
    }
    if state.beta.len() != data.n() {
        return Err(Error::DimensionMismatch {
            context: "dual beta",
            expected: data.n(),
            got: state.beta.len(),
        });
    }
    let lo = -params.tau / m as f64;
    let hi = 1.0 / m as f64;
    let slack = 1e-12;
    for (i, &xi) in state.xi.iter().enumerate() {
        if xi < lo - slack || xi > hi + slack {
            return Err(Error::InfeasibleDualState(format!(
                "xi[{i}] = {xi} outside [{lo}, {hi}]"
            )));
        }
    }
    let beta_max = state.beta.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    if beta_max > mu * (1.0 + slack) + slack {
        return Err(Error::InfeasibleDualState(format!(
            "||beta||_inf = {beta_max} exceeds mu = {mu}"
        )));
    }

    let y = data.y.as_slice();
    let weights: Vec<f64> = state.xi.iter().zip(y).map(|(xi, yi)| xi * yi).collect();
    let s = data.matrix.weighted_column_sum(&weights);
    let norm: f64 = s
        .iter()
        .zip(&state.beta)
        .map(|(sj, bj)| (sj - bj) * (sj - bj))
        .sum::<f64>()
        .sqrt();
    let sum_xi: f64 = state.xi.iter().sum();
    Ok(params.c * sum_xi - norm)
}

fn check_x(x: &[f64], data: &ProblemData) -> Result<()> {
    if x.len() != data.n() {
        return Err(Error::DimensionMismatch {
            context: "signal estimate",
            expected: data.n(),
            got: x.len(),
        });
    }
    Ok(())
}

pub(crate) fn check_mu(mu: f64) -> Result<()> {
    if !(mu > 0.0) {
        return Err(Error::InvalidParameter {
            name: "mu",
            message: format!("must be positive (got {mu})"),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    /// Independent scalar oracle: evaluate the loss from its two defining
    /// branches without sharing code with the implementation.
    fn pinball_oracle(t: f64, tau: f64) -> f64 {
        if t < 0.0 {
            return -tau * t;
        }
        t
    }

    fn params(tau: f64, c: f64) -> PinballParams {
        PinballParams::new(tau, c).unwrap()
    }

    fn tiny_data() -> ProblemData {
        // u1 = (1, 0), u2 = (0, 1), y = (1, -1)
        let u = SensingMatrix::from_columns(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let y = BitMeasurements::from_vec(vec![1.0, -1.0]).unwrap();
        ProblemData::new(u, y).unwrap()
    }

    #[test]
    fn hinge_and_linear_endpoints() {
        let hinge = params(0.0, 0.0);
        assert_eq!(pinball_value(2.0, &hinge), 2.0);
        assert_eq!(pinball_value(-2.0, &hinge), 0.0);
        let linear = params(-1.0, 0.0);
        assert_eq!(pinball_value(2.0, &linear), 2.0);
        assert_eq!(pinball_value(-2.0, &linear), -2.0);
        // boundary belongs to the first branch
        assert_eq!(pinball_value(0.0, &params(-0.5, 0.0)), 0.0);
    }

    #[test]
    fn params_validate_ranges() {
        assert!(PinballParams::new(-1.5, 0.0).is_err());
        assert!(PinballParams::new(0.1, 0.0).is_err());
        assert!(PinballParams::new(-0.5, -0.1).is_err());
        assert!(PinballParams::new(-1.0, 0.0).is_ok());
        assert!(PinballParams::new(0.0, 2.0).is_ok());
    }

    proptest! {
        #[test]
        fn matches_oracle_and_is_convex(
            tau in -1.0f64..=0.0,
            a in -50.0f64..50.0,
            b in -50.0f64..50.0,
            lambda in 0.0f64..=1.0,
        ) {
            let p = params(tau, 0.0);
            prop_assert_eq!(pinball_value(a, &p), pinball_oracle(a, tau));
            // convexity along the segment [a, b]
            let mid = lambda * a + (1.0 - lambda) * b;
            let lhs = pinball_value(mid, &p);
            let rhs = lambda * pinball_value(a, &p) + (1.0 - lambda) * pinball_value(b, &p);
            prop_assert!(lhs <= rhs + 1e-12);
        }

        #[test]
        fn sandwiched_between_identity_and_hinge(
            tau in -1.0f64..=0.0,
            t in -100.0f64..100.0,
        ) {
            // L_0 is the hinge, L_{-1} the identity, and the family is
            // monotone in tau between them: t <= L_tau(t) <= max(t, 0).
            let v = pinball_value(t, &params(tau, 0.0));
            prop_assert!(v >= t);
            prop_assert!(v <= t.max(0.0));
            let hinge = pinball_value(t, &params(0.0, 0.0));
            let ident = pinball_value(t, &params(-1.0, 0.0));
            prop_assert_eq!(hinge, t.max(0.0));
            prop_assert_eq!(ident, t);
            prop_assert!(ident <= v && v <= hinge);
        }
    }

    #[test]
    fn objective_worked_example() {
        // Margins 1 and -1 give losses L(0) and L(2): value 1.
        let data = tiny_data();
        let p = params(-0.5, 1.0);
        let v = piht_objective(&[1.0, 1.0], &data, &p).unwrap();
        let expected = 0.5 * (pinball_oracle(0.0, -0.5) + pinball_oracle(2.0, -0.5));
        assert_eq!(expected, 1.0);
        assert!((v - expected).abs() < 1e-15);

        // With x = (1, 0) the second margin is 0: losses L(0), L(1).
        let v2 = piht_objective(&[1.0, 0.0], &data, &p).unwrap();
        let expected2 = 0.5 * (pinball_oracle(0.0, -0.5) + pinball_oracle(1.0, -0.5));
        assert_eq!(expected2, 0.5);
        assert!((v2 - expected2).abs() < 1e-15);
    }

    #[test]
    fn subgradient_branch_assignment_on_boundary() {
        // margin == c must take the first branch: g_i = -y_i.
        let data = tiny_data();
        let p = params(-0.5, 1.0);
        // x = (1, 0): margin_1 = 1 = c (boundary), margin_2 = 0 < c.
        let g = piht_subgradient(&[1.0, 0.0], &data, &p).unwrap();
        // contribution 1: -y1*u1 = -(1,0); contribution 2: -y2*u2 = (0,1)
        assert_eq!(g, vec![-1.0, 1.0]);
    }

    #[test]
    fn subgradient_satisfies_convexity_inequality() {
        let mut rng = StdRng::seed_from_u64(42);
        let n = 12;
        let m = 30;
        let seed = crate::sensing::Seed(8);
        let u = crate::sensing::generate_measurement_system(n, m, seed);
        let signs: Vec<f64> = (0..m).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect();
        let data = ProblemData::new(u, BitMeasurements::from_vec(signs).unwrap()).unwrap();
        let p = params(-0.3, 0.7);
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f0 = piht_objective(&x, &data, &p).unwrap();
        let g = piht_subgradient(&x, &data, &p).unwrap();
        let h = 1e-6;
        for _ in 0..200 {
            let d: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let xh: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + h * di).collect();
            let fh = piht_objective(&xh, &data, &p).unwrap();
            let slope = crate::sensing::dot(&g, &d) / m as f64;
            assert!(
                fh >= f0 + h * slope - 1e-8,
                "convexity inequality violated: {fh} < {}",
                f0 + h * slope
            );
        }
    }

    #[test]
    fn primal_objective_worked_example() {
        // Single measurement u = (2), y = 1, x = 0.5, c = 1, tau = -1:
        // margin hits the bias exactly, so only the l1 term remains.
        let u = SensingMatrix::from_columns(1, 1, vec![2.0]).unwrap();
        let data = ProblemData::new(u, BitMeasurements::from_vec(vec![1.0]).unwrap()).unwrap();
        let v = epsvm_primal_objective(&[0.5], &data, &params(-1.0, 1.0), 0.1).unwrap();
        assert!((v - 0.05).abs() < 1e-15);
    }

    #[test]
    fn dual_objective_at_linear_loss_baseline() {
        // tau = -1 pins xi_i = 1/m; with beta = 0 the dual is
        // c - ||(1/m) sum y_i u_i||_2.
        let data = tiny_data();
        let m = data.m() as f64;
        let state = DualState {
            beta: vec![0.0; data.n()],
            xi: vec![1.0 / m; data.m()],
            s: vec![0.0; data.n()],
            w: vec![0.0; data.n()],
        };
        let p = params(-1.0, 1.0);
        let v = epsvm_dual_objective(&state, &data, &p, 0.3).unwrap();
        // s = (u1 - u2)/2 = (0.5, -0.5), norm = sqrt(0.5)
        let expected = 1.0 - (0.5f64).sqrt();
        assert!((v - expected).abs() < 1e-15);
    }

    #[test]
    fn dual_objective_rejects_infeasible_states() {
        let data = tiny_data();
        let m = data.m() as f64;
        let p = params(-0.5, 1.0);
        let bad_xi = DualState {
            beta: vec![0.0; 2],
            xi: vec![2.0 / m, 0.6 / m],
            s: vec![0.0; 2],
            w: vec![0.0; 2],
        };
        assert!(epsvm_dual_objective(&bad_xi, &data, &p, 0.3).is_err());
        let bad_beta = DualState {
            beta: vec![0.4, 0.0],
            xi: vec![0.6 / m, 0.6 / m],
            s: vec![0.0; 2],
            w: vec![0.0; 2],
        };
        assert!(epsvm_dual_objective(&bad_beta, &data, &p, 0.3).is_err());
    }

    #[test]
    fn weak_duality_on_random_feasible_pairs() {
        let mut rng = StdRng::seed_from_u64(7);
        for trial in 0..50 {
            let n = rng.gen_range(2..10);
            let m = rng.gen_range(2..12);
            let seed = crate::sensing::Seed(1000 + trial);
            let u = crate::sensing::generate_measurement_system(n, m, seed);
            let signs: Vec<f64> =
                (0..m).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect();
            let data = ProblemData::new(u, BitMeasurements::from_vec(signs).unwrap()).unwrap();
            let tau = -rng.gen_range(0.0..=1.0);
            let p = params(tau, rng.gen_range(0.0..2.0));
            let mu = rng.gen_range(0.01..1.0);

            // random primal point inside the unit ball
            let mut x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let norm = crate::sensing::norm2(&x);
            let scale = rng.gen_range(0.0..1.0) / norm.max(1e-9);
            x.iter_mut().for_each(|v| *v *= scale);

            // random dual-feasible state
            let lo = -tau / m as f64;
            let hi = 1.0 / m as f64;
            let xi: Vec<f64> = (0..m).map(|_| rng.gen_range(lo..=hi)).collect();
            let beta: Vec<f64> = (0..n).map(|_| rng.gen_range(-mu..=mu)).collect();
            let state = DualState {
                beta,
                xi,
                s: vec![0.0; n],
                w: vec![0.0; n],
            };

            let primal = epsvm_primal_objective(&x, &data, &p, mu).unwrap();
            let dual = epsvm_dual_objective(&state, &data, &p, mu).unwrap();
            assert!(
                dual <= primal + 1e-10,
                "weak duality violated: dual {dual} > primal {primal}"
            );
        }
    }

    #[test]
    fn problem_data_rejects_zero_columns_and_bad_lengths() {
        let u = SensingMatrix::from_columns(2, 2, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let y = BitMeasurements::from_vec(vec![1.0, -1.0]).unwrap();
        assert!(matches!(
            ProblemData::new(u, y),
            Err(Error::ZeroColumn { index: 1 })
        ));
        let u = SensingMatrix::from_columns(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let y = BitMeasurements::from_vec(vec![1.0]).unwrap();
        assert!(ProblemData::new(u, y).is_err());
    }
}
