//! Alternating sign-correction wrapper around the hard-thresholding solver.
//!
//! Sign-flip noise is handled by alternating two steps: advance the iterate
//! on the current working signs, then re-assign the `L` measurements whose
//! pinball loss against the *original* signs is largest as presumed flips
//! and negate exactly those. The signal estimate and the flip hypothesis
//! co-evolve: the inner iteration budget (`inner.l_max`, 500 by default) is
//! sliced evenly across up to `outer_max` detection rounds, each slice
//! continuing from the previous iterate, so one wrapped solve costs the same
//! as one plain solve. The pinball slope parameter is annealed toward the
//! hinge across rounds (`tau = decay^l * tau0`). Detection stays live for
//! the whole budget — freezing the hypothesis early measurably hurts the
//! recovery — and the run is reported as stabilized when the last two
//! rounds agreed on the flip set.

use crate::error::{Error, Result};
use crate::loss::{pinball_value, PinballParams, ProblemData};
use crate::piht::{self, PihtConfig, PihtResult};

#[derive(Debug, Clone, PartialEq)]
pub struct AopConfig {
    /// Number of measurements treated as flipped each round. Zero disables
    /// correction entirely (a single inner solve).
    pub l_flips: usize,
    /// Starting pinball slope, annealed geometrically.
    pub tau0: f64,
    /// Per-round slope decay in (0, 1]; 1 keeps `tau0` fixed.
    pub decay: f64,
    /// Maximum number of detection rounds.
    pub outer_max: usize,
    /// Margin offset shared by every inner solve and the loss ranking.
    pub c: f64,
    /// Inner solver configuration. `l_max` is the *total* iteration budget,
    /// split evenly across detection rounds; `x0` seeds the first slice only
    /// (later slices continue from the previous iterate).
    pub inner: PihtConfig,
}

impl AopConfig {
    pub fn new(l_flips: usize, tau0: f64, c: f64, inner: PihtConfig) -> Result<Self> {
        let config = AopConfig {
            l_flips,
            tau0,
            decay: 0.95,
            outer_max: 20,
            c,
            inner,
        };
        // surface parameter errors early
        PinballParams::new(config.tau0, config.c)?;
        Ok(config)
    }
}

#[derive(Debug, Clone)]
pub struct AopResult {
    /// Final inner solve, run on the last working signs (the remaining-budget
    /// run when the flip set settled early).
    pub inner: PihtResult,
    /// Number of detection rounds performed.
    pub outer_iterations: usize,
    /// Indices negated relative to the original signs, sorted ascending.
    pub flip_set: Vec<usize>,
    /// True when the final two rounds selected the same flip set (or no
    /// correction was requested); false when the hypothesis was still moving
    /// as the budget ran out.
    pub stabilized: bool,
}

/// Indices of the `l` largest losses, ties resolved toward the lower index;
/// returned sorted ascending.
pub(crate) fn select_flips(losses: &[f64], l: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..losses.len()).collect();
    order.sort_unstable_by(|&a, &b| losses[b].total_cmp(&losses[a]).then(a.cmp(&b)));
    let mut picked: Vec<usize> = order.into_iter().take(l).collect();
    picked.sort_unstable();
    picked
}

pub fn aop_solve(data: &ProblemData, config: &AopConfig) -> Result<AopResult> {
    let m = data.m();
    if config.l_flips > m {
        return Err(Error::InvalidParameter {
            name: "l_flips",
            message: format!("cannot exceed the measurement count {m}"),
        });
    }
    if !(config.decay > 0.0 && config.decay <= 1.0) {
        return Err(Error::InvalidParameter {
            name: "decay",
            message: format!("must lie in (0, 1], got {}", config.decay),
        });
    }
    if config.outer_max == 0 {
        return Err(Error::InvalidParameter {
            name: "outer_max",
            message: "must be at least 1".into(),
        });
    }
    PinballParams::new(config.tau0, config.c)?;

    let matrix = data.matrix();
    let original = data.y().as_slice();

    // No correction requested: one uninterrupted solve, bit-identical to the
    // plain solver with the same inner configuration.
    if config.l_flips == 0 {
        let params = PinballParams::new(config.tau0, config.c)?;
        let result = piht::solve_on_signs(matrix, original, &params, &config.inner)?;
        return Ok(AopResult {
            inner: result,
            outer_iterations: 1,
            flip_set: Vec::new(),
            stabilized: true,
        });
    }

    let budget = config.inner.l_max;
    let chunk = budget.div_ceil(config.outer_max);
    let mut remaining = budget;
    let mut working: Vec<f64> = original.to_vec();
    let mut prev_flips: Option<Vec<usize>> = None;
    let mut flip_set: Vec<usize> = Vec::new();
    let mut stabilized = false;
    let mut rounds = 0;
    let mut warm: Option<Vec<f64>> = config.inner.x0.clone();
    let mut inner_result: Option<PihtResult> = None;

    for l_out in 0..config.outer_max {
        if remaining == 0 {
            break;
        }
        let tau = config.decay.powi(l_out as i32) * config.tau0;
        let params = PinballParams::new(tau, config.c)?;
        let slice = PihtConfig {
            l_max: chunk.min(remaining),
            x0: warm.take(),
            ..config.inner.clone()
        };
        remaining -= slice.l_max;
        let result = piht::solve_on_signs(matrix, &working, &params, &slice)?;
        rounds = l_out + 1;

        // rank by pinball loss against the *original* signs
        let losses: Vec<f64> = (0..m)
            .map(|i| {
                let margin = original[i] * crate::sensing::dot(matrix.column(i), &result.x);
                pinball_value(config.c - margin, &params)
            })
            .collect();
        let picked = select_flips(&losses, config.l_flips);
        warm = Some(result.x.clone());

        stabilized = prev_flips.as_deref() == Some(picked.as_slice());
        flip_set = picked.clone();
        inner_result = Some(result);

        // rebuild the working signs relative to the original, not cumulatively
        working.copy_from_slice(original);
        for &i in &picked {
            working[i] = -working[i];
        }
        prev_flips = Some(picked);
    }

    Ok(AopResult {
        inner: inner_result.expect("outer_max >= 1 and a positive budget guarantee a solve"),
        outer_iterations: rounds,
        flip_set,
        stabilized,
    })
}
