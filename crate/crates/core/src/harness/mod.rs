//! Seeded Monte-Carlo experiment runner.
//!
//! An [`ExperimentConfig`] names a problem family (dimension, measurement
//! counts, sparsity, noise, flip ratio), a trial count, and one or more
//! solver specifications. Most scalar fields also accept a list, forming a
//! sweep; at most one field may be swept per run, except the contour mode
//! which sweeps `tau` and the regularization coefficient jointly.
//!
//! Per-trial seeds are derived from the *problem* coordinates and the trial
//! index only — never from solver parameters — so every solver at a given
//! grid point sees the identical problem ensemble (paired comparisons).
//! Trials run independently (optionally on a thread pool); records are
//! sorted by (cell, trial) before aggregation, so parallel and sequential
//! execution produce identical output.

pub mod emit;
pub mod presets;

use std::fmt;
use std::fs;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::de::Deserializer;
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

use crate::aop::{aop_solve, AopConfig};
use crate::epsvm::{default_mu_coef, epsvm_solve, passive_closed_form, EpsvmConfig, EpsvmStatus};
use crate::error::{Error, Result};
use crate::loss::{PinballParams, ProblemData};
use crate::piht::{piht_solve, PihtConfig, PihtStatus};
use crate::sensing::{generate_problem, recovery_error, ProblemMeta, SparseSignal};

/// A scalar-or-list JSON field: `3` and `[3, 4, 5]` both parse.
#[derive(Debug, Clone, PartialEq)]
pub struct OneOrMany<T>(pub Vec<T>);

impl<T> OneOrMany<T> {
    pub fn one(value: T) -> Self {
        OneOrMany(vec![value])
    }

    pub fn many(values: Vec<T>) -> Self {
        OneOrMany(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn is_multi(&self) -> bool {
        self.0.len() > 1
    }
}

impl<'de, T: Deserialize<'de>> Deserialize<'de> for OneOrMany<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr<T> {
            Many(Vec<T>),
            One(T),
        }
        Ok(match Repr::deserialize(d)? {
            Repr::Many(v) => OneOrMany(v),
            Repr::One(v) => OneOrMany(vec![v]),
        })
    }
}

impl<T: Serialize> Serialize for OneOrMany<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.len() == 1 {
            self.0[0].serialize(s)
        } else {
            self.0.serialize(s)
        }
    }
}

/// Signal-to-noise ratio; `"inf"` (any case) means noiseless.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Snr(pub f64);

impl Snr {
    pub const INF: Snr = Snr(f64::INFINITY);
}

impl<'de> Deserialize<'de> for Snr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(Snr(v)),
            Repr::Text(s) if s.eq_ignore_ascii_case("inf") => Ok(Snr(f64::INFINITY)),
            Repr::Text(s) => Err(serde::de::Error::custom(format!(
                "snr must be a number or \"inf\", got {s:?}"
            ))),
        }
    }
}

impl Serialize for Snr {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Biht,
    Piht,
    AopBiht,
    AopPiht,
    Epsvm,
    Passive,
}

impl SolverKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolverKind::Biht => "biht",
            SolverKind::Piht => "piht",
            SolverKind::AopBiht => "aop_biht",
            SolverKind::AopPiht => "aop_piht",
            SolverKind::Epsvm => "epsvm",
            SolverKind::Passive => "passive",
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "biht" => Ok(SolverKind::Biht),
            "piht" => Ok(SolverKind::Piht),
            "aop_biht" | "aop-biht" => Ok(SolverKind::AopBiht),
            "aop_piht" | "aop-piht" => Ok(SolverKind::AopPiht),
            "epsvm" | "ep-svm" => Ok(SolverKind::Epsvm),
            "passive" => Ok(SolverKind::Passive),
            other => Err(Error::InvalidConfig(format!(
                "unknown solver {other:?} (expected biht, piht, aop_biht, aop_piht, epsvm, or passive)"
            ))),
        }
    }
}

/// One solver entry. Unset fields fall back to per-kind defaults:
/// `biht`/`aop_biht` fix `tau = 0, c = 0`; `piht`/`aop_piht` default to
/// `tau = -0.2, c = 1`; `epsvm` to `tau = -0.5, c = 1`; `passive` is
/// `tau = -1` with reporting bias `c = 1`. The sparsity estimate `k_est`
/// defaults to the true sparsity, the flip budget `l_flips` to
/// `round(r_f * m)`, and the regularization to
/// `mu = mu_coef * sqrt(ln n / m)` with the interpolated default
/// coefficient.
#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    pub solver: SolverKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<OneOrMany<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<OneOrMany<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, alias = "C", skip_serializing_if = "Option::is_none")]
    pub mu_coef: Option<OneOrMany<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_est: Option<OneOrMany<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_flips: Option<OneOrMany<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outer_max: Option<usize>,
}

impl SolverSpec {
    pub fn new(solver: SolverKind) -> Self {
        SolverSpec {
            solver,
            label: None,
            tau: None,
            c: None,
            mu: None,
            mu_coef: None,
            k_est: None,
            l_flips: None,
            alpha: None,
            iterations: None,
            delta: None,
            decay: None,
            outer_max: None,
        }
    }
}

fn default_trials() -> usize {
    100
}

fn default_seed() -> u64 {
    7
}

fn default_rf() -> OneOrMany<f64> {
    OneOrMany::one(0.0)
}

fn default_rn() -> OneOrMany<Snr> {
    OneOrMany::one(Snr::INF)
}

fn default_name() -> String {
    String::new()
}

/// A full experiment: problem family x solvers x trials. Deserializes from
/// a JSON document with the same field names; `solver` is accepted as an
/// alias for `solvers` and both scalar and list values work for sweepable
/// fields.
#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub n: usize,
    pub m: OneOrMany<usize>,
    pub k: OneOrMany<usize>,
    #[serde(default = "default_rf")]
    pub r_f: OneOrMany<f64>,
    #[serde(default = "default_rn")]
    pub r_n: OneOrMany<Snr>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_seed")]
    pub base_seed: u64,
    #[serde(alias = "solver")]
    pub solvers: OneOrMany<SolverSpec>,
}

/// The field a sweep runs over; determines the x column of plot data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    M,
    KTrue,
    Snr,
    FlipRatio,
    Tau,
    C,
    MuCoef,
    KEst,
    LFlips,
    None,
}

impl SweepAxis {
    pub fn column_name(&self) -> &'static str {
        match self {
            SweepAxis::M => "m",
            SweepAxis::KTrue => "k_true",
            SweepAxis::Snr => "snr",
            SweepAxis::FlipRatio => "flip_ratio",
            SweepAxis::Tau => "tau",
            SweepAxis::C => "c",
            SweepAxis::MuCoef => "mu_coef",
            SweepAxis::KEst => "k_est",
            SweepAxis::LFlips => "l_flips",
            SweepAxis::None => "m",
        }
    }
}

fn err_config(msg: impl Into<String>) -> Error {
    Error::InvalidConfig(msg.into())
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(err_config("n must be positive"));
        }
        if self.trials == 0 {
            return Err(err_config("trials must be at least 1"));
        }
        for (name, empty) in [
            ("m", self.m.is_empty()),
            ("k", self.k.is_empty()),
            ("r_f", self.r_f.is_empty()),
            ("r_n", self.r_n.is_empty()),
            ("solvers", self.solvers.is_empty()),
        ] {
            if empty {
                return Err(err_config(format!("{name} must be nonempty")));
            }
        }
        for &m in &self.m.0 {
            if m == 0 {
                return Err(err_config("m values must be positive"));
            }
        }
        for &k in &self.k.0 {
            if k == 0 || k > self.n {
                return Err(err_config(format!("k = {k} outside 1..={}", self.n)));
            }
        }
        for &rf in &self.r_f.0 {
            if !(0.0..=1.0).contains(&rf) {
                return Err(err_config(format!("r_f = {rf} outside [0, 1]")));
            }
        }
        for &Snr(rn) in &self.r_n.0 {
            if !(rn > 0.0) {
                return Err(err_config(format!("r_n = {rn} must be positive or inf")));
            }
        }
        let problem_axes = [
            (SweepAxis::M, self.m.is_multi()),
            (SweepAxis::KTrue, self.k.is_multi()),
            (SweepAxis::FlipRatio, self.r_f.is_multi()),
            (SweepAxis::Snr, self.r_n.is_multi()),
        ];
        let problem_axis: Vec<SweepAxis> = problem_axes
            .iter()
            .filter(|(_, multi)| *multi)
            .map(|(a, _)| *a)
            .collect();
        if problem_axis.len() > 1 {
            return Err(err_config("at most one of m, k, r_f, r_n may be a list"));
        }

        let mut solver_axis: Option<SweepAxis> = None;
        let mut contour = false;
        for spec in &self.solvers.0 {
            let axes = spec.validate(self.n)?;
            if axes == [Some(SweepAxis::Tau), Some(SweepAxis::MuCoef)] {
                contour = true;
                continue;
            }
            for axis in axes.into_iter().flatten() {
                match solver_axis {
                    None => solver_axis = Some(axis),
                    Some(prev) if prev == axis => {}
                    Some(prev) => {
                        return Err(err_config(format!(
                            "solver entries sweep different fields ({} vs {})",
                            prev.column_name(),
                            axis.column_name()
                        )));
                    }
                }
            }
        }
        if contour {
            if self.solvers.len() != 1 {
                return Err(err_config(
                    "a tau x mu_coef contour sweep must be the only solver entry",
                ));
            }
            if !problem_axis.is_empty() {
                return Err(err_config(
                    "a contour sweep cannot be combined with a problem-level sweep",
                ));
            }
            return Ok(());
        }
        if solver_axis.is_some() && !problem_axis.is_empty() {
            return Err(err_config(
                "cannot sweep a solver field and a problem field in the same run",
            ));
        }
        Ok(())
    }

    /// The swept axis (after successful validation), plus contour mode.
    pub fn sweep(&self) -> (SweepAxis, bool) {
        if self.m.is_multi() {
            return (SweepAxis::M, false);
        }
        if self.k.is_multi() {
            return (SweepAxis::KTrue, false);
        }
        if self.r_f.is_multi() {
            return (SweepAxis::FlipRatio, false);
        }
        if self.r_n.is_multi() {
            return (SweepAxis::Snr, false);
        }
        let mut contour = false;
        let mut axis = SweepAxis::None;
        for spec in &self.solvers.0 {
            let tau_multi = spec.tau.as_ref().is_some_and(OneOrMany::is_multi);
            let coef_multi = spec.mu_coef.as_ref().is_some_and(OneOrMany::is_multi);
            if tau_multi && coef_multi {
                contour = true;
                axis = SweepAxis::Tau;
            } else if tau_multi {
                axis = SweepAxis::Tau;
            } else if spec.c.as_ref().is_some_and(OneOrMany::is_multi) {
                axis = SweepAxis::C;
            } else if coef_multi {
                axis = SweepAxis::MuCoef;
            } else if spec.k_est.as_ref().is_some_and(OneOrMany::is_multi) {
                axis = SweepAxis::KEst;
            } else if spec.l_flips.as_ref().is_some_and(OneOrMany::is_multi) {
                axis = SweepAxis::LFlips;
            }
        }
        (axis, contour)
    }
}

impl SolverSpec {
    /// Checks ranges and per-kind field applicability; returns the swept
    /// solver fields (at most one, or exactly [tau, mu_coef] for contour).
    fn validate(&self, n: usize) -> Result<[Option<SweepAxis>; 2]> {
        let kind = self.solver;
        let forbid = |field: &str, present: bool| -> Result<()> {
            if present {
                Err(err_config(format!(
                    "{field} does not apply to solver {kind}"
                )))
            } else {
                Ok(())
            }
        };
        match kind {
            SolverKind::Biht | SolverKind::AopBiht => {
                forbid("tau", self.tau.is_some())?;
                forbid("c", self.c.is_some())?;
            }
            SolverKind::Passive => {
                forbid("tau", self.tau.is_some())?;
                forbid("c", self.c.is_some())?;
            }
            _ => {}
        }
        match kind {
            SolverKind::Epsvm | SolverKind::Passive => {
                forbid("k_est", self.k_est.is_some())?;
                forbid("l_flips", self.l_flips.is_some())?;
                forbid("alpha", self.alpha.is_some())?;
                forbid("decay", self.decay.is_some())?;
                forbid("outer_max", self.outer_max.is_some())?;
                if kind == SolverKind::Passive {
                    forbid("iterations", self.iterations.is_some())?;
                    forbid("delta", self.delta.is_some())?;
                }
            }
            SolverKind::Biht | SolverKind::Piht => {
                forbid("mu", self.mu.is_some())?;
                forbid("mu_coef", self.mu_coef.is_some())?;
                forbid("l_flips", self.l_flips.is_some())?;
                forbid("decay", self.decay.is_some())?;
                forbid("outer_max", self.outer_max.is_some())?;
                forbid("delta", self.delta.is_some())?;
            }
            SolverKind::AopBiht | SolverKind::AopPiht => {
                forbid("mu", self.mu.is_some())?;
                forbid("mu_coef", self.mu_coef.is_some())?;
                forbid("delta", self.delta.is_some())?;
            }
        }
        if self.mu.is_some() && self.mu_coef.is_some() {
            return Err(err_config("set mu or mu_coef, not both"));
        }

        if let Some(taus) = &self.tau {
            if taus.is_empty() {
                return Err(err_config("tau list must be nonempty"));
            }
            for &t in &taus.0 {
                PinballParams::new(t, 0.0)?;
            }
        }
        if let Some(cs) = &self.c {
            if cs.is_empty() {
                return Err(err_config("c list must be nonempty"));
            }
            for &c in &cs.0 {
                PinballParams::new(0.0, c)?;
            }
        }
        if let Some(mu) = self.mu {
            if !(mu > 0.0) {
                return Err(err_config(format!("mu = {mu} must be positive")));
            }
        }
        if let Some(coefs) = &self.mu_coef {
            if coefs.is_empty() {
                return Err(err_config("mu_coef list must be nonempty"));
            }
            for &c in &coefs.0 {
                if !(c > 0.0) {
                    return Err(err_config(format!("mu_coef = {c} must be positive")));
                }
            }
        }
        if let Some(ks) = &self.k_est {
            if ks.is_empty() {
                return Err(err_config("k_est list must be nonempty"));
            }
            for &k in &ks.0 {
                if k == 0 || k > n {
                    return Err(err_config(format!("k_est = {k} outside 1..={n}")));
                }
            }
        }
        if let Some(ls) = &self.l_flips {
            if ls.is_empty() {
                return Err(err_config("l_flips list must be nonempty"));
            }
        }
        if let Some(a) = self.alpha {
            if !(a > 0.0) {
                return Err(err_config(format!("alpha = {a} must be positive")));
            }
        }
        if let Some(d) = self.decay {
            if !(d > 0.0 && d <= 1.0) {
                return Err(err_config(format!("decay = {d} outside (0, 1]")));
            }
        }
        if self.iterations == Some(0) {
            return Err(err_config("iterations must be at least 1"));
        }
        if self.outer_max == Some(0) {
            return Err(err_config("outer_max must be at least 1"));
        }
        if let Some(d) = self.delta {
            if !(d > 0.0) {
                return Err(err_config(format!("delta = {d} must be positive")));
            }
        }

        let tau_multi = self.tau.as_ref().is_some_and(OneOrMany::is_multi);
        let coef_multi = self.mu_coef.as_ref().is_some_and(OneOrMany::is_multi);
        if tau_multi && coef_multi {
            if kind != SolverKind::Epsvm {
                return Err(err_config("only epsvm supports a tau x mu_coef contour"));
            }
            return Ok([Some(SweepAxis::Tau), Some(SweepAxis::MuCoef)]);
        }
        let mut axis = None;
        for (a, multi) in [
            (SweepAxis::Tau, tau_multi),
            (SweepAxis::C, self.c.as_ref().is_some_and(OneOrMany::is_multi)),
            (SweepAxis::MuCoef, coef_multi),
            (
                SweepAxis::KEst,
                self.k_est.as_ref().is_some_and(OneOrMany::is_multi),
            ),
            (
                SweepAxis::LFlips,
                self.l_flips.as_ref().is_some_and(OneOrMany::is_multi),
            ),
        ] {
            if multi {
                if axis.is_some() {
                    return Err(err_config(
                        "a solver entry may sweep at most one field (tau x mu_coef contours excepted)",
                    ));
                }
                axis = Some(a);
            }
        }
        Ok([axis, None])
    }
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let config: ExperimentConfig = serde_json::from_str(text)?;
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    parse_config(&fs::read_to_string(path)?)
}

/// Everything that identifies one aggregate cell: the solver curve plus the
/// resolved problem and solver coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct CellCoords {
    /// Index of the solver entry this cell belongs to (one curve per entry).
    pub curve: usize,
    pub solver: SolverKind,
    pub label: String,
    pub n: usize,
    pub m: usize,
    pub k_true: usize,
    pub k_est: Option<usize>,
    pub snr: f64,
    pub flip_ratio: f64,
    pub tau: f64,
    pub c: f64,
    pub mu_coef: Option<f64>,
    pub mu: Option<f64>,
    pub flips_assumed: Option<usize>,
}

#[derive(Debug, Clone)]
struct Cell {
    coords: CellCoords,
    point: usize,
    alpha: Option<f64>,
    iterations: Option<usize>,
    delta: Option<f64>,
    decay: f64,
    outer_max: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct ProblemPoint {
    m: usize,
    k: usize,
    snr: f64,
    rf: f64,
}

/// One solver run on one generated instance. `error` is `None` when the
/// solver returned an error (recorded in `status`; the sweep continues).
#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub coords: CellCoords,
    pub trial: usize,
    pub seed: u64,
    pub error: Option<f64>,
    pub time_ms: f64,
    pub status: String,
}

#[derive(Debug, Clone)]
pub struct AggregateRow {
    pub coords: CellCoords,
    /// Mean recovery error over successful trials (`None` if all failed).
    pub mean_error: Option<f64>,
    /// Population standard deviation (0 for a single trial).
    pub std_error: Option<f64>,
    pub mean_time_ms: f64,
    /// Number of successful trials aggregated.
    pub n_trials: usize,
}

#[derive(Debug, Clone)]
pub struct ExperimentResults {
    pub config: ExperimentConfig,
    pub axis: SweepAxis,
    pub contour: bool,
    pub trials: Vec<TrialRecord>,
    pub aggregates: Vec<AggregateRow>,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `base_seed ^ hash(problem point, trial)`. Solver parameters are
/// deliberately not hashed: all solvers at a point share its ensemble.
fn trial_seed(base: u64, n: usize, point: &ProblemPoint, trial: usize) -> u64 {
    let mut h: u64 = 0x243F_6A88_85A3_08D3;
    for v in [
        n as u64,
        point.m as u64,
        point.k as u64,
        point.snr.to_bits(),
        point.rf.to_bits(),
        trial as u64,
    ] {
        h = splitmix64(h ^ v);
    }
    base ^ h
}

fn expand(config: &ExperimentConfig) -> (Vec<Cell>, Vec<ProblemPoint>) {
    let mut points: Vec<ProblemPoint> = Vec::new();
    let mut cells: Vec<Cell> = Vec::new();

    let mut point_index = |p: ProblemPoint| -> usize {
        match points.iter().position(|q| *q == p) {
            Some(i) => i,
            None => {
                points.push(p);
                points.len() - 1
            }
        }
    };

    for (curve, spec) in config.solvers.0.iter().enumerate() {
        let kind = spec.solver;
        let (default_tau, default_c) = match kind {
            SolverKind::Biht | SolverKind::AopBiht => (0.0, 0.0),
            SolverKind::Piht | SolverKind::AopPiht => (-0.2, 1.0),
            SolverKind::Epsvm => (-0.5, 1.0),
            SolverKind::Passive => (-1.0, 1.0),
        };
        let taus = spec
            .tau
            .clone()
            .unwrap_or_else(|| OneOrMany::one(default_tau));
        let cs = spec.c.clone().unwrap_or_else(|| OneOrMany::one(default_c));
        let coefs: Vec<Option<f64>> = match &spec.mu_coef {
            Some(list) => list.0.iter().map(|&v| Some(v)).collect(),
            None => vec![None],
        };
        let k_ests: Vec<Option<usize>> = match &spec.k_est {
            Some(list) => list.0.iter().map(|&v| Some(v)).collect(),
            None => vec![None],
        };
        let flip_budgets: Vec<Option<usize>> = match &spec.l_flips {
            Some(list) => list.0.iter().map(|&v| Some(v)).collect(),
            None => vec![None],
        };
        let label = spec
            .label
            .clone()
            .unwrap_or_else(|| kind.as_str().to_string());

        for &tau in &taus.0 {
            for &c in &cs.0 {
                for &coef in &coefs {
                    for &k_est in &k_ests {
                        for &budget in &flip_budgets {
                            for &m in &config.m.0 {
                                for &k in &config.k.0 {
                                    for &Snr(snr) in &config.r_n.0 {
                                        for &rf in &config.r_f.0 {
                                            let point = point_index(ProblemPoint {
                                                m,
                                                k,
                                                snr,
                                                rf,
                                            });
                                            let uses_sparsity = matches!(
                                                kind,
                                                SolverKind::Biht
                                                    | SolverKind::Piht
                                                    | SolverKind::AopBiht
                                                    | SolverKind::AopPiht
                                            );
                                            let is_aop = matches!(
                                                kind,
                                                SolverKind::AopBiht | SolverKind::AopPiht
                                            );
                                            let uses_mu = matches!(
                                                kind,
                                                SolverKind::Epsvm | SolverKind::Passive
                                            );
                                            let (mu, mu_coef) = if uses_mu {
                                                match spec.mu {
                                                    Some(mu) => (Some(mu), None),
                                                    None => {
                                                        let cf = coef.unwrap_or_else(|| {
                                                            default_mu_coef(tau)
                                                        });
                                                        let mu = cf
                                                            * ((config.n as f64).ln()
                                                                / m as f64)
                                                                .sqrt();
                                                        (Some(mu), Some(cf))
                                                    }
                                                }
                                            } else {
                                                (None, None)
                                            };
                                            cells.push(Cell {
                                                coords: CellCoords {
                                                    curve,
                                                    solver: kind,
                                                    label: label.clone(),
                                                    n: config.n,
                                                    m,
                                                    k_true: k,
                                                    k_est: if uses_sparsity {
                                                        Some(k_est.unwrap_or(k))
                                                    } else {
                                                        None
                                                    },
                                                    snr,
                                                    flip_ratio: rf,
                                                    tau,
                                                    c,
                                                    mu_coef,
                                                    mu,
                                                    flips_assumed: if is_aop {
                                                        Some(budget.unwrap_or_else(|| {
                                                            (rf * m as f64).round() as usize
                                                        }))
                                                    } else {
                                                        None
                                                    },
                                                },
                                                point,
                                                alpha: spec.alpha,
                                                iterations: spec.iterations,
                                                delta: spec.delta,
                                                decay: spec.decay.unwrap_or(0.95),
                                                outer_max: spec.outer_max.unwrap_or(20),
                                            });
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    (cells, points)
}

fn run_cell(cell: &Cell, data: &ProblemData, signal: &SparseSignal) -> (Option<f64>, f64, String) {
    let coords = &cell.coords;
    let started = Instant::now();
    let outcome: Result<(Vec<f64>, String)> = (|| match coords.solver {
        SolverKind::Biht | SolverKind::Piht => {
            let params = PinballParams::new(coords.tau, coords.c)?;
            let config = PihtConfig {
                k: coords.k_est.expect("k_est resolved at expansion"),
                alpha: cell.alpha,
                l_max: cell.iterations.unwrap_or(500),
                x0: None,
            };
            let result = piht_solve(data, &params, &config)?;
            let status = match result.status {
                PihtStatus::Completed => "ok",
                PihtStatus::Degenerate => "degenerate",
            };
            Ok((result.x, status.to_string()))
        }
        SolverKind::AopBiht | SolverKind::AopPiht => {
            let inner = PihtConfig {
                k: coords.k_est.expect("k_est resolved at expansion"),
                alpha: cell.alpha,
                l_max: cell.iterations.unwrap_or(500),
                x0: None,
            };
            let config = AopConfig {
                l_flips: coords.flips_assumed.expect("budget resolved at expansion"),
                tau0: coords.tau,
                decay: cell.decay,
                outer_max: cell.outer_max,
                c: coords.c,
                inner,
            };
            let result = aop_solve(data, &config)?;
            let status = match (result.inner.status, result.stabilized) {
                (PihtStatus::Degenerate, _) => "degenerate",
                (PihtStatus::Completed, true) => "ok",
                (PihtStatus::Completed, false) => "max_outer",
            };
            Ok((result.inner.x, status.to_string()))
        }
        SolverKind::Epsvm => {
            let params = PinballParams::new(coords.tau, coords.c)?;
            let config = EpsvmConfig {
                mu: coords.mu,
                mu_coef: None,
                l_max: cell.iterations.unwrap_or(100),
                delta: cell.delta,
            };
            let result = epsvm_solve(data, &params, &config)?;
            let status = match (result.status, result.converged) {
                (EpsvmStatus::OnSphere, true) => "ok",
                (EpsvmStatus::OnSphere, false) => "max_sweeps",
                (EpsvmStatus::ZeroOptimal, _) => "zero_optimal",
                (EpsvmStatus::Degenerate, _) => "degenerate",
            };
            Ok((result.x, status.to_string()))
        }
        SolverKind::Passive => {
            let result = passive_closed_form(data, coords.mu.expect("mu resolved"))?;
            let status = match result.status {
                EpsvmStatus::OnSphere => "ok",
                EpsvmStatus::ZeroOptimal => "zero_optimal",
                EpsvmStatus::Degenerate => "degenerate",
            };
            Ok((result.x, status.to_string()))
        }
    })();
    let time_ms = started.elapsed().as_secs_f64() * 1e3;
    match outcome {
        Ok((x, status)) => {
            let error = recovery_error(&x, signal).expect("dimensions fixed by construction");
            (Some(error), time_ms, status)
        }
        Err(e) => (None, time_ms, format!("error: {e}").replace(',', ";")),
    }
}

fn run_item(
    config: &ExperimentConfig,
    cells: &[Cell],
    cell_indices: &[usize],
    point: &ProblemPoint,
    trial: usize,
) -> Vec<(usize, TrialRecord)> {
    let seed = trial_seed(config.base_seed, config.n, point, trial);
    let meta = ProblemMeta {
        n: config.n,
        m: point.m,
        k: point.k,
        snr: point.snr,
        flip_ratio: point.rf,
        seed,
    };
    let instance = generate_problem(meta).and_then(|p| {
        let data = ProblemData::new(p.matrix, p.y)?;
        Ok((data, p.signal))
    });
    match instance {
        Ok((data, signal)) => cell_indices
            .iter()
            .map(|&ci| {
                let (error, time_ms, status) = run_cell(&cells[ci], &data, &signal);
                (
                    ci,
                    TrialRecord {
                        coords: cells[ci].coords.clone(),
                        trial,
                        seed,
                        error,
                        time_ms,
                        status,
                    },
                )
            })
            .collect(),
        Err(e) => cell_indices
            .iter()
            .map(|&ci| {
                (
                    ci,
                    TrialRecord {
                        coords: cells[ci].coords.clone(),
                        trial,
                        seed,
                        error: None,
                        time_ms: 0.0,
                        status: format!("error: {e}").replace(',', ";"),
                    },
                )
            })
            .collect(),
    }
}

fn run_with(config: &ExperimentConfig, parallel: bool) -> Result<ExperimentResults> {
    config.validate()?;
    let (cells, points) = expand(config);
    let mut cells_by_point: Vec<Vec<usize>> = vec![Vec::new(); points.len()];
    for (i, cell) in cells.iter().enumerate() {
        cells_by_point[cell.point].push(i);
    }
    let work: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|p| (0..config.trials).map(move |t| (p, t)))
        .collect();

    let item = |&(p, t): &(usize, usize)| run_item(config, &cells, &cells_by_point[p], &points[p], t);
    let nested: Vec<Vec<(usize, TrialRecord)>> = if parallel {
        work.par_iter().map(item).collect()
    } else {
        work.iter().map(item).collect()
    };

    let mut tagged: Vec<(usize, TrialRecord)> = nested.into_iter().flatten().collect();
    tagged.sort_by_key(|(ci, rec)| (*ci, rec.trial));
    let trials: Vec<TrialRecord> = tagged.into_iter().map(|(_, rec)| rec).collect();

    let aggregates = aggregate(&cells, &trials, config.trials);
    let (axis, contour) = config.sweep();
    Ok(ExperimentResults {
        config: config.clone(),
        axis,
        contour,
        trials,
        aggregates,
    })
}

fn aggregate(cells: &[Cell], trials: &[TrialRecord], per_cell: usize) -> Vec<AggregateRow> {
    let mut rows = Vec::with_capacity(cells.len());
    for (ci, cell) in cells.iter().enumerate() {
        let slice = &trials[ci * per_cell..(ci + 1) * per_cell];
        let oks: Vec<&TrialRecord> = slice.iter().filter(|r| r.error.is_some()).collect();
        let n_trials = oks.len();
        let (mean_error, std_error, mean_time_ms) = if n_trials == 0 {
            (None, None, 0.0)
        } else {
            let cnt = n_trials as f64;
            let mean = oks.iter().map(|r| r.error.unwrap()).sum::<f64>() / cnt;
            let var = oks
                .iter()
                .map(|r| {
                    let d = r.error.unwrap() - mean;
                    d * d
                })
                .sum::<f64>()
                / cnt;
            let time = oks.iter().map(|r| r.time_ms).sum::<f64>() / cnt;
            (Some(mean), Some(var.sqrt()), time)
        };
        rows.push(AggregateRow {
            coords: cell.coords.clone(),
            mean_error,
            std_error,
            mean_time_ms,
            n_trials,
        });
    }
    rows
}

/// Runs every (grid point, trial) on the rayon pool. Output is identical to
/// [`run_experiment_sequential`]: records are sorted before aggregation.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResults> {
    run_with(config, true)
}

/// Single-threaded variant of [`run_experiment`].
pub fn run_experiment_sequential(config: &ExperimentConfig) -> Result<ExperimentResults> {
    run_with(config, false)
}
