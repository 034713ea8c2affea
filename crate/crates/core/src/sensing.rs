//! Synthetic one-bit measurement generation.
//!
//! The model: a unit-norm `K`-sparse signal `x` is observed through `m`
//! standard-Gaussian measurement vectors `u_i` as `y_i = sgn(u_i^T x + e_i)`,
//! where `e_i` is optional Gaussian noise injected before quantization, and a
//! fixed fraction of the resulting signs is then flipped. `sgn(0) = +1`.
//!
//! Randomness is a ChaCha8 generator seeded from a single `u64`. Each
//! artifact draws from its own child stream of that generator (signal values
//! and support, matrix entries, pre-quantization noise, flip positions), so
//! e.g. regenerating the same problem with a different flip ratio reuses the
//! identical signal, matrix, and noise draws.

use std::io::{BufRead, Write};

use rand::distributions::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Base seed for one generated problem; child streams are derived per artifact.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Seed(pub u64);

// Child stream ids. Stream 0 is left unused so nothing collides with a
// generator created without `set_stream`.
const STREAM_SIGNAL: u64 = 1;
const STREAM_MATRIX: u64 = 2;
const STREAM_NOISE: u64 = 3;
const STREAM_FLIPS: u64 = 4;

impl Seed {
    fn stream(self, id: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.0);
        rng.set_stream(id);
        rng
    }
}

/// Unit-norm signal with an explicit support set.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSignal {
    values: Vec<f64>,
    support: Vec<usize>,
}

impl SparseSignal {
    /// Builds from a dense vector; the support is its nonzero set.
    /// The vector must have unit Euclidean norm (within 1e-12).
    pub fn from_dense(values: Vec<f64>) -> Result<Self> {
        let norm = norm2(&values);
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter {
                name: "signal",
                message: format!("norm is {norm}, expected 1"),
            });
        }
        let support = values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(j, _)| j)
            .collect();
        Ok(SparseSignal { values, support })
    }

    pub fn dense(&self) -> &[f64] {
        &self.values
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }
}

/// Dense n x m sensing matrix stored column-major; column `i` is the
/// measurement vector `u_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingMatrix {
    n: usize,
    m: usize,
    data: Vec<f64>, // length n*m, column i at data[i*n .. (i+1)*n]
}

impl SensingMatrix {
    pub fn from_columns(n: usize, m: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * m {
            return Err(Error::DimensionMismatch {
                context: "sensing matrix data",
                expected: n * m,
                got: data.len(),
            });
        }
        Ok(SensingMatrix { n, m, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn column(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    /// `u_i^T x` for every column, in column order.
    pub fn column_dots(&self, x: &[f64]) -> Vec<f64> {
        (0..self.m).map(|i| dot(self.column(i), x)).collect()
    }

    /// `sum_i weights[i] * u_i`.
    pub fn weighted_column_sum(&self, weights: &[f64]) -> Vec<f64> {
        let mut acc = vec![0.0; self.n];
        for (i, &w) in weights.iter().enumerate() {
            if w != 0.0 {
                axpy(w, self.column(i), &mut acc);
            }
        }
        acc
    }

    pub fn column_norms_sq(&self) -> Vec<f64> {
        (0..self.m).map(|i| dot(self.column(i), self.column(i))).collect()
    }
}

/// One-bit measurements; every entry is exactly +1.0 or -1.0.
#[derive(Debug, Clone, PartialEq)]
pub struct BitMeasurements {
    signs: Vec<f64>,
}

impl BitMeasurements {
    pub fn from_vec(signs: Vec<f64>) -> Result<Self> {
        for (i, &v) in signs.iter().enumerate() {
            if v != 1.0 && v != -1.0 {
                return Err(Error::InvalidSign { index: i, value: v });
            }
        }
        Ok(BitMeasurements { signs })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.signs
    }

    pub fn len(&self) -> usize {
        self.signs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signs.is_empty()
    }
}

/// Pre-quantization noise level given as a linear signal-to-noise ratio.
/// `snr = +inf` means noiseless.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    snr: f64,
}

impl NoiseSpec {
    pub fn noiseless() -> Self {
        NoiseSpec { snr: f64::INFINITY }
    }

    pub fn with_snr(snr: f64) -> Result<Self> {
        if !(snr > 0.0) {
            return Err(Error::InvalidParameter {
                name: "snr",
                message: format!("must be positive (got {snr})"),
            });
        }
        Ok(NoiseSpec { snr })
    }

    pub fn snr(&self) -> f64 {
        self.snr
    }

    pub fn is_noiseless(&self) -> bool {
        self.snr.is_infinite()
    }
}

/// Fraction of signs to flip after quantization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlipSpec {
    ratio: f64,
}

impl FlipSpec {
    pub fn with_ratio(ratio: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&ratio) {
            return Err(Error::InvalidParameter {
                name: "flip_ratio",
                message: format!("must lie in [0, 1] (got {ratio})"),
            });
        }
        Ok(FlipSpec { ratio })
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    /// Number of positions to flip among `m`: round-half-up of `ratio * m`.
    pub fn count(&self, m: usize) -> usize {
        (self.ratio * m as f64).round() as usize
    }
}

/// Draws a unit-norm `k`-sparse signal: the support is chosen uniformly
/// without replacement, values on it are standard normal, then the vector is
/// normalized. Support indices are sorted and values drawn in that order.
pub fn generate_sparse_signal(n: usize, k: usize, seed: Seed) -> Result<SparseSignal> {
    if k == 0 || k > n {
        return Err(Error::InvalidParameter {
            name: "k",
            message: format!("must satisfy 1 <= k <= n = {n} (got {k})"),
        });
    }
    let mut rng = seed.stream(STREAM_SIGNAL);
    let mut support = rand::seq::index::sample(&mut rng, n, k).into_vec();
    support.sort_unstable();
    let mut values = vec![0.0; n];
    loop {
        for &j in &support {
            values[j] = StandardNormal.sample(&mut rng);
        }
        let norm = norm2(&values);
        if norm > 0.0 {
            for &j in &support {
                values[j] /= norm;
            }
            break;
        }
        // All-zero draw has probability zero; redraw rather than divide by 0.
    }
    Ok(SparseSignal { values, support })
}

/// Draws an n x m matrix of iid standard normal entries, filled column by
/// column.
pub fn generate_measurement_system(n: usize, m: usize, seed: Seed) -> SensingMatrix {
    let mut rng = seed.stream(STREAM_MATRIX);
    let data: Vec<f64> = (0..n * m).map(|_| StandardNormal.sample(&mut rng)).collect();
    SensingMatrix { n, m, data }
}

/// Quantizes analog measurements to signs, optionally adding Gaussian noise
/// first. The noise variance is `mean((u_i^T x)^2) / snr`, i.e. the SNR is
/// measured against the empirical signal power of this instance.
pub fn quantize(
    matrix: &SensingMatrix,
    x: &[f64],
    noise: &NoiseSpec,
    seed: Seed,
) -> Result<BitMeasurements> {
    if x.len() != matrix.n {
        return Err(Error::DimensionMismatch {
            context: "quantize signal",
            expected: matrix.n,
            got: x.len(),
        });
    }
    let mut analog = matrix.column_dots(x);
    if !noise.is_noiseless() && matrix.m > 0 {
        let power = analog.iter().map(|a| a * a).sum::<f64>() / matrix.m as f64;
        let sigma = (power / noise.snr).sqrt();
        let mut rng = seed.stream(STREAM_NOISE);
        for a in &mut analog {
            let e: f64 = StandardNormal.sample(&mut rng);
            *a += sigma * e;
        }
    }
    let signs = analog
        .iter()
        .map(|&a| if a >= 0.0 { 1.0 } else { -1.0 }) // sgn(0) = +1
        .collect();
    Ok(BitMeasurements { signs })
}

/// Flips exactly `round(ratio * m)` signs, chosen uniformly without
/// replacement.
pub fn flip_signs(y: &BitMeasurements, flips: &FlipSpec, seed: Seed) -> BitMeasurements {
    let m = y.len();
    let count = flips.count(m);
    let mut signs = y.signs.clone();
    if count > 0 {
        let mut rng = seed.stream(STREAM_FLIPS);
        for i in rand::seq::index::sample(&mut rng, m, count) {
            signs[i] = -signs[i];
        }
    }
    BitMeasurements { signs }
}

/// Euclidean distance between a recovered vector and the true signal.
pub fn recovery_error(xhat: &[f64], xbar: &SparseSignal) -> Result<f64> {
    if xhat.len() != xbar.n() {
        return Err(Error::DimensionMismatch {
            context: "recovery error",
            expected: xbar.n(),
            got: xhat.len(),
        });
    }
    let d = xhat
        .iter()
        .zip(xbar.dense())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>();
    Ok(d.sqrt())
}

/// Everything needed to generate one problem instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemMeta {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub snr: f64,
    pub flip_ratio: f64,
    pub seed: u64,
}

/// A generated instance: ground truth plus the observed system.
#[derive(Debug, Clone)]
pub struct GeneratedProblem {
    pub meta: ProblemMeta,
    pub signal: SparseSignal,
    pub matrix: SensingMatrix,
    pub y: BitMeasurements,
}

/// Runs the full pipeline: signal -> matrix -> quantize -> flip.
pub fn generate_problem(meta: ProblemMeta) -> Result<GeneratedProblem> {
    let noise = if meta.snr.is_infinite() {
        NoiseSpec::noiseless()
    } else {
        NoiseSpec::with_snr(meta.snr)?
    };
    let flips = FlipSpec::with_ratio(meta.flip_ratio)?;
    let seed = Seed(meta.seed);
    let signal = generate_sparse_signal(meta.n, meta.k, seed)?;
    let matrix = generate_measurement_system(meta.n, meta.m, seed);
    let clean = quantize(&matrix, signal.dense(), &noise, seed)?;
    let y = flip_signs(&clean, &flips, seed);
    Ok(GeneratedProblem {
        meta,
        signal,
        matrix,
        y,
    })
}

/// Writes a problem as text: a header line `n m K snr flip_ratio seed`, the
/// true signal on one line, the `m` matrix columns on one line each, then the
/// sign vector. Floats use the shortest representation that round-trips.
pub fn dump_problem<W: Write>(w: &mut W, problem: &GeneratedProblem) -> Result<()> {
    let meta = &problem.meta;
    writeln!(
        w,
        "{} {} {} {} {} {}",
        meta.n, meta.m, meta.k, meta.snr, meta.flip_ratio, meta.seed
    )?;
    write_row(w, problem.signal.dense())?;
    for i in 0..meta.m {
        write_row(w, problem.matrix.column(i))?;
    }
    write_row(w, problem.y.as_slice())?;
    Ok(())
}

fn write_row<W: Write>(w: &mut W, row: &[f64]) -> Result<()> {
    let mut line = String::with_capacity(row.len() * 20);
    for (j, v) in row.iter().enumerate() {
        if j > 0 {
            line.push(' ');
        }
        line.push_str(&v.to_string());
    }
    writeln!(w, "{line}")?;
    Ok(())
}

/// Parses the format written by [`dump_problem`].
pub fn load_problem<R: BufRead>(r: &mut R) -> Result<GeneratedProblem> {
    let mut lines = r.lines().enumerate();
    let (_, header) = next_line(&mut lines)?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 6 {
        return Err(Error::Parse {
            line: 1,
            message: format!("header needs 6 fields, got {}", fields.len()),
        });
    }
    let n: usize = parse_field(fields[0], 1, "n")?;
    let m: usize = parse_field(fields[1], 1, "m")?;
    let k: usize = parse_field(fields[2], 1, "K")?;
    let snr: f64 = parse_field(fields[3], 1, "snr")?;
    let flip_ratio: f64 = parse_field(fields[4], 1, "flip_ratio")?;
    let seed: u64 = parse_field(fields[5], 1, "seed")?;

    let (ln, sig_line) = next_line(&mut lines)?;
    let signal = SparseSignal::from_dense(parse_row(&sig_line, ln, n)?)?;

    let mut data = Vec::with_capacity(n * m);
    for _ in 0..m {
        let (ln, col_line) = next_line(&mut lines)?;
        data.extend_from_slice(&parse_row(&col_line, ln, n)?);
    }
    let matrix = SensingMatrix::from_columns(n, m, data)?;

    let (ln, y_line) = next_line(&mut lines)?;
    let y = BitMeasurements::from_vec(parse_row(&y_line, ln, m)?)?;

    Ok(GeneratedProblem {
        meta: ProblemMeta {
            n,
            m,
            k,
            snr,
            flip_ratio,
            seed,
        },
        signal,
        matrix,
        y,
    })
}

fn next_line<I: Iterator<Item = (usize, std::io::Result<String>)>>(
    lines: &mut I,
) -> Result<(usize, String)> {
    match lines.next() {
        Some((i, Ok(s))) => Ok((i + 1, s)),
        Some((_, Err(e))) => Err(Error::Io(e)),
        None => Err(Error::Parse {
            line: 0,
            message: "unexpected end of file".into(),
        }),
    }
}

fn parse_field<T: std::str::FromStr>(s: &str, line: usize, what: &str) -> Result<T> {
    s.parse().map_err(|_| Error::Parse {
        line,
        message: format!("cannot parse {what} from {s:?}"),
    })
}

fn parse_row(s: &str, line: usize, expected: usize) -> Result<Vec<f64>> {
    let row: Vec<f64> = s
        .split_whitespace()
        .map(|t| parse_field(t, line, "value"))
        .collect::<Result<_>>()?;
    if row.len() != expected {
        return Err(Error::Parse {
            line,
            message: format!("expected {expected} values, got {}", row.len()),
        });
    }
    Ok(row)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn axpy(coef: f64, x: &[f64], acc: &mut [f64]) {
    debug_assert_eq!(x.len(), acc.len());
    for (a, &v) in acc.iter_mut().zip(x) {
        *a += coef * v;
    }
}

pub(crate) fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}
