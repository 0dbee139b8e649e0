//! Cycle benchmarking with random Pauli twirls.

use std::f64::consts::PI;
use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{all_pauli_labels, pauli_matrix, DIM};
use crate::error::{Error, Result};
use crate::linalg::{c64, CMatrix, CVector, Superoperator};
use crate::rng;

/// Terms whose mean expectation at the first depth falls below this are
/// excluded from the fidelity average.
pub const VANISHING_EXPECTATION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CBConfig {
    pub pauli_terms: Vec<String>,
    pub depths: Vec<usize>,
    pub randomizations: usize,
    /// `None` uses exact expectations.
    pub shots: Option<u64>,
    /// Benchmark `G(theta) G(2 pi - theta)` instead of `G(theta)`.
    pub composite: bool,
    pub seed: u64,
}

impl Default for CBConfig {
    fn default() -> Self {
        Self {
            pauli_terms: all_pauli_labels(),
            depths: vec![2, 4, 8],
            randomizations: 30,
            shots: Some(1000),
            composite: false,
            seed: 0,
        }
    }
}

impl CBConfig {
    pub fn validate(&self) -> Result<()> {
        if self.depths.len() < 2 || self.depths.iter().any(|&d| d == 0) {
            return Err(Error::InvalidArgument("cycle benchmarking needs at least two depths, all >= 1".into()));
        }
        if self.depths.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("depths must be strictly increasing".into()));
        }
        if self.randomizations == 0 || self.shots == Some(0) {
            return Err(Error::InvalidArgument("randomizations and shots must be positive".into()));
        }
        if self.pauli_terms.is_empty() {
            return Err(Error::InvalidArgument("no Pauli terms requested".into()));
        }
        for t in &self.pauli_terms {
            pauli_matrix(t)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthPoint {
    pub depth: usize,
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PauliDecay {
    pub term: String,
    pub decay: f64,
    pub decay_stderr: f64,
    pub amplitude: f64,
    pub excluded: bool,
    pub points: Vec<DepthPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub process_fidelity: f64,
    pub standard_error: f64,
    pub composite: bool,
    /// Fidelity bound for one gate; `sqrt(F)` in composite mode.
    pub per_gate_bound: f64,
    pub decays: Vec<PauliDecay>,
    pub excluded_terms: Vec<String>,
    pub config: CBConfig,
}

impl BenchmarkReport {
    /// CSV rows `(term, depth, mean, stderr, decay, decay_stderr, excluded)`.
    pub fn write_decay_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["term", "depth", "mean", "stderr", "decay", "decay_stderr", "excluded"])?;
        for d in &self.decays {
            for p in &d.points {
                w.write_record([
                    d.term.clone(),
                    p.depth.to_string(),
                    format!("{:.6}", p.mean),
                    format!("{:.6}", p.stderr),
                    format!("{:.6}", d.decay),
                    format!("{:.6}", d.decay_stderr),
                    d.excluded.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// `+1` eigenstate of a Pauli label as a product state.
fn eigenstate(label: &str) -> CMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let kets: Vec<CVector> = label
        .chars()
        .map(|c| match c {
            'X' => CVector::from_vec(vec![c64(s, 0.0), c64(s, 0.0)]),
            'Y' => CVector::from_vec(vec![c64(s, 0.0), c64(0.0, s)]),
            _ => CVector::from_vec(vec![c64(1.0, 0.0), c64(0.0, 0.0)]),
        })
        .collect();
    let mut psi = kets[0].clone();
    for k in &kets[1..] {
        psi = psi.kronecker(k);
    }
    &psi * psi.adjoint()
}

fn expectation(op: &CMatrix, rho: &CMatrix) -> f64 {
    let mut acc = c64(0.0, 0.0);
    for i in 0..rho.nrows() {
        for j in 0..rho.ncols() {
            acc += op[(i, j)] * rho[(j, i)];
        }
    }
    acc.re
}

/// Weighted fit of `ln E = ln A + m ln f`. Returns `(A, f, se(f))`.
fn fit_decay(points: &[DepthPoint]) -> Option<(f64, f64, f64)> {
    let usable: Vec<&DepthPoint> = points.iter().filter(|p| p.mean > 0.0).collect();
    if usable.len() < 2 {
        return None;
    }
    let (mut sw, mut swx, mut swy, mut swxx, mut swxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for p in &usable {
        // variance of ln E from the variance of E
        let var = (p.stderr / p.mean).powi(2).max(1e-12);
        let w = 1.0 / var;
        let (x, y) = (p.depth as f64, p.mean.ln());
        sw += w;
        swx += w * x;
        swy += w * y;
        swxx += w * x * x;
        swxy += w * x * y;
    }
    let det = sw * swxx - swx * swx;
    if det <= 0.0 {
        return None;
    }
    let slope = (sw * swxy - swx * swy) / det;
    let intercept = (swxx * swy - swx * swxy) / det;
    let f = slope.exp();
    let se = f * (sw / det).sqrt();
    Some((intercept.exp(), f, se))
}

fn run_term(
    term_index: usize,
    term: &str,
    cycle: &Superoperator,
    target: &CMatrix,
    twirls: &[CMatrix],
    config: &CBConfig,
) -> Result<PauliDecay> {
    let p = pauli_matrix(term)?;
    let rho0 = eigenstate(term);
    let mut points = Vec::with_capacity(config.depths.len());
    for (di, &depth) in config.depths.iter().enumerate() {
        let mut values = Vec::with_capacity(config.randomizations);
        for r in 0..config.randomizations {
            let mut g = rng::stream(config.seed, &[term_index as u64, di as u64, r as u64]);
            let mut rho = rho0.clone();
            let mut frame = CMatrix::identity(DIM, DIM);
            for _ in 0..depth {
                let t = &twirls[g.random_range(0..twirls.len())];
                rho = t * rho * t;
                rho = cycle.apply(&rho);
                frame = target * t * frame;
            }
            let observable = &frame * &p * frame.adjoint();
            let exact = expectation(&observable, &rho);
            let value = match config.shots {
                None => exact,
                Some(n) => {
                    // lost population reads out as a fair coin, so it only
                    // dilutes the expectation
                    let p_plus = ((1.0 + exact) / 2.0).clamp(0.0, 1.0);
                    let k = rng::binomial(&mut g, n, p_plus);
                    2.0 * k as f64 / n as f64 - 1.0
                }
            };
            values.push(value);
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sample_var = if values.len() > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        let shot_var = config.shots.map(|s| (1.0 - mean * mean).max(0.0) / s as f64).unwrap_or(0.0);
        let stderr = (sample_var.max(shot_var) / n).sqrt();
        points.push(DepthPoint { depth, mean, stderr });
    }
    let vanishing = points[0].mean < VANISHING_EXPECTATION;
    let fit = if vanishing { None } else { fit_decay(&points) };
    Ok(match fit {
        Some((amplitude, decay, decay_stderr)) => {
            PauliDecay { term: term.to_string(), decay, decay_stderr, amplitude, excluded: false, points }
        }
        None => PauliDecay {
            term: term.to_string(),
            decay: f64::NAN,
            decay_stderr: f64::NAN,
            amplitude: f64::NAN,
            excluded: true,
            points,
        },
    })
}

/// Benchmarks one cycle channel against its ideal unitary.
pub fn cycle_benchmark(cycle: &Superoperator, target: &CMatrix, config: &CBConfig) -> Result<BenchmarkReport> {
    config.validate()?;
    if cycle.dim() != DIM || target.nrows() != DIM {
        return Err(Error::DimensionMismatch { expected: DIM, got: cycle.dim() });
    }
    let twirls: Vec<CMatrix> = all_pauli_labels().iter().map(|l| pauli_matrix(l)).collect::<Result<_>>()?;
    let decays = config
        .pauli_terms
        .par_iter()
        .enumerate()
        .map(|(k, term)| {
            if term.chars().all(|c| c == 'I') {
                let points = config.depths.iter().map(|&depth| DepthPoint { depth, mean: 1.0, stderr: 0.0 }).collect();
                return Ok(PauliDecay {
                    term: term.clone(),
                    decay: 1.0,
                    decay_stderr: 0.0,
                    amplitude: 1.0,
                    excluded: false,
                    points,
                });
            }
            run_term(k, term, cycle, target, &twirls, config)
        })
        .collect::<Result<Vec<_>>>()?;
    let included: Vec<&PauliDecay> = decays.iter().filter(|d| !d.excluded).collect();
    let excluded_terms: Vec<String> = decays.iter().filter(|d| d.excluded).map(|d| d.term.clone()).collect();
    if !excluded_terms.is_empty() {
        log::warn!(
            "{} Pauli terms had a vanishing expectation at depth {} and were excluded",
            excluded_terms.len(),
            config.depths[0]
        );
    }
    if included.is_empty() {
        return Err(Error::InvalidArgument("every Pauli term was excluded; the channel is too noisy to benchmark".into()));
    }
    let n = included.len() as f64;
    let process_fidelity = (included.iter().map(|d| d.decay).sum::<f64>() / n).clamp(0.0, 1.0);
    let standard_error = included.iter().map(|d| d.decay_stderr.powi(2)).sum::<f64>().sqrt() / n;
    let per_gate_bound = if config.composite { process_fidelity.sqrt() } else { process_fidelity };
    Ok(BenchmarkReport {
        process_fidelity,
        standard_error,
        composite: config.composite,
        per_gate_bound,
        decays,
        excluded_terms,
        config: config.clone(),
    })
}

/// Benchmarks the gate produced by `factory` at `theta`, or the composite
/// `G(theta) G(2 pi - theta)` when the config asks for it.
pub fn cycle_benchmark_gate<F>(factory: F, theta: f64, config: &CBConfig) -> Result<BenchmarkReport>
where
    F: Fn(f64) -> Result<Superoperator>,
{
    let target = |t: f64| crate::synth::target_unitary(t);
    if config.composite {
        let first = factory(theta)?;
        let second = factory(2.0 * PI - theta)?;
        let cycle = first.then(&second);
        cycle_benchmark(&cycle, &(target(2.0 * PI - theta) * target(theta)), config)
    } else {
        cycle_benchmark(&factory(theta)?, &target(theta), config)
    }
}
