//! Depth-one QAOA for MAX-3-SAT with the doubly-controlled phase gate as
//! the phase separator.
//!
//! Bitstrings index variables big-endian: variable 0 is the most
//! significant bit. The cost counts satisfied clauses, the separator is
//! `exp(-i gamma C)` and the mixer applies `exp(-i beta X)` to every qubit.

use std::f64::consts::PI;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decompose::{decomposition_channel, Gate, GateList, GateNoiseModel};
use crate::device::DeviceModel;
use crate::error::{Error, Result};
use crate::linalg::{c64, cis, CMatrix, ComputationalEmbedding, CVector, Superoperator, C64};
use crate::noise::{noisy_sequence_channel, NoiseOptions};
use crate::rng;
use crate::synth::synthesize_on;

/// Bit pattern (chain order) phased by the native gate.
pub const NATIVE_PATTERN: [u8; 3] = [0, 1, 1];
/// Bit pattern phased by the reference decomposition.
pub const COMPILED_PATTERN: [u8; 3] = [1, 1, 1];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Literal {
    pub var: usize,
    pub negated: bool,
}

impl Literal {
    pub fn is_true(&self, x: bool) -> bool {
        x != self.negated
    }

    /// Value of the variable that makes this literal false.
    pub fn falsifying_value(&self) -> u8 {
        self.negated as u8
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clause {
    pub literals: [Literal; 3],
}

impl Clause {
    pub fn new(literals: [Literal; 3]) -> Result<Self> {
        let v = literals.map(|l| l.var);
        if v[0] == v[1] || v[0] == v[2] || v[1] == v[2] {
            return Err(Error::InvalidArgument(format!("clause variables must be distinct, got {v:?}")));
        }
        Ok(Self { literals })
    }

    pub fn positive(vars: [usize; 3]) -> Result<Self> {
        Self::new(vars.map(|var| Literal { var, negated: false }))
    }

    pub fn max_var(&self) -> usize {
        self.literals.iter().map(|l| l.var).max().unwrap_or(0)
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> =
            self.literals.iter().map(|l| format!("{}x{}", if l.negated { "~" } else { "" }, l.var)).collect();
        write!(f, "{}", parts.join("|"))
    }
}

/// Parses `x0|~x1|x2`; `!` and `-` also negate.
impl FromStr for Clause {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("cannot parse clause `{s}` (expected e.g. x0|~x1|x2)"));
        let lits: Vec<Literal> = s
            .split(['|', ','])
            .map(|tok| {
                let tok = tok.trim();
                let (negated, rest) = match tok.strip_prefix(['~', '!', '-']) {
                    Some(r) => (true, r),
                    None => match tok.strip_prefix('¬') {
                        Some(r) => (true, r),
                        None => (false, tok),
                    },
                };
                let var = rest.trim_start_matches(['x', 'X']).parse::<usize>().map_err(|_| bad())?;
                Ok(Literal { var, negated })
            })
            .collect::<Result<_>>()?;
        let arr: [Literal; 3] = lits.try_into().map_err(|_| bad())?;
        Clause::new(arr)
    }
}

fn bit(x: usize, var: usize, n: usize) -> bool {
    (x >> (n - 1 - var)) & 1 == 1
}

/// 1 if any literal holds. `x` lists variable values.
pub fn clause_cost(c: &Clause, x: &[bool]) -> Result<u8> {
    if c.max_var() >= x.len() {
        return Err(Error::InvalidArgument(format!("assignment of length {} does not cover clause {c}", x.len())));
    }
    Ok(c.literals.iter().any(|l| l.is_true(x[l.var])) as u8)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SatInstance {
    pub n_vars: usize,
    pub clauses: Vec<Clause>,
}

impl SatInstance {
    pub const MAX_DENSE_VARS: usize = 20;

    pub fn new(n_vars: usize, clauses: Vec<Clause>) -> Result<Self> {
        let inst = Self { n_vars, clauses };
        inst.validate()?;
        Ok(inst)
    }

    /// Smallest instance (at least three variables) holding `clauses`.
    pub fn from_clauses(clauses: Vec<Clause>) -> Result<Self> {
        let n = clauses.iter().map(|c| c.max_var() + 1).max().unwrap_or(0).max(3);
        Self::new(n, clauses)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_vars > Self::MAX_DENSE_VARS {
            return Err(Error::InvalidArgument(format!(
                "{} variables exceed the dense limit of {}",
                self.n_vars,
                Self::MAX_DENSE_VARS
            )));
        }
        for (k, c) in self.clauses.iter().enumerate() {
            if c.max_var() >= self.n_vars {
                return Err(Error::InvalidArgument(format!("clause {k} ({c}) uses a variable >= {}", self.n_vars)));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        1 << self.n_vars
    }
}

/// Entry `x` is the number of clauses satisfied by bitstring `x`.
pub fn cost_diagonal(inst: &SatInstance) -> Vec<f64> {
    let n = inst.n_vars;
    (0..inst.dim())
        .map(|x| {
            inst.clauses
                .iter()
                .filter(|c| c.literals.iter().any(|l| l.is_true(bit(x, l.var, n))))
                .count() as f64
        })
        .collect()
}

/// X-conjugated phase gates realizing `exp(-i gamma C)` up to a global phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSeparator {
    /// Gates on chain positions.
    pub gates: GateList,
    /// Diagonal of the assembled unitary in variable order.
    pub diagonal: Vec<(f64, f64)>,
    /// `diagonal = exp(i global_phase) exp(-i gamma C)`.
    pub global_phase: f64,
}

impl PhaseSeparator {
    pub fn diagonal_c64(&self) -> Vec<C64> {
        self.diagonal.iter().map(|&(re, im)| c64(re, im)).collect()
    }
}

/// Chain positions of a clause's three variables, sorted, with the bit
/// pattern (chain order) that leaves the clause unsatisfied.
fn clause_window(c: &Clause, mapping: &[usize], k: usize) -> Result<(usize, [u8; 3])> {
    let mut placed: Vec<(usize, u8)> = c.literals.iter().map(|l| (mapping[l.var], l.falsifying_value())).collect();
    placed.sort_by_key(|p| p.0);
    if placed[1].0 != placed[0].0 + 1 || placed[2].0 != placed[1].0 + 1 {
        return Err(Error::UnmappableClause(k));
    }
    Ok((placed[0].0, [placed[0].1, placed[1].1, placed[2].1]))
}

fn check_mapping(inst: &SatInstance, mapping: &[usize]) -> Result<()> {
    let mut seen = vec![false; inst.n_vars];
    if mapping.len() != inst.n_vars {
        return Err(Error::InvalidArgument(format!("mapping has {} entries for {} variables", mapping.len(), inst.n_vars)));
    }
    for &p in mapping {
        if p >= inst.n_vars || seen[p] {
            return Err(Error::InvalidArgument(format!("mapping {mapping:?} is not a permutation")));
        }
        seen[p] = true;
    }
    Ok(())
}

/// Per clause: X on chain positions whose unsatisfying bit differs from
/// `pattern`, one three-qubit phase gate, the same X layer again.
fn separator_gates(inst: &SatInstance, mapping: &[usize], pattern: [u8; 3]) -> Result<Vec<(usize, [u8; 3])>> {
    check_mapping(inst, mapping)?;
    let mut out = Vec::with_capacity(inst.clauses.len());
    for (k, c) in inst.clauses.iter().enumerate() {
        let (start, unsat) = clause_window(c, mapping, k)?;
        let flips = [unsat[0] ^ pattern[0], unsat[1] ^ pattern[1], unsat[2] ^ pattern[2]];
        out.push((start, flips));
    }
    Ok(out)
}

/// Separator built from the native `|011>`-phasing gate. `mapping[v]` is the
/// chain position of variable `v`; `None` means the identity.
pub fn phase_separator(inst: &SatInstance, gamma: f64, mapping: Option<&[usize]>) -> Result<PhaseSeparator> {
    inst.validate()?;
    let identity: Vec<usize> = (0..inst.n_vars).collect();
    let mapping = mapping.unwrap_or(&identity);
    let windows = separator_gates(inst, mapping, NATIVE_PATTERN)?;
    let mut gates = Vec::new();
    for &(start, flips) in &windows {
        let xs: Vec<Gate> =
            (0..3).filter(|&j| flips[j] == 1).map(|j| Gate::new("X", None, &[start + j])).collect();
        gates.extend(xs.iter().cloned());
        gates.push(Gate::new("CCPHASE011", Some(gamma), &[start, start + 1, start + 2]));
        gates.extend(xs);
    }
    let list = GateList { n_qubits: inst.n_vars, gates };
    list.validate()?;
    // action of the gate list on each basis state, evaluated directly
    let n = inst.n_vars;
    let mut chain_of_var = vec![0; n];
    chain_of_var.copy_from_slice(mapping);
    let diagonal = (0..inst.dim())
        .map(|x| {
            let mut phase = 0.0;
            for &(start, flips) in &windows {
                let hit = (0..3).all(|j| {
                    let var = chain_of_var.iter().position(|&p| p == start + j).expect("mapping is a permutation");
                    (bit(x, var, n) as u8 ^ flips[j]) == NATIVE_PATTERN[j]
                });
                if hit {
                    phase += gamma;
                }
            }
            let z = cis(phase);
            (z.re, z.im)
        })
        .collect();
    Ok(PhaseSeparator { gates: list, diagonal, global_phase: gamma * inst.clauses.len() as f64 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Ideal,
    Native,
    Compiled,
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BackendKind::Ideal => "ideal",
            BackendKind::Native => "native",
            BackendKind::Compiled => "compiled",
        })
    }
}

impl FromStr for BackendKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ideal" => Ok(Self::Ideal),
            "native" => Ok(Self::Native),
            "compiled" => Ok(Self::Compiled),
            _ => Err(Error::InvalidArgument(format!("unknown backend `{s}` (ideal, native, compiled)"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DeviceNoise {
    pub model: DeviceModel,
    pub chain: [u32; 3],
    pub options: NoiseOptions,
}

/// How the phase separator is realized. Native and compiled backends only
/// handle three-variable instances; without `noise` they run noiselessly.
#[derive(Debug, Clone)]
pub struct QaoaBackend {
    pub kind: BackendKind,
    pub noise: Option<DeviceNoise>,
}

impl QaoaBackend {
    pub fn ideal() -> Self {
        Self { kind: BackendKind::Ideal, noise: None }
    }

    pub fn noisy(kind: BackendKind, model: DeviceModel, chain: [u32; 3], options: NoiseOptions) -> Self {
        Self { kind, noise: Some(DeviceNoise { model, chain, options }) }
    }

    fn pattern(&self) -> [u8; 3] {
        match self.kind {
            BackendKind::Compiled => COMPILED_PATTERN,
            _ => NATIVE_PATTERN,
        }
    }

    /// Three-qubit phase gate at `gamma` as an 8-dimensional channel.
    fn gate_channel(&self, gamma: f64) -> Result<Superoperator> {
        let (model, chain, options) = match &self.noise {
            Some(n) => (n.model.clone(), n.chain, n.options),
            None => {
                let m = DeviceModel::default_model();
                let chain = m.default_chain()?;
                (m, chain, NoiseOptions::default())
            }
        };
        let noiseless = self.noise.is_none();
        match self.kind {
            BackendKind::Native => {
                let seq = synthesize_on(gamma, &model, &chain)?;
                if noiseless {
                    let u = crate::linalg::restrict_to_computational(&seq.ideal_unitary()?, &ComputationalEmbedding::new(3))?;
                    return Ok(Superoperator::from_unitary(&u.block));
                }
                let c = noisy_sequence_channel(&seq, &model, &chain, &options)?;
                Ok(c.restricted_superoperator(&ComputationalEmbedding::new(3)))
            }
            BackendKind::Compiled => {
                if noiseless {
                    let l = crate::decompose::lower_to_native(&crate::decompose::decompose_ccphase(gamma))?;
                    return Ok(Superoperator::from_unitary(&l.unitary()?));
                }
                decomposition_channel(gamma, &GateNoiseModel::new(model, chain, options)?)
            }
            BackendKind::Ideal => unreachable!("ideal backend has no gate channel"),
        }
    }

    /// Separator channel for a three-variable instance.
    pub fn separator_channel(&self, inst: &SatInstance, gamma: f64) -> Result<Superoperator> {
        if inst.n_vars != 3 {
            return Err(Error::InvalidArgument(format!(
                "{} backend supports exactly 3 variables, got {}",
                self.kind, inst.n_vars
            )));
        }
        let windows = separator_gates(inst, &[0, 1, 2], self.pattern())?;
        let gate = self.gate_channel(gamma)?;
        let mut total = Superoperator::identity(8);
        for (_, flips) in windows {
            let xs: Vec<CMatrix> = flips
                .iter()
                .map(|&f| if f == 1 { pauli_x() } else { CMatrix::identity(2, 2) })
                .collect();
            let x = Superoperator::from_unitary(&crate::linalg::kron_all(&xs));
            total = total.then(&x).then(&gate).then(&x);
        }
        Ok(total)
    }
}

fn pauli_x() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c64(0.0, 0.0), c64(1.0, 0.0), c64(1.0, 0.0), c64(0.0, 0.0)])
}

fn mixer_1q(beta: f64) -> CMatrix {
    let (c, s) = (c64(beta.cos(), 0.0), c64(0.0, -beta.sin()));
    CMatrix::from_row_slice(2, 2, &[c, s, s, c])
}

fn apply_mixer(psi: &mut [C64], n: usize, beta: f64) {
    let (c, s) = (c64(beta.cos(), 0.0), c64(0.0, -beta.sin()));
    for q in 0..n {
        let stride = 1 << (n - 1 - q);
        for base in 0..psi.len() {
            if base & stride != 0 {
                continue;
            }
            let (a, b) = (psi[base], psi[base + stride]);
            psi[base] = c * a + s * b;
            psi[base + stride] = s * a + c * b;
        }
    }
}

/// Measurement distribution of the ideal ansatz.
pub fn ideal_probabilities(inst: &SatInstance, beta: f64, gamma: f64) -> Vec<f64> {
    let cost = cost_diagonal(inst);
    let amp = 1.0 / (inst.dim() as f64).sqrt();
    let mut psi: Vec<C64> = cost.iter().map(|&c| cis(-gamma * c) * amp).collect();
    apply_mixer(&mut psi, inst.n_vars, beta);
    psi.iter().map(|z| z.norm_sqr()).collect()
}

/// Measurement distribution after a given separator channel; population
/// lost from the computational subspace reads out uniformly.
pub fn channel_probabilities(separator: &Superoperator, beta: f64) -> Vec<f64> {
    let d = separator.dim();
    let plus = CMatrix::from_element(d, d, c64(1.0 / d as f64, 0.0));
    let rho = separator.apply(&plus);
    let n = d.trailing_zeros() as usize;
    let m = crate::linalg::kron_all(&vec![mixer_1q(beta); n]);
    let rho = &m * rho * m.adjoint();
    let lost = (1.0 - rho.trace().re).max(0.0);
    (0..d).map(|k| (rho[(k, k)].re + lost / d as f64).max(0.0)).collect()
}

fn expectation_from(probs: &[f64], cost: &[f64], shots: Option<u64>, rng: &mut impl Rng) -> f64 {
    match shots {
        None => probs.iter().zip(cost).map(|(p, c)| p * c).sum(),
        Some(n) => {
            let total: f64 = probs.iter().sum();
            let norm: Vec<f64> = probs.iter().map(|p| p / total).collect();
            let counts = rng::multinomial(rng, n, &norm);
            counts.iter().zip(cost).map(|(&k, c)| k as f64 * c).sum::<f64>() / n as f64
        }
    }
}

/// `<C>` of the depth-one ansatz; `shots = None` gives the exact value.
pub fn ansatz_expectation(
    inst: &SatInstance,
    beta: f64,
    gamma: f64,
    backend: &QaoaBackend,
    shots: Option<u64>,
    seed: u64,
) -> Result<f64> {
    inst.validate()?;
    if shots == Some(0) {
        return Err(Error::InvalidArgument("shots must be positive".into()));
    }
    let probs = match backend.kind {
        BackendKind::Ideal => ideal_probabilities(inst, beta, gamma),
        _ => channel_probabilities(&backend.separator_channel(inst, gamma)?, beta),
    };
    let mut g = rng::stream(seed, &[]);
    Ok(expectation_from(&probs, &cost_diagonal(inst), shots, &mut g))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandscapePoint {
    pub beta: f64,
    pub gamma: f64,
    pub expectation: f64,
    /// 0 for exact evaluation.
    pub shots: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Landscape {
    pub backend: BackendKind,
    pub points: Vec<LandscapePoint>,
}

impl Landscape {
    pub fn min_point(&self) -> Option<&LandscapePoint> {
        self.points.iter().min_by(|a, b| a.expectation.total_cmp(&b.expectation))
    }

    /// CSV with columns `beta, gamma, expectation, shots`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for p in &self.points {
            w.serialize(p)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R, backend: BackendKind) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let points = r.deserialize().collect::<std::result::Result<Vec<LandscapePoint>, _>>()?;
        Ok(Self { backend, points })
    }
}

/// `n x n` grid over `[-pi, pi]^2`, beta-major.
pub fn grid_configs(n: usize) -> Vec<(f64, f64)> {
    let axis: Vec<f64> = match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|k| -PI + 2.0 * PI * k as f64 / (n - 1) as f64).collect(),
    };
    axis.iter().flat_map(|&b| axis.iter().map(move |&g| (b, g))).collect()
}

/// Uniform random `(beta, gamma)` in `[-pi, pi]^2`.
pub fn random_configs(count: usize, seed: u64) -> Vec<(f64, f64)> {
    let mut g = rng::stream(seed, &[u64::MAX]);
    (0..count).map(|_| (g.random_range(-PI..PI), g.random_range(-PI..PI))).collect()
}

/// Evaluates every `(beta, gamma)`; config `k` samples from stream `(seed, k)`.
/// Separator channels are built once per distinct `gamma`.
pub fn landscape(
    inst: &SatInstance,
    configs: &[(f64, f64)],
    backend: &QaoaBackend,
    shots: Option<u64>,
    seed: u64,
) -> Result<Landscape> {
    inst.validate()?;
    if shots == Some(0) {
        return Err(Error::InvalidArgument("shots must be positive".into()));
    }
    let cost = cost_diagonal(inst);
    let channels: Vec<(u64, Superoperator)> = if backend.kind == BackendKind::Ideal {
        Vec::new()
    } else {
        let mut gammas: Vec<f64> = configs.iter().map(|c| c.1).collect();
        gammas.sort_by(f64::total_cmp);
        gammas.dedup();
        gammas
            .par_iter()
            .map(|&g| Ok((g.to_bits(), backend.separator_channel(inst, g)?)))
            .collect::<Result<_>>()?
    };
    let lookup: std::collections::HashMap<u64, &Superoperator> = channels.iter().map(|(k, s)| (*k, s)).collect();
    let points = configs
        .par_iter()
        .enumerate()
        .map(|(k, &(beta, gamma))| {
            let probs = match backend.kind {
                BackendKind::Ideal => ideal_probabilities(inst, beta, gamma),
                _ => channel_probabilities(lookup[&gamma.to_bits()], beta),
            };
            let mut g = rng::stream(seed, &[k as u64]);
            LandscapePoint { beta, gamma, expectation: expectation_from(&probs, &cost, shots, &mut g), shots: shots.unwrap_or(0) }
        })
        .collect();
    Ok(Landscape { backend: backend.kind, points })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub rho: f64,
    pub mu_a: f64,
    pub mu_b: f64,
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    sab / (saa * sbb).sqrt()
}

/// Pearson correlation of paired expectations and each landscape's minimum.
pub fn compare_landscapes(a: &Landscape, b: &Landscape) -> Result<Comparison> {
    if a.points.len() != b.points.len() {
        return Err(Error::MismatchedConfigs(format!("{} vs {} points", a.points.len(), b.points.len())));
    }
    if a.points.is_empty() {
        return Err(Error::MismatchedConfigs("landscapes are empty".into()));
    }
    for (k, (p, q)) in a.points.iter().zip(&b.points).enumerate() {
        if (p.beta - q.beta).abs() > 1e-9 || (p.gamma - q.gamma).abs() > 1e-9 {
            return Err(Error::MismatchedConfigs(format!(
                "point {k}: ({}, {}) vs ({}, {})",
                p.beta, p.gamma, q.beta, q.gamma
            )));
        }
    }
    let ea: Vec<f64> = a.points.iter().map(|p| p.expectation).collect();
    let eb: Vec<f64> = b.points.iter().map(|p| p.expectation).collect();
    let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(Comparison { rho: pearson(&ea, &eb), mu_a: min(&ea), mu_b: min(&eb) })
}

/// Dense statevector of the ansatz, for cross-checks.
pub fn ansatz_state(inst: &SatInstance, beta: f64, gamma: f64) -> CVector {
    let cost = cost_diagonal(inst);
    let amp = 1.0 / (inst.dim() as f64).sqrt();
    let mut psi: Vec<C64> = cost.iter().map(|&c| cis(-gamma * c) * amp).collect();
    apply_mixer(&mut psi, inst.n_vars, beta);
    CVector::from_vec(psi)
}
