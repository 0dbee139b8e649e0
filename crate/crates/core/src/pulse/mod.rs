//! The parametric flux-pulse primitive.
//!
//! A pulse on an ordered qutrit pair `(a, b)` drives half of a
//! `|11> <-> |X>` oscillation, with `X = |02>` (`Swap02`, second qutrit
//! promoted) or `X = |20>` (`Swap20`, first qutrit promoted). The flux
//! phase `beta` is imprinted on the off-diagonal elements:
//!
//! ```text
//! |11> -> -i e^{+i beta} |X>,   |X> -> -i e^{-i beta} |11>
//! ```
//!
//! so two pulses `(beta1, beta2)` return `|11>` with phase `pi + beta1 - beta2`.

pub mod bessel;

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c64, cis, CMatrix, C64};

/// Wraps an angle into `(-pi, pi]`.
pub fn normalize_angle(x: f64) -> f64 {
    let mut y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y -= 2.0 * PI;
    }
    y
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Subspace {
    #[serde(rename = "SWAP02", alias = "02", alias = "iSWAP02")]
    Swap02,
    #[serde(rename = "SWAP20", alias = "20", alias = "iSWAP20")]
    Swap20,
}

impl Subspace {
    /// Two-qutrit index of the partner state `|02>` or `|20>`.
    pub fn partner_index(self) -> usize {
        match self {
            Subspace::Swap02 => 2,
            Subspace::Swap20 => 6,
        }
    }

    /// The same physical interaction seen with the pair order reversed.
    pub fn reversed(self) -> Self {
        match self {
            Subspace::Swap02 => Subspace::Swap20,
            Subspace::Swap20 => Subspace::Swap02,
        }
    }

    pub fn short(self) -> &'static str {
        match self {
            Subspace::Swap02 => "02",
            Subspace::Swap20 => "20",
        }
    }
}

impl fmt::Display for Subspace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Subspace::Swap02 => f.write_str("SWAP02"),
            Subspace::Swap20 => f.write_str("SWAP20"),
        }
    }
}

impl FromStr for Subspace {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "02" | "SWAP02" | "ISWAP02" | "ISWAP_02" => Ok(Subspace::Swap02),
            "20" | "SWAP20" | "ISWAP20" | "ISWAP_20" => Ok(Subspace::Swap20),
            other => Err(Error::InvalidArgument(format!("unknown subspace `{other}`"))),
        }
    }
}

/// One two-qutrit flux pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluxPulse {
    /// Ordered pair of register sites.
    pub edge: (usize, usize),
    pub subspace: Subspace,
    /// Radians, kept in `(-pi, pi]`.
    pub flux_phase: f64,
    pub duration_ns: f64,
}

impl FluxPulse {
    pub fn new(edge: (usize, usize), subspace: Subspace, flux_phase: f64, duration_ns: f64) -> Result<Self> {
        if !(duration_ns > 0.0) {
            return Err(Error::InvalidDuration { requirement: "positive", value: duration_ns });
        }
        Ok(Self { edge, subspace, flux_phase: normalize_angle(flux_phase), duration_ns })
    }

    pub fn with_flux_phase(mut self, beta: f64) -> Self {
        self.flux_phase = normalize_angle(beta);
        self
    }

    pub fn unitary(&self) -> CMatrix {
        iswap_unitary(self.subspace, self.flux_phase)
    }
}

/// 9x9 two-qutrit unitary of a half oscillation in the chosen subspace.
pub fn iswap_unitary(subspace: Subspace, beta: f64) -> CMatrix {
    let mut u = CMatrix::identity(9, 9);
    let x = subspace.partner_index();
    let minus_i = c64(0.0, -1.0);
    u[(4, 4)] = c64(0.0, 0.0);
    u[(x, x)] = c64(0.0, 0.0);
    u[(x, 4)] = minus_i * cis(beta);
    u[(4, x)] = minus_i * cis(-beta);
    u
}

/// Two pulses realizing `diag(1, 1, 1, e^{i theta})` on the qubit block,
/// with flux phases `(0, pi - theta)`.
pub fn cphase_from_pulses(
    theta: f64,
    edge: (usize, usize),
    subspace: Subspace,
    pulse_ns: f64,
) -> Result<([FluxPulse; 2], CMatrix)> {
    let first = FluxPulse::new(edge, subspace, 0.0, pulse_ns)?;
    let second = FluxPulse::new(edge, subspace, PI - theta, pulse_ns)?;
    let u = second.unitary() * first.unitary();
    Ok(([first, second], u))
}

/// Static coupling and flux-modulation drive of one edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingParams {
    /// Static coupling, MHz.
    pub g_mhz: f64,
    /// Amplitude of the frequency oscillation, MHz.
    pub epsilon_mhz: f64,
    /// Modulation frequency, MHz.
    pub omega_m_mhz: f64,
    /// Sideband index.
    pub n: i32,
    pub beta_n: f64,
}

/// `g_n = g J_n(eps / omega_m) e^{-i beta_n}`, in MHz.
pub fn effective_coupling(p: &CouplingParams) -> Result<C64> {
    if !(p.omega_m_mhz > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "modulation frequency must be positive, got {} MHz",
            p.omega_m_mhz
        )));
    }
    let j = bessel::bessel_j(p.n, p.epsilon_mhz / p.omega_m_mhz);
    Ok(cis(-p.beta_n) * (p.g_mhz * j))
}

/// Rabi angular frequency `sqrt(2) |g_n|` in rad/ns for a coupling given in MHz.
fn rabi_rate(p: &CouplingParams) -> Result<f64> {
    Ok(SQRT_2 * 2.0 * PI * effective_coupling(p)?.norm() * 1e-3)
}

/// Integrates `i dpsi/dt = H psi` on `{|11>, |X>}` for a resonant square pulse,
/// `H = sqrt(2)|g_n| (e^{i beta}|X><11| + h.c.)`. Rows and columns are ordered
/// `(|11>, |X>)`.
pub fn rwa_evolution(p: &CouplingParams, t_ns: f64, beta: f64) -> Result<CMatrix> {
    if t_ns < 0.0 || !t_ns.is_finite() {
        return Err(Error::InvalidDuration { requirement: "non-negative", value: t_ns });
    }
    let omega = rabi_rate(p)?;
    let mut h = CMatrix::zeros(2, 2);
    h[(1, 0)] = cis(beta) * omega;
    h[(0, 1)] = cis(-beta) * omega;
    let minus_i_h = h * c64(0.0, -1.0);

    let mut u = CMatrix::identity(2, 2);
    if t_ns == 0.0 {
        return Ok(u);
    }
    let steps = ((omega * t_ns / 2e-3).ceil() as usize).max(64);
    let dt = t_ns / steps as f64;
    for _ in 0..steps {
        let k1 = &minus_i_h * &u;
        let k2 = &minus_i_h * (&u + &k1 * c64(dt / 2.0, 0.0));
        let k3 = &minus_i_h * (&u + &k2 * c64(dt / 2.0, 0.0));
        let k4 = &minus_i_h * (&u + &k3 * c64(dt, 0.0));
        u += (k1 + k2 * c64(2.0, 0.0) + k3 * c64(2.0, 0.0) + k4) * c64(dt / 6.0, 0.0);
    }
    Ok(u)
}

/// Half-swap time `t* = pi / (2 sqrt(2) |g_n|)` in ns.
pub fn pulse_duration(p: &CouplingParams) -> Result<f64> {
    let omega = rabi_rate(p)?;
    if omega <= f64::MIN_POSITIVE {
        return Err(Error::ZeroCoupling);
    }
    Ok(PI / (2.0 * omega))
}

/// The `|g_n|` (MHz) whose half swap takes `t_ns`.
pub fn coupling_for_duration(t_ns: f64) -> Result<f64> {
    if !(t_ns > 0.0) {
        return Err(Error::InvalidDuration { requirement: "positive", value: t_ns });
    }
    Ok(PI / (2.0 * t_ns) / (SQRT_2 * 2.0 * PI * 1e-3))
}

/// Coherent errors injected into a simulated device so that calibration has
/// something to remove.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PulseImperfection {
    /// Diagonal phase accumulated by each site's levels `(0, 1, 2)` over one
    /// sequence.
    pub stray_diagonal_phases: [[f64; 3]; 3],
    /// Extra conditional phase on `|11x>` from the stash/retrieve pulse pair.
    pub conditional_phase_error: f64,
    /// Site-1 phase shift per radian of retrieval flux-phase offset from `pi`.
    #[serde(default)]
    pub cross_coupling: f64,
}

impl PulseImperfection {
    /// Stray phases only on level 1 (`|1>` relative to `|0>`), per site.
    pub fn single_qubit(phases: [f64; 3], conditional_phase_error: f64) -> Self {
        let mut stray = [[0.0; 3]; 3];
        for (site, phase) in phases.iter().enumerate() {
            stray[site] = [0.0, *phase, 2.0 * *phase];
        }
        Self { stray_diagonal_phases: stray, conditional_phase_error, cross_coupling: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.stray_diagonal_phases.iter().flatten().all(|x| x.is_finite())
            && self.conditional_phase_error.is_finite()
            && self.cross_coupling.is_finite();
        if finite {
            Ok(())
        } else {
            Err(Error::Invariant { constraint: "finite imperfections".into(), detail: format!("{self:?}") })
        }
    }

    /// Relative phase of `|1>` over `|0>` on a site.
    pub fn single_qubit_phase(&self, site: usize) -> f64 {
        self.stray_diagonal_phases[site][1] - self.stray_diagonal_phases[site][0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs_diff, unitarity_deviation};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const I11: usize = 4;

    #[test]
    fn swap02_beta_zero_maps_11_to_minus_i_02() {
        let u = iswap_unitary(Subspace::Swap02, 0.0);
        assert!((u[(2, I11)] - c64(0.0, -1.0)).norm() < 1e-15);
        assert_eq!(u.column(I11).iter().filter(|z| z.norm() > 0.0).count(), 1);
    }

    #[test]
    fn same_pulse_twice_gives_minus_one() {
        for s in [Subspace::Swap02, Subspace::Swap20] {
            let u = iswap_unitary(s, 0.4);
            let uu = &u * &u;
            assert!((uu[(I11, I11)] + c64(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn beta_half_pi_is_real_transfer() {
        let u = iswap_unitary(Subspace::Swap02, PI / 2.0);
        assert!((u[(2, I11)] - c64(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn iswap_unitary_and_geometric_phase_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..100 {
            let b1 = rng.random_range(-PI..PI);
            let b2 = rng.random_range(-PI..PI);
            for s in [Subspace::Swap02, Subspace::Swap20] {
                let u1 = iswap_unitary(s, b1);
                assert!(unitarity_deviation(&u1) < 1e-12);
                let prod = iswap_unitary(s, b2) * u1;
                for (k, idx) in [0usize, 1, 3, 4].iter().enumerate() {
                    let expected = if k == 3 { cis(PI + b1 - b2) } else { c64(1.0, 0.0) };
                    assert!((prod[(*idx, *idx)] - expected).norm() < 1e-12);
                    for jdx in [0usize, 1, 3, 4] {
                        if jdx != *idx {
                            assert!(prod[(*idx, jdx)].norm() < 1e-15);
                        }
                    }
                }
            }
        }
    }

    fn qubit_block(u: &CMatrix) -> CMatrix {
        let idx = [0usize, 1, 3, 4];
        CMatrix::from_fn(4, 4, |r, c| u[(idx[r], idx[c])])
    }

    #[test]
    fn cphase_examples() {
        let diag = |t: f64| {
            let mut m = CMatrix::identity(4, 4);
            m[(3, 3)] = cis(t);
            m
        };
        for (theta, beta2) in [(PI, 0.0), (0.0, PI), (PI / 2.0, PI / 2.0)] {
            let (pulses, u) = cphase_from_pulses(theta, (0, 1), Subspace::Swap20, 61.0).unwrap();
            assert_eq!(pulses[0].flux_phase, 0.0);
            assert!((normalize_angle(pulses[1].flux_phase - beta2)).abs() < 1e-12);
            assert!(max_abs_diff(&qubit_block(&u), &diag(theta)) < 1e-12);
        }
    }

    #[test]
    fn effective_coupling_examples() {
        let p = CouplingParams { g_mhz: 10.0, epsilon_mhz: 0.0, omega_m_mhz: 100.0, n: 0, beta_n: 0.3 };
        let g = effective_coupling(&p).unwrap();
        assert!((g - cis(-0.3) * 10.0).norm() < 1e-14);
        let p2 = CouplingParams { n: 2, ..p };
        assert_eq!(effective_coupling(&p2).unwrap().norm(), 0.0);
        let bad = CouplingParams { omega_m_mhz: 0.0, ..p };
        assert!(effective_coupling(&bad).is_err());
    }

    #[test]
    fn rwa_zero_time_is_identity() {
        let p = CouplingParams { g_mhz: 5.0, epsilon_mhz: 50.0, omega_m_mhz: 100.0, n: 1, beta_n: 0.0 };
        let u = rwa_evolution(&p, 0.0, 0.2).unwrap();
        assert_eq!(u, CMatrix::identity(2, 2));
        assert!(rwa_evolution(&p, -1.0, 0.0).is_err());
    }

    #[test]
    fn duration_scales_inversely_with_coupling() {
        let p = CouplingParams { g_mhz: 5.0, epsilon_mhz: 50.0, omega_m_mhz: 100.0, n: 1, beta_n: 0.0 };
        let t1 = pulse_duration(&p).unwrap();
        let t2 = pulse_duration(&CouplingParams { g_mhz: 10.0, ..p }).unwrap();
        assert!((t1 / t2 - 2.0).abs() < 1e-12);
        let zero = CouplingParams { epsilon_mhz: 0.0, ..p };
        assert!(matches!(pulse_duration(&zero), Err(Error::ZeroCoupling)));
    }

    #[test]
    fn first_sideband_coupling_matches_series() {
        // J_1(x) = x/2 - x^3/16 + x^5/384 - ...
        let x: f64 = 0.2;
        let series = x / 2.0 - x.powi(3) / 16.0 + x.powi(5) / 384.0 - x.powi(7) / 18432.0;
        let p = CouplingParams { g_mhz: 1.0, epsilon_mhz: 20.0, omega_m_mhz: 100.0, n: 1, beta_n: 0.0 };
        assert!((effective_coupling(&p).unwrap().re - series).abs() < 1e-10);
    }

    #[test]
    fn rwa_matches_closed_form() {
        let p = CouplingParams { g_mhz: 7.0, epsilon_mhz: 120.0, omega_m_mhz: 100.0, n: 1, beta_n: 0.0 };
        let omega = rabi_rate(&p).unwrap();
        for &(t, beta) in &[(13.0, 0.0), (40.0, 1.1), (95.0, -2.0)] {
            let u = rwa_evolution(&p, t, beta).unwrap();
            let (c, s) = ((omega * t).cos(), (omega * t).sin());
            let mut expected = CMatrix::identity(2, 2) * c64(c, 0.0);
            expected[(1, 0)] = c64(0.0, -s) * cis(beta);
            expected[(0, 1)] = c64(0.0, -s) * cis(-beta);
            assert!(max_abs_diff(&u, &expected) < 1e-9);
        }
    }

    #[test]
    fn half_swap_reproduces_iswap_block() {
        let g = coupling_for_duration(61.0).unwrap();
        assert!((g - 2.898).abs() < 1e-3);
        let p = CouplingParams { g_mhz: g, epsilon_mhz: 0.0, omega_m_mhz: 1.0, n: 0, beta_n: 0.0 };
        let t = pulse_duration(&p).unwrap();
        assert!((t - 61.0).abs() < 1e-9);
        let u = rwa_evolution(&p, t, 0.7).unwrap();
        let full = iswap_unitary(Subspace::Swap02, 0.7);
        assert!((u[(1, 0)] - full[(2, 4)]).norm() < 1e-9);
        assert!((u[(0, 1)] - full[(4, 2)]).norm() < 1e-9);
        assert!(u[(0, 0)].norm() < 1e-9);
    }

    #[test]
    fn subspace_parsing() {
        assert_eq!("02".parse::<Subspace>().unwrap(), Subspace::Swap02);
        assert_eq!("SWAP20".parse::<Subspace>().unwrap(), Subspace::Swap20);
        assert!("11".parse::<Subspace>().is_err());
    }

    #[test]
    fn flux_pulse_validation() {
        assert!(FluxPulse::new((0, 1), Subspace::Swap02, 0.0, 0.0).is_err());
        let p = FluxPulse::new((0, 1), Subspace::Swap02, 3.0 * PI, 10.0).unwrap();
        assert!((p.flux_phase - PI).abs() < 1e-12);
        let q = FluxPulse::new((0, 1), Subspace::Swap02, -PI, 10.0).unwrap();
        assert!((q.flux_phase - PI).abs() < 1e-12);
    }
}
