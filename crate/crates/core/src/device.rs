//! Device parameters: per-qubit frequencies and coherence times plus the
//! calibrated two-qubit interaction on each edge.
//!
//! The on-disk format is one JSON document:
//!
//! ```json
//! {
//!   "name": "optional label",
//!   "rise_ns": 16.0,
//!   "pad_ns": 16.0,
//!   "qubits": [{ "id": 10, "f01_ghz": 4.791, "f12_ghz": 4.585,
//!                "t1_1_us": 33.7, "t1_2_us": 16.6, "t2_01_us": 22.0, "t2_12_us": 9.4,
//!                "flux_tunable": true }],
//!   "edges": [{ "pair": [10, 11], "interaction": "SWAP20", "pulse_ns": 61.0,
//!               "total_cphase_ns": 186.0, "cphase_fidelity": 0.977 }]
//! }
//! ```
//!
//! Every numeric field may carry an uncertainty sibling with an `_err` suffix.
//! Uncertainties are kept for reporting only.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::pulse::Subspace;

const DEFAULT_DEVICE: &str = include_str!("../data/default_device.json");

pub const DEFAULT_RISE_NS: f64 = 16.0;
pub const DEFAULT_PAD_NS: f64 = 16.0;

/// Slack allowed by the `T2 <= 2 T1` physicality checks, in microseconds.
const PHYSICALITY_SLACK_US: f64 = 1e-6;
/// Slack between the quoted CPHASE time and the computed pulse windows, in ns.
const TIMING_SLACK_NS: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QubitParams {
    pub id: u32,
    pub f01_ghz: f64,
    pub f12_ghz: f64,
    /// Relaxation time of `|1>`.
    pub t1_1_us: f64,
    /// Relaxation time of `|2>`.
    pub t1_2_us: f64,
    pub t2_01_us: f64,
    pub t2_12_us: f64,
    pub flux_tunable: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f01_ghz_err: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f12_ghz_err: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t1_1_us_err: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t1_2_us_err: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t2_01_us_err: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t2_12_us_err: Option<f64>,
}

impl QubitParams {
    /// Fixed-frequency qubit with the given coherence times and no uncertainties.
    pub fn new(id: u32, t1_1_us: f64, t1_2_us: f64, t2_01_us: f64, t2_12_us: f64) -> Self {
        Self {
            id,
            f01_ghz: 5.0,
            f12_ghz: 4.8,
            t1_1_us,
            t1_2_us,
            t2_01_us,
            t2_12_us,
            flux_tunable: false,
            f01_ghz_err: None,
            f12_ghz_err: None,
            t1_1_us_err: None,
            t1_2_us_err: None,
            t2_01_us_err: None,
            t2_12_us_err: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let q = self.id;
        let times = [
            ("t1_1_us", self.t1_1_us),
            ("t1_2_us", self.t1_2_us),
            ("t2_01_us", self.t2_01_us),
            ("t2_12_us", self.t2_12_us),
        ];
        for (name, v) in times {
            // infinite times are allowed and mean "no decay"
            if !(v > 0.0) {
                return Err(Error::Invariant {
                    constraint: format!("qubit {q}: {name} > 0"),
                    detail: format!("{name} = {v}"),
                });
            }
        }
        for (name, v) in [("f01_ghz", self.f01_ghz), ("f12_ghz", self.f12_ghz)] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::Invariant {
                    constraint: format!("qubit {q}: {name} > 0"),
                    detail: format!("{name} = {v}"),
                });
            }
        }
        if self.t2_01_us > 2.0 * self.t1_1_us + PHYSICALITY_SLACK_US {
            return Err(Error::Invariant {
                constraint: format!("qubit {q}: T2_01 <= 2 T1_1"),
                detail: format!("T2_01 = {} us, T1_1 = {} us", self.t2_01_us, self.t1_1_us),
            });
        }
        if self.t2_12_us > 2.0 * self.t1_2_us + PHYSICALITY_SLACK_US {
            return Err(Error::Invariant {
                constraint: format!("qubit {q}: T2_12 <= 2 T1_2"),
                detail: format!("T2_12 = {} us, T1_2 = {} us", self.t2_12_us, self.t1_2_us),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeParams {
    pub pair: (u32, u32),
    /// Which qutrit of `pair` is promoted to `|2>`.
    pub interaction: Subspace,
    pub pulse_ns: f64,
    pub total_cphase_ns: f64,
    pub cphase_fidelity: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cphase_fidelity_err: Option<f64>,
}

impl EdgeParams {
    /// The same edge described from the other end.
    pub fn reversed(&self) -> Self {
        Self { pair: (self.pair.1, self.pair.0), interaction: self.interaction.reversed(), ..self.clone() }
    }

    /// Qubit id that visits `|2>` during this edge's pulses.
    pub fn promoted_qubit(&self) -> u32 {
        match self.interaction {
            Subspace::Swap02 => self.pair.1,
            Subspace::Swap20 => self.pair.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceModel {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default = "default_rise")]
    pub rise_ns: f64,
    #[serde(default = "default_pad")]
    pub pad_ns: f64,
    pub qubits: Vec<QubitParams>,
    pub edges: Vec<EdgeParams>,
}

fn default_rise() -> f64 {
    DEFAULT_RISE_NS
}

fn default_pad() -> f64 {
    DEFAULT_PAD_NS
}

fn schema_error(field: impl Into<String>, err: impl std::fmt::Display) -> Error {
    Error::Schema { field: field.into(), message: err.to_string() }
}

impl DeviceModel {
    /// The bundled three-qubit model (qubits 10, 11, 12).
    pub fn default_model() -> Self {
        Self::from_json_str(DEFAULT_DEVICE).expect("bundled device file is valid")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    /// Parses and validates. Schema errors name the offending field.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let root: Value = serde_json::from_str(text).map_err(|e| schema_error("<document>", e))?;
        let obj = root.as_object().ok_or_else(|| schema_error("<document>", "expected a JSON object"))?;
        for key in obj.keys() {
            if !matches!(key.as_str(), "name" | "rise_ns" | "pad_ns" | "qubits" | "edges") {
                return Err(schema_error(key.clone(), "unknown field"));
            }
        }
        let section = |key: &str| -> Result<&Vec<Value>> {
            obj.get(key)
                .ok_or_else(|| schema_error(key, "missing field"))?
                .as_array()
                .ok_or_else(|| schema_error(key, "expected an array"))
        };
        let qubits = section("qubits")?
            .iter()
            .enumerate()
            .map(|(k, v)| {
                QubitParams::deserialize(v).map_err(|e| schema_error(format!("qubits[{k}]"), e))
            })
            .collect::<Result<Vec<_>>>()?;
        let edges = section("edges")?
            .iter()
            .enumerate()
            .map(|(k, v)| EdgeParams::deserialize(v).map_err(|e| schema_error(format!("edges[{k}]"), e)))
            .collect::<Result<Vec<_>>>()?;
        let number = |key: &str, default: f64| -> Result<f64> {
            match obj.get(key) {
                None => Ok(default),
                Some(v) => v.as_f64().ok_or_else(|| schema_error(key, "expected a number")),
            }
        };
        let name = match obj.get("name") {
            None | Some(Value::Null) => None,
            Some(Value::String(s)) => Some(s.clone()),
            Some(_) => return Err(schema_error("name", "expected a string")),
        };
        let model = Self {
            name,
            rise_ns: number("rise_ns", DEFAULT_RISE_NS)?,
            pad_ns: number("pad_ns", DEFAULT_PAD_NS)?,
            qubits,
            edges,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rise_ns < 0.0 || self.pad_ns < 0.0 {
            return Err(Error::Invariant {
                constraint: "rise_ns >= 0 and pad_ns >= 0".into(),
                detail: format!("rise {} ns, pad {} ns", self.rise_ns, self.pad_ns),
            });
        }
        let mut seen = std::collections::BTreeSet::new();
        for q in &self.qubits {
            if !seen.insert(q.id) {
                return Err(Error::Invariant { constraint: "unique qubit ids".into(), detail: format!("{} repeated", q.id) });
            }
            q.validate()?;
        }
        let mut pairs = std::collections::BTreeSet::new();
        for e in &self.edges {
            let (a, b) = e.pair;
            for id in [a, b] {
                if !seen.contains(&id) {
                    return Err(Error::Invariant {
                        constraint: "edge endpoints are declared qubits".into(),
                        detail: format!("edge ({a}, {b}) references qubit {id}"),
                    });
                }
            }
            if a == b || !pairs.insert((a.min(b), a.max(b))) {
                return Err(Error::Invariant {
                    constraint: "edges are distinct pairs of distinct qubits".into(),
                    detail: format!("edge ({a}, {b})"),
                });
            }
            if !(e.pulse_ns > 0.0) {
                return Err(Error::Invariant {
                    constraint: format!("edge ({a}, {b}): pulse_ns > 0"),
                    detail: format!("pulse_ns = {}", e.pulse_ns),
                });
            }
            if !(e.cphase_fidelity > 0.0 && e.cphase_fidelity <= 1.0) {
                return Err(Error::Invariant {
                    constraint: format!("edge ({a}, {b}): 0 < cphase_fidelity <= 1"),
                    detail: format!("cphase_fidelity = {}", e.cphase_fidelity),
                });
            }
            let expected = 2.0 * self.pulse_window_ns(e.pulse_ns);
            if (e.total_cphase_ns - expected).abs() > TIMING_SLACK_NS {
                return Err(Error::Invariant {
                    constraint: format!("edge ({a}, {b}): total_cphase_ns = 2 (pulse_ns + rise_ns + pad_ns)"),
                    detail: format!("total {} ns, expected {expected} ns", e.total_cphase_ns),
                });
            }
        }
        Ok(())
    }

    /// Copy with new rise/pad times; quoted CPHASE totals are recomputed.
    pub fn with_timing(&self, rise_ns: f64, pad_ns: f64) -> Result<Self> {
        let mut m = self.clone();
        m.rise_ns = rise_ns;
        m.pad_ns = pad_ns;
        for e in &mut m.edges {
            e.total_cphase_ns = 2.0 * (e.pulse_ns + rise_ns + pad_ns);
        }
        m.validate()?;
        Ok(m)
    }

    /// Wall-clock exposure of one pulse, including rise/fall and padding.
    pub fn pulse_window_ns(&self, pulse_ns: f64) -> f64 {
        pulse_ns + self.rise_ns + self.pad_ns
    }

    pub fn qubit(&self, id: u32) -> Option<&QubitParams> {
        self.qubits.iter().find(|q| q.id == id)
    }

    /// Edge between `a` and `b`, oriented so that `pair == (a, b)`.
    pub fn edge(&self, a: u32, b: u32) -> Result<EdgeParams> {
        self.edges
            .iter()
            .find_map(|e| {
                if e.pair == (a, b) {
                    Some(e.clone())
                } else if e.pair == (b, a) {
                    Some(e.reversed())
                } else {
                    None
                }
            })
            .ok_or(Error::MissingEdge(a, b))
    }

    /// Deployed interaction per edge, in the orientation stored in the file.
    pub fn edge_types(&self) -> BTreeMap<(u32, u32), Subspace> {
        self.edges.iter().map(|e| (e.pair, e.interaction)).collect()
    }

    /// Both edges of a three-qubit chain, oriented along the chain.
    pub fn chain_edges(&self, chain: &[u32]) -> Result<[EdgeParams; 2]> {
        check_chain_shape(chain)?;
        Ok([self.edge(chain[0], chain[1])?, self.edge(chain[1], chain[2])?])
    }

    /// Qubit parameters for each site of a chain.
    pub fn chain_qubits(&self, chain: &[u32]) -> Result<Vec<QubitParams>> {
        check_chain_shape(chain)?;
        chain
            .iter()
            .map(|&id| {
                self.qubit(id).cloned().ok_or_else(|| Error::InvalidChain(format!("qubit {id} is not in the device model")))
            })
            .collect()
    }

    /// First three-qubit chain `(a, b, c)` along the edge list, if the edges form one.
    pub fn default_chain(&self) -> Result<[u32; 3]> {
        for e1 in &self.edges {
            for e2 in &self.edges {
                if e1 == e2 {
                    continue;
                }
                for (x, y) in [(e1.pair.0, e1.pair.1), (e1.pair.1, e1.pair.0)] {
                    for (u, v) in [(e2.pair.0, e2.pair.1), (e2.pair.1, e2.pair.0)] {
                        if y == u && x != v {
                            return Ok([x, y, v]);
                        }
                    }
                }
            }
        }
        Err(Error::InvalidChain("device has no pair of adjacent edges".into()))
    }
}

pub(crate) fn check_chain_shape(chain: &[u32]) -> Result<()> {
    if chain.len() != 3 {
        return Err(Error::InvalidChain(format!("expected three qubit ids, got {}", chain.len())));
    }
    if chain[0] == chain[1] || chain[1] == chain[2] || chain[0] == chain[2] {
        return Err(Error::InvalidChain(format!("repeated qubit in chain {chain:?}")));
    }
    Ok(())
}

/// Duration of the four-pulse sequence on `chain`: two pulse windows per edge.
pub fn total_ccphase_time(model: &DeviceModel, chain: &[u32]) -> Result<f64> {
    let [e01, e12] = model.chain_edges(chain)?;
    Ok(2.0 * model.pulse_window_ns(e01.pulse_ns) + 2.0 * model.pulse_window_ns(e12.pulse_ns))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_model_values() {
        let m = DeviceModel::default_model();
        let q11 = m.qubit(11).unwrap();
        assert_eq!(q11.f01_ghz, 3.247);
        assert_eq!(q11.t2_12_us, 1.6);
        assert!(!q11.flux_tunable);
        assert!(m.qubit(10).unwrap().flux_tunable);
        let e = m.edge(10, 11).unwrap();
        assert_eq!(e.interaction, Subspace::Swap20);
        assert_eq!(e.total_cphase_ns, 2.0 * (61.0 + 16.0 + 16.0));
    }

    #[test]
    fn reversed_edge_flips_interaction() {
        let m = DeviceModel::default_model();
        let e = m.edge(11, 10).unwrap();
        assert_eq!(e.pair, (11, 10));
        assert_eq!(e.interaction, Subspace::Swap02);
        assert_eq!(e.promoted_qubit(), 10);
    }

    #[test]
    fn total_time() {
        let m = DeviceModel::default_model();
        assert_eq!(total_ccphase_time(&m, &[10, 11, 12]).unwrap(), 402.0);
        let bare = m.with_timing(0.0, 0.0).unwrap();
        assert_eq!(total_ccphase_time(&bare, &[10, 11, 12]).unwrap(), 274.0);
        assert!(matches!(total_ccphase_time(&m, &[10, 11]), Err(Error::InvalidChain(_))));
        assert!(matches!(total_ccphase_time(&m, &[10, 12, 11]), Err(Error::MissingEdge(10, 12))));
    }

    #[test]
    fn default_chain_found() {
        assert_eq!(DeviceModel::default_model().default_chain().unwrap(), [10, 11, 12]);
    }
}
