//! Structured experiment reports: exact event probabilities, post-selected
//! states, correlation figures, and sampled counts, all serializable to a
//! stable JSON layout.

use std::collections::BTreeMap;

use crate::error::{Result, SimError};
use crate::experiments::{ResolvedConfig, Scenario};
use crate::fock::{DensityMatrix, PureState};
use crate::measurement::ChshSetting;

/// One amplitude of a serialized state, keyed by its printable ket.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct KetAmplitude {
    pub ket: String,
    pub re: f64,
    pub im: f64,
}

/// A complex matrix entry.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ComplexEntry {
    pub re: f64,
    pub im: f64,
}

/// Dense density matrix over named subsystems, row-major.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DensityMatrixReport {
    pub subsystems: Vec<String>,
    pub matrix: Vec<Vec<ComplexEntry>>,
}

/// CHSH value together with the axes that produced it.
#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct ChshReport {
    pub settings: ChshSetting,
    pub value: f64,
}

/// Sampled outcome counts with everything needed to reproduce them.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SamplesReport {
    pub seed: u64,
    pub shots: u64,
    pub algorithm: String,
    pub counts: BTreeMap<String, u64>,
}

/// Conventions and environment echoed for auditability.
#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct Provenance {
    pub engine: String,
    pub version: String,
    pub beam_splitter: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub prep_convention: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub box_geometry: Option<String>,
    pub phase_autotuned: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub chsh_axes_policy: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rng: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub timestamp: Option<String>,
}

impl Provenance {
    pub fn new(beam_splitter: String) -> Self {
        Provenance {
            engine: "sparse state vector".to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            beam_splitter,
            prep_convention: None,
            box_geometry: None,
            phase_autotuned: false,
            chsh_axes_policy: None,
            rng: None,
            timestamp: None,
        }
    }
}

/// Full structured outcome of one experiment run.
#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct ExperimentReport {
    pub scenario: Scenario,
    pub config: ResolvedConfig,
    /// Exact event probabilities, keyed `p_<event>`. Derived conditional
    /// entries carry a `_given_*` suffix and sit outside the exclusive
    /// family.
    pub probabilities: BTreeMap<String, f64>,
    /// Post-selected states as amplitude lists, unit norm.
    pub conditional_states: BTreeMap<String, Vec<KetAmplitude>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub discard_probability: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub reduced_density_matrix: Option<DensityMatrixReport>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub chsh: Option<ChshReport>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub concurrence: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub samples: Option<SamplesReport>,
    pub provenance: Provenance,
}

impl ExperimentReport {
    /// Look up one probability by its full key.
    pub fn probability(&self, key: &str) -> Option<f64> {
        self.probabilities.get(key).copied()
    }

    /// Check that the named exclusive family sums to 1 within 1e-10 and
    /// every member lies in [0, 1] up to the same slack.
    pub fn check_family(&self, keys: &[&str]) -> Result<()> {
        let mut sum = 0.0;
        for key in keys {
            let p = self
                .probability(key)
                .ok_or_else(|| SimError::InvalidReport(format!("missing probability `{key}`")))?;
            if !(-1e-10..=1.0 + 1e-10).contains(&p) {
                return Err(SimError::InvalidReport(format!(
                    "`{key}` = {p} outside [0, 1]"
                )));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > 1e-10 {
            return Err(SimError::InvalidReport(format!(
                "family {keys:?} sums to {sum}, expected 1"
            )));
        }
        Ok(())
    }
}

/// Serialize a state's amplitudes with printable kets, in ket order.
pub fn serialize_state(state: &PureState) -> Vec<KetAmplitude> {
    state
        .terms()
        .map(|(ket, amp)| KetAmplitude {
            ket: state.space().format_ket(ket),
            re: amp.re,
            im: amp.im,
        })
        .collect()
}

/// Serialize a density matrix with its subsystem names.
pub fn serialize_density_matrix(rho: &DensityMatrix) -> DensityMatrixReport {
    let dim = rho.dim();
    DensityMatrixReport {
        subsystems: rho.labels().iter().map(|l| l.name().to_string()).collect(),
        matrix: (0..dim)
            .map(|i| {
                (0..dim)
                    .map(|j| {
                        let z = rho.entry(i, j);
                        ComplexEntry { re: z.re, im: z.im }
                    })
                    .collect()
            })
            .collect(),
    }
}
