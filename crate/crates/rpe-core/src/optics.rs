//! Photonic elements: sources, beam splitters, phase shifters, detectors.
//!
//! The beam splitter follows the symmetric convention in which transmission
//! keeps the amplitude real and reflection multiplies by i:
//! ∣v⟩ → (∣v⟩ + i∣u⟩)/√2 and ∣u⟩ → (∣u⟩ + i∣v⟩)/√2 when acting in place on
//! the mode pair (u, v). Multi-photon occupations evolve by the standard
//! bosonic lift of that single-photon map.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Result, SimError};
use crate::fock::{BasisKet, PureState, StateSpace, SubsystemKind};

fn require_mode(space: &StateSpace, name: &str) -> Result<usize> {
    let idx = space.index_of(name)?;
    let label = space.label(idx);
    if label.kind() != SubsystemKind::PhotonMode {
        return Err(SimError::KindMismatch {
            name: name.to_string(),
            expected: "photon mode",
            found: label.kind().describe(),
        });
    }
    Ok(idx)
}

/// Two-mode beam-splitter convention: real transmission amplitude plus a
/// unimodular reflection phase. The induced single-photon map
/// [[t, r], [r, t]] must be unitary, which pins the reflection phase to ±i.
#[derive(Clone, Copy, Debug)]
pub struct BeamSplitterConvention {
    transmission: f64,
    reflection: Complex64,
}

impl BeamSplitterConvention {
    /// Custom convention. `transmission` is the real amplitude t ∈ (0, 1);
    /// the reflection amplitude is `reflection_phase·√(1−t²)`.
    pub fn new(transmission: f64, reflection_phase: Complex64) -> Result<Self> {
        if !(0.0..1.0).contains(&transmission) || transmission <= 0.0 {
            return Err(SimError::InvalidParameter(format!(
                "transmission amplitude {transmission} outside (0, 1)"
            )));
        }
        if (reflection_phase.norm() - 1.0).abs() > 1e-12 {
            return Err(SimError::InvalidParameter(
                "reflection phase must be unimodular".to_string(),
            ));
        }
        let reflection = reflection_phase * (1.0 - transmission * transmission).sqrt();
        let conv = BeamSplitterConvention {
            transmission,
            reflection,
        };
        // Row orthogonality of [[t, r], [r, t]]: 2·t·Re(r) must vanish.
        let off = 2.0 * transmission * reflection.re;
        if off.abs() > 1e-12 {
            return Err(SimError::NonUnitaryConvention(format!(
                "t·r̄ + r·t̄ = {off:e}; reflection phase must be purely imaginary"
            )));
        }
        Ok(conv)
    }

    /// Balanced 50:50 splitter with reflection phase i.
    pub fn balanced() -> Self {
        BeamSplitterConvention {
            transmission: std::f64::consts::FRAC_1_SQRT_2,
            reflection: Complex64::new(0.0, std::f64::consts::FRAC_1_SQRT_2),
        }
    }

    pub fn transmission(&self) -> f64 {
        self.transmission
    }

    pub fn reflection(&self) -> Complex64 {
        self.reflection
    }

    /// The single-photon map on (mode_a, mode_b), row-major.
    pub fn single_photon_matrix(&self) -> [[Complex64; 2]; 2] {
        let t = Complex64::new(self.transmission, 0.0);
        [[t, self.reflection], [self.reflection, t]]
    }

    pub fn describe(&self) -> String {
        format!(
            "symmetric beam splitter, t={}, r={}{:+}i",
            self.transmission, self.reflection.re, self.reflection.im
        )
    }
}

impl Default for BeamSplitterConvention {
    fn default() -> Self {
        Self::balanced()
    }
}

/// Weak coherent source amplitudes: q∣0⟩ + p∣1⟩ with p² + q² = 1.
#[derive(Clone, Copy, Debug)]
pub struct WeakSourceParams {
    p: f64,
    q: f64,
}

impl WeakSourceParams {
    /// Build from the single-photon amplitude p ∈ (0, 1]. p = 1 is accepted
    /// as the degenerate deterministic source, with a warning.
    pub fn new(p: f64) -> Result<Self> {
        if !p.is_finite() || p <= 0.0 || p > 1.0 {
            return Err(SimError::InvalidParameter(format!(
                "single-photon amplitude p = {p} outside (0, 1]"
            )));
        }
        if p == 1.0 {
            log::warn!(
                "weak source with p = 1 emits a photon every run; interference terms vanish"
            );
        }
        Ok(WeakSourceParams {
            p,
            q: (1.0 - p * p).sqrt(),
        })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }
}

/// ∣1⟩ on `mode`, everything else in its ground configuration.
pub fn single_photon(space: &Arc<StateSpace>, mode: &str) -> Result<PureState> {
    let idx = require_mode(space, mode)?;
    PureState::basis_state(space, space.vacuum_ket().with(idx, 1))
}

/// q∣0⟩ + p∣1⟩ on `mode`, everything else in its ground configuration.
pub fn weak_source(
    space: &Arc<StateSpace>,
    mode: &str,
    params: &WeakSourceParams,
) -> Result<PureState> {
    let idx = require_mode(space, mode)?;
    let vac = space.vacuum_ket();
    PureState::from_terms(
        space,
        vec![
            (vac.clone(), Complex64::new(params.q, 0.0)),
            (vac.with(idx, 1), Complex64::new(params.p, 0.0)),
        ],
    )
}

fn factorial(n: u32) -> f64 {
    (1..=n as u64).map(|k| k as f64).product::<f64>().max(1.0)
}

fn binomial(n: u32, k: u32) -> f64 {
    factorial(n) / (factorial(k) * factorial(n - k))
}

/// Apply the two-mode beam splitter in place on (mode_a, mode_b).
///
/// Acting on creation operators: a†ₐ → t·a†ₐ + r·a†_b and
/// a†_b → t·a†_b + r·a†ₐ. Kets whose output occupation would exceed either
/// mode's truncation are an error, so callers must keep total photon number
/// within the configured maximum.
pub fn beam_splitter(
    state: &PureState,
    mode_a: &str,
    mode_b: &str,
    conv: &BeamSplitterConvention,
) -> Result<PureState> {
    let space = state.space();
    let ia = require_mode(space, mode_a)?;
    let ib = require_mode(space, mode_b)?;
    if ia == ib {
        return Err(SimError::InvalidParameter(format!(
            "beam splitter needs two distinct modes, got `{mode_a}` twice"
        )));
    }
    let dim_a = space.label(ia).dim() as u32;
    let dim_b = space.label(ib).dim() as u32;
    let t = Complex64::new(conv.transmission, 0.0);
    let r = conv.reflection;

    let mut terms: BTreeMap<BasisKet, Complex64> = BTreeMap::new();
    for (ket, amp) in state.terms() {
        let na = ket.get(ia) as u32;
        let nb = ket.get(ib) as u32;
        let ntot = na + nb;
        if ntot == 0 {
            *terms.entry(ket.clone()).or_insert(Complex64::new(0.0, 0.0)) += amp;
            continue;
        }
        if ntot >= dim_a || ntot >= dim_b {
            let (mode, max) = if ntot >= dim_a {
                (mode_a, dim_a - 1)
            } else {
                (mode_b, dim_b - 1)
            };
            return Err(SimError::TruncationOverflow {
                mode: mode.to_string(),
                needed: ntot,
                max,
            });
        }
        // Expand (t·a†ₐ' + r·a†_b')^na (r·a†ₐ' + t·a†_b')^nb on vacuum.
        let input_norm = (factorial(na) * factorial(nb)).sqrt();
        for m in 0..=ntot {
            let mut coeff = Complex64::new(0.0, 0.0);
            for j in 0..=m.min(na) {
                let k = m - j;
                if k > nb {
                    continue;
                }
                coeff += Complex64::new(binomial(na, j) * binomial(nb, k), 0.0)
                    * t.powu(j)
                    * r.powu(na - j)
                    * r.powu(k)
                    * t.powu(nb - k);
            }
            if coeff.norm() == 0.0 {
                continue;
            }
            let output_norm = (factorial(m) * factorial(ntot - m)).sqrt();
            let out_amp = amp * coeff * (output_norm / input_norm);
            let out_ket = ket.with(ia, m as u8).with(ib, (ntot - m) as u8);
            *terms.entry(out_ket).or_insert(Complex64::new(0.0, 0.0)) += out_amp;
        }
    }
    Ok(PureState::from_raw(Arc::clone(space), terms))
}

/// Path-length phase: each ket gains e^{i·n·φ} where n is the occupation of
/// `mode`.
pub fn phase_shift(state: &PureState, mode: &str, phi: f64) -> Result<PureState> {
    let idx = require_mode(state.space(), mode)?;
    let mut terms = BTreeMap::new();
    for (ket, amp) in state.terms() {
        let n = ket.get(idx) as f64;
        terms.insert(ket.clone(), amp * Complex64::from_polar(1.0, n * phi));
    }
    Ok(PureState::from_raw(Arc::clone(state.space()), terms))
}

/// One detection outcome: photon count on the measured mode, its Born
/// probability (absolute, relative to a unit-mass experiment), and the
/// normalized conditional state.
#[derive(Clone, Debug)]
pub struct Detection {
    pub count: u8,
    pub probability: f64,
    pub conditional: PureState,
}

/// Born-rule decomposition of a state by the occupation of one mode.
/// Probabilities sum to the state's squared norm.
pub fn detect(state: &PureState, mode: &str) -> Result<Vec<Detection>> {
    require_mode(state.space(), mode)?;
    let outcomes = decompose(state, &[mode])?;
    Ok(outcomes
        .into_iter()
        .map(|(outcome, probability, conditional)| Detection {
            count: outcome[0],
            probability,
            conditional,
        })
        .collect())
}

/// Born-rule decomposition over the joint configuration of several
/// subsystems (any kind). Returns (configuration, probability, normalized
/// conditional state) for every configuration with nonzero mass, in
/// ascending configuration order.
pub fn decompose(state: &PureState, subsystems: &[&str]) -> Result<Vec<(Vec<u8>, f64, PureState)>> {
    let idx: Vec<usize> = subsystems
        .iter()
        .map(|name| state.space().index_of(name))
        .collect::<Result<_>>()?;
    let mut buckets: BTreeMap<Vec<u8>, Vec<(BasisKet, Complex64)>> = BTreeMap::new();
    for (ket, amp) in state.terms() {
        let outcome: Vec<u8> = idx.iter().map(|&i| ket.get(i)).collect();
        buckets
            .entry(outcome)
            .or_default()
            .push((ket.clone(), *amp));
    }
    let mut out = Vec::new();
    for (outcome, terms) in buckets {
        let mass: f64 = terms.iter().map(|(_, a)| a.norm_sqr()).sum();
        if mass <= 0.0 {
            continue;
        }
        let scale = 1.0 / mass.sqrt();
        let conditional = PureState::from_raw(
            Arc::clone(state.space()),
            terms.into_iter().map(|(k, a)| (k, a * scale)).collect(),
        );
        out.push((outcome, mass, conditional));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::SubsystemLabel;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn uv_space(n_max: u32) -> Arc<StateSpace> {
        StateSpace::new(vec![
            SubsystemLabel::photon_mode("u", n_max),
            SubsystemLabel::photon_mode("v", n_max),
        ])
        .unwrap()
    }

    #[test]
    fn single_photon_occupies_exactly_one_mode() {
        let space = uv_space(1);
        let state = single_photon(&space, "u").unwrap();
        assert!((state.norm_sq() - 1.0).abs() < 1e-15);
        assert_eq!(state.num_terms(), 1);
        assert!((state.amplitude(&BasisKet::new(vec![1, 0])) - c(1.0, 0.0)).norm() < 1e-15);
        assert!(matches!(
            single_photon(&space, "w"),
            Err(SimError::UnknownSubsystem(_))
        ));
    }

    #[test]
    fn weak_source_amplitudes() {
        let space = uv_space(1);
        let params = WeakSourceParams::new(0.1).unwrap();
        let state = weak_source(&space, "u", &params).unwrap();
        assert!((state.amplitude(&BasisKet::new(vec![0, 0])).re - 0.99f64.sqrt()).abs() < 1e-12);
        assert!((state.amplitude(&BasisKet::new(vec![1, 0])).re - 0.1).abs() < 1e-12);
        assert!(WeakSourceParams::new(0.0).is_err());
        assert!(WeakSourceParams::new(1.5).is_err());
        // Boundary p = 1 is accepted (deterministic source).
        assert!(WeakSourceParams::new(1.0).is_ok());
    }

    #[test]
    fn two_weak_sources_have_equal_single_photon_amplitudes() {
        let su = StateSpace::new(vec![SubsystemLabel::photon_mode("u", 1)]).unwrap();
        let sv = StateSpace::new(vec![SubsystemLabel::photon_mode("v", 1)]).unwrap();
        let params = WeakSourceParams::new(0.2).unwrap();
        let state = weak_source(&su, "u", &params)
            .unwrap()
            .tensor(&weak_source(&sv, "v", &params).unwrap())
            .unwrap();
        let pq = params.p() * params.q();
        assert!((state.amplitude(&BasisKet::new(vec![1, 0])).re - pq).abs() < 1e-12);
        assert!((state.amplitude(&BasisKet::new(vec![0, 1])).re - pq).abs() < 1e-12);
    }

    #[test]
    fn beam_splitter_single_photon_rule() {
        // ∣1⟩_v∣0⟩_u → (∣v⟩ + i∣u⟩)/√2: transmitted amplitude stays on the
        // same slot, reflection picks up i.
        let space = uv_space(1);
        let state = single_photon(&space, "v").unwrap();
        let out = beam_splitter(&state, "u", "v", &BeamSplitterConvention::balanced()).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((out.amplitude(&BasisKet::new(vec![0, 1])) - c(s, 0.0)).norm() < 1e-12);
        assert!((out.amplitude(&BasisKet::new(vec![1, 0])) - c(0.0, s)).norm() < 1e-12);
        assert!((out.norm_sq() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn beam_splitter_on_vacuum_is_identity() {
        let space = uv_space(1);
        let state = PureState::vacuum(&space);
        let out = beam_splitter(&state, "u", "v", &BeamSplitterConvention::balanced()).unwrap();
        assert!((out.amplitude(&BasisKet::new(vec![0, 0])) - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn hong_ou_mandel_cancels_coincidences() {
        let space = uv_space(2);
        let state = PureState::basis_state(&space, BasisKet::new(vec![1, 1])).unwrap();
        let out = beam_splitter(&state, "u", "v", &BeamSplitterConvention::balanced()).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!(out.amplitude(&BasisKet::new(vec![1, 1])).norm() < 1e-12);
        assert!((out.amplitude(&BasisKet::new(vec![2, 0])) - c(0.0, s)).norm() < 1e-12);
        assert!((out.amplitude(&BasisKet::new(vec![0, 2])) - c(0.0, s)).norm() < 1e-12);
        assert!((out.norm_sq() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn beam_splitter_overflow_is_an_error() {
        let space = uv_space(1);
        let state = PureState::basis_state(&space, BasisKet::new(vec![1, 1])).unwrap();
        assert!(matches!(
            beam_splitter(&state, "u", "v", &BeamSplitterConvention::balanced()),
            Err(SimError::TruncationOverflow { .. })
        ));
    }

    #[test]
    fn double_beam_splitter_is_swap_with_phase() {
        // Applying the balanced splitter twice equals the bosonic lift of
        // i·SWAP, never the identity. Brute-force check on the full two-mode
        // space with up to two photons.
        let space = uv_space(2);
        let conv = BeamSplitterConvention::balanced();
        for (na, nb) in [(0u8, 0u8), (0, 1), (1, 0), (1, 1), (2, 0), (0, 2)] {
            let state = PureState::basis_state(&space, BasisKet::new(vec![na, nb])).unwrap();
            let once = beam_splitter(&state, "u", "v", &conv).unwrap();
            let twice = beam_splitter(&once, "u", "v", &conv).unwrap();
            // i·SWAP lift: ∣na, nb⟩ → i^(na+nb) ∣nb, na⟩.
            let expected_ket = BasisKet::new(vec![nb, na]);
            let expected_amp = c(0.0, 1.0).powu((na + nb) as u32);
            assert!(
                (twice.amplitude(&expected_ket) - expected_amp).norm() < 1e-12,
                "failed for ({na},{nb})"
            );
            assert_eq!(twice.num_terms(), 1);
            if na != nb {
                assert!(twice.amplitude(&BasisKet::new(vec![na, nb])).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn nonimaginary_reflection_phase_is_rejected() {
        assert!(matches!(
            BeamSplitterConvention::new(std::f64::consts::FRAC_1_SQRT_2, c(1.0, 0.0)),
            Err(SimError::NonUnitaryConvention(_))
        ));
        assert!(BeamSplitterConvention::new(std::f64::consts::FRAC_1_SQRT_2, c(0.0, -1.0)).is_ok());
    }

    #[test]
    fn phase_shift_multiplies_by_occupation() {
        let space = uv_space(2);
        let state = PureState::basis_state(&space, BasisKet::new(vec![2, 0])).unwrap();
        let out = phase_shift(&state, "u", std::f64::consts::PI).unwrap();
        // Two photons: e^{2iπ} = 1.
        assert!((out.amplitude(&BasisKet::new(vec![2, 0])) - c(1.0, 0.0)).norm() < 1e-12);
        let one = single_photon(&space, "u").unwrap();
        let flipped = phase_shift(&one, "u", std::f64::consts::PI).unwrap();
        assert!((flipped.amplitude(&BasisKet::new(vec![1, 0])) - c(-1.0, 0.0)).norm() < 1e-12);
        let id = phase_shift(&one, "u", 0.0).unwrap();
        assert!((id.amplitude(&BasisKet::new(vec![1, 0])) - c(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn detect_splits_by_occupation() {
        let space = uv_space(1);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let state = PureState::from_terms(
            &space,
            vec![
                (BasisKet::new(vec![0, 0]), c(s, 0.0)),
                (BasisKet::new(vec![1, 0]), c(0.0, s)),
            ],
        )
        .unwrap();
        let outcomes = detect(&state, "u").unwrap();
        assert_eq!(outcomes.len(), 2);
        assert_eq!(outcomes[0].count, 0);
        assert!((outcomes[0].probability - 0.5).abs() < 1e-12);
        assert!((outcomes[1].probability - 0.5).abs() < 1e-12);
        assert!((outcomes[0].conditional.norm_sq() - 1.0).abs() < 1e-12);
        let total: f64 = outcomes.iter().map(|o| o.probability).sum();
        assert!((total - state.norm_sq()).abs() < 1e-12);
    }

    #[test]
    fn detect_vacuum_returns_zero_count() {
        let space = uv_space(1);
        let outcomes = detect(&PureState::vacuum(&space), "u").unwrap();
        assert_eq!(outcomes.len(), 1);
        assert_eq!(outcomes[0].count, 0);
        assert!((outcomes[0].probability - 1.0).abs() < 1e-15);
    }

    #[test]
    fn phase_shift_commutes_with_detection_on_other_modes() {
        let space = uv_space(1);
        let params = WeakSourceParams::new(0.6).unwrap();
        let state = weak_source(&space, "u", &params).unwrap();
        let conv = BeamSplitterConvention::balanced();
        let mixed = beam_splitter(&state, "u", "v", &conv).unwrap();
        let shifted = phase_shift(&mixed, "v", 1.234).unwrap();
        let before: Vec<f64> = detect(&mixed, "u")
            .unwrap()
            .iter()
            .map(|o| o.probability)
            .collect();
        let after: Vec<f64> = detect(&shifted, "u")
            .unwrap()
            .iter()
            .map(|o| o.probability)
            .collect();
        assert_eq!(before.len(), after.len());
        for (b, a) in before.iter().zip(after.iter()) {
            assert!((b - a).abs() < 1e-12);
        }
    }
}
