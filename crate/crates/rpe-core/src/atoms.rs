//! Atom preparation, spin-box splitting and reunification, and the
//! absorptive photon–atom interaction.
//!
//! A two-level atom is prepared in x⁺ and split by a non-uniform magnetic
//! field into its spin-z components, one per box. The split leaves a factor
//! i on one component; which one is a convention ([`AtomPrep`]). One box of
//! each atom sits across a photon path: a photon crossing that box is
//! absorbed with unit efficiency. Absorption is tracked unitarily through a
//! flag subsystem, so discarded probability stays auditable rather than
//! assumed.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Result, SimError};
use crate::fock::{BasisKet, PureState, StateSpace, SubsystemKind, SubsystemLabel};

fn require_kind(space: &StateSpace, name: &str, kind: SubsystemKind) -> Result<usize> {
    let idx = space.index_of(name)?;
    let label = space.label(idx);
    if label.kind() != kind {
        return Err(SimError::KindMismatch {
            name: name.to_string(),
            expected: kind.describe(),
            found: label.kind().describe(),
        });
    }
    Ok(idx)
}

/// One spin-z box of a split atom. `Plus` is local index 0, `Minus` is 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpinZ {
    Plus,
    Minus,
}

impl SpinZ {
    pub fn index(self) -> u8 {
        match self {
            SpinZ::Plus => 0,
            SpinZ::Minus => 1,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            SpinZ::Plus => "plus",
            SpinZ::Minus => "minus",
        }
    }
}

/// Which spin-z component carries the imaginary factor after the field
/// split. `PhaseOnPlus` prepares (i·z⁺ + z⁻)/√2, `PhaseOnMinus` prepares
/// (i·z⁻ + z⁺)/√2. Both are superpositions of the same pair of boxes; they
/// differ only in where the split put its phase.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum AtomPrep {
    #[serde(rename = "phase_plus", alias = "eq1")]
    PhaseOnPlus,
    #[serde(rename = "phase_minus", alias = "eq8")]
    PhaseOnMinus,
}

impl AtomPrep {
    /// Amplitudes (on z⁺, on z⁻) of the prepared state.
    pub fn amplitudes(self) -> (Complex64, Complex64) {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        match self {
            AtomPrep::PhaseOnPlus => (Complex64::new(0.0, s), Complex64::new(s, 0.0)),
            AtomPrep::PhaseOnMinus => (Complex64::new(s, 0.0), Complex64::new(0.0, s)),
        }
    }

    /// The diagonal field-split map taking a reunited spin state into the
    /// boxed pair; the prepared state is this map applied to x⁺.
    pub fn split_map(self) -> DMatrix<Complex64> {
        let (plus, minus) = match self {
            AtomPrep::PhaseOnPlus => (Complex64::new(0.0, 1.0), Complex64::new(1.0, 0.0)),
            AtomPrep::PhaseOnMinus => (Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)),
        };
        DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![plus, minus]))
    }

    /// Inverse of [`AtomPrep::split_map`], used when the boxes are reunited.
    pub fn unite_map(self) -> DMatrix<Complex64> {
        let mut inv = self.split_map();
        for i in 0..2 {
            inv[(i, i)] = inv[(i, i)].conj();
        }
        inv
    }

    pub fn token(self) -> &'static str {
        match self {
            AtomPrep::PhaseOnPlus => "phase_plus",
            AtomPrep::PhaseOnMinus => "phase_minus",
        }
    }
}

/// Placement of one atom's intersecting box across a photon path, plus the
/// flag subsystem that records absorption for that atom.
#[derive(Clone, Debug)]
pub struct BoxGeometry {
    /// Two-level atom subsystem name.
    pub atom: String,
    /// Which of the atom's boxes lies across the photon path.
    pub intersecting_box: SpinZ,
    /// Photon mode blocked by that box.
    pub intersected_mode: String,
    /// Flag subsystem recording absorption by this atom.
    pub flag: String,
}

/// Prepared single-atom state over a fresh one-subsystem space.
pub fn prepare_atom(name: &str, prep: AtomPrep) -> Result<PureState> {
    let space = StateSpace::new(vec![SubsystemLabel::atom2(name)])?;
    let (on_plus, on_minus) = prep.amplitudes();
    PureState::from_terms(
        &space,
        vec![
            (BasisKet::new(vec![0]), on_plus),
            (BasisKet::new(vec![1]), on_minus),
        ],
    )
}

/// Let the photon cross the intersecting box. Every ket with at least one
/// photon on the intersected mode and the atom in that box loses one photon
/// and gets the atom's absorption flag set; all other kets pass through.
/// The map is an isometry on the photon+flag pair, so the norm is preserved
/// and absorbed branches stay in the state until explicitly discarded.
pub fn interact_absorb(state: &PureState, geometry: &BoxGeometry) -> Result<PureState> {
    let space = state.space();
    let mode = {
        let idx = space.index_of(&geometry.intersected_mode)?;
        if space.label(idx).kind() != SubsystemKind::PhotonMode {
            return Err(SimError::KindMismatch {
                name: geometry.intersected_mode.clone(),
                expected: "photon mode",
                found: space.label(idx).kind().describe(),
            });
        }
        idx
    };
    let atom = require_kind(space, &geometry.atom, SubsystemKind::Atom2)?;
    let flag = require_kind(space, &geometry.flag, SubsystemKind::Flag)?;
    let box_index = geometry.intersecting_box.index();

    let mut terms: BTreeMap<BasisKet, Complex64> = BTreeMap::new();
    for (ket, amp) in state.terms() {
        let n = ket.get(mode);
        let in_box = ket.get(atom) == box_index;
        if n >= 1 && in_box {
            if ket.get(flag) == 1 {
                return Err(SimError::AbsorptionConflict {
                    atom: geometry.atom.clone(),
                    action: "a second absorption",
                });
            }
            let target = ket.with(mode, n - 1).with(flag, 1);
            if state.amplitude(&target).norm() > 0.0 {
                // The untouched branch already occupies the target ket;
                // merging them would not be an isometry.
                return Err(SimError::AbsorptionConflict {
                    atom: geometry.atom.clone(),
                    action: "merging with an existing absorbed branch",
                });
            }
            *terms.entry(target).or_insert(Complex64::new(0.0, 0.0)) += amp;
        } else {
            *terms.entry(ket.clone()).or_insert(Complex64::new(0.0, 0.0)) += amp;
        }
    }
    Ok(PureState::from_raw(Arc::clone(space), terms))
}

/// Project onto the all-flags-clear sector. Returns the unnormalized
/// remainder together with the discarded probability mass.
pub fn discard_absorption(state: &PureState) -> Result<(PureState, f64)> {
    let space = state.space();
    let flags: Vec<usize> = (0..space.len())
        .filter(|&i| space.label(i).kind() == SubsystemKind::Flag)
        .collect();
    let (kept, removed) = state.project(|ket| flags.iter().all(|&f| ket.get(f) == 0));
    if kept.num_terms() == 0 {
        return Err(SimError::NothingRemains);
    }
    Ok((kept, removed))
}

/// Reunite the two boxes of an atom with the inverse field, undoing the
/// split phase of `prep`. Errors if any retained ket carries a set
/// absorption flag: reunification of an absorbed branch is undefined.
pub fn unite_boxes(state: &PureState, atom: &str, prep: AtomPrep) -> Result<PureState> {
    let space = state.space();
    require_kind(space, atom, SubsystemKind::Atom2)?;
    for i in 0..space.len() {
        if space.label(i).kind() == SubsystemKind::Flag {
            for (ket, _) in state.terms() {
                if ket.get(i) == 1 {
                    return Err(SimError::AbsorptionConflict {
                        atom: atom.to_string(),
                        action: "box reunification",
                    });
                }
            }
        }
    }
    state.apply_one_site(atom, &prep.unite_map())
}

/// Born decomposition over the two boxes of one atom: which box the atom is
/// found in, the outcome probability, and the normalized conditional state.
pub fn measure_box_position(state: &PureState, atom: &str) -> Result<Vec<(SpinZ, f64, PureState)>> {
    require_kind(state.space(), atom, SubsystemKind::Atom2)?;
    let outcomes = crate::optics::decompose(state, &[atom])?;
    Ok(outcomes
        .into_iter()
        .map(|(outcome, prob, conditional)| {
            let which = if outcome[0] == 0 {
                SpinZ::Plus
            } else {
                SpinZ::Minus
            };
            (which, prob, conditional)
        })
        .collect())
}

/// Three-level atom in its ∣0⟩ ground state, on a fresh space.
pub fn prepare_three_level(name: &str) -> Result<PureState> {
    let space = StateSpace::new(vec![SubsystemLabel::atom3(name)])?;
    PureState::basis_state(&space, BasisKet::new(vec![0]))
}

/// Weak laser pulse on the ∣0⟩→∣2⟩ transition:
/// ∣0⟩ → √(1−ε²)∣0⟩ + ε∣2⟩, with the rotation completed unitarily on the
/// {∣0⟩, ∣2⟩} block. ε = 0 is legal and leaves the atom untouched.
pub fn weak_excite(state: &PureState, atom: &str, epsilon: f64) -> Result<PureState> {
    if !(0.0..1.0).contains(&epsilon) {
        return Err(SimError::InvalidParameter(format!(
            "excitation amplitude ε = {epsilon} outside [0, 1)"
        )));
    }
    require_kind(state.space(), atom, SubsystemKind::Atom3)?;
    let c = (1.0 - epsilon * epsilon).sqrt();
    let mut op = DMatrix::<Complex64>::identity(3, 3);
    op[(0, 0)] = Complex64::new(c, 0.0);
    op[(2, 0)] = Complex64::new(epsilon, 0.0);
    op[(0, 2)] = Complex64::new(-epsilon, 0.0);
    op[(2, 2)] = Complex64::new(c, 0.0);
    state.apply_one_site(atom, &op)
}

/// Deterministic decay ∣2⟩ → ∣1⟩ with emission of one photon into the
/// atom's private mode; ground levels are untouched. Errors if the emitted
/// photon would exceed the mode truncation, or if the decay would merge
/// branches that are distinct before it.
pub fn decay_emit(state: &PureState, atom: &str, mode: &str) -> Result<PureState> {
    let space = state.space();
    let atom_idx = require_kind(space, atom, SubsystemKind::Atom3)?;
    let mode_idx = require_kind(space, mode, SubsystemKind::PhotonMode)?;
    let n_max = space.label(mode_idx).dim() as u8 - 1;

    let mut terms: BTreeMap<BasisKet, Complex64> = BTreeMap::new();
    for (ket, amp) in state.terms() {
        if ket.get(atom_idx) == 2 {
            let n = ket.get(mode_idx);
            if n >= n_max {
                return Err(SimError::TruncationOverflow {
                    mode: mode.to_string(),
                    needed: n as u32 + 1,
                    max: n_max as u32,
                });
            }
            let target = ket.with(atom_idx, 1).with(mode_idx, n + 1);
            if state.amplitude(&target).norm() > 0.0 {
                return Err(SimError::DecayConflict {
                    atom: atom.to_string(),
                });
            }
            *terms.entry(target).or_insert(Complex64::new(0.0, 0.0)) += amp;
        } else {
            *terms.entry(ket.clone()).or_insert(Complex64::new(0.0, 0.0)) += amp;
        }
    }
    Ok(PureState::from_raw(Arc::clone(space), terms))
}
