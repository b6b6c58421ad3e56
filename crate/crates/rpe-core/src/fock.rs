//! Labeled tensor-product Hilbert space with sparse pure states.
//!
//! A [`StateSpace`] is an ordered registry of named subsystems: truncated
//! photon modes, two-level atoms (spin boxes), three-level atoms, and
//! absorption flags. A [`PureState`] is a sparse map from classical
//! configurations ([`BasisKet`]) to complex amplitudes. Sub-normalized
//! states are first class: discarding a branch keeps the surviving
//! amplitudes untouched, so the discarded probability stays auditable.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Result, SimError};

/// Amplitudes smaller than this are dropped after each operation.
pub const PRUNE_THRESHOLD: f64 = 1e-15;

/// Slack allowed on the squared norm of a stored state.
pub const NORM_TOLERANCE: f64 = 1e-12;

/// What a subsystem is, which fixes its local dimension and how its local
/// states are printed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubsystemKind {
    /// Photon mode with occupation 0..=n_max.
    PhotonMode,
    /// Two-level atom split into spin-z boxes: index 0 is z⁺, index 1 is z⁻.
    Atom2,
    /// Three-level atom: two ground levels ∣0⟩, ∣1⟩ and one excited level ∣2⟩.
    Atom3,
    /// Absorption record: index 0 clear, index 1 absorbed.
    Flag,
}

impl SubsystemKind {
    pub fn describe(self) -> &'static str {
        match self {
            SubsystemKind::PhotonMode => "photon mode",
            SubsystemKind::Atom2 => "two-level atom",
            SubsystemKind::Atom3 => "three-level atom",
            SubsystemKind::Flag => "absorption flag",
        }
    }
}

/// A named subsystem together with its local dimension.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubsystemLabel {
    name: String,
    kind: SubsystemKind,
    dim: usize,
}

impl SubsystemLabel {
    /// Photon mode truncated at `n_max` photons (local dimension n_max + 1).
    pub fn photon_mode(name: impl Into<String>, n_max: u32) -> Self {
        SubsystemLabel {
            name: name.into(),
            kind: SubsystemKind::PhotonMode,
            dim: n_max as usize + 1,
        }
    }

    pub fn atom2(name: impl Into<String>) -> Self {
        SubsystemLabel {
            name: name.into(),
            kind: SubsystemKind::Atom2,
            dim: 2,
        }
    }

    pub fn atom3(name: impl Into<String>) -> Self {
        SubsystemLabel {
            name: name.into(),
            kind: SubsystemKind::Atom3,
            dim: 3,
        }
    }

    pub fn flag(name: impl Into<String>) -> Self {
        SubsystemLabel {
            name: name.into(),
            kind: SubsystemKind::Flag,
            dim: 2,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> SubsystemKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Printable symbol for one local state, e.g. `+`/`-` for spin boxes.
    pub fn local_symbol(&self, index: u8) -> String {
        match self.kind {
            SubsystemKind::PhotonMode | SubsystemKind::Atom3 => index.to_string(),
            SubsystemKind::Atom2 => if index == 0 { "+" } else { "-" }.to_string(),
            SubsystemKind::Flag => if index == 0 { "clear" } else { "absorbed" }.to_string(),
        }
    }
}

/// Ordered registry of subsystems; fixes the ket layout for a whole run.
#[derive(Debug, PartialEq, Eq)]
pub struct StateSpace {
    labels: Vec<SubsystemLabel>,
}

impl StateSpace {
    /// Register subsystems in order. Names must be unique and nonempty.
    pub fn new(labels: Vec<SubsystemLabel>) -> Result<Arc<Self>> {
        if labels.is_empty() {
            return Err(SimError::EmptySpace);
        }
        for (i, label) in labels.iter().enumerate() {
            if labels[..i].iter().any(|other| other.name == label.name) {
                return Err(SimError::DuplicateSubsystem(label.name.clone()));
            }
        }
        Ok(Arc::new(StateSpace { labels }))
    }

    pub fn labels(&self) -> &[SubsystemLabel] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Product of local dimensions.
    pub fn total_dim(&self) -> usize {
        self.labels.iter().map(|l| l.dim).product()
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l.name == name)
            .ok_or_else(|| SimError::UnknownSubsystem(name.to_string()))
    }

    pub fn label(&self, index: usize) -> &SubsystemLabel {
        &self.labels[index]
    }

    /// Same layout with one subsystem renamed.
    pub fn renamed(&self, old: &str, new: &str) -> Result<Arc<Self>> {
        let idx = self.index_of(old)?;
        if old != new && self.index_of(new).is_ok() {
            return Err(SimError::DuplicateSubsystem(new.to_string()));
        }
        let mut labels = self.labels.clone();
        labels[idx].name = new.to_string();
        Ok(Arc::new(StateSpace { labels }))
    }

    /// All-zero configuration: photon vacuum, atoms in their first state,
    /// flags clear.
    pub fn vacuum_ket(&self) -> BasisKet {
        BasisKet(vec![0; self.labels.len()])
    }

    /// Total photon number of a ket, summed over photon modes.
    pub fn total_photons(&self, ket: &BasisKet) -> u32 {
        self.labels
            .iter()
            .zip(ket.0.iter())
            .filter(|(l, _)| l.kind == SubsystemKind::PhotonMode)
            .map(|(_, &n)| n as u32)
            .sum()
    }

    fn check_ket(&self, ket: &BasisKet) -> Result<()> {
        if ket.0.len() != self.labels.len() {
            return Err(SimError::MalformedKet(format!(
                "ket has {} entries, space has {} subsystems",
                ket.0.len(),
                self.labels.len()
            )));
        }
        for (label, &idx) in self.labels.iter().zip(ket.0.iter()) {
            if (idx as usize) >= label.dim {
                return Err(SimError::MalformedKet(format!(
                    "index {} out of range for `{}` (dim {})",
                    idx, label.name, label.dim
                )));
            }
        }
        Ok(())
    }

    /// Compact printable form of a ket: occupied photon modes as `name=n`,
    /// atoms always, flags only when absorbed. A fully empty configuration
    /// prints as `vac`.
    pub fn format_ket(&self, ket: &BasisKet) -> String {
        let mut parts = Vec::new();
        for (label, &idx) in self.labels.iter().zip(ket.0.iter()) {
            let show = match label.kind {
                SubsystemKind::PhotonMode => idx > 0,
                SubsystemKind::Atom2 | SubsystemKind::Atom3 => true,
                SubsystemKind::Flag => idx > 0,
            };
            if show {
                parts.push(format!("{}={}", label.name, label.local_symbol(idx)));
            }
        }
        if parts.is_empty() {
            "vac".to_string()
        } else {
            parts.join(" ")
        }
    }
}

/// One classical configuration: a local-state index per registered subsystem.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BasisKet(Vec<u8>);

impl BasisKet {
    pub fn new(indices: Vec<u8>) -> Self {
        BasisKet(indices)
    }

    pub fn get(&self, subsystem: usize) -> u8 {
        self.0[subsystem]
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.0
    }

    /// Copy with one entry replaced.
    pub fn with(&self, subsystem: usize, value: u8) -> Self {
        let mut v = self.0.clone();
        v[subsystem] = value;
        BasisKet(v)
    }
}

impl fmt::Debug for BasisKet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|{:?}⟩", self.0)
    }
}

/// Sparse pure state over a [`StateSpace`]. May be sub-normalized after a
/// branch discard; normalization is always explicit.
#[derive(Clone, Debug)]
pub struct PureState {
    space: Arc<StateSpace>,
    terms: BTreeMap<BasisKet, Complex64>,
}

impl PureState {
    /// Single basis ket with amplitude 1.
    pub fn basis_state(space: &Arc<StateSpace>, ket: BasisKet) -> Result<Self> {
        space.check_ket(&ket)?;
        let mut terms = BTreeMap::new();
        terms.insert(ket, Complex64::new(1.0, 0.0));
        Ok(PureState {
            space: Arc::clone(space),
            terms,
        })
    }

    /// The all-zero configuration of the space.
    pub fn vacuum(space: &Arc<StateSpace>) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(space.vacuum_ket(), Complex64::new(1.0, 0.0));
        PureState {
            space: Arc::clone(space),
            terms,
        }
    }

    /// Build a state from explicit terms. Kets must conform to the space,
    /// amplitudes must be finite, and the squared norm must lie in
    /// (0, 1 + 1e-12]. Terms below [`PRUNE_THRESHOLD`] are dropped.
    pub fn from_terms(
        space: &Arc<StateSpace>,
        terms: impl IntoIterator<Item = (BasisKet, Complex64)>,
    ) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (ket, amp) in terms {
            space.check_ket(&ket)?;
            if !amp.re.is_finite() || !amp.im.is_finite() {
                return Err(SimError::NonFiniteAmplitude);
            }
            if amp.norm() >= PRUNE_THRESHOLD {
                *map.entry(ket).or_insert(Complex64::new(0.0, 0.0)) += amp;
            }
        }
        map.retain(|_, amp| amp.norm() >= PRUNE_THRESHOLD);
        let state = PureState {
            space: Arc::clone(space),
            terms: map,
        };
        let n = state.norm_sq();
        if n <= 0.0 {
            return Err(SimError::ZeroNorm);
        }
        if n > 1.0 + NORM_TOLERANCE {
            return Err(SimError::NormOutOfRange(n));
        }
        Ok(state)
    }

    pub(crate) fn from_raw(
        space: Arc<StateSpace>,
        mut terms: BTreeMap<BasisKet, Complex64>,
    ) -> Self {
        terms.retain(|_, amp| amp.norm() >= PRUNE_THRESHOLD);
        PureState { space, terms }
    }

    pub fn space(&self) -> &Arc<StateSpace> {
        &self.space
    }

    pub fn terms(&self) -> impl Iterator<Item = (&BasisKet, &Complex64)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Amplitude of one ket (zero if absent).
    pub fn amplitude(&self, ket: &BasisKet) -> Complex64 {
        self.terms
            .get(ket)
            .copied()
            .unwrap_or(Complex64::new(0.0, 0.0))
    }

    /// Σ∣amplitude∣². Recovers the implicit discard probability of a
    /// sub-normalized state: 1 − norm_sq is the mass removed so far.
    pub fn norm_sq(&self) -> f64 {
        self.terms.values().map(|a| a.norm_sqr()).sum()
    }

    /// Unit-norm copy plus the squared norm it had before scaling.
    pub fn normalize(&self) -> Result<(Self, f64)> {
        let n = self.norm_sq();
        if n <= 0.0 {
            return Err(SimError::ZeroNorm);
        }
        let scale = 1.0 / n.sqrt();
        let terms = self
            .terms
            .iter()
            .map(|(k, a)| (k.clone(), a * scale))
            .collect();
        Ok((
            PureState {
                space: Arc::clone(&self.space),
                terms,
            },
            n,
        ))
    }

    /// Tensor product. Subsystem names must be disjoint; the result carries
    /// `self`'s subsystems first, then `other`'s.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        for label in other.space.labels() {
            if self.space.index_of(label.name()).is_ok() {
                return Err(SimError::OverlappingSubsystems(label.name().to_string()));
            }
        }
        let mut labels = self.space.labels().to_vec();
        labels.extend_from_slice(other.space.labels());
        let space = StateSpace::new(labels)?;
        let mut terms = BTreeMap::new();
        for (ka, aa) in &self.terms {
            for (kb, ab) in &other.terms {
                let mut v = ka.0.clone();
                v.extend_from_slice(&kb.0);
                terms.insert(BasisKet(v), aa * ab);
            }
        }
        Ok(PureState::from_raw(space, terms))
    }

    /// Split off the kets failing `pred`. Returns the kept part
    /// (unnormalized, possibly empty) and the squared mass removed.
    pub fn project(&self, pred: impl Fn(&BasisKet) -> bool) -> (Self, f64) {
        let mut kept = BTreeMap::new();
        let mut removed = 0.0;
        for (ket, amp) in &self.terms {
            if pred(ket) {
                kept.insert(ket.clone(), *amp);
            } else {
                removed += amp.norm_sqr();
            }
        }
        (
            PureState {
                space: Arc::clone(&self.space),
                terms: kept,
            },
            removed,
        )
    }

    /// Apply a local operator (given as a dim×dim matrix in the subsystem's
    /// basis) to one subsystem.
    pub fn apply_one_site(&self, name: &str, op: &DMatrix<Complex64>) -> Result<Self> {
        let site = self.space.index_of(name)?;
        let dim = self.space.label(site).dim();
        if op.nrows() != dim || op.ncols() != dim {
            return Err(SimError::InvalidParameter(format!(
                "operator is {}×{}, subsystem `{}` has dim {}",
                op.nrows(),
                op.ncols(),
                name,
                dim
            )));
        }
        let mut terms: BTreeMap<BasisKet, Complex64> = BTreeMap::new();
        for (ket, amp) in &self.terms {
            let from = ket.get(site) as usize;
            for to in 0..dim {
                let factor = op[(to, from)];
                if factor.norm() == 0.0 {
                    continue;
                }
                *terms
                    .entry(ket.with(site, to as u8))
                    .or_insert(Complex64::new(0.0, 0.0)) += amp * factor;
            }
        }
        Ok(PureState::from_raw(Arc::clone(&self.space), terms))
    }

    /// Same state with one subsystem renamed (layout unchanged).
    pub fn renamed_subsystem(&self, old: &str, new: &str) -> Result<Self> {
        let space = self.space.renamed(old, new)?;
        Ok(PureState {
            space,
            terms: self.terms.clone(),
        })
    }

    /// Same state with subsystems listed in a new order. `order` must name
    /// every subsystem exactly once.
    pub fn reordered(&self, order: &[&str]) -> Result<Self> {
        if order.len() != self.space.len() {
            return Err(SimError::InvalidParameter(format!(
                "reorder lists {} names, space has {}",
                order.len(),
                self.space.len()
            )));
        }
        let perm: Vec<usize> = order
            .iter()
            .map(|name| self.space.index_of(name))
            .collect::<Result<_>>()?;
        {
            let mut seen = vec![false; perm.len()];
            for &p in &perm {
                if seen[p] {
                    return Err(SimError::DuplicateSubsystem(order[p].to_string()));
                }
                seen[p] = true;
            }
        }
        let labels = perm.iter().map(|&p| self.space.label(p).clone()).collect();
        let space = StateSpace::new(labels)?;
        let terms = self
            .terms
            .iter()
            .map(|(ket, amp)| {
                let v = perm.iter().map(|&p| ket.get(p)).collect();
                (BasisKet(v), *amp)
            })
            .collect();
        Ok(PureState { space, terms })
    }

    /// Inner product ⟨self∣other⟩. Both states must share the same layout.
    pub fn overlap(&self, other: &Self) -> Result<Complex64> {
        if self.space.labels() != other.space.labels() {
            return Err(SimError::InvalidParameter(
                "overlap needs identical state spaces".to_string(),
            ));
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for (ket, amp) in &self.terms {
            acc += amp.conj() * other.amplitude(ket);
        }
        Ok(acc)
    }

    /// ℓ² distance minimized over a global phase on `other`:
    /// min_θ ‖self − e^{iθ}·other‖.
    pub fn aligned_distance(&self, other: &Self) -> Result<f64> {
        let ov = self.overlap(other)?;
        let d2 = self.norm_sq() + other.norm_sq() - 2.0 * ov.norm();
        Ok(d2.max(0.0).sqrt())
    }

    /// Reduced density matrix over the named subsystems, in the order given.
    /// Trace equals this state's squared norm.
    pub fn partial_trace(&self, keep: &[&str]) -> Result<DensityMatrix> {
        let keep_idx: Vec<usize> = keep
            .iter()
            .map(|name| self.space.index_of(name))
            .collect::<Result<_>>()?;
        let labels: Vec<SubsystemLabel> = keep_idx
            .iter()
            .map(|&i| self.space.label(i).clone())
            .collect();
        let dims: Vec<usize> = labels.iter().map(|l| l.dim()).collect();
        let dim: usize = dims.iter().product();

        // Group terms by the traced-out part; each group contributes the
        // outer product of its kept-part vector.
        let mut groups: BTreeMap<Vec<u8>, Vec<(usize, Complex64)>> = BTreeMap::new();
        let keep_set: Vec<bool> = {
            let mut v = vec![false; self.space.len()];
            for &i in &keep_idx {
                if v[i] {
                    return Err(SimError::DuplicateSubsystem(
                        self.space.label(i).name().to_string(),
                    ));
                }
                v[i] = true;
            }
            v
        };
        for (ket, amp) in &self.terms {
            let rest: Vec<u8> = ket
                .0
                .iter()
                .enumerate()
                .filter(|(i, _)| !keep_set[*i])
                .map(|(_, &x)| x)
                .collect();
            let mut kept_index = 0usize;
            for (pos, &i) in keep_idx.iter().enumerate() {
                kept_index = kept_index * dims[pos] + ket.get(i) as usize;
            }
            groups.entry(rest).or_default().push((kept_index, *amp));
        }
        let mut mat = DMatrix::<Complex64>::zeros(dim, dim);
        for (_, entries) in groups {
            for &(i, a) in &entries {
                for &(j, b) in &entries {
                    mat[(i, j)] += a * b.conj();
                }
            }
        }
        Ok(DensityMatrix { labels, mat })
    }
}

/// Dense Hermitian operator on a subsystem subset, usually produced by
/// [`PureState::partial_trace`].
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    labels: Vec<SubsystemLabel>,
    mat: DMatrix<Complex64>,
}

impl DensityMatrix {
    pub fn new(labels: Vec<SubsystemLabel>, mat: DMatrix<Complex64>) -> Result<Self> {
        let dim: usize = labels.iter().map(|l| l.dim()).product();
        if mat.nrows() != dim || mat.ncols() != dim {
            return Err(SimError::InvalidParameter(format!(
                "matrix is {}×{}, labels give dim {}",
                mat.nrows(),
                mat.ncols(),
                dim
            )));
        }
        Ok(DensityMatrix { labels, mat })
    }

    pub fn labels(&self) -> &[SubsystemLabel] {
        &self.labels
    }

    pub fn dims(&self) -> Vec<usize> {
        self.labels.iter().map(|l| l.dim()).collect()
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.mat
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.mat[(row, col)]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.mat[(i, i)].re).sum()
    }

    /// Largest deviation ∣ρ − ρ†∣ over all entries.
    pub fn hermiticity_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                worst = worst.max((self.mat[(i, j)] - self.mat[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// Real eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let herm = (&self.mat + self.mat.adjoint()).scale(0.5);
        let mut eigs: Vec<f64> = herm.symmetric_eigen().eigenvalues.iter().copied().collect();
        eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        eigs
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    /// Check the density-matrix contract: Hermitian to 1e-12, trace in
    /// (0, 1 + 1e-12], eigenvalues ≥ −1e-10.
    pub fn validate(&self) -> Result<()> {
        let herm = self.hermiticity_error();
        if herm > 1e-12 {
            return Err(SimError::InvalidParameter(format!(
                "density matrix deviates from Hermitian by {herm:e}"
            )));
        }
        let tr = self.trace();
        if tr <= 0.0 || tr > 1.0 + NORM_TOLERANCE {
            return Err(SimError::NormOutOfRange(tr));
        }
        let min = self.min_eigenvalue();
        if min < -1e-10 {
            return Err(SimError::NotPositive(min));
        }
        Ok(())
    }

    fn decompose_index(&self, mut index: usize) -> Vec<usize> {
        let dims = self.dims();
        let mut out = vec![0; dims.len()];
        for (pos, &d) in dims.iter().enumerate().rev() {
            out[pos] = index % d;
            index /= d;
        }
        out
    }

    /// Trace out everything but the named subsystems.
    pub fn partial_trace(&self, keep: &[&str]) -> Result<DensityMatrix> {
        let keep_idx: Vec<usize> = keep
            .iter()
            .map(|name| {
                self.labels
                    .iter()
                    .position(|l| l.name() == *name)
                    .ok_or_else(|| SimError::UnknownSubsystem(name.to_string()))
            })
            .collect::<Result<_>>()?;
        let labels: Vec<SubsystemLabel> =
            keep_idx.iter().map(|&i| self.labels[i].clone()).collect();
        let kept_dims: Vec<usize> = labels.iter().map(|l| l.dim()).collect();
        let kept_dim: usize = kept_dims.iter().product();
        let mut out = DMatrix::<Complex64>::zeros(kept_dim, kept_dim);
        let full = self.dim();
        for row in 0..full {
            let rparts = self.decompose_index(row);
            for col in 0..full {
                let cparts = self.decompose_index(col);
                // Off-diagonal in any traced-out subsystem contributes nothing.
                if rparts
                    .iter()
                    .zip(cparts.iter())
                    .enumerate()
                    .any(|(i, (r, c))| !keep_idx.contains(&i) && r != c)
                {
                    continue;
                }
                let mut ri = 0usize;
                let mut ci = 0usize;
                for (pos, &i) in keep_idx.iter().enumerate() {
                    ri = ri * kept_dims[pos] + rparts[i];
                    ci = ci * kept_dims[pos] + cparts[i];
                }
                out[(ri, ci)] += self.mat[(row, col)];
            }
        }
        Ok(DensityMatrix { labels, mat: out })
    }

    /// Restrict each subsystem to two of its levels, reindexed to a qubit.
    /// Population outside the kept levels is dropped (the trace records it).
    pub fn two_level_restriction(&self, picks: &[(usize, usize)]) -> Result<DensityMatrix> {
        if picks.len() != self.labels.len() {
            return Err(SimError::InvalidParameter(format!(
                "{} level picks for {} subsystems",
                picks.len(),
                self.labels.len()
            )));
        }
        for (label, &(a, b)) in self.labels.iter().zip(picks.iter()) {
            if a >= label.dim() || b >= label.dim() || a == b {
                return Err(SimError::InvalidParameter(format!(
                    "levels ({a}, {b}) invalid for `{}` (dim {})",
                    label.name(),
                    label.dim()
                )));
            }
        }
        let labels: Vec<SubsystemLabel> = self
            .labels
            .iter()
            .map(|l| SubsystemLabel::atom2(l.name()))
            .collect();
        let n = picks.len();
        let dim = 1usize << n;
        let mut mat = DMatrix::<Complex64>::zeros(dim, dim);
        let embed = |qubit_index: usize| -> usize {
            let mut parts = Vec::with_capacity(n);
            for pos in 0..n {
                let bit = (qubit_index >> (n - 1 - pos)) & 1;
                let (lo, hi) = picks[pos];
                parts.push(if bit == 0 { lo } else { hi });
            }
            let mut full = 0usize;
            for (pos, part) in parts.iter().enumerate() {
                full = full * self.labels[pos].dim() + part;
            }
            full
        };
        for i in 0..dim {
            for j in 0..dim {
                mat[(i, j)] = self.mat[(embed(i), embed(j))];
            }
        }
        Ok(DensityMatrix { labels, mat })
    }

    /// tr(ρ · A) where A acts as `ops` on the named subsystems and as the
    /// identity elsewhere.
    pub fn expectation(&self, ops: &[(&str, &DMatrix<Complex64>)]) -> Result<Complex64> {
        let mut site_ops: Vec<Option<&DMatrix<Complex64>>> = vec![None; self.labels.len()];
        for (name, op) in ops {
            let pos = self
                .labels
                .iter()
                .position(|l| l.name() == *name)
                .ok_or_else(|| SimError::UnknownSubsystem(name.to_string()))?;
            let d = self.labels[pos].dim();
            if op.nrows() != d || op.ncols() != d {
                return Err(SimError::InvalidParameter(format!(
                    "operator for `{name}` is {}×{}, subsystem dim {d}",
                    op.nrows(),
                    op.ncols()
                )));
            }
            site_ops[pos] = Some(op);
        }
        let full = self.dim();
        let mut acc = Complex64::new(0.0, 0.0);
        for row in 0..full {
            let rparts = self.decompose_index(row);
            for col in 0..full {
                let cparts = self.decompose_index(col);
                // A[col, row] as a product of local factors.
                let mut factor = Complex64::new(1.0, 0.0);
                let mut nonzero = true;
                for (pos, op) in site_ops.iter().enumerate() {
                    match op {
                        Some(op) => factor *= op[(cparts[pos], rparts[pos])],
                        None => {
                            if rparts[pos] != cparts[pos] {
                                nonzero = false;
                                break;
                            }
                        }
                    }
                }
                if nonzero {
                    acc += self.mat[(row, col)] * factor;
                }
            }
        }
        Ok(acc)
    }
}
