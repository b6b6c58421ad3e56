//! Projective spin measurements, post-selection, correlation and CHSH
//! evaluation, concurrence, and a seeded Born-rule sampler.
//!
//! Sampling is deterministic per (seed, shot index): each shot draws from
//! its own counter-based stream, so aggregate counts are bit-identical
//! regardless of execution order.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, Matrix3, Vector3};
use num_complex::Complex64;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, SimError};
use crate::fock::{BasisKet, DensityMatrix, PureState, SubsystemKind};

/// Name of the sampling generator, recorded in reports for reproducibility.
pub const RNG_ALGORITHM: &str = "chacha8, one stream per shot";

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Bloch-sphere measurement axis: polar angle θ ∈ [0, π], azimuth
/// φ ∈ [0, 2π).
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SpinDirection {
    pub theta: f64,
    pub phi: f64,
}

impl SpinDirection {
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        if !(0.0..=std::f64::consts::PI).contains(&theta) {
            return Err(SimError::InvalidParameter(format!(
                "polar angle {theta} outside [0, π]"
            )));
        }
        if !(0.0..std::f64::consts::TAU).contains(&phi) {
            return Err(SimError::InvalidParameter(format!(
                "azimuth {phi} outside [0, 2π)"
            )));
        }
        Ok(SpinDirection { theta, phi })
    }

    /// Direction in the x–z plane at a signed angle from the z axis
    /// (positive towards +x). Negative angles land at azimuth π.
    pub fn xz(angle: f64) -> Self {
        let (y, _) = (0.0, ());
        let x = angle.sin();
        let z = angle.cos();
        Self::from_bloch(x, y, z)
    }

    /// Direction of a (not necessarily unit) Bloch vector.
    pub fn from_bloch(x: f64, y: f64, z: f64) -> Self {
        let r = (x * x + y * y + z * z).sqrt();
        if r == 0.0 {
            return SpinDirection {
                theta: 0.0,
                phi: 0.0,
            };
        }
        let theta = (z / r).clamp(-1.0, 1.0).acos();
        let mut phi = y.atan2(x);
        if phi < 0.0 {
            phi += std::f64::consts::TAU;
        }
        if phi >= std::f64::consts::TAU {
            phi = 0.0;
        }
        SpinDirection { theta, phi }
    }

    pub fn bloch(&self) -> (f64, f64, f64) {
        (
            self.theta.sin() * self.phi.cos(),
            self.theta.sin() * self.phi.sin(),
            self.theta.cos(),
        )
    }

    /// Same axis rotated about z by `alpha` (azimuth shift).
    pub fn rotated_about_z(&self, alpha: f64) -> Self {
        let (x, y, z) = self.bloch();
        let (s, co) = alpha.sin_cos();
        Self::from_bloch(co * x - s * y, s * x + co * y, z)
    }

    /// The spin observable n̂·σ in the {z⁺, z⁻} basis.
    pub fn operator(&self) -> DMatrix<Complex64> {
        let (x, y, z) = self.bloch();
        DMatrix::from_row_slice(2, 2, &[c(z, 0.0), c(x, -y), c(x, y), c(-z, 0.0)])
    }

    /// Projectors (up, down) along this axis.
    pub fn projectors(&self) -> (DMatrix<Complex64>, DMatrix<Complex64>) {
        let op = self.operator();
        let id = DMatrix::<Complex64>::identity(2, 2);
        let up = (&id + &op).scale(0.5);
        let down = (&id - &op).scale(0.5);
        (up, down)
    }
}

/// The four CHSH measurement axes: `a`, `a2` on the first atom, `b`, `b2`
/// on the second.
#[derive(Clone, Copy, Debug, serde::Serialize, serde::Deserialize)]
pub struct ChshSetting {
    pub a: SpinDirection,
    pub a2: SpinDirection,
    pub b: SpinDirection,
    pub b2: SpinDirection,
}

impl ChshSetting {
    /// The x–z-plane quadruple (0, π/2, π/4, −π/4), which is optimal for a
    /// state with only z⁺z⁺ and z⁻z⁻ components of equal phase.
    pub fn standard_xz() -> Self {
        use std::f64::consts::FRAC_PI_2;
        use std::f64::consts::FRAC_PI_4;
        ChshSetting {
            a: SpinDirection::xz(0.0),
            a2: SpinDirection::xz(FRAC_PI_2),
            b: SpinDirection::xz(FRAC_PI_4),
            b2: SpinDirection::xz(-FRAC_PI_4),
        }
    }

    /// All four axes rotated about z, matching a local z-rotation applied
    /// to both atoms.
    pub fn rotated_about_z(&self, alpha: f64) -> Self {
        ChshSetting {
            a: self.a.rotated_about_z(alpha),
            a2: self.a2.rotated_about_z(alpha),
            b: self.b.rotated_about_z(alpha),
            b2: self.b2.rotated_about_z(alpha),
        }
    }
}

/// Shot count and seed for the Born-rule sampler.
#[derive(Clone, Copy, Debug, serde::Serialize, serde::Deserialize)]
pub struct SampleConfig {
    pub shots: u64,
    pub seed: u64,
}

impl SampleConfig {
    pub fn new(shots: u64, seed: u64) -> Result<Self> {
        if shots == 0 {
            return Err(SimError::InvalidParameter("shots must be ≥ 1".to_string()));
        }
        Ok(SampleConfig { shots, seed })
    }
}

/// Project onto the kets satisfying `pred`. Returns the normalized
/// conditional state and the Born probability of the event, measured
/// against a unit-mass experiment (a sub-normalized input already carries
/// its earlier discards).
pub fn postselect(state: &PureState, pred: impl Fn(&BasisKet) -> bool) -> Result<(PureState, f64)> {
    let (kept, _) = state.project(pred);
    let mass = kept.norm_sq();
    if mass <= 0.0 {
        return Err(SimError::ZeroProbability);
    }
    let (unit, _) = kept.normalize()?;
    Ok((unit, mass))
}

fn require_atom2(rho: &DensityMatrix, atom: &str) -> Result<()> {
    let label = rho
        .labels()
        .iter()
        .find(|l| l.name() == atom)
        .ok_or_else(|| SimError::UnknownSubsystem(atom.to_string()))?;
    if label.kind() != SubsystemKind::Atom2 {
        return Err(SimError::KindMismatch {
            name: atom.to_string(),
            expected: "two-level atom",
            found: label.kind().describe(),
        });
    }
    Ok(())
}

/// Born probabilities (up, down) for one atom measured along `dir`. The
/// two probabilities sum to trace(ρ).
pub fn spin_probabilities(
    rho: &DensityMatrix,
    atom: &str,
    dir: &SpinDirection,
) -> Result<(f64, f64)> {
    require_atom2(rho, atom)?;
    let (up, down) = dir.projectors();
    let p_up = rho.expectation(&[(atom, &up)])?.re;
    let p_down = rho.expectation(&[(atom, &down)])?.re;
    Ok((p_up, p_down))
}

/// Two-atom correlation E = P(same) − P(different) along the given axes,
/// i.e. tr(ρ · σ_a ⊗ σ_b).
pub fn correlation(
    rho: &DensityMatrix,
    atom_a: &str,
    dir_a: &SpinDirection,
    atom_b: &str,
    dir_b: &SpinDirection,
) -> Result<f64> {
    require_atom2(rho, atom_a)?;
    require_atom2(rho, atom_b)?;
    let op_a = dir_a.operator();
    let op_b = dir_b.operator();
    Ok(rho.expectation(&[(atom_a, &op_a), (atom_b, &op_b)])?.re)
}

/// CHSH statistic S = E(a,b) + E(a,b2) + E(a2,b) − E(a2,b2).
pub fn chsh(rho: &DensityMatrix, atom_a: &str, atom_b: &str, setting: &ChshSetting) -> Result<f64> {
    Ok(correlation(rho, atom_a, &setting.a, atom_b, &setting.b)?
        + correlation(rho, atom_a, &setting.a, atom_b, &setting.b2)?
        + correlation(rho, atom_a, &setting.a2, atom_b, &setting.b)?
        - correlation(rho, atom_a, &setting.a2, atom_b, &setting.b2)?)
}

/// Best CHSH violation this state admits, with the axes that realize it.
///
/// Built from the 3×3 correlation matrix T (tᵢⱼ = tr ρ·σᵢ⊗σⱼ): with
/// singular values s₁ ≥ s₂ and singular vectors (uᵢ, vᵢ), the axes
/// b = cos χ·v₁ + sin χ·v₂, b2 = cos χ·v₁ − sin χ·v₂, a = u₁, a2 = u₂ with
/// χ = atan2(s₂, s₁) give S = 2√(s₁² + s₂²), the maximum over all settings.
pub fn chsh_optimal(rho: &DensityMatrix, atom_a: &str, atom_b: &str) -> Result<(f64, ChshSetting)> {
    require_atom2(rho, atom_a)?;
    require_atom2(rho, atom_b)?;
    let paulis = [
        SpinDirection::from_bloch(1.0, 0.0, 0.0),
        SpinDirection::from_bloch(0.0, 1.0, 0.0),
        SpinDirection::from_bloch(0.0, 0.0, 1.0),
    ];
    let mut t = Matrix3::<f64>::zeros();
    for (i, da) in paulis.iter().enumerate() {
        for (j, db) in paulis.iter().enumerate() {
            t[(i, j)] = correlation(rho, atom_a, da, atom_b, db)?;
        }
    }
    let svd = t.svd(true, true);
    let u = svd.u.expect("svd requested u");
    let v_t = svd.v_t.expect("svd requested v_t");
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&i, &j| {
        svd.singular_values[j]
            .partial_cmp(&svd.singular_values[i])
            .unwrap()
    });
    let (i1, i2) = (order[0], order[1]);
    let (s1, s2) = (svd.singular_values[i1], svd.singular_values[i2]);
    let u1: Vector3<f64> = u.column(i1).into();
    let u2: Vector3<f64> = u.column(i2).into();
    let v1: Vector3<f64> = v_t.row(i1).transpose();
    let v2: Vector3<f64> = v_t.row(i2).transpose();
    let chi = s2.atan2(s1);
    let b_vec = v1.scale(chi.cos()) + v2.scale(chi.sin());
    let b2_vec = v1.scale(chi.cos()) - v2.scale(chi.sin());
    let setting = ChshSetting {
        a: SpinDirection::from_bloch(u1[0], u1[1], u1[2]),
        a2: SpinDirection::from_bloch(u2[0], u2[1], u2[2]),
        b: SpinDirection::from_bloch(b_vec[0], b_vec[1], b_vec[2]),
        b2: SpinDirection::from_bloch(b2_vec[0], b2_vec[1], b2_vec[2]),
    };
    let value = chsh(rho, atom_a, atom_b, &setting)?;
    Ok((value, setting))
}

fn sqrt_hermitian(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let herm = (m + m.adjoint()).scale(0.5);
    let eig = herm.symmetric_eigen();
    let top = eig.eigenvalues.iter().copied().fold(0.0f64, f64::max);
    let mut diag = DMatrix::<Complex64>::zeros(m.nrows(), m.ncols());
    for (i, lambda) in eig.eigenvalues.iter().enumerate() {
        // Eigenvalues at the noise floor are exact zeros; keeping them
        // would surface as √eps ≈ 1e-8 errors downstream.
        let clean = if *lambda < top * 1e-14 { 0.0 } else { *lambda };
        diag[(i, i)] = c(clean.sqrt(), 0.0);
    }
    &eig.eigenvectors * diag * eig.eigenvectors.adjoint()
}

/// Wootters concurrence of a two-qubit density matrix. The input is
/// normalized by its trace before evaluation; eigen-noise below −1e-8 is an
/// error, smaller negatives are clamped.
pub fn concurrence(rho: &DensityMatrix) -> Result<f64> {
    let dims = rho.dims();
    if dims != vec![2, 2] {
        return Err(SimError::NotTwoQubits(dims));
    }
    let tr = rho.trace();
    if tr <= 0.0 {
        return Err(SimError::ZeroNorm);
    }
    let m = rho.matrix().scale(1.0 / tr);
    let herm = (&m + m.adjoint()).scale(0.5);
    let eig = herm.clone().symmetric_eigen();
    let min_eig = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if min_eig < -1e-8 {
        return Err(SimError::NotPositive(min_eig));
    }

    // Numerically pure state: read off the dominant eigenvector ψ and use
    // the exact two-qubit formula C = 2∣ψ₀₀ψ₁₁ − ψ₀₁ψ₁₀∣, avoiding the
    // √eps noise of the eigenvalue route.
    let purity: f64 = (&herm * &herm).diagonal().iter().map(|z| z.re).sum();
    if purity >= 1.0 - 1e-12 {
        let dominant = eig
            .eigenvalues
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        let psi = eig.eigenvectors.column(dominant);
        let det = psi[0] * psi[3] - psi[1] * psi[2];
        return Ok((2.0 * det.norm()).clamp(0.0, 1.0));
    }

    let sy = DMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)]);
    let yy = sy.kronecker(&sy);
    let rho_tilde = &yy * m.map(|z| z.conj()) * &yy;
    // Hermitian route to the Wootters eigenvalues: λᵢ are the eigenvalues
    // of √(√ρ · ρ̃ · √ρ).
    let root = sqrt_hermitian(&m);
    let inner = &root * rho_tilde * &root;
    let inner_herm = (&inner + inner.adjoint()).scale(0.5);
    let mus = inner_herm.symmetric_eigen().eigenvalues;
    let mu_top = mus.iter().copied().fold(0.0f64, f64::max);
    let mut lambdas: Vec<f64> = mus
        .iter()
        .map(|mu| if *mu < mu_top * 1e-14 { 0.0 } else { mu.sqrt() })
        .collect();
    lambdas.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok((lambdas[0] - lambdas[1] - lambdas[2] - lambdas[3]).clamp(0.0, 1.0))
}

fn uniform01(rng: &mut ChaCha8Rng) -> f64 {
    // 53-bit mantissa draw in [0, 1).
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Draw `cfg.shots` i.i.d. outcomes from an exclusive event family given as
/// (name, probability) pairs. Probabilities must sum to 1 within 1e−9.
/// Every event name appears in the returned counts, including zero counts;
/// counts sum to the shot total.
pub fn sample_events(
    events: &[(String, f64)],
    cfg: &SampleConfig,
) -> Result<BTreeMap<String, u64>> {
    if cfg.shots == 0 {
        return Err(SimError::InvalidParameter("shots must be ≥ 1".to_string()));
    }
    if events.is_empty() {
        return Err(SimError::InvalidParameter(
            "no events to sample".to_string(),
        ));
    }
    let mut cumulative = Vec::with_capacity(events.len());
    let mut total = 0.0;
    for (name, p) in events {
        if *p < -1e-12 || !p.is_finite() {
            return Err(SimError::InvalidParameter(format!(
                "event `{name}` has probability {p}"
            )));
        }
        total += p.max(0.0);
        cumulative.push(total);
    }
    if (total - 1.0).abs() > 1e-9 {
        return Err(SimError::InvalidParameter(format!(
            "event probabilities sum to {total}, expected 1"
        )));
    }
    let mut counts: BTreeMap<String, u64> =
        events.iter().map(|(name, _)| (name.clone(), 0)).collect();
    for shot in 0..cfg.shots {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(shot);
        let draw = uniform01(&mut rng);
        let pick = cumulative
            .iter()
            .position(|&edge| draw < edge)
            .unwrap_or(events.len() - 1);
        *counts.get_mut(&events[pick].0).unwrap() += 1;
    }
    Ok(counts)
}

/// Born-rule sampling of a state in its classical basis; outcome names are
/// the printable ket strings. The state is normalized before sampling.
pub fn sample_state(state: &PureState, cfg: &SampleConfig) -> Result<BTreeMap<String, u64>> {
    let mass = state.norm_sq();
    if mass <= 0.0 {
        return Err(SimError::ZeroNorm);
    }
    let events: Vec<(String, f64)> = state
        .terms()
        .map(|(ket, amp)| (state.space().format_ket(ket), amp.norm_sqr() / mass))
        .collect();
    sample_events(&events, cfg)
}
