//! Circuit-QED realization of the XY chain: transmon qubits coupled through
//! shared resonators, evolved as a closed system and compared with the XY
//! model it is meant to simulate.
//!
//! Qubit `j` couples to cavity `j` with strength `∓g_j` and to cavity `j+1`
//! with `+g_{j+1}`; cavities alternate between two frequencies and two
//! couplings. In the frame of the drive the cavity energies are `−Δ_j`.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eigh, UPLO};
use serde::{Deserialize, Serialize};

use crate::dense::hamiltonian_with_bonds;
use crate::error::{invalid, Error, Result};
use crate::C64;

/// Largest Hilbert-space dimension accepted for dense Hamiltonians.
pub const MAX_DIMENSION: usize = 100_000;

/// Sign of the `g_j` coupling, set by which resonator mode is used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CouplingMode {
    /// First mode, coupling `−g_j`; simulates hopping `+J`.
    Ferromagnetic,
    /// Second mode, coupling `+g_j`; simulates hopping `−J`.
    Antiferromagnetic,
}

impl CouplingMode {
    fn sign(self) -> f64 {
        match self {
            CouplingMode::Ferromagnetic => -1.0,
            CouplingMode::Antiferromagnetic => 1.0,
        }
    }
}

/// Qubits, resonators and drive. Frequencies are angular; cavity `j` has
/// frequency `cavity_freqs[j % 2]` and coupling `couplings[j % 2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitSpec {
    pub n_qubits: usize,
    pub qubit_freq: f64,
    pub cavity_freqs: [f64; 2],
    pub couplings: [f64; 2],
    pub drive: f64,
    pub drive_freq: f64,
    pub mode: CouplingMode,
    /// Photon-number cutoff per cavity.
    pub n_max: usize,
}

impl CircuitSpec {
    /// Spec from detunings with the drive frequency at 0:
    /// `Δ_c = ω_c − ω_L`, `Δ_j = ω_L − ω_j`.
    pub fn from_detunings(
        qubit_detuning: f64,
        cavity_detunings: [f64; 2],
        couplings: [f64; 2],
        drive: f64,
        mode: CouplingMode,
        n_max: usize,
    ) -> Self {
        Self {
            n_qubits: 3,
            qubit_freq: qubit_detuning,
            cavity_freqs: [-cavity_detunings[0], -cavity_detunings[1]],
            couplings,
            drive,
            drive_freq: 0.0,
            mode,
            n_max,
        }
    }

    /// Three qubits at `Δ₁ = 30g₁`, `Δ₂ = 20g₁`, `g₂² = g₁²Δ₂/Δ₁`, `g₁ = 1`,
    /// with `Δ_c = Ω = g₁²/Δ₁`, scaled by `s`: `Δ_j → sΔ_j`, `g² → s g²`.
    pub fn reference(scale: f64, mode: CouplingMode, n_max: usize) -> Self {
        let (d1, d2) = (30.0 * scale, 20.0 * scale);
        let g1 = scale.sqrt();
        let g2 = (g1 * g1 * d2 / d1).sqrt();
        let j_eff = g1 * g1 / d1;
        Self::from_detunings(j_eff, [d1, d2], [g1, g2], j_eff, mode, n_max)
    }

    pub fn n_cavities(&self) -> usize {
        self.n_qubits + 1
    }

    /// `Δ_c = ω_c − ω_L`.
    pub fn qubit_detuning(&self) -> f64 {
        self.qubit_freq - self.drive_freq
    }

    /// `Δ_j = ω_L − ω_j` of cavity `j` (0-based).
    pub fn cavity_detuning(&self, j: usize) -> f64 {
        self.drive_freq - self.cavity_freqs[j % 2]
    }

    pub fn coupling(&self, j: usize) -> f64 {
        self.couplings[j % 2]
    }

    pub fn dimension(&self) -> usize {
        (1usize << self.n_qubits).saturating_mul((self.n_max + 1).saturating_pow(self.n_cavities() as u32))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_qubits == 0 || self.n_max == 0 {
            return Err(invalid("need at least one qubit and n_max >= 1"));
        }
        let all = [
            self.qubit_freq,
            self.cavity_freqs[0],
            self.cavity_freqs[1],
            self.couplings[0],
            self.couplings[1],
            self.drive,
            self.drive_freq,
        ];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(invalid(format!("circuit parameters must be finite: {self:?}")));
        }
        if self.dimension() > MAX_DIMENSION {
            return Err(Error::Capacity(format!(
                "Hilbert dimension {} exceeds {MAX_DIMENSION}",
                self.dimension()
            )));
        }
        Ok(())
    }
}

/// Qubits (qubit 0 most significant) followed by cavities (cavity 0 most
/// significant among the photon digits).
#[derive(Debug, Clone, Copy)]
struct Register {
    n_qubits: usize,
    n_cavities: usize,
    levels: usize,
}

impl Register {
    fn of(spec: &CircuitSpec) -> Self {
        Self { n_qubits: spec.n_qubits, n_cavities: spec.n_cavities(), levels: spec.n_max + 1 }
    }

    fn photon_dim(&self) -> usize {
        self.levels.pow(self.n_cavities as u32)
    }

    fn dim(&self) -> usize {
        (1 << self.n_qubits) * self.photon_dim()
    }

    fn qubit(&self, idx: usize, q: usize) -> usize {
        ((idx / self.photon_dim()) >> (self.n_qubits - 1 - q)) & 1
    }

    fn photons(&self, idx: usize, c: usize) -> usize {
        (idx % self.photon_dim()) / self.levels.pow((self.n_cavities - 1 - c) as u32) % self.levels
    }

    fn qubit_stride(&self, q: usize) -> usize {
        self.photon_dim() << (self.n_qubits - 1 - q)
    }

    fn cavity_stride(&self, c: usize) -> usize {
        self.levels.pow((self.n_cavities - 1 - c) as u32)
    }
}

/// Adds `c·(σ⁺_q a_cav + σ⁻_q a†_cav)` to `h`.
fn add_exchange(h: &mut Array2<C64>, reg: &Register, q: usize, cav: usize, c: f64) {
    let (qs, cs) = (reg.qubit_stride(q), reg.cavity_stride(cav));
    for idx in 0..reg.dim() {
        // σ⁺ a: qubit 0 → 1, one photon removed.
        let n = reg.photons(idx, cav);
        if reg.qubit(idx, q) == 0 && n > 0 {
            let target = idx + qs - cs;
            let amp = C64::new(c * (n as f64).sqrt(), 0.0);
            h[[target, idx]] += amp;
            h[[idx, target]] += amp;
        }
    }
}

/// Adds `c·(a†_a a_b + a†_b a_a)` to `h`.
fn add_cavity_hopping(h: &mut Array2<C64>, reg: &Register, a: usize, b: usize, c: f64) {
    let (sa, sb) = (reg.cavity_stride(a), reg.cavity_stride(b));
    for idx in 0..reg.dim() {
        let (na, nb) = (reg.photons(idx, a), reg.photons(idx, b));
        if nb > 0 && na + 1 < reg.levels {
            let target = idx + sa - sb;
            let amp = C64::new(c * ((na + 1) as f64 * nb as f64).sqrt(), 0.0);
            h[[target, idx]] += amp;
            h[[idx, target]] += amp;
        }
    }
}

fn add_drive(h: &mut Array2<C64>, reg: &Register, omega: f64) {
    for q in 0..reg.n_qubits {
        let qs = reg.qubit_stride(q);
        for idx in 0..reg.dim() {
            if reg.qubit(idx, q) == 0 {
                h[[idx + qs, idx]] += omega;
                h[[idx, idx + qs]] += omega;
            }
        }
    }
}

/// Rotating-frame qubit–cavity Hamiltonian
/// `Δ_c Σ n_j − Σ Δ_j a†_j a_j + Ω Σ σˣ_j + Σ_j [g_{j+1}(σ⁺_j a_{j+1} + h.c.) ∓ g_j(σ⁺_j a_j + h.c.)]`.
pub fn build_full_hamiltonian(spec: &CircuitSpec) -> Result<Array2<C64>> {
    spec.validate()?;
    let reg = Register::of(spec);
    let mut h = Array2::<C64>::zeros((reg.dim(), reg.dim()));
    for idx in 0..reg.dim() {
        let mut e = 0.0;
        for q in 0..reg.n_qubits {
            e += spec.qubit_detuning() * reg.qubit(idx, q) as f64;
        }
        for c in 0..reg.n_cavities {
            e -= spec.cavity_detuning(c) * reg.photons(idx, c) as f64;
        }
        h[[idx, idx]] = C64::new(e, 0.0);
    }
    add_drive(&mut h, &reg, spec.drive);
    let sign = spec.mode.sign();
    for q in 0..reg.n_qubits {
        add_exchange(&mut h, &reg, q, q, sign * spec.coupling(q));
        add_exchange(&mut h, &reg, q, q + 1, spec.coupling(q + 1));
    }
    Ok(h)
}

/// Second-order dispersive Hamiltonian of three qubits and four cavities.
///
/// With `cavity_hopping` the slowly rotating `a†_1 a_2`, `a†_2 a_3` terms are
/// kept. They are static in the frame that also removes the free cavity
/// terms `−Δ_j a†_j a_j`, and the matrix is returned in that frame; qubit and
/// photon-number observables are the same in both frames.
pub fn build_effective_hamiltonian(spec: &CircuitSpec, cavity_hopping: bool) -> Result<Array2<C64>> {
    spec.validate()?;
    if spec.n_qubits != 3 {
        return Err(Error::NotImplemented(format!(
            "effective Hamiltonian derived for 3 qubits and 4 cavities, got {} qubits",
            spec.n_qubits
        )));
    }
    let reg = Register::of(spec);
    let (d1, d2) = (spec.cavity_detuning(0), spec.cavity_detuning(1));
    let (g1, g2) = (spec.couplings[0], spec.couplings[1]);
    if d1 == 0.0 || d2 == 0.0 {
        return Err(invalid("cavity detunings must be nonzero"));
    }
    let stark = spec.qubit_detuning() + g1 * g1 / d1 + g2 * g2 / d2;
    let mut h = Array2::<C64>::zeros((reg.dim(), reg.dim()));
    for idx in 0..reg.dim() {
        let n = |q: usize| reg.qubit(idx, q) as f64;
        let m = |c: usize| reg.photons(idx, c) as f64;
        let mut e = stark * (n(0) + n(1) + n(2));
        e += (2.0 * g1 * g1 * n(0) - (g1 * g1 + d1 * d1)) / d1 * m(0);
        e += (2.0 * g2 * g2 * (n(0) + n(1)) - (2.0 * g2 * g2 + d2 * d2)) / d2 * m(1);
        e += (2.0 * g1 * g1 * (n(1) + n(2)) - (2.0 * g1 * g1 + d1 * d1)) / d1 * m(2);
        e += (2.0 * g2 * g2 * n(2) - (g2 * g2 + d2 * d2)) / d2 * m(3);
        if cavity_hopping {
            e += d1 * (m(0) + m(2)) + d2 * (m(1) + m(3));
        }
        h[[idx, idx]] = C64::new(e, 0.0);
    }
    add_drive(&mut h, &reg, spec.drive);
    let sign = spec.mode.sign();
    for (a, b, j) in [(0, 1, g1 * g1 / d1), (1, 2, g2 * g2 / d2)] {
        let (sa, sb) = (reg.qubit_stride(a), reg.qubit_stride(b));
        for idx in 0..reg.dim() {
            if reg.qubit(idx, a) == 1 && reg.qubit(idx, b) == 0 {
                let target = idx - sa + sb;
                h[[target, idx]] += sign * j;
                h[[idx, target]] += sign * j;
            }
        }
    }
    if cavity_hopping {
        let t = g1 * g2 / 2.0 * (1.0 / d1 + 1.0 / d2);
        add_cavity_hopping(&mut h, &reg, 0, 1, t);
        add_cavity_hopping(&mut h, &reg, 1, 2, t);
    }
    Ok(h)
}

/// Couplings and detuning of the simulated XY model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedCouplings {
    /// `(g₁g₂/2)(1/Δ₁ + 1/Δ₂)`.
    pub j12: f64,
    pub j23: f64,
    /// `g₁²/Δ₁`, the hopping appearing in the dispersive Hamiltonian.
    pub j_eff: f64,
    /// `|g₂² − g₁²Δ₂/Δ₁|`.
    pub constraint_residual: f64,
    /// Simulated detuning `Δ = Δ_c + g₁²/Δ₁ + g₂²/Δ₂`.
    pub mapped_detuning: f64,
    /// `|Δ₁ − Δ₂| < 10·max(J₁₂, J₂₃)`: the rotating cavity-hopping terms are
    /// not suppressed.
    pub cavity_hopping_resonant: bool,
}

pub fn derived_couplings(spec: &CircuitSpec) -> Result<DerivedCouplings> {
    let (d1, d2) = (spec.cavity_detuning(0), spec.cavity_detuning(1));
    if d1 == 0.0 || d2 == 0.0 {
        return Err(invalid("cavity detunings must be nonzero"));
    }
    let (g1, g2) = (spec.couplings[0], spec.couplings[1]);
    let g3 = spec.coupling(2);
    let j12 = g1 * g2 / 2.0 * (1.0 / d1 + 1.0 / d2);
    let j23 = g2 * g3 / 2.0 * (1.0 / d1 + 1.0 / d2);
    Ok(DerivedCouplings {
        j12,
        j23,
        j_eff: g1 * g1 / d1,
        constraint_residual: (g2 * g2 - g1 * g1 * d2 / d1).abs(),
        mapped_detuning: spec.qubit_detuning() + g1 * g1 / d1 + g2 * g2 / d2,
        cavity_hopping_resonant: (d1 - d2).abs() < 10.0 * j12.abs().max(j23.abs()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FindingLevel {
    Pass,
    Warn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub check: String,
    pub level: FindingLevel,
    pub detail: String,
}

fn finding(check: &str, ok: bool, detail: String) -> Finding {
    Finding { check: check.into(), level: if ok { FindingLevel::Pass } else { FindingLevel::Warn }, detail }
}

/// Dispersive-regime conditions and, when a decay rate is given, the
/// parameter windows `Ω ∈ [0.1, 2]γ`, `Δ_c ∈ [−2, 10]γ`, `J ∈ [0, 10]γ`.
pub fn dispersive_checks(spec: &CircuitSpec, decay: Option<f64>) -> Vec<Finding> {
    let mut out = Vec::new();
    for j in 0..2 {
        let (d, g) = (spec.cavity_detuning(j).abs(), spec.coupling(j).abs());
        let ratio = if g > 0.0 { d / g } else { f64::INFINITY };
        out.push(finding(&format!("|Δ{}|/g{}", j + 1, j + 1), ratio >= 10.0, format!("{ratio:.3}")));
        let dc = spec.qubit_detuning().abs();
        let ratio = if dc > 0.0 { d / dc } else { f64::INFINITY };
        out.push(finding(&format!("|Δ{}|/|Δc|", j + 1), ratio >= 10.0, format!("{ratio:.3}")));
    }
    match derived_couplings(spec) {
        Ok(dc) => {
            let gap = (spec.cavity_detuning(0) - spec.cavity_detuning(1)).abs();
            let jmax = dc.j12.abs().max(dc.j23.abs());
            out.push(finding(
                "|Δ1−Δ2| vs J",
                !dc.cavity_hopping_resonant,
                format!("|Δ1−Δ2| = {gap:.4}, 10·max J = {:.4}", 10.0 * jmax),
            ));
            if let Some(gamma) = decay {
                let within = |x: f64, lo: f64, hi: f64| x >= lo * gamma && x <= hi * gamma;
                out.push(finding("Ω window", within(spec.drive.abs(), 0.1, 2.0), format!("Ω/γ = {:.3}", spec.drive / gamma)));
                out.push(finding(
                    "Δc window",
                    within(dc.mapped_detuning, -2.0, 10.0),
                    format!("Δ/γ = {:.3}", dc.mapped_detuning / gamma),
                ));
                out.push(finding("J window", within(dc.j_eff.abs(), 0.0, 10.0), format!("J/γ = {:.3}", dc.j_eff / gamma)));
            }
        }
        Err(e) => out.push(finding("cavity detunings", false, e.to_string())),
    }
    out
}

/// Resonator detuning needed for a target hopping, `Δ₁ = g₁²/J`, and whether
/// the resonator then lies in a frequency range. Frequencies are ordinary
/// (not angular) and share one unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HardwareEstimate {
    pub required_detuning: f64,
    pub resonator_freq: f64,
    pub in_range: bool,
}

pub fn hardware_estimate(g1: f64, j_eff: f64, drive_freq: f64, resonator_range: (f64, f64)) -> Result<HardwareEstimate> {
    if !(j_eff > 0.0) {
        return Err(invalid("target hopping must be positive"));
    }
    let required_detuning = g1 * g1 / j_eff;
    let resonator_freq = drive_freq - required_detuning;
    let in_range = resonator_freq >= resonator_range.0 && resonator_freq <= resonator_range.1;
    Ok(HardwareEstimate { required_detuning, resonator_freq, in_range })
}

/// Time series of qubit populations `n_j(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Populations {
    pub times: Vec<f64>,
    /// `values[t][j]`.
    pub values: Vec<Vec<f64>>,
    /// Largest `|‖ψ(t)‖ − 1|`.
    pub norm_error: f64,
}

/// Unitary evolution of `psi0` under a static Hermitian `h` via its
/// eigendecomposition. `n_qubits` leading qubit factors are measured; the
/// remaining factor of dimension `dim / 2^n_qubits` is traced out.
pub fn evolve_closed(h: &Array2<C64>, psi0: &Array1<C64>, times: &[f64], n_qubits: usize) -> Result<Populations> {
    let dim = h.nrows();
    if psi0.len() != dim || dim % (1 << n_qubits) != 0 {
        return Err(invalid("state and Hamiltonian dimensions are inconsistent"));
    }
    let norm0 = psi0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if (norm0 - 1.0).abs() > 1e-12 {
        return Err(invalid(format!("initial state must be normalized, norm = {norm0}")));
    }
    let (energies, vecs) = h.eigh(UPLO::Lower)?;
    let coeffs = vecs.t().mapv(|z| z.conj()).dot(psi0);
    let rest = dim >> n_qubits;
    let mut values = Vec::with_capacity(times.len());
    let mut norm_error: f64 = 0.0;
    for chunk in times.chunks(128) {
        let phased = Array2::from_shape_fn((dim, chunk.len()), |(k, c)| {
            coeffs[k] * C64::new(0.0, -energies[k] * chunk[c]).exp()
        });
        let psi = vecs.dot(&phased);
        for col in psi.columns() {
            let mut n = vec![0.0; n_qubits];
            let mut total = 0.0;
            for (i, z) in col.iter().enumerate() {
                let p = z.norm_sqr();
                total += p;
                let bits = i / rest;
                for (q, nq) in n.iter_mut().enumerate() {
                    if (bits >> (n_qubits - 1 - q)) & 1 == 1 {
                        *nq += p;
                    }
                }
            }
            norm_error = norm_error.max((total.sqrt() - 1.0).abs());
            values.push(n);
        }
    }
    Ok(Populations { times: times.to_vec(), values, norm_error })
}

/// All qubits down and all cavities empty.
pub fn vacuum(dim: usize) -> Array1<C64> {
    let mut v = Array1::zeros(dim);
    v[0] = C64::new(1.0, 0.0);
    v
}

/// `n_samples` equally spaced times in `[0, t_end]`.
pub fn time_grid(t_end: f64, n_samples: usize) -> Vec<f64> {
    let n = n_samples.max(2);
    (0..n).map(|i| t_end * i as f64 / (n - 1) as f64).collect()
}

/// Hopping used for the XY reference model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceHopping {
    /// `g₁²/Δ₁`, as in the dispersive Hamiltonian.
    Effective,
    /// `J₁₂`, `J₂₃` from the coupling formula.
    Formula,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XyComparison {
    pub couplings: DerivedCouplings,
    pub full: Populations,
    pub xy: Populations,
    /// `max_t max_j |n_j^full(t) − n_j^XY(t)|`.
    pub deviation: f64,
}

fn max_deviation(a: &Populations, b: &Populations) -> f64 {
    a.values
        .iter()
        .zip(&b.values)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max)
}

/// Populations of the XY chain simulated by `spec`.
pub fn xy_populations(spec: &CircuitSpec, hopping: ReferenceHopping, times: &[f64]) -> Result<Populations> {
    let dc = derived_couplings(spec)?;
    let sign = -spec.mode.sign();
    let (j12, j23) = match hopping {
        ReferenceHopping::Effective => (dc.j_eff, spec.couplings[1].powi(2) / spec.cavity_detuning(1)),
        ReferenceHopping::Formula => (dc.j12, dc.j23),
    };
    let n = spec.n_qubits;
    let bonds: Vec<(usize, usize, f64)> =
        (0..n - 1).map(|b| (b, b + 1, sign * if b % 2 == 0 { j12 } else { j23 })).collect();
    let h = hamiltonian_with_bonds(n, &bonds, dc.mapped_detuning, spec.drive);
    evolve_closed(&h, &vacuum(1 << n), times, n)
}

/// Evolves the full circuit and the XY chain from the vacuum.
pub fn compare_to_xy(spec: &CircuitSpec, hopping: ReferenceHopping, times: &[f64]) -> Result<XyComparison> {
    let couplings = derived_couplings(spec)?;
    let h = build_full_hamiltonian(spec)?;
    let full = evolve_closed(&h, &vacuum(h.nrows()), times, spec.n_qubits)?;
    let xy = xy_populations(spec, hopping, times)?;
    let deviation = max_deviation(&full, &xy);
    Ok(XyComparison { couplings, full, xy, deviation })
}

/// Largest population difference between two cutoffs of the same circuit.
pub fn truncation_difference(spec: &CircuitSpec, n_max_a: usize, n_max_b: usize, times: &[f64]) -> Result<f64> {
    let run = |n_max| -> Result<Populations> {
        let s = CircuitSpec { n_max, ..*spec };
        let h = build_full_hamiltonian(&s)?;
        evolve_closed(&h, &vacuum(h.nrows()), times, s.n_qubits)
    };
    Ok(max_deviation(&run(n_max_a)?, &run(n_max_b)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dagger;

    fn hermiticity(h: &Array2<C64>) -> f64 {
        crate::linalg::max_abs_diff(h, &dagger(h))
    }

    #[test]
    fn reference_spec_numbers() {
        let spec = CircuitSpec::reference(1.0, CouplingMode::Ferromagnetic, 2);
        let dc = derived_couplings(&spec).unwrap();
        assert!((dc.j_eff - 1.0 / 30.0).abs() < 1e-15);
        assert!(dc.constraint_residual < 1e-15);
        let g2 = (20.0f64 / 30.0).sqrt();
        assert!((dc.j12 - g2 / 2.0 * (1.0 / 30.0 + 1.0 / 20.0)).abs() < 1e-15);
        assert!((dc.mapped_detuning - 3.0 / 30.0).abs() < 1e-15);
        assert!(!dc.cavity_hopping_resonant);
        assert_eq!(spec.dimension(), 8 * 81);
        let h = build_full_hamiltonian(&spec).unwrap();
        assert_eq!(h.nrows(), 648);
        assert!(hermiticity(&h) < 1e-13);
        assert!(hermiticity(&build_effective_hamiltonian(&spec, true).unwrap()) < 1e-13);
    }

    #[test]
    fn excitation_number_conserved_without_drive() {
        let mut spec = CircuitSpec::reference(1.0, CouplingMode::Antiferromagnetic, 2);
        spec.drive = 0.0;
        let h = build_full_hamiltonian(&spec).unwrap();
        let reg = Register::of(&spec);
        let count = |i: usize| -> usize {
            (0..3).map(|q| reg.qubit(i, q)).sum::<usize>() + (0..4).map(|c| reg.photons(i, c)).sum::<usize>()
        };
        for ((a, b), v) in h.indexed_iter() {
            if v.norm() > 0.0 {
                assert_eq!(count(a), count(b));
            }
        }
    }

    #[test]
    fn uncoupled_circuit_is_block_diagonal() {
        let mut spec = CircuitSpec::reference(1.0, CouplingMode::Ferromagnetic, 1);
        spec.couplings = [0.0, 0.0];
        let h = build_full_hamiltonian(&spec).unwrap();
        let reg = Register::of(&spec);
        for ((a, b), v) in h.indexed_iter() {
            if v.norm() > 0.0 {
                assert_eq!(a % reg.photon_dim(), b % reg.photon_dim());
            }
        }
    }

    #[test]
    fn effective_vacuum_sector_is_xy_chain() {
        let spec = CircuitSpec::reference(1.0, CouplingMode::Ferromagnetic, 1);
        let h = build_effective_hamiltonian(&spec, false).unwrap();
        let reg = Register::of(&spec);
        let vac: Vec<usize> = (0..reg.dim()).filter(|&i| i % reg.photon_dim() == 0).collect();
        let block = Array2::from_shape_fn((8, 8), |(a, b)| h[[vac[a], vac[b]]]);
        let dc = derived_couplings(&spec).unwrap();
        let xy = hamiltonian_with_bonds(3, &[(0, 1, dc.j_eff), (1, 2, dc.j_eff)], dc.mapped_detuning, spec.drive);
        assert!(crate::linalg::max_abs_diff(&block, &xy) < 1e-14);
    }

    #[test]
    fn detuned_rabi_oscillation() {
        let (om, de) = (0.7, 0.4);
        let h = hamiltonian_with_bonds(1, &[], de, om);
        let times = time_grid(10.0, 51);
        let pops = evolve_closed(&h, &vacuum(2), &times, 1).unwrap();
        let w = (om * om + de * de / 4.0).sqrt();
        for (t, n) in times.iter().zip(&pops.values) {
            let want = om * om / (w * w) * (w * t).sin().powi(2);
            assert!((n[0] - want).abs() < 1e-10);
        }
        assert!(pops.norm_error < 1e-10);
    }

    #[test]
    fn zero_hamiltonian_is_static() {
        let h = Array2::<C64>::zeros((4, 4));
        let mut psi = Array1::<C64>::zeros(4);
        psi[1] = C64::new(0.6, 0.0);
        psi[3] = C64::new(0.0, 0.8);
        let pops = evolve_closed(&h, &psi, &[0.0, 3.0, 7.0], 2).unwrap();
        for v in &pops.values {
            assert!((v[0] - 0.64).abs() < 1e-14 && (v[1] - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn checks_flag_problems() {
        let spec = CircuitSpec::reference(1.0, CouplingMode::Ferromagnetic, 2);
        assert!(dispersive_checks(&spec, None).iter().all(|f| f.level == FindingLevel::Pass));
        let mut strong = spec;
        strong.drive = 5.0;
        let fs = dispersive_checks(&strong, Some(1.0));
        assert!(fs.iter().any(|f| f.check == "Ω window" && f.level == FindingLevel::Warn));
        let mut equal = spec;
        equal.cavity_freqs = [-30.0, -30.0];
        assert!(derived_couplings(&equal).unwrap().cavity_hopping_resonant);
        let mut zero = spec;
        zero.cavity_freqs = [0.0, -20.0];
        assert!(derived_couplings(&zero).is_err());
    }

    #[test]
    fn hardware_detuning_for_target_hopping() {
        // MHz: g₁ = 100, J = 10 → Δ₁ = 1000.
        let est = hardware_estimate(100.0, 10.0, 6000.0, (2000.0, 10000.0)).unwrap();
        assert!((est.required_detuning - 1000.0).abs() < 1e-9);
        assert!(est.in_range);
    }

    #[test]
    fn too_many_photon_levels_rejected() {
        let spec = CircuitSpec::reference(1.0, CouplingMode::Ferromagnetic, 40);
        assert!(matches!(build_full_hamiltonian(&spec), Err(Error::Capacity(_))));
    }
}
