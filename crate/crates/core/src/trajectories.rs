//! Quantum-jump trajectories restricted to product pure states.
//!
//! Each site carries its own normalized amplitude pair. Between jumps a site
//! evolves under `H_j − (i/2)γ n`, where `H_j` is the single-site mean-field
//! Hamiltonian with the drive renormalized by the neighbors' coherences in
//! the same trajectory. Jumps are first order in `dt`: site `j` decays with
//! probability `γ dt ⟨n_j⟩` per step, one uniform draw per site.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lattice::{Lattice, ModelParams};
use crate::linalg::{expm2_action_traceless, Mat2};
use crate::meanfield::haar_qubit;
use crate::C64;

/// Largest `γ·dt` for which the first-order jump probability is accepted.
pub const MAX_DECAY_STEP: f64 = 0.05;
const NORM_FLOOR: f64 = 1e-150;

/// RNG for trajectory `id`: the master seed selects the key, the trajectory
/// id selects an independent stream.
pub fn trajectory_rng(master_seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(id);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent {
    /// End of the step in which the jump happened.
    pub time: f64,
    pub site: usize,
}

/// Product pure state `⊗_j |ψ_j⟩` of one trajectory, with its RNG stream.
#[derive(Debug, Clone)]
pub struct TrajectoryState {
    amps: Vec<[C64; 2]>,
    id: u64,
    time: f64,
    rng: ChaCha8Rng,
    lowering: Vec<C64>,
}

impl TrajectoryState {
    /// Starts from the given amplitudes, normalizing each site.
    pub fn new(amps: Vec<[C64; 2]>, id: u64, master_seed: u64) -> Result<Self> {
        let mut amps = amps;
        for (j, a) in amps.iter_mut().enumerate() {
            let norm = (a[0].norm_sqr() + a[1].norm_sqr()).sqrt();
            if !(norm > NORM_FLOOR) {
                return Err(invalid(format!("site {j} has zero amplitude")));
            }
            a[0] /= norm;
            a[1] /= norm;
        }
        let n = amps.len();
        Ok(Self { amps, id, time: 0.0, rng: trajectory_rng(master_seed, id), lowering: vec![C64::new(0.0, 0.0); n] })
    }

    /// Haar-random product state drawn from the trajectory's own stream.
    pub fn random(n: usize, id: u64, master_seed: u64) -> Self {
        let mut rng = trajectory_rng(master_seed, id);
        let amps = (0..n).map(|_| haar_qubit(&mut rng)).collect();
        Self { amps, id, time: 0.0, rng, lowering: vec![C64::new(0.0, 0.0); n] }
    }

    pub fn all_down(n: usize, id: u64, master_seed: u64) -> Self {
        let down = [C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
        Self::new(vec![down; n], id, master_seed).expect("normalized")
    }

    pub fn all_up(n: usize, id: u64, master_seed: u64) -> Self {
        let up = [C64::new(0.0, 0.0), C64::new(1.0, 0.0)];
        Self::new(vec![up; n], id, master_seed).expect("normalized")
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn amplitudes(&self) -> &[[C64; 2]] {
        &self.amps
    }

    pub fn density(&self, j: usize) -> f64 {
        self.amps[j][1].norm_sqr()
    }

    pub fn densities(&self) -> Vec<f64> {
        (0..self.len()).map(|j| self.density(j)).collect()
    }

    /// `⟨ψ_j|σ⁻|ψ_j⟩ = ψ₀* ψ₁`.
    pub fn lowering(&self, j: usize) -> C64 {
        self.amps[j][0].conj() * self.amps[j][1]
    }

    /// Largest deviation of a site norm from one.
    pub fn norm_error(&self) -> f64 {
        self.amps
            .iter()
            .map(|a| (a[0].norm_sqr() + a[1].norm_sqr()).sqrt() - 1.0)
            .fold(0.0, |m, x| m.max(x.abs()))
    }
}

fn effective_hamiltonian(drive: C64, params: &ModelParams) -> Mat2 {
    [
        [C64::new(0.0, 0.0), drive.conj()],
        [drive, C64::new(params.detuning, -params.decay / 2.0)],
    ]
}

/// `H_j − (i/2)γ n` in the `(|0⟩, |1⟩)` basis, with the drive
/// `Ω_j = Ω − J Σ_k ⟨σ⁻_k⟩` taken from this trajectory's neighbors.
pub fn local_effective_hamiltonian(
    state: &TrajectoryState,
    site: usize,
    params: &ModelParams,
    lattice: &Lattice,
) -> Result<Mat2> {
    let sum: C64 = lattice.neighbors(site)?.iter().map(|&k| state.lowering(k)).sum();
    Ok(effective_hamiltonian(C64::new(params.drive, 0.0) - sum * params.hopping, params))
}

/// Advances every site by `dt`, returning the number of jumps. Drives use
/// the coherences at the start of the step.
pub fn trajectory_step(
    state: &mut TrajectoryState,
    params: &ModelParams,
    lattice: &Lattice,
    dt: f64,
    mut log: Option<&mut Vec<JumpEvent>>,
) -> Result<usize> {
    if !(dt > 0.0) || dt * params.decay >= MAX_DECAY_STEP {
        return Err(invalid(format!(
            "time step {dt} outside the first-order jump regime (need 0 < γ·dt < {MAX_DECAY_STEP})"
        )));
    }
    if state.len() != lattice.n_sites() {
        return Err(invalid("trajectory and lattice sizes differ"));
    }
    for j in 0..state.len() {
        state.lowering[j] = state.lowering(j);
    }
    let t_end = state.time + dt;
    let adj = lattice.adjacency();
    let mut jumps = 0;
    for j in 0..state.amps.len() {
        let u: f64 = state.rng.random();
        let a = state.amps[j];
        let p = params.decay * dt * a[1].norm_sqr();
        if u < p {
            let c = a[1] / a[1].norm();
            state.amps[j] = [c, C64::new(0.0, 0.0)];
            jumps += 1;
            if let Some(log) = log.as_deref_mut() {
                log.push(JumpEvent { time: t_end, site: j });
            }
            continue;
        }
        let sum: C64 = adj[j].iter().map(|&k| state.lowering[k]).sum();
        let h = effective_hamiltonian(C64::new(params.drive, 0.0) - sum * params.hopping, params);
        let mi = C64::new(0.0, -dt);
        // The common phase and damping factor drop out on renormalization.
        let b = expm2_action_traceless(&[[h[0][0] * mi, h[0][1] * mi], [h[1][0] * mi, h[1][1] * mi]], &a);
        let norm = (b[0].norm_sqr() + b[1].norm_sqr()).sqrt();
        if !(norm > NORM_FLOOR) {
            return Err(Error::Numerical(format!(
                "norm underflow at site {j}, trajectory {}, t = {}",
                state.id, state.time
            )));
        }
        state.amps[j] = [b[0] / norm, b[1] / norm];
    }
    state.time = t_end;
    Ok(jumps)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleSpec {
    pub t_total: f64,
    pub dt: f64,
    pub n_traj: usize,
    /// Fraction of the run, counted from the end, entering time averages.
    pub window: f64,
    pub bins: usize,
    pub seed: u64,
}

impl Default for EnsembleSpec {
    fn default() -> Self {
        Self { t_total: 200.0, dt: 2e-3, n_traj: 1000, window: 0.3, bins: 50, seed: 0 }
    }
}

impl EnsembleSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_total > 0.0 && self.dt > 0.0 && self.dt <= self.t_total) {
            return Err(invalid(format!("need 0 < dt <= T, got dt={} T={}", self.dt, self.t_total)));
        }
        if self.n_traj == 0 || self.bins == 0 {
            return Err(invalid("need at least one trajectory and one bin"));
        }
        if !(self.window > 0.0 && self.window <= 1.0) {
            return Err(invalid(format!("window fraction {} outside (0, 1]", self.window)));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_total / self.dt).round().max(1.0) as usize
    }

    /// Number of final steps entering the time average.
    pub fn window_steps(&self) -> usize {
        ((self.window * self.steps() as f64).round() as usize).clamp(1, self.steps())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub id: u64,
    /// Time-averaged central density over the window.
    pub central_average: f64,
    pub profile_average: Vec<f64>,
    pub jumps: usize,
}

/// Runs trajectory `id` from a Haar-random product state.
pub fn run_trajectory(
    params: &ModelParams,
    lattice: &Lattice,
    spec: &EnsembleSpec,
    id: u64,
    log: Option<&mut Vec<JumpEvent>>,
) -> Result<TrajectorySummary> {
    let state = TrajectoryState::random(lattice.n_sites(), id, spec.seed);
    run_from(state, params, lattice, spec, log)
}

/// Runs a trajectory from a given initial state for `spec.t_total`.
pub fn run_from(
    mut state: TrajectoryState,
    params: &ModelParams,
    lattice: &Lattice,
    spec: &EnsembleSpec,
    mut log: Option<&mut Vec<JumpEvent>>,
) -> Result<TrajectorySummary> {
    spec.validate()?;
    params.validate_allow_closed()?;
    let steps = spec.steps();
    let start_avg = steps - spec.window_steps();
    let c = lattice.central_site();
    let mut profile = vec![0.0; lattice.n_sites()];
    let mut jumps = 0;
    for s in 0..steps {
        jumps += trajectory_step(&mut state, params, lattice, spec.dt, log.as_deref_mut())?;
        if s >= start_avg {
            for (p, a) in profile.iter_mut().zip(&state.amps) {
                *p += a[1].norm_sqr();
            }
        }
    }
    let w = (steps - start_avg) as f64;
    profile.iter_mut().for_each(|p| *p /= w);
    Ok(TrajectorySummary { id: state.id, central_average: profile[c], profile_average: profile, jumps })
}

/// Uniform histogram on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub counts: Vec<usize>,
}

/// Two populated clusters separated by a depleted valley.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bimodality {
    pub low_peak: f64,
    pub high_peak: f64,
    pub low_count: usize,
    pub high_count: usize,
    pub valley: f64,
    pub valley_count: usize,
}

impl Bimodality {
    pub fn separation(&self) -> f64 {
        self.high_peak - self.low_peak
    }
}

impl Histogram {
    pub fn new(values: &[f64], bins: usize) -> Self {
        let mut counts = vec![0; bins];
        for &v in values {
            let b = ((v * bins as f64).floor().max(0.0) as usize).min(bins - 1);
            counts[b] += 1;
        }
        Self { counts }
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn center(&self, bin: usize) -> f64 {
        (bin as f64 + 0.5) / self.bins() as f64
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// Best pair of peaks at least `min_separation` apart whose valley holds
    /// fewer than half the smaller peak's count, with at least
    /// `min_mass` of the samples on each side of the valley. Pairs are ranked
    /// by the smaller peak count.
    pub fn bimodality(&self, min_separation: f64, min_mass: f64) -> Option<Bimodality> {
        let total = self.total() as f64;
        let nb = self.bins();
        let mut best: Option<Bimodality> = None;
        for i in 0..nb {
            for k in i + 1..nb {
                if self.center(k) - self.center(i) <= min_separation {
                    continue;
                }
                let (vb, &vc) = self.counts[i + 1..k]
                    .iter()
                    .enumerate()
                    .min_by_key(|&(_, c)| *c)
                    .map(|(o, c)| (i + 1 + o, c))
                    .expect("non-empty valley");
                let smaller = self.counts[i].min(self.counts[k]);
                if 2 * vc >= smaller {
                    continue;
                }
                let left: usize = self.counts[..vb].iter().sum();
                let right: usize = self.counts[vb + 1..].iter().sum();
                if (left as f64) < min_mass * total || (right as f64) < min_mass * total {
                    continue;
                }
                let cand = Bimodality {
                    low_peak: self.center(i),
                    high_peak: self.center(k),
                    low_count: self.counts[i],
                    high_count: self.counts[k],
                    valley: self.center(vb),
                    valley_count: vc,
                };
                if best.is_none_or(|b| smaller > b.low_count.min(b.high_count)) {
                    best = Some(cand);
                }
            }
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub n_traj: usize,
    pub window: f64,
    /// Time-averaged central density per trajectory, in trajectory order.
    pub central_averages: Vec<f64>,
    pub histogram: Histogram,
    pub mean: f64,
    pub stderr: f64,
    /// Time- and ensemble-averaged density profile.
    pub profile: Vec<f64>,
    pub total_jumps: usize,
}

/// Runs `spec.n_traj` independent trajectories from random product states.
/// The result depends only on the inputs, not on scheduling.
pub fn run_ensemble(params: &ModelParams, lattice: &Lattice, spec: &EnsembleSpec) -> Result<EnsembleStats> {
    spec.validate()?;
    let runs: Vec<TrajectorySummary> = (0..spec.n_traj as u64)
        .into_par_iter()
        .map(|id| run_trajectory(params, lattice, spec, id, None))
        .collect::<Result<_>>()?;
    Ok(summarize(&runs, spec, lattice.n_sites()))
}

pub fn summarize(runs: &[TrajectorySummary], spec: &EnsembleSpec, n_sites: usize) -> EnsembleStats {
    let central: Vec<f64> = runs.iter().map(|r| r.central_average).collect();
    let (mean, stderr) = mean_stderr(&central);
    let mut profile = vec![0.0; n_sites];
    for r in runs {
        for (p, v) in profile.iter_mut().zip(&r.profile_average) {
            *p += v / runs.len() as f64;
        }
    }
    EnsembleStats {
        n_traj: runs.len(),
        window: spec.window,
        histogram: Histogram::new(&central, spec.bins),
        central_averages: central,
        mean,
        stderr,
        profile,
        total_jumps: runs.iter().map(|r| r.jumps).sum(),
    }
}

/// Sample mean and standard error of the mean.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::INFINITY);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn p(j: f64, om: f64, de: f64) -> ModelParams {
        ModelParams::in_decay_units(j, om, de)
    }

    #[test]
    fn undriven_decoupled_hamiltonian() {
        let lat = Lattice::chain(2).unwrap();
        let st = TrajectoryState::all_up(2, 0, 0);
        let h = local_effective_hamiltonian(&st, 0, &p(0.0, 0.0, 0.7), &lat).unwrap();
        assert_eq!(h[1][1], C64::new(0.7, -0.5));
        assert_eq!(h[0][0], C64::new(0.0, 0.0));
        assert_eq!(h[0][1], C64::new(0.0, 0.0));
    }

    #[test]
    fn closed_limit_is_hermitian() {
        let lat = Lattice::chain(3).unwrap();
        let st = TrajectoryState::random(3, 4, 9);
        let params = ModelParams { decay: 0.0, ..p(2.0, 1.0, 0.3) };
        let h = local_effective_hamiltonian(&st, 1, &params, &lat).unwrap();
        assert_abs_diff_eq!((h[0][1] - h[1][0].conj()).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(h[1][1].im, 0.0);
    }

    #[test]
    fn neighbor_coherence_renormalizes_drive() {
        let lat = Lattice::chain(2).unwrap();
        // Real amplitudes with ψ₀ψ₁ = 0.1.
        let c1 = ((1.0 - (1.0f64 - 0.04).sqrt()) / 2.0).sqrt();
        let c0 = 0.1 / c1;
        let amps = vec![[C64::new(1.0, 0.0), C64::new(0.0, 0.0)], [C64::new(c0, 0.0), C64::new(c1, 0.0)]];
        let st = TrajectoryState::new(amps, 0, 0).unwrap();
        assert_abs_diff_eq!(st.lowering(1).re, 0.1, epsilon = 1e-14);
        let h = local_effective_hamiltonian(&st, 0, &p(2.0, 1.0, 0.0), &lat).unwrap();
        assert_abs_diff_eq!(h[1][0].re, 0.8, epsilon = 1e-14);
        assert_abs_diff_eq!(h[0][1].re, 0.8, epsilon = 1e-14);
    }

    #[test]
    fn empty_sites_never_jump() {
        let lat = Lattice::chain(4).unwrap();
        let mut st = TrajectoryState::all_down(4, 1, 1);
        let params = p(2.0, 0.0, 0.5);
        for _ in 0..1000 {
            assert_eq!(trajectory_step(&mut st, &params, &lat, 2e-3, None).unwrap(), 0);
        }
    }

    #[test]
    fn full_sites_jump_with_probability_gamma_dt() {
        let lat = Lattice::chain(1).unwrap();
        let params = p(0.0, 0.0, 0.0);
        let trials = 200_000;
        let jumps: usize = (0..trials)
            .map(|id| {
                let mut st = TrajectoryState::all_up(1, id, 3);
                trajectory_step(&mut st, &params, &lat, 1e-3, None).unwrap()
            })
            .sum();
        let rate = jumps as f64 / trials as f64;
        let sigma = (1e-3 * (1.0 - 1e-3) / trials as f64).sqrt();
        assert!((rate - 1e-3).abs() < 4.0 * sigma, "rate {rate}");
    }

    #[test]
    fn rejects_coarse_step() {
        let lat = Lattice::chain(1).unwrap();
        let mut st = TrajectoryState::all_up(1, 0, 0);
        assert!(trajectory_step(&mut st, &p(0.0, 1.0, 0.0), &lat, 0.06, None).is_err());
    }

    #[test]
    fn closed_single_site_rabi_oscillation() {
        let lat = Lattice::chain(1).unwrap();
        let (om, de) = (0.8, 0.6);
        let params = ModelParams { decay: 0.0, ..p(0.0, om, de) };
        let mut st = TrajectoryState::all_down(1, 0, 0);
        let w = (de * de + 4.0 * om * om).sqrt();
        for step in 1..=5000 {
            trajectory_step(&mut st, &params, &lat, 1e-3, None).unwrap();
            let t = step as f64 * 1e-3;
            let want = 4.0 * om * om / (w * w) * (w * t / 2.0).sin().powi(2);
            assert!((st.density(0) - want).abs() < 1e-6, "t={t}");
        }
    }

    #[test]
    fn histogram_mass_and_bimodality() {
        let mut vals = vec![0.2; 300];
        vals.extend(vec![0.71; 200]);
        vals.push(1.0);
        let h = Histogram::new(&vals, 50);
        assert_eq!(h.total(), 501);
        assert_eq!(h.counts[49], 1);
        let b = h.bimodality(0.15, 0.1).unwrap();
        assert_abs_diff_eq!(b.low_peak, 0.21, epsilon = 1e-12);
        assert_abs_diff_eq!(b.high_peak, 0.71, epsilon = 1e-12);
        let mut uni: Vec<f64> = (0..50).map(|i| 0.45 + 0.002 * i as f64).collect();
        uni.push(0.95);
        let uni = Histogram::new(&uni, 50);
        assert!(uni.bimodality(0.15, 0.1).is_none());
    }
}
