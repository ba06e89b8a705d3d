use ndarray::{Array2, Array3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::chain::{Chain, TruncationPolicy};
use super::gates::Layer;
use crate::dense::site_operator;
use crate::error::{invalid, Error, Result};
use crate::lattice::{Geometry, Lattice, LocalOp, ModelParams};
use crate::linalg::{expm, mat2_to_array};
use crate::meanfield::haar_qubit;
use crate::trajectories::{summarize, trajectory_rng, EnsembleSpec, EnsembleStats, TrajectorySummary, MAX_DECAY_STEP};
use crate::C64;

/// Non-unitary propagators `exp(−i H_eff τ)` for the two layers of a chain.
#[derive(Debug, Clone)]
pub struct NonHermitianGates {
    dt: f64,
    n_sites: usize,
    half: Vec<Array2<C64>>,
    full: Vec<Array2<C64>>,
}

fn effective_bond_hamiltonian(params: &ModelParams, w_left: f64, w_right: f64) -> Array2<C64> {
    let sp = LocalOp::SigmaPlus.matrix();
    let sm = LocalOp::SigmaMinus.matrix();
    let num = LocalOp::Number.matrix();
    let onsite = C64::new(params.detuning, -0.5 * params.decay);
    let mut h = Array2::<C64>::zeros((4, 4));
    for (site, w) in [(0, w_left), (1, w_right)] {
        let x = site_operator(&sp, site, 2) + site_operator(&sm, site, 2);
        h = h + site_operator(&num, site, 2) * (onsite * w) + x * C64::new(w * params.drive, 0.0);
    }
    let hop = site_operator(&sp, 0, 2).dot(&site_operator(&sm, 1, 2)) + site_operator(&sp, 1, 2).dot(&site_operator(&sm, 0, 2));
    h - hop * C64::new(params.hopping, 0.0)
}

impl NonHermitianGates {
    pub fn new(params: &ModelParams, lattice: &Lattice, dt: f64) -> Result<Self> {
        params.validate_allow_closed()?;
        let n = match lattice.geometry() {
            Geometry::Chain { n } => n,
            Geometry::Rect { nx, ny } if nx == 1 || ny == 1 => nx * ny,
            Geometry::Rect { .. } => return Err(invalid("MPS trajectories need a 1D chain")),
        };
        let generators: Vec<Array2<C64>> = if n == 1 {
            let sm = mat2_to_array(&LocalOp::SigmaMinus.matrix());
            let sp = mat2_to_array(&LocalOp::SigmaPlus.matrix());
            let num = mat2_to_array(&LocalOp::Number.matrix());
            vec![num * C64::new(params.detuning, -0.5 * params.decay) + (sp + sm) * C64::new(params.drive, 0.0)]
        } else {
            let share = |s: usize| if s == 0 || s == n - 1 { 1.0 } else { 0.5 };
            (0..n - 1).map(|b| effective_bond_hamiltonian(params, share(b), share(b + 1))).collect()
        };
        let prop = |tau: f64| -> Vec<Array2<C64>> {
            generators.iter().map(|h| expm(&(h * C64::new(0.0, -tau)))).collect()
        };
        Ok(Self { dt, n_sites: n, half: prop(0.5 * dt), full: prop(dt) })
    }
}

/// Pure state of one trajectory as a matrix-product state.
#[derive(Debug, Clone)]
pub struct TrajectoryMps {
    chain: Chain<C64>,
    id: u64,
    time: f64,
    rng: ChaCha8Rng,
}

impl TrajectoryMps {
    /// Product state from per-site amplitudes.
    pub fn from_product(amps: &[[C64; 2]], id: u64, rng: ChaCha8Rng) -> Result<Self> {
        let tensors: Vec<Array3<C64>> =
            amps.iter().map(|a| Array3::from_shape_vec((1, 2, 1), a.to_vec()).unwrap()).collect();
        let mut s = Self { chain: Chain::from_tensors(tensors, 0)?, id, time: 0.0, rng };
        s.normalize()?;
        Ok(s)
    }

    /// Haar-random product state drawn from the trajectory's own stream, as
    /// for product-state trajectories.
    pub fn random(n: usize, id: u64, master_seed: u64) -> Self {
        let mut rng = trajectory_rng(master_seed, id);
        let amps: Vec<[C64; 2]> = (0..n).map(|_| haar_qubit(&mut rng)).collect();
        Self::from_product(&amps, id, rng).expect("Haar states are normalized")
    }

    pub fn len(&self) -> usize {
        self.chain.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chain.is_empty()
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn max_bond(&self) -> usize {
        self.chain.max_bond()
    }

    pub fn norm(&self) -> f64 {
        self.chain.norm()
    }

    fn normalize(&mut self) -> Result<()> {
        let norm = self.chain.norm();
        if !(norm > 1e-150) || !norm.is_finite() {
            return Err(Error::Numerical(format!("trajectory {} lost its norm at t = {}", self.id, self.time)));
        }
        self.chain.scale_center(C64::new(1.0 / norm, 0.0));
        Ok(())
    }

    /// `⟨n_j⟩` for every site, obtained by moving the orthogonality center
    /// across the chain.
    pub fn densities(&mut self) -> Result<Vec<f64>> {
        let n = self.len();
        let mut out = vec![0.0; n];
        let forward = self.chain.center() < n / 2;
        let order: Vec<usize> = if forward { (0..n).collect() } else { (0..n).rev().collect() };
        let norm2 = self.chain.norm().powi(2);
        for j in order {
            self.chain.move_center(j)?;
            let t = &self.chain.tensors()[j];
            out[j] = t.index_axis(ndarray::Axis(1), 1).iter().map(|z| z.norm_sqr()).sum::<f64>() / norm2;
        }
        Ok(out)
    }

    fn apply_layer(&mut self, gates: &[Array2<C64>], layer: Layer, policy: &TruncationPolicy) -> Result<()> {
        let n = self.len();
        if n == 1 {
            if layer == Layer::Even {
                self.chain.apply_one_site(0, &gates[0]);
            }
            return Ok(());
        }
        let mut bonds: Vec<usize> = layer.bonds(n).collect();
        let rightward = self.chain.center() < n / 2;
        if !rightward {
            bonds.reverse();
        }
        for b in bonds {
            self.chain.move_center(if rightward { b } else { b + 1 })?;
            self.chain.apply_two_site(b, &gates[b], policy, rightward)?;
        }
        Ok(())
    }

    /// One step: jumps decided from the exact densities, then the
    /// non-Hermitian evolution with the symmetric splitting. Returns the
    /// number of jumps.
    pub fn step(&mut self, gates: &NonHermitianGates, params: &ModelParams, policy: &TruncationPolicy) -> Result<usize> {
        if gates.n_sites != self.len() {
            return Err(invalid("gates and trajectory sizes differ"));
        }
        if gates.dt * params.decay >= MAX_DECAY_STEP {
            return Err(invalid(format!("time step {} outside the first-order jump regime", gates.dt)));
        }
        let dens = self.densities()?;
        let lower = mat2_to_array(&LocalOp::SigmaMinus.matrix());
        let mut jumps = 0;
        for (j, nj) in dens.iter().enumerate() {
            let u: f64 = self.rng.random();
            if u < params.decay * gates.dt * nj {
                self.chain.apply_one_site(j, &lower);
                jumps += 1;
            }
        }
        if jumps > 0 {
            let c = self.chain.center();
            self.chain.canonicalize(c)?;
            self.normalize()?;
        }
        self.apply_layer(&gates.half, Layer::Even, policy)?;
        self.apply_layer(&gates.full, Layer::Odd, policy)?;
        self.apply_layer(&gates.half, Layer::Even, policy)?;
        self.normalize()?;
        self.time += gates.dt;
        Ok(jumps)
    }
}

/// Runs one trajectory and time-averages the densities over the final
/// window.
pub fn run_mps_trajectory(
    params: &ModelParams,
    lattice: &Lattice,
    chi_tilde: usize,
    spec: &EnsembleSpec,
    id: u64,
) -> Result<TrajectorySummary> {
    spec.validate()?;
    let policy = TruncationPolicy::new(chi_tilde, 1e-10)?;
    let gates = NonHermitianGates::new(params, lattice, spec.dt)?;
    let mut state = TrajectoryMps::random(lattice.n_sites(), id, spec.seed);
    let steps = spec.steps();
    let start_avg = steps - spec.window_steps();
    let mut profile = vec![0.0; lattice.n_sites()];
    let mut jumps = 0;
    for s in 0..steps {
        jumps += state.step(&gates, params, &policy)?;
        if s >= start_avg {
            for (p, d) in profile.iter_mut().zip(state.densities()?) {
                *p += d;
            }
        }
    }
    let w = (steps - start_avg) as f64;
    profile.iter_mut().for_each(|p| *p /= w);
    let c = lattice.central_site();
    Ok(TrajectorySummary { id, central_average: profile[c], profile_average: profile, jumps })
}

/// Ensemble of independent MPS trajectories with bond dimension `chi_tilde`.
pub fn mps_trajectory_run(
    params: &ModelParams,
    lattice: &Lattice,
    chi_tilde: usize,
    spec: &EnsembleSpec,
) -> Result<EnsembleStats> {
    spec.validate()?;
    let runs: Vec<TrajectorySummary> = (0..spec.n_traj as u64)
        .into_par_iter()
        .map(|id| run_mps_trajectory(params, lattice, chi_tilde, spec, id))
        .collect::<Result<_>>()?;
    Ok(summarize(&runs, spec, lattice.n_sites()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn undamped_evolution_keeps_norm_and_bond_cap() {
        let p = ModelParams { hopping: 2.0, drive: 1.0, detuning: 0.3, decay: 0.0 };
        let lat = Lattice::chain(6).unwrap();
        let gates = NonHermitianGates::new(&p, &lat, 0.01).unwrap();
        let mut s = TrajectoryMps::random(6, 0, 3);
        let policy = TruncationPolicy::with_chi(4);
        for _ in 0..50 {
            assert_eq!(s.step(&gates, &p, &policy).unwrap(), 0);
            assert!((s.norm() - 1.0).abs() < 1e-12);
            assert!(s.max_bond() <= 4);
        }
        assert!(s.chain.isometry_error() < 1e-10);
    }

    #[test]
    fn empty_chain_never_jumps() {
        let p = ModelParams::in_decay_units(1.0, 0.0, 0.0);
        let lat = Lattice::chain(3).unwrap();
        let gates = NonHermitianGates::new(&p, &lat, 0.01).unwrap();
        let down = [C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
        let mut s = TrajectoryMps::from_product(&[down; 3], 0, trajectory_rng(0, 0)).unwrap();
        for _ in 0..100 {
            assert_eq!(s.step(&gates, &p, &TruncationPolicy::with_chi(4)).unwrap(), 0);
        }
        assert!(s.densities().unwrap().iter().all(|d| d.abs() < 1e-14));
    }
}
