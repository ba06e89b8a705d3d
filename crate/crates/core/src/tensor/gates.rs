use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::pauli;
use crate::dense::{apply_lindblad, site_operator};
use crate::error::{invalid, Result};
use crate::lattice::{Geometry, Lattice, LocalOp, ModelParams};
use crate::linalg::expm;
use crate::C64;

/// Splitting order of one time step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TrotterOrder {
    /// `A(dt/2) B(dt) A(dt/2)`.
    #[default]
    Second,
    /// Three second-order steps with the Yoshida weights.
    Fourth,
}

/// Gate layer: bonds starting on even sites or on odd sites.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layer {
    Even,
    Odd,
}

impl Layer {
    pub fn bonds(self, n_sites: usize) -> impl Iterator<Item = usize> {
        let start = match self {
            Layer::Even => 0,
            Layer::Odd => 1,
        };
        (start..n_sites.saturating_sub(1)).step_by(2)
    }
}

/// Exponentials of the bond superoperators for a chain, in the product
/// Pauli basis. Site terms are shared between the bonds touching a site.
#[derive(Debug, Clone)]
pub struct TrotterSchedule {
    pub dt: f64,
    pub order: TrotterOrder,
    n_sites: usize,
    params: ModelParams,
    /// Bond generators (16×16), or the single 4×4 site generator for `N = 1`.
    generators: Vec<Array2<f64>>,
    /// Gates for every distinct layer duration, keyed by the multiple of `dt`.
    gates: Vec<(f64, Vec<Array2<f64>>)>,
}

fn yoshida_weights() -> [f64; 3] {
    let c = 2f64.powf(1.0 / 3.0);
    let w1 = 1.0 / (2.0 - c);
    [w1, -c * w1, w1]
}

/// Layer applications of one step as `(layer, multiple of dt)`.
fn single_step(order: TrotterOrder) -> Vec<(Layer, f64)> {
    match order {
        TrotterOrder::Second => vec![(Layer::Even, 0.5), (Layer::Odd, 1.0), (Layer::Even, 0.5)],
        TrotterOrder::Fourth => yoshida_weights()
            .iter()
            .flat_map(|&w| [(Layer::Even, 0.5 * w), (Layer::Odd, w), (Layer::Even, 0.5 * w)])
            .collect(),
    }
}

/// `steps` consecutive steps with adjacent applications of the same layer
/// fused.
pub fn merged_sequence(order: TrotterOrder, steps: usize) -> Vec<(Layer, f64)> {
    let mut out: Vec<(Layer, f64)> = Vec::new();
    for _ in 0..steps {
        for (layer, w) in single_step(order) {
            match out.last_mut() {
                Some((l, acc)) if *l == layer => *acc += w,
                _ => out.push((layer, w)),
            }
        }
    }
    out
}

/// Hamiltonian and jump operators of one bond on a two-site register.
fn bond_terms(params: &ModelParams, w_left: f64, w_right: f64) -> (Array2<C64>, Vec<(f64, Array2<C64>)>) {
    let mut h = Array2::<C64>::zeros((4, 4));
    let sp = LocalOp::SigmaPlus.matrix();
    let sm = LocalOp::SigmaMinus.matrix();
    let num = LocalOp::Number.matrix();
    let mut jumps = Vec::new();
    for (site, w) in [(0, w_left), (1, w_right)] {
        let x = site_operator(&sp, site, 2) + site_operator(&sm, site, 2);
        h = h + site_operator(&num, site, 2) * C64::new(w * params.detuning, 0.0) + x * C64::new(w * params.drive, 0.0);
        jumps.push((w * params.decay, site_operator(&sm, site, 2)));
    }
    let hop = site_operator(&sp, 0, 2).dot(&site_operator(&sm, 1, 2)) + site_operator(&sp, 1, 2).dot(&site_operator(&sm, 0, 2));
    h = h - hop * C64::new(params.hopping, 0.0);
    (h, jumps)
}

/// Superoperator of bond `(b, b+1)` of an `n`-site chain, with each site
/// term weighted by the inverse number of bonds at that site.
pub fn bond_generator(params: &ModelParams, n_sites: usize, b: usize) -> Array2<f64> {
    let share = |site: usize| if site == 0 || site == n_sites - 1 { 1.0 } else { 0.5 };
    let (h, jumps) = bond_terms(params, share(b), share(b + 1));
    pauli::superoperator(2, |x| apply_lindblad(&h, &jumps, x))
}

/// Superoperator of an isolated site.
pub fn site_generator(params: &ModelParams) -> Array2<f64> {
    let sp = crate::linalg::mat2_to_array(&LocalOp::SigmaPlus.matrix());
    let sm = crate::linalg::mat2_to_array(&LocalOp::SigmaMinus.matrix());
    let num = crate::linalg::mat2_to_array(&LocalOp::Number.matrix());
    let h = num * C64::new(params.detuning, 0.0) + (&sp + &sm) * C64::new(params.drive, 0.0);
    let jumps = vec![(params.decay, sm)];
    pauli::superoperator(1, |x| apply_lindblad(&h, &jumps, x))
}

/// Builds the bond gates of a chain for time step `dt`.
pub fn build_trotter_gates(
    params: &ModelParams,
    lattice: &Lattice,
    dt: f64,
    order: TrotterOrder,
) -> Result<TrotterSchedule> {
    params.validate_allow_closed()?;
    let n = match lattice.geometry() {
        Geometry::Chain { n } => n,
        Geometry::Rect { nx, ny } if nx == 1 || ny == 1 => nx * ny,
        Geometry::Rect { .. } => return Err(invalid("tensor-network evolution needs a 1D chain")),
    };
    if !(dt.is_finite() && dt >= 0.0) {
        return Err(invalid(format!("time step must be finite and non-negative, got {dt}")));
    }
    let generators = if n == 1 {
        vec![site_generator(params)]
    } else {
        (0..n - 1).map(|b| bond_generator(params, n, b)).collect()
    };
    let mut sched = TrotterSchedule { dt, order, n_sites: n, params: *params, generators, gates: Vec::new() };
    // Two steps contain every fused duration that longer runs produce.
    for (_, w) in merged_sequence(order, 2) {
        sched.ensure_gates(w);
    }
    Ok(sched)
}

impl TrotterSchedule {
    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn generators(&self) -> &[Array2<f64>] {
        &self.generators
    }

    fn ensure_gates(&mut self, weight: f64) {
        if self.gates.iter().any(|(w, _)| *w == weight) {
            return;
        }
        let tau = weight * self.dt;
        let gates = self.generators.iter().map(|g| expm(&(g * tau))).collect();
        self.gates.push((weight, gates));
    }

    /// Gates of duration `weight·dt`, one per bond (or one site gate).
    pub(crate) fn gates(&self, weight: f64) -> &[Array2<f64>] {
        &self
            .gates
            .iter()
            .find(|(w, _)| *w == weight)
            .expect("gate durations are precomputed")
            .1
    }

    /// Same schedule with another time step.
    pub fn with_dt(&self, dt: f64) -> Self {
        let mut s = Self { dt, gates: Vec::new(), ..self.clone() };
        for (_, w) in merged_sequence(self.order, 2) {
            s.ensure_gates(w);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::{dense_liouvillian, lindblad_generator};
    use crate::lattice::Lattice;

    fn full_pauli_generator(lat: &Lattice, p: &ModelParams) -> Array2<f64> {
        let n = lat.n_sites();
        let h = crate::dense::hamiltonian(lat, p).unwrap();
        let sm = LocalOp::SigmaMinus.matrix();
        let jumps: Vec<_> = (0..n).map(|j| (p.decay, site_operator(&sm, j, n))).collect();
        // Cross-check that the column-stacked generator describes the same map.
        let l = lindblad_generator(&h, &jumps);
        assert!(crate::linalg::max_abs_diff(&l, &dense_liouvillian(lat, p).unwrap()) < 1e-14);
        pauli::superoperator(n, |x| apply_lindblad(&h, &jumps, x))
    }

    #[test]
    fn bond_generators_reassemble_full_generator() {
        let p = ModelParams::in_decay_units(2.0, 1.0, 0.7);
        let n = 4;
        let lat = Lattice::chain(n).unwrap();
        let full = full_pauli_generator(&lat, &p);
        let mut sum = Array2::<f64>::zeros((256, 256));
        for b in 0..n - 1 {
            let g = bond_generator(&p, n, b);
            let left = 4usize.pow(b as u32);
            let right = 4usize.pow((n - b - 2) as u32);
            let emb = crate::linalg::kron(&crate::linalg::kron(&Array2::eye(left), &g), &Array2::eye(right));
            sum = sum + emb;
        }
        let err = (&sum - &full).iter().map(|x| x.abs()).fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn merged_sequence_fuses_half_steps() {
        let seq = merged_sequence(TrotterOrder::Second, 3);
        let weights: Vec<f64> = seq.iter().map(|x| x.1).collect();
        assert_eq!(weights, vec![0.5, 1.0, 1.0, 1.0, 1.0, 1.0, 0.5]);
        let total: f64 = merged_sequence(TrotterOrder::Fourth, 2).iter().filter(|x| x.0 == Layer::Odd).map(|x| x.1).sum();
        assert!((total - 2.0).abs() < 1e-14);
    }

    #[test]
    fn generators_preserve_trace() {
        let p = ModelParams::in_decay_units(2.0, 1.0, -0.5);
        let g = bond_generator(&p, 5, 2);
        // Row of the identity-identity element: d Tr/dt = 0.
        for b in 0..16 {
            assert!(g[[0, b]].abs() < 1e-14);
        }
        let s = site_generator(&p);
        for b in 0..4 {
            assert!(s[[0, b]].abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_two_dimensional_lattice() {
        let p = ModelParams::in_decay_units(2.0, 1.0, 0.0);
        assert!(build_trotter_gates(&p, &Lattice::rect(3, 3).unwrap(), 0.01, TrotterOrder::Second).is_err());
        assert!(build_trotter_gates(&p, &Lattice::rect(1, 3).unwrap(), 0.01, TrotterOrder::Second).is_ok());
    }
}
