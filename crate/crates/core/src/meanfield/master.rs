use serde::{Deserialize, Serialize};

use super::ProductState;
use crate::error::{invalid, Result};
use crate::lattice::{Lattice, ModelParams};
use crate::linalg::{expm_action, Mat4};
use crate::C64;

/// Drive felt by `site` once the neighbors' coherences are folded in:
/// `Ω_j = Ω − J Σ_k ⟨σ⁻_k⟩`.
pub fn effective_driving(
    state: &ProductState,
    site: usize,
    params: &ModelParams,
    lattice: &Lattice,
) -> Result<C64> {
    let nbrs = lattice.neighbors(site)?;
    let sum: C64 = nbrs.iter().map(|&k| state.lowering(k)).sum();
    Ok(C64::new(params.drive, 0.0) - sum * params.hopping)
}

/// Local mean-field Liouvillian acting on `(ρ⁰⁰, ρ⁰¹, ρ¹¹, ρ¹⁰)`.
pub fn local_liouvillian(drive: C64, params: &ModelParams) -> Mat4 {
    let i = C64::new(0.0, 1.0);
    let g = params.decay;
    let de = params.detuning;
    let w = drive;
    let wc = drive.conj();
    let z = C64::new(0.0, 0.0);
    [
        [z, i * w, C64::new(g, 0.0), -i * wc],
        [i * wc, i * de - g / 2.0, -i * wc, z],
        [z, -i * w, C64::new(-g, 0.0), i * wc],
        [-i * w, z, i * w, -i * de - g / 2.0],
    ]
}

/// Integration and stopping controls for [`evolve_to_ness`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeanFieldOptions {
    pub dt: f64,
    /// Largest allowed change of any site density over one check interval.
    pub tol: f64,
    pub check_interval: f64,
    pub t_max: f64,
}

impl Default for MeanFieldOptions {
    fn default() -> Self {
        Self { dt: 2e-3, tol: 1e-7, check_interval: 1.0, t_max: 500.0 }
    }
}

impl MeanFieldOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.tol > 0.0 && self.check_interval >= self.dt && self.t_max > 0.0) {
            return Err(invalid(format!("bad mean-field options {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub converged: bool,
    pub final_time: f64,
    /// Largest density change over the last check interval.
    pub residual: f64,
    pub steps: usize,
}

struct Stepper<'a> {
    comps: Vec<[C64; 4]>,
    lowering: Vec<C64>,
    params: &'a ModelParams,
    lattice: &'a Lattice,
}

impl<'a> Stepper<'a> {
    fn new(state: &ProductState, params: &'a ModelParams, lattice: &'a Lattice) -> Self {
        let n = state.len();
        Self {
            comps: (0..n).map(|j| state.components(j)).collect(),
            lowering: vec![C64::new(0.0, 0.0); n],
            params,
            lattice,
        }
    }

    /// One synchronous update of every site with drives frozen at the
    /// previous step's coherences.
    fn step(&mut self, dt: f64) {
        for (l, c) in self.lowering.iter_mut().zip(&self.comps) {
            *l = c[3];
        }
        let adj = self.lattice.adjacency();
        for (j, c) in self.comps.iter_mut().enumerate() {
            let sum: C64 = adj[j].iter().map(|&k| self.lowering[k]).sum();
            let drive = C64::new(self.params.drive, 0.0) - sum * self.params.hopping;
            let mut l = local_liouvillian(drive, self.params);
            for row in l.iter_mut() {
                for x in row.iter_mut() {
                    *x *= dt;
                }
            }
            *c = expm_action(&l, c);
        }
    }

    fn densities_into(&self, out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(&self.comps) {
            *o = c[2].re;
        }
    }

    fn into_state(self, mut template: ProductState) -> ProductState {
        for (j, c) in self.comps.into_iter().enumerate() {
            template.set_components(j, c);
        }
        template
    }
}

/// Advances the product state by `steps` time steps of length `dt`.
pub fn mean_field_step(
    state: &ProductState,
    params: &ModelParams,
    lattice: &Lattice,
    dt: f64,
    steps: usize,
) -> Result<ProductState> {
    check_sizes(state, lattice)?;
    let mut s = Stepper::new(state, params, lattice);
    for _ in 0..steps {
        s.step(dt);
    }
    Ok(s.into_state(state.clone()))
}

fn check_sizes(state: &ProductState, lattice: &Lattice) -> Result<()> {
    if state.len() != lattice.n_sites() {
        return Err(invalid(format!(
            "state has {} sites, lattice has {}",
            state.len(),
            lattice.n_sites()
        )));
    }
    Ok(())
}

/// Evolves the product state until no site density moves by more than
/// `tol` over one check interval, or until `t_max`.
pub fn evolve_to_ness(
    state0: &ProductState,
    params: &ModelParams,
    lattice: &Lattice,
    opts: &MeanFieldOptions,
) -> Result<(ProductState, ConvergenceReport)> {
    params.validate()?;
    opts.validate()?;
    check_sizes(state0, lattice)?;
    let per_check = (opts.check_interval / opts.dt).round().max(1.0) as usize;
    let max_steps = (opts.t_max / opts.dt).round() as usize;

    let mut s = Stepper::new(state0, params, lattice);
    let n = state0.len();
    let mut prev = vec![0.0; n];
    let mut cur = vec![0.0; n];
    s.densities_into(&mut prev);
    let mut steps = 0;
    let mut residual = f64::INFINITY;
    let mut converged = false;
    while steps < max_steps {
        let chunk = per_check.min(max_steps - steps);
        for _ in 0..chunk {
            s.step(opts.dt);
        }
        steps += chunk;
        s.densities_into(&mut cur);
        residual = prev.iter().zip(&cur).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if chunk == per_check && residual < opts.tol {
            converged = true;
            break;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let report = ConvergenceReport { converged, final_time: steps as f64 * opts.dt, residual, steps };
    Ok((s.into_state(state0.clone()), report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn p(j: f64, om: f64, de: f64) -> ModelParams {
        ModelParams::in_decay_units(j, om, de)
    }

    #[test]
    fn decoupled_drive_is_bare() {
        let lat = Lattice::chain(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let st = ProductState::random_pure(4, &mut rng);
        let w = effective_driving(&st, 2, &p(0.0, 1.3, 0.2), &lat).unwrap();
        assert_eq!(w, C64::new(1.3, 0.0));
    }

    fn state_with_lowering(values: &[C64]) -> ProductState {
        let mut st = ProductState::maximally_mixed(values.len());
        for (j, &l) in values.iter().enumerate() {
            let mut c = st.components(j);
            c[3] = l;
            c[1] = l.conj();
            st.set_components(j, c);
        }
        st
    }

    #[test]
    fn bulk_and_edge_effective_drive() {
        let lat = Lattice::chain(3).unwrap();
        let st = state_with_lowering(&[C64::new(0.1, 0.0), C64::new(0.0, 0.0), C64::new(0.1, 0.0)]);
        let w = effective_driving(&st, 1, &p(2.0, 1.0, 0.0), &lat).unwrap();
        assert_abs_diff_eq!(w.re, 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(w.im, 0.0, epsilon = 1e-15);

        let lat = Lattice::chain(2).unwrap();
        let st = state_with_lowering(&[C64::new(0.0, 0.0), C64::new(0.0, 0.1)]);
        let w = effective_driving(&st, 0, &p(2.0, 1.0, 0.0), &lat).unwrap();
        assert_abs_diff_eq!(w.re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(w.im, -0.2, epsilon = 1e-15);
    }

    #[test]
    fn pure_decay_block_structure() {
        let l = local_liouvillian(C64::new(0.0, 0.0), &p(0.0, 0.0, 0.0));
        assert_eq!(l[0][2], C64::new(1.0, 0.0));
        assert_eq!(l[2][2], C64::new(-1.0, 0.0));
        assert_eq!(l[1][1], C64::new(-0.5, 0.0));
        assert_eq!(l[3][3], C64::new(-0.5, 0.0));
        assert_eq!(l[0][0], C64::new(0.0, 0.0));
    }

    #[test]
    fn population_rows_cancel() {
        for (w, de) in [(C64::new(0.3, -1.2), 0.7), (C64::new(2.0, 0.5), -3.0)] {
            let l = local_liouvillian(w, &p(0.0, 0.0, de));
            for c in 0..4 {
                assert_eq!(l[0][c] + l[2][c], C64::new(0.0, 0.0));
            }
        }
    }

    /// The local generator must agree with the dense single-site Liouvillian
    /// of `Δn + Ω_j σ⁺ + Ω_j* σ⁻` after reordering components.
    #[test]
    fn local_liouvillian_matches_dense_generator() {
        let w = C64::new(0.4, -0.7);
        let de = 0.9;
        let l = local_liouvillian(w, &p(0.0, 0.0, de));
        let h = ndarray::array![[C64::new(0.0, 0.0), w.conj()], [w, C64::new(de, 0.0)]];
        let sm = crate::linalg::mat2_to_array(&crate::LocalOp::SigmaMinus.matrix());
        let dl = dense::lindblad_generator(&h, &[(1.0, sm)]);
        for r in 0..4 {
            for c in 0..4 {
                let want = dl[[dense::COMPONENT_ORDER[r], dense::COMPONENT_ORDER[c]]];
                assert_abs_diff_eq!((l[r][c] - want).norm(), 0.0, epsilon = 1e-15);
            }
        }
    }

    /// At a product state the reduced single-site derivative of the full
    /// Lindblad equation equals the mean-field derivative.
    #[test]
    fn two_site_mean_field_derivative_matches_dense() {
        let params = p(2.0, 1.0, 0.7);
        let lat = Lattice::chain(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let st = ProductState::random_pure(2, &mut rng);
        let h = dense::hamiltonian(&lat, &params).unwrap();
        let sm = crate::LocalOp::SigmaMinus.matrix();
        let jumps: Vec<_> = (0..2).map(|j| (1.0, dense::site_operator(&sm, j, 2))).collect();
        let rho = dense::DenseState::product(st.sites());
        let drho = dense::apply_lindblad(&h, &jumps, rho.matrix());
        let reduced = dense::DenseState::new(drho).unwrap();
        for site in 0..2 {
            let want = reduced.reduced_site(site);
            let w = effective_driving(&st, site, &params, &lat).unwrap();
            let l = local_liouvillian(w, &params);
            let c = st.components(site);
            let got: Vec<C64> = (0..4).map(|r| (0..4).map(|k| l[r][k] * c[k]).sum()).collect();
            let want = [want[0][0], want[0][1], want[1][1], want[1][0]];
            for r in 0..4 {
                assert_abs_diff_eq!((got[r] - want[r]).norm(), 0.0, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn local_steady_state_matches_formula() {
        let st = evolve_to_ness(
            &ProductState::all_down(1),
            &p(0.0, 0.6, 0.5),
            &Lattice::chain(1).unwrap(),
            &MeanFieldOptions { tol: 1e-12, ..Default::default() },
        )
        .unwrap()
        .0;
        assert_abs_diff_eq!(st.density(0), 0.36 / 1.22, epsilon = 1e-9);
    }

    #[test]
    fn undriven_lattice_empties() {
        let lat = Lattice::chain(6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let st0 = ProductState::random_pure(6, &mut rng);
        let opts = MeanFieldOptions { tol: 1e-10, ..Default::default() };
        let (st, rep) = evolve_to_ness(&st0, &p(2.0, 0.0, 1.0), &lat, &opts).unwrap();
        assert!(rep.converged);
        for n in st.densities() {
            assert_abs_diff_eq!(n, 0.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn states_stay_physical_each_step() {
        let lat = Lattice::chain(5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut st = ProductState::random_pure(5, &mut rng);
        for _ in 0..200 {
            st = mean_field_step(&st, &p(2.0, 1.0, 0.4), &lat, 2e-3, 5).unwrap();
            st.validate(1e-9).unwrap();
        }
    }

    #[test]
    fn nonconvergence_reported_not_raised() {
        let lat = Lattice::chain(3).unwrap();
        let opts = MeanFieldOptions { t_max: 0.5, ..Default::default() };
        let (_, rep) = evolve_to_ness(&ProductState::all_down(3), &p(2.0, 1.0, 0.0), &lat, &opts).unwrap();
        assert!(!rep.converged);
        assert_abs_diff_eq!(rep.final_time, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn rejects_bad_options() {
        let lat = Lattice::chain(2).unwrap();
        let opts = MeanFieldOptions { dt: 0.0, ..Default::default() };
        assert!(evolve_to_ness(&ProductState::all_down(2), &p(1.0, 1.0, 0.0), &lat, &opts).is_err());
    }
}
