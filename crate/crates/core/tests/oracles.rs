//! Cross-checks of the engines against independent reference computations.

use ddxy::cqed::{build_full_hamiltonian, compare_to_xy, time_grid, vacuum, CircuitSpec, CouplingMode, ReferenceHopping};
use ddxy::dense::{dense_liouvillian, steadystate_dense};
use ddxy::linalg::{expm, kron};
use ddxy::meanfield::{evolve_to_ness, MeanFieldOptions, ProductState};
use ddxy::tensor::{
    build_trotter_gates, evolve_to_ness_mpo, load_checkpoint, product_mpo, save_checkpoint, NessOptions,
    TrotterOrder, TruncationPolicy,
};
use ddxy::trajectories::{run_ensemble, EnsembleSpec};
use ddxy::{Lattice, LocalOp, ModelParams, C64};
use ndarray::{Array1, Array2};

fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

#[test]
fn mpo_steady_state_matches_exact_three_site_state() {
    let p = ModelParams::in_decay_units(2.0, 1.0, 0.7);
    let lat = Lattice::chain(3).unwrap();
    let exact = steadystate_dense(&dense_liouvillian(&lat, &p).unwrap()).unwrap().state;
    let sched = build_trotter_gates(&p, &lat, 0.02, TrotterOrder::Fourth).unwrap();
    let ness = NessOptions { tol: 1e-11, t_max: 400.0, ..Default::default() };
    let start = product_mpo(&ProductState::all_down(3));
    let (mpo, rep) = evolve_to_ness_mpo(start, &sched, &TruncationPolicy::new(64, 1e-14).unwrap(), &ness).unwrap();
    assert!(rep.converged);
    let dens = mpo.densities().unwrap();
    for (a, b) in dens.iter().zip(exact.densities()) {
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }
    let zz = mpo.two_point(LocalOp::SigmaZ, 0, LocalOp::SigmaZ, 2).unwrap();
    assert!((zz - exact.two_point(LocalOp::SigmaZ, 0, LocalOp::SigmaZ, 2)).norm() < 1e-6);
}

#[test]
fn decoupled_sites_agree_across_engines() {
    // Without hopping each site relaxes to the driven two-level steady state
    // n = Ω² / (Δ² + γ²/4 + 2Ω²).
    let (om, de) = (0.8, -0.6);
    let n_exact = om * om / (de * de + 0.25 + 2.0 * om * om);
    let p = ModelParams::in_decay_units(0.0, om, de);
    let lat = Lattice::chain(4).unwrap();
    let (mf, _) = evolve_to_ness(
        &ProductState::all_up(4),
        &p,
        &lat,
        &MeanFieldOptions { tol: 1e-12, ..Default::default() },
    )
    .unwrap();
    let sched = build_trotter_gates(&p, &lat, 0.05, TrotterOrder::Second).unwrap();
    let (mpo, _) = evolve_to_ness_mpo(
        product_mpo(&ProductState::all_down(4)),
        &sched,
        &TruncationPolicy::new(1, 0.0).unwrap(),
        &NessOptions { tol: 1e-12, ..Default::default() },
    )
    .unwrap();
    for j in 0..4 {
        assert!((mf.density(j) - n_exact).abs() < 1e-9);
        assert!((mpo.densities().unwrap()[j] - n_exact).abs() < 1e-9);
    }
}

#[test]
fn trajectory_seeds_select_independent_streams() {
    let p = ModelParams::in_decay_units(2.0, 1.0, 0.5);
    let lat = Lattice::chain(5).unwrap();
    let spec = EnsembleSpec { t_total: 4.0, dt: 0.01, n_traj: 6, window: 0.5, bins: 10, seed: 1 };
    let a = run_ensemble(&p, &lat, &spec).unwrap();
    let b = run_ensemble(&p, &lat, &EnsembleSpec { seed: 2, ..spec }).unwrap();
    assert_eq!(a, run_ensemble(&p, &lat, &spec).unwrap());
    assert_ne!(a.central_averages, b.central_averages);
    // The first trajectories do not depend on how many are run.
    let more = run_ensemble(&p, &lat, &EnsembleSpec { n_traj: 9, ..spec }).unwrap();
    assert_eq!(a.central_averages[..], more.central_averages[..6]);
}

#[test]
fn checkpoint_round_trip_preserves_state() {
    let p = ModelParams::in_decay_units(2.0, 1.0, 1.0);
    let lat = Lattice::chain(6).unwrap();
    let sched = build_trotter_gates(&p, &lat, 0.1, TrotterOrder::Second).unwrap();
    let ness = NessOptions { tol: 1e-3, t_max: 20.0, ..Default::default() };
    let (mpo, _) = evolve_to_ness_mpo(
        product_mpo(&ProductState::all_down(6)),
        &sched,
        &TruncationPolicy::new(8, 1e-12).unwrap(),
        &ness,
    )
    .unwrap();
    let path = std::env::temp_dir().join(format!("ddxy-checkpoint-{}.json", std::process::id()));
    save_checkpoint(&mpo, &path).unwrap();
    let back = load_checkpoint(&path).unwrap();
    std::fs::remove_file(&path).unwrap();
    assert_eq!(mpo.densities().unwrap(), back.densities().unwrap());
    assert_eq!(mpo.bond_dims(), back.bond_dims());
}

fn embed(op: &Array2<C64>, site: usize, n: usize) -> Array2<C64> {
    let id = Array2::<C64>::eye(2);
    (0..n).fold(Array2::<C64>::eye(1), |acc, k| kron(&acc, if k == site { op } else { &id }))
}

/// Qubit populations from stepping `exp(−iH dt)`.
fn stepped_populations(h: &Array2<C64>, times: &[f64], n_qubits: usize) -> Vec<Vec<f64>> {
    let dt = times[1] - times[0];
    let u = expm(&h.mapv(|z| z * C64::new(0.0, -dt)));
    let mut psi: Array1<C64> = vacuum(h.nrows());
    let rest = h.nrows() >> n_qubits;
    let mut out = Vec::new();
    for k in 0..times.len() {
        if k > 0 {
            psi = u.dot(&psi);
        }
        let mut n = vec![0.0; n_qubits];
        for (i, z) in psi.iter().enumerate() {
            for (q, nq) in n.iter_mut().enumerate() {
                if ((i / rest) >> (n_qubits - 1 - q)) & 1 == 1 {
                    *nq += z.norm_sqr();
                }
            }
        }
        out.push(n);
    }
    out
}

#[test]
fn circuit_deviation_matches_stepped_propagation() {
    let spec = CircuitSpec::reference(1.0, CouplingMode::Ferromagnetic, 2);
    let times = time_grid(600.0, 2001);
    let full = stepped_populations(&build_full_hamiltonian(&spec).unwrap(), &times, 3);

    // XY chain written out from Pauli matrices: hopping g₁²/Δ₁ and detuning
    // Δ_c + g₁²/Δ₁ + g₂²/Δ₂.
    let (g1, g2) = (spec.couplings[0], spec.couplings[1]);
    let (d1, d2) = (spec.cavity_detuning(0), spec.cavity_detuning(1));
    let hop = g1 * g1 / d1;
    let delta = spec.qubit_detuning() + g1 * g1 / d1 + g2 * g2 / d2;
    let sp = Array2::from_shape_vec((2, 2), vec![c(0.0), c(0.0), c(1.0), c(0.0)]).unwrap();
    let sm = sp.t().to_owned();
    let num = sp.dot(&sm);
    let mut h = Array2::<C64>::zeros((8, 8));
    for j in 0..3 {
        h = h + embed(&num, j, 3) * c(delta) + (embed(&sp, j, 3) + embed(&sm, j, 3)) * c(spec.drive);
    }
    for j in 0..2 {
        let hopping = embed(&sp, j, 3).dot(&embed(&sm, j + 1, 3)) + embed(&sp, j + 1, 3).dot(&embed(&sm, j, 3));
        h = h - hopping * c(hop);
    }
    let xy = stepped_populations(&h, &times, 3);
    let deviation = full
        .iter()
        .zip(&xy)
        .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max);
    let cmp = compare_to_xy(&spec, ReferenceHopping::Effective, &times).unwrap();
    assert!((deviation - cmp.deviation).abs() < 1e-8, "{deviation} vs {}", cmp.deviation);
    assert!((deviation - 1.327_528_89e-2).abs() < 1e-8, "{deviation}");
}
