//! DMRG vs exact diagonalization on small chains, plus truncation behavior.

use std::sync::Arc;

use rydcrit::basis::{BlockadedBasis, Boundary, ChainGeometry, ConstraintMode};
use rydcrit::dmrg::{dmrg_ground_state, DmrgConfig};
use rydcrit::hamiltonian::{build_hamiltonian, critical_preset, HamiltonianParams, Model};
use rydcrit::mpo::build_mpo;
use rydcrit::mps::mps_to_dense;
use rydcrit::solve::ground_state_dense;

fn dense_reference(
    geometry: ChainGeometry,
    params: &HamiltonianParams,
) -> (f64, rydcrit::solve::DenseState) {
    let basis = Arc::new(BlockadedBasis::enumerate(geometry).unwrap());
    let h = build_hamiltonian(&basis, params).unwrap();
    let (psi, e) = ground_state_dense(&h, &basis).unwrap();
    (e, psi)
}

fn penalty_geometry(length: usize, boundary: Boundary) -> ChainGeometry {
    ChainGeometry::new(length, boundary, ConstraintMode::Penalty).unwrap()
}

#[test]
fn dmrg_matches_dense_on_open_ising_chains() {
    for length in [6, 9, 12] {
        let geometry = penalty_geometry(length, Boundary::Open);
        let params = critical_preset(Model::Ising);
        let mpo = build_mpo(geometry, &params).unwrap();
        let cfg = DmrgConfig {
            chi_max: 64,
            ..DmrgConfig::default()
        };
        let out = dmrg_ground_state(&mpo, &cfg).unwrap();
        let (e_ref, psi_ref) = dense_reference(geometry, &params);

        assert!(out.converged, "L={length} did not converge: {out:?}");
        let rel = (out.energy - e_ref).abs() / e_ref.abs();
        assert!(
            rel < 1e-8,
            "L={length}: DMRG energy {} vs dense {e_ref} (rel {rel:.3e})",
            out.energy
        );

        let dense = mps_to_dense(&out.state, psi_ref.basis()).unwrap();
        let overlap = dense.inner(&psi_ref).abs();
        assert!(
            overlap > 1.0 - 1e-8,
            "L={length}: ground-state overlap {overlap}"
        );
    }
}

#[test]
fn dmrg_handles_edge_detuning_shift() {
    let geometry = penalty_geometry(8, Boundary::Open);
    let params = critical_preset(Model::Ising).with_edge_shift(true);
    let mpo = build_mpo(geometry, &params).unwrap();
    let out = dmrg_ground_state(&mpo, &DmrgConfig::default()).unwrap();
    let (e_ref, _) = dense_reference(geometry, &params);
    let rel = (out.energy - e_ref).abs() / e_ref.abs();
    assert!(rel < 1e-8, "energy {} vs {e_ref}", out.energy);
}

#[test]
fn dmrg_matches_dense_on_a_ring() {
    let geometry = penalty_geometry(8, Boundary::Periodic);
    let params = HamiltonianParams::new(1.0, 0.9, 40.0, 0.5);
    let mpo = build_mpo(geometry, &params).unwrap();
    let cfg = DmrgConfig {
        chi_max: 64,
        ..DmrgConfig::default()
    };
    let out = dmrg_ground_state(&mpo, &cfg).unwrap();
    let (e_ref, psi_ref) = dense_reference(geometry, &params);
    let rel = (out.energy - e_ref).abs() / e_ref.abs();
    assert!(rel < 1e-8, "ring energy {} vs {e_ref}", out.energy);
    let dense = mps_to_dense(&out.state, psi_ref.basis()).unwrap();
    assert!(dense.inner(&psi_ref).abs() > 1.0 - 1e-8);
}

#[test]
fn dmrg_at_tci_point_matches_dense() {
    let geometry = penalty_geometry(10, Boundary::Open);
    let params = critical_preset(Model::Tci);
    let mpo = build_mpo(geometry, &params).unwrap();
    let cfg = DmrgConfig {
        chi_max: 96,
        ..DmrgConfig::default()
    };
    let out = dmrg_ground_state(&mpo, &cfg).unwrap();
    let (e_ref, _) = dense_reference(geometry, &params);
    let rel = (out.energy - e_ref).abs() / e_ref.abs();
    assert!(rel < 1e-8, "TCI energy {} vs {e_ref} (rel {rel:.3e})", out.energy);
}

#[test]
fn chi_one_recovers_a_product_limit() {
    // Deep in the disordered phase (huge negative detuning) the ground state
    // is essentially the vacuum product state, so chi = 1 suffices.
    let geometry = penalty_geometry(8, Boundary::Open);
    let params = HamiltonianParams::new(0.2, -50.0, 100.0, 0.0);
    let mpo = build_mpo(geometry, &params).unwrap();
    let cfg = DmrgConfig {
        chi_max: 1,
        ..DmrgConfig::default()
    };
    let out = dmrg_ground_state(&mpo, &cfg).unwrap();
    assert_eq!(out.max_bond_reached, 1);
    let (e_ref, _) = dense_reference(geometry, &params);
    // chi = 1 is variational: above the true energy, but close here.
    assert!(out.energy >= e_ref - 1e-9);
    assert!((out.energy - e_ref).abs() / e_ref.abs() < 1e-4);
}

#[test]
fn truncated_energies_are_variational_and_improve_with_chi() {
    let geometry = penalty_geometry(12, Boundary::Open);
    let params = critical_preset(Model::Ising);
    let mpo = build_mpo(geometry, &params).unwrap();
    let (e_ref, _) = dense_reference(geometry, &params);

    let mut last = f64::INFINITY;
    for chi in [2, 4, 8, 32] {
        let cfg = DmrgConfig {
            chi_max: chi,
            ..DmrgConfig::default()
        };
        let out = dmrg_ground_state(&mpo, &cfg).unwrap();
        // Variational bound, with slack for local-solver residual.
        assert!(
            out.energy >= e_ref - 1e-7,
            "chi={chi}: {} dips below {e_ref}",
            out.energy
        );
        assert!(
            out.energy <= last + 1e-7,
            "chi={chi}: {} worse than previous {last}",
            out.energy
        );
        last = out.energy;
    }
    assert!((last - e_ref).abs() / e_ref.abs() < 1e-9);
}

#[test]
fn penalty_run_respects_the_blockade_energetically() {
    // With V1 = 100 the weight outside the blockaded space is tiny; check
    // that mapping the MPS onto the hard-blockade basis barely loses norm.
    let geometry = penalty_geometry(10, Boundary::Open);
    let params = critical_preset(Model::Ising);
    let mpo = build_mpo(geometry, &params).unwrap();
    let out = dmrg_ground_state(&mpo, &DmrgConfig::default()).unwrap();

    let hard = Arc::new(
        BlockadedBasis::enumerate(
            ChainGeometry::new(10, Boundary::Open, ConstraintMode::HardBlockade).unwrap(),
        )
        .unwrap(),
    );
    let mut weight = 0.0;
    for &config in hard.configs() {
        let amp = out.state.amplitude(config);
        weight += amp * amp;
    }
    assert!(
        weight > 1.0 - 1e-3,
        "blockaded-space weight {weight} too small"
    );
}

#[test]
fn histories_are_recorded_per_sweep() {
    let geometry = penalty_geometry(6, Boundary::Open);
    let params = critical_preset(Model::Ising);
    let mpo = build_mpo(geometry, &params).unwrap();
    let out = dmrg_ground_state(&mpo, &DmrgConfig::default()).unwrap();
    assert_eq!(out.energy_history.len(), out.sweeps);
    assert_eq!(out.entropy_history.len(), out.sweeps);
    assert!(out.sweeps >= 2);
    let s = *out.entropy_history.last().unwrap();
    assert!(s.is_finite() && s >= 0.0);
}
