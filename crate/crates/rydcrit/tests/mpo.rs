//! MPO assembly is verified by exact contraction against the sparse build
//! on the full product basis.

use rydcrit::basis::{BlockadedBasis, Boundary, ChainGeometry, ConstraintMode};
use rydcrit::hamiltonian::{build_hamiltonian, HamiltonianParams};
use rydcrit::mpo::build_mpo;

fn penalty(length: usize, boundary: Boundary) -> ChainGeometry {
    ChainGeometry::new(length, boundary, ConstraintMode::Penalty).unwrap()
}

fn assert_mpo_matches_sparse(geometry: ChainGeometry, params: &HamiltonianParams) {
    let basis = BlockadedBasis::enumerate(geometry).unwrap();
    let sparse = build_hamiltonian(&basis, params).unwrap().to_dense();
    let dense = build_mpo(geometry, params).unwrap().to_dense().unwrap();
    assert_eq!(sparse.nrows(), dense.nrows());
    let mut worst = 0.0f64;
    for r in 0..sparse.nrows() {
        for c in 0..sparse.ncols() {
            worst = worst.max((sparse[(r, c)] - dense[(r, c)]).abs());
        }
    }
    assert!(
        worst < 1e-12,
        "MPO vs sparse mismatch {worst:.3e} for L={} {:?}",
        geometry.length,
        geometry.boundary
    );
}

#[test]
fn open_chain_matches_sparse_build() {
    let params = HamiltonianParams::new(0.83, -0.41, 7.3, -1.21);
    for length in [2, 3, 4, 6, 8] {
        assert_mpo_matches_sparse(penalty(length, Boundary::Open), &params);
    }
}

#[test]
fn ring_matches_sparse_build_including_seam_terms() {
    let params = HamiltonianParams::new(1.17, 0.66, 4.9, -0.37);
    for length in [3, 4, 5, 6, 8] {
        assert_mpo_matches_sparse(penalty(length, Boundary::Periodic), &params);
    }
}

#[test]
fn edge_detuning_shift_is_honored() {
    let params = HamiltonianParams::new(1.0, 0.9, 3.0, -0.5).with_edge_shift(true);
    for length in [2, 5, 7] {
        assert_mpo_matches_sparse(penalty(length, Boundary::Open), &params);
    }
    assert!(build_mpo(penalty(6, Boundary::Periodic), &params).is_err());
}

#[test]
fn bond_dimensions_are_four_open_six_periodic() {
    let params = HamiltonianParams::new(1.0, 0.5, 10.0, -0.3);
    let open = build_mpo(penalty(8, Boundary::Open), &params).unwrap();
    assert_eq!(open.max_bond(), 4);
    assert_eq!(open.tensor(0).wl, 1);
    assert_eq!(open.tensor(7).wr, 1);
    let ring = build_mpo(penalty(8, Boundary::Periodic), &params).unwrap();
    assert_eq!(ring.max_bond(), 6);
}

#[test]
fn flip_free_mpo_is_diagonal() {
    let params = HamiltonianParams::new(0.0, 1.3, 2.0, 0.7);
    let dense = build_mpo(penalty(6, Boundary::Periodic), &params)
        .unwrap()
        .to_dense()
        .unwrap();
    for r in 0..dense.nrows() {
        for c in 0..dense.ncols() {
            if r != c {
                assert_eq!(dense[(r, c)], 0.0);
            }
        }
    }
}

#[test]
fn tiny_rings_are_rejected() {
    let params = HamiltonianParams::new(1.0, 0.5, 1.0, 0.2);
    assert!(build_mpo(penalty(2, Boundary::Periodic), &params).is_err());
}
