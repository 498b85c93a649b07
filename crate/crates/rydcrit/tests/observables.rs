//! Dictionary operators, correlators, profiles, and entropy.

use std::sync::Arc;

use rydcrit::basis::{BlockadedBasis, Boundary, ChainGeometry, ConstraintMode};
use rydcrit::hamiltonian::{build_hamiltonian, critical_preset, Model};
use rydcrit::measure::{expand_pattern, parse_pattern, project, OutcomeSector};
use rydcrit::observables::{
    build_epsilon_n, build_epsilon_z2, build_sigma_n, connected_correlator, epsilon_bond,
    expectation, half_chain_entropy, one_point_profile, sigma_bond, Coordinate,
    DiagonalObservable,
};
use rydcrit::solve::{auto_ground_state, DenseState, LanczosOptions};
use rydcrit::wavefunction::Wavefunction;

fn hard(length: usize, boundary: Boundary) -> ChainGeometry {
    ChainGeometry::new(length, boundary, ConstraintMode::HardBlockade).unwrap()
}

fn sector(pattern: &str, geometry: ChainGeometry) -> OutcomeSector {
    expand_pattern(&parse_pattern(pattern).unwrap(), geometry).unwrap()
}

fn critical_ground(model: Model, geometry: ChainGeometry) -> Wavefunction {
    let basis = Arc::new(BlockadedBasis::enumerate(geometry).unwrap());
    let h = build_hamiltonian(&basis, &critical_preset(model)).unwrap();
    let (state, _) = auto_ground_state(&h, &basis, &LanczosOptions::default()).unwrap();
    Wavefunction::Dense(state)
}

fn product_state(geometry: ChainGeometry, config: u64) -> Wavefunction {
    let basis = Arc::new(BlockadedBasis::enumerate(geometry).unwrap());
    Wavefunction::Dense(DenseState::product(basis, config).unwrap())
}

/// σ̂_{j+1/2} as an explicit two-site observable.
fn bond_sigma_observable(j: usize, length: usize) -> DiagonalObservable {
    let s = if j % 2 == 0 { 0.5 } else { -0.5 };
    DiagonalObservable::new(
        vec![(j, s), ((j + 1) % length, -s)],
        "sigma",
        Coordinate::new(2 * j as i64 + 1, 2),
    )
    .unwrap()
}

// ------------------------------------------------------------ bond fields

#[test]
fn bond_operators_on_product_states() {
    // 0101 reading site 0 first: occupied at sites 1, 3.
    let wf = product_state(hard(4, Boundary::Open), 0b1010);
    assert!((sigma_bond(&wf, 0).unwrap() + 0.5).abs() < 1e-15);
    assert!((epsilon_bond(&wf, 0).unwrap() - 0.5).abs() < 1e-15);

    let vacuum = product_state(hard(4, Boundary::Open), 0);
    assert_eq!(epsilon_bond(&vacuum, 0).unwrap(), 0.0);

    // Last bond exists only with wraparound.
    assert!(sigma_bond(&wf, 3).is_err());
    let ring = product_state(hard(4, Boundary::Periodic), 0b1010);
    // Bond (3, 0): (-1)^3 (n_3 - n_0)/2 = -(1 - 0)/2.
    assert!((sigma_bond(&ring, 3).unwrap() + 0.5).abs() < 1e-15);
    assert!(sigma_bond(&ring, 4).is_err());
}

#[test]
fn sigma_bond_vanishes_on_symmetric_rings() {
    let wf = critical_ground(Model::Ising, hard(12, Boundary::Periodic));
    for j in 0..12 {
        let v = sigma_bond(&wf, j).unwrap();
        assert!(v.abs() < 1e-8, "bond {j}: {v}");
    }
}

// ------------------------------------------------------- operator builders

#[test]
fn sigma_n_per_cell_structure() {
    // Single unmeasured site per even-period cell: plain staggered density.
    let obs = build_sigma_n(&sector("n[2j]=0", hard(8, Boundary::Periodic))).unwrap();
    assert_eq!(obs.len(), 4);
    for (c, o) in obs.iter().enumerate() {
        assert_eq!(o.terms(), &[(2 * c + 1, -1.0)]);
        assert_eq!(o.center(), Coordinate::new(2 * c as i64 + 1, 1));
    }

    // Four unmeasured sites per period-5 cell, alternating quarters.
    let obs = build_sigma_n(&sector("n[5j]=0", hard(10, Boundary::Periodic))).unwrap();
    assert_eq!(obs.len(), 2);
    assert_eq!(
        obs[0].terms(),
        &[(1, -0.25), (2, 0.25), (3, -0.25), (4, 0.25)]
    );
    assert_eq!(obs[0].center(), Coordinate::new(5, 2));

    // Fully measured unit cell leaves nothing to build on.
    assert!(build_sigma_n(&sector("n[1j]=0", hard(8, Boundary::Periodic))).is_err());

    // Partial trailing cells are dropped on open chains.
    let obs = build_sigma_n(&sector("n[5j]=0", hard(12, Boundary::Open))).unwrap();
    assert_eq!(obs.len(), 2);
}

#[test]
fn sigma_n_extends_across_cells_for_net_staggered_patterns() {
    // Period 3 with one unmeasured site: the single-cell operator would be
    // (-1)^(3j+2) n_(3j+2), which carries the uniform density; the built
    // operator pairs adjacent cells so that part cancels.
    let obs = build_sigma_n(&sector("n[3j]=0,n[3j+1]=0", hard(12, Boundary::Periodic))).unwrap();
    assert_eq!(obs.len(), 4);
    assert_eq!(obs[0].terms(), &[(2, 0.5), (5, -0.5)]);
    assert_eq!(obs[0].center(), Coordinate::new(7, 2));
    // Wrapped final cell: sites 11 and 14 -> 2, signs from the unwrapped
    // parity, center folded back onto the ring.
    assert_eq!(obs[3].terms(), &[(11, -0.5), (2, 0.5)]);
    assert_eq!(obs[3].center(), Coordinate::new(1, 2));

    // Open chain: the last cell has no partner, so one fewer observable.
    let obs = build_sigma_n(&sector("n[3j]=0,n[3j+1]=0", hard(12, Boundary::Open))).unwrap();
    assert_eq!(obs.len(), 3);
}

#[test]
fn extended_sigma_n_has_no_uniform_admixture() {
    // On a translation-invariant critical ring every extended sigma must
    // average to zero; the unextended single-site form would instead pick
    // up the mean density (about 0.27 here), so this pins the cancellation.
    let g = hard(12, Boundary::Periodic);
    let wf = critical_ground(Model::Ising, g);
    let obs = build_sigma_n(&sector("n[3j]=0,n[3j+1]=0", g)).unwrap();
    for o in &obs {
        let v = expectation(&wf, o).unwrap();
        assert!(v.abs() < 1e-8, "center {:?}: {v}", o.center());
    }
}

#[test]
fn epsilon_n_mirrors_the_sigma_cells_and_guards_symmetry() {
    let obs = build_epsilon_n(&sector("n[3j]=0", hard(12, Boundary::Periodic))).unwrap();
    assert_eq!(obs.len(), 4);
    assert_eq!(obs[0].terms(), &[(1, 0.5), (2, 0.5)]);
    assert_eq!(obs[0].center(), Coordinate::new(3, 2));

    let obs = build_epsilon_n(&sector("n[5j]=0", hard(10, Boundary::Periodic))).unwrap();
    assert_eq!(obs[0].terms(), &[(1, 0.25), (2, 0.25), (3, 0.25), (4, 0.25)]);

    // Reflection-broken sector: the thermal dictionary is not defined.
    let err = build_epsilon_n(&sector("n[2j]=0", hard(8, Boundary::Periodic))).unwrap_err();
    assert!(matches!(err, rydcrit::Error::Unsupported(_)), "{err}");
}

#[test]
fn epsilon_z2_is_the_average_of_adjacent_epsilon_n() {
    let g = hard(12, Boundary::Periodic);
    let s = sector("n[3j]=0,n[3j+1]=0", g);
    let z2 = build_epsilon_z2(&s).unwrap();
    assert_eq!(z2.len(), 4);
    assert_eq!(z2[0].terms(), &[(11, 0.25), (2, 0.5), (5, 0.25)]);

    let eps = build_epsilon_n(&s).unwrap();
    let wf = critical_ground(Model::Ising, g);
    for o in &z2 {
        let ell = o.center();
        let left = eps
            .iter()
            .find(|e| e.center() == ring_shift(ell, -3, 12))
            .unwrap();
        let right = eps
            .iter()
            .find(|e| e.center() == ring_shift(ell, 3, 12))
            .unwrap();
        let avg = 0.5 * (expectation(&wf, left).unwrap() + expectation(&wf, right).unwrap());
        let direct = expectation(&wf, o).unwrap();
        assert!((direct - avg).abs() < 1e-14, "{direct} vs {avg}");
    }

    // Any other sector is refused.
    assert!(build_epsilon_z2(&sector("n[3j]=0", g)).is_err());
    assert!(build_epsilon_z2(&sector("n[2j]=0", hard(8, Boundary::Periodic))).is_err());
}

/// Shift a half-integer ring coordinate by `delta/2` sites, folding into [0, L).
fn ring_shift(c: Coordinate, delta: i64, length: i64) -> Coordinate {
    // Operator centers here are c = num/2; work in half-units.
    let num = c.value() * 2.0;
    let shifted = (num as i64 + delta).rem_euclid(2 * length);
    Coordinate::new(shifted, 2)
}

// ------------------------------------------------------------ expectations

#[test]
fn expectations_on_simple_states() {
    let wf = product_state(hard(4, Boundary::Open), 0b1010);
    let sigma_half = bond_sigma_observable(0, 4);
    assert!((expectation(&wf, &sigma_half).unwrap() + 0.5).abs() < 1e-15);

    let vacuum = product_state(hard(4, Boundary::Open), 0);
    assert_eq!(expectation(&vacuum, &sigma_half).unwrap(), 0.0);

    let oob = DiagonalObservable::new(vec![(7, 1.0)], "n", Coordinate::new(7, 1)).unwrap();
    assert!(expectation(&wf, &oob).is_err());
}

#[test]
fn expectations_agree_across_backends() {
    use rydcrit::mps::{mps_to_dense, MatrixProductState};
    let soft = ChainGeometry::new(10, Boundary::Periodic, ConstraintMode::Penalty).unwrap();
    let mps = MatrixProductState::random(soft, 6, 31).unwrap();
    let basis = Arc::new(BlockadedBasis::enumerate(soft).unwrap());
    let dense = Wavefunction::Dense(mps_to_dense(&mps, &basis).unwrap());
    let mps = Wavefunction::Mps(mps);

    let obs: Vec<DiagonalObservable> = (0..9).map(|j| bond_sigma_observable(j, 10)).collect();
    for o in &obs {
        let a = expectation(&dense, o).unwrap();
        let b = expectation(&mps, o).unwrap();
        assert!((a - b).abs() < 1e-10, "{a} vs {b}");
    }

    let pairs: Vec<(usize, usize)> = (2..8).map(|d| (0, d)).collect();
    let sd = connected_correlator(&dense, &obs, &pairs).unwrap();
    let sm = connected_correlator(&mps, &obs, &pairs).unwrap();
    assert_eq!(sd.points.len(), sm.points.len());
    for (p, q) in sd.points.iter().zip(&sm.points) {
        assert!((p.separation - q.separation).abs() < 1e-12);
        assert!((p.value - q.value).abs() < 1e-10);
    }
}

// ------------------------------------------------------------- correlators

#[test]
fn connected_correlators_vanish_on_product_states() {
    let wf = product_state(hard(8, Boundary::Periodic), 0b01010101);
    let obs: Vec<DiagonalObservable> = (0..8).map(|j| bond_sigma_observable(j, 8)).collect();
    let pairs: Vec<(usize, usize)> = (0..8).flat_map(|a| (0..8).map(move |b| (a, b))).collect();
    let series = connected_correlator(&wf, &obs, &pairs).unwrap();
    assert!(!series.points.is_empty());
    for p in &series.points {
        assert!(p.value.abs() < 1e-14, "sep {}: {}", p.separation, p.value);
    }
}

#[test]
fn overlapping_pairs_are_dropped_and_separations_increase() {
    let g = hard(12, Boundary::Periodic);
    let wf = critical_ground(Model::Ising, g);
    let obs: Vec<DiagonalObservable> = (0..12).map(|j| bond_sigma_observable(j, 12)).collect();
    // Pair (0, 1) shares site 1; (0, 0) is a self-pair. Both must vanish
    // from the series, leaving separations 2..=6 on the ring.
    let pairs: Vec<(usize, usize)> = (0..12).map(|b| (0, b)).collect();
    let series = connected_correlator(&wf, &obs, &pairs).unwrap();
    let seps: Vec<f64> = series.points.iter().map(|p| p.separation).collect();
    assert_eq!(seps, vec![2.0, 3.0, 4.0, 5.0, 6.0]);
    assert!(seps.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn correlators_are_exchange_symmetric_and_translation_invariant() {
    let g = hard(12, Boundary::Periodic);
    let wf = critical_ground(Model::Ising, g);
    let obs: Vec<DiagonalObservable> = (0..12).map(|j| bond_sigma_observable(j, 12)).collect();

    let value = |a: usize, b: usize| -> f64 {
        connected_correlator(&wf, &obs, &[(a, b)]).unwrap().points[0].value
    };
    assert!((value(1, 5) - value(5, 1)).abs() < 1e-12);
    for t in 1..6 {
        let d = value((0 + t) % 12, (4 + t) % 12);
        assert!((value(0, 4) - d).abs() < 1e-10, "shift {t}: {d}");
    }
}

#[test]
fn conditional_expectation_identity_holds() {
    // Evaluating a dictionary operator on the projected state must equal
    // the sector-restricted average over the unprojected amplitudes.
    let g = hard(14, Boundary::Periodic);
    let wf = critical_ground(Model::Ising, g);
    let s = sector("n[2j]=0", g);
    let (projected, prob) = project(&wf, &s).unwrap();
    let obs = build_sigma_n(&s).unwrap();

    let Wavefunction::Dense(dense) = &wf else {
        panic!("expected dense state")
    };
    let mask: u64 = s.measured_sites().iter().map(|&k| 1u64 << k).sum();
    for o in &obs {
        let mut restricted = 0.0;
        for (idx, &config) in dense.basis().configs().iter().enumerate() {
            if config & mask == 0 {
                let val: f64 = o
                    .terms()
                    .iter()
                    .map(|&(site, c)| c * ((config >> site) & 1) as f64)
                    .sum();
                restricted += dense.amps()[idx].powi(2) * val;
            }
        }
        restricted /= prob;
        let direct = expectation(&projected, o).unwrap();
        assert!(
            (direct - restricted).abs() < 1e-10,
            "center {:?}: {direct} vs {restricted}",
            o.center()
        );
    }
}

#[test]
fn sigma_n_averages_to_zero_in_reflection_symmetric_sectors() {
    let g = hard(12, Boundary::Periodic);
    let wf = critical_ground(Model::Ising, g);
    let s = sector("n[3j]=0", g);
    let (projected, _) = project(&wf, &s).unwrap();
    for o in build_sigma_n(&s).unwrap() {
        let v = expectation(&projected, &o).unwrap();
        assert!(v.abs() < 1e-8, "center {:?}: {v}", o.center());
    }
}

// ---------------------------------------------------------------- profiles

#[test]
fn one_point_profiles_need_open_boundaries() {
    let ring = critical_ground(Model::Ising, hard(12, Boundary::Periodic));
    let obs: Vec<DiagonalObservable> = (0..12).map(|j| bond_sigma_observable(j, 12)).collect();
    assert!(one_point_profile(&ring, &obs).is_err());
}

#[test]
fn open_chain_sigma_profile_is_positive_and_reflection_symmetric() {
    // Odd length singles out one density-wave registration, so the bond
    // order parameter acquires a genuine profile peaked at the edges.
    let length = 21;
    let wf = critical_ground(Model::Ising, hard(length, Boundary::Open));
    let obs: Vec<DiagonalObservable> = (0..length - 1)
        .map(|j| bond_sigma_observable(j, length))
        .collect();
    let series = one_point_profile(&wf, &obs).unwrap();
    assert_eq!(series.points.len(), length - 1);
    let values: Vec<f64> = series.points.iter().map(|p| p.value).collect();
    assert!(values.iter().all(|&v| v > 0.0), "{values:?}");
    // Reflection about the chain center maps bond j to bond L-2-j.
    for j in 0..length - 1 {
        let mirrored = values[length - 2 - j];
        assert!((values[j] - mirrored).abs() < 1e-7, "bond {j}");
    }
    // The inverse-sine envelope decays from the edges toward the middle.
    assert!(values[3] > values[9], "{} vs {}", values[3], values[9]);
}

// ----------------------------------------------------------------- entropy

#[test]
fn entanglement_drops_after_a_density_measurement() {
    let pre12 = half_chain_entropy(
        &critical_ground(Model::Ising, hard(12, Boundary::Periodic)),
        6,
    )
    .unwrap();
    let g = hard(16, Boundary::Periodic);
    let wf = critical_ground(Model::Ising, g);
    let pre16 = half_chain_entropy(&wf, 8).unwrap();
    assert!(pre16 > pre12, "{pre16} vs {pre12}");

    let (projected, _) = project(&wf, &sector("n[2j]=0", g)).unwrap();
    let post = half_chain_entropy(&projected, 8).unwrap();
    assert!(post < pre16, "{post} vs {pre16}");
}
