//! Born-rule sampling: per-shot reproducibility, frequency calibration
//! against exact Born weights, backend agreement, and restricted averaging
//! versus exact post-measurement expectations.

use std::sync::Arc;

use rydcrit::basis::{BlockadedBasis, Boundary, ChainGeometry, ConstraintMode};
use rydcrit::hamiltonian::{build_hamiltonian, critical_preset, Model};
use rydcrit::measure::{expand_pattern, parse_pattern, project, sector_probability, OutcomeSector};
use rydcrit::mps::{mps_to_dense, MatrixProductState};
use rydcrit::observables::{connected_correlator, Coordinate, DiagonalObservable};
use rydcrit::shots::{
    estimate_connected, estimate_observable, filter_sector, sample_shots, ShotSet,
    DEFAULT_SHOT_FLOOR,
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

// ------------------------------------------------------------ reproducibility

#[test]
fn same_seed_reproduces_shots_bit_for_bit() {
    let state = critical_ground(Model::Ising, hard(10, Boundary::Periodic));
    let a = sample_shots(&state, 64, 42).unwrap();
    let b = sample_shots(&state, 64, 42).unwrap();
    assert_eq!(a.shots(), b.shots());
    assert_eq!(a.source(), state.content_id());
    assert_eq!(a.seed(), 42);
    assert!(a.sector().is_none());

    let c = sample_shots(&state, 64, 43).unwrap();
    assert_ne!(a.shots(), c.shots(), "different seeds must decorrelate");
}

#[test]
fn shot_streams_are_indexed_not_sequential() {
    // Shot i depends only on (seed, i): a shorter batch is a prefix of a
    // longer one, so batches can be grown or sharded without resampling.
    let state = critical_ground(Model::Ising, hard(12, Boundary::Open));
    let long = sample_shots(&state, 32, 7).unwrap();
    let short = sample_shots(&state, 10, 7).unwrap();
    assert_eq!(&long.shots()[..10], short.shots());
}

#[test]
fn product_states_sample_deterministically() {
    let geometry = hard(9, Boundary::Open);
    let config = 0b101010101;
    let state = product_state(geometry, config);
    let shots = sample_shots(&state, 25, 3).unwrap();
    assert!(shots.shots().iter().all(|&c| c == config));
    assert_eq!(shots.bitstring(0), "101010101");
}

// ------------------------------------------------------------- calibration

#[test]
fn frequencies_match_born_weights() {
    // Every basis configuration's sampled frequency must sit within four
    // binomial standard deviations of its Born weight (seed frozen, so this
    // is a deterministic regression, calibrated once).
    let geometry = hard(8, Boundary::Open);
    let state = critical_ground(Model::Ising, geometry);
    let n = 50_000usize;
    let shots = sample_shots(&state, n, 20260818).unwrap();

    let basis = BlockadedBasis::enumerate(geometry).unwrap();
    let mut counts = vec![0usize; basis.len()];
    for &c in shots.shots() {
        counts[basis.index_of(c).unwrap()] += 1;
    }
    let mut total_deviation = 0.0;
    for (idx, &config) in basis.configs().iter().enumerate() {
        let p = state.amplitude(config).powi(2);
        let freq = counts[idx] as f64 / n as f64;
        total_deviation += (freq - p).abs();
        if p > 1e-3 {
            let sigma = (p * (1.0 - p) / n as f64).sqrt();
            assert!(
                (freq - p).abs() < 4.0 * sigma,
                "config {config:#010b}: freq {freq:.5} vs Born {p:.5}"
            );
        }
    }
    // Expected total variation for 55 configs at 50k shots is bounded by
    // sqrt(2/(pi*n)) * sqrt(dim) ~ 0.026; a broken sampler lands near 1.
    assert!(total_deviation < 0.04, "aggregate miss {total_deviation}");
}

#[test]
fn hard_blockade_shots_never_violate_the_constraint() {
    let state = critical_ground(Model::Ising, hard(12, Boundary::Periodic));
    let shots = sample_shots(&state, 2_000, 5).unwrap();
    for (i, &c) in shots.shots().iter().enumerate() {
        assert_eq!(c & (c >> 1), 0, "shot {i} has adjacent excitations");
        assert!(
            c & 1 == 0 || (c >> 11) & 1 == 0,
            "shot {i} violates the wrap-around pair"
        );
    }
}

#[test]
fn mps_and_dense_backends_draw_identical_shots() {
    // Both backends sample the same per-site conditionals in the same
    // order, consuming one uniform draw per site, so a shared seed yields
    // identical bitstrings (up to degenerate float ties, absent here).
    let soft = ChainGeometry::new(8, Boundary::Periodic, ConstraintMode::Penalty).unwrap();
    let mps = MatrixProductState::random(soft, 5, 77).unwrap();
    let basis = Arc::new(BlockadedBasis::enumerate(soft).unwrap());
    let dense = Wavefunction::Dense(mps_to_dense(&mps, &basis).unwrap());
    let mps = Wavefunction::Mps(mps);

    let from_dense = sample_shots(&dense, 400, 9).unwrap();
    let from_mps = sample_shots(&mps, 400, 9).unwrap();
    assert_eq!(from_dense.shots(), from_mps.shots());
}

// ------------------------------------------------------ restricted averaging

#[test]
fn retention_tracks_the_sector_probability() {
    let geometry = hard(12, Boundary::Periodic);
    let state = critical_ground(Model::Ising, geometry);
    let s = sector("n[2j]=0", geometry);
    let p = sector_probability(&state, &s).unwrap();

    let n = 40_000usize;
    let shots = sample_shots(&state, n, 101).unwrap();
    let kept = filter_sector(&shots, &s).unwrap();
    assert_eq!(kept.sector(), Some("n[2j]=0"));
    assert_eq!(kept.seed(), shots.seed());

    let retention = kept.len() as f64 / n as f64;
    let sigma = (p * (1.0 - p) / n as f64).sqrt();
    assert!(
        (retention - p).abs() < 3.0 * sigma,
        "retention {retention:.5} vs P_n {p:.5} (sigma {sigma:.2e})"
    );

    // Retained shots reproduce the measured outcomes exactly.
    for &c in kept.shots() {
        for &(site, bit) in s.measured() {
            assert_eq!(((c >> site) & 1) as u8, bit);
        }
    }
}

#[test]
fn estimates_are_unbiased_across_seeds() {
    let geometry = hard(12, Boundary::Periodic);
    let state = critical_ground(Model::Ising, geometry);
    let obs = DiagonalObservable::new(
        vec![(0, 0.5), (1, 0.5)],
        "epsilon",
        Coordinate::new(1, 2),
    )
    .unwrap();
    let exact = rydcrit::observables::expectation(&state, &obs).unwrap();

    let mut means = Vec::new();
    for seed in 0..20u64 {
        let shots = sample_shots(&state, 2_000, seed).unwrap();
        let (mean, stderr) = estimate_observable(&shots, &obs).unwrap();
        assert!(stderr > 0.0);
        means.push(mean);
    }
    let grand = means.iter().sum::<f64>() / means.len() as f64;
    let spread = (means.iter().map(|m| (m - grand).powi(2)).sum::<f64>()
        / (means.len() as f64 - 1.0))
        .sqrt();
    let sem = spread / (means.len() as f64).sqrt();
    assert!(
        (grand - exact).abs() < 3.0 * sem,
        "grand mean {grand:.6} vs exact {exact:.6} (sem {sem:.2e})"
    );
}

#[test]
fn deterministic_observables_have_zero_stderr() {
    let geometry = hard(9, Boundary::Open);
    let state = product_state(geometry, 0b101010101);
    let shots = sample_shots(&state, 50, 1).unwrap();
    let obs = DiagonalObservable::new(vec![(0, 1.0)], "n0", Coordinate::new(0, 1)).unwrap();
    let (mean, stderr) = estimate_observable(&shots, &obs).unwrap();
    assert_eq!(mean, 1.0);
    assert_eq!(stderr, 0.0);
}

#[test]
fn restricted_averages_match_the_projected_state() {
    // The central protocol equivalence: estimating dictionary correlators
    // over sector-filtered full-chain shots reproduces exact connected
    // correlators of the projectively measured state.
    let geometry = hard(12, Boundary::Periodic);
    let state = critical_ground(Model::Ising, geometry);
    let s = sector("n[2j]=0", geometry);
    let obs = rydcrit::observables::build_sigma_n(&s).unwrap();
    let pairs: Vec<(usize, usize)> = (0..obs.len())
        .flat_map(|a| ((a + 1)..obs.len()).map(move |b| (a, b)))
        .collect();

    let (projected, _) = project(&state, &s).unwrap();
    let exact = connected_correlator(&projected, &obs, &pairs).unwrap();

    let shots = sample_shots(&state, 60_000, 2718).unwrap();
    let kept = filter_sector(&shots, &s).unwrap();
    assert!(kept.len() > 5_000, "retained only {}", kept.len());
    let sampled = estimate_connected(&kept, &obs, &pairs, DEFAULT_SHOT_FLOOR).unwrap();

    assert_eq!(sampled.points.len(), exact.points.len());
    assert_eq!(sampled.sector.as_deref(), Some("n[2j]=0"));
    for (est, truth) in sampled.points.iter().zip(&exact.points) {
        assert_eq!(est.separation, truth.separation);
        let sigma = est.stderr.expect("jackknife stderr");
        assert!(sigma > 0.0);
        assert!(
            (est.value - truth.value).abs() < 3.0 * sigma,
            "sep {}: {} vs {} (sigma {:.2e})",
            est.separation,
            est.value,
            truth.value,
            sigma
        );
    }
}

// ------------------------------------------------------------------- guards

#[test]
fn shot_sets_validate_their_contents() {
    let geometry = hard(6, Boundary::Open);
    let err = ShotSet::new(geometry, vec![0b11], 0, "x").unwrap_err();
    assert!(err.to_string().contains("blockade"), "{err}");
    let err = ShotSet::new(geometry, vec![1 << 6], 0, "x").unwrap_err();
    assert!(err.to_string().contains("beyond"), "{err}");

    let soft = ChainGeometry::new(6, Boundary::Open, ConstraintMode::Penalty).unwrap();
    assert!(ShotSet::new(soft, vec![0b11], 0, "x").is_ok());
}

#[test]
fn mismatched_sector_geometry_is_rejected() {
    let state = critical_ground(Model::Ising, hard(12, Boundary::Periodic));
    let shots = sample_shots(&state, 10, 0).unwrap();
    let other = sector("n[2j]=0", hard(10, Boundary::Periodic));
    let err = filter_sector(&shots, &other).unwrap_err();
    assert!(err.to_string().contains("different chains"), "{err}");
}

#[test]
fn estimators_enforce_their_floors() {
    let geometry = hard(8, Boundary::Open);
    let state = critical_ground(Model::Ising, geometry);
    let one = sample_shots(&state, 1, 0).unwrap();
    assert!(estimate_observable(&one, &DiagonalObservable::new(
        vec![(0, 1.0)], "n0", Coordinate::new(0, 1)).unwrap()).is_err());

    let few = sample_shots(&state, 50, 0).unwrap();
    let obs = vec![
        DiagonalObservable::new(vec![(1, 1.0)], "a", Coordinate::new(1, 1)).unwrap(),
        DiagonalObservable::new(vec![(5, 1.0)], "a", Coordinate::new(5, 1)).unwrap(),
    ];
    let err = estimate_connected(&few, &obs, &[(0, 1)], 100).unwrap_err();
    assert!(err.to_string().contains("retained"), "{err}");
    assert!(estimate_connected(&few, &obs, &[(0, 1)], 10).is_ok());

    let err = estimate_connected(&few, &obs, &[(0, 2)], 10).unwrap_err();
    assert!(err.to_string().contains("outside the observable list"), "{err}");
}

#[test]
fn unnormalized_states_are_refused() {
    let geometry = hard(6, Boundary::Open);
    let basis = Arc::new(BlockadedBasis::enumerate(geometry).unwrap());
    let mut amps = vec![0.0; basis.len()];
    amps[0] = 2.0;
    let state = Wavefunction::Dense(DenseState::new(basis, amps).unwrap());
    let err = sample_shots(&state, 5, 0).unwrap_err();
    assert!(err.to_string().contains("normalized"), "{err}");
}
