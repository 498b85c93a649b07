//! Round-trip fidelity of the on-disk formats: wavefunction checkpoints
//! (dense and MPS), shot files with JSON sidecars, and correlator CSV.

use std::sync::Arc;

use rydcrit::basis::{BlockadedBasis, Boundary, ChainGeometry, ConstraintMode};
use rydcrit::checkpoint::{
    load_series, load_shots, load_wavefunction, save_series, save_shots, save_wavefunction,
    sidecar_path,
};
use rydcrit::hamiltonian::{build_hamiltonian, critical_preset, Model};
use rydcrit::measure::{expand_pattern, parse_pattern};
use rydcrit::mps::MatrixProductState;
use rydcrit::observables::{CorrelatorPoint, CorrelatorSeries};
use rydcrit::shots::{filter_sector, sample_shots};
use rydcrit::solve::{auto_ground_state, LanczosOptions};
use rydcrit::wavefunction::Wavefunction;
use tempfile::tempdir;

fn hard(length: usize, boundary: Boundary) -> ChainGeometry {
    ChainGeometry::new(length, boundary, ConstraintMode::HardBlockade).unwrap()
}

fn critical_ground(geometry: ChainGeometry) -> Wavefunction {
    let basis = Arc::new(BlockadedBasis::enumerate(geometry).unwrap());
    let h = build_hamiltonian(&basis, &critical_preset(Model::Ising)).unwrap();
    let (state, _) = auto_ground_state(&h, &basis, &LanczosOptions::default()).unwrap();
    Wavefunction::Dense(state)
}

#[test]
fn dense_checkpoints_round_trip_exactly() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("ground.rcwf");
    let state = critical_ground(hard(10, Boundary::Periodic));
    save_wavefunction(&state, &path).unwrap();

    let loaded = load_wavefunction(&path).unwrap();
    assert_eq!(loaded.geometry(), state.geometry());
    assert_eq!(loaded.content_id(), state.content_id());
    match (&state, &loaded) {
        (Wavefunction::Dense(a), Wavefunction::Dense(b)) => assert_eq!(a.amps(), b.amps()),
        _ => panic!("backend changed on reload"),
    }
}

#[test]
fn mps_checkpoints_round_trip_exactly() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("state.rcmp");
    let soft = ChainGeometry::new(9, Boundary::Open, ConstraintMode::Penalty).unwrap();
    let mps = MatrixProductState::random(soft, 6, 5).unwrap();
    let state = Wavefunction::Mps(mps);
    save_wavefunction(&state, &path).unwrap();

    let loaded = load_wavefunction(&path).unwrap();
    assert_eq!(loaded.geometry(), soft);
    assert_eq!(loaded.content_id(), state.content_id());
    match (&state, &loaded) {
        (Wavefunction::Mps(a), Wavefunction::Mps(b)) => {
            for site in 0..9 {
                assert_eq!(a.tensor(site).data, b.tensor(site).data, "site {site}");
            }
        }
        _ => panic!("backend changed on reload"),
    }
}

#[test]
fn corrupt_checkpoints_are_rejected() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("bad.rcwf");

    std::fs::write(&path, b"NOPE").unwrap();
    let err = load_wavefunction(&path).unwrap_err();
    assert!(err.to_string().contains("magic"), "{err}");

    // Valid header, truncated payload.
    let state = critical_ground(hard(8, Boundary::Open));
    save_wavefunction(&state, &path).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() - 12]).unwrap();
    assert!(load_wavefunction(&path).is_err());
}

#[test]
fn shot_files_round_trip_with_sidecar() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("run.shots");
    let geometry = hard(12, Boundary::Periodic);
    let state = critical_ground(geometry);
    let shots = sample_shots(&state, 200, 31).unwrap();
    let sector = expand_pattern(&parse_pattern("n[2j]=0").unwrap(), geometry).unwrap();
    let kept = filter_sector(&shots, &sector).unwrap();
    save_shots(&kept, &path).unwrap();
    assert!(sidecar_path(&path).exists());

    let loaded = load_shots(&path).unwrap();
    assert_eq!(loaded.geometry(), geometry);
    assert_eq!(loaded.shots(), kept.shots());
    assert_eq!(loaded.seed(), 31);
    assert_eq!(loaded.source(), state.content_id());
    assert_eq!(loaded.sector(), Some("n[2j]=0"));
}

#[test]
fn shot_files_reject_malformed_lines() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("data.shots");
    std::fs::write(&path, "0101\n01x1\n").unwrap();
    std::fs::write(
        sidecar_path(&path),
        r#"{"seed":0,"state_id":"lab","length":4,"boundary":"open"}"#,
    )
    .unwrap();
    let err = load_shots(&path).unwrap_err();
    assert!(err.to_string().contains("invalid character"), "{err}");

    std::fs::write(&path, "0101\n010\n").unwrap();
    let err = load_shots(&path).unwrap_err();
    assert!(err.to_string().contains("expected 4"), "{err}");
}

#[test]
fn experimental_files_default_to_unconstrained_loading() {
    // No constraint tag in the sidecar: adjacent 1s must be accepted, as in
    // a real data file with readout errors.
    let dir = tempdir().unwrap();
    let path = dir.path().join("lab.shots");
    std::fs::write(&path, "1100\n0000\n").unwrap();
    std::fs::write(
        sidecar_path(&path),
        r#"{"seed":7,"state_id":"experiment-42","length":4,"boundary":"open"}"#,
    )
    .unwrap();
    let loaded = load_shots(&path).unwrap();
    assert_eq!(loaded.len(), 2);
    assert_eq!(loaded.geometry().constraint, ConstraintMode::Penalty);
    assert_eq!(loaded.shots()[0], 0b0011);
}

#[test]
fn series_csv_round_trips() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("sigma.csv");
    let series = CorrelatorSeries {
        label: "sigma_n".into(),
        length: 16,
        boundary: Boundary::Periodic,
        sector: Some("n[2j]=0".into()),
        points: vec![
            CorrelatorPoint {
                separation: 2.0,
                value: 0.03125,
                stderr: Some(1.5e-4),
            },
            CorrelatorPoint {
                separation: 4.0,
                value: 7.8e-3,
                stderr: None,
            },
        ],
    };
    save_series(&series, &path).unwrap();

    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("separation,value,stderr\n"));

    let loaded = load_series(&path).unwrap();
    assert_eq!(loaded.label, series.label);
    assert_eq!(loaded.length, series.length);
    assert_eq!(loaded.boundary, series.boundary);
    assert_eq!(loaded.sector, series.sector);
    assert_eq!(loaded.points.len(), 2);
    for (a, b) in loaded.points.iter().zip(&series.points) {
        assert_eq!(a.separation, b.separation);
        assert_eq!(a.value, b.value);
        assert_eq!(a.stderr, b.stderr);
    }
}

#[test]
fn saves_are_deterministic() {
    let dir = tempdir().unwrap();
    let state = critical_ground(hard(10, Boundary::Open));
    let a = dir.path().join("a.rcwf");
    let b = dir.path().join("b.rcwf");
    save_wavefunction(&state, &a).unwrap();
    save_wavefunction(&state, &b).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}
