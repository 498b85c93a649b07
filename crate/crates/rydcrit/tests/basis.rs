//! Basis enumeration: dimensions, ordering, round-trips, capacity limits.

use rydcrit::basis::{
    config_from_string, config_to_string, fibonacci, lucas, BlockadedBasis, Boundary,
    ChainGeometry, ConstraintMode,
};
use rydcrit::error::Error;

fn geom(length: usize, boundary: Boundary, constraint: ConstraintMode) -> ChainGeometry {
    ChainGeometry::new(length, boundary, constraint).unwrap()
}

/// Independent reference: filter the full product space and sort by the
/// occupation string, most naive way possible.
fn brute_force(length: usize, boundary: Boundary) -> Vec<u64> {
    let mut configs: Vec<u64> = (0..1u64 << length)
        .filter(|&c| {
            let no_adjacent = (0..length - 1).all(|j| c >> j & 1 == 0 || c >> (j + 1) & 1 == 0);
            let wrap_ok = boundary == Boundary::Open
                || c & 1 == 0
                || c >> (length - 1) & 1 == 0;
            no_adjacent && wrap_ok
        })
        .collect();
    configs.sort_by_key(|&c| config_to_string(c, length));
    configs
}

#[test]
fn matches_brute_force_enumeration() {
    for length in 2..=14 {
        for boundary in [Boundary::Open, Boundary::Periodic] {
            let basis =
                BlockadedBasis::enumerate(geom(length, boundary, ConstraintMode::HardBlockade))
                    .unwrap();
            let expected = brute_force(length, boundary);
            assert_eq!(
                basis.configs(),
                &expected[..],
                "L={length} {boundary:?} enumeration mismatch"
            );
        }
    }
}

#[test]
fn open_dimensions_follow_fibonacci() {
    // F(L+2) with F(1) = F(2) = 1.
    for length in 2..=24 {
        let basis = BlockadedBasis::enumerate(geom(
            length,
            Boundary::Open,
            ConstraintMode::HardBlockade,
        ))
        .unwrap();
        assert_eq!(basis.len() as u128, fibonacci(length as u32 + 2));
    }
    // A couple of frozen anchors.
    assert_eq!(fibonacci(6), 8); // L = 4 open
    assert_eq!(fibonacci(26), 121_393); // L = 24 open
}

#[test]
fn periodic_dimensions_follow_lucas() {
    for length in 2..=24 {
        let basis = BlockadedBasis::enumerate(geom(
            length,
            Boundary::Periodic,
            ConstraintMode::HardBlockade,
        ))
        .unwrap();
        assert_eq!(basis.len() as u128, lucas(length as u32));
    }
    assert_eq!(lucas(4), 7);
    assert_eq!(lucas(24), 103_682);
    assert_eq!(lucas(26), 271_443);
    assert_eq!(lucas(28), 710_647);
}

#[test]
fn lexicographic_order_and_vacuum_at_zero() {
    let basis =
        BlockadedBasis::enumerate(geom(2, Boundary::Open, ConstraintMode::HardBlockade)).unwrap();
    let strings: Vec<String> = basis.iter().map(|c| config_to_string(c, 2)).collect();
    assert_eq!(strings, ["00", "01", "10"]);

    let basis =
        BlockadedBasis::enumerate(geom(3, Boundary::Open, ConstraintMode::HardBlockade)).unwrap();
    let strings: Vec<String> = basis.iter().map(|c| config_to_string(c, 3)).collect();
    assert_eq!(strings, ["000", "001", "010", "100", "101"]);

    for length in [5, 9, 16] {
        for boundary in [Boundary::Open, Boundary::Periodic] {
            let basis =
                BlockadedBasis::enumerate(geom(length, boundary, ConstraintMode::HardBlockade))
                    .unwrap();
            assert_eq!(basis.config_of(0), 0, "vacuum must sit at index 0");
            let mut strings: Vec<String> =
                basis.iter().map(|c| config_to_string(c, length)).collect();
            let sorted = {
                let mut s = strings.clone();
                s.sort();
                s
            };
            assert_eq!(strings, sorted, "L={length} {boundary:?} not lexicographic");
            strings.dedup();
            assert_eq!(strings.len(), basis.len(), "duplicate configurations");
        }
    }
}

#[test]
fn index_of_round_trips() {
    for boundary in [Boundary::Open, Boundary::Periodic] {
        let basis =
            BlockadedBasis::enumerate(geom(10, boundary, ConstraintMode::HardBlockade)).unwrap();
        for idx in 0..basis.len() {
            assert_eq!(basis.index_of(basis.config_of(idx)), Some(idx));
        }
        // Blockade violators are absent.
        assert_eq!(basis.index_of(0b11), None);
        assert_eq!(basis.index_of(0b0110000), None);
    }
}

#[test]
fn periodic_excludes_wrap_pairs() {
    let basis =
        BlockadedBasis::enumerate(geom(4, Boundary::Periodic, ConstraintMode::HardBlockade))
            .unwrap();
    assert_eq!(basis.len(), 7);
    assert!(!basis.contains(0b1001), "sites 0 and 3 touch across the seam");
    let open =
        BlockadedBasis::enumerate(geom(4, Boundary::Open, ConstraintMode::HardBlockade)).unwrap();
    assert_eq!(open.len(), 8);
    assert!(open.contains(0b1001));
}

#[test]
fn penalty_mode_keeps_full_space() {
    let basis =
        BlockadedBasis::enumerate(geom(6, Boundary::Open, ConstraintMode::Penalty)).unwrap();
    assert_eq!(basis.len(), 64);
    assert!(basis.contains(0b111111));
    // Still lexicographically ordered with the vacuum first.
    assert_eq!(basis.config_of(0), 0);
    assert_eq!(basis.index_of(0b111111), Some(63));

    // Penalty-mode enumeration is capped at 20 sites; the geometry itself is
    // fine (matrix-product backends use longer penalty chains).
    let g = ChainGeometry::new(21, Boundary::Open, ConstraintMode::Penalty).unwrap();
    let err = BlockadedBasis::enumerate(g).unwrap_err();
    assert!(matches!(err, Error::Capacity(_)), "got {err:?}");
}

#[test]
fn capacity_budget_rejects_oversized_bases() {
    let g = geom(36, Boundary::Periodic, ConstraintMode::HardBlockade);
    let err = BlockadedBasis::enumerate(g).unwrap_err();
    assert!(matches!(err, Error::Capacity(_)), "got {err:?}");

    // An explicit budget can be tighter than the default.
    let g = geom(10, Boundary::Open, ConstraintMode::HardBlockade);
    let err = BlockadedBasis::enumerate_with_capacity(g, 10).unwrap_err();
    assert!(matches!(err, Error::Capacity(_)));
}

#[test]
fn dump_writes_one_string_per_line() {
    let basis =
        BlockadedBasis::enumerate(geom(3, Boundary::Open, ConstraintMode::HardBlockade)).unwrap();
    let mut buf = Vec::new();
    basis.dump(&mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap(), "000\n001\n010\n100\n101\n");
}

#[test]
fn config_string_round_trip() {
    assert_eq!(config_to_string(0b100, 4), "0010");
    assert_eq!(config_from_string("0010").unwrap(), 0b100);
    assert!(config_from_string("01x0").is_err());
    for c in [0u64, 1, 0b10101, 0b1000001] {
        assert_eq!(config_from_string(&config_to_string(c, 8)).unwrap(), c);
    }
}

#[test]
fn geometry_validation() {
    assert!(ChainGeometry::new(1, Boundary::Open, ConstraintMode::HardBlockade).is_err());
    assert!(ChainGeometry::new(64, Boundary::Open, ConstraintMode::HardBlockade).is_err());
    let g = geom(8, Boundary::Periodic, ConstraintMode::HardBlockade);
    assert!(g.blockade_satisfied(0b10101010 >> 1)); // 01010101 pattern, no wrap clash
    assert!(!g.blockade_satisfied(0b10000001));
    assert!(!g.blockade_satisfied(0b00011000));
}
