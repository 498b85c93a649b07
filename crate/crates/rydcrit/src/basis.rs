//! Occupation bases for blockaded Rydberg chains.
//!
//! A chain of `L` two-level sites is encoded as a `u64` bitmask with bit `j`
//! holding the occupation `n_j` of site `j`. In hard-blockade mode the basis
//! contains exactly the configurations with no two adjacent excitations
//! (`n_j n_{j+1} = 0`, including the `(L-1, 0)` bond on a ring); its dimension
//! follows the Fibonacci numbers `F(L+2)` on open chains and the Lucas
//! numbers on rings. In penalty mode the full `2^L` product basis is kept and
//! the blockade is enforced energetically by the Hamiltonian instead.
//!
//! Configurations are stored in lexicographic order of the occupation string
//! `n_0 n_1 ... n_{L-1}` (site 0 is the most significant character), so the
//! vacuum always sits at index 0 and dumps are stable across runs.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Occupation bitstring; bit `j` is the eigenvalue of `n_j` on site `j`.
pub type BasisConfig = u64;

/// Largest chain length representable in the bitmask encoding.
pub const MAX_SITES: usize = 63;

/// Default cap on basis dimension (`2^24` configurations).
pub const DEFAULT_BASIS_CAPACITY: usize = 1 << 24;

/// Penalty mode keeps all `2^L` configurations, so it is restricted to
/// lengths where that is tractable.
pub const MAX_PENALTY_SITES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Open,
    Periodic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintMode {
    /// Adjacent excitations are excluded from the Hilbert space.
    #[serde(rename = "hard")]
    HardBlockade,
    /// Full product space; nearest-neighbour repulsion `V_1` acts as a
    /// blockade penalty.
    Penalty,
}

/// Chain shape: length, boundary condition, and constraint handling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChainGeometry {
    pub length: usize,
    pub boundary: Boundary,
    pub constraint: ConstraintMode,
}

impl ChainGeometry {
    pub fn new(length: usize, boundary: Boundary, constraint: ConstraintMode) -> Result<Self> {
        if length < 2 {
            return Err(Error::InvalidInput(format!(
                "chain length must be at least 2, got {length}"
            )));
        }
        if length > MAX_SITES {
            return Err(Error::InvalidInput(format!(
                "chain length {length} exceeds the bitmask limit of {MAX_SITES} sites"
            )));
        }
        Ok(ChainGeometry {
            length,
            boundary,
            constraint,
        })
    }

    pub fn open(length: usize, constraint: ConstraintMode) -> Result<Self> {
        Self::new(length, Boundary::Open, constraint)
    }

    pub fn periodic(length: usize, constraint: ConstraintMode) -> Result<Self> {
        Self::new(length, Boundary::Periodic, constraint)
    }

    /// Does `config` satisfy the hard-blockade constraint on this chain?
    ///
    /// (A pure geometry question — it ignores `constraint`, so penalty-mode
    /// states can be tested against the constraint they are meant to
    /// approach.)
    pub fn blockade_satisfied(&self, config: BasisConfig) -> bool {
        let mask = self.site_mask();
        let c = config & mask;
        if c & (c >> 1) != 0 {
            return false;
        }
        match self.boundary {
            Boundary::Open => true,
            // Wrap bond: sites L-1 and 0.
            Boundary::Periodic => c & 1 == 0 || c >> (self.length - 1) & 1 == 0,
        }
    }

    /// Bitmask with one bit set per site of the chain.
    pub fn site_mask(&self) -> u64 {
        if self.length == 64 {
            u64::MAX
        } else {
            (1u64 << self.length) - 1
        }
    }

    /// Exact basis dimension for this geometry.
    ///
    /// Hard blockade: `F(L+2)` (open, with `F(1) = F(2) = 1`) or the Lucas
    /// number `Lucas(L)` (periodic, `Lucas(1) = 1`, `Lucas(2) = 3`).
    /// Penalty: `2^L`.
    pub fn dimension(&self) -> u128 {
        match self.constraint {
            ConstraintMode::Penalty => 1u128 << self.length,
            ConstraintMode::HardBlockade => match self.boundary {
                Boundary::Open => fibonacci(self.length as u32 + 2),
                Boundary::Periodic => lucas(self.length as u32),
            },
        }
    }
}

/// Fibonacci numbers with `F(1) = F(2) = 1`.
pub fn fibonacci(n: u32) -> u128 {
    let (mut a, mut b) = (0u128, 1u128); // F(0), F(1)
    for _ in 0..n {
        (a, b) = (b, a + b);
    }
    a
}

/// Lucas numbers with `Lucas(1) = 1`, `Lucas(2) = 3`.
pub fn lucas(n: u32) -> u128 {
    let (mut a, mut b) = (2u128, 1u128); // Lucas(0), Lucas(1)
    for _ in 0..n {
        (a, b) = (b, a + b);
    }
    a
}

/// Render a configuration as its occupation string, site 0 first.
pub fn config_to_string(config: BasisConfig, length: usize) -> String {
    (0..length)
        .map(|j| if config >> j & 1 == 1 { '1' } else { '0' })
        .collect()
}

/// Parse an occupation string (site 0 first) back into a bitmask.
pub fn config_from_string(s: &str) -> Result<BasisConfig> {
    if s.len() > MAX_SITES {
        return Err(Error::InvalidInput(format!(
            "occupation string of {} sites exceeds the {MAX_SITES}-site limit",
            s.len()
        )));
    }
    let mut config = 0u64;
    for (j, ch) in s.bytes().enumerate() {
        match ch {
            b'0' => {}
            b'1' => config |= 1 << j,
            _ => {
                return Err(Error::InvalidInput(format!(
                    "occupation string may contain only '0'/'1', found {:?} at position {j}",
                    ch as char
                )))
            }
        }
    }
    Ok(config)
}

/// Sort key realizing lexicographic order of the occupation string.
#[inline]
fn lex_key(config: BasisConfig) -> u64 {
    // Site 0 must be the most significant comparison; reversing the bits
    // places bit j at position 63 - j.
    config.reverse_bits()
}

/// An enumerated occupation basis in lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockadedBasis {
    geometry: ChainGeometry,
    configs: Vec<BasisConfig>,
}

impl BlockadedBasis {
    /// Enumerate the basis for `geometry`, honoring [`DEFAULT_BASIS_CAPACITY`].
    pub fn enumerate(geometry: ChainGeometry) -> Result<Self> {
        Self::enumerate_with_capacity(geometry, DEFAULT_BASIS_CAPACITY)
    }

    /// Enumerate with an explicit dimension budget.
    ///
    /// The dimension is known in closed form, so oversized requests fail
    /// before any allocation.
    pub fn enumerate_with_capacity(geometry: ChainGeometry, capacity: usize) -> Result<Self> {
        if geometry.constraint == ConstraintMode::Penalty && geometry.length > MAX_PENALTY_SITES {
            return Err(Error::Capacity(format!(
                "penalty mode keeps the full 2^L space; enumerating length {} exceeds \
                 the supported maximum of {MAX_PENALTY_SITES} sites",
                geometry.length
            )));
        }
        let dim = geometry.dimension();
        if dim > capacity as u128 {
            return Err(Error::Capacity(format!(
                "basis for L={} ({:?}, {:?}) has dimension {dim}, over the budget of {capacity}",
                geometry.length, geometry.boundary, geometry.constraint
            )));
        }
        let configs = match geometry.constraint {
            ConstraintMode::Penalty => {
                // Full product space, still in lexicographic order.
                let mut order: Vec<BasisConfig> = (0..1u64 << geometry.length).collect();
                order.sort_unstable_by_key(|&c| lex_key(c));
                order
            }
            ConstraintMode::HardBlockade => {
                let mut out = Vec::with_capacity(dim as usize);
                enumerate_blockaded(&geometry, 0, 0, &mut out);
                out
            }
        };
        debug_assert_eq!(configs.len() as u128, dim);
        debug_assert!(configs.windows(2).all(|w| lex_key(w[0]) < lex_key(w[1])));
        Ok(BlockadedBasis { geometry, configs })
    }

    pub fn geometry(&self) -> ChainGeometry {
        self.geometry
    }

    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }

    /// Configuration at basis index `idx` (panics if out of range).
    #[inline]
    pub fn config_of(&self, idx: usize) -> BasisConfig {
        self.configs[idx]
    }

    /// Basis index of `config`, or `None` when it is not in the basis.
    #[inline]
    pub fn index_of(&self, config: BasisConfig) -> Option<usize> {
        self.configs
            .binary_search_by_key(&lex_key(config), |&c| lex_key(c))
            .ok()
    }

    pub fn contains(&self, config: BasisConfig) -> bool {
        self.index_of(config).is_some()
    }

    pub fn iter(&self) -> impl Iterator<Item = BasisConfig> + '_ {
        self.configs.iter().copied()
    }

    pub fn configs(&self) -> &[BasisConfig] {
        &self.configs
    }

    /// Write the basis as one occupation string per line, in index order.
    pub fn dump(&self, mut out: impl Write) -> Result<()> {
        for &c in &self.configs {
            writeln!(out, "{}", config_to_string(c, self.geometry.length))?;
        }
        Ok(())
    }
}

/// Depth-first extension site by site; choosing `n_j = 0` before `n_j = 1`
/// yields lexicographic order without a separate sort.
fn enumerate_blockaded(
    geometry: &ChainGeometry,
    site: usize,
    partial: BasisConfig,
    out: &mut Vec<BasisConfig>,
) {
    if site == geometry.length {
        out.push(partial);
        return;
    }
    enumerate_blockaded(geometry, site + 1, partial, out);
    let prev_occupied = site > 0 && partial >> (site - 1) & 1 == 1;
    if prev_occupied {
        return;
    }
    if site == geometry.length - 1
        && geometry.boundary == Boundary::Periodic
        && partial & 1 == 1
    {
        return; // wrap bond would hold two excitations
    }
    enumerate_blockaded(geometry, site + 1, partial | 1 << site, out);
}
