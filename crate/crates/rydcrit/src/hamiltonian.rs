//! The blockaded Rydberg chain Hamiltonian
//!
//! ```text
//!     H = sum_j [ (Omega/2)(b_j + b_j^+) - Delta_j n_j
//!                 + V1 n_j n_{j+1} + V2 n_j n_{j+2} ]
//! ```
//!
//! with hard-core bosons `b_j`. On open chains the interaction sums stop at
//! the last available pair; on rings every site `j` contributes its
//! `(j, j+1 mod L)` and `(j, j+2 mod L)` partners, so short rings (`L = 4`)
//! pick up each geometric pair twice — that is the convention used
//! throughout, not an accident.
//!
//! In hard-blockade mode the `V1` term is identically zero on the
//! constrained basis and the blockade lives in the Hilbert space; in penalty
//! mode the full product space is kept and a large `V1` does the blocking.
//!
//! The optional edge detuning shift replaces `Delta -> Delta - V2` on the
//! first and last site of an open chain, compensating the missing
//! next-nearest neighbour of the edge sites.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::basis::{BlockadedBasis, Boundary, ChainGeometry, ConstraintMode};
use crate::error::{Error, Result};

/// Couplings of the chain Hamiltonian, all in units of the Rabi frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianParams {
    /// Rabi frequency `Omega` multiplying the flip term.
    pub omega: f64,
    /// Uniform detuning `Delta`.
    pub delta: f64,
    /// Nearest-neighbour repulsion `V1` (acts only in penalty mode).
    pub v1: f64,
    /// Next-nearest-neighbour coupling `V2`.
    pub v2: f64,
    /// Shift `Delta -> Delta - V2` on the two edge sites of an open chain.
    pub edge_detuning_shift: bool,
}

impl HamiltonianParams {
    pub fn new(omega: f64, delta: f64, v1: f64, v2: f64) -> Self {
        HamiltonianParams {
            omega,
            delta,
            v1,
            v2,
            edge_detuning_shift: false,
        }
    }

    pub fn with_edge_shift(mut self, enabled: bool) -> Self {
        self.edge_detuning_shift = enabled;
        self
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("omega", self.omega),
            ("delta", self.delta),
            ("v1", self.v1),
            ("v2", self.v2),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "Hamiltonian parameter {name} must be finite, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// The two critical points studied on this chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    /// Ising transition at `V2 = 0`.
    Ising,
    /// Tricritical Ising point on the `V2 < 0` line.
    Tci,
}

/// Couplings placing the chain at (or extremely close to) criticality.
///
/// Ising: `Delta_c = 0.66445` at `V2 = 0`. Tricritical Ising: the exactly
/// known parameters of the constrained integrable chain,
/// `Delta = -sqrt(5*sqrt(5) - 2)/2` and `V2 = -((1+sqrt(5))/2)^(5/2) / 2`;
/// with `g` the golden ratio these are `-(g^(5/2) - g^(-5/2))/2` and
/// `-g^(5/2)/2`. (The detuning is sometimes misprinted without its outer
/// square root; that value sits deep in the trivial phase. The form used
/// here reproduces the tricritical signatures — order-parameter exponent
/// `~3/40` and the scale-invariant measurement angle — at small sizes.)
/// The `v1` values (100 and 1000) only matter when running in penalty mode.
pub fn critical_preset(model: Model) -> HamiltonianParams {
    match model {
        Model::Ising => HamiltonianParams::new(1.0, 0.66445, 100.0, 0.0),
        Model::Tci => {
            let sqrt5 = 5.0_f64.sqrt();
            let golden = (1.0 + sqrt5) / 2.0;
            HamiltonianParams::new(
                1.0,
                -0.5 * (5.0 * sqrt5 - 2.0).sqrt(),
                1000.0,
                -0.5 * golden.powf(2.5),
            )
        }
    }
}

/// Real symmetric sparse matrix in compressed sparse row form.
///
/// Column indices within a row are strictly increasing; the matrix acts on
/// coefficient vectors in basis index order.
#[derive(Debug, Clone)]
pub struct SparseOperator {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl SparseOperator {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// `y = H x`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.dim);
        assert_eq!(y.len(), self.dim);
        for i in 0..self.dim {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.cols[k] as usize];
            }
            y[i] = acc;
        }
    }

    /// Rayleigh quotient numerator `x^T H x` in one pass.
    pub fn expectation(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dim);
        let mut acc = 0.0;
        for i in 0..self.dim {
            let mut row = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                row += self.vals[k] * x[self.cols[k] as usize];
            }
            acc += x[i] * row;
        }
        acc
    }

    /// Dense copy; intended for small dimensions (exact solvers, tests).
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                m[(i, self.cols[k] as usize)] += self.vals[k];
            }
        }
        m
    }

    /// All stored entries as `(row, col, value)` in row-major order.
    pub fn triples(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.dim).flat_map(move |i| {
            (self.row_ptr[i]..self.row_ptr[i + 1])
                .map(move |k| (i, self.cols[k] as usize, self.vals[k]))
        })
    }
}

/// Assemble the chain Hamiltonian on an enumerated basis.
///
/// Off-diagonal matrix elements connect configurations differing by exactly
/// one occupation flip (`Omega/2` each); in hard-blockade mode flips that
/// would violate the constraint are simply absent.
pub fn build_hamiltonian(
    basis: &BlockadedBasis,
    params: &HamiltonianParams,
) -> Result<SparseOperator> {
    params.validate()?;
    let geometry = basis.geometry();
    let length = geometry.length;
    if geometry.boundary == Boundary::Periodic && length < 3 {
        return Err(Error::InvalidInput(
            "periodic interactions need at least 3 sites (V2 would couple a site to itself)"
                .into(),
        ));
    }
    if params.edge_detuning_shift && geometry.boundary == Boundary::Periodic {
        return Err(Error::InvalidInput(
            "edge detuning shift is defined for open chains only".into(),
        ));
    }

    let dim = basis.len();
    let mask = geometry.site_mask();
    let half_omega = 0.5 * params.omega;

    let mut row_ptr = Vec::with_capacity(dim + 1);
    let mut cols: Vec<u32> = Vec::with_capacity(dim * (length / 2 + 2));
    let mut vals: Vec<f64> = Vec::with_capacity(dim * (length / 2 + 2));
    row_ptr.push(0);

    // Scratch for one row of (column, value) entries, sorted before commit.
    let mut row: Vec<(u32, f64)> = Vec::with_capacity(length + 1);

    for i in 0..dim {
        let c = basis.config_of(i);
        row.clear();

        let mut diag = -params.delta * c.count_ones() as f64;
        if params.edge_detuning_shift {
            // -(Delta - V2) n on the edge sites: add back V2 n.
            diag += params.v2 * ((c & 1) + (c >> (length - 1) & 1)) as f64;
        }
        let (nn, nnn) = match geometry.boundary {
            Boundary::Open => (
                (c & c >> 1).count_ones(),
                (c & c >> 2).count_ones(),
            ),
            Boundary::Periodic => {
                let rot1 = (c >> 1 | c << (length - 1)) & mask;
                let rot2 = (c >> 2 | c << (length - 2)) & mask;
                ((c & rot1).count_ones(), (c & rot2).count_ones())
            }
        };
        diag += params.v1 * nn as f64 + params.v2 * nnn as f64;
        row.push((i as u32, diag));

        if half_omega != 0.0 {
            for j in 0..length {
                let flipped = c ^ 1 << j;
                if geometry.constraint == ConstraintMode::HardBlockade
                    && !geometry.blockade_satisfied(flipped)
                {
                    continue;
                }
                let col = basis
                    .index_of(flipped)
                    .expect("flip target must be in the basis");
                row.push((col as u32, half_omega));
            }
        }

        row.sort_unstable_by_key(|&(col, _)| col);
        for &(col, val) in &row {
            cols.push(col);
            vals.push(val);
        }
        row_ptr.push(cols.len());
    }

    Ok(SparseOperator {
        dim,
        row_ptr,
        cols,
        vals,
    })
}

/// Convenience: enumerate the basis and build the Hamiltonian in one call.
pub fn build_on_geometry(
    geometry: ChainGeometry,
    params: &HamiltonianParams,
) -> Result<(BlockadedBasis, SparseOperator)> {
    let basis = BlockadedBasis::enumerate(geometry)?;
    let h = build_hamiltonian(&basis, params)?;
    Ok((basis, h))
}
