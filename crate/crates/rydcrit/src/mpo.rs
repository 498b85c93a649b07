//! Matrix-product-operator form of the chain Hamiltonian.
//!
//! The MPO is a finite-state automaton over virtual bond states:
//!
//! * `0` — nothing pending,
//! * `1` — an occupation operator was placed on the previous site,
//! * `2` — an occupation operator was placed two sites back,
//! * `3` — the local term chain is complete (absorbing state),
//!
//! giving bond dimension 4 on open chains. Rings add two carrier states that
//! remember `n_0` and `n_1` until the interactions wrap around the seam
//! (`n_{L-1} n_0` and `n_{L-2} n_0`, `n_{L-1} n_1`), for bond dimension 6.
//!
//! The MPO always acts on the full two-state product space of every site, so
//! it is the natural partner of penalty-mode parameters (finite `V1`
//! blocking); pair it with [`crate::dmrg`]. Contracting it to a dense matrix
//! reproduces [`crate::hamiltonian::build_hamiltonian`] on the penalty basis
//! entry for entry, which is how it is tested.

use nalgebra::DMatrix;

use crate::basis::{Boundary, ChainGeometry};
use crate::error::{Error, Result};
use crate::hamiltonian::HamiltonianParams;

/// One MPO site tensor `W[a, b, s, t]`: virtual in `a`, virtual out `b`,
/// bra and ket physical indices `s, t` (row-major, physical dimension 2).
#[derive(Debug, Clone)]
pub struct MpoTensor {
    pub wl: usize,
    pub wr: usize,
    data: Vec<f64>,
}

impl MpoTensor {
    fn zeros(wl: usize, wr: usize) -> Self {
        MpoTensor {
            wl,
            wr,
            data: vec![0.0; wl * wr * 4],
        }
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize, s: usize, t: usize) -> f64 {
        self.data[((a * self.wr + b) * 2 + s) * 2 + t]
    }

    #[inline]
    fn add_op(&mut self, a: usize, b: usize, op: &[f64; 4], coeff: f64) {
        for s in 0..2 {
            for t in 0..2 {
                self.data[((a * self.wr + b) * 2 + s) * 2 + t] += coeff * op[2 * s + t];
            }
        }
    }

    /// Nonzero entries as `(a, b, s, t, value)`, for sparse contractions.
    pub fn nonzeros(&self) -> Vec<(usize, usize, usize, usize, f64)> {
        let mut out = Vec::new();
        for a in 0..self.wl {
            for b in 0..self.wr {
                for s in 0..2 {
                    for t in 0..2 {
                        let v = self.get(a, b, s, t);
                        if v != 0.0 {
                            out.push((a, b, s, t, v));
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct MatrixProductOperator {
    geometry: ChainGeometry,
    tensors: Vec<MpoTensor>,
}

const OP_I: [f64; 4] = [1.0, 0.0, 0.0, 1.0];
const OP_X: [f64; 4] = [0.0, 1.0, 1.0, 0.0]; // b + b^+ on a hard-core site
const OP_N: [f64; 4] = [0.0, 0.0, 0.0, 1.0];

impl MatrixProductOperator {
    pub fn geometry(&self) -> ChainGeometry {
        self.geometry
    }

    pub fn length(&self) -> usize {
        self.geometry.length
    }

    pub fn tensors(&self) -> &[MpoTensor] {
        &self.tensors
    }

    pub fn tensor(&self, site: usize) -> &MpoTensor {
        &self.tensors[site]
    }

    /// Largest virtual bond dimension (4 open, 6 periodic).
    pub fn max_bond(&self) -> usize {
        self.tensors.iter().map(|t| t.wr).max().unwrap_or(1)
    }

    /// Contract to a dense `2^L x 2^L` matrix over the full product basis in
    /// lexicographic order. Exponential — guarded to small chains.
    pub fn to_dense(&self) -> Result<DMatrix<f64>> {
        let length = self.geometry.length;
        if length > 12 {
            return Err(Error::Capacity(format!(
                "dense MPO contraction requested for L={length}; limited to L <= 12"
            )));
        }
        // Running blocks R[b] of size 2^k x 2^k, one per virtual bond state.
        let mut blocks = vec![DMatrix::from_element(1, 1, 1.0)];
        for tensor in &self.tensors {
            let side = blocks[0].nrows();
            let mut next =
                vec![DMatrix::<f64>::zeros(side * 2, side * 2); tensor.wr];
            for (a, b, s, t, v) in tensor.nonzeros() {
                let block = &blocks[a];
                for i in 0..side {
                    for j in 0..side {
                        // Appending site k makes it the least significant
                        // position of the occupation string.
                        next[b][(2 * i + s, 2 * j + t)] += v * block[(i, j)];
                    }
                }
            }
            blocks = next;
        }
        debug_assert_eq!(blocks.len(), 1);
        Ok(blocks.pop().unwrap())
    }
}

/// Build the Hamiltonian MPO for `geometry` (boundary and length; the
/// constraint mode does not enter — the operator always includes the `V1`
/// penalty term on the full product space).
pub fn build_mpo(
    geometry: ChainGeometry,
    params: &HamiltonianParams,
) -> Result<MatrixProductOperator> {
    let length = geometry.length;
    let periodic = geometry.boundary == Boundary::Periodic;
    if periodic && length < 3 {
        return Err(Error::InvalidInput(
            "periodic interactions need at least 3 sites (V2 would couple a site to itself)"
                .into(),
        ));
    }
    if params.edge_detuning_shift && periodic {
        return Err(Error::InvalidInput(
            "edge detuning shift is defined for open chains only".into(),
        ));
    }

    let w = if periodic { 6 } else { 4 };
    let mut tensors = Vec::with_capacity(length);
    for j in 0..length {
        let wl = if j == 0 { 1 } else { w };
        let wr = if j == length - 1 { 1 } else { w };
        let mut tensor = MpoTensor::zeros(wl, wr);

        let mut delta_j = params.delta;
        if params.edge_detuning_shift && (j == 0 || j == length - 1) {
            delta_j -= params.v2;
        }

        // Entry helper mapping automaton states onto the sliced boundary
        // tensors: row state on site 0 must be 0, column state on the last
        // site must be 3 (the absorbing state).
        let mut put = |a: usize, b: usize, op: &[f64; 4], coeff: f64| {
            if j == 0 && a != 0 {
                return;
            }
            if j == length - 1 && b != 3 {
                return;
            }
            let row = if j == 0 { 0 } else { a };
            let col = if j == length - 1 { 0 } else { b };
            tensor.add_op(row, col, op, coeff);
        };

        // Local chain: idle, start a pair, finish local terms, done.
        put(0, 0, &OP_I, 1.0);
        put(0, 1, &OP_N, 1.0);
        put(0, 3, &OP_X, 0.5 * params.omega);
        put(0, 3, &OP_N, -delta_j);
        put(1, 2, &OP_I, 1.0);
        put(1, 3, &OP_N, params.v1);
        put(2, 3, &OP_N, params.v2);
        put(3, 3, &OP_I, 1.0);

        if periodic {
            // State 4 carries n_0 to the far end: V2 closes at L-2, V1 at L-1.
            if j == 0 {
                put(0, 4, &OP_N, 1.0);
            }
            if j >= 1 && j <= length - 2 {
                put(4, 4, &OP_I, 1.0);
            }
            if j == length - 2 {
                put(4, 3, &OP_N, params.v2);
            }
            if j == length - 1 {
                put(4, 3, &OP_N, params.v1);
            }
            // State 5 carries n_1: V2 closes at the last site.
            if j == 1 {
                put(0, 5, &OP_N, 1.0);
            }
            if j >= 2 && j <= length - 2 {
                put(5, 5, &OP_I, 1.0);
            }
            if j == length - 1 {
                put(5, 3, &OP_N, params.v2);
            }
        }

        tensors.push(tensor);
    }

    Ok(MatrixProductOperator { geometry, tensors })
}
