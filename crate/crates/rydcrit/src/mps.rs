//! Matrix-product states on the full two-state product space of the chain.
//!
//! Site tensors `A[a, s, b]` carry a left bond `a`, the physical occupation
//! `s` (dimension 2), and a right bond `b`, stored row-major. The state is
//! the boundary-contracted product of all site matrices; no canonical form
//! is assumed by the accessors — methods that need one (entropy,
//! compression, sampling) build it internally via QR/SVD.
//!
//! Blockade physics enters only through the Hamiltonian (penalty mode);
//! [`mps_to_dense`] bridges back to constrained dense bases and verifies on
//! the way that the weight outside the constrained space is negligible.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::basis::{BasisConfig, BlockadedBasis, ChainGeometry, ConstraintMode};
use crate::error::{Error, Result};
use crate::linalg;
use crate::solve::DenseState;
use std::sync::Arc;

/// One MPS site tensor `A[a, s, b]`, row-major, physical dimension 2.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteTensor {
    pub dl: usize,
    pub dr: usize,
    pub data: Vec<f64>,
}

impl SiteTensor {
    pub fn zeros(dl: usize, dr: usize) -> Self {
        SiteTensor {
            dl,
            dr,
            data: vec![0.0; dl * 2 * dr],
        }
    }

    #[inline]
    pub fn get(&self, a: usize, s: usize, b: usize) -> f64 {
        self.data[(a * 2 + s) * self.dr + b]
    }

    #[inline]
    pub fn set(&mut self, a: usize, s: usize, b: usize, v: f64) {
        self.data[(a * 2 + s) * self.dr + b] = v;
    }

    /// The `dl x dr` matrix `A^s` for fixed physical index.
    pub fn phys_matrix(&self, s: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dl, self.dr);
        for a in 0..self.dl {
            for b in 0..self.dr {
                m[(a, b)] = self.get(a, s, b);
            }
        }
        m
    }
}

#[derive(Debug, Clone)]
pub struct MatrixProductState {
    geometry: ChainGeometry,
    tensors: Vec<SiteTensor>,
}

impl MatrixProductState {
    pub fn new(geometry: ChainGeometry, tensors: Vec<SiteTensor>) -> Result<Self> {
        if tensors.len() != geometry.length {
            return Err(Error::InvalidInput(format!(
                "{} site tensors for a chain of {} sites",
                tensors.len(),
                geometry.length
            )));
        }
        if tensors[0].dl != 1 || tensors[geometry.length - 1].dr != 1 {
            return Err(Error::InvalidInput(
                "boundary bonds of an MPS must have dimension 1".into(),
            ));
        }
        for (i, pair) in tensors.windows(2).enumerate() {
            if pair[0].dr != pair[1].dl {
                return Err(Error::InvalidInput(format!(
                    "bond dimension mismatch between sites {i} and {}",
                    i + 1
                )));
            }
        }
        Ok(MatrixProductState { geometry, tensors })
    }

    /// Product state `|config>` with all bonds of dimension 1.
    pub fn product(geometry: ChainGeometry, config: BasisConfig) -> Self {
        let tensors = (0..geometry.length)
            .map(|j| {
                let mut t = SiteTensor::zeros(1, 1);
                let s = (config >> j & 1) as usize;
                t.set(0, s, 0, 1.0);
                t
            })
            .collect();
        MatrixProductState { geometry, tensors }
    }

    /// Random normalized state with bond dimensions capped at `chi`.
    pub fn random(geometry: ChainGeometry, chi: usize, seed: u64) -> Result<Self> {
        let length = geometry.length;
        let chi = chi.max(1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bond = |i: usize| -> usize {
            // Exact dimension caps near the chain ends: 2^i from the left,
            // 2^(L-i) from the right.
            let left = 1usize.checked_shl(i.min(30) as u32).unwrap_or(usize::MAX);
            let right = 1usize
                .checked_shl((length - i).min(30) as u32)
                .unwrap_or(usize::MAX);
            chi.min(left).min(right)
        };
        let mut tensors = Vec::with_capacity(length);
        for j in 0..length {
            let (dl, dr) = (bond(j), bond(j + 1));
            let mut t = SiteTensor::zeros(dl, dr);
            for v in t.data.iter_mut() {
                *v = rng.gen_range(-1.0..1.0);
            }
            tensors.push(t);
        }
        let mut mps = MatrixProductState { geometry, tensors };
        mps.right_canonicalize()?;
        mps.normalize()?;
        Ok(mps)
    }

    pub fn geometry(&self) -> ChainGeometry {
        self.geometry
    }

    pub fn length(&self) -> usize {
        self.geometry.length
    }

    pub fn tensors(&self) -> &[SiteTensor] {
        &self.tensors
    }

    pub fn tensor(&self, site: usize) -> &SiteTensor {
        &self.tensors[site]
    }

    pub fn tensor_mut(&mut self, site: usize) -> &mut SiteTensor {
        &mut self.tensors[site]
    }

    pub fn set_tensor(&mut self, site: usize, tensor: SiteTensor) {
        self.tensors[site] = tensor;
    }

    /// Bond dimensions between consecutive sites (length `L - 1`).
    pub fn bond_dims(&self) -> Vec<usize> {
        self.tensors.windows(2).map(|p| p[0].dr).collect()
    }

    pub fn max_bond(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    /// Amplitude of a single configuration, by contracting the site chain.
    pub fn amplitude(&self, config: BasisConfig) -> f64 {
        let mut v = vec![1.0];
        for (j, t) in self.tensors.iter().enumerate() {
            let s = (config >> j & 1) as usize;
            let mut next = vec![0.0; t.dr];
            for a in 0..t.dl {
                let va = v[a];
                if va == 0.0 {
                    continue;
                }
                let base = (a * 2 + s) * t.dr;
                for b in 0..t.dr {
                    next[b] += va * t.data[base + b];
                }
            }
            v = next;
        }
        v[0]
    }

    /// `<self|self>^(1/2)` via the transfer contraction.
    pub fn norm(&self) -> f64 {
        self.overlap(self).max(0.0).sqrt()
    }

    /// `<self|other>` (real inner product).
    pub fn overlap(&self, other: &MatrixProductState) -> f64 {
        assert_eq!(self.length(), other.length());
        // rho[a, b]: bra bond of self x ket bond of other.
        let mut rho = DMatrix::from_element(1, 1, 1.0);
        for (t_bra, t_ket) in self.tensors.iter().zip(&other.tensors) {
            let mut next = DMatrix::zeros(t_bra.dr, t_ket.dr);
            for s in 0..2 {
                let mb = t_bra.phys_matrix(s);
                let mk = t_ket.phys_matrix(s);
                next += mb.transpose() * &rho * mk;
            }
            rho = next;
        }
        rho[(0, 0)]
    }

    /// Scale the state to unit norm, returning the previous norm.
    pub fn normalize(&mut self) -> Result<f64> {
        let n = self.norm();
        if !(n > 1e-154) {
            return Err(Error::ZeroProbability(
                "matrix-product state norm underflowed to zero".into(),
            ));
        }
        // Spread the correction across sites to dodge under/overflow on
        // long chains.
        let per_site = (-(n.ln()) / self.length() as f64).exp();
        for t in &mut self.tensors {
            linalg::scale(&mut t.data, per_site);
        }
        Ok(n)
    }

    /// Multiply the physical slices of `site` by `w0` (empty) and `w1`
    /// (occupied) — a diagonal single-site operator.
    pub fn apply_site_diag(&mut self, site: usize, w0: f64, w1: f64) {
        let t = &mut self.tensors[site];
        for a in 0..t.dl {
            for (s, w) in [(0usize, w0), (1usize, w1)] {
                if w == 1.0 {
                    continue;
                }
                let base = (a * 2 + s) * t.dr;
                for b in 0..t.dr {
                    t.data[base + b] *= w;
                }
            }
        }
    }

    /// Occupation expectation `<n_j>` for every site, one left-to-right
    /// sweep with cached right environments. Cost O(L chi^3).
    pub fn occupation_profile(&self) -> Vec<f64> {
        let length = self.length();
        // Right environments: rho_right[i] contracts sites i..L.
        let mut right = vec![DMatrix::from_element(1, 1, 1.0); length + 1];
        for i in (0..length).rev() {
            let t = &self.tensors[i];
            let mut acc = DMatrix::zeros(t.dl, t.dl);
            for s in 0..2 {
                let m = t.phys_matrix(s);
                acc += &m * &right[i + 1] * m.transpose();
            }
            right[i] = acc;
        }
        let norm2 = right[0][(0, 0)];
        let mut left = DMatrix::from_element(1, 1, 1.0);
        let mut out = Vec::with_capacity(length);
        for i in 0..length {
            let t = &self.tensors[i];
            let m1 = t.phys_matrix(1);
            let weighted = m1.transpose() * &left * &m1;
            out.push((weighted.component_mul(&right[i + 1])).sum() / norm2);
            let m0 = t.phys_matrix(0);
            left = m0.transpose() * &left * m0 + m1.transpose() * &left * &m1;
        }
        out
    }

    /// `<n_i n_j>` for `i < j`, sharing the left environment across the
    /// requested pairs. `pairs` need not be sorted; cost is O(chi^3) per
    /// transfer step between the outermost requested sites.
    pub fn occupation_pair(&self, pairs: &[(usize, usize)]) -> Vec<f64> {
        let length = self.length();
        let mut right = vec![DMatrix::from_element(1, 1, 1.0); length + 1];
        for i in (0..length).rev() {
            let t = &self.tensors[i];
            let mut acc = DMatrix::zeros(t.dl, t.dl);
            for s in 0..2 {
                let m = t.phys_matrix(s);
                acc += &m * &right[i + 1] * m.transpose();
            }
            right[i] = acc;
        }
        let norm2 = right[0][(0, 0)];

        // Group pairs by their first site so each left environment with one
        // inserted occupation is propagated once.
        let mut by_first: Vec<Vec<(usize, usize)>> = vec![Vec::new(); length];
        for (k, &(i, j)) in pairs.iter().enumerate() {
            assert!(i < j && j < length, "pair ({i},{j}) out of range");
            by_first[i].push((j, k));
        }
        let mut out = vec![0.0; pairs.len()];

        let mut left = DMatrix::from_element(1, 1, 1.0);
        for i in 0..length {
            if !by_first[i].is_empty() {
                let mut targets = by_first[i].clone();
                targets.sort_unstable();
                let t = &self.tensors[i];
                let m1 = t.phys_matrix(1);
                let mut env = m1.transpose() * &left * &m1;
                let mut pos = i + 1;
                for (j, k) in targets {
                    while pos < j {
                        let t = &self.tensors[pos];
                        let mut acc = DMatrix::zeros(t.dr, t.dr);
                        for s in 0..2 {
                            let m = t.phys_matrix(s);
                            acc += m.transpose() * &env * &m;
                        }
                        env = acc;
                        pos += 1;
                    }
                    let tj = &self.tensors[j];
                    let mj = tj.phys_matrix(1);
                    let weighted = mj.transpose() * &env * &mj;
                    out[k] = weighted.component_mul(&right[j + 1]).sum() / norm2;
                }
            }
            let t = &self.tensors[i];
            let mut acc = DMatrix::zeros(t.dr, t.dr);
            for s in 0..2 {
                let m = t.phys_matrix(s);
                acc += m.transpose() * &left * &m;
            }
            left = acc;
        }
        out
    }

    /// Left-canonicalize sites `0..upto` (exclusive), pushing the remainder
    /// into site `upto`. Leaves earlier tensors as left isometries.
    fn left_canonicalize_upto(&mut self, upto: usize) {
        for i in 0..upto {
            let t = &self.tensors[i];
            let m = linalg::to_dmatrix(t.dl * 2, t.dr, &t.data);
            let qr = m.qr();
            let q = qr.q();
            let r = qr.r();
            let k = q.ncols();
            let mut new_t = SiteTensor::zeros(t.dl, k);
            new_t.data.copy_from_slice(&linalg::from_dmatrix(&q));
            self.tensors[i] = new_t;
            // Absorb R into the next tensor: A'[a,s,b] = sum_m R[a,m] A[m,s,b].
            let next = &self.tensors[i + 1];
            let nm = linalg::to_dmatrix(next.dl, 2 * next.dr, &next.data);
            let merged = &r * nm;
            let mut new_next = SiteTensor::zeros(k, next.dr);
            new_next.data.copy_from_slice(&linalg::from_dmatrix(&merged));
            self.tensors[i + 1] = new_next;
        }
    }

    /// Right-canonicalize the whole chain; afterwards every tensor except
    /// the first is a right isometry and site 0 carries the norm.
    pub fn right_canonicalize(&mut self) -> Result<()> {
        for i in (1..self.length()).rev() {
            let t = &self.tensors[i];
            // M[a, (s b)]; we need M = L Q with Q a right isometry, so QR
            // factor the transpose.
            let m = linalg::to_dmatrix(t.dl, 2 * t.dr, &t.data);
            let qr = m.transpose().qr();
            let q = qr.q(); // (2 dr) x k, orthonormal columns
            let r = qr.r(); // k x dl
            let k = q.ncols();
            let qt = q.transpose(); // k x (2 dr): right isometry rows
            let mut new_t = SiteTensor::zeros(k, t.dr);
            new_t.data.copy_from_slice(&linalg::from_dmatrix(&qt));
            self.tensors[i] = new_t;
            let l = r.transpose(); // dl x k
            let prev = &self.tensors[i - 1];
            let pm = linalg::to_dmatrix(prev.dl * 2, prev.dr, &prev.data);
            let merged = pm * &l;
            let mut new_prev = SiteTensor::zeros(prev.dl, k);
            new_prev
                .data
                .copy_from_slice(&linalg::from_dmatrix(&merged));
            self.tensors[i - 1] = new_prev;
        }
        Ok(())
    }

    /// Schmidt values across the bond left of site `cut` (so `cut` sites on
    /// the left block), normalized to unit square sum.
    pub fn schmidt_values(&self, cut: usize) -> Result<Vec<f64>> {
        if cut == 0 || cut >= self.length() {
            return Err(Error::InvalidInput(format!(
                "cut must split the chain, got {cut} of {} sites",
                self.length()
            )));
        }
        let mut work = self.clone();
        work.right_canonicalize()?;
        work.left_canonicalize_upto(cut);
        // Sites < cut are left isometries, sites > cut right isometries:
        // the Schmidt spectrum is the SVD of the center tensor's matrix.
        let t = &work.tensors[cut];
        let m = linalg::to_dmatrix(t.dl, 2 * t.dr, &t.data);
        let mut svals: Vec<f64> = m.svd(false, false).singular_values.iter().copied().collect();
        let total: f64 = svals.iter().map(|s| s * s).sum::<f64>().sqrt();
        if !(total > 1e-154) {
            return Err(Error::ZeroProbability("state norm is zero".into()));
        }
        for s in &mut svals {
            *s /= total;
        }
        Ok(svals)
    }

    /// Von Neumann entanglement entropy (nats) across the bond left of
    /// site `cut`.
    pub fn entropy(&self, cut: usize) -> Result<f64> {
        let svals = self.schmidt_values(cut)?;
        Ok(svals
            .iter()
            .map(|&s| {
                let p = s * s;
                if p > 0.0 {
                    -p * p.ln()
                } else {
                    0.0
                }
            })
            .sum())
    }

    /// SVD-compress every bond: singular values below
    /// `cutoff * s_max` are dropped and bonds are capped at `chi_max`.
    /// Returns the total discarded squared weight (relative to the norm).
    pub fn compress(&mut self, chi_max: usize, cutoff: f64) -> Result<f64> {
        self.right_canonicalize()?;
        let mut discarded_total = 0.0;
        for i in 0..self.length() - 1 {
            let t = &self.tensors[i];
            let m = linalg::to_dmatrix(t.dl * 2, t.dr, &t.data);
            let svd = m.svd(true, true);
            let u = svd.u.as_ref().expect("svd with u");
            let vt = svd.v_t.as_ref().expect("svd with v_t");
            let svals = &svd.singular_values;
            let smax = svals.iter().cloned().fold(0.0f64, f64::max);
            let total2: f64 = svals.iter().map(|s| s * s).sum();
            let mut keep = 0;
            for (r, &s) in svals.iter().enumerate() {
                if r < chi_max && (keep == 0 || s >= cutoff * smax) {
                    keep = r + 1;
                }
            }
            let kept2: f64 = svals.iter().take(keep).map(|s| s * s).sum();
            discarded_total += (total2 - kept2) / total2.max(1e-300);

            let mut new_t = SiteTensor::zeros(t.dl, keep);
            for a in 0..t.dl * 2 {
                for b in 0..keep {
                    new_t.data[a * keep + b] = u[(a, b)];
                }
            }
            self.tensors[i] = new_t;
            // Carry S V^T into the next site.
            let next = &self.tensors[i + 1];
            let mut sv = DMatrix::zeros(keep, next.dl);
            for r in 0..keep {
                for c in 0..next.dl {
                    sv[(r, c)] = svals[r] * vt[(r, c)];
                }
            }
            let nm = linalg::to_dmatrix(next.dl, 2 * next.dr, &next.data);
            let merged = sv * nm;
            let mut new_next = SiteTensor::zeros(keep, next.dr);
            new_next
                .data
                .copy_from_slice(&linalg::from_dmatrix(&merged));
            self.tensors[i + 1] = new_next;
        }
        Ok(discarded_total)
    }
}

/// Per-shot bitstring sampler over a right-canonical copy of the state.
///
/// Preparation is done once; each draw walks the chain left to right,
/// sampling every site from its exact conditional distribution.
pub struct MpsSampler {
    tensors: Vec<SiteTensor>,
}

impl MpsSampler {
    pub fn prepare(mps: &MatrixProductState) -> Result<Self> {
        let mut work = mps.clone();
        work.right_canonicalize()?;
        work.normalize()?;
        // Push the entire norm into site 0 so conditionals are exact.
        Ok(MpsSampler {
            tensors: work.tensors,
        })
    }

    pub fn sample(&self, rng: &mut impl Rng) -> BasisConfig {
        let mut config: BasisConfig = 0;
        let mut u = vec![1.0];
        for (j, t) in self.tensors.iter().enumerate() {
            // Candidate boundary vectors u_s = u * A^s.
            let mut cand = [vec![0.0; t.dr], vec![0.0; t.dr]];
            for (s, c) in cand.iter_mut().enumerate() {
                for a in 0..t.dl {
                    let ua = u[a];
                    if ua == 0.0 {
                        continue;
                    }
                    let base = (a * 2 + s) * t.dr;
                    for b in 0..t.dr {
                        c[b] += ua * t.data[base + b];
                    }
                }
            }
            let w0: f64 = cand[0].iter().map(|x| x * x).sum();
            let w1: f64 = cand[1].iter().map(|x| x * x).sum();
            let p1 = w1 / (w0 + w1);
            let s = usize::from(rng.gen::<f64>() < p1);
            if s == 1 {
                config |= 1 << j;
            }
            u = std::mem::take(&mut cand[s]);
            let n = linalg::norm(&u);
            if n > 0.0 {
                linalg::scale(&mut u, 1.0 / n);
            }
        }
        config
    }
}

/// Contract an MPS into amplitudes over an enumerated basis.
///
/// When the target basis is hard-blockade constrained but the state lives in
/// the full penalty space, the weight on constraint-violating
/// configurations must be negligible (`<= 1e-6` of the norm) — a large
/// violation means the penalty was too weak for this bridge and is an error.
/// The returned state is normalized.
pub fn mps_to_dense(
    mps: &MatrixProductState,
    basis: &Arc<BlockadedBasis>,
) -> Result<DenseState> {
    let bg = basis.geometry();
    let mg = mps.geometry();
    if bg.length != mg.length || bg.boundary != mg.boundary {
        return Err(Error::InvalidInput(
            "basis and MPS disagree on chain length or boundary".into(),
        ));
    }
    let mut amps = Vec::with_capacity(basis.len());
    for config in basis.iter() {
        amps.push(mps.amplitude(config));
    }
    let total = mps.norm();
    if !(total > 1e-154) {
        return Err(Error::ZeroProbability("state norm is zero".into()));
    }
    let captured = linalg::norm(&amps);
    if bg.constraint == ConstraintMode::HardBlockade {
        let missing2 = ((total * total) - (captured * captured)).max(0.0);
        let residual = missing2.sqrt() / total;
        if residual > 1e-6 {
            return Err(Error::InvalidInput(format!(
                "state has weight {residual:.3e} outside the blockade-constrained space \
                 (limit 1e-6); increase the penalty or use the full basis"
            )));
        }
    }
    for a in &mut amps {
        *a /= captured;
    }
    DenseState::new(basis.clone(), amps)
}
