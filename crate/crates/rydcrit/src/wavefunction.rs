//! Backend-agnostic wavefunction: a dense amplitude vector over the
//! blockaded basis, or a matrix product state.
//!
//! Measurement and observable code operates on this wrapper so the same
//! protocol runs on exact-diagonalization states at small size and DMRG
//! states at large size. All operations used downstream are diagonal in the
//! occupation basis, so both backends evaluate them exactly.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::basis::{BasisConfig, BlockadedBasis, Boundary, ChainGeometry, ConstraintMode};
use crate::error::{Error, Result};
use crate::mps::MatrixProductState;
use crate::solve::DenseState;

/// Threshold below which a sector/weighting is reported as zero-probability.
pub const ZERO_PROBABILITY_THRESHOLD: f64 = 1e-14;

#[derive(Debug, Clone)]
pub enum Wavefunction {
    Dense(DenseState),
    Mps(MatrixProductState),
}

impl From<DenseState> for Wavefunction {
    fn from(state: DenseState) -> Self {
        Wavefunction::Dense(state)
    }
}

impl From<MatrixProductState> for Wavefunction {
    fn from(state: MatrixProductState) -> Self {
        Wavefunction::Mps(state)
    }
}

impl Wavefunction {
    pub fn geometry(&self) -> ChainGeometry {
        match self {
            Wavefunction::Dense(s) => s.basis().geometry(),
            Wavefunction::Mps(s) => s.geometry(),
        }
    }

    pub fn length(&self) -> usize {
        self.geometry().length
    }

    pub fn backend_name(&self) -> &'static str {
        match self {
            Wavefunction::Dense(_) => "dense",
            Wavefunction::Mps(_) => "mps",
        }
    }

    /// Short content hash of the state (backend, geometry, and amplitude
    /// data), used to tie sampled shots and checkpoints back to the exact
    /// wavefunction that produced them.
    pub fn content_id(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut hasher = Sha256::new();
        let geometry = self.geometry();
        hasher.update(self.backend_name().as_bytes());
        hasher.update((geometry.length as u64).to_le_bytes());
        hasher.update([
            match geometry.boundary {
                Boundary::Open => 0u8,
                Boundary::Periodic => 1,
            },
            match geometry.constraint {
                ConstraintMode::HardBlockade => 0u8,
                ConstraintMode::Penalty => 1,
            },
        ]);
        match self {
            Wavefunction::Dense(s) => {
                for a in s.amps() {
                    hasher.update(a.to_le_bytes());
                }
            }
            Wavefunction::Mps(s) => {
                for i in 0..geometry.length {
                    let t = s.tensor(i);
                    hasher.update((t.dl as u64).to_le_bytes());
                    hasher.update((t.dr as u64).to_le_bytes());
                    for a in &t.data {
                        hasher.update(a.to_le_bytes());
                    }
                }
            }
        }
        let digest = hasher.finalize();
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn amplitude(&self, config: BasisConfig) -> f64 {
        match self {
            Wavefunction::Dense(s) => s
                .basis()
                .index_of(config)
                .map(|i| s.amps()[i])
                .unwrap_or(0.0),
            Wavefunction::Mps(s) => s.amplitude(config),
        }
    }

    /// `<n_j>` for every site.
    pub fn occupation_profile(&self) -> Vec<f64> {
        match self {
            Wavefunction::Dense(s) => {
                let length = s.basis().geometry().length;
                let mut out = vec![0.0; length];
                for (idx, &config) in s.basis().configs().iter().enumerate() {
                    let w = s.amps()[idx] * s.amps()[idx];
                    if w == 0.0 {
                        continue;
                    }
                    let mut bits = config;
                    while bits != 0 {
                        let j = bits.trailing_zeros() as usize;
                        out[j] += w;
                        bits &= bits - 1;
                    }
                }
                out
            }
            Wavefunction::Mps(s) => s.occupation_profile(),
        }
    }

    /// Joint occupations `<n_i n_j>` for each requested pair; `i == j`
    /// degenerates to `<n_i>`. Order within a pair does not matter.
    pub fn pair_expectations(&self, pairs: &[(usize, usize)]) -> Result<Vec<f64>> {
        let length = self.length();
        for &(i, j) in pairs {
            if i >= length || j >= length {
                return Err(Error::InvalidInput(format!(
                    "pair ({i},{j}) outside chain of {length} sites"
                )));
            }
        }
        match self {
            Wavefunction::Dense(s) => {
                let mut out = vec![0.0; pairs.len()];
                for (idx, &config) in s.basis().configs().iter().enumerate() {
                    let w = s.amps()[idx] * s.amps()[idx];
                    if w == 0.0 {
                        continue;
                    }
                    for (k, &(i, j)) in pairs.iter().enumerate() {
                        if config >> i & 1 == 1 && config >> j & 1 == 1 {
                            out[k] += w;
                        }
                    }
                }
                Ok(out)
            }
            Wavefunction::Mps(s) => {
                let mut profile: Option<Vec<f64>> = None;
                let mut ordered: Vec<(usize, usize)> = Vec::new();
                let mut slots: Vec<usize> = Vec::new();
                let mut out = vec![0.0; pairs.len()];
                for (k, &(i, j)) in pairs.iter().enumerate() {
                    if i == j {
                        let p = profile.get_or_insert_with(|| s.occupation_profile());
                        out[k] = p[i];
                    } else {
                        ordered.push((i.min(j), i.max(j)));
                        slots.push(k);
                    }
                }
                if !ordered.is_empty() {
                    let vals = s.occupation_pair(&ordered);
                    for (slot, v) in slots.into_iter().zip(vals) {
                        out[slot] = v;
                    }
                }
                Ok(out)
            }
        }
    }

    /// Born probability of finding the given outcome bits on the given
    /// sites, without disturbing the state.
    pub fn bits_probability(&self, sites: &[(usize, u8)]) -> Result<f64> {
        self.check_sites(sites)?;
        match self {
            Wavefunction::Dense(s) => {
                let (mask, want) = masks_of(sites);
                let mut p = 0.0;
                for (idx, &config) in s.basis().configs().iter().enumerate() {
                    if config & mask == want {
                        p += s.amps()[idx] * s.amps()[idx];
                    }
                }
                Ok(p)
            }
            Wavefunction::Mps(s) => {
                let length = s.length();
                let mut fixed: Vec<Option<u8>> = vec![None; length];
                for &(site, bit) in sites {
                    fixed[site] = Some(bit);
                }
                // <psi| P |psi> via a transfer sweep that sums only the
                // allowed physical value on measured sites.
                let mut rho = DMatrix::from_element(1, 1, 1.0);
                let mut norm_rho = DMatrix::from_element(1, 1, 1.0);
                for i in 0..length {
                    let t = s.tensor(i);
                    let mut acc = DMatrix::zeros(t.dr, t.dr);
                    let mut norm_acc = DMatrix::zeros(t.dr, t.dr);
                    for phys in 0..2usize {
                        let m = t.phys_matrix(phys);
                        if fixed[i].is_none() || fixed[i] == Some(phys as u8) {
                            acc += m.transpose() * &rho * &m;
                        }
                        norm_acc += m.transpose() * &norm_rho * &m;
                    }
                    rho = acc;
                    norm_rho = norm_acc;
                }
                let n2 = norm_rho[(0, 0)];
                if n2 <= 0.0 {
                    return Err(Error::ZeroProbability("state has zero norm".into()));
                }
                Ok(rho[(0, 0)] / n2)
            }
        }
    }

    /// Project onto fixed outcome bits and renormalize, returning the Born
    /// probability of the projected sector.
    pub fn project_bits(&mut self, sites: &[(usize, u8)]) -> Result<f64> {
        self.check_sites(sites)?;
        match self {
            Wavefunction::Dense(s) => {
                let (mask, want) = masks_of(sites);
                let mut p = 0.0;
                let configs: Vec<BasisConfig> = s.basis().configs().to_vec();
                for (idx, &config) in configs.iter().enumerate() {
                    if config & mask == want {
                        p += s.amps()[idx] * s.amps()[idx];
                    } else {
                        s.amps_mut()[idx] = 0.0;
                    }
                }
                if p < ZERO_PROBABILITY_THRESHOLD {
                    return Err(Error::ZeroProbability(format!(
                        "sector probability {p:.3e} below threshold"
                    )));
                }
                s.normalize()?;
                Ok(p)
            }
            Wavefunction::Mps(s) => {
                for &(site, bit) in sites {
                    // Zero the disallowed physical slice.
                    s.apply_site_diag(
                        site,
                        if bit == 0 { 1.0 } else { 0.0 },
                        if bit == 1 { 1.0 } else { 0.0 },
                    );
                }
                let n = s.norm();
                let p = n * n;
                if p < ZERO_PROBABILITY_THRESHOLD {
                    return Err(Error::ZeroProbability(format!(
                        "sector probability {p:.3e} below threshold"
                    )));
                }
                s.right_canonicalize()?;
                s.normalize()?;
                Ok(p)
            }
        }
    }

    /// Multiply amplitudes by per-site diagonal weights
    /// `w0^{1-n_j} w1^{n_j}` and renormalize. Weights are rescaled per site
    /// before application so that extreme measurement strengths cannot
    /// overflow; the overall normalization is restored at the end.
    pub fn apply_site_weights(&mut self, weights: &[(f64, f64)]) -> Result<()> {
        let length = self.length();
        if weights.len() != length {
            return Err(Error::InvalidInput(format!(
                "{} weight pairs for {length} sites",
                weights.len()
            )));
        }
        for &(w0, w1) in weights {
            if !(w0.is_finite() && w1.is_finite()) || w0 < 0.0 || w1 < 0.0 {
                return Err(Error::InvalidInput(
                    "site weights must be finite and non-negative".into(),
                ));
            }
        }
        // Rescale so the larger weight on each site is 1.
        let scaled: Vec<(f64, f64)> = weights
            .iter()
            .map(|&(w0, w1)| {
                let m = w0.max(w1);
                if m <= 0.0 {
                    (0.0, 0.0)
                } else {
                    (w0 / m, w1 / m)
                }
            })
            .collect();
        // The rescaled norm is an arbitrary scale, not a Born probability;
        // the only genuine failure is annihilation / norm underflow.
        const NORM_UNDERFLOW: f64 = 1e-154;
        match self {
            Wavefunction::Dense(s) => {
                for (idx, &config) in s.basis().configs().to_vec().iter().enumerate() {
                    let mut f = 1.0;
                    for (j, &(w0, w1)) in scaled.iter().enumerate() {
                        f *= if config >> j & 1 == 1 { w1 } else { w0 };
                    }
                    s.amps_mut()[idx] *= f;
                }
                let n2: f64 = s.amps().iter().map(|a| a * a).sum();
                if !(n2.sqrt() > NORM_UNDERFLOW) {
                    return Err(Error::ZeroProbability(
                        "state annihilated by measurement weights (norm underflow)".into(),
                    ));
                }
                s.normalize()?;
                Ok(())
            }
            Wavefunction::Mps(s) => {
                for (j, &(w0, w1)) in scaled.iter().enumerate() {
                    s.apply_site_diag(j, w0, w1);
                }
                if !(s.norm() > NORM_UNDERFLOW) {
                    return Err(Error::ZeroProbability(
                        "state annihilated by measurement weights (norm underflow)".into(),
                    ));
                }
                s.right_canonicalize()?;
                s.normalize()?;
                Ok(())
            }
        }
    }

    /// Von Neumann entanglement entropy (nats) across the bond left of site
    /// `cut`.
    pub fn entropy(&self, cut: usize) -> Result<f64> {
        match self {
            Wavefunction::Mps(s) => s.entropy(cut),
            Wavefunction::Dense(s) => dense_entropy(s, cut),
        }
    }

    /// Overlap `<self|other>`; both states must share backend and geometry.
    pub fn overlap(&self, other: &Wavefunction) -> Result<f64> {
        match (self, other) {
            (Wavefunction::Dense(a), Wavefunction::Dense(b)) => {
                if !Arc::ptr_eq(a.basis(), b.basis())
                    && a.basis().geometry() != b.basis().geometry()
                {
                    return Err(Error::InvalidInput("geometry mismatch in overlap".into()));
                }
                Ok(a.inner(b))
            }
            (Wavefunction::Mps(a), Wavefunction::Mps(b)) => Ok(a.overlap(b)),
            _ => Err(Error::Unsupported(
                "overlap requires both states on the same backend".into(),
            )),
        }
    }

    fn check_sites(&self, sites: &[(usize, u8)]) -> Result<()> {
        let length = self.length();
        for &(site, bit) in sites {
            if site >= length {
                return Err(Error::InvalidInput(format!(
                    "site {site} outside chain of {length} sites"
                )));
            }
            if bit > 1 {
                return Err(Error::InvalidInput(format!("outcome {bit} is not a bit")));
            }
        }
        Ok(())
    }
}

fn masks_of(sites: &[(usize, u8)]) -> (BasisConfig, BasisConfig) {
    let mut mask: BasisConfig = 0;
    let mut want: BasisConfig = 0;
    for &(site, bit) in sites {
        mask |= 1 << site;
        if bit == 1 {
            want |= 1 << site;
        }
    }
    (mask, want)
}

/// Exact bipartite entropy of a dense state: amplitudes are arranged as a
/// matrix over (left-pattern, right-pattern) and its singular values give
/// the Schmidt spectrum. Patterns on each side are restricted to the
/// constraint mode's sub-basis so the matrix stays small.
fn dense_entropy(state: &DenseState, cut: usize) -> Result<f64> {
    let geometry = state.basis().geometry();
    let length = geometry.length;
    if cut == 0 || cut >= length {
        return Err(Error::InvalidInput(format!(
            "cut must split the chain, got {cut} of {length} sites"
        )));
    }
    // Sub-blockade on each half: every pattern occurring in a valid full
    // config is itself a valid open-chain pattern, whatever the full
    // boundary; invalid combinations simply have amplitude zero.
    let left_patterns = half_patterns(geometry.constraint, cut)?;
    let right_patterns = half_patterns(geometry.constraint, length - cut)?;

    let mut left_index = vec![usize::MAX; 1 << cut];
    for (i, &p) in left_patterns.iter().enumerate() {
        left_index[p as usize] = i;
    }
    let mut right_index = vec![usize::MAX; 1 << (length - cut)];
    for (i, &p) in right_patterns.iter().enumerate() {
        right_index[p as usize] = i;
    }

    let low_mask: BasisConfig = (1 << cut) - 1;
    let mut m = DMatrix::zeros(left_patterns.len(), right_patterns.len());
    for (idx, &config) in state.basis().configs().iter().enumerate() {
        let il = left_index[(config & low_mask) as usize];
        let ir = right_index[(config >> cut) as usize];
        m[(il, ir)] = state.amps()[idx];
    }

    let svals = m.svd(false, false).singular_values;
    let total2: f64 = svals.iter().map(|s| s * s).sum();
    if !(total2 > 0.0) {
        return Err(Error::ZeroProbability("state has zero norm".into()));
    }
    Ok(svals
        .iter()
        .map(|s| {
            let p = s * s / total2;
            if p > 0.0 {
                -p * p.ln()
            } else {
                0.0
            }
        })
        .sum())
}

/// All sub-chain patterns of `n_sites` under the given constraint mode.
fn half_patterns(constraint: ConstraintMode, n_sites: usize) -> Result<Vec<BasisConfig>> {
    if n_sites == 1 {
        // Too short for ChainGeometry; the two patterns are trivial.
        return Ok(vec![0, 1]);
    }
    let geometry = ChainGeometry::new(n_sites, Boundary::Open, constraint)?;
    Ok(BlockadedBasis::enumerate(geometry)?.configs().to_vec())
}
