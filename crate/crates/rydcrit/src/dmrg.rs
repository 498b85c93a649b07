//! Two-site DMRG ground-state search over a Hamiltonian MPO.
//!
//! The sweep alternates right and left passes; at every bond the two-site
//! block is minimized with the shared Lanczos engine (warm-started from the
//! current tensors), split by SVD with singular values below
//! `truncation_cutoff * s_max` discarded, and bonds capped at `chi_max`.
//! Bond dimension ramps up over the first sweeps instead of starting at the
//! cap, which costs nothing in accuracy and saves the early sweeps.
//!
//! Convergence is declared when both the energy and the half-chain
//! entanglement entropy move less than their tolerances between consecutive
//! sweeps; running out of sweeps is reported via `converged = false`, not an
//! error, so long-shot runs still return their best state.

use crate::error::{Error, Result};
use crate::linalg;
use crate::mpo::{MatrixProductOperator, MpoTensor};
use crate::mps::{MatrixProductState, SiteTensor};
use crate::solve::{lanczos_lowest, LanczosOptions};

#[derive(Debug, Clone, Copy)]
pub struct DmrgConfig {
    /// Bond dimension cap.
    pub chi_max: usize,
    /// Relative singular-value cutoff at each split.
    pub truncation_cutoff: f64,
    /// Sweep-to-sweep absolute tolerance on the half-chain entropy.
    pub entropy_tol: f64,
    /// Sweep-to-sweep absolute tolerance on the energy.
    pub energy_tol: f64,
    pub max_sweeps: usize,
    /// Residual tolerance of the local two-site eigensolves.
    pub local_tol: f64,
    /// Seed for the random starting state.
    pub seed: u64,
}

impl Default for DmrgConfig {
    fn default() -> Self {
        DmrgConfig {
            chi_max: 128,
            truncation_cutoff: 1e-10,
            entropy_tol: 1e-5,
            energy_tol: 1e-7,
            max_sweeps: 60,
            local_tol: 1e-9,
            seed: 11,
        }
    }
}

#[derive(Debug)]
pub struct DmrgOutcome {
    pub state: MatrixProductState,
    pub energy: f64,
    /// Both stopping tolerances were met within the sweep budget.
    pub converged: bool,
    pub sweeps: usize,
    /// Energy after each full sweep cycle.
    pub energy_history: Vec<f64>,
    /// Half-chain entropy after each full sweep cycle.
    pub entropy_history: Vec<f64>,
    pub max_bond_reached: usize,
    /// Largest relative Schmidt weight dropped by any truncation in the
    /// final sweep — the usual a-posteriori accuracy proxy.
    pub max_discarded_weight: f64,
}

/// Boundary/bulk environment block `E[a, w, b]` (bra bond, MPO bond,
/// ket bond), stored row-major.
struct Env {
    chi: usize,
    w: usize,
    data: Vec<f64>,
}

impl Env {
    fn trivial() -> Self {
        Env {
            chi: 1,
            w: 1,
            data: vec![1.0],
        }
    }
}

/// Grow a left environment by one site.
fn left_env_step(env: &Env, a: &SiteTensor, w: &MpoTensor) -> Env {
    let (dl, dr) = (a.dl, a.dr);
    debug_assert_eq!(env.chi, dl);
    debug_assert_eq!(env.w, w.wl);
    let (wl, wr) = (w.wl, w.wr);
    // M1[(a wl), (t b')] = sum_b E[(a wl), b] A[b, (t b')]
    let m1 = linalg::matmul(dl * wl, dl, 2 * dr, &env.data, &a.data);
    // M2[a, s, wr, b'] = sum_{wl,t} W[wl,wr,s,t] M1[a, wl, t, b']
    let mut m2 = vec![0.0; dl * 2 * wr * dr];
    for (p, q, s, t, val) in w.nonzeros() {
        for ai in 0..dl {
            let src = ((ai * wl + p) * 2 + t) * dr;
            let dst = ((ai * 2 + s) * wr + q) * dr;
            for b in 0..dr {
                m2[dst + b] += val * m1[src + b];
            }
        }
    }
    // E'[a', wr, b'] = sum_{a,s} A[(a s), a'] M2[(a s), (wr b')]
    let data = linalg::matmul_at_b(dr, dl * 2, wr * dr, &a.data, &m2);
    Env {
        chi: dr,
        w: wr,
        data,
    }
}

/// Grow a right environment by one site.
fn right_env_step(env: &Env, a: &SiteTensor, w: &MpoTensor) -> Env {
    let (dl, dr) = (a.dl, a.dr);
    debug_assert_eq!(env.chi, dr);
    debug_assert_eq!(env.w, w.wr);
    let (wl, wr) = (w.wl, w.wr);
    // M1[(a s), (wr b')] = sum_{a'} A[(a s), a'] E[a', (wr b')]
    let m1 = linalg::matmul(dl * 2, dr, wr * dr, &a.data, &env.data);
    // M2[a, wl, t, b'] = sum_{wr,s} W[wl,wr,s,t] M1[a, s, wr, b']
    let mut m2 = vec![0.0; dl * wl * 2 * dr];
    for (p, q, s, t, val) in w.nonzeros() {
        for ai in 0..dl {
            let src = ((ai * 2 + s) * wr + q) * dr;
            let dst = ((ai * wl + p) * 2 + t) * dr;
            for b in 0..dr {
                m2[dst + b] += val * m1[src + b];
            }
        }
    }
    // E'[a, wl, b] = sum_{t,b'} M2[(a wl), (t b')] A[b, (t b')]
    let data = linalg::matmul_a_bt(dl * wl, 2 * dr, dl, &m2, &a.data);
    Env {
        chi: dl,
        w: wl,
        data,
    }
}

/// Apply the two-site effective Hamiltonian to `theta[b, t1, t2, e]`.
#[allow(clippy::too_many_arguments)]
fn heff_apply(
    le: &Env,
    re: &Env,
    w1: &[(usize, usize, usize, usize, f64)],
    w2: &[(usize, usize, usize, usize, f64)],
    dims: (usize, usize, usize, usize), // (dl, wl_mid, wr_mid, er)
    theta: &[f64],
    out: &mut [f64],
) {
    let (dl, wm, wr, er) = dims;
    let wl = le.w;
    // X1[(a wl), (t1 t2 e)]
    let x1 = linalg::matmul(dl * wl, dl, 4 * er, &le.data, theta);
    // X2[a, s1, wm, (t2 e)]
    let mut x2 = vec![0.0; dl * 2 * wm * 2 * er];
    for &(p, q, s1, t1, val) in w1 {
        for a in 0..dl {
            let src = (a * wl + p) * 4 * er + t1 * 2 * er;
            let dst = ((a * 2 + s1) * wm + q) * 2 * er;
            for x in 0..2 * er {
                x2[dst + x] += val * x1[src + x];
            }
        }
    }
    // X3[(a s1), s2, wr, e]
    let mut x3 = vec![0.0; dl * 4 * wr * er];
    for &(p, q, s2, t2, val) in w2 {
        for as1 in 0..dl * 2 {
            let src = (as1 * wm + p) * 2 * er + t2 * er;
            let dst = ((as1 * 2 + s2) * wr + q) * er;
            for x in 0..er {
                x3[dst + x] += val * x2[src + x];
            }
        }
    }
    // out[(a s1 s2), c] = sum_{wr,e} X3[(a s1 s2), (wr e)] RE[c, (wr e)]
    let res = linalg::matmul_a_bt(dl * 4, wr * er, re.chi, &x3, &re.data);
    out.copy_from_slice(&res);
}

/// Contract two adjacent site tensors into the two-site block.
fn merge_theta(a: &SiteTensor, b: &SiteTensor) -> Vec<f64> {
    // theta[(al t1), (t2 br)] = sum_m A[(al t1), m] B[m, (t2 br)]
    linalg::matmul(a.dl * 2, a.dr, 2 * b.dr, &a.data, &b.data)
}

struct SplitOutcome {
    left: SiteTensor,
    right: SiteTensor,
    schmidt: Vec<f64>,
    discarded: f64,
}

/// SVD-split a (normalized) two-site block, truncating by `cutoff` relative
/// to the largest singular value and capping at `chi_max`. Either the left
/// or the right factor absorbs the singular values, per `absorb_right`.
fn split_theta(
    theta: &[f64],
    dl: usize,
    er: usize,
    chi_max: usize,
    cutoff: f64,
    absorb_right: bool,
) -> SplitOutcome {
    let m = linalg::to_dmatrix(dl * 2, 2 * er, theta);
    let svd = m.svd(true, true);
    let u = svd.u.as_ref().expect("svd u");
    let vt = svd.v_t.as_ref().expect("svd v_t");
    let svals = &svd.singular_values;
    let smax = svals.iter().cloned().fold(0.0f64, f64::max);
    let mut keep = 0;
    for (r, &s) in svals.iter().enumerate() {
        if r < chi_max && (keep == 0 || s >= cutoff * smax) {
            keep = r + 1;
        }
    }
    let total2: f64 = svals.iter().map(|s| s * s).sum();
    let kept2: f64 = svals.iter().take(keep).map(|s| s * s).sum();
    let discarded = (total2 - kept2) / total2.max(1e-300);
    let renorm = kept2.sqrt();

    let mut schmidt: Vec<f64> = svals.iter().take(keep).map(|s| s / renorm).collect();
    if schmidt.is_empty() {
        schmidt.push(1.0);
    }

    let mut left = SiteTensor::zeros(dl, keep);
    let mut right = SiteTensor::zeros(keep, er);
    for row in 0..dl * 2 {
        for r in 0..keep {
            let factor = if absorb_right { 1.0 } else { svals[r] / renorm };
            left.data[row * keep + r] = u[(row, r)] * factor;
        }
    }
    for r in 0..keep {
        for col in 0..2 * er {
            let factor = if absorb_right { svals[r] / renorm } else { 1.0 };
            right.data[r * 2 * er + col] = vt[(r, col)] * factor;
        }
    }
    SplitOutcome {
        left,
        right,
        schmidt,
        discarded,
    }
}

fn entropy_of(schmidt: &[f64]) -> f64 {
    schmidt
        .iter()
        .map(|&s| {
            let p = s * s;
            if p > 0.0 {
                -p * p.ln()
            } else {
                0.0
            }
        })
        .sum()
}

/// Run two-site DMRG on `mpo` from a seeded random start.
pub fn dmrg_ground_state(mpo: &MatrixProductOperator, cfg: &DmrgConfig) -> Result<DmrgOutcome> {
    let length = mpo.length();
    if length < 2 {
        return Err(Error::InvalidInput("DMRG needs at least two sites".into()));
    }
    if cfg.chi_max == 0 {
        return Err(Error::InvalidInput("chi_max must be positive".into()));
    }

    let mut psi = MatrixProductState::random(mpo.geometry(), 8usize.min(cfg.chi_max), cfg.seed)?;
    // Right-canonical start so the first right sweep sees isometries ahead.
    psi.right_canonicalize()?;
    psi.normalize()?;

    let w_nonzeros: Vec<Vec<(usize, usize, usize, usize, f64)>> =
        mpo.tensors().iter().map(|t| t.nonzeros()).collect();

    // le[i] contracts sites < i, re[i] contracts sites >= i.
    let mut le: Vec<Env> = (0..=length).map(|_| Env::trivial()).collect();
    let mut re: Vec<Env> = (0..=length).map(|_| Env::trivial()).collect();
    for i in (1..length).rev() {
        re[i] = right_env_step(&re[i + 1], psi.tensor(i), mpo.tensor(i));
    }

    let half_cut = length / 2;
    let mut energy_history: Vec<f64> = Vec::new();
    let mut entropy_history: Vec<f64> = Vec::new();
    let mut max_bond_reached = 1;
    let mut converged = false;
    let mut sweeps = 0;
    let mut sweep_discarded = 0.0f64;

    let local_opts = |tol: f64| LanczosOptions {
        tol,
        block: 24,
        max_restarts: 80,
        seed: cfg.seed,
    };

    for sweep in 0..cfg.max_sweeps {
        // Ramp the bond cap: 32, 64, ... up to chi_max.
        let chi_now = cfg.chi_max.min(32usize << sweep.min(20)).max(1);
        // Early sweeps get a looser local tolerance.
        let tol_now = if sweep < 2 {
            cfg.local_tol.max(1e-7)
        } else {
            cfg.local_tol
        };
        let mut last_energy = f64::NAN;
        let mut half_entropy = f64::NAN;
        sweep_discarded = 0.0;

        // Right pass over bonds (i, i+1).
        for i in 0..length - 1 {
            let (energy, split) = optimize_bond(
                &le[i],
                &re[i + 2],
                &w_nonzeros[i],
                &w_nonzeros[i + 1],
                (mpo.tensor(i).wr, mpo.tensor(i + 1).wr),
                psi.tensor(i),
                psi.tensor(i + 1),
                chi_now,
                cfg.truncation_cutoff,
                true,
                &local_opts(tol_now),
            )?;
            last_energy = energy;
            max_bond_reached = max_bond_reached.max(split.left.dr);
            sweep_discarded = sweep_discarded.max(split.discarded);
            if i + 1 == half_cut {
                half_entropy = entropy_of(&split.schmidt);
            }
            psi.set_tensor(i, split.left);
            psi.set_tensor(i + 1, split.right);
            le[i + 1] = left_env_step(&le[i], psi.tensor(i), mpo.tensor(i));
        }

        // Left pass.
        for i in (0..length - 1).rev() {
            let (energy, split) = optimize_bond(
                &le[i],
                &re[i + 2],
                &w_nonzeros[i],
                &w_nonzeros[i + 1],
                (mpo.tensor(i).wr, mpo.tensor(i + 1).wr),
                psi.tensor(i),
                psi.tensor(i + 1),
                chi_now,
                cfg.truncation_cutoff,
                false,
                &local_opts(tol_now),
            )?;
            last_energy = energy;
            max_bond_reached = max_bond_reached.max(split.left.dr);
            sweep_discarded = sweep_discarded.max(split.discarded);
            if i + 1 == half_cut {
                half_entropy = entropy_of(&split.schmidt);
            }
            psi.set_tensor(i, split.left);
            psi.set_tensor(i + 1, split.right);
            re[i + 1] = right_env_step(&re[i + 2], psi.tensor(i + 1), mpo.tensor(i + 1));
        }
        // The left pass leaves stale left environments behind it.
        le[1] = left_env_step(&le[0], psi.tensor(0), mpo.tensor(0));

        sweeps = sweep + 1;
        energy_history.push(last_energy);
        entropy_history.push(half_entropy);

        if sweep >= 1 && chi_now == cfg.chi_max.min(32usize << (sweep - 1).min(20)).max(1) {
            // Cap was already active last sweep: deltas are meaningful.
            let de = (energy_history[sweep] - energy_history[sweep - 1]).abs();
            let ds = (entropy_history[sweep] - entropy_history[sweep - 1]).abs();
            if de < cfg.energy_tol && ds < cfg.entropy_tol {
                converged = true;
                break;
            }
        }
    }

    let energy = *energy_history.last().expect("at least one sweep ran");
    Ok(DmrgOutcome {
        state: psi,
        energy,
        converged,
        sweeps,
        energy_history,
        entropy_history,
        max_bond_reached,
        max_discarded_weight: sweep_discarded,
    })
}

#[allow(clippy::too_many_arguments)]
fn optimize_bond(
    le: &Env,
    re: &Env,
    w1: &[(usize, usize, usize, usize, f64)],
    w2: &[(usize, usize, usize, usize, f64)],
    dims_w: (usize, usize), // (middle, right) MPO bond dims
    a: &SiteTensor,
    b: &SiteTensor,
    chi_max: usize,
    cutoff: f64,
    absorb_right: bool,
    opts: &LanczosOptions,
) -> Result<(f64, SplitOutcome)> {
    let (dl, er) = (a.dl, b.dr);
    let (wm, wr) = dims_w;
    let mut theta = merge_theta(a, b);
    let n = linalg::norm(&theta);
    if n > 1e-154 {
        linalg::scale(&mut theta, 1.0 / n);
    }
    let dim = theta.len();
    let outcome = lanczos_lowest(
        dim,
        |x, y| heff_apply(le, re, w1, w2, (dl, wm, wr, er), x, y),
        Some(theta),
        opts,
    )?;
    let split = split_theta(&outcome.vector, dl, er, chi_max, cutoff, absorb_right);
    Ok((outcome.eigenvalue, split))
}
