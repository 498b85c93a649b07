//! Scaling-dimension extraction and critical-point location.
//!
//! Correlators and profiles carry the critical exponents in their decay:
//! two-point connected correlators fall off as `d^{−2Δ}` (with `d` the
//! chord distance on rings), open-chain one-point profiles follow
//! `[sin x_ℓ]^{−Δ}` with `x_ℓ = π(ℓ + 1/2)/(L + 2)`, and for sectors with
//! a finite bulk order parameter the spatial derivative of the profile
//! obeys `|d⟨σ̂⟩/dx| ~ x^{ν}` with `Δ = −ν − 1`. All fits are unweighted
//! least squares in log-log space over a stated window fraction.
//!
//! Critical couplings are located by curve crossings: rescaled mid-chain
//! observables for different sizes intersect at the scale-invariant point,
//! found here by piecewise-linear interpolation on a parameter grid.

use crate::basis::{BlockadedBasis, Boundary, ChainGeometry, ConstraintMode};
use crate::error::{Error, Result};
use crate::hamiltonian::{build_hamiltonian, HamiltonianParams};
use crate::measure::generalized_measure;
use crate::observables::{sigma_bond, CorrelatorPoint, CorrelatorSeries};
use crate::solve::{auto_ground_state, LanczosOptions};
use crate::wavefunction::Wavefunction;
use serde::Serialize;
use std::f64::consts::PI;
use std::sync::Arc;

/// Longest-range window used throughout unless stated otherwise.
pub const DEFAULT_WINDOW: f64 = 0.8;
/// Window for bond-dimension convergence checks of correlator fits.
pub const CONVERGENCE_WINDOW: f64 = 0.9;
/// Window for the tricritical thermal-perturbation open-chain profiles,
/// where finite-size effects push the power law to larger distances.
pub const TCI_EPSILON_WINDOW: f64 = 2.0 / 3.0;

/// Outcome of a log-log regression, reported as a scaling dimension under
/// the stated convention.
#[derive(Debug, Clone, Serialize)]
pub struct FitResult {
    /// The scaling dimension Δ (or decay constant, per `convention`).
    pub exponent: f64,
    /// Linear-regression standard error of the exponent.
    pub stderr: f64,
    /// Fraction of points retained in the fit window.
    pub window: f64,
    /// Points actually fitted.
    pub n_points: usize,
    /// Root-mean-square log-space residual.
    pub rms_residual: f64,
    /// Largest absolute log-space residual.
    pub max_residual: f64,
    /// How `exponent` relates to the fitted slope.
    pub convention: &'static str,
}

/// A scale-invariant point located from intersecting finite-size curves.
#[derive(Debug, Clone, Serialize)]
pub struct CrossingResult {
    /// Crossing abscissa of the largest consecutive-size pair.
    pub abscissa: f64,
    /// The pair of sizes providing `abscissa`.
    pub sizes: (usize, usize),
    /// Largest deviation of any other consecutive pair's crossing, as a
    /// systematic-error estimate.
    pub spread: f64,
    /// Every consecutive-size crossing: (smaller L, larger L, abscissa).
    pub pair_crossings: Vec<(usize, usize, f64)>,
}

/// One observable scanned over a parameter grid for several chain sizes.
#[derive(Debug, Clone)]
pub struct CurveFamily {
    pub sizes: Vec<usize>,
    pub grid: Vec<f64>,
    /// `curves[i][k]` is the value for `sizes[i]` at `grid[k]`.
    pub curves: Vec<Vec<f64>>,
    pub label: String,
}

impl CurveFamily {
    /// CSV matrix: first column the grid, one column per size.
    pub fn csv(&self) -> String {
        let mut out = String::from("grid");
        for l in &self.sizes {
            out.push_str(&format!(",L{l}"));
        }
        out.push('\n');
        for (k, g) in self.grid.iter().enumerate() {
            out.push_str(&format!("{g:.16e}"));
            for curve in &self.curves {
                out.push_str(&format!(",{:.16e}", curve[k]));
            }
            out.push('\n');
        }
        out
    }
}

/// Chord distance on a ring of circumference `length`: the separation
/// `|l1 − l2|` is reduced to at most half the ring, then mapped through
/// `(L/π)·sin(π d/L)` — the conformal image of a line distance on the
/// circle. Separations `d` and `L − d` land on the same chord.
pub fn chord_distance(l1: f64, l2: f64, length: usize) -> f64 {
    let l = length as f64;
    let mut d = (l1 - l2).abs() % l;
    if d > l / 2.0 {
        d = l - d;
    }
    (l / PI) * (PI * d / l).sin()
}

struct Line {
    slope: f64,
    slope_stderr: f64,
    intercept: f64,
    rms_residual: f64,
    max_residual: f64,
}

fn least_squares(points: &[(f64, f64)]) -> Result<Line> {
    let n = points.len();
    if n < 2 {
        return Err(Error::FitFailure("regression needs at least two points".into()));
    }
    let nf = n as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::FitFailure("regression abscissas are all equal".into()));
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let residuals: Vec<f64> = points.iter().map(|p| p.1 - (intercept + slope * p.0)).collect();
    let ss_res: f64 = residuals.iter().map(|r| r * r).sum();
    let slope_stderr = if n > 2 { (ss_res / (nf - 2.0) / sxx).sqrt() } else { 0.0 };
    Ok(Line {
        slope,
        slope_stderr,
        intercept,
        rms_residual: (ss_res / nf).sqrt(),
        max_residual: residuals.iter().fold(0.0, |m, r| m.max(r.abs())),
    })
}

fn check_window(window: f64) -> Result<()> {
    if !(window > 0.0 && window <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "fit window must lie in (0, 1], got {window}"
        )));
    }
    Ok(())
}

/// Keep the `window` fraction of points with the largest key, preserving
/// order; at least 4 must survive.
fn windowed<T: Clone>(points: &[T], window: f64, key: impl Fn(&T) -> f64) -> Result<Vec<T>> {
    check_window(window)?;
    let keep = ((window * points.len() as f64).ceil() as usize).min(points.len());
    if keep < 4 {
        return Err(Error::FitFailure(format!(
            "fit window keeps {keep} of {} points; at least 4 are required",
            points.len()
        )));
    }
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| key(&points[a]).total_cmp(&key(&points[b])));
    let mut kept: Vec<usize> = order[points.len() - keep..].to_vec();
    kept.sort_unstable();
    Ok(kept.into_iter().map(|i| points[i].clone()).collect())
}

/// Require one common sign over the values; returns that sign.
fn uniform_sign(values: impl Iterator<Item = f64>, what: &str, hint: &str) -> Result<f64> {
    let mut sign = 0.0f64;
    for v in values {
        if v == 0.0 || !v.is_finite() {
            return Err(Error::FitFailure(format!("{what} contains zero or non-finite values")));
        }
        if sign == 0.0 {
            sign = v.signum();
        } else if v.signum() != sign {
            return Err(Error::FitFailure(format!("{what} changes sign inside the fit window{hint}")));
        }
    }
    Ok(sign)
}

/// Power-law fit of a connected-correlator series: unweighted least squares
/// of `log|value|` against `log(separation)` over the longest-range
/// `window` fraction, reporting `Δ = −slope/2` (two-point convention
/// `⟨AB⟩_c ~ d^{−2Δ}`). Periodic series are mapped to chord distance first.
pub fn fit_power_law(series: &CorrelatorSeries, window: f64) -> Result<FitResult> {
    let mut points: Vec<(f64, f64)> = series
        .points
        .iter()
        .map(|p| (p.separation, p.value))
        .collect();
    if series.boundary == Boundary::Periodic {
        for p in &mut points {
            p.0 = chord_distance(p.0, 0.0, series.length);
        }
    }
    let kept = windowed(&points, window, |p| p.0)?;
    if kept.iter().any(|p| p.0 <= 0.0) {
        return Err(Error::FitFailure("separations must be positive for a log-log fit".into()));
    }
    uniform_sign(
        kept.iter().map(|p| p.1),
        "correlator",
        "; a staggered component is present — apply two_cell_average first",
    )?;
    let logs: Vec<(f64, f64)> = kept.iter().map(|p| (p.0.ln(), p.1.abs().ln())).collect();
    let line = least_squares(&logs)?;
    Ok(FitResult {
        exponent: -line.slope / 2.0,
        stderr: line.slope_stderr / 2.0,
        window,
        n_points: logs.len(),
        rms_residual: line.rms_residual,
        max_residual: line.max_residual,
        convention: "two-point: value ~ separation^(-2*Delta)",
    })
}

fn boundary_coordinate(position: f64, length: usize) -> f64 {
    PI * (position + 0.5) / (length as f64 + 2.0)
}

/// One-point profile fit for open chains: `log|⟨σ̂_ℓ⟩|` against
/// `log sin(x_ℓ)` with `x_ℓ = π(ℓ+1/2)/(L+2)`, over the `window` fraction
/// of points furthest from the boundaries; `Δ = −slope`.
pub fn fit_obc_sine(profile: &CorrelatorSeries, window: f64) -> Result<FitResult> {
    if profile.boundary != Boundary::Open {
        return Err(Error::InvalidInput("the boundary profile fit needs an open chain".into()));
    }
    let points: Vec<(f64, f64)> = profile
        .points
        .iter()
        .map(|p| (boundary_coordinate(p.separation, profile.length), p.value))
        .collect();
    // Distance from the nearer chain end orders the window.
    let kept = windowed(&points, window, |p| p.0.min(PI - p.0))?;
    uniform_sign(kept.iter().map(|p| p.1), "profile", "")?;
    let logs: Vec<(f64, f64)> = kept
        .iter()
        .map(|p| (p.0.sin().ln(), p.1.abs().ln()))
        .collect();
    let line = least_squares(&logs)?;
    Ok(FitResult {
        exponent: -line.slope,
        stderr: line.slope_stderr,
        window,
        n_points: logs.len(),
        rms_residual: line.rms_residual,
        max_residual: line.max_residual,
        convention: "one-point: value ~ sin(x)^(-Delta)",
    })
}

/// Derivative fit for sectors with a finite bulk order parameter: the
/// constant bulk piece drops out of `d⟨σ̂_ℓ⟩/dx`, whose magnitude scales as
/// `x^{ν}` near the boundary with `Δ = −ν − 1`.
///
/// The profile is differentiated by three-point central differences on the
/// (generally nonuniform) `x_ℓ` grid. Only the left half `x < π/2` enters:
/// reflection-symmetric profiles have antisymmetric derivatives, so the
/// right half repeats the same information mirrored. The fit keeps the
/// `window` fraction furthest from the boundary.
pub fn fit_obc_derivative(profile: &CorrelatorSeries, window: f64) -> Result<FitResult> {
    if profile.boundary != Boundary::Open {
        return Err(Error::InvalidInput("the derivative fit needs an open chain".into()));
    }
    let mut points: Vec<(f64, f64)> = profile
        .points
        .iter()
        .map(|p| (boundary_coordinate(p.separation, profile.length), p.value))
        .collect();
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    if points.len() < 3 {
        return Err(Error::FitFailure("derivative fit needs at least three profile points".into()));
    }
    let mut derivs: Vec<(f64, f64)> = Vec::with_capacity(points.len() - 2);
    for i in 1..points.len() - 1 {
        let (x0, y0) = points[i - 1];
        let (x1, y1) = points[i];
        let (x2, y2) = points[i + 1];
        let (hl, hr) = (x1 - x0, x2 - x1);
        // Three-point derivative, exact through quadratics on uneven grids.
        let d = -hr / (hl * (hl + hr)) * y0 + (hr - hl) / (hl * hr) * y1
            + hl / (hr * (hl + hr)) * y2;
        if x1 < PI / 2.0 {
            derivs.push((x1, d));
        }
    }
    let kept = windowed(&derivs, window, |p| p.0)?;
    uniform_sign(kept.iter().map(|p| p.1), "profile derivative", "")?;
    let logs: Vec<(f64, f64)> = kept.iter().map(|p| (p.0.ln(), p.1.abs().ln())).collect();
    let line = least_squares(&logs)?;
    Ok(FitResult {
        exponent: -line.slope - 1.0,
        stderr: line.slope_stderr,
        window,
        n_points: logs.len(),
        rms_residual: line.rms_residual,
        max_residual: line.max_residual,
        convention: "derivative: |d value/dx| ~ x^nu, Delta = -nu - 1",
    })
}

/// Average adjacent point pairs (values and separations alike), halving the
/// series length. Cancels a two-cell staggered component exactly, which is
/// what lets sign-alternating correlators be fitted at all.
pub fn two_cell_average(series: &CorrelatorSeries) -> Result<CorrelatorSeries> {
    if series.points.len() < 2 {
        return Err(Error::InvalidInput("cell averaging needs at least two points".into()));
    }
    let points = series
        .points
        .chunks_exact(2)
        .map(|w| CorrelatorPoint {
            separation: 0.5 * (w[0].separation + w[1].separation),
            value: 0.5 * (w[0].value + w[1].value),
            stderr: match (w[0].stderr, w[1].stderr) {
                (Some(a), Some(b)) => Some(0.5 * (a * a + b * b).sqrt()),
                _ => None,
            },
        })
        .collect();
    Ok(CorrelatorSeries {
        label: series.label.clone(),
        length: series.length,
        boundary: series.boundary,
        sector: series.sector.clone(),
        points,
    })
}

fn scan_context(err: Error, length: usize, at: &str) -> Error {
    match err {
        Error::SolverNoConvergence(m) => {
            Error::SolverNoConvergence(format!("scan point (L={length}, {at}): {m}"))
        }
        other => other,
    }
}

/// Rescaled mid-chain order parameter across a detuning grid, for locating
/// the critical point by curve crossing: for each odd open length `L` and
/// each `Δ` on `grid`, solve the blockaded ground state and record
/// `y = ⟨σ̂_{(L−1)/2}⟩ · sin(π/(L+2))^{−1/8}`. Odd lengths single out one
/// density-wave registration, so the mid-chain bond operator is finite.
pub fn scan_detuning(
    sizes: &[usize],
    grid: &[f64],
    template: &HamiltonianParams,
) -> Result<CurveFamily> {
    if sizes.len() < 2 {
        return Err(Error::InvalidInput("a crossing scan needs at least two sizes".into()));
    }
    if grid.len() < 2 {
        return Err(Error::InvalidInput("a crossing scan needs at least two grid points".into()));
    }
    let mut curves = Vec::with_capacity(sizes.len());
    for &length in sizes {
        if length % 2 == 0 || length < 3 {
            return Err(Error::InvalidInput(format!(
                "detuning scans use odd open chains of length >= 3, got {length}"
            )));
        }
        let geometry = ChainGeometry::new(length, Boundary::Open, ConstraintMode::HardBlockade)?;
        let basis = Arc::new(BlockadedBasis::enumerate(geometry)?);
        let rescale = (PI / (length as f64 + 2.0)).sin().powf(-0.125);
        let mut curve = Vec::with_capacity(grid.len());
        for &delta in grid {
            let params = template.clone().with_delta(delta);
            let h = build_hamiltonian(&basis, &params)
                .map_err(|e| scan_context(e, length, &format!("delta={delta}")))?;
            let (state, _) = auto_ground_state(&h, &basis, &LanczosOptions::default())
                .map_err(|e| scan_context(e, length, &format!("delta={delta}")))?;
            let wf = Wavefunction::Dense(state);
            let mid = sigma_bond(&wf, (length - 1) / 2)?;
            curve.push(mid * rescale);
        }
        curves.push(curve);
    }
    Ok(CurveFamily {
        sizes: sizes.to_vec(),
        grid: grid.to_vec(),
        curves,
        label: "rescaled mid-chain sigma".into(),
    })
}

fn pair_crossing(grid: &[f64], a: &[f64], b: &[f64]) -> Result<f64> {
    let mut found: Vec<f64> = Vec::new();
    for k in 0..grid.len() - 1 {
        let d0 = a[k] - b[k];
        let d1 = a[k + 1] - b[k + 1];
        if d0 == 0.0 {
            found.push(grid[k]);
        } else if d0 * d1 < 0.0 {
            let t = d0 / (d0 - d1);
            found.push(grid[k] + t * (grid[k + 1] - grid[k]));
        }
    }
    if a.last().unwrap() - b.last().unwrap() == 0.0 {
        found.push(*grid.last().unwrap());
    }
    found.dedup_by(|x, y| (*x - *y).abs() < 1e-12);
    match found.len() {
        0 => Err(Error::FitFailure("curves do not cross within the scanned grid".into())),
        1 => Ok(found[0]),
        _ => Err(Error::FitFailure(format!(
            "curves cross more than once within the grid, at {found:?}"
        ))),
    }
}

/// Locate the scale-invariant point from a family of finite-size curves:
/// each consecutive-size pair is intersected by piecewise-linear
/// interpolation; the largest pair's crossing is reported, with the spread
/// of the remaining pairs as a systematic-error estimate.
pub fn find_curve_crossing(family: &CurveFamily) -> Result<CrossingResult> {
    let n = family.sizes.len();
    if n < 2 {
        return Err(Error::InvalidInput("crossing needs at least two curves".into()));
    }
    let mut pair_crossings = Vec::with_capacity(n - 1);
    for i in 0..n - 1 {
        let x = pair_crossing(&family.grid, &family.curves[i], &family.curves[i + 1]).map_err(
            |e| match e {
                Error::FitFailure(m) => Error::FitFailure(format!(
                    "sizes ({}, {}): {m}",
                    family.sizes[i],
                    family.sizes[i + 1]
                )),
                other => other,
            },
        )?;
        pair_crossings.push((family.sizes[i], family.sizes[i + 1], x));
    }
    let &(la, lb, abscissa) = pair_crossings.last().unwrap();
    let spread = pair_crossings
        .iter()
        .map(|&(_, _, x)| (x - abscissa).abs())
        .fold(0.0, f64::max);
    Ok(CrossingResult {
        abscissa,
        sizes: (la, lb),
        spread,
        pair_crossings,
    })
}

/// Selective-weak-measurement sweep: for each prepared periodic ground
/// state and each `θ` on the grid, apply the generalized measurement at
/// strength `beta` and record the bond order parameter `⟨σ̂_{1/2}⟩`
/// (position-independent on rings). Returns the curve family together with
/// its crossing, whose abscissa is the scale-invariant θ_c(β).
pub fn sweep_theta(
    states: &[Wavefunction],
    beta: f64,
    grid: &[f64],
) -> Result<(CurveFamily, CrossingResult)> {
    if states.len() < 2 {
        return Err(Error::InvalidInput("a theta sweep needs at least two sizes".into()));
    }
    let mut sizes = Vec::with_capacity(states.len());
    let mut curves = Vec::with_capacity(states.len());
    for state in states {
        let geometry = state.geometry();
        if geometry.boundary != Boundary::Periodic || geometry.length % 2 != 0 {
            return Err(Error::InvalidInput(
                "theta sweeps need even-length periodic states".into(),
            ));
        }
        if let Some(&prev) = sizes.last() {
            if geometry.length <= prev {
                return Err(Error::InvalidInput(
                    "theta sweep states must come in strictly increasing size".into(),
                ));
            }
        }
        sizes.push(geometry.length);
        let mut curve = Vec::with_capacity(grid.len());
        for &theta in grid {
            let measured = generalized_measure(state, beta, theta)?;
            curve.push(sigma_bond(&measured, 0)?);
        }
        curves.push(curve);
    }
    let family = CurveFamily {
        sizes,
        grid: grid.to_vec(),
        curves,
        label: format!("sigma bond after selective measurement, beta={beta}"),
    };
    let crossing = find_curve_crossing(&family)?;
    Ok((family, crossing))
}

/// Exponential decay fit of sector probabilities against size, plus the
/// extrapolation it implies.
#[derive(Debug, Clone)]
pub struct DecayFit {
    pub fit: FitResult,
    log_amplitude: f64,
}

impl DecayFit {
    /// Extrapolated probability at length `l` under `P ~ A exp(−c l)`.
    pub fn predict(&self, l: f64) -> f64 {
        (self.log_amplitude - self.fit.exponent * l).exp()
    }
}

/// Fit `log P` against `L` for a post-selection sector sampled at several
/// sizes; the positive `exponent` is the decay constant (measured-site
/// density over the sector correlation length).
pub fn fit_probability_decay(points: &[(usize, f64)]) -> Result<DecayFit> {
    if points.len() < 4 {
        return Err(Error::FitFailure(format!(
            "decay fit needs at least 4 sizes, got {}",
            points.len()
        )));
    }
    if let Some(&(l, p)) = points.iter().find(|&&(_, p)| !(p > 0.0)) {
        return Err(Error::FitFailure(format!(
            "sector probability must be positive to fit a decay; P({l}) = {p}"
        )));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(l, p)| (l as f64, p.ln())).collect();
    let line = least_squares(&logs)?;
    Ok(DecayFit {
        fit: FitResult {
            exponent: -line.slope,
            stderr: line.slope_stderr,
            window: 1.0,
            n_points: logs.len(),
            rms_residual: line.rms_residual,
            max_residual: line.max_residual,
            convention: "exponential: P ~ exp(-c*L)",
        },
        log_amplitude: line.intercept,
    })
}
