//! Occupation-diagonal observables and their lattice-to-CFT dictionary.
//!
//! Pre-measurement criticality is probed through the staggered bond operator
//! `σ̂_{j+1/2} = (−1)^j (n̂_j − n̂_{j+1})/2` (the lattice spin field) and the
//! uniform bond density `ε̂_{j+1/2} = (n̂_j + n̂_{j+1})/2` (the thermal
//! field). After post-selecting a measurement sector, the analogous
//! operators act on the unmeasured sites only: per unit cell Λ_ℓ of
//! unmeasured sites, `σ̂^n_ℓ = (1/|Λ_ℓ|) Σ_{k∈Λ_ℓ} (−1)^k n̂_k` and
//! `ε̂^n_ℓ = (1/|Λ_ℓ|) Σ_{k∈Λ_ℓ} n̂_k`.
//!
//! For odd-period patterns whose per-cell staggered sum does not cancel
//! (one unmeasured site per cell, say), the single-cell σ̂^n carries a
//! uniform density admixture that would swamp the staggered signal. Λ is
//! then extended across two adjacent cells — the odd period flips the
//! stagger sign between cells, so the uniform and smooth parts cancel and
//! only the genuine order-parameter content survives.
//!
//! Everything here is diagonal in the occupation basis, so expectations and
//! correlators reduce to occupation marginals and joint densities, which
//! both state backends evaluate exactly.

use crate::basis::Boundary;
use crate::error::{Error, Result};
use crate::measure::{classify_sector, OutcomeSector};
use crate::wavefunction::Wavefunction;
use std::collections::BTreeMap;

/// Exact lattice coordinate (reduced rational), used for operator centers
/// and pair separations so that grouping by position never relies on float
/// keys. Centers of site sets are means, hence rational with small
/// denominators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Coordinate {
    num: i64,
    den: i64,
}

impl Coordinate {
    /// Reduced rational `num/den`; `den` must be nonzero.
    pub fn new(num: i64, den: i64) -> Self {
        assert!(den != 0, "coordinate denominator must be nonzero");
        let sign = den.signum();
        let (mut num, mut den) = (num * sign, den * sign);
        let g = gcd(num.unsigned_abs(), den.unsigned_abs()) as i64;
        if g > 1 {
            num /= g;
            den /= g;
        }
        Self { num, den }
    }

    /// Center of mass of a nonempty site list.
    pub fn from_mean(sites: &[usize]) -> Self {
        assert!(!sites.is_empty());
        let sum: i64 = sites.iter().map(|&s| s as i64).sum();
        Self::new(sum, sites.len() as i64)
    }

    pub fn value(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    fn sub(self, other: Self) -> Self {
        Self::new(self.num * other.den - other.num * self.den, self.den * other.den)
    }

    fn abs(self) -> Self {
        Self { num: self.num.abs(), den: self.den }
    }

    /// Shorter of the two arc distances between coordinates on a ring of
    /// circumference `length`.
    fn ring_distance(self, other: Self, length: usize) -> Self {
        let d = self.sub(other).abs();
        let wrapped = Self::new(length as i64, 1).sub(d);
        if wrapped < d {
            wrapped
        } else {
            d
        }
    }
}

impl PartialOrd for Coordinate {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Coordinate {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.num as i128 * other.den as i128).cmp(&(other.num as i128 * self.den as i128))
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.max(1)
}

/// A real linear combination of occupation operators `Σ c_k n̂_k`, tagged
/// with a family label and an exact center position.
#[derive(Debug, Clone)]
pub struct DiagonalObservable {
    terms: Vec<(usize, f64)>,
    label: String,
    center: Coordinate,
}

impl DiagonalObservable {
    /// Build from explicit `(site, coefficient)` terms. Sites must be
    /// distinct and coefficients finite.
    pub fn new(terms: Vec<(usize, f64)>, label: impl Into<String>, center: Coordinate) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::InvalidInput("observable needs at least one term".into()));
        }
        let mut sites: Vec<usize> = terms.iter().map(|&(s, _)| s).collect();
        sites.sort_unstable();
        if sites.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidInput("observable terms repeat a site".into()));
        }
        if terms.iter().any(|&(_, c)| !c.is_finite()) {
            return Err(Error::InvalidInput("observable coefficients must be finite".into()));
        }
        Ok(Self { terms, label: label.into(), center })
    }

    pub fn terms(&self) -> &[(usize, f64)] {
        &self.terms
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn center(&self) -> Coordinate {
        self.center
    }

    /// Sites the observable acts on, ascending.
    pub fn sites(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.terms.iter().map(|&(k, _)| k).collect();
        s.sort_unstable();
        s
    }

    /// Whether the supports share a site.
    pub fn overlaps(&self, other: &Self) -> bool {
        self.terms
            .iter()
            .any(|&(s, _)| other.terms.iter().any(|&(t, _)| s == t))
    }

    /// Evaluate against a precomputed occupation profile.
    fn against_profile(&self, profile: &[f64]) -> Result<f64> {
        let mut total = 0.0;
        for &(site, coeff) in &self.terms {
            let n = profile.get(site).ok_or_else(|| {
                Error::InvalidInput(format!(
                    "observable site {site} outside chain of length {}",
                    profile.len()
                ))
            })?;
            total += coeff * n;
        }
        Ok(total)
    }
}

/// One entry of a correlator or profile series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelatorPoint {
    pub separation: f64,
    pub value: f64,
    pub stderr: Option<f64>,
}

/// A series of values against separations or positions, with the chain
/// metadata needed to interpret them. Separations are strictly increasing;
/// pairs landing on the same separation are averaged.
#[derive(Debug, Clone)]
pub struct CorrelatorSeries {
    pub label: String,
    pub length: usize,
    pub boundary: Boundary,
    pub sector: Option<String>,
    pub points: Vec<CorrelatorPoint>,
}

impl CorrelatorSeries {
    /// Separation and value columns, in series order.
    pub fn columns(&self) -> (Vec<f64>, Vec<f64>) {
        (
            self.points.iter().map(|p| p.separation).collect(),
            self.points.iter().map(|p| p.value).collect(),
        )
    }

    /// CSV rendering: `separation,value,stderr` with a header row; the
    /// stderr column is empty for exactly evaluated series.
    pub fn csv(&self) -> String {
        let mut out = String::from("separation,value,stderr\n");
        for p in &self.points {
            match p.stderr {
                Some(e) => out.push_str(&format!("{:.16e},{:.16e},{:.16e}\n", p.separation, p.value, e)),
                None => out.push_str(&format!("{:.16e},{:.16e},\n", p.separation, p.value)),
            }
        }
        out
    }
}

fn site_pair(state: &Wavefunction, j: usize) -> Result<(usize, usize)> {
    let l = state.length();
    if j >= l {
        return Err(Error::InvalidInput(format!("bond index {j} outside chain of length {l}")));
    }
    let next = match state.geometry().boundary {
        Boundary::Periodic => (j + 1) % l,
        Boundary::Open => {
            if j + 1 >= l {
                return Err(Error::InvalidInput(format!(
                    "bond {j} has no right neighbor on an open chain of length {l}"
                )));
            }
            j + 1
        }
    };
    Ok((j, next))
}

/// Staggered bond occupation `⟨(−1)^j (n̂_j − n̂_{j+1})/2⟩`, the lattice
/// representative of the order-parameter density at bond `j + 1/2`.
pub fn sigma_bond(state: &Wavefunction, j: usize) -> Result<f64> {
    let (a, b) = site_pair(state, j)?;
    let e = state.pair_expectations(&[(a, a), (b, b)])?;
    let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
    Ok(sign * (e[0] - e[1]) / 2.0)
}

/// Uniform bond occupation `⟨(n̂_j + n̂_{j+1})/2⟩`, the lattice
/// representative of the thermal density at bond `j + 1/2`.
pub fn epsilon_bond(state: &Wavefunction, j: usize) -> Result<f64> {
    let (a, b) = site_pair(state, j)?;
    let e = state.pair_expectations(&[(a, a), (b, b)])?;
    Ok((e[0] + e[1]) / 2.0)
}

/// Unit-cell layout for dictionary operators: the unmeasured residues of
/// one pattern period, whether the two-cell extension is in force, and the
/// list of complete cells available on this chain.
struct CellPlan {
    residues: Vec<usize>,
    extend: bool,
    period: usize,
    cells: usize,
}

fn plan_cells(sector: &OutcomeSector) -> Result<CellPlan> {
    let period = sector.period();
    let residues: Vec<usize> = (0..period)
        .filter(|&k| sector.outcome_at(k).is_none())
        .collect();
    if residues.is_empty() {
        return Err(Error::PatternInvalid(
            "every site of the unit cell is measured; no dictionary operator survives".into(),
        ));
    }
    // A net staggered weight within one cell means the single-cell operator
    // would mix in the uniform density; for odd periods pairing adjacent
    // cells cancels it exactly.
    let staggered_sum: i64 = residues.iter().map(|&k| if k % 2 == 0 { 1 } else { -1 }).sum();
    let extend = period % 2 == 1 && staggered_sum != 0;
    let length = sector.geometry().length;
    let cells = length / period;
    Ok(CellPlan { residues, extend, period, cells })
}

/// Sites of cell `c` (plus cell `c+1` when extended), unwrapped: entries can
/// reach past the chain end on rings and are reduced modulo the length at
/// storage time.
fn cell_sites(plan: &CellPlan, c: usize) -> Vec<usize> {
    let mut sites: Vec<usize> = plan.residues.iter().map(|&k| c * plan.period + k).collect();
    if plan.extend {
        sites.extend(plan.residues.iter().map(|&k| (c + 1) * plan.period + k));
    }
    sites
}

fn build_cell_operators(
    sector: &OutcomeSector,
    label: &str,
    staggered: bool,
) -> Result<Vec<DiagonalObservable>> {
    let plan = plan_cells(sector)?;
    let geometry = sector.geometry();
    let length = geometry.length;
    let periodic = geometry.boundary == Boundary::Periodic;
    if plan.extend && staggered && periodic && length % 2 != 0 {
        return Err(Error::InvalidInput(
            "two-cell staggered operators need an even ring for a consistent sublattice sign".into(),
        ));
    }

    let last_cell = if plan.extend && !periodic {
        // The extension borrows the next cell, so the final cell has none.
        plan.cells.saturating_sub(1)
    } else {
        plan.cells
    };
    let weight = 1.0 / (plan.residues.len() * if plan.extend { 2 } else { 1 }) as f64;

    let mut out = Vec::with_capacity(last_cell);
    for c in 0..last_cell {
        let unwrapped = cell_sites(&plan, c);
        let terms: Vec<(usize, f64)> = unwrapped
            .iter()
            .map(|&k| {
                let coeff = if staggered && k % 2 == 1 { -weight } else { weight };
                (k % length, coeff)
            })
            .collect();
        // Center from unwrapped positions, folded back onto the ring.
        let mut center = Coordinate::from_mean(&unwrapped);
        if center >= Coordinate::new(length as i64, 1) {
            center = center.sub(Coordinate::new(length as i64, 1));
        }
        out.push(DiagonalObservable::new(terms, label, center)?);
    }
    if out.is_empty() {
        return Err(Error::InvalidInput(
            "chain too short to host a complete operator cell".into(),
        ));
    }
    Ok(out)
}

/// Post-measurement order-parameter operators, one per unit cell:
/// `σ̂^n_ℓ = (1/|Λ_ℓ|) Σ_{k∈Λ_ℓ} (−1)^k n̂_k` over the unmeasured sites
/// Λ_ℓ, with the two-cell extension described in the module docs when the
/// single cell would retain a uniform admixture.
pub fn build_sigma_n(sector: &OutcomeSector) -> Result<Vec<DiagonalObservable>> {
    build_cell_operators(sector, "sigma_n", true)
}

/// Post-measurement thermal operators `ε̂^n_ℓ = (1/|Λ_ℓ|) Σ_{k∈Λ_ℓ} n̂_k`,
/// using exactly the same Λ_ℓ as [`build_sigma_n`]. Only defined for
/// sectors whose pattern preserves bond reflection; in reflection-broken
/// sectors the uniform occupation mixes with the order parameter and this
/// construction does not isolate the thermal field.
pub fn build_epsilon_n(sector: &OutcomeSector) -> Result<Vec<DiagonalObservable>> {
    if !classify_sector(sector).bond_reflection {
        return Err(Error::Unsupported(
            "thermal dictionary operators need a bond-reflection-symmetric pattern".into(),
        ));
    }
    build_cell_operators(sector, "epsilon_n", false)
}

/// Symmetry-resolved thermal operators for the period-3 double-zero
/// pattern: `ε̂^{n,Z2}_ℓ = (n̂_{ℓ−3} + 2n̂_ℓ + n̂_{ℓ+3})/4` centered on each
/// unmeasured site ℓ — identically the average of the two adjacent ε̂^n.
pub fn build_epsilon_z2(sector: &OutcomeSector) -> Result<Vec<DiagonalObservable>> {
    let ok = sector.period() == 3
        && (0..3).filter(|&k| sector.outcome_at(k).is_none()).count() == 1
        && (0..3).all(|k| matches!(sector.outcome_at(k), None | Some(0)));
    if !ok {
        return Err(Error::Unsupported(
            "the three-site thermal operator is defined only for period-3 patterns measuring two adjacent sites to 0".into(),
        ));
    }
    let r = (0..3).find(|&k| sector.outcome_at(k).is_none()).unwrap();
    let geometry = sector.geometry();
    let length = geometry.length;
    let periodic = geometry.boundary == Boundary::Periodic;

    let mut out = Vec::new();
    let mut ell = r;
    while ell < length {
        let in_range = periodic || (ell >= 3 && ell + 3 < length);
        if in_range {
            let left = (ell + length - 3) % length;
            let right = (ell + 3) % length;
            let terms = vec![(left, 0.25), (ell, 0.5), (right, 0.25)];
            out.push(DiagonalObservable::new(terms, "epsilon_z2", Coordinate::new(ell as i64, 1))?);
        }
        ell += 3;
    }
    if out.is_empty() {
        return Err(Error::InvalidInput(
            "chain too short to host the three-site thermal operator".into(),
        ));
    }
    Ok(out)
}

/// Exact expectation `Σ c_k ⟨n̂_k⟩` from the occupation marginals.
pub fn expectation(state: &Wavefunction, obs: &DiagonalObservable) -> Result<f64> {
    obs.against_profile(&state.occupation_profile())
}

/// Connected correlators `⟨AB⟩ − ⟨A⟩⟨B⟩` for the requested index pairs into
/// `observables`, evaluated exactly through joint occupation expectations.
///
/// Pairs whose supports share a site are silently excluded. Surviving pairs
/// are grouped by center separation (shorter ring arc on periodic chains)
/// and averaged, so the series has strictly increasing separations.
pub fn connected_correlator(
    state: &Wavefunction,
    observables: &[DiagonalObservable],
    pairs: &[(usize, usize)],
) -> Result<CorrelatorSeries> {
    let length = state.length();
    let boundary = state.geometry().boundary;
    for obs in observables {
        obs.against_profile(&vec![0.0; length])?; // bounds check only
    }
    for &(a, b) in pairs {
        if a >= observables.len() || b >= observables.len() {
            return Err(Error::InvalidInput(format!(
                "pair ({a}, {b}) outside the observable list of length {}",
                observables.len()
            )));
        }
    }

    let profile = state.occupation_profile();
    let means: Vec<f64> = observables
        .iter()
        .map(|o| o.against_profile(&profile))
        .collect::<Result<_>>()?;

    // Gather the distinct site pairs needed by all non-overlapping products
    // so each joint density is evaluated once.
    let retained: Vec<(usize, usize)> = pairs
        .iter()
        .copied()
        .filter(|&(a, b)| a != b && !observables[a].overlaps(&observables[b]))
        .collect();
    let mut joint: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for &(a, b) in &retained {
        for &(i, _) in observables[a].terms() {
            for &(j, _) in observables[b].terms() {
                joint.insert((i.min(j), i.max(j)), 0.0);
            }
        }
    }
    let keys: Vec<(usize, usize)> = joint.keys().copied().collect();
    let values = state.pair_expectations(&keys)?;
    for (k, v) in keys.iter().zip(values) {
        joint.insert(*k, v);
    }

    let mut grouped: BTreeMap<Coordinate, (f64, usize)> = BTreeMap::new();
    for &(a, b) in &retained {
        let mut product = 0.0;
        for &(i, ci) in observables[a].terms() {
            for &(j, cj) in observables[b].terms() {
                product += ci * cj * joint[&(i.min(j), i.max(j))];
            }
        }
        let connected = product - means[a] * means[b];
        let separation = match boundary {
            Boundary::Periodic => observables[a].center().ring_distance(observables[b].center(), length),
            Boundary::Open => observables[a].center().sub(observables[b].center()).abs(),
        };
        let entry = grouped.entry(separation).or_insert((0.0, 0));
        entry.0 += connected;
        entry.1 += 1;
    }

    let points = grouped
        .into_iter()
        .map(|(sep, (sum, n))| CorrelatorPoint {
            separation: sep.value(),
            value: sum / n as f64,
            stderr: None,
        })
        .collect();
    Ok(CorrelatorSeries {
        label: observables.first().map(|o| o.label().to_string()).unwrap_or_default(),
        length,
        boundary,
        sector: None,
        points,
    })
}

/// Position-resolved expectation values `⟨obs_ℓ⟩` against center position,
/// for open chains where the boundary makes the profile nontrivial.
/// Periodic chains are refused: translation symmetry flattens the profile,
/// so correlators carry the signal there.
pub fn one_point_profile(
    state: &Wavefunction,
    observables: &[DiagonalObservable],
) -> Result<CorrelatorSeries> {
    if state.geometry().boundary == Boundary::Periodic {
        return Err(Error::InvalidInput(
            "one-point profiles are uniform on rings; use connected correlators instead".into(),
        ));
    }
    if observables.is_empty() {
        return Err(Error::InvalidInput("no observables supplied".into()));
    }
    let profile = state.occupation_profile();
    let mut entries: Vec<(Coordinate, f64)> = observables
        .iter()
        .map(|o| Ok((o.center(), o.against_profile(&profile)?)))
        .collect::<Result<_>>()?;
    entries.sort_by(|a, b| a.0.cmp(&b.0));
    if entries.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(Error::InvalidInput("profile observables share a center position".into()));
    }
    let points = entries
        .into_iter()
        .map(|(c, v)| CorrelatorPoint { separation: c.value(), value: v, stderr: None })
        .collect();
    Ok(CorrelatorSeries {
        label: observables[0].label().to_string(),
        length: state.length(),
        boundary: state.geometry().boundary,
        sector: None,
        points,
    })
}

/// Von Neumann entanglement entropy (natural log) of the reduced state left
/// of bond `cut`.
pub fn half_chain_entropy(state: &Wavefunction, cut: usize) -> Result<f64> {
    state.entropy(cut)
}
