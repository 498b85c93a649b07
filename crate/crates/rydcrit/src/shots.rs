//! Born-rule shot sampling and restricted (post-selected) estimation.
//!
//! This reproduces the experimental protocol end to end: projectively read
//! out every site of the prepared state, keep only the shots whose measured
//! sites match the wanted outcome pattern, and build observables and
//! connected correlators from the surviving bitstrings. The retention
//! fraction itself estimates the sector probability.
//!
//! Sampling draws each site from its exact conditional distribution given
//! the sites already fixed, for both backends: matrix product states by a
//! left-to-right canonical-form walk, dense states by refining a
//! prefix-contiguous range over the basis (the basis is pre-ordered with
//! site 0 as the most significant bit, so fixing sites left to right always
//! narrows to a contiguous block and no global cumulative table over
//! configurations is ever inverted). Every shot consumes its own
//! counter-indexed RNG stream, so shot `i` is reproducible from `(seed, i)`
//! alone no matter how sampling is scheduled.

use crate::basis::{BasisConfig, Boundary, ChainGeometry, ConstraintMode};
use crate::error::{Error, Result};
use crate::mps::MpsSampler;
use crate::observables::{CorrelatorPoint, CorrelatorSeries, DiagonalObservable};
use crate::wavefunction::Wavefunction;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

/// Default floor on retained shots for connected-correlator estimation.
pub const DEFAULT_SHOT_FLOOR: usize = 100;

/// A batch of full-chain projective measurement outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct ShotSet {
    geometry: ChainGeometry,
    shots: Vec<BasisConfig>,
    seed: u64,
    source: String,
    sector: Option<String>,
}

impl ShotSet {
    /// Assemble a shot set, enforcing that each outcome fits the chain and,
    /// under a hard blockade, never excites adjacent sites.
    pub fn new(
        geometry: ChainGeometry,
        shots: Vec<BasisConfig>,
        seed: u64,
        source: impl Into<String>,
    ) -> Result<Self> {
        let length = geometry.length;
        for (i, &config) in shots.iter().enumerate() {
            if length < 64 && config >> length != 0 {
                return Err(Error::InvalidInput(format!(
                    "shot {i} sets bits beyond chain length {length}"
                )));
            }
            if geometry.constraint == ConstraintMode::HardBlockade && !blockade_ok(config, geometry)
            {
                return Err(Error::InvalidInput(format!(
                    "shot {i} violates the blockade constraint"
                )));
            }
        }
        Ok(Self {
            geometry,
            shots,
            seed,
            source: source.into(),
            sector: None,
        })
    }

    pub fn geometry(&self) -> ChainGeometry {
        self.geometry
    }

    pub fn len(&self) -> usize {
        self.shots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shots.is_empty()
    }

    pub fn shots(&self) -> &[BasisConfig] {
        &self.shots
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Identifier of the sampled state (content hash), carried so an
    /// analysis can be traced back to the wavefunction that produced it.
    pub fn source(&self) -> &str {
        &self.source
    }

    /// The post-selection pattern applied, if this set has been filtered.
    pub fn sector(&self) -> Option<&str> {
        self.sector.as_deref()
    }

    /// Tag the set with the post-selection pattern its shots satisfy
    /// (restoring the provenance of a reloaded, already-filtered file).
    pub fn with_sector(mut self, sector: Option<String>) -> Self {
        self.sector = sector;
        self
    }

    /// Render one shot as a 0/1 string, site 0 first.
    pub fn bitstring(&self, index: usize) -> String {
        let config = self.shots[index];
        (0..self.geometry.length)
            .map(|j| if (config >> j) & 1 == 1 { '1' } else { '0' })
            .collect()
    }
}

fn blockade_ok(config: BasisConfig, geometry: ChainGeometry) -> bool {
    if config & (config >> 1) != 0 {
        return false;
    }
    if geometry.boundary == Boundary::Periodic
        && geometry.length >= 2
        && (config & 1 == 1)
        && (config >> (geometry.length - 1)) & 1 == 1
    {
        return false;
    }
    true
}

/// Dense-backend conditional sampler: basis entries sorted with site 0 as
/// the most significant key bit, plus running weight sums in that order.
struct PrefixSampler {
    /// Configurations in prefix order.
    configs: Vec<BasisConfig>,
    /// cum[i] = total weight of the first i entries.
    cum: Vec<f64>,
    length: usize,
}

impl PrefixSampler {
    fn prepare(configs: &[BasisConfig], amps: &[f64], length: usize) -> Self {
        let mut order: Vec<usize> = (0..configs.len()).collect();
        let key = |c: BasisConfig| c.reverse_bits() >> (64 - length as u32);
        order.sort_unstable_by_key(|&i| key(configs[i]));
        let sorted: Vec<BasisConfig> = order.iter().map(|&i| configs[i]).collect();
        let mut cum = Vec::with_capacity(configs.len() + 1);
        let mut total = 0.0;
        cum.push(0.0);
        for &i in &order {
            total += amps[i] * amps[i];
            cum.push(total);
        }
        PrefixSampler { configs: sorted, cum, length }
    }

    fn sample(&self, rng: &mut impl Rng) -> BasisConfig {
        let (mut lo, mut hi) = (0usize, self.configs.len());
        for j in 0..self.length {
            if hi - lo == 1 {
                break;
            }
            // Entries with site j unset come first within the shared prefix.
            let mid = lo + self.configs[lo..hi].partition_point(|&c| (c >> j) & 1 == 0);
            let total = self.cum[hi] - self.cum[lo];
            let p1 = (self.cum[hi] - self.cum[mid]) / total;
            if rng.gen::<f64>() < p1 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        self.configs[lo]
    }
}

/// Draw `n_shots` independent full-chain outcomes from the Born
/// distribution of `state`. Shot `i` uses stream `i` of a counter-based
/// generator seeded with `seed`, making every shot individually
/// reproducible. The state must be normalized.
pub fn sample_shots(state: &Wavefunction, n_shots: usize, seed: u64) -> Result<ShotSet> {
    let shots = match state {
        Wavefunction::Dense(dense) => {
            let norm: f64 = dense.amps().iter().map(|a| a * a).sum();
            if (norm - 1.0).abs() > 1e-8 {
                return Err(Error::InvalidInput(format!(
                    "state must be normalized before sampling (norm^2 = {norm})"
                )));
            }
            let sampler = PrefixSampler::prepare(
                dense.basis().configs(),
                dense.amps(),
                state.length(),
            );
            (0..n_shots)
                .map(|i| {
                    let mut rng = shot_rng(seed, i);
                    sampler.sample(&mut rng)
                })
                .collect()
        }
        Wavefunction::Mps(mps) => {
            let norm = mps.norm();
            if (norm - 1.0).abs() > 1e-8 {
                return Err(Error::InvalidInput(format!(
                    "state must be normalized before sampling (norm = {norm})"
                )));
            }
            let sampler = MpsSampler::prepare(mps)?;
            (0..n_shots)
                .map(|i| {
                    let mut rng = shot_rng(seed, i);
                    sampler.sample(&mut rng)
                })
                .collect()
        }
    };
    let mut set = ShotSet::new(state.geometry(), shots, seed, state.content_id())?;
    set.seed = seed;
    Ok(set)
}

fn shot_rng(seed: u64, shot_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(shot_index as u64);
    rng
}

/// Keep only the shots whose measured sites reproduce the sector outcomes.
/// The retention fraction `filtered.len() / shots.len()` is an unbiased
/// estimator of the sector probability. An empty result is legal — it just
/// means the sector never occurred in this sample.
pub fn filter_sector(
    shots: &ShotSet,
    sector: &crate::measure::OutcomeSector,
) -> Result<ShotSet> {
    if sector.geometry() != shots.geometry {
        return Err(Error::InvalidInput(
            "shot set and sector describe different chains".into(),
        ));
    }
    let retained: Vec<BasisConfig> = shots
        .shots
        .iter()
        .copied()
        .filter(|&config| {
            sector
                .measured()
                .iter()
                .all(|&(site, bit)| ((config >> site) & 1) as u8 == bit)
        })
        .collect();
    Ok(ShotSet {
        geometry: shots.geometry,
        shots: retained,
        seed: shots.seed,
        source: shots.source.clone(),
        sector: Some(sector.source().to_string()),
    })
}

fn shot_value(obs: &DiagonalObservable, config: BasisConfig) -> f64 {
    obs.terms()
        .iter()
        .map(|&(site, c)| c * ((config >> site) & 1) as f64)
        .sum()
}

fn check_sites(obs: &DiagonalObservable, length: usize) -> Result<()> {
    if let Some(&(site, _)) = obs.terms().iter().find(|&&(site, _)| site >= length) {
        return Err(Error::InvalidInput(format!(
            "observable site {site} outside chain of length {length}"
        )));
    }
    Ok(())
}

/// Sample mean and standard error of a diagonal observable over the shots.
pub fn estimate_observable(shots: &ShotSet, obs: &DiagonalObservable) -> Result<(f64, f64)> {
    let n = shots.len();
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "estimation needs at least two shots, got {n}"
        )));
    }
    check_sites(obs, shots.geometry.length)?;
    let values: Vec<f64> = shots.shots.iter().map(|&c| shot_value(obs, c)).collect();
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Ok((mean, (var / n as f64).sqrt()))
}

/// Connected correlators `⟨AB⟩ − ⟨A⟩⟨B⟩` from sample moments, with
/// leave-one-out jackknife standard errors. Pairs with overlapping supports
/// are dropped, surviving pairs are grouped by center separation exactly as
/// in the exact evaluator, and each group's pairs are averaged before the
/// jackknife so the reported error covers the aggregate.
pub fn estimate_connected(
    shots: &ShotSet,
    observables: &[DiagonalObservable],
    pairs: &[(usize, usize)],
    min_retained: usize,
) -> Result<CorrelatorSeries> {
    let n = shots.len();
    if n < min_retained.max(2) {
        return Err(Error::InvalidInput(format!(
            "only {n} retained shots; the connected estimator needs at least {}",
            min_retained.max(2)
        )));
    }
    let length = shots.geometry.length;
    for obs in observables {
        check_sites(obs, length)?;
    }
    for &(a, b) in pairs {
        if a >= observables.len() || b >= observables.len() {
            return Err(Error::InvalidInput(format!(
                "pair ({a}, {b}) outside the observable list of length {}",
                observables.len()
            )));
        }
    }
    let retained: Vec<(usize, usize)> = pairs
        .iter()
        .copied()
        .filter(|&(a, b)| a != b && !observables[a].overlaps(&observables[b]))
        .collect();

    // Per-shot values for every observable that appears in a retained pair.
    let mut values: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for &(a, b) in &retained {
        for idx in [a, b] {
            values.entry(idx).or_insert_with(|| {
                shots
                    .shots
                    .iter()
                    .map(|&c| shot_value(&observables[idx], c))
                    .collect()
            });
        }
    }
    let sums: BTreeMap<usize, f64> = values
        .iter()
        .map(|(&i, v)| (i, v.iter().sum::<f64>()))
        .collect();

    // Group pairs by separation; separations are half-integers, so twice
    // the folded distance is an exact integer key.
    let mut groups: BTreeMap<i64, Vec<(usize, usize)>> = BTreeMap::new();
    for &(a, b) in &retained {
        let mut d = (observables[a].center().value() - observables[b].center().value()).abs();
        if shots.geometry.boundary == Boundary::Periodic {
            d = d.min(length as f64 - d);
        }
        groups.entry((2.0 * d).round() as i64).or_default().push((a, b));
    }

    let nf = n as f64;
    let mut points = Vec::with_capacity(groups.len());
    for (key, members) in groups {
        let m = members.len() as f64;
        // Cross moments per pair, and the plain estimate of the average.
        let mut estimate = 0.0;
        let mut s_ab = Vec::with_capacity(members.len());
        for &(a, b) in &members {
            let (va, vb) = (&values[&a], &values[&b]);
            let sab: f64 = va.iter().zip(vb).map(|(x, y)| x * y).sum();
            estimate += sab / nf - (sums[&a] / nf) * (sums[&b] / nf);
            s_ab.push(sab);
        }
        estimate /= m;

        // Leave-one-out replicas of the group-averaged estimator.
        let n1 = nf - 1.0;
        let mut replicas = vec![0.0f64; n];
        for (p, &(a, b)) in members.iter().enumerate() {
            let (va, vb) = (&values[&a], &values[&b]);
            let (sa, sb, sab) = (sums[&a], sums[&b], s_ab[p]);
            for i in 0..n {
                let mean_ab = (sab - va[i] * vb[i]) / n1;
                let mean_a = (sa - va[i]) / n1;
                let mean_b = (sb - vb[i]) / n1;
                replicas[i] += mean_ab - mean_a * mean_b;
            }
        }
        let mean_rep = replicas.iter().sum::<f64>() / (nf * m);
        let var: f64 = replicas
            .iter()
            .map(|r| (r / m - mean_rep).powi(2))
            .sum::<f64>();
        let stderr = (var * n1 / nf).sqrt();
        points.push(CorrelatorPoint {
            separation: key as f64 / 2.0,
            value: estimate,
            stderr: Some(stderr),
        });
    }

    Ok(CorrelatorSeries {
        label: observables
            .first()
            .map(|o| o.label().to_string())
            .unwrap_or_default(),
        length,
        boundary: shots.geometry.boundary,
        sector: shots.sector.clone(),
        points,
    })
}
