//! Measurement patterns and measurement channels.
//!
//! A pattern like `n[2j]=0` declares a periodic subset of sites and the
//! post-selected outcome on each; expanding it against a chain geometry
//! yields a concrete [`OutcomeSector`]. Sectors are classified by the
//! symmetries their outcome map preserves: a pattern that keeps an
//! odd-period translation or any bond-centered reflection forbids the
//! order-parameter (σ) field from appearing along the measurement line,
//! which controls which operator dominates post-measurement correlations.
//!
//! Measurement channels: projective (`project`), finite-strength
//! exponential weighting (`weak_measure`), and the two-sublattice
//! generalized weighting (`generalized_measure`) that interpolates between
//! pure ε-type and the usual projective protocol as θ goes from 0 to π/4.

use nalgebra::DMatrix;

use crate::basis::{Boundary, ChainGeometry, ConstraintMode};
use crate::error::{Error, Result};
use crate::wavefunction::{Wavefunction, ZERO_PROBABILITY_THRESHOLD};

/// Largest clause-period (lcm of strides) accepted; chains have at most 63
/// sites so longer periods cannot repeat on any valid geometry.
const MAX_PATTERN_PERIOD: usize = 4096;

/// Cap on the number of measured sites for full outcome enumeration.
pub const MAX_ENUMERATED_SITES: usize = 20;

/// One `n[STRIDEj+OFFSET]=OUTCOME` clause.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatternClause {
    pub stride: usize,
    pub offset: usize,
    pub outcome: u8,
}

/// A parsed measurement pattern: the set of sites `stride*j + offset` per
/// clause, each post-selected to a fixed outcome.
#[derive(Debug, Clone)]
pub struct MeasurementPattern {
    clauses: Vec<PatternClause>,
    source: String,
    /// lcm of the clause strides.
    period: usize,
}

impl MeasurementPattern {
    pub fn clauses(&self) -> &[PatternClause] {
        &self.clauses
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Declared period: the lcm of the clause strides.
    pub fn period(&self) -> usize {
        self.period
    }
}

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        Parser {
            bytes: text.as_bytes(),
            pos: 0,
        }
    }

    fn error(&self, at: usize, message: impl Into<String>) -> Error {
        Error::PatternParse {
            byte: at,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn expect(&mut self, literal: &str) -> Result<()> {
        let lit = literal.as_bytes();
        if self.bytes.len() - self.pos < lit.len() || &self.bytes[self.pos..self.pos + lit.len()] != lit
        {
            return Err(self.error(self.pos, format!("expected `{literal}`")));
        }
        self.pos += lit.len();
        Ok(())
    }

    fn parse_int(&mut self) -> Result<(usize, usize)> {
        let start = self.pos;
        let mut value: usize = 0;
        let mut any = false;
        while let Some(c) = self.peek() {
            if !c.is_ascii_digit() {
                break;
            }
            any = true;
            value = value
                .checked_mul(10)
                .and_then(|v| v.checked_add((c - b'0') as usize))
                .ok_or_else(|| self.error(start, "integer too large"))?;
            self.pos += 1;
        }
        if !any {
            return Err(self.error(self.pos, "expected an integer"));
        }
        Ok((value, start))
    }

    fn parse_clause(&mut self) -> Result<PatternClause> {
        self.skip_ws();
        self.expect("n[")?;
        let (stride, stride_at) = self.parse_int()?;
        if stride == 0 {
            return Err(self.error(stride_at, "stride must be positive"));
        }
        self.expect("j")?;
        let offset = if self.peek() == Some(b'+') {
            self.pos += 1;
            let (offset, offset_at) = self.parse_int()?;
            if offset >= stride {
                return Err(self.error(
                    offset_at,
                    format!("offset {offset} must be smaller than stride {stride}"),
                ));
            }
            offset
        } else {
            0
        };
        self.expect("]=")?;
        let outcome = match self.peek() {
            Some(b'0') => 0u8,
            Some(b'1') => 1u8,
            _ => return Err(self.error(self.pos, "expected outcome `0` or `1`")),
        };
        self.pos += 1;
        Ok(PatternClause {
            stride,
            offset,
            outcome,
        })
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}

/// Parse the pattern DSL: `pattern := clause ("," clause)*`,
/// `clause := "n[" INT "j" ("+" INT)? "]=" ("0"|"1")`. Whitespace is
/// allowed around clauses and commas. Errors carry the byte offset.
pub fn parse_pattern(text: &str) -> Result<MeasurementPattern> {
    let mut parser = Parser::new(text);
    let mut clauses = vec![parser.parse_clause()?];
    loop {
        parser.skip_ws();
        match parser.peek() {
            None => break,
            Some(b',') => {
                parser.pos += 1;
                clauses.push(parser.parse_clause()?);
            }
            Some(_) => {
                return Err(parser.error(parser.pos, "expected `,` or end of pattern"));
            }
        }
    }

    // Two clauses conflict when they can address the same site with
    // different outcomes: offsets congruent modulo gcd of the strides.
    for (a, ca) in clauses.iter().enumerate() {
        for cb in clauses.iter().skip(a + 1) {
            let g = gcd(ca.stride, cb.stride);
            if ca.offset % g == cb.offset % g && ca.outcome != cb.outcome {
                return Err(Error::PatternInvalid(format!(
                    "clauses n[{}j+{}]={} and n[{}j+{}]={} assign conflicting outcomes \
                     to shared sites",
                    ca.stride, ca.offset, ca.outcome, cb.stride, cb.offset, cb.outcome
                )));
            }
        }
    }

    let mut period = 1usize;
    for c in &clauses {
        period = lcm(period, c.stride);
        if period > MAX_PATTERN_PERIOD {
            return Err(Error::PatternInvalid(format!(
                "clause period exceeds {MAX_PATTERN_PERIOD}"
            )));
        }
    }

    Ok(MeasurementPattern {
        clauses,
        source: text.to_string(),
        period,
    })
}

/// A measurement pattern made concrete on a chain: the measured sites in
/// ascending order with their post-selected outcomes, plus the symmetry
/// data used for classification.
#[derive(Debug, Clone)]
pub struct OutcomeSector {
    geometry: ChainGeometry,
    measured: Vec<(usize, u8)>,
    /// Minimal period of the infinite outcome map.
    period: usize,
    /// Declared clause period (lcm of strides); a multiple of `period`.
    declared_period: usize,
    /// One period of the outcome map: `None` = unmeasured.
    pattern_map: Vec<Option<u8>>,
    preserves_bond_reflection: bool,
    source: String,
}

impl OutcomeSector {
    pub fn geometry(&self) -> ChainGeometry {
        self.geometry
    }

    /// Measured sites with their outcomes, ascending by site.
    pub fn measured(&self) -> &[(usize, u8)] {
        &self.measured
    }

    pub fn measured_sites(&self) -> Vec<usize> {
        self.measured.iter().map(|&(s, _)| s).collect()
    }

    pub fn outcome_at(&self, site: usize) -> Option<u8> {
        self.pattern_map[site % self.period]
    }

    /// Minimal period of the outcome map.
    pub fn period(&self) -> usize {
        self.period
    }

    pub fn declared_period(&self) -> usize {
        self.declared_period
    }

    /// Fraction of sites measured.
    pub fn density(&self) -> f64 {
        self.measured.len() as f64 / self.geometry.length as f64
    }

    pub fn preserves_bond_reflection(&self) -> bool {
        self.preserves_bond_reflection
    }

    pub fn source(&self) -> &str {
        &self.source
    }
}

/// Expand a pattern onto a chain. On periodic chains the minimal pattern
/// period must divide the length, otherwise the outcome assignment would be
/// inconsistent across the seam. Hard-blockade chains reject patterns that
/// force occupation on adjacent sites.
pub fn expand_pattern(
    pattern: &MeasurementPattern,
    geometry: ChainGeometry,
) -> Result<OutcomeSector> {
    let declared = pattern.period;
    // Build one declared period of the outcome map.
    let mut map: Vec<Option<u8>> = vec![None; declared];
    for c in &pattern.clauses {
        let mut site = c.offset;
        while site < declared {
            if let Some(prev) = map[site] {
                if prev != c.outcome {
                    return Err(Error::PatternInvalid(format!(
                        "site {site} assigned both outcomes"
                    )));
                }
            }
            map[site] = Some(c.outcome);
            site += c.stride;
        }
    }

    // Minimal period: the smallest divisor of the declared period under
    // which the map is invariant.
    let mut period = declared;
    for d in 1..=declared {
        if declared % d == 0 && (0..declared).all(|j| map[j] == map[j % d]) {
            period = d;
            break;
        }
    }
    map.truncate(period);

    let length = geometry.length;
    if geometry.boundary == Boundary::Periodic && length % period != 0 {
        return Err(Error::PatternInvalid(format!(
            "pattern period {period} does not divide ring length {length}"
        )));
    }

    let measured: Vec<(usize, u8)> = (0..length)
        .filter_map(|site| map[site % period].map(|bit| (site, bit)))
        .collect();
    if measured.is_empty() {
        return Err(Error::PatternInvalid(
            "pattern measures no site on this chain".into(),
        ));
    }

    if geometry.constraint == ConstraintMode::HardBlockade {
        for w in measured.windows(2) {
            if let [(i, 1), (j, 1)] = w {
                if j - i == 1 {
                    return Err(Error::PatternInvalid(format!(
                        "outcome 1 forced on adjacent sites {i} and {j}"
                    )));
                }
            }
        }
        if geometry.boundary == Boundary::Periodic && length > 1 {
            let first = measured.first().copied();
            let last = measured.last().copied();
            if let (Some((0, 1)), Some((l, 1))) = (first, last) {
                if l == length - 1 {
                    return Err(Error::PatternInvalid(format!(
                        "outcome 1 forced on adjacent sites {l} and 0 across the seam"
                    )));
                }
            }
        }
    }

    // Bond reflection j -> 2c+1-j about any bond center c of the infinite
    // pattern.
    let preserves_bond_reflection = (0..period).any(|c| {
        (0..period).all(|j| {
            let r = (2 * c + 1 + period - (j % period)) % period;
            map[j] == map[r]
        })
    });

    Ok(OutcomeSector {
        geometry,
        measured,
        period,
        declared_period: declared,
        pattern_map: map,
        preserves_bond_reflection,
        source: pattern.source.clone(),
    })
}

/// Whether the σ (order-parameter) field survives along the measurement
/// line, per the sector's symmetries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SectorClass {
    pub sigma_forbidden: bool,
    /// The outcome map has odd minimal period (preserves an odd-step
    /// translation).
    pub odd_period: bool,
    /// The outcome map is invariant under some bond-centered reflection.
    pub bond_reflection: bool,
}

/// σ is forbidden iff the pattern preserves an odd-period translation or
/// any bond-centered reflection; either symmetry forces the σ coupling
/// along the measurement line to vanish.
pub fn classify_sector(sector: &OutcomeSector) -> SectorClass {
    let odd_period = sector.period % 2 == 1;
    let bond_reflection = sector.preserves_bond_reflection;
    SectorClass {
        sigma_forbidden: odd_period || bond_reflection,
        odd_period,
        bond_reflection,
    }
}

/// Project onto the sector and renormalize; returns the post-measurement
/// state and the Born probability of the sector.
pub fn project(state: &Wavefunction, sector: &OutcomeSector) -> Result<(Wavefunction, f64)> {
    check_geometry(state, sector)?;
    let mut out = state.clone();
    let p = out.project_bits(sector.measured())?;
    Ok((out, p))
}

/// Born probability of the sector, leaving the state untouched.
pub fn sector_probability(state: &Wavefunction, sector: &OutcomeSector) -> Result<f64> {
    check_geometry(state, sector)?;
    state.bits_probability(sector.measured())
}

/// Finite-strength measurement: amplitudes gain
/// `exp(-(beta/2) * sum_a (-1)^{outcome_a} n_a(config))` and the state is
/// renormalized. `beta -> infinity` recovers `project`.
pub fn weak_measure(
    state: &Wavefunction,
    sector: &OutcomeSector,
    beta: f64,
) -> Result<Wavefunction> {
    check_geometry(state, sector)?;
    if !(beta >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "measurement strength must be non-negative, got {beta}"
        )));
    }
    let damp = (-beta / 2.0).exp();
    let mut weights = vec![(1.0, 1.0); state.length()];
    for &(site, bit) in sector.measured() {
        // Outcome 0 damps occupied configs; outcome 1 damps empty ones
        // (equivalent to enhancing occupied ones, up to normalization).
        weights[site] = if bit == 0 { (1.0, damp) } else { (damp, 1.0) };
    }
    let mut out = state.clone();
    out.apply_site_weights(&weights)?;
    Ok(out)
}

/// Two-sublattice generalized measurement on a ring: every site is weighted
/// by `exp(-(beta/2) * [(-1)^j sin(theta) + cos(theta)] * n_j)`. `theta = 0`
/// is a pure uniform (ε-type) weighting; `theta = π/4` at large `beta`
/// reproduces the projective even-site protocol.
pub fn generalized_measure(state: &Wavefunction, beta: f64, theta: f64) -> Result<Wavefunction> {
    let geometry = state.geometry();
    if geometry.boundary != Boundary::Periodic {
        return Err(Error::Unsupported(
            "generalized measurement is defined on periodic chains".into(),
        ));
    }
    if geometry.length % 2 != 0 {
        return Err(Error::InvalidInput(
            "generalized measurement needs an even ring (two sublattices)".into(),
        ));
    }
    if !(beta >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "measurement strength must be non-negative, got {beta}"
        )));
    }
    if !(0.0..=std::f64::consts::FRAC_PI_2).contains(&theta) {
        return Err(Error::InvalidInput(format!(
            "theta must lie in [0, pi/2], got {theta}"
        )));
    }
    let (sin, cos) = theta.sin_cos();
    let weights: Vec<(f64, f64)> = (0..geometry.length)
        .map(|j| {
            let c = if j % 2 == 0 { cos + sin } else { cos - sin };
            (1.0, (-beta / 2.0 * c).exp())
        })
        .collect();
    let mut out = state.clone();
    out.apply_site_weights(&weights)?;
    Ok(out)
}

/// Conditional probabilities `P(outcome at i_k | outcomes at i_1..i_{k-1})`
/// over the sector's measured sites in ascending order. Their product is
/// the sector probability. A zero-probability prefix aborts with an error
/// naming the offending site.
pub fn conditional_probabilities(
    state: &Wavefunction,
    sector: &OutcomeSector,
) -> Result<Vec<f64>> {
    check_geometry(state, sector)?;
    match state {
        Wavefunction::Dense(s) => {
            // Filter the surviving configurations one measured site at a time.
            let mut survivors: Vec<(u64, f64)> = s
                .basis()
                .configs()
                .iter()
                .zip(s.amps())
                .map(|(&c, &a)| (c, a * a))
                .collect();
            let mut prev: f64 = survivors.iter().map(|&(_, w)| w).sum();
            let mut out = Vec::with_capacity(sector.measured().len());
            for (k, &(site, bit)) in sector.measured().iter().enumerate() {
                survivors.retain(|&(c, _)| (c >> site & 1) as u8 == bit);
                let now: f64 = survivors.iter().map(|&(_, w)| w).sum();
                if now < ZERO_PROBABILITY_THRESHOLD {
                    return Err(Error::ZeroProbability(format!(
                        "prefix through site {site} (entry {k}) has zero probability"
                    )));
                }
                out.push(now / prev);
                prev = now;
            }
            Ok(out)
        }
        Wavefunction::Mps(s) => {
            let length = s.length();
            // Right environments of the unprojected chain.
            let mut right = vec![DMatrix::from_element(1, 1, 1.0); length + 1];
            for i in (0..length).rev() {
                let t = s.tensor(i);
                let mut acc = DMatrix::zeros(t.dl, t.dl);
                for phys in 0..2 {
                    let m = t.phys_matrix(phys);
                    acc += &m * &right[i + 1] * m.transpose();
                }
                right[i] = acc;
            }
            let norm2 = right[0][(0, 0)];
            if !(norm2 > 0.0) {
                return Err(Error::ZeroProbability("state has zero norm".into()));
            }

            let mut rho = DMatrix::from_element(1, 1, 1.0);
            let mut pos = 0usize;
            let mut prev = 1.0f64;
            let mut out = Vec::with_capacity(sector.measured().len());
            for (k, &(site, bit)) in sector.measured().iter().enumerate() {
                while pos < site {
                    let t = s.tensor(pos);
                    let mut acc = DMatrix::zeros(t.dr, t.dr);
                    for phys in 0..2 {
                        let m = t.phys_matrix(phys);
                        acc += m.transpose() * &rho * &m;
                    }
                    rho = acc;
                    pos += 1;
                }
                let t = s.tensor(site);
                let m = t.phys_matrix(bit as usize);
                rho = m.transpose() * &rho * &m;
                pos = site + 1;
                // rho and the right environment pair bra-with-bra and
                // ket-with-ket, so the contraction is an elementwise sum.
                let joint = rho.component_mul(&right[pos]).sum() / norm2;
                if joint < ZERO_PROBABILITY_THRESHOLD {
                    return Err(Error::ZeroProbability(format!(
                        "prefix through site {site} (entry {k}) has zero probability"
                    )));
                }
                out.push(joint / prev);
                prev = joint;
            }
            Ok(out)
        }
    }
}

/// Born probability of every outcome bitstring on the given measured sites
/// (ascending). Entry `o` of the result corresponds to the outcome whose
/// bit `k` (of the *index* `o`) is the outcome at `sites[k]`.
pub fn enumerate_sector_probabilities(
    state: &Wavefunction,
    sites: &[usize],
) -> Result<Vec<f64>> {
    let length = state.length();
    let k = sites.len();
    if k > MAX_ENUMERATED_SITES {
        return Err(Error::Capacity(format!(
            "enumerating {k} measured sites exceeds the cap of {MAX_ENUMERATED_SITES}"
        )));
    }
    let mut sorted = sites.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != k {
        return Err(Error::InvalidInput("duplicate measured site".into()));
    }
    if let Some(&max) = sorted.last() {
        if max >= length {
            return Err(Error::InvalidInput(format!(
                "site {max} outside chain of {length} sites"
            )));
        }
    }

    match state {
        Wavefunction::Dense(s) => {
            let mut out = vec![0.0; 1usize << k];
            for (idx, &config) in s.basis().configs().iter().enumerate() {
                let mut o = 0usize;
                for (bit_pos, &site) in sorted.iter().enumerate() {
                    o |= ((config >> site & 1) as usize) << bit_pos;
                }
                out[o] += s.amps()[idx] * s.amps()[idx];
            }
            Ok(out)
        }
        Wavefunction::Mps(s) => {
            // Branching transfer walk: one running density block per
            // outcome prefix, doubling at each measured site. Memory grows
            // as 2^K * chi^2.
            let mut blocks: Vec<DMatrix<f64>> = vec![DMatrix::from_element(1, 1, 1.0)];
            let mut next_measured = 0usize;
            for i in 0..length {
                let t = s.tensor(i);
                let measured_here = next_measured < k && sorted[next_measured] == i;
                if measured_here {
                    next_measured += 1;
                }
                let mut grown: Vec<DMatrix<f64>> =
                    Vec::with_capacity(blocks.len() * if measured_here { 2 } else { 1 });
                if measured_here {
                    // Low outcome bits correspond to earlier measured
                    // sites, so append the branch for this site's outcome
                    // in the high position.
                    for phys in 0..2 {
                        let m = t.phys_matrix(phys);
                        for b in &blocks {
                            grown.push(m.transpose() * b * &m);
                        }
                    }
                } else {
                    for b in &blocks {
                        let mut acc = DMatrix::zeros(t.dr, t.dr);
                        for phys in 0..2 {
                            let m = t.phys_matrix(phys);
                            acc += m.transpose() * b * &m;
                        }
                        grown.push(acc);
                    }
                }
                blocks = grown;
            }
            let total: f64 = blocks.iter().map(|b| b[(0, 0)]).sum();
            if !(total > 0.0) {
                return Err(Error::ZeroProbability("state has zero norm".into()));
            }
            Ok(blocks.iter().map(|b| b[(0, 0)] / total).collect())
        }
    }
}

fn check_geometry(state: &Wavefunction, sector: &OutcomeSector) -> Result<()> {
    let sg = state.geometry();
    let tg = sector.geometry();
    if sg.length != tg.length || sg.boundary != tg.boundary {
        return Err(Error::InvalidInput(format!(
            "sector geometry ({} sites, {:?}) does not match state ({} sites, {:?})",
            tg.length, tg.boundary, sg.length, sg.boundary
        )));
    }
    Ok(())
}
