//! On-disk formats: wavefunction checkpoints, shot files, correlator CSV.
//!
//! Wavefunction checkpoints are little-endian binary with a fixed header
//! (magic, version, length, boundary, constraint) so runs can be staged —
//! solve once, then measure/correlate/fit in later invocations.
//!
//! Dense layout (`RCWF`):
//!
//! ```text
//! magic  4 bytes  "RCWF"
//! ver    u8       1
//! L      u32      chain length
//! bnd    u8       0 open, 1 periodic
//! mode   u8       0 hard blockade, 1 penalty
//! dim    u64      basis dimension
//! amps   dim*f64  amplitudes in basis enumeration order
//! ```
//!
//! MPS layout (`RCMP`) shares the header (with `dim` replaced by the site
//! count, equal to `L`) and then stores each site tensor as its shape
//! `(dl, 2, dr)` in `u32`s followed by `dl*2*dr` row-major `f64`s.
//!
//! Shot files mimic experimental records: plain text, one 0/1 string per
//! line (site 0 first), with a JSON sidecar (`<file>.json`) carrying seed,
//! source-state id, chain shape, and any post-selection already applied, so
//! the same loaders analyze simulated and measured data alike.

use crate::basis::{BasisConfig, BlockadedBasis, Boundary, ChainGeometry, ConstraintMode};
use crate::error::{Error, Result};
use crate::mps::{MatrixProductState, SiteTensor};
use crate::observables::{CorrelatorPoint, CorrelatorSeries};
use crate::shots::ShotSet;
use crate::solve::DenseState;
use crate::wavefunction::Wavefunction;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

const DENSE_MAGIC: &[u8; 4] = b"RCWF";
const MPS_MAGIC: &[u8; 4] = b"RCMP";
const FORMAT_VERSION: u8 = 1;

fn boundary_byte(boundary: Boundary) -> u8 {
    match boundary {
        Boundary::Open => 0,
        Boundary::Periodic => 1,
    }
}

fn constraint_byte(constraint: ConstraintMode) -> u8 {
    match constraint {
        ConstraintMode::HardBlockade => 0,
        ConstraintMode::Penalty => 1,
    }
}

fn parse_boundary(byte: u8) -> Result<Boundary> {
    match byte {
        0 => Ok(Boundary::Open),
        1 => Ok(Boundary::Periodic),
        other => Err(Error::BadCheckpoint(format!(
            "unknown boundary tag {other}"
        ))),
    }
}

fn parse_constraint(byte: u8) -> Result<ConstraintMode> {
    match byte {
        0 => Ok(ConstraintMode::HardBlockade),
        1 => Ok(ConstraintMode::Penalty),
        other => Err(Error::BadCheckpoint(format!(
            "unknown constraint tag {other}"
        ))),
    }
}

fn read_exact<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    Ok(u32::from_le_bytes(read_exact::<4>(r)?))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    Ok(u64::from_le_bytes(read_exact::<8>(r)?))
}

fn read_f64s(r: &mut impl Read, n: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        out.push(f64::from_le_bytes(read_exact::<8>(r)?));
    }
    Ok(out)
}

fn write_header(w: &mut impl Write, magic: &[u8; 4], geometry: ChainGeometry) -> Result<()> {
    w.write_all(magic)?;
    w.write_all(&[FORMAT_VERSION])?;
    w.write_all(&(geometry.length as u32).to_le_bytes())?;
    w.write_all(&[boundary_byte(geometry.boundary)])?;
    w.write_all(&[constraint_byte(geometry.constraint)])?;
    Ok(())
}

fn read_header(r: &mut impl Read, magic: &[u8; 4]) -> Result<ChainGeometry> {
    let found = read_exact::<4>(r)?;
    if &found != magic {
        return Err(Error::BadCheckpoint(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&found),
            String::from_utf8_lossy(magic)
        )));
    }
    let version = read_exact::<1>(r)?[0];
    if version != FORMAT_VERSION {
        return Err(Error::BadCheckpoint(format!(
            "unsupported format version {version}"
        )));
    }
    let length = read_u32(r)? as usize;
    let boundary = parse_boundary(read_exact::<1>(r)?[0])?;
    let constraint = parse_constraint(read_exact::<1>(r)?[0])?;
    ChainGeometry::new(length, boundary, constraint)
}

/// Write a wavefunction checkpoint, dispatching on the backend.
pub fn save_wavefunction(state: &Wavefunction, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    match state {
        Wavefunction::Dense(dense) => {
            write_header(&mut w, DENSE_MAGIC, dense.geometry())?;
            w.write_all(&(dense.amps().len() as u64).to_le_bytes())?;
            for &a in dense.amps() {
                w.write_all(&a.to_le_bytes())?;
            }
        }
        Wavefunction::Mps(mps) => {
            let geometry = mps.geometry();
            write_header(&mut w, MPS_MAGIC, geometry)?;
            w.write_all(&(geometry.length as u64).to_le_bytes())?;
            for site in 0..geometry.length {
                let t = mps.tensor(site);
                w.write_all(&(t.dl as u32).to_le_bytes())?;
                w.write_all(&2u32.to_le_bytes())?;
                w.write_all(&(t.dr as u32).to_le_bytes())?;
                for &v in &t.data {
                    w.write_all(&v.to_le_bytes())?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Read back either checkpoint flavor; the magic selects the backend.
pub fn load_wavefunction(path: &Path) -> Result<Wavefunction> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    // Re-present the header from the start through a chained reader.
    let rest = magic.as_slice().chain(r);
    match &magic {
        m if m == DENSE_MAGIC => load_dense(rest).map(Wavefunction::Dense),
        m if m == MPS_MAGIC => load_mps(rest).map(Wavefunction::Mps),
        other => Err(Error::BadCheckpoint(format!(
            "unrecognized checkpoint magic {:?}",
            String::from_utf8_lossy(other)
        ))),
    }
}

fn load_dense(mut r: impl Read) -> Result<DenseState> {
    let geometry = read_header(&mut r, DENSE_MAGIC)?;
    let dim = read_u64(&mut r)? as usize;
    let basis = Arc::new(BlockadedBasis::enumerate(geometry)?);
    if basis.len() != dim {
        return Err(Error::BadCheckpoint(format!(
            "dimension {dim} does not match the {} states of the declared chain",
            basis.len()
        )));
    }
    let amps = read_f64s(&mut r, dim)?;
    DenseState::new(basis, amps)
}

fn load_mps(mut r: impl Read) -> Result<MatrixProductState> {
    let geometry = read_header(&mut r, MPS_MAGIC)?;
    let sites = read_u64(&mut r)? as usize;
    if sites != geometry.length {
        return Err(Error::BadCheckpoint(format!(
            "site count {sites} does not match chain length {}",
            geometry.length
        )));
    }
    let mut tensors = Vec::with_capacity(sites);
    for site in 0..sites {
        let dl = read_u32(&mut r)? as usize;
        let phys = read_u32(&mut r)? as usize;
        let dr = read_u32(&mut r)? as usize;
        if phys != 2 {
            return Err(Error::BadCheckpoint(format!(
                "site {site} has physical dimension {phys}, expected 2"
            )));
        }
        let mut t = SiteTensor::zeros(dl, dr);
        t.data = read_f64s(&mut r, dl * 2 * dr)?;
        tensors.push(t);
    }
    MatrixProductState::new(geometry, tensors)
}

/// Sidecar path convention: the data file's name plus a `.json` suffix.
pub fn sidecar_path(data: &Path) -> PathBuf {
    let mut name = data.file_name().unwrap_or_default().to_os_string();
    name.push(".json");
    data.with_file_name(name)
}

#[derive(Serialize, Deserialize)]
struct ShotSidecar {
    seed: u64,
    state_id: String,
    length: usize,
    boundary: Boundary,
    #[serde(default = "default_constraint")]
    constraint: ConstraintMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sector: Option<String>,
}

/// Files from an experiment carry no constraint tag; accept any bitstring.
fn default_constraint() -> ConstraintMode {
    ConstraintMode::Penalty
}

/// Write a shot file (one 0/1 line per shot, site 0 first) and its sidecar.
pub fn save_shots(shots: &ShotSet, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for i in 0..shots.len() {
        writeln!(w, "{}", shots.bitstring(i))?;
    }
    w.flush()?;

    let geometry = shots.geometry();
    let sidecar = ShotSidecar {
        seed: shots.seed(),
        state_id: shots.source().to_string(),
        length: geometry.length,
        boundary: geometry.boundary,
        constraint: geometry.constraint,
        sector: shots.sector().map(str::to_string),
    };
    let json = serde_json::to_string_pretty(&sidecar)
        .map_err(|e| Error::BadCheckpoint(format!("sidecar encoding failed: {e}")))?;
    std::fs::write(sidecar_path(path), json)?;
    Ok(())
}

/// Load a shot file together with its sidecar.
pub fn load_shots(path: &Path) -> Result<ShotSet> {
    let sidecar_file = sidecar_path(path);
    let sidecar: ShotSidecar = serde_json::from_str(&std::fs::read_to_string(&sidecar_file)?)
        .map_err(|e| {
            Error::BadCheckpoint(format!("sidecar {}: {e}", sidecar_file.display()))
        })?;
    let geometry = ChainGeometry::new(sidecar.length, sidecar.boundary, sidecar.constraint)?;

    let mut shots: Vec<BasisConfig> = Vec::new();
    for (lineno, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if line.len() != geometry.length {
            return Err(Error::BadCheckpoint(format!(
                "line {}: {} characters, expected {}",
                lineno + 1,
                line.len(),
                geometry.length
            )));
        }
        let mut config: BasisConfig = 0;
        for (site, ch) in line.chars().enumerate() {
            match ch {
                '0' => {}
                '1' => config |= 1 << site,
                other => {
                    return Err(Error::BadCheckpoint(format!(
                        "line {}: invalid character {other:?}",
                        lineno + 1
                    )))
                }
            }
        }
        shots.push(config);
    }
    Ok(ShotSet::new(geometry, shots, sidecar.seed, sidecar.state_id)?.with_sector(sidecar.sector))
}

#[derive(Serialize, Deserialize)]
struct SeriesSidecar {
    label: String,
    length: usize,
    boundary: Boundary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sector: Option<String>,
}

/// Write a correlator series as `separation,value,stderr` CSV plus a JSON
/// metadata sidecar. The stderr column is empty for exact series.
pub fn save_series(series: &CorrelatorSeries, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "separation,value,stderr")?;
    for p in &series.points {
        match p.stderr {
            Some(s) => writeln!(w, "{:.17e},{:.17e},{:.17e}", p.separation, p.value, s)?,
            None => writeln!(w, "{:.17e},{:.17e},", p.separation, p.value)?,
        }
    }
    w.flush()?;

    let sidecar = SeriesSidecar {
        label: series.label.clone(),
        length: series.length,
        boundary: series.boundary,
        sector: series.sector.clone(),
    };
    let json = serde_json::to_string_pretty(&sidecar)
        .map_err(|e| Error::BadCheckpoint(format!("sidecar encoding failed: {e}")))?;
    std::fs::write(sidecar_path(path), json)?;
    Ok(())
}

/// Load a correlator series from CSV plus sidecar.
pub fn load_series(path: &Path) -> Result<CorrelatorSeries> {
    let sidecar_file = sidecar_path(path);
    let sidecar: SeriesSidecar = serde_json::from_str(&std::fs::read_to_string(&sidecar_file)?)
        .map_err(|e| {
            Error::BadCheckpoint(format!("sidecar {}: {e}", sidecar_file.display()))
        })?;

    let mut points = Vec::new();
    for (lineno, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if lineno == 0 {
            if line.trim() != "separation,value,stderr" {
                return Err(Error::BadCheckpoint(format!(
                    "unexpected CSV header {line:?}"
                )));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::BadCheckpoint(format!(
                "line {}: expected 3 fields, found {}",
                lineno + 1,
                fields.len()
            )));
        }
        let parse = |s: &str, what: &str| -> Result<f64> {
            s.trim().parse::<f64>().map_err(|e| {
                Error::BadCheckpoint(format!("line {}: bad {what}: {e}", lineno + 1))
            })
        };
        let stderr = if fields[2].trim().is_empty() {
            None
        } else {
            Some(parse(fields[2], "stderr")?)
        };
        points.push(CorrelatorPoint {
            separation: parse(fields[0], "separation")?,
            value: parse(fields[1], "value")?,
            stderr,
        });
    }
    Ok(CorrelatorSeries {
        label: sidecar.label,
        length: sidecar.length,
        boundary: sidecar.boundary,
        sector: sidecar.sector,
        points,
    })
}
