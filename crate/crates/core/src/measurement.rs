//! Measurement models: exact and far-field TDOA/FDOA generation, the
//! differencing matrix, seeded Gaussian noise, and the feasible-FDOA locus.
//!
//! All operations are pure functions of their inputs; noise takes an explicit
//! seed, so batch generation parallelizes with a seed-per-trial contract.

use std::io::{BufRead, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::numfmt::float17;
use crate::scenario::{NoiseKind, NoiseModel, PairingScheme, Scenario, UnitConvention};

/// The M x N matrix P mapping per-receiver quantities to pairwise differences.
///
/// Row p for pair `(i, j)` has +1 in column `j` and -1 in column `i`, so
/// `(P d)_p = d_j - d_i`. Every row sums to zero, hence P annihilates any
/// common offset across receivers.
#[derive(Debug, Clone, PartialEq)]
pub struct DifferencingMatrix {
    pub entries: DMatrix<f64>,
    pub pairs: Vec<(usize, usize)>,
}

impl DifferencingMatrix {
    pub fn num_pairs(&self) -> usize {
        self.pairs.len()
    }

    /// Apply P to a per-receiver vector.
    pub fn difference(&self, per_receiver: &DVector<f64>) -> DVector<f64> {
        &self.entries * per_receiver
    }
}

/// Build the differencing matrix for a pairing scheme over `n` receivers.
pub fn build_differencing_matrix(
    pairing: &PairingScheme,
    n: usize,
) -> Result<DifferencingMatrix> {
    let pairs = pairing.resolve(n)?;
    let mut entries = DMatrix::zeros(pairs.len(), n);
    for (row, &(i, j)) in pairs.iter().enumerate() {
        entries[(row, i)] = -1.0;
        entries[(row, j)] = 1.0;
    }
    Ok(DifferencingMatrix { entries, pairs })
}

/// What a measurement vector contains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasurementKind {
    Fdoa,
    Tdoa,
}

impl MeasurementKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            MeasurementKind::Fdoa => "fdoa",
            MeasurementKind::Tdoa => "tdoa",
        }
    }
}

/// Which forward model produced a measurement vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasurementModel {
    Exact,
    FarField,
}

impl MeasurementModel {
    pub fn as_str(&self) -> &'static str {
        match self {
            MeasurementModel::Exact => "exact",
            MeasurementModel::FarField => "far_field",
        }
    }
}

/// Unit convention tag carried by measurement values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnitMode {
    Scaled,
    Physical,
}

impl UnitMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            UnitMode::Scaled => "scaled",
            UnitMode::Physical => "physical",
        }
    }

    pub fn of(units: &UnitConvention) -> Self {
        match units {
            UnitConvention::Scaled => UnitMode::Scaled,
            UnitConvention::Physical { .. } => UnitMode::Physical,
        }
    }
}

/// A tagged vector of pairwise TDOA or FDOA values.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementVector {
    pub kind: MeasurementKind,
    pub values: DVector<f64>,
    pub pairs: Vec<(usize, usize)>,
    pub model: MeasurementModel,
    pub unit_mode: UnitMode,
}

fn require_emitter(scenario: &Scenario) -> Result<&DVector<f64>> {
    scenario
        .emitter
        .as_ref()
        .map(|e| &e.position)
        .ok_or(Error::MissingEmitter)
}

/// Per-receiver frequency shifts of the exact model, in scaled units:
/// `d_i = v_i . (x_i - x) / ||x_i - x||`.
fn scaled_exact_frequency_shifts(scenario: &Scenario) -> Result<DVector<f64>> {
    let emitter = require_emitter(scenario)?;
    let n = scenario.receiver_count();
    let mut d = DVector::zeros(n);
    for (idx, r) in scenario.receivers.iter().enumerate() {
        let offset = &r.position - emitter;
        let range = offset.norm();
        if range == 0.0 {
            return Err(Error::CoincidentEmitterReceiver { receiver: idx + 1 });
        }
        d[idx] = r.velocity.dot(&offset) / range;
    }
    Ok(d)
}

/// Per-receiver times of arrival of the exact model, in scaled units:
/// `t_i = ||x_i - x||`.
fn scaled_exact_toa(scenario: &Scenario) -> Result<DVector<f64>> {
    let emitter = require_emitter(scenario)?;
    let n = scenario.receiver_count();
    let mut t = DVector::zeros(n);
    for (idx, r) in scenario.receivers.iter().enumerate() {
        let range = (&r.position - emitter).norm();
        if range == 0.0 {
            return Err(Error::CoincidentEmitterReceiver { receiver: idx + 1 });
        }
        t[idx] = range;
    }
    Ok(t)
}

/// Exact per-receiver frequency shifts. Scaled mode returns
/// `d_i = v_i . (x_i - x) / ||x_i - x||`; physical mode multiplies by f0/c.
pub fn exact_frequency_shifts(scenario: &Scenario) -> Result<DVector<f64>> {
    Ok(scaled_exact_frequency_shifts(scenario)? * scenario.units.fdoa_factor())
}

/// Far-field per-receiver frequency shifts `d = -V x_hat` for a unit
/// direction (checked to 1e-12) and an N x D velocity matrix. Scaled units.
pub fn farfield_frequency_shifts(
    direction: &DVector<f64>,
    velocities: &DMatrix<f64>,
) -> Result<DVector<f64>> {
    let norm = direction.norm();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(Error::NonUnitDirection { norm });
    }
    if velocities.ncols() != direction.len() {
        return Err(Error::UnsupportedDimension {
            required: velocities.ncols(),
            got: direction.len(),
        });
    }
    Ok(-(velocities * direction))
}

/// Exact per-receiver times of arrival. Scaled mode returns
/// `t_i = ||x_i - x||`; physical mode divides by c.
pub fn exact_toa(scenario: &Scenario) -> Result<DVector<f64>> {
    Ok(scaled_exact_toa(scenario)? * scenario.units.tdoa_factor())
}

/// Far-field per-receiver shifts in scaled units for the requested kind.
///
/// FDOA: `d_i = -v_i . x_hat`. TDOA: `t_i = ||x - c|| - (x_i - c) . x_hat`
/// with `c` the receiver centroid; the constant range term cancels under
/// differencing, centering only tames floating-point cancellation.
fn scaled_farfield_shifts(scenario: &Scenario, kind: MeasurementKind) -> Result<DVector<f64>> {
    let direction = scenario
        .emitter_direction()
        .ok_or(Error::MissingEmitter)?;
    match kind {
        MeasurementKind::Fdoa => farfield_frequency_shifts(&direction, &scenario.velocities()),
        MeasurementKind::Tdoa => {
            let centroid = scenario.centroid();
            let range = scenario.emitter_range().unwrap_or(0.0);
            let n = scenario.receiver_count();
            let mut t = DVector::zeros(n);
            for (idx, r) in scenario.receivers.iter().enumerate() {
                t[idx] = range - (&r.position - &centroid).dot(&direction);
            }
            Ok(t)
        }
    }
}

/// Generate the pairwise measurement vector for a scenario.
///
/// The values are `P` applied to the per-receiver shift vector of the chosen
/// model, times the unit factor (f0/c for FDOA, 1/c for TDOA) in physical
/// mode. The factor is applied after differencing so physical values equal
/// the scaled values times the factor, exactly.
pub fn measure(
    scenario: &Scenario,
    kind: MeasurementKind,
    model: MeasurementModel,
) -> Result<MeasurementVector> {
    let dm = build_differencing_matrix(&scenario.pairing, scenario.receiver_count())?;
    let shifts = match (kind, model) {
        (MeasurementKind::Fdoa, MeasurementModel::Exact) => {
            scaled_exact_frequency_shifts(scenario)?
        }
        (MeasurementKind::Tdoa, MeasurementModel::Exact) => scaled_exact_toa(scenario)?,
        (_, MeasurementModel::FarField) => scaled_farfield_shifts(scenario, kind)?,
    };
    let factor = match kind {
        MeasurementKind::Fdoa => scenario.units.fdoa_factor(),
        MeasurementKind::Tdoa => scenario.units.tdoa_factor(),
    };
    let values = dm.difference(&shifts) * factor;
    Ok(MeasurementVector {
        kind,
        values,
        pairs: dm.pairs,
        model,
        unit_mode: UnitMode::of(&scenario.units),
    })
}

// ---------------------------------------------------------------------------
// Noise
// ---------------------------------------------------------------------------

/// A covariance together with a factor B satisfying B B^T = Q, used to draw
/// correlated Gaussian samples as `B z` with `z` standard normal.
#[derive(Debug, Clone)]
pub struct NoiseShape {
    pub factor: DMatrix<f64>,
    pub covariance: DMatrix<f64>,
}

impl NoiseShape {
    /// Scale the shape so the covariance is multiplied by `power`.
    pub fn scaled(&self, power: f64) -> NoiseShape {
        NoiseShape {
            factor: &self.factor * power.sqrt(),
            covariance: &self.covariance * power,
        }
    }

    /// Draw one sample `B z` deterministically from the seed.
    pub fn sample(&self, seed: u64) -> DVector<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = DVector::from_iterator(
            self.factor.ncols(),
            (0..self.factor.ncols()).map(|_| StandardNormal.sample(&mut rng)),
        );
        &self.factor * z
    }
}

/// The unit-power noise shape for a noise kind: sigma (or, for an explicit
/// covariance, its overall scale) is treated as 1. `NoiseKind::None` maps to
/// the identity shape so a caller can still scale it by a chosen power.
///
/// For `Differenced`, the factor is P itself (per-receiver noise pushed
/// through the differencing), which stays valid even when P P^T is singular
/// for redundant pairings; explicit covariances use their Cholesky factor.
pub fn unit_noise_shape(kind: &NoiseKind, dm: &DifferencingMatrix) -> Result<NoiseShape> {
    let m = dm.num_pairs();
    match kind {
        NoiseKind::None | NoiseKind::Iid { .. } => Ok(NoiseShape {
            factor: DMatrix::identity(m, m),
            covariance: DMatrix::identity(m, m),
        }),
        NoiseKind::Differenced { .. } => Ok(NoiseShape {
            factor: dm.entries.clone(),
            covariance: &dm.entries * dm.entries.transpose(),
        }),
        NoiseKind::Explicit { covariance } => {
            if covariance.nrows() != m || covariance.ncols() != m {
                return Err(Error::Scenario(format!(
                    "explicit covariance is {} x {}, expected {m} x {m}",
                    covariance.nrows(),
                    covariance.ncols()
                )));
            }
            if let Some(msg) = crate::scenario::spd_violation(covariance) {
                return Err(Error::NotPositiveDefinite(msg));
            }
            let chol = covariance
                .clone()
                .cholesky()
                .ok_or_else(|| Error::NotPositiveDefinite("Cholesky failed".to_string()))?;
            Ok(NoiseShape {
                factor: chol.l(),
                covariance: covariance.clone(),
            })
        }
    }
}

/// Add zero-mean Gaussian noise to a measurement vector, returning the noisy
/// vector and the covariance actually used. Deterministic for a fixed seed.
///
/// Covariances by kind: `iid` gives sigma^2 I, `differenced` gives
/// sigma^2 P P^T (P rebuilt from the measurement's own pair list), `explicit`
/// uses the given Q, and `none` returns the input unchanged with Q = 0.
pub fn add_noise(
    m: &MeasurementVector,
    noise: &NoiseModel,
) -> Result<(MeasurementVector, DMatrix<f64>)> {
    let len = m.values.len();
    if let NoiseKind::None = noise.kind {
        return Ok((m.clone(), DMatrix::zeros(len, len)));
    }
    let n = m
        .pairs
        .iter()
        .map(|&(i, j)| i.max(j) + 1)
        .max()
        .unwrap_or(0);
    let dm = build_differencing_matrix(
        &PairingScheme::Explicit { pairs: m.pairs.clone() },
        n,
    )?;
    let power = match noise.kind {
        NoiseKind::Iid { sigma } | NoiseKind::Differenced { sigma } => {
            if !(sigma > 0.0) {
                return Err(Error::Scenario(format!(
                    "noise sigma must be positive to sample, got {sigma}"
                )));
            }
            sigma * sigma
        }
        _ => 1.0,
    };
    let shape = unit_noise_shape(&noise.kind, &dm)?.scaled(power);
    let noisy = &m.values + shape.sample(noise.seed);
    Ok((
        MeasurementVector { values: noisy, ..m.clone() },
        shape.covariance,
    ))
}

// ---------------------------------------------------------------------------
// Feasible-FDOA locus
// ---------------------------------------------------------------------------

/// Sample the image of the unit circle under the far-field FDOA map `-PV`.
///
/// Returns `-PV (cos t_k, sin t_k)` for `t_k` uniform on `[0, 2pi)`. The
/// samples trace the ellipse whose axes are the left singular vectors of
/// `-PV` scaled by its singular values. 2-D scenarios only.
pub fn fdoa_ellipse_locus(
    velocities: &DMatrix<f64>,
    pairing: &PairingScheme,
    samples: usize,
) -> Result<Vec<DVector<f64>>> {
    if velocities.ncols() != 2 {
        return Err(Error::UnsupportedDimension {
            required: 2,
            got: velocities.ncols(),
        });
    }
    if samples < 3 {
        return Err(Error::Scenario(format!(
            "ellipse locus needs at least 3 samples, got {samples}"
        )));
    }
    let dm = build_differencing_matrix(pairing, velocities.nrows())?;
    let map = -(&dm.entries * velocities);
    Ok((0..samples)
        .map(|k| {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / samples as f64;
            &map * DVector::from_vec(vec![theta.cos(), theta.sin()])
        })
        .collect())
}

// ---------------------------------------------------------------------------
// CSV export/import
// ---------------------------------------------------------------------------

pub const MEASUREMENT_CSV_HEADER: &str = "pair_i,pair_j,kind,model,value,unit_mode";

/// Write a measurement vector as CSV with 17-significant-digit values.
/// Pair indices are written 1-based, matching the scenario file convention.
pub fn write_measurements_csv<W: Write>(m: &MeasurementVector, out: &mut W) -> std::io::Result<()> {
    writeln!(out, "{MEASUREMENT_CSV_HEADER}")?;
    for (row, &(i, j)) in m.pairs.iter().enumerate() {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            i + 1,
            j + 1,
            m.kind.as_str(),
            m.model.as_str(),
            float17(m.values[row]),
            m.unit_mode.as_str()
        )?;
    }
    Ok(())
}

/// Parse a measurement CSV produced by [`write_measurements_csv`].
///
/// All rows must agree on kind, model, and unit mode. Errors carry the
/// offending 1-based line number.
pub fn read_measurements_csv<R: BufRead>(reader: R, path: Option<&Path>) -> Result<MeasurementVector> {
    let err = |line: usize, message: String| Error::Parse {
        path: path.map(|p| p.to_path_buf()),
        line: Some(line),
        message,
    };
    let mut lines = reader.lines().enumerate();
    let header = match lines.next() {
        Some((_, Ok(h))) => h,
        Some((_, Err(e))) => return Err(err(1, e.to_string())),
        None => return Err(err(1, "empty file".to_string())),
    };
    if header.trim() != MEASUREMENT_CSV_HEADER {
        return Err(err(1, format!(
            "unexpected header {:?}, expected {:?}",
            header.trim(),
            MEASUREMENT_CSV_HEADER
        )));
    }

    let mut pairs = Vec::new();
    let mut values = Vec::new();
    let mut tags: Option<(MeasurementKind, MeasurementModel, UnitMode)> = None;
    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line.map_err(|e| err(lineno, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim().split(',').collect();
        if fields.len() != 6 {
            return Err(err(lineno, format!("expected 6 fields, got {}", fields.len())));
        }
        let i: usize = fields[0]
            .parse()
            .map_err(|_| err(lineno, format!("bad pair_i {:?}", fields[0])))?;
        let j: usize = fields[1]
            .parse()
            .map_err(|_| err(lineno, format!("bad pair_j {:?}", fields[1])))?;
        if i == 0 || j == 0 {
            return Err(err(lineno, "pair indices are 1-based; 0 is invalid".to_string()));
        }
        let kind = match fields[2] {
            "fdoa" => MeasurementKind::Fdoa,
            "tdoa" => MeasurementKind::Tdoa,
            other => return Err(err(lineno, format!("unknown kind {other:?}"))),
        };
        let model = match fields[3] {
            "exact" => MeasurementModel::Exact,
            "far_field" => MeasurementModel::FarField,
            other => return Err(err(lineno, format!("unknown model {other:?}"))),
        };
        let value: f64 = fields[4]
            .parse()
            .map_err(|_| err(lineno, format!("bad value {:?}", fields[4])))?;
        let unit_mode = match fields[5] {
            "scaled" => UnitMode::Scaled,
            "physical" => UnitMode::Physical,
            other => return Err(err(lineno, format!("unknown unit_mode {other:?}"))),
        };
        match &tags {
            None => tags = Some((kind, model, unit_mode)),
            Some(t) => {
                if *t != (kind, model, unit_mode) {
                    return Err(err(
                        lineno,
                        "rows mix kind/model/unit_mode; a file holds one measurement vector"
                            .to_string(),
                    ));
                }
            }
        }
        pairs.push((i - 1, j - 1));
        values.push(value);
    }
    let (kind, model, unit_mode) =
        tags.ok_or_else(|| err(2, "no measurement rows".to_string()))?;
    Ok(MeasurementVector {
        kind,
        values: DVector::from_vec(values),
        pairs,
        model,
        unit_mode,
    })
}
