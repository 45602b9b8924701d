//! Scenario definition: receiver geometry, emitter ground truth, pairing,
//! noise model, and unit convention.
//!
//! A scenario is the single source of geometric truth for every other module.
//! Values are immutable after construction and safe to share across threads.
//!
//! # File format
//!
//! A scenario is stored as one strict-schema JSON document (unknown fields are
//! rejected). All receiver indices in files are 1-based; they are converted to
//! 0-based indices internally.
//!
//! ```json
//! {
//!   "dim": 2,
//!   "receivers": [
//!     { "position": [1.0, 0.0], "velocity": [0.0, 1.0] },
//!     { "position": [-1.0, 0.0], "velocity": [0.0, -1.0] }
//!   ],
//!   "emitter": { "position": [1000.0, 500.0] },
//!   "pairing": { "kind": "reference", "ref_index": 1 },
//!   "noise": { "kind": "differenced", "sigma": 0.01, "seed": 42 },
//!   "units": { "mode": "scaled" }
//! }
//! ```
//!
//! Sign convention, fixed everywhere in this toolkit: pair `(i, j)` measures
//! "j minus i", so a differencing-matrix row for `(i, j)` carries `+1` in
//! column `j` and `-1` in column `i`.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A receiver with position and velocity, both length-D (D = 2 or 3).
#[derive(Debug, Clone, PartialEq)]
pub struct Receiver {
    pub position: DVector<f64>,
    pub velocity: DVector<f64>,
}

impl Receiver {
    pub fn new(position: Vec<f64>, velocity: Vec<f64>) -> Self {
        Self {
            position: DVector::from_vec(position),
            velocity: DVector::from_vec(velocity),
        }
    }
}

/// The stationary emitter whose direction is being estimated.
#[derive(Debug, Clone, PartialEq)]
pub struct Emitter {
    pub position: DVector<f64>,
}

impl Emitter {
    pub fn new(position: Vec<f64>) -> Self {
        Self {
            position: DVector::from_vec(position),
        }
    }
}

/// Which receiver pairs are differenced to form measurements.
///
/// Indices are 0-based in memory; files use 1-based indices.
#[derive(Debug, Clone, PartialEq)]
pub enum PairingScheme {
    /// Pairs `(ref, k)` for every `k != ref`, in ascending `k`.
    Reference { ref_index: usize },
    /// All pairs `(i, j)` with `i < j`, lexicographic.
    AllPairs,
    /// An explicit ordered list of `(i, j)` pairs, `i != j`.
    Explicit { pairs: Vec<(usize, usize)> },
}

impl PairingScheme {
    /// Resolve the scheme into the ordered pair list for `n` receivers.
    ///
    /// Checks index bounds, `i != j`, and rejects repeated ordered pairs.
    pub fn resolve(&self, n: usize) -> Result<Vec<(usize, usize)>> {
        match self {
            PairingScheme::Reference { ref_index } => {
                if *ref_index >= n {
                    return Err(Error::Scenario(format!(
                        "pairing ref_index {} out of range 1..={n}",
                        ref_index + 1
                    )));
                }
                Ok((0..n).filter(|k| k != ref_index).map(|k| (*ref_index, k)).collect())
            }
            PairingScheme::AllPairs => {
                let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
                for i in 0..n {
                    for j in (i + 1)..n {
                        pairs.push((i, j));
                    }
                }
                Ok(pairs)
            }
            PairingScheme::Explicit { pairs } => {
                let mut seen = std::collections::HashSet::new();
                for &(i, j) in pairs {
                    if i >= n || j >= n {
                        return Err(Error::Scenario(format!(
                            "pair ({}, {}) has an index out of range 1..={n}",
                            i + 1,
                            j + 1
                        )));
                    }
                    if i == j {
                        return Err(Error::Scenario(format!(
                            "pair ({}, {}) repeats a receiver index; i and j must differ",
                            i + 1,
                            j + 1
                        )));
                    }
                    if !seen.insert((i, j)) {
                        return Err(Error::Scenario(format!(
                            "pair ({}, {}) appears more than once",
                            i + 1,
                            j + 1
                        )));
                    }
                }
                Ok(pairs.clone())
            }
        }
    }
}

/// Measurement noise description.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseKind {
    /// No noise; measurements are returned unchanged.
    None,
    /// Independent per-measurement noise, Q = sigma^2 I.
    Iid { sigma: f64 },
    /// Per-receiver noise pushed through the differencing matrix, Q = sigma^2 P P^T.
    Differenced { sigma: f64 },
    /// An explicit M x M symmetric positive-definite covariance.
    Explicit { covariance: DMatrix<f64> },
}

/// Noise kind plus the seed that makes sampling reproducible.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    pub seed: u64,
}

impl NoiseModel {
    pub fn none() -> Self {
        Self { kind: NoiseKind::None, seed: 0 }
    }

    /// Per-measurement (or per-receiver, for `Differenced`) standard deviation,
    /// when the model is parametrized by one.
    pub fn sigma(&self) -> Option<f64> {
        match self.kind {
            NoiseKind::Iid { sigma } | NoiseKind::Differenced { sigma } => Some(sigma),
            _ => None,
        }
    }
}

/// Unit convention for measurement values.
///
/// Scaled mode drops the constant physical factors: frequency shifts carry no
/// f0/c and time shifts no 1/c. Physical mode multiplies them back in at the
/// model boundary only.
#[derive(Debug, Clone, PartialEq)]
pub enum UnitConvention {
    Scaled,
    Physical { f0: f64, c: f64 },
}

impl UnitConvention {
    /// Multiplier applied to scaled frequency shifts.
    pub fn fdoa_factor(&self) -> f64 {
        match self {
            UnitConvention::Scaled => 1.0,
            UnitConvention::Physical { f0, c } => f0 / c,
        }
    }

    /// Multiplier applied to scaled time shifts.
    pub fn tdoa_factor(&self) -> f64 {
        match self {
            UnitConvention::Scaled => 1.0,
            UnitConvention::Physical { c, .. } => 1.0 / c,
        }
    }
}

/// The full geometric configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub receivers: Vec<Receiver>,
    pub emitter: Option<Emitter>,
    pub pairing: PairingScheme,
    pub noise: NoiseModel,
    pub units: UnitConvention,
}

impl Scenario {
    pub fn receiver_count(&self) -> usize {
        self.receivers.len()
    }

    /// Spatial dimension, taken from the first receiver.
    pub fn dim(&self) -> usize {
        self.receivers.first().map_or(0, |r| r.position.len())
    }

    /// Mean of the receiver positions.
    pub fn centroid(&self) -> DVector<f64> {
        let d = self.dim();
        let mut c = DVector::zeros(d);
        for r in &self.receivers {
            c += &r.position;
        }
        c / self.receivers.len() as f64
    }

    /// N x D matrix of receiver positions (one row per receiver).
    pub fn positions(&self) -> DMatrix<f64> {
        let (n, d) = (self.receiver_count(), self.dim());
        DMatrix::from_fn(n, d, |i, j| self.receivers[i].position[j])
    }

    /// N x D matrix of receiver velocities.
    pub fn velocities(&self) -> DMatrix<f64> {
        let (n, d) = (self.receiver_count(), self.dim());
        DMatrix::from_fn(n, d, |i, j| self.receivers[i].velocity[j])
    }

    /// Resolved ordered pair list for this scenario's pairing scheme.
    pub fn pairs(&self) -> Result<Vec<(usize, usize)>> {
        self.pairing.resolve(self.receiver_count())
    }

    /// Unit vector from the receiver centroid toward the emitter.
    pub fn emitter_direction(&self) -> Option<DVector<f64>> {
        let e = self.emitter.as_ref()?;
        let rel = &e.position - self.centroid();
        let norm = rel.norm();
        if norm > 0.0 {
            Some(rel / norm)
        } else {
            None
        }
    }

    /// Distance from the receiver centroid to the emitter.
    pub fn emitter_range(&self) -> Option<f64> {
        let e = self.emitter.as_ref()?;
        Some((&e.position - self.centroid()).norm())
    }

    /// Far-field quality factor q = max_i ||x_i - centroid|| / ||x - centroid||.
    ///
    /// Small q means the array aperture is small relative to the emitter range
    /// and the far-field approximation is good. Returns infinity when the
    /// emitter sits on the centroid.
    pub fn farfield_quality(&self) -> Option<f64> {
        let e = self.emitter.as_ref()?;
        let c = self.centroid();
        let radius = self
            .receivers
            .iter()
            .map(|r| (&r.position - &c).norm())
            .fold(0.0, f64::max);
        let range = (&e.position - &c).norm();
        if range > 0.0 {
            Some(radius / range)
        } else {
            Some(f64::INFINITY)
        }
    }
}

/// Severity of a validation diagnostic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
    Info,
}

/// One validation finding.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub message: String,
}

impl Diagnostic {
    fn error(message: String) -> Self {
        Self { severity: Severity::Error, message }
    }
    fn warning(message: String) -> Self {
        Self { severity: Severity::Warning, message }
    }
    fn info(message: String) -> Self {
        Self { severity: Severity::Info, message }
    }
}

/// True when no diagnostic in the list is an error.
pub fn is_valid(diagnostics: &[Diagnostic]) -> bool {
    diagnostics.iter().all(|d| d.severity != Severity::Error)
}

/// Validate a scenario against every structural invariant.
///
/// Returns an empty error list exactly when all invariants hold. Warnings
/// flag conditions that degrade (but do not invalidate) downstream use:
/// a far-field quality factor above 0.1, or receivers sharing a velocity
/// vector. Centroid and quality factor are reported as info entries.
pub fn validate(scenario: &Scenario) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let n = scenario.receiver_count();

    if n < 2 {
        out.push(Diagnostic::error(format!(
            "scenario requires at least 2 receivers, got {n}"
        )));
    }

    let dim = scenario.dim();
    if n > 0 && dim != 2 && dim != 3 {
        out.push(Diagnostic::error(format!(
            "receiver dimension must be 2 or 3, got {dim}"
        )));
    }

    let mut dims_consistent = true;
    for (idx, r) in scenario.receivers.iter().enumerate() {
        if r.position.len() != dim || r.velocity.len() != dim {
            out.push(Diagnostic::error(format!(
                "receiver {}: position/velocity dimension mismatch (expected {dim})",
                idx + 1
            )));
            dims_consistent = false;
        }
        if r.position.iter().chain(r.velocity.iter()).any(|v| !v.is_finite()) {
            out.push(Diagnostic::error(format!(
                "receiver {}: non-finite component",
                idx + 1
            )));
        }
    }

    if let Some(e) = &scenario.emitter {
        if e.position.len() != dim {
            out.push(Diagnostic::error(format!(
                "emitter dimension mismatch (expected {dim}, got {})",
                e.position.len()
            )));
            dims_consistent = false;
        }
        if e.position.iter().any(|v| !v.is_finite()) {
            out.push(Diagnostic::error("emitter: non-finite component".to_string()));
        }
        if dims_consistent {
            for (idx, r) in scenario.receivers.iter().enumerate() {
                if (&e.position - &r.position).norm() == 0.0 {
                    out.push(Diagnostic::error(format!(
                        "emitter coincides with receiver {} (zero range)",
                        idx + 1
                    )));
                }
            }
        }
    }

    let pairs = match scenario.pairs() {
        Ok(p) => Some(p),
        Err(e) => {
            out.push(Diagnostic::error(e.to_string()));
            None
        }
    };

    match &scenario.noise.kind {
        NoiseKind::None => {}
        NoiseKind::Iid { sigma } | NoiseKind::Differenced { sigma } => {
            if !(*sigma >= 0.0) {
                out.push(Diagnostic::error(format!(
                    "noise sigma must be nonnegative, got {sigma}"
                )));
            }
        }
        NoiseKind::Explicit { covariance } => {
            if let Some(p) = &pairs {
                if covariance.nrows() != p.len() || covariance.ncols() != p.len() {
                    out.push(Diagnostic::error(format!(
                        "explicit covariance must be {m} x {m} for {m} pairs, got {r} x {c}",
                        m = p.len(),
                        r = covariance.nrows(),
                        c = covariance.ncols()
                    )));
                }
            }
            if let Some(msg) = spd_violation(covariance) {
                out.push(Diagnostic::error(format!("explicit covariance: {msg}")));
            }
        }
    }

    if let UnitConvention::Physical { f0, c } = &scenario.units {
        if !(*f0 > 0.0) {
            out.push(Diagnostic::error(format!("units.f0 must be positive, got {f0}")));
        }
        if !(*c > 0.0) {
            out.push(Diagnostic::error(format!("units.c must be positive, got {c}")));
        }
    }

    if dims_consistent && n >= 2 {
        for i in 0..n {
            for j in (i + 1)..n {
                let vi = &scenario.receivers[i].velocity;
                let vj = &scenario.receivers[j].velocity;
                if (vi - vj).norm() == 0.0 {
                    out.push(Diagnostic::warning(format!(
                        "receivers {} and {} have identical velocity vectors; \
                         FDOA row will be null after differencing",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }

        let c = scenario.centroid();
        out.push(Diagnostic::info(format!(
            "receiver centroid: [{}]",
            c.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(", ")
        )));

        if let Some(q) = scenario.farfield_quality() {
            if q > 0.1 {
                out.push(Diagnostic::warning(format!(
                    "far-field quality factor q = {q:.6} exceeds 0.1; \
                     the far-field approximation may be poor"
                )));
            }
            out.push(Diagnostic::info(format!("far-field quality factor q = {q:.6e}")));
        }
    }

    out
}

/// Returns a description of the first SPD violation, or `None` when the
/// matrix is symmetric (to 1e-12 relative) with minimum eigenvalue above
/// 1e-12 relative to the maximum.
pub(crate) fn spd_violation(q: &DMatrix<f64>) -> Option<String> {
    if q.nrows() != q.ncols() {
        return Some(format!("not square ({} x {})", q.nrows(), q.ncols()));
    }
    if q.iter().any(|v| !v.is_finite()) {
        return Some("non-finite entry".to_string());
    }
    let scale = q.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    for i in 0..q.nrows() {
        for j in (i + 1)..q.ncols() {
            if (q[(i, j)] - q[(j, i)]).abs() > 1e-12 * scale {
                return Some(format!("asymmetric at ({}, {})", i + 1, j + 1));
            }
        }
    }
    let eig = q.clone().symmetric_eigen();
    let max_eig = eig.eigenvalues.iter().fold(0.0f64, |a, v| a.max(*v));
    let min_eig = eig.eigenvalues.iter().fold(f64::INFINITY, |a, v| a.min(*v));
    if !(min_eig > 1e-12 * max_eig) {
        return Some(format!(
            "minimum eigenvalue {min_eig:.3e} not positive (max {max_eig:.3e})"
        ));
    }
    None
}

// ---------------------------------------------------------------------------
// File format
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    dim: usize,
    receivers: Vec<ReceiverFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    emitter: Option<EmitterFile>,
    pairing: PairingFile,
    noise: NoiseFile,
    units: UnitsFile,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReceiverFile {
    position: Vec<f64>,
    velocity: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EmitterFile {
    position: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PairingFile {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ref_index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pairs: Option<Vec<[usize; 2]>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NoiseFile {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sigma: Option<f64>,
    #[serde(rename = "Q", default, skip_serializing_if = "Option::is_none")]
    q: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    seed: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct UnitsFile {
    mode: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    f0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    c: Option<f64>,
}

fn parse_err(message: String) -> Error {
    Error::Parse { path: None, line: None, message }
}

fn scenario_from_file(file: ScenarioFile) -> Result<Scenario> {
    let dim = file.dim;
    let mut receivers = Vec::with_capacity(file.receivers.len());
    for (idx, r) in file.receivers.into_iter().enumerate() {
        if r.position.len() != dim {
            return Err(parse_err(format!(
                "receivers[{idx}].position has length {}, expected dim = {dim}",
                r.position.len()
            )));
        }
        if r.velocity.len() != dim {
            return Err(parse_err(format!(
                "receivers[{idx}].velocity has length {}, expected dim = {dim}",
                r.velocity.len()
            )));
        }
        receivers.push(Receiver::new(r.position, r.velocity));
    }

    let emitter = match file.emitter {
        None => None,
        Some(e) => {
            if e.position.len() != dim {
                return Err(parse_err(format!(
                    "emitter.position has length {}, expected dim = {dim}",
                    e.position.len()
                )));
            }
            Some(Emitter::new(e.position))
        }
    };

    let pairing = match file.pairing.kind.as_str() {
        "reference" => {
            let ref_index = file.pairing.ref_index.ok_or_else(|| {
                parse_err("pairing.ref_index is required for kind \"reference\"".to_string())
            })?;
            if ref_index == 0 {
                return Err(parse_err("pairing.ref_index is 1-based; 0 is invalid".to_string()));
            }
            PairingScheme::Reference { ref_index: ref_index - 1 }
        }
        "all_pairs" => PairingScheme::AllPairs,
        "explicit" => {
            let pairs = file.pairing.pairs.ok_or_else(|| {
                parse_err("pairing.pairs is required for kind \"explicit\"".to_string())
            })?;
            let mut converted = Vec::with_capacity(pairs.len());
            for (idx, [i, j]) in pairs.into_iter().enumerate() {
                if i == 0 || j == 0 {
                    return Err(parse_err(format!(
                        "pairing.pairs[{idx}] uses index 0; indices are 1-based"
                    )));
                }
                converted.push((i - 1, j - 1));
            }
            PairingScheme::Explicit { pairs: converted }
        }
        other => {
            return Err(parse_err(format!(
                "pairing.kind must be \"reference\", \"all_pairs\", or \"explicit\", got \"{other}\""
            )))
        }
    };

    let noise_kind = match file.noise.kind.as_str() {
        "none" => NoiseKind::None,
        "iid" => NoiseKind::Iid {
            sigma: file.noise.sigma.ok_or_else(|| {
                parse_err("noise.sigma is required for kind \"iid\"".to_string())
            })?,
        },
        "differenced" => NoiseKind::Differenced {
            sigma: file.noise.sigma.ok_or_else(|| {
                parse_err("noise.sigma is required for kind \"differenced\"".to_string())
            })?,
        },
        "explicit" => {
            let rows = file.noise.q.ok_or_else(|| {
                parse_err("noise.Q is required for kind \"explicit\"".to_string())
            })?;
            let m = rows.len();
            for (idx, row) in rows.iter().enumerate() {
                if row.len() != m {
                    return Err(parse_err(format!(
                        "noise.Q row {idx} has length {}, expected {m} (square matrix)",
                        row.len()
                    )));
                }
            }
            let covariance = DMatrix::from_fn(m, m, |i, j| rows[i][j]);
            NoiseKind::Explicit { covariance }
        }
        other => {
            return Err(parse_err(format!(
                "noise.kind must be \"none\", \"iid\", \"differenced\", or \"explicit\", got \"{other}\""
            )))
        }
    };
    let noise = NoiseModel { kind: noise_kind, seed: file.noise.seed };

    let units = match file.units.mode.as_str() {
        "scaled" => UnitConvention::Scaled,
        "physical" => UnitConvention::Physical {
            f0: file.units.f0.ok_or_else(|| {
                parse_err("units.f0 is required for mode \"physical\"".to_string())
            })?,
            c: file.units.c.ok_or_else(|| {
                parse_err("units.c is required for mode \"physical\"".to_string())
            })?,
        },
        other => {
            return Err(parse_err(format!(
                "units.mode must be \"scaled\" or \"physical\", got \"{other}\""
            )))
        }
    };

    Ok(Scenario { receivers, emitter, pairing, noise, units })
}

fn scenario_to_file(scenario: &Scenario) -> ScenarioFile {
    ScenarioFile {
        dim: scenario.dim(),
        receivers: scenario
            .receivers
            .iter()
            .map(|r| ReceiverFile {
                position: r.position.iter().copied().collect(),
                velocity: r.velocity.iter().copied().collect(),
            })
            .collect(),
        emitter: scenario.emitter.as_ref().map(|e| EmitterFile {
            position: e.position.iter().copied().collect(),
        }),
        pairing: match &scenario.pairing {
            PairingScheme::Reference { ref_index } => PairingFile {
                kind: "reference".to_string(),
                ref_index: Some(ref_index + 1),
                pairs: None,
            },
            PairingScheme::AllPairs => PairingFile {
                kind: "all_pairs".to_string(),
                ref_index: None,
                pairs: None,
            },
            PairingScheme::Explicit { pairs } => PairingFile {
                kind: "explicit".to_string(),
                ref_index: None,
                pairs: Some(pairs.iter().map(|&(i, j)| [i + 1, j + 1]).collect()),
            },
        },
        noise: match &scenario.noise.kind {
            NoiseKind::None => NoiseFile {
                kind: "none".to_string(),
                sigma: None,
                q: None,
                seed: scenario.noise.seed,
            },
            NoiseKind::Iid { sigma } => NoiseFile {
                kind: "iid".to_string(),
                sigma: Some(*sigma),
                q: None,
                seed: scenario.noise.seed,
            },
            NoiseKind::Differenced { sigma } => NoiseFile {
                kind: "differenced".to_string(),
                sigma: Some(*sigma),
                q: None,
                seed: scenario.noise.seed,
            },
            NoiseKind::Explicit { covariance } => NoiseFile {
                kind: "explicit".to_string(),
                sigma: None,
                q: Some(
                    (0..covariance.nrows())
                        .map(|i| (0..covariance.ncols()).map(|j| covariance[(i, j)]).collect())
                        .collect(),
                ),
                seed: scenario.noise.seed,
            },
        },
        units: match &scenario.units {
            UnitConvention::Scaled => UnitsFile { mode: "scaled".to_string(), f0: None, c: None },
            UnitConvention::Physical { f0, c } => UnitsFile {
                mode: "physical".to_string(),
                f0: Some(*f0),
                c: Some(*c),
            },
        },
    }
}

/// Parse a scenario from a JSON string.
pub fn scenario_from_json(json: &str) -> Result<Scenario> {
    let file: ScenarioFile = serde_json::from_str(json).map_err(|e| Error::Parse {
        path: None,
        line: Some(e.line()),
        message: e.to_string(),
    })?;
    scenario_from_file(file)
}

/// Serialize a scenario to pretty-printed JSON.
pub fn scenario_to_json(scenario: &Scenario) -> String {
    let mut json = serde_json::to_string_pretty(&scenario_to_file(scenario))
        .expect("scenario serialization cannot fail");
    json.push('\n');
    json
}

/// Load a scenario from a JSON file.
pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    scenario_from_json(&text).map_err(|e| match e {
        Error::Parse { line, message, .. } => Error::Parse {
            path: Some(path.to_path_buf()),
            line,
            message,
        },
        other => other,
    })
}

/// Save a scenario as a JSON file. `save` then `load` reproduces every field
/// bit-exactly for finite values.
pub fn save_scenario(scenario: &Scenario, path: &Path) -> Result<()> {
    fs::write(path, scenario_to_json(scenario)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_receiver_scenario() -> Scenario {
        Scenario {
            receivers: vec![
                Receiver::new(vec![1.0, 0.0], vec![0.0, 1.0]),
                Receiver::new(vec![-0.5, 0.8], vec![-0.9, -0.5]),
                Receiver::new(vec![-0.5, -0.8], vec![0.9, -0.5]),
            ],
            emitter: Some(Emitter::new(vec![1.0e6, 5.0e5])),
            pairing: PairingScheme::Reference { ref_index: 0 },
            noise: NoiseModel { kind: NoiseKind::Differenced { sigma: 0.01 }, seed: 42 },
            units: UnitConvention::Scaled,
        }
    }

    fn count(diags: &[Diagnostic], severity: Severity) -> usize {
        diags.iter().filter(|d| d.severity == severity).count()
    }

    #[test]
    fn valid_scenario_has_no_errors_or_warnings() {
        let diags = validate(&three_receiver_scenario());
        assert_eq!(count(&diags, Severity::Error), 0, "{diags:?}");
        assert_eq!(count(&diags, Severity::Warning), 0, "{diags:?}");
    }

    #[test]
    fn identical_velocities_warn_about_null_fdoa_row() {
        let mut s = three_receiver_scenario();
        s.receivers[1].velocity = s.receivers[0].velocity.clone();
        let diags = validate(&s);
        assert_eq!(count(&diags, Severity::Error), 0);
        assert!(diags
            .iter()
            .any(|d| d.severity == Severity::Warning
                && d.message.contains("FDOA row will be null after differencing")));
    }

    #[test]
    fn self_pair_is_an_error() {
        let mut s = three_receiver_scenario();
        s.pairing = PairingScheme::Explicit { pairs: vec![(1, 1)] };
        let diags = validate(&s);
        assert!(diags
            .iter()
            .any(|d| d.severity == Severity::Error && d.message.contains("(2, 2)")));
    }

    #[test]
    fn repeated_pair_is_an_error() {
        let mut s = three_receiver_scenario();
        s.pairing = PairingScheme::Explicit { pairs: vec![(0, 1), (0, 1)] };
        let diags = validate(&s);
        assert!(diags
            .iter()
            .any(|d| d.severity == Severity::Error && d.message.contains("more than once")));
    }

    #[test]
    fn coincident_emitter_is_an_error() {
        let mut s = three_receiver_scenario();
        s.emitter = Some(Emitter::new(vec![1.0, 0.0]));
        let diags = validate(&s);
        assert!(diags
            .iter()
            .any(|d| d.severity == Severity::Error && d.message.contains("coincides")));
    }

    #[test]
    fn near_emitter_warns_on_quality_factor() {
        let mut s = three_receiver_scenario();
        s.emitter = Some(Emitter::new(vec![3.0, 0.0]));
        let diags = validate(&s);
        assert_eq!(count(&diags, Severity::Error), 0);
        assert!(diags
            .iter()
            .any(|d| d.severity == Severity::Warning && d.message.contains("far-field quality")));
    }

    #[test]
    fn non_spd_covariance_is_an_error() {
        let mut s = three_receiver_scenario();
        s.noise.kind = NoiseKind::Explicit {
            covariance: DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]),
        };
        let diags = validate(&s);
        assert!(diags
            .iter()
            .any(|d| d.severity == Severity::Error && d.message.contains("eigenvalue")));
    }

    #[test]
    fn validate_is_pure() {
        let s = three_receiver_scenario();
        assert_eq!(validate(&s), validate(&s));
    }

    #[test]
    fn quality_factor_is_translation_covariant() {
        let s = three_receiver_scenario();
        let q0 = s.farfield_quality().unwrap();
        let shift = DVector::from_vec(vec![123.4, -56.7]);
        let mut t = s.clone();
        for r in &mut t.receivers {
            r.position += &shift;
        }
        t.emitter.as_mut().unwrap().position += &shift;
        let q1 = t.farfield_quality().unwrap();
        assert!((q0 - q1).abs() <= 1e-9 * q0.max(1e-300), "{q0} vs {q1}");
    }

    #[test]
    fn load_well_formed_scenario() {
        let json = r#"{
            "dim": 2,
            "receivers": [
                { "position": [1.0, 0.0], "velocity": [0.0, 1.0] },
                { "position": [-0.5, 0.8], "velocity": [-0.9, -0.5] },
                { "position": [-0.5, -0.8], "velocity": [0.9, -0.5] }
            ],
            "emitter": { "position": [1000.0, 500.0] },
            "pairing": { "kind": "reference", "ref_index": 1 },
            "noise": { "kind": "differenced", "sigma": 0.01, "seed": 42 },
            "units": { "mode": "scaled" }
        }"#;
        let s = scenario_from_json(json).unwrap();
        assert_eq!(s.receiver_count(), 3);
        assert_eq!(s.pairing, PairingScheme::Reference { ref_index: 0 });
        assert_eq!(s.noise.seed, 42);
    }

    #[test]
    fn missing_receivers_field_is_named_in_error() {
        let json = r#"{ "dim": 2, "pairing": { "kind": "all_pairs" },
                        "noise": { "kind": "none" }, "units": { "mode": "scaled" } }"#;
        let err = scenario_from_json(json).unwrap_err();
        assert!(err.to_string().contains("receivers"), "{err}");
    }

    #[test]
    fn unknown_field_is_rejected() {
        let json = r#"{
            "dim": 2,
            "receivers": [
                { "position": [1.0, 0.0], "velocity": [0.0, 1.0] },
                { "position": [-1.0, 0.0], "velocity": [0.0, -1.0] }
            ],
            "pairing": { "kind": "all_pairs" },
            "noise": { "kind": "none" },
            "units": { "mode": "scaled" },
            "extra": 1
        }"#;
        let err = scenario_from_json(json).unwrap_err();
        assert!(err.to_string().contains("extra"), "{err}");
    }

    #[test]
    fn physical_units_require_f0_and_c() {
        let json = r#"{
            "dim": 2,
            "receivers": [
                { "position": [1.0, 0.0], "velocity": [0.0, 1.0] },
                { "position": [-1.0, 0.0], "velocity": [0.0, -1.0] }
            ],
            "pairing": { "kind": "all_pairs" },
            "noise": { "kind": "none" },
            "units": { "mode": "physical", "f0": 1.0e9 }
        }"#;
        let err = scenario_from_json(json).unwrap_err();
        assert!(err.to_string().contains("units.c"), "{err}");
    }

    #[test]
    fn json_round_trip_is_identity() {
        let s = three_receiver_scenario();
        let round = scenario_from_json(&scenario_to_json(&s)).unwrap();
        assert_eq!(s, round);
    }

    #[test]
    fn all_pairs_resolution_is_lexicographic() {
        let pairs = PairingScheme::AllPairs.resolve(3).unwrap();
        assert_eq!(pairs, vec![(0, 1), (0, 2), (1, 2)]);
    }

    #[test]
    fn reference_resolution_skips_reference() {
        let pairs = PairingScheme::Reference { ref_index: 1 }.resolve(4).unwrap();
        assert_eq!(pairs, vec![(1, 0), (1, 2), (1, 3)]);
    }
}
