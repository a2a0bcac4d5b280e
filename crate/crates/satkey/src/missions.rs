//! Named mission scenarios and the studies built on top of them.
//!
//! A `MissionConfig` binds an orbit, a loss model (physical chain or an
//! empirical elevation-loss curve), a protocol, and security targets into one
//! JSON document. The study functions run the full pipeline — pass geometry,
//! loss profile, detection statistics, finite-block key length — over
//! elevation grids, loss offsets, altitude ladders, aperture/pointing maps,
//! and synthetic one-year pass schedules.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::detstats::{BlockStats, CountMode, DetStatsError};
use crate::finitekey::{FiniteKeyError, KeyResult, ProtocolParams, SecurityParams};
use crate::linkbudget::{
    loss_profile, scaled_empirical_profile, total_loss_db, EmpiricalCurve, LinkError, LossProfile,
    LossSample, OpticalChain,
};
use crate::orbit::{
    central_angle_for_elevation_deg, orbital_rate_rad_s, pass_profile,
    peak_elevation_for_offset_deg, GroundStation, OrbitError,
};
use crate::util::derive_seed;

// ----------------------------------------------------------------------------
// Constants
// ----------------------------------------------------------------------------

/// Geostationary altitude in kilometres.
pub const GEO_ALTITUDE_KM: f64 = 35_786.0;

/// Representative medium-Earth-orbit altitude in kilometres.
pub const MEO_MARKER_KM: f64 = 7_000.0;

/// Nightly observation window assumed by the synthetic schedules.
pub const NIGHT_SECONDS: f64 = 8.0 * 3600.0;

/// Days in the synthetic year.
pub const SCHEDULE_DAYS: u32 = 365;

// ----------------------------------------------------------------------------
// Errors
// ----------------------------------------------------------------------------

#[derive(Debug, thiserror::Error)]
pub enum MissionError {
    #[error("unknown preset '{0}' (available: cqt-sat, quarc-roks, qeyssat-uplink, qeyssat-downlink, highalt-tablev)")]
    UnknownPreset(String),
    #[error("unknown schedule preset '{0}' (available: mid-latitude)")]
    UnknownSchedulePreset(String),
    #[error("curve file '{0}' not found (not an embedded curve, and no such file on disk)")]
    CurveNotFound(String),
    #[error("study '{0}' needs a physical link model, but the config uses an empirical curve")]
    RequiresPhysicalLink(&'static str),
    #[error("axis '{0}' is empty")]
    EmptyAxis(&'static str),
    #[error("axis '{axis}' must be strictly increasing (violated at index {index})")]
    AxisNotIncreasing { axis: &'static str, index: usize },
    #[error("altitude {0} km below the 200 km study floor")]
    AltitudeBelowFloor(f64),
    #[error("QBER cutoff {0} outside (0, 0.5)")]
    BadCutoff(f64),
    #[error("pass schedule is empty")]
    EmptySchedule,
    #[error("time step {0} s must be positive")]
    BadTimeStep(f64),
    #[error("config parse error: {0}")]
    ConfigParse(#[from] serde_json::Error),
    #[error("config io error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Orbit(#[from] OrbitError),
    #[error(transparent)]
    Link(#[from] LinkError),
    #[error(transparent)]
    DetStats(#[from] DetStatsError),
    #[error(transparent)]
    FiniteKey(#[from] FiniteKeyError),
}

// ----------------------------------------------------------------------------
// Config
// ----------------------------------------------------------------------------

/// How the channel transmittance is obtained: a first-principles optical
/// chain, or an empirical elevation-loss curve with an additive offset.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum LinkModel {
    Physical {
        chain: OpticalChain,
    },
    Empirical {
        curve_file: String,
        #[serde(default)]
        offset_db: f64,
    },
}

/// One complete mission description; serializes to the JSON schema used by
/// the shipped presets.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MissionConfig {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub altitude_km: f64,
    pub ground_station: GroundStation,
    #[serde(default = "default_time_step")]
    pub time_step_s: f64,
    pub security: SecurityParams,
    pub protocol: ProtocolParams,
    pub link: LinkModel,
    #[serde(default)]
    pub count_mode: CountMode,
    /// Directory the config was loaded from; used to resolve curve files
    /// that are not embedded. Never serialized.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

fn default_time_step() -> f64 {
    1.0
}

const EMBEDDED_PRESETS: &[(&str, &str)] = &[
    ("cqt-sat", include_str!("../presets/cqt-sat.json")),
    ("quarc-roks", include_str!("../presets/quarc-roks.json")),
    (
        "qeyssat-uplink",
        include_str!("../presets/qeyssat-uplink.json"),
    ),
    (
        "qeyssat-downlink",
        include_str!("../presets/qeyssat-downlink.json"),
    ),
    (
        "highalt-tablev",
        include_str!("../presets/highalt-tablev.json"),
    ),
];

const EMBEDDED_CURVES: &[(&str, &str)] = &[
    (
        "micius-representative.csv",
        include_str!("../presets/curves/micius-representative.csv"),
    ),
    (
        "qeyssat-uplink.csv",
        include_str!("../presets/curves/qeyssat-uplink.csv"),
    ),
    (
        "qeyssat-downlink.csv",
        include_str!("../presets/curves/qeyssat-downlink.csv"),
    ),
];

/// Names of the presets compiled into the library.
pub fn preset_names() -> Vec<&'static str> {
    EMBEDDED_PRESETS.iter().map(|(name, _)| *name).collect()
}

impl MissionConfig {
    /// Load one of the compiled-in presets by name.
    pub fn builtin_preset(name: &str) -> Result<Self, MissionError> {
        let text = EMBEDDED_PRESETS
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, text)| *text)
            .ok_or_else(|| MissionError::UnknownPreset(name.to_string()))?;
        Self::from_json_str(text)
    }

    pub fn from_json_str(text: &str) -> Result<Self, MissionError> {
        let config: MissionConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    /// Read a config from disk, remembering its directory for curve lookup.
    pub fn load(path: &Path) -> Result<Self, MissionError> {
        let text = std::fs::read_to_string(path)?;
        let mut config = Self::from_json_str(&text)?;
        config.base_dir = path.parent().map(Path::to_path_buf);
        Ok(config)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialize")
    }

    /// First 16 hex characters of the SHA-256 of the canonical JSON form.
    pub fn config_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.to_json_string().as_bytes());
        let digest = hasher.finalize();
        let mut hex = String::with_capacity(16);
        for byte in digest.iter().take(8) {
            hex.push_str(&format!("{byte:02x}"));
        }
        hex
    }

    pub fn validate(&self) -> Result<(), MissionError> {
        if self.time_step_s <= 0.0 || !self.time_step_s.is_finite() {
            return Err(MissionError::BadTimeStep(self.time_step_s));
        }
        self.security.validate()?;
        self.protocol.validate()?;
        match &self.link {
            LinkModel::Physical { chain } => {
                // A zenith evaluation exercises every term of the chain.
                total_loss_db(chain, 90.0, self.altitude_km)?;
            }
            LinkModel::Empirical { curve_file, .. } => {
                self.resolve_curve(curve_file)?;
            }
        }
        Ok(())
    }

    /// Parse a curve by name: embedded curves first, then the literal path,
    /// then relative to the config's own directory.
    fn resolve_curve(&self, file: &str) -> Result<EmpiricalCurve, MissionError> {
        if let Some((_, text)) = EMBEDDED_CURVES.iter().find(|(name, _)| *name == file) {
            return Ok(EmpiricalCurve::from_csv_str(text)?);
        }
        let direct = Path::new(file);
        if direct.is_file() {
            return Ok(EmpiricalCurve::from_csv_str(&std::fs::read_to_string(
                direct,
            )?)?);
        }
        if let Some(base) = &self.base_dir {
            let joined = base.join(file);
            if joined.is_file() {
                return Ok(EmpiricalCurve::from_csv_str(&std::fs::read_to_string(
                    joined,
                )?)?);
            }
        }
        Err(MissionError::CurveNotFound(file.to_string()))
    }

    /// Loss in dB at one elevation, by whichever link model is configured.
    fn loss_at(&self, elevation_deg: f64) -> Result<f64, MissionError> {
        match &self.link {
            LinkModel::Physical { chain } => {
                Ok(total_loss_db(chain, elevation_deg, self.altitude_km)?)
            }
            LinkModel::Empirical {
                curve_file,
                offset_db,
            } => {
                let curve = self.resolve_curve(curve_file)?;
                Ok(curve.interpolate(elevation_deg)? + offset_db)
            }
        }
    }
}

// ----------------------------------------------------------------------------
// Single pass
// ----------------------------------------------------------------------------

/// Result of running the full pipeline on one pass.
#[derive(Debug, Clone, Serialize)]
pub struct PassOutcome {
    pub max_elevation_deg: f64,
    /// Usable (above-mask) duration in seconds.
    pub duration_s: f64,
    /// Best link loss seen during the pass.
    pub min_loss_db: Option<f64>,
    /// Measured key-basis error rate of the block.
    pub qber: Option<f64>,
    /// Sifted key-basis detections.
    pub raw_bits: f64,
    pub stats: BlockStats,
    pub key: KeyResult,
}

/// Time-resolved link loss for one pass of the given peak elevation: orbit
/// geometry clipped to the ground station's visibility window, evaluated
/// through the configured physical chain or empirical curve, plus an
/// optional flat offset in dB.
pub fn pass_loss_profile(
    config: &MissionConfig,
    max_elevation_deg: f64,
    extra_loss_db: f64,
) -> Result<LossProfile, MissionError> {
    let pass = pass_profile(config.altitude_km, max_elevation_deg, config.time_step_s)?;
    let visible = pass.visible_window(config.ground_station.min_elevation_deg);
    let profile = match &config.link {
        LinkModel::Physical { chain } => loss_profile(chain, &visible)?,
        LinkModel::Empirical {
            curve_file,
            offset_db,
        } => {
            let curve = config.resolve_curve(curve_file)?;
            scaled_empirical_profile(&curve, *offset_db, &visible)?
        }
    };
    Ok(if extra_loss_db != 0.0 {
        profile.with_offset_db(extra_loss_db)
    } else {
        profile
    })
}

fn outcome_from_profile(
    config: &MissionConfig,
    max_elevation_deg: f64,
    profile: &LossProfile,
    mode: CountMode,
) -> Result<PassOutcome, MissionError> {
    let stats = config.protocol.block_stats(profile, mode)?;
    let key = config.protocol.secret_key(&stats, &config.security)?;
    Ok(PassOutcome {
        max_elevation_deg,
        duration_s: profile.samples.len() as f64 * profile.time_step_s,
        min_loss_db: profile.min_loss_db(),
        qber: stats.qber_x(),
        raw_bits: stats.n_x_total(),
        stats,
        key,
    })
}

/// Run the full pipeline — geometry, loss, counts, key — for a single pass
/// of the given peak elevation, with an optional extra loss in dB.
pub fn run_pass(
    config: &MissionConfig,
    max_elevation_deg: f64,
    extra_loss_db: f64,
) -> Result<PassOutcome, MissionError> {
    config.validate()?;
    let profile = pass_loss_profile(config, max_elevation_deg, extra_loss_db)?;
    outcome_from_profile(config, max_elevation_deg, &profile, config.count_mode)
}

// ----------------------------------------------------------------------------
// Study plumbing
// ----------------------------------------------------------------------------

/// Reproducibility stamp carried by every study output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: Option<u64>,
    pub version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command_line: Option<String>,
}

impl Provenance {
    fn new(config: &MissionConfig) -> Self {
        Provenance {
            config_hash: config.config_hash(),
            seed: match config.count_mode {
                CountMode::Sampled { seed } => Some(seed),
                CountMode::Expected => None,
            },
            version: env!("CARGO_PKG_VERSION").to_string(),
            command_line: None,
        }
    }
}

/// One grid point of a study.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyRow {
    pub x: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skl_bits: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_bits: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qber: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss_db: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain_db: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub passes_total: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub passes_kept: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skl_sum_bits: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key: Option<KeyResult>,
}

impl StudyRow {
    fn empty(x: f64) -> Self {
        StudyRow {
            x,
            y: None,
            band: None,
            skl_bits: None,
            raw_bits: None,
            qber: None,
            loss_db: None,
            gain_db: None,
            duration_s: None,
            passes_total: None,
            passes_kept: None,
            skl_sum_bits: None,
            key: None,
        }
    }
}

/// A study: axis names, one row per grid point, and provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyResult {
    pub study: String,
    pub x_name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_name: Option<String>,
    pub provenance: Provenance,
    pub rows: Vec<StudyRow>,
}

impl StudyResult {
    /// Axis sanity: x strictly increasing within each y group, y groups
    /// strictly increasing, one record per grid point.
    pub fn validate(&self) -> Result<(), MissionError> {
        if self.rows.is_empty() {
            return Err(MissionError::EmptyAxis("rows"));
        }
        let mut prev_y: Option<f64> = None;
        let mut prev_x: Option<f64> = None;
        for (i, row) in self.rows.iter().enumerate() {
            let same_group = match (row.y, prev_y) {
                (Some(y), Some(py)) => {
                    if y < py {
                        return Err(MissionError::AxisNotIncreasing {
                            axis: "y",
                            index: i,
                        });
                    }
                    y == py
                }
                (None, _) => true,
                (Some(_), None) => i != 0,
            };
            if same_group && i > 0 {
                if let Some(px) = prev_x {
                    if row.x <= px {
                        return Err(MissionError::AxisNotIncreasing {
                            axis: "x",
                            index: i,
                        });
                    }
                }
            }
            prev_x = Some(row.x);
            prev_y = row.y.or(prev_y);
        }
        Ok(())
    }

    /// CSV with a `#`-comment metadata header; only columns that carry data
    /// appear.
    pub fn write_csv(&self, out: &mut impl std::io::Write) -> std::io::Result<()> {
        writeln!(out, "# study: {}", self.study)?;
        writeln!(out, "# config_hash: {}", self.provenance.config_hash)?;
        match self.provenance.seed {
            Some(seed) => writeln!(out, "# seed: {seed}")?,
            None => writeln!(out, "# seed: none")?,
        }
        writeln!(out, "# version: {}", self.provenance.version)?;
        if let Some(cmd) = &self.provenance.command_line {
            writeln!(out, "# command_line: {cmd}")?;
        }
        let has = |f: &dyn Fn(&StudyRow) -> bool| self.rows.iter().any(f);
        let with_band = has(&|r| r.band.is_some());
        let with_skl = has(&|r| r.skl_bits.is_some());
        let with_raw = has(&|r| r.raw_bits.is_some());
        let with_qber = has(&|r| r.qber.is_some());
        let with_loss = has(&|r| r.loss_db.is_some());
        let with_gain = has(&|r| r.gain_db.is_some());
        let with_duration = has(&|r| r.duration_s.is_some());
        let with_passes = has(&|r| r.passes_total.is_some());
        let with_skl_sum = has(&|r| r.skl_sum_bits.is_some());

        let mut header = self.x_name.clone();
        if let Some(y_name) = &self.y_name {
            header.push(',');
            header.push_str(y_name);
        }
        for (on, name) in [
            (with_band, "band"),
            (with_skl, "skl_bits"),
            (with_raw, "raw_bits"),
            (with_qber, "qber"),
            (with_loss, "loss_db"),
            (with_gain, "gain_db"),
            (with_duration, "duration_s"),
            (with_passes, "passes_total"),
            (with_passes, "passes_kept"),
            (with_skl_sum, "skl_sum_bits"),
        ] {
            if on {
                header.push(',');
                header.push_str(name);
            }
        }
        writeln!(out, "{header}")?;

        fn push_f64(line: &mut String, value: Option<f64>) {
            line.push(',');
            if let Some(v) = value {
                line.push_str(&format!("{v}"));
            }
        }
        fn push_u64(line: &mut String, value: Option<u64>) {
            line.push(',');
            if let Some(v) = value {
                line.push_str(&format!("{v}"));
            }
        }
        for row in &self.rows {
            let mut line = format!("{}", row.x);
            if self.y_name.is_some() {
                push_f64(&mut line, row.y);
            }
            if with_band {
                line.push(',');
                line.push_str(row.band.as_deref().unwrap_or(""));
            }
            if with_skl {
                push_u64(&mut line, row.skl_bits);
            }
            if with_raw {
                push_f64(&mut line, row.raw_bits);
            }
            if with_qber {
                push_f64(&mut line, row.qber);
            }
            if with_loss {
                push_f64(&mut line, row.loss_db);
            }
            if with_gain {
                push_f64(&mut line, row.gain_db);
            }
            if with_duration {
                push_f64(&mut line, row.duration_s);
            }
            if with_passes {
                push_u64(&mut line, row.passes_total);
                push_u64(&mut line, row.passes_kept);
            }
            if with_skl_sum {
                push_u64(&mut line, row.skl_sum_bits);
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("study serialize")
    }
}

fn check_axis(values: &[f64], axis: &'static str) -> Result<(), MissionError> {
    if values.is_empty() {
        return Err(MissionError::EmptyAxis(axis));
    }
    for (i, pair) in values.windows(2).enumerate() {
        if pair[1] <= pair[0] {
            return Err(MissionError::AxisNotIncreasing { axis, index: i + 1 });
        }
    }
    Ok(())
}

/// Per-point count mode: sampled studies derive one child seed per grid
/// point so points are independent but reproducible.
fn point_mode(mode: CountMode, index: u64) -> CountMode {
    match mode {
        CountMode::Expected => CountMode::Expected,
        CountMode::Sampled { seed } => CountMode::Sampled {
            seed: derive_seed(seed, index),
        },
    }
}

// ----------------------------------------------------------------------------
// Studies
// ----------------------------------------------------------------------------

/// Secret key length over a grid of peak elevations and extra-loss offsets.
/// One curve (one y group) per offset.
pub fn elevation_sweep(
    config: &MissionConfig,
    elevations_deg: &[f64],
    extra_losses_db: &[f64],
) -> Result<StudyResult, MissionError> {
    config.validate()?;
    check_axis(elevations_deg, "max_elevation_deg")?;
    check_axis(extra_losses_db, "extra_loss_db")?;
    let mut rows = Vec::with_capacity(elevations_deg.len() * extra_losses_db.len());
    let mut index = 0u64;
    for &offset in extra_losses_db {
        for &elevation in elevations_deg {
            let profile = pass_loss_profile(config, elevation, offset)?;
            let outcome = outcome_from_profile(
                config,
                elevation,
                &profile,
                point_mode(config.count_mode, index),
            )?;
            rows.push(StudyRow {
                y: Some(offset),
                skl_bits: Some(outcome.key.secret_key_length),
                raw_bits: Some(outcome.raw_bits),
                qber: outcome.qber,
                loss_db: outcome.min_loss_db,
                duration_s: Some(outcome.duration_s),
                key: Some(outcome.key),
                ..StudyRow::empty(elevation)
            });
            index += 1;
        }
    }
    let result = StudyResult {
        study: "elevation_sweep".to_string(),
        x_name: "max_elevation_deg".to_string(),
        y_name: Some("extra_loss_db".to_string()),
        provenance: Provenance::new(config),
        rows,
    };
    result.validate()?;
    Ok(result)
}

/// Altitude band label used by the altitude studies.
pub fn altitude_band(altitude_km: f64) -> &'static str {
    if altitude_km < 450.0 {
        "VLEO"
    } else if altitude_km < 2000.0 {
        "LEO"
    } else if altitude_km < GEO_ALTITUDE_KM {
        "MEO"
    } else {
        "GEO"
    }
}

/// Zenith link loss per orbital altitude for the configured physical chain.
pub fn altitude_study(
    config: &MissionConfig,
    altitudes_km: &[f64],
) -> Result<StudyResult, MissionError> {
    config.validate()?;
    check_axis(altitudes_km, "altitude_km")?;
    let chain = match &config.link {
        LinkModel::Physical { chain } => chain,
        LinkModel::Empirical { .. } => {
            return Err(MissionError::RequiresPhysicalLink("altitude_study"))
        }
    };
    let mut rows = Vec::with_capacity(altitudes_km.len());
    for &altitude in altitudes_km {
        if altitude < 200.0 {
            return Err(MissionError::AltitudeBelowFloor(altitude));
        }
        rows.push(StudyRow {
            band: Some(altitude_band(altitude).to_string()),
            loss_db: Some(total_loss_db(chain, 90.0, altitude)?),
            ..StudyRow::empty(altitude)
        });
    }
    let result = StudyResult {
        study: "altitude_study".to_string(),
        x_name: "altitude_km".to_string(),
        y_name: None,
        provenance: Provenance::new(config),
        rows,
    };
    result.validate()?;
    Ok(result)
}

/// Zenith link gain (negative loss) over a transmitter-aperture x
/// pointing-error grid at a fixed altitude. Long-format heat map.
///
/// When the template chain pins an explicit divergence, it is rescaled with
/// aperture as theta(D) = theta_ref * D_ref / D (diffraction-limited
/// scaling); chains without an explicit divergence recompute it from the
/// waist directly.
pub fn tradeoff_map(
    config: &MissionConfig,
    apertures_m: &[f64],
    pointing_errors_urad: &[f64],
    altitude_km: f64,
) -> Result<StudyResult, MissionError> {
    config.validate()?;
    check_axis(apertures_m, "tx_aperture_m")?;
    check_axis(pointing_errors_urad, "pointing_jitter_urad")?;
    let base = match &config.link {
        LinkModel::Physical { chain } => chain,
        LinkModel::Empirical { .. } => {
            return Err(MissionError::RequiresPhysicalLink("tradeoff_map"))
        }
    };
    let mut rows = Vec::with_capacity(apertures_m.len() * pointing_errors_urad.len());
    for &aperture in apertures_m {
        for &pointing in pointing_errors_urad {
            let mut chain = base.clone();
            chain.tx_aperture_m = aperture;
            if let Some(theta_ref) = base.divergence_urad {
                chain.divergence_urad = Some(theta_ref * base.tx_aperture_m / aperture);
            }
            chain.pointing_jitter_urad = pointing;
            let loss = total_loss_db(&chain, 90.0, altitude_km)?;
            rows.push(StudyRow {
                y: Some(pointing),
                gain_db: Some(-loss),
                loss_db: Some(loss),
                ..StudyRow::empty(aperture)
            });
        }
    }
    // Long-format rows are emitted aperture-major; restate as y-major groups
    // for the axis invariant (y = pointing error defines the curve family).
    rows.sort_by(|a, b| {
        (a.y.unwrap_or(0.0), a.x)
            .partial_cmp(&(b.y.unwrap_or(0.0), b.x))
            .expect("finite grid")
    });
    let result = StudyResult {
        study: "tradeoff_map".to_string(),
        x_name: "tx_aperture_m".to_string(),
        y_name: Some("pointing_jitter_urad".to_string()),
        provenance: Provenance::new(config),
        rows,
    };
    result.validate()?;
    Ok(result)
}

// ----------------------------------------------------------------------------
// Year accumulation
// ----------------------------------------------------------------------------

/// One entry of a synthetic pass schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduledPass {
    pub day: u32,
    pub max_elevation_deg: f64,
    /// For stationary (geostationary) links: dwell time at the fixed
    /// elevation instead of an orbital pass.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stationary_dwell_s: Option<f64>,
}

/// Synthetic one-year nightly pass schedule.
///
/// Non-geostationary orbits get a fixed number of nightly passes scaled by
/// the orbital period (clamped to 1..=6, about 4 per night at 500 km), each
/// with a peak elevation drawn by sampling the cross-track offset uniformly
/// up to the angle where a pass would just clear `min_elevation_deg`. At the
/// geostationary altitude the schedule collapses to one continuous dwell at
/// the zenith covering a year of nights.
pub fn pass_schedule(
    altitude_km: f64,
    ogs_latitude_mode: &str,
    min_elevation_deg: f64,
    seed: u64,
) -> Result<Vec<ScheduledPass>, MissionError> {
    if ogs_latitude_mode != "mid-latitude" {
        return Err(MissionError::UnknownSchedulePreset(
            ogs_latitude_mode.to_string(),
        ));
    }
    if (altitude_km - GEO_ALTITUDE_KM).abs() < 0.5 {
        return Ok(vec![ScheduledPass {
            day: 0,
            max_elevation_deg: 90.0,
            stationary_dwell_s: Some(SCHEDULE_DAYS as f64 * NIGHT_SECONDS),
        }]);
    }
    let reference_rate = orbital_rate_rad_s(500.0)?;
    let rate = orbital_rate_rad_s(altitude_km)?;
    let per_night = ((4.0 * rate / reference_rate).round() as i64).clamp(1, 6) as u32;
    let beta_max = central_angle_for_elevation_deg(min_elevation_deg, altitude_km)?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut schedule = Vec::with_capacity((SCHEDULE_DAYS * per_night) as usize);
    for day in 0..SCHEDULE_DAYS {
        for _ in 0..per_night {
            let offset = rng.gen_range(0.0..beta_max);
            let peak = peak_elevation_for_offset_deg(offset, altitude_km)?;
            schedule.push(ScheduledPass {
                day,
                max_elevation_deg: peak,
                stationary_dwell_s: None,
            });
        }
    }
    Ok(schedule)
}

/// Totals of a simulated year of passes.
#[derive(Debug, Clone, Serialize)]
pub struct YearAccumulation {
    /// Sifted key-basis detections summed over the kept passes.
    pub raw_bits: f64,
    /// Count-weighted mean QBER over every pass, before the cutoff filter.
    pub mean_qber: Option<f64>,
    /// Key length of the pooled block built from the kept passes.
    pub skl_bits: u64,
    /// Per-pass key lengths summed over the kept passes.
    pub skl_sum_bits: u64,
    pub passes_total: u64,
    pub passes_kept: u64,
    /// Mean key-basis block size per pass; small values flag that per-pass
    /// QBER estimates (and hence the cutoff) are statistically shaky.
    pub mean_pass_block: f64,
    pub key: Option<KeyResult>,
}

/// Accumulate a year of passes, discarding any pass whose measured key-basis
/// QBER exceeds `qber_cutoff`, and evaluate the secret key on the pooled
/// block as well as pass-by-pass.
pub fn accumulate_year(
    config: &MissionConfig,
    schedule: &[ScheduledPass],
    qber_cutoff: f64,
) -> Result<YearAccumulation, MissionError> {
    config.validate()?;
    if schedule.is_empty() {
        return Err(MissionError::EmptySchedule);
    }
    if !(qber_cutoff > 0.0 && qber_cutoff < 0.5) {
        return Err(MissionError::BadCutoff(qber_cutoff));
    }
    let mut pooled: Option<BlockStats> = None;
    let mut raw_bits = 0.0;
    let mut skl_sum_bits = 0u64;
    let mut kept = 0u64;
    let mut n_all = 0.0;
    let mut m_all = 0.0;
    for (index, pass) in schedule.iter().enumerate() {
        let mode = point_mode(config.count_mode, index as u64);
        let profile = match pass.stationary_dwell_s {
            Some(dwell) => LossProfile {
                time_step_s: dwell,
                samples: vec![LossSample {
                    time_s: 0.0,
                    elevation_deg: pass.max_elevation_deg,
                    loss_db: config.loss_at(pass.max_elevation_deg)?,
                }],
            },
            None => pass_loss_profile(config, pass.max_elevation_deg, 0.0)?,
        };
        let stats = config.protocol.block_stats(&profile, mode)?;
        n_all += stats.n_x_total();
        m_all += stats.m_x_total();
        let qber = match stats.qber_x() {
            Some(q) => q,
            None => continue, // nothing detected: nothing to keep or filter
        };
        if qber > qber_cutoff {
            continue;
        }
        raw_bits += stats.n_x_total();
        let key = config.protocol.secret_key(&stats, &config.security)?;
        skl_sum_bits += key.secret_key_length;
        kept += 1;
        match pooled.as_mut() {
            Some(block) => block.merge(&stats),
            None => pooled = Some(stats),
        }
    }
    let mean_qber = if n_all > 0.0 {
        Some(m_all / n_all)
    } else {
        None
    };
    let (skl_bits, key) = match &pooled {
        Some(block) => {
            let key = config.protocol.secret_key(block, &config.security)?;
            (key.secret_key_length, Some(key))
        }
        None => (0, None),
    };
    Ok(YearAccumulation {
        raw_bits,
        mean_qber,
        skl_bits,
        skl_sum_bits,
        passes_total: schedule.len() as u64,
        passes_kept: kept,
        mean_pass_block: n_all / schedule.len() as f64,
        key,
    })
}

/// Year accumulation across an altitude ladder: one synthetic schedule per
/// altitude (child seed per rung), one row per altitude.
pub fn accumulation_study(
    config: &MissionConfig,
    altitudes_km: &[f64],
    qber_cutoff: f64,
    schedule_preset: &str,
    seed: u64,
) -> Result<StudyResult, MissionError> {
    config.validate()?;
    check_axis(altitudes_km, "altitude_km")?;
    let mut rows = Vec::with_capacity(altitudes_km.len());
    for (index, &altitude) in altitudes_km.iter().enumerate() {
        if altitude < 200.0 {
            return Err(MissionError::AltitudeBelowFloor(altitude));
        }
        let mut rung = config.clone();
        rung.altitude_km = altitude;
        let schedule = pass_schedule(
            altitude,
            schedule_preset,
            config.ground_station.min_elevation_deg,
            derive_seed(seed, index as u64),
        )?;
        let year = accumulate_year(&rung, &schedule, qber_cutoff)?;
        rows.push(StudyRow {
            band: Some(altitude_band(altitude).to_string()),
            skl_bits: Some(year.skl_bits),
            raw_bits: Some(year.raw_bits),
            qber: year.mean_qber,
            passes_total: Some(year.passes_total),
            passes_kept: Some(year.passes_kept),
            skl_sum_bits: Some(year.skl_sum_bits),
            key: year.key,
            ..StudyRow::empty(altitude)
        });
    }
    let mut provenance = Provenance::new(config);
    provenance.seed = Some(seed);
    let result = StudyResult {
        study: "accumulate_year".to_string(),
        x_name: "altitude_km".to_string(),
        y_name: None,
        provenance,
        rows,
    };
    result.validate()?;
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_load_and_validate() {
        for name in preset_names() {
            let config = MissionConfig::builtin_preset(name).unwrap();
            assert_eq!(config.name, name, "preset name should match its key");
            config.validate().unwrap();
        }
        assert!(matches!(
            MissionConfig::builtin_preset("no-such-mission"),
            Err(MissionError::UnknownPreset(_))
        ));
    }

    #[test]
    fn preset_round_trip_is_a_fixpoint() {
        for name in preset_names() {
            let config = MissionConfig::builtin_preset(name).unwrap();
            let emitted = config.to_json_string();
            let reparsed = MissionConfig::from_json_str(&emitted).unwrap();
            assert_eq!(
                emitted,
                reparsed.to_json_string(),
                "parse -> emit must be a fixpoint for {name}"
            );
        }
    }

    #[test]
    fn config_hash_tracks_content() {
        let a = MissionConfig::builtin_preset("cqt-sat").unwrap();
        let mut b = a.clone();
        assert_eq!(a.config_hash(), b.config_hash());
        b.altitude_km = 501.0;
        assert_ne!(a.config_hash(), b.config_hash());
        assert_eq!(a.config_hash().len(), 16);
    }

    #[test]
    fn sweep_single_point_matches_run_pass() {
        let config = MissionConfig::builtin_preset("quarc-roks").unwrap();
        let study = elevation_sweep(&config, &[70.0], &[0.0]).unwrap();
        let single = run_pass(&config, 70.0, 0.0).unwrap();
        assert_eq!(study.rows.len(), 1);
        assert_eq!(
            study.rows[0].skl_bits,
            Some(single.key.secret_key_length),
            "one-point sweep must agree with run_pass"
        );
        assert_eq!(study.rows[0].raw_bits, Some(single.raw_bits));
    }

    #[test]
    fn sweep_axes_are_validated() {
        let config = MissionConfig::builtin_preset("quarc-roks").unwrap();
        assert!(matches!(
            elevation_sweep(&config, &[], &[0.0]),
            Err(MissionError::EmptyAxis(_))
        ));
        assert!(matches!(
            elevation_sweep(&config, &[30.0, 30.0], &[0.0]),
            Err(MissionError::AxisNotIncreasing { .. })
        ));
    }

    #[test]
    fn altitude_bands_partition_the_ladder() {
        assert_eq!(altitude_band(300.0), "VLEO");
        assert_eq!(altitude_band(500.0), "LEO");
        assert_eq!(altitude_band(MEO_MARKER_KM), "MEO");
        assert_eq!(altitude_band(GEO_ALTITUDE_KM), "GEO");
    }

    #[test]
    fn altitude_study_reports_monotone_zenith_loss() {
        let config = MissionConfig::builtin_preset("highalt-tablev").unwrap();
        let altitudes = [
            300.0,
            500.0,
            1000.0,
            MEO_MARKER_KM,
            20000.0,
            GEO_ALTITUDE_KM,
        ];
        let study = altitude_study(&config, &altitudes).unwrap();
        assert_eq!(study.rows.len(), altitudes.len());
        for pair in study.rows.windows(2) {
            assert!(
                pair[1].loss_db.unwrap() > pair[0].loss_db.unwrap(),
                "zenith loss must grow with altitude"
            );
        }
        let empirical = MissionConfig::builtin_preset("quarc-roks").unwrap();
        assert!(matches!(
            altitude_study(&empirical, &altitudes),
            Err(MissionError::RequiresPhysicalLink(_))
        ));
    }

    #[test]
    fn tradeoff_anchor_matches_reference_chain_loss() {
        // Frozen zenith total for the reference chain at 500 km:
        // 22.108547401 (diffraction) + 0.843384071 (pointing) + 3 (atm)
        // = 25.951931472 dB.
        let config = MissionConfig::builtin_preset("highalt-tablev").unwrap();
        let study = tradeoff_map(&config, &[0.05, 0.1, 0.3], &[1.0, 2.5, 5.0], 500.0).unwrap();
        let anchor = study
            .rows
            .iter()
            .find(|r| r.x == 0.1 && r.y == Some(2.5))
            .expect("anchor cell present");
        let gain = anchor.gain_db.unwrap();
        assert!(
            (gain + 25.951931472).abs() < 1e-6,
            "expected -25.951931472 dB, got {gain}"
        );
    }

    #[test]
    fn tradeoff_scales_divergence_with_aperture() {
        let config = MissionConfig::builtin_preset("highalt-tablev").unwrap();
        let study = tradeoff_map(&config, &[0.1, 0.2], &[2.5], 500.0).unwrap();
        // Doubling the aperture halves the divergence; diffraction improves
        // but pointing loss worsens. Both effects must be visible against a
        // fixed-divergence recomputation.
        let small = study.rows.iter().find(|r| r.x == 0.1).unwrap();
        let large = study.rows.iter().find(|r| r.x == 0.2).unwrap();
        assert!(
            large.gain_db.unwrap() > small.gain_db.unwrap(),
            "at 2.5 urad the larger aperture should still win"
        );
    }

    #[test]
    fn schedule_is_deterministic_and_paced() {
        let a = pass_schedule(500.0, "mid-latitude", 10.0, 7).unwrap();
        let b = pass_schedule(500.0, "mid-latitude", 10.0, 7).unwrap();
        assert_eq!(a, b, "same seed must give the same schedule");
        let c = pass_schedule(500.0, "mid-latitude", 10.0, 8).unwrap();
        assert_ne!(a, c, "different seed should differ");
        let per_day = a.len() as f64 / SCHEDULE_DAYS as f64;
        assert!(
            (2.0..=6.0).contains(&per_day),
            "mean passes per day {per_day} outside the documented range"
        );
        for pass in &a {
            assert!(pass.max_elevation_deg >= 10.0 - 1e-6);
            assert!(pass.max_elevation_deg <= 90.0);
        }
        assert!(matches!(
            pass_schedule(500.0, "equatorial", 10.0, 7),
            Err(MissionError::UnknownSchedulePreset(_))
        ));
    }

    #[test]
    fn geo_schedule_is_one_stationary_dwell() {
        let schedule = pass_schedule(GEO_ALTITUDE_KM, "mid-latitude", 10.0, 3).unwrap();
        assert_eq!(schedule.len(), 1);
        assert_eq!(schedule[0].max_elevation_deg, 90.0);
        let dwell = schedule[0].stationary_dwell_s.unwrap();
        assert!((dwell - 365.0 * 8.0 * 3600.0).abs() < 1e-6);
    }

    #[test]
    fn accumulation_filters_noisy_passes() {
        let config = MissionConfig::builtin_preset("quarc-roks").unwrap();
        let schedule = vec![
            ScheduledPass {
                day: 0,
                max_elevation_deg: 85.0,
                stationary_dwell_s: None,
            },
            ScheduledPass {
                day: 1,
                max_elevation_deg: 40.0,
                stationary_dwell_s: None,
            },
        ];
        let generous = accumulate_year(&config, &schedule, 0.11).unwrap();
        assert_eq!(generous.passes_kept, 2);
        assert!(generous.raw_bits > 0.0);
        assert!(generous.skl_bits > 0);
        // A cutoff below the intrinsic error floor rejects everything.
        let strict = accumulate_year(&config, &schedule, 1e-4).unwrap();
        assert_eq!(strict.passes_kept, 0);
        assert_eq!(strict.raw_bits, 0.0);
        assert_eq!(strict.skl_bits, 0);
        assert!(strict.mean_qber.is_some(), "mean QBER covers all passes");
    }

    #[test]
    fn accumulation_pools_blocks_across_passes() {
        let config = MissionConfig::builtin_preset("quarc-roks").unwrap();
        let one = vec![ScheduledPass {
            day: 0,
            max_elevation_deg: 80.0,
            stationary_dwell_s: None,
        }];
        let two = vec![
            ScheduledPass {
                day: 0,
                max_elevation_deg: 80.0,
                stationary_dwell_s: None,
            },
            ScheduledPass {
                day: 1,
                max_elevation_deg: 80.0,
                stationary_dwell_s: None,
            },
        ];
        let single = accumulate_year(&config, &one, 0.11).unwrap();
        let double = accumulate_year(&config, &two, 0.11).unwrap();
        assert!(
            (double.raw_bits - 2.0 * single.raw_bits).abs() < 1e-6 * double.raw_bits,
            "two identical passes must pool twice the raw key"
        );
        assert!(
            double.skl_bits > 2 * single.skl_bits,
            "pooling must beat per-pass extraction: {} vs 2 x {}",
            double.skl_bits,
            single.skl_bits
        );
        assert_eq!(double.skl_sum_bits, 2 * single.skl_sum_bits);
    }

    #[test]
    fn study_csv_is_deterministic_and_annotated() {
        let config = MissionConfig::builtin_preset("quarc-roks").unwrap();
        let study = elevation_sweep(&config, &[40.0, 70.0], &[0.0, 2.0]).unwrap();
        let mut a = Vec::new();
        study.write_csv(&mut a).unwrap();
        let study2 = elevation_sweep(&config, &[40.0, 70.0], &[0.0, 2.0]).unwrap();
        let mut b = Vec::new();
        study2.write_csv(&mut b).unwrap();
        assert_eq!(a, b, "same config must reproduce identical CSV bytes");
        let text = String::from_utf8(a).unwrap();
        assert!(text.starts_with("# study: elevation_sweep"));
        assert!(text.contains("# config_hash:"));
        assert!(text.contains("max_elevation_deg,extra_loss_db,"));
    }

    #[test]
    fn axis_validation_catches_shuffled_rows() {
        let config = MissionConfig::builtin_preset("quarc-roks").unwrap();
        let mut study = elevation_sweep(&config, &[40.0, 70.0], &[0.0]).unwrap();
        study.rows.swap(0, 1);
        assert!(matches!(
            study.validate(),
            Err(MissionError::AxisNotIncreasing { .. })
        ));
    }

    #[test]
    fn curve_resolution_prefers_embedded_then_disk() {
        let config = MissionConfig::builtin_preset("quarc-roks").unwrap();
        assert!(config.resolve_curve("micius-representative.csv").is_ok());
        assert!(matches!(
            config.resolve_curve("no-such-curve.csv"),
            Err(MissionError::CurveNotFound(_))
        ));
    }
}
