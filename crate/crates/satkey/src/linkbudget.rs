//! Optical link budget: beam divergence, diffraction spreading, pointing
//! jitter, atmospheric column and fixed instrument losses.
//!
//! Two routes produce a time-resolved loss profile for a pass: a physical
//! chain evaluated term by term, or an empirical elevation-to-loss curve
//! (with a calibration offset) interpolated over the pass geometry.

use serde::{Deserialize, Serialize};
use std::io::Write;

use crate::orbit::{self, PassGeometry};

// ----------------------------------------------------------------------------
// Errors
// ----------------------------------------------------------------------------

#[derive(Debug, thiserror::Error)]
pub enum LinkError {
    #[error("aperture {0} m must be positive")]
    NonPositiveAperture(f64),
    #[error("wavelength {0} nm must be positive")]
    NonPositiveWavelength(f64),
    #[error("divergence requires either divergence_urad or beam_quality_m2 with apertures")]
    MissingBeamParameters,
    #[error("slant range {0} km must be positive")]
    NonPositiveRange(f64),
    #[error("elevation {0} deg outside (0, 90]")]
    ElevationOutOfRange(f64),
    #[error("pointing jitter {0} urad must be non-negative")]
    NegativeJitter(f64),
    #[error("empirical curve needs at least two knots")]
    CurveTooShort,
    #[error("empirical curve elevations must increase strictly (knot {0})")]
    CurveNotMonotone(usize),
    #[error("elevation {0} deg outside the empirical curve domain [{1}, {2}]")]
    CurveDomain(f64, f64, f64),
    #[error("empirical curve parse error at line {line}: {message}")]
    CurveParse { line: usize, message: String },
    #[error("quantization level list is empty")]
    EmptyLevels,
    #[error(transparent)]
    Orbit(#[from] orbit::OrbitError),
}

// ----------------------------------------------------------------------------
// Optical chain
// ----------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkDirection {
    Downlink,
    Uplink,
}

/// Parametric description of the optical terminals and channel.
///
/// The far-field divergence half-angle is either given directly
/// (`divergence_urad`) or derived from the transmitter:
///
///   theta = M^2 * lambda / (pi * w0),   w0 = waist_ratio * (tx_aperture / 2)
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpticalChain {
    pub tx_aperture_m: f64,
    pub rx_aperture_m: f64,
    pub wavelength_nm: f64,
    /// Beam quality factor M^2; used when `divergence_urad` is not given.
    #[serde(default)]
    pub beam_quality_m2: Option<f64>,
    /// Waist-to-aperture-radius ratio; 0.89 unless configured.
    #[serde(default = "default_waist_ratio")]
    pub waist_to_aperture_ratio: f64,
    /// Direct divergence half-angle in microradians; overrides the derived
    /// value when present.
    #[serde(default)]
    pub divergence_urad: Option<f64>,
    /// RMS pointing jitter in microradians.
    pub pointing_jitter_urad: f64,
    /// Atmospheric loss at zenith in dB; scales with airmass 1/sin(elev).
    pub atm_zenith_db: f64,
    /// Airmass growth is capped at this elevation (the horizon mask).
    #[serde(default = "default_airmass_cap")]
    pub airmass_cap_min_elevation_deg: f64,
    /// Fixed transmitter/receiver optics loss in dB.
    #[serde(default)]
    pub optics_db: f64,
    /// Detector inefficiency expressed as a loss in dB.
    #[serde(default)]
    pub detector_db: f64,
    /// Calibration offset pinning the modeled zenith total to a measured
    /// system value; may be negative.
    #[serde(default)]
    pub calibration_db: f64,
    /// Extra turbulence penalty applied on uplinks only.
    #[serde(default)]
    pub uplink_turbulence_db: f64,
    pub link_direction: LinkDirection,
}

fn default_waist_ratio() -> f64 {
    0.89
}

fn default_airmass_cap() -> f64 {
    10.0
}

impl OpticalChain {
    fn validate(&self) -> Result<(), LinkError> {
        if self.tx_aperture_m <= 0.0 {
            return Err(LinkError::NonPositiveAperture(self.tx_aperture_m));
        }
        if self.rx_aperture_m <= 0.0 {
            return Err(LinkError::NonPositiveAperture(self.rx_aperture_m));
        }
        if self.wavelength_nm <= 0.0 {
            return Err(LinkError::NonPositiveWavelength(self.wavelength_nm));
        }
        if self.pointing_jitter_urad < 0.0 {
            return Err(LinkError::NegativeJitter(self.pointing_jitter_urad));
        }
        Ok(())
    }
}

// ----------------------------------------------------------------------------
// Individual terms
// ----------------------------------------------------------------------------

/// Far-field divergence half-angle in microradians.
pub fn divergence_urad(chain: &OpticalChain) -> Result<f64, LinkError> {
    chain.validate()?;
    if let Some(direct) = chain.divergence_urad {
        if direct <= 0.0 {
            return Err(LinkError::MissingBeamParameters);
        }
        return Ok(direct);
    }
    let m2 = chain
        .beam_quality_m2
        .ok_or(LinkError::MissingBeamParameters)?;
    if m2 < 1.0 {
        return Err(LinkError::MissingBeamParameters);
    }
    let waist_m = chain.waist_to_aperture_ratio * chain.tx_aperture_m / 2.0;
    let wavelength_m = chain.wavelength_nm * 1e-9;
    Ok(m2 * wavelength_m / (std::f64::consts::PI * waist_m) * 1e6)
}

/// Diffraction (geometric collection) loss in dB at a given slant range.
///
/// The beam radius grows as w = theta * L; the receive aperture of radius
/// r collects the Gaussian fraction
///
///   f = 1 - exp(-2 r^2 / w^2)
///
/// and the loss is -10 log10(f). In the far field (w >> r) this reduces to
/// f ~ 2 r^2 / w^2, i.e. +20 dB per decade of range.
pub fn diffraction_loss_db(chain: &OpticalChain, slant_range_km: f64) -> Result<f64, LinkError> {
    if slant_range_km <= 0.0 || !slant_range_km.is_finite() {
        return Err(LinkError::NonPositiveRange(slant_range_km));
    }
    let theta_rad = divergence_urad(chain)? * 1e-6;
    let beam_radius_m = theta_rad * slant_range_km * 1e3;
    let rx_radius_m = chain.rx_aperture_m / 2.0;
    let collected =
        1.0 - (-2.0 * rx_radius_m * rx_radius_m / (beam_radius_m * beam_radius_m)).exp();
    Ok(-10.0 * collected.min(1.0).log10())
}

/// Mean pointing loss in dB for Gaussian jitter sigma:
///
///   g = theta^2 / (theta^2 + 4 sigma^2),   loss = -10 log10(g)
pub fn pointing_loss_db(chain: &OpticalChain) -> Result<f64, LinkError> {
    let theta = divergence_urad(chain)?;
    let sigma = chain.pointing_jitter_urad;
    let g = theta * theta / (theta * theta + 4.0 * sigma * sigma);
    Ok(-10.0 * g.log10())
}

/// Atmospheric loss in dB at a given elevation: the zenith column scaled by
/// airmass 1/sin(elevation), with the airmass capped at the configured
/// minimum elevation so the model is not evaluated into the horizon
/// singularity.
pub fn atmospheric_loss_db(chain: &OpticalChain, elevation_deg: f64) -> Result<f64, LinkError> {
    if elevation_deg <= 0.0 || elevation_deg > 90.0 || !elevation_deg.is_finite() {
        return Err(LinkError::ElevationOutOfRange(elevation_deg));
    }
    let capped = elevation_deg.max(chain.airmass_cap_min_elevation_deg);
    Ok(chain.atm_zenith_db / capped.to_radians().sin())
}

/// Total one-way loss in dB at one elevation for a circular orbit altitude:
/// diffraction + pointing + atmosphere + optics + detector + calibration
/// (+ turbulence on uplinks).
pub fn total_loss_db(
    chain: &OpticalChain,
    elevation_deg: f64,
    altitude_km: f64,
) -> Result<f64, LinkError> {
    let slant = orbit::slant_range_km(elevation_deg, altitude_km)?;
    let turbulence = match chain.link_direction {
        LinkDirection::Uplink => chain.uplink_turbulence_db,
        LinkDirection::Downlink => 0.0,
    };
    Ok(diffraction_loss_db(chain, slant)?
        + pointing_loss_db(chain)?
        + atmospheric_loss_db(chain, elevation_deg)?
        + chain.optics_db
        + chain.detector_db
        + chain.calibration_db
        + turbulence)
}

// ----------------------------------------------------------------------------
// Loss profiles
// ----------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSample {
    pub time_s: f64,
    pub elevation_deg: f64,
    pub loss_db: f64,
}

/// Time-resolved total loss over a pass.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LossProfile {
    pub time_step_s: f64,
    pub samples: Vec<LossSample>,
}

impl LossProfile {
    /// Minimum loss over the profile (the zenith value for a zenith pass).
    pub fn min_loss_db(&self) -> Option<f64> {
        self.samples
            .iter()
            .map(|s| s.loss_db)
            .min_by(|a, b| a.partial_cmp(b).unwrap())
    }

    /// Copy of the profile with a constant offset added to every sample.
    pub fn with_offset_db(&self, offset_db: f64) -> LossProfile {
        LossProfile {
            time_step_s: self.time_step_s,
            samples: self
                .samples
                .iter()
                .map(|s| LossSample {
                    loss_db: s.loss_db + offset_db,
                    ..*s
                })
                .collect(),
        }
    }

    /// Write the profile as CSV with header `time_s,elevation_deg,loss_db`.
    pub fn write_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "time_s,elevation_deg,loss_db")?;
        for s in &self.samples {
            writeln!(
                out,
                "{:.3},{:.6},{:.6}",
                s.time_s, s.elevation_deg, s.loss_db
            )?;
        }
        Ok(())
    }
}

/// Evaluate the physical chain over a pass geometry.
pub fn loss_profile(chain: &OpticalChain, pass: &PassGeometry) -> Result<LossProfile, LinkError> {
    let samples = pass
        .samples
        .iter()
        .map(|s| {
            total_loss_db(chain, s.elevation_deg.max(1e-9), pass.altitude_km).map(|loss_db| {
                LossSample {
                    time_s: s.time_s,
                    elevation_deg: s.elevation_deg,
                    loss_db,
                }
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(LossProfile {
        time_step_s: pass.time_step_s,
        samples,
    })
}

/// Evaluate loss at a single elevation per altitude at zenith; used for
/// altitude trade studies.
pub fn zenith_loss_vs_altitude(
    chain: &OpticalChain,
    altitudes_km: &[f64],
) -> Result<Vec<(f64, f64)>, LinkError> {
    altitudes_km
        .iter()
        .map(|&h| total_loss_db(chain, 90.0, h).map(|l| (h, l)))
        .collect()
}

// ----------------------------------------------------------------------------
// Empirical curves
// ----------------------------------------------------------------------------

/// Measured (or reconstructed) total loss as a function of elevation,
/// interpolated linearly between knots.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmpiricalCurve {
    /// (elevation_deg, loss_db) knots with strictly increasing elevation.
    pub knots: Vec<(f64, f64)>,
}

impl EmpiricalCurve {
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self, LinkError> {
        if knots.len() < 2 {
            return Err(LinkError::CurveTooShort);
        }
        for i in 1..knots.len() {
            if knots[i].0 <= knots[i - 1].0 {
                return Err(LinkError::CurveNotMonotone(i));
            }
        }
        Ok(Self { knots })
    }

    /// Parse CSV text with header `elevation_deg,loss_db`; `#` lines are
    /// comments.
    pub fn from_csv_str(text: &str) -> Result<Self, LinkError> {
        let mut knots = Vec::new();
        let mut saw_header = false;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if !saw_header {
                // First non-comment line must be the column header.
                if line.replace(' ', "") != "elevation_deg,loss_db" {
                    return Err(LinkError::CurveParse {
                        line: idx + 1,
                        message: format!("expected header 'elevation_deg,loss_db', got '{line}'"),
                    });
                }
                saw_header = true;
                continue;
            }
            let mut parts = line.split(',');
            let parse = |s: Option<&str>| -> Result<f64, LinkError> {
                s.map(str::trim)
                    .and_then(|v| v.parse::<f64>().ok())
                    .ok_or(LinkError::CurveParse {
                        line: idx + 1,
                        message: format!("bad knot line '{line}'"),
                    })
            };
            let elevation = parse(parts.next())?;
            let loss = parse(parts.next())?;
            knots.push((elevation, loss));
        }
        Self::new(knots)
    }

    pub fn from_reader(mut reader: impl std::io::Read) -> Result<Self, LinkError> {
        let mut text = String::new();
        reader
            .read_to_string(&mut text)
            .map_err(|e| LinkError::CurveParse {
                line: 0,
                message: e.to_string(),
            })?;
        Self::from_csv_str(&text)
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.knots[0].0, self.knots[self.knots.len() - 1].0)
    }

    /// Linear interpolation; elevations outside the knot span are an error.
    pub fn interpolate(&self, elevation_deg: f64) -> Result<f64, LinkError> {
        let (lo, hi) = self.domain();
        if elevation_deg < lo || elevation_deg > hi || !elevation_deg.is_finite() {
            return Err(LinkError::CurveDomain(elevation_deg, lo, hi));
        }
        let idx = self
            .knots
            .partition_point(|k| k.0 <= elevation_deg)
            .min(self.knots.len() - 1)
            .max(1);
        let (e0, l0) = self.knots[idx - 1];
        let (e1, l1) = self.knots[idx];
        let t = (elevation_deg - e0) / (e1 - e0);
        Ok(l0 + t * (l1 - l0))
    }
}

/// Interpolate an empirical curve over a pass, adding a constant calibration
/// or degradation offset.
pub fn scaled_empirical_profile(
    curve: &EmpiricalCurve,
    offset_db: f64,
    pass: &PassGeometry,
) -> Result<LossProfile, LinkError> {
    let samples = pass
        .samples
        .iter()
        .map(|s| {
            curve
                .interpolate(s.elevation_deg)
                .map(|loss_db| LossSample {
                    time_s: s.time_s,
                    elevation_deg: s.elevation_deg,
                    loss_db: loss_db + offset_db,
                })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(LossProfile {
        time_step_s: pass.time_step_s,
        samples,
    })
}

/// Snap every sample of a profile to the nearest available attenuation
/// level; ties round toward the higher (more conservative) loss.
pub fn quantize_profile(
    profile: &LossProfile,
    levels_db: &[f64],
) -> Result<LossProfile, LinkError> {
    if levels_db.is_empty() {
        return Err(LinkError::EmptyLevels);
    }
    let mut sorted = levels_db.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let snap = |x: f64| -> f64 {
        let mut best = sorted[0];
        let mut best_dist = f64::INFINITY;
        for &level in &sorted {
            let d = (level - x).abs();
            // `<=` prefers the later (higher) level on exact ties.
            if d <= best_dist {
                best_dist = d;
                best = level;
            }
        }
        best
    };
    Ok(LossProfile {
        time_step_s: profile.time_step_s,
        samples: profile
            .samples
            .iter()
            .map(|s| LossSample {
                loss_db: snap(s.loss_db),
                ..*s
            })
            .collect(),
    })
}
