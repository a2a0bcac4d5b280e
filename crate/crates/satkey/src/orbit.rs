//! Circular-orbit pass geometry over a ground station.
//!
//! A spherical, non-rotating Earth and a circular orbit are assumed: a pass
//! is then fully described by the orbit altitude and the maximum elevation
//! reached at closest approach. The cross-track offset that produces a given
//! maximum elevation is solved by bisection, after which elevation and slant
//! range follow from the central angle between the sub-satellite point and
//! the station.

use serde::{Deserialize, Serialize};
use std::io::Write;

use crate::util::KahanSum;

// ----------------------------------------------------------------------------
// Constants
// ----------------------------------------------------------------------------

/// Mean Earth radius in kilometres.
pub const EARTH_RADIUS_KM: f64 = 6371.0;

/// Geocentric gravitational constant in km^3/s^2.
pub const EARTH_MU_KM3_S2: f64 = 398_600.4418;

/// Bisection tolerance for the cross-track offset, in degrees.
const OFFSET_TOLERANCE_DEG: f64 = 1e-6;

// ----------------------------------------------------------------------------
// Errors
// ----------------------------------------------------------------------------

#[derive(Debug, thiserror::Error)]
pub enum OrbitError {
    #[error("elevation {0} deg outside [0, 90]")]
    ElevationOutOfRange(f64),
    #[error("altitude {0} km must be positive")]
    NonPositiveAltitude(f64),
    #[error("time step {0} s must be positive")]
    NonPositiveTimeStep(f64),
    #[error("minimum elevation {0} deg outside [0, 90)")]
    BadHorizonMask(f64),
}

// ----------------------------------------------------------------------------
// Types
// ----------------------------------------------------------------------------

/// Ground station description: for the geometry model only the horizon mask
/// (minimum usable elevation) matters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GroundStation {
    pub min_elevation_deg: f64,
}

impl GroundStation {
    pub fn new(min_elevation_deg: f64) -> Result<Self, OrbitError> {
        if !(0.0..90.0).contains(&min_elevation_deg) {
            return Err(OrbitError::BadHorizonMask(min_elevation_deg));
        }
        Ok(Self { min_elevation_deg })
    }
}

/// One time sample of a pass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PassSample {
    pub time_s: f64,
    pub elevation_deg: f64,
    pub slant_range_km: f64,
}

/// Time-sampled geometry of a single pass, symmetric about closest approach
/// at `time_s = 0`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PassGeometry {
    pub altitude_km: f64,
    pub max_elevation_deg: f64,
    pub time_step_s: f64,
    pub samples: Vec<PassSample>,
}

impl PassGeometry {
    /// Total sampled duration in seconds (number of samples times the step).
    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 * self.time_step_s
    }

    /// Mean elevation over the sampled window, in degrees.
    pub fn mean_elevation_deg(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        let mut sum = KahanSum::new();
        for s in &self.samples {
            sum.add(s.elevation_deg);
        }
        sum.value() / self.samples.len() as f64
    }

    /// Largest contiguous run of samples at or above `min_elevation_deg`.
    ///
    /// The returned geometry keeps the original time stamps; it may be empty
    /// when the pass never clears the mask.
    pub fn visible_window(&self, min_elevation_deg: f64) -> PassGeometry {
        let mut best: (usize, usize) = (0, 0); // [start, end)
        let mut run_start = None;
        for (i, s) in self.samples.iter().enumerate() {
            if s.elevation_deg >= min_elevation_deg {
                if run_start.is_none() {
                    run_start = Some(i);
                }
                let start = run_start.unwrap();
                if i + 1 - start > best.1 - best.0 {
                    best = (start, i + 1);
                }
            } else {
                run_start = None;
            }
        }
        PassGeometry {
            altitude_km: self.altitude_km,
            max_elevation_deg: self.max_elevation_deg,
            time_step_s: self.time_step_s,
            samples: self.samples[best.0..best.1].to_vec(),
        }
    }

    /// Write the pass as CSV with header `time_s,elevation_deg,slant_range_km`.
    pub fn write_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "time_s,elevation_deg,slant_range_km")?;
        for s in &self.samples {
            writeln!(
                out,
                "{:.3},{:.6},{:.6}",
                s.time_s, s.elevation_deg, s.slant_range_km
            )?;
        }
        Ok(())
    }
}

// ----------------------------------------------------------------------------
// Geometry
// ----------------------------------------------------------------------------

/// Slant range from station to satellite in km:
///
///   L = sqrt((Re + h)^2 - Re^2 cos^2(theta)) - Re sin(theta)
///
/// for elevation `theta` and circular-orbit altitude `h` over a spherical
/// Earth of radius `Re`.
pub fn slant_range_km(elevation_deg: f64, altitude_km: f64) -> Result<f64, OrbitError> {
    if !(0.0..=90.0).contains(&elevation_deg) || !elevation_deg.is_finite() {
        return Err(OrbitError::ElevationOutOfRange(elevation_deg));
    }
    if altitude_km <= 0.0 || !altitude_km.is_finite() {
        return Err(OrbitError::NonPositiveAltitude(altitude_km));
    }
    let r_orbit = EARTH_RADIUS_KM + altitude_km;
    let theta = elevation_deg.to_radians();
    let cos_term = EARTH_RADIUS_KM * theta.cos();
    Ok((r_orbit * r_orbit - cos_term * cos_term).sqrt() - EARTH_RADIUS_KM * theta.sin())
}

/// Circular-orbit angular rate in rad/s: omega = sqrt(mu / a^3) with
/// a = Re + h.
pub fn orbital_rate_rad_s(altitude_km: f64) -> Result<f64, OrbitError> {
    if altitude_km <= 0.0 || !altitude_km.is_finite() {
        return Err(OrbitError::NonPositiveAltitude(altitude_km));
    }
    let a = EARTH_RADIUS_KM + altitude_km;
    Ok((EARTH_MU_KM3_S2 / (a * a * a)).sqrt())
}

/// Elevation in degrees for a central angle `psi` (radians) between the
/// station and the sub-satellite point: sin(e) = (a cos(psi) - Re) / L.
fn elevation_from_central_angle(psi_rad: f64, r_orbit_km: f64) -> f64 {
    let slant = slant_from_central_angle(psi_rad, r_orbit_km);
    let sin_e = (r_orbit_km * psi_rad.cos() - EARTH_RADIUS_KM) / slant;
    sin_e.clamp(-1.0, 1.0).asin().to_degrees()
}

/// Law-of-cosines slant range for a central angle `psi` (radians).
fn slant_from_central_angle(psi_rad: f64, r_orbit_km: f64) -> f64 {
    (EARTH_RADIUS_KM * EARTH_RADIUS_KM + r_orbit_km * r_orbit_km
        - 2.0 * EARTH_RADIUS_KM * r_orbit_km * psi_rad.cos())
    .sqrt()
}

/// Central angle (degrees) between station and sub-satellite point at which
/// the satellite appears at elevation `elevation_deg`:
///
///   psi = 90 deg - e - asin(Re cos(e) / a)
///
/// Inverse of the pointing relation used by `pass_profile`; at e = 0 it
/// reduces to the horizon angle acos(Re / a).
pub fn central_angle_for_elevation_deg(
    elevation_deg: f64,
    altitude_km: f64,
) -> Result<f64, OrbitError> {
    if !(0.0..=90.0).contains(&elevation_deg) || !elevation_deg.is_finite() {
        return Err(OrbitError::ElevationOutOfRange(elevation_deg));
    }
    if altitude_km <= 0.0 || !altitude_km.is_finite() {
        return Err(OrbitError::NonPositiveAltitude(altitude_km));
    }
    let a = EARTH_RADIUS_KM + altitude_km;
    let e = elevation_deg.to_radians();
    let psi = std::f64::consts::FRAC_PI_2 - e - (EARTH_RADIUS_KM * e.cos() / a).asin();
    Ok(psi.to_degrees().max(0.0))
}

/// Peak elevation (degrees) of a pass whose closest approach is offset from
/// the station by the central angle `offset_deg`. An offset of zero gives a
/// zenith pass; offsets at or beyond the horizon angle give 0.
pub fn peak_elevation_for_offset_deg(offset_deg: f64, altitude_km: f64) -> Result<f64, OrbitError> {
    if offset_deg < 0.0 || !offset_deg.is_finite() {
        return Err(OrbitError::ElevationOutOfRange(offset_deg));
    }
    if altitude_km <= 0.0 || !altitude_km.is_finite() {
        return Err(OrbitError::NonPositiveAltitude(altitude_km));
    }
    let r_orbit = EARTH_RADIUS_KM + altitude_km;
    Ok(elevation_from_central_angle(offset_deg.to_radians(), r_orbit).max(0.0))
}

/// Sample the geometry of a pass whose peak elevation is
/// `max_elevation_deg`.
///
/// The cross-track offset `beta` (central angle at closest approach) is
/// solved by bisection to 1e-6 degrees; the central angle then evolves as
/// cos(psi(t)) = cos(beta) cos(omega t) for a circular orbit over a
/// non-rotating Earth. Samples are laid symmetrically about closest approach
/// and truncated where elevation drops below 0 degrees.
pub fn pass_profile(
    altitude_km: f64,
    max_elevation_deg: f64,
    time_step_s: f64,
) -> Result<PassGeometry, OrbitError> {
    if !(0.0..=90.0).contains(&max_elevation_deg) || !max_elevation_deg.is_finite() {
        return Err(OrbitError::ElevationOutOfRange(max_elevation_deg));
    }
    if time_step_s <= 0.0 || !time_step_s.is_finite() {
        return Err(OrbitError::NonPositiveTimeStep(time_step_s));
    }
    let omega = orbital_rate_rad_s(altitude_km)?;
    let r_orbit = EARTH_RADIUS_KM + altitude_km;

    // Horizon central angle (elevation 0): cos(psi_h) = Re / a.
    let psi_horizon = (EARTH_RADIUS_KM / r_orbit).acos();

    // Bisect beta in [0, psi_horizon]: elevation at closest approach is
    // monotone decreasing in the offset.
    let mut lo = 0.0f64;
    let mut hi = psi_horizon;
    let tol_rad = OFFSET_TOLERANCE_DEG.to_radians();
    while hi - lo > tol_rad {
        let mid = 0.5 * (lo + hi);
        if elevation_from_central_angle(mid, r_orbit) > max_elevation_deg {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let beta = 0.5 * (lo + hi);

    // Time from closest approach to the horizon crossing:
    // cos(beta) cos(omega t) = cos(psi_horizon).
    let cos_ratio = (psi_horizon.cos() / beta.cos()).clamp(-1.0, 1.0);
    let t_horizon = cos_ratio.acos() / omega;
    let half_steps = (t_horizon / time_step_s).floor() as i64;

    let mut samples = Vec::with_capacity((2 * half_steps + 1) as usize);
    for i in -half_steps..=half_steps {
        let t = i as f64 * time_step_s;
        let cos_psi = beta.cos() * (omega * t).cos();
        let psi = cos_psi.clamp(-1.0, 1.0).acos();
        let elevation_deg = elevation_from_central_angle(psi, r_orbit);
        if elevation_deg < 0.0 {
            continue;
        }
        samples.push(PassSample {
            time_s: t,
            elevation_deg,
            slant_range_km: slant_from_central_angle(psi, r_orbit),
        });
    }

    Ok(PassGeometry {
        altitude_km,
        max_elevation_deg,
        time_step_s,
        samples,
    })
}
