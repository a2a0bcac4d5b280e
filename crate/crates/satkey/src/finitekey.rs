//! Finite-block secret key length analysis.
//!
//! Two analyses are provided:
//!
//! * three-intensity decoy-state BB84 with biased bases, using
//!   Chernoff-style concentration on every estimated quantity, and
//! * symmetric entangled-pair (BBM92-style) keys, with either an improved
//!   random-sampling correction or a legacy Serfling-style correction.
//!
//! All bounds hold except with probability controlled by an explicit
//! epsilon budget; the budget is reported alongside every key length.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::detstats::{
    bbm92_block_stats, poisson_pmf, wcp_block_stats, Bbm92Params, BlockStats, CellCounts,
    CountMode, DecoyParams, DetStatsError,
};
use crate::linkbudget::LossProfile;

/// One-sided concentration-bound slots budgeted for the decoy analysis.
/// The chain below applies 17 bounds; dividing the secrecy failure
/// probability into 21 slots leaves headroom and matches the composition
/// constant in the key-length formula.
pub const DECOY_EPSILON_SLOTS: f64 = 21.0;

const DECOY_BOUND_APPLICATIONS: u32 = 17;

// ----------------------------------------------------------------------------
// Errors and security parameters
// ----------------------------------------------------------------------------

#[derive(Debug, thiserror::Error)]
pub enum FiniteKeyError {
    #[error("epsilon {0} must lie in (0, 1)")]
    BadEpsilon(f64),
    #[error("decoy analysis needs exactly 3 intensity cells, got {0}")]
    CellLayout(usize),
    #[error("block cells do not match the configured intensities")]
    IntensityMismatch,
    #[error("entangled analysis expects a single cell, got {0}")]
    NotEntangledBlock(usize),
    #[error(transparent)]
    DetStats(#[from] DetStatsError),
}

/// Composable security failure probabilities.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SecurityParams {
    /// Secrecy parameter: distance from an ideal key.
    pub eps_sec: f64,
    /// Correctness parameter: probability the two keys differ.
    pub eps_cor: f64,
}

impl Default for SecurityParams {
    fn default() -> Self {
        Self {
            eps_sec: 1e-10,
            eps_cor: 1e-15,
        }
    }
}

impl SecurityParams {
    pub fn validate(&self) -> Result<(), FiniteKeyError> {
        for eps in [self.eps_sec, self.eps_cor] {
            if !(eps > 0.0 && eps < 1.0) {
                return Err(FiniteKeyError::BadEpsilon(eps));
            }
        }
        Ok(())
    }
}

/// How the secrecy budget was spent; attached to every key result.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EpsilonReport {
    pub eps_sec: f64,
    pub eps_cor: f64,
    /// Failure probability assigned to each one-sided concentration bound.
    pub eps_per_bound: f64,
    /// Number of one-sided bounds applied.
    pub bound_applications: u32,
    /// Privacy-amplification share of the secrecy budget.
    pub eps_pa: f64,
}

// ----------------------------------------------------------------------------
// Entropy
// ----------------------------------------------------------------------------

/// Binary Shannon entropy h(p) = -p log2 p - (1-p) log2(1-p), with
/// h(0) = h(1) = 0.
pub fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
}

// ----------------------------------------------------------------------------
// Concentration bounds
// ----------------------------------------------------------------------------

/// Bounds on the mean of a Poisson-like sum given one observation.
///
/// With beta = ln(1/eps), an observed count x confines the mean to
///
///   upper: x + beta + sqrt(2 beta x + beta^2)
///   lower: max(0, x + beta/2 - sqrt(2 beta x + beta^2/4))
///
/// each side failing with probability at most eps.
pub fn chernoff_mean_bounds(observed: f64, eps: f64) -> (f64, f64) {
    let beta = (1.0 / eps).ln();
    let x = observed.max(0.0);
    let upper = x + beta + (2.0 * beta * x + beta * beta).sqrt();
    let lower = (x + beta / 2.0 - (2.0 * beta * x + beta * beta / 4.0).sqrt()).max(0.0);
    (lower, upper)
}

/// Bounds on a realized count given its mean.
///
/// With beta = ln(1/eps) and mean m:
///
///   upper: m + (beta + sqrt(beta^2 + 8 beta m)) / 2
///   lower: max(0, m - sqrt(2 beta m))
pub fn chernoff_observation_bounds(mean: f64, eps: f64) -> (f64, f64) {
    let beta = (1.0 / eps).ln();
    let m = mean.max(0.0);
    let upper = m + (beta + (beta * beta + 8.0 * beta * m).sqrt()) / 2.0;
    let lower = (m - (2.0 * beta * m).sqrt()).max(0.0);
    (lower, upper)
}

/// Random-sampling correction gamma such that, when a population of
/// n + k bits is split into a key part of n and a test part of k showing
/// error rate lambda, the key error rate exceeds lambda + gamma with
/// probability at most eps.
///
/// The closed form is only trustworthy away from the saturation region, so
/// the bound turns vacuous (returns 1) whenever lambda >= 1/2 or
/// lambda + gamma >= 1/2; a key that noisy carries no extractable secrecy
/// anyway. Exhaustive hypergeometric enumeration over all splits with
/// n + k <= 200 confirms the stated failure probability for eps <= 1e-6;
/// looser eps values are outside the intended domain.
pub fn sampling_correction(n_key: f64, n_test: f64, error_rate: f64, eps: f64) -> f64 {
    if n_key <= 0.0 || n_test <= 0.0 || !(eps > 0.0 && eps < 1.0) {
        return 1.0;
    }
    let total = n_key + n_test;
    let lambda = error_rate.max(1.0 / total);
    if lambda >= 0.5 {
        return 1.0;
    }
    let a = n_key.max(n_test);
    let g = total / (n_key * n_test)
        * (total
            / (2.0 * std::f64::consts::PI * n_key * n_test * lambda * (1.0 - lambda) * eps * eps))
            .ln();
    if g <= 0.0 {
        return 0.0;
    }
    let ag = a * g / total;
    let gamma = ((1.0 - 2.0 * lambda) * ag + (ag * ag + 4.0 * lambda * (1.0 - lambda) * g).sqrt())
        / (2.0 + 2.0 * a * ag / total);
    if lambda + gamma >= 0.5 {
        1.0
    } else {
        gamma
    }
}

/// Serfling-style sampling correction used by the legacy entangled
/// analysis:
///
///   nu = sqrt( (n + k)(k + 1) / (n k^2) * ln(1/eps) / 2 )
pub fn serfling_correction(n_key: f64, n_test: f64, eps: f64) -> f64 {
    if n_key <= 0.0 || n_test <= 0.0 || !(eps > 0.0 && eps < 1.0) {
        return 1.0;
    }
    ((n_key + n_test) * (n_test + 1.0) / (n_key * n_test * n_test) * (1.0 / eps).ln() / 2.0).sqrt()
}

// ----------------------------------------------------------------------------
// Error-correction leakage
// ----------------------------------------------------------------------------

/// Bits disclosed during error correction.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum EcModel {
    /// Constant overhead over the Shannon limit: factor * n * h(Q).
    EfficiencyFactor { factor: f64 },
    /// Syndrome-counting estimate resolved at the correctness parameter:
    ///
    ///   n h(Q) + (Phi^-1(1 - eps_cor) sqrt(n Q (1-Q)) - 1) log2((1-Q)/Q)
    ///         - log2(n)/2 - log2(1/eps_cor)
    SyndromeSet,
}

impl EcModel {
    /// Leakage in bits for an n-bit key at error rate `qber`, clamped to
    /// [0, n].
    pub fn leakage(&self, n: f64, qber: f64, eps_cor: f64) -> f64 {
        if n <= 0.0 || qber <= 0.0 {
            return 0.0;
        }
        if qber >= 0.5 {
            return n;
        }
        let bits = match self {
            EcModel::EfficiencyFactor { factor } => factor * n * binary_entropy(qber),
            EcModel::SyndromeSet => {
                // Phi^-1(1 - eps) = -Phi^-1(eps); the lower-tail form keeps
                // full precision when eps is far below one ulp of 1.
                let quantile = -Normal::new(0.0, 1.0)
                    .expect("unit normal")
                    .inverse_cdf(eps_cor);
                n * binary_entropy(qber)
                    + (quantile * (n * qber * (1.0 - qber)).sqrt() - 1.0)
                        * ((1.0 - qber) / qber).log2()
                    - n.log2() / 2.0
                    - (1.0 / eps_cor).log2()
            }
        };
        bits.clamp(0.0, n)
    }
}

// ----------------------------------------------------------------------------
// Decoy-state yield bounds
// ----------------------------------------------------------------------------

/// Poisson mixture weight tau_n: the probability that an emitted pulse
/// carries n photons, averaged over the intensity choices.
pub fn poisson_mixture_weight(n: u32, intensities: &[f64; 3], probabilities: &[f64; 3]) -> f64 {
    intensities
        .iter()
        .zip(probabilities)
        .map(|(&mu, &p)| p * poisson_pmf(n, mu))
        .sum()
}

/// Bounds on vacuum and single-photon contributions extracted from the
/// per-intensity counts.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DecoyYields {
    /// Lower bound on key-basis vacuum events.
    pub s0_key_lower: f64,
    /// Lower bound on key-basis single-photon events.
    pub s1_key_lower: f64,
    /// Lower bound on test-basis single-photon events.
    pub s1_test_lower: f64,
    /// Upper bound on test-basis single-photon errors.
    pub v1_test_upper: f64,
    /// True if any intermediate bound was clamped at zero.
    pub clamped: bool,
}

struct ScaledBounds {
    lower: [f64; 3],
    upper: [f64; 3],
}

/// Observed counts -> bounds on the underlying per-intensity means,
/// rescaled by e^mu / p so the decoy linear algebra can combine them.
fn scaled_mean_bounds(
    counts: [f64; 3],
    intensities: &[f64; 3],
    probabilities: &[f64; 3],
    eps: f64,
) -> ScaledBounds {
    let mut lower = [0.0; 3];
    let mut upper = [0.0; 3];
    for k in 0..3 {
        let (lo, up) = chernoff_mean_bounds(counts[k], eps);
        let scale = intensities[k].exp() / probabilities[k];
        lower[k] = scale * lo;
        upper[k] = scale * up;
    }
    ScaledBounds { lower, upper }
}

/// Vacuum and single-photon bounds for one basis from its per-intensity
/// detection counts. Returns bounds on the means.
fn basis_yield_means(
    counts: [f64; 3],
    intensities: &[f64; 3],
    probabilities: &[f64; 3],
    eps: f64,
    clamped: &mut bool,
) -> (f64, f64) {
    let [mu1, mu2, mu3] = *intensities;
    let tau0 = poisson_mixture_weight(0, intensities, probabilities);
    let tau1 = poisson_mixture_weight(1, intensities, probabilities);
    let b = scaled_mean_bounds(counts, intensities, probabilities, eps);

    let s0 = tau0 * (mu2 * b.lower[2] - mu3 * b.upper[1]) / (mu2 - mu3);
    let s0 = if s0 < 0.0 {
        *clamped = true;
        0.0
    } else {
        s0
    };

    let numerator =
        b.lower[1] - b.upper[2] - (mu2 * mu2 - mu3 * mu3) / (mu1 * mu1) * (b.upper[0] - s0 / tau0);
    let denominator = mu1 * (mu2 - mu3) - mu2 * mu2 + mu3 * mu3;
    let s1 = tau1 * mu1 * numerator / denominator;
    let s1 = if s1 < 0.0 {
        *clamped = true;
        0.0
    } else {
        s1
    };
    (s0, s1)
}

/// Full decoy chain: observed counts -> mean bounds -> linear combination
/// -> bounds on the realized vacuum/single statistics.
pub fn decoy_yield_bounds(
    cells: &[CellCounts],
    params: &DecoyParams,
    eps: f64,
) -> Result<DecoyYields, FiniteKeyError> {
    if cells.len() != 3 {
        return Err(FiniteKeyError::CellLayout(cells.len()));
    }
    for (cell, &mu) in cells.iter().zip(&params.intensities) {
        if (cell.intensity - mu).abs() > 1e-12 {
            return Err(FiniteKeyError::IntensityMismatch);
        }
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(FiniteKeyError::BadEpsilon(eps));
    }
    let intensities = &params.intensities;
    let probabilities = &params.probabilities;
    let [_, mu2, mu3] = *intensities;
    let mut clamped = false;

    let n_key = [cells[0].n_x, cells[1].n_x, cells[2].n_x];
    let n_test = [cells[0].n_z, cells[1].n_z, cells[2].n_z];
    let m_test = [cells[0].m_z, cells[1].m_z, cells[2].m_z];

    let (s0_key_mean, s1_key_mean) =
        basis_yield_means(n_key, intensities, probabilities, eps, &mut clamped);
    let (_, s1_test_mean) =
        basis_yield_means(n_test, intensities, probabilities, eps, &mut clamped);

    let tau1 = poisson_mixture_weight(1, intensities, probabilities);
    let mb = scaled_mean_bounds(m_test, intensities, probabilities, eps);
    let v1_mean = tau1 * (mb.upper[1] - mb.lower[2]) / (mu2 - mu3);
    let v1_mean = if v1_mean < 0.0 {
        clamped = true;
        0.0
    } else {
        v1_mean
    };

    // Mean bounds -> realized-count bounds.
    Ok(DecoyYields {
        s0_key_lower: chernoff_observation_bounds(s0_key_mean, eps).0,
        s1_key_lower: chernoff_observation_bounds(s1_key_mean, eps).0,
        s1_test_lower: chernoff_observation_bounds(s1_test_mean, eps).0,
        v1_test_upper: chernoff_observation_bounds(v1_mean, eps).1,
        clamped,
    })
}

// ----------------------------------------------------------------------------
// Key results
// ----------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct KeyDiagnostics {
    /// A decoy bound was clamped at zero (counts too thin for the algebra).
    pub clamped_yields: bool,
    /// The phase-error estimate saturated; the block carries no secrecy.
    pub vacuous_phase_bound: bool,
    pub epsilon: EpsilonReport,
}

/// Outcome of a finite-key analysis on one block.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct KeyResult {
    /// Extractable secret key length in bits (floored, never negative).
    pub secret_key_length: u64,
    /// The un-floored key length; negative values show how far below
    /// threshold a block sits.
    pub key_length_raw: f64,
    /// Sifted key-basis detections entering the analysis.
    pub n_key: f64,
    pub qber_key: Option<f64>,
    pub qber_test: Option<f64>,
    /// Upper bound on the phase error rate used for privacy amplification.
    pub phase_error_bound: f64,
    pub ec_leakage_bits: f64,
    /// Decoy analyses also report the certified vacuum/single-photon floor.
    pub vacuum_events_lower: Option<f64>,
    pub single_events_lower: Option<f64>,
    pub diagnostics: KeyDiagnostics,
}

fn floor_key(raw: f64) -> u64 {
    if raw.is_finite() && raw > 0.0 {
        raw.floor() as u64
    } else {
        0
    }
}

// ----------------------------------------------------------------------------
// Decoy-state BB84 key length
// ----------------------------------------------------------------------------

/// Finite-block secret key length for three-intensity decoy BB84:
///
///   l = s0 + s1 (1 - h(phi)) - lambda_EC
///       - 6 log2(21 / eps_sec) - log2(2 / eps_cor)
///
/// where s0, s1 bound the key-basis vacuum and single-photon events, phi
/// bounds the single-photon phase error rate via the test basis, and every
/// concentration bound spends eps_sec / 21.
pub fn skl_decoy_bb84(
    stats: &BlockStats,
    source: &DecoyParams,
    ec: &EcModel,
    security: &SecurityParams,
) -> Result<KeyResult, FiniteKeyError> {
    security.validate()?;
    source.validate()?;
    let eps_u = security.eps_sec / DECOY_EPSILON_SLOTS;
    let yields = decoy_yield_bounds(&stats.cells, source, eps_u)?;

    let n_key = stats.n_x_total();
    let qber_key = stats.qber_x();
    let qber_test = stats.qber_z();

    let mut vacuous = false;
    let phase = if yields.s1_test_lower > 0.0 && yields.s1_key_lower > 0.0 {
        let base = (yields.v1_test_upper / yields.s1_test_lower).min(0.5);
        let gamma = sampling_correction(yields.s1_key_lower, yields.s1_test_lower, base, eps_u);
        let phi = base + gamma;
        if phi >= 0.5 {
            vacuous = true;
        }
        phi.min(0.5)
    } else {
        vacuous = true;
        0.5
    };

    let leakage = ec.leakage(n_key, qber_key.unwrap_or(0.0), security.eps_cor);
    let penalty =
        6.0 * (DECOY_EPSILON_SLOTS / security.eps_sec).log2() + (2.0 / security.eps_cor).log2();
    let raw = yields.s0_key_lower + yields.s1_key_lower * (1.0 - binary_entropy(phase))
        - leakage
        - penalty;

    Ok(KeyResult {
        secret_key_length: floor_key(raw),
        key_length_raw: raw,
        n_key,
        qber_key,
        qber_test,
        phase_error_bound: phase,
        ec_leakage_bits: leakage,
        vacuum_events_lower: Some(yields.s0_key_lower),
        single_events_lower: Some(yields.s1_key_lower),
        diagnostics: KeyDiagnostics {
            clamped_yields: yields.clamped,
            vacuous_phase_bound: vacuous,
            epsilon: EpsilonReport {
                eps_sec: security.eps_sec,
                eps_cor: security.eps_cor,
                eps_per_bound: eps_u,
                bound_applications: DECOY_BOUND_APPLICATIONS,
                eps_pa: eps_u,
            },
        },
    })
}

// ----------------------------------------------------------------------------
// Entangled-pair key lengths
// ----------------------------------------------------------------------------

fn bbm92_key_length(
    stats: &BlockStats,
    ec: &EcModel,
    security: &SecurityParams,
    legacy: bool,
) -> Result<KeyResult, FiniteKeyError> {
    security.validate()?;
    if stats.cells.len() != 1 {
        return Err(FiniteKeyError::NotEntangledBlock(stats.cells.len()));
    }
    let eps_pe = security.eps_sec / 2.0;
    let eps_pa = security.eps_sec / 4.0;
    let n_key = stats.n_x_total();
    let n_test = stats.n_z_total();
    let qber_key = stats.qber_x();
    let qber_test = stats.qber_z();

    let mut vacuous = false;
    let phase = if n_key > 0.0 && n_test > 0.0 {
        let base = qber_test.unwrap_or(0.5);
        let correction = if legacy {
            serfling_correction(n_key, n_test, eps_pe)
        } else {
            sampling_correction(n_key, n_test, base, eps_pe)
        };
        let phi = base + correction;
        if phi >= 0.5 {
            vacuous = true;
        }
        phi.min(0.5)
    } else {
        vacuous = true;
        0.5
    };

    let leakage = ec.leakage(n_key, qber_key.unwrap_or(0.0), security.eps_cor);
    let penalty = 2.0 * (1.0 / (2.0 * eps_pa)).log2() + (2.0 / security.eps_cor).log2();
    let raw = n_key * (1.0 - binary_entropy(phase)) - leakage - penalty;

    Ok(KeyResult {
        secret_key_length: floor_key(raw),
        key_length_raw: raw,
        n_key,
        qber_key,
        qber_test,
        phase_error_bound: phase,
        ec_leakage_bits: leakage,
        vacuum_events_lower: None,
        single_events_lower: None,
        diagnostics: KeyDiagnostics {
            clamped_yields: false,
            vacuous_phase_bound: vacuous,
            epsilon: EpsilonReport {
                eps_sec: security.eps_sec,
                eps_cor: security.eps_cor,
                eps_per_bound: eps_pe,
                bound_applications: 1,
                eps_pa,
            },
        },
    })
}

/// Entangled-pair key length with the improved sampling correction:
///
///   l = n (1 - h(phi)) - lambda_EC - 2 log2(1 / (2 eps_PA))
///       - log2(2 / eps_cor)
///
/// with eps_PE = eps_sec / 2 and eps_PA = eps_sec / 4.
pub fn skl_bbm92(
    stats: &BlockStats,
    ec: &EcModel,
    security: &SecurityParams,
) -> Result<KeyResult, FiniteKeyError> {
    bbm92_key_length(stats, ec, security, false)
}

/// Entangled-pair key length with the legacy Serfling-style correction;
/// same composition constants, larger statistical penalty.
pub fn skl_bbm92_legacy(
    stats: &BlockStats,
    ec: &EcModel,
    security: &SecurityParams,
) -> Result<KeyResult, FiniteKeyError> {
    bbm92_key_length(stats, ec, security, true)
}

// ----------------------------------------------------------------------------
// Protocol dispatch
// ----------------------------------------------------------------------------

/// Which entangled-pair finite-key analysis to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bbm92Analysis {
    #[default]
    Improved,
    Legacy,
}

/// A protocol choice bundling source model, error-correction model, and
/// analysis variant; the unit missions dispatch through this.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "protocol", rename_all = "snake_case")]
pub enum ProtocolParams {
    DecoyBb84 {
        source: DecoyParams,
        error_correction: EcModel,
    },
    Bbm92 {
        source: Bbm92Params,
        error_correction: EcModel,
        #[serde(default)]
        analysis: Bbm92Analysis,
    },
}

impl ProtocolParams {
    pub fn validate(&self) -> Result<(), DetStatsError> {
        match self {
            ProtocolParams::DecoyBb84 { source, .. } => source.validate(),
            ProtocolParams::Bbm92 { source, .. } => source.validate(),
        }
    }

    /// Detection statistics for one block over a loss profile.
    pub fn block_stats(
        &self,
        profile: &LossProfile,
        mode: CountMode,
    ) -> Result<BlockStats, DetStatsError> {
        match self {
            ProtocolParams::DecoyBb84 { source, .. } => wcp_block_stats(source, profile, mode),
            ProtocolParams::Bbm92 { source, .. } => bbm92_block_stats(source, profile, mode),
        }
    }

    /// Finite-key analysis appropriate for the protocol.
    pub fn secret_key(
        &self,
        stats: &BlockStats,
        security: &SecurityParams,
    ) -> Result<KeyResult, FiniteKeyError> {
        match self {
            ProtocolParams::DecoyBb84 {
                source,
                error_correction,
            } => skl_decoy_bb84(stats, source, error_correction, security),
            ProtocolParams::Bbm92 {
                error_correction,
                analysis,
                ..
            } => match analysis {
                Bbm92Analysis::Improved => skl_bbm92(stats, error_correction, security),
                Bbm92Analysis::Legacy => skl_bbm92_legacy(stats, error_correction, security),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linkbudget::{LossProfile, LossSample};
    use statrs::distribution::{Discrete, Hypergeometric};

    fn approx_eq(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn flat_profile(loss_db: f64, steps: usize) -> LossProfile {
        LossProfile {
            time_step_s: 1.0,
            samples: (0..steps)
                .map(|i| LossSample {
                    time_s: i as f64,
                    elevation_deg: 90.0,
                    loss_db,
                })
                .collect(),
        }
    }

    fn reference_decoy() -> DecoyParams {
        DecoyParams {
            source_rate_hz: 1e8,
            intensities: [0.5, 0.1, 0.0],
            probabilities: [0.7, 0.2, 0.1],
            basis_prob_x: 0.7,
            intrinsic_qber: 0.005,
            error_click_prob: 5e-7,
            background: None,
            gate_window_s: 1e-9,
            after_pulse_prob: 0.0,
        }
    }

    fn entangled_block(n_x: f64, m_x: f64, n_z: f64, m_z: f64) -> BlockStats {
        BlockStats {
            schema_version: 1,
            mode: CountMode::Expected,
            duration_s: 100.0,
            cells: vec![CellCounts {
                intensity: 0.02,
                sent: 1e9,
                n_x,
                m_x,
                n_z,
                m_z,
            }],
            photon_truth: None,
        }
    }

    #[test]
    fn entropy_reference_points() {
        for (p, expected) in [
            (0.11, 0.499915958165),
            (0.02, 0.141440542542),
            (0.0091, 0.0747658594875),
            (0.5, 1.0),
        ] {
            let got = binary_entropy(p);
            assert!(
                approx_eq(got, expected, 1e-11),
                "h({p}): expected {expected}, got {got}"
            );
        }
    }

    #[test]
    fn entropy_edges_and_symmetry() {
        assert_eq!(binary_entropy(0.0), 0.0);
        assert_eq!(binary_entropy(1.0), 0.0);
        for p in [0.01, 0.1, 0.3, 0.45] {
            assert!(
                approx_eq(binary_entropy(p), binary_entropy(1.0 - p), 1e-14),
                "entropy must be symmetric at {p}"
            );
            assert!(binary_entropy(p) < 1.0);
        }
    }

    #[test]
    fn chernoff_reference_points() {
        // Frozen at observed/mean 1e6, eps 1e-10.
        let (lo, up) = chernoff_mean_bounds(1e6, 1e-10);
        assert!(
            approx_eq(up - 1e6, 6809.205339, 1e-4),
            "expected mean upper gap 6809.205339, got {}",
            up - 1e6
        );
        assert!(
            approx_eq(1e6 - lo, 6774.637265, 1e-4),
            "expected mean lower gap 6774.637265, got {}",
            1e6 - lo
        );
        let (olo, oup) = chernoff_observation_bounds(1e6, 1e-10);
        assert!(
            approx_eq(oup - 1e6, 6797.663116, 1e-4),
            "expected observation upper gap 6797.663116, got {}",
            oup - 1e6
        );
        assert!(
            approx_eq(1e6 - olo, 6786.140424, 1e-4),
            "expected observation lower gap 6786.140424, got {}",
            1e6 - olo
        );
    }

    #[test]
    fn chernoff_zero_count_edges() {
        let beta = (1.0f64 / 1e-10).ln();
        let (lo, up) = chernoff_mean_bounds(0.0, 1e-10);
        assert_eq!(lo, 0.0);
        assert!(approx_eq(up, 2.0 * beta, 1e-9), "zero observation upper");
        let (olo, oup) = chernoff_observation_bounds(0.0, 1e-10);
        assert_eq!(olo, 0.0);
        assert!(approx_eq(oup, beta, 1e-9), "zero mean upper");
    }

    #[test]
    fn chernoff_coverage_by_poisson_enumeration() {
        // Exact coverage audit at an enumerable scale: mean 100, eps 1e-3.
        let mean = 100.0;
        let eps = 1e-3;
        let (obs_lo, obs_up) = chernoff_observation_bounds(mean, eps);
        let mut p_above = 0.0;
        let mut p_below = 0.0;
        let mut p_mean_above_up = 0.0;
        let mut p_mean_below_lo = 0.0;
        for x in 0u32..500 {
            let p = poisson_pmf(x, mean);
            let xf = f64::from(x);
            if xf > obs_up {
                p_above += p;
            }
            if xf < obs_lo {
                p_below += p;
            }
            let (mlo, mup) = chernoff_mean_bounds(xf, eps);
            if mean > mup {
                p_mean_above_up += p;
            }
            if mean < mlo {
                p_mean_below_lo += p;
            }
        }
        for (name, p) in [
            ("obs-above", p_above),
            ("obs-below", p_below),
            ("mean-above", p_mean_above_up),
            ("mean-below", p_mean_below_lo),
        ] {
            assert!(p <= eps, "{name} coverage violated: {p} > {eps}");
        }
    }

    #[test]
    fn sampling_reference_points() {
        let g1 = sampling_correction(1000.0, 1000.0, 0.02, 1e-10);
        assert!(
            approx_eq(g1, 0.0644193899632, 1e-10),
            "expected 0.0644193899632, got {g1}"
        );
        let g2 = sampling_correction(1e4, 1e4, 0.03, 5e-11);
        assert!(
            approx_eq(g2, 0.0173829595117, 1e-10),
            "expected 0.0173829595117, got {g2}"
        );
    }

    #[test]
    fn sampling_correction_vacuous_and_monotone() {
        assert_eq!(sampling_correction(100.0, 100.0, 0.5, 1e-10), 1.0);
        assert_eq!(sampling_correction(100.0, 100.0, 0.49, 1e-10), 1.0);
        assert_eq!(sampling_correction(0.0, 100.0, 0.1, 1e-10), 1.0);
        let small = sampling_correction(1e3, 1e3, 0.02, 1e-10);
        let large = sampling_correction(1e5, 1e5, 0.02, 1e-10);
        assert!(
            large < small,
            "correction must shrink with sample size: {large} vs {small}"
        );
    }

    #[test]
    fn sampling_correction_hypergeometric_coverage() {
        // Exhaustive audit for all splits with n + k <= 60 plus the worst
        // corners found in larger scans, at eps = 1e-6.
        let eps = 1e-6;
        let mut worst: f64 = 0.0;
        let mut audit = |n: u64, k: u64, errors: u64| {
            let population = n + k;
            let dist = Hypergeometric::new(population, errors, k).unwrap();
            let j_min = errors.saturating_sub(n);
            let j_max = errors.min(k);
            let mut p_viol = 0.0;
            for j in j_min..=j_max {
                let lambda = j as f64 / k as f64;
                let gamma = sampling_correction(n as f64, k as f64, lambda, eps);
                let key_rate = (errors - j) as f64 / n as f64;
                if key_rate > lambda + gamma {
                    p_viol += dist.pmf(j);
                }
            }
            worst = worst.max(p_viol / eps);
        };
        for total in 2u64..=60 {
            for n in 1..total {
                let k = total - n;
                for errors in 0..=total {
                    audit(n, k, errors);
                }
            }
        }
        audit(98, 96, 56);
        audit(30, 167, 110);
        for errors in 0..=200 {
            audit(1, 199, errors);
        }
        assert!(
            worst <= 1.0,
            "sampling bound failure probability reached {worst} x eps"
        );
    }

    #[test]
    fn serfling_reference_point() {
        let nu = serfling_correction(1e4, 1e4, 5e-10);
        assert!(
            approx_eq(nu, 0.046280184376, 1e-10),
            "expected 0.046280184376, got {nu}"
        );
    }

    #[test]
    fn mixture_weights_reference_points() {
        let mus = [0.5, 0.1, 0.0];
        let ps = [0.7, 0.2, 0.1];
        for (n, expected) in [(0, 0.7055389454), (1, 0.2303824793), (2, 0.05397627014)] {
            let got = poisson_mixture_weight(n, &mus, &ps);
            assert!(
                approx_eq(got, expected, 1e-9),
                "tau_{n}: expected {expected}, got {got}"
            );
        }
        let total: f64 = (0..40).map(|n| poisson_mixture_weight(n, &mus, &ps)).sum();
        assert!(approx_eq(total, 1.0, 1e-12), "weights must sum to 1");
    }

    #[test]
    fn ec_leakage_reference_points() {
        let eff = EcModel::EfficiencyFactor { factor: 1.18 };
        let got = eff.leakage(1e4, 0.02, 1e-15);
        assert!(
            approx_eq(got, 1668.99840199, 1e-6),
            "expected 1668.99840199, got {got}"
        );
        let syn = EcModel::SyndromeSet;
        let got = syn.leakage(1e4, 0.02, 1e-15);
        assert!(
            approx_eq(got, 1976.55483486, 1e-3),
            "expected 1976.55483486, got {got}"
        );
        // At larger blocks the syndrome estimate drops below the constant
        // 1.18 efficiency model.
        let syn_large = syn.leakage(1e5, 0.02, 1e-15);
        assert!(
            approx_eq(syn_large, 16054.3161964, 1e-2),
            "expected 16054.3161964, got {syn_large}"
        );
        assert!(syn_large < eff.leakage(1e5, 0.02, 1e-15));
        // Above the Shannon limit for blocks that are not tiny.
        for n in [1e3, 1e4, 1e6] {
            assert!(
                syn.leakage(n, 0.02, 1e-15) >= n * binary_entropy(0.02),
                "syndrome estimate below Shannon limit at n = {n}"
            );
        }
        assert_eq!(eff.leakage(1e4, 0.0, 1e-15), 0.0);
        assert_eq!(eff.leakage(1e4, 0.6, 1e-15), 1e4, "cap at full disclosure");
    }

    #[test]
    fn decoy_bounds_are_honest_against_photon_truth() {
        let params = reference_decoy();
        for loss_db in [25.0, 34.0, 40.0] {
            let stats =
                wcp_block_stats(&params, &flat_profile(loss_db, 100), CountMode::Expected).unwrap();
            let truth = stats.photon_truth.unwrap();
            let yields =
                decoy_yield_bounds(&stats.cells, &params, 1e-10 / DECOY_EPSILON_SLOTS).unwrap();
            assert!(
                yields.s0_key_lower <= truth.vacuum_x,
                "vacuum bound {} exceeds truth {} at {loss_db} dB",
                yields.s0_key_lower,
                truth.vacuum_x
            );
            assert!(
                yields.s1_key_lower <= truth.single_x,
                "single bound {} exceeds truth {} at {loss_db} dB",
                yields.s1_key_lower,
                truth.single_x
            );
            assert!(
                yields.s1_test_lower <= truth.single_z,
                "test single bound {} exceeds truth {} at {loss_db} dB",
                yields.s1_test_lower,
                truth.single_z
            );
            assert!(
                yields.v1_test_upper >= truth.single_z_errors,
                "error bound {} below truth {} at {loss_db} dB",
                yields.v1_test_upper,
                truth.single_z_errors
            );
        }
        // The bounds must also be usefully tight on a large block.
        let stats =
            wcp_block_stats(&params, &flat_profile(34.0, 100), CountMode::Expected).unwrap();
        let truth = stats.photon_truth.unwrap();
        let yields =
            decoy_yield_bounds(&stats.cells, &params, 1e-10 / DECOY_EPSILON_SLOTS).unwrap();
        assert!(
            yields.s1_key_lower > 0.5 * truth.single_x,
            "single-photon bound uselessly loose: {} vs truth {}",
            yields.s1_key_lower,
            truth.single_x
        );
    }

    #[test]
    fn decoy_key_length_reference_chain() {
        // Frozen end-to-end anchor: 100 s at a flat 34 dB with the
        // reference source gives exactly 220139 bits.
        let params = reference_decoy();
        let stats =
            wcp_block_stats(&params, &flat_profile(34.0, 100), CountMode::Expected).unwrap();
        let security = SecurityParams {
            eps_sec: 1e-10,
            eps_cor: 1e-15,
        };
        let result = skl_decoy_bb84(
            &stats,
            &params,
            &EcModel::EfficiencyFactor { factor: 1.16 },
            &security,
        )
        .unwrap();
        assert_eq!(
            result.secret_key_length, 220139,
            "expected 220139 bits, got {} (raw {})",
            result.secret_key_length, result.key_length_raw
        );
        assert!(
            approx_eq(result.phase_error_bound, 0.05596661496, 1e-8),
            "expected phase bound 0.05596661496, got {}",
            result.phase_error_bound
        );
        assert!(
            approx_eq(result.ec_leakage_bits, 58631.4383842, 1e-3),
            "expected leakage 58631.4383842, got {}",
            result.ec_leakage_bits
        );
        assert!(!result.diagnostics.vacuous_phase_bound);
    }

    #[test]
    fn decoy_key_vanishes_at_high_loss() {
        let params = reference_decoy();
        let stats =
            wcp_block_stats(&params, &flat_profile(55.0, 100), CountMode::Expected).unwrap();
        let result = skl_decoy_bb84(
            &stats,
            &params,
            &EcModel::EfficiencyFactor { factor: 1.16 },
            &SecurityParams::default(),
        )
        .unwrap();
        assert_eq!(
            result.secret_key_length, 0,
            "55 dB for 100 s must yield nothing, got {}",
            result.secret_key_length
        );
    }

    #[test]
    fn decoy_key_grows_with_time() {
        let params = reference_decoy();
        let security = SecurityParams::default();
        let ec = EcModel::EfficiencyFactor { factor: 1.16 };
        let short = skl_decoy_bb84(
            &wcp_block_stats(&params, &flat_profile(34.0, 50), CountMode::Expected).unwrap(),
            &params,
            &ec,
            &security,
        )
        .unwrap();
        let long = skl_decoy_bb84(
            &wcp_block_stats(&params, &flat_profile(34.0, 200), CountMode::Expected).unwrap(),
            &params,
            &ec,
            &security,
        )
        .unwrap();
        assert!(
            long.secret_key_length > 2 * short.secret_key_length,
            "finite-size overheads must amortize: {} vs {}",
            long.secret_key_length,
            short.secret_key_length
        );
    }

    #[test]
    fn bbm92_reference_points_and_analysis_gap() {
        // Frozen: n = 1e4, 2% errors in both bases, eps_sec 1e-9,
        // eps_cor 1e-15, efficiency 1.16.
        let stats = entangled_block(1e4, 200.0, 1e4, 200.0);
        let security = SecurityParams {
            eps_sec: 1e-9,
            eps_cor: 1e-15,
        };
        let ec = EcModel::EfficiencyFactor { factor: 1.16 };
        let improved = skl_bbm92(&stats, &ec, &security).unwrap();
        let legacy = skl_bbm92_legacy(&stats, &ec, &security).unwrap();
        assert_eq!(
            improved.secret_key_length, 6115,
            "expected 6115 bits, got {} (raw {})",
            improved.secret_key_length, improved.key_length_raw
        );
        assert_eq!(
            legacy.secret_key_length, 4727,
            "expected 4727 bits, got {} (raw {})",
            legacy.secret_key_length, legacy.key_length_raw
        );
        let ratio = improved.secret_key_length as f64 / legacy.secret_key_length as f64;
        assert!(
            approx_eq(ratio, 1.2934688, 1e-3),
            "expected ratio 1.2934688, got {ratio}"
        );
    }

    #[test]
    fn bbm92_key_vanishes_at_high_qber() {
        let stats = entangled_block(1e4, 1200.0, 1e4, 1200.0);
        let result = skl_bbm92(
            &stats,
            &EcModel::EfficiencyFactor { factor: 1.16 },
            &SecurityParams::default(),
        )
        .unwrap();
        assert_eq!(
            result.secret_key_length, 0,
            "12% QBER at n = 1e4 must yield nothing, got {}",
            result.secret_key_length
        );
    }

    #[test]
    fn bbm92_empty_block_is_vacuous_not_panicking() {
        let stats = entangled_block(0.0, 0.0, 0.0, 0.0);
        let result = skl_bbm92(
            &stats,
            &EcModel::EfficiencyFactor { factor: 1.16 },
            &SecurityParams::default(),
        )
        .unwrap();
        assert_eq!(result.secret_key_length, 0);
        assert!(result.diagnostics.vacuous_phase_bound);
    }

    #[test]
    fn protocol_params_dispatch_and_serde() {
        let decoy = ProtocolParams::DecoyBb84 {
            source: reference_decoy(),
            error_correction: EcModel::EfficiencyFactor { factor: 1.16 },
        };
        let text = serde_json::to_string(&decoy).unwrap();
        assert!(
            text.contains("\"protocol\":\"decoy_bb84\""),
            "tag missing: {text}"
        );
        let back: ProtocolParams = serde_json::from_str(&text).unwrap();
        // 100 s block: a 10 s block at this loss leaves too few test-basis
        // decoy counts for a non-vacuous phase bound.
        let profile = flat_profile(34.0, 100);
        let stats = back.block_stats(&profile, CountMode::Expected).unwrap();
        let result = back.secret_key(&stats, &SecurityParams::default()).unwrap();
        assert!(result.secret_key_length > 0);

        let entangled = ProtocolParams::Bbm92 {
            source: Bbm92Params {
                pair_rate_hz: 2e7,
                local_efficiency: 0.25,
                dark_count_cps: 2000.0,
                background: None,
                coincidence_window_s: 1e-9,
                dead_time_s: 0.0,
                after_pulse_prob: 0.0,
                intrinsic_qber: 0.0091,
            },
            error_correction: EcModel::EfficiencyFactor { factor: 1.16 },
            analysis: Bbm92Analysis::default(),
        };
        let text = serde_json::to_string(&entangled).unwrap();
        assert!(
            text.contains("\"protocol\":\"bbm92\""),
            "tag missing: {text}"
        );
        let back: ProtocolParams = serde_json::from_str(&text).unwrap();
        let stats = back
            .block_stats(&flat_profile(30.5, 300), CountMode::Expected)
            .unwrap();
        let result = back
            .secret_key(
                &stats,
                &SecurityParams {
                    eps_sec: 1e-9,
                    eps_cor: 1e-12,
                },
            )
            .unwrap();
        assert!(
            result.secret_key_length > 0,
            "raw {}",
            result.key_length_raw
        );
    }

    #[test]
    fn key_result_serializes() {
        let stats = entangled_block(1e4, 200.0, 1e4, 200.0);
        let result = skl_bbm92(
            &stats,
            &EcModel::EfficiencyFactor { factor: 1.16 },
            &SecurityParams::default(),
        )
        .unwrap();
        let text = serde_json::to_string(&result).unwrap();
        let back: KeyResult = serde_json::from_str(&text).unwrap();
        assert_eq!(back.secret_key_length, result.secret_key_length);
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        let stats = entangled_block(1e4, 200.0, 1e4, 200.0);
        let bad = SecurityParams {
            eps_sec: 0.0,
            eps_cor: 1e-15,
        };
        assert!(skl_bbm92(&stats, &EcModel::SyndromeSet, &bad).is_err());
        let params = reference_decoy();
        assert!(
            skl_decoy_bb84(
                &stats,
                &params,
                &EcModel::SyndromeSet,
                &SecurityParams::default()
            )
            .is_err(),
            "single-cell block must be rejected by the decoy analysis"
        );
    }
}
