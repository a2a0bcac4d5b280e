//! Detection statistics for the two source models:
//!
//! * weak coherent pulses with decoy intensities (prepare-and-measure), and
//! * entangled pair sources measured on both arms (one local, one through
//!   the link).
//!
//! Both models turn a time-resolved loss profile into sifted detection and
//! error counts for one block, either as expectation values or as seeded
//! Monte Carlo draws.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::linkbudget::LossProfile;
use crate::util::db_to_transmittance;

// ----------------------------------------------------------------------------
// Errors
// ----------------------------------------------------------------------------

#[derive(Debug, thiserror::Error)]
pub enum DetStatsError {
    #[error("source rate {0} Hz must be positive")]
    NonPositiveRate(f64),
    #[error("intensities must satisfy mu1 > mu2 > mu3 >= 0 and mu1 > mu2 + mu3, got {0:?}")]
    BadIntensities([f64; 3]),
    #[error("intensity probabilities must be positive and sum to 1, got {0:?}")]
    BadProbabilities([f64; 3]),
    #[error("basis probability {0} must lie in (0, 1)")]
    BadBasisProbability(f64),
    #[error("probability {name} = {value} outside [0, 1)")]
    BadProbability { name: &'static str, value: f64 },
    #[error("window {0} s must be positive")]
    BadWindow(f64),
    #[error("efficiency {0} outside [0, 1]")]
    BadEfficiency(f64),
}

// ----------------------------------------------------------------------------
// Background models
// ----------------------------------------------------------------------------

/// Sky and stray-light count rate reaching the link-coupled detector.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum BackgroundModel {
    /// Elevation-independent rate.
    Constant { cps: f64 },
    /// Zenith rate scaled by airmass 1/sin(elevation), capped below
    /// `min_elevation_deg`.
    Airmass {
        zenith_cps: f64,
        min_elevation_deg: f64,
    },
    /// Piecewise-linear table of (elevation_deg, cps), clamped at the ends.
    Table { knots: Vec<(f64, f64)> },
}

impl BackgroundModel {
    /// Background count rate in counts per second at the given elevation.
    pub fn rate_cps(&self, elevation_deg: f64) -> f64 {
        match self {
            BackgroundModel::Constant { cps } => *cps,
            BackgroundModel::Airmass {
                zenith_cps,
                min_elevation_deg,
            } => {
                let capped = elevation_deg.max(*min_elevation_deg).min(90.0);
                zenith_cps / capped.to_radians().sin()
            }
            BackgroundModel::Table { knots } => {
                if knots.is_empty() {
                    return 0.0;
                }
                if elevation_deg <= knots[0].0 {
                    return knots[0].1;
                }
                let last = knots[knots.len() - 1];
                if elevation_deg >= last.0 {
                    return last.1;
                }
                let idx = knots.partition_point(|k| k.0 <= elevation_deg);
                let (e0, r0) = knots[idx - 1];
                let (e1, r1) = knots[idx];
                r0 + (elevation_deg - e0) / (e1 - e0) * (r1 - r0)
            }
        }
    }
}

// ----------------------------------------------------------------------------
// Count modes and block containers
// ----------------------------------------------------------------------------

/// Whether a block carries expectation values or one seeded random draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum CountMode {
    #[default]
    Expected,
    Sampled {
        seed: u64,
    },
}

/// Sifted counts for one source setting (one decoy intensity, or the single
/// pair-source cell).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellCounts {
    /// Mean photon number for weak coherent cells; mean pairs per
    /// coincidence window for entangled cells.
    pub intensity: f64,
    /// Pulses (or pair windows) attributed to this cell.
    pub sent: f64,
    /// Sifted detections and errors in the key (X) basis.
    pub n_x: f64,
    pub m_x: f64,
    /// Sifted detections and errors in the test (Z) basis.
    pub n_z: f64,
    pub m_z: f64,
}

/// Sifted counts split by emitted photon number; diagnostic ground truth
/// for the decoy-state bounds. Expectation values in expected mode; the
/// realized per-draw decomposition in sampled mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhotonTruth {
    pub vacuum_x: f64,
    pub single_x: f64,
    pub multi_x: f64,
    pub single_x_errors: f64,
    pub vacuum_z: f64,
    pub single_z: f64,
    pub multi_z: f64,
    pub single_z_errors: f64,
}

fn schema_version_default() -> u32 {
    1
}

/// Accumulated detection statistics for one block (one pass, or one pooled
/// collection of passes).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlockStats {
    #[serde(default = "schema_version_default")]
    pub schema_version: u32,
    pub mode: CountMode,
    pub duration_s: f64,
    pub cells: Vec<CellCounts>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub photon_truth: Option<PhotonTruth>,
}

impl BlockStats {
    pub fn n_x_total(&self) -> f64 {
        self.cells.iter().map(|c| c.n_x).sum()
    }

    pub fn m_x_total(&self) -> f64 {
        self.cells.iter().map(|c| c.m_x).sum()
    }

    pub fn n_z_total(&self) -> f64 {
        self.cells.iter().map(|c| c.n_z).sum()
    }

    pub fn m_z_total(&self) -> f64 {
        self.cells.iter().map(|c| c.m_z).sum()
    }

    /// Observed key-basis error rate, if any detections exist.
    pub fn qber_x(&self) -> Option<f64> {
        let n = self.n_x_total();
        (n > 0.0).then(|| self.m_x_total() / n)
    }

    pub fn qber_z(&self) -> Option<f64> {
        let n = self.n_z_total();
        (n > 0.0).then(|| self.m_z_total() / n)
    }

    /// Merge another block into this one (same cell layout required).
    pub fn merge(&mut self, other: &BlockStats) {
        assert_eq!(
            self.cells.len(),
            other.cells.len(),
            "cannot merge blocks with different cell layouts"
        );
        self.duration_s += other.duration_s;
        for (a, b) in self.cells.iter_mut().zip(&other.cells) {
            a.sent += b.sent;
            a.n_x += b.n_x;
            a.m_x += b.m_x;
            a.n_z += b.n_z;
            a.m_z += b.m_z;
        }
        self.photon_truth = match (self.photon_truth, other.photon_truth) {
            (Some(a), Some(b)) => Some(PhotonTruth {
                vacuum_x: a.vacuum_x + b.vacuum_x,
                single_x: a.single_x + b.single_x,
                multi_x: a.multi_x + b.multi_x,
                single_x_errors: a.single_x_errors + b.single_x_errors,
                vacuum_z: a.vacuum_z + b.vacuum_z,
                single_z: a.single_z + b.single_z,
                multi_z: a.multi_z + b.multi_z,
                single_z_errors: a.single_z_errors + b.single_z_errors,
            }),
            _ => None,
        };
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("block stats serialize")
    }
}

/// Interference visibility implied by an error rate: V = 1 - 2 Q.
pub fn visibility_from_qber(qber: f64) -> f64 {
    1.0 - 2.0 * qber
}

// ----------------------------------------------------------------------------
// Weak coherent pulse (decoy) model
// ----------------------------------------------------------------------------

/// Transmitter and channel-noise parameters for a three-intensity decoy
/// source. The third intensity may be vacuum (0).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecoyParams {
    pub source_rate_hz: f64,
    /// Decreasing intensities (mu1, mu2, mu3) with mu1 > mu2 + mu3.
    pub intensities: [f64; 3],
    /// Emission probabilities for the three intensities; sum to 1.
    pub probabilities: [f64; 3],
    /// Probability that either party picks the key (X) basis.
    pub basis_prob_x: f64,
    /// Misalignment error carried by signal photons.
    pub intrinsic_qber: f64,
    /// Baseline per-pulse error-click probability (dark counts and fixed
    /// stray light); half of the full noise-click probability 2 p_ec.
    pub error_click_prob: f64,
    /// Optional elevation-dependent background added on top of
    /// `error_click_prob` as 0.5 * rate * gate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub background: Option<BackgroundModel>,
    /// Detection gate used to convert background rates into per-pulse
    /// probabilities.
    #[serde(default = "default_gate_window")]
    pub gate_window_s: f64,
    /// After-pulse fraction; inflates every detection class by (1 + p_ap)
    /// with the extra events carrying error rate 1/2.
    #[serde(default)]
    pub after_pulse_prob: f64,
}

fn default_gate_window() -> f64 {
    1e-9
}

impl DecoyParams {
    pub fn validate(&self) -> Result<(), DetStatsError> {
        if self.source_rate_hz <= 0.0 {
            return Err(DetStatsError::NonPositiveRate(self.source_rate_hz));
        }
        let [m1, m2, m3] = self.intensities;
        if !(m1 > m2 && m2 > m3 && m3 >= 0.0 && m1 > m2 + m3) {
            return Err(DetStatsError::BadIntensities(self.intensities));
        }
        let psum: f64 = self.probabilities.iter().sum();
        if self.probabilities.iter().any(|&p| p <= 0.0) || (psum - 1.0).abs() > 1e-9 {
            return Err(DetStatsError::BadProbabilities(self.probabilities));
        }
        if !(self.basis_prob_x > 0.0 && self.basis_prob_x < 1.0) {
            return Err(DetStatsError::BadBasisProbability(self.basis_prob_x));
        }
        for (name, value) in [
            ("intrinsic_qber", self.intrinsic_qber),
            ("error_click_prob", self.error_click_prob),
            ("after_pulse_prob", self.after_pulse_prob),
        ] {
            if !(0.0..0.5).contains(&value) {
                return Err(DetStatsError::BadProbability { name, value });
            }
        }
        if self.background.is_some() && self.gate_window_s <= 0.0 {
            return Err(DetStatsError::BadWindow(self.gate_window_s));
        }
        Ok(())
    }

    fn error_click_prob_at(&self, elevation_deg: f64) -> f64 {
        let bg = self
            .background
            .as_ref()
            .map(|b| 0.5 * b.rate_cps(elevation_deg) * self.gate_window_s)
            .unwrap_or(0.0);
        self.error_click_prob + bg
    }
}

/// Per-pulse click probability for intensity mu through transmittance eta:
///
///   D = 1 - (1 - 2 p_ec) exp(-eta mu)
pub fn wcp_click_prob(mu: f64, eta: f64, p_ec: f64) -> f64 {
    1.0 - (1.0 - 2.0 * p_ec) * (-eta * mu).exp()
}

/// Per-pulse error-click probability:
///
///   e = p_ec + q_int (1 - exp(-eta mu))
pub fn wcp_error_prob(mu: f64, eta: f64, p_ec: f64, intrinsic_qber: f64) -> f64 {
    p_ec + intrinsic_qber * (1.0 - (-eta * mu).exp())
}

/// Click probability conditioned on an n-photon emission:
///
///   Y_n = 1 - (1 - 2 p_ec) (1 - eta)^n
///
/// Mixing Y_n over the Poisson photon-number distribution reproduces
/// `wcp_click_prob` exactly.
pub fn wcp_photon_yield(n: u32, eta: f64, p_ec: f64) -> f64 {
    1.0 - (1.0 - 2.0 * p_ec) * (1.0 - eta).powi(n as i32)
}

/// Error-click probability conditioned on an n-photon emission:
///
///   e_n = p_ec + q_int (1 - (1 - eta)^n)
///
/// Mixing e_n over the Poisson distribution reproduces `wcp_error_prob`.
pub fn wcp_photon_error_prob(n: u32, eta: f64, p_ec: f64, intrinsic_qber: f64) -> f64 {
    p_ec + intrinsic_qber * (1.0 - (1.0 - eta).powi(n as i32))
}

/// Poisson probability mass exp(-mu) mu^n / n!.
pub fn poisson_pmf(n: u32, mu: f64) -> f64 {
    if mu == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let ln_p = -mu + f64::from(n) * mu.ln() - statrs::function::gamma::ln_gamma(f64::from(n) + 1.0);
    ln_p.exp()
}

/// Accumulate sifted decoy-state statistics over a loss profile.
///
/// Expected mode stores expectation values; sampled mode draws binomial
/// counts per time step and intensity from a ChaCha stream seeded by
/// `seed`, so identical inputs reproduce identical blocks.
pub fn wcp_block_stats(
    params: &DecoyParams,
    profile: &LossProfile,
    mode: CountMode,
) -> Result<BlockStats, DetStatsError> {
    params.validate()?;
    let mut rng = match mode {
        CountMode::Sampled { seed } => Some(ChaCha12Rng::seed_from_u64(seed)),
        CountMode::Expected => None,
    };
    let mut cells: Vec<CellCounts> = params
        .intensities
        .iter()
        .map(|&mu| CellCounts {
            intensity: mu,
            sent: 0.0,
            n_x: 0.0,
            m_x: 0.0,
            n_z: 0.0,
            m_z: 0.0,
        })
        .collect();
    let mut truth = PhotonTruth {
        vacuum_x: 0.0,
        single_x: 0.0,
        multi_x: 0.0,
        single_x_errors: 0.0,
        vacuum_z: 0.0,
        single_z: 0.0,
        multi_z: 0.0,
        single_z_errors: 0.0,
    };
    let sift_x = params.basis_prob_x * params.basis_prob_x;
    let sift_z = (1.0 - params.basis_prob_x) * (1.0 - params.basis_prob_x);
    let dt = profile.time_step_s;

    let ap = params.after_pulse_prob;
    for sample in &profile.samples {
        let eta = db_to_transmittance(sample.loss_db);
        let p_ec = params.error_click_prob_at(sample.elevation_deg);
        let pulses = params.source_rate_hz * dt;
        for (k, cell) in cells.iter_mut().enumerate() {
            let mu = params.intensities[k];
            let sent = pulses * params.probabilities[k];
            cell.sent += sent;
            // Per-pulse click and error masses split by emitted photon
            // number (vacuum / single / multi), each inflated by the
            // after-pulse factor with the extra events erring at 1/2.
            let d = wcp_click_prob(mu, eta, p_ec);
            let e = wcp_error_prob(mu, eta, p_ec, params.intrinsic_qber);
            let p0 = poisson_pmf(0, mu);
            let p1 = poisson_pmf(1, mu);
            let y0 = wcp_photon_yield(0, eta, p_ec);
            let y1 = wcp_photon_yield(1, eta, p_ec);
            let e1 = wcp_photon_error_prob(1, eta, p_ec, params.intrinsic_qber);
            let class_click = [p0 * y0, p1 * y1, (d - p0 * y0 - p1 * y1).max(0.0)];
            let class_error = [p0 * p_ec, p1 * e1, (e - p0 * p_ec - p1 * e1).max(0.0)];
            let mut click_prob = [0.0_f64; 3];
            let mut err_ratio = [0.0_f64; 3];
            for c in 0..3 {
                click_prob[c] = (class_click[c] * (1.0 + ap)).clamp(0.0, 1.0);
                err_ratio[c] = if class_click[c] > 0.0 {
                    ((class_error[c] + class_click[c] * ap / 2.0) / (class_click[c] * (1.0 + ap)))
                        .clamp(0.0, 1.0)
                } else {
                    0.0
                };
            }
            for (sift, n_acc, m_acc, truth_acc) in [
                (
                    sift_x,
                    &mut cell.n_x,
                    &mut cell.m_x,
                    [
                        &mut truth.vacuum_x,
                        &mut truth.single_x,
                        &mut truth.multi_x,
                        &mut truth.single_x_errors,
                    ],
                ),
                (
                    sift_z,
                    &mut cell.n_z,
                    &mut cell.m_z,
                    [
                        &mut truth.vacuum_z,
                        &mut truth.single_z,
                        &mut truth.multi_z,
                        &mut truth.single_z_errors,
                    ],
                ),
            ] {
                match rng.as_mut() {
                    None => {
                        let trials = sent * sift;
                        let counts = [
                            trials * click_prob[0],
                            trials * click_prob[1],
                            trials * click_prob[2],
                        ];
                        for c in 0..3 {
                            *n_acc += counts[c];
                            *m_acc += counts[c] * err_ratio[c];
                            *truth_acc[c] += counts[c];
                        }
                        *truth_acc[3] += counts[1] * err_ratio[1];
                    }
                    Some(rng) => {
                        // Multinomial over (vacuum, single, multi, no
                        // click) drawn as a binomial chain so each class
                        // count is exact.
                        let mut remaining = (sent * sift).round() as u64;
                        let mut mass_left = 1.0;
                        for c in 0..3 {
                            let p_cond = (click_prob[c] / mass_left).clamp(0.0, 1.0);
                            let n = Binomial::new(remaining, p_cond)
                                .expect("binomial parameters")
                                .sample(rng);
                            let m = Binomial::new(n, err_ratio[c])
                                .expect("binomial parameters")
                                .sample(rng);
                            *n_acc += n as f64;
                            *m_acc += m as f64;
                            *truth_acc[c] += n as f64;
                            if c == 1 {
                                *truth_acc[3] += m as f64;
                            }
                            remaining -= n;
                            mass_left -= click_prob[c];
                        }
                    }
                }
            }
        }
    }

    Ok(BlockStats {
        schema_version: schema_version_default(),
        mode,
        duration_s: profile.samples.len() as f64 * dt,
        cells,
        photon_truth: Some(truth),
    })
}

// ----------------------------------------------------------------------------
// Entangled pair (BBM92) model
// ----------------------------------------------------------------------------

/// Pair source, local arm, and detector-noise parameters for an entangled
/// link with one arm kept at the source and one sent through the channel.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bbm92Params {
    pub pair_rate_hz: f64,
    /// Efficiency of the arm that never enters the link (optics times
    /// detector).
    pub local_efficiency: f64,
    /// Dark counts per second, per arm.
    pub dark_count_cps: f64,
    /// Sky background on the link-coupled arm.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub background: Option<BackgroundModel>,
    pub coincidence_window_s: f64,
    /// Non-extending detector dead time; derates each arm by
    /// 1 / (1 + S tau_dead).
    #[serde(default)]
    pub dead_time_s: f64,
    /// After-pulse fraction; inflates detected coincidences by (1 + p_ap)
    /// with the extra events carrying error rate 1/2.
    #[serde(default)]
    pub after_pulse_prob: f64,
    /// Misalignment error carried by true coincidences.
    pub intrinsic_qber: f64,
}

impl Bbm92Params {
    pub fn validate(&self) -> Result<(), DetStatsError> {
        if self.pair_rate_hz <= 0.0 {
            return Err(DetStatsError::NonPositiveRate(self.pair_rate_hz));
        }
        if !(0.0..=1.0).contains(&self.local_efficiency) {
            return Err(DetStatsError::BadEfficiency(self.local_efficiency));
        }
        if self.coincidence_window_s <= 0.0 {
            return Err(DetStatsError::BadWindow(self.coincidence_window_s));
        }
        for (name, value) in [
            ("intrinsic_qber", self.intrinsic_qber),
            ("after_pulse_prob", self.after_pulse_prob),
        ] {
            if !(0.0..0.5).contains(&value) {
                return Err(DetStatsError::BadProbability { name, value });
            }
        }
        Ok(())
    }
}

/// Instantaneous rates for an entangled link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bbm92Rates {
    /// True coincidences per second: C = R eta_s eta_i.
    pub coincidence_hz: f64,
    /// Accidental coincidences per second: A = S1 S2 tau_c.
    pub accidental_hz: f64,
    /// Singles on the link-coupled (signal) arm: S1 = R eta_s + dark + bg.
    pub singles_signal_hz: f64,
    /// Singles on the local (idler) arm: S2 = R eta_i + dark.
    pub singles_idler_hz: f64,
}

/// Coincidence, accidental, and singles rates from first principles.
pub fn bbm92_rates(
    pair_rate_hz: f64,
    eta_signal: f64,
    eta_idler: f64,
    dark_count_cps: f64,
    background_cps: f64,
    coincidence_window_s: f64,
) -> Bbm92Rates {
    let coincidence_hz = pair_rate_hz * eta_signal * eta_idler;
    let singles_signal_hz = pair_rate_hz * eta_signal + dark_count_cps + background_cps;
    let singles_idler_hz = pair_rate_hz * eta_idler + dark_count_cps;
    let accidental_hz = singles_signal_hz * singles_idler_hz * coincidence_window_s;
    Bbm92Rates {
        coincidence_hz,
        accidental_hz,
        singles_signal_hz,
        singles_idler_hz,
    }
}

/// Error rate of the coincidence stream: true pairs err at the intrinsic
/// rate, accidentals err half the time:
///
///   Q = (q_int C + A / 2) / (C + A)
pub fn bbm92_qber(rates: &Bbm92Rates, intrinsic_qber: f64) -> f64 {
    let c = rates.coincidence_hz;
    let a = rates.accidental_hz;
    if c + a <= 0.0 {
        return 0.5;
    }
    (intrinsic_qber * c + a / 2.0) / (c + a)
}

/// Accumulate sifted entangled-link statistics over a loss profile.
///
/// Per time step: rates from `bbm92_rates`, each arm derated for dead time
/// by 1/(1 + S tau_dead), accidentals rebuilt from the derated singles,
/// after-pulse inflation applied last. Unbiased basis choice sifts 1/4 of
/// coincidences into each of X and Z.
pub fn bbm92_block_stats(
    params: &Bbm92Params,
    profile: &LossProfile,
    mode: CountMode,
) -> Result<BlockStats, DetStatsError> {
    params.validate()?;
    let mut rng = match mode {
        CountMode::Sampled { seed } => Some(ChaCha12Rng::seed_from_u64(seed)),
        CountMode::Expected => None,
    };
    let mut cell = CellCounts {
        intensity: params.pair_rate_hz * params.coincidence_window_s,
        sent: 0.0,
        n_x: 0.0,
        m_x: 0.0,
        n_z: 0.0,
        m_z: 0.0,
    };
    let dt = profile.time_step_s;

    for sample in &profile.samples {
        let eta_signal = db_to_transmittance(sample.loss_db);
        let bg_cps = params
            .background
            .as_ref()
            .map(|b| b.rate_cps(sample.elevation_deg))
            .unwrap_or(0.0);
        let raw = bbm92_rates(
            params.pair_rate_hz,
            eta_signal,
            params.local_efficiency,
            params.dark_count_cps,
            bg_cps,
            params.coincidence_window_s,
        );
        let derate_signal = 1.0 / (1.0 + raw.singles_signal_hz * params.dead_time_s);
        let derate_idler = 1.0 / (1.0 + raw.singles_idler_hz * params.dead_time_s);
        let coincidence = raw.coincidence_hz * derate_signal * derate_idler;
        let accidental = (raw.singles_signal_hz * derate_signal)
            * (raw.singles_idler_hz * derate_idler)
            * params.coincidence_window_s;
        let detected = (coincidence + accidental) * (1.0 + params.after_pulse_prob);
        let errors = params.intrinsic_qber * coincidence
            + accidental / 2.0
            + (coincidence + accidental) * params.after_pulse_prob / 2.0;

        cell.sent += params.pair_rate_hz * dt;
        let mean_per_basis = detected * dt / 4.0;
        let err_ratio = (errors / detected).clamp(0.0, 1.0);
        for (n_acc, m_acc) in [
            (&mut cell.n_x, &mut cell.m_x),
            (&mut cell.n_z, &mut cell.m_z),
        ] {
            match rng.as_mut() {
                None => {
                    *n_acc += mean_per_basis;
                    *m_acc += mean_per_basis * err_ratio;
                }
                Some(rng) => {
                    let n = if mean_per_basis > 0.0 {
                        Poisson::new(mean_per_basis)
                            .expect("poisson parameter")
                            .sample(rng)
                            .round() as u64
                    } else {
                        0
                    };
                    let m = Binomial::new(n, err_ratio)
                        .expect("binomial parameters")
                        .sample(rng);
                    *n_acc += n as f64;
                    *m_acc += m as f64;
                }
            }
        }
    }

    Ok(BlockStats {
        schema_version: schema_version_default(),
        mode,
        duration_s: profile.samples.len() as f64 * dt,
        cells: vec![cell],
        photon_truth: None,
    })
}
