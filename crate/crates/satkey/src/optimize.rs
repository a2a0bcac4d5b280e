//! Protocol-parameter and transmission-window optimization.
//!
//! The secret key length for a pass depends on the source intensities, their
//! emission probabilities, the basis bias, and on how much of the pass is
//! used for key generation. This module searches that space with a
//! deterministic multi-start simplex method on the continuous parameters,
//! nested inside a one-dimensional scan over elevation-threshold windows.
//! Infeasible candidates are rejected, never projected, so every evaluation
//! in the trace corresponds to a parameter set that satisfies the protocol
//! invariants.

use std::collections::HashSet;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::detstats::{CountMode, DetStatsError};
use crate::finitekey::{FiniteKeyError, KeyResult, ProtocolParams, SecurityParams};
use crate::linkbudget::{loss_profile, LinkError, LossProfile, OpticalChain};
use crate::orbit::PassGeometry;
use crate::util::derive_seed;

// ----------------------------------------------------------------------------
// Errors
// ----------------------------------------------------------------------------

#[derive(Debug, thiserror::Error)]
pub enum OptimizeError {
    #[error("window fraction {0} outside (0, 1]")]
    BadFraction(f64),
    #[error("elevation threshold {0} deg leaves no samples")]
    EmptyCut(f64),
    #[error("pass has {pass} samples but loss profile has {profile}")]
    MismatchedProfile { pass: usize, profile: usize },
    #[error("pass contains no samples")]
    EmptyPass,
    #[error("parameter {0:?} listed twice in free_parameters")]
    DuplicateParameter(FreeParameter),
    #[error("parameter {0:?} does not apply to the configured protocol")]
    ParameterNotApplicable(FreeParameter),
    #[error("bounds for {parameter:?} invalid: [{lower}, {upper}]")]
    BadBound {
        parameter: FreeParameter,
        lower: f64,
        upper: f64,
    },
    #[error("tolerance {0} must be positive")]
    BadTolerance(f64),
    #[error("no evaluated candidate achieved a positive key length")]
    NoPositiveKey,
    #[error(transparent)]
    Link(#[from] LinkError),
    #[error(transparent)]
    DetStats(#[from] DetStatsError),
    #[error(transparent)]
    FiniteKey(#[from] FiniteKeyError),
}

// ----------------------------------------------------------------------------
// Specification types
// ----------------------------------------------------------------------------

/// A protocol or window parameter the optimizer may vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FreeParameter {
    /// Signal intensity mu1.
    Mu1,
    /// Decoy intensity mu2 (mu3 stays fixed, typically vacuum).
    Mu2,
    /// Emission probability of the signal intensity; p3 = 1 - p1 - p2.
    P1,
    /// Emission probability of the decoy intensity.
    P2,
    /// Key-basis probability p_X.
    PX,
    /// Fraction of the above-horizon pass kept for key generation.
    WindowFraction,
}

impl FreeParameter {
    pub fn name(self) -> &'static str {
        match self {
            FreeParameter::Mu1 => "mu1",
            FreeParameter::Mu2 => "mu2",
            FreeParameter::P1 => "p1",
            FreeParameter::P2 => "p2",
            FreeParameter::PX => "p_x",
            FreeParameter::WindowFraction => "window_fraction",
        }
    }

    /// Conservative default search box.
    fn default_bounds(self) -> (f64, f64) {
        match self {
            FreeParameter::Mu1 => (0.1, 1.0),
            FreeParameter::Mu2 => (0.01, 0.5),
            FreeParameter::P1 => (0.05, 0.9),
            FreeParameter::P2 => (0.05, 0.9),
            FreeParameter::PX => (0.05, 0.95),
            FreeParameter::WindowFraction => (0.0, 1.0),
        }
    }
}

/// Explicit search interval for one free parameter.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterRange {
    pub parameter: FreeParameter,
    pub lower: f64,
    pub upper: f64,
}

/// Search configuration: which parameters move, inside which box, and when
/// the refinement stops.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizationSpec {
    pub free_parameters: Vec<FreeParameter>,
    /// Optional per-parameter overrides of the default search box.
    #[serde(default)]
    pub bounds: Vec<ParameterRange>,
    /// Relative key-length improvement below which a refinement cycle stops.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Global evaluation budget across all starts and windows.
    #[serde(default = "default_max_evaluations")]
    pub max_evaluations: u64,
    /// Seed for the randomized multi-start points.
    #[serde(default)]
    pub seed: u64,
    /// Number of simplex starts per window (first start is the template).
    #[serde(default = "default_starts")]
    pub starts: usize,
}

fn default_tolerance() -> f64 {
    1e-4
}

fn default_max_evaluations() -> u64 {
    200_000
}

fn default_starts() -> usize {
    5
}

impl Default for OptimizationSpec {
    fn default() -> Self {
        Self {
            free_parameters: Vec::new(),
            bounds: Vec::new(),
            tolerance: default_tolerance(),
            max_evaluations: default_max_evaluations(),
            seed: 0,
            starts: default_starts(),
        }
    }
}

impl OptimizationSpec {
    pub fn validate(&self) -> Result<(), OptimizeError> {
        let mut seen = HashSet::new();
        for &p in &self.free_parameters {
            if !seen.insert(p) {
                return Err(OptimizeError::DuplicateParameter(p));
            }
        }
        for r in &self.bounds {
            if !(r.lower < r.upper) || !r.lower.is_finite() || !r.upper.is_finite() {
                return Err(OptimizeError::BadBound {
                    parameter: r.parameter,
                    lower: r.lower,
                    upper: r.upper,
                });
            }
        }
        if !(self.tolerance > 0.0) {
            return Err(OptimizeError::BadTolerance(self.tolerance));
        }
        Ok(())
    }

    fn bounds_for(&self, parameter: FreeParameter) -> (f64, f64) {
        self.bounds
            .iter()
            .find(|r| r.parameter == parameter)
            .map(|r| (r.lower, r.upper))
            .unwrap_or_else(|| parameter.default_bounds())
    }
}

// ----------------------------------------------------------------------------
// Window cuts
// ----------------------------------------------------------------------------

/// How to trim a pass: keep a stated fraction of the above-horizon time, or
/// everything at or above an elevation threshold.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowCut {
    Fraction(f64),
    ElevationThresholdDeg(f64),
}

/// The window the optimizer settled on.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct WindowChoice {
    pub elevation_threshold_deg: f64,
    /// Kept duration divided by the full above-horizon duration.
    pub kept_fraction: f64,
    pub kept_samples: usize,
    pub duration_s: f64,
}

fn threshold_indices(pass: &PassGeometry, threshold_deg: f64) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize)> = None;
    let mut run_start = None;
    for (i, s) in pass.samples.iter().enumerate() {
        if s.elevation_deg >= threshold_deg {
            let start = *run_start.get_or_insert(i);
            let len_best = best.map(|(a, b)| b - a).unwrap_or(0);
            if i + 1 - start > len_best {
                best = Some((start, i + 1));
            }
        } else {
            run_start = None;
        }
    }
    best
}

fn fraction_indices(pass: &PassGeometry, fraction: f64) -> Result<(usize, usize), OptimizeError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(OptimizeError::BadFraction(fraction));
    }
    let n = pass.samples.len();
    if n == 0 {
        return Err(OptimizeError::EmptyPass);
    }
    let k = ((fraction * n as f64).round() as usize).clamp(1, n);
    // Highest-elevation contiguous run of length k: maximize the summed
    // elevation over a sliding window (ties keep the earliest start).
    let mut window_sum: f64 = pass.samples[..k].iter().map(|s| s.elevation_deg).sum();
    let mut best_sum = window_sum;
    let mut best_start = 0usize;
    for start in 1..=n - k {
        window_sum +=
            pass.samples[start + k - 1].elevation_deg - pass.samples[start - 1].elevation_deg;
        if window_sum > best_sum {
            best_sum = window_sum;
            best_start = start;
        }
    }
    Ok((best_start, best_start + k))
}

fn slice_pass(pass: &PassGeometry, range: (usize, usize)) -> PassGeometry {
    PassGeometry {
        altitude_km: pass.altitude_km,
        max_elevation_deg: pass.max_elevation_deg,
        time_step_s: pass.time_step_s,
        samples: pass.samples[range.0..range.1].to_vec(),
    }
}

fn slice_profile(profile: &LossProfile, range: (usize, usize)) -> LossProfile {
    LossProfile {
        time_step_s: profile.time_step_s,
        samples: profile.samples[range.0..range.1].to_vec(),
    }
}

/// Trim a pass and its aligned loss profile to a key-generation window.
///
/// With `WindowCut::Fraction(f)` the contiguous highest-elevation segment
/// holding the fraction `f` of the above-horizon time is kept (fraction 1 is
/// the identity). With `WindowCut::ElevationThresholdDeg(t)` every sample at
/// or above `t` is kept.
pub fn window_cut(
    pass: &PassGeometry,
    profile: &LossProfile,
    cut: WindowCut,
) -> Result<(PassGeometry, LossProfile), OptimizeError> {
    if pass.samples.len() != profile.samples.len() {
        return Err(OptimizeError::MismatchedProfile {
            pass: pass.samples.len(),
            profile: profile.samples.len(),
        });
    }
    if pass.samples.is_empty() {
        return Err(OptimizeError::EmptyPass);
    }
    let range = match cut {
        WindowCut::Fraction(f) => fraction_indices(pass, f)?,
        WindowCut::ElevationThresholdDeg(t) => {
            threshold_indices(pass, t).ok_or(OptimizeError::EmptyCut(t))?
        }
    };
    Ok((slice_pass(pass, range), slice_profile(profile, range)))
}

// ----------------------------------------------------------------------------
// Parameter plumbing
// ----------------------------------------------------------------------------

/// Substitute the free continuous parameters into a template.
fn apply_parameters(
    template: &ProtocolParams,
    free: &[FreeParameter],
    values: &[f64],
) -> Result<ProtocolParams, OptimizeError> {
    let mut candidate = template.clone();
    if free.is_empty() {
        return Ok(candidate);
    }
    match &mut candidate {
        ProtocolParams::DecoyBb84 { source, .. } => {
            for (&p, &v) in free.iter().zip(values) {
                match p {
                    FreeParameter::Mu1 => source.intensities[0] = v,
                    FreeParameter::Mu2 => source.intensities[1] = v,
                    FreeParameter::P1 => source.probabilities[0] = v,
                    FreeParameter::P2 => source.probabilities[1] = v,
                    FreeParameter::PX => source.basis_prob_x = v,
                    FreeParameter::WindowFraction => {
                        return Err(OptimizeError::ParameterNotApplicable(p))
                    }
                }
            }
            source.probabilities[2] = 1.0 - source.probabilities[0] - source.probabilities[1];
        }
        ProtocolParams::Bbm92 { .. } => {
            return Err(OptimizeError::ParameterNotApplicable(free[0]));
        }
    }
    Ok(candidate)
}

/// One audited objective evaluation.
#[derive(Debug, Clone, Serialize)]
pub struct TraceEvaluation {
    pub index: u64,
    pub window_fraction: f64,
    /// Values of the continuous free parameters, in `free_parameters` order.
    pub values: Vec<f64>,
    pub skl_bits: u64,
}

/// Write the optimization trace as CSV with one column per free parameter.
pub fn write_trace_csv(
    trace: &[TraceEvaluation],
    free: &[FreeParameter],
    out: &mut impl Write,
) -> std::io::Result<()> {
    let mut header = String::from("evaluation_index,window_fraction");
    for p in free {
        if *p != FreeParameter::WindowFraction {
            header.push(',');
            header.push_str(p.name());
        }
    }
    header.push_str(",skl_bits");
    writeln!(out, "{header}")?;
    for row in trace {
        write!(out, "{},{}", row.index, row.window_fraction)?;
        for v in &row.values {
            write!(out, ",{v}")?;
        }
        writeln!(out, ",{}", row.skl_bits)?;
    }
    Ok(())
}

/// Outcome of `optimize_skl`: the best parameters, the window they were
/// evaluated on, the achieved key, and the audit trail.
#[derive(Debug, Clone)]
pub struct Optimized {
    pub params: ProtocolParams,
    pub window: WindowChoice,
    pub key: KeyResult,
    pub evaluations: u64,
    pub trace: Vec<TraceEvaluation>,
}

// ----------------------------------------------------------------------------
// Search internals
// ----------------------------------------------------------------------------

struct Search<'a> {
    template: &'a ProtocolParams,
    security: &'a SecurityParams,
    free: Vec<FreeParameter>,
    bounds: Vec<(f64, f64)>,
    tolerance: f64,
    max_evaluations: u64,
    evaluations: u64,
    trace: Vec<TraceEvaluation>,
    best: Option<(f64, ProtocolParams, KeyResult, WindowChoice)>,
}

impl Search<'_> {
    fn exhausted(&self) -> bool {
        self.evaluations >= self.max_evaluations
    }

    /// Evaluate one candidate; infeasible or budget-exceeded points return
    /// negative infinity. Feasible evaluations are recorded in the trace and
    /// folded into the running best.
    fn evaluate(&mut self, x: &[f64], profile: &LossProfile, window: WindowChoice) -> f64 {
        if self.exhausted() {
            return f64::NEG_INFINITY;
        }
        self.evaluations += 1;
        for (&(lo, hi), &v) in self.bounds.iter().zip(x) {
            if !(v >= lo && v <= hi) {
                return f64::NEG_INFINITY;
            }
        }
        let candidate = match apply_parameters(self.template, &self.free, x) {
            Ok(c) => c,
            Err(_) => return f64::NEG_INFINITY,
        };
        if candidate.validate().is_err() {
            return f64::NEG_INFINITY;
        }
        let stats = match candidate.block_stats(profile, CountMode::Expected) {
            Ok(s) => s,
            Err(_) => return f64::NEG_INFINITY,
        };
        let key = match candidate.secret_key(&stats, self.security) {
            Ok(k) => k,
            Err(_) => return f64::NEG_INFINITY,
        };
        let raw = key.key_length_raw;
        self.trace.push(TraceEvaluation {
            index: self.evaluations,
            window_fraction: window.kept_fraction,
            values: x.to_vec(),
            skl_bits: key.secret_key_length,
        });
        let improves = match &self.best {
            None => true,
            Some((best_raw, ..)) => raw > *best_raw,
        };
        if improves {
            self.best = Some((raw, candidate, key, window));
        }
        raw
    }

    /// Nelder-Mead refinement from `x0` (reflection 1, expansion 2,
    /// contraction 0.5, shrink 0.5). Maximizes by descending on -SKL.
    fn simplex(&mut self, x0: &[f64], profile: &LossProfile, window: WindowChoice) {
        let d = x0.len();
        if d == 0 {
            self.evaluate(x0, profile, window);
            return;
        }
        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(d + 1);
        let f0 = -self.evaluate(x0, profile, window);
        simplex.push((x0.to_vec(), f0));
        for i in 0..d {
            let (lo, hi) = self.bounds[i];
            let step = 0.1 * (hi - lo);
            let mut x = x0.to_vec();
            x[i] = if x[i] + step <= hi {
                x[i] + step
            } else {
                x[i] - step
            };
            let f = -self.evaluate(&x, profile, window);
            simplex.push((x, f));
        }
        let max_iterations = 120 * d;
        for _ in 0..max_iterations {
            if self.exhausted() {
                return;
            }
            simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).expect("ordered objective"));
            let f_best = simplex[0].1;
            let f_worst = simplex[d].1;
            if f_best.is_finite() && f_worst.is_finite() {
                let spread = (f_worst - f_best).abs();
                if spread <= self.tolerance * (f_best.abs() + 1e-9) {
                    return;
                }
            }
            let centroid: Vec<f64> = (0..d)
                .map(|j| simplex[..d].iter().map(|(x, _)| x[j]).sum::<f64>() / d as f64)
                .collect();
            let worst = simplex[d].0.clone();
            let reflect: Vec<f64> = (0..d)
                .map(|j| centroid[j] + (centroid[j] - worst[j]))
                .collect();
            let f_reflect = -self.evaluate(&reflect, profile, window);
            if f_reflect < f_best {
                let expand: Vec<f64> = (0..d)
                    .map(|j| centroid[j] + 2.0 * (centroid[j] - worst[j]))
                    .collect();
                let f_expand = -self.evaluate(&expand, profile, window);
                simplex[d] = if f_expand < f_reflect {
                    (expand, f_expand)
                } else {
                    (reflect, f_reflect)
                };
            } else if f_reflect < simplex[d - 1].1 {
                simplex[d] = (reflect, f_reflect);
            } else {
                let contract: Vec<f64> = if f_reflect < f_worst {
                    (0..d)
                        .map(|j| centroid[j] + 0.5 * (reflect[j] - centroid[j]))
                        .collect()
                } else {
                    (0..d)
                        .map(|j| centroid[j] + 0.5 * (worst[j] - centroid[j]))
                        .collect()
                };
                let f_contract = -self.evaluate(&contract, profile, window);
                if f_contract < f_worst.min(f_reflect) {
                    simplex[d] = (contract, f_contract);
                } else {
                    // Shrink toward the best vertex.
                    let anchor = simplex[0].0.clone();
                    for vertex in simplex.iter_mut().skip(1) {
                        let x: Vec<f64> = (0..d)
                            .map(|j| anchor[j] + 0.5 * (vertex.0[j] - anchor[j]))
                            .collect();
                        let f = -self.evaluate(&x, profile, window);
                        *vertex = (x, f);
                    }
                }
            }
        }
    }
}

/// Feasible template coordinates, or None when the template lies outside the
/// search box.
fn template_start(
    template: &ProtocolParams,
    free: &[FreeParameter],
    bounds: &[(f64, f64)],
) -> Option<Vec<f64>> {
    let source = match template {
        ProtocolParams::DecoyBb84 { source, .. } => source,
        ProtocolParams::Bbm92 { .. } => {
            return if free.is_empty() {
                Some(Vec::new())
            } else {
                None
            }
        }
    };
    let mut x = Vec::with_capacity(free.len());
    for (&p, &(lo, hi)) in free.iter().zip(bounds) {
        let v = match p {
            FreeParameter::Mu1 => source.intensities[0],
            FreeParameter::Mu2 => source.intensities[1],
            FreeParameter::P1 => source.probabilities[0],
            FreeParameter::P2 => source.probabilities[1],
            FreeParameter::PX => source.basis_prob_x,
            FreeParameter::WindowFraction => return None,
        };
        if !(v >= lo && v <= hi) {
            return None;
        }
        x.push(v);
    }
    Some(x)
}

/// Draw a random candidate inside the box that passes the protocol
/// invariants; gives up after a bounded number of rejections.
fn random_start(
    rng: &mut ChaCha12Rng,
    template: &ProtocolParams,
    free: &[FreeParameter],
    bounds: &[(f64, f64)],
) -> Option<Vec<f64>> {
    for _ in 0..500 {
        let x: Vec<f64> = bounds
            .iter()
            .map(|&(lo, hi)| rng.gen_range(lo..=hi))
            .collect();
        if let Ok(candidate) = apply_parameters(template, free, &x) {
            if candidate.validate().is_ok() {
                return Some(x);
            }
        }
    }
    None
}

// ----------------------------------------------------------------------------
// Entry point
// ----------------------------------------------------------------------------

/// Maximize the finite-block secret key length over the free parameters and,
/// when `window_fraction` is free, over a 64-point grid of elevation
/// thresholds. Deterministic for a fixed spec and seed; the returned key is
/// at least as long as at every evaluated point.
pub fn optimize_skl(
    chain: &OpticalChain,
    pass: &PassGeometry,
    params_template: &ProtocolParams,
    security: &SecurityParams,
    spec: &OptimizationSpec,
) -> Result<Optimized, OptimizeError> {
    let profile = loss_profile(chain, pass)?;
    optimize_skl_profile(pass, &profile, params_template, security, spec)
}

/// `optimize_skl` for a precomputed loss profile (empirical link modes).
pub fn optimize_skl_profile(
    pass: &PassGeometry,
    profile: &LossProfile,
    params_template: &ProtocolParams,
    security: &SecurityParams,
    spec: &OptimizationSpec,
) -> Result<Optimized, OptimizeError> {
    spec.validate()?;
    params_template.validate()?;
    if pass.samples.is_empty() {
        return Err(OptimizeError::EmptyPass);
    }
    if pass.samples.len() != profile.samples.len() {
        return Err(OptimizeError::MismatchedProfile {
            pass: pass.samples.len(),
            profile: profile.samples.len(),
        });
    }

    let window_free = spec
        .free_parameters
        .contains(&FreeParameter::WindowFraction);
    let continuous: Vec<FreeParameter> = spec
        .free_parameters
        .iter()
        .copied()
        .filter(|&p| p != FreeParameter::WindowFraction)
        .collect();
    for &p in &continuous {
        // Surface protocol mismatches before the search instead of silently
        // rejecting every candidate.
        apply_parameters(params_template, &[p], &[p.default_bounds().0])
            .map_err(|_| OptimizeError::ParameterNotApplicable(p))?;
    }
    let bounds: Vec<(f64, f64)> = continuous.iter().map(|&p| spec.bounds_for(p)).collect();
    let (fraction_lo, fraction_hi) = spec.bounds_for(FreeParameter::WindowFraction);

    // Candidate windows: the full pass, or a 64-threshold grid when the
    // window fraction is free. Duplicate sample ranges are evaluated once.
    let full_duration = pass.duration_s();
    let elevations: Vec<f64> = pass.samples.iter().map(|s| s.elevation_deg).collect();
    let min_elev = elevations.iter().copied().fold(f64::MAX, f64::min);
    let max_elev = elevations.iter().copied().fold(f64::MIN, f64::max);
    let mut windows: Vec<((usize, usize), WindowChoice)> = Vec::new();
    let mut seen = HashSet::new();
    let mut push_window = |threshold: f64, windows: &mut Vec<((usize, usize), WindowChoice)>| {
        if let Some(range) = threshold_indices(pass, threshold) {
            let kept = range.1 - range.0;
            let fraction = kept as f64 * pass.time_step_s / full_duration;
            if fraction < fraction_lo - 1e-12 || fraction > fraction_hi + 1e-12 {
                return;
            }
            if seen.insert(range) {
                windows.push((
                    range,
                    WindowChoice {
                        elevation_threshold_deg: threshold,
                        kept_fraction: fraction,
                        kept_samples: kept,
                        duration_s: kept as f64 * pass.time_step_s,
                    },
                ));
            }
        }
    };
    if window_free {
        for j in 0..64 {
            let threshold = min_elev + (max_elev - min_elev) * j as f64 / 63.0;
            push_window(threshold, &mut windows);
        }
    } else {
        push_window(min_elev, &mut windows);
    }
    if windows.is_empty() {
        return Err(OptimizeError::EmptyCut(min_elev));
    }

    let mut search = Search {
        template: params_template,
        security,
        free: continuous.clone(),
        bounds: bounds.clone(),
        tolerance: spec.tolerance,
        max_evaluations: spec.max_evaluations,
        evaluations: 0,
        trace: Vec::new(),
        best: None,
    };

    for (window_index, (range, window)) in windows.iter().enumerate() {
        let trimmed = slice_profile(profile, *range);
        if continuous.is_empty() {
            search.evaluate(&[], &trimmed, *window);
            continue;
        }
        let mut starts: Vec<Vec<f64>> = Vec::with_capacity(spec.starts);
        if let Some(x) = template_start(params_template, &continuous, &bounds) {
            starts.push(x);
        }
        let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(spec.seed, window_index as u64));
        while starts.len() < spec.starts.max(1) {
            match random_start(&mut rng, params_template, &continuous, &bounds) {
                Some(x) => starts.push(x),
                None => break,
            }
        }
        for x0 in &starts {
            if search.exhausted() {
                break;
            }
            search.simplex(x0, &trimmed, *window);
        }
    }

    let evaluations = search.evaluations;
    let trace = std::mem::take(&mut search.trace);
    match search.best {
        Some((_, params, key, window)) if key.secret_key_length > 0 => Ok(Optimized {
            params,
            window,
            key,
            evaluations,
            trace,
        }),
        _ => Err(OptimizeError::NoPositiveKey),
    }
}
