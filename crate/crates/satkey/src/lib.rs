//! Finite-block secret key analysis for satellite QKD missions.
//!
//! The crate models a full satellite pass end to end: orbit geometry over a
//! ground station, the optical link budget (diffraction, pointing jitter,
//! atmosphere, instrument losses), detection statistics for entanglement-based
//! BBM92 and weak-coherent-pulse decoy-state BB84 sources, and composable
//! finite-key bounds that turn a block of sifted counts into a secret key
//! length. On top of the per-pass pipeline sit mission-level studies:
//! elevation sweeps, altitude trades, aperture-vs-pointing maps and
//! year-scale key accumulation.
//!
//! ```rust
//! use satkey::missions::{self, MissionConfig};
//!
//! let config = MissionConfig::builtin_preset("cqt-sat").unwrap();
//! let outcome = missions::run_pass(&config, 90.0, 0.0).unwrap();
//! assert!(outcome.key.secret_key_length > 0);
//! ```
//!
//! All randomness is driven by explicit seeds; expected-value mode (the
//! default) is fully deterministic and sampled mode reproduces bit-for-bit
//! for a fixed seed.

pub mod detstats;
pub mod finitekey;
pub mod linkbudget;
pub mod missions;
pub mod optimize;
pub mod orbit;

mod util;

pub use detstats::{BlockStats, CountMode};
pub use finitekey::{KeyResult, ProtocolParams, SecurityParams};
pub use linkbudget::{LossProfile, OpticalChain};
pub use missions::{MissionConfig, StudyResult};
pub use orbit::{GroundStation, PassGeometry};
