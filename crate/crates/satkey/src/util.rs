//! Small numeric helpers shared across modules.

// ----------------------------------------------------------------------------
// Compensated summation
// ----------------------------------------------------------------------------

/// Neumaier-compensated accumulator.
///
/// Block statistics integrate millions of per-sample contributions spanning
/// many orders of magnitude (near-zenith counts vs. horizon-grazing counts);
/// a compensated sum keeps the tally exact to within one ulp of the result
/// instead of drifting with the summation order.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    compensation: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

// ----------------------------------------------------------------------------
// Seed derivation
// ----------------------------------------------------------------------------

/// Derive a per-stream seed from a master seed and a stream index.
///
/// SplitMix64 finalizer: statistically independent outputs for distinct
/// inputs, stable across platforms, so every study point gets its own
/// reproducible RNG stream derived from `(master_seed, stream_index)`.
pub fn derive_seed(master_seed: u64, stream_index: u64) -> u64 {
    let mut z = master_seed
        .wrapping_add(0x9e37_79b9_7f4a_7c15u64.wrapping_mul(stream_index.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

// ----------------------------------------------------------------------------
// Decibel helpers
// ----------------------------------------------------------------------------

/// Convert a loss in dB to a linear transmittance in (0, 1].
pub fn db_to_transmittance(loss_db: f64) -> f64 {
    10f64.powf(-loss_db / 10.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn transmittance_to_db(transmittance: f64) -> f64 {
        -10.0 * transmittance.log10()
    }

    fn approx_eq(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn kahan_sum_recovers_cancelled_terms() {
        // Summing 1e16 + many small terms loses the small terms in naive f64;
        // the compensated tally keeps them.
        let mut sum = KahanSum::new();
        sum.add(1e16);
        for _ in 0..10_000 {
            sum.add(1.0);
        }
        sum.add(-1e16);
        assert!(
            approx_eq(sum.value(), 10_000.0, 1e-12),
            "expected 10000, got {}",
            sum.value()
        );
    }

    #[test]
    fn derived_seeds_differ_per_stream() {
        let a = derive_seed(42, 0);
        let b = derive_seed(42, 1);
        let c = derive_seed(43, 0);
        assert_ne!(a, b, "stream index must change the seed");
        assert_ne!(a, c, "master seed must change the seed");
        assert_eq!(a, derive_seed(42, 0), "derivation must be deterministic");
    }

    #[test]
    fn db_round_trip() {
        for loss in [0.0, 3.0, 17.28, 55.0] {
            let t = db_to_transmittance(loss);
            assert!(
                approx_eq(transmittance_to_db(t), loss, 1e-12),
                "round trip failed at {loss} dB"
            );
        }
    }
}
