//! Polarization states, analyzer passage probabilities, and photon
//! number statistics for weak coherent pulses.
//!
//! B92 encodes one bit per pulse in two non-orthogonal polarization
//! states: horizontal for 0 and right-circular for 1. Each receiver arm
//! projects onto the state orthogonal to one of the two, so a click can
//! only come from the state that is non-orthogonal to the projector,
//! and it passes with probability 1/2.

use core::fmt;

use libm::exp;
use rand::Rng;
use rand_distr::{Distribution, Poisson};

/// Photon polarization on the four states the protocol and its
/// analyzers can produce or project onto.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PolarizationState {
    Horizontal,
    Vertical,
    RightCircular,
    LeftCircular,
}

/// One receiver arm. `TestForOne` projects onto vertical polarization
/// and can only fire for the bit-1 state; `TestForZero` projects onto
/// left-circular and can only fire for the bit-0 state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AnalyzerSetting {
    TestForOne,
    TestForZero,
}

impl AnalyzerSetting {
    /// The key bit a click behind this analyzer announces.
    pub fn revealed_bit(self) -> bool {
        matches!(self, AnalyzerSetting::TestForOne)
    }

    pub fn other(self) -> AnalyzerSetting {
        match self {
            AnalyzerSetting::TestForOne => AnalyzerSetting::TestForZero,
            AnalyzerSetting::TestForZero => AnalyzerSetting::TestForOne,
        }
    }
}

/// Probability that a single photon in `state` passes `analyzer` and
/// reaches the detector behind it.
///
/// These are the squared overlaps of the state with the analyzer's
/// projection axis: 0 for the orthogonal protocol state, 1/2 for the
/// conjugate-basis states, 1 for the aligned state. Total function, no
/// device imperfections included.
pub fn passage_probability(state: PolarizationState, analyzer: AnalyzerSetting) -> f64 {
    use AnalyzerSetting::*;
    use PolarizationState::*;
    match (state, analyzer) {
        // Projector onto |v>.
        (Horizontal, TestForOne) => 0.0,
        (Vertical, TestForOne) => 1.0,
        (RightCircular, TestForOne) => 0.5,
        (LeftCircular, TestForOne) => 0.5,
        // Projector onto left-circular.
        (Horizontal, TestForZero) => 0.5,
        (Vertical, TestForZero) => 0.5,
        (RightCircular, TestForZero) => 0.0,
        (LeftCircular, TestForZero) => 1.0,
    }
}

/// Error building or querying a photon number distribution.
#[derive(Debug, Clone, PartialEq)]
pub enum PhotonStatsError {
    /// The mean photon number must be finite and >= 0.
    InvalidMean(f64),
    /// Conditional multiphoton statistics need a strictly positive mean.
    ZeroMean,
}

impl fmt::Display for PhotonStatsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PhotonStatsError::InvalidMean(m) => {
                write!(f, "mean photon number must be finite and >= 0, got {m}")
            }
            PhotonStatsError::ZeroMean => {
                write!(f, "multiphoton fraction is undefined for mean 0")
            }
        }
    }
}

impl core::error::Error for PhotonStatsError {}

/// Above this mean the sequential-search sampler gives way to the
/// general Poisson sampler; below it the search terminates in a handful
/// of steps and `exp(-mean)` is nowhere near underflow.
const SEQUENTIAL_SEARCH_LIMIT: f64 = 10.0;

/// Poisson photon number statistics of an attenuated coherent pulse.
///
/// A laser pulse attenuated to a mean of n̄ photons carries n photons
/// with probability `e^(-n̄) n̄^n / n!`. There is no way to post-select
/// exactly one photon, which is why the multiphoton fractions below
/// matter for security.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotonNumberDistribution {
    mean: f64,
}

impl PhotonNumberDistribution {
    pub fn new(mean: f64) -> Result<Self, PhotonStatsError> {
        if !mean.is_finite() || mean < 0.0 {
            return Err(PhotonStatsError::InvalidMean(mean));
        }
        Ok(PhotonNumberDistribution { mean })
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// P(n = k).
    pub fn pmf(&self, k: u64) -> f64 {
        if self.mean == 0.0 {
            return if k == 0 { 1.0 } else { 0.0 };
        }
        let mut p = exp(-self.mean);
        for i in 1..=k {
            p *= self.mean / i as f64;
        }
        p
    }

    /// P(n >= 1), the probability the pulse is detectable at all.
    pub fn detectable_probability(&self) -> f64 {
        -libm::expm1(-self.mean)
    }

    /// P(n >= 2), the unconditional multiphoton probability.
    pub fn multiphoton_probability(&self) -> f64 {
        // 1 - e^-m - m e^-m, written to survive small m.
        -libm::expm1(-self.mean) - self.mean * exp(-self.mean)
    }

    /// Draws one photon number.
    ///
    /// Small means use inversion by sequential search, which is exact,
    /// branch-free to reason about, and cheap when most pulses carry 0
    /// or 1 photons. Large means (bright pulses) delegate to the
    /// general-purpose sampler, where sequential search would walk
    /// hundreds of terms and `exp(-mean)` eventually underflows.
    pub fn sample(&self, rng: &mut impl Rng) -> u64 {
        if self.mean == 0.0 {
            return 0;
        }
        if self.mean < SEQUENTIAL_SEARCH_LIMIT {
            let u: f64 = rng.random();
            let mut k = 0u64;
            let mut p = exp(-self.mean);
            let mut cum = p;
            while u >= cum && k < 256 {
                k += 1;
                p *= self.mean / k as f64;
                cum += p;
            }
            k
        } else {
            let poisson = Poisson::new(self.mean).expect("mean validated at construction");
            let n: f64 = poisson.sample(rng);
            n as u64
        }
    }
}

/// Fraction of detectable pulses (n >= 1) that carry more than one
/// photon: P(n >= 2) / P(n >= 1).
///
/// This is the slice of the sifted key an eavesdropper could in
/// principle read via a beamsplitter without disturbing anything. For
/// small means it falls off as n̄/2.
pub fn multiphoton_fraction_given_detectable(mean: f64) -> Result<f64, PhotonStatsError> {
    let dist = PhotonNumberDistribution::new(mean)?;
    if mean == 0.0 {
        return Err(PhotonStatsError::ZeroMean);
    }
    Ok(dist.multiphoton_probability() / dist.detectable_probability())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn approx_eq(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn passage_table_matches_state_overlaps() {
        use AnalyzerSetting::*;
        use PolarizationState::*;
        // The protocol states: one arm is blind to each.
        assert_eq!(passage_probability(Horizontal, TestForOne), 0.0);
        assert_eq!(passage_probability(Horizontal, TestForZero), 0.5);
        assert_eq!(passage_probability(RightCircular, TestForOne), 0.5);
        assert_eq!(passage_probability(RightCircular, TestForZero), 0.0);
        // The analyzer axes themselves.
        assert_eq!(passage_probability(Vertical, TestForOne), 1.0);
        assert_eq!(passage_probability(LeftCircular, TestForZero), 1.0);
        assert_eq!(passage_probability(Vertical, TestForZero), 0.5);
        assert_eq!(passage_probability(LeftCircular, TestForOne), 0.5);
    }

    #[test]
    fn rejects_negative_and_non_finite_means() {
        assert!(PhotonNumberDistribution::new(-0.1).is_err());
        assert!(PhotonNumberDistribution::new(f64::NAN).is_err());
        assert!(PhotonNumberDistribution::new(f64::INFINITY).is_err());
        assert!(PhotonNumberDistribution::new(0.0).is_ok());
    }

    #[test]
    fn pmf_sums_to_one() {
        for mean in [0.05, 0.1, 1.0, 5.0, 9.9] {
            let dist = PhotonNumberDistribution::new(mean).unwrap();
            let mut total = 0.0;
            let mut k = 0;
            while total < 1.0 - 1e-15 && k < 500 {
                total += dist.pmf(k);
                k += 1;
            }
            assert!(
                approx_eq(total, 1.0, 1e-12),
                "pmf mass at mean {mean} sums to {total}"
            );
        }
    }

    #[test]
    fn zero_mean_always_samples_zero() {
        let dist = PhotonNumberDistribution::new(0.0).unwrap();
        let mut rng = rng::stream(1, 0);
        for _ in 0..100 {
            assert_eq!(dist.sample(&mut rng), 0);
        }
        assert_eq!(dist.pmf(0), 1.0);
        assert_eq!(dist.detectable_probability(), 0.0);
    }

    #[test]
    fn sample_mean_tracks_distribution_mean() {
        // 10^6 draws at n̄ = 0.1: sample mean within 3 sigma of 0.1,
        // sigma = sqrt(n̄ / N).
        let dist = PhotonNumberDistribution::new(0.1).unwrap();
        let mut rng = rng::stream(42, 0);
        let n = 1_000_000u64;
        let total: u64 = (0..n).map(|_| dist.sample(&mut rng)).sum();
        let sample_mean = total as f64 / n as f64;
        let tol = 3.0 * (0.1f64 / n as f64).sqrt();
        assert!(
            approx_eq(sample_mean, 0.1, tol),
            "sample mean {sample_mean} outside 0.1 +/- {tol}"
        );
    }

    #[test]
    fn empirical_histogram_matches_pmf() {
        // Bin-wise comparison at 4 sigma multinomial bounds, counts for
        // n in 0..=4 plus a pooled tail.
        let dist = PhotonNumberDistribution::new(1.0).unwrap();
        let mut rng = rng::stream(7, 0);
        let n = 1_000_000usize;
        let mut counts = [0u64; 6];
        for _ in 0..n {
            let k = dist.sample(&mut rng) as usize;
            counts[k.min(5)] += 1;
        }
        for (k, &c) in counts.iter().enumerate() {
            let p = if k < 5 {
                dist.pmf(k as u64)
            } else {
                1.0 - (0..5).map(|i| dist.pmf(i)).sum::<f64>()
            };
            let sigma = (n as f64 * p * (1.0 - p)).sqrt();
            let diff = (c as f64 - n as f64 * p).abs();
            assert!(
                diff <= 4.0 * sigma,
                "bin {k}: count {c} vs expected {:.1}, diff {diff:.1} > 4 sigma {:.1}",
                n as f64 * p,
                4.0 * sigma
            );
        }
    }

    #[test]
    fn detectable_probability_matches_samples() {
        let dist = PhotonNumberDistribution::new(0.1).unwrap();
        let p = dist.detectable_probability();
        let mut rng = rng::stream(13, 0);
        let n = 1_000_000u64;
        let hits = (0..n).filter(|_| dist.sample(&mut rng) >= 1).count() as f64;
        let freq = hits / n as f64;
        let tol = 3.0 * (p * (1.0 - p) / n as f64).sqrt();
        assert!(
            approx_eq(freq, p, tol),
            "P(n>=1) empirical {freq} vs analytic {p}, tol {tol}"
        );
    }

    #[test]
    fn bright_pulse_sampler_is_sane() {
        // Above the sequential-search limit: mean and spread of the
        // delegated sampler still look Poisson.
        let dist = PhotonNumberDistribution::new(1000.0).unwrap();
        let mut rng = rng::stream(3, 0);
        let n = 20_000u64;
        let draws: alloc::vec::Vec<u64> = (0..n).map(|_| dist.sample(&mut rng)).collect();
        let mean = draws.iter().sum::<u64>() as f64 / n as f64;
        let tol = 4.0 * (1000.0f64 / n as f64).sqrt();
        assert!(
            approx_eq(mean, 1000.0, tol),
            "bright pulse sample mean {mean} outside 1000 +/- {tol}"
        );
    }

    #[test]
    fn multiphoton_fractions_at_operating_point() {
        // n̄ = 0.1: unconditional P(n>=2) just under 0.5%, conditional
        // fraction just under 5%.
        let dist = PhotonNumberDistribution::new(0.1).unwrap();
        let uncond = dist.multiphoton_probability();
        assert!(
            approx_eq(uncond, 0.00467884, 1e-7),
            "P(n>=2) at 0.1 = {uncond}"
        );
        assert!(uncond < 0.005);
        let cond = multiphoton_fraction_given_detectable(0.1).unwrap();
        assert!(approx_eq(cond, 0.0491667, 1e-6), "conditional fraction {cond}");
        assert!(cond < 0.06);
    }

    #[test]
    fn multiphoton_fraction_small_mean_limit() {
        // As n̄ -> 0 the conditional fraction approaches n̄ / 2.
        for mean in [1e-2, 1e-3, 1e-4] {
            let f = multiphoton_fraction_given_detectable(mean).unwrap();
            let rel = (f - mean / 2.0).abs() / (mean / 2.0);
            assert!(rel < 0.01, "fraction {f} vs n̄/2 {} at n̄ {mean}", mean / 2.0);
        }
    }

    #[test]
    fn multiphoton_fraction_monotone_and_bounded() {
        let mut prev = 0.0;
        let mut mean = 0.01;
        while mean < 30.0 {
            let f = multiphoton_fraction_given_detectable(mean).unwrap();
            assert!(f > 0.0 && f < 1.0, "fraction {f} out of (0,1) at mean {mean}");
            assert!(f > prev, "fraction not increasing at mean {mean}");
            prev = f;
            mean *= 1.37;
        }
    }

    #[test]
    fn multiphoton_fraction_rejects_zero_mean() {
        assert_eq!(
            multiphoton_fraction_given_detectable(0.0),
            Err(PhotonStatsError::ZeroMean)
        );
    }
}
