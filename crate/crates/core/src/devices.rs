//! Channel loss, gated detector pair, and noise models.
//!
//! The channel thins each pulse binomially; the receiver splits the
//! survivors 50/50 between two analyzer arms and turns them into gated
//! clicks. Background light and dark counts fire each arm independently
//! of the signal. A slot where both arms fire is a dual-fire and is
//! excluded from key formation but counted, because its rate rises
//! steeply under bright-pulse tampering and doubles as an in-band
//! intensity monitor.

use core::fmt;

use libm::exp;
use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::photonics::{passage_probability, AnalyzerSetting, PolarizationState};
use crate::validate::{check_non_negative, check_positive, check_probability, ValidationErrors};

/// Transmission path between Alice's source and Bob's receiver input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelModel {
    /// Probability a photon survives propagation and coupling into the
    /// receiver.
    pub coupling_efficiency: f64,
    /// Probability a detected photon lands in the wrong analyzer arm.
    /// One number absorbing every polarization imperfection along the
    /// path (retarder errors, cell-voltage drift, optic birefringence).
    pub misalignment_flip_prob: f64,
    /// Ambient background entering the receiver, summed over both arms.
    pub background_rate_hz: f64,
}

impl Default for ChannelModel {
    /// Nighttime 950 m free-space path defaults.
    fn default() -> Self {
        ChannelModel {
            coupling_efficiency: 0.14,
            misalignment_flip_prob: 0.015,
            background_rate_hz: 1100.0,
        }
    }
}

impl ChannelModel {
    pub fn validate(&self) -> Result<(), ValidationErrors> {
        let mut errs = ValidationErrors::new();
        check_probability(&mut errs, "channel.coupling_efficiency", self.coupling_efficiency);
        check_probability(
            &mut errs,
            "channel.misalignment_flip_prob",
            self.misalignment_flip_prob,
        );
        check_non_negative(&mut errs, "channel.background_rate_hz", self.background_rate_hz);
        errs.into_result()
    }
}

/// One gated single-photon counting module; the receiver has two.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorModel {
    /// Quantum efficiency of each counting module.
    pub efficiency: f64,
    /// Dark count rate per detector.
    pub dark_rate_hz: f64,
    /// Coincidence gate width around each expected arrival.
    pub gate_window_s: f64,
}

impl Default for DetectorModel {
    /// Nighttime 950 m receiver defaults.
    fn default() -> Self {
        DetectorModel {
            efficiency: 0.65,
            dark_rate_hz: 80.0,
            gate_window_s: 5e-9,
        }
    }
}

impl DetectorModel {
    pub fn validate(&self) -> Result<(), ValidationErrors> {
        let mut errs = ValidationErrors::new();
        check_probability(&mut errs, "detector.efficiency", self.efficiency);
        check_non_negative(&mut errs, "detector.dark_rate_hz", self.dark_rate_hz);
        check_positive(&mut errs, "detector.gate_window_s", self.gate_window_s);
        errs.into_result()
    }

    /// Probability one arm's background source fires within a gate.
    /// Ambient light splits evenly between the arms.
    fn background_gate_prob(&self, channel: &ChannelModel) -> f64 {
        (channel.background_rate_hz / 2.0) * self.gate_window_s
    }

    /// Probability one detector dark-fires within a gate.
    fn dark_gate_prob(&self) -> f64 {
        self.dark_rate_hz * self.gate_window_s
    }
}

/// What produced a conclusive click.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ClickCause {
    Signal,
    Background,
    Dark,
}

/// Receiver verdict for one pulse slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DetectionOutcome {
    /// Neither arm fired.
    NoClick,
    /// Exactly one arm fired; `bit` is the key bit that arm reveals.
    Conclusive { bit: bool, cause: ClickCause },
    /// Both arms fired in the same gate. Discarded from the key.
    DualFire,
}

/// Binomial draw that skips degenerate cases cheaply; most slots carry
/// zero photons.
pub(crate) fn binomial(n: u64, p: f64, rng: &mut impl Rng) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    Binomial::new(n, p)
        .expect("p checked to lie in (0, 1)")
        .sample(rng)
}

/// Thins a pulse through the lossy channel: each photon independently
/// survives with the channel's coupling efficiency.
pub fn transmit(photon_count: u64, channel: &ChannelModel, rng: &mut impl Rng) -> u64 {
    binomial(photon_count, channel.coupling_efficiency, rng)
}

/// Clicks contributed by `photons` pinned to one analyzer arm:
/// `(clicks staying on this arm, clicks flipped to the other arm)`.
fn arm_clicks(
    photons: u64,
    state: PolarizationState,
    arm: AnalyzerSetting,
    channel: &ChannelModel,
    detector: &DetectorModel,
    rng: &mut impl Rng,
) -> (u64, u64) {
    let click_prob = passage_probability(state, arm) * detector.efficiency;
    let clicks = binomial(photons, click_prob, rng);
    let flipped = binomial(clicks, channel.misalignment_flip_prob, rng);
    (clicks - flipped, flipped)
}

/// Per-arm signal and noise hits folded into one slot verdict.
fn resolve_slot(
    signal_one: u64,
    signal_zero: u64,
    channel: &ChannelModel,
    detector: &DetectorModel,
    rng: &mut impl Rng,
) -> DetectionOutcome {
    // Noise draws happen every gate, in a fixed order, whether or not
    // signal arrived; replay depends on it.
    let bg_one = rng.random_bool(detector.background_gate_prob(channel).min(1.0));
    let dark_one = rng.random_bool(detector.dark_gate_prob().min(1.0));
    let bg_zero = rng.random_bool(detector.background_gate_prob(channel).min(1.0));
    let dark_zero = rng.random_bool(detector.dark_gate_prob().min(1.0));

    let one_fired = signal_one > 0 || bg_one || dark_one;
    let zero_fired = signal_zero > 0 || bg_zero || dark_zero;

    match (one_fired, zero_fired) {
        (false, false) => DetectionOutcome::NoClick,
        (true, true) => DetectionOutcome::DualFire,
        (true, false) => DetectionOutcome::Conclusive {
            bit: true,
            cause: click_cause(signal_one, bg_one),
        },
        (false, true) => DetectionOutcome::Conclusive {
            bit: false,
            cause: click_cause(signal_zero, bg_zero),
        },
    }
}

fn click_cause(signal: u64, background: bool) -> ClickCause {
    if signal > 0 {
        ClickCause::Signal
    } else if background {
        ClickCause::Background
    } else {
        ClickCause::Dark
    }
}

/// Runs one gated slot of the full receiver on `arriving_photons`
/// photons in `alice_state`.
///
/// The entrance beamsplitter routes every photon independently, 50/50,
/// to one of the two analyzer arms. A routed photon clicks its arm with
/// probability `passage x efficiency`; a clicking photon lands on the
/// wrong arm with the channel's misalignment flip probability. Each arm
/// additionally sees background (half the ambient rate each) and dark
/// counts per gate. Both arms firing is a dual-fire.
pub fn detect_slot_beamsplit(
    arriving_photons: u64,
    alice_state: PolarizationState,
    channel: &ChannelModel,
    detector: &DetectorModel,
    rng: &mut impl Rng,
) -> DetectionOutcome {
    let to_one = binomial(arriving_photons, 0.5, rng);
    let to_zero = arriving_photons - to_one;
    let (one_stay, one_flip) = arm_clicks(
        to_one,
        alice_state,
        AnalyzerSetting::TestForOne,
        channel,
        detector,
        rng,
    );
    let (zero_stay, zero_flip) = arm_clicks(
        to_zero,
        alice_state,
        AnalyzerSetting::TestForZero,
        channel,
        detector,
        rng,
    );
    resolve_slot(one_stay + zero_flip, zero_stay + one_flip, channel, detector, rng)
}

/// Same slot model conditioned on an analyzer choice: every photon
/// faces `analyzer`. Exact for single-photon pulses, where the entrance
/// splitter has only one photon to route, so conditioning on the arm it
/// took is the same experiment.
pub fn detect_slot(
    arriving_photons: u64,
    alice_state: PolarizationState,
    analyzer: AnalyzerSetting,
    channel: &ChannelModel,
    detector: &DetectorModel,
    rng: &mut impl Rng,
) -> DetectionOutcome {
    let (stay, flip) = arm_clicks(arriving_photons, alice_state, analyzer, channel, detector, rng);
    let (one, zero) = match analyzer {
        AnalyzerSetting::TestForOne => (stay, flip),
        AnalyzerSetting::TestForZero => (flip, stay),
    };
    resolve_slot(one, zero, channel, detector, rng)
}

/// Average rate of noise-induced clicks when gating at `pulse_rate_hz`:
/// `noise_rate x gate_window x pulse_rate`.
///
/// Feeding in the summed 1.1 kHz ambient of the 950 m night path with a
/// 5 ns gate at 20 kHz gives 0.11 Hz, one click every 9.1 s; one
/// detector's 80 Hz dark rate gives one click every 125 s.
pub fn expected_noise_click_rate(noise_rate_hz: f64, gate_window_s: f64, pulse_rate_hz: f64) -> f64 {
    noise_rate_hz * gate_window_s * pulse_rate_hz
}

/// Closed-form dual-fire probability per gate for pulses with a mean of
/// `mean_at_receiver` photons reaching the receiver input.
///
/// With Poisson pulses the two arms' click counts are independent
/// Poisson processes (independent thinning of one Poisson stream), one
/// at the conclusive-arm rate `m (1-f) eta_D / 4` and one at the
/// flipped rate `m f eta_D / 4`. Both arms must fire, noise included.
pub fn dual_fire_probability(
    mean_at_receiver: f64,
    channel: &ChannelModel,
    detector: &DetectorModel,
) -> f64 {
    let f = channel.misalignment_flip_prob;
    let lambda_main = mean_at_receiver * (1.0 - f) * detector.efficiency / 4.0;
    let lambda_flip = mean_at_receiver * f * detector.efficiency / 4.0;
    let miss = (1.0 - detector.background_gate_prob(channel)) * (1.0 - detector.dark_gate_prob());
    (1.0 - miss * exp(-lambda_main)) * (1.0 - miss * exp(-lambda_flip))
}

/// Outcome of inverting the dual-fire rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeanPhotonEstimate {
    /// The mean photon number whose predicted dual-fire probability
    /// matches the observation.
    Point(f64),
    /// No dual-fires were seen; the true mean is below this one-sided
    /// bound (the mean whose predicted rate would have produced about 3
    /// events over the observation window).
    UpperBound(f64),
}

/// Why the dual-fire inversion could not produce an estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EstimateError {
    /// Fewer gates than the method can support; the rate is all noise.
    TooFewGates { gates: u64 },
    /// Observed rate exceeds what the model predicts at any intensity.
    RateAboveModel { observed: f64 },
    /// Zero misalignment and zero noise never dual-fire at any
    /// intensity; the rate carries no information.
    DegenerateModel,
    /// The rate must lie in [0, pulse_rate].
    InvalidRate { rate_hz: f64 },
}

impl fmt::Display for EstimateError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EstimateError::TooFewGates { gates } => {
                write!(f, "dual-fire estimate needs >= 10^4 gates, got {gates}")
            }
            EstimateError::RateAboveModel { observed } => {
                write!(f, "observed dual-fire probability {observed} above model range")
            }
            EstimateError::DegenerateModel => {
                write!(f, "dual-fire rate is identically zero for this receiver model")
            }
            EstimateError::InvalidRate { rate_hz } => {
                write!(f, "dual-fire rate {rate_hz} Hz outside [0, pulse_rate]")
            }
        }
    }
}

impl core::error::Error for EstimateError {}

const MIN_ESTIMATE_GATES: u64 = 10_000;
const ESTIMATE_MEAN_CAP: f64 = 1e9;

/// Estimates the mean photon number per pulse reaching the receiver
/// from the observed dual-fire rate, by monotone bisection of
/// [`dual_fire_probability`].
///
/// `observation_gates` is the number of gates the rate was measured
/// over; below 10^4 the statistics cannot support an estimate. A zero
/// observed rate yields [`MeanPhotonEstimate::UpperBound`].
pub fn estimate_mean_photons_from_dualfire(
    dual_fire_rate_hz: f64,
    observation_gates: u64,
    pulse_rate_hz: f64,
    channel: &ChannelModel,
    detector: &DetectorModel,
) -> Result<MeanPhotonEstimate, EstimateError> {
    if observation_gates < MIN_ESTIMATE_GATES {
        return Err(EstimateError::TooFewGates { gates: observation_gates });
    }
    if !dual_fire_rate_hz.is_finite()
        || dual_fire_rate_hz < 0.0
        || dual_fire_rate_hz > pulse_rate_hz
    {
        return Err(EstimateError::InvalidRate { rate_hz: dual_fire_rate_hz });
    }
    let flip_blind = channel.misalignment_flip_prob == 0.0;
    let noise_blind =
        detector.background_gate_prob(channel) == 0.0 && detector.dark_gate_prob() == 0.0;
    if detector.efficiency == 0.0 || flip_blind && noise_blind {
        return Err(EstimateError::DegenerateModel);
    }

    if dual_fire_rate_hz == 0.0 {
        // Rule of three: the rate compatible with zero events.
        let p_bound = 3.0 / observation_gates as f64;
        let mean = invert_dual_fire(p_bound, channel, detector)?;
        return Ok(MeanPhotonEstimate::UpperBound(mean));
    }

    let p_obs = dual_fire_rate_hz / pulse_rate_hz;
    let floor = dual_fire_probability(0.0, channel, detector);
    if p_obs <= floor {
        // At or below the noise floor: indistinguishable from vacuum.
        return Ok(MeanPhotonEstimate::Point(0.0));
    }
    Ok(MeanPhotonEstimate::Point(invert_dual_fire(p_obs, channel, detector)?))
}

fn invert_dual_fire(
    p_target: f64,
    channel: &ChannelModel,
    detector: &DetectorModel,
) -> Result<f64, EstimateError> {
    if p_target >= dual_fire_probability(ESTIMATE_MEAN_CAP, channel, detector) {
        return Err(EstimateError::RateAboveModel { observed: p_target });
    }
    let (mut lo, mut hi) = (0.0f64, ESTIMATE_MEAN_CAP);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if dual_fire_probability(mid, channel, detector) < p_target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
