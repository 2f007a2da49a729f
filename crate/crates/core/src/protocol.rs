//! B92 session orchestration: Alice's preparation, Bob's measurement,
//! sifting over the classical channel, and the closed-form rate
//! predictions the simulation is checked against.
//!
//! One session is one seeded experiment. Alice's bits, the photon
//! numbers, the channel losses, and the receiver physics each draw from
//! their own random stream of the session seed, so swapping one stage
//! (say, inserting an eavesdropper into the channel) leaves every other
//! stage's draw sequence untouched.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use libm::{exp, expm1};
use rand::Rng;

use crate::devices::{
    detect_slot_beamsplit, transmit, ChannelModel, ClickCause, DetectionOutcome, DetectorModel,
};
use crate::photonics::{AnalyzerSetting, PhotonNumberDistribution, PolarizationState};
use crate::rng;
use crate::validate::{check_non_negative, check_positive, check_probability, ValidationErrors};

/// Full parameterization of one key exchange session.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SessionConfig {
    pub pulse_count: u64,
    pub pulse_rate_hz: f64,
    /// Mean photon number per weak coherent pulse.
    pub mean_photon_number: f64,
    pub channel: ChannelModel,
    pub detector: DetectorModel,
    pub seed: u64,
    /// Replace the Poisson source with an exact one-photon source.
    pub force_single_photon: bool,
}

impl Default for SessionConfig {
    /// The 950 m nighttime configuration: 20 kHz pulses at 0.1 mean
    /// photons through a 14% channel onto 65% detectors.
    fn default() -> Self {
        SessionConfig {
            pulse_count: 1_000_000,
            pulse_rate_hz: 20_000.0,
            mean_photon_number: 0.1,
            channel: ChannelModel::default(),
            detector: DetectorModel::default(),
            seed: 0,
            force_single_photon: false,
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<(), ValidationErrors> {
        let mut errs = ValidationErrors::new();
        if self.pulse_count == 0 {
            errs.push("session.pulse_count", String::from("must be at least 1"));
        }
        check_positive(&mut errs, "session.pulse_rate_hz", self.pulse_rate_hz);
        check_non_negative(&mut errs, "session.mean_photon_number", self.mean_photon_number);
        if let Err(e) = self.channel.validate() {
            errs.0.extend(e.0);
        }
        if let Err(e) = self.detector.validate() {
            errs.0.extend(e.0);
        }
        errs.into_result()
    }
}

/// Everything both parties know after sifting, plus the counters an
/// operator watches.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionResult {
    /// Alice's bits at the sifted slots.
    pub alice_raw_key: Vec<bool>,
    /// Bob's decoded bits at the same slots; differs from Alice's only
    /// through misalignment and noise.
    pub bob_raw_key: Vec<bool>,
    /// Pulse slots that produced exactly one conclusive click.
    pub sifted_indices: Vec<u64>,
    pub sifted_rate_hz: f64,
    /// Disagreement fraction between the raw keys; 0.0 for an empty key.
    pub ber: f64,
    pub dual_fire_count: u64,
    /// Conclusive clicks caused by ambient background light.
    pub background_click_count: u64,
    /// Conclusive clicks caused by detector dark noise.
    pub dark_click_count: u64,
}

/// One transmitted pulse in a per-slot trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseRecord {
    pub slot: u64,
    pub alice_bit: bool,
    pub prepared: PolarizationState,
    /// Photons leaving the transmitter.
    pub photon_count: u64,
    /// Photons surviving to the receiver input.
    pub arrived_count: u64,
    pub outcome: DetectionOutcome,
}

/// Vocabulary of the public discussion. Messages carry slot indices and
/// parities, never key bit values.
#[derive(Debug, Clone, PartialEq)]
pub enum ClassicalMessage {
    /// Bob's announcement of which slots were conclusive.
    SiftAnnounce(Vec<u64>),
    /// Reconciliation parameters both sides must share.
    SessionControl { shuffle_seed: u64, passes: u32, final_checks: u32 },
    /// Key-index subsets whose parities one side wants compared.
    ParityRequest { subsets: Vec<Vec<u32>> },
    /// The answering parities, one per requested subset.
    ParityReply { parities: Vec<bool> },
}

/// Alice's encoding rule: 0 is a horizontal photon, 1 a right-circular
/// one. The two states are non-orthogonal, which is what denies an
/// eavesdropper a perfect discriminating measurement.
pub fn alice_prepare(bit: bool) -> PolarizationState {
    if bit {
        PolarizationState::RightCircular
    } else {
        PolarizationState::Horizontal
    }
}

/// The analyzer arm a single collected photon ends up facing, as chosen
/// by the receiver's 50/50 entrance beamsplitter.
pub fn bob_choose_analyzer(rng: &mut impl Rng) -> AnalyzerSetting {
    if rng.random_bool(0.5) {
        AnalyzerSetting::TestForOne
    } else {
        AnalyzerSetting::TestForZero
    }
}

/// Runs a full seeded session. See [`run_session_traced`] for the same
/// simulation with a per-slot record of every pulse.
///
/// Per slot, the draw order is fixed and documented because replay
/// depends on it: Alice's stream yields her bit and then (unless
/// `force_single_photon`) the photon number; the channel stream yields
/// one thinning draw; the receiver stream yields the beamsplitter
/// routing, per-arm click and misalignment draws, and four noise draws
/// in arm order (one-arm background, one-arm dark, zero-arm background,
/// zero-arm dark).
pub fn run_session(config: &SessionConfig) -> Result<SessionResult, ValidationErrors> {
    drive_session(config, None)
}

/// [`run_session`] plus the per-slot trace, in slot order.
pub fn run_session_traced(
    config: &SessionConfig,
) -> Result<(SessionResult, Vec<PulseRecord>), ValidationErrors> {
    let mut trace = Vec::new();
    let result = drive_session(config, Some(&mut trace))?;
    Ok((result, trace))
}

fn drive_session(
    config: &SessionConfig,
    mut trace: Option<&mut Vec<PulseRecord>>,
) -> Result<SessionResult, ValidationErrors> {
    config.validate()?;
    let source_dist = PhotonNumberDistribution::new(config.mean_photon_number)
        .expect("mean checked by config validation");

    let mut source = rng::stream(config.seed, rng::STREAM_SOURCE);
    let mut channel_rng = rng::stream(config.seed, rng::STREAM_CHANNEL);
    let mut receiver = rng::stream(config.seed, rng::STREAM_RECEIVER);

    if let Some(t) = trace.as_deref_mut() {
        t.reserve(config.pulse_count as usize);
    }
    let mut acc = SessionAccumulator::new();

    for slot in 0..config.pulse_count {
        let alice_bit = source.random_bool(0.5);
        let prepared = alice_prepare(alice_bit);
        let photon_count =
            if config.force_single_photon { 1 } else { source_dist.sample(&mut source) };
        let arrived_count = transmit(photon_count, &config.channel, &mut channel_rng);
        let outcome = detect_slot_beamsplit(
            arrived_count,
            prepared,
            &config.channel,
            &config.detector,
            &mut receiver,
        );
        acc.record(slot, alice_bit, outcome);
        if let Some(t) = trace.as_deref_mut() {
            t.push(PulseRecord {
                slot,
                alice_bit,
                prepared,
                photon_count,
                arrived_count,
                outcome,
            });
        }
    }

    Ok(acc.finish(config.pulse_count, config.pulse_rate_hz))
}

/// Per-slot bookkeeping shared by the plain session and the attacked
/// variants, so every driver tallies outcomes identically.
pub(crate) struct SessionAccumulator {
    alice_raw_key: Vec<bool>,
    bob_raw_key: Vec<bool>,
    sifted_indices: Vec<u64>,
    dual_fire_count: u64,
    background_click_count: u64,
    dark_click_count: u64,
}

impl SessionAccumulator {
    pub(crate) fn new() -> Self {
        SessionAccumulator {
            alice_raw_key: Vec::new(),
            bob_raw_key: Vec::new(),
            sifted_indices: Vec::new(),
            dual_fire_count: 0,
            background_click_count: 0,
            dark_click_count: 0,
        }
    }

    pub(crate) fn record(&mut self, slot: u64, alice_bit: bool, outcome: DetectionOutcome) {
        match outcome {
            DetectionOutcome::NoClick => {}
            DetectionOutcome::DualFire => self.dual_fire_count += 1,
            DetectionOutcome::Conclusive { bit, cause } => {
                self.sifted_indices.push(slot);
                self.alice_raw_key.push(alice_bit);
                self.bob_raw_key.push(bit);
                match cause {
                    ClickCause::Signal => {}
                    ClickCause::Background => self.background_click_count += 1,
                    ClickCause::Dark => self.dark_click_count += 1,
                }
            }
        }
    }

    pub(crate) fn finish(self, pulse_count: u64, pulse_rate_hz: f64) -> SessionResult {
        let ber = if self.alice_raw_key.is_empty() {
            0.0
        } else {
            measure_ber(&self.alice_raw_key, &self.bob_raw_key)
                .expect("keys equal length by construction")
        };
        let elapsed_s = pulse_count as f64 / pulse_rate_hz;
        SessionResult {
            sifted_rate_hz: self.sifted_indices.len() as f64 / elapsed_s,
            ber,
            alice_raw_key: self.alice_raw_key,
            bob_raw_key: self.bob_raw_key,
            sifted_indices: self.sifted_indices,
            dual_fire_count: self.dual_fire_count,
            background_click_count: self.background_click_count,
            dark_click_count: self.dark_click_count,
        }
    }
}

/// Probability that a weak coherent pulse of mean `mean_photon_number`
/// yields a conclusive detection, given the composite per-photon
/// efficiency `coupling x detector x protocol`.
///
/// Poisson statistics collapse the per-photon-number convolution to the
/// closed form `1 - e^(-mean x eta_composite)`. The partial-sum form is
/// [`theoretical_detection_probability_series`]; both are computed here
/// and must agree within 1e-12 (checked for means up to 30, past which
/// the series is all tail).
pub fn theoretical_detection_probability(
    mean_photon_number: f64,
    coupling_efficiency: f64,
    detector_efficiency: f64,
    protocol_efficiency: f64,
) -> Result<f64, ValidationErrors> {
    let mut errs = ValidationErrors::new();
    check_non_negative(&mut errs, "mean_photon_number", mean_photon_number);
    check_probability(&mut errs, "coupling_efficiency", coupling_efficiency);
    check_probability(&mut errs, "detector_efficiency", detector_efficiency);
    check_probability(&mut errs, "protocol_efficiency", protocol_efficiency);
    errs.into_result()?;

    let eta = coupling_efficiency * detector_efficiency * protocol_efficiency;
    let closed = -expm1(-mean_photon_number * eta);
    if mean_photon_number <= 30.0 {
        let series = theoretical_detection_probability_series(
            mean_photon_number,
            coupling_efficiency,
            detector_efficiency,
            protocol_efficiency,
        );
        assert!(
            (closed - series).abs() <= 1e-12,
            "closed form and series disagree: {closed} vs {series}"
        );
    }
    Ok(closed)
}

/// Partial-sum form of the detection probability: the photon-number
/// distribution convolved with the per-photon miss probability,
/// `sum_n P(n) (1 - (1 - eta)^n)`, truncated once the remaining Poisson
/// tail is below 1e-15.
pub fn theoretical_detection_probability_series(
    mean_photon_number: f64,
    coupling_efficiency: f64,
    detector_efficiency: f64,
    protocol_efficiency: f64,
) -> f64 {
    let eta = coupling_efficiency * detector_efficiency * protocol_efficiency;
    let survive = 1.0 - eta;
    let mut pmf = exp(-mean_photon_number);
    let mut covered = pmf;
    let mut miss_pow = 1.0;
    let mut sum = 0.0;
    let mut n = 1u32;
    while 1.0 - covered > 1e-15 && n < 10_000 {
        pmf *= mean_photon_number / n as f64;
        miss_pow *= survive;
        sum += pmf * (1.0 - miss_pow);
        covered += pmf;
        n += 1;
    }
    sum
}

/// Key bits per second implied by a detection probability at a pulse
/// rate.
pub fn expected_bit_rate(pulse_rate_hz: f64, detection_probability: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&detection_probability));
    pulse_rate_hz * detection_probability
}

/// Bob's public sifting announcement: the slots that produced exactly
/// one conclusive click. Dual-fires and empty slots are excluded, and no
/// bit values leave the receiver.
pub fn sift(outcomes: &[DetectionOutcome]) -> (ClassicalMessage, Vec<u64>) {
    let indices: Vec<u64> = outcomes
        .iter()
        .enumerate()
        .filter(|(_, o)| matches!(o, DetectionOutcome::Conclusive { .. }))
        .map(|(i, _)| i as u64)
        .collect();
    (ClassicalMessage::SiftAnnounce(indices.clone()), indices)
}

/// Why two raw keys could not be compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KeyCompareError {
    LengthMismatch { alice: usize, bob: usize },
    Empty,
}

impl fmt::Display for KeyCompareError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KeyCompareError::LengthMismatch { alice, bob } => {
                write!(f, "raw keys differ in length: {alice} vs {bob}")
            }
            KeyCompareError::Empty => write!(f, "raw keys are empty"),
        }
    }
}

impl core::error::Error for KeyCompareError {}

/// Bit error ratio: disagreeing positions over key length.
pub fn measure_ber(alice_raw: &[bool], bob_raw: &[bool]) -> Result<f64, KeyCompareError> {
    if alice_raw.len() != bob_raw.len() {
        return Err(KeyCompareError::LengthMismatch {
            alice: alice_raw.len(),
            bob: bob_raw.len(),
        });
    }
    if alice_raw.is_empty() {
        return Err(KeyCompareError::Empty);
    }
    let errors = alice_raw.iter().zip(bob_raw).filter(|(a, b)| a != b).count();
    Ok(errors as f64 / alice_raw.len() as f64)
}
