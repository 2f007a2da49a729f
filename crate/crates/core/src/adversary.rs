//! Eavesdropping models and their observable signatures.
//!
//! Two strategies are simulated. The opaque attack measures every pulse
//! with a receiver like Bob's and resends only what it identified; it
//! buys Eve full knowledge of the resent slots at the cost of a visible
//! bit-rate drop, or a dual-fire surge if she resends bright pulses.
//! The translucent attack siphons a fraction of each pulse off with a
//! beamsplitter and is invisible in Bob's error rate; the closed-form
//! joint probability bounds what that tap can learn.

use alloc::string::String;
use alloc::vec::Vec;

use libm::{expm1, pow};
use rand::Rng;

use crate::devices::{binomial, detect_slot_beamsplit, transmit};
use crate::photonics::PhotonNumberDistribution;
use crate::protocol::{alice_prepare, SessionAccumulator, SessionConfig, SessionResult};
use crate::rng;
use crate::validate::{check_non_negative, check_probability, ValidationErrors};

/// What Eve sends down the channel after a conclusive measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ResendStrategy {
    /// One photon in the identified polarization.
    SingleWhenIdentified,
    /// A weak coherent pulse of the given mean in the identified
    /// polarization.
    DimPulse { mean: f64 },
    /// A bright pulse, mean well above one; lights both receiver arms
    /// through misalignment and so elevates the dual-fire rate.
    BrightPulse { mean: f64 },
}

/// Intercept-resend attack parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpaqueAttackConfig {
    pub resend_strategy: ResendStrategy,
    /// Eve's per-photon conclusive probability, all her receiver
    /// factors folded into one number. The protocol alone caps it at
    /// 0.25, which is also the worst case for Alice and Bob.
    pub eve_efficiency: f64,
}

impl Default for OpaqueAttackConfig {
    fn default() -> Self {
        OpaqueAttackConfig {
            resend_strategy: ResendStrategy::SingleWhenIdentified,
            eve_efficiency: 0.25,
        }
    }
}

impl OpaqueAttackConfig {
    pub fn validate(&self) -> Result<(), ValidationErrors> {
        let mut errs = ValidationErrors::new();
        check_probability(&mut errs, "attack.eve_efficiency", self.eve_efficiency);
        match self.resend_strategy {
            ResendStrategy::SingleWhenIdentified => {}
            ResendStrategy::DimPulse { mean } | ResendStrategy::BrightPulse { mean } => {
                check_non_negative(&mut errs, "attack.resend_mean", mean);
            }
        }
        errs.into_result()
    }
}

/// Passive tap parameters: a beamsplitter of reflectivity `R` feeding a
/// receiver of folded efficiency η_E.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamsplitterAttackConfig {
    /// Fraction of each pulse reflected to Eve; Bob keeps `1 - R`.
    pub reflectivity: f64,
    pub eve_efficiency: f64,
}

impl Default for BeamsplitterAttackConfig {
    fn default() -> Self {
        BeamsplitterAttackConfig { reflectivity: 0.5, eve_efficiency: 0.25 }
    }
}

impl BeamsplitterAttackConfig {
    pub fn validate(&self) -> Result<(), ValidationErrors> {
        let mut errs = ValidationErrors::new();
        check_probability(&mut errs, "attack.reflectivity", self.reflectivity);
        check_probability(&mut errs, "attack.eve_efficiency", self.eve_efficiency);
        errs.into_result()
    }
}

/// Either eavesdropping strategy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AttackConfig {
    Opaque(OpaqueAttackConfig),
    Beamsplitter(BeamsplitterAttackConfig),
}

impl AttackConfig {
    pub fn validate(&self) -> Result<(), ValidationErrors> {
        match self {
            AttackConfig::Opaque(c) => c.validate(),
            AttackConfig::Beamsplitter(c) => c.validate(),
        }
    }
}

/// Bob's full session statistics under attack, with Eve's overlap.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackResult {
    pub bob_session: SessionResult,
    /// Slots where Eve's own measurement was conclusive.
    pub eve_conclusive_indices: Vec<u64>,
    /// Of Bob's sifted bits, the fraction on slots Eve identified.
    pub knowledge_fraction: f64,
}

/// Probability that Bob and Eve both register a photon from the same
/// pulse when Eve taps reflectivity `r` off the channel:
/// `(1 - e^(-mean eve_eff r)) (1 - e^(-mean bob_eff (1-r)))`.
///
/// `bob_efficiency` is Bob's composite per-photon factor, the same
/// product that drives the detection-probability closed form.
pub fn beamsplitter_joint_probability(
    mean_photon_number: f64,
    eve_efficiency: f64,
    bob_efficiency: f64,
    reflectivity: f64,
) -> Result<f64, ValidationErrors> {
    let mut errs = ValidationErrors::new();
    check_non_negative(&mut errs, "mean_photon_number", mean_photon_number);
    check_probability(&mut errs, "eve_efficiency", eve_efficiency);
    check_probability(&mut errs, "bob_efficiency", bob_efficiency);
    check_probability(&mut errs, "reflectivity", reflectivity);
    errs.into_result()?;
    let transmission = 1.0 - reflectivity;
    let p_eve = -expm1(-mean_photon_number * eve_efficiency * reflectivity);
    let p_bob = -expm1(-mean_photon_number * bob_efficiency * transmission);
    Ok(p_eve * p_bob)
}

/// Fraction of Bob's sifted bits a beamsplitter tap also knows: the
/// joint probability over Bob's detection probability.
///
/// Because the two thinned Poisson processes are independent, the ratio
/// collapses to `1 - e^(-mean eve_eff r)`, independent of Bob's side;
/// both routes are computed and must agree within 1e-12.
///
/// A zero mean carries no photons for anyone, so the fraction is taken
/// as 0. Full reflection starves Bob completely and leaves the fraction
/// undefined, which is an error.
pub fn eve_knowledge_fraction(
    mean_photon_number: f64,
    eve_efficiency: f64,
    bob_efficiency: f64,
    reflectivity: f64,
) -> Result<f64, ValidationErrors> {
    let joint = beamsplitter_joint_probability(
        mean_photon_number,
        eve_efficiency,
        bob_efficiency,
        reflectivity,
    )?;
    if mean_photon_number == 0.0 {
        return Ok(0.0);
    }
    let transmission = 1.0 - reflectivity;
    if transmission == 0.0 || bob_efficiency == 0.0 {
        let mut errs = ValidationErrors::new();
        errs.push(
            "reflectivity",
            String::from("Bob detects nothing, knowledge fraction undefined"),
        );
        return Err(errs);
    }
    let p_bob = -expm1(-mean_photon_number * bob_efficiency * transmission);
    let ratio = joint / p_bob;
    let direct = -expm1(-mean_photon_number * eve_efficiency * reflectivity);
    assert!(
        (ratio - direct).abs() <= 1e-12,
        "ratio {ratio} and reduced form {direct} disagree"
    );
    Ok(ratio)
}

/// Splits one pulse at Eve's tap: `(eve_photons, bob_photons)`. Every
/// photon goes to exactly one side, so the pair sums to the input.
pub fn tap_pulse(photon_count: u64, reflectivity: f64, rng: &mut impl Rng) -> (u64, u64) {
    let to_eve = binomial(photon_count, reflectivity, rng);
    (to_eve, photon_count - to_eve)
}

/// Eve's folded receiver: conclusive with probability
/// `1 - (1 - eve_efficiency)^n`, and a conclusive result identifies the
/// state correctly (the protocol's conclusive outcomes are never wrong
/// absent noise, and Eve's own noise is taken as zero, her best case).
fn eve_measures(photon_count: u64, eve_efficiency: f64, rng: &mut impl Rng) -> bool {
    if photon_count == 0 {
        return false;
    }
    let p = 1.0 - pow(1.0 - eve_efficiency, photon_count as f64);
    rng.random_bool(p.clamp(0.0, 1.0))
}

/// Runs a session with the eavesdropper inserted.
///
/// Alice's source draws come from the same stream as in an unattacked
/// run of the same seed, so a (baseline, attacked) pair of runs sees
/// identical pulse trains and their statistics are directly comparable.
/// All of Eve's draws come from her own stream.
pub fn run_attacked_session(
    session: &SessionConfig,
    attack: &AttackConfig,
) -> Result<AttackResult, ValidationErrors> {
    session.validate()?;
    attack.validate()?;
    match attack {
        AttackConfig::Opaque(c) => Ok(run_opaque(session, c)),
        AttackConfig::Beamsplitter(c) => Ok(run_beamsplitter(session, c)),
    }
}

fn run_opaque(session: &SessionConfig, attack: &OpaqueAttackConfig) -> AttackResult {
    let source_dist = PhotonNumberDistribution::new(session.mean_photon_number)
        .expect("mean checked by config validation");
    let resend_dist = match attack.resend_strategy {
        ResendStrategy::SingleWhenIdentified => None,
        ResendStrategy::DimPulse { mean } | ResendStrategy::BrightPulse { mean } => Some(
            PhotonNumberDistribution::new(mean).expect("mean checked by attack validation"),
        ),
    };

    let mut source = rng::stream(session.seed, rng::STREAM_SOURCE);
    let mut channel_rng = rng::stream(session.seed, rng::STREAM_CHANNEL);
    let mut receiver = rng::stream(session.seed, rng::STREAM_RECEIVER);
    let mut eve = rng::stream(session.seed, rng::STREAM_EVE);

    let mut acc = SessionAccumulator::new();
    let mut eve_conclusive_indices = Vec::new();

    for slot in 0..session.pulse_count {
        let alice_bit = source.random_bool(0.5);
        let prepared = alice_prepare(alice_bit);
        let photon_count =
            if session.force_single_photon { 1 } else { source_dist.sample(&mut source) };

        // Eve intercepts the whole pulse at the transmitter output and
        // resends in Alice's polarization only when she identified it;
        // inconclusive slots go dark.
        let resent = if eve_measures(photon_count, attack.eve_efficiency, &mut eve) {
            eve_conclusive_indices.push(slot);
            match resend_dist {
                None => 1,
                Some(dist) => dist.sample(&mut eve),
            }
        } else {
            0
        };

        let arrived = transmit(resent, &session.channel, &mut channel_rng);
        let outcome = detect_slot_beamsplit(
            arrived,
            prepared,
            &session.channel,
            &session.detector,
            &mut receiver,
        );
        acc.record(slot, alice_bit, outcome);
    }

    let bob_session = acc.finish(session.pulse_count, session.pulse_rate_hz);
    let knowledge_fraction =
        overlap_fraction(&eve_conclusive_indices, &bob_session.sifted_indices);
    AttackResult { bob_session, eve_conclusive_indices, knowledge_fraction }
}

fn run_beamsplitter(session: &SessionConfig, attack: &BeamsplitterAttackConfig) -> AttackResult {
    let source_dist = PhotonNumberDistribution::new(session.mean_photon_number)
        .expect("mean checked by config validation");

    let mut source = rng::stream(session.seed, rng::STREAM_SOURCE);
    let mut channel_rng = rng::stream(session.seed, rng::STREAM_CHANNEL);
    let mut receiver = rng::stream(session.seed, rng::STREAM_RECEIVER);
    let mut eve = rng::stream(session.seed, rng::STREAM_EVE);

    let mut acc = SessionAccumulator::new();
    let mut eve_conclusive_indices = Vec::new();

    for slot in 0..session.pulse_count {
        let alice_bit = source.random_bool(0.5);
        let prepared = alice_prepare(alice_bit);
        let photon_count =
            if session.force_single_photon { 1 } else { source_dist.sample(&mut source) };

        let (eve_photons, bob_photons) = tap_pulse(photon_count, attack.reflectivity, &mut eve);
        if eve_measures(eve_photons, attack.eve_efficiency, &mut eve) {
            eve_conclusive_indices.push(slot);
        }

        let arrived = transmit(bob_photons, &session.channel, &mut channel_rng);
        let outcome = detect_slot_beamsplit(
            arrived,
            prepared,
            &session.channel,
            &session.detector,
            &mut receiver,
        );
        acc.record(slot, alice_bit, outcome);
    }

    let bob_session = acc.finish(session.pulse_count, session.pulse_rate_hz);
    let knowledge_fraction =
        overlap_fraction(&eve_conclusive_indices, &bob_session.sifted_indices);
    AttackResult { bob_session, eve_conclusive_indices, knowledge_fraction }
}

/// |eve ∩ bob| / |bob| over two ascending index lists; 0 when Bob has
/// nothing.
fn overlap_fraction(eve: &[u64], bob: &[u64]) -> f64 {
    if bob.is_empty() {
        return 0.0;
    }
    let mut shared = 0usize;
    let mut e = 0usize;
    for &slot in bob {
        while e < eve.len() && eve[e] < slot {
            e += 1;
        }
        if e < eve.len() && eve[e] == slot {
            shared += 1;
        }
    }
    shared as f64 / bob.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::devices::{ChannelModel, DetectorModel};

    fn quiet_session(pulse_count: u64, seed: u64) -> SessionConfig {
        // 950 m optics with noise sources switched off, so rate and
        // dual-fire comparisons see the attack alone.
        SessionConfig {
            pulse_count,
            seed,
            channel: ChannelModel { background_rate_hz: 0.0, ..ChannelModel::default() },
            detector: DetectorModel { dark_rate_hz: 0.0, ..DetectorModel::default() },
            ..SessionConfig::default()
        }
    }

    #[test]
    fn joint_probability_needs_both_receivers() {
        assert_eq!(beamsplitter_joint_probability(0.1, 0.25, 0.02275, 0.0).unwrap(), 0.0);
        assert_eq!(beamsplitter_joint_probability(0.0, 0.25, 0.02275, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn strong_tap_knowledge_stays_under_a_fortieth() {
        let f = eve_knowledge_fraction(0.1, 0.25, 0.02275, 0.9999).unwrap();
        assert!((f - 0.0247).abs() <= 1e-4, "knowledge fraction {f} should be ~0.0247");
        assert!(f < 0.025, "fraction {f} must stay below 2.5%");
    }

    #[test]
    fn half_tap_knows_three_bits_of_250() {
        let f = eve_knowledge_fraction(0.1, 0.25, 0.02275, 0.5).unwrap();
        let bits_per_250 = 250.0 * f;
        assert!(
            (bits_per_250 - 3.1).abs() <= 0.1,
            "expected ~3.1 known bits per 250, got {bits_per_250}"
        );
    }

    #[test]
    fn knowledge_fraction_ignores_bobs_side() {
        let reference = eve_knowledge_fraction(0.3, 0.25, 0.02275, 0.7).unwrap();
        for bob_eff in [0.001, 0.02275, 0.25, 0.8, 1.0] {
            let f = eve_knowledge_fraction(0.3, 0.25, bob_eff, 0.7).unwrap();
            assert!(
                (f - reference).abs() <= 1e-12,
                "knowledge fraction moved with Bob's efficiency: {f} vs {reference}"
            );
        }
    }

    #[test]
    fn knowledge_fraction_is_monotone_in_every_eve_knob() {
        let base = eve_knowledge_fraction(0.1, 0.25, 0.02275, 0.5).unwrap();
        assert!(eve_knowledge_fraction(0.2, 0.25, 0.02275, 0.5).unwrap() > base);
        assert!(eve_knowledge_fraction(0.1, 0.5, 0.02275, 0.5).unwrap() > base);
        assert!(eve_knowledge_fraction(0.1, 0.25, 0.02275, 0.8).unwrap() > base);
    }

    #[test]
    fn degenerate_taps_are_flagged() {
        assert!(eve_knowledge_fraction(0.1, 0.25, 0.02275, 1.0).is_err());
        assert_eq!(eve_knowledge_fraction(0.0, 0.25, 0.02275, 0.5).unwrap(), 0.0);
        assert!(eve_knowledge_fraction(0.1, 1.5, 0.02275, 0.5).is_err());
    }

    #[test]
    fn tap_conserves_photons_exactly() {
        let mut rng = rng::stream(5, rng::STREAM_EVE);
        for n in [0u64, 1, 2, 7, 100, 10_000] {
            for r in [0.0, 0.3, 0.5, 0.9999, 1.0] {
                let (e, b) = tap_pulse(n, r, &mut rng);
                assert_eq!(e + b, n, "tap lost photons at n={n}, r={r}");
            }
        }
    }

    #[test]
    fn opaque_single_resend_quarters_bobs_rate() {
        let session = quiet_session(300_000, 41);
        let baseline = crate::protocol::run_session(&session).unwrap();
        let attack = AttackConfig::Opaque(OpaqueAttackConfig::default());
        let attacked = run_attacked_session(&session, &attack).unwrap();
        let b = baseline.sifted_indices.len() as f64;
        let a = attacked.bob_session.sifted_indices.len() as f64;
        assert!(
            a < b / 3.0,
            "opaque attack should cut the rate by >3x: baseline {b}, attacked {a}"
        );
        // Separation must also clear 4 combined standard deviations.
        let sigma = (a + b).sqrt();
        assert!(b - a > 4.0 * sigma, "drop {} under 4 sigma {}", b - a, 4.0 * sigma);
    }

    #[test]
    fn opaque_attack_owns_every_surviving_bit() {
        // Noise off: every click Bob sees came from an Eve resend, so
        // her knowledge of the sifted key is total.
        let session = quiet_session(100_000, 43);
        let attack = AttackConfig::Opaque(OpaqueAttackConfig::default());
        let result = run_attacked_session(&session, &attack).unwrap();
        assert!(result.bob_session.sifted_indices.len() > 20);
        assert_eq!(result.knowledge_fraction, 1.0);
        // Resent photons still traverse the misaligned optics, so the
        // residual BER stays near the 1.5% flip probability.
        assert!(result.bob_session.ber < 0.2, "BER {} implausibly high", result.bob_session.ber);
    }

    #[test]
    fn bright_resend_floods_the_dual_fire_counter() {
        let session = quiet_session(100_000, 47);
        let baseline = crate::protocol::run_session(&session).unwrap();
        let attack = AttackConfig::Opaque(OpaqueAttackConfig {
            resend_strategy: ResendStrategy::BrightPulse { mean: 1000.0 },
            ..OpaqueAttackConfig::default()
        });
        let attacked = run_attacked_session(&session, &attack).unwrap();
        let a = attacked.bob_session.dual_fire_count as f64;
        let b = baseline.dual_fire_count as f64;
        let sigma = (a + b).sqrt().max(1.0);
        assert!(
            a - b > 4.0 * sigma,
            "bright pulses should lift dual fires by 4 sigma: attacked {a}, baseline {b}"
        );
    }

    #[test]
    fn dim_resend_cannot_beat_a_certain_photon() {
        let session = quiet_session(200_000, 53);
        let single = run_attacked_session(
            &session,
            &AttackConfig::Opaque(OpaqueAttackConfig::default()),
        )
        .unwrap();
        let dim = run_attacked_session(
            &session,
            &AttackConfig::Opaque(OpaqueAttackConfig {
                resend_strategy: ResendStrategy::DimPulse { mean: 0.1 },
                ..OpaqueAttackConfig::default()
            }),
        )
        .unwrap();
        assert!(
            dim.bob_session.sifted_indices.len() < single.bob_session.sifted_indices.len() / 2,
            "a 0.1-mean resend mostly sends vacuum: dim {}, single {}",
            dim.bob_session.sifted_indices.len(),
            single.bob_session.sifted_indices.len()
        );
    }

    #[test]
    fn near_total_tap_starves_bob() {
        let session = quiet_session(200_000, 59);
        let baseline = crate::protocol::run_session(&session).unwrap();
        let attack = AttackConfig::Beamsplitter(BeamsplitterAttackConfig {
            reflectivity: 0.9999,
            eve_efficiency: 0.25,
        });
        let attacked = run_attacked_session(&session, &attack).unwrap();
        let b = baseline.sifted_indices.len() as f64;
        let a = attacked.bob_session.sifted_indices.len() as f64;
        assert!(a < b / 100.0, "R=0.9999 should push Bob below 1%: baseline {b}, attacked {a}");
    }

    #[test]
    fn attacked_sessions_replay_bit_for_bit() {
        let session = quiet_session(20_000, 61);
        let attack = AttackConfig::Beamsplitter(BeamsplitterAttackConfig::default());
        let x = run_attacked_session(&session, &attack).unwrap();
        let y = run_attacked_session(&session, &attack).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn invalid_attack_configs_are_rejected() {
        let session = quiet_session(10, 1);
        let bad = AttackConfig::Beamsplitter(BeamsplitterAttackConfig {
            reflectivity: 1.5,
            eve_efficiency: 0.25,
        });
        assert!(run_attacked_session(&session, &bad).is_err());
        let bad_mean = AttackConfig::Opaque(OpaqueAttackConfig {
            resend_strategy: ResendStrategy::DimPulse { mean: -1.0 },
            ..OpaqueAttackConfig::default()
        });
        assert!(run_attacked_session(&session, &bad_mean).is_err());
    }
}
