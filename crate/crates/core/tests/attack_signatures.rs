//! Session-level fingerprints of the two eavesdropping models.

use fsqkd_core::adversary::{
    self, AttackConfig, BeamsplitterAttackConfig, OpaqueAttackConfig, ResendStrategy,
};
use fsqkd_core::devices::{ChannelModel, DetectorModel};
use fsqkd_core::protocol::{self, SessionConfig};

fn quiet_session(pulse_count: u64, mean: f64, seed: u64) -> SessionConfig {
    SessionConfig {
        pulse_count,
        mean_photon_number: mean,
        channel: ChannelModel {
            misalignment_flip_prob: 0.0,
            background_rate_hz: 0.0,
            ..ChannelModel::default()
        },
        detector: DetectorModel { dark_rate_hz: 0.0, ..DetectorModel::default() },
        seed,
        ..SessionConfig::default()
    }
}

#[test]
fn intercept_resend_quarters_the_rate_and_reads_every_bit() {
    // A dim source means Eve rarely identifies the state, so her
    // single-photon resends starve Bob by about the protocol factor 4.
    let config = quiet_session(400_000, 0.1, 601);
    let baseline = protocol::run_session(&config).unwrap();
    let attack = AttackConfig::Opaque(OpaqueAttackConfig::default());
    let attacked = adversary::run_attacked_session(&config, &attack).unwrap();

    let cut = baseline.sifted_rate_hz / attacked.bob_session.sifted_rate_hz;
    assert!(
        (3.0..5.0).contains(&cut),
        "rate cut {cut}, baseline {} vs attacked {}",
        baseline.sifted_rate_hz,
        attacked.bob_session.sifted_rate_hz
    );
    // Everything Bob keeps came from a state Eve identified first.
    assert_eq!(attacked.knowledge_fraction, 1.0);
    let ber = protocol::measure_ber(
        &attacked.bob_session.alice_raw_key,
        &attacked.bob_session.bob_raw_key,
    )
    .unwrap();
    assert_eq!(ber, 0.0, "a correct intercept-resend leaves no errors on clean optics");
}

#[test]
fn bright_resend_floods_the_receiver_with_dual_fires() {
    // Needs the realistic channel: dual fires come from misalignment
    // leaking a fraction of a bright pulse into the silent arm, and a
    // perfectly aligned analyzer never leaks.
    let config = SessionConfig { pulse_count: 200_000, seed: 602, ..SessionConfig::default() };
    let baseline = protocol::run_session(&config).unwrap();
    let bright = AttackConfig::Opaque(OpaqueAttackConfig {
        resend_strategy: ResendStrategy::BrightPulse { mean: 1000.0 },
        ..OpaqueAttackConfig::default()
    });
    let attacked = adversary::run_attacked_session(&config, &bright).unwrap();
    assert!(
        attacked.bob_session.dual_fire_count > baseline.dual_fire_count + 100,
        "bright pulses must light both arms: attacked {} vs baseline {}",
        attacked.bob_session.dual_fire_count,
        baseline.dual_fire_count
    );
}

#[test]
fn beamsplitter_joint_rate_matches_the_closed_form() {
    // Empirical joint conclusive rate of Eve and Bob against the
    // product of the two thinned-Poisson arms, 4 sigma at 1e6 pulses.
    let mean = 0.5;
    let reflectivity = 0.5;
    let config = quiet_session(1_000_000, mean, 603);
    let attack = AttackConfig::Beamsplitter(BeamsplitterAttackConfig {
        reflectivity,
        ..BeamsplitterAttackConfig::default()
    });
    let attacked = adversary::run_attacked_session(&config, &attack).unwrap();

    let bob_eff = config.channel.coupling_efficiency * config.detector.efficiency * 0.25;
    let expected =
        adversary::beamsplitter_joint_probability(mean, 0.25, bob_eff, reflectivity).unwrap();

    // joint events: Eve conclusive on a slot Bob also sifted
    let sifted = &attacked.bob_session.sifted_indices;
    let mut joint = 0u64;
    let mut eve_iter = attacked.eve_conclusive_indices.iter().peekable();
    for &s in sifted {
        while let Some(&&e) = eve_iter.peek() {
            if e < s {
                eve_iter.next();
            } else {
                break;
            }
        }
        if eve_iter.peek() == Some(&&s) {
            joint += 1;
        }
    }
    let observed = joint as f64 / config.pulse_count as f64;
    let sigma = (expected * (1.0 - expected) / config.pulse_count as f64).sqrt();
    assert!(
        (observed - expected).abs() < 4.0 * sigma,
        "joint rate {observed}, closed form {expected}, sigma {sigma}"
    );
}

#[test]
fn beamsplitter_knowledge_matches_the_closed_form() {
    let mean = 0.1;
    let config = quiet_session(2_000_000, mean, 604);
    let attack = AttackConfig::Beamsplitter(BeamsplitterAttackConfig::default());
    let attacked = adversary::run_attacked_session(&config, &attack).unwrap();

    let bob_eff = config.channel.coupling_efficiency * config.detector.efficiency * 0.25;
    let expected = adversary::eve_knowledge_fraction(mean, 0.25, bob_eff, 0.5).unwrap();
    let n = attacked.bob_session.sifted_indices.len() as f64;
    assert!(n > 1_000.0, "need a usable sifted sample, got {n}");
    let sigma = (expected * (1.0 - expected) / n).sqrt();
    assert!(
        (attacked.knowledge_fraction - expected).abs() < 4.0 * sigma,
        "knowledge {}, closed form {expected}, sigma {sigma}",
        attacked.knowledge_fraction
    );
    // Half-silvered tapping at a dim mean leaves Bob's rate nearly
    // intact, unlike intercept-resend.
    let baseline = protocol::run_session(&config).unwrap();
    let ratio = attacked.bob_session.sifted_rate_hz / baseline.sifted_rate_hz;
    assert!((0.4..0.7).contains(&ratio), "splitting at R=0.5 should roughly halve, got {ratio}");
}
