//! Monte Carlo agreement between the simulated photon pipeline and its
//! closed-form expectations.

use fsqkd_core::devices::{self, ChannelModel, DetectionOutcome, DetectorModel};
use fsqkd_core::photonics::PhotonNumberDistribution;
use fsqkd_core::protocol::{self, alice_prepare};
use fsqkd_core::rng;
use rand::Rng;

fn noiseless_channel(coupling: f64) -> ChannelModel {
    ChannelModel {
        coupling_efficiency: coupling,
        misalignment_flip_prob: 0.0,
        background_rate_hz: 0.0,
    }
}

fn quiet_detector() -> DetectorModel {
    DetectorModel { dark_rate_hz: 0.0, ..DetectorModel::default() }
}

#[test]
fn conclusive_rate_tracks_the_closed_form_across_the_grid() {
    // Per-slot conclusive probability against the closed form over a
    // mean x coupling grid, each point 200k slots, 4 sigma.
    let detector = quiet_detector();
    let mut rng = rng::stream(501, 0);
    for &mean in &[0.1, 0.5, 1.0, 2.0] {
        for &coupling in &[0.14, 0.5, 1.0] {
            let channel = noiseless_channel(coupling);
            let source = PhotonNumberDistribution::new(mean).unwrap();
            let slots = 200_000u32;
            let mut conclusive = 0u32;
            for _ in 0..slots {
                let bit = rng.random_bool(0.5);
                let n = source.sample(&mut rng);
                let arrived = devices::transmit(n, &channel, &mut rng);
                let outcome = devices::detect_slot_beamsplit(
                    arrived,
                    alice_prepare(bit),
                    &channel,
                    &detector,
                    &mut rng,
                );
                if matches!(outcome, DetectionOutcome::Conclusive { .. }) {
                    conclusive += 1;
                }
            }
            let expected =
                protocol::theoretical_detection_probability(mean, coupling, 0.65, 0.25).unwrap();
            let observed = f64::from(conclusive) / f64::from(slots);
            let sigma = (expected * (1.0 - expected) / f64::from(slots)).sqrt();
            assert!(
                (observed - expected).abs() < 4.0 * sigma,
                "mean {mean} coupling {coupling}: observed {observed}, expected {expected}, sigma {sigma}"
            );
        }
    }
}

#[test]
fn cascaded_thinning_composes_multiplicatively() {
    // Passing photons through two lossy channels in sequence must be
    // distributed like one channel with the product efficiency.
    // Chi-square against the exact binomial, tail pooled.
    let first = noiseless_channel(0.6);
    let second = noiseless_channel(0.5);
    let combined_p: f64 = 0.3;
    let n = 20u64;
    let trials = 100_000u32;
    let mut rng = rng::stream(502, 0);
    let mut counts = [0u32; 21];
    for _ in 0..trials {
        let once = devices::transmit(n, &first, &mut rng);
        let twice = devices::transmit(once, &second, &mut rng);
        counts[twice as usize] += 1;
    }
    // binomial pmf by the multiplicative recurrence
    let mut pmf = [0.0f64; 21];
    pmf[0] = (1.0 - combined_p).powi(n as i32);
    for k in 1..=n as usize {
        pmf[k] = pmf[k - 1] * (n as f64 - k as f64 + 1.0) / k as f64 * combined_p
            / (1.0 - combined_p);
    }
    let mut chi2 = 0.0;
    let mut pooled_obs = 0.0;
    let mut pooled_exp = 0.0;
    let mut dof: i32 = -1;
    for k in 0..=n as usize {
        let expected = pmf[k] * f64::from(trials);
        if expected >= 5.0 {
            let diff = f64::from(counts[k]) - expected;
            chi2 += diff * diff / expected;
            dof += 1;
        } else {
            pooled_obs += f64::from(counts[k]);
            pooled_exp += expected;
        }
    }
    if pooled_exp > 0.0 {
        let diff = pooled_obs - pooled_exp;
        chi2 += diff * diff / pooled_exp;
        dof += 1;
    }
    // dof lands near 14; 1% critical value for 14 is 29.14, use the
    // conservative value for 16
    assert!((10..=16).contains(&dof), "unexpected dof {dof}");
    assert!(chi2 < 32.0, "thinning composition chi-square {chi2} with {dof} dof");
}

#[test]
fn dual_fire_estimate_recovers_the_mean_from_simulation() {
    // Simulate a bright receiver, count dual fires, and ask the
    // estimator for the mean back. 1e6 gates puts the counting error
    // near 3%, so 10% is a 3-plus sigma band.
    let channel = ChannelModel { coupling_efficiency: 1.0, ..ChannelModel::default() };
    let detector = DetectorModel::default();
    let true_mean = 2.0;
    let source = PhotonNumberDistribution::new(true_mean).unwrap();
    let gates = 1_000_000u64;
    let pulse_rate = 20_000.0;
    let mut rng = rng::stream(503, 0);
    let mut dual = 0u64;
    for _ in 0..gates {
        let n = source.sample(&mut rng);
        let outcome =
            devices::detect_slot_beamsplit(n, alice_prepare(false), &channel, &detector, &mut rng);
        if outcome == DetectionOutcome::DualFire {
            dual += 1;
        }
    }
    let elapsed = gates as f64 / pulse_rate;
    let rate_hz = dual as f64 / elapsed;
    let estimate = devices::estimate_mean_photons_from_dualfire(
        rate_hz, gates, pulse_rate, &channel, &detector,
    )
    .unwrap();
    match estimate {
        devices::MeanPhotonEstimate::Point(m) => {
            assert!(
                (m - true_mean).abs() / true_mean < 0.10,
                "estimated {m} from {dual} dual fires, wanted {true_mean} within 10%"
            );
        }
        other => panic!("expected a point estimate, got {other:?}"),
    }
}
