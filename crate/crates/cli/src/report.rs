//! Report assembly and output. Every report embeds the invocation,
//! the fully normalized config it ran with, and the crate version, so
//! a result file alone is enough to reproduce the run.

use std::fs;
use std::io;
use std::path::Path;

use fsqkd_core::adversary::{AttackConfig, AttackResult, ResendStrategy};
use fsqkd_core::devices::{ClickCause, DetectionOutcome};
use fsqkd_core::linkbudget::{
    BackgroundScenario, LinkBudgetReport, LinkDirection, SatelliteScenario,
};
use fsqkd_core::photonics::PolarizationState;
use fsqkd_core::protocol::{PulseRecord, SessionConfig, SessionResult};
use fsqkd_core::reconciliation::{ParityBlockConfig, ReconciliationResult};
use serde::Serialize;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// What the user asked for, echoed into every report.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: &'static str,
    pub config_path: Option<String>,
    pub output_path: Option<String>,
    pub seed_override: Option<u64>,
    pub format: &'static str,
}

/// Writes via a sibling temp file and rename, so readers never observe
/// a half-written report.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "output path has no file name"))?;
    let mut tmp_name = name.to_os_string();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

pub fn to_json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("report types serialize");
    bytes.push(b'\n');
    bytes
}

#[derive(Debug, Serialize)]
pub struct ChannelEcho {
    pub coupling_efficiency: f64,
    pub misalignment_flip_prob: f64,
    pub background_rate_hz: f64,
}

#[derive(Debug, Serialize)]
pub struct DetectorEcho {
    pub efficiency: f64,
    pub dark_rate_hz: f64,
    pub gate_window_s: f64,
}

#[derive(Debug, Serialize)]
pub struct SessionEcho {
    pub pulse_count: u64,
    pub pulse_rate_hz: f64,
    pub mean_photon_number: f64,
    pub channel: ChannelEcho,
    pub detector: DetectorEcho,
    pub seed: u64,
    pub force_single_photon: bool,
}

impl From<&SessionConfig> for SessionEcho {
    fn from(c: &SessionConfig) -> Self {
        SessionEcho {
            pulse_count: c.pulse_count,
            pulse_rate_hz: c.pulse_rate_hz,
            mean_photon_number: c.mean_photon_number,
            channel: ChannelEcho {
                coupling_efficiency: c.channel.coupling_efficiency,
                misalignment_flip_prob: c.channel.misalignment_flip_prob,
                background_rate_hz: c.channel.background_rate_hz,
            },
            detector: DetectorEcho {
                efficiency: c.detector.efficiency,
                dark_rate_hz: c.detector.dark_rate_hz,
                gate_window_s: c.detector.gate_window_s,
            },
            seed: c.seed,
            force_single_photon: c.force_single_photon,
        }
    }
}

fn bits_string(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

#[derive(Debug, Serialize)]
pub struct SessionOutcome {
    pub seed: u64,
    pub sifted_len: usize,
    pub sifted_rate_hz: f64,
    pub ber: f64,
    pub dual_fire_count: u64,
    pub background_click_count: u64,
    pub dark_click_count: u64,
    pub alice_raw_key: String,
    pub bob_raw_key: String,
    pub sifted_indices: Vec<u64>,
}

impl SessionOutcome {
    pub fn new(seed: u64, result: &SessionResult) -> Self {
        SessionOutcome {
            seed,
            sifted_len: result.alice_raw_key.len(),
            sifted_rate_hz: result.sifted_rate_hz,
            ber: result.ber,
            dual_fire_count: result.dual_fire_count,
            background_click_count: result.background_click_count,
            dark_click_count: result.dark_click_count,
            alice_raw_key: bits_string(&result.alice_raw_key),
            bob_raw_key: bits_string(&result.bob_raw_key),
            sifted_indices: result.sifted_indices.clone(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct SessionReport {
    pub version: &'static str,
    pub invocation: RunManifest,
    pub config: SessionEcho,
    /// One entry per worker; workers differ only in seed and results
    /// merge by concatenation.
    pub results: Vec<SessionOutcome>,
}

#[derive(Debug, Serialize)]
pub struct AttackEcho {
    pub kind: &'static str,
    pub eve_efficiency: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reflectivity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resend_strategy: Option<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resend_mean: Option<f64>,
}

impl From<&AttackConfig> for AttackEcho {
    fn from(a: &AttackConfig) -> Self {
        match a {
            AttackConfig::Opaque(o) => {
                let (name, mean) = match o.resend_strategy {
                    ResendStrategy::SingleWhenIdentified => ("single", None),
                    ResendStrategy::DimPulse { mean } => ("dim", Some(mean)),
                    ResendStrategy::BrightPulse { mean } => ("bright", Some(mean)),
                };
                AttackEcho {
                    kind: "opaque",
                    eve_efficiency: o.eve_efficiency,
                    reflectivity: None,
                    resend_strategy: Some(name),
                    resend_mean: mean,
                }
            }
            AttackConfig::Beamsplitter(b) => AttackEcho {
                kind: "beamsplitter",
                eve_efficiency: b.eve_efficiency,
                reflectivity: Some(b.reflectivity),
                resend_strategy: None,
                resend_mean: None,
            },
        }
    }
}

#[derive(Debug, Serialize)]
pub struct AttackObservables {
    pub eve_conclusive_count: usize,
    pub knowledge_fraction: f64,
    /// Attacked sifted rate over the unattacked rate from the same
    /// seed; the opaque attack's fingerprint is a value near 1/4.
    pub sifted_rate_ratio: f64,
    pub ber_delta: f64,
    pub dual_fire_delta: i64,
}

#[derive(Debug, Serialize)]
pub struct AttackWorkerOutcome {
    pub baseline: SessionOutcome,
    pub attacked: SessionOutcome,
    pub observables: AttackObservables,
}

impl AttackWorkerOutcome {
    pub fn new(seed: u64, baseline: &SessionResult, attack: &AttackResult) -> Self {
        let attacked = &attack.bob_session;
        let ratio = if baseline.sifted_rate_hz > 0.0 {
            attacked.sifted_rate_hz / baseline.sifted_rate_hz
        } else {
            0.0
        };
        AttackWorkerOutcome {
            baseline: SessionOutcome::new(seed, baseline),
            attacked: SessionOutcome::new(seed, attacked),
            observables: AttackObservables {
                eve_conclusive_count: attack.eve_conclusive_indices.len(),
                knowledge_fraction: attack.knowledge_fraction,
                sifted_rate_ratio: ratio,
                ber_delta: attacked.ber - baseline.ber,
                dual_fire_delta: attacked.dual_fire_count as i64 - baseline.dual_fire_count as i64,
            },
        }
    }
}

#[derive(Debug, Serialize)]
pub struct AttackReport {
    pub version: &'static str,
    pub invocation: RunManifest,
    pub config: SessionEcho,
    pub attack: AttackEcho,
    pub results: Vec<AttackWorkerOutcome>,
}

#[derive(Debug, Serialize)]
pub struct BlockEcho {
    pub rows: usize,
    pub cols: usize,
    pub passes: u32,
    pub shuffle_seed: u64,
}

impl From<&ParityBlockConfig> for BlockEcho {
    fn from(c: &ParityBlockConfig) -> Self {
        BlockEcho {
            rows: c.rows,
            cols: c.cols,
            passes: c.passes,
            shuffle_seed: c.shuffle_seed,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct ReconcileReport {
    pub version: &'static str,
    pub invocation: RunManifest,
    pub config: BlockEcho,
    pub alice_path: String,
    pub bob_path: String,
    pub key_length: usize,
    pub raw_ber: f64,
    pub converged: bool,
    pub corrections_count: usize,
    pub corrections: Vec<usize>,
    pub disclosed_bit_equivalents: usize,
    pub retained_length: usize,
    pub residual_error_estimate: f64,
    pub messages_exchanged: usize,
}

impl ReconcileReport {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        invocation: RunManifest,
        config: &ParityBlockConfig,
        alice_path: &Path,
        bob_path: &Path,
        key_length: usize,
        raw_ber: f64,
        result: &ReconciliationResult,
        messages_exchanged: usize,
    ) -> Self {
        ReconcileReport {
            version: VERSION,
            invocation,
            config: config.into(),
            alice_path: alice_path.display().to_string(),
            bob_path: bob_path.display().to_string(),
            key_length,
            raw_ber,
            converged: result.converged,
            corrections_count: result.corrections.len(),
            corrections: result.corrections.clone(),
            disclosed_bit_equivalents: result.disclosed_bit_equivalents,
            retained_length: result.corrected_key.len(),
            residual_error_estimate: result.residual_error_estimate,
            messages_exchanged,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct ScenarioEcho {
    pub altitude_m: f64,
    pub wavelength_m: f64,
    pub tx_aperture_m: f64,
    pub rx_aperture_m: f64,
    pub pulse_rate_hz: f64,
    pub mean_photon_number: f64,
    pub atmospheric_transmission: f64,
    pub beam_wander_arcsec_lo: f64,
    pub beam_wander_arcsec_hi: f64,
    pub detector_efficiency: f64,
    pub protocol_efficiency: f64,
    pub filter_transmission: f64,
    pub fiber_coupling: f64,
    pub tilt_correction_factor: f64,
    pub protocol_rate_multiplier: f64,
    pub direction: &'static str,
}

impl From<&SatelliteScenario> for ScenarioEcho {
    fn from(s: &SatelliteScenario) -> Self {
        ScenarioEcho {
            altitude_m: s.altitude_m,
            wavelength_m: s.wavelength_m,
            tx_aperture_m: s.tx_aperture_m,
            rx_aperture_m: s.rx_aperture_m,
            pulse_rate_hz: s.pulse_rate_hz,
            mean_photon_number: s.mean_photon_number,
            atmospheric_transmission: s.atmospheric_transmission,
            beam_wander_arcsec_lo: s.beam_wander_arcsec_lo,
            beam_wander_arcsec_hi: s.beam_wander_arcsec_hi,
            detector_efficiency: s.detector_efficiency,
            protocol_efficiency: s.protocol_efficiency,
            filter_transmission: s.filter_transmission,
            fiber_coupling: s.fiber_coupling,
            tilt_correction_factor: s.tilt_correction_factor,
            protocol_rate_multiplier: s.protocol_rate_multiplier,
            direction: match s.direction {
                LinkDirection::Uplink => "uplink",
                LinkDirection::Downlink => "downlink",
            },
        }
    }
}

#[derive(Debug, Serialize)]
pub struct BackgroundEcho {
    pub radiance: f64,
    pub fov_arcsec: f64,
    pub filter_bandwidth_nm: f64,
    pub gate_window_s: f64,
    pub detector_dark_rate_hz: f64,
}

impl From<&BackgroundScenario> for BackgroundEcho {
    fn from(b: &BackgroundScenario) -> Self {
        BackgroundEcho {
            radiance: b.radiance,
            fov_arcsec: b.fov_arcsec,
            filter_bandwidth_nm: b.filter_bandwidth_nm,
            gate_window_s: b.gate_window_s,
            detector_dark_rate_hz: b.detector_dark_rate_hz,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct BudgetEcho {
    pub spot_diameter_m: f64,
    pub collection_efficiency_lo: f64,
    pub collection_efficiency_hi: f64,
    pub arrival_rate_hz_lo: f64,
    pub arrival_rate_hz_hi: f64,
    pub key_rate_hz_lo: f64,
    pub key_rate_hz_hi: f64,
    pub background_count_rate_hz: f64,
    pub detector_dark_rate_hz: f64,
    pub ber_lo: f64,
    pub ber_hi: f64,
}

impl From<&LinkBudgetReport> for BudgetEcho {
    fn from(r: &LinkBudgetReport) -> Self {
        BudgetEcho {
            spot_diameter_m: r.spot_diameter_m,
            collection_efficiency_lo: r.collection_efficiency_lo,
            collection_efficiency_hi: r.collection_efficiency_hi,
            arrival_rate_hz_lo: r.arrival_rate_hz_lo,
            arrival_rate_hz_hi: r.arrival_rate_hz_hi,
            key_rate_hz_lo: r.key_rate_hz_lo,
            key_rate_hz_hi: r.key_rate_hz_hi,
            background_count_rate_hz: r.background_count_rate_hz,
            detector_dark_rate_hz: r.detector_dark_rate_hz,
            ber_lo: r.ber_lo,
            ber_hi: r.ber_hi,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct LinkBudgetRunReport {
    pub version: &'static str,
    pub invocation: RunManifest,
    pub scenario: ScenarioEcho,
    pub background: BackgroundEcho,
    pub report: BudgetEcho,
}

fn fmt_value(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else if (0.01..1.0e6).contains(&x.abs()) {
        format!("{x:.4}")
    } else {
        format!("{x:.4e}")
    }
}

/// Aligned plain-text rendering of a link budget report.
pub fn budget_table(report: &LinkBudgetReport) -> String {
    let rows: [(&str, Option<f64>, Option<f64>); 7] = [
        ("spot diameter (m)", Some(report.spot_diameter_m), None),
        (
            "collection efficiency",
            Some(report.collection_efficiency_lo),
            Some(report.collection_efficiency_hi),
        ),
        (
            "arrival rate (Hz)",
            Some(report.arrival_rate_hz_lo),
            Some(report.arrival_rate_hz_hi),
        ),
        ("key rate (Hz)", Some(report.key_rate_hz_lo), Some(report.key_rate_hz_hi)),
        ("background rate (Hz)", Some(report.background_count_rate_hz), None),
        ("detector dark rate (Hz)", Some(report.detector_dark_rate_hz), None),
        ("bit error rate", Some(report.ber_lo), Some(report.ber_hi)),
    ];
    let mut out = String::new();
    out.push_str(&format!("{:<26}{:>14}{:>14}\n", "quantity", "lo", "hi"));
    for (label, lo, hi) in rows {
        let lo_s = lo.map(fmt_value).unwrap_or_default();
        let hi_s = hi.map(fmt_value).unwrap_or_default();
        out.push_str(&format!("{label:<26}{lo_s:>14}{hi_s:>14}\n"));
    }
    out
}

/// Per-slot trace rows for --format csv.
pub fn trace_csv(records: &[PulseRecord]) -> String {
    let mut out = String::from(
        "slot,alice_bit,prepared,photon_count,arrived_count,outcome,conclusive_bit,click_cause\n",
    );
    for r in records {
        let prepared = match r.prepared {
            PolarizationState::Horizontal => "H",
            PolarizationState::Vertical => "V",
            PolarizationState::RightCircular => "R",
            PolarizationState::LeftCircular => "L",
        };
        let (outcome, bit, cause) = match r.outcome {
            DetectionOutcome::NoClick => ("no_click", "", ""),
            DetectionOutcome::DualFire => ("dual_fire", "", ""),
            DetectionOutcome::Conclusive { bit, cause } => (
                "conclusive",
                if bit { "1" } else { "0" },
                match cause {
                    ClickCause::Signal => "signal",
                    ClickCause::Background => "background",
                    ClickCause::Dark => "dark",
                },
            ),
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.slot,
            u8::from(r.alice_bit),
            prepared,
            r.photon_count,
            r.arrived_count,
            outcome,
            bit,
            cause
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_and_leaves_no_droppings() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.json");
        write_atomic(&path, b"first").unwrap();
        write_atomic(&path, b"second").unwrap();
        assert_eq!(fs::read(&path).unwrap(), b"second");
        let entries: Vec<_> = fs::read_dir(dir.path()).unwrap().collect();
        assert_eq!(entries.len(), 1, "temp file must not survive");
    }

    #[test]
    fn budget_table_lines_up() {
        let report = fsqkd_core::linkbudget::evaluate(
            &SatelliteScenario::default(),
            &BackgroundScenario::full_moon(),
        )
        .unwrap();
        let table = budget_table(&report);
        let widths: Vec<usize> = table.lines().map(str::len).collect();
        assert!(widths.iter().all(|&w| w == widths[0]), "ragged table:\n{table}");
        assert!(table.contains("key rate"));
    }
}
