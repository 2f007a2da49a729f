//! JSON configuration documents.
//!
//! Every field is optional and defaults to the 950-m night-run values;
//! unknown fields are rejected rather than ignored; range errors are
//! aggregated so one round trip reports every problem in a document.

use std::fmt;

use fsqkd_core::adversary::{
    AttackConfig, BeamsplitterAttackConfig, OpaqueAttackConfig, ResendStrategy,
};
use fsqkd_core::devices::{ChannelModel, DetectorModel};
use fsqkd_core::linkbudget::{BackgroundScenario, LinkDirection, SatelliteScenario};
use fsqkd_core::protocol::SessionConfig;
use fsqkd_core::reconciliation::ParityBlockConfig;
use fsqkd_core::validate::ValidationErrors;
use serde::Deserialize;

#[derive(Debug)]
pub enum ConfigError {
    /// Malformed JSON or an unknown field; carries serde's line/column
    /// diagnostic.
    Parse(serde_json::Error),
    /// Range or consistency violations, all of them at once.
    Invalid(Vec<String>),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Parse(e) => write!(f, "malformed config: {e}"),
            ConfigError::Invalid(errors) => {
                writeln!(f, "invalid config:")?;
                for e in errors {
                    writeln!(f, "  {e}")?;
                }
                Ok(())
            }
        }
    }
}

impl std::error::Error for ConfigError {}

fn invalid(errs: ValidationErrors) -> ConfigError {
    ConfigError::Invalid(
        errs.0
            .iter()
            .map(|e| format!("{}: {}", e.field, e.message))
            .collect(),
    )
}

/// Parses a document that may legitimately be empty; an absent or
/// blank config means "all defaults".
fn parse_document<T: Default + for<'de> Deserialize<'de>>(
    text: Option<&str>,
) -> Result<T, ConfigError> {
    match text {
        None => Ok(T::default()),
        Some(t) if t.trim().is_empty() => Ok(T::default()),
        Some(t) => serde_json::from_str(t).map_err(ConfigError::Parse),
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelDto {
    pub coupling_efficiency: Option<f64>,
    pub misalignment_flip_prob: Option<f64>,
    pub background_rate_hz: Option<f64>,
}

impl ChannelDto {
    fn build(&self) -> ChannelModel {
        let d = ChannelModel::default();
        ChannelModel {
            coupling_efficiency: self.coupling_efficiency.unwrap_or(d.coupling_efficiency),
            misalignment_flip_prob: self
                .misalignment_flip_prob
                .unwrap_or(d.misalignment_flip_prob),
            background_rate_hz: self.background_rate_hz.unwrap_or(d.background_rate_hz),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorDto {
    pub efficiency: Option<f64>,
    pub dark_rate_hz: Option<f64>,
    pub gate_window_s: Option<f64>,
}

impl DetectorDto {
    fn build(&self) -> DetectorModel {
        let d = DetectorModel::default();
        DetectorModel {
            efficiency: self.efficiency.unwrap_or(d.efficiency),
            dark_rate_hz: self.dark_rate_hz.unwrap_or(d.dark_rate_hz),
            gate_window_s: self.gate_window_s.unwrap_or(d.gate_window_s),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionDto {
    pub pulse_count: Option<u64>,
    pub pulse_rate_hz: Option<f64>,
    pub mean_photon_number: Option<f64>,
    pub channel: Option<ChannelDto>,
    pub detector: Option<DetectorDto>,
    pub seed: Option<u64>,
    pub force_single_photon: Option<bool>,
}

impl SessionDto {
    fn build(&self) -> SessionConfig {
        let d = SessionConfig::default();
        SessionConfig {
            pulse_count: self.pulse_count.unwrap_or(d.pulse_count),
            pulse_rate_hz: self.pulse_rate_hz.unwrap_or(d.pulse_rate_hz),
            mean_photon_number: self.mean_photon_number.unwrap_or(d.mean_photon_number),
            channel: self.channel.as_ref().map_or(d.channel, ChannelDto::build),
            detector: self.detector.as_ref().map_or(d.detector, DetectorDto::build),
            seed: self.seed.unwrap_or(d.seed),
            force_single_photon: self.force_single_photon.unwrap_or(d.force_single_photon),
        }
    }
}

pub fn session_config(
    text: Option<&str>,
    seed_override: Option<u64>,
) -> Result<SessionConfig, ConfigError> {
    let dto: SessionDto = parse_document(text)?;
    let mut config = dto.build();
    if let Some(seed) = seed_override {
        config.seed = seed;
    }
    config.validate().map_err(invalid)?;
    Ok(config)
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResendDto {
    pub kind: Option<String>,
    pub mean: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackDto {
    pub kind: Option<String>,
    pub eve_efficiency: Option<f64>,
    pub reflectivity: Option<f64>,
    pub resend_strategy: Option<ResendDto>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackRunDto {
    pub session: Option<SessionDto>,
    pub attack: Option<AttackDto>,
}

fn build_resend(dto: &ResendDto, errors: &mut Vec<String>) -> ResendStrategy {
    let kind = dto.kind.as_deref().unwrap_or("single");
    match kind {
        "single" => {
            if dto.mean.is_some() {
                errors.push(
                    "attack.resend_strategy.mean: not a parameter of the single strategy"
                        .to_string(),
                );
            }
            ResendStrategy::SingleWhenIdentified
        }
        "dim" | "bright" => {
            let Some(mean) = dto.mean else {
                errors.push(format!(
                    "attack.resend_strategy.mean: required for the {kind} strategy"
                ));
                return ResendStrategy::SingleWhenIdentified;
            };
            if kind == "dim" {
                ResendStrategy::DimPulse { mean }
            } else {
                ResendStrategy::BrightPulse { mean }
            }
        }
        other => {
            errors.push(format!(
                "attack.resend_strategy.kind: expected single, dim, or bright, got {other:?}"
            ));
            ResendStrategy::SingleWhenIdentified
        }
    }
}

fn build_attack(dto: &AttackDto) -> Result<AttackConfig, ConfigError> {
    let mut errors = Vec::new();
    let kind = dto.kind.as_deref().unwrap_or("opaque");
    let attack = match kind {
        "opaque" => {
            if dto.reflectivity.is_some() {
                errors.push(
                    "attack.reflectivity: not a parameter of the opaque attack".to_string(),
                );
            }
            let d = OpaqueAttackConfig::default();
            AttackConfig::Opaque(OpaqueAttackConfig {
                resend_strategy: dto
                    .resend_strategy
                    .as_ref()
                    .map_or(d.resend_strategy, |r| build_resend(r, &mut errors)),
                eve_efficiency: dto.eve_efficiency.unwrap_or(d.eve_efficiency),
            })
        }
        "beamsplitter" => {
            if dto.resend_strategy.is_some() {
                errors.push(
                    "attack.resend_strategy: not a parameter of the beamsplitter attack"
                        .to_string(),
                );
            }
            let d = BeamsplitterAttackConfig::default();
            AttackConfig::Beamsplitter(BeamsplitterAttackConfig {
                reflectivity: dto.reflectivity.unwrap_or(d.reflectivity),
                eve_efficiency: dto.eve_efficiency.unwrap_or(d.eve_efficiency),
            })
        }
        other => {
            errors.push(format!(
                "attack.kind: expected opaque or beamsplitter, got {other:?}"
            ));
            AttackConfig::Opaque(OpaqueAttackConfig::default())
        }
    };
    if let Err(e) = attack.validate() {
        errors.extend(e.0.iter().map(|v| format!("attack.{}: {}", v.field, v.message)));
    }
    if errors.is_empty() {
        Ok(attack)
    } else {
        Err(ConfigError::Invalid(errors))
    }
}

pub fn attack_config(
    text: Option<&str>,
    seed_override: Option<u64>,
) -> Result<(SessionConfig, AttackConfig), ConfigError> {
    let dto: AttackRunDto = parse_document(text)?;
    let mut session = dto.session.as_ref().map_or_else(SessionConfig::default, SessionDto::build);
    if let Some(seed) = seed_override {
        session.seed = seed;
    }
    let mut errors = Vec::new();
    if let Err(e) = session.validate() {
        errors.extend(e.0.iter().map(|v| format!("session.{}: {}", v.field, v.message)));
    }
    let attack = match dto.attack.as_ref().map_or_else(
        || Ok(AttackConfig::Opaque(OpaqueAttackConfig::default())),
        build_attack,
    ) {
        Ok(a) => Some(a),
        Err(ConfigError::Invalid(e)) => {
            errors.extend(e);
            None
        }
        Err(other) => return Err(other),
    };
    if !errors.is_empty() {
        return Err(ConfigError::Invalid(errors));
    }
    Ok((session, attack.expect("attack built when no errors")))
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockDto {
    pub rows: Option<usize>,
    pub cols: Option<usize>,
    pub passes: Option<u32>,
    pub shuffle_seed: Option<u64>,
}

pub fn block_config(
    text: Option<&str>,
    seed_override: Option<u64>,
) -> Result<ParityBlockConfig, ConfigError> {
    let dto: BlockDto = parse_document(text)?;
    let d = ParityBlockConfig::default();
    let mut config = ParityBlockConfig {
        rows: dto.rows.unwrap_or(d.rows),
        cols: dto.cols.unwrap_or(d.cols),
        passes: dto.passes.unwrap_or(d.passes),
        shuffle_seed: dto.shuffle_seed.unwrap_or(d.shuffle_seed),
    };
    if let Some(seed) = seed_override {
        config.shuffle_seed = seed;
    }
    Ok(config)
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDto {
    pub altitude_m: Option<f64>,
    pub wavelength_m: Option<f64>,
    pub tx_aperture_m: Option<f64>,
    pub rx_aperture_m: Option<f64>,
    pub pulse_rate_hz: Option<f64>,
    pub mean_photon_number: Option<f64>,
    pub atmospheric_transmission: Option<f64>,
    pub beam_wander_arcsec_lo: Option<f64>,
    pub beam_wander_arcsec_hi: Option<f64>,
    pub detector_efficiency: Option<f64>,
    pub protocol_efficiency: Option<f64>,
    pub filter_transmission: Option<f64>,
    pub fiber_coupling: Option<f64>,
    pub tilt_correction_factor: Option<f64>,
    pub protocol_rate_multiplier: Option<f64>,
    pub direction: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackgroundDto {
    pub radiance: Option<f64>,
    pub fov_arcsec: Option<f64>,
    pub filter_bandwidth_nm: Option<f64>,
    pub gate_window_s: Option<f64>,
    pub detector_dark_rate_hz: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkBudgetDto {
    pub scenario: Option<ScenarioDto>,
    pub background: Option<BackgroundDto>,
}

pub fn link_budget_config(
    text: Option<&str>,
) -> Result<(SatelliteScenario, BackgroundScenario), ConfigError> {
    let dto: LinkBudgetDto = parse_document(text)?;
    let mut errors = Vec::new();

    let sd = SatelliteScenario::default();
    let s = dto.scenario.unwrap_or_default();
    let direction = match s.direction.as_deref() {
        None => sd.direction,
        Some("uplink") => LinkDirection::Uplink,
        Some("downlink") => LinkDirection::Downlink,
        Some(other) => {
            errors.push(format!(
                "scenario.direction: expected uplink or downlink, got {other:?}"
            ));
            sd.direction
        }
    };
    let scenario = SatelliteScenario {
        altitude_m: s.altitude_m.unwrap_or(sd.altitude_m),
        wavelength_m: s.wavelength_m.unwrap_or(sd.wavelength_m),
        tx_aperture_m: s.tx_aperture_m.unwrap_or(sd.tx_aperture_m),
        rx_aperture_m: s.rx_aperture_m.unwrap_or(sd.rx_aperture_m),
        pulse_rate_hz: s.pulse_rate_hz.unwrap_or(sd.pulse_rate_hz),
        mean_photon_number: s.mean_photon_number.unwrap_or(sd.mean_photon_number),
        atmospheric_transmission: s
            .atmospheric_transmission
            .unwrap_or(sd.atmospheric_transmission),
        beam_wander_arcsec_lo: s.beam_wander_arcsec_lo.unwrap_or(sd.beam_wander_arcsec_lo),
        beam_wander_arcsec_hi: s.beam_wander_arcsec_hi.unwrap_or(sd.beam_wander_arcsec_hi),
        detector_efficiency: s.detector_efficiency.unwrap_or(sd.detector_efficiency),
        protocol_efficiency: s.protocol_efficiency.unwrap_or(sd.protocol_efficiency),
        filter_transmission: s.filter_transmission.unwrap_or(sd.filter_transmission),
        fiber_coupling: s.fiber_coupling.unwrap_or(sd.fiber_coupling),
        tilt_correction_factor: s.tilt_correction_factor.unwrap_or(sd.tilt_correction_factor),
        protocol_rate_multiplier: s
            .protocol_rate_multiplier
            .unwrap_or(sd.protocol_rate_multiplier),
        direction,
    };

    let bd = BackgroundScenario::default();
    let b = dto.background.unwrap_or_default();
    let background = BackgroundScenario {
        radiance: b.radiance.unwrap_or(bd.radiance),
        fov_arcsec: b.fov_arcsec.unwrap_or(bd.fov_arcsec),
        filter_bandwidth_nm: b.filter_bandwidth_nm.unwrap_or(bd.filter_bandwidth_nm),
        gate_window_s: b.gate_window_s.unwrap_or(bd.gate_window_s),
        detector_dark_rate_hz: b.detector_dark_rate_hz.unwrap_or(bd.detector_dark_rate_hz),
    };

    if let Err(e) = scenario.validate() {
        errors.extend(e.0.iter().map(|v| format!("scenario.{}: {}", v.field, v.message)));
    }
    if let Err(e) = background.validate() {
        errors.extend(e.0.iter().map(|v| format!("background.{}: {}", v.field, v.message)));
    }
    if !errors.is_empty() {
        return Err(ConfigError::Invalid(errors));
    }
    Ok((scenario, background))
}
