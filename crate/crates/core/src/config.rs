//! Experiment configuration: one strict TOML document describing the whole
//! link.
//!
//! Every physical input lives here under a section named for its subsystem,
//! with units spelled out in the key names (`flow_ul_min`,
//! `bit_period_s`), so an experiment is auditable from a single file.
//! Parsing is strict: unknown keys are rejected, and every derived
//! quantity re-validates through the owning module's constructor, so a
//! config that loads and validates is a config that runs.
//!
//! [`ExperimentConfig::reference`] is the compiled-in default describing
//! the reference device and assay; `configs/reference.toml` in the
//! repository is its serialized twin (a test keeps them identical). Two
//! electrolytes appear because the assay uses them both: probes hybridize
//! in a high-salt buffer and the device senses in a diluted one, where the
//! lighter screening lets bound charge reach the gate.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinetics::{self, fixtures, BindingKinetics};
use crate::physchem::{DnaProbe, FluidicChannel, ReceiverElectro};
use crate::pulse::{transport_parameter_per_molar_s, PulseModelParams, TransportMode};
use crate::txrx::{window_samples, LinkParams, NoiseModel, OokScheme};

/// Configuration failure; the message always names the offending section
/// or key.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("config serialize error: {0}")]
    Serialize(String),
    #[error("config section [{section}]: {problem}")]
    Invalid { section: String, problem: String },
    #[error("[kinetics] must set either fixture or both k_on_per_molar_s and k_off_per_s")]
    KineticsUnderSpecified,
    #[error("[kinetics] fixture {found:?} is unknown; known fixtures: tdna, ntdna1, ntdna2")]
    UnknownFixture { found: String },
    #[error("[pulse] transport_mode = \"direct\" requires k_transport_per_molar_s")]
    MissingTransportValue,
    #[error("[tx] bits may contain only '0' and '1', found {found:?} at position {position}")]
    BadBitsString { found: char, position: usize },
}

fn invalid(section: &str, e: impl std::fmt::Display) -> ConfigError {
    ConfigError::Invalid {
        section: section.to_string(),
        problem: e.to_string(),
    }
}

/// Which electrolyte a screening-dependent quantity refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Buffer {
    /// High-salt buffer the probes are functionalized and hybridized in.
    Hybridization,
    /// Diluted buffer the device is read out in.
    Measurement,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    pub width_um: f64,
    pub height_um: f64,
    pub fluid_density_kg_m3: f64,
    pub viscosity_pa_s: f64,
    pub flow_ul_min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElectrolyteSection {
    pub hybridization_ionic_strength_molar: f64,
    pub measurement_ionic_strength_molar: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReceiverSection {
    pub graphene_area_um2: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gate_electrode_area_um2: Option<f64>,
    pub relative_permittivity: f64,
    pub quantum_capacitance_uf_per_cm2: f64,
    pub transconductance_ua_per_v: f64,
    /// Charge-neutrality-point shift measured after functionalization [mV];
    /// drives the probe-density estimate.
    pub cnp_shift_mv: f64,
    pub baseline_current_ua: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSection {
    pub bases: u32,
    pub base_rise_nm: f64,
    pub length_fraction: f64,
    /// Free-solution diffusivity of the target [µm²/s]; used only by the
    /// transport estimate.
    pub diffusivity_um2_per_s: f64,
    /// Streamwise extent of the sensing pad [µm]; used only by the
    /// transport estimate.
    pub sensor_length_um: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KineticsSection {
    /// Named rate-constant set (`tdna`, `ntdna1`, `ntdna2`); mutually
    /// exclusive with the explicit constants.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixture: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_on_per_molar_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_off_per_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BindingSection {
    /// Saturation current step [µA], signed as measured.
    pub delta_i_sat_ua: f64,
    /// Equilibrium current step a held pulse concentration reaches [µA].
    pub delta_i_eq_ua: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransportModeKey {
    Direct,
    Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSection {
    pub concentration_molar: f64,
    pub transport_mode: TransportModeKey,
    /// Calibrated transport rate constant [1/(M·s)]; required in direct
    /// mode, ignored by the estimate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_transport_per_molar_s: Option<f64>,
    /// Stand-alone single-pulse window (the link re-derives windows per
    /// bit from the tx section).
    pub t_arrival_s: f64,
    pub t_flush_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TxSection {
    pub n_bits: usize,
    pub bit_period_s: f64,
    pub pulse_width_s: f64,
    pub transport_delay_s: f64,
    pub t_tx_start_s: f64,
    pub seed: u64,
    /// Explicit payload as a 0/1 string, replacing the seeded generator.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bits: Option<String>,
    /// Clamp the synthesized excursion at |delta_i_sat_ua| to expose
    /// linear-superposition error.
    #[serde(default)]
    pub cap_at_saturation: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RxSection {
    pub dt_s: f64,
    pub filter_window_s: f64,
    pub filter_enabled: bool,
    /// Shift applied to every decision instant [s]; defaults to sampling at
    /// the nominal slot boundaries. Negative values sample early so the
    /// centered filter window stays clear of the next pulse's onset.
    #[serde(default)]
    pub decision_offset_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub sigma_ua: f64,
    pub drift_ua_per_s: f64,
    /// Explicit noise seed; when absent the link derives one from the tx
    /// seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// Complete experiment description. See the module docs for the layout
/// philosophy and [`ExperimentConfig::reference`] for the reference values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub channel: ChannelSection,
    pub electrolyte: ElectrolyteSection,
    pub receiver: ReceiverSection,
    pub probe: ProbeSection,
    pub kinetics: KineticsSection,
    pub binding: BindingSection,
    pub pulse: PulseSection,
    pub tx: TxSection,
    pub rx: RxSection,
    pub noise: NoiseSection,
}

impl ExperimentConfig {
    /// Compiled-in reference experiment: the 4×1.5 mm duct at 80 µl/min,
    /// the graphene receiver in the diluted measurement buffer, tDNA
    /// kinetics, 1 µM pulses, and the 20-bit frame timing.
    pub fn reference() -> Self {
        Self {
            channel: ChannelSection {
                width_um: 4000.0,
                height_um: 1500.0,
                fluid_density_kg_m3: 1000.0,
                viscosity_pa_s: 1.002e-3,
                flow_ul_min: 80.0,
            },
            electrolyte: ElectrolyteSection {
                hybridization_ionic_strength_molar: 0.15,
                measurement_ionic_strength_molar: 0.0015,
            },
            receiver: ReceiverSection {
                graphene_area_um2: 4.0e3,
                gate_electrode_area_um2: Some(7.85e6),
                relative_permittivity: 80.0,
                quantum_capacitance_uf_per_cm2: 2.0,
                transconductance_ua_per_v: -28.0,
                cnp_shift_mv: 66.0,
                baseline_current_ua: 31.25,
            },
            probe: ProbeSection {
                bases: 18,
                base_rise_nm: 0.34,
                length_fraction: 0.5,
                diffusivity_um2_per_s: 100.0,
                sensor_length_um: 100.0,
            },
            kinetics: KineticsSection {
                fixture: Some("tdna".to_string()),
                k_on_per_molar_s: None,
                k_off_per_s: None,
            },
            binding: BindingSection {
                delta_i_sat_ua: -1.393,
                delta_i_eq_ua: -0.805,
            },
            pulse: PulseSection {
                concentration_molar: 1.0e-6,
                transport_mode: TransportModeKey::Direct,
                k_transport_per_molar_s: Some(1.3e10),
                t_arrival_s: 55.0,
                t_flush_s: 85.0,
            },
            tx: TxSection {
                n_bits: 20,
                bit_period_s: 120.0,
                pulse_width_s: 30.0,
                transport_delay_s: 55.0,
                t_tx_start_s: 0.0,
                seed: 1,
                bits: None,
                cap_at_saturation: false,
            },
            rx: RxSection {
                dt_s: 1.0,
                filter_window_s: 21.0,
                filter_enabled: true,
                decision_offset_s: -10.0,
            },
            noise: NoiseSection {
                sigma_ua: 0.005,
                drift_ua_per_s: 0.0,
                seed: None,
            },
        }
    }

    /// Parse a strict TOML document.
    pub fn from_toml_str(s: &str) -> Result<Self, ConfigError> {
        toml::from_str(s).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    /// Serialize back to TOML.
    pub fn to_toml_string(&self) -> Result<String, ConfigError> {
        toml::to_string_pretty(self).map_err(|e| ConfigError::Serialize(e.to_string()))
    }

    /// Build every domain object once, surfacing the first invalid value.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.channel()?;
        self.receiver()?;
        self.probe()?;
        self.kinetics()?;
        self.debye_length_nm(Buffer::Hybridization)?;
        self.debye_length_nm(Buffer::Measurement)?;
        self.transduction_a()?;
        self.pulse_params()?;
        if !self.rx.decision_offset_s.is_finite() {
            return Err(invalid(
                "rx",
                format!(
                    "decision_offset_s must be finite, got {}",
                    self.rx.decision_offset_s
                ),
            ));
        }
        self.link_params()?;
        Ok(())
    }

    pub fn channel(&self) -> Result<FluidicChannel, ConfigError> {
        let c = &self.channel;
        FluidicChannel::new(
            c.width_um,
            c.height_um,
            c.fluid_density_kg_m3,
            c.viscosity_pa_s,
            c.flow_ul_min,
        )
        .map_err(|e| invalid("channel", e))
    }

    pub fn receiver(&self) -> Result<ReceiverElectro, ConfigError> {
        let r = &self.receiver;
        ReceiverElectro::new(
            r.graphene_area_um2,
            r.gate_electrode_area_um2,
            r.relative_permittivity,
            r.quantum_capacitance_uf_per_cm2,
            r.transconductance_ua_per_v,
        )
        .map_err(|e| invalid("receiver", e))
    }

    pub fn probe(&self) -> Result<DnaProbe, ConfigError> {
        let p = &self.probe;
        DnaProbe::new(p.bases, p.base_rise_nm, p.length_fraction)
            .map_err(|e| invalid("probe", e))
    }

    pub fn kinetics(&self) -> Result<BindingKinetics, ConfigError> {
        let k = &self.kinetics;
        match (&k.fixture, k.k_on_per_molar_s, k.k_off_per_s) {
            (Some(name), None, None) => fixtures::by_label(name)
                .ok_or_else(|| ConfigError::UnknownFixture { found: name.clone() }),
            (None, Some(k_on), Some(k_off)) => BindingKinetics::new(k_on, k_off, "custom")
                .map_err(|e| invalid("kinetics", e)),
            _ => Err(ConfigError::KineticsUnderSpecified),
        }
    }

    fn ionic_strength_molar(&self, buffer: Buffer) -> f64 {
        match buffer {
            Buffer::Hybridization => self.electrolyte.hybridization_ionic_strength_molar,
            Buffer::Measurement => self.electrolyte.measurement_ionic_strength_molar,
        }
    }

    pub fn debye_length_nm(&self, buffer: Buffer) -> Result<f64, ConfigError> {
        crate::physchem::debye_length_nm(self.ionic_strength_molar(buffer))
            .map_err(|e| invalid("electrolyte", e))
    }

    pub fn gate_capacitance_nf(&self, buffer: Buffer) -> Result<f64, ConfigError> {
        let lambda = self.debye_length_nm(buffer)?;
        self.receiver()?
            .gate_capacitance_nf(lambda)
            .map_err(|e| invalid("receiver", e))
    }

    pub fn effective_charge_c(&self, buffer: Buffer) -> Result<f64, ConfigError> {
        let lambda = self.debye_length_nm(buffer)?;
        crate::physchem::effective_charge_c(&self.probe()?, lambda)
            .map_err(|e| invalid("probe", e))
    }

    /// Per-molecule current step [A] in the measurement buffer, where the
    /// device is read out.
    pub fn transduction_a(&self) -> Result<f64, ConfigError> {
        kinetics::transduction_constant_a(
            self.receiver.transconductance_ua_per_v,
            self.effective_charge_c(Buffer::Measurement)?,
            self.gate_capacitance_nf(Buffer::Measurement)?,
        )
        .map_err(|e| invalid("receiver", e))
    }

    /// Probe surface density estimate from the functionalization CNP shift
    /// [1/µm²], evaluated in the hybridization buffer where the shift was
    /// measured.
    pub fn probe_density_per_um2(&self) -> Result<f64, ConfigError> {
        crate::physchem::probe_density_per_um2(
            self.receiver.cnp_shift_mv,
            self.gate_capacitance_nf(Buffer::Hybridization)?,
            self.effective_charge_c(Buffer::Hybridization)?,
            self.receiver.graphene_area_um2,
        )
        .map_err(|e| invalid("receiver", e))
    }

    /// Resolved transport rate constant [1/(M·s)].
    pub fn k_transport_per_molar_s(&self) -> Result<f64, ConfigError> {
        let mode = match self.pulse.transport_mode {
            TransportModeKey::Direct => TransportMode::Direct {
                k_transport_per_molar_s: self
                    .pulse
                    .k_transport_per_molar_s
                    .ok_or(ConfigError::MissingTransportValue)?,
            },
            TransportModeKey::Estimate => TransportMode::Estimate,
        };
        transport_parameter_per_molar_s(
            &self.channel()?,
            self.probe.diffusivity_um2_per_s,
            self.probe.sensor_length_um,
            mode,
        )
        .map_err(|e| invalid("pulse", e))
    }

    /// Single-pulse model over the stand-alone window from the pulse
    /// section.
    pub fn pulse_params(&self) -> Result<PulseModelParams, ConfigError> {
        PulseModelParams::new(
            self.kinetics()?,
            self.binding.delta_i_eq_ua,
            self.transduction_a()?,
            self.pulse.concentration_molar,
            self.k_transport_per_molar_s()?,
            self.pulse.t_arrival_s,
            self.pulse.t_flush_s,
        )
        .map_err(|e| invalid("pulse", e))
    }

    pub fn scheme(&self) -> Result<OokScheme, ConfigError> {
        OokScheme::new(
            self.tx.bit_period_s,
            self.tx.pulse_width_s,
            self.tx.transport_delay_s,
            self.tx.t_tx_start_s,
        )
        .map_err(|e| invalid("tx", e))
    }

    /// Explicit payload parsed from the tx section's 0/1 string, if set.
    pub fn payload(&self) -> Result<Option<Vec<u8>>, ConfigError> {
        let Some(text) = &self.tx.bits else {
            return Ok(None);
        };
        let mut bits = Vec::with_capacity(text.len());
        for (position, ch) in text.chars().enumerate() {
            match ch {
                '0' => bits.push(0),
                '1' => bits.push(1),
                found => return Err(ConfigError::BadBitsString { found, position }),
            }
        }
        Ok(Some(bits))
    }

    pub fn noise_model(&self) -> Result<NoiseModel, ConfigError> {
        NoiseModel::new(self.noise.sigma_ua, self.noise.drift_ua_per_s)
            .map_err(|e| invalid("noise", e))
    }

    /// Moving-mean width in samples; 0 when filtering is disabled.
    pub fn filter_window_samples(&self) -> Result<usize, ConfigError> {
        if !self.rx.filter_enabled {
            return Ok(0);
        }
        window_samples(self.rx.filter_window_s, self.rx.dt_s).map_err(|e| invalid("rx", e))
    }

    /// Full frame-experiment parameter bundle.
    pub fn link_params(&self) -> Result<LinkParams, ConfigError> {
        Ok(LinkParams {
            pulse: self.pulse_params()?,
            scheme: self.scheme()?,
            n_bits: self.tx.n_bits,
            baseline_ua: self.receiver.baseline_current_ua,
            dt_s: self.rx.dt_s,
            noise: self.noise_model()?,
            filter_window: self.filter_window_samples()?,
            decision_offset_s: self.rx.decision_offset_s,
            payload_override: self.payload()?,
            saturation_cap_ua: self
                .tx
                .cap_at_saturation
                .then_some(self.binding.delta_i_sat_ua),
            noise_seed: self.noise.seed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_config_validates() {
        ExperimentConfig::reference().validate().unwrap();
    }

    #[test]
    fn toml_round_trip_is_identity() {
        let cfg = ExperimentConfig::reference();
        let text = cfg.to_toml_string().unwrap();
        let back = ExperimentConfig::from_toml_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn repository_reference_file_matches_compiled_default() {
        let path = concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/../../configs/reference.toml"
        );
        let text = std::fs::read_to_string(path).expect("reference config file exists");
        let file_cfg = ExperimentConfig::from_toml_str(&text).unwrap();
        assert_eq!(file_cfg, ExperimentConfig::reference());
    }

    #[test]
    fn unknown_keys_are_rejected_with_the_key_name() {
        let mut text = ExperimentConfig::reference().to_toml_string().unwrap();
        text.push_str("\n[channel2]\nwidth_um = 1.0\n");
        let err = ExperimentConfig::from_toml_str(&text).unwrap_err();
        assert!(err.to_string().contains("channel2"), "{err}");

        let text = ExperimentConfig::reference()
            .to_toml_string()
            .unwrap()
            .replace("width_um", "breadth_um");
        let err = ExperimentConfig::from_toml_str(&text).unwrap_err();
        assert!(err.to_string().contains("breadth_um"), "{err}");
    }

    #[test]
    fn kinetics_section_requires_exactly_one_style() {
        let mut cfg = ExperimentConfig::reference();
        cfg.kinetics.fixture = None;
        assert!(matches!(
            cfg.kinetics(),
            Err(ConfigError::KineticsUnderSpecified)
        ));
        cfg.kinetics.fixture = Some("dna9000".into());
        assert!(matches!(cfg.kinetics(), Err(ConfigError::UnknownFixture { .. })));
        cfg.kinetics.fixture = None;
        cfg.kinetics.k_on_per_molar_s = Some(1000.0);
        cfg.kinetics.k_off_per_s = Some(1e-3);
        let k = cfg.kinetics().unwrap();
        assert_eq!(k.label, "custom");
        // Both styles at once is ambiguous.
        cfg.kinetics.fixture = Some("tdna".into());
        assert!(cfg.kinetics().is_err());
    }

    #[test]
    fn direct_transport_mode_requires_a_value() {
        let mut cfg = ExperimentConfig::reference();
        cfg.pulse.k_transport_per_molar_s = None;
        assert!(matches!(
            cfg.k_transport_per_molar_s(),
            Err(ConfigError::MissingTransportValue)
        ));
        cfg.pulse.transport_mode = TransportModeKey::Estimate;
        let k = cfg.k_transport_per_molar_s().unwrap();
        // Boundary-layer estimate for the reference channel and probe.
        assert!((k - 8.681e14).abs() / 8.681e14 < 1e-3, "{k:e}");
    }

    #[test]
    fn payload_string_parses_and_rejects_junk() {
        let mut cfg = ExperimentConfig::reference();
        assert_eq!(cfg.payload().unwrap(), None);
        cfg.tx.bits = Some("0110".into());
        assert_eq!(cfg.payload().unwrap(), Some(vec![0, 1, 1, 0]));
        cfg.tx.bits = Some("01x0".into());
        assert!(matches!(
            cfg.payload(),
            Err(ConfigError::BadBitsString { found: 'x', position: 2 })
        ));
    }

    #[test]
    fn filter_window_honors_enable_flag() {
        let mut cfg = ExperimentConfig::reference();
        assert_eq!(cfg.filter_window_samples().unwrap(), 21);
        cfg.rx.filter_enabled = false;
        assert_eq!(cfg.filter_window_samples().unwrap(), 0);
    }

    #[test]
    fn invalid_values_name_their_section() {
        let mut cfg = ExperimentConfig::reference();
        cfg.channel.width_um = -1.0;
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("[channel]"), "{err}");

        let mut cfg = ExperimentConfig::reference();
        cfg.rx.dt_s = 0.0;
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains('['), "{err}");
    }

    #[test]
    fn link_params_assemble_from_reference() {
        let cfg = ExperimentConfig::reference();
        let link = cfg.link_params().unwrap();
        assert_eq!(link.n_bits, 20);
        assert_eq!(link.baseline_ua, 31.25);
        assert_eq!(link.filter_window, 21);
        assert_eq!(link.decision_offset_s, -10.0);
        assert_eq!(link.scheme.bit_period_s, 120.0);
        assert_eq!(link.saturation_cap_ua, None);
        assert_eq!(link.noise_seed, None);
        // Saturation capping picks up the binding section's magnitude.
        let mut capped = cfg.clone();
        capped.tx.cap_at_saturation = true;
        assert_eq!(
            capped.link_params().unwrap().saturation_cap_ua,
            Some(-1.393)
        );
    }
}
