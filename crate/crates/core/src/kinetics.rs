//! Langmuir surface-binding kinetics and bioFET transduction.
//!
//! Ligands at concentration `c` bind a finite population of immobilized
//! probes with association rate `k_on` [1/(M·s)] and unbind with `k_off`
//! [1/s]; `K_D = k_off/k_on` is the dissociation constant. Under the ideal
//! (transport-unlimited) Langmuir model:
//!
//! ```text
//! θ_eq(c)   = c / (c + K_D)                      equilibrium occupancy
//! ΔI_eq(c)  = ΔI_sat / (1 + K_D/c)               response isotherm
//! ΔI(t)     = ΔI_eq·(1 − e^{−(k_on·c + k_off)·t})    association
//! ΔI(t)     = ΔI(t_d)·e^{−k_off·(t − t_d)}           dissociation
//! ```
//!
//! The dissociation transient is anchored at the association endpoint
//! `ΔI(t_d)` so the response is continuous at the switch-off instant.
//!
//! Binding couples to the drain-source current through the charge each
//! captured ligand adds to the gate: `Q = g_m·q_eff/C_G` is the current step
//! per bound molecule, so `N_R = ΔI/Q` counts occupied receptors and
//! `N_R,max = ((c + K_D)/c)·N_R,eq` extrapolates the full probe population.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::units;

/// Invalid argument to a kinetics closed form.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum KineticsError {
    #[error("{name} must be positive and finite, got {value}")]
    NotPositive { name: &'static str, value: f64 },
    #[error("{name} must be non-negative and finite, got {value}")]
    Negative { name: &'static str, value: f64 },
    #[error("time {t_s} s is not after the dissociation onset t_d = {t_d_s} s")]
    BeforeDissociation { t_s: f64, t_d_s: f64 },
    #[error("transduction constant is zero; cannot convert current to receptor count")]
    ZeroTransduction,
}

fn positive(name: &'static str, value: f64) -> Result<f64, KineticsError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(KineticsError::NotPositive { name, value })
    }
}

fn non_negative(name: &'static str, value: f64) -> Result<f64, KineticsError> {
    if value.is_finite() && value >= 0.0 {
        Ok(value)
    } else {
        Err(KineticsError::Negative { name, value })
    }
}

/// Rate-constant pair of a ligand/probe couple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BindingKinetics {
    /// Association rate constant [1/(M·s)].
    pub k_on_per_molar_s: f64,
    /// Dissociation rate constant [1/s].
    pub k_off_per_s: f64,
    /// Short identifier for reports and fixtures.
    pub label: String,
}

impl BindingKinetics {
    pub fn new(
        k_on_per_molar_s: f64,
        k_off_per_s: f64,
        label: impl Into<String>,
    ) -> Result<Self, KineticsError> {
        positive("k_on", k_on_per_molar_s)?;
        positive("k_off", k_off_per_s)?;
        Ok(Self {
            k_on_per_molar_s,
            k_off_per_s,
            label: label.into(),
        })
    }

    /// Dissociation constant `K_D = k_off/k_on` [M].
    pub fn dissociation_constant_molar(&self) -> f64 {
        self.k_off_per_s / self.k_on_per_molar_s
    }

    /// Observed association rate `k_on·c + k_off` at ligand concentration
    /// `c` [1/s].
    pub fn association_rate_per_s(&self, concentration_molar: f64) -> f64 {
        self.k_on_per_molar_s * concentration_molar + self.k_off_per_s
    }
}

/// Measured rate constants for the reference DNA assay: one fully
/// complementary target and two single-base-mismatch controls on the same
/// 18-mer probe. Tabulated dissociation constants are kept alongside so the
/// internal consistency `K_D ≈ k_off/k_on` stays tested.
pub mod fixtures {
    use super::BindingKinetics;

    /// Fully complementary target DNA.
    pub fn tdna() -> BindingKinetics {
        BindingKinetics::new(1814.9, 13.538e-4, "tdna").expect("fixture is valid")
    }

    /// Single-base-mismatch control 1.
    pub fn ntdna1() -> BindingKinetics {
        BindingKinetics::new(355.3, 12.454e-4, "ntdna1").expect("fixture is valid")
    }

    /// Single-base-mismatch control 2.
    pub fn ntdna2() -> BindingKinetics {
        BindingKinetics::new(48.9, 13.110e-4, "ntdna2").expect("fixture is valid")
    }

    /// All fixtures, most to least selective.
    pub fn all() -> [BindingKinetics; 3] {
        [tdna(), ntdna1(), ntdna2()]
    }

    /// Fixture lookup by label.
    pub fn by_label(label: &str) -> Option<BindingKinetics> {
        match label {
            "tdna" => Some(tdna()),
            "ntdna1" => Some(ntdna1()),
            "ntdna2" => Some(ntdna2()),
            _ => None,
        }
    }

    /// Labels accepted by [`by_label`].
    pub const LABELS: [&str; 3] = ["tdna", "ntdna1", "ntdna2"];

    /// Tabulated dissociation constants [M], same order as [`all`].
    pub const TABULATED_KD_MOLAR: [f64; 3] = [0.746e-6, 3.506e-6, 26.829e-6];

    /// Equilibrium isotherm of the reference assay: dissociation constant [M]
    /// and saturation response magnitude [µA].
    pub const ISOTHERM_KD_MOLAR: f64 = 730e-9;
    pub const ISOTHERM_DELTA_I_SAT_UA: f64 = 1.393;

    /// Calibration concentration series of the reference isotherm [M]. The
    /// endpoints (50 nM, 10 µM) and count are fixed by the assay; the
    /// interior follows the usual 1-2.5-5 decade ladder.
    pub const ISOTHERM_CONCENTRATIONS_M: [f64; 8] = [
        50e-9, 100e-9, 250e-9, 500e-9, 1e-6, 2.5e-6, 5e-6, 10e-6,
    ];

    /// Equilibrium current step of the reference link at 1 µM target [µA].
    pub const EQUILIBRIUM_DELTA_I_UA: f64 = -0.805;
}

/// One equilibrium sensing record: plateau response at a held concentration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensingPoint {
    /// Held ligand concentration [M].
    pub concentration_molar: f64,
    /// Plateau current change [µA].
    pub delta_i_ua: f64,
}

/// Fractional occupancy `c/(c + K_D)`; shared by the isotherm so the two
/// stay bit-identical.
fn occupancy(concentration_molar: f64, kd_molar: f64) -> f64 {
    concentration_molar / (concentration_molar + kd_molar)
}

/// Equilibrium response isotherm `ΔI_sat/(1 + K_D/c)` [µA]; 0 at `c = 0`.
pub fn isotherm_response_ua(
    concentration_molar: f64,
    kd_molar: f64,
    delta_i_sat_ua: f64,
) -> Result<f64, KineticsError> {
    let c = non_negative("concentration", concentration_molar)?;
    let kd = positive("dissociation constant", kd_molar)?;
    Ok(delta_i_sat_ua * occupancy(c, kd))
}

/// Equilibrium occupancy `c/(c + K_D)` of the probe population.
pub fn equilibrium_occupancy(
    concentration_molar: f64,
    kinetics: &BindingKinetics,
) -> Result<f64, KineticsError> {
    let c = non_negative("concentration", concentration_molar)?;
    Ok(occupancy(c, kinetics.dissociation_constant_molar()))
}

/// Association transient `ΔI_eq·(1 − e^{−(k_on·c + k_off)·t})` [µA], with
/// `t` measured from the concentration step at `t = 0`.
pub fn association_trace_ua(
    t_s: f64,
    concentration_molar: f64,
    kinetics: &BindingKinetics,
    delta_i_eq_ua: f64,
) -> Result<f64, KineticsError> {
    let t = non_negative("time", t_s)?;
    let c = non_negative("concentration", concentration_molar)?;
    let rate = kinetics.association_rate_per_s(c);
    Ok(delta_i_eq_ua * (1.0 - (-rate * t).exp()))
}

/// Dissociation transient `ΔI(t_d)·e^{−k_off·(t − t_d)}` [µA] for `t > t_d`,
/// anchored at the association endpoint so the response is continuous at the
/// switch-off instant.
pub fn dissociation_trace_ua(
    t_s: f64,
    t_d_s: f64,
    k_off_per_s: f64,
    delta_i_at_td_ua: f64,
) -> Result<f64, KineticsError> {
    positive("k_off", k_off_per_s)?;
    if !(t_s > t_d_s) {
        return Err(KineticsError::BeforeDissociation { t_s, t_d_s });
    }
    Ok(delta_i_at_td_ua * (-k_off_per_s * (t_s - t_d_s)).exp())
}

/// Current step per bound molecule `Q = g_m·q_eff/C_G` [A].
///
/// `q_eff` is a magnitude; the transconductance is signed and its sign
/// carries through to `Q` (negative for the reference device, whose current
/// falls when anionic targets bind).
pub fn transduction_constant_a(
    transconductance_ua_per_v: f64,
    effective_charge_c: f64,
    gate_capacitance_nf: f64,
) -> Result<f64, KineticsError> {
    if !transconductance_ua_per_v.is_finite() {
        return Err(KineticsError::NotPositive {
            name: "transconductance",
            value: transconductance_ua_per_v,
        });
    }
    let q = non_negative("effective charge", effective_charge_c)?;
    let c_g = positive("gate capacitance", gate_capacitance_nf)?;
    Ok(units::ua_to_a(transconductance_ua_per_v) * q / units::nf_to_f(c_g))
}

/// Receptor count inferred from a current change.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReceptorCount {
    /// `ΔI/Q`; negative when the signs of `ΔI` and `Q` disagree.
    pub count: f64,
    /// False when the current change and the transduction constant have
    /// opposite signs, i.e. the reading contradicts the device polarity.
    pub sign_consistent: bool,
}

/// Occupied-receptor count `N_R = ΔI/Q` from a current change [µA] and the
/// per-molecule step [A].
pub fn bound_receptors_from_current(
    delta_i_ua: f64,
    transduction_a: f64,
) -> Result<ReceptorCount, KineticsError> {
    if transduction_a == 0.0 || !transduction_a.is_finite() {
        return Err(KineticsError::ZeroTransduction);
    }
    if !delta_i_ua.is_finite() {
        return Err(KineticsError::Negative {
            name: "current change",
            value: delta_i_ua,
        });
    }
    let count = units::ua_to_a(delta_i_ua) / transduction_a;
    Ok(ReceptorCount {
        count,
        sign_consistent: count >= 0.0,
    })
}

/// Total probe population `N_R,max = ((c + K_D)/c)·N_R,eq` extrapolated from
/// the equilibrium count at concentration `c`.
pub fn max_receptors(
    concentration_molar: f64,
    kd_molar: f64,
    n_eq: f64,
) -> Result<f64, KineticsError> {
    let c = positive("concentration", concentration_molar)?;
    let kd = positive("dissociation constant", kd_molar)?;
    let n = non_negative("equilibrium receptor count", n_eq)?;
    Ok((c + kd) / c * n)
}
