//! Channel hydrodynamics and receiver electrostatics.
//!
//! The link under study pushes ligand pulses through a rectangular
//! microfluidic duct and senses them with a graphene field-effect transistor
//! (bioFET) whose gate is the electrolyte itself. Two groups of closed forms
//! live here.
//!
//! **Hydrodynamics.** For a duct of width `w` and height `h` carrying a
//! volumetric flow `u_V`:
//!
//! ```text
//! D_H = 4·w·h / (2·(w + h))        hydraulic diameter
//! u   = u_V / (w·h)                mean (plug) velocity
//! Re  = ρ·u·D_H / µ                Reynolds number
//! ```
//!
//! Microfluidic operating points sit deep in the laminar regime (Re ≪ 2000),
//! which is what makes the steady linear superposition used by the signal
//! synthesizer defensible.
//!
//! **Electrostatics.** Ions screen surface charge over the Debye length; for
//! a 1:1 aqueous electrolyte at room temperature the practical form
//!
//! ```text
//! λ_D ≈ 0.3 / √ρ_ion   [nm, ρ_ion in M]
//! ```
//!
//! applies. The electrolyte side of the gate forms an electric double layer
//! (EDL) of capacitance `C = A·ε_r·ε₀/λ_D`; in series with it sit the
//! graphene quantum capacitance `C_Q = c_q·A` and, in principle, the EDL of
//! the reference electrode, which is commonly neglected because its area
//! dwarfs the sensing area. A molecule carrying `n` elementary charges at
//! distance `r` from the surface contributes only its screened charge
//! `q = n·e·exp(−r/λ_D)`, and a threshold-voltage (charge-neutrality-point)
//! shift `ΔV` then estimates the surface probe density as
//! `n_s = ΔV·C_G/(q·A)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::consts::{ELEMENTARY_CHARGE_C, VACUUM_PERMITTIVITY_F_PER_M};
use crate::units;

/// Empirical Debye-length prefactor for 1:1 aqueous electrolytes at room
/// temperature [nm·√M].
pub const DEBYE_PREFACTOR_NM_SQRT_M: f64 = 0.3;

/// Invalid physical parameter.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("{name} must be positive and finite, got {value}")]
    NotPositive { name: &'static str, value: f64 },
    #[error("{name} must be non-negative and finite, got {value}")]
    Negative { name: &'static str, value: f64 },
}

fn require_positive(name: &'static str, value: f64) -> Result<f64, ParamError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(ParamError::NotPositive { name, value })
    }
}

fn require_non_negative(name: &'static str, value: f64) -> Result<f64, ParamError> {
    if value.is_finite() && value >= 0.0 {
        Ok(value)
    } else {
        Err(ParamError::Negative { name, value })
    }
}

/// Rectangular pressure-driven microfluidic channel and its working fluid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluidicChannel {
    /// Channel width [µm].
    pub width_um: f64,
    /// Channel height [µm].
    pub height_um: f64,
    /// Fluid density [kg/m³].
    pub fluid_density_kg_m3: f64,
    /// Dynamic viscosity [Pa·s].
    pub viscosity_pa_s: f64,
    /// Volumetric flow rate [µl/min]. Zero is a valid (quiescent) state.
    pub flow_ul_min: f64,
}

impl FluidicChannel {
    pub fn new(
        width_um: f64,
        height_um: f64,
        fluid_density_kg_m3: f64,
        viscosity_pa_s: f64,
        flow_ul_min: f64,
    ) -> Result<Self, ParamError> {
        require_positive("channel width", width_um)?;
        require_positive("channel height", height_um)?;
        require_positive("fluid density", fluid_density_kg_m3)?;
        require_positive("viscosity", viscosity_pa_s)?;
        require_non_negative("flow rate", flow_ul_min)?;
        Ok(Self {
            width_um,
            height_um,
            fluid_density_kg_m3,
            viscosity_pa_s,
            flow_ul_min,
        })
    }

    /// Hydraulic diameter [µm].
    pub fn hydraulic_diameter_um(&self) -> f64 {
        hydraulic_diameter_um(self.width_um, self.height_um)
            .expect("dimensions validated at construction")
    }

    /// Mean linear velocity [µm/s].
    pub fn linear_velocity_um_per_s(&self) -> f64 {
        linear_velocity_um_per_s(self.flow_ul_min, self.width_um, self.height_um)
            .expect("dimensions validated at construction")
    }

    /// Reynolds number (dimensionless).
    pub fn reynolds_number(&self) -> f64 {
        let u = self.linear_velocity_um_per_s() * 1e-6; // m/s
        let d_h = units::um_to_m(self.hydraulic_diameter_um());
        self.fluid_density_kg_m3 * u * d_h / self.viscosity_pa_s
    }

    /// Wall shear rate of the parallel-plate Poiseuille profile, 6·ū/h [1/s].
    ///
    /// Used by the transport-parameter estimate; the wide, flat duct is
    /// treated as a parallel-plate gap of height `h`.
    pub fn wall_shear_rate_per_s(&self) -> f64 {
        let u = self.linear_velocity_um_per_s() * 1e-6; // m/s
        6.0 * u / units::um_to_m(self.height_um)
    }
}

/// Hydraulic diameter of a rectangular duct, `4wh / (2(w+h))` [µm].
pub fn hydraulic_diameter_um(width_um: f64, height_um: f64) -> Result<f64, ParamError> {
    let w = require_positive("channel width", width_um)?;
    let h = require_positive("channel height", height_um)?;
    Ok(2.0 * w * h / (w + h))
}

/// Mean linear velocity `u_V / (w·h)` of a duct flow [µm/s].
pub fn linear_velocity_um_per_s(
    flow_ul_min: f64,
    width_um: f64,
    height_um: f64,
) -> Result<f64, ParamError> {
    let q = require_non_negative("flow rate", flow_ul_min)?;
    let w = require_positive("channel width", width_um)?;
    let h = require_positive("channel height", height_um)?;
    let area_m2 = units::um2_to_m2(w * h);
    Ok(units::m_per_s_to_um_per_s(
        units::ul_per_min_to_m3_per_s(q) / area_m2,
    ))
}

/// Reynolds number `ρ·u·D_H/µ` of the channel flow.
pub fn reynolds_number(ch: &FluidicChannel) -> f64 {
    ch.reynolds_number()
}

/// Aqueous 1:1 electrolyte characterized by its ionic strength.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Electrolyte {
    /// Ionic strength [M].
    pub ionic_strength_molar: f64,
}

impl Electrolyte {
    pub fn new(ionic_strength_molar: f64) -> Result<Self, ParamError> {
        require_positive("ionic strength", ionic_strength_molar)?;
        Ok(Self {
            ionic_strength_molar,
        })
    }

    /// Debye screening length [nm].
    pub fn debye_length_nm(&self) -> f64 {
        debye_length_nm(self.ionic_strength_molar).expect("validated at construction")
    }
}

/// Debye screening length `0.3/√ρ_ion` of a 1:1 aqueous electrolyte [nm].
pub fn debye_length_nm(ionic_strength_molar: f64) -> Result<f64, ParamError> {
    let rho = require_positive("ionic strength", ionic_strength_molar)?;
    Ok(DEBYE_PREFACTOR_NM_SQRT_M / rho.sqrt())
}

/// Electrical description of the graphene bioFET gate stack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReceiverElectro {
    /// Graphene sensing area [µm²].
    pub graphene_area_um2: f64,
    /// Reference (gate) electrode wetted area [µm²], if its double layer is
    /// to be included in the series stack. `None` neglects it, the usual
    /// choice when the electrode dwarfs the sensing area.
    pub gate_electrode_area_um2: Option<f64>,
    /// Relative permittivity of the electrolyte.
    pub relative_permittivity: f64,
    /// Graphene quantum capacitance per area [µF/cm²].
    pub quantum_capacitance_uf_per_cm2: f64,
    /// Transconductance at the operating point [µA/V], signed: its sign sets
    /// the sign of the current response to captured charge.
    pub transconductance_ua_per_v: f64,
}

impl ReceiverElectro {
    pub fn new(
        graphene_area_um2: f64,
        gate_electrode_area_um2: Option<f64>,
        relative_permittivity: f64,
        quantum_capacitance_uf_per_cm2: f64,
        transconductance_ua_per_v: f64,
    ) -> Result<Self, ParamError> {
        require_positive("graphene area", graphene_area_um2)?;
        if let Some(a) = gate_electrode_area_um2 {
            require_positive("gate electrode area", a)?;
        }
        require_positive("relative permittivity", relative_permittivity)?;
        require_positive("quantum capacitance", quantum_capacitance_uf_per_cm2)?;
        if !(transconductance_ua_per_v.is_finite() && transconductance_ua_per_v != 0.0) {
            return Err(ParamError::NotPositive {
                name: "transconductance magnitude",
                value: transconductance_ua_per_v,
            });
        }
        Ok(Self {
            graphene_area_um2,
            gate_electrode_area_um2,
            relative_permittivity,
            quantum_capacitance_uf_per_cm2,
            transconductance_ua_per_v,
        })
    }

    /// EDL capacitance of the graphene/electrolyte interface [nF].
    pub fn graphene_edl_capacitance_nf(&self, debye_length_nm: f64) -> Result<f64, ParamError> {
        edl_capacitance_nf(
            self.graphene_area_um2,
            self.relative_permittivity,
            debye_length_nm,
        )
    }

    /// Quantum capacitance of the graphene sheet [nF].
    pub fn quantum_capacitance_nf(&self) -> f64 {
        let c_areal = units::uf_per_cm2_to_f_per_m2(self.quantum_capacitance_uf_per_cm2);
        units::f_to_nf(c_areal * units::um2_to_m2(self.graphene_area_um2))
    }

    /// Series gate capacitance of the full stack at the given screening
    /// length [nF].
    pub fn gate_capacitance_nf(&self, debye_length_nm: f64) -> Result<f64, ParamError> {
        let c_gr = self.graphene_edl_capacitance_nf(debye_length_nm)?;
        let c_pt = match self.gate_electrode_area_um2 {
            Some(a) => Some(edl_capacitance_nf(
                a,
                self.relative_permittivity,
                debye_length_nm,
            )?),
            None => None,
        };
        gate_capacitance_nf(c_gr, self.quantum_capacitance_nf(), c_pt)
    }
}

/// Electric-double-layer capacitance `A·ε_r·ε₀/λ_D` [nF].
pub fn edl_capacitance_nf(
    area_um2: f64,
    relative_permittivity: f64,
    debye_length_nm: f64,
) -> Result<f64, ParamError> {
    let a = require_positive("area", area_um2)?;
    let eps_r = require_positive("relative permittivity", relative_permittivity)?;
    let lambda = require_positive("debye length", debye_length_nm)?;
    let c_f = units::um2_to_m2(a) * eps_r * VACUUM_PERMITTIVITY_F_PER_M / units::nm_to_m(lambda);
    Ok(units::f_to_nf(c_f))
}

/// Series combination `(1/C_Gr + 1/C_Pt + 1/C_Q)⁻¹` of the gate stack [nF].
///
/// `c_pt_nf = None` drops the reference-electrode term from the sum.
pub fn gate_capacitance_nf(
    c_graphene_nf: f64,
    c_quantum_nf: f64,
    c_pt_nf: Option<f64>,
) -> Result<f64, ParamError> {
    let c_gr = require_positive("graphene EDL capacitance", c_graphene_nf)?;
    let c_q = require_positive("quantum capacitance", c_quantum_nf)?;
    let mut reciprocal = 1.0 / c_gr + 1.0 / c_q;
    if let Some(c_pt) = c_pt_nf {
        reciprocal += 1.0 / require_positive("gate electrode capacitance", c_pt)?;
    }
    Ok(1.0 / reciprocal)
}

/// Single-stranded DNA probe described by its charge-bearing backbone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DnaProbe {
    /// Number of bases; each carries one elementary charge.
    pub bases: u32,
    /// Backbone rise per base [nm].
    pub base_rise_nm: f64,
    /// Fraction of the stretched length used as the effective charge
    /// distance from the surface (0.5 places it at the probe midpoint).
    pub length_fraction: f64,
}

impl DnaProbe {
    pub fn new(bases: u32, base_rise_nm: f64, length_fraction: f64) -> Result<Self, ParamError> {
        if bases == 0 {
            return Err(ParamError::NotPositive {
                name: "probe bases",
                value: 0.0,
            });
        }
        require_positive("base rise", base_rise_nm)?;
        require_positive("length fraction", length_fraction)?;
        Ok(Self {
            bases,
            base_rise_nm,
            length_fraction,
        })
    }

    /// Effective charge distance from the surface [nm].
    pub fn effective_distance_nm(&self) -> f64 {
        f64::from(self.bases) * self.base_rise_nm * self.length_fraction
    }
}

/// Screened effective charge `n·e·exp(−r/λ_D)` a bound molecule presents to
/// the gate [C]. Returned as a magnitude; signs are carried by the
/// transconductance downstream.
///
/// An infinite screening length is allowed and yields the unscreened charge.
pub fn effective_charge_c(probe: &DnaProbe, debye_length_nm: f64) -> Result<f64, ParamError> {
    if !(debye_length_nm > 0.0) || debye_length_nm.is_nan() {
        return Err(ParamError::NotPositive {
            name: "debye length",
            value: debye_length_nm,
        });
    }
    let screening = (-probe.effective_distance_nm() / debye_length_nm).exp();
    Ok(f64::from(probe.bases) * ELEMENTARY_CHARGE_C * screening)
}

/// Probe surface density `ΔV·C_G/(q·A)` inferred from a charge-neutrality
/// point shift [1/µm²].
///
/// This is a device-level estimate: it assumes every immobilized probe
/// couples its full screened charge into the gate potential, so it is
/// sensitive to the capacitance and screening inputs and should be read as
/// order-of-magnitude. Reported densities for nominally identical surfaces
/// scatter accordingly.
pub fn probe_density_per_um2(
    cnp_shift_mv: f64,
    gate_capacitance_nf: f64,
    effective_charge_c: f64,
    area_um2: f64,
) -> Result<f64, ParamError> {
    let dv = require_non_negative("CNP shift", cnp_shift_mv)?;
    let c_g = require_positive("gate capacitance", gate_capacitance_nf)?;
    let q = require_positive("effective charge", effective_charge_c)?;
    let a = require_positive("area", area_um2)?;
    let per_m2 =
        units::mv_to_v(dv) * units::nf_to_f(c_g) / (q * units::um2_to_m2(a));
    Ok(units::per_m2_to_per_um2(per_m2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Reference device: 4 mm × 1.5 mm duct, water at 80 µl/min.
    fn reference_channel() -> FluidicChannel {
        FluidicChannel::new(4000.0, 1500.0, 1000.0, 1.002e-3, 80.0).unwrap()
    }

    fn reference_receiver() -> ReceiverElectro {
        ReceiverElectro::new(4.0e3, Some(7.85e6), 80.0, 2.0, -28.0).unwrap()
    }

    #[test]
    fn hydraulic_diameter_of_reference_duct() {
        let d = hydraulic_diameter_um(4000.0, 1500.0).unwrap();
        assert!((d - 2181.8182).abs() <= 0.1, "{d}");
    }

    #[test]
    fn hydraulic_diameter_square_duct_is_side() {
        assert_eq!(hydraulic_diameter_um(1500.0, 1500.0).unwrap(), 1500.0);
    }

    #[test]
    fn hydraulic_diameter_slit_limit_is_twice_height() {
        // w/h = 1e4: D_H -> 2h within h/(w+h) ≈ 0.01%.
        let h = 10.0;
        let d = hydraulic_diameter_um(1e5, h).unwrap();
        assert!((d - 2.0 * h).abs() / (2.0 * h) <= 1e-3);
    }

    #[test]
    fn hydraulic_diameter_rejects_nonpositive() {
        assert!(hydraulic_diameter_um(0.0, 10.0).is_err());
        assert!(hydraulic_diameter_um(10.0, -1.0).is_err());
    }

    #[test]
    fn linear_velocity_of_reference_flow() {
        let u = linear_velocity_um_per_s(80.0, 4000.0, 1500.0).unwrap();
        assert!((u - 222.2).abs() <= 0.5, "{u}");
    }

    #[test]
    fn linear_velocity_zero_flow_and_doubling() {
        assert_eq!(linear_velocity_um_per_s(0.0, 4000.0, 1500.0).unwrap(), 0.0);
        let u1 = linear_velocity_um_per_s(80.0, 4000.0, 1500.0).unwrap();
        let u2 = linear_velocity_um_per_s(160.0, 4000.0, 1500.0).unwrap();
        assert_eq!(u2, 2.0 * u1);
    }

    #[test]
    fn reynolds_number_of_reference_point_is_laminar() {
        let re = reference_channel().reynolds_number();
        assert!((re - 0.4839).abs() <= 1e-3, "{re}");
        assert!(re < 2000.0);
    }

    #[test]
    fn reynolds_number_zero_flow_is_zero() {
        let ch = FluidicChannel::new(4000.0, 1500.0, 1000.0, 1.002e-3, 0.0).unwrap();
        assert_eq!(ch.reynolds_number(), 0.0);
    }

    #[test]
    fn reynolds_number_halved_viscosity_doubles() {
        let mut thin = reference_channel();
        thin.viscosity_pa_s /= 2.0;
        assert_eq!(thin.reynolds_number(), 2.0 * reference_channel().reynolds_number());
    }

    #[test]
    fn debye_length_of_reference_buffers() {
        // Functionalization buffer (~150 mM) and 100x-diluted measurement
        // buffer (~1.5 mM).
        let l1 = debye_length_nm(0.150).unwrap();
        let l2 = debye_length_nm(0.0015).unwrap();
        assert!((l1 - 0.7746).abs() <= 5e-4, "{l1}");
        assert!((l2 - 7.746).abs() <= 5e-3, "{l2}");
    }

    #[test]
    fn debye_length_round_value() {
        let l = debye_length_nm(0.09).unwrap();
        assert!((l - 1.0).abs() <= 1e-12, "{l}");
    }

    #[test]
    fn debye_length_quadrupled_strength_halves() {
        let l = debye_length_nm(0.02).unwrap();
        assert_eq!(debye_length_nm(0.08).unwrap(), l / 2.0);
    }

    #[test]
    fn debye_length_rejects_nonpositive() {
        assert!(debye_length_nm(0.0).is_err());
        assert!(debye_length_nm(-0.1).is_err());
    }

    #[test]
    fn edl_capacitance_reference_values() {
        // Graphene sensing pad at the two screening lengths.
        let tight = edl_capacitance_nf(4.0e3, 80.0, 0.77).unwrap();
        let loose = edl_capacitance_nf(4.0e3, 80.0, 7.75).unwrap();
        assert!((tight - 3.68).abs() <= 0.01, "{tight}");
        assert!((loose - 0.3657).abs() <= 5e-4, "{loose}");
    }

    #[test]
    fn edl_capacitance_halved_screening_doubles() {
        let c = edl_capacitance_nf(4.0e3, 80.0, 1.0).unwrap();
        assert_eq!(edl_capacitance_nf(4.0e3, 80.0, 0.5).unwrap(), 2.0 * c);
    }

    #[test]
    fn gate_capacitance_reference_stack() {
        // Quantum capacitance dominates the series stack: 2 µF/cm² over
        // 4e3 µm² is 0.08 nF against a few-nF double layer.
        let c_q = reference_receiver().quantum_capacitance_nf();
        assert!((c_q - 0.08).abs() <= 1e-12, "{c_q}");
        let tight = gate_capacitance_nf(3.68, 0.08, None).unwrap();
        let loose = gate_capacitance_nf(0.3657, 0.08, None).unwrap();
        assert!((tight - 7.83e-2).abs() / 7.83e-2 <= 0.01, "{tight}");
        assert!((loose - 6.56e-2).abs() / 6.56e-2 <= 0.005, "{loose}");
    }

    #[test]
    fn gate_capacitance_equal_caps_is_a_third() {
        let c = gate_capacitance_nf(0.9, 0.9, Some(0.9)).unwrap();
        assert!((c - 0.3).abs() <= 1e-14);
    }

    #[test]
    fn gate_capacitance_rejects_zero() {
        assert!(gate_capacitance_nf(0.0, 0.08, None).is_err());
        assert!(gate_capacitance_nf(3.68, 0.0, None).is_err());
        assert!(gate_capacitance_nf(3.68, 0.08, Some(0.0)).is_err());
    }

    #[test]
    fn receiver_gate_capacitance_composes_stack() {
        // Including the huge reference electrode barely moves the result.
        let r = reference_receiver();
        let with_pt = r.gate_capacitance_nf(0.77).unwrap();
        let mut no_pt = r.clone();
        no_pt.gate_electrode_area_um2 = None;
        let without = no_pt.gate_capacitance_nf(0.77).unwrap();
        assert!((with_pt - without).abs() / without < 2e-5);
    }

    fn probe_18mer() -> DnaProbe {
        DnaProbe::new(18, 0.34, 0.5).unwrap()
    }

    #[test]
    fn effective_charge_reference_values() {
        let p = probe_18mer();
        assert!((p.effective_distance_nm() - 3.06).abs() <= 1e-12);
        let tight = effective_charge_c(&p, 0.77).unwrap();
        let loose = effective_charge_c(&p, 7.75).unwrap();
        assert!((tight - 5.42e-20).abs() <= 1e-22, "{tight:e}");
        assert!((loose - 1.943e-18).abs() <= 1e-21, "{loose:e}");
    }

    #[test]
    fn effective_charge_unscreened_limit() {
        let p = probe_18mer();
        let q = effective_charge_c(&p, f64::INFINITY).unwrap();
        assert_eq!(q, 18.0 * ELEMENTARY_CHARGE_C);
    }

    #[test]
    fn probe_density_reference_estimate() {
        // The formula route lands near 2.4e4 µm⁻² for these inputs; treat as
        // order-of-magnitude (see the function docs).
        let n = probe_density_per_um2(66.0, 7.83e-2, 5.42e-20, 4.0e3).unwrap();
        assert!((n - 2.38e4).abs() / 2.38e4 <= 0.01, "{n}");
    }

    #[test]
    fn probe_density_zero_shift_and_linearity() {
        assert_eq!(probe_density_per_um2(0.0, 7.83e-2, 5.42e-20, 4.0e3).unwrap(), 0.0);
        let n1 = probe_density_per_um2(33.0, 7.83e-2, 5.42e-20, 4.0e3).unwrap();
        let n2 = probe_density_per_um2(66.0, 7.83e-2, 5.42e-20, 4.0e3).unwrap();
        assert_eq!(n2, 2.0 * n1);
    }

    proptest! {
        #[test]
        fn series_capacitance_below_smallest_element(
            a in 1e-3..1e3f64, b in 1e-3..1e3f64, c in 1e-3..1e3f64
        ) {
            let s = gate_capacitance_nf(a, b, Some(c)).unwrap();
            prop_assert!(s <= a.min(b).min(c));
        }

        #[test]
        fn hydraulic_diameter_between_means(w in 1.0..1e5f64, h in 1.0..1e5f64) {
            // 2wh/(w+h) is the harmonic mean of (2w, 2h): bounded by the
            // smaller duct dimension scaled into [min, 2·min].
            let d = hydraulic_diameter_um(w, h).unwrap();
            let lo = w.min(h);
            prop_assert!(d >= lo * (1.0 - 1e-12));
            prop_assert!(d <= 2.0 * lo * (1.0 + 1e-12));
        }

        #[test]
        fn effective_charge_decreases_with_distance(
            bases in 1u32..60, lambda in 0.1..50.0f64
        ) {
            let near = DnaProbe::new(bases, 0.34, 0.25).unwrap();
            let far = DnaProbe::new(bases, 0.34, 0.75).unwrap();
            prop_assert!(
                effective_charge_c(&far, lambda).unwrap()
                    < effective_charge_c(&near, lambda).unwrap()
            );
        }

        #[test]
        fn effective_charge_increases_with_screening_length(
            l1 in 0.1..10.0f64, extra in 0.1..10.0f64
        ) {
            let p = probe_18mer();
            prop_assert!(
                effective_charge_c(&p, l1 + extra).unwrap()
                    > effective_charge_c(&p, l1).unwrap()
            );
        }
    }
}
