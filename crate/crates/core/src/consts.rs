//! Physical constants (SI), CODATA 2018 / exact 2019-SI values.

/// Vacuum permittivity ε₀ [F/m].
pub const VACUUM_PERMITTIVITY_F_PER_M: f64 = 8.854_187_812_8e-12;

/// Elementary charge e [C]. Exact by definition since the 2019 SI.
pub const ELEMENTARY_CHARGE_C: f64 = 1.602_176_634e-19;

/// Avogadro constant N_A [1/mol]. Exact by definition since the 2019 SI.
pub const AVOGADRO_PER_MOL: f64 = 6.022_140_76e23;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_are_pinned() {
        // Downstream capacitance and charge figures are frozen against these
        // exact literals; a silent constant change must fail loudly.
        assert_eq!(VACUUM_PERMITTIVITY_F_PER_M, 8.8541878128e-12);
        assert_eq!(ELEMENTARY_CHARGE_C, 1.602176634e-19);
        assert_eq!(AVOGADRO_PER_MOL, 6.02214076e23);
    }
}
