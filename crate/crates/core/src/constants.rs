//! CODATA 2018 physical constants (SI). The first four are exact by definition
//! of the SI since 2019.

/// Elementary charge, C.
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Planck constant, J s.
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380_649e-23;
/// Vacuum permittivity, F/m.
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;
/// Magnetic flux quantum h/2e, Wb.
pub const FLUX_QUANTUM: f64 = PLANCK / (2.0 * ELEMENTARY_CHARGE);

/// Name, value and unit of every constant, for auditing.
pub fn table() -> [(&'static str, f64, &'static str); 5] {
    [
        ("elementary_charge", ELEMENTARY_CHARGE, "C"),
        ("planck", PLANCK, "J s"),
        ("boltzmann", BOLTZMANN, "J/K"),
        ("vacuum_permittivity", VACUUM_PERMITTIVITY, "F/m"),
        ("flux_quantum", FLUX_QUANTUM, "Wb"),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flux_quantum_value() {
        assert!((FLUX_QUANTUM - 2.067_833_848e-15).abs() < 1e-23);
    }
}
