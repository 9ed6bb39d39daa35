//! Physical constants (SI).

/// Speed of light in vacuum (m/s).
pub const C0: f64 = 2.997_924_58e8;
/// Vacuum permeability (H/m).
pub const MU0: f64 = 1.256_637_062_12e-6;
/// Vacuum permittivity (F/m), derived so that `EPS0 * MU0 * C0^2 == 1`.
pub const EPS0: f64 = 1.0 / (MU0 * C0 * C0);
/// Impedance of free space (ohm).
pub const ETA0: f64 = MU0 * C0;

/// Nanometres to metres.
pub const NM: f64 = 1e-9;

/// Angular frequency (rad/s) of a vacuum wavelength given in nanometres.
pub fn omega_from_nm(lambda_nm: f64) -> f64 {
    2.0 * std::f64::consts::PI * C0 / (lambda_nm * NM)
}

/// Vacuum wavelength in nanometres of an angular frequency (rad/s).
pub fn nm_from_omega(omega: f64) -> f64 {
    2.0 * std::f64::consts::PI * C0 / omega / NM
}
