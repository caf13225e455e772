//! Physical constants (CODATA 2018) in the unit system used throughout:
//! times in ps, energies in eV/meV/ueV as noted per quantity.

/// Reduced Planck constant, eV·s.
pub const HBAR_EV_S: f64 = 6.582119569e-16;

/// Boltzmann constant, eV/K.
pub const KB_EV_PER_K: f64 = 8.617333262e-5;

/// Boltzmann constant, meV/K.
pub const KB_MEV_PER_K: f64 = 8.617333262e-2;

/// h·c in eV·nm, for photon energy <-> vacuum wavelength conversion.
pub const HC_EV_NM: f64 = 1239.841984;

/// FWHM of a Gaussian divided by its standard deviation, 2*sqrt(2 ln 2).
pub const FWHM_PER_SIGMA: f64 = 2.354820045030949;

/// Phase accumulated by the exciton spin precession: S[ueV] over t[ps].
pub fn fss_phase_rad(fss_uev: f64, t_ps: f64) -> f64 {
    fss_uev * 1e-6 * t_ps * 1e-12 / HBAR_EV_S
}

/// Angular frequency of the fine-structure precession in rad/ps.
pub fn fss_omega_per_ps(fss_uev: f64) -> f64 {
    fss_uev * 1e-6 * 1e-12 / HBAR_EV_S
}
