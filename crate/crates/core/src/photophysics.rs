//! Scalar photophysics models: Arrhenius intensity quenching, phonon-activated
//! linewidth broadening, Gaussian-lineshape interference visibility, and the
//! confinement wavelength-vs-thickness relation, plus ensemble statistics.

use crate::constants::{HC_EV_NM, KB_MEV_PER_K};
use crate::{Error, Result};

/// Parameters of the thermally activated intensity model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrheniusParams {
    /// Intensity at T -> 0, arbitrary units, > 0.
    pub i0: f64,
    /// Coupling constant A, dimensionless, >= 0.
    pub a_coupling: f64,
    /// Activation energy for non-radiative decay, meV, > 0.
    pub e_act_mev: f64,
}

impl ArrheniusParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.i0 > 0.0) || !(self.a_coupling >= 0.0) || !(self.e_act_mev > 0.0) {
            return Err(Error::invalid(format!("bad Arrhenius parameters: {self:?}")));
        }
        Ok(())
    }
}

/// Parameters of the temperature-dependent linewidth model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinewidthParams {
    /// Zero-temperature linewidth, ueV.
    pub gamma0_uev: f64,
    /// Acoustic-phonon coefficient, ueV/K.
    pub gamma_ac_uev_per_k: f64,
    /// Optical-phonon amplitude, ueV.
    pub a_opt_uev: f64,
    /// Phonon energy, meV.
    pub e_ph_mev: f64,
}

impl LinewidthParams {
    pub fn validate(&self) -> Result<()> {
        if self.gamma0_uev < 0.0
            || self.gamma_ac_uev_per_k < 0.0
            || self.a_opt_uev < 0.0
            || self.e_ph_mev < 0.0
        {
            return Err(Error::invalid(format!("bad linewidth parameters: {self:?}")));
        }
        Ok(())
    }
}

/// Parameters of the confinement wavelength relation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfinementParams {
    /// Emission energy at infinite infill thickness, eV.
    pub e_offset_ev: f64,
    /// Coefficient of the 1/d^2 confinement term, eV nm^2 (absorbs the
    /// effective mass).
    pub c_conf_ev_nm2: f64,
}

impl ConfinementParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c_conf_ev_nm2 > 0.0) {
            return Err(Error::invalid(format!("bad confinement parameters: {self:?}")));
        }
        Ok(())
    }
}

/// I(T) = I0 / (1 + A exp(-E / kB T)); T in K, > 0.
pub fn arrhenius_intensity(t_kelvin: f64, p: &ArrheniusParams) -> Result<f64> {
    p.validate()?;
    if !(t_kelvin > 0.0) {
        return Err(Error::invalid(format!("temperature {t_kelvin} K must be > 0")));
    }
    Ok(p.i0 / (1.0 + p.a_coupling * (-p.e_act_mev / (KB_MEV_PER_K * t_kelvin)).exp()))
}

/// gamma(T) = gamma0 + gamma_ac T + a / (exp(E / kB T) - 1); T in K, >= 0.
/// The Bose term is 0 at T = 0 by continuity.
pub fn linewidth(t_kelvin: f64, p: &LinewidthParams) -> Result<f64> {
    p.validate()?;
    if t_kelvin < 0.0 {
        return Err(Error::invalid(format!("temperature {t_kelvin} K must be >= 0")));
    }
    let bose = if t_kelvin == 0.0 || p.a_opt_uev == 0.0 {
        0.0
    } else {
        p.a_opt_uev / ((p.e_ph_mev / (KB_MEV_PER_K * t_kelvin)).exp() - 1.0)
    };
    Ok(p.gamma0_uev + p.gamma_ac_uev_per_k * t_kelvin + bose)
}

/// Michelson interference visibility of a Gaussian-broadened line,
/// exp(-(delay/T2)^2); T2 is the 1/e delay of the visibility.
pub fn visibility(delay_ps: f64, t2_ps: f64) -> f64 {
    let x = delay_ps / t2_ps;
    (-x * x).exp()
}

/// lambda(d) = hc / (E_offset + C/d^2); d in nm, > 0.
pub fn emission_wavelength(d_nm: f64, p: &ConfinementParams) -> Result<f64> {
    p.validate()?;
    if !(d_nm > 0.0) {
        return Err(Error::invalid(format!("thickness {d_nm} nm must be > 0")));
    }
    Ok(HC_EV_NM / (p.e_offset_ev + p.c_conf_ev_nm2 / (d_nm * d_nm)))
}

/// Ensemble summary of a scalar sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleSummary {
    pub mean: f64,
    /// Bessel-corrected sample standard deviation.
    pub sample_std: f64,
    pub n: usize,
}

/// Arithmetic mean and Bessel-corrected standard deviation; needs n >= 2.
pub fn summarize_ensemble(values: &[f64]) -> Result<EnsembleSummary> {
    if values.len() < 2 {
        return Err(Error::invalid(format!(
            "ensemble summary needs at least 2 values, got {}",
            values.len()
        )));
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let ss = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    Ok(EnsembleSummary {
        mean,
        sample_std: (ss / (n - 1) as f64).sqrt(),
        n,
    })
}
