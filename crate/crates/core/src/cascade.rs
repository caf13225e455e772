//! Time-resolved two-photon state of the XX-X cascade, the mixed density
//! matrix, polarization-resolved cross-correlation curves with IRF
//! convolution, and both entanglement-fidelity measures.

use num_complex::Complex64 as C64;

use crate::constants::{fss_omega_per_ps, fss_phase_rad, FWHM_PER_SIGMA};
use crate::quantum::{
    basis_state, projector, rotate_operator, tensor, BasisLabel, Mat4, TwoQubitDensityMatrix,
    TwoQubitPureState,
};
use crate::{Error, Result};

/// Physical parameters of the XX-X cascade and its correlation curves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CascadeParams {
    /// Pure-state fraction of the two-photon polarization matrix, in [0, 1].
    pub alpha: f64,
    /// Fine structure splitting S, ueV.
    pub fss_uev: f64,
    /// Exciton lifetime, ps.
    pub tau_x_ps: f64,
    /// Angle between QD symmetry axes and the lab analyzers, rad
    /// (rotates lab axes into the QD frame).
    pub theta_rad: f64,
    /// Bunching amplitude of the correlation peak, >= 0.
    pub peak_amp: f64,
    /// Depth of the recapture dip, in [0, 1].
    pub dip_depth: f64,
    /// Recovery time of the negative-delay branch, ps.
    pub tau_neg_ps: f64,
}

impl CascadeParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::invalid(format!("alpha = {} not in [0, 1]", self.alpha)));
        }
        if !(self.tau_x_ps > 0.0) {
            return Err(Error::invalid("tau_x must be positive"));
        }
        if !(self.tau_neg_ps > 0.0) {
            return Err(Error::invalid("tau_neg must be positive"));
        }
        if !(0.0..=1.0).contains(&self.dip_depth) {
            return Err(Error::invalid(format!(
                "dip_depth = {} not in [0, 1]",
                self.dip_depth
            )));
        }
        if !(self.peak_amp >= 0.0) {
            return Err(Error::invalid("peak_amp must be >= 0"));
        }
        if !self.fss_uev.is_finite() || !self.theta_rad.is_finite() {
            return Err(Error::invalid("fss and theta must be finite"));
        }
        Ok(())
    }
}

/// Combined two-detector Gaussian timing response; `sigma_ps = 0` disables
/// convolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairIrf {
    pub sigma_ps: f64,
}

impl PairIrf {
    pub fn from_fwhm(fwhm_ps: f64) -> Self {
        PairIrf {
            sigma_ps: fwhm_ps / FWHM_PER_SIGMA,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_ps >= 0.0) {
            return Err(Error::invalid("IRF sigma must be >= 0"));
        }
        Ok(())
    }
}

pub(crate) fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Grid("empty grid".into()));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Grid("grid must be strictly increasing".into()));
    }
    Ok(())
}

/// The two-photon state (|HH> + e^{-i S t / hbar} |VV>)/sqrt(2) in the QD
/// frame, with the phase accumulated over the exciton dwell time `t_ps`.
pub fn pure_state_at(t_ps: f64, fss_uev: f64) -> Result<TwoQubitPureState> {
    if t_ps < 0.0 {
        return Err(Error::invalid(format!("dwell time {t_ps} ps must be >= 0")));
    }
    let phi = fss_phase_rad(fss_uev, t_ps);
    let s2 = std::f64::consts::FRAC_1_SQRT_2;
    let z = C64::new(0.0, 0.0);
    Ok(TwoQubitPureState {
        amps: [
            C64::new(s2, 0.0),
            z,
            z,
            C64::from_polar(s2, -phi),
        ],
    })
}

/// alpha |Psi(t)><Psi(t)| + (1-alpha) rho_class, in the QD frame.
pub fn mixed_rho(t_ps: f64, p: &CascadeParams) -> Result<TwoQubitDensityMatrix> {
    p.validate()?;
    let pure = pure_state_at(t_ps, p.fss_uev)?.density();
    let classical = TwoQubitDensityMatrix::classical();
    Ok(TwoQubitDensityMatrix {
        entries: pure
            .entries
            .scale(p.alpha)
            .add(&classical.entries.scale(1.0 - p.alpha)),
    })
}

/// Analyzer pair operator in the QD frame: lab analyzers rotated by -theta.
fn analyzer_operator(p: &CascadeParams, mu: BasisLabel, nu: BasisLabel) -> Mat4 {
    let pm = rotate_operator(&projector(&basis_state(mu)).expect("basis state is unit norm"), -p.theta_rad);
    let pn = rotate_operator(&projector(&basis_state(nu)).expect("basis state is unit norm"), -p.theta_rad);
    tensor(&pm, &pn)
}

/// Probability of the XX photon passing analyzer `mu` and the X photon
/// passing `nu` at exciton dwell time `t_ps`, Tr[rho(t) P_mu x P_nu].
pub fn joint_prob(t_ps: f64, p: &CascadeParams, mu: BasisLabel, nu: BasisLabel) -> Result<f64> {
    let rho = mixed_rho(t_ps, p)?;
    let m = analyzer_operator(p, mu, nu);
    let val = rho.entries.mul(&m).trace();
    debug_assert!(val.im.abs() < 1e-12);
    Ok(val.re)
}

/// Joint probability reduced to `u + v cos(w t) + w sin(w t)`.
///
/// The time dependence of `mixed_rho` lives entirely in the HH-VV coherence,
/// so the trace against a fixed analyzer operator collapses to three
/// constants. Curve evaluation and Monte Carlo sampling use this; the
/// full-trace route in [`joint_prob`] stays as the reference.
#[derive(Debug, Clone, Copy)]
pub(crate) struct JointProbCoeffs {
    constant: f64,
    cos_amp: f64,
    sin_amp: f64,
    omega_per_ps: f64,
}

impl JointProbCoeffs {
    pub(crate) fn new(p: &CascadeParams, mu: BasisLabel, nu: BasisLabel) -> Self {
        let m = analyzer_operator(p, mu, nu);
        // <Psi(t)|M|Psi(t)> = (M00 + M33)/2 + Re(M30 e^{i phi}),
        // Tr[rho_class M] = (M00 + M33)/2
        let base = 0.5 * (m.0[0][0].re + m.0[3][3].re);
        JointProbCoeffs {
            constant: base,
            cos_amp: p.alpha * m.0[3][0].re,
            sin_amp: -p.alpha * m.0[3][0].im,
            omega_per_ps: fss_omega_per_ps(p.fss_uev),
        }
    }

    pub(crate) fn eval(&self, t_ps: f64) -> f64 {
        let phi = self.omega_per_ps * t_ps;
        self.constant + self.cos_amp * phi.cos() + self.sin_amp * phi.sin()
    }
}

fn unconvolved_minus_one(p: &CascadeParams, coeffs: &JointProbCoeffs, tau: f64) -> f64 {
    if tau >= 0.0 {
        (-tau / p.tau_x_ps).exp() * (p.peak_amp * 2.0 * coeffs.eval(tau) - p.dip_depth)
    } else {
        -p.dip_depth * (tau / p.tau_neg_ps).exp()
    }
}

// 4-point Gauss-Legendre rule on [-1, 1].
const GL_NODES: [f64; 4] = [
    -0.8611363115940526,
    -0.3399810435848563,
    0.3399810435848563,
    0.8611363115940526,
];
const GL_WEIGHTS: [f64; 4] = [
    0.34785484513745385,
    0.6521451548625461,
    0.6521451548625461,
    0.34785484513745385,
];

fn gl_integral(p: &CascadeParams, coeffs: &JointProbCoeffs, lo: f64, hi: f64) -> f64 {
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    GL_NODES
        .iter()
        .zip(GL_WEIGHTS.iter())
        .map(|(&x, &w)| w * unconvolved_minus_one(p, coeffs, mid + half * x))
        .sum::<f64>()
        * half
}

/// Mean of `g - 1` over the cell [lo, hi]; the model jumps at zero, so a
/// straddling cell integrates each branch separately.
fn cell_average(p: &CascadeParams, coeffs: &JointProbCoeffs, lo: f64, hi: f64) -> f64 {
    let integral = if lo < 0.0 && hi > 0.0 {
        gl_integral(p, coeffs, lo, 0.0) + gl_integral(p, coeffs, 0.0, hi)
    } else {
        gl_integral(p, coeffs, lo, hi)
    };
    integral / (hi - lo)
}

/// Polarization-resolved cross-correlation curve on `grid` (ps, strictly
/// increasing), IRF-convolved. Positive delay means the X photon arrives
/// after the XX photon:
///
/// ```text
/// tau >= 0:  g = 1 + e^{-tau/tau_x} (peak_amp * 2 * joint_prob(tau) - dip_depth)
/// tau <  0:  g = 1 - dip_depth * e^{tau/tau_neg}
/// ```
///
/// The factor `2 * joint_prob` maps ideal co-polarized detection to 1,
/// cross-polarized to 0 and uncorrelated to 1/2.
pub fn cross_correlation_curve(
    p: &CascadeParams,
    irf: &PairIrf,
    mu: BasisLabel,
    nu: BasisLabel,
    grid: &[f64],
) -> Result<Vec<f64>> {
    p.validate()?;
    irf.validate()?;
    check_grid(grid)?;
    let coeffs = JointProbCoeffs::new(p, mu, nu);

    if irf.sigma_ps == 0.0 {
        return Ok(grid
            .iter()
            .map(|&t| 1.0 + unconvolved_minus_one(p, &coeffs, t))
            .collect());
    }

    let sigma = irf.sigma_ps;
    // resolve the IRF, the exponential decays and the FSS beat
    let mut h = (sigma / 5.0).min(p.tau_x_ps / 20.0).min(p.tau_neg_ps / 20.0);
    if p.fss_uev != 0.0 {
        let period = 2.0 * std::f64::consts::PI / fss_omega_per_ps(p.fss_uev).abs();
        h = h.min(period / 20.0);
    }

    let half_kernel = (6.0 * sigma / h).ceil() as usize;
    let mut kernel: Vec<f64> = (0..=2 * half_kernel)
        .map(|k| {
            let x = (k as f64 - half_kernel as f64) * h;
            (-x * x / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let norm: f64 = kernel.iter().sum::<f64>() * h;
    for w in kernel.iter_mut() {
        *w /= norm;
    }

    // internal nodes are integer multiples of h, so values do not depend on
    // the requested grid, and the model is resolved as exact cell averages:
    // the discrete convolution then conserves the model integral exactly
    let i_lo = ((grid[0] - 6.0 * sigma) / h).floor() as i64 - 1;
    let i_hi = ((grid[grid.len() - 1] + 6.0 * sigma) / h).ceil() as i64 + 1;
    let n_model = (i_hi - i_lo + 1) as usize;
    let model: Vec<f64> = (0..n_model)
        .map(|i| {
            let x = (i_lo + i as i64) as f64 * h;
            cell_average(p, &coeffs, x - 0.5 * h, x + 0.5 * h)
        })
        .collect();

    let n_out = n_model - 2 * half_kernel;
    let internal: Vec<f64> = (0..n_out)
        .map(|j| {
            let mut acc = 0.0;
            for (k, w) in kernel.iter().enumerate() {
                acc += w * model[j + k];
            }
            1.0 + acc * h
        })
        .collect();

    // linear interpolation back onto the requested grid
    let x0 = (i_lo + half_kernel as i64) as f64 * h;
    Ok(grid
        .iter()
        .map(|&t| {
            let pos = (t - x0) / h;
            let i = (pos.floor().max(0.0) as usize).min(n_out - 2);
            let frac = pos - i as f64;
            internal[i] * (1.0 - frac) + internal[i + 1] * frac
        })
        .collect())
}

/// Fidelity to the deterministically phase-evolving Bell state,
/// `<Psi(t)|rho(t)|Psi(t)> = (1 + alpha)/2`, independent of time.
pub fn fidelity_phase_tracked(alpha: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid(format!("alpha = {alpha} not in [0, 1]")));
    }
    Ok((1.0 + alpha) / 2.0)
}

/// Fidelity to the fixed Bell state Phi+, averaged over the exponential
/// exciton dwell-time distribution:
///
/// ```text
/// (1-alpha)/2 + (alpha/2) (1 + 1/(1 + (S tau_x / hbar)^2))
/// ```
pub fn fidelity_time_averaged(alpha: f64, fss_uev: f64, tau_x_ps: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid(format!("alpha = {alpha} not in [0, 1]")));
    }
    if !(tau_x_ps > 0.0) {
        return Err(Error::invalid("tau_x must be positive"));
    }
    let x = fss_phase_rad(fss_uev, tau_x_ps);
    Ok((1.0 - alpha) / 2.0 + 0.5 * alpha * (1.0 + 1.0 / (1.0 + x * x)))
}
