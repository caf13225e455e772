//! Concrete fitting problems built on the least-squares engine.

use crate::cascade::{
    cross_correlation_curve, fidelity_phase_tracked, fidelity_time_averaged, CascadeParams,
    PairIrf,
};
use crate::constants::fss_phase_rad;
use crate::fit::{least_squares, FitProblem, FitResult, ParamSpec};
use crate::hbt::{g2_curve_unchecked, HbtForm, HbtParams};
use crate::io::CoincidenceHistogram;
use crate::quantum::BasisLabel;
use crate::{Error, Result};

/// Fraction of the delay window (outermost bins on each side) used to set
/// the uncorrelated level.
pub const DEFAULT_WING_FRACTION: f64 = 0.2;

/// Normalizes raw coincidence counts by the mean of the wing bins (|delay|
/// beyond `1 - wing_fraction` of the window), placing the uncorrelated level
/// at 1. Returns (normalized values, weights, wing mean). Weights follow
/// Poisson counting statistics with a one-count floor.
pub fn normalize_histogram(
    hist: &CoincidenceHistogram,
    wing_fraction: f64,
) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    if hist.counts.is_empty() {
        return Err(Error::invalid("empty histogram"));
    }
    if !(wing_fraction > 0.0 && wing_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "wing fraction {wing_fraction} not in (0, 1)"
        )));
    }
    let threshold = (1.0 - wing_fraction) * hist.window_ps;
    let wing: Vec<u64> = hist
        .bin_centers
        .iter()
        .zip(hist.counts.iter())
        .filter(|(c, _)| c.abs() >= threshold)
        .map(|(_, &n)| n)
        .collect();
    if wing.is_empty() {
        return Err(Error::invalid("no wing bins at this wing fraction"));
    }
    let wing_mean = wing.iter().sum::<u64>() as f64 / wing.len() as f64;
    if wing_mean <= 0.0 {
        return Err(Error::invalid(
            "wing bins are all empty; cannot normalize",
        ));
    }
    let y: Vec<f64> = hist.counts.iter().map(|&n| n as f64 / wing_mean).collect();
    // var(counts) = counts, so var(y) = counts / wing_mean^2
    let weights: Vec<f64> = hist
        .counts
        .iter()
        .map(|&n| wing_mean * wing_mean / (n.max(1) as f64))
        .collect();
    Ok((y, weights, wing_mean))
}

/// Which autocorrelation parameters to hold at their initial values.
#[derive(Debug, Clone, Copy, Default)]
pub struct G2Fixed {
    pub g0: bool,
    pub tau1: bool,
    pub tau2: bool,
    pub beta: bool,
}

/// Fits {g0, tau1, tau2, beta, normalization} of the IRF-convolved
/// autocorrelation model to a coincidence histogram.
pub fn fit_g2(
    hist: &CoincidenceHistogram,
    form: HbtForm,
    irf: &PairIrf,
    init: &HbtParams,
    fixed: &G2Fixed,
) -> Result<FitResult> {
    init.validate()?;
    irf.validate()?;
    let (y, weights, _) = normalize_histogram(hist, DEFAULT_WING_FRACTION)?;
    let x = hist.bin_centers.clone();
    let sigma = irf.sigma_ps;

    let spec = |fixed: bool, free: ParamSpec, value: f64, name: &str| {
        if fixed {
            ParamSpec::fixed(name, value)
        } else {
            free
        }
    };
    let params = vec![
        spec(
            fixed.g0,
            // slightly negative g0 is allowed during the search so the
            // optimum can sit at 0 without hitting a transform wall
            ParamSpec::bounded("g0", init.g0.clamp(0.001, 4.9), -0.2, 5.0),
            init.g0,
            "g0",
        ),
        spec(
            fixed.tau1,
            ParamSpec::positive("tau1_ps", init.tau1_ps),
            init.tau1_ps,
            "tau1_ps",
        ),
        spec(
            fixed.tau2,
            ParamSpec::positive("tau2_ps", init.tau2_ps),
            init.tau2_ps,
            "tau2_ps",
        ),
        spec(
            fixed.beta,
            ParamSpec::bounded("beta", init.beta.clamp(0.02, 0.999), 0.01, 1.0),
            init.beta,
            "beta",
        ),
        ParamSpec::positive("norm", 1.0),
    ];

    let problem = FitProblem {
        model: Box::new(move |p, x| {
            let hp = HbtParams {
                g0: p[0],
                tau1_ps: p[1],
                tau2_ps: p[2],
                beta: p[3],
                form,
            };
            let curve = g2_curve_unchecked(&hp, &PairIrf { sigma_ps: sigma }, x)?;
            Ok(curve.into_iter().map(|g| p[4] * g).collect())
        }),
        x,
        y,
        weights,
        params,
    };
    least_squares(&problem)
}

/// The six labelled cross-correlation histograms of a cascade measurement.
#[derive(Debug, Clone)]
pub struct CascadeHistogramSet {
    pub vv: CoincidenceHistogram,
    pub vh: CoincidenceHistogram,
    pub dd: CoincidenceHistogram,
    pub da: CoincidenceHistogram,
    pub rr: CoincidenceHistogram,
    pub rl: CoincidenceHistogram,
}

impl CascadeHistogramSet {
    pub fn pairs(&self) -> [(BasisLabel, BasisLabel, &CoincidenceHistogram); 6] {
        [
            (BasisLabel::V, BasisLabel::V, &self.vv),
            (BasisLabel::V, BasisLabel::H, &self.vh),
            (BasisLabel::D, BasisLabel::D, &self.dd),
            (BasisLabel::D, BasisLabel::A, &self.da),
            (BasisLabel::R, BasisLabel::R, &self.rr),
            (BasisLabel::R, BasisLabel::L, &self.rl),
        ]
    }

    fn check_commensurate(&self) -> Result<()> {
        let first = &self.vv;
        for (_, _, h) in self.pairs() {
            if (h.bin_width_ps - first.bin_width_ps).abs() > 1e-9
                || (h.window_ps - first.window_ps).abs() > 1e-9
                || h.counts.len() != first.counts.len()
            {
                return Err(Error::invalid(
                    "cascade histograms must share bin width and window",
                ));
            }
        }
        Ok(())
    }
}

/// Options of the global cascade fit.
#[derive(Debug, Clone, Copy)]
pub struct CascadeFitOptions {
    /// Fit the fine structure splitting instead of freezing it at its
    /// externally measured value.
    pub fit_fss: bool,
    pub fix_theta: bool,
    pub fix_dip_depth: bool,
    pub fix_tau_neg: bool,
    pub wing_fraction: f64,
}

impl Default for CascadeFitOptions {
    fn default() -> Self {
        CascadeFitOptions {
            fit_fss: false,
            fix_theta: false,
            fix_dip_depth: false,
            fix_tau_neg: false,
            wing_fraction: DEFAULT_WING_FRACTION,
        }
    }
}

/// A derived quantity with its delta-method 1-sigma uncertainty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FidelityEstimate {
    pub value: f64,
    pub sigma: f64,
}

/// Both fidelity measures derived from a cascade fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FidelityEstimates {
    /// (1 + alpha)/2, fidelity to the phase-tracked Bell state.
    pub phase_tracked: FidelityEstimate,
    /// Dwell-time average of the fidelity to the fixed Bell state.
    pub time_averaged: FidelityEstimate,
}

fn delta_method(grad: &[f64], cov: &[Vec<f64>]) -> f64 {
    let mut var = 0.0;
    for (i, gi) in grad.iter().enumerate() {
        for (j, gj) in grad.iter().enumerate() {
            var += gi * gj * cov[i][j];
        }
    }
    var.max(0.0).sqrt()
}

/// Simultaneously fits all six polarization-resolved cross-correlation
/// histograms with shared cascade parameters and one normalization per
/// histogram, then derives both fidelity measures with uncertainties
/// propagated from the (alpha, S, tau_x) covariance.
pub fn fit_cascade_global(
    hists: &CascadeHistogramSet,
    irf: &PairIrf,
    init: &CascadeParams,
    options: &CascadeFitOptions,
) -> Result<(FitResult, FidelityEstimates)> {
    init.validate()?;
    irf.validate()?;
    hists.check_commensurate()?;

    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut weights = Vec::new();
    let mut segments = Vec::new(); // (mu, nu, start, end)
    for (mu, nu, hist) in hists.pairs() {
        let (yh, wh, _) = normalize_histogram(hist, options.wing_fraction)?;
        let start = x.len();
        x.extend_from_slice(&hist.bin_centers);
        y.extend(yh);
        weights.extend(wh);
        segments.push((mu, nu, start, x.len()));
    }

    let mut params = vec![
        ParamSpec::bounded("alpha", init.alpha.clamp(0.02, 0.98), 0.0, 1.0),
        if options.fit_fss {
            ParamSpec::free("fss_uev", init.fss_uev)
        } else {
            ParamSpec::fixed("fss_uev", init.fss_uev)
        },
        ParamSpec::positive("tau_x_ps", init.tau_x_ps),
        if options.fix_theta {
            ParamSpec::fixed("theta_rad", init.theta_rad)
        } else {
            ParamSpec::free("theta_rad", init.theta_rad)
        },
        ParamSpec::positive("peak_amp", init.peak_amp),
        if options.fix_dip_depth {
            ParamSpec::fixed("dip_depth", init.dip_depth)
        } else {
            ParamSpec::bounded("dip_depth", init.dip_depth.clamp(0.02, 0.98), 0.0, 1.0)
        },
        if options.fix_tau_neg {
            ParamSpec::fixed("tau_neg_ps", init.tau_neg_ps)
        } else {
            ParamSpec::positive("tau_neg_ps", init.tau_neg_ps)
        },
    ];
    for (mu, nu, _, _) in &segments {
        params.push(ParamSpec::positive(&format!("norm_{mu}{nu}"), 1.0));
    }

    let sigma = irf.sigma_ps;
    let model_segments = segments.clone();
    let problem = FitProblem {
        model: Box::new(move |p, x| {
            let cp = CascadeParams {
                alpha: p[0].clamp(0.0, 1.0),
                fss_uev: p[1],
                tau_x_ps: p[2],
                theta_rad: p[3],
                peak_amp: p[4],
                dip_depth: p[5].clamp(0.0, 1.0),
                tau_neg_ps: p[6],
            };
            let irf = PairIrf { sigma_ps: sigma };
            let mut out = Vec::with_capacity(x.len());
            for (k, (mu, nu, start, end)) in model_segments.iter().enumerate() {
                let curve = cross_correlation_curve(&cp, &irf, *mu, *nu, &x[*start..*end])?;
                let norm = p[7 + k];
                out.extend(curve.into_iter().map(|g| norm * g));
            }
            Ok(out)
        }),
        x,
        y,
        weights,
        params,
    };
    let fit = least_squares(&problem)?;

    let alpha = fit.param("alpha").unwrap();
    let fss = fit.param("fss_uev").unwrap();
    let tau_x = fit.param("tau_x_ps").unwrap();
    let cov = fit
        .covariance_block(&["alpha", "fss_uev", "tau_x_ps"])
        .unwrap();

    let phase_tracked = FidelityEstimate {
        value: fidelity_phase_tracked(alpha)?,
        sigma: delta_method(&[0.5, 0.0, 0.0], &cov),
    };
    // F_ta = (1-a)/2 + a/2 (1 + q), q = 1/(1 + phi^2), phi = S tau / hbar
    let phi = fss_phase_rad(fss, tau_x);
    let q = 1.0 / (1.0 + phi * phi);
    let dq_dphi = -2.0 * phi * q * q;
    let dphi_ds = if fss != 0.0 { phi / fss } else { 0.0 };
    let dphi_dtau = phi / tau_x;
    let grad = [
        0.5 * q,
        0.5 * alpha * dq_dphi * dphi_ds,
        0.5 * alpha * dq_dphi * dphi_dtau,
    ];
    let time_averaged = FidelityEstimate {
        value: fidelity_time_averaged(alpha, fss, tau_x)?,
        sigma: delta_method(&grad, &cov),
    };

    Ok((
        fit,
        FidelityEstimates {
            phase_tracked,
            time_averaged,
        },
    ))
}

/// Scalar photophysics model selector for [`fit_scalar_model`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalarModel {
    Arrhenius,
    Linewidth,
    Visibility,
    Confinement,
}

impl std::str::FromStr for ScalarModel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "arrhenius" => Ok(ScalarModel::Arrhenius),
            "linewidth" => Ok(ScalarModel::Linewidth),
            "visibility" => Ok(ScalarModel::Visibility),
            "confinement" => Ok(ScalarModel::Confinement),
            other => Err(Error::invalid(format!("unknown scalar model '{other}'"))),
        }
    }
}

impl ScalarModel {
    pub fn name(&self) -> &'static str {
        match self {
            ScalarModel::Arrhenius => "arrhenius",
            ScalarModel::Linewidth => "linewidth",
            ScalarModel::Visibility => "visibility",
            ScalarModel::Confinement => "confinement",
        }
    }

    pub fn parameter_names(&self) -> &'static [&'static str] {
        match self {
            ScalarModel::Arrhenius => &["i0", "a_coupling", "e_act_mev"],
            ScalarModel::Linewidth => &["gamma0_uev", "gamma_ac_uev_per_k", "a_opt_uev", "e_ph_mev"],
            ScalarModel::Visibility => &["t2_ps"],
            ScalarModel::Confinement => &["e_offset_ev", "c_conf_ev_nm2"],
        }
    }

    /// Evaluates the model over `x` for an external parameter vector.
    pub fn eval(&self, p: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        match self {
            ScalarModel::Arrhenius => {
                let params = crate::photophysics::ArrheniusParams {
                    i0: p[0],
                    a_coupling: p[1],
                    e_act_mev: p[2],
                };
                x.iter()
                    .map(|&t| crate::photophysics::arrhenius_intensity(t, &params))
                    .collect()
            }
            ScalarModel::Linewidth => {
                let params = crate::photophysics::LinewidthParams {
                    gamma0_uev: p[0],
                    gamma_ac_uev_per_k: p[1],
                    a_opt_uev: p[2],
                    e_ph_mev: p[3],
                };
                x.iter()
                    .map(|&t| crate::photophysics::linewidth(t, &params))
                    .collect()
            }
            ScalarModel::Visibility => Ok(x
                .iter()
                .map(|&d| crate::photophysics::visibility(d, p[0]))
                .collect()),
            ScalarModel::Confinement => {
                let params = crate::photophysics::ConfinementParams {
                    e_offset_ev: p[0],
                    c_conf_ev_nm2: p[1],
                };
                x.iter()
                    .map(|&d| crate::photophysics::emission_wavelength(d, &params))
                    .collect()
            }
        }
    }
}

/// Fits one of the scalar models with unit or user-supplied weights.
pub fn fit_scalar_model(
    model: ScalarModel,
    x: &[f64],
    y: &[f64],
    weights: Option<&[f64]>,
    init: &[f64],
) -> Result<FitResult> {
    let names = model.parameter_names();
    if init.len() != names.len() {
        return Err(Error::invalid(format!(
            "{} needs {} initial values, got {}",
            model.name(),
            names.len(),
            init.len()
        )));
    }
    if x.len() < names.len() + 1 {
        return Err(Error::invalid(format!(
            "underdetermined: {} points for {} parameters",
            x.len(),
            names.len()
        )));
    }
    let params: Vec<ParamSpec> = names
        .iter()
        .zip(init.iter())
        .map(|(name, &v)| ParamSpec::positive(name, v))
        .collect();
    let weights = match weights {
        Some(w) => w.to_vec(),
        None => vec![1.0; y.len()],
    };
    let problem = FitProblem {
        model: Box::new(move |p, x| model.eval(p, x)),
        x: x.to_vec(),
        y: y.to_vec(),
        weights,
        params,
    };
    least_squares(&problem)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn histogram_from_curve(
        centers: Vec<f64>,
        values: &[f64],
        scale: f64,
        window: f64,
        bin: f64,
    ) -> CoincidenceHistogram {
        let counts: Vec<u64> = values.iter().map(|v| (v * scale).round() as u64).collect();
        CoincidenceHistogram::new(centers, counts, bin, window, BTreeMap::new()).unwrap()
    }

    #[test]
    fn normalization_places_wings_at_one() {
        let window = 1000.0;
        let bin = 100.0;
        let centers: Vec<f64> = (0..20).map(|i| -window + (i as f64 + 0.5) * bin).collect();
        let mut counts = vec![200u64; 20];
        counts[10] = 800; // feature near zero delay
        let hist =
            CoincidenceHistogram::new(centers, counts, bin, window, BTreeMap::new()).unwrap();
        let (y, w, wing_mean) = normalize_histogram(&hist, 0.2).unwrap();
        assert_eq!(wing_mean, 200.0);
        assert!((y[0] - 1.0).abs() < 1e-12);
        assert!((y[10] - 4.0).abs() < 1e-12);
        // Poisson weights scale inversely with counts
        assert!(w[10] < w[0]);
    }

    #[test]
    fn g2_self_fit_recovers_exactly() {
        let truth = HbtParams {
            g0: 0.07,
            tau1_ps: 400.0,
            tau2_ps: 6000.0,
            beta: 0.8,
            form: HbtForm::Product,
        };
        let irf = PairIrf { sigma_ps: 210.0 };
        let window = 20000.0;
        let bin = 250.0;
        let centers: Vec<f64> = (0..160).map(|i| -window + (i as f64 + 0.5) * bin).collect();
        let curve = crate::hbt::g2_curve(&truth, &irf, &centers).unwrap();
        let hist = histogram_from_curve(centers, &curve, 100_000.0, window, bin);
        let fit = fit_g2(&hist, HbtForm::Product, &irf, &truth, &G2Fixed::default()).unwrap();
        assert!(fit.converged);
        assert!((fit.param("g0").unwrap() - 0.07).abs() < 1e-4, "{:?}", fit.parameters);
        assert!((fit.param("tau1_ps").unwrap() - 400.0).abs() / 400.0 < 1e-3);
    }

    #[test]
    fn scalar_self_fits() {
        // arrhenius
        let x: Vec<f64> = (1..=20).map(|k| 4.0 * k as f64).collect();
        let truth = [1.0, 100.0, 16.7];
        let y = ScalarModel::Arrhenius.eval(&truth, &x).unwrap();
        let fit = fit_scalar_model(ScalarModel::Arrhenius, &x, &y, None, &truth).unwrap();
        assert!(fit.converged && fit.chi2 < 1e-12);
        // visibility
        let d: Vec<f64> = (0..=20).map(|k| k as f64 * 10.0).collect();
        let v = ScalarModel::Visibility.eval(&[115.3], &d).unwrap();
        let fit = fit_scalar_model(ScalarModel::Visibility, &d, &v, None, &[80.0]).unwrap();
        assert!(fit.converged);
        assert!((fit.param("t2_ps").unwrap() - 115.3).abs() < 1e-6);
    }

    #[test]
    fn scalar_rejects_underdetermined() {
        let x = vec![1.0, 2.0, 3.0];
        let y = vec![1.0, 0.9, 0.8];
        assert!(fit_scalar_model(ScalarModel::Arrhenius, &x, &y, None, &[1.0, 10.0, 15.0]).is_err());
    }

    #[test]
    fn cascade_fit_rejects_inconsistent_grids() {
        let mk = |window: f64, bin: f64| {
            let n = (2.0 * window / bin) as usize;
            let centers: Vec<f64> = (0..n).map(|i| -window + (i as f64 + 0.5) * bin).collect();
            CoincidenceHistogram::new(centers, vec![10; n], bin, window, BTreeMap::new()).unwrap()
        };
        let set = CascadeHistogramSet {
            vv: mk(1000.0, 100.0),
            vh: mk(1000.0, 100.0),
            dd: mk(1000.0, 100.0),
            da: mk(1000.0, 100.0),
            rr: mk(1000.0, 100.0),
            rl: mk(2000.0, 100.0), // different window
        };
        let init = CascadeParams {
            alpha: 0.5,
            fss_uev: 4.9,
            tau_x_ps: 368.0,
            theta_rad: 0.0,
            peak_amp: 1.0,
            dip_depth: 0.5,
            tau_neg_ps: 500.0,
        };
        let err = fit_cascade_global(
            &set,
            &PairIrf { sigma_ps: 0.0 },
            &init,
            &CascadeFitOptions::default(),
        );
        assert!(err.is_err());
    }
}
