//! Second-order autocorrelation models with blinking and IRF convolution.
//!
//! The printed model parenthesization is ambiguous (product of the
//! antibunching and blinking exponentials vs the conventional sum/product of
//! `1 + term` factors), so all three candidate forms live behind
//! [`HbtForm`]; fits record which one they used.

use serde::{Deserialize, Serialize};

use crate::cascade::PairIrf;
use crate::{Error, Result};

/// Algebraic form of the autocorrelation model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HbtForm {
    /// `1 + (g0-1) e^{-|t|/tau1} * ((1-beta)/beta) e^{-|t|/tau2}` as printed.
    Literal,
    /// `1 + (g0-1) e^{-|t|/tau1} + ((1-beta)/beta) e^{-|t|/tau2}`.
    Sum,
    /// `(1 + (g0-1) e^{-|t|/tau1}) (1 + ((1-beta)/beta) e^{-|t|/tau2})`.
    Product,
}

impl std::str::FromStr for HbtForm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "literal" => Ok(HbtForm::Literal),
            "sum" => Ok(HbtForm::Sum),
            "product" => Ok(HbtForm::Product),
            other => Err(Error::invalid(format!("unknown g2 form '{other}'"))),
        }
    }
}

impl std::fmt::Display for HbtForm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            HbtForm::Literal => "literal",
            HbtForm::Sum => "sum",
            HbtForm::Product => "product",
        })
    }
}

/// Parameters of the autocorrelation model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HbtParams {
    /// Single-photon purity g0 (dimensionless, >= 0).
    pub g0: f64,
    /// Pump/decay timescale, ps.
    pub tau1_ps: f64,
    /// Blinking timescale, ps.
    pub tau2_ps: f64,
    /// On-state fraction, in (0, 1].
    pub beta: f64,
    pub form: HbtForm,
}

impl HbtParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.g0 >= 0.0) {
            return Err(Error::invalid(format!("g0 = {} must be >= 0", self.g0)));
        }
        if !(self.tau1_ps > 0.0) || !(self.tau2_ps > 0.0) {
            return Err(Error::invalid("tau1 and tau2 must be positive"));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::invalid(format!("beta = {} not in (0, 1]", self.beta)));
        }
        Ok(())
    }

    /// Blinking contrast (1-beta)/beta.
    pub fn blink_contrast(&self) -> f64 {
        (1.0 - self.beta) / self.beta
    }

    /// Decomposition of `g2 - 1` into two-sided exponential terms
    /// `A_i * exp(-|t|/tau_i)`; used by both the curve evaluation and the
    /// Monte Carlo construction.
    pub(crate) fn exponential_terms(&self) -> Vec<(f64, f64)> {
        let a = self.g0 - 1.0;
        let b = self.blink_contrast();
        let tau_combined = 1.0 / (1.0 / self.tau1_ps + 1.0 / self.tau2_ps);
        match self.form {
            HbtForm::Literal => vec![(a * b, tau_combined)],
            HbtForm::Sum => vec![(a, self.tau1_ps), (b, self.tau2_ps)],
            HbtForm::Product => vec![
                (a, self.tau1_ps),
                (b, self.tau2_ps),
                (a * b, tau_combined),
            ],
        }
    }
}

/// The selected model form without instrument response.
pub fn g2_unconvolved(t_ps: f64, p: &HbtParams) -> f64 {
    let x1 = (-t_ps.abs() / p.tau1_ps).exp();
    let x2 = (-t_ps.abs() / p.tau2_ps).exp();
    let a = p.g0 - 1.0;
    let b = p.blink_contrast();
    match p.form {
        HbtForm::Literal => 1.0 + a * x1 * b * x2,
        HbtForm::Sum => 1.0 + a * x1 + b * x2,
        HbtForm::Product => (1.0 + a * x1) * (1.0 + b * x2),
    }
}

// Abramowitz & Stegun 7.1.26 rational approximation, |error| <= 1.5e-7.
const ERFC_P: f64 = 0.3275911;
const ERFC_A: [f64; 5] = [
    0.254829592,
    -0.284496736,
    1.421413741,
    -1.453152027,
    1.061405429,
];

/// Complementary error function via the rational approximation.
pub fn erfc(x: f64) -> f64 {
    if x >= 0.0 {
        let t = 1.0 / (1.0 + ERFC_P * x);
        let poly =
            t * (ERFC_A[0] + t * (ERFC_A[1] + t * (ERFC_A[2] + t * (ERFC_A[3] + t * ERFC_A[4]))));
        poly * (-x * x).exp()
    } else {
        2.0 - erfc(-x)
    }
}

// Scaled complement erfcx(x) = exp(x^2) erfc(x) for x >= 0, with uniform
// *relative* accuracy: the convolution multiplies it by a Gaussian factor,
// so an absolute-accuracy erfc would lose all digits once x^2 is large.
// Maclaurin series below 1, Laplace continued fraction above.
fn erfcx_nonneg(x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if x < 1.0 {
        let mut term = x;
        let mut sum = x;
        let x2 = x * x;
        let mut k = 0usize;
        while term.abs() > 1e-18 * sum.abs().max(1.0) && k < 60 {
            k += 1;
            term *= -x2 / k as f64;
            sum += term / (2.0 * k as f64 + 1.0);
        }
        let erf = 2.0 / std::f64::consts::PI.sqrt() * sum;
        (x2).exp() * (1.0 - erf)
    } else {
        // erfcx(x) = (1/sqrt(pi)) / (x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
        let mut cf = 0.0;
        for n in (1..=40).rev() {
            cf = (n as f64 / 2.0) / (x + cf);
        }
        1.0 / (std::f64::consts::PI.sqrt() * (x + cf))
    }
}

// One side of the exponential<*>Gaussian:
//   exp(sigma^2/(2 tau^2) - t/tau) * erfc((sigma/tau - t/sigma)/sqrt(2))
// evaluated without forming the overflowing exp(sigma^2/(2 tau^2)) factor.
fn exp_gauss_side(tau: f64, sigma: f64, t: f64) -> f64 {
    let b = (sigma / tau - t / sigma) / std::f64::consts::SQRT_2;
    let gauss = (-t * t / (2.0 * sigma * sigma)).exp();
    if b >= 0.0 {
        gauss * erfcx_nonneg(b)
    } else {
        // erfcx(b) = 2 exp(b^2) - erfcx(-b); the combined exponent
        // sigma^2/(2 tau^2) - t/tau is negative whenever b < 0
        2.0 * (sigma * sigma / (2.0 * tau * tau) - t / tau).exp() - gauss * erfcx_nonneg(-b)
    }
}

/// Analytic convolution of `A exp(-|t|/tau)` with a unit-area Gaussian of
/// standard deviation `sigma`; `sigma = 0` returns the exponential exactly.
pub fn exp_gauss_convolve(amplitude: f64, tau_ps: f64, sigma_ps: f64, t_ps: f64) -> f64 {
    debug_assert!(tau_ps > 0.0 && sigma_ps >= 0.0);
    if sigma_ps == 0.0 {
        return amplitude * (-t_ps.abs() / tau_ps).exp();
    }
    0.5 * amplitude * (exp_gauss_side(tau_ps, sigma_ps, t_ps) + exp_gauss_side(tau_ps, sigma_ps, -t_ps))
}

/// Samples the IRF-convolved model on `grid` (strictly increasing, ps).
///
/// Every form decomposes into two-sided exponentials (the product cross-term
/// collapses to a single exponential at the combined rate), so the
/// convolution is analytic throughout.
pub fn g2_curve(p: &HbtParams, irf: &PairIrf, grid: &[f64]) -> Result<Vec<f64>> {
    p.validate()?;
    g2_curve_unchecked(p, irf, grid)
}

/// Curve evaluation without the parameter-range check; the fitter explores
/// slightly outside the physical ranges (e.g. g0 a hair below zero) while
/// its transforms keep the scales positive.
pub(crate) fn g2_curve_unchecked(p: &HbtParams, irf: &PairIrf, grid: &[f64]) -> Result<Vec<f64>> {
    crate::cascade::check_grid(grid)?;
    let terms = p.exponential_terms();
    Ok(grid
        .iter()
        .map(|&t| {
            1.0 + terms
                .iter()
                .map(|&(a, tau)| exp_gauss_convolve(a, tau, irf.sigma_ps, t))
                .sum::<f64>()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(g0: f64, tau1: f64, tau2: f64, beta: f64, form: HbtForm) -> HbtParams {
        HbtParams {
            g0,
            tau1_ps: tau1,
            tau2_ps: tau2,
            beta,
            form,
        }
    }

    #[test]
    fn unconvolved_limits() {
        for form in [HbtForm::Literal, HbtForm::Sum, HbtForm::Product] {
            let p = params(0.07, 350.0, 5000.0, 0.8, form);
            assert!((g2_unconvolved(1e9, &p) - 1.0).abs() < 1e-12);
            assert!((g2_unconvolved(-1e9, &p) - 1.0).abs() < 1e-12);
        }
        // literal at t=0 with beta = 0.5: contrast is 1, value is g0
        let p = params(0.07, 350.0, 5000.0, 0.5, HbtForm::Literal);
        assert!((g2_unconvolved(0.0, &p) - 0.07).abs() < 1e-12);
        // perfect emitter without blinking
        let p = params(0.0, 350.0, 5000.0, 1.0, HbtForm::Product);
        assert!(g2_unconvolved(0.0, &p).abs() < 1e-12);
    }

    #[test]
    fn literal_zero_delay_identity() {
        for (g0, beta) in [(0.07, 0.8), (0.3, 0.5), (1.4, 0.9)] {
            let p = params(g0, 200.0, 3000.0, beta, HbtForm::Literal);
            let want = 1.0 + (g0 - 1.0) * (1.0 - beta) / beta;
            assert_eq!(g2_unconvolved(0.0, &p), want);
        }
    }

    #[test]
    fn erfc_against_reference() {
        // statrs provides an independent high-accuracy implementation
        let mut x = -6.0;
        while x <= 6.0 {
            let want = statrs::function::erf::erfc(x);
            assert!(
                (erfc(x) - want).abs() <= 1.5e-7,
                "x = {x}: {} vs {}",
                erfc(x),
                want
            );
            x += 0.01;
        }
    }

    #[test]
    fn exp_gauss_sigma_zero_is_exact() {
        for t in [-300.0, -1.0, 0.0, 2.5, 750.0] {
            let v = exp_gauss_convolve(2.5, 120.0, 0.0, t);
            assert_eq!(v, 2.5 * (-t.abs() / 120.0).exp());
        }
    }

    #[test]
    fn exp_gauss_frozen_oracle_values() {
        // frozen from dense numeric quadrature of the convolution integral
        let cases = [
            (100.0, 100.0, 0.0, 0.5231565837302468),
            (100.0, 100.0, 50.0, 0.4901383399453301),
            (370.0, 210.0, 0.0, 0.6700010091609506),
            (50.0, 300.0, 123.0, 0.11960777693386769),
        ];
        for (tau, sigma, t, want) in cases {
            let got = exp_gauss_convolve(1.0, tau, sigma, t);
            assert!(
                (got - want).abs() < 1e-6,
                "tau={tau} sigma={sigma} t={t}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn exp_gauss_even_bitwise() {
        for t in [13.0, 250.0, 4000.0] {
            let plus = exp_gauss_convolve(0.8, 230.0, 180.0, t);
            let minus = exp_gauss_convolve(0.8, 230.0, 180.0, -t);
            assert_eq!(plus.to_bits(), minus.to_bits());
        }
    }

    #[test]
    fn exp_gauss_extreme_ratio_no_overflow() {
        // sigma/tau = 50 would overflow the textbook prefactor exp(sigma^2/2tau^2)
        let v = exp_gauss_convolve(1.0, 10.0, 500.0, 0.0);
        assert!(v.is_finite() && v > 0.0 && v < 1.0);
        let far = exp_gauss_convolve(1.0, 10.0, 500.0, 5000.0);
        assert!(far.is_finite() && far >= 0.0);
    }

    /// Brute-force trapezoid convolution, the oracle for the analytic form.
    /// Step small against tau: the trapezoid error scales as (h/tau)^2.
    pub(crate) fn numeric_exp_gauss(a: f64, tau: f64, sigma: f64, t: f64) -> f64 {
        let h = (sigma / 50.0).min(tau / 250.0);
        let span = 14.0 * sigma + 45.0 * tau;
        let n = (2.0 * span / h).ceil() as usize;
        let norm = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
        let mut acc = 0.0;
        for k in 0..=n {
            let x = -span + k as f64 * h;
            let w = if k == 0 || k == n { 0.5 } else { 1.0 };
            acc += w * a * (-x.abs() / tau).exp() * norm * (-(t - x) * (t - x) / (2.0 * sigma * sigma)).exp();
        }
        acc * h
    }

    #[test]
    fn analytic_matches_numeric_convolution_spot() {
        // t = 0, sigma = tau case called out in the contract
        let got = exp_gauss_convolve(1.0, 150.0, 150.0, 0.0);
        let want = numeric_exp_gauss(1.0, 150.0, 150.0, 0.0);
        assert!((got - want).abs() < 1e-6);
    }

    #[test]
    fn curve_matches_unconvolved_at_sigma_zero() {
        let grid: Vec<f64> = (-40..=40).map(|k| k as f64 * 60.0).collect();
        for form in [HbtForm::Literal, HbtForm::Sum, HbtForm::Product] {
            let p = params(0.1, 280.0, 2600.0, 0.8, form);
            let curve = g2_curve(&p, &PairIrf { sigma_ps: 0.0 }, &grid).unwrap();
            for (&t, &g) in grid.iter().zip(curve.iter()) {
                assert!(
                    (g - g2_unconvolved(t, &p)).abs() <= 1e-12,
                    "form {form}, t = {t}"
                );
            }
        }
    }

    #[test]
    fn convolution_fills_the_dip() {
        let p = params(0.07, 350.0, 5000.0, 0.5, HbtForm::Literal);
        let irf = PairIrf::from_fwhm(494.9747468305833);
        let convolved = g2_curve(&p, &irf, &[0.0]).unwrap()[0];
        assert!(convolved > g2_unconvolved(0.0, &p));
        assert!(convolved < 1.0);
    }

    #[test]
    fn curve_tends_to_one() {
        let p = params(0.05, 400.0, 6000.0, 0.7, HbtForm::Product);
        let far = 20.0 * 6000.0 + 10.0 * 210.0;
        let v = g2_curve(&p, &PairIrf { sigma_ps: 210.0 }, &[far]).unwrap()[0];
        assert!((v - 1.0).abs() < 1e-3);
    }

    #[test]
    fn curve_rejects_non_monotone_grid() {
        let p = params(0.1, 300.0, 3000.0, 0.8, HbtForm::Literal);
        assert!(g2_curve(&p, &PairIrf { sigma_ps: 0.0 }, &[0.0, 10.0, 5.0]).is_err());
    }

    #[test]
    fn simple_dip_curve() {
        // g0 = 0, beta = 1 in any form reduces to 1 - e^{-|t|/tau1}
        let p = params(0.0, 220.0, 999.0, 1.0, HbtForm::Sum);
        let grid = [-440.0, 0.0, 220.0];
        let got = g2_curve(&p, &PairIrf { sigma_ps: 0.0 }, &grid).unwrap();
        for (&t, &g) in grid.iter().zip(got.iter()) {
            assert!((g - (1.0 - (-t.abs() / 220.0).exp())).abs() < 1e-12);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn analytic_vs_numeric_random(tau in 20.0f64..800.0, sigma in 5.0f64..400.0, t in -900.0f64..900.0) {
            let got = exp_gauss_convolve(1.0, tau, sigma, t);
            let want = numeric_exp_gauss(1.0, tau, sigma, t);
            prop_assert!((got - want).abs() < 1e-6, "tau={} sigma={} t={}: {} vs {}", tau, sigma, t, got, want);
        }

        #[test]
        fn curves_even_for_symmetric_grids(g0 in 0.0f64..0.9, beta in 0.3f64..1.0) {
            let p = params(g0, 300.0, 2500.0, beta, HbtForm::Product);
            let grid: Vec<f64> = (-30..=30).map(|k| k as f64 * 45.0).collect();
            let curve = g2_curve(&p, &PairIrf { sigma_ps: 160.0 }, &grid).unwrap();
            let n = curve.len();
            for i in 0..n {
                prop_assert_eq!(curve[i].to_bits(), curve[n - 1 - i].to_bits());
            }
        }
    }
}
