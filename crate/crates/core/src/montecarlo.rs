//! Synthetic photon-detection streams: cw-excited cascade and single-line
//! emission with blinking, detector jitter, dark counts and polarization
//! analyzers. The generator is the ground truth for every fitter.
//!
//! Randomness comes from the counter-based ChaCha8 stream cipher
//! ([`rand_chacha::ChaCha8Rng`]); one master seed, with independent
//! substreams per process component via `set_stream`, so draw order in one
//! component never disturbs another.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp, Normal};

use crate::cascade::{CascadeParams, JointProbCoeffs};
use crate::hbt::HbtParams;
use crate::quantum::BasisLabel;
use crate::{Error, Result};

/// One detection event. Times are integer picoseconds, as written to disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Event {
    pub channel: u8,
    pub time_ps: i64,
}

/// Time-ordered detection record over channels {0, 1}.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TimestampStream {
    events: Vec<Event>,
}

impl TimestampStream {
    /// Builds a stream, sorting by (time, channel) and validating channels.
    pub fn from_events(mut events: Vec<Event>) -> Result<Self> {
        if let Some(bad) = events.iter().find(|e| e.channel > 1) {
            return Err(Error::invalid(format!("channel {} not in {{0, 1}}", bad.channel)));
        }
        events.sort_by_key(|e| (e.time_ps, e.channel));
        Ok(TimestampStream { events })
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Times on one channel, in ascending order.
    pub fn channel_times(&self, channel: u8) -> Vec<i64> {
        self.events
            .iter()
            .filter(|e| e.channel == channel)
            .map(|e| e.time_ps)
            .collect()
    }

    /// All times regardless of channel, in ascending order.
    pub fn merged_times(&self) -> Vec<i64> {
        self.events.iter().map(|e| e.time_ps).collect()
    }
}

/// Acquisition settings shared by both simulators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcquisitionConfig {
    /// Source events per second: cascade starts, or total emission rate for
    /// the single-line simulator.
    pub cascade_rate_hz: f64,
    /// Acquisition time, s.
    pub duration_s: f64,
    /// Per-detector Gaussian timing jitter, ps.
    pub detector_sigma_ps: f64,
    /// Dark counts per second on each channel.
    pub dark_rate_hz: f64,
    /// Mean dwell time of the emitting ("on") state, ps.
    pub blink_on_tau_ps: f64,
    /// Mean dwell time of the dark ("off") state, ps.
    pub blink_off_tau_ps: f64,
    /// Analyzer in front of channel 0 (XX photon).
    pub analyzer_xx: BasisLabel,
    /// Analyzer in front of channel 1 (X photon).
    pub analyzer_x: BasisLabel,
    /// Detection efficiency applied per channel, in (0, 1].
    pub efficiency: f64,
    pub seed: u64,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        AcquisitionConfig {
            cascade_rate_hz: 1e5,
            duration_s: 60.0,
            detector_sigma_ps: 148.63131505040334, // FWHM 350 ps per detector
            dark_rate_hz: 0.0,
            blink_on_tau_ps: 1e15,
            blink_off_tau_ps: 1.0,
            analyzer_xx: BasisLabel::H,
            analyzer_x: BasisLabel::H,
            efficiency: 1.0,
            seed: 1,
        }
    }
}

impl AcquisitionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.cascade_rate_hz > 0.0) || !(self.duration_s > 0.0) {
            return Err(Error::invalid("rate and duration must be positive"));
        }
        if !(self.detector_sigma_ps >= 0.0) || !(self.dark_rate_hz >= 0.0) {
            return Err(Error::invalid("jitter and dark rate must be >= 0"));
        }
        if !(self.blink_on_tau_ps > 0.0) || !(self.blink_off_tau_ps > 0.0) {
            return Err(Error::invalid("blinking dwell times must be positive"));
        }
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return Err(Error::invalid(format!(
                "efficiency = {} not in (0, 1]",
                self.efficiency
            )));
        }
        Ok(())
    }

    fn duration_ps(&self) -> f64 {
        self.duration_s * 1e12
    }

    /// Stationary occupancy of the "on" state.
    pub fn blink_on_fraction(&self) -> f64 {
        self.blink_on_tau_ps / (self.blink_on_tau_ps + self.blink_off_tau_ps)
    }
}

/// Substream ids carved out of the master seed; fixed so adding draws to one
/// component never shifts another.
mod stream {
    pub const TELEGRAPH: u64 = 0;
    pub const SOURCE: u64 = 1;
    pub const DETECTION: u64 = 2;
    pub const DARKS0: u64 = 3;
    pub const DARKS1: u64 = 4;
    pub const BACKGROUND: u64 = 5;
}

fn substream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// On-intervals of the two-state telegraph process over [0, duration], with
/// the initial state drawn from the stationary occupancy.
fn telegraph_on_intervals(cfg: &AcquisitionConfig, rng: &mut ChaCha8Rng) -> Vec<(f64, f64)> {
    let duration = cfg.duration_ps();
    let on_dwell = Exp::new(1.0 / cfg.blink_on_tau_ps).unwrap();
    let off_dwell = Exp::new(1.0 / cfg.blink_off_tau_ps).unwrap();
    let mut on = rng.gen::<f64>() < cfg.blink_on_fraction();
    let mut t = 0.0;
    let mut intervals = Vec::new();
    while t < duration {
        let dwell: f64 = if on {
            on_dwell.sample(rng)
        } else {
            off_dwell.sample(rng)
        };
        let end = (t + dwell).min(duration);
        if on {
            intervals.push((t, end));
        }
        t += dwell;
        on = !on;
    }
    intervals
}

fn is_on(intervals: &[(f64, f64)], cursor: &mut usize, t: f64) -> bool {
    while *cursor < intervals.len() && intervals[*cursor].1 <= t {
        *cursor += 1;
    }
    *cursor < intervals.len() && intervals[*cursor].0 <= t
}

fn poisson_arrivals(rate_per_ps: f64, duration_ps: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let gap = Exp::new(rate_per_ps).unwrap();
    let mut t = 0.0;
    let mut out = Vec::with_capacity((rate_per_ps * duration_ps * 1.1) as usize + 16);
    loop {
        t += gap.sample(rng);
        if t >= duration_ps {
            return out;
        }
        out.push(t);
    }
}

fn dark_events(cfg: &AcquisitionConfig, channel: u8, stream_id: u64) -> Vec<Event> {
    if cfg.dark_rate_hz == 0.0 {
        return Vec::new();
    }
    let mut rng = substream(cfg.seed, stream_id);
    poisson_arrivals(cfg.dark_rate_hz * 1e-12, cfg.duration_ps(), &mut rng)
        .into_iter()
        .map(|t| Event {
            channel,
            time_ps: t.round() as i64,
        })
        .collect()
}

/// Simulates the XX-X cascade under cw excitation.
///
/// Cascade starts are a homogeneous Poisson process gated by the blinking
/// telegraph. Each cascade draws an exciton dwell time t1 ~ Exp(tau_x);
/// the XX photon (emitted first) goes through `analyzer_xx` toward channel 0,
/// the X photon at t0 + t1 through `analyzer_x` toward channel 1. The joint
/// pass/absorb outcome is sampled from the four analyzer-pair probabilities;
/// absorbed photons are lost. Surviving photons pass an efficiency Bernoulli
/// trial, receive Gaussian timing jitter, and are merged with dark counts.
pub fn simulate_cascade(p: &CascadeParams, cfg: &AcquisitionConfig) -> Result<TimestampStream> {
    p.validate()?;
    cfg.validate()?;

    let mu = cfg.analyzer_xx;
    let nu = cfg.analyzer_x;
    // outcome order: (pass, pass), (pass, fail), (fail, pass), (fail, fail)
    let outcomes = [
        (true, true, JointProbCoeffs::new(p, mu, nu)),
        (true, false, JointProbCoeffs::new(p, mu, nu.orthogonal())),
        (false, true, JointProbCoeffs::new(p, mu.orthogonal(), nu)),
        (false, false, JointProbCoeffs::new(p, mu.orthogonal(), nu.orthogonal())),
    ];

    let on_intervals = {
        let mut rng = substream(cfg.seed, stream::TELEGRAPH);
        telegraph_on_intervals(cfg, &mut rng)
    };

    let mut source_rng = substream(cfg.seed, stream::SOURCE);
    let starts = poisson_arrivals(cfg.cascade_rate_hz * 1e-12, cfg.duration_ps(), &mut source_rng);

    let dwell = Exp::new(1.0 / p.tau_x_ps).unwrap();
    let jitter = Normal::new(0.0, cfg.detector_sigma_ps.max(f64::MIN_POSITIVE)).unwrap();
    let mut det_rng = substream(cfg.seed, stream::DETECTION);

    let mut events = Vec::with_capacity(starts.len());
    let mut cursor = 0usize;
    for &t0 in &starts {
        if !is_on(&on_intervals, &mut cursor, t0) {
            continue;
        }
        let t1: f64 = dwell.sample(&mut det_rng);
        let u: f64 = det_rng.gen();
        let mut acc = 0.0;
        let mut hit = (false, false);
        for (pass_xx, pass_x, coeffs) in &outcomes {
            acc += coeffs.eval(t1);
            if u < acc {
                hit = (*pass_xx, *pass_x);
                break;
            }
        }
        for (passed, channel, time) in [(hit.0, 0u8, t0), (hit.1, 1u8, t0 + t1)] {
            if !passed {
                continue;
            }
            if det_rng.gen::<f64>() >= cfg.efficiency {
                continue;
            }
            let jit = if cfg.detector_sigma_ps > 0.0 {
                jitter.sample(&mut det_rng)
            } else {
                0.0
            };
            events.push(Event {
                channel,
                time_ps: (time + jit).round() as i64,
            });
        }
    }

    events.extend(dark_events(cfg, 0, stream::DARKS0));
    events.extend(dark_events(cfg, 1, stream::DARKS1));
    TimestampStream::from_events(events)
}

/// How the single-line emission process is assembled for a given model form;
/// exposed for inspection in reports and tests.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HbtConstruction {
    /// Rate of the antibunched renewal component, 1/ps.
    pub renewal_rate_per_ps: f64,
    /// Sum of the two hypoexponential stage rates, 1/ps (sets the dip time).
    pub renewal_stage_rate_sum: f64,
    /// Rate of the uncorrelated Poisson background, 1/ps.
    pub background_rate_per_ps: f64,
    /// Rate of the separate telegraph-bunched Poisson component, 1/ps
    /// (sum form only).
    pub bunching_rate_per_ps: f64,
    /// Telegraph contrast applied to the gated components.
    pub telegraph_contrast: f64,
    /// Whether the telegraph gates renewal + background (product form).
    pub gate_all: bool,
}

/// Derives a point-process construction whose pair correlation reproduces the
/// selected model form exactly.
///
/// * `literal` - the model is a single two-sided exponential dip/peak; a
///   hypoexponential renewal process mixed with Poisson background (dip), or
///   a telegraph-gated Poisson (peak), realizes it exactly.
/// * `product` - the telegraph gates both the renewal process and the
///   background, so the correlation factorizes into dip x bunching.
/// * `sum` - three independent components (renewal dip, telegraph-bunched
///   Poisson, flat background); feasible only when the rates work out, else
///   an error explains why.
fn plan_hbt(p: &HbtParams, total_rate_per_ps: f64) -> Result<HbtConstruction> {
    let b = p.blink_contrast();
    let tau_combined = 1.0 / (1.0 / p.tau1_ps + 1.0 / p.tau2_ps);
    let mut plan = HbtConstruction {
        renewal_rate_per_ps: 0.0,
        renewal_stage_rate_sum: 0.0,
        background_rate_per_ps: 0.0,
        bunching_rate_per_ps: 0.0,
        telegraph_contrast: 0.0,
        gate_all: false,
    };
    match p.form {
        crate::hbt::HbtForm::Literal => {
            let amp = (p.g0 - 1.0) * b; // signed coefficient of the exponential
            if amp <= 0.0 {
                // dip of depth -amp; realized as renewal + background
                let depth = -amp;
                if depth > 1.0 {
                    return Err(Error::invalid(format!(
                        "literal form with (1-g0)(1-beta)/beta = {depth} > 1 dips below zero; \
                         no point process realizes it"
                    )));
                }
                let f = 1.0 - depth.sqrt();
                plan.renewal_rate_per_ps = (1.0 - f) * total_rate_per_ps;
                plan.renewal_stage_rate_sum = 1.0 / tau_combined;
                plan.background_rate_per_ps = f * total_rate_per_ps;
            } else {
                // pure bunching; a telegraph-gated Poisson at the combined rate
                plan.bunching_rate_per_ps = total_rate_per_ps;
                plan.telegraph_contrast = amp;
            }
        }
        crate::hbt::HbtForm::Product => {
            let depth = 1.0 - p.g0;
            if depth < 0.0 {
                return Err(Error::invalid(
                    "product form needs g0 <= 1 for a realizable antibunching factor",
                ));
            }
            let f = 1.0 - depth.sqrt();
            plan.renewal_rate_per_ps = (1.0 - f) * total_rate_per_ps;
            plan.renewal_stage_rate_sum = 1.0 / p.tau1_ps;
            plan.background_rate_per_ps = f * total_rate_per_ps;
            plan.telegraph_contrast = b;
            plan.gate_all = true;
        }
        crate::hbt::HbtForm::Sum => {
            if p.g0 > 1.0 {
                return Err(Error::invalid("sum form needs g0 <= 1"));
            }
            let r1 = (1.0 - p.g0).sqrt(); // fraction in the antibunched component
            let x = 1.0 - r1; // fraction left for the bunching component
            if b > 0.0 && x <= 0.0 {
                return Err(Error::invalid(
                    "sum form with g0 = 0 leaves no rate for the blinking term",
                ));
            }
            plan.renewal_rate_per_ps = r1 * total_rate_per_ps;
            plan.renewal_stage_rate_sum = 1.0 / p.tau1_ps;
            plan.bunching_rate_per_ps = x * total_rate_per_ps;
            plan.telegraph_contrast = if x > 0.0 { b / (x * x) } else { 0.0 };
        }
    }
    // hypoexponential stage rates must be real: rate <= s/4
    if plan.renewal_rate_per_ps > 0.25 * plan.renewal_stage_rate_sum {
        return Err(Error::invalid(format!(
            "source rate {:.3e}/ps exceeds the fastest renewal process with this dip time ({:.3e}/ps)",
            plan.renewal_rate_per_ps,
            0.25 * plan.renewal_stage_rate_sum
        )));
    }
    Ok(plan)
}

/// Renewal process with hypoexponential(p, d) waiting times; its pair
/// correlation is exactly 1 - exp(-(p + d) |t|).
fn renewal_arrivals(
    rate_per_ps: f64,
    stage_sum: f64,
    duration_ps: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    if rate_per_ps == 0.0 {
        return Vec::new();
    }
    // stage rates solve p + d = stage_sum, p d = rate * stage_sum
    let disc = (stage_sum * stage_sum - 4.0 * rate_per_ps * stage_sum).sqrt();
    let fast = Exp::new(0.5 * (stage_sum + disc)).unwrap();
    let slow = Exp::new(0.5 * (stage_sum - disc)).unwrap();
    let mut t = 0.0;
    let mut out = Vec::with_capacity((rate_per_ps * duration_ps * 1.1) as usize + 16);
    loop {
        t += fast.sample(rng) + slow.sample(rng);
        if t >= duration_ps {
            return out;
        }
        out.push(t);
    }
}

/// Telegraph process with the given contrast (1-beta)/beta and correlation
/// time `tau2`, as on-intervals for thinning.
fn contrast_telegraph(
    contrast: f64,
    tau2_ps: f64,
    duration_ps: f64,
    rng: &mut ChaCha8Rng,
) -> Option<Vec<(f64, f64)>> {
    if contrast == 0.0 {
        return None;
    }
    let beta = 1.0 / (1.0 + contrast);
    let cfg = AcquisitionConfig {
        blink_on_tau_ps: tau2_ps / (1.0 - beta),
        blink_off_tau_ps: tau2_ps / beta,
        duration_s: duration_ps * 1e-12,
        ..Default::default()
    };
    Some(telegraph_on_intervals(&cfg, rng))
}

/// Simulates single-line emission whose pair statistics follow the selected
/// autocorrelation form, split 50/50 onto two detectors, jittered, with
/// dark counts. See [`plan_hbt`] for the construction per form.
pub fn simulate_hbt(p: &HbtParams, cfg: &AcquisitionConfig) -> Result<TimestampStream> {
    p.validate()?;
    cfg.validate()?;
    let duration = cfg.duration_ps();
    let plan = plan_hbt(p, cfg.cascade_rate_hz * 1e-12)?;

    // blinking telegraph: the model's own (beta, tau2) for gated forms,
    // or the derived contrast for the independent bunching component
    let mut telegraph_rng = substream(cfg.seed, stream::TELEGRAPH);
    let gate = if plan.gate_all {
        contrast_telegraph(plan.telegraph_contrast, p.tau2_ps, duration, &mut telegraph_rng)
    } else {
        None
    };
    let bunch_gate = if plan.bunching_rate_per_ps > 0.0 {
        contrast_telegraph(plan.telegraph_contrast, p.tau2_ps, duration, &mut telegraph_rng)
    } else {
        None
    };

    let mut emission = Vec::new();
    {
        let mut rng = substream(cfg.seed, stream::SOURCE);
        emission.extend(renewal_arrivals(
            plan.renewal_rate_per_ps,
            plan.renewal_stage_rate_sum,
            duration,
            &mut rng,
        ));
    }
    if plan.background_rate_per_ps > 0.0 {
        let mut rng = substream(cfg.seed, stream::BACKGROUND);
        emission.extend(poisson_arrivals(plan.background_rate_per_ps, duration, &mut rng));
    }
    if let Some(intervals) = &gate {
        let mut cursor = 0usize;
        emission.sort_by(f64::total_cmp);
        emission.retain(|&t| is_on(intervals, &mut cursor, t));
    }
    if let Some(intervals) = &bunch_gate {
        let beta = 1.0 / (1.0 + plan.telegraph_contrast);
        let on_rate = plan.bunching_rate_per_ps / beta;
        let mut rng = substream(cfg.seed, stream::BACKGROUND.wrapping_add(1));
        let mut cursor = 0usize;
        for t in poisson_arrivals(on_rate, duration, &mut rng) {
            if is_on(intervals, &mut cursor, t) {
                emission.push(t);
            }
        }
    }
    emission.sort_by(f64::total_cmp);

    // 50/50 beamsplitter, efficiency, jitter
    let jitter = Normal::new(0.0, cfg.detector_sigma_ps.max(f64::MIN_POSITIVE)).unwrap();
    let mut det_rng = substream(cfg.seed, stream::DETECTION);
    let mut events = Vec::with_capacity(emission.len());
    for t in emission {
        let channel = u8::from(det_rng.gen::<f64>() < 0.5);
        if det_rng.gen::<f64>() >= cfg.efficiency {
            continue;
        }
        let jit = if cfg.detector_sigma_ps > 0.0 {
            jitter.sample(&mut det_rng)
        } else {
            0.0
        };
        events.push(Event {
            channel,
            time_ps: (t + jit).round() as i64,
        });
    }

    events.extend(dark_events(cfg, 0, stream::DARKS0));
    events.extend(dark_events(cfg, 1, stream::DARKS1));
    TimestampStream::from_events(events)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hbt::HbtForm;

    fn cascade_params(alpha: f64, fss: f64) -> CascadeParams {
        CascadeParams {
            alpha,
            fss_uev: fss,
            tau_x_ps: 368.0,
            theta_rad: 0.0,
            peak_amp: 1.0,
            dip_depth: 0.0,
            tau_neg_ps: 600.0,
        }
    }

    fn quiet_config(seed: u64) -> AcquisitionConfig {
        AcquisitionConfig {
            cascade_rate_hz: 2e5,
            duration_s: 1.0,
            detector_sigma_ps: 0.0,
            dark_rate_hz: 0.0,
            seed,
            ..Default::default()
        }
    }

    #[test]
    fn cascade_same_seed_identical() {
        let p = cascade_params(0.46, 4.9);
        let cfg = quiet_config(42);
        let a = simulate_cascade(&p, &cfg).unwrap();
        let b = simulate_cascade(&p, &cfg).unwrap();
        assert_eq!(a, b);
        let c = simulate_cascade(&p, &AcquisitionConfig { seed: 43, ..cfg }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn cascade_orthogonal_analyzers_give_no_true_pairs() {
        let p = cascade_params(1.0, 0.0);
        let cfg = AcquisitionConfig {
            analyzer_xx: BasisLabel::H,
            analyzer_x: BasisLabel::V,
            cascade_rate_hz: 1e4, // accidentals negligible at this rate
            duration_s: 2.0,
            ..quiet_config(7)
        };
        let stream = simulate_cascade(&p, &cfg).unwrap();
        let ch0 = stream.channel_times(0);
        let ch1 = stream.channel_times(1);
        let mut close_pairs = 0;
        let mut j = 0usize;
        for &t0 in &ch0 {
            while j < ch1.len() && ch1[j] < t0 - 3000 {
                j += 1;
            }
            let mut k = j;
            while k < ch1.len() && ch1[k] <= t0 + 3000 {
                close_pairs += 1;
                k += 1;
            }
        }
        // HV projection of Phi+ vanishes, so only accidental coincidences remain
        assert!(close_pairs <= 2, "found {close_pairs} close pairs");
    }

    #[test]
    fn cascade_count_rate_matches_marginals() {
        // each of the two photons passes any analyzer with probability 1/2
        // (both marginals of rho are maximally mixed), so the mean detected
        // count is 1.0 per cascade at unit efficiency
        let p = cascade_params(0.46, 4.9);
        let cfg = AcquisitionConfig {
            cascade_rate_hz: 1e5,
            duration_s: 2.0,
            ..quiet_config(11)
        };
        let stream = simulate_cascade(&p, &cfg).unwrap();
        let expected = cfg.cascade_rate_hz * cfg.duration_s;
        let sigma = (2.0 * expected).sqrt(); // var <= 2 per cascade
        assert!(
            (stream.len() as f64 - expected).abs() < 5.0 * sigma,
            "{} vs {}",
            stream.len(),
            expected
        );
    }

    #[test]
    fn cascade_efficiency_scales_counts() {
        let p = cascade_params(0.46, 4.9);
        let full = simulate_cascade(&p, &quiet_config(3)).unwrap();
        let half = simulate_cascade(
            &p,
            &AcquisitionConfig {
                efficiency: 0.5,
                ..quiet_config(3)
            },
        )
        .unwrap();
        let ratio = half.len() as f64 / full.len() as f64;
        assert!((ratio - 0.5).abs() < 0.02, "ratio {ratio}");
    }

    #[test]
    fn telegraph_occupancy_converges() {
        let cfg = AcquisitionConfig {
            blink_on_tau_ps: 4e6,
            blink_off_tau_ps: 2e6,
            duration_s: 0.005,
            ..Default::default()
        };
        let beta = cfg.blink_on_fraction();
        let n_runs = 200;
        let mut fractions = Vec::with_capacity(n_runs);
        for seed in 0..n_runs {
            let mut rng = substream(seed as u64, stream::TELEGRAPH);
            let on = telegraph_on_intervals(&cfg, &mut rng);
            let on_time: f64 = on.iter().map(|(a, b)| b - a).sum();
            fractions.push(on_time / cfg.duration_ps());
        }
        let mean = fractions.iter().sum::<f64>() / n_runs as f64;
        let var = fractions.iter().map(|f| (f - mean) * (f - mean)).sum::<f64>() / (n_runs - 1) as f64;
        let sem = (var / n_runs as f64).sqrt();
        assert!(
            (mean - beta).abs() < 5.0 * sem.max(1e-4),
            "occupancy {mean} vs beta {beta} (sem {sem})"
        );
    }

    #[test]
    fn hbt_same_seed_identical() {
        let p = HbtParams {
            g0: 0.07,
            tau1_ps: 400.0,
            tau2_ps: 5000.0,
            beta: 0.5,
            form: HbtForm::Literal,
        };
        let cfg = AcquisitionConfig {
            cascade_rate_hz: 1e6,
            duration_s: 0.2,
            ..quiet_config(5)
        };
        let a = simulate_hbt(&p, &cfg).unwrap();
        let b = simulate_hbt(&p, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(!a.is_empty());
    }

    #[test]
    fn hbt_antibunched_dip_empties_zero_delay() {
        // g0 = 0, beta = 1: a bare renewal process; near-zero delays are empty
        let p = HbtParams {
            g0: 0.0,
            tau1_ps: 400.0,
            tau2_ps: 5000.0,
            beta: 1.0,
            form: HbtForm::Product,
        };
        let cfg = AcquisitionConfig {
            cascade_rate_hz: 2e6,
            duration_s: 0.5,
            ..quiet_config(9)
        };
        let stream = simulate_hbt(&p, &cfg).unwrap();
        let ch0 = stream.channel_times(0);
        let ch1 = stream.channel_times(1);
        // count cross-channel pairs within +-20 ps (well inside the dip)
        let mut near = 0usize;
        let mut far = 0usize;
        let mut j = 0usize;
        for &t0 in &ch0 {
            while j < ch1.len() && ch1[j] < t0 - 4000 {
                j += 1;
            }
            let mut k = j;
            while k < ch1.len() && ch1[k] <= t0 + 4000 {
                let d = (ch1[k] - t0).abs();
                if d <= 20 {
                    near += 1;
                } else if d >= 3000 {
                    far += 1;
                }
                k += 1;
            }
        }
        assert!(far > 50, "statistics too thin: {far}");
        // dip suppresses the near window by ~ t/tau1; allow generous noise
        assert!(
            (near as f64) < 0.15 * far as f64,
            "near {near} vs far {far}"
        );
    }

    #[test]
    fn hbt_blinking_bunches_the_wings() {
        let p = HbtParams {
            g0: 0.0,
            tau1_ps: 300.0,
            tau2_ps: 3000.0,
            beta: 0.8,
            form: HbtForm::Product,
        };
        let cfg = AcquisitionConfig {
            cascade_rate_hz: 2e6,
            duration_s: 0.5,
            ..quiet_config(13)
        };
        let stream = simulate_hbt(&p, &cfg).unwrap();
        let ch0 = stream.channel_times(0);
        let ch1 = stream.channel_times(1);
        // mean pair density at |d| in [1000, 4000] ps (bunched region) vs
        // [40000, 43000] ps (uncorrelated asymptote)
        let count_band = |lo: i64, hi: i64| -> usize {
            let mut n = 0usize;
            let mut j = 0usize;
            for &t0 in &ch0 {
                while j < ch1.len() && ch1[j] < t0 - hi {
                    j += 1;
                }
                let mut k = j;
                while k < ch1.len() && ch1[k] <= t0 + hi {
                    let d = (ch1[k] - t0).abs();
                    if d >= lo {
                        n += 1;
                    }
                    k += 1;
                }
            }
            n
        };
        let bunched = count_band(1000, 4000);
        let flat = count_band(40000, 43000);
        // product form at those delays: 1 + 0.25 e^{-|t|/3000} averages ~1.12
        let ratio = bunched as f64 / flat as f64;
        assert!(ratio > 1.05, "wing ratio {ratio}");
    }

    #[test]
    fn hbt_sum_form_infeasible_when_g0_zero() {
        let p = HbtParams {
            g0: 0.0,
            tau1_ps: 300.0,
            tau2_ps: 3000.0,
            beta: 0.8,
            form: HbtForm::Sum,
        };
        assert!(simulate_hbt(&p, &quiet_config(1)).is_err());
    }

    #[test]
    fn hbt_rejects_unrealizable_literal_depth() {
        // (1-g0)(1-beta)/beta = 0.95 * 4 > 1 dips below zero
        let p = HbtParams {
            g0: 0.05,
            tau1_ps: 300.0,
            tau2_ps: 3000.0,
            beta: 0.2,
            form: HbtForm::Literal,
        };
        assert!(simulate_hbt(&p, &quiet_config(1)).is_err());
    }

    #[test]
    fn config_validation() {
        let bad = AcquisitionConfig {
            efficiency: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = AcquisitionConfig {
            duration_s: -1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = AcquisitionConfig {
            blink_on_tau_ps: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn stream_sorts_and_validates() {
        let s = TimestampStream::from_events(vec![
            Event { channel: 1, time_ps: 50 },
            Event { channel: 0, time_ps: 10 },
            Event { channel: 0, time_ps: 50 },
        ])
        .unwrap();
        assert_eq!(
            s.events().iter().map(|e| (e.channel, e.time_ps)).collect::<Vec<_>>(),
            vec![(0, 10), (0, 50), (1, 50)]
        );
        assert!(TimestampStream::from_events(vec![Event { channel: 2, time_ps: 0 }]).is_err());
    }
}
