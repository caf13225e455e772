//! File formats and the coincidence correlator.
//!
//! On-disk formats, all plain text:
//! * timestamps: CSV `channel,time_ps`, `#` comments, header optional;
//! * histograms: CSV `delay_ps,counts` with `# key=value` metadata lines;
//! * fit reports: JSON with every number printed at 17 significant digits.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write as _};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::fit::FitResult;
use crate::montecarlo::{Event, TimestampStream};
use crate::{Error, Result};

/// Binned delay-time coincidence counts with uniform geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct CoincidenceHistogram {
    pub bin_centers: Vec<f64>,
    pub counts: Vec<u64>,
    pub bin_width_ps: f64,
    pub window_ps: f64,
    /// Channel/basis metadata carried through to files and reports.
    pub labels: BTreeMap<String, String>,
}

impl CoincidenceHistogram {
    pub fn new(
        bin_centers: Vec<f64>,
        counts: Vec<u64>,
        bin_width_ps: f64,
        window_ps: f64,
        labels: BTreeMap<String, String>,
    ) -> Result<Self> {
        if bin_centers.len() != counts.len() {
            return Err(Error::invalid(format!(
                "{} centers vs {} counts",
                bin_centers.len(),
                counts.len()
            )));
        }
        if bin_centers.is_empty() {
            return Err(Error::invalid("empty histogram"));
        }
        for pair in bin_centers.windows(2) {
            if ((pair[1] - pair[0]) - bin_width_ps).abs() > 1e-9 {
                return Err(Error::invalid(format!(
                    "non-uniform bins: spacing {} vs width {}",
                    pair[1] - pair[0],
                    bin_width_ps
                )));
            }
        }
        Ok(CoincidenceHistogram {
            bin_centers,
            counts,
            bin_width_ps,
            window_ps,
            labels,
        })
    }

    pub fn total_counts(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Pairing mode of [`correlate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorrelationMode {
    /// Channel 0 events start, channel 1 events stop; delay = t1 - t0.
    Cross,
    /// Both pair orders between the two outputs of a 50/50 split, giving a
    /// symmetric autocorrelation histogram.
    Auto,
}

fn bin_pairs(
    starts: &[i64],
    stops: &[i64],
    window_ps: f64,
    bin_width_ps: f64,
    counts: &mut [u64],
) {
    let w = window_ps;
    let mut lo = 0usize;
    for &t0 in starts {
        let t0f = t0 as f64;
        while lo < stops.len() && (stops[lo] as f64) < t0f - w {
            lo += 1;
        }
        let mut k = lo;
        while k < stops.len() {
            let d = stops[k] as f64 - t0f;
            if d >= w {
                break;
            }
            // delays live in [-w, w): index is exact for in-range d
            let idx = ((d + w) / bin_width_ps) as usize;
            counts[idx] += 1;
            k += 1;
        }
    }
}

/// Builds the coincidence histogram of a time-sorted stream: every pair of
/// (start, stop) events with delay in [-window, +window) is binned, not just
/// the first stop per start. Two-pointer sweep, O(n + pairs).
pub fn correlate(
    stream: &TimestampStream,
    window_ps: f64,
    bin_width_ps: f64,
    mode: CorrelationMode,
) -> Result<CoincidenceHistogram> {
    if !(window_ps > 0.0) || !(bin_width_ps > 0.0) {
        return Err(Error::invalid("window and bin width must be positive"));
    }
    let ratio = window_ps / bin_width_ps;
    if (ratio - ratio.round()).abs() > 1e-9 || ratio.round() < 1.0 {
        return Err(Error::invalid(format!(
            "window/bin = {ratio} must be a positive integer"
        )));
    }
    let half_bins = ratio.round() as usize;
    let n_bins = 2 * half_bins;
    let mut counts = vec![0u64; n_bins];

    let ch0 = stream.channel_times(0);
    let ch1 = stream.channel_times(1);
    bin_pairs(&ch0, &ch1, window_ps, bin_width_ps, &mut counts);
    if mode == CorrelationMode::Auto {
        bin_pairs(&ch1, &ch0, window_ps, bin_width_ps, &mut counts);
    }

    let bin_centers: Vec<f64> = (0..n_bins)
        .map(|i| -window_ps + (i as f64 + 0.5) * bin_width_ps)
        .collect();
    let mut labels = BTreeMap::new();
    labels.insert(
        "mode".to_string(),
        match mode {
            CorrelationMode::Cross => "cross".to_string(),
            CorrelationMode::Auto => "auto".to_string(),
        },
    );
    CoincidenceHistogram::new(bin_centers, counts, bin_width_ps, window_ps, labels)
}

/// Parses a timestamp CSV: `channel,time_ps` rows, `#` comments, optional
/// header. Events are sorted by time; channels outside {0, 1} are rejected
/// with their line number.
pub fn read_timestamps(path: &Path) -> Result<TimestampStream> {
    let reader = BufReader::new(File::open(path)?);
    let mut events = Vec::new();
    let mut saw_content = false;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut parts = trimmed.split(',');
        let (a, b) = (parts.next().unwrap_or(""), parts.next().unwrap_or(""));
        if parts.next().is_some() {
            return Err(Error::Parse {
                line: lineno,
                msg: "expected exactly two columns".into(),
            });
        }
        let parsed: std::result::Result<(u8, i64), _> = a
            .trim()
            .parse::<u8>()
            .and_then(|ch| b.trim().parse::<i64>().map(|t| (ch, t)));
        match parsed {
            Ok((channel, time_ps)) => {
                if channel > 1 {
                    return Err(Error::Parse {
                        line: lineno,
                        msg: format!("channel {channel} not in {{0, 1}}"),
                    });
                }
                events.push(Event { channel, time_ps });
                saw_content = true;
            }
            Err(e) => {
                if !saw_content && a.trim().eq_ignore_ascii_case("channel") {
                    saw_content = true; // header row
                    continue;
                }
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("bad row '{trimmed}': {e}"),
                });
            }
        }
    }
    if events.is_empty() {
        return Err(Error::Schema(format!(
            "{} contains no events",
            path.display()
        )));
    }
    TimestampStream::from_events(events)
}

/// Writes a timestamp stream as CSV with a header row.
pub fn write_timestamps(stream: &TimestampStream, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "channel,time_ps")?;
    for e in stream.events() {
        writeln!(out, "{},{}", e.channel, e.time_ps)?;
    }
    out.flush()?;
    Ok(())
}

/// Writes a histogram as CSV with `# key=value` metadata lines.
pub fn write_histogram(hist: &CoincidenceHistogram, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "# bin_width_ps={}", hist.bin_width_ps)?;
    writeln!(out, "# window_ps={}", hist.window_ps)?;
    for (k, v) in &hist.labels {
        writeln!(out, "# label:{k}={v}")?;
    }
    writeln!(out, "delay_ps,counts")?;
    for (c, n) in hist.bin_centers.iter().zip(hist.counts.iter()) {
        writeln!(out, "{c},{n}")?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a histogram CSV written by [`write_histogram`]; `read(write(h)) == h`.
pub fn read_histogram(path: &Path) -> Result<CoincidenceHistogram> {
    let reader = BufReader::new(File::open(path)?);
    let mut bin_width = None;
    let mut window = None;
    let mut labels = BTreeMap::new();
    let mut header_seen = false;
    let mut centers = Vec::new();
    let mut counts = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(meta) = trimmed.strip_prefix('#') {
            let meta = meta.trim();
            if let Some((key, value)) = meta.split_once('=') {
                match key.trim() {
                    "bin_width_ps" => {
                        bin_width = Some(value.trim().parse::<f64>().map_err(|e| Error::Parse {
                            line: lineno,
                            msg: format!("bin_width_ps: {e}"),
                        })?)
                    }
                    "window_ps" => {
                        window = Some(value.trim().parse::<f64>().map_err(|e| Error::Parse {
                            line: lineno,
                            msg: format!("window_ps: {e}"),
                        })?)
                    }
                    k => {
                        if let Some(name) = k.strip_prefix("label:") {
                            labels.insert(name.to_string(), value.trim().to_string());
                        }
                    }
                }
            }
            continue;
        }
        if !header_seen {
            let cols: Vec<&str> = trimmed.split(',').map(str::trim).collect();
            if cols != ["delay_ps", "counts"] {
                let missing = ["delay_ps", "counts"]
                    .iter()
                    .find(|c| !cols.contains(&**c))
                    .unwrap_or(&"delay_ps");
                return Err(Error::Schema(format!(
                    "histogram header must be 'delay_ps,counts'; missing column '{missing}'"
                )));
            }
            header_seen = true;
            continue;
        }
        let (a, b) = trimmed.split_once(',').ok_or_else(|| Error::Parse {
            line: lineno,
            msg: "expected 'delay_ps,counts' row".into(),
        })?;
        let center = a.trim().parse::<f64>().map_err(|e| Error::Parse {
            line: lineno,
            msg: format!("delay: {e}"),
        })?;
        let count = b.trim().parse::<i64>().map_err(|e| Error::Parse {
            line: lineno,
            msg: format!("counts: {e}"),
        })?;
        if count < 0 {
            return Err(Error::invalid(format!(
                "negative count {count} at line {lineno}"
            )));
        }
        centers.push(center);
        counts.push(count as u64);
    }
    if !header_seen {
        return Err(Error::Schema("missing column 'counts'".into()));
    }
    let bin_width = bin_width.ok_or_else(|| Error::Schema("missing bin_width_ps metadata".into()))?;
    let window = window.ok_or_else(|| Error::Schema("missing window_ps metadata".into()))?;
    CoincidenceHistogram::new(centers, counts, bin_width, window, labels)
}

/// Generic two/three column CSV (`x,y[,weight]`) for the scalar fitters.
pub fn read_xy(path: &Path) -> Result<(Vec<f64>, Vec<f64>, Option<Vec<f64>>)> {
    let reader = BufReader::new(File::open(path)?);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut ws: Vec<f64> = Vec::new();
    let mut saw_content = false;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if cols.len() < 2 || cols.len() > 3 {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("expected 2 or 3 columns, got {}", cols.len()),
            });
        }
        let nums: std::result::Result<Vec<f64>, _> = cols.iter().map(|c| c.parse::<f64>()).collect();
        match nums {
            Ok(vals) => {
                xs.push(vals[0]);
                ys.push(vals[1]);
                if vals.len() == 3 {
                    ws.push(vals[2]);
                }
                saw_content = true;
            }
            Err(e) => {
                if !saw_content {
                    continue; // header row
                }
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("bad row '{trimmed}': {e}"),
                });
            }
        }
    }
    if xs.is_empty() {
        return Err(Error::Schema(format!("{} contains no data", path.display())));
    }
    if !ws.is_empty() && ws.len() != xs.len() {
        return Err(Error::Schema("weight column present on only some rows".into()));
    }
    Ok((xs, ys, if ws.is_empty() { None } else { Some(ws) }))
}

/// Writes a two-column curve CSV, e.g. `delay_ps,model_g2`.
pub fn write_curve(path: &Path, x_name: &str, y_name: &str, xs: &[f64], ys: &[f64]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{x_name},{y_name}")?;
    for (x, y) in xs.iter().zip(ys.iter()) {
        writeln!(out, "{x},{y}")?;
    }
    out.flush()?;
    Ok(())
}

/// (value, 1-sigma) pair as reported in the paper-style summaries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueSigma {
    pub value: f64,
    pub sigma: f64,
}

/// Fidelity block attached to cascade fit reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub phase_tracked: ValueSigma,
    pub time_averaged: ValueSigma,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportParameter {
    pub name: String,
    pub value: f64,
    pub sigma: f64,
    pub fixed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolInfo {
    pub name: String,
    pub version: String,
}

/// Complete record of one fit: parameters, uncertainties, covariance,
/// goodness of fit, and every selector that influenced the result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub tool: ToolInfo,
    /// "g2", "cascade" or "scalar:<model>".
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    /// Model form selectors, normalization scheme, IRF width and the like.
    pub model: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub inputs: Vec<String>,
    pub n_points: usize,
    pub parameters: Vec<ReportParameter>,
    pub covariance: Vec<Vec<f64>>,
    pub chi2: f64,
    pub dof: usize,
    pub converged: bool,
    pub iterations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fidelity: Option<FidelityReport>,
}

impl FitReport {
    /// Assembles a report from a fit result plus context.
    pub fn new(kind: &str, result: &FitResult, model: BTreeMap<String, String>) -> Self {
        FitReport {
            tool: ToolInfo {
                name: "qcorr".to_string(),
                version: env!("CARGO_PKG_VERSION").to_string(),
            },
            kind: kind.to_string(),
            label: None,
            model,
            seed: None,
            inputs: Vec::new(),
            n_points: result.dof + result.names.iter().zip(&result.fixed).filter(|(_, f)| !**f).count(),
            parameters: result
                .names
                .iter()
                .zip(&result.parameters)
                .zip(&result.uncertainties)
                .zip(&result.fixed)
                .map(|(((name, &value), &sigma), &fixed)| ReportParameter {
                    name: name.clone(),
                    value,
                    sigma,
                    fixed,
                })
                .collect(),
            covariance: result.covariance.clone(),
            chi2: result.chi2,
            dof: result.dof,
            converged: result.converged,
            iterations: result.iterations,
            fidelity: None,
        }
    }

    pub fn parameter(&self, name: &str) -> Option<&ReportParameter> {
        self.parameters.iter().find(|p| p.name == name)
    }
}

/// JSON formatter printing every f64 with 17 significant digits so that
/// re-reading a report reproduces each value bit for bit.
struct SciNotationFormatter {
    indent: usize,
}

impl SciNotationFormatter {
    fn newline<W: std::io::Write + ?Sized>(&self, w: &mut W) -> std::io::Result<()> {
        w.write_all(b"\n")?;
        for _ in 0..self.indent {
            w.write_all(b"  ")?;
        }
        Ok(())
    }
}

impl serde_json::ser::Formatter for SciNotationFormatter {
    fn write_f64<W: std::io::Write + ?Sized>(&mut self, w: &mut W, value: f64) -> std::io::Result<()> {
        if value.is_finite() {
            write!(w, "{value:.16e}")
        } else {
            // JSON has no inf/nan; a report should never contain them
            w.write_all(b"null")
        }
    }

    fn begin_array<W: std::io::Write + ?Sized>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.indent += 1;
        w.write_all(b"[")
    }

    fn end_array<W: std::io::Write + ?Sized>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.indent -= 1;
        self.newline(w)?;
        w.write_all(b"]")
    }

    fn begin_array_value<W: std::io::Write + ?Sized>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        if !first {
            w.write_all(b",")?;
        }
        self.newline(w)
    }

    fn begin_object<W: std::io::Write + ?Sized>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.indent += 1;
        w.write_all(b"{")
    }

    fn end_object<W: std::io::Write + ?Sized>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.indent -= 1;
        self.newline(w)?;
        w.write_all(b"}")
    }

    fn begin_object_key<W: std::io::Write + ?Sized>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        if !first {
            w.write_all(b",")?;
        }
        self.newline(w)
    }

    fn begin_object_value<W: std::io::Write + ?Sized>(&mut self, w: &mut W) -> std::io::Result<()> {
        w.write_all(b": ")
    }
}

/// Serializes a fit report as indented JSON with 17-significant-digit floats.
pub fn write_fit_report(report: &FitReport, path: &Path) -> Result<()> {
    let file = BufWriter::new(File::create(path)?);
    let mut ser =
        serde_json::Serializer::with_formatter(file, SciNotationFormatter { indent: 0 });
    report
        .serialize(&mut ser)
        .map_err(|e| Error::Schema(format!("report serialization failed: {e}")))?;
    let mut file = ser.into_inner();
    file.write_all(b"\n")?;
    file.flush()?;
    Ok(())
}

pub fn read_fit_report(path: &Path) -> Result<FitReport> {
    let file = BufReader::new(File::open(path)?);
    serde_json::from_reader(file)
        .map_err(|e| Error::Schema(format!("{}: {e}", path.display())))
}
