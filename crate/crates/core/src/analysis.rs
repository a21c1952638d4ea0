//! Post-processing of chain traces: thermalization detection, exponential
//! autocorrelation fits, error-barred histograms and means, growth-law
//! fits across `n`, and the three-layer counting estimate.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::observables::{ChiValue, ObservableRecord};
use crate::poset::StartKind;

/// Asymptotic constant in the count `c·a!·b!` of naturally labeled
/// bipartite orders on layers of sizes `a` and `b`.
pub const ETA: f64 = 3.4627;

/// Default noise floor for the autocorrelation fit window, as a fraction of
/// the variance.
pub const DEFAULT_NOISE_FLOOR: f64 = 0.05;

/// Default tolerance multiplier for [`thermalization_estimate`].
pub const DEFAULT_THERMALIZATION_K: f64 = 3.0;

/// Measured growth law `T = exp(ln_a + b·n)` in sweeps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthLaw {
    pub ln_a: f64,
    pub ln_a_err: f64,
    pub b: f64,
    pub b_err: f64,
}

impl GrowthLaw {
    pub fn at(&self, n: usize) -> f64 {
        (self.ln_a + self.b * n as f64).exp()
    }
}

/// Thermalization time of the mixed chain versus `n`.
pub const THERMALIZATION_GROWTH: GrowthLaw = GrowthLaw {
    ln_a: -11.4,
    ln_a_err: 1.0,
    b: 0.314,
    b_err: 0.015,
};

/// Autocorrelation time of the mixed chain versus `n`.
pub const AUTOCORRELATION_GROWTH: GrowthLaw = GrowthLaw {
    ln_a: -10.2,
    ln_a_err: 0.4,
    b: 0.263,
    b_err: 0.005,
};

/// Scalar series that can be pulled out of a trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Observable {
    Height,
    Relations,
    Links,
    OrderingFraction,
    LinkingFraction,
    MinimalCount,
    MaximalCount,
    /// `N_max − N_min`.
    Asymmetry,
    /// 1 when layered, 0 otherwise (abandoned checks count as 0).
    Layered,
    /// Size of level `k` (1-based), 0 when the order has fewer levels.
    LevelSize(usize),
}

impl Observable {
    pub fn name(&self) -> String {
        match self {
            Observable::Height => "height".into(),
            Observable::Relations => "R".into(),
            Observable::Links => "L".into(),
            Observable::OrderingFraction => "r".into(),
            Observable::LinkingFraction => "l".into(),
            Observable::MinimalCount => "N_min".into(),
            Observable::MaximalCount => "N_max".into(),
            Observable::Asymmetry => "N_max-N_min".into(),
            Observable::Layered => "chi".into(),
            Observable::LevelSize(k) => format!("level{k}"),
        }
    }

    pub fn value(&self, r: &ObservableRecord) -> f64 {
        match *self {
            Observable::Height => r.height as f64,
            Observable::Relations => r.relations as f64,
            Observable::Links => r.links as f64,
            Observable::OrderingFraction => r.ordering_fraction,
            Observable::LinkingFraction => r.linking_fraction,
            Observable::MinimalCount => r.minimal as f64,
            Observable::MaximalCount => r.maximal as f64,
            Observable::Asymmetry => r.maximal as f64 - r.minimal as f64,
            Observable::Layered => (r.chi == ChiValue::Layered) as u8 as f64,
            Observable::LevelSize(k) => k
                .checked_sub(1)
                .and_then(|i| r.level_sizes.get(i))
                .copied()
                .unwrap_or(0) as f64,
        }
    }

    pub fn series(&self, records: &[ObservableRecord]) -> Vec<f64> {
        records.iter().map(|r| self.value(r)).collect()
    }
}

/// Traces of one campaign at fixed `n`, keyed by chain label.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSet {
    pub n: usize,
    pub moves_per_sweep: u64,
    pub traces: BTreeMap<String, Trace>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub start: StartKind,
    pub records: Vec<ObservableRecord>,
}

impl TraceSet {
    pub fn new(n: usize, moves_per_sweep: u64) -> Self {
        TraceSet {
            n,
            moves_per_sweep,
            traces: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, label: impl Into<String>, start: StartKind, records: Vec<ObservableRecord>) {
        self.traces.insert(label.into(), Trace { start, records });
    }

    pub fn len(&self) -> usize {
        self.traces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.traces.is_empty()
    }

    /// Length of the shortest trace.
    pub fn common_length(&self) -> usize {
        self.traces.values().map(|t| t.records.len()).min().unwrap_or(0)
    }

    /// Records from every trace whose sweep index is at least `from`.
    pub fn pooled_after(&self, from: u64) -> Vec<&ObservableRecord> {
        self.traces
            .values()
            .flat_map(|t| t.records.iter().filter(move |r| r.sweep >= from))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Thermalization {
    /// The first agreeing window starts at record `index`, sweep `sweep`.
    Thermalized {
        sweep: u64,
        index: usize,
    },
    NotThermalized {
        reason: String,
    },
}

impl Thermalization {
    pub fn sweep(&self) -> Option<u64> {
        match self {
            Thermalization::Thermalized { sweep, .. } => Some(*sweep),
            Thermalization::NotThermalized { .. } => None,
        }
    }
}

impl fmt::Display for Thermalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Thermalization::Thermalized { sweep, .. } => write!(f, "{sweep}"),
            Thermalization::NotThermalized { reason } => write!(f, "not thermalized ({reason})"),
        }
    }
}

struct Prefix {
    sum: Vec<f64>,
    sq: Vec<f64>,
}

impl Prefix {
    fn new(xs: &[f64]) -> Self {
        let mut sum = Vec::with_capacity(xs.len() + 1);
        let mut sq = Vec::with_capacity(xs.len() + 1);
        let (mut s, mut q) = (0.0, 0.0);
        sum.push(0.0);
        sq.push(0.0);
        for &x in xs {
            s += x;
            q += x * x;
            sum.push(s);
            sq.push(q);
        }
        Prefix { sum, sq }
    }

    fn mean(&self, t: usize, w: usize) -> f64 {
        (self.sum[t + w] - self.sum[t]) / w as f64
    }

    /// Mean and squared standard error over `[t, t + w)`. Long windows use
    /// batch means so that autocorrelation widens the error.
    fn window(&self, t: usize, w: usize) -> (f64, f64) {
        let mean = self.mean(t, w);
        if w >= 2 * BATCHES {
            let b = w / BATCHES;
            let means: Vec<f64> = (0..BATCHES).map(|i| self.mean(t + i * b, b)).collect();
            let m = means.iter().sum::<f64>() / BATCHES as f64;
            let var = means.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (BATCHES - 1) as f64;
            return (mean, var / BATCHES as f64);
        }
        let wf = w as f64;
        let var = ((self.sq[t + w] - self.sq[t]) / wf - mean * mean).max(0.0) * wf / (wf - 1.0);
        (mean, var / wf)
    }
}

const BATCHES: usize = 10;

/// Smallest record index `t` such that over `[t, t + window)` the window
/// means of every indicator agree pairwise across all traces within `k`
/// combined standard errors. Each trace's standard error is that of its
/// final window, where it is closest to equilibrium; windows of 20 or more
/// records take it from 10 batch means. Traces of unequal length are
/// compared over their common prefix.
pub fn thermalization_estimate(traces: &TraceSet, indicators: &[Observable], window: usize, k: f64) -> Thermalization {
    let not = |reason: String| Thermalization::NotThermalized { reason };
    if traces.len() < 2 {
        return not(format!("need at least 2 traces, have {}", traces.len()));
    }
    if indicators.is_empty() {
        return not("no indicators given".into());
    }
    if window < 2 {
        return not(format!("window {window} is shorter than 2 records"));
    }
    let len = traces.common_length();
    if len < window {
        return not(format!("traces have {len} records, window needs {window}"));
    }
    let first = traces.traces.values().next().expect("at least two traces");
    let prefixes: Vec<Vec<Prefix>> = indicators
        .iter()
        .map(|o| {
            traces
                .traces
                .values()
                .map(|t| Prefix::new(&o.series(&t.records[..len])))
                .collect()
        })
        .collect();
    let errors: Vec<Vec<f64>> = prefixes
        .iter()
        .map(|per_trace| per_trace.iter().map(|p| p.window(len - window, window).1).collect())
        .collect();
    let mut means = Vec::with_capacity(traces.len());
    'start: for t in 0..=len - window {
        for (per_trace, errs) in prefixes.iter().zip(&errors) {
            means.clear();
            means.extend(per_trace.iter().map(|p| p.mean(t, window)));
            for (i, (&ma, &va)) in means.iter().zip(errs).enumerate() {
                for (&mb, &vb) in means[i + 1..].iter().zip(&errs[i + 1..]) {
                    if (ma - mb).abs() > k * (va + vb).sqrt() {
                        continue 'start;
                    }
                }
            }
        }
        return Thermalization::Thermalized {
            sweep: first.records[t].sweep,
            index: t,
        };
    }
    not(format!(
        "no window of {window} records agrees within {k} standard errors"
    ))
}

/// Conservative reuse: the thermalization time of the smallest measured
/// size not below `n`.
pub fn reuse_thermalization(n: usize, measured: &BTreeMap<usize, f64>) -> Option<f64> {
    measured.range(n..).next().map(|(_, &t)| t)
}

/// Empirical autocovariance `C(t)` for lags `0..=max_lag`, each lag averaged
/// over its `len − t` available products.
pub fn autocovariance(series: &[f64], max_lag: usize) -> Vec<f64> {
    let len = series.len();
    if len == 0 {
        return Vec::new();
    }
    let mean = series.iter().sum::<f64>() / len as f64;
    let d: Vec<f64> = series.iter().map(|x| x - mean).collect();
    (0..=max_lag.min(len - 1))
        .map(|t| {
            let s: f64 = d[..len - t].iter().zip(&d[t..]).map(|(a, b)| a * b).sum();
            s / (len - t) as f64
        })
        .collect()
}

/// Exponential fit `a·exp(−t/τ)` of an autocorrelation function.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayFit {
    pub amplitude: f64,
    pub amplitude_err: f64,
    pub tau: f64,
    pub tau_err: f64,
    /// Fitted lags, inclusive.
    pub window: (usize, usize),
    pub residual_norm: f64,
    /// False when the correlator reaches the noise floor within two lags or
    /// the fit degenerates; `tau` is then reported as 1.
    pub resolved: bool,
}

impl fmt::Display for DecayFit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.resolved {
            return write!(f, "tau unresolved, taken as 1");
        }
        write!(
            f,
            "tau = {:.4} +- {:.4}\na = {:.6} +- {:.6}\nwindow = {}..{}\nresidual_norm = {:.6e}",
            self.tau,
            self.tau_err,
            self.amplitude,
            self.amplitude_err,
            self.window.0,
            self.window.1,
            self.residual_norm
        )
    }
}

pub const MIN_SERIES_LAGS: usize = 10;

pub fn autocorrelation_time(series: &[f64]) -> Result<DecayFit> {
    autocorrelation_time_with_floor(series, DEFAULT_NOISE_FLOOR)
}

/// Fits `a·exp(−t/τ)` to the raw autocovariance by nonlinear least squares
/// over lags `1..=t_end`, where `t_end + 1` is the first lag whose
/// correlator drops below `floor · C(0)`.
pub fn autocorrelation_time_with_floor(series: &[f64], floor: f64) -> Result<DecayFit> {
    if series.len() < MIN_SERIES_LAGS {
        return Err(Error::InsufficientData(format!(
            "series of {} values is shorter than {MIN_SERIES_LAGS} lags",
            series.len()
        )));
    }
    let max_lag = series.len() / 2;
    let c = autocovariance(series, max_lag);
    let below = |c0: f64| {
        Ok(DecayFit {
            amplitude: c0,
            amplitude_err: 0.0,
            tau: 1.0,
            tau_err: 0.0,
            window: (1, 1),
            residual_norm: 0.0,
            resolved: false,
        })
    };
    if c[0] <= 0.0 {
        return below(0.0);
    }
    let threshold = floor * c[0];
    let end = (1..c.len()).find(|&t| c[t] < threshold).unwrap_or(c.len());
    if end <= 3 {
        return below(c[0]);
    }
    let lags: Vec<f64> = (1..end).map(|t| t as f64).collect();
    let ys = &c[1..end];
    let Some((a, tau, cov, rss)) = fit_decay(&lags, ys) else {
        return below(c[0]);
    };
    Ok(DecayFit {
        amplitude: a,
        amplitude_err: cov[0][0].max(0.0).sqrt(),
        tau,
        tau_err: cov[1][1].max(0.0).sqrt(),
        window: (1, end - 1),
        residual_norm: rss.sqrt(),
        resolved: true,
    })
}

type Cov = [[f64; 2]; 2];

fn solve2(m: Cov, v: [f64; 2]) -> Option<[f64; 2]> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if det.abs() <= f64::MIN_POSITIVE || !det.is_finite() {
        return None;
    }
    Some([
        (m[1][1] * v[0] - m[0][1] * v[1]) / det,
        (m[0][0] * v[1] - m[1][0] * v[0]) / det,
    ])
}

fn invert2(m: Cov) -> Option<Cov> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if det.abs() <= f64::MIN_POSITIVE || !det.is_finite() {
        return None;
    }
    Some([[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]])
}

/// Levenberg–Marquardt on `(a, τ)`, seeded by a log-linear fit of the
/// positive points. `None` when the fit collapses to a singular Jacobian.
fn fit_decay(ts: &[f64], ys: &[f64]) -> Option<(f64, f64, Cov, f64)> {
    let pos: Vec<(f64, f64)> = ts
        .iter()
        .zip(ys)
        .filter(|(_, &y)| y > 0.0)
        .map(|(&t, &y)| (t, y.ln()))
        .collect();
    let (mut a, mut tau) = match linear_fit(&pos, None) {
        Some(l) if l.slope < 0.0 => (l.intercept.exp(), -1.0 / l.slope),
        _ => (ys[0], 1.0),
    };
    let rss_at = |a: f64, tau: f64| -> f64 {
        ts.iter()
            .zip(ys)
            .map(|(&t, &y)| {
                let r = y - a * (-t / tau).exp();
                r * r
            })
            .sum()
    };
    let normal = |a: f64, tau: f64| -> (Cov, [f64; 2]) {
        let mut jtj = [[0.0; 2]; 2];
        let mut jtr = [0.0; 2];
        for (&t, &y) in ts.iter().zip(ys) {
            let e = (-t / tau).exp();
            let j = [e, a * e * t / (tau * tau)];
            let r = y - a * e;
            for i in 0..2 {
                jtr[i] += j[i] * r;
                for l in 0..2 {
                    jtj[i][l] += j[i] * j[l];
                }
            }
        }
        (jtj, jtr)
    };
    let mut rss = rss_at(a, tau);
    let mut lambda = 1e-3;
    for _ in 0..500 {
        let (jtj, jtr) = normal(a, tau);
        let mut improved = false;
        while lambda < 1e12 {
            let damped = [
                [jtj[0][0] * (1.0 + lambda), jtj[0][1]],
                [jtj[1][0], jtj[1][1] * (1.0 + lambda)],
            ];
            let Some(step) = solve2(damped, jtr) else {
                lambda *= 10.0;
                continue;
            };
            let (na, ntau) = (a + step[0], tau + step[1]);
            if ntau > 0.0 && ntau.is_finite() && na.is_finite() {
                let nrss = rss_at(na, ntau);
                if nrss <= rss {
                    let done = (rss - nrss) <= 1e-15 * rss.max(f64::MIN_POSITIVE) && step[1].abs() <= 1e-12 * tau;
                    a = na;
                    tau = ntau;
                    rss = nrss;
                    lambda = (lambda / 10.0).max(1e-12);
                    improved = !done;
                    break;
                }
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    let (jtj, _) = normal(a, tau);
    let dof = ts.len().saturating_sub(2).max(1) as f64;
    let s2 = rss / dof;
    let cov = invert2(jtj).map(|m| [[m[0][0] * s2, m[0][1] * s2], [m[1][0] * s2, m[1][1] * s2]])?;
    Some((a, tau, cov, rss))
}

struct LinearFit {
    intercept: f64,
    slope: f64,
    cov: Cov,
    rss: f64,
}

/// Weighted straight-line fit. Without weights the covariance is scaled by
/// the residual variance.
fn linear_fit(points: &[(f64, f64)], sigmas: Option<&[f64]>) -> Option<LinearFit> {
    if points.len() < 2 {
        return None;
    }
    let w = |i: usize| sigmas.map_or(1.0, |s| 1.0 / (s[i] * s[i]));
    let (mut s, mut sx, mut sy) = (0.0, 0.0, 0.0);
    for (i, &(x, y)) in points.iter().enumerate() {
        s += w(i);
        sx += w(i) * x;
        sy += w(i) * y;
    }
    let (xm, ym) = (sx / s, sy / s);
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (i, &(x, y)) in points.iter().enumerate() {
        sxx += w(i) * (x - xm) * (x - xm);
        sxy += w(i) * (x - xm) * (y - ym);
    }
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let rss: f64 = points
        .iter()
        .enumerate()
        .map(|(i, &(x, y))| {
            let r = y - intercept - slope * x;
            w(i) * r * r
        })
        .sum();
    let scale = if sigmas.is_some() {
        1.0
    } else if points.len() > 2 {
        rss / (points.len() - 2) as f64
    } else {
        0.0
    };
    let var_b = scale / sxx;
    let var_a = scale * (1.0 / s + xm * xm / sxx);
    let cov_ab = -scale * xm / sxx;
    Some(LinearFit {
        intercept,
        slope,
        cov: [[var_a, cov_ab], [cov_ab, var_b]],
        rss,
    })
}

/// Fit of `value = a·exp(b·n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthFit {
    pub ln_a: f64,
    pub ln_a_err: f64,
    pub b: f64,
    pub b_err: f64,
    pub covariance: f64,
    /// Range of `n` covered by the fit.
    pub window: (f64, f64),
    pub residual_norm: f64,
}

impl GrowthFit {
    pub fn law(&self) -> GrowthLaw {
        GrowthLaw {
            ln_a: self.ln_a,
            ln_a_err: self.ln_a_err,
            b: self.b,
            b_err: self.b_err,
        }
    }
}

impl fmt::Display for GrowthFit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "ln_a = {:.4} +- {:.4}\nb = {:.5} +- {:.5}\nwindow = {}..{}\nresidual_norm = {:.6e}",
            self.ln_a, self.ln_a_err, self.b, self.b_err, self.window.0, self.window.1, self.residual_norm
        )
    }
}

/// Least squares on `ln(value)` against `n`. `sigmas`, when given, are the
/// standard errors of the values themselves; the log-space weight of each
/// point is `(value/σ)²`.
pub fn growth_fit(points: &[(f64, f64)], sigmas: Option<&[f64]>) -> Result<GrowthFit> {
    if points.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "growth fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    if let Some(s) = sigmas {
        if s.len() != points.len() {
            return Err(Error::InvalidArgument(format!(
                "{} errors for {} points",
                s.len(),
                points.len()
            )));
        }
        if let Some(bad) = s.iter().find(|&&e| !e.is_finite() || e <= 0.0) {
            return Err(Error::InvalidArgument(format!("nonpositive error {bad}")));
        }
    }
    if let Some(&(n, v)) = points.iter().find(|&&(_, v)| !v.is_finite() || v <= 0.0) {
        return Err(Error::InvalidArgument(format!("nonpositive value {v} at n = {n}")));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(n, v)| (n, v.ln())).collect();
    let log_sigmas: Option<Vec<f64>> = sigmas.map(|s| s.iter().zip(points).map(|(e, &(_, v))| e / v).collect());
    let fit = linear_fit(&logs, log_sigmas.as_deref())
        .ok_or_else(|| Error::InvalidArgument("growth fit needs at least two distinct n".into()))?;
    let lo = logs.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = logs.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    Ok(GrowthFit {
        ln_a: fit.intercept,
        ln_a_err: fit.cov[0][0].max(0.0).sqrt(),
        b: fit.slope,
        b_err: fit.cov[1][1].max(0.0).sqrt(),
        covariance: fit.cov[0][1],
        window: (lo, hi),
        residual_norm: fit.rss.sqrt(),
    })
}

/// Sampling stride: every `⌈5τ/2⌉` sweeps for `n > 40`, every sweep below.
pub fn thinning_interval(n: usize, tau: f64) -> usize {
    if n > 40 && tau.is_finite() && tau > 0.0 {
        (2.5 * tau).ceil().max(1.0) as usize
    } else {
        1
    }
}

pub fn thin<T: Clone>(xs: &[T], stride: usize) -> Vec<T> {
    xs.iter().step_by(stride.max(1)).cloned().collect()
}

/// Binomial error bar `√(f(1−f)/(T−1))`.
pub fn frequency_error(f: f64, samples: usize) -> f64 {
    if samples < 2 {
        return f64::NAN;
    }
    (f * (1.0 - f) / (samples - 1) as f64).max(0.0).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistBin {
    /// Inclusive lower edge; equals `hi` for discrete values.
    pub lo: f64,
    pub hi: f64,
    pub count: u64,
    pub frequency: f64,
    pub error: f64,
}

impl HistBin {
    pub fn center(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistogramWithErrors {
    pub bins: Vec<HistBin>,
    pub samples: usize,
}

impl HistogramWithErrors {
    fn from_counts(counts: Vec<(f64, f64, u64)>, samples: usize) -> Self {
        let bins = counts
            .into_iter()
            .map(|(lo, hi, count)| {
                let f = count as f64 / samples as f64;
                HistBin {
                    lo,
                    hi,
                    count,
                    frequency: f,
                    error: frequency_error(f, samples),
                }
            })
            .collect();
        HistogramWithErrors { bins, samples }
    }

    /// Smallest resolvable nonzero frequency, `1/T`.
    pub fn resolution(&self) -> f64 {
        1.0 / self.samples as f64
    }

    pub fn total_frequency(&self) -> f64 {
        self.bins.iter().map(|b| b.frequency).sum()
    }

    /// Bin containing `x` (for discrete histograms, the bin equal to `x`).
    pub fn bin(&self, x: f64) -> Option<&HistBin> {
        self.bins
            .iter()
            .find(|b| if b.lo == b.hi { b.lo == x } else { b.lo <= x && x < b.hi })
    }

    pub fn frequency_of(&self, x: f64) -> f64 {
        self.bin(x).map_or(0.0, |b| b.frequency)
    }

    /// Bin with the largest count; the lowest one on ties.
    pub fn mode(&self) -> Option<&HistBin> {
        self.bins.iter().fold(None, |best: Option<&HistBin>, b| match best {
            Some(m) if m.count >= b.count => Some(m),
            _ => Some(b),
        })
    }

    /// Columns `value,f,err` for discrete histograms, `lo,hi,f,err` for
    /// binned ones.
    pub fn to_csv(&self) -> String {
        let discrete = self.bins.iter().all(|b| b.lo == b.hi);
        let mut out = String::from(if discrete { "value,f,err\n" } else { "lo,hi,f,err\n" });
        for b in &self.bins {
            if discrete {
                out.push_str(&format!("{},{},{}\n", b.lo, b.frequency, b.error));
            } else {
                out.push_str(&format!("{},{},{},{}\n", b.lo, b.hi, b.frequency, b.error));
            }
        }
        out
    }
}

/// Histogram over the distinct values of `samples` after taking every
/// `stride`-th one.
pub fn histogram_with_errors(samples: &[f64], stride: usize) -> Result<HistogramWithErrors> {
    let kept = thin(samples, stride);
    check_samples(&kept)?;
    let mut counts: BTreeMap<OrderedF64, u64> = BTreeMap::new();
    for &x in &kept {
        *counts.entry(OrderedF64(x)).or_default() += 1;
    }
    Ok(HistogramWithErrors::from_counts(
        counts.into_iter().map(|(k, c)| (k.0, k.0, c)).collect(),
        kept.len(),
    ))
}

/// Histogram of `samples` on bins `[lo + i·width, lo + (i+1)·width)`
/// spanning all kept samples, empty bins included.
pub fn binned_histogram(samples: &[f64], stride: usize, lo: f64, width: f64) -> Result<HistogramWithErrors> {
    if !width.is_finite() || width <= 0.0 {
        return Err(Error::InvalidArgument(format!("bin width {width} must be positive")));
    }
    let kept = thin(samples, stride);
    check_samples(&kept)?;
    let index = |x: f64| ((x - lo) / width).floor() as i64;
    let first = kept.iter().map(|&x| index(x)).min().expect("nonempty").min(0);
    let last = kept.iter().map(|&x| index(x)).max().expect("nonempty");
    let mut counts = vec![0u64; (last - first + 1) as usize];
    for &x in &kept {
        counts[(index(x) - first) as usize] += 1;
    }
    Ok(HistogramWithErrors::from_counts(
        counts
            .into_iter()
            .enumerate()
            .map(|(i, c)| {
                let e = lo + (first + i as i64) as f64 * width;
                (e, e + width, c)
            })
            .collect(),
        kept.len(),
    ))
}

fn check_samples(kept: &[f64]) -> Result<()> {
    if kept.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} samples after thinning, need at least 2",
            kept.len()
        )));
    }
    if let Some(x) = kept.iter().find(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument(format!("non-finite sample {x}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct OrderedF64(f64);

impl Eq for OrderedF64 {}

impl PartialOrd for OrderedF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrderedF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanWithError {
    pub mean: f64,
    pub error: f64,
    pub samples: usize,
}

impl fmt::Display for MeanWithError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} +- {}", self.mean, self.error)
    }
}

/// Mean of every `stride`-th value with error `s/√T`.
pub fn mean_with_error(series: &[f64], stride: usize) -> Result<MeanWithError> {
    let kept = thin(series, stride);
    if kept.is_empty() {
        return Err(Error::InsufficientData("empty series".into()));
    }
    let t = kept.len() as f64;
    let mean = kept.iter().sum::<f64>() / t;
    let error = if kept.len() < 2 {
        0.0
    } else {
        let var = kept.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (t - 1.0);
        (var / t).sqrt()
    };
    Ok(MeanWithError {
        mean,
        error,
        samples: kept.len(),
    })
}

fn log2_factorial(k: usize) -> f64 {
    (2..=k).map(|i| (i as f64).log2()).sum()
}

/// `log₂` of the estimated number of naturally labeled orders with three
/// layers of sizes `(n1, n2, n3)`: `η² · n2! · 2^{n2(n−n2)}`. The finite-size
/// constants are replaced by their asymptote, so the estimate leans high.
pub fn kr_estimate(n: usize, n1: usize, n2: usize, n3: usize) -> Result<f64> {
    if n1 + n2 + n3 != n {
        return Err(Error::InvalidArgument(format!(
            "layer sizes {n1} + {n2} + {n3} do not sum to {n}"
        )));
    }
    Ok(2.0 * ETA.log2() + log2_factorial(n2) + (n2 * (n - n2)) as f64)
}

/// Middle-layer size maximizing the exponential factor `2^{n2(n−n2)}`.
pub fn kr_middle_layer(n: usize) -> usize {
    n / 2
}

/// Middle-layer size maximizing the full estimate, factorial included.
pub fn kr_estimate_argmax(n: usize) -> usize {
    (0..=n)
        .max_by(|&a, &b| {
            let ea = kr_estimate(n, 0, a, n - a).expect("valid partition");
            let eb = kr_estimate(n, 0, b, n - b).expect("valid partition");
            ea.total_cmp(&eb)
        })
        .unwrap_or(0)
}

/// Ordering fraction of a large three-layer order whose bottom layer holds a
/// fraction `u` of the non-middle elements: `1/4 + u(1−u)/2`.
pub fn kr_ordering_fraction(u: f64) -> f64 {
    0.25 + 0.5 * u * (1.0 - u)
}

/// Density of `r` when `u` is uniform on `[0, 1]`: `4/√(3 − 8r)` on
/// `[1/4, 3/8)`, zero elsewhere.
pub fn kr_ordering_fraction_density(r: f64) -> f64 {
    if (0.25..0.375).contains(&r) {
        4.0 / (3.0 - 8.0 * r).sqrt()
    } else {
        0.0
    }
}

pub const KR_MEAN_ORDERING_FRACTION: f64 = 1.0 / 3.0;

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(sweep: u64, minimal: usize, r: f64) -> ObservableRecord {
        ObservableRecord {
            sweep,
            height: 1,
            relations: 0,
            links: 0,
            ordering_fraction: r,
            linking_fraction: 0.0,
            minimal,
            maximal: minimal,
            level_sizes: vec![minimal],
            chi: ChiValue::Layered,
            interval_hist: None,
        }
    }

    #[test]
    fn constant_traces_thermalize_at_zero() {
        let mut ts = TraceSet::new(4, 128);
        for s in StartKind::ALL {
            ts.insert(s.name(), s, (0..100).map(|i| rec(i, 2, 0.5)).collect());
        }
        let t = thermalization_estimate(&ts, &[Observable::MinimalCount, Observable::OrderingFraction], 10, 3.0);
        assert_eq!(t, Thermalization::Thermalized { sweep: 0, index: 0 });
    }

    #[test]
    fn short_or_single_traces_are_not_thermalized() {
        let mut ts = TraceSet::new(4, 128);
        ts.insert("a", StartKind::Chain, (0..5).map(|i| rec(i, 2, 0.5)).collect());
        let ind = [Observable::MinimalCount];
        assert!(thermalization_estimate(&ts, &ind, 3, 3.0).sweep().is_none());
        ts.insert("b", StartKind::Antichain, (0..5).map(|i| rec(i, 2, 0.5)).collect());
        assert!(thermalization_estimate(&ts, &ind, 10, 3.0).sweep().is_none());
        assert_eq!(thermalization_estimate(&ts, &ind, 3, 3.0).sweep(), Some(0));
    }

    #[test]
    fn distinct_constants_never_agree() {
        let mut ts = TraceSet::new(4, 128);
        ts.insert("a", StartKind::Chain, (0..50).map(|i| rec(i, 1, 0.5)).collect());
        ts.insert("b", StartKind::Antichain, (0..50).map(|i| rec(i, 2, 0.5)).collect());
        let t = thermalization_estimate(&ts, &[Observable::MinimalCount], 5, 3.0);
        assert!(matches!(t, Thermalization::NotThermalized { .. }));
    }

    #[test]
    fn reuse_takes_smallest_measured_size_above() {
        let m: BTreeMap<usize, f64> = [(40, 10.0), (50, 30.0), (60, 100.0)].into();
        assert_eq!(reuse_thermalization(45, &m), Some(30.0));
        assert_eq!(reuse_thermalization(50, &m), Some(30.0));
        assert_eq!(reuse_thermalization(61, &m), None);
    }

    #[test]
    fn autocovariance_of_alternating_series() {
        let xs: Vec<f64> = (0..100).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let c = autocovariance(&xs, 2);
        assert!((c[0] - 1.0).abs() < 1e-12);
        assert!((c[1] + 1.0).abs() < 1e-12);
        assert!((c[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn decay_fit_is_exact_on_noiseless_exponential() {
        let ts: Vec<f64> = (1..30).map(|t| t as f64).collect();
        let ys: Vec<f64> = ts.iter().map(|t| 2.5 * (-t / 7.0f64).exp()).collect();
        let (a, tau, _, rss) = fit_decay(&ts, &ys).unwrap();
        assert!((a - 2.5).abs() < 1e-9);
        assert!((tau - 7.0).abs() < 1e-9);
        assert!(rss < 1e-20);
    }

    #[test]
    fn alternating_series_is_below_resolution() {
        let xs: Vec<f64> = (0..100).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        assert!(!autocorrelation_time(&xs).unwrap().resolved);
        assert!(autocorrelation_time(&xs[..9]).is_err());
    }

    #[test]
    fn growth_fit_rejects_bad_input() {
        assert!(growth_fit(&[(1.0, 1.0), (2.0, 2.0)], None).is_err());
        assert!(growth_fit(&[(1.0, 1.0), (2.0, 0.0), (3.0, 2.0)], None).is_err());
        assert!(growth_fit(&[(1.0, 1.0), (2.0, -1.0), (3.0, 2.0)], None).is_err());
        assert!(growth_fit(&[(1.0, 1.0), (1.0, 2.0), (1.0, 3.0)], None).is_err());
    }

    #[test]
    fn growth_fit_noiseless() {
        let pts: Vec<(f64, f64)> = (40..70)
            .step_by(5)
            .map(|n| (n as f64, (-11.4 + 0.314 * n as f64).exp()))
            .collect();
        let f = growth_fit(&pts, None).unwrap();
        assert!((f.ln_a + 11.4).abs() < 1e-10);
        assert!((f.b - 0.314).abs() < 1e-12);
        assert!(f.b_err < 1e-10);
    }

    #[test]
    fn histogram_of_equal_samples() {
        let h = histogram_with_errors(&[4.0; 10], 1).unwrap();
        assert_eq!(h.bins.len(), 1);
        assert_eq!(h.bins[0].frequency, 1.0);
        assert_eq!(h.bins[0].error, 0.0);
        assert_eq!(h.samples, 10);
    }

    #[test]
    fn histogram_error_formula() {
        let xs: Vec<f64> = (0..10_000).map(|i| (i % 2) as f64).collect();
        let h = histogram_with_errors(&xs, 1).unwrap();
        assert_eq!(h.bins[0].frequency, 0.5);
        assert_eq!(h.bins[0].error, (0.25f64 / 9999.0).sqrt());
        assert!((h.bins[0].error - 0.005).abs() < 1e-6);
        assert_eq!(h.resolution(), 1e-4);
    }

    #[test]
    fn histogram_rejects_empty_and_single() {
        assert!(histogram_with_errors(&[], 1).is_err());
        assert!(histogram_with_errors(&[1.0, 2.0, 3.0], 5).is_err());
    }

    #[test]
    fn thinning_keeps_every_stride() {
        let xs: Vec<f64> = (0..10).map(f64::from).collect();
        assert_eq!(thin(&xs, 3), vec![0.0, 3.0, 6.0, 9.0]);
        assert_eq!(thinning_interval(30, 100.0), 1);
        assert_eq!(thinning_interval(58, 157.0), 393);
        assert_eq!(thinning_interval(58, 0.3), 1);
    }

    #[test]
    fn binned_histogram_edges() {
        let h = binned_histogram(&[0.30, 0.31, 0.37, 0.371], 1, 0.0, 0.01).unwrap();
        assert_eq!(h.bins.first().unwrap().lo, 0.0);
        assert!((h.total_frequency() - 1.0).abs() < 1e-12);
        let m = h.mode().unwrap();
        assert!((m.lo - 0.37).abs() < 1e-9);
        assert_eq!(m.count, 2);
    }

    #[test]
    fn mean_of_constant() {
        let m = mean_with_error(&[3.0; 50], 1).unwrap();
        assert_eq!((m.mean, m.error), (3.0, 0.0));
        assert!(mean_with_error(&[], 1).is_err());
    }

    #[test]
    fn kr_estimate_values() {
        let e = kr_estimate(8, 2, 4, 2).unwrap();
        let expect = 2.0 * 3.4627f64.log2() + 24f64.log2() + 16.0;
        assert!((e - expect).abs() < 1e-12);
        assert!((e - 24.16876).abs() < 1e-4);
        assert_eq!(kr_estimate(8, 1, 4, 3).unwrap(), kr_estimate(8, 3, 4, 1).unwrap());
        assert!(kr_estimate(8, 1, 4, 2).is_err());
    }

    #[test]
    fn kr_middle_layer_is_half() {
        for n in [10usize, 31, 58, 80] {
            let m = kr_middle_layer(n);
            let best = (0..=n).max_by_key(|&k| k * (n - k)).unwrap();
            assert_eq!(m * (n - m), best * (n - best));
            let full = kr_estimate_argmax(n) as f64;
            assert!(full >= m as f64 && full <= n as f64 / 2.0 + (n as f64).log2() / 2.0 + 1.0);
        }
    }

    #[test]
    fn kr_density_normalized_with_mean_one_third() {
        let steps = 200_000;
        let (lo, hi) = (0.25, 0.375);
        let h = (hi - lo) / steps as f64;
        // midpoint rule copes with the integrable endpoint singularity
        let (mut mass, mut first) = (0.0, 0.0);
        for i in 0..steps {
            let r = lo + (i as f64 + 0.5) * h;
            let p = kr_ordering_fraction_density(r);
            mass += p * h;
            first += r * p * h;
        }
        assert!((mass - 1.0).abs() < 5e-3);
        assert!((first / mass - KR_MEAN_ORDERING_FRACTION).abs() < 1e-3);
        assert_eq!(kr_ordering_fraction(0.5), 0.375);
        assert_eq!(kr_ordering_fraction(0.0), 0.25);
    }
}
