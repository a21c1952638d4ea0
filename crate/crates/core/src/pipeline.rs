//! End-to-end pipelines behind the `validate` and `analyze` commands.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use crate::analysis::{self, DecayFit, HistogramWithErrors, MeanWithError, Observable, Thermalization, TraceSet};
use crate::chain::{self, Chain};
use crate::enumeration::{self, ExactDistribution, ExactObservable};
use crate::error::{Error, Result};
use crate::moves::{self, MoveMix, SweepStats};
use crate::observables::{self, ObservableRecord};
use crate::poset::StartKind;

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationOptions {
    pub n: usize,
    pub samples: usize,
    pub seed: u64,
    pub burn_in: u64,
    pub moves_per_sweep: u64,
    pub mix: MoveMix,
    pub start: StartKind,
    /// Bins whose exact fraction is below this are not compared. Defaults
    /// to `10 / samples`.
    pub min_fraction: Option<f64>,
    pub sigmas: f64,
}

impl ValidationOptions {
    pub fn new(n: usize, samples: usize, seed: u64) -> Self {
        ValidationOptions {
            n,
            samples,
            seed,
            burn_in: 100,
            moves_per_sweep: moves::default_moves_per_sweep(n),
            mix: MoveMix::Mixed,
            start: StartKind::Chain,
            min_fraction: None,
            sigmas: 3.0,
        }
    }

    pub fn threshold(&self) -> f64 {
        self.min_fraction.unwrap_or(10.0 / self.samples as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinCheck {
    pub value: u64,
    pub exact: f64,
    pub measured: f64,
    pub error: f64,
    /// `|measured − exact| / error`; infinite when the error bar is zero
    /// and the two differ.
    pub deviation: f64,
    pub checked: bool,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservableCheck {
    pub observable: ExactObservable,
    pub bins: Vec<BinCheck>,
}

impl ObservableCheck {
    pub fn passed(&self) -> bool {
        self.bins.iter().all(|b| b.passed)
    }

    /// Checked bin with the largest deviation.
    pub fn worst(&self) -> Option<&BinCheck> {
        self.bins
            .iter()
            .filter(|b| b.checked)
            .max_by(|a, b| a.deviation.total_cmp(&b.deviation))
    }
}

/// Compares measured values against an exact distribution. Bins with exact
/// fraction at least `threshold` must lie within `sigmas` error bars, and
/// any measured value the exact distribution never takes fails outright.
pub fn compare_to_exact(
    exact: &ExactDistribution,
    measured: &[u64],
    threshold: f64,
    sigmas: f64,
) -> Result<ObservableCheck> {
    let t = measured.len();
    if t < 2 {
        return Err(Error::InsufficientData(format!("{t} samples, need at least 2")));
    }
    let mut counts: BTreeMap<u64, u64> = BTreeMap::new();
    for &v in measured {
        *counts.entry(v).or_default() += 1;
    }
    let mut values: Vec<u64> = exact.counts.keys().chain(counts.keys()).copied().collect();
    values.sort_unstable();
    values.dedup();
    let bins = values
        .into_iter()
        .map(|value| {
            let e = exact.fraction(value);
            let m = counts.get(&value).copied().unwrap_or(0) as f64 / t as f64;
            let error = analysis::frequency_error(m, t);
            let diff = (m - e).abs();
            let deviation = if diff == 0.0 {
                0.0
            } else if error > 0.0 {
                diff / error
            } else {
                f64::INFINITY
            };
            let impossible = e == 0.0 && m > 0.0;
            let checked = e >= threshold || impossible;
            BinCheck {
                value,
                exact: e,
                measured: m,
                error,
                deviation,
                checked,
                passed: !checked || (!impossible && deviation <= sigmas),
            }
        })
        .collect();
    Ok(ObservableCheck {
        observable: exact.observable,
        bins,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub options: ValidationOptions,
    pub stats: SweepStats,
    pub checks: Vec<ObservableCheck>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(ObservableCheck::passed)
    }

    pub fn worst(&self) -> Option<(&'static str, &BinCheck)> {
        self.checks
            .iter()
            .filter_map(|c| c.worst().map(|b| (c.observable.name(), b)))
            .max_by(|a, b| a.1.deviation.total_cmp(&b.1.deviation))
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let o = &self.options;
        writeln!(
            f,
            "n = {}, samples = {}, seed = {}, mix = {}, threshold = {:.3e}, tolerance = {} sigma",
            o.n,
            o.samples,
            o.seed,
            o.mix.name(),
            o.threshold(),
            o.sigmas
        )?;
        writeln!(f, "acceptance rate = {:.4}", self.stats.acceptance_rate())?;
        for c in &self.checks {
            writeln!(f, "{}:", c.observable.name())?;
            writeln!(f, "  value      exact   measured      error  deviation")?;
            for b in &c.bins {
                let mark = match (b.checked, b.passed) {
                    (false, _) => " (unchecked)",
                    (true, true) => "",
                    (true, false) => " FAIL",
                };
                writeln!(
                    f,
                    "  {:>5} {:>10.6} {:>10.6} {:>10.6} {:>10.3}{mark}",
                    b.value, b.exact, b.measured, b.error, b.deviation
                )?;
            }
        }
        if let Some((name, b)) = self.worst() {
            writeln!(f, "worst bin: {name} = {} at {:.3} sigma", b.value, b.deviation)?;
        }
        write!(f, "{}", if self.passed() { "PASS" } else { "FAIL" })
    }
}

/// Runs one chain, samples every sweep after the burn-in, and compares the
/// relation-count and height histograms with exact enumeration.
pub fn validate(options: &ValidationOptions) -> Result<ValidationReport> {
    let exact = enumeration::exact_distributions(
        options.n,
        &[ExactObservable::Relations, ExactObservable::Height],
        enumeration::DEFAULT_BOUND,
    )?;
    validate_against(options, &exact)
}

/// As [`validate`], with precomputed exact distributions of `R` and height.
pub fn validate_against(options: &ValidationOptions, exact: &[ExactDistribution]) -> Result<ValidationReport> {
    if options.samples < 2 {
        return Err(Error::InvalidArgument("samples: need at least 2".into()));
    }
    let mut chain = Chain::new(options.n, options.seed, options.start, 0)?;
    let h0 = observables::default_h0(options.n);
    for _ in 0..options.burn_in {
        chain.advance(options.moves_per_sweep, options.mix)?;
    }
    let before = chain.stats();
    let records = chain::sample(&mut chain, 0, options.samples, options.moves_per_sweep, options.mix, h0)?;
    let stats = chain.stats() - before;
    let checks = exact
        .iter()
        .map(|d| {
            let values: Vec<u64> = records
                .iter()
                .map(|r| match d.observable {
                    ExactObservable::Height => r.height as u64,
                    ExactObservable::Relations => r.relations as u64,
                    ExactObservable::MinimalCount => r.minimal as u64,
                    ExactObservable::MaximalCount => r.maximal as u64,
                    ExactObservable::Chi { .. } => r.chi.code(),
                })
                .collect();
            compare_to_exact(d, &values, options.threshold(), options.sigmas)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ValidationReport {
        options: options.clone(),
        stats,
        checks,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyzeOptions {
    /// Thermalization window as a fraction of the trace length.
    pub window_fraction: f64,
    pub k: f64,
    /// Discard this many sweeps instead of estimating the thermalization.
    pub therm_override: Option<u64>,
    /// Use this autocorrelation time (sweeps) instead of fitting one.
    pub tau_override: Option<f64>,
    pub r_bin_width: f64,
    pub level2_bin_width: f64,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        AnalyzeOptions {
            window_fraction: 0.1,
            k: analysis::DEFAULT_THERMALIZATION_K,
            therm_override: None,
            tau_override: None,
            r_bin_width: 0.005,
            level2_bin_width: 0.02,
        }
    }
}

pub const THERMALIZATION_INDICATORS: [Observable; 2] = [Observable::MinimalCount, Observable::OrderingFraction];

#[derive(Debug, Clone, PartialEq)]
pub struct RunAnalysis {
    pub n: usize,
    pub thermalization: Thermalization,
    /// Sweeps discarded from every trace.
    pub discarded: u64,
    /// Largest fitted autocorrelation time, per indicator and trace.
    pub tau: Option<DecayFit>,
    pub tau_used: f64,
    /// Stride in records between kept samples.
    pub stride: usize,
    pub samples: usize,
    pub height: HistogramWithErrors,
    pub ordering_fraction: HistogramWithErrors,
    pub minimal: HistogramWithErrors,
    pub maximal: HistogramWithErrors,
    pub asymmetry: HistogramWithErrors,
    /// Level-2 size over `n`, for height-3 orders only; `None` without any.
    pub level2: Option<HistogramWithErrors>,
    pub chi: HistogramWithErrors,
    pub mean_height: MeanWithError,
    pub mean_r: MeanWithError,
}

impl RunAnalysis {
    pub fn height_fraction(&self, h: usize) -> (f64, f64) {
        match self.height.bin(h as f64) {
            Some(b) => (b.frequency, b.error),
            None => (0.0, 0.0),
        }
    }

    pub fn report(&self) -> String {
        let tau = match &self.tau {
            Some(f) => f.to_string(),
            None => format!("tau = {} (given)", self.tau_used),
        };
        format!(
            "n = {}\nthermalization = {}\ndiscarded_sweeps = {}\n{tau}\nstride = {}\nsamples = {}\nmean_height = {}\nmean_r = {}\n",
            self.n, self.thermalization, self.discarded, self.stride, self.samples, self.mean_height, self.mean_r
        )
    }
}

fn pooled(set: &TraceSet, from: u64, stride: usize) -> Vec<&ObservableRecord> {
    let mut out = Vec::new();
    for t in set.traces.values() {
        let kept: Vec<&ObservableRecord> = t.records.iter().filter(|r| r.sweep >= from).collect();
        out.extend(kept.into_iter().step_by(stride.max(1)));
    }
    out
}

/// Thermalization, autocorrelation, thinning, histograms and means for the
/// traces of one run.
pub fn analyze_traces(set: &TraceSet, options: &AnalyzeOptions) -> Result<RunAnalysis> {
    if set.is_empty() {
        return Err(Error::InsufficientData("no traces".into()));
    }
    for (label, t) in &set.traces {
        if t.records.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "trace `{label}` has {} records",
                t.records.len()
            )));
        }
    }
    let len = set.common_length();
    let window = ((len as f64 * options.window_fraction).round() as usize).max(2);
    let thermalization = analysis::thermalization_estimate(set, &THERMALIZATION_INDICATORS, window, options.k);
    let discarded = match (options.therm_override, &thermalization) {
        (Some(t), _) => t,
        (None, Thermalization::Thermalized { sweep, .. }) => *sweep,
        (None, Thermalization::NotThermalized { reason }) => {
            return Err(Error::InsufficientData(format!(
                "traces are not thermalized ({reason}); give the discarded sweeps explicitly"
            )))
        }
    };
    let interval = record_interval(set);
    let (tau, tau_used) = match options.tau_override {
        Some(t) => (None, t),
        None => {
            let mut best: Option<DecayFit> = None;
            for t in set.traces.values() {
                let kept: Vec<ObservableRecord> = t.records.iter().filter(|r| r.sweep >= discarded).cloned().collect();
                for o in THERMALIZATION_INDICATORS {
                    let fit = analysis::autocorrelation_time(&o.series(&kept))?;
                    if best.as_ref().is_none_or(|b| fit.tau > b.tau) {
                        best = Some(fit);
                    }
                }
            }
            let fit = best.expect("at least one trace");
            let t = fit.tau * interval as f64;
            (Some(fit), t)
        }
    };
    let stride_sweeps = analysis::thinning_interval(set.n, tau_used) as u64;
    let stride = stride_sweeps.div_ceil(interval).max(1) as usize;
    let kept = pooled(set, discarded, stride);
    let series = |o: Observable| -> Vec<f64> { kept.iter().map(|r| o.value(r)).collect() };
    let hist = |o: Observable| analysis::histogram_with_errors(&series(o), 1);
    let level2: Vec<f64> = kept
        .iter()
        .filter(|r| r.height == 3)
        .map(|r| Observable::LevelSize(2).value(r) / set.n as f64)
        .collect();
    Ok(RunAnalysis {
        n: set.n,
        thermalization,
        discarded,
        tau,
        tau_used,
        stride,
        samples: kept.len(),
        height: hist(Observable::Height)?,
        ordering_fraction: analysis::binned_histogram(
            &series(Observable::OrderingFraction),
            1,
            0.0,
            options.r_bin_width,
        )?,
        minimal: hist(Observable::MinimalCount)?,
        maximal: hist(Observable::MaximalCount)?,
        asymmetry: hist(Observable::Asymmetry)?,
        level2: if level2.len() >= 2 {
            Some(analysis::binned_histogram(&level2, 1, 0.0, options.level2_bin_width)?)
        } else {
            None
        },
        chi: hist(Observable::Layered)?,
        mean_height: analysis::mean_with_error(&series(Observable::Height), 1)?,
        mean_r: analysis::mean_with_error(&series(Observable::OrderingFraction), 1)?,
    })
}

/// Sweeps between consecutive records, from the first trace.
fn record_interval(set: &TraceSet) -> u64 {
    set.traces
        .values()
        .find_map(|t| match t.records.as_slice() {
            [a, b, ..] => Some(b.sweep.saturating_sub(a.sweep).max(1)),
            _ => None,
        })
        .unwrap_or(1)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Analyzes every run directory and writes the plot data into `out`:
/// `heights_vs_n.dat`, `mean_r_vs_n.dat`, `chi_fraction.dat`, and per-n
/// `r_hist_n<n>.csv`, `asym_hist_n<n>.csv`, `nmin_hist_n<n>.csv`,
/// `nmax_hist_n<n>.csv`, `level2_hist_n<n>.csv`, `fit_n<n>.txt`. With
/// `gnuplot` set, a `plots.gp` script is written next to them.
pub fn analyze_dirs(dirs: &[PathBuf], out: &Path, options: &AnalyzeOptions, gnuplot: bool) -> Result<Vec<RunAnalysis>> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut results = Vec::new();
    for dir in dirs {
        let (_, set) = chain::read_run(dir).map_err(|e| match e {
            Error::InsufficientData(m) => Error::InsufficientData(format!("{}: {m}", dir.display())),
            other => other,
        })?;
        let a =
            analyze_traces(&set, options).map_err(|e| Error::InsufficientData(format!("{}: {e}", dir.display())))?;
        results.push(a);
    }
    results.sort_by_key(|a| a.n);
    let max_h = results
        .iter()
        .filter_map(|a| a.height.bins.last().map(|b| b.lo as usize))
        .max()
        .unwrap_or(1);
    let mut heights = String::from("# n");
    for h in 1..=max_h {
        heights.push_str(&format!(" f_h{h} err_h{h}"));
    }
    heights.push('\n');
    let mut means = String::from("# n mean_r err_r mean_height err_height\n");
    let mut chi = String::from("# n f_layered err_layered f_not_layered err_not_layered\n");
    for a in &results {
        heights.push_str(&a.n.to_string());
        for h in 1..=max_h {
            let (f, e) = a.height_fraction(h);
            heights.push_str(&format!(" {f} {e}"));
        }
        heights.push('\n');
        means.push_str(&format!(
            "{} {} {} {} {}\n",
            a.n, a.mean_r.mean, a.mean_r.error, a.mean_height.mean, a.mean_height.error
        ));
        let l = a.chi.bin(1.0).map_or((0.0, 0.0), |b| (b.frequency, b.error));
        chi.push_str(&format!("{} {} {} {} {}\n", a.n, l.0, l.1, 1.0 - l.0, l.1));
        let n = a.n;
        write_file(&out.join(format!("r_hist_n{n}.csv")), &a.ordering_fraction.to_csv())?;
        write_file(&out.join(format!("asym_hist_n{n}.csv")), &a.asymmetry.to_csv())?;
        write_file(&out.join(format!("nmin_hist_n{n}.csv")), &a.minimal.to_csv())?;
        write_file(&out.join(format!("nmax_hist_n{n}.csv")), &a.maximal.to_csv())?;
        write_file(&out.join(format!("height_hist_n{n}.csv")), &a.height.to_csv())?;
        if let Some(l2) = &a.level2 {
            write_file(&out.join(format!("level2_hist_n{n}.csv")), &l2.to_csv())?;
        }
        write_file(&out.join(format!("fit_n{n}.txt")), &a.report())?;
    }
    write_file(&out.join("heights_vs_n.dat"), &heights)?;
    write_file(&out.join("mean_r_vs_n.dat"), &means)?;
    write_file(&out.join("chi_fraction.dat"), &chi)?;
    if gnuplot {
        write_file(&out.join("plots.gp"), &gnuplot_script(&results, max_h))?;
    }
    Ok(results)
}

fn gnuplot_script(results: &[RunAnalysis], max_h: usize) -> String {
    let mut s = String::from("set datafile separator whitespace\nset terminal pngcairo size 800,600\n\n");
    s.push_str("set output 'heights_vs_n.png'\nset xlabel 'n'\nset ylabel 'fraction'\nplot \\\n");
    let lines: Vec<String> = (1..=max_h)
        .map(|h| {
            format!(
                "  'heights_vs_n.dat' using 1:{}:{} with yerrorlines title 'h={h}'",
                2 * h,
                2 * h + 1
            )
        })
        .collect();
    s.push_str(&lines.join(", \\\n"));
    s.push_str("\n\nset output 'mean_r_vs_n.png'\nset ylabel '<r>'\nplot 'mean_r_vs_n.dat' using 1:2:3 with yerrorbars title '<r>', 1.0/3 title '1/3'\n");
    s.push_str("\nset output 'chi_fraction.png'\nset ylabel 'fraction'\nplot 'chi_fraction.dat' using 1:2:3 with yerrorlines title 'chi=1', '' using 1:4:5 with yerrorlines title 'chi=0'\n");
    s.push_str("\nset datafile separator ','\n");
    for a in results {
        let n = a.n;
        s.push_str(&format!(
            "\nset output 'r_hist_n{n}.png'\nset xlabel 'r'\nplot 'r_hist_n{n}.csv' every ::1 using (($1+$2)/2):3:4 with yerrorbars title 'n={n}'\n"
        ));
        s.push_str(&format!(
            "\nset output 'asym_hist_n{n}.png'\nset xlabel 'N_max - N_min'\nplot 'asym_hist_n{n}.csv' every ::1 using 1:2:3 with yerrorbars title 'n={n}'\n"
        ));
        if a.level2.is_some() {
            s.push_str(&format!(
                "\nset output 'level2_hist_n{n}.png'\nset xlabel '|level 2| / n'\nplot 'level2_hist_n{n}.csv' every ::1 using (($1+$2)/2):3:4 with yerrorbars title 'n={n}'\n"
            ));
        }
    }
    s
}
