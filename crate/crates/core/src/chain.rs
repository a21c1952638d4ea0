//! Seeded chains from the standard starts, trace files, checkpoints and the
//! run manifest.
//!
//! A run directory holds `manifest.txt`, one `trace_<label>.csv` per chain
//! and one `checkpoint_<label>.txt` per chain. Every chain draws from its
//! own split stream of the master seed, so the directory can be rebuilt
//! from the manifest alone.

use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use crate::analysis::TraceSet;
use crate::error::{Error, Result};
use crate::moves::{self, MoveMix, SweepStats};
use crate::observables::{self, ObservableRecord, TRACE_HEADER};
use crate::poset::{Poset, StartKind};
use crate::rng::{RandomStream, StreamState};

pub const MANIFEST_FILE: &str = "manifest.txt";
pub const DEFAULT_CHECKPOINT_EVERY: u64 = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub n: usize,
    pub seed: u64,
    pub starts: Vec<StartKind>,
    /// Independent replicas per start.
    pub chains: usize,
    pub sweeps: u64,
    pub moves_per_sweep: u64,
    pub record_interval: u64,
    pub intervals: bool,
    pub h0: usize,
    pub mix: MoveMix,
    pub checkpoint_every: u64,
    pub out_dir: PathBuf,
}

impl RunConfig {
    pub fn new(n: usize, seed: u64, sweeps: u64) -> Self {
        RunConfig {
            n,
            seed,
            starts: StartKind::ALL.to_vec(),
            chains: 1,
            sweeps,
            moves_per_sweep: moves::default_moves_per_sweep(n),
            record_interval: 1,
            intervals: false,
            h0: observables::default_h0(n),
            mix: MoveMix::Mixed,
            checkpoint_every: DEFAULT_CHECKPOINT_EVERY,
            out_dir: PathBuf::from("."),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, why: &str| Err(Error::InvalidArgument(format!("{field}: {why}")));
        if self.n < 2 {
            return bad("n", "must be at least 2");
        }
        if self.starts.is_empty() {
            return bad("starts", "at least one start is required");
        }
        let mut seen = self.starts.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.starts.len() {
            return bad("starts", "duplicate start kind");
        }
        if self.chains == 0 {
            return bad("chains", "must be positive");
        }
        if self.sweeps == 0 {
            return bad("sweeps", "must be positive");
        }
        if self.moves_per_sweep == 0 {
            return bad("moves_per_sweep", "must be positive");
        }
        if self.record_interval == 0 {
            return bad("record_interval", "must be positive");
        }
        if self.h0 == 0 {
            return bad("h0", "must be positive");
        }
        if self.checkpoint_every == 0 {
            return bad("checkpoint_every", "must be positive");
        }
        Ok(())
    }

    /// Hash of every setting that shapes a chain's trajectory or trace rows.
    /// The sweep count is excluded so a finished run can be extended.
    pub fn trajectory_hash(&self) -> u64 {
        let key = format!(
            "n={};seed={};chains={};moves_per_sweep={};record_interval={};intervals={};h0={};mix={}",
            self.n,
            self.seed,
            self.chains,
            self.moves_per_sweep,
            self.record_interval,
            self.intervals,
            self.h0,
            self.mix.name()
        );
        fnv1a(key.as_bytes())
    }

    /// Sets one field from its manifest key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = || Error::InvalidArgument(format!("{key}: bad value `{value}`"));
        fn num<T: FromStr>(v: &str, e: impl Fn() -> Error) -> Result<T> {
            v.trim().replace('_', "").parse().map_err(|_| e())
        }
        match key {
            "n" => self.n = num(value, bad)?,
            "seed" => self.seed = parse_seed(value).ok_or_else(bad)?,
            "starts" => self.starts = parse_starts(value)?,
            "chains" => self.chains = num(value, bad)?,
            "sweeps" => self.sweeps = num(value, bad)?,
            "moves_per_sweep" => self.moves_per_sweep = num(value, bad)?,
            "record_interval" => self.record_interval = num(value, bad)?,
            "intervals" => self.intervals = num(value, bad)?,
            "h0" => self.h0 = num(value, bad)?,
            "mix" => self.mix = value.trim().parse()?,
            "checkpoint_every" => self.checkpoint_every = num(value, bad)?,
            "out" | "out_dir" => self.out_dir = PathBuf::from(value.trim()),
            _ => return Err(Error::InvalidArgument(format!("unknown setting `{key}`"))),
        }
        Ok(())
    }

    pub fn labels(&self) -> Vec<(String, StartKind, usize)> {
        let mut v = Vec::new();
        for &s in &self.starts {
            for r in 0..self.chains {
                v.push((chain_label(s, r, self.chains), s, r));
            }
        }
        v
    }

    pub fn trace_path(&self, label: &str) -> PathBuf {
        self.out_dir.join(format!("trace_{label}.csv"))
    }

    pub fn checkpoint_path(&self, label: &str) -> PathBuf {
        self.out_dir.join(format!("checkpoint_{label}.txt"))
    }

    pub fn to_manifest(&self) -> String {
        let starts: Vec<&str> = self.starts.iter().map(|s| s.name()).collect();
        let mut out = String::from("# poset-mcmc run manifest\n");
        let mut kv = |k: &str, v: String| out.push_str(&format!("{k} = {v}\n"));
        kv("version", env!("CARGO_PKG_VERSION").into());
        kv("n", self.n.to_string());
        kv("seed", self.seed.to_string());
        kv("starts", starts.join(","));
        kv("chains", self.chains.to_string());
        kv("sweeps", self.sweeps.to_string());
        kv("moves_per_sweep", self.moves_per_sweep.to_string());
        kv("record_interval", self.record_interval.to_string());
        kv("intervals", self.intervals.to_string());
        kv("h0", self.h0.to_string());
        kv("mix", self.mix.name().into());
        kv("checkpoint_every", self.checkpoint_every.to_string());
        kv("rng", "taus2".into());
        kv("config_hash", format!("{:016x}", self.trajectory_hash()));
        out
    }

    /// Rebuilds a config from manifest text; `out_dir` is left as given.
    pub fn from_manifest(text: &str, out_dir: &Path) -> Result<RunConfig> {
        let pairs = parse_key_values(text)?;
        let get = |k: &str| pairs.iter().find(|(key, _)| key == k).map(|(_, v)| v.as_str());
        let n: usize = get("n")
            .ok_or_else(|| Error::InvalidArgument("manifest has no `n`".into()))?
            .parse()
            .map_err(|_| Error::InvalidArgument("manifest `n` is not a number".into()))?;
        let mut c = RunConfig::new(n, 0, 1);
        for (k, v) in &pairs {
            match k.as_str() {
                "version" | "rng" | "config_hash" | "n" => {}
                _ => c.set(k, v)?,
            }
        }
        c.out_dir = out_dir.to_path_buf();
        if let Some(h) = get("config_hash") {
            let want = format!("{:016x}", c.trajectory_hash());
            if h != want {
                return Err(Error::CheckpointMismatch(format!(
                    "manifest hash {h} does not match its settings ({want})"
                )));
            }
        }
        Ok(c)
    }
}

pub fn parse_seed(s: &str) -> Option<u64> {
    let s = s.trim();
    match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16).ok(),
        None => s.parse().ok(),
    }
}

pub fn parse_starts(s: &str) -> Result<Vec<StartKind>> {
    if s.trim() == "all" {
        return Ok(StartKind::ALL.to_vec());
    }
    s.split(',').filter(|p| !p.trim().is_empty()).map(str::parse).collect()
}

/// `key = value` lines; blank lines and `#` comments are skipped.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: i + 1,
            msg: format!("expected `key = value`, got `{line}`"),
        })?;
        out.push((k.trim().replace('-', "_"), v.trim().to_string()));
    }
    Ok(out)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub fn chain_label(start: StartKind, replica: usize, replicas: usize) -> String {
    if replicas == 1 {
        start.name().to_string()
    } else {
        format!("{}.{replica}", start.name())
    }
}

/// Index of the split stream used by a chain.
pub fn stream_index(start: StartKind, replica: usize) -> u64 {
    let ordinal = StartKind::ALL.iter().position(|&s| s == start).expect("listed") as u64;
    replica as u64 * StartKind::ALL.len() as u64 + ordinal
}

/// One running chain: its state, stream, sweep counter and statistics.
#[derive(Debug, Clone)]
pub struct Chain {
    pub start: StartKind,
    pub replica: usize,
    poset: Poset,
    rng: RandomStream,
    sweep: u64,
    stats: SweepStats,
}

impl Chain {
    /// The start poset is built from the chain's own stream, so a random
    /// start consumes the first draws.
    pub fn new(n: usize, seed: u64, start: StartKind, replica: usize) -> Result<Chain> {
        let mut rng = RandomStream::split(seed, stream_index(start, replica));
        let poset = Poset::construct(start, n, Some(&mut rng))?;
        Ok(Chain {
            start,
            replica,
            poset,
            rng,
            sweep: 0,
            stats: SweepStats::default(),
        })
    }

    pub fn poset(&self) -> &Poset {
        &self.poset
    }

    pub fn sweeps_done(&self) -> u64 {
        self.sweep
    }

    pub fn stats(&self) -> SweepStats {
        self.stats
    }

    pub fn rng(&self) -> &RandomStream {
        &self.rng
    }

    pub fn advance(&mut self, moves_per_sweep: u64, mix: MoveMix) -> Result<SweepStats> {
        let s = moves::sweep_with(&mut self.poset, &mut self.rng, moves_per_sweep, mix)?;
        self.stats += s;
        self.sweep += 1;
        Ok(s)
    }

    pub fn record(&self, h0: usize, intervals: bool) -> ObservableRecord {
        observables::record(&self.poset, self.sweep, h0, intervals)
    }

    pub fn checkpoint(&self, config_hash: u64, label: &str) -> ChainCheckpoint {
        ChainCheckpoint {
            config_hash,
            label: label.to_string(),
            start: self.start,
            replica: self.replica,
            n: self.poset.size(),
            sweep: self.sweep,
            poset: self.poset.clone(),
            rng: self.rng.state(),
            stats: self.stats,
        }
    }

    pub fn from_checkpoint(ck: &ChainCheckpoint) -> Result<Chain> {
        Ok(Chain {
            start: ck.start,
            replica: ck.replica,
            poset: ck.poset.clone(),
            rng: RandomStream::from_state(&ck.rng)?,
            sweep: ck.sweep,
            stats: ck.stats,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainCheckpoint {
    pub config_hash: u64,
    pub label: String,
    pub start: StartKind,
    pub replica: usize,
    pub n: usize,
    pub sweep: u64,
    pub poset: Poset,
    pub rng: StreamState,
    pub stats: SweepStats,
}

const CHECKPOINT_MAGIC: &str = "# poset-mcmc checkpoint";

impl fmt::Display for ChainCheckpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = &self.stats;
        writeln!(f, "{CHECKPOINT_MAGIC}")?;
        writeln!(f, "config_hash = {:016x}", self.config_hash)?;
        writeln!(f, "label = {}", self.label)?;
        writeln!(f, "start = {}", self.start)?;
        writeln!(f, "replica = {}", self.replica)?;
        writeln!(f, "n = {}", self.n)?;
        writeln!(f, "sweep = {}", self.sweep)?;
        writeln!(f, "rng = {}", self.rng)?;
        writeln!(
            f,
            "stats = {} {} {} {} {} {}",
            s.attempted, s.accepted, s.relation_attempted, s.relation_accepted, s.link_attempted, s.link_accepted
        )?;
        writeln!(f, "poset:")?;
        write!(f, "{}", self.poset)
    }
}

impl FromStr for ChainCheckpoint {
    type Err = Error;

    fn from_str(text: &str) -> Result<ChainCheckpoint> {
        let (head, body) = text.split_once("poset:").ok_or(Error::Parse {
            line: 1,
            msg: "checkpoint has no `poset:` section".into(),
        })?;
        if !head.starts_with(CHECKPOINT_MAGIC) {
            return Err(Error::Parse {
                line: 1,
                msg: "not a checkpoint file".into(),
            });
        }
        let pairs = parse_key_values(head)?;
        let get = |k: &str| {
            pairs
                .iter()
                .find(|(key, _)| key == k)
                .map(|(_, v)| v.as_str())
                .ok_or_else(|| Error::Parse {
                    line: 0,
                    msg: format!("checkpoint is missing `{k}`"),
                })
        };
        let bad = |k: &str| Error::Parse {
            line: 0,
            msg: format!("bad checkpoint field `{k}`"),
        };
        let stats: Vec<u64> = get("stats")?
            .split_whitespace()
            .map(|v| v.parse().map_err(|_| bad("stats")))
            .collect::<Result<_>>()?;
        if stats.len() != 6 {
            return Err(bad("stats"));
        }
        let poset: Poset = body.parse()?;
        let ck = ChainCheckpoint {
            config_hash: u64::from_str_radix(get("config_hash")?, 16).map_err(|_| bad("config_hash"))?,
            label: get("label")?.to_string(),
            start: get("start")?.parse()?,
            replica: get("replica")?.parse().map_err(|_| bad("replica"))?,
            n: get("n")?.parse().map_err(|_| bad("n"))?,
            sweep: get("sweep")?.parse().map_err(|_| bad("sweep"))?,
            rng: get("rng")?.parse()?,
            stats: SweepStats {
                attempted: stats[0],
                accepted: stats[1],
                relation_attempted: stats[2],
                relation_accepted: stats[3],
                link_attempted: stats[4],
                link_accepted: stats[5],
            },
            poset,
        };
        if ck.poset.size() != ck.n {
            return Err(bad("n"));
        }
        Ok(ck)
    }
}

impl ChainCheckpoint {
    pub fn read(path: &Path) -> Result<ChainCheckpoint> {
        fs::read_to_string(path).map_err(|e| Error::io(path, e))?.parse()
    }

    /// Writes to a sibling temporary file and renames it into place.
    pub fn write_atomic(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_string().as_bytes())
    }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut f = File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    /// Continue each chain from its checkpoint when one exists.
    pub resume: bool,
    /// Stop every chain once it has completed this many sweeps, as if the
    /// run had been interrupted there.
    pub stop_after: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainSummary {
    pub label: String,
    pub start: StartKind,
    pub replica: usize,
    pub sweeps: u64,
    pub resumed_from: Option<u64>,
    pub stats: SweepStats,
    pub trace: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub config: RunConfig,
    pub chains: Vec<ChainSummary>,
}

impl RunSummary {
    pub fn total_stats(&self) -> SweepStats {
        let mut s = SweepStats::default();
        for c in &self.chains {
            s += c.stats;
        }
        s
    }
}

pub fn trace_header(intervals: bool) -> String {
    if intervals {
        format!("{TRACE_HEADER},intervals")
    } else {
        TRACE_HEADER.to_string()
    }
}

/// Runs (or resumes) every chain of `config`, writing traces, checkpoints
/// and the manifest into `config.out_dir`. Chains run in parallel.
pub fn run(config: &RunConfig, options: RunOptions) -> Result<RunSummary> {
    config.validate()?;
    fs::create_dir_all(&config.out_dir).map_err(|e| Error::io(&config.out_dir, e))?;
    write_atomic(&config.out_dir.join(MANIFEST_FILE), config.to_manifest().as_bytes())?;
    let chains = config
        .labels()
        .into_par_iter()
        .map(|(label, start, replica)| run_chain(config, &label, start, replica, options))
        .collect::<Result<Vec<_>>>()?;
    Ok(RunSummary {
        config: config.clone(),
        chains,
    })
}

fn run_chain(
    config: &RunConfig,
    label: &str,
    start: StartKind,
    replica: usize,
    options: RunOptions,
) -> Result<ChainSummary> {
    let hash = config.trajectory_hash();
    let trace_path = config.trace_path(label);
    let ck_path = config.checkpoint_path(label);
    let mut resumed_from = None;
    let (mut chain, file) = if options.resume && ck_path.exists() {
        let ck = ChainCheckpoint::read(&ck_path)?;
        if ck.config_hash != hash {
            return Err(Error::CheckpointMismatch(format!(
                "{} was written by a different configuration",
                ck_path.display()
            )));
        }
        if ck.label != label || ck.start != start || ck.replica != replica || ck.n != config.n {
            return Err(Error::CheckpointMismatch(format!(
                "{} belongs to chain `{}`",
                ck_path.display(),
                ck.label
            )));
        }
        truncate_trace(&trace_path, ck.sweep, config.record_interval)?;
        resumed_from = Some(ck.sweep);
        let file = OpenOptions::new()
            .append(true)
            .open(&trace_path)
            .map_err(|e| Error::io(&trace_path, e))?;
        (Chain::from_checkpoint(&ck)?, file)
    } else {
        let chain = Chain::new(config.n, config.seed, start, replica)?;
        let mut file = File::create(&trace_path).map_err(|e| Error::io(&trace_path, e))?;
        let first = chain.record(config.h0, config.intervals);
        writeln!(file, "{}\n{}", trace_header(config.intervals), first.to_csv_row())
            .map_err(|e| Error::io(&trace_path, e))?;
        (chain, file)
    };
    let mut out = BufWriter::new(file);
    let target = options.stop_after.map_or(config.sweeps, |s| s.min(config.sweeps));
    while chain.sweeps_done() < target {
        chain.advance(config.moves_per_sweep, config.mix)?;
        let s = chain.sweeps_done();
        if s % config.record_interval == 0 {
            writeln!(out, "{}", chain.record(config.h0, config.intervals).to_csv_row())
                .map_err(|e| Error::io(&trace_path, e))?;
        }
        if s % config.checkpoint_every == 0 {
            out.flush().map_err(|e| Error::io(&trace_path, e))?;
            chain.checkpoint(hash, label).write_atomic(&ck_path)?;
        }
    }
    out.flush().map_err(|e| Error::io(&trace_path, e))?;
    chain.checkpoint(hash, label).write_atomic(&ck_path)?;
    Ok(ChainSummary {
        label: label.to_string(),
        start,
        replica,
        sweeps: chain.sweeps_done(),
        resumed_from,
        stats: chain.stats(),
        trace: trace_path,
    })
}

/// Drops trace rows recorded after `sweep`, which an interrupted run may
/// have flushed past its last checkpoint.
fn truncate_trace(path: &Path, sweep: u64, interval: u64) -> Result<()> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut kept = String::with_capacity(text.len());
    let mut last = None;
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            kept.push_str(line);
            kept.push('\n');
            continue;
        }
        let s: u64 = line
            .split(',')
            .next()
            .and_then(|f| f.parse().ok())
            .ok_or_else(|| Error::Parse {
                line: i + 1,
                msg: format!("bad trace row in {}", path.display()),
            })?;
        if s > sweep {
            break;
        }
        last = Some(s);
        kept.push_str(line);
        kept.push('\n');
    }
    let expected = sweep / interval * interval;
    if last != Some(expected) {
        return Err(Error::CheckpointMismatch(format!(
            "{} ends at sweep {:?} but the checkpoint needs {expected}",
            path.display(),
            last
        )));
    }
    write_atomic(path, kept.as_bytes())
}

pub fn read_trace(path: &Path) -> Result<Vec<ObservableRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .skip(1)
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            ObservableRecord::from_csv_row(l).map_err(|e| Error::Parse {
                line: i + 1,
                msg: format!("{}: {e}", path.display()),
            })
        })
        .collect()
}

/// Loads the manifest and every trace of a run directory.
pub fn read_run(dir: &Path) -> Result<(RunConfig, TraceSet)> {
    let mpath = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&mpath).map_err(|e| Error::io(&mpath, e))?;
    let config = RunConfig::from_manifest(&text, dir)?;
    let mut set = TraceSet::new(config.n, config.moves_per_sweep);
    for (label, start, _) in config.labels() {
        let records = read_trace(&config.trace_path(&label))?;
        set.insert(label, start, records);
    }
    Ok((config, set))
}

/// Runs one chain in memory: `burn_in` discarded sweeps, then `samples`
/// recorded sweeps.
pub fn sample(
    chain: &mut Chain,
    burn_in: u64,
    samples: usize,
    moves_per_sweep: u64,
    mix: MoveMix,
    h0: usize,
) -> Result<Vec<ObservableRecord>> {
    for _ in 0..burn_in {
        chain.advance(moves_per_sweep, mix)?;
    }
    let mut out = Vec::with_capacity(samples);
    for _ in 0..samples {
        chain.advance(moves_per_sweep, mix)?;
        out.push(chain.record(h0, false));
    }
    Ok(out)
}
