//! Order invariants measured on the chain's state.

use std::fmt;
use std::str::FromStr;

use crate::bits::{self, Ones};
use crate::error::{Error, Result};
use crate::poset::Poset;

/// Outcome of the layeredness test on the level partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ChiValue {
    NotLayered,
    Layered,
    /// More levels than the cutoff; the test was skipped.
    Abandoned,
}

impl ChiValue {
    pub fn code(self) -> u64 {
        match self {
            ChiValue::NotLayered => 0,
            ChiValue::Layered => 1,
            ChiValue::Abandoned => 2,
        }
    }

    pub fn from_code(code: u64) -> Option<ChiValue> {
        match code {
            0 => Some(ChiValue::NotLayered),
            1 => Some(ChiValue::Layered),
            2 => Some(ChiValue::Abandoned),
            _ => None,
        }
    }
}

impl fmt::Display for ChiValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChiValue::NotLayered => "0",
            ChiValue::Layered => "1",
            ChiValue::Abandoned => "abandoned",
        })
    }
}

impl FromStr for ChiValue {
    type Err = Error;

    fn from_str(s: &str) -> Result<ChiValue> {
        match s {
            "0" => Ok(ChiValue::NotLayered),
            "1" => Ok(ChiValue::Layered),
            "abandoned" => Ok(ChiValue::Abandoned),
            other => Err(Error::InvalidArgument(format!("bad chi value `{other}`"))),
        }
    }
}

/// Level cutoff for the layeredness test: 7 for `13 ≤ n ≤ 24`, else 6.
pub fn default_h0(n: usize) -> usize {
    if (13..=24).contains(&n) {
        7
    } else {
        6
    }
}

/// Level of each element (1-based): the length of the longest chain
/// ending at it.
pub fn level_numbers(p: &Poset) -> Vec<usize> {
    let mut level = vec![0usize; p.size()];
    for y in 0..p.size() {
        level[y] = 1 + Ones::new(p.past_row(y)).map(|x| level[x]).max().unwrap_or(0);
    }
    level
}

pub fn levels(p: &Poset) -> Vec<Vec<usize>> {
    let level = level_numbers(p);
    let height = level.iter().copied().max().unwrap_or(0);
    let mut out = vec![Vec::new(); height];
    for (x, &l) in level.iter().enumerate() {
        out[l - 1].push(x);
    }
    out
}

/// Longest-chain cardinality, computed from the top down (longest chain
/// starting at each element), independently of [`levels`].
pub fn height(p: &Poset) -> usize {
    let n = p.size();
    let mut up = vec![0usize; n];
    for x in (0..n).rev() {
        up[x] = 1 + Ones::new(p.future_row(x)).map(|y| up[y]).max().unwrap_or(0);
    }
    up.into_iter().max().unwrap_or(0)
}

pub fn ordering_fraction(relations: usize, n: usize) -> f64 {
    let pairs = n * n.saturating_sub(1) / 2;
    if pairs == 0 {
        0.0
    } else {
        relations as f64 / pairs as f64
    }
}

/// `4L/n²` for even `n`, `4L/(n²−1)` for odd `n` (0 for `n = 1`).
pub fn linking_fraction(links: usize, n: usize) -> f64 {
    let denom = if n.is_multiple_of(2) { n * n } else { n * n - 1 };
    if denom == 0 {
        0.0
    } else {
        4.0 * links as f64 / denom as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarInvariants {
    pub relations: usize,
    pub links: usize,
    pub ordering_fraction: f64,
    pub linking_fraction: f64,
    pub minimal: usize,
    pub maximal: usize,
}

pub fn scalar_invariants(p: &Poset) -> ScalarInvariants {
    let n = p.size();
    let relations = p.relation_count();
    let links = p.transitive_reduction().count_ones();
    ScalarInvariants {
        relations,
        links,
        ordering_fraction: ordering_fraction(relations, n),
        linking_fraction: linking_fraction(links, n),
        minimal: (0..n).filter(|&x| bits::is_empty(p.past_row(x))).count(),
        maximal: (0..n).filter(|&x| bits::is_empty(p.future_row(x))).count(),
    }
}

/// Layeredness of the level partition: every element must be preceded by
/// all elements two or more levels below it. Abandoned when there are more
/// than `h0` levels.
pub fn chi_layered(p: &Poset, h0: usize) -> ChiValue {
    chi_from_levels(p, &level_numbers(p), h0)
}

fn chi_from_levels(p: &Poset, level: &[usize], h0: usize) -> ChiValue {
    let n = p.size();
    let height = level.iter().copied().max().unwrap_or(0);
    if height > h0 {
        return ChiValue::Abandoned;
    }
    // below[j] = elements at levels 1..=j
    let w = bits::words_for(n);
    let mut below = vec![vec![0u64; w]; height + 1];
    for (x, &l) in level.iter().enumerate() {
        bits::set_bit(&mut below[l], x);
    }
    for j in 1..=height {
        let (lo, hi) = below.split_at_mut(j);
        for (h, l) in hi[0].iter_mut().zip(&lo[j - 1]) {
            *h |= l;
        }
    }
    let layered = (0..n).all(|y| level[y] < 3 || bits::is_subset(&below[level[y] - 2], p.past_row(y)));
    if layered {
        ChiValue::Layered
    } else {
        ChiValue::NotLayered
    }
}

/// `hist[k]` counts related pairs `x ≺ y` whose interval `fut(x) ∩ past(y)`
/// has `k` elements. Empty for an antichain.
pub fn interval_size_histogram(p: &Poset) -> Vec<u64> {
    let mut hist: Vec<u64> = Vec::new();
    for (x, y) in p.relations() {
        let k: usize = p
            .future_row(x)
            .iter()
            .zip(p.past_row(y))
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum();
        if hist.len() <= k {
            hist.resize(k + 1, 0);
        }
        hist[k] += 1;
    }
    hist
}

/// Snapshot of every measured invariant at the end of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableRecord {
    pub sweep: u64,
    pub height: usize,
    pub relations: usize,
    pub links: usize,
    pub ordering_fraction: f64,
    pub linking_fraction: f64,
    pub minimal: usize,
    pub maximal: usize,
    pub level_sizes: Vec<usize>,
    pub chi: ChiValue,
    pub interval_hist: Option<Vec<u64>>,
}

pub const TRACE_HEADER: &str = "sweep,height,R,L,r,l,N_min,N_max,chi,level_sizes";

/// Measures `p`. Links come from the poset's maintained link matrix.
pub fn record(p: &Poset, sweep: u64, h0: usize, intervals: bool) -> ObservableRecord {
    let n = p.size();
    let level = level_numbers(p);
    let height = level.iter().copied().max().unwrap_or(0);
    let mut level_sizes = vec![0usize; height];
    for &l in &level {
        level_sizes[l - 1] += 1;
    }
    let relations = p.relation_count();
    let links = p.link_count();
    ObservableRecord {
        sweep,
        height,
        relations,
        links,
        ordering_fraction: ordering_fraction(relations, n),
        linking_fraction: linking_fraction(links, n),
        minimal: level_sizes.first().copied().unwrap_or(0),
        maximal: (0..n).filter(|&x| bits::is_empty(p.future_row(x))).count(),
        chi: chi_from_levels(p, &level, h0),
        level_sizes,
        interval_hist: intervals.then(|| interval_size_histogram(p)),
    }
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(";")
}

impl ObservableRecord {
    /// One trace CSV row (no newline). When the interval histogram was
    /// recorded it is appended as an extra `;`-joined column.
    pub fn to_csv_row(&self) -> String {
        let mut row = format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.sweep,
            self.height,
            self.relations,
            self.links,
            self.ordering_fraction,
            self.linking_fraction,
            self.minimal,
            self.maximal,
            self.chi,
            join(&self.level_sizes)
        );
        if let Some(h) = &self.interval_hist {
            row.push(',');
            row.push_str(&join(h));
        }
        row
    }

    pub fn from_csv_row(line: &str) -> Result<ObservableRecord> {
        let bad = |what: &str| Error::InvalidArgument(format!("bad trace row ({what}): `{line}`"));
        let f: Vec<&str> = line.trim().split(',').collect();
        if f.len() != 10 && f.len() != 11 {
            return Err(bad("column count"));
        }
        fn num<T: FromStr>(s: &str, what: &str, line: &str) -> Result<T> {
            s.parse()
                .map_err(|_| Error::InvalidArgument(format!("bad trace row ({what}): `{line}`")))
        }
        fn list<T: FromStr>(s: &str, what: &str, line: &str) -> Result<Vec<T>> {
            if s.is_empty() {
                return Ok(Vec::new());
            }
            s.split(';').map(|v| num(v, what, line)).collect()
        }
        Ok(ObservableRecord {
            sweep: num(f[0], "sweep", line)?,
            height: num(f[1], "height", line)?,
            relations: num(f[2], "R", line)?,
            links: num(f[3], "L", line)?,
            ordering_fraction: num(f[4], "r", line)?,
            linking_fraction: num(f[5], "l", line)?,
            minimal: num(f[6], "N_min", line)?,
            maximal: num(f[7], "N_max", line)?,
            chi: f[8].parse().map_err(|_| bad("chi"))?,
            level_sizes: list(f[9], "level_sizes", line)?,
            interval_hist: match f.get(10) {
                Some(s) => Some(list(s, "intervals", line)?),
                None => None,
            },
        })
    }
}
