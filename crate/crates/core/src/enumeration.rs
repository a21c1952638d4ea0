//! Exhaustive generation of naturally labeled posets for small `n`.
//!
//! Every naturally labeled order on `0..n` restricts to one on `0..n−1`,
//! and `past(n−1)` is an order ideal (down-closed subset) of the
//! restriction. Conversely every ideal gives a valid extension, so walking
//! all ideals at every level visits each order exactly once.
//!
//! Orders are held as `u32` past masks while enumerating; the invariants
//! computed here are written directly against that form and double as an
//! independent check on [`crate::observables`].

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::bits::{self, BitMatrix, Ones};
use crate::error::{Error, Result};
use crate::observables::{default_h0, ChiValue};
use crate::poset::Poset;

/// Default size bound for enumeration.
pub const DEFAULT_BOUND: usize = 9;
/// Largest size the mask representation supports.
pub const HARD_LIMIT: usize = 16;
/// Largest size [`brute_force_count`] accepts (2^21 candidate matrices).
pub const BRUTE_FORCE_LIMIT: usize = 7;

/// A naturally labeled order stored as past masks.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct SmallOrder {
    n: usize,
    past: [u32; HARD_LIMIT],
}

impl std::fmt::Debug for SmallOrder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "SmallOrder({}) {:?}", self.n, &self.past[..self.n])
    }
}

impl SmallOrder {
    pub fn size(&self) -> usize {
        self.n
    }

    /// Bit `x` set iff `x ≺ y`.
    pub fn past(&self, y: usize) -> u32 {
        self.past[y]
    }

    pub fn precedes(&self, x: usize, y: usize) -> bool {
        self.past[y] >> x & 1 == 1
    }

    pub fn to_poset(&self) -> Poset {
        let mut rel = BitMatrix::new(self.n);
        for y in 0..self.n {
            for x in Ones::new(&[self.past[y] as u64]) {
                rel.set(x, y, true);
            }
        }
        Poset::from_closed_unchecked(rel)
    }

    pub fn from_poset(p: &Poset) -> Result<SmallOrder> {
        let n = p.size();
        if n > HARD_LIMIT {
            return Err(Error::BoundExceeded {
                what: "mask representation",
                n,
                bound: HARD_LIMIT,
            });
        }
        let mut past = [0u32; HARD_LIMIT];
        for (y, m) in past.iter_mut().enumerate().take(n) {
            *m = p.past_row(y)[0] as u32;
        }
        Ok(SmallOrder { n, past })
    }

    pub fn relation_count(&self) -> u64 {
        self.past[..self.n].iter().map(|m| m.count_ones() as u64).sum()
    }

    fn levels(&self) -> [u8; HARD_LIMIT] {
        let mut level = [0u8; HARD_LIMIT];
        for y in 0..self.n {
            let mut m = self.past[y];
            let mut best = 0;
            while m != 0 {
                let x = m.trailing_zeros() as usize;
                m &= m - 1;
                best = best.max(level[x]);
            }
            level[y] = best + 1;
        }
        level
    }

    pub fn height(&self) -> u64 {
        self.levels()[..self.n].iter().copied().max().unwrap_or(0) as u64
    }

    pub fn minimal_count(&self) -> u64 {
        self.past[..self.n].iter().filter(|&&m| m == 0).count() as u64
    }

    pub fn maximal_count(&self) -> u64 {
        let has_successor = self.past[..self.n].iter().fold(0u32, |acc, m| acc | m);
        (self.n as u32 - has_successor.count_ones()) as u64
    }

    pub fn chi(&self, h0: usize) -> ChiValue {
        let level = self.levels();
        let height = level[..self.n].iter().copied().max().unwrap_or(0) as usize;
        if height > h0 {
            return ChiValue::Abandoned;
        }
        for y in 0..self.n {
            for x in 0..y {
                if level[x] + 2 <= level[y] && !self.precedes(x, y) {
                    return ChiValue::NotLayered;
                }
            }
        }
        ChiValue::Layered
    }
}

fn check_bound(n: usize, bound: usize) -> Result<()> {
    let limit = bound.min(HARD_LIMIT);
    if n > limit {
        return Err(Error::BoundExceeded {
            what: "enumeration",
            n,
            bound: limit,
        });
    }
    if n == 0 {
        return Err(Error::EmptyPoset);
    }
    Ok(())
}

fn extend<F: FnMut(&SmallOrder)>(order: &mut SmallOrder, k: usize, visit: &mut F) {
    if k == order.n {
        visit(order);
        return;
    }
    choose_ideal(order, k, 0, 0, visit);
}

/// Picks `past(k)` among the ideals of the order on `0..k`, deciding
/// element `i` after all of `past(i)` has been decided.
fn choose_ideal<F: FnMut(&SmallOrder)>(order: &mut SmallOrder, k: usize, i: usize, ideal: u32, visit: &mut F) {
    if i == k {
        order.past[k] = ideal;
        extend(order, k + 1, visit);
        return;
    }
    choose_ideal(order, k, i + 1, ideal, visit);
    if order.past[i] & !ideal == 0 {
        choose_ideal(order, k, i + 1, ideal | 1 << i, visit);
    }
}

/// Visits every naturally labeled `n`-order once, sequentially.
pub fn enumerate<F: FnMut(&SmallOrder)>(n: usize, bound: usize, mut visitor: F) -> Result<u64> {
    check_bound(n, bound)?;
    let mut order = SmallOrder {
        n,
        past: [0; HARD_LIMIT],
    };
    let mut total = 0u64;
    extend(&mut order, 0, &mut |o: &SmallOrder| {
        total += 1;
        visitor(o)
    });
    Ok(total)
}

/// Parallel fold over all `n`-orders. Work is split on the orders of the
/// first `n−3` elements; each task extends its prefix to full size.
pub fn par_fold<A, I, F, M>(n: usize, bound: usize, identity: I, fold: F, merge: M) -> Result<A>
where
    A: Send,
    I: Fn() -> A + Sync + Send,
    F: Fn(&mut A, &SmallOrder) + Sync + Send,
    M: Fn(A, A) -> A + Sync + Send,
{
    check_bound(n, bound)?;
    let split = n.saturating_sub(3).max(1);
    let mut prefixes = Vec::new();
    enumerate(split, HARD_LIMIT, |o| prefixes.push(*o))?;
    let result = prefixes
        .into_par_iter()
        .fold(&identity, |mut acc, prefix| {
            let mut order = prefix;
            order.n = n;
            extend(&mut order, split, &mut |o: &SmallOrder| fold(&mut acc, o));
            acc
        })
        .reduce(&identity, &merge);
    Ok(result)
}

pub fn count(n: usize, bound: usize) -> Result<u64> {
    par_fold(n, bound, || 0u64, |c, _| *c += 1, |a, b| a + b)
}

/// All `n`-orders as [`Poset`]s, in enumeration order.
pub fn collect(n: usize) -> Result<Vec<Poset>> {
    let mut out = Vec::new();
    enumerate(n, DEFAULT_BOUND, |o| out.push(o.to_poset()))?;
    Ok(out)
}

/// Number of order ideals (down-closed subsets) of `p`, including the empty
/// set and the whole ground set.
pub fn order_ideals(p: &Poset) -> u64 {
    let mut count = 0u64;
    for_each_order_ideal(p, |_| count += 1);
    count
}

/// Calls `visit` with every order ideal of `p` as packed bits.
pub fn for_each_order_ideal<F: FnMut(&[u64])>(p: &Poset, mut visit: F) {
    fn rec<F: FnMut(&[u64])>(p: &Poset, i: usize, ideal: &mut Vec<u64>, visit: &mut F) {
        if i == p.size() {
            visit(ideal);
            return;
        }
        rec(p, i + 1, ideal, visit);
        if bits::is_subset(p.past_row(i), ideal) {
            bits::set_bit(ideal, i);
            rec(p, i + 1, ideal, visit);
            bits::clear_bit(ideal, i);
        }
    }
    let mut ideal = vec![0u64; bits::words_for(p.size())];
    rec(p, 0, &mut ideal, &mut visit);
}

/// Counts upper-triangular irreflexive 0/1 matrices that are transitively
/// closed, by testing all `2^C(n,2)` of them.
pub fn brute_force_count(n: usize) -> Result<u64> {
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::BoundExceeded {
            what: "brute-force count",
            n,
            bound: BRUTE_FORCE_LIMIT,
        });
    }
    if n == 0 {
        return Err(Error::EmptyPoset);
    }
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|x| (x + 1..n).map(move |y| (x, y))).collect();
    let mut total = 0u64;
    for mask in 0u64..1 << pairs.len() {
        let mut fut = [0u32; BRUTE_FORCE_LIMIT];
        for (bit, &(x, y)) in pairs.iter().enumerate() {
            if mask >> bit & 1 == 1 {
                fut[x] |= 1 << y;
            }
        }
        let closed = (0..n).all(|x| {
            let mut m = fut[x];
            while m != 0 {
                let y = m.trailing_zeros() as usize;
                m &= m - 1;
                if fut[y] & !fut[x] != 0 {
                    return false;
                }
            }
            true
        });
        total += closed as u64;
    }
    Ok(total)
}

/// Observables available as exact distributions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExactObservable {
    Height,
    Relations,
    MinimalCount,
    MaximalCount,
    /// Layeredness with the given level cutoff; values are [`ChiValue::code`].
    Chi {
        h0: usize,
    },
}

impl ExactObservable {
    pub fn name(&self) -> &'static str {
        match self {
            ExactObservable::Height => "height",
            ExactObservable::Relations => "R",
            ExactObservable::MinimalCount => "N_min",
            ExactObservable::MaximalCount => "N_max",
            ExactObservable::Chi { .. } => "chi",
        }
    }

    /// Parses `height`, `R`, `N_min`, `N_max` or `chi` (with the default
    /// cutoff for `n`).
    pub fn parse(name: &str, n: usize) -> Result<ExactObservable> {
        match name {
            "height" | "h" => Ok(ExactObservable::Height),
            "R" | "relations" => Ok(ExactObservable::Relations),
            "N_min" | "nmin" => Ok(ExactObservable::MinimalCount),
            "N_max" | "nmax" => Ok(ExactObservable::MaximalCount),
            "chi" => Ok(ExactObservable::Chi { h0: default_h0(n) }),
            other => Err(Error::InvalidArgument(format!("unknown observable `{other}`"))),
        }
    }

    pub fn evaluate(&self, o: &SmallOrder) -> u64 {
        match *self {
            ExactObservable::Height => o.height(),
            ExactObservable::Relations => o.relation_count(),
            ExactObservable::MinimalCount => o.minimal_count(),
            ExactObservable::MaximalCount => o.maximal_count(),
            ExactObservable::Chi { h0 } => o.chi(h0).code(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactDistribution {
    pub n: usize,
    pub observable: ExactObservable,
    pub counts: BTreeMap<u64, u64>,
    pub total: u64,
}

impl ExactDistribution {
    pub fn fraction(&self, value: u64) -> f64 {
        self.counts.get(&value).copied().unwrap_or(0) as f64 / self.total as f64
    }

    /// `value,count,fraction` rows with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("value,count,fraction\n");
        for (v, c) in &self.counts {
            let _ = writeln!(out, "{v},{c},{:.12e}", *c as f64 / self.total as f64);
        }
        out
    }
}

pub fn exact_distribution(n: usize, observable: ExactObservable) -> Result<ExactDistribution> {
    exact_distribution_bounded(n, observable, DEFAULT_BOUND)
}

pub fn exact_distribution_bounded(n: usize, observable: ExactObservable, bound: usize) -> Result<ExactDistribution> {
    Ok(exact_distributions(n, &[observable], bound)?.remove(0))
}

/// Several exact distributions from a single pass over `Ω_n`.
pub fn exact_distributions(n: usize, observables: &[ExactObservable], bound: usize) -> Result<Vec<ExactDistribution>> {
    let k = observables.len();
    let tallies = par_fold(
        n,
        bound,
        || vec![Vec::<u64>::new(); k],
        |acc, o| {
            for (t, obs) in acc.iter_mut().zip(observables) {
                let v = obs.evaluate(o) as usize;
                if v >= t.len() {
                    t.resize(v + 1, 0);
                }
                t[v] += 1;
            }
        },
        |mut a, b| {
            for (x, y) in a.iter_mut().zip(b) {
                if y.len() > x.len() {
                    x.resize(y.len(), 0);
                }
                for (c, d) in x.iter_mut().zip(y) {
                    *c += d;
                }
            }
            a
        },
    )?;
    Ok(tallies
        .into_iter()
        .zip(observables)
        .map(|(t, &observable)| {
            let counts: BTreeMap<u64, u64> = t
                .into_iter()
                .enumerate()
                .filter(|&(_, c)| c > 0)
                .map(|(v, c)| (v as u64, c))
                .collect();
            ExactDistribution {
                n,
                observable,
                total: counts.values().sum(),
                counts,
            }
        })
        .collect())
}
