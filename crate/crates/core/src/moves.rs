//! Relation and link moves, the mixed chain step, sweeps, and the exact
//! transition kernel for tiny state spaces.
//!
//! Relation move on a pair `x < y`: remove `x ≺ y` if it is a link, add it
//! if the pair is critical, otherwise do nothing. Link move: remove the
//! Hasse edge `x ⋖ y` if present (then close transitively), add it if the
//! pair is suitable, otherwise do nothing. Every move that changes the
//! poset is undone by the same move on the same pair, and pairs are drawn
//! uniformly, so the kernel is symmetric.

use std::collections::{HashMap, VecDeque};
use std::ops::{AddAssign, Sub};

use crate::bits::{self, BitMatrix, Ones};
use crate::enumeration;
use crate::error::{Error, Result};
use crate::poset::Poset;
use crate::rng::RandomStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MoveKind {
    Relation,
    Link,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MoveAction {
    Removed,
    Added,
    Noop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MoveOutcome {
    pub kind: MoveKind,
    pub pair: (usize, usize),
    pub action: MoveAction,
}

impl MoveOutcome {
    /// Accepted moves are exactly the ones that changed the poset.
    #[inline]
    pub fn changed(&self) -> bool {
        self.action != MoveAction::Noop
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SweepStats {
    pub attempted: u64,
    pub accepted: u64,
    pub relation_attempted: u64,
    pub relation_accepted: u64,
    pub link_attempted: u64,
    pub link_accepted: u64,
}

impl SweepStats {
    #[inline]
    pub fn record(&mut self, outcome: &MoveOutcome) {
        let changed = outcome.changed() as u64;
        self.attempted += 1;
        self.accepted += changed;
        match outcome.kind {
            MoveKind::Relation => {
                self.relation_attempted += 1;
                self.relation_accepted += changed;
            }
            MoveKind::Link => {
                self.link_attempted += 1;
                self.link_accepted += changed;
            }
        }
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.attempted == 0 {
            0.0
        } else {
            self.accepted as f64 / self.attempted as f64
        }
    }
}

impl AddAssign for SweepStats {
    fn add_assign(&mut self, o: SweepStats) {
        self.attempted += o.attempted;
        self.accepted += o.accepted;
        self.relation_attempted += o.relation_attempted;
        self.relation_accepted += o.relation_accepted;
        self.link_attempted += o.link_attempted;
        self.link_accepted += o.link_accepted;
    }
}

impl Sub for SweepStats {
    type Output = SweepStats;

    fn sub(self, o: SweepStats) -> SweepStats {
        SweepStats {
            attempted: self.attempted - o.attempted,
            accepted: self.accepted - o.accepted,
            relation_attempted: self.relation_attempted - o.relation_attempted,
            relation_accepted: self.relation_accepted - o.relation_accepted,
            link_attempted: self.link_attempted - o.link_attempted,
            link_accepted: self.link_accepted - o.link_accepted,
        }
    }
}

/// Default sweep length, `2n³` attempted moves.
pub fn default_moves_per_sweep(n: usize) -> u64 {
    2 * (n as u64).pow(3)
}

pub fn pair_count(n: usize) -> u64 {
    let n = n as u64;
    n * n.saturating_sub(1) / 2
}

/// Maps `k ∈ [0, C(n,2))` to the pair `(x, y)`, `x < y`, with
/// `k = y(y−1)/2 + x`.
#[inline]
pub fn decode_pair(k: u64) -> (usize, usize) {
    let mut y = ((1.0 + (1.0 + 8.0 * k as f64).sqrt()) / 2.0) as u64;
    // float rounding can be off by one either way near triangular numbers
    while y * (y - 1) / 2 > k {
        y -= 1;
    }
    while (y + 1) * y / 2 <= k {
        y += 1;
    }
    let x = k - y * (y - 1) / 2;
    (x as usize, y as usize)
}

pub fn relation_move(p: &mut Poset, x: usize, y: usize) -> Result<MoveOutcome> {
    p.check_pair(x, y)?;
    Ok(relation_move_unchecked(p, x, y))
}

pub fn link_move(p: &mut Poset, x: usize, y: usize) -> Result<MoveOutcome> {
    p.check_pair(x, y)?;
    Ok(link_move_unchecked(p, x, y))
}

#[inline]
pub(crate) fn relation_move_unchecked(p: &mut Poset, x: usize, y: usize) -> MoveOutcome {
    let action = if p.precedes(x, y) {
        if p.is_link(x, y) {
            remove_relation(p, x, y);
            MoveAction::Removed
        } else {
            MoveAction::Noop
        }
    } else if p.is_critical_unrelated(x, y) {
        add_relation(p, x, y);
        MoveAction::Added
    } else {
        MoveAction::Noop
    };
    MoveOutcome {
        kind: MoveKind::Relation,
        pair: (x, y),
        action,
    }
}

#[inline]
pub(crate) fn link_move_unchecked(p: &mut Poset, x: usize, y: usize) -> MoveOutcome {
    let action = if p.precedes(x, y) {
        if p.is_link(x, y) {
            remove_hasse_edge(p, x, y);
            MoveAction::Removed
        } else {
            MoveAction::Noop
        }
    } else if p.is_suitable_unrelated(x, y) {
        add_hasse_edge(p, x, y);
        MoveAction::Added
    } else {
        MoveAction::Noop
    };
    MoveOutcome {
        kind: MoveKind::Link,
        pair: (x, y),
        action,
    }
}

/// Removes the link `x ⋖ y` as a single relation. Pairs that were
/// interpolated only through this relation may become links.
fn remove_relation(p: &mut Poset, x: usize, y: usize) {
    let (future, past, links) = p.parts_mut();
    future.set(x, y, false);
    past.set(y, x, false);
    links.set(x, y, false);
    for a in Ones::new(past.row(x)) {
        if bits::is_disjoint(future.row(a), past.row(y)) {
            links.set(a, y, true);
        }
    }
    for b in Ones::new(future.row(y)) {
        if bits::is_disjoint(future.row(x), past.row(b)) {
            links.set(x, b, true);
        }
    }
}

/// Adds `x ≺ y` for a critical pair; it becomes a link and interpolates
/// `a ≺ y` for `a ∈ past(x)` and `x ≺ b` for `b ∈ fut(y)`.
fn add_relation(p: &mut Poset, x: usize, y: usize) {
    let (future, past, links) = p.parts_mut();
    future.set(x, y, true);
    past.set(y, x, true);
    for a in Ones::new(past.row(x)) {
        links.set(a, y, false);
    }
    for (l, f) in links.row_mut(x).iter_mut().zip(future.row(y)) {
        *l &= !f;
    }
    links.set(x, y, true);
}

fn inclusive_row(row: &[u64], x: usize) -> Vec<u64> {
    let mut v = row.to_vec();
    bits::set_bit(&mut v, x);
    v
}

/// Inserts the Hasse edge `x ⋖ y` for a suitable pair: every element of
/// `incpast(x)` comes to precede every element of `incfut(y)`.
fn add_hasse_edge(p: &mut Poset, x: usize, y: usize) {
    let (future, past, links) = p.parts_mut();
    let below = inclusive_row(past.row(x), x);
    let above = inclusive_row(future.row(y), y);
    for a in Ones::new(&below) {
        for (f, b) in future.row_mut(a).iter_mut().zip(&above) {
            *f |= b;
        }
    }
    for b in Ones::new(&above) {
        for (q, a) in past.row_mut(b).iter_mut().zip(&below) {
            *q |= a;
        }
    }
    links.set(x, y, true);
}

/// Deletes the Hasse edge `x ⋖ y` and recloses. Only rows of `incpast(x)`
/// can lose relations; they are rebuilt from their links, highest label
/// first so that every row read is already final.
fn remove_hasse_edge(p: &mut Poset, x: usize, y: usize) {
    let (future, past, links) = p.parts_mut();
    links.set(x, y, false);
    let below = inclusive_row(past.row(x), x);
    let w = future.words_per_row();
    let mut fresh = vec![0u64; w];
    for wi in (0..w).rev() {
        let mut word = below[wi];
        while word != 0 {
            let bit = 63 - word.leading_zeros() as usize;
            word &= !(1u64 << bit);
            let a = wi * bits::WORD_BITS + bit;
            fresh.iter_mut().for_each(|f| *f = 0);
            for c in Ones::new(links.row(a)) {
                bits::set_bit(&mut fresh, c);
                for (f, r) in fresh.iter_mut().zip(future.row(c)) {
                    *f |= r;
                }
            }
            let row = future.row_mut(a);
            for (i, (old, new)) in row.iter_mut().zip(&fresh).enumerate() {
                let mut lost = *old & !new;
                *old = *new;
                while lost != 0 {
                    let b = i * bits::WORD_BITS + lost.trailing_zeros() as usize;
                    lost &= lost - 1;
                    past.set(b, a, false);
                }
            }
        }
    }
}

/// The link move carried out literally as a step list on the relation:
/// drop every relation from `incpast(x)` to `incfut(y)` and restore what
/// transitivity implies, or adjoin all of `incpast(x) × incfut(y)`.
/// Everything is recomputed from scratch; this is the reference the fast
/// edge-toggle path is checked against.
pub fn link_move_reference(p: &Poset, x: usize, y: usize) -> Result<(Poset, MoveOutcome)> {
    p.check_pair(x, y)?;
    let class = p.classify_pair(x, y)?;
    let below = inclusive_row(p.past_row(x), x);
    let above = inclusive_row(p.future_row(y), y);
    let mut rel: BitMatrix = p.relation_matrix().clone();
    let action = if class.link {
        for a in Ones::new(&below) {
            for (f, b) in rel.row_mut(a).iter_mut().zip(&above) {
                *f &= !b;
            }
        }
        rel = crate::poset::transitive_closure(&rel)?;
        MoveAction::Removed
    } else if class.suitable {
        for a in Ones::new(&below) {
            for b in Ones::new(&above) {
                rel.set(a, b, true);
            }
        }
        MoveAction::Added
    } else {
        MoveAction::Noop
    };
    Ok((
        Poset::from_closed_unchecked(rel),
        MoveOutcome {
            kind: MoveKind::Link,
            pair: (x, y),
            action,
        },
    ))
}

/// One step of the mixed chain: a single uniform draw over
/// `{relation, link} × pairs` picks the move kind (fair coin) and the pair.
#[inline]
pub fn mcmc_step(p: &mut Poset, rng: &mut RandomStream) -> Result<MoveOutcome> {
    let n = p.size();
    if n < 2 {
        return Err(Error::TooFewElements { needed: 2, n });
    }
    Ok(step_unchecked(p, rng, pair_count(n)))
}

#[inline]
fn step_unchecked(p: &mut Poset, rng: &mut RandomStream, pairs: u64) -> MoveOutcome {
    let k = rng.uniform_index(2 * pairs).expect("pair count is positive for n >= 2");
    let (x, y) = decode_pair(k >> 1);
    if k & 1 == 0 {
        relation_move_unchecked(p, x, y)
    } else {
        link_move_unchecked(p, x, y)
    }
}

pub fn sweep(p: &mut Poset, rng: &mut RandomStream, moves: u64) -> Result<SweepStats> {
    sweep_with(p, rng, moves, MoveMix::Mixed)
}

/// Which proposals a chain draws from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum MoveMix {
    #[default]
    Mixed,
    RelationOnly,
    LinkOnly,
    /// Link moves that insert the edge for *any* unrelated pair, skipping
    /// the suitability test. The kernel is no longer symmetric; this exists
    /// as a negative control for validation.
    FaultyLinkAdd,
}

impl MoveMix {
    pub fn name(self) -> &'static str {
        match self {
            MoveMix::Mixed => "mixed",
            MoveMix::RelationOnly => "relation",
            MoveMix::LinkOnly => "link",
            MoveMix::FaultyLinkAdd => "faulty-link",
        }
    }
}

impl std::str::FromStr for MoveMix {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mixed" => Ok(MoveMix::Mixed),
            "relation" => Ok(MoveMix::RelationOnly),
            "link" => Ok(MoveMix::LinkOnly),
            "faulty-link" => Ok(MoveMix::FaultyLinkAdd),
            _ => Err(Error::InvalidArgument(format!("unknown move mix `{s}`"))),
        }
    }
}

pub fn sweep_with(p: &mut Poset, rng: &mut RandomStream, moves: u64, mix: MoveMix) -> Result<SweepStats> {
    let n = p.size();
    if n < 2 {
        return Err(Error::TooFewElements { needed: 2, n });
    }
    if moves == 0 {
        return Err(Error::InvalidArgument("a sweep needs at least one move".into()));
    }
    let pairs = pair_count(n);
    let mut stats = SweepStats::default();
    match mix {
        MoveMix::Mixed => {
            for _ in 0..moves {
                let outcome = step_unchecked(p, rng, pairs);
                stats.record(&outcome);
            }
        }
        MoveMix::RelationOnly | MoveMix::LinkOnly => {
            for _ in 0..moves {
                let k = rng.uniform_index(pairs)?;
                let (x, y) = decode_pair(k);
                let outcome = if mix == MoveMix::RelationOnly {
                    relation_move_unchecked(p, x, y)
                } else {
                    link_move_unchecked(p, x, y)
                };
                stats.record(&outcome);
            }
        }
        MoveMix::FaultyLinkAdd => {
            for _ in 0..moves {
                let k = rng.uniform_index(2 * pairs)?;
                let (x, y) = decode_pair(k >> 1);
                let outcome = if k & 1 == 0 {
                    relation_move_unchecked(p, x, y)
                } else {
                    faulty_link_move(p, x, y)
                };
                stats.record(&outcome);
            }
        }
    }
    Ok(stats)
}

fn faulty_link_move(p: &mut Poset, x: usize, y: usize) -> MoveOutcome {
    if p.precedes(x, y) {
        return link_move_unchecked(p, x, y);
    }
    let below = inclusive_row(p.past_row(x), x);
    let above = inclusive_row(p.future_row(y), y);
    let mut rel = p.relation_matrix().clone();
    for a in Ones::new(&below) {
        for (f, b) in rel.row_mut(a).iter_mut().zip(&above) {
            *f |= b;
        }
    }
    *p = Poset::from_closed_unchecked(rel);
    MoveOutcome {
        kind: MoveKind::Link,
        pair: (x, y),
        action: MoveAction::Added,
    }
}

/// Default bound on the number of states for [`exact_kernel`].
pub const MAX_KERNEL_STATES: usize = 10_000;

/// Dense transition matrix of the mixed chain over all naturally labeled
/// `n`-orders, in enumeration order.
#[derive(Debug, Clone)]
pub struct TransitionKernel {
    pub states: Vec<Poset>,
    pub matrix: Vec<Vec<f64>>,
}

impl TransitionKernel {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn index_of(&self, p: &Poset) -> Option<usize> {
        self.states.iter().position(|s| s == p)
    }

    pub fn max_asymmetry(&self) -> f64 {
        let m = &self.matrix;
        let mut worst: f64 = 0.0;
        for (i, row) in m.iter().enumerate() {
            for (j, &w) in row.iter().enumerate().skip(i + 1) {
                worst = worst.max((w - m[j][i]).abs());
            }
        }
        worst
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.max_asymmetry() <= tol
    }

    pub fn max_row_sum_error(&self) -> f64 {
        self.matrix
            .iter()
            .map(|row| (row.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Largest deviation of `uK` from `u` for the uniform vector `u`.
    pub fn uniform_stationarity_error(&self) -> f64 {
        let s = self.len();
        let u = 1.0 / s as f64;
        (0..s)
            .map(|j| ((0..s).map(|i| u * self.matrix[i][j]).sum::<f64>() - u).abs())
            .fold(0.0, f64::max)
    }

    fn reachable(&self, start: usize, forward: bool) -> Vec<bool> {
        let s = self.len();
        let mut seen = vec![false; s];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(i) = queue.pop_front() {
            for (j, seen_j) in seen.iter_mut().enumerate() {
                let w = if forward { self.matrix[i][j] } else { self.matrix[j][i] };
                if j != i && w > 0.0 && !*seen_j {
                    *seen_j = true;
                    queue.push_back(j);
                }
            }
        }
        seen
    }

    /// Every state reaches every other through off-diagonal transitions.
    pub fn is_strongly_connected(&self) -> bool {
        if self.is_empty() {
            return false;
        }
        self.reachable(0, true).iter().all(|&b| b) && self.reachable(0, false).iter().all(|&b| b)
    }

    /// Period of the chain (gcd of cycle lengths through state 0). Only
    /// meaningful for an irreducible kernel.
    pub fn period(&self) -> usize {
        fn gcd(a: usize, b: usize) -> usize {
            if b == 0 {
                a
            } else {
                gcd(b, a % b)
            }
        }
        let s = self.len();
        let mut level = vec![usize::MAX; s];
        level[0] = 0;
        let mut queue = VecDeque::from([0]);
        let mut g = 0;
        while let Some(i) = queue.pop_front() {
            for j in 0..s {
                if self.matrix[i][j] <= 0.0 {
                    continue;
                }
                if level[j] == usize::MAX {
                    level[j] = level[i] + 1;
                    queue.push_back(j);
                } else {
                    g = gcd(g, (level[i] + 1).abs_diff(level[j]));
                }
            }
        }
        g
    }

    pub fn has_self_loop(&self) -> bool {
        (0..self.len()).any(|i| self.matrix[i][i] > 0.0)
    }

    pub fn is_aperiodic(&self) -> bool {
        self.period() == 1
    }
}

pub fn exact_kernel(n: usize) -> Result<TransitionKernel> {
    exact_kernel_bounded(n, MAX_KERNEL_STATES)
}

/// Builds the kernel by applying every (move kind, pair) choice to every
/// state, each with probability `1/2 · 1/C(n,2)`.
pub fn exact_kernel_bounded(n: usize, max_states: usize) -> Result<TransitionKernel> {
    if n < 2 {
        return Err(Error::TooFewElements { needed: 2, n });
    }
    let count = enumeration::count(n, enumeration::DEFAULT_BOUND.max(n))?;
    if count > max_states as u64 {
        return Err(Error::BoundExceeded {
            what: "exact kernel state space",
            n,
            bound: max_states,
        });
    }
    let states = enumeration::collect(n)?;
    let index: HashMap<Poset, usize> = states.iter().cloned().enumerate().map(|(i, p)| (p, i)).collect();
    let pairs = pair_count(n);
    let weight = 0.5 / pairs as f64;
    let mut matrix = vec![vec![0.0; states.len()]; states.len()];
    for (i, s) in states.iter().enumerate() {
        for k in 0..pairs {
            let (x, y) = decode_pair(k);
            for kind in [MoveKind::Relation, MoveKind::Link] {
                let mut q = s.clone();
                match kind {
                    MoveKind::Relation => relation_move_unchecked(&mut q, x, y),
                    MoveKind::Link => link_move_unchecked(&mut q, x, y),
                };
                let j = index[&q];
                matrix[i][j] += weight;
            }
        }
    }
    Ok(TransitionKernel { states, matrix })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poset(n: usize, pairs: &[(usize, usize)]) -> Poset {
        Poset::generated_by(n, pairs).unwrap()
    }

    #[test]
    fn decode_pair_is_a_bijection() {
        let n = 90;
        let mut seen = std::collections::HashSet::new();
        for k in 0..pair_count(n) {
            let (x, y) = decode_pair(k);
            assert!(x < y && y < n, "{k} -> ({x},{y})");
            assert!(seen.insert((x, y)));
        }
        assert_eq!(seen.len() as u64, pair_count(n));
        assert_eq!(decode_pair(0), (0, 1));
        // exercise the float correction on large indices
        for y in [1_000_000u64, 50_000_000] {
            for x in [0, y - 1] {
                assert_eq!(decode_pair(y * (y - 1) / 2 + x), (x as usize, y as usize));
            }
        }
    }

    #[test]
    fn relation_move_examples() {
        let mut p = Poset::antichain(2).unwrap();
        let o = relation_move(&mut p, 0, 1).unwrap();
        assert_eq!(o.action, MoveAction::Added);
        assert_eq!(p, Poset::chain(2).unwrap());

        let o = relation_move(&mut p, 0, 1).unwrap();
        assert_eq!(o.action, MoveAction::Removed);
        assert_eq!(p, Poset::antichain(2).unwrap());

        let mut c = Poset::chain(3).unwrap();
        let o = relation_move(&mut c, 0, 2).unwrap();
        assert_eq!(o.action, MoveAction::Noop);
        assert!(!o.changed());
        assert_eq!(c, Poset::chain(3).unwrap());

        assert_eq!(relation_move(&mut c, 1, 1), Err(Error::UnorderedPair { x: 1, y: 1 }));
    }

    #[test]
    fn link_move_examples() {
        let mut c = Poset::chain(3).unwrap();
        let o = link_move(&mut c, 0, 1).unwrap();
        assert_eq!(o.action, MoveAction::Removed);
        assert_eq!(c.relations(), vec![(1, 2)]);
        assert!(c.validate().is_empty());

        let mut a = Poset::antichain(3).unwrap();
        assert_eq!(link_move(&mut a, 0, 2).unwrap().action, MoveAction::Added);
        assert_eq!(a.relations(), vec![(0, 2)]);

        let mut p = poset(3, &[(0, 2), (1, 2)]);
        let before = p.clone();
        assert_eq!(link_move(&mut p, 0, 1).unwrap().action, MoveAction::Noop);
        assert_eq!(p, before);

        assert!(link_move(&mut p, 2, 0).is_err());
    }

    #[test]
    fn link_removal_keeps_alternative_paths() {
        // 0 ⋖ 1 ⋖ 3 and 0 ⋖ 2 ⋖ 3: dropping 0 ⋖ 1 keeps 0 ≺ 3 through 2
        let mut p = poset(4, &[(0, 1), (1, 3), (0, 2), (2, 3)]);
        link_move(&mut p, 0, 1).unwrap();
        assert_eq!(p.relations(), vec![(0, 2), (0, 3), (1, 3), (2, 3)]);
        assert!(p.validate().is_empty());
    }

    #[test]
    fn n2_steps_toggle() {
        let mut rng = RandomStream::new(8);
        let mut p = Poset::antichain(2).unwrap();
        for i in 0..50 {
            let o = mcmc_step(&mut p, &mut rng).unwrap();
            assert_eq!(o.pair, (0, 1));
            assert!(o.changed());
            let expect = if i % 2 == 0 {
                Poset::chain(2)
            } else {
                Poset::antichain(2)
            };
            assert_eq!(p, expect.unwrap());
        }
        let mut single = Poset::antichain(1).unwrap();
        assert!(mcmc_step(&mut single, &mut rng).is_err());
    }

    #[test]
    fn step_is_deterministic_given_seed() {
        let mut rng_a = RandomStream::new(123);
        let mut rng_b = RandomStream::new(123);
        let mut a = Poset::chain(12).unwrap();
        let mut b = a.clone();
        for _ in 0..1000 {
            assert_eq!(
                mcmc_step(&mut a, &mut rng_a).unwrap(),
                mcmc_step(&mut b, &mut rng_b).unwrap()
            );
        }
        assert_eq!(a, b);
    }

    #[test]
    fn move_kind_is_a_fair_coin() {
        let mut rng = RandomStream::new(4);
        let mut p = Poset::antichain(10).unwrap();
        let steps = 100_000;
        let rel = (0..steps)
            .filter(|_| mcmc_step(&mut p, &mut rng).unwrap().kind == MoveKind::Relation)
            .count();
        let f = rel as f64 / steps as f64;
        assert!((f - 0.5).abs() < 3.0 * (0.25f64 / steps as f64).sqrt(), "{f}");
    }

    #[test]
    fn sweep_counts() {
        let mut rng = RandomStream::new(1);
        let mut p = Poset::antichain(2).unwrap();
        let s = sweep(&mut p, &mut rng, 4).unwrap();
        assert_eq!(s.attempted, 4);
        assert_eq!(s.relation_attempted + s.link_attempted, 4);
        assert!(sweep(&mut p, &mut rng, 0).is_err());
        assert_eq!(default_moves_per_sweep(47), 207_646);
    }

    #[test]
    fn kernel_n2_is_the_swap() {
        let k = exact_kernel(2).unwrap();
        assert_eq!(k.len(), 2);
        let a = k.index_of(&Poset::antichain(2).unwrap()).unwrap();
        let c = k.index_of(&Poset::chain(2).unwrap()).unwrap();
        assert_eq!(k.matrix[a][c], 1.0);
        assert_eq!(k.matrix[c][a], 1.0);
        assert_eq!(k.matrix[a][a], 0.0);
        assert!(k.is_symmetric(0.0));
        assert!(k.is_strongly_connected());
        assert_eq!(k.period(), 2);
        assert!(!k.is_aperiodic());
    }

    #[test]
    fn kernel_n3_and_n4() {
        let k = exact_kernel(3).unwrap();
        assert_eq!(k.len(), 7);
        assert!(k.is_symmetric(1e-12));
        assert!(k.max_row_sum_error() < 1e-12);
        assert!(k.uniform_stationarity_error() < 1e-12);
        assert!(k.is_strongly_connected() && k.is_aperiodic() && k.has_self_loop());

        let k = exact_kernel(4).unwrap();
        assert!(k.is_symmetric(1e-12));
        assert!(k.is_strongly_connected() && k.is_aperiodic());
    }

    #[test]
    fn kernel_bound_enforced() {
        assert!(matches!(exact_kernel_bounded(5, 100), Err(Error::BoundExceeded { .. })));
        assert!(matches!(exact_kernel(7), Err(Error::BoundExceeded { .. })));
        assert!(exact_kernel(1).is_err());
    }
}
