//! Naturally labeled partial orders on `0..n`.
//!
//! A [`Poset`] keeps three packed matrices in sync: the future rows
//! (`x ≺ y` is bit `y` of row `x`), the past rows (the transpose), and the
//! link rows (covering relations, i.e. the Hasse diagram). The relation is
//! always irreflexive, upper triangular and transitively closed.

use std::fmt;
use std::str::FromStr;

use crate::bits::{self, BitMatrix, ElementSet, Ones};
use crate::error::{Error, Result};
use crate::rng::RandomStream;

/// The four standard starting configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StartKind {
    Chain,
    Antichain,
    Bipartite,
    RandomKr,
}

impl StartKind {
    pub const ALL: [StartKind; 4] = [
        StartKind::Chain,
        StartKind::Antichain,
        StartKind::Bipartite,
        StartKind::RandomKr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StartKind::Chain => "chain",
            StartKind::Antichain => "antichain",
            StartKind::Bipartite => "bipartite",
            StartKind::RandomKr => "random_kr",
        }
    }
}

impl fmt::Display for StartKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StartKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "chain" => Ok(StartKind::Chain),
            "antichain" => Ok(StartKind::Antichain),
            "bipartite" => Ok(StartKind::Bipartite),
            "random_kr" | "kr" => Ok(StartKind::RandomKr),
            other => Err(Error::InvalidArgument(format!("unknown start kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Past,
    Future,
}

/// Classification of an ordered pair `x < y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PairClass {
    pub related: bool,
    pub link: bool,
    /// Unrelated, `past(x) ⊆ past(y)` and `fut(y) ⊆ fut(x)`.
    pub critical: bool,
    /// Unrelated, and no element of `incpast(x)` is linked to an element of `incfut(y)`.
    pub suitable: bool,
}

/// A broken poset invariant with its witnessing indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    Reflexive {
        x: usize,
    },
    LabelOrder {
        x: usize,
        y: usize,
    },
    MissingTransitive {
        x: usize,
        y: usize,
        via: usize,
    },
    /// A derived matrix (past or links) disagrees with the relation.
    StaleCache {
        matrix: &'static str,
        x: usize,
        y: usize,
    },
}

/// Reports every invariant a candidate relation matrix breaks.
///
/// Missing transitive pairs are reported once per pair, with the smallest
/// interpolating element as witness.
pub fn validate(rel: &BitMatrix) -> Vec<Violation> {
    let n = rel.size();
    let mut out = Vec::new();
    for x in 0..n {
        if rel.get(x, x) {
            out.push(Violation::Reflexive { x });
        }
        for y in rel.ones_in_row(x) {
            if y < x {
                out.push(Violation::LabelOrder { x, y });
            }
        }
    }
    for x in 0..n {
        let mut reported = vec![false; n];
        for z in rel.ones_in_row(x) {
            if z == x {
                continue;
            }
            for y in rel.ones_in_row(z) {
                if y != x && !rel.get(x, y) && !reported[y] {
                    reported[y] = true;
                    out.push(Violation::MissingTransitive { x, y, via: z });
                }
            }
        }
    }
    out.sort_by_key(|v| match *v {
        Violation::Reflexive { x } => (0, x, x),
        Violation::LabelOrder { x, y } => (1, x, y),
        Violation::MissingTransitive { x, y, .. } => (2, x, y),
        Violation::StaleCache { x, y, .. } => (3, x, y),
    });
    out
}

fn check_shape(rel: &BitMatrix) -> Result<()> {
    let n = rel.size();
    for x in 0..n {
        if let Some(y) = rel.ones_in_row(x).find(|&y| y <= x) {
            return Err(Error::MalformedMatrix(format!(
                "entry ({x}, {y}) is not strictly upper triangular"
            )));
        }
    }
    Ok(())
}

/// Smallest transitive superset of an irreflexive upper-triangular relation.
///
/// Rows are completed from the highest label down, so every row a given row
/// absorbs is already closed.
pub fn transitive_closure(rel: &BitMatrix) -> Result<BitMatrix> {
    check_shape(rel)?;
    let n = rel.size();
    let w = rel.words_per_row();
    let mut out = rel.clone();
    let mut acc = vec![0u64; w];
    for x in (0..n).rev() {
        acc.copy_from_slice(out.row(x));
        for y in rel.ones_in_row(x) {
            for (a, b) in acc.iter_mut().zip(out.row(y)) {
                *a |= b;
            }
        }
        out.row_mut(x).copy_from_slice(&acc);
    }
    Ok(out)
}

/// Links of a closed relation: `x ≺ y` with `fut(x) ∩ past(y) = ∅`.
fn reduce(future: &BitMatrix, past: &BitMatrix) -> BitMatrix {
    let n = future.size();
    let mut links = BitMatrix::new(n);
    for x in 0..n {
        for y in future.ones_in_row(x) {
            if bits::is_disjoint(future.row(x), past.row(y)) {
                links.set(x, y, true);
            }
        }
    }
    links
}

#[derive(Clone)]
pub struct Poset {
    n: usize,
    future: BitMatrix,
    past: BitMatrix,
    links: BitMatrix,
}

impl PartialEq for Poset {
    fn eq(&self, other: &Self) -> bool {
        self.future == other.future
    }
}

impl Eq for Poset {}

impl std::hash::Hash for Poset {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.future.hash(state)
    }
}

impl fmt::Debug for Poset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Poset({}) ", self.n)?;
        f.debug_list().entries(self.relations()).finish()
    }
}

impl Poset {
    pub fn antichain(n: usize) -> Result<Poset> {
        if n == 0 {
            return Err(Error::EmptyPoset);
        }
        Ok(Self::from_closed_unchecked(BitMatrix::new(n)))
    }

    pub fn chain(n: usize) -> Result<Poset> {
        if n == 0 {
            return Err(Error::EmptyPoset);
        }
        let mut rel = BitMatrix::new(n);
        for x in 0..n {
            for y in x + 1..n {
                rel.set(x, y, true);
            }
        }
        Ok(Self::from_closed_unchecked(rel))
    }

    /// Elements `0..⌊n/2⌋` each precede every element of `⌊n/2⌋..n`.
    pub fn bipartite(n: usize) -> Result<Poset> {
        if n == 0 {
            return Err(Error::EmptyPoset);
        }
        let half = n / 2;
        let mut rel = BitMatrix::new(n);
        for x in 0..half {
            for y in half..n {
                rel.set(x, y, true);
            }
        }
        Ok(Self::from_closed_unchecked(rel))
    }

    /// A random three-layer order: middle layer `⌊n/2⌋`, bottom layer
    /// Poisson(`⌊n/4⌋`) clamped to what is left, top layer the rest.
    /// Adjacent-layer pairs are related with probability 1/2 and every
    /// bottom–top pair is related. Lower layers get lower labels.
    pub fn random_kr(n: usize, rng: &mut RandomStream) -> Result<Poset> {
        if n == 0 {
            return Err(Error::EmptyPoset);
        }
        let middle = n / 2;
        let bottom = (rng.poisson((n / 4) as f64)? as usize).min(n - middle);
        let (m0, t0) = (bottom, bottom + middle);
        let mut rel = BitMatrix::new(n);
        for x in 0..m0 {
            for y in m0..t0 {
                if rng.coin() {
                    rel.set(x, y, true);
                }
            }
            for y in t0..n {
                rel.set(x, y, true);
            }
        }
        for x in m0..t0 {
            for y in t0..n {
                if rng.coin() {
                    rel.set(x, y, true);
                }
            }
        }
        Ok(Self::from_closed_unchecked(rel))
    }

    pub fn construct(kind: StartKind, n: usize, rng: Option<&mut RandomStream>) -> Result<Poset> {
        match kind {
            StartKind::Chain => Poset::chain(n),
            StartKind::Antichain => Poset::antichain(n),
            StartKind::Bipartite => Poset::bipartite(n),
            StartKind::RandomKr => match rng {
                Some(rng) => Poset::random_kr(n, rng),
                None if n == 0 => Err(Error::EmptyPoset),
                None => Err(Error::MissingRng("random_kr")),
            },
        }
    }

    /// Wraps a relation matrix that must already be a valid closed order.
    pub fn from_relation(rel: BitMatrix) -> Result<Poset> {
        if rel.size() == 0 {
            return Err(Error::EmptyPoset);
        }
        let violations = validate(&rel);
        if let Some(v) = violations.first() {
            return Err(Error::MalformedMatrix(format!("{v:?}")));
        }
        Ok(Self::from_closed_unchecked(rel))
    }

    /// The order generated by the given pairs (closure is taken).
    pub fn generated_by(n: usize, pairs: &[(usize, usize)]) -> Result<Poset> {
        if n == 0 {
            return Err(Error::EmptyPoset);
        }
        if let Some(&(x, y)) = pairs.iter().find(|&&(x, y)| x >= n || y >= n) {
            return Err(Error::ElementOutOfRange { element: x.max(y), n });
        }
        let rel = transitive_closure(&BitMatrix::from_pairs(n, pairs))?;
        Ok(Self::from_closed_unchecked(rel))
    }

    pub(crate) fn from_closed_unchecked(future: BitMatrix) -> Poset {
        let past = future.transpose();
        let links = reduce(&future, &past);
        Poset {
            n: future.size(),
            future,
            past,
            links,
        }
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn precedes(&self, x: usize, y: usize) -> bool {
        self.future.get(x, y)
    }

    #[inline]
    pub fn is_link(&self, x: usize, y: usize) -> bool {
        self.links.get(x, y)
    }

    pub fn relation_matrix(&self) -> &BitMatrix {
        &self.future
    }

    pub fn link_matrix(&self) -> &BitMatrix {
        &self.links
    }

    #[inline]
    pub fn future_row(&self, x: usize) -> &[u64] {
        self.future.row(x)
    }

    #[inline]
    pub fn past_row(&self, x: usize) -> &[u64] {
        self.past.row(x)
    }

    #[inline]
    pub fn link_row(&self, x: usize) -> &[u64] {
        self.links.row(x)
    }

    pub fn relations(&self) -> Vec<(usize, usize)> {
        self.future.pairs()
    }

    pub fn relation_count(&self) -> usize {
        self.future.count_ones()
    }

    pub fn link_count(&self) -> usize {
        self.links.count_ones()
    }

    fn check_element(&self, x: usize) -> Result<()> {
        if x >= self.n {
            Err(Error::ElementOutOfRange { element: x, n: self.n })
        } else {
            Ok(())
        }
    }

    pub(crate) fn check_pair(&self, x: usize, y: usize) -> Result<()> {
        self.check_element(x)?;
        self.check_element(y)?;
        if x >= y {
            return Err(Error::UnorderedPair { x, y });
        }
        Ok(())
    }

    pub fn cone(&self, x: usize, direction: Direction, inclusive: bool) -> Result<ElementSet> {
        self.check_element(x)?;
        let row = match direction {
            Direction::Past => self.past.row(x),
            Direction::Future => self.future.row(x),
        };
        let mut set = ElementSet::from_words(row.to_vec());
        if inclusive {
            set.insert(x);
        }
        Ok(set)
    }

    pub fn classify_pair(&self, x: usize, y: usize) -> Result<PairClass> {
        self.check_pair(x, y)?;
        let related = self.precedes(x, y);
        if related {
            let link = bits::is_disjoint(self.future.row(x), self.past.row(y));
            return Ok(PairClass {
                related,
                link,
                critical: false,
                suitable: false,
            });
        }
        Ok(PairClass {
            related,
            link: false,
            critical: self.is_critical_unrelated(x, y),
            suitable: self.is_suitable_unrelated(x, y),
        })
    }

    #[inline]
    pub(crate) fn is_critical_unrelated(&self, x: usize, y: usize) -> bool {
        bits::is_subset(self.past.row(x), self.past.row(y)) && bits::is_subset(self.future.row(y), self.future.row(x))
    }

    /// Assumes `x` and `y` unrelated.
    #[inline]
    pub(crate) fn is_suitable_unrelated(&self, x: usize, y: usize) -> bool {
        let fut_y = self.future.row(y);
        let hits = |z: usize| {
            let links = self.links.row(z);
            bits::test_bit(links, y) || !bits::is_disjoint(links, fut_y)
        };
        if hits(x) {
            return false;
        }
        !Ones::new(self.past.row(x)).any(hits)
    }

    /// The link matrix recomputed from the relation alone.
    pub fn transitive_reduction(&self) -> BitMatrix {
        reduce(&self.future, &self.past)
    }

    /// The dual order relabeled by `x ↦ n−1−x`, so it stays naturally labeled.
    pub fn time_reverse(&self) -> Poset {
        let n = self.n;
        let mut rel = BitMatrix::new(n);
        for (a, b) in self.relations() {
            rel.set(n - 1 - b, n - 1 - a, true);
        }
        Self::from_closed_unchecked(rel)
    }

    /// Checks the relation invariants and that the derived matrices agree
    /// with the relation.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = validate(&self.future);
        let stale = |name: &'static str, have: &BitMatrix, want: &BitMatrix, out: &mut Vec<Violation>| {
            for x in 0..self.n {
                for y in 0..self.n {
                    if have.get(x, y) != want.get(x, y) {
                        out.push(Violation::StaleCache { matrix: name, x, y });
                    }
                }
            }
        };
        stale("past", &self.past, &self.future.transpose(), &mut out);
        stale("links", &self.links, &self.transitive_reduction(), &mut out);
        out
    }

    /// Raw access for the moves, which maintain the invariants themselves.
    pub(crate) fn parts_mut(&mut self) -> (&mut BitMatrix, &mut BitMatrix, &mut BitMatrix) {
        (&mut self.future, &mut self.past, &mut self.links)
    }
}

/// Text form: first line `n`, then one `x y` line per relation of the
/// closed relation, in row-major order.
impl fmt::Display for Poset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.n)?;
        for (x, y) in self.relations() {
            writeln!(f, "{x} {y}")?;
        }
        Ok(())
    }
}

impl FromStr for Poset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Poset> {
        let mut lines = s
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let (line, first) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "missing element count".into(),
        })?;
        let n: usize = first.parse().map_err(|_| Error::Parse {
            line,
            msg: format!("bad element count `{first}`"),
        })?;
        if n == 0 {
            return Err(Error::EmptyPoset);
        }
        let mut rel = BitMatrix::new(n);
        for (line, text) in lines {
            let mut it = text.split_whitespace().map(str::parse::<usize>);
            let (x, y) = match (it.next(), it.next(), it.next()) {
                (Some(Ok(x)), Some(Ok(y)), None) => (x, y),
                _ => {
                    return Err(Error::Parse {
                        line,
                        msg: format!("expected `x y`, got `{text}`"),
                    })
                }
            };
            if x >= n || y >= n {
                return Err(Error::Parse {
                    line,
                    msg: format!("element out of range in `{text}`"),
                });
            }
            rel.set(x, y, true);
        }
        Poset::from_relation(rel)
    }
}
