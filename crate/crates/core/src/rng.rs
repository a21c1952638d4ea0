//! Seedable random streams.
//!
//! The default engine is the three-component maximally equidistributed
//! combined Tausworthe generator (`taus2`), bit-compatible with the GNU
//! Scientific Library implementation including its seeding procedure. A
//! SplitMix64 engine is available behind the same interface.
//!
//! Per-chain streams are derived from a master seed with [`RandomStream::split`]:
//! the chain index is passed through the SplitMix64 finalizer, xor-ed into the
//! master seed, and the result drives a SplitMix64 sequence whose outputs fill
//! the engine's state words.

use std::fmt;
use std::str::FromStr;

use rand_core::RngCore;
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Taus2,
    SplitMix64,
}

impl Algorithm {
    pub fn id(self) -> &'static str {
        match self {
            Algorithm::Taus2 => "taus2",
            Algorithm::SplitMix64 => "splitmix64",
        }
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "taus2" => Ok(Algorithm::Taus2),
            "splitmix64" => Ok(Algorithm::SplitMix64),
            other => Err(Error::InvalidArgument(format!("unknown rng algorithm `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Engine {
    Taus2([u32; 3]),
    SplitMix64(u64),
}

#[inline]
fn tausworthe(s: u32, a: u32, b: u32, c: u32, d: u32) -> u32 {
    ((s & c) << d) ^ (((s << a) ^ s) >> b)
}

impl Engine {
    #[inline]
    fn next_word(&mut self) -> u32 {
        match self {
            Engine::Taus2(s) => {
                s[0] = tausworthe(s[0], 13, 19, 4_294_967_294, 12);
                s[1] = tausworthe(s[1], 2, 25, 4_294_967_288, 4);
                s[2] = tausworthe(s[2], 3, 11, 4_294_967_280, 17);
                s[0] ^ s[1] ^ s[2]
            }
            Engine::SplitMix64(state) => (splitmix64(state) >> 32) as u32,
        }
    }

    fn taus2_from_words(mut s: [u32; 3]) -> Engine {
        // Each component needs enough nonzero high bits to be full period.
        if s[0] < 2 {
            s[0] += 2;
        }
        if s[1] < 8 {
            s[1] += 8;
        }
        if s[2] < 16 {
            s[2] += 16;
        }
        let mut e = Engine::Taus2(s);
        for _ in 0..6 {
            e.next_word();
        }
        e
    }

    fn state_words(&self) -> Vec<u64> {
        match self {
            Engine::Taus2(s) => s.iter().map(|&w| w as u64).collect(),
            Engine::SplitMix64(state) => vec![*state],
        }
    }

    fn algorithm(&self) -> Algorithm {
        match self {
            Engine::Taus2(_) => Algorithm::Taus2,
            Engine::SplitMix64(_) => Algorithm::SplitMix64,
        }
    }
}

#[inline]
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    mix64(*state)
}

/// SplitMix64 output finalizer; a bijection on 64-bit words.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A reproducible stream of 32-bit words plus the distributions the sampler
/// draws from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RandomStream {
    engine: Engine,
    draws: u64,
}

impl RandomStream {
    /// Default engine seeded exactly like GSL's `gsl_rng_set(gsl_rng_taus2, seed)`.
    pub fn new(seed: u64) -> Self {
        Self::with_algorithm(Algorithm::Taus2, seed)
    }

    pub fn with_algorithm(algorithm: Algorithm, seed: u64) -> Self {
        let engine = match algorithm {
            Algorithm::Taus2 => {
                let seed = if seed == 0 { 1 } else { seed };
                let lcg = |v: u64| (69069u64.wrapping_mul(v) & 0xffff_ffff) as u32;
                let s1 = lcg(seed);
                let s1 = if s1 < 2 { s1 + 2 } else { s1 };
                let s2 = lcg(s1 as u64);
                let s2 = if s2 < 8 { s2 + 8 } else { s2 };
                let s3 = lcg(s2 as u64);
                Engine::taus2_from_words([s1, s2, s3])
            }
            Algorithm::SplitMix64 => Engine::SplitMix64(seed),
        };
        RandomStream { engine, draws: 0 }
    }

    /// Independent stream number `index` derived from `master`.
    pub fn split(master: u64, index: u64) -> Self {
        Self::split_with(Algorithm::Taus2, master, index)
    }

    pub fn split_with(algorithm: Algorithm, master: u64, index: u64) -> Self {
        let mut sm = master ^ mix64(index.wrapping_add(1));
        let engine = match algorithm {
            Algorithm::Taus2 => Engine::taus2_from_words([
                splitmix64(&mut sm) as u32,
                splitmix64(&mut sm) as u32,
                splitmix64(&mut sm) as u32,
            ]),
            Algorithm::SplitMix64 => Engine::SplitMix64(splitmix64(&mut sm)),
        };
        RandomStream { engine, draws: 0 }
    }

    pub fn algorithm(&self) -> Algorithm {
        self.engine.algorithm()
    }

    /// Number of words drawn since creation.
    pub fn draws(&self) -> u64 {
        self.draws
    }

    #[inline]
    pub fn next_word(&mut self) -> u32 {
        self.draws += 1;
        self.engine.next_word()
    }

    /// Uniform on [0, 1) with 32-bit resolution.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.next_word() as f64 / 4_294_967_296.0
    }

    #[inline]
    pub fn coin(&mut self) -> bool {
        self.next_word() >> 31 == 1
    }

    /// Exactly uniform integer in `[0, k)` by rejection.
    #[inline]
    pub fn uniform_index(&mut self, k: u64) -> Result<u64> {
        if k == 0 {
            return Err(Error::InvalidArgument("uniform_index needs k >= 1".into()));
        }
        if k <= 1 << 32 {
            // Largest multiple of k not exceeding 2^32.
            let limit = (1u64 << 32) - (1u64 << 32) % k;
            loop {
                let w = self.next_word() as u64;
                if w < limit {
                    return Ok(w % k);
                }
            }
        }
        let rem = (u64::MAX % k + 1) % k;
        let limit = u64::MAX - rem;
        loop {
            let w = (self.next_word() as u64) << 32 | self.next_word() as u64;
            if rem == 0 || w < limit {
                return Ok(w % k);
            }
        }
    }

    /// Poisson-distributed count.
    pub fn poisson(&mut self, mean: f64) -> Result<u64> {
        if !mean.is_finite() || mean < 0.0 {
            return Err(Error::InvalidArgument(format!("poisson mean must be >= 0, got {mean}")));
        }
        if mean == 0.0 {
            return Ok(0);
        }
        let dist = Poisson::new(mean).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        Ok(dist.sample(self) as u64)
    }

    pub fn state(&self) -> StreamState {
        StreamState {
            algorithm: self.algorithm(),
            words: self.engine.state_words(),
            draws: self.draws,
        }
    }

    pub fn from_state(state: &StreamState) -> Result<Self> {
        let engine = match state.algorithm {
            Algorithm::Taus2 => {
                let w: Vec<u32> = state
                    .words
                    .iter()
                    .map(|&w| u32::try_from(w))
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| Error::InvalidArgument("taus2 state word exceeds 32 bits".into()))?;
                let s: [u32; 3] = w
                    .try_into()
                    .map_err(|_| Error::InvalidArgument("taus2 state needs 3 words".into()))?;
                Engine::Taus2(s)
            }
            Algorithm::SplitMix64 => match state.words.as_slice() {
                [w] => Engine::SplitMix64(*w),
                _ => return Err(Error::InvalidArgument("splitmix64 state needs 1 word".into())),
            },
        };
        Ok(RandomStream {
            engine,
            draws: state.draws,
        })
    }
}

impl RngCore for RandomStream {
    fn next_u32(&mut self) -> u32 {
        self.next_word()
    }

    fn next_u64(&mut self) -> u64 {
        let lo = self.next_word() as u64;
        let hi = self.next_word() as u64;
        hi << 32 | lo
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        rand_core::impls::fill_bytes_via_next(self, dst)
    }
}

/// Serialized stream state: `<algorithm>:<hex word>,...:<draw count>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamState {
    pub algorithm: Algorithm,
    pub words: Vec<u64>,
    pub draws: u64,
}

impl fmt::Display for StreamState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let words: Vec<String> = self.words.iter().map(|w| format!("{w:x}")).collect();
        write!(f, "{}:{}:{}", self.algorithm.id(), words.join(","), self.draws)
    }
}

impl FromStr for StreamState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("malformed rng state `{s}`"));
        let mut parts = s.trim().split(':');
        let algorithm = parts.next().ok_or_else(bad)?.parse()?;
        let words = parts
            .next()
            .ok_or_else(bad)?
            .split(',')
            .map(|w| u64::from_str_radix(w, 16).map_err(|_| bad()))
            .collect::<Result<Vec<_>>>()?;
        let draws = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        if parts.next().is_some() {
            return Err(bad());
        }
        Ok(StreamState {
            algorithm,
            words,
            draws,
        })
    }
}
