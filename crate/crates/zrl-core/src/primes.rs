//! Prime sieving and the explicit prime-counting, Mertens and prime-power-sum
//! quantities used by every pipeline.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Result, ZrlError};
use crate::util::{CompensatedSum, EXP_GAMMA};

const MAX_LIMIT: u64 = 1_000_000_000;
const CACHE_MAGIC: &[u8; 8] = b"ZRLPRIME";
const CACHE_VERSION: u32 = 1;

/// Sieved primes up to `limit` with prefix counts pi(x) and prefix log-sums
/// theta(x) = sum_{p <= x} log p.
///
/// Immutable after construction; queries are pure and cheap (binary search
/// plus table lookup), so a table can be shared freely across threads.
#[derive(Clone, Debug)]
pub struct PrimeTable {
    limit: u64,
    primes: Vec<u32>,
    theta_prefix: Vec<f64>,
}

impl PrimeTable {
    /// Segmented sieve of Eratosthenes. 64-bit limit, bounded at 1e9.
    pub fn sieve(limit: u64) -> Result<PrimeTable> {
        if limit < 2 {
            return Err(ZrlError::Config(format!(
                "sieve limit {limit} below the smallest prime"
            )));
        }
        if limit > MAX_LIMIT {
            return Err(ZrlError::Config(format!(
                "sieve limit {limit} exceeds the supported bound {MAX_LIMIT}"
            )));
        }
        let primes = sieve_segmented(limit);
        Ok(Self::from_primes(limit, primes))
    }

    fn from_primes(limit: u64, primes: Vec<u32>) -> PrimeTable {
        let mut theta_prefix = Vec::with_capacity(primes.len() + 1);
        theta_prefix.push(0.0);
        let mut acc = CompensatedSum::new();
        for &p in &primes {
            acc.add((p as f64).ln());
            theta_prefix.push(acc.total());
        }
        PrimeTable {
            limit,
            primes,
            theta_prefix,
        }
    }

    pub fn limit(&self) -> u64 {
        self.limit
    }

    pub fn primes(&self) -> &[u32] {
        &self.primes
    }

    /// pi(x): number of primes <= x.
    pub fn pi(&self, x: f64) -> u64 {
        if x < 2.0 {
            return 0;
        }
        self.primes.partition_point(|&p| (p as f64) <= x) as u64
    }

    /// theta(x) = sum_{p <= x} ln p (Chebyshev function).
    pub fn theta(&self, x: f64) -> f64 {
        let k = self.primes.partition_point(|&p| (p as f64) <= x);
        self.theta_prefix[k]
    }

    /// Primes in the half-open interval `(lo, hi]` as a slice.
    pub fn primes_in(&self, lo: f64, hi: f64) -> &[u32] {
        let a = self.primes.partition_point(|&p| (p as f64) <= lo);
        let b = self.primes.partition_point(|&p| (p as f64) <= hi);
        &self.primes[a..b]
    }

    fn require(&self, x: f64) -> Result<()> {
        if x > self.limit as f64 {
            Err(ZrlError::TableTooSmall {
                needed: x,
                limit: self.limit,
            })
        } else {
            Ok(())
        }
    }

    /// prod_{p <= x} (1 - 1/p), computed as exp of a compensated sum of
    /// log(1 - 1/p) in ascending prime order, together with the explicit
    /// Rosser–Schoenfeld bracket around 1/(e^gamma log x) valid for x > 1000.
    ///
    /// Bracket violations are reported, never clamped.
    pub fn mertens_product(&self, x: f64) -> Result<MertensReport> {
        if x <= 1000.0 {
            return Err(ZrlError::Domain(format!(
                "Mertens bracket requires x > 1000, got {x}"
            )));
        }
        self.require(x)?;
        let mut acc = CompensatedSum::new();
        for &p in self.primes_in(0.0, x) {
            acc.add((-1.0 / p as f64).ln_1p());
        }
        let product = acc.total().exp();
        let lx = x.ln();
        let center = 1.0 / (EXP_GAMMA * lx);
        let half = 0.5 / (lx * lx);
        let bracket_lo = center * (1.0 - half);
        let bracket_hi = center * (1.0 + half);
        Ok(MertensReport {
            x,
            product,
            bracket_lo,
            bracket_hi,
            within_bracket: product > bracket_lo && product < bracket_hi,
        })
    }

    /// pi(x) log x - theta(x), with the comparator x / log x.
    pub fn chebyshev_gap(&self, x: f64) -> Result<ChebyshevGap> {
        if x < 2.0 {
            return Err(ZrlError::Domain(format!(
                "chebyshev gap needs x >= 2, got {x}"
            )));
        }
        self.require(x)?;
        let gap = self.pi(x) as f64 * x.ln() - self.theta(x);
        let comparator = x / x.ln();
        Ok(ChebyshevGap {
            x,
            gap,
            comparator,
            ratio: gap / comparator,
        })
    }

    /// sum_{lo < p <= hi} p^(-sigma), compensated in ascending prime order.
    ///
    /// The comparator x^(1-sigma)/((1-sigma) log x) is evaluated at both
    /// endpoints when sigma < 1; at sigma = 1 it is marked inapplicable
    /// (the 1-sigma denominator vanishes).
    pub fn prime_power_sum(&self, lo: f64, hi: f64, sigma: f64) -> Result<PrimePowerSum> {
        if !(sigma > 0.0 && sigma <= 1.0) {
            return Err(ZrlError::Domain(format!(
                "prime power sum needs 0 < sigma <= 1, got {sigma}"
            )));
        }
        if lo < 0.0 || hi < lo {
            return Err(ZrlError::Domain(format!(
                "bad interval ({lo}, {hi}]"
            )));
        }
        self.require(hi)?;
        let mut acc = CompensatedSum::new();
        for &p in self.primes_in(lo, hi) {
            acc.add((-(sigma) * (p as f64).ln()).exp());
        }
        let comparator = |x: f64| {
            if x < 2.0 {
                0.0
            } else {
                x.powf(1.0 - sigma) / ((1.0 - sigma) * x.ln())
            }
        };
        let (clo, chi) = if sigma < 1.0 {
            (Some(comparator(lo)), Some(comparator(hi)))
        } else {
            (None, None)
        };
        Ok(PrimePowerSum {
            lo,
            hi,
            sigma,
            value: acc.total(),
            comparator_lo: clo,
            comparator_hi: chi,
        })
    }

    /// Exact count of primes in I_j = (f^j L, f^{j+1} L] with
    /// L = log N * loglog N, plus the density comparator (f-1) f^j log N.
    pub fn interval_prime_count(
        &self,
        j: u32,
        f: f64,
        log_n: f64,
        loglog_n: f64,
    ) -> Result<IntervalCount> {
        if f <= 1.0 {
            return Err(ZrlError::Domain(format!(
                "interval ratio must satisfy f > 1, got {f}"
            )));
        }
        if log_n <= 0.0 || loglog_n <= 0.0 {
            return Err(ZrlError::Domain(
                "interval scale log N and loglog N must be positive".into(),
            ));
        }
        let scale = log_n * loglog_n;
        let lo = f.powi(j as i32) * scale;
        let hi = f.powi(j as i32 + 1) * scale;
        self.require(hi)?;
        let count = self.pi(hi) - self.pi(lo);
        Ok(IntervalCount {
            j,
            lo,
            hi,
            count,
            comparator: (f - 1.0) * f.powi(j as i32) * log_n,
        })
    }

    /// Write the table as a small binary cache: magic, version, limit, then
    /// delta-encoded prime gaps (u16 little-endian; the first delta is from 0).
    pub fn write_cache<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(CACHE_MAGIC)?;
        w.write_all(&CACHE_VERSION.to_le_bytes())?;
        w.write_all(&self.limit.to_le_bytes())?;
        w.write_all(&(self.primes.len() as u64).to_le_bytes())?;
        let mut prev = 0u32;
        for &p in &self.primes {
            let gap = p - prev;
            debug_assert!(gap <= u16::MAX as u32);
            w.write_all(&(gap as u16).to_le_bytes())?;
            prev = p;
        }
        w.flush()?;
        Ok(())
    }

    /// Read a cache written by [`PrimeTable::write_cache`].
    pub fn read_cache<P: AsRef<Path>>(path: P) -> Result<PrimeTable> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != CACHE_MAGIC {
            return Err(ZrlError::Cache("bad magic".into()));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        if u32::from_le_bytes(b4) != CACHE_VERSION {
            return Err(ZrlError::Cache("unsupported version".into()));
        }
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        let limit = u64::from_le_bytes(b8);
        if limit < 2 || limit > MAX_LIMIT {
            return Err(ZrlError::Cache(format!("limit {limit} out of range")));
        }
        r.read_exact(&mut b8)?;
        let count = u64::from_le_bytes(b8) as usize;
        let mut primes = Vec::with_capacity(count);
        let mut prev = 0u64;
        let mut b2 = [0u8; 2];
        for _ in 0..count {
            r.read_exact(&mut b2)?;
            let gap = u16::from_le_bytes(b2) as u64;
            if gap == 0 {
                return Err(ZrlError::Cache("zero gap".into()));
            }
            prev += gap;
            if prev > limit {
                return Err(ZrlError::Cache("prime beyond stated limit".into()));
            }
            primes.push(prev as u32);
        }
        Ok(PrimeTable::from_primes(limit, primes))
    }
}

/// Mertens product value with its explicit bracket.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct MertensReport {
    pub x: f64,
    pub product: f64,
    pub bracket_lo: f64,
    pub bracket_hi: f64,
    pub within_bracket: bool,
}

/// pi(x) log x - theta(x) against x/log x.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ChebyshevGap {
    pub x: f64,
    pub gap: f64,
    pub comparator: f64,
    pub ratio: f64,
}

/// Interval prime power sum with the density comparator at both endpoints.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct PrimePowerSum {
    pub lo: f64,
    pub hi: f64,
    pub sigma: f64,
    pub value: f64,
    pub comparator_lo: Option<f64>,
    pub comparator_hi: Option<f64>,
}

/// Exact prime count of one construction interval.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct IntervalCount {
    pub j: u32,
    pub lo: f64,
    pub hi: f64,
    pub count: u64,
    pub comparator: f64,
}

fn sieve_segmented(limit: u64) -> Vec<u32> {
    let limit = limit as usize;
    let root = (limit as f64).sqrt() as usize + 1;

    // Base sieve up to sqrt(limit).
    let mut base = vec![true; root + 1];
    base[0] = false;
    if root >= 1 {
        base[1] = false;
    }
    let mut i = 2;
    while i * i <= root {
        if base[i] {
            let mut j = i * i;
            while j <= root {
                base[j] = false;
                j += i;
            }
        }
        i += 1;
    }
    let base_primes: Vec<usize> = (2..=root).filter(|&p| base[p]).collect();

    let reserve = if limit >= 17 {
        (limit as f64 / (limit as f64).ln() * 1.15) as usize
    } else {
        8
    };
    let mut primes: Vec<u32> = Vec::with_capacity(reserve);

    const SEGMENT: usize = 1 << 20;
    let mut seg = vec![true; SEGMENT];
    let mut lo = 2usize;
    while lo <= limit {
        let hi = (lo + SEGMENT - 1).min(limit);
        let len = hi - lo + 1;
        seg[..len].fill(true);
        for &p in &base_primes {
            if p * p > hi {
                break;
            }
            let start = std::cmp::max(p * p, lo.div_ceil(p) * p);
            let mut j = start;
            while j <= hi {
                seg[j - lo] = false;
                j += p;
            }
        }
        for (off, &is_p) in seg[..len].iter().enumerate() {
            if is_p {
                primes.push((lo + off) as u32);
            }
        }
        lo = hi + 1;
    }
    primes
}
