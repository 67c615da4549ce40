//! Kloosterman sums at prime moduli.
//!
//! Raw sums S(a,b;q) = Σ_{d mod q, d≠0} e_q(ad + b·d̄) are evaluated by
//! direct summation; the full normalized table
//!
//! ```text
//! Kl(a;q) = S(a,1;q)/√q,   a = 0..q−1
//! ```
//!
//! comes from a single length-q DFT of d ↦ e_q(d̄). For prime q these
//! sums are real (pair d with −d̄... more precisely d ↦ d̄ symmetry), and
//! |Kl(a;q)| ≤ 2 for a ≢ 0 by Weil's bound, while Kl(0;q) = −1/√q is a
//! Ramanujan sum. Tables are cached per q because the §-style scans
//! revisit the same modulus constantly.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use once_cell::sync::Lazy;
use thiserror::Error;

use crate::ffq::{build_context, dft_mod_q, AdditiveCharTable, FfqError, InverseTable, PrimeModulus};

#[derive(Debug, Error)]
pub enum KloostermanError {
    #[error(transparent)]
    Ffq(#[from] FfqError),
    #[error("Weil bound violated at q={q}, a={a}: |Kl|={value}")]
    BoundViolation { q: u64, a: u64, value: f64 },
}

/// Direct evaluation of S(a,b;q) = Σ_{d=1}^{q−1} e_q(ad + b·d̄).
pub fn kloosterman_raw(a: u64, b: u64, q: PrimeModulus) -> Complex64 {
    let chars = AdditiveCharTable::new(q);
    let inv = InverseTable::new(q);
    kloosterman_raw_with(a, b, q, &chars, &inv)
}

pub fn kloosterman_raw_with(
    a: u64,
    b: u64,
    q: PrimeModulus,
    chars: &AdditiveCharTable,
    inv: &InverseTable,
) -> Complex64 {
    let n = q.get();
    let a = a % n;
    let b = b % n;
    let mut acc = Complex64::new(0.0, 0.0);
    for d in 1..n {
        acc += chars.eq_u(a * d + b * inv.inv(d));
    }
    acc
}

/// Normalized Kloosterman values Kl(a;q) for one prime q, stored as reals
/// after asserting the imaginary parts of the raw sums vanish.
#[derive(Debug)]
pub struct KloostermanTable {
    q: PrimeModulus,
    kl: Vec<f64>,
    max_imag: f64,
}

impl KloostermanTable {
    /// Build via one DFT: out[a] = Σ_{d≠0} e_q(d̄)·e_q(ad) = S(a,1;q).
    pub fn build(q: PrimeModulus) -> Result<Self, KloostermanError> {
        let (_, chars, inv) = build_context(q.get())?;
        let n = q.as_usize();
        let mut x = vec![Complex64::new(0.0, 0.0); n];
        for d in 1..n as u64 {
            x[d as usize] = chars.eq_u(inv.inv(d));
        }
        let raw = dft_mod_q(&x, q)?;
        let scale = 1.0 / (q.get() as f64).sqrt();
        let mut max_imag = 0.0f64;
        let kl = raw
            .iter()
            .map(|v| {
                max_imag = max_imag.max((v.im * scale).abs());
                v.re * scale
            })
            .collect();
        let table = KloostermanTable { q, kl, max_imag };
        table.check_weil()?;
        Ok(table)
    }

    #[inline]
    pub fn modulus(&self) -> PrimeModulus {
        self.q
    }

    /// Kl(a;q), index reduced mod q.
    #[inline]
    pub fn kl(&self, a: u64) -> f64 {
        self.kl[(a % self.q.get()) as usize]
    }

    #[inline]
    pub fn kl_i(&self, a: i64) -> f64 {
        self.kl[self.q.reduce_i64(a) as usize]
    }

    pub fn values(&self) -> &[f64] {
        &self.kl
    }

    /// Largest |Im S(a,1;q)|/√q seen while building; realness witness.
    pub fn max_imag(&self) -> f64 {
        self.max_imag
    }

    fn check_weil(&self) -> Result<(), KloostermanError> {
        let (max, argmax) = self.weil_extremum();
        if max > 2.0 + 1e-9 {
            return Err(KloostermanError::BoundViolation {
                q: self.q.get(),
                a: argmax,
                value: max,
            });
        }
        Ok(())
    }

    /// (max_{1≤a<q} |Kl(a;q)|, argmax).
    pub fn weil_extremum(&self) -> (f64, u64) {
        let mut max = 0.0f64;
        let mut arg = 1u64;
        for a in 1..self.q.get() {
            let v = self.kl[a as usize].abs();
            if v > max {
                max = v;
                arg = a;
            }
        }
        (max, arg)
    }
}

/// Report from `verify_weil`.
#[derive(Debug, Clone, serde::Serialize)]
pub struct WeilReport {
    pub q: u64,
    pub max_abs: f64,
    pub argmax: u64,
    pub max_imag: f64,
}

pub fn verify_weil(q: PrimeModulus) -> Result<WeilReport, KloostermanError> {
    let t = table(q)?;
    let (max_abs, argmax) = t.weil_extremum();
    Ok(WeilReport {
        q: q.get(),
        max_abs,
        argmax,
        max_imag: t.max_imag(),
    })
}

static CACHE: Lazy<Mutex<HashMap<u64, Arc<KloostermanTable>>>> =
    Lazy::new(|| Mutex::new(HashMap::new()));
const CACHE_CAP: usize = 64;

/// Shared, cached table for q. The lock is held only around map access;
/// a miss builds outside the lock and the first finished build wins.
pub fn table(q: PrimeModulus) -> Result<Arc<KloostermanTable>, KloostermanError> {
    if let Some(t) = CACHE.lock().unwrap().get(&q.get()) {
        return Ok(Arc::clone(t));
    }
    let built = Arc::new(KloostermanTable::build(q)?);
    let mut map = CACHE.lock().unwrap();
    if map.len() >= CACHE_CAP {
        map.clear();
    }
    let entry = map.entry(q.get()).or_insert_with(|| Arc::clone(&built));
    Ok(Arc::clone(entry))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: u64) -> PrimeModulus {
        PrimeModulus::new(n).unwrap()
    }

    #[test]
    fn raw_small_values() {
        // S(1,1;3) = e_3(1·1+1) + e_3(2+2) = e_3(2) + e_3(1) = 2cos(2π/3) = −1.
        let v = kloosterman_raw(1, 1, q(3));
        assert!((v.re - (-1.0)).abs() < 1e-12 && v.im.abs() < 1e-12);
        // Ramanujan sum: S(0,1;q) = Σ_{d≠0} e_q(d̄) = −1.
        for n in [3u64, 7, 101] {
            let v = kloosterman_raw(0, 1, q(n));
            assert!((v.re + 1.0).abs() < 1e-10 && v.im.abs() < 1e-10, "q={n}");
        }
        // S(1,1;5) = 2 + 2cos(4π/5) ≈ 0.3819660.
        let v = kloosterman_raw(1, 1, q(5));
        assert!((v.re - 0.3819660).abs() < 1e-6);
    }

    #[test]
    fn table_q3_and_q5() {
        let t = KloostermanTable::build(q(3)).unwrap();
        let s3 = 3.0f64.sqrt();
        let expect = [-1.0 / s3, -1.0 / s3, 2.0 / s3];
        for (a, e) in expect.iter().enumerate() {
            assert!((t.kl(a as u64) - e).abs() < 1e-12, "a={a}");
        }
        let t = KloostermanTable::build(q(5)).unwrap();
        assert!((t.kl(1) - 0.1708204).abs() < 1e-7);
    }

    #[test]
    fn table_matches_raw_sums() {
        let p = q(31);
        let t = KloostermanTable::build(p).unwrap();
        let sq = 31f64.sqrt();
        for a in 0..31 {
            let raw = kloosterman_raw(a, 1, p);
            assert!((raw.re / sq - t.kl(a)).abs() < 1e-10);
            assert!(raw.im.abs() / sq < 1e-10);
        }
    }

    #[test]
    fn kl_zero_is_minus_one_over_sqrt_q() {
        for n in [7u64, 101, 997] {
            let t = table(q(n)).unwrap();
            assert!((t.kl(0) + 1.0 / (n as f64).sqrt()).abs() < 1e-10);
        }
    }

    #[test]
    fn parseval_sum_of_squares() {
        // Σ_a S(a,1;q)² = q² − q (second moment), i.e. Σ_a Kl(a;q)² = q−1.
        for n in [7u64, 101, 499, 997] {
            let t = table(q(n)).unwrap();
            let s: f64 = t.values().iter().map(|v| v * v).sum();
            let rel = (s - (n as f64 - 1.0)).abs() / (n as f64 - 1.0);
            assert!(rel < 1e-6, "q={n}: sum={s}");
        }
    }

    #[test]
    fn product_rule_invariance() {
        // d ↦ ā·d in the defining sum shows S(a,b;q) = S(ab,1;q) for
        // (a,q) = 1, so the table value kl[ab] covers every raw pair.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for n in [101u64, 499] {
            let p = q(n);
            let t = table(p).unwrap();
            let sq = (n as f64).sqrt();
            for _ in 0..100 {
                let a = rng.gen_range(1..n);
                let b = rng.gen_range(0..n);
                let raw = kloosterman_raw(a, b, p);
                assert!(
                    (raw.re / sq - t.kl(a * b % n)).abs() < 1e-9,
                    "q={n} a={a} b={b}"
                );
            }
        }
    }

    #[test]
    fn realness_across_moduli() {
        for n in [3u64, 5, 7, 11, 101, 499, 1009] {
            let t = KloostermanTable::build(q(n)).unwrap();
            assert!(t.max_imag() < 1e-8, "q={n}: {}", t.max_imag());
        }
    }

    #[test]
    fn weil_report() {
        let r = verify_weil(q(3)).unwrap();
        assert!((r.max_abs - 2.0 / 3.0f64.sqrt()).abs() < 1e-12);
        let r = verify_weil(q(101)).unwrap();
        assert!(r.max_abs <= 2.0);
    }
}
