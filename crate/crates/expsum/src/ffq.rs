//! Prime-field plumbing shared by every sum evaluator: a validated prime
//! modulus, the additive character table e_q(k) = e^{2πik/q}, modular
//! inverses, and a length-q discrete Fourier transform.
//!
//! The DFT here uses the number theorist's sign convention
//!
//! ```text
//! out[a] = Σ_{d mod q} x[d] · e_q(a·d)
//! ```
//!
//! (positive exponent, no normalization), so that completing a sum against
//! additive characters is literally one call. Prime length rules out
//! radix splitting; small q runs the O(q²) direct sum and larger q goes
//! through Bluestein's chirp-z reduction to a power-of-two convolution.

use num_complex::Complex64;
use rustfft::FftPlanner;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FfqError {
    #[error("modulus {0} is composite")]
    CompositeModulus(u64),
    #[error("modulus 2 rejected: odd primes only")]
    EvenModulus,
    #[error("input length {got} does not match modulus {expected}")]
    LengthMismatch { expected: usize, got: usize },
}

/// An odd prime modulus, verified at construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PrimeModulus {
    q: u64,
}

impl PrimeModulus {
    pub fn new(q: u64) -> Result<Self, FfqError> {
        if q == 2 {
            return Err(FfqError::EvenModulus);
        }
        if !is_prime_u64(q) {
            return Err(FfqError::CompositeModulus(q));
        }
        Ok(PrimeModulus { q })
    }

    #[inline]
    pub fn get(self) -> u64 {
        self.q
    }

    #[inline]
    pub fn as_usize(self) -> usize {
        self.q as usize
    }

    /// Reduce a signed integer into 0..q−1.
    #[inline]
    pub fn reduce_i64(self, x: i64) -> u64 {
        let q = self.q as i64;
        (((x % q) + q) % q) as u64
    }
}

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

pub fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    base %= m;
    let mut acc = 1u64 % m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Deterministic Miller–Rabin. The witness set below is known to be
/// exact for every 64-bit integer, so there is no probabilistic failure
/// mode anywhere in the test suite.
pub fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n == p {
            return true;
        }
        if n % p == 0 {
            return false;
        }
    }
    let mut d = n - 1;
    let mut r = 0u32;
    while d & 1 == 0 {
        d >>= 1;
        r += 1;
    }
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..r {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Modular inverse mod an odd prime via Fermat.
#[inline]
pub fn inv_mod(a: u64, q: u64) -> u64 {
    debug_assert!(a % q != 0);
    pow_mod(a, q - 2, q)
}

/// Smallest primitive root mod q, found by trial over the prime
/// factorization of q−1.
pub fn primitive_root(q: PrimeModulus) -> u64 {
    let qu = q.get();
    let phi = qu - 1;
    let mut factors = Vec::new();
    let mut rem = phi;
    let mut p = 2;
    while p * p <= rem {
        if rem % p == 0 {
            factors.push(p);
            while rem % p == 0 {
                rem /= p;
            }
        }
        p += 1;
    }
    if rem > 1 {
        factors.push(rem);
    }
    'candidate: for g in 2..qu {
        for &p in &factors {
            if pow_mod(g, phi / p, qu) == 1 {
                continue 'candidate;
            }
        }
        return g;
    }
    unreachable!("prime modulus without primitive root")
}

/// Discrete-log table to the smallest primitive root g: the returned
/// vector has `table[x] = k` where g^k ≡ x (mod q) for 1 ≤ x < q, and
/// `table[0] = u32::MAX` as the undefined marker. Returned together
/// with g itself.
pub fn dlog_table(q: PrimeModulus) -> (u64, Vec<u32>) {
    let qu = q.get();
    let g = primitive_root(q);
    let mut table = vec![u32::MAX; q.as_usize()];
    let mut x = 1u64;
    for k in 0..qu - 1 {
        table[x as usize] = k as u32;
        x = mul_mod(x, g, qu);
    }
    debug_assert_eq!(x, 1);
    (g, table)
}

/// All inverses mod q at once: `inv[d]·d ≡ 1 (mod q)` for d = 1..q−1.
/// Built by the linear recurrence inv[i] = −⌊q/i⌋·inv[q mod i], O(q) total.
#[derive(Debug, Clone)]
pub struct InverseTable {
    q: PrimeModulus,
    inv: Vec<u64>,
}

impl InverseTable {
    pub fn new(q: PrimeModulus) -> Self {
        let n = q.get();
        let mut inv = vec![0u64; n as usize];
        if n > 1 {
            inv[1] = 1;
            for i in 2..n {
                let j = (n % i) as usize;
                inv[i as usize] = mul_mod(n - n / i, inv[j], n);
            }
        }
        InverseTable { q, inv }
    }

    #[inline]
    pub fn modulus(&self) -> PrimeModulus {
        self.q
    }

    /// d̄ for d ≢ 0; panics on d ≡ 0 (callers own the pole convention).
    #[inline]
    pub fn inv(&self, d: u64) -> u64 {
        let r = (d % self.q.get()) as usize;
        debug_assert!(r != 0, "inverse of 0 mod {}", self.q.get());
        self.inv[r]
    }

    /// d̄ with the pole mapped to None; evaluators that skip pole terms
    /// (the Σ* convention) branch on this.
    #[inline]
    pub fn inv_checked(&self, d: u64) -> Option<u64> {
        let r = (d % self.q.get()) as usize;
        if r == 0 {
            None
        } else {
            Some(self.inv[r])
        }
    }
}

/// values[k] = e(k/q), all q-th roots of unity, each computed from the
/// exactly reduced angle 2πk/q (no accumulated phase recurrence).
#[derive(Debug, Clone)]
pub struct AdditiveCharTable {
    q: PrimeModulus,
    values: Vec<Complex64>,
}

impl AdditiveCharTable {
    pub fn new(q: PrimeModulus) -> Self {
        let n = q.get();
        let values = (0..n)
            .map(|k| {
                let theta = 2.0 * std::f64::consts::PI * (k as f64) / (n as f64);
                Complex64::new(theta.cos(), theta.sin())
            })
            .collect();
        AdditiveCharTable { q, values }
    }

    #[inline]
    pub fn modulus(&self) -> PrimeModulus {
        self.q
    }

    /// e_q(x) for unsigned x.
    #[inline]
    pub fn eq_u(&self, x: u64) -> Complex64 {
        self.values[(x % self.q.get()) as usize]
    }

    /// e_q(x) for signed x.
    #[inline]
    pub fn eq_i(&self, x: i64) -> Complex64 {
        self.values[self.q.reduce_i64(x) as usize]
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }
}

/// Construct the standard trio of tables for a prime modulus.
pub fn build_context(
    q: u64,
) -> Result<(PrimeModulus, AdditiveCharTable, InverseTable), FfqError> {
    let p = PrimeModulus::new(q)?;
    Ok((p, AdditiveCharTable::new(p), InverseTable::new(p)))
}

/// Above this the DFT switches from the direct O(q²) sum to Bluestein.
const DIRECT_CUTOFF: u64 = 512;

/// out[a] = Σ_d x[d]·e_q(ad). Input length must be exactly q.
pub fn dft_mod_q(x: &[Complex64], q: PrimeModulus) -> Result<Vec<Complex64>, FfqError> {
    if x.len() != q.as_usize() {
        return Err(FfqError::LengthMismatch {
            expected: q.as_usize(),
            got: x.len(),
        });
    }
    if q.get() <= DIRECT_CUTOFF {
        Ok(dft_direct(x, q))
    } else {
        Ok(dft_bluestein(x, q))
    }
}

fn dft_direct(x: &[Complex64], q: PrimeModulus) -> Vec<Complex64> {
    let n = q.get();
    let chars = AdditiveCharTable::new(q);
    let mut out = vec![Complex64::new(0.0, 0.0); n as usize];
    for (a, slot) in out.iter_mut().enumerate() {
        let a = a as u64;
        let mut acc = Complex64::new(0.0, 0.0);
        let mut ad = 0u64; // a·d mod q, maintained additively
        for &xv in x.iter() {
            acc += xv * chars.values[ad as usize];
            ad += a;
            if ad >= n {
                ad -= n;
            }
        }
        *slot = acc;
    }
    out
}

/// Bluestein: a·d = (a² + d² − (a−d)²)/2 turns the DFT into a linear
/// convolution against the chirp c[j] = e(j²/2q), which we evaluate by a
/// zero-padded power-of-two cyclic convolution. The chirp exponent j² is
/// reduced mod 2q in integers before touching floating point.
fn dft_bluestein(x: &[Complex64], q: PrimeModulus) -> Vec<Complex64> {
    let n = q.as_usize();
    let two_n = 2 * n as u64;
    let chirp: Vec<Complex64> = (0..n as u64)
        .map(|j| {
            let e = mul_mod(j, j, two_n);
            let theta = std::f64::consts::PI * (e as f64) / (n as f64);
            Complex64::new(theta.cos(), theta.sin())
        })
        .collect();

    let m = (2 * n - 1).next_power_of_two();
    let mut a = vec![Complex64::new(0.0, 0.0); m];
    for d in 0..n {
        a[d] = x[d] * chirp[d];
    }
    let mut b = vec![Complex64::new(0.0, 0.0); m];
    b[0] = chirp[0].conj();
    for j in 1..n {
        b[j] = chirp[j].conj();
        b[m - j] = chirp[j].conj();
    }

    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(m);
    let inv = planner.plan_fft_inverse(m);
    fwd.process(&mut a);
    fwd.process(&mut b);
    for (av, bv) in a.iter_mut().zip(b.iter()) {
        *av *= *bv;
    }
    inv.process(&mut a);

    let scale = 1.0 / m as f64;
    (0..n).map(|k| chirp[k] * a[k] * scale).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn rejects_bad_moduli() {
        assert_eq!(PrimeModulus::new(2).unwrap_err(), FfqError::EvenModulus);
        assert_eq!(
            PrimeModulus::new(4).unwrap_err(),
            FfqError::CompositeModulus(4)
        );
        assert_eq!(
            PrimeModulus::new(1).unwrap_err(),
            FfqError::CompositeModulus(1)
        );
        assert!(PrimeModulus::new(3).is_ok());
        assert!(PrimeModulus::new(1009).is_ok());
    }

    #[test]
    fn miller_rabin_matches_sieve_below_10000() {
        let mut sieve = vec![true; 10000];
        sieve[0] = false;
        sieve[1] = false;
        for i in 2..10000usize {
            if sieve[i] {
                for j in (i * i..10000).step_by(i) {
                    sieve[j] = false;
                }
            }
        }
        for n in 0..10000u64 {
            assert_eq!(is_prime_u64(n), sieve[n as usize], "n={n}");
        }
    }

    #[test]
    fn inverse_table_q7() {
        let q = PrimeModulus::new(7).unwrap();
        let t = InverseTable::new(q);
        let got: Vec<u64> = (1..7).map(|d| t.inv(d)).collect();
        assert_eq!(got, vec![1, 4, 5, 2, 3, 6]);
    }

    #[test]
    fn inverse_table_involution_q997() {
        let q = PrimeModulus::new(997).unwrap();
        let t = InverseTable::new(q);
        for d in 1..997u64 {
            assert_eq!(t.inv(d) * d % 997, 1);
            assert_eq!(t.inv(t.inv(d)), d);
        }
        assert_eq!(t.inv_checked(0), None);
        assert_eq!(t.inv_checked(997), None);
    }

    #[test]
    fn char_table_q3_primitive_root_of_unity() {
        let (_, chars, _) = build_context(3).unwrap();
        let v = chars.eq_u(1);
        assert!((v.re - (-0.5)).abs() < 1e-15);
        assert!((v.im - 0.75f64.sqrt()).abs() < 1e-15);
        assert_eq!(chars.eq_u(0), c(1.0, 0.0));
    }

    #[test]
    fn char_table_is_multiplicative() {
        let (q, chars, _) = build_context(101).unwrap();
        for a in (0..101).step_by(7) {
            for b in (0..101).step_by(13) {
                let lhs = chars.eq_u(a) * chars.eq_u(b);
                let rhs = chars.eq_u((a + b) % q.get());
                assert!((lhs - rhs).norm() < 1e-10);
            }
        }
        for k in 0..101 {
            assert!((chars.eq_u(k).norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dft_delta_and_constant() {
        let q = PrimeModulus::new(11).unwrap();
        let mut delta = vec![c(0.0, 0.0); 11];
        delta[0] = c(1.0, 0.0);
        let out = dft_mod_q(&delta, q).unwrap();
        for v in &out {
            assert!((v - c(1.0, 0.0)).norm() < 1e-12);
        }
        let ones = vec![c(1.0, 0.0); 11];
        let out = dft_mod_q(&ones, q).unwrap();
        assert!((out[0] - c(11.0, 0.0)).norm() < 1e-10);
        for v in &out[1..] {
            assert!(v.norm() < 1e-10);
        }
    }

    #[test]
    fn dft_length_mismatch() {
        let q = PrimeModulus::new(11).unwrap();
        let err = dft_mod_q(&[c(1.0, 0.0); 10], q).unwrap_err();
        assert_eq!(
            err,
            FfqError::LengthMismatch {
                expected: 11,
                got: 10
            }
        );
    }

    /// The DFT of d ↦ e_q(d̄) evaluated at a is the full exponential sum
    /// Σ_d e_q(ad + d̄); at q = 5, a = 1 a four-term hand sum gives
    /// 2cos(2π·2/5) + 2cos(2π·3/5)... collected: 2 + 2cos(4π/5).
    #[test]
    fn dft_of_inverse_phase_is_kloosterman_like() {
        let (q, chars, inv) = build_context(5).unwrap();
        let mut x = vec![c(0.0, 0.0); 5];
        for d in 1..5u64 {
            x[d as usize] = chars.eq_u(inv.inv(d));
        }
        let out = dft_mod_q(&x, q).unwrap();
        let expected = 2.0 + 2.0 * (4.0 * std::f64::consts::PI / 5.0).cos();
        assert!((out[1].re - expected).abs() < 1e-12, "got {}", out[1]);
        assert!(out[1].im.abs() < 1e-12);
        assert!((expected - 0.381966).abs() < 1e-6);
    }

    fn random_signal(q: u64, seed: u64) -> Vec<Complex64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..q)
            .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect()
    }

    #[test]
    fn dft_parseval_randomized() {
        for &q in &[3u64, 101, 997] {
            let p = PrimeModulus::new(q).unwrap();
            let x = random_signal(q, 0xE5 + q);
            let out = dft_mod_q(&x, p).unwrap();
            let lhs: f64 = out.iter().map(|v| v.norm_sqr()).sum();
            let rhs: f64 = q as f64 * x.iter().map(|v| v.norm_sqr()).sum::<f64>();
            assert!((lhs - rhs).abs() / rhs < 1e-9, "q={q}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn bluestein_agrees_with_direct() {
        for &q in &[101u64, 211, 997] {
            let p = PrimeModulus::new(q).unwrap();
            let x = random_signal(q, q);
            let direct = dft_direct(&x, p);
            let blue = dft_bluestein(&x, p);
            for (a, (d, b)) in direct.iter().zip(blue.iter()).enumerate() {
                assert!((d - b).norm() < 1e-9, "q={q} a={a}: {d} vs {b}");
            }
        }
    }

    #[test]
    fn primitive_root_small_cases() {
        assert_eq!(primitive_root(PrimeModulus::new(3).unwrap()), 2);
        assert_eq!(primitive_root(PrimeModulus::new(5).unwrap()), 2);
        // 2^3 ≡ 1 (mod 7), so 2 is not primitive and 3 is the smallest
        assert_eq!(primitive_root(PrimeModulus::new(7).unwrap()), 3);
        assert_eq!(primitive_root(PrimeModulus::new(23).unwrap()), 5);
    }

    #[test]
    fn dlog_table_is_inverse_of_powering() {
        for &q in &[7u64, 101, 997] {
            let p = PrimeModulus::new(q).unwrap();
            let (g, table) = dlog_table(p);
            assert_eq!(table[0], u32::MAX);
            let mut seen = vec![false; (q - 1) as usize];
            for x in 1..q {
                let k = table[x as usize];
                assert_eq!(pow_mod(g, k as u64, q), x, "q={q} x={x}");
                assert!(!seen[k as usize]);
                seen[k as usize] = true;
            }
        }
    }
}
