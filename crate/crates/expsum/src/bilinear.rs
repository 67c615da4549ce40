//! Bilinear forms in normalized Kloosterman sums, congruence sums of
//! modular-form coefficients, and the bound shapes they are measured
//! against.
//!
//! The central object is
//!
//! ```text
//!   B(a, α, β) = Σ_m Σ_n α_m β_n Kl(a·m·n; q),
//! ```
//!
//! evaluated either by the direct product loop or, for large supports,
//! by aggregating coefficient mass into multiplicative classes
//! c(t) = Σ_{mn ≡ t} α_m β_n via a discrete-log reindexing and one
//! cyclic convolution. Both paths stay enabled as a cross-check.
//!
//! Every bound shape is computed with implied constant 1 and without
//! ε-factors: the interesting quantity is the ratio |sum| / shape and
//! how it moves across a ladder of primes, not an absolute assertion.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;
use serde::Serialize;
use thiserror::Error;

use crate::ffq::{dlog_table, PrimeModulus};
use crate::kloosterman::{KloostermanError, KloostermanTable};
use crate::modforms;

/// Exceptional-eigenvalue exponent used by the congruence-sum shapes.
pub const THETA: f64 = 7.0 / 64.0;

#[derive(Debug, Error)]
pub enum BilinearError {
    #[error("twist a ≡ 0 mod q")]
    NotCoprime,
    #[error("bound {bound}: precondition {condition} violated")]
    PreconditionViolated {
        bound: &'static str,
        condition: &'static str,
    },
    #[error(transparent)]
    Table(#[from] KloostermanError),
}

/// The fixed bump exp(−1/((x−1/2)(2−x))) on (1/2, 2), zero outside,
/// scaled so the peak value (at x = 5/4) is exactly 1. One canonical
/// window keeps every golden value reproducible.
#[derive(Debug, Clone, Copy, Default)]
pub struct SmoothWindow;

impl SmoothWindow {
    pub fn eval(&self, x: f64) -> f64 {
        if x <= 0.5 || x >= 2.0 {
            return 0.0;
        }
        let t = (x - 0.5) * (2.0 - x);
        (16.0 / 9.0 - 1.0 / t).exp()
    }
}

/// A finitely supported coefficient sequence: values[i] is the
/// coefficient of m = support_start + i. Norms are cached at build.
#[derive(Debug, Clone)]
pub struct CoefficientVector {
    support_start: u64,
    values: Vec<Complex64>,
    l1: f64,
    l2: f64,
}

impl CoefficientVector {
    pub fn new(support_start: u64, values: Vec<Complex64>) -> Self {
        assert!(support_start >= 1, "supports start at 1");
        let l1 = values.iter().map(|v| v.norm()).sum();
        let l2 = values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        CoefficientVector {
            support_start,
            values,
            l1,
            l2,
        }
    }

    pub fn ones(support_start: u64, len: usize) -> Self {
        Self::new(support_start, vec![Complex64::new(1.0, 0.0); len])
    }

    /// Independent ±1 coefficients from a fixed-seed generator.
    pub fn rademacher(seed: u64, support_start: u64, len: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..len)
            .map(|_| Complex64::new(if rng.gen::<bool>() { 1.0 } else { -1.0 }, 0.0))
            .collect();
        Self::new(support_start, values)
    }

    /// Divisor-function coefficients d(m) over the support.
    pub fn divisor(support_start: u64, len: usize) -> Self {
        let top = support_start as usize + len - 1;
        let d = divisor_counts(top);
        let values = (0..len)
            .map(|i| Complex64::new(d[support_start as usize + i - 1], 0.0))
            .collect();
        Self::new(support_start, values)
    }

    /// Deligne-normalized discriminant-form coefficients.
    pub fn tau_normalized(support_start: u64, len: usize) -> Self {
        let top = support_start as usize + len - 1;
        let lam = modforms::tau_normalized(top);
        let values = (0..len)
            .map(|i| Complex64::new(lam[support_start as usize + i - 1], 0.0))
            .collect();
        Self::new(support_start, values)
    }

    pub fn support_start(&self) -> u64 {
        self.support_start
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn l1(&self) -> f64 {
        self.l1
    }

    pub fn l2(&self) -> f64 {
        self.l2
    }
}

/// d(n) for n = 1..=limit as floats, by the harmonic sieve.
pub fn divisor_counts(limit: usize) -> Vec<f64> {
    let mut d = vec![0.0f64; limit];
    let mut i = 1;
    while i <= limit {
        let mut j = i;
        while j <= limit {
            d[j - 1] += 1.0;
            j += i;
        }
        i += 1;
    }
    d
}

/// Range bookkeeping for a bilinear experiment: the sizes themselves,
/// the dual sizes q²/M and q²/N as exact rationals, and the exponents
/// of M and N on base q.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RangeSpec {
    pub q: u64,
    pub m: u64,
    pub n: u64,
    /// (numerator, denominator) of q²/M in lowest terms.
    pub m_star: (u64, u64),
    pub n_star: (u64, u64),
    pub mu: f64,
    pub nu: f64,
}

impl RangeSpec {
    pub fn new(q: PrimeModulus, m: u64, n: u64) -> Self {
        assert!(m >= 1 && n >= 1);
        let qu = q.get();
        let reduce = |num: u64, den: u64| {
            let g = num_integer::gcd(num, den);
            (num / g, den / g)
        };
        RangeSpec {
            q: qu,
            m,
            n,
            m_star: reduce(qu * qu, m),
            n_star: reduce(qu * qu, n),
            mu: (m as f64).ln() / (qu as f64).ln(),
            nu: (n as f64).ln() / (qu as f64).ln(),
        }
    }
}

/// The bound shapes the experiments compare against; each is the right
/// side of one stated estimate with implied constant 1 and ε = 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundName {
    /// 2·(MN)^{1/2}·‖α‖₂‖β‖₂, from termwise |Kl| ≤ 2 and Cauchy–Schwarz.
    Trivial,
    /// Two general sequences: (MN)^{1/2}‖α‖₂‖β‖₂(M^{−1/2} + q^{1/4}N^{−1/2}).
    TypeII,
    /// One sequence against an interval:
    /// (‖α‖₁‖α‖₂)^{1/2} M^{1/4} N · q^{1/4} M^{−1/6} N^{−5/12}.
    TypeI,
    /// Two smooth windows: MN(q^{−1/8} + q^{3/8}(MN)^{−1/2})·Q.
    SmoothPair,
    /// The conditional two-sequence bound with the q^{11/64} exponent:
    /// ‖α‖₂‖β‖₂(MN)^{1/2}(M^{−1/2} + q^{11/64}(MN)^{−3/16}).
    Conjectural,
    /// Congruence-sum error bound (N/(qM))^{1/4}(1+(N/(qM))^{1/4}) + q^{−1/2+θ}.
    Shifted,
    /// Congruence-sum trivial bound N^{θ_g}(MN)^{1/2}/q + [f=g=d]·(M/N)^{1/2}.
    ShiftedTrivial,
    /// First trilinear congruence bound (Poisson in the longer factor).
    TrilinearA,
    /// Second trilinear congruence bound (pole plus dualized tail).
    TrilinearB,
}

impl BoundName {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundName::Trivial => "trivial",
            BoundName::TypeII => "type_ii",
            BoundName::TypeI => "type_i",
            BoundName::SmoothPair => "smooth_pair",
            BoundName::Conjectural => "conjectural",
            BoundName::Shifted => "shifted",
            BoundName::ShiftedTrivial => "shifted_trivial",
            BoundName::TrilinearA => "trilinear_a",
            BoundName::TrilinearB => "trilinear_b",
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SeqNorms {
    pub l1: f64,
    pub l2: f64,
}

impl From<&CoefficientVector> for SeqNorms {
    fn from(v: &CoefficientVector) -> Self {
        SeqNorms {
            l1: v.l1(),
            l2: v.l2(),
        }
    }
}

/// Everything a bound shape can depend on. `new` fills neutral values
/// (unit norms, unit window scale, θ_g = 0, no diagonal term) so call
/// sites only set what their bound reads.
#[derive(Debug, Clone, Copy)]
pub struct BoundInput {
    pub q: u64,
    pub m: u64,
    pub n: u64,
    /// Factor split n = n1·n2 for the trilinear shapes; 0 means unset.
    pub n1: u64,
    pub alpha: SeqNorms,
    pub beta: SeqNorms,
    /// Derivative scale of the smooth windows.
    pub q_smooth: f64,
    /// Coefficient-growth exponent of the second congruence sequence.
    pub theta_g: f64,
    /// Adds the (M/N)^{1/2} term that only the double-divisor case has.
    pub both_divisor: bool,
}

impl BoundInput {
    pub fn new(q: u64, m: u64, n: u64) -> Self {
        BoundInput {
            q,
            m,
            n,
            n1: 0,
            alpha: SeqNorms { l1: 1.0, l2: 1.0 },
            beta: SeqNorms { l1: 1.0, l2: 1.0 },
            q_smooth: 1.0,
            theta_g: 0.0,
            both_divisor: false,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub bound_name: BoundName,
    pub lhs_abs: f64,
    pub rhs_shape: f64,
    pub ratio: f64,
}

impl BoundReport {
    pub fn new(bound_name: BoundName, lhs_abs: f64, rhs_shape: f64) -> Self {
        BoundReport {
            bound_name,
            lhs_abs,
            rhs_shape,
            ratio: lhs_abs / rhs_shape,
        }
    }
}

/// Evaluate the named bound's right-hand side, checking its stated
/// preconditions first.
pub fn bound_shape(name: BoundName, p: &BoundInput) -> Result<f64, BilinearError> {
    let q = p.q as f64;
    let m = p.m as f64;
    let n = p.n as f64;
    let fail = |condition: &'static str| BilinearError::PreconditionViolated {
        bound: name.as_str(),
        condition,
    };
    match name {
        BoundName::Trivial => Ok(2.0 * (m * n).sqrt() * p.alpha.l2 * p.beta.l2),
        BoundName::TypeII => {
            if p.m > p.q || p.n > p.q {
                return Err(fail("M, N <= q"));
            }
            Ok((m * n).sqrt()
                * p.alpha.l2
                * p.beta.l2
                * (m.powf(-0.5) + q.powf(0.25) * n.powf(-0.5)))
        }
        BoundName::TypeI => {
            if p.m > p.q || p.n > p.q {
                return Err(fail("M, N <= q"));
            }
            if m * n > q.powf(1.5) {
                return Err(fail("MN <= q^{3/2}"));
            }
            if m > n * n {
                return Err(fail("M <= N^2"));
            }
            Ok((p.alpha.l1 * p.alpha.l2).sqrt()
                * m.powf(0.25)
                * n
                * q.powf(0.25)
                * m.powf(-1.0 / 6.0)
                * n.powf(-5.0 / 12.0))
        }
        BoundName::SmoothPair => {
            Ok(p.q_smooth * m * n * (q.powf(-0.125) + q.powf(0.375) / (m * n).sqrt()))
        }
        BoundName::Conjectural => {
            if p.m > p.q || p.n > p.q {
                return Err(fail("1 <= M, N <= q"));
            }
            if m * n < q.powf(0.25) || m * n > q.powf(1.25) {
                return Err(fail("q^{1/4} <= MN <= q^{5/4}"));
            }
            if m > q.powf(0.25) * n {
                return Err(fail("M <= q^{1/4} N"));
            }
            Ok(p.alpha.l2
                * p.beta.l2
                * (m * n).sqrt()
                * (m.powf(-0.5) + q.powf(11.0 / 64.0) * (m * n).powf(-3.0 / 16.0)))
        }
        BoundName::Shifted => {
            if p.m > p.n {
                return Err(fail("M <= N"));
            }
            if m * n > q * q {
                return Err(fail("MN <= q^2"));
            }
            let x = (n / (q * m)).powf(0.25);
            Ok(x * (1.0 + x) + q.powf(-0.5 + THETA))
        }
        BoundName::ShiftedTrivial => {
            if p.m > p.n {
                return Err(fail("M <= N"));
            }
            let diag = if p.both_divisor { (m / n).sqrt() } else { 0.0 };
            Ok(n.powf(p.theta_g) * (m * n).sqrt() / q + diag)
        }
        BoundName::TrilinearA | BoundName::TrilinearB => {
            if p.n1 == 0 || p.n % p.n1 != 0 {
                return Err(fail("N = N1*N2 with integer N2"));
            }
            let n1 = p.n1 as f64;
            let n2 = (p.n / p.n1) as f64;
            if n1 > n2 {
                return Err(fail("N1 <= N2"));
            }
            let common = (m * n).sqrt() / q.powf(2.0 - THETA);
            if name == BoundName::TrilinearA {
                let c1 = (m * q).sqrt() / n.sqrt() + n1 * m.sqrt() / (q * n.sqrt());
                let c2 = q.powf(0.25) / n1.sqrt()
                    + (m * n1).sqrt() / n.sqrt()
                    + n1 * m.sqrt() / (q * n.sqrt());
                let c3 = m.sqrt() * n1 / n.sqrt();
                Ok(common + c1.min(c2).min(c3))
            } else {
                let c1 = n1 * n1 / (m * n).sqrt();
                let c2 = n.powf(1.0 / 6.0) * n1 * q.sqrt() / (n2 * m.powf(2.0 / 3.0));
                Ok(common
                    + c1.min(c2)
                    + (m / n).sqrt()
                    + m.sqrt() * n1 / (q * n.sqrt())
                    + m.powf(1.5) / (n2 * n.sqrt()))
            }
        }
    }
}

/// Above this many coefficient products the convolution path takes over.
pub const DIRECT_PRODUCT_CAP: u64 = 10_000_000;

/// Σ_m Σ_n α_m β_n Kl(a·m·n; q), routed by support size.
pub fn bilinear_form(
    k: &KloostermanTable,
    a: u64,
    alpha: &CoefficientVector,
    beta: &CoefficientVector,
) -> Result<Complex64, BilinearError> {
    if (alpha.len() as u64) * (beta.len() as u64) <= DIRECT_PRODUCT_CAP {
        bilinear_form_direct(k, a, alpha, beta)
    } else {
        bilinear_form_convolved(k, a, alpha, beta)
    }
}

/// The O(MN) product loop.
pub fn bilinear_form_direct(
    k: &KloostermanTable,
    a: u64,
    alpha: &CoefficientVector,
    beta: &CoefficientVector,
) -> Result<Complex64, BilinearError> {
    let q = k.modulus().get();
    if a % q == 0 {
        return Err(BilinearError::NotCoprime);
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for (i, &am) in alpha.values().iter().enumerate() {
        if am == Complex64::new(0.0, 0.0) {
            continue;
        }
        let m = alpha.support_start() + i as u64;
        let fam = (a % q) * (m % q) % q;
        let mut inner = Complex64::new(0.0, 0.0);
        for (j, &bn) in beta.values().iter().enumerate() {
            let n = beta.support_start() + j as u64;
            inner += bn * k.kl(fam * (n % q) % q);
        }
        acc += am * inner;
    }
    Ok(acc)
}

/// The multiplicative-class path: coefficients are accumulated per
/// discrete log, the two class vectors are convolved cyclically mod
/// q−1, and one pass over classes applies the Kloosterman value. Terms
/// with q | m·n contribute through Kl(0) separately.
pub fn bilinear_form_convolved(
    k: &KloostermanTable,
    a: u64,
    alpha: &CoefficientVector,
    beta: &CoefficientVector,
) -> Result<Complex64, BilinearError> {
    let q = k.modulus();
    let qu = q.get();
    if a % qu == 0 {
        return Err(BilinearError::NotCoprime);
    }
    let (g, ind) = dlog_table(q);
    let len = (qu - 1) as usize;

    let mut class_a = vec![Complex64::new(0.0, 0.0); len];
    let mut class_b = vec![Complex64::new(0.0, 0.0); len];
    let mut zero_a = Complex64::new(0.0, 0.0);
    let mut zero_b = Complex64::new(0.0, 0.0);
    let mut total_a = Complex64::new(0.0, 0.0);
    let mut total_b = Complex64::new(0.0, 0.0);
    for (i, &v) in alpha.values().iter().enumerate() {
        let m = (alpha.support_start() + i as u64) % qu;
        total_a += v;
        if m == 0 {
            zero_a += v;
        } else {
            class_a[ind[m as usize] as usize] += v;
        }
    }
    for (j, &v) in beta.values().iter().enumerate() {
        let n = (beta.support_start() + j as u64) % qu;
        total_b += v;
        if n == 0 {
            zero_b += v;
        } else {
            class_b[ind[n as usize] as usize] += v;
        }
    }

    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(len);
    let ifft = planner.plan_fft_inverse(len);
    fft.process(&mut class_a);
    fft.process(&mut class_b);
    for (x, y) in class_a.iter_mut().zip(&class_b) {
        *x *= y;
    }
    ifft.process(&mut class_a);
    let scale = 1.0 / len as f64;

    // c(g^j) is now class_a[j]·scale; walk x = a·g^j alongside j
    let mut acc = Complex64::new(0.0, 0.0);
    let mut x = a % qu;
    for c in class_a.iter().take(len) {
        acc += c * scale * k.kl(x);
        x = ((x as u128 * g as u128) % qu as u128) as u64;
    }

    // q | mn terms: either q | m (any n), or q ∤ m and q | n
    let kl0 = k.kl(0);
    acc += kl0 * (zero_a * total_b + (total_a - zero_a) * zero_b);
    Ok(acc)
}

/// Families the experiments draw coefficients from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoefficientFamily {
    Ones,
    Rademacher(u64),
    Divisor,
    Tau,
}

impl CoefficientFamily {
    pub fn build(self, support_start: u64, len: usize) -> CoefficientVector {
        match self {
            CoefficientFamily::Ones => CoefficientVector::ones(support_start, len),
            CoefficientFamily::Rademacher(seed) => {
                CoefficientVector::rademacher(seed, support_start, len)
            }
            CoefficientFamily::Divisor => CoefficientVector::divisor(support_start, len),
            CoefficientFamily::Tau => CoefficientVector::tau_normalized(support_start, len),
        }
    }
}

/// One full experiment: build α on [1,M] and β on [1,N], evaluate the
/// bilinear form once, then report the ratio against every requested
/// bound shape.
pub fn ratio_experiment(
    q: PrimeModulus,
    a: u64,
    alpha_family: CoefficientFamily,
    beta_family: CoefficientFamily,
    m: u64,
    n: u64,
    bounds: &[BoundName],
) -> Result<Vec<BoundReport>, BilinearError> {
    let alpha = alpha_family.build(1, m as usize);
    let beta = beta_family.build(1, n as usize);
    let table = crate::kloosterman::table(q)?;
    let lhs = bilinear_form(&table, a, &alpha, &beta)?.norm();
    let mut input = BoundInput::new(q.get(), m, n);
    input.alpha = SeqNorms::from(&alpha);
    input.beta = SeqNorms::from(&beta);
    bounds
        .iter()
        .map(|&name| Ok(BoundReport::new(name, lhs, bound_shape(name, &input)?)))
        .collect()
}

/// Congruence direction: counts pairs with m ≡ n or m ≡ −n mod q.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

/// Coefficient sources for the congruence sums.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CongruenceFamily {
    Divisor,
    Tau,
}

impl CongruenceFamily {
    /// λ(1..=limit) as floats.
    pub fn coefficients(self, limit: usize) -> Vec<f64> {
        match self {
            CongruenceFamily::Divisor => divisor_counts(limit),
            CongruenceFamily::Tau => modforms::tau_normalized(limit),
        }
    }
}

/// The normalized congruence sum
///
/// ```text
///   (MN)^{-1/2}   Σ_{m ≡ ±n (q), m ≠ n} λ_f(m) λ_g(n) W1(m/M) W2(n/N)
///   − (q(MN)^{1/2})^{-1} Σ_{(mn,q)=1}  λ_f(m) λ_g(n) W1(m/M) W2(n/N),
/// ```
///
/// with both sums truncated to the window supports [M/2, 2M] × [N/2, 2N].
pub fn congruence_bilinear(
    f: CongruenceFamily,
    g: CongruenceFamily,
    m_size: u64,
    n_size: u64,
    q: u64,
    sign: Sign,
    w1: &SmoothWindow,
    w2: &SmoothWindow,
) -> f64 {
    assert!(m_size >= 1 && n_size >= 1 && q >= 3);
    let m_lo = m_size / 2 + 1;
    let m_hi = 2 * m_size;
    let n_lo = n_size / 2 + 1;
    let n_hi = 2 * n_size;
    let lf = f.coefficients(m_hi as usize);
    let lg = g.coefficients(n_hi as usize);
    let wf = |m: u64| w1.eval(m as f64 / m_size as f64);
    let wg = |n: u64| w2.eval(n as f64 / n_size as f64);

    let mut first = 0.0f64;
    for m in m_lo..=m_hi {
        let cm = lf[m as usize - 1] * wf(m);
        if cm == 0.0 {
            continue;
        }
        let target = match sign {
            Sign::Plus => m % q,
            Sign::Minus => (q - m % q) % q,
        };
        // smallest n ≥ n_lo with n ≡ target (mod q)
        let mut n = n_lo + (target + q - n_lo % q) % q;
        while n <= n_hi {
            if n != m {
                first += cm * lg[n as usize - 1] * wg(n);
            }
            n += q;
        }
    }

    let sum_f: f64 = (m_lo..=m_hi)
        .filter(|m| m % q != 0)
        .map(|m| lf[m as usize - 1] * wf(m))
        .sum();
    let sum_g: f64 = (n_lo..=n_hi)
        .filter(|n| n % q != 0)
        .map(|n| lg[n as usize - 1] * wg(n))
        .sum();

    let norm = ((m_size * n_size) as f64).sqrt();
    first / norm - sum_f * sum_g / (q as f64 * norm)
}

/// Measure the congruence sum for a cuspidal first sequence against the
/// (N/(qM))^{1/4}-shaped error bound.
pub fn shifted_error_ratio(
    g: CongruenceFamily,
    m_size: u64,
    n_size: u64,
    q: PrimeModulus,
    sign: Sign,
) -> Result<BoundReport, BilinearError> {
    let w = SmoothWindow;
    let lhs = congruence_bilinear(
        CongruenceFamily::Tau,
        g,
        m_size,
        n_size,
        q.get(),
        sign,
        &w,
        &w,
    )
    .abs();
    let input = BoundInput::new(q.get(), m_size, n_size);
    let shape = bound_shape(BoundName::Shifted, &input)?;
    Ok(BoundReport::new(BoundName::Shifted, lhs, shape))
}

/// The normalized trilinear congruence sum
///
/// ```text
///   (MN)^{-1/2} Σ_{n1·n2 ≡ ±m (q)} λ(m) W1(n1/N1) W2(n2/N2) W3(m/M),
/// ```
///
/// N = N1·N2, together with reports against both trilinear bound shapes.
pub fn trilinear_congruence(
    family: CongruenceFamily,
    n1_size: u64,
    n2_size: u64,
    m_size: u64,
    q: PrimeModulus,
    sign: Sign,
    windows: &[SmoothWindow; 3],
) -> Result<(f64, Vec<BoundReport>), BilinearError> {
    if n1_size > n2_size {
        return Err(BilinearError::PreconditionViolated {
            bound: "trilinear",
            condition: "N1 <= N2",
        });
    }
    let qu = q.get();
    let m_lo = m_size / 2 + 1;
    let m_hi = 2 * m_size;
    let lam = family.coefficients(m_hi as usize);
    let wm: Vec<f64> = (0..=m_hi)
        .map(|m| {
            if m >= m_lo {
                windows[2].eval(m as f64 / m_size as f64)
            } else {
                0.0
            }
        })
        .collect();

    let mut value = 0.0f64;
    for n1 in n1_size / 2 + 1..=2 * n1_size {
        let w1 = windows[0].eval(n1 as f64 / n1_size as f64);
        if w1 == 0.0 {
            continue;
        }
        for n2 in n2_size / 2 + 1..=2 * n2_size {
            let w2 = windows[1].eval(n2 as f64 / n2_size as f64);
            if w2 == 0.0 {
                continue;
            }
            let prod = (n1 % qu) * (n2 % qu) % qu;
            let target = match sign {
                Sign::Plus => prod,
                Sign::Minus => (qu - prod) % qu,
            };
            let mut m = m_lo + (target + qu - m_lo % qu) % qu;
            while m <= m_hi {
                value += lam[m as usize - 1] * wm[m as usize] * w1 * w2;
                m += qu;
            }
        }
    }
    let n_total = n1_size * n2_size;
    value /= ((m_size * n_total) as f64).sqrt();

    let mut input = BoundInput::new(qu, m_size, n_total);
    input.n1 = n1_size;
    let reports = vec![
        BoundReport::new(
            BoundName::TrilinearA,
            value.abs(),
            bound_shape(BoundName::TrilinearA, &input)?,
        ),
        BoundReport::new(
            BoundName::TrilinearB,
            value.abs(),
            bound_shape(BoundName::TrilinearB, &input)?,
        ),
    ];
    Ok((value, reports))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kloosterman;
    use proptest::prelude::*;
    use rand::Rng;

    fn table(q: u64) -> std::sync::Arc<KloostermanTable> {
        kloosterman::table(PrimeModulus::new(q).unwrap()).unwrap()
    }

    fn random_vector(seed: u64, start: u64, len: usize) -> CoefficientVector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..len)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        CoefficientVector::new(start, values)
    }

    #[test]
    fn smooth_window_support_and_peak() {
        let w = SmoothWindow;
        assert_eq!(w.eval(0.5), 0.0);
        assert_eq!(w.eval(2.0), 0.0);
        assert_eq!(w.eval(-3.0), 0.0);
        assert!((w.eval(1.25) - 1.0).abs() < 1e-15);
        let v = w.eval(0.8);
        assert!(v > 0.0 && v < 1.0);
    }

    #[test]
    fn norms_match_recomputation() {
        let v = random_vector(7, 3, 40);
        let l1: f64 = v.values().iter().map(|z| z.norm()).sum();
        let l2: f64 = v.values().iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert!((v.l1() - l1).abs() <= 1e-12 * l1);
        assert!((v.l2() - l2).abs() <= 1e-12 * l2);
    }

    #[test]
    fn divisor_counts_small() {
        let d = divisor_counts(12);
        let expected = [1.0, 2.0, 2.0, 3.0, 2.0, 4.0, 2.0, 4.0, 3.0, 4.0, 2.0, 6.0];
        assert_eq!(&d[..], &expected[..]);
    }

    #[test]
    fn range_spec_duals_are_exact() {
        let q = PrimeModulus::new(101).unwrap();
        let r = RangeSpec::new(q, 4, 50);
        // 101² is odd and prime to 5, so both fractions are already reduced
        assert_eq!(r.m_star, (10201, 4));
        assert_eq!(r.n_star, (10201, 50));
        assert!((r.mu - (4f64).ln() / (101f64).ln()).abs() < 1e-15);
        // a reducible one: q = 7, M = 14 gives 49/14 = 7/2
        let r = RangeSpec::new(PrimeModulus::new(7).unwrap(), 14, 2);
        assert_eq!(r.m_star, (7, 2));
    }

    #[test]
    fn delta_coefficients_reproduce_kloosterman() {
        let k = table(101);
        let delta = CoefficientVector::ones(1, 1);
        for a in [1u64, 2, 57] {
            let v = bilinear_form(&k, a, &delta, &delta).unwrap();
            assert!((v.re - k.kl(a)).abs() < 1e-12);
            assert!(v.im.abs() < 1e-12);
        }
    }

    #[test]
    fn l1_bound_holds() {
        let k = table(53);
        let alpha = random_vector(1, 1, 17);
        let beta = random_vector(2, 5, 23);
        let v = bilinear_form(&k, 3, &alpha, &beta).unwrap();
        assert!(v.norm() <= 2.0 * alpha.l1() * beta.l1() + 1e-9);
    }

    #[test]
    fn rejects_zero_twist() {
        let k = table(53);
        let alpha = CoefficientVector::ones(1, 4);
        match bilinear_form(&k, 106, &alpha, &alpha) {
            Err(BilinearError::NotCoprime) => {}
            other => panic!("expected NotCoprime, got {other:?}"),
        }
    }

    #[test]
    fn direct_and_convolved_paths_agree() {
        let k = table(97);
        // support crossing the modulus exercises the Kl(0) branch
        for (s1, l1, s2, l2) in [(1u64, 9usize, 1u64, 9usize), (95, 10, 3, 40), (90, 20, 95, 8)] {
            let alpha = random_vector(11, s1, l1);
            let beta = random_vector(12, s2, l2);
            let d = bilinear_form_direct(&k, 5, &alpha, &beta).unwrap();
            let c = bilinear_form_convolved(&k, 5, &alpha, &beta).unwrap();
            assert!(
                (d - c).norm() <= 1e-7 * d.norm().max(1.0),
                "direct {d} vs convolved {c}"
            );
        }
    }

    #[test]
    fn swapping_sequences_preserves_value() {
        let k = table(53);
        let alpha = random_vector(21, 2, 14);
        let beta = random_vector(22, 7, 19);
        let ab = bilinear_form(&k, 9, &alpha, &beta).unwrap();
        let ba = bilinear_form(&k, 9, &beta, &alpha).unwrap();
        assert!((ab - ba).norm() <= 1e-12 * ab.norm().max(1.0));
    }

    #[test]
    fn shape_preconditions_are_enforced() {
        let mut p = BoundInput::new(101, 50, 5);
        // 50 > 5² violates M ≤ N²
        match bound_shape(BoundName::TypeI, &p) {
            Err(BilinearError::PreconditionViolated { bound, .. }) => {
                assert_eq!(bound, "type_i")
            }
            other => panic!("expected precondition error, got {other:?}"),
        }
        // MN = 2 sits below the q^{1/4} ≈ 3.17 cutoff
        p = BoundInput::new(101, 1, 2);
        assert!(bound_shape(BoundName::Conjectural, &p).is_err());
        p = BoundInput::new(101, 10, 4);
        assert!(matches!(
            bound_shape(BoundName::Shifted, &p),
            Err(BilinearError::PreconditionViolated { .. })
        ));
        p = BoundInput::new(101, 4, 24);
        p.n1 = 0;
        assert!(bound_shape(BoundName::TrilinearA, &p).is_err());
        p.n1 = 6; // 6 > 24/6 = 4 violates N1 ≤ N2
        assert!(bound_shape(BoundName::TrilinearB, &p).is_err());
    }

    #[test]
    fn type_ii_shape_scale_in_both_regimes() {
        // at M = N = q the shape saves a q^{1/4} against the trivial one
        let q = 997u64;
        let p = BoundInput::new(q, q, q);
        let shape = bound_shape(BoundName::TypeII, &p).unwrap();
        let scale = (q as f64) * (q as f64).powf(-0.25);
        assert!(shape / scale >= 1.0 && shape / scale <= 2.0, "{}", shape / scale);
        // at M = N = √q the q^{1/4}N^{-1/2} term is of size 1 and the
        // shape is the full (MN)^{1/2}: the saving disappears
        let p = BoundInput::new(q, 31, 31);
        let shape = bound_shape(BoundName::TypeII, &p).unwrap();
        assert!(shape / 31.0 >= 1.0 && shape / 31.0 <= 2.5, "{}", shape / 31.0);
    }

    #[test]
    fn conjectural_shape_saves_q_to_the_one_sixty_fourth() {
        let q = 997u64;
        let m = 31u64; // MN = 961 ≈ q
        let p = BoundInput::new(q, m, m);
        let conj = bound_shape(BoundName::Conjectural, &p).unwrap();
        let trivial = bound_shape(BoundName::Trivial, &p).unwrap();
        let saving = conj / trivial * (q as f64).powf(1.0 / 64.0);
        assert!(saving > 0.4 && saving < 1.1, "saving factor {saving}");
    }

    #[test]
    fn shifted_shape_matches_substitution_at_equal_ranges() {
        let q = 101u64;
        let p = BoundInput::new(q, 64, 64);
        let shape = bound_shape(BoundName::Shifted, &p).unwrap();
        let x = (1.0 / q as f64).powf(0.25);
        let by_hand = x * (1.0 + x) + (q as f64).powf(-0.5 + 7.0 / 64.0);
        assert!((shape - by_hand).abs() < 1e-15);
    }

    #[test]
    fn ratio_experiment_reports_requested_bounds() {
        let q = PrimeModulus::new(101).unwrap();
        let reports = ratio_experiment(
            q,
            1,
            CoefficientFamily::Ones,
            CoefficientFamily::Rademacher(4),
            10,
            10,
            &[BoundName::Trivial, BoundName::TypeII],
        )
        .unwrap();
        assert_eq!(reports.len(), 2);
        assert_eq!(reports[0].bound_name, BoundName::Trivial);
        assert!(reports[0].ratio <= 2.0 + 1e-12);
        assert_eq!(reports[0].lhs_abs, reports[1].lhs_abs);
        for r in &reports {
            assert!((r.ratio - r.lhs_abs / r.rhs_shape).abs() < 1e-15);
        }
    }

    #[test]
    fn congruence_sum_with_empty_congruence_is_minus_mean_term() {
        // q beyond every m ± n in the windows: only the subtracted term
        // survives
        let q = 1009u64;
        let w = SmoothWindow;
        let v = congruence_bilinear(
            CongruenceFamily::Divisor,
            CongruenceFamily::Divisor,
            50,
            50,
            q,
            Sign::Plus,
            &w,
            &w,
        );
        let d = divisor_counts(100);
        let s: f64 = (26..=100u64)
            .map(|m| d[m as usize - 1] * w.eval(m as f64 / 50.0))
            .sum();
        let expected = -s * s / (q as f64 * 50.0);
        assert!((v - expected).abs() < 1e-12, "{v} vs {expected}");
    }

    #[test]
    fn congruence_sum_matches_brute_force() {
        let q = 101u64;
        let w = SmoothWindow;
        for sign in [Sign::Plus, Sign::Minus] {
            let v = congruence_bilinear(
                CongruenceFamily::Divisor,
                CongruenceFamily::Divisor,
                50,
                50,
                q,
                sign,
                &w,
                &w,
            );
            let d = divisor_counts(100);
            let mut first = 0.0f64;
            let mut sf = 0.0f64;
            let mut sg = 0.0f64;
            for m in 26..=100u64 {
                let cm = d[m as usize - 1] * w.eval(m as f64 / 50.0);
                if m % q != 0 {
                    sf += cm;
                }
                for n in 26..=100u64 {
                    let cn = d[n as usize - 1] * w.eval(n as f64 / 50.0);
                    let hit = match sign {
                        Sign::Plus => (m + q - n % q) % q == 0,
                        Sign::Minus => (m + n) % q == 0,
                    };
                    if hit && m != n {
                        first += cm * cn;
                    }
                }
            }
            for n in 26..=100u64 {
                if n % q != 0 {
                    sg += d[n as usize - 1] * w.eval(n as f64 / 50.0);
                }
            }
            let expected = first / 50.0 - sf * sg / (q as f64 * 50.0);
            assert!((v - expected).abs() < 1e-10, "{v} vs {expected}");
        }
    }

    #[test]
    fn trilinear_matches_brute_force() {
        let q = PrimeModulus::new(101).unwrap();
        let w = [SmoothWindow, SmoothWindow, SmoothWindow];
        for fam in [CongruenceFamily::Divisor, CongruenceFamily::Tau] {
            for sign in [Sign::Plus, Sign::Minus] {
                let (v, reports) =
                    trilinear_congruence(fam, 4, 16, 60, q, sign, &w).unwrap();
                let lam = fam.coefficients(120);
                let mut expected = 0.0f64;
                for n1 in 3..=8u64 {
                    for n2 in 9..=32u64 {
                        for m in 31..=120u64 {
                            let hit = match sign {
                                Sign::Plus => (n1 * n2) % 101 == m % 101,
                                Sign::Minus => (n1 * n2 + m) % 101 == 0,
                            };
                            if hit {
                                expected += lam[m as usize - 1]
                                    * w[0].eval(n1 as f64 / 4.0)
                                    * w[1].eval(n2 as f64 / 16.0)
                                    * w[2].eval(m as f64 / 60.0);
                            }
                        }
                    }
                }
                expected /= (60.0f64 * 64.0).sqrt();
                assert!((v - expected).abs() < 1e-10, "{fam:?} {sign:?}: {v} vs {expected}");
                assert_eq!(reports.len(), 2);
                for r in &reports {
                    assert!(r.rhs_shape > 0.0);
                    assert!((r.lhs_abs - v.abs()).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn trilinear_exact_products_when_modulus_is_large() {
        // q > every n1·n2 + m: the plus congruence degenerates to
        // n1·n2 = m and the minus one is empty
        let q = PrimeModulus::new(4099).unwrap();
        let w = [SmoothWindow, SmoothWindow, SmoothWindow];
        let (plus, _) =
            trilinear_congruence(CongruenceFamily::Divisor, 4, 16, 60, q, Sign::Plus, &w).unwrap();
        let (minus, _) =
            trilinear_congruence(CongruenceFamily::Divisor, 4, 16, 60, q, Sign::Minus, &w).unwrap();
        assert_eq!(minus, 0.0);
        let d = divisor_counts(256);
        let mut expected = 0.0f64;
        for n1 in 3..=8u64 {
            for n2 in 9..=32u64 {
                let m = n1 * n2;
                if (31..=120).contains(&m) {
                    expected += d[m as usize - 1]
                        * w[0].eval(n1 as f64 / 4.0)
                        * w[1].eval(n2 as f64 / 16.0)
                        * w[2].eval(m as f64 / 60.0);
                }
            }
        }
        expected /= (60.0f64 * 64.0).sqrt();
        assert!((plus - expected).abs() < 1e-12);
    }

    #[test]
    fn shifted_error_report_is_consistent() {
        let q = PrimeModulus::new(101).unwrap();
        let r = shifted_error_ratio(CongruenceFamily::Divisor, 64, 64, q, Sign::Plus).unwrap();
        assert_eq!(r.bound_name, BoundName::Shifted);
        assert!(r.lhs_abs >= 0.0);
        assert!(r.rhs_shape > 0.0);
        assert!((r.ratio - r.lhs_abs / r.rhs_shape).abs() < 1e-15);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn trivial_bound_is_never_exceeded(seed in 0u64..1 << 20, la in 1usize..12, lb in 1usize..12) {
            let k = table(53);
            let alpha = random_vector(seed, 1, la);
            let beta = random_vector(seed ^ 0xdead, 1, lb);
            let v = bilinear_form(&k, 7, &alpha, &beta).unwrap();
            let cap = 2.0 * ((la * lb) as f64).sqrt() * alpha.l2() * beta.l2();
            prop_assert!(v.norm() <= cap * (1.0 + 1e-12));
        }
    }
}
