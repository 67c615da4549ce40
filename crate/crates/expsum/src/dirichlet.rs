//! Dirichlet characters modulo a prime, Gauss sums, central L-values
//! through Hurwitz zeta, the exact fourth moment, and the even/odd
//! moment decomposition checked end to end against character sums.

use std::fmt;
use std::sync::OnceLock;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::ffq::{self, FfqError, PrimeModulus};
use crate::modforms::{self, CoefficientKind};
use crate::special::{gamma, MellinKernel};

const PI: f64 = std::f64::consts::PI;
const TAU_ANGLE: f64 = 2.0 * std::f64::consts::PI;

#[derive(Debug)]
pub enum DirichletError {
    TrivialCharacter,
    NotCoprime,
    PoleAtOne,
    UnsupportedPair,
    Modulus(FfqError),
}

impl fmt::Display for DirichletError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DirichletError::TrivialCharacter => write!(f, "operation requires a non-trivial character"),
            DirichletError::NotCoprime => write!(f, "arguments share a factor with the modulus"),
            DirichletError::PoleAtOne => write!(f, "zeta has a pole at s = 1"),
            DirichletError::UnsupportedPair => write!(f, "unsupported coefficient pair"),
            DirichletError::Modulus(e) => write!(f, "bad modulus: {e}"),
        }
    }
}

impl std::error::Error for DirichletError {}

impl From<FfqError> for DirichletError {
    fn from(e: FfqError) -> Self {
        DirichletError::Modulus(e)
    }
}

/// Character parity: Even means chi(-1) = +1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub const BOTH: [Parity; 2] = [Parity::Even, Parity::Odd];

    /// chi(-1) as a real number.
    pub fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }

    /// The shift in the archimedean gamma factor: 0 for even, 1 for odd.
    pub fn gamma_shift(self) -> f64 {
        match self {
            Parity::Even => 0.0,
            Parity::Odd => 1.0,
        }
    }
}

impl fmt::Display for Parity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Parity::Even => write!(f, "+1"),
            Parity::Odd => write!(f, "-1"),
        }
    }
}

/// Value tables are materialized eagerly, so group construction is held
/// to desk scale.
pub const GROUP_LIMIT: u64 = 4096;

/// The full character group modulo a prime q, realized through a fixed
/// generator and its discrete-log table.
#[derive(Debug, Clone)]
pub struct DirichletGroup {
    q: u64,
    g: u64,
    dlog: Vec<u32>,
    /// e(m/(q-1)) for m in 0..q-1.
    roots: Vec<Complex64>,
}

impl DirichletGroup {
    pub fn new(q: u64) -> Result<Self, DirichletError> {
        assert!(q <= GROUP_LIMIT, "modulus {q} beyond the supported table size");
        let p = PrimeModulus::new(q)?;
        let (g, dlog) = ffq::dlog_table(p);
        let order = q - 1;
        let roots = (0..order)
            .map(|m| Complex64::from_polar(1.0, TAU_ANGLE * m as f64 / order as f64))
            .collect();
        Ok(DirichletGroup { q, g, dlog, roots })
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn generator(&self) -> u64 {
        self.g
    }

    pub fn order(&self) -> u64 {
        self.q - 1
    }

    /// Discrete log of x to base g; x must be nonzero mod q.
    pub fn dlog(&self, x: u64) -> u32 {
        let r = (x % self.q) as usize;
        let k = self.dlog[r];
        assert!(k != u32::MAX, "discrete log of 0");
        k
    }

    pub fn character(&self, index: u64) -> DirichletCharacter<'_> {
        assert!(index < self.order());
        DirichletCharacter { group: self, index }
    }

    pub fn characters(&self) -> impl Iterator<Item = DirichletCharacter<'_>> {
        (0..self.order()).map(move |j| self.character(j))
    }
}

/// chi_j with chi_j(g^k) = e(jk/(q-1)).
#[derive(Debug, Clone, Copy)]
pub struct DirichletCharacter<'a> {
    group: &'a DirichletGroup,
    index: u64,
}

impl<'a> DirichletCharacter<'a> {
    pub fn index(&self) -> u64 {
        self.index
    }

    pub fn modulus(&self) -> u64 {
        self.group.q
    }

    pub fn is_trivial(&self) -> bool {
        self.index == 0
    }

    pub fn eval(&self, x: u64) -> Complex64 {
        let r = (x % self.group.q) as usize;
        if r == 0 {
            return Complex64::new(0.0, 0.0);
        }
        let k = self.group.dlog[r] as u64;
        let order = self.group.order();
        self.group.roots[((self.index * k) % order) as usize]
    }

    /// chi(-1) = (-1)^j.
    pub fn parity(&self) -> Parity {
        if self.index % 2 == 0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    pub fn conjugate(&self) -> DirichletCharacter<'a> {
        let order = self.group.order();
        DirichletCharacter {
            group: self.group,
            index: (order - self.index) % order,
        }
    }

    pub fn times(&self, other: &DirichletCharacter<'a>) -> DirichletCharacter<'a> {
        assert!(std::ptr::eq(self.group, other.group));
        DirichletCharacter {
            group: self.group,
            index: (self.index + other.index) % self.group.order(),
        }
    }
}

/// tau(chi) = sum_x chi(x) e(x/q).
pub fn gauss_sum(chi: &DirichletCharacter<'_>) -> Result<Complex64, DirichletError> {
    if chi.is_trivial() {
        return Err(DirichletError::TrivialCharacter);
    }
    let q = chi.modulus();
    let mut acc = Complex64::new(0.0, 0.0);
    for x in 1..q {
        acc += chi.eval(x) * Complex64::from_polar(1.0, TAU_ANGLE * x as f64 / q as f64);
    }
    Ok(acc)
}

/// Normalized Gauss sum tau(chi)/sqrt(q), a unimodular number.
pub fn epsilon_chi(chi: &DirichletCharacter<'_>) -> Result<Complex64, DirichletError> {
    Ok(gauss_sum(chi)? / (chi.modulus() as f64).sqrt())
}

/// Root number i^{-a} tau(chi)/sqrt(q) in the functional equation
/// L(chi, 1/2) = eps(chi) L(conj chi, 1/2).
pub fn root_number(chi: &DirichletCharacter<'_>) -> Result<Complex64, DirichletError> {
    let e = epsilon_chi(chi)?;
    Ok(match chi.parity() {
        Parity::Even => e,
        Parity::Odd => e * Complex64::new(0.0, -1.0),
    })
}

/// (2/(q-1)) sum over chi of parity sigma of chi(m) conj(chi(n)),
/// against the closed form delta_{m=n} + sigma delta_{m=-n} (mod q).
/// The trivial character participates when sigma = +1.
pub fn orthogonality_check(
    q: u64,
    sigma: Parity,
    m: u64,
    n: u64,
) -> Result<(Complex64, f64), DirichletError> {
    let group = DirichletGroup::new(q)?;
    if m % q == 0 || n % q == 0 {
        return Err(DirichletError::NotCoprime);
    }
    let mut lhs = Complex64::new(0.0, 0.0);
    for chi in group.characters() {
        if chi.parity() == sigma {
            lhs += chi.eval(m) * chi.eval(n).conj();
        }
    }
    lhs *= 2.0 / (q as f64 - 1.0);
    let mut rhs = 0.0;
    if m % q == n % q {
        rhs += 1.0;
    }
    if (m + n) % q == 0 {
        rhs += sigma.sign();
    }
    assert!(
        (lhs - Complex64::new(rhs, 0.0)).norm() < 1e-9,
        "orthogonality failed: q={q} sigma={sigma} m={m} n={n}: {lhs} vs {rhs}"
    );
    Ok((lhs, rhs))
}

// ---------------------------------------------------------------------
// Hurwitz zeta and central values
// ---------------------------------------------------------------------

/// a^{-e} for a > 0.
fn real_pow(a: f64, e: Complex64) -> Complex64 {
    (-e * a.ln()).exp()
}

/// B_{2k}/(2k)! for k = 1..6.
const EM_COEFFS: [f64; 6] = [
    1.0 / 12.0,
    -1.0 / 720.0,
    1.0 / 30_240.0,
    -1.0 / 1_209_600.0,
    1.0 / 47_900_160.0,
    -691.0 / 1_307_674_368_000.0,
];

/// Euler-Maclaurin evaluation with an explicit cut n0.
fn hurwitz_em(s: Complex64, x: f64, n0: usize) -> Complex64 {
    let mut sum = Complex64::new(0.0, 0.0);
    for n in 0..n0 {
        sum += real_pow(n as f64 + x, s);
    }
    let a = n0 as f64 + x;
    sum += real_pow(a, s - Complex64::new(1.0, 0.0)) / (s - Complex64::new(1.0, 0.0));
    sum += 0.5 * real_pow(a, s);
    let mut rising = s;
    let mut apw = real_pow(a, s + Complex64::new(1.0, 0.0));
    let a2 = a * a;
    for (k, &c) in EM_COEFFS.iter().enumerate() {
        sum += c * rising * apw;
        if k + 1 < EM_COEFFS.len() {
            let m = 2.0 * (k as f64 + 1.0);
            rising = rising * (s + (m - 1.0)) * (s + m);
            apw /= a2;
        }
    }
    sum
}

fn em_terms_for(s: Complex64) -> usize {
    50 + (1.5 * s.im.abs()).ceil() as usize
}

/// zeta(s, x) for 0 < x <= 1, absolute error around 1e-12 on the
/// critical line for |Im s| <= 50.
pub fn hurwitz_zeta(s: Complex64, x: f64) -> Result<Complex64, DirichletError> {
    assert!(x > 0.0 && x <= 1.0, "shift parameter out of (0,1]");
    if s == Complex64::new(1.0, 0.0) {
        return Err(DirichletError::PoleAtOne);
    }
    Ok(hurwitz_em(s, x, em_terms_for(s)))
}

/// Riemann zeta through the same kernel.
pub fn zeta(s: Complex64) -> Result<Complex64, DirichletError> {
    hurwitz_zeta(s, 1.0)
}

/// L(chi, 1/2) for a single non-trivial character, via
/// L(chi, s) = q^{-s} sum_a chi(a) zeta(s, a/q).
pub fn central_value(chi: &DirichletCharacter<'_>) -> Result<Complex64, DirichletError> {
    if chi.is_trivial() {
        return Err(DirichletError::TrivialCharacter);
    }
    let q = chi.modulus();
    let s = Complex64::new(0.5, 0.0);
    let mut acc = Complex64::new(0.0, 0.0);
    for a in 1..q {
        acc += chi.eval(a) * hurwitz_em(s, a as f64 / q as f64, em_terms_for(s));
    }
    Ok(acc / (q as f64).sqrt())
}

/// All central values L(chi_j, 1/2), j = 1..q-2, sharing one row of
/// Hurwitz-zeta evaluations.
#[derive(Debug, Clone)]
pub struct CentralValueTable {
    q: u64,
    values: Vec<Complex64>,
    method: &'static str,
}

impl CentralValueTable {
    pub fn build(group: &DirichletGroup) -> Self {
        let q = group.q();
        let s = Complex64::new(0.5, 0.0);
        let hz: Vec<f64> = (1..q)
            .into_par_iter()
            .map(|a| hurwitz_em(s, a as f64 / q as f64, em_terms_for(s)).re)
            .collect();
        let scale = 1.0 / (q as f64).sqrt();
        let values: Vec<Complex64> = (1..q - 1)
            .into_par_iter()
            .map(|j| {
                let chi = group.character(j);
                let mut acc = Complex64::new(0.0, 0.0);
                for a in 1..q {
                    acc += chi.eval(a) * hz[(a - 1) as usize];
                }
                acc * scale
            })
            .collect();
        CentralValueTable { q, values, method: "hurwitz" }
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn method(&self) -> &'static str {
        self.method
    }

    pub fn value(&self, j: u64) -> Result<Complex64, DirichletError> {
        if j == 0 || j >= self.q - 1 {
            return Err(DirichletError::TrivialCharacter);
        }
        Ok(self.values[(j - 1) as usize])
    }
}

/// Fourth moment (1/(q-2)) sum_{j != 0} |L(chi_j, 1/2)|^4.
pub fn m4(q: u64) -> Result<f64, DirichletError> {
    let group = DirichletGroup::new(q)?;
    let table = CentralValueTable::build(&group);
    let mut acc = 0.0;
    for j in 1..q - 1 {
        acc += table.value(j)?.norm().powi(4);
    }
    Ok(acc / (q as f64 - 2.0))
}

// ---------------------------------------------------------------------
// The archimedean weight V and the moment decomposition
// ---------------------------------------------------------------------

fn vee_ratio(sigma: Parity) -> impl Fn(Complex64) -> Complex64 {
    let shift = 0.5 + sigma.gamma_shift();
    let g0 = gamma(Complex64::new(shift / 2.0, 0.0));
    move |s: Complex64| {
        let g = gamma((s + shift) / 2.0) / g0;
        let g2 = g * g;
        (-2.0 * s * PI.ln()).exp() * g2 * g2
    }
}

struct VeeKernels {
    right: MellinKernel,
    left: MellinKernel,
}

fn vee_kernels(sigma: Parity) -> &'static VeeKernels {
    static EVEN: OnceLock<VeeKernels> = OnceLock::new();
    static ODD: OnceLock<VeeKernels> = OnceLock::new();
    let cell = match sigma {
        Parity::Even => &EVEN,
        Parity::Odd => &ODD,
    };
    cell.get_or_init(|| VeeKernels {
        right: MellinKernel::new(2.0, false, vee_ratio(sigma)),
        left: MellinKernel::new(-0.25, true, vee_ratio(sigma)),
    })
}

/// The weight V(x) attached to a fourth power of central values: Mellin
/// inversion of the fourth power of the gamma-factor ratio. Evaluated on
/// the line Re s = 2 for plain x, and on Re s = -1/4 (plus the residue 1
/// at s = 0) for tiny x, where the right-line evaluation would lose all
/// precision to the x^{-2} prefactor.
pub fn v_ee(x: f64, sigma: Parity) -> f64 {
    assert!(x > 0.0);
    let k = vee_kernels(sigma);
    if x >= 0.01 {
        k.right.eval(x)
    } else {
        k.left.eval(x)
    }
}

/// Same integral on an arbitrary vertical line to the right of 0;
/// contour independence is the correctness cross-check.
pub fn v_ee_on_line(x: f64, sigma: Parity, sigma0: f64) -> f64 {
    assert!(x > 0.0 && sigma0 > 0.0);
    MellinKernel::new(sigma0, false, vee_ratio(sigma)).eval(x)
}

/// C with |V(x)| <= C x^{-5}, from the L1 mass of the line Re s = 5.
fn vee_tail_constant(sigma: Parity) -> f64 {
    static CONSTS: OnceLock<[f64; 2]> = OnceLock::new();
    let both = CONSTS.get_or_init(|| {
        let c = |p: Parity| MellinKernel::new(5.0, false, vee_ratio(p)).l1_bound();
        [c(Parity::Even), c(Parity::Odd)]
    });
    match sigma {
        Parity::Even => both[0],
        Parity::Odd => both[1],
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DecompositionCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub diff: f64,
    pub tol: f64,
}

/// Both routes to the parity-restricted fourth moment: the average of
/// |L|^4 over non-trivial characters of parity sigma (normalized by
/// q-1), against the residue-class double sum
///
///   S+ + sigma S- - (1+sigma) T/(q-1),
///
/// where S± run over m = ±n (mod q), T over all pairs coprime to q
/// (the trivial-character subtraction), all weighted by
/// d(m)d(n) V(mn/q^2)/sqrt(mn) and truncated at mn <= cutoff_x q^2.
/// The tolerance is the proven truncation tail: d(m)d(n) summed over a
/// product class is at most 8k, and |V(x)| <= C5 x^{-5} with C5 the L1
/// mass of the line Re s = 5, so each truncated sum tail is below
/// (16/7) C5 q^10 K^{-7/2}.
pub fn moment_decomposition_check(
    q: u64,
    sigma: Parity,
    cutoff_x: f64,
) -> Result<DecompositionCheck, DirichletError> {
    assert!(q <= 61, "work bound: moduli above 61 are out of contract");
    assert!(cutoff_x >= 1.0);
    let group = DirichletGroup::new(q)?;
    let table = CentralValueTable::build(&group);
    let qf = q as f64;

    let mut lhs = 0.0;
    for j in 1..q - 1 {
        if group.character(j).parity() == sigma {
            lhs += table.value(j)?.norm().powi(4);
        }
    }
    lhs /= qf - 1.0;

    let qu = q as usize;
    let k_max = (cutoff_x * qf * qf).floor() as usize;
    let d = modforms::divisor_table(k_max);
    let mut w = vec![0.0f64; k_max + 1];
    let trivial_weight = if sigma == Parity::Even { -2.0 / (qf - 1.0) } else { 0.0 };
    for m in 1..=k_max {
        if m % qu == 0 {
            continue;
        }
        let dm = d[m - 1];
        let cap = k_max / m;
        let mut n = m % qu;
        while n <= cap {
            w[n * m] += dm * d[n - 1];
            n += qu;
        }
        let mut n = qu - m % qu;
        while n <= cap {
            w[n * m] += sigma.sign() * dm * d[n - 1];
            n += qu;
        }
        if trivial_weight != 0.0 {
            for n in 1..=cap {
                if n % qu != 0 {
                    w[n * m] += trivial_weight * dm * d[n - 1];
                }
            }
        }
    }
    let q2 = qf * qf;
    let rhs: f64 = (1..=k_max)
        .into_par_iter()
        .map(|k| {
            let wk = w[k];
            if wk == 0.0 {
                0.0
            } else {
                wk * v_ee(k as f64 / q2, sigma) / (k as f64).sqrt()
            }
        })
        .sum();

    let c5 = vee_tail_constant(sigma);
    let classes = 2.0 + (1.0 + sigma.sign()) / (qf - 1.0);
    let tol =
        (16.0 / 7.0) * c5 * qf.powi(10) * (k_max as f64).powf(-3.5) * classes + 1e-6;
    let diff = (lhs - rhs).abs();
    assert!(
        diff <= tol,
        "decomposition out of tolerance: q={q} sigma={sigma} lhs={lhs} rhs={rhs} tol={tol}"
    );
    Ok(DecompositionCheck { lhs, rhs, diff, tol })
}

// ---------------------------------------------------------------------
// Diagonal main term
// ---------------------------------------------------------------------

fn qpow(q: f64, e: Complex64) -> Complex64 {
    (e * q.ln()).exp()
}

/// Residue at s = 0 of the diagonal generating integrand: the gamma
/// ratio of the pair, the q-deprived L-factor of the Rankin-Selberg
/// square over zeta(2+4s), and q^{2s}/s; computed as a contour integral
/// over a small circle.
pub fn diagonal_main_term(
    f: CoefficientKind,
    g: CoefficientKind,
    sigma: Parity,
    q: u64,
) -> Result<f64, DirichletError> {
    diagonal_main_term_at_radius(f, g, sigma, q, 0.1)
}

pub fn diagonal_main_term_at_radius(
    f: CoefficientKind,
    g: CoefficientKind,
    sigma: Parity,
    q: u64,
    radius: f64,
) -> Result<f64, DirichletError> {
    PrimeModulus::new(q)?;
    assert!(radius > 0.0 && radius < 0.2);
    let cuspidal = match (f, g) {
        (CoefficientKind::Divisor, CoefficientKind::Divisor) => false,
        (CoefficientKind::TauNormalized, CoefficientKind::Divisor) => true,
        _ => return Err(DirichletError::UnsupportedPair),
    };
    let qf = q as f64;
    let shift = 0.5 + sigma.gamma_shift();
    let g0 = gamma(Complex64::new(shift / 2.0, 0.0));
    let lambda_q = if cuspidal {
        let t = modforms::tau_table(q as usize);
        t[(q - 1) as usize] as f64 / qf.powf(5.5)
    } else {
        0.0
    };
    let gamma6 = gamma(Complex64::new(6.0, 0.0));
    let n = 128usize;
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 0..n {
        let z = Complex64::from_polar(radius, TAU_ANGLE * j as f64 / n as f64);
        let gr = gamma((z + shift) / 2.0) / g0;
        let euler2 = 1.0 - qpow(qf, -(2.0 + 4.0 * z));
        let zeta_denom = zeta(2.0 + 4.0 * z)? * euler2;
        let l_factor = if cuspidal {
            let e1 = 1.0 - lambda_q * qpow(qf, -(1.0 + 2.0 * z)) + qpow(qf, -(2.0 + 4.0 * z));
            let l = modforms::l_delta(1.0 + 2.0 * z) * e1;
            let gpair = (-z * TAU_ANGLE.ln()).exp() * gamma(z + 6.0) / gamma6
                * (-z * PI.ln()).exp()
                * gr
                * gr;
            gpair * l * l / zeta_denom
        } else {
            let e1 = 1.0 - qpow(qf, -(1.0 + 2.0 * z));
            let l = zeta(1.0 + 2.0 * z)? * e1;
            let l2 = l * l;
            let gr2 = gr * gr;
            (-2.0 * z * PI.ln()).exp() * gr2 * gr2 * l2 * l2 / zeta_denom
        };
        let fval = l_factor * qpow(qf, 2.0 * z) / z;
        acc += fval * z;
    }
    let res = acc / n as f64;
    assert!(res.im.abs() < 1e-8, "residue should be real, got {res}");
    Ok(res.re)
}

/// The diagonal sum the residue approximates:
/// sum over (m, q) = 1 of d(m)^2 / m · V(m^2/q^2).
pub fn diagonal_direct_sum(sigma: Parity, q: u64) -> f64 {
    let qu = q as usize;
    let m_max = 40 * qu;
    let d = modforms::divisor_table(m_max);
    let q2 = (q as f64) * (q as f64);
    (1..=m_max)
        .into_par_iter()
        .map(|m| {
            if m % qu == 0 {
                0.0
            } else {
                let mf = m as f64;
                d[m - 1] * d[m - 1] / mf * v_ee(mf * mf / q2, sigma)
            }
        })
        .sum()
}
