//! Fourth-order sums of Kloosterman values along shifted arguments.
//!
//! The central object is the product
//!
//! ```text
//!   P(r, s) = K(s(r+b1)) K(s(r+b2)) conj(K(s(r+b1')) K(s(r+b2')))
//! ```
//!
//! attached to a quadruple of shifts `(b1, b2, b1', b2')`. Three sums of
//! this product matter:
//!
//! * [`sigma_incomplete`]: r over all residues, s over an integer range
//!   `1..=A*M`;
//! * [`sigma_complete`]: both r and s over all residues, with an extra
//!   additive twist `e_q(hs)`;
//! * the split of the complete sum as a quadruple-independent baseline
//!   ([`sigma_baseline`]) plus a two-variable exponential sum over the
//!   solution set of two linear equations ([`two_equation_sum`]).
//!
//! For prime q the table values `K` are real, so the conjugations in `P`
//! leave the numeric values untouched; the code exploits this and works
//! with real products throughout.
//!
//! Quadruples whose shifts collide carry no cancellation (the product
//! degenerates to squares), and the scanners exclude them via the
//! diagonal predicates before measuring how far `|sigma_complete|/q`
//! stays bounded across the remaining family.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::ffq::{AdditiveCharTable, InverseTable, PrimeModulus};
use crate::kloosterman::{self, KloostermanError, KloostermanTable};

#[derive(Debug, Error)]
pub enum SumError {
    /// The two independent evaluations of the baseline term disagree.
    #[error("baseline identity violated at q={q}: direct={direct}, closed={closed}")]
    IdentityViolation { q: u64, direct: f64, closed: f64 },
    /// A linear form handed to `two_variable_sum` vanishes identically.
    #[error("linear form is identically zero mod q")]
    ZeroForm,
    /// The requested scan family exceeds the configured work budget.
    #[error("scan family needs {required} units, budget is {budget}")]
    WorkBudgetExceeded { required: u64, budget: u64 },
    #[error(transparent)]
    Table(#[from] KloostermanError),
}

/// Shift quadruple `(b1, b2, b1', b2')`. Entries are residues mod q;
/// construction does not reduce, evaluators do.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Quadruple {
    pub b1: u64,
    pub b2: u64,
    pub b1p: u64,
    pub b2p: u64,
}

impl Quadruple {
    pub fn new(b1: u64, b2: u64, b1p: u64, b2p: u64) -> Self {
        Quadruple { b1, b2, b1p, b2p }
    }

    pub fn reduced(self, q: u64) -> Self {
        Quadruple {
            b1: self.b1 % q,
            b2: self.b2 % q,
            b1p: self.b1p % q,
            b2p: self.b2p % q,
        }
    }

    /// Exchange the unprimed and primed pairs.
    pub fn swapped(self) -> Self {
        Quadruple {
            b1: self.b1p,
            b2: self.b2p,
            b1p: self.b1,
            b2p: self.b2,
        }
    }

    pub fn as_array(self) -> [u64; 4] {
        [self.b1, self.b2, self.b1p, self.b2p]
    }
}

/// Ranges for the shift trick: a runs over (A, 2A], b over (B, 2B], and
/// M bounds the m-variable, so the folded variable s = am runs up to A*M
/// inside [`sigma_incomplete`]. Callers inside the bilinear pipeline are
/// expected to keep AB ≤ N and 2AM < q.
#[derive(Debug, Clone, Copy)]
pub struct ShiftParams {
    pub a: u64,
    pub b: u64,
    pub m: u64,
}

impl ShiftParams {
    pub fn new(a: u64, b: u64, m: u64) -> Self {
        ShiftParams { a, b, m }
    }

    /// Upper end of the folded s-range.
    pub fn s_max(&self) -> u64 {
        self.a * self.m
    }
}

/// True when the unprimed pair matches the primed pair entrywise, in
/// either order: (b1,b2) = (b1',b2') or (b1,b2) = (b2',b1').
pub fn is_diagonal_matched(b: Quadruple) -> bool {
    (b.b1 == b.b1p && b.b2 == b.b2p) || (b.b1 == b.b2p && b.b2 == b.b1p)
}

/// Broadest diagonal class: a matched quadruple, or one with a repeated
/// entry inside either pair (b1 = b2 or b1' = b2'). A repeat inside a
/// pair turns the corresponding factor into a square whose positive
/// bias is visible before any averaging.
pub fn is_diagonal_extended(b: Quadruple) -> bool {
    is_diagonal_matched(b) || b.b1 == b.b2 || b.b1p == b.b2p
}

/// Pair-versus-complementary-pair matching: some ordered pair of
/// entries with distinct indices equals the pair formed by the other
/// two indices, in some order. Enumerating the pairings reduces this to
/// matched, plus the doubly repeated case b1 = b2 and b1' = b2'. This
/// is the exclusion set for the correlation-cancellation scans; its
/// complement within (B, 2B]^4 has size O(B²).
pub fn is_diagonal_complementary(b: Quadruple) -> bool {
    is_diagonal_matched(b) || (b.b1 == b.b2 && b.b1p == b.b2p)
}

#[inline]
fn four_shifts(b: Quadruple, r: u64, q: u64) -> [u64; 4] {
    [
        (r + b.b1) % q,
        (r + b.b2) % q,
        (r + b.b1p) % q,
        (r + b.b2p) % q,
    ]
}

/// Σ_{r mod q} Σ_{1 ≤ s ≤ A·M} P(r, s), all arguments reduced mod q.
///
/// The value is real because the table values are; it is returned as a
/// complex number to match the completed sum.
pub fn sigma_incomplete(k: &KloostermanTable, b: Quadruple, p: ShiftParams) -> Complex64 {
    let q = k.modulus().get();
    let b = b.reduced(q);
    let s_max = p.s_max();
    let mut total = 0.0f64;
    for r in 0..q {
        let c = four_shifts(b, r, q);
        let mut t = [0u64; 4];
        for _s in 1..=s_max {
            for i in 0..4 {
                t[i] += c[i];
                if t[i] >= q {
                    t[i] -= q;
                }
            }
            total += k.kl(t[0]) * k.kl(t[1]) * k.kl(t[2]) * k.kl(t[3]);
        }
    }
    Complex64::new(total, 0.0)
}

/// Σ_{r, s mod q} P(r, s) e_q(hs).
///
/// The s-sum starts at s = 0, where all four arguments vanish and the
/// product is K(0)^4. Summation order is fixed (r outer, s inner, both
/// ascending) so repeated runs are bit-identical.
pub fn sigma_complete(k: &KloostermanTable, b: Quadruple, h: u64) -> Complex64 {
    let chars = AdditiveCharTable::new(k.modulus());
    sigma_complete_with(k, &chars, b, h)
}

/// As [`sigma_complete`] with a caller-supplied character table, for
/// scans that evaluate many cells at the same modulus.
pub fn sigma_complete_with(
    k: &KloostermanTable,
    chars: &AdditiveCharTable,
    b: Quadruple,
    h: u64,
) -> Complex64 {
    let q = k.modulus().get();
    let b = b.reduced(q);
    let h = h % q;
    let vals = chars.values();
    let mut acc = Complex64::new(0.0, 0.0);
    for r in 0..q {
        let c = four_shifts(b, r, q);
        let mut t = [0u64; 4];
        let mut phase = 0u64;
        for _s in 0..q {
            let p = k.kl(t[0]) * k.kl(t[1]) * k.kl(t[2]) * k.kl(t[3]);
            acc += p * vals[phase as usize];
            for i in 0..4 {
                t[i] += c[i];
                if t[i] >= q {
                    t[i] -= q;
                }
            }
            phase += h;
            if phase >= q {
                phase -= q;
            }
        }
    }
    acc
}

/// The part of [`sigma_complete`] that does not depend on the quadruple
/// or the twist: q^{-1} times the sum of e_q(ū+v̄-ū'-v̄') over tuples
/// with u+v ≠ u'+v' (zero arguments skipped).
///
/// Two evaluations run side by side. The closed form
///
/// ```text
///   q·K(0)^4 − Σ_r K(r)^4
/// ```
///
/// costs one pass over the table. The direct form groups tuples by
/// w = u+v through T(w) = Σ_{u+v=w} e_q(ū+v̄) and reads off
/// q^{-1}(|Σ_w T(w)|² − Σ_w |T(w)|²). Disagreement beyond 1e-6·q is an
/// error, not a tolerance.
pub fn sigma_baseline(k: &KloostermanTable) -> Result<Complex64, SumError> {
    let q = k.modulus();
    let qu = q.get();
    let chars = AdditiveCharTable::new(q);
    let inv = InverseTable::new(q);

    let closed = qu as f64 * k.kl(0).powi(4) - k.values().iter().map(|v| v.powi(4)).sum::<f64>();

    let mut t_total = Complex64::new(0.0, 0.0);
    let mut t_norm_sq = 0.0f64;
    for w in 0..qu {
        let mut tw = Complex64::new(0.0, 0.0);
        for u in 1..qu {
            let v = (w + qu - u) % qu;
            if v == 0 {
                continue;
            }
            tw += chars.eq_u(inv.inv(u) + inv.inv(v));
        }
        t_total += tw;
        t_norm_sq += tw.norm_sqr();
    }
    let direct = (t_total.norm_sqr() - t_norm_sq) / qu as f64;

    if (direct - closed).abs() > 1e-6 * qu as f64 {
        return Err(SumError::IdentityViolation {
            q: qu,
            direct,
            closed,
        });
    }
    Ok(Complex64::new(closed, 0.0))
}

/// Core double loop shared by [`two_variable_sum`] and
/// [`two_equation_sum`]: Σ_{u,v ≠ 0} e_q(ū + v̄ − inv(αu+βv+h) − inv(γu+δv−h))
/// with every term whose inverse argument vanishes skipped. Accepts
/// identically zero forms (their terms are then all skipped or all
/// constant shifts h, per the same convention).
fn sum_over_uv(
    l3: (u64, u64),
    l4: (u64, u64),
    h: u64,
    chars: &AdditiveCharTable,
    inv: &InverseTable,
) -> Complex64 {
    let q = chars.modulus().get();
    let (alpha, beta) = (l3.0 % q, l3.1 % q);
    let (gamma, delta) = (l4.0 % q, l4.1 % q);
    let h = h % q;
    let neg_h = (q - h) % q;
    let mut acc = Complex64::new(0.0, 0.0);
    for u in 1..q {
        let iu = inv.inv(u);
        let au = alpha * u % q;
        let gu = gamma * u % q;
        for v in 1..q {
            let a3 = (au + beta * v + h) % q;
            if a3 == 0 {
                continue;
            }
            let a4 = (gu + delta * v + neg_h) % q;
            if a4 == 0 {
                continue;
            }
            acc += chars.eq_u(iu + inv.inv(v) + 2 * q - inv.inv(a3) - inv.inv(a4));
        }
    }
    acc
}

/// Two-variable exponential sum attached to the linear forms
/// l3(u,v) = αu+βv and l4(u,v) = γu+δv:
///
/// ```text
///   Σ_{u,v} e_q(ū + v̄ − inv(l3(u,v)+h) − inv(l4(u,v)−h))
/// ```
///
/// Terms with a zero inverse argument are skipped. When {l3, l4} is the
/// coordinate pair {u, v} and h = 0 the phase cancels identically and
/// the value is (q−1)²; away from that excluded configuration the sum
/// stays of size O(q).
pub fn two_variable_sum(
    l3: (u64, u64),
    l4: (u64, u64),
    h: u64,
    q: PrimeModulus,
) -> Result<Complex64, SumError> {
    let chars = AdditiveCharTable::new(q);
    let inv = InverseTable::new(q);
    two_variable_sum_with(l3, l4, h, &chars, &inv)
}

pub fn two_variable_sum_with(
    l3: (u64, u64),
    l4: (u64, u64),
    h: u64,
    chars: &AdditiveCharTable,
    inv: &InverseTable,
) -> Result<Complex64, SumError> {
    let q = chars.modulus().get();
    if (l3.0 % q, l3.1 % q) == (0, 0) || (l4.0 % q, l4.1 % q) == (0, 0) {
        return Err(SumError::ZeroForm);
    }
    Ok(sum_over_uv(l3, l4, h, chars, inv))
}

/// Degenerate quadruples handled directly up to this modulus; above it
/// the factored route through T(w) takes over.
const DEGENERATE_DIRECT_CAP: u64 = 61;

/// Σ e_q(ū+v̄−ū'−v̄') over solutions of
///
/// ```text
///   u + v = u' + v'
///   b1·u + b2·v = b1'·u' + b2'·v' − h
/// ```
///
/// with zero arguments skipped. For b1' ≠ b2' the system is solved for
/// (u', v') in terms of (u, v), which turns the sum into a two-variable
/// sum over the forms
///
/// ```text
///   l3 = ((b1−b2')u + (b2−b2')v) / (b1'−b2'),   u' = l3 + h/(b1'−b2')
///   l4 = ((b1'−b1)u + (b1'−b2)v) / (b1'−b2'),   v' = l4 − h/(b1'−b2')
/// ```
///
/// For b1' = b2' with b1 ≠ b2 the roles of (u,v) and (u',v') are
/// exchanged: the sum equals conj of the swapped quadruple's sum at −h.
/// When both pairs are constant the second equation pins only w = u+v,
/// and the sum factors through T(w) = Σ_{u+v=w} e_q(ū+v̄); small moduli
/// keep the straight triple loop as written.
pub fn two_equation_sum(b: Quadruple, h: u64, q: PrimeModulus) -> Complex64 {
    let chars = AdditiveCharTable::new(q);
    let inv = InverseTable::new(q);
    two_equation_sum_with(b, h, &chars, &inv)
}

pub fn two_equation_sum_with(
    b: Quadruple,
    h: u64,
    chars: &AdditiveCharTable,
    inv: &InverseTable,
) -> Complex64 {
    let q = chars.modulus().get();
    let b = b.reduced(q);
    let h = h % q;
    if b.b1p != b.b2p {
        let dinv = inv.inv((b.b1p + q - b.b2p) % q);
        let l3 = (
            (b.b1 + q - b.b2p) % q * dinv % q,
            (b.b2 + q - b.b2p) % q * dinv % q,
        );
        let l4 = (
            (b.b1p + q - b.b1) % q * dinv % q,
            (b.b1p + q - b.b2) % q * dinv % q,
        );
        sum_over_uv(l3, l4, h * dinv % q, chars, inv)
    } else if b.b1 != b.b2 {
        two_equation_sum_with(b.swapped(), (q - h) % q, chars, inv).conj()
    } else if q <= DEGENERATE_DIRECT_CAP {
        degenerate_direct(b, h, chars, inv)
    } else {
        degenerate_factored(b, h, chars, inv)
    }
}

fn degenerate_direct(
    b: Quadruple,
    h: u64,
    chars: &AdditiveCharTable,
    inv: &InverseTable,
) -> Complex64 {
    let q = chars.modulus().get();
    let mut acc = Complex64::new(0.0, 0.0);
    for u in 1..q {
        for v in 1..q {
            let rhs = (b.b1 * u + b.b2 * v + h) % q;
            let w = (u + v) % q;
            let base = inv.inv(u) + inv.inv(v);
            for up in 1..q {
                let vp = (w + q - up) % q;
                if vp == 0 {
                    continue;
                }
                if (b.b1p * up + b.b2p * vp) % q != rhs {
                    continue;
                }
                acc += chars.eq_u(base + 2 * q - inv.inv(up) - inv.inv(vp));
            }
        }
    }
    acc
}

/// With b1 = b2 = c and b1' = b2' = c' the second equation reads
/// (c'−c)·w = h for w = u+v, so the sum collapses to |T(w)|² on the
/// admissible w (all w when c' = c and h = 0, a single w otherwise).
fn degenerate_factored(
    b: Quadruple,
    h: u64,
    chars: &AdditiveCharTable,
    inv: &InverseTable,
) -> Complex64 {
    let q = chars.modulus().get();
    let t_at = |w: u64| -> Complex64 {
        let mut tw = Complex64::new(0.0, 0.0);
        for u in 1..q {
            let v = (w + q - u) % q;
            if v == 0 {
                continue;
            }
            tw += chars.eq_u(inv.inv(u) + inv.inv(v));
        }
        tw
    };
    let d = (b.b1p + q - b.b1) % q;
    if d == 0 {
        if h != 0 {
            return Complex64::new(0.0, 0.0);
        }
        let mut acc = 0.0;
        for w in 0..q {
            acc += t_at(w).norm_sqr();
        }
        Complex64::new(acc, 0.0)
    } else {
        Complex64::new(t_at(h * inv.inv(d) % q).norm_sqr(), 0.0)
    }
}

/// Scan families larger than this are refused outright.
pub const SCAN_WORK_BUDGET: u64 = 1 << 20;

#[derive(Debug, Clone, Serialize)]
pub struct ArgmaxCell {
    pub b: [u64; 4],
    pub h: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SumScanReport {
    pub q: u64,
    pub family: String,
    pub max_abs: f64,
    /// max_abs divided by the normalizer q.
    pub max_ratio: f64,
    pub argmax: ArgmaxCell,
    #[serde(rename = "scanned")]
    pub count_scanned: usize,
}

/// Evaluate |sigma_complete| across all quadruples with entries in
/// (b_base, 2·b_base] that avoid the complementary-pair diagonal,
/// crossed with the given twists, and report the largest ratio |Σ|/q.
///
/// The exclusion has to be the complementary-pair class, not just the
/// matched one: the table values are real, so the sum depends only on
/// the multiset of the four entries, and a doubly repeated quadruple
/// like (4,4,3,3) equals the matched (4,3,4,3), a positive sum of size
/// about q² with no cancellation to measure.
///
/// Cells are evaluated in parallel; the maximum is taken by a
/// deterministic fold over the ordered cell list (first strict maximum
/// wins), so reports are reproducible at any thread count.
pub fn scan_complete_sums(
    q: PrimeModulus,
    b_base: u64,
    h_sample: &[u64],
) -> Result<SumScanReport, SumError> {
    assert!(b_base >= 1);
    let required = 16u64.saturating_mul(b_base.saturating_pow(4));
    if required > SCAN_WORK_BUDGET {
        return Err(SumError::WorkBudgetExceeded {
            required,
            budget: SCAN_WORK_BUDGET,
        });
    }
    let k = kloosterman::table(q)?;
    let chars = AdditiveCharTable::new(q);
    let qu = q.get();

    let mut cells: Vec<(Quadruple, u64)> = Vec::new();
    for b1 in b_base + 1..=2 * b_base {
        for b2 in b_base + 1..=2 * b_base {
            for b1p in b_base + 1..=2 * b_base {
                for b2p in b_base + 1..=2 * b_base {
                    let quad = Quadruple::new(b1, b2, b1p, b2p).reduced(qu);
                    if is_diagonal_complementary(quad) {
                        continue;
                    }
                    for &h in h_sample {
                        cells.push((quad, h % qu));
                    }
                }
            }
        }
    }

    let mags: Vec<f64> = cells
        .par_iter()
        .map(|&(quad, h)| sigma_complete_with(&k, &chars, quad, h).norm())
        .collect();

    let mut best = 0usize;
    for (i, &m) in mags.iter().enumerate() {
        if m > mags[best] {
            best = i;
        }
    }
    let (max_abs, argmax) = if cells.is_empty() {
        (0.0, ArgmaxCell { b: [0; 4], h: 0 })
    } else {
        (
            mags[best],
            ArgmaxCell {
                b: cells[best].0.as_array(),
                h: cells[best].1,
            },
        )
    };

    Ok(SumScanReport {
        q: qu,
        family: format!(
            "b in ({}, {}]^4 minus paired diagonal, h in {:?}",
            b_base,
            2 * b_base,
            h_sample
        ),
        max_abs,
        max_ratio: max_abs / qu as f64,
        argmax,
        count_scanned: cells.len(),
    })
}
