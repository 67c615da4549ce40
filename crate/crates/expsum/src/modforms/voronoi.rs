//! Dual-sum identity for additively twisted coefficient sums.
//!
//! A smooth sum Σ λ(n) W(n) e(an/c) equals a main term (divisor case
//! only) plus two reflected sums whose weights are Hankel-type
//! transforms of W. Both sides are computable independently, so the
//! identity doubles as an end-to-end test of the coefficient tables,
//! the Bessel evaluators, and the quadrature underneath.

use num_complex::Complex64;
use num_integer::Integer;
use rayon::prelude::*;
use std::f64::consts::PI;

use super::{divisor_table, tau_normalized, BesselKernel, CoefficientKind, ModformsError};
use crate::bilinear::SmoothWindow;
use crate::special::{integrate, integrate_panels, EULER_GAMMA};

/// Dual terms are cut off once their envelope falls below this for two
/// consecutive blocks; well under the 1e-12 scale where the reflected
/// sum stops moving the comparison.
const TERM_FLOOR: f64 = 1e-13;

/// Hard cap on the reflected sum; the decay estimates put the cutoff
/// far below this for every supported (c, X).
const DUAL_CAP: usize = 5000;

/// One evaluation of the reflection identity.
#[derive(Debug, Clone)]
pub struct VoronoiCheck {
    /// The twisted sum Σ λ(n) W(n) e(an/c).
    pub lhs: Complex64,
    /// Main term plus both reflected sums.
    pub rhs: Complex64,
    /// The main term alone (zero for the cuspidal coefficients).
    pub main_term: f64,
    /// |lhs - rhs|.
    pub diff: f64,
    /// Number of terms the reflected sums were evaluated at.
    pub dual_terms: usize,
}

/// The kernel argument 4π√(scale·v·y) sweeps 1.415·√(scale·y) full
/// oscillations as v runs over (1/2, 2); 3.5 panels per period keeps
/// the composite rule's truncation error under 1e-13 of the integrand
/// scale.
fn panels_for(scale: f64, y: f64) -> usize {
    8 + (5.0 * (scale * y).sqrt()).ceil() as usize
}

/// W(u) = window(u/scale), transformed against a Bessel kernel:
/// computes ∫ W(u) B(4π√(uy)) du.
fn transform(kernel: BesselKernel, scale: f64, y: f64) -> f64 {
    let w = SmoothWindow;
    scale
        * integrate_panels(
            |v: f64| w.eval(v) * kernel.eval(4.0 * PI * (scale * v * y).sqrt()),
            0.5,
            2.0,
            panels_for(scale, y),
        )
}

/// d/dy of the transform above, by differentiating under the integral.
fn transform_deriv(kernel: BesselKernel, scale: f64, y: f64) -> f64 {
    let w = SmoothWindow;
    scale
        * integrate_panels(
            |v: f64| {
                let x = 4.0 * PI * (scale * v * y).sqrt();
                w.eval(v) * kernel.deriv(x) * 2.0 * PI * (scale * v / y).sqrt()
            },
            0.5,
            2.0,
            panels_for(scale, y),
        )
}

fn unit(num: u64, den: u64) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI * (num % den) as f64 / den as f64)
}

fn inverse_mod(a: u64, c: u64) -> u64 {
    if c == 1 {
        return 0;
    }
    let e = (a as i64).extended_gcd(&(c as i64));
    debug_assert_eq!(e.gcd, 1);
    e.x.rem_euclid(c as i64) as u64
}

/// Checks Σ λ(n) W(n/X) e(an/c) against its reflected form. The window
/// is the canonical bump scaled to support (X/2, 2X).
pub fn voronoi_check(
    f: CoefficientKind,
    a: u64,
    c: u64,
    x_scale: f64,
) -> Result<VoronoiCheck, ModformsError> {
    assert!((1..=30).contains(&c), "modulus out of supported range");
    assert!(
        (2.0..=1.0e4).contains(&x_scale),
        "window scale out of supported range"
    );
    if a.gcd(&c) != 1 {
        return Err(ModformsError::NotCoprime { a, c });
    }
    let w = SmoothWindow;
    let cf = c as f64;

    let hi = (2.0 * x_scale).floor() as usize;
    let coeffs = match f {
        CoefficientKind::Divisor => divisor_table(hi),
        CoefficientKind::TauNormalized => tau_normalized(hi),
    };
    let lo = (x_scale / 2.0).floor().max(1.0) as usize;
    let mut lhs = Complex64::new(0.0, 0.0);
    for n in lo..=hi {
        let wn = w.eval(n as f64 / x_scale);
        if wn > 0.0 {
            lhs += coeffs[n - 1] * wn * unit(a * n as u64 % c, c);
        }
    }

    let main_term = if f == CoefficientKind::Divisor {
        x_scale / cf
            * integrate(
                |v: f64| ((x_scale * v).ln() + 2.0 * EULER_GAMMA - 2.0 * cf.ln()) * w.eval(v),
                0.5,
                2.0,
                1e-12,
            )
    } else {
        0.0
    };

    let (plus, minus) = match f {
        CoefficientKind::Divisor => (BesselKernel::YPair, Some(BesselKernel::KPair)),
        CoefficientKind::TauNormalized => (BesselKernel::JWeight(12), None),
    };
    let dual_coeffs = match f {
        CoefficientKind::Divisor => divisor_table(DUAL_CAP),
        CoefficientKind::TauNormalized => tau_normalized(DUAL_CAP),
    };
    let abar = inverse_mod(a % c, c);

    let mut dual = Complex64::new(0.0, 0.0);
    let mut dual_terms = 0usize;
    let mut quiet_blocks = 0usize;
    let block = 32usize;
    let mut start = 1usize;
    while start <= DUAL_CAP && quiet_blocks < 2 {
        let end = (start + block - 1).min(DUAL_CAP);
        let rows: Vec<(Complex64, f64)> = (start..=end)
            .into_par_iter()
            .map(|n| {
                let lam = dual_coeffs[n - 1];
                if lam == 0.0 {
                    return (Complex64::new(0.0, 0.0), 0.0);
                }
                let y = n as f64 / (cf * cf);
                let wp = transform(plus, x_scale, y);
                let wm = minus.map_or(0.0, |k| transform(k, x_scale, y));
                let shift = abar * n as u64 % c;
                let term = lam / cf
                    * (wp * unit((c - shift) % c, c) + wm * unit(shift, c));
                (term, lam.abs() / cf * (wp.abs() + wm.abs()))
            })
            .collect();
        let mut peak: f64 = 0.0;
        for (term, size) in rows {
            dual += term;
            peak = peak.max(size);
        }
        dual_terms = end;
        if peak < TERM_FLOOR {
            quiet_blocks += 1;
        } else {
            quiet_blocks = 0;
        }
        start = end + 1;
    }

    let rhs = main_term + dual;
    Ok(VoronoiCheck {
        lhs,
        rhs,
        main_term,
        diff: (lhs - rhs).norm(),
        dual_terms,
    })
}

/// Envelope measurements for the windowed transforms at scale M.
///
/// Each constant is the measured supremum of the transform against one
/// envelope shape over a log grid in My:
/// plain against M, smoothed against M(1 + √(My)/q_eps)^{-2}, and
/// derivative against y |dW̃/dy| ≤ C · M (1 + My)^{1/2}. The far tail
/// records max |W̃(y)| over y of size q_eps³/M and beyond, where the
/// transforms must have died off.
#[derive(Debug, Clone)]
pub struct BesselDecayReport {
    pub window_scale: f64,
    pub q_eps: f64,
    pub plain_constant: f64,
    pub smoothed_constant: f64,
    pub derivative_constant: f64,
    pub far_tail_max: f64,
}

/// Measures the decay envelopes of both transforms of W(x/M) for the
/// oscillatory/decaying kernel pair, on a log grid of My spanning
/// [1e-3, 2e4], plus the far tail y = {16, 32, 64}·q_eps³/M.
pub fn bessel_transform_decay_check(window_scale: f64, q_eps: f64) -> BesselDecayReport {
    assert!(window_scale >= 1.0 && q_eps >= 1.0);
    let m = window_scale;
    let kernels = [BesselKernel::YPair, BesselKernel::KPair];
    let points = 48usize;
    let (lo, hi) = (1e-3f64, 2e4f64);
    let grid: Vec<f64> = (0..points)
        .map(|i| lo * (hi / lo).powf(i as f64 / (points - 1) as f64))
        .collect();

    let rows: Vec<(f64, f64, f64)> = grid
        .par_iter()
        .map(|&my| {
            let y = my / m;
            let wt = kernels
                .iter()
                .map(|&k| transform(k, m, y).abs())
                .fold(0.0f64, f64::max);
            let wd = kernels
                .iter()
                .map(|&k| transform_deriv(k, m, y).abs())
                .fold(0.0f64, f64::max);
            let plain = wt / m;
            let smoothed = wt * (1.0 + my.sqrt() / q_eps).powi(2) / m;
            let deriv = y * wd / (m * (1.0 + my).sqrt());
            (plain, smoothed, deriv)
        })
        .collect();
    let mut plain_constant: f64 = 0.0;
    let mut smoothed_constant: f64 = 0.0;
    let mut derivative_constant: f64 = 0.0;
    for (p, s, d) in rows {
        plain_constant = plain_constant.max(p);
        smoothed_constant = smoothed_constant.max(s);
        derivative_constant = derivative_constant.max(d);
    }

    let far_tail_max = [16.0, 32.0, 64.0]
        .iter()
        .flat_map(|&t| {
            let y = t * q_eps.powi(3) / m;
            kernels.iter().map(move |&k| transform(k, m, y).abs())
        })
        .fold(0.0f64, f64::max);

    BesselDecayReport {
        window_scale: m,
        q_eps,
        plain_constant,
        smoothed_constant,
        derivative_constant,
        far_tail_max,
    }
}
