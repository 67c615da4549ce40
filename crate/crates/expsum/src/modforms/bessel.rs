//! Bessel functions J_k, Y_0, Y_1, K_0, K_1 to absolute accuracy around
//! 1e-12, and the dual-sum kernels built from them.
//!
//! Each function switches between a power series near the origin and either
//! backward recurrence (J of moderate argument) or the Hankel-type
//! asymptotic expansion far out. Crossovers sit where both methods carry
//! comfortably more than the target accuracy, and the overlap is unit-tested.

use crate::special::EULER_GAMMA;

const PI: f64 = std::f64::consts::PI;

/// J_k(x) for integer k >= 0, x >= 0, absolute error well under 1e-9.
pub fn bessel_j(k: u32, x: f64) -> f64 {
    assert!(k <= 64, "order out of the supported range");
    assert!(x >= 0.0);
    if x == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if x <= 12.0 {
        j_series(k, x)
    } else if x <= 400.0 {
        j_miller(k, x)
    } else {
        jy_hankel(k, x).0
    }
}

/// Y_0(x) for x > 0.
pub fn bessel_y0(x: f64) -> f64 {
    assert!(x > 0.0);
    if x <= 14.0 {
        y_series(0, x)
    } else {
        jy_hankel(0, x).1
    }
}

/// Y_1(x) for x > 0.
pub fn bessel_y1(x: f64) -> f64 {
    assert!(x > 0.0);
    if x <= 14.0 {
        y_series(1, x)
    } else {
        jy_hankel(1, x).1
    }
}

/// K_0(x) for x > 0. The ascending series loses digits like e^{2x}, so it
/// hands over to the asymptotic expansion early.
pub fn bessel_k0(x: f64) -> f64 {
    assert!(x > 0.0);
    if x <= 11.0 {
        k_series(0, x)
    } else {
        k_asymptotic(0, x)
    }
}

/// K_1(x) for x > 0.
pub fn bessel_k1(x: f64) -> f64 {
    assert!(x > 0.0);
    if x <= 11.0 {
        k_series(1, x)
    } else {
        k_asymptotic(1, x)
    }
}

fn j_series(k: u32, x: f64) -> f64 {
    let half = 0.5 * x;
    let mut term = 1.0;
    for m in 1..=k {
        term *= half / m as f64;
    }
    let mut sum = term;
    let x2 = half * half;
    for m in 1..200 {
        term *= -x2 / (m as f64 * (m + k) as f64);
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-30) {
            break;
        }
    }
    sum
}

/// Backward (Miller) recurrence normalized by J_0 + 2 J_2 + 2 J_4 + ... = 1.
fn j_miller(k: u32, x: f64) -> f64 {
    let start = (x + 9.0 * x.cbrt() * 4.0 + 40.0).ceil() as i64;
    let start = start.max(k as i64 + 20);
    let mut fp = 0.0f64; // J_{m+1} (unnormalized)
    let mut f = 1e-300f64; // J_m
    let mut norm = 0.0f64;
    let mut captured = 0.0f64;
    for m in (0..=start).rev() {
        let fm = (2.0 * (m + 1) as f64 / x) * f - fp;
        fp = f;
        f = fm;
        // f now holds the unnormalized J_m.
        if m as u32 == k {
            captured = f;
        }
        if m % 2 == 0 {
            norm += if m == 0 { f } else { 2.0 * f };
        }
        if f.abs() > 1e250 {
            f *= 1e-250;
            fp *= 1e-250;
            norm *= 1e-250;
            captured *= 1e-250;
        }
    }
    captured / norm
}

/// Hankel asymptotic expansion; returns (J_k(x), Y_k(x)). Only safe when
/// the expansion parameter (4k^2 vs 8x) is small; callers keep x > 400 for
/// k up to 12, or x > 16 for k <= 1.
fn jy_hankel(k: u32, x: f64) -> (f64, f64) {
    let mu = 4.0 * (k as f64) * (k as f64);
    let mut p = 0.0;
    let mut q = 0.0;
    let mut b = 1.0f64;
    let mut prev = f64::INFINITY;
    for m in 0..60u32 {
        if m > 0 {
            let j = 2.0 * m as f64 - 1.0;
            b *= (mu - j * j) / (m as f64 * 8.0 * x);
        }
        if b.abs() > prev {
            break; // asymptotic tail started growing
        }
        prev = b.abs();
        match m % 4 {
            0 => p += b,
            1 => q += b,
            2 => p -= b,
            _ => q -= b,
        }
        if b.abs() < 1e-18 {
            break;
        }
    }
    let chi = x - (0.5 * k as f64 + 0.25) * PI;
    let (s, c) = chi.sin_cos();
    let amp = (2.0 / (PI * x)).sqrt();
    (amp * (p * c - q * s), amp * (p * s + q * c))
}

/// Series for Y_0 / Y_1 on x <= 16, combining the logarithmic term with the
/// psi-weighted ascending series.
fn y_series(n: u32, x: f64) -> f64 {
    let lg = (0.5 * x).ln();
    let x2 = 0.25 * x * x;
    match n {
        0 => {
            // Y_0 = (2/pi) [(ln(x/2) + gamma) J_0 + sum_{m>=1} (-1)^{m+1} H_m (x^2/4)^m / (m!)^2]
            let mut term = 1.0f64;
            let mut h = 0.0f64;
            let mut sum = 0.0f64;
            for m in 1..300 {
                term *= x2 / ((m * m) as f64);
                h += 1.0 / m as f64;
                let contrib = if m % 2 == 1 { term * h } else { -term * h };
                sum += contrib;
                if term * h < 1e-19 * sum.abs().max(1.0) {
                    break;
                }
            }
            (2.0 / PI) * ((lg + EULER_GAMMA) * j_series(0, x) + sum)
        }
        1 => {
            // A&S 9.1.11 with n = 1:
            // Y_1 = -(2/(pi x)) + (2/pi) ln(x/2) J_1
            //       - (x/(2 pi)) sum_{m>=0} (psi(m+1)+psi(m+2)) (-x^2/4)^m / (m!(m+1)!)
            let mut term = 1.0f64; // (x^2/4)^m / (m! (m+1)!)
            let mut sum = 0.0f64;
            let mut h1 = 0.0f64; // H_m
            let mut h2 = 1.0f64; // H_{m+1}
            for m in 0..300 {
                if m > 0 {
                    term *= x2 / ((m * (m + 1)) as f64);
                    h1 += 1.0 / m as f64;
                    h2 += 1.0 / (m + 1) as f64;
                }
                let psi_sum = -2.0 * EULER_GAMMA + h1 + h2;
                let signed = if m % 2 == 0 { term } else { -term };
                sum += signed * psi_sum;
                if term * (h1 + h2 + 2.0) < 1e-19 * sum.abs().max(1.0) {
                    break;
                }
            }
            -(2.0 / (PI * x)) + (2.0 / PI) * lg * j_series(1, x) - (x / (2.0 * PI)) * sum
        }
        _ => unreachable!(),
    }
}

/// Series for K_0 / K_1 on x <= 16.
fn k_series(n: u32, x: f64) -> f64 {
    let lg = (0.5 * x).ln();
    let x2 = 0.25 * x * x;
    match n {
        0 => {
            // K_0 = -(ln(x/2) + gamma) I_0 + sum_{m>=1} H_m (x^2/4)^m / (m!)^2
            let mut term = 1.0f64;
            let mut i0 = 1.0f64;
            let mut h = 0.0f64;
            let mut sum = 0.0f64;
            for m in 1..400 {
                term *= x2 / ((m * m) as f64);
                i0 += term;
                h += 1.0 / m as f64;
                sum += term * h;
                if term * h < 1e-19 * sum.max(1.0) {
                    break;
                }
            }
            -(lg + EULER_GAMMA) * i0 + sum
        }
        1 => {
            // A&S 9.6.11 with n = 1:
            // K_1 = 1/x + ln(x/2) I_1 - (x/4) sum_{m>=0} (psi(m+1)+psi(m+2)) (x^2/4)^m / (m!(m+1)!)
            let mut term = 1.0f64;
            let mut i1 = 0.5 * x; // running I_1 = (x/2) sum (x^2/4)^m/(m!(m+1)!)
            let mut sum;
            let mut h1 = 0.0f64;
            let mut h2 = 1.0f64;
            sum = -2.0 * EULER_GAMMA + 1.0; // m = 0 contribution of psi-sum
            for m in 1..400 {
                term *= x2 / ((m * (m + 1)) as f64);
                i1 += 0.5 * x * term;
                h1 += 1.0 / m as f64;
                h2 += 1.0 / (m + 1) as f64;
                sum += term * (-2.0 * EULER_GAMMA + h1 + h2);
                if term * (h1 + h2 + 2.0) < 1e-19 * sum.abs().max(1.0) {
                    break;
                }
            }
            1.0 / x + lg * i1 - 0.25 * x * sum
        }
        _ => unreachable!(),
    }
}

/// K_n(x) ~ sqrt(pi/2x) e^{-x} [1 + (mu-1)/(8x) + ...] for x > 16.
fn k_asymptotic(n: u32, x: f64) -> f64 {
    let mu = 4.0 * (n as f64) * (n as f64);
    let mut b = 1.0f64;
    let mut sum = 1.0f64;
    let mut prev = f64::INFINITY;
    for m in 1..60u32 {
        let j = 2.0 * m as f64 - 1.0;
        b *= (mu - j * j) / (m as f64 * 8.0 * x);
        if b.abs() > prev {
            break;
        }
        prev = b.abs();
        sum += b;
        if b.abs() < 1e-18 {
            break;
        }
    }
    (PI / (2.0 * x)).sqrt() * (-x).exp() * sum
}

/// The kernel pair entering the dual side of the summation formula: a
/// holomorphic weight-k kernel carries 2 pi i^k J_{k-1} and no decaying
/// part, the divisor kernel carries -2 pi Y_0 alongside 4 K_0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BesselKernel {
    /// 2 pi i^k J_{k-1}; k must be even so the kernel is real.
    JWeight(u32),
    /// -2 pi Y_0.
    YPair,
    /// 4 K_0.
    KPair,
}

impl BesselKernel {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            BesselKernel::JWeight(k) => {
                assert!(k >= 2 && k % 2 == 0);
                let sign = if k % 4 == 0 { 1.0 } else { -1.0 };
                2.0 * PI * sign * bessel_j(k - 1, x)
            }
            BesselKernel::YPair => -2.0 * PI * bessel_y0(x),
            BesselKernel::KPair => 4.0 * bessel_k0(x),
        }
    }

    /// d/dx of `eval`, via B_0' = -B_1 and J_m' = (J_{m-1} - J_{m+1})/2.
    pub fn deriv(self, x: f64) -> f64 {
        match self {
            BesselKernel::JWeight(k) => {
                assert!(k >= 2 && k % 2 == 0);
                let sign = if k % 4 == 0 { 1.0 } else { -1.0 };
                PI * sign * (bessel_j(k - 2, x) - bessel_j(k, x))
            }
            BesselKernel::YPair => 2.0 * PI * bessel_y1(x),
            BesselKernel::KPair => -4.0 * bessel_k1(x),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::integrate;

    #[test]
    fn reference_values_small_orders() {
        let cases = [
            (bessel_j(0, 1.0), 0.765_197_686_557_966_6),
            (bessel_j(1, 1.0), 0.440_050_585_744_933_5),
            (bessel_j(0, 2.0), 0.223_890_779_141_235_67),
            (bessel_j(2, 5.0), 0.046_565_116_277_752_22),
            (bessel_y0(1.0), 0.088_256_964_215_676_96),
            (bessel_y0(2.0), 0.510_375_672_649_745_1),
            (bessel_y1(1.0), -0.781_212_821_300_288_7),
            (bessel_k0(1.0), 0.421_024_438_240_708_34),
            (bessel_k0(2.0), 0.113_893_872_749_533_44),
            (bessel_k1(1.0), 0.601_907_230_197_234_6),
        ];
        for (got, want) in cases {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn j_zero_limit_at_origin() {
        assert_eq!(bessel_j(0, 0.0), 1.0);
        assert_eq!(bessel_j(3, 0.0), 0.0);
        assert!((bessel_j(0, 1e-9) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn j_recurrence_residual_on_grid() {
        // J_{k-1}(x) + J_{k+1}(x) = (2k/x) J_k(x) across all three methods.
        for k in 1..=12u32 {
            let mut x = 0.6;
            while x < 1500.0 {
                let res = bessel_j(k - 1, x) + bessel_j(k + 1, x)
                    - (2.0 * k as f64 / x) * bessel_j(k, x);
                assert!(res.abs() < 1e-8, "k={k}, x={x}: residual {res}");
                x *= 1.37;
            }
        }
    }

    #[test]
    fn method_overlap_windows_agree() {
        for k in [0u32, 5, 11, 12] {
            for &x in &[11.0, 11.5, 12.0, 12.5, 13.5] {
                let a = j_series(k, x);
                let b = j_miller(k, x);
                assert!((a - b).abs() < 1e-9, "J_{k}({x}): series {a} miller {b}");
            }
            for &x in &[380.0, 400.0, 420.0] {
                let a = j_miller(k, x);
                let b = jy_hankel(k, x).0;
                assert!((a - b).abs() < 1e-9, "J_{k}({x}): miller {a} hankel {b}");
            }
        }
        for n in [0u32, 1] {
            for &x in &[13.0, 14.0, 15.0] {
                let ys = y_series(n, x);
                let yh = jy_hankel(n, x).1;
                assert!((ys - yh).abs() < 1e-9, "Y_{n}({x}): {ys} vs {yh}");
            }
            for &x in &[10.0, 11.0, 12.0] {
                let ks = k_series(n, x);
                let ka = k_asymptotic(n, x);
                assert!((ks - ka).abs() < 5e-11, "K_{n}({x}): {ks} vs {ka}");
            }
        }
    }

    #[test]
    fn k0_matches_integral_representation() {
        // K_0(x) = int_0^inf exp(-x cosh t) dt; the integrand is below
        // 1e-30 past t = 5 for x = 5.
        let oracle = integrate(|t: f64| (-5.0 * t.cosh()).exp(), 0.0, 6.0, 1e-13);
        let got = bessel_k0(5.0);
        assert!((got - oracle).abs() < 1e-10, "{got} vs {oracle}");
    }

    #[test]
    fn k1_matches_integral_representation() {
        // K_1(x) = int_0^inf exp(-x cosh t) cosh t dt.
        let oracle = integrate(|t: f64| (-3.0 * t.cosh()).exp() * t.cosh(), 0.0, 7.0, 1e-13);
        let got = bessel_k1(3.0);
        assert!((got - oracle).abs() < 1e-10, "{got} vs {oracle}");
    }

    #[test]
    fn wronskian_identity() {
        // J_{n+1}(x) Y_n(x) - J_n(x) Y_{n+1}(x) = 2/(pi x), exercised for
        // n = 0 across both Y methods.
        let mut x = 0.8;
        while x < 200.0 {
            let w = bessel_j(1, x) * bessel_y0(x) - bessel_j(0, x) * bessel_y1(x);
            let want = 2.0 / (PI * x);
            assert!((w - want).abs() < 1e-10, "x={x}: {w} vs {want}");
            x *= 1.9;
        }
    }

    #[test]
    fn decaying_kernel_envelope() {
        // |4 K_0(x)| <= C x^{-1/2} e^{-x} for x >= 1 with C barely above
        // 4 sqrt(pi/2) = 5.013, approached as x grows.
        let mut worst = 0.0f64;
        let mut x = 1.0;
        while x < 60.0 {
            let ratio = BesselKernel::KPair.eval(x) * x.sqrt() * x.exp();
            worst = worst.max(ratio);
            x += 0.25;
        }
        assert!(worst <= 5.6, "envelope constant {worst}");
        assert!(worst >= 4.0 * (PI / 2.0).sqrt() * 0.99);
    }

    #[test]
    fn kernel_derivatives_match_difference_quotients() {
        let kernels = [BesselKernel::JWeight(12), BesselKernel::YPair, BesselKernel::KPair];
        for ker in kernels {
            for &x in &[0.8, 3.0, 9.0, 30.0] {
                let h = 1e-5;
                let numeric = (ker.eval(x + h) - ker.eval(x - h)) / (2.0 * h);
                let got = ker.deriv(x);
                assert!(
                    (numeric - got).abs() < 1e-6 * (1.0 + got.abs()),
                    "{ker:?} at {x}: {got} vs {numeric}"
                );
            }
        }
    }

    #[test]
    fn weight_twelve_kernel_sign() {
        // i^12 = 1, so the weight-12 kernel is +2 pi J_11; a weight-10
        // kernel would flip sign through i^10 = -1.
        let x = 7.0;
        assert!((BesselKernel::JWeight(12).eval(x) - 2.0 * PI * bessel_j(11, x)).abs() < 1e-12);
        assert!((BesselKernel::JWeight(10).eval(x) + 2.0 * PI * bessel_j(9, x)).abs() < 1e-12);
    }
}
