//! Averages of products L(f x chi, 1/2) L(chi-bar, 1/2)^2 over the
//! character group, organized exactly as the two-term functional
//! equation writes each summand: a truncated double sum against a
//! smooth completed-kernel weight, plus its reflection weighted by a
//! root number that depends only on the character's parity.

use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;
use std::sync::OnceLock;

use super::{divisor_table, l_delta, tau_normalized, CoefficientKind, ModformsError};
use crate::dirichlet::{epsilon_chi, DirichletCharacter, DirichletGroup, Parity};
use crate::special::{gamma, MellinKernel};

/// Out to this x the kernel is evaluated on a contour left of the
/// origin (picking up the residue 1); beyond it on a right contour.
const LEFT_CUT: f64 = 0.01;

fn ratio_mixed(sigma: Parity) -> impl Fn(Complex64) -> Complex64 {
    let shift = 0.5 + sigma.gamma_shift();
    let g0 = gamma(Complex64::new(shift / 2.0, 0.0));
    let ln_two_pi = (2.0 * PI).ln();
    let ln_pi = PI.ln();
    move |s: Complex64| {
        let arch = (-s * ln_two_pi).exp() * gamma(s + 6.0) / 120.0;
        let b = gamma((s + shift) / 2.0) / g0;
        arch * (-s * ln_pi).exp() * b * b
    }
}

fn mixed_kernels(sigma: Parity) -> &'static (MellinKernel, MellinKernel) {
    static EVEN: OnceLock<(MellinKernel, MellinKernel)> = OnceLock::new();
    static ODD: OnceLock<(MellinKernel, MellinKernel)> = OnceLock::new();
    let cell = match sigma {
        Parity::Even => &EVEN,
        Parity::Odd => &ODD,
    };
    cell.get_or_init(|| {
        (
            MellinKernel::new(2.0, false, ratio_mixed(sigma)),
            MellinKernel::new(-0.25, true, ratio_mixed(sigma)),
        )
    })
}

/// Completed-kernel weight for the cuspidal/Eisenstein pair: smooth,
/// 1 + O(x^{1/2 + shift}) near 0, decaying faster than any power.
pub fn v_mixed(x: f64, sigma: Parity) -> f64 {
    assert!(x > 0.0);
    let (right, left) = mixed_kernels(sigma);
    if x >= LEFT_CUT {
        right.eval(x)
    } else {
        left.eval(x)
    }
}

/// Same weight from a throwaway contour at Re s = sigma0 > 0; used to
/// confirm the cached contours.
pub fn v_mixed_on_line(x: f64, sigma: Parity, sigma0: f64) -> f64 {
    assert!(x > 0.0 && sigma0 > 0.0);
    MellinKernel::new(sigma0, false, ratio_mixed(sigma)).eval(x)
}

/// Root number of the twisted L-function for the discriminant form:
/// the square of the normalized Gauss sum (the form's own sign is +1).
pub fn twisted_root_number(
    f: CoefficientKind,
    chi: &DirichletCharacter<'_>,
) -> Result<Complex64, ModformsError> {
    assert!(
        f == CoefficientKind::TauNormalized,
        "twisted root numbers are wired for the discriminant form only"
    );
    let e = epsilon_chi(chi).map_err(|_| ModformsError::TrivialCharacter)?;
    Ok(e * e)
}

/// Sign relating the two halves of the functional equation for a
/// product L(f x chi, 1/2) L(g x chi-bar, 1/2): +1 for the
/// divisor/divisor pair, chi(-1) for the cuspidal/divisor pair.
pub fn pair_root_number(
    f: CoefficientKind,
    g: CoefficientKind,
    chi: &DirichletCharacter<'_>,
) -> Result<f64, ModformsError> {
    if chi.is_trivial() {
        return Err(ModformsError::TrivialCharacter);
    }
    match (f, g) {
        (CoefficientKind::Divisor, CoefficientKind::Divisor) => Ok(1.0),
        (CoefficientKind::TauNormalized, CoefficientKind::Divisor) => Ok(chi.parity().sign()),
        _ => Err(ModformsError::UnsupportedPair { f, g }),
    }
}

/// One parity class's share of the mixed moment: for each non-trivial
/// character of parity sigma, the functional-equation form of
/// L(f x chi, 1/2) L(chi-bar, 1/2)^2 truncated at mn <= cutoff_x q^2,
/// averaged with weight 1/(q-2).
///
/// The double sum is reorganized by residue classes: one real matrix
/// A[r][r'] = sum over m = r, n = r' of lambda(m) d(n) V(mn/q^2) /
/// sqrt(mn) serves every character, and each character pays only a
/// q^2 contraction. The reflected term needs no second matrix: with A
/// real it is the parity sign times the conjugate contraction.
pub fn mixed_moment_parity_part(q: u64, cutoff_x: f64, sigma: Parity) -> Complex64 {
    assert!((5..=61).contains(&q), "modulus out of the supported range");
    assert!(cutoff_x >= 1.0);
    let group = DirichletGroup::new(q).expect("prime modulus");
    let qf = q as f64;
    let k_max = (cutoff_x * qf * qf).floor() as usize;

    let lam = tau_normalized(k_max);
    let div = divisor_table(k_max);
    let weights: Vec<f64> = (1..=k_max)
        .into_par_iter()
        .map(|k| v_mixed(k as f64 / (qf * qf), sigma))
        .collect();

    let qs = q as usize;
    let mut class = vec![0.0f64; qs * qs];
    for m in 1..=k_max {
        if m % qs == 0 {
            continue;
        }
        let lm = lam[m - 1];
        if lm == 0.0 {
            continue;
        }
        let row = (m % qs) * qs;
        let mf = m as f64;
        for n in 1..=k_max / m {
            if n % qs == 0 {
                continue;
            }
            class[row + n % qs] +=
                lm * div[n - 1] * weights[m * n - 1] / (mf * n as f64).sqrt();
        }
    }

    let mut sum = Complex64::new(0.0, 0.0);
    for chi in group.characters() {
        if chi.is_trivial() || chi.parity() != sigma {
            continue;
        }
        let mut t1 = Complex64::new(0.0, 0.0);
        for r in 1..qs {
            let mut row_sum = Complex64::new(0.0, 0.0);
            for rp in 1..qs {
                row_sum += chi.eval(rp as u64).conj() * class[r * qs + rp];
            }
            t1 += chi.eval(r as u64) * row_sum;
        }
        sum += t1 + sigma.sign() * t1.conj();
    }
    sum / (q - 2) as f64
}

/// The mixed moment against its predicted main term.
#[derive(Debug, Clone, Copy)]
pub struct MixedMoment {
    pub value: f64,
    pub main_term: f64,
    pub ratio: f64,
}

/// Average of L(f x chi, 1/2) L(chi-bar, 1/2)^2 over all non-trivial
/// characters mod q, with the cuspidal coefficients on the f side. The
/// main term is L(f, 1)^2 / zeta(2); the ratio is reported without any
/// claim about its distance from 1, which shrinks too slowly to pin
/// down at these moduli.
pub fn mixed_moment(q: u64, cutoff_x: f64) -> MixedMoment {
    let total = mixed_moment_parity_part(q, cutoff_x, Parity::Even)
        + mixed_moment_parity_part(q, cutoff_x, Parity::Odd);
    assert!(
        total.im.abs() < 1e-6,
        "character average failed to close into a real value: {total}"
    );
    let l1 = l_delta(Complex64::new(1.0, 0.0)).re;
    let main_term = l1 * l1 / (PI * PI / 6.0);
    MixedMoment {
        value: total.re,
        main_term,
        ratio: total.re / main_term,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn root_numbers_have_unit_modulus_and_pair_to_one() {
        let group = DirichletGroup::new(101).unwrap();
        for j in [1u64, 2, 5, 50, 99] {
            let chi = group.character(j);
            let e = twisted_root_number(CoefficientKind::TauNormalized, &chi).unwrap();
            assert!((e.norm() - 1.0).abs() < 1e-9);
            let ebar =
                twisted_root_number(CoefficientKind::TauNormalized, &chi.conjugate()).unwrap();
            assert!((e * ebar - 1.0).norm() < 1e-9);
        }
        let trivial = group.character(0);
        assert!(matches!(
            twisted_root_number(CoefficientKind::TauNormalized, &trivial),
            Err(ModformsError::TrivialCharacter)
        ));
    }

    #[test]
    fn pair_signs_match_parity() {
        let group = DirichletGroup::new(13).unwrap();
        for j in 1..12 {
            let chi = group.character(j);
            assert_eq!(
                pair_root_number(CoefficientKind::Divisor, CoefficientKind::Divisor, &chi)
                    .unwrap(),
                1.0
            );
            let s = pair_root_number(
                CoefficientKind::TauNormalized,
                CoefficientKind::Divisor,
                &chi,
            )
            .unwrap();
            assert!((s - chi.eval(12).re).abs() < 1e-12);
        }
        let chi = group.character(1);
        assert!(matches!(
            pair_root_number(CoefficientKind::Divisor, CoefficientKind::TauNormalized, &chi),
            Err(ModformsError::UnsupportedPair { .. })
        ));
        assert!(matches!(
            pair_root_number(CoefficientKind::Divisor, CoefficientKind::Divisor, &group.character(0)),
            Err(ModformsError::TrivialCharacter)
        ));
    }

    #[test]
    fn weight_limits_and_contour_independence() {
        let dev_odd = (v_mixed(1e-8, Parity::Odd) - 1.0).abs();
        assert!(dev_odd < 1e-3, "odd deviation {dev_odd}");
        let dev_even = (v_mixed(1e-8, Parity::Even) - 1.0).abs();
        assert!(
            dev_even > 1e-6 && dev_even < 0.1,
            "even deviation {dev_even}"
        );
        for sigma in Parity::BOTH {
            let a = v_mixed(1.0, sigma);
            let b = v_mixed_on_line(1.0, sigma, 3.0);
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
            let c = v_mixed(0.009, sigma);
            let d = v_mixed_on_line(0.009, sigma, 2.0);
            assert!((c - d).abs() < 1e-9, "{c} vs {d}");
            assert!(v_mixed(1e4, sigma).abs() < 1e-8);
        }
    }

    #[test]
    fn opposite_parity_class_cancels() {
        let odd = mixed_moment_parity_part(13, 40.0, Parity::Odd);
        assert!(odd.norm() < 1e-8, "odd part {odd}");
        let even = mixed_moment_parity_part(13, 40.0, Parity::Even);
        assert!(even.im.abs() < 1e-10);
        assert!(even.norm() > 1e-4);
    }

    #[test]
    fn moment_is_real_and_cutoff_stable() {
        let a = mixed_moment(31, 80.0);
        let b = mixed_moment(31, 120.0);
        assert!((a.value - b.value).abs() < 1e-4, "{} vs {}", a.value, b.value);
        assert!(a.main_term > 0.0);
        assert!(a.ratio.is_finite());
    }
}
