//! The modular-forms side of the workbench: exact discriminant-form
//! coefficients, Bessel kernels, dual-sum identities, and central
//! values built from them.

use std::fmt;

pub mod bessel;
pub mod ldelta;
pub mod moment;
pub mod tau;
pub mod voronoi;

pub use bessel::BesselKernel;
pub use ldelta::{l_delta, l_delta_completed};
pub use moment::{
    mixed_moment, mixed_moment_parity_part, pair_root_number, twisted_root_number, v_mixed,
    MixedMoment,
};
pub use tau::{tau_normalized, tau_table};
pub use voronoi::{bessel_transform_decay_check, voronoi_check, BesselDecayReport, VoronoiCheck};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModformsError {
    /// The additive twist e(an/c) needs gcd(a, c) = 1.
    NotCoprime { a: u64, c: u64 },
    /// Root numbers are only defined for non-trivial characters.
    TrivialCharacter,
    /// The requested coefficient pair has no implemented functional
    /// equation.
    UnsupportedPair {
        f: CoefficientKind,
        g: CoefficientKind,
    },
}

impl fmt::Display for ModformsError {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModformsError::NotCoprime { a, c } => {
                write!(out, "twist {a}/{c} needs gcd(a, c) = 1")
            }
            ModformsError::TrivialCharacter => {
                write!(out, "the trivial character has no root number")
            }
            ModformsError::UnsupportedPair { f, g } => {
                write!(out, "no functional equation wired for the pair {f:?}/{g:?}")
            }
        }
    }
}

impl std::error::Error for ModformsError {}

/// The two coefficient systems every experiment runs on: the divisor
/// function, and the Deligne-normalized discriminant coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoefficientKind {
    Divisor,
    TauNormalized,
}

/// A realized coefficient table lambda(1..=limit) for one kind.
#[derive(Debug, Clone)]
pub struct HeckeCoefficients {
    kind: CoefficientKind,
    values: Vec<f64>,
}

impl HeckeCoefficients {
    pub fn new(kind: CoefficientKind, limit: usize) -> Self {
        assert!(limit >= 1);
        let values = match kind {
            CoefficientKind::Divisor => divisor_table(limit),
            CoefficientKind::TauNormalized => tau_normalized(limit),
        };
        HeckeCoefficients { kind, values }
    }

    pub fn kind(&self) -> CoefficientKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// lambda(n), 1-indexed.
    pub fn get(&self, n: usize) -> f64 {
        self.values[n - 1]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}

/// d(1..=limit) by sieve.
pub fn divisor_table(limit: usize) -> Vec<f64> {
    let mut d = vec![0.0f64; limit];
    for m in 1..=limit {
        let mut k = m;
        while k <= limit {
            d[k - 1] += 1.0;
            k += m;
        }
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn divisor_sieve_matches_definition() {
        let d = divisor_table(60);
        let direct = |n: usize| (1..=n).filter(|k| n % k == 0).count() as f64;
        for n in 1..=60 {
            assert_eq!(d[n - 1], direct(n));
        }
    }

    #[test]
    fn coefficient_tables_expose_both_kinds() {
        let d = HeckeCoefficients::new(CoefficientKind::Divisor, 30);
        assert_eq!(d.get(12), 6.0);
        let t = HeckeCoefficients::new(CoefficientKind::TauNormalized, 30);
        assert!((t.get(1) - 1.0).abs() < 1e-15);
        for n in 1..=30 {
            assert!(t.get(n).abs() <= d.get(n) + 1e-12);
        }
    }
}
