//! Exact two-phase simplex over arbitrary-precision rationals.
//!
//! Small dense tableaus only: the branch-enumeration leaves upstream
//! have a few dozen rows and columns. Bland's rule everywhere, so the
//! iteration terminates without any perturbation tricks.

use num_rational::BigRational;
use num_traits::{One, Zero};

pub(crate) type Rat = BigRational;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

/// maximize objective . x subject to coeffs . x REL rhs per row, with
/// every coordinate of x free (unrestricted in sign).
#[derive(Debug, Clone)]
pub(crate) struct LinearProgram {
    pub cols: usize,
    pub objective: Vec<Rat>,
    pub rows: Vec<(Vec<Rat>, Relation, Rat)>,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum LpOutcome {
    Optimal { value: Rat, point: Vec<Rat> },
    Infeasible,
    Unbounded,
}

enum RunEnd {
    Optimal,
    Unbounded,
}

/// Dense tableau in (z - c) form: the objective row stores reduced
/// costs and its right-hand entry the current objective value, so a
/// column may enter while its entry is negative and optimality is
/// reached when none is.
struct Tableau {
    width: usize,
    rows: Vec<Vec<Rat>>,
    obj: Vec<Rat>,
    basis: Vec<usize>,
    enter_limit: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, e: usize) {
        let scale = self.rows[r][e].clone();
        for x in self.rows[r].iter_mut() {
            *x /= &scale;
        }
        let pivot_row = self.rows[r].clone();
        for i in 0..self.rows.len() {
            if i == r {
                continue;
            }
            let f = self.rows[i][e].clone();
            if !f.is_zero() {
                for (x, p) in self.rows[i].iter_mut().zip(&pivot_row) {
                    *x -= &f * p;
                }
            }
        }
        let f = self.obj[e].clone();
        if !f.is_zero() {
            for (x, p) in self.obj.iter_mut().zip(&pivot_row) {
                *x -= &f * p;
            }
        }
        self.basis[r] = e;
    }

    fn run(&mut self) -> RunEnd {
        loop {
            let entering = (0..self.enter_limit).find(|&j| self.obj[j] < Rat::zero());
            let e = match entering {
                Some(e) => e,
                None => return RunEnd::Optimal,
            };
            let mut leave: Option<usize> = None;
            for i in 0..self.rows.len() {
                if self.rows[i][e] <= Rat::zero() {
                    continue;
                }
                let better = match leave {
                    None => true,
                    Some(l) => {
                        let cur = &self.rows[i][self.width] / &self.rows[i][e];
                        let old = &self.rows[l][self.width] / &self.rows[l][e];
                        cur < old || (cur == old && self.basis[i] < self.basis[l])
                    }
                };
                if better {
                    leave = Some(i);
                }
            }
            match leave {
                Some(r) => self.pivot(r, e),
                None => return RunEnd::Unbounded,
            }
        }
    }
}

pub(crate) fn solve(lp: &LinearProgram) -> LpOutcome {
    let n = lp.cols;
    let split = 2 * n;
    let m = lp.rows.len();

    // normalize right-hand sides to be nonnegative
    let mut norm: Vec<(Vec<Rat>, Relation, Rat)> = Vec::with_capacity(m);
    for (a, rel, b) in &lp.rows {
        if *b < Rat::zero() {
            let flipped = match rel {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
            norm.push((a.iter().map(|x| -x).collect(), flipped, -b));
        } else {
            norm.push((a.clone(), *rel, b.clone()));
        }
    }

    let slacks = norm
        .iter()
        .filter(|(_, rel, _)| *rel != Relation::Eq)
        .count();
    let artificials = norm
        .iter()
        .filter(|(_, rel, _)| *rel != Relation::Le)
        .count();
    let width = split + slacks + artificials;

    let mut rows = vec![vec![Rat::zero(); width + 1]; m];
    let mut basis = vec![0usize; m];
    let mut slack_at = split;
    let mut art_at = split + slacks;
    for (i, (a, rel, b)) in norm.iter().enumerate() {
        for j in 0..n {
            rows[i][2 * j] = a[j].clone();
            rows[i][2 * j + 1] = -&a[j];
        }
        rows[i][width] = b.clone();
        match rel {
            Relation::Le => {
                rows[i][slack_at] = Rat::one();
                basis[i] = slack_at;
                slack_at += 1;
            }
            Relation::Ge => {
                rows[i][slack_at] = -Rat::one();
                slack_at += 1;
                rows[i][art_at] = Rat::one();
                basis[i] = art_at;
                art_at += 1;
            }
            Relation::Eq => {
                rows[i][art_at] = Rat::one();
                basis[i] = art_at;
                art_at += 1;
            }
        }
    }

    let mut t = Tableau {
        width,
        rows,
        obj: vec![Rat::zero(); width + 1],
        basis,
        enter_limit: width,
    };

    if artificials > 0 {
        // phase 1: maximize minus the artificial sum, i.e. (z - c) has
        // +1 at each artificial column before the basis is cleaned out
        for j in (split + slacks)..width {
            t.obj[j] = Rat::one();
        }
        for i in 0..m {
            if t.basis[i] >= split + slacks {
                let row = t.rows[i].clone();
                for (x, p) in t.obj.iter_mut().zip(&row) {
                    *x -= p;
                }
            }
        }
        match t.run() {
            RunEnd::Unbounded => unreachable!("phase-1 objective is bounded by zero"),
            RunEnd::Optimal => {}
        }
        if !t.obj[t.width].is_zero() {
            return LpOutcome::Infeasible;
        }
        // drive any residual artificial out of the basis
        for i in 0..m {
            if t.basis[i] >= split + slacks {
                if let Some(e) = (0..split + slacks).find(|&j| !t.rows[i][j].is_zero()) {
                    t.pivot(i, e);
                }
            }
        }
        t.enter_limit = split + slacks;
    }

    // phase 2: install the real objective and re-reduce basic columns
    for x in t.obj.iter_mut() {
        *x = Rat::zero();
    }
    for j in 0..n {
        t.obj[2 * j] = -&lp.objective[j];
        t.obj[2 * j + 1] = lp.objective[j].clone();
    }
    for i in 0..m {
        // a redundant row can keep a zero-valued artificial basic; its
        // column never re-enters, and its objective entry stays zero
        if t.basis[i] >= split + slacks {
            continue;
        }
        let f = t.obj[t.basis[i]].clone();
        if !f.is_zero() {
            let row = t.rows[i].clone();
            for (x, p) in t.obj.iter_mut().zip(&row) {
                *x -= &f * p;
            }
        }
    }
    match t.run() {
        RunEnd::Unbounded => return LpOutcome::Unbounded,
        RunEnd::Optimal => {}
    }

    let mut cols = vec![Rat::zero(); width];
    for i in 0..m {
        cols[t.basis[i]] = t.rows[i][t.width].clone();
    }
    let point: Vec<Rat> = (0..n).map(|j| &cols[2 * j] - &cols[2 * j + 1]).collect();
    let value = lp
        .objective
        .iter()
        .zip(&point)
        .map(|(c, x)| c * x)
        .fold(Rat::zero(), |acc, v| acc + v);
    LpOutcome::Optimal { value, point }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::str::FromStr;

    fn r(s: &str) -> Rat {
        Rat::from_str(s).unwrap()
    }

    fn row(coeffs: &[&str], rel: Relation, rhs: &str) -> (Vec<Rat>, Relation, Rat) {
        (coeffs.iter().map(|c| r(c)).collect(), rel, r(rhs))
    }

    #[test]
    fn bounded_one_variable() {
        let lp = LinearProgram {
            cols: 1,
            objective: vec![r("1")],
            rows: vec![row(&["1"], Relation::Le, "3")],
        };
        match solve(&lp) {
            LpOutcome::Optimal { value, point } => {
                assert_eq!(value, r("3"));
                assert_eq!(point[0], r("3"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn negative_optimum_through_phase_one() {
        let lp = LinearProgram {
            cols: 1,
            objective: vec![r("1")],
            rows: vec![row(&["1"], Relation::Le, "-5")],
        };
        match solve(&lp) {
            LpOutcome::Optimal { value, .. } => assert_eq!(value, r("-5")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn infeasible_band() {
        let lp = LinearProgram {
            cols: 1,
            objective: vec![r("1")],
            rows: vec![
                row(&["1"], Relation::Le, "-1"),
                row(&["1"], Relation::Ge, "1"),
            ],
        };
        assert_eq!(solve(&lp), LpOutcome::Infeasible);
    }

    #[test]
    fn unbounded_ray() {
        let lp = LinearProgram {
            cols: 1,
            objective: vec![r("1")],
            rows: vec![row(&["1"], Relation::Ge, "0")],
        };
        assert_eq!(solve(&lp), LpOutcome::Unbounded);
    }

    #[test]
    fn equality_and_two_variables() {
        // maximize x + 2y with x = y and x + y <= 4
        let lp = LinearProgram {
            cols: 2,
            objective: vec![r("1"), r("2")],
            rows: vec![
                row(&["1", "-1"], Relation::Eq, "0"),
                row(&["1", "1"], Relation::Le, "4"),
            ],
        };
        match solve(&lp) {
            LpOutcome::Optimal { value, point } => {
                assert_eq!(value, r("6"));
                assert_eq!(point, vec![r("2"), r("2")]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn fractional_vertex() {
        // maximize v with v <= x, v <= 1 - x: optimum 1/2
        let lp = LinearProgram {
            cols: 2,
            objective: vec![r("0"), r("1")],
            rows: vec![
                row(&["-1", "1"], Relation::Le, "0"),
                row(&["1", "1"], Relation::Le, "1"),
                row(&["1", "0"], Relation::Ge, "0"),
                row(&["1", "0"], Relation::Le, "1"),
            ],
        };
        match solve(&lp) {
            LpOutcome::Optimal { value, point } => {
                assert_eq!(value, r("1/2"));
                assert_eq!(point[0], r("1/2"));
            }
            other => panic!("{other:?}"),
        }
    }
}
