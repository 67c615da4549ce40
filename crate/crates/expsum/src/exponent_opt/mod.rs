//! Exact optimization of piecewise-linear max-min programs.
//!
//! A program maximizes `min(t1, ..., tk)` over a polyhedron, where each
//! term is built from affine forms in named variables using `max`,
//! `min` and guarded branches `if(g <= 0, then, fallback)`. All
//! arithmetic is arbitrary-precision rational, so optima and argmaxes
//! come out exact; there is no floating point anywhere in the pipeline.
//!
//! [`maximize`] resolves each term into a disjunction of linear bound
//! systems: a `max` contributes one alternative per child, a `min`
//! bounds through all children at once, and a guard splits into its two
//! sides. Both sides of a guard are taken closed, so a point on the
//! boundary may use whichever branch is better; certificates record the
//! branch actually used. One exact LP is solved per combination and the
//! best leaf wins. Since the union of the leaf regions covers the
//! feasible set, the best leaf value is the true optimum.
//!
//! The text format is described in the parser module docs; see
//! [`parse_program`].

mod parse;
mod simplex;

pub use parse::{parse_program, ParseError};
pub use simplex::Relation;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::Zero;
use rayon::prelude::*;

use simplex::{solve, LinearProgram, LpOutcome};

pub type Rat = num_rational::BigRational;

/// Affine form `sum coeffs[v] * v + constant` over named variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinForm {
    pub coeffs: BTreeMap<String, Rat>,
    pub constant: Rat,
}

impl LinForm {
    pub fn constant(c: Rat) -> Self {
        LinForm { coeffs: BTreeMap::new(), constant: c }
    }

    pub fn variable(name: &str) -> Self {
        let mut coeffs = BTreeMap::new();
        coeffs.insert(name.to_string(), Rat::from_integer(1.into()));
        LinForm { coeffs, constant: Rat::zero() }
    }

    pub fn as_constant(&self) -> Option<Rat> {
        if self.coeffs.is_empty() {
            Some(self.constant.clone())
        } else {
            None
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (name, c) in &other.coeffs {
            let entry = out.coeffs.entry(name.clone()).or_insert_with(Rat::zero);
            *entry += c;
        }
        out.constant += &other.constant;
        out.prune();
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        LinForm {
            coeffs: self.coeffs.iter().map(|(k, c)| (k.clone(), -c)).collect(),
            constant: -&self.constant,
        }
    }

    pub fn scale(&self, factor: &Rat) -> Self {
        let mut out = LinForm {
            coeffs: self.coeffs.iter().map(|(k, c)| (k.clone(), c * factor)).collect(),
            constant: &self.constant * factor,
        };
        out.prune();
        out
    }

    pub fn eval(&self, assign: &BTreeMap<String, Rat>) -> Rat {
        let mut acc = self.constant.clone();
        for (name, c) in &self.coeffs {
            if let Some(x) = assign.get(name) {
                acc += c * x;
            }
        }
        acc
    }

    fn prune(&mut self) {
        self.coeffs.retain(|_, c| !c.is_zero());
    }

    fn for_each_name(&self, f: &mut impl FnMut(&str)) {
        for name in self.coeffs.keys() {
            f(name);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PLExpr {
    Lin(LinForm),
    Max(Vec<PLExpr>),
    Min(Vec<PLExpr>),
    /// `then` where `guard <= 0`, the constant `fallback` elsewhere.
    Guarded { guard: LinForm, then: Box<PLExpr>, fallback: Rat },
}

impl PLExpr {
    /// Pointwise value with the guard convention `guard <= 0` selects
    /// `then`. On a guard boundary the optimizer itself may use either
    /// branch; see the module docs.
    pub fn eval(&self, assign: &BTreeMap<String, Rat>) -> Rat {
        match self {
            PLExpr::Lin(l) => l.eval(assign),
            PLExpr::Max(items) => {
                items.iter().map(|e| e.eval(assign)).max().expect("max of nothing")
            }
            PLExpr::Min(items) => {
                items.iter().map(|e| e.eval(assign)).min().expect("min of nothing")
            }
            PLExpr::Guarded { guard, then, fallback } => {
                if guard.eval(assign) <= Rat::zero() {
                    then.eval(assign)
                } else {
                    fallback.clone()
                }
            }
        }
    }

    fn for_each_name(&self, f: &mut impl FnMut(&str)) {
        match self {
            PLExpr::Lin(l) => l.for_each_name(f),
            PLExpr::Max(items) | PLExpr::Min(items) => {
                for item in items {
                    item.for_each_name(f);
                }
            }
            PLExpr::Guarded { guard, then, .. } => {
                guard.for_each_name(f);
                then.for_each_name(f);
            }
        }
    }
}

/// `lhs REL 0`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    pub lhs: LinForm,
    pub rel: Relation,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PiecewiseProgram {
    /// Every variable name, in first-appearance order.
    pub variables: Vec<String>,
    /// The terms under the outer `min`.
    pub objective: Vec<PLExpr>,
    pub constraints: Vec<Constraint>,
}

impl PiecewiseProgram {
    pub fn eval(&self, assign: &BTreeMap<String, Rat>) -> Rat {
        self.objective
            .iter()
            .map(|t| t.eval(assign))
            .min()
            .expect("a program has at least one objective term")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptError {
    Infeasible,
    Unbounded,
}

impl fmt::Display for OptError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OptError::Infeasible => write!(f, "the constraint system admits no point"),
            OptError::Unbounded => {
                write!(f, "the objective is unbounded above on the feasible region")
            }
        }
    }
}

impl std::error::Error for OptError {}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OptResult {
    pub value: Rat,
    /// The lexicographically greatest optimizer with respect to the
    /// program's variable order, computed exactly. If the optimal face
    /// is unbounded in some coordinate, a vertex of the winning
    /// subprogram is reported instead.
    pub argmax: BTreeMap<String, Rat>,
    /// Branch certificate: which `max` child and which guard side was
    /// active in the winning linear subprogram, sorted.
    pub region: Vec<String>,
    /// Number of linear subprograms examined.
    pub leaves: usize,
    /// True when the optimum is pinned by a guard fallback constant;
    /// usually a sign the fallback was set too low.
    pub fallback_touched: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum RowKind {
    Bound,
    Fallback,
    Guard,
}

#[derive(Debug, Clone)]
struct LeafRow {
    form: LinForm,
    kind: RowKind,
}

#[derive(Debug, Clone)]
struct Alt {
    rows: Vec<LeafRow>,
    choices: Vec<String>,
}

/// One alternative per linear bound system for the term: `max` children
/// and guard sides multiply out, `min` children accumulate rows.
fn resolve(expr: &PLExpr, path: &str) -> Vec<Alt> {
    match expr {
        PLExpr::Lin(l) => vec![Alt {
            rows: vec![LeafRow { form: l.clone(), kind: RowKind::Bound }],
            choices: Vec::new(),
        }],
        PLExpr::Max(items) => {
            let mut out = Vec::new();
            for (k, item) in items.iter().enumerate() {
                for mut alt in resolve(item, &format!("{path}.m{k}")) {
                    alt.choices.push(format!("{path}:max#{k}"));
                    out.push(alt);
                }
            }
            out
        }
        PLExpr::Min(items) => {
            let mut acc = vec![Alt { rows: Vec::new(), choices: Vec::new() }];
            for (k, item) in items.iter().enumerate() {
                let children = resolve(item, &format!("{path}.n{k}"));
                let mut next = Vec::with_capacity(acc.len() * children.len());
                for a in &acc {
                    for c in &children {
                        let mut rows = a.rows.clone();
                        rows.extend(c.rows.iter().cloned());
                        let mut choices = a.choices.clone();
                        choices.extend(c.choices.iter().cloned());
                        next.push(Alt { rows, choices });
                    }
                }
                acc = next;
            }
            acc
        }
        PLExpr::Guarded { guard, then, fallback } => {
            let mut out = Vec::new();
            for mut alt in resolve(then, &format!("{path}.t")) {
                alt.rows.push(LeafRow { form: guard.clone(), kind: RowKind::Guard });
                alt.choices.push(format!("{path}:guard=holds"));
                out.push(alt);
            }
            out.push(Alt {
                rows: vec![
                    LeafRow { form: guard.neg(), kind: RowKind::Guard },
                    LeafRow {
                        form: LinForm::constant(fallback.clone()),
                        kind: RowKind::Fallback,
                    },
                ],
                choices: vec![format!("{path}:guard=fails")],
            });
            out
        }
    }
}

struct Candidate {
    value: Rat,
    point: Vec<Rat>,
    combo: Vec<usize>,
}

/// Maximizes each coordinate in turn over the polyhedron, pinning it
/// before moving on. None when some coordinate is unbounded above.
fn lex_max_point(base: &[(Vec<Rat>, Relation, Rat)], n: usize) -> Option<Vec<Rat>> {
    let mut rows = base.to_vec();
    let mut out = Vec::with_capacity(n);
    for j in 0..n {
        let mut objective = vec![Rat::zero(); n];
        objective[j] = Rat::from_integer(1.into());
        let lp = LinearProgram { cols: n, objective, rows: rows.clone() };
        match solve(&lp) {
            LpOutcome::Optimal { point, .. } => {
                let c = point[j].clone();
                let mut fix = vec![Rat::zero(); n];
                fix[j] = Rat::from_integer(1.into());
                rows.push((fix, Relation::Eq, c.clone()));
                out.push(c);
            }
            _ => return None,
        }
    }
    Some(out)
}

pub fn maximize(program: &PiecewiseProgram) -> Result<OptResult, OptError> {
    let vars = &program.variables;
    let n = vars.len();
    let index: BTreeMap<&str, usize> =
        vars.iter().enumerate().map(|(i, v)| (v.as_str(), i)).collect();

    let mut check_known = |name: &str| {
        assert!(
            index.contains_key(name),
            "variable `{name}` is used but missing from the program variable list"
        );
    };
    for term in &program.objective {
        term.for_each_name(&mut check_known);
    }
    for c in &program.constraints {
        c.lhs.for_each_name(&mut check_known);
    }

    // column n is the bound variable v being maximized
    let dense = |l: &LinForm| -> Vec<Rat> {
        let mut row = vec![Rat::zero(); n + 1];
        for (name, c) in &l.coeffs {
            row[index[name.as_str()]] = c.clone();
        }
        row
    };

    let base_rows: Vec<(Vec<Rat>, Relation, Rat)> = program
        .constraints
        .iter()
        .map(|c| (dense(&c.lhs), c.rel, -&c.lhs.constant))
        .collect();

    let mut objective = vec![Rat::zero(); n + 1];
    objective[n] = Rat::from_integer(1.into());

    let probe = LinearProgram {
        cols: n + 1,
        objective: vec![Rat::zero(); n + 1],
        rows: base_rows.clone(),
    };
    if solve(&probe) == LpOutcome::Infeasible {
        return Err(OptError::Infeasible);
    }

    let alt_sets: Vec<Vec<Alt>> = program
        .objective
        .iter()
        .enumerate()
        .map(|(i, term)| resolve(term, &format!("t{i}")))
        .collect();

    let mut combos: Vec<Vec<usize>> = vec![Vec::new()];
    for set in &alt_sets {
        combos = combos
            .iter()
            .flat_map(|c| {
                (0..set.len()).map(move |k| {
                    let mut c2 = c.clone();
                    c2.push(k);
                    c2
                })
            })
            .collect();
    }
    let leaves = combos.len();

    let outcomes: Result<Vec<Option<Candidate>>, OptError> = combos
        .into_par_iter()
        .map(|combo| {
            let mut rows = base_rows.clone();
            for (i, &k) in combo.iter().enumerate() {
                for leaf_row in &alt_sets[i][k].rows {
                    match leaf_row.kind {
                        // guard g <= 0 stays as written
                        RowKind::Guard => rows.push((
                            dense(&leaf_row.form),
                            Relation::Le,
                            -&leaf_row.form.constant,
                        )),
                        // v <= form becomes v - form.coeffs . x <= form.constant
                        RowKind::Bound | RowKind::Fallback => {
                            let mut row: Vec<Rat> =
                                dense(&leaf_row.form).iter().map(|c| -c).collect();
                            row[n] = Rat::from_integer(1.into());
                            rows.push((row, Relation::Le, leaf_row.form.constant.clone()));
                        }
                    }
                }
            }
            let lp = LinearProgram { cols: n + 1, objective: objective.clone(), rows };
            match solve(&lp) {
                LpOutcome::Infeasible => Ok(None),
                LpOutcome::Unbounded => Err(OptError::Unbounded),
                LpOutcome::Optimal { value, point } => {
                    Ok(Some(Candidate { value, point, combo }))
                }
            }
        })
        .collect();

    let candidates: Vec<Candidate> = outcomes?.into_iter().flatten().collect();
    let v_star = match candidates.iter().map(|c| c.value.clone()).max() {
        Some(v) => v,
        None => return Err(OptError::Infeasible),
    };

    // refine every leaf that attains the optimum: its argmax face is
    // where all its bounds sit at or above the optimum, and the
    // canonical point is the lexicographic maximum over that face
    let dense_x = |l: &LinForm| -> Vec<Rat> {
        let mut row = vec![Rat::zero(); n];
        for (name, c) in &l.coeffs {
            row[index[name.as_str()]] = c.clone();
        }
        row
    };
    let base_x: Vec<(Vec<Rat>, Relation, Rat)> = program
        .constraints
        .iter()
        .map(|c| (dense_x(&c.lhs), c.rel, -&c.lhs.constant))
        .collect();

    let mut best: Option<(Vec<Rat>, Candidate)> = None;
    for cand in candidates.into_iter().filter(|c| c.value == v_star) {
        let mut rows = base_x.clone();
        for (i, &k) in cand.combo.iter().enumerate() {
            for leaf_row in &alt_sets[i][k].rows {
                match leaf_row.kind {
                    RowKind::Guard => rows.push((
                        dense_x(&leaf_row.form),
                        Relation::Le,
                        -&leaf_row.form.constant,
                    )),
                    RowKind::Bound | RowKind::Fallback => rows.push((
                        dense_x(&leaf_row.form),
                        Relation::Ge,
                        &v_star - &leaf_row.form.constant,
                    )),
                }
            }
        }
        let point = lex_max_point(&rows, n).unwrap_or_else(|| cand.point[..n].to_vec());
        let take = match &best {
            None => true,
            Some((bp, bc)) => point > *bp || (point == *bp && cand.combo < bc.combo),
        };
        if take {
            best = Some((point, cand));
        }
    }
    let (point, winner) = best.expect("some leaf attains the maximum");

    let argmax: BTreeMap<String, Rat> =
        vars.iter().cloned().zip(point.into_iter()).collect();
    let mut region = Vec::new();
    let mut fallback_touched = false;
    for (i, &k) in winner.combo.iter().enumerate() {
        let alt = &alt_sets[i][k];
        region.extend(alt.choices.iter().cloned());
        for row in &alt.rows {
            if row.kind == RowKind::Fallback && row.form.constant == v_star {
                fallback_touched = true;
            }
        }
    }
    region.sort();

    Ok(OptResult { value: v_star, argmax, region, leaves, fallback_touched })
}

/// Replays a result against its program: the argmax must satisfy every
/// constraint, the recorded region must name a real branch combination
/// whose guard sides hold at the argmax (ties allowed), every recorded
/// bound must sit at or above the value, and the tightest must meet it.
pub fn verify_certificate(program: &PiecewiseProgram, result: &OptResult) -> bool {
    for v in &program.variables {
        if !result.argmax.contains_key(v) {
            return false;
        }
    }
    for c in &program.constraints {
        let x = c.lhs.eval(&result.argmax);
        let ok = match c.rel {
            Relation::Le => x <= Rat::zero(),
            Relation::Ge => x >= Rat::zero(),
            Relation::Eq => x.is_zero(),
        };
        if !ok {
            return false;
        }
    }

    let region: BTreeSet<&str> = result.region.iter().map(String::as_str).collect();
    let mut consumed: BTreeSet<&str> = BTreeSet::new();
    let mut tightest: Option<Rat> = None;
    for (i, term) in program.objective.iter().enumerate() {
        let path = format!("t{i}");
        let dot = format!("{path}.");
        let colon = format!("{path}:");
        let mine: BTreeSet<&str> = region
            .iter()
            .copied()
            .filter(|s| s.starts_with(&dot) || s.starts_with(&colon))
            .collect();
        consumed.extend(mine.iter().copied());
        let alts = resolve(term, &path);
        let alt = alts.into_iter().find(|a| {
            a.choices.iter().map(String::as_str).collect::<BTreeSet<_>>() == mine
        });
        let alt = match alt {
            Some(a) => a,
            None => return false,
        };
        let mut term_min: Option<Rat> = None;
        for row in &alt.rows {
            let x = row.form.eval(&result.argmax);
            match row.kind {
                RowKind::Guard => {
                    if x > Rat::zero() {
                        return false;
                    }
                }
                RowKind::Bound | RowKind::Fallback => {
                    term_min = Some(match term_min {
                        None => x,
                        Some(m) => m.min(x),
                    });
                }
            }
        }
        let tm = match term_min {
            Some(t) => t,
            None => return false,
        };
        if tm < result.value {
            return false;
        }
        tightest = Some(match tightest {
            None => tm,
            Some(m) => m.min(tm),
        });
    }
    if consumed != region {
        return false;
    }
    tightest.map_or(false, |m| m == result.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::Signed;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::str::FromStr;

    fn rat(s: &str) -> Rat {
        Rat::from_str(s).unwrap()
    }

    fn program_dir(name: &str) -> String {
        std::fs::read_to_string(format!(
            "{}/../../programs/{name}",
            env!("CARGO_MANIFEST_DIR")
        ))
        .unwrap_or_else(|e| panic!("reading programs/{name}: {e}"))
    }

    #[test]
    fn midpoint_toy_program() {
        let p = parse_program("max min(x, 1 - x) st x >= 0; x <= 1").unwrap();
        let r = maximize(&p).unwrap();
        assert_eq!(r.value, rat("1/2"));
        assert_eq!(r.argmax["x"], rat("1/2"));
        assert_eq!(r.leaves, 1);
        assert!(!r.fallback_touched);
        assert!(verify_certificate(&p, &r));
        assert_eq!(p.eval(&r.argmax), r.value);
    }

    #[test]
    fn closed_guard_boundary_may_use_the_better_branch() {
        // past the guard the first term is the fallback 5; the whole
        // stretch [0, 3] attains it and the lex-max refinement lands on
        // its right end
        let p = parse_program("max min(if(x <= 0, x, 5), 10 - x) st x >= -1; x <= 3").unwrap();
        let r = maximize(&p).unwrap();
        assert_eq!(r.value, rat("5"));
        assert_eq!(r.argmax["x"], rat("3"));
        assert!(r.fallback_touched);
        assert!(verify_certificate(&p, &r));
        assert!(r.region.iter().any(|s| s.ends_with("guard=fails")));
        assert_eq!(p.eval(&r.argmax), r.value);
    }

    #[test]
    fn unbounded_argmax_face_still_reports_a_vertex() {
        let p = parse_program("max min(1/3) st x >= 0").unwrap();
        let r = maximize(&p).unwrap();
        assert_eq!(r.value, rat("1/3"));
        assert_eq!(r.argmax["x"], rat("0"));
        assert!(verify_certificate(&p, &r));
    }

    #[test]
    fn infeasible_and_unbounded_are_reported() {
        let p = parse_program("max min(x, 1) st x <= -1; x >= 1").unwrap();
        assert_eq!(maximize(&p), Err(OptError::Infeasible));

        let p = parse_program("max min(x, y) st x >= 0").unwrap();
        assert_eq!(maximize(&p), Err(OptError::Unbounded));
    }

    #[test]
    fn certificate_rejects_corruption() {
        let p = parse_program("max min(x, 1 - x, max(x - 2, 0)) st x >= 0; x <= 1").unwrap();
        let r = maximize(&p).unwrap();
        assert_eq!(r.value, rat("0"));
        assert!(verify_certificate(&p, &r));

        let mut bad = r.clone();
        bad.value = rat("1/2");
        assert!(!verify_certificate(&p, &bad));

        let mut bad = r.clone();
        bad.argmax.insert("x".into(), rat("2"));
        assert!(!verify_certificate(&p, &bad));

        let mut bad = r.clone();
        bad.argmax.remove("x");
        assert!(!verify_certificate(&p, &bad));

        let mut bad = r.clone();
        bad.region.clear();
        assert!(!verify_certificate(&p, &bad));

        let mut bad = r.clone();
        bad.region.push("t9:max#0".into());
        assert!(!verify_certificate(&p, &bad));
    }

    #[test]
    fn nested_guards_and_minima_resolve() {
        // inner min forces both rows; the guard splits once more
        let text = "\
max min(
  min(4 - x, 4 - y),
  if(x + y <= 2, 3 + x - y, 1/2)
) st
  x >= 0; y >= 0; x <= 4; y <= 4
";
        let p = parse_program(text).unwrap();
        let r = maximize(&p).unwrap();
        assert_eq!(r.leaves, 2);
        // min(4 - x, 3 + x - y) averages to (7 - y)/2 <= 7/2, tight at
        // y = 0 and 4 - x = 3 + x, so the optimum pins (1/2, 0)
        assert_eq!(r.value, rat("7/2"));
        assert_eq!(r.argmax["x"], rat("1/2"));
        assert_eq!(r.argmax["y"], rat("0"));
        assert!(verify_certificate(&p, &r));
        assert_eq!(p.eval(&r.argmax), r.value);
    }

    #[test]
    fn random_continuous_programs_agree_with_grid_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        for round in 0..50 {
            let text = random_program(&mut rng);
            let p = parse_program(&text).unwrap_or_else(|e| panic!("{text}\n{e}"));
            let r = maximize(&p).unwrap_or_else(|e| panic!("{text}\n{e}"));
            assert!(verify_certificate(&p, &r), "round {round}\n{text}");

            let h = rat("1/8");
            let lo = rat("-2");
            let mut lipschitz = Rat::zero();
            let mut track = |l: &LinForm| {
                let sum = l.coeffs.values().fold(Rat::zero(), |a, c| a + c.abs());
                if sum > lipschitz {
                    lipschitz = sum;
                }
            };
            for t in &p.objective {
                collect_forms(t, &mut track);
            }

            let mut grid_max: Option<Rat> = None;
            for i in 0..=32u32 {
                for j in 0..=32u32 {
                    let mut assign = BTreeMap::new();
                    assign.insert("x".to_string(), &lo + &h * Rat::from_integer(i.into()));
                    assign.insert("y".to_string(), &lo + &h * Rat::from_integer(j.into()));
                    let feasible = p.constraints.iter().all(|c| {
                        let v = c.lhs.eval(&assign);
                        match c.rel {
                            Relation::Le => v <= Rat::zero(),
                            Relation::Ge => v >= Rat::zero(),
                            Relation::Eq => v.is_zero(),
                        }
                    });
                    if !feasible {
                        continue;
                    }
                    let v = p.eval(&assign);
                    assert!(
                        v <= r.value,
                        "round {round}: grid point beats the optimum\n{text}"
                    );
                    grid_max = Some(match grid_max {
                        None => v,
                        Some(m) => m.max(v),
                    });
                }
            }
            let grid_max = grid_max.expect("the box corners are always feasible");
            let slack = &lipschitz * &h;
            assert!(
                r.value <= &grid_max + &slack,
                "round {round}: optimum exceeds grid max by more than the mesh allows\n{text}"
            );
        }
    }

    #[test]
    fn extra_constraints_never_raise_the_optimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(0xcafe);
        for _ in 0..20 {
            let text = random_program(&mut rng);
            let p = parse_program(&text).unwrap();
            let r = maximize(&p).unwrap();
            let mut tightened = p.clone();
            tightened.constraints.push(Constraint {
                lhs: LinForm::variable("x").sub(&LinForm::constant(rat("1/4"))),
                rel: Relation::Le,
            });
            let r2 = maximize(&tightened).unwrap();
            assert!(r2.value <= r.value);
        }
    }

    fn collect_forms(e: &PLExpr, f: &mut impl FnMut(&LinForm)) {
        match e {
            PLExpr::Lin(l) => f(l),
            PLExpr::Max(items) | PLExpr::Min(items) => {
                for i in items {
                    collect_forms(i, f);
                }
            }
            PLExpr::Guarded { guard, then, .. } => {
                f(guard);
                collect_forms(then, f);
            }
        }
    }

    fn random_affine(rng: &mut ChaCha8Rng) -> String {
        let a = rng.gen_range(-2i32..=2);
        let b = rng.gen_range(-2i32..=2);
        let c = rng.gen_range(-4i32..=4);
        let d = [1, 2, 4][rng.gen_range(0..3)];
        format!("({a}*x + {b}*y + {c})/{d}")
    }

    /// Guard-free programs stay continuous, so a fine grid plus a
    /// Lipschitz margin brackets the true optimum.
    fn random_program(rng: &mut ChaCha8Rng) -> String {
        let terms: Vec<String> = (0..rng.gen_range(2..=3))
            .map(|_| match rng.gen_range(0..3) {
                0 => random_affine(rng),
                1 => format!("max({}, {})", random_affine(rng), random_affine(rng)),
                _ => format!("min({}, {})", random_affine(rng), random_affine(rng)),
            })
            .collect();
        format!(
            "max min({}) st x >= -2; x <= 2; y >= -2; y <= 2",
            terms.join(", ")
        )
    }

    #[test]
    fn program_files_have_exact_optima() {
        let p = parse_program(&program_dir("appendix_741.plp")).unwrap();
        assert_eq!(
            p.variables,
            vec!["m", "n", "n1", "n2", "n1prime", "n2prime", "n1circ", "n2circ"]
        );
        let r = maximize(&p).unwrap();
        assert_eq!(r.value, rat("-1/68"));
        assert_eq!(r.argmax["m"], rat("161/306"));
        assert_eq!(r.argmax["n"], rat("449/306"));
        assert_eq!(r.argmax["n1"], rat("9/17"));
        assert_eq!(r.argmax["n2"], rat("287/306"));
        assert_eq!(r.leaves, 288);
        assert!(!r.fallback_touched);
        assert!(verify_certificate(&p, &r));
        assert_eq!(p.eval(&r.argmax), r.value);

        let p = parse_program(&program_dir("appendix_742.plp")).unwrap();
        let r = maximize(&p).unwrap();
        assert_eq!(r.value, rat("-1/64"));
        assert_eq!(r.argmax["m"], rat("47/32"));
        assert_eq!(r.argmax["n"], rat("17/32"));
        assert_eq!(r.leaves, 48);
        assert!(verify_certificate(&p, &r));
        assert_eq!(p.eval(&r.argmax), r.value);
    }

    #[test]
    fn saving_thresholds_in_the_shipped_regions() {
        let p = parse_program(&program_dir("cuspidal_62.plp")).unwrap();
        let r = maximize(&p).unwrap();
        assert_eq!(r.value, rat("-1/144"));
        assert!(verify_certificate(&p, &r));

        // the same region with every eta bumped to 1/68 misses the
        // target: the constant bound term goes positive
        let text = program_dir("cuspidal_62.plp")
            .replace("1/48", "3/68")
            .replace("5/576", "5/272")
            .replace("1/72", "1/34")
            .replace("1/36", "1/17");
        let p68 = parse_program(&text).unwrap();
        assert_ne!(p, p68);
        let r68 = maximize(&p68).unwrap();
        assert_eq!(r68.value, rat("3/1088"));
        assert!(r68.value > rat("-1/68"));

        let p = parse_program(&program_dir("eisenstein_63.plp")).unwrap();
        let r = maximize(&p).unwrap();
        assert_eq!(r.value, rat("-1/32"));
        assert!(verify_certificate(&p, &r));
    }
}
