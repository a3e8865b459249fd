//! Classical simplification of the factoring equations.
//!
//! Carries start from their absolute bounds, are tightened column by column
//! until nothing moves, and then a small rule set is run to a fixpoint:
//!
//! * R4 drop equations that became `0 = 0`; reject a split whose equation can
//!   no longer reach zero,
//! * R1 fix carries whose range collapsed,
//! * R2 narrow each variable to the values that keep its equation satisfiable,
//! * R3 replace `x + y = 1` by `y := 1 - x` (and `x = y` by `y := x`),
//! * R5 `x (1 - x) = 0`, which the canonical polynomial form applies on every
//!   substitution,
//!
//! followed by carry probing: a carry value is discarded when fixing it makes
//! the rules above derive a contradiction.

use std::collections::{BTreeMap, BTreeSet};

use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

use crate::equations::{BitSplit, EquationSystem};
use crate::error::{Error, Result};
use crate::polynomial::{Assignment, Bound, Coeff, Domains, Polynomial, Variable};

/// Ranges of the cumulative carries `C_1 ..= C_{l_p + l_q - 1}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundTable {
    ranges: BTreeMap<u32, Bound>,
}

impl BoundTable {
    pub fn get(&self, index: u32) -> Option<Bound> {
        self.ranges.get(&index).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, Bound)> + '_ {
        self.ranges.iter().map(|(i, b)| (*i, *b))
    }

    /// Upper bounds in index order.
    pub fn highs(&self) -> Vec<i64> {
        self.ranges.values().map(|b| b.hi).collect()
    }

    /// Sum of `hi - lo` over all carries.
    pub fn slack(&self) -> i64 {
        self.ranges.values().map(|b| b.hi - b.lo).sum()
    }

    pub fn to_domains(&self) -> Domains {
        let mut d = Domains::new();
        for (i, b) in self.iter() {
            d.set(Variable::carry(i), b);
        }
        d
    }
}

/// Absolute carry bounds that hold for any `n` with this split.
pub fn init_bounds(split: BitSplit) -> BoundTable {
    let (lp, lq) = (split.p_bits as i64, split.q_bits as i64);
    let terminal = split.terminal_carry();
    let mut ranges = BTreeMap::new();
    for i in 1..terminal {
        let ii = i as i64;
        let hi = if ii < lq {
            ii - 1
        } else if ii <= lp {
            lq - 1
        } else {
            lp + lq - ii
        };
        ranges.insert(i, Bound::new(0, hi));
    }
    ranges.insert(terminal, Bound::exact(split.terminal_value()));
    BoundTable { ranges }
}

fn floor_half(x: Coeff) -> i64 {
    x.div_euclid(2) as i64
}

fn ceil_half(x: Coeff) -> i64 {
    -((-x).div_euclid(2)) as i64
}

fn infeasible(split: BitSplit, reason: impl Into<String>) -> Error {
    Error::InfeasibleSplit {
        p_bits: split.p_bits,
        q_bits: split.q_bits,
        reason: reason.into(),
    }
}

/// One forward sweep over the columns. Returns `None` when nothing changed.
fn refine_sweep(system: &EquationSystem, table: &BoundTable) -> Result<Option<BoundTable>> {
    let mut next = table.clone();
    let empty = Assignment::new();
    let domains = Domains::new();
    let mut changed = false;
    for eq in &system.equations {
        let Some(out) = eq.carry_out else { continue };
        let (cmin, cmax) = eq.cross.bounds(&empty, &domains)?;
        let incoming = match eq.carry_in {
            Some(c) => next.get(c.index).expect("carry in table"),
            None => Bound::exact(0),
        };
        let n_m = eq.rhs_bit as Coeff;
        let hi = floor_half(cmax + incoming.hi as Coeff - n_m);
        let lo = ceil_half(cmin + incoming.lo as Coeff - n_m).max(0);
        let cur = next.get(out.index).expect("carry in table");
        let tightened = Bound::new(cur.lo.max(lo), cur.hi.min(hi));
        if tightened.is_empty() {
            return Err(infeasible(
                system.split,
                format!("range of {out} became empty at column {}", eq.order),
            ));
        }
        if tightened != cur {
            next.ranges.insert(out.index, tightened);
            changed = true;
        }
    }
    Ok(changed.then_some(next))
}

/// Tightens carry ranges column by column until a fixpoint.
pub fn refine_bounds(system: &EquationSystem, table: &BoundTable) -> Result<BoundTable> {
    Ok(refine_bounds_traced(system, table)?
        .pop()
        .expect("trace holds the starting table"))
}

/// Like [`refine_bounds`], returning the table after every sweep (the first
/// entry is the input).
pub fn refine_bounds_traced(system: &EquationSystem, table: &BoundTable) -> Result<Vec<BoundTable>> {
    let mut history = vec![table.clone()];
    while let Some(next) = refine_sweep(system, history.last().unwrap())? {
        history.push(next);
    }
    Ok(history)
}

/// Which propagation rules to run. R1, R2, R4 and R5 are always on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rules {
    pub complement_substitution: bool,
    pub carry_probing: bool,
}

impl Default for Rules {
    fn default() -> Self {
        Self { complement_substitution: true, carry_probing: true }
    }
}

/// A variable removed by substitution, `var := expr`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Elimination {
    pub var: Variable,
    pub expr: Polynomial,
}

/// What is left after classical simplification.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualSystem {
    pub n: u64,
    pub split: BitSplit,
    /// Each polynomial must vanish.
    pub equations: Vec<Polynomial>,
    /// Unknowns left for the quantum stage, in qubit order.
    pub free: Vec<Variable>,
    /// Substitutions in the order they were made.
    pub eliminated: Vec<Elimination>,
    pub fixed: Assignment,
    /// Ranges of the carries that survived in `free`.
    pub carry_bounds: Domains,
}

impl ResidualSystem {
    pub fn free_binary(&self) -> impl Iterator<Item = Variable> + '_ {
        self.free.iter().copied().filter(Variable::is_binary)
    }

    pub fn free_carries(&self) -> impl Iterator<Item = Variable> + '_ {
        self.free.iter().copied().filter(Variable::is_carry)
    }

    pub fn is_solved(&self) -> bool {
        self.free.is_empty()
    }

    pub fn domain(&self, var: Variable) -> Bound {
        self.carry_bounds.get(var).unwrap_or(Bound::BINARY)
    }

    /// Extends values of the free variables with the fixed values and the
    /// replayed substitution log.
    pub fn complete(&self, free_values: &Assignment) -> Result<Assignment> {
        let mut full = self.fixed.clone();
        full.extend(free_values);
        for elim in self.eliminated.iter().rev() {
            let value = elim.expr.evaluate(&full)?;
            full.set(elim.var, value as i64)?;
        }
        Ok(full)
    }

    pub fn is_satisfied_by(&self, values: &Assignment) -> Result<bool> {
        for eq in &self.equations {
            if eq.evaluate(values)? != 0 {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("residual system serialises")
    }
}

impl Serialize for ResidualSystem {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(7))?;
        map.serialize_entry("n", &self.n)?;
        map.serialize_entry("split", &self.split)?;
        map.serialize_entry("equations", &self.equations)?;
        let free: Vec<String> = self.free.iter().map(ToString::to_string).collect();
        map.serialize_entry("free", &free)?;
        let log: Vec<serde_json::Value> = self
            .eliminated
            .iter()
            .map(|e| serde_json::json!({ "var": e.var.to_string(), "expr": e.expr.to_string() }))
            .collect();
        map.serialize_entry("eliminated", &log)?;
        map.serialize_entry("fixed", &self.fixed)?;
        map.serialize_entry("carry_bounds", &self.carry_bounds)?;
        map.end()
    }
}

#[derive(Debug, Clone)]
struct Propagator {
    split: BitSplit,
    equations: Vec<Polynomial>,
    domains: Domains,
    fixed: Assignment,
    eliminated: Vec<Elimination>,
}

impl Propagator {
    fn fail(&self, reason: impl Into<String>) -> Error {
        infeasible(self.split, reason)
    }

    fn fix(&mut self, var: Variable, value: i64) -> Result<()> {
        for eq in &mut self.equations {
            if eq.contains_var(var) {
                *eq = eq.fix(var, value);
            }
        }
        if var.is_carry() {
            self.domains.set(var, Bound::exact(value));
        }
        self.fixed.set(var, value)
    }

    fn eliminate(&mut self, var: Variable, expr: Polynomial) -> Result<()> {
        for eq in &mut self.equations {
            if eq.contains_var(var) {
                *eq = eq.substitute(var, &expr)?;
            }
        }
        self.eliminated.push(Elimination { var, expr });
        Ok(())
    }

    fn bound_of(&self, var: Variable) -> Result<Bound> {
        self.domains.get(var).ok_or(Error::Unbounded(var))
    }

    /// R4: drop satisfied equations, reject unsatisfiable ones.
    fn drop_settled(&mut self) -> Result<bool> {
        let before = self.equations.len();
        let empty = Assignment::new();
        for eq in &self.equations {
            let (lo, hi) = eq.bounds(&empty, &self.domains)?;
            if lo > 0 || hi < 0 {
                return Err(self.fail(format!("{eq} = 0 has no solution")));
            }
        }
        self.equations.retain(|eq| !eq.is_zero());
        Ok(self.equations.len() != before)
    }

    /// R1: carries whose range holds a single value become fixed.
    fn fix_collapsed(&mut self) -> Result<bool> {
        let collapsed: Vec<(Variable, i64)> = self
            .domains
            .iter()
            .filter(|(v, b)| b.is_fixed() && !self.fixed.contains(*v))
            .map(|(v, b)| (v, b.lo))
            .collect();
        for (v, x) in &collapsed {
            self.fix(*v, *x)?;
        }
        Ok(!collapsed.is_empty())
    }

    /// R2: keep only the values of each variable under which its equation
    /// can still vanish.
    fn narrow_variables(&mut self) -> Result<bool> {
        let empty = Assignment::new();
        let mut changed = false;
        for i in 0..self.equations.len() {
            for var in self.equations[i].variables() {
                let eq = &self.equations[i];
                if !eq.contains_var(var) {
                    continue;
                }
                let b = self.bound_of(var)?;
                let mut feasible = (b.lo..=b.hi).filter(|&x| {
                    let (lo, hi) = eq
                        .fix(var, x)
                        .bounds(&empty, &self.domains)
                        .expect("all variables bounded");
                    lo <= 0 && 0 <= hi
                });
                let Some(lo) = feasible.next() else {
                    return Err(self.fail(format!("no value of {var} satisfies {eq} = 0")));
                };
                let hi = feasible.next_back().unwrap_or(lo);
                let narrowed = Bound::new(lo, hi);
                if narrowed == b {
                    continue;
                }
                if narrowed.is_fixed() {
                    self.fix(var, lo)?;
                } else {
                    self.domains.set(var, narrowed);
                }
                changed = true;
            }
        }
        Ok(changed)
    }

    /// R3: `x + y = 1` gives `y := 1 - x`; `x = y` gives `y := x`.
    fn substitute_pairs(&mut self) -> Result<bool> {
        for eq in &self.equations {
            if eq.num_terms() != 2 || eq.degree() != 1 {
                continue;
            }
            let terms: Vec<(Variable, Coeff)> =
                eq.terms().map(|(m, c)| (m.vars()[0], c)).collect();
            let [(x, cx), (y, cy)] = terms[..] else { continue };
            if !x.is_binary() || !y.is_binary() || cx.abs() != 1 || cy.abs() != 1 {
                continue;
            }
            let k = eq.constant_term() * cx;
            let expr = match (cx == cy, k) {
                (true, -1) => Polynomial::complement(x),
                (false, 0) => Polynomial::var(x),
                _ => continue,
            };
            self.eliminate(y, expr)?;
            return Ok(true);
        }
        Ok(false)
    }

    fn run_rules(&mut self, rules: Rules) -> Result<()> {
        loop {
            let changed = self.drop_settled()?
                || self.fix_collapsed()?
                || self.narrow_variables()?
                || (rules.complement_substitution && self.substitute_pairs()?);
            if !changed {
                return Ok(());
            }
        }
    }

    /// Discards carry values that lead to a contradiction. Returns whether
    /// any range shrank.
    fn probe_carries(&mut self, rules: Rules) -> Result<bool> {
        let open: Vec<(Variable, Bound)> = self
            .domains
            .iter()
            .filter(|(v, b)| !b.is_fixed() && !self.fixed.contains(*v))
            .collect();
        let mut changed = false;
        for (var, _) in open {
            let b = self.bound_of(var)?;
            let survivors: Vec<i64> = (b.lo..=b.hi)
                .filter(|&x| {
                    let mut trial = self.clone();
                    trial.fix(var, x).is_ok() && trial.run_rules(rules).is_ok()
                })
                .collect();
            let (Some(&lo), Some(&hi)) = (survivors.first(), survivors.last()) else {
                return Err(self.fail(format!("every value of {var} is contradictory")));
            };
            if (lo, hi) != (b.lo, b.hi) {
                self.domains.set(var, Bound::new(lo, hi));
                changed = true;
            }
        }
        Ok(changed)
    }
}

/// Runs the default rule set to a fixpoint.
pub fn propagate(system: &EquationSystem, table: &BoundTable) -> Result<ResidualSystem> {
    propagate_with(system, table, Rules::default())
}

pub fn propagate_with(
    system: &EquationSystem,
    table: &BoundTable,
    rules: Rules,
) -> Result<ResidualSystem> {
    let mut state = Propagator {
        split: system.split,
        equations: system.equations.iter().map(|e| e.polynomial()).collect(),
        domains: table.to_domains(),
        fixed: system.fixed.clone(),
        eliminated: Vec::new(),
    };
    for (v, x) in system.fixed.iter() {
        if system.variables.contains(&v) {
            state.fix(v, x)?;
        }
    }
    loop {
        state.run_rules(rules)?;
        if !(rules.carry_probing && state.probe_carries(rules)?) {
            break;
        }
    }

    let removed: BTreeSet<Variable> = state.eliminated.iter().map(|e| e.var).collect();
    let free: Vec<Variable> = system
        .variables
        .iter()
        .copied()
        .filter(|v| !state.fixed.contains(*v) && !removed.contains(v))
        .collect();
    let mut carry_bounds = Domains::new();
    for v in free.iter().filter(|v| v.is_carry()) {
        carry_bounds.set(*v, state.domains.get(*v).expect("carry has a range"));
    }
    Ok(ResidualSystem {
        n: system.n,
        split: system.split,
        equations: state.equations,
        free,
        eliminated: state.eliminated,
        fixed: state.fixed,
        carry_bounds,
    })
}

/// Default cap on free variables for [`solve_residual_exhaustively`].
pub const EXHAUSTIVE_CAP: usize = 20;

/// Linear form of a polynomial over a fixed slot layout, for fast repeated
/// evaluation.
pub(crate) struct CompiledPoly {
    constant: Coeff,
    terms: Vec<(Coeff, Vec<usize>)>,
}

impl CompiledPoly {
    pub(crate) fn new(poly: &Polynomial, slots: &[Variable]) -> Result<Self> {
        let slot = |v: &Variable| slots.iter().position(|s| s == v).ok_or(Error::Unassigned(*v));
        let terms = poly
            .terms()
            .map(|(m, c)| Ok((c, m.vars().iter().map(slot).collect::<Result<Vec<_>>>()?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { constant: poly.constant_term(), terms })
    }

    pub(crate) fn eval(&self, values: &[i64]) -> Coeff {
        self.terms.iter().fold(self.constant, |acc, (c, idx)| {
            acc + idx.iter().fold(*c, |p, &i| p * values[i] as Coeff)
        })
    }
}

/// Every assignment of the free variables that satisfies all residual
/// equations. Carries range over their surviving bounds.
pub fn solve_residual_exhaustively(r: &ResidualSystem, cap: usize) -> Result<Vec<Assignment>> {
    if r.free.len() > cap {
        return Err(Error::CapExceeded { needed: r.free.len(), cap });
    }
    let ranges: Vec<Bound> = r.free.iter().map(|v| r.domain(*v)).collect();
    let compiled = r
        .equations
        .iter()
        .map(|e| CompiledPoly::new(e, &r.free))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::new();
    if ranges.iter().any(Bound::is_empty) {
        return Ok(out);
    }
    // each equation is checked once its last variable is assigned
    let mut checks: Vec<Vec<usize>> = vec![Vec::new(); r.free.len()];
    for (e, eq) in r.equations.iter().enumerate() {
        let last = eq.variables().iter().filter_map(|v| r.free.iter().position(|f| f == v)).max();
        match last {
            Some(slot) => checks[slot].push(e),
            None if eq.constant_term() != 0 => return Ok(out),
            None => {}
        }
    }
    if r.free.is_empty() {
        out.push(Assignment::new());
        return Ok(out);
    }
    let width = r.free.len();
    let mut values: Vec<i64> = ranges.iter().map(|b| b.lo).collect();
    let mut depth = 0;
    loop {
        let ok = checks[depth].iter().all(|&e| compiled[e].eval(&values) == 0);
        if ok && depth + 1 == width {
            out.push(r.free.iter().copied().zip(values.iter().copied()).collect());
        } else if ok {
            depth += 1;
            values[depth] = ranges[depth].lo;
            continue;
        }
        while values[depth] == ranges[depth].hi {
            if depth == 0 {
                return Ok(out);
            }
            depth -= 1;
        }
        values[depth] += 1;
    }
}
