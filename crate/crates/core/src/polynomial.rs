//! Exact multilinear pseudo-boolean polynomials with integer coefficients.
//!
//! Binary variables obey `x * x = x`, so every stored monomial is a set of
//! distinct variables. Carry variables are integer valued and may occur at
//! most once per monomial, and never alongside another carry.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Integer coefficient type. 128 bits leaves headroom for squared equations
/// of 64-bit inputs.
pub type Coeff = i128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum VarKind {
    FactorBitP,
    FactorBitQ,
    Carry,
    AncillaQubit,
}

/// A named unknown: a bit of one of the factors, a cumulative carry, or an
/// ancilla bit introduced when a carry is binary-encoded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Variable {
    pub kind: VarKind,
    pub index: u32,
}

impl Variable {
    pub const fn p(index: u32) -> Self {
        Self { kind: VarKind::FactorBitP, index }
    }

    pub const fn q(index: u32) -> Self {
        Self { kind: VarKind::FactorBitQ, index }
    }

    pub const fn carry(index: u32) -> Self {
        Self { kind: VarKind::Carry, index }
    }

    pub const fn ancilla(index: u32) -> Self {
        Self { kind: VarKind::AncillaQubit, index }
    }

    pub fn is_binary(&self) -> bool {
        self.kind != VarKind::Carry
    }

    pub fn is_carry(&self) -> bool {
        self.kind == VarKind::Carry
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prefix = match self.kind {
            VarKind::FactorBitP => "p",
            VarKind::FactorBitQ => "q",
            VarKind::Carry => "C",
            VarKind::AncillaQubit => "a",
        };
        write!(f, "{prefix}{}", self.index)
    }
}

/// Inclusive integer range of a variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bound {
    pub lo: i64,
    pub hi: i64,
}

impl Bound {
    pub const BINARY: Bound = Bound { lo: 0, hi: 1 };

    pub fn new(lo: i64, hi: i64) -> Self {
        Self { lo, hi }
    }

    pub fn exact(value: i64) -> Self {
        Self { lo: value, hi: value }
    }

    pub fn is_empty(&self) -> bool {
        self.lo > self.hi
    }

    pub fn is_fixed(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains(&self, value: i64) -> bool {
        self.lo <= value && value <= self.hi
    }

    /// Number of integers in the range.
    pub fn width(&self) -> i64 {
        (self.hi - self.lo + 1).max(0)
    }
}

/// Ranges of the carry variables; binary variables are implicitly `[0, 1]`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Domains {
    carries: BTreeMap<Variable, Bound>,
}

impl Domains {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, var: Variable, bound: Bound) {
        debug_assert!(var.is_carry(), "only carries carry explicit ranges");
        self.carries.insert(var, bound);
    }

    pub fn get(&self, var: Variable) -> Option<Bound> {
        if var.is_binary() {
            Some(Bound::BINARY)
        } else {
            self.carries.get(&var).copied()
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (Variable, Bound)> + '_ {
        self.carries.iter().map(|(v, b)| (*v, *b))
    }
}

/// Values for a subset of variables. Binary variables only accept 0 or 1.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Assignment {
    values: BTreeMap<Variable, i64>,
}

impl Assignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, var: Variable, value: i64) -> Result<()> {
        if var.is_binary() && !(0..=1).contains(&value) {
            return Err(Error::OutOfBounds { var, value });
        }
        if var.is_carry() && value < 0 {
            return Err(Error::OutOfBounds { var, value });
        }
        self.values.insert(var, value);
        Ok(())
    }

    /// Builder-style `set` for literals known to be in range.
    pub fn with(mut self, var: Variable, value: i64) -> Self {
        self.set(var, value).expect("assignment value out of bounds");
        self
    }

    pub fn get(&self, var: Variable) -> Option<i64> {
        self.values.get(&var).copied()
    }

    pub fn contains(&self, var: Variable) -> bool {
        self.values.contains_key(&var)
    }

    pub fn remove(&mut self, var: Variable) -> Option<i64> {
        self.values.remove(&var)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Variable, i64)> + '_ {
        self.values.iter().map(|(v, x)| (*v, *x))
    }

    pub fn extend(&mut self, other: &Assignment) {
        for (v, x) in other.iter() {
            self.values.insert(v, x);
        }
    }
}

impl Serialize for Assignment {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_map(self.values.iter().map(|(v, x)| (v.to_string(), x)))
    }
}

impl Serialize for Domains {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_map(self.carries.iter().map(|(v, b)| (v.to_string(), [b.lo, b.hi])))
    }
}

impl FromIterator<(Variable, i64)> for Assignment {
    fn from_iter<I: IntoIterator<Item = (Variable, i64)>>(iter: I) -> Self {
        let mut a = Assignment::new();
        for (v, x) in iter {
            a.set(v, x).expect("assignment value out of bounds");
        }
        a
    }
}

/// Product of distinct variables. Ordered by degree, then lexicographically,
/// so rendered polynomials read from low to high degree.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Monomial(Vec<Variable>);

impl Monomial {
    pub fn one() -> Self {
        Self(Vec::new())
    }

    pub fn from_vars(vars: impl IntoIterator<Item = Variable>) -> Result<Self> {
        vars.into_iter()
            .try_fold(Self::one(), |acc, v| acc.times(&Monomial(vec![v])))
    }

    pub fn vars(&self) -> &[Variable] {
        &self.0
    }

    pub fn degree(&self) -> usize {
        self.0.len()
    }

    pub fn contains(&self, var: Variable) -> bool {
        self.0.binary_search(&var).is_ok()
    }

    fn without(&self, var: Variable) -> Monomial {
        Monomial(self.0.iter().copied().filter(|v| *v != var).collect())
    }

    /// Multilinear product. Fails if two carries would share the monomial.
    pub fn times(&self, other: &Monomial) -> Result<Monomial> {
        let (a, b) = (&self.0, &other.0);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() || j < b.len() {
            let next = match (a.get(i), b.get(j)) {
                (Some(x), Some(y)) => match x.cmp(y) {
                    Ordering::Less => {
                        i += 1;
                        *x
                    }
                    Ordering::Greater => {
                        j += 1;
                        *y
                    }
                    Ordering::Equal => {
                        i += 1;
                        j += 1;
                        *x
                    }
                },
                (Some(x), None) => {
                    i += 1;
                    *x
                }
                (None, Some(y)) => {
                    j += 1;
                    *y
                }
                (None, None) => unreachable!(),
            };
            if out.last() == Some(&next) {
                // x * x with x binary; only reachable via repeated input
                continue;
            }
            out.push(next);
        }
        let carries = out.iter().filter(|v| v.is_carry()).count();
        let carry_sq = a.iter().any(|v| v.is_carry() && b.contains(v));
        if carries > 1 || carry_sq {
            return Err(Error::CarryProduct(
                out.iter().map(ToString::to_string).collect::<Vec<_>>().join("*"),
            ));
        }
        Ok(Monomial(out))
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .len()
            .cmp(&other.0.len())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "1");
        }
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, "*")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Integer-coefficient multilinear polynomial in canonical form: no zero
/// coefficients, constant held separately, monomials in [`Monomial`] order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Polynomial {
    terms: BTreeMap<Monomial, Coeff>,
    constant: Coeff,
}

impl Polynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: Coeff) -> Self {
        Self { terms: BTreeMap::new(), constant: c }
    }

    pub fn var(v: Variable) -> Self {
        Self::term(1, Monomial(vec![v]))
    }

    /// `1 - v`, the complement of a binary variable.
    pub fn complement(v: Variable) -> Self {
        Self::constant(1) - Self::var(v)
    }

    pub fn term(coeff: Coeff, mono: Monomial) -> Self {
        let mut p = Self::zero();
        p.add_term(mono, coeff);
        p
    }

    fn add_term(&mut self, mono: Monomial, coeff: Coeff) {
        if coeff == 0 {
            return;
        }
        if mono.0.is_empty() {
            self.constant += coeff;
            return;
        }
        let entry = self.terms.entry(mono);
        match entry {
            std::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += coeff;
                if *o.get() == 0 {
                    o.remove();
                }
            }
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(coeff);
            }
        }
    }

    pub fn constant_term(&self) -> Coeff {
        self.constant
    }

    /// Non-constant terms in canonical order.
    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, Coeff)> + '_ {
        self.terms.iter().map(|(m, c)| (m, *c))
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty() && self.constant == 0
    }

    pub fn as_constant(&self) -> Option<Coeff> {
        self.terms.is_empty().then_some(self.constant)
    }

    pub fn degree(&self) -> usize {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn variables(&self) -> BTreeSet<Variable> {
        self.terms.keys().flat_map(|m| m.0.iter().copied()).collect()
    }

    pub fn contains_var(&self, var: Variable) -> bool {
        self.terms.keys().any(|m| m.contains(var))
    }

    pub fn scale(&self, k: Coeff) -> Polynomial {
        if k == 0 {
            return Polynomial::zero();
        }
        Polynomial {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), c * k)).collect(),
            constant: self.constant * k,
        }
    }

    pub fn multiply(&self, other: &Polynomial) -> Result<Polynomial> {
        let mut out = Polynomial::constant(self.constant * other.constant);
        for (m, c) in &self.terms {
            out.add_term(m.clone(), c * other.constant);
        }
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c * self.constant);
        }
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                out.add_term(ma.times(mb)?, ca * cb);
            }
        }
        Ok(out)
    }

    pub fn square(&self) -> Result<Polynomial> {
        self.multiply(self)
    }

    /// Replaces every occurrence of `var` by `expr` and re-canonicalises.
    pub fn substitute(&self, var: Variable, expr: &Polynomial) -> Result<Polynomial> {
        let mut out = Polynomial::constant(self.constant);
        for (m, c) in &self.terms {
            if m.contains(var) {
                let rest = Polynomial::term(*c, m.without(var));
                out += &rest.multiply(expr)?;
            } else {
                out.add_term(m.clone(), *c);
            }
        }
        Ok(out)
    }

    /// Substitutes a constant value; never fails.
    pub fn fix(&self, var: Variable, value: i64) -> Polynomial {
        let mut out = Polynomial::constant(self.constant);
        for (m, c) in &self.terms {
            if m.contains(var) {
                out.add_term(m.without(var), c * value as Coeff);
            } else {
                out.add_term(m.clone(), *c);
            }
        }
        out
    }

    pub fn evaluate(&self, a: &Assignment) -> Result<Coeff> {
        let mut total = self.constant;
        for (m, c) in &self.terms {
            let mut prod: Coeff = *c;
            for v in &m.0 {
                let x = a.get(*v).ok_or(Error::Unassigned(*v))?;
                prod *= x as Coeff;
                if prod == 0 {
                    break;
                }
            }
            total += prod;
        }
        Ok(total)
    }

    /// Interval enclosure of the polynomial over all completions of `fixed`.
    ///
    /// Each monomial contributes the extreme of its own range independently,
    /// so the result always contains the true range but may be wider when
    /// terms are correlated.
    pub fn bounds(&self, fixed: &Assignment, domains: &Domains) -> Result<(Coeff, Coeff)> {
        let mut lo = self.constant;
        let mut hi = self.constant;
        for (m, c) in &self.terms {
            let (mut mlo, mut mhi): (Coeff, Coeff) = (1, 1);
            for v in &m.0 {
                let (vlo, vhi) = match fixed.get(*v) {
                    Some(x) => (x as Coeff, x as Coeff),
                    None => {
                        let b = domains.get(*v).ok_or(Error::Unbounded(*v))?;
                        (b.lo as Coeff, b.hi as Coeff)
                    }
                };
                let corners = [mlo * vlo, mlo * vhi, mhi * vlo, mhi * vhi];
                mlo = *corners.iter().min().unwrap();
                mhi = *corners.iter().max().unwrap();
            }
            if *c > 0 {
                lo += c * mlo;
                hi += c * mhi;
            } else {
                lo += c * mhi;
                hi += c * mlo;
            }
        }
        Ok((lo, hi))
    }
}

impl AddAssign<&Polynomial> for Polynomial {
    fn add_assign(&mut self, rhs: &Polynomial) {
        self.constant += rhs.constant;
        for (m, c) in &rhs.terms {
            self.add_term(m.clone(), *c);
        }
    }
}

impl Add for Polynomial {
    type Output = Polynomial;
    fn add(mut self, rhs: Polynomial) -> Polynomial {
        self += &rhs;
        self
    }
}

impl Neg for Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(-1)
    }
}

impl Sub for Polynomial {
    type Output = Polynomial;
    fn sub(mut self, rhs: Polynomial) -> Polynomial {
        self += &rhs.scale(-1);
        self
    }
}

impl Add<Coeff> for Polynomial {
    type Output = Polynomial;
    fn add(mut self, rhs: Coeff) -> Polynomial {
        self.constant += rhs;
        self
    }
}

impl Sub<Coeff> for Polynomial {
    type Output = Polynomial;
    fn sub(mut self, rhs: Coeff) -> Polynomial {
        self.constant -= rhs;
        self
    }
}

impl Mul<Coeff> for Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: Coeff) -> Polynomial {
        self.scale(rhs)
    }
}

impl From<Variable> for Polynomial {
    fn from(v: Variable) -> Self {
        Polynomial::var(v)
    }
}

/// Canonical text: constant first, then monomials in canonical order, each
/// with an explicit sign, e.g. `-1 + p1 + p2 - 2*p1*p2`.
impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        if self.constant != 0 {
            write!(f, "{}", self.constant)?;
            first = false;
        }
        for (m, c) in &self.terms {
            let (sign, mag) = if *c < 0 { ("-", -c) } else { ("+", *c) };
            if first {
                if sign == "-" {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            if mag != 1 {
                write!(f, "{mag}*")?;
            }
            write!(f, "{m}")?;
            first = false;
        }
        Ok(())
    }
}

impl Serialize for Polynomial {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(i: u32) -> Polynomial {
        Polynomial::var(Variable::p(i))
    }
    fn q(i: u32) -> Polynomial {
        Polynomial::var(Variable::q(i))
    }
    fn c(i: u32) -> Polynomial {
        Polynomial::var(Variable::carry(i))
    }
    fn k(x: Coeff) -> Polynomial {
        Polynomial::constant(x)
    }

    #[test]
    fn idempotent_square() {
        assert_eq!(p(1).multiply(&p(1)).unwrap(), p(1));
    }

    #[test]
    fn multiply_by_one() {
        let a = p(1) + q(1);
        assert_eq!(a.multiply(&k(1)).unwrap(), a);
    }

    #[test]
    fn multiply_expands_hand_example() {
        let a = k(1) + p(1) * 2 + p(2) * 4;
        let b = k(1) + q(1) * 2;
        let expected = k(1)
            + q(1) * 2
            + p(1) * 2
            + p(1).multiply(&q(1)).unwrap() * 4
            + p(2) * 4
            + p(2).multiply(&q(1)).unwrap() * 8;
        assert_eq!(a.multiply(&b).unwrap(), expected);
        assert_eq!(expected.to_string(), "1 + 2*p1 + 4*p2 + 2*q1 + 4*p1*q1 + 8*p2*q1");
    }

    #[test]
    fn carry_products_rejected() {
        assert!(matches!(c(1).multiply(&c(2)), Err(Error::CarryProduct(_))));
        assert!(matches!(c(1).multiply(&c(1)), Err(Error::CarryProduct(_))));
        assert!(c(1).multiply(&p(1)).is_ok());
    }

    #[test]
    fn complement_substitution_cancels() {
        let comp = Polynomial::complement(Variable::p(1));
        let pq = p(1).multiply(&q(1)).unwrap();
        assert!(pq.substitute(Variable::q(1), &comp).unwrap().is_zero());
        let lin = p(1) + q(1) - 1;
        assert!(lin.substitute(Variable::q(1), &comp).unwrap().is_zero());
    }

    #[test]
    fn substitute_forces_residual() {
        // p1(1-p2) + (1-p1)p2 - 1 with p2 = 1 leaves -p1
        let xor = p(1) + p(2) - p(1).multiply(&p(2)).unwrap() * 2 - 1;
        let out = xor.substitute(Variable::p(2), &k(1)).unwrap();
        assert_eq!(out, -p(1));
    }

    #[test]
    fn evaluate_basics() {
        let a = Assignment::new().with(Variable::p(1), 1).with(Variable::q(1), 0);
        assert_eq!((p(1) + q(1)).evaluate(&a).unwrap(), 1);
        let missing = Assignment::new().with(Variable::p(1), 1);
        assert_eq!(
            (p(1) + q(1)).evaluate(&missing),
            Err(Error::Unassigned(Variable::q(1)))
        );
    }

    #[test]
    fn evaluate_residual_line() {
        let xor = p(1) + p(2) - p(1).multiply(&p(2)).unwrap() * 2 - 1;
        let a = Assignment::new().with(Variable::p(1), 0).with(Variable::p(2), 1);
        assert_eq!(xor.evaluate(&a).unwrap(), 0);
    }

    #[test]
    fn interval_bounds() {
        let d = Domains::new();
        let none = Assignment::new();
        assert_eq!((p(1) + q(1)).bounds(&none, &d).unwrap(), (0, 2));
        let e = p(1).multiply(&q(1)).unwrap() - p(2);
        assert_eq!(e.bounds(&none, &d).unwrap(), (-1, 1));
        let mut d = Domains::new();
        d.set(Variable::carry(2), Bound::new(0, 3));
        let e = p(1) + c(2) * -2;
        assert_eq!(e.bounds(&none, &d).unwrap(), (-6, 1));
        let fixed = Assignment::new().with(Variable::carry(2), 1);
        assert_eq!(e.bounds(&fixed, &d).unwrap(), (-2, -1));
        assert_eq!(c(5).bounds(&none, &d), Err(Error::Unbounded(Variable::carry(5))));
    }

    #[test]
    fn binary_assignment_checked() {
        let mut a = Assignment::new();
        assert!(a.set(Variable::p(1), 2).is_err());
        assert!(a.set(Variable::carry(1), 2).is_ok());
        assert!(a.set(Variable::carry(1), -1).is_err());
    }

    #[test]
    fn rendering() {
        assert_eq!(Polynomial::zero().to_string(), "0");
        assert_eq!((k(-1) + p(1) - q(2) * 3).to_string(), "-1 + p1 - 3*q2");
        assert_eq!((-p(1)).to_string(), "-p1");
    }
}
