//! Diagonal cost Hamiltonians built from residual equations.
//!
//! Every equation `e = 0` contributes `e^2` with each bit replaced by the
//! number operator `W = (I - Z)/2`. Qubit `i` of a basis label `|b_0 b_1 ...>`
//! is the `i`-th free variable, and `b_0` is the most significant bit of the
//! basis index.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};
use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

use crate::equations::{bit_length, BitSplit};
use crate::error::{Error, Result};
use crate::polynomial::{Assignment, Bound, Domains, Polynomial, Variable};
use crate::simplify::ResidualSystem;

/// Exact dyadic coefficient.
pub type Rational = Ratio<i128>;

/// Largest register [`to_matrix`] realises by default.
pub const DEFAULT_QUBIT_CAP: usize = 14;

/// A carry written as `offset + sum_t 2^t a_t` over ancilla bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CarryEncoding {
    pub carry: Variable,
    pub offset: i64,
    /// Ancilla `t` has weight `2^t`.
    pub ancillas: Vec<Variable>,
}

impl CarryEncoding {
    pub fn expression(&self) -> Polynomial {
        self.ancillas
            .iter()
            .enumerate()
            .fold(Polynomial::constant(self.offset as i128), |acc, (t, a)| {
                acc + Polynomial::var(*a) * (1i128 << t)
            })
    }

    /// Values the encoding can represent; may extend past the carry's range.
    pub fn covered(&self) -> Bound {
        Bound::new(self.offset, self.offset + (1i64 << self.ancillas.len()) - 1)
    }
}

/// Encodes a carry ranging over `[lo, hi]` with `ceil(log2(hi - lo + 1))`
/// ancillas numbered from `first_ancilla`.
pub fn encode_carry(carry: Variable, range: Bound, first_ancilla: u32) -> CarryEncoding {
    let span = (range.hi - range.lo).max(0) as u64;
    let width = if span == 0 { 0 } else { bit_length(span) };
    CarryEncoding {
        carry,
        offset: range.lo,
        ancillas: (0..width).map(|t| Variable::ancilla(first_ancilla + t)).collect(),
    }
}

/// Which variable each qubit holds, and how surviving carries are encoded.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct QubitMap {
    pub qubits: Vec<Variable>,
    pub carries: Vec<CarryEncoding>,
}

impl QubitMap {
    pub fn len(&self) -> usize {
        self.qubits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.qubits.is_empty()
    }

    pub fn qubit_of(&self, var: Variable) -> Option<usize> {
        self.qubits.iter().position(|v| *v == var)
    }

    /// Value of qubit `i` in basis state `index`.
    pub fn bit(&self, index: usize, qubit: usize) -> i64 {
        ((index >> (self.len() - 1 - qubit)) & 1) as i64
    }

    /// Values of every mapped variable (ancillas and decoded carries too)
    /// in basis state `index`.
    pub fn assignment(&self, index: usize) -> Assignment {
        let mut a: Assignment = self
            .qubits
            .iter()
            .enumerate()
            .map(|(i, v)| (*v, self.bit(index, i)))
            .collect();
        for enc in &self.carries {
            let value = enc.expression().evaluate(&a).expect("ancillas are mapped");
            a.set(enc.carry, value as i64).expect("carry values are non-negative");
        }
        a
    }

    /// Basis index whose qubits carry the given values.
    pub fn index_of(&self, values: &Assignment) -> Result<usize> {
        self.qubits.iter().try_fold(0usize, |acc, v| {
            let bit = values.get(*v).ok_or(Error::Unassigned(*v))?;
            Ok((acc << 1) | bit as usize)
        })
    }
}

impl Serialize for QubitMap {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(2))?;
        let qubits: Vec<String> = self.qubits.iter().map(ToString::to_string).collect();
        map.serialize_entry("qubits", &qubits)?;
        let carries: Vec<serde_json::Value> = self
            .carries
            .iter()
            .map(|c| {
                serde_json::json!({
                    "carry": c.carry.to_string(),
                    "offset": c.offset,
                    "ancillas": c.ancillas.iter().map(ToString::to_string).collect::<Vec<_>>(),
                })
            })
            .collect();
        map.serialize_entry("carries", &carries)?;
        map.end()
    }
}

/// `coeff * prod_{i in support} Z_i`; an empty support is the identity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PauliTerm {
    pub support: Vec<usize>,
    pub coeff: Rational,
}

impl PauliTerm {
    /// Value of the term on a basis state, given each qubit's Z eigenvalue.
    fn value(&self, z: &[i8]) -> Rational {
        let sign: i128 = self.support.iter().map(|&i| z[i] as i128).product();
        self.coeff * sign
    }
}

impl Serialize for PauliTerm {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(3))?;
        map.serialize_entry("z", &self.support)?;
        map.serialize_entry("coeff", &self.coeff.to_f64().unwrap_or(f64::NAN))?;
        map.serialize_entry("exact", &self.coeff.to_string())?;
        map.end()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    /// Transverse field `sum_i X_i`.
    Initial,
    /// Diagonal cost Hamiltonian.
    Final,
}

/// Final (diagonal) Hamiltonian plus the implicit transverse-field start.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianSpec {
    pub num_qubits: usize,
    /// Merged Z-string expansion, identity first.
    pub final_terms: Vec<PauliTerm>,
    pub map: QubitMap,
    /// Equations rewritten over qubit variables; `final = sum e^2`.
    pub encoded_equations: Vec<Polynomial>,
}

impl HamiltonianSpec {
    fn z_signs(&self, index: usize) -> Vec<i8> {
        (0..self.num_qubits)
            .map(|i| 1 - 2 * self.map.bit(index, i) as i8)
            .collect()
    }

    /// Exact energy of basis state `index` under the final Hamiltonian.
    pub fn energy(&self, index: usize) -> Rational {
        let z = self.z_signs(index);
        self.final_terms.iter().map(|t| t.value(&z)).sum()
    }

    pub fn dimension(&self) -> usize {
        1 << self.num_qubits
    }

    /// Diagonal of the final Hamiltonian.
    pub fn final_diagonal(&self) -> Vec<f64> {
        (0..self.dimension())
            .map(|b| self.energy(b).to_f64().unwrap_or(f64::NAN))
            .collect()
    }

    /// Basis states of zero energy, i.e. solutions of every equation.
    pub fn zero_energy_states(&self) -> Vec<usize> {
        (0..self.dimension()).filter(|&b| self.energy(b).is_zero()).collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "qubits": self.num_qubits,
            "map": self.map,
            "terms": self.final_terms,
        })
    }
}

/// Expands `poly` (over qubit-mapped binary variables) into Z strings using
/// `x = (1 - Z)/2` per factor.
fn z_expansion(poly: &Polynomial, map: &QubitMap) -> Result<Vec<PauliTerm>> {
    let mut acc: BTreeMap<(usize, Vec<usize>), Rational> = BTreeMap::new();
    let mut add = |support: Vec<usize>, c: Rational| {
        *acc.entry((support.len(), support)).or_insert_with(Rational::zero) += c;
    };
    add(Vec::new(), Rational::from_integer(poly.constant_term()));
    for (mono, c) in poly.terms() {
        let qubits = mono
            .vars()
            .iter()
            .map(|v| map.qubit_of(*v).ok_or(Error::Unassigned(*v)))
            .collect::<Result<Vec<_>>>()?;
        let d = qubits.len();
        let base = Rational::new(c, 1i128 << d);
        for mask in 0u64..(1 << d) {
            let mut support: Vec<usize> = (0..d)
                .filter(|i| mask >> i & 1 == 1)
                .map(|i| qubits[i])
                .collect();
            support.sort_unstable();
            let sign = if support.len() % 2 == 0 { 1 } else { -1 };
            add(support, base * sign);
        }
    }
    Ok(acc
        .into_iter()
        .filter(|(_, c)| !c.is_zero())
        .map(|((_, support), coeff)| PauliTerm { support, coeff })
        .collect())
}

fn encode(
    equations: &[Polynomial],
    free: &[Variable],
    carry_bounds: &Domains,
) -> Result<HamiltonianSpec> {
    let mut qubits: Vec<Variable> = free.iter().copied().filter(Variable::is_binary).collect();
    let mut carries = Vec::new();
    let mut next_ancilla = 0;
    for carry in free.iter().copied().filter(Variable::is_carry) {
        let range = carry_bounds.get(carry).ok_or(Error::Unbounded(carry))?;
        let enc = encode_carry(carry, range, next_ancilla);
        next_ancilla += enc.ancillas.len() as u32;
        qubits.extend(enc.ancillas.iter().copied());
        carries.push(enc);
    }
    let map = QubitMap { qubits, carries };

    let mut encoded_equations = Vec::with_capacity(equations.len());
    let mut total = Polynomial::zero();
    for eq in equations {
        let mut e = eq.clone();
        for enc in &map.carries {
            e = e.substitute(enc.carry, &enc.expression())?;
        }
        total += &e.square()?;
        encoded_equations.push(e);
    }
    Ok(HamiltonianSpec {
        num_qubits: map.len(),
        final_terms: z_expansion(&total, &map)?,
        map,
        encoded_equations,
    })
}

/// Sum of the squared residual equations. Surviving carries are
/// binary-encoded onto ancilla qubits after the free bits.
pub fn build_bitwise_hamiltonian(r: &ResidualSystem) -> Result<HamiltonianSpec> {
    if r.free.is_empty() {
        return Err(Error::NothingToEncode);
    }
    encode(&r.equations, &r.free, &r.carry_bounds)
}

/// The single global equation `n - P Q = 0` over the middle bits of both
/// factors, packaged as a residual system so decoding works unchanged.
pub fn peng_residual(n: u64, split: BitSplit) -> Result<ResidualSystem> {
    let (lp, lq) = (split.p_bits, split.q_bits);
    let register = |bits: u32, var: fn(u32) -> Variable| {
        (1..bits - 1).fold(
            Polynomial::constant(1 + (1i128 << (bits - 1))),
            |acc, j| acc + Polynomial::var(var(j)) * (1i128 << j),
        )
    };
    let p = register(lp, Variable::p);
    let q = register(lq, Variable::q);
    let eq = Polynomial::constant(n as i128) - p.multiply(&q)?;
    let mut fixed = Assignment::new();
    for v in [Variable::p(0), Variable::p(lp - 1), Variable::q(0), Variable::q(lq - 1)] {
        fixed.set(v, 1)?;
    }
    let equations = if eq.is_zero() { vec![] } else { vec![eq] };
    Ok(ResidualSystem {
        n,
        split,
        equations,
        free: split.free_p_bits().chain(split.free_q_bits()).collect(),
        eliminated: Vec::new(),
        fixed,
        carry_bounds: Domains::new(),
    })
}

/// `(n - P Q)^2` over the `l_p + l_q - 4` middle bits.
pub fn build_peng_hamiltonian(n: u64, split: BitSplit, cap: usize) -> Result<HamiltonianSpec> {
    let needed = (split.p_bits + split.q_bits) as usize - 4;
    if needed > cap {
        return Err(Error::CapExceeded { needed, cap });
    }
    let r = peng_residual(n, split)?;
    encode(&r.equations, &r.free, &r.carry_bounds)
}

/// Dense matrix of one part of the Hamiltonian.
pub fn to_matrix(h: &HamiltonianSpec, part: Part, cap: usize) -> Result<DMatrix<f64>> {
    if h.num_qubits > cap {
        return Err(Error::CapExceeded { needed: h.num_qubits, cap });
    }
    Ok(match part {
        Part::Final => DMatrix::from_diagonal(&h.final_diagonal().into()),
        Part::Initial => transverse_field(h.num_qubits),
    })
}

/// `sum_i X_i` on `k` qubits.
pub fn transverse_field(k: usize) -> DMatrix<f64> {
    let dim = 1usize << k;
    let mut m = DMatrix::zeros(dim, dim);
    for b in 0..dim {
        for i in 0..k {
            m[(b, b ^ (1 << i))] = 1.0;
        }
    }
    m
}
