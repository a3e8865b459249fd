//! Bitwise factoring equations.
//!
//! Column `m` of the long multiplication `p * q` gives
//!
//! ```text
//! sum_{k = a_m}^{b_m} p_{m-k} q_k + C_m = n_m + 2 C_{m+1}
//! ```
//!
//! with `a_m = max(0, m - l_p + 1)`, `b_m = min(m, l_q - 1)` and cumulative
//! (non-binary) carries `C_m`. `C_0` is identically zero. The system built
//! here also carries the closing row `m = l_p + l_q - 1`, which has no cross
//! terms and pins the terminal carry to the top bit of `n`.

use std::fmt;

use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::polynomial::{Assignment, Polynomial, Variable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum SplitCase {
    /// `l_n = l_p + l_q`
    A,
    /// `l_n = l_p + l_q - 1`
    B,
}

/// Candidate bit lengths of the two factors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct BitSplit {
    pub n_bits: u32,
    pub p_bits: u32,
    pub q_bits: u32,
    pub case: SplitCase,
}

impl BitSplit {
    /// Validates the split invariants for an `n_bits`-bit number.
    pub fn new(n_bits: u32, p_bits: u32, q_bits: u32) -> Result<Self> {
        let case = if n_bits == p_bits + q_bits {
            SplitCase::A
        } else if n_bits + 1 == p_bits + q_bits {
            SplitCase::B
        } else {
            return Err(Error::InvalidInput(format!(
                "split ({p_bits}, {q_bits}) cannot produce a {n_bits}-bit number"
            )));
        };
        let half = n_bits.div_ceil(2);
        if q_bits < 2 || p_bits < 2 || q_bits > half || half > p_bits {
            return Err(Error::InvalidInput(format!(
                "split ({p_bits}, {q_bits}) violates l_q <= {half} <= l_p with both >= 2"
            )));
        }
        Ok(Self { n_bits, p_bits, q_bits, case })
    }

    /// Number of columns with cross terms, `l_p + l_q - 1`.
    pub fn columns(&self) -> u32 {
        self.p_bits + self.q_bits - 1
    }

    /// Index of the terminal carry, `l_p + l_q - 1`.
    pub fn terminal_carry(&self) -> u32 {
        self.p_bits + self.q_bits - 1
    }

    pub fn terminal_value(&self) -> i64 {
        match self.case {
            SplitCase::A => 1,
            SplitCase::B => 0,
        }
    }

    /// `(a_m, b_m)` of column `m`; the range is empty when `a_m > b_m`.
    pub fn cross_range(&self, m: u32) -> (u32, u32) {
        let lo = (m + 1).saturating_sub(self.p_bits);
        let hi = m.min(self.q_bits - 1);
        (lo, hi)
    }

    /// Middle bits of `p`, i.e. `p_1 .. p_{l_p - 2}`.
    pub fn free_p_bits(&self) -> impl Iterator<Item = Variable> {
        (1..self.p_bits - 1).map(Variable::p)
    }

    pub fn free_q_bits(&self) -> impl Iterator<Item = Variable> {
        (1..self.q_bits - 1).map(Variable::q)
    }
}

impl fmt::Display for BitSplit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {:?})", self.p_bits, self.q_bits, self.case)
    }
}

pub fn bit_length(n: u64) -> u32 {
    64 - n.leading_zeros()
}

pub fn bit(n: u64, i: u32) -> u8 {
    if i >= 64 {
        0
    } else {
        ((n >> i) & 1) as u8
    }
}

/// All admissible bit splits of `n`, balanced split first, then by
/// decreasing `l_q` (and increasing `l_p` within one `l_q`).
pub fn enumerate_splits(n: u64) -> Result<Vec<BitSplit>> {
    if n % 2 == 0 || n < 9 {
        return Err(Error::InvalidInput(format!(
            "splits need an odd n >= 9, got {n}"
        )));
    }
    let ln = bit_length(n);
    let half = ln.div_ceil(2);
    let mut out = Vec::new();
    for lq in (2..=half).rev() {
        for lp in [ln - lq, ln - lq + 1] {
            if let Ok(split) = BitSplit::new(ln, lp, lq) {
                out.push(split);
            }
        }
    }
    Ok(out)
}

/// One column equation, stored as `cross + C_m - n_m - 2 C_{m+1} = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactoringEquation {
    pub order: u32,
    /// Cross products `p_{m-k} q_k`, with the pre-fixed bits already set to 1.
    pub cross: Polynomial,
    pub carry_in: Option<Variable>,
    pub rhs_bit: u8,
    pub carry_out: Option<Variable>,
}

impl FactoringEquation {
    /// Left-hand side: cross terms plus the incoming carry.
    pub fn lhs(&self) -> Polynomial {
        match self.carry_in {
            Some(c) => self.cross.clone() + Polynomial::var(c),
            None => self.cross.clone(),
        }
    }

    /// `lhs - n_m - 2 C_{m+1}`, which must vanish.
    pub fn polynomial(&self) -> Polynomial {
        let mut e = self.lhs() - self.rhs_bit as i128;
        if let Some(c) = self.carry_out {
            e = e - Polynomial::var(c) * 2;
        }
        e
    }
}

impl Serialize for FactoringEquation {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(4))?;
        map.serialize_entry("m", &self.order)?;
        map.serialize_entry("lhs", &self.lhs())?;
        map.serialize_entry("n_m", &self.rhs_bit)?;
        map.serialize_entry("carry_out", &self.carry_out.map(|c| c.to_string()))?;
        map.end()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquationSystem {
    #[serde(skip)]
    pub n: u64,
    pub split: BitSplit,
    pub equations: Vec<FactoringEquation>,
    #[serde(skip)]
    pub variables: Vec<Variable>,
    pub fixed: Assignment,
}

impl EquationSystem {
    pub fn carries(&self) -> impl Iterator<Item = Variable> + '_ {
        self.variables.iter().copied().filter(Variable::is_carry)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("equation system serialises")
    }
}

fn factor_bit(var: Variable, bits: u32) -> Polynomial {
    if var.index == 0 || var.index == bits - 1 {
        Polynomial::constant(1)
    } else {
        Polynomial::var(var)
    }
}

/// Builds the column equations of `n` for the given split.
pub fn build_equations(n: u64, split: BitSplit) -> Result<EquationSystem> {
    if bit_length(n) != split.n_bits {
        return Err(Error::InvalidInput(format!(
            "{n} has {} bits, split expects {}",
            bit_length(n),
            split.n_bits
        )));
    }
    let (lp, lq) = (split.p_bits, split.q_bits);
    let terminal = split.terminal_carry();
    let mut equations = Vec::with_capacity(terminal as usize + 1);
    for m in 0..=terminal {
        let (lo, hi) = split.cross_range(m);
        let mut cross = Polynomial::zero();
        for k in lo..=hi {
            let pj = factor_bit(Variable::p(m - k), lp);
            let qk = factor_bit(Variable::q(k), lq);
            cross += &pj.multiply(&qk).expect("binary products never fail");
        }
        equations.push(FactoringEquation {
            order: m,
            cross,
            carry_in: (m > 0).then(|| Variable::carry(m)),
            rhs_bit: bit(n, m),
            carry_out: (m < terminal).then(|| Variable::carry(m + 1)),
        });
    }

    let mut variables: Vec<Variable> = split.free_p_bits().chain(split.free_q_bits()).collect();
    variables.extend((1..=terminal).map(Variable::carry));

    let mut fixed = Assignment::new();
    for v in [
        Variable::p(0),
        Variable::p(lp - 1),
        Variable::q(0),
        Variable::q(lq - 1),
    ] {
        fixed.set(v, 1)?;
    }
    fixed.set(Variable::carry(terminal), split.terminal_value())?;

    Ok(EquationSystem { n, split, equations, variables, fixed })
}

/// One cell of the banded coefficient matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixEntry {
    Zero,
    One,
    Bit(Variable),
}

impl fmt::Display for MatrixEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatrixEntry::Zero => write!(f, "0"),
            MatrixEntry::One => write!(f, "1"),
            MatrixEntry::Bit(v) => write!(f, "{v}"),
        }
    }
}

impl Serialize for MatrixEntry {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

fn carry_label(c: Option<Variable>) -> String {
    c.map_or_else(|| "0".to_owned(), |v| v.to_string())
}

/// `Q p + C_in = n + 2 C_out`: row `m` of `Q` holds `q_{m-j}` in column `j`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatrixView {
    pub q_matrix: Vec<Vec<MatrixEntry>>,
    pub p_vector: Vec<MatrixEntry>,
    pub carry_in: Vec<String>,
    pub rhs: Vec<u8>,
    pub carry_out: Vec<String>,
}

impl MatrixView {
    pub fn rows(&self) -> usize {
        self.q_matrix.len()
    }

    pub fn cols(&self) -> usize {
        self.p_vector.len()
    }
}

impl fmt::Display for MatrixView {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (m, row) in self.q_matrix.iter().enumerate() {
            let cells: Vec<String> = row.iter().map(|e| format!("{e:>3}")).collect();
            let p = self.p_vector.get(m).map(ToString::to_string).unwrap_or_default();
            writeln!(
                f,
                "[{} ] [{:>3}] + [{:>3}] = [{}] + 2 [{:>3}]",
                cells.join(""),
                p,
                self.carry_in[m],
                self.rhs[m],
                self.carry_out[m]
            )?;
        }
        Ok(())
    }
}

pub fn matrix_view(system: &EquationSystem) -> MatrixView {
    let split = system.split;
    let (lp, lq) = (split.p_bits, split.q_bits);
    let entry = |var: Variable, bits: u32| {
        if var.index == 0 || var.index == bits - 1 {
            MatrixEntry::One
        } else {
            MatrixEntry::Bit(var)
        }
    };
    let q_matrix = system
        .equations
        .iter()
        .map(|eq| {
            (0..lp)
                .map(|j| match eq.order.checked_sub(j) {
                    Some(k) if k < lq => entry(Variable::q(k), lq),
                    _ => MatrixEntry::Zero,
                })
                .collect()
        })
        .collect();
    MatrixView {
        q_matrix,
        p_vector: (0..lp).map(|j| entry(Variable::p(j), lp)).collect(),
        carry_in: system.equations.iter().map(|e| carry_label(e.carry_in)).collect(),
        rhs: system.equations.iter().map(|e| e.rhs_bit).collect(),
        carry_out: system.equations.iter().map(|e| carry_label(e.carry_out)).collect(),
    }
}
