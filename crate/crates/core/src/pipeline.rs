//! End-to-end factoring: classical simplification, then adiabatic evolution
//! over whatever the simplifier could not fix.

use serde::Serialize;

use crate::adiabatic::{evolve_with, AdiabaticTrace, EvolveOptions, Schedule};
use crate::equations::{bit_length, build_equations, enumerate_splits, BitSplit};
use crate::error::{Error, Result};
use crate::hamiltonian::{
    build_bitwise_hamiltonian, build_peng_hamiltonian, peng_residual, HamiltonianSpec, QubitMap,
    DEFAULT_QUBIT_CAP,
};
use crate::polynomial::{Assignment, Variable};
use crate::simplify::{init_bounds, propagate_with, refine_bounds, ResidualSystem, Rules};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    /// Classical simplification followed by the bitwise Hamiltonian.
    #[default]
    Hybrid,
    /// `(n - P Q)^2` over all middle bits, without simplification.
    Peng,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Method {
    ClassicalOnly,
    HybridAdiabatic,
    PengGlobal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub schedule: Schedule,
    pub qubit_cap: usize,
    /// Only this split is tried when set.
    pub split_override: Option<BitSplit>,
    /// Final-state probabilities above this are decoded and verified.
    pub threshold: f64,
    pub mode: Mode,
    pub rules: Rules,
    /// When no split verifies, the quantum stage is repeated this many times,
    /// doubling the anneal time and step count each round.
    pub anneal_doublings: u32,
    /// Record the instantaneous spectrum at every step of matrix-free runs.
    pub step_spectra: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            schedule: Schedule::default(),
            qubit_cap: DEFAULT_QUBIT_CAP,
            split_override: None,
            threshold: 0.2,
            mode: Mode::Hybrid,
            rules: Rules::default(),
            anneal_doublings: 4,
            step_spectra: true,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::InvalidInput(format!(
                "threshold {} not in (0, 1)",
                self.threshold
            )));
        }
        Ok(())
    }
}

/// Why a split did not produce the answer.
#[derive(Debug, Clone, PartialEq)]
pub struct Attempt {
    pub split: BitSplit,
    /// Anneal time of the failed run; `None` when the classical stage or the
    /// Hamiltonian construction failed.
    pub total_time: Option<f64>,
    pub error: Error,
}

#[derive(Debug, Clone)]
pub struct FactorResult {
    pub n: u64,
    pub p: u64,
    pub q: u64,
    pub method: Method,
    pub split: Option<BitSplit>,
    pub residual_vars: usize,
    pub qubits: usize,
    pub final_fidelity: Option<f64>,
    pub verified: bool,
    /// Both factors are prime.
    pub biprime: bool,
    pub residual: Option<ResidualSystem>,
    pub hamiltonian: Option<HamiltonianSpec>,
    pub trace: Option<AdiabaticTrace>,
    /// Splits tried before the successful one.
    pub attempts: Vec<Attempt>,
}

impl FactorResult {
    /// `{n, p, q, method, split, residual_vars, qubits, final_fidelity, verified}`.
    pub fn summary(&self) -> serde_json::Value {
        serde_json::json!({
            "n": self.n,
            "p": self.p,
            "q": self.q,
            "method": self.method,
            "split": self.split.map(|s| [s.p_bits, s.q_bits]),
            "residual_vars": self.residual_vars,
            "qubits": self.qubits,
            "final_fidelity": self.final_fidelity,
            "verified": self.verified,
        })
    }

    fn trivial(n: u64, p: u64, q: u64) -> Self {
        let (p, q) = (p.min(q), p.max(q));
        Self {
            n,
            p,
            q,
            method: Method::ClassicalOnly,
            split: None,
            residual_vars: 0,
            qubits: 0,
            final_fidelity: None,
            verified: p * q == n,
            biprime: is_prime(p) && is_prime(q),
            residual: None,
            hamiltonian: None,
            trace: None,
            attempts: Vec::new(),
        }
    }
}

/// Factors read from a basis state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Decoded {
    pub p: u64,
    pub q: u64,
    /// The completed assignment satisfies every residual equation.
    pub satisfies_residual: bool,
}

impl Decoded {
    pub fn verifies(&self, n: u64) -> bool {
        self.p.checked_mul(self.q) == Some(n)
    }
}

fn register(values: &Assignment, bits: u32, var: fn(u32) -> Variable) -> Result<u64> {
    (0..bits).try_fold(0u64, |acc, j| {
        let v = var(j);
        let bit = values.get(v).ok_or(Error::Unassigned(v))?;
        Ok(acc | (bit as u64) << j)
    })
}

/// Reads the free variables from basis state `index`, replays the
/// simplifier's substitutions and assembles both factors.
pub fn decode(index: usize, map: &QubitMap, r: &ResidualSystem, split: BitSplit) -> Result<Decoded> {
    let dim = 1usize << map.len();
    if index >= dim {
        return Err(Error::InvalidInput(format!("basis state {index} outside dimension {dim}")));
    }
    let full = r.complete(&map.assignment(index))?;
    Ok(Decoded {
        p: register(&full, split.p_bits, Variable::p)?,
        q: register(&full, split.q_bits, Variable::q)?,
        satisfies_residual: r.is_satisfied_by(&full)?,
    })
}

/// [`decode`], rejecting states that violate a residual equation.
pub fn decode_solution(index: usize, map: &QubitMap, r: &ResidualSystem, split: BitSplit) -> Result<(u64, u64)> {
    let d = decode(index, map, r, split)?;
    if d.satisfies_residual {
        Ok((d.p, d.q))
    } else {
        Err(Error::NotASolution { index })
    }
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// Trial division; the smallest factor comes first.
pub fn brute_force_factor(n: u64) -> Result<(u64, u64)> {
    if n < 4 {
        return Err(Error::InvalidInput(format!("{n} has no proper factorisation")));
    }
    let mut d = 2u64;
    while d * d <= n {
        if n % d == 0 {
            return Ok((d, n / d));
        }
        d += 1;
    }
    Err(Error::PrimeOrNotBiprime(n))
}

struct Stage {
    residual: ResidualSystem,
    hamiltonian: Option<HamiltonianSpec>,
    trace: Option<AdiabaticTrace>,
    method: Method,
    found: (u64, u64),
}

/// A split whose classical stage left work for the quantum stage.
struct Pending {
    split: BitSplit,
    residual: ResidualSystem,
    hamiltonian: HamiltonianSpec,
    method: Method,
}

enum Prepared {
    Solved(Stage),
    Quantum(Pending),
}

/// Builds the equations of one split, refines the carry bounds and runs the
/// propagation rules.
pub fn classical_stage(n: u64, split: BitSplit, rules: Rules) -> Result<ResidualSystem> {
    let system = build_equations(n, split)?;
    let table = refine_bounds(&system, &init_bounds(split))?;
    propagate_with(&system, &table, rules)
}

fn prepare(n: u64, split: BitSplit, cfg: &PipelineConfig) -> Result<Prepared> {
    let (residual, method, hamiltonian) = match cfg.mode {
        Mode::Hybrid => {
            let r = classical_stage(n, split, cfg.rules)?;
            if r.is_solved() {
                let d = decode(0, &QubitMap::default(), &r, split)?;
                if !d.verifies(n) {
                    return Err(Error::NotASolution { index: 0 });
                }
                return Ok(Prepared::Solved(Stage {
                    residual: r,
                    hamiltonian: None,
                    trace: None,
                    method: Method::ClassicalOnly,
                    found: (d.p, d.q),
                }));
            }
            let h = build_bitwise_hamiltonian(&r)?;
            (r, Method::HybridAdiabatic, h)
        }
        Mode::Peng => {
            let r = peng_residual(n, split)?;
            let h = build_peng_hamiltonian(n, split, cfg.qubit_cap)?;
            (r, Method::PengGlobal, h)
        }
    };
    if hamiltonian.num_qubits > cfg.qubit_cap {
        return Err(Error::CapExceeded { needed: hamiltonian.num_qubits, cap: cfg.qubit_cap });
    }
    if hamiltonian.num_qubits == 0 {
        let d = decode(0, &hamiltonian.map, &residual, split)?;
        if !d.verifies(n) {
            return Err(Error::NotASolution { index: 0 });
        }
        return Ok(Prepared::Solved(Stage {
            residual,
            hamiltonian: Some(hamiltonian),
            trace: None,
            method,
            found: (d.p, d.q),
        }));
    }
    Ok(Prepared::Quantum(Pending { split, residual, hamiltonian, method }))
}

/// Evolves, then decodes and verifies every state above the threshold in
/// order of decreasing probability.
fn anneal(n: u64, job: &Pending, sched: &Schedule, cfg: &PipelineConfig) -> Result<Stage> {
    let opts = EvolveOptions {
        qubit_cap: cfg.qubit_cap,
        step_spectra: cfg.step_spectra,
        ..EvolveOptions::default()
    };
    let trace = evolve_with(&job.hamiltonian, sched, &opts)?;
    let probs = trace.final_probabilities();
    let mut picked: Vec<usize> = (0..probs.len()).filter(|&b| probs[b] > cfg.threshold).collect();
    picked.sort_by(|a, b| probs[*b].total_cmp(&probs[*a]));
    for b in picked {
        let d = decode(b, &job.hamiltonian.map, &job.residual, job.split)?;
        if d.verifies(n) {
            return Ok(Stage {
                residual: job.residual.clone(),
                hamiltonian: Some(job.hamiltonian.clone()),
                trace: Some(trace),
                method: job.method,
                found: (d.p, d.q),
            });
        }
    }
    let best = (0..probs.len()).max_by(|a, b| probs[*a].total_cmp(&probs[*b])).unwrap_or(0);
    Err(Error::NotASolution { index: best })
}

fn scaled(sched: &Schedule, round: u32) -> Schedule {
    Schedule {
        total_time: sched.total_time * f64::from(1u32 << round),
        steps: sched.steps << round,
        ..*sched
    }
}

fn finish(n: u64, split: BitSplit, stage: Stage, attempts: Vec<Attempt>) -> FactorResult {
    let (p, q) = (stage.found.0.min(stage.found.1), stage.found.0.max(stage.found.1));
    FactorResult {
        n,
        p,
        q,
        method: stage.method,
        split: Some(split),
        residual_vars: match stage.method {
            Method::PengGlobal => 0,
            _ => stage.residual.free.len(),
        },
        qubits: stage.hamiltonian.as_ref().map_or(0, |h| h.num_qubits),
        final_fidelity: stage.trace.as_ref().map(AdiabaticTrace::final_fidelity),
        verified: p * q == n,
        biprime: is_prime(p) && is_prime(q),
        residual: Some(stage.residual),
        hamiltonian: stage.hamiltonian,
        trace: stage.trace,
        attempts,
    }
}

/// Factors `n` into two factors `p <= q` with `p * q = n`.
///
/// Splits are tried in order. A split either resolves classically, fails,
/// or is annealed at the configured schedule. If nothing verifies, the
/// annealed splits are retried with the schedule doubled, up to
/// `anneal_doublings` times.
pub fn factor(n: u64, cfg: &PipelineConfig) -> Result<FactorResult> {
    cfg.validate()?;
    if n < 2 {
        return Err(Error::InvalidInput(format!("cannot factor {n}")));
    }
    if n % 2 == 0 {
        return if n == 2 {
            Err(Error::PrimeOrNotBiprime(n))
        } else {
            Ok(FactorResult::trivial(n, 2, n / 2))
        };
    }
    if n < 9 {
        return Err(Error::PrimeOrNotBiprime(n));
    }
    if bit_length(n) > 62 {
        return Err(Error::InvalidInput(format!("{n} is too large")));
    }
    let splits = match cfg.split_override {
        Some(split) => {
            if split.n_bits != bit_length(n) {
                return Err(Error::InvalidInput(format!(
                    "split ({}, {}) does not fit a {}-bit number",
                    split.p_bits,
                    split.q_bits,
                    bit_length(n)
                )));
            }
            vec![split]
        }
        None => enumerate_splits(n)?,
    };

    let mut attempts = Vec::new();
    let mut pending = Vec::new();
    for split in splits {
        match prepare(n, split, cfg) {
            Ok(Prepared::Solved(stage)) => return Ok(finish(n, split, stage, attempts)),
            Ok(Prepared::Quantum(job)) => match anneal(n, &job, &cfg.schedule, cfg) {
                Ok(stage) => return Ok(finish(n, split, stage, attempts)),
                Err(error) => {
                    attempts.push(Attempt { split, total_time: Some(cfg.schedule.total_time), error });
                    pending.push(job);
                }
            },
            Err(error) => attempts.push(Attempt { split, total_time: None, error }),
        }
    }
    for round in 1..=cfg.anneal_doublings {
        let sched = scaled(&cfg.schedule, round);
        for job in &pending {
            match anneal(n, job, &sched, cfg) {
                Ok(stage) => return Ok(finish(n, job.split, stage, attempts)),
                Err(error) => attempts.push(Attempt {
                    split: job.split,
                    total_time: Some(sched.total_time),
                    error,
                }),
            }
        }
    }
    if let Some(a) = attempts.iter().find(|a| matches!(a.error, Error::CapExceeded { .. })) {
        return Err(a.error.clone());
    }
    if let Some(a) = attempts.iter().find(|a| matches!(a.error, Error::Numerical(_))) {
        return Err(a.error.clone());
    }
    Err(Error::PrimeOrNotBiprime(n))
}
