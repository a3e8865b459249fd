//! Piecewise-constant adiabatic evolution from `sum_i X_i` to a diagonal
//! cost Hamiltonian.
//!
//! Step `m = 1..=M` applies `U_m = exp(-i H_m tau)` with
//! `H_m = (1 - m/M) H_i + (m/M) H_f` and `tau = T/M`. Both parts are real
//! symmetric, so every step goes through a real eigendecomposition.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::hamiltonian::{to_matrix, HamiltonianSpec, Part, DEFAULT_QUBIT_CAP};
use crate::sparse;

pub type C64 = Complex<f64>;

/// Largest register handled by the dense-only diagnostics (interpolated
/// matrices, spectra and time estimates).
pub const DENSE_QUBIT_CAP: usize = 10;

/// Relative tolerance under which two eigenvalues count as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Interpolation {
    #[default]
    Linear,
}

impl Interpolation {
    pub fn s(&self, step: usize, steps: usize) -> f64 {
        match self {
            Interpolation::Linear => step as f64 / steps as f64,
        }
    }
}

/// How Hamiltonian coefficients are read when they generate time evolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FrequencyUnit {
    /// Coefficients are cyclic frequencies: `U = exp(-i 2 pi H t)`.
    #[default]
    Hertz,
    /// Coefficients are angular frequencies: `U = exp(-i H t)`.
    Angular,
}

impl FrequencyUnit {
    pub fn to_angular(&self) -> f64 {
        match self {
            FrequencyUnit::Hertz => 2.0 * PI,
            FrequencyUnit::Angular => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub total_time: f64,
    pub steps: usize,
    pub interpolation: Interpolation,
    pub unit: FrequencyUnit,
}

impl Schedule {
    pub fn new(total_time: f64, steps: usize) -> Result<Self> {
        if !(total_time.is_finite() && total_time >= 0.0) {
            return Err(Error::InvalidInput(format!("total time {total_time} must be >= 0")));
        }
        if steps == 0 {
            return Err(Error::InvalidInput("schedule needs at least one step".into()));
        }
        Ok(Self {
            total_time,
            steps,
            interpolation: Interpolation::Linear,
            unit: FrequencyUnit::Hertz,
        })
    }

    pub fn with_unit(mut self, unit: FrequencyUnit) -> Self {
        self.unit = unit;
        self
    }

    pub fn step_duration(&self) -> f64 {
        self.total_time / self.steps as f64
    }
}

impl Default for Schedule {
    fn default() -> Self {
        Self::new(3.5, 20).expect("valid default schedule")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amplitudes: DVector<C64>,
}

impl StateVector {
    pub fn from_amplitudes(amplitudes: DVector<C64>) -> Self {
        Self { amplitudes }
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    pub fn dimension(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }
}

/// `|- ... ->` on `k` qubits, the ground state of `sum_i X_i`.
pub fn prepare_initial_ground(k: usize) -> StateVector {
    let dim = 1usize << k;
    let amp = 1.0 / (dim as f64).sqrt();
    StateVector::from_amplitudes(DVector::from_fn(dim, |b, _| {
        let sign = if b.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
        C64::new(sign * amp, 0.0)
    }))
}

/// `(1 - s) H_i + s H_f`.
pub fn interpolate(h: &HamiltonianSpec, s: f64) -> Result<DMatrix<f64>> {
    Interpolator::new(h, DENSE_QUBIT_CAP).map(|i| i.at(s))
}

struct Interpolator {
    initial: DMatrix<f64>,
    final_diag: Vec<f64>,
}

impl Interpolator {
    fn new(h: &HamiltonianSpec, cap: usize) -> Result<Self> {
        Ok(Self {
            initial: to_matrix(h, Part::Initial, cap)?,
            final_diag: h.final_diagonal(),
        })
    }

    fn at(&self, s: f64) -> DMatrix<f64> {
        let mut m = &self.initial * (1.0 - s);
        for (i, e) in self.final_diag.iter().enumerate() {
            m[(i, i)] += s * e;
        }
        m
    }

    fn derivative(&self) -> DMatrix<f64> {
        let mut m = -&self.initial;
        for (i, e) in self.final_diag.iter().enumerate() {
            m[(i, i)] += e;
        }
        m
    }
}

/// Eigenpairs with eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct Eigensystem {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

impl Eigensystem {
    pub fn of(h: &DMatrix<f64>) -> Result<Self> {
        if !h.iter().all(|x| x.is_finite()) {
            return Err(Error::Numerical("hamiltonian has non-finite entries".into()));
        }
        let eig = SymmetricEigen::new(h.clone());
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        if !values.iter().all(|x| x.is_finite()) {
            return Err(Error::Numerical("eigendecomposition did not converge".into()));
        }
        let vectors = DMatrix::from_fn(h.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
        Ok(Self { values, vectors })
    }

    /// Number of eigenvalues degenerate with the lowest one.
    pub fn ground_multiplicity(&self) -> usize {
        ground_multiplicity(&self.values)
    }

    /// Computational-basis distribution of the (uniformly mixed) ground
    /// eigenspace; basis-independent even when the ground level is degenerate.
    pub fn ground_distribution(&self) -> Vec<f64> {
        let g = self.ground_multiplicity();
        (0..self.vectors.nrows())
            .map(|b| (0..g).map(|j| self.vectors[(b, j)].powi(2)).sum::<f64>() / g as f64)
            .collect()
    }

    /// `U = V exp(-i Lambda tau) V^T`.
    pub fn propagator(&self, tau: f64) -> DMatrix<C64> {
        let v = self.vectors.map(|x| C64::new(x, 0.0));
        let mut scaled = v.clone();
        for (j, e) in self.values.iter().enumerate() {
            let phase = C64::from_polar(1.0, -e * tau);
            scaled.column_mut(j).iter_mut().for_each(|z| *z *= phase);
        }
        scaled * v.transpose()
    }

    /// `V exp(-i Lambda tau) V^T psi` without forming the propagator.
    pub fn apply(&self, psi: &StateVector, tau: f64) -> StateVector {
        let re = psi.amplitudes.map(|a| a.re);
        let im = psi.amplitudes.map(|a| a.im);
        let vt = self.vectors.transpose();
        let (cre, cim) = (&vt * re, &vt * im);
        let mut rot_re = DVector::zeros(cre.len());
        let mut rot_im = DVector::zeros(cre.len());
        for j in 0..cre.len() {
            let c = C64::new(cre[j], cim[j]) * C64::from_polar(1.0, -self.values[j] * tau);
            rot_re[j] = c.re;
            rot_im[j] = c.im;
        }
        let (ore, oim) = (&self.vectors * rot_re, &self.vectors * rot_im);
        StateVector::from_amplitudes(DVector::from_fn(ore.len(), |i, _| C64::new(ore[i], oim[i])))
    }
}

fn is_degenerate(a: f64, b: f64) -> bool {
    (a - b).abs() <= DEGENERACY_TOL * a.abs().max(b.abs()).max(1.0)
}

pub fn ground_multiplicity(sorted: &[f64]) -> usize {
    sorted.iter().take_while(|e| is_degenerate(**e, sorted[0])).count()
}

/// Distance from the ground level to the first level not degenerate with it;
/// infinite when there is none.
pub fn gap_above_ground(sorted: &[f64]) -> f64 {
    let g = ground_multiplicity(sorted);
    sorted.get(g).map_or(f64::INFINITY, |e| e - sorted[0])
}

/// `E_1 - E_0` for `s < 1`. At `s = 1` the ground multiplet is skipped, since
/// a degenerate final ground level is expected when both factor orders are
/// solutions.
pub fn spectral_gap(sorted: &[f64], s: f64) -> f64 {
    if s >= 1.0 {
        gap_above_ground(sorted)
    } else {
        sorted.get(1).map_or(f64::INFINITY, |e| e - sorted[0])
    }
}

/// `exp(-i H tau)` for a real symmetric `H`.
pub fn step_unitary(h: &DMatrix<f64>, tau: f64) -> Result<DMatrix<C64>> {
    Ok(Eigensystem::of(h)?.propagator(tau))
}

/// `max |(U^dagger U - I)_{ij}|`.
pub fn unitarity_error(u: &DMatrix<C64>) -> f64 {
    let prod = u.adjoint() * u;
    let id = DMatrix::<C64>::identity(u.nrows(), u.ncols());
    (prod - id).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `sum p q / sqrt(sum p^2 sum q^2)`.
pub fn fidelity(expected: &[f64], actual: &[f64]) -> Result<f64> {
    if expected.len() != actual.len() {
        return Err(Error::InvalidInput(format!(
            "distributions differ in length ({} vs {})",
            expected.len(),
            actual.len()
        )));
    }
    if expected.iter().chain(actual).any(|x| *x < 0.0 || !x.is_finite()) {
        return Err(Error::InvalidInput("probabilities must be finite and >= 0".into()));
    }
    let dot: f64 = expected.iter().zip(actual).map(|(a, b)| a * b).sum();
    let ne: f64 = expected.iter().map(|a| a * a).sum();
    let na: f64 = actual.iter().map(|a| a * a).sum();
    if ne == 0.0 || na == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok((dot / (ne * na).sqrt()).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub step: usize,
    pub s: f64,
    /// Levels of the step Hamiltonian, ascending: the full spectrum for dense
    /// runs, the two lowest for matrix-free runs.
    pub eigenvalues: Vec<f64>,
    pub gap: f64,
    /// Overlap of the state's distribution with the instantaneous ground
    /// distribution.
    pub fidelity: f64,
    pub probabilities: Vec<f64>,
    pub norm: f64,
    /// `max |U^dagger U - I|` of this step, when it was checked.
    pub unitarity_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdiabaticTrace {
    pub num_qubits: usize,
    pub schedule: Schedule,
    /// Row 0 is the prepared initial state, row `m` follows `U_m`.
    pub steps: Vec<TraceStep>,
    pub final_state: StateVector,
}

impl AdiabaticTrace {
    pub fn last(&self) -> &TraceStep {
        self.steps.last().expect("trace has the initial row")
    }

    pub fn final_probabilities(&self) -> &[f64] {
        &self.last().probabilities
    }

    pub fn final_fidelity(&self) -> f64 {
        self.last().fidelity
    }

    pub fn max_unitarity_error(&self) -> Option<f64> {
        self.steps
            .iter()
            .filter_map(|s| s.unitarity_error)
            .reduce(f64::max)
    }

    pub fn max_norm_deviation(&self) -> f64 {
        self.steps.iter().map(|s| (s.norm - 1.0).abs()).fold(0.0, f64::max)
    }

    /// Columns: `step, s, E_0.., gap, fidelity, P_0..`. Every basis state
    /// gets a `P` column; `E` columns follow the recorded levels.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let dim = 1usize << self.num_qubits;
        let levels = self.steps.iter().map(|r| r.eigenvalues.len()).max().unwrap_or(0);
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["step".to_owned(), "s".to_owned()];
        header.extend((0..levels).map(|j| format!("E_{j}")));
        header.push("gap".into());
        header.push("fidelity".into());
        header.extend((0..dim).map(|j| format!("P_{j}")));
        w.write_record(&header)?;
        for row in &self.steps {
            let mut rec = vec![row.step.to_string(), row.s.to_string()];
            rec.extend(row.eigenvalues.iter().map(f64::to_string));
            rec.resize(2 + levels, String::new());
            rec.push(row.gap.to_string());
            rec.push(row.fidelity.to_string());
            rec.extend(row.probabilities.iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolveOptions {
    pub qubit_cap: usize,
    /// Registers up to this size use dense eigendecompositions; larger ones
    /// are evolved matrix-free.
    pub dense_max_qubits: usize,
    /// Propagators are formed and checked for unitarity up to this size.
    pub unitarity_check_max_qubits: usize,
    /// Solve for the instantaneous ground state at every step of a
    /// matrix-free run. When off, intermediate rows carry no levels and a
    /// `NaN` gap and fidelity; the final row is always exact.
    pub step_spectra: bool,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            qubit_cap: DEFAULT_QUBIT_CAP,
            dense_max_qubits: 8,
            unitarity_check_max_qubits: 8,
            step_spectra: true,
        }
    }
}

pub fn evolve(h: &HamiltonianSpec, sched: &Schedule) -> Result<AdiabaticTrace> {
    evolve_with(h, sched, &EvolveOptions::default())
}

/// Runs the schedule from the ground state of `sum_i X_i`. Dense runs record
/// the full spectrum of every step; matrix-free runs record the two lowest
/// levels reachable from the initial state.
pub fn evolve_with(
    h: &HamiltonianSpec,
    sched: &Schedule,
    opts: &EvolveOptions,
) -> Result<AdiabaticTrace> {
    let k = h.num_qubits;
    if k == 0 {
        return Err(Error::NothingToEncode);
    }
    if k > opts.qubit_cap {
        return Err(Error::CapExceeded { needed: k, cap: opts.qubit_cap });
    }
    if k <= opts.dense_max_qubits {
        evolve_dense(h, sched, opts)
    } else {
        evolve_sparse(h, sched, opts.step_spectra)
    }
}

fn evolve_dense(h: &HamiltonianSpec, sched: &Schedule, opts: &EvolveOptions) -> Result<AdiabaticTrace> {
    let k = h.num_qubits;
    let interp = Interpolator::new(h, opts.qubit_cap)?;
    let tau = sched.step_duration() * sched.unit.to_angular();
    let check = k <= opts.unitarity_check_max_qubits;

    let mut psi = prepare_initial_ground(k);
    let mut steps = Vec::with_capacity(sched.steps + 1);
    let record = |step: usize, s: f64, eig: &Eigensystem, psi: &StateVector, u_err| -> Result<TraceStep> {
        let probabilities = psi.probabilities();
        Ok(TraceStep {
            step,
            s,
            gap: spectral_gap(&eig.values, s),
            fidelity: fidelity(&eig.ground_distribution(), &probabilities)?,
            eigenvalues: eig.values.clone(),
            probabilities,
            norm: psi.norm(),
            unitarity_error: u_err,
        })
    };

    let eig0 = Eigensystem::of(&interp.at(0.0))?;
    steps.push(record(0, 0.0, &eig0, &psi, None)?);
    for m in 1..=sched.steps {
        let s = sched.interpolation.s(m, sched.steps);
        let eig = Eigensystem::of(&interp.at(s))?;
        let u_err = if check {
            let u = eig.propagator(tau);
            psi = StateVector::from_amplitudes(&u * psi.amplitudes());
            Some(unitarity_error(&u))
        } else {
            psi = eig.apply(&psi, tau);
            None
        };
        steps.push(record(m, s, &eig, &psi, u_err)?);
    }
    Ok(AdiabaticTrace { num_qubits: k, schedule: *sched, steps, final_state: psi })
}

/// Ground distribution and lowest levels of a diagonal Hamiltonian.
fn diagonal_levels(diag: &[f64]) -> (Vec<f64>, Vec<f64>, f64) {
    let mut sorted = diag.to_vec();
    sorted.sort_by(f64::total_cmp);
    let g = ground_multiplicity(&sorted);
    let ground: Vec<f64> = diag
        .iter()
        .map(|e| if is_degenerate(*e, sorted[0]) { 1.0 / g as f64 } else { 0.0 })
        .collect();
    let gap = gap_above_ground(&sorted);
    sorted.truncate(2);
    (ground, sorted, gap)
}

fn evolve_sparse(h: &HamiltonianSpec, sched: &Schedule, step_spectra: bool) -> Result<AdiabaticTrace> {
    let k = h.num_qubits;
    let diag = h.final_diagonal();
    if !diag.iter().all(|x| x.is_finite()) {
        return Err(Error::Numerical("hamiltonian has non-finite entries".into()));
    }
    let tau = sched.step_duration() * sched.unit.to_angular();
    let mut psi = prepare_initial_ground(k);
    let mut warm: Vec<f64> = psi.amplitudes().iter().map(|a| a.re).collect();
    let mut steps = Vec::with_capacity(sched.steps + 1);

    for m in 0..=sched.steps {
        let s = if m == 0 { 0.0 } else { sched.interpolation.s(m, sched.steps) };
        let op = sparse::Operator { k, diag: &diag, s };
        if m > 0 {
            let amps: Vec<C64> = psi.amplitudes().iter().copied().collect();
            let next = sparse::chebyshev_propagate(&op, &amps, tau);
            psi = StateVector::from_amplitudes(DVector::from_vec(next));
        }
        let probabilities = psi.probabilities();
        let (ground, eigenvalues, gap) = if s >= 1.0 {
            diagonal_levels(&diag)
        } else if !step_spectra {
            steps.push(TraceStep {
                step: m,
                s,
                gap: f64::NAN,
                fidelity: f64::NAN,
                eigenvalues: Vec::new(),
                probabilities,
                norm: psi.norm(),
                unitarity_error: None,
            });
            continue;
        } else {
            let low = sparse::lowest_levels(&op, &warm)?;
            let gap = low.e1.map_or(f64::INFINITY, |e1| e1 - low.e0);
            let levels = std::iter::once(low.e0).chain(low.e1).collect();
            let dist = low.ground.iter().map(|x| x * x).collect();
            warm = low.ground;
            (dist, levels, gap)
        };
        steps.push(TraceStep {
            step: m,
            s,
            gap,
            fidelity: fidelity(&ground, &probabilities)?,
            eigenvalues,
            probabilities,
            norm: psi.norm(),
            unitarity_error: None,
        });
    }
    Ok(AdiabaticTrace { num_qubits: k, schedule: *sched, steps, final_state: psi })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumSample {
    pub s: f64,
    pub eigenvalues: Vec<f64>,
    pub gap: f64,
    pub ground_multiplicity: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumTrace {
    pub num_qubits: usize,
    pub samples: Vec<SpectrumSample>,
    pub min_gap: f64,
    pub min_gap_at: f64,
}

impl SpectrumTrace {
    /// Columns: `s, E_0.., gap, ground_multiplicity`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let dim = 1usize << self.num_qubits;
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["s".to_owned()];
        header.extend((0..dim).map(|j| format!("E_{j}")));
        header.push("gap".into());
        header.push("ground_multiplicity".into());
        w.write_record(&header)?;
        for row in &self.samples {
            let mut rec = vec![row.s.to_string()];
            rec.extend(row.eigenvalues.iter().map(f64::to_string));
            rec.push(row.gap.to_string());
            rec.push(row.ground_multiplicity.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn sample_points(samples: usize, s_max: f64) -> Vec<f64> {
    (0..samples)
        .map(|i| s_max * i as f64 / (samples - 1) as f64)
        .collect()
}

/// Spectrum of `H(s)` at `samples` evenly spaced points of `[0, 1]`.
pub fn spectrum_trace(h: &HamiltonianSpec, samples: usize) -> Result<SpectrumTrace> {
    if samples < 2 {
        return Err(Error::InvalidInput("spectrum needs at least two samples".into()));
    }
    let interp = Interpolator::new(h, DENSE_QUBIT_CAP)?;
    let samples = sample_points(samples, 1.0)
        .into_iter()
        .map(|s| {
            let eig = Eigensystem::of(&interp.at(s))?;
            Ok(SpectrumSample {
                s,
                gap: spectral_gap(&eig.values, s),
                ground_multiplicity: eig.ground_multiplicity(),
                eigenvalues: eig.values,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (min_gap_at, min_gap) = samples
        .iter()
        .map(|x| (x.s, x.gap))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("at least two samples");
    Ok(SpectrumTrace { num_qubits: h.num_qubits, samples, min_gap, min_gap_at })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeEstimateOptions {
    pub epsilon: f64,
    pub samples: usize,
    /// Gaps are sampled on `[0, s_max]`.
    pub s_max: f64,
    /// Gaps below this make the estimate unbounded.
    pub gap_floor: f64,
}

impl TimeEstimateOptions {
    pub fn new(epsilon: f64, samples: usize) -> Self {
        Self { epsilon, samples, s_max: 1.0, gap_floor: 1e-9 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeEstimate {
    /// `max ||dH/ds|| / (epsilon * gap^2)` in angular units; infinite when the
    /// gap fell under the floor.
    pub time: f64,
    pub min_gap: f64,
    pub min_gap_at: f64,
    /// Spectral norm of `H_f - H_i`.
    pub derivative_norm: f64,
}

impl TimeEstimate {
    pub fn is_bounded(&self) -> bool {
        self.time.is_finite()
    }
}

/// Adiabatic run-time estimate from the smallest sampled gap between the
/// ground level and the next distinct level. Diagnostic only.
pub fn adiabatic_time_estimate(h: &HamiltonianSpec, epsilon: f64, samples: usize) -> Result<TimeEstimate> {
    adiabatic_time_estimate_with(h, &TimeEstimateOptions::new(epsilon, samples))
}

pub fn adiabatic_time_estimate_with(h: &HamiltonianSpec, opts: &TimeEstimateOptions) -> Result<TimeEstimate> {
    if !(opts.epsilon > 0.0 && opts.epsilon < 1.0) {
        return Err(Error::InvalidInput(format!("epsilon {} not in (0, 1)", opts.epsilon)));
    }
    if opts.samples < 2 {
        return Err(Error::InvalidInput("time estimate needs at least two samples".into()));
    }
    let interp = Interpolator::new(h, DENSE_QUBIT_CAP)?;
    let derivative_norm = Eigensystem::of(&interp.derivative())?
        .values
        .iter()
        .map(|e| e.abs())
        .fold(0.0, f64::max);
    let mut min_gap = f64::INFINITY;
    let mut min_gap_at = 0.0;
    for s in sample_points(opts.samples, opts.s_max) {
        let gap = gap_above_ground(&Eigensystem::of(&interp.at(s))?.values);
        if gap < min_gap {
            min_gap = gap;
            min_gap_at = s;
        }
    }
    let time = if derivative_norm == 0.0 {
        0.0
    } else if min_gap < opts.gap_floor {
        f64::INFINITY
    } else {
        derivative_norm / (opts.epsilon * min_gap * min_gap)
    };
    Ok(TimeEstimate { time, min_gap, min_gap_at, derivative_norm })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{PauliTerm, QubitMap, Rational};
    use crate::polynomial::Variable;

    fn single_z() -> HamiltonianSpec {
        HamiltonianSpec {
            num_qubits: 1,
            final_terms: vec![PauliTerm { support: vec![0], coeff: Rational::from_integer(1) }],
            map: QubitMap { qubits: vec![Variable::p(1)], carries: vec![] },
            encoded_equations: vec![],
        }
    }

    fn close(a: &DMatrix<f64>, b: &DMatrix<f64>) -> bool {
        (a - b).amax() < 1e-12
    }

    #[test]
    fn interpolation_endpoints() {
        let h = single_z();
        let hi = to_matrix(&h, Part::Initial, 14).unwrap();
        let hf = to_matrix(&h, Part::Final, 14).unwrap();
        assert_eq!(interpolate(&h, 0.0).unwrap(), hi);
        assert_eq!(interpolate(&h, 1.0).unwrap(), hf);
        let mid = DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.5, -0.5]);
        assert!(close(&interpolate(&h, 0.5).unwrap(), &mid));
    }

    #[test]
    fn step_unitary_cases() {
        let x = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let id = step_unitary(&x, 0.0).unwrap();
        assert!((id - DMatrix::<C64>::identity(2, 2)).camax() < 1e-12);

        let u = step_unitary(&x, PI / 2.0).unwrap();
        let want = x.map(|v| C64::new(0.0, -v));
        assert!((u - want).iter().all(|z| z.norm() < 1e-12));

        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![0.3, -1.2]));
        let u = step_unitary(&d, 0.7).unwrap();
        assert!((u[(0, 0)] - C64::from_polar(1.0, -0.21)).norm() < 1e-12);
        assert!((u[(1, 1)] - C64::from_polar(1.0, 0.84)).norm() < 1e-12);
        assert!(u[(0, 1)].norm() < 1e-12);
    }

    #[test]
    fn initial_ground_state() {
        let one = prepare_initial_ground(1).probabilities();
        assert_eq!(one.len(), 2);
        let a = prepare_initial_ground(1);
        let s = 1.0 / 2f64.sqrt();
        assert!((a.amplitudes()[0].re - s).abs() < 1e-15);
        assert!((a.amplitudes()[1].re + s).abs() < 1e-15);

        let three = prepare_initial_ground(3);
        for (b, amp) in three.amplitudes().iter().enumerate() {
            let sign = if (b as u32).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            assert!((amp.re - sign / 8f64.sqrt()).abs() < 1e-15);
        }
        let hx = crate::hamiltonian::transverse_field(3).map(|x| C64::new(x, 0.0));
        let image = hx * three.amplitudes();
        assert!((image + three.amplitudes() * C64::new(3.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn fidelity_cases() {
        let p = [0.2, 0.3, 0.5];
        assert!((fidelity(&p, &p).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(fidelity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let mut th = vec![0.0; 8];
        th[3] = 0.5;
        th[4] = 0.5;
        let uniform = vec![0.125; 8];
        assert!((fidelity(&th, &uniform).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(fidelity(&[0.0, 0.0], &[0.5, 0.5]), Err(Error::ZeroNorm));
        assert!(fidelity(&[1.0], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn zero_time_keeps_initial_state() {
        let h = single_z();
        let trace = evolve(&h, &Schedule::new(0.0, 1).unwrap()).unwrap();
        assert_eq!(trace.steps.len(), 2);
        for p in trace.final_probabilities() {
            assert!((p - 0.5).abs() < 1e-14);
        }
    }

    fn residual_551() -> HamiltonianSpec {
        use crate::equations::{build_equations, enumerate_splits};
        use crate::simplify::{init_bounds, propagate, refine_bounds};
        let split = enumerate_splits(551).unwrap()[0];
        let sys = build_equations(551, split).unwrap();
        let r = propagate(&sys, &refine_bounds(&sys, &init_bounds(split)).unwrap()).unwrap();
        crate::hamiltonian::build_bitwise_hamiltonian(&r).unwrap()
    }

    #[test]
    fn matrix_free_run_matches_dense_run() {
        let h = residual_551();
        let sched = Schedule::default();
        let dense = evolve(&h, &sched).unwrap();
        let opts = EvolveOptions { dense_max_qubits: 0, ..EvolveOptions::default() };
        let free = evolve_with(&h, &sched, &opts).unwrap();
        assert_eq!(free.steps.len(), dense.steps.len());
        for (a, b) in dense.steps.iter().zip(&free.steps) {
            for (x, y) in a.probabilities.iter().zip(&b.probabilities) {
                assert!((x - y).abs() < 1e-10, "step {} {x} {y}", a.step);
            }
            assert!((a.fidelity - b.fidelity).abs() < 1e-8, "step {}", a.step);
            assert!((a.eigenvalues[0] - b.eigenvalues[0]).abs() < 1e-9);
            assert!((a.norm - b.norm).abs() < 1e-10);
        }
        assert_eq!(dense.last().gap, free.last().gap);
        let mut buf = Vec::new();
        free.write_csv(&mut buf).unwrap();
        let header = String::from_utf8(buf).unwrap().lines().next().unwrap().to_owned();
        assert_eq!(header, "step,s,E_0,E_1,gap,fidelity,P_0,P_1,P_2,P_3,P_4,P_5,P_6,P_7");
    }

    #[test]
    fn dense_trace_csv_layout() {
        let h = residual_551();
        let trace = evolve(&h, &Schedule::default()).unwrap();
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(header.len(), 2 + 8 + 2 + 8);
        assert_eq!(&header[..3], ["step", "s", "E_0"]);
        assert_eq!(&header[10..13], ["gap", "fidelity", "P_0"]);
        assert_eq!(lines.count(), 21);
    }

    #[test]
    fn gap_rules() {
        assert_eq!(spectral_gap(&[0.0, 0.0, 2.0], 1.0), 2.0);
        assert_eq!(spectral_gap(&[0.0, 0.0, 2.0], 0.5), 0.0);
        assert_eq!(gap_above_ground(&[1.0]), f64::INFINITY);
        assert_eq!(ground_multiplicity(&[-3.0, -1.0, -1.0]), 1);
    }

    #[test]
    fn transverse_spectrum_at_start() {
        let h = single_z();
        let st = spectrum_trace(&h, 3).unwrap();
        assert_eq!(st.samples.len(), 3);
        assert!((st.samples[0].eigenvalues[0] + 1.0).abs() < 1e-12);
        assert!(spectrum_trace(&h, 1).is_err());
    }

    #[test]
    fn time_estimate_trivial_cases() {
        let h = single_z();
        let loose = adiabatic_time_estimate(&h, 0.9, 11).unwrap();
        let tight = adiabatic_time_estimate(&h, 0.1, 11).unwrap();
        assert!(loose.is_bounded() && tight.is_bounded());
        assert!(loose.time < tight.time);
        assert!(adiabatic_time_estimate(&h, 1.0, 11).is_err());
    }
}
