//! Fixtures shared by the benchmarks.

use hafactor_core::hamiltonian::{build_bitwise_hamiltonian, HamiltonianSpec};
use hafactor_core::pipeline::classical_stage;
use hafactor_core::simplify::Rules;
use hafactor_core::{enumerate_splits, ResidualSystem};

/// Residual system and Hamiltonian of the first split of `n` that leaves
/// work for the quantum stage.
pub fn quantum_instance(n: u64) -> (ResidualSystem, HamiltonianSpec) {
    let r = enumerate_splits(n)
        .expect("odd n >= 9")
        .into_iter()
        .filter_map(|split| classical_stage(n, split, Rules::default()).ok())
        .find(|r| !r.is_solved())
        .expect("some split needs the quantum stage");
    let h = build_bitwise_hamiltonian(&r).expect("residual encodes");
    (r, h)
}
