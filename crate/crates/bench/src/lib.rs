//! Fixed instances shared by the benchmarks.

use stabilitylab_core::brw::ProgenyLaw;
use stabilitylab_core::problem::{self, Family, InputLaw, InputVector, ProblemInstance};

pub const SEED: u64 = 0x5eed;

/// A seeded instance of `family` with its input drawn from `law`.
pub fn fixture(family: Family, law: InputLaw) -> (ProblemInstance, InputVector) {
    let inst = ProblemInstance::new(family, law, SEED).expect("bench fixture within caps");
    let x = problem::sample_inputs(&inst).expect("bench fixture samples");
    (inst, x)
}

pub fn tsp(n: usize) -> (ProblemInstance, InputVector) {
    fixture(Family::Tsp { n, d: 2, q: 1.0 }, InputLaw::UNIT_UNIFORM)
}

pub fn mst(n: usize) -> (ProblemInstance, InputVector) {
    fixture(Family::Mst { n, d: 2, q: 1.0 }, InputLaw::UNIT_UNIFORM)
}

pub fn assignment(n: usize) -> (ProblemInstance, InputVector) {
    fixture(Family::Assignment { n }, InputLaw::UNIT_EXPONENTIAL)
}

pub fn sk(n: usize) -> (ProblemInstance, InputVector) {
    fixture(Family::Sk { n }, InputLaw::STANDARD_GAUSSIAN)
}

pub fn brw(n: usize) -> (ProblemInstance, InputVector) {
    let progeny = ProgenyLaw::new(vec![0.0, 0.0, 1.0]).expect("binary law");
    fixture(
        Family::Brw { n, progeny, condition_on_survival: true, tree_seed: None },
        InputLaw::STANDARD_GAUSSIAN,
    )
}

pub fn wigner(n: usize) -> (ProblemInstance, InputVector) {
    fixture(Family::Wigner { n }, InputLaw::STANDARD_GAUSSIAN)
}
