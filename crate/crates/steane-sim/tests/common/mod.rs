//! Shared test support: a dense statevector oracle that computes exact
//! joint record distributions by branching on every measurement, plus the
//! circuit corpus and chi-square comparison used for engine equivalence.
//!
//! The oracle is deliberately independent of the tableau engine: it
//! stores 2^n complex amplitudes and enumerates measurement outcomes
//! exactly instead of sampling.

use std::collections::HashMap;

use steane_sim::circuit::{Circuit, CircuitBuilder, Instruction, Predicate, QubitRole};

pub type Amplitude = (f64, f64);

const EPS: f64 = 1e-12;

#[derive(Clone)]
struct DenseState {
    amps: Vec<Amplitude>,
}

impl DenseState {
    fn zeros(n: usize) -> Self {
        let mut amps = vec![(0.0, 0.0); 1 << n];
        amps[0] = (1.0, 0.0);
        DenseState { amps }
    }

    fn bit(index: usize, qubit: usize) -> bool {
        index & (1 << qubit) != 0
    }

    fn apply_h(&mut self, q: usize) {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        for i in 0..self.amps.len() {
            if !Self::bit(i, q) {
                let j = i | (1 << q);
                let (a, b) = (self.amps[i], self.amps[j]);
                self.amps[i] = (s * (a.0 + b.0), s * (a.1 + b.1));
                self.amps[j] = (s * (a.0 - b.0), s * (a.1 - b.1));
            }
        }
    }

    fn apply_x(&mut self, q: usize) {
        for i in 0..self.amps.len() {
            if !Self::bit(i, q) {
                self.amps.swap(i, i | (1 << q));
            }
        }
    }

    fn apply_z(&mut self, q: usize) {
        for (i, amp) in self.amps.iter_mut().enumerate() {
            if Self::bit(i, q) {
                *amp = (-amp.0, -amp.1);
            }
        }
    }

    fn apply_y(&mut self, q: usize) {
        // Y = iXZ
        for i in 0..self.amps.len() {
            if !Self::bit(i, q) {
                let j = i | (1 << q);
                let (a, b) = (self.amps[i], self.amps[j]);
                // |0> component gets -i * amp(|1>), |1> gets +i * amp(|0>).
                self.amps[i] = (b.1, -b.0);
                self.amps[j] = (-a.1, a.0);
            }
        }
    }

    fn apply_cnot(&mut self, control: usize, target: usize) {
        for i in 0..self.amps.len() {
            if Self::bit(i, control) && !Self::bit(i, target) {
                self.amps.swap(i, i | (1 << target));
            }
        }
    }

    fn prob_one(&self, q: usize) -> f64 {
        self.amps
            .iter()
            .enumerate()
            .filter(|(i, _)| Self::bit(*i, q))
            .map(|(_, a)| a.0 * a.0 + a.1 * a.1)
            .sum()
    }

    /// Projects onto the given outcome and renormalizes; returns the
    /// branch probability.
    fn collapse(&mut self, q: usize, outcome: bool) -> f64 {
        let p1 = self.prob_one(q);
        let p = if outcome { p1 } else { 1.0 - p1 };
        if p <= EPS {
            return 0.0;
        }
        let norm = 1.0 / p.sqrt();
        for (i, amp) in self.amps.iter_mut().enumerate() {
            if Self::bit(i, q) == outcome {
                *amp = (amp.0 * norm, amp.1 * norm);
            } else {
                *amp = (0.0, 0.0);
            }
        }
        p
    }
}

struct Branch {
    state: DenseState,
    weight: f64,
    records: Vec<Option<bool>>,
    /// Program counter of the next instruction.
    pc: usize,
    skip_depth: usize,
}

/// Exact joint distribution over record tuples of a noiseless circuit:
/// a depth-first enumeration that branches on every measurement, reset
/// and preparation of a possibly-entangled qubit.
pub fn exact_record_distribution(circuit: &Circuit) -> HashMap<Vec<Option<bool>>, f64> {
    assert!(circuit.n_qubits() <= 12, "oracle is exponential in qubits");
    assert_eq!(circuit.n_branches(), 0, "oracle does not model committed branches");
    let mut out: HashMap<Vec<Option<bool>>, f64> = HashMap::new();
    let mut stack = vec![Branch {
        state: DenseState::zeros(circuit.n_qubits()),
        weight: 1.0,
        records: vec![None; circuit.records().len()],
        pc: 0,
        skip_depth: 0,
    }];
    let instructions = circuit.instructions();

    while let Some(mut branch) = stack.pop() {
        let mut finished = true;
        while branch.pc < instructions.len() {
            let instr = &instructions[branch.pc];
            branch.pc += 1;
            if branch.skip_depth > 0 {
                match instr {
                    Instruction::ConditionalBegin { .. } => branch.skip_depth += 1,
                    Instruction::ConditionalEnd => branch.skip_depth -= 1,
                    _ => {}
                }
                continue;
            }
            match instr {
                Instruction::Hadamard { qubit } => branch.state.apply_h(*qubit),
                Instruction::PauliX { qubit } => branch.state.apply_x(*qubit),
                Instruction::PauliY { qubit } => branch.state.apply_y(*qubit),
                Instruction::PauliZ { qubit } => branch.state.apply_z(*qubit),
                Instruction::Cnot { control, target } => branch.state.apply_cnot(*control, *target),
                Instruction::MidCircuitBlock => {}
                Instruction::PrepareZero { qubit } | Instruction::Reset { qubit } => {
                    // Projective reset: branch on the pre-measurement value,
                    // flip the 1-branch back to |0>.
                    split_branch(&mut stack, &mut branch, *qubit, None, true);
                    if branch.weight <= EPS {
                        finished = false;
                        break;
                    }
                }
                Instruction::MeasureZ { qubit, record } => {
                    split_branch(&mut stack, &mut branch, *qubit, Some(*record), false);
                    if branch.weight <= EPS {
                        finished = false;
                        break;
                    }
                }
                Instruction::MeasureX { qubit, record } => {
                    branch.state.apply_h(*qubit);
                    split_branch(&mut stack, &mut branch, *qubit, Some(*record), false);
                    if branch.weight <= EPS {
                        finished = false;
                        break;
                    }
                    branch.state.apply_h(*qubit);
                }
                Instruction::ConditionalBegin { predicate } => {
                    let taken = match predicate {
                        Predicate::AnyRecordSet(records) => records
                            .iter()
                            .any(|&r| branch.records[r].expect("predicate after record")),
                        Predicate::CommittedBranch { .. } => {
                            unreachable!("corpus avoids committed branches")
                        }
                    };
                    if !taken {
                        branch.skip_depth = 1;
                    }
                }
                Instruction::ConditionalEnd => {}
            }
        }
        if finished {
            *out.entry(branch.records).or_insert(0.0) += branch.weight;
        }
    }
    out
}

/// Branches the current path on a computational measurement of `qubit`.
/// The 0-outcome continues in `branch`; the 1-outcome (if it has weight)
/// is pushed on the stack. `flip_one` converts the measurement into a
/// projective reset.
fn split_branch(
    stack: &mut Vec<Branch>,
    branch: &mut Branch,
    qubit: usize,
    record: Option<usize>,
    flip_one: bool,
) {
    let p1 = branch.state.prob_one(qubit);
    if p1 > EPS {
        let mut one = Branch {
            state: branch.state.clone(),
            weight: branch.weight * p1,
            records: branch.records.clone(),
            pc: branch.pc,
            skip_depth: branch.skip_depth,
        };
        one.state.collapse(qubit, true);
        if flip_one {
            one.state.apply_x(qubit);
        }
        if let Some(r) = record {
            one.records[r] = Some(true);
        }
        stack.push(one);
    }
    let p0 = 1.0 - p1;
    if p0 > EPS {
        branch.state.collapse(qubit, false);
        branch.weight *= p0;
        if let Some(r) = record {
            branch.records[r] = Some(false);
        }
    } else {
        // The 0-branch is impossible; mark it dead.
        branch.weight = 0.0;
    }
}

/// Chi-square goodness-of-fit of sampled record tuples against the exact
/// distribution. Returns (statistic, degrees of freedom, p-value); bins
/// with expected count below 5 are pooled. A p-value of 1.0 with zero
/// degrees of freedom means the distribution is deterministic and every
/// sample matched.
pub fn chi_square_vs_exact(
    exact: &HashMap<Vec<Option<bool>>, f64>,
    samples: &[Vec<Option<bool>>],
) -> (f64, usize, f64) {
    let shots = samples.len() as f64;
    let mut counts: HashMap<&Vec<Option<bool>>, u64> = HashMap::new();
    for s in samples {
        assert!(
            exact.get(s).copied().unwrap_or(0.0) > 0.0,
            "engine produced an impossible record tuple {s:?}"
        );
        *counts.entry(s).or_insert(0) += 1;
    }
    let mut bins: Vec<(f64, f64)> = Vec::new(); // (observed, expected)
    let mut pool_obs = 0.0;
    let mut pool_exp = 0.0;
    for (tuple, &p) in exact {
        let expected = p * shots;
        let observed = counts.get(tuple).copied().unwrap_or(0) as f64;
        if expected >= 5.0 {
            bins.push((observed, expected));
        } else {
            pool_obs += observed;
            pool_exp += expected;
        }
    }
    if pool_exp > 0.0 {
        bins.push((pool_obs, pool_exp));
    }
    if bins.len() <= 1 {
        return (0.0, 0, 1.0);
    }
    let stat: f64 = bins.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    let dof = bins.len() - 1;
    let dist = statrs::distribution::ChiSquared::new(dof as f64).unwrap();
    let p_value = 1.0 - statrs::distribution::ContinuousCDF::cdf(&dist, stat);
    (stat, dof, p_value)
}

fn aux(n: usize) -> Vec<QubitRole> {
    vec![QubitRole::Auxiliary; n]
}

/// The fixed equivalence corpus: >= 20 circuits on at most 5 qubits
/// covering entanglement, both measurement bases, resets, feed-forward
/// and injected Paulis, plus seeded random Clifford circuits.
pub fn equivalence_corpus() -> Vec<(String, Circuit)> {
    let mut corpus: Vec<(String, Circuit)> = Vec::new();

    let mut b = CircuitBuilder::new(2, aux(2));
    b.prepare_plus(0);
    b.prepare_zero(1);
    b.cnot(0, 1);
    b.measure_z(0);
    b.measure_z(1);
    corpus.push(("bell pair, Z readout".into(), b.finish()));

    for n in [3usize, 4, 5] {
        let mut b = CircuitBuilder::new(n, aux(n));
        b.prepare_plus(0);
        for q in 1..n {
            b.prepare_zero(q);
        }
        for q in 0..n - 1 {
            b.cnot(q, q + 1);
        }
        for q in 0..n {
            b.measure_z(q);
        }
        corpus.push((format!("GHZ ladder n={n}"), b.finish()));
    }

    let mut b = CircuitBuilder::new(1, aux(1));
    b.prepare_plus(0);
    b.measure_x_native(0);
    corpus.push(("plus state, native X readout".into(), b.finish()));

    let mut b = CircuitBuilder::new(1, aux(1));
    b.prepare_plus(0);
    b.measure_z(0);
    corpus.push(("uniform single-qubit readout".into(), b.finish()));

    // Teleportation with feed-forward corrections; deterministic output.
    let mut b = CircuitBuilder::new(3, aux(3));
    b.prepare_zero(0);
    b.push(Instruction::PauliX { qubit: 0 });
    b.prepare_plus(1);
    b.prepare_zero(2);
    b.cnot(1, 2);
    b.cnot(0, 1);
    b.hadamard(0);
    let r0 = b.measure_z(0);
    let r1 = b.measure_z(1);
    b.begin_conditional(Predicate::AnyRecordSet(vec![r1]));
    b.push(Instruction::PauliX { qubit: 2 });
    b.end_conditional();
    b.begin_conditional(Predicate::AnyRecordSet(vec![r0]));
    b.push(Instruction::PauliZ { qubit: 2 });
    b.end_conditional();
    b.measure_z(2);
    corpus.push(("teleportation with feed-forward".into(), b.finish()));

    // Measure, reset, reuse.
    let mut b = CircuitBuilder::new(2, aux(2));
    b.prepare_plus(0);
    b.prepare_zero(1);
    b.cnot(0, 1);
    b.measure_z(0);
    b.reset(0);
    b.measure_z(0);
    b.measure_z(1);
    corpus.push(("reset and reuse".into(), b.finish()));

    // Parity check onto an ancilla.
    let mut b = CircuitBuilder::new(5, aux(5));
    for q in 0..4 {
        b.prepare_zero(q);
    }
    b.push(Instruction::PauliX { qubit: 1 });
    b.push(Instruction::PauliX { qubit: 3 });
    b.prepare_zero(4);
    for q in 0..4 {
        b.cnot(q, 4);
    }
    b.measure_z(4);
    corpus.push(("deterministic parity check".into(), b.finish()));

    // GHZ with an end-to-end flag verification.
    let mut b = CircuitBuilder::new(4, aux(4));
    b.prepare_plus(0);
    b.prepare_zero(1);
    b.prepare_zero(2);
    b.cnot(0, 1);
    b.cnot(1, 2);
    b.prepare_zero(3);
    b.cnot(0, 3);
    b.cnot(2, 3);
    b.measure_z(3);
    for q in 0..3 {
        b.measure_z(q);
    }
    corpus.push(("GHZ with flag parity check".into(), b.finish()));

    // Injected Paulis on eigenstates.
    let mut b = CircuitBuilder::new(2, aux(2));
    b.prepare_zero(0);
    b.push(Instruction::PauliY { qubit: 0 });
    b.prepare_plus(1);
    b.push(Instruction::PauliZ { qubit: 1 });
    b.measure_z(0);
    b.hadamard(1);
    b.measure_z(1);
    corpus.push(("injected Pauli flips".into(), b.finish()));

    // Bell pair in the X basis (correlated uniform outcomes).
    let mut b = CircuitBuilder::new(2, aux(2));
    b.prepare_plus(0);
    b.prepare_zero(1);
    b.cnot(0, 1);
    b.measure_x_basis(0);
    b.measure_x_basis(1);
    corpus.push(("bell pair, X readout".into(), b.finish()));

    // Seeded random Clifford circuits with mid-circuit measurements.
    for seed in 0..10u64 {
        corpus.push((format!("random clifford #{seed}"), random_circuit(seed)));
    }
    corpus
}

fn random_circuit(seed: u64) -> Circuit {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0xC0FFEE ^ seed);
    let n = rng.random_range(3..=5);
    let mut b = CircuitBuilder::new(n, aux(n));
    for q in 0..n {
        if rng.random_bool(0.5) {
            b.prepare_plus(q);
        } else {
            b.prepare_zero(q);
        }
    }
    let mut first_record = None;
    for _ in 0..16 {
        match rng.random_range(0..8) {
            0 | 1 => b.hadamard(rng.random_range(0..n)),
            2 | 3 => {
                let c = rng.random_range(0..n);
                let mut t = rng.random_range(0..n);
                while t == c {
                    t = rng.random_range(0..n);
                }
                b.cnot(c, t);
            }
            4 => b.push(Instruction::PauliX { qubit: rng.random_range(0..n) }),
            5 => b.push(Instruction::PauliZ { qubit: rng.random_range(0..n) }),
            6 => {
                let q = rng.random_range(0..n);
                let r = b.measure_z(q);
                if first_record.is_none() {
                    first_record = Some(r);
                }
                b.reset(q);
            }
            _ => {
                let q = rng.random_range(0..n);
                let r = b.measure_z(q);
                if first_record.is_none() {
                    first_record = Some(r);
                }
            }
        }
    }
    if let Some(r) = first_record {
        if seed.is_multiple_of(2) {
            b.begin_conditional(Predicate::AnyRecordSet(vec![r]));
            b.push(Instruction::PauliX { qubit: rng.random_range(0..n) });
            b.end_conditional();
        }
    }
    for q in 0..n {
        b.measure_z(q);
    }
    b.finish()
}
