//! Per-shot stabilizer simulation of noisy Clifford circuits with
//! classical feed-forward, plus deterministic parallel Monte-Carlo
//! sampling.
//!
//! The state is a standard destabilizer/stabilizer tableau with u64
//! bit-packed rows (register size is capped at 16 in practice). Each shot
//! draws from its own counter-derived ChaCha stream keyed on
//! (seed, shot index), so results are independent of the worker count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::circuit::{Circuit, DiscardReason, Instruction, Predicate, RecordId};
use crate::noise::{
    sample_gate_fault, sample_idle_faults, sample_mid_circuit_faults, sample_spam_fault,
    GateFault, NoiseModel,
};
use crate::pauli::Pauli;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EngineError {
    #[error("predicate references record r{0} which was never written")]
    MissingRecord(RecordId),
    #[error("verification repeat budget of {0} attempts exhausted")]
    RepeatBudgetExhausted(usize),
}

/// How verification-record failures are handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VerificationPolicy {
    /// Discard the shot at the first failed verification (default).
    #[default]
    Discard,
    /// Ignore verification outcomes; every shot completes.
    Keep,
    /// Resample the whole shot until all verifications pass.
    RepeatUntilSuccess,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub verification: VerificationPolicy,
}

/// Results of one shot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShotOutcome {
    /// One slot per declared record; `None` when the shot never reached
    /// the measurement (discarded earlier or branch not taken).
    pub records: Vec<Option<bool>>,
    pub discarded: Option<DiscardReason>,
    /// Pre-committed branch bits (post-selection emulation), one per
    /// declared branch.
    pub branch_commits: Vec<bool>,
    /// Which conditional blocks executed, in encounter order.
    pub executed_path: Vec<bool>,
    /// Attempts consumed under `RepeatUntilSuccess` (1 otherwise).
    pub attempts: u32,
}

impl ShotOutcome {
    pub fn record(&self, id: RecordId) -> Option<bool> {
        self.records.get(id).copied().flatten()
    }
}

/// Deterministic per-shot randomness stream: ChaCha keyed on the run seed
/// with the shot index as the stream counter.
pub fn shot_rng(seed: u64, shot_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(shot_index);
    rng
}

/// A Pauli fault injected at a fixed instruction, used by the exhaustive
/// fault-tolerance checker.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FaultInjection {
    /// Instruction index the fault attaches to.
    pub at: usize,
    /// Apply before the instruction (true) or after it (false).
    pub before: bool,
    pub paulis: Vec<(usize, Pauli)>,
}

/// Aaronson–Gottesman tableau over up to 64 qubits.
///
/// Rows 0..n are destabilizers, rows n..2n stabilizers; each row is an
/// X mask, a Z mask and a sign bit.
#[derive(Debug, Clone)]
pub struct StabilizerState {
    n: usize,
    x: Vec<u64>,
    z: Vec<u64>,
    r: Vec<bool>,
}

impl StabilizerState {
    /// All qubits in |0>.
    pub fn new(n: usize) -> Self {
        assert!(n <= 64);
        let rows = 2 * n;
        let mut state = StabilizerState { n, x: vec![0; rows], z: vec![0; rows], r: vec![false; rows] };
        for q in 0..n {
            state.x[q] = 1 << q; // destabilizer X_q
            state.z[n + q] = 1 << q; // stabilizer Z_q
        }
        state
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn apply_h(&mut self, q: usize) {
        let mask = 1u64 << q;
        for i in 0..2 * self.n {
            let xq = self.x[i] & mask != 0;
            let zq = self.z[i] & mask != 0;
            if xq && zq {
                self.r[i] = !self.r[i];
            }
            if xq != zq {
                self.x[i] ^= mask;
                self.z[i] ^= mask;
            }
        }
    }

    pub fn apply_cnot(&mut self, control: usize, target: usize) {
        let cm = 1u64 << control;
        let tm = 1u64 << target;
        for i in 0..2 * self.n {
            let xc = self.x[i] & cm != 0;
            let zt = self.z[i] & tm != 0;
            let xt = self.x[i] & tm != 0;
            let zc = self.z[i] & cm != 0;
            if xc && zt && (xt == zc) {
                self.r[i] = !self.r[i];
            }
            if xc {
                self.x[i] ^= tm;
            }
            if zt {
                self.z[i] ^= cm;
            }
        }
    }

    /// Applies a Pauli operator: flips the sign of every row that
    /// anticommutes with it.
    pub fn apply_pauli(&mut self, q: usize, p: Pauli) {
        let mask = 1u64 << q;
        for i in 0..2 * self.n {
            let anti = match p {
                Pauli::I => false,
                Pauli::X => self.z[i] & mask != 0,
                Pauli::Z => self.x[i] & mask != 0,
                Pauli::Y => ((self.x[i] ^ self.z[i]) & mask) != 0,
            };
            if anti {
                self.r[i] = !self.r[i];
            }
        }
    }

    /// Row product: row h <- row i · row h with exact sign bookkeeping.
    fn rowsum(&mut self, h: usize, i: usize) {
        let (x1, z1) = (self.x[i], self.z[i]);
        let (x2, z2) = (self.x[h], self.z[h]);
        let plus = (x1 & z1 & z2 & !x2) | (x1 & !z1 & x2 & z2) | (!x1 & z1 & x2 & !z2);
        let minus = (x1 & z1 & x2 & !z2) | (x1 & !z1 & !x2 & z2) | (!x1 & z1 & x2 & z2);
        let g = plus.count_ones() as i64 - minus.count_ones() as i64;
        let total = 2 * (self.r[h] as i64) + 2 * (self.r[i] as i64) + g;
        debug_assert_eq!(total.rem_euclid(2), 0);
        self.r[h] = total.rem_euclid(4) == 2;
        self.x[h] ^= x1;
        self.z[h] ^= z1;
    }

    /// Computational-basis measurement of one qubit. Random outcomes are
    /// drawn from `rng`; deterministic ones consume no randomness.
    pub fn measure_z<R: Rng + ?Sized>(&mut self, q: usize, rng: &mut R) -> bool {
        let n = self.n;
        let mask = 1u64 << q;
        let pivot = (n..2 * n).find(|&i| self.x[i] & mask != 0);
        match pivot {
            Some(p) => {
                // Outcome is random: update all other rows that anticommute
                // with Z_q, move the stabilizer into the destabilizer slot,
                // and replace it with ±Z_q. Row p-n is skipped: it may
                // anticommute with row p and is overwritten below anyway.
                for i in 0..2 * n {
                    if i != p && i != p - n && self.x[i] & mask != 0 {
                        self.rowsum(i, p);
                    }
                }
                self.x[p - n] = self.x[p];
                self.z[p - n] = self.z[p];
                self.r[p - n] = self.r[p];
                let outcome = rng.random_bool(0.5);
                self.x[p] = 0;
                self.z[p] = mask;
                self.r[p] = outcome;
                outcome
            }
            None => {
                // Deterministic: accumulate the product of stabilizers whose
                // destabilizer partner anticommutes with Z_q in a scratch row.
                self.scratch_measure(mask)
            }
        }
    }

    fn scratch_measure(&mut self, mask: u64) -> bool {
        let n = self.n;
        let rows = 2 * n;
        self.x.push(0);
        self.z.push(0);
        self.r.push(false);
        for i in 0..n {
            if self.x[i] & mask != 0 {
                self.rowsum(rows, i + n);
            }
        }
        let out = self.r[rows];
        self.x.pop();
        self.z.pop();
        self.r.pop();
        out
    }

    /// X-basis measurement via the Hadamard conjugation identity.
    pub fn measure_x<R: Rng + ?Sized>(&mut self, q: usize, rng: &mut R) -> bool {
        self.apply_h(q);
        let out = self.measure_z(q, rng);
        self.apply_h(q);
        out
    }

    /// Projective reset to |0>: measure and flip on outcome 1.
    pub fn reset<R: Rng + ?Sized>(&mut self, q: usize, rng: &mut R) {
        if self.measure_z(q, rng) {
            self.apply_pauli(q, Pauli::X);
        }
    }
}

struct ShotRun<'a> {
    circuit: &'a Circuit,
    model: &'a NoiseModel,
    options: RunOptions,
    injection: Option<&'a FaultInjection>,
}

impl ShotRun<'_> {
    fn execute<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<ShotOutcome, EngineError> {
        let circuit = self.circuit;
        let n = circuit.n_qubits();
        let data_qubits = circuit.data_qubits();
        let mut state = StabilizerState::new(n);
        let mut outcome = ShotOutcome {
            records: vec![None; circuit.records().len()],
            discarded: None,
            branch_commits: (0..circuit.n_branches()).map(|_| rng.random_bool(0.5)).collect(),
            executed_path: Vec::new(),
            attempts: 1,
        };
        // Depth of enclosing skipped conditionals; instructions only
        // execute at depth 0.
        let mut skip_depth = 0usize;

        for (idx, instr) in circuit.instructions().iter().enumerate() {
            if skip_depth > 0 {
                match instr {
                    Instruction::ConditionalBegin { .. } => skip_depth += 1,
                    Instruction::ConditionalEnd => skip_depth -= 1,
                    _ => {}
                }
                continue;
            }
            if let Some(inj) = self.injection {
                if inj.at == idx && inj.before {
                    for &(q, p) in &inj.paulis {
                        state.apply_pauli(q, p);
                    }
                }
            }
            match instr {
                Instruction::PrepareZero { qubit } => {
                    state.reset(*qubit, rng);
                    if sample_spam_fault(self.model.p_init, rng) {
                        state.apply_pauli(*qubit, Pauli::X);
                    }
                }
                Instruction::Reset { qubit } => {
                    state.reset(*qubit, rng);
                    if sample_spam_fault(self.model.p_init, rng) {
                        state.apply_pauli(*qubit, Pauli::X);
                    }
                }
                Instruction::Hadamard { .. }
                | Instruction::PauliX { .. }
                | Instruction::PauliY { .. }
                | Instruction::PauliZ { .. }
                | Instruction::Cnot { .. } => {
                    self.apply_gate(&mut state, instr);
                    if let Some(fault) = sample_gate_fault(instr, self.model, rng).expect("gate") {
                        let ops = instr.operands();
                        match fault {
                            GateFault::Single(p) => state.apply_pauli(ops[0], p),
                            GateFault::Two(a, b) => {
                                state.apply_pauli(ops[0], a);
                                state.apply_pauli(ops[1], b);
                            }
                        }
                    }
                    for q in sample_idle_faults(instr, n, self.model, rng) {
                        state.apply_pauli(q, Pauli::Z);
                    }
                }
                Instruction::MeasureZ { qubit, record } | Instruction::MeasureX { qubit, record } => {
                    if sample_spam_fault(self.model.p_meas, rng) {
                        // X flip before a computational readout; the dual
                        // flip for a native X-basis readout.
                        let flip = if matches!(instr, Instruction::MeasureZ { .. }) {
                            Pauli::X
                        } else {
                            Pauli::Z
                        };
                        state.apply_pauli(*qubit, flip);
                    }
                    let bit = if matches!(instr, Instruction::MeasureZ { .. }) {
                        state.measure_z(*qubit, rng)
                    } else {
                        state.measure_x(*qubit, rng)
                    };
                    outcome.records[*record] = Some(bit);
                    if bit && self.options.verification != VerificationPolicy::Keep {
                        if let Some(reason) = circuit.records()[*record].verification {
                            outcome.discarded = Some(reason);
                            return Ok(outcome);
                        }
                    }
                }
                Instruction::MidCircuitBlock => {
                    for (q, p) in sample_mid_circuit_faults(&data_qubits, self.model, rng) {
                        state.apply_pauli(q, p);
                    }
                }
                Instruction::ConditionalBegin { predicate } => {
                    let triggered = self.eval_any(predicate.records(), &outcome)?;
                    let take = match predicate {
                        Predicate::AnyRecordSet(_) => triggered,
                        Predicate::CommittedBranch { branch, .. } => {
                            let committed = outcome.branch_commits[*branch];
                            if committed != triggered
                                && self.options.verification != VerificationPolicy::Keep
                            {
                                outcome.discarded = Some(DiscardReason::PostselectBranch);
                                return Ok(outcome);
                            }
                            committed
                        }
                    };
                    outcome.executed_path.push(take);
                    if !take {
                        skip_depth = 1;
                    }
                }
                Instruction::ConditionalEnd => {}
            }
            if let Some(inj) = self.injection {
                if inj.at == idx && !inj.before {
                    for &(q, p) in &inj.paulis {
                        state.apply_pauli(q, p);
                    }
                }
            }
        }
        Ok(outcome)
    }

    fn apply_gate(&self, state: &mut StabilizerState, instr: &Instruction) {
        match *instr {
            Instruction::Hadamard { qubit } => state.apply_h(qubit),
            Instruction::PauliX { qubit } => state.apply_pauli(qubit, Pauli::X),
            Instruction::PauliY { qubit } => state.apply_pauli(qubit, Pauli::Y),
            Instruction::PauliZ { qubit } => state.apply_pauli(qubit, Pauli::Z),
            Instruction::Cnot { control, target } => state.apply_cnot(control, target),
            _ => unreachable!(),
        }
    }

    fn eval_any(&self, records: &[RecordId], outcome: &ShotOutcome) -> Result<bool, EngineError> {
        let mut any = false;
        for &r in records {
            match outcome.records.get(r).copied().flatten() {
                Some(bit) => any |= bit,
                None => return Err(EngineError::MissingRecord(r)),
            }
        }
        Ok(any)
    }
}

/// Executes one shot with the given randomness stream.
pub fn run_shot<R: Rng + ?Sized>(
    circuit: &Circuit,
    model: &NoiseModel,
    rng: &mut R,
) -> Result<ShotOutcome, EngineError> {
    run_shot_with(circuit, model, rng, RunOptions::default(), None)
}

/// Full-control shot execution: verification policy and optional fault
/// injection.
pub fn run_shot_with<R: Rng + ?Sized>(
    circuit: &Circuit,
    model: &NoiseModel,
    rng: &mut R,
    options: RunOptions,
    injection: Option<&FaultInjection>,
) -> Result<ShotOutcome, EngineError> {
    let run = ShotRun { circuit, model, options, injection };
    if options.verification == VerificationPolicy::RepeatUntilSuccess {
        const MAX_ATTEMPTS: usize = 10_000;
        for attempt in 1..=MAX_ATTEMPTS {
            let mut outcome = run.execute(rng)?;
            if outcome.discarded.is_none() {
                outcome.attempts = attempt as u32;
                return Ok(outcome);
            }
        }
        Err(EngineError::RepeatBudgetExhausted(MAX_ATTEMPTS))
    } else {
        run.execute(rng)
    }
}

/// Runs `shots` shots and returns the outcomes in shot-index order.
///
/// Shot i draws from `shot_rng(seed, i)`, so the result multiset (and this
/// canonical ordering) is identical for every worker count.
pub fn run_many(
    circuit: &Circuit,
    model: &NoiseModel,
    shots: u64,
    seed: u64,
    workers: usize,
) -> Result<Vec<ShotOutcome>, EngineError> {
    run_many_map(circuit, model, shots, seed, workers, RunOptions::default(), |_, o| o)
}

/// Parallel shot runner mapping each outcome through `f` (e.g. a decoder)
/// before collection; results are in shot-index order.
pub fn run_many_map<T, F>(
    circuit: &Circuit,
    model: &NoiseModel,
    shots: u64,
    seed: u64,
    workers: usize,
    options: RunOptions,
    f: F,
) -> Result<Vec<T>, EngineError>
where
    T: Send,
    F: Fn(u64, ShotOutcome) -> T + Sync,
{
    let workers = workers.max(1);
    let shots_usize = usize::try_from(shots).expect("shot count fits usize");
    let mut results: Vec<Option<T>> = Vec::with_capacity(shots_usize);
    results.resize_with(shots_usize, || None);

    let chunk = shots_usize.div_ceil(workers).max(1);
    let mut chunks: Vec<(usize, &mut [Option<T>])> = Vec::new();
    let mut rest: &mut [Option<T>] = &mut results;
    let mut start = 0usize;
    while !rest.is_empty() {
        let take = chunk.min(rest.len());
        let (head, tail) = rest.split_at_mut(take);
        chunks.push((start, head));
        start += take;
        rest = tail;
    }

    let error = std::sync::Mutex::new(None::<EngineError>);
    std::thread::scope(|scope| {
        for (chunk_start, slot) in chunks {
            let f = &f;
            let error = &error;
            scope.spawn(move || {
                for (offset, out) in slot.iter_mut().enumerate() {
                    let shot = (chunk_start + offset) as u64;
                    let mut rng = shot_rng(seed, shot);
                    match run_shot_with(circuit, model, &mut rng, options, None) {
                        Ok(o) => *out = Some(f(shot, o)),
                        Err(e) => {
                            *error.lock().unwrap() = Some(e);
                            return;
                        }
                    }
                }
            });
        }
    });
    if let Some(e) = error.into_inner().unwrap() {
        return Err(e);
    }
    Ok(results.into_iter().map(|o| o.expect("all shots completed")).collect())
}

/// Spools raw outcomes to a compact binary log: a 16-byte header, then one
/// record per shot (discard tag byte, then the record bits packed LSB
/// first, absent records written as 0 after the presence bitmap).
pub fn spool_outcomes<W: std::io::Write + ?Sized>(
    outcomes: &[ShotOutcome],
    n_records: usize,
    writer: &mut W,
) -> std::io::Result<()> {
    writer.write_all(b"STNSPOOL")?;
    writer.write_all(&(n_records as u32).to_le_bytes())?;
    writer.write_all(&(outcomes.len() as u32).to_le_bytes())?;
    let bytes_per_mask = n_records.div_ceil(8);
    for out in outcomes {
        let tag: u8 = match out.discarded {
            None => 0,
            Some(DiscardReason::EncodingVerification) => 1,
            Some(DiscardReason::GhzFlag) => 2,
            Some(DiscardReason::PostselectBranch) => 3,
        };
        writer.write_all(&[tag])?;
        let mut present = vec![0u8; bytes_per_mask];
        let mut bits = vec![0u8; bytes_per_mask];
        for (i, rec) in out.records.iter().enumerate() {
            if let Some(bit) = rec {
                present[i / 8] |= 1 << (i % 8);
                if *bit {
                    bits[i / 8] |= 1 << (i % 8);
                }
            }
        }
        writer.write_all(&present)?;
        writer.write_all(&bits)?;
    }
    Ok(())
}
