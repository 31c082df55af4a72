//! Circuit builders: logical-state encoding, GHZ auxiliary preparation,
//! Steane and flagged syndrome-extraction cycles, final readout, and
//! whole-experiment composition under the 16-qubit register budget.
//!
//! The color-code transcriptions are load-bearing and frozen as golden
//! text fixtures under `tests/goldens/`; the exhaustive single-fault
//! suite verifies their fault tolerance.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{
    Circuit, CircuitBuilder, CircuitError, DiscardReason, Predicate, QubitRole, RecordId,
};
use crate::codes::{CodeKind, StabilizerCode, StabilizerFamily};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BuildError {
    #[error("encoding verification applies to the color code only")]
    VerifyOnRepetition,
    #[error("repetition-code experiments prepare |0>_L only (product states)")]
    RepetitionPlusL,
    #[error("the {0:?} code does not support the {1:?} half-cycle")]
    HalfMismatch(CodeKind, Half),
    #[error("{0:?} requires the color code")]
    ColorCodeOnly(Protocol),
    #[error("full Steane cycles require the color code; repetition codes use half-cycles")]
    FullCycleOnRepetition,
    #[error("GHZ auxiliary for d={0} must be flag-verified (single faults can reach weight 2)")]
    GhzFlagRequired(usize),
    #[error("GHZ auxiliary preparation is defined for repetition codes, not {0:?}")]
    GhzOnColor(CodeKind),
    #[error("protocol {protocol:?} is incompatible with code {code:?}")]
    ProtocolMismatch { protocol: Protocol, code: CodeKind },
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

/// Logical target states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LogicalState {
    #[serde(rename = "zero_L")]
    ZeroL,
    #[serde(rename = "plus_L")]
    PlusL,
}

/// The two halves of a Steane cycle. `DetectX` couples an auxiliary
/// |+>_L via data->aux CNOTs and reads the Z syndrome; `DetectZ` couples
/// an auxiliary |0>_L via aux->data CNOTs and reads the X syndrome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Half {
    DetectX,
    DetectZ,
}

impl Half {
    /// The stabilizer family whose syndrome this half reveals.
    pub fn family(self) -> StabilizerFamily {
        match self {
            Half::DetectX => StabilizerFamily::ZType,
            Half::DetectZ => StabilizerFamily::XType,
        }
    }
}

/// Branch handling for the flagged protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FlagMode {
    /// Conditionally execute the unflagged remeasurement in-shot.
    Adaptive,
    /// Pre-commit each round's branch and post-select consistent shots,
    /// mirroring the fixed-sequence hardware.
    EmulatePostselect,
}

/// Syndrome-extraction protocols.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    SteaneFull,
    SteaneHalf,
    FlagAdaptive,
    FlagPostselect,
}

/// Final transversal readout basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ReadoutBasis {
    Z,
    X,
}

/// Readout basis in which the target state's logical operator is
/// diagonal. For the phase-flip code Z_L = X_1, so its |0>_L is read in
/// the X basis.
pub fn readout_basis_for(code: &StabilizerCode, target: LogicalState) -> ReadoutBasis {
    let op = match target {
        LogicalState::ZeroL => code.logical_z(),
        LogicalState::PlusL => code.logical_x(),
    };
    if op.x_bits() == 0 {
        ReadoutBasis::Z
    } else {
        ReadoutBasis::X
    }
}

// --- Color-code transcription tables (0-indexed data qubits) ---

/// |+> seeds of the 8-CNOT encoding circuit (paper labels 1, 2, 4).
const ENCODE_SEEDS: [usize; 3] = [0, 1, 3];
/// The eight encoding CNOTs, in order.
const ENCODE_CNOTS: [(usize, usize); 8] =
    [(0, 4), (3, 4), (0, 2), (1, 2), (3, 5), (1, 5), (4, 6), (1, 6)];
/// Verification check support: Z3Z4Z7, a weight-3 logical-Z representative
/// chosen so every dangerous single-fault X spread of the encoding
/// anticommutes with it.
const ENCODE_VERIFY_SUPPORT: [usize; 3] = [2, 3, 6];

/// Flagged-readout schedule. Each part couples one family's ancillas to
/// the data in fixed stage order, wrapped by *paired* ancilla-to-ancilla
/// flag CNOTs (one opening before any dangerous fault window, one closing
/// after all of them). The pairing keeps every readout deterministic
/// (the conjugated ancilla operators cancel), while a fault inside the
/// wrapped window flips the partner ancilla exactly once. Coupling
/// orders are chosen so that every weight-2 hook lands on a flag-table
/// syndrome with the matching recovery and weight-3 hooks stay on
/// single-qubit-equivalent rows.
mod flag_schedule {
    /// Part 1 data-coupling orders: S_Z^(3), then S_X^(1), then S_Z^(2);
    /// flag pairs (X1-anc -> Z2-anc) and (X1-anc -> Z3-anc).
    pub const P1_SZ3: [usize; 4] = [5, 1, 2, 6];
    pub const P1_SX1: [usize; 4] = [0, 4, 2, 6];
    pub const P1_SZ2: [usize; 4] = [5, 3, 4, 6];
    /// Part 2 data-coupling orders: S_X^(2), then S_X^(3), then S_Z^(1);
    /// flag pairs (X2-anc -> Z1-anc) and (X3-anc -> Z1-anc).
    pub const P2_SX2: [usize; 4] = [5, 3, 4, 6];
    pub const P2_SX3: [usize; 4] = [5, 1, 2, 6];
    pub const P2_SZ1: [usize; 4] = [0, 4, 2, 6];
}

/// Record ids of one full six-generator readout, indexed by generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlagRoundRecords {
    /// S_X^(1..3) readouts.
    pub sx: [RecordId; 3],
    /// S_Z^(1..3) readouts.
    pub sz: [RecordId; 3],
}

impl FlagRoundRecords {
    pub fn all(&self) -> [RecordId; 6] {
        [self.sx[0], self.sx[1], self.sx[2], self.sz[0], self.sz[1], self.sz[2]]
    }
}

/// Decoder-facing description of one extraction round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RoundLayout {
    SteaneHalf { half: Half, aux: Vec<RecordId> },
    SteaneFull { detect_x_aux: Vec<RecordId>, detect_z_aux: Vec<RecordId> },
    Flag { flagged: FlagRoundRecords, unflagged: FlagRoundRecords, mode: FlagMode },
}

/// A composed experiment: the circuit plus everything the decoder needs.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub circuit: Circuit,
    pub code: StabilizerCode,
    pub target: LogicalState,
    pub readout_basis: ReadoutBasis,
    pub rounds: Vec<RoundLayout>,
    /// Final transversal data readout, one record per data qubit ascending.
    pub final_records: Vec<RecordId>,
    /// Human-readable register assignment, echoed into result metadata.
    pub layout_note: String,
}

/// Experiment shape, resolved from the user config by the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExperimentSpec {
    pub code: CodeKind,
    pub distance: usize,
    pub protocol: Protocol,
    pub initial_state: LogicalState,
    pub rounds: usize,
}

pub fn code_for(kind: CodeKind, distance: usize) -> Result<StabilizerCode, crate::codes::CodeError> {
    match kind {
        CodeKind::BitFlip => StabilizerCode::bit_flip(distance),
        CodeKind::PhaseFlip => StabilizerCode::phase_flip(distance),
        CodeKind::Color => Ok(StabilizerCode::color_code()),
    }
}

// --- Append-style builders over explicit qubit maps ---

/// Encodes the color-code |0>_L (or |+>_L via transversal Hadamards) on
/// `data`, optionally verifying with a flag ancilla that measures the
/// weight-3 check and discards on failure.
fn append_color_encode(
    b: &mut CircuitBuilder,
    data: &[usize; 7],
    state: LogicalState,
    verify: Option<usize>,
) {
    for (q, &phys) in data.iter().enumerate() {
        if ENCODE_SEEDS.contains(&q) {
            b.prepare_plus(phys);
        } else {
            b.prepare_zero(phys);
        }
    }
    for &(c, t) in &ENCODE_CNOTS {
        b.cnot(data[c], data[t]);
    }
    if let Some(v) = verify {
        b.prepare_zero(v);
        for &q in &ENCODE_VERIFY_SUPPORT {
            b.cnot(data[q], v);
        }
        b.measure_z_decl(v, Some(DiscardReason::EncodingVerification));
    }
    if state == LogicalState::PlusL {
        for &q in data {
            b.hadamard(q);
        }
    }
}

/// Repetition-code data encoding: |0>_L is the product state
/// |0...0> (bit-flip) or |+...+> (phase-flip).
fn append_repetition_encode(b: &mut CircuitBuilder, data: &[usize], kind: CodeKind) {
    for &q in data {
        match kind {
            CodeKind::BitFlip => b.prepare_zero(q),
            CodeKind::PhaseFlip => b.prepare_plus(q),
            CodeKind::Color => unreachable!(),
        }
    }
}

/// GHZ auxiliary logical |+>_L for a repetition code: Hadamard plus a
/// CNOT ladder, flag-verified when requested, Hadamard-conjugated for the
/// phase-flip code.
fn append_ghz_aux(b: &mut CircuitBuilder, aux: &[usize], kind: CodeKind, flag: Option<usize>) {
    b.prepare_plus(aux[0]);
    for &q in &aux[1..] {
        b.prepare_zero(q);
    }
    for w in aux.windows(2) {
        b.cnot(w[0], w[1]);
    }
    if let Some(f) = flag {
        // Z-parity check between the ends of the ladder heralds the
        // weight-2 spreads a single mid-ladder fault can cause.
        b.prepare_zero(f);
        b.cnot(aux[0], f);
        b.cnot(aux[aux.len() - 1], f);
        b.measure_z_decl(f, Some(DiscardReason::GhzFlag));
        b.reset(f);
    }
    if kind == CodeKind::PhaseFlip {
        for &q in aux {
            b.hadamard(q);
        }
    }
}

/// One Steane half-cycle on an already-encoded data block. Returns the
/// auxiliary readout records in data-qubit order.
fn append_steane_half(
    b: &mut CircuitBuilder,
    code: &StabilizerCode,
    data: &[usize],
    aux: &[usize],
    verify_or_flag: Option<usize>,
    half: Half,
) -> Vec<RecordId> {
    let n = code.n();
    match (code.kind(), half) {
        (CodeKind::Color, Half::DetectX) => {
            let aux7: [usize; 7] = aux.try_into().expect("seven auxiliary qubits");
            append_color_encode(b, &aux7, LogicalState::PlusL, verify_or_flag);
            for i in 0..n {
                b.cnot(data[i], aux[i]);
            }
        }
        (CodeKind::Color, Half::DetectZ) => {
            let aux7: [usize; 7] = aux.try_into().expect("seven auxiliary qubits");
            append_color_encode(b, &aux7, LogicalState::ZeroL, verify_or_flag);
            for i in 0..n {
                b.cnot(aux[i], data[i]);
            }
        }
        (CodeKind::BitFlip, Half::DetectX) => {
            append_ghz_aux(b, aux, CodeKind::BitFlip, verify_or_flag);
            for i in 0..n {
                b.cnot(data[i], aux[i]);
            }
        }
        (CodeKind::PhaseFlip, Half::DetectZ) => {
            append_ghz_aux(b, aux, CodeKind::PhaseFlip, verify_or_flag);
            for i in 0..n {
                b.cnot(aux[i], data[i]);
            }
        }
        (kind, half) => unreachable!("rejected earlier: {kind:?}/{half:?}"),
    }
    // Auxiliary readout: one mid-circuit detection event covering the
    // block measurement and reuse resets. DetectZ reads the X basis.
    if half == Half::DetectZ {
        for &q in aux {
            b.hadamard(q);
        }
    }
    b.mid_circuit_block();
    let records: Vec<RecordId> = aux.iter().map(|&q| b.measure_z(q)).collect();
    for &q in aux {
        b.reset(q);
    }
    if let (Some(v), CodeKind::Color) = (verify_or_flag, code.kind()) {
        b.reset(v);
    }
    records
}

/// One six-generator readout of the flagged protocol (`flagged` = with
/// the ancilla flag couplings) on the three reused ancillas
/// (x1_anc, z_anc, x2_anc roles per part).
fn append_flag_part(
    b: &mut CircuitBuilder,
    data: &[usize; 7],
    anc: &[usize; 3],
    part: usize,
    flagged: bool,
) -> [RecordId; 3] {
    use flag_schedule as fs;
    let (a, z, c) = (anc[0], anc[1], anc[2]);
    if part == 1 {
        // a measures S_X^(1), z measures S_Z^(2), c measures S_Z^(3).
        b.prepare_plus(a);
        b.prepare_zero(z);
        b.prepare_zero(c);
        if flagged {
            b.cnot(a, z);
            b.cnot(a, c);
        }
        for &q in &fs::P1_SZ3 {
            b.cnot(data[q], c);
        }
        for &q in &fs::P1_SX1 {
            b.cnot(a, data[q]);
        }
        for &q in &fs::P1_SZ2 {
            b.cnot(data[q], z);
        }
        if flagged {
            b.cnot(a, z);
            b.cnot(a, c);
        }
    } else {
        // a measures S_X^(2), z measures S_Z^(1), c measures S_X^(3).
        b.prepare_plus(a);
        b.prepare_zero(z);
        b.prepare_plus(c);
        if flagged {
            b.cnot(a, z);
            b.cnot(c, z);
        }
        for &q in &fs::P2_SX2 {
            b.cnot(a, data[q]);
        }
        for &q in &fs::P2_SX3 {
            b.cnot(c, data[q]);
        }
        for &q in &fs::P2_SZ1 {
            b.cnot(data[q], z);
        }
        if flagged {
            b.cnot(a, z);
            b.cnot(c, z);
        }
    }
    b.mid_circuit_block();
    let ra = {
        b.hadamard(a);
        b.measure_z(a)
    };
    let rz = b.measure_z(z);
    let rc = if part == 1 {
        b.measure_z(c)
    } else {
        b.hadamard(c);
        b.measure_z(c)
    };
    for &q in anc {
        b.reset(q);
    }
    [ra, rz, rc]
}

/// Full six-generator readout (two parts); returns records by generator.
fn append_flag_readout(
    b: &mut CircuitBuilder,
    data: &[usize; 7],
    anc: &[usize; 3],
    flagged: bool,
) -> FlagRoundRecords {
    let [sx1, sz2, sz3] = append_flag_part(b, data, anc, 1, flagged);
    let [sx2, sz1, sx3] = append_flag_part(b, data, anc, 2, flagged);
    FlagRoundRecords { sx: [sx1, sx2, sx3], sz: [sz1, sz2, sz3] }
}

/// One flagged QEC round: flagged readout, then the unflagged
/// remeasurement under a conditional (adaptive) or pre-committed
/// (post-selection emulation) branch.
fn append_flag_round(
    b: &mut CircuitBuilder,
    data: &[usize; 7],
    anc: &[usize; 3],
    mode: FlagMode,
    round_index: usize,
) -> RoundLayout {
    let flagged = append_flag_readout(b, data, anc, true);
    let trigger = flagged.all().to_vec();
    let predicate = match mode {
        FlagMode::Adaptive => Predicate::AnyRecordSet(trigger),
        FlagMode::EmulatePostselect => {
            Predicate::CommittedBranch { branch: round_index, records: trigger }
        }
    };
    b.begin_conditional(predicate);
    let unflagged = append_flag_readout(b, data, anc, false);
    b.end_conditional();
    RoundLayout::Flag { flagged, unflagged, mode }
}

fn append_final_readout(b: &mut CircuitBuilder, data: &[usize], basis: ReadoutBasis) -> Vec<RecordId> {
    data.iter()
        .map(|&q| match basis {
            ReadoutBasis::Z => b.measure_z(q),
            ReadoutBasis::X => b.measure_x_basis(q),
        })
        .collect()
}

// --- Standalone gadget circuits ---

fn roles(data: usize, aux: usize, flags: usize) -> Vec<QubitRole> {
    let mut r = vec![QubitRole::Data; data];
    r.extend(std::iter::repeat_n(QubitRole::Auxiliary, aux));
    r.extend(std::iter::repeat_n(QubitRole::Flag, flags));
    r
}

/// Encoding circuit for a code's |0>_L or |+>_L. For the color code this
/// is the 8-CNOT circuit plus optional flag verification; repetition
/// codes are product-state preparations (and reject verification).
pub fn encode_circuit(
    code: &StabilizerCode,
    state: LogicalState,
    verify: bool,
) -> Result<Circuit, BuildError> {
    match code.kind() {
        CodeKind::Color => {
            let n_flags = usize::from(verify);
            let mut b = CircuitBuilder::new(7 + n_flags, roles(7, 0, n_flags));
            let data: [usize; 7] = std::array::from_fn(|i| i);
            append_color_encode(&mut b, &data, state, verify.then_some(7));
            let circuit = b.finish();
            circuit.validate(None)?;
            Ok(circuit)
        }
        kind => {
            if verify {
                return Err(BuildError::VerifyOnRepetition);
            }
            if state == LogicalState::PlusL {
                return Err(BuildError::RepetitionPlusL);
            }
            let n = code.n();
            let mut b = CircuitBuilder::new(n, roles(n, 0, 0));
            let data: Vec<usize> = (0..n).collect();
            append_repetition_encode(&mut b, &data, kind);
            let circuit = b.finish();
            circuit.validate(None)?;
            Ok(circuit)
        }
    }
}

/// GHZ auxiliary preparation for a repetition code of distance `d`
/// (`kind` selects the bit-flip ladder or its Hadamard conjugate).
pub fn ghz_aux_prep(d: usize, kind: CodeKind, with_flag: bool) -> Result<Circuit, BuildError> {
    if kind == CodeKind::Color {
        return Err(BuildError::GhzOnColor(kind));
    }
    if d >= 5 && !with_flag {
        return Err(BuildError::GhzFlagRequired(d));
    }
    let n_flags = usize::from(with_flag);
    let mut b = CircuitBuilder::new(d + n_flags, roles(0, d, n_flags));
    let aux: Vec<usize> = (0..d).collect();
    append_ghz_aux(&mut b, &aux, kind, with_flag.then_some(d));
    let circuit = b.finish();
    circuit.validate(None)?;
    Ok(circuit)
}

fn check_half(code: &StabilizerCode, half: Half) -> Result<(), BuildError> {
    match (code.kind(), half) {
        (CodeKind::Color, _) | (CodeKind::BitFlip, Half::DetectX) | (CodeKind::PhaseFlip, Half::DetectZ) => Ok(()),
        (kind, half) => Err(BuildError::HalfMismatch(kind, half)),
    }
}

/// Standalone Steane half-cycle gadget (data block assumed encoded).
pub fn steane_half_cycle(code: &StabilizerCode, half: Half) -> Result<Circuit, BuildError> {
    check_half(code, half)?;
    let n = code.n();
    let needs_flag = code.kind() == CodeKind::Color || code.distance() >= 5;
    let n_flags = usize::from(needs_flag);
    let mut b = CircuitBuilder::new(2 * n + n_flags, roles(n, n, n_flags));
    let data: Vec<usize> = (0..n).collect();
    let aux: Vec<usize> = (n..2 * n).collect();
    append_steane_half(&mut b, code, &data, &aux, needs_flag.then_some(2 * n), half);
    let circuit = b.finish();
    circuit.validate(None)?;
    Ok(circuit)
}

/// Standalone full Steane cycle (color code only): detect-X half then
/// detect-Z half with auxiliary reuse.
pub fn steane_full_cycle(code: &StabilizerCode) -> Result<Circuit, BuildError> {
    if code.kind() != CodeKind::Color {
        return Err(BuildError::FullCycleOnRepetition);
    }
    let mut b = CircuitBuilder::new(15, roles(7, 7, 1));
    let data: Vec<usize> = (0..7).collect();
    let aux: Vec<usize> = (7..14).collect();
    append_steane_half(&mut b, code, &data, &aux, Some(14), Half::DetectX);
    append_steane_half(&mut b, code, &data, &aux, Some(14), Half::DetectZ);
    let circuit = b.finish();
    circuit.validate(None)?;
    Ok(circuit)
}

/// Standalone flagged QEC round (color code only).
pub fn flag_cycle(code: &StabilizerCode, mode: FlagMode) -> Result<Circuit, BuildError> {
    if code.kind() != CodeKind::Color {
        return Err(BuildError::ColorCodeOnly(match mode {
            FlagMode::Adaptive => Protocol::FlagAdaptive,
            FlagMode::EmulatePostselect => Protocol::FlagPostselect,
        }));
    }
    let mut b = CircuitBuilder::new(10, roles(7, 3, 0));
    let data: [usize; 7] = std::array::from_fn(|i| i);
    let anc: [usize; 3] = [7, 8, 9];
    append_flag_round(&mut b, &data, &anc, mode, 0);
    let circuit = b.finish();
    circuit.validate(None)?;
    Ok(circuit)
}

/// Transversal measurement of all data qubits in the given basis.
pub fn final_readout(code: &StabilizerCode, basis: ReadoutBasis) -> Circuit {
    let n = code.n();
    let mut b = CircuitBuilder::new(n, roles(n, 0, 0));
    let data: Vec<usize> = (0..n).collect();
    append_final_readout(&mut b, &data, basis);
    b.finish()
}

/// Composes encoding + `rounds` protocol rounds + final readout into one
/// validated experiment within the 16-qubit register budget.
pub fn compose_experiment(spec: &ExperimentSpec) -> Result<Experiment, BuildError> {
    let code = code_for(spec.code, spec.distance).map_err(|_| BuildError::GhzFlagRequired(spec.distance))?;
    compose_from_code(code, spec)
}

fn compose_from_code(code: StabilizerCode, spec: &ExperimentSpec) -> Result<Experiment, BuildError> {
    let n = code.n();
    let target = spec.initial_state;

    match (code.kind(), spec.protocol) {
        (CodeKind::Color, _) => {}
        (_, Protocol::SteaneHalf) => {
            if target == LogicalState::PlusL {
                return Err(BuildError::RepetitionPlusL);
            }
        }
        (_, Protocol::SteaneFull) => return Err(BuildError::FullCycleOnRepetition),
        (kind, p @ (Protocol::FlagAdaptive | Protocol::FlagPostselect)) => {
            return Err(BuildError::ProtocolMismatch { protocol: p, code: kind })
        }
    }

    let readout_basis = readout_basis_for(&code, target);
    // Half-cycle rounds extract the syndrome the target state is
    // sensitive to: Z-type generators for |0>_L, X-type for |+>_L (the
    // phase-flip code's duality folds into its generator families).
    let half_for_target = match code.kind() {
        CodeKind::BitFlip => Half::DetectX,
        CodeKind::PhaseFlip => Half::DetectZ,
        CodeKind::Color => match target {
            LogicalState::ZeroL => Half::DetectX,
            LogicalState::PlusL => Half::DetectZ,
        },
    };

    let (mut b, data, aux, extra, layout_note) = match (code.kind(), spec.protocol) {
        (CodeKind::Color, Protocol::FlagAdaptive | Protocol::FlagPostselect) => {
            let b = CircuitBuilder::new(10, roles(7, 3, 0));
            let data: Vec<usize> = (0..7).collect();
            let anc: Vec<usize> = vec![7, 8, 9];
            (b, data, anc, None, "data 1-7, readout ancillas 8-10 (reused)".to_string())
        }
        (CodeKind::Color, _) => {
            let b = CircuitBuilder::new(15, roles(7, 7, 1));
            let data: Vec<usize> = (0..7).collect();
            let aux: Vec<usize> = (7..14).collect();
            (b, data, aux, Some(14), "data 1-7, auxiliary 8-14, verification 15".to_string())
        }
        (_, _) => {
            let needs_flag = code.distance() >= 5;
            let n_flags = usize::from(needs_flag);
            let b = CircuitBuilder::new(2 * n + n_flags, roles(n, n, n_flags));
            let data: Vec<usize> = (0..n).collect();
            let aux: Vec<usize> = (n..2 * n).collect();
            let note = if needs_flag {
                format!("data 1-{n}, auxiliary {}-{}, GHZ flag {}", n + 1, 2 * n, 2 * n + 1)
            } else {
                format!("data 1-{n}, auxiliary {}-{}", n + 1, 2 * n)
            };
            (b, data, aux, needs_flag.then_some(2 * n), note)
        }
    };

    // Encode the data block.
    match code.kind() {
        CodeKind::Color => {
            let data7: [usize; 7] = data.as_slice().try_into().unwrap();
            match spec.protocol {
                Protocol::FlagAdaptive | Protocol::FlagPostselect => {
                    // The flag experiments have no spare ancilla; reuse the
                    // first readout ancilla for encoding verification.
                    append_color_encode(&mut b, &data7, target, Some(aux[0]));
                    b.reset(aux[0]);
                }
                _ => {
                    append_color_encode(&mut b, &data7, target, extra);
                    if let Some(v) = extra {
                        b.reset(v);
                    }
                }
            }
        }
        kind => append_repetition_encode(&mut b, &data, kind),
    }

    // Protocol rounds.
    let mut rounds = Vec::with_capacity(spec.rounds);
    for round in 0..spec.rounds {
        match spec.protocol {
            Protocol::SteaneFull => {
                let detect_x_aux = append_steane_half(&mut b, &code, &data, &aux, extra, Half::DetectX);
                let detect_z_aux = append_steane_half(&mut b, &code, &data, &aux, extra, Half::DetectZ);
                rounds.push(RoundLayout::SteaneFull { detect_x_aux, detect_z_aux });
            }
            Protocol::SteaneHalf => {
                let recs = append_steane_half(&mut b, &code, &data, &aux, extra, half_for_target);
                rounds.push(RoundLayout::SteaneHalf { half: half_for_target, aux: recs });
            }
            Protocol::FlagAdaptive | Protocol::FlagPostselect => {
                let mode = if spec.protocol == Protocol::FlagAdaptive {
                    FlagMode::Adaptive
                } else {
                    FlagMode::EmulatePostselect
                };
                let data7: [usize; 7] = data.as_slice().try_into().unwrap();
                let anc3: [usize; 3] = aux.as_slice().try_into().unwrap();
                rounds.push(append_flag_round(&mut b, &data7, &anc3, mode, round));
            }
        }
    }

    let final_records = append_final_readout(&mut b, &data, readout_basis);
    let circuit = b.finish();
    circuit.validate(Some(16))?;
    Ok(Experiment { circuit, code, target, readout_basis, rounds, final_records, layout_note })
}
