//! Turns shot outcomes into logical success/failure: syndrome
//! reconstruction from auxiliary readouts, flag resolution, software
//! Pauli-frame tracking, final logical evaluation, and the exhaustive
//! single-fault tolerance checker.
//!
//! Corrections are never applied as circuit operations. Each round
//! decodes the syndrome relative to the tracked frame (the raw syndrome
//! times the frame's own syndrome), composes the suggested recovery into
//! the frame, and the final evaluation applies the frame classically
//! before an ideal decode of the transversal readout.

use thiserror::Error;

use crate::builders::{Experiment, FlagRoundRecords, Half, LogicalState, RoundLayout};
use crate::circuit::{DiscardReason, Instruction, RecordId};
use crate::codes::{
    build_lookup_table, flag_lookup_table, CodeError, CodeKind, DecodeTable, StabilizerCode,
    StabilizerFamily, Syndrome,
};
use crate::engine::{run_shot_with, FaultInjection, RunOptions, ShotOutcome};
use crate::noise::{NoiseModel, TWO_QUBIT_FAULTS};
use crate::pauli::{Pauli, PauliString};

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("auxiliary readout has {got} bits, code expects {expected}")]
    AuxLength { got: usize, expected: usize },
    #[error("readout basis {basis:?} cannot evaluate target {target:?} for code {code}")]
    BasisMismatch { basis: crate::builders::ReadoutBasis, target: LogicalState, code: String },
    #[error("syndrome {0} missing from a complete lookup table")]
    IncompleteTable(String),
    #[error("non-trivial flagged round requires the unflagged syndrome")]
    MissingUnflagged,
    #[error("trivial flagged round must not carry an unflagged syndrome")]
    UnexpectedUnflagged,
    #[error("record r{0} absent from a shot that was not discarded")]
    MissingRecord(RecordId),
    #[error("decode tables missing the {0} family for this code")]
    MissingFamily(StabilizerFamily),
    #[error(transparent)]
    Code(#[from] CodeError),
    #[error(transparent)]
    Engine(#[from] crate::engine::EngineError),
}

/// Software-tracked accumulated recovery on the data block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PauliFrame {
    recovery: PauliString,
}

impl PauliFrame {
    pub fn identity(n: usize) -> Self {
        PauliFrame { recovery: PauliString::identity(n) }
    }

    pub fn operator(&self) -> &PauliString {
        &self.recovery
    }

    /// Composes a decoder-suggested recovery into the frame.
    pub fn update(&mut self, recovery: &PauliString) {
        self.recovery = self.recovery.compose(recovery).expect("frame dimensions");
    }
}

/// The decode tables a protocol needs, built once per code.
#[derive(Debug, Clone)]
pub struct DecodeTables {
    z_standard: Option<DecodeTable>,
    x_standard: Option<DecodeTable>,
    z_flag: Option<DecodeTable>,
    x_flag: Option<DecodeTable>,
}

impl DecodeTables {
    pub fn for_code(code: &StabilizerCode) -> Self {
        let z_standard = build_lookup_table(code, StabilizerFamily::ZType).ok();
        let x_standard = build_lookup_table(code, StabilizerFamily::XType).ok();
        let (z_flag, x_flag) = if code.kind() == CodeKind::Color {
            (
                Some(flag_lookup_table(StabilizerFamily::ZType)),
                Some(flag_lookup_table(StabilizerFamily::XType)),
            )
        } else {
            (None, None)
        };
        DecodeTables { z_standard, x_standard, z_flag, x_flag }
    }

    pub fn standard(&self, family: StabilizerFamily) -> Result<&DecodeTable, ProtocolError> {
        match family {
            StabilizerFamily::ZType => self.z_standard.as_ref(),
            StabilizerFamily::XType => self.x_standard.as_ref(),
        }
        .ok_or(ProtocolError::MissingFamily(family))
    }

    pub fn flag(&self, family: StabilizerFamily) -> Result<&DecodeTable, ProtocolError> {
        match family {
            StabilizerFamily::ZType => self.z_flag.as_ref(),
            StabilizerFamily::XType => self.x_flag.as_ref(),
        }
        .ok_or(ProtocolError::MissingFamily(family))
    }
}

/// Reconstructs the syndrome from a transversal auxiliary readout: entry
/// i is the parity of the auxiliary bits on generator i's support.
pub fn steane_syndrome(
    aux_bits: &[bool],
    code: &StabilizerCode,
    half: Half,
) -> Result<Syndrome, ProtocolError> {
    if aux_bits.len() != code.n() {
        return Err(ProtocolError::AuxLength { got: aux_bits.len(), expected: code.n() });
    }
    let family = half.family();
    let minus = code
        .generators(family)
        .iter()
        .map(|g| !g.support().filter(|&q| aux_bits[q]).count().is_multiple_of(2))
        .collect();
    Ok(Syndrome::new(family, minus))
}

/// Table lookup; the trivial syndrome decodes to the identity.
pub fn decode_round(
    syndrome: &Syndrome,
    table: &DecodeTable,
) -> Result<PauliString, ProtocolError> {
    match table.lookup(syndrome)? {
        Some(recovery) => Ok(*recovery),
        None => Err(ProtocolError::IncompleteTable(syndrome.to_string())),
    }
}

/// One family's flagged readout: its syndrome and whether any flagged
/// record of the round was non-trivial (triggering the remeasurement).
#[derive(Debug, Clone)]
pub struct FlaggedReadout {
    pub syndrome: Syndrome,
    pub triggered: bool,
}

/// Flag-protocol recovery resolution per family: a trivial flagged round
/// does nothing; agreement decodes via the standard table; disagreement
/// consults the flag table for the unflagged syndrome, falling back to
/// the standard table.
///
/// The flag table is only consulted when this family's flagged syndrome
/// was itself non-trivial: every propagated ancilla hook corrupts the
/// flagged readout of its family (that is what the flag couplings
/// guarantee), so a trivial flagged syndrome that disagrees with the
/// remeasurement indicates a non-flag error that arose mid-round and is
/// decoded with the single-qubit table.
pub fn resolve_flag(
    flagged: &FlaggedReadout,
    unflagged: Option<&Syndrome>,
    standard: &DecodeTable,
    flag_table: &DecodeTable,
) -> Result<PauliString, ProtocolError> {
    if !flagged.triggered {
        if unflagged.is_some() {
            return Err(ProtocolError::UnexpectedUnflagged);
        }
        return Ok(PauliString::identity(7));
    }
    let unflagged = unflagged.ok_or(ProtocolError::MissingUnflagged)?;
    if flagged.syndrome == *unflagged || flagged.syndrome.is_trivial() {
        return decode_round(unflagged, standard);
    }
    if let Some(recovery) = flag_table.lookup(unflagged)? {
        return Ok(*recovery);
    }
    decode_round(unflagged, standard)
}

/// Composes a recovery into the frame (free-function form).
pub fn update_frame(frame: &mut PauliFrame, recovery: &PauliString) {
    frame.update(recovery);
}

/// Ideal final decode of a transversal readout: apply the frame
/// classically, correct via the lookup table, then read the target
/// logical operator's parity.
pub fn evaluate_logical(
    final_bits: &[bool],
    basis: crate::builders::ReadoutBasis,
    frame: &PauliFrame,
    code: &StabilizerCode,
    target: LogicalState,
    tables: &DecodeTables,
) -> Result<bool, ProtocolError> {
    use crate::builders::ReadoutBasis;
    if final_bits.len() != code.n() {
        return Err(ProtocolError::AuxLength { got: final_bits.len(), expected: code.n() });
    }
    let logical = match target {
        LogicalState::ZeroL => code.logical_z(),
        LogicalState::PlusL => code.logical_x(),
    };
    // The readout basis must diagonalize the target logical operator.
    let basis_ok = match basis {
        ReadoutBasis::Z => logical.x_bits() == 0,
        ReadoutBasis::X => logical.z_bits() == 0,
    };
    if !basis_ok {
        return Err(ProtocolError::BasisMismatch {
            basis,
            target,
            code: code.name().to_string(),
        });
    }
    // Bits are flipped by errors anticommuting with the measured basis:
    // X-type flips for a Z readout, Z-type flips for an X readout.
    let (family, frame_flips) = match basis {
        ReadoutBasis::Z => (StabilizerFamily::ZType, frame.operator().x_bits()),
        ReadoutBasis::X => (StabilizerFamily::XType, frame.operator().z_bits()),
    };
    let mut bits: u64 = 0;
    for (q, &b) in final_bits.iter().enumerate() {
        if b {
            bits |= 1 << q;
        }
    }
    bits ^= frame_flips;
    let minus: Vec<bool> = code
        .generators(family)
        .iter()
        .map(|g| {
            let support: u64 = g.support().fold(0u64, |m, q| m | (1 << q));
            !(bits & support).count_ones().is_multiple_of(2)
        })
        .collect();
    let syndrome = Syndrome::new(family, minus);
    let recovery = decode_round(&syndrome, tables.standard(family)?)?;
    let recovery_flips = match basis {
        ReadoutBasis::Z => recovery.x_bits(),
        ReadoutBasis::X => recovery.z_bits(),
    };
    bits ^= recovery_flips;
    let logical_support: u64 = logical.support().fold(0u64, |m, q| m | (1 << q));
    Ok((bits & logical_support).count_ones().is_multiple_of(2))
}

/// Protocol phase of one decoded round record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoundPhase {
    DetectX,
    DetectZ,
    Flagged,
    Unflagged,
}

/// Trace of one decoded extraction step.
#[derive(Debug, Clone)]
pub struct RoundRecord {
    pub round: usize,
    pub phase: RoundPhase,
    pub raw_bits: Vec<bool>,
    /// Frame-relative syndrome the decoder acted on.
    pub syndrome: Syndrome,
    pub recovery: PauliString,
}

impl RoundRecord {
    /// JSON-lines rendering for debug traces.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "round": self.round,
            "phase": format!("{:?}", self.phase),
            "raw_bits": self.raw_bits.iter().map(|&b| u8::from(b)).collect::<Vec<_>>(),
            "syndrome": self.syndrome.to_string(),
            "recovery": self.recovery.to_string(),
        })
    }
}

/// Decoded result of one shot.
#[derive(Debug, Clone)]
pub enum ShotVerdict {
    Discarded(DiscardReason),
    Evaluated { success: bool, rounds: Vec<RoundRecord> },
}

impl ShotVerdict {
    pub fn is_success(&self) -> bool {
        matches!(self, ShotVerdict::Evaluated { success: true, .. })
    }
}

fn record_bit(outcome: &ShotOutcome, id: RecordId) -> Result<bool, ProtocolError> {
    outcome.record(id).ok_or(ProtocolError::MissingRecord(id))
}

fn collect_bits(outcome: &ShotOutcome, ids: &[RecordId]) -> Result<Vec<bool>, ProtocolError> {
    ids.iter().map(|&id| record_bit(outcome, id)).collect()
}

/// Frame-relative effective syndrome: raw times the frame's syndrome.
fn effective_syndrome(
    raw: &Syndrome,
    frame: &PauliFrame,
    code: &StabilizerCode,
) -> Result<Syndrome, ProtocolError> {
    let frame_syn = code.syndrome_of(frame.operator(), raw.family())?;
    Ok(raw.product(&frame_syn)?)
}

fn flag_family_syndrome(
    outcome: &ShotOutcome,
    records: &FlagRoundRecords,
    family: StabilizerFamily,
) -> Result<Syndrome, ProtocolError> {
    let ids = match family {
        StabilizerFamily::XType => records.sx,
        StabilizerFamily::ZType => records.sz,
    };
    let minus = collect_bits(outcome, &ids)?;
    Ok(Syndrome::new(family, minus))
}

/// Decodes one shot of a composed experiment: per-round Pauli-frame
/// updates followed by the ideal final evaluation.
pub fn decode_shot(
    outcome: &ShotOutcome,
    experiment: &Experiment,
    tables: &DecodeTables,
) -> Result<ShotVerdict, ProtocolError> {
    if let Some(reason) = outcome.discarded {
        return Ok(ShotVerdict::Discarded(reason));
    }
    let code = &experiment.code;
    let mut frame = PauliFrame::identity(code.n());
    let mut trace = Vec::new();

    for (round, layout) in experiment.rounds.iter().enumerate() {
        match layout {
            RoundLayout::SteaneHalf { half, aux } => {
                decode_steane_half(outcome, code, tables, &mut frame, &mut trace, round, *half, aux)?;
            }
            RoundLayout::SteaneFull { detect_x_aux, detect_z_aux } => {
                decode_steane_half(
                    outcome, code, tables, &mut frame, &mut trace, round, Half::DetectX,
                    detect_x_aux,
                )?;
                decode_steane_half(
                    outcome, code, tables, &mut frame, &mut trace, round, Half::DetectZ,
                    detect_z_aux,
                )?;
            }
            RoundLayout::Flag { flagged, unflagged, mode: _ } => {
                let flagged_bits = collect_bits(outcome, &flagged.all())?;
                let triggered = flagged_bits.iter().any(|&b| b);
                for family in [StabilizerFamily::ZType, StabilizerFamily::XType] {
                    let raw_flagged = flag_family_syndrome(outcome, flagged, family)?;
                    let recovery = if !triggered {
                        PauliString::identity(code.n())
                    } else {
                        let raw_unflagged = flag_family_syndrome(outcome, unflagged, family)?;
                        let eff_flagged = effective_syndrome(&raw_flagged, &frame, code)?;
                        let eff_unflagged = effective_syndrome(&raw_unflagged, &frame, code)?;
                        resolve_flag(
                            &FlaggedReadout { syndrome: eff_flagged, triggered: true },
                            Some(&eff_unflagged),
                            tables.standard(family)?,
                            tables.flag(family)?,
                        )?
                    };
                    let eff = effective_syndrome(&raw_flagged, &frame, code)?;
                    trace.push(RoundRecord {
                        round,
                        phase: if triggered { RoundPhase::Unflagged } else { RoundPhase::Flagged },
                        raw_bits: raw_flagged.bits().to_vec(),
                        syndrome: eff,
                        recovery,
                    });
                    frame.update(&recovery);
                }
            }
        }
    }

    let final_bits = collect_bits(outcome, &experiment.final_records)?;
    let success = evaluate_logical(
        &final_bits,
        experiment.readout_basis,
        &frame,
        code,
        experiment.target,
        tables,
    )?;
    Ok(ShotVerdict::Evaluated { success, rounds: trace })
}

#[allow(clippy::too_many_arguments)]
fn decode_steane_half(
    outcome: &ShotOutcome,
    code: &StabilizerCode,
    tables: &DecodeTables,
    frame: &mut PauliFrame,
    trace: &mut Vec<RoundRecord>,
    round: usize,
    half: Half,
    aux: &[RecordId],
) -> Result<(), ProtocolError> {
    let bits = collect_bits(outcome, aux)?;
    let raw = steane_syndrome(&bits, code, half)?;
    let eff = effective_syndrome(&raw, frame, code)?;
    let recovery = decode_round(&eff, tables.standard(half.family())?)?;
    trace.push(RoundRecord {
        round,
        phase: match half {
            Half::DetectX => RoundPhase::DetectX,
            Half::DetectZ => RoundPhase::DetectZ,
        },
        raw_bits: bits,
        syndrome: eff,
        recovery,
    });
    frame.update(&recovery);
    Ok(())
}

// --- Exhaustive single-fault tolerance checking ---

/// One fault location with all its injectable Pauli faults.
fn injections_for(index: usize, instr: &Instruction) -> Vec<FaultInjection> {
    match instr {
        Instruction::PrepareZero { qubit } | Instruction::Reset { qubit } => {
            vec![FaultInjection { at: index, before: false, paulis: vec![(*qubit, Pauli::X)] }]
        }
        Instruction::MeasureZ { qubit, .. } => {
            vec![FaultInjection { at: index, before: true, paulis: vec![(*qubit, Pauli::X)] }]
        }
        Instruction::MeasureX { qubit, .. } => {
            vec![FaultInjection { at: index, before: true, paulis: vec![(*qubit, Pauli::Z)] }]
        }
        Instruction::Hadamard { qubit }
        | Instruction::PauliX { qubit }
        | Instruction::PauliY { qubit }
        | Instruction::PauliZ { qubit } => [Pauli::X, Pauli::Y, Pauli::Z]
            .into_iter()
            .map(|p| FaultInjection { at: index, before: false, paulis: vec![(*qubit, p)] })
            .collect(),
        Instruction::Cnot { control, target } => TWO_QUBIT_FAULTS
            .iter()
            .map(|&(a, b)| {
                let mut paulis = Vec::new();
                if a != Pauli::I {
                    paulis.push((*control, a));
                }
                if b != Pauli::I {
                    paulis.push((*target, b));
                }
                FaultInjection { at: index, before: false, paulis }
            })
            .collect(),
        _ => Vec::new(),
    }
}

/// A single-fault logical failure found by the exhaustive checker.
#[derive(Debug, Clone)]
pub struct FtFailure {
    pub instruction: usize,
    pub instruction_repr: String,
    pub fault: String,
    pub seed: u64,
}

/// Summary of one exhaustive single-fault sweep.
#[derive(Debug, Clone)]
pub struct FtReport {
    pub fault_locations: usize,
    pub injections_run: usize,
    pub failures: Vec<FtFailure>,
}

impl FtReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Injects every element of the single- and two-qubit error sets at every
/// gate/preparation/measurement location of the experiment (all
/// stochastic noise off) and checks that no injection produces a logical
/// failure. Each injection is repeated over `seeds` to cover the random
/// measurement branches.
pub fn check_fault_tolerance(
    experiment: &Experiment,
    tables: &DecodeTables,
    seeds: &[u64],
) -> Result<FtReport, ProtocolError> {
    let noiseless = NoiseModel::noiseless();
    let mut report = FtReport { fault_locations: 0, injections_run: 0, failures: Vec::new() };
    for (index, instr) in experiment.circuit.instructions().iter().enumerate() {
        let injections = injections_for(index, instr);
        if injections.is_empty() {
            continue;
        }
        report.fault_locations += 1;
        for injection in injections {
            for &seed in seeds {
                report.injections_run += 1;
                let mut rng = crate::engine::shot_rng(seed, index as u64);
                let outcome = run_shot_with(
                    &experiment.circuit,
                    &noiseless,
                    &mut rng,
                    RunOptions::default(),
                    Some(&injection),
                )?;
                let verdict = decode_shot(&outcome, experiment, tables)?;
                if let ShotVerdict::Evaluated { success: false, .. } = verdict {
                    report.failures.push(FtFailure {
                        instruction: index,
                        instruction_repr: format!("{instr:?}"),
                        fault: format!("{:?}", injection.paulis),
                        seed,
                    });
                }
            }
        }
    }
    Ok(report)
}
