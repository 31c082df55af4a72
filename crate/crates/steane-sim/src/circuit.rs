//! Timed Clifford-circuit intermediate representation with classical
//! feed-forward.
//!
//! Circuits are flat instruction lists. Measurement records are declared
//! in program order and referenced by index; conditional blocks carry a
//! predicate over earlier records. A `MidCircuitBlock` marker denotes one
//! mid-circuit detection event (the noise model applies its data-qubit
//! channel once per marker).
//!
//! The text serialization is line oriented (`KIND operands @duration`)
//! and round-trippable; it backs the golden-file tests of the circuit
//! transcriptions.

use std::fmt::Write as _;

use thiserror::Error;

pub type RecordId = usize;

/// Two-qubit gate duration in microseconds (including settling time).
pub const TWO_QUBIT_GATE_US: f64 = 322.5;
/// Single-qubit gate duration in microseconds (including settling time).
pub const SINGLE_QUBIT_GATE_US: f64 = 25.0;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CircuitError {
    #[error("qubit index {0} out of range for {1} qubits")]
    QubitOutOfRange(usize, usize),
    #[error("cnot control and target must differ (both {0})")]
    CnotOperandsEqual(usize),
    #[error("conditional blocks are not properly nested (instruction {0})")]
    BadNesting(usize),
    #[error("predicate at instruction {at} references record r{record} before it is written")]
    PredicateBeforeRecord { at: usize, record: RecordId },
    #[error("predicate at instruction {at} references unknown branch {branch}")]
    UnknownBranch { at: usize, branch: usize },
    #[error("instruction {at}: record r{record} does not match declaration order")]
    RecordOrder { at: usize, record: RecordId },
    #[error("record r{record} measured qubit {got} but is declared on qubit {declared}")]
    RecordQubit { record: RecordId, got: usize, declared: usize },
    #[error("reset targets data qubit {0}; only auxiliary and flag qubits are reused")]
    ResetOnData(usize),
    #[error("circuit uses {got} qubits, exceeding the register budget of {budget}")]
    QubitBudget { got: usize, budget: usize },
    #[error("line {0}: cannot parse `{1}`")]
    Parse(usize, String),
}

/// Per-qubit role tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QubitRole {
    Data,
    Auxiliary,
    Flag,
}

impl QubitRole {
    fn code(self) -> char {
        match self {
            QubitRole::Data => 'd',
            QubitRole::Auxiliary => 'a',
            QubitRole::Flag => 'f',
        }
    }

    fn from_code(c: char) -> Option<Self> {
        match c {
            'd' => Some(QubitRole::Data),
            'a' => Some(QubitRole::Auxiliary),
            'f' => Some(QubitRole::Flag),
            _ => None,
        }
    }
}

/// Why a verification record failure discards the shot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DiscardReason {
    EncodingVerification,
    GhzFlag,
    PostselectBranch,
}

impl DiscardReason {
    fn code(self) -> &'static str {
        match self {
            DiscardReason::EncodingVerification => "encoding",
            DiscardReason::GhzFlag => "ghz",
            DiscardReason::PostselectBranch => "postselect",
        }
    }

    fn from_code(s: &str) -> Option<Self> {
        match s {
            "encoding" => Some(DiscardReason::EncodingVerification),
            "ghz" => Some(DiscardReason::GhzFlag),
            "postselect" => Some(DiscardReason::PostselectBranch),
            _ => None,
        }
    }
}

/// Declaration of one measurement record, in program order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RecordDecl {
    pub qubit: usize,
    /// When set, a 1 outcome marks the shot discarded with this reason.
    pub verification: Option<DiscardReason>,
}

/// Classical predicate guarding a conditional block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Predicate {
    /// True when any listed record read 1.
    AnyRecordSet(Vec<RecordId>),
    /// Pre-committed random branch bit, drawn once per shot. Used by the
    /// post-selection emulation: the block runs iff the committed bit is
    /// set, and the shot is discarded when the bit disagrees with
    /// `AnyRecordSet(records)` evaluated on the actual outcomes.
    CommittedBranch { branch: usize, records: Vec<RecordId> },
}

impl Predicate {
    pub fn records(&self) -> &[RecordId] {
        match self {
            Predicate::AnyRecordSet(r) => r,
            Predicate::CommittedBranch { records, .. } => records,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Instruction {
    PrepareZero { qubit: usize },
    Hadamard { qubit: usize },
    PauliX { qubit: usize },
    PauliY { qubit: usize },
    PauliZ { qubit: usize },
    Cnot { control: usize, target: usize },
    MeasureZ { qubit: usize, record: RecordId },
    MeasureX { qubit: usize, record: RecordId },
    Reset { qubit: usize },
    /// One mid-circuit detection event.
    MidCircuitBlock,
    ConditionalBegin { predicate: Predicate },
    ConditionalEnd,
}

impl Instruction {
    /// Wall-clock duration charged for idle dephasing. Only addressed
    /// gates carry time; measurement and preparation cost is absorbed
    /// into the mid-circuit detection channel.
    pub fn duration_us(&self) -> f64 {
        match self {
            Instruction::Cnot { .. } => TWO_QUBIT_GATE_US,
            Instruction::Hadamard { .. }
            | Instruction::PauliX { .. }
            | Instruction::PauliY { .. }
            | Instruction::PauliZ { .. } => SINGLE_QUBIT_GATE_US,
            _ => 0.0,
        }
    }

    /// Qubits this instruction addresses.
    pub fn operands(&self) -> Vec<usize> {
        match *self {
            Instruction::PrepareZero { qubit }
            | Instruction::Hadamard { qubit }
            | Instruction::PauliX { qubit }
            | Instruction::PauliY { qubit }
            | Instruction::PauliZ { qubit }
            | Instruction::MeasureZ { qubit, .. }
            | Instruction::MeasureX { qubit, .. }
            | Instruction::Reset { qubit } => vec![qubit],
            Instruction::Cnot { control, target } => vec![control, target],
            _ => Vec::new(),
        }
    }

    pub fn is_gate(&self) -> bool {
        matches!(
            self,
            Instruction::Hadamard { .. }
                | Instruction::PauliX { .. }
                | Instruction::PauliY { .. }
                | Instruction::PauliZ { .. }
                | Instruction::Cnot { .. }
        )
    }
}

/// A validated, immutable instruction sequence over a fixed register.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    n_qubits: usize,
    roles: Vec<QubitRole>,
    instructions: Vec<Instruction>,
    records: Vec<RecordDecl>,
    n_branches: usize,
}

impl Circuit {
    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn roles(&self) -> &[QubitRole] {
        &self.roles
    }

    pub fn role(&self, qubit: usize) -> QubitRole {
        self.roles[qubit]
    }

    pub fn instructions(&self) -> &[Instruction] {
        &self.instructions
    }

    pub fn records(&self) -> &[RecordDecl] {
        &self.records
    }

    pub fn n_branches(&self) -> usize {
        self.n_branches
    }

    pub fn data_qubits(&self) -> Vec<usize> {
        (0..self.n_qubits).filter(|&q| self.roles[q] == QubitRole::Data).collect()
    }

    pub fn count_gates(&self, pred: impl Fn(&Instruction) -> bool) -> usize {
        self.instructions.iter().filter(|i| pred(i)).count()
    }

    /// Static validation: operand ranges, CNOT operand distinctness,
    /// conditional nesting, record declaration order, predicates only over
    /// earlier records, resets only on reused (non-data) qubits, and an
    /// optional register budget.
    pub fn validate(&self, budget: Option<usize>) -> Result<(), CircuitError> {
        if let Some(b) = budget {
            if self.n_qubits > b {
                return Err(CircuitError::QubitBudget { got: self.n_qubits, budget: b });
            }
        }
        let mut depth = 0usize;
        let mut next_record = 0usize;
        for (at, instr) in self.instructions.iter().enumerate() {
            for q in instr.operands() {
                if q >= self.n_qubits {
                    return Err(CircuitError::QubitOutOfRange(q, self.n_qubits));
                }
            }
            match instr {
                Instruction::Cnot { control, target } if control == target => {
                    return Err(CircuitError::CnotOperandsEqual(*control));
                }
                Instruction::MeasureZ { qubit, record } | Instruction::MeasureX { qubit, record } => {
                    if *record != next_record {
                        return Err(CircuitError::RecordOrder { at, record: *record });
                    }
                    let decl = self
                        .records
                        .get(*record)
                        .ok_or(CircuitError::RecordOrder { at, record: *record })?;
                    if decl.qubit != *qubit {
                        return Err(CircuitError::RecordQubit {
                            record: *record,
                            got: *qubit,
                            declared: decl.qubit,
                        });
                    }
                    next_record += 1;
                }
                Instruction::Reset { qubit } => {
                    if self.roles[*qubit] == QubitRole::Data {
                        return Err(CircuitError::ResetOnData(*qubit));
                    }
                }
                Instruction::ConditionalBegin { predicate } => {
                    depth += 1;
                    for &r in predicate.records() {
                        if r >= next_record {
                            return Err(CircuitError::PredicateBeforeRecord { at, record: r });
                        }
                    }
                    if let Predicate::CommittedBranch { branch, .. } = predicate {
                        if *branch >= self.n_branches {
                            return Err(CircuitError::UnknownBranch { at, branch: *branch });
                        }
                    }
                }
                Instruction::ConditionalEnd => {
                    if depth == 0 {
                        return Err(CircuitError::BadNesting(at));
                    }
                    depth -= 1;
                }
                _ => {}
            }
        }
        if depth != 0 {
            return Err(CircuitError::BadNesting(self.instructions.len()));
        }
        if next_record != self.records.len() {
            return Err(CircuitError::RecordOrder {
                at: self.instructions.len(),
                record: next_record,
            });
        }
        Ok(())
    }

    /// Line-oriented text form, one instruction per line:
    /// `KIND operands @duration`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "qubits {}", self.n_qubits).unwrap();
        let roles: String = self.roles.iter().map(|r| r.code()).collect();
        writeln!(out, "roles {roles}").unwrap();
        if self.n_branches > 0 {
            writeln!(out, "branches {}", self.n_branches).unwrap();
        }
        for instr in &self.instructions {
            let dur = instr.duration_us();
            let line = match instr {
                Instruction::PrepareZero { qubit } => format!("prepare_0 {qubit}"),
                Instruction::Hadamard { qubit } => format!("h {qubit}"),
                Instruction::PauliX { qubit } => format!("x {qubit}"),
                Instruction::PauliY { qubit } => format!("y {qubit}"),
                Instruction::PauliZ { qubit } => format!("z {qubit}"),
                Instruction::Cnot { control, target } => format!("cnot {control} {target}"),
                Instruction::MeasureZ { qubit, record } | Instruction::MeasureX { qubit, record } => {
                    let kind = if matches!(instr, Instruction::MeasureZ { .. }) {
                        "measure_z"
                    } else {
                        "measure_x"
                    };
                    match self.records[*record].verification {
                        Some(reason) => {
                            format!("{kind} {qubit} -> r{record} verify={}", reason.code())
                        }
                        None => format!("{kind} {qubit} -> r{record}"),
                    }
                }
                Instruction::Reset { qubit } => format!("reset {qubit}"),
                Instruction::MidCircuitBlock => "mid_circuit_block".to_string(),
                Instruction::ConditionalBegin { predicate } => match predicate {
                    Predicate::AnyRecordSet(records) => {
                        format!("cond_begin any({})", record_list(records))
                    }
                    Predicate::CommittedBranch { branch, records } => {
                        format!("cond_begin branch({branch}; {})", record_list(records))
                    }
                },
                Instruction::ConditionalEnd => "cond_end".to_string(),
            };
            writeln!(out, "{line} @{dur}").unwrap();
        }
        out
    }

    /// Parses the [`Circuit::to_text`] format.
    pub fn from_text(text: &str) -> Result<Self, CircuitError> {
        let mut n_qubits = None;
        let mut roles: Vec<QubitRole> = Vec::new();
        let mut n_branches = 0usize;
        let mut builder: Option<CircuitBuilder> = None;

        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: &str| CircuitError::Parse(lineno + 1, msg.to_string());
            let mut parts = line.split_whitespace();
            let kind = parts.next().unwrap();
            match kind {
                "qubits" => {
                    let n: usize = parts
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| err(line))?;
                    n_qubits = Some(n);
                }
                "roles" => {
                    let spec = parts.next().ok_or_else(|| err(line))?;
                    roles = spec
                        .chars()
                        .map(QubitRole::from_code)
                        .collect::<Option<Vec<_>>>()
                        .ok_or_else(|| err(line))?;
                }
                "branches" => {
                    n_branches = parts
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| err(line))?;
                }
                _ => {
                    let b = match &mut builder {
                        Some(b) => b,
                        None => {
                            let n = n_qubits.ok_or_else(|| err("instruction before qubits"))?;
                            if roles.is_empty() {
                                roles = vec![QubitRole::Data; n];
                            }
                            builder = Some(CircuitBuilder::new(n, roles.clone()));
                            let b = builder.as_mut().unwrap();
                            b.n_branches = n_branches;
                            b
                        }
                    };
                    parse_instruction_line(b, kind, line, lineno + 1)?;
                }
            }
        }
        let b = match builder {
            Some(b) => b,
            None => {
                // Header-only document: an instruction-free circuit.
                let n = n_qubits.ok_or_else(|| CircuitError::Parse(0, "empty circuit".into()))?;
                if roles.is_empty() {
                    roles = vec![QubitRole::Data; n];
                }
                let mut b = CircuitBuilder::new(n, roles);
                b.n_branches = n_branches;
                b
            }
        };
        let circuit = b.finish();
        circuit.validate(None)?;
        Ok(circuit)
    }
}

fn record_list(records: &[RecordId]) -> String {
    records.iter().map(|r| format!("r{r}")).collect::<Vec<_>>().join(" ")
}

fn parse_instruction_line(
    b: &mut CircuitBuilder,
    kind: &str,
    line: &str,
    lineno: usize,
) -> Result<(), CircuitError> {
    let err = || CircuitError::Parse(lineno, line.to_string());
    // Strip the trailing `@duration`; the duration is derived from the
    // kind, the field is informational.
    let body = line.rsplit_once('@').map(|(prefix, _)| prefix.trim()).unwrap_or(line);
    let toks: Vec<&str> = body.split_whitespace().collect();
    let qubit_at = |i: usize| -> Result<usize, CircuitError> {
        toks.get(i).and_then(|s| s.parse().ok()).ok_or_else(err)
    };
    match kind {
        "prepare_0" => b.push(Instruction::PrepareZero { qubit: qubit_at(1)? }),
        "h" => b.push(Instruction::Hadamard { qubit: qubit_at(1)? }),
        "x" => b.push(Instruction::PauliX { qubit: qubit_at(1)? }),
        "y" => b.push(Instruction::PauliY { qubit: qubit_at(1)? }),
        "z" => b.push(Instruction::PauliZ { qubit: qubit_at(1)? }),
        "cnot" => b.push(Instruction::Cnot { control: qubit_at(1)?, target: qubit_at(2)? }),
        "reset" => b.push(Instruction::Reset { qubit: qubit_at(1)? }),
        "mid_circuit_block" => b.push(Instruction::MidCircuitBlock),
        "cond_end" => b.push(Instruction::ConditionalEnd),
        "measure_z" | "measure_x" => {
            let qubit = qubit_at(1)?;
            // Layout: measure_z q -> rN [verify=reason]
            if toks.get(2) != Some(&"->") {
                return Err(err());
            }
            let record: RecordId = toks
                .get(3)
                .and_then(|s| s.strip_prefix('r'))
                .and_then(|s| s.parse().ok())
                .ok_or_else(err)?;
            let verification = match toks.get(4) {
                Some(v) => Some(
                    v.strip_prefix("verify=")
                        .and_then(DiscardReason::from_code)
                        .ok_or_else(err)?,
                ),
                None => None,
            };
            if record != b.records.len() {
                return Err(CircuitError::RecordOrder { at: b.instructions.len(), record });
            }
            b.records.push(RecordDecl { qubit, verification });
            if kind == "measure_z" {
                b.push(Instruction::MeasureZ { qubit, record });
            } else {
                b.push(Instruction::MeasureX { qubit, record });
            }
        }
        "cond_begin" => {
            let rest = body.split_once(char::is_whitespace).map(|x| x.1).ok_or_else(err)?.trim();
            let predicate = if let Some(inner) =
                rest.strip_prefix("any(").and_then(|s| s.strip_suffix(')'))
            {
                Predicate::AnyRecordSet(parse_records(inner).ok_or_else(err)?)
            } else if let Some(inner) =
                rest.strip_prefix("branch(").and_then(|s| s.strip_suffix(')'))
            {
                let (branch, recs) = inner.split_once(';').ok_or_else(err)?;
                Predicate::CommittedBranch {
                    branch: branch.trim().parse().map_err(|_| err())?,
                    records: parse_records(recs).ok_or_else(err)?,
                }
            } else {
                return Err(err());
            };
            b.push(Instruction::ConditionalBegin { predicate });
        }
        _ => return Err(err()),
    }
    Ok(())
}

fn parse_records(s: &str) -> Option<Vec<RecordId>> {
    s.split_whitespace()
        .map(|tok| tok.strip_prefix('r')?.parse().ok())
        .collect()
}

/// Incremental circuit construction; records are allocated in program
/// order by the measurement helpers.
#[derive(Debug, Clone)]
pub struct CircuitBuilder {
    n_qubits: usize,
    roles: Vec<QubitRole>,
    instructions: Vec<Instruction>,
    records: Vec<RecordDecl>,
    n_branches: usize,
}

impl CircuitBuilder {
    pub fn new(n_qubits: usize, roles: Vec<QubitRole>) -> Self {
        assert_eq!(roles.len(), n_qubits);
        CircuitBuilder { n_qubits, roles, instructions: Vec::new(), records: Vec::new(), n_branches: 0 }
    }

    pub fn push(&mut self, instr: Instruction) {
        self.instructions.push(instr);
    }

    pub fn prepare_zero(&mut self, qubit: usize) {
        self.push(Instruction::PrepareZero { qubit });
    }

    /// |+> preparation: prepare |0> then a physical Hadamard.
    pub fn prepare_plus(&mut self, qubit: usize) {
        self.prepare_zero(qubit);
        self.hadamard(qubit);
    }

    pub fn hadamard(&mut self, qubit: usize) {
        self.push(Instruction::Hadamard { qubit });
    }

    pub fn cnot(&mut self, control: usize, target: usize) {
        self.push(Instruction::Cnot { control, target });
    }

    pub fn measure_z(&mut self, qubit: usize) -> RecordId {
        self.measure_z_decl(qubit, None)
    }

    pub fn measure_z_decl(&mut self, qubit: usize, verification: Option<DiscardReason>) -> RecordId {
        let record = self.records.len();
        self.records.push(RecordDecl { qubit, verification });
        self.push(Instruction::MeasureZ { qubit, record });
        record
    }

    /// X-basis readout as a physical Hadamard followed by a computational
    /// measurement, so the basis change is charged gate noise.
    pub fn measure_x_basis(&mut self, qubit: usize) -> RecordId {
        self.hadamard(qubit);
        self.measure_z(qubit)
    }

    /// Native X-basis measurement instruction (no basis-change gate).
    pub fn measure_x_native(&mut self, qubit: usize) -> RecordId {
        let record = self.records.len();
        self.records.push(RecordDecl { qubit, verification: None });
        self.push(Instruction::MeasureX { qubit, record });
        record
    }

    pub fn reset(&mut self, qubit: usize) {
        self.push(Instruction::Reset { qubit });
    }

    pub fn mid_circuit_block(&mut self) {
        self.push(Instruction::MidCircuitBlock);
    }

    pub fn begin_conditional(&mut self, predicate: Predicate) {
        if let Predicate::CommittedBranch { branch, .. } = &predicate {
            self.n_branches = self.n_branches.max(branch + 1);
        }
        self.push(Instruction::ConditionalBegin { predicate });
    }

    pub fn end_conditional(&mut self) {
        self.push(Instruction::ConditionalEnd);
    }

    pub fn next_record(&self) -> RecordId {
        self.records.len()
    }

    pub fn finish(&self) -> Circuit {
        Circuit {
            n_qubits: self.n_qubits,
            roles: self.roles.clone(),
            instructions: self.instructions.clone(),
            records: self.records.clone(),
            n_branches: self.n_branches,
        }
    }
}
