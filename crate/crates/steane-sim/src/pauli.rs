//! Symplectic (bit-mask) representation of n-qubit Pauli operators.
//!
//! Every operator is stored as an X-support mask, a Z-support mask and a
//! sign. A qubit acts as Y exactly when its bit is set in both masks.
//! Signs are tracked only as ±1: products that would pick up a factor of
//! ±i are projected onto their real sign, which is enough here because
//! all observables are ±1 stabilizer eigenvalues and all decisions go
//! through supports and commutation relations.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Hard cap imposed by the u64 support masks. The experiments in this
/// crate never exceed 16 qubits.
pub const MAX_QUBITS: usize = 64;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PauliError {
    #[error("operator dimension mismatch: {left} vs {right} qubits")]
    DimensionMismatch { left: usize, right: usize },
    #[error("qubit index {index} out of range for {n} qubits")]
    QubitOutOfRange { index: usize, n: usize },
    #[error("at most {MAX_QUBITS} qubits are supported (requested {0})")]
    TooManyQubits(usize),
    #[error("cannot parse Pauli term `{0}`")]
    Parse(String),
}

/// Single-qubit Pauli operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }

    fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }
}

impl fmt::Display for Pauli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        };
        write!(f, "{c}")
    }
}

/// An n-qubit Pauli operator.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct PauliString {
    n: usize,
    x_bits: u64,
    z_bits: u64,
    negative: bool,
}

impl PauliString {
    /// The identity on `n` qubits.
    pub fn identity(n: usize) -> Self {
        assert!(n <= MAX_QUBITS, "at most {MAX_QUBITS} qubits");
        PauliString { n, x_bits: 0, z_bits: 0, negative: false }
    }

    /// A single-qubit Pauli embedded into an `n`-qubit register.
    pub fn single(n: usize, qubit: usize, pauli: Pauli) -> Result<Self, PauliError> {
        let mut p = Self::try_identity(n)?;
        p.set(qubit, pauli)?;
        Ok(p)
    }

    /// The given Pauli applied on every qubit of `support`.
    pub fn on_support(n: usize, support: &[usize], pauli: Pauli) -> Result<Self, PauliError> {
        let mut p = Self::try_identity(n)?;
        for &q in support {
            p.set(q, pauli)?;
        }
        Ok(p)
    }

    fn try_identity(n: usize) -> Result<Self, PauliError> {
        if n > MAX_QUBITS {
            return Err(PauliError::TooManyQubits(n));
        }
        Ok(Self::identity(n))
    }

    /// Overwrite the action on one qubit.
    pub fn set(&mut self, qubit: usize, pauli: Pauli) -> Result<(), PauliError> {
        if qubit >= self.n {
            return Err(PauliError::QubitOutOfRange { index: qubit, n: self.n });
        }
        let (x, z) = pauli.bits();
        let mask = 1u64 << qubit;
        self.x_bits = (self.x_bits & !mask) | if x { mask } else { 0 };
        self.z_bits = (self.z_bits & !mask) | if z { mask } else { 0 };
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// X-support bit mask (bit q set when the action on q is X or Y).
    pub fn x_bits(&self) -> u64 {
        self.x_bits
    }

    /// Z-support bit mask (bit q set when the action on q is Z or Y).
    pub fn z_bits(&self) -> u64 {
        self.z_bits
    }

    /// Sign of the operator: `false` is +1, `true` is −1.
    pub fn is_negative(&self) -> bool {
        self.negative
    }

    /// Same operator with sign forced to +1.
    pub fn abs(mut self) -> Self {
        self.negative = false;
        self
    }

    pub fn pauli_at(&self, qubit: usize) -> Pauli {
        let mask = 1u64 << qubit;
        Pauli::from_bits(self.x_bits & mask != 0, self.z_bits & mask != 0)
    }

    pub fn is_identity(&self) -> bool {
        self.x_bits == 0 && self.z_bits == 0
    }

    /// Number of qubits with non-identity action.
    pub fn weight(&self) -> u32 {
        (self.x_bits | self.z_bits).count_ones()
    }

    /// Qubits with non-identity action, ascending.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        let mask = self.x_bits | self.z_bits;
        (0..self.n).filter(move |q| mask & (1 << q) != 0)
    }

    fn check_dims(&self, other: &Self) -> Result<(), PauliError> {
        if self.n != other.n {
            return Err(PauliError::DimensionMismatch { left: self.n, right: other.n });
        }
        Ok(())
    }

    /// Product `self · other` up to global phase.
    ///
    /// Supports are the XOR of the inputs. The sign is the real part of the
    /// exact phase: products landing on ±i are recorded as their sign.
    pub fn compose(&self, other: &Self) -> Result<Self, PauliError> {
        self.check_dims(other)?;
        // Exponent of i picked up when multiplying qubit-wise, mod 4.
        // Same bookkeeping as the tableau row product.
        let plus = (self.x_bits & self.z_bits & other.z_bits & !other.x_bits)
            | (self.x_bits & !self.z_bits & other.x_bits & other.z_bits)
            | (!self.x_bits & self.z_bits & other.x_bits & !other.z_bits);
        let minus = (self.x_bits & self.z_bits & other.x_bits & !other.z_bits)
            | (self.x_bits & !self.z_bits & !other.x_bits & other.z_bits)
            | (!self.x_bits & self.z_bits & other.x_bits & other.z_bits);
        let mut exponent = (plus.count_ones() as i64 - minus.count_ones() as i64)
            + 2 * (self.negative as i64)
            + 2 * (other.negative as i64);
        exponent = exponent.rem_euclid(4);
        Ok(PauliString {
            n: self.n,
            x_bits: self.x_bits ^ other.x_bits,
            z_bits: self.z_bits ^ other.z_bits,
            negative: exponent >= 2,
        })
    }

    /// Whether the two operators commute (symplectic overlap is even).
    pub fn commutes(&self, other: &Self) -> Result<bool, PauliError> {
        self.check_dims(other)?;
        let overlap = (self.x_bits & other.z_bits).count_ones()
            + (self.z_bits & other.x_bits).count_ones();
        Ok(overlap.is_multiple_of(2))
    }
}

impl fmt::Display for PauliString {
    /// Renders as e.g. `X1 Z3 Y5` with 1-indexed qubit labels; the
    /// identity renders as `I` and a minus sign is prefixed when negative.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negative {
            write!(f, "-")?;
        }
        if self.is_identity() {
            return write!(f, "I");
        }
        let mut first = true;
        for q in self.support() {
            if !first {
                write!(f, " ")?;
            }
            write!(f, "{}{}", self.pauli_at(q), q + 1)?;
            first = false;
        }
        Ok(())
    }
}

impl fmt::Debug for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PauliString({self}, n={})", self.n)
    }
}

/// Parses the `Display` rendering, e.g. `X1 Z3 Y5`, `-I`, `Y2`.
///
/// The register size is the largest qubit label mentioned; use
/// [`PauliString::parse_with_n`] to fix the size explicitly.
impl FromStr for PauliString {
    type Err = PauliError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let terms = parse_terms(s)?;
        let n = terms.iter().map(|&(q, _)| q + 1).max().unwrap_or(0);
        build_from_terms(n, &terms, s.trim_start().starts_with('-'))
    }
}

impl PauliString {
    /// Parses the `Display` rendering into a register of `n` qubits.
    pub fn parse_with_n(s: &str, n: usize) -> Result<Self, PauliError> {
        let terms = parse_terms(s)?;
        build_from_terms(n, &terms, s.trim_start().starts_with('-'))
    }
}

fn parse_terms(s: &str) -> Result<Vec<(usize, Pauli)>, PauliError> {
    let body = s.trim().trim_start_matches('-').trim();
    if body == "I" || body.is_empty() {
        return Ok(Vec::new());
    }
    let mut terms = Vec::new();
    for tok in body.split_whitespace() {
        let mut chars = tok.chars();
        let p = match chars.next() {
            Some('X') => Pauli::X,
            Some('Y') => Pauli::Y,
            Some('Z') => Pauli::Z,
            _ => return Err(PauliError::Parse(tok.to_string())),
        };
        let idx: usize = chars
            .as_str()
            .parse()
            .map_err(|_| PauliError::Parse(tok.to_string()))?;
        if idx == 0 {
            return Err(PauliError::Parse(tok.to_string()));
        }
        terms.push((idx - 1, p));
    }
    Ok(terms)
}

fn build_from_terms(
    n: usize,
    terms: &[(usize, Pauli)],
    negative: bool,
) -> Result<PauliString, PauliError> {
    let mut p = PauliString::try_identity(n)?;
    for &(q, pauli) in terms {
        p.set(q, pauli)?;
    }
    p.negative = negative;
    Ok(p)
}
