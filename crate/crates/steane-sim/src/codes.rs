//! Stabilizer code definitions, syndrome computation and lookup-table
//! decoders for the three code families: bit-flip and phase-flip
//! repetition codes and the seven-qubit color code.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pauli::{Pauli, PauliError, PauliString};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CodeError {
    #[error("repetition code distance must be an odd integer >= 3, got {0}")]
    BadDistance(usize),
    #[error("error operator acts on {got} qubits but the code has {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("code `{code}` has no {family} generators")]
    NoSuchFamily { code: String, family: StabilizerFamily },
    #[error("syndrome has {got} entries, expected {expected}")]
    SyndromeLength { got: usize, expected: usize },
    #[error("syndrome family {got} does not match table family {expected}")]
    FamilyMismatch { got: StabilizerFamily, expected: StabilizerFamily },
    #[error("syndrome {0} is absent from the decode table")]
    MissingSyndrome(String),
    #[error(transparent)]
    Pauli(#[from] PauliError),
}

/// Which stabilizer family a syndrome or decode table refers to.
///
/// Z-type generators detect X errors and vice versa.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum StabilizerFamily {
    XType,
    ZType,
}

impl StabilizerFamily {
    /// The Pauli kind of the errors this family detects (and of the
    /// recoveries a table for this family returns).
    pub fn detected_error(self) -> Pauli {
        match self {
            StabilizerFamily::XType => Pauli::Z,
            StabilizerFamily::ZType => Pauli::X,
        }
    }
}

impl fmt::Display for StabilizerFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StabilizerFamily::XType => write!(f, "X-type"),
            StabilizerFamily::ZType => write!(f, "Z-type"),
        }
    }
}

/// The three code families this crate simulates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodeKind {
    BitFlip,
    PhaseFlip,
    Color,
}

/// A CSS stabilizer code with ordered generators and one logical qubit.
///
/// Generator order fixes the syndrome bit order everywhere downstream.
#[derive(Debug, Clone)]
pub struct StabilizerCode {
    name: String,
    kind: CodeKind,
    n: usize,
    distance: usize,
    x_generators: Vec<PauliString>,
    z_generators: Vec<PauliString>,
    logical_x: PauliString,
    logical_z: PauliString,
}

/// Color-code generator supports, 0-indexed, in the order that fixes the
/// syndrome tuples: plaquettes {1,3,5,7}, {4,5,6,7}, {2,3,6,7}.
pub(crate) const COLOR_PLAQUETTES: [[usize; 4]; 3] = [[0, 2, 4, 6], [3, 4, 5, 6], [1, 2, 5, 6]];

impl StabilizerCode {
    /// Distance-d bit-flip repetition code: generators Z_i Z_{i+1},
    /// X_L = X on all qubits, Z_L = Z_1.
    pub fn bit_flip(distance: usize) -> Result<Self, CodeError> {
        if distance < 3 || distance.is_multiple_of(2) {
            return Err(CodeError::BadDistance(distance));
        }
        let n = distance;
        let z_generators = (0..n - 1)
            .map(|i| PauliString::on_support(n, &[i, i + 1], Pauli::Z).unwrap())
            .collect();
        Ok(StabilizerCode {
            name: format!("bit-flip-{distance}"),
            kind: CodeKind::BitFlip,
            n,
            distance,
            x_generators: Vec::new(),
            z_generators,
            logical_x: PauliString::on_support(n, &(0..n).collect::<Vec<_>>(), Pauli::X).unwrap(),
            logical_z: PauliString::single(n, 0, Pauli::Z).unwrap(),
        })
    }

    /// Distance-d phase-flip repetition code: generators X_i X_{i+1},
    /// X_L = Z on all qubits, Z_L = X_1.
    pub fn phase_flip(distance: usize) -> Result<Self, CodeError> {
        if distance < 3 || distance.is_multiple_of(2) {
            return Err(CodeError::BadDistance(distance));
        }
        let n = distance;
        let x_generators = (0..n - 1)
            .map(|i| PauliString::on_support(n, &[i, i + 1], Pauli::X).unwrap())
            .collect();
        Ok(StabilizerCode {
            name: format!("phase-flip-{distance}"),
            kind: CodeKind::PhaseFlip,
            n,
            distance,
            x_generators,
            z_generators: Vec::new(),
            logical_x: PauliString::on_support(n, &(0..n).collect::<Vec<_>>(), Pauli::Z).unwrap(),
            logical_z: PauliString::single(n, 0, Pauli::X).unwrap(),
        })
    }

    /// The seven-qubit color code with its six weight-4 generators and
    /// logicals X_L = X on all seven qubits, Z_L = Z on all seven.
    pub fn color_code() -> Self {
        let n = 7;
        let x_generators = COLOR_PLAQUETTES
            .iter()
            .map(|p| PauliString::on_support(n, p, Pauli::X).unwrap())
            .collect();
        let z_generators = COLOR_PLAQUETTES
            .iter()
            .map(|p| PauliString::on_support(n, p, Pauli::Z).unwrap())
            .collect();
        let all: Vec<usize> = (0..n).collect();
        StabilizerCode {
            name: "color-7".to_string(),
            kind: CodeKind::Color,
            n,
            distance: 3,
            x_generators,
            z_generators,
            logical_x: PauliString::on_support(n, &all, Pauli::X).unwrap(),
            logical_z: PauliString::on_support(n, &all, Pauli::Z).unwrap(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> CodeKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn distance(&self) -> usize {
        self.distance
    }

    pub fn generators(&self, family: StabilizerFamily) -> &[PauliString] {
        match family {
            StabilizerFamily::XType => &self.x_generators,
            StabilizerFamily::ZType => &self.z_generators,
        }
    }

    pub fn logical_x(&self) -> &PauliString {
        &self.logical_x
    }

    pub fn logical_z(&self) -> &PauliString {
        &self.logical_z
    }

    /// Syndrome of `error` against the generators of `family`: entry i is
    /// −1 exactly when the error anticommutes with generator i.
    pub fn syndrome_of(
        &self,
        error: &PauliString,
        family: StabilizerFamily,
    ) -> Result<Syndrome, CodeError> {
        if error.n() != self.n {
            return Err(CodeError::DimensionMismatch { got: error.n(), expected: self.n });
        }
        let minus = self
            .generators(family)
            .iter()
            .map(|g| !error.commutes(g).unwrap())
            .collect();
        Ok(Syndrome { family, minus })
    }

    /// Structural sanity: generators commute mutually and with both
    /// logicals, and the logicals anticommute with each other.
    pub fn validate(&self) -> Result<(), String> {
        let gens: Vec<&PauliString> =
            self.x_generators.iter().chain(&self.z_generators).collect();
        for (i, a) in gens.iter().enumerate() {
            for b in &gens[i + 1..] {
                if !a.commutes(b).map_err(|e| e.to_string())? {
                    return Err(format!("generators {a} and {b} anticommute"));
                }
            }
        }
        for g in &gens {
            for (label, l) in [("X_L", &self.logical_x), ("Z_L", &self.logical_z)] {
                if !l.commutes(g).map_err(|e| e.to_string())? {
                    return Err(format!("{label} anticommutes with generator {g}"));
                }
            }
        }
        if self.logical_x.commutes(&self.logical_z).map_err(|e| e.to_string())? {
            return Err("logicals X_L and Z_L must anticommute".to_string());
        }
        Ok(())
    }
}

/// Measured stabilizer eigenvalues for one generator family.
///
/// `minus[i]` is true when generator i read −1. Rendered as a sign
/// tuple, e.g. `+-+` (ASCII `+`/`-`).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Syndrome {
    family: StabilizerFamily,
    minus: Vec<bool>,
}

impl Syndrome {
    pub fn new(family: StabilizerFamily, minus: Vec<bool>) -> Self {
        Syndrome { family, minus }
    }

    /// Parses a sign tuple such as `+-+` (also accepts U+2212).
    pub fn from_signs(family: StabilizerFamily, signs: &str) -> Self {
        let minus = signs
            .chars()
            .map(|c| match c {
                '+' => false,
                '-' | '\u{2212}' => true,
                other => panic!("invalid sign character `{other}`"),
            })
            .collect();
        Syndrome { family, minus }
    }

    pub fn family(&self) -> StabilizerFamily {
        self.family
    }

    pub fn len(&self) -> usize {
        self.minus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.minus.is_empty()
    }

    pub fn is_trivial(&self) -> bool {
        self.minus.iter().all(|&m| !m)
    }

    pub fn bits(&self) -> &[bool] {
        &self.minus
    }

    /// Elementwise product of two syndromes (sign multiplication).
    pub fn product(&self, other: &Syndrome) -> Result<Syndrome, CodeError> {
        if self.minus.len() != other.minus.len() {
            return Err(CodeError::SyndromeLength {
                got: other.minus.len(),
                expected: self.minus.len(),
            });
        }
        Ok(Syndrome {
            family: self.family,
            minus: self
                .minus
                .iter()
                .zip(&other.minus)
                .map(|(&a, &b)| a ^ b)
                .collect(),
        })
    }
}

impl fmt::Display for Syndrome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &m in &self.minus {
            write!(f, "{}", if m { '-' } else { '+' })?;
        }
        Ok(())
    }
}

/// Table scope: the standard minimum-weight table or the two-entry flag
/// table used when flagged and unflagged readouts disagree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TableScope {
    Standard,
    Flag,
}

/// Syndrome-to-recovery lookup table for one generator family.
#[derive(Debug, Clone)]
pub struct DecodeTable {
    code_name: String,
    family: StabilizerFamily,
    scope: TableScope,
    entries: HashMap<Vec<bool>, PauliString>,
}

impl DecodeTable {
    pub fn family(&self) -> StabilizerFamily {
        self.family
    }

    pub fn scope(&self) -> TableScope {
        self.scope
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Recovery for a syndrome, if present.
    pub fn lookup(&self, syndrome: &Syndrome) -> Result<Option<&PauliString>, CodeError> {
        if syndrome.family != self.family {
            return Err(CodeError::FamilyMismatch { got: syndrome.family, expected: self.family });
        }
        Ok(self.entries.get(syndrome.bits()))
    }

    /// Entries in rendering order: identity first, then recoveries by
    /// weight and ascending support.
    pub fn sorted_entries(&self) -> Vec<(Syndrome, PauliString)> {
        let mut rows: Vec<(Syndrome, PauliString)> = self
            .entries
            .iter()
            .map(|(bits, rec)| (Syndrome::new(self.family, bits.clone()), *rec))
            .collect();
        rows.sort_by_key(|(_, rec)| (rec.weight(), rec.support().collect::<Vec<_>>()));
        rows
    }

    /// Plain-text rendering used by the CLI `tables` subcommand; one
    /// `signs | recovery` line per entry.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (syn, rec) in self.sorted_entries() {
            out.push_str(&format!("{syn} | {rec}\n"));
        }
        out
    }

    /// JSON export: list of `{syndrome, recovery}` rows in rendered order.
    pub fn to_json(&self) -> serde_json::Value {
        let rows: Vec<serde_json::Value> = self
            .sorted_entries()
            .iter()
            .map(|(syn, rec)| {
                serde_json::json!({ "syndrome": syn.to_string(), "recovery": rec.to_string() })
            })
            .collect();
        serde_json::json!({
            "code": self.code_name,
            "family": format!("{}", self.family),
            "scope": self.scope,
            "entries": rows,
        })
    }
}

/// Builds the minimum-weight lookup table for one family of `code`.
///
/// Errors of the detected Pauli kind are enumerated in increasing weight
/// up to floor((d−1)/2); the first error producing each syndrome wins,
/// with ties at equal weight broken by the lexicographically smallest
/// qubit-index set (the enumeration order below).
pub fn build_lookup_table(
    code: &StabilizerCode,
    family: StabilizerFamily,
) -> Result<DecodeTable, CodeError> {
    if code.generators(family).is_empty() {
        return Err(CodeError::NoSuchFamily {
            code: code.name.clone(),
            family,
        });
    }
    let pauli = family.detected_error();
    let max_weight = (code.distance - 1) / 2;
    let mut entries: HashMap<Vec<bool>, PauliString> = HashMap::new();
    entries.insert(
        vec![false; code.generators(family).len()],
        PauliString::identity(code.n),
    );
    for weight in 1..=max_weight {
        for support in combinations(code.n, weight) {
            let error = PauliString::on_support(code.n, &support, pauli)?;
            let syndrome = code.syndrome_of(&error, family)?;
            entries.entry(syndrome.bits().to_vec()).or_insert(error);
        }
    }
    Ok(DecodeTable {
        code_name: code.name.clone(),
        family,
        scope: TableScope::Standard,
        entries,
    })
}

/// The two-entry flag-error table for the seven-qubit color code.
///
/// Z-family: `+-+` -> X3X7 and `++-` -> X4X6; the X-family table is the
/// self-dual image with Z recoveries.
pub fn flag_lookup_table(family: StabilizerFamily) -> DecodeTable {
    let code = StabilizerCode::color_code();
    let pauli = family.detected_error();
    let mut entries = HashMap::new();
    for support in [[2usize, 6], [3, 5]] {
        // 0-indexed {3,7} and {4,6}
        let recovery = PauliString::on_support(code.n, &support, pauli).unwrap();
        let syndrome = code.syndrome_of(&recovery, family).unwrap();
        entries.insert(syndrome.bits().to_vec(), recovery);
    }
    DecodeTable {
        code_name: code.name,
        family,
        scope: TableScope::Flag,
        entries,
    }
}

/// k-subsets of 0..n in lexicographic order.
fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(k);
    fn recurse(n: usize, k: usize, start: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if current.len() == k {
            out.push(current.clone());
            return;
        }
        for q in start..n {
            current.push(q);
            recurse(n, k, q + 1, current, out);
            current.pop();
        }
    }
    recurse(n, k, 0, &mut current, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ps(s: &str, n: usize) -> PauliString {
        PauliString::parse_with_n(s, n).unwrap()
    }

    #[test]
    fn bit_flip_generators_and_logicals() {
        let code = StabilizerCode::bit_flip(3).unwrap();
        assert_eq!(code.generators(StabilizerFamily::ZType), &[ps("Z1 Z2", 3), ps("Z2 Z3", 3)]);
        assert_eq!(code.logical_z(), &ps("Z1", 3));
        assert_eq!(code.logical_x(), &ps("X1 X2 X3", 3));
        assert!(code.validate().is_ok());

        let d5 = StabilizerCode::bit_flip(5).unwrap();
        assert_eq!(d5.generators(StabilizerFamily::ZType).len(), 4);
        assert!(d5.validate().is_ok());
    }

    #[test]
    fn phase_flip_is_dual_of_bit_flip() {
        let code = StabilizerCode::phase_flip(3).unwrap();
        assert_eq!(code.generators(StabilizerFamily::XType), &[ps("X1 X2", 3), ps("X2 X3", 3)]);
        assert_eq!(code.logical_x(), &ps("Z1 Z2 Z3", 3));
        assert_eq!(code.logical_z(), &ps("X1", 3));
        assert!(code.validate().is_ok());

        let d5 = StabilizerCode::phase_flip(5).unwrap();
        assert_eq!(d5.logical_x(), &ps("Z1 Z2 Z3 Z4 Z5", 5));
    }

    #[test]
    fn rejects_even_or_small_distance() {
        assert!(StabilizerCode::bit_flip(4).is_err());
        assert!(StabilizerCode::bit_flip(1).is_err());
        assert!(StabilizerCode::phase_flip(2).is_err());
    }

    #[test]
    fn color_code_generators() {
        let code = StabilizerCode::color_code();
        assert_eq!(code.n(), 7);
        assert_eq!(code.distance(), 3);
        assert_eq!(code.generators(StabilizerFamily::ZType)[1], ps("Z4 Z5 Z6 Z7", 7));
        assert_eq!(code.generators(StabilizerFamily::XType)[0], ps("X1 X3 X5 X7", 7));
        assert!(code.validate().is_ok());
        // X_L equals X2X4X6 modulo the first X generator.
        let reduced = code
            .logical_x()
            .compose(&code.generators(StabilizerFamily::XType)[0])
            .unwrap();
        assert_eq!(reduced.abs(), ps("X2 X4 X6", 7));
    }

    #[test]
    fn syndrome_examples() {
        let code = StabilizerCode::color_code();
        let syn = code.syndrome_of(&ps("X5", 7), StabilizerFamily::ZType).unwrap();
        assert_eq!(syn.to_string(), "--+");
        // A weight-2 error with the same syndrome.
        let syn2 = code.syndrome_of(&ps("X1 X4", 7), StabilizerFamily::ZType).unwrap();
        assert_eq!(syn2, syn);
        // Identity has the trivial syndrome everywhere.
        let id = PauliString::identity(7);
        assert!(code.syndrome_of(&id, StabilizerFamily::ZType).unwrap().is_trivial());
        assert!(code.syndrome_of(&id, StabilizerFamily::XType).unwrap().is_trivial());
    }

    #[test]
    fn syndrome_dimension_mismatch() {
        let code = StabilizerCode::color_code();
        let err = code.syndrome_of(&PauliString::identity(5), StabilizerFamily::ZType);
        assert!(matches!(err, Err(CodeError::DimensionMismatch { .. })));
    }

    #[test]
    fn syndrome_is_multiplicative() {
        let code = StabilizerCode::color_code();
        let e1 = ps("X2 X5", 7);
        let e2 = ps("X3", 7);
        let combined = e1.compose(&e2).unwrap();
        let s12 = code.syndrome_of(&combined, StabilizerFamily::ZType).unwrap();
        let s1 = code.syndrome_of(&e1, StabilizerFamily::ZType).unwrap();
        let s2 = code.syndrome_of(&e2, StabilizerFamily::ZType).unwrap();
        assert_eq!(s12, s1.product(&s2).unwrap());
    }

    #[test]
    fn color_code_table_matches_printed_lookup() {
        let code = StabilizerCode::color_code();
        let table = build_lookup_table(&code, StabilizerFamily::ZType).unwrap();
        assert_eq!(table.len(), 8);
        let expect = [
            ("+++", "I"),
            ("-++", "X1"),
            ("++-", "X2"),
            ("-+-", "X3"),
            ("+-+", "X4"),
            ("--+", "X5"),
            ("+--", "X6"),
            ("---", "X7"),
        ];
        for (signs, rec) in expect {
            let syn = Syndrome::from_signs(StabilizerFamily::ZType, signs);
            assert_eq!(
                table.lookup(&syn).unwrap().unwrap(),
                &ps(rec, 7),
                "syndrome {signs}"
            );
        }
        // Self-dual X-family table carries the Z recoveries on the same rows.
        let xtable = build_lookup_table(&code, StabilizerFamily::XType).unwrap();
        let syn = Syndrome::from_signs(StabilizerFamily::XType, "-+-");
        assert_eq!(xtable.lookup(&syn).unwrap().unwrap(), &ps("Z3", 7));
    }

    #[test]
    fn flag_table_rows() {
        let table = flag_lookup_table(StabilizerFamily::ZType);
        assert_eq!(table.len(), 2);
        let a = Syndrome::from_signs(StabilizerFamily::ZType, "+-+");
        let b = Syndrome::from_signs(StabilizerFamily::ZType, "++-");
        assert_eq!(table.lookup(&a).unwrap().unwrap(), &ps("X3 X7", 7));
        assert_eq!(table.lookup(&b).unwrap().unwrap(), &ps("X4 X6", 7));
        // Anything else is absent; callers fall back to the standard table.
        let other = Syndrome::from_signs(StabilizerFamily::ZType, "-++");
        assert_eq!(table.lookup(&other).unwrap(), None);
        assert_eq!(table.lookup(&Syndrome::from_signs(StabilizerFamily::ZType, "+++")).unwrap(), None);
    }

    #[test]
    fn bit_flip_d5_table_matches_exhaustive_minimum_weight() {
        let code = StabilizerCode::bit_flip(5).unwrap();
        let table = build_lookup_table(&code, StabilizerFamily::ZType).unwrap();
        assert_eq!(table.len(), 16);
        // Brute force over all 2^5 X-error patterns: the table entry for a
        // pattern's syndrome must have minimal weight among patterns with
        // that syndrome.
        for bits in 0u32..32 {
            let support: Vec<usize> = (0..5).filter(|q| bits & (1 << q) != 0).collect();
            let error = PauliString::on_support(5, &support, Pauli::X).unwrap();
            let syn = code.syndrome_of(&error, StabilizerFamily::ZType).unwrap();
            let recovery = table.lookup(&syn).unwrap().expect("table must be complete");
            assert!(recovery.weight() <= error.weight());
            // Recovery must actually produce the same syndrome.
            assert_eq!(code.syndrome_of(recovery, StabilizerFamily::ZType).unwrap(), syn);
        }
    }

    #[test]
    fn recovery_times_error_commutes_with_generators() {
        // For every code, applying the looked-up recovery to the error that
        // produced the syndrome yields an operator commuting with all
        // generators of the family.
        let codes = [
            StabilizerCode::bit_flip(3).unwrap(),
            StabilizerCode::bit_flip(5).unwrap(),
            StabilizerCode::color_code(),
        ];
        for code in &codes {
            let table = build_lookup_table(code, StabilizerFamily::ZType).unwrap();
            let max_w = (code.distance() - 1) / 2;
            for w in 0..=max_w {
                for support in super::combinations(code.n(), w) {
                    let error = PauliString::on_support(code.n(), &support, Pauli::X).unwrap();
                    let syn = code.syndrome_of(&error, StabilizerFamily::ZType).unwrap();
                    let rec = table.lookup(&syn).unwrap().unwrap();
                    let residual = error.compose(rec).unwrap();
                    for g in code.generators(StabilizerFamily::ZType) {
                        assert!(residual.commutes(g).unwrap());
                    }
                }
            }
        }
    }

    #[test]
    fn table_json_export_is_stable() {
        let table = flag_lookup_table(StabilizerFamily::ZType);
        let json = table.to_json();
        assert_eq!(json["entries"][0]["recovery"], "X3 X7");
        assert_eq!(json["entries"][0]["syndrome"], "+-+");
    }
}
