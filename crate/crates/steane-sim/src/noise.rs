//! The effective circuit-level noise model: depolarizing gate channels,
//! SPAM bit flips, idle dephasing and the asymmetric mid-circuit
//! detection channel, with per-instruction fault samplers.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::Instruction;
use crate::pauli::Pauli;

#[derive(Debug, Error, PartialEq)]
pub enum NoiseError {
    #[error("probability {name} = {value} outside [0, 1]")]
    BadProbability { name: &'static str, value: f64 },
    #[error("mid-circuit rates sum to {0}, exceeding 1")]
    MidCircuitSum(f64),
    #[error("T2 must be positive, got {0}")]
    BadT2(f64),
    #[error("idle duration must be non-negative, got {0}")]
    NegativeDuration(f64),
    #[error("fault sampling is defined for gates, not {0:?}")]
    NotAGate(Instruction),
}

/// All parameters of the effective noise model.
///
/// The defaults are the experimentally calibrated trapped-ion rates
/// (`paper_default`). Set `idle_enabled`/`mid_circuit_enabled` to false to
/// switch those channels off without touching the rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseModel {
    /// Depolarizing rate of single-qubit gates.
    pub p_1q: f64,
    /// Depolarizing rate of two-qubit gates.
    pub p_2q: f64,
    /// X-flip probability after qubit preparation and reset.
    pub p_init: f64,
    /// X-flip probability before measurement.
    pub p_meas: f64,
    /// Mid-circuit detection channel: per data qubit X rate.
    pub p_mid_x: f64,
    /// Mid-circuit detection channel: per data qubit Y rate.
    pub p_mid_y: f64,
    /// Mid-circuit detection channel: per data qubit Z rate.
    pub p_mid_z: f64,
    /// Idle dephasing time constant in microseconds.
    pub t2_us: f64,
    /// Charge idle dephasing to non-operand qubits during gates.
    pub idle_enabled: bool,
    /// Apply the asymmetric channel at mid-circuit detection markers.
    pub mid_circuit_enabled: bool,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self::paper_default()
    }
}

impl NoiseModel {
    /// The calibrated profile: p_2q = 0.027, p_1q = 0.0036,
    /// p_meas = p_init = 0.003, mid-circuit (0.011, 0.024, 0.035),
    /// T2 = 50 ms.
    pub fn paper_default() -> Self {
        NoiseModel {
            p_1q: 0.0036,
            p_2q: 0.027,
            p_init: 0.003,
            p_meas: 0.003,
            p_mid_x: 0.011,
            p_mid_y: 0.024,
            p_mid_z: 0.035,
            t2_us: 50_000.0,
            idle_enabled: true,
            mid_circuit_enabled: true,
        }
    }

    /// Every rate zero; circuits simulate noiselessly.
    pub fn noiseless() -> Self {
        NoiseModel {
            p_1q: 0.0,
            p_2q: 0.0,
            p_init: 0.0,
            p_meas: 0.0,
            p_mid_x: 0.0,
            p_mid_y: 0.0,
            p_mid_z: 0.0,
            t2_us: 50_000.0,
            idle_enabled: false,
            mid_circuit_enabled: false,
        }
    }

    /// The limiting case with only two-qubit gate errors.
    pub fn two_qubit_only(p_2q: f64) -> Self {
        NoiseModel { p_2q, ..Self::noiseless() }
    }

    pub fn validate(&self) -> Result<(), NoiseError> {
        let probs = [
            ("p_1q", self.p_1q),
            ("p_2q", self.p_2q),
            ("p_init", self.p_init),
            ("p_meas", self.p_meas),
            ("p_mid_x", self.p_mid_x),
            ("p_mid_y", self.p_mid_y),
            ("p_mid_z", self.p_mid_z),
        ];
        for (name, value) in probs {
            if !(0.0..=1.0).contains(&value) || value.is_nan() {
                return Err(NoiseError::BadProbability { name, value });
            }
        }
        let mid_sum = self.p_mid_x + self.p_mid_y + self.p_mid_z;
        if mid_sum > 1.0 {
            return Err(NoiseError::MidCircuitSum(mid_sum));
        }
        if self.t2_us.is_nan() || self.t2_us <= 0.0 {
            return Err(NoiseError::BadT2(self.t2_us));
        }
        Ok(())
    }

    pub fn is_noiseless(&self) -> bool {
        self.p_1q == 0.0
            && self.p_2q == 0.0
            && self.p_init == 0.0
            && self.p_meas == 0.0
            && !self.idle_enabled
            && (!self.mid_circuit_enabled
                || (self.p_mid_x == 0.0 && self.p_mid_y == 0.0 && self.p_mid_z == 0.0))
    }
}

/// Fault drawn for one gate, if any.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateFault {
    Single(Pauli),
    /// On (control, target) / (first, second) operand order.
    Two(Pauli, Pauli),
}

const SINGLE_FAULTS: [Pauli; 3] = [Pauli::X, Pauli::Y, Pauli::Z];

/// The 15 non-identity two-qubit Pauli pairs, row-major over
/// {I,X,Y,Z} x {I,X,Y,Z} minus (I, I).
pub const TWO_QUBIT_FAULTS: [(Pauli, Pauli); 15] = [
    (Pauli::I, Pauli::X),
    (Pauli::I, Pauli::Y),
    (Pauli::I, Pauli::Z),
    (Pauli::X, Pauli::I),
    (Pauli::X, Pauli::X),
    (Pauli::X, Pauli::Y),
    (Pauli::X, Pauli::Z),
    (Pauli::Y, Pauli::I),
    (Pauli::Y, Pauli::X),
    (Pauli::Y, Pauli::Y),
    (Pauli::Y, Pauli::Z),
    (Pauli::Z, Pauli::I),
    (Pauli::Z, Pauli::X),
    (Pauli::Z, Pauli::Y),
    (Pauli::Z, Pauli::Z),
];

/// Samples the depolarizing fault applied after an ideal gate: uniform
/// over {X,Y,Z} with total probability `p_1q` for single-qubit gates,
/// uniform over the 15 two-qubit Paulis with total `p_2q` for CNOTs.
pub fn sample_gate_fault<R: Rng + ?Sized>(
    instr: &Instruction,
    model: &NoiseModel,
    rng: &mut R,
) -> Result<Option<GateFault>, NoiseError> {
    match instr {
        Instruction::Hadamard { .. }
        | Instruction::PauliX { .. }
        | Instruction::PauliY { .. }
        | Instruction::PauliZ { .. } => {
            if model.p_1q > 0.0 && rng.random_bool(model.p_1q) {
                let k = rng.random_range(0..3);
                Ok(Some(GateFault::Single(SINGLE_FAULTS[k])))
            } else {
                Ok(None)
            }
        }
        Instruction::Cnot { .. } => {
            if model.p_2q > 0.0 && rng.random_bool(model.p_2q) {
                let k = rng.random_range(0..15);
                let (a, b) = TWO_QUBIT_FAULTS[k];
                Ok(Some(GateFault::Two(a, b)))
            } else {
                Ok(None)
            }
        }
        other => Err(NoiseError::NotAGate(other.clone())),
    }
}

/// SPAM fault: X after preparation/reset (`p_init`) or X before a
/// measurement (`p_meas`).
pub fn sample_spam_fault<R: Rng + ?Sized>(p: f64, rng: &mut R) -> bool {
    p > 0.0 && rng.random_bool(p)
}

/// Closed-form idle dephasing probability p = (1 - exp(-t/T2)) / 2.
pub fn idle_dephasing_prob(t_us: f64, t2_us: f64) -> Result<f64, NoiseError> {
    if t_us < 0.0 {
        return Err(NoiseError::NegativeDuration(t_us));
    }
    if t2_us.is_nan() || t2_us <= 0.0 {
        return Err(NoiseError::BadT2(t2_us));
    }
    Ok(0.5 * (1.0 - (-t_us / t2_us).exp()))
}

/// Z faults on the qubits idling while `instr` executes: every non-operand
/// qubit independently dephases with `idle_dephasing_prob(duration, T2)`.
pub fn sample_idle_faults<R: Rng + ?Sized>(
    instr: &Instruction,
    n_qubits: usize,
    model: &NoiseModel,
    rng: &mut R,
) -> Vec<usize> {
    if !model.idle_enabled {
        return Vec::new();
    }
    let duration = instr.duration_us();
    if duration <= 0.0 {
        return Vec::new();
    }
    let p = idle_dephasing_prob(duration, model.t2_us).expect("validated model");
    if p == 0.0 {
        return Vec::new();
    }
    let operands = instr.operands();
    (0..n_qubits)
        .filter(|q| !operands.contains(q))
        .filter(|_| rng.random_bool(p))
        .collect()
}

/// The asymmetric depolarizing channel applied to every data qubit at one
/// mid-circuit detection event.
pub fn sample_mid_circuit_faults<R: Rng + ?Sized>(
    data_qubits: &[usize],
    model: &NoiseModel,
    rng: &mut R,
) -> Vec<(usize, Pauli)> {
    if !model.mid_circuit_enabled {
        return Vec::new();
    }
    let (px, py, pz) = (model.p_mid_x, model.p_mid_y, model.p_mid_z);
    if px + py + pz == 0.0 {
        return Vec::new();
    }
    let mut faults = Vec::new();
    for &q in data_qubits {
        let u: f64 = rng.random();
        let pauli = if u < px {
            Some(Pauli::X)
        } else if u < px + py {
            Some(Pauli::Y)
        } else if u < px + py + pz {
            Some(Pauli::Z)
        } else {
            None
        };
        if let Some(p) = pauli {
            faults.push((q, p));
        }
    }
    faults
}
