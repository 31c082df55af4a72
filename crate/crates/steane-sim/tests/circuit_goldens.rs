//! Golden-file tests pinning the reviewed circuit transcriptions: the
//! verified encoding circuit, the GHZ auxiliaries, the Steane full cycle
//! and the flagged readout schedule. A diff here means the transcription
//! changed and the exhaustive fault-tolerance sweep must be re-reviewed.

use steane_sim::builders::{
    encode_circuit, flag_cycle, ghz_aux_prep, steane_full_cycle, FlagMode, LogicalState,
};
use steane_sim::circuit::Circuit;
use steane_sim::codes::{CodeKind, StabilizerCode};

fn assert_matches_golden(circuit: &Circuit, name: &str) {
    let path = format!("{}/tests/goldens/{name}", env!("CARGO_MANIFEST_DIR"));
    let golden = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("read {path}: {e}"));
    let text = circuit.to_text();
    assert_eq!(text, golden, "transcription drifted from {name}");
    // The text format is round-trippable.
    let parsed = Circuit::from_text(&golden).unwrap();
    assert_eq!(&parsed, circuit);
}

#[test]
fn encoding_circuit_matches_golden() {
    let color = StabilizerCode::color_code();
    let zero = encode_circuit(&color, LogicalState::ZeroL, true).unwrap();
    assert_matches_golden(&zero, "encode_color_zero_verified.txt");
    let plus = encode_circuit(&color, LogicalState::PlusL, true).unwrap();
    assert_matches_golden(&plus, "encode_color_plus_verified.txt");
}

#[test]
fn ghz_aux_circuits_match_goldens() {
    let d5 = ghz_aux_prep(5, CodeKind::BitFlip, true).unwrap();
    assert_matches_golden(&d5, "ghz_aux_d5_bitflip_flagged.txt");
    let d3 = ghz_aux_prep(3, CodeKind::BitFlip, false).unwrap();
    assert_matches_golden(&d3, "ghz_aux_d3_bitflip.txt");
}

#[test]
fn steane_full_cycle_matches_golden() {
    let color = StabilizerCode::color_code();
    let cycle = steane_full_cycle(&color).unwrap();
    assert_matches_golden(&cycle, "steane_full_cycle_color.txt");
}

#[test]
fn flag_cycle_matches_golden() {
    let color = StabilizerCode::color_code();
    let cycle = flag_cycle(&color, FlagMode::Adaptive).unwrap();
    assert_matches_golden(&cycle, "flag_cycle_adaptive_color.txt");
}
