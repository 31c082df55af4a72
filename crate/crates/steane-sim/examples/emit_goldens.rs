//! Regenerates the golden circuit fixtures under tests/goldens/.
use std::fs;
use steane_sim::builders::{
    encode_circuit, flag_cycle, ghz_aux_prep, steane_full_cycle, FlagMode, LogicalState,
};
use steane_sim::codes::{CodeKind, StabilizerCode};

fn main() {
    let dir = std::path::Path::new("tests/goldens");
    fs::create_dir_all(dir).unwrap();
    let color = StabilizerCode::color_code();
    let entries = [
        ("encode_color_zero_verified.txt", encode_circuit(&color, LogicalState::ZeroL, true).unwrap()),
        ("encode_color_plus_verified.txt", encode_circuit(&color, LogicalState::PlusL, true).unwrap()),
        ("ghz_aux_d5_bitflip_flagged.txt", ghz_aux_prep(5, CodeKind::BitFlip, true).unwrap()),
        ("ghz_aux_d3_bitflip.txt", ghz_aux_prep(3, CodeKind::BitFlip, false).unwrap()),
        ("steane_full_cycle_color.txt", steane_full_cycle(&color).unwrap()),
        ("flag_cycle_adaptive_color.txt", flag_cycle(&color, FlagMode::Adaptive).unwrap()),
    ];
    for (name, circuit) in entries {
        fs::write(dir.join(name), circuit.to_text()).unwrap();
        println!("wrote {name}");
    }
}
