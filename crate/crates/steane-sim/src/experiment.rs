//! Experiment configuration, figure presets, the Monte-Carlo runner and
//! result emission (JSON/CSV).
//!
//! Configs are TOML with a fixed schema; unknown keys are rejected so a
//! typo in a noise rate cannot silently corrupt a reproduction. Results
//! are bitwise reproducible given (config, seed, version): the worker
//! count and wall time are deliberately excluded from the serialized
//! artifact.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::builders::{
    compose_experiment, code_for, Experiment, ExperimentSpec, LogicalState, Protocol,
};
use crate::circuit::DiscardReason;
use crate::codes::CodeKind;
use crate::engine::{run_many_map, RunOptions, VerificationPolicy};
use crate::noise::NoiseModel;
use crate::protocol::{decode_shot, check_fault_tolerance, DecodeTables, FtReport, ShotVerdict};
use crate::stats::FidelityEstimate;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("unknown preset `{0}` (expected fig3, fig4, figA6 or figA7)")]
    UnknownPreset(String),
    #[error(transparent)]
    Build(#[from] crate::builders::BuildError),
    #[error(transparent)]
    Code(#[from] crate::codes::CodeError),
    #[error(transparent)]
    Noise(#[from] crate::noise::NoiseError),
    #[error(transparent)]
    Engine(#[from] crate::engine::EngineError),
    #[error(transparent)]
    Protocol(#[from] crate::protocol::ProtocolError),
    #[error(transparent)]
    Stats(#[from] crate::stats::StatsError),
    #[error("decode failed on shot {shot}: {message}")]
    Decode { shot: u64, message: String },
    #[error("all {0} shots were discarded; fidelity undefined")]
    AllDiscarded(u64),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// How verification-discarded shots enter the statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DiscardPolicy {
    /// Discard and exclude from fidelity denominators (the default,
    /// matching experimental post-selection).
    #[default]
    Exclude,
    /// Ignore verification outcomes; every shot is evaluated.
    Keep,
    /// Resample each shot until its verifications pass.
    Repeat,
}

impl DiscardPolicy {
    fn verification_policy(self) -> VerificationPolicy {
        match self {
            DiscardPolicy::Exclude => VerificationPolicy::Discard,
            DiscardPolicy::Keep => VerificationPolicy::Keep,
            DiscardPolicy::Repeat => VerificationPolicy::RepeatUntilSuccess,
        }
    }
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn one() -> u64 {
    1
}

/// One experiment: a code/protocol/state choice swept over round counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub code: CodeKind,
    pub distance: usize,
    pub protocol: Protocol,
    pub initial_state: LogicalState,
    pub rounds: Vec<usize>,
    pub shots: u64,
    #[serde(default = "one")]
    pub seed: u64,
    /// Worker-thread count; not part of the result artifact (results do
    /// not depend on it).
    #[serde(default = "default_workers", skip_serializing)]
    pub workers: usize,
    #[serde(default)]
    pub discard_policy: DiscardPolicy,
    #[serde(default)]
    pub noise: NoiseModel,
}

impl ExperimentConfig {
    /// Parses and validates the TOML schema; unknown keys are rejected.
    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        let config: ExperimentConfig =
            toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.noise.validate()?;
        if self.shots == 0 {
            return Err(HarnessError::Config("shots must be at least 1".into()));
        }
        if self.rounds.is_empty() {
            return Err(HarnessError::Config("rounds must list at least one round count".into()));
        }
        if self.discard_policy == DiscardPolicy::Keep && self.protocol == Protocol::FlagPostselect {
            return Err(HarnessError::Config(
                "discard_policy = \"keep\" cannot be combined with flag_postselect".into(),
            ));
        }
        code_for(self.code, self.distance)?;
        // Protocol/code compatibility errors surface with the composer's
        // message before any shots run.
        compose_experiment(&ExperimentSpec {
            code: self.code,
            distance: self.distance,
            protocol: self.protocol,
            initial_state: self.initial_state,
            rounds: self.rounds.iter().copied().max().unwrap_or(0),
        })?;
        Ok(())
    }
}

/// One fidelity point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub code: CodeKind,
    pub distance: usize,
    pub protocol: Protocol,
    pub initial_state: LogicalState,
    pub rounds: usize,
    pub shots: u64,
    pub seed: u64,
    pub n_kept: u64,
    pub n_discarded: u64,
    pub discarded_encoding: u64,
    pub discarded_ghz: u64,
    pub discarded_postselect: u64,
    pub p_hat: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
}

impl ResultRow {
    pub fn estimate(&self) -> FidelityEstimate {
        FidelityEstimate {
            p_hat: self.p_hat,
            n_kept: self.n_kept,
            n_discarded: self.n_discarded,
            wilson_low: self.wilson_low,
            wilson_high: self.wilson_high,
            z: 1.0,
        }
    }
}

/// Complete result artifact. Serialization is byte-stable for a given
/// (config, seed, version); wall time is carried but never serialized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub schema_version: u32,
    pub engine_version: String,
    pub configs: Vec<ExperimentConfig>,
    /// Qubit-to-register assignments used, one note per distinct layout.
    pub layouts: Vec<String>,
    pub rows: Vec<ResultRow>,
    #[serde(skip, default)]
    pub wall_time_ms: f64,
}

impl ExperimentResult {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("serializable result");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    /// Fixed-schema CSV; one line per row.
    pub const CSV_HEADER: &'static str = "code,distance,protocol,initial_state,rounds,shots,seed,\
         n_kept,n_discarded,discarded_encoding,discarded_ghz,discarded_postselect,\
         p_hat,wilson_low,wilson_high";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                config_name(&r.code),
                r.distance,
                protocol_name(&r.protocol),
                state_name(&r.initial_state),
                r.rounds,
                r.shots,
                r.seed,
                r.n_kept,
                r.n_discarded,
                r.discarded_encoding,
                r.discarded_ghz,
                r.discarded_postselect,
                r.p_hat,
                r.wilson_low,
                r.wilson_high,
            ));
        }
        out
    }

    pub fn find_row(
        &self,
        protocol: Protocol,
        state: LogicalState,
        distance: usize,
        code: CodeKind,
        rounds: usize,
    ) -> Option<&ResultRow> {
        self.rows.iter().find(|r| {
            r.protocol == protocol
                && r.initial_state == state
                && r.distance == distance
                && r.code == code
                && r.rounds == rounds
        })
    }
}

pub fn config_name(code: &CodeKind) -> &'static str {
    match code {
        CodeKind::BitFlip => "bit_flip",
        CodeKind::PhaseFlip => "phase_flip",
        CodeKind::Color => "color",
    }
}

pub fn protocol_name(protocol: &Protocol) -> &'static str {
    match protocol {
        Protocol::SteaneFull => "steane_full",
        Protocol::SteaneHalf => "steane_half",
        Protocol::FlagAdaptive => "flag_adaptive",
        Protocol::FlagPostselect => "flag_postselect",
    }
}

pub fn state_name(state: &LogicalState) -> &'static str {
    match state {
        LogicalState::ZeroL => "zero_L",
        LogicalState::PlusL => "plus_L",
    }
}

#[derive(Debug, Default, Clone, Copy)]
struct Tallies {
    successes: u64,
    failures: u64,
    discarded_encoding: u64,
    discarded_ghz: u64,
    discarded_postselect: u64,
}

impl Tallies {
    fn kept(&self) -> u64 {
        self.successes + self.failures
    }

    fn discarded(&self) -> u64 {
        self.discarded_encoding + self.discarded_ghz + self.discarded_postselect
    }
}

/// Per-round seed: distinct experiments within one config draw from
/// distinct, deterministic streams.
fn round_seed(seed: u64, round: usize) -> u64 {
    seed.wrapping_add(1_000_003u64.wrapping_mul(round as u64))
}

/// Optional artifact sinks for debugging runs: the raw-outcome binary
/// spool and JSON-lines decode traces. Either forces the slower
/// collect-then-decode path; leave both unset for production runs.
#[derive(Default)]
pub struct DebugSinks<'a> {
    pub spool: Option<&'a mut dyn std::io::Write>,
    pub trace: Option<&'a mut dyn std::io::Write>,
}

impl DebugSinks<'_> {
    fn active(&self) -> bool {
        self.spool.is_some() || self.trace.is_some()
    }
}

/// Composes, runs and decodes one experiment per requested round count.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult, HarnessError> {
    run_experiment_with(config, DebugSinks::default())
}

/// [`run_experiment`] with optional spool/trace sinks.
pub fn run_experiment_with(
    config: &ExperimentConfig,
    mut sinks: DebugSinks<'_>,
) -> Result<ExperimentResult, HarnessError> {
    config.validate()?;
    let start = Instant::now();
    let mut rows = Vec::new();
    let mut layouts: Vec<String> = Vec::new();
    run_into_with(config, &mut rows, &mut layouts, &mut sinks)?;
    Ok(ExperimentResult {
        schema_version: 1,
        engine_version: env!("CARGO_PKG_VERSION").to_string(),
        configs: vec![config.clone()],
        layouts,
        rows,
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

fn run_into(
    config: &ExperimentConfig,
    rows: &mut Vec<ResultRow>,
    layouts: &mut Vec<String>,
) -> Result<(), HarnessError> {
    run_into_with(config, rows, layouts, &mut DebugSinks::default())
}

fn run_into_with(
    config: &ExperimentConfig,
    rows: &mut Vec<ResultRow>,
    layouts: &mut Vec<String>,
    sinks: &mut DebugSinks<'_>,
) -> Result<(), HarnessError> {
    let options = RunOptions { verification: config.discard_policy.verification_policy() };
    for &rounds in &config.rounds {
        let spec = ExperimentSpec {
            code: config.code,
            distance: config.distance,
            protocol: config.protocol,
            initial_state: config.initial_state,
            rounds,
        };
        let experiment = compose_experiment(&spec)?;
        let tables = DecodeTables::for_code(&experiment.code);
        if !layouts.contains(&experiment.layout_note) {
            layouts.push(experiment.layout_note.clone());
        }
        let seed = round_seed(config.seed, rounds);
        let verdicts = if sinks.active() {
            let outcomes = crate::engine::run_many_map(
                &experiment.circuit,
                &config.noise,
                config.shots,
                seed,
                config.workers,
                options,
                |_, outcome| outcome,
            )?;
            if let Some(spool) = sinks.spool.as_deref_mut() {
                crate::engine::spool_outcomes(&outcomes, experiment.circuit.records().len(), &mut *spool)?;
            }
            let mut verdicts = Vec::with_capacity(outcomes.len());
            for (shot, outcome) in outcomes.into_iter().enumerate() {
                let extra = u64::from(outcome.attempts.saturating_sub(1));
                let verdict = decode_shot(&outcome, &experiment, &tables).map_err(|e| e.to_string());
                if let (Some(trace), Ok(v)) = (sinks.trace.as_deref_mut(), verdict.as_ref()) {
                    let line = match v {
                        ShotVerdict::Discarded(reason) => serde_json::json!({
                            "rounds": rounds, "shot": shot, "discarded": format!("{reason:?}"),
                        }),
                        ShotVerdict::Evaluated { success, rounds: trace_rounds } => {
                            serde_json::json!({
                                "rounds": rounds,
                                "shot": shot,
                                "success": success,
                                "trace": trace_rounds.iter().map(|r| r.to_json()).collect::<Vec<_>>(),
                            })
                        }
                    };
                    writeln!(trace, "{line}").map_err(HarnessError::Io)?;
                }
                verdicts.push(verdict.map(|v| (v, extra)));
            }
            verdicts
        } else {
            run_many_map(
                &experiment.circuit,
                &config.noise,
                config.shots,
                seed,
                config.workers,
                options,
                |_, outcome| {
                    let extra_attempts = u64::from(outcome.attempts.saturating_sub(1));
                    decode_shot(&outcome, &experiment, &tables)
                        .map(|v| (v, extra_attempts))
                        .map_err(|e| e.to_string())
                },
            )?
        };
        let mut t = Tallies::default();
        let mut repeat_attempts = 0u64;
        for (shot, verdict) in verdicts.into_iter().enumerate() {
            let (verdict, extra) =
                verdict.map_err(|message| HarnessError::Decode { shot: shot as u64, message })?;
            repeat_attempts += extra;
            match verdict {
                ShotVerdict::Evaluated { success: true, .. } => t.successes += 1,
                ShotVerdict::Evaluated { success: false, .. } => t.failures += 1,
                ShotVerdict::Discarded(DiscardReason::EncodingVerification) => {
                    t.discarded_encoding += 1
                }
                ShotVerdict::Discarded(DiscardReason::GhzFlag) => t.discarded_ghz += 1,
                ShotVerdict::Discarded(DiscardReason::PostselectBranch) => {
                    t.discarded_postselect += 1
                }
            }
        }
        if t.kept() == 0 {
            return Err(HarnessError::AllDiscarded(config.shots));
        }
        // Under the repeat policy the denominator is the kept shots and
        // rejected attempts are reported as discards.
        let n_discarded = t.discarded() + repeat_attempts;
        let estimate = FidelityEstimate::from_counts(t.successes, t.kept(), n_discarded, 1.0)?;
        rows.push(ResultRow {
            code: config.code,
            distance: config.distance,
            protocol: config.protocol,
            initial_state: config.initial_state,
            rounds,
            shots: config.shots,
            seed,
            n_kept: estimate.n_kept,
            n_discarded: estimate.n_discarded,
            discarded_encoding: t.discarded_encoding,
            discarded_ghz: t.discarded_ghz,
            discarded_postselect: t.discarded_postselect,
            p_hat: estimate.p_hat,
            wilson_low: estimate.wilson_low,
            wilson_high: estimate.wilson_high,
        });
    }
    Ok(())
}

/// The figure presets: the experiment grids behind the reproduced plots.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Repetition codes, d in {3, 5}, bit- and phase-flip, rounds 0-5.
    Fig3,
    /// Color code, Steane vs adaptive flag, both states, rounds 0-3.
    Fig4,
    /// Two-qubit-only noise (p_2q = 0.025) limiting case, rounds 0-3.
    FigA6,
    /// Color-code half-cycles, both states, rounds 0-5.
    FigA7,
}

impl Preset {
    pub fn parse(name: &str) -> Result<Self, HarnessError> {
        match name {
            "fig3" => Ok(Preset::Fig3),
            "fig4" => Ok(Preset::Fig4),
            "figA6" | "figa6" => Ok(Preset::FigA6),
            "figA7" | "figa7" => Ok(Preset::FigA7),
            other => Err(HarnessError::UnknownPreset(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Preset::Fig3 => "fig3",
            Preset::Fig4 => "fig4",
            Preset::FigA6 => "figA6",
            Preset::FigA7 => "figA7",
        }
    }

    /// The experiment grid of the preset.
    pub fn configs(&self, shots: u64, seed: u64, workers: usize) -> Vec<ExperimentConfig> {
        let base = |code, distance, protocol, state, rounds: Vec<usize>, noise| ExperimentConfig {
            code,
            distance,
            protocol,
            initial_state: state,
            rounds,
            shots,
            seed,
            workers,
            discard_policy: DiscardPolicy::Exclude,
            noise,
        };
        match self {
            Preset::Fig3 => {
                let mut configs = Vec::new();
                for code in [CodeKind::BitFlip, CodeKind::PhaseFlip] {
                    for distance in [3, 5] {
                        configs.push(base(
                            code,
                            distance,
                            Protocol::SteaneHalf,
                            LogicalState::ZeroL,
                            (0..=5).collect(),
                            NoiseModel::paper_default(),
                        ));
                    }
                }
                configs
            }
            Preset::Fig4 => {
                let mut configs = Vec::new();
                for protocol in [Protocol::SteaneFull, Protocol::FlagAdaptive] {
                    for state in [LogicalState::ZeroL, LogicalState::PlusL] {
                        configs.push(base(
                            CodeKind::Color,
                            3,
                            protocol,
                            state,
                            (0..=3).collect(),
                            NoiseModel::paper_default(),
                        ));
                    }
                }
                configs
            }
            Preset::FigA6 => {
                let mut configs = Vec::new();
                for protocol in [Protocol::SteaneFull, Protocol::FlagAdaptive] {
                    for state in [LogicalState::ZeroL, LogicalState::PlusL] {
                        configs.push(base(
                            CodeKind::Color,
                            3,
                            protocol,
                            state,
                            (0..=3).collect(),
                            NoiseModel::two_qubit_only(0.025),
                        ));
                    }
                }
                configs
            }
            Preset::FigA7 => [LogicalState::ZeroL, LogicalState::PlusL]
                .into_iter()
                .map(|state| {
                    base(
                        CodeKind::Color,
                        3,
                        Protocol::SteaneHalf,
                        state,
                        (0..=5).collect(),
                        NoiseModel::paper_default(),
                    )
                })
                .collect(),
        }
    }
}

/// Runs every experiment of a preset into one combined result.
pub fn run_preset(
    preset: Preset,
    shots: u64,
    seed: u64,
    workers: usize,
) -> Result<ExperimentResult, HarnessError> {
    let start = Instant::now();
    let configs = preset.configs(shots, seed, workers);
    let mut rows = Vec::new();
    let mut layouts = Vec::new();
    for config in &configs {
        config.validate()?;
        run_into(config, &mut rows, &mut layouts)?;
    }
    Ok(ExperimentResult {
        schema_version: 1,
        engine_version: env!("CARGO_PKG_VERSION").to_string(),
        configs,
        layouts,
        rows,
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// The documented plain-text rendering of the decoder tables, printed by
/// the CLI `tables` subcommand: one `signs | recovery` row per entry in
/// identity-then-ascending-support order.
pub fn render_tables() -> String {
    use crate::codes::{build_lookup_table, flag_lookup_table, StabilizerFamily};
    let code = crate::codes::StabilizerCode::color_code();
    let mut out = String::new();
    let sections = [
        (
            "color code lookup (Z syndrome -> X recovery)",
            build_lookup_table(&code, StabilizerFamily::ZType).unwrap(),
        ),
        (
            "color code lookup (X syndrome -> Z recovery)",
            build_lookup_table(&code, StabilizerFamily::XType).unwrap(),
        ),
        (
            "color code flag lookup (Z syndrome -> X recovery)",
            flag_lookup_table(StabilizerFamily::ZType),
        ),
        (
            "color code flag lookup (X syndrome -> Z recovery)",
            flag_lookup_table(StabilizerFamily::XType),
        ),
    ];
    for (title, table) in sections {
        out.push_str(&format!("Table: {title}\n"));
        out.push_str(&table.render());
        out.push('\n');
    }
    out.pop();
    out
}

/// JSON export of the same four tables.
pub fn tables_json() -> serde_json::Value {
    use crate::codes::{build_lookup_table, flag_lookup_table, StabilizerFamily};
    let code = crate::codes::StabilizerCode::color_code();
    serde_json::json!({
        "standard_z": build_lookup_table(&code, StabilizerFamily::ZType).unwrap().to_json(),
        "standard_x": build_lookup_table(&code, StabilizerFamily::XType).unwrap().to_json(),
        "flag_z": flag_lookup_table(StabilizerFamily::ZType).to_json(),
        "flag_x": flag_lookup_table(StabilizerFamily::XType).to_json(),
    })
}

/// Report of the exhaustive single-fault suite over the shipped gadgets.
#[derive(Debug)]
pub struct FtSuiteReport {
    pub entries: Vec<(String, FtReport)>,
}

impl FtSuiteReport {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|(_, r)| r.passed())
    }
}

/// Exhaustive single-fault fault-tolerance suite over the shipped
/// circuits: color-code Steane full cycle, d=3 repetition half-cycles,
/// and the adaptive flag cycle, each as one full composed experiment
/// (encoding + one round + readout) with all stochastic noise off.
pub fn run_ft_suite(seeds: &[u64]) -> Result<FtSuiteReport, HarnessError> {
    let mut entries = Vec::new();
    let gadgets: Vec<(String, ExperimentSpec)> = vec![
        (
            "color Steane full cycle, |0>_L".into(),
            ExperimentSpec {
                code: CodeKind::Color,
                distance: 3,
                protocol: Protocol::SteaneFull,
                initial_state: LogicalState::ZeroL,
                rounds: 1,
            },
        ),
        (
            "color Steane full cycle, |+>_L".into(),
            ExperimentSpec {
                code: CodeKind::Color,
                distance: 3,
                protocol: Protocol::SteaneFull,
                initial_state: LogicalState::PlusL,
                rounds: 1,
            },
        ),
        (
            "bit-flip d=3 Steane half cycle".into(),
            ExperimentSpec {
                code: CodeKind::BitFlip,
                distance: 3,
                protocol: Protocol::SteaneHalf,
                initial_state: LogicalState::ZeroL,
                rounds: 1,
            },
        ),
        (
            "phase-flip d=3 Steane half cycle".into(),
            ExperimentSpec {
                code: CodeKind::PhaseFlip,
                distance: 3,
                protocol: Protocol::SteaneHalf,
                initial_state: LogicalState::ZeroL,
                rounds: 1,
            },
        ),
        (
            "color flag cycle (adaptive), |0>_L".into(),
            ExperimentSpec {
                code: CodeKind::Color,
                distance: 3,
                protocol: Protocol::FlagAdaptive,
                initial_state: LogicalState::ZeroL,
                rounds: 1,
            },
        ),
        (
            "color flag cycle (adaptive), |+>_L".into(),
            ExperimentSpec {
                code: CodeKind::Color,
                distance: 3,
                protocol: Protocol::FlagAdaptive,
                initial_state: LogicalState::PlusL,
                rounds: 1,
            },
        ),
    ];
    for (label, spec) in gadgets {
        let experiment = compose_experiment(&spec)?;
        let tables = DecodeTables::for_code(&experiment.code);
        let report = check_fault_tolerance(&experiment, &tables, seeds)?;
        entries.push((label, report));
    }
    Ok(FtSuiteReport { entries })
}
