//! Scenario files, the end-to-end runner and the metrics report.

mod config;
mod report;
mod runner;

pub use config::{
    CompromiseSpec, ConfigError, DeviceSpec, HandoverSpec, ImpostorSpec, NormalSpec, PolicyEntry, ResolveSpec,
    ScenarioConfig, ScenarioName, ScenarioSection, ScorerSpec, SimSection, TrustSection, UserSpec,
};
pub use report::{
    report, report_from_logs, AuditSummary, Detection, EerReport, EerSummary, IsolationEntry, IsolationStep,
    MessageReport, MetricsReport, ReportError, SessionReport, TracePoint,
};
pub use runner::{derive_seed, run_scenario, RunOutput};

/// Bundled presets by name.
pub const PRESETS: [(&str, &str); 3] = [
    ("home", include_str!("../../scenarios/home.toml")),
    ("hospital", include_str!("../../scenarios/hospital.toml")),
    ("road", include_str!("../../scenarios/road.toml")),
];

pub fn preset_text(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub fn preset(name: &str) -> Option<ScenarioConfig> {
    preset_text(name).map(|t| ScenarioConfig::parse(t).expect("bundled presets are valid"))
}
