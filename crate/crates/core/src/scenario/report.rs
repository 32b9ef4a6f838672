use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::authn::{AuditEventKind, AuditLog};
use crate::fixed::Fixed4;
use crate::ids::{DeviceId, NodeId, SessionId, Tick};
use crate::sim::{events_from_jsonl, DropReason, EventKind, HandoverOutcome, MsgId, SimEvent};
use crate::trust::{compute_eer, AccessTier, FusedScore, Modality, ScoreKind};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReportError {
    #[error("corrupt {log} log at line {line}: {message}")]
    CorruptLog { log: &'static str, line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TracePoint {
    pub tick: Tick,
    pub trust: Fixed4,
    pub tier: AccessTier,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionReport {
    pub trace: Vec<TracePoint>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub locked_at: Option<Tick>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EerSummary {
    pub eer: f64,
    pub threshold: Fixed4,
    pub far: f64,
    pub frr: f64,
    pub genuine: u64,
    pub impostor: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EerReport {
    /// Only modalities with both genuine and impostor samples appear.
    pub per_modality: BTreeMap<Modality, EerSummary>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fused: Option<EerSummary>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Detection {
    pub device: DeviceId,
    pub node: NodeId,
    pub compromise_start: Tick,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub isolated_at: Option<Tick>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub latency: Option<Tick>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IsolationStep {
    Isolated,
    Resolved,
    Reintegrated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IsolationEntry {
    pub tick: Tick,
    pub node: NodeId,
    pub step: IsolationStep,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageReport {
    pub emitted: u64,
    pub delivered: u64,
    pub dropped: BTreeMap<DropReason, u64>,
    /// Emitted messages without a Deliver or Drop.
    pub unterminated: u64,
    pub rerouted: u64,
    pub handovers_completed: u64,
    pub handovers_failed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditSummary {
    pub records: u64,
    pub sessions: u64,
    pub by_kind: BTreeMap<AuditEventKind, u64>,
    /// Biometric samples delivered to the server.
    pub samples_delivered: u64,
    pub samples_accepted: u64,
    /// Tamper and replay rejections.
    pub samples_rejected: u64,
    /// Delivered but never processed, e.g. after the session locked.
    pub samples_unprocessed: u64,
    /// Every accepted sample has exactly one decision.
    pub decisions_match: bool,
}

/// Run summary. Every figure is computed from the event and audit logs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub sessions: BTreeMap<SessionId, SessionReport>,
    pub eer: EerReport,
    /// Latency of the first compromise; absent without one or without an
    /// isolation after it.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub detection_latency: Option<Tick>,
    pub detections: Vec<Detection>,
    pub isolation_timeline: Vec<IsolationEntry>,
    pub messages: MessageReport,
    pub audit: AuditSummary,
}

impl MetricsReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

fn eer_summary(genuine: &[Fixed4], impostor: &[Fixed4]) -> Option<EerSummary> {
    let e = compute_eer::<f64>(genuine, impostor).ok()?;
    Some(EerSummary {
        eer: e.eer,
        threshold: e.threshold,
        far: e.far,
        frr: e.frr,
        genuine: genuine.len() as u64,
        impostor: impostor.len() as u64,
    })
}

/// Parses both logs and summarizes them.
pub fn report_from_logs(events_jsonl: &str, audit_jsonl: &str) -> Result<MetricsReport, ReportError> {
    let events = events_from_jsonl(events_jsonl)
        .map_err(|e| ReportError::CorruptLog { log: "event", line: e.line, message: e.message })?;
    let audit = AuditLog::from_jsonl(audit_jsonl).map_err(|e| match e {
        crate::authn::AuditError::CorruptLine { line, message } => ReportError::CorruptLog { log: "audit", line, message },
        crate::authn::AuditError::Io(e) => ReportError::CorruptLog { log: "audit", line: 0, message: e.to_string() },
    })?;
    Ok(report(&events, &audit))
}

pub fn report(events: &[SimEvent], audit: &AuditLog) -> MetricsReport {
    let mut emitted = BTreeSet::new();
    let mut biometric = BTreeSet::new();
    let mut terminated = BTreeSet::<MsgId>::new();
    let mut delivered = 0;
    let mut samples_delivered = 0;
    let mut dropped = BTreeMap::new();
    let mut rerouted = 0;
    let (mut handovers_completed, mut handovers_failed) = (0, 0);
    let mut by_modality: BTreeMap<Modality, (Vec<Fixed4>, Vec<Fixed4>)> = BTreeMap::new();
    let (mut fused_genuine, mut fused_impostor) = (Vec::new(), Vec::new());
    let mut detections = Vec::new();
    let mut timeline = Vec::new();

    for e in events {
        match &e.kind {
            EventKind::Emit { msg_id, sample, .. } => {
                emitted.insert(*msg_id);
                if let Some(s) = sample {
                    biometric.insert(*msg_id);
                    let values: Vec<Fixed4> = s.scores.iter().map(|&(_, v)| v).collect();
                    for &(m, v) in &s.scores {
                        let pools = by_modality.entry(m).or_default();
                        match s.label {
                            ScoreKind::Genuine => pools.0.push(v),
                            ScoreKind::Impostor => pools.1.push(v),
                        }
                    }
                    if let Ok(f) = FusedScore::from_values(&values) {
                        match s.label {
                            ScoreKind::Genuine => fused_genuine.push(f.value),
                            ScoreKind::Impostor => fused_impostor.push(f.value),
                        }
                    }
                }
            }
            EventKind::Deliver { msg_id, .. } => {
                terminated.insert(*msg_id);
                delivered += 1;
                if biometric.contains(msg_id) {
                    samples_delivered += 1;
                }
            }
            EventKind::Drop { msg_id, reason, .. } => {
                terminated.insert(*msg_id);
                *dropped.entry(*reason).or_insert(0) += 1;
            }
            EventKind::Reroute { .. } => rerouted += 1,
            EventKind::Handover { outcome, .. } => match outcome {
                HandoverOutcome::Completed => handovers_completed += 1,
                HandoverOutcome::TargetUnreachable => handovers_failed += 1,
            },
            EventKind::CompromiseStart { device, node, .. } => detections.push(Detection {
                device: device.clone(),
                node: node.clone(),
                compromise_start: e.tick,
                isolated_at: None,
                latency: None,
            }),
            EventKind::Isolate { node } => {
                timeline.push(IsolationEntry { tick: e.tick, node: node.clone(), step: IsolationStep::Isolated });
                for d in detections.iter_mut().filter(|d| &d.node == node && d.isolated_at.is_none()) {
                    d.isolated_at = Some(e.tick);
                    d.latency = Some(e.tick - d.compromise_start);
                }
            }
            EventKind::Resolve { node } => {
                timeline.push(IsolationEntry { tick: e.tick, node: node.clone(), step: IsolationStep::Resolved })
            }
            EventKind::Reintegrate { node } => {
                timeline.push(IsolationEntry { tick: e.tick, node: node.clone(), step: IsolationStep::Reintegrated })
            }
            EventKind::AnomalyFlagged { .. } | EventKind::ScoreMode { .. } => {}
        }
    }

    let per_modality = by_modality
        .iter()
        .filter_map(|(m, (g, i))| Some((*m, eer_summary(g, i)?)))
        .collect();
    let eer = EerReport { per_modality, fused: eer_summary(&fused_genuine, &fused_impostor) };

    let mut sessions: BTreeMap<SessionId, SessionReport> = BTreeMap::new();
    let mut by_kind = BTreeMap::new();
    for r in audit.records() {
        *by_kind.entry(r.event_kind).or_insert(0u64) += 1;
        let s = sessions
            .entry(r.session_id.clone())
            .or_insert_with(|| SessionReport { trace: Vec::new(), locked_at: None });
        match (r.event_kind, r.tier) {
            (AuditEventKind::DecisionIssued, Some(tier)) => {
                s.trace.push(TracePoint { tick: r.tick, trust: r.trust_after, tier })
            }
            (AuditEventKind::SessionLocked, _) if s.locked_at.is_none() => s.locked_at = Some(r.tick),
            _ => {}
        }
    }
    let count = |k| by_kind.get(&k).copied().unwrap_or(0);
    let samples_accepted = count(AuditEventKind::SampleAccepted);
    let samples_rejected = count(AuditEventKind::TamperDetected) + count(AuditEventKind::ReplayRejected);
    let audit_summary = AuditSummary {
        records: audit.len() as u64,
        sessions: sessions.len() as u64,
        samples_delivered,
        samples_accepted,
        samples_rejected,
        samples_unprocessed: samples_delivered.saturating_sub(samples_accepted + samples_rejected),
        decisions_match: count(AuditEventKind::DecisionIssued) == samples_accepted,
        by_kind,
    };

    MetricsReport {
        sessions,
        eer,
        detection_latency: detections.first().and_then(|d| d.latency),
        detections,
        isolation_timeline: timeline,
        messages: MessageReport {
            emitted: emitted.len() as u64,
            delivered,
            unterminated: emitted.difference(&terminated).count() as u64,
            dropped,
            rerouted,
            handovers_completed,
            handovers_failed,
        },
        audit: audit_summary,
    }
}
