use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashSet};
use std::fs;

use serde::Serialize;

use super::scenario::{PredictorMode, Scenario, ScenarioError};
use crate::models::{
    oracle_label, LoadForecaster, ModelError, PredictorCheckpoint, SlicePredictor,
};
use crate::slicing::{
    classify_need, AdmissionError, AdmissionReason, FailurePolicy, NetworkState, ServiceNeed,
    SliceKind,
};
use crate::time::SimTime;
use crate::traffic::{encode_features, EncodingBounds, RequestRecord, FEATURE_DIM};

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("incompatible model: {0}")]
    Compatibility(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// How arriving requests get their service need.
#[derive(Debug, Clone)]
pub enum Classifier {
    /// Rule-based classification from the request KPIs.
    Oracle,
    /// A trained predictor over encoded features.
    Model {
        predictor: SlicePredictor,
        bounds: EncodingBounds,
    },
}

impl Classifier {
    /// Loads a checkpoint and checks it against the scenario's encoding.
    pub fn from_checkpoint(
        checkpoint: PredictorCheckpoint,
        bounds: &EncodingBounds,
    ) -> Result<Classifier, SimError> {
        let (predictor, saved) = checkpoint.into_model()?;
        if predictor.input_dim() != FEATURE_DIM {
            return Err(SimError::Compatibility(format!(
                "checkpoint expects {} input features, the encoder produces {FEATURE_DIM}",
                predictor.input_dim()
            )));
        }
        if saved != *bounds {
            return Err(SimError::Compatibility(
                "checkpoint encoding bounds differ from the scenario's".into(),
            ));
        }
        Ok(Classifier::Model {
            predictor,
            bounds: saved,
        })
    }

    /// The need used for admission and, for a model, the predicted class.
    fn classify(
        &self,
        request: &RequestRecord,
    ) -> Result<(ServiceNeed, Option<SliceKind>), SimError> {
        match self {
            Classifier::Oracle => Ok((classify_need(request), None)),
            Classifier::Model { predictor, bounds } => {
                let features = encode_features(request, bounds)
                    .map_err(|e| SimError::Input(format!("request {}: {e}", request.id)))?;
                let slice = predictor.predict(&features)?.slice;
                Ok((ServiceNeed::for_slice(slice), Some(slice)))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    PrimaryFit,
    OverflowRedirect,
    FailureRedirect,
    UnmatchedFallback,
    Rejected,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::PrimaryFit => "primary-fit",
            Outcome::OverflowRedirect => "overflow-redirect",
            Outcome::FailureRedirect => "failure-redirect",
            Outcome::UnmatchedFallback => "unmatched-fallback",
            Outcome::Rejected => "rejected",
        }
    }
}

impl From<AdmissionReason> for Outcome {
    fn from(r: AdmissionReason) -> Self {
        match r {
            AdmissionReason::PrimaryFit => Outcome::PrimaryFit,
            AdmissionReason::OverflowRedirect => Outcome::OverflowRedirect,
            AdmissionReason::FailureRedirect => Outcome::FailureRedirect,
            AdmissionReason::UnmatchedFallback => Outcome::UnmatchedFallback,
        }
    }
}

/// One admission decision, in arrival order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecisionRecord {
    pub request_id: u64,
    pub time: SimTime,
    pub need: ServiceNeed,
    pub target: Option<SliceKind>,
    /// Routing reason; for a rejection, the route that found master full.
    pub reason: AdmissionReason,
    pub outcome: Outcome,
    pub assigned: Option<SliceKind>,
    pub pre_active: u32,
    pub capacity: u32,
    pub expires_at: Option<SimTime>,
}

/// A connection removed from a failing slice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DropRecord {
    pub time: SimTime,
    pub request_id: u64,
    pub slice: SliceKind,
    /// Moved to master instead of dropped.
    pub rehomed: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Counters {
    pub arrivals: u64,
    pub admitted: u64,
    pub overflow_redirected: u64,
    pub failure_redirected: u64,
    pub unmatched_fallback: u64,
    pub rejected: u64,
    pub dropped: u64,
    pub rehomed: u64,
    pub expired: u64,
}

impl Counters {
    pub const NAMES: [&'static str; 9] = [
        "arrivals",
        "admitted",
        "overflow_redirected",
        "failure_redirected",
        "unmatched_fallback",
        "rejected",
        "dropped",
        "rehomed",
        "expired",
    ];

    pub fn values(&self) -> [u64; 9] {
        [
            self.arrivals,
            self.admitted,
            self.overflow_redirected,
            self.failure_redirected,
            self.unmatched_fallback,
            self.rejected,
            self.dropped,
            self.rehomed,
            self.expired,
        ]
    }

    pub fn from_values(v: [u64; 9]) -> Counters {
        Counters {
            arrivals: v[0],
            admitted: v[1],
            overflow_redirected: v[2],
            failure_redirected: v[3],
            unmatched_fallback: v[4],
            rejected: v[5],
            dropped: v[6],
            rehomed: v[7],
            expired: v[8],
        }
    }

    fn record(&mut self, outcome: Outcome) {
        self.arrivals += 1;
        match outcome {
            Outcome::PrimaryFit => self.admitted += 1,
            Outcome::OverflowRedirect => self.overflow_redirected += 1,
            Outcome::FailureRedirect => self.failure_redirected += 1,
            Outcome::UnmatchedFallback => self.unmatched_fallback += 1,
            Outcome::Rejected => self.rejected += 1,
        }
    }

    /// Connections that were placed somewhere (primary or master).
    pub fn placed(&self) -> u64 {
        self.admitted + self.overflow_redirected + self.failure_redirected + self.unmatched_fallback
    }
}

/// Periodic snapshot of the network.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRow {
    pub time: SimTime,
    /// Indexed by [`SliceKind::index`].
    pub active: [u32; 4],
    pub utilization: [f64; 4],
    pub healthy: [bool; 4],
    /// Cumulative counters at the sample instant.
    pub counters: Counters,
}

/// Forecast of a slice crossing the overload threshold by the next sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OverloadWarning {
    pub time: SimTime,
    pub slice: SliceKind,
    pub predicted_utilization: f64,
}

#[derive(Debug, Clone)]
pub struct SimulationResult {
    pub scenario: String,
    pub duration: SimTime,
    pub decisions: Vec<DecisionRecord>,
    pub drops: Vec<DropRecord>,
    pub samples: Vec<SampleRow>,
    pub warnings: Vec<OverloadWarning>,
    /// `(predicted, oracle)` per arrival when a trained model classified.
    pub pairs: Vec<(SliceKind, SliceKind)>,
    pub totals: Counters,
    /// Connections still open when the run ended, per slice.
    pub still_active: [u32; 4],
}

impl SimulationResult {
    /// Counters rebuilt from the decision and drop logs alone.
    pub fn replay_counters(&self) -> Counters {
        let mut c = Counters::default();
        for d in &self.decisions {
            c.record(d.outcome);
        }
        let mut removed = HashSet::new();
        for drop in &self.drops {
            if drop.rehomed {
                c.rehomed += 1;
            } else {
                c.dropped += 1;
                removed.insert(drop.request_id);
            }
        }
        c.expired = self
            .decisions
            .iter()
            .filter(|d| !removed.contains(&d.request_id))
            .filter(|d| d.expires_at.is_some_and(|t| t < self.duration))
            .count() as u64;
        c
    }

    pub fn still_active_total(&self) -> u64 {
        self.still_active.iter().map(|&n| u64::from(n)).sum()
    }

    pub fn totals_json(&self) -> serde_json::Value {
        let mut still = serde_json::Map::new();
        for kind in SliceKind::ALL {
            still.insert(kind.as_str().into(), self.still_active[kind.index()].into());
        }
        serde_json::json!({
            "scenario": self.scenario,
            "duration_s": self.duration.as_secs_f64(),
            "counters": self.totals,
            "still_active": still,
            "samples": self.samples.len(),
            "overload_warnings": self.warnings.len(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum EventKind {
    Expiry,
    Recovery(SliceKind),
    Failure(SliceKind),
    Arrival(usize),
    Sample,
}

impl EventKind {
    /// Same-instant order: expiries, health changes, the arrival, then the sample.
    fn rank(self) -> u8 {
        match self {
            EventKind::Expiry => 0,
            EventKind::Recovery(_) => 1,
            EventKind::Failure(_) => 2,
            EventKind::Arrival(_) => 3,
            EventKind::Sample => 4,
        }
    }
}

#[derive(Debug, PartialEq, Eq, PartialOrd, Ord)]
struct Event {
    time: SimTime,
    rank: u8,
    seq: u64,
    kind: EventKind,
}

#[derive(Default)]
struct Queue {
    heap: BinaryHeap<Reverse<Event>>,
    seq: u64,
}

impl Queue {
    fn push(&mut self, time: SimTime, kind: EventKind) {
        self.seq += 1;
        self.heap.push(Reverse(Event {
            time,
            rank: kind.rank(),
            seq: self.seq,
            kind,
        }));
    }

    fn pop(&mut self) -> Option<Event> {
        self.heap.pop().map(|Reverse(e)| e)
    }
}

/// Resolves the scenario's predictor and forecaster, generates its traffic and runs it.
pub fn run(scenario: &Scenario) -> Result<SimulationResult, SimError> {
    scenario.validate()?;
    let classifier = match &scenario.predictor {
        PredictorMode::Oracle => Classifier::Oracle,
        PredictorMode::TrainedModel { checkpoint } => {
            Classifier::from_checkpoint(PredictorCheckpoint::load(checkpoint)?, &scenario.encoding)?
        }
    };
    let forecaster = match &scenario.forecaster {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|source| SimError::Io {
                path: path.display().to_string(),
                source,
            })?;
            let f: LoadForecaster = serde_json::from_str(&text).map_err(ModelError::from)?;
            Some(f)
        }
        None => None,
    };
    let requests = scenario.requests()?;
    run_with(scenario, &requests, &classifier, forecaster.as_ref())
}

/// Runs `requests` (sorted by arrival, all before the end of the run) through the scenario.
pub fn run_with(
    scenario: &Scenario,
    requests: &[RequestRecord],
    classifier: &Classifier,
    forecaster: Option<&LoadForecaster>,
) -> Result<SimulationResult, SimError> {
    scenario.validate()?;
    let duration = scenario.duration();
    let mut ids = HashSet::with_capacity(requests.len());
    for (i, r) in requests.iter().enumerate() {
        r.validate()
            .map_err(|e| SimError::Input(format!("request {}: {e}", r.id)))?;
        if r.arrival >= duration {
            return Err(SimError::Input(format!(
                "request {} arrives at {} s, after the run ends",
                r.id, r.arrival
            )));
        }
        if i > 0 && requests[i - 1].arrival > r.arrival {
            return Err(SimError::Input(format!(
                "request {} is out of arrival order",
                r.id
            )));
        }
        if !ids.insert(r.id) {
            return Err(SimError::Input(format!("duplicate request id {}", r.id)));
        }
    }

    let mut net = NetworkState::new(scenario.capacities.as_array(), scenario.overload_threshold)
        .map_err(|e| SimError::Input(e.to_string()))?;
    let policy = if scenario.rehome_on_failure {
        FailurePolicy::Rehome
    } else {
        FailurePolicy::Drop
    };

    let mut queue = Queue::default();
    for f in &scenario.failures {
        queue.push(f.start(), EventKind::Failure(f.slice));
        queue.push(f.end(), EventKind::Recovery(f.slice));
    }
    if let Some(first) = requests.first() {
        queue.push(first.arrival, EventKind::Arrival(0));
    }
    let sample_times = scenario.sample_times();
    let mut next_sample = 0;
    if let Some(&t) = sample_times.first() {
        queue.push(t, EventKind::Sample);
    }

    let mut counters = Counters::default();
    let mut decisions = Vec::with_capacity(requests.len());
    let mut drops = Vec::new();
    let mut samples = Vec::with_capacity(sample_times.len());
    let mut warnings = Vec::new();
    let mut pairs = Vec::new();
    let mut history: BTreeMap<SliceKind, Vec<f64>> = BTreeMap::new();

    while let Some(event) = queue.pop() {
        let now = event.time;
        if now >= duration {
            break;
        }
        match event.kind {
            EventKind::Expiry => {
                counters.expired += u64::from(net.release_expired(now));
            }
            EventKind::Recovery(kind) | EventKind::Failure(kind) => {
                let healthy = matches!(event.kind, EventKind::Recovery(_));
                let t = net
                    .set_health_with(kind, healthy, now, policy)
                    .map_err(|e| SimError::Input(e.to_string()))?;
                let first = drops.len();
                for (&id, rehomed) in t
                    .dropped
                    .iter()
                    .map(|id| (id, false))
                    .chain(t.rehomed.iter().map(|id| (id, true)))
                {
                    drops.push(DropRecord {
                        time: now,
                        request_id: id,
                        slice: kind,
                        rehomed,
                    });
                }
                drops[first..].sort_by_key(|d| d.request_id);
                counters.dropped += t.dropped.len() as u64;
                counters.rehomed += t.rehomed.len() as u64;
            }
            EventKind::Arrival(i) => {
                let request = &requests[i];
                let (need, predicted) = classifier.classify(request)?;
                if let Some(p) = predicted {
                    pairs.push((p, oracle_label(request)));
                }
                let record = match net.admit(request, need, now) {
                    Ok(d) => {
                        if d.expires_at < duration {
                            queue.push(d.expires_at, EventKind::Expiry);
                        }
                        DecisionRecord {
                            request_id: request.id,
                            time: now,
                            need,
                            target: d.target,
                            reason: d.reason,
                            outcome: d.reason.into(),
                            assigned: Some(d.assigned),
                            pre_active: d.pre_load.active,
                            capacity: d.pre_load.capacity,
                            expires_at: Some(d.expires_at),
                        }
                    }
                    Err(AdmissionError::RejectedNoCapacity {
                        reason,
                        target,
                        pre_load,
                        ..
                    }) => DecisionRecord {
                        request_id: request.id,
                        time: now,
                        need,
                        target,
                        reason,
                        outcome: Outcome::Rejected,
                        assigned: None,
                        pre_active: pre_load.active,
                        capacity: pre_load.capacity,
                        expires_at: None,
                    },
                    Err(AdmissionError::Invalid(e)) => return Err(SimError::Input(e.to_string())),
                };
                counters.record(record.outcome);
                decisions.push(record);
                if let Some(next) = requests.get(i + 1) {
                    queue.push(next.arrival, EventKind::Arrival(i + 1));
                }
            }
            EventKind::Sample => {
                let row = snapshot(&net, now, counters);
                if let Some(f) = forecaster {
                    for kind in SliceKind::ALL {
                        history
                            .entry(kind)
                            .or_default()
                            .push(row.utilization[kind.index()]);
                    }
                    warn_overloads(
                        f,
                        &mut history,
                        now,
                        scenario.overload_threshold,
                        &mut warnings,
                    )?;
                }
                samples.push(row);
                next_sample += 1;
                if let Some(&t) = sample_times.get(next_sample) {
                    queue.push(t, EventKind::Sample);
                }
            }
        }
    }

    let mut still_active = [0; 4];
    for kind in SliceKind::ALL {
        still_active[kind.index()] = net.slice(kind).active_count();
    }
    Ok(SimulationResult {
        scenario: scenario.name.clone(),
        duration,
        decisions,
        drops,
        samples,
        warnings,
        pairs,
        totals: counters,
        still_active,
    })
}

fn snapshot(net: &NetworkState, time: SimTime, counters: Counters) -> SampleRow {
    let mut row = SampleRow {
        time,
        active: [0; 4],
        utilization: [0.0; 4],
        healthy: [true; 4],
        counters,
    };
    for s in net.slices() {
        let i = s.kind().index();
        row.active[i] = s.active_count();
        row.utilization[i] = s.utilization();
        row.healthy[i] = s.is_healthy();
    }
    row
}

fn warn_overloads(
    forecaster: &LoadForecaster,
    history: &mut BTreeMap<SliceKind, Vec<f64>>,
    now: SimTime,
    threshold: u32,
    warnings: &mut Vec<OverloadWarning>,
) -> Result<(), ModelError> {
    let mut recent = BTreeMap::new();
    for (kind, model) in &forecaster.models {
        let h = &history[kind];
        if h.len() >= model.window() {
            recent.insert(*kind, h[h.len() - model.window()..].to_vec());
        }
    }
    for (slice, predicted) in forecaster.forecast_load(&recent)? {
        if predicted > f64::from(threshold) {
            warnings.push(OverloadWarning {
                time: now,
                slice,
                predicted_utilization: predicted,
            });
        }
    }
    // keep only what the longest window needs
    let keep = forecaster.window();
    for h in history.values_mut() {
        if h.len() > keep {
            h.drain(..h.len() - keep);
        }
    }
    Ok(())
}
