//! Slice kinds, live slice state and the admission algorithm.
//!
//! Each arriving request is mapped to a [`ServiceNeed`], the need selects a target
//! slice, and the target either takes the connection or hands it to the master
//! slice. Utilization is always compared in integers (`active * 100` against
//! `threshold * capacity`) so the overload boundary is exact.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::time::SimTime;
use crate::traffic::{LossRate, RequestRecord};

/// Default overload boundary, in percent.
pub const DEFAULT_OVERLOAD_THRESHOLD: u32 = 92;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SlicingError {
    #[error("slice {0} must have a positive capacity")]
    ZeroCapacity(SliceKind),
    #[error("overload threshold {0}% is outside (0, 100]")]
    InvalidThreshold(u32),
    #[error("health of the master slice cannot be changed")]
    MasterHealth,
    #[error("request {0} has a zero time-to-live")]
    ZeroTtl(u64),
    #[error("connection {id} is already active on slice {slice}")]
    DuplicateConnection { id: u64, slice: SliceKind },
    #[error("slice {slice} holds {count} connections but has capacity {capacity}")]
    OverCapacity {
        slice: SliceKind,
        count: usize,
        capacity: u32,
    },
}

/// The four slice kinds. `Master` is the backup slice and never a predictor class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SliceKind {
    Embb,
    Mmtc,
    Urllc,
    Master,
}

impl SliceKind {
    pub const ALL: [SliceKind; 4] = [
        SliceKind::Embb,
        SliceKind::Mmtc,
        SliceKind::Urllc,
        SliceKind::Master,
    ];

    /// Predictor classes in tie-break order.
    pub const CLASSES: [SliceKind; 3] = [SliceKind::Embb, SliceKind::Mmtc, SliceKind::Urllc];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Position among [`SliceKind::CLASSES`]; `None` for `Master`.
    pub fn class_index(self) -> Option<usize> {
        match self {
            SliceKind::Master => None,
            k => Some(k as usize),
        }
    }

    pub fn from_class_index(i: usize) -> Option<SliceKind> {
        SliceKind::CLASSES.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SliceKind::Embb => "embb",
            SliceKind::Mmtc => "mmtc",
            SliceKind::Urllc => "urllc",
            SliceKind::Master => "master",
        }
    }
}

impl fmt::Display for SliceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown slice `{0}`")]
pub struct ParseSliceError(pub String);

impl FromStr for SliceKind {
    type Err = ParseSliceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "embb" => Ok(SliceKind::Embb),
            "mmtc" => Ok(SliceKind::Mmtc),
            "urllc" => Ok(SliceKind::Urllc),
            "master" => Ok(SliceKind::Master),
            _ => Err(ParseSliceError(s.to_owned())),
        }
    }
}

/// What a request asks of the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ServiceNeed {
    HighThroughput,
    ReliableLowLatency,
    LowThroughputHighDensity,
    Unmatched,
}

impl ServiceNeed {
    /// The slice that serves this need, `None` for `Unmatched`.
    pub fn target_slice(self) -> Option<SliceKind> {
        match self {
            ServiceNeed::HighThroughput => Some(SliceKind::Embb),
            ServiceNeed::ReliableLowLatency => Some(SliceKind::Urllc),
            ServiceNeed::LowThroughputHighDensity => Some(SliceKind::Mmtc),
            ServiceNeed::Unmatched => None,
        }
    }

    /// Inverse of [`ServiceNeed::target_slice`] for predictor outputs.
    pub fn for_slice(kind: SliceKind) -> ServiceNeed {
        match kind {
            SliceKind::Embb => ServiceNeed::HighThroughput,
            SliceKind::Urllc => ServiceNeed::ReliableLowLatency,
            SliceKind::Mmtc => ServiceNeed::LowThroughputHighDensity,
            SliceKind::Master => ServiceNeed::Unmatched,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ServiceNeed::HighThroughput => "high-throughput",
            ServiceNeed::ReliableLowLatency => "reliable-low-latency",
            ServiceNeed::LowThroughputHighDensity => "low-throughput-high-density",
            ServiceNeed::Unmatched => "unmatched",
        }
    }
}

impl fmt::Display for ServiceNeed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Delay budgets that mark dense, delay-tolerant device populations at 10⁻³ loss.
const DENSE_DELAY_BUDGETS_MS: [u32; 2] = [60, 300];
/// Largest delay budget still served as low latency.
const LOW_LATENCY_MAX_MS: u32 = 50;
/// Smallest delay budget of the broadband (smartphone) profile.
const BROADBAND_MIN_MS: u32 = 50;

/// Maps a request's loss rate and delay budget to its service need.
///
/// - 10⁻⁶ loss with at most 50 ms delay is reliable low latency.
/// - 10⁻² loss, or 10⁻³ loss at a 60 ms or 300 ms budget, is a dense
///   low-throughput population.
/// - any other budget of 50 ms or more is broadband traffic.
/// - what remains (10⁻³ loss under 50 ms) is unmatched.
pub fn classify_need(request: &RequestRecord) -> ServiceNeed {
    classify_kpis(request.packet_loss_rate, request.packet_delay_budget_ms)
}

pub fn classify_kpis(loss: LossRate, delay_ms: u32) -> ServiceNeed {
    match loss {
        LossRate::PerMillion if delay_ms <= LOW_LATENCY_MAX_MS => ServiceNeed::ReliableLowLatency,
        LossRate::PerHundred => ServiceNeed::LowThroughputHighDensity,
        LossRate::PerThousand if DENSE_DELAY_BUDGETS_MS.contains(&delay_ms) => {
            ServiceNeed::LowThroughputHighDensity
        }
        _ if delay_ms >= BROADBAND_MIN_MS => ServiceNeed::HighThroughput,
        _ => ServiceNeed::Unmatched,
    }
}

/// Live state of one slice. Connections are unit-cost slots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SliceState {
    kind: SliceKind,
    capacity: u32,
    healthy: bool,
    // connection id -> expiry
    active: BTreeMap<u64, SimTime>,
    // (expiry, connection id), for range removal on release
    by_expiry: BTreeSet<(SimTime, u64)>,
}

impl SliceState {
    pub fn new(kind: SliceKind, capacity: u32) -> Result<Self, SlicingError> {
        if capacity == 0 {
            return Err(SlicingError::ZeroCapacity(kind));
        }
        Ok(SliceState {
            kind,
            capacity,
            healthy: true,
            active: BTreeMap::new(),
            by_expiry: BTreeSet::new(),
        })
    }

    pub fn kind(&self) -> SliceKind {
        self.kind
    }

    pub fn capacity(&self) -> u32 {
        self.capacity
    }

    pub fn active_count(&self) -> u32 {
        self.active.len() as u32
    }

    pub fn is_healthy(&self) -> bool {
        self.healthy
    }

    pub fn is_full(&self) -> bool {
        self.active_count() >= self.capacity
    }

    /// Active connections as (id, expiry), ordered by id.
    pub fn connections(&self) -> impl Iterator<Item = (u64, SimTime)> + '_ {
        self.active.iter().map(|(&id, &exp)| (id, exp))
    }

    /// Utilization in percent, `active / capacity * 100`.
    pub fn utilization(&self) -> f64 {
        f64::from(self.active_count()) * 100.0 / f64::from(self.capacity)
    }

    /// Exact `utilization <= threshold`.
    pub fn within_threshold(&self, threshold_pct: u32) -> bool {
        u64::from(self.active_count()) * 100 <= u64::from(threshold_pct) * u64::from(self.capacity)
    }

    fn insert(&mut self, id: u64, expiry: SimTime) -> Result<(), SlicingError> {
        if self.active.contains_key(&id) {
            return Err(SlicingError::DuplicateConnection {
                id,
                slice: self.kind,
            });
        }
        debug_assert!(self.active_count() < self.capacity);
        self.active.insert(id, expiry);
        self.by_expiry.insert((expiry, id));
        Ok(())
    }

    fn release_expired(&mut self, now: SimTime) -> u32 {
        let mut released = 0;
        while let Some(&(expiry, id)) = self.by_expiry.first() {
            if expiry > now {
                break;
            }
            self.by_expiry.pop_first();
            self.active.remove(&id);
            released += 1;
        }
        released
    }

    fn drain(&mut self) -> Vec<(u64, SimTime)> {
        self.by_expiry.clear();
        std::mem::take(&mut self.active).into_iter().collect()
    }
}

/// Why a request landed where it did.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdmissionReason {
    PrimaryFit,
    OverflowRedirect,
    FailureRedirect,
    UnmatchedFallback,
}

impl AdmissionReason {
    pub fn as_str(self) -> &'static str {
        match self {
            AdmissionReason::PrimaryFit => "primary-fit",
            AdmissionReason::OverflowRedirect => "overflow-redirect",
            AdmissionReason::FailureRedirect => "failure-redirect",
            AdmissionReason::UnmatchedFallback => "unmatched-fallback",
        }
    }
}

impl fmt::Display for AdmissionReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Load of the target slice (or master, for unmatched requests) before admission.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreLoad {
    pub active: u32,
    pub capacity: u32,
}

impl PreLoad {
    pub fn utilization(self) -> f64 {
        f64::from(self.active) * 100.0 / f64::from(self.capacity)
    }

    pub fn exceeds(self, threshold_pct: u32) -> bool {
        u64::from(self.active) * 100 > u64::from(threshold_pct) * u64::from(self.capacity)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AdmissionDecision {
    pub request_id: u64,
    pub assigned: SliceKind,
    pub reason: AdmissionReason,
    /// Slice the need asked for; `None` when unmatched.
    pub target: Option<SliceKind>,
    pub pre_load: PreLoad,
    pub expires_at: SimTime,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AdmissionError {
    /// The request was headed for master (with `reason`) but master was full.
    #[error("request {request_id} rejected: master slice is full ({reason})")]
    RejectedNoCapacity {
        request_id: u64,
        reason: AdmissionReason,
        target: Option<SliceKind>,
        pre_load: PreLoad,
    },
    #[error(transparent)]
    Invalid(#[from] SlicingError),
}

/// What to do with connections on a slice that fails.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailurePolicy {
    #[default]
    Drop,
    /// Move connections to master while it has room; drop the rest.
    Rehome,
}

/// Outcome of a health transition.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HealthTransition {
    pub dropped: Vec<u64>,
    pub rehomed: Vec<u64>,
}

/// Health and open connections of one slice, as saved by
/// [`NetworkState::snapshot`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SliceSnapshot {
    pub healthy: bool,
    /// `(connection id, expiry)` pairs.
    pub connections: Vec<(u64, SimTime)>,
}

impl Default for SliceSnapshot {
    fn default() -> Self {
        SliceSnapshot {
            healthy: true,
            connections: Vec::new(),
        }
    }
}

/// One [`SliceState`] per kind plus the overload threshold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkState {
    slices: [SliceState; 4],
    threshold_pct: u32,
}

impl NetworkState {
    /// Capacities in [`SliceKind::ALL`] order.
    pub fn new(capacities: [u32; 4], threshold_pct: u32) -> Result<Self, SlicingError> {
        if threshold_pct == 0 || threshold_pct > 100 {
            return Err(SlicingError::InvalidThreshold(threshold_pct));
        }
        let [e, m, u, x] = capacities;
        Ok(NetworkState {
            slices: [
                SliceState::new(SliceKind::Embb, e)?,
                SliceState::new(SliceKind::Mmtc, m)?,
                SliceState::new(SliceKind::Urllc, u)?,
                SliceState::new(SliceKind::Master, x)?,
            ],
            threshold_pct,
        })
    }

    /// Rebuilds a state from per-slice snapshots in [`SliceKind::ALL`] order.
    /// Any load up to capacity is accepted, including loads above the threshold
    /// that admission alone would never produce.
    pub fn restore(
        capacities: [u32; 4],
        threshold_pct: u32,
        slices: [SliceSnapshot; 4],
    ) -> Result<Self, SlicingError> {
        let mut net = NetworkState::new(capacities, threshold_pct)?;
        for (kind, snap) in SliceKind::ALL.into_iter().zip(slices) {
            if kind == SliceKind::Master && !snap.healthy {
                return Err(SlicingError::MasterHealth);
            }
            let slice = net.slice_mut(kind);
            if snap.connections.len() > slice.capacity as usize {
                return Err(SlicingError::OverCapacity {
                    slice: kind,
                    count: snap.connections.len(),
                    capacity: slice.capacity,
                });
            }
            slice.healthy = snap.healthy;
            for (id, expiry) in snap.connections {
                slice.insert(id, expiry)?;
            }
        }
        Ok(net)
    }

    pub fn snapshot(&self) -> [SliceSnapshot; 4] {
        self.slices.clone().map(|s| SliceSnapshot {
            healthy: s.healthy,
            connections: s.connections().collect(),
        })
    }

    pub fn threshold(&self) -> u32 {
        self.threshold_pct
    }

    pub fn slice(&self, kind: SliceKind) -> &SliceState {
        &self.slices[kind.index()]
    }

    fn slice_mut(&mut self, kind: SliceKind) -> &mut SliceState {
        &mut self.slices[kind.index()]
    }

    pub fn slices(&self) -> &[SliceState; 4] {
        &self.slices
    }

    /// Admits `request` for `need` at `now`.
    ///
    /// A healthy target at or under the threshold takes the connection. Otherwise
    /// it goes to master as an overflow, failure or unmatched redirect; a full
    /// master turns that into [`AdmissionError::RejectedNoCapacity`].
    pub fn admit(
        &mut self,
        request: &RequestRecord,
        need: ServiceNeed,
        now: SimTime,
    ) -> Result<AdmissionDecision, AdmissionError> {
        if request.ttl_s == 0 {
            return Err(SlicingError::ZeroTtl(request.id).into());
        }
        let expires_at = now + SimTime::from_secs(u64::from(request.ttl_s));
        let target = need.target_slice();

        let (reason, pre_load) = match target {
            Some(kind) => {
                let slice = self.slice(kind);
                let pre_load = PreLoad {
                    active: slice.active_count(),
                    capacity: slice.capacity(),
                };
                let reason = if !slice.is_healthy() {
                    AdmissionReason::FailureRedirect
                } else if slice.within_threshold(self.threshold_pct) && !slice.is_full() {
                    AdmissionReason::PrimaryFit
                } else {
                    AdmissionReason::OverflowRedirect
                };
                (reason, pre_load)
            }
            None => {
                let master = self.slice(SliceKind::Master);
                let pre_load = PreLoad {
                    active: master.active_count(),
                    capacity: master.capacity(),
                };
                (AdmissionReason::UnmatchedFallback, pre_load)
            }
        };

        let assigned = match (reason, target) {
            (AdmissionReason::PrimaryFit, Some(kind)) => kind,
            _ => SliceKind::Master,
        };
        if assigned == SliceKind::Master && self.slice(SliceKind::Master).is_full() {
            return Err(AdmissionError::RejectedNoCapacity {
                request_id: request.id,
                reason,
                target,
                pre_load,
            });
        }
        self.slice_mut(assigned).insert(request.id, expires_at)?;
        Ok(AdmissionDecision {
            request_id: request.id,
            assigned,
            reason,
            target,
            pre_load,
            expires_at,
        })
    }

    /// Removes every connection with expiry at or before `now`.
    pub fn release_expired(&mut self, now: SimTime) -> u32 {
        self.slices.iter_mut().map(|s| s.release_expired(now)).sum()
    }

    /// Changes slice health, dropping all its connections on a healthy→unhealthy
    /// transition. Returns the number dropped.
    pub fn set_health(
        &mut self,
        kind: SliceKind,
        healthy: bool,
        now: SimTime,
    ) -> Result<u32, SlicingError> {
        let t = self.set_health_with(kind, healthy, now, FailurePolicy::Drop)?;
        Ok(t.dropped.len() as u32)
    }

    pub fn set_health_with(
        &mut self,
        kind: SliceKind,
        healthy: bool,
        now: SimTime,
        policy: FailurePolicy,
    ) -> Result<HealthTransition, SlicingError> {
        if kind == SliceKind::Master {
            return Err(SlicingError::MasterHealth);
        }
        let slice = self.slice_mut(kind);
        let was_healthy = slice.healthy;
        slice.healthy = healthy;
        if !(was_healthy && !healthy) {
            return Ok(HealthTransition::default());
        }

        let mut transition = HealthTransition::default();
        for (id, expiry) in slice.drain() {
            // connections already due at `now` are released, not moved
            let movable = policy == FailurePolicy::Rehome
                && expiry > now
                && !self.slice(SliceKind::Master).is_full();
            if movable {
                self.slice_mut(SliceKind::Master).insert(id, expiry)?;
                transition.rehomed.push(id);
            } else {
                transition.dropped.push(id);
            }
        }
        Ok(transition)
    }
}
