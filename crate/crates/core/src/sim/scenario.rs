//! Scenario files (TOML).
//!
//! ```toml
//! name = "mmtc-outage"
//! overload_threshold = 92          # percent, default 92
//! sample_interval_s = 600          # default 600
//! rehome_on_failure = false        # default false
//! predictor = "oracle"             # or: [predictor.trained-model] checkpoint = "model.json"
//!
//! [traffic]
//! total_requests = 500000
//! duration_hours = 20.0
//! arrival_process = "uniform-rate" # or "poisson"
//! seed = 7
//! mix = { embb = 0.45, mmtc = 0.20, urllc = 0.35 }
//!
//! [capacities]                     # defaults shown
//! embb = 250
//! mmtc = 120
//! urllc = 200
//! master = 400
//!
//! [[failures]]
//! slice = "mmtc"
//! start_s = 9000
//! end_s = 17100
//!
//! [[surges]]                       # extra arrivals of one class
//! class = "mmtc"
//! start_s = 28800
//! end_s = 36000
//! multiplier = 5.0
//! ```
//!
//! `[encoding]` overrides the feature normalization bounds and `forecaster`
//! names a per-slice load forecaster file used for overload warnings. When the
//! sample interval does not divide the duration the final partial interval is
//! not sampled.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::slicing::{SliceKind, DEFAULT_OVERLOAD_THRESHOLD};
use crate::time::SimTime;
use crate::traffic::{
    generate_stream, profile_table, EncodingBounds, MixFractions, RequestRecord, TrafficError,
    TrafficMixConfig,
};

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("cannot read scenario: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse scenario: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid scenario field `{field}`: {reason}")]
    Invalid { field: String, reason: String },
    #[error("invalid traffic configuration: {0}")]
    Traffic(#[from] TrafficError),
}

fn invalid(field: impl Into<String>, reason: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid {
        field: field.into(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Capacities {
    pub embb: u32,
    pub mmtc: u32,
    pub urllc: u32,
    pub master: u32,
}

impl Default for Capacities {
    fn default() -> Self {
        Capacities {
            embb: 250,
            mmtc: 120,
            urllc: 200,
            master: 400,
        }
    }
}

impl Capacities {
    pub fn as_array(&self) -> [u32; 4] {
        [self.embb, self.mmtc, self.urllc, self.master]
    }
}

/// A slice outage over `[start_s, end_s)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureEvent {
    pub slice: SliceKind,
    pub start_s: u64,
    pub end_s: u64,
}

impl FailureEvent {
    pub fn start(&self) -> SimTime {
        SimTime::from_secs(self.start_s)
    }

    pub fn end(&self) -> SimTime {
        SimTime::from_secs(self.end_s)
    }

    pub fn contains(&self, t: SimTime) -> bool {
        self.start() <= t && t < self.end()
    }
}

/// Raises one class's arrival rate by `multiplier` over `[start_s, end_s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Surge {
    pub class: SliceKind,
    pub start_s: u64,
    pub end_s: u64,
    pub multiplier: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredictorMode {
    #[default]
    Oracle,
    TrainedModel {
        checkpoint: PathBuf,
    },
}

fn default_threshold() -> u32 {
    DEFAULT_OVERLOAD_THRESHOLD
}

fn default_sample_interval() -> u64 {
    600
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub traffic: TrafficMixConfig,
    #[serde(default)]
    pub capacities: Capacities,
    #[serde(default = "default_threshold")]
    pub overload_threshold: u32,
    #[serde(default = "default_sample_interval")]
    pub sample_interval_s: u64,
    #[serde(default)]
    pub predictor: PredictorMode,
    #[serde(default)]
    pub rehome_on_failure: bool,
    #[serde(default)]
    pub failures: Vec<FailureEvent>,
    #[serde(default)]
    pub surges: Vec<Surge>,
    #[serde(default)]
    pub encoding: EncodingBounds,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forecaster: Option<PathBuf>,
}

impl Scenario {
    pub fn new(name: &str, traffic: TrafficMixConfig) -> Self {
        Scenario {
            name: name.to_owned(),
            traffic,
            capacities: Capacities::default(),
            overload_threshold: DEFAULT_OVERLOAD_THRESHOLD,
            sample_interval_s: default_sample_interval(),
            predictor: PredictorMode::Oracle,
            rehome_on_failure: false,
            failures: Vec::new(),
            surges: Vec::new(),
            encoding: EncodingBounds::default(),
            forecaster: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        let scenario: Scenario = toml::from_str(text)?;
        scenario.validate()?;
        Ok(scenario)
    }

    /// Loads and validates a scenario file. Relative checkpoint and forecaster
    /// paths resolve against the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let path = path.as_ref();
        let mut scenario = Self::from_toml(&fs::read_to_string(path)?)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let PredictorMode::TrainedModel { checkpoint } = &mut scenario.predictor {
            if checkpoint.is_relative() {
                *checkpoint = base.join(&*checkpoint);
            }
        }
        if let Some(f) = scenario.forecaster.as_mut().filter(|f| f.is_relative()) {
            *f = base.join(&*f);
        }
        Ok(scenario)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn duration(&self) -> SimTime {
        self.traffic.duration()
    }

    pub fn sample_interval(&self) -> SimTime {
        SimTime::from_secs(self.sample_interval_s)
    }

    /// `0, I, 2I, ...` strictly before the end of the run.
    pub fn sample_times(&self) -> Vec<SimTime> {
        let interval = self.sample_interval().as_millis();
        let count = self.duration().as_millis() / interval.max(1);
        (0..count)
            .map(|k| SimTime::from_millis(k * interval))
            .collect()
    }

    /// Same scenario with `total_requests` multiplied by `factor` (rounded).
    /// Duration, failures and surge windows are unchanged.
    pub fn scaled(&self, factor: f64) -> Scenario {
        let mut s = self.clone();
        s.traffic.total_requests = (self.traffic.total_requests as f64 * factor).round() as u64;
        s
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.traffic.validate()?;
        for (kind, cap) in SliceKind::ALL.iter().zip(self.capacities.as_array()) {
            if cap == 0 {
                return Err(invalid(format!("capacities.{kind}"), "must be positive"));
            }
        }
        if self.overload_threshold == 0 || self.overload_threshold > 100 {
            return Err(invalid("overload_threshold", "must be in (0, 100]"));
        }
        if self.sample_interval_s == 0 {
            return Err(invalid("sample_interval_s", "must be positive"));
        }
        let end_s = self.duration().as_secs_f64();
        for (i, f) in self.failures.iter().enumerate() {
            let field = format!("failures[{i}]");
            if f.slice == SliceKind::Master {
                return Err(invalid(field, "the master slice cannot fail"));
            }
            if f.start_s >= f.end_s {
                return Err(invalid(field, "start must precede end"));
            }
            let overlaps = self.failures[..i]
                .iter()
                .any(|g| g.slice == f.slice && g.start_s < f.end_s && f.start_s < g.end_s);
            if overlaps {
                return Err(invalid(field, "overlaps another failure on the same slice"));
            }
        }
        for (i, s) in self.surges.iter().enumerate() {
            let field = format!("surges[{i}]");
            if s.class == SliceKind::Master {
                return Err(invalid(field, "master is not a traffic class"));
            }
            if s.start_s >= s.end_s || s.end_s as f64 > end_s {
                return Err(invalid(
                    field,
                    "window must be non-empty and inside the run",
                ));
            }
            if !(s.multiplier.is_finite() && s.multiplier >= 1.0) {
                return Err(invalid(field, "multiplier must be at least 1"));
            }
        }
        Ok(())
    }

    /// The full arrival stream: base traffic plus surge traffic, ordered by
    /// arrival (base first on ties). Base ids are `0..total`, surge ids follow.
    pub fn requests(&self) -> Result<Vec<RequestRecord>, ScenarioError> {
        self.validate()?;
        let profiles = profile_table();
        let mut all = generate_stream(&self.traffic, &profiles)?;
        let base_rate_ms = self.traffic.total_requests as f64 / self.duration().as_millis() as f64;
        let mut next_id = self.traffic.total_requests;
        let mut seeds = ChaCha8Rng::seed_from_u64(self.traffic.seed ^ 0x0005_eed5_u64);

        for surge in &self.surges {
            let seed: u64 = seeds.random();
            let window_ms = (surge.end_s - surge.start_s) as f64 * 1000.0;
            let extra = ((surge.multiplier - 1.0)
                * base_rate_ms
                * self.traffic.mix.get(surge.class)
                * window_ms)
                .round() as u64;
            let config = TrafficMixConfig {
                mix: MixFractions::only(surge.class),
                total_requests: extra,
                duration_hours: window_ms / 3_600_000.0,
                seed,
                ..self.traffic.clone()
            };
            let offset = SimTime::from_secs(surge.start_s);
            for mut r in generate_stream(&config, &profiles)? {
                r.id = next_id;
                r.arrival = r.arrival + offset;
                next_id += 1;
                all.push(r);
            }
        }
        // stable: base traffic keeps precedence at equal timestamps
        all.sort_by_key(|r| r.arrival);
        Ok(all)
    }
}
