//! Acceptance suite: one line per criterion, nonzero exit if any fails.

use std::collections::BTreeMap;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sliceforge_core::metrics::{confusion, metrics, ConfusionMatrix};
use sliceforge_core::models::{
    oracle_label, train_predictor, Architecture, ConvSpec, ForecastWindow, ForecasterModel,
    LabeledExample, SlicePredictor, TrainConfig, DEFAULT_EPSILON,
};
use sliceforge_core::sim::{preset, run, Outcome, SimulationResult};
use sliceforge_core::slicing::{AdmissionError, AdmissionReason};
use sliceforge_core::traffic::{
    encode_features, generate_stream, profile_table, DeviceClass, EncodingBounds, LossRate,
    TrafficMixConfig, Weather,
};
use sliceforge_core::{
    classify_need, NetworkState, RequestRecord, SimTime, SliceKind, SliceSnapshot,
};

type Check = Result<String, String>;
type Criterion<'a> = (
    &'a str,
    Box<dyn FnOnce(&mut Vec<SimulationResult>) -> Check>,
);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(limit_s: u64, start: Instant) -> Result<Duration, String> {
    let took = start.elapsed();
    ensure(took <= Duration::from_secs(limit_s), || {
        format!("took {took:.1?}, limit {limit_s} s")
    })?;
    Ok(took)
}

// 1. Admission against a direct transcription of the routing rule.

fn reference_route(
    loss: f64,
    delay: u32,
    active: [u32; 4],
    cap: [u32; 4],
    up: [bool; 3],
) -> Option<(usize, &'static str)> {
    let target = if loss == 1e-6 && delay <= 50 {
        Some(2)
    } else if loss == 1e-2 || (loss == 1e-3 && (delay == 60 || delay == 300)) {
        Some(1)
    } else if delay >= 50 {
        Some(0)
    } else {
        None
    };
    let master = |why| (active[3] < cap[3]).then_some((3, why));
    match target {
        None => master("unmatched-fallback"),
        Some(t) if !up[t] => master("failure-redirect"),
        Some(t) if active[t] as f64 * 100.0 / cap[t] as f64 > 92.0 || active[t] == cap[t] => {
            master("overflow-redirect")
        }
        Some(t) => Some((t, "primary-fit")),
    }
}

fn grid_request(loss: LossRate, delay: u32) -> RequestRecord {
    RequestRecord {
        id: 1_000_000,
        arrival: SimTime::ZERO,
        device_class: DeviceClass::Unknown,
        ue_category: 1,
        qci: 5,
        packet_loss_rate: loss,
        packet_delay_budget_ms: delay,
        day_of_week: 0,
        hour_of_day: 0,
        weather: Weather::Normal,
        ttl_s: 30,
        slice_type: None,
    }
}

fn admission_oracle() -> Check {
    let start = Instant::now();
    let levels = [0, 45, 46, 47, 50];
    let losses = [
        LossRate::PerHundred,
        LossRate::PerThousand,
        LossRate::PerMillion,
    ];
    let mut delays: Vec<u32> = profile_table()
        .iter()
        .flat_map(|p| p.delay_budgets_ms.clone())
        .collect();
    delays.extend([49, 50, 51, 59, 60, 61, 299, 300]);
    delays.sort();
    delays.dedup();
    let cap = [50; 4];
    let mut cases = 0u64;
    for a in 0..levels.len().pow(4) {
        let active = [0, 1, 2, 3].map(|k| levels[a / levels.len().pow(k) % levels.len()]);
        for h in 0..8u32 {
            let up = [h & 1 == 0, h & 2 == 0, h & 4 == 0];
            let snaps = [0, 1, 2, 3].map(|k| SliceSnapshot {
                healthy: k == 3 || up[k],
                connections: (0..u64::from(active[k]))
                    .map(|i| (k as u64 * 1000 + i, SimTime::from_secs(9)))
                    .collect(),
            });
            let net = NetworkState::restore(cap, 92, snaps).map_err(|e| e.to_string())?;
            for loss in losses {
                for &delay in &delays {
                    let r = grid_request(loss, delay);
                    let got = match net.clone().admit(&r, classify_need(&r), SimTime::ZERO) {
                        Ok(d) => Some((d.assigned.index(), d.reason.as_str())),
                        Err(AdmissionError::RejectedNoCapacity { .. }) => None,
                        Err(e) => return Err(e.to_string()),
                    };
                    let want = reference_route(loss.value(), delay, active, cap, up);
                    ensure(got == want, || {
                        format!("loss {loss} delay {delay} active {active:?} up {up:?}: {got:?} vs {want:?}")
                    })?;
                    cases += 1;
                }
            }
        }
    }
    let took = within(10, start)?;
    Ok(format!("{cases} cases, 0 mismatches, {took:.2?}"))
}

// 2. No mMTC placements while it is down.

fn failure_exclusion(runs: &mut Vec<SimulationResult>) -> Check {
    let start = Instant::now();
    let s = preset("mmtc-outage").ok_or("missing preset")?.scaled(0.1);
    let result = run(&s).map_err(|e| e.to_string())?;
    let took = within(30, start)?;
    let windows: Vec<_> = s
        .failures
        .iter()
        .filter(|f| f.slice == SliceKind::Mmtc)
        .collect();
    ensure(windows.len() == 2, || {
        format!("{} mMTC windows", windows.len())
    })?;
    let mut redirected = 0;
    for d in &result.decisions {
        if !windows.iter().any(|w| w.contains(d.time)) {
            continue;
        }
        ensure(d.assigned != Some(SliceKind::Mmtc), || {
            format!("request {} placed on mMTC at {}", d.request_id, d.time)
        })?;
        if d.target == Some(SliceKind::Mmtc) {
            ensure(
                d.outcome == Outcome::FailureRedirect && d.assigned == Some(SliceKind::Master),
                || {
                    format!(
                        "request {} at {} was {}",
                        d.request_id,
                        d.time,
                        d.outcome.as_str()
                    )
                },
            )?;
            redirected += 1;
        }
    }
    ensure(redirected > 0, || {
        "no mMTC arrivals inside the windows".into()
    })?;
    let n = result.totals.arrivals;
    runs.push(result);
    Ok(format!(
        "{n} arrivals, {redirected} mMTC arrivals redirected to master, {took:.2?}"
    ))
}

// 3. Overflow at the threshold.

fn overload_redirect(runs: &mut Vec<SimulationResult>) -> Check {
    let s = preset("mmtc-overload").ok_or("missing preset")?;
    let cap = s.capacities.mmtc;
    let result = run(&s).map_err(|e| e.to_string())?;
    let mut over = 0;
    let mut first = None;
    for d in result
        .decisions
        .iter()
        .filter(|d| d.target == Some(SliceKind::Mmtc))
    {
        let exceeds = u64::from(d.pre_active) * 100 > 92 * u64::from(d.capacity);
        if exceeds {
            first.get_or_insert(d.request_id);
            ensure(
                d.reason == AdmissionReason::OverflowRedirect
                    && d.outcome == Outcome::OverflowRedirect,
                || {
                    format!(
                        "request {} at {:.1}% was {}",
                        d.request_id,
                        f64::from(d.pre_active) * 100.0 / f64::from(cap),
                        d.outcome.as_str()
                    )
                },
            )?;
            over += 1;
        } else if d.outcome == Outcome::OverflowRedirect {
            return Err(format!(
                "request {} redirected below the threshold",
                d.request_id
            ));
        }
    }
    let first = first.ok_or("mMTC never exceeded 92%")?;
    let ceiling = 92.0 + 100.0 / f64::from(cap);
    let peak = result
        .samples
        .iter()
        .map(|r| r.utilization[SliceKind::Mmtc.index()])
        .fold(0.0, f64::max);
    ensure(peak <= ceiling, || {
        format!("sampled mMTC utilization {peak:.2}% above {ceiling:.2}%")
    })?;
    runs.push(result);
    Ok(format!("first over-threshold request {first} redirected, {over} redirects above 92%, peak sample {peak:.2}% <= {ceiling:.2}%"))
}

// 4. Class mix of the generator.

fn traffic_mix() -> Check {
    let start = Instant::now();
    let stream = generate_stream(&TrafficMixConfig::default(), &profile_table())
        .map_err(|e| e.to_string())?;
    let took = within(10, start)?;
    ensure(stream.len() == 500_000, || {
        format!("{} requests", stream.len())
    })?;
    let mut counts = [0usize; 3];
    for r in &stream {
        counts[oracle_label(r).class_index().ok_or("master label")?] += 1;
    }
    let fractions = counts.map(|c| c as f64 / stream.len() as f64);
    for (got, want) in fractions.iter().zip([0.45, 0.20, 0.35]) {
        ensure((got - want).abs() <= 0.01, || {
            format!("fractions {fractions:.4?}")
        })?;
    }
    Ok(format!("fractions {fractions:.4?}, {took:.2?}"))
}

// 5. Analytic gradients against central differences.

/// Worst over parameters of the best relative error over several step sizes.
/// A step that straddles a ReLU kink, or one whose loss difference drowns in
/// round-off on a tiny gradient, is not a backprop fault; a fault shows at every step.
fn gradient_error<M: Clone>(
    model: &M,
    params: fn(&mut M) -> &mut [f64],
    analytic: &[f64],
    loss: impl Fn(&M) -> f64,
) -> f64 {
    let mut m = model.clone();
    let mut worst: f64 = 0.0;
    for (i, &a) in analytic.iter().enumerate() {
        let p = params(&mut m)[i];
        let mut best = f64::INFINITY;
        for eps in [1e-4, DEFAULT_EPSILON, 1e-6, 1e-7] {
            params(&mut m)[i] = p + eps;
            let up = loss(&m);
            params(&mut m)[i] = p - eps;
            let down = loss(&m);
            let n = (up - down) / (2.0 * eps);
            best = best.min((a - n).abs() / a.abs().max(n.abs()).max(1e-8));
        }
        params(&mut m)[i] = p;
        worst = worst.max(best);
    }
    worst
}

fn gradients() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut predictor: f64 = 0.0;
    for trial in 0..100 {
        let hidden = [0; 5].map(|_| rng.random_range(2..12));
        let conv = (trial % 3 == 0).then(|| ConvSpec {
            channels: rng.random_range(1..4),
            kernel: rng.random_range(1..6),
        });
        let dim = rng.random_range(6..33);
        let mut model = SlicePredictor::new(&Architecture { hidden, conv }, dim, rng.random())
            .map_err(|e| e.to_string())?;
        for p in model.params_mut() {
            *p += rng.random_range(-0.1..0.1);
        }
        let batch: Vec<LabeledExample> = (0..rng.random_range(1..6))
            .map(|_| LabeledExample {
                features: (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
                label: SliceKind::CLASSES[rng.random_range(0..3)],
            })
            .collect();
        let mut analytic = vec![0.0; model.params().len()];
        model
            .loss_and_grad(&batch, &mut analytic)
            .map_err(|e| e.to_string())?;
        let err = gradient_error(&model, SlicePredictor::params_mut, &analytic, |m| {
            m.loss(&batch).expect("loss")
        });
        predictor = predictor.max(err);
    }
    let mut forecaster: f64 = 0.0;
    for _ in 0..100 {
        let window = rng.random_range(1..13);
        let model = ForecasterModel::new(rng.random_range(1..17), window, rng.random());
        let batch: Vec<ForecastWindow> = (0..rng.random_range(1..5))
            .map(|_| ForecastWindow {
                inputs: (0..window).map(|_| rng.random_range(0.0..100.0)).collect(),
                target: rng.random_range(0.0..100.0),
            })
            .collect();
        let mut analytic = vec![0.0; model.params().len()];
        model
            .loss_and_grad(&batch, &mut analytic)
            .map_err(|e| e.to_string())?;
        let err = gradient_error(&model, ForecasterModel::params_mut, &analytic, |m| {
            m.loss(&batch).expect("loss")
        });
        forecaster = forecaster.max(err);
    }
    let took = within(60, start)?;
    ensure(predictor < 1e-4 && forecaster < 1e-4, || {
        format!("max relative error predictor {predictor:.2e}, forecaster {forecaster:.2e}")
    })?;
    Ok(format!(
        "max relative error predictor {predictor:.2e}, forecaster {forecaster:.2e}, {took:.2?}"
    ))
}

// 6. Held-out accuracy on synthetic oracle labels.

fn classifier_accuracy() -> Check {
    let start = Instant::now();
    let config = TrafficMixConfig {
        total_requests: 10_000,
        seed: 2024,
        ..TrafficMixConfig::default()
    };
    let bounds = EncodingBounds::default();
    let mut examples = Vec::new();
    for r in generate_stream(&config, &profile_table()).map_err(|e| e.to_string())? {
        examples.push(LabeledExample {
            features: encode_features(&r, &bounds)
                .map_err(|e| e.to_string())?
                .to_vec(),
            label: oracle_label(&r),
        });
    }
    let mut scores = Vec::new();
    for noise in [0.0, 0.05] {
        let cfg = TrainConfig {
            train_fraction: 0.65,
            seed: 1,
            label_noise: noise,
            ..TrainConfig::default()
        };
        let trained = train_predictor(&examples, &cfg).map_err(|e| e.to_string())?;
        ensure(trained.test_indices.len() == 3_500, || {
            format!("{} held out", trained.test_indices.len())
        })?;
        scores.push(
            trained
                .held_out_accuracy(&examples)
                .map_err(|e| e.to_string())?
                * 100.0,
        );
    }
    let took = within(300, start)?;
    let line = format!(
        "clean {:.2}% (>= 99), 5% noise {:.2}% (>= 93), {took:.1?}",
        scores[0], scores[1]
    );
    ensure(scores[0] >= 99.0 && scores[1] >= 93.0, || line.clone())?;
    Ok(line)
}

// 7. Metrics against frozen values and direct counting.

fn close(got: f64, want: f64) -> bool {
    (got - want).abs() <= 1e-12 * want.abs().max(1.0)
}

fn metrics_oracle() -> Check {
    let r = metrics(&ConfusionMatrix::from_counts([
        [8, 1, 1],
        [0, 9, 1],
        [1, 0, 9],
    ]))
    .map_err(|e| e.to_string())?;
    let frozen = [
        (r.accuracy, 86.66666666666667),
        (r.per_class[0].precision, 88.88888888888889),
        (r.per_class[1].precision, 90.0),
        (r.per_class[2].precision, 81.81818181818181),
        (r.per_class[0].recall, 80.0),
        (r.per_class[1].recall, 90.0),
        (r.per_class[2].recall, 90.0),
        (r.per_class[0].f_score, 84.21052631578948),
        (r.per_class[1].f_score, 90.0),
        (r.per_class[2].f_score, 85.71428571428571),
        (r.macro_precision, 86.9023569023569),
        (r.macro_recall, 86.66666666666667),
        (r.macro_f_score, 86.64160401002506),
    ];
    for (i, (got, want)) in frozen.iter().enumerate() {
        ensure(close(*got, *want), || {
            format!("fixture value {i}: {got} vs {want}")
        })?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for list in 0..1000 {
        let pairs: Vec<(SliceKind, SliceKind)> = (0..rng.random_range(1..200))
            .map(|_| {
                (
                    SliceKind::CLASSES[rng.random_range(0..3)],
                    SliceKind::CLASSES[rng.random_range(0..3)],
                )
            })
            .collect();
        let r =
            metrics(&confusion(&pairs).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let n = pairs.len() as f64;
        let mut expect = vec![pairs.iter().filter(|(t, p)| t == p).count() as f64 * 100.0 / n];
        let mut got = vec![r.accuracy];
        let mut macros = [0.0; 3];
        for (i, kind) in SliceKind::CLASSES.into_iter().enumerate() {
            let tp = pairs
                .iter()
                .filter(|&&(t, p)| t == kind && p == kind)
                .count() as f64;
            let predicted = pairs.iter().filter(|&&(_, p)| p == kind).count() as f64;
            let actual = pairs.iter().filter(|&&(t, _)| t == kind).count() as f64;
            let precision = if predicted > 0.0 {
                tp * 100.0 / predicted
            } else {
                0.0
            };
            let recall = if actual > 0.0 {
                tp * 100.0 / actual
            } else {
                0.0
            };
            let f = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            expect.extend([precision, recall, f]);
            got.extend([
                r.per_class[i].precision,
                r.per_class[i].recall,
                r.per_class[i].f_score,
            ]);
            macros[0] += precision / 3.0;
            macros[1] += recall / 3.0;
            macros[2] += f / 3.0;
        }
        expect.extend(macros);
        got.extend([r.macro_precision, r.macro_recall, r.macro_f_score]);
        for (g, e) in got.iter().zip(&expect) {
            ensure(close(*g, *e), || format!("pair list {list}: {g} vs {e}"))?;
        }
    }
    Ok("13 fixture values and 1000 random pair lists match".into())
}

// 8. Byte-identical CLI output for the same seed.

fn determinism() -> Check {
    let dir = std::env::temp_dir().join(format!("sliceforge-acceptance-{}", std::process::id()));
    let mut outputs = Vec::new();
    for k in 0..2 {
        let out = dir.join(format!("run{k}"));
        let status = Command::new(env!("CARGO_BIN_EXE_sliceforge"))
            .args([
                "simulate",
                "--scenario",
                "baseline-20h",
                "--seed",
                "7",
                "--scale",
                "0.1",
                "--out-dir",
            ])
            .arg(&out)
            .env_remove("SLICEFORGE_SEED")
            .output()
            .map_err(|e| e.to_string())?;
        ensure(status.status.success(), || {
            String::from_utf8_lossy(&status.stderr).into_owned()
        })?;
        let read = |name: &str| fs::read(out.join(name)).map_err(|e| format!("{name}: {e}"));
        outputs.push((read("decisions.csv")?, read("samples.csv")?));
    }
    let _ = fs::remove_dir_all(&dir);
    ensure(outputs[0] == outputs[1], || {
        "outputs differ between runs".into()
    })?;
    let rows = outputs[0].0.iter().filter(|&&b| b == b'\n').count() - 1;
    Ok(format!(
        "{rows} decision rows and {} sample bytes identical",
        outputs[0].1.len()
    ))
}

// 9. Counter conservation and sample reconciliation.

fn active_from_logs(result: &SimulationResult, t: SimTime) -> [u32; 4] {
    let moves: BTreeMap<u64, (SimTime, bool)> = result
        .drops
        .iter()
        .map(|d| (d.request_id, (d.time, d.rehomed)))
        .collect();
    let mut active = [0; 4];
    for d in &result.decisions {
        let (Some(slice), Some(exp)) = (d.assigned, d.expires_at) else {
            continue;
        };
        if d.time > t || exp <= t {
            continue;
        }
        let slot = match moves.get(&d.request_id) {
            Some(&(when, false)) if when <= t => continue,
            Some(&(when, true)) if when <= t => SliceKind::Master,
            _ => slice,
        };
        active[slot.index()] += 1;
    }
    active
}

fn conservation(runs: &mut Vec<SimulationResult>) -> Check {
    for name in ["baseline-20h", "urllc-outage"] {
        let mut s = preset(name).ok_or("missing preset")?.scaled(0.1);
        s.traffic.seed = 7;
        runs.push(run(&s).map_err(|e| e.to_string())?);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for result in runs.iter() {
        let t = result.totals;
        let name = &result.scenario;
        let routed = t.admitted
            + t.overflow_redirected
            + t.failure_redirected
            + t.unmatched_fallback
            + t.rejected;
        ensure(routed == t.arrivals, || {
            format!("{name}: {routed} routed vs {} arrivals", t.arrivals)
        })?;
        ensure(t.arrivals == result.decisions.len() as u64, || {
            format!("{name}: decision log length")
        })?;
        ensure(
            t.placed() == t.expired + t.dropped + result.still_active_total(),
            || format!("{name}: placements leak"),
        )?;
        ensure(result.replay_counters() == t, || {
            format!("{name}: counters differ from the logs")
        })?;
        for _ in 0..10 {
            let row = &result.samples[rng.random_range(0..result.samples.len())];
            let logged = active_from_logs(result, row.time);
            ensure(logged == row.active, || {
                format!(
                    "{name} at {}: sample {:?} vs log {logged:?}",
                    row.time, row.active
                )
            })?;
        }
    }
    Ok(format!(
        "{} runs conserve and reconcile at 10 sample times each",
        runs.len()
    ))
}

fn main() -> ExitCode {
    let mut runs = Vec::new();
    let criteria: Vec<Criterion> = vec![
        (
            "admission oracle equivalence",
            Box::new(|_| admission_oracle()),
        ),
        ("failure-window exclusion", Box::new(failure_exclusion)),
        ("overload redirect", Box::new(overload_redirect)),
        ("traffic mix", Box::new(|_| traffic_mix())),
        ("gradient correctness", Box::new(|_| gradients())),
        ("classifier accuracy", Box::new(|_| classifier_accuracy())),
        ("metrics oracle", Box::new(|_| metrics_oracle())),
        ("determinism", Box::new(|_| determinism())),
        ("conservation", Box::new(conservation)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.into_iter().enumerate() {
        let outcome = panic::catch_unwind(AssertUnwindSafe(|| check(&mut runs)))
            .unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("criterion {} {name}: PASS ({detail})", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({detail})", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 9 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
