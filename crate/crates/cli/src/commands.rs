use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use sliceforge_core::metrics::{confusion, export_series, metrics, MetricsError, SeriesKind};
use sliceforge_core::models::{
    self, oracle_label, train_predictor, Architecture, ConvSpec, ForecastConfig, LabeledExample,
    LoadForecaster, ModelError, PredictorCheckpoint, TrainConfig,
};
use sliceforge_core::sim::{
    self, preset, preset_names, read_pairs, read_samples, write_decisions, write_pairs,
    write_samples, write_totals, Classifier, PredictorMode, Scenario, ScenarioError, SimError,
};
use sliceforge_core::traffic::{
    encode_features, load_dataset, write_dataset, DatasetError, EncodingBounds,
};
use sliceforge_core::{SimTime, SliceKind};

use crate::{
    CliError, EvaluateArgs, GenTrafficArgs, ReportArgs, SimulateArgs, TrainArgs,
    TrainForecasterArgs,
};

type CliResult<T = ()> = Result<T, CliError>;

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::input(format!("{}: {e}", path.display()))
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| io_err(path, e))
}

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| io_err(path, e))
}

fn scenario_error(e: ScenarioError) -> CliError {
    CliError::input(e.to_string())
}

/// A preset name, or else a path to a scenario file.
fn resolve_scenario(name: &str) -> CliResult<Scenario> {
    if let Some(s) = preset(name) {
        return Ok(s);
    }
    let path = Path::new(name);
    if path.exists() {
        return Scenario::load(path).map_err(scenario_error);
    }
    Err(CliError::input(format!(
        "unknown scenario `{name}`; presets: {}",
        preset_names().join(", ")
    )))
}

pub fn gen_traffic(args: GenTrafficArgs) -> CliResult {
    let mut scenario = match (&args.config, &args.preset) {
        (Some(path), _) => Scenario::load(path).map_err(scenario_error)?,
        (None, Some(name)) => preset(name).ok_or_else(|| {
            CliError::input(format!(
                "unknown preset `{name}`; presets: {}",
                preset_names().join(", ")
            ))
        })?,
        (None, None) => return Err(CliError::input("either --config or --preset is required")),
    };
    if let Some(total) = args.total {
        scenario.traffic.total_requests = total;
    }
    if let Some(seed) = args.seed {
        scenario.traffic.seed = seed;
    }
    let records = scenario.requests().map_err(scenario_error)?;

    let mut out = create(&args.out)?;
    write_dataset(&mut out, &records).map_err(|e| io_err(&args.out, e))?;
    out.flush().map_err(|e| io_err(&args.out, e))?;

    let mut counts = [0u64; 3];
    for r in &records {
        let kind = r.slice_type.unwrap_or_else(|| oracle_label(r));
        if let Some(i) = kind.class_index() {
            counts[i] += 1;
        }
    }
    println!("wrote {} requests to {}", records.len(), args.out.display());
    for (kind, n) in SliceKind::CLASSES.iter().zip(counts) {
        let pct = if records.is_empty() {
            0.0
        } else {
            n as f64 * 100.0 / records.len() as f64
        };
        println!("{:<6} {:>9} ({pct:.2}%)", kind.as_str(), n);
    }
    Ok(())
}

fn dataset_error(path: &Path, e: DatasetError) -> CliError {
    match e {
        DatasetError::Io(_) => io_err(path, e),
        other => CliError::input(format!("{}: {other}", path.display())),
    }
}

fn model_error(e: ModelError) -> CliError {
    match e {
        ModelError::Config(_) => CliError::input(e.to_string()),
        ModelError::Io(_) | ModelError::Json(_) | ModelError::Checkpoint(_) => {
            CliError::input(e.to_string())
        }
        ModelError::Shape { .. } => CliError::compatibility(e.to_string()),
        _ => CliError::data(e.to_string()),
    }
}

pub fn train(args: TrainArgs) -> CliResult {
    let bounds = match &args.scenario {
        Some(path) => Scenario::load(path).map_err(scenario_error)?.encoding,
        None => EncodingBounds::default(),
    };
    let dataset = load_dataset(&args.data).map_err(|e| dataset_error(&args.data, e))?;
    for err in &dataset.row_errors {
        log::warn!(
            "{}: line {}: {}",
            args.data.display(),
            err.line,
            err.message
        );
    }
    if dataset.records.is_empty() {
        return Err(CliError::data(format!(
            "{}: no usable rows",
            args.data.display()
        )));
    }
    let mut examples = Vec::with_capacity(dataset.records.len());
    for r in &dataset.records {
        let features = encode_features(r, &bounds)
            .map_err(|e| CliError::data(format!("request {}: {e}", r.id)))?;
        examples.push(LabeledExample {
            features: features.to_vec(),
            label: r.slice_type.unwrap_or_else(|| oracle_label(r)),
        });
    }
    let mut architecture = Architecture::default();
    if let Some(channels) = args.conv_channels {
        architecture.conv = Some(ConvSpec {
            channels,
            kernel: args.conv_kernel,
        });
    }
    let config = TrainConfig {
        train_fraction: args.split,
        epochs: args.epochs,
        learning_rate: args.lr,
        batch_size: args.batch,
        seed: args.seed,
        architecture,
        label_noise: args.label_noise,
    };
    let trained = train_predictor(&examples, &config).map_err(model_error)?;
    let pairs = trained.held_out_pairs(&examples).map_err(model_error)?;
    let matrix = confusion(&pairs).map_err(|e| CliError::data(e.to_string()))?;
    let report = metrics(&matrix).map_err(|e| CliError::data(e.to_string()))?;

    trained
        .model
        .save(&args.out, &bounds, args.seed)
        .map_err(|e| io_err(&args.out, e))?;
    if args.json {
        println!(
            "{}",
            serde_json::to_string_pretty(&report).expect("report serializes")
        );
    } else {
        println!(
            "trained on {} examples, evaluated on {}; final training loss {:.4}",
            trained.train_indices.len(),
            trained.test_indices.len(),
            trained.loss_history.last().copied().unwrap_or(f64::NAN)
        );
        print!("{}", report.render(false));
        println!("checkpoint written to {}", args.out.display());
    }
    Ok(())
}

pub fn train_forecaster(args: TrainForecasterArgs) -> CliResult {
    let samples = read_samples(open(&args.samples)?)
        .map_err(|e| CliError::input(format!("{}: {e}", args.samples.display())))?;
    let config = ForecastConfig {
        window: args.window,
        hidden: args.hidden,
        epochs: args.epochs,
        learning_rate: args.lr,
        seed: args.seed,
        ..ForecastConfig::default()
    };
    let mut forecaster = LoadForecaster::default();
    for kind in SliceKind::ALL {
        let trace: Vec<f64> = samples
            .iter()
            .map(|s| s.utilization[kind.index()])
            .collect();
        let trained = models::train_forecaster(&trace, &config).map_err(model_error)?;
        println!(
            "{:<6} final loss {:.6}",
            kind.as_str(),
            trained.loss_history.last().copied().unwrap_or(f64::NAN)
        );
        forecaster.models.insert(kind, trained.model);
    }
    let text = serde_json::to_string(&forecaster).expect("forecaster serializes");
    fs::write(&args.out, text + "\n").map_err(|e| io_err(&args.out, e))?;
    println!("forecaster written to {}", args.out.display());
    Ok(())
}

fn sim_error(e: SimError) -> CliError {
    match e {
        SimError::Compatibility(_) => CliError::compatibility(e.to_string()),
        SimError::Model(m) => model_error(m),
        SimError::Scenario(s) => scenario_error(s),
        SimError::Input(_) | SimError::Io { .. } => CliError::input(e.to_string()),
    }
}

pub fn simulate(args: SimulateArgs) -> CliResult {
    let mut scenario = resolve_scenario(&args.scenario)?;
    if let Some(seed) = args.seed {
        scenario.traffic.seed = seed;
    }
    if !(args.scale.is_finite() && args.scale >= 0.0) {
        return Err(CliError::input(format!(
            "--scale {} must be non-negative",
            args.scale
        )));
    }
    if args.scale != 1.0 {
        scenario = scenario.scaled(args.scale);
    }
    match args.model.as_deref() {
        None => {}
        Some("oracle") => scenario.predictor = PredictorMode::Oracle,
        Some(path) => {
            scenario.predictor = PredictorMode::TrainedModel {
                checkpoint: PathBuf::from(path),
            }
        }
    }
    scenario.validate().map_err(scenario_error)?;
    let classifier = match &scenario.predictor {
        PredictorMode::Oracle => Classifier::Oracle,
        PredictorMode::TrainedModel { checkpoint } => {
            let cp = PredictorCheckpoint::load(checkpoint).map_err(|e| io_err(checkpoint, e))?;
            Classifier::from_checkpoint(cp, &scenario.encoding).map_err(sim_error)?
        }
    };
    let forecaster = match &scenario.forecaster {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
            Some(serde_json::from_str::<LoadForecaster>(&text).map_err(|e| io_err(path, e))?)
        }
        None => None,
    };

    let requests = scenario.requests().map_err(scenario_error)?;
    let result =
        sim::run_with(&scenario, &requests, &classifier, forecaster.as_ref()).map_err(sim_error)?;

    let dir = &args.out_dir;
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let write_csv =
        |name: &str, f: &dyn Fn(&mut BufWriter<File>) -> Result<(), String>| -> CliResult {
            let path = dir.join(name);
            let mut out = create(&path)?;
            f(&mut out).map_err(|e| io_err(&path, e))?;
            out.flush().map_err(|e| io_err(&path, e))
        };
    write_csv("samples.csv", &|w| {
        write_samples(w, &result.samples).map_err(|e| e.to_string())
    })?;
    write_csv("decisions.csv", &|w| {
        write_decisions(w, &result.decisions).map_err(|e| e.to_string())
    })?;
    write_csv("totals.json", &|w| {
        write_totals(w, &result).map_err(|e| e.to_string())
    })?;
    if matches!(classifier, Classifier::Model { .. }) {
        write_csv("pairs.csv", &|w| {
            write_pairs(w, &result.pairs).map_err(|e| e.to_string())
        })?;
    }
    if forecaster.is_some() {
        write_csv("warnings.csv", &|w| {
            writeln!(w, "time_s,slice,predicted_utilization").map_err(|e| e.to_string())?;
            for warn in &result.warnings {
                writeln!(
                    w,
                    "{},{},{}",
                    warn.time, warn.slice, warn.predicted_utilization
                )
                .map_err(|e| e.to_string())?;
            }
            Ok(())
        })?;
    }

    let t = &result.totals;
    println!(
        "scenario {} ({} requests, {} samples)",
        result.scenario,
        t.arrivals,
        result.samples.len()
    );
    println!("admitted            {}", t.admitted);
    println!("overflow-redirected {}", t.overflow_redirected);
    println!("failure-redirected  {}", t.failure_redirected);
    println!("unmatched-fallback  {}", t.unmatched_fallback);
    println!("rejected            {}", t.rejected);
    println!("dropped             {}", t.dropped);
    println!("rehomed             {}", t.rehomed);
    println!("expired             {}", t.expired);
    println!("still active        {}", result.still_active_total());
    if forecaster.is_some() {
        println!("overload warnings   {}", result.warnings.len());
    }
    println!("results written to {}", dir.display());
    Ok(())
}

pub fn evaluate(args: EvaluateArgs) -> CliResult {
    let pairs = read_pairs(open(&args.pairs)?)
        .map_err(|e| CliError::input(format!("{}: {e}", args.pairs.display())))?;
    let matrix = confusion(&pairs).map_err(|e| CliError::input(e.to_string()))?;
    let report = match metrics(&matrix) {
        Ok(r) => r,
        Err(MetricsError::EmptyInput) => {
            return Err(CliError::data(format!(
                "{}: no pairs to evaluate",
                args.pairs.display()
            )))
        }
        Err(e) => return Err(CliError::data(e.to_string())),
    };
    if args.json {
        println!(
            "{}",
            serde_json::to_string_pretty(&report).expect("report serializes")
        );
    } else {
        print!("{}", report.render(args.micro));
    }
    Ok(())
}

pub fn report(args: ReportArgs) -> CliResult {
    let kind: SeriesKind = args.kind.parse().map_err(CliError::input)?;
    if !(args.skip_warmup.is_finite() && args.skip_warmup >= 0.0) {
        return Err(CliError::input("--skip-warmup must be non-negative"));
    }
    let samples = read_samples(open(&args.samples)?)
        .map_err(|e| CliError::input(format!("{}: {e}", args.samples.display())))?;
    let skip = SimTime::from_secs_f64(args.skip_warmup * 3600.0);
    let rows = match export_series(&samples, kind, skip, &args.out) {
        Ok(n) => n,
        Err(MetricsError::EmptySeries) => {
            return Err(CliError::data(format!(
                "{}: no samples after the warm-up",
                args.samples.display()
            )))
        }
        Err(e) => return Err(io_err(&args.out, e)),
    };
    println!("wrote {rows} rows to {}", args.out.display());
    Ok(())
}
