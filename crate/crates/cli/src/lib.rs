//! The `flightstat` command line.

pub mod data;
pub mod script;

use std::ffi::OsString;
use std::fmt;
use std::fs::File;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::{DateTime, NaiveDate, Utc};
use clap::{Args, Parser, Subcommand, ValueEnum};
use flightstat::dialog::{DialogContext, DialogSession, FlightRequest};
use flightstat::evaluation::{evaluate_predictor, format_table, ModelEvaluation};
use flightstat::ingest::{
    drop_missing_labels, generate_synthetic, parse_flights, split_indices, FlightRecord, SplitMode,
    SyntheticConfig,
};
use flightstat::mlp::{TrainConfig, DEFAULT_HIDDEN};
use flightstat::predictor::{ModelKind, Prediction};
use flightstat::request::{resolve_request, PredictRequest};
use flightstat::store::{load_model_dir, write_json, Store, MODELS_DIR};
use flightstat::training::{save_model_dir, train_model, TrainOptions};
use flightstat::{Error, DEFAULT_SEED};
use flightstat_service::{AppState, ServiceConfig};

use crate::data::{
    load_split, write_manifest, write_records, write_rejects, Manifest, SplitManifest,
};
use crate::script::parse_script;

pub const EVALUATION_FILE: &str = "evaluation.json";

#[derive(Debug, Parser)]
#[command(
    name = "flightstat",
    version,
    about = "Flight delay prediction toolkit"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and clean a CSV (or generate synthetic data) and split it.
    Ingest(IngestArgs),
    /// Train one or all models on the training split.
    Train(TrainArgs),
    /// Print the metric table for trained models.
    Evaluate(EvaluateArgs),
    /// Predict the arrival delay of one flight.
    Predict(PredictArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
    /// Replay a scripted conversation and check the system replies.
    SimulateDialog(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Random,
    Chronological,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// On-time performance CSV.
    #[arg(
        long,
        required_unless_present = "synthetic",
        conflicts_with = "synthetic"
    )]
    pub input: Option<PathBuf>,
    /// Generate this many synthetic records instead of reading a file.
    #[arg(long)]
    pub synthetic: Option<usize>,
    /// Noise-free synthetic data, linear in departure delay and distance.
    #[arg(long, requires = "synthetic")]
    pub linear: bool,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.01)]
    pub test_fraction: f64,
    #[arg(long, value_enum, default_value_t = SplitArg::Random)]
    pub split: SplitArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    CarrierOrigin,
    Seasonal,
    Mlp,
    All,
}

impl ModelArg {
    fn kinds(self) -> Vec<ModelKind> {
        match self {
            ModelArg::CarrierOrigin => vec![ModelKind::CarrierOrigin],
            ModelArg::Seasonal => vec![ModelKind::Seasonal],
            ModelArg::Mlp => vec![ModelKind::Mlp],
            ModelArg::All => ModelKind::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_enum)]
    pub model: ModelArg,
    /// Directory written by `ingest`.
    #[arg(long)]
    pub data: PathBuf,
    /// Model directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, default_value_t = 30)]
    pub epochs: usize,
    #[arg(long, default_value_t = 256)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub learning_rate: f64,
    /// Hidden layer widths, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_HIDDEN.to_vec())]
    pub hidden: Vec<usize>,
    #[arg(long, default_value_t = 0.0)]
    pub validation_fraction: f64,
    /// Smallest (carrier, origin) group that gets its own regression.
    #[arg(long)]
    pub min_group_size: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitName {
    Train,
    Test,
}

impl SplitName {
    fn name(self) -> &'static str {
        match self {
            SplitName::Train => "train",
            SplitName::Test => "test",
        }
    }
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub models: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Splits to score; both when omitted.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub split: Vec<SplitName>,
    /// Machine-readable copy; defaults to evaluation.json in the model directory.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// carrier-origin, seasonal, mlp or all.
    #[arg(long, default_value = "mlp")]
    pub model: String,
    #[arg(long)]
    pub models: PathBuf,
    #[arg(long)]
    pub origin: String,
    #[arg(long)]
    pub dest: String,
    #[arg(long)]
    pub airline: String,
    /// YYYY-MM-DD
    #[arg(long)]
    pub date: String,
    /// HH:MM
    #[arg(long)]
    pub time: String,
    #[arg(long, allow_hyphen_values = true)]
    pub dep_delay: Option<f64>,
    #[arg(long)]
    pub distance: Option<f64>,
    #[arg(long)]
    pub flight_num: Option<String>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Defaults to FLIGHTSTAT_PORT, then 8080.
    #[arg(long)]
    pub port: Option<u16>,
    /// Store directory; defaults to FLIGHTSTAT_DATA_DIR. Models are read from its models/ subdirectory.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Defaults to FLIGHTSTAT_DEFAULT_MODEL, then mlp.
    #[arg(long)]
    pub default_model: Option<String>,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: std::net::IpAddr,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub script: PathBuf,
    /// Model directory for delay questions.
    #[arg(long)]
    pub models: Option<PathBuf>,
    /// Store directory; a temporary one when omitted.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Reference date, overriding the script's @today.
    #[arg(long)]
    pub today: Option<NaiveDate>,
    #[arg(long, default_value = "mlp")]
    pub model: String,
}

/// Exit status contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Success = 0,
    Usage = 1,
    Data = 2,
    Internal = 3,
}

#[derive(Debug)]
pub struct Failure {
    pub exit: Exit,
    pub message: String,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl Failure {
    fn new(exit: Exit, message: impl Into<String>) -> Self {
        Failure {
            exit,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let exit = match e {
            Error::Argument(_) => Exit::Usage,
            Error::Diverged { .. } | Error::SessionClosed => Exit::Internal,
            _ => Exit::Data,
        };
        Failure::new(exit, e.to_string())
    }
}

type Outcome = std::result::Result<(), Failure>;

pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(Exit::Usage as u8)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit as u8)
        }
    }
}

pub fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Train(a) => train(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Predict(a) => predict(a),
        Command::Serve(a) => serve(a),
        Command::SimulateDialog(a) => simulate(a),
    }
}

fn ingest(a: IngestArgs) -> Outcome {
    let (source, parsed, rejects) = match (&a.input, a.synthetic) {
        (Some(path), _) => {
            let file = File::open(path).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            let outcome = parse_flights(file)?;
            let rejects: Vec<String> = outcome.rejects.iter().map(|r| r.to_string()).collect();
            (path.display().to_string(), outcome.records, rejects)
        }
        (None, Some(n)) => {
            let config = if a.linear {
                SyntheticConfig::linear(n, 0.9, 0.01)
            } else {
                SyntheticConfig::with_count(n)
            };
            let kind = if a.linear { "linear" } else { "default" };
            (
                format!("synthetic:{kind}:{n}:seed={}", a.seed),
                generate_synthetic(&config, a.seed)?,
                Vec::new(),
            )
        }
        (None, None) => {
            return Err(Failure::new(
                Exit::Usage,
                "either --input or --synthetic is required",
            ))
        }
    };
    let parsed_count = parsed.len();
    let cancelled = parsed.iter().filter(|r| r.cancelled).count();
    let records = drop_missing_labels(parsed);
    let mode = match a.split {
        SplitArg::Random => SplitMode::Random,
        SplitArg::Chronological => SplitMode::Chronological,
    };
    let split = split_indices(&records, a.test_fraction, a.seed, mode)?;
    std::fs::create_dir_all(&a.out).map_err(|e| Error::Io {
        path: a.out.clone(),
        source: e,
    })?;
    write_records(&a.out.join(data::RECORDS_FILE), &records)?;
    write_rejects(&a.out, &rejects)?;
    let manifest = Manifest {
        source,
        parsed: parsed_count,
        rejected: rejects.len(),
        cancelled,
        missing_labels: parsed_count - records.len(),
        records: records.len(),
        usable: records.iter().filter(|r| r.is_usable()).count(),
        split: SplitManifest {
            mode,
            test_fraction: a.test_fraction,
            seed: a.seed,
            train: split.train.len(),
            test: split.test.len(),
            test_indices: split.test,
        },
    };
    write_manifest(&a.out, &manifest)?;
    println!(
        "parsed {} rows ({} rejected, {} cancelled, {} without labels); {} train, {} test",
        manifest.parsed,
        manifest.rejected,
        manifest.cancelled,
        manifest.missing_labels,
        manifest.split.train,
        manifest.split.test
    );
    Ok(())
}

/// Training time stamp: `SOURCE_DATE_EPOCH` when set, so repeated runs can
/// produce identical files, otherwise the current time.
fn trained_at() -> std::result::Result<DateTime<Utc>, Failure> {
    match std::env::var("SOURCE_DATE_EPOCH") {
        Ok(v) => v
            .trim()
            .parse::<i64>()
            .ok()
            .and_then(|s| DateTime::from_timestamp(s, 0))
            .ok_or_else(|| {
                Failure::new(
                    Exit::Usage,
                    format!("SOURCE_DATE_EPOCH {v:?} is not a Unix time"),
                )
            }),
        Err(_) => Ok(Utc::now()),
    }
}

fn train(a: TrainArgs) -> Outcome {
    let (train_records, _, _) = load_split(&a.data)?;
    let mut options = TrainOptions {
        mlp: TrainConfig {
            epochs: a.epochs,
            batch_size: a.batch_size,
            learning_rate: a.learning_rate,
            seed: a.seed,
            validation_fraction: a.validation_fraction,
            hidden: a.hidden.clone(),
            ..TrainConfig::default()
        },
        ..TrainOptions::default()
    };
    if let Some(m) = a.min_group_size {
        options.carrier_origin.min_group_size = m;
    }
    options.mlp.validate()?;
    let at = trained_at()?;
    let mut trained = Vec::new();
    for kind in a.model.kinds() {
        let started = std::time::Instant::now();
        let model = train_model(kind, &train_records, &options)?;
        print!(
            "{}: {} records, {:.1} s",
            kind.label(),
            model.record_count,
            started.elapsed().as_secs_f64()
        );
        if let Some(h) = &model.history {
            if let Some(last) = h.epochs.last() {
                print!(
                    ", training MSE {:.4} -> {:.4} (standardized)",
                    h.initial_mse, last.train_mse
                );
            }
        }
        println!();
        trained.push(model);
    }
    save_model_dir(&a.out, &trained, &train_records, &options, at)?;
    println!(
        "wrote {} model file(s) to {}",
        trained.len(),
        a.out.display()
    );
    Ok(())
}

fn evaluate(a: EvaluateArgs) -> Outcome {
    let set = load_model_dir(&a.models)?;
    if set.models.is_empty() {
        return Err(Failure::new(
            Exit::Data,
            format!("no model files in {}", a.models.display()),
        ));
    }
    let (train_records, test_records, _) = load_split(&a.data)?;
    let splits = if a.split.is_empty() {
        vec![SplitName::Train, SplitName::Test]
    } else {
        a.split.clone()
    };
    let mut rows: Vec<ModelEvaluation> = Vec::new();
    for split in splits {
        let records: &[FlightRecord] = match split {
            SplitName::Train => &train_records,
            SplitName::Test => &test_records,
        };
        for predictor in set.models.values() {
            rows.push(evaluate_predictor(predictor, records, split.name())?);
        }
    }
    print!("{}", format_table(&rows));
    let report = a.report.unwrap_or_else(|| a.models.join(EVALUATION_FILE));
    write_json(&report, &rows)?;
    Ok(())
}

fn print_prediction(p: &Prediction) {
    println!(
        "{}: {:.1} minutes, {}",
        p.model.label(),
        p.minutes,
        if p.delayed { "delayed" } else { "on time" }
    );
    println!(
        "  provenance: {}",
        serde_json::to_string(&p.provenance).unwrap_or_default()
    );
}

fn predict(a: PredictArgs) -> Outcome {
    let set = load_model_dir(&a.models)?;
    let kinds = if a.model.trim() == "all" {
        ModelKind::ALL.to_vec()
    } else {
        vec![a.model.parse::<ModelKind>()?]
    };
    let request = PredictRequest {
        model: None,
        origin: a.origin,
        destination: a.dest,
        airline: a.airline,
        date: a.date,
        time: a.time,
        dep_delay: a.dep_delay,
        distance: a.distance,
        flight_num: a.flight_num,
    };
    let resolved = resolve_request(&request, &set.routes)?;
    for kind in kinds {
        let predictor = set.models.get(&kind).ok_or_else(|| {
            Error::NotFound(format!("model {:?} in {}", kind.name(), a.models.display()))
        })?;
        print_prediction(&predictor.predict(&resolved.query, set.imputation.as_ref())?);
    }
    Ok(())
}

fn serve(a: ServeArgs) -> Outcome {
    let mut config = ServiceConfig::from_env()?;
    if let Some(port) = a.port {
        config.port = port;
    }
    if let Some(dir) = a.data {
        config.data_dir = dir;
    }
    if let Some(m) = a.default_model {
        config.default_model = m.parse()?;
    }
    let state = AppState::open(&config.data_dir, config.default_model)?;
    if state.registry.is_empty() {
        eprintln!(
            "warning: no models in {}; /predict will answer 404",
            config.data_dir.join(MODELS_DIR).display()
        );
    }
    let addr = SocketAddr::new(a.host, config.port);
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Failure::new(Exit::Internal, e.to_string()))?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| Failure::new(Exit::Internal, format!("cannot listen on {addr}: {e}")))?;
        let local = listener
            .local_addr()
            .map_err(|e| Failure::new(Exit::Internal, e.to_string()))?;
        println!("listening on http://{local}");
        flightstat_service::serve_on(listener, state)
            .await
            .map_err(|e| Failure::new(Exit::Internal, e.to_string()))
    })
}

fn simulate(a: SimulateArgs) -> Outcome {
    let text = std::fs::read_to_string(&a.script).map_err(|e| Error::Io {
        path: a.script.clone(),
        source: e,
    })?;
    let script = parse_script(&text)?;
    let today = a
        .today
        .or(script.today)
        .unwrap_or_else(|| Utc::now().date_naive());
    let scratch;
    let store_dir: &Path = match &a.data {
        Some(d) => d,
        None => {
            scratch =
                tempfile::tempdir().map_err(|e| Failure::new(Exit::Internal, e.to_string()))?;
            scratch.path()
        }
    };
    let store = Store::open(store_dir)?;
    let models = match &a.models {
        Some(dir) => Some(load_model_dir(dir)?),
        None => None,
    };
    let kind: ModelKind = a.model.parse()?;
    let predict = |r: &FlightRequest| {
        let set = models
            .as_ref()
            .ok_or_else(|| Error::NotFound("model directory (pass --models)".into()))?;
        let predictor = set
            .models
            .get(&kind)
            .ok_or_else(|| Error::NotFound(format!("model {:?}", kind.name())))?;
        let resolved = resolve_request(&PredictRequest::from(r), &set.routes)?;
        predictor.predict(&resolved.query, set.imputation.as_ref())
    };
    let ctx = DialogContext {
        flights: &store.flights,
        events: Some(&store.events),
        predict: &predict,
        now: today.and_hms_opt(0, 0, 0).expect("midnight"),
    };
    let (mut session, greeting) = DialogSession::start("simulated", today);
    let mut mismatches = Vec::new();
    for (i, turn) in script.turns.iter().enumerate() {
        let reply = match &turn.user {
            None => greeting.clone(),
            Some(user) => {
                println!("USER: {user}");
                session.respond(user, &ctx)?.0
            }
        };
        for line in reply.lines() {
            println!("SYSTEM: {line}");
        }
        if !turn.expected.is_empty() {
            let expected = turn.expected.join("\n");
            if expected != reply {
                mismatches.push((i, expected, reply));
            }
        }
    }
    if mismatches.is_empty() {
        return Ok(());
    }
    for (i, expected, actual) in &mismatches {
        eprintln!("turn {i}: system reply differs");
        for line in expected.lines() {
            eprintln!("- {line}");
        }
        for line in actual.lines() {
            eprintln!("+ {line}");
        }
    }
    Err(Failure::new(
        Exit::Data,
        format!(
            "{} system turn(s) did not match the script",
            mismatches.len()
        ),
    ))
}
