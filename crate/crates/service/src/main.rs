use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use trapnet_core::dsp::{analyze, decode_audio, AnalysisOp, AudioDecoder};
use trapnet_core::ingest::parse_recording_filename;
use trapnet_core::model::RecordingKind;
use trapnet_core::store::Store;
use trapnet_core::synth::FleetConfig;
use trapnet_service::decoder::CommandDecoder;
use trapnet_service::{tools, ApiError, AppState, Params};

#[derive(Parser)]
#[command(name = "trapnet", version, about = "Insect-trap telemetry server and analytics")]
struct Cli {
    /// Store directory.
    #[arg(long, env = "TRAPNET_DATA_DIR", default_value = "trapnet-data", global = true)]
    data_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP API.
    Serve {
        #[arg(long, env = "TRAPNET_BIND", default_value = "127.0.0.1:8080")]
        bind: String,
        /// Bearer token required on every request.
        #[arg(long, env = "TRAPNET_TOKEN", hide_env_values = true)]
        token: Option<String>,
        /// Command that converts MP3 (stdin) to WAV (stdout).
        #[arg(long, env = "TRAPNET_DECODER")]
        decoder: Option<String>,
    },
    /// Load a CSV table or a directory of tables and recordings into the store.
    Ingest { path: PathBuf },
    /// Write a synthetic fleet, its ground truth and sample recordings.
    Generate {
        /// JSON fleet configuration; omitted fields take their defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an analytics tool against the local store and print canonical JSON.
    Analyze {
        /// Tool name, e.g. `nearest` or `outliers`.
        query: String,
        /// Parameters as `--name value` or `--name=value`.
        #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
        params: Vec<String>,
    },
    /// Analyse a WAV (or, with a decoder, MP3) file.
    Dsp {
        file: PathBuf,
        /// Comma-separated: psd, spectrogram, fundamental, classify, impulses.
        #[arg(long)]
        ops: Option<String>,
        #[arg(long, env = "TRAPNET_DECODER")]
        decoder: Option<String>,
    },
    /// Print the tool manifest.
    Tools,
}

fn tool_params(args: &[String]) -> anyhow::Result<Params> {
    let mut map = std::collections::BTreeMap::new();
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        let Some(name) = arg.strip_prefix("--") else { bail!("expected --name, found {arg:?}") };
        let (name, value) = match name.split_once('=') {
            Some((n, v)) => (n.to_string(), v.to_string()),
            None => (name.to_string(), it.next().with_context(|| format!("--{name} needs a value"))?.clone()),
        };
        if map.insert(name.clone(), value).is_some() {
            bail!("--{name} given twice");
        }
    }
    Ok(Params::new(map))
}

fn decoder(cmd: Option<&str>) -> anyhow::Result<Option<CommandDecoder>> {
    cmd.map(|c| CommandDecoder::parse(c).context("decoder command is empty")).transpose()
}

fn print_json<T: serde::Serialize>(v: &T) -> anyhow::Result<()> {
    println!("{}", trapnet_core::canonical_json(v)?);
    Ok(())
}

async fn serve(store: Store, bind: &str, token: Option<String>, decoder: Option<CommandDecoder>) -> anyhow::Result<()> {
    let state = AppState {
        store: Arc::new(store),
        token: token.filter(|t| !t.is_empty()),
        decoder: decoder.map(|d| Arc::new(d) as Arc<dyn AudioDecoder>),
    };
    if state.token.is_none() {
        tracing::warn!("no TRAPNET_TOKEN set; the API is unauthenticated");
    }
    let listener = tokio::net::TcpListener::bind(bind).await.with_context(|| format!("binding {bind}"))?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, trapnet_service::router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Serve { bind, token, decoder: dec } => {
            tracing_subscriber::fmt()
                .with_env_filter(
                    tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
                )
                .init();
            let store = Store::open(&cli.data_dir)?;
            let dec = decoder(dec.as_deref())?;
            tokio::runtime::Runtime::new()?.block_on(serve(store, &bind, token, dec))
        }
        Command::Ingest { path } => {
            let store = Store::open(&cli.data_dir)?;
            let summary = trapnet_service::ingest_path(&store, &path)?;
            print_json(&summary)
        }
        Command::Generate { config, seed, out } => {
            let config: FleetConfig = match config {
                Some(p) => serde_json::from_str(&std::fs::read_to_string(&p)?)
                    .with_context(|| format!("reading {}", p.display()))?,
                None => FleetConfig::default(),
            };
            let n = trapnet_service::generate_dataset(&config, seed, &out)?;
            eprintln!("wrote {n} readings to {}", out.display());
            Ok(())
        }
        Command::Analyze { query, params } => {
            let store = Store::open(&cli.data_dir)?;
            let p = tool_params(&params)?;
            let dec = decoder(std::env::var("TRAPNET_DECODER").ok().as_deref())?;
            let value = tools::execute(&store, dec.as_ref().map(|d| d as &dyn AudioDecoder), &query, &p)?;
            print_json(&value)
        }
        Command::Dsp { file, ops, decoder: dec } => {
            let bytes = std::fs::read(&file).with_context(|| format!("reading {}", file.display()))?;
            let dec = decoder(dec.as_deref())?;
            let samples = decode_audio(&bytes, dec.as_ref().map(|d| d as &dyn AudioDecoder))?;
            let name = file.file_name().map(|n| n.to_string_lossy().to_string()).unwrap_or_default();
            let kind = [RecordingKind::Wingbeat, RecordingKind::Vibration]
                .into_iter()
                .find(|k| parse_recording_filename(&name, *k).is_ok());
            let ops = match (ops, kind) {
                (Some(list), _) => AnalysisOp::parse_list(&list)?,
                (None, Some(k)) => tools::default_ops(k)?,
                (None, None) => {
                    vec![AnalysisOp::Psd, AnalysisOp::Fundamental, AnalysisOp::Classify, AnalysisOp::Impulses]
                }
            };
            print_json(&analyze(&samples, &ops, &Default::default())?)
        }
        Command::Tools => print_json(&tools::manifest()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match e.downcast_ref::<ApiError>() {
                Some(api) => eprintln!("{}", trapnet_core::canonical_json(api).unwrap_or_else(|_| api.to_string())),
                None => eprintln!("error: {e:#}"),
            }
            ExitCode::FAILURE
        }
    }
}
