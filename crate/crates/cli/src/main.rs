mod output;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::{Parser, Subcommand};
use qosrank::catalog::{Catalog, CatalogStore};
use qosrank::qos::probe::ProbeSettings;
use qosrank::qos::{parse_samples, write_samples, QosAverage, QosStore};
use qosrank::ranking::{RankError, RankRequest, SortOrder};
use qosrank_service::agent::{load_endpoints, probe_round};
use qosrank_service::{rank_response, Config, Page};

use output::Format;

/// Exit status and one-line message for a failed command.
#[derive(Debug)]
enum CliError {
    Config(String),
    Validation(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Validation(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    fn line(&self) -> String {
        let (kind, msg) = match self {
            CliError::Config(m) => ("config", m),
            CliError::Validation(m) => ("validation", m),
            CliError::Io(m) => ("io", m),
        };
        format!("error: {kind}: {}", msg.replace('\n', " "))
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Parser)]
#[command(name = "qosrank", version, about = "Rank cloud offers by cost and measured network QoS")]
struct Cli {
    /// Directory holding catalog.json and qos.csv.
    #[arg(long, global = true, env = "QOSRANK_DATA_DIR", default_value = "data")]
    data_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Probe endpoints on a schedule, appending samples to a CSV file.
    Probe {
        #[arg(long)]
        endpoints: PathBuf,
        #[arg(long)]
        client_location: String,
        #[arg(long, default_value = "2h", value_parser = humantime::parse_duration)]
        interval: Duration,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 5)]
        repetitions: usize,
        #[arg(long, default_value = "30s", value_parser = humantime::parse_duration)]
        timeout: Duration,
        /// Stop after this many rounds; runs until interrupted when omitted.
        #[arg(long)]
        rounds: Option<usize>,
    },
    /// Validate a catalog document and store it in the data directory.
    IngestCatalog { file: PathBuf },
    #[command(subcommand)]
    Qos(QosCommand),
    /// Rank offer combinations for a request.
    Rank {
        #[arg(long)]
        request: PathBuf,
        /// Catalog to rank against instead of the stored one.
        #[arg(long)]
        catalog: Option<PathBuf>,
        /// Samples to average instead of the stored ones.
        #[arg(long)]
        samples: Option<PathBuf>,
        #[arg(long)]
        top: Option<usize>,
        #[arg(long, default_value_t = 0)]
        offset: usize,
        #[arg(long, default_value = "ratio")]
        by: SortOrder,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
}

#[derive(Subcommand)]
enum QosCommand {
    /// Merge a sample CSV into the stored samples.
    Import { csv: PathBuf },
    /// Print mean QoS per key.
    Averages {
        #[arg(long)]
        client_location: Option<String>,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Publishes the file as a first snapshot, numbered as the service would.
fn load_catalog(path: &Path) -> Result<Arc<Catalog>> {
    let store = CatalogStore::new();
    store
        .import_json(&read(path)?)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    Ok(store.snapshot().expect("just imported"))
}

/// Loads a sample file, failing on the first bad row.
fn load_store(path: &Path) -> Result<QosStore> {
    let mut store = QosStore::new();
    if !path.exists() {
        return Ok(store);
    }
    let parsed = parse_samples(&read(path)?);
    if let Some(e) = parsed.errors.first() {
        return Err(CliError::Validation(format!("{} line {}: {}", path.display(), e.line, e.message)));
    }
    store.merge(&parsed.samples);
    Ok(store)
}

fn stdout_write(text: &str) -> Result<()> {
    std::io::stdout()
        .lock()
        .write_all(text.as_bytes())
        .map_err(|e| CliError::Io(format!("stdout: {e}")))
}

fn serve(config: &Path) -> Result<()> {
    let config = Config::load(config).map_err(|e| CliError::Config(e.to_string()))?;
    runtime()?.block_on(qosrank_service::serve(config)).map_err(|e| match e {
        qosrank_service::ServeError::Endpoints(m) => CliError::Config(m),
        qosrank_service::ServeError::State(s) => CliError::Validation(s.to_string()),
        other => CliError::Io(other.to_string()),
    })
}

fn runtime() -> Result<tokio::runtime::Runtime> {
    tokio::runtime::Runtime::new().map_err(|e| CliError::Io(e.to_string()))
}

#[allow(clippy::too_many_arguments)]
fn probe(
    endpoints: &Path,
    client_location: &str,
    interval: Duration,
    out: &Path,
    repetitions: usize,
    timeout: Duration,
    rounds: Option<usize>,
) -> Result<()> {
    let endpoints = load_endpoints(endpoints).map_err(CliError::Config)?;
    if repetitions == 0 {
        return Err(CliError::Config("--repetitions must be at least 1".into()));
    }
    let settings = ProbeSettings { repetitions, timeout };
    let client = reqwest::Client::new();
    let rt = runtime()?;
    rt.block_on(async {
        let mut ticker = tokio::time::interval(interval);
        ticker.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
        let mut done = 0;
        while rounds.is_none_or(|n| done < n) {
            tokio::select! {
                _ = ticker.tick() => {}
                _ = tokio::signal::ctrl_c() => break,
            }
            let round = probe_round(&client, &endpoints, client_location, &settings).await;
            for (e, err) in &round.failures {
                eprintln!("warning: {}/{} {}: {err}", e.provider, e.datacenter_location, e.service_kind);
            }
            append_samples(out, &round.samples)?;
            eprintln!("round {}: {} samples, {} failures", done + 1, round.samples.len(), round.failures.len());
            done += 1;
        }
        Ok(())
    })
}

fn append_samples(path: &Path, samples: &[qosrank::QosSample]) -> Result<()> {
    let text = write_samples(samples);
    let fresh = fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let body = if fresh {
        text.as_str()
    } else {
        text.split_once('\n').map_or("", |(_, rows)| rows)
    };
    let mut f = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    f.write_all(body.as_bytes())
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn ingest_catalog(data_dir: &Path, file: &Path) -> Result<()> {
    let text = read(file)?;
    let catalog = Catalog::from_json(&text).map_err(|e| CliError::Validation(format!("{}: {e}", file.display())))?;
    write(&data_dir.join("catalog.json"), &text)?;
    eprintln!(
        "stored {} offers ({} compute, {} storage, {} network)",
        catalog.offer_count(),
        catalog.compute.len(),
        catalog.storage.len(),
        catalog.network.len()
    );
    Ok(())
}

fn qos_import(data_dir: &Path, csv: &Path) -> Result<()> {
    let parsed = parse_samples(&read(csv)?);
    let stored = data_dir.join("qos.csv");
    let mut store = load_store(&stored)?;
    let report = store.merge(&parsed.samples);
    write(&stored, &write_samples(&store.all_samples()))?;
    for e in &parsed.errors {
        eprintln!("warning: {} line {}: {}", csv.display(), e.line, e.message);
    }
    eprintln!("imported {} samples, {} duplicates", report.inserted, report.duplicates);
    if parsed.errors.is_empty() {
        Ok(())
    } else {
        let lines: Vec<String> = parsed.errors.iter().map(|e| e.line.to_string()).collect();
        Err(CliError::Validation(format!(
            "{}: {} rows rejected (lines {})",
            csv.display(),
            parsed.errors.len(),
            lines.join(", ")
        )))
    }
}

fn qos_averages(data_dir: &Path, client: Option<&str>, format: Format) -> Result<()> {
    let store = load_store(&data_dir.join("qos.csv"))?;
    let averages: Vec<QosAverage> = store
        .averages()
        .into_iter()
        .filter(|a| client.is_none_or(|c| a.key.client_location == c))
        .collect();
    stdout_write(&output::averages(&averages, format))
}

#[allow(clippy::too_many_arguments)]
fn rank(
    data_dir: &Path,
    request: &Path,
    catalog: Option<&Path>,
    samples: Option<&Path>,
    top: Option<usize>,
    offset: usize,
    by: SortOrder,
    format: Format,
) -> Result<()> {
    let req: RankRequest = serde_json::from_str(&read(request)?)
        .map_err(|e| CliError::Validation(format!("{}: {e}", request.display())))?;
    let catalog = load_catalog(&catalog.map_or_else(|| data_dir.join("catalog.json"), Path::to_owned))?;
    let store = load_store(&samples.map_or_else(|| data_dir.join("qos.csv"), Path::to_owned))?;

    if catalog.offer_count() == 0 {
        eprintln!("warning: the catalog has no offers");
    }
    let page = Page {
        limit: top.unwrap_or(usize::MAX),
        offset,
    };
    let response = rank_response(req, &catalog, &store.averages(), by, page).map_err(|e| match e {
        RankError::Invalid(fields) => CliError::Validation(
            fields
                .iter()
                .map(|f| format!("{}: {}", f.field, f.message))
                .collect::<Vec<_>>()
                .join("; "),
        ),
    })?;
    if response.results.is_empty() {
        eprintln!("warning: no combination satisfies the request");
    }
    stdout_write(&output::ranking(&response, format))
}

fn run(cli: Cli) -> Result<()> {
    let data_dir = &cli.data_dir;
    match cli.command {
        Command::Serve { config } => serve(&config),
        Command::Probe {
            endpoints,
            client_location,
            interval,
            out,
            repetitions,
            timeout,
            rounds,
        } => probe(&endpoints, &client_location, interval, &out, repetitions, timeout, rounds),
        Command::IngestCatalog { file } => ingest_catalog(data_dir, &file),
        Command::Qos(QosCommand::Import { csv }) => qos_import(data_dir, &csv),
        Command::Qos(QosCommand::Averages {
            client_location,
            format,
        }) => qos_averages(data_dir, client_location.as_deref(), format),
        Command::Rank {
            request,
            catalog,
            samples,
            top,
            offset,
            by,
            format,
        } => rank(data_dir, &request, catalog.as_deref(), samples.as_deref(), top, offset, by, format),
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();

    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.line());
            ExitCode::from(e.code())
        }
    }
}
