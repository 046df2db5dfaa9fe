mod commands;

use std::path::PathBuf;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use councils_core::analytics::AggregateMode;
use councils_core::index::SortOrder;

/// Curate, search and analyse council meeting records.
#[derive(Parser, Debug)]
#[command(name = "councils", version)]
struct Cli {
    /// key=value config file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Store directory (overrides store_root)
    #[arg(long, global = true)]
    store: Option<PathBuf>,
    /// Asset cache directory (overrides cache_root)
    #[arg(long, global = true)]
    cache: Option<PathBuf>,
    /// Log progress to stderr (-vv for debug output)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Ingest a feed of meeting records into the store
    Ingest {
        /// Feed file path or http(s)/file URL
        #[arg(long)]
        feed: String,
        /// Instance the records belong to (defaults to instance_slug)
        #[arg(long)]
        instance: Option<String>,
        /// Also cache each session video
        #[arg(long)]
        fetch_video: bool,
    },
    /// Produce transcripts for events that have none
    Transcribe(TranscribeArgs),
    /// Build or update the search index
    Index {
        /// Only re-index these events
        #[arg(long = "event")]
        events: Vec<String>,
    },
    /// Keyword search over transcripts
    Search(SearchArgs),
    /// Stemmed n-gram usage over time
    Ngram(NgramArgs),
    /// Per-instance meeting counts and date ranges
    Stats {
        #[arg(long = "instance")]
        instances: Vec<String>,
        #[arg(long, value_enum, default_value_t = TableFormat::Text)]
        format: TableFormat,
        /// Query a running server instead of the local store
        #[arg(long)]
        server: Option<String>,
    },
    /// Write a ZIP dataset archive
    Export {
        #[arg(long)]
        out: PathBuf,
        /// Instances to include (default: all)
        #[arg(long = "instance")]
        instances: Vec<String>,
    },
    /// Load a ZIP dataset archive into the store
    Import { archive: PathBuf },
    /// Serve the read-only HTTP API
    Serve {
        /// Port (overrides the config file)
        #[arg(long)]
        port: Option<u16>,
        #[arg(long, default_value = "127.0.0.1")]
        bind: std::net::IpAddr,
        /// Directory of web UI assets to serve outside /api
        #[arg(long)]
        static_dir: Option<PathBuf>,
    },
    /// Synthetic corpus tools
    Fixtures {
        #[command(subcommand)]
        command: FixturesCommand,
    },
    /// Print word and stem pairs
    Stem {
        #[arg(required = true)]
        words: Vec<String>,
    },
}

#[derive(Subcommand, Debug)]
enum FixturesCommand {
    /// Generate feeds, captions and the expected-counts sidecar
    Generate(GenerateArgs),
}

#[derive(Args, Debug)]
struct TranscribeArgs {
    /// Only these events (default: every event without a transcript)
    #[arg(long = "event")]
    events: Vec<String>,
    /// Replace existing transcripts
    #[arg(long)]
    force: bool,
    /// WebVTT or SRT file to use for a single --event
    #[arg(long, conflicts_with_all = ["media", "transcriber"])]
    caption_file: Option<PathBuf>,
    /// Media file to transcribe for a single --event
    #[arg(long)]
    media: Option<PathBuf>,
    /// Speech-to-text command (overrides transcriber_cmd)
    #[arg(long)]
    transcriber: Option<String>,
}

#[derive(Args, Debug)]
struct SearchArgs {
    #[arg(required = true)]
    query: Vec<String>,
    #[arg(long)]
    body: Option<String>,
    #[arg(long)]
    from: Option<NaiveDate>,
    #[arg(long)]
    to: Option<NaiveDate>,
    #[arg(long)]
    instance: Option<String>,
    #[arg(long, default_value_t = SortOrder::Relevance)]
    sort: SortOrder,
    #[arg(long)]
    limit: Option<usize>,
    #[arg(long)]
    offset: Option<usize>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
    format: OutputFormat,
    #[arg(long)]
    server: Option<String>,
}

#[derive(Args, Debug)]
struct NgramArgs {
    /// Gram to track; repeat for several
    #[arg(long = "gram", required = true)]
    grams: Vec<String>,
    /// Gram size (default: token count of each gram)
    #[arg(short)]
    n: Option<usize>,
    #[arg(long)]
    from: NaiveDate,
    /// Exclusive end date
    #[arg(long)]
    to: NaiveDate,
    #[arg(long = "instance")]
    instances: Vec<String>,
    /// Sum counts across instances before computing percentages
    #[arg(long)]
    pool: bool,
    /// monthly or rolling:<days>
    #[arg(long)]
    aggregate: Option<AggregateMode>,
    #[arg(long, value_enum, default_value_t = SeriesFormatArg::Csv)]
    format: SeriesFormatArg,
    /// Write to a file instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    server: Option<String>,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Instance slugs (default: three sample instances)
    #[arg(long = "instance")]
    instances: Vec<String>,
    #[arg(long)]
    events_per_instance: Option<usize>,
    #[arg(long)]
    from: Option<NaiveDate>,
    #[arg(long)]
    to: Option<NaiveDate>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum OutputFormat {
    Text,
    Json,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum TableFormat {
    Text,
    Csv,
    Json,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum SeriesFormatArg {
    Csv,
    Json,
}

fn main() -> std::process::ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => tracing::Level::WARN,
        1 => tracing::Level::INFO,
        _ => tracing::Level::DEBUG,
    };
    tracing_subscriber::fmt().with_max_level(level).with_writer(std::io::stderr).init();
    match commands::run(cli) {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::ExitCode::FAILURE
        }
    }
}
