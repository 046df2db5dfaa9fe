use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use chrono::Utc;
use councils_client::Client;
use councils_core::analytics::{export_series, SeriesFormat, UsageSeries};
use councils_core::api::{to_json, ApiContext, Params, SearchResponse};
use councils_core::cache::{AssetCache, HttpFetcher, RetryPolicy};
use councils_core::captions::ExternalBackend;
use councils_core::config::Config;
use councils_core::dataset::{export_zip, import_zip, refresh_manifests};
use councils_core::domain::InstanceManifest;
use councils_core::fixtures::{generate, FixtureSpec};
use councils_core::index::index_events;
use councils_core::ingest::{ingest_feed, load_feed, transcribe_pending, IngestOptions, TranscribeRequest};
use councils_core::store::Store;
use councils_core::textproc::stem;

use crate::{Cli, Command, FixturesCommand, NgramArgs, OutputFormat, SearchArgs, SeriesFormatArg, TableFormat};

pub fn run(cli: Cli) -> Result<()> {
    let config = settings(&cli)?;
    match cli.command {
        Command::Ingest { feed, instance, fetch_video } => ingest(&config, &feed, instance, fetch_video),
        Command::Transcribe(args) => {
            if (args.caption_file.is_some() || args.media.is_some()) && args.events.len() != 1 {
                bail!("--caption-file and --media need exactly one --event");
            }
            let backend = match args.transcriber.as_deref().or(config.transcriber_cmd.as_deref()) {
                Some(cmd) => Some(ExternalBackend::from_command_line(cmd).context("empty transcriber command")?),
                None => None,
            };
            let request = TranscribeRequest {
                events: (!args.events.is_empty()).then_some(args.events),
                force: args.force,
                caption_file: args.caption_file,
                media: args.media,
                backend,
            };
            transcribe(&config, &request)
        }
        Command::Index { events } => {
            let store = open_store(&config)?;
            let selected = (!events.is_empty()).then_some(events.as_slice());
            let report = index_events(&store, selected)?;
            println!(
                "index generation {}: {} documents, keywords updated on {} events",
                report.generation, report.document_count, report.keywords_updated
            );
            Ok(())
        }
        Command::Search(args) => search(&config, args),
        Command::Ngram(args) => ngram(&config, args),
        Command::Stats { instances, format, server } => stats(&config, &instances, format, server.as_deref()),
        Command::Export { out, instances } => {
            let store = open_store(&config)?;
            let manifest = export_zip(&store, &instances, &out)?;
            let events: usize = manifest.instances.iter().map(|m| m.event_count).sum();
            println!("exported {events} events from {} instances to {}", manifest.instances.len(), out.display());
            Ok(())
        }
        Command::Import { archive } => {
            let store = open_store(&config)?;
            let manifest = import_zip(&archive, &store)?;
            let events: usize = manifest.instances.iter().map(|m| m.event_count).sum();
            println!("imported {events} events from {} instances", manifest.instances.len());
            eprintln!("note: archives carry no search index; run `councils index` to build it");
            Ok(())
        }
        Command::Serve { port, bind, static_dir } => {
            let addr = SocketAddr::new(bind, port.unwrap_or(config.port));
            serve(&config, addr, static_dir)
        }
        Command::Fixtures { command: FixturesCommand::Generate(args) } => {
            let mut spec = FixtureSpec { seed: args.seed, ..FixtureSpec::default() };
            if !args.instances.is_empty() {
                spec.instances = args.instances;
            }
            if let Some(n) = args.events_per_instance {
                spec.events_per_instance = n;
            }
            if let Some(from) = args.from {
                spec.date_span.0 = from;
            }
            if let Some(to) = args.to {
                spec.date_span.1 = to;
            }
            let summary = generate(&spec, &args.out)?;
            for (slug, feed) in &summary.feeds {
                println!("{slug}\t{}", feed.display());
            }
            println!("{} events; expected counts in {}", summary.events.len(), summary.sidecar.display());
            Ok(())
        }
        Command::Stem { words } => {
            let mut out = io::stdout().lock();
            for word in words {
                writeln!(out, "{word}\t{}", stem(&word.to_lowercase()))?;
            }
            Ok(())
        }
    }
}

/// Config file values with command-line overrides. Relative roots in a
/// config file are taken relative to that file.
fn settings(cli: &Cli) -> Result<Config> {
    let mut config = match &cli.config {
        Some(path) => {
            let mut c = Config::load(path)?;
            let dir = path.parent().unwrap_or(Path::new(""));
            c.store_root = dir.join(&c.store_root);
            c.cache_root = dir.join(&c.cache_root);
            c
        }
        None => Config::default(),
    };
    if let Some(store) = &cli.store {
        config.store_root = store.clone();
    }
    if let Some(cache) = &cli.cache {
        config.cache_root = cache.clone();
    }
    Ok(config)
}

fn open_store(config: &Config) -> Result<Store> {
    Store::open(&config.store_root).with_context(|| format!("cannot open store {}", config.store_root.display()))
}

fn open_cache(config: &Config) -> Result<AssetCache> {
    let fetcher = HttpFetcher::new(RetryPolicy::default());
    AssetCache::open(&config.cache_root, Box::new(fetcher))
        .with_context(|| format!("cannot open cache {}", config.cache_root.display()))
}

fn ingest(config: &Config, feed: &str, instance: Option<String>, fetch_video: bool) -> Result<()> {
    let instance = instance
        .or_else(|| config.instance_slug.clone())
        .context("no instance given; pass --instance or set instance_slug")?;
    let store = open_store(config)?;
    let cache = open_cache(config)?;
    let feed = load_feed(feed, &HttpFetcher::new(RetryPolicy::default()))?;
    let opts = IngestOptions { fetch_video, ..IngestOptions::default() };
    let results = ingest_feed(&feed, &instance, &store, &cache, &opts);
    let (mut written, mut transcripts, mut failed) = (0, 0, 0);
    for r in &results {
        match &r.result {
            Ok(outcome) => {
                written += outcome.event_written as usize;
                transcripts += outcome.transcript_generator.is_some() as usize;
            }
            Err(e) => {
                failed += 1;
                eprintln!("record {}: {e}", r.record_index);
            }
        }
    }
    refresh_manifests(&store)?;
    println!(
        "{instance}: {} of {} records ingested ({written} events written, {transcripts} with captions)",
        results.len() - failed,
        results.len()
    );
    if failed > 0 {
        bail!("{failed} records failed");
    }
    Ok(())
}

fn transcribe(config: &Config, request: &TranscribeRequest) -> Result<()> {
    let store = open_store(config)?;
    let cache = open_cache(config)?;
    let results = transcribe_pending(&store, &cache, request, Utc::now())?;
    if results.is_empty() {
        println!("nothing to transcribe: every event has a transcript");
        return Ok(());
    }
    let mut failed = 0;
    for r in &results {
        match &r.result {
            Ok(generator) => println!("{}\t{generator}", r.event_id),
            Err(e) => {
                failed += 1;
                eprintln!("event {}: {e}", r.event_id);
            }
        }
    }
    if failed > 0 {
        bail!("{failed} of {} events could not be transcribed", results.len());
    }
    Ok(())
}

/// Runs `f` on a single-threaded runtime. Remote calls only.
fn block_on<F: std::future::Future>(f: F) -> Result<F::Output> {
    let rt = tokio::runtime::Builder::new_current_thread().enable_all().build()?;
    Ok(rt.block_on(f))
}

fn search(config: &Config, args: SearchArgs) -> Result<()> {
    let mut pairs = vec![("q".to_string(), args.query.join(" ")), ("sort".into(), args.sort.to_string())];
    let mut push = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            pairs.push((k.to_string(), v));
        }
    };
    push("body", args.body);
    push("from", args.from.map(|d| d.to_string()));
    push("to", args.to.map(|d| d.to_string()));
    push("instance", args.instance);
    push("limit", args.limit.map(|n| n.to_string()));
    push("offset", args.offset.map(|n| n.to_string()));
    let params = Params::from_pairs(pairs);
    let response = match &args.server {
        Some(url) => {
            let client = Client::new(url)?;
            block_on(client.search(&params))??
        }
        None => ApiContext::new(open_store(config)?, config.recency_tau).search(&params)?,
    };
    let mut out = io::stdout().lock();
    match args.format {
        OutputFormat::Json => {
            out.write_all(&to_json(&response))?;
            writeln!(out)?;
        }
        OutputFormat::Text => print_results(&mut out, &response)?,
    }
    Ok(())
}

fn print_results(out: &mut impl Write, r: &SearchResponse) -> io::Result<()> {
    writeln!(out, "{} results for {:?} (stems: {})", r.total_count, r.query, r.query_stems.join(" "))?;
    for (i, card) in r.results.iter().enumerate() {
        writeln!(
            out,
            "{:>3}. {}  {}  {}  {}  score {:.4}",
            r.offset + i + 1,
            card.date,
            card.body_name,
            card.instance_slug,
            card.event_id,
            card.score.unwrap_or_default()
        )?;
        if !card.snippet.is_empty() {
            writeln!(out, "     {}", card.snippet)?;
        }
        if !card.keywords.is_empty() {
            writeln!(out, "     keywords: {}", card.keywords.join(", "))?;
        }
    }
    Ok(())
}

fn ngram(config: &Config, args: NgramArgs) -> Result<()> {
    let mut pairs: Vec<(String, String)> = args.grams.iter().map(|g| ("gram".to_string(), g.clone())).collect();
    pairs.push(("from".into(), args.from.to_string()));
    pairs.push(("to".into(), args.to.to_string()));
    pairs.extend(args.instances.iter().map(|i| ("instance".to_string(), i.clone())));
    if let Some(n) = args.n {
        pairs.push(("n".into(), n.to_string()));
    }
    if args.pool {
        pairs.push(("pool".into(), "true".into()));
    }
    if let Some(mode) = &args.aggregate {
        pairs.push(("aggregate".into(), mode.to_string()));
    }
    let params = Params::from_pairs(pairs);
    let series: Vec<UsageSeries> = match &args.server {
        Some(url) => {
            let client = Client::new(url)?;
            block_on(client.ngrams(&params))??
        }
        None => ApiContext::new(open_store(config)?, config.recency_tau).ngrams(&params)?,
    };
    let format = match args.format {
        SeriesFormatArg::Csv => SeriesFormat::Csv,
        SeriesFormatArg::Json => SeriesFormat::Json,
    };
    match &args.out {
        Some(path) => {
            let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
            let mut w = BufWriter::new(file);
            export_series(&series, format, &mut w)?;
            w.flush()?;
        }
        None => export_series(&series, format, io::stdout().lock())?,
    }
    Ok(())
}

fn stats(config: &Config, instances: &[String], format: TableFormat, server: Option<&str>) -> Result<()> {
    let mut rows: Vec<InstanceManifest> = match server {
        Some(url) => {
            let client = Client::new(url)?;
            block_on(client.instances())??.instances
        }
        None => refresh_manifests(&open_store(config)?)?,
    };
    if !instances.is_empty() {
        for slug in instances {
            if !rows.iter().any(|r| &r.instance_slug == slug) {
                rows.push(InstanceManifest::from_dates(slug, std::iter::empty()));
            }
        }
        rows.retain(|r| instances.contains(&r.instance_slug));
        rows.sort_by(|a, b| a.instance_slug.cmp(&b.instance_slug));
    }
    let show = |d: Option<chrono::NaiveDate>| d.map(|d| d.to_string()).unwrap_or_default();
    let mut out = io::stdout().lock();
    match format {
        TableFormat::Json => {
            serde_json::to_writer_pretty(&mut out, &rows)?;
            writeln!(out)?;
        }
        TableFormat::Csv => {
            writeln!(out, "instance,events,first_event,last_event")?;
            for r in &rows {
                writeln!(out, "{},{},{},{}", r.instance_slug, r.event_count, show(r.first_event), show(r.last_event))?;
            }
        }
        TableFormat::Text => {
            let width = rows.iter().map(|r| r.instance_slug.len()).max().unwrap_or(0).max(8);
            writeln!(out, "{:<width$}  {:>8}  {:<10}  {:<10}", "Instance", "Meetings", "First", "Last")?;
            for r in &rows {
                let (first, last) = (show(r.first_event), show(r.last_event));
                writeln!(out, "{:<width$}  {:>8}  {first:<10}  {last:<10}", r.instance_slug, r.event_count)?;
            }
        }
    }
    Ok(())
}

fn serve(config: &Config, addr: SocketAddr, static_dir: Option<PathBuf>) -> Result<()> {
    let store = open_store(config)?;
    let ctx = Arc::new(ApiContext::new(store, config.recency_tau));
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = councils_server::bind(addr).await?;
        println!("serving http://{}", listener.local_addr()?);
        let app = councils_server::router(ctx, static_dir);
        councils_server::serve(listener, app, async {
            tokio::signal::ctrl_c().await.ok();
        })
        .await?;
        Ok(())
    })
}
