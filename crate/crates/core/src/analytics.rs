//! Daily stemmed n-gram usage series, pooling across instances, and
//! monthly/rolling aggregation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::dataset::load_events;
use crate::domain::Transcript;
use crate::store::{Collection, Store, StoreError};
use crate::textproc::{ngrams, stem, stemmed_tokens, tokenize};

pub const POOLED: &str = "pooled";

#[derive(Debug, thiserror::Error)]
pub enum AnalyticsError {
    #[error("n-gram size must be at least 1")]
    InvalidN,
    #[error("gram {gram:?} has {found} tokens, expected {expected}")]
    GramArityMismatch { gram: String, expected: usize, found: usize },
    #[error("unknown instance {0:?}")]
    UnknownInstance(String),
    #[error("cannot pool series for different grams ({0:?} and {1:?})")]
    GramMismatch(String, String),
    #[error("no series to pool")]
    NothingToPool,
    #[error("rolling window must be at least 1")]
    InvalidWindow,
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UsagePoint {
    pub date: NaiveDate,
    pub gram: String,
    pub count: u64,
    pub total: u64,
    pub percent: f64,
}

impl UsagePoint {
    fn new(date: NaiveDate, gram: &str, count: u64, total: u64) -> Self {
        UsagePoint { date, gram: gram.to_string(), count, total, percent: percent(count, total) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UsageSeries {
    /// Instance slug, or `"pooled"` for a combination of instances.
    pub instance_slug: String,
    /// Stemmed, space-joined gram.
    pub gram: String,
    pub n: usize,
    pub points: Vec<UsagePoint>,
}

pub fn percent(count: u64, total: u64) -> f64 {
    if total == 0 {
        0.0
    } else {
        100.0 * count as f64 / total as f64
    }
}

/// Stems a query gram and checks it has `n` tokens.
pub fn stem_gram(gram: &str, n: usize) -> Result<String, AnalyticsError> {
    if n == 0 {
        return Err(AnalyticsError::InvalidN);
    }
    let tokens = tokenize(gram);
    if tokens.len() != n {
        return Err(AnalyticsError::GramArityMismatch { gram: gram.to_string(), expected: n, found: tokens.len() });
    }
    Ok(tokens.iter().map(|t| stem(t)).collect::<Vec<_>>().join(" "))
}

/// Inclusive-exclusive date window `[from, to)`; open ends are unbounded.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DateRange {
    pub from: Option<NaiveDate>,
    pub to: Option<NaiveDate>,
}

impl DateRange {
    pub fn new(from: Option<NaiveDate>, to: Option<NaiveDate>) -> Self {
        DateRange { from, to }
    }

    pub fn contains(&self, d: NaiveDate) -> bool {
        self.from.is_none_or(|f| d >= f) && self.to.is_none_or(|t| d < t)
    }
}

/// Stemmed token streams of one instance's transcripts, bucketed by UTC
/// session date. Each transcript is a separate stream: n-grams run across
/// sentence boundaries but never across transcripts.
#[derive(Debug, Clone)]
pub struct UsageCorpus {
    pub instance_slug: String,
    days: BTreeMap<NaiveDate, Vec<Vec<String>>>,
}

impl UsageCorpus {
    pub fn load(store: &Store, instance: &str, range: DateRange) -> Result<Self, AnalyticsError> {
        let events: Vec<_> = load_events(store)?.into_iter().filter(|e| e.instance_slug == instance).collect();
        if events.is_empty() {
            return Err(AnalyticsError::UnknownInstance(instance.to_string()));
        }
        let mut days: BTreeMap<NaiveDate, Vec<Vec<String>>> = BTreeMap::new();
        for event in events {
            let date = event.session_date();
            if !range.contains(date) {
                continue;
            }
            let transcript: Transcript = match store.get(Collection::Transcripts, &event.id) {
                Ok(t) => t,
                Err(e) if e.is_not_found() => continue,
                Err(e) => return Err(e.into()),
            };
            let stems: Vec<String> = transcript.sentences.iter().flat_map(|s| stemmed_tokens(&s.text)).collect();
            days.entry(date).or_default().push(stems);
        }
        Ok(UsageCorpus { instance_slug: instance.to_string(), days })
    }

    /// Usage of one gram per session day. Days whose transcripts hold no
    /// n-grams of size `n` are left out.
    pub fn daily_usage(&self, gram: &str, n: usize) -> Result<UsageSeries, AnalyticsError> {
        let target = stem_gram(gram, n)?;
        let mut points = Vec::new();
        for (date, streams) in &self.days {
            let (mut count, mut total) = (0u64, 0u64);
            for stream in streams {
                let grams = ngrams(stream, n).map_err(|_| AnalyticsError::InvalidN)?;
                total += grams.len() as u64;
                count += grams.iter().filter(|g| **g == target).count() as u64;
            }
            if total > 0 {
                points.push(UsagePoint::new(*date, &target, count, total));
            }
        }
        Ok(UsageSeries { instance_slug: self.instance_slug.clone(), gram: target, n, points })
    }
}

pub fn daily_usage(
    store: &Store,
    instance: &str,
    gram: &str,
    n: usize,
    range: DateRange,
) -> Result<UsageSeries, AnalyticsError> {
    // Validate the gram before touching the store.
    stem_gram(gram, n)?;
    UsageCorpus::load(store, instance, range)?.daily_usage(gram, n)
}

/// Sums counts and totals per date across series for the same gram and
/// recomputes percentages from the sums.
pub fn pool_instances(series: &[UsageSeries]) -> Result<UsageSeries, AnalyticsError> {
    let first = series.first().ok_or(AnalyticsError::NothingToPool)?;
    let mut sums: BTreeMap<NaiveDate, (u64, u64)> = BTreeMap::new();
    for s in series {
        if s.gram != first.gram || s.n != first.n {
            return Err(AnalyticsError::GramMismatch(first.gram.clone(), s.gram.clone()));
        }
        for p in &s.points {
            let e = sums.entry(p.date).or_default();
            e.0 += p.count;
            e.1 += p.total;
        }
    }
    let points = sums.into_iter().map(|(d, (c, t))| UsagePoint::new(d, &first.gram, c, t)).collect();
    let instance_slug = if series.len() == 1 { first.instance_slug.clone() } else { POOLED.to_string() };
    Ok(UsageSeries { instance_slug, gram: first.gram.clone(), n: first.n, points })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AggregateMode {
    MonthlyMean,
    RollingMean(usize),
}

impl fmt::Display for AggregateMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AggregateMode::MonthlyMean => f.write_str("monthly"),
            AggregateMode::RollingMean(w) => write!(f, "rolling:{w}"),
        }
    }
}

impl FromStr for AggregateMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "monthly" {
            return Ok(AggregateMode::MonthlyMean);
        }
        match s.strip_prefix("rolling:").map(str::parse::<usize>) {
            Some(Ok(w)) if w >= 1 => Ok(AggregateMode::RollingMean(w)),
            _ => Err(format!("invalid aggregate {s:?} (expected monthly or rolling:<w> with w >= 1)")),
        }
    }
}

/// Smooths a series. Each output point's percent is the mean of the daily
/// percents in its window; `count` and `total` hold the window sums.
///
/// * monthly: one point per calendar month, dated the 1st;
/// * rolling:w: one point per input point, over it and up to `w - 1`
///   preceding points.
pub fn aggregate(series: &UsageSeries, mode: AggregateMode) -> Result<UsageSeries, AnalyticsError> {
    let window_point = |date: NaiveDate, window: &[UsagePoint]| UsagePoint {
        date,
        gram: series.gram.clone(),
        count: window.iter().map(|p| p.count).sum(),
        total: window.iter().map(|p| p.total).sum(),
        percent: window.iter().map(|p| p.percent).sum::<f64>() / window.len() as f64,
    };
    let points = match mode {
        AggregateMode::MonthlyMean => {
            let mut out = Vec::new();
            let mut start = 0;
            while start < series.points.len() {
                let month = month_start(series.points[start].date);
                let end = start + series.points[start..].iter().take_while(|p| month_start(p.date) == month).count();
                out.push(window_point(month, &series.points[start..end]));
                start = end;
            }
            out
        }
        AggregateMode::RollingMean(0) => return Err(AnalyticsError::InvalidWindow),
        AggregateMode::RollingMean(w) => (0..series.points.len())
            .map(|i| window_point(series.points[i].date, &series.points[(i + 1).saturating_sub(w)..=i]))
            .collect(),
    };
    Ok(UsageSeries { points, ..series.clone() })
}

fn month_start(d: NaiveDate) -> NaiveDate {
    NaiveDate::from_ymd_opt(d.year(), d.month(), 1).expect("first of month exists")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeriesFormat {
    Csv,
    Json,
}

impl FromStr for SeriesFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(SeriesFormat::Csv),
            "json" => Ok(SeriesFormat::Json),
            other => Err(format!("unknown format {other:?} (expected csv or json)")),
        }
    }
}

/// Writes series as CSV (`instance,gram,date,count,total,percent`) or as a
/// JSON array of series.
pub fn export_series<W: Write>(series: &[UsageSeries], format: SeriesFormat, out: W) -> std::io::Result<()> {
    match format {
        SeriesFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(["instance", "gram", "date", "count", "total", "percent"])?;
            for s in series {
                for p in &s.points {
                    w.write_record([
                        s.instance_slug.as_str(),
                        p.gram.as_str(),
                        &p.date.to_string(),
                        &p.count.to_string(),
                        &p.total.to_string(),
                        &serde_json::to_string(&p.percent).expect("finite percent"),
                    ])?;
                }
            }
            w.flush()
        }
        SeriesFormat::Json => {
            let mut out = out;
            serde_json::to_writer_pretty(&mut out, series)?;
            out.write_all(b"\n")
        }
    }
}

/// A full n-gram request as issued by the CLI and the HTTP API.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NgramQuery {
    pub grams: Vec<String>,
    /// Expected gram size; inferred from each gram's token count when `None`.
    pub n: Option<usize>,
    pub range: DateRange,
    /// Instances to report on; empty means every instance in the store.
    pub instances: Vec<String>,
    pub pool: bool,
    pub aggregate: Option<AggregateMode>,
}

pub fn run_ngram_query(store: &Store, query: &NgramQuery) -> Result<Vec<UsageSeries>, AnalyticsError> {
    let instances: Vec<String> = if query.instances.is_empty() {
        load_events(store)?.into_iter().map(|e| e.instance_slug).collect::<BTreeSet<_>>().into_iter().collect()
    } else {
        query.instances.clone()
    };
    let mut sized = Vec::new();
    for gram in &query.grams {
        let n = query.n.unwrap_or_else(|| tokenize(gram).len());
        stem_gram(gram, n)?;
        sized.push((gram, n));
    }
    let corpora = instances
        .iter()
        .map(|slug| UsageCorpus::load(store, slug, query.range))
        .collect::<Result<Vec<_>, _>>()?;

    let mut out = Vec::new();
    for (gram, n) in sized {
        let per_instance = corpora.iter().map(|c| c.daily_usage(gram, n)).collect::<Result<Vec<_>, _>>()?;
        let mut series = if query.pool && !per_instance.is_empty() {
            vec![pool_instances(&per_instance)?]
        } else {
            per_instance
        };
        if let Some(mode) = query.aggregate {
            series = series.iter().map(|s| aggregate(s, mode)).collect::<Result<_, _>>()?;
        }
        out.extend(series);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn day(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    fn series(slug: &str, points: &[(&str, u64, u64)]) -> UsageSeries {
        UsageSeries {
            instance_slug: slug.into(),
            gram: "hous".into(),
            n: 1,
            points: points.iter().map(|(d, c, t)| UsagePoint::new(day(d), "hous", *c, *t)).collect(),
        }
    }

    fn corpus(days: &[(&str, &[&str])]) -> UsageCorpus {
        UsageCorpus {
            instance_slug: "s".into(),
            days: days
                .iter()
                .map(|(d, streams)| (day(d), streams.iter().map(|t| stemmed_tokens(t)).collect()))
                .collect(),
        }
    }

    #[test]
    fn hand_counted_day() {
        let c = corpus(&[("2021-01-04", &["a b a c"])]);
        let s = c.daily_usage("a", 1).unwrap();
        assert_eq!(s.points, vec![UsagePoint { date: day("2021-01-04"), gram: "a".into(), count: 2, total: 4, percent: 50.0 }]);
    }

    #[test]
    fn same_day_sessions_merge_and_absent_is_zero() {
        let c = corpus(&[("2021-01-04", &["housing now", "no"]), ("2021-01-05", &["budget"])]);
        let s = c.daily_usage("housing", 1).unwrap();
        assert_eq!((s.points[0].count, s.points[0].total), (1, 3));
        assert_eq!(s.points[1].percent, 0.0);
    }

    #[test]
    fn bigrams_do_not_cross_transcripts() {
        let c = corpus(&[("2021-01-04", &["missing middle", "housing"])]);
        let s = c.daily_usage("middle housing", 2).unwrap();
        assert_eq!((s.points[0].count, s.points[0].total), (0, 1));
        assert_eq!(s.gram, "middl hous");
    }

    #[test]
    fn arity_checked() {
        assert!(matches!(stem_gram("missing middle", 1), Err(AnalyticsError::GramArityMismatch { found: 2, .. })));
        assert!(matches!(stem_gram("x", 0), Err(AnalyticsError::InvalidN)));
    }

    #[test]
    fn pooling_sums_counts() {
        let pooled = pool_instances(&[series("a", &[("2021-01-04", 2, 10)]), series("b", &[("2021-01-04", 3, 40)])]).unwrap();
        assert_eq!(pooled.instance_slug, POOLED);
        assert_eq!((pooled.points[0].count, pooled.points[0].total), (5, 50));
        assert!((pooled.points[0].percent - 10.0).abs() < 1e-12);
        // Averaging the two percentages would have given 13.75.
        assert!((pooled.points[0].percent - (20.0 + 7.5) / 2.0).abs() > 1.0);
    }

    #[test]
    fn pooling_identity_and_union() {
        let one = series("a", &[("2021-01-04", 2, 10)]);
        assert_eq!(pool_instances(std::slice::from_ref(&one)).unwrap(), one);
        let pooled = pool_instances(&[one, series("b", &[("2021-01-05", 1, 4)])]).unwrap();
        assert_eq!(pooled.points.len(), 2);
        assert_eq!(pooled.points[1].percent, 25.0);
    }

    #[test]
    fn pooling_rejects_mixed_grams() {
        let mut other = series("b", &[]);
        other.gram = "polic".into();
        assert!(matches!(pool_instances(&[series("a", &[]), other]), Err(AnalyticsError::GramMismatch(..))));
        assert!(matches!(pool_instances(&[]), Err(AnalyticsError::NothingToPool)));
    }

    fn with_percents(values: &[(&str, f64)]) -> UsageSeries {
        UsageSeries {
            instance_slug: "s".into(),
            gram: "g".into(),
            n: 1,
            points: values
                .iter()
                .map(|(d, p)| UsagePoint { date: day(d), gram: "g".into(), count: 0, total: 1, percent: *p })
                .collect(),
        }
    }

    #[test]
    fn monthly_mean() {
        let s = with_percents(&[("2021-01-04", 0.3), ("2021-01-20", 0.5), ("2021-02-01", 1.0)]);
        let m = aggregate(&s, AggregateMode::MonthlyMean).unwrap();
        assert_eq!(m.points.len(), 2);
        assert_eq!(m.points[0].date, day("2021-01-01"));
        assert!((m.points[0].percent - 0.4).abs() < 1e-12);
        assert_eq!(m.points[0].total, 2);
    }

    #[test]
    fn rolling_mean() {
        let s = with_percents(&[("2021-01-01", 1.0), ("2021-01-02", 2.0), ("2021-01-03", 3.0), ("2021-01-04", 4.0)]);
        let r = aggregate(&s, AggregateMode::RollingMean(3)).unwrap();
        assert_eq!(r.points.iter().map(|p| p.percent).collect::<Vec<_>>(), [1.0, 1.5, 2.0, 3.0]);
        assert!(aggregate(&with_percents(&[]), AggregateMode::MonthlyMean).unwrap().points.is_empty());
        assert!(matches!(aggregate(&s, AggregateMode::RollingMean(0)), Err(AnalyticsError::InvalidWindow)));
    }

    #[test]
    fn aggregate_mode_parse() {
        assert_eq!("monthly".parse::<AggregateMode>().unwrap(), AggregateMode::MonthlyMean);
        assert_eq!("rolling:7".parse::<AggregateMode>().unwrap(), AggregateMode::RollingMean(7));
        assert!("rolling:0".parse::<AggregateMode>().is_err());
        assert!("weekly".parse::<AggregateMode>().is_err());
    }

    #[test]
    fn csv_export() {
        let mut buf = Vec::new();
        export_series(&[], SeriesFormat::Csv, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "instance,gram,date,count,total,percent\n");

        let mut s = series("seattle", &[("2021-01-04", 1, 4)]);
        s.gram = "a,b".into();
        s.points[0].gram = "a,b".into();
        let mut buf = Vec::new();
        export_series(&[s], SeriesFormat::Csv, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "instance,gram,date,count,total,percent\nseattle,\"a,b\",2021-01-04,1,4,25.0\n"
        );
    }

    #[test]
    fn json_export_round_trips() {
        let s = series("seattle", &[("2021-01-04", 1, 3)]);
        let mut buf = Vec::new();
        export_series(std::slice::from_ref(&s), SeriesFormat::Json, &mut buf).unwrap();
        let back: Vec<UsageSeries> = serde_json::from_slice(&buf).unwrap();
        assert_eq!(back, vec![s]);
    }
}
