use std::collections::{BTreeMap, BTreeSet};

use chrono::{Duration, NaiveDate};
use councils_core::analytics::{
    aggregate, daily_usage, percent, pool_instances, AggregateMode, DateRange, UsageCorpus, UsagePoint, UsageSeries,
};
use councils_core::fixtures::{read_sidecar, FixtureSummary, SidecarRow};
use councils_core::textproc::stem;
use councils_testkit::oracle::usage_counts;
use proptest::prelude::*;
use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Maps each stemmed gram in the generated corpus to one surface form that
/// produces it, so queries go through the normal tokenize-and-stem path.
fn surface_forms(summary: &FixtureSummary) -> BTreeMap<(usize, String), String> {
    let mut forms = BTreeMap::new();
    for e in &summary.events {
        for n in 1..=2 {
            for w in e.tokens.windows(n) {
                let key = w.iter().map(|t| stem(t)).collect::<Vec<_>>().join(" ");
                forms.entry((n, key)).or_insert_with(|| w.join(" "));
            }
        }
    }
    forms
}

fn day_range(day: NaiveDate) -> DateRange {
    DateRange::new(Some(day), Some(day + Duration::days(1)))
}

#[test]
fn daily_usage_matches_sidecar_and_recount() {
    let dir = tempfile::tempdir().unwrap();
    let (store, summary) = councils_testkit::fixture_store(dir.path());
    let sidecar = read_sidecar(&summary.sidecar).unwrap();
    let forms = surface_forms(&summary);
    let mut rows: BTreeMap<(String, usize, String), Vec<&SidecarRow>> = BTreeMap::new();
    for row in &sidecar {
        rows.entry((row.instance.clone(), row.n, row.gram.clone())).or_default().push(row);
    }

    // Every unigram plus a sample of bigrams, each against all of its days.
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let bigrams: Vec<_> = rows.keys().filter(|k| k.1 == 2).cloned().collect();
    let mut keys: Vec<_> = rows.keys().filter(|k| k.1 == 1).cloned().collect();
    keys.extend(bigrams.choose_multiple(&mut rng, 150).cloned());

    let mut corpora = BTreeMap::new();
    for (instance, n, gram) in keys {
        let corpus = corpora
            .entry(instance.clone())
            .or_insert_with(|| UsageCorpus::load(&store, &instance, DateRange::default()).unwrap());
        let series = corpus.daily_usage(&forms[&(n, gram.clone())], n).unwrap();
        assert_eq!(series.gram, gram);
        let expected = &rows[&(instance.clone(), n, gram.clone())];
        let nonzero: Vec<&UsagePoint> = series.points.iter().filter(|p| p.count > 0).collect();
        assert_eq!(nonzero.len(), expected.len(), "{instance} {gram:?}");
        for (p, row) in nonzero.iter().zip(expected) {
            assert_eq!((p.date, p.count, p.total), (row.date, row.count, row.total), "{instance} {gram:?}");
            let want = 100.0 * row.count as f64 / row.total as f64;
            assert!((p.percent - want).abs() <= 1e-9);
        }
    }

    // Ten random (gram, day) pairs against the brute-force recount.
    for row in sidecar.choose_multiple(&mut rng, 10) {
        let surface = &forms[&(row.n, row.gram.clone())];
        let series = daily_usage(&store, &row.instance, surface, row.n, day_range(row.date)).unwrap();
        let recount = usage_counts(&store, &row.instance, surface, row.n, Some(row.date), Some(row.date + Duration::days(1)));
        let (count, total) = recount[&row.date];
        assert_eq!(series.points.len(), 1);
        let p = &series.points[0];
        assert_eq!((p.count, p.total), (count, total), "{row:?}");
        assert_eq!((p.count, p.total), (row.count, row.total), "{row:?}");
        assert!((p.percent - 100.0 * count as f64 / total as f64).abs() <= 1e-9);
    }
}

#[test]
fn injected_phrase_days() {
    let dir = tempfile::tempdir().unwrap();
    let (store, _) = councils_testkit::fixture_store(dir.path());
    for instance in ["cdp-seattle-21723dcf", "cdp-king-county-b656c71b", "cdp-portland-d2bbda97"] {
        let series = daily_usage(&store, instance, "missing middle", 2, DateRange::default()).unwrap();
        for day in ["2021-03-01", "2021-06-01", "2021-09-01"] {
            let day: NaiveDate = day.parse().unwrap();
            let p = series.points.iter().find(|p| p.date == day).unwrap();
            assert!(p.count >= 1, "{instance} {day}");
        }
        let recount = usage_counts(&store, instance, "missing middle", 2, None, None);
        let got: BTreeMap<NaiveDate, (u64, u64)> = series.points.iter().map(|p| (p.date, (p.count, p.total))).collect();
        assert_eq!(got, recount);
    }
}

#[test]
fn unigram_counts_partition_the_day() {
    let dir = tempfile::tempdir().unwrap();
    let (store, summary) = councils_testkit::fixture_store(dir.path());
    let sidecar = read_sidecar(&summary.sidecar).unwrap();
    let mut sums: BTreeMap<(String, NaiveDate), (u64, u64)> = BTreeMap::new();
    for row in sidecar.iter().filter(|r| r.n == 1) {
        let e = sums.entry((row.instance.clone(), row.date)).or_default();
        e.0 += row.count;
        e.1 = row.total;
    }
    for ((instance, day), (sum, total)) in &sums {
        assert_eq!(sum, total, "{instance} {day}");
    }
    // The same through the library for one instance and every unigram.
    let instance = "cdp-portland-d2bbda97";
    let corpus = UsageCorpus::load(&store, instance, DateRange::default()).unwrap();
    let grams: BTreeSet<String> =
        summary.events.iter().filter(|e| e.instance_slug == instance).flat_map(|e| e.tokens.clone()).collect();
    let mut per_day: BTreeMap<NaiveDate, (u64, f64, u64)> = BTreeMap::new();
    let stems: BTreeSet<String> = grams.iter().map(|g| stem(g)).collect();
    for s in &stems {
        let surface = grams.iter().find(|g| stem(g) == *s).unwrap();
        for p in corpus.daily_usage(surface, 1).unwrap().points {
            let e = per_day.entry(p.date).or_default();
            e.0 += p.count;
            e.1 += p.percent;
            e.2 = p.total;
        }
    }
    for (day, (count, pct, total)) in per_day {
        assert_eq!(count, total, "{day}");
        assert!((pct - 100.0).abs() < 1e-9, "{day}: {pct}");
    }
}

fn series(slug: &str, points: &[(NaiveDate, u64, u64)]) -> UsageSeries {
    UsageSeries {
        instance_slug: slug.into(),
        gram: "hous".into(),
        n: 1,
        points: points
            .iter()
            .map(|&(date, count, total)| UsagePoint { date, gram: "hous".into(), count, total, percent: percent(count, total) })
            .collect(),
    }
}

#[test]
fn pooling_sums_rather_than_averaging() {
    let day = NaiveDate::from_ymd_opt(2021, 1, 4).unwrap();
    let pooled = pool_instances(&[series("a", &[(day, 2, 10)]), series("b", &[(day, 3, 40)])]).unwrap();
    let p = &pooled.points[0];
    assert_eq!((p.count, p.total), (5, 50));
    assert_eq!(p.percent, 10.0);
    let averaged = (20.0 + 7.5) / 2.0;
    assert_eq!(averaged, 13.75);
    assert_ne!(p.percent, averaged);
}

fn random_series() -> impl Strategy<Value = Vec<(NaiveDate, u64, u64)>> {
    prop::collection::btree_map(0i64..60, (0u64..50, 1u64..200), 0..20).prop_map(|m| {
        let base = NaiveDate::from_ymd_opt(2021, 1, 1).unwrap();
        m.into_iter().map(|(d, (c, extra))| (base + Duration::days(d), c, c + extra)).collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]
    #[test]
    fn pooling_conserves_counts(a in random_series(), b in random_series()) {
        let pooled = pool_instances(&[series("a", &a), series("b", &b)]).unwrap();
        let mut want: BTreeMap<NaiveDate, (u64, u64)> = BTreeMap::new();
        for &(d, c, t) in a.iter().chain(&b) {
            let e = want.entry(d).or_default();
            e.0 += c;
            e.1 += t;
        }
        prop_assert_eq!(pooled.points.len(), want.len());
        for (p, (d, (c, t))) in pooled.points.iter().zip(want) {
            prop_assert_eq!((p.date, p.count, p.total), (d, c, t));
            prop_assert_eq!(p.percent, 100.0 * c as f64 / t as f64);
        }
    }

    #[test]
    fn monthly_mean_of_constant_is_constant(days in prop::collection::btree_set(0i64..400, 1..40), k in 1u64..20) {
        let base = NaiveDate::from_ymd_opt(2021, 1, 1).unwrap();
        let points: Vec<_> = days.iter().map(|d| (base + Duration::days(*d), k, 4 * k)).collect();
        let monthly = aggregate(&series("a", &points), AggregateMode::MonthlyMean).unwrap();
        for p in &monthly.points {
            prop_assert!((p.percent - 25.0).abs() < 1e-12);
        }
    }
}
