//! Whole-store views: per-instance statistics and ZIP export/import.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{self, Read, Seek, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use zip::write::SimpleFileOptions;

use crate::domain::{Event, InstanceManifest, Matter};
use crate::store::{Collection, Store, StoreError};

pub const ARCHIVE_FORMAT_VERSION: u32 = 1;

/// Collections carried in an archive. The index is derived data and is
/// rebuilt after import rather than shipped.
pub const ARCHIVED_COLLECTIONS: [Collection; 5] = [
    Collection::Events,
    Collection::Transcripts,
    Collection::MinutesItems,
    Collection::Matters,
    Collection::Manifest,
];

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("unknown instance {0:?}")]
    UnknownInstance(String),
    #[error("archive format version {0} is not supported (expected {ARCHIVE_FORMAT_VERSION})")]
    UnsupportedVersion(u32),
    #[error("corrupt archive: {0}")]
    CorruptArchive(String),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("archive i/o error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl From<zip::result::ZipError> for DatasetError {
    fn from(e: zip::result::ZipError) -> Self {
        DatasetError::CorruptArchive(e.to_string())
    }
}

/// All events in the store, sorted by id.
pub fn load_events(store: &Store) -> Result<Vec<Event>, StoreError> {
    store.list(Collection::Events)?.iter().map(|id| store.get(Collection::Events, id)).collect()
}

pub fn instance_slugs(store: &Store) -> Result<BTreeSet<String>, StoreError> {
    Ok(load_events(store)?.into_iter().map(|e| e.instance_slug).collect())
}

/// Event count and first/last session dates for one instance. An instance
/// with no events yields a zero row.
pub fn dataset_stats(store: &Store, instance: &str) -> Result<InstanceManifest, StoreError> {
    let events = load_events(store)?;
    Ok(InstanceManifest::from_dates(
        instance,
        events.iter().filter(|e| e.instance_slug == instance).map(Event::session_date),
    ))
}

/// Stats rows for every instance in the store, stored under the `manifest`
/// collection (one document per instance) and returned sorted by slug.
pub fn refresh_manifests(store: &Store) -> Result<Vec<InstanceManifest>, StoreError> {
    let events = load_events(store)?;
    let mut by_instance: BTreeMap<&str, Vec<chrono::NaiveDate>> = BTreeMap::new();
    for e in &events {
        by_instance.entry(&e.instance_slug).or_default().push(e.session_date());
    }
    let rows: Vec<InstanceManifest> =
        by_instance.into_iter().map(|(slug, dates)| InstanceManifest::from_dates(slug, dates)).collect();
    for row in &rows {
        store.put_if_changed(Collection::Manifest, &row.instance_slug, row)?;
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchiveManifest {
    pub format_version: u32,
    pub instances: Vec<InstanceManifest>,
    /// Number of documents per instance and collection in the payload.
    pub document_counts: BTreeMap<String, BTreeMap<String, usize>>,
}

/// Document ids per archived collection that belong to each instance.
fn documents_by_instance(store: &Store) -> Result<BTreeMap<String, BTreeMap<Collection, Vec<String>>>, StoreError> {
    let events = load_events(store)?;
    let owner: BTreeMap<&str, &str> = events.iter().map(|e| (e.id.as_str(), e.instance_slug.as_str())).collect();
    let mut out: BTreeMap<String, BTreeMap<Collection, Vec<String>>> = BTreeMap::new();
    let mut add = |slug: &str, c: Collection, id: String| {
        out.entry(slug.to_string()).or_default().entry(c).or_default().push(id);
    };
    for e in &events {
        add(&e.instance_slug, Collection::Events, e.id.clone());
    }
    for id in store.list(Collection::Transcripts)? {
        if let Some(slug) = owner.get(id.as_str()) {
            add(slug, Collection::Transcripts, id);
        }
    }
    for id in store.list(Collection::MinutesItems)? {
        let event_id = id.rsplit_once('-').map_or(id.as_str(), |(e, _)| e);
        if let Some(slug) = owner.get(event_id) {
            add(slug, Collection::MinutesItems, id);
        }
    }
    for id in store.list(Collection::Matters)? {
        let matter: Matter = store.get(Collection::Matters, &id)?;
        add(&matter.instance_slug, Collection::Matters, id);
    }
    for id in store.list(Collection::Manifest)? {
        if let Some(slug) = owner.values().find(|slug| **slug == id) {
            add(slug, Collection::Manifest, id);
        }
    }
    Ok(out)
}

/// Writes the selected instances (all when `instances` is empty) to a ZIP
/// archive: `manifest.json` then `<slug>/<collection>/<id>.json` holding
/// the stored bytes unchanged. Output is deterministic for a given store.
pub fn export_zip(store: &Store, instances: &[String], out: &Path) -> Result<ArchiveManifest, DatasetError> {
    let docs = documents_by_instance(store)?;
    let selected: Vec<String> = if instances.is_empty() {
        docs.keys().cloned().collect()
    } else {
        let mut s: Vec<String> = instances.to_vec();
        s.sort();
        s.dedup();
        for slug in &s {
            if !docs.get(slug).is_some_and(|c| c.contains_key(&Collection::Events)) {
                return Err(DatasetError::UnknownInstance(slug.clone()));
            }
        }
        s
    };

    let mut manifest = ArchiveManifest {
        format_version: ARCHIVE_FORMAT_VERSION,
        instances: Vec::new(),
        document_counts: BTreeMap::new(),
    };
    for slug in &selected {
        manifest.instances.push(dataset_stats(store, slug)?);
        let counts = ARCHIVED_COLLECTIONS
            .iter()
            .map(|c| (c.as_str().to_string(), docs[slug].get(c).map_or(0, Vec::len)))
            .collect();
        manifest.document_counts.insert(slug.clone(), counts);
    }

    let io_err = |source| DatasetError::Io { path: out.to_path_buf(), source };
    let file = File::create(out).map_err(io_err)?;
    let mut zip = zip::ZipWriter::new(file);
    let options = SimpleFileOptions::default()
        .compression_method(zip::CompressionMethod::Deflated)
        .last_modified_time(zip::DateTime::default());
    zip.start_file("manifest.json", options)?;
    zip.write_all(&serde_json::to_vec_pretty(&manifest).expect("manifest serializes")).map_err(io_err)?;
    for slug in &selected {
        for c in ARCHIVED_COLLECTIONS {
            for id in docs[slug].get(&c).into_iter().flatten() {
                zip.start_file(format!("{slug}/{}/{id}.json", c.as_str()), options)?;
                zip.write_all(&store.get_bytes(c, id)?).map_err(io_err)?;
            }
        }
    }
    zip.finish()?;
    Ok(manifest)
}

/// Reads and checks an archive, then writes its documents into `store`.
/// Nothing is written unless the whole archive checks out.
pub fn import_zip(path: &Path, store: &Store) -> Result<ArchiveManifest, DatasetError> {
    let file = File::open(path).map_err(|source| DatasetError::Io { path: path.to_path_buf(), source })?;
    let (manifest, documents) = read_archive(file)?;
    for (_, collection, id, bytes) in &documents {
        store.put_bytes(*collection, id, bytes)?;
    }
    Ok(manifest)
}

type ArchivedDocument = (String, Collection, String, Vec<u8>);

fn read_archive<R: Read + Seek>(reader: R) -> Result<(ArchiveManifest, Vec<ArchivedDocument>), DatasetError> {
    let mut zip = zip::ZipArchive::new(reader)?;
    let manifest_bytes = read_entry(&mut zip, "manifest.json")?
        .ok_or_else(|| DatasetError::CorruptArchive("missing manifest.json".into()))?;
    let raw: serde_json::Value = serde_json::from_slice(&manifest_bytes)
        .map_err(|e| DatasetError::CorruptArchive(format!("manifest.json: {e}")))?;
    let version = raw.get("format_version").and_then(serde_json::Value::as_u64).unwrap_or(0) as u32;
    if version != ARCHIVE_FORMAT_VERSION {
        return Err(DatasetError::UnsupportedVersion(version));
    }
    let manifest: ArchiveManifest =
        serde_json::from_value(raw).map_err(|e| DatasetError::CorruptArchive(format!("manifest.json: {e}")))?;

    let mut documents = Vec::new();
    let mut counts: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
    let names: Vec<String> = zip.file_names().map(|n| n.map(|c| c.into_owned())).collect::<Result<_, _>>()?;
    for name in names {
        if name == "manifest.json" || name.ends_with('/') {
            continue;
        }
        let corrupt = || DatasetError::CorruptArchive(format!("unexpected entry {name}"));
        let mut parts = name.splitn(3, '/');
        let (slug, collection, file) = match (parts.next(), parts.next(), parts.next()) {
            (Some(s), Some(c), Some(f)) => (s, c, f),
            _ => return Err(corrupt()),
        };
        let collection: Collection = collection.parse().map_err(|_| corrupt())?;
        let id = file.strip_suffix(".json").ok_or_else(corrupt)?;
        if !ARCHIVED_COLLECTIONS.contains(&collection) || id.contains('/') {
            return Err(corrupt());
        }
        let bytes = read_entry(&mut zip, &name)?.expect("listed entry exists");
        serde_json::from_slice::<serde_json::Value>(&bytes)
            .map_err(|e| DatasetError::CorruptArchive(format!("{name}: {e}")))?;
        *counts.entry(slug.to_string()).or_default().entry(collection.as_str().to_string()).or_default() += 1;
        documents.push((slug.to_string(), collection, id.to_string(), bytes));
    }

    for row in &manifest.instances {
        let found = counts.get(&row.instance_slug).and_then(|c| c.get("events")).copied().unwrap_or(0);
        if found != row.event_count {
            return Err(DatasetError::CorruptArchive(format!(
                "manifest lists {} events for {}, archive holds {found}",
                row.event_count, row.instance_slug
            )));
        }
    }
    let listed: BTreeSet<&String> = manifest.instances.iter().map(|r| &r.instance_slug).collect();
    for (slug, by_collection) in &counts {
        if !listed.contains(slug) {
            return Err(DatasetError::CorruptArchive(format!("payload for unlisted instance {slug}")));
        }
        let expected = manifest.document_counts.get(slug);
        for c in ARCHIVED_COLLECTIONS {
            let want = expected.and_then(|m| m.get(c.as_str())).copied().unwrap_or(0);
            let have = by_collection.get(c.as_str()).copied().unwrap_or(0);
            if want != have {
                return Err(DatasetError::CorruptArchive(format!(
                    "manifest lists {want} {} documents for {slug}, archive holds {have}",
                    c.as_str()
                )));
            }
        }
    }
    Ok((manifest, documents))
}

fn read_entry<R: Read + Seek>(zip: &mut zip::ZipArchive<R>, name: &str) -> Result<Option<Vec<u8>>, DatasetError> {
    let mut entry = match zip.by_name(name) {
        Ok(e) => e,
        Err(zip::result::ZipError::FileNotFound) => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    let mut bytes = Vec::new();
    entry
        .read_to_end(&mut bytes)
        .map_err(|e| DatasetError::CorruptArchive(format!("{name}: {e}")))?;
    Ok(Some(bytes))
}
