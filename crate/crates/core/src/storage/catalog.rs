//! Table registry over a directory-rooted shared store.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;

use parking_lot::RwLock;
use serde::{Deserialize, Serialize};

use crate::datagen::tpch;
use crate::value::{DataType, Row};

use super::format::{infer_layout, read_rows, Format};
use super::persist::{PersistCache, PersistKey};
use super::relation::{Field, Partition, PartitionedRelation, Schema};
use super::StorageError;

/// A directory that stands in for a distributed file store shared by all
/// workers. Relative paths resolve against its root.
#[derive(Debug, Clone)]
pub struct SharedStore {
    root: PathBuf,
}

impl SharedStore {
    pub fn new(root: impl Into<PathBuf>) -> SharedStore {
        SharedStore { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn resolve(&self, path: impl AsRef<Path>) -> PathBuf {
        let path = path.as_ref();
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.root.join(path)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableHandle {
    pub name: String,
    pub path: PathBuf,
    pub format: Format,
    pub schema: Arc<Schema>,
    pub header: bool,
    /// Column the table is sorted and indexed on at ingestion, if any.
    pub sort_key: Option<String>,
}

/// Options for [`Catalog::register_with`].
#[derive(Debug, Clone, Default)]
pub struct TableOptions {
    pub header: Option<bool>,
    pub schema: Option<Schema>,
    pub sort_key: Option<String>,
}

/// One table entry of the catalog config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableConfig {
    pub path: String,
    pub format: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub header: Option<bool>,
    /// Sort/index column; marks the table index-eligible.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index: Option<String>,
    /// Explicit schema as `name:type` entries.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub columns: Option<Vec<String>>,
}

/// Catalog config file: table name → [`TableConfig`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CatalogConfig {
    #[serde(default)]
    pub tables: BTreeMap<String, TableConfig>,
}

impl CatalogConfig {
    pub fn parse(text: &str) -> Result<CatalogConfig, StorageError> {
        toml::from_str(text).map_err(|e| StorageError::Config(e.to_string()))
    }

    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("catalog config serializes")
    }
}

fn parse_columns(entries: &[String]) -> Result<Schema, StorageError> {
    let fields = entries
        .iter()
        .map(|e| {
            let (name, ty) = e
                .split_once(':')
                .ok_or_else(|| StorageError::Config(format!("column `{e}` is not name:type")))?;
            let ty = DataType::parse(ty.trim())
                .ok_or_else(|| StorageError::Config(format!("unknown type in `{e}`")))?;
            Ok(Field::new(name.trim(), ty))
        })
        .collect::<Result<Vec<_>, StorageError>>()?;
    Schema::for_table(fields)
}

/// Registry of raw-file tables plus the persistence cache.
///
/// Reads are concurrent; registrations and persists serialize on the
/// internal write locks.
#[derive(Debug)]
pub struct Catalog {
    store: SharedStore,
    tables: RwLock<BTreeMap<String, Arc<TableHandle>>>,
    cache: PersistCache,
    persistence: AtomicBool,
    ingestions: AtomicU64,
}

impl Catalog {
    pub fn new(store: SharedStore) -> Catalog {
        Catalog {
            store,
            tables: RwLock::new(BTreeMap::new()),
            cache: PersistCache::new(),
            persistence: AtomicBool::new(true),
            ingestions: AtomicU64::new(0),
        }
    }

    /// Loads a catalog config file; relative table paths resolve against the
    /// file's directory.
    pub fn from_config_file(path: &Path) -> Result<Catalog, StorageError> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => StorageError::FileNotFound(path.to_path_buf()),
            _ => StorageError::Io(format!("{}: {e}", path.display())),
        })?;
        let root = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        let catalog = Catalog::new(SharedStore::new(root));
        catalog.apply_config(&CatalogConfig::parse(&text)?)?;
        Ok(catalog)
    }

    pub fn apply_config(&self, config: &CatalogConfig) -> Result<(), StorageError> {
        for (name, t) in &config.tables {
            let format: Format = t.format.parse()?;
            let schema = t.columns.as_deref().map(parse_columns).transpose()?;
            self.register_with(
                name,
                &t.path,
                format,
                TableOptions {
                    header: t.header,
                    schema,
                    sort_key: t.index.clone(),
                },
            )?;
        }
        Ok(())
    }

    pub fn store(&self) -> &SharedStore {
        &self.store
    }

    /// Registers a raw file as a table, inferring its schema.
    pub fn register_table(
        &self,
        name: &str,
        path: impl AsRef<Path>,
        format: Format,
    ) -> Result<Arc<TableHandle>, StorageError> {
        self.register_with(name, path, format, TableOptions::default())
    }

    pub fn register_with(
        &self,
        name: &str,
        path: impl AsRef<Path>,
        format: Format,
        options: TableOptions,
    ) -> Result<Arc<TableHandle>, StorageError> {
        if self.tables.read().contains_key(name) {
            return Err(StorageError::DuplicateTable(name.to_string()));
        }
        let path = self.store.resolve(path);
        if !path.is_file() {
            return Err(StorageError::FileNotFound(path));
        }
        let (schema, header) = match options.schema {
            Some(schema) => (schema, options.header.unwrap_or(false)),
            None => {
                let layout = infer_layout(&path, format, options.header, tpch::table_columns(name))?;
                (layout.schema, layout.header)
            }
        };
        if let Some(key) = &options.sort_key {
            if schema.index_of(key).is_none() {
                return Err(StorageError::UnknownColumn(key.clone()));
            }
        }
        let handle = Arc::new(TableHandle {
            name: name.to_string(),
            path,
            format,
            schema: Arc::new(schema),
            header,
            sort_key: options.sort_key,
        });
        let mut tables = self.tables.write();
        if tables.contains_key(name) {
            return Err(StorageError::DuplicateTable(name.to_string()));
        }
        tables.insert(name.to_string(), handle.clone());
        Ok(handle)
    }

    pub fn table(&self, name: &str) -> Result<Arc<TableHandle>, StorageError> {
        self.tables
            .read()
            .get(name)
            .cloned()
            .ok_or_else(|| StorageError::UnknownTable(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.tables.read().contains_key(name)
    }

    pub fn table_names(&self) -> Vec<String> {
        self.tables.read().keys().cloned().collect()
    }

    /// Reads every row of the table's file in file order. Counts as one
    /// ingestion.
    pub fn read_table_rows(&self, handle: &TableHandle) -> Result<Vec<Row>, StorageError> {
        self.ingestions.fetch_add(1, Ordering::Relaxed);
        read_rows(&handle.path, handle.format, handle.header, &handle.schema)
    }

    /// Splits the table into `partition_size`-row partitions in file order.
    pub fn load_partitions(
        &self,
        handle: &TableHandle,
        partition_size: usize,
    ) -> Result<PartitionedRelation, StorageError> {
        if partition_size == 0 {
            return Err(StorageError::InvalidPartitionSize);
        }
        let rows = self.read_table_rows(handle)?;
        Ok(PartitionedRelation::from_rows(
            handle.schema.clone(),
            rows,
            partition_size,
        ))
    }

    /// Loads the table sorted on `column`. Partitions target `partition_size`
    /// rows but are extended so a run of equal keys never crosses a
    /// partition boundary.
    pub fn load_sorted(
        &self,
        handle: &TableHandle,
        column: &str,
        partition_size: usize,
    ) -> Result<PartitionedRelation, StorageError> {
        if partition_size == 0 {
            return Err(StorageError::InvalidPartitionSize);
        }
        let idx = handle
            .schema
            .index_of(column)
            .ok_or_else(|| StorageError::UnknownColumn(column.to_string()))?;
        let mut rows = self.read_table_rows(handle)?;
        if !rows.windows(2).all(|w| w[0][idx].total_cmp(&w[1][idx]).is_le()) {
            rows.sort_by(|a, b| a[idx].total_cmp(&b[idx]));
        }
        Ok(PartitionedRelation {
            schema: handle.schema.clone(),
            partitions: split_on_key_runs(rows, idx, partition_size),
            sorted_on: Some(column.to_string()),
        })
    }

    pub fn set_persistence(&self, enabled: bool) {
        self.persistence.store(enabled, Ordering::Relaxed);
    }

    pub fn persistence_enabled(&self) -> bool {
        self.persistence.load(Ordering::Relaxed)
    }

    pub fn cache(&self) -> &PersistCache {
        &self.cache
    }

    pub fn persist(
        &self,
        relation: Arc<PartitionedRelation>,
        key: PersistKey,
    ) -> Result<(), StorageError> {
        self.cache.persist(relation, key)
    }

    pub fn lookup_persisted(&self, key: &PersistKey) -> Option<Arc<PartitionedRelation>> {
        self.cache.lookup(key)
    }

    /// Number of raw-file reads so far.
    pub fn ingestion_count(&self) -> u64 {
        self.ingestions.load(Ordering::Relaxed)
    }

    pub fn reset_ingestion_count(&self) {
        self.ingestions.store(0, Ordering::Relaxed);
    }

    pub fn relation_key(handle: &TableHandle, partition_size: usize) -> PersistKey {
        PersistKey::new(
            &handle.name,
            &format!("load:{partition_size}"),
            handle.sort_key.as_deref(),
        )
    }

    /// The table as a partitioned relation, sorted if it is index-eligible.
    /// Served from the persistence cache when enabled.
    pub fn relation(
        &self,
        name: &str,
        partition_size: usize,
    ) -> Result<Arc<PartitionedRelation>, StorageError> {
        let handle = self.table(name)?;
        let key = Catalog::relation_key(&handle, partition_size);
        let persist = self.persistence_enabled();
        if persist {
            if let Some(rel) = self.cache.lookup(&key) {
                return Ok(rel);
            }
        }
        let rel = Arc::new(match &handle.sort_key {
            Some(col) => self.load_sorted(&handle, col, partition_size)?,
            None => self.load_partitions(&handle, partition_size)?,
        });
        if persist {
            self.cache.persist(rel.clone(), key)?;
        }
        Ok(rel)
    }
}

fn split_on_key_runs(rows: Vec<Row>, idx: usize, partition_size: usize) -> Vec<Partition> {
    let mut partitions = Vec::new();
    let mut current: Vec<Row> = Vec::with_capacity(partition_size);
    for row in rows {
        if current.len() >= partition_size && current.last().map(|r| &r[idx]) != Some(&row[idx]) {
            let ordinal = partitions.len() as u32 + 1;
            partitions.push(Partition::new(ordinal, std::mem::take(&mut current)));
        }
        current.push(row);
    }
    if !current.is_empty() {
        let ordinal = partitions.len() as u32 + 1;
        partitions.push(Partition::new(ordinal, current));
    }
    partitions
}
