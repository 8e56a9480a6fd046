//! In-memory persistence of ingested or derived relations so repeated
//! queries skip re-reading raw files.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use parking_lot::RwLock;

use super::relation::PartitionedRelation;
use super::StorageError;

/// Canonical cache token over (table, transform fingerprint, sort column).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PersistKey {
    token: String,
}

impl PersistKey {
    pub fn new(table: &str, transform: &str, sort_column: Option<&str>) -> PersistKey {
        PersistKey {
            token: format!("{table}|{transform}|{}", sort_column.unwrap_or("-")),
        }
    }

    pub fn token(&self) -> &str {
        &self.token
    }
}

impl fmt::Display for PersistKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.token)
    }
}

/// Unbounded cache; entries live until released.
#[derive(Debug, Default)]
pub struct PersistCache {
    entries: RwLock<HashMap<PersistKey, Arc<PartitionedRelation>>>,
}

impl PersistCache {
    pub fn new() -> PersistCache {
        PersistCache::default()
    }

    /// Binds `key` to `relation`. Re-persisting identical content is a no-op;
    /// different content under a bound key is a [`StorageError::KeyConflict`].
    pub fn persist(
        &self,
        relation: Arc<PartitionedRelation>,
        key: PersistKey,
    ) -> Result<(), StorageError> {
        let mut entries = self.entries.write();
        if let Some(existing) = entries.get(&key) {
            if Arc::ptr_eq(existing, &relation) || **existing == *relation {
                return Ok(());
            }
            return Err(StorageError::KeyConflict(key.token));
        }
        entries.insert(key, relation);
        Ok(())
    }

    pub fn lookup(&self, key: &PersistKey) -> Option<Arc<PartitionedRelation>> {
        self.entries.read().get(key).cloned()
    }

    pub fn release(&self, key: &PersistKey) -> bool {
        self.entries.write().remove(key).is_some()
    }

    pub fn clear(&self) {
        self.entries.write().clear();
    }

    pub fn len(&self) -> usize {
        self.entries.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::storage::relation::{Field, Schema};
    use crate::value::{DataType, Value};

    fn rel(n: i64) -> Arc<PartitionedRelation> {
        let schema = Arc::new(Schema::for_table(vec![Field::new("k", DataType::Int64)]).unwrap());
        let rows = (0..n).map(|i| vec![Value::Int(i)]).collect();
        Arc::new(PartitionedRelation::from_rows(schema, rows, 2))
    }

    #[test]
    fn round_trip() {
        let cache = PersistCache::new();
        let key = PersistKey::new("t", "load", None);
        let r = rel(5);
        cache.persist(r.clone(), key.clone()).unwrap();
        assert_eq!(*cache.lookup(&key).unwrap(), *r);
        assert!(cache.lookup(&PersistKey::new("u", "load", None)).is_none());
    }

    #[test]
    fn same_content_is_idempotent_different_conflicts() {
        let cache = PersistCache::new();
        let key = PersistKey::new("t", "load", Some("k"));
        cache.persist(rel(5), key.clone()).unwrap();
        cache.persist(rel(5), key.clone()).unwrap();
        assert!(matches!(
            cache.persist(rel(6), key.clone()),
            Err(StorageError::KeyConflict(_))
        ));
        assert!(cache.release(&key));
        cache.persist(rel(6), key).unwrap();
    }

    #[test]
    fn equal_inputs_equal_tokens() {
        assert_eq!(
            PersistKey::new("a", "sort", Some("x")),
            PersistKey::new("a", "sort", Some("x"))
        );
        assert_ne!(
            PersistKey::new("a", "sort", Some("x")),
            PersistKey::new("a", "sort", None)
        );
    }
}
