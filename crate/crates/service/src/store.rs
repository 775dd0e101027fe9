//! Single-file JSON scenario store.
//!
//! The whole store is rewritten on every mutation through a temp file in the
//! same directory followed by a rename, so readers never see a torn file.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::RwLock;

use hieralloc_core::Scenario;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("scenario {0} not found")]
    NotFound(u64),
    #[error("revision mismatch: expected {expected}, current {current}")]
    Conflict { expected: u64, current: u64 },
    #[error("store I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("store file is corrupt: {0}")]
    Corrupt(#[from] serde_json::Error),
}

#[derive(Debug, Default, Clone, Serialize, Deserialize)]
struct StoreData {
    next_id: u64,
    scenarios: BTreeMap<u64, Scenario>,
}

#[derive(Debug)]
pub struct ScenarioStore {
    path: Option<PathBuf>,
    data: RwLock<StoreData>,
}

impl ScenarioStore {
    /// A store that lives only in memory.
    pub fn in_memory() -> Self {
        Self {
            path: None,
            data: RwLock::new(StoreData {
                next_id: 1,
                ..StoreData::default()
            }),
        }
    }

    /// Opens (or starts) the store at `path`.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let path = path.into();
        let data = if path.exists() {
            let mut data: StoreData = serde_json::from_slice(&std::fs::read(&path)?)?;
            data.next_id = data.next_id.max(data.scenarios.keys().max().map_or(1, |k| k + 1));
            data
        } else {
            StoreData {
                next_id: 1,
                ..StoreData::default()
            }
        };
        Ok(Self {
            path: Some(path),
            data: RwLock::new(data),
        })
    }

    fn persist(&self, data: &StoreData) -> Result<(), StoreError> {
        let Some(path) = &self.path else {
            return Ok(());
        };
        let dir = path
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or_else(|| Path::new("."));
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        serde_json::to_writer_pretty(&mut tmp, data)?;
        tmp.flush()?;
        tmp.persist(path).map_err(|e| StoreError::Io(e.error))?;
        Ok(())
    }

    pub fn create(&self, mut scenario: Scenario) -> Result<Scenario, StoreError> {
        let mut data = self.data.write().expect("store lock poisoned");
        let id = data.next_id;
        scenario.id = Some(id);
        scenario.revision = 1;
        let mut next = data.clone();
        next.next_id = id + 1;
        next.scenarios.insert(id, scenario.clone());
        self.persist(&next)?;
        *data = next;
        Ok(scenario)
    }

    pub fn get(&self, id: u64) -> Result<Scenario, StoreError> {
        let data = self.data.read().expect("store lock poisoned");
        data.scenarios.get(&id).cloned().ok_or(StoreError::NotFound(id))
    }

    pub fn list(&self) -> Vec<Scenario> {
        let data = self.data.read().expect("store lock poisoned");
        data.scenarios.values().cloned().collect()
    }

    /// Applies `edit` to a copy of the scenario and commits it with the
    /// revision bumped by one. `expected` is checked against the stored
    /// revision before the edit runs.
    pub fn update<E, F>(&self, id: u64, expected: Option<u64>, edit: F) -> Result<Result<Scenario, E>, StoreError>
    where
        F: FnOnce(&mut Scenario) -> Result<(), E>,
    {
        let mut data = self.data.write().expect("store lock poisoned");
        let current = data.scenarios.get(&id).ok_or(StoreError::NotFound(id))?;
        if let Some(expected) = expected {
            if expected != current.revision {
                return Err(StoreError::Conflict {
                    expected,
                    current: current.revision,
                });
            }
        }
        let mut edited = current.clone();
        if let Err(e) = edit(&mut edited) {
            return Ok(Err(e));
        }
        edited.id = Some(id);
        edited.revision = current.revision + 1;
        let mut next = data.clone();
        next.scenarios.insert(id, edited.clone());
        self.persist(&next)?;
        *data = next;
        Ok(Ok(edited))
    }

    pub fn delete(&self, id: u64) -> Result<(), StoreError> {
        let mut data = self.data.write().expect("store lock poisoned");
        if !data.scenarios.contains_key(&id) {
            return Err(StoreError::NotFound(id));
        }
        let mut next = data.clone();
        next.scenarios.remove(&id);
        self.persist(&next)?;
        *data = next;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use hieralloc_core::RegionRecord;

    fn scenario() -> Scenario {
        Scenario {
            id: None,
            name: "s".into(),
            resource_name: String::new(),
            supply: 10.0,
            regions: vec![RegionRecord::new("A", 5.0)],
            config: Default::default(),
            revision: 0,
        }
    }

    #[test]
    fn ids_survive_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("store.json");
        let store = ScenarioStore::open(&path).unwrap();
        let a = store.create(scenario()).unwrap();
        let b = store.create(scenario()).unwrap();
        assert_eq!((a.id, b.id), (Some(1), Some(2)));
        drop(store);

        let reopened = ScenarioStore::open(&path).unwrap();
        assert_eq!(reopened.get(2).unwrap(), b);
        assert_eq!(reopened.create(scenario()).unwrap().id, Some(3));
    }

    #[test]
    fn stale_revision_conflicts() {
        let store = ScenarioStore::in_memory();
        let s = store.create(scenario()).unwrap();
        let updated = store
            .update(1, Some(s.revision), |s| -> Result<(), ()> {
                s.supply = 20.0;
                Ok(())
            })
            .unwrap()
            .unwrap();
        assert_eq!(updated.revision, 2);
        let err = store.update(1, Some(1), |_| -> Result<(), ()> { Ok(()) }).unwrap_err();
        assert!(matches!(err, StoreError::Conflict { expected: 1, current: 2 }));
        assert!(matches!(store.get(9), Err(StoreError::NotFound(9))));
    }

    #[test]
    fn rejected_edit_leaves_scenario_alone() {
        let store = ScenarioStore::in_memory();
        store.create(scenario()).unwrap();
        let out = store
            .update(1, None, |s| {
                s.supply = -1.0;
                Err("nope")
            })
            .unwrap();
        assert_eq!(out, Err("nope"));
        assert_eq!(store.get(1).unwrap().supply, 10.0);
        assert_eq!(store.get(1).unwrap().revision, 1);
    }
}
