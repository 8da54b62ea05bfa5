//! Name-keyed registry for interchangeable strategies.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Strategies that can be looked up by a stable name.
pub trait Named {
    fn name(&self) -> &'static str;
}

pub struct Registry<T: ?Sized> {
    kind: &'static str,
    entries: BTreeMap<&'static str, Arc<T>>,
}

impl<T: ?Sized + Named> Registry<T> {
    pub fn new(kind: &'static str) -> Self {
        Registry {
            kind,
            entries: BTreeMap::new(),
        }
    }

    /// Registers a strategy under its own name, replacing any previous entry.
    pub fn register(&mut self, strategy: Arc<T>) -> &mut Self {
        self.entries.insert(strategy.name(), strategy);
        self
    }

    pub fn get(&self, name: &str) -> Result<Arc<T>> {
        self.entries
            .get(name)
            .cloned()
            .ok_or_else(|| Error::UnknownName {
                kind: self.kind,
                name: name.to_string(),
            })
    }

    /// Resolves a list of names, preserving order.
    pub fn select<S: AsRef<str>>(&self, names: &[S]) -> Result<Vec<Arc<T>>> {
        names.iter().map(|n| self.get(n.as_ref())).collect()
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.entries.keys().copied()
    }
}
