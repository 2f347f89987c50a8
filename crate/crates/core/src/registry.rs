//! Name-keyed registry of interchangeable strategies.
//!
//! Kernels and hyperparameter rules are both looked up here from strings such
//! as `rbf`, `poly:3` or `mackay`. The part after the first `:` is handed to
//! the factory as its argument.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};

pub type Factory<T> = Box<dyn Fn(Option<&str>) -> Result<Arc<T>> + Send + Sync>;

pub struct Registry<T: ?Sized> {
    kind: &'static str,
    factories: BTreeMap<String, Factory<T>>,
}

impl<T: ?Sized> Registry<T> {
    pub fn new(kind: &'static str) -> Self {
        Self {
            kind,
            factories: BTreeMap::new(),
        }
    }

    /// Registers `factory` under `name`, replacing any previous entry.
    pub fn register<F>(&mut self, name: &str, factory: F) -> &mut Self
    where
        F: Fn(Option<&str>) -> Result<Arc<T>> + Send + Sync + 'static,
    {
        self.factories.insert(name.to_string(), Box::new(factory));
        self
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.factories.contains_key(name)
    }

    /// Resolves a `name[:argument]` specification.
    pub fn resolve(&self, spec: &str) -> Result<Arc<T>> {
        let spec = spec.trim();
        let (name, arg) = match spec.split_once(':') {
            Some((name, arg)) => (name, Some(arg)),
            None => (spec, None),
        };
        let factory = self.factories.get(name).ok_or_else(|| Error::UnknownStrategy {
            kind: self.kind,
            name: spec.to_string(),
        })?;
        factory(arg)
    }
}

impl<T: ?Sized> std::fmt::Debug for Registry<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Registry")
            .field("kind", &self.kind)
            .field("names", &self.factories.keys().collect::<Vec<_>>())
            .finish()
    }
}
