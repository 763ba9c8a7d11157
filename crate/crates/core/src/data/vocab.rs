use std::collections::HashMap;
use std::fmt;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IonRole {
    Cation,
    Anion,
}

impl IonRole {
    pub fn tag(self) -> &'static str {
        match self {
            IonRole::Cation => "cation",
            IonRole::Anion => "anion",
        }
    }
}

impl fmt::Display for IonRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Bijection between ion names and dense ids, in first-appearance order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IonVocabulary {
    role: IonRole,
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl IonVocabulary {
    pub fn new(role: IonRole) -> Self {
        Self {
            role,
            names: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn from_names<I, S>(role: IonRole, names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut vocab = Self::new(role);
        for name in names {
            let name = name.into();
            if vocab.index.contains_key(&name) {
                return Err(Error::Config(format!("duplicate {role} name {name:?}")));
            }
            vocab.intern(&name)?;
        }
        Ok(vocab)
    }

    /// Generated names `C0000, C0001, …` or `A0000, …`.
    pub fn synthetic(role: IonRole, count: usize) -> Self {
        let prefix = match role {
            IonRole::Cation => 'C',
            IonRole::Anion => 'A',
        };
        Self::from_names(role, (0..count).map(|i| format!("{prefix}{i:04}"))).expect("unique names")
    }

    /// Id of `name`, assigning the next id if it is new.
    pub fn intern(&mut self, name: &str) -> Result<usize> {
        if let Some(&id) = self.index.get(name) {
            return Ok(id);
        }
        if name.is_empty() || name.contains(['\n', '\r']) {
            return Err(Error::Config(format!("invalid {} name {name:?}", self.role)));
        }
        let id = self.names.len();
        self.names.push(name.to_owned());
        self.index.insert(name.to_owned(), id);
        Ok(id)
    }

    pub fn id(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    /// Like [`id`](Self::id) but reports the closest known names on a miss.
    pub fn lookup(&self, name: &str) -> Result<usize> {
        self.id(name).ok_or_else(|| Error::UnknownIon {
            role: self.role.tag(),
            name: name.to_owned(),
            suggestions: self.nearest(name, 3),
        })
    }

    pub fn nearest(&self, name: &str, k: usize) -> Vec<String> {
        let mut scored: Vec<(usize, &String)> = self.names.iter().map(|n| (strsim::levenshtein(name, n), n)).collect();
        scored.sort();
        scored.into_iter().take(k).map(|(_, n)| n.clone()).collect()
    }

    pub fn name(&self, id: usize) -> Option<&str> {
        self.names.get(id).map(String::as_str)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn role(&self) -> IonRole {
        self.role
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// SHA-256 over the ordered name list; binds a model to its id assignment.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for n in &self.names {
            h.update(n.as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }
}
