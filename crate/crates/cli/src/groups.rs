use std::path::Path;

use serde::Deserialize;
use torus_graph::TorusError;

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum ChannelRef {
    Index(usize),
    Name(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GroupDoc {
    name: String,
    channels: Vec<ChannelRef>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GroupsDoc {
    schema_version: u32,
    groups: Vec<GroupDoc>,
}

/// Named channel groups resolved to 0-based indices.
#[derive(Debug, Clone)]
pub struct Groups(pub Vec<(String, Vec<usize>)>);

impl Groups {
    pub fn load(path: &Path, names: &[String]) -> Result<Self, TorusError> {
        let doc: GroupsDoc = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if doc.schema_version != 1 {
            return Err(TorusError::Schema(format!(
                "unsupported schema_version {}",
                doc.schema_version
            )));
        }
        let mut out: Vec<(String, Vec<usize>)> = Vec::new();
        for g in doc.groups {
            if out.iter().any(|(n, _)| *n == g.name) {
                return Err(TorusError::Schema(format!("duplicate group '{}'", g.name)));
            }
            let mut idx = Vec::with_capacity(g.channels.len());
            for c in g.channels {
                let i = match c {
                    ChannelRef::Index(i) if i < names.len() => i,
                    ChannelRef::Index(i) => {
                        return Err(TorusError::Domain(format!(
                            "group '{}': channel index {i} out of range for {} channels",
                            g.name,
                            names.len()
                        )))
                    }
                    ChannelRef::Name(n) => names.iter().position(|x| *x == n).ok_or_else(|| {
                        TorusError::Domain(format!("group '{}': unknown channel '{n}'", g.name))
                    })?,
                };
                if !idx.contains(&i) {
                    idx.push(i);
                }
            }
            if idx.is_empty() {
                return Err(TorusError::Domain(format!("group '{}' has no channels", g.name)));
            }
            out.push((g.name, idx));
        }
        Ok(Groups(out))
    }

    pub fn get(&self, name: &str) -> Result<&[usize], TorusError> {
        self.0
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
            .ok_or_else(|| TorusError::Domain(format!("no group named '{name}'")))
    }

    /// Distinct channel pairs `(a, b)` with `a` in the first group and `b` in
    /// the second.
    pub fn cross_pairs(a: &[usize], b: &[usize]) -> Vec<(usize, usize)> {
        let mut seen = std::collections::BTreeSet::new();
        let mut out = Vec::new();
        for &i in a {
            for &j in b {
                if i != j && seen.insert((i.min(j), i.max(j))) {
                    out.push((i, j));
                }
            }
        }
        out
    }
}
