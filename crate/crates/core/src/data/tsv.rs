//! Tab-separated interaction logs: `<user_id>\t<item_id>[\t...]`, one
//! interaction per line, `#` comments and blank lines skipped.

use std::collections::HashMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::dataset::{CrossDomainDataset, InteractionDataset};
use crate::error::{Error, Result};

/// One domain's interactions with their external identifiers attached.
/// Indices are dense and follow first appearance in the source file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledInteractions {
    pub dataset: InteractionDataset,
    pub user_ids: Vec<String>,
    pub item_ids: Vec<String>,
    /// Deduplicated pairs in file order.
    pub pairs: Vec<(usize, usize)>,
}

impl LabeledInteractions {
    /// Assigns dense indices in first-appearance order. Users with fewer
    /// than `min_user_interactions` distinct items are dropped before any
    /// index is assigned.
    pub fn from_id_pairs<S: AsRef<str>>(
        raw: &[(S, S)],
        min_user_interactions: usize,
    ) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        let mut unique: Vec<(&str, &str)> = Vec::new();
        for (u, i) in raw {
            let (u, i) = (u.as_ref(), i.as_ref());
            if seen.insert((u, i)) {
                unique.push((u, i));
            }
        }
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for &(u, _) in &unique {
            *counts.entry(u).or_default() += 1;
        }

        let mut user_index: HashMap<&str, usize> = HashMap::new();
        let mut item_index: HashMap<&str, usize> = HashMap::new();
        let mut user_ids = Vec::new();
        let mut item_ids = Vec::new();
        let mut pairs = Vec::new();
        for (u, i) in unique {
            if counts[u] < min_user_interactions {
                continue;
            }
            let ui = *user_index.entry(u).or_insert_with(|| {
                user_ids.push(u.to_string());
                user_ids.len() - 1
            });
            let ii = *item_index.entry(i).or_insert_with(|| {
                item_ids.push(i.to_string());
                item_ids.len() - 1
            });
            pairs.push((ui, ii));
        }
        if pairs.is_empty() {
            return Err(Error::data("dataset is empty"));
        }
        let dataset =
            InteractionDataset::from_pairs(user_ids.len(), item_ids.len(), pairs.iter().copied())?;
        Ok(Self {
            dataset,
            user_ids,
            item_ids,
            pairs,
        })
    }

    pub fn num_users(&self) -> usize {
        self.user_ids.len()
    }
}

/// Parses one TSV document. `path` is only used in error messages.
pub fn parse_interactions(
    text: &str,
    path: &Path,
    min_user_interactions: usize,
) -> Result<LabeledInteractions> {
    let mut raw = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut cols = line.split('\t');
        let user = cols.next().unwrap_or("").trim();
        let item = cols.next().map(str::trim);
        match item {
            Some(item) if !user.is_empty() && !item.is_empty() => raw.push((user, item)),
            _ => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: lineno + 1,
                    message: format!("expected `<user>\\t<item>`, got {line:?}"),
                })
            }
        }
    }
    LabeledInteractions::from_id_pairs(&raw, min_user_interactions).map_err(|e| match e {
        Error::Data(msg) => Error::data(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn load_interactions(path: &Path, min_user_interactions: usize) -> Result<LabeledInteractions> {
    let text = fs::read_to_string(path)?;
    parse_interactions(&text, path, min_user_interactions)
}

/// Writes `dataset` as TSV in user-then-item index order.
pub fn write_interactions(
    path: &Path,
    dataset: &InteractionDataset,
    user_ids: &[String],
    item_ids: &[String],
) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for (u, i) in dataset.pairs() {
        writeln!(w, "{}\t{}", user_ids[u], item_ids[i])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes both domains of `data` to `target` and `source`.
pub fn write_cross_domain(data: &CrossDomainDataset, target: &Path, source: &Path) -> Result<()> {
    write_interactions(target, &data.target, &data.user_ids, &data.target_item_ids)?;
    write_interactions(source, &data.source, &data.user_ids, &data.source_item_ids)
}

/// Keeps users present in both domains and reindexes them into one shared
/// space (target first-appearance order). Items are reindexed per domain,
/// keeping only those still referenced.
pub fn align_domains(
    target: &LabeledInteractions,
    source: &LabeledInteractions,
) -> Result<CrossDomainDataset> {
    let source_users: HashMap<&str, usize> = source
        .user_ids
        .iter()
        .enumerate()
        .map(|(i, u)| (u.as_str(), i))
        .collect();
    // old target user index -> (new index, old source user index)
    let mut mapping: Vec<Option<usize>> = vec![None; target.num_users()];
    let mut user_ids = Vec::new();
    let mut target_to_source = Vec::new();
    for (old, id) in target.user_ids.iter().enumerate() {
        if let Some(&s) = source_users.get(id.as_str()) {
            mapping[old] = Some(user_ids.len());
            user_ids.push(id.clone());
            target_to_source.push(s);
        }
    }
    if user_ids.is_empty() {
        return Err(Error::data("target and source domains share no users"));
    }
    let mut source_mapping: Vec<Option<usize>> = vec![None; source.num_users()];
    for (new, &s) in target_to_source.iter().enumerate() {
        source_mapping[s] = Some(new);
    }

    let (t_data, t_items) = reindex(target, &mapping, user_ids.len())?;
    let (s_data, s_items) = reindex(source, &source_mapping, user_ids.len())?;
    CrossDomainDataset::new(t_data, s_data, user_ids, t_items, s_items)
}

fn reindex(
    side: &LabeledInteractions,
    user_map: &[Option<usize>],
    num_users: usize,
) -> Result<(InteractionDataset, Vec<String>)> {
    let mut item_map: Vec<Option<usize>> = vec![None; side.item_ids.len()];
    let mut item_ids = Vec::new();
    let mut pairs = Vec::new();
    for &(u, i) in &side.pairs {
        let Some(nu) = user_map[u] else { continue };
        let ni = *item_map[i].get_or_insert_with(|| {
            item_ids.push(side.item_ids[i].clone());
            item_ids.len() - 1
        });
        pairs.push((nu, ni));
    }
    let data = InteractionDataset::from_pairs(num_users, item_ids.len(), pairs)?;
    Ok((data, item_ids))
}
