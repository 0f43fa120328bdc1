//! Shot selection: rank training examples by embedding similarity to a query
//! sentence and partition the top `T*K` into `T` round-robin ensemble groups.
//!
//! Ranking is an exact scan (corpora here are a few thousand sentences at
//! most) with a documented tie-break: equal similarities order by ascending
//! train-file line order, which keeps runs byte-reproducible.

use serde::Serialize;
use thiserror::Error;

use crate::corpus::Example;
use crate::embed::{cosine, EmbedError, EmbeddingVector, TextEmbedder};

#[derive(Debug, Error)]
pub enum ShotError {
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error("ensemble shape must satisfy K >= 1 and T >= 1, got K={k}, T={t}")]
    BadShape { k: usize, t: usize },
}

/// A training example with its precomputed sentence embedding. Line order is
/// the position in the train split, used for tie-breaking.
pub struct PoolEntry {
    pub example_id: String,
    pub line_order: usize,
    pub vector: EmbeddingVector,
}

/// The embedded train split, computed once and immutable afterwards.
pub struct ShotPool {
    entries: Vec<PoolEntry>,
}

impl ShotPool {
    pub fn build(pool: &[Example], embedder: &TextEmbedder) -> Result<Self, ShotError> {
        let mut entries = Vec::with_capacity(pool.len());
        for (line_order, example) in pool.iter().enumerate() {
            entries.push(PoolEntry {
                example_id: example.id.clone(),
                line_order,
                vector: embedder.embed(&example.raw_text)?,
            });
        }
        Ok(ShotPool { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[PoolEntry] {
        &self.entries
    }
}

/// Ranked shot ids for one query, highest similarity first.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShotSelection {
    pub query_id: String,
    /// `(train example id, similarity)` in descending similarity order.
    pub ranked: Vec<(String, f64)>,
    /// True when the pool was smaller than the requested limit.
    pub truncated: bool,
}

/// One ensemble group of shot ids, descending similarity within the group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShotGroup {
    pub group_index: usize,
    pub member_ids: Vec<String>,
}

/// Selects the `limit` most similar pool entries to the query sentence,
/// excluding the query's own id when it appears in the pool. Ties break by
/// ascending line order.
pub fn rank_shots(
    query: &Example,
    pool: &ShotPool,
    embedder: &TextEmbedder,
    limit: usize,
) -> Result<ShotSelection, ShotError> {
    let query_vector = embedder.embed(&query.raw_text)?;
    let mut scored: Vec<(&PoolEntry, f64)> = Vec::with_capacity(pool.entries.len());
    for entry in &pool.entries {
        if entry.example_id == query.id {
            continue;
        }
        scored.push((entry, cosine(&query_vector, &entry.vector)?));
    }
    scored.sort_by(|(ea, sa), (eb, sb)| {
        sb.partial_cmp(sa)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(ea.line_order.cmp(&eb.line_order))
    });
    let truncated = scored.len() < limit;
    scored.truncate(limit);
    Ok(ShotSelection {
        query_id: query.id.clone(),
        ranked: scored
            .into_iter()
            .map(|(entry, score)| (entry.example_id.clone(), score))
            .collect(),
        truncated,
    })
}

/// Round-robin partition of the ranked list: rank r goes to group `r mod T`.
/// Within a group members keep their descending-similarity order.
pub fn partition_groups(
    selection: &ShotSelection,
    k: usize,
    t: usize,
) -> Result<Vec<ShotGroup>, ShotError> {
    if k < 1 || t < 1 {
        return Err(ShotError::BadShape { k, t });
    }
    let mut groups: Vec<ShotGroup> = (0..t)
        .map(|group_index| ShotGroup {
            group_index,
            member_ids: Vec::new(),
        })
        .collect();
    for (rank, (id, _)) in selection.ranked.iter().enumerate() {
        groups[rank % t].member_ids.push(id.clone());
    }
    Ok(groups)
}
