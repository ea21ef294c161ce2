//! Cluster-to-class mapping and judge tag expansion.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use itertools::Itertools;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::stream::ClassLabel;
use crate::{Error, Result};

/// Largest cluster count searched exhaustively.
pub const MAX_BRUTE_FORCE: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeTag {
    pub slot: u64,
    pub label: ClassLabel,
    pub source: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    JudgeTags,
    BestMappingOracle,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::JudgeTags => "judge_tags",
            Provenance::BestMappingOracle => "best_mapping_oracle",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JudgeMode {
    /// Every class is tagged.
    Full,
    /// Only correct practice is tagged; other clusters are anonymous violations.
    CorrectOnly,
}

impl std::str::FromStr for JudgeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(JudgeMode::Full),
            "correct-only" => Ok(JudgeMode::CorrectOnly),
            other => Err(Error::Config(format!("unknown judge mode `{other}`"))),
        }
    }
}

/// Label of every cluster, indexed by cluster id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterLabelMap {
    pub labels: Vec<ClassLabel>,
    pub provenance: Provenance,
    /// Clusters labelled by elimination rather than by a tag.
    pub anonymous: Vec<usize>,
    /// Tags that contributed to the map.
    pub tags_used: usize,
}

impl ClusterLabelMap {
    pub fn label(&self, cluster: usize) -> ClassLabel {
        self.labels[cluster]
    }

    pub fn apply(&self, assignments: &[usize]) -> Vec<ClassLabel> {
        assignments.iter().map(|&c| self.labels[c]).collect()
    }
}

/// Cluster × class count matrix.
pub fn confusion(
    assignments: &[usize],
    truth: &[ClassLabel],
    n_clusters: usize,
    n_classes: usize,
) -> Vec<Vec<u64>> {
    let mut m = vec![vec![0; n_classes]; n_clusters];
    for (&c, t) in assignments.iter().zip(truth) {
        if c < n_clusters && t.index() < n_classes {
            m[c][t.index()] += 1;
        }
    }
    m
}

/// Exhaustive search for the cluster→class bijection with the most hits.
/// Permutations are visited in lexicographic order and the first maximum
/// wins. Returns the map and its accuracy.
pub fn best_mapping(confusion: &[Vec<u64>]) -> Result<(ClusterLabelMap, f64)> {
    let k = confusion.len();
    if k == 0 || confusion.iter().any(|row| row.len() != k) {
        return Err(Error::Dimension(format!(
            "cluster×class matrix must be square and non-empty, got {k} rows of widths {:?}",
            confusion.iter().map(Vec::len).collect::<Vec<_>>()
        )));
    }
    if k > MAX_BRUTE_FORCE {
        return Err(Error::Dimension(format!(
            "{k} clusters exceed the exhaustive-search limit of {MAX_BRUTE_FORCE}"
        )));
    }
    let total: u64 = confusion.iter().flatten().sum();
    let mut best: Option<(u64, Vec<usize>)> = None;
    for perm in (0..k).permutations(k) {
        let hits: u64 = perm.iter().enumerate().map(|(c, &y)| confusion[c][y]).sum();
        if best.as_ref().is_none_or(|(b, _)| hits > *b) {
            best = Some((hits, perm));
        }
    }
    let (hits, perm) = best.unwrap();
    let accuracy = if total == 0 {
        0.0
    } else {
        hits as f64 / total as f64
    };
    Ok((
        ClusterLabelMap {
            labels: perm.into_iter().map(|y| ClassLabel(y as u8)).collect(),
            provenance: Provenance::BestMappingOracle,
            anonymous: Vec::new(),
            tags_used: 0,
        },
        accuracy,
    ))
}

/// Cluster of the latest assignment at or before `slot`. Tags placed before
/// the first assignment cannot be attributed and resolve to `None`.
pub fn cluster_at(assignments: &BTreeMap<u64, usize>, slot: u64) -> Option<usize> {
    assignments.range(..=slot).next_back().map(|(_, &c)| c)
}

/// Labels each cluster from the tags that land in it.
///
/// In full mode a cluster takes the majority label of its tags (ties go to
/// the label tagged first); every cluster must be tagged. In correct-only
/// mode the cluster holding most `c0` tags becomes `c0` and the others take
/// the remaining labels in cluster-id order, marked anonymous.
pub fn expand_tags(
    assignments: &BTreeMap<u64, usize>,
    tags: &[JudgeTag],
    n_clusters: usize,
    mode: JudgeMode,
) -> Result<ClusterLabelMap> {
    // per cluster: label → (count, first tag index)
    let mut votes: Vec<BTreeMap<ClassLabel, (usize, usize)>> = vec![BTreeMap::new(); n_clusters];
    let mut used = 0;
    for (i, tag) in tags.iter().enumerate() {
        if mode == JudgeMode::CorrectOnly && tag.label != ClassLabel(0) {
            continue;
        }
        let Some(c) = cluster_at(assignments, tag.slot) else {
            continue;
        };
        if c >= n_clusters {
            continue;
        }
        used += 1;
        let e = votes[c].entry(tag.label).or_insert((0, i));
        e.0 += 1;
    }
    let winner = |v: &BTreeMap<ClassLabel, (usize, usize)>| {
        v.iter()
            .max_by(|a, b| a.1 .0.cmp(&b.1 .0).then(b.1 .1.cmp(&a.1 .1)))
            .map(|(l, _)| *l)
    };

    match mode {
        JudgeMode::Full => {
            let untagged: Vec<usize> = (0..n_clusters).filter(|&c| votes[c].is_empty()).collect();
            if !untagged.is_empty() {
                return Err(Error::Coverage { clusters: untagged });
            }
            Ok(ClusterLabelMap {
                labels: votes.iter().map(|v| winner(v).unwrap()).collect(),
                provenance: Provenance::JudgeTags,
                anonymous: Vec::new(),
                tags_used: used,
            })
        }
        JudgeMode::CorrectOnly => {
            let correct = (0..n_clusters)
                .filter_map(|c| {
                    votes[c]
                        .get(&ClassLabel(0))
                        .map(|&(n, first)| (c, n, first))
                })
                .max_by(|a, b| a.1.cmp(&b.1).then(b.2.cmp(&a.2)))
                .map(|(c, _, _)| c)
                .ok_or_else(|| Error::Coverage {
                    clusters: (0..n_clusters).collect(),
                })?;
            let mut next = 1u8;
            let mut labels = Vec::with_capacity(n_clusters);
            let mut anonymous = Vec::new();
            for c in 0..n_clusters {
                if c == correct {
                    labels.push(ClassLabel(0));
                } else {
                    labels.push(ClassLabel(next));
                    anonymous.push(c);
                    next += 1;
                }
            }
            Ok(ClusterLabelMap {
                labels,
                provenance: Provenance::JudgeTags,
                anonymous,
                tags_used: used,
            })
        }
    }
}

/// Simulated judge: `per_class` tags per class at random slots of that class.
/// With probability `noise` a tag carries a different, random label.
pub fn simulate_tags(
    slots: &[(u64, ClassLabel)],
    n_classes: usize,
    per_class: usize,
    noise: f64,
    seed: u64,
) -> Vec<JudgeTag> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7a6f_7461_6773);
    let mut tags = Vec::new();
    for c in 0..n_classes {
        let pool: Vec<u64> = slots
            .iter()
            .filter(|(_, l)| l.index() == c)
            .map(|(n, _)| *n)
            .collect();
        let chosen: Vec<u64> = pool.choose_multiple(&mut rng, per_class).copied().collect();
        for slot in chosen {
            let mut label = ClassLabel(c as u8);
            if noise > 0.0 && n_classes > 1 && rng.random::<f64>() < noise {
                let shift = rng.random_range(1..n_classes);
                label = ClassLabel(((c + shift) % n_classes) as u8);
            }
            tags.push(JudgeTag {
                slot,
                label,
                source: "simulated-judge".into(),
            });
        }
    }
    tags.sort_by_key(|t| t.slot);
    tags
}

#[derive(Debug, Serialize, Deserialize)]
struct TagRecord {
    slot: u64,
    label: String,
    source: String,
}

/// Reads `slot,label,source` lines; a header line is optional.
pub fn read_tags<R: Read>(reader: R) -> Result<Vec<JudgeTag>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut tags = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 1;
        let record = record.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        if i == 0 && record.get(0) == Some("slot") {
            continue;
        }
        if record.len() != 3 {
            return Err(Error::Parse {
                line,
                message: format!("expected slot,label,source, found {} fields", record.len()),
            });
        }
        let slot = record[0].parse().map_err(|_| Error::Parse {
            line,
            message: format!("`{}` is not a slot index", &record[0]),
        })?;
        let label = record[1].parse().map_err(|e: Error| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        tags.push(JudgeTag {
            slot,
            label,
            source: record[2].to_string(),
        });
    }
    Ok(tags)
}

pub fn write_tags<W: Write>(writer: W, tags: &[JudgeTag]) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(writer);
    for t in tags {
        wtr.serialize(TagRecord {
            slot: t.slot,
            label: t.label.to_string(),
            source: t.source.clone(),
        })
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    }
    wtr.flush()?;
    Ok(())
}
