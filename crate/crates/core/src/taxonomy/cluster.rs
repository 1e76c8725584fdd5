//! Agglomerative clustering with Ward linkage on Euclidean distances.
//!
//! Merge heights follow the Lance–Williams recurrence for Ward's method,
//! giving the same heights as the usual `linkage(method="ward")` convention
//! (the Euclidean distance for singletons, √(2·ΔSSE) in general). Cluster
//! ids follow the stepwise-dendrogram convention: leaves are `0..n`, the
//! cluster formed by merge `m` is `n + m`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::taxonomy::{Category, MetricRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
    pub size: usize,
}

/// Ward linkage over `points`. Among equal distances the pair that comes
/// first in record order wins.
pub fn ward_linkage(points: &[Vec<f64>]) -> Vec<Merge> {
    let n = points.len();
    let mut dist = vec![vec![0.0_f64; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let d = points[i]
                .iter()
                .zip(&points[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            dist[i][j] = d;
            dist[j][i] = d;
        }
    }
    // Cluster held in slot i lives at the lowest record index it contains.
    let mut active = vec![true; n];
    let mut size = vec![1usize; n];
    let mut id: Vec<usize> = (0..n).collect();
    let mut merges = Vec::with_capacity(n.saturating_sub(1));

    for step in 0..n.saturating_sub(1) {
        let mut best = (f64::INFINITY, 0, 0);
        for i in (0..n).filter(|&i| active[i]) {
            for j in (i + 1..n).filter(|&j| active[j]) {
                if dist[i][j] < best.0 {
                    best = (dist[i][j], i, j);
                }
            }
        }
        let (height, a, b) = best;
        let (sa, sb) = (size[a] as f64, size[b] as f64);
        for m in (0..n).filter(|&m| active[m] && m != a && m != b) {
            let sm = size[m] as f64;
            let d2 = ((sm + sa) * dist[a][m].powi(2) + (sm + sb) * dist[b][m].powi(2)
                - sm * height * height)
                / (sm + sa + sb);
            let d = d2.max(0.0).sqrt();
            dist[a][m] = d;
            dist[m][a] = d;
        }
        active[b] = false;
        size[a] += size[b];
        merges.push(Merge {
            left: id[a].min(id[b]),
            right: id[a].max(id[b]),
            height,
            size: size[a],
        });
        id[a] = n + step;
    }
    merges
}

/// Flat labels for `k` clusters: apply all but the last `k − 1` merges.
/// Labels run 1..=k in order of first appearance among the leaves.
pub fn cut_tree(n: usize, merges: &[Merge], k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > n {
        return Err(Error::validation(format!(
            "cannot cut {n} observations into {k} clusters"
        )));
    }
    if merges.len() + 1 != n {
        return Err(Error::validation("merge list does not span the leaves"));
    }
    let mut parent: Vec<usize> = (0..2 * n - 1).collect();
    fn root(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (m, merge) in merges.iter().take(n - k).enumerate() {
        if merge.left >= n + m || merge.right >= n + m {
            return Err(Error::validation(format!("merge {m} references a later cluster")));
        }
        for child in [merge.left, merge.right] {
            let r = root(&mut parent, child);
            parent[r] = n + m;
        }
    }
    let mut label_of_root = std::collections::HashMap::new();
    Ok((0..n)
        .map(|leaf| {
            let r = root(&mut parent, leaf);
            let next = label_of_root.len() + 1;
            *label_of_root.entry(r).or_insert(next)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringResult {
    pub features: Vec<Category>,
    /// Leaf names in record order.
    pub leaves: Vec<String>,
    pub merges: Vec<Merge>,
    pub k: usize,
    /// Flat cluster label (1..=k) per leaf.
    pub labels: Vec<usize>,
}

pub fn ward_clustering(
    records: &[MetricRecord],
    features: &[Category],
    k: usize,
) -> Result<ClusteringResult> {
    if k == 0 || k > records.len() {
        return Err(Error::validation(format!(
            "k = {k} invalid for {} records",
            records.len()
        )));
    }
    let points: Vec<Vec<f64>> = records
        .iter()
        .map(|r| features.iter().map(|&c| r.value(c)).collect())
        .collect();
    let merges = ward_linkage(&points);
    let labels = cut_tree(records.len(), &merges, k)?;
    Ok(ClusteringResult {
        features: features.to_vec(),
        leaves: records
            .iter()
            .map(|r| format!("{} ({})", r.metric, r.citation))
            .collect(),
        merges,
        k,
        labels,
    })
}

impl ClusteringResult {
    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("clustering serializes");
        out.push('\n');
        out
    }

    /// Parse an exported tree and recompute its flat labels from the merges.
    pub fn from_json(text: &str) -> Result<Self> {
        let mut result: ClusteringResult =
            serde_json::from_str(text).map_err(|e| Error::parse("dendrogram JSON", e))?;
        let labels = cut_tree(result.leaves.len(), &result.merges, result.k)?;
        if labels != result.labels {
            return Err(Error::validation(
                "stored labels disagree with the merge tree",
            ));
        }
        result.labels = labels;
        Ok(result)
    }

    /// Indented plain-text tree, leaves annotated with their flat label.
    pub fn render_text(&self) -> String {
        let n = self.leaves.len();
        let mut out = String::new();
        if n == 0 {
            return out;
        }
        let root = if self.merges.is_empty() { 0 } else { n + self.merges.len() - 1 };
        let mut stack = vec![(root, String::new(), true, true)];
        while let Some((node, prefix, last, is_root)) = stack.pop() {
            let branch = match (is_root, last) {
                (true, _) => "",
                (false, true) => "└── ",
                (false, false) => "├── ",
            };
            if node < n {
                writeln!(out, "{prefix}{branch}{} [CL{}]", self.leaves[node], self.labels[node])
                    .expect("string write");
                continue;
            }
            let merge = &self.merges[node - n];
            writeln!(out, "{prefix}{branch}h={:.4} (n={})", merge.height, merge.size)
                .expect("string write");
            let child_prefix = match (is_root, last) {
                (true, _) => prefix.clone(),
                (false, true) => format!("{prefix}    "),
                (false, false) => format!("{prefix}│   "),
            };
            stack.push((merge.right, child_prefix.clone(), true, false));
            stack.push((merge.left, child_prefix, false, false));
        }
        out
    }

    /// Write the JSON tree and, if requested, the text render.
    pub fn export(&self, json_path: impl AsRef<Path>, text_path: Option<&Path>) -> Result<()> {
        let json_path = json_path.as_ref();
        fs::write(json_path, self.to_json()).map_err(|e| Error::io(json_path, e))?;
        if let Some(p) = text_path {
            fs::write(p, self.render_text()).map_err(|e| Error::io(p, e))?;
        }
        Ok(())
    }
}

/// Agreement between two labelings under the best one-to-one matching of
/// their labels.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartitionAgreement {
    pub matched: usize,
    pub total: usize,
    /// Indices where the labels disagree under the best matching.
    pub mismatches: Vec<usize>,
}

impl PartitionAgreement {
    pub fn fraction(&self) -> f64 {
        self.matched as f64 / self.total as f64
    }
}

fn compact(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut map = std::collections::HashMap::new();
    let out = labels
        .iter()
        .map(|l| {
            let next = map.len();
            *map.entry(*l).or_insert(next)
        })
        .collect();
    (out, map.len())
}

/// Best bijection between label sets, by dynamic programming over subsets
/// of the second labeling's labels. Exact for up to 20 distinct labels.
pub fn partition_agreement(a: &[usize], b: &[usize]) -> Result<PartitionAgreement> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::validation("labelings must be non-empty and equal length"));
    }
    let (a, ka) = compact(a);
    let (b, kb) = compact(b);
    if ka.max(kb) > 20 {
        return Err(Error::validation("too many labels for exact matching"));
    }
    let mut table = vec![vec![0usize; kb]; ka];
    for (&x, &y) in a.iter().zip(&b) {
        table[x][y] += 1;
    }
    // best[i][mask]: max matches assigning labels 0..i of `a` into `mask` of `b`.
    let full = 1usize << kb;
    let mut best = vec![vec![None::<usize>; full]; ka + 1];
    best[0][0] = Some(0);
    for i in 0..ka {
        for mask in 0..full {
            let Some(v) = best[i][mask] else { continue };
            // leave label i unmatched
            let keep = &mut best[i + 1][mask];
            *keep = Some(keep.map_or(v, |k| k.max(v)));
            for j in (0..kb).filter(|j| mask & (1 << j) == 0) {
                let slot = &mut best[i + 1][mask | (1 << j)];
                let cand = v + table[i][j];
                *slot = Some(slot.map_or(cand, |s| s.max(cand)));
            }
        }
    }
    let matched = best[ka].iter().flatten().copied().max().unwrap_or(0);

    // Recover one optimal assignment.
    let mut assign = vec![None; ka];
    let mut mask = (0..full)
        .filter(|&m| best[ka][m] == Some(matched))
        .min()
        .expect("optimum reachable");
    for i in (0..ka).rev() {
        let target = best[i + 1][mask].expect("on optimal path");
        if best[i][mask] == Some(target) {
            continue;
        }
        let j = (0..kb)
            .find(|&j| {
                mask & (1 << j) != 0
                    && best[i][mask ^ (1 << j)].map(|v| v + table[i][j]) == Some(target)
            })
            .expect("predecessor exists");
        assign[i] = Some(j);
        mask ^= 1 << j;
    }
    let mismatches = a
        .iter()
        .zip(&b)
        .enumerate()
        .filter(|(_, (&x, &y))| assign[x] != Some(y))
        .map(|(i, _)| i)
        .collect();
    Ok(PartitionAgreement {
        matched,
        total: a.len(),
        mismatches,
    })
}

/// Adjusted Rand index between two labelings.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::validation("labelings must have equal length >= 2"));
    }
    let (a, ka) = compact(a);
    let (b, kb) = compact(b);
    let mut table = vec![vec![0u64; kb]; ka];
    for (&x, &y) in a.iter().zip(&b) {
        table[x][y] += 1;
    }
    let pairs = |n: u64| (n * n.saturating_sub(1) / 2) as f64;
    let index: f64 = table.iter().flatten().map(|&n| pairs(n)).sum();
    let rows: f64 = table.iter().map(|r| pairs(r.iter().sum())).sum();
    let cols: f64 = (0..kb)
        .map(|j| pairs(table.iter().map(|r| r[j]).sum()))
        .sum();
    let total = pairs(a.len() as u64);
    let expected = rows * cols / total;
    let max = 0.5 * (rows + cols);
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}
