//! Pairwise ranking meta-model: training instances assembled from graph
//! embeddings and algorithm ranks, fit by gradient-boosted regression
//! trees on RankNet-style pairwise logistic gradients.
//!
//! Within each dataset group, every ordered pair with a relevance gap
//! contributes a logistic gradient; a least-squares regression tree is
//! fit to the per-instance gradient sums each round and added with
//! shrinkage. Instances are canonically sorted before fitting, so the
//! model is invariant to input order. The serialized form is a
//! structured text document with bit-exact hex floats.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::gcn::GraphEmbedding;
use crate::perf::PerformanceTable;
use crate::seeding::ConfigHasher;
use crate::zoo::AlgorithmId;

#[derive(Debug, Error)]
pub enum RankerError {
    #[error("no embedding for dataset {0:?}")]
    MissingEmbedding(String),
    #[error("training set needs >= 2 groups and at least one orderable pair")]
    DegenerateGroups,
    #[error("feature vector has {got} entries, model expects {want}")]
    DimensionMismatch { got: usize, want: usize },
    #[error("malformed ranker model: {0}")]
    Codec(String),
}

/// One (dataset, algorithm) training row.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaInstance {
    /// Graph embedding followed by the algorithm ordinal as one discrete
    /// feature.
    pub features: Vec<f64>,
    /// Higher is better: |A| - R + 1 from the fractional rank R.
    pub relevance: f64,
    pub group: String,
    pub algorithm: AlgorithmId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankerConfig {
    pub trees: usize,
    pub depth: usize,
    pub shrinkage: f64,
    pub seed: u64,
}

impl Default for RankerConfig {
    fn default() -> Self {
        RankerConfig {
            trees: 200,
            depth: 4,
            shrinkage: 0.1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn score(&self, features: &[f64]) -> f64 {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if features[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }
}

/// A trained boosted-tree ranking model; immutable after training.
#[derive(Debug, Clone, PartialEq)]
pub struct RankerModel {
    pub config: RankerConfig,
    pub feature_count: usize,
    pub trees: Vec<Tree>,
    pub config_hash: String,
}

/// An ordered recommendation, best first, with predicted scores.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedRecommendation {
    pub dataset: String,
    pub measure: String,
    pub ranking: Vec<(AlgorithmId, f64)>,
}

/// Builds the |D| x |A| training set: every dataset's embedding paired
/// with every algorithm ordinal, labeled with the relevance
/// |A| - R + 1.
pub fn assemble_training_set(
    embeddings: &[GraphEmbedding],
    table: &PerformanceTable,
    algorithms: &[AlgorithmId],
) -> Result<Vec<MetaInstance>, RankerError> {
    let mut instances = Vec::with_capacity(table.datasets.len() * algorithms.len());
    for (d, dataset) in table.datasets.iter().enumerate() {
        let embedding = embeddings
            .iter()
            .find(|e| &e.dataset == dataset)
            .ok_or_else(|| RankerError::MissingEmbedding(dataset.clone()))?;
        for algo in algorithms {
            let a = table
                .algorithms
                .iter()
                .position(|x| x == algo)
                .ok_or_else(|| RankerError::MissingEmbedding(format!("algorithm {}", algo.name())))?;
            let mut features = embedding.vector.clone();
            features.push(algo.ordinal() as f64);
            instances.push(MetaInstance {
                features,
                relevance: algorithms.len() as f64 - table.ranks[a][d] + 1.0,
                group: dataset.clone(),
                algorithm: *algo,
            });
        }
    }
    Ok(instances)
}

/// Per-instance pairwise logistic gradients, computed within groups.
///
/// For every ordered pair (i, j) in the same group with
/// `relevance_i > relevance_j`, the pair contributes
/// `p = 1/(1+exp(s_i - s_j))` to instance i and `-p` to instance j.
/// Exposed so leakage audits can verify group isolation directly.
pub fn pairwise_gradients(instances: &[MetaInstance], scores: &[f64]) -> Vec<f64> {
    let mut grads = vec![0.0; instances.len()];
    let mut start = 0usize;
    while start < instances.len() {
        let group = &instances[start].group;
        let mut end = start;
        while end < instances.len() && &instances[end].group == group {
            end += 1;
        }
        for i in start..end {
            for j in start..end {
                if instances[i].relevance > instances[j].relevance {
                    let p = 1.0 / (1.0 + (scores[i] - scores[j]).exp());
                    grads[i] += p;
                    grads[j] -= p;
                }
            }
        }
        start = end;
    }
    grads
}

/// Fits the boosted ensemble. Instances are sorted by (group, ordinal)
/// first, so any input permutation yields an identical model.
pub fn train_ranker(
    instances: &[MetaInstance],
    config: &RankerConfig,
) -> Result<RankerModel, RankerError> {
    let mut sorted: Vec<MetaInstance> = instances.to_vec();
    sorted.sort_by(|a, b| {
        a.group
            .cmp(&b.group)
            .then(a.algorithm.ordinal().cmp(&b.algorithm.ordinal()))
    });

    let groups: BTreeSet<&str> = sorted.iter().map(|i| i.group.as_str()).collect();
    let has_pair = {
        let mut found = false;
        let mut start = 0usize;
        while start < sorted.len() {
            let group = &sorted[start].group;
            let mut end = start;
            while end < sorted.len() && &sorted[end].group == group {
                end += 1;
            }
            let distinct: BTreeSet<u64> = sorted[start..end]
                .iter()
                .map(|i| i.relevance.to_bits())
                .collect();
            if distinct.len() >= 2 {
                found = true;
            }
            start = end;
        }
        found
    };
    if groups.len() < 2 || !has_pair {
        return Err(RankerError::DegenerateGroups);
    }
    let feature_count = sorted[0].features.len();
    for inst in &sorted {
        if inst.features.len() != feature_count {
            return Err(RankerError::DimensionMismatch {
                got: inst.features.len(),
                want: feature_count,
            });
        }
    }

    let mut scores = vec![0.0f64; sorted.len()];
    let mut trees = Vec::with_capacity(config.trees);
    for _round in 0..config.trees {
        let grads = pairwise_gradients(&sorted, &scores);
        let tree = fit_tree(&sorted, &grads, config.depth);
        for (i, inst) in sorted.iter().enumerate() {
            scores[i] += config.shrinkage * tree.score(&inst.features);
        }
        trees.push(tree);
    }

    let mut hasher = ConfigHasher::new();
    hasher
        .push("trees", config.trees)
        .push("depth", config.depth)
        .push("shrinkage", format!("{:?}", config.shrinkage))
        .push("seed", config.seed)
        .push("feature_count", feature_count);
    Ok(RankerModel {
        config: config.clone(),
        feature_count,
        trees,
        config_hash: hasher.finish(),
    })
}

/// Greedy least-squares regression tree on the gradient targets.
fn fit_tree(instances: &[MetaInstance], targets: &[f64], max_depth: usize) -> Tree {
    let mut nodes = Vec::new();
    let all: Vec<usize> = (0..instances.len()).collect();
    build_node(instances, targets, &all, max_depth, &mut nodes);
    Tree { nodes }
}

fn build_node(
    instances: &[MetaInstance],
    targets: &[f64],
    samples: &[usize],
    depth_left: usize,
    nodes: &mut Vec<TreeNode>,
) -> usize {
    let sum: f64 = samples.iter().map(|&i| targets[i]).sum();
    let mean = sum / samples.len() as f64;

    let split = if depth_left == 0 || samples.len() < 2 {
        None
    } else {
        best_split(instances, targets, samples)
    };

    match split {
        None => {
            nodes.push(TreeNode::Leaf { value: mean });
            nodes.len() - 1
        }
        Some((feature, threshold)) => {
            let (left_samples, right_samples): (Vec<usize>, Vec<usize>) = samples
                .iter()
                .partition(|&&i| instances[i].features[feature] <= threshold);
            let id = nodes.len();
            nodes.push(TreeNode::Leaf { value: mean }); // placeholder
            let left = build_node(instances, targets, &left_samples, depth_left - 1, nodes);
            let right = build_node(instances, targets, &right_samples, depth_left - 1, nodes);
            nodes[id] = TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            };
            id
        }
    }
}

/// Exact split search: maximal variance reduction; ties resolve to the
/// lowest feature index, then the lowest threshold.
fn best_split(
    instances: &[MetaInstance],
    targets: &[f64],
    samples: &[usize],
) -> Option<(usize, f64)> {
    let n = samples.len() as f64;
    let total: f64 = samples.iter().map(|&i| targets[i]).sum();
    let base = total * total / n;
    let feature_count = instances[samples[0]].features.len();

    let mut best: Option<(f64, usize, f64)> = None; // (gain, feature, threshold)
    let mut order: Vec<usize> = samples.to_vec();
    for feature in 0..feature_count {
        order.sort_by(|&a, &b| {
            instances[a].features[feature]
                .partial_cmp(&instances[b].features[feature])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        let mut left_sum = 0.0;
        let mut left_cnt = 0.0;
        for w in 0..order.len() - 1 {
            left_sum += targets[order[w]];
            left_cnt += 1.0;
            let x_here = instances[order[w]].features[feature];
            let x_next = instances[order[w + 1]].features[feature];
            if x_here == x_next {
                continue;
            }
            let right_sum = total - left_sum;
            let right_cnt = n - left_cnt;
            let gain = left_sum * left_sum / left_cnt + right_sum * right_sum / right_cnt - base;
            if gain <= 1e-12 {
                continue;
            }
            let threshold = 0.5 * (x_here + x_next);
            let replace = match best {
                None => true,
                Some((g, f, t)) => {
                    gain > g + 1e-12
                        || ((gain - g).abs() <= 1e-12 && (feature, threshold) < (f, t))
                }
            };
            if replace {
                best = Some((gain, feature, threshold));
            }
        }
    }
    best.map(|(_, f, t)| (f, t))
}

impl RankerModel {
    pub fn score(&self, features: &[f64]) -> Result<f64, RankerError> {
        if features.len() != self.feature_count {
            return Err(RankerError::DimensionMismatch {
                got: features.len(),
                want: self.feature_count,
            });
        }
        Ok(self
            .trees
            .iter()
            .map(|t| self.config.shrinkage * t.score(features))
            .sum())
    }

    /// Every feature index used by any split; leakage audits check that
    /// canary features never appear here.
    pub fn features_used(&self) -> BTreeSet<usize> {
        let mut used = BTreeSet::new();
        for tree in &self.trees {
            for node in &tree.nodes {
                if let TreeNode::Split { feature, .. } = node {
                    used.insert(*feature);
                }
            }
        }
        used
    }
}

/// Scores every algorithm for one embedding and sorts best-first; equal
/// scores resolve to the lower ordinal.
pub fn recommend(
    model: &RankerModel,
    embedding: &GraphEmbedding,
    algorithms: &[AlgorithmId],
) -> Result<RankedRecommendation, RankerError> {
    let mut ranking = Vec::with_capacity(algorithms.len());
    for algo in algorithms {
        let mut features = embedding.vector.clone();
        features.push(algo.ordinal() as f64);
        ranking.push((*algo, model.score(&features)?));
    }
    ranking.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.0.ordinal().cmp(&b.0.ordinal()))
    });
    Ok(RankedRecommendation {
        dataset: embedding.dataset.clone(),
        measure: embedding.measure.clone(),
        ranking,
    })
}

fn f64_to_hex(v: f64) -> String {
    format!("{:016x}", v.to_bits())
}

fn f64_from_hex(s: &str) -> Result<f64, RankerError> {
    let bits = u64::from_str_radix(s, 16).map_err(|_| RankerError::Codec("bad hex float".into()))?;
    Ok(f64::from_bits(bits))
}

impl RankerModel {
    /// Structured text serialization; floats as hex bit patterns, so the
    /// round trip is bit-exact.
    pub fn encode(&self) -> String {
        let mut out = String::from("clustrec-ranker v1\n");
        out.push_str(&format!("trees={}\n", self.config.trees));
        out.push_str(&format!("depth={}\n", self.config.depth));
        out.push_str(&format!("shrinkage={}\n", f64_to_hex(self.config.shrinkage)));
        out.push_str(&format!("seed={}\n", self.config.seed));
        out.push_str(&format!("feature_count={}\n", self.feature_count));
        out.push_str(&format!("config_hash={}\n", self.config_hash));
        for tree in &self.trees {
            out.push_str(&format!("tree nodes={}\n", tree.nodes.len()));
            for node in &tree.nodes {
                match node {
                    TreeNode::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    } => out.push_str(&format!(
                        "S {} {} {} {}\n",
                        feature,
                        f64_to_hex(*threshold),
                        left,
                        right
                    )),
                    TreeNode::Leaf { value } => {
                        out.push_str(&format!("L {}\n", f64_to_hex(*value)))
                    }
                }
            }
        }
        out.push_str("end\n");
        out
    }

    pub fn decode(text: &str) -> Result<RankerModel, RankerError> {
        let bad = |m: &str| RankerError::Codec(m.to_string());
        let mut lines = text.lines();
        if lines.next() != Some("clustrec-ranker v1") {
            return Err(bad("missing magic line"));
        }
        let mut header = std::collections::BTreeMap::new();
        let mut trees = Vec::new();
        let mut pending_nodes: Option<(usize, Vec<TreeNode>)> = None;
        let mut saw_end = false;

        for line in lines.by_ref() {
            if let Some(rest) = line.strip_prefix("tree nodes=") {
                if let Some((want, nodes)) = pending_nodes.take() {
                    if nodes.len() != want {
                        return Err(bad("tree node count mismatch"));
                    }
                    trees.push(Tree { nodes });
                }
                let want: usize = rest.parse().map_err(|_| bad("bad node count"))?;
                if want == 0 || want > 1 << 22 {
                    return Err(bad("implausible node count"));
                }
                pending_nodes = Some((want, Vec::new()));
            } else if let Some(rest) = line.strip_prefix("S ") {
                let (_, nodes) = pending_nodes.as_mut().ok_or_else(|| bad("node before tree"))?;
                let mut fields = rest.split(' ');
                let feature: usize = fields
                    .next()
                    .ok_or_else(|| bad("split missing feature"))?
                    .parse()
                    .map_err(|_| bad("bad split feature"))?;
                let threshold = f64_from_hex(fields.next().ok_or_else(|| bad("split missing threshold"))?)?;
                let left: usize = fields
                    .next()
                    .ok_or_else(|| bad("split missing left"))?
                    .parse()
                    .map_err(|_| bad("bad left"))?;
                let right: usize = fields
                    .next()
                    .ok_or_else(|| bad("split missing right"))?
                    .parse()
                    .map_err(|_| bad("bad right"))?;
                nodes.push(TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                });
            } else if let Some(rest) = line.strip_prefix("L ") {
                let (_, nodes) = pending_nodes.as_mut().ok_or_else(|| bad("node before tree"))?;
                nodes.push(TreeNode::Leaf {
                    value: f64_from_hex(rest)?,
                });
            } else if line == "end" {
                saw_end = true;
                break;
            } else if let Some((k, v)) = line.split_once('=') {
                header.insert(k.to_string(), v.to_string());
            } else if !line.is_empty() {
                return Err(bad("unrecognized line"));
            }
        }
        if !saw_end {
            return Err(bad("missing end marker"));
        }
        if let Some((want, nodes)) = pending_nodes.take() {
            if nodes.len() != want {
                return Err(bad("tree node count mismatch"));
            }
            trees.push(Tree { nodes });
        }

        let get = |k: &str| header.get(k).ok_or_else(|| bad("missing header key"));
        let config = RankerConfig {
            trees: get("trees")?.parse().map_err(|_| bad("bad trees"))?,
            depth: get("depth")?.parse().map_err(|_| bad("bad depth"))?,
            shrinkage: f64_from_hex(get("shrinkage")?)?,
            seed: get("seed")?.parse().map_err(|_| bad("bad seed"))?,
        };
        let feature_count: usize = get("feature_count")?
            .parse()
            .map_err(|_| bad("bad feature_count"))?;
        let config_hash = get("config_hash")?.to_string();
        if trees.len() != config.trees {
            return Err(bad("tree count mismatch"));
        }
        let model = RankerModel {
            config,
            feature_count,
            trees,
            config_hash,
        };
        model.validate_topology()?;
        Ok(model)
    }

    /// Checks that every split's children are in range and form a proper
    /// tree (no cycles), and that feature indices fit feature_count.
    fn validate_topology(&self) -> Result<(), RankerError> {
        let bad = |m: &str| RankerError::Codec(m.to_string());
        for tree in &self.trees {
            let n = tree.nodes.len();
            let mut seen = vec![false; n];
            let mut stack = vec![0usize];
            while let Some(at) = stack.pop() {
                if at >= n {
                    return Err(bad("child index out of range"));
                }
                if seen[at] {
                    return Err(bad("node visited twice"));
                }
                seen[at] = true;
                if let TreeNode::Split {
                    feature,
                    left,
                    right,
                    ..
                } = &tree.nodes[at]
                {
                    if *feature >= self.feature_count {
                        return Err(bad("split feature out of range"));
                    }
                    stack.push(*left);
                    stack.push(*right);
                }
            }
            if seen.iter().any(|&s| !s) {
                return Err(bad("unreachable node"));
            }
        }
        Ok(())
    }
}
