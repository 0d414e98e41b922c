//! Weak randomness: explicit distributions, min-entropy, Santha–Vazirani
//! checks and the tree form of a `2n`-bit source used by the attack analysis.
//!
//! Bit strings are stored as integers with the first emitted bit in the most
//! significant position, so sorting by value is sorting lexicographically and
//! every prefix selects a contiguous run of entries.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::PairLabel;

/// Largest explicit table, in bits.
pub const ENUMERATION_CAP: usize = 24;
/// Tolerance for "sums to one" checks on explicit tables.
pub const NORM_TOLERANCE: f64 = 1e-12;
/// Symmetric tolerance for entropy threshold comparisons.
pub const ENTROPY_TOLERANCE: f64 = 1e-9;

/// Explicit probability table over `n_bits`-bit strings (sparse; only
/// positive entries are stored).
#[derive(Clone, Debug, PartialEq)]
pub struct CondDistribution {
    n_bits: usize,
    entries: Vec<(u64, f64)>,
    label: Option<String>,
}

impl CondDistribution {
    pub fn new(n_bits: usize, entries: impl IntoIterator<Item = (u64, f64)>) -> Result<Self> {
        Self::with_cap(n_bits, entries, ENUMERATION_CAP)
    }

    /// Like [`CondDistribution::new`] with a caller-chosen enumeration cap
    /// (at most 63 bits).
    pub fn with_cap(
        n_bits: usize,
        entries: impl IntoIterator<Item = (u64, f64)>,
        cap: usize,
    ) -> Result<Self> {
        let cap = cap.min(63);
        if n_bits > cap {
            return Err(Error::CapExceeded { bits: n_bits, cap });
        }
        let mut entries: Vec<(u64, f64)> = entries.into_iter().collect();
        entries.sort_unstable_by_key(|e| e.0);
        if entries.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidDistribution("duplicate string".into()));
        }
        for &(x, p) in &entries {
            if x >> n_bits != 0 {
                return Err(Error::InvalidDistribution(format!(
                    "string {x:#b} longer than {n_bits} bits"
                )));
            }
            if !(p >= 0.0 && p.is_finite()) {
                return Err(Error::InvalidDistribution(format!(
                    "negative or non-finite probability {p}"
                )));
            }
        }
        entries.retain(|e| e.1 > 0.0);
        if entries.is_empty() {
            return Err(Error::EmptyDistribution);
        }
        let total = neumaier_sum(entries.iter().map(|e| e.1));
        if (total - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::InvalidDistribution(format!(
                "probabilities sum to {total}"
            )));
        }
        Ok(Self {
            n_bits,
            entries,
            label: None,
        })
    }

    pub fn uniform(n_bits: usize) -> Result<Self> {
        if n_bits > ENUMERATION_CAP {
            return Err(Error::CapExceeded {
                bits: n_bits,
                cap: ENUMERATION_CAP,
            });
        }
        let size = 1u64 << n_bits;
        let p = 1.0 / size as f64;
        Self::new(n_bits, (0..size).map(|x| (x, p)))
    }

    /// Uniform over the given support.
    pub fn flat(n_bits: usize, support: impl IntoIterator<Item = u64>) -> Result<Self> {
        let support: Vec<u64> = support.into_iter().collect();
        if support.is_empty() {
            return Err(Error::EmptyDistribution);
        }
        let p = 1.0 / support.len() as f64;
        Self::new(n_bits, support.into_iter().map(|x| (x, p)))
    }

    pub fn point_mass(n_bits: usize, x: u64) -> Result<Self> {
        Self::new(n_bits, [(x, 1.0)])
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn n_bits(&self) -> usize {
        self.n_bits
    }

    /// Positive-probability entries in lexicographic order.
    pub fn entries(&self) -> &[(u64, f64)] {
        &self.entries
    }

    pub fn support_size(&self) -> usize {
        self.entries.len()
    }

    pub fn prob(&self, x: u64) -> f64 {
        self.entries
            .binary_search_by_key(&x, |e| e.0)
            .map(|i| self.entries[i].1)
            .unwrap_or(0.0)
    }

    pub fn max_prob(&self) -> f64 {
        self.entries.iter().map(|e| e.1).fold(0.0, f64::max)
    }

    pub fn min_entropy(&self) -> f64 {
        -self.max_prob().log2()
    }

    pub fn min_entropy_rate(&self) -> Result<f64> {
        if self.n_bits == 0 {
            return Err(Error::ZeroLength);
        }
        Ok(self.min_entropy() / self.n_bits as f64)
    }

    /// Dense vector of all `2^n_bits` probabilities.
    pub fn dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; 1usize << self.n_bits];
        for &(x, p) in &self.entries {
            out[x as usize] = p;
        }
        out
    }

    /// Entries whose first `len` bits equal `prefix`.
    fn prefix_range(&self, prefix: u64, len: usize) -> &[(u64, f64)] {
        let shift = self.n_bits - len;
        let lo = self.entries.partition_point(|e| (e.0 >> shift) < prefix);
        let hi = self.entries.partition_point(|e| (e.0 >> shift) <= prefix);
        &self.entries[lo..hi]
    }

    /// Checks `1/2 − δ ≤ P(next bit = 0 | prefix) ≤ 1/2 + δ` for every bit
    /// position and every positive-probability prefix.
    pub fn is_sv_source(&self, params: SVParams) -> bool {
        let lo = 0.5 - params.delta - NORM_TOLERANCE;
        let hi = 0.5 + params.delta + NORM_TOLERANCE;
        for pos in 0..self.n_bits {
            let group_shift = self.n_bits - pos;
            let bit_shift = group_shift - 1;
            let mut i = 0;
            while i < self.entries.len() {
                let prefix = self.entries[i].0 >> group_shift;
                let (mut mass, mut zero) = (0.0, 0.0);
                while i < self.entries.len() && self.entries[i].0 >> group_shift == prefix {
                    let (x, p) = self.entries[i];
                    mass += p;
                    if (x >> bit_shift) & 1 == 0 {
                        zero += p;
                    }
                    i += 1;
                }
                let cond = zero / mass;
                if cond < lo || cond > hi {
                    return false;
                }
            }
        }
        true
    }

    /// Converts an even-length table into its pair tree.
    pub fn to_tree(&self) -> Result<SourceTree> {
        if !self.n_bits.is_multiple_of(2) {
            return Err(Error::InvalidTree(format!(
                "{} bits do not split into pairs",
                self.n_bits
            )));
        }
        SourceTree::from_leaves(self.n_bits / 2, self.entries.clone())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&DistributionJson::from(self))?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let raw: DistributionJson = serde_json::from_str(json)?;
        raw.try_into()
    }
}

impl PairSource for CondDistribution {
    fn pair_distribution(&self, prefix: &[PairLabel]) -> Result<[f64; 4]> {
        let len = 2 * prefix.len();
        if !self.n_bits.is_multiple_of(2) || len + 2 > self.n_bits {
            return Err(Error::OutOfRange(format!(
                "no pair {} in a {}-bit source",
                prefix.len() + 1,
                self.n_bits
            )));
        }
        let value = prefix
            .iter()
            .fold(0u64, |acc, l| (acc << 2) | l.value() as u64);
        let shift = self.n_bits - len - 2;
        let mut probs = [0.0; 4];
        for &(x, p) in self.prefix_range(value, len) {
            probs[((x >> shift) & 3) as usize] += p;
        }
        let mass: f64 = probs.iter().sum();
        if mass <= 0.0 {
            return Err(Error::ZeroProbabilityPrefix);
        }
        Ok(probs.map(|p| p / mass))
    }
}

#[derive(Serialize, Deserialize)]
struct DistributionJson {
    n_bits: usize,
    entries: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
}

impl From<&CondDistribution> for DistributionJson {
    fn from(d: &CondDistribution) -> Self {
        let entries = d
            .entries
            .iter()
            .map(|&(x, p)| (bitstring(x, d.n_bits), p))
            .collect();
        Self {
            n_bits: d.n_bits,
            entries,
            label: d.label.clone(),
        }
    }
}

impl TryFrom<DistributionJson> for CondDistribution {
    type Error = Error;

    fn try_from(raw: DistributionJson) -> Result<Self> {
        let mut entries = Vec::with_capacity(raw.entries.len());
        for (key, p) in raw.entries {
            if key.len() != raw.n_bits || !key.bytes().all(|b| b == b'0' || b == b'1') {
                return Err(Error::InvalidDistribution(format!(
                    "key {key:?} is not a {}-bit string",
                    raw.n_bits
                )));
            }
            let x = if key.is_empty() {
                0
            } else {
                u64::from_str_radix(&key, 2).expect("validated bit string")
            };
            entries.push((x, p));
        }
        let d = CondDistribution::new(raw.n_bits, entries)?;
        Ok(match raw.label {
            Some(l) => d.with_label(l),
            None => d,
        })
    }
}

/// Formats the low `n_bits` of `x`, first bit leftmost.
pub fn bitstring(x: u64, n_bits: usize) -> String {
    (0..n_bits)
        .rev()
        .map(|i| if (x >> i) & 1 == 1 { '1' } else { '0' })
        .collect()
}

/// `−log2 max_x P(x)`.
pub fn min_entropy(d: &CondDistribution) -> f64 {
    d.min_entropy()
}

/// Conditional min-entropy of a family `{(P(E=e), P(X|E=e))}`: the
/// weighted guessing probability `Σ_e P(e)·max_x P(x|e)`, then `−log2`.
pub fn conditional_min_entropy(family: &[(f64, &CondDistribution)]) -> Result<f64> {
    if family.is_empty() {
        return Err(Error::EmptyDistribution);
    }
    let total: f64 = family.iter().map(|f| f.0).sum();
    if (total - 1.0).abs() > NORM_TOLERANCE || family.iter().any(|f| f.0 < 0.0) {
        return Err(Error::InvalidDistribution(format!(
            "conditioning weights sum to {total}"
        )));
    }
    let guess: f64 = family.iter().map(|(w, d)| w * d.max_prob()).sum();
    Ok(-guess.log2())
}

pub fn min_entropy_rate(d: &CondDistribution) -> Result<f64> {
    d.min_entropy_rate()
}

/// Santha–Vazirani bias parameter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SVParams {
    delta: f64,
}

impl SVParams {
    pub fn new(delta: f64) -> Result<Self> {
        if !(0.0..=0.5).contains(&delta) {
            return Err(Error::OutOfRange(format!("SV delta {delta} not in [0, 1/2]")));
        }
        Ok(Self { delta })
    }

    pub fn delta(self) -> f64 {
        self.delta
    }
}

/// Rate every δ-SV source is guaranteed: `−log2(1/2 + δ)`.
pub fn sv_min_entropy_rate_bound(params: SVParams) -> f64 {
    -(0.5 + params.delta).log2()
}

pub fn is_sv_source(d: &CondDistribution, params: SVParams) -> bool {
    d.is_sv_source(params)
}

/// Any source that can report the distribution of its next input pair given
/// the pairs already emitted.
pub trait PairSource {
    /// Probabilities of the next pair, indexed by [`PairLabel::value`].
    fn pair_distribution(&self, prefix: &[PairLabel]) -> Result<[f64; 4]>;
}

/// Fresh entropy of the next pair: `−log2 max_kl P(pair = kl | prefix)`.
pub fn fresh_entropy<S: PairSource + ?Sized>(source: &S, prefix: &[PairLabel]) -> Result<f64> {
    let probs = source.pair_distribution(prefix)?;
    Ok(-probs.iter().copied().fold(0.0, f64::max).log2())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RoundType {
    /// All four inputs possible with enough spread that only the honest
    /// quantum strategy wins with certainty.
    Type1,
    /// At most `log2 3` bits of fresh entropy: a classical strategy can be
    /// prepared for the likely inputs.
    Type2,
}

/// `Type1` iff `E > log2 3`; the boundary itself is `Type2`.
pub fn classify_round(fresh_entropy: f64) -> RoundType {
    if fresh_entropy > 3f64.log2() + ENTROPY_TOLERANCE {
        RoundType::Type1
    } else {
        RoundType::Type2
    }
}

/// The flat distribution on the larger preimage of `f` (ties go to the
/// preimage of 0). `f` is constant on the result and its min-entropy is at
/// least `n_bits − 1`.
pub fn adversarial_source_for_function(
    n_bits: usize,
    f: impl Fn(u64) -> bool,
) -> Result<CondDistribution> {
    if n_bits > ENUMERATION_CAP {
        return Err(Error::CapExceeded {
            bits: n_bits,
            cap: ENUMERATION_CAP,
        });
    }
    let (ones, zeros): (Vec<u64>, Vec<u64>) = (0..1u64 << n_bits).partition(|&x| f(x));
    let support = if zeros.len() >= ones.len() { zeros } else { ones };
    CondDistribution::flat(n_bits, support)
}

/// Converts a pair tree to its explicit `2n`-bit table.
pub fn tree_to_distribution(tree: &SourceTree) -> Result<CondDistribution> {
    tree.to_distribution()
}

pub type VertexId = usize;

#[derive(Clone, Copy, Debug, PartialEq)]
struct Vertex {
    parent: u32,
    first_child: u32,
    child_count: u8,
    depth: u8,
    label: PairLabel,
    prob: f64,
    prefix: u64,
}

/// Depth-`n` tree over pair labels; each leaf is one `2n`-bit realization.
///
/// Vertices are stored breadth-first with each vertex's children contiguous
/// and sorted by label, so vertex ids are stable for a given support.
#[derive(Clone, Debug, PartialEq)]
pub struct SourceTree {
    rounds: usize,
    vertices: Vec<Vertex>,
    mass: Vec<f64>,
    level_start: Vec<usize>,
}

/// Nested JSON form: `{"label": "01", "prob": 0.25, "children": [...]}`.
/// The root's label is omitted and its probability is 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NestedVertex {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<PairLabel>,
    #[serde(default = "unit_prob")]
    pub prob: f64,
    #[serde(default)]
    pub children: Vec<NestedVertex>,
}

fn unit_prob() -> f64 {
    1.0
}

const MAX_TREE_ROUNDS: usize = 31;

impl SourceTree {
    /// Builds a tree from its leaves (`2n`-bit realization, weight). Edge
    /// probabilities are ratios of subtree weights; weights are normalized.
    pub fn from_leaves(rounds: usize, leaves: Vec<(u64, f64)>) -> Result<Self> {
        if rounds > MAX_TREE_ROUNDS {
            return Err(Error::InvalidTree(format!("{rounds} rounds is too deep")));
        }
        let mut leaves = leaves;
        leaves.sort_unstable_by_key(|l| l.0);
        if leaves.is_empty() {
            return Err(Error::InvalidTree("no leaves".into()));
        }
        if leaves.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidTree("duplicate leaf".into()));
        }
        if leaves
            .iter()
            .any(|&(x, w)| !(w > 0.0 && w.is_finite()) || x >> (2 * rounds) != 0)
        {
            return Err(Error::InvalidTree(
                "leaf weight not positive or realization too long".into(),
            ));
        }
        // Per-level (prefix, weight), deepest level first.
        let mut levels: Vec<Vec<(u64, f64)>> = vec![leaves];
        for _ in 0..rounds {
            let below = levels.last().unwrap();
            let mut level: Vec<(u64, f64)> = Vec::new();
            for &(x, w) in below {
                let p = x >> 2;
                match level.last_mut() {
                    Some(last) if last.0 == p => last.1 += w,
                    _ => level.push((p, w)),
                }
            }
            levels.push(level);
        }
        levels.reverse();
        let mut edge_levels: Vec<Vec<(u64, f64)>> = Vec::with_capacity(rounds + 1);
        edge_levels.push(vec![(0, 1.0)]);
        for d in 1..=rounds {
            let parents = &levels[d - 1];
            let mut j = 0;
            let entries = levels[d]
                .iter()
                .map(|&(x, w)| {
                    while parents[j].0 != x >> 2 {
                        j += 1;
                    }
                    (x, w / parents[j].1)
                })
                .collect();
            edge_levels.push(entries);
        }
        Ok(Self::assemble(rounds, edge_levels))
    }

    /// Builds a tree from per-level `(prefix, edge probability)` lists, each
    /// sorted by prefix. Callers guarantee that every prefix's parent exists.
    fn assemble(rounds: usize, levels: Vec<Vec<(u64, f64)>>) -> Self {
        let count: usize = levels.iter().map(Vec::len).sum();
        let mut vertices = Vec::with_capacity(count);
        let mut level_start = Vec::with_capacity(rounds + 2);
        let mut offset = 0;
        for (d, level) in levels.iter().enumerate() {
            level_start.push(offset);
            let parent_base = if d == 0 { 0 } else { level_start[d - 1] };
            let mut parent = parent_base;
            for &(prefix, prob) in level {
                if d > 0 {
                    while levels[d - 1][parent - parent_base].0 != prefix >> 2 {
                        parent += 1;
                    }
                }
                vertices.push(Vertex {
                    parent: if d == 0 { u32::MAX } else { parent as u32 },
                    first_child: 0,
                    child_count: 0,
                    depth: d as u8,
                    label: PairLabel::new((prefix & 3) as u8).unwrap(),
                    prob,
                    prefix,
                });
            }
            offset += level.len();
        }
        level_start.push(offset);
        for id in (1..vertices.len()).rev() {
            let p = vertices[id].parent as usize;
            vertices[p].first_child = id as u32;
            vertices[p].child_count += 1;
        }
        let mut mass = vec![1.0; vertices.len()];
        for id in 1..vertices.len() {
            mass[id] = mass[vertices[id].parent as usize] * vertices[id].prob;
        }
        Self {
            rounds,
            vertices,
            mass,
            level_start,
        }
    }

    /// Builds the tree with the given children at every vertex, flat over
    /// its leaves. `children` receives the labels on the path so far.
    pub fn from_shape(
        rounds: usize,
        children: impl Fn(&[PairLabel]) -> Vec<PairLabel>,
    ) -> Result<Self> {
        let mut leaves = Vec::new();
        let mut path = Vec::with_capacity(rounds);
        collect_shape(rounds, &children, &mut path, 0, &mut leaves)?;
        Self::from_leaves(rounds, leaves.into_iter().map(|x| (x, 1.0)).collect())
    }

    /// Complete tree: every vertex has all four children, uniform.
    pub fn uniform(rounds: usize) -> Result<Self> {
        Self::from_shape(rounds, |_| PairLabel::ALL.to_vec())
    }

    /// Same support, every leaf equally likely.
    pub fn leaf_uniform(&self) -> Self {
        self.reweighted(|_| 1.0).expect("unit weights are valid")
    }

    /// Same support with leaf weights `weight(realization)`, normalized.
    pub fn reweighted(&self, weight: impl Fn(u64) -> f64) -> Result<Self> {
        let leaves = self
            .leaves()
            .map(|id| {
                let x = self.vertices[id].prefix;
                (x, weight(x))
            })
            .collect();
        Self::from_leaves(self.rounds, leaves)
    }

    pub fn from_nested(root: &NestedVertex) -> Result<Self> {
        let mut levels: Vec<Vec<(u64, f64)>> = vec![vec![(0, 1.0)]];
        let mut frontier: Vec<(&NestedVertex, u64)> = vec![(root, 0)];
        loop {
            let internal = frontier.iter().filter(|(v, _)| !v.children.is_empty()).count();
            if internal == 0 {
                break;
            }
            if internal != frontier.len() {
                return Err(Error::InvalidTree("leaves at different depths".into()));
            }
            if levels.len() > MAX_TREE_ROUNDS {
                return Err(Error::InvalidTree("tree too deep".into()));
            }
            let mut next = Vec::new();
            let mut level = Vec::new();
            for (v, prefix) in &frontier {
                let mut kids: Vec<&NestedVertex> = v.children.iter().collect();
                if kids.len() > 4 {
                    return Err(Error::InvalidTree("more than four children".into()));
                }
                let mut labels = Vec::with_capacity(kids.len());
                for k in &kids {
                    let label = k
                        .label
                        .ok_or_else(|| Error::InvalidTree("child without label".into()))?;
                    if labels.contains(&label) {
                        return Err(Error::InvalidTree(format!("repeated label {label}")));
                    }
                    if !(k.prob > 0.0 && k.prob <= 1.0) {
                        return Err(Error::InvalidTree(format!(
                            "edge probability {} not in (0, 1]",
                            k.prob
                        )));
                    }
                    labels.push(label);
                }
                let total: f64 = kids.iter().map(|k| k.prob).sum();
                if (total - 1.0).abs() > NORM_TOLERANCE {
                    return Err(Error::InvalidTree(format!(
                        "outgoing probabilities sum to {total}"
                    )));
                }
                kids.sort_by_key(|k| k.label);
                for k in kids {
                    let p = (prefix << 2) | k.label.unwrap().value() as u64;
                    level.push((p, k.prob));
                    next.push((k, p));
                }
            }
            levels.push(level);
            frontier = next;
        }
        let rounds = levels.len() - 1;
        Ok(Self::assemble(rounds, levels))
    }

    pub fn to_nested(&self) -> NestedVertex {
        self.nested_at(0)
    }

    fn nested_at(&self, id: VertexId) -> NestedVertex {
        let v = &self.vertices[id];
        NestedVertex {
            label: (id != 0).then_some(v.label),
            prob: if id == 0 { 1.0 } else { v.prob },
            children: self.children(id).map(|c| self.nested_at(c)).collect(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_nested())?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let root: NestedVertex = serde_json::from_str(json)?;
        Self::from_nested(&root)
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn root(&self) -> VertexId {
        0
    }

    pub fn children(&self, id: VertexId) -> std::ops::Range<VertexId> {
        let v = &self.vertices[id];
        let first = v.first_child as usize;
        first..first + v.child_count as usize
    }

    pub fn child_count(&self, id: VertexId) -> usize {
        self.vertices[id].child_count as usize
    }

    pub fn parent(&self, id: VertexId) -> Option<VertexId> {
        (id != 0).then(|| self.vertices[id].parent as usize)
    }

    pub fn depth(&self, id: VertexId) -> usize {
        self.vertices[id].depth as usize
    }

    /// Label on the edge into `id` (meaningless for the root).
    pub fn label(&self, id: VertexId) -> PairLabel {
        self.vertices[id].label
    }

    /// Probability of the edge into `id` given its parent.
    pub fn edge_prob(&self, id: VertexId) -> f64 {
        self.vertices[id].prob
    }

    /// Probability of reaching `id` from the root.
    pub fn mass(&self, id: VertexId) -> f64 {
        self.mass[id]
    }

    /// Realized bits on the path to `id`, two per edge.
    pub fn prefix(&self, id: VertexId) -> u64 {
        self.vertices[id].prefix
    }

    pub fn path(&self, id: VertexId) -> Vec<PairLabel> {
        let v = &self.vertices[id];
        (0..v.depth as usize)
            .rev()
            .map(|i| PairLabel::new(((v.prefix >> (2 * i)) & 3) as u8).unwrap())
            .collect()
    }

    pub fn is_leaf(&self, id: VertexId) -> bool {
        self.depth(id) == self.rounds
    }

    /// Vertices at `depth`, in label order.
    pub fn level(&self, depth: usize) -> std::ops::Range<VertexId> {
        self.level_start[depth]..self.level_start[depth + 1]
    }

    pub fn leaves(&self) -> std::ops::Range<VertexId> {
        self.level(self.rounds)
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves().len()
    }

    pub fn find(&self, path: &[PairLabel]) -> Option<VertexId> {
        let mut id = 0;
        for &label in path {
            id = self.children(id).find(|&c| self.label(c) == label)?;
        }
        Some(id)
    }

    /// Next-pair probabilities at `id`, indexed by label value.
    pub fn pair_probs(&self, id: VertexId) -> [f64; 4] {
        let mut probs = [0.0; 4];
        for c in self.children(id) {
            probs[self.label(c).value() as usize] = self.edge_prob(c);
        }
        probs
    }

    pub fn child_labels(&self, id: VertexId) -> Vec<PairLabel> {
        self.children(id).map(|c| self.label(c)).collect()
    }

    /// `−log2` of the largest outgoing edge probability.
    pub fn fresh_entropy_at(&self, id: VertexId) -> f64 {
        let max = self
            .children(id)
            .map(|c| self.edge_prob(c))
            .fold(0.0, f64::max);
        -max.log2()
    }

    pub fn round_type(&self, id: VertexId) -> RoundType {
        classify_round(self.fresh_entropy_at(id))
    }

    pub fn max_leaf_prob(&self) -> f64 {
        self.leaves().map(|l| self.mass[l]).fold(0.0, f64::max)
    }

    pub fn min_entropy(&self) -> f64 {
        -self.max_leaf_prob().log2()
    }

    /// Min-entropy per source bit (`2n` bits).
    pub fn min_entropy_rate(&self) -> Result<f64> {
        if self.rounds == 0 {
            return Err(Error::ZeroLength);
        }
        Ok(self.min_entropy() / (2 * self.rounds) as f64)
    }

    pub fn total_leaf_mass(&self) -> f64 {
        neumaier_sum(self.leaves().map(|l| self.mass[l]))
    }

    pub fn to_distribution(&self) -> Result<CondDistribution> {
        let bits = 2 * self.rounds;
        if bits > ENUMERATION_CAP {
            return Err(Error::CapExceeded {
                bits,
                cap: ENUMERATION_CAP,
            });
        }
        CondDistribution::new(bits, self.leaves().map(|l| (self.prefix(l), self.mass[l])))
    }
}

impl PairSource for SourceTree {
    fn pair_distribution(&self, prefix: &[PairLabel]) -> Result<[f64; 4]> {
        if prefix.len() >= self.rounds {
            return Err(Error::OutOfRange(format!(
                "no round {} in a {}-round source",
                prefix.len() + 1,
                self.rounds
            )));
        }
        let id = self.find(prefix).ok_or(Error::ZeroProbabilityPrefix)?;
        Ok(self.pair_probs(id))
    }
}

fn collect_shape(
    rounds: usize,
    children: &impl Fn(&[PairLabel]) -> Vec<PairLabel>,
    path: &mut Vec<PairLabel>,
    prefix: u64,
    out: &mut Vec<u64>,
) -> Result<()> {
    if path.len() == rounds {
        out.push(prefix);
        return Ok(());
    }
    let labels = children(path);
    if labels.is_empty() {
        return Err(Error::InvalidTree("internal vertex without children".into()));
    }
    for label in labels {
        path.push(label);
        collect_shape(rounds, children, path, (prefix << 2) | label.value() as u64, out)?;
        path.pop();
    }
    Ok(())
}

/// Compensated summation; keeps long probability sums within 1e-12.
pub(crate) fn neumaier_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

#[cfg(test)]
mod tests {
    use super::*;

    fn l(s: &str) -> PairLabel {
        PairLabel::try_from(s).unwrap()
    }

    #[test]
    fn min_entropy_examples() {
        assert_eq!(CondDistribution::uniform(4).unwrap().min_entropy(), 4.0);
        let third = CondDistribution::new(2, [(0, 1.0 / 3.0), (1, 1.0 / 3.0), (2, 1.0 / 3.0)])
            .unwrap();
        assert!((third.min_entropy() - 1.584_962_500_721_156).abs() < 1e-12);
        assert_eq!(CondDistribution::point_mass(5, 3).unwrap().min_entropy(), 0.0);
        assert!(matches!(
            conditional_min_entropy(&[]),
            Err(Error::EmptyDistribution)
        ));
        assert!(matches!(
            CondDistribution::new(3, []),
            Err(Error::EmptyDistribution)
        ));
    }

    #[test]
    fn conditional_min_entropy_averages_guesses() {
        let sure = CondDistribution::point_mass(2, 0).unwrap();
        let flat = CondDistribution::uniform(2).unwrap();
        // P_g = 1/2·1 + 1/2·1/4 = 5/8
        let h = conditional_min_entropy(&[(0.5, &sure), (0.5, &flat)]).unwrap();
        assert!((h + (5.0f64 / 8.0).log2()).abs() < 1e-12);
    }

    #[test]
    fn rate_examples() {
        assert_eq!(CondDistribution::uniform(6).unwrap().min_entropy_rate().unwrap(), 1.0);
        let fixed_first = CondDistribution::flat(8, 0..128).unwrap();
        assert!((fixed_first.min_entropy_rate().unwrap() - 7.0 / 8.0).abs() < 1e-12);
        assert_eq!(
            CondDistribution::point_mass(4, 0).unwrap().min_entropy_rate().unwrap(),
            0.0
        );
        let empty_string = CondDistribution::point_mass(0, 0).unwrap();
        assert!(matches!(empty_string.min_entropy_rate(), Err(Error::ZeroLength)));
    }

    #[test]
    fn sv_bound_examples() {
        let b = |d| sv_min_entropy_rate_bound(SVParams::new(d).unwrap());
        assert_eq!(b(0.0), 1.0);
        assert_eq!(b(0.5), 0.0);
        assert!((b(0.25) - 0.415_037_499_278_843_8).abs() < 1e-12);
        assert!(SVParams::new(0.6).is_err());
        assert!(SVParams::new(-0.1).is_err());
    }

    #[test]
    fn sv_membership() {
        let uniform = CondDistribution::uniform(5).unwrap();
        assert!(uniform.is_sv_source(SVParams::new(0.0).unwrap()));
        let fixed_first = CondDistribution::flat(5, 0..16).unwrap();
        assert!(!fixed_first.is_sv_source(SVParams::new(0.49).unwrap()));
        assert!(fixed_first.is_sv_source(SVParams::new(0.5).unwrap()));
    }

    #[test]
    fn fresh_entropy_on_tree_vertices() {
        let full = SourceTree::uniform(1).unwrap();
        assert_eq!(full.fresh_entropy_at(0), 2.0);
        assert_eq!(fresh_entropy(&full, &[]).unwrap(), 2.0);

        let single = SourceTree::from_shape(2, |_| vec![l("01")]).unwrap();
        assert_eq!(single.fresh_entropy_at(0), 0.0);

        let skew = SourceTree::from_leaves(1, vec![(0, 0.5), (1, 0.25), (2, 0.25)]).unwrap();
        assert_eq!(skew.fresh_entropy_at(0), 1.0);
        assert!(matches!(
            fresh_entropy(&skew, &[l("11")]),
            Err(Error::OutOfRange(_))
        ));
    }

    #[test]
    fn fresh_entropy_from_table_conditioning() {
        let d = CondDistribution::new(4, [(0b0000, 0.5), (0b0001, 0.25), (0b1110, 0.25)]).unwrap();
        assert!((fresh_entropy(&d, &[]).unwrap() - (-(0.75f64).log2())).abs() < 1e-12);
        // Given first pair 00, the second pair is 00 w.p. 2/3.
        let e = fresh_entropy(&d, &[l("00")]).unwrap();
        assert!((e - (1.5f64).log2()).abs() < 1e-12);
        assert!(matches!(
            fresh_entropy(&d, &[l("01")]),
            Err(Error::ZeroProbabilityPrefix)
        ));
        let tree = d.to_tree().unwrap();
        assert!(matches!(
            fresh_entropy(&tree, &[l("01")]),
            Err(Error::ZeroProbabilityPrefix)
        ));
    }

    #[test]
    fn round_classification() {
        assert_eq!(classify_round(2.0), RoundType::Type1);
        assert_eq!(classify_round(3f64.log2()), RoundType::Type2);
        assert_eq!(classify_round(0.0), RoundType::Type2);
    }

    #[test]
    fn tree_flattening() {
        let d = SourceTree::uniform(1).unwrap().to_distribution().unwrap();
        assert_eq!(d, CondDistribution::uniform(2).unwrap());

        let alt = SourceTree::from_shape(2, |path| {
            if path.is_empty() {
                PairLabel::ALL.to_vec()
            } else {
                vec![l("00"), l("01"), l("10")]
            }
        })
        .unwrap();
        let d = alt.to_distribution().unwrap();
        assert_eq!(d.support_size(), 12);
        assert!(d.entries().iter().all(|e| (e.1 - 1.0 / 12.0).abs() < 1e-15));

        let line = SourceTree::from_shape(3, |_| vec![l("10")]).unwrap();
        let d = line.to_distribution().unwrap();
        assert_eq!(d.entries(), &[(0b10_10_10, 1.0)]);

        let deep = SourceTree::from_shape(13, |_| vec![l("00")]).unwrap();
        assert!(matches!(deep.to_distribution(), Err(Error::CapExceeded { .. })));
    }

    #[test]
    fn adversarial_sources() {
        let parity = |x: u64| x.count_ones() % 2 == 1;
        let d = adversarial_source_for_function(3, parity).unwrap();
        assert_eq!(d.support_size(), 4);
        assert_eq!(d.min_entropy(), 2.0);
        assert!(d.entries().iter().all(|e| !parity(e.0)));

        let d = adversarial_source_for_function(2, |_| true).unwrap();
        assert_eq!(d.support_size(), 4);
        assert_eq!(d.min_entropy(), 2.0);

        let first = |x: u64| x >> 3 & 1 == 1;
        let d = adversarial_source_for_function(4, first).unwrap();
        assert_eq!(d.support_size(), 8);
        assert_eq!(d.min_entropy(), 3.0);
    }

    #[test]
    fn distribution_validation() {
        assert!(CondDistribution::new(2, [(0, 0.5), (0, 0.5)]).is_err());
        assert!(CondDistribution::new(2, [(4, 1.0)]).is_err());
        assert!(CondDistribution::new(2, [(0, 0.6), (1, 0.6)]).is_err());
        assert!(CondDistribution::new(2, [(0, -0.5), (1, 1.5)]).is_err());
        assert!(matches!(
            CondDistribution::uniform(25),
            Err(Error::CapExceeded { .. })
        ));
    }

    #[test]
    fn distribution_json_round_trip() {
        let d = CondDistribution::new(3, [(0b101, 0.75), (0b000, 0.25)])
            .unwrap()
            .with_label("e=1");
        let json = d.to_json().unwrap();
        assert!(json.contains("\"101\": 0.75"));
        assert_eq!(CondDistribution::from_json(&json).unwrap(), d);
        assert!(CondDistribution::from_json(r#"{"n_bits": 2, "entries": {"1": 1.0}}"#).is_err());
        assert!(
            CondDistribution::from_json(r#"{"n_bits": 1, "entries": {"1": 0.5, "0": 0.4}}"#)
                .is_err()
        );
    }

    #[test]
    fn tree_json_schema() {
        let json = r#"{
            "children": [
                {"label": "00", "prob": 0.5, "children": [{"label": "11", "prob": 1.0}]},
                {"label": "10", "prob": 0.5, "children": [
                    {"label": "01", "prob": 0.25}, {"label": "00", "prob": 0.75}
                ]}
            ]
        }"#;
        let t = SourceTree::from_json(json).unwrap();
        assert_eq!(t.rounds(), 2);
        assert_eq!(t.leaf_count(), 3);
        let d = t.to_distribution().unwrap();
        assert_eq!(d.prob(0b10_00), 0.375);
        assert_eq!(d.prob(0b00_11), 0.5);
        let back = SourceTree::from_json(&t.to_json().unwrap()).unwrap();
        assert_eq!(back, t);

        let bad_sum = r#"{"children": [{"label": "00", "prob": 0.5}]}"#;
        assert!(SourceTree::from_json(bad_sum).is_err());
        let dup = r#"{"children": [{"label": "00", "prob": 0.5}, {"label": "00", "prob": 0.5}]}"#;
        assert!(SourceTree::from_json(dup).is_err());
        let ragged = r#"{"children": [
            {"label": "00", "prob": 0.5},
            {"label": "01", "prob": 0.5, "children": [{"label": "00", "prob": 1.0}]}
        ]}"#;
        assert!(SourceTree::from_json(ragged).is_err());
        let bad_label = r#"{"children": [{"label": "0", "prob": 1.0}]}"#;
        assert!(SourceTree::from_json(bad_label).is_err());
    }

    #[test]
    fn tree_navigation() {
        let t = SourceTree::uniform(2).unwrap();
        assert_eq!(t.len(), 1 + 4 + 16);
        let v = t.find(&[l("10"), l("01")]).unwrap();
        assert!(t.is_leaf(v));
        assert_eq!(t.path(v), vec![l("10"), l("01")]);
        assert_eq!(t.prefix(v), 0b1001);
        assert_eq!(t.mass(v), 1.0 / 16.0);
        assert_eq!(t.depth(t.parent(v).unwrap()), 1);
        assert!((t.min_entropy_rate().unwrap() - 1.0).abs() < 1e-12);
    }
}
