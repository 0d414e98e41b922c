//! Attack trees against the protocol and the quantities that bound them.
//!
//! An [`AttackTree`] is a source tree whose internal vertices say how the
//! devices play the round decided at that vertex: honestly, or with a
//! deterministic classical rule (a local strategy or a re-send of an earlier
//! honest round's outputs).

use std::collections::{BTreeSet, HashMap};

use num_rational::Ratio;
use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::engine::{BoxRule, Devices, ProtocolConfig, RoundPlay, Source};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::extractor::inner_product;
use crate::game::{strategy_winning_on, LocalStrategy, OneBitFn, PairLabel, RoundInput};
use crate::source::{RoundType, SourceTree, VertexId};

/// Deepest attack tree the builders produce.
pub const MAX_ATTACK_ROUNDS: usize = 12;

/// Largest `k` for the exhaustive re-send bias.
pub const MAX_BRUTEFORCE_ROUNDS: usize = 12;

/// Rate thresholds of the protocol.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// `log2 √3`: below this rate every round can be Type 2.
    pub r_trivial: f64,
    /// `¼ log2 10`: rate of the re-send tree, the best constructive full cheat.
    pub r_max: f64,
    /// `log2(12)/4`: largest rate admitting zero-error full cheating.
    pub r_h: f64,
}

impl Thresholds {
    pub fn compute() -> Self {
        Self {
            r_trivial: 3f64.sqrt().log2(),
            r_max: 10f64.log2() / 4.0,
            r_h: 12f64.log2() / 4.0,
        }
    }
}

pub fn r_h() -> f64 {
    Thresholds::compute().r_h
}

/// Annotation of an internal vertex.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Annotation {
    Honest,
    Dishonest {
        strategy: [BoxRule; 3],
        /// Child the strategy does not win on; realizing it aborts.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        abort_label: Option<PairLabel>,
    },
}

impl Annotation {
    pub fn local(strategy: LocalStrategy) -> Self {
        Annotation::Dishonest {
            strategy: strategy.boxes.map(BoxRule::Local),
            abort_label: None,
        }
    }

    pub fn resend(round: usize) -> Self {
        Annotation::Dishonest {
            strategy: [BoxRule::resend(round), BoxRule::resend(round), BoxRule::resend(round)],
            abort_label: None,
        }
    }

    pub fn is_honest(&self) -> bool {
        matches!(self, Annotation::Honest)
    }

    pub fn play(&self) -> RoundPlay {
        match self {
            Annotation::Honest => RoundPlay::Honest,
            Annotation::Dishonest { strategy, .. } => RoundPlay::Classical(strategy.clone()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttackTree {
    tree: SourceTree,
    annotations: Vec<Option<Annotation>>,
}

/// Nested JSON form: the source-tree schema plus `type`, `strategy` and
/// `abort_label` on internal vertices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackVertexJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<PairLabel>,
    pub prob: f64,
    #[serde(flatten, default, skip_serializing_if = "Option::is_none")]
    pub annotation: Option<Annotation>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<AttackVertexJson>,
}

impl AttackTree {
    /// Checks the zero-error shape: honest vertices have all four children,
    /// dishonest ones at most three unless one is an announced abort edge,
    /// and re-sends read strictly earlier honest rounds on the same path.
    pub fn new(tree: SourceTree, annotations: Vec<Option<Annotation>>) -> Result<Self> {
        if annotations.len() != tree.len() {
            return Err(Error::InvalidAttack(format!(
                "{} annotations for {} vertices",
                annotations.len(),
                tree.len()
            )));
        }
        for v in 0..tree.len() {
            let bad = |msg: String| Err(Error::InvalidAttack(format!("vertex {v}: {msg}")));
            let kids = tree.child_count(v);
            match (&annotations[v], tree.is_leaf(v)) {
                (None, true) => {}
                (Some(_), true) => return bad("leaf carries an annotation".into()),
                (None, false) => return bad("missing annotation".into()),
                (Some(Annotation::Honest), false) => {
                    if kids != 4 {
                        return bad(format!("honest with {kids} children"));
                    }
                }
                (Some(Annotation::Dishonest { strategy, abort_label }), false) => {
                    match abort_label {
                        None if kids > 3 => return bad("dishonest with 4 children".into()),
                        Some(l) if !tree.child_labels(v).contains(l) => {
                            return bad(format!("abort label {l} is not a child"))
                        }
                        _ => {}
                    }
                    let depth = tree.depth(v);
                    let mut ancestors = vec![0; depth];
                    let mut u = v;
                    while let Some(p) = tree.parent(u) {
                        ancestors[tree.depth(p)] = p;
                        u = p;
                    }
                    for rule in strategy {
                        if let BoxRule::PeerInput { .. } = rule {
                            return bad("strategy reads a peer input".into());
                        }
                        for &r in rule.referenced_rounds() {
                            if r >= depth {
                                return bad(format!("re-send of round {r} at depth {depth}"));
                            }
                            if !matches!(annotations[ancestors[r]], Some(Annotation::Honest)) {
                                return bad(format!("re-send of dishonest round {r}"));
                            }
                        }
                    }
                }
            }
        }
        Ok(Self { tree, annotations })
    }

    pub fn tree(&self) -> &SourceTree {
        &self.tree
    }

    pub fn annotation(&self, v: VertexId) -> Option<&Annotation> {
        self.annotations[v].as_ref()
    }

    pub fn leaf_count(&self) -> usize {
        self.tree.leaf_count()
    }

    pub fn devices(&self) -> Devices {
        Devices::PerVertex(
            self.annotations
                .iter()
                .map(|a| a.as_ref().map(Annotation::play))
                .collect(),
        )
    }

    pub fn config(&self) -> Result<ProtocolConfig> {
        ProtocolConfig::new(Source::Tree(self.tree.clone()), self.devices())
    }

    /// Dishonest vertices with exactly three children.
    pub fn augmentable(&self) -> Vec<VertexId> {
        (0..self.tree.len())
            .filter(|&v| {
                matches!(self.annotations[v], Some(Annotation::Dishonest { abort_label: None, .. }))
                    && self.tree.child_count(v) == 3
            })
            .collect()
    }

    /// Leaves whose path crosses an abort edge.
    pub fn abort_leaf_count(&self) -> usize {
        let mut aborted = vec![false; self.tree.len()];
        for v in 1..self.tree.len() {
            let p = self.tree.parent(v).unwrap();
            let edge = matches!(
                &self.annotations[p],
                Some(Annotation::Dishonest { abort_label: Some(l), .. }) if *l == self.tree.label(v)
            );
            aborted[v] = aborted[p] || edge;
        }
        self.tree.leaves().filter(|&v| aborted[v]).count()
    }

    pub fn to_nested(&self) -> AttackVertexJson {
        self.nested_at(self.tree.root())
    }

    fn nested_at(&self, v: VertexId) -> AttackVertexJson {
        let root = v == self.tree.root();
        AttackVertexJson {
            label: (!root).then(|| self.tree.label(v)),
            prob: if root { 1.0 } else { self.tree.edge_prob(v) },
            annotation: self.annotations[v].clone(),
            children: self.tree.children(v).map(|c| self.nested_at(c)).collect(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_nested())?)
    }

    pub fn from_nested(root: &AttackVertexJson) -> Result<Self> {
        fn strip(v: &AttackVertexJson) -> crate::source::NestedVertex {
            crate::source::NestedVertex {
                label: v.label,
                prob: v.prob,
                children: v.children.iter().map(strip).collect(),
            }
        }
        let tree = SourceTree::from_nested(&strip(root))?;
        let mut annotations = vec![None; tree.len()];
        let mut stack = vec![(root, Vec::new())];
        while let Some((node, path)) = stack.pop() {
            let id = tree
                .find(&path)
                .ok_or_else(|| Error::InvalidAttack("unreachable vertex".into()))?;
            annotations[id] = node.annotation.clone();
            for child in &node.children {
                let mut p = path.clone();
                p.push(child.label.ok_or_else(|| Error::InvalidTree("unlabelled child".into()))?);
                stack.push((child, p));
            }
        }
        Self::new(tree, annotations)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let root: AttackVertexJson = serde_json::from_str(json)?;
        Self::from_nested(&root)
    }

    fn from_keyed(
        rounds: usize,
        leaves: impl IntoIterator<Item = u64>,
        mut annotation: impl FnMut(usize, u64) -> Option<Annotation>,
    ) -> Result<Self> {
        let tree = SourceTree::from_leaves(rounds, leaves.into_iter().map(|x| (x, 1.0)).collect())?;
        let annotations = (0..tree.len())
            .map(|v| {
                if tree.is_leaf(v) {
                    None
                } else {
                    annotation(tree.depth(v), tree.prefix(v))
                }
            })
            .collect();
        Self::new(tree, annotations)
    }
}

fn check_even(n: usize) -> Result<()> {
    if !n.is_multiple_of(2) {
        return Err(Error::OddRounds(n));
    }
    if n == 0 || n > MAX_ATTACK_ROUNDS {
        return Err(Error::OutOfRange(format!(
            "attack trees need 2 ≤ n ≤ {MAX_ATTACK_ROUNDS}, got {n}"
        )));
    }
    Ok(())
}

const AND_ZERO: [PairLabel; 3] = [PairLabel::ALL[0], PairLabel::ALL[1], PairLabel::ALL[2]];
const AND_ONE: PairLabel = PairLabel::ALL[3];

/// Honest rounds (four children) alternate with rounds restricted to the
/// three AND = 0 inputs, where the all-zero local strategy always wins.
pub fn build_alternating_tree(n: usize) -> Result<AttackTree> {
    check_even(n)?;
    let tree = SourceTree::from_shape(n, |path| {
        if path.len() % 2 == 0 {
            PairLabel::ALL.to_vec()
        } else {
            AND_ZERO.to_vec()
        }
    })?;
    let annotations = (0..tree.len())
        .map(|v| match (tree.is_leaf(v), tree.depth(v) % 2) {
            (true, _) => None,
            (false, 0) => Some(Annotation::Honest),
            (false, _) => Some(Annotation::local(LocalStrategy::ALL_ZERO)),
        })
        .collect();
    AttackTree::new(tree, annotations)
}

/// Every dishonest round repeats the previous honest round's outputs; after
/// a `111` round only `111` may follow, otherwise any AND = 0 input.
pub fn build_resend_tree(n: usize) -> Result<AttackTree> {
    check_even(n)?;
    let tree = SourceTree::from_shape(n, |path| {
        if path.len() % 2 == 0 {
            PairLabel::ALL.to_vec()
        } else if *path.last().unwrap() == AND_ONE {
            vec![AND_ONE]
        } else {
            AND_ZERO.to_vec()
        }
    })?;
    let annotations = (0..tree.len())
        .map(|v| match (tree.is_leaf(v), tree.depth(v)) {
            (true, _) => None,
            (false, d) if d % 2 == 0 => Some(Annotation::Honest),
            (false, d) => Some(Annotation::resend(d - 1)),
        })
        .collect();
    AttackTree::new(tree, annotations)
}

/// Adds the missing fourth child to each target vertex as an abort edge.
/// The new child's subtree copies the subtree of the vertex's first child.
/// The result is flat over its leaves; without targets the base is returned
/// unchanged.
pub fn build_risking_tree(base: &AttackTree, targets: &[VertexId]) -> Result<AttackTree> {
    if targets.is_empty() {
        return Ok(base.clone());
    }
    let tree = &base.tree;
    let n = tree.rounds();
    let mut keyed: Vec<(usize, u64)> = Vec::with_capacity(targets.len());
    for &v in targets {
        if v >= tree.len() {
            return Err(Error::InvalidAttack(format!("no vertex {v}")));
        }
        match base.annotations[v] {
            Some(Annotation::Honest) => return Err(Error::HonestVertex(v)),
            Some(Annotation::Dishonest { abort_label: None, .. }) if tree.child_count(v) == 3 => {}
            _ => {
                return Err(Error::InvalidAttack(format!(
                    "vertex {v} is not a dishonest vertex with three children"
                )))
            }
        }
        keyed.push((tree.depth(v), tree.prefix(v)));
    }
    keyed.sort_unstable_by(|a, b| b.cmp(a));
    keyed.dedup();

    let mut leaves: BTreeSet<u64> = tree.leaves().map(|v| tree.prefix(v)).collect();
    let mut notes: HashMap<(usize, u64), Annotation> = (0..tree.len())
        .filter_map(|v| {
            base.annotations[v]
                .clone()
                .map(|a| ((tree.depth(v), tree.prefix(v)), a))
        })
        .collect();
    for (depth, prefix) in keyed {
        let shift = 2 * (n - depth - 1);
        let present: Vec<u8> = (0..4u8)
            .filter(|&l| leaves.iter().any(|&x| x >> shift == (prefix << 2 | l as u64)))
            .collect();
        let missing = (0..4u8).find(|l| !present.contains(l)).unwrap();
        let first = prefix << 2 | present[0] as u64;
        // Pair `depth` sits `2·(n − depth − 1)` bits above the leaf's end.
        let retarget = |x: u64, level: usize| -> u64 {
            let shift = 2 * (level - depth - 1);
            (x & !(3 << shift)) | (missing as u64) << shift
        };
        let cloned: Vec<u64> = leaves
            .iter()
            .filter(|&&x| x >> shift == first)
            .map(|&x| retarget(x, n))
            .collect();
        leaves.extend(cloned);
        let cloned_notes: Vec<((usize, u64), Annotation)> = notes
            .iter()
            .filter(|((d, p), _)| *d > depth && p >> (2 * (d - depth - 1)) == first)
            .map(|((d, p), a)| ((*d, retarget(*p, *d)), a.clone()))
            .collect();
        notes.extend(cloned_notes);
        if let Some(Annotation::Dishonest { abort_label, .. }) = notes.get_mut(&(depth, prefix)) {
            *abort_label = Some(PairLabel::new(missing).unwrap());
        }
    }
    AttackTree::from_keyed(n, leaves, |d, p| notes.get(&(d, p)).cloned())
}

/// Mass of leaves whose path has no more Type 1 than Type 2 rounds, with
/// rounds typed by their fresh entropy.
pub fn cheatable_mass(tree: &SourceTree) -> f64 {
    let mut balance = vec![0i32; tree.len()];
    let mut total = 0.0;
    for v in 0..tree.len() {
        if tree.is_leaf(v) {
            if balance[v] >= 0 {
                total += tree.mass(v);
            }
            continue;
        }
        let step = match tree.round_type(v) {
            RoundType::Type1 => -1,
            RoundType::Type2 => 1,
        };
        for c in tree.children(v) {
            balance[c] = balance[v] + step;
        }
    }
    total
}

fn epsilon_above_rh(rate: f64) -> f64 {
    rate - r_h()
}

/// `2^{−(2εn+1)}` with `ε = R − R_H`.
pub fn cheat_bias_bound(rate: f64, n: usize) -> Result<f64> {
    let eps = epsilon_above_rh(rate);
    if eps <= 0.0 {
        return Err(Error::RateBelowThreshold {
            rate,
            threshold: r_h(),
        });
    }
    Ok(bias_bound(eps, n))
}

/// Probability of not aborting when guessing: `2^{−2εn}` with `ε = R − R_H`.
pub fn guess_success(rate: f64, n: usize) -> Result<f64> {
    let eps = epsilon_above_rh(rate);
    if eps < -1e-12 {
        return Err(Error::RateBelowThreshold {
            rate,
            threshold: r_h(),
        });
    }
    Ok(cheat_probability_bound(eps.max(0.0), n))
}

/// `2^{−2εn}`.
pub fn cheat_probability_bound(epsilon: f64, n: usize) -> f64 {
    (-2.0 * epsilon * n as f64).exp2()
}

/// `2^{−(2εn+1)}`.
pub fn bias_bound(epsilon: f64, n: usize) -> f64 {
    (-(2.0 * epsilon * n as f64 + 1.0)).exp2()
}

/// Leaf-uniform source on the alternating tree's leaves plus random other
/// strings, `⌈12^{n/2}·2^{2εn}⌉` strings in total, so its rate is at least
/// `R_H + ε`.
pub fn alternating_superset_source<R: Rng + ?Sized>(
    n: usize,
    epsilon: f64,
    rng: &mut R,
) -> Result<SourceTree> {
    check_even(n)?;
    if n > 10 || epsilon < 0.0 {
        return Err(Error::OutOfRange(format!("n = {n}, ε = {epsilon}")));
    }
    let base = 12u64.pow(n as u32 / 2);
    let space = 1u64 << (2 * n);
    let target = (base as f64 * (2.0 * epsilon * n as f64).exp2() - 1e-9).ceil() as u64;
    if target > space {
        return Err(Error::OutOfRange(format!(
            "rate R_H + {epsilon} needs {target} strings, only {space} exist"
        )));
    }
    let alternating = build_alternating_tree(n)?;
    let t = alternating.tree();
    let mut support: Vec<u64> = t.leaves().map(|v| t.prefix(v)).collect();
    let inside: BTreeSet<u64> = support.iter().copied().collect();
    let outside: Vec<u64> = (0..space).filter(|x| !inside.contains(x)).collect();
    let extra = (target - base) as usize;
    support.extend(index::sample(rng, outside.len(), extra).into_iter().map(|i| outside[i]));
    SourceTree::from_leaves(n, support.into_iter().map(|x| (x, 1.0)).collect())
}

/// Canonical zero-error adversary for an arbitrary source tree.
///
/// Vertices with all four children play honestly. Elsewhere the boxes
/// re-send the latest honest round on the path whose outputs still win on
/// every possible child (a `111` round only covers `111`, any other round
/// covers the three AND = 0 inputs), each honest round used at most once.
/// Otherwise they play a local strategy winning on every child.
pub fn zero_error_attack(tree: &SourceTree) -> Result<AttackTree> {
    let mut annotations: Vec<Option<Annotation>> = vec![None; tree.len()];
    // Unused honest rounds on the path to each vertex: (round, was 111).
    let mut open: Vec<Vec<(usize, bool)>> = vec![Vec::new(); tree.len()];
    for v in 0..tree.len() {
        if tree.is_leaf(v) {
            continue;
        }
        let labels = tree.child_labels(v);
        let mut pending = std::mem::take(&mut open[v]);
        if labels.len() == 4 {
            annotations[v] = Some(Annotation::Honest);
            for c in tree.children(v) {
                let mut next = pending.clone();
                next.push((tree.depth(v), tree.label(c) == AND_ONE));
                open[c] = next;
            }
            continue;
        }
        let all_one = labels.iter().all(|&l| l == AND_ONE);
        let all_zero = labels.iter().all(|&l| l != AND_ONE);
        let pick = pending
            .iter()
            .rposition(|&(_, one)| if one { all_one } else { all_zero });
        annotations[v] = Some(match pick {
            Some(i) => Annotation::resend(pending.remove(i).0),
            None => {
                let inputs: Vec<RoundInput> = labels.iter().map(|&l| RoundInput::from_pair(l)).collect();
                let s = strategy_winning_on(&inputs).ok_or_else(|| {
                    Error::InvalidAttack(format!("no local strategy wins at vertex {v}"))
                })?;
                Annotation::local(s)
            }
        });
        for c in tree.children(v) {
            open[c] = pending.clone();
        }
    }
    AttackTree::new(tree.clone(), annotations)
}

/// Round-`j` classical strategy: box outputs are `⊕_{i∈S} own_i ⊕ f′(own input)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct XorSetStrategy {
    round: usize,
    set: Vec<usize>,
    residuals: [OneBitFn; 3],
}

impl XorSetStrategy {
    /// `set` holds zero-based indices of earlier rounds.
    pub fn new(round: usize, set: Vec<usize>, residuals: [OneBitFn; 3]) -> Result<Self> {
        let mut set = set;
        set.sort_unstable();
        if set.windows(2).any(|w| w[0] == w[1]) || set.last().is_some_and(|&r| r >= round) {
            return Err(Error::InvalidAttack(format!(
                "round {round}: set {set:?} must hold distinct earlier rounds"
            )));
        }
        Ok(Self {
            round,
            set,
            residuals,
        })
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn set(&self) -> &[usize] {
        &self.set
    }

    pub fn play(&self) -> RoundPlay {
        RoundPlay::Classical(self.residuals.map(|residual| BoxRule::XorSet {
            rounds: self.set.clone(),
            residual,
        }))
    }
}

/// Bias of the output after `k` honest rounds when the re-sending rounds
/// XOR together the outputs of `s` of them.
pub fn resend_bias_closed_form(k: usize, s: usize) -> Result<Ratio<u64>> {
    if s > k {
        return Err(Error::SubsetTooLarge { s, k });
    }
    if k > 62 {
        return Err(Error::OutOfRange(format!("k = {k}")));
    }
    let exp = if s.is_multiple_of(2) { k + 1 } else { k };
    Ok(Ratio::new(1, 1u64 << exp))
}

fn subset_mask(k: usize, set: &[usize]) -> Result<u64> {
    let mut mask = 0u64;
    for &i in set {
        if i >= k || mask >> i & 1 == 1 {
            return Err(Error::InvalidAttack(format!(
                "subset {set:?} must hold distinct indices below {k}"
            )));
        }
        mask |= 1 << i;
    }
    Ok(mask)
}

/// `|P(B = 0) − 1/2|` over all `2^{2k}` equally likely `(a, b)`, where
/// `B = ⊕_i a_i b_i ⊕ (⊕_{i∈S} a_i)(⊕_{i∈S} b_i)`. Indices are zero-based.
pub fn resend_bias_bruteforce(k: usize, set: &[usize], exec: Execution) -> Result<Ratio<u64>> {
    if k > MAX_BRUTEFORCE_ROUNDS {
        return Err(Error::OutOfRange(format!(
            "brute force supports k ≤ {MAX_BRUTEFORCE_ROUNDS}, got {k}"
        )));
    }
    let mask = subset_mask(k, set)?;
    let side = 1u64 << k;
    let zeros = exec.sum_u64(side, |a| {
        let pa = inner_product(a, mask);
        (0..side)
            .filter(|&b| !(inner_product(a, b) ^ (pa & inner_product(b, mask))))
            .count() as u64
    });
    let total = side * side;
    Ok(Ratio::new((2 * zeros).abs_diff(total), 2 * total))
}

fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// The same bias from binomial counts: the `S` part is summed over the
/// weights of `a_S`, `b_S` and their overlap, then combined with the
/// remaining `k − s` plain rounds by the piling-up lemma.
pub fn appendix_binomial_bias(k: usize, s: usize) -> Result<Ratio<u128>> {
    if s > k {
        return Err(Error::SubsetTooLarge { s, k });
    }
    if k > 60 || s > 30 {
        return Err(Error::OutOfRange(format!("k = {k}, s = {s}")));
    }
    let s64 = s as u64;
    let mut zeros: u128 = 0;
    for ka in 0..=s64 {
        for kb in 0..=s64 {
            for i in 0..=ka.min(kb) {
                if (i + ka * kb) % 2 == 0 {
                    zeros += binomial(s64, ka) * binomial(ka, i) * binomial(s64 - ka, kb - i);
                }
            }
        }
    }
    let total = 1u128 << (2 * s);
    let b_set = Ratio::new((2 * zeros).abs_diff(total), 2 * total);
    let b_plain = Ratio::new(1u128, 1u128 << (k - s + 1));
    Ok(Ratio::from_integer(2) * b_set * b_plain)
}

/// Whether some `h` makes `f(a) ⊕ g(b) ⊕ h(c)` constant on each of the two
/// cosets `{a ⊕ b ⊕ c = p}`.
pub fn constant_balanced_check(f: OneBitFn, g: OneBitFn) -> bool {
    OneBitFn::ALL.iter().any(|&h| {
        [false, true].iter().all(|&p| {
            let values: Vec<bool> = (0..8u8)
                .filter(|abc| (abc.count_ones() % 2 == 1) == p)
                .map(|abc| f.apply(abc & 4 != 0) ^ g.apply(abc & 2 != 0) ^ h.apply(abc & 1 != 0))
                .collect();
            values.iter().all(|&x| x == values[0])
        })
    })
}
