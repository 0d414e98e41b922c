//! Protocol runs: feed source pairs to the devices round by round, abort on
//! the first lost round, otherwise output `⊕_i (a_i ∧ b_i)`.
//!
//! Exact runs fold the source tree depth first. Each vertex carries the
//! joint distribution of (outputs of rounds that later rules still read,
//! running output bit), so memoryless devices cost one entry per vertex.

mod device;
mod transcript;

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use device::{
    device_isolation_audit, AuditReport, BoxRule, BoxView, Devices, RoundPlay,
};
pub use transcript::{write_transcripts_csv, RoundRecord, Terminal, Transcript};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::game::{sample_row, win, PairLabel, RoundInput, RoundOutput};
use crate::quantum::honest_table;
use crate::source::{CondDistribution, SourceTree, VertexId, ENUMERATION_CAP};

/// Deepest protocol the exact fold accepts.
pub const MAX_EXACT_ROUNDS: usize = 16;

/// Trials per Monte Carlo batch; batch `b` uses ChaCha stream `b`.
pub const BATCH_TRIALS: u64 = 4096;

/// Levels of the tree whose subtrees are folded in parallel.
const PARALLEL_DEPTH: usize = 2;

#[derive(Clone, Debug, PartialEq)]
pub enum Source {
    Tree(SourceTree),
    /// Explicit table over `2n`-bit strings.
    Table(CondDistribution),
    /// Every bit independently 0 with probability `p_zero`.
    Iid { rounds: usize, p_zero: f64 },
}

impl Source {
    pub fn uniform(rounds: usize) -> Self {
        Source::Iid {
            rounds,
            p_zero: 0.5,
        }
    }

    pub fn rounds(&self) -> usize {
        match self {
            Source::Tree(t) => t.rounds(),
            Source::Table(d) => d.n_bits() / 2,
            Source::Iid { rounds, .. } => *rounds,
        }
    }

    fn exact_tree(&self) -> Result<std::borrow::Cow<'_, SourceTree>> {
        use std::borrow::Cow;
        match self {
            Source::Tree(t) => Ok(Cow::Borrowed(t)),
            Source::Table(d) => Ok(Cow::Owned(d.to_tree()?)),
            Source::Iid { rounds, p_zero } => {
                let bits = 2 * rounds;
                if bits > ENUMERATION_CAP {
                    return Err(Error::CapExceeded {
                        bits,
                        cap: ENUMERATION_CAP,
                    });
                }
                let leaves = (0..1u64 << bits)
                    .map(|x| {
                        let ones = x.count_ones() as i32;
                        let w = p_zero.powi(bits as i32 - ones) * (1.0 - p_zero).powi(ones);
                        (x, w)
                    })
                    .filter(|&(_, w)| w > 0.0)
                    .collect();
                Ok(Cow::Owned(SourceTree::from_leaves(*rounds, leaves)?))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProtocolConfig {
    source: Source,
    devices: Devices,
}

impl ProtocolConfig {
    pub fn new(source: Source, devices: Devices) -> Result<Self> {
        let n = source.rounds();
        if n == 0 {
            return Err(Error::InvalidConfig("protocol needs at least one round".into()));
        }
        match &source {
            Source::Table(d) if d.n_bits() % 2 != 0 => {
                return Err(Error::InvalidConfig(format!(
                    "{}-bit table does not split into pairs",
                    d.n_bits()
                )))
            }
            Source::Iid { p_zero, .. } if !(0.0..=1.0).contains(p_zero) => {
                return Err(Error::InvalidConfig(format!("p_zero = {p_zero}")))
            }
            _ => {}
        }
        let check_refs = |play: &RoundPlay, round: usize| -> Result<()> {
            let mask = play.reference_mask();
            let late = match &play {
                RoundPlay::Classical(rules) => rules
                    .iter()
                    .flat_map(|r| r.referenced_rounds())
                    .any(|&r| r >= round),
                RoundPlay::Honest => false,
            };
            if late || mask >> round.min(63) != 0 {
                return Err(Error::InvalidConfig(format!(
                    "round {round} reads a round that has not been played"
                )));
            }
            Ok(())
        };
        match &devices {
            Devices::PerRound(plays) => {
                if plays.len() != n {
                    return Err(Error::InvalidConfig(format!(
                        "{} plays for {n} rounds",
                        plays.len()
                    )));
                }
                for (r, p) in plays.iter().enumerate() {
                    check_refs(p, r)?;
                }
            }
            Devices::PerVertex(plays) => {
                let Source::Tree(tree) = &source else {
                    return Err(Error::InvalidConfig(
                        "per-vertex devices need a tree source".into(),
                    ));
                };
                if plays.len() != tree.len() {
                    return Err(Error::InvalidConfig(format!(
                        "{} plays for {} vertices",
                        plays.len(),
                        tree.len()
                    )));
                }
                for v in 0..tree.len() {
                    match (&plays[v], tree.is_leaf(v)) {
                        (Some(p), false) => check_refs(p, tree.depth(v))?,
                        (None, true) => {}
                        (None, false) => {
                            return Err(Error::InvalidConfig(format!("vertex {v} has no play")))
                        }
                        (Some(_), true) => {
                            return Err(Error::InvalidConfig(format!("leaf {v} has a play")))
                        }
                    }
                }
            }
        }
        Ok(Self { source, devices })
    }

    pub fn honest(source: Source) -> Result<Self> {
        let n = source.rounds();
        Self::new(source, Devices::honest(n))
    }

    pub fn rounds(&self) -> usize {
        self.source.rounds()
    }

    pub fn source(&self) -> &Source {
        &self.source
    }

    pub fn devices(&self) -> &Devices {
        &self.devices
    }

    fn play_at(&self, vertex: VertexId, depth: usize) -> &RoundPlay {
        match &self.devices {
            Devices::PerRound(plays) => &plays[depth],
            Devices::PerVertex(plays) => plays[vertex].as_ref().expect("validated plan"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Exact,
    #[serde(rename = "mc")]
    MonteCarlo,
}

/// Outcome of a protocol run. `bias` is `|P(O=0 | completed) − 1/2|` and is
/// absent when the protocol never completes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub mode: Mode,
    pub n: usize,
    pub abort_prob: f64,
    pub bias: Option<f64>,
    pub completion_prob: f64,
    pub trials_or_leaves: u64,
    pub seed: Option<u64>,
    pub p_zero_given_completion: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub abort_stderr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bias_stderr: Option<f64>,
    pub generator: String,
    #[serde(skip)]
    pub wall_time: Duration,
}

impl RunReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
struct Tally {
    abort: f64,
    out: [f64; 2],
}

impl Tally {
    fn add(&mut self, other: Tally) {
        self.abort += other.abort;
        self.out[0] += other.out[0];
        self.out[1] += other.out[1];
    }
}

type Memory = Vec<(u64, [f64; 2])>;

struct ExactFold<'a> {
    cfg: &'a ProtocolConfig,
    tree: &'a SourceTree,
    /// Earlier rounds still read somewhere below each vertex.
    live: Vec<u64>,
    exec: Execution,
}

fn pack(live: u64, history: &[RoundOutput]) -> u64 {
    let mut mem = 0;
    let mut slot = 0;
    let mut bits = live;
    while bits != 0 {
        let r = bits.trailing_zeros() as usize;
        mem |= (history[r].index() as u64) << (3 * slot);
        slot += 1;
        bits &= bits - 1;
    }
    mem
}

fn unpack(live: u64, mem: u64, history: &mut [RoundOutput]) {
    let mut slot = 0;
    let mut bits = live;
    while bits != 0 {
        let r = bits.trailing_zeros() as usize;
        history[r] = RoundOutput::from_index((mem >> (3 * slot) & 7) as usize);
        slot += 1;
        bits &= bits - 1;
    }
}

impl<'a> ExactFold<'a> {
    fn new(cfg: &'a ProtocolConfig, tree: &'a SourceTree, exec: Execution) -> Self {
        let mut need = vec![0u64; tree.len()];
        for v in (0..tree.len()).rev() {
            if tree.is_leaf(v) {
                continue;
            }
            let mut mask = cfg.play_at(v, tree.depth(v)).reference_mask();
            for c in tree.children(v) {
                mask |= need[c];
            }
            need[v] = mask;
        }
        let live = (0..tree.len())
            .map(|v| need[v] & ((1u64 << tree.depth(v)) - 1))
            .collect();
        Self {
            cfg,
            tree,
            live,
            exec,
        }
    }

    fn child(&self, v: VertexId, c: VertexId, dist: &Memory) -> Tally {
        let tree = self.tree;
        let depth = tree.depth(v);
        let p = tree.edge_prob(c);
        let input = RoundInput::from_pair(tree.label(c));
        let (live_v, live_c) = (self.live[v], self.live[c]);
        let mut next: BTreeMap<u64, [f64; 2]> = BTreeMap::new();
        let mut abort = 0.0;
        let mut history = [RoundOutput::default(); MAX_EXACT_ROUNDS];
        let mut push = |history: &mut [RoundOutput], o: RoundOutput, w: f64, m: [f64; 2]| {
            if !win(input, o) {
                abort += w * (m[0] + m[1]);
                return;
            }
            history[depth] = o;
            let slot = next.entry(pack(live_c, history)).or_insert([0.0; 2]);
            let flip = (o.a & o.b) as usize;
            slot[flip] += w * m[0];
            slot[1 - flip] += w * m[1];
        };
        match self.cfg.play_at(v, depth) {
            RoundPlay::Honest => {
                let row = honest_table().row(input);
                for &(mem, m) in dist {
                    unpack(live_v, mem, &mut history);
                    for (k, &q) in row.iter().enumerate() {
                        if q > 0.0 {
                            push(&mut history, RoundOutput::from_index(k), p * q, m);
                        }
                    }
                }
            }
            RoundPlay::Classical(rules) => {
                for &(mem, m) in dist {
                    unpack(live_v, mem, &mut history);
                    let o = RoundPlay::respond(rules, depth, input, &history);
                    push(&mut history, o, p, m);
                }
            }
        }
        let mut tally = self.fold(c, next.into_iter().collect());
        tally.abort += abort;
        tally
    }

    fn fold(&self, v: VertexId, dist: Memory) -> Tally {
        let tree = self.tree;
        if tree.is_leaf(v) {
            let mut t = Tally::default();
            for (_, m) in dist {
                t.out[0] += m[0];
                t.out[1] += m[1];
            }
            return t;
        }
        let children: Vec<VertexId> = tree.children(v).collect();
        let exec = if tree.depth(v) < PARALLEL_DEPTH {
            self.exec
        } else {
            Execution::Sequential
        };
        let parts = exec.map_slice(&children, |&c| self.child(v, c, &dist));
        let mut total = Tally::default();
        for t in parts {
            total.add(t);
        }
        total
    }
}

fn summarize(
    mode: Mode,
    n: usize,
    tally: Tally,
    count: u64,
    seed: Option<u64>,
    generator: &str,
    started: Instant,
) -> RunReport {
    let completion = tally.out[0] + tally.out[1];
    let p_zero = (completion > 0.0).then(|| tally.out[0] / completion);
    RunReport {
        mode,
        n,
        abort_prob: tally.abort,
        bias: p_zero.map(|p| (p - 0.5).abs()),
        completion_prob: completion,
        trials_or_leaves: count,
        seed,
        p_zero_given_completion: p_zero,
        abort_stderr: None,
        bias_stderr: None,
        generator: generator.into(),
        wall_time: started.elapsed(),
    }
}

/// Exact abort probability and output distribution by folding the tree.
pub fn run_exact(cfg: &ProtocolConfig, exec: Execution) -> Result<RunReport> {
    let started = Instant::now();
    let n = cfg.rounds();
    if n > MAX_EXACT_ROUNDS {
        return Err(Error::OutOfRange(format!(
            "exact runs support at most {MAX_EXACT_ROUNDS} rounds, got {n}"
        )));
    }
    let tree = cfg.source.exact_tree()?;
    let fold = ExactFold::new(cfg, &tree, exec);
    let tally = fold.fold(tree.root(), vec![(0, [1.0, 0.0])]);
    Ok(summarize(
        Mode::Exact,
        n,
        tally,
        tree.leaf_count() as u64,
        None,
        "engine::run_exact",
        started,
    ))
}

/// Draws pairs from a source one round at a time.
enum Sampler<'a> {
    Tree(&'a SourceTree),
    Table { dist: &'a CondDistribution, cdf: Vec<f64> },
    Iid(f64),
}

impl<'a> Sampler<'a> {
    fn new(source: &'a Source) -> Self {
        match source {
            Source::Tree(t) => Sampler::Tree(t),
            Source::Table(d) => {
                let mut acc = 0.0;
                let cdf = d
                    .entries()
                    .iter()
                    .map(|&(_, p)| {
                        acc += p;
                        acc
                    })
                    .collect();
                Sampler::Table { dist: d, cdf }
            }
            Source::Iid { p_zero, .. } => Sampler::Iid(*p_zero),
        }
    }
}

struct Trial<'a> {
    cfg: &'a ProtocolConfig,
    sampler: &'a Sampler<'a>,
    history: Vec<RoundOutput>,
}

impl Trial<'_> {
    fn run<R: Rng>(&mut self, rng: &mut R, mut record: Option<&mut Vec<RoundRecord>>) -> Terminal {
        let n = self.cfg.rounds();
        self.history.clear();
        let mut vertex = 0;
        let table_draw = match self.sampler {
            Sampler::Table { dist, cdf } => {
                let u: f64 = rng.random();
                let i = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
                Some(dist.entries()[i].0)
            }
            _ => None,
        };
        let mut output = false;
        for round in 0..n {
            let (pair, here) = match self.sampler {
                Sampler::Tree(tree) => {
                    let u: f64 = rng.random();
                    let mut acc = 0.0;
                    let mut pick = tree.children(vertex).end - 1;
                    for c in tree.children(vertex) {
                        acc += tree.edge_prob(c);
                        if u < acc {
                            pick = c;
                            break;
                        }
                    }
                    let here = vertex;
                    vertex = pick;
                    (tree.label(pick), here)
                }
                Sampler::Table { .. } => {
                    let x = table_draw.unwrap();
                    let shift = 2 * (n - 1 - round);
                    (PairLabel::new((x >> shift & 3) as u8).unwrap(), 0)
                }
                Sampler::Iid(p_zero) => {
                    let r1 = rng.random::<f64>() >= *p_zero;
                    let r2 = rng.random::<f64>() >= *p_zero;
                    (PairLabel::from_bits(r1, r2), 0)
                }
            };
            let input = RoundInput::from_pair(pair);
            let o = match self.cfg.play_at(here, round) {
                RoundPlay::Honest => sample_row(honest_table().row(input), rng),
                RoundPlay::Classical(rules) => {
                    RoundPlay::respond(rules, round, input, &self.history)
                }
            };
            let won = win(input, o);
            if let Some(rec) = record.as_deref_mut() {
                rec.push(RoundRecord {
                    round,
                    pair,
                    input,
                    output: o,
                    win: won,
                });
            }
            if !won {
                return Terminal::Aborted { round };
            }
            output ^= o.a & o.b;
            self.history.push(o);
        }
        Terminal::Completed { output }
    }
}

fn check_mc(cfg: &ProtocolConfig) -> Result<()> {
    if matches!(cfg.devices, Devices::PerVertex(_)) && !matches!(cfg.source, Source::Tree(_)) {
        return Err(Error::InvalidConfig("per-vertex devices need a tree source".into()));
    }
    Ok(())
}

fn batch_rng(seed: u64, batch: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(batch);
    rng
}

/// Monte Carlo estimate over `trials` independent runs. Counts are integers
/// and batches have fixed seeds, so the report does not depend on `exec`.
pub fn run_montecarlo(
    cfg: &ProtocolConfig,
    trials: u64,
    seed: u64,
    exec: Execution,
) -> Result<RunReport> {
    let started = Instant::now();
    if trials == 0 {
        return Err(Error::ZeroTrials);
    }
    check_mc(cfg)?;
    let sampler = Sampler::new(&cfg.source);
    let batches = trials.div_ceil(BATCH_TRIALS);
    let counts = exec.map_range(batches as usize, |b| {
        let b = b as u64;
        let len = BATCH_TRIALS.min(trials - b * BATCH_TRIALS);
        let mut rng = batch_rng(seed, b);
        let mut trial = Trial {
            cfg,
            sampler: &sampler,
            history: Vec::with_capacity(cfg.rounds()),
        };
        let mut c = [0u64; 3];
        for _ in 0..len {
            match trial.run(&mut rng, None) {
                Terminal::Aborted { .. } => c[2] += 1,
                Terminal::Completed { output } => c[output as usize] += 1,
            }
        }
        c
    });
    let [zeros, ones, aborts] = counts.iter().fold([0u64; 3], |acc, c| {
        [acc[0] + c[0], acc[1] + c[1], acc[2] + c[2]]
    });
    let total = trials as f64;
    let tally = Tally {
        abort: aborts as f64 / total,
        out: [zeros as f64 / total, ones as f64 / total],
    };
    let mut report = summarize(
        Mode::MonteCarlo,
        cfg.rounds(),
        tally,
        trials,
        Some(seed),
        "engine::run_montecarlo",
        started,
    );
    let pa = tally.abort;
    report.abort_stderr = Some((pa * (1.0 - pa) / total).sqrt());
    let completed = zeros + ones;
    if completed > 0 {
        let p0 = zeros as f64 / completed as f64;
        report.p_zero_given_completion = Some(p0);
        report.bias = Some((p0 - 0.5).abs());
        report.bias_stderr = Some((p0 * (1.0 - p0) / completed as f64).sqrt());
    }
    Ok(report)
}

/// Transcripts of the first `count` trials of a Monte Carlo run with `seed`.
pub fn sample_transcripts(cfg: &ProtocolConfig, count: u64, seed: u64) -> Result<Vec<Transcript>> {
    check_mc(cfg)?;
    let sampler = Sampler::new(&cfg.source);
    let mut trial = Trial {
        cfg,
        sampler: &sampler,
        history: Vec::with_capacity(cfg.rounds()),
    };
    let mut out = Vec::with_capacity(count as usize);
    for b in 0..count.div_ceil(BATCH_TRIALS) {
        let mut rng = batch_rng(seed, b);
        for _ in 0..BATCH_TRIALS.min(count - b * BATCH_TRIALS) {
            let mut rounds = Vec::with_capacity(cfg.rounds());
            let terminal = trial.run(&mut rng, Some(&mut rounds));
            out.push(Transcript { rounds, terminal });
        }
    }
    Ok(out)
}

pub fn run(cfg: &ProtocolConfig, mode: Mode, trials: u64, seed: u64, exec: Execution) -> Result<RunReport> {
    match mode {
        Mode::Exact => run_exact(cfg, exec),
        Mode::MonteCarlo => run_montecarlo(cfg, trials, seed, exec),
    }
}
