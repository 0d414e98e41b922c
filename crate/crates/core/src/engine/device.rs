//! Device behaviour per round and the isolation audit.
//!
//! A box rule only sees the world through a [`BoxView`]. The engine hands
//! each box a view restricted to its own data; the audit replays every rule
//! against a recording view and rejects any access outside that set.

use std::cell::RefCell;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::game::{BoxId, OneBitFn, RoundInput, RoundOutput};
use crate::quantum::honest_table;
use crate::source::SourceTree;

/// What a single box may ask about while producing its output.
pub trait BoxView {
    fn box_id(&self) -> BoxId;
    /// Zero-based index of the round being played.
    fn round(&self) -> usize;
    fn own_input(&self) -> bool;
    /// This box's output in an earlier round.
    fn own_output(&self, round: usize) -> bool;
    /// Another box's current input. Never available to an isolated box.
    fn peer_input(&self, peer: BoxId) -> bool;
}

/// Classical response rule of one box.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoxRule {
    /// `f(own input)`.
    Local(OneBitFn),
    /// `⊕_{r ∈ rounds} own output in r ⊕ residual(own input)`.
    XorSet { rounds: Vec<usize>, residual: OneBitFn },
    /// Reads a peer's current input. Violates isolation; kept so the audit
    /// has something to reject.
    PeerInput { peer: BoxId, residual: OneBitFn },
}

impl BoxRule {
    /// Repeat the box's own output from `round`.
    pub fn resend(round: usize) -> Self {
        BoxRule::XorSet {
            rounds: vec![round],
            residual: OneBitFn::Zero,
        }
    }

    pub fn evaluate<V: BoxView + ?Sized>(&self, view: &V) -> bool {
        match self {
            BoxRule::Local(f) => f.apply(view.own_input()),
            BoxRule::XorSet { rounds, residual } => rounds
                .iter()
                .fold(residual.apply(view.own_input()), |acc, &r| acc ^ view.own_output(r)),
            BoxRule::PeerInput { peer, residual } => residual.apply(view.peer_input(*peer)),
        }
    }

    /// Earlier rounds whose outputs this rule reads.
    pub fn referenced_rounds(&self) -> &[usize] {
        match self {
            BoxRule::XorSet { rounds, .. } => rounds,
            _ => &[],
        }
    }
}

/// Behaviour of the three boxes in one round.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RoundPlay {
    /// Measure the shared GHZ state.
    Honest,
    Classical([BoxRule; 3]),
}

impl RoundPlay {
    pub fn local(strategy: crate::game::LocalStrategy) -> Self {
        RoundPlay::Classical(strategy.boxes.map(BoxRule::Local))
    }

    /// Bitmask of earlier rounds read by any box.
    pub fn reference_mask(&self) -> u64 {
        match self {
            RoundPlay::Honest => 0,
            RoundPlay::Classical(rules) => rules
                .iter()
                .flat_map(|r| r.referenced_rounds())
                .fold(0, |m, &r| m | 1u64.checked_shl(r as u32).unwrap_or(0)),
        }
    }

    /// Output of a classical play; `history[r]` holds round `r`'s outputs.
    pub fn respond(
        rules: &[BoxRule; 3],
        round: usize,
        input: RoundInput,
        history: &[RoundOutput],
    ) -> RoundOutput {
        let bit = |who: BoxId| {
            rules[who.index()].evaluate(&EngineView {
                who,
                round,
                input,
                history,
            })
        };
        RoundOutput::new(bit(BoxId::A), bit(BoxId::B), bit(BoxId::C))
    }
}

/// Device plan: one play per round, or one per source-tree vertex.
#[derive(Clone, Debug, PartialEq)]
pub enum Devices {
    PerRound(Vec<RoundPlay>),
    /// Indexed by vertex id of the source tree; leaves carry `None`.
    PerVertex(Vec<Option<RoundPlay>>),
}

impl Devices {
    pub fn honest(rounds: usize) -> Self {
        Devices::PerRound(vec![RoundPlay::Honest; rounds])
    }
}

pub(crate) struct EngineView<'a> {
    pub who: BoxId,
    pub round: usize,
    pub input: RoundInput,
    pub history: &'a [RoundOutput],
}

impl BoxView for EngineView<'_> {
    fn box_id(&self) -> BoxId {
        self.who
    }

    fn round(&self) -> usize {
        self.round
    }

    fn own_input(&self) -> bool {
        self.who.input(self.input)
    }

    fn own_output(&self, round: usize) -> bool {
        self.history[round].get(self.who)
    }

    fn peer_input(&self, peer: BoxId) -> bool {
        peer.input(self.input)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Access {
    OwnInput,
    OwnOutput(usize),
    PeerInput(BoxId),
}

struct RecordingView {
    who: BoxId,
    round: usize,
    input: bool,
    log: RefCell<Vec<Access>>,
}

impl BoxView for RecordingView {
    fn box_id(&self) -> BoxId {
        self.who
    }

    fn round(&self) -> usize {
        self.round
    }

    fn own_input(&self) -> bool {
        self.log.borrow_mut().push(Access::OwnInput);
        self.input
    }

    fn own_output(&self, round: usize) -> bool {
        self.log.borrow_mut().push(Access::OwnOutput(round));
        false
    }

    fn peer_input(&self, peer: BoxId) -> bool {
        self.log.borrow_mut().push(Access::PeerInput(peer));
        false
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub violations: Vec<String>,
}

impl AuditReport {
    pub fn is_compliant(&self) -> bool {
        self.violations.is_empty()
    }
}

fn audit_rules(rules: &[BoxRule; 3], round: usize, report: &mut AuditReport) {
    for who in BoxId::ALL {
        for input in [false, true] {
            let view = RecordingView {
                who,
                round,
                input,
                log: RefCell::new(Vec::new()),
            };
            rules[who.index()].evaluate(&view);
            for access in view.log.into_inner() {
                match access {
                    Access::OwnInput => {}
                    Access::OwnOutput(r) if r < round => {}
                    Access::OwnOutput(r) => report.violations.push(format!(
                        "round {round}: box {who:?} reads its output from round {r}"
                    )),
                    Access::PeerInput(p) => report.violations.push(format!(
                        "round {round}: box {who:?} reads the input of box {p:?}"
                    )),
                }
            }
        }
    }
}

/// Checks that every box acts on its own inputs and outputs only.
///
/// For per-vertex plans the choice of play must also be a function of what
/// the box has seen: two vertices at the same depth with the same history of
/// the box's own inputs must give it the same behaviour.
pub fn device_isolation_audit(devices: &Devices, tree: Option<&SourceTree>) -> AuditReport {
    let mut report = AuditReport::default();
    let mut honest_seen = false;
    match devices {
        Devices::PerRound(plays) => {
            for (round, play) in plays.iter().enumerate() {
                match play {
                    RoundPlay::Honest => honest_seen = true,
                    RoundPlay::Classical(rules) => audit_rules(rules, round, &mut report),
                }
            }
        }
        Devices::PerVertex(plays) => {
            let Some(tree) = tree else {
                report
                    .violations
                    .push("per-vertex plan without a source tree".into());
                return report;
            };
            if plays.len() != tree.len() {
                report.violations.push(format!(
                    "plan covers {} vertices, tree has {}",
                    plays.len(),
                    tree.len()
                ));
                return report;
            }
            // (box, depth, own input history) -> behaviour of that box
            let mut seen: HashMap<(usize, usize, u64), (Option<&BoxRule>, usize)> = HashMap::new();
            for v in 0..tree.len() {
                if tree.is_leaf(v) {
                    continue;
                }
                let Some(play) = &plays[v] else {
                    report.violations.push(format!("vertex {v} has no play"));
                    continue;
                };
                let depth = tree.depth(v);
                if let RoundPlay::Classical(rules) = play {
                    audit_rules(rules, depth, &mut report);
                } else {
                    honest_seen = true;
                }
                let path = tree.path(v);
                for who in BoxId::ALL {
                    let history = path.iter().fold(0u64, |h, &label| {
                        h << 1 | who.input(RoundInput::from_pair(label)) as u64
                    });
                    let rule = match play {
                        RoundPlay::Honest => None,
                        RoundPlay::Classical(rules) => Some(&rules[who.index()]),
                    };
                    match seen.get(&(who.index(), depth, history)) {
                        None => {
                            seen.insert((who.index(), depth, history), (rule, v));
                        }
                        Some(&(prev, u)) if prev != rule => report.violations.push(format!(
                            "box {who:?} behaves differently at vertices {u} and {v} \
                             although its own inputs agree"
                        )),
                        Some(_) => {}
                    }
                }
            }
        }
    }
    if honest_seen && !honest_table().is_no_signaling() {
        report
            .violations
            .push("honest correlation table is signaling".into());
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{LocalStrategy, PairLabel};

    #[test]
    fn honest_and_local_plans_pass() {
        assert!(device_isolation_audit(&Devices::honest(4), None).is_compliant());
        let plays = vec![
            RoundPlay::Honest,
            RoundPlay::Classical([BoxRule::resend(0), BoxRule::resend(0), BoxRule::resend(0)]),
            RoundPlay::local(LocalStrategy::ALL_ZERO),
        ];
        assert!(device_isolation_audit(&Devices::PerRound(plays), None).is_compliant());
    }

    #[test]
    fn peer_input_is_rejected() {
        let rules = [
            BoxRule::PeerInput {
                peer: BoxId::B,
                residual: OneBitFn::Identity,
            },
            BoxRule::Local(OneBitFn::Zero),
            BoxRule::Local(OneBitFn::Zero),
        ];
        let report = device_isolation_audit(&Devices::PerRound(vec![RoundPlay::Classical(rules)]), None);
        assert!(!report.is_compliant());
        assert!(report.violations[0].contains("input of box B"));
    }

    #[test]
    fn future_reference_is_rejected() {
        let rules = [BoxRule::resend(1), BoxRule::resend(0), BoxRule::resend(0)];
        let plays = vec![RoundPlay::Honest, RoundPlay::Classical(rules)];
        assert!(!device_isolation_audit(&Devices::PerRound(plays), None).is_compliant());
    }

    #[test]
    fn vertex_choice_must_depend_on_own_inputs() {
        let tree = SourceTree::uniform(2).unwrap();
        let mut plays: Vec<Option<RoundPlay>> = vec![None; tree.len()];
        plays[tree.root()] = Some(RoundPlay::Honest);
        for v in tree.children(tree.root()) {
            plays[v] = Some(RoundPlay::Honest);
        }
        let devices = Devices::PerVertex(plays.clone());
        assert!(device_isolation_audit(&devices, Some(&tree)).is_compliant());

        // Box A sees r1 = 0 after both "00" and "01"; switching on r2 leaks B's input.
        let v00 = tree.find(&[PairLabel::new(0).unwrap()]).unwrap();
        plays[v00] = Some(RoundPlay::local(LocalStrategy::ALL_ZERO));
        let report = device_isolation_audit(&Devices::PerVertex(plays), Some(&tree));
        assert!(!report.is_compliant());
    }

    #[test]
    fn resend_repeats_own_bit() {
        let history = [RoundOutput::new(true, false, true)];
        let rules = [BoxRule::resend(0), BoxRule::resend(0), BoxRule::resend(0)];
        let input = RoundInput::ALL[0];
        assert_eq!(RoundPlay::respond(&rules, 1, input, &history), history[0]);
        let play = RoundPlay::Classical(rules);
        assert_eq!(play.reference_mask(), 1);
    }
}
