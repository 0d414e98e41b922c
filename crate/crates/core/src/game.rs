//! The three-box GHZ game: legal inputs, the win predicate, classical
//! strategies and the honest quantum sampler.

use std::fmt;

use num_rational::Ratio;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::quantum::honest_table;

/// Two source bits `r1 r2` consumed by one round, stored as `2*r1 + r2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct PairLabel(u8);

impl PairLabel {
    pub const ALL: [PairLabel; 4] = [PairLabel(0), PairLabel(1), PairLabel(2), PairLabel(3)];

    pub fn new(value: u8) -> Option<Self> {
        (value < 4).then_some(Self(value))
    }

    pub fn from_bits(r1: bool, r2: bool) -> Self {
        Self(((r1 as u8) << 1) | r2 as u8)
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn r1(self) -> bool {
        self.0 & 2 != 0
    }

    pub fn r2(self) -> bool {
        self.0 & 1 != 0
    }
}

impl fmt::Display for PairLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:02b}", self.0)
    }
}

impl TryFrom<&str> for PairLabel {
    type Error = String;

    fn try_from(s: &str) -> Result<Self, Self::Error> {
        match s {
            "00" => Ok(Self(0)),
            "01" => Ok(Self(1)),
            "10" => Ok(Self(2)),
            "11" => Ok(Self(3)),
            other => Err(format!("pair label must be two bits, got {other:?}")),
        }
    }
}

impl TryFrom<String> for PairLabel {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        Self::try_from(s.as_str())
    }
}

impl From<PairLabel> for String {
    fn from(label: PairLabel) -> String {
        label.to_string()
    }
}

/// A legal GHZ input `xyz ∈ {111, 001, 010, 100}`.
///
/// Only constructible from a source pair (`x = r1`, `y = r2`,
/// `z = r1 ⊕ r2 ⊕ 1`) or from bits already in the legal set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct RoundInput {
    pair: PairLabel,
}

impl RoundInput {
    /// Legal inputs ordered 111, 001, 010, 100.
    pub const ALL: [RoundInput; 4] = [
        RoundInput { pair: PairLabel(3) },
        RoundInput { pair: PairLabel(0) },
        RoundInput { pair: PairLabel(1) },
        RoundInput { pair: PairLabel(2) },
    ];

    pub fn from_pair(pair: PairLabel) -> Self {
        Self { pair }
    }

    pub fn from_bits(x: bool, y: bool, z: bool) -> Option<Self> {
        (z == !(x ^ y)).then(|| Self::from_pair(PairLabel::from_bits(x, y)))
    }

    pub fn pair(self) -> PairLabel {
        self.pair
    }

    pub fn x(self) -> bool {
        self.pair.r1()
    }

    pub fn y(self) -> bool {
        self.pair.r2()
    }

    pub fn z(self) -> bool {
        !(self.x() ^ self.y())
    }

    pub fn bits(self) -> [bool; 3] {
        [self.x(), self.y(), self.z()]
    }

    /// `x ∧ y ∧ z`, the parity the outputs must reproduce.
    pub fn and(self) -> bool {
        self.x() && self.y() && self.z()
    }

    /// Position in [`RoundInput::ALL`].
    pub fn ordinal(self) -> usize {
        match self.pair.0 {
            3 => 0,
            0 => 1,
            1 => 2,
            _ => 3,
        }
    }
}

impl fmt::Display for RoundInput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [x, y, z] = self.bits();
        write!(f, "{}{}{}", x as u8, y as u8, z as u8)
    }
}

impl From<RoundInput> for String {
    fn from(input: RoundInput) -> String {
        input.to_string()
    }
}

impl TryFrom<String> for RoundInput {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        let bits: Vec<bool> = s
            .bytes()
            .map(|b| match b {
                b'0' => Ok(false),
                b'1' => Ok(true),
                _ => Err(format!("{s:?} is not a bit string")),
            })
            .collect::<Result<_, _>>()?;
        match bits[..] {
            [x, y, z] => RoundInput::from_bits(x, y, z).ok_or_else(|| format!("{s} is not a legal input")),
            _ => Err(format!("{s:?} is not three bits")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct RoundOutput {
    pub a: bool,
    pub b: bool,
    pub c: bool,
}

impl RoundOutput {
    pub fn new(a: bool, b: bool, c: bool) -> Self {
        Self { a, b, c }
    }

    /// Inverse of [`RoundOutput::index`].
    pub fn from_index(index: usize) -> Self {
        Self {
            a: index & 4 != 0,
            b: index & 2 != 0,
            c: index & 1 != 0,
        }
    }

    pub fn index(self) -> usize {
        ((self.a as usize) << 2) | ((self.b as usize) << 1) | self.c as usize
    }

    pub fn parity(self) -> bool {
        self.a ^ self.b ^ self.c
    }

    pub fn get(self, which: BoxId) -> bool {
        match which {
            BoxId::A => self.a,
            BoxId::B => self.b,
            BoxId::C => self.c,
        }
    }
}

impl fmt::Display for RoundOutput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}{}", self.a as u8, self.b as u8, self.c as u8)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BoxId {
    A,
    B,
    C,
}

impl BoxId {
    pub const ALL: [BoxId; 3] = [BoxId::A, BoxId::B, BoxId::C];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn input(self, input: RoundInput) -> bool {
        input.bits()[self.index()]
    }
}

/// `a ⊕ b ⊕ c = x ∧ y ∧ z`.
pub fn win(input: RoundInput, output: RoundOutput) -> bool {
    output.parity() == input.and()
}

/// The four functions from one bit to one bit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OneBitFn {
    Zero,
    One,
    Identity,
    Negation,
}

impl OneBitFn {
    pub const ALL: [OneBitFn; 4] = [
        OneBitFn::Zero,
        OneBitFn::One,
        OneBitFn::Identity,
        OneBitFn::Negation,
    ];

    pub fn apply(self, bit: bool) -> bool {
        match self {
            OneBitFn::Zero => false,
            OneBitFn::One => true,
            OneBitFn::Identity => bit,
            OneBitFn::Negation => !bit,
        }
    }

    pub fn is_constant(self) -> bool {
        matches!(self, OneBitFn::Zero | OneBitFn::One)
    }

    pub fn is_balanced(self) -> bool {
        !self.is_constant()
    }

    /// Lookup table form `[f(0), f(1)]`.
    pub fn table(self) -> [bool; 2] {
        [self.apply(false), self.apply(true)]
    }
}

/// A deterministic classical strategy: one input-to-output table per box.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LocalStrategy {
    pub boxes: [OneBitFn; 3],
}

impl LocalStrategy {
    pub const ALL_ZERO: LocalStrategy = LocalStrategy {
        boxes: [OneBitFn::Zero; 3],
    };

    pub fn new(a: OneBitFn, b: OneBitFn, c: OneBitFn) -> Self {
        Self { boxes: [a, b, c] }
    }

    /// All 64 deterministic strategies.
    pub fn all() -> impl Iterator<Item = LocalStrategy> {
        OneBitFn::ALL.into_iter().flat_map(|a| {
            OneBitFn::ALL.into_iter().flat_map(move |b| {
                OneBitFn::ALL
                    .into_iter()
                    .map(move |c| LocalStrategy::new(a, b, c))
            })
        })
    }

    pub fn respond(&self, input: RoundInput) -> RoundOutput {
        let [x, y, z] = input.bits();
        RoundOutput::new(
            self.boxes[0].apply(x),
            self.boxes[1].apply(y),
            self.boxes[2].apply(z),
        )
    }

    pub fn wins(&self, input: RoundInput) -> bool {
        win(input, self.respond(input))
    }

    /// Fraction of the four legal inputs won, as an exact rational.
    pub fn score(&self) -> Ratio<u32> {
        let wins = RoundInput::ALL.iter().filter(|&&i| self.wins(i)).count() as u32;
        Ratio::new(wins, 4)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassicalValue {
    pub max: Ratio<u32>,
    pub maximizers: Vec<LocalStrategy>,
    pub scored: usize,
}

/// Exhaustive maximum over deterministic strategies.
///
/// Shared randomness only mixes deterministic strategies, and a mixture's
/// winning probability is the average of its components, so this is also the
/// classical value of the game.
pub fn classical_win_value() -> ClassicalValue {
    let mut max = Ratio::new(0, 1);
    let mut maximizers = Vec::new();
    let mut scored = 0;
    for strategy in LocalStrategy::all() {
        scored += 1;
        let score = strategy.score();
        if score > max {
            max = score;
            maximizers.clear();
        }
        if score == max {
            maximizers.push(strategy);
        }
    }
    ClassicalValue {
        max,
        maximizers,
        scored,
    }
}

/// First strategy in enumeration order that wins on every listed input.
pub fn strategy_winning_on(inputs: &[RoundInput]) -> Option<LocalStrategy> {
    LocalStrategy::all().find(|s| inputs.iter().all(|&i| s.wins(i)))
}

/// Samples an output triple from the honest correlation table.
pub fn honest_round_sample<R: Rng + ?Sized>(input: RoundInput, rng: &mut R) -> RoundOutput {
    sample_row(honest_table().row(input), rng)
}

pub(crate) fn sample_row<R: Rng + ?Sized>(row: &[f64; 8], rng: &mut R) -> RoundOutput {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (k, &p) in row.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = k;
        if u < acc {
            return RoundOutput::from_index(k);
        }
    }
    RoundOutput::from_index(last)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn input(s: &str) -> RoundInput {
        let b: Vec<bool> = s.chars().map(|c| c == '1').collect();
        RoundInput::from_bits(b[0], b[1], b[2]).unwrap()
    }

    fn output(s: &str) -> RoundOutput {
        let b: Vec<bool> = s.chars().map(|c| c == '1').collect();
        RoundOutput::new(b[0], b[1], b[2])
    }

    #[test]
    fn win_predicate_examples() {
        assert!(win(input("111"), output("001")));
        assert!(win(input("001"), output("000")));
        assert!(!win(input("111"), output("000")));
    }

    #[test]
    fn illegal_inputs_are_unrepresentable() {
        for bits in 0..8u8 {
            let (x, y, z) = (bits & 4 != 0, bits & 2 != 0, bits & 1 != 0);
            let legal = matches!(bits, 0b111 | 0b001 | 0b010 | 0b100);
            assert_eq!(RoundInput::from_bits(x, y, z).is_some(), legal, "{bits:03b}");
        }
    }

    #[test]
    fn pair_encoding() {
        for pair in PairLabel::ALL {
            let i = RoundInput::from_pair(pair);
            assert_eq!(i.x(), pair.r1());
            assert_eq!(i.y(), pair.r2());
            assert_eq!(i.z(), pair.r1() ^ pair.r2() ^ true);
        }
        assert_eq!(RoundInput::from_pair(PairLabel::from_bits(true, true)).to_string(), "111");
        assert_eq!(RoundInput::from_pair(PairLabel::from_bits(false, false)).to_string(), "001");
        assert_eq!(PairLabel::try_from("10").unwrap().value(), 2);
        assert!(PairLabel::try_from("2").is_err());
    }

    #[test]
    fn classical_value_is_three_quarters() {
        let v = classical_win_value();
        assert_eq!(v.scored, 64);
        assert_eq!(v.max, Ratio::new(3, 4));
        assert!(LocalStrategy::all().all(|s| s.score() < Ratio::new(1, 1)));
        let allowed = [0, 1, 2, 3].map(|w| Ratio::new(w, 4));
        assert!(LocalStrategy::all().all(|s| allowed.contains(&s.score())));
    }

    #[test]
    fn every_three_input_subset_is_classically_winnable() {
        for skip in RoundInput::ALL {
            let rest: Vec<_> = RoundInput::ALL.into_iter().filter(|&i| i != skip).collect();
            let s = strategy_winning_on(&rest).expect("3/4 subset winnable");
            assert!(!s.wins(skip));
        }
        assert!(strategy_winning_on(&RoundInput::ALL).is_none());
    }

    #[test]
    fn honest_samples_always_win() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for input in RoundInput::ALL {
            let mut counts = [0u32; 8];
            for _ in 0..100_000 {
                let out = honest_round_sample(input, &mut rng);
                assert!(win(input, out));
                counts[out.index()] += 1;
            }
            for (k, &c) in counts.iter().enumerate() {
                if win(input, RoundOutput::from_index(k)) {
                    // 1/4 ± 5σ, σ = sqrt(0.1875 / 1e5)
                    let f = c as f64 / 100_000.0;
                    assert!((f - 0.25).abs() < 5.0 * 0.001_37, "{input} {k:03b}: {f}");
                }
            }
        }
    }

    #[test]
    fn honest_sampling_is_reproducible() {
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..64)
                .map(|i| honest_round_sample(RoundInput::ALL[i % 4], &mut rng).index())
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(3), draw(3));
        assert_ne!(draw(3), draw(4));
    }
}
