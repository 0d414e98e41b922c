//! Inner-product (Hadamard) two-source extractor and the tooling used to
//! check its closeness guarantee on explicit small sources.
//!
//! Output distributions are computed through the Walsh–Hadamard transform:
//! for independent `A`, `B` over `{0,1}^n`,
//!
//! ```text
//! P(⟨A,B⟩ = 0) − 1/2 = ½ · Σ_a P_A(a) · Σ_b P_B(b)·(−1)^{a·b}
//! ```
//!
//! which costs `O(n·2^n)` per component instead of `O(4^n)`.

use std::fmt;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::source::{CondDistribution, NORM_TOLERANCE};

/// Largest per-component length for exact output distributions.
pub const EXTRACTOR_CAP: usize = 12;

/// Slack when comparing a distance to its bound.
pub const BOUND_TOLERANCE: f64 = 1e-12;

/// Fixed-length bit string (at most 64 bits), first bit most significant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BitVector {
    len: usize,
    bits: u64,
}

impl BitVector {
    pub fn new(len: usize, bits: u64) -> Result<Self> {
        if len > 64 || (len < 64 && bits >> len != 0) {
            return Err(Error::OutOfRange(format!("{bits:#b} does not fit in {len} bits")));
        }
        Ok(Self { len, bits })
    }

    pub fn parse(s: &str) -> Result<Self> {
        if s.len() > 64 || !s.bytes().all(|b| b == b'0' || b == b'1') {
            return Err(Error::OutOfRange(format!("{s:?} is not a bit string")));
        }
        let bits = if s.is_empty() { 0 } else { u64::from_str_radix(s, 2).unwrap() };
        Ok(Self { len: s.len(), bits })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn xor(&self, other: &BitVector) -> Result<BitVector> {
        check_len(self.len, other.len)?;
        Ok(Self {
            len: self.len,
            bits: self.bits ^ other.bits,
        })
    }
}

impl fmt::Display for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::source::bitstring(self.bits, self.len))
    }
}

fn check_len(left: usize, right: usize) -> Result<()> {
    if left != right {
        return Err(Error::LengthMismatch { left, right });
    }
    Ok(())
}

/// `⊕_i (a_i ∧ b_i)`.
pub fn hadamard(a: &BitVector, b: &BitVector) -> Result<bool> {
    check_len(a.len, b.len)?;
    Ok(inner_product(a.bits, b.bits))
}

#[inline]
pub fn inner_product(a: u64, b: u64) -> bool {
    (a & b).count_ones() & 1 == 1
}

/// Total variation distance `½ Σ |p1 − p2|`.
pub fn statistical_distance(d1: &CondDistribution, d2: &CondDistribution) -> Result<f64> {
    check_len(d1.n_bits(), d2.n_bits())?;
    let (e1, e2) = (d1.entries(), d2.entries());
    let (mut i, mut j) = (0, 0);
    let mut total = 0.0;
    while i < e1.len() || j < e2.len() {
        let x1 = e1.get(i).map(|e| e.0).unwrap_or(u64::MAX);
        let x2 = e2.get(j).map(|e| e.0).unwrap_or(u64::MAX);
        if x1 == x2 {
            total += (e1[i].1 - e2[j].1).abs();
            i += 1;
            j += 1;
        } else if x1 < x2 {
            total += e1[i].1;
            i += 1;
        } else {
            total += e2[j].1;
            j += 1;
        }
    }
    Ok(0.5 * total)
}

/// Distribution of one output bit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BitDistribution {
    pub p_zero: f64,
    pub p_one: f64,
}

impl BitDistribution {
    /// Distance to a uniform bit, `|P(1) − 1/2|`.
    pub fn distance_to_uniform(&self) -> f64 {
        (self.p_one - 0.5).abs()
    }
}

/// One λ-component: weight and the two sources, independent given λ.
#[derive(Clone, Debug, PartialEq)]
pub struct JointComponent {
    pub weight: f64,
    pub a: CondDistribution,
    pub b: CondDistribution,
}

/// Mixture over λ of independent source pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct JointSource {
    components: Vec<JointComponent>,
}

impl JointSource {
    pub fn independent(a: CondDistribution, b: CondDistribution) -> Result<Self> {
        Self::mixture(vec![JointComponent { weight: 1.0, a, b }])
    }

    pub fn mixture(components: Vec<JointComponent>) -> Result<Self> {
        let first = components.first().ok_or(Error::EmptyDistribution)?;
        let n = first.a.n_bits();
        for c in &components {
            check_len(n, c.a.n_bits())?;
            check_len(n, c.b.n_bits())?;
            if c.weight.is_nan() || c.weight < 0.0 {
                return Err(Error::InvalidDistribution(format!("weight {}", c.weight)));
            }
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::InvalidDistribution(format!(
                "component weights sum to {total}"
            )));
        }
        Ok(Self { components })
    }

    pub fn n_bits(&self) -> usize {
        self.components[0].a.n_bits()
    }

    pub fn components(&self) -> &[JointComponent] {
        &self.components
    }
}

/// In-place Walsh–Hadamard transform (unnormalized).
pub fn walsh_hadamard(values: &mut [f64]) {
    let n = values.len();
    debug_assert!(n.is_power_of_two());
    let mut h = 1;
    while h < n {
        for block in values.chunks_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (x, y) in lo.iter_mut().zip(hi.iter_mut()) {
                let (s, d) = (*x + *y, *x - *y);
                *x = s;
                *y = d;
            }
        }
        h *= 2;
    }
}

/// `P(⟨A,B⟩ = 1)` for independent `a`, `b` of equal length.
pub fn inner_product_one_prob(a: &CondDistribution, b: &CondDistribution) -> Result<f64> {
    check_len(a.n_bits(), b.n_bits())?;
    if a.n_bits() > EXTRACTOR_CAP {
        return Err(Error::CapExceeded {
            bits: a.n_bits(),
            cap: EXTRACTOR_CAP,
        });
    }
    let mut spectrum = b.dense();
    walsh_hadamard(&mut spectrum);
    let correlation: f64 = a
        .entries()
        .iter()
        .map(|&(x, p)| p * spectrum[x as usize])
        .sum();
    Ok(((1.0 - correlation) * 0.5).clamp(0.0, 1.0))
}

/// Exact output distribution of the extractor, mixed over λ.
pub fn extractor_output_distribution(src: &JointSource) -> Result<BitDistribution> {
    let mut p_one = 0.0;
    for c in &src.components {
        p_one += c.weight * inner_product_one_prob(&c.a, &c.b)?;
    }
    Ok(BitDistribution {
        p_zero: 1.0 - p_one,
        p_one,
    })
}

/// Closeness guarantee evaluated for one λ-component.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentBound {
    pub weight: f64,
    pub k1: f64,
    pub k2: f64,
    pub distance: f64,
    /// `2^{(n − k1 − k2 − 2)/2}`.
    pub bound: f64,
    /// `k1 + k2 ≥ n/2`, the regime where the guarantee is claimed.
    pub applicable: bool,
    pub holds: bool,
}

impl ComponentBound {
    /// The guarantee says something only when the bound is below 1/2.
    pub fn is_informative(&self) -> bool {
        self.bound < 0.5
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub n: usize,
    pub components: Vec<ComponentBound>,
    /// Distance of the λ-mixed output to uniform.
    pub mixed_distance: f64,
}

impl BoundCheck {
    /// Every applicable component stays within its bound.
    pub fn holds(&self) -> bool {
        self.components.iter().all(|c| !c.applicable || c.holds)
    }
}

/// The Hadamard bound `2^{(n − k1 − k2 − 2)/2}` for min-entropies `k1`, `k2`.
pub fn hadamard_bound(n: usize, k1: f64, k2: f64) -> f64 {
    ((n as f64 - k1 - k2 - 2.0) / 2.0).exp2()
}

pub fn hadamard_bound_check(src: &JointSource) -> Result<BoundCheck> {
    let n = src.n_bits();
    let mut components = Vec::with_capacity(src.components.len());
    let mut p_one = 0.0;
    for c in &src.components {
        let one = inner_product_one_prob(&c.a, &c.b)?;
        p_one += c.weight * one;
        let (k1, k2) = (c.a.min_entropy(), c.b.min_entropy());
        let distance = (one - 0.5).abs();
        let bound = hadamard_bound(n, k1, k2);
        components.push(ComponentBound {
            weight: c.weight,
            k1,
            k2,
            distance,
            bound,
            applicable: k1 + k2 >= n as f64 / 2.0 - NORM_TOLERANCE,
            holds: distance <= bound + BOUND_TOLERANCE,
        });
    }
    Ok(BoundCheck {
        n,
        components,
        mixed_distance: (p_one - 0.5).abs(),
    })
}

/// Uniform distribution on `size` distinct random `n`-bit strings.
pub fn random_flat<R: Rng + ?Sized>(n: usize, size: usize, rng: &mut R) -> Result<CondDistribution> {
    let space = 1usize << n;
    if size == 0 || size > space {
        return Err(Error::OutOfRange(format!("flat support {size} in 2^{n} strings")));
    }
    let support = index::sample(rng, space, size).into_iter().map(|x| x as u64);
    CondDistribution::flat(n, support)
}

/// `A` uniform on strings supported in the first `k` coordinates, `B` on
/// the remaining `n − k`: every pair is orthogonal, so the output is the
/// constant 0 while `k1 + k2 = n`.
pub fn orthogonal_flat_pair(n: usize, k: usize) -> Result<JointSource> {
    if k > n || n > EXTRACTOR_CAP {
        return Err(Error::OutOfRange(format!("split {k} of {n} bits")));
    }
    let high = |x: u64| x << (n - k);
    let a = CondDistribution::flat(n, (0..1u64 << k).map(high))?;
    let b = CondDistribution::flat(n, 0..1u64 << (n - k))?;
    JointSource::independent(a, b)
}

/// Summary of the bound check over random flat source pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlatFamilyReport {
    pub cases: u64,
    pub max_n: usize,
    pub violations: u64,
    /// Largest `distance / bound` seen.
    pub worst_ratio: f64,
    /// Largest `distance − bound` seen.
    pub worst_excess: f64,
    pub seed: u64,
}

/// Checks the bound on `cases` random flat pairs with `n ≤ max_n` and
/// `k1 + k2 ≥ n/2`. Case `i` draws from its own ChaCha stream, so results
/// do not depend on the execution mode.
pub fn flat_family_check(
    cases: u64,
    max_n: usize,
    seed: u64,
    exec: Execution,
) -> Result<FlatFamilyReport> {
    if max_n == 0 || max_n > EXTRACTOR_CAP {
        return Err(Error::OutOfRange(format!("max_n {max_n}")));
    }
    let results = exec.map_range(cases as usize, |case| -> Result<(f64, f64, bool)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(case as u64);
        let n = rng.random_range(1..=max_n);
        let space = 1u64 << n;
        // s1·s2 ≥ 2^{n/2}  ⇔  k1 + k2 ≥ n/2
        let need = (n as f64 / 2.0).exp2();
        let s1 = rng.random_range(1..=space);
        let min_s2 = ((need / s1 as f64).ceil() as u64).clamp(1, space);
        let s2 = rng.random_range(min_s2..=space);
        let a = random_flat(n, s1 as usize, &mut rng)?;
        let b = random_flat(n, s2 as usize, &mut rng)?;
        let check = hadamard_bound_check(&JointSource::independent(a, b)?)?;
        let c = check.components[0];
        debug_assert!(c.applicable);
        Ok((c.distance / c.bound, c.distance - c.bound, c.holds))
    });
    let mut report = FlatFamilyReport {
        cases,
        max_n,
        violations: 0,
        worst_ratio: 0.0,
        worst_excess: f64::NEG_INFINITY,
        seed,
    };
    for r in results {
        let (ratio, excess, holds) = r?;
        report.worst_ratio = report.worst_ratio.max(ratio);
        report.worst_excess = report.worst_excess.max(excess);
        if !holds {
            report.violations += 1;
        }
    }
    Ok(report)
}
