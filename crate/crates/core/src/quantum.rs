//! Three-qubit statevector oracle for the honest GHZ devices.
//!
//! The honest correlation table `P(abc|xyz)` is derived here from the state
//! `(|000⟩ + |111⟩)/√2` and product X/Y measurements rather than typed in, so
//! the game module's sampler has an independent ground truth.
//!
//! Basis index convention: amplitude `k` belongs to `|abc⟩` with `a` the most
//! significant bit, i.e. `k = 4a + 2b + c`.

use std::f64::consts::FRAC_1_SQRT_2;
use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{RoundInput, RoundOutput};

/// Absolute tolerance for all amplitude and probability comparisons.
pub const TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector3 {
    amplitudes: [Complex64; 8],
}

impl StateVector3 {
    /// Builds a state, rejecting amplitudes whose squared norm is not 1.
    pub fn new(amplitudes: [Complex64; 8]) -> Result<Self> {
        let state = Self { amplitudes };
        state.check_normalized()?;
        Ok(state)
    }

    /// Builds a state without checking normalization. [`measure`] will still
    /// refuse it if the norm is off.
    pub fn from_amplitudes_unchecked(amplitudes: [Complex64; 8]) -> Self {
        Self { amplitudes }
    }

    /// The computational basis state `|abc⟩`.
    pub fn basis(index: usize) -> Self {
        let mut amplitudes = [Complex64::new(0.0, 0.0); 8];
        amplitudes[index & 7] = Complex64::new(1.0, 0.0);
        Self { amplitudes }
    }

    pub fn amplitudes(&self) -> &[Complex64; 8] {
        &self.amplitudes
    }

    pub fn amplitude(&self, index: usize) -> Complex64 {
        self.amplitudes[index]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    fn check_normalized(&self) -> Result<()> {
        let norm_sq = self.norm_sqr();
        if (norm_sq - 1.0).abs() > TOLERANCE {
            return Err(Error::NotNormalized { norm_sq });
        }
        Ok(())
    }
}

/// `(|000⟩ + |111⟩)/√2`.
pub fn ghz_state() -> StateVector3 {
    let mut amplitudes = [Complex64::new(0.0, 0.0); 8];
    amplitudes[0b000] = Complex64::new(FRAC_1_SQRT_2, 0.0);
    amplitudes[0b111] = Complex64::new(FRAC_1_SQRT_2, 0.0);
    StateVector3 { amplitudes }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    X,
    Y,
}

impl Basis {
    /// Eigenvector for eigenvalue `+1` (`plus = true`) or `-1`.
    fn eigenvector(self, plus: bool) -> [Complex64; 2] {
        let s = if plus { 1.0 } else { -1.0 };
        let h = FRAC_1_SQRT_2;
        match self {
            Basis::X => [Complex64::new(h, 0.0), Complex64::new(s * h, 0.0)],
            Basis::Y => [Complex64::new(h, 0.0), Complex64::new(0.0, s * h)],
        }
    }
}

/// How a qubit's ±1 eigenvalue is reported as a bit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BitAssignment {
    /// `+1 → 0`, `-1 → 1`.
    Standard,
    /// `+1 → 1`, `-1 → 0`.
    Flipped,
}

impl BitAssignment {
    fn bit(self, plus: bool) -> usize {
        match (self, plus) {
            (BitAssignment::Standard, true) | (BitAssignment::Flipped, false) => 0,
            _ => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QubitSetting {
    pub basis: Basis,
    pub assignment: BitAssignment,
}

/// Product measurement over the three qubits, box A first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MeasurementSetting {
    pub qubits: [QubitSetting; 3],
}

impl MeasurementSetting {
    /// All three qubits in the given bases with the standard bit map.
    pub fn standard(bases: [Basis; 3]) -> Self {
        Self {
            qubits: bases.map(|basis| QubitSetting {
                basis,
                assignment: BitAssignment::Standard,
            }),
        }
    }
}

/// Per-box mapping from input bit to measurement that wins the game with
/// certainty: input 1 measures X, input 0 measures Y, and box C reports its
/// eigenvalue with the flipped bit map.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Convention {
    pub on_zero: Basis,
    pub on_one: Basis,
    pub assignments: [BitAssignment; 3],
}

impl Convention {
    pub const CALIBRATED: Convention = Convention {
        on_zero: Basis::Y,
        on_one: Basis::X,
        assignments: [
            BitAssignment::Standard,
            BitAssignment::Standard,
            BitAssignment::Flipped,
        ],
    };

    pub fn setting(&self, input: RoundInput) -> MeasurementSetting {
        let bits = input.bits();
        let mut qubits = [QubitSetting {
            basis: Basis::X,
            assignment: BitAssignment::Standard,
        }; 3];
        for (q, slot) in qubits.iter_mut().enumerate() {
            slot.basis = if bits[q] { self.on_one } else { self.on_zero };
            slot.assignment = self.assignments[q];
        }
        MeasurementSetting { qubits }
    }
}

/// Born-rule probabilities of the eight outcome triples, indexed `4a+2b+c`.
pub fn measure(state: &StateVector3, setting: &MeasurementSetting) -> Result<[f64; 8]> {
    state.check_normalized()?;
    let mut probs = [0.0; 8];
    for signs in 0..8usize {
        let plus = [signs & 4 == 0, signs & 2 == 0, signs & 1 == 0];
        let vecs: [[Complex64; 2]; 3] =
            std::array::from_fn(|q| setting.qubits[q].basis.eigenvector(plus[q]));
        let mut overlap = Complex64::new(0.0, 0.0);
        for (k, amp) in state.amplitudes.iter().enumerate() {
            let (i, j, l) = ((k >> 2) & 1, (k >> 1) & 1, k & 1);
            overlap += vecs[0][i].conj() * vecs[1][j].conj() * vecs[2][l].conj() * amp;
        }
        let outcome = (setting.qubits[0].assignment.bit(plus[0]) << 2)
            | (setting.qubits[1].assignment.bit(plus[1]) << 1)
            | setting.qubits[2].assignment.bit(plus[2]);
        probs[outcome] += overlap.norm_sqr();
    }
    Ok(probs)
}

/// Outcome distributions for the four legal inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationTable {
    /// Rows in [`RoundInput::ALL`] order.
    rows: [[f64; 8]; 4],
}

impl CorrelationTable {
    pub fn from_rows(rows: [[f64; 8]; 4]) -> Result<Self> {
        for row in &rows {
            if row.iter().any(|p| !(0.0..=1.0 + TOLERANCE).contains(p)) {
                return Err(Error::InvalidDistribution(
                    "correlation entry outside [0, 1]".into(),
                ));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > TOLERANCE {
                return Err(Error::InvalidDistribution(format!(
                    "correlation row sums to {total}"
                )));
            }
        }
        Ok(Self { rows })
    }

    /// Derives the table for a measurement convention from `state`.
    ///
    /// Entries below [`TOLERANCE`] are snapped to zero and each row is
    /// renormalized, so impossible outcomes carry exactly zero mass.
    pub fn from_state(state: &StateVector3, convention: &Convention) -> Result<Self> {
        let mut rows = [[0.0; 8]; 4];
        for (slot, input) in rows.iter_mut().zip(RoundInput::ALL) {
            let mut row = measure(state, &convention.setting(input))?;
            for p in row.iter_mut() {
                if *p < TOLERANCE {
                    *p = 0.0;
                }
            }
            let total: f64 = row.iter().sum();
            for p in row.iter_mut() {
                *p /= total;
            }
            *slot = row;
        }
        Self::from_rows(rows)
    }

    pub fn row(&self, input: RoundInput) -> &[f64; 8] {
        &self.rows[input.ordinal()]
    }

    pub fn prob(&self, input: RoundInput, output: RoundOutput) -> f64 {
        self.row(input)[output.index()]
    }

    /// Probability that the outputs satisfy the win condition on `input`.
    pub fn win_probability(&self, input: RoundInput) -> f64 {
        self.row(input)
            .iter()
            .enumerate()
            .filter(|(k, _)| crate::game::win(input, RoundOutput::from_index(*k)))
            .map(|(_, p)| p)
            .sum()
    }

    /// Marginal distribution of the (a, b) pair, indexed `2a+b`.
    pub fn ab_marginal(&self, input: RoundInput) -> [f64; 4] {
        let row = self.row(input);
        std::array::from_fn(|ab| row[ab << 1] + row[(ab << 1) | 1])
    }

    /// Probability that box `which` (0 = A) outputs 1 on `input`.
    pub fn box_marginal_one(&self, input: RoundInput, which: usize) -> f64 {
        let shift = 2 - which;
        self.row(input)
            .iter()
            .enumerate()
            .filter(|(k, _)| (k >> shift) & 1 == 1)
            .map(|(_, p)| p)
            .sum()
    }

    /// Checks that each box's output marginal is independent of the other
    /// boxes' inputs, i.e. the table cannot be used to signal.
    pub fn is_no_signaling(&self) -> bool {
        for which in 0..3 {
            for own in [false, true] {
                let marginals: Vec<f64> = RoundInput::ALL
                    .iter()
                    .filter(|input| input.bits()[which] == own)
                    .map(|&input| self.box_marginal_one(input, which))
                    .collect();
                if marginals
                    .windows(2)
                    .any(|w| (w[0] - w[1]).abs() > TOLERANCE)
                {
                    return false;
                }
            }
        }
        true
    }
}

/// The honest devices' correlations: GHZ measured with the calibrated
/// convention. Computed once and cached.
pub fn honest_table() -> &'static CorrelationTable {
    static TABLE: OnceLock<CorrelationTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        CorrelationTable::from_state(&ghz_state(), &Convention::CALIBRATED)
            .expect("GHZ state is normalized")
    })
}
