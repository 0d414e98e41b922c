use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{win, PairLabel, RoundInput, RoundOutput};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub pair: PairLabel,
    pub input: RoundInput,
    pub output: RoundOutput,
    pub win: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Terminal {
    /// First lost round; no output bit is produced.
    Aborted { round: usize },
    Completed { output: bool },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub rounds: Vec<RoundRecord>,
    pub terminal: Terminal,
}

impl Transcript {
    pub fn output(&self) -> Option<bool> {
        match self.terminal {
            Terminal::Completed { output } => Some(output),
            Terminal::Aborted { .. } => None,
        }
    }

    /// Checks the structural invariants of a run over `n` rounds.
    pub fn validate(&self, n: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        for (i, r) in self.rounds.iter().enumerate() {
            if r.round != i {
                return bad(format!("record {i} is labelled round {}", r.round));
            }
            if r.input != RoundInput::from_pair(r.pair) || r.win != win(r.input, r.output) {
                return bad(format!("round {i} is inconsistent"));
            }
        }
        let lost = self.rounds.iter().position(|r| !r.win);
        match self.terminal {
            Terminal::Aborted { round } => {
                if lost != Some(round) || self.rounds.len() != round + 1 {
                    return bad(format!("abort at {round} does not match the first loss"));
                }
            }
            Terminal::Completed { output } => {
                if lost.is_some() || self.rounds.len() != n {
                    return bad("completed run has a loss or missing rounds".into());
                }
                let expected = self.rounds.iter().fold(false, |o, r| o ^ (r.output.a & r.output.b));
                if expected != output {
                    return bad("output bit is not ⊕(a∧b)".into());
                }
            }
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct CsvRow {
    trial: usize,
    round: usize,
    r1r2: String,
    xyz: String,
    abc: String,
    win: u8,
}

/// One CSV row per played round: `trial,round,r1r2,xyz,abc,win`.
pub fn write_transcripts_csv<W: Write>(writer: W, transcripts: &[Transcript]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for (trial, t) in transcripts.iter().enumerate() {
        for r in &t.rounds {
            w.serialize(CsvRow {
                trial,
                round: r.round,
                r1r2: r.pair.to_string(),
                xyz: r.input.to_string(),
                abc: r.output.to_string(),
                win: r.win as u8,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(round: usize, pair: u8, out: usize) -> RoundRecord {
        let pair = PairLabel::new(pair).unwrap();
        let input = RoundInput::from_pair(pair);
        let output = RoundOutput::from_index(out);
        RoundRecord {
            round,
            pair,
            input,
            output,
            win: win(input, output),
        }
    }

    #[test]
    fn validation() {
        // 111 wins on odd parity, 001 on even.
        let t = Transcript {
            rounds: vec![record(0, 3, 0b111), record(1, 0, 0b110)],
            terminal: Terminal::Completed { output: false },
        };
        assert!(t.validate(2).is_ok());
        let wrong_bit = Transcript {
            terminal: Terminal::Completed { output: true },
            ..t.clone()
        };
        assert!(wrong_bit.validate(2).is_err());
        let aborted = Transcript {
            rounds: vec![record(0, 3, 0)],
            terminal: Terminal::Aborted { round: 0 },
        };
        assert!(aborted.validate(2).is_ok());
        assert_eq!(aborted.output(), None);
    }

    #[test]
    fn csv_layout() {
        let t = Transcript {
            rounds: vec![record(0, 3, 0b111)],
            terminal: Terminal::Completed { output: true },
        };
        let mut buf = Vec::new();
        write_transcripts_csv(&mut buf, &[t]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "trial,round,r1r2,xyz,abc,win\n0,0,11,111,111,1\n");
    }
}
