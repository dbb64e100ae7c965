//! Retrograde solver for KRK.
//!
//! Values are assigned by breadth-first propagation backwards from the
//! checkmates over an explicit predecessor graph built from the forward
//! move generators in [`crate::chess`]. A black-to-move position is lost at
//! depth `d` once all of its replies are known wins, the last one found at
//! depth `d`; a white-to-move position is won at `d + 1` as soon as one move
//! reaches a black-to-move loss at `d`. Everything never reached is a draw.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chess::{
    black_successors, canonicalize, legal_black_moves, status, white_successors, Position, PositionError, Side, Status,
};
use crate::data::Record;
use crate::label::{ClassLabel, GameValue, NUM_CLASSES};

const SLOTS: usize = 64 * 64 * 64;
const ILLEGAL: u8 = u8::MAX;
const DRAW: u8 = u8::MAX - 1;
const UNKNOWN: u8 = u8::MAX - 2;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("illegal position: {0}")]
    IllegalPosition(#[from] PositionError),
    #[error("record {index} is not a legal position: {source}")]
    UnknownPosition {
        index: usize,
        #[source]
        source: PositionError,
    },
}

fn slot(p: &Position) -> usize {
    (p.wk.index() * 64 + p.wr.index()) * 64 + p.bk.index()
}

fn position_at(slot: usize, side: Side) -> Position {
    use crate::chess::Square;
    Position {
        wk: Square::from_index(slot / 4096),
        wr: Square::from_index(slot / 64 % 64),
        bk: Square::from_index(slot % 64),
        side_to_move: side,
    }
}

/// Solved values for every position, both sides to move.
#[derive(Clone)]
pub struct Tablebase {
    black: Vec<u8>,
    white: Vec<u8>,
}

impl std::fmt::Debug for Tablebase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Tablebase").finish_non_exhaustive()
    }
}

/// Compressed-sparse predecessor lists indexed by slot.
struct Predecessors {
    offsets: Vec<u32>,
    slots: Vec<u32>,
}

impl Predecessors {
    fn build(edges: &mut [(u32, u32)]) -> Self {
        // edges are (target, source)
        edges.sort_unstable();
        let mut offsets = vec![0u32; SLOTS + 1];
        for &(t, _) in edges.iter() {
            offsets[t as usize + 1] += 1;
        }
        for i in 0..SLOTS {
            offsets[i + 1] += offsets[i];
        }
        let slots = edges.iter().map(|&(_, s)| s).collect();
        Predecessors { offsets, slots }
    }

    fn of(&self, target: usize) -> &[u32] {
        &self.slots[self.offsets[target] as usize..self.offsets[target + 1] as usize]
    }
}

pub fn solve() -> Tablebase {
    let mut black = vec![ILLEGAL; SLOTS];
    let mut white = vec![ILLEGAL; SLOTS];
    let mut remaining = vec![0u8; SLOTS];
    let mut frontier: Vec<usize> = Vec::new();

    // black-to-move: terminal values and reply counts
    let mut to_black: Vec<(u32, u32)> = Vec::new();
    for p in Position::all_legal(Side::Black) {
        let s = slot(&p);
        let moves = legal_black_moves(&p);
        if moves.is_empty() {
            if status(&p) == Status::Checkmate {
                black[s] = 0;
                frontier.push(s);
            } else {
                black[s] = DRAW;
            }
        } else if moves.captures_rook {
            // bare kings after the capture
            black[s] = DRAW;
        } else {
            black[s] = UNKNOWN;
            remaining[s] = moves.destinations.len() as u8;
            for q in black_successors(&p) {
                to_black.push((slot(&q) as u32, s as u32));
            }
        }
    }
    let black_preds = Predecessors::build(&mut to_black);
    drop(to_black);

    let mut to_white: Vec<(u32, u32)> = Vec::new();
    for p in Position::all_legal(Side::White) {
        let s = slot(&p);
        white[s] = UNKNOWN;
        for q in white_successors(&p) {
            to_white.push((slot(&q) as u32, s as u32));
        }
    }
    let white_preds = Predecessors::build(&mut to_white);
    drop(to_white);

    let mut depth = 0u8;
    while !frontier.is_empty() {
        let mut white_wins = Vec::new();
        for &b in &frontier {
            for &w in white_preds.of(b) {
                let w = w as usize;
                if white[w] == UNKNOWN {
                    white[w] = depth + 1;
                    white_wins.push(w);
                }
            }
        }
        let mut next = Vec::new();
        for &w in &white_wins {
            for &b in black_preds.of(w) {
                let b = b as usize;
                if black[b] == UNKNOWN {
                    remaining[b] -= 1;
                    if remaining[b] == 0 {
                        black[b] = depth + 1;
                        next.push(b);
                    }
                }
            }
        }
        frontier = next;
        depth += 1;
    }

    for v in black.iter_mut().chain(white.iter_mut()) {
        if *v == UNKNOWN {
            *v = DRAW;
        }
    }
    Tablebase { black, white }
}

impl Tablebase {
    /// Value of a legal position, `None` for illegal placements.
    pub fn value(&self, p: &Position) -> Option<GameValue> {
        let table = match p.side_to_move {
            Side::Black => &self.black,
            Side::White => &self.white,
        };
        match table[slot(p)] {
            ILLEGAL => None,
            DRAW => Some(GameValue::Draw),
            d => Some(GameValue::Win(d)),
        }
    }

    /// Every legal position with its value.
    pub fn entries(&self, side: Side) -> impl Iterator<Item = (Position, GameValue)> + '_ {
        let table = match side {
            Side::Black => &self.black,
            Side::White => &self.white,
        };
        table.iter().enumerate().filter_map(move |(s, &v)| {
            let value = match v {
                ILLEGAL => return None,
                DRAW => GameValue::Draw,
                d => GameValue::Win(d),
            };
            Some((position_at(s, side), value))
        })
    }

    pub fn max_depth(&self, side: Side) -> Option<u8> {
        self.entries(side)
            .filter_map(|(_, v)| match v {
                GameValue::Win(d) => Some(d),
                GameValue::Draw => None,
            })
            .max()
    }
}

/// Label of a black-to-move position, looked up through its canonical form.
pub fn classify(tb: &Tablebase, p: &Position) -> Result<ClassLabel, OracleError> {
    let p = p.with_side(Side::Black);
    p.validate()?;
    let (canonical, _) = canonicalize(&p);
    let value = tb
        .value(&canonical)
        .expect("canonical form of a legal position is legal");
    Ok(ClassLabel::from_value(value).expect("solver depths stay within 16"))
}

/// One record per canonical black-to-move position, ordered by class and
/// then by the six attributes.
pub fn export_dataset(tb: &Tablebase) -> Vec<Record> {
    let mut records: Vec<Record> = tb
        .entries(Side::Black)
        .filter(|(p, _)| canonicalize(p).0 == *p)
        .map(|(p, v)| Record::new(&p, ClassLabel::from_value(v).expect("depth within range")))
        .collect();
    records.sort_by_key(|r| (r.label, r.attributes()));
    records
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Disagreement {
    pub index: usize,
    pub record: Record,
    pub oracle_label: ClassLabel,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub compared: usize,
    pub agreed: usize,
    pub disagreements: Vec<Disagreement>,
    pub dataset_histogram: Vec<usize>,
    pub oracle_histogram: Vec<usize>,
}

impl VerificationReport {
    pub fn agreement(&self) -> f64 {
        if self.compared == 0 {
            1.0
        } else {
            self.agreed as f64 / self.compared as f64
        }
    }

    pub fn success(&self) -> bool {
        self.disagreements.is_empty()
    }

    /// Oracle count minus dataset count, per class.
    pub fn histogram_deltas(&self) -> Vec<i64> {
        self.oracle_histogram
            .iter()
            .zip(&self.dataset_histogram)
            .map(|(&o, &d)| o as i64 - d as i64)
            .collect()
    }
}

pub fn verify_against_dataset(tb: &Tablebase, records: &[Record]) -> Result<VerificationReport, OracleError> {
    let mut report = VerificationReport {
        compared: 0,
        agreed: 0,
        disagreements: Vec::new(),
        dataset_histogram: vec![0; NUM_CLASSES],
        oracle_histogram: vec![0; NUM_CLASSES],
    };
    for (index, record) in records.iter().enumerate() {
        let p = record
            .position()
            .map_err(|source| OracleError::UnknownPosition { index, source })?;
        let oracle_label = classify(tb, &p)?;
        report.compared += 1;
        report.dataset_histogram[record.label.index()] += 1;
        report.oracle_histogram[oracle_label.index()] += 1;
        if oracle_label == record.label {
            report.agreed += 1;
        } else {
            report.disagreements.push(Disagreement {
                index,
                record: *record,
                oracle_label,
            });
        }
    }
    Ok(report)
}
