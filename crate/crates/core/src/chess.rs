//! Board geometry and move rules for the King-Rook vs King endgame.
//!
//! Only three pieces ever exist: the white king, the white rook and the
//! black king. Every type here is a small `Copy` value and every function is
//! pure.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// A board square, file and rank both in `1..=8`.
#[derive(Copy, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Square {
    file: u8,
    rank: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SquareError {
    #[error("file {0} out of range 1..=8")]
    File(u8),
    #[error("rank {0} out of range 1..=8")]
    Rank(u8),
    #[error("malformed square {0:?}, expected a1..h8")]
    Malformed(String),
}

impl Square {
    pub fn new(file: u8, rank: u8) -> Result<Self, SquareError> {
        if !(1..=8).contains(&file) {
            return Err(SquareError::File(file));
        }
        if !(1..=8).contains(&rank) {
            return Err(SquareError::Rank(rank));
        }
        Ok(Square { file, rank })
    }

    /// Dense index in `0..64`, file-major.
    pub fn from_index(index: usize) -> Self {
        debug_assert!(index < 64);
        Square {
            file: (index / 8) as u8 + 1,
            rank: (index % 8) as u8 + 1,
        }
    }

    pub fn index(self) -> usize {
        (self.file as usize - 1) * 8 + (self.rank as usize - 1)
    }

    pub fn file(self) -> u8 {
        self.file
    }

    pub fn rank(self) -> u8 {
        self.rank
    }

    pub fn file_char(self) -> char {
        (b'a' + self.file - 1) as char
    }

    pub fn all() -> impl Iterator<Item = Square> {
        (0..64).map(Square::from_index)
    }

    fn offset(self, df: i8, dr: i8) -> Option<Square> {
        let f = self.file as i8 + df;
        let r = self.rank as i8 + dr;
        if (1..=8).contains(&f) && (1..=8).contains(&r) {
            Some(Square {
                file: f as u8,
                rank: r as u8,
            })
        } else {
            None
        }
    }

    /// The up to eight squares one king step away.
    pub fn neighbors(self) -> impl Iterator<Item = Square> {
        KING_STEPS.iter().filter_map(move |&(df, dr)| self.offset(df, dr))
    }
}

const KING_STEPS: [(i8, i8); 8] = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)];

const ROOK_RAYS: [(i8, i8); 4] = [(-1, 0), (1, 0), (0, -1), (0, 1)];

impl fmt::Display for Square {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.file_char(), self.rank)
    }
}

impl FromStr for Square {
    type Err = SquareError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bytes = s.as_bytes();
        if bytes.len() != 2 {
            return Err(SquareError::Malformed(s.to_string()));
        }
        let file = match bytes[0] {
            c @ b'a'..=b'h' => c - b'a' + 1,
            _ => return Err(SquareError::Malformed(s.to_string())),
        };
        let rank = match bytes[1] {
            c @ b'1'..=b'8' => c - b'0',
            _ => return Err(SquareError::Malformed(s.to_string())),
        };
        Ok(Square { file, rank })
    }
}

impl Serialize for Square {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Square {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Copy, Clone, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    White,
    Black,
}

#[derive(Copy, Clone, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Piece {
    King,
    Rook,
}

/// Reasons a placement of the three pieces is not a legal position.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PositionError {
    #[error("two pieces share square {0}")]
    Overlap(Square),
    #[error("kings adjacent ({wk} and {bk})")]
    KingsAdjacent { wk: Square, bk: Square },
    #[error("black king on {0} is in check with white to move")]
    SideNotToMoveInCheck(Square),
}

impl PositionError {
    /// Short machine-readable rule name.
    pub fn rule(&self) -> &'static str {
        match self {
            PositionError::Overlap(_) => "overlap",
            PositionError::KingsAdjacent { .. } => "kings_adjacent",
            PositionError::SideNotToMoveInCheck(_) => "side_not_to_move_in_check",
        }
    }
}

#[derive(Copy, Clone, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub struct Position {
    pub wk: Square,
    pub wr: Square,
    pub bk: Square,
    pub side_to_move: Side,
}

impl Position {
    pub fn new(wk: Square, wr: Square, bk: Square, side_to_move: Side) -> Result<Self, PositionError> {
        let p = Position {
            wk,
            wr,
            bk,
            side_to_move,
        };
        p.validate()?;
        Ok(p)
    }

    /// Black-to-move position from textual squares, e.g. `("c1", "c3", "a2")`.
    pub fn black_to_move(wk: &str, wr: &str, bk: &str) -> Result<Self, PositionParseError> {
        Ok(Position::new(wk.parse()?, wr.parse()?, bk.parse()?, Side::Black)?)
    }

    pub fn validate(&self) -> Result<(), PositionError> {
        if self.wk == self.wr || self.wk == self.bk {
            return Err(PositionError::Overlap(self.wk));
        }
        if self.wr == self.bk {
            return Err(PositionError::Overlap(self.wr));
        }
        if is_adjacent(self.wk, self.bk) {
            return Err(PositionError::KingsAdjacent {
                wk: self.wk,
                bk: self.bk,
            });
        }
        if self.side_to_move == Side::White && self.black_in_check() {
            return Err(PositionError::SideNotToMoveInCheck(self.bk));
        }
        Ok(())
    }

    pub fn black_in_check(&self) -> bool {
        rook_attacks(self.wr, self.wk, self.bk)
    }

    pub fn with_side(self, side_to_move: Side) -> Self {
        Position { side_to_move, ..self }
    }

    /// Applies a symmetry to every piece.
    pub fn transform(self, t: SymmetryTransform) -> Self {
        Position {
            wk: t.apply(self.wk),
            wr: t.apply(self.wr),
            bk: t.apply(self.bk),
            side_to_move: self.side_to_move,
        }
    }

    /// Enumerates every legal position with the given side to move.
    pub fn all_legal(side: Side) -> impl Iterator<Item = Position> {
        Square::all().flat_map(move |wk| {
            Square::all().flat_map(move |wr| Square::all().filter_map(move |bk| Position::new(wk, wr, bk, side).ok()))
        })
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let side = match self.side_to_move {
            Side::White => "w",
            Side::Black => "b",
        };
        write!(f, "WK{} WR{} BK{} {}", self.wk, self.wr, self.bk, side)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PositionParseError {
    #[error(transparent)]
    Square(#[from] SquareError),
    #[error(transparent)]
    Illegal(#[from] PositionError),
}

pub fn is_adjacent(a: Square, b: Square) -> bool {
    let df = (a.file as i8 - b.file as i8).abs();
    let dr = (a.rank as i8 - b.rank as i8).abs();
    df.max(dr) == 1
}

/// Whether the rook on `wr` attacks `target`, with the white king on `wk`
/// as the only possible blocker. The black king never blocks: it cannot
/// hide behind itself when stepping along the attacked line.
pub fn rook_attacks(wr: Square, wk: Square, target: Square) -> bool {
    if wr == target {
        return false;
    }
    if wr.file == target.file {
        let (lo, hi) = ordered(wr.rank, target.rank);
        !(wk.file == wr.file && wk.rank > lo && wk.rank < hi)
    } else if wr.rank == target.rank {
        let (lo, hi) = ordered(wr.file, target.file);
        !(wk.rank == wr.rank && wk.file > lo && wk.file < hi)
    } else {
        false
    }
}

fn ordered(a: u8, b: u8) -> (u8, u8) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Legal replies for the black king.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct MoveSet {
    /// Non-capturing destinations, in file-major square order.
    pub destinations: Vec<Square>,
    /// The black king may take the undefended rook.
    pub captures_rook: bool,
}

impl MoveSet {
    pub fn is_empty(&self) -> bool {
        self.destinations.is_empty() && !self.captures_rook
    }
}

pub fn legal_black_moves(p: &Position) -> MoveSet {
    let mut set = MoveSet::default();
    let mut dests: Vec<Square> = p.bk.neighbors().collect();
    dests.sort();
    for sq in dests {
        if sq == p.wk || is_adjacent(sq, p.wk) {
            continue;
        }
        if sq == p.wr {
            set.captures_rook = true;
            continue;
        }
        if rook_attacks(p.wr, p.wk, sq) {
            continue;
        }
        set.destinations.push(sq);
    }
    set
}

/// Positions reachable by a non-capturing black move, white to move.
pub fn black_successors(p: &Position) -> Vec<Position> {
    legal_black_moves(p)
        .destinations
        .into_iter()
        .map(|bk| Position {
            bk,
            side_to_move: Side::White,
            ..*p
        })
        .collect()
}

pub fn legal_white_moves(p: &Position) -> Vec<(Piece, Square)> {
    let mut moves = Vec::with_capacity(22);
    let mut king: Vec<Square> = p.wk.neighbors().collect();
    king.sort();
    for sq in king {
        if sq != p.wr && sq != p.bk && !is_adjacent(sq, p.bk) {
            moves.push((Piece::King, sq));
        }
    }
    for &(df, dr) in &ROOK_RAYS {
        let mut cur = p.wr;
        while let Some(next) = cur.offset(df, dr) {
            if next == p.wk || next == p.bk {
                break;
            }
            moves.push((Piece::Rook, next));
            cur = next;
        }
    }
    moves
}

/// Positions reachable by a white move, black to move.
pub fn white_successors(p: &Position) -> Vec<Position> {
    legal_white_moves(p)
        .into_iter()
        .map(|(piece, to)| {
            let mut next = *p;
            match piece {
                Piece::King => next.wk = to,
                Piece::Rook => next.wr = to,
            }
            next.side_to_move = Side::Black;
            next
        })
        .collect()
}

#[derive(Copy, Clone, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Checkmate,
    Stalemate,
    Ongoing,
}

/// Terminal status of a black-to-move position. An available rook capture
/// is a legal move, so such positions are `Ongoing`; see
/// [`MoveSet::captures_rook`].
pub fn status(p: &Position) -> Status {
    let moves = legal_black_moves(p);
    match (moves.is_empty(), p.black_in_check()) {
        (true, true) => Status::Checkmate,
        (true, false) => Status::Stalemate,
        (false, _) => Status::Ongoing,
    }
}

/// One element of the symmetry group of the square board.
#[derive(Copy, Clone, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymmetryTransform {
    Identity,
    Rotate90,
    Rotate180,
    Rotate270,
    MirrorFiles,
    MirrorRanks,
    MirrorDiagonal,
    MirrorAntiDiagonal,
}

impl SymmetryTransform {
    pub const ALL: [SymmetryTransform; 8] = [
        SymmetryTransform::Identity,
        SymmetryTransform::Rotate90,
        SymmetryTransform::Rotate180,
        SymmetryTransform::Rotate270,
        SymmetryTransform::MirrorFiles,
        SymmetryTransform::MirrorRanks,
        SymmetryTransform::MirrorDiagonal,
        SymmetryTransform::MirrorAntiDiagonal,
    ];

    pub fn apply(self, sq: Square) -> Square {
        let (f, r) = (sq.file, sq.rank);
        let (f, r) = match self {
            SymmetryTransform::Identity => (f, r),
            // (f, r) -> (r, 9 - f): quarter turn clockwise
            SymmetryTransform::Rotate90 => (r, 9 - f),
            SymmetryTransform::Rotate180 => (9 - f, 9 - r),
            SymmetryTransform::Rotate270 => (9 - r, f),
            SymmetryTransform::MirrorFiles => (9 - f, r),
            SymmetryTransform::MirrorRanks => (f, 9 - r),
            SymmetryTransform::MirrorDiagonal => (r, f),
            SymmetryTransform::MirrorAntiDiagonal => (9 - r, 9 - f),
        };
        Square { file: f, rank: r }
    }

    pub fn inverse(self) -> Self {
        match self {
            SymmetryTransform::Rotate90 => SymmetryTransform::Rotate270,
            SymmetryTransform::Rotate270 => SymmetryTransform::Rotate90,
            other => other,
        }
    }
}

/// Ordering key for picking the orbit representative. The white king is
/// compared rank-first, which confines it to the a1-b1-c1-d1-d4 triangle;
/// when it sits on the long diagonal the black king and then the rook are
/// moved to the lower half of the board.
fn canonical_key(p: &Position) -> [u8; 6] {
    [p.wk.rank, p.wk.file, p.bk.rank, p.bk.file, p.wr.rank, p.wr.file]
}

/// Returns the representative of `p`'s symmetry orbit and the transform
/// that maps `p` onto it. Ties prefer the earliest transform in
/// [`SymmetryTransform::ALL`], so canonical inputs map via `Identity`.
pub fn canonicalize(p: &Position) -> (Position, SymmetryTransform) {
    let mut best = (*p, SymmetryTransform::Identity);
    let mut best_key = canonical_key(p);
    for &t in &SymmetryTransform::ALL[1..] {
        let q = p.transform(t);
        let key = canonical_key(&q);
        if key < best_key {
            best = (q, t);
            best_key = key;
        }
    }
    best
}

pub fn is_canonical(p: &Position) -> bool {
    canonicalize(p).0 == *p
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sq(s: &str) -> Square {
        s.parse().unwrap()
    }

    fn btm(wk: &str, wr: &str, bk: &str) -> Position {
        Position::black_to_move(wk, wr, bk).unwrap()
    }

    #[test]
    fn square_text_round_trip() {
        let s = Square::new(3, 2).unwrap();
        assert_eq!(s.to_string(), "c2");
        assert_eq!(sq("c2"), s);
        assert!("i1".parse::<Square>().is_err());
        assert!("a9".parse::<Square>().is_err());
        assert!("a".parse::<Square>().is_err());
        assert_eq!(Square::new(0, 1), Err(SquareError::File(0)));
        for s in Square::all() {
            assert_eq!(Square::from_index(s.index()), s);
            assert_eq!(s.to_string().parse::<Square>().unwrap(), s);
        }
    }

    #[test]
    fn adjacency() {
        assert!(is_adjacent(sq("a1"), sq("b2")));
        assert!(!is_adjacent(sq("a1"), sq("a1")));
        assert!(!is_adjacent(sq("a1"), sq("c2")));
    }

    #[test]
    fn rook_attack_lines() {
        assert!(rook_attacks(sq("c3"), sq("c1"), sq("a3")));
        assert!(!rook_attacks(sq("c3"), sq("c2"), sq("c1")));
        assert!(!rook_attacks(sq("b3"), sq("a1"), sq("c2")));
        // king beyond the target does not block
        assert!(rook_attacks(sq("a1"), sq("a5"), sq("a4")));
    }

    #[test]
    fn only_move_is_a1() {
        let p = btm("c1", "c3", "a2");
        let moves = legal_black_moves(&p);
        assert_eq!(moves.destinations, vec![sq("a1")]);
        assert!(!moves.captures_rook);
    }

    #[test]
    fn undefended_rook_can_be_taken() {
        let p = btm("a1", "b3", "c2");
        assert!(legal_black_moves(&p).captures_rook);
        assert_eq!(status(&p), Status::Ongoing);
    }

    #[test]
    fn defended_rook_cannot_be_taken() {
        // b2 is next to the white king on a1
        let p = btm("a1", "b2", "c3");
        assert!(!legal_black_moves(&p).captures_rook);
    }

    #[test]
    fn mate_and_stalemate() {
        assert_eq!(status(&btm("c1", "a3", "a1")), Status::Checkmate);
        assert!(legal_black_moves(&btm("c1", "a3", "a1")).is_empty());
        assert_eq!(status(&btm("c1", "b2", "a1")), Status::Stalemate);
    }

    #[test]
    fn cannot_retreat_along_checking_line() {
        // rook on a8 checks the king on a4; a3 and a5 stay attacked
        let p = btm("h1", "a8", "a4");
        let d = legal_black_moves(&p).destinations;
        assert!(!d.contains(&sq("a3")));
        assert!(!d.contains(&sq("a5")));
        assert!(d.contains(&sq("b3")));
    }

    #[test]
    fn white_rook_slides() {
        let p = Position::new(sq("c1"), sq("c3"), sq("a1"), Side::White).unwrap();
        assert!(legal_white_moves(&p).contains(&(Piece::Rook, sq("a3"))));

        let open = Position::new(sq("a1"), sq("d4"), sq("h8"), Side::White).unwrap();
        let rook = legal_white_moves(&open)
            .into_iter()
            .filter(|(pc, _)| *pc == Piece::Rook)
            .count();
        assert_eq!(rook, 14);
    }

    #[test]
    fn white_king_steps_avoid_black_king() {
        let p = Position::new(sq("a1"), sq("h8"), sq("c1"), Side::White).unwrap();
        let king: Vec<Square> = legal_white_moves(&p)
            .into_iter()
            .filter(|(pc, _)| *pc == Piece::King)
            .map(|(_, s)| s)
            .collect();
        // brute force: every neighbour of a1 not adjacent to c1 and not occupied
        let expected: Vec<Square> = Square::all()
            .filter(|&s| is_adjacent(s, sq("a1")) && !is_adjacent(s, sq("c1")) && s != sq("c1"))
            .collect();
        assert_eq!(king, expected);
        assert_eq!(king, vec![sq("a2")]);
    }

    #[test]
    fn position_errors_name_the_rule() {
        let e = Position::new(sq("a1"), sq("a1"), sq("c3"), Side::Black).unwrap_err();
        assert_eq!(e.rule(), "overlap");
        let e = Position::new(sq("a1"), sq("h8"), sq("a2"), Side::Black).unwrap_err();
        assert_eq!(e.rule(), "kings_adjacent");
        let e = Position::new(sq("a1"), sq("h8"), sq("h3"), Side::White).unwrap_err();
        assert_eq!(e.rule(), "side_not_to_move_in_check");
        assert!(Position::new(sq("a1"), sq("h8"), sq("h3"), Side::Black).is_ok());
    }

    #[test]
    fn transforms_are_bijections() {
        for t in SymmetryTransform::ALL {
            let mut seen = [false; 64];
            for s in Square::all() {
                let img = t.apply(s);
                assert!(!seen[img.index()]);
                seen[img.index()] = true;
                assert_eq!(t.inverse().apply(img), s);
            }
        }
    }

    #[test]
    fn canonical_examples() {
        let p = btm("a1", "b3", "c2");
        assert_eq!(canonicalize(&p), (p, SymmetryTransform::Identity));
        let mirrored = btm("h1", "g3", "f2");
        assert_eq!(canonicalize(&mirrored), (p, SymmetryTransform::MirrorFiles));
        // diagonal king: black king pushed below the diagonal
        assert_eq!(canonicalize(&btm("a1", "a3", "b4")).0, btm("a1", "c1", "d2"));
    }
}
