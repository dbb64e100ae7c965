//! Dataset ingestion, feature encoding, splitting and class statistics.
//!
//! The on-disk format is one record per line, `F,R,F,R,F,R,LABEL`, giving
//! the white king, white rook and black king squares followed by the game
//! result. No header; LF or CRLF line endings.

use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chess::{Position, PositionError, Side, Square};
use crate::label::{ClassLabel, LabelError, NUM_CLASSES};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("format error: {0}")]
    Format(String),
    #[error("illegal position: {0}")]
    IllegalPosition(#[from] PositionError),
    #[error("line {line}: {source}")]
    Line {
        line: usize,
        #[source]
        source: Box<DataError>,
    },
    #[error("empty record set")]
    Empty,
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("degenerate split: class {0} has no training rows")]
    DegenerateSplit(ClassLabel),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<LabelError> for DataError {
    fn from(e: LabelError) -> Self {
        DataError::Format(e.to_string())
    }
}

/// One dataset row: a black-to-move position and its game result.
#[derive(Copy, Clone, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub struct Record {
    pub wk: Square,
    pub wr: Square,
    pub bk: Square,
    pub label: ClassLabel,
}

impl Record {
    pub fn new(position: &Position, label: ClassLabel) -> Self {
        Record {
            wk: position.wk,
            wr: position.wr,
            bk: position.bk,
            label,
        }
    }

    pub fn position(&self) -> Result<Position, PositionError> {
        Position::new(self.wk, self.wr, self.bk, Side::Black)
    }

    /// The record in file syntax, without line terminator.
    pub fn to_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.wk.file_char(),
            self.wk.rank(),
            self.wr.file_char(),
            self.wr.rank(),
            self.bk.file_char(),
            self.bk.rank(),
            self.label
        )
    }

    /// The six raw attributes as integers (files mapped a..h -> 1..8).
    pub fn attributes(&self) -> [u8; 6] {
        [
            self.wk.file(),
            self.wk.rank(),
            self.wr.file(),
            self.wr.rank(),
            self.bk.file(),
            self.bk.rank(),
        ]
    }
}

pub fn parse_record(line: &str) -> Result<Record, DataError> {
    let fields: Vec<&str> = line.trim_end_matches(['\r', '\n']).split(',').map(str::trim).collect();
    if fields.len() != 7 {
        return Err(DataError::Format(format!("expected 7 fields, found {}", fields.len())));
    }
    let square = |file: &str, rank: &str| -> Result<Square, DataError> {
        let f = match file.as_bytes() {
            [c @ b'a'..=b'h'] => c - b'a' + 1,
            _ => return Err(DataError::Format(format!("bad file {file:?}"))),
        };
        let r = match rank.as_bytes() {
            [c @ b'1'..=b'8'] => c - b'0',
            _ => return Err(DataError::Format(format!("bad rank {rank:?}"))),
        };
        Square::new(f, r).map_err(|e| DataError::Format(e.to_string()))
    };
    let wk = square(fields[0], fields[1])?;
    let wr = square(fields[2], fields[3])?;
    let bk = square(fields[4], fields[5])?;
    let label: ClassLabel = fields[6].parse()?;
    Position::new(wk, wr, bk, Side::Black)?;
    Ok(Record { wk, wr, bk, label })
}

/// Parses every non-blank line, preserving order. Errors carry the 1-based
/// line number.
pub fn load_dataset<R: BufRead>(source: R) -> Result<Vec<Record>, DataError> {
    let mut records = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = parse_record(&line).map_err(|e| DataError::Line {
            line: i + 1,
            source: Box::new(e),
        })?;
        records.push(record);
    }
    Ok(records)
}

pub fn write_dataset<W: Write>(mut sink: W, records: &[Record]) -> std::io::Result<()> {
    for r in records {
        writeln!(sink, "{}", r.to_line())?;
    }
    Ok(())
}

#[derive(Copy, Clone, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncodingKind {
    /// Six integer columns.
    Ordinal,
    /// Six blocks of eight indicators.
    OneHot,
    /// Files as blocks of eight indicators, ranks as scalar columns: the
    /// letter columns are categorical, the digit columns numeric.
    Mixed,
}

#[derive(Copy, Clone, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    None,
    MinMax,
}

#[derive(Copy, Clone, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub struct EncodingScheme {
    pub kind: EncodingKind,
    pub normalize: Normalization,
}

impl EncodingScheme {
    pub const ORDINAL_MINMAX: EncodingScheme = EncodingScheme {
        kind: EncodingKind::Ordinal,
        normalize: Normalization::MinMax,
    };
    pub const ONE_HOT: EncodingScheme = EncodingScheme {
        kind: EncodingKind::OneHot,
        normalize: Normalization::None,
    };
    pub const MIXED_MINMAX: EncodingScheme = EncodingScheme {
        kind: EncodingKind::Mixed,
        normalize: Normalization::MinMax,
    };

    pub fn width(&self) -> usize {
        match self.kind {
            EncodingKind::Ordinal => 6,
            EncodingKind::OneHot => 48,
            EncodingKind::Mixed => 27,
        }
    }
}

/// A fitted encoding: the scheme plus per-column ranges for min-max scaling.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct Encoder {
    pub scheme: EncodingScheme,
    pub column_min: [u8; 6],
    pub column_max: [u8; 6],
}

impl Encoder {
    pub fn fit(records: &[Record], scheme: EncodingScheme) -> Result<Self, DataError> {
        if records.is_empty() {
            return Err(DataError::Empty);
        }
        let mut column_min = [u8::MAX; 6];
        let mut column_max = [u8::MIN; 6];
        for r in records {
            for (c, v) in r.attributes().into_iter().enumerate() {
                column_min[c] = column_min[c].min(v);
                column_max[c] = column_max[c].max(v);
            }
        }
        Ok(Encoder {
            scheme,
            column_min,
            column_max,
        })
    }

    pub fn width(&self) -> usize {
        self.scheme.width()
    }

    /// Short identifier stored alongside trained models.
    pub fn fingerprint(&self) -> String {
        let kind = match self.scheme.kind {
            EncodingKind::Ordinal => "ordinal",
            EncodingKind::OneHot => "onehot",
            EncodingKind::Mixed => "mixed",
        };
        let norm = match self.scheme.normalize {
            Normalization::None => "raw",
            Normalization::MinMax => "minmax",
        };
        format!("{kind}-{norm}-w{}", self.width())
    }

    pub fn encode_attributes(&self, attrs: [u8; 6], out: &mut Vec<f64>) {
        match self.scheme.kind {
            EncodingKind::Ordinal => {
                for (c, v) in attrs.into_iter().enumerate() {
                    out.push(self.scale(c, v));
                }
            }
            EncodingKind::OneHot => {
                for v in attrs {
                    push_indicators(v, out);
                }
            }
            EncodingKind::Mixed => {
                for (c, v) in attrs.into_iter().enumerate() {
                    if c % 2 == 0 {
                        push_indicators(v, out);
                    } else {
                        out.push(self.scale(c, v));
                    }
                }
            }
        }
    }

    pub fn encode_position(&self, p: &Position) -> Vec<f64> {
        let attrs = [
            p.wk.file(),
            p.wk.rank(),
            p.wr.file(),
            p.wr.rank(),
            p.bk.file(),
            p.bk.rank(),
        ];
        let mut out = Vec::with_capacity(self.width());
        self.encode_attributes(attrs, &mut out);
        out
    }

    fn scale(&self, column: usize, v: u8) -> f64 {
        match self.scheme.normalize {
            Normalization::None => v as f64,
            Normalization::MinMax => {
                let (lo, hi) = (self.column_min[column], self.column_max[column]);
                if hi == lo {
                    0.0
                } else {
                    (v as f64 - lo as f64) / (hi as f64 - lo as f64)
                }
            }
        }
    }

    /// Recovers the integer attributes from an ordinal row.
    pub fn decode_ordinal(&self, row: &[f64]) -> Option<[u8; 6]> {
        if self.scheme.kind != EncodingKind::Ordinal || row.len() != 6 {
            return None;
        }
        let mut out = [0u8; 6];
        for c in 0..6 {
            let v = match self.scheme.normalize {
                Normalization::None => row[c],
                Normalization::MinMax => {
                    let (lo, hi) = (self.column_min[c] as f64, self.column_max[c] as f64);
                    lo + row[c] * (hi - lo)
                }
            };
            out[c] = v.round() as u8;
        }
        Some(out)
    }
}

fn push_indicators(v: u8, out: &mut Vec<f64>) {
    for k in 1..=8u8 {
        out.push(if k == v { 1.0 } else { 0.0 });
    }
}

/// Row-major feature matrix with class indices in the fixed class order.
#[derive(Clone, Debug)]
pub struct EncodedMatrix {
    pub features: Vec<f64>,
    pub labels: Vec<usize>,
    pub n_cols: usize,
    pub encoder: Encoder,
}

impl EncodedMatrix {
    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Builds a matrix directly from rows, for synthetic problems.
    pub fn from_rows(rows: &[Vec<f64>], labels: &[usize], encoder: Encoder) -> Self {
        let n_cols = rows.first().map_or(0, Vec::len);
        let features = rows.iter().flat_map(|r| r.iter().copied()).collect();
        EncodedMatrix {
            features,
            labels: labels.to_vec(),
            n_cols,
            encoder,
        }
    }

    pub fn select(&self, indices: &[usize]) -> EncodedMatrix {
        let mut features = Vec::with_capacity(indices.len() * self.n_cols);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        EncodedMatrix {
            features,
            labels,
            n_cols: self.n_cols,
            encoder: self.encoder.clone(),
        }
    }

    pub fn class_counts(&self) -> [usize; NUM_CLASSES] {
        let mut counts = [0; NUM_CLASSES];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }
}

pub fn encode(records: &[Record], scheme: EncodingScheme) -> Result<EncodedMatrix, DataError> {
    let encoder = Encoder::fit(records, scheme)?;
    Ok(encode_with(records, &encoder))
}

/// Encodes with an already fitted encoder (e.g. the one stored in a model).
pub fn encode_with(records: &[Record], encoder: &Encoder) -> EncodedMatrix {
    let n_cols = encoder.width();
    let mut features = Vec::with_capacity(records.len() * n_cols);
    for r in records {
        encoder.encode_attributes(r.attributes(), &mut features);
    }
    EncodedMatrix {
        features,
        labels: records.iter().map(|r| r.label.index()).collect(),
        n_cols,
        encoder: encoder.clone(),
    }
}

#[derive(Copy, Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.7,
            seed: 20210306,
            stratified: true,
        }
    }
}

/// Partitions row indices into (train, test), each sorted ascending.
///
/// The training part has exactly `floor(n * train_fraction)` rows. Under
/// stratification each class receives its floored share and the leftover
/// rows go to the classes with the largest fractional remainders (ties to
/// the lower class index), so every class is within one row of its exact
/// proportion.
pub fn split_indices(labels: &[usize], spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>), DataError> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(DataError::InvalidSplit(format!(
            "train_fraction {} not in (0, 1)",
            spec.train_fraction
        )));
    }
    let n = labels.len();
    let target = (n as f64 * spec.train_fraction).floor() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut train = Vec::with_capacity(target);
    let mut test = Vec::with_capacity(n - target);

    if !spec.stratified {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        train.extend_from_slice(&order[..target]);
        test.extend_from_slice(&order[target..]);
    } else {
        let n_classes = labels.iter().copied().max().map_or(0, |m| m + 1);
        let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
        for (i, &l) in labels.iter().enumerate() {
            by_class[l].push(i);
        }
        let exact: Vec<f64> = by_class
            .iter()
            .map(|rows| rows.len() as f64 * spec.train_fraction)
            .collect();
        let mut quota: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
        let assigned: usize = quota.iter().sum();
        let mut order: Vec<usize> = (0..n_classes).filter(|&c| !by_class[c].is_empty()).collect();
        order.sort_by(|&a, &b| {
            let ra = exact[a] - exact[a].floor();
            let rb = exact[b] - exact[b].floor();
            rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
        });
        for &c in order.iter().take(target.saturating_sub(assigned)) {
            quota[c] += 1;
        }
        for (c, rows) in by_class.iter_mut().enumerate() {
            if rows.is_empty() {
                continue;
            }
            if quota[c] == 0 {
                return Err(DataError::DegenerateSplit(ClassLabel::from_index(c)?));
            }
            rows.shuffle(&mut rng);
            train.extend_from_slice(&rows[..quota[c]]);
            test.extend_from_slice(&rows[quota[c]..]);
        }
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn split(matrix: &EncodedMatrix, spec: &SplitSpec) -> Result<(EncodedMatrix, EncodedMatrix), DataError> {
    let (train, test) = split_indices(&matrix.labels, spec)?;
    Ok((matrix.select(&train), matrix.select(&test)))
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct ClassStat {
    pub label: ClassLabel,
    pub count: usize,
    pub percent: f64,
}

/// Count and percentage per class, all eighteen classes in class order.
pub fn statistics(records: &[Record]) -> Vec<ClassStat> {
    let mut counts = [0usize; NUM_CLASSES];
    for r in records {
        counts[r.label.index()] += 1;
    }
    let total = records.len();
    ClassLabel::all()
        .map(|label| {
            let count = counts[label.index()];
            let percent = if total == 0 {
                0.0
            } else {
                count as f64 * 100.0 / total as f64
            };
            ClassStat { label, count, percent }
        })
        .collect()
}

pub fn statistics_csv(stats: &[ClassStat]) -> String {
    let mut out = String::from("label,count,percent\n");
    for s in stats {
        out.push_str(&format!("{},{},{:.2}\n", s.label, s.count, s.percent));
    }
    out
}
