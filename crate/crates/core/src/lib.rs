//! KRK endgame laboratory: chess rules, a retrograde solver that regenerates
//! the game-result labels, dataset handling, a topology script language and
//! four from-scratch multiclass classifiers with their evaluation metrics.

pub mod chess;
pub mod data;
pub mod eval;
pub mod label;
pub mod models;
pub mod netscript;
pub mod oracle;
