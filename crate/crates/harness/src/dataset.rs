use std::fs;
use std::time::Instant;

use krk_core::data::{load_dataset, write_dataset, DataError, Record};
use krk_core::oracle::{export_dataset, solve, Tablebase};
use sha2::{Digest, Sha256};

use crate::config::DatasetSource;

/// Records loaded once and shared by every run that names the same source.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub source: DatasetSource,
    pub records: Vec<Record>,
    /// Hex SHA-256 of the file bytes, or of the generated file's text.
    pub sha256: String,
    /// Seconds spent solving or reading.
    pub load_seconds: f64,
}

impl Dataset {
    pub fn load(source: &DatasetSource) -> Result<Dataset, DataError> {
        let started = Instant::now();
        let (records, bytes) = match source {
            DatasetSource::Oracle => {
                let records = export_dataset(&solve());
                let mut bytes = Vec::new();
                write_dataset(&mut bytes, &records)?;
                (records, bytes)
            }
            DatasetSource::File(path) => {
                let bytes = fs::read(path)?;
                (load_dataset(bytes.as_slice())?, bytes)
            }
        };
        Ok(Dataset {
            source: source.clone(),
            records,
            sha256: sha256_hex(&bytes),
            load_seconds: started.elapsed().as_secs_f64(),
        })
    }

    pub fn from_tablebase(tb: &Tablebase) -> Dataset {
        let started = Instant::now();
        let records = export_dataset(tb);
        let mut bytes = Vec::new();
        write_dataset(&mut bytes, &records).expect("writing to memory");
        Dataset {
            source: DatasetSource::Oracle,
            records,
            sha256: sha256_hex(&bytes),
            load_seconds: started.elapsed().as_secs_f64(),
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
