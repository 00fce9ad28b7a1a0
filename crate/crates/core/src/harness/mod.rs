//! Experiment harness: run configuration, benchmark protocol and the CSV and
//! SVG artefacts the command line tool writes.

pub mod bench;
pub mod config;
pub mod svg;

use serde::Serialize;

use crate::error::OracleError;
use crate::netmodel::UeLayout;
use crate::oracle::{oracle_max_off, OracleMode};
use crate::rng::{derive_seed, rng_from, STREAM_ORACLE};
use crate::trainer::records_to_csv;
use config::RunConfig;

pub const ORACLE_CSV_HEADER: &str = "layout_seed,mode,max_off,feasible_count,flags_bitstring";

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleRow {
    pub layout_seed: u64,
    pub mode: &'static str,
    pub max_off: usize,
    pub feasible_count: u64,
    /// `1` marks an ON card; empty when no mask is feasible.
    pub flags_bitstring: String,
}

/// Solves `layouts` fresh layouts; layout `i` is drawn from its own derived seed.
pub fn oracle_rows(cfg: &RunConfig, layouts: usize, seed: u64, mode: OracleMode) -> Result<Vec<OracleRow>, OracleError> {
    let net = &cfg.network;
    (0..layouts)
        .map(|i| {
            let layout_seed = derive_seed(seed, &[STREAM_ORACLE, i as u64]);
            let layout = UeLayout::sample(net, &mut rng_from(layout_seed, &[]));
            let res = oracle_max_off(net, &layout, mode)?;
            Ok(OracleRow {
                layout_seed,
                mode: mode.name(),
                max_off: res.max_off,
                feasible_count: res.feasible_count,
                flags_bitstring: res.flags_bitstring(),
            })
        })
        .collect()
}

pub fn oracle_csv(rows: &[OracleRow]) -> Result<String, csv::Error> {
    if rows.is_empty() {
        return Ok(format!("{ORACLE_CSV_HEADER}\n"));
    }
    records_to_csv(rows)
}
