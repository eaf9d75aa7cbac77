use std::collections::HashMap;

use rayon::prelude::*;

use super::{circle_fit, extract, S21Trace, TerminatedExtraction};
use crate::Result;

/// One open/terminated measurement at a single power and temperature.
#[derive(Debug, Clone)]
pub struct TracePair {
    /// Identifies the physical resonator pair; rows sharing it form one sweep.
    pub pair_id: String,
    pub open: S21Trace,
    pub terminated: S21Trace,
}

impl TracePair {
    pub fn power_dbm(&self) -> Option<f64> {
        self.terminated.power_dbm.or(self.open.power_dbm)
    }

    pub fn temperature_k(&self) -> Option<f64> {
        self.terminated.temp_k.or(self.open.temp_k)
    }
}

#[derive(Debug)]
pub struct BatchRow {
    pub pair_id: String,
    pub power_dbm: Option<f64>,
    pub temperature_k: Option<f64>,
    pub result: Result<TerminatedExtraction>,
    /// Lowest-power successful row of its pair: the single-photon figure.
    pub headline: bool,
}

/// Fits and extracts every pair in parallel. Output order follows input order
/// and a failing pair does not stop the others.
pub fn sweep_batch(pairs: &[TracePair], z0_ohm: f64) -> Vec<BatchRow> {
    let mut rows: Vec<BatchRow> = pairs
        .par_iter()
        .map(|pair| {
            let result = circle_fit(&pair.open)
                .and_then(|open| circle_fit(&pair.terminated).map(|term| (open, term)))
                .and_then(|(open, term)| extract(&term, &open, z0_ohm));
            BatchRow {
                pair_id: pair.pair_id.clone(),
                power_dbm: pair.power_dbm(),
                temperature_k: pair.temperature_k(),
                result,
                headline: false,
            }
        })
        .collect();

    let mut best: HashMap<&str, usize> = HashMap::new();
    for (i, row) in rows.iter().enumerate() {
        if row.result.is_err() {
            continue;
        }
        let key = |r: &BatchRow| {
            (r.power_dbm.unwrap_or(f64::INFINITY), r.temperature_k.unwrap_or(f64::INFINITY))
        };
        match best.get(row.pair_id.as_str()) {
            Some(&j) if key(&rows[j]) <= key(row) => {}
            _ => {
                best.insert(row.pair_id.as_str(), i);
            }
        }
    }
    let marked: Vec<usize> = best.into_values().collect();
    for i in marked {
        rows[i].headline = true;
    }
    rows
}
