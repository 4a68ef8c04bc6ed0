//! Configuration, record store, inequality verdicts, reports and the selftest.

pub mod config;
pub mod report;
pub mod run;
pub mod selftest;
pub mod store;
pub mod verdict;

pub use config::{parse_config, ExperimentConfig, Quantity, Target};
pub use report::report;
pub use run::{invariants_from_paths, measure, run, simulate, RunOutcome, VERSION};
pub use selftest::{selftest, SelftestOptions, SelftestReport};
pub use store::{ResultRecord, Store};
pub use verdict::{inequality_chain, judge, Inequality, InequalityVerdict, Side, Verdict};

use crate::error::{Error, Result};

/// CSV with the record fields as columns; `config` is embedded as JSON.
pub fn records_to_csv(records: &[ResultRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::Store(e.to_string());
    w.write_record(["config", "quantity", "value", "stderr", "n", "method", "wall_ms", "ts", "version"])
        .map_err(err)?;
    for r in records {
        w.write_record([
            r.config.to_string(),
            r.quantity.clone(),
            r.value.to_string(),
            r.stderr.to_string(),
            r.n.to_string(),
            r.method.clone(),
            r.wall_ms.to_string(),
            r.ts.to_string(),
            r.version.clone(),
        ])
        .map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Store(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Store(e.to_string()))
}
